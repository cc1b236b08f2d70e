use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use sngd_core::selfcheck::{self, Fault, Scope, GRAD_TOLERANCE};
use sngd_core::tasks::experiment::{self, Manifest, RunResult};
use sngd_core::tasks::ExperimentConfig;
use sngd_core::{Error, Result};

#[derive(Parser)]
#[command(name = "sngd", about = "Surrogate natural gradient descent experiments", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (grid cell, seed) of an experiment config.
    Run(RunArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        /// targets, maps, chain or all
        #[arg(default_value = "all")]
        scope: Scope,
        /// Seeded points per item.
        #[arg(long, default_value_t = 10)]
        points: usize,
        /// Deliberately break one gradient to exercise the checker.
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Run the property suites with their tolerances.
    Selfcheck,
    /// Print the version.
    Version,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, overriding output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Config override such as optimizer.step_size=0.5; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Gradcheck { scope, points, inject_fault } => cmd_gradcheck(scope, points, inject_fault),
        Command::Selfcheck => Ok(cmd_selfcheck()),
        Command::Version => {
            println!("sngd {}", env!("CARGO_PKG_VERSION"));
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config, &args.set)?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    let task = experiment::load_task(&cfg)?;
    let specs = experiment::plan(&cfg);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs: must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;

    // each run writes its own file; the manifest is written once at the end
    let results: Vec<Result<RunResult>> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let r = experiment::execute(&cfg, &task, spec);
                experiment::write_trace_csv(&dir.join(format!("{}.csv", spec.run_id)), &spec.run_id, &r.trace)?;
                Ok(r)
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    for r in &results {
        let last = r.trace.last().map_or(String::from("-"), |row| format!("{:.10e}", row.objective));
        println!("{}: {} after {} iterations, objective {last}", r.spec.run_id, r.trace.status.label(), r.trace.iterations());
    }
    let manifest = Manifest::build(&cfg, &task, &results);
    write(&dir.join("manifest.toml"), &manifest.to_toml())?;
    if !manifest.ok {
        let failed = results.iter().filter(|r| r.trace.status.is_failure()).count();
        eprintln!("{failed} of {} runs failed; see {}", results.len(), dir.join("manifest.toml").display());
    }
    Ok(manifest.ok)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn cmd_gradcheck(scope: Scope, points: usize, fault: Option<Fault>) -> Result<bool> {
    let items = selfcheck::gradient_suite(scope, points, fault)?;
    let mut failing = Vec::new();
    for item in &items {
        let tag = if item.passed() { "ok" } else { "FAIL" };
        println!("{:<8} {:<36} worst relative error {:.3e} over {} points  {tag}", item.suite, item.name, item.worst_error, item.points);
        if !item.passed() {
            failing.push(format!("{}/{}", item.suite, item.name));
        }
    }
    if failing.is_empty() {
        println!("all {} items within {GRAD_TOLERANCE:e}", items.len());
        Ok(true)
    } else {
        eprintln!("gradient check failed: {}", failing.join(", "));
        Ok(false)
    }
}

fn cmd_selfcheck() -> bool {
    let checks = selfcheck::run_all();
    for c in &checks {
        println!("{:>2} {:<28} {}  {}", c.id, c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    failed == 0
}
