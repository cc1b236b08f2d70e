pub mod error;
pub mod expfam;
pub mod maps;
pub mod numerics;
pub mod selfcheck;
pub mod optim;
pub mod targets;
pub mod tasks;

pub use error::{Error, Result};
