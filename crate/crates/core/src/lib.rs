pub mod checks;
pub mod error;
pub mod estimators;
pub mod fisher;
pub mod kernels;
pub mod measures;
pub mod model;
pub mod pointproc;
pub mod quadrature;
pub mod registry;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
