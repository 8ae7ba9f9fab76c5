pub mod changepoint;
pub mod ci;
pub mod dgp;
pub mod experiments;
pub mod io;
pub mod error;
pub mod estimators;
pub mod limitsim;
pub mod numerics;
pub mod rng;
pub mod series;

pub use error::{Error, Result};
