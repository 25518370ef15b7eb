//! Analysis, dilation and simulation of finite-dimensional quantum Markov
//! semigroups.

pub mod cli;
pub mod dephasing;
pub mod dilation;
pub mod error;
pub mod linalg;
pub mod model;
pub mod random;
pub mod semigroup;
pub mod trajectories;

pub use error::{Error, Result};
pub use linalg::{Operator, Tolerance, C64};
pub use model::GeneratorSpec;
