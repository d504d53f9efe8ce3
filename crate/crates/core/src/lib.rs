//! Finite-dimensional open quantum system dynamics: channels, GKSL generators,
//! time-local evolution and Markovianity audits.

pub mod channel;
pub mod closed_forms;
pub mod error;
pub mod evolution;
pub mod generator;
pub mod linalg;
pub mod markovianity;
pub mod quadrature;
pub mod random;
pub mod rates;
pub mod report;
pub mod scenario;
pub mod state;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
