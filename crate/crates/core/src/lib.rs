//! Finite-n gap probabilities for the Gaussian and Laguerre unitary ensembles.

pub mod calculus;
pub mod error;
pub mod gap;
pub mod ladder;
pub mod numerics;
pub mod oracle;
pub mod orthopoly;
pub mod painleve;
pub mod quad;
pub mod weights;

pub use error::{Error, Result};
pub use numerics::{PrecisionPolicy, Real};
pub use orthopoly::OpSystem;
pub use weights::{WeightSpec, Window};
