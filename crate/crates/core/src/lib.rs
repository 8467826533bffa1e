//! Learning with class-conditional label noise.
//!
//! Exact noise models and discrete-world oracles, closed-form accuracy and
//! generalization bounds, a small MLP trained by plain SGD, noisy-validation
//! model selection (teacher/student), and scripted experiments.

pub mod bounds;
pub mod classifier;
pub mod data;
pub mod error;
pub mod experiments;
pub mod noise;
pub mod nts;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
