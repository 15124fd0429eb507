//! Thread recommendation for discussion forums with co-evolving student and thread
//! embeddings.

pub mod corpus;
pub mod error;
pub mod model;
pub mod recommend;
pub mod scalar;
pub mod synth;
pub mod text;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
