//! Meta-learning engine for cross-lingual transfer experiments.

pub mod autodiff;
pub mod checkpoint;
pub mod corpus;
pub mod episode;
pub mod error;
pub mod eval;
pub mod loss;
pub mod meta;
pub mod model;
pub mod optim;
pub mod params;
pub mod seed;
pub mod tape;
pub mod tensor;
pub mod typology;

pub use error::{Error, Result};
pub use params::ParamVector;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
