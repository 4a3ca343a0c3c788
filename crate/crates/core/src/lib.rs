pub mod catalog;
pub mod config;
pub mod continuation;
pub mod error;
pub mod expr;
pub mod hypersurface;
pub mod json;
pub mod linalg;
pub mod monodromy;
pub mod quadric;
pub mod segresets;

pub use config::{Config, Tolerances};
pub use error::{Error, Result};
