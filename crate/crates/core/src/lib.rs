pub mod answer;
pub mod cluster;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod matcher;
pub mod pipeline;
pub mod report;
pub mod sample_size;
pub mod scorer;
pub mod seeding;
pub mod synthetic;
pub mod validation;

pub use error::{Error, Result};
