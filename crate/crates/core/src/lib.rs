//! Conditional GAN training on synthetic Gaussian mixtures, where a teacher
//! classifier trained purely on generated samples assigns artificial labels
//! to real data and a reliability threshold picks which labels to trust.

pub mod assignment;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod graph;
pub mod losses;
pub mod nets;
pub mod optim;
pub mod param;
pub mod selflabel;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
