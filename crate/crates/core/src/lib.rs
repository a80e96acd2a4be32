//! Desk-scale text-to-video sequence modeling.
//!
//! Captions and video frames are embedded into one hidden space, a causal
//! transformer predicts the next element of the joint sequence, a U-Net
//! reconstructs frames from noised versions, and a composite loss trains the
//! whole stack end to end. Everything runs on a small f64 autodiff engine
//! with bitwise-deterministic training and resume.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod image_io;
pub mod loss;
pub mod model;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod text;
pub mod train;
pub mod vision;

pub use error::{Error, Result};
pub use tensor::{Graph, NodeId, ParamId, ParamStore, Tensor};
