//! Vertebral compression fracture detection on CT-like spine volumes.
//!
//! The pipeline localizes the spinal canal on sampled axial slices, reslices
//! the volume sagittally, tiles the column around the canal into a short
//! sequence of 3D patches and scores it with a patch-sequence classifier.

pub mod augment;
pub mod checkpoint;
pub mod cord;
mod error;
mod layers;
pub mod metrics;
pub mod model;
pub mod phantom;
pub mod pipeline;
pub mod representation;
pub mod render;
pub mod resample;
pub mod train;
pub mod volume;

pub use error::{Error, Result};
