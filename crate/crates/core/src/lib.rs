//! Synthetic curvilinear-structure segmentation data.
//!
//! Fractal L-system trees are rasterized into labeled masks, given the
//! low-frequency appearance of real unlabeled images by Fourier amplitude
//! transfer, augmented, and re-encoded with a local intensity-order
//! transform. Reference implementations of the adversarial and contrastive
//! training losses and of the evaluation metrics live in [`losses`].

pub mod augment;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod fda;
pub mod fft;
pub mod imageio;
pub mod liot;
pub mod losses;
pub mod lsystem;
pub mod raster;
pub mod rng;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use exec::Execution;
