//! Motion-sickness prediction from video via a convolutional autoencoder's
//! reconstruction error, plus questionnaire scoring and correlation.

pub mod autoencoder;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod ops;
pub mod optim;
pub mod scoring;
pub mod ssq;
pub mod synthcam;
pub mod tensor;

pub use autoencoder::{Model, Network, NetworkConfig, Reconstructor};
pub use data::{FrameSequence, FrameStack, GrayFrame};
pub use error::{Error, Result};
pub use tensor::{Real, Tensor};
