//! Joint pilot, training-length and beamforming design for a communication-centric
//! integrated sensing and communication transmitter.

pub mod error;
pub mod numerics;
pub mod channel;
pub mod detection;
pub mod estimation;
pub mod optimizer;
pub mod pilot;
pub mod experiments;

pub use error::{IsacError, Result};
