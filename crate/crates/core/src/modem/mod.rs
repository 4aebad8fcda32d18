//! Bits to spectra and back: constellation, framing, offset correction,
//! detection and error counting.

pub mod ber;
pub mod constellation;
pub mod detect;
pub mod frame;
pub mod gray;
pub mod offsets;
pub mod prbs;

pub use ber::{BerCounts, BerReport};
pub use constellation::{build_constellation, ConstellationParams, ConstellationTable, Partition, Symbol};
pub use detect::{backrotate, decide, detect_frame, BackrotationMode, DetectionConfig, ScatterRecord};
pub use frame::{assemble_frame, Frame};
pub use gray::{gray_demap, gray_map};
pub use offsets::{correct_offsets, impose_offsets, OffsetEstimate};
pub use prbs::prbs11;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModemError {
    #[error("PRBS seed {0} must be a nonzero 11-bit value")]
    InvalidSeed(u64),
    #[error("bit count {0} is not a positive multiple of 4")]
    BitCount(usize),
    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),
    #[error("offset fit is degenerate: no overlapping signal energy")]
    DegenerateFit,
    #[error("spectral amplitude has zero magnitude")]
    ZeroAmplitude,
    #[error("found {0} eigenvalues, need 2")]
    MissingEigenvalues(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Nft(#[from] crate::nft::NftError),
    #[error(transparent)]
    Inft(#[from] crate::inft::InftError),
    #[error(transparent)]
    Units(#[from] crate::units::UnitsError),
}
