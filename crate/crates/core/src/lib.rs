//! Simulation of a dual-eigenvalue nonlinear frequency-division multiplexed
//! fiber link: soliton synthesis, split-step propagation and NFT detection.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod harness;
pub mod inft;
pub mod modem;
pub mod nft;
pub mod units;
