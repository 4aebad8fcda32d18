//! Bits to symbol frames.

use super::constellation::{index_of, ks_of, ConstellationTable};
use super::gray::{gray_demap, gray_map};
use super::ModemError;
use crate::units::ComplexEnvelope;
use num_complex::Complex64;

/// Zero slots padded at each end of a frame.
pub const DEFAULT_GUARD_SLOTS: usize = 1;

/// A transmitted frame and its symbol sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub envelope: ComplexEnvelope,
    /// 1-based symbol indices in transmission order.
    pub tx_indices: Vec<u8>,
    pub guard_slots: usize,
}

impl Frame {
    pub fn n_symbols(&self) -> usize {
        self.tx_indices.len()
    }

    /// Envelope slot holding the `i`-th symbol.
    pub fn symbol_slot(&self, i: usize) -> usize {
        i + self.guard_slots
    }

    /// Payload bits recovered from the symbol indices.
    pub fn bits(&self) -> Vec<u8> {
        self.tx_indices.iter().flat_map(|&i| index_bits(i)).collect()
    }
}

/// The four bits of a symbol, most significant first.
pub fn index_bits(index: u8) -> [u8; 4] {
    let (k1, k2) = ks_of(index);
    let (a, b) = (gray_demap(k1), gray_demap(k2));
    [a >> 1, a & 1, b >> 1, b & 1]
}

/// Groups bits by four: the first pair selects `k₁`, the second `k₂`.
pub fn bits_to_indices(bits: &[u8]) -> Result<Vec<u8>, ModemError> {
    if !bits.len().is_multiple_of(4) {
        return Err(ModemError::BitCount(bits.len()));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(ModemError::InvalidParameter("bits must be 0 or 1".into()));
    }
    Ok(bits
        .chunks_exact(4)
        .map(|c| index_of(gray_map((c[0] << 1) | c[1]), gray_map((c[2] << 1) | c[3])))
        .collect())
}

/// Concatenates symbol waveforms with `guard_slots` zero slots at each end.
pub fn assemble_frame(bits: &[u8], table: &ConstellationTable, guard_slots: usize) -> Result<Frame, ModemError> {
    let tx_indices = bits_to_indices(bits)?;
    if tx_indices.is_empty() {
        return Err(ModemError::BitCount(0));
    }
    let sps = table.params.samples_per_symbol;
    let zero = Complex64::new(0.0, 0.0);
    let mut samples = Vec::with_capacity((tx_indices.len() + 2 * guard_slots) * sps);
    samples.resize(guard_slots * sps, zero);
    for &i in &tx_indices {
        let s = table.symbol(i).expect("index from bits_to_indices is valid");
        samples.extend_from_slice(s.waveform.samples());
    }
    samples.resize(samples.len() + guard_slots * sps, zero);
    Ok(Frame {
        envelope: ComplexEnvelope::new(samples, table.params.dt(), sps)?,
        tx_indices,
        guard_slots,
    })
}
