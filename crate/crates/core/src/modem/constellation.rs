//! The 16-point dual-eigenvalue constellation.
//!
//! Eigenvalues are fixed at `λ₁ = 0.6j`, `λ₂ = 0.3j`. Symbol `(k₁, k₂)`
//! carries `Q_d(λ₁) = e^{jk₁π/2}` and `Q_d(λ₂) = e^{j(k₂π/2 + π/4)}`.
//! Its index is one plus the 4-bit Gray label, with the label of `k₁` in
//! the two high bits. Under this numbering each partition below is one
//! orbit of the global `π/2` phase shift.

use super::gray::{gray_demap, gray_map};
use super::ModemError;
use crate::inft::{darboux_synthesize, darboux_synthesize_centered, shift_phase};
use crate::nft::{DiscreteSpectrum, SpectralEntry};
use crate::units::{ComplexEnvelope, DEFAULT_WINDOW_WIDTH};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;

pub const N_SYMBOLS: usize = 16;
pub const LAMBDA1: Complex64 = Complex64 { re: 0.0, im: 0.6 };
pub const LAMBDA2: Complex64 = Complex64 { re: 0.0, im: 0.3 };

const PARTITIONS: [[u8; 4]; 4] = [[1, 6, 11, 16], [2, 9, 8, 15], [3, 5, 12, 14], [4, 7, 10, 13]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Partition {
    S1,
    S2,
    S3,
    S4,
}

impl Partition {
    pub const ALL: [Partition; 4] = [Partition::S1, Partition::S2, Partition::S3, Partition::S4];

    pub fn position(self) -> usize {
        self as usize
    }

    pub fn members(self) -> [u8; 4] {
        PARTITIONS[self.position()]
    }

    /// Partition of a 1-based symbol index.
    ///
    /// # Panics
    /// If `index` is not in `1..=16`.
    pub fn of_index(index: u8) -> Partition {
        Self::ALL
            .into_iter()
            .find(|p| p.members().contains(&index))
            .unwrap_or_else(|| panic!("symbol index {index} out of range"))
    }
}

/// Symbol index (1..=16) of the phase pair `(k₁, k₂)`.
pub fn index_of(k1: u8, k2: u8) -> u8 {
    ((gray_demap(k1) << 2) | gray_demap(k2)) + 1
}

/// Phase pair of a symbol index.
pub fn ks_of(index: u8) -> (u8, u8) {
    let label = index - 1;
    (gray_map(label >> 2), gray_map(label & 0b11))
}

/// Nominal discrete spectrum of `(k₁, k₂)`.
pub fn target_spectrum(k1: u8, k2: u8, lambda1: Complex64, lambda2: Complex64) -> DiscreteSpectrum {
    let entries = vec![
        SpectralEntry {
            lambda: lambda1,
            qd: Complex64::from_polar(1.0, k1 as f64 * FRAC_PI_2),
        },
        SpectralEntry {
            lambda: lambda2,
            qd: Complex64::from_polar(1.0, k2 as f64 * FRAC_PI_2 + FRAC_PI_4),
        },
    ];
    DiscreteSpectrum::new(entries, 0.0).expect("constellation eigenvalues are distinct")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstellationParams {
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub samples_per_symbol: usize,
    /// Normalized slot width `W`.
    pub window_width: f64,
    /// Shift each waveform so its energy centroid is at the slot center.
    pub center: bool,
}

impl Default for ConstellationParams {
    fn default() -> Self {
        Self {
            lambda1: LAMBDA1,
            lambda2: LAMBDA2,
            samples_per_symbol: 64,
            window_width: DEFAULT_WINDOW_WIDTH,
            center: true,
        }
    }
}

impl ConstellationParams {
    pub fn dt(&self) -> f64 {
        self.window_width / self.samples_per_symbol as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub index: u8,
    pub k1: u8,
    pub k2: u8,
    /// 4-bit Gray label, `index - 1`.
    pub bits: u8,
    pub partition: Partition,
    pub target_spectrum: DiscreteSpectrum,
    /// Spectrum of `waveform` relative to its slot center. Differs from
    /// the target only in `|Q_d|` when the waveform is centered.
    pub effective_spectrum: DiscreteSpectrum,
    pub waveform: ComplexEnvelope,
    /// Energy fraction lost to the slot window.
    pub truncated_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationTable {
    pub params: ConstellationParams,
    symbols: Vec<Symbol>,
}

/// Builds all 16 symbols. Four base shapes `(0, d)` are synthesized; the
/// rest are global phase rotations of them.
pub fn build_constellation(params: &ConstellationParams) -> Result<ConstellationTable, ModemError> {
    if params.samples_per_symbol == 0 || !(params.window_width > 0.0) {
        return Err(ModemError::InvalidParameter(
            "samples_per_symbol and window_width must be positive".into(),
        ));
    }
    let half = params.window_width / 2.0;
    let mut bases = Vec::with_capacity(4);
    for d in 0..4u8 {
        let spec = target_spectrum(0, d, params.lambda1, params.lambda2);
        let syn = if params.center {
            darboux_synthesize_centered(&spec, params.samples_per_symbol, half)?
        } else {
            darboux_synthesize(&spec, params.samples_per_symbol, half)?
        };
        let env = ComplexEnvelope::new(syn.envelope.into_samples(), params.dt(), params.samples_per_symbol)?;
        bases.push((env, syn.effective_spectrum, syn.truncated_fraction));
    }

    let mut symbols = Vec::with_capacity(N_SYMBOLS);
    for index in 1..=N_SYMBOLS as u8 {
        let (k1, k2) = ks_of(index);
        let d = (k2 + 4 - k1) % 4;
        let (base, eff, trunc) = &bases[d as usize];
        let theta = k1 as f64 * FRAC_PI_2;
        let rot = Complex64::from_polar(1.0, theta);
        let effective = DiscreteSpectrum::new(
            eff.entries()
                .iter()
                .map(|e| SpectralEntry {
                    lambda: e.lambda,
                    qd: e.qd * rot,
                })
                .collect(),
            0.0,
        )?;
        symbols.push(Symbol {
            index,
            k1,
            k2,
            bits: index - 1,
            partition: Partition::of_index(index),
            target_spectrum: target_spectrum(k1, k2, params.lambda1, params.lambda2),
            effective_spectrum: effective,
            waveform: if k1 == 0 {
                base.clone()
            } else {
                shift_phase(base, theta)
            },
            truncated_fraction: *trunc,
        });
    }
    Ok(ConstellationTable {
        params: *params,
        symbols,
    })
}

impl ConstellationTable {
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// Symbol by 1-based index.
    pub fn symbol(&self, index: u8) -> Option<&Symbol> {
        if (1..=N_SYMBOLS as u8).contains(&index) {
            Some(&self.symbols[index as usize - 1])
        } else {
            None
        }
    }

    pub fn nominal_eigenvalues(&self) -> [Complex64; 2] {
        [self.params.lambda1, self.params.lambda2]
    }

    /// Average normalized energy per symbol of the sampled waveforms.
    pub fn mean_energy(&self) -> f64 {
        self.symbols.iter().map(|s| s.waveform.energy()).sum::<f64>() / N_SYMBOLS as f64
    }

    /// Average normalized power over a slot, `mean_energy / W`.
    pub fn mean_power(&self) -> f64 {
        self.mean_energy() / self.params.window_width
    }
}
