//! File formats: binary waveforms, scatter CSV and BER JSON.
//!
//! Waveform layout (little endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "NFDMWF01"
//! 8       4     format version (u32, currently 1)
//! 12      1     units (0 normalized, 1 physical: seconds and √W)
//! 13      3     zero padding
//! 16      8     sample count n (u64)
//! 24      8     samples per symbol (u64)
//! 32      8     dt (f64)
//! 40      16n   samples as (re, im) f64 pairs
//! ```

use super::HarnessError;
use crate::modem::{BerReport, ScatterRecord};
use crate::units::{to_normalized, to_physical, ComplexEnvelope, NormalizationScale};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const WAVEFORM_MAGIC: &[u8; 8] = b"NFDMWF01";
pub const WAVEFORM_VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveformUnits {
    Normalized = 0,
    Physical = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformFile {
    pub units: WaveformUnits,
    pub dt: f64,
    pub samples_per_symbol: usize,
    pub samples: Vec<Complex64>,
}

impl WaveformFile {
    pub fn from_envelope(env: &ComplexEnvelope) -> Self {
        Self {
            units: WaveformUnits::Normalized,
            dt: env.dt(),
            samples_per_symbol: env.samples_per_symbol(),
            samples: env.samples().to_vec(),
        }
    }

    pub fn physical(env: &ComplexEnvelope, scale: &NormalizationScale) -> Self {
        let p = to_physical(env, scale);
        Self {
            units: WaveformUnits::Physical,
            dt: p.dt_s,
            samples_per_symbol: p.samples_per_symbol,
            samples: p.samples,
        }
    }

    /// Normalized envelope; physical files need the scale.
    pub fn to_envelope(&self, scale: Option<&NormalizationScale>) -> Result<ComplexEnvelope, HarnessError> {
        let r = match (self.units, scale) {
            (WaveformUnits::Normalized, _) => {
                ComplexEnvelope::new(self.samples.clone(), self.dt, self.samples_per_symbol)
            }
            (WaveformUnits::Physical, Some(s)) => to_normalized(&self.samples, self.dt, self.samples_per_symbol, s),
            (WaveformUnits::Physical, None) => {
                return Err(HarnessError::Format(
                    "physical waveform needs a normalization scale".into(),
                ))
            }
        };
        r.map_err(|e| HarnessError::Format(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * self.samples.len());
        out.extend_from_slice(WAVEFORM_MAGIC);
        out.extend_from_slice(&WAVEFORM_VERSION.to_le_bytes());
        out.extend_from_slice(&[self.units as u8, 0, 0, 0]);
        out.extend_from_slice(&(self.samples.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.samples_per_symbol as u64).to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.re.to_le_bytes());
            out.extend_from_slice(&s.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, HarnessError> {
        let bad = |m: &str| Err(HarnessError::Format(m.into()));
        if b.len() < HEADER_LEN || &b[..8] != WAVEFORM_MAGIC {
            return bad("not a waveform file");
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        if u32_at(8) != WAVEFORM_VERSION {
            return bad("unsupported waveform version");
        }
        let units = match b[12] {
            0 => WaveformUnits::Normalized,
            1 => WaveformUnits::Physical,
            _ => return bad("unknown units flag"),
        };
        let n = u64_at(16) as usize;
        if b.len() != HEADER_LEN + 16 * n {
            return bad("sample count does not match file length");
        }
        let samples = (0..n)
            .map(|k| Complex64::new(f64_at(HEADER_LEN + 16 * k), f64_at(HEADER_LEN + 16 * k + 8)))
            .collect();
        Ok(Self {
            units,
            dt: f64_at(32),
            samples_per_symbol: u64_at(24) as usize,
            samples,
        })
    }
}

pub fn write_waveform(path: &Path, w: &WaveformFile) -> Result<(), HarnessError> {
    std::fs::write(path, w.to_bytes()).map_err(|e| HarnessError::io(path, e))
}

pub fn read_waveform(path: &Path) -> Result<WaveformFile, HarnessError> {
    let b = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    WaveformFile::from_bytes(&b)
}

/// One scatter point, tagged with its trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: u32,
    pub record: ScatterRecord,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScatterRow {
    trial: u32,
    slot: usize,
    tx_index: u8,
    lambda1_re: f64,
    lambda1_im: f64,
    lambda2_re: f64,
    lambda2_im: f64,
    qd1_re: f64,
    qd1_im: f64,
    qd2_re: f64,
    qd2_im: f64,
    decided_index: u8,
    bit_errors: u8,
    erased: u8,
}

impl From<&TrialRecord> for ScatterRow {
    fn from(t: &TrialRecord) -> Self {
        let r = &t.record;
        Self {
            trial: t.trial,
            slot: r.slot,
            tx_index: r.tx_index,
            lambda1_re: r.lambda1.re,
            lambda1_im: r.lambda1.im,
            lambda2_re: r.lambda2.re,
            lambda2_im: r.lambda2.im,
            qd1_re: r.qd1.re,
            qd1_im: r.qd1.im,
            qd2_re: r.qd2.re,
            qd2_im: r.qd2.im,
            decided_index: r.decided_index,
            bit_errors: r.bit_errors,
            erased: r.erased as u8,
        }
    }
}

impl From<ScatterRow> for TrialRecord {
    fn from(r: ScatterRow) -> Self {
        Self {
            trial: r.trial,
            record: ScatterRecord {
                slot: r.slot,
                tx_index: r.tx_index,
                lambda1: Complex64::new(r.lambda1_re, r.lambda1_im),
                lambda2: Complex64::new(r.lambda2_re, r.lambda2_im),
                qd1: Complex64::new(r.qd1_re, r.qd1_im),
                qd2: Complex64::new(r.qd2_re, r.qd2_im),
                decided_index: r.decided_index,
                bit_errors: r.bit_errors,
                erased: r.erased != 0,
            },
        }
    }
}

pub fn scatter_to_csv(records: &[TrialRecord]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(ScatterRow::from(r))
            .map_err(|e| HarnessError::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| HarnessError::Format(e.to_string()))
}

pub fn scatter_from_csv(data: &[u8]) -> Result<Vec<TrialRecord>, HarnessError> {
    csv::Reader::from_reader(data)
        .deserialize::<ScatterRow>()
        .map(|r| {
            r.map(TrialRecord::from)
                .map_err(|e| HarnessError::Format(e.to_string()))
        })
        .collect()
}

pub fn read_scatter(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    scatter_from_csv(&std::fs::read(path).map_err(|e| HarnessError::io(path, e))?)
}

/// Contents of the BER JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub distance_km: f64,
    pub l0_km: f64,
    pub launch_power_dbm: f64,
    pub trials: usize,
    pub seed: u64,
    pub bits_per_trial: usize,
    /// Mean received OSNR over trials, when noise is added at the receiver.
    pub measured_osnr_db: Option<f64>,
    /// Carrier offsets removed by the data-aided correction in trial 0.
    pub estimated_freq_offset_hz: Option<f64>,
    pub estimated_phase_offset_rad: Option<f64>,
    pub report: BerReport,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Format(e.to_string()))
    }

    /// Human-readable rendering.
    pub fn render(&self) -> String {
        use crate::modem::Partition;
        use std::fmt::Write;
        let c = &self.report.counts;
        let mut o = String::new();
        writeln!(
            o,
            "distance        {:.1} km (L0 = {:.1} km)",
            self.distance_km, self.l0_km
        )
        .unwrap();
        writeln!(o, "launch power    {:.2} dBm", self.launch_power_dbm).unwrap();
        if let Some(osnr) = self.measured_osnr_db {
            writeln!(o, "OSNR            {osnr:.2} dB").unwrap();
        }
        writeln!(o, "trials          {} (seed {})", self.trials, self.seed).unwrap();
        writeln!(o, "bits            {}", c.total_bits).unwrap();
        writeln!(o, "bit errors      {}", c.bit_errors).unwrap();
        writeln!(o, "BER={:.3e}", self.report.ber).unwrap();
        writeln!(o, "symbol errors   {} ({} erasures)", c.symbol_errors, c.erasures).unwrap();
        for p in Partition::ALL {
            writeln!(
                o,
                "  {:?} {:?}: {} symbol errors, {} bit errors",
                p,
                p.members(),
                c.per_partition_errors[p.position()],
                c.per_partition_bit_errors[p.position()]
            )
            .unwrap();
        }
        writeln!(o, "per symbol (index: errors/sent)").unwrap();
        for i in 0..16 {
            writeln!(o, "  {:2}: {}/{}", i + 1, c.per_symbol_errors[i], c.per_symbol_sent[i]).unwrap();
        }
        o
    }
}

pub fn read_summary(path: &Path) -> Result<RunSummary, HarnessError> {
    RunSummary::from_json(&std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?)
}
