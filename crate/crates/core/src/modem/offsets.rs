//! Data-aided carrier frequency and phase offset correction.
//!
//! For every slot the phase of `Σ rx·conj(ref)` is taken as the phase error
//! at the slot's energy centroid. A weighted least-squares line through
//! these points gives the common phase and the frequency ramp. The fit is
//! repeated on the corrected signal to remove the bias of the
//! centroid approximation.

use super::ModemError;
use crate::units::{ComplexEnvelope, NormalizationScale};
use num_complex::Complex64;
use std::f64::consts::PI;

const REFINEMENTS: usize = 2;

/// Offset `rx ≈ ref · e^{j(ω t + φ)}` with `t` the normalized frame time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OffsetEstimate {
    /// Angular frequency offset in normalized units.
    pub omega: f64,
    pub phase: f64,
}

impl OffsetEstimate {
    pub fn from_hz(freq_hz: f64, phase: f64, scale: &NormalizationScale) -> Self {
        Self {
            omega: 2.0 * PI * freq_hz * scale.t0,
            phase,
        }
    }

    pub fn freq_offset_hz(&self, scale: &NormalizationScale) -> f64 {
        self.omega / (2.0 * PI * scale.t0)
    }

    fn add(self, other: OffsetEstimate) -> Self {
        Self {
            omega: self.omega + other.omega,
            phase: self.phase + other.phase,
        }
    }
}

/// Multiplies `env` by `e^{j(ω t + φ)}`.
pub fn impose_offsets(env: &ComplexEnvelope, est: &OffsetEstimate) -> ComplexEnvelope {
    rotate(env, est.omega, est.phase)
}

fn rotate(env: &ComplexEnvelope, omega: f64, phase: f64) -> ComplexEnvelope {
    env.with_samples(
        env.samples()
            .iter()
            .enumerate()
            .map(|(n, x)| x * Complex64::from_polar(1.0, omega * env.time(n) + phase))
            .collect(),
    )
}

fn fit_once(rx: &ComplexEnvelope, reference: &ComplexEnvelope) -> Result<OffsetEstimate, ModemError> {
    let sps = reference.samples_per_symbol();
    let mut pts = Vec::new();
    for (s, (r, x)) in reference
        .samples()
        .chunks(sps)
        .zip(rx.samples().chunks(sps))
        .enumerate()
    {
        let c: Complex64 = r.iter().zip(x).map(|(a, b)| b * a.conj()).sum();
        let e: f64 = r.iter().map(|a| a.norm_sqr()).sum();
        if c.norm() == 0.0 || e == 0.0 {
            continue;
        }
        let t = r
            .iter()
            .enumerate()
            .map(|(k, a)| reference.time(s * sps + k) * a.norm_sqr())
            .sum::<f64>()
            / e;
        pts.push((t, c.arg(), c.norm()));
    }
    if pts.is_empty() {
        return Err(ModemError::DegenerateFit);
    }
    // Unwrap along time.
    for k in 1..pts.len() {
        let d = pts[k].1 - pts[k - 1].1;
        pts[k].1 -= 2.0 * PI * (d / (2.0 * PI)).round();
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let tm = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let pm = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let stt: f64 = pts.iter().map(|p| p.2 * (p.0 - tm).powi(2)).sum();
    let stp: f64 = pts.iter().map(|p| p.2 * (p.0 - tm) * (p.1 - pm)).sum();
    let omega = if stt > 1e-12 * sw { stp / stt } else { 0.0 };
    Ok(OffsetEstimate {
        omega,
        phase: pm - omega * tm,
    })
}

/// Estimates and removes the offset of `rx` relative to `reference`.
///
/// Returns the corrected frame `rx·e^{-j(ω t + φ)}` and the estimate.
pub fn correct_offsets(
    rx: &ComplexEnvelope,
    reference: &ComplexEnvelope,
) -> Result<(ComplexEnvelope, OffsetEstimate), ModemError> {
    if rx.len() != reference.len() || rx.samples_per_symbol() != reference.samples_per_symbol() {
        return Err(ModemError::LengthMismatch(rx.len(), reference.len()));
    }
    let mut total = fit_once(rx, reference)?;
    let mut corrected = rotate(rx, -total.omega, -total.phase);
    for _ in 0..REFINEMENTS {
        let step = fit_once(&corrected, reference)?;
        total = total.add(step);
        corrected = rotate(rx, -total.omega, -total.phase);
    }
    total.phase = (total.phase + PI).rem_euclid(2.0 * PI) - PI;
    Ok((corrected, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::constellation::{build_constellation, ConstellationParams};
    use crate::modem::frame::assemble_frame;
    use crate::modem::prbs::prbs11;
    use crate::units::{derive_scale, FiberParams};

    fn frame() -> ComplexEnvelope {
        let t = build_constellation(&ConstellationParams::default()).unwrap();
        assemble_frame(&prbs11(1, 1024).unwrap(), &t, 1).unwrap().envelope
    }

    #[test]
    fn pure_phase() {
        let tx = frame();
        let rx = impose_offsets(&tx, &OffsetEstimate { omega: 0.0, phase: 0.3 });
        let (c, est) = correct_offsets(&rx, &tx).unwrap();
        assert!((est.phase - 0.3).abs() < 1e-6);
        assert!(est.omega.abs() < 1e-9);
        for (a, b) in c.samples().iter().zip(tx.samples()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn frequency_ramp() {
        let scale = derive_scale(&FiberParams::nz_dsf(), 1e9, 16.0).unwrap();
        let tx = frame();
        let truth = OffsetEstimate::from_hz(10e6, -1.1, &scale);
        let rx = impose_offsets(&tx, &truth);
        let (_, est) = correct_offsets(&rx, &tx).unwrap();
        assert!(
            (est.freq_offset_hz(&scale) - 10e6).abs() < 1e3,
            "{}",
            est.freq_offset_hz(&scale)
        );
        assert!((est.phase + 1.1).abs() < 1e-6);
    }

    #[test]
    fn identity_without_offset() {
        let tx = frame();
        let (c, est) = correct_offsets(&tx, &tx).unwrap();
        assert!(est.phase.abs() < 1e-12 && est.omega.abs() < 1e-12);
        assert_eq!(c.len(), tx.len());
    }

    #[test]
    fn degenerate_inputs() {
        let z = ComplexEnvelope::zeros(128, 0.25, 64).unwrap();
        assert!(matches!(correct_offsets(&z, &z), Err(ModemError::DegenerateFit)));
        let short = ComplexEnvelope::zeros(64, 0.25, 64).unwrap();
        assert!(matches!(
            correct_offsets(&short, &z),
            Err(ModemError::LengthMismatch(..))
        ));
    }
}
