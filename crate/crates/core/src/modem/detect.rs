//! Per-slot NFT detection and symbol decisions.

use super::ber::BerCounts;
use super::constellation::{index_of, ConstellationTable};
use super::frame::{index_bits, Frame};
use super::offsets::correct_offsets;
use super::ModemError;
use crate::nft::{discrete_spectrum, find_eigenvalues, NftConfig, SearchRegion};
use crate::units::ComplexEnvelope;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Which eigenvalue enters the back-rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackrotationMode {
    #[default]
    Nominal,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    pub nft: NftConfig,
    /// Grid search when Newton from the nominal eigenvalues finds fewer than two roots.
    pub blind_fallback: bool,
    pub search_region: SearchRegion,
    pub backrotation: BackrotationMode,
    /// Data-aided frequency and phase offset correction before detection.
    pub offset_correction: bool,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            nft: NftConfig::default(),
            blind_fallback: true,
            search_region: SearchRegion::default(),
            backrotation: BackrotationMode::Nominal,
            offset_correction: true,
        }
    }
}

/// Undoes the propagation rotation: `qd · exp(+j4λ² L/L₀)`.
pub fn backrotate(qd: Complex64, lambda: Complex64, distance_km: f64, l0_km: f64) -> Complex64 {
    qd * (4.0 * J * lambda * lambda * (distance_km / l0_km)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub index: u8,
    pub k1: u8,
    pub k2: u8,
    /// 4-bit Gray label.
    pub bits: u8,
}

/// Nearest of 0..3 to `x` (in quarter turns, mod 4); exact ties go to the
/// numerically smaller candidate.
fn nearest_quadrant(x: f64) -> u8 {
    let x = x.rem_euclid(4.0);
    let lo = x.floor();
    let frac = x - lo;
    let a = (lo as u8) % 4;
    let b = (a + 1) % 4;
    if frac < 0.5 {
        a
    } else if frac > 0.5 {
        b
    } else {
        a.min(b)
    }
}

/// Phase-only decision on the two spectral amplitudes.
pub fn decide(qd1: Complex64, qd2: Complex64) -> Result<Decision, ModemError> {
    if !(qd1.norm() > 0.0 && qd2.norm() > 0.0) {
        return Err(ModemError::ZeroAmplitude);
    }
    let k1 = nearest_quadrant(qd1.arg() / FRAC_PI_2);
    let k2 = nearest_quadrant((qd2.arg() - FRAC_PI_4) / FRAC_PI_2);
    let index = index_of(k1, k2);
    Ok(Decision {
        index,
        k1,
        k2,
        bits: index - 1,
    })
}

/// One detected slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterRecord {
    pub slot: usize,
    pub tx_index: u8,
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    /// Back-rotated, unit-normalized.
    pub qd1: Complex64,
    pub qd2: Complex64,
    /// 0 for erasures.
    pub decided_index: u8,
    pub bit_errors: u8,
    pub erased: bool,
}

/// Estimated eigenvalues and back-rotated unit amplitudes of one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotEstimate {
    pub lambdas: [Complex64; 2],
    pub qds: [Complex64; 2],
}

/// NFT of one slot followed by back-rotation over `z = L/L₀`.
pub fn estimate_slot(
    env: &ComplexEnvelope,
    nominal: [Complex64; 2],
    z: f64,
    cfg: &DetectionConfig,
) -> Result<SlotEstimate, ModemError> {
    let mut roots = find_eigenvalues(env, &nominal, None, &cfg.nft)?.roots;
    if roots.len() < 2 && cfg.blind_fallback {
        roots = find_eigenvalues(env, &nominal, Some(&cfg.search_region), &cfg.nft)?.roots;
    }
    if roots.len() < 2 {
        return Err(ModemError::MissingEigenvalues(roots.len()));
    }
    let mut lambdas = [Complex64::new(0.0, 0.0); 2];
    for (slot, nom) in lambdas.iter_mut().zip(nominal) {
        let (k, _) = roots
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - nom).norm().total_cmp(&(b.1 - nom).norm()))
            .expect("at least one root left");
        *slot = roots.remove(k);
    }
    let spec = discrete_spectrum(env, &lambdas, &cfg.nft)?;
    let mut qds = [Complex64::new(0.0, 0.0); 2];
    for i in 0..2 {
        let l = match cfg.backrotation {
            BackrotationMode::Nominal => nominal[i],
            BackrotationMode::Estimated => lambdas[i],
        };
        let q = spec.entries()[i].qd * (4.0 * J * l * l * z).exp();
        if !(q.norm() > 0.0) || !q.is_finite() {
            return Err(ModemError::ZeroAmplitude);
        }
        qds[i] = q / q.norm();
    }
    Ok(SlotEstimate { lambdas, qds })
}

fn bit_distance(a: u8, b: u8) -> u8 {
    index_bits(a).iter().zip(index_bits(b)).filter(|(x, y)| *x != y).count() as u8
}

/// Detects every symbol of `rx`.
///
/// `reference` is the noise-free frame expected at the receiver; when
/// given and offset correction is enabled, carrier offsets are estimated
/// against it first. Slots whose NFT fails become erasures.
pub fn detect_frame(
    rx: &ComplexEnvelope,
    tx: &Frame,
    reference: Option<&ComplexEnvelope>,
    table: &ConstellationTable,
    distance_km: f64,
    l0_km: f64,
    cfg: &DetectionConfig,
) -> Result<(Vec<ScatterRecord>, BerCounts), ModemError> {
    if rx.len() != tx.envelope.len() {
        return Err(ModemError::LengthMismatch(rx.len(), tx.envelope.len()));
    }
    let corrected;
    let rx = match reference {
        Some(r) if cfg.offset_correction => {
            corrected = correct_offsets(rx, r)?.0;
            &corrected
        }
        _ => rx,
    };
    let nominal = table.nominal_eigenvalues();
    let z = distance_km / l0_km;
    let records: Vec<ScatterRecord> = (0..tx.n_symbols())
        .into_par_iter()
        .map(|i| {
            let slot = tx.symbol_slot(i);
            let tx_index = tx.tx_indices[i];
            let env = rx.slot(slot).expect("slot within frame");
            match estimate_slot(&env, nominal, z, cfg).and_then(|e| Ok((e, decide(e.qds[0], e.qds[1])?))) {
                Ok((e, d)) => ScatterRecord {
                    slot,
                    tx_index,
                    lambda1: e.lambdas[0],
                    lambda2: e.lambdas[1],
                    qd1: e.qds[0],
                    qd2: e.qds[1],
                    decided_index: d.index,
                    bit_errors: bit_distance(tx_index, d.index),
                    erased: false,
                },
                Err(err) => {
                    log::debug!("slot {slot} erased: {err}");
                    let nan = Complex64::new(f64::NAN, f64::NAN);
                    ScatterRecord {
                        slot,
                        tx_index,
                        lambda1: nan,
                        lambda2: nan,
                        qd1: nan,
                        qd2: nan,
                        decided_index: 0,
                        bit_errors: 4,
                        erased: true,
                    }
                }
            }
        })
        .collect();
    let mut counts = BerCounts::default();
    for r in &records {
        counts.record(
            r.tx_index,
            r.bit_errors as u32,
            r.erased || r.decided_index != r.tx_index,
            r.erased,
        );
    }
    Ok((records, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::constellation::{build_constellation, ks_of, ConstellationParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn backrotation_values() {
        let q = Complex64::from_polar(1.0, 0.2);
        assert_eq!(backrotate(q, Complex64::new(0.0, 0.6), 0.0, 1000.0), q);
        let r1 = backrotate(q, Complex64::new(0.0, 0.6), 1000.0, 1000.0);
        assert_abs_diff_eq!((r1 / q).arg(), -1.44, epsilon = 1e-12);
        let r2 = backrotate(q, Complex64::new(0.0, 0.3), 1000.0, 1000.0);
        assert_abs_diff_eq!((r2 / q).arg(), -0.36, epsilon = 1e-12);
    }

    #[test]
    fn exact_spectra_decode() {
        let t = build_constellation(&ConstellationParams::default()).unwrap();
        for s in t.symbols() {
            let e = s.target_spectrum.entries();
            let d = decide(e[0].qd, e[1].qd).unwrap();
            assert_eq!((d.index, d.k1, d.k2), (s.index, s.k1, s.k2));
        }
    }

    #[test]
    fn decision_boundaries() {
        let q2 = Complex64::from_polar(1.0, FRAC_PI_4);
        assert_eq!(decide(Complex64::from_polar(1.0, 0.7), q2).unwrap().k1, 0);
        assert_eq!(decide(Complex64::from_polar(1.0, 0.8), q2).unwrap().k1, 1);
        assert_eq!(nearest_quadrant(0.5), 0);
        assert_eq!(nearest_quadrant(1.5), 1);
        assert_eq!(nearest_quadrant(3.5), 0);
        assert_eq!(nearest_quadrant(-0.5), 0);
        assert!(matches!(
            decide(Complex64::new(0.0, 0.0), q2),
            Err(ModemError::ZeroAmplitude)
        ));
    }

    #[test]
    fn phase_covariance() {
        let t = build_constellation(&ConstellationParams::default()).unwrap();
        let cfg = DetectionConfig::default();
        for s in t.symbols() {
            for m in 0..4u8 {
                let env = crate::inft::shift_phase(&s.waveform, m as f64 * PI / 2.0);
                let e = estimate_slot(&env, t.nominal_eigenvalues(), 0.0, &cfg).unwrap();
                let d = decide(e.qds[0], e.qds[1]).unwrap();
                let (k1, k2) = ks_of(d.index);
                assert_eq!((k1, k2), ((s.k1 + m) % 4, (s.k2 + m) % 4));
            }
        }
    }

    #[test]
    fn empty_slot_is_an_erasure() {
        let t = build_constellation(&ConstellationParams::default()).unwrap();
        let mut f = crate::modem::frame::assemble_frame(&[0, 0, 0, 1, 1, 1, 1, 0], &t, 1).unwrap();
        let rx = f.envelope.clone();
        f.envelope = rx.clone();
        let mut broken = rx.clone();
        broken.samples_mut()[64..128]
            .iter_mut()
            .for_each(|x| *x = Complex64::new(0.0, 0.0));
        let (recs, counts) = detect_frame(&broken, &f, None, &t, 0.0, 1000.0, &DetectionConfig::default()).unwrap();
        assert!(recs[0].erased && recs[0].decided_index == 0 && recs[0].bit_errors == 4);
        assert!(!recs[1].erased && recs[1].bit_errors == 0);
        assert_eq!(counts.erasures, 1);
        assert!(counts.is_consistent());
    }
}
