//! Acceptance suite. Each test prints one `PASS`/`FAIL` line with the
//! measured value and the tolerance, then asserts.

use nfdm_core::channel::{ssfm_propagate, SsfmOptions};
use nfdm_core::harness::{prepare, run_experiment, write_outputs, ExperimentConfig};
use nfdm_core::inft::darboux_synthesize_centered;
use nfdm_core::modem::{build_constellation, Partition};
use nfdm_core::nft::{discrete_spectrum, find_eigenvalues, DiscreteSpectrum, NftConfig, SearchRegion};
use nfdm_core::units::{to_physical, watts_to_dbm, ComplexEnvelope};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentConfig::load(&path).unwrap()
}

fn verdict(id: &str, what: &str, pass: bool, detail: String) {
    println!("{} {id}: {what}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn phase_diff(a: Complex64, b: Complex64) -> f64 {
    (a / b).arg().abs()
}

/// Blind eigenvalue search plus spectral amplitudes, matched to `want`.
fn matched_spectrum(env: &ComplexEnvelope, want: &[Complex64], region: &SearchRegion) -> Option<DiscreteSpectrum> {
    let cfg = NftConfig::default();
    let roots = find_eigenvalues(env, &[], Some(region), &cfg).ok()?.roots;
    if roots.len() != want.len() {
        return None;
    }
    let mut left = roots;
    let mut chosen = Vec::new();
    for w in want {
        let (k, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - w).norm().total_cmp(&(b.1 - w).norm()))?;
        chosen.push(left.remove(k));
    }
    discrete_spectrum(env, &chosen, &cfg).ok()
}

#[test]
fn criterion_1_nft_round_trip() {
    let start = Instant::now();
    let cfg = config("c01_nft_roundtrip.toml");
    let table = build_constellation(&cfg.constellation).unwrap();
    let region = SearchRegion::default();
    let (mut eig, mut ph, mut missing) = (0.0f64, 0.0f64, 0usize);
    for s in table.symbols() {
        let want = s.target_spectrum.eigenvalues();
        match matched_spectrum(&s.waveform, &want, &region) {
            Some(got) => {
                for (g, w) in got.entries().iter().zip(s.target_spectrum.entries()) {
                    eig = eig.max((g.lambda - w.lambda).norm());
                    ph = ph.max(phase_diff(g.qd, w.qd));
                }
            }
            None => missing += 1,
        }
    }
    let (sym_eig, sym_ph) = (eig, ph);

    // Random spectra: Re λ in [-0.3, 0.3], Im λ in [0.2, 1], separation ≥ 0.1,
    // |Q_d| in [0.5, 2], uniform phase; 1024 samples on a width-48 window.
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    for _ in 0..100 {
        let spec = loop {
            let pairs: Vec<(Complex64, Complex64)> = (0..2)
                .map(|_| {
                    (
                        Complex64::new(rng.random_range(-0.3..0.3), rng.random_range(0.2..1.0)),
                        Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(-PI..PI)),
                    )
                })
                .collect();
            if (pairs[0].0 - pairs[1].0).norm() >= 0.1 {
                break DiscreteSpectrum::from_pairs(&pairs).unwrap();
            }
        };
        let syn = darboux_synthesize_centered(&spec, 1024, 24.0).unwrap();
        let want = spec.eigenvalues();
        match matched_spectrum(&syn.envelope, &want, &region) {
            Some(got) => {
                for (g, w) in got.entries().iter().zip(syn.effective_spectrum.entries()) {
                    eig = eig.max((g.lambda - w.lambda).norm());
                    ph = ph.max(phase_diff(g.qd, w.qd));
                }
            }
            None => missing += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = missing == 0 && eig <= 1e-3 && ph <= 1e-2 && secs < 60.0;
    verdict(
        "C1",
        "round-trip NFT, 16 symbols + 100 random spectra",
        pass,
        format!(
            "max |Δλ| {eig:.2e} (tol 1e-3), max |Δarg qd| {ph:.2e} rad (tol 1e-2), \
             symbols alone {sym_eig:.2e}/{sym_ph:.2e}, wrong root count {missing}, {secs:.1} s (limit 60 s)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_sech_eigenvalues() {
    let cfg = config("c02_sech_oracle.toml");
    let (n, half) = (2048usize, 20.0);
    let dt = 2.0 * half / n as f64;
    let mut worst = 0.0f64;
    let mut ok = true;
    for amp in [1.0, 2.0, 2.5] {
        let samples = (0..n)
            .map(|k| Complex64::new(amp / (-half + (k as f64 + 0.5) * dt).cosh(), 0.0))
            .collect();
        let env = ComplexEnvelope::single(samples, dt).unwrap();
        let roots = find_eigenvalues(&env, &[], Some(&cfg.detection.search_region), &cfg.detection.nft)
            .unwrap()
            .roots;
        let want: Vec<f64> = (1..).map(|k| amp - k as f64 + 0.5).take_while(|&e| e > 1e-9).collect();
        if roots.len() != want.len() {
            ok = false;
            println!("  A = {amp}: found {roots:?}, expected {want:?}");
            continue;
        }
        for (r, w) in roots.iter().zip(&want) {
            worst = worst.max((r - Complex64::new(0.0, *w)).norm());
        }
    }
    let pass = ok && worst <= 1e-3;
    verdict(
        "C2",
        "A·sech(t) eigenvalues j(A-k+1/2), A in {1, 2, 2.5}",
        pass,
        format!("max |Δλ| {worst:.2e} (tol 1e-3), counts match: {ok}"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_trace_energy() {
    let cfg = config("c03_trace_energy.toml");
    let table = build_constellation(&cfg.constellation).unwrap();
    let mut worst = 0.0f64;
    let mut slot_worst = 0.0f64;
    for s in table.symbols() {
        // The waveform on a window wide enough to hold its tails.
        let full = darboux_synthesize_centered(&s.target_spectrum, 16384, 64.0).unwrap();
        worst = worst.max((full.envelope.energy() - 3.6).abs());
        slot_worst = slot_worst.max((s.waveform.energy() - 3.6).abs());
    }
    let pass = worst <= 1e-3;
    verdict(
        "C3",
        "constellation waveform energy = 4·(0.6+0.3)",
        pass,
        format!("max |E - 3.6| {worst:.2e} (tol 1e-3)"),
    );
    println!(
        "INFO C3: energy inside the {}-sample slot: max |E - 3.6| {slot_worst:.2e} (truncated fraction {:.2e})",
        cfg.constellation.samples_per_symbol,
        table.symbols()[0].truncated_fraction
    );
    assert!(pass);
}

#[test]
fn criterion_4_lossless_640km() {
    let cfg = config("c04_lossless_640km.toml");
    let out = run_experiment(&cfg).unwrap();
    let table = build_constellation(&cfg.constellation).unwrap();
    let (mut eig, mut ph) = (0.0f64, 0.0f64);
    let mut seen = [false; 16];
    for r in &out.records {
        let rec = r.record;
        assert!(!rec.erased);
        let t = table.symbol(rec.tx_index).unwrap().target_spectrum.entries();
        seen[rec.tx_index as usize - 1] = true;
        eig = eig
            .max((rec.lambda1 - t[0].lambda).norm())
            .max((rec.lambda2 - t[1].lambda).norm());
        ph = ph.max(phase_diff(rec.qd1, t[0].qd)).max(phase_diff(rec.qd2, t[1].qd));
    }
    let all = seen.iter().all(|&x| x);
    let pass = all && eig <= 1e-2 && ph <= 2e-2;
    verdict(
        "C4",
        "lossless 640 km, eigenvalues and back-rotated phases",
        pass,
        format!(
            "max |Δλ| {eig:.2e} (tol 1e-2), max |Δarg qd| {ph:.2e} rad (tol 2e-2), all 16 symbols present: {all}, {} slots",
            out.records.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_rotation_at_l0() {
    let cfg = config("c05_rotation_at_l0.toml");
    let setup = prepare(&cfg).unwrap();
    let z = setup.scale.distance_to_normalized(cfg.distance_km());
    let opts = SsfmOptions {
        max_step: z / cfg.link.steps_per_span as f64,
        max_nl_phase: cfg.link.max_nl_phase,
        alias_threshold: cfg.link.alias_threshold,
    };
    let region = SearchRegion::default();
    let nominal = setup.table.nominal_eigenvalues();
    let (mut d1, mut d2) = (0.0f64, 0.0f64);
    let (mut r1_first, mut r2_first) = (0.0, 0.0);
    for (i, s) in setup.table.symbols().iter().enumerate() {
        let tx = matched_spectrum(&s.waveform, &nominal, &region).unwrap();
        let (rx_env, _) = ssfm_propagate(&s.waveform, z, 0.0, &opts).unwrap();
        let rx = matched_spectrum(&rx_env, &nominal, &region).unwrap();
        let rot = |k: usize| (rx.entries()[k].qd / tx.entries()[k].qd).arg().rem_euclid(2.0 * PI);
        let (r1, r2) = (rot(0), rot(1));
        if i == 0 {
            (r1_first, r2_first) = (r1, r2);
        }
        d1 = d1.max((r1 - 1.44).abs());
        d2 = d2.max((r2 - 0.36).abs());
    }
    let pass = d1 <= 0.02 && d2 <= 0.02 && (z - 1.0).abs() < 1e-9;
    verdict(
        "C5",
        "qd rotation at L = L0 (lossless)",
        pass,
        format!(
            "z = {z:.6}; symbol 1: {r1_first:.4} / {r2_first:.4} rad; max deviation from 1.44 / 0.36: {d1:.2e} / {d2:.2e} (tol 0.02)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_noiseless_lossless_ber() {
    let mut all = true;
    let mut parts = Vec::new();
    for name in [
        "c06_lossless_0km.toml",
        "c06_lossless_320km.toml",
        "c06_lossless_640km.toml",
    ] {
        let cfg = config(name);
        let out = run_experiment(&cfg).unwrap();
        let c = out.counts();
        let ok = c.bit_errors == 0 && c.total_bits >= 1024 && c.is_consistent();
        all &= ok;
        parts.push(format!(
            "{} km: {}/{} bit errors",
            cfg.distance_km(),
            c.bit_errors,
            c.total_bits
        ));
    }
    verdict(
        "C6",
        "noiseless lossless BER = 0 over >= 2^10 bits",
        all,
        parts.join(", "),
    );
    assert!(all);
}

#[test]
fn criterion_7_launch_power() {
    let cfg = config("c07_launch_power.toml");
    let setup = prepare(&cfg).unwrap();
    let launched = setup.frame.envelope.scaled(setup.scale.launch_amplitude_gain());
    let frame_dbm = watts_to_dbm(to_physical(&launched, &setup.scale).mean_power());
    let pass = frame_dbm.abs() <= 2.0;
    verdict(
        "C7",
        "mean launch power at W = 16, +5.7 dB",
        pass,
        format!(
            "frame mean {frame_dbm:.2} dBm, symbol average {:.2} dBm (tol ±2 dB around 0 dBm)",
            setup.scale.launch_power_dbm()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_noisy_link() {
    let cfg = config("c08_noisy_640km.toml");
    let out = run_experiment(&cfg).unwrap();
    let c = out.counts();
    let p = |x: Partition| c.per_partition_errors[x.position()];
    let lambda_shaped = p(Partition::S2) + p(Partition::S4);
    let m_shaped = p(Partition::S1) + p(Partition::S3);
    let pass = c.total_bits >= 1 << 16 && c.ber() <= 1e-2 && lambda_shaped >= m_shaped && c.is_consistent();
    verdict(
        "C8",
        "lossy 640 km, 16 dB/span, OSNR 25 dB, +5.7 dB",
        pass,
        format!(
            "BER {:.3e} over {} bits (tol <= 1e-2), symbol errors S2+S4 = {lambda_shaped}, S1+S3 = {m_shaped}, \
             per symbol {:?}, measured OSNR {:.2} dB",
            c.ber(),
            c.total_bits,
            c.per_symbol_errors,
            out.summary.measured_osnr_db.unwrap_or(f64::NAN)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let cfg = config("c09_determinism.toml");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let files: Vec<(Vec<u8>, Vec<u8>)> = dirs
        .iter()
        .map(|d| {
            let out = run_experiment(&cfg).unwrap();
            let (scatter, ber) = write_outputs(&cfg, &out, Some(d.path())).unwrap();
            (std::fs::read(scatter).unwrap(), std::fs::read(ber).unwrap())
        })
        .collect();
    let mut other = cfg.clone();
    other.run.seed += 1;
    let different = run_experiment(&other).unwrap();
    let csv_differs = nfdm_core::harness::io::scatter_to_csv(&different.records).unwrap() != files[0].0;
    let pass = files[0] == files[1] && csv_differs;
    verdict(
        "C9",
        "identical seeds give byte-identical outputs",
        pass,
        format!(
            "scatter {} bytes equal: {}, BER JSON {} bytes equal: {}, another seed changes the scatter: {csv_differs}",
            files[0].0.len(),
            files[0].0 == files[1].0,
            files[0].1.len(),
            files[0].1 == files[1].1
        ),
    );
    assert!(pass);
}
