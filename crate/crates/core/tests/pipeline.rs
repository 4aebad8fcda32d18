use nfdm_core::channel::{propagate_lossless, SsfmOptions};
use nfdm_core::harness::io::{scatter_from_csv, scatter_to_csv};
use nfdm_core::harness::{prepare, run_experiment, ExperimentConfig};
use nfdm_core::inft::darboux_synthesize_centered;
use nfdm_core::modem::frame::{bits_to_indices, index_bits};
use nfdm_core::modem::{assemble_frame, build_constellation, prbs11, ConstellationParams};
use nfdm_core::nft::{discrete_spectrum, find_eigenvalues, DiscreteSpectrum, NftConfig};
use num_complex::Complex64;
use proptest::prelude::*;

fn quick(text: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml_str(text).unwrap();
    c.frame.n_symbols = 32;
    c.link.steps_per_span = 200;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthesis_then_analysis_recovers_spectrum(
        re1 in -0.3f64..0.3, im1 in 0.3f64..0.9,
        re2 in -0.3f64..0.3, im2 in 0.3f64..0.9,
        m1 in 0.5f64..2.0, p1 in -3.1f64..3.1,
        m2 in 0.5f64..2.0, p2 in -3.1f64..3.1,
    ) {
        let l1 = Complex64::new(re1, im1);
        let l2 = Complex64::new(re2, im2);
        prop_assume!((l1 - l2).norm() > 0.15);
        let spec = DiscreteSpectrum::from_pairs(&[
            (l1, Complex64::from_polar(m1, p1)),
            (l2, Complex64::from_polar(m2, p2)),
        ]).unwrap();
        let syn = darboux_synthesize_centered(&spec, 1024, 24.0).unwrap();
        let cfg = NftConfig::default();
        let found = find_eigenvalues(&syn.envelope, &spec.eigenvalues(), None, &cfg).unwrap();
        prop_assert_eq!(found.roots.len(), 2);
        let got = discrete_spectrum(&syn.envelope, &found.roots, &cfg).unwrap();
        for g in got.entries() {
            let w = syn.effective_spectrum.entries().iter()
                .min_by(|a, b| (a.lambda - g.lambda).norm().total_cmp(&(b.lambda - g.lambda).norm()))
                .unwrap();
            prop_assert!((g.lambda - w.lambda).norm() < 1e-4);
            prop_assert!((g.qd / w.qd).arg().abs() < 1e-3);
            prop_assert!((g.qd.norm() / w.qd.norm() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn bits_survive_index_mapping(bits in proptest::collection::vec(0u8..2, 0..64usize)) {
        let n = bits.len() / 4 * 4;
        let idx = bits_to_indices(&bits[..n]).unwrap();
        let back: Vec<u8> = idx.iter().flat_map(|&i| index_bits(i)).collect();
        prop_assert_eq!(&back[..], &bits[..n]);
        prop_assert!(idx.iter().all(|&i| (1..=16).contains(&i)));
    }
}

#[test]
fn lossless_propagation_keeps_eigenvalues_and_energy() {
    let table = build_constellation(&ConstellationParams::default()).unwrap();
    let bits = prbs11(3, 4 * 16).unwrap();
    let frame = assemble_frame(&bits, &table, 1).unwrap();
    let cfg = ExperimentConfig::default();
    let setup = prepare(&cfg).unwrap();
    let sym = &table.symbols()[5].waveform;
    let nominal = table.nominal_eigenvalues();
    let nft = NftConfig::default();
    for km in [80.0, 320.0, 640.0, 1280.0] {
        let z = setup.scale.distance_to_normalized(km);
        let opts = SsfmOptions {
            max_step: setup.scale.distance_to_normalized(80.0) / 1000.0,
            ..SsfmOptions::default()
        };
        let rx = propagate_lossless(sym, z, &opts).unwrap();
        let found = find_eigenvalues(&rx, &nominal, None, &nft).unwrap();
        assert_eq!(found.roots.len(), 2, "{km} km");
        for (r, w) in found.roots.iter().zip(&nominal) {
            assert!((r - w).norm() < 1e-2, "{km} km: {r} vs {w}");
        }
        if km == 640.0 {
            let out = propagate_lossless(&frame.envelope, z, &opts).unwrap();
            let rel = (out.energy() / frame.envelope.energy() - 1.0).abs();
            assert!(rel < 1e-9, "energy drift {rel}");
        }
    }
}

#[test]
fn scatter_has_one_row_per_symbol_and_trial() {
    let mut c = quick("[fiber]\nn_spans = 1\n[link]\nnoise = { mode = \"target_osnr\", osnr_db = 18.0 }");
    c.run.trials = 3;
    let out = run_experiment(&c).unwrap();
    assert_eq!(out.records.len(), 3 * 32);
    assert!(out.counts().is_consistent());
    assert_eq!(out.counts().total_bits, 3 * 32 * 4);
    for r in &out.records {
        let d = r.record.decided_index;
        assert!(r.record.erased == (d == 0));
        assert!(r.record.erased || (1..=16).contains(&d));
    }
    let csv = scatter_to_csv(&out.records).unwrap();
    let back = scatter_from_csv(&csv).unwrap();
    assert_eq!(back.len(), out.records.len());
    assert_eq!(scatter_to_csv(&back).unwrap(), csv);
}

#[test]
fn heavy_noise_produces_errors() {
    let mut c = quick("[fiber]\nn_spans = 0\n[link]\nnoise = { mode = \"target_osnr\", osnr_db = 3.0 }");
    c.run.trials = 2;
    let out = run_experiment(&c).unwrap();
    assert!(out.counts().bit_errors > 0);
    assert!(out.counts().is_consistent());
}
