//! Experiment orchestration: configuration, Monte-Carlo runs and outputs.

pub mod config;
pub mod io;

pub use config::ExperimentConfig;
pub use io::{read_scatter, read_summary, read_waveform, write_waveform, RunSummary, TrialRecord, WaveformFile};

use crate::channel::{
    add_noise_for_osnr, measure_osnr, propagate_link, propagate_lossless, ChannelError, NoiseMode, SsfmOptions,
};
use crate::modem::offsets::correct_offsets;
use crate::modem::{
    assemble_frame, build_constellation, detect_frame, impose_offsets, prbs11, BerCounts, ConstellationTable, Frame,
    ModemError, OffsetEstimate,
};
use crate::units::{derive_scale, linear_to_db, ComplexEnvelope, NormalizationScale, UnitsError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input: {0}")]
    Format(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for configuration and input problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical(_) => 3,
            _ => 2,
        }
    }
}

impl From<ModemError> for HarnessError {
    fn from(e: ModemError) -> Self {
        match e {
            ModemError::InvalidSeed(_)
            | ModemError::BitCount(_)
            | ModemError::InvalidParameter(_)
            | ModemError::Units(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<ChannelError> for HarnessError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::InvalidParameter { .. } | ChannelError::Units(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<UnitsError> for HarnessError {
    fn from(e: UnitsError) -> Self {
        Self::Config(e.to_string())
    }
}

/// Everything derived from a configuration before any trial runs.
#[derive(Debug, Clone)]
pub struct Setup {
    pub table: ConstellationTable,
    /// Scale including the launch offset.
    pub scale: NormalizationScale,
    pub frame: Frame,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Setup, HarnessError> {
    cfg.validate()?;
    let table = build_constellation(&cfg.constellation)?;
    let scale = derive_scale(&cfg.fiber, cfg.scale.symbol_rate_hz, cfg.constellation.window_width)?
        .with_mean_normalized_power(table.mean_power())
        .with_launch_offset_db(cfg.scale.launch_offset_db);
    let bits = prbs11(cfg.frame.prbs_seed, 4 * cfg.frame.n_symbols)?;
    let frame = assemble_frame(&bits, &table, cfg.frame.guard_slots)?;
    Ok(Setup { table, scale, frame })
}

/// The frame after lossless, noiseless propagation over the link length:
/// what a receiver knowing the transmitted data expects to see.
pub fn expected_received(cfg: &ExperimentConfig, setup: &Setup) -> Result<ComplexEnvelope, HarnessError> {
    let link = cfg.link_config();
    let opts = SsfmOptions {
        max_step: setup.scale.distance_to_normalized(cfg.fiber.span_length) / link.steps_per_span as f64,
        max_nl_phase: link.max_nl_phase,
        alias_threshold: link.alias_threshold,
    };
    Ok(propagate_lossless(
        &setup.frame.envelope,
        setup.scale.distance_to_normalized(cfg.distance_km()),
        &opts,
    )?)
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub summary: RunSummary,
    /// Ordered by trial, then slot.
    pub records: Vec<TrialRecord>,
}

impl ExperimentOutcome {
    pub fn counts(&self) -> &BerCounts {
        &self.summary.report.counts
    }
}

struct TrialResult {
    records: Vec<TrialRecord>,
    counts: BerCounts,
    osnr: Option<f64>,
    offsets: Option<OffsetEstimate>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Builds the constellation, propagates the frame, and detects it once per
/// trial. Trials run in parallel; results are identical for a fixed seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    let setup = prepare(cfg)?;
    let link = cfg.link_config();
    let scale = setup.scale;
    let distance = cfg.distance_km();
    let reference = if cfg.detection.offset_correction {
        Some(expected_received(cfg, &setup)?)
    } else {
        None
    };
    let impairment = OffsetEstimate::from_hz(cfg.impairments.freq_offset_hz, cfg.impairments.phase_offset_rad, &scale);
    let impaired = impairment != OffsetEstimate::default();

    // Receiver-side noise does not interact with the fiber, so the frame is
    // propagated once and only the noise is redrawn per trial.
    let shared = match link.noise {
        NoiseMode::PerAmpNf { .. } => None,
        _ => {
            let mut quiet = link;
            quiet.noise = NoiseMode::Off;
            Some(propagate_link(&setup.frame.envelope, &quiet, &scale, &mut trial_rng(cfg.run.seed, 0))?.envelope)
        }
    };

    let results: Vec<TrialResult> = (0..cfg.run.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialResult, HarnessError> {
            let mut rng = trial_rng(cfg.run.seed, trial);
            let (mut rx, osnr) = match (&shared, link.noise) {
                (Some(clean), NoiseMode::TargetOsnr { osnr_db }) => {
                    let noisy = add_noise_for_osnr(clean, osnr_db, &scale, &mut rng);
                    let m = measure_osnr(clean, &noisy, &scale);
                    (noisy, Some(m))
                }
                (Some(clean), _) => (clean.clone(), None),
                (None, _) => (
                    propagate_link(&setup.frame.envelope, &link, &scale, &mut rng)?.envelope,
                    None,
                ),
            };
            if impaired {
                rx = impose_offsets(&rx, &impairment);
            }
            let offsets = match &reference {
                Some(r) => {
                    let (corrected, est) = correct_offsets(&rx, r)?;
                    rx = corrected;
                    Some(est)
                }
                None => None,
            };
            let (recs, counts) = detect_frame(
                &rx,
                &setup.frame,
                None,
                &setup.table,
                distance,
                scale.l0,
                &cfg.detection,
            )?;
            Ok(TrialResult {
                records: recs
                    .into_iter()
                    .map(|record| TrialRecord {
                        trial: trial as u32,
                        record,
                    })
                    .collect(),
                counts,
                osnr,
                offsets,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut counts = BerCounts::default();
    let mut records = Vec::with_capacity(cfg.run.trials * setup.frame.n_symbols());
    let mut osnr_sum = 0.0;
    let mut osnr_n = 0usize;
    for r in &results {
        counts.merge(&r.counts);
        records.extend_from_slice(&r.records);
        if let Some(o) = r.osnr.filter(|o| o.is_finite()) {
            osnr_sum += o;
            osnr_n += 1;
        }
    }
    let first_offsets = results.first().and_then(|r| r.offsets);
    let summary = RunSummary {
        distance_km: distance,
        l0_km: scale.l0,
        launch_power_dbm: scale.launch_power_dbm(),
        trials: cfg.run.trials,
        seed: cfg.run.seed,
        bits_per_trial: 4 * setup.frame.n_symbols(),
        measured_osnr_db: (osnr_n > 0).then(|| linear_to_db(osnr_sum / osnr_n as f64)),
        estimated_freq_offset_hz: first_offsets.map(|o| o.freq_offset_hz(&scale)),
        estimated_phase_offset_rad: first_offsets.map(|o| o.phase),
        report: counts.report(),
    };
    Ok(ExperimentOutcome { summary, records })
}

/// Writes the scatter CSV and BER JSON named in the configuration,
/// optionally under a different directory.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    outcome: &ExperimentOutcome,
    dir: Option<&Path>,
) -> Result<(PathBuf, PathBuf), HarnessError> {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let scatter = dir.join(&cfg.output.scatter_file);
    let ber = dir.join(&cfg.output.ber_file);
    std::fs::write(&scatter, io::scatter_to_csv(&outcome.records)?).map_err(|e| HarnessError::io(&scatter, e))?;
    std::fs::write(&ber, outcome.summary.to_json()).map_err(|e| HarnessError::io(&ber, e))?;
    Ok((scatter, ber))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(text: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_toml_str(text).unwrap();
        c.frame.n_symbols = 16;
        c
    }

    #[test]
    fn back_to_back_is_error_free() {
        let c = small("[fiber]\nn_spans = 0\n[link]\nlossless = true");
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.counts().bit_errors, 0);
        assert_eq!(out.records.len(), 16);
        assert!(out.counts().is_consistent());
        assert!(out.records.iter().all(|r| r.record.decided_index == r.record.tx_index));
    }

    #[test]
    fn carrier_offsets_are_removed() {
        let c = small(
            "[fiber]\nn_spans = 0\n[link]\nlossless = true\n[impairments]\nfreq_offset_hz = 5e6\nphase_offset_rad = 0.9",
        );
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.counts().bit_errors, 0);
        assert!((out.summary.estimated_freq_offset_hz.unwrap() - 5e6).abs() < 1e3);
        assert!((out.summary.estimated_phase_offset_rad.unwrap() - 0.9).abs() < 1e-6);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::Config("x".into()).exit_code(), 2);
        assert_eq!(HarnessError::Numerical("x".into()).exit_code(), 3);
        let e: HarnessError = ChannelError::NonFinite { step: 1 }.into();
        assert_eq!(e.exit_code(), 3);
    }
}
