//! Experiment configuration (TOML).

use super::HarnessError;
use crate::channel::{LinkConfig, NoiseMode, SsfmOptions};
use crate::modem::{ConstellationParams, DetectionConfig};
use crate::units::FiberParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    pub symbol_rate_hz: f64,
    /// Launch power above the nominal constellation power, in dB.
    pub launch_offset_db: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            symbol_rate_hz: 1e9,
            launch_offset_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub lossless: bool,
    pub amp_gain_db: Option<f64>,
    pub noise: NoiseMode,
    pub steps_per_span: usize,
    pub max_nl_phase: f64,
    pub alias_threshold: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let ssfm = SsfmOptions::default();
        Self {
            lossless: false,
            amp_gain_db: None,
            noise: NoiseMode::Off,
            steps_per_span: 1000,
            max_nl_phase: ssfm.max_nl_phase,
            alias_threshold: ssfm.alias_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub n_symbols: usize,
    pub prbs_seed: u16,
    pub guard_slots: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            n_symbols: 256,
            prbs_seed: 1,
            guard_slots: 1,
        }
    }
}

/// Carrier impairments applied to the received frame before detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Impairments {
    pub freq_offset_hz: f64,
    pub phase_offset_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub trials: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { trials: 1, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub scatter_file: String,
    pub ber_file: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            scatter_file: "scatter.csv".into(),
            ber_file: "ber.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fiber: FiberParams,
    pub scale: ScaleConfig,
    pub link: LinkSection,
    pub constellation: ConstellationParams,
    pub frame: FrameConfig,
    pub detection: DetectionConfig,
    pub impairments: Impairments,
    pub run: RunConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.run.trials == 0 {
            return bad("run.trials must be at least 1".into());
        }
        if self.frame.n_symbols == 0 {
            return bad("frame.n_symbols must be at least 1".into());
        }
        if self.frame.prbs_seed == 0 || self.frame.prbs_seed > 0x7FF {
            return bad(format!("frame.prbs_seed {} must be in 1..=2047", self.frame.prbs_seed));
        }
        if !(self.scale.symbol_rate_hz > 0.0) || !self.scale.launch_offset_db.is_finite() {
            return bad("scale.symbol_rate_hz must be positive and launch_offset_db finite".into());
        }
        let c = &self.constellation;
        if c.samples_per_symbol < 16 || !(c.window_width > 0.0) {
            return bad("constellation needs samples_per_symbol >= 16 and window_width > 0".into());
        }
        if !(self.impairments.freq_offset_hz.is_finite() && self.impairments.phase_offset_rad.is_finite()) {
            return bad("impairments must be finite".into());
        }
        self.link_config()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn link_config(&self) -> LinkConfig {
        LinkConfig {
            fiber: self.fiber,
            lossless: self.link.lossless,
            amp_gain_db: self.link.amp_gain_db,
            noise: self.link.noise,
            steps_per_span: self.link.steps_per_span,
            max_nl_phase: self.link.max_nl_phase,
            alias_threshold: self.link.alias_threshold,
        }
    }

    pub fn distance_km(&self) -> f64 {
        self.fiber.link_length()
    }

    pub fn scatter_path(&self) -> PathBuf {
        self.output.dir.join(&self.output.scatter_file)
    }

    pub fn ber_path(&self) -> PathBuf {
        self.output.dir.join(&self.output.ber_file)
    }
}
