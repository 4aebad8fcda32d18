//! Physical ↔ normalized unit conversion.
//!
//! All numerics in this crate run on the dimensionless focusing NLSE
//!
//! ```text
//! j ∂q/∂z + ∂²q/∂t² + 2|q|² q = 0
//! ```
//!
//! obtained from the physical equation `∂A/∂Z = -jβ₂/2 ∂²A/∂T² + jγ|A|²A`
//! with `T = T₀ t`, `Z = L₀ z`, `A = √P₀ q` and
//!
//! ```text
//! L₀ = 2 T₀² / |β₂|        P₀ = 2 / (γ L₀)
//! ```
//!
//! In this frame a discrete spectral amplitude evolves as
//! `Q_d(λ; z) = Q_d(λ) exp(-j4λ²z)`, with `z = L / L₀`.
//!
//! `T₀` is tied to the symbol rate through the normalized symbol window:
//! `T₀ = T_symbol / W`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default normalized width of one symbol slot.
pub const DEFAULT_WINDOW_WIDTH: f64 = 16.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitsError {
    #[error("invalid parameter `{name}`: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(&'static str),
}

fn require(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), UnitsError> {
    if cond && value.is_finite() {
        Ok(())
    } else {
        Err(UnitsError::InvalidParameter { name, value, reason })
    }
}

/// Fiber and link geometry in engineering units. Missing fields default
/// to the NZ-DSF link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiberParams {
    /// Group-velocity dispersion in ps²/km (negative: anomalous).
    pub beta2: f64,
    /// Kerr coefficient in 1/(W·km).
    pub gamma: f64,
    /// Attenuation in dB/km.
    pub alpha_db: f64,
    /// Span length in km.
    pub span_length: f64,
    /// Zero means back-to-back.
    pub n_spans: usize,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self::nz_dsf()
    }
}

impl FiberParams {
    /// NZ-DSF link of the reference experiment: 8 × 80 km.
    pub fn nz_dsf() -> Self {
        Self {
            beta2: -5.75,
            gamma: 1.6,
            alpha_db: 0.2,
            span_length: 80.0,
            n_spans: 8,
        }
    }

    pub fn validate(&self) -> Result<(), UnitsError> {
        require(
            self.beta2 < 0.0,
            "beta2",
            self.beta2,
            "must be negative (anomalous dispersion)",
        )?;
        require(self.gamma > 0.0, "gamma", self.gamma, "must be positive")?;
        require(self.alpha_db >= 0.0, "alpha_db", self.alpha_db, "must be non-negative")?;
        require(
            self.span_length > 0.0,
            "span_length",
            self.span_length,
            "must be positive",
        )?;
        Ok(())
    }

    /// Total link length in km.
    pub fn link_length(&self) -> f64 {
        self.span_length * self.n_spans as f64
    }

    /// Power attenuation coefficient in 1/km.
    pub fn alpha_per_km(&self) -> f64 {
        self.alpha_db * std::f64::consts::LN_10 / 10.0
    }

    /// Loss of one span in dB.
    pub fn span_loss_db(&self) -> f64 {
        self.alpha_db * self.span_length
    }
}

/// Scale factors between physical and normalized quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationScale {
    /// Normalization time in seconds.
    pub t0: f64,
    /// Normalization length in km.
    pub l0: f64,
    /// Normalization power in watts.
    pub p0: f64,
    /// Mean launch power of the constellation at nominal scaling, in watts.
    pub p_ideal_mean: f64,
    /// Extra launch power on top of `p_ideal_mean`, in dB.
    pub launch_offset_db: f64,
}

/// Derives the normalization from fiber parameters and symbol timing.
///
/// `p_ideal_mean` is left at zero; attach the constellation power with
/// [`NormalizationScale::with_mean_normalized_power`].
pub fn derive_scale(
    fiber: &FiberParams,
    symbol_rate: f64,
    window_width: f64,
) -> Result<NormalizationScale, UnitsError> {
    require(symbol_rate > 0.0, "symbol_rate", symbol_rate, "must be positive")?;
    require(window_width > 0.0, "window_width", window_width, "must be positive")?;
    require(fiber.beta2 != 0.0, "beta2", fiber.beta2, "must be non-zero")?;
    require(fiber.gamma > 0.0, "gamma", fiber.gamma, "must be positive")?;

    let t0 = 1.0 / symbol_rate / window_width;
    let t0_ps = t0 * 1e12;
    let l0 = 2.0 * t0_ps * t0_ps / fiber.beta2.abs();
    let p0 = 2.0 / (fiber.gamma * l0);
    Ok(NormalizationScale {
        t0,
        l0,
        p0,
        p_ideal_mean: 0.0,
        launch_offset_db: 0.0,
    })
}

impl NormalizationScale {
    /// Sets `p_ideal_mean` from the constellation's mean normalized power
    /// (energy per symbol divided by the normalized symbol duration).
    pub fn with_mean_normalized_power(mut self, mean_power: f64) -> Self {
        self.p_ideal_mean = mean_power * self.p0;
        self
    }

    pub fn with_launch_offset_db(mut self, offset_db: f64) -> Self {
        self.launch_offset_db = offset_db;
        self
    }

    /// Mean physical launch power in watts, including the launch offset.
    pub fn launch_power(&self) -> f64 {
        self.p_ideal_mean * db_to_linear(self.launch_offset_db)
    }

    pub fn launch_power_dbm(&self) -> f64 {
        watts_to_dbm(self.launch_power())
    }

    /// Amplitude factor corresponding to `launch_offset_db`.
    pub fn launch_amplitude_gain(&self) -> f64 {
        db_to_linear(self.launch_offset_db).sqrt()
    }

    /// Physical distance (km) to normalized distance.
    pub fn distance_to_normalized(&self, km: f64) -> f64 {
        km / self.l0
    }

    /// Power attenuation coefficient (1/km) to normalized units.
    pub fn loss_to_normalized(&self, alpha_per_km: f64) -> f64 {
        alpha_per_km * self.l0
    }

    /// Complex-baseband simulation bandwidth (Hz) of a normalized grid step.
    pub fn sample_rate(&self, dt: f64) -> f64 {
        1.0 / (dt * self.t0)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w * 1e3)
}

/// Uniformly sampled complex baseband field in normalized units.
///
/// Sample `n` sits at `t_n = (n + ½ - N/2)·dt`, so the time origin is the
/// window center.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnvelope {
    samples: Vec<Complex64>,
    dt: f64,
    samples_per_symbol: usize,
}

impl ComplexEnvelope {
    pub fn new(samples: Vec<Complex64>, dt: f64, samples_per_symbol: usize) -> Result<Self, UnitsError> {
        if samples.is_empty() {
            return Err(UnitsError::InvalidEnvelope("no samples"));
        }
        require(dt > 0.0, "dt", dt, "must be positive")?;
        if samples_per_symbol == 0 {
            return Err(UnitsError::InvalidEnvelope("samples_per_symbol must be at least 1"));
        }
        Ok(Self {
            samples,
            dt,
            samples_per_symbol,
        })
    }

    /// Envelope holding a single symbol slot.
    pub fn single(samples: Vec<Complex64>, dt: f64) -> Result<Self, UnitsError> {
        let n = samples.len();
        Self::new(samples, dt, n.max(1))
    }

    pub fn zeros(len: usize, dt: f64, samples_per_symbol: usize) -> Result<Self, UnitsError> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], dt, samples_per_symbol)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total normalized duration.
    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    /// Left edge of the window (the first cell starts here).
    pub fn start_time(&self) -> f64 {
        -0.5 * self.duration()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.start_time() + (n as f64 + 0.5) * self.dt
    }

    /// True when the length is a whole number of symbol slots.
    pub fn is_frame(&self) -> bool {
        self.samples.len().is_multiple_of(self.samples_per_symbol)
    }

    pub fn n_slots(&self) -> usize {
        self.samples.len() / self.samples_per_symbol
    }

    /// Copy of slot `k` as a stand-alone envelope centered on its own window.
    pub fn slot(&self, k: usize) -> Option<ComplexEnvelope> {
        let sps = self.samples_per_symbol;
        let lo = k.checked_mul(sps)?;
        let hi = lo.checked_add(sps)?;
        let s = self.samples.get(lo..hi)?;
        Some(ComplexEnvelope {
            samples: s.to_vec(),
            dt: self.dt,
            samples_per_symbol: sps,
        })
    }

    /// Riemann-sum energy ∫|q|² dt.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn mean_power(&self) -> f64 {
        self.energy() / self.duration()
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> ComplexEnvelope {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|s| *s *= factor);
        out
    }

    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> ComplexEnvelope {
        debug_assert_eq!(samples.len(), self.samples.len());
        ComplexEnvelope {
            samples,
            dt: self.dt,
            samples_per_symbol: self.samples_per_symbol,
        }
    }
}

/// Field in physical units: amplitude in √W, step in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalWaveform {
    pub samples: Vec<Complex64>,
    pub dt_s: f64,
    pub samples_per_symbol: usize,
}

impl PhysicalWaveform {
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

pub fn to_normalized(
    physical_samples: &[Complex64],
    dt_s: f64,
    samples_per_symbol: usize,
    scale: &NormalizationScale,
) -> Result<ComplexEnvelope, UnitsError> {
    require(dt_s > 0.0, "dt_s", dt_s, "must be positive")?;
    require(scale.p0 > 0.0, "p0", scale.p0, "must be positive")?;
    require(scale.t0 > 0.0, "t0", scale.t0, "must be positive")?;
    let inv = 1.0 / scale.p0.sqrt();
    let samples = physical_samples.iter().map(|s| s * inv).collect();
    ComplexEnvelope::new(samples, dt_s / scale.t0, samples_per_symbol)
}

pub fn to_physical(env: &ComplexEnvelope, scale: &NormalizationScale) -> PhysicalWaveform {
    let amp = scale.p0.sqrt();
    PhysicalWaveform {
        samples: env.samples.iter().map(|s| s * amp).collect(),
        dt_s: env.dt * scale.t0,
        samples_per_symbol: env.samples_per_symbol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fiber(beta2: f64, gamma: f64) -> FiberParams {
        FiberParams {
            beta2,
            gamma,
            ..FiberParams::nz_dsf()
        }
    }

    #[test]
    fn unit_dispersion_gives_two_km() {
        // T0 = 1 ps: 1 THz symbol rate with W = 1.
        let s = derive_scale(&fiber(-1.0, 3.0), 1e12, 1.0).unwrap();
        assert_relative_eq!(s.t0, 1e-12, max_relative = 1e-12);
        assert_relative_eq!(s.l0, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn unit_gamma_gives_one_watt_at_two_km() {
        let s = derive_scale(&fiber(-1.0, 1.0), 1e12, 1.0).unwrap();
        assert_relative_eq!(s.p0, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn reference_link_scale() {
        // 62.5² · 2 / 5.75 = 1358.6957 km; P0 = 2 / (1.6 · 1358.6957) W.
        let s = derive_scale(&FiberParams::nz_dsf(), 1e9, DEFAULT_WINDOW_WIDTH).unwrap();
        assert_relative_eq!(s.t0, 62.5e-12, max_relative = 1e-12);
        assert_relative_eq!(s.l0, 1_358.695_652_173_913, max_relative = 1e-12);
        assert_relative_eq!(s.p0, 9.2e-4, max_relative = 1e-12);
        assert_relative_eq!(s.l0 * 5.75, 2.0 * 62.5 * 62.5, max_relative = 1e-12);
        assert_relative_eq!(s.p0 * 1.6 * s.l0, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        let f = FiberParams::nz_dsf();
        assert!(derive_scale(&f, 0.0, 16.0).is_err());
        assert!(derive_scale(&f, 1e9, -1.0).is_err());
        assert!(derive_scale(&f, f64::NAN, 16.0).is_err());
        assert!(derive_scale(&fiber(-1.0, 0.0), 1e9, 16.0).is_err());
        assert!(fiber(0.5, 1.0).validate().is_err());
        assert!(FiberParams { n_spans: 0, ..f }.validate().is_ok());
        assert!(FiberParams { span_length: 0.0, ..f }.validate().is_err());
        assert!(f.validate().is_ok());
    }

    #[test]
    fn zero_and_unit_conversions() {
        let s = derive_scale(&FiberParams::nz_dsf(), 1e9, 16.0).unwrap();
        let z = to_normalized(&[Complex64::new(0.0, 0.0); 8], 1e-12, 8, &s).unwrap();
        assert!(z.samples().iter().all(|x| x.norm() == 0.0));
        let one = to_normalized(&[Complex64::new(s.p0.sqrt(), 0.0); 4], 1e-12, 4, &s).unwrap();
        for x in one.samples() {
            assert_relative_eq!(x.re, 1.0, max_relative = 1e-14);
        }
        let env = ComplexEnvelope::new(vec![Complex64::new(1.0, 0.0); 4], 0.25, 4).unwrap();
        let p = to_physical(&env, &s);
        assert_relative_eq!(p.samples[0].re, s.p0.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(p.dt_s, 0.25 * s.t0, max_relative = 1e-14);
        let zero = to_physical(&ComplexEnvelope::zeros(3, 0.1, 3).unwrap(), &s);
        assert!(zero.samples.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn launch_power_bookkeeping() {
        let s = derive_scale(&FiberParams::nz_dsf(), 1e9, 16.0)
            .unwrap()
            .with_mean_normalized_power(3.6 / 16.0)
            .with_launch_offset_db(3.0);
        assert_relative_eq!(s.launch_power(), 0.225 * s.p0 * db_to_linear(3.0), max_relative = 1e-14);
        // Mean physical power of a frame = (energy / duration) · P0 · 10^(offset/10).
        let env = ComplexEnvelope::new(vec![Complex64::new(0.5, 0.0); 64], 0.25, 64).unwrap();
        let launched = env.scaled(s.launch_amplitude_gain());
        let phys = to_physical(&launched, &s);
        assert_relative_eq!(
            phys.mean_power(),
            env.energy() / env.duration() * s.p0 * db_to_linear(3.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn envelope_validation_and_slots() {
        assert!(ComplexEnvelope::new(vec![], 1.0, 1).is_err());
        assert!(ComplexEnvelope::new(vec![Complex64::new(1.0, 0.0)], 0.0, 1).is_err());
        let env = ComplexEnvelope::new((0..12).map(|k| Complex64::new(k as f64, 0.0)).collect(), 0.5, 4).unwrap();
        assert!(env.is_frame());
        assert_eq!(env.n_slots(), 3);
        assert_eq!(env.slot(1).unwrap().samples()[0].re, 4.0);
        assert!(env.slot(3).is_none());
        assert_relative_eq!(env.time(0), -2.75);
        assert_relative_eq!(env.time(11), 2.75);
    }

    proptest! {
        #[test]
        fn physical_round_trip(
            re in prop::collection::vec(-1e-1f64..1e-1, 1..64),
            im_seed in 0.0f64..1.0,
            dt_s in 1e-13f64..1e-10,
            rate in 1e8f64..1e11,
        ) {
            let s = derive_scale(&FiberParams::nz_dsf(), rate, 16.0).unwrap();
            let x: Vec<Complex64> = re.iter().enumerate()
                .map(|(k, r)| Complex64::new(*r, (k as f64 * im_seed).sin() * 0.05))
                .collect();
            let env = to_normalized(&x, dt_s, x.len(), &s).unwrap();
            let back = to_physical(&env, &s);
            prop_assert!(((back.dt_s - dt_s) / dt_s).abs() < 1e-12);
            for (a, b) in back.samples.iter().zip(&x) {
                prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
            }
        }
    }
}
