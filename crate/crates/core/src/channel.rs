//! Fiber channel: split-step Fourier propagation, amplification and noise.
//!
//! Propagation solves `q_z = j q_tt + 2j|q|²q - (α/2) q` in normalized
//! units with symmetric (Strang) splitting on a periodic grid. Adjacent
//! half dispersion steps are merged, so each step costs one FFT pair.

use crate::units::{db_to_linear, ComplexEnvelope, FiberParams, NormalizationScale};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// Reference bandwidth for OSNR figures (0.1 nm at 1550 nm).
pub const OSNR_REFERENCE_BANDWIDTH_HZ: f64 = 12.5e9;
/// Optical carrier frequency used for ASE power (1550 nm).
pub const CARRIER_FREQUENCY_HZ: f64 = 299_792_458.0 / 1550e-9;
const PLANCK: f64 = 6.626_070_15e-34;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("spectral energy fraction {fraction:.2e} in the outer band at step {step}; grid aliases")]
    Aliasing { fraction: f64, step: usize },
    #[error("field became non-finite after {step} steps")]
    NonFinite { step: usize },
    #[error(transparent)]
    Units(#[from] crate::units::UnitsError),
}

fn param(ok: bool, name: &'static str, value: f64) -> Result<(), ChannelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ChannelError::InvalidParameter { name, value })
    }
}

/// Step control for [`ssfm_propagate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsfmOptions {
    /// Upper bound on the normalized step size.
    pub max_step: f64,
    /// Upper bound on the per-step peak nonlinear phase `2|q|²h`.
    pub max_nl_phase: f64,
    /// Growth of the spectral energy fraction in the outer tenth of the
    /// band, relative to the input's own, above which propagation fails
    /// with [`ChannelError::Aliasing`]. Non-positive disables the check.
    pub alias_threshold: f64,
}

impl Default for SsfmOptions {
    fn default() -> Self {
        Self {
            max_step: 1e-4,
            max_nl_phase: 1e-3,
            alias_threshold: 1e-6,
        }
    }
}

/// Diagnostics from one propagation call.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PropagationReport {
    pub steps: usize,
    /// Outer-band spectral energy fraction of the input.
    pub input_edge_fraction: f64,
    /// Largest observed outer-band spectral energy fraction.
    pub max_edge_fraction: f64,
}

struct Grid {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    omega2: Vec<f64>,
    edge: Vec<bool>,
    scratch: Vec<Complex64>,
}

impl Grid {
    fn new(n: usize, dt: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
        let mut omega2 = Vec::with_capacity(n);
        let mut edge = Vec::with_capacity(n);
        for k in 0..n {
            let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let w = 2.0 * PI * m / (n as f64 * dt);
            omega2.push(w * w);
            edge.push(m.abs() > 0.45 * n as f64);
        }
        Self {
            fwd,
            inv,
            omega2,
            edge,
            scratch,
        }
    }

    /// Applies `exp(-jω²h)` and returns the outer-band energy fraction.
    fn disperse(&mut self, q: &mut [Complex64], h: f64) -> f64 {
        self.fwd.process_with_scratch(q, &mut self.scratch);
        let mut total = 0.0;
        let mut outer = 0.0;
        for ((x, w2), e) in q.iter_mut().zip(&self.omega2).zip(&self.edge) {
            let p = x.norm_sqr();
            total += p;
            if *e {
                outer += p;
            }
            *x *= Complex64::from_polar(1.0, -w2 * h);
        }
        self.inv.process_with_scratch(q, &mut self.scratch);
        let n = q.len() as f64;
        q.iter_mut().for_each(|x| *x /= n);
        if total > 0.0 {
            outer / total
        } else {
            0.0
        }
    }
}

/// Nonlinear and loss step of length `h`, exact for constant `|q|` decay.
fn nonlinear(q: &mut [Complex64], h: f64, alpha: f64) {
    let (decay, l_eff) = if alpha > 0.0 {
        ((-alpha * h / 2.0).exp(), (1.0 - (-alpha * h).exp()) / alpha)
    } else {
        (1.0, h)
    };
    for x in q.iter_mut() {
        *x *= Complex64::from_polar(decay, 2.0 * x.norm_sqr() * l_eff);
    }
}

/// Propagates over normalized length `length` with normalized power loss `alpha`.
pub fn ssfm_propagate(
    env: &ComplexEnvelope,
    length: f64,
    alpha: f64,
    opts: &SsfmOptions,
) -> Result<(ComplexEnvelope, PropagationReport), ChannelError> {
    param(length >= 0.0, "length", length)?;
    param(alpha >= 0.0, "alpha", alpha)?;
    param(opts.max_step > 0.0, "max_step", opts.max_step)?;
    param(opts.max_nl_phase > 0.0, "max_nl_phase", opts.max_nl_phase)?;

    let mut q = env.samples().to_vec();
    let mut report = PropagationReport::default();
    if length == 0.0 || q.is_empty() {
        return Ok((env.clone(), report));
    }
    let mut grid = Grid::new(q.len(), env.dt());
    let mut z = 0.0;
    let mut pending = 0.0;
    let check = opts.alias_threshold > 0.0;

    while z < length {
        let peak = q.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max);
        let mut h = opts.max_step.min(length - z);
        if peak > 0.0 {
            h = h.min(opts.max_nl_phase / (2.0 * peak));
        }
        // Avoid a sliver step at the end.
        if length - z - h < 1e-3 * h {
            h = length - z;
        }
        let frac = grid.disperse(&mut q, pending + h / 2.0);
        if report.steps == 0 {
            // Dispersion does not change |Q(ω)|, so this is the input's own content.
            report.input_edge_fraction = frac;
        }
        report.max_edge_fraction = report.max_edge_fraction.max(frac);
        if check && frac - report.input_edge_fraction > opts.alias_threshold {
            return Err(ChannelError::Aliasing {
                fraction: frac,
                step: report.steps,
            });
        }
        nonlinear(&mut q, h, alpha);
        pending = h / 2.0;
        z += h;
        report.steps += 1;
        if report.steps % 256 == 0 && q.iter().any(|x| !x.is_finite()) {
            return Err(ChannelError::NonFinite { step: report.steps });
        }
    }
    grid.disperse(&mut q, pending);
    if q.iter().any(|x| !x.is_finite()) {
        return Err(ChannelError::NonFinite { step: report.steps });
    }
    Ok((env.with_samples(q), report))
}

/// How noise enters the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Off,
    /// White Gaussian noise added once at the receiver so that the
    /// OSNR in a 12.5 GHz reference bandwidth equals `osnr_db`.
    TargetOsnr { osnr_db: f64 },
    /// ASE from every amplifier with noise figure `nf_db`.
    PerAmpNf { nf_db: f64 },
}

/// Link description: spans, amplification, noise and step control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub fiber: FiberParams,
    /// Ignore fiber loss and amplifier gain.
    #[serde(default)]
    pub lossless: bool,
    /// Amplifier gain per span in dB; defaults to the span loss.
    #[serde(default)]
    pub amp_gain_db: Option<f64>,
    #[serde(default)]
    pub noise: NoiseMode,
    #[serde(default = "default_steps_per_span")]
    pub steps_per_span: usize,
    #[serde(default = "default_max_nl_phase")]
    pub max_nl_phase: f64,
    #[serde(default = "default_alias_threshold")]
    pub alias_threshold: f64,
}

fn default_steps_per_span() -> usize {
    1000
}
fn default_max_nl_phase() -> f64 {
    SsfmOptions::default().max_nl_phase
}
fn default_alias_threshold() -> f64 {
    SsfmOptions::default().alias_threshold
}

impl LinkConfig {
    pub fn new(fiber: FiberParams) -> Self {
        Self {
            fiber,
            lossless: false,
            amp_gain_db: None,
            noise: NoiseMode::Off,
            steps_per_span: default_steps_per_span(),
            max_nl_phase: default_max_nl_phase(),
            alias_threshold: default_alias_threshold(),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        self.fiber.validate()?;
        param(self.steps_per_span > 0, "steps_per_span", self.steps_per_span as f64)?;
        param(self.max_nl_phase > 0.0, "max_nl_phase", self.max_nl_phase)?;
        if let Some(g) = self.amp_gain_db {
            param(g >= 0.0, "amp_gain_db", g)?;
        }
        match self.noise {
            NoiseMode::Off => {}
            NoiseMode::TargetOsnr { osnr_db } => param(true, "osnr_db", osnr_db)?,
            NoiseMode::PerAmpNf { nf_db } => param(nf_db >= 0.0, "nf_db", nf_db)?,
        }
        Ok(())
    }

    /// Amplifier power gain per span in dB (0 when lossless).
    pub fn gain_db(&self) -> f64 {
        if self.lossless {
            0.0
        } else {
            self.amp_gain_db.unwrap_or_else(|| self.fiber.span_loss_db())
        }
    }

    fn ssfm_options(&self, scale: &NormalizationScale) -> SsfmOptions {
        SsfmOptions {
            max_step: scale.distance_to_normalized(self.fiber.span_length) / self.steps_per_span as f64,
            max_nl_phase: self.max_nl_phase,
            alias_threshold: self.alias_threshold,
        }
    }
}

/// Propagates one span (fiber then amplifier), noiselessly.
pub fn propagate_span(
    env: &ComplexEnvelope,
    link: &LinkConfig,
    scale: &NormalizationScale,
) -> Result<(ComplexEnvelope, PropagationReport), ChannelError> {
    link.validate()?;
    let alpha = if link.lossless {
        0.0
    } else {
        scale.loss_to_normalized(link.fiber.alpha_per_km())
    };
    let (out, rep) = ssfm_propagate(
        env,
        scale.distance_to_normalized(link.fiber.span_length),
        alpha,
        &link.ssfm_options(scale),
    )?;
    Ok((out.scaled(db_to_linear(link.gain_db()).sqrt()), rep))
}

/// Output of [`propagate_link`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutput {
    /// Received field, rescaled by the inverse launch gain.
    pub envelope: ComplexEnvelope,
    pub steps: usize,
}

/// Launch scaling, all spans, noise, and receiver descaling.
///
/// `rng` is only drawn from when the link has noise.
pub fn propagate_link<R: Rng + ?Sized>(
    env: &ComplexEnvelope,
    link: &LinkConfig,
    scale: &NormalizationScale,
    rng: &mut R,
) -> Result<LinkOutput, ChannelError> {
    link.validate()?;
    // Without fiber the launch scaling would only add rounding.
    let g = if link.fiber.n_spans == 0 {
        1.0
    } else {
        scale.launch_amplitude_gain()
    };
    let mut cur = if g == 1.0 { env.clone() } else { env.scaled(g) };
    let mut steps = 0;
    let mut opts = link.ssfm_options(scale);
    let alpha = if link.lossless {
        0.0
    } else {
        scale.loss_to_normalized(link.fiber.alpha_per_km())
    };
    let span = scale.distance_to_normalized(link.fiber.span_length);
    let amp = db_to_linear(link.gain_db()).sqrt();
    for _ in 0..link.fiber.n_spans {
        let (out, rep) = ssfm_propagate(&cur, span, alpha, &opts)?;
        steps += rep.steps;
        cur = out.scaled(amp);
        if let NoiseMode::PerAmpNf { nf_db } = link.noise {
            let var = ase_variance(db_to_linear(link.gain_db()), nf_db, cur.dt(), scale);
            add_awgn(&mut cur, var, rng);
            // Broadband ASE fills the band edges by construction.
            opts.alias_threshold = 0.0;
        }
    }
    if let NoiseMode::TargetOsnr { osnr_db } = link.noise {
        cur = add_noise_for_osnr(&cur, osnr_db, scale, rng);
    }
    Ok(LinkOutput {
        envelope: if g == 1.0 { cur } else { cur.scaled(1.0 / g) },
        steps,
    })
}

/// Lossless, noiseless propagation over a normalized distance.
pub fn propagate_lossless(
    env: &ComplexEnvelope,
    length: f64,
    opts: &SsfmOptions,
) -> Result<ComplexEnvelope, ChannelError> {
    Ok(ssfm_propagate(env, length, 0.0, opts)?.0)
}

/// Per-sample complex noise variance (normalized units) of one amplifier.
pub fn ase_variance(gain: f64, nf_db: f64, dt: f64, scale: &NormalizationScale) -> f64 {
    let n_sp = db_to_linear(nf_db) / 2.0;
    let psd = n_sp * PLANCK * CARRIER_FREQUENCY_HZ * (gain - 1.0).max(0.0);
    psd * scale.sample_rate(dt) / scale.p0
}

/// Adds circular complex Gaussian noise with `E|n|² = variance`.
pub fn add_awgn<R: Rng + ?Sized>(env: &mut ComplexEnvelope, variance: f64, rng: &mut R) {
    if variance <= 0.0 {
        return;
    }
    let sd = (variance / 2.0).sqrt();
    for x in env.samples_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *x += Complex64::new(sd * re, sd * im);
    }
}

/// Noise variance giving `osnr_db` for the mean power of `env`.
pub fn osnr_noise_variance(env: &ComplexEnvelope, osnr_db: f64, scale: &NormalizationScale) -> f64 {
    let b_sim = scale.sample_rate(env.dt());
    env.mean_power() * b_sim / (OSNR_REFERENCE_BANDWIDTH_HZ * db_to_linear(osnr_db))
}

pub fn add_noise_for_osnr<R: Rng + ?Sized>(
    env: &ComplexEnvelope,
    osnr_db: f64,
    scale: &NormalizationScale,
    rng: &mut R,
) -> ComplexEnvelope {
    let mut out = env.clone();
    add_awgn(&mut out, osnr_noise_variance(env, osnr_db, scale), rng);
    out
}

/// OSNR (linear) of `noisy` relative to the noise-free `reference`.
///
/// Returns `+∞` when the two are identical.
pub fn measure_osnr(reference: &ComplexEnvelope, noisy: &ComplexEnvelope, scale: &NormalizationScale) -> f64 {
    let n = reference.len().min(noisy.len()).max(1) as f64;
    let p_noise = reference
        .samples()
        .iter()
        .zip(noisy.samples())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / n;
    if p_noise == 0.0 {
        return f64::INFINITY;
    }
    let b_sim = scale.sample_rate(reference.dt());
    reference.mean_power() / (p_noise / b_sim * OSNR_REFERENCE_BANDWIDTH_HZ)
}
