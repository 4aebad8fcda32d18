//! Forward nonlinear Fourier transform (discrete part).
//!
//! The scattering problem is
//!
//! ```text
//! dv/dt = [ -jλ   q*(t) ] v
//!         [ -q(t)  jλ   ]
//! ```
//!
//! with Jost solution `v → (1, 0)ᵀ e^{-jλt}` at the left edge and
//! `v → (a e^{-jλt}, b e^{jλt})ᵀ` at the right edge. Eigenvalues are zeros of
//! `a(λ)` in the upper half plane and the spectral amplitude attached to an
//! eigenvalue is `Q_d(λ) = b(λ) / a'(λ)`.
//!
//! This sign choice fixes two properties the rest of the crate relies on:
//! a global phase `e^{jθ}` on `q` advances every `Q_d` phase by `+θ`, and
//! under the normalized NLSE (see [`crate::units`]) the amplitudes evolve as
//! `Q_d(λ; z) = Q_d(λ) exp(-j4λ²z)`.
//!
//! The potential is integrated cell by cell (one cell per sample) using
//! closed-form exponentials of a traceless 2×2 generator. The default
//! generator is the fourth-order Magnus expansion around the cell midpoint;
//! the plain piecewise-constant generator is kept for comparison.

use crate::units::ComplexEnvelope;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest |Im λ · t| accepted before the exponential factors overflow.
const MAX_EXPONENT: f64 = 600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NftError {
    #[error("λ = {lambda} is out of numerical range for a window of half-width {half_width}")]
    NumericalRange { lambda: Complex64, half_width: f64 },
    #[error("non-finite scattering data at λ = {0}")]
    NonFinite(Complex64),
    #[error("eigenvalue {0} is not in the upper half plane")]
    NotUpperHalfPlane(Complex64),
    #[error("degenerate eigenvalue {lambda}: |a'| = {a_prime_abs:e}")]
    DegenerateEigenvalue { lambda: Complex64, a_prime_abs: f64 },
    #[error("eigenvalues {0} and {1} are closer than the separation tolerance")]
    NotDistinct(Complex64, Complex64),
    #[error("no hints and no search region given")]
    NoSeeds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Constant potential per cell (second order).
    PiecewiseConstant,
    /// Fourth-order Magnus step using finite-difference q′ and q″.
    #[default]
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NftConfig {
    pub discretization: Discretization,
    /// Newton stops once |a(λ)| falls below this.
    pub newton_tol: f64,
    pub max_iterations: usize,
    /// Roots closer than this are merged.
    pub dedup_radius: f64,
    /// Roots with Im λ at or below this are discarded.
    pub im_floor: f64,
    /// |a′| below this marks a degenerate eigenvalue.
    pub degenerate_tol: f64,
    /// Cap on a single Newton step.
    pub max_step: f64,
    /// Extra deflated sweeps in a blind search (hinted searches skip them).
    pub deflation_passes: usize,
}

impl Default for NftConfig {
    fn default() -> Self {
        Self {
            discretization: Discretization::Magnus4,
            newton_tol: 1e-10,
            max_iterations: 50,
            dedup_radius: 1e-4,
            im_floor: 0.01,
            degenerate_tol: 1e-12,
            max_step: 0.5,
            deflation_passes: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoeffs {
    pub a: Complex64,
    pub b: Complex64,
    pub a_prime: Complex64,
    pub lambda: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEntry {
    pub lambda: Complex64,
    pub qd: Complex64,
}

/// Eigenvalues with their spectral amplitudes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscreteSpectrum {
    entries: Vec<SpectralEntry>,
}

impl DiscreteSpectrum {
    /// Validates upper-half-plane membership and pairwise separation.
    pub fn new(entries: Vec<SpectralEntry>, min_separation: f64) -> Result<Self, NftError> {
        for e in &entries {
            if !(e.lambda.im > 0.0) || !e.lambda.re.is_finite() || !e.qd.is_finite() {
                return Err(NftError::NotUpperHalfPlane(e.lambda));
            }
        }
        for (i, x) in entries.iter().enumerate() {
            for y in &entries[i + 1..] {
                if (x.lambda - y.lambda).norm() <= min_separation {
                    return Err(NftError::NotDistinct(x.lambda, y.lambda));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs(pairs: &[(Complex64, Complex64)]) -> Result<Self, NftError> {
        Self::new(
            pairs.iter().map(|&(lambda, qd)| SpectralEntry { lambda, qd }).collect(),
            NftConfig::default().dedup_radius,
        )
    }

    pub fn entries(&self) -> &[SpectralEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    /// `a'(λ_k)` of the reflectionless potential with these eigenvalues.
    pub fn reflectionless_a_prime(&self, k: usize) -> Complex64 {
        let lk = self.entries[k].lambda;
        let mut r = (lk - lk.conj()).inv();
        for (j, e) in self.entries.iter().enumerate() {
            if j != k {
                r *= (lk - e.lambda) / (lk - e.lambda.conj());
            }
        }
        r
    }

    /// Trace-formula energy 4 Σ Im λ of the reflectionless potential.
    pub fn soliton_energy(&self) -> f64 {
        4.0 * self.entries.iter().map(|e| e.lambda.im).sum::<f64>()
    }
}

/// Per-cell generator Ω (traceless) and its λ-derivative.
struct Generator {
    o11: Complex64,
    o12: Complex64,
    o21: Complex64,
    d11: Complex64,
    d12: Complex64,
    d21: Complex64,
}

/// Finite-difference first and second derivatives on the sample grid.
fn derivatives(q: &[Complex64], h: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = q.len();
    let zero = Complex64::new(0.0, 0.0);
    if n < 3 {
        return (vec![zero; n], vec![zero; n]);
    }
    let mut d1 = vec![zero; n];
    let mut d2 = vec![zero; n];
    for i in 1..n - 1 {
        d1[i] = (q[i + 1] - q[i - 1]) / (2.0 * h);
        d2[i] = (q[i + 1] - 2.0 * q[i] + q[i - 1]) / (h * h);
    }
    d1[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h);
    d2[0] = (q[0] - 2.0 * q[1] + q[2]) / (h * h);
    d1[n - 1] = (3.0 * q[n - 1] - 4.0 * q[n - 2] + q[n - 3]) / (2.0 * h);
    d2[n - 1] = (q[n - 1] - 2.0 * q[n - 2] + q[n - 3]) / (h * h);
    (d1, d2)
}

/// Integrates the scattering problem across the whole envelope.
pub fn scattering(env: &ComplexEnvelope, lambda: Complex64) -> Result<ScatteringCoeffs, NftError> {
    scattering_with(env, lambda, Discretization::default())
}

pub fn scattering_with(
    env: &ComplexEnvelope,
    lambda: Complex64,
    disc: Discretization,
) -> Result<ScatteringCoeffs, NftError> {
    let q = env.samples();
    let h = env.dt();
    let t1 = env.start_time();
    let t2 = -t1;
    if !lambda.is_finite() {
        return Err(NftError::NonFinite(lambda));
    }
    if lambda.im.abs() * t2 > MAX_EXPONENT {
        return Err(NftError::NumericalRange { lambda, half_width: t2 });
    }

    let (d1, d2) = match disc {
        Discretization::Magnus4 => derivatives(q, h),
        Discretization::PiecewiseConstant => (Vec::new(), Vec::new()),
    };

    let e_start = (-J * lambda * t1).exp();
    let mut v = [e_start, Complex64::new(0.0, 0.0)];
    let mut dv = [-J * t1 * e_start, Complex64::new(0.0, 0.0)];

    for (n, &qn) in q.iter().enumerate() {
        let g = generator(disc, lambda, h, qn, &d1, &d2, n);
        step(&g, &mut v, &mut dv);
    }

    let e_end = (J * lambda * t2).exp();
    let a = e_end * v[0];
    let a_prime = e_end * (J * t2 * v[0] + dv[0]);
    let b = (-J * lambda * t2).exp() * v[1];
    if !(a.is_finite() && b.is_finite() && a_prime.is_finite()) {
        return Err(NftError::NonFinite(lambda));
    }
    Ok(ScatteringCoeffs { a, b, a_prime, lambda })
}

#[inline]
fn generator(
    disc: Discretization,
    lambda: Complex64,
    h: f64,
    qn: Complex64,
    d1: &[Complex64],
    d2: &[Complex64],
    n: usize,
) -> Generator {
    match disc {
        Discretization::PiecewiseConstant => Generator {
            o11: -J * lambda * h,
            o12: qn.conj() * h,
            o21: -qn * h,
            d11: -J * h,
            d12: Complex64::new(0.0, 0.0),
            d21: Complex64::new(0.0, 0.0),
        },
        Discretization::Magnus4 => {
            let h3_12 = h * h * h / 12.0;
            let h3_24 = h * h * h / 24.0;
            let p = d1[n];
            let pp = d2[n];
            let cross = (qn.conj() * p).im;
            Generator {
                o11: -J * lambda * h + J * (2.0 * h3_12 * cross),
                o12: qn.conj() * h + pp.conj() * h3_24 + 2.0 * J * lambda * p.conj() * h3_12,
                o21: -qn * h - pp * h3_24 + 2.0 * J * lambda * p * h3_12,
                d11: -J * h,
                d12: 2.0 * J * p.conj() * h3_12,
                d21: 2.0 * J * p * h3_12,
            }
        }
    }
}

/// `cosh k`, `sinh k / k` and `(cosh k - sinh k / k) / k²` as functions of `k²`.
#[inline]
fn exp_coeffs(k2: Complex64) -> (Complex64, Complex64, Complex64) {
    if k2.norm() < 1e-4 {
        (
            1.0 + k2 / 2.0 + k2 * k2 / 24.0,
            1.0 + k2 / 6.0 + k2 * k2 / 120.0,
            1.0 / 3.0 + k2 / 30.0 + k2 * k2 / 840.0,
        )
    } else {
        let k = k2.sqrt();
        let c = k.cosh();
        let s = k.sinh() / k;
        (c, s, (c - s) / k2)
    }
}

/// `b(λ)` at an eigenvalue from the ratio of the left and right Jost
/// solutions, both integrated towards the energy centroid.
///
/// Reading `b` off the right boundary amplifies the integration error by
/// roughly `e^{2 Im λ T}`; meeting in the interior avoids that growth.
pub fn bidirectional_b(env: &ComplexEnvelope, lambda: Complex64, disc: Discretization) -> Result<Complex64, NftError> {
    let q = env.samples();
    let h = env.dt();
    let n = q.len();
    let t1 = env.start_time();
    let t2 = -t1;
    if !lambda.is_finite() {
        return Err(NftError::NonFinite(lambda));
    }
    let (d1, d2) = match disc {
        Discretization::Magnus4 => derivatives(q, h),
        Discretization::PiecewiseConstant => (Vec::new(), Vec::new()),
    };
    let energy: f64 = q.iter().map(|x| x.norm_sqr()).sum();
    let split = if energy > 0.0 {
        let c = q.iter().enumerate().map(|(k, x)| k as f64 * x.norm_sqr()).sum::<f64>() / energy;
        (c.round() as usize).min(n)
    } else {
        n / 2
    };

    // Solutions are kept unit-sized with the scale in a complex log.
    let mut v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let mut log_v = -J * lambda * t1;
    for (k, &qk) in q.iter().enumerate().take(split) {
        let g = generator(disc, lambda, h, qk, &d1, &d2, k);
        let (c, s, _) = exp_coeffs(g.o11 * g.o11 + g.o12 * g.o21);
        v = [
            (c + s * g.o11) * v[0] + s * g.o12 * v[1],
            s * g.o21 * v[0] + (c - s * g.o11) * v[1],
        ];
        let m = v[0].norm().max(v[1].norm());
        v = [v[0] / m, v[1] / m];
        log_v += m.ln();
    }
    let mut w = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let mut log_w = J * lambda * t2;
    for k in (split..n).rev() {
        let g = generator(disc, lambda, h, q[k], &d1, &d2, k);
        let (c, s, _) = exp_coeffs(g.o11 * g.o11 + g.o12 * g.o21);
        // exp(-Ω) = c I - s Ω.
        w = [
            (c - s * g.o11) * w[0] - s * g.o12 * w[1],
            -s * g.o21 * w[0] + (c + s * g.o11) * w[1],
        ];
        let m = w[0].norm().max(w[1].norm());
        w = [w[0] / m, w[1] / m];
        log_w += m.ln();
    }
    let ratio = (v[0] * w[0].conj() + v[1] * w[1].conj()) / (w[0].norm_sqr() + w[1].norm_sqr());
    let b = ratio * (log_v - log_w).exp();
    if b.is_finite() {
        Ok(b)
    } else {
        Err(NftError::NonFinite(lambda))
    }
}

/// Applies `exp(Ω)` to `v` and its λ-derivative to `dv`.
#[inline]
fn step(g: &Generator, v: &mut [Complex64; 2], dv: &mut [Complex64; 2]) {
    let k2 = g.o11 * g.o11 + g.o12 * g.o21;
    let dk2 = 2.0 * g.o11 * g.d11 + g.d12 * g.o21 + g.o12 * g.d21;
    let (c, s, cs) = exp_coeffs(k2);
    let m11 = c + s * g.o11;
    let m22 = c - s * g.o11;
    let m12 = s * g.o12;
    let m21 = s * g.o21;
    let dc = s * dk2 / 2.0;
    let dsv = cs * dk2 / 2.0;
    let dm11 = dc + dsv * g.o11 + s * g.d11;
    let dm22 = dc - dsv * g.o11 - s * g.d11;
    let dm12 = dsv * g.o12 + s * g.d12;
    let dm21 = dsv * g.o21 + s * g.d21;

    let [v1, v2] = *v;
    let [w1, w2] = *dv;
    *dv = [
        dm11 * v1 + dm12 * v2 + m11 * w1 + m12 * w2,
        dm21 * v1 + dm22 * v2 + m21 * w1 + m22 * w2,
    ];
    *v = [m11 * v1 + m12 * v2, m21 * v1 + m22 * v2];
}

/// Rectangular grid of Newton seeds in the upper half plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl Default for SearchRegion {
    fn default() -> Self {
        Self {
            re_min: -1.0,
            re_max: 1.0,
            im_min: 0.05,
            im_max: 2.5,
            n_re: 5,
            n_im: 12,
        }
    }
}

impl SearchRegion {
    pub fn seeds(&self) -> Vec<Complex64> {
        let lin = |lo: f64, hi: f64, n: usize, i: usize| {
            if n <= 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.n_re * self.n_im);
        for i in 0..self.n_im {
            for r in 0..self.n_re {
                out.push(Complex64::new(
                    lin(self.re_min, self.re_max, self.n_re, r),
                    lin(self.im_min, self.im_max, self.n_im, i),
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeedOutcome {
    Converged {
        root: Complex64,
        residual: f64,
        iterations: usize,
    },
    Failed {
        seed: Complex64,
        reason: String,
    },
}

/// Result of an eigenvalue search: roots plus per-seed failures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EigenSearch {
    /// Converged, deduplicated roots sorted by descending imaginary part.
    pub roots: Vec<Complex64>,
    pub failures: Vec<(Complex64, String)>,
}

/// Newton–Raphson on `a(λ) = 0` from a single seed.
pub fn newton_root(env: &ComplexEnvelope, seed: Complex64, cfg: &NftConfig) -> SeedOutcome {
    newton_root_deflated(env, seed, &[], cfg)
}

const DEFLATED_WANDER_LIMIT: f64 = 1.0;

/// Newton–Raphson on `a(λ) / ∏(λ - r)` over the `known` roots `r`, so the
/// iteration is pushed away from zeros already found. Convergence is judged
/// on `|a|` itself.
pub fn newton_root_deflated(
    env: &ComplexEnvelope,
    seed: Complex64,
    known: &[Complex64],
    cfg: &NftConfig,
) -> SeedOutcome {
    let mut lambda = seed;
    for it in 0..=cfg.max_iterations {
        let s = match scattering_with(env, lambda, cfg.discretization) {
            Ok(s) => s,
            Err(e) => {
                return SeedOutcome::Failed {
                    seed,
                    reason: e.to_string(),
                }
            }
        };
        let residual = s.a.norm();
        if residual < cfg.newton_tol {
            return SeedOutcome::Converged {
                root: lambda,
                residual,
                iterations: it,
            };
        }
        if it == cfg.max_iterations {
            break;
        }
        if s.a_prime.norm() == 0.0 {
            return SeedOutcome::Failed {
                seed,
                reason: "vanishing derivative".into(),
            };
        }
        let mut delta = if known.is_empty() {
            s.a / s.a_prime
        } else {
            let pull: Complex64 = known.iter().map(|&r| (lambda - r).inv()).sum();
            (s.a_prime / s.a - pull).inv()
        };
        if !delta.is_finite() {
            return SeedOutcome::Failed {
                seed,
                reason: "deflated step is singular".into(),
            };
        }
        // Deflated iterates that wander far from every seed will not land
        // on a new root; stop them early.
        if !known.is_empty() && (lambda - seed).norm() > DEFLATED_WANDER_LIMIT {
            return SeedOutcome::Failed {
                seed,
                reason: "deflated iterate wandered off".into(),
            };
        }
        let dn = delta.norm();
        if dn > cfg.max_step {
            delta *= cfg.max_step / dn;
        }
        lambda -= delta;
        if !lambda.is_finite() {
            return SeedOutcome::Failed {
                seed,
                reason: "iterate diverged".into(),
            };
        }
        if lambda.im <= 0.0 {
            return SeedOutcome::Failed {
                seed,
                reason: "iterate left the upper half plane".into(),
            };
        }
        // Stagnation at the rounding floor counts as converged when the
        // residual is already small.
        if delta.norm() < 1e-14 * (1.0 + lambda.norm()) && residual < cfg.newton_tol.sqrt() {
            return SeedOutcome::Converged {
                root: lambda,
                residual,
                iterations: it + 1,
            };
        }
    }
    SeedOutcome::Failed {
        seed,
        reason: format!("no convergence within {} iterations", cfg.max_iterations),
    }
}

/// Finds zeros of `a(λ)` from `hints`, or from the seeds of `region` when
/// there are no hints.
pub fn find_eigenvalues(
    env: &ComplexEnvelope,
    hints: &[Complex64],
    region: Option<&SearchRegion>,
    cfg: &NftConfig,
) -> Result<EigenSearch, NftError> {
    let passes = if hints.is_empty() { cfg.deflation_passes } else { 0 };
    let seeds = if !hints.is_empty() {
        hints.to_vec()
    } else if let Some(r) = region {
        r.seeds()
    } else {
        return Err(NftError::NoSeeds);
    };

    let sweep = |known: &[Complex64]| -> Vec<SeedOutcome> {
        if seeds.len() > 4 {
            seeds
                .par_iter()
                .map(|&s| newton_root_deflated(env, s, known, cfg))
                .collect()
        } else {
            seeds
                .iter()
                .map(|&s| newton_root_deflated(env, s, known, cfg))
                .collect()
        }
    };

    let mut found: Vec<(Complex64, f64)> = Vec::new();
    let mut failures = Vec::new();
    let mut outcomes = sweep(&[]);
    // Neighbouring eigenvalues can share one basin of attraction; further
    // sweeps deflate the roots found so far until nothing new turns up.
    for pass in 0..=passes {
        let before = found.len();
        for o in outcomes {
            match o {
                SeedOutcome::Converged { root, residual, .. } => {
                    if root.im <= cfg.im_floor {
                        continue;
                    }
                    match found.iter_mut().find(|(r, _)| (*r - root).norm() < cfg.dedup_radius) {
                        Some(existing) => {
                            if residual < existing.1 {
                                *existing = (root, residual);
                            }
                        }
                        None => found.push((root, residual)),
                    }
                }
                // Deflated sweeps fail often by design; only the plain
                // sweep's failures are reported.
                SeedOutcome::Failed { seed, reason } if pass == 0 => failures.push((seed, reason)),
                SeedOutcome::Failed { .. } => {}
            }
        }
        if pass == passes || found.is_empty() || (pass > 0 && found.len() == before) {
            break;
        }
        let known: Vec<Complex64> = found.iter().map(|(r, _)| *r).collect();
        outcomes = sweep(&known);
    }
    found.sort_by(|x, y| y.0.im.total_cmp(&x.0.im).then(x.0.re.total_cmp(&y.0.re)));
    Ok(EigenSearch {
        roots: found.into_iter().map(|(r, _)| r).collect(),
        failures,
    })
}

/// Spectral amplitudes `b/a'` at the given eigenvalues.
pub fn discrete_spectrum(
    env: &ComplexEnvelope,
    eigenvalues: &[Complex64],
    cfg: &NftConfig,
) -> Result<DiscreteSpectrum, NftError> {
    let mut entries = Vec::with_capacity(eigenvalues.len());
    for &lambda in eigenvalues {
        if !(lambda.im > 0.0) {
            return Err(NftError::NotUpperHalfPlane(lambda));
        }
        let s = scattering_with(env, lambda, cfg.discretization)?;
        let ap = s.a_prime.norm();
        if ap < cfg.degenerate_tol {
            return Err(NftError::DegenerateEigenvalue {
                lambda,
                a_prime_abs: ap,
            });
        }
        entries.push(SpectralEntry {
            lambda,
            qd: bidirectional_b(env, lambda, cfg.discretization)? / s.a_prime,
        });
    }
    DiscreteSpectrum::new(entries, 0.0)
}
