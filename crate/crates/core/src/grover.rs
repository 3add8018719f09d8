//! Amplitude amplification of `|s>` toward the `omega = 0` subspace, and
//! estimators that read the transform value from the `gamma` statistics of
//! the amplified state.
//!
//! Every Grover iteration acts inside `span{P0(omega)|s>, P1(omega)|s>}`, so
//! the `gamma` ratio conditioned on `omega = 0` stays `|z1/z0|^2` at every
//! iteration count; amplification only raises the chance of landing in
//! `omega = 0`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{build_s_state, SCircuitSpec};
use crate::error::{Error, Result};
use crate::qsim::{Predicate, StateVector};
use crate::subset::BitString;

/// Two-sided normal quantile used for the reported half-width (about 95%).
pub const CONFIDENCE_Z: f64 = 1.96;

const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroverPlan {
    /// `a = |P0(omega)|s>|`.
    pub overlap_a: f64,
    pub iterations: usize,
    /// `sin^2((2k + 1) asin a)`.
    pub predicted_success: f64,
}

impl GroverPlan {
    /// Smallest `k <= ceil(pi / (4a))` maximizing `sin^2((2k + 1) asin a)`.
    pub fn from_overlap(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::TargetUnreachable);
        }
        let a = a.min(1.0);
        let k_max = (std::f64::consts::PI / (4.0 * a)).ceil() as usize;
        let mut best = (0, success_after(a, 0));
        for k in 1..=k_max {
            let p = success_after(a, k);
            if p > best.1 + TIE_TOL {
                best = (k, p);
            }
        }
        Ok(Self { overlap_a: a, iterations: best.0, predicted_success: best.1 })
    }
}

/// `sin^2((2k + 1) asin a)`.
pub fn success_after(a: f64, k: usize) -> f64 {
    ((2 * k + 1) as f64 * a.min(1.0).asin()).sin().powi(2)
}

fn omega_zero(s: &StateVector) -> Predicate {
    Predicate::bit(s.layout().omega(), false)
}

pub fn plan_grover(s: &StateVector) -> Result<GroverPlan> {
    GroverPlan::from_overlap(s.project(&omega_zero(s)).norm)
}

/// One iteration of a Grover-like driver toward `omega = 0`.
pub trait GroverLike {
    fn step(&self, state: &mut StateVector, s: &StateVector) -> Result<()>;
}

/// Grover's original iteration: negate the `omega = 1` amplitudes, then reflect about `|s>`.
#[derive(Clone, Copy, Debug, Default)]
pub struct OriginalGrover;

impl GroverLike for OriginalGrover {
    fn step(&self, state: &mut StateVector, s: &StateVector) -> Result<()> {
        if state.layout() != s.layout() {
            return Err(Error::LayoutMismatch);
        }
        let omega = 1usize << s.layout().omega();
        for (i, a) in state.amplitudes_mut().iter_mut().enumerate() {
            if i & omega != 0 {
                *a = -*a;
            }
        }
        // 2|s><s| - 1
        let overlap = s.inner(state)?;
        state.scale(Complex64::new(-1.0, 0.0));
        state.add_scaled(2.0 * overlap, s)?;
        Ok(())
    }
}

pub fn grover_step(state: &StateVector, s: &StateVector) -> Result<StateVector> {
    let mut out = state.clone();
    OriginalGrover.step(&mut out, s)?;
    Ok(out)
}

pub fn amplify(s: &StateVector, plan: &GroverPlan) -> Result<StateVector> {
    amplify_with(&OriginalGrover, s, plan.iterations)
}

pub fn amplify_with(driver: &impl GroverLike, s: &StateVector, iterations: usize) -> Result<StateVector> {
    let mut state = s.clone();
    for _ in 0..iterations {
        driver.step(&mut state, s)?;
    }
    Ok(state)
}

/// Joint Born probabilities of `(omega, gamma)`, indexed `[omega][gamma]`.
pub fn omega_gamma_distribution(state: &StateVector) -> [[f64; 2]; 2] {
    let layout = state.layout();
    let (omega, gamma) = (layout.omega(), layout.gamma());
    let mut p = [[0.0; 2]; 2];
    for (i, a) in state.amplitudes().iter().enumerate() {
        p[(i >> omega) & 1][(i >> gamma) & 1] += a.norm_sqr();
    }
    p
}

/// `P(gamma = 1 | omega = 0) / P(gamma = 0 | omega = 0)`, or `None` if the denominator vanishes.
pub fn conditional_gamma_ratio(state: &StateVector) -> Option<f64> {
    let p = omega_gamma_distribution(state);
    (p[0][0] > 0.0).then(|| p[0][1] / p[0][0])
}

/// Builds `|s>`, amplifies it on the planned schedule and returns it with the plan.
pub fn amplified_state(spec: &SCircuitSpec) -> Result<(StateVector, GroverPlan)> {
    let s = build_s_state(spec)?;
    let plan = plan_grover(&s)?;
    Ok((amplify(&s, &plan)?, plan))
}

/// `f(x)` or `P(x^{n0})` from the exact amplitudes of the amplified state.
pub fn estimate_exact(spec: &SCircuitSpec) -> Result<f64> {
    let (state, _) = amplified_state(spec)?;
    // z0 never vanishes, so neither does P(omega = 0, gamma = 0)
    conditional_gamma_ratio(&state)
        .ok_or_else(|| Error::Claim("P(omega = 0, gamma = 0) vanished after amplification".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub x: BitString,
    pub exact: f64,
    pub sampled: f64,
    pub half_width: f64,
    pub shots: u64,
    pub seed: u64,
    /// Outcome counts `[n(omega=0, gamma=0), n(omega=0, gamma=1), n(omega=1)]`.
    pub counts: [u64; 3],
}

/// Draws `shots` `(omega, gamma)` outcomes from the amplified state and
/// estimates the value as `#(omega=0, gamma=1) / #(omega=0, gamma=0)`.
///
/// Sampling uses `ChaCha8Rng::seed_from_u64(seed)`, so reports are
/// reproducible across platforms. The half-width is the delta-method
/// interval `z R sqrt(1/n1 + 1/n0)`; with `n1 = 0` it falls back to `3 / n0`.
pub fn estimate_sampled(spec: &SCircuitSpec, shots: u64, seed: u64) -> Result<EstimateReport> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let (state, _) = amplified_state(spec)?;
    let exact = conditional_gamma_ratio(&state)
        .ok_or_else(|| Error::Claim("P(omega = 0, gamma = 0) vanished after amplification".into()))?;
    let p = omega_gamma_distribution(&state);
    let counts = sample_counts(p, shots, seed);
    let (n0, n1) = (counts[0], counts[1]);
    if n0 == 0 {
        return Err(Error::InsufficientShots { shots });
    }
    let sampled = n1 as f64 / n0 as f64;
    let half_width = if n1 == 0 {
        3.0 / n0 as f64
    } else {
        CONFIDENCE_Z * sampled * (1.0 / n1 as f64 + 1.0 / n0 as f64).sqrt()
    };
    Ok(EstimateReport { x: spec.x(), exact, sampled, half_width, shots, seed, counts })
}

fn sample_counts(p: [[f64; 2]; 2], shots: u64, seed: u64) -> [u64; 3] {
    let total = p[0][0] + p[0][1] + p[1][0] + p[1][1];
    let c0 = p[0][0] / total;
    let c1 = c0 + p[0][1] / total;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0u64; 3];
    for _ in 0..shots {
        let u: f64 = rng.random();
        let k = if u < c0 {
            0
        } else if u < c1 {
            1
        } else {
            2
        };
        counts[k] += 1;
    }
    counts
}
