//! Minimum finding by bit-fixing binary search over subset-sum queries.
//!
//! The objective `E > 0` is turned into the peaked distribution
//! `D_minus(x) ∝ exp(beta * sum_y [E(y) - E(x)])`, i.e. a softmax of
//! `-beta 2^n E(x)`. Its zeta transform `D(p) = sum_{x <= p} D_minus(x)` is
//! queried at probes `p` that keep the already-decided high bits, put a 0 at
//! the current bit `j` and fill the bits below with 1s. If the peak agrees
//! with the decided bits, it lies below `p` exactly when its bit `j` is 0,
//! so `D(p)` is close to 1 or close to 0 and one query fixes one bit.

use std::fmt;

use thiserror::Error;

use crate::circuits::SCircuitSpec;
use crate::error::{Error, Result};
use crate::grover::{estimate_exact, estimate_sampled};
use crate::subset::{zeta_fast, BitString, SubsetTable};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Default separation, in nats, between the peak and every other point of `D_minus`.
pub const DEFAULT_MARGIN_NATS: f64 = 50.0;

/// A strictly positive, finite objective on `Bool^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveTable {
    table: SubsetTable<f64>,
}

impl ObjectiveTable {
    pub fn new(table: SubsetTable<f64>) -> Result<Self> {
        if let Some((i, v)) = table.values().iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("objective must be positive and finite; entry {i} is {v}")));
        }
        Ok(Self { table })
    }

    /// `E(x) = (dec(x) - center)^2 + 1`.
    pub fn quadratic(n: usize, center: f64) -> Result<Self> {
        Self::new(SubsetTable::from_fn(n, |x| (x.value() as f64 - center).powi(2) + 1.0)?)
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn table(&self) -> &SubsetTable<f64> {
        &self.table
    }

    /// The minimizer, if it is unique.
    pub fn unique_argmin(&self) -> Option<BitString> {
        let (best, _) = self.min_and_gap()?;
        BitString::new(self.n(), best).ok()
    }

    /// `second-lowest E - lowest E`, if the minimum is unique.
    pub fn gap(&self) -> Option<f64> {
        self.min_and_gap().map(|(_, gap)| gap)
    }

    fn min_and_gap(&self) -> Option<(usize, f64)> {
        let v = self.table.values();
        let best = (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b]))?;
        let second = v.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, e)| *e).fold(f64::INFINITY, f64::min);
        let gap = second - v[best];
        (gap > 0.0).then_some((best, gap))
    }
}

/// Smallest `beta` with `beta 2^n gap >= margin`, capped so every logit stays finite.
pub fn choose_beta(obj: &ObjectiveTable, margin_nats: f64) -> Result<f64> {
    let gap = obj
        .gap()
        .ok_or_else(|| Error::InvalidArgument("objective has tied minima; the peak is not unique".into()))?;
    let size = (1usize << obj.n()) as f64;
    let v = obj.table().values();
    let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    let beta = margin_nats / (size * gap);
    let cap = 1e300 / (size * spread);
    Ok(beta.min(cap))
}

/// `D_minus(x) = exp(beta (sum_y E(y) - 2^n E(x))) / Z`, evaluated in log space.
pub fn build_d_minus(obj: &ObjectiveTable, beta: f64) -> Result<SubsetTable<f64>> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive and finite, got {beta}")));
    }
    let size = (1usize << obj.n()) as f64;
    let e = obj.table().values();
    let e_min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    // shifting by the largest logit leaves the softmax unchanged
    let weights: Vec<f64> = e.iter().map(|&ex| (-beta * size * (ex - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    SubsetTable::new(obj.n(), weights.into_iter().map(|w| w / z).collect())
}

/// Decided high bits, bit `j` cleared, all lower bits set.
pub fn probe_point(n: usize, decided: usize, j: usize) -> Result<BitString> {
    if j >= n {
        return Err(Error::InvalidArgument(format!("bit {j} out of range for {n} bits")));
    }
    let low = (1usize << (j + 1)) - 1;
    if decided & low != 0 {
        return Err(Error::InvalidArgument(format!("decided bits {decided:b} overlap bit {j} or below")));
    }
    BitString::new(n, decided | (low >> 1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub point: BitString,
    pub d_value: f64,
    pub bit: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchTrace {
    pub probes: Vec<Probe>,
    pub result: BitString,
}

impl fmt::Display for SearchTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in self.probes.iter().enumerate() {
            writeln!(f, "X{k} = {} ({:>3})  D = {:.6e}  bit = {}", p.point, p.point.value(), p.d_value, u8::from(p.bit))?;
        }
        write!(f, "result = {} ({})", self.result, self.result.value())
    }
}

#[derive(Debug, Error)]
#[error("D evaluation failed after {} probes: {source}", partial.len())]
pub struct SearchError {
    pub partial: Vec<Probe>,
    #[source]
    pub source: Error,
}

/// Fixes bits from `n - 1` down to 0: `D(probe) < threshold` means the peak's bit is 1.
pub fn bit_fixing_search(
    n: usize,
    mut d_query: impl FnMut(&BitString) -> Result<f64>,
    threshold: f64,
) -> std::result::Result<SearchTrace, SearchError> {
    let mut probes = Vec::with_capacity(n);
    let mut decided = 0usize;
    for j in (0..n).rev() {
        let point = match probe_point(n, decided, j) {
            Ok(p) => p,
            Err(source) => return Err(SearchError { partial: probes, source }),
        };
        let d_value = match d_query(&point) {
            Ok(v) => v,
            Err(source) => return Err(SearchError { partial: probes, source }),
        };
        let bit = d_value < threshold;
        if bit {
            decided |= 1 << j;
        }
        probes.push(Probe { point, d_value, bit });
    }
    let result = BitString::new(n, decided).map_err(|source| SearchError { partial: probes.clone(), source })?;
    Ok(SearchTrace { probes, result })
}

/// A backend answering `D(p) = sum_{x <= p} D_minus(x)`.
pub trait DEvaluator {
    fn load(&mut self, d_minus: &SubsetTable<f64>) -> Result<()>;
    fn query(&mut self, probe: &BitString) -> Result<f64>;
}

/// Precomputes the whole zeta transform once.
#[derive(Clone, Debug, Default)]
pub struct ClassicalEvaluator {
    d: Option<SubsetTable<f64>>,
}

impl DEvaluator for ClassicalEvaluator {
    fn load(&mut self, d_minus: &SubsetTable<f64>) -> Result<()> {
        self.d = Some(zeta_fast(d_minus));
        Ok(())
    }

    fn query(&mut self, probe: &BitString) -> Result<f64> {
        self.d.as_ref().ok_or_else(|| Error::InvalidArgument("evaluator not loaded".into()))?.get(probe)
    }
}

/// Runs the amplified Möbius circuit with `psi_minus = sqrt(D_minus)` and reads the exact ratio.
#[derive(Clone, Debug, Default)]
pub struct QuantumExactEvaluator {
    spec: Option<SCircuitSpec>,
}

impl DEvaluator for QuantumExactEvaluator {
    fn load(&mut self, d_minus: &SubsetTable<f64>) -> Result<()> {
        let psi = SCircuitSpec::amplitudes_from_probabilities(d_minus)?;
        self.spec = Some(SCircuitSpec::mobius(psi, BitString::zeros(d_minus.n())?)?);
        Ok(())
    }

    fn query(&mut self, probe: &BitString) -> Result<f64> {
        let spec = self.spec.as_ref().ok_or_else(|| Error::InvalidArgument("evaluator not loaded".into()))?;
        estimate_exact(&spec.with_x(*probe)?)
    }
}

/// Like [`QuantumExactEvaluator`] but from `shots` measurements per probe;
/// probe `k` uses seed `seed + k`.
#[derive(Clone, Debug)]
pub struct QuantumSampledEvaluator {
    pub shots: u64,
    pub seed: u64,
    inner: QuantumExactEvaluator,
    calls: u64,
}

impl QuantumSampledEvaluator {
    pub fn new(shots: u64, seed: u64) -> Self {
        Self { shots, seed, inner: QuantumExactEvaluator::default(), calls: 0 }
    }
}

impl DEvaluator for QuantumSampledEvaluator {
    fn load(&mut self, d_minus: &SubsetTable<f64>) -> Result<()> {
        self.calls = 0;
        self.inner.load(d_minus)
    }

    fn query(&mut self, probe: &BitString) -> Result<f64> {
        let spec = self.inner.spec.as_ref().ok_or_else(|| Error::InvalidArgument("evaluator not loaded".into()))?;
        let report = estimate_sampled(&spec.with_x(*probe)?, self.shots, self.seed.wrapping_add(self.calls))?;
        self.calls += 1;
        Ok(report.sampled)
    }
}

/// Builds `D_minus` from `obj` and `beta`, then runs the bit-fixing search against `evaluator`.
pub fn find_min(
    obj: &ObjectiveTable,
    beta: f64,
    evaluator: &mut impl DEvaluator,
    threshold: f64,
) -> std::result::Result<SearchTrace, SearchError> {
    let wrap = |source| SearchError { partial: Vec::new(), source };
    let d_minus = build_d_minus(obj, beta).map_err(wrap)?;
    evaluator.load(&d_minus).map_err(wrap)?;
    bit_fixing_search(obj.n(), |p| evaluator.query(p), threshold)
}
