//! Dense statevector simulator with named registers and predicate-controlled gates.
//!
//! Qubit `q` of the global register is bit `q` of the amplitude index.
//! Registers are laid out from the lowest index upward as
//! `alpha_minus (n) | alpha (n0) | beta (n0) | gamma | mu0 | omega`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::SubsetTable;

/// Hard cap on simulated qubits (2^26 amplitudes is 1 GiB).
pub const MAX_QUBITS: usize = 26;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Mask marking an unsatisfiable conjunction.
const NEVER: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Subset-lattice (zeta) transform: `alpha`, `beta` have as many qubits as `alpha_minus`.
    Mobius,
    /// Marginal of the low `n0` bits of a joint distribution.
    Marginal,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mobius => "mobius",
            Mode::Marginal => "marginal",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mobius" => Ok(Mode::Mobius),
            "marginal" => Ok(Mode::Marginal),
            other => Err(Error::Spec(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Register {
    AlphaMinus,
    Alpha,
    Beta,
    Gamma,
    Mu0,
    Omega,
}

impl Register {
    pub const ALL: [Register; 6] = [
        Register::AlphaMinus,
        Register::Alpha,
        Register::Beta,
        Register::Gamma,
        Register::Mu0,
        Register::Omega,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Register::AlphaMinus => "alpha_minus",
            Register::Alpha => "alpha",
            Register::Beta => "beta",
            Register::Gamma => "gamma",
            Register::Mu0 => "mu0",
            Register::Omega => "omega",
        }
    }
}

impl FromStr for Register {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Register::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::UnknownRegister(s.to_string()))
    }
}

/// Register map for `n + 2 n0 + 3` qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RegisterLayout {
    mode: Mode,
    n: usize,
    n0: usize,
}

impl RegisterLayout {
    pub fn new(mode: Mode, n: usize, n0: usize) -> Result<Self> {
        match mode {
            Mode::Mobius if n == 0 || n0 != n => {
                return Err(Error::Layout(format!("mobius layout needs n0 == n >= 1, got n={n}, n0={n0}")));
            }
            Mode::Marginal if n0 == 0 || n0 >= n => {
                return Err(Error::Layout(format!("marginal layout needs 0 < n0 < n, got n={n}, n0={n0}")));
            }
            _ => {}
        }
        let total = n + 2 * n0 + 3;
        if total > MAX_QUBITS {
            return Err(Error::TooManyQubits { total, cap: MAX_QUBITS });
        }
        Ok(Self { mode, n, n0 })
    }

    pub fn mobius(n: usize) -> Result<Self> {
        Self::new(Mode::Mobius, n, n)
    }

    pub fn marginal(n: usize, n0: usize) -> Result<Self> {
        Self::new(Mode::Marginal, n, n0)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn total_qubits(&self) -> usize {
        self.n + 2 * self.n0 + 3
    }

    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }

    pub fn range(&self, reg: Register) -> Range<usize> {
        let (n, n0) = (self.n, self.n0);
        match reg {
            Register::AlphaMinus => 0..n,
            Register::Alpha => n..n + n0,
            Register::Beta => n + n0..n + 2 * n0,
            Register::Gamma => n + 2 * n0..n + 2 * n0 + 1,
            Register::Mu0 => n + 2 * n0 + 1..n + 2 * n0 + 2,
            Register::Omega => n + 2 * n0 + 2..n + 2 * n0 + 3,
        }
    }

    pub fn width(&self, reg: Register) -> usize {
        self.range(reg).len()
    }

    /// Global index of qubit `j` of `reg`.
    pub fn qubit(&self, reg: Register, j: usize) -> usize {
        let r = self.range(reg);
        assert!(j < r.len(), "{}[{j}] out of range", reg.name());
        r.start + j
    }

    /// Single-qubit registers.
    pub fn gamma(&self) -> usize {
        self.qubit(Register::Gamma, 0)
    }

    pub fn mu0(&self) -> usize {
        self.qubit(Register::Mu0, 0)
    }

    pub fn omega(&self) -> usize {
        self.qubit(Register::Omega, 0)
    }

    /// `mu = (alpha_minus, alpha, mu0)`.
    pub fn mu_qubits(&self) -> Vec<usize> {
        let mut q: Vec<usize> = self.range(Register::AlphaMinus).chain(self.range(Register::Alpha)).collect();
        q.push(self.mu0());
        q
    }

    /// `nu = (beta, gamma)`.
    pub fn nu_qubits(&self) -> Vec<usize> {
        self.range(Register::Beta).chain(self.range(Register::Gamma)).collect()
    }

    /// Value of `reg` in the basis state `index`.
    pub fn extract(&self, reg: Register, index: usize) -> usize {
        let r = self.range(reg);
        (index >> r.start) & ((1 << r.len()) - 1)
    }

    /// Basis index with the listed register values and zeros elsewhere.
    pub fn basis_index(&self, assignments: &[(Register, usize)]) -> usize {
        assignments.iter().fold(0, |acc, &(reg, v)| {
            let r = self.range(reg);
            assert!(v >> r.len() == 0, "value {v} does not fit {}", reg.name());
            acc | (v << r.start)
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    mode: Mode,
    n: usize,
    n0: usize,
    total_qubits: usize,
    registers: Vec<RegisterRepr>,
}

#[derive(Serialize, Deserialize)]
struct RegisterRepr {
    name: String,
    start: usize,
    len: usize,
}

impl Serialize for RegisterLayout {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LayoutRepr {
            mode: self.mode,
            n: self.n,
            n0: self.n0,
            total_qubits: self.total_qubits(),
            registers: Register::ALL
                .iter()
                .map(|&r| RegisterRepr { name: r.name().to_string(), start: self.range(r).start, len: self.width(r) })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RegisterLayout {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = LayoutRepr::deserialize(deserializer)?;
        RegisterLayout::new(repr.mode, repr.n, repr.n0).map_err(serde::de::Error::custom)
    }
}

/// A condition on computational-basis values of some qubits.
#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    True,
    Bit { qubit: usize, value: bool },
    Equal(usize, usize),
    NotEqual(usize, usize),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn bit(qubit: usize, value: bool) -> Self {
        Predicate::Bit { qubit, value }
    }

    /// The listed qubits (least significant first) spell `value`.
    pub fn equals(qubits: impl IntoIterator<Item = usize>, value: usize) -> Self {
        Predicate::And(
            qubits
                .into_iter()
                .enumerate()
                .map(|(j, q)| Predicate::bit(q, (value >> j) & 1 == 1))
                .collect(),
        )
    }

    pub fn register_equals(layout: &RegisterLayout, reg: Register, value: usize) -> Self {
        Self::equals(layout.range(reg), value)
    }

    pub fn and(self, other: Predicate) -> Self {
        Predicate::And(vec![self, other])
    }

    pub fn eval(&self, index: usize) -> bool {
        match self {
            Predicate::True => true,
            Predicate::Bit { qubit, value } => ((index >> qubit) & 1 == 1) == *value,
            Predicate::Equal(a, b) => (index >> a) & 1 == (index >> b) & 1,
            Predicate::NotEqual(a, b) => (index >> a) & 1 != (index >> b) & 1,
            Predicate::And(ps) => ps.iter().all(|p| p.eval(index)),
            Predicate::Or(ps) => ps.iter().any(|p| p.eval(index)),
            Predicate::Not(p) => !p.eval(index),
        }
    }

    /// Every qubit the predicate reads.
    pub fn qubits(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_qubits(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_qubits(&self, out: &mut Vec<usize>) {
        match self {
            Predicate::True => {}
            Predicate::Bit { qubit, .. } => out.push(*qubit),
            Predicate::Equal(a, b) | Predicate::NotEqual(a, b) => out.extend([*a, *b]),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|p| p.collect_qubits(out)),
            Predicate::Not(p) => p.collect_qubits(out),
        }
    }

    /// `(mask, value)` when the predicate is a plain conjunction of bit tests.
    fn as_mask(&self) -> Option<(usize, usize)> {
        match self {
            Predicate::True => Some((0, 0)),
            Predicate::Bit { qubit, value } => Some((1 << qubit, usize::from(*value) << qubit)),
            Predicate::And(ps) => {
                let (mut m, mut v) = (0, 0);
                for p in ps {
                    let (pm, pv) = p.as_mask()?;
                    if pm == NEVER || m & pm & (v ^ pv) != 0 {
                        return Some((NEVER, 0));
                    }
                    m |= pm;
                    v |= pv;
                }
                Some((m, v))
            }
            _ => None,
        }
    }
}

pub type Matrix2 = [[Complex64; 2]; 2];

/// A gate of a [`Circuit`].
#[derive(Clone, Debug, PartialEq)]
pub enum GateOp {
    Hadamard(usize),
    PauliX(usize),
    /// `exp(-i angle Y / 2)`; maps `|0>` to `cos(angle/2)|0> + sin(angle/2)|1>`.
    Ry { qubit: usize, angle: f64 },
    /// Arbitrary single-qubit unitary, row-major.
    Unitary { qubit: usize, matrix: Matrix2 },
    /// `U^pi = (1 - pi) + U pi`: the inner ops act only where `predicate` holds.
    Controlled { predicate: Predicate, ops: Vec<GateOp> },
}

impl GateOp {
    pub fn controlled(predicate: Predicate, op: GateOp) -> Self {
        GateOp::Controlled { predicate, ops: vec![op] }
    }

    /// Qubits the op (or its inner ops) act on as targets.
    pub fn targets(&self) -> Vec<usize> {
        match self {
            GateOp::Hadamard(q) | GateOp::PauliX(q) | GateOp::Ry { qubit: q, .. } | GateOp::Unitary { qubit: q, .. } => {
                vec![*q]
            }
            GateOp::Controlled { ops, .. } => ops.iter().flat_map(GateOp::targets).collect(),
        }
    }

    fn check(&self, total: usize) -> Result<()> {
        let in_range = |q: usize| if q < total { Ok(()) } else { Err(Error::QubitOutOfRange { qubit: q, total }) };
        match self {
            GateOp::Controlled { predicate, ops } => {
                let controls = predicate.qubits();
                for &q in &controls {
                    in_range(q)?;
                }
                for op in ops {
                    op.check(total)?;
                    if let Some(&q) = op.targets().iter().find(|q| controls.contains(q)) {
                        return Err(Error::TargetInPredicate(q));
                    }
                }
                Ok(())
            }
            _ => in_range(self.targets()[0]),
        }
    }

    fn matrix(&self) -> Option<Matrix2> {
        let r = |x: f64| Complex64::new(x, 0.0);
        match *self {
            GateOp::Hadamard(_) => Some([[r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2)], [r(FRAC_1_SQRT_2), r(-FRAC_1_SQRT_2)]]),
            GateOp::PauliX(_) => Some([[ZERO, ONE], [ONE, ZERO]]),
            GateOp::Ry { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                Some([[r(c), r(-s)], [r(s), r(c)]])
            }
            GateOp::Unitary { matrix, .. } => Some(matrix),
            GateOp::Controlled { .. } => None,
        }
    }
}

/// Ordered gate list bound to a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    layout: RegisterLayout,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(layout: RegisterLayout) -> Self {
        Self { layout, ops: Vec::new() }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        op.check(self.layout.total_qubits())?;
        self.ops.push(op);
        Ok(())
    }

    pub fn extend(&mut self, ops: impl IntoIterator<Item = GateOp>) -> Result<()> {
        ops.into_iter().try_for_each(|op| self.push(op))
    }

    pub fn append(&mut self, other: Circuit) -> Result<()> {
        if other.layout != self.layout {
            return Err(Error::LayoutMismatch);
        }
        self.ops.extend(other.ops);
        Ok(())
    }
}

/// Amplitudes over the full register layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    layout: RegisterLayout,
    amplitudes: Vec<Complex64>,
}

/// Unnormalized component kept by [`StateVector::project`].
#[derive(Clone, Debug)]
pub struct Projection {
    pub component: StateVector,
    pub norm: f64,
}

impl StateVector {
    /// `|0...0>`.
    pub fn new(layout: RegisterLayout) -> Self {
        let mut amplitudes = vec![ZERO; layout.dim()];
        amplitudes[0] = ONE;
        Self { layout, amplitudes }
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Result<Self> {
        if index >= layout.dim() {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        let mut s = Self { layout, amplitudes: vec![ZERO; layout.dim()] };
        s.amplitudes[index] = ONE;
        Ok(s)
    }

    pub fn from_amplitudes(layout: RegisterLayout, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                layout.dim(),
                amplitudes.len()
            )));
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: Complex64, other: &StateVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        self.amplitudes.iter_mut().zip(&other.amplitudes).for_each(|(a, b)| *a += factor * b);
        Ok(())
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let ns = self.norm_sqr();
        if (ns - 1.0).abs() > tol {
            return Err(Error::NotNormalized(ns));
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, op: &GateOp) -> Result<()> {
        op.check(self.layout.total_qubits())?;
        apply_op(&mut self.amplitudes, op, &mut Vec::new());
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.layout != self.layout {
            return Err(Error::LayoutMismatch);
        }
        for op in &circuit.ops {
            apply_op(&mut self.amplitudes, op, &mut Vec::new());
        }
        Ok(())
    }

    /// Keeps the amplitudes where `predicate` holds and returns that component with its norm.
    pub fn project(&self, predicate: &Predicate) -> Projection {
        let amplitudes: Vec<Complex64> = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, &a)| if predicate.eval(i) { a } else { ZERO })
            .collect();
        let component = StateVector { layout: self.layout, amplitudes };
        let norm = component.norm();
        Projection { component, norm }
    }

    /// Born probabilities of the values of `reg`.
    pub fn register_distribution(&self, reg: Register) -> SubsetTable<f64> {
        let width = self.layout.width(reg);
        let mut probs = vec![0.0; 1 << width];
        for (i, a) in self.amplitudes.iter().enumerate() {
            probs[self.layout.extract(reg, i)] += a.norm_sqr();
        }
        SubsetTable::new(width, probs).expect("register width is at least one qubit")
    }

    /// Renders the state in the `{"layout": ..., "amplitudes": [[re, im], ...]}` dump format.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let st: StateVector = serde_json::from_str(s)?;
        if st.amplitudes.len() != st.layout.dim() {
            return Err(Error::InvalidArgument("amplitude count does not match layout".into()));
        }
        Ok(st)
    }
}

fn apply_op<'a>(amps: &mut [Complex64], op: &'a GateOp, controls: &mut Vec<&'a Predicate>) {
    match op {
        GateOp::Controlled { predicate, ops } => {
            controls.push(predicate);
            for inner in ops {
                apply_op(amps, inner, controls);
            }
            controls.pop();
        }
        _ => {
            let q = op.targets()[0];
            let m = op.matrix().expect("single-qubit op");
            apply_single(amps, q, &m, controls);
        }
    }
}

fn apply_single(amps: &mut [Complex64], q: usize, m: &Matrix2, controls: &[&Predicate]) {
    let bit = 1usize << q;
    let masks: Option<Vec<(usize, usize)>> = controls.iter().map(|p| p.as_mask()).collect();
    let (mask, value) = match masks {
        Some(ms) => {
            let mut mask = 0;
            let mut value = 0;
            for (pm, pv) in ms {
                if pm == NEVER || mask & pm & (value ^ pv) != 0 {
                    return;
                }
                mask |= pm;
                value |= pv;
            }
            (mask, value)
        }
        None => (0, 0),
    };
    let general = controls.iter().any(|p| p.as_mask().is_none());
    for i in 0..amps.len() {
        if i & bit != 0 || i & mask != value {
            continue;
        }
        if general && !controls.iter().all(|p| p.eval(i)) {
            continue;
        }
        let j = i | bit;
        let (a0, a1) = (amps[i], amps[j]);
        amps[i] = m[0][0] * a0 + m[0][1] * a1;
        amps[j] = m[1][0] * a0 + m[1][1] * a1;
    }
}

/// Compiles a circuit that maps `|0...0>` on `reg` to `target` (other qubits untouched).
///
/// Magnitudes are loaded top-down with `Ry` rotations controlled on the
/// higher register bits; the lowest level carries the relative phases. The
/// result reproduces `target` exactly, so the global phase is always zero.
/// Gate count is at most `2^k - 1` for a `k`-qubit register.
pub fn compile_state_prep(layout: &RegisterLayout, reg: Register, target: &[Complex64]) -> Result<Circuit> {
    let qubits = layout.range(reg);
    let k = qubits.len();
    if target.len() != 1 << k {
        return Err(Error::InvalidArgument(format!(
            "register {} has {k} qubits but target has {} amplitudes",
            reg.name(),
            target.len()
        )));
    }
    let ns: f64 = target.iter().map(|a| a.norm_sqr()).sum();
    if (ns - 1.0).abs() > 1e-9 || !ns.is_finite() {
        return Err(Error::NotNormalized(ns));
    }

    let mut circuit = Circuit::new(*layout);
    let q = |j: usize| qubits.start + j;

    // prefix sums of |a|^2 so any aligned block weight is O(1)
    let mut cumulative = Vec::with_capacity(target.len() + 1);
    cumulative.push(0.0);
    for a in target {
        cumulative.push(cumulative.last().unwrap() + a.norm_sqr());
    }
    let weight = |start: usize, len: usize| (cumulative[start + len] - cumulative[start]).max(0.0);

    for level in (1..k).rev() {
        let block = 1usize << (level + 1);
        let gates: Vec<(usize, GateOp)> = (0..target.len() / block)
            .filter_map(|prefix| {
                let start = prefix * block;
                let (w0, w1) = (weight(start, block / 2), weight(start + block / 2, block / 2));
                (w0 + w1 > 0.0).then(|| {
                    (prefix, GateOp::Ry { qubit: q(level), angle: 2.0 * w1.sqrt().atan2(w0.sqrt()) })
                })
            })
            .collect();
        emit_level(&mut circuit, &gates, (level + 1..k).map(q))?;
    }

    let gates: Vec<(usize, GateOp)> = (0..target.len() / 2)
        .filter_map(|prefix| {
            let (a, b) = (target[2 * prefix], target[2 * prefix + 1]);
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if r == 0.0 {
                return None;
            }
            let op = if a.im == 0.0 && b.im == 0.0 {
                GateOp::Ry { qubit: q(0), angle: 2.0 * b.re.atan2(a.re) }
            } else {
                let (a, b) = (a / r, b / r);
                GateOp::Unitary { qubit: q(0), matrix: [[a, -b.conj()], [b, a.conj()]] }
            };
            Some((prefix, op))
        })
        .collect();
    emit_level(&mut circuit, &gates, (1..k).map(q))?;
    Ok(circuit)
}

fn is_identity(op: &GateOp) -> bool {
    match op {
        GateOp::Ry { angle, .. } => *angle == 0.0,
        _ => false,
    }
}

/// Emits one rotation per live prefix, or a single uncontrolled gate when they all agree.
fn emit_level(
    circuit: &mut Circuit,
    gates: &[(usize, GateOp)],
    control_qubits: impl Iterator<Item = usize> + Clone,
) -> Result<()> {
    let Some((_, first)) = gates.first() else {
        return Ok(());
    };
    if gates.iter().all(|(_, g)| g == first) {
        if !is_identity(first) {
            circuit.push(first.clone())?;
        }
        return Ok(());
    }
    for (prefix, op) in gates {
        if !is_identity(op) {
            circuit.push(GateOp::controlled(Predicate::equals(control_qubits.clone(), *prefix), op.clone()))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(layout: RegisterLayout, rng: &mut ChaCha8Rng) -> StateVector {
        let mut amps: Vec<Complex64> =
            (0..layout.dim()).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(layout, amps).unwrap()
    }

    fn random_gate(layout: &RegisterLayout, rng: &mut ChaCha8Rng) -> GateOp {
        let total = layout.total_qubits();
        let q = rng.random_range(0..total);
        match rng.random_range(0..5) {
            0 => GateOp::Hadamard(q),
            1 => GateOp::PauliX(q),
            2 => GateOp::Ry { qubit: q, angle: rng.random_range(-3.0..3.0) },
            3 => {
                let (s, co) = rng.random_range(0.0f64..6.0).sin_cos();
                let ph = Complex64::from_polar(1.0, rng.random_range(0.0..6.0));
                GateOp::Unitary { qubit: q, matrix: [[c(co, 0.0), -c(s, 0.0) * ph.conj()], [c(s, 0.0) * ph, c(co, 0.0) * ph.conj() * ph]] }
            }
            _ => {
                let a = (q + 1 + rng.random_range(0..total - 1)) % total;
                let b = (q + 1 + rng.random_range(0..total - 1)) % total;
                let predicate = if a == b {
                    Predicate::bit(a, rng.random())
                } else {
                    Predicate::Or(vec![Predicate::NotEqual(a, b), Predicate::bit(a, true)])
                };
                GateOp::controlled(predicate, GateOp::Ry { qubit: q, angle: rng.random_range(-3.0..3.0) })
            }
        }
    }

    #[test]
    fn layouts() {
        let m = RegisterLayout::mobius(3).unwrap();
        assert_eq!(m.total_qubits(), 12);
        assert_eq!(m.dim(), 1 << 12);
        assert_eq!(m.range(Register::Beta), 6..9);
        assert_eq!(m.omega(), 11);
        assert_eq!(m.mu_qubits(), vec![0, 1, 2, 3, 4, 5, 10]);
        assert_eq!(m.nu_qubits(), vec![6, 7, 8, 9]);
        let g = RegisterLayout::marginal(5, 3).unwrap();
        assert_eq!(g.dim(), 1 << 14);
        assert!(RegisterLayout::marginal(3, 3).is_err());
        assert!(RegisterLayout::new(Mode::Mobius, 3, 2).is_err());
        assert!(matches!(RegisterLayout::mobius(8), Err(Error::TooManyQubits { total: 27, .. })));
        assert_eq!("beta".parse::<Register>().unwrap(), Register::Beta);
    }

    #[test]
    fn new_state_is_all_zero_basis() {
        let s = StateVector::new(RegisterLayout::mobius(3).unwrap());
        assert_eq!(s.amplitudes().len(), 4096);
        assert_eq!(s.amplitude(0), ONE);
        assert!(s.amplitudes()[1..].iter().all(|a| *a == ZERO));
        assert_eq!(s.norm(), 1.0);
        assert_eq!(StateVector::new(RegisterLayout::marginal(5, 3).unwrap()).amplitudes().len(), 1 << 14);
    }

    #[test]
    fn hadamard_and_controlled_x() {
        let layout = RegisterLayout::mobius(1).unwrap();
        let mut s = StateVector::new(layout);
        s.apply_gate(&GateOp::Hadamard(0)).unwrap();
        assert!((s.amplitude(0).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amplitude(1).re - FRAC_1_SQRT_2).abs() < 1e-15);

        let am = layout.qubit(Register::AlphaMinus, 0);
        let a = layout.qubit(Register::Alpha, 0);
        let b = layout.qubit(Register::Beta, 0);
        let gate = GateOp::controlled(Predicate::bit(am, true).and(Predicate::bit(a, false)), GateOp::PauliX(b));

        let mut s = StateVector::basis(layout, 1 << am).unwrap();
        s.apply_gate(&gate).unwrap();
        assert_eq!(s.amplitude((1 << am) | (1 << b)), ONE);

        let mut s = StateVector::new(layout);
        s.apply_gate(&gate).unwrap();
        assert_eq!(s.amplitude(0), ONE);
    }

    #[test]
    fn gate_validation() {
        let layout = RegisterLayout::mobius(1).unwrap();
        let mut s = StateVector::new(layout);
        assert!(matches!(s.apply_gate(&GateOp::PauliX(6)), Err(Error::QubitOutOfRange { qubit: 6, total: 6 })));
        let bad = GateOp::controlled(Predicate::bit(2, true), GateOp::PauliX(2));
        assert!(matches!(s.apply_gate(&bad), Err(Error::TargetInPredicate(2))));
        let bad = GateOp::controlled(Predicate::bit(9, true), GateOp::PauliX(2));
        assert!(s.apply_gate(&bad).is_err());
    }

    #[test]
    fn circuit_identities() {
        let layout = RegisterLayout::mobius(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s0 = random_state(layout, &mut rng);

        let mut s = s0.clone();
        s.apply_circuit(&Circuit::new(layout)).unwrap();
        assert_eq!(s, s0);

        let mut xx = Circuit::new(layout);
        xx.extend([GateOp::PauliX(3), GateOp::PauliX(3)]).unwrap();
        s.apply_circuit(&xx).unwrap();
        assert_eq!(s, s0);

        let other = Circuit::new(RegisterLayout::mobius(1).unwrap());
        assert!(matches!(s.apply_circuit(&other), Err(Error::LayoutMismatch)));
    }

    #[test]
    fn norm_drift_over_many_gates() {
        let layout = RegisterLayout::mobius(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut circuit = Circuit::new(layout);
        for _ in 0..10_000 {
            circuit.push(random_gate(&layout, &mut rng)).unwrap();
        }
        let mut s = random_state(layout, &mut rng);
        s.apply_circuit(&circuit).unwrap();
        assert!((s.norm() - 1.0).abs() <= 1e-9, "drift {}", s.norm() - 1.0);
    }

    #[test]
    fn controlled_gate_is_projector_exponent() {
        // U^pi = (1 - pi) + U pi, evaluated independently via project
        let layout = RegisterLayout::mobius(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let s = random_state(layout, &mut rng);
            let pi = Predicate::Or(vec![Predicate::NotEqual(0, 2), Predicate::bit(5, true)]);
            let u = GateOp::Ry { qubit: 4, angle: rng.random_range(-3.0..3.0) };

            let mut direct = s.clone();
            direct.apply_gate(&GateOp::controlled(pi.clone(), u.clone())).unwrap();

            let inside = s.project(&pi).component;
            let outside = s.project(&Predicate::Not(Box::new(pi))).component;
            let mut rotated = inside;
            rotated.apply_gate(&u).unwrap();
            let mut expected = outside;
            expected.add_scaled(ONE, &rotated).unwrap();

            let diff = direct.amplitudes().iter().zip(expected.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(diff <= 1e-12);
            assert!((direct.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn gates_are_linear() {
        let layout = RegisterLayout::mobius(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let op = random_gate(&layout, &mut rng);
            let (s1, s2) = (random_state(layout, &mut rng), random_state(layout, &mut rng));
            let (a, b) = (c(0.3, -1.2), c(-0.7, 0.4));
            let mut combo = s1.clone();
            combo.scale(a);
            combo.add_scaled(b, &s2).unwrap();
            combo.apply_gate(&op).unwrap();
            let (mut t1, mut t2) = (s1, s2);
            t1.apply_gate(&op).unwrap();
            t2.apply_gate(&op).unwrap();
            t1.scale(a);
            t1.add_scaled(b, &t2).unwrap();
            let diff = combo.amplitudes().iter().zip(t1.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff <= 1e-12);
        }
    }

    #[test]
    fn projection_norms() {
        let layout = RegisterLayout::mobius(1).unwrap();
        let s = StateVector::new(layout);
        assert_eq!(s.project(&Predicate::bit(layout.omega(), false)).norm, 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(layout, &mut rng);
        let p = Predicate::equals([0, 3], 2);
        let a = s.project(&p).norm;
        let b = s.project(&Predicate::Not(Box::new(p))).norm;
        assert!((a * a + b * b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distributions() {
        let layout = RegisterLayout::mobius(2).unwrap();
        let s = StateVector::new(layout);
        for reg in Register::ALL {
            let d = s.register_distribution(reg);
            assert_eq!(d.values()[0], 1.0);
        }
        let mut s = StateVector::new(layout);
        s.apply_gate(&GateOp::Hadamard(layout.gamma())).unwrap();
        let d = s.register_distribution(Register::Gamma);
        assert!((d.values()[0] - 0.5).abs() < 1e-15 && (d.values()[1] - 0.5).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_state(layout, &mut rng);
        for reg in Register::ALL {
            assert!((s.register_distribution(reg).values().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    fn prep_error(layout: RegisterLayout, reg: Register, target: &[Complex64]) -> f64 {
        let circuit = compile_state_prep(&layout, reg, target).unwrap();
        let mut s = StateVector::new(layout);
        s.apply_circuit(&circuit).unwrap();
        let start = layout.range(reg).start;
        (0..s.amplitudes().len())
            .map(|i| {
                let expected = if i & !(((1 << target.len().trailing_zeros()) - 1) << start) == 0 {
                    target[i >> start]
                } else {
                    ZERO
                };
                (s.amplitude(i) - expected).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn state_prep_examples() {
        let layout = RegisterLayout::mobius(3).unwrap();
        let mut delta = vec![ZERO; 8];
        delta[0] = ONE;
        assert!(compile_state_prep(&layout, Register::AlphaMinus, &delta).unwrap().is_empty());

        let layout2 = RegisterLayout::mobius(2).unwrap();
        let uniform = vec![c(0.5, 0.0); 4];
        let circuit = compile_state_prep(&layout2, Register::AlphaMinus, &uniform).unwrap();
        assert_eq!(circuit.len(), 2);
        let mut via_h = StateVector::new(layout2);
        via_h.apply_gate(&GateOp::Hadamard(0)).unwrap();
        via_h.apply_gate(&GateOp::Hadamard(1)).unwrap();
        let mut via_prep = StateVector::new(layout2);
        via_prep.apply_circuit(&circuit).unwrap();
        for (a, b) in via_h.amplitudes().iter().zip(via_prep.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }

        assert!(matches!(
            compile_state_prep(&layout2, Register::AlphaMinus, &[ONE, ONE, ZERO, ZERO]),
            Err(Error::NotNormalized(_))
        ));
        assert!(compile_state_prep(&layout2, Register::AlphaMinus, &[ONE, ZERO]).is_err());
    }

    #[test]
    fn state_prep_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for k in 1..=6 {
            let layout = RegisterLayout::mobius(k).unwrap();
            for trial in 0..5 {
                let mut t: Vec<Complex64> = (0..1 << k)
                    .map(|_| if trial == 0 { c(rng.random_range(-1.0..1.0), 0.0) } else { c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) })
                    .collect();
                if trial == 1 {
                    // sparse target with empty subtrees
                    for (i, a) in t.iter_mut().enumerate() {
                        if i % 3 != 0 {
                            *a = ZERO;
                        }
                    }
                }
                let norm = t.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                t.iter_mut().for_each(|a| *a /= norm);
                assert!(compile_state_prep(&layout, Register::AlphaMinus, &t).unwrap().len() < 1 << k);
                for reg in [Register::AlphaMinus, Register::Alpha, Register::Beta] {
                    let err = prep_error(layout, reg, &t);
                    assert!(err <= 1e-10, "k={k} reg={reg:?} err={err}");
                }
            }
        }
    }

    #[test]
    fn state_dump_round_trip() {
        let layout = RegisterLayout::marginal(2, 1).unwrap();
        let mut s = StateVector::new(layout);
        s.apply_gate(&GateOp::Hadamard(1)).unwrap();
        let json = s.to_json().unwrap();
        assert!(json.starts_with(r#"{"layout":{"mode":"marginal","n":2,"n0":1"#));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["amplitudes"][0][0].as_f64().unwrap(), FRAC_1_SQRT_2);
        assert_eq!(StateVector::from_json(&json).unwrap(), s);
    }
}
