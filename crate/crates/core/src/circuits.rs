//! The `T` operator, target projector and starting state `|s>`, plus the exact
//! decomposition of `|s>` into its `omega = 0` payload and the rest.
//!
//! `|s>` is built by branching on `mu0`:
//!
//! ```text
//! prep(psi_minus) on alpha_minus; X(omega); H(mu0); CNOT(mu0 -> gamma);
//! [mu0 = 1] T(alpha_minus, alpha, beta);  [mu0 = 0] H on every alpha qubit;
//! X(omega) controlled on (alpha == x AND beta == 0)
//! ```
//!
//! so the `mu0 = 1` branch carries `T|psi_minus, 0, 0>|1>_gamma` and the
//! `mu0 = 0` branch carries `|psi_minus> H|0>|0>|0>_gamma`, each with weight
//! `1/sqrt(2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{compile_state_prep, Circuit, GateOp, Mode, Predicate, Register, RegisterLayout, StateVector};
use crate::subset::{zeta_fast, BitString, SubsetTable};

/// Tolerance for the structural checks in [`extract_claim`].
pub const CLAIM_TOL: f64 = 1e-9;

/// Below this `|z1|`, `psi1 = (z1 psi1) / z1` is dominated by rounding and is not formed.
pub const PSI1_FLOOR: f64 = 1e-12;

/// Deliberate corruption of `T`, used to check that verification catches a broken circuit.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TFault {
    #[default]
    None,
    /// Negates every control polarity of the `beta` flips.
    FlipControl,
}

/// Everything needed to build `|s>` for one evaluation point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SCircuitSpec {
    mode: Mode,
    n: usize,
    n0: usize,
    psi_minus: Vec<Complex64>,
    x: BitString,
}

#[derive(Deserialize)]
struct RawSpec {
    mode: Mode,
    n: usize,
    #[serde(default)]
    n0: Option<usize>,
    psi_minus: Vec<Complex64>,
    x: BitString,
}

impl<'de> Deserialize<'de> for SCircuitSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSpec::deserialize(deserializer)?;
        let n0 = raw.n0.unwrap_or(raw.n);
        SCircuitSpec::new(raw.mode, raw.n, n0, raw.psi_minus, raw.x).map_err(serde::de::Error::custom)
    }
}

impl SCircuitSpec {
    pub fn new(mode: Mode, n: usize, n0: usize, psi_minus: Vec<Complex64>, x: BitString) -> Result<Self> {
        RegisterLayout::new(mode, n, n0)?;
        if psi_minus.len() != 1 << n {
            return Err(Error::Spec(format!("psi_minus has {} amplitudes, expected {}", psi_minus.len(), 1 << n)));
        }
        let ns: f64 = psi_minus.iter().map(|a| a.norm_sqr()).sum();
        if (ns - 1.0).abs() > 1e-9 {
            return Err(Error::Spec(format!("psi_minus is not normalized (norm^2 = {ns})")));
        }
        if x.len() != n0 {
            return Err(Error::Spec(format!("evaluation point {x} has {} bits, expected {n0}", x.len())));
        }
        Ok(Self { mode, n, n0, psi_minus, x })
    }

    pub fn mobius(psi_minus: Vec<Complex64>, x: BitString) -> Result<Self> {
        let n = psi_minus.len().trailing_zeros() as usize;
        Self::new(Mode::Mobius, n, n, psi_minus, x)
    }

    pub fn marginal(psi_minus: Vec<Complex64>, n0: usize, x: BitString) -> Result<Self> {
        let n = psi_minus.len().trailing_zeros() as usize;
        Self::new(Mode::Marginal, n, n0, psi_minus, x)
    }

    /// Amplitudes `sqrt(p)` for a probability table `p`.
    pub fn amplitudes_from_probabilities(p: &SubsetTable<f64>) -> Result<Vec<Complex64>> {
        p.validate_probability()?;
        Ok(p.values().iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect())
    }

    /// Same state, different evaluation point.
    pub fn with_x(&self, x: BitString) -> Result<Self> {
        Self::new(self.mode, self.n, self.n0, self.psi_minus.clone(), x)
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

    pub fn psi_minus(&self) -> &[Complex64] {
        &self.psi_minus
    }

    pub fn x(&self) -> BitString {
        self.x
    }

    pub fn layout(&self) -> RegisterLayout {
        RegisterLayout::new(self.mode, self.n, self.n0).expect("validated at construction")
    }

    /// `|A(x)|^2`.
    pub fn probabilities(&self) -> SubsetTable<f64> {
        SubsetTable::from_amplitudes(&self.psi_minus).expect("length checked at construction")
    }

    /// Whether basis value `xm` of `alpha_minus` contributes at the evaluation point.
    pub fn contributes(&self, xm: usize) -> bool {
        let x = self.x.value();
        match self.mode {
            Mode::Mobius => xm & !x == 0,
            Mode::Marginal => xm & ((1 << self.n0) - 1) == x,
        }
    }

    /// Classical value at `x`: `f(x)` by the zeta transform, or the low-bit marginal `P(x)`.
    pub fn classical_value(&self) -> f64 {
        let p = self.probabilities();
        match self.mode {
            Mode::Mobius => zeta_fast(&p).values()[self.x.value()],
            Mode::Marginal => p.marginal_low(self.n0).expect("0 < n0 < n").values()[self.x.value()],
        }
    }

    /// `2^{-(n0+1)/2}`: the `|s>` amplitude scale of each `omega = 0` branch.
    pub fn branch_scale(&self) -> f64 {
        0.5f64.powf((self.n0 + 1) as f64 / 2.0)
    }
}

/// The `beta_j` flip predicate of `T`.
fn flip_predicate(mode: Mode, am: usize, a: usize, fault: TFault) -> Predicate {
    match (mode, fault) {
        (Mode::Mobius, TFault::None) => Predicate::bit(am, true).and(Predicate::bit(a, false)),
        (Mode::Mobius, TFault::FlipControl) => Predicate::bit(am, false).and(Predicate::bit(a, true)),
        (Mode::Marginal, TFault::None) => Predicate::NotEqual(am, a),
        (Mode::Marginal, TFault::FlipControl) => Predicate::Equal(am, a),
    }
}

fn t_ops(layout: &RegisterLayout, fault: TFault) -> Vec<GateOp> {
    (0..layout.n0())
        .flat_map(|j| {
            let am = layout.qubit(Register::AlphaMinus, j);
            let a = layout.qubit(Register::Alpha, j);
            let b = layout.qubit(Register::Beta, j);
            [
                GateOp::Hadamard(a),
                GateOp::controlled(flip_predicate(layout.mode(), am, a, fault), GateOp::PauliX(b)),
            ]
        })
        .collect()
}

/// `T(alpha_minus, alpha, beta)`: for ascending `j`, `H(alpha_j)` then the
/// controlled flip of `beta_j`. The flip fires on `alpha_minus_j = 1, alpha_j = 0`
/// (Möbius) or on `alpha_minus_j != alpha_j` (marginal).
#[allow(non_snake_case)]
pub fn build_T(spec: &SCircuitSpec) -> Circuit {
    build_t_with_fault(&spec.layout(), TFault::None)
}

#[doc(hidden)]
pub fn build_t_with_fault(layout: &RegisterLayout, fault: TFault) -> Circuit {
    let mut c = Circuit::new(*layout);
    c.extend(t_ops(layout, fault)).expect("T acts on layout qubits");
    c
}

/// `<x_minus, x| T_j |x_minus> H|0>`, read off a simulated single-factor `T`
/// with `beta_j` post-selected on 0.
pub fn computed_coefficient_c(xm_bit: bool, x_bit: bool, mode: Mode, fault: TFault) -> f64 {
    let layout = match mode {
        Mode::Mobius => RegisterLayout::mobius(1),
        Mode::Marginal => RegisterLayout::marginal(2, 1),
    }
    .expect("small layout");
    let start = layout.basis_index(&[(Register::AlphaMinus, usize::from(xm_bit))]);
    let mut s = StateVector::basis(layout, start).expect("basis index in range");
    s.apply_circuit(&build_t_with_fault(&layout, fault)).expect("same layout");
    let end = layout.basis_index(&[(Register::AlphaMinus, usize::from(xm_bit)), (Register::Alpha, usize::from(x_bit))]);
    let amp = s.amplitude(end);
    debug_assert!(amp.im.abs() < 1e-15);
    amp.re
}

/// `(1/sqrt 2) theta(x >= x_minus)` (Möbius) or `(1/sqrt 2) theta(x == x_minus)` (marginal).
pub fn coefficient_c_closed_form(xm_bit: bool, x_bit: bool, mode: Mode) -> f64 {
    let pass = match mode {
        Mode::Mobius => x_bit >= xm_bit,
        Mode::Marginal => x_bit == xm_bit,
    };
    if pass {
        std::f64::consts::FRAC_1_SQRT_2
    } else {
        0.0
    }
}

/// Simulated `C(x_minus_j, x_j)`, checked against the closed form.
pub fn coefficient_c(xm_bit: bool, x_bit: bool, mode: Mode) -> Result<f64> {
    let computed = computed_coefficient_c(xm_bit, x_bit, mode, TFault::None);
    let closed = coefficient_c_closed_form(xm_bit, x_bit, mode);
    if computed != closed {
        return Err(Error::Claim(format!(
            "C({}, {}) in {mode} mode: simulated {computed}, expected {closed}",
            u8::from(xm_bit),
            u8::from(x_bit)
        )));
    }
    Ok(computed)
}

/// `pi(alpha) pi(beta)`: `alpha` equals `x` and `beta` is all zeros.
pub fn target_predicate(spec: &SCircuitSpec) -> Predicate {
    let layout = spec.layout();
    Predicate::And(vec![
        Predicate::register_equals(&layout, Register::Alpha, spec.x.value()),
        Predicate::register_equals(&layout, Register::Beta, 0),
    ])
}

/// Circuit for everything before the final `omega` flip (independent of `x`).
pub fn build_s_prime_circuit(spec: &SCircuitSpec) -> Result<Circuit> {
    s_prime_circuit(spec, TFault::None)
}

fn s_prime_circuit(spec: &SCircuitSpec, fault: TFault) -> Result<Circuit> {
    let layout = spec.layout();
    let (mu0, gamma, omega) = (layout.mu0(), layout.gamma(), layout.omega());
    let mut c = compile_state_prep(&layout, Register::AlphaMinus, &spec.psi_minus)?;
    c.push(GateOp::PauliX(omega))?;
    c.push(GateOp::Hadamard(mu0))?;
    c.push(GateOp::controlled(Predicate::bit(mu0, true), GateOp::PauliX(gamma)))?;
    c.push(GateOp::Controlled { predicate: Predicate::bit(mu0, true), ops: t_ops(&layout, fault) })?;
    c.push(GateOp::Controlled {
        predicate: Predicate::bit(mu0, false),
        ops: layout.range(Register::Alpha).map(GateOp::Hadamard).collect(),
    })?;
    Ok(c)
}

/// `sigma_X(omega)^{pi(beta) pi(alpha)}`.
pub fn target_flip(spec: &SCircuitSpec) -> GateOp {
    GateOp::controlled(target_predicate(spec), GateOp::PauliX(spec.layout().omega()))
}

/// Full circuit producing `|s>` from `|0...0>`.
pub fn build_s_circuit(spec: &SCircuitSpec) -> Result<Circuit> {
    build_s_circuit_with_fault(spec, TFault::None)
}

#[doc(hidden)]
pub fn build_s_circuit_with_fault(spec: &SCircuitSpec, fault: TFault) -> Result<Circuit> {
    let mut c = s_prime_circuit(spec, fault)?;
    c.push(target_flip(spec))?;
    Ok(c)
}

pub fn build_s_state(spec: &SCircuitSpec) -> Result<StateVector> {
    let mut s = StateVector::new(spec.layout());
    s.apply_circuit(&build_s_circuit(spec)?)?;
    Ok(s)
}

/// `|s>` for another evaluation point, starting from the shared pre-flip state.
pub fn finish_s_state(s_prime: &StateVector, spec: &SCircuitSpec) -> Result<StateVector> {
    let mut s = s_prime.clone();
    s.apply_gate(&target_flip(spec))?;
    Ok(s)
}

/// A state over `mu = (alpha_minus, alpha, mu0)`, indexed by
/// `alpha_minus | alpha << n | mu0 << (n + n0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MuState {
    n: usize,
    n0: usize,
    amplitudes: Vec<Complex64>,
}

impl MuState {
    fn zeros(n: usize, n0: usize) -> Self {
        Self { n, n0, amplitudes: vec![Complex64::new(0.0, 0.0); 1 << (n + n0 + 1)] }
    }

    fn index(&self, xm: usize, x: usize, mu0: bool) -> usize {
        xm | (x << self.n) | (usize::from(mu0) << (self.n + self.n0))
    }

    pub fn amplitude(&self, xm: usize, x: usize, mu0: bool) -> Complex64 {
        self.amplitudes[self.index(xm, x, mu0)]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &MuState) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

/// `|s> = z1 |psi1>|1>_nu|0>_omega + z0 |psi0>|0>_nu|0>_omega + |chi>|1>_omega`.
#[derive(Clone, Debug)]
pub struct ClaimDecomposition {
    pub z1: Complex64,
    pub z0: Complex64,
    pub chi_norm: f64,
    /// `None` when `z1` is below [`PSI1_FLOOR`], i.e. zero up to rounding.
    pub psi1: Option<MuState>,
    pub psi0: MuState,
}

impl ClaimDecomposition {
    /// `|z1 / z0|^2`.
    pub fn ratio(&self) -> f64 {
        (self.z1 / self.z0).norm_sqr()
    }

    pub fn completeness(&self) -> f64 {
        self.z1.norm_sqr() + self.z0.norm_sqr() + self.chi_norm * self.chi_norm
    }
}

/// Reads `z1`, `z0`, `|chi|`, `psi1`, `psi0` off `s` and checks each against
/// its closed form (within [`CLAIM_TOL`]). A failed check means the circuit
/// that produced `s` is wrong.
pub fn extract_claim(spec: &SCircuitSpec, s: &StateVector) -> Result<ClaimDecomposition> {
    let layout = spec.layout();
    if *s.layout() != layout {
        return Err(Error::LayoutMismatch);
    }
    let (n, n0) = (spec.n, spec.n0);
    let x = spec.x.value();
    let omega_bit = 1usize << layout.omega();
    let gamma_bit = 1usize << layout.gamma();

    let mut raw1 = MuState::zeros(n, n0);
    let mut raw0 = MuState::zeros(n, n0);
    let mut chi_sqr = 0.0;
    for (i, &amp) in s.amplitudes().iter().enumerate() {
        if i & omega_bit != 0 {
            chi_sqr += amp.norm_sqr();
            continue;
        }
        let alpha = layout.extract(Register::Alpha, i);
        let beta = layout.extract(Register::Beta, i);
        if alpha != x || beta != 0 {
            if amp.norm() > CLAIM_TOL {
                return Err(Error::Claim(format!("omega = 0 amplitude {amp} outside the target at basis index {i}")));
            }
            continue;
        }
        let idx = raw1.index(layout.extract(Register::AlphaMinus, i), alpha, layout.extract(Register::Mu0, i) == 1);
        if i & gamma_bit != 0 {
            raw1.amplitudes[idx] = amp;
        } else {
            raw0.amplitudes[idx] = amp;
        }
    }

    let z1 = raw1.norm();
    let z0 = raw0.norm();
    let chi_norm = chi_sqr.sqrt();
    let scale = spec.branch_scale();
    let value = spec.classical_value();

    let check = |what: &str, got: f64, want: f64| {
        if (got - want).abs() > CLAIM_TOL {
            Err(Error::Claim(format!("{what} = {got}, expected {want}")))
        } else {
            Ok(())
        }
    };
    check("z0", z0, scale)?;
    check("z1", z1, scale * value.sqrt())?;
    check("|z1|^2 + |z0|^2 + |chi|^2", z1 * z1 + z0 * z0 + chi_sqr, 1.0)?;

    let psi0 = {
        let mut p = raw0;
        p.amplitudes.iter_mut().for_each(|a| *a /= z0);
        p
    };
    for xm in 0..1usize << n {
        let got = psi0.amplitude(xm, x, false);
        let want = spec.psi_minus[xm];
        if (got - want).norm() > CLAIM_TOL {
            return Err(Error::Claim(format!("psi0 amplitude at x_minus={xm} is {got}, expected {want}")));
        }
    }
    if psi0.amplitudes.iter().enumerate().any(|(i, a)| i >> (n + n0) == 1 && a.norm() > CLAIM_TOL) {
        return Err(Error::Claim("psi0 has weight on mu0 = 1".into()));
    }

    let psi1 = if z1 > PSI1_FLOOR {
        let mut p = raw1;
        p.amplitudes.iter_mut().for_each(|a| *a /= z1);
        let root = value.sqrt();
        for xm in 0..1usize << n {
            let want = if spec.contributes(xm) { spec.psi_minus[xm] / root } else { Complex64::new(0.0, 0.0) };
            // compare unnormalized so tiny classical values do not amplify rounding
            if (p.amplitude(xm, x, true) * root - want * root).norm() > CLAIM_TOL {
                return Err(Error::Claim(format!(
                    "psi1 amplitude at x_minus={xm} is {}, expected {want}",
                    p.amplitude(xm, x, true)
                )));
            }
        }
        if p.amplitudes.iter().enumerate().any(|(i, a)| i >> (n + n0) == 0 && a.norm() > CLAIM_TOL) {
            return Err(Error::Claim("psi1 has weight on mu0 = 0".into()));
        }
        Some(p)
    } else {
        None
    };

    Ok(ClaimDecomposition {
        z1: Complex64::new(z1, 0.0),
        z0: Complex64::new(z0, 0.0),
        chi_norm,
        psi1,
        psi0,
    })
}

/// `f(x)` read from `|z1/z0|^2` of the Möbius-mode `|s>`.
pub fn mobius_value_exact(spec: &SCircuitSpec) -> Result<f64> {
    if spec.mode != Mode::Mobius {
        return Err(Error::Spec("mobius_value_exact needs a mobius-mode spec".into()));
    }
    value_exact(spec)
}

/// `P(x^{n0})` read from `|z1/z0|^2` of the marginal-mode `|s>`.
pub fn marginal_value_exact(spec: &SCircuitSpec) -> Result<f64> {
    if spec.mode != Mode::Marginal {
        return Err(Error::Spec("marginal_value_exact needs a marginal-mode spec".into()));
    }
    value_exact(spec)
}

pub fn value_exact(spec: &SCircuitSpec) -> Result<f64> {
    Ok(extract_claim(spec, &build_s_state(spec)?)?.ratio())
}
