use num_complex::Complex64;
use qmobius_core::circuits::{
    build_s_circuit_with_fault, coefficient_c_closed_form, computed_coefficient_c, extract_claim, TFault,
};
use qmobius_core::grover::{amplify_with, conditional_gamma_ratio, OriginalGrover};
use qmobius_core::subset::{mobius_inverse, zeta_fast, zeta_naive};
use qmobius_core::{BitString, Mode, SCircuitSpec, StateVector, SubsetTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{write_json, CliResult, Fault, VerifyArgs};

const CLAIM_TOL: f64 = 1e-10;
const RATIO_TOL: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 6;
const MARGINAL_SHAPES: [(usize, usize); 5] = [(2, 1), (3, 2), (4, 3), (5, 3), (6, 3)];

#[derive(Debug, Serialize)]
struct CheckResult {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        Self { name, cases: 0, failures: Vec::new() }
    }

    fn record(&mut self, pass: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !pass {
            self.failures.push(detail());
        }
    }

    fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    seed: u64,
    cases: usize,
    fault: Option<&'static str>,
    passed: bool,
    checks: Vec<CheckResult>,
}

pub fn run(args: VerifyArgs) -> CliResult<bool> {
    let fault = match args.inject_fault {
        Some(Fault::FlipControl) => TFault::FlipControl,
        None => TFault::None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let cases = args.cases.max(1);

    let mobius: Vec<SCircuitSpec> =
        (1..=5).flat_map(|n| (0..cases).map(move |_| (n, n))).map(|(n, n0)| random_spec(&mut rng, Mode::Mobius, n, n0)).collect();
    let marginal: Vec<SCircuitSpec> = MARGINAL_SHAPES
        .iter()
        .flat_map(|&shape| std::iter::repeat_n(shape, cases))
        .map(|(n, n0)| random_spec(&mut rng, Mode::Marginal, n, n0))
        .collect();
    let z0_specs: Vec<SCircuitSpec> = (0..cases).map(|_| random_spec(&mut rng, Mode::Mobius, 3, 3)).collect();

    let checks = vec![
        check_coefficients(fault),
        check_z0(&z0_specs, fault),
        check_claims(mobius.iter().chain(&marginal), fault),
        check_ratio_preservation(mobius.iter().chain(&marginal), fault),
        check_oracles(&mut rng, cases),
    ];

    for c in &checks {
        let tag = if c.passed() { "PASS" } else { "FAIL" };
        println!("[{tag}] {} ({} cases)", c.name, c.cases);
        for f in c.failures.iter().take(10) {
            println!("       {f}");
        }
        if c.failures.len() > 10 {
            println!("       ... and {} more", c.failures.len() - 10);
        }
    }
    let passed_count = checks.iter().filter(|c| c.passed()).count();
    println!("verify: {passed_count} of {} checks passed (seed {})", checks.len(), args.seed);

    let report = VerifyReport {
        seed: args.seed,
        cases,
        fault: args.inject_fault.map(|_| "flip-control"),
        passed: passed_count == checks.len(),
        checks,
    };
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(report.passed)
}

fn random_spec(rng: &mut ChaCha8Rng, mode: Mode, n: usize, n0: usize) -> SCircuitSpec {
    let raw: Vec<Complex64> =
        (0..1usize << n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let psi = raw.into_iter().map(|a| a / norm).collect();
    let x = BitString::new(n0, rng.random_range(0..1usize << n0)).expect("x fits in n0 bits");
    SCircuitSpec::new(mode, n, n0, psi, x).expect("generated spec is valid")
}

fn describe(spec: &SCircuitSpec) -> String {
    format!("{} n={} n0={} x={}", spec.mode(), spec.n(), spec.n0(), spec.x())
}

/// Independent of the fast transform used inside the library.
fn oracle_value(spec: &SCircuitSpec) -> f64 {
    let p: Vec<f64> = spec.psi_minus().iter().map(|a| a.norm_sqr()).collect();
    let x = spec.x().value();
    match spec.mode() {
        Mode::Mobius => p.iter().enumerate().filter(|(xm, _)| xm & !x == 0).map(|(_, v)| v).sum(),
        Mode::Marginal => {
            let mask = (1usize << spec.n0()) - 1;
            p.iter().enumerate().filter(|(i, _)| i & mask == x).map(|(_, v)| v).sum()
        }
    }
}

fn prepared_state(spec: &SCircuitSpec, fault: TFault) -> qmobius_core::Result<StateVector> {
    let mut s = StateVector::new(spec.layout());
    s.apply_circuit(&build_s_circuit_with_fault(spec, fault)?)?;
    Ok(s)
}

fn check_coefficients(fault: TFault) -> CheckResult {
    let mut result = CheckResult::new("C coefficients");
    for mode in [Mode::Mobius, Mode::Marginal] {
        for xm in [false, true] {
            for x in [false, true] {
                let computed = computed_coefficient_c(xm, x, mode, fault);
                let expected = coefficient_c_closed_form(xm, x, mode);
                result.record(computed == expected, || {
                    format!(
                        "C coefficient mismatch: {mode} C({}, {}) = {computed}, expected {expected}, delta {:e}",
                        u8::from(xm),
                        u8::from(x),
                        (computed - expected).abs()
                    )
                });
            }
        }
    }
    result
}

fn check_z0(specs: &[SCircuitSpec], fault: TFault) -> CheckResult {
    let mut result = CheckResult::new("z0 = 0.25 at n = 3");
    for spec in specs {
        match prepared_state(spec, fault).and_then(|s| extract_claim(spec, &s)) {
            Ok(claim) => {
                let delta = (claim.z0 - Complex64::new(0.25, 0.0)).norm();
                result.record(delta <= CLAIM_TOL, || format!("{}: z0 = {}, delta {delta:e}", describe(spec), claim.z0));
            }
            Err(e) => result.record(false, || format!("{}: {e}", describe(spec))),
        }
    }
    result
}

fn check_claims<'a>(specs: impl Iterator<Item = &'a SCircuitSpec>, fault: TFault) -> CheckResult {
    let mut result = CheckResult::new("claim decomposition");
    for spec in specs {
        match prepared_state(spec, fault).and_then(|s| extract_claim(spec, &s)) {
            Ok(claim) => {
                let ratio_delta = (claim.ratio() - oracle_value(spec)).abs();
                let completeness_delta = (claim.completeness() - 1.0).abs();
                result.record(ratio_delta <= CLAIM_TOL && completeness_delta <= RATIO_TOL, || {
                    format!("{}: ratio delta {ratio_delta:e}, completeness delta {completeness_delta:e}", describe(spec))
                });
            }
            Err(e) => result.record(false, || format!("{}: {e}", describe(spec))),
        }
    }
    result
}

fn check_ratio_preservation<'a>(specs: impl Iterator<Item = &'a SCircuitSpec>, fault: TFault) -> CheckResult {
    let mut result = CheckResult::new("ratio preservation");
    for spec in specs {
        let s = match prepared_state(spec, fault) {
            Ok(s) => s,
            Err(e) => {
                result.record(false, || format!("{}: {e}", describe(spec)));
                continue;
            }
        };
        let expected = oracle_value(spec);
        for k in 0..=MAX_ITERATIONS {
            let ratio = amplify_with(&OriginalGrover, &s, k).ok().and_then(|st| conditional_gamma_ratio(&st));
            match ratio {
                Some(r) => {
                    let delta = (r - expected).abs();
                    result.record(delta <= RATIO_TOL, || format!("{} k={k}: ratio delta {delta:e}", describe(spec)));
                }
                None => result.record(false, || format!("{} k={k}: omega = 0, gamma = 0 branch vanished", describe(spec))),
            }
        }
    }
    result
}

fn check_oracles(rng: &mut ChaCha8Rng, cases: usize) -> CheckResult {
    let mut result = CheckResult::new("oracle equivalence");
    for n in 1..=8 {
        for _ in 0..cases {
            let table = SubsetTable::from_fn(n, |_| rng.random_range(-1.0..1.0)).expect("n in range");
            let fast = zeta_fast(&table);
            let naive = zeta_naive(&table);
            let round = mobius_inverse(&fast);
            let zeta_delta = max_delta(fast.values(), naive.values());
            let inverse_delta = max_delta(round.values(), table.values());
            result.record(zeta_delta <= ORACLE_TOL && inverse_delta <= ORACLE_TOL, || {
                format!("n={n}: fast vs naive {zeta_delta:e}, inverse round trip {inverse_delta:e}")
            });
        }
    }
    result
}

fn max_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
