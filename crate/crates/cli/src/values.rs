use anyhow::Context;
use num_complex::Complex64;
use qmobius_core::circuits::build_s_state;
use qmobius_core::grover::{estimate_exact, estimate_sampled};
use qmobius_core::{BitString, Mode, SCircuitSpec, SubsetTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{invalid, parse_json, read_json, write_json, CliResult, ValueArgs};

const AGREE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub x: BitString,
    pub dec: usize,
    pub classical: f64,
    pub exact: f64,
    pub sampled: Option<f64>,
    pub half_width: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueReport {
    pub mode: Mode,
    pub n: usize,
    pub n0: usize,
    pub seed: u64,
    pub shots: Option<u64>,
    pub psi_minus: Vec<Complex64>,
    pub rows: Vec<Row>,
    /// Sum of the classical column; present for full sweeps.
    pub column_sum: Option<f64>,
}

pub fn run(mode: Mode, args: ValueArgs) -> CliResult<bool> {
    if let Some(path) = &args.check {
        return check(mode, path);
    }
    let path = args.input.as_deref().expect("clap requires --input without --check");
    let (spec, spec_x) = load_spec(mode, path, args.n0)?;

    let points: Vec<BitString> = if args.sweep {
        BitString::all(spec.n0())?.collect()
    } else if let Some(x) = args.x.or(spec_x) {
        vec![x]
    } else {
        return Err(invalid("pass --x BITSTRING or --sweep"));
    };

    if let Some(dump) = &args.dump_state {
        let state = build_s_state(&spec.with_x(points[0])?)?;
        std::fs::write(dump, state.to_json()?).with_context(|| format!("writing {}", dump.display()))?;
    }

    let rows = evaluate(&spec, &points, args.shots, args.seed)?;
    let report = ValueReport {
        mode,
        n: spec.n(),
        n0: spec.n0(),
        seed: args.seed,
        shots: args.shots,
        psi_minus: spec.psi_minus().to_vec(),
        column_sum: args.sweep.then(|| rows.iter().map(|r| r.classical).sum()),
        rows,
    };
    print_table(&report);
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(postconditions(&report))
}

fn load_spec(mode: Mode, path: &std::path::Path, n0: Option<usize>) -> CliResult<(SCircuitSpec, Option<BitString>)> {
    let value = read_json(path)?;
    if value.get("mode").is_some() {
        let spec: SCircuitSpec = parse_json(path, value)?;
        if spec.mode() != mode {
            return Err(invalid(format!("{} holds a {} spec", path.display(), spec.mode())));
        }
        if n0.is_some_and(|k| k != spec.n0()) {
            return Err(invalid(format!("--n0 disagrees with n0 = {} in {}", spec.n0(), path.display())));
        }
        let x = spec.x();
        return Ok((spec, Some(x)));
    }
    let table: SubsetTable<f64> = parse_json(path, value)?;
    table.validate_probability()?;
    let n = table.n();
    let n0 = match (mode, n0) {
        (Mode::Mobius, None) => n,
        (Mode::Mobius, Some(k)) if k == n => n,
        (Mode::Mobius, Some(_)) => return Err(invalid("--n0 applies to marginal mode only")),
        (Mode::Marginal, Some(k)) => k,
        (Mode::Marginal, None) => return Err(invalid("marginal mode needs --n0")),
    };
    let psi = SCircuitSpec::amplitudes_from_probabilities(&table)?;
    let spec = SCircuitSpec::new(mode, n, n0, psi, BitString::zeros(n0)?)?;
    Ok((spec, None))
}

fn evaluate(spec: &SCircuitSpec, points: &[BitString], shots: Option<u64>, seed: u64) -> CliResult<Vec<Row>> {
    let rows = points.par_iter().map(|&x| row(spec, x, shots, seed)).collect::<qmobius_core::Result<Vec<_>>>()?;
    Ok(rows)
}

fn row(base: &SCircuitSpec, x: BitString, shots: Option<u64>, seed: u64) -> qmobius_core::Result<Row> {
    let spec = base.with_x(x)?;
    let classical = spec.classical_value();
    let (exact, sampled, half_width) = match shots {
        Some(shots) => {
            let r = estimate_sampled(&spec, shots, seed.wrapping_add(x.value() as u64))?;
            (r.exact, Some(r.sampled), Some(r.half_width))
        }
        None => (estimate_exact(&spec)?, None, None),
    };
    Ok(Row { x, dec: x.value(), classical, exact, sampled, half_width })
}

fn print_table(report: &ValueReport) {
    println!("{} n={} n0={} seed={}", report.mode, report.n, report.n0, report.seed);
    let width = report.n0.max(1);
    println!("{:<width$}  {:>5}  {:>16}  {:>16}  {:>24}", "x", "dec", "classical", "exact", "sampled");
    for r in &report.rows {
        let sampled = match (r.sampled, r.half_width) {
            (Some(s), Some(h)) => format!("{s:.6} ± {h:.6}"),
            _ => "-".to_string(),
        };
        println!("{:<width$}  {:>5}  {:>16.12}  {:>16.12}  {:>24}", r.x.to_string(), r.dec, r.classical, r.exact, sampled);
    }
    if let Some(sum) = report.column_sum {
        println!("sum of classical column: {sum:.12}");
    }
}

fn postconditions(report: &ValueReport) -> bool {
    let mut ok = true;
    for r in &report.rows {
        if (r.classical - r.exact).abs() > AGREE_TOL {
            eprintln!("x = {}: classical {} and quantum {} differ by {:e}", r.x, r.classical, r.exact, (r.classical - r.exact).abs());
            ok = false;
        }
    }
    if report.mode == Mode::Marginal {
        if let Some(sum) = report.column_sum {
            if (sum - 1.0).abs() > AGREE_TOL {
                eprintln!("marginal column sums to {sum}, expected 1");
                ok = false;
            }
        }
    }
    ok
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn same_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => close(a, b, 1e-12),
        _ => false,
    }
}

fn check(mode: Mode, path: &std::path::Path) -> CliResult<bool> {
    let report: ValueReport = parse_json(path, read_json(path)?)?;
    if report.mode != mode {
        return Err(invalid(format!("{} is a {} report", path.display(), report.mode)));
    }
    if report.rows.is_empty() {
        return Err(invalid(format!("{} has no rows", path.display())));
    }
    let spec = SCircuitSpec::new(mode, report.n, report.n0, report.psi_minus.clone(), BitString::zeros(report.n0)?)?;
    let points: Vec<BitString> = report.rows.iter().map(|r| r.x).collect();
    let fresh = evaluate(&spec, &points, report.shots, report.seed)?;

    let mut mismatches = 0;
    for (old, new) in report.rows.iter().zip(&fresh) {
        let agrees = old.dec == old.x.value()
            && close(old.classical, new.classical, AGREE_TOL)
            && close(old.exact, new.exact, AGREE_TOL)
            && same_opt(old.sampled, new.sampled)
            && same_opt(old.half_width, new.half_width);
        if !agrees {
            eprintln!("x = {}: report {:?} vs recomputed {:?}", old.x, old, new);
            mismatches += 1;
        }
    }
    if let Some(sum) = report.column_sum {
        let fresh_sum: f64 = fresh.iter().map(|r| r.classical).sum();
        if points.len() != 1 << report.n0 || !close(sum, fresh_sum, AGREE_TOL) {
            eprintln!("column_sum {sum} does not match recomputed {fresh_sum} over {} rows", points.len());
            mismatches += 1;
        }
    }
    if mismatches == 0 {
        println!("check: {} rows confirmed", fresh.len());
        Ok(postconditions(&report))
    } else {
        eprintln!("check: {mismatches} mismatches");
        Ok(false)
    }
}
