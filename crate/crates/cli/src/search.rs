use qmobius_core::minfind::{
    choose_beta, find_min, ClassicalEvaluator, ObjectiveTable, QuantumExactEvaluator, QuantumSampledEvaluator,
    SearchTrace, DEFAULT_MARGIN_NATS,
};
use qmobius_core::{BitString, SubsetTable};
use serde::{Deserialize, Serialize};

use crate::{invalid, parse_json, read_json, write_json, CliResult, EvaluatorKind, MinfindArgs};

const DEFAULT_SHOTS: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeRow {
    pub point: BitString,
    pub dec: usize,
    pub d_value: f64,
    pub bit: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinfindReport {
    pub objective: SubsetTable<f64>,
    pub beta: f64,
    pub threshold: f64,
    pub evaluator: EvaluatorKind,
    pub shots: Option<u64>,
    pub seed: u64,
    pub probes: Vec<ProbeRow>,
    pub result: BitString,
    /// Classical argmin, absent when the minimum is tied.
    pub argmin: Option<BitString>,
}

pub fn run(args: MinfindArgs) -> CliResult<bool> {
    if let Some(path) = &args.check {
        return check(path);
    }
    let obj = match (&args.input, args.n, args.center) {
        (Some(path), _, _) => ObjectiveTable::new(parse_json(path, read_json(path)?)?)?,
        (None, Some(n), Some(center)) => ObjectiveTable::quadratic(n, center)?,
        _ => return Err(invalid("pass --input PATH or --n INT --center REAL")),
    };
    let shots = match (args.evaluator, args.shots) {
        (EvaluatorKind::Sampled, s) => Some(s.unwrap_or(DEFAULT_SHOTS)),
        (_, None) => None,
        (_, Some(_)) => return Err(invalid("--shots needs --evaluator sampled")),
    };
    let beta = match args.beta {
        Some(b) => b,
        None => choose_beta(&obj, DEFAULT_MARGIN_NATS)?,
    };
    let trace = search(&obj, beta, args.threshold, args.evaluator, shots, args.seed)?;
    let report = MinfindReport {
        objective: obj.table().clone(),
        beta,
        threshold: args.threshold,
        evaluator: args.evaluator,
        shots,
        seed: args.seed,
        probes: trace
            .probes
            .iter()
            .map(|p| ProbeRow { point: p.point, dec: p.point.value(), d_value: p.d_value, bit: p.bit })
            .collect(),
        result: trace.result,
        argmin: obj.unique_argmin(),
    };

    println!("minfind n={} beta={:e} threshold={} evaluator={:?}", obj.n(), beta, args.threshold, args.evaluator);
    println!("{trace}");
    match report.argmin {
        Some(a) if a == trace.result => println!("classical argmin = {a} (match)"),
        Some(a) => eprintln!("warning: classical argmin is {a}, search returned {}", trace.result),
        None => eprintln!("warning: objective has tied minima"),
    }
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(true)
}

fn search(
    obj: &ObjectiveTable,
    beta: f64,
    threshold: f64,
    kind: EvaluatorKind,
    shots: Option<u64>,
    seed: u64,
) -> CliResult<SearchTrace> {
    let trace = match kind {
        EvaluatorKind::Classical => find_min(obj, beta, &mut ClassicalEvaluator::default(), threshold),
        EvaluatorKind::Exact => find_min(obj, beta, &mut QuantumExactEvaluator::default(), threshold),
        EvaluatorKind::Sampled => {
            let shots = shots.ok_or_else(|| invalid("sampled evaluator needs shots"))?;
            find_min(obj, beta, &mut QuantumSampledEvaluator::new(shots, seed), threshold)
        }
    };
    trace.map_err(invalid)
}

/// Reruns with the evaluator, threshold and seed stored in the report.
fn check(path: &std::path::Path) -> CliResult<bool> {
    let report: MinfindReport = parse_json(path, read_json(path)?)?;
    let obj = ObjectiveTable::new(report.objective.clone())?;
    let trace = search(&obj, report.beta, report.threshold, report.evaluator, report.shots, report.seed)?;
    let mut ok = trace.result == report.result
        && trace.probes.len() == report.probes.len()
        && report.argmin == obj.unique_argmin();
    for (old, new) in report.probes.iter().zip(&trace.probes) {
        if old.point != new.point || old.dec != new.point.value() || old.bit != new.bit || (old.d_value - new.d_value).abs() > 1e-9 {
            eprintln!("probe {} (recorded D = {}) recomputes as {} (D = {})", old.point, old.d_value, new.point, new.d_value);
            ok = false;
        }
    }
    if ok {
        println!("check: {} probes and result {} confirmed", trace.probes.len(), trace.result);
    } else {
        eprintln!("check: report does not match a rerun (rerun result {})", trace.result);
    }
    Ok(ok)
}
