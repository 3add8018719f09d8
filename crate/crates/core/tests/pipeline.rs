use num_complex::Complex64;
use proptest::prelude::*;
use qmobius_core::circuits::{build_s_prime_circuit, build_s_state, extract_claim, finish_s_state, value_exact};
use qmobius_core::grover::{estimate_exact, estimate_sampled};
use qmobius_core::subset::zeta_naive;
use qmobius_core::{BitString, Mode, SCircuitSpec, StateVector, SubsetTable};

fn normalize(raw: Vec<(f64, f64)>) -> Vec<Complex64> {
    let v: Vec<Complex64> = raw.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt().max(1e-9);
    v.into_iter().map(|a| a / norm).collect()
}

fn psi_strategy(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(normalize)
}

fn mobius_spec() -> impl Strategy<Value = SCircuitSpec> {
    (1usize..=5)
        .prop_flat_map(|n| (psi_strategy(n), 0..1usize << n, Just(n)))
        .prop_map(|(psi, x, n)| SCircuitSpec::mobius(psi, BitString::new(n, x).unwrap()).unwrap())
}

fn marginal_spec() -> impl Strategy<Value = SCircuitSpec> {
    (2usize..=6)
        .prop_flat_map(|n| (Just(n), 1..n.min(4)))
        .prop_flat_map(|(n, n0)| (psi_strategy(n), 0..1usize << n0, Just(n0)))
        .prop_map(|(psi, x, n0)| SCircuitSpec::marginal(psi, n0, BitString::new(n0, x).unwrap()).unwrap())
}

fn oracle(spec: &SCircuitSpec) -> f64 {
    let p = SubsetTable::from_amplitudes(spec.psi_minus()).unwrap();
    match spec.mode() {
        Mode::Mobius => zeta_naive(&p).values()[spec.x().value()],
        Mode::Marginal => {
            let mask = (1 << spec.n0()) - 1;
            p.values().iter().enumerate().filter(|(i, _)| i & mask == spec.x().value()).map(|(_, v)| v).sum()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn mobius_claim_structure(spec in mobius_spec()) {
        let claim = extract_claim(&spec, &build_s_state(&spec).unwrap()).unwrap();
        prop_assert!((claim.completeness() - 1.0).abs() <= 1e-9);
        prop_assert!((claim.ratio() - oracle(&spec)).abs() <= 1e-10);
        prop_assert!((claim.psi0.norm() - 1.0).abs() <= 1e-9);
        if let Some(psi1) = &claim.psi1 {
            prop_assert!((psi1.norm() - 1.0).abs() <= 1e-9);
            prop_assert_eq!(psi1.inner(&claim.psi0).norm(), 0.0);
        }
    }

    #[test]
    fn marginal_claim_structure(spec in marginal_spec()) {
        let claim = extract_claim(&spec, &build_s_state(&spec).unwrap()).unwrap();
        prop_assert!((claim.completeness() - 1.0).abs() <= 1e-9);
        prop_assert!((claim.ratio() - oracle(&spec)).abs() <= 1e-10);
    }

    #[test]
    fn two_extraction_paths_agree(spec in prop_oneof![mobius_spec(), marginal_spec()]) {
        let via_claim = value_exact(&spec).unwrap();
        let via_grover = estimate_exact(&spec).unwrap();
        prop_assert!((via_claim - via_grover).abs() <= 1e-9);
        prop_assert!((via_grover - oracle(&spec)).abs() <= 1e-9);
    }
}

#[test]
fn sweep_reuses_pre_flip_state() {
    let psi = normalize((0..16).map(|i| (i as f64 + 1.0, 0.5 * i as f64)).collect());
    let spec = SCircuitSpec::mobius(psi, BitString::zeros(4).unwrap()).unwrap();
    let mut s_prime = StateVector::new(spec.layout());
    s_prime.apply_circuit(&build_s_prime_circuit(&spec).unwrap()).unwrap();
    for x in BitString::all(4).unwrap() {
        let sx = spec.with_x(x).unwrap();
        assert_eq!(finish_s_state(&s_prime, &sx).unwrap(), build_s_state(&sx).unwrap());
        assert!((value_exact(&sx).unwrap() - oracle(&sx)).abs() < 1e-10);
    }
}

#[test]
fn sampled_error_shrinks_with_shots() {
    let psi = normalize((0..8).map(|i| (1.0 + i as f64, 0.0)).collect());
    let spec = SCircuitSpec::mobius(psi, "011".parse().unwrap()).unwrap();
    let truth = oracle(&spec);
    let rms = |shots: u64| {
        let errs: Vec<f64> = (0..40).map(|seed| estimate_sampled(&spec, shots, seed).unwrap().sampled - truth).collect();
        (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
    };
    let (coarse, fine) = (rms(1_000), rms(16_000));
    // 16x the shots should cut the error about 4x
    let gain = coarse / fine;
    assert!(gain > 2.5 && gain < 6.5, "rms {coarse:.4} -> {fine:.4}, gain {gain:.2}");
}

#[test]
fn reported_interval_covers_truth_mostly() {
    let psi = normalize((0..16).map(|i| ((i % 5) as f64 + 0.5, 0.0)).collect());
    let spec = SCircuitSpec::marginal(psi, 3, "101".parse().unwrap()).unwrap();
    let truth = oracle(&spec);
    let covered = (0..100)
        .filter(|&seed| {
            let r = estimate_sampled(&spec, 5_000, seed).unwrap();
            (r.sampled - truth).abs() <= r.half_width
        })
        .count();
    assert!(covered >= 85, "{covered}/100");
}
