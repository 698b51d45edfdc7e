//! Values computed independently of this crate and frozen here.

use sabasis_core::bundle::{
    bundle_dense_element, hermitian_unit, run_bundle_stages, verify_bundle_basis, MatStepFn,
    Tolerances,
};
use sabasis_core::scalar::ratio;
use sabasis_core::{
    dense_element, iteration_bound, minimal_iteration_count, pair_index, run_stages,
    verify_basis, CertificateStatus, ExactBasis, Rational, StageOptions, StepFn,
};

#[test]
fn iteration_counts() {
    // Frozen from an independent high-precision script that steps the
    // worst-case energy recursion one iteration at a time.
    assert_eq!(minimal_iteration_count(1.0, 1.0, 0.5).unwrap(), 31_032_101);
    assert_eq!(minimal_iteration_count(2.0 / 3.0, 1.0, 0.5).unwrap(), 7960);
    let one = ratio(1, 1);
    assert_eq!(iteration_bound(&one, &one, &ratio(1, 2)).unwrap(), 34_135_312);
    assert_eq!(iteration_bound(&ratio(1, 4), &one, &one).unwrap(), 0);
}

#[test]
fn pair_order_prefix() {
    let pairs: Vec<(u64, u64)> = (1..=10).map(|m| pair_index(m).unwrap()).collect();
    assert_eq!(
        pairs,
        [(1, 1), (1, 2), (2, 1), (1, 3), (2, 2), (3, 1), (1, 4), (2, 3), (3, 2), (4, 1)]
    );
}

#[test]
fn dense_family_prefix() {
    let b = |j| dense_element::<Rational>(j);
    assert_eq!(b(0), StepFn::one());
    assert_eq!(b(1), StepFn::indicator(ratio(0, 1), ratio(1, 2)).unwrap());
    assert_eq!(b(2), StepFn::indicator(ratio(1, 2), ratio(1, 1)).unwrap());
    assert_eq!(b(6), StepFn::indicator(ratio(3, 4), ratio(1, 1)).unwrap());
}

#[test]
fn driver_after_fifteen_stages() {
    let state: ExactBasis = run_stages(15, &StageOptions::default()).unwrap();
    assert_eq!(state.family.len(), 4);
    assert!(state.family.gram_violation().is_none());
    assert!(state.family.members().iter().all(|m| m.is_sa_unitary()));
    let report = verify_basis(&state, 5, 5);
    assert!(report.passed);
    let passed = report
        .certificates
        .iter()
        .filter(|c| c.status == CertificateStatus::Pass)
        .count();
    assert!(report.certificates.iter().all(|c| c.status != CertificateStatus::Fail));
    assert_eq!(passed, state.processed.len());
    let text = state.to_json();
    assert_eq!(ExactBasis::from_json(&text).unwrap().to_json(), text);
}

#[test]
fn bundle_driver_with_n_one_matches_the_scalar_driver() {
    let tols = Tolerances::default();
    let bundle = run_bundle_stages::<f64>(1, 10, &StageOptions::default(), &tols).unwrap();
    let scalar: ExactBasis = run_stages(10, &StageOptions::default()).unwrap();
    assert_eq!(bundle.family.len(), scalar.family.len());
    for (m, s) in bundle.family.iter().zip(scalar.family.members()) {
        assert_eq!(*m, MatStepFn::from_scalar(&s.convert::<f64>()));
    }
    assert!(verify_bundle_basis(&bundle, 4, 4, &tols, 1).passed);
}

#[test]
fn hermitian_units_are_orthogonal() {
    for n in 1..=4 {
        let units: Vec<MatStepFn<f64>> = (0..n * n)
            .map(|i| MatStepFn::constant(hermitian_unit::<f64>(n, i)).unwrap())
            .collect();
        for (i, x) in units.iter().enumerate() {
            for (j, y) in units.iter().enumerate() {
                let ip = x.nc_inner(y).unwrap();
                if i == j {
                    assert!(ip > 0.0);
                } else {
                    assert!(ip.abs() < 1e-15, "n={n} ({i},{j}) {ip}");
                }
            }
        }
        assert_eq!(bundle_dense_element::<f64>(n, 0), MatStepFn::constant(hermitian_unit(n, 0)).unwrap());
    }
}
