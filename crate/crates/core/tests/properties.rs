use proptest::prelude::*;

use sabasis_core::pursuit::all_passed;
use sabasis_core::scalar::ratio;
use sabasis_core::{
    extract_projection, iteration_bound, norming_unitary, pursue, ExactFamily, ExactStepFn,
    OrthoFamily, PursuitOptions, Rational, SAUnitaryFn, SplitRule, StepFn,
};

type F = ExactStepFn;

/// Step function on a subgrid of `1/den` with values `p/q`.
fn stepfn(den: i64, cuts: &[bool], vals: &[i64], q: i64) -> F {
    let mut bps = vec![ratio(0, 1)];
    bps.extend(
        (1..den)
            .filter(|&c| cuts[(c as usize) % cuts.len()])
            .map(|c| ratio(c, den)),
    );
    bps.push(ratio(1, 1));
    let values = (0..bps.len() - 1)
        .map(|i| ratio(vals[i % vals.len()], q))
        .collect();
    F::new(bps, values).unwrap()
}

fn arb_stepfn() -> impl Strategy<Value = F> {
    (
        prop::sample::select(vec![2i64, 3, 4, 6, 8]),
        prop::collection::vec(any::<bool>(), 8),
        prop::collection::vec(-6i64..=6, 8),
        prop::sample::select(vec![1i64, 2, 3, 4]),
    )
        .prop_map(|(den, cuts, vals, q)| stepfn(den, &cuts, &vals, q))
}

fn contraction() -> impl Strategy<Value = F> {
    (
        prop::sample::select(vec![2i64, 3, 5, 8]),
        prop::collection::vec(any::<bool>(), 8),
        prop::collection::vec(0i64..=6, 8),
    )
        .prop_map(|(den, cuts, vals)| stepfn(den, &cuts, &vals, 6))
}

/// Targets with values `ε·p/2`, `|p| <= 6`. Keeping `‖a‖/ε` bounded keeps the
/// exact runs short; unbounded ratios make the rationals grow quickly.
fn scaled_target(eps: &Rational) -> impl Strategy<Value = F> {
    let eps = eps.clone();
    (
        prop::sample::select(vec![2i64, 3, 4, 6, 8]),
        prop::collection::vec(any::<bool>(), 8),
        prop::collection::vec(-6i64..=6, 8),
    )
        .prop_map(move |(den, cuts, vals)| stepfn(den, &cuts, &vals, 2).scale(&eps))
}

fn rademacher(n: u32) -> F {
    SAUnitaryFn::<Rational>::rademacher(n).into_stepfn()
}

fn small_family() -> ExactFamily {
    OrthoFamily::from_members(vec![F::one(), rademacher(1), rademacher(2)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_symmetric_and_bilinear(a in arb_stepfn(), b in arb_stepfn(), c in arb_stepfn()) {
        prop_assert_eq!(a.inner(&b), b.inner(&a));
        let ab = F::lin_comb(&[(ratio(2, 1), &a), (ratio(-1, 3), &b)]);
        prop_assert_eq!(ab.inner(&c), ratio(2, 1) * a.inner(&c) - ratio(1, 3) * b.inner(&c));
        prop_assert_eq!(a.norm2_sq(), a.inner(&a));
    }

    #[test]
    fn canonical_form_merges_equal_neighbours(a in arb_stepfn()) {
        prop_assert!(a.values().windows(2).all(|w| w[0] != w[1]));
        let doubled = F::lin_comb(&[(ratio(1, 1), &a), (ratio(1, 1), &a)]);
        prop_assert_eq!(doubled.breakpoints(), a.breakpoints());
        prop_assert!(F::lin_comb(&[(ratio(1, 1), &a), (ratio(-1, 1), &a)]).is_zero());
    }

    #[test]
    fn norms_are_ordered(a in arb_stepfn()) {
        // |a|_2^2 <= |a|_inf^2 on a probability space.
        let sup = a.norm_inf();
        prop_assert!(a.norm2_sq() <= &sup * &sup);
    }

    #[test]
    fn extraction_gives_a_matching_projection(q in contraction(), g in arb_stepfn()) {
        let one = F::one();
        for rule in [SplitRule::Basic, SplitRule::Cellwise] {
            let p = extract_projection(&q, &[&one, &g], rule).unwrap();
            prop_assert!(p.as_stepfn().is_projection());
            prop_assert_eq!(p.as_stepfn().trace(), q.trace());
            prop_assert_eq!(p.as_stepfn().inner(&g), q.inner(&g));
        }
    }

    #[test]
    fn basic_rule_splits_few_cells(q in contraction(), g in arb_stepfn()) {
        // At most one fractional cell per constraint survives the reduction,
        // so the output has at most (#grid cells + #constraints) cells.
        let one = F::one();
        let p = extract_projection(&q, &[&one, &g], SplitRule::Basic).unwrap();
        let grid = sabasis_core::common_refinement(&[&q, &g]).unwrap().0;
        prop_assert!(p.as_stepfn().num_cells() <= grid.len() - 1 + 2);
    }

    #[test]
    fn norming_identity_holds_exactly(raw in arb_stepfn()) {
        let fam = small_family();
        let (_, a) = fam.project_residual(&raw);
        prop_assume!(!a.is_zero());
        let nu = norming_unitary(&a, &fam, SplitRule::Basic).unwrap();
        let u = nu.unitary.as_stepfn();
        prop_assert!(u.is_sa_unitary());
        prop_assert_eq!(&nu.alpha * a.norm_inf(), a.norm2_sq());
        prop_assert_eq!(a.inner(u), nu.alpha);
        for e in fam.members() {
            prop_assert_eq!(u.inner(e), ratio(0, 1));
        }
    }

    #[test]
    fn pursuit_certifies_and_respects_the_bound(
        (k, raw) in (1u32..=4).prop_flat_map(|k| (Just(k), scaled_target(&sabasis_core::scalar::dyadic_power(k))))
    ) {
        let fam = OrthoFamily::unit();
        let (_, a) = fam.project_residual(&raw);
        let eps = sabasis_core::scalar::dyadic_power(k);
        let run = pursue(&a, &fam, &eps, &PursuitOptions::default()).unwrap();
        let checks = run.certify(&a, &fam);
        prop_assert!(all_passed(&checks), "{:?}", checks);
        prop_assert!(run.residual.norm2_sq() < &eps * &eps);
        if !a.is_zero() {
            let bound = iteration_bound(&a.norm2_sq(), &a.norm_inf(), &eps).unwrap();
            prop_assert!(run.num_units() as u64 <= bound);
        }
        prop_assert!(run.family.gram_violation().is_none());
    }

    #[test]
    fn float_pursuit_tracks_exact(raw in scaled_target(&ratio(1, 4))) {
        let fam = OrthoFamily::unit();
        let (_, a) = fam.project_residual(&raw);
        let eps = ratio(1, 4);
        let exact = pursue(&a, &fam, &eps, &PursuitOptions::default()).unwrap();
        let float = pursue(&a.convert::<f64>(), &OrthoFamily::unit(), &0.25, &PursuitOptions::default()).unwrap();
        prop_assert_eq!(exact.num_units(), float.num_units());
        for (e, f) in exact.trace.iterations.iter().zip(&float.trace.iterations) {
            prop_assert!((sabasis_core::Scalar::to_f64(&e.alpha) - f.alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn stepfn_json_round_trips(a in arb_stepfn()) {
        let text = serde_json::to_string(&a).unwrap();
        let back: F = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn walsh_functions_are_fixed_points() {
    let fam = OrthoFamily::from_members(vec![F::one(), rademacher(1), rademacher(3)]).unwrap();
    for a in [rademacher(2), rademacher(1).mul(&rademacher(3)), rademacher(4)] {
        let run = pursue(&a, &fam, &ratio(1, 2), &PursuitOptions::default()).unwrap();
        assert_eq!(run.num_units(), 1);
        assert_eq!(*run.trace.iterations[0].unitary.as_stepfn(), a);
        assert_eq!(run.trace.iterations[0].alpha, ratio(1, 1));
        assert!(run.residual.is_zero());
    }
}

#[test]
fn float_and_single_precision_models_run() {
    let a = StepFn::<f32>::new(
        vec![ratio(0, 1), ratio(1, 3), ratio(1, 1)],
        vec![1.0, -0.5],
    )
    .unwrap();
    let run = pursue(&a, &OrthoFamily::unit(), &0.25f32, &PursuitOptions::default()).unwrap();
    assert!(all_passed(&run.trace.check_inequalities()));
}
