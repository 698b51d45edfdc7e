//! Projection extraction and the norming unitary in the abelian model.
//!
//! Given a positive contraction `q` and finitely many constraint functions
//! `g`, [`extract_projection`] returns an indicator `p` with
//! `τ(p g) = τ(q g)` for every `g`. Mapping `x ↦ q = (1 + x)/2` and
//! `p ↦ u = 2p - 1` turns this into: every `x` with `-1 ≤ x ≤ 1` has a
//! self-adjoint unitary with the same pairings.

use crate::error::{Error, Result};
use crate::family::{orthogonality_violation, OrthoFamily};
use crate::scalar::{split_point, Rational, Scalar};
use crate::stepfn::{common_refinement, ProjectionFn, SAUnitaryFn, StepFn};
use crate::vertex::{is_fractional, reduce_to_basic_weighted};

/// How the mass of `q` is placed inside the common grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SplitRule {
    /// Reduce the cell fractions to a basic solution of the constraint
    /// system first, then split the (at most `#constraints`) remaining
    /// fractional cells with their mass on the left.
    #[default]
    Basic,
    /// Split every fractional cell with its mass on the left. Matches
    /// `τ(p g) = τ(q g)` for every `g` constant on the grid, but the cell
    /// count roughly doubles per use.
    Cellwise,
}

/// Projection `p` with `τ(p g) = τ(q g)` for every `g` in `constraints`.
///
/// Requires `0 ≤ q ≤ 1` pointwise (float values within the zero tolerance of
/// the bounds are clipped).
pub fn extract_projection<T: Scalar>(
    q: &StepFn<T>,
    constraints: &[&StepFn<T>],
    rule: SplitRule,
) -> Result<ProjectionFn<T>> {
    for (lo, hi, v) in q.cells() {
        let below = *v < T::zero() && !v.is_negligible();
        let above = *v > T::one() && !(v.clone() - T::one()).is_negligible();
        if below || above {
            return Err(Error::Domain(format!(
                "q = {} on [{lo}, {hi}) is outside [0, 1]",
                v.encode()
            )));
        }
    }
    let mut all = Vec::with_capacity(constraints.len() + 1);
    all.push(q);
    all.extend_from_slice(constraints);
    let (grid, table) = common_refinement(&all)?;
    let lengths: Vec<T> = grid
        .windows(2)
        .map(|w| T::from_rational(&(&w[1] - &w[0])))
        .collect();
    let mut fractions: Vec<T> = table[0]
        .iter()
        .map(|v| num_traits::clamp(v.clone(), T::zero(), T::one()))
        .collect();

    if rule == SplitRule::Basic {
        reduce_to_basic_weighted(&table[1..], &lengths, &mut fractions);
    }

    let p = left_placement(&grid, &fractions);
    ProjectionFn::new(p)
}

/// Puts value 1 on the left fraction `x_i` of cell `i` and 0 elsewhere.
fn left_placement<T: Scalar>(grid: &[Rational], fractions: &[T]) -> StepFn<T> {
    let mut bps = vec![grid[0].clone()];
    let mut vals = Vec::with_capacity(fractions.len() * 2);
    for (w, x) in grid.windows(2).zip(fractions) {
        if is_fractional(x) {
            let split = split_point(&w[0], &w[1], x);
            // Snapping a float fraction can land on the cell boundary;
            // canonicalization then drops the empty side.
            bps.push(split);
            vals.push(T::one());
            bps.push(w[1].clone());
            vals.push(T::zero());
        } else {
            bps.push(w[1].clone());
            vals.push(if (x.clone() - T::one()).is_negligible() {
                T::one()
            } else {
                T::zero()
            });
        }
    }
    crate::stepfn::canonicalize_unchecked(bps, vals)
}

/// Output of [`norming_unitary`].
#[derive(Clone, Debug, PartialEq)]
pub struct NormingUnitary<T> {
    pub unitary: SAUnitaryFn<T>,
    /// `⟨a, u⟩`, equal to `‖a‖₂² / ‖a‖∞`.
    pub alpha: T,
}

/// Self-adjoint unitary `u ⊥ fam` with `τ(a u) = ‖a‖₂² / ‖a‖∞`.
///
/// Built as `u = 2p - 1` where `p` is extracted from
/// `q = (1 + a/‖a‖∞)/2` under the constraints `fam ∪ {a}`. The identities
/// are checked before returning (exactly for rational scalars).
pub fn norming_unitary<T: Scalar>(
    a: &StepFn<T>,
    fam: &OrthoFamily<T>,
    rule: SplitRule,
) -> Result<NormingUnitary<T>> {
    if a.is_zero() {
        return Err(Error::Domain("norming unitary of the zero element".into()));
    }
    let tol = T::IDENTITY_TOL;
    if let Some((i, ip)) = orthogonality_violation(a, fam, tol) {
        return Err(Error::Precondition(format!(
            "target not orthogonal to family member {i}: inner product {}",
            ip.encode()
        )));
    }
    let sup = a.norm_inf();
    let q = StepFn::lin_comb(&[(T::half(), &StepFn::one()), (T::half() / sup.clone(), a)]);
    let mut constraints: Vec<&StepFn<T>> = fam.members().iter().collect();
    constraints.push(a);
    let p = extract_projection(&q, &constraints, rule)?;
    let unitary = p.to_unitary();

    let alpha = a.inner(&unitary);
    let energy = a.norm2_sq();
    if !(alpha.clone() * sup.clone()).near(&energy, tol * sup.to_f64().max(1.0)) {
        return Err(Error::Certificate(format!(
            "<a,u> * |a|_inf = {} differs from |a|_2^2 = {}",
            (alpha.clone() * sup).encode(),
            energy.encode()
        )));
    }
    if let Some((i, ip)) = orthogonality_violation(&unitary, fam, tol) {
        return Err(Error::Certificate(format!(
            "unitary not orthogonal to family member {i}: inner product {}",
            ip.encode()
        )));
    }
    Ok(NormingUnitary { unitary, alpha })
}

/// `⟨a, u⟩` target from the norming identity, for callers that only need
/// the scalar.
pub fn norming_value<T: Scalar>(a: &StepFn<T>) -> Result<T> {
    let sup = a.norm_inf();
    if sup.is_zero() {
        return Err(Error::Domain("norming value of the zero element".into()));
    }
    Ok(a.norm2_sq() / sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    type F = StepFn<Rational>;

    fn sf(bps: &[(i64, i64)], vals: &[(i64, i64)]) -> F {
        F::new(
            bps.iter().map(|&(p, q)| ratio(p, q)).collect(),
            vals.iter().map(|&(p, q)| ratio(p, q)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn full_contraction_gives_one() {
        for rule in [SplitRule::Basic, SplitRule::Cellwise] {
            let p = extract_projection(&F::one(), &[], rule).unwrap();
            assert_eq!(*p.as_stepfn(), F::one());
        }
    }

    #[test]
    fn projection_is_fixed_point() {
        let q = F::indicator(ratio(1, 5), ratio(2, 3)).unwrap();
        let g = sf(&[(0, 1), (1, 2), (1, 1)], &[(3, 1), (-1, 7)]);
        for rule in [SplitRule::Basic, SplitRule::Cellwise] {
            let p = extract_projection(&q, &[&g, &F::one()], rule).unwrap();
            assert_eq!(*p.as_stepfn(), q);
        }
    }

    #[test]
    fn half_constant_goes_left() {
        let q = F::constant(ratio(1, 2));
        let p = extract_projection(&q, &[&F::one()], SplitRule::Basic).unwrap();
        assert_eq!(
            *p.as_stepfn(),
            F::indicator(ratio(0, 1), ratio(1, 2)).unwrap()
        );
        assert_eq!(p.trace(), ratio(1, 2));
    }

    #[test]
    fn out_of_range_q_is_a_domain_error() {
        let q = sf(&[(0, 1), (1, 2), (1, 1)], &[(1, 2), (3, 2)]);
        assert!(matches!(
            extract_projection(&q, &[], SplitRule::Basic),
            Err(Error::Domain(_))
        ));
        let q = F::constant(ratio(-1, 9));
        assert!(extract_projection(&q, &[], SplitRule::Cellwise).is_err());
    }

    #[test]
    fn cellwise_matches_every_grid_function() {
        let q = sf(&[(0, 1), (1, 3), (1, 1)], &[(1, 4), (2, 3)]);
        let g = sf(&[(0, 1), (1, 6), (1, 1)], &[(5, 1), (-2, 1)]);
        let p = extract_projection(&q, &[&g], SplitRule::Cellwise).unwrap();
        // Any function constant on the grid {0,1/6,1/3,1} pairs equally.
        for h in [
            F::indicator(ratio(0, 1), ratio(1, 6)).unwrap(),
            F::indicator(ratio(1, 6), ratio(1, 3)).unwrap(),
            F::indicator(ratio(1, 3), ratio(1, 1)).unwrap(),
        ] {
            assert_eq!(p.inner(&h), q.inner(&h));
        }
    }

    #[test]
    fn norming_rademacher_is_fixed() {
        let r1 = SAUnitaryFn::<Rational>::rademacher(1).into_stepfn();
        let nu = norming_unitary(&r1, &OrthoFamily::unit(), SplitRule::Basic).unwrap();
        assert_eq!(*nu.unitary.as_stepfn(), r1);
        assert_eq!(nu.alpha, ratio(1, 1));
    }

    #[test]
    fn norming_half_amplitude() {
        let a = sf(&[(0, 1), (1, 2), (1, 1)], &[(1, 2), (-1, 2)]);
        let nu = norming_unitary(&a, &OrthoFamily::unit(), SplitRule::Basic).unwrap();
        assert_eq!(nu.unitary.values(), &[ratio(1, 1), ratio(-1, 1)]);
        assert_eq!(
            nu.unitary.breakpoints(),
            &[ratio(0, 1), ratio(1, 2), ratio(1, 1)]
        );
        assert_eq!(nu.alpha, ratio(1, 2));
    }

    #[test]
    fn norming_splits_at_one_half() {
        // q = (1, 1/3); the long cell splits at 1/4 + (1/3)(3/4) = 1/2.
        let a = sf(&[(0, 1), (1, 4), (1, 1)], &[(2, 1), (-2, 3)]);
        for rule in [SplitRule::Basic, SplitRule::Cellwise] {
            let nu = norming_unitary(&a, &OrthoFamily::unit(), rule).unwrap();
            assert_eq!(
                nu.unitary.breakpoints(),
                &[ratio(0, 1), ratio(1, 2), ratio(1, 1)]
            );
            assert_eq!(nu.unitary.values(), &[ratio(1, 1), ratio(-1, 1)]);
            assert_eq!(nu.alpha, ratio(2, 3));
            assert_eq!(a.inner(&nu.unitary), ratio(2, 3));
        }
    }

    #[test]
    fn norming_errors() {
        let fam = OrthoFamily::<Rational>::unit();
        assert!(matches!(
            norming_unitary(&F::zero(), &fam, SplitRule::Basic),
            Err(Error::Domain(_))
        ));
        let not_orth = F::indicator(ratio(0, 1), ratio(1, 2)).unwrap();
        assert!(matches!(
            norming_unitary(&not_orth, &fam, SplitRule::Basic),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn float_model_agrees_with_exact() {
        let a = sf(&[(0, 1), (1, 4), (1, 1)], &[(2, 1), (-2, 3)]);
        let af: StepFn<f64> = a.convert();
        let nu = norming_unitary(&af, &OrthoFamily::unit(), SplitRule::Basic).unwrap();
        assert_eq!(
            nu.unitary.breakpoints(),
            &[ratio(0, 1), ratio(1, 2), ratio(1, 1)]
        );
        assert!((nu.alpha - 2.0 / 3.0).abs() < 1e-15);
    }
}
