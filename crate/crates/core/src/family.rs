//! Orthonormal families and orthogonal projection onto their span.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stepfn::StepFn;

/// Ordered orthonormal list whose first member is the constant 1.
///
/// Used for the subspaces grown during pursuit and for the basis being
/// constructed. Members pushed through [`OrthoFamily::push`] are checked
/// against every existing member; exact scalars require exact equality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(transparent)]
pub struct OrthoFamily<T> {
    members: Vec<StepFn<T>>,
}

impl<T: Scalar> OrthoFamily<T> {
    /// The family `{1}`.
    pub fn unit() -> Self {
        OrthoFamily {
            members: vec![StepFn::one()],
        }
    }

    /// Checks the full Gram matrix and that member 0 is the constant 1.
    pub fn from_members(members: Vec<StepFn<T>>) -> Result<Self> {
        let fam = Self::assume_orthonormal(members);
        if let Some(w) = fam.gram_violation() {
            return Err(Error::Precondition(format!(
                "family not orthonormal: <e{}, e{}> = {}",
                w.0,
                w.1,
                w.2.encode()
            )));
        }
        if fam.members.first() != Some(&StepFn::one()) {
            return Err(Error::Precondition(
                "family member 0 must be the constant 1".into(),
            ));
        }
        Ok(fam)
    }

    /// Wraps members without checking. Used when loading artifacts that are
    /// verified separately.
    pub fn assume_orthonormal(members: Vec<StepFn<T>>) -> Self {
        OrthoFamily { members }
    }

    pub fn members(&self) -> &[StepFn<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Appends `u` after checking `⟨u, e⟩ = 0` for every member and
    /// `⟨u, u⟩ = 1`.
    pub fn push(&mut self, u: StepFn<T>) -> Result<()> {
        let tol = T::IDENTITY_TOL;
        if !u.norm2_sq().near(&T::one(), tol) {
            return Err(Error::Certificate(format!(
                "new member has squared norm {}",
                u.norm2_sq().encode()
            )));
        }
        for (i, e) in self.members.iter().enumerate() {
            let ip = u.inner(e);
            if !ip.near(&T::zero(), tol) {
                return Err(Error::Certificate(format!(
                    "new member not orthogonal to e{i}: inner product {}",
                    ip.encode()
                )));
            }
        }
        self.members.push(u);
        Ok(())
    }

    /// Largest deviation of the Gram matrix from the identity, as
    /// `(i, j, ⟨e_i, e_j⟩)`, or `None` if it is the identity (exactly, or
    /// within [`Scalar::IDENTITY_TOL`] for floats).
    pub fn gram_violation(&self) -> Option<(usize, usize, T)> {
        let tol = T::IDENTITY_TOL;
        for (i, a) in self.members.iter().enumerate() {
            for (j, b) in self.members.iter().enumerate().skip(i) {
                let ip = a.inner(b);
                let target = if i == j { T::one() } else { T::zero() };
                if !ip.near(&target, tol) {
                    return Some((i, j, ip));
                }
            }
        }
        None
    }

    /// `(⟨a, e_i⟩)_i` and `a - Σ ⟨a, e_i⟩ e_i`.
    pub fn project_residual(&self, a: &StepFn<T>) -> (Vec<T>, StepFn<T>) {
        let coeffs: Vec<T> = self.members.iter().map(|e| a.inner(e)).collect();
        let mut terms = vec![(T::one(), a)];
        terms.extend(
            coeffs
                .iter()
                .zip(&self.members)
                .map(|(c, e)| (-c.clone(), e)),
        );
        (coeffs.clone(), StepFn::lin_comb(&terms))
    }

    /// Squared distance from `a` to the span, computed from the residual.
    pub fn dist_sq(&self, a: &StepFn<T>) -> T {
        self.project_residual(a).1.norm2_sq()
    }

    pub fn span_element(&self, coeffs: &[T]) -> StepFn<T> {
        let terms: Vec<_> = coeffs.iter().cloned().zip(&self.members).collect();
        StepFn::lin_comb(&terms)
    }
}

impl<T: Scalar> Default for OrthoFamily<T> {
    fn default() -> Self {
        Self::unit()
    }
}

/// Checks orthogonality of `a` to every member; returns the first offending
/// index and inner product.
pub fn orthogonality_violation<T: Scalar>(
    a: &StepFn<T>,
    fam: &OrthoFamily<T>,
    tol: f64,
) -> Option<(usize, T)> {
    fam.members()
        .iter()
        .enumerate()
        .map(|(i, e)| (i, a.inner(e)))
        .find(|(_, ip)| !ip.near(&T::zero(), tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};
    use crate::stepfn::SAUnitaryFn;

    type F = StepFn<Rational>;

    #[test]
    fn projecting_constant_onto_unit_family() {
        let fam = OrthoFamily::<Rational>::unit();
        let (coeffs, res) = fam.project_residual(&F::one());
        assert_eq!(coeffs, vec![ratio(1, 1)]);
        assert!(res.is_zero());
    }

    #[test]
    fn orthogonal_target_is_its_own_residual() {
        let fam = OrthoFamily::<Rational>::unit();
        let r = SAUnitaryFn::<Rational>::rademacher(2).into_stepfn();
        let (coeffs, res) = fam.project_residual(&r);
        assert_eq!(coeffs, vec![ratio(0, 1)]);
        assert_eq!(res, r);
    }

    #[test]
    fn half_indicator_residual() {
        // χ_[0,1/2) - 1/2 = (1/2, -1/2) on halves.
        let fam = OrthoFamily::<Rational>::unit();
        let a = F::indicator(ratio(0, 1), ratio(1, 2)).unwrap();
        let (coeffs, res) = fam.project_residual(&a);
        assert_eq!(coeffs, vec![ratio(1, 2)]);
        assert_eq!(res.breakpoints(), &[ratio(0, 1), ratio(1, 2), ratio(1, 1)]);
        assert_eq!(res.values(), &[ratio(1, 2), ratio(-1, 2)]);
    }

    #[test]
    fn from_members_rejects_non_orthonormal() {
        let half = F::constant(ratio(1, 2));
        assert!(matches!(
            OrthoFamily::from_members(vec![F::one(), half]),
            Err(Error::Precondition(_))
        ));
        let r1 = SAUnitaryFn::<Rational>::rademacher(1).into_stepfn();
        assert!(matches!(
            OrthoFamily::from_members(vec![r1.clone()]),
            Err(Error::Precondition(_))
        ));
        let fam = OrthoFamily::from_members(vec![F::one(), r1]).unwrap();
        assert_eq!(fam.len(), 2);
    }

    #[test]
    fn push_checks_new_member() {
        let mut fam = OrthoFamily::<Rational>::unit();
        assert!(fam
            .push(F::indicator(ratio(0, 1), ratio(1, 2)).unwrap())
            .is_err());
        fam.push(SAUnitaryFn::rademacher(1).into_stepfn()).unwrap();
        assert!(fam.push(SAUnitaryFn::rademacher(1).into_stepfn()).is_err());
        fam.push(SAUnitaryFn::rademacher(2).into_stepfn()).unwrap();
        assert!(fam.gram_violation().is_none());
    }
}
