use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::extract::nc_norming_unitary;
use super::matfn::MatStepFn;
use super::{BundleReal, Tolerances};
use crate::error::{Error, Result};
use crate::pursuit::{Check, PursuitOptions};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct BundleStep<R: BundleReal> {
    /// 1-based iteration index.
    pub k: usize,
    pub alpha: R,
    pub unitary: MatStepFn<R>,
    pub norm2_sq_after: R,
    pub norm_inf_after: R,
}

/// Result of [`nc_pursue`].
#[derive(Clone, Debug, PartialEq)]
pub struct BundlePursuit<R: BundleReal> {
    pub epsilon: R,
    pub norm2_sq_initial: R,
    pub norm_inf_initial: R,
    pub iterations: Vec<BundleStep<R>>,
    /// `⟨a, e_i⟩` for the members of the input family.
    pub coefficients: Vec<R>,
    pub residual: MatStepFn<R>,
    /// Input family followed by the new unitaries.
    pub family: Vec<MatStepFn<R>>,
}

impl<R: BundleReal> BundlePursuit<R> {
    pub fn num_units(&self) -> usize {
        self.iterations.len()
    }

    pub fn units(&self) -> impl Iterator<Item = &MatStepFn<R>> {
        self.iterations.iter().map(|s| &s.unitary)
    }
}

/// First Gram entry off the identity by more than `tol`.
pub fn nc_gram_violation<R: BundleReal>(
    members: &[MatStepFn<R>],
    tol: f64,
) -> Result<Option<(usize, usize, f64)>> {
    for (i, x) in members.iter().enumerate() {
        for (j, y) in members.iter().enumerate().skip(i) {
            let ip = Scalar::to_f64(&x.nc_inner(y)?);
            let target = if i == j { 1.0 } else { 0.0 };
            if (ip - target).abs() > tol {
                return Ok(Some((i, j, ip)));
            }
        }
    }
    Ok(None)
}

fn project_residual<R: BundleReal>(
    a: &MatStepFn<R>,
    fam: &[MatStepFn<R>],
) -> Result<(Vec<R>, MatStepFn<R>)> {
    let coefficients = fam
        .iter()
        .map(|e| a.nc_inner(e))
        .collect::<Result<Vec<_>>>()?;
    let mut terms = vec![(R::one(), a)];
    terms.extend(coefficients.iter().zip(fam).map(|(c, e)| (-*c, e)));
    Ok((coefficients, MatStepFn::lin_comb(&terms)?))
}

/// Pairwise orthogonal self-adjoint unitaries `u_1..u_n ⊥ fam` with the
/// residual of `a` against `span(fam, u_1..u_n)` below `ε` in `‖·‖₂`.
///
/// Each step checks the energy identity within `tols.energy` and aborts
/// with [`Error::Tolerance`] on drift.
pub fn nc_pursue<R: BundleReal>(
    a: &MatStepFn<R>,
    fam: &[MatStepFn<R>],
    epsilon: R,
    tols: &Tolerances,
    opts: &PursuitOptions,
) -> Result<BundlePursuit<R>> {
    if epsilon <= R::zero() {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {}",
            epsilon.encode()
        )));
    }
    if let Some(e) = fam.iter().find(|e| e.n() != a.n()) {
        return Err(Error::Dimension(format!(
            "family member of size {} against target of size {}",
            e.n(),
            a.n()
        )));
    }
    if let Some((i, j, ip)) = nc_gram_violation(fam, tols.orth)? {
        return Err(Error::Precondition(format!(
            "family not orthonormal: <e{i}, e{j}> = {ip:e}"
        )));
    }
    let eps_sq = Scalar::to_f64(&(epsilon * epsilon));
    let (coefficients, mut residual) = project_residual(a, fam)?;
    let mut energy = residual.norm2_sq();
    let mut run = BundlePursuit {
        epsilon,
        norm2_sq_initial: energy,
        norm_inf_initial: residual.nc_norm_inf(),
        iterations: Vec::new(),
        coefficients,
        residual: MatStepFn::zero(a.n()),
        family: fam.to_vec(),
    };
    while Scalar::to_f64(&energy) >= eps_sq * (1.0 - 1e-12) {
        let nu = nc_norming_unitary(&residual, &run.family, tols, opts.rule)?;
        check_ceiling(nu.unitary.num_cells(), opts.cell_ceiling)?;
        residual = MatStepFn::lin_comb(&[(R::one(), &residual), (-nu.alpha, &nu.unitary)])?;
        check_ceiling(residual.num_cells(), opts.cell_ceiling)?;
        let after = residual.norm2_sq();
        let k = run.iterations.len() + 1;
        let drift = Scalar::to_f64(&(after - (energy - nu.alpha * nu.alpha))).abs();
        if drift > tols.energy {
            return Err(Error::Tolerance {
                check: format!("energy identity at step {k}"),
                deviation: drift,
                tolerance: tols.energy,
            });
        }
        if after >= energy {
            return Err(Error::Certificate(format!(
                "energy did not decrease at step {k}: {} >= {}",
                after.encode(),
                energy.encode()
            )));
        }
        energy = after;
        run.family.push(nu.unitary.clone());
        run.iterations.push(BundleStep {
            k,
            alpha: nu.alpha,
            unitary: nu.unitary,
            norm2_sq_after: energy,
            norm_inf_after: residual.nc_norm_inf(),
        });
    }
    run.residual = residual;
    Ok(run)
}

fn check_ceiling(cells: usize, ceiling: Option<usize>) -> Result<()> {
    match ceiling {
        Some(limit) if cells > limit => Err(Error::CellCeiling {
            cells,
            limit,
            stage: None,
        }),
        _ => Ok(()),
    }
}

impl<R: BundleReal> BundlePursuit<R> {
    /// Toleranced run checks: involution of each unitary, orthonormality of
    /// the grown family, per-step energy identity, final threshold, and the
    /// decomposition `a = P_F a + Σ α_k u_k + residual`.
    pub fn certify(&self, a: &MatStepFn<R>, tols: &Tolerances) -> Vec<Check> {
        let mut checks = Vec::new();

        let inv = self.units().enumerate().find_map(|(i, u)| {
            let d = u.involution_defect();
            (d > tols.alg).then(|| format!("|U{}^2 - I|_F = {d:e}", i + 1))
        });
        checks.push(Check::from_first_failure("unitary_involution", inv));

        let gram = match nc_gram_violation(&self.family, tols.matching) {
            Ok(None) => None,
            Ok(Some((i, j, ip))) => Some(format!("<f{i}, f{j}> = {ip:e}")),
            Err(e) => Some(e.to_string()),
        };
        checks.push(Check::from_first_failure("family_orthonormal", gram));

        let mut prev = self.norm2_sq_initial;
        let mut energy = None;
        for s in &self.iterations {
            let d = Scalar::to_f64(&(s.norm2_sq_after - (prev - s.alpha * s.alpha))).abs();
            if energy.is_none() && d > tols.energy {
                energy = Some(format!("k={}: drift {d:e}", s.k));
            }
            prev = s.norm2_sq_after;
        }
        checks.push(Check::from_first_failure("energy_identity", energy));

        let eps_sq = Scalar::to_f64(&(self.epsilon * self.epsilon));
        let fin = Scalar::to_f64(&prev);
        checks.push(Check::from_first_failure(
            "final_threshold",
            (fin >= eps_sq).then(|| format!("final |a_n|_2^2 = {fin:e} >= eps^2 = {eps_sq:e}")),
        ));

        let n0 = self.family.len() - self.iterations.len();
        let mut terms: Vec<(R, &MatStepFn<R>)> = vec![(R::one(), a), (-R::one(), &self.residual)];
        terms.extend(
            self.coefficients
                .iter()
                .zip(&self.family[..n0])
                .map(|(c, e)| (-*c, e)),
        );
        terms.extend(self.iterations.iter().map(|s| (-s.alpha, &s.unitary)));
        let decomposition = match MatStepFn::lin_comb(&terms) {
            Ok(d) => {
                let d = Scalar::to_f64(&d.nc_norm_inf());
                (d > tols.matching).then(|| format!("|a - Pa - sum alpha u - r|_inf = {d:e}"))
            }
            Err(e) => Some(e.to_string()),
        };
        checks.push(Check::from_first_failure("decomposition", decomposition));
        checks
    }
}

/// `τ(u x u) = τ(x)` within `tol` for each `x`.
pub fn nc_trace_vector_certificate<R: BundleReal>(
    u: &MatStepFn<R>,
    xs: &[MatStepFn<R>],
    tol: f64,
) -> Vec<Check> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let name = format!("trace_vector[{i}]");
            match x.sandwich(u) {
                Ok(uxu) => {
                    let (lhs, rhs) = (
                        Scalar::to_f64(&uxu.nc_trace()),
                        Scalar::to_f64(&x.nc_trace()),
                    );
                    if (lhs - rhs).abs() <= tol {
                        Check::pass(name)
                    } else {
                        Check::fail(name, format!("tau(uxu) = {lhs:e} != tau(x) = {rhs:e}"))
                    }
                }
                Err(e) => Check::fail(name, e.to_string()),
            }
        })
        .collect()
}

impl<R: BundleReal> Serialize for BundleStep<R> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BundleStep", 5)?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("alpha", &Scalar::to_f64(&self.alpha))?;
        st.serialize_field("unitary", &self.unitary)?;
        st.serialize_field("norm2_sq_after", &Scalar::to_f64(&self.norm2_sq_after))?;
        st.serialize_field("norm_inf_after", &Scalar::to_f64(&self.norm_inf_after))?;
        st.end()
    }
}

impl<R: BundleReal> Serialize for BundlePursuit<R> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Initial {
            norm2_sq: f64,
            norm_inf: f64,
        }
        let mut st = s.serialize_struct("BundlePursuit", 3)?;
        st.serialize_field("epsilon", &Scalar::to_f64(&self.epsilon))?;
        st.serialize_field(
            "initial",
            &Initial {
                norm2_sq: Scalar::to_f64(&self.norm2_sq_initial),
                norm_inf: Scalar::to_f64(&self.norm_inf_initial),
            },
        )?;
        st.serialize_field("iterations", &self.iterations)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{hermitian_unit, CMatrix};
    use crate::pursuit::all_passed;
    use crate::scalar::ratio;
    use crate::stepfn::StepFn;
    use nalgebra::Complex;

    #[test]
    fn off_diagonal_target_in_two_by_two() {
        let tols = Tolerances::default();
        let left = StepFn::<f64>::indicator(ratio(0, 1), ratio(1, 3)).unwrap();
        let a = MatStepFn::tensor(&left, &hermitian_unit::<f64>(2, 3)).unwrap();
        let fam = vec![MatStepFn::identity(2)];
        let run = nc_pursue(&a, &fam, 0.125, &tols, &PursuitOptions::default()).unwrap();
        assert!(run.num_units() >= 1);
        let checks = run.certify(&a, &tols);
        assert!(all_passed(&checks), "{checks:?}");
    }

    #[test]
    fn scalar_bundle_matches_exact_run() {
        let tols = Tolerances::default();
        let f = StepFn::<f64>::new(
            vec![ratio(0, 1), ratio(1, 3), ratio(1, 1)],
            vec![0.5, -0.25],
        )
        .unwrap();
        let a = MatStepFn::from_scalar(&f);
        let run = nc_pursue(
            &a,
            &[MatStepFn::identity(1)],
            0.125,
            &tols,
            &PursuitOptions::default(),
        )
        .unwrap();
        let exact = crate::pursuit::pursue(
            &f.convert::<crate::Rational>(),
            &crate::OrthoFamily::unit(),
            &ratio(1, 8),
            &PursuitOptions::default(),
        )
        .unwrap();
        assert_eq!(run.num_units(), exact.num_units());
        for (s, e) in run.iterations.iter().zip(&exact.trace.iterations) {
            assert!((s.alpha - Scalar::to_f64(&e.alpha)).abs() < 1e-12);
            let (sb, eb) = (s.unitary.breakpoints(), e.unitary.breakpoints());
            assert_eq!(sb.len(), eb.len());
            for (x, y) in sb.iter().zip(eb) {
                assert!((Scalar::to_f64(x) - Scalar::to_f64(y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sign_matrix_in_one_step() {
        let tols = Tolerances::default();
        let a = MatStepFn::constant(
            hermitian_unit::<f64>(2, 0) * Complex::new(2.0, 0.0) - CMatrix::identity(2, 2),
        )
        .unwrap();
        let run = nc_pursue(
            &a,
            &[MatStepFn::identity(2)],
            0.5,
            &tols,
            &PursuitOptions::default(),
        )
        .unwrap();
        assert_eq!(run.num_units(), 1);
        assert!((run.iterations[0].alpha - 1.0).abs() < 1e-14);
        assert!(run.residual.norm2_sq() < 1e-28);
        // Already below the threshold: no steps.
        let small = nc_pursue(
            &a,
            &[MatStepFn::identity(2)],
            1.5,
            &tols,
            &PursuitOptions::default(),
        )
        .unwrap();
        assert_eq!(small.num_units(), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let tols = Tolerances::default();
        let a = MatStepFn::<f64>::zero(2);
        let fam = vec![MatStepFn::identity(2)];
        assert!(nc_pursue(&a, &fam, 0.0, &tols, &PursuitOptions::default()).is_err());
        let bad = vec![MatStepFn::identity(2), MatStepFn::identity(2)];
        assert!(matches!(
            nc_pursue(&a, &bad, 0.5, &tols, &PursuitOptions::default()),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            nc_pursue(
                &a,
                &[MatStepFn::identity(3)],
                0.5,
                &tols,
                &PursuitOptions::default()
            ),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn unitaries_are_trace_vectors() {
        let z = Complex::new(0.0, 0.0);
        let o = Complex::new(1.0, 0.0);
        let swap = MatStepFn::constant(CMatrix::from_row_slice(2, 2, &[z, o, o, z])).unwrap();
        let x = MatStepFn::constant(CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(3.0, 0.0),
                Complex::new(0.5, 0.5),
                Complex::new(0.5, -0.5),
                z,
            ],
        ))
        .unwrap();
        assert!(all_passed(&nc_trace_vector_certificate(&swap, &[x], 1e-12)));
    }
}
