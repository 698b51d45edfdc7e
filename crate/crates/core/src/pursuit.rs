//! Greedy pursuit by norming unitaries.
//!
//! Starting from the residual `a₀` of `a` against a family `F`, repeatedly
//! take the norming unitary `u_k ⊥ span(F, u₁, …, u_{k-1})` of the current
//! residual and subtract `α_k u_k`. Orthogonality gives the exact energy
//! decrement `‖a_k‖₂² = ‖a_{k-1}‖₂² - α_k²`, and since `α_k` is bounded
//! below while the residual stays above `ε`, the loop terminates.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::family::OrthoFamily;
use crate::lyapunov::{norming_unitary, SplitRule};
use crate::scalar::{from_usize, Scalar};
use crate::stepfn::{SAUnitaryFn, StepFn};

/// Default ceiling on the number of cells of any residual or unitary.
pub const DEFAULT_CELL_CEILING: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PursuitOptions {
    pub rule: SplitRule,
    /// Abort with [`Error::CellCeiling`] once a residual or unitary exceeds
    /// this many cells.
    pub cell_ceiling: Option<usize>,
}

impl Default for PursuitOptions {
    fn default() -> Self {
        PursuitOptions {
            rule: SplitRule::Basic,
            cell_ceiling: Some(DEFAULT_CELL_CEILING),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PursuitStep<T> {
    /// 1-based iteration index.
    pub k: usize,
    pub alpha: T,
    pub unitary: SAUnitaryFn<T>,
    pub norm2_sq_after: T,
    pub norm_inf_after: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PursuitTrace<T> {
    pub epsilon: T,
    pub norm2_sq_initial: T,
    pub norm_inf_initial: T,
    pub iterations: Vec<PursuitStep<T>>,
}

/// Result of [`pursue`].
#[derive(Clone, Debug, PartialEq)]
pub struct Pursuit<T> {
    pub trace: PursuitTrace<T>,
    /// `⟨a, e_i⟩` for the members of the input family.
    pub coefficients: Vec<T>,
    pub residual: StepFn<T>,
    /// Input family followed by the new unitaries.
    pub family: OrthoFamily<T>,
}

impl<T: Scalar> Pursuit<T> {
    pub fn units(&self) -> impl Iterator<Item = &SAUnitaryFn<T>> {
        self.trace.iterations.iter().map(|s| &s.unitary)
    }

    pub fn num_units(&self) -> usize {
        self.trace.iterations.len()
    }
}

fn above_threshold<T: Scalar>(energy: &T, eps_sq: &T) -> bool {
    if T::EXACT {
        energy >= eps_sq
    } else {
        // A hair of slack so that a float energy landing one ulp under an
        // exact boundary value still iterates like the exact model.
        energy.to_f64() >= eps_sq.to_f64() * (1.0 - 1e-12)
    }
}

/// Pairwise orthogonal self-adjoint unitaries `u_1..u_n ⊥ fam` such that
/// the residual of `a` against `span(fam, u_1..u_n)` has `‖·‖₂ < ε`.
pub fn pursue<T: Scalar>(
    a: &StepFn<T>,
    fam: &OrthoFamily<T>,
    epsilon: &T,
    opts: &PursuitOptions,
) -> Result<Pursuit<T>> {
    if *epsilon <= T::zero() {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {}",
            epsilon.encode()
        )));
    }
    if let Some((i, j, ip)) = fam.gram_violation() {
        return Err(Error::Precondition(format!(
            "family not orthonormal: <e{i}, e{j}> = {}",
            ip.encode()
        )));
    }
    let eps_sq = epsilon.clone() * epsilon.clone();
    let (coefficients, mut residual) = fam.project_residual(a);
    let mut energy = residual.norm2_sq();
    let mut trace = PursuitTrace {
        epsilon: epsilon.clone(),
        norm2_sq_initial: energy.clone(),
        norm_inf_initial: residual.norm_inf(),
        iterations: Vec::new(),
    };
    let mut family = fam.clone();
    while above_threshold(&energy, &eps_sq) {
        let nu = norming_unitary(&residual, &family, opts.rule)?;
        check_ceiling(nu.unitary.num_cells(), opts.cell_ceiling)?;
        residual = StepFn::lin_comb(&[
            (T::one(), &residual),
            (-nu.alpha.clone(), nu.unitary.as_stepfn()),
        ]);
        check_ceiling(residual.num_cells(), opts.cell_ceiling)?;
        family.push(nu.unitary.as_stepfn().clone())?;
        energy = residual.norm2_sq();
        trace.iterations.push(PursuitStep {
            k: trace.iterations.len() + 1,
            alpha: nu.alpha,
            unitary: nu.unitary,
            norm2_sq_after: energy.clone(),
            norm_inf_after: residual.norm_inf(),
        });
    }
    Ok(Pursuit {
        trace,
        coefficients,
        residual,
        family,
    })
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

/// One named pass/fail check with a witness on failure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl Check {
    pub fn pass(name: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: true,
            witness: None,
        }
    }

    pub fn fail(name: impl Into<String>, witness: String) -> Self {
        Check {
            name: name.into(),
            passed: false,
            witness: Some(witness),
        }
    }

    pub(crate) fn from_first_failure(name: &str, failure: Option<String>) -> Self {
        match failure {
            None => Check::pass(name),
            Some(w) => Check::fail(name, w),
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

impl<T: Scalar> PursuitTrace<T> {
    /// The scalar inequalities of the termination argument, step by step:
    /// energy identity, strict decrease, nonzero `α`, Bessel bound, growth
    /// bound on `‖a_k‖∞` and its Cauchy–Schwarz companion, the final
    /// threshold, and the a-priori iteration bound.
    pub fn check_inequalities(&self) -> Vec<Check> {
        let tol = T::IDENTITY_TOL;
        let mut energy_identity = None;
        let mut decrease = None;
        let mut nonzero = None;
        let mut bessel = None;
        let mut growth = None;
        let mut cauchy_schwarz = None;

        let mut prev = self.norm2_sq_initial.clone();
        let mut sum_sq = T::zero();
        let mut sum_abs = T::zero();
        for step in &self.iterations {
            let alpha_sq = step.alpha.clone() * step.alpha.clone();
            sum_sq = sum_sq + alpha_sq.clone();
            sum_abs = sum_abs + step.alpha.abs();
            let k = step.k;
            let expected = prev.clone() - alpha_sq;
            if energy_identity.is_none() && !step.norm2_sq_after.near(&expected, tol) {
                energy_identity = Some(format!(
                    "k={k}: {} != {} - alpha^2 = {}",
                    step.norm2_sq_after.encode(),
                    prev.encode(),
                    expected.encode()
                ));
            }
            if decrease.is_none() && step.norm2_sq_after >= prev {
                decrease = Some(format!(
                    "k={k}: {} >= {}",
                    step.norm2_sq_after.encode(),
                    prev.encode()
                ));
            }
            if nonzero.is_none() && step.alpha.is_zero() {
                nonzero = Some(format!("k={k}: alpha = 0"));
            }
            if bessel.is_none() && !sum_sq.le_tol(&self.norm2_sq_initial, tol) {
                bessel = Some(format!(
                    "k={k}: sum alpha^2 = {} > {}",
                    sum_sq.encode(),
                    self.norm2_sq_initial.encode()
                ));
            }
            let bound = self.norm_inf_initial.clone() + sum_abs.clone();
            if growth.is_none() && !step.norm_inf_after.le_tol(&bound, tol) {
                growth = Some(format!(
                    "k={k}: |a_k|_inf = {} > {}",
                    step.norm_inf_after.encode(),
                    bound.encode()
                ));
            }
            let lhs = sum_abs.clone() * sum_abs.clone();
            let rhs = from_usize::<T>(k) * sum_sq.clone();
            if cauchy_schwarz.is_none() && !lhs.le_tol(&rhs, tol * k as f64) {
                cauchy_schwarz = Some(format!(
                    "k={k}: (sum |alpha|)^2 = {} > k * sum alpha^2 = {}",
                    lhs.encode(),
                    rhs.encode()
                ));
            }
            prev = step.norm2_sq_after.clone();
        }

        let eps_sq = self.epsilon.clone() * self.epsilon.clone();
        let final_ok = if T::EXACT {
            prev < eps_sq
        } else {
            prev.to_f64() < eps_sq.to_f64()
        };
        let threshold = if final_ok {
            None
        } else {
            Some(format!(
                "final |a_n|_2^2 = {} >= eps^2 = {}",
                prev.encode(),
                eps_sq.encode()
            ))
        };

        let n = self.iterations.len() as u64;
        let bound_check = if n == 0 {
            None
        } else {
            match iteration_bound(
                &self.norm2_sq_initial,
                &self.norm_inf_initial,
                &self.epsilon,
            ) {
                Ok(bound) if n <= bound => None,
                Ok(bound) => Some(format!("{n} iterations > bound {bound}")),
                Err(e) => Some(e.to_string()),
            }
        };

        vec![
            Check::from_first_failure("energy_identity", energy_identity),
            Check::from_first_failure("strict_decrease", decrease),
            Check::from_first_failure("alpha_nonzero", nonzero),
            Check::from_first_failure("bessel_bound", bessel),
            Check::from_first_failure("sup_norm_growth", growth),
            Check::from_first_failure("cauchy_schwarz", cauchy_schwarz),
            Check::from_first_failure("final_threshold", threshold),
            Check::from_first_failure("iteration_bound", bound_check),
        ]
    }
}

impl<T: Scalar> Pursuit<T> {
    /// Every identity of the run: the scalar inequalities of the trace plus
    /// the orthogonality ledger and the exact decomposition
    /// `a = P_F a + Σ α_k u_k + residual`.
    pub fn certify(&self, a: &StepFn<T>, fam: &OrthoFamily<T>) -> Vec<Check> {
        let tol = T::IDENTITY_TOL;
        let mut checks = self.trace.check_inequalities();

        let units: Vec<&StepFn<T>> = self.units().map(|u| u.as_stepfn()).collect();
        let mut ortho = None;
        'outer: for (i, u) in units.iter().enumerate() {
            for (j, v) in units.iter().enumerate().skip(i) {
                let ip = u.inner(v);
                let target = if i == j { T::one() } else { T::zero() };
                if !ip.near(&target, tol) {
                    ortho = Some(format!("<u{}, u{}> = {}", i + 1, j + 1, ip.encode()));
                    break 'outer;
                }
            }
            for (j, e) in fam.members().iter().enumerate() {
                let ip = u.inner(e);
                if !ip.near(&T::zero(), tol) {
                    ortho = Some(format!("<u{}, e{j}> = {}", i + 1, ip.encode()));
                    break 'outer;
                }
            }
        }
        checks.push(Check::from_first_failure("unitaries_orthonormal", ortho));

        let mut residual_orth = None;
        for (name, v) in fam
            .members()
            .iter()
            .enumerate()
            .map(|(j, e)| (format!("e{j}"), e))
            .chain(
                units
                    .iter()
                    .enumerate()
                    .map(|(i, u)| (format!("u{}", i + 1), *u)),
            )
        {
            let ip = self.residual.inner(v);
            if !ip.near(&T::zero(), tol) {
                residual_orth = Some(format!("<residual, {name}> = {}", ip.encode()));
                break;
            }
        }
        checks.push(Check::from_first_failure(
            "residual_orthogonal",
            residual_orth,
        ));

        let mut terms: Vec<(T, &StepFn<T>)> = vec![(T::one(), a), (-T::one(), &self.residual)];
        terms.extend(
            self.coefficients
                .iter()
                .zip(fam.members())
                .map(|(c, e)| (-c.clone(), e)),
        );
        terms.extend(
            self.trace
                .iterations
                .iter()
                .map(|s| (-s.alpha.clone(), s.unitary.as_stepfn())),
        );
        let defect = StepFn::lin_comb(&terms);
        let decomposition = if T::EXACT {
            (!defect.is_zero()).then(|| format!("a - Pa - sum alpha u - r = {defect}"))
        } else {
            let d = defect.norm_inf().to_f64();
            (d > tol).then(|| format!("sup |a - Pa - sum alpha u - r| = {d:e}"))
        };
        checks.push(Check::from_first_failure("decomposition", decomposition));
        checks
    }
}

/// Above this many terms the series is continued with its integral.
const DIRECT_SUMMATION_LIMIT: u64 = 1 << 20;

/// Minimal `N` with `Σ_{k=1}^{N} ε⁴ / (M₀ + √(k-1)·‖a₀‖₂)² > ‖a₀‖₂²`, or 0
/// when `ε² > ‖a₀‖₂²`. Saturates at `u64::MAX`.
pub fn minimal_iteration_count(norm2_sq: f64, norm_inf: f64, epsilon: f64) -> Result<u64> {
    if !(norm2_sq > 0.0 && norm_inf > 0.0 && epsilon > 0.0) {
        return Err(Error::Domain(format!(
            "iteration bound needs positive arguments, got ({norm2_sq}, {norm_inf}, {epsilon})"
        )));
    }
    if epsilon * epsilon > norm2_sq {
        return Ok(0);
    }
    let c = epsilon.powi(4);
    let s = norm2_sq.sqrt();
    let m = norm_inf;
    let term = |k: u64| {
        let d = m + ((k - 1) as f64).sqrt() * s;
        c / (d * d)
    };
    let mut sum = 0.0;
    for k in 1..=DIRECT_SUMMATION_LIMIT {
        sum += term(k);
        if sum > norm2_sq {
            return Ok(k);
        }
    }
    // Tail by the midpoint rule: with g(x) = c/(m + s√x)² the terms
    // k = K+1..N sum to about ∫_{K-1/2}^{N-1/2} g, and
    // ∫ g = (2c/s²)(ln(m + s√x) + m/(m + s√x)).
    let primitive = |x: f64| {
        let y = m + s * x.sqrt();
        y.ln() + m / y
    };
    let x0 = DIRECT_SUMMATION_LIMIT as f64 - 0.5;
    let target = primitive(x0) + (norm2_sq - sum) * s * s / (2.0 * c);
    if !target.is_finite() || target > 700.0 {
        return Ok(u64::MAX);
    }
    // primitive is increasing; bisect in x.
    let (mut lo, mut hi) = (x0, 2.0 * x0);
    while primitive(hi) <= target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() || hi >= u64::MAX as f64 {
            return Ok(u64::MAX);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if primitive(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let n = (hi + 0.5).ceil();
    Ok(if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    })
}

/// Safety factor applied by [`iteration_bound`] on top of the minimal count.
pub const ITERATION_BOUND_SAFETY: f64 = 1.1;

/// A-priori bound on the number of pursuit iterations, for monitoring: the
/// minimal series index from [`minimal_iteration_count`] times
/// [`ITERATION_BOUND_SAFETY`], rounded up. Termination itself never relies
/// on it.
pub fn iteration_bound<T: Scalar>(norm2_sq: &T, norm_inf: &T, epsilon: &T) -> Result<u64> {
    let n = minimal_iteration_count(norm2_sq.to_f64(), norm_inf.to_f64(), epsilon.to_f64())?;
    let scaled = (n as f64 * ITERATION_BOUND_SAFETY).ceil();
    Ok(if scaled >= u64::MAX as f64 {
        u64::MAX
    } else {
        scaled as u64
    })
}

impl<T: Scalar> Serialize for PursuitStep<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("PursuitStep", 5)?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("alpha", &self.alpha.encode())?;
        st.serialize_field("unitary", &self.unitary)?;
        st.serialize_field("norm2_sq_after", &self.norm2_sq_after.encode())?;
        st.serialize_field("norm_inf_after", &self.norm_inf_after.encode())?;
        st.end()
    }
}

impl<T: Scalar> Serialize for PursuitTrace<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Initial {
            norm2_sq: String,
            norm_inf: String,
        }
        let mut st = s.serialize_struct("PursuitTrace", 3)?;
        st.serialize_field("epsilon", &self.epsilon.encode())?;
        st.serialize_field(
            "initial",
            &Initial {
                norm2_sq: self.norm2_sq_initial.encode(),
                norm_inf: self.norm_inf_initial.encode(),
            },
        )?;
        st.serialize_field("iterations", &self.iterations)?;
        st.end()
    }
}
