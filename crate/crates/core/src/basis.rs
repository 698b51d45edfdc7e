//! Stage driver that grows an orthonormal family of self-adjoint unitaries
//! until every dyadic indicator is approximated to every dyadic precision.
//!
//! Stage `m` takes the `m`-th pair `(j, k)` of the anti-diagonal enumeration
//! of `ℕ²`, pursues the dense element `b_{j-1}` against the current family
//! with `ε = 2^{-k}`, and appends the unitaries found. After any finite number
//! of stages the family is exactly orthonormal, and every processed pair
//! carries the completeness certificate `dist²(b_{j-1}, span) < 2^{-2k}`.
//!
//! Only real spans are certified; the complex span of a real orthonormal
//! basis of the self-adjoint part is automatically the whole space.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::family::OrthoFamily;
use crate::pursuit::{pursue, Check, PursuitOptions};
use crate::scalar::{dyadic_power, Rational, Scalar};
use crate::stepfn::{SAUnitaryFn, StepFn};

/// `b_j`: `j = 0` is the constant 1; otherwise `j = 2^ℓ - 1 + i` with
/// `0 ≤ i < 2^ℓ` is the indicator of `[i/2^ℓ, (i+1)/2^ℓ)`.
pub fn dense_element<T: Scalar>(j: u64) -> StepFn<T> {
    let (level, offset) = dyadic_position(j);
    if level == 0 {
        return StepFn::one();
    }
    let den = BigInt::one() << level;
    let lo = Rational::new(BigInt::from(offset), den.clone());
    let hi = Rational::new(BigInt::from(offset + 1), den);
    StepFn::indicator(lo, hi).expect("dyadic interval inside [0,1)")
}

/// `(ℓ, i)` with `j = 2^ℓ - 1 + i`.
pub fn dyadic_position(j: u64) -> (u32, u64) {
    let level = 63 - (j + 1).leading_zeros();
    (level, j + 1 - (1u64 << level))
}

/// `m`-th pair (1-based) of the anti-diagonal order on `ℕ² \ {0}`: sums
/// `j + k = 2, 3, …`, `j` ascending within a diagonal.
pub fn pair_index(m: u64) -> Result<(u64, u64)> {
    if m == 0 {
        return Err(Error::Domain("pair index is 1-based".into()));
    }
    // Diagonal s holds s - 1 pairs; find s with (s-2)(s-1)/2 < m <= (s-1)s/2.
    let mut s = 2u64;
    let mut before = 0u64;
    while before + (s - 1) < m {
        before += s - 1;
        s += 1;
    }
    let j = m - before;
    Ok((j, s - j))
}

/// Inverse of [`pair_index`].
pub fn pair_position(j: u64, k: u64) -> u64 {
    let s = j + k;
    (s - 2) * (s - 1) / 2 + j
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord<T> {
    pub m: u64,
    pub j: u64,
    pub k: u64,
    pub units_added: usize,
    pub residual_norm2_sq: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct StageOptions {
    pub pursuit: PursuitOptions,
    /// Stages whose precision exponent exceeds this are skipped (neither
    /// run nor recorded as processed).
    pub max_k: Option<u64>,
}

/// Family, stage log, and the pairs whose certificates the construction
/// promises.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisState<T> {
    pub family: OrthoFamily<T>,
    pub stage_log: Vec<StageRecord<T>>,
    pub processed: Vec<(u64, u64)>,
}

impl<T: Scalar> Default for BasisState<T> {
    fn default() -> Self {
        BasisState {
            family: OrthoFamily::unit(),
            stage_log: Vec::new(),
            processed: Vec::new(),
        }
    }
}

impl<T: Scalar> BasisState<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs stage `m`. Returns the stage record, or `None` if the stage was
    /// skipped by `max_k`.
    pub fn advance(&mut self, m: u64, opts: &StageOptions) -> Result<Option<&StageRecord<T>>> {
        let (j, k) = pair_index(m)?;
        if opts.max_k.is_some_and(|cap| k > cap) {
            return Ok(None);
        }
        let exponent = u32::try_from(k)
            .map_err(|_| Error::Domain(format!("precision exponent {k} too large")))?;
        let eps = T::from_rational(&dyadic_power(exponent));
        let target = dense_element::<T>(j - 1);
        let run = pursue(&target, &self.family, &eps, &opts.pursuit)
            .map_err(|e| e.with_stage(m as usize))?;
        let units_added = run.num_units();
        let residual_norm2_sq = run.residual.norm2_sq();
        self.family = run.family;
        if !self.processed.contains(&(j, k)) {
            self.processed.push((j, k));
        }
        self.stage_log.push(StageRecord {
            m,
            j,
            k,
            units_added,
            residual_norm2_sq,
        });
        Ok(self.stage_log.last())
    }
}

/// Runs stages `1..=stages` from the family `{1}`.
pub fn run_stages<T: Scalar>(stages: u64, opts: &StageOptions) -> Result<BasisState<T>> {
    let mut state = BasisState::new();
    for m in 1..=stages {
        state.advance(m, opts)?;
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Pass,
    Fail,
    /// The pair was never processed, so the construction makes no promise.
    NotCertified,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCertificate {
    pub j: u64,
    pub k: u64,
    pub status: CertificateStatus,
    pub dist_sq: String,
    pub bound: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisReport {
    pub passed: bool,
    pub family_size: usize,
    pub checks: Vec<Check>,
    pub certificates: Vec<PairCertificate>,
}

/// Maps `f` over `items` on up to `jobs` threads, preserving order.
pub(crate) fn par_map<I: Sync, O: Send>(
    items: &[I],
    jobs: usize,
    f: impl Fn(&I) -> O + Sync,
) -> Vec<O> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<O>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// First off-identity Gram entry in row-major order.
fn gram_witness<T: Scalar>(members: &[StepFn<T>], jobs: usize) -> Option<(usize, usize, T)> {
    let tol = T::IDENTITY_TOL;
    let rows: Vec<usize> = (0..members.len()).collect();
    par_map(&rows, jobs, |&i| {
        (i..members.len()).find_map(|j| {
            let ip = members[i].inner(&members[j]);
            let target = if i == j { T::one() } else { T::zero() };
            (!ip.near(&target, tol)).then_some((i, j, ip))
        })
    })
    .into_iter()
    .flatten()
    .next()
}

/// Checks (i) the Gram matrix is the identity, (ii) member 0 is the constant
/// 1 and every member is `±1`-valued, (iii) `dist²(b_{j-1}, span) < 2^{-2k}`
/// for every processed `(j, k)` with `j ≤ j_max`, `k ≤ k_max`. Pairs in range
/// that were never processed are reported as not certified.
pub fn verify_basis<T: Scalar>(state: &BasisState<T>, j_max: u64, k_max: u64) -> BasisReport {
    verify_basis_with_jobs(state, j_max, k_max, 1)
}

pub fn verify_basis_with_jobs<T: Scalar>(
    state: &BasisState<T>,
    j_max: u64,
    k_max: u64,
    jobs: usize,
) -> BasisReport {
    let members = state.family.members();
    let mut checks = Vec::new();

    checks.push(match gram_witness(members, jobs) {
        None => Check::pass("gram_identity"),
        Some((i, j, v)) => Check::fail("gram_identity", format!("<e{i}, e{j}> = {}", v.encode())),
    });

    checks.push(if members.first() == Some(&StepFn::one()) {
        Check::pass("member0_is_one")
    } else {
        Check::fail("member0_is_one", "member 0 is not the constant 1".into())
    });

    let witness = members.iter().enumerate().find_map(|(idx, f)| {
        f.first_non_unitary_cell().map(|(cell, lo, hi, v)| {
            format!(
                "member {idx}, cell {cell} [{lo}, {hi}): value {}",
                v.encode()
            )
        })
    });
    checks.push(match witness {
        None => Check::pass("self_adjoint_unitary"),
        Some(w) => Check::fail("self_adjoint_unitary", w),
    });

    let js: Vec<u64> = (1..=j_max).collect();
    let distances = par_map(&js, jobs, |&j| {
        state.family.dist_sq(&dense_element::<T>(j - 1))
    });
    let tol = T::IDENTITY_TOL;
    let mut certificates = Vec::new();
    for (j, dist) in js.iter().zip(&distances) {
        for k in 1..=k_max {
            let bound = T::from_rational(&dyadic_power(2 * k as u32));
            let holds = if T::EXACT {
                *dist < bound
            } else {
                dist.to_f64() < bound.to_f64() + tol
            };
            let status = if !state.processed.contains(&(*j, k)) {
                CertificateStatus::NotCertified
            } else if holds {
                CertificateStatus::Pass
            } else {
                CertificateStatus::Fail
            };
            certificates.push(PairCertificate {
                j: *j,
                k,
                status,
                dist_sq: dist.encode(),
                bound: bound.encode(),
            });
        }
    }
    let passed = checks.iter().all(|c| c.passed)
        && certificates
            .iter()
            .all(|c| c.status != CertificateStatus::Fail);
    BasisReport {
        passed,
        family_size: members.len(),
        checks,
        certificates,
    }
}

/// `τ(u x u) = τ(x)` for each `x`: every self-adjoint unitary is a trace
/// vector. One check per `x`.
pub fn trace_vector_certificate<T: Scalar>(u: &SAUnitaryFn<T>, xs: &[StepFn<T>]) -> Vec<Check> {
    let tol = T::IDENTITY_TOL;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let lhs = u.mul(x).mul(u).trace();
            let rhs = x.trace();
            let name = format!("trace_vector[{i}]");
            if lhs.near(&rhs, tol) {
                Check::pass(name)
            } else {
                Check::fail(
                    name,
                    format!("tau(uxu) = {} != tau(x) = {}", lhs.encode(), rhs.encode()),
                )
            }
        })
        .collect()
}

/// Tag written into every abelian basis file.
pub const ABELIAN_MODEL: &str = "abelian";

#[derive(Serialize, Deserialize)]
pub(crate) struct StageRecordRepr {
    pub(crate) m: u64,
    pub(crate) j: u64,
    pub(crate) k: u64,
    pub(crate) units_added: usize,
    pub(crate) residual_norm2_sq: String,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct BasisStateRepr<T> {
    model: String,
    family: Vec<StepFn<T>>,
    stage_log: Vec<StageRecordRepr>,
    processed: Vec<(u64, u64)>,
}

impl<T: Scalar> Serialize for BasisState<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BasisStateRepr {
            model: ABELIAN_MODEL.to_string(),
            family: self.family.members().to_vec(),
            stage_log: self
                .stage_log
                .iter()
                .map(|r| StageRecordRepr {
                    m: r.m,
                    j: r.j,
                    k: r.k,
                    units_added: r.units_added,
                    residual_norm2_sq: r.residual_norm2_sq.encode(),
                })
                .collect(),
            processed: self.processed.clone(),
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for BasisState<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = BasisStateRepr::<T>::deserialize(d)?;
        if repr.model != ABELIAN_MODEL {
            return Err(D::Error::custom(format!(
                "expected model \"{ABELIAN_MODEL}\", found {:?}",
                repr.model
            )));
        }
        let stage_log = repr
            .stage_log
            .into_iter()
            .map(|r| {
                let residual_norm2_sq = T::decode(&r.residual_norm2_sq).ok_or_else(|| {
                    D::Error::custom(format!("bad value {:?}", r.residual_norm2_sq))
                })?;
                Ok(StageRecord {
                    m: r.m,
                    j: r.j,
                    k: r.k,
                    units_added: r.units_added,
                    residual_norm2_sq,
                })
            })
            .collect::<std::result::Result<_, D::Error>>()?;
        Ok(BasisState {
            // Verified separately by verify_basis.
            family: OrthoFamily::assume_orthonormal(repr.family),
            stage_log,
            processed: repr.processed,
        })
    }
}

impl<T: Scalar> BasisState<T> {
    /// Pretty JSON with a trailing newline; identical states give identical
    /// bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Squared distance of each dense element `b_0..b_{j_max-1}` to the span.
    pub fn distances(&self, j_max: u64) -> BTreeMap<u64, T> {
        (1..=j_max)
            .map(|j| (j, self.family.dist_sq(&dense_element::<T>(j - 1))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    type F = StepFn<Rational>;

    #[test]
    fn dense_elements() {
        assert_eq!(dense_element::<Rational>(0), F::one());
        assert_eq!(
            dense_element::<Rational>(1),
            F::indicator(ratio(0, 1), ratio(1, 2)).unwrap()
        );
        assert_eq!(
            dense_element::<Rational>(4),
            F::indicator(ratio(1, 4), ratio(2, 4)).unwrap()
        );
        assert_eq!(
            dense_element::<Rational>(6),
            F::indicator(ratio(3, 4), ratio(1, 1)).unwrap()
        );
        assert_eq!(dyadic_position(7), (3, 0));
    }

    #[test]
    fn pair_enumeration() {
        assert_eq!(pair_index(1).unwrap(), (1, 1));
        assert_eq!(pair_index(2).unwrap(), (1, 2));
        assert_eq!(pair_index(3).unwrap(), (2, 1));
        assert_eq!(pair_index(4).unwrap(), (1, 3));
        assert_eq!(pair_index(15).unwrap(), (5, 1));
        assert!(pair_index(0).is_err());
        for m in 1..500 {
            let (j, k) = pair_index(m).unwrap();
            assert_eq!(pair_position(j, k), m);
        }
    }

    #[test]
    fn first_stage_adds_nothing() {
        let state = run_stages::<Rational>(1, &StageOptions::default()).unwrap();
        assert_eq!(state.family.len(), 1);
        assert_eq!(state.stage_log[0].units_added, 0);
        assert_eq!(state.processed, vec![(1, 1)]);
    }

    #[test]
    fn half_indicator_stage() {
        // Stage 3 is (j, k) = (2, 1): b_1 = χ_[0,1/2), ε = 1/2, residual
        // energy 1/4 = ε² so the loop runs once and adds ±1 on halves.
        let state = run_stages::<Rational>(3, &StageOptions::default()).unwrap();
        let rec = &state.stage_log[2];
        assert_eq!((rec.j, rec.k, rec.units_added), (2, 1, 1));
        assert_eq!(rec.residual_norm2_sq, ratio(0, 1));
        let u = &state.family.members()[1];
        assert_eq!(u.breakpoints(), &[ratio(0, 1), ratio(1, 2), ratio(1, 1)]);
        assert_eq!(u.values(), &[ratio(1, 1), ratio(-1, 1)]);
    }

    #[test]
    fn reprocessing_is_idempotent() {
        let mut state = run_stages::<Rational>(6, &StageOptions::default()).unwrap();
        let before = state.family.len();
        // Pair (2, 2) is stage 5; rerunning it adds nothing.
        state.advance(5, &StageOptions::default()).unwrap();
        assert_eq!(state.family.len(), before);
        assert_eq!(state.stage_log.last().unwrap().units_added, 0);
    }

    #[test]
    fn fresh_state_verifies() {
        let report = verify_basis(&BasisState::<Rational>::new(), 2, 2);
        assert!(report.passed);
        assert_eq!(report.family_size, 1);
        assert!(report
            .certificates
            .iter()
            .all(|c| c.status == CertificateStatus::NotCertified));
    }

    #[test]
    fn built_state_verifies_and_tampering_is_caught() {
        let state = run_stages::<Rational>(10, &StageOptions::default()).unwrap();
        let report = verify_basis_with_jobs(&state, 4, 4, 3);
        assert!(report.passed, "{report:?}");
        assert!(report
            .certificates
            .iter()
            .any(|c| c.status == CertificateStatus::Pass));

        let mut members = state.family.members().to_vec();
        let u = &members[1];
        let mut vals = u.values().to_vec();
        vals[0] = ratio(2, 1);
        members[1] = F::new(u.breakpoints().to_vec(), vals).unwrap();
        let tampered = BasisState {
            family: OrthoFamily::assume_orthonormal(members),
            ..state
        };
        let report = verify_basis(&tampered, 4, 4);
        assert!(!report.passed);
        let sau = report
            .checks
            .iter()
            .find(|c| c.name == "self_adjoint_unitary")
            .unwrap();
        assert!(!sau.passed);
        assert!(sau.witness.as_ref().unwrap().contains("member 1, cell 0"));
    }

    #[test]
    fn max_k_skips_stages() {
        let opts = StageOptions {
            max_k: Some(1),
            ..Default::default()
        };
        let state = run_stages::<Rational>(6, &opts).unwrap();
        assert!(state.processed.iter().all(|&(_, k)| k == 1));
        assert_eq!(state.processed.len(), 3);
    }

    #[test]
    fn trace_vectors() {
        let x = F::indicator(ratio(0, 1), ratio(1, 2)).unwrap();
        let r1 = SAUnitaryFn::<Rational>::rademacher(1);
        let checks = trace_vector_certificate(&r1, std::slice::from_ref(&x));
        assert!(checks[0].passed);
        assert_eq!(r1.mul(&x).mul(&r1).trace(), ratio(1, 2));
        assert!(trace_vector_certificate(&SAUnitaryFn::one(), &[x])[0].passed);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let state = run_stages::<Rational>(8, &StageOptions::default()).unwrap();
        let text = state.to_json();
        let back = BasisState::<Rational>::from_json(&text).unwrap();
        assert_eq!(back, state);
        assert_eq!(back.to_json(), text);
        assert!(text.contains("\"model\": \"abelian\""));
        assert!(BasisState::<Rational>::from_json(&text.replace("abelian", "matrix")).is_err());
    }
}
