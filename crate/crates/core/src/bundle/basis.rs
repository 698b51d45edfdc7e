use nalgebra::Complex;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::matfn::{hermitian_defect, CMatrix, MatStepFn};
use super::pursuit::{nc_gram_violation, nc_pursue};
use super::{BundleReal, Tolerances};
use crate::basis::{
    dense_element, pair_index, par_map, BasisReport, CertificateStatus, PairCertificate,
    StageOptions, StageRecord, StageRecordRepr,
};
use crate::error::{Error, Result};
use crate::pursuit::Check;
use crate::scalar::{dyadic_power, Scalar};

/// Largest supported matrix size.
pub const MAX_N: usize = 8;

/// Tag written into every matrix-bundle basis file.
pub const MATRIX_MODEL: &str = "matrix";

/// The `idx`-th element of the real basis of Hermitian `n×n` matrices:
/// `E_ii` for `idx < n`, then for each pair `p < q` in lexicographic order
/// `E_pq + E_qp` followed by `i(E_pq - E_qp)`.
pub fn hermitian_unit<R: BundleReal>(n: usize, idx: usize) -> CMatrix<R> {
    assert!(idx < n * n, "unit index {idx} out of range for n = {n}");
    let mut m = CMatrix::<R>::zeros(n, n);
    if idx < n {
        m[(idx, idx)] = Complex::new(R::one(), R::zero());
        return m;
    }
    let r = idx - n;
    let (pair, imaginary) = (r / 2, r % 2 == 1);
    let (mut p, mut rest) = (0, pair);
    while rest >= n - 1 - p {
        rest -= n - 1 - p;
        p += 1;
    }
    let q = p + 1 + rest;
    if imaginary {
        m[(p, q)] = Complex::new(R::zero(), R::one());
        m[(q, p)] = Complex::new(R::zero(), -R::one());
    } else {
        m[(p, q)] = Complex::new(R::one(), R::zero());
        m[(q, p)] = Complex::new(R::one(), R::zero());
    }
    m
}

/// Dense element `j`: the dyadic indicator `b_{j / n²}` times the Hermitian
/// unit `j mod n²`.
pub fn bundle_dense_element<R: BundleReal>(n: usize, j: u64) -> MatStepFn<R> {
    let nn = (n * n) as u64;
    MatStepFn::tensor(
        &dense_element::<R>(j / nn),
        &hermitian_unit::<R>(n, (j % nn) as usize),
    )
    .expect("units are Hermitian")
}

/// Matrix-bundle analogue of [`crate::BasisState`].
#[derive(Clone, Debug, PartialEq)]
pub struct BundleBasisState<R: BundleReal> {
    pub n: usize,
    pub family: Vec<MatStepFn<R>>,
    pub stage_log: Vec<StageRecord<R>>,
    pub processed: Vec<(u64, u64)>,
}

impl<R: BundleReal> BundleBasisState<R> {
    /// The family `{I}` in size `n ∈ [1, MAX_N]`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(Error::Domain(format!(
                "matrix size n = {n} outside [1, {MAX_N}]"
            )));
        }
        Ok(BundleBasisState {
            n,
            family: vec![MatStepFn::identity(n)],
            stage_log: Vec::new(),
            processed: Vec::new(),
        })
    }

    /// Runs stage `m`; `None` when skipped by `max_k`.
    pub fn advance(
        &mut self,
        m: u64,
        opts: &StageOptions,
        tols: &Tolerances,
    ) -> Result<Option<&StageRecord<R>>> {
        let (j, k) = pair_index(m)?;
        if opts.max_k.is_some_and(|cap| k > cap) {
            return Ok(None);
        }
        let exponent = u32::try_from(k)
            .map_err(|_| Error::Domain(format!("precision exponent {k} too large")))?;
        let eps = R::from_rational(&dyadic_power(exponent));
        let target = bundle_dense_element::<R>(self.n, j - 1);
        let run = nc_pursue(&target, &self.family, eps, tols, &opts.pursuit)
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

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Squared distance of `dense_0..dense_{j_max-1}` to the span.
    pub fn distance(&self, j: u64) -> Result<R> {
        let b = bundle_dense_element::<R>(self.n, j - 1);
        let mut terms = vec![(R::one(), &b)];
        let coeffs = self
            .family
            .iter()
            .map(|e| b.nc_inner(e))
            .collect::<Result<Vec<_>>>()?;
        terms.extend(coeffs.iter().zip(&self.family).map(|(c, e)| (-*c, e)));
        Ok(MatStepFn::lin_comb(&terms)?.norm2_sq())
    }
}

/// Runs stages `1..=stages` from `{I}`.
pub fn run_bundle_stages<R: BundleReal>(
    n: usize,
    stages: u64,
    opts: &StageOptions,
    tols: &Tolerances,
) -> Result<BundleBasisState<R>> {
    let mut state = BundleBasisState::new(n)?;
    for m in 1..=stages {
        state.advance(m, opts, tols)?;
    }
    Ok(state)
}

/// Toleranced counterpart of [`crate::verify_basis`]: Gram matrix within
/// `tols.orth`, member 0 the identity, every member Hermitian with
/// `U² = I` within `tols.alg`, and the distance certificates within
/// `tols.matching`.
pub fn verify_bundle_basis<R: BundleReal>(
    state: &BundleBasisState<R>,
    j_max: u64,
    k_max: u64,
    tols: &Tolerances,
    jobs: usize,
) -> BasisReport {
    let members = &state.family;
    let mut checks = Vec::new();

    let gram = match nc_gram_violation(members, tols.orth) {
        Ok(None) => Check::pass("gram_identity"),
        Ok(Some((i, j, v))) => Check::fail("gram_identity", format!("<e{i}, e{j}> = {v:e}")),
        Err(e) => Check::fail("gram_identity", e.to_string()),
    };
    checks.push(gram);

    let id = MatStepFn::<R>::identity(state.n);
    let m0_defect = members
        .first()
        .and_then(|m0| MatStepFn::lin_comb(&[(R::one(), m0), (-R::one(), &id)]).ok())
        .map(|d| Scalar::to_f64(&d.nc_norm_inf()));
    checks.push(match m0_defect {
        Some(d) if d <= tols.alg => Check::pass("member0_is_one"),
        _ => Check::fail("member0_is_one", "member 0 is not the identity".into()),
    });

    let witness = members.iter().enumerate().find_map(|(idx, u)| {
        if u.n() != state.n {
            return Some(format!("member {idx}: size {} != {}", u.n(), state.n));
        }
        let idm = CMatrix::<R>::identity(state.n, state.n);
        u.breakpoints()
            .windows(2)
            .zip(u.cells())
            .enumerate()
            .find_map(|(cell, (w, c))| {
                let inv = Scalar::to_f64(&(c * c - &idm).norm());
                let herm = hermitian_defect(c);
                (inv > tols.alg || herm > tols.herm).then(|| {
                    format!(
                        "member {idx}, cell {cell} [{}, {}): |U^2 - I|_F = {inv:e}, |U - U*| = {herm:e}",
                        w[0], w[1]
                    )
                })
            })
    });
    checks.push(match witness {
        None => Check::pass("self_adjoint_unitary"),
        Some(w) => Check::fail("self_adjoint_unitary", w),
    });

    let js: Vec<u64> = (1..=j_max).collect();
    let distances = par_map(&js, jobs, |&j| state.distance(j));
    let mut certificates = Vec::new();
    for (j, dist) in js.iter().zip(distances) {
        let dist = match dist {
            Ok(d) => Scalar::to_f64(&d),
            Err(e) => {
                checks.push(Check::fail(format!("distance[{j}]"), e.to_string()));
                continue;
            }
        };
        for k in 1..=k_max {
            let bound = Scalar::to_f64(&dyadic_power(2 * k as u32));
            let status = if !state.processed.contains(&(*j, k)) {
                CertificateStatus::NotCertified
            } else if dist < bound + tols.matching {
                CertificateStatus::Pass
            } else {
                CertificateStatus::Fail
            };
            certificates.push(PairCertificate {
                j: *j,
                k,
                status,
                dist_sq: Scalar::encode(&dist),
                bound: Scalar::encode(&bound),
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

#[derive(Serialize, Deserialize)]
#[serde(bound = "R: BundleReal")]
struct BundleStateRepr<R: BundleReal> {
    model: String,
    n: usize,
    family: Vec<MatStepFn<R>>,
    stage_log: Vec<StageRecordRepr>,
    processed: Vec<(u64, u64)>,
}

impl<R: BundleReal> Serialize for BundleBasisState<R> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BundleStateRepr {
            model: MATRIX_MODEL.to_string(),
            n: self.n,
            family: self.family.clone(),
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

impl<'de, R: BundleReal> Deserialize<'de> for BundleBasisState<R> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = BundleStateRepr::<R>::deserialize(d)?;
        if repr.model != MATRIX_MODEL {
            return Err(D::Error::custom(format!(
                "expected model \"{MATRIX_MODEL}\", found {:?}",
                repr.model
            )));
        }
        if repr.n == 0 || repr.n > MAX_N {
            return Err(D::Error::custom(format!(
                "matrix size n = {} outside [1, {MAX_N}]",
                repr.n
            )));
        }
        let stage_log = repr
            .stage_log
            .into_iter()
            .map(|r| {
                let residual_norm2_sq =
                    <R as Scalar>::decode(&r.residual_norm2_sq).ok_or_else(|| {
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
        Ok(BundleBasisState {
            n: repr.n,
            family: repr.family,
            stage_log,
            processed: repr.processed,
        })
    }
}
