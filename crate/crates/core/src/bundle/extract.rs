use super::matfn::{hermitian_eigen, CMatrix, MatStepFn};
use super::{real_from_usize, BundleReal, Tolerances};
use crate::basis::par_map;
use crate::error::{Error, Result};
use crate::lyapunov::SplitRule;
use crate::scalar::{split_point, Rational, Scalar};
use crate::stepfn::merge_grids;
use crate::vertex::{is_fractional, reduce_to_basic};

/// Below this many cells the eigendecompositions run on one thread.
const PARALLEL_CELLS: usize = 64;

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Projection `p` with `τ(p g) = τ(q g)` (within `tols.matching`) for every
/// constraint `g`.
///
/// Each cell of `q` is diagonalized; eigenvalue `d_j` of cell `i` becomes
/// the fraction of the cell on which the eigenvector `v_j` is switched on,
/// with weight `(len_i/n)·⟨v_j, G_i v_j⟩` in constraint `g`.
pub fn nc_extract_projection<R: BundleReal>(
    q: &MatStepFn<R>,
    constraints: &[&MatStepFn<R>],
    tols: &Tolerances,
    rule: SplitRule,
) -> Result<MatStepFn<R>> {
    let n = q.n();
    for g in constraints {
        if g.n() != n {
            return Err(Error::Dimension(format!(
                "constraint of size {} against q of size {n}",
                g.n()
            )));
        }
    }
    let grid = constraints.iter().fold(q.breakpoints().to_vec(), |acc, g| {
        merge_grids(&acc, g.breakpoints())
    });
    let q_cells = q.cells_on(&grid);
    let g_cells: Vec<Vec<&CMatrix<R>>> = constraints.iter().map(|g| g.cells_on(&grid)).collect();

    let jobs = if q_cells.len() >= PARALLEL_CELLS {
        jobs()
    } else {
        1
    };
    let eigen = par_map(&q_cells, jobs, |c| hermitian_eigen(c))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let lo = -<R as Scalar>::from_f64(tols.eig);
    let hi = R::one() + <R as Scalar>::from_f64(tols.eig);
    let mut fractions = Vec::with_capacity(eigen.len() * n);
    for (i, (vals, _)) in eigen.iter().enumerate() {
        for v in vals {
            if *v < lo || *v > hi {
                return Err(Error::Domain(format!(
                    "eigenvalue {} of q on cell {i} [{}, {}) is outside [0, 1]",
                    Scalar::to_f64(v),
                    grid[i],
                    grid[i + 1]
                )));
            }
            fractions.push(num_traits::clamp(*v, R::zero(), R::one()));
        }
    }

    if rule == SplitRule::Basic {
        let nr = real_from_usize::<R>(n);
        let rows: Vec<Vec<R>> = g_cells
            .iter()
            .map(|gc| {
                let mut row = Vec::with_capacity(fractions.len());
                for (i, (_, vecs)) in eigen.iter().enumerate() {
                    let len = R::from_rational(&(&grid[i + 1] - &grid[i]));
                    let gv = gc[i] * vecs;
                    for j in 0..n {
                        let diag = vecs.column(j).dotc(&gv.column(j)).re;
                        row.push(len / nr * diag);
                    }
                }
                row
            })
            .collect();
        reduce_to_basic(&rows, &mut fractions);
    }

    let p = assemble(&grid, n, &eigen, &fractions);
    let defect = p.idempotence_defect();
    if defect > tols.alg {
        return Err(Error::Tolerance {
            check: "projection P^2 = P".into(),
            deviation: defect,
            tolerance: tols.alg,
        });
    }
    Ok(p)
}

/// Switches eigenvector `j` of cell `i` on over the left fraction
/// `x_{i,j}` of the cell.
fn assemble<R: BundleReal>(
    grid: &[Rational],
    n: usize,
    eigen: &[(Vec<R>, CMatrix<R>)],
    fractions: &[R],
) -> MatStepFn<R> {
    let mut bps = vec![grid[0].clone()];
    let mut cells = Vec::new();
    for (i, (_, vecs)) in eigen.iter().enumerate() {
        let (a, b) = (&grid[i], &grid[i + 1]);
        let xs = &fractions[i * n..(i + 1) * n];
        let on: Vec<usize> = (0..n)
            .filter(|&j| !is_fractional(&xs[j]) && (xs[j] - R::one()).is_negligible())
            .collect();
        let mut splits: Vec<(Rational, usize)> = (0..n)
            .filter(|&j| is_fractional(&xs[j]))
            .map(|j| (split_point(a, b, &xs[j]), j))
            .collect();
        splits.sort();
        let mut cuts: Vec<Rational> = splits
            .iter()
            .map(|(s, _)| s.clone())
            .filter(|s| s > a && s < b)
            .collect();
        cuts.dedup();
        cuts.push(b.clone());
        for hi in cuts {
            let mut m = CMatrix::<R>::zeros(n, n);
            let active = on
                .iter()
                .copied()
                .chain(splits.iter().filter(|(s, _)| *s >= hi).map(|(_, j)| *j));
            for j in active {
                let v = vecs.column(j);
                m += v * v.adjoint();
            }
            cells.push(m);
            bps.push(hi);
        }
    }
    MatStepFn::canonical(bps, n, cells)
}

/// Output of [`nc_norming_unitary`].
#[derive(Clone, Debug, PartialEq)]
pub struct MatNormingUnitary<R: BundleReal> {
    pub unitary: MatStepFn<R>,
    /// `⟨a, u⟩`, within `tols.matching` of `‖a‖₂² / ‖a‖∞`.
    pub alpha: R,
}

/// Self-adjoint unitary `u ⊥ fam` with `τ(a u) ≈ ‖a‖₂² / ‖a‖∞`.
pub fn nc_norming_unitary<R: BundleReal>(
    a: &MatStepFn<R>,
    fam: &[MatStepFn<R>],
    tols: &Tolerances,
    rule: SplitRule,
) -> Result<MatNormingUnitary<R>> {
    let sup = a.nc_norm_inf();
    if sup.is_negligible() {
        return Err(Error::Domain("norming unitary of the zero element".into()));
    }
    for (i, e) in fam.iter().enumerate() {
        let ip = Scalar::to_f64(&a.nc_inner(e)?);
        if ip.abs() > tols.orth {
            return Err(Error::Precondition(format!(
                "target not orthogonal to family member {i}: inner product {ip:e}"
            )));
        }
    }
    let id = MatStepFn::identity(a.n());
    let half = <R as Scalar>::half();
    let q = MatStepFn::lin_comb(&[(half, &id), (half / sup, a)])?;
    let mut constraints: Vec<&MatStepFn<R>> = fam.iter().collect();
    constraints.push(a);
    let p = nc_extract_projection(&q, &constraints, tols, rule)?;
    let two = <R as Scalar>::two();
    let unitary = MatStepFn::lin_comb(&[(two, &p), (-R::one(), &id)])?;

    let defect = unitary.involution_defect();
    if defect > tols.alg {
        return Err(Error::Tolerance {
            check: "unitary U^2 = I".into(),
            deviation: defect,
            tolerance: tols.alg,
        });
    }
    let alpha = a.nc_inner(&unitary)?;
    let target = a.norm2_sq() / sup;
    let dev = Scalar::to_f64(&(alpha - target)).abs();
    if dev > tols.matching {
        return Err(Error::Tolerance {
            check: "norming identity <a,u> = |a|_2^2/|a|_inf".into(),
            deviation: dev,
            tolerance: tols.matching,
        });
    }
    for (i, e) in fam.iter().enumerate() {
        let ip = Scalar::to_f64(&unitary.nc_inner(e)?).abs();
        if ip > tols.matching {
            return Err(Error::Tolerance {
                check: format!("unitary orthogonal to family member {i}"),
                deviation: ip,
                tolerance: tols.matching,
            });
        }
    }
    Ok(MatNormingUnitary { unitary, alpha })
}
