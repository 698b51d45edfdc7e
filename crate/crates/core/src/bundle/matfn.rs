use nalgebra::{Complex, ComplexField, DMatrix, SymmetricEigen};
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::BundleReal;
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};
use crate::stepfn::{merge_grids, StepFn};

pub type CMatrix<R> = DMatrix<Complex<R>>;

/// Default Hermiticity tolerance (max entrywise `|X - X*|`).
pub const DEFAULT_TOL_HERM: f64 = 1e-10;

/// Hermitian-matrix-valued step function on `[0,1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatStepFn<R: BundleReal> {
    breakpoints: Vec<Rational>,
    n: usize,
    cells: Vec<CMatrix<R>>,
}

pub(crate) fn hermitian_defect<R: BundleReal>(m: &CMatrix<R>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = m[(i, j)] - m[(j, i)].conj();
            worst = worst.max(Scalar::to_f64(&d.re).abs().max(Scalar::to_f64(&d.im).abs()));
        }
    }
    worst
}

impl<R: BundleReal> MatStepFn<R> {
    /// Validates structure and Hermiticity (within [`DEFAULT_TOL_HERM`]),
    /// then drops zero-length cells and merges identical neighbours.
    pub fn new(breakpoints: Vec<Rational>, n: usize, cells: Vec<CMatrix<R>>) -> Result<Self> {
        Self::with_tolerance(breakpoints, n, cells, DEFAULT_TOL_HERM)
    }

    pub fn with_tolerance(
        breakpoints: Vec<Rational>,
        n: usize,
        cells: Vec<CMatrix<R>>,
        tol_herm: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("matrix size must be at least 1".into()));
        }
        if breakpoints.len() != cells.len() + 1 {
            return Err(Error::Structural(format!(
                "{} breakpoints but {} cells",
                breakpoints.len(),
                cells.len()
            )));
        }
        // Shares the structural rules of the scalar model.
        StepFn::<Rational>::new(breakpoints.clone(), vec![Rational::zero(); cells.len()])?;
        for (i, c) in cells.iter().enumerate() {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::Dimension(format!(
                    "cell {i} is {}x{}, expected {n}x{n}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            let defect = hermitian_defect(c);
            if defect > tol_herm {
                return Err(Error::Tolerance {
                    check: format!("hermiticity of cell {i}"),
                    deviation: defect,
                    tolerance: tol_herm,
                });
            }
        }
        Ok(Self::canonical(breakpoints, n, cells))
    }

    pub(crate) fn canonical(breakpoints: Vec<Rational>, n: usize, cells: Vec<CMatrix<R>>) -> Self {
        let mut bps = Vec::with_capacity(breakpoints.len());
        let mut out: Vec<CMatrix<R>> = Vec::with_capacity(cells.len());
        let mut iter = breakpoints.into_iter();
        bps.push(iter.next().expect("nonempty"));
        for (hi, c) in iter.zip(cells) {
            if hi == *bps.last().unwrap() {
                continue;
            }
            match out.last() {
                Some(prev) if *prev == c => *bps.last_mut().unwrap() = hi,
                _ => {
                    out.push(c);
                    bps.push(hi);
                }
            }
        }
        MatStepFn {
            breakpoints: bps,
            n,
            cells: out,
        }
    }

    pub fn constant(m: CMatrix<R>) -> Result<Self> {
        let n = m.nrows();
        Self::new(vec![Rational::zero(), Rational::one()], n, vec![m])
    }

    pub fn identity(n: usize) -> Self {
        Self::canonical(
            vec![Rational::zero(), Rational::one()],
            n,
            vec![CMatrix::identity(n, n)],
        )
    }

    pub fn zero(n: usize) -> Self {
        Self::canonical(
            vec![Rational::zero(), Rational::one()],
            n,
            vec![CMatrix::zeros(n, n)],
        )
    }

    /// `f ⊗ m`: the scalar step function times a fixed Hermitian matrix.
    pub fn tensor(f: &StepFn<R>, m: &CMatrix<R>) -> Result<Self> {
        let cells = f
            .values()
            .iter()
            .map(|v| m.map(|z| z * Complex::new(*v, R::zero())))
            .collect();
        Self::new(f.breakpoints().to_vec(), m.nrows(), cells)
    }

    /// Embeds a scalar step function as a `1×1` bundle.
    pub fn from_scalar(f: &StepFn<R>) -> Self {
        Self::tensor(f, &CMatrix::identity(1, 1)).expect("1x1 real cells are Hermitian")
    }

    /// Real parts of a `1×1` bundle as a scalar step function.
    pub fn to_scalar(&self) -> Result<StepFn<R>> {
        if self.n != 1 {
            return Err(Error::Dimension(format!("expected n = 1, got {}", self.n)));
        }
        StepFn::new(
            self.breakpoints.clone(),
            self.cells.iter().map(|c| c[(0, 0)].re).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn cells(&self) -> &[CMatrix<R>] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cell matrices on a refinement `grid` of the breakpoints.
    pub fn cells_on(&self, grid: &[Rational]) -> Vec<&CMatrix<R>> {
        let mut out = Vec::with_capacity(grid.len().saturating_sub(1));
        let mut i = 0;
        for t in &grid[..grid.len() - 1] {
            while self.breakpoints[i + 1] <= *t {
                i += 1;
            }
            out.push(&self.cells[i]);
        }
        out
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "matrix sizes {} and {} differ",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// `Σ c_i x_i` on the common refinement.
    pub fn lin_comb(terms: &[(R, &MatStepFn<R>)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Structural("empty linear combination".into()))?;
        let n = first.1.n;
        for (_, x) in terms {
            first.1.check_dim(x)?;
        }
        let grid = terms[1..]
            .iter()
            .fold(first.1.breakpoints.clone(), |g, (_, x)| {
                merge_grids(&g, &x.breakpoints)
            });
        let mut cells = vec![CMatrix::<R>::zeros(n, n); grid.len() - 1];
        for (c, x) in terms {
            if c.is_zero() {
                continue;
            }
            let cc = Complex::new(*c, R::zero());
            for (acc, m) in cells.iter_mut().zip(x.cells_on(&grid)) {
                *acc += m.map(|z| z * cc);
            }
        }
        Ok(Self::canonical(grid, n, cells))
    }

    /// `u x u` cellwise (Hermitian whenever `u` and `x` are).
    pub fn sandwich(&self, u: &Self) -> Result<Self> {
        self.check_dim(u)?;
        let grid = merge_grids(&self.breakpoints, &u.breakpoints);
        let cells = self
            .cells_on(&grid)
            .into_iter()
            .zip(u.cells_on(&grid))
            .map(|(x, uu)| uu * x * uu)
            .collect();
        Ok(Self::canonical(grid, self.n, cells))
    }

    /// `τ(x) = Σ len · tr(X)/n`.
    pub fn nc_trace(&self) -> R {
        let n = super::real_from_usize::<R>(self.n);
        self.breakpoints
            .windows(2)
            .zip(&self.cells)
            .map(|(w, c)| R::from_rational(&(&w[1] - &w[0])) * c.trace().re / n)
            .fold(R::zero(), |a, b| a + b)
    }

    /// `⟨x, y⟩ = τ(xy)`, real for Hermitian arguments.
    pub fn nc_inner(&self, other: &Self) -> Result<R> {
        self.check_dim(other)?;
        let grid = merge_grids(&self.breakpoints, &other.breakpoints);
        let n = super::real_from_usize::<R>(self.n);
        let mut acc = R::zero();
        for ((w, x), y) in grid
            .windows(2)
            .zip(self.cells_on(&grid))
            .zip(other.cells_on(&grid))
        {
            acc += R::from_rational(&(&w[1] - &w[0])) * trace_of_product(x, y) / n;
        }
        Ok(acc)
    }

    pub fn norm2_sq(&self) -> R {
        let n = super::real_from_usize::<R>(self.n);
        self.breakpoints
            .windows(2)
            .zip(&self.cells)
            .map(|(w, c)| R::from_rational(&(&w[1] - &w[0])) * trace_of_product(c, c) / n)
            .fold(R::zero(), |a, b| a + b)
    }

    /// Largest spectral radius over cells.
    pub fn nc_norm_inf(&self) -> R {
        self.cells
            .iter()
            .map(|c| spectral_radius(c))
            .fold(R::zero(), |m, x| if x > m { x } else { m })
    }

    /// Largest Frobenius norm of `X² - X` over cells.
    pub fn idempotence_defect(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| Scalar::to_f64(&(c * c - c).norm()))
            .fold(0.0, f64::max)
    }

    /// Largest Frobenius norm of `X² - I` over cells.
    pub fn involution_defect(&self) -> f64 {
        let id = CMatrix::<R>::identity(self.n, self.n);
        self.cells
            .iter()
            .map(|c| Scalar::to_f64(&(c * c - &id).norm()))
            .fold(0.0, f64::max)
    }
}

/// `Re tr(XY)`.
pub(crate) fn trace_of_product<R: BundleReal>(x: &CMatrix<R>, y: &CMatrix<R>) -> R {
    let n = x.nrows();
    let mut acc = R::zero();
    for i in 0..n {
        for j in 0..n {
            acc += (x[(i, j)] * y[(j, i)]).re;
        }
    }
    acc
}

fn spectral_radius<R: BundleReal>(m: &CMatrix<R>) -> R {
    if m.nrows() == 1 {
        return ComplexField::abs(m[(0, 0)].re);
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .map(|v| ComplexField::abs(*v))
        .fold(R::zero(), |a, b| if b > a { b } else { a })
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in descending
/// order and each eigenvector's first non-negligible component made real
/// positive.
pub fn hermitian_eigen<R: BundleReal>(m: &CMatrix<R>) -> Result<(Vec<R>, CMatrix<R>)> {
    let n = m.nrows();
    if n == 1 {
        return Ok((vec![m[(0, 0)].re], CMatrix::identity(1, 1)));
    }
    let eig = SymmetricEigen::try_new(m.clone(), R::default_epsilon(), 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::<R>::zeros(n, n);
    let tiny = <R as Scalar>::from_f64(1e-12);
    for (col, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let phase = v
            .iter()
            .find(|z| z.modulus() > tiny)
            .map(|z| z.conj() / Complex::new(z.modulus(), R::zero()))
            .unwrap_or(Complex::new(R::one(), R::zero()));
        for row in 0..n {
            vectors[(row, col)] = v[row] * phase;
        }
    }
    Ok((values, vectors))
}

/// Wire form: rational-string breakpoints, each cell a row-major list of
/// `[re, im]` pairs, and the matrix size.
#[derive(Serialize, Deserialize)]
struct MatStepFnRepr {
    breakpoints: Vec<String>,
    cells: Vec<Vec<[f64; 2]>>,
    n: usize,
}

impl<R: BundleReal> Serialize for MatStepFn<R> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatStepFnRepr {
            breakpoints: self.breakpoints.iter().map(|b| b.encode()).collect(),
            cells: self
                .cells
                .iter()
                .map(|c| {
                    let mut flat = Vec::with_capacity(self.n * self.n);
                    for i in 0..self.n {
                        for j in 0..self.n {
                            let z = c[(i, j)];
                            flat.push([Scalar::to_f64(&z.re), Scalar::to_f64(&z.im)]);
                        }
                    }
                    flat
                })
                .collect(),
            n: self.n,
        }
        .serialize(s)
    }
}

impl<'de, R: BundleReal> Deserialize<'de> for MatStepFn<R> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MatStepFnRepr::deserialize(d)?;
        let n = repr.n;
        let breakpoints = repr
            .breakpoints
            .iter()
            .map(|s| {
                Rational::decode(s).ok_or_else(|| D::Error::custom(format!("bad rational {s:?}")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let cells = repr
            .cells
            .iter()
            .enumerate()
            .map(|(idx, flat)| {
                if flat.len() != n * n {
                    return Err(D::Error::custom(format!(
                        "cell {idx} has {} entries, expected {}",
                        flat.len(),
                        n * n
                    )));
                }
                Ok(CMatrix::from_row_iterator(
                    n,
                    n,
                    flat.iter().map(|[re, im]| {
                        Complex::new(<R as Scalar>::from_f64(*re), <R as Scalar>::from_f64(*im))
                    }),
                ))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        MatStepFn::new(breakpoints, n, cells).map_err(D::Error::custom)
    }
}
