//! Real step functions on `[0,1)` with rational breakpoints.
//!
//! A [`StepFn`] is the self-adjoint part of the diffuse abelian model
//! `L∞[0,1)` with trace `τ(f) = ∫₀¹ f dt`. Cells are half-open
//! `[t_i, t_{i+1})`. Every constructor returns canonical form: zero-length
//! cells dropped and equal neighbours merged, so structural equality is
//! pointwise equality.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct StepFn<T> {
    breakpoints: Vec<Rational>,
    values: Vec<T>,
}

impl<T: Scalar> StepFn<T> {
    /// Validates and canonicalizes. Breakpoints must start at 0, end at 1 and
    /// be nondecreasing; repeated points (zero-length cells) are allowed here
    /// and removed.
    pub fn new(breakpoints: Vec<Rational>, values: Vec<T>) -> Result<Self> {
        canonicalize(breakpoints, values)
    }

    pub fn constant(value: T) -> Self {
        if value.is_zero() {
            return Self::zero();
        }
        StepFn {
            breakpoints: vec![Rational::zero(), Rational::one()],
            values: vec![value],
        }
    }

    pub fn zero() -> Self {
        StepFn {
            breakpoints: vec![Rational::zero(), Rational::one()],
            values: vec![T::zero()],
        }
    }

    pub fn one() -> Self {
        Self::constant(T::one())
    }

    /// Indicator `χ_[lo, hi)`; requires `0 <= lo <= hi <= 1`.
    pub fn indicator(lo: Rational, hi: Rational) -> Result<Self> {
        if lo < Rational::zero() || hi > Rational::one() || lo > hi {
            return Err(Error::Structural(format!(
                "indicator interval [{lo}, {hi}) not inside [0,1)"
            )));
        }
        Self::new(
            vec![Rational::zero(), lo, hi, Rational::one()],
            vec![T::zero(), T::one(), T::zero()],
        )
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(left, right, value)` over cells.
    pub fn cells(&self) -> impl Iterator<Item = (&Rational, &Rational, &T)> {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (&w[0], &w[1], v))
    }

    /// Value at `t ∈ [0,1)` under the half-open convention.
    pub fn value_at(&self, t: &Rational) -> Option<&T> {
        if *t < Rational::zero() || *t >= Rational::one() {
            return None;
        }
        // Last breakpoint <= t among t_0..t_{m-1}.
        let idx = match self.breakpoints[..self.values.len()].binary_search(t) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        self.values.get(idx)
    }

    pub fn is_zero(&self) -> bool {
        self.values.len() == 1 && self.values[0].is_zero()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> StepFn<U> {
        let values = self.values.iter().map(f).collect();
        canonicalize_unchecked(self.breakpoints.clone(), values)
    }

    pub fn scale(&self, c: &T) -> Self {
        self.map(|v| c.clone() * v.clone())
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    /// Values of `self` on a refinement `grid` of its breakpoints.
    pub fn values_on(&self, grid: &[Rational]) -> Vec<T> {
        let mut out = Vec::with_capacity(grid.len().saturating_sub(1));
        let mut i = 0;
        for t in &grid[..grid.len() - 1] {
            while self.breakpoints[i + 1] <= *t {
                i += 1;
            }
            out.push(self.values[i].clone());
        }
        out
    }

    /// `τ(f) = Σ v_i (t_{i+1} - t_i)`.
    pub fn trace(&self) -> T {
        self.cells()
            .map(|(lo, hi, v)| v.clone() * T::from_rational(&(hi - lo)))
            .fold(T::zero(), |acc, x| acc + x)
    }

    /// `⟨f, g⟩ = τ(fg)` by a merge sweep, without materializing the product.
    pub fn inner(&self, other: &Self) -> T {
        let mut acc = T::zero();
        let (mut i, mut j) = (0, 0);
        let mut lo = Rational::zero();
        while i < self.values.len() && j < other.values.len() {
            let a = &self.breakpoints[i + 1];
            let b = &other.breakpoints[j + 1];
            let hi = if a <= b { a.clone() } else { b.clone() };
            let prod = self.values[i].clone() * other.values[j].clone();
            if !prod.is_zero() {
                acc = acc + prod * T::from_rational(&(&hi - &lo));
            }
            if *a == hi {
                i += 1;
            }
            if *b == hi {
                j += 1;
            }
            lo = hi;
        }
        acc
    }

    pub fn norm2_sq(&self) -> T {
        self.cells()
            .map(|(lo, hi, v)| v.clone() * v.clone() * T::from_rational(&(hi - lo)))
            .fold(T::zero(), |acc, x| acc + x)
    }

    /// `max |v_i|`.
    pub fn norm_inf(&self) -> T {
        self.values
            .iter()
            .map(|v| v.abs())
            .fold(T::zero(), |m, x| if x > m { x } else { m })
    }

    pub fn mul(&self, other: &Self) -> Self {
        let grid = merge_grids(&self.breakpoints, &other.breakpoints);
        let a = self.values_on(&grid);
        let b = other.values_on(&grid);
        let values = a.into_iter().zip(b).map(|(x, y)| x * y).collect();
        canonicalize_unchecked(grid, values)
    }

    /// Pointwise `Σ c_i f_i` on the common refinement.
    pub fn lin_comb(terms: &[(T, &StepFn<T>)]) -> Self {
        let live: Vec<_> = terms.iter().filter(|(c, _)| !c.is_zero()).collect();
        if live.is_empty() {
            return Self::zero();
        }
        let grid = live
            .iter()
            .skip(1)
            .fold(live[0].1.breakpoints.clone(), |g, (_, f)| {
                merge_grids(&g, &f.breakpoints)
            });
        let mut values = vec![T::zero(); grid.len() - 1];
        for (c, f) in live {
            for (acc, v) in values.iter_mut().zip(f.values_on(&grid)) {
                if !v.is_zero() {
                    *acc = acc.clone() + c.clone() * v;
                }
            }
        }
        canonicalize_unchecked(grid, values)
    }

    pub fn is_sa_unitary(&self) -> bool {
        self.values
            .iter()
            .all(|v| *v == T::one() || *v == -T::one())
    }

    pub fn is_projection(&self) -> bool {
        self.values.iter().all(|v| v.is_zero() || v.is_one())
    }

    /// First cell whose value is not `±1`, as `(left, right, value)`.
    pub fn first_non_unitary_cell(&self) -> Option<(usize, Rational, Rational, T)> {
        self.cells()
            .enumerate()
            .find(|(_, (_, _, v))| !(**v == T::one() || **v == -T::one()))
            .map(|(i, (lo, hi, v))| (i, lo.clone(), hi.clone(), v.clone()))
    }

    /// Re-expresses the function over a different scalar.
    pub fn convert<U: Scalar>(&self) -> StepFn<U> {
        self.map(|v| crate::scalar::convert(v))
    }
}

/// Canonical form of a raw `(breakpoints, values)` pair.
pub fn canonicalize<T: Scalar>(breakpoints: Vec<Rational>, values: Vec<T>) -> Result<StepFn<T>> {
    if breakpoints.len() < 2 {
        return Err(Error::Structural(
            "need at least the two breakpoints 0 and 1".into(),
        ));
    }
    if values.len() + 1 != breakpoints.len() {
        return Err(Error::Structural(format!(
            "{} breakpoints but {} values",
            breakpoints.len(),
            values.len()
        )));
    }
    if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
        return Err(Error::Structural(format!(
            "breakpoints must run from 0 to 1, got {} .. {}",
            breakpoints[0],
            breakpoints[breakpoints.len() - 1]
        )));
    }
    if let Some(w) = breakpoints.windows(2).find(|w| w[0] > w[1]) {
        return Err(Error::Structural(format!(
            "breakpoints not sorted: {} > {}",
            w[0], w[1]
        )));
    }
    Ok(canonicalize_unchecked(breakpoints, values))
}

/// Drops zero-length cells and merges equal neighbours. Inputs must already
/// be structurally valid.
pub(crate) fn canonicalize_unchecked<T: Scalar>(
    breakpoints: Vec<Rational>,
    values: Vec<T>,
) -> StepFn<T> {
    let mut bps = Vec::with_capacity(breakpoints.len());
    let mut vals: Vec<T> = Vec::with_capacity(values.len());
    let mut iter = breakpoints.into_iter();
    bps.push(iter.next().expect("nonempty"));
    for (hi, v) in iter.zip(values) {
        if hi == *bps.last().unwrap() {
            continue;
        }
        match vals.last() {
            Some(prev) if *prev == v => *bps.last_mut().unwrap() = hi,
            _ => {
                vals.push(v);
                bps.push(hi);
            }
        }
    }
    if vals.is_empty() {
        // Every cell had zero length; only possible for malformed input
        // that canonicalize() already rejects, so fall back to zero.
        return StepFn::zero();
    }
    StepFn {
        breakpoints: bps,
        values: vals,
    }
}

/// Sorted union of two sorted breakpoint lists.
pub fn merge_grids(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                out.push(a[i].clone());
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Union grid of all inputs plus each function's values on it.
pub fn common_refinement<T: Scalar>(fs: &[&StepFn<T>]) -> Result<(Vec<Rational>, Vec<Vec<T>>)> {
    let first = fs
        .first()
        .ok_or_else(|| Error::Structural("common refinement of an empty list".into()))?;
    let grid = fs[1..].iter().fold(first.breakpoints.clone(), |g, f| {
        merge_grids(&g, &f.breakpoints)
    });
    let values = fs.iter().map(|f| f.values_on(&grid)).collect();
    Ok((grid, values))
}

impl<T: Scalar> Add for &StepFn<T> {
    type Output = StepFn<T>;
    fn add(self, rhs: Self) -> StepFn<T> {
        StepFn::lin_comb(&[(T::one(), self), (T::one(), rhs)])
    }
}

impl<T: Scalar> Sub for &StepFn<T> {
    type Output = StepFn<T>;
    fn sub(self, rhs: Self) -> StepFn<T> {
        StepFn::lin_comb(&[(T::one(), self), (-T::one(), rhs)])
    }
}

impl<T: Scalar> Mul for &StepFn<T> {
    type Output = StepFn<T>;
    fn mul(self, rhs: Self) -> StepFn<T> {
        StepFn::mul(self, rhs)
    }
}

impl<T: Scalar> Neg for &StepFn<T> {
    type Output = StepFn<T>;
    fn neg(self) -> StepFn<T> {
        self.map(|v| -v.clone())
    }
}

impl<T: Scalar> fmt::Display for StepFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (lo, hi, v)) in self.cells().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} on [{}, {})", v.encode(), lo, hi)?;
        }
        Ok(())
    }
}

/// Wire form: `{"breakpoints": ["0", "1/2", "1"], "values": ["-1", "1"]}`.
#[derive(Serialize, Deserialize)]
struct StepFnRepr {
    breakpoints: Vec<String>,
    values: Vec<String>,
}

impl<T: Scalar> Serialize for StepFn<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StepFnRepr {
            breakpoints: self.breakpoints.iter().map(|b| b.encode()).collect(),
            values: self.values.iter().map(|v| v.encode()).collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for StepFn<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = StepFnRepr::deserialize(d)?;
        let breakpoints = repr
            .breakpoints
            .iter()
            .map(|s| {
                Rational::decode(s).ok_or_else(|| D::Error::custom(format!("bad rational {s:?}")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let values = repr
            .values
            .iter()
            .map(|s| T::decode(s).ok_or_else(|| D::Error::custom(format!("bad value {s:?}"))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        StepFn::new(breakpoints, values).map_err(D::Error::custom)
    }
}

macro_rules! restricted_stepfn {
    ($(#[$doc:meta])* $name:ident, $check:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name<T>(StepFn<T>);

        impl<T: Scalar> $name<T> {
            pub fn new(f: StepFn<T>) -> Result<Self> {
                if f.$check() {
                    Ok($name(f))
                } else {
                    Err(Error::Domain(format!(concat!("not ", $what, ": {}"), f)))
                }
            }

            pub fn as_stepfn(&self) -> &StepFn<T> {
                &self.0
            }

            pub fn into_stepfn(self) -> StepFn<T> {
                self.0
            }
        }

        impl<T> std::ops::Deref for $name<T> {
            type Target = StepFn<T>;
            fn deref(&self) -> &StepFn<T> {
                &self.0
            }
        }

        impl<T: Scalar> Serialize for $name<T> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                self.0.serialize(s)
            }
        }

        impl<'de, T: Scalar> Deserialize<'de> for $name<T> {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let f = StepFn::<T>::deserialize(d)?;
                $name::new(f).map_err(D::Error::custom)
            }
        }
    };
}

restricted_stepfn!(
    /// Step function with every value exactly `+1` or `-1`: a self-adjoint
    /// unitary `u = u* = u⁻¹`.
    SAUnitaryFn,
    is_sa_unitary,
    "a self-adjoint unitary"
);

restricted_stepfn!(
    /// Step function with values in `{0, 1}`.
    ProjectionFn,
    is_projection,
    "a projection"
);

impl<T: Scalar> ProjectionFn<T> {
    /// `2p - 1`.
    pub fn to_unitary(&self) -> SAUnitaryFn<T> {
        SAUnitaryFn(self.0.map(|v| T::two() * v.clone() - T::one()))
    }
}

impl<T: Scalar> SAUnitaryFn<T> {
    pub fn one() -> Self {
        SAUnitaryFn(StepFn::one())
    }

    /// Rademacher function `r_n(t) = -1` on the even-indexed dyadic cells of
    /// level `n` (so `r_1` is `-1` on `[0,1/2)` and `+1` on `[1/2,1)`).
    pub fn rademacher(n: u32) -> Self {
        let cells = 1usize << n;
        let breakpoints = (0..=cells)
            .map(|i| Rational::new(i.into(), cells.into()))
            .collect();
        let values = (0..cells)
            .map(|i| if i % 2 == 0 { -T::one() } else { T::one() })
            .collect();
        SAUnitaryFn(canonicalize_unchecked(breakpoints, values))
    }
}
