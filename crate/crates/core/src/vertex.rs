//! Reduction of a fractional point of `{x ∈ [0,1]^N : A x = b}` to a basic
//! solution.
//!
//! Starting from a feasible `x`, scan the fractional coordinates in order.
//! Each one either extends an independent set of columns of `A` or depends
//! on it; in the latter case move along that dependency until a coordinate
//! reaches 0 or 1. Stop once at most `rows` remain fractional. `A x` is unchanged by every move. This is the
//! finite-dimensional Lyapunov argument: all but a handful of cells end up
//! integral and only those few need to be split.

use crate::scalar::Scalar;

/// `true` iff `x` is strictly inside `(0, 1)` beyond the scalar's zero
/// tolerance.
pub fn is_fractional<T: Scalar>(x: &T) -> bool {
    let tol = T::zero_tol();
    *x > tol && *x < T::one() - tol
}

/// Rounds values within tolerance of 0 or 1 onto the bound.
fn snap<T: Scalar>(x: &mut T) {
    if (x.clone()).is_negligible() {
        *x = T::zero();
    } else if (x.clone() - T::one()).is_negligible() {
        *x = T::one();
    }
}

/// Reduces `x` in place. `rows[j][i]` is the coefficient of `x_i` in
/// constraint `j`. Returns the number of moves performed.
pub fn reduce_to_basic<T: Scalar>(rows: &[Vec<T>], x: &mut [T]) -> usize {
    reduce_weighted(rows, None, x)
}

/// As [`reduce_to_basic`] with coefficients `rows[j][i] * weights[i]`.
///
/// The elimination runs on the unweighted rows and the null vector is
/// rescaled afterwards, which keeps exact entries small when the rows are
/// simple (such as `±1` values) and the weights are cell lengths.
pub fn reduce_to_basic_weighted<T: Scalar>(rows: &[Vec<T>], weights: &[T], x: &mut [T]) -> usize {
    reduce_weighted(rows, Some(weights), x)
}

fn reduce_weighted<T: Scalar>(rows: &[Vec<T>], weights: Option<&[T]>, x: &mut [T]) -> usize {
    let r = rows.len();
    for xi in x.iter_mut() {
        snap(xi);
    }
    let mut remaining = x.iter().filter(|v| is_fractional(*v)).count();
    // Invariant: `active` holds every fractional index below the scan
    // position, in increasing order, and its columns are independent.
    // `m` is invertible with `m * A[:, active[k]] = e_{pivot[k]}`.
    let mut m: Vec<Vec<T>> = (0..r)
        .map(|i| (0..r).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let mut active: Vec<usize> = Vec::with_capacity(r + 1);
    let mut pivot: Vec<usize> = Vec::with_capacity(r + 1);
    let mut is_pivot = vec![false; r];
    let mut moves = 0;
    for i in 0..x.len() {
        if remaining <= r {
            break;
        }
        if !is_fractional(&x[i]) {
            continue;
        }
        let v: Vec<T> = m
            .iter()
            .map(|mrow| {
                mrow.iter()
                    .zip(rows)
                    .fold(T::zero(), |acc, (a, row)| acc + a.clone() * row[i].clone())
            })
            .collect();
        if let Some(rho) = best_free_row(&v, &is_pivot) {
            add_pivot(&mut m, &v, rho);
            active.push(i);
            pivot.push(rho);
            is_pivot[rho] = true;
            continue;
        }
        // Column i depends on the active ones: A_i = sum_k v[pivot[k]] A_active[k].
        let mut support = active.clone();
        support.push(i);
        let mut d: Vec<T> = pivot.iter().map(|&p| -v[p].clone()).collect();
        d.push(T::one());
        if let Some(w) = weights {
            for (k, dk) in d.iter_mut().enumerate() {
                *dk = dk.clone() / w[support[k]].clone();
            }
        }
        if let Some(first) = d.iter().find(|v| !v.is_negligible()) {
            if *first < T::zero() {
                for v in d.iter_mut() {
                    *v = -v.clone();
                }
            }
        }
        step_along(x, &support, &d);
        moves += 1;
        // Drop the columns that reached a bound; the survivors stay
        // independent because the dependency among them was unique.
        let mut k = 0;
        while k < active.len() {
            if is_fractional(&x[active[k]]) {
                k += 1;
            } else {
                is_pivot[pivot[k]] = false;
                active.remove(k);
                pivot.remove(k);
                remaining -= 1;
            }
        }
        if is_fractional(&x[i]) {
            let rho = best_free_row(&v, &is_pivot).expect("a freed pivot row carries the dependency");
            add_pivot(&mut m, &v, rho);
            active.push(i);
            pivot.push(rho);
            is_pivot[rho] = true;
        } else {
            remaining -= 1;
        }
    }
    moves
}

/// Non-pivot row with the largest non-negligible entry of `v`.
fn best_free_row<T: Scalar>(v: &[T], is_pivot: &[bool]) -> Option<usize> {
    (0..v.len())
        .filter(|&j| !is_pivot[j] && !v[j].is_negligible())
        .max_by(|&a, &b| {
            v[a].abs()
                .partial_cmp(&v[b].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.cmp(&a))
        })
}

/// Row operations on `m` that send the column with image `v` to `e_rho`.
/// Columns whose images vanish in row `rho` are unaffected.
fn add_pivot<T: Scalar>(m: &mut [Vec<T>], v: &[T], rho: usize) {
    let inv = T::one() / v[rho].clone();
    for a in m[rho].iter_mut() {
        *a = a.clone() * inv.clone();
    }
    let pivot_row = m[rho].clone();
    for (j, row) in m.iter_mut().enumerate() {
        if j == rho || v[j].is_zero() {
            continue;
        }
        let f = v[j].clone();
        for (a, p) in row.iter_mut().zip(&pivot_row) {
            *a = a.clone() - f.clone() * p.clone();
        }
    }
}

/// Moves `x` along `d` (on the coordinates `support`) as far as `[0, 1]`
/// allows; the first blocking coordinate lands exactly on its bound.
fn step_along<T: Scalar>(x: &mut [T], support: &[usize], d: &[T]) {
    let mut step: Option<(T, usize)> = None;
    for (k, dk) in d.iter().enumerate() {
        let xi = &x[support[k]];
        let limit = if *dk > T::zero() {
            (T::one() - xi.clone()) / dk.clone()
        } else if *dk < T::zero() {
            -xi.clone() / dk.clone()
        } else {
            continue;
        };
        if step.as_ref().is_none_or(|(s, _)| limit < *s) {
            step = Some((limit, k));
        }
    }
    let (t, hit) = step.expect("null vector is nonzero");
    for (k, dk) in d.iter().enumerate() {
        let i = support[k];
        if k == hit {
            x[i] = if *dk > T::zero() { T::one() } else { T::zero() };
        } else if !dk.is_zero() {
            x[i] = x[i].clone() + t.clone() * dk.clone();
            snap(&mut x[i]);
            // Guard against float overshoot.
            if x[i] < T::zero() {
                x[i] = T::zero();
            } else if x[i] > T::one() {
                x[i] = T::one();
            }
        }
    }
}

/// Nonzero `d` with `m d = 0` for an `r × c` matrix with `c > r`.
///
/// Gauss-Jordan elimination with largest-magnitude pivots; the first free
/// column gets coefficient 1, and the result is normalized so that its first
/// nonzero entry is positive.
pub fn null_vector<T: Scalar>(m: &[Vec<T>], cols: usize) -> Vec<T> {
    let mut a: Vec<Vec<T>> = m.to_vec();
    let rows = a.len();
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let best = (row..rows)
            .filter(|&i| !a[i][col].is_negligible())
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    // Prefer the earlier row on ties.
                    .then(j.cmp(&i))
            });
        let Some(p) = best else { continue };
        a.swap(row, p);
        let pivot = a[row][col].clone();
        for v in a[row].iter_mut() {
            *v = v.clone() / pivot.clone();
        }
        let pivot_row = a[row].clone();
        for (i, r) in a.iter_mut().enumerate() {
            if i != row && !r[col].is_zero() {
                let f = r[col].clone();
                for (x, p) in r.iter_mut().zip(&pivot_row) {
                    *x = x.clone() - f.clone() * p.clone();
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free = (0..cols)
        .find(|c| !pivots.contains(c))
        .expect("more columns than rows leaves a free column");
    let mut d = vec![T::zero(); cols];
    d[free] = T::one();
    for (i, &pc) in pivots.iter().enumerate() {
        d[pc] = -a[i][free].clone();
    }
    if let Some(first) = d.iter().find(|v| !v.is_negligible()) {
        if *first < T::zero() {
            for v in d.iter_mut() {
                *v = -v.clone();
            }
        }
    }
    d
}
