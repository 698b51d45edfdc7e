//! Scalar types the step-function algebra is generic over.
//!
//! Three scalars are supported out of the box: [`Rational`] (exact, arbitrary
//! precision), `f64` and `f32`. Breakpoints are always rational regardless of
//! the value scalar; only cell values use `T`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Exact rational number in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// Field element used for cell values.
///
/// Exact scalars report `EXACT = true` and treat every tolerance as zero, so
/// the same generic code path yields bit-exact certificates for [`Rational`]
/// and toleranced ones for floats.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + Send + Sync + 'static
{
    const EXACT: bool;

    /// Tolerance of the checked identities (norming, orthogonality, Gram):
    /// zero for exact scalars.
    const IDENTITY_TOL: f64;

    /// Magnitude below which a value is treated as zero.
    fn zero_tol() -> Self;

    fn from_rational(r: &Rational) -> Self;

    /// Rational breakpoint for a split fraction. Exact scalars convert
    /// exactly; floats snap to a nearby rational of small height so that
    /// re-derived points coincide instead of leaving sliver cells.
    fn to_rational(&self) -> Rational;

    fn to_f64(&self) -> f64;

    fn from_f64(x: f64) -> Self;

    /// Canonical text form used by every serializer in the crate.
    fn encode(&self) -> String;

    fn decode(s: &str) -> Option<Self>;

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::zero_tol()
    }

    /// `self == other` for exact scalars, `|self - other| <= tol` otherwise.
    fn near(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            (self.clone() - other.clone()).abs().to_f64() <= tol
        }
    }

    /// `self <= other` for exact scalars, `self <= other + tol` otherwise.
    fn le_tol(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self <= other
        } else {
            self.to_f64() <= other.to_f64() + tol
        }
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    const IDENTITY_TOL: f64 = 0.0;

    fn zero_tol() -> Self {
        Self::zero()
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }

    fn encode(&self) -> String {
        // Ratio's Display already prints "p" when the denominator is one.
        self.to_string()
    }

    fn decode(s: &str) -> Option<Self> {
        parse_rational(s)
    }
}

macro_rules! float_scalar {
    ($t:ty, $zero_tol:expr, $snap:expr, $identity_tol:expr) => {
        impl Scalar for $t {
            const EXACT: bool = false;
            const IDENTITY_TOL: f64 = $identity_tol;

            fn zero_tol() -> Self {
                $zero_tol
            }

            fn from_rational(r: &Rational) -> Self {
                ToPrimitive::to_f64(r).unwrap_or(f64::NAN) as $t
            }

            fn to_rational(&self) -> Rational {
                approximate(*self as f64, $snap)
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn from_f64(x: f64) -> Self {
                x as $t
            }

            fn encode(&self) -> String {
                format!("{:?}", self)
            }

            fn decode(s: &str) -> Option<Self> {
                <$t>::from_str(s.trim()).ok().filter(|x| x.is_finite())
            }
        }
    };
}

float_scalar!(f64, 1e-12, 1e-14, 1e-9);
float_scalar!(f32, 1e-5, 1e-7, 1e-4);

/// Parses `"p/q"` or `"p"`. The result is reduced; a zero denominator is
/// rejected.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).ok()?;
            let q = BigInt::from_str(q.trim()).ok()?;
            if q.is_zero() {
                return None;
            }
            Some(Rational::new(p, q))
        }
        None => BigInt::from_str(s).ok().map(Rational::from_integer),
    }
}

/// Continued-fraction approximation: the first convergent within `tol` of
/// `x`. Falls back to the exact binary value of `x` if none is found.
pub fn approximate(x: f64, tol: f64) -> Rational {
    if !x.is_finite() {
        panic!("cannot approximate non-finite value {x}");
    }
    let exact = BigRational::from_float(x).expect("finite");
    let target = x;
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let mut rest = exact.clone();
    for _ in 0..64 {
        let a = rest.floor();
        let a_int = a.to_integer();
        let h_next = &a_int * &h + &h_prev;
        let k_next = &a_int * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        let candidate = Rational::new(h.clone(), k.clone());
        let err = (ToPrimitive::to_f64(&candidate).unwrap_or(f64::NAN) - target).abs();
        if err <= tol {
            return candidate;
        }
        let frac = rest - a;
        if frac.is_zero() {
            break;
        }
        rest = frac.recip();
    }
    exact
}

/// Shorthand for small exact constants in code and tests.
pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// `2^{-k}` as an exact rational.
pub fn dyadic_power(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k)
}

/// Point at fraction `x` of `[lo, hi]`.
///
/// Exact scalars give the exact point. Float scalars compute it in `f64` and
/// take that value's exact binary expansion, clamped to `[lo, hi]`, so
/// repeated splitting keeps dyadic breakpoints instead of compounding the
/// denominators of rational approximations.
pub fn split_point<T: Scalar>(lo: &Rational, hi: &Rational, x: &T) -> Rational {
    if T::EXACT {
        return lo + x.to_rational() * (hi - lo);
    }
    let (a, b) = (Scalar::to_f64(lo), Scalar::to_f64(hi));
    let s = BigRational::from_float(a + x.to_f64() * (b - a)).expect("finite split");
    s.clamp(lo.clone(), hi.clone())
}

/// Converts a scalar between representations through `f64` (floats) or
/// exactly (rational to rational).
pub fn convert<S: Scalar, T: Scalar>(x: &S) -> T {
    if S::EXACT && T::EXACT {
        T::from_rational(&x.to_rational())
    } else {
        T::from_f64(x.to_f64())
    }
}

pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_rational(&Rational::from_usize(n).expect("usize fits"))
}
