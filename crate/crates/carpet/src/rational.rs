//! Exact rational arithmetic helpers.
//!
//! All carpet geometry is decided over `BigRational`: adjacency, intersection
//! type and segment lengths are never settled by a floating tolerance.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use num_traits::ToPrimitive;

/// Exact rational number, always stored in lowest terms with positive denominator.
pub type Ratio = BigRational;

/// Exact point in the plane.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub x: Ratio,
    pub y: Ratio,
}

impl Point {
    pub fn new(x: Ratio, y: Ratio) -> Self {
        Point { x, y }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (ratio_to_f64(&self.x), ratio_to_f64(&self.y))
    }
}

pub fn ratio(num: i64, den: i64) -> Ratio {
    assert!(den != 0, "zero denominator");
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

pub fn ratio_int(num: i64) -> Ratio {
    Ratio::from_integer(BigInt::from(num))
}

pub fn ratio_to_f64(r: &Ratio) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Parses a decimal-free fraction string: `"p/q"` or a bare integer `"p"`.
pub fn parse_ratio(s: &str) -> Result<Ratio, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s, "1"),
    };
    let p: BigInt = num
        .parse()
        .map_err(|_| format!("bad numerator in {s:?}"))?;
    let q: BigInt = den
        .parse()
        .map_err(|_| format!("bad denominator in {s:?}"))?;
    if q.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Ratio::new(p, q))
}

/// Canonical `p/q` form (q >= 1), the on-disk representation.
pub fn format_ratio(r: &Ratio) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Exact integer value of `r * den`; panics when `den` is not a common
/// denominator for `r`.
pub fn ratio_in_units(r: &Ratio, den: &BigInt) -> BigInt {
    let v = r * Ratio::from_integer(den.clone());
    assert!(v.is_integer(), "denominator mismatch");
    v.to_integer()
}

/// Largest integer <= r.
pub fn ratio_floor(r: &Ratio) -> BigInt {
    r.floor().to_integer()
}

pub fn is_nonneg(r: &Ratio) -> bool {
    !r.is_negative()
}

pub fn one() -> Ratio {
    Ratio::one()
}

pub fn zero() -> Ratio {
    Ratio::zero()
}
