//! Model uncertainty implied by a prediction set.
//!
//! For a set of size `m >= 1` out of `K` labels, calibrated on `n` points at
//! error level `delta`:
//!
//! ```text
//! u     = (m + delta - 1) / K                          pure uncertainty
//! L     = u (1 - delta) + delta - 1 / (n + 1)          lower bound
//! H     = u (n + 2) / (n + 1) + delta (1 - u)          upper bound
//! d     = H - L = (1 + u) / (n + 1)                    interval width
//! ```
//!
//! Reported bounds are clamped to `[0, 1]`. An empty set (`m = 0`) is the
//! fully uncertain case and reports the point value `1`.
//!
//! Everything here is generic over [`BoundScalar`], so the same code runs on
//! floats and on exact rationals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::BoundScalar;
use crate::sets::PredictionSet;

/// Certified uncertainty for one prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyQuantification<T> {
    pub u_pure: T,
    /// `max(L, 0)`.
    pub lower: T,
    /// `min(H, 1)`.
    pub upper: T,
    /// Pre-clamp width `(1 + u) / (n + 1)`; zero for an empty set.
    pub variation: T,
    pub raw_lower: T,
    pub raw_upper: T,
    pub m: usize,
    #[serde(rename = "K")]
    pub num_classes: usize,
    pub n: usize,
    pub delta: T,
    pub lower_clamped: bool,
    pub upper_clamped: bool,
    pub degenerate_empty: bool,
}

/// Unclamped bounds for a non-empty set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawBounds<T> {
    pub u_pure: T,
    pub lower: T,
    pub upper: T,
}

/// `(m + delta - 1) / K` for `1 <= m <= K`.
pub fn pure_uncertainty<T: BoundScalar>(m: usize, delta: T, num_classes: usize) -> Result<T> {
    check_common(delta, num_classes)?;
    if m == 0 {
        return Err(Error::domain(
            "m",
            "empty sets have no pure uncertainty; use quantify",
        ));
    }
    if m > num_classes {
        return Err(Error::domain("m", format!("{m} exceeds K = {num_classes}")));
    }
    Ok((T::from_count(m) + delta - T::one()) / T::from_count(num_classes))
}

/// `(1 + u) / (n + 1)`.
pub fn uncertainty_variation<T: BoundScalar>(u_pure: T, n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::domain("n", "calibration size must be >= 1"));
    }
    if u_pure < T::zero() || u_pure > T::one() {
        return Err(Error::domain(
            "u_pure",
            format!("must lie in [0, 1], got {u_pure:?}"),
        ));
    }
    Ok((T::one() + u_pure) / T::from_count(n + 1))
}

/// Unclamped `L` and `H` for `m >= 1`.
///
/// Both bounds share the term `u (1 - delta) + delta`:
/// `L = base - 1/(n+1)` and `H = base + u/(n+1)`, which is the same algebra
/// as the expanded forms above and keeps `H - L` within a couple of ulps of
/// `(1 + u)/(n + 1)`.
pub fn raw_bounds<T: BoundScalar>(
    m: usize,
    delta: T,
    num_classes: usize,
    n: usize,
) -> Result<RawBounds<T>> {
    let u = pure_uncertainty(m, delta, num_classes)?;
    if n == 0 {
        return Err(Error::domain("n", "calibration size must be >= 1"));
    }
    let n1 = T::from_count(n + 1);
    let base = u * (T::one() - delta) + delta;
    Ok(RawBounds {
        u_pure: u,
        lower: base - T::one() / n1,
        upper: base + u / n1,
    })
}

pub fn quantify<T: BoundScalar>(
    m: usize,
    delta: T,
    num_classes: usize,
    n: usize,
) -> Result<UncertaintyQuantification<T>> {
    check_common(delta, num_classes)?;
    if n == 0 {
        return Err(Error::domain("n", "calibration size must be >= 1"));
    }
    if m > num_classes {
        return Err(Error::domain("m", format!("{m} exceeds K = {num_classes}")));
    }
    if m == 0 {
        return Ok(UncertaintyQuantification {
            u_pure: (delta - T::one()) / T::from_count(num_classes),
            lower: T::one(),
            upper: T::one(),
            variation: T::zero(),
            raw_lower: T::one(),
            raw_upper: T::one(),
            m,
            num_classes,
            n,
            delta,
            lower_clamped: false,
            upper_clamped: false,
            degenerate_empty: true,
        });
    }
    let raw = raw_bounds(m, delta, num_classes, n)?;
    Ok(UncertaintyQuantification {
        u_pure: raw.u_pure,
        lower: raw.lower.max_of(T::zero()),
        upper: raw.upper.min_of(T::one()),
        variation: uncertainty_variation(raw.u_pure, n)?,
        raw_lower: raw.lower,
        raw_upper: raw.upper,
        m,
        num_classes,
        n,
        delta,
        lower_clamped: raw.lower < T::zero(),
        upper_clamped: raw.upper > T::one(),
        degenerate_empty: false,
    })
}

pub fn quantify_batch<T: BoundScalar>(
    sets: &[PredictionSet],
    delta: T,
    n: usize,
) -> Result<Vec<UncertaintyQuantification<T>>> {
    let Some(first) = sets.first() else {
        return Ok(Vec::new());
    };
    let k = first.num_classes();
    sets.iter()
        .enumerate()
        .map(|(i, s)| {
            if s.num_classes() != k {
                return Err(Error::ClassMismatch {
                    expected: k,
                    found: s.num_classes(),
                }
                .at_row(i));
            }
            quantify(s.m(), delta, k, n).map_err(|e| e.at_row(i))
        })
        .collect()
}

fn check_common<T: BoundScalar>(delta: T, num_classes: usize) -> Result<()> {
    if delta < T::zero() || delta > T::one() {
        return Err(Error::domain(
            "delta",
            format!("must lie in [0, 1], got {delta:?}"),
        ));
    }
    if num_classes < 2 {
        return Err(Error::domain(
            "K",
            format!("need K >= 2, got {num_classes}"),
        ));
    }
    Ok(())
}
