//! Split-conformal threshold.
//!
//! For `n` calibration scores and error level `delta`, the threshold is the
//! `r`-th smallest score with `r = ceil((n + 1)(1 - delta))`. When `r > n` no
//! finite threshold gives the required coverage and the result is
//! [`Threshold::Unbounded`], which admits every label. `delta = 1` gives
//! `r = 0`, which is clamped to the minimum score.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::LabeledProbabilityDataset;
use crate::error::{Error, Result};
use crate::nonconformity::{score_batch, ScoreConfig};
use crate::scalar::Real;

/// Tolerance used when snapping `(n + 1)(1 - delta)` to an integer before
/// taking the ceiling, relative to its magnitude.
const RANK_SNAP: f64 = 1e-9;

/// Allowed probability that the true label falls outside the set.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct CoverageErrorLevel<T>(T);

impl<T: Real> CoverageErrorLevel<T> {
    pub fn new(delta: T) -> Result<Self> {
        if delta >= T::zero() && delta <= T::one() {
            Ok(Self(delta))
        } else {
            Err(Error::domain(
                "delta",
                format!("must lie in [0, 1], got {delta}"),
            ))
        }
    }

    pub fn value(self) -> T {
        self.0
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for CoverageErrorLevel<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        CoverageErrorLevel::new(T::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// The conformal threshold `q_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold<T> {
    Finite(T),
    /// Every label is admitted.
    Unbounded,
}

impl<T: Real> Threshold<T> {
    /// Whether a score passes the closed test `score <= q_hat`.
    pub fn admits(&self, score: T) -> bool {
        match *self {
            Threshold::Finite(q) => score <= q,
            Threshold::Unbounded => true,
        }
    }

    pub fn finite(&self) -> Option<T> {
        match *self {
            Threshold::Finite(q) => Some(q),
            Threshold::Unbounded => None,
        }
    }

    /// `+inf` for the unbounded sentinel.
    pub fn as_real(&self) -> T {
        self.finite().unwrap_or_else(T::infinity)
    }
}

impl<T: Real> PartialOrd for Threshold<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.as_real().partial_cmp(&other.as_real())
    }
}

impl<T: Real + Serialize> Serialize for Threshold<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threshold::Finite(q) => q.serialize(s),
            Threshold::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Threshold<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Value(T),
            Sentinel(String),
        }
        match Repr::<T>::deserialize(d)? {
            Repr::Value(q) if q.is_finite() => Ok(Threshold::Finite(q)),
            Repr::Value(q) => Err(serde::de::Error::custom(format!("non-finite q_hat {q}"))),
            Repr::Sentinel(s) if s == "inf" => Ok(Threshold::Unbounded),
            Repr::Sentinel(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// A threshold together with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult<T: Real> {
    pub q_hat: Threshold<T>,
    pub n: usize,
    pub delta: CoverageErrorLevel<T>,
    #[serde(rename = "K")]
    pub num_classes: usize,
    pub score: ScoreConfig<T>,
}

/// `ceil((n + 1)(1 - delta))`, unclamped: may be `0` (delta = 1) or `n + 1`.
pub fn quantile_rank<T: Real>(n: usize, delta: CoverageErrorLevel<T>) -> usize {
    let x = T::from_count(n + 1) * (T::one() - delta.value());
    let nearest = x.round();
    let r = if (x - nearest).abs() <= T::lit(RANK_SNAP) * x.max(T::one()) {
        nearest
    } else {
        x.ceil()
    };
    r.to_usize().expect("rank is a non-negative integer")
}

/// The `r`-th smallest score, or [`Threshold::Unbounded`] when `r > n`.
pub fn conformal_quantile<T: Real>(
    scores: &[T],
    delta: CoverageErrorLevel<T>,
) -> Result<Threshold<T>> {
    if scores.is_empty() {
        return Err(Error::Empty("calibration scores"));
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore { index });
    }
    let n = scores.len();
    let r = quantile_rank(n, delta);
    if r > n {
        return Ok(Threshold::Unbounded);
    }
    if r == 0 {
        log::warn!("delta = 1 yields rank 0; using the minimum calibration score");
    }
    let r = r.max(1);
    let mut sorted = scores.to_vec();
    let (_, q, _) = sorted.select_nth_unstable_by(r - 1, |a, b| {
        a.partial_cmp(b).expect("scores checked finite")
    });
    Ok(Threshold::Finite(*q))
}

pub fn calibrate<T: Real>(
    dataset: &LabeledProbabilityDataset<T>,
    config: &ScoreConfig<T>,
    delta: CoverageErrorLevel<T>,
) -> Result<CalibrationResult<T>> {
    if dataset.is_empty() {
        return Err(Error::Empty("calibration dataset"));
    }
    let scores = score_batch(dataset, config)?;
    Ok(CalibrationResult {
        q_hat: conformal_quantile(&scores, delta)?,
        n: scores.len(),
        delta,
        num_classes: dataset.num_classes(),
        score: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(d: f64) -> CoverageErrorLevel<f64> {
        CoverageErrorLevel::new(d).unwrap()
    }

    #[test]
    fn quantile_examples() {
        let s: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        assert_eq!(
            conformal_quantile(&s, level(0.1)).unwrap(),
            Threshold::Finite(0.9)
        );
        assert_eq!(
            conformal_quantile(&[0.3, 0.1, 0.4, 0.2], level(0.5)).unwrap(),
            Threshold::Finite(0.3)
        );
        assert_eq!(
            conformal_quantile(&s, level(0.0)).unwrap(),
            Threshold::Unbounded
        );
        assert_eq!(
            conformal_quantile(&s, level(1.0)).unwrap(),
            Threshold::Finite(0.1)
        );
    }

    #[test]
    fn quantile_errors() {
        assert_eq!(
            conformal_quantile::<f64>(&[], level(0.1))
                .unwrap_err()
                .code(),
            "empty_input"
        );
        let err = conformal_quantile(&[0.1, f64::NAN], level(0.1)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteScore { index: 1 }));
        assert!(CoverageErrorLevel::new(1.5).is_err());
        assert!(CoverageErrorLevel::new(-0.1).is_err());
    }

    #[test]
    fn rank_matches_integer_ceiling() {
        for n in 1..300usize {
            for k in 0..=100usize {
                let exact = ((n + 1) * (100 - k)).div_ceil(100);
                assert_eq!(
                    quantile_rank(n, level(k as f64 / 100.0)),
                    exact,
                    "n={n} k={k}"
                );
            }
        }
        assert_eq!(quantile_rank(9, level(0.1)), 9);
        assert_eq!(quantile_rank(9, level(1.0)), 0);
        assert_eq!(quantile_rank(9, level(0.0)), 10);
    }

    #[test]
    fn calibrate_examples() {
        let ds = LabeledProbabilityDataset::from_pairs(
            (1..=9)
                .map(|i| {
                    let p = 1.0 - i as f64 / 10.0;
                    (vec![p, 1.0 - p], 0)
                })
                .collect(),
        )
        .unwrap();
        let c = calibrate(&ds, &ScoreConfig::lac(), level(0.1)).unwrap();
        assert_eq!(c.n, 9);
        assert!((c.q_hat.finite().unwrap() - 0.9).abs() < 1e-15);

        let one = LabeledProbabilityDataset::from_pairs(vec![(vec![0.6, 0.4], 1)]).unwrap();
        let c = calibrate(&one, &ScoreConfig::lac(), level(0.5)).unwrap();
        assert_eq!(c.q_hat, Threshold::Finite(0.6));
    }

    #[test]
    fn threshold_json_sentinel() {
        let j = serde_json::to_string(&Threshold::<f64>::Unbounded).unwrap();
        assert_eq!(j, "\"inf\"");
        let t: Threshold<f64> = serde_json::from_str("0.25").unwrap();
        assert_eq!(t, Threshold::Finite(0.25));
        assert!(serde_json::from_str::<Threshold<f64>>("\"nan\"").is_err());
    }
}
