//! Prediction set construction.

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationResult, Threshold};
use crate::dataset::{LabeledProbabilityDataset, ProbabilityVector};
use crate::error::{Error, Result};
use crate::nonconformity::label_scores;
use crate::scalar::Real;

/// Sorted, distinct labels out of `num_classes`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredictionSet {
    labels: Vec<usize>,
    num_classes: usize,
}

impl PredictionSet {
    pub fn new(mut labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        labels.sort_unstable();
        labels.dedup();
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: num_classes,
            });
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    pub fn full(num_classes: usize) -> Self {
        Self {
            labels: (0..num_classes).collect(),
            num_classes,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Set size.
    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn contains(&self, label: usize) -> bool {
        self.labels.binary_search(&label).is_ok()
    }

    pub fn is_subset(&self, other: &PredictionSet) -> bool {
        self.labels.iter().all(|&l| other.contains(l))
    }
}

/// Labels whose deterministic score under `calib.score` is at most `q_hat`.
pub fn build_set_generic<T: Real>(
    probs: &ProbabilityVector<T>,
    calib: &CalibrationResult<T>,
) -> Result<PredictionSet> {
    let k = probs.num_classes();
    if k != calib.num_classes {
        return Err(Error::ClassMismatch {
            expected: calib.num_classes,
            found: k,
        });
    }
    if calib.q_hat == Threshold::Unbounded {
        return Ok(PredictionSet::full(k));
    }
    let labels = label_scores(probs, &calib.score)
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| calib.q_hat.admits(s))
        .map(|(label, _)| label)
        .collect();
    Ok(PredictionSet {
        labels,
        num_classes: k,
    })
}

/// Labels with `p >= 1 - q_hat`.
///
/// The comparison is evaluated as `1 - p <= q_hat`, the same rounding the
/// LAC score uses, so both rules agree bit-for-bit in floating point.
pub fn build_set_threshold<T: Real>(
    probs: &ProbabilityVector<T>,
    q_hat: Threshold<T>,
) -> PredictionSet {
    let labels = probs
        .as_slice()
        .iter()
        .enumerate()
        .filter(|&(_, &p)| q_hat.admits(T::one() - p))
        .map(|(label, _)| label)
        .collect();
    PredictionSet {
        labels,
        num_classes: probs.num_classes(),
    }
}

/// Per-row prediction with its coverage indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetPrediction {
    pub row: usize,
    pub set: PredictionSet,
    pub covered: bool,
}

pub fn predict_batch<T: Real>(
    dataset: &LabeledProbabilityDataset<T>,
    calib: &CalibrationResult<T>,
) -> Result<Vec<SetPrediction>> {
    if dataset.num_classes() != calib.num_classes {
        return Err(Error::ClassMismatch {
            expected: calib.num_classes,
            found: dataset.num_classes(),
        });
    }
    dataset
        .rows()
        .iter()
        .enumerate()
        .map(|(row, r)| {
            let set = build_set_generic(&r.probs, calib).map_err(|e| e.at_row(row))?;
            let covered = set.contains(r.label);
            Ok(SetPrediction { row, set, covered })
        })
        .collect()
}

/// JSON-lines record `{row, labels, m, covered}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetRecord {
    pub row: usize,
    pub labels: Vec<usize>,
    pub m: usize,
    pub covered: bool,
}

impl From<&SetPrediction> for SetRecord {
    fn from(p: &SetPrediction) -> Self {
        Self {
            row: p.row,
            labels: p.set.labels.clone(),
            m: p.set.m(),
            covered: p.covered,
        }
    }
}

impl SetRecord {
    /// Rebuilds the set, checking `m` against the label list.
    pub fn to_set(&self, num_classes: usize) -> Result<PredictionSet> {
        let set = PredictionSet::new(self.labels.clone(), num_classes)?;
        if set.m() != self.m || set.m() != self.labels.len() {
            return Err(Error::domain(
                "m",
                format!("m = {} disagrees with {} distinct labels", self.m, set.m()),
            ));
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::CoverageErrorLevel;
    use crate::nonconformity::ScoreConfig;

    fn pv(p: &[f64]) -> ProbabilityVector<f64> {
        ProbabilityVector::new(p.to_vec()).unwrap()
    }

    fn calib(q: Threshold<f64>, score: ScoreConfig<f64>, k: usize) -> CalibrationResult<f64> {
        CalibrationResult {
            q_hat: q,
            n: 10,
            delta: CoverageErrorLevel::new(0.1).unwrap(),
            num_classes: k,
            score,
        }
    }

    #[test]
    fn generic_examples() {
        let c = calib(Threshold::Finite(0.85), ScoreConfig::lac(), 3);
        assert_eq!(
            build_set_generic(&pv(&[0.7, 0.2, 0.1]), &c)
                .unwrap()
                .labels(),
            &[0, 1]
        );

        let c = calib(Threshold::Unbounded, ScoreConfig::aps(), 3);
        assert_eq!(build_set_generic(&pv(&[0.7, 0.2, 0.1]), &c).unwrap().m(), 3);

        let c = calib(Threshold::Finite(0.5), ScoreConfig::aps(), 3);
        assert_eq!(
            build_set_generic(&pv(&[0.5, 0.3, 0.2]), &c)
                .unwrap()
                .labels(),
            &[0]
        );

        let err = build_set_generic(&pv(&[0.5, 0.5]), &c).unwrap_err();
        assert_eq!(err.code(), "class_mismatch");
    }

    #[test]
    fn threshold_examples() {
        let p = pv(&[0.7, 0.2, 0.05, 0.05]);
        assert_eq!(
            build_set_threshold(&p, Threshold::Finite(0.4)).labels(),
            &[0]
        );
        assert_eq!(
            build_set_threshold(&p, Threshold::Finite(0.85)).labels(),
            &[0, 1]
        );
        assert_eq!(build_set_threshold(&p, Threshold::Finite(1.0)).m(), 4);
        assert_eq!(build_set_threshold(&p, Threshold::Unbounded).m(), 4);
    }

    #[test]
    fn batch_coverage_flags() {
        let ds = LabeledProbabilityDataset::from_pairs(vec![
            (vec![0.7, 0.2, 0.1], 2),
            (vec![0.9, 0.05, 0.05], 0),
        ])
        .unwrap();
        let c = calib(Threshold::Finite(0.85), ScoreConfig::lac(), 3);
        let out = predict_batch(&ds, &c).unwrap();
        assert_eq!(
            out.iter().map(|p| p.set.m()).collect::<Vec<_>>(),
            vec![2, 1]
        );
        assert_eq!(
            out.iter().map(|p| p.covered).collect::<Vec<_>>(),
            vec![false, true]
        );

        let c = calib(Threshold::Unbounded, ScoreConfig::lac(), 3);
        assert!(predict_batch(&ds, &c)
            .unwrap()
            .iter()
            .all(|p| p.covered && p.set.m() == 3));
    }

    #[test]
    fn record_validation() {
        let r = SetRecord {
            row: 0,
            labels: vec![1, 0],
            m: 2,
            covered: true,
        };
        assert_eq!(r.to_set(3).unwrap().labels(), &[0, 1]);
        assert!(SetRecord { m: 3, ..r.clone() }.to_set(3).is_err());
        assert!(r.to_set(1).is_err());
    }
}
