//! Probability vectors and labeled datasets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Absolute tolerance on `|sum(p) - 1|`.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// A validated classifier output over `K >= 2` classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector<T> {
    probs: Vec<T>,
}

impl<T: Real> ProbabilityVector<T> {
    /// Validates without modifying the entries.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidProbabilities(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        let mut sum = T::zero();
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < T::zero() {
                return Err(Error::InvalidProbabilities(format!(
                    "entry {i} is {p}, expected a finite value >= 0"
                )));
            }
            sum = sum + p;
        }
        if (sum - T::one()).abs() > T::lit(SUM_TOLERANCE) {
            return Err(Error::InvalidProbabilities(format!(
                "entries sum to {sum}, expected 1 within {SUM_TOLERANCE}"
            )));
        }
        Ok(Self { probs })
    }

    /// Clips negative entries to zero and rescales to unit mass.
    pub fn renormalized(mut probs: Vec<T>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidProbabilities(
                "non-finite entry cannot be renormalized".into(),
            ));
        }
        for p in probs.iter_mut() {
            if *p < T::zero() {
                *p = T::zero();
            }
        }
        let sum = probs.iter().fold(T::zero(), |acc, &p| acc + p);
        if sum <= T::zero() {
            return Err(Error::InvalidProbabilities(
                "no positive mass to renormalize".into(),
            ));
        }
        for p in probs.iter_mut() {
            *p = *p / sum;
        }
        Self::new(probs)
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    pub fn get(&self, label: usize) -> Result<T> {
        self.probs
            .get(label)
            .copied()
            .ok_or(Error::LabelOutOfRange {
                label,
                classes: self.probs.len(),
            })
    }

    /// Label indices ordered by descending probability; equal
    /// probabilities keep ascending label order.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.probs.len()).collect();
        // stable sort keeps ascending index among ties
        order.sort_by(|&a, &b| {
            self.probs[b]
                .partial_cmp(&self.probs[a])
                .expect("validated entries are finite")
        });
        order
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for ProbabilityVector<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<T>::deserialize(d)?;
        ProbabilityVector::new(probs).map_err(serde::de::Error::custom)
    }
}

/// One calibration or validation example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow<T: Real> {
    pub probs: ProbabilityVector<T>,
    pub label: usize,
}

/// Rows of `K`-class probability vectors with their true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledProbabilityDataset<T: Real> {
    num_classes: usize,
    rows: Vec<LabeledRow<T>>,
}

impl<T: Real> LabeledProbabilityDataset<T> {
    /// Checks that every row has `num_classes` entries and a label in range.
    /// Failures name the offending row.
    pub fn new(num_classes: usize, rows: Vec<LabeledRow<T>>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::domain(
                "K",
                format!("need K >= 2, got {num_classes}"),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            let k = row.probs.num_classes();
            if k != num_classes {
                return Err(Error::ClassMismatch {
                    expected: num_classes,
                    found: k,
                }
                .at_row(i));
            }
            if row.label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    label: row.label,
                    classes: num_classes,
                }
                .at_row(i));
            }
        }
        Ok(Self { num_classes, rows })
    }

    /// Infers `K` from the first row.
    pub fn from_rows(rows: Vec<LabeledRow<T>>) -> Result<Self> {
        let k = rows
            .first()
            .map(|r| r.probs.num_classes())
            .ok_or(Error::Empty("dataset has no rows"))?;
        Self::new(k, rows)
    }

    /// Convenience constructor from raw `(probs, label)` pairs.
    pub fn from_pairs(pairs: Vec<(Vec<T>, usize)>) -> Result<Self> {
        let rows = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (p, label))| {
                ProbabilityVector::new(p)
                    .map(|probs| LabeledRow { probs, label })
                    .map_err(|e| e.at_row(i))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn rows(&self) -> &[LabeledRow<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Splits into the first `at` rows and the remainder.
    pub fn split_at(self, at: usize) -> (Self, Self) {
        let mut head = self.rows;
        let tail = head.split_off(at.min(head.len()));
        (
            Self {
                num_classes: self.num_classes,
                rows: head,
            },
            Self {
                num_classes: self.num_classes,
                rows: tail,
            },
        )
    }
}
