//! Nonconformity scores for classification.
//!
//! Three families are supported:
//!
//! - **LAC**: `1 - p[y]`.
//! - **APS**: probability mass of every label ranked ahead of `y` (descending
//!   probability, ties broken by ascending label index) plus `u * p[y]`, where
//!   `u = 1` in deterministic mode and `u ~ U[0, 1)` in randomized mode.
//! - **RAPS**: the APS score plus `lambda * max(0, rank(y) - k_reg)` with a
//!   1-based rank.
//!
//! Larger scores mean the label conforms less to the model output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledProbabilityDataset, ProbabilityVector};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Lac,
    Aps,
    Raps,
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreKind::Lac => "lac",
            ScoreKind::Aps => "aps",
            ScoreKind::Raps => "raps",
        })
    }
}

/// Which score to compute, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig<T> {
    pub kind: ScoreKind,
    /// RAPS penalty weight.
    #[serde(default)]
    pub lambda: T,
    /// Number of leading ranks exempt from the RAPS penalty.
    #[serde(default)]
    pub k_reg: usize,
    #[serde(default)]
    pub randomized: bool,
    #[serde(default)]
    pub seed: u64,
}

impl<T: Real> ScoreConfig<T> {
    pub fn lac() -> Self {
        Self::of_kind(ScoreKind::Lac)
    }

    pub fn aps() -> Self {
        Self::of_kind(ScoreKind::Aps)
    }

    pub fn raps(lambda: T, k_reg: usize) -> Self {
        Self {
            lambda,
            k_reg,
            ..Self::of_kind(ScoreKind::Raps)
        }
    }

    fn of_kind(kind: ScoreKind) -> Self {
        Self {
            kind,
            lambda: T::zero(),
            k_reg: 0,
            randomized: false,
            seed: 0,
        }
    }

    /// Enables per-row uniform draws derived from `seed` and the row index.
    pub fn randomized(mut self, seed: u64) -> Self {
        self.randomized = true;
        self.seed = seed;
        self
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.kind == ScoreKind::Raps {
            if !self.lambda.is_finite() || self.lambda < T::zero() {
                return Err(Error::domain(
                    "lambda",
                    format!("must be >= 0, got {}", self.lambda),
                ));
            }
            if self.k_reg > num_classes {
                return Err(Error::domain(
                    "k_reg",
                    format!("must be <= K = {num_classes}, got {}", self.k_reg),
                ));
            }
        }
        Ok(())
    }

    /// Score of one label. `u` is ignored for LAC.
    pub fn score(&self, probs: &ProbabilityVector<T>, label: usize, u: Option<T>) -> Result<T> {
        match self.kind {
            ScoreKind::Lac => score_lac(probs, label),
            ScoreKind::Aps => score_aps(probs, label, u),
            ScoreKind::Raps => score_raps(probs, label, self.lambda, self.k_reg, u),
        }
    }

    /// Converts the numeric parameters to another scalar type.
    pub fn cast<U: Real>(&self) -> ScoreConfig<U> {
        ScoreConfig {
            kind: self.kind,
            lambda: U::from(self.lambda).expect("lambda representable"),
            k_reg: self.k_reg,
            randomized: self.randomized,
            seed: self.seed,
        }
    }
}

pub fn score_lac<T: Real>(probs: &ProbabilityVector<T>, label: usize) -> Result<T> {
    Ok(T::one() - probs.get(label)?)
}

pub fn score_aps<T: Real>(probs: &ProbabilityVector<T>, label: usize, u: Option<T>) -> Result<T> {
    let p = probs.get(label)?;
    let u = check_uniform(u)?;
    let (above, _) = mass_above(probs, label);
    Ok(above + u * p)
}

pub fn score_raps<T: Real>(
    probs: &ProbabilityVector<T>,
    label: usize,
    lambda: T,
    k_reg: usize,
    u: Option<T>,
) -> Result<T> {
    let p = probs.get(label)?;
    let u = check_uniform(u)?;
    check_raps_params(lambda, k_reg, probs.num_classes())?;
    let (above, rank) = mass_above(probs, label);
    Ok(above + u * p + rank_penalty(lambda, k_reg, rank))
}

/// Deterministic scores for every label of `probs`, indexed by label.
///
/// Accumulates mass in the same order as the single-label functions, so the
/// results are bit-identical to calling them label by label.
pub fn label_scores<T: Real>(probs: &ProbabilityVector<T>, config: &ScoreConfig<T>) -> Vec<T> {
    let p = probs.as_slice();
    match config.kind {
        ScoreKind::Lac => p.iter().map(|&pi| T::one() - pi).collect(),
        ScoreKind::Aps | ScoreKind::Raps => {
            let mut out = vec![T::zero(); p.len()];
            let mut above = T::zero();
            for (pos, &j) in probs.descending_order().iter().enumerate() {
                let mut s = above + T::one() * p[j];
                if config.kind == ScoreKind::Raps {
                    s = s + rank_penalty(config.lambda, config.k_reg, pos + 1);
                }
                out[j] = s;
                above = above + p[j];
            }
            out
        }
    }
}

/// Configured score of every row. Randomized draws come from
/// `rng::stream(config.seed, row)`, so results do not depend on batch order.
pub fn score_batch<T: Real>(
    dataset: &LabeledProbabilityDataset<T>,
    config: &ScoreConfig<T>,
) -> Result<Vec<T>> {
    config.validate(dataset.num_classes())?;
    dataset
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let u = config.randomized.then(|| row_uniform::<T>(config.seed, i));
            config
                .score(&row.probs, row.label, u)
                .map_err(|e| e.at_row(i))
        })
        .collect()
}

/// The uniform draw used for row `row` in randomized mode.
pub fn row_uniform<T: Real>(seed: u64, row: usize) -> T {
    T::lit(rng::stream(seed, row as u64).random::<f64>())
}

/// Mass ranked strictly ahead of `label` and the label's 1-based rank.
fn mass_above<T: Real>(probs: &ProbabilityVector<T>, label: usize) -> (T, usize) {
    let p = probs.as_slice();
    let mut above = T::zero();
    for (pos, &j) in probs.descending_order().iter().enumerate() {
        if j == label {
            return (above, pos + 1);
        }
        above = above + p[j];
    }
    unreachable!("label index checked by caller")
}

fn rank_penalty<T: Real>(lambda: T, k_reg: usize, rank: usize) -> T {
    lambda * T::from_count(rank.saturating_sub(k_reg))
}

fn check_uniform<T: Real>(u: Option<T>) -> Result<T> {
    match u {
        None => Ok(T::one()),
        Some(u) if u >= T::zero() && u <= T::one() => Ok(u),
        Some(u) => Err(Error::domain("u", format!("must lie in [0, 1], got {u}"))),
    }
}

fn check_raps_params<T: Real>(lambda: T, k_reg: usize, k: usize) -> Result<()> {
    ScoreConfig::raps(lambda, k_reg).validate(k)
}
