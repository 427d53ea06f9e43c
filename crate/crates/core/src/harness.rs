//! Monte Carlo check of the split-conformal coverage guarantee.
//!
//! Each trial draws fresh exchangeable data: a class-probability vector from
//! a symmetric Dirichlet, the true label from that vector, and a model output
//! obtained by tempering the vector (`p^(1/temperature)`, renormalized). With
//! `temperature = 1` the model is a calibrated oracle. The first `n_cal` rows
//! calibrate, the remaining `n_val` rows are scored for coverage.
//!
//! Trial `t` uses the random stream `rng::stream(master_seed, t)`, so trials
//! run in parallel and results do not depend on scheduling.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, CoverageErrorLevel, Threshold};
use crate::dataset::{LabeledProbabilityDataset, LabeledRow, ProbabilityVector};
use crate::error::{Error, Result};
use crate::nonconformity::ScoreConfig;
use crate::rng;
use crate::scalar::Real;
use crate::sets::{predict_batch, PredictionSet};
use crate::uncertainty::{quantify_batch, UncertaintyQuantification};

fn default_alpha() -> f64 {
    1.0
}

fn default_temperature() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    #[serde(rename = "K")]
    pub num_classes: usize,
    pub n_cal: usize,
    pub n_val: usize,
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub dirichlet_alpha: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    pub delta: f64,
    pub score: ScoreConfig<f64>,
    #[serde(default)]
    pub master_seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::domain("K", "need K >= 2"));
        }
        for (name, v) in [
            ("n_cal", self.n_cal),
            ("n_val", self.n_val),
            ("trials", self.trials),
        ] {
            if v == 0 {
                return Err(Error::domain(name, "must be >= 1"));
            }
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return Err(Error::domain(
                "dirichlet_alpha",
                "must be a positive finite number",
            ));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::domain(
                "temperature",
                "must be a positive finite number",
            ));
        }
        CoverageErrorLevel::new(self.delta)?;
        self.score.validate(self.num_classes)
    }
}

/// Generates `n_cal + n_val` rows for one trial.
pub fn synth_generate<T: Real>(
    cfg: &SynthConfig,
    trial_index: usize,
) -> Result<LabeledProbabilityDataset<T>> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.master_seed, trial_index as u64);
    let gamma = Gamma::new(cfg.dirichlet_alpha, 1.0)
        .map_err(|e| Error::domain("dirichlet_alpha", e.to_string()))?;
    let k = cfg.num_classes;
    let mut draw = vec![0.0_f64; k];
    let rows = (0..cfg.n_cal + cfg.n_val)
        .map(|i| {
            // all-zero gamma draws only happen for tiny alpha; redraw
            let sum = loop {
                draw.iter_mut().for_each(|g| *g = gamma.sample(&mut rng));
                let s: f64 = draw.iter().sum();
                if s > 0.0 {
                    break s;
                }
            };
            let truth: Vec<f64> = draw.iter().map(|g| g / sum).collect();
            let label = sample_categorical(&truth, rng.random::<f64>());
            let output = temper(truth, cfg.temperature);
            let probs = ProbabilityVector::new(output.into_iter().map(T::lit).collect())
                .map_err(|e| e.at_row(i))?;
            Ok(LabeledRow { probs, label })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledProbabilityDataset::new(k, rows)
}

/// Inverse-CDF draw; falls back to the last label with positive mass.
fn sample_categorical(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(p.len() - 1)
}

/// Elementwise `p^(1/temperature)`, renormalized. Identity at temperature 1.
pub fn temper(p: Vec<f64>, temperature: f64) -> Vec<f64> {
    if temperature == 1.0 {
        return p;
    }
    let powered: Vec<f64> = p.iter().map(|x| x.powf(1.0 / temperature)).collect();
    let sum: f64 = powered.iter().sum();
    powered.into_iter().map(|x| x / sum).collect()
}

/// Outcome of one calibrate-then-validate trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult<T> {
    pub trial_index: usize,
    pub q_hat: Threshold<T>,
    pub coverage: f64,
    pub set_sizes: Vec<usize>,
    pub covered: Vec<bool>,
    pub quantifications: Vec<UncertaintyQuantification<T>>,
}

pub fn run_trial<T: Real>(cfg: &SynthConfig, trial_index: usize) -> Result<TrialResult<T>> {
    let data = synth_generate::<T>(cfg, trial_index)?;
    let (cal, val) = data.split_at(cfg.n_cal);
    let delta = CoverageErrorLevel::new(T::lit(cfg.delta))?;
    let calib = calibrate(&cal, &cfg.score.cast::<T>(), delta)?;
    let preds = predict_batch(&val, &calib)?;
    let covered: Vec<bool> = preds.iter().map(|p| p.covered).collect();
    let sets: Vec<PredictionSet> = preds.into_iter().map(|p| p.set).collect();
    let quantifications = quantify_batch(&sets, delta.value(), calib.n)?;
    let hits = covered.iter().filter(|&&c| c).count();
    Ok(TrialResult {
        trial_index,
        q_hat: calib.q_hat,
        coverage: hits as f64 / covered.len() as f64,
        set_sizes: sets.iter().map(PredictionSet::m).collect(),
        covered,
        quantifications,
    })
}

/// Summary across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub mean_coverage: f64,
    pub coverage_per_trial: Vec<f64>,
    pub mean_set_size: f64,
    /// Set size -> number of validation predictions with that size.
    pub size_histogram: BTreeMap<usize, u64>,
    /// Set size -> coverage among predictions with that size.
    pub size_stratified_coverage: BTreeMap<usize, f64>,
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub theorem1_lower: f64,
    pub theorem1_upper: f64,
    pub mc_tolerance: f64,
    pub pass: bool,
}

impl HarnessReport {
    /// Whether `mean_coverage` lies in `[lower - tol, upper + tol]`.
    pub fn within(&self, tolerance: f64) -> bool {
        self.mean_coverage >= self.theorem1_lower - tolerance
            && self.mean_coverage <= self.theorem1_upper + tolerance
    }
}

/// Folds trial results in `trial_index` order.
///
/// `pass` checks the mean coverage against `[1 - delta, 1 - delta + 1/(n_cal+1)]`
/// widened by `3 sqrt(delta (1 - delta) / (trials n_val))`.
pub fn aggregate<T: Real>(trials: &[TrialResult<T>], cfg: &SynthConfig) -> Result<HarnessReport> {
    if trials.is_empty() {
        return Err(Error::Empty("trial results"));
    }
    let mut ordered: Vec<&TrialResult<T>> = trials.iter().collect();
    ordered.sort_by_key(|t| t.trial_index);

    let mut total = 0_u64;
    let mut hits = 0_u64;
    let mut size_sum = 0_u64;
    let mut lower_sum = 0.0;
    let mut upper_sum = 0.0;
    let mut histogram = BTreeMap::new();
    let mut bucket_hits: BTreeMap<usize, u64> = BTreeMap::new();
    for t in &ordered {
        for ((&m, &c), q) in t.set_sizes.iter().zip(&t.covered).zip(&t.quantifications) {
            total += 1;
            hits += c as u64;
            size_sum += m as u64;
            lower_sum += q.lower.to_f64().unwrap_or(f64::NAN);
            upper_sum += q.upper.to_f64().unwrap_or(f64::NAN);
            *histogram.entry(m).or_insert(0) += 1;
            *bucket_hits.entry(m).or_insert(0) += c as u64;
        }
    }
    if total == 0 {
        return Err(Error::Empty("validation predictions"));
    }
    let n_total = total as f64;
    let mean_coverage = hits as f64 / n_total;
    let size_stratified_coverage = histogram
        .iter()
        .map(|(&m, &count)| (m, bucket_hits[&m] as f64 / count as f64))
        .collect();
    let delta = cfg.delta;
    let mc_tolerance = 3.0 * (delta * (1.0 - delta) / n_total).sqrt();
    let mut report = HarnessReport {
        mean_coverage,
        coverage_per_trial: ordered.iter().map(|t| t.coverage).collect(),
        mean_set_size: size_sum as f64 / n_total,
        size_histogram: histogram,
        size_stratified_coverage,
        mean_lower: lower_sum / n_total,
        mean_upper: upper_sum / n_total,
        theorem1_lower: 1.0 - delta,
        theorem1_upper: 1.0 - delta + 1.0 / (cfg.n_cal as f64 + 1.0),
        mc_tolerance,
        pass: false,
    };
    report.pass = report.within(mc_tolerance);
    Ok(report)
}

/// Runs every trial (in parallel) and aggregates.
pub fn simulate<T: Real>(cfg: &SynthConfig) -> Result<(Vec<TrialResult<T>>, HarnessReport)> {
    cfg.validate()?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial::<T>(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let report = aggregate(&trials, cfg)?;
    Ok((trials, report))
}

/// One CSV row per trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub q_hat: Threshold<f64>,
    pub coverage: f64,
    pub mean_set_size: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
}

impl<T: Real> From<&TrialResult<T>> for TrialSummary {
    fn from(t: &TrialResult<T>) -> Self {
        let n = t.set_sizes.len().max(1) as f64;
        let mean = |f: fn(&UncertaintyQuantification<T>) -> T| {
            t.quantifications
                .iter()
                .map(|q| f(q).to_f64().unwrap_or(f64::NAN))
                .sum::<f64>()
                / n
        };
        Self {
            trial: t.trial_index,
            q_hat: match t.q_hat {
                Threshold::Finite(q) => Threshold::Finite(q.to_f64().unwrap_or(f64::NAN)),
                Threshold::Unbounded => Threshold::Unbounded,
            },
            coverage: t.coverage,
            mean_set_size: t.set_sizes.iter().sum::<usize>() as f64 / n,
            mean_lower: mean(|q| q.lower),
            mean_upper: mean(|q| q.upper),
        }
    }
}
