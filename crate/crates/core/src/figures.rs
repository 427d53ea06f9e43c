//! Plot-ready tables of the uncertainty bounds.
//!
//! `uncertainty_vs_delta` sweeps the error level at a fixed calibration size;
//! `variation_vs_n` sweeps the calibration size at a fixed error level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncertainty::quantify;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "figure", rename_all = "snake_case")]
pub enum FigureSpec {
    UncertaintyVsDelta {
        #[serde(rename = "K")]
        num_classes: usize,
        m_values: Vec<usize>,
        delta_grid: Vec<f64>,
        n: usize,
    },
    VariationVsN {
        #[serde(rename = "K")]
        num_classes: usize,
        m_values: Vec<usize>,
        n_grid: Vec<usize>,
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub m: usize,
    pub u_pure: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationRow {
    pub n: usize,
    pub m: usize,
    pub variation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FigureTable {
    UncertaintyVsDelta(Vec<DeltaRow>),
    VariationVsN(Vec<VariationRow>),
}

impl FigureTable {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        match self {
            FigureTable::UncertaintyVsDelta(rows) => crate::io::to_csv(rows),
            FigureTable::VariationVsN(rows) => crate::io::to_csv(rows),
        }
    }
}

impl FigureSpec {
    pub fn validate(&self) -> Result<()> {
        let (k, m_values) = match self {
            FigureSpec::UncertaintyVsDelta {
                num_classes,
                m_values,
                delta_grid,
                n,
            } => {
                check_grid("delta_grid", delta_grid)?;
                if delta_grid.iter().any(|d| !(0.0..=1.0).contains(d)) {
                    return Err(Error::domain("delta_grid", "values must lie in [0, 1]"));
                }
                if *n == 0 {
                    return Err(Error::domain("n", "must be >= 1"));
                }
                (*num_classes, m_values)
            }
            FigureSpec::VariationVsN {
                num_classes,
                m_values,
                n_grid,
                delta,
            } => {
                check_grid("n_grid", n_grid)?;
                if n_grid[0] == 0 {
                    return Err(Error::domain("n_grid", "values must be >= 1"));
                }
                if !(0.0..=1.0).contains(delta) {
                    return Err(Error::domain("delta", "must lie in [0, 1]"));
                }
                (*num_classes, m_values)
            }
        };
        if k < 2 {
            return Err(Error::domain("K", "need K >= 2"));
        }
        if m_values.is_empty() || m_values.iter().any(|&m| m > k) {
            return Err(Error::domain(
                "m_values",
                format!("need a nonempty subset of [0, {k}]"),
            ));
        }
        Ok(())
    }
}

fn check_grid<V: PartialOrd>(name: &'static str, grid: &[V]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain(name, "must be nonempty"));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain(name, "must be sorted ascending"));
    }
    Ok(())
}

/// Rows are grouped by grid value, then by `m` in the order given.
pub fn emit_figure_data(spec: &FigureSpec) -> Result<FigureTable> {
    spec.validate()?;
    match spec {
        FigureSpec::UncertaintyVsDelta {
            num_classes,
            m_values,
            delta_grid,
            n,
        } => {
            let mut rows = Vec::with_capacity(delta_grid.len() * m_values.len());
            for &delta in delta_grid {
                for &m in m_values {
                    let q = quantify(m, delta, *num_classes, *n)?;
                    rows.push(DeltaRow {
                        delta,
                        m,
                        u_pure: q.u_pure,
                        lower: q.lower,
                        upper: q.upper,
                    });
                }
            }
            Ok(FigureTable::UncertaintyVsDelta(rows))
        }
        FigureSpec::VariationVsN {
            num_classes,
            m_values,
            n_grid,
            delta,
        } => {
            let mut rows = Vec::with_capacity(n_grid.len() * m_values.len());
            for &n in n_grid {
                for &m in m_values {
                    let q = quantify(m, *delta, *num_classes, n)?;
                    rows.push(VariationRow {
                        n,
                        m,
                        variation: q.variation,
                    });
                }
            }
            Ok(FigureTable::VariationVsN(rows))
        }
    }
}
