//! The `cpuq` command line.
//!
//! ```text
//! cpuq calibrate --data cal.csv --score aps --delta 0.1 --out calib.json
//! cpuq predict   --data val.csv --calib calib.json --out sets.jsonl
//! cpuq quantify  --sets sets.jsonl --calib calib.json --out uq.jsonl
//! cpuq simulate  --config sim.json --out report.json [--trials-csv trials.csv]
//! cpuq figures   --spec fig.json --out fig.csv
//! ```
//!
//! Failures print `{"error": {"code", "message", "row"?, "line"?}}` on stderr
//! and exit with status 1 (2 for usage errors).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, CalibrationResult, CoverageErrorLevel};
use crate::error::{Error, Result};
use crate::figures::{emit_figure_data, FigureSpec};
use crate::harness::{simulate, SynthConfig, TrialSummary};
use crate::io::{self, DataFormat, LoadOptions};
use crate::nonconformity::{ScoreConfig, ScoreKind};
use crate::sets::{predict_batch, SetRecord};
use crate::uncertainty::{quantify, UncertaintyQuantification};

#[derive(Debug, Parser)]
#[command(
    name = "cpuq",
    version,
    about = "Conformal prediction sets with certified uncertainty bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the conformal threshold from labeled calibration data.
    Calibrate(CalibrateArgs),
    /// Build prediction sets for a dataset.
    Predict(PredictArgs),
    /// Quantify model uncertainty for each prediction set.
    Quantify(QuantifyArgs),
    /// Run the synthetic coverage harness.
    Simulate(SimulateArgs),
    /// Emit uncertainty curve tables.
    Figures(FiguresArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    /// Clip negative entries and rescale rows to unit mass.
    #[arg(long)]
    renormalize: bool,
}

impl DataArgs {
    fn load(&self) -> Result<crate::Dataset> {
        let format = self
            .format
            .unwrap_or_else(|| DataFormat::from_path(&self.data));
        io::load_dataset(
            &self.data,
            format,
            LoadOptions {
                renormalize: self.renormalize,
            },
        )
    }
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    score: ScoreKind,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    kreg: usize,
    #[arg(long)]
    randomized: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct QuantifyArgs {
    #[arg(long)]
    sets: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Optional per-trial CSV.
    #[arg(long)]
    trials_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FiguresArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// One line of `quantify` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantificationRecord {
    pub row: usize,
    #[serde(flatten)]
    pub uq: UncertaintyQuantification<f64>,
}

/// Parses `argv` (including the program name), runs the command, and
/// returns the process exit status.
pub fn cli_dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report(&serde_json::json!({
                "error": { "code": "usage", "message": e.to_string().trim_end() }
            }));
            return 2;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let mut body = serde_json::json!({ "code": e.code(), "message": e.to_string() });
            if let Some(row) = e.row() {
                body["row"] = row.into();
            }
            if let Some(line) = e.line() {
                body["line"] = line.into();
            }
            report(&serde_json::json!({ "error": body }));
            1
        }
    }
}

fn report(value: &serde_json::Value) {
    eprintln!("{value}");
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Calibrate(a) => {
            let dataset = a.data.load()?;
            let config = ScoreConfig {
                kind: a.score,
                lambda: a.lambda,
                k_reg: a.kreg,
                randomized: a.randomized,
                seed: a.seed,
            };
            let result = calibrate(&dataset, &config, CoverageErrorLevel::new(a.delta)?)?;
            io::write_atomic(&a.out, &io::to_json_pretty(&result)?)
        }
        Command::Predict(a) => {
            let calib = load_calibration(&a.calib)?;
            let dataset = a.data.load()?;
            let records: Vec<SetRecord> = predict_batch(&dataset, &calib)?
                .iter()
                .map(SetRecord::from)
                .collect();
            io::write_atomic(&a.out, &io::to_jsonl(&records)?)
        }
        Command::Quantify(a) => {
            let calib = load_calibration(&a.calib)?;
            let sets: Vec<SetRecord> = io::read_jsonl(&a.sets)?;
            let records = sets
                .iter()
                .enumerate()
                .map(|(i, rec)| {
                    let set = rec.to_set(calib.num_classes).map_err(|e| e.at_row(i))?;
                    let uq = quantify(set.m(), calib.delta.value(), calib.num_classes, calib.n)
                        .map_err(|e| e.at_row(i))?;
                    Ok(QuantificationRecord { row: rec.row, uq })
                })
                .collect::<Result<Vec<_>>>()?;
            io::write_atomic(&a.out, &io::to_jsonl(&records)?)
        }
        Command::Simulate(a) => {
            let cfg: SynthConfig = io::read_json(&a.config)?;
            let (trials, report) = simulate::<f64>(&cfg)?;
            if let Some(path) = &a.trials_csv {
                let rows: Vec<TrialSummary> = trials.iter().map(TrialSummary::from).collect();
                io::write_atomic(path, &io::to_csv(&rows)?)?;
            }
            io::write_atomic(&a.out, &io::to_json_pretty(&report)?)
        }
        Command::Figures(a) => {
            let spec: FigureSpec = io::read_json(&a.spec)?;
            io::write_atomic(&a.out, &emit_figure_data(&spec)?.to_csv()?)
        }
    }
}

fn load_calibration(path: &Path) -> Result<CalibrationResult<f64>> {
    let calib: CalibrationResult<f64> = io::read_json(path)?;
    if calib.n == 0 {
        return Err(Error::domain("n", "calibration size must be >= 1"));
    }
    calib.score.validate(calib.num_classes)?;
    Ok(calib)
}
