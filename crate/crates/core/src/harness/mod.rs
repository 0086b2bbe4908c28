//! Experiment runner: configuration, the two case studies, noise sweeps and
//! their CSV output.
//!
//! Metrics CSV columns, in order:
//!
//! | column        | meaning                                            |
//! |---------------|----------------------------------------------------|
//! | `sweep_var`   | `M` (relays), `P_max_dB`, or `L` (depth)           |
//! | `sweep_value` | value of the swept variable                        |
//! | `scheme`      | curve label, e.g. `nonlinear_pa` or `ris_N100`     |
//! | `accuracy`    | test accuracy in `[0, 1]`, six decimals            |
//! | `loss`        | test cross-entropy, six decimals                   |
//! | `seed`        | experiment seed                                    |
//!
//! Wall-clock seconds go to a separate `<name>.timing.csv` so the metrics
//! file is byte-identical across runs with the same seed.

pub mod cli;
pub mod config;
pub mod fig3;
pub mod fig4;
pub mod noise_sweep;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, ExperimentKind, Scheme};

use crate::data::{data_dir, load_splits, ImageDataset, Normalizer};
use crate::error::Result;
use crate::training::Evaluation;

pub const CSV_HEADER: &str = "sweep_var,sweep_value,scheme,accuracy,loss,seed";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub scheme: String,
    pub accuracy: f64,
    pub loss: f64,
    pub seed: u64,
    pub seconds: f64,
}

impl MetricsRecord {
    pub fn new(sweep_var: &str, sweep_value: f64, scheme: &str, ev: Evaluation, seed: u64, seconds: f64) -> Self {
        Self { sweep_var: sweep_var.into(), sweep_value, scheme: scheme.into(), accuracy: ev.accuracy, loss: ev.loss, seed, seconds }
    }
}

/// Sorted by scheme, then sweep value, so the file order never depends on
/// execution order.
pub fn sort_records(rows: &mut [MetricsRecord]) {
    rows.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(a.sweep_value.total_cmp(&b.sweep_value)));
}

pub fn metrics_csv(rows: &[MetricsRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:.6},{:.6},{}", r.sweep_var, r.sweep_value, r.scheme, r.accuracy, r.loss, r.seed);
    }
    s
}

pub fn timing_csv(rows: &[MetricsRecord]) -> String {
    let mut s = String::from("sweep_var,sweep_value,scheme,seconds\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:.3}", r.sweep_var, r.sweep_value, r.scheme, r.seconds);
    }
    s
}

/// gnuplot data: one block per scheme, separated by two blank lines, so
/// `plot 'x.dat' index i` selects a curve.
pub fn gnuplot_dat(rows: &[MetricsRecord]) -> String {
    let mut s = String::new();
    let mut current: Option<&str> = None;
    for r in rows {
        if current != Some(r.scheme.as_str()) {
            if current.is_some() {
                s.push_str("\n\n");
            }
            let _ = writeln!(s, "# {} ({} accuracy)", r.scheme, r.sweep_var);
            current = Some(&r.scheme);
        }
        let _ = writeln!(s, "{} {:.6}", r.sweep_value, r.accuracy);
    }
    s
}

/// Writes `<name>.csv`, `<name>.timing.csv` and `<name>.dat` into `dir`.
pub fn write_outputs(dir: &Path, name: &str, rows: &[MetricsRecord]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{name}.csv"));
    fs::write(&csv, metrics_csv(rows))?;
    fs::write(dir.join(format!("{name}.timing.csv")), timing_csv(rows))?;
    fs::write(dir.join(format!("{name}.dat")), gnuplot_dat(rows))?;
    Ok(csv)
}

/// Normalized train and test splits as configured.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(ImageDataset, ImageDataset)> {
    let dir = data_dir(cfg.data.dir.as_deref());
    let limit = cfg.data.subset.then_some(cfg.data.subset_size);
    let (train, mut test) = load_splits(&dir, limit)?;
    if let Some(n) = cfg.data.test_limit {
        test = test.take(n);
    }
    let norm = Normalizer::fit(&train, cfg.data.normalization);
    Ok((norm.apply(&train), norm.apply(&test)))
}

/// What an experiment produced.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Metrics(Vec<MetricsRecord>),
    Noise(Vec<noise_sweep::NoiseRow>),
}

/// Runs the configured experiment and writes its outputs; returns the path
/// of the main CSV.
pub fn run_experiment(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<(PathBuf, Outcome)> {
    let (name, mut rows) = match cfg.experiment {
        ExperimentKind::NoiseSweep => {
            let rows = noise_sweep::run_noise_sweep(cfg, log)?;
            fs::create_dir_all(&cfg.output)?;
            let path = cfg.output.join("noise_sweep.csv");
            fs::write(&path, noise_sweep::noise_csv(&rows, cfg.seed))?;
            return Ok((path, Outcome::Noise(rows)));
        }
        ExperimentKind::Fig3Relay => {
            let (train, test) = load_data(cfg)?;
            ("fig3", fig3::run_fig3(cfg, &train, &test, log)?)
        }
        ExperimentKind::Fig4RisCnn => {
            let (train, test) = load_data(cfg)?;
            ("fig4", fig4::run_fig4(cfg, &train, &test, log)?)
        }
        ExperimentKind::Custom => {
            let (train, test) = load_data(cfg)?;
            ("custom", cli::run_custom(cfg, &train, &test, log)?)
        }
    };
    sort_records(&mut rows);
    let path = write_outputs(&cfg.output, name, &rows)?;
    Ok((path, Outcome::Metrics(rows)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, v: f64, acc: f64) -> MetricsRecord {
        MetricsRecord::new("M", v, scheme, Evaluation { accuracy: acc, loss: 0.5 }, 7, 1.25)
    }

    #[test]
    fn csv_layout() {
        let mut rows = vec![row("b", 2.0, 0.5), row("a", 1.0, 0.25), row("b", 1.0, 0.125)];
        sort_records(&mut rows);
        let csv = metrics_csv(&rows);
        assert_eq!(csv, "sweep_var,sweep_value,scheme,accuracy,loss,seed\nM,1,a,0.250000,0.500000,7\nM,1,b,0.125000,0.500000,7\nM,2,b,0.500000,0.500000,7\n");
        assert!(gnuplot_dat(&rows).contains("\n\n\n# b"));
        assert!(timing_csv(&rows).ends_with("M,2,b,1.250\n"));
    }
}
