//! Accuracy against the number of relays for every training scheme.
//!
//! Runs on the 20k-image subset with relay counts 1, 3 and 5 unless
//! `--full` is given. Needs Fashion-MNIST (see `scripts/fetch_fashion_mnist.sh`).

use wpnn::harness::{run_experiment, ExperimentConfig, ExperimentKind, Outcome};

fn main() -> wpnn::Result<()> {
    let mut cfg = ExperimentConfig::for_experiment(ExperimentKind::Fig3Relay);
    cfg.seed = 7;
    if !std::env::args().any(|a| a == "--full") {
        cfg.data.subset = true;
        cfg.architecture.relays = vec![1, 3, 5];
    }
    let (path, outcome) = run_experiment(&cfg, &mut |s| println!("{s}"))?;
    if let Outcome::Metrics(rows) = outcome {
        println!("{} rows written to {}", rows.len(), path.display());
    }
    Ok(())
}
