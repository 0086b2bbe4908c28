//! Accuracy of a CNN whose second convolution runs over a RIS-assisted
//! OFDM link, against the transmit power, for 40 and 100 surface elements.
//!
//! Trains on the 20k-image subset unless `--full` is given.

use wpnn::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> wpnn::Result<()> {
    let mut cfg = ExperimentConfig::for_experiment(ExperimentKind::Fig4RisCnn);
    cfg.seed = 7;
    cfg.data.subset = !std::env::args().any(|a| a == "--full");
    let (path, _) = run_experiment(&cfg, &mut |s| println!("{s}"))?;
    println!("written to {}", path.display());
    Ok(())
}
