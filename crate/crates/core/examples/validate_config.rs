//! Runs the small-graph validation suite on a config file, or on a built-in
//! 4-link path when no file is given.
//!
//!     cargo run --release --example validate_config [config.toml]

use std::path::Path;

use dcsma::harness::validate::validate;
use dcsma::harness::{ExperimentConfig, GraphSource, SchedulerConfig};

fn main() -> dcsma::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(Path::new(&path), &[])?,
        None => {
            let mut cfg = ExperimentConfig::new(GraphSource::Path { n_links: 4 }, 200_000);
            cfg.scheduler = SchedulerConfig::delayed(2);
            cfg.warmup_fraction = 0.05;
            cfg.seed = 2;
            cfg
        }
    };
    let report = validate(&cfg)?;
    println!("{report}");
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
