//! Gentler start: the delayed chain is seeded with `T` samples of a warm
//! standard chain spaced `M` slots apart. Prints the base-chain lag between
//! the first slots after the switch and the empirical correlation it leaves.
//!
//!     cargo run --release --example gentle_start

use dcsma::harness::config::RecordConfig;
use dcsma::harness::{run_simulation, ExperimentConfig, GraphSource, SchedulerConfig, Variant};
use dcsma::oracle::gentler_start_lag;

fn main() -> dcsma::Result<()> {
    let order = 5;
    println!("base-chain lag between slots t₀+i and t₀+i+1 (T = {order})");
    for spacing in [1u64, 5, 25] {
        let lags: Vec<u64> = (0..order as u64).map(|i| gentler_start_lag(i, i + 1, order as u64, spacing)).collect();
        println!("  M = {spacing:>2}: {lags:?}");
    }

    println!("\nψ̂ between σ(t₀) and σ(t₀+1) across 4000 replications on a pair of links");
    for spacing in [1u64, 5, 25] {
        let mut cfg = ExperimentConfig::new(GraphSource::Pair, 2_000 + spacing * order as u64 + 20);
        cfg.scheduler = SchedulerConfig {
            variant: Variant::DelayedGentle,
            order: Some(order),
            spacing: Some(spacing),
            gentle_warmup: Some(2_000),
            ..SchedulerConfig::default()
        };
        cfg.replications = 4_000;
        cfg.warmup_fraction = 0.0;
        cfg.measured_links = vec![0];
        cfg.max_lag = 1;
        cfg.record = RecordConfig {
            start_probe_lags: Some(3),
            ..RecordConfig::default()
        };
        cfg.seed = spacing;
        let res = run_simulation(&cfg)?;
        let probe = res.measured[0].start_probe.as_ref().expect("probe recorded");
        let cells: Vec<String> = probe
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| match c {
                Some((psi, se)) => format!("lag {k}: {psi:+.3} ± {se:.3}"),
                None => format!("lag {k}: n/a"),
            })
            .collect();
        println!("  M = {spacing:>2}, t₀ = {}: {}", res.delayed_start_slot.unwrap_or(0), cells.join(", "));
    }
    Ok(())
}
