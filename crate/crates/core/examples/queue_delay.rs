//! Queue-driven fugacity on a random geometric network: mean packet delay
//! for several delay orders at one traffic intensity.
//!
//!     cargo run --release --example queue_delay [intensity]

use dcsma::harness::config::{ArrivalSpec, FugacityConfig};
use dcsma::harness::{run_simulation, ExperimentConfig, GraphSource, SchedulerConfig};
use dcsma::scheduler::WeightKind;

fn main() -> dcsma::Result<()> {
    let intensity: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    println!("RGG-25, intensity {intensity}, loglog weights, 8 replications of 50000 slots");
    println!("  T   mean delay   95% interval");
    for order in [1, 5, 25] {
        let mut cfg = ExperimentConfig::new(GraphSource::rgg25(1), 50_000);
        cfg.scheduler = SchedulerConfig::delayed(order);
        cfg.scheduler.fugacity = FugacityConfig::QueueDriven {
            weight: WeightKind::LogLog,
            epsilon: 0.1,
        };
        cfg.arrivals = ArrivalSpec::intensity(intensity);
        cfg.warmup_fraction = 0.5;
        cfg.replications = 8;
        cfg.seed = 1;
        let res = run_simulation(&cfg)?;
        let ci = res.delay.replication_ci.as_ref();
        match ci {
            Some(ci) => println!("{order:>3}   {:>10.2}   [{:.2}, {:.2}]", res.delay.mean, ci.ci_lo, ci.ci_hi),
            None => println!("{order:>3}   {:>10.2}", res.delay.mean),
        }
    }
    Ok(())
}
