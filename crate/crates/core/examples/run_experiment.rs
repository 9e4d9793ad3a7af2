//! Runs a catalog experiment with a reduced budget and lists what it wrote.
//!
//!     cargo run --release --example run_experiment [name] [out_dir]

use std::path::PathBuf;

use dcsma::harness::experiments::run_experiment;
use dcsma::harness::CATALOG;

fn main() -> dcsma::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "fig-correlation".into());
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/examples"));
    let overrides: Vec<String> = match name.as_str() {
        "fig-correlation" => vec!["horizon=200000".into()],
        "fig-offdur" => vec!["horizon=50000".into(), "orders=[1, 5]".into()],
        "fig-gaussian" => vec!["replications=40".into(), "orders=[1, 5]".into()],
        "fig-delay" => vec!["intensities=[0.5]".into(), "orders=[1, 5]".into(), "replications=4".into(), "horizon=40000".into()],
        "fig-transient" => vec!["orders=[1, 25]".into(), "replications=4".into(), "horizon=40000".into()],
        "fig-gentle" => vec!["queue_replications=4".into(), "probe_replications=2000".into()],
        _ => {
            eprintln!("unknown experiment {name}; catalog: {}", CATALOG.join(", "));
            std::process::exit(2);
        }
    };
    println!("{name} with {overrides:?}");
    let run = run_experiment(&name, &overrides, &out)?;
    let mut files = Vec::new();
    collect(&run.dir, &mut files);
    files.sort();
    for f in files {
        println!("  {}", f.display());
    }
    Ok(())
}

fn collect(dir: &std::path::Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return;
    };
    for e in entries.flatten() {
        let p = e.path();
        if p.is_dir() {
            collect(&p, out);
        } else {
            out.push(p);
        }
    }
}
