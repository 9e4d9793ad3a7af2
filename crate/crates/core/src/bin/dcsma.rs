//! Command-line front end. Exit codes: 0 success, 1 validation or run failure, 2 config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dcsma::harness::config::load_graph_file;
use dcsma::harness::experiments::{default_params, run_experiment, CATALOG};
use dcsma::harness::io::{write_json, write_simulation};
use dcsma::harness::validate::{validate_with, ValidateOptions};
use dcsma::harness::{run_simulation, ExperimentConfig};
use dcsma::oracle::oracle_report;
use dcsma::scheduler::AccessParams;
use dcsma::CsmaError;

#[derive(Parser)]
#[command(name = "dcsma", version, about = "Delayed CSMA scheduling laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the replications described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `out_dir`, else results go to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a small-graph config against the exact chain.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Standard errors allowed before a statistical check fails.
        #[arg(long, default_value_t = 4.0)]
        z: f64,
        /// Skip the run of every scheduler variant.
        #[arg(long)]
        no_sweep: bool,
    },
    /// Run a named experiment, or list the catalog when no name is given.
    Experiment {
        name: Option<String>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Print the experiment's default parameters and exit.
        #[arg(long)]
        show_defaults: bool,
    },
    /// Exact chain report for a small conflict graph.
    Oracle {
        /// Graph file (TOML or JSON with `n_links` and `edges`).
        #[arg(long)]
        graph: PathBuf,
        /// Fugacity: one value for every link, or a comma-separated list.
        #[arg(long, default_value = "1")]
        lambda: String,
        /// Access probability: one value for every link, or a comma-separated list.
        #[arg(long, default_value = "0.25")]
        access: String,
        #[arg(long)]
        lazy: bool,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn per_link(text: &str, n: usize, field: &str) -> Result<Vec<f64>, CsmaError> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CsmaError::Config {
            path: field.into(),
            msg: e.to_string(),
        })?;
    match vals.len() {
        1 => Ok(vec![vals[0]; n]),
        k if k == n => Ok(vals),
        k => Err(CsmaError::Config {
            path: field.into(),
            msg: format!("expected 1 or {n} values, got {k}"),
        }),
    }
}

fn run(cli: Cli) -> Result<ExitCode, CsmaError> {
    match cli.cmd {
        Cmd::Simulate {
            config,
            seed,
            out,
            overrides,
        } => {
            let mut cfg = ExperimentConfig::load(&config, &overrides)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let res = run_simulation(&cfg)?;
            match out.or_else(|| cfg.out_dir.clone()) {
                Some(dir) => {
                    write_simulation(&dir, &cfg, &res)?;
                    for a in &res.activity {
                        println!("link {:>3}  activity {:.5} ± {:.5}", a.link, a.fraction, a.se);
                    }
                    if res.delay.packets > 0 {
                        println!("mean delay {:.3} over {} packets", res.delay.mean, res.delay.packets);
                    }
                    println!("wrote {}", dir.display());
                }
                None => println!("{}", serde_json::to_string_pretty(&res).map_err(|e| CsmaError::Io(e.into()))?),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate {
            config,
            overrides,
            z,
            no_sweep,
        } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let opts = ValidateOptions {
                z,
                variant_sweep: !no_sweep,
                ..ValidateOptions::default()
            };
            let report = validate_with(&cfg, &opts)?;
            println!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Experiment {
            name,
            overrides,
            out,
            show_defaults,
        } => {
            let Some(name) = name else {
                for n in CATALOG {
                    println!("{n}");
                }
                return Ok(ExitCode::SUCCESS);
            };
            if show_defaults {
                print!("{}", default_params(&name)?);
                return Ok(ExitCode::SUCCESS);
            }
            let run = run_experiment(&name, &overrides, &out)?;
            println!("{}", serde_json::to_string_pretty(&run.summary).map_err(|e| CsmaError::Io(e.into()))?);
            println!("wrote {}", run.dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Oracle {
            graph,
            lambda,
            access,
            lazy,
            max_lag,
            out,
        } => {
            let g = load_graph_file(&graph)?.to_graph()?;
            let n = g.n_links();
            let lambda = per_link(&lambda, n, "lambda")?;
            let access = AccessParams::new(per_link(&access, n, "access")?)?;
            let report = oracle_report(&g, &access, &lambda, lazy, max_lag)?;
            match out {
                Some(path) => write_json(&path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CsmaError::Io(e.into()))?),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
