//! Named experiments. Each writes CSV tables, per-run `config.toml` and
//! `result.json`, a `summary.json` and a `manifest.json` under its own directory.
//!
//! Parameters come from each experiment's defaults, adjusted with `key=value`
//! overrides (TOML values; tables as inline tables, e.g. `graph={kind="pair"}`).

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CsmaError, Result};
use crate::harness::config::{
    apply_overrides, resolve_graph, ArrivalSpec, ExperimentConfig, FugacityConfig, GraphSource, PerLink,
    SchedulerConfig, Variant,
};
use crate::harness::io::{correlation_rows, CorrelationRow, hist_rows, timeseries_rows, write_csv, write_json, write_run, Manifest};
use crate::harness::sim::{run_simulation, RunResult};
use crate::harness::validate::estimator_lag;
use crate::oracle::{
    build_chain, delayed_correlation, proposition1_bounds, spectral_correlation, CorrelationSpec, ORACLE_MAX_LINKS,
};
use crate::scheduler::{AccessParams, WeightKind};
use crate::stats::net_input_histogram;

pub const CATALOG: &[&str] = &[
    "fig-correlation",
    "fig-offdur",
    "fig-gaussian",
    "fig-delay",
    "fig-transient",
    "fig-gentle",
];

/// Base update rule for experiments that compare kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Glauber,
    Mh,
}

fn scheduler(kernel: Kernel, order: usize, access: f64, fugacity: FugacityConfig) -> SchedulerConfig {
    let variant = match (kernel, order) {
        (Kernel::Mh, _) => Variant::Mh,
        (Kernel::Glauber, 1) => Variant::Glauber,
        (Kernel::Glauber, _) => Variant::Delayed,
    };
    SchedulerConfig {
        variant,
        order: Some(order),
        access_prob: PerLink::Scalar(access),
        fugacity,
        ..SchedulerConfig::default()
    }
}

fn static_fugacity(lambda: f64) -> FugacityConfig {
    FugacityConfig::Static(PerLink::Scalar(lambda))
}

/// Defaults overlaid with `key=value` overrides, with field paths in errors.
pub fn load_params<P: Serialize + DeserializeOwned + Default>(overrides: &[String]) -> Result<P> {
    let mut value = toml::Value::try_from(P::default()).map_err(|e| CsmaError::config("<params>", e.to_string()))?;
    apply_overrides(&mut value, overrides)?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CsmaError::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
    })
}

/// The requested link, or the graph's max-degree link.
fn pick_link(graph: &GraphSource, link: Option<usize>) -> Result<usize> {
    let g = resolve_graph(graph, None)?.graph;
    match link {
        Some(v) if v >= g.n_links() => Err(CsmaError::config("link", format!("{v} out of range for {} links", g.n_links()))),
        Some(v) => Ok(v),
        None => Ok(g.max_degree_link().unwrap_or(0)),
    }
}

fn run_into(root: &Path, sub: &str, cfg: &ExperimentConfig, m: &mut Manifest) -> Result<(PathBuf, RunResult)> {
    let res = run_simulation(cfg)?;
    let dir = root.join(sub);
    write_run(root, &dir, cfg, &res, m)?;
    Ok((dir, res))
}

fn csv_into<T: Serialize>(root: &Path, path: PathBuf, rows: &[T], m: &mut Manifest) -> Result<()> {
    write_csv(&path, rows)?;
    m.add_file(root, &path);
    Ok(())
}

fn finish<S: Serialize>(root: &Path, summary: &S, m: &mut Manifest) -> Result<()> {
    let path = root.join("summary.json");
    write_json(&path, summary)?;
    m.add_file(root, &path);
    m.write(root)?;
    Ok(())
}

/// Mean of the block averages that fall inside slots `lo..=hi`.
pub fn window_mean(series: &[(u64, f64)], block: u64, lo: u64, hi: u64) -> Option<f64> {
    let vals: Vec<f64> = series
        .iter()
        .filter(|(end, _)| end + 1 >= lo + block && *end <= hi)
        .map(|(_, v)| *v)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

// ---------------------------------------------------------------- correlation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationParams {
    pub graph: GraphSource,
    pub orders: Vec<usize>,
    pub link: Option<usize>,
    pub access_prob: f64,
    pub lambda: f64,
    pub horizon: u64,
    pub warmup_fraction: f64,
    pub replications: u64,
    /// Lags written to `correlation.csv`.
    pub max_lag: usize,
    pub seed: u64,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        Self {
            graph: GraphSource::Cycle { n_links: 7 },
            orders: vec![1, 5],
            link: None,
            access_prob: 0.25,
            lambda: 1.0,
            horizon: 1_000_000,
            warmup_fraction: 0.5,
            replications: 1,
            max_lag: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRun {
    #[serde(rename = "T")]
    pub order: usize,
    pub link: usize,
    pub estimator_lags: usize,
    pub psi: Vec<f64>,
    pub se: Vec<f64>,
    /// Exact order-`T` correlation, when the graph fits the oracle.
    pub oracle_psi: Option<Vec<f64>>,
    /// Largest `|ψ̂(k)| / s.e.` over `k` not a multiple of `T`.
    pub max_z_off_multiples: f64,
    /// Largest `|ψ̂(k) − ψ(k)| / s.e.` against the oracle.
    pub max_z_vs_oracle: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct BoundRow {
    lag: usize,
    oracle_psi: f64,
    bound: Option<f64>,
}

pub fn fig_correlation(p: &CorrelationParams, dir: &Path) -> Result<Vec<CorrelationRun>> {
    let mut m = Manifest::new("fig-correlation", p.seed, p);
    let link = pick_link(&p.graph, p.link)?;
    let g = resolve_graph(&p.graph, None)?.graph;
    let n = g.n_links();
    let lambda = vec![p.lambda; n];
    let access = AccessParams::uniform(n, p.access_prob)?;
    let chain = if n <= ORACLE_MAX_LINKS {
        Some(build_chain(&g, &access, &lambda, false)?)
    } else {
        None
    };
    let mut runs = Vec::new();
    for &order in &p.orders {
        if order == 0 {
            return Err(CsmaError::config("orders", "orders must be at least 1"));
        }
        let base: Option<CorrelationSpec> = match &chain {
            Some(c) => Some(spectral_correlation(c, link, (p.max_lag / order + 1).max(400))?.0),
            None => None,
        };
        let est_lag = match &base {
            Some(b) => estimator_lag(&[b], order, p.max_lag),
            None => p.max_lag.max(100 * order),
        };
        let mut cfg = ExperimentConfig::new(p.graph.clone(), p.horizon);
        cfg.scheduler = scheduler(Kernel::Glauber, order, p.access_prob, static_fugacity(p.lambda));
        cfg.warmup_fraction = p.warmup_fraction;
        cfg.replications = p.replications;
        cfg.seed = p.seed;
        cfg.measured_links = vec![link];
        cfg.max_lag = est_lag;
        let (run_dir, res) = run_into(dir, &format!("T{order}"), &cfg, &mut m)?;
        let ac = res.measured[0]
            .autocorr
            .as_ref()
            .ok_or_else(|| CsmaError::InsufficientData("no autocorrelation estimate".into()))?;
        csv_into(dir, run_dir.join("correlation.csv"), &correlation_rows(&ac.psi, &ac.se, p.max_lag), &mut m)?;

        let mut max_off = 0.0f64;
        for k in (1..=p.max_lag).filter(|k| k % order != 0) {
            max_off = max_off.max(ac.psi[k].abs() / ac.se[k]);
        }
        let (oracle_psi, max_vs) = match &base {
            Some(b) => {
                let exact = delayed_correlation(b, order)?;
                let bounds = proposition1_bounds(&g, link, &access, &lambda, p.max_lag / order / 2 + 1)?;
                let rows: Vec<BoundRow> = (1..=p.max_lag)
                    .map(|lag| {
                        let bound = (lag % order == 0)
                            .then_some(lag / order)
                            .and_then(|k| match k {
                                1 => Some(bounds.psi1),
                                _ => bounds.even_lag_bounds.iter().find(|(l, _)| *l == k).map(|(_, b)| *b),
                            });
                        BoundRow {
                            lag,
                            oracle_psi: exact.psi[lag],
                            bound,
                        }
                    })
                    .collect();
                csv_into(dir, run_dir.join("correlation_bounds.csv"), &rows, &mut m)?;
                let z = (1..=p.max_lag)
                    .map(|k| (ac.psi[k] - exact.psi[k]).abs() / ac.se[k])
                    .fold(0.0, f64::max);
                (Some(exact.psi[..=p.max_lag].to_vec()), Some(z))
            }
            None => (None, None),
        };
        runs.push(CorrelationRun {
            order,
            link,
            estimator_lags: est_lag,
            psi: ac.psi[..=p.max_lag].to_vec(),
            se: ac.se[..=p.max_lag].to_vec(),
            oracle_psi,
            max_z_off_multiples: max_off,
            max_z_vs_oracle: max_vs,
        });
    }
    finish(dir, &runs, &mut m)?;
    Ok(runs)
}

// ---------------------------------------------------------------- off-duration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffDurationParams {
    pub graph: GraphSource,
    pub orders: Vec<usize>,
    pub link: Option<usize>,
    pub access_prob: f64,
    pub lambda: f64,
    pub horizon: u64,
    pub replications: u64,
    pub seed: u64,
}

impl Default for OffDurationParams {
    fn default() -> Self {
        Self {
            graph: GraphSource::rgg25(1),
            orders: vec![1, 2, 5, 10, 25],
            link: None,
            access_prob: 0.25,
            lambda: 1.0,
            horizon: 200_000,
            replications: 4,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDurationRow {
    #[serde(rename = "T")]
    pub order: usize,
    pub mean: f64,
    pub cov: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDurationPoint {
    #[serde(rename = "T")]
    pub order: usize,
    pub link: usize,
    pub gaps: u64,
    pub mean: f64,
    pub mean_se: Option<f64>,
    pub cov: f64,
}

pub fn fig_offdur(p: &OffDurationParams, dir: &Path) -> Result<Vec<OffDurationPoint>> {
    let mut m = Manifest::new("fig-offdur", p.seed, p);
    let link = pick_link(&p.graph, p.link)?;
    let mut points = Vec::new();
    for &order in &p.orders {
        let mut cfg = ExperimentConfig::new(p.graph.clone(), p.horizon);
        cfg.scheduler = scheduler(Kernel::Glauber, order, p.access_prob, static_fugacity(p.lambda));
        cfg.replications = p.replications;
        cfg.seed = p.seed;
        cfg.measured_links = vec![link];
        cfg.max_lag = 1;
        let (_, res) = run_into(dir, &format!("T{order}"), &cfg, &mut m)?;
        let off = res.measured[0]
            .off_duration
            .as_ref()
            .ok_or_else(|| CsmaError::InsufficientData(format!("T={order}: link {link} was never active twice")))?;
        points.push(OffDurationPoint {
            order,
            link,
            gaps: off.count,
            mean: off.mean,
            mean_se: off.mean_se,
            cov: off.cov,
        });
    }
    let rows: Vec<OffDurationRow> = points
        .iter()
        .map(|q| OffDurationRow {
            order: q.order,
            mean: q.mean,
            cov: q.cov,
        })
        .collect();
    csv_into(dir, dir.join("offdur.csv"), &rows, &mut m)?;
    finish(dir, &points, &mut m)?;
    Ok(points)
}

// ---------------------------------------------------------------- gaussian

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianParams {
    pub graph: GraphSource,
    pub orders: Vec<usize>,
    pub link: Option<usize>,
    pub access_prob: f64,
    pub lambda: f64,
    /// Arrival rate `η` of every link.
    pub rate: f64,
    /// Slots over which `A_t − S_t` accumulates.
    pub t: u64,
    /// Slots run before accumulation starts, for a stationary start.
    pub warmup: u64,
    pub replications: u64,
    pub bins: usize,
    pub seed: u64,
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self {
            graph: GraphSource::rgg25(1),
            orders: vec![1, 25],
            link: None,
            access_prob: 0.25,
            lambda: 1.0,
            rate: 0.1,
            t: 1 << 17,
            warmup: 20_000,
            replications: 300,
            bins: 30,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPoint {
    #[serde(rename = "T")]
    pub order: usize,
    pub link: usize,
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
    pub p_value: f64,
}

pub fn fig_gaussian(p: &GaussianParams, dir: &Path) -> Result<Vec<GaussianPoint>> {
    let mut m = Manifest::new("fig-gaussian", p.seed, p);
    let link = pick_link(&p.graph, p.link)?;
    let mut points = Vec::new();
    for &order in &p.orders {
        let mut cfg = ExperimentConfig::new(p.graph.clone(), p.warmup + p.t);
        cfg.scheduler = scheduler(Kernel::Glauber, order, p.access_prob, static_fugacity(p.lambda));
        cfg.arrivals = ArrivalSpec::rate(p.rate);
        cfg.warmup_slots = Some(p.warmup);
        cfg.replications = p.replications;
        cfg.seed = p.seed;
        cfg.measured_links = vec![link];
        cfg.max_lag = 1;
        cfg.record.net_input_slots = Some(p.t);
        let (run_dir, res) = run_into(dir, &format!("T{order}"), &cfg, &mut m)?;
        let samples = &res.measured[0].net_input;
        let h = net_input_histogram(samples, p.bins)?;
        csv_into(dir, run_dir.join("hist.csv"), &hist_rows(&h), &mut m)?;
        points.push(GaussianPoint {
            order,
            link,
            samples: samples.len(),
            mean: h.mean,
            variance: h.variance,
            skewness: h.skewness,
            excess_kurtosis: h.excess_kurtosis,
            jarque_bera: h.jarque_bera,
            p_value: h.p_value,
        });
    }
    finish(dir, &points, &mut m)?;
    Ok(points)
}

// ---------------------------------------------------------------- delay

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayParams {
    pub graph: GraphSource,
    pub intensities: Vec<f64>,
    pub orders: Vec<usize>,
    pub kernel: Kernel,
    pub weight: WeightKind,
    pub epsilon: f64,
    pub access_prob: f64,
    pub horizon: u64,
    pub warmup_fraction: f64,
    pub replications: u64,
    pub seed: u64,
}

impl Default for DelayParams {
    fn default() -> Self {
        Self {
            graph: GraphSource::rgg25(1),
            intensities: (1..=9).map(|i| i as f64 / 10.0).collect(),
            orders: vec![1, 5, 25, 125],
            kernel: Kernel::Glauber,
            weight: WeightKind::LogLog,
            epsilon: 0.1,
            access_prob: 0.25,
            horizon: 200_000,
            warmup_fraction: 0.5,
            replications: 200,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRow {
    pub intensity: f64,
    #[serde(rename = "T")]
    pub order: usize,
    pub mean_delay: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayPoint {
    pub intensity: f64,
    #[serde(rename = "T")]
    pub order: usize,
    /// Mean of per-replication mean delays, with its normal 95% interval.
    pub mean_delay: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Mean over all delivered packets.
    pub pooled_mean_delay: f64,
    pub packets: u64,
    pub mean_queue: Option<f64>,
}

fn queue_driven(weight: WeightKind, epsilon: f64) -> FugacityConfig {
    FugacityConfig::QueueDriven { weight, epsilon }
}

pub fn fig_delay(p: &DelayParams, dir: &Path) -> Result<Vec<DelayPoint>> {
    let mut m = Manifest::new("fig-delay", p.seed, p);
    let mut points = Vec::new();
    for &rho in &p.intensities {
        for &order in &p.orders {
            let mut cfg = ExperimentConfig::new(p.graph.clone(), p.horizon);
            cfg.scheduler = scheduler(p.kernel, order, p.access_prob, queue_driven(p.weight, p.epsilon));
            cfg.arrivals = ArrivalSpec::intensity(rho);
            cfg.warmup_fraction = p.warmup_fraction;
            cfg.replications = p.replications;
            cfg.seed = p.seed;
            cfg.max_lag = 1;
            let (_, res) = run_into(dir, &format!("rho{rho}_T{order}"), &cfg, &mut m)?;
            let (mean_delay, ci_lo, ci_hi) = match &res.delay.replication_ci {
                Some(ci) => (ci.mean, ci.ci_lo, ci.ci_hi),
                None => (res.delay.mean, f64::NAN, f64::NAN),
            };
            points.push(DelayPoint {
                intensity: rho,
                order,
                mean_delay,
                ci_lo,
                ci_hi,
                pooled_mean_delay: res.delay.mean,
                packets: res.delay.packets,
                mean_queue: res.mean_queue.as_ref().map(|c| c.mean),
            });
        }
    }
    let rows: Vec<DelayRow> = points
        .iter()
        .map(|q| DelayRow {
            intensity: q.intensity,
            order: q.order,
            mean_delay: q.mean_delay,
            ci_lo: q.ci_lo,
            ci_hi: q.ci_hi,
        })
        .collect();
    csv_into(dir, dir.join("delay.csv"), &rows, &mut m)?;
    finish(dir, &points, &mut m)?;
    Ok(points)
}

// ---------------------------------------------------------------- transient

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransientParams {
    pub graph: GraphSource,
    pub intensities: Vec<f64>,
    pub orders: Vec<usize>,
    pub weight: WeightKind,
    pub epsilon: f64,
    pub access_prob: f64,
    pub horizon: u64,
    pub block: u64,
    pub replications: u64,
    pub early_fraction: f64,
    pub late_fraction: f64,
    pub seed: u64,
}

impl Default for TransientParams {
    fn default() -> Self {
        Self {
            graph: GraphSource::rgg25(1),
            intensities: vec![0.1, 0.9],
            orders: vec![1, 5, 25, 125],
            weight: WeightKind::LogLog,
            epsilon: 0.1,
            access_prob: 0.25,
            horizon: 200_000,
            block: 1000,
            replications: 20,
            early_fraction: 0.05,
            late_fraction: 0.1,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientPoint {
    pub intensity: f64,
    #[serde(rename = "T")]
    pub order: usize,
    /// Mean queue per link over the first `early_fraction` of the horizon.
    pub early_mean: f64,
    /// Mean queue per link over the last `late_fraction` of the horizon.
    pub late_mean: f64,
}

pub fn fig_transient(p: &TransientParams, dir: &Path) -> Result<Vec<TransientPoint>> {
    let mut m = Manifest::new("fig-transient", p.seed, p);
    for (name, f) in [("early_fraction", p.early_fraction), ("late_fraction", p.late_fraction)] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(CsmaError::config(name, "must lie in (0, 1]"));
        }
    }
    let early_hi = (p.horizon as f64 * p.early_fraction) as u64;
    let late_lo = p.horizon - (p.horizon as f64 * p.late_fraction) as u64 + 1;
    let mut points = Vec::new();
    for &rho in &p.intensities {
        for &order in &p.orders {
            let mut cfg = ExperimentConfig::new(p.graph.clone(), p.horizon);
            cfg.scheduler = scheduler(Kernel::Glauber, order, p.access_prob, queue_driven(p.weight, p.epsilon));
            cfg.arrivals = ArrivalSpec::intensity(rho);
            cfg.replications = p.replications;
            cfg.seed = p.seed;
            cfg.max_lag = 1;
            cfg.record.timeseries_block = Some(p.block);
            let (run_dir, res) = run_into(dir, &format!("rho{rho}_T{order}"), &cfg, &mut m)?;
            csv_into(dir, run_dir.join("timeseries.csv"), &timeseries_rows(&res.timeseries), &mut m)?;
            let too_short = || CsmaError::config("block", "window shorter than one block");
            points.push(TransientPoint {
                intensity: rho,
                order,
                early_mean: window_mean(&res.timeseries, p.block, 1, early_hi).ok_or_else(too_short)?,
                late_mean: window_mean(&res.timeseries, p.block, late_lo, p.horizon).ok_or_else(too_short)?,
            });
        }
    }
    csv_into(dir, dir.join("transient.csv"), &points, &mut m)?;
    finish(dir, &points, &mut m)?;
    Ok(points)
}

// ---------------------------------------------------------------- gentle start

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GentleParams {
    pub graph: GraphSource,
    pub link: Option<usize>,
    pub access_prob: f64,
    pub lambda: f64,
    pub spacings: Vec<u64>,
    /// Order of the queue-evolution runs.
    pub queue_order: usize,
    /// Arrival rate of each link as a fraction of its activity under the standard chain.
    pub load: f64,
    pub pilot_horizon: u64,
    /// Standard-chain slots before sampling starts.
    pub gentle_warmup: u64,
    /// Slots simulated after the last delayed start.
    pub post_slots: u64,
    pub early_slots: u64,
    pub block: u64,
    /// Zero skips the queue-evolution runs.
    pub queue_replications: u64,
    /// Compare against the standard chain run over the same horizon.
    pub baseline: bool,
    /// Order of the correlation-probe runs.
    pub probe_order: usize,
    pub probe_lags: usize,
    pub probe_warmup: u64,
    pub probe_replications: u64,
    pub seed: u64,
}

impl Default for GentleParams {
    fn default() -> Self {
        Self {
            graph: GraphSource::rgg25(1),
            link: None,
            access_prob: 0.25,
            lambda: 1.0,
            spacings: vec![1, 5, 25],
            queue_order: 50,
            load: 0.8,
            pilot_horizon: 50_000,
            gentle_warmup: 20_000,
            post_slots: 20_000,
            early_slots: 2_000,
            block: 100,
            queue_replications: 50,
            baseline: true,
            probe_order: 5,
            probe_lags: 10,
            probe_warmup: 2_000,
            probe_replications: 20_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GentleQueuePoint {
    /// `None` for the standard-chain baseline.
    #[serde(rename = "M")]
    pub spacing: Option<u64>,
    #[serde(rename = "T")]
    pub order: usize,
    pub delayed_start_slot: Option<u64>,
    /// Mean queue per link over `early_slots` slots from the delayed start.
    pub early_mean: f64,
    /// Mean queue per link over the last 10% of the horizon.
    pub late_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GentleProbe {
    #[serde(rename = "M")]
    pub spacing: u64,
    #[serde(rename = "T")]
    pub order: usize,
    pub link: usize,
    pub delayed_start_slot: u64,
    /// `(lag, ψ̂, s.e.)` across replications between slot `t₀` and `t₀ + lag`.
    pub psi: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GentleSummary {
    pub link: usize,
    pub arrival_rates: Vec<f64>,
    pub queue: Vec<GentleQueuePoint>,
    pub probe: Vec<GentleProbe>,
}

fn gentle_scheduler(order: usize, spacing: u64, warmup: u64, access: f64, lambda: f64) -> SchedulerConfig {
    SchedulerConfig {
        variant: Variant::DelayedGentle,
        order: Some(order),
        spacing: Some(spacing),
        gentle_warmup: Some(warmup),
        access_prob: PerLink::Scalar(access),
        fugacity: static_fugacity(lambda),
        lazy: false,
    }
}

pub fn fig_gentle(p: &GentleParams, dir: &Path) -> Result<GentleSummary> {
    let mut m = Manifest::new("fig-gentle", p.seed, p);
    if !(p.load > 0.0 && p.load < 1.0) {
        return Err(CsmaError::config("load", "must lie in (0, 1)"));
    }
    let link = pick_link(&p.graph, p.link)?;

    // Pilot: activity of every link under the standard chain sets the arrival rates.
    let mut pilot = ExperimentConfig::new(p.graph.clone(), p.pilot_horizon);
    pilot.scheduler = scheduler(Kernel::Glauber, 1, p.access_prob, static_fugacity(p.lambda));
    pilot.warmup_fraction = 0.1;
    pilot.seed = p.seed;
    pilot.max_lag = 1;
    let (_, pilot_res) = run_into(dir, "pilot", &pilot, &mut m)?;
    let rates: Vec<f64> = pilot_res.activity.iter().map(|a| p.load * a.fraction).collect();

    let max_spacing = p.spacings.iter().copied().max().unwrap_or(1);
    let horizon = p.gentle_warmup + max_spacing * p.queue_order as u64 + p.post_slots;
    let late_lo = horizon - horizon / 10 + 1;
    let too_short = || CsmaError::config("block", "window shorter than one block");
    let mut queue = Vec::new();
    let mut queue_run = |sched: SchedulerConfig, sub: String, spacing: Option<u64>, m: &mut Manifest| -> Result<()> {
        let mut cfg = ExperimentConfig::new(p.graph.clone(), horizon);
        cfg.scheduler = sched;
        cfg.arrivals.rate = Some(PerLink::Each(rates.clone()));
        cfg.warmup_slots = Some(p.gentle_warmup);
        cfg.replications = p.queue_replications;
        cfg.seed = p.seed;
        cfg.measured_links = vec![link];
        cfg.max_lag = 1;
        cfg.record.timeseries_block = Some(p.block);
        let (run_dir, res) = run_into(dir, &sub, &cfg, m)?;
        csv_into(dir, run_dir.join("timeseries.csv"), &timeseries_rows(&res.timeseries), m)?;
        // The baseline's window opens where sampling would begin.
        let start = match spacing {
            Some(_) => res.delayed_start_slot.unwrap_or(p.gentle_warmup + 1),
            None => p.gentle_warmup + 1,
        };
        queue.push(GentleQueuePoint {
            spacing,
            order: cfg.scheduler.order.unwrap_or(1),
            delayed_start_slot: res.delayed_start_slot,
            early_mean: window_mean(&res.timeseries, p.block, start, start + p.early_slots - 1)
                .ok_or_else(too_short)?,
            late_mean: window_mean(&res.timeseries, p.block, late_lo, horizon).ok_or_else(too_short)?,
        });
        Ok(())
    };
    if p.baseline && p.queue_replications > 0 {
        let sched = scheduler(Kernel::Glauber, 1, p.access_prob, static_fugacity(p.lambda));
        queue_run(sched, "queue/baseline".into(), None, &mut m)?;
    }
    for &spacing in p.spacings.iter().filter(|_| p.queue_replications > 0) {
        let sched = gentle_scheduler(p.queue_order, spacing, p.gentle_warmup, p.access_prob, p.lambda);
        queue_run(sched, format!("queue/M{spacing}"), Some(spacing), &mut m)?;
    }

    let mut probe = Vec::new();
    for &spacing in &p.spacings {
        let start = p.probe_warmup + spacing * p.probe_order as u64 + 1;
        let mut cfg = ExperimentConfig::new(p.graph.clone(), start + p.probe_lags as u64);
        cfg.scheduler = gentle_scheduler(p.probe_order, spacing, p.probe_warmup, p.access_prob, p.lambda);
        cfg.warmup_slots = Some(p.probe_warmup);
        cfg.replications = p.probe_replications;
        cfg.seed = p.seed;
        cfg.measured_links = vec![link];
        cfg.max_lag = 1;
        cfg.record.start_probe_lags = Some(p.probe_lags);
        let (run_dir, res) = run_into(dir, &format!("probe/M{spacing}"), &cfg, &mut m)?;
        let window = res.measured[0]
            .start_probe
            .as_ref()
            .ok_or_else(|| CsmaError::InsufficientData("start probe missing".into()))?;
        let psi: Vec<(usize, f64, f64)> = window
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (r, se) = c.unwrap_or((f64::NAN, f64::NAN));
                (k, r, se)
            })
            .collect();
        let rows: Vec<CorrelationRow> = psi
            .iter()
            .map(|&(lag, psi, se)| CorrelationRow { lag, psi, se })
            .collect();
        csv_into(dir, run_dir.join("correlation.csv"), &rows, &mut m)?;
        probe.push(GentleProbe {
            spacing,
            order: p.probe_order,
            link,
            delayed_start_slot: res.delayed_start_slot.unwrap_or(start),
            psi,
        });
    }
    let summary = GentleSummary {
        link,
        arrival_rates: rates,
        queue,
        probe,
    };
    finish(dir, &summary, &mut m)?;
    Ok(summary)
}

// ---------------------------------------------------------------- dispatch

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub name: String,
    pub dir: PathBuf,
    pub summary: serde_json::Value,
}

/// Runs catalog entry `name` into `out_root/name`.
pub fn run_experiment(name: &str, overrides: &[String], out_root: &Path) -> Result<ExperimentRun> {
    let dir = out_root.join(name);
    let summary = match name {
        "fig-correlation" => to_value(fig_correlation(&load_params(overrides)?, &dir)?),
        "fig-offdur" => to_value(fig_offdur(&load_params(overrides)?, &dir)?),
        "fig-gaussian" => to_value(fig_gaussian(&load_params(overrides)?, &dir)?),
        "fig-delay" => to_value(fig_delay(&load_params(overrides)?, &dir)?),
        "fig-transient" => to_value(fig_transient(&load_params(overrides)?, &dir)?),
        "fig-gentle" => to_value(fig_gentle(&load_params(overrides)?, &dir)?),
        _ => {
            return Err(CsmaError::UnknownExperiment {
                name: name.into(),
                catalog: CATALOG.to_vec(),
            })
        }
    };
    Ok(ExperimentRun {
        name: name.into(),
        dir,
        summary,
    })
}

/// Default parameters of a catalog entry as TOML.
pub fn default_params(name: &str) -> Result<String> {
    fn show<P: Serialize + Default>() -> String {
        toml::to_string(&P::default()).expect("params serialize")
    }
    Ok(match name {
        "fig-correlation" => show::<CorrelationParams>(),
        "fig-offdur" => show::<OffDurationParams>(),
        "fig-gaussian" => show::<GaussianParams>(),
        "fig-delay" => show::<DelayParams>(),
        "fig-transient" => show::<TransientParams>(),
        "fig-gentle" => show::<GentleParams>(),
        _ => {
            return Err(CsmaError::UnknownExperiment {
                name: name.into(),
                catalog: CATALOG.to_vec(),
            })
        }
    })
}

fn to_value<S: Serialize>(s: S) -> serde_json::Value {
    serde_json::to_value(s).expect("summary serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_name_lists_catalog() {
        let dir = tempfile::tempdir().unwrap();
        match run_experiment("fig-nope", &[], dir.path()) {
            Err(CsmaError::UnknownExperiment { catalog, .. }) => assert_eq!(catalog.len(), 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_default_roundtrips_through_overrides() {
        for name in CATALOG {
            let text = default_params(name).unwrap();
            assert!(!text.is_empty());
        }
        let p: DelayParams = load_params(&["orders=[1, 5]".into(), "graph={kind=\"pair\"}".into()]).unwrap();
        assert_eq!(p.orders, vec![1, 5]);
        assert_eq!(p.graph, GraphSource::Pair);
        let err = load_params::<DelayParams>(&["ordres=[1]".into()]).unwrap_err();
        assert!(err.is_config_error());
        let err = load_params::<DelayParams>(&["kernel=\"fancy\"".into()]).unwrap_err();
        match err {
            CsmaError::Config { path, .. } => assert_eq!(path, "kernel"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn window_mean_picks_whole_blocks() {
        let s: Vec<(u64, f64)> = (1..=10).map(|i| (i * 10, i as f64)).collect();
        assert_eq!(window_mean(&s, 10, 1, 20), Some(1.5));
        assert_eq!(window_mean(&s, 10, 91, 100), Some(10.0));
        assert_eq!(window_mean(&s, 10, 5, 9), None);
    }

    #[test]
    fn correlation_on_cycle_pads_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = CorrelationParams {
            orders: vec![3],
            horizon: 200_000,
            max_lag: 9,
            ..CorrelationParams::default()
        };
        let runs = fig_correlation(&p, dir.path()).unwrap();
        let r = &runs[0];
        assert!(r.max_z_off_multiples < 4.0, "{r:?}");
        assert!(r.max_z_vs_oracle.unwrap() < 4.0, "{r:?}");
        let text = std::fs::read_to_string(dir.path().join("T3/correlation.csv")).unwrap();
        assert!(text.starts_with("lag,psi,se\n"));
        assert_eq!(text.lines().count(), 11);
        assert!(dir.path().join("T3/correlation_bounds.csv").exists());
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest.runs.len(), 1);
        assert!(manifest.files.iter().any(|f| f == "T3/correlation.csv"));
    }

    #[test]
    fn small_delay_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = DelayParams {
            graph: GraphSource::Cycle { n_links: 5 },
            intensities: vec![0.5],
            orders: vec![1, 3],
            horizon: 4_000,
            replications: 3,
            ..DelayParams::default()
        };
        let pts = fig_delay(&p, dir.path()).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|q| q.packets > 0 && q.ci_lo <= q.mean_delay && q.mean_delay <= q.ci_hi));
        let text = std::fs::read_to_string(dir.path().join("delay.csv")).unwrap();
        assert!(text.starts_with("intensity,T,mean_delay,ci_lo,ci_hi\n"));
    }
}
