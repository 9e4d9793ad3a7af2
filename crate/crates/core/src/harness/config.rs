//! Run configuration: TOML schema, dotted overrides and resolution into runtime types.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CsmaError, Result};
use crate::graph::{capacity_profile, generate_rgg, ConflictGraph, GraphFile, RggInstance, RggParams};
use crate::queueing::ArrivalParams;
use crate::scheduler::{AccessParams, FugacityPolicy, SchedulerSpec, StartMode, UpdateKernel, WeightKind};

/// A scalar applied to every link, or one value per link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerLink {
    Scalar(f64),
    Each(Vec<f64>),
}

impl PerLink {
    pub fn expand(&self, n_links: usize, path: &str) -> Result<Vec<f64>> {
        match self {
            PerLink::Scalar(x) => Ok(vec![*x; n_links]),
            PerLink::Each(v) if v.len() == n_links => Ok(v.clone()),
            PerLink::Each(v) => Err(CsmaError::config(
                path,
                format!("expected {n_links} per-link values, got {}", v.len()),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Isolated { n_links: usize },
    Pair,
    Path { n_links: usize },
    Cycle { n_links: usize },
    Complete { n_links: usize },
    Star { leaves: usize },
    Random { n_links: usize, edge_prob: f64, seed: u64 },
    Inline { n_links: usize, edges: Vec<[usize; 2]> },
    Rgg { n_nodes: usize, area_side: f64, tx_range: f64, seed: u64 },
    /// Graph exchange file (TOML or JSON); relative paths resolve against the config file.
    File { path: PathBuf },
}

impl GraphSource {
    pub fn rgg25(seed: u64) -> Self {
        GraphSource::Rgg {
            n_nodes: 25,
            area_side: 1000.0,
            tx_range: 250.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedGraph {
    pub graph: ConflictGraph,
    pub rgg: Option<RggInstance>,
}

pub fn resolve_graph(src: &GraphSource, base_dir: Option<&Path>) -> Result<ResolvedGraph> {
    let plain = |graph| Ok(ResolvedGraph { graph, rgg: None });
    match src {
        GraphSource::Isolated { n_links } => plain(ConflictGraph::isolated(*n_links)),
        GraphSource::Pair => plain(ConflictGraph::pair()),
        GraphSource::Path { n_links } => plain(ConflictGraph::path(*n_links)),
        GraphSource::Cycle { n_links } => plain(ConflictGraph::cycle(*n_links)?),
        GraphSource::Complete { n_links } => plain(ConflictGraph::complete(*n_links)),
        GraphSource::Star { leaves } => plain(ConflictGraph::star(*leaves)),
        GraphSource::Random { n_links, edge_prob, seed } => {
            if !(0.0..=1.0).contains(edge_prob) {
                return Err(CsmaError::config("graph.edge_prob", "must lie in [0, 1]"));
            }
            plain(ConflictGraph::random(*n_links, *edge_prob, *seed))
        }
        GraphSource::Inline { n_links, edges } => {
            let edges: Vec<_> = edges.iter().map(|e| (e[0], e[1])).collect();
            plain(ConflictGraph::new(*n_links, &edges)?)
        }
        GraphSource::Rgg {
            n_nodes,
            area_side,
            tx_range,
            seed,
        } => {
            let inst = generate_rgg(&RggParams {
                n_nodes: *n_nodes,
                area_side: *area_side,
                tx_range: *tx_range,
                seed: *seed,
            })?;
            Ok(ResolvedGraph {
                graph: inst.graph.clone(),
                rgg: Some(inst),
            })
        }
        GraphSource::File { path } => {
            let full = match base_dir {
                Some(d) if path.is_relative() => d.join(path),
                _ => path.clone(),
            };
            plain(load_graph_file(&full)?.to_graph()?)
        }
    }
}

/// Reads a graph file; `.json` files are JSON, everything else TOML.
pub fn load_graph_file(path: &Path) -> Result<GraphFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CsmaError::config(path.display().to_string(), e.to_string()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| CsmaError::config(e.path().to_string(), e.inner().to_string()))
    } else {
        let de = toml::Deserializer::new(&text);
        serde_path_to_error::deserialize(de).map_err(|e| CsmaError::config(e.path().to_string(), e.inner().to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Glauber,
    Delayed,
    DelayedGentle,
    Mh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FugacityConfig {
    Static(PerLink),
    QueueDriven { weight: WeightKind, epsilon: f64 },
}

impl Default for FugacityConfig {
    fn default() -> Self {
        FugacityConfig::Static(PerLink::Scalar(1.0))
    }
}

fn default_access() -> PerLink {
    PerLink::Scalar(0.25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    #[serde(default)]
    pub variant: Variant,
    #[serde(rename = "T", alias = "order", default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(rename = "M", alias = "spacing", default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<u64>,
    /// Standard-chain slots before gentle-start sampling begins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gentle_warmup: Option<u64>,
    #[serde(default = "default_access")]
    pub access_prob: PerLink,
    #[serde(default)]
    pub fugacity: FugacityConfig,
    #[serde(default)]
    pub lazy: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Glauber,
            order: None,
            spacing: None,
            gentle_warmup: None,
            access_prob: default_access(),
            fugacity: FugacityConfig::default(),
            lazy: false,
        }
    }
}

impl SchedulerConfig {
    pub fn delayed(order: usize) -> Self {
        Self {
            variant: if order == 1 { Variant::Glauber } else { Variant::Delayed },
            order: Some(order),
            ..Self::default()
        }
    }

    pub fn spec(&self) -> Result<SchedulerSpec> {
        let order = self.order.unwrap_or(1);
        if order == 0 {
            return Err(CsmaError::config("scheduler.T", "order must be at least 1"));
        }
        let mut spec = SchedulerSpec::delayed(order);
        spec.lazy = self.lazy;
        match self.variant {
            Variant::Glauber if order != 1 => {
                return Err(CsmaError::config("scheduler.T", "glauber requires T = 1; use variant = \"delayed\""))
            }
            Variant::Glauber | Variant::Delayed => {}
            Variant::Mh => spec.kernel = UpdateKernel::MetropolisHastings,
            Variant::DelayedGentle => {
                let spacing = self
                    .spacing
                    .ok_or_else(|| CsmaError::config("scheduler.M", "delayed_gentle requires M"))?;
                if spacing == 0 {
                    return Err(CsmaError::config("scheduler.M", "must be at least 1"));
                }
                let min = spacing * order as u64;
                let warmup_slots = self.gentle_warmup.unwrap_or(min.max(1000));
                if warmup_slots < min {
                    return Err(CsmaError::config("scheduler.gentle_warmup", "must be at least M·T"));
                }
                spec.start = StartMode::Gentle { warmup_slots, spacing };
            }
        }
        if self.spacing.is_some() && self.variant != Variant::DelayedGentle {
            return Err(CsmaError::config("scheduler.M", "only used by variant delayed_gentle"));
        }
        Ok(spec)
    }

    pub fn access(&self, n_links: usize) -> Result<AccessParams> {
        AccessParams::new(self.access_prob.expand(n_links, "scheduler.access_prob")?)
            .map_err(|e| CsmaError::config("scheduler.access_prob", e.to_string()))
    }

    pub fn fugacity_policy(&self, n_links: usize) -> Result<FugacityPolicy> {
        let policy = match &self.fugacity {
            FugacityConfig::Static(l) => FugacityPolicy::Static(l.expand(n_links, "scheduler.fugacity.static")?),
            FugacityConfig::QueueDriven { weight, epsilon } => FugacityPolicy::QueueDriven {
                weight: *weight,
                epsilon: *epsilon,
            },
        };
        policy
            .validate(n_links)
            .map_err(|e| CsmaError::config("scheduler.fugacity", e.to_string()))?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    /// Explicit per-link Bernoulli rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<PerLink>,
    /// Traffic intensity scaling the capacity profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
}

impl ArrivalSpec {
    pub fn intensity(rho: f64) -> Self {
        Self {
            rate: None,
            intensity: Some(rho),
        }
    }

    pub fn rate(eta: f64) -> Self {
        Self {
            rate: Some(PerLink::Scalar(eta)),
            intensity: None,
        }
    }

    pub fn resolve(&self, g: &ConflictGraph) -> Result<ArrivalParams> {
        let n = g.n_links();
        let rates = match (&self.rate, self.intensity) {
            (Some(_), Some(_)) => {
                return Err(CsmaError::config("arrivals", "set either rate or intensity, not both"));
            }
            (None, None) => vec![0.0; n],
            (Some(r), None) => r.expand(n, "arrivals.rate")?,
            (None, Some(rho)) => {
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(CsmaError::config("arrivals.intensity", "must lie in (0, 1)"));
                }
                let cap = capacity_profile(g).map_err(|e| {
                    CsmaError::config(
                        "arrivals.intensity",
                        format!("capacity profile unavailable ({e}); give explicit arrivals.rate instead"),
                    )
                })?;
                cap.into_iter().map(|c| rho * c).collect()
            }
        };
        ArrivalParams::new(rates).map_err(|e| CsmaError::config("arrivals.rate", e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordConfig {
    /// Block length for the mean-queue time series; off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeseries_block: Option<u64>,
    /// Record `A_t − S_t` of each measured link `t` slots after warmup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net_input_slots: Option<u64>,
    /// Record measured-link activity for this many lags after the delayed chain starts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_probe_lags: Option<usize>,
    /// Keep per-packet delay histograms for quantiles.
    #[serde(default)]
    pub delay_quantiles: bool,
    /// Per-slot log of replication 0.
    #[serde(default)]
    pub slot_log: bool,
}

fn default_warmup_fraction() -> f64 {
    0.5
}

fn default_replications() -> u64 {
    1
}

fn default_max_lag() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub arrivals: ArrivalSpec,
    pub horizon: u64,
    #[serde(default = "default_warmup_fraction")]
    pub warmup_fraction: f64,
    /// Absolute warmup; overrides `warmup_fraction`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_slots: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    /// Links whose traces feed the autocorrelation and off-duration estimators.
    /// Empty means the max-degree link.
    #[serde(default)]
    pub measured_links: Vec<usize>,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub record: RecordConfig,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(graph: GraphSource, horizon: u64) -> Self {
        Self {
            graph,
            scheduler: SchedulerConfig::default(),
            arrivals: ArrivalSpec::default(),
            horizon,
            warmup_fraction: default_warmup_fraction(),
            warmup_slots: None,
            replications: 1,
            seed: 0,
            measured_links: Vec::new(),
            max_lag: default_max_lag(),
            out_dir: None,
            record: RecordConfig::default(),
            base_dir: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| CsmaError::config("<root>", e.message()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            CsmaError::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })
    }

    /// Loads a config file, applying `k=v` overrides before validation.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CsmaError::config(path.display().to_string(), e.to_string()))?;
        let mut value: toml::Value = toml::from_str(&text).map_err(|e| CsmaError::config("<root>", e.message()))?;
        apply_overrides(&mut value, overrides)?;
        let mut cfg = Self::from_value(value)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(CsmaError::config("horizon", "must be positive"));
        }
        if self.replications == 0 {
            return Err(CsmaError::config("replications", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(CsmaError::config("warmup_fraction", "must lie in [0, 1)"));
        }
        if self.warmup() >= self.horizon {
            return Err(CsmaError::config("warmup_slots", "must be below the horizon"));
        }
        self.scheduler.spec()?;
        if let Some(t) = self.record.net_input_slots {
            if self.warmup() + t > self.horizon {
                return Err(CsmaError::config("record.net_input_slots", "warmup + t exceeds the horizon"));
            }
        }
        if self.record.timeseries_block == Some(0) {
            return Err(CsmaError::config("record.timeseries_block", "must be at least 1"));
        }
        Ok(())
    }

    pub fn warmup(&self) -> u64 {
        self.warmup_slots
            .unwrap_or((self.horizon as f64 * self.warmup_fraction).floor() as u64)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }

    /// Graph, access probabilities, fugacity, arrivals and scheduler spec, all checked.
    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let rg = resolve_graph(&self.graph, self.base_dir.as_deref())?;
        let n = rg.graph.n_links();
        if n == 0 {
            return Err(CsmaError::config("graph", "graph has no links"));
        }
        let measured = if self.measured_links.is_empty() {
            vec![rg.graph.max_degree_link().unwrap_or(0)]
        } else {
            self.measured_links.clone()
        };
        if let Some(&v) = measured.iter().find(|&&v| v >= n) {
            return Err(CsmaError::config("measured_links", format!("link {v} out of range for {n} links")));
        }
        Ok(Resolved {
            access: self.scheduler.access(n)?,
            fugacity: self.scheduler.fugacity_policy(n)?,
            arrivals: self.arrivals.resolve(&rg.graph)?,
            spec: self.scheduler.spec()?,
            measured,
            graph: rg,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub graph: ResolvedGraph,
    pub access: AccessParams,
    pub fugacity: FugacityPolicy,
    pub arrivals: ArrivalParams,
    pub spec: SchedulerSpec,
    pub measured: Vec<usize>,
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Applies `a.b.c=value` assignments; values parse as TOML, falling back to a bare string.
pub fn apply_overrides(root: &mut toml::Value, overrides: &[String]) -> Result<()> {
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| CsmaError::config(ov.clone(), "override must look like key=value"))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(CsmaError::config(key, "empty key segment"));
        }
        let mut cur = &mut *root;
        for part in &parts[..parts.len() - 1] {
            let table = cur
                .as_table_mut()
                .ok_or_else(|| CsmaError::config(key, format!("`{part}` is not inside a table")))?;
            cur = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        cur.as_table_mut()
            .ok_or_else(|| CsmaError::config(key, "parent is not a table"))?
            .insert(parts[parts.len() - 1].to_string(), value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
horizon = 1000
replications = 2
seed = 9

[graph]
kind = "pair"

[scheduler]
variant = "delayed"
T = 3
access_prob = [0.25, 0.5]
fugacity = { queue_driven = { weight = "loglog", epsilon = 0.1 } }

[arrivals]
rate = 0.1
"#;

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.scheduler.order, Some(3));
        let r = cfg.resolve().unwrap();
        assert_eq!(r.spec.order, 3);
        assert_eq!(r.access.probs(), &[0.25, 0.5]);
        assert!(!r.fugacity.is_static());
        assert_eq!(r.arrivals.rates(), &[0.1, 0.1]);
        assert_eq!(cfg.warmup(), 500);
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = SAMPLE.replace("variant = \"delayed\"", "variant = \"fancy\"");
        match ExperimentConfig::from_toml_str(&bad) {
            Err(CsmaError::Config { path, .. }) => assert_eq!(path, "scheduler.variant"),
            other => panic!("{other:?}"),
        }
        let bad = SAMPLE.replace("seed = 9", "seed = 9\ntypo = 1");
        assert!(ExperimentConfig::from_toml_str(&bad).unwrap_err().is_config_error());
        let bad = SAMPLE.replace("access_prob = [0.25, 0.5]", "access_prob = [0.25]");
        match ExperimentConfig::from_toml_str(&bad).unwrap().resolve() {
            Err(CsmaError::Config { path, .. }) => assert_eq!(path, "scheduler.access_prob"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_apply_nested_values() {
        let mut v: toml::Value = toml::from_str(SAMPLE).unwrap();
        apply_overrides(
            &mut v,
            &[
                "scheduler.T=5".into(),
                "arrivals.rate=0.2".into(),
                "graph.kind=cycle".into(),
                "graph.n_links=7".into(),
            ],
        )
        .unwrap();
        let cfg = ExperimentConfig::from_value(v).unwrap();
        assert_eq!(cfg.scheduler.order, Some(5));
        assert_eq!(cfg.graph, GraphSource::Cycle { n_links: 7 });
        let mut v: toml::Value = toml::from_str(SAMPLE).unwrap();
        assert!(apply_overrides(&mut v, &["nokey".into()]).is_err());
    }

    #[test]
    fn variant_rules() {
        let mut s = SchedulerConfig {
            variant: Variant::Glauber,
            order: Some(2),
            ..SchedulerConfig::default()
        };
        assert!(s.spec().is_err());
        s.variant = Variant::DelayedGentle;
        assert!(s.spec().is_err());
        s.spacing = Some(10);
        assert!(matches!(s.spec().unwrap().start, StartMode::Gentle { spacing: 10, .. }));
        s.variant = Variant::Mh;
        assert!(s.spec().is_err());
        s.spacing = None;
        assert_eq!(s.spec().unwrap().kernel, UpdateKernel::MetropolisHastings);
    }

    #[test]
    fn intensity_uses_capacity_profile() {
        let spec = ArrivalSpec::intensity(0.5);
        let a = spec.resolve(&ConflictGraph::pair()).unwrap();
        assert_eq!(a.rates(), &[0.25, 0.25]);
        assert!(ArrivalSpec::intensity(1.5).resolve(&ConflictGraph::pair()).is_err());
    }

    #[test]
    fn bad_horizon_and_warmup() {
        let mut cfg = ExperimentConfig::new(GraphSource::Pair, 0);
        assert!(cfg.validate().is_err());
        cfg.horizon = 10;
        cfg.warmup_slots = Some(10);
        assert!(cfg.validate().is_err());
    }
}
