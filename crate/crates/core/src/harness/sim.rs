//! Seeded replications of the slot loop.
//!
//! Slot order: arrivals, queue observation, fugacity, decision and update,
//! service, recording. Replication `r` draws scheduler randomness from ChaCha8
//! stream `2r` and arrivals from stream `2r + 1`, both keyed by the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CsmaError, Result};
use crate::harness::config::{ExperimentConfig, Resolved};
use crate::queueing::{step_arrivals_into, LinkQueueSet, SlotLogRecord};
use crate::scheduler::{FugacityPolicy, SlotScheduler, WeightKind};
use crate::stats::{
    mean_ci, AutocorrResult, AutocorrSums, AutocorrEstimator, BatchMeans, CrossCorrelation, DelayAggregate,
    MeanCi, OffDurationStats, OffDurationTracker,
};

pub const ARTIFACT_VERSION: &str = concat!("dcsma/", env!("CARGO_PKG_VERSION"));
pub const SEED_SCHEME: &str = "chacha8(seed_from_u64(seed)), stream 2r scheduler, 2r+1 arrivals";
const ACTIVITY_BATCHES: u64 = 20;

/// RNG for `stream` under the master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Incremental queue-driven fugacity: `λ_v` is recomputed only when `Q_v`
/// or the `Q_max` floor changes. Values match `FugacityPolicy::resolve_into`.
pub(crate) struct FugacityState {
    weight: WeightKind,
    floor_coef: f64,
    h_cache: Vec<f64>,
    last_q: Vec<usize>,
    last_floor: f64,
}

impl FugacityState {
    pub(crate) fn new(weight: WeightKind, epsilon: f64, n_links: usize) -> Self {
        Self {
            weight,
            floor_coef: epsilon / (2.0 * n_links as f64),
            h_cache: Vec::new(),
            last_q: vec![usize::MAX; n_links],
            last_floor: f64::NAN,
        }
    }

    fn h(&mut self, q: usize) -> f64 {
        if q >= self.h_cache.len() {
            let w = self.weight;
            let start = self.h_cache.len();
            self.h_cache.extend((start..=q.max(2 * start)).map(|x| w.h(x as f64)));
        }
        self.h_cache[q]
    }

    pub(crate) fn update(&mut self, queues: &[usize], lambda: &mut [f64]) {
        let q_max = queues.iter().copied().max().unwrap_or(0);
        let floor = self.floor_coef * self.h(q_max);
        let floor_changed = floor.to_bits() != self.last_floor.to_bits();
        for v in 0..queues.len() {
            let q = queues[v];
            if floor_changed || q != self.last_q[v] {
                lambda[v] = self.h(q).max(floor).exp();
                self.last_q[v] = q;
            }
        }
        self.last_floor = floor;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkActivity {
    pub link: usize,
    pub fraction: f64,
    /// Batch-means standard error.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredLink {
    pub link: usize,
    pub autocorr: Option<AutocorrResult>,
    pub off_duration: Option<OffDurationStats>,
    /// Cross-replication correlation of activity at the delayed start slot with the next slots.
    pub start_probe: Option<Vec<Option<(f64, f64)>>>,
    /// `A_t − S_t` per replication.
    pub net_input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    pub packets: u64,
    pub mean: f64,
    pub per_link_mean: Vec<f64>,
    /// Normal 95% interval across replication means.
    pub replication_ci: Option<MeanCi>,
    pub median: Option<u64>,
    pub p99: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub seed_scheme: String,
    pub n_links: usize,
    pub replications: u64,
    pub horizon: u64,
    pub warmup: u64,
    pub delayed_start_slot: Option<u64>,
    pub activity: Vec<LinkActivity>,
    pub measured: Vec<MeasuredLink>,
    pub delay: DelaySummary,
    /// Replication interval of the per-link mean queue averaged over post-warmup slots.
    pub mean_queue: Option<MeanCi>,
    /// `(block end slot, mean queue per link averaged over the block and replications)`.
    pub timeseries: Vec<(u64, f64)>,
    #[serde(skip)]
    pub slot_log: Vec<SlotLogRecord>,
}

struct Replication {
    activity_counts: Vec<u64>,
    activity_batches: Vec<BatchMeans>,
    autocorr: Vec<AutocorrSums>,
    off: Vec<OffDurationTracker>,
    probe: Vec<CrossCorrelation>,
    net_input: Vec<Option<f64>>,
    delay: DelayAggregate,
    mean_queue: f64,
    timeseries: Vec<f64>,
    slot_log: Vec<SlotLogRecord>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    res: &'a Resolved,
}

pub fn run_simulation(cfg: &ExperimentConfig) -> Result<RunResult> {
    let res = cfg.resolve()?;
    run_resolved(cfg, &res)
}

pub fn run_resolved(cfg: &ExperimentConfig, res: &Resolved) -> Result<RunResult> {
    let ctx = Context { cfg, res };
    let reps: Vec<Replication> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(&ctx, r))
        .collect::<Result<_>>()?;
    merge(&ctx, reps)
}

fn run_replication(ctx: &Context<'_>, r: u64) -> Result<Replication> {
    let cfg = ctx.cfg;
    let g = &ctx.res.graph.graph;
    let n = g.n_links();
    let horizon = cfg.horizon;
    let warmup = cfg.warmup();
    let measured = &ctx.res.measured;
    let mut rng_s = stream_rng(cfg.seed, 2 * r);
    let mut rng_a = stream_rng(cfg.seed, 2 * r + 1);

    let mut sched = SlotScheduler::new(g, ctx.res.access.clone(), ctx.res.spec)?;
    let mut queues = LinkQueueSet::new(n);
    let mut arrivals = vec![false; n];
    let any_arrivals = ctx.res.arrivals.rates().iter().any(|&x| x > 0.0);
    let mut qlen = vec![0usize; n];
    let mut lambda = vec![1.0; n];
    let mut fug = match &ctx.res.fugacity {
        FugacityPolicy::Static(l) => {
            lambda.copy_from_slice(l);
            None
        }
        FugacityPolicy::QueueDriven { weight, epsilon } => Some(FugacityState::new(*weight, *epsilon, n)),
    };

    let measured_slots = horizon - warmup;
    let batch = (measured_slots / ACTIVITY_BATCHES).max(1);
    let mut activity_counts = vec![0u64; n];
    let mut activity_batches = vec![BatchMeans::new(batch); n];
    let mut autocorr: Vec<AutocorrEstimator> = measured.iter().map(|_| AutocorrEstimator::new(cfg.max_lag)).collect();
    let mut off: Vec<OffDurationTracker> = measured.iter().map(|_| OffDurationTracker::new()).collect();
    let mut delay = DelayAggregate::new(n, cfg.record.delay_quantiles);

    let probe_lags = cfg.record.start_probe_lags;
    let probe_start = sched.delayed_start_slot().unwrap_or(1);
    let mut probe_window: Vec<Vec<f64>> = measured.iter().map(|_| Vec::new()).collect();

    let net_at = cfg.record.net_input_slots.map(|t| warmup + t);
    let mut net_base = vec![0i64; measured.len()];
    let mut net_input = vec![None; measured.len()];

    let block = cfg.record.timeseries_block;
    let mut timeseries = Vec::new();
    let mut block_sum = 0.0;
    let mut queue_sum = 0.0;
    let log_slots = cfg.record.slot_log && r == 0;
    let mut slot_log = Vec::new();
    let mut served_delay = vec![None; n];

    for t in 1..=horizon {
        if any_arrivals {
            step_arrivals_into(&ctx.res.arrivals, &mut rng_a, &mut arrivals);
            queues.arrive(&arrivals, t);
        }
        if let Some(f) = &mut fug {
            queues.lengths_into(&mut qlen);
            f.update(&qlen, &mut lambda);
        }
        let s = sched.step(&lambda, &mut rng_s);
        let measuring = t > warmup;
        if log_slots {
            served_delay.iter_mut().for_each(|d| *d = None);
        }
        queues.serve(s, t, |p| {
            if measuring {
                delay.record(p.link, p.delay);
            }
            if log_slots {
                served_delay[p.link] = Some(p.delay);
            }
        });
        if measuring {
            for (v, &on) in s.bits().iter().enumerate() {
                activity_counts[v] += on as u64;
                activity_batches[v].push(on as u8 as f64);
            }
            for (i, &v) in measured.iter().enumerate() {
                let on = s.is_active(v);
                autocorr[i].push_bool(on);
                off[i].push(t, on);
            }
        }
        if let Some(k) = probe_lags {
            if t >= probe_start && t <= probe_start + k as u64 {
                for (i, &v) in measured.iter().enumerate() {
                    probe_window[i].push(s.is_active(v) as u8 as f64);
                }
            }
        }
        if log_slots {
            for v in 0..n {
                slot_log.push(SlotLogRecord {
                    slot: t,
                    link: v,
                    queue: queues.len(v),
                    arrival: arrivals[v],
                    sigma: s.is_active(v),
                    served_delay: served_delay[v],
                });
            }
        }
        if net_at.is_some() {
            if t == warmup {
                for (i, &v) in measured.iter().enumerate() {
                    net_base[i] = queues.net_input(v);
                }
            }
            if Some(t) == net_at {
                for (i, &v) in measured.iter().enumerate() {
                    net_input[i] = Some((queues.net_input(v) - net_base[i]) as f64);
                }
            }
        }
        let per_link = queues.total_len() as f64 / n as f64;
        if measuring {
            queue_sum += per_link;
        }
        if let Some(b) = block {
            block_sum += per_link;
            if t % b == 0 {
                timeseries.push(block_sum / b as f64);
                block_sum = 0.0;
            }
        }
    }

    let mut probe = Vec::new();
    if let Some(k) = probe_lags {
        for w in &probe_window {
            let mut c = CrossCorrelation::new(k);
            if w.len() == k + 1 {
                c.push_window(w)?;
            }
            probe.push(c);
        }
    }
    Ok(Replication {
        activity_counts,
        activity_batches,
        autocorr: autocorr.iter().map(AutocorrEstimator::finish).collect(),
        off,
        probe,
        net_input,
        delay,
        mean_queue: queue_sum / measured_slots as f64,
        timeseries,
        slot_log,
    })
}

fn merge(ctx: &Context<'_>, reps: Vec<Replication>) -> Result<RunResult> {
    let cfg = ctx.cfg;
    let n = ctx.res.graph.graph.n_links();
    let measured = &ctx.res.measured;
    let mut reps = reps.into_iter();
    let mut acc = reps.next().ok_or_else(|| CsmaError::InsufficientData("no replications".into()))?;
    let mut rep_delay_means = vec![acc.delay.mean()];
    let mut rep_queue_means = vec![acc.mean_queue];
    let mut rep_has_packets = vec![acc.delay.count() > 0];
    let mut net: Vec<Vec<f64>> = acc.net_input.iter().map(|x| x.iter().copied().collect()).collect();
    for rep in reps {
        for v in 0..n {
            acc.activity_counts[v] += rep.activity_counts[v];
            acc.activity_batches[v].merge(&rep.activity_batches[v]);
        }
        for i in 0..measured.len() {
            acc.autocorr[i].merge(&rep.autocorr[i])?;
            acc.off[i].merge(&rep.off[i]);
            if let Some(p) = acc.probe.get_mut(i) {
                p.merge(&rep.probe[i])?;
            }
            net[i].extend(rep.net_input[i]);
        }
        rep_delay_means.push(rep.delay.mean());
        rep_has_packets.push(rep.delay.count() > 0);
        rep_queue_means.push(rep.mean_queue);
        acc.delay.merge(&rep.delay)?;
        for (a, b) in acc.timeseries.iter_mut().zip(&rep.timeseries) {
            *a += b;
        }
    }
    let r = cfg.replications as f64;
    let measured_slots = (cfg.horizon - cfg.warmup()) as f64;
    let activity = (0..n)
        .map(|v| LinkActivity {
            link: v,
            fraction: acc.activity_counts[v] as f64 / (measured_slots * r),
            se: acc.activity_batches[v].mean_se().map(|(_, se)| se).unwrap_or(f64::NAN),
        })
        .collect();
    let measured_out = measured
        .iter()
        .enumerate()
        .map(|(i, &v)| MeasuredLink {
            link: v,
            autocorr: acc.autocorr[i].finalize().ok(),
            off_duration: acc.off[i].finalize().ok(),
            start_probe: acc.probe.get(i).and_then(|p| p.finalize().ok()),
            net_input: std::mem::take(&mut net[i]),
        })
        .collect();
    let with_packets: Vec<f64> = rep_delay_means
        .iter()
        .zip(&rep_has_packets)
        .filter(|(_, &h)| h)
        .map(|(m, _)| *m)
        .collect();
    let delay = DelaySummary {
        packets: acc.delay.count(),
        mean: acc.delay.mean(),
        per_link_mean: acc.delay.per_link.iter().map(|m| m.mean).collect(),
        replication_ci: mean_ci(&with_packets).ok(),
        median: acc.delay.quantile(0.5),
        p99: acc.delay.quantile(0.99),
    };
    let timeseries = match cfg.record.timeseries_block {
        Some(b) => acc
            .timeseries
            .iter()
            .enumerate()
            .map(|(i, s)| ((i as u64 + 1) * b, s / r))
            .collect(),
        None => Vec::new(),
    };
    Ok(RunResult {
        version: ARTIFACT_VERSION.into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        seed_scheme: SEED_SCHEME.into(),
        n_links: n,
        replications: cfg.replications,
        horizon: cfg.horizon,
        warmup: cfg.warmup(),
        delayed_start_slot: SlotScheduler::new(&ctx.res.graph.graph, ctx.res.access.clone(), ctx.res.spec)?
            .delayed_start_slot(),
        activity,
        measured: measured_out,
        delay,
        mean_queue: mean_ci(&rep_queue_means).ok(),
        timeseries,
        slot_log: acc.slot_log,
    })
}
