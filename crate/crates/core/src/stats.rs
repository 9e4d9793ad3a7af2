//! Single-pass estimators over simulation traces.
//!
//! Every aggregate can be merged with another of the same kind, so
//! replications run independently and combine in a fixed order.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{CsmaError, Result};

/// Count, mean and centered second moment (Welford, merged with Chan's rule).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn population_variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanVar {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut mv = MeanVar::new();
        for x in iter {
            mv.push(x);
        }
        mv
    }
}

/// Mean with a normal confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub std_err: f64,
    pub n: u64,
}

pub const Z_95: f64 = 1.96;

impl MeanCi {
    pub fn from_mean_var(mv: &MeanVar, z: f64) -> Self {
        let se = if mv.count < 2 { 0.0 } else { mv.std_err() };
        Self {
            mean: mv.mean,
            ci_lo: mv.mean - z * se,
            ci_hi: mv.mean + z * se,
            std_err: se,
            n: mv.count,
        }
    }
}

/// 95% interval across replication-level values.
pub fn mean_ci(values: &[f64]) -> Result<MeanCi> {
    if values.is_empty() {
        return Err(CsmaError::InsufficientData("no replications".into()));
    }
    Ok(MeanCi::from_mean_var(&values.iter().copied().collect(), Z_95))
}

/// Non-overlapping batch means of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    batch_size: u64,
    current_sum: f64,
    current_len: u64,
    batches: Vec<f64>,
}

impl BatchMeans {
    pub fn new(batch_size: u64) -> Self {
        Self {
            batch_size: batch_size.max(1),
            current_sum: 0.0,
            current_len: 0,
            batches: Vec::new(),
        }
    }

    pub fn push(&mut self, x: f64) {
        self.current_sum += x;
        self.current_len += 1;
        if self.current_len == self.batch_size {
            self.batches.push(self.current_sum / self.batch_size as f64);
            self.current_sum = 0.0;
            self.current_len = 0;
        }
    }

    /// Appends the other stream's completed batches; partial batches are dropped.
    pub fn merge(&mut self, other: &BatchMeans) {
        self.batches.extend_from_slice(&other.batches);
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn batches(&self) -> &[f64] {
        &self.batches
    }

    pub fn summary(&self) -> MeanVar {
        self.batches.iter().copied().collect()
    }

    /// Mean over complete batches with its standard error.
    pub fn mean_se(&self) -> Result<(f64, f64)> {
        if self.batches.len() < 2 {
            return Err(CsmaError::InsufficientData(format!(
                "{} complete batches, need at least 2",
                self.batches.len()
            )));
        }
        let s = self.summary();
        Ok((s.mean, s.std_err()))
    }
}

/// Streaming lag-`k` autocorrelation of one series.
#[derive(Debug, Clone)]
pub struct AutocorrEstimator {
    sums: AutocorrSums,
    head: Vec<f64>,
    tail: VecDeque<f64>,
    batch_len: u64,
    cur: LagBatch,
}

/// Batches kept per series before adjacent pairs are merged.
const MAX_LAG_BATCHES: usize = 64;
/// Fewest usable batches for a batch-means standard error.
const MIN_LAG_BATCHES: usize = 10;

/// Sums over one contiguous batch; a pair counts toward the batch of its later sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagBatch {
    n: u64,
    sum: f64,
    cross: Vec<f64>,
}

impl LagBatch {
    fn new(max_lag: usize) -> Self {
        Self {
            n: 0,
            sum: 0.0,
            cross: vec![0.0; max_lag + 1],
        }
    }

    fn absorb(&mut self, other: &LagBatch) {
        self.n += other.n;
        self.sum += other.sum;
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            *a += b;
        }
    }

    /// Lag-`k` autocovariances about an outside mean `m`.
    fn autocov(&self, m: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.n as f64;
        let centre = m * m - 2.0 * m * self.sum / n;
        self.cross.iter().map(move |c| c / n + centre)
    }
}

/// Mergeable sufficient statistics for pooled autocorrelation across series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrSums {
    max_lag: usize,
    n: u64,
    sum: f64,
    /// `cross[k] = Σ x_t x_{t+k}` within each series.
    cross: Vec<f64>,
    /// Sum of the first `n − k` values of each series.
    lead: Vec<f64>,
    /// Sum of the last `n − k` values of each series.
    trail: Vec<f64>,
    /// Number of lag-`k` pairs.
    pairs: Vec<u64>,
    /// Complete batches, for the batch-means standard error.
    batches: Vec<LagBatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrResult {
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
    /// `psi[k]` for `k = 0..=K`.
    pub psi: Vec<f64>,
    pub se: Vec<f64>,
}

impl AutocorrSums {
    pub fn new(max_lag: usize) -> Self {
        Self {
            max_lag,
            n: 0,
            sum: 0.0,
            cross: vec![0.0; max_lag + 1],
            lead: vec![0.0; max_lag + 1],
            trail: vec![0.0; max_lag + 1],
            pairs: vec![0; max_lag + 1],
            batches: Vec::new(),
        }
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn merge(&mut self, other: &AutocorrSums) -> Result<()> {
        if other.max_lag != self.max_lag {
            return Err(CsmaError::DimensionMismatch {
                expected: self.max_lag,
                got: other.max_lag,
            });
        }
        self.n += other.n;
        self.sum += other.sum;
        for k in 0..=self.max_lag {
            self.cross[k] += other.cross[k];
            self.lead[k] += other.lead[k];
            self.trail[k] += other.trail[k];
            self.pairs[k] += other.pairs[k];
        }
        self.batches.extend(other.batches.iter().cloned());
        Ok(())
    }

    /// Biased-normalized `ψ̂(k)`. The standard error is the batch-means spread
    /// of per-batch `ψ̂(k)` when enough batches exist, else Bartlett's formula.
    pub fn finalize(&self) -> Result<AutocorrResult> {
        if self.n < 2 {
            return Err(CsmaError::InsufficientData(format!("{} samples", self.n)));
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let autocov = |k: usize| {
            (self.cross[k] - mean * (self.lead[k] + self.trail[k]) + self.pairs[k] as f64 * mean * mean) / n
        };
        let c0 = autocov(0);
        if !(c0 > 1e-300) {
            return Err(CsmaError::DegenerateVariance { link: 0, p: mean });
        }
        let psi: Vec<f64> = (0..=self.max_lag).map(|k| autocov(k) / c0).collect();
        let se = self.batch_se(mean, c0, &psi).unwrap_or_else(|| bartlett_se(&psi, n));
        Ok(AutocorrResult {
            n: self.n,
            mean,
            variance: c0,
            psi,
            se,
        })
    }

    /// Ratio-estimator batch means: per batch `d_b = ĉ_b(k) − ψ̂(k) ĉ_b(0)`
    /// with every batch centred on the pooled mean.
    fn batch_se(&self, mean: f64, c0: f64, psi: &[f64]) -> Option<Vec<f64>> {
        let b = self.batches.len();
        if b < MIN_LAG_BATCHES {
            return None;
        }
        let total: f64 = self.batches.iter().map(|x| x.n as f64).sum();
        let covs: Vec<(f64, Vec<f64>)> = self
            .batches
            .iter()
            .map(|x| (x.n as f64 / total, x.autocov(mean).collect()))
            .collect();
        let mut se = vec![0.0; self.max_lag + 1];
        for (k, out) in se.iter_mut().enumerate().skip(1) {
            let d: Vec<(f64, f64)> = covs.iter().map(|(w, c)| (*w, c[k] - psi[k] * c[0])).collect();
            let dbar: f64 = d.iter().map(|(w, x)| w * x).sum();
            let ss: f64 = d.iter().map(|(w, x)| (w * (x - dbar)).powi(2)).sum();
            *out = (ss * b as f64 / (b - 1) as f64).sqrt() / c0;
        }
        Some(se)
    }
}

/// Bartlett's formula, with ψ taken as zero beyond the estimated lags.
fn bartlett_se(psi: &[f64], n: f64) -> Vec<f64> {
    let k_max = psi.len() as isize - 1;
    let rho = |m: isize| if m.abs() > k_max { 0.0 } else { psi[m.unsigned_abs()] };
    (0..=k_max)
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let var: f64 = (1..=k_max)
                .map(|j| {
                    let t = rho(j + k) + rho(j - k) - 2.0 * rho(j) * rho(k);
                    t * t
                })
                .sum();
            (var.max(1.0 / (n * 4.0)) / n).sqrt()
        })
        .collect()
}

impl AutocorrEstimator {
    pub fn new(max_lag: usize) -> Self {
        Self {
            sums: AutocorrSums::new(max_lag),
            head: Vec::with_capacity(max_lag),
            tail: VecDeque::with_capacity(max_lag + 1),
            batch_len: (2 * max_lag as u64).max(256),
            cur: LagBatch::new(max_lag),
        }
    }

    pub fn max_lag(&self) -> usize {
        self.sums.max_lag
    }

    pub fn len(&self) -> u64 {
        self.sums.n
    }

    pub fn is_empty(&self) -> bool {
        self.sums.n == 0
    }

    pub fn push(&mut self, x: f64) {
        self.sums.n += 1;
        self.sums.sum += x;
        let max_lag = self.sums.max_lag;
        let b = &mut self.cur;
        b.n += 1;
        b.sum += x;
        b.cross[0] += x * x;
        // tail holds the previous min(n, K) values, newest last.
        for (k, prev) in self.tail.iter().rev().enumerate() {
            b.cross[k + 1] += x * prev;
        }
        if self.head.len() < max_lag {
            self.head.push(x);
        }
        if max_lag > 0 {
            if self.tail.len() == max_lag {
                self.tail.pop_front();
            }
            self.tail.push_back(x);
        }
        if self.cur.n == self.batch_len {
            self.close_batch();
        }
    }

    pub fn push_bool(&mut self, x: bool) {
        self.push(if x { 1.0 } else { 0.0 });
    }

    fn close_batch(&mut self) {
        let b = std::mem::replace(&mut self.cur, LagBatch::new(self.sums.max_lag));
        for (a, c) in self.sums.cross.iter_mut().zip(&b.cross) {
            *a += c;
        }
        let batches = &mut self.sums.batches;
        batches.push(b);
        if batches.len() == MAX_LAG_BATCHES {
            let old = std::mem::take(batches);
            for pair in old.chunks(2) {
                let mut merged = pair[0].clone();
                merged.absorb(&pair[1]);
                batches.push(merged);
            }
            self.batch_len *= 2;
        }
    }

    /// Closes the series and returns its mergeable sums. A partial last batch
    /// counts toward the estimate but not the standard error.
    pub fn finish(&self) -> AutocorrSums {
        let mut s = self.sums.clone();
        for (a, c) in s.cross.iter_mut().zip(&self.cur.cross) {
            *a += c;
        }
        let n = s.n as usize;
        let mut first = 0.0;
        let mut last = 0.0;
        for k in 0..=s.max_lag {
            if k > 0 && k <= n {
                first += self.head[k - 1];
                last += self.tail[self.tail.len() - k];
            }
            if k < n {
                s.lead[k] = s.sum - last;
                s.trail[k] = s.sum - first;
                s.pairs[k] = (n - k) as u64;
            }
        }
        s
    }
}

pub fn autocorr_update(est: &mut AutocorrEstimator, sample: f64) {
    est.push(sample);
}

pub fn autocorr_finalize(est: &AutocorrEstimator) -> Result<AutocorrResult> {
    est.finish().finalize()
}

/// Gaps between consecutive active slots of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDurationTracker {
    last_active: Option<u64>,
    gaps: MeanVar,
    batches: BatchMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffDurationStats {
    pub count: u64,
    pub mean: f64,
    pub second_moment: f64,
    pub cov: f64,
    /// Batch-means standard error of the mean, when enough gaps exist.
    pub mean_se: Option<f64>,
}

impl OffDurationTracker {
    pub const DEFAULT_BATCH: u64 = 1000;

    pub fn new() -> Self {
        Self::with_batch(Self::DEFAULT_BATCH)
    }

    pub fn with_batch(batch: u64) -> Self {
        Self {
            last_active: None,
            gaps: MeanVar::new(),
            batches: BatchMeans::new(batch),
        }
    }

    pub fn push(&mut self, slot: u64, active: bool) {
        if !active {
            return;
        }
        if let Some(prev) = self.last_active {
            let u = (slot - prev) as f64;
            self.gaps.push(u);
            self.batches.push(u);
        }
        self.last_active = Some(slot);
    }

    /// Pools gaps from an independent trace.
    pub fn merge(&mut self, other: &OffDurationTracker) {
        self.gaps.merge(&other.gaps);
        self.batches.merge(&other.batches);
    }

    pub fn finalize(&self) -> Result<OffDurationStats> {
        if self.gaps.count == 0 {
            return Err(CsmaError::InsufficientData("fewer than 2 active slots".into()));
        }
        let mean = self.gaps.mean;
        let var = self.gaps.population_variance();
        Ok(OffDurationStats {
            count: self.gaps.count,
            mean,
            second_moment: var + mean * mean,
            cov: var.sqrt() / mean,
            mean_se: self.batches.mean_se().ok().map(|(_, se)| se),
        })
    }
}

impl Default for OffDurationTracker {
    fn default() -> Self {
        Self::new()
    }
}

pub fn off_duration_update(tracker: &mut OffDurationTracker, slot: u64, active: bool) {
    tracker.push(slot, active);
}

pub fn off_duration_finalize(tracker: &OffDurationTracker) -> Result<OffDurationStats> {
    tracker.finalize()
}

/// Per-link and global packet delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayAggregate {
    pub per_link: Vec<MeanVar>,
    pub global: MeanVar,
    /// `histogram[d]` counts packets with delay `d`, when quantiles are tracked.
    histogram: Option<Vec<u64>>,
}

impl DelayAggregate {
    pub fn new(n_links: usize, track_quantiles: bool) -> Self {
        Self {
            per_link: vec![MeanVar::new(); n_links],
            global: MeanVar::new(),
            histogram: track_quantiles.then(Vec::new),
        }
    }

    pub fn record(&mut self, link: usize, delay: u64) {
        let d = delay as f64;
        self.per_link[link].push(d);
        self.global.push(d);
        if let Some(h) = &mut self.histogram {
            let i = delay as usize;
            if h.len() <= i {
                h.resize(i + 1, 0);
            }
            h[i] += 1;
        }
    }

    pub fn merge(&mut self, other: &DelayAggregate) -> Result<()> {
        if self.per_link.len() != other.per_link.len() {
            return Err(CsmaError::DimensionMismatch {
                expected: self.per_link.len(),
                got: other.per_link.len(),
            });
        }
        for (a, b) in self.per_link.iter_mut().zip(&other.per_link) {
            a.merge(b);
        }
        self.global.merge(&other.global);
        match (&mut self.histogram, &other.histogram) {
            (Some(a), Some(b)) => {
                if a.len() < b.len() {
                    a.resize(b.len(), 0);
                }
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            _ => self.histogram = None,
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.global.count
    }

    pub fn mean(&self) -> f64 {
        self.global.mean
    }

    /// Smallest delay `d` with at least a fraction `q` of packets at or below it.
    pub fn quantile(&self, q: f64) -> Option<u64> {
        let h = self.histogram.as_ref()?;
        let total: u64 = h.iter().sum();
        if total == 0 {
            return None;
        }
        let target = (q.clamp(0.0, 1.0) * total as f64).ceil().max(1.0) as u64;
        let mut acc = 0;
        for (d, &c) in h.iter().enumerate() {
            acc += c;
            if acc >= target {
                return Some(d as u64);
            }
        }
        Some(h.len() as u64 - 1)
    }
}

pub fn delay_record(agg: &mut DelayAggregate, link: usize, delay: u64) {
    agg.record(link, delay);
}

/// Replication-level interval of the global mean delay.
pub fn delay_finalize(replications: &[DelayAggregate]) -> Result<MeanCi> {
    let means: Vec<f64> = replications.iter().filter(|a| a.count() > 0).map(|a| a.mean()).collect();
    mean_ci(&means)
}

/// Per-slot averages of a quantity across replications.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesAccumulator {
    sums: Vec<f64>,
    runs: u64,
}

impl TimeSeriesAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            sums: vec![0.0; len],
            runs: 0,
        }
    }

    pub fn add_run(&mut self, series: &[f64]) -> Result<()> {
        if series.len() != self.sums.len() {
            return Err(CsmaError::DimensionMismatch {
                expected: self.sums.len(),
                got: series.len(),
            });
        }
        for (s, x) in self.sums.iter_mut().zip(series) {
            *s += x;
        }
        self.runs += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &TimeSeriesAccumulator) -> Result<()> {
        if other.runs == 0 {
            return Ok(());
        }
        if self.runs == 0 && self.sums.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        self.add_run(&other.sums)?;
        self.runs += other.runs - 1;
        Ok(())
    }

    pub fn runs(&self) -> u64 {
        self.runs
    }

    pub fn mean(&self) -> Vec<f64> {
        let r = self.runs.max(1) as f64;
        self.sums.iter().map(|s| s / r).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetInputHistogram {
    pub bins: Vec<HistBin>,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Jarque–Bera statistic.
    pub jarque_bera: f64,
    /// Asymptotic χ²₂ p-value of the Jarque–Bera statistic.
    pub p_value: f64,
    pub zero_variance: bool,
}

impl NetInputHistogram {
    pub fn is_normal_at(&self, level: f64) -> bool {
        !self.zero_variance && self.p_value > level
    }
}

/// Equal-width histogram plus moments and a normality statistic for the Gaussian overlay.
pub fn net_input_histogram(series: &[f64], bins: usize) -> Result<NetInputHistogram> {
    if series.is_empty() {
        return Err(CsmaError::InsufficientData("empty series".into()));
    }
    if bins == 0 {
        return Err(CsmaError::param("bins", "must be at least 1"));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m2 <= 0.0 || lo == hi {
        return Ok(NetInputHistogram {
            bins: vec![HistBin {
                lo: lo - 0.5,
                hi: lo + 0.5,
                count: series.len() as u64,
            }],
            mean,
            variance: 0.0,
            skewness: 0.0,
            excess_kurtosis: 0.0,
            jarque_bera: f64::INFINITY,
            p_value: 0.0,
            zero_variance: true,
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for x in series {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let jarque_bera = n / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0);
    Ok(NetInputHistogram {
        bins: counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistBin {
                lo: lo + i as f64 * width,
                hi: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
                count,
            })
            .collect(),
        mean,
        variance: m2 * n / (n - 1.0).max(1.0),
        skewness,
        excess_kurtosis,
        jarque_bera,
        p_value: (-jarque_bera / 2.0).exp(),
        zero_variance: false,
    })
}

/// Cross-replication correlation of one slot's value with each of the next `K` slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelation {
    n: u64,
    sum0: f64,
    sumsq0: f64,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    cross: Vec<f64>,
}

impl CrossCorrelation {
    pub fn new(max_lag: usize) -> Self {
        Self {
            n: 0,
            sum0: 0.0,
            sumsq0: 0.0,
            sum: vec![0.0; max_lag + 1],
            sumsq: vec![0.0; max_lag + 1],
            cross: vec![0.0; max_lag + 1],
        }
    }

    pub fn max_lag(&self) -> usize {
        self.sum.len() - 1
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Adds one replication's window `x[0..=K]`.
    pub fn push_window(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.sum.len() {
            return Err(CsmaError::DimensionMismatch {
                expected: self.sum.len(),
                got: x.len(),
            });
        }
        self.n += 1;
        self.sum0 += x[0];
        self.sumsq0 += x[0] * x[0];
        for (k, &xk) in x.iter().enumerate() {
            self.sum[k] += xk;
            self.sumsq[k] += xk * xk;
            self.cross[k] += x[0] * xk;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &CrossCorrelation) -> Result<()> {
        if other.sum.len() != self.sum.len() {
            return Err(CsmaError::DimensionMismatch {
                expected: self.sum.len(),
                got: other.sum.len(),
            });
        }
        self.n += other.n;
        self.sum0 += other.sum0;
        self.sumsq0 += other.sumsq0;
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sumsq[k] += other.sumsq[k];
            self.cross[k] += other.cross[k];
        }
        Ok(())
    }

    /// Pearson correlation per lag with standard error `(1 − r²)/√(n − 1)`;
    /// `None` where either slot has zero sample variance.
    pub fn finalize(&self) -> Result<Vec<Option<(f64, f64)>>> {
        if self.n < 3 {
            return Err(CsmaError::InsufficientData(format!("{} replications", self.n)));
        }
        let n = self.n as f64;
        let m0 = self.sum0 / n;
        let v0 = self.sumsq0 / n - m0 * m0;
        Ok((0..self.sum.len())
            .map(|k| {
                let mk = self.sum[k] / n;
                let vk = self.sumsq[k] / n - mk * mk;
                if v0 <= 1e-300 || vk <= 1e-300 {
                    return None;
                }
                let r = (self.cross[k] / n - m0 * mk) / (v0 * vk).sqrt();
                Some((r, (1.0 - r * r) / (n - 1.0).sqrt()))
            })
            .collect())
    }
}
