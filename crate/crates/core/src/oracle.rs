//! Exact analysis of the schedule chain on small graphs.
//!
//! States are the feasible schedules in increasing bitmask order. The
//! transition matrix is built by summing over every attempt vector, so all
//! quantities here are exact up to floating point.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{CsmaError, Result};
use crate::graph::{feasible_masks, ConflictGraph, Schedule};
use crate::scheduler::{AccessParams, UpdateKernel};

pub const ORACLE_MAX_LINKS: usize = 12;
pub const ORACLE_MAX_STATES: usize = 4096;

const NO_STATE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub kernel: UpdateKernel,
    pub lazy: bool,
    pub max_links: usize,
    pub max_states: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            kernel: UpdateKernel::Glauber,
            lazy: false,
            max_links: ORACLE_MAX_LINKS,
            max_states: ORACLE_MAX_STATES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues in decreasing order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors of the symmetrized matrix, column `j` for `values[j]`.
    pub vectors: DMatrix<f64>,
}

#[derive(Debug)]
pub struct ChainModel {
    n_links: usize,
    masks: Vec<u64>,
    lambda: Vec<f64>,
    lazy: bool,
    kernel: UpdateKernel,
    p: DMatrix<f64>,
    pi: OnceLock<Vec<f64>>,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for ChainModel {
    fn clone(&self) -> Self {
        Self {
            n_links: self.n_links,
            masks: self.masks.clone(),
            lambda: self.lambda.clone(),
            lazy: self.lazy,
            kernel: self.kernel,
            p: self.p.clone(),
            pi: OnceLock::new(),
            spectrum: OnceLock::new(),
        }
    }
}

pub fn build_chain(g: &ConflictGraph, p: &AccessParams, lambda: &[f64], lazy: bool) -> Result<ChainModel> {
    build_chain_with(
        g,
        p,
        lambda,
        &ChainOptions {
            lazy,
            ..ChainOptions::default()
        },
    )
}

pub fn build_chain_with(g: &ConflictGraph, p: &AccessParams, lambda: &[f64], opts: &ChainOptions) -> Result<ChainModel> {
    let n = g.n_links();
    if n > opts.max_links {
        return Err(CsmaError::TooLarge {
            what: "oracle links",
            size: n,
            cap: opts.max_links,
        });
    }
    for len in [p.len(), lambda.len()] {
        if len != n {
            return Err(CsmaError::DimensionMismatch { expected: n, got: len });
        }
    }
    if let Some((v, &l)) = lambda.iter().enumerate().find(|(_, l)| !(l.is_finite() && **l > 0.0)) {
        return Err(CsmaError::param(format!("lambda[{v}]"), format!("{l} must be positive and finite")));
    }
    let masks = feasible_masks(g, opts.max_links)?;
    if masks.len() > opts.max_states {
        return Err(CsmaError::TooLarge {
            what: "oracle states",
            size: masks.len(),
            cap: opts.max_states,
        });
    }
    let mut index = vec![NO_STATE; 1usize << n];
    for (i, &m) in masks.iter().enumerate() {
        index[m as usize] = i as u32;
    }
    let nbr = g.neighbor_masks();
    let decision = decision_distribution(&nbr, p.probs());
    let mut pm = match opts.kernel {
        UpdateKernel::Glauber => glauber_matrix(&masks, &index, &nbr, &decision, lambda),
        UpdateKernel::MetropolisHastings => mh_matrix(&masks, &index, &nbr, &decision, lambda),
    };
    if opts.lazy {
        pm *= 0.5;
        for i in 0..masks.len() {
            pm[(i, i)] += 0.5;
        }
    }
    Ok(ChainModel {
        n_links: n,
        masks,
        lambda: lambda.to_vec(),
        lazy: opts.lazy,
        kernel: opts.kernel,
        p: pm,
        pi: OnceLock::new(),
        spectrum: OnceLock::new(),
    })
}

/// Probability of every decision mask, indexed by mask.
fn decision_distribution(nbr: &[u64], a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut w = vec![0.0; 1usize << n];
    for att in 0u64..(1u64 << n) {
        let mut weight = 1.0;
        let mut d = 0u64;
        for v in 0..n {
            if att >> v & 1 == 1 {
                weight *= a[v];
                if att & nbr[v] == 0 {
                    d |= 1 << v;
                }
            } else {
                weight *= 1.0 - a[v];
            }
        }
        w[d as usize] += weight;
    }
    w
}

fn glauber_matrix(masks: &[u64], index: &[u32], nbr: &[u64], decision: &[f64], lambda: &[f64]) -> DMatrix<f64> {
    let n = lambda.len();
    let size = masks.len();
    let on: Vec<f64> = lambda.iter().map(|l| l / (1.0 + l)).collect();
    let mut pm = DMatrix::zeros(size, size);
    let mut buf = vec![0.0; decision.len()];
    for (i, &x) in masks.iter().enumerate() {
        // buf[Δ] ends up as P(x, x ⊕ Δ). Each bit either marginalizes the
        // decision (link cannot move) or splits it into stay/flip outcomes.
        buf.copy_from_slice(decision);
        for v in 0..n {
            let bit = 1usize << v;
            let free = x & nbr[v] == 0;
            let (same, flip) = if !free {
                (1.0, 0.0)
            } else if x >> v & 1 == 1 {
                (on[v], 1.0 - on[v])
            } else {
                (1.0 - on[v], on[v])
            };
            for m in 0..buf.len() {
                if m & bit == 0 {
                    let b = buf[m | bit];
                    buf[m] += same * b;
                    buf[m | bit] = flip * b;
                }
            }
        }
        for (delta, &prob) in buf.iter().enumerate() {
            if prob != 0.0 {
                let j = index[(x ^ delta as u64) as usize];
                debug_assert!(j != NO_STATE, "positive mass on an infeasible schedule");
                pm[(i, j as usize)] += prob;
            }
        }
    }
    pm
}

fn mh_matrix(masks: &[u64], index: &[u32], nbr: &[u64], decision: &[f64], lambda: &[f64]) -> DMatrix<f64> {
    let n = lambda.len();
    let size = masks.len();
    // Probability that link v is the proposed one.
    let mut propose = vec![0.0; n];
    for (d, &w) in decision.iter().enumerate() {
        let size_d = d.count_ones();
        if w == 0.0 || size_d == 0 {
            continue;
        }
        for (v, pr) in propose.iter_mut().enumerate() {
            if d >> v & 1 == 1 {
                *pr += w / size_d as f64;
            }
        }
    }
    let mut pm = DMatrix::zeros(size, size);
    for (i, &x) in masks.iter().enumerate() {
        let mut leave = 0.0;
        for v in 0..n {
            let acc = if x >> v & 1 == 1 {
                (1.0 / lambda[v]).min(1.0)
            } else if x & nbr[v] == 0 {
                lambda[v].min(1.0)
            } else {
                0.0
            };
            let prob = propose[v] * acc;
            if prob > 0.0 {
                let j = index[(x ^ (1 << v)) as usize] as usize;
                pm[(i, j)] += prob;
                leave += prob;
            }
        }
        pm[(i, i)] += 1.0 - leave;
    }
    pm
}

impl ChainModel {
    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn n_states(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn states(&self) -> Vec<Schedule> {
        self.masks.iter().map(|&m| Schedule::from_mask(self.n_links, m)).collect()
    }

    pub fn state_index(&self, s: &Schedule) -> Option<usize> {
        self.masks.binary_search(&s.to_mask()).ok()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn is_lazy(&self) -> bool {
        self.lazy
    }

    pub fn kernel(&self) -> UpdateKernel {
        self.kernel
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Mutable access for building corrupted fixtures; clears cached analysis.
    pub fn transition_mut(&mut self) -> &mut DMatrix<f64> {
        self.pi = OnceLock::new();
        self.spectrum = OnceLock::new();
        &mut self.p
    }

    /// Indices of the states in which link `v` is active (`B_v`).
    pub fn link_set(&self, v: usize) -> Vec<usize> {
        (0..self.masks.len()).filter(|&i| self.masks[i] >> v & 1 == 1).collect()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.p
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Stationary distribution, solved once and cached.
    pub fn pi(&self) -> Result<&[f64]> {
        if let Some(pi) = self.pi.get() {
            return Ok(pi);
        }
        let pi = solve_stationary(&self.p)?;
        Ok(self.pi.get_or_init(|| pi))
    }

    /// Product-form distribution `∏ λ_i^{σ_i} / Z` over the states.
    pub fn product_form(&self) -> Vec<f64> {
        product_form_weights(&self.masks, &self.lambda)
    }

    pub fn detailed_balance_residual(&self) -> Result<f64> {
        let pi = self.pi()?;
        let k = self.n_states();
        let mut worst = 0.0f64;
        for x in 0..k {
            for y in (x + 1)..k {
                worst = worst.max((pi[x] * self.p[(x, y)] - pi[y] * self.p[(y, x)]).abs());
            }
        }
        Ok(worst)
    }

    pub fn stationary_prob(&self, v: usize) -> Result<f64> {
        let pi = self.pi()?;
        Ok(self.link_set(v).iter().map(|&i| pi[i]).sum())
    }

    pub fn spectrum(&self) -> Result<&Spectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        // Product-form weights are exact; the solved π carries enough error on
        // low-probability states to skew the symmetrization.
        let pi = self.product_form();
        let k = self.n_states();
        let sq: Vec<f64> = pi.iter().map(|x| x.sqrt()).collect();
        let mut s = DMatrix::from_fn(k, k, |x, y| sq[x] * self.p[(x, y)] / sq[y]);
        let st = s.transpose();
        s = (s + st) * 0.5;
        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let vectors = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(self.spectrum.get_or_init(|| Spectrum { values, vectors }))
    }

    /// `P(X_k ∈ B_v | X_0 ∈ B_v)` for `k = 0..=max_lag` by repeated vector-matrix products.
    pub fn return_probabilities(&self, v: usize, max_lag: usize) -> Result<Vec<f64>> {
        let pi = self.pi()?;
        let b = self.link_set(v);
        let pb: f64 = b.iter().map(|&i| pi[i]).sum();
        check_degenerate(v, pb)?;
        let k = self.n_states();
        let mut mu = DVector::zeros(k);
        for &i in &b {
            mu[i] = pi[i] / pb;
        }
        let pt = self.p.transpose();
        let mut out = Vec::with_capacity(max_lag + 1);
        for lag in 0..=max_lag {
            if lag > 0 {
                mu = &pt * &mu;
            }
            out.push(b.iter().map(|&i| mu[i]).sum());
        }
        Ok(out)
    }

    /// Spectral weights `α_j` of link `v` paired with eigenvalues `ρ_j`.
    pub fn spectral_weights(&self, v: usize) -> Result<Vec<(f64, f64)>> {
        self.pi()?;
        let pi = self.product_form();
        let b = self.link_set(v);
        let pb: f64 = b.iter().map(|&i| pi[i]).sum();
        check_degenerate(v, pb)?;
        let spec = self.spectrum()?;
        Ok((0..self.n_states())
            .map(|j| {
                let proj: f64 = b.iter().map(|&i| pi[i].sqrt() * spec.vectors[(i, j)]).sum();
                (proj * proj / pb, spec.values[j])
            })
            .collect())
    }
}

fn product_form_weights(masks: &[u64], lambda: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = masks
        .iter()
        .map(|&m| {
            (0..lambda.len())
                .filter(|&v| m >> v & 1 == 1)
                .map(|v| lambda[v])
                .product()
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

fn check_degenerate(v: usize, pb: f64) -> Result<()> {
    if pb <= 1e-15 || pb >= 1.0 - 1e-15 {
        return Err(CsmaError::DegenerateVariance { link: v, p: pb });
    }
    Ok(())
}

fn is_irreducible(p: &DMatrix<f64>) -> bool {
    let k = p.nrows();
    if k == 0 {
        return false;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for y in 0..k {
                let w = if forward { p[(x, y)] } else { p[(y, x)] };
                if w > 0.0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

fn solve_stationary(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !is_irreducible(p) {
        return Err(CsmaError::Reducible);
    }
    let k = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(k, k);
    for c in 0..k {
        a[(k - 1, c)] = 1.0;
    }
    let mut rhs = DVector::zeros(k);
    rhs[k - 1] = 1.0;
    let x = a.lu().solve(&rhs).ok_or(CsmaError::Reducible)?;
    Ok(x.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub pi: Vec<f64>,
    /// Max deviation from the product form.
    pub product_form_residual: f64,
}

pub fn stationary_distribution(m: &ChainModel) -> Result<StationaryReport> {
    let pi = m.pi()?.to_vec();
    let product_form_residual = pi
        .iter()
        .zip(m.product_form())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(StationaryReport {
        pi,
        product_form_residual,
    })
}

/// Correlation structure of one link's activity, indexed by lag from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub psi: Vec<f64>,
    pub r: Vec<f64>,
    pub var0: f64,
    /// Stationary activity probability `π(B_v)`.
    pub mean: f64,
    pub order: usize,
}

impl CorrelationSpec {
    pub fn max_lag(&self) -> usize {
        self.psi.len().saturating_sub(1)
    }

    pub fn from_psi(psi: Vec<f64>, mean: f64, order: usize) -> Self {
        let var0 = mean * (1.0 - mean);
        let r = psi.iter().map(|p| p * var0).collect();
        Self {
            psi,
            r,
            var0,
            mean,
            order,
        }
    }
}

/// Exact `ψ(k)` from matrix powers, with the largest gap to the spectral sum.
pub fn spectral_correlation(m: &ChainModel, v: usize, max_lag: usize) -> Result<(CorrelationSpec, f64)> {
    if v >= m.n_links() {
        return Err(CsmaError::IndexOutOfRange {
            index: v,
            len: m.n_links(),
        });
    }
    let pb = m.stationary_prob(v)?;
    check_degenerate(v, pb)?;
    let ret = m.return_probabilities(v, max_lag)?;
    let psi: Vec<f64> = ret.iter().map(|r| (r - pb) / (1.0 - pb)).collect();
    let weights = m.spectral_weights(v)?;
    let mut gap = 0.0f64;
    for (k, &r) in ret.iter().enumerate() {
        let spectral: f64 = weights.iter().map(|(a, rho)| a * rho.powi(k as i32)).sum();
        gap = gap.max((spectral - r).abs());
    }
    Ok((CorrelationSpec::from_psi(psi, pb, 1), gap))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagOneBounds {
    pub link: usize,
    /// Probability that no neighbor of the link is active.
    pub q: f64,
    /// Selection probability `m_v`.
    pub m: f64,
    pub pi_b: f64,
    pub psi1: f64,
    /// `(2k, lower bound on ψ(2k))` for `k = 1..`.
    pub even_lag_bounds: Vec<(usize, f64)>,
}

pub fn proposition1_bounds(
    g: &ConflictGraph,
    v: usize,
    p: &AccessParams,
    lambda: &[f64],
    max_k: usize,
) -> Result<LagOneBounds> {
    let n = g.n_links();
    if v >= n {
        return Err(CsmaError::IndexOutOfRange { index: v, len: n });
    }
    if lambda.len() != n {
        return Err(CsmaError::DimensionMismatch {
            expected: n,
            got: lambda.len(),
        });
    }
    let masks = feasible_masks(g, crate::graph::DEFAULT_ENUMERATION_CAP)?;
    let pi = product_form_weights(&masks, lambda);
    let nbr = g.neighbor_masks()[v];
    let q: f64 = masks
        .iter()
        .zip(&pi)
        .filter(|(m, _)| *m & nbr == 0)
        .map(|(_, w)| w)
        .sum();
    let pi_b: f64 = masks
        .iter()
        .zip(&pi)
        .filter(|(m, _)| *m >> v & 1 == 1)
        .map(|(_, w)| w)
        .sum();
    let m = p.selection_probabilities(g)?[v];
    let denom = 1.0 + (1.0 - q) * lambda[v];
    let psi1 = 1.0 - m / denom;
    let base = 1.0 - m * (2.0 - m) / denom;
    let even_lag_bounds = (1..=max_k).map(|k| (2 * k, base.powi(k as i32))).collect();
    Ok(LagOneBounds {
        link: v,
        q,
        m,
        pi_b,
        psi1,
        even_lag_bounds,
    })
}

/// Correlation of the order-`T` chain: zero off multiples of `T`, base lag `n` moved to `nT`.
pub fn delayed_correlation(base: &CorrelationSpec, order: usize) -> Result<CorrelationSpec> {
    if order == 0 {
        return Err(CsmaError::param("T", "order must be at least 1"));
    }
    let max = base.max_lag() * order;
    let psi = (0..=max)
        .map(|k| if k % order == 0 { base.psi[k / order] } else { 0.0 })
        .collect();
    Ok(CorrelationSpec::from_psi(psi, base.mean, order))
}

/// Variance of the cumulative net input over `t` slots of the order-`T` chain:
/// `t·var0 + 2Σ_{k<t}(t−k)·r(k,T) + t·η(1−η)`.
pub fn variance_vt(base: &CorrelationSpec, eta: f64, t: u64, order: usize) -> Result<f64> {
    Ok(*variance_table(base, eta, order, t)?.last().expect("t >= 1"))
}

/// `v(1..=t_max, T)` in one pass.
pub fn variance_table(base: &CorrelationSpec, eta: f64, order: usize, t_max: u64) -> Result<Vec<f64>> {
    if t_max == 0 {
        return Err(CsmaError::param("t", "must be at least 1"));
    }
    if order == 0 {
        return Err(CsmaError::param("T", "order must be at least 1"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(CsmaError::param("eta", format!("{eta} is outside [0, 1]")));
    }
    let need = ((t_max - 1) / order as u64) as usize;
    if base.max_lag() < need {
        return Err(CsmaError::InsufficientData(format!(
            "base correlation covers lag {} but lag {need} is needed",
            base.max_lag()
        )));
    }
    let r = |k: u64| -> f64 {
        if k % order as u64 == 0 {
            base.r[(k / order as u64) as usize]
        } else {
            0.0
        }
    };
    let arrival = eta * (1.0 - eta);
    let mut out = Vec::with_capacity(t_max as usize);
    // service(t+1) − service(t) = var0 + 2 Σ_{k=1}^{t} r(k)
    let mut service = base.var0;
    let mut partial = 0.0;
    out.push(service + arrival);
    for t in 1..t_max {
        partial += r(t);
        service += base.var0 + 2.0 * partial;
        out.push(service + (t + 1) as f64 * arrival);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTailParams {
    pub xi: f64,
    /// `variance[t−1] = v(t, T)`; its length is the search horizon.
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub prob: f64,
    pub exponent: f64,
    pub t_star: u64,
    /// The minimizer sits at the end of the horizon.
    pub horizon_too_small: bool,
}

/// `exp(−min_t (ξt + x)² / (2 v(t)))` over integer `t` in the horizon.
pub fn gaussian_queue_tail(gp: &GaussianTailParams, x: f64) -> Result<TailEstimate> {
    if !(gp.xi > 0.0) {
        return Err(CsmaError::param("xi", "drift must be positive"));
    }
    let h = gp.variance.len() as u64;
    if h == 0 {
        return Err(CsmaError::param("horizon", "must be at least 1"));
    }
    let f = |t: u64| {
        let num = gp.xi * t as f64 + x;
        num * num / (2.0 * gp.variance[(t - 1) as usize])
    };
    // Coarse log-spaced grid.
    let mut grid = vec![1u64];
    let mut t = 1.0f64;
    while (t as u64) < h {
        t = (t * 1.05).max(t + 1.0);
        grid.push((t as u64).min(h));
    }
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for (i, &t) in grid.iter().enumerate() {
        let e = f(t);
        if e < best {
            best = e;
            best_i = i;
        }
    }
    // Exhaustive refinement between the neighboring grid points.
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(grid.len() - 1)];
    let mut t_star = grid[best_i];
    for t in lo..=hi {
        let e = f(t);
        if e < best {
            best = e;
            t_star = t;
        }
    }
    Ok(TailEstimate {
        prob: (-best).exp(),
        exponent: best,
        t_star,
        horizon_too_small: t_star == h && h > 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub slem: f64,
    pub relaxation_time: f64,
    pub w_max: f64,
    pub log_relaxation_time: f64,
    pub log_bound: f64,
    pub bound_ok: bool,
}

/// `max(0, max_v ln λ_v)`.
pub fn w_max(lambda: &[f64]) -> f64 {
    lambda.iter().map(|l| l.ln()).fold(0.0, f64::max)
}

/// SLEM and the check `1/(1−ρ) ≤ 16^N e^{4N·W_max}`, compared in log space.
pub fn slem_and_mixing_bound(m: &ChainModel, w_max: f64) -> Result<MixingReport> {
    let values = &m.spectrum()?.values;
    let second = values.get(1).copied().unwrap_or(0.0);
    let last = values.last().copied().unwrap_or(0.0);
    let slem = if values.len() < 2 { 0.0 } else { second.max(last.abs()) };
    let n = m.n_links() as f64;
    let log_relaxation_time = -(1.0 - slem).ln();
    let log_bound = n * 16f64.ln() + 4.0 * n * w_max;
    Ok(MixingReport {
        slem,
        relaxation_time: 1.0 / (1.0 - slem),
        w_max,
        log_relaxation_time,
        log_bound,
        bound_ok: log_relaxation_time <= log_bound,
    })
}

/// Base-chain lag separating slots `t₀+i` and `t₀+j` after a gentler start with spacing `M`.
pub fn gentler_start_lag(i: u64, j: u64, order: u64, spacing: u64) -> u64 {
    let (n, m) = (i / order, i % order);
    let (n2, m2) = (j / order, j % order);
    if m == m2 {
        n.abs_diff(n2)
    } else {
        n + n2 + m.abs_diff(m2) * spacing + 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub link: usize,
    pub pi_b: f64,
    pub psi: Vec<f64>,
    pub spectral_gap: f64,
    pub closed_form: LagOneBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_links: usize,
    pub lazy: bool,
    pub states: Vec<String>,
    pub pi: Vec<f64>,
    pub product_form_residual: f64,
    pub detailed_balance_residual: f64,
    pub max_row_sum_error: f64,
    pub eigenvalues: Vec<f64>,
    pub mixing: MixingReport,
    pub links: Vec<LinkReport>,
}

pub fn oracle_report(
    g: &ConflictGraph,
    p: &AccessParams,
    lambda: &[f64],
    lazy: bool,
    max_lag: usize,
) -> Result<OracleReport> {
    let chain = build_chain(g, p, lambda, lazy)?;
    let st = stationary_distribution(&chain)?;
    let mut links = Vec::with_capacity(g.n_links());
    for v in 0..g.n_links() {
        let (spec, gap) = spectral_correlation(&chain, v, max_lag)?;
        links.push(LinkReport {
            link: v,
            pi_b: spec.mean,
            psi: spec.psi,
            spectral_gap: gap,
            closed_form: proposition1_bounds(g, v, p, lambda, max_lag / 2)?,
        });
    }
    Ok(OracleReport {
        n_links: g.n_links(),
        lazy,
        states: chain.states().iter().map(|s| s.to_string()).collect(),
        pi: st.pi,
        product_form_residual: st.product_form_residual,
        detailed_balance_residual: chain.detailed_balance_residual()?,
        max_row_sum_error: chain.max_row_sum_error(),
        eigenvalues: chain.spectrum()?.values.clone(),
        mixing: slem_and_mixing_bound(&chain, w_max(lambda))?,
        links,
    })
}
