//! Simulation-versus-oracle checks for small graphs with static fugacity.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{CsmaError, Result};
use crate::harness::config::{ExperimentConfig, SchedulerConfig, Variant};
use crate::harness::sim::{run_resolved, stream_rng};
use crate::oracle::{
    build_chain_with, delayed_correlation, proposition1_bounds, slem_and_mixing_bound, spectral_correlation,
    stationary_distribution, w_max, ChainModel, ChainOptions, CorrelationSpec,
};
use crate::scheduler::{FugacityPolicy, SlotScheduler, StartMode, UpdateKernel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        write!(
            f,
            "{}/{} checks passed",
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    /// Band width, in standard errors, for simulated-versus-exact comparisons.
    pub z: f64,
    /// Significance level of the transition χ² test.
    pub chi2_alpha: f64,
    /// Also run a short marginal check for every scheduler variant.
    pub variant_sweep: bool,
    pub sweep_slots: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            z: 4.0,
            chi2_alpha: 1e-3,
            variant_sweep: true,
            sweep_slots: 100_000,
        }
    }
}

pub fn validate(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    validate_with(cfg, &ValidateOptions::default())
}

pub fn validate_with(cfg: &ExperimentConfig, opts: &ValidateOptions) -> Result<ValidationReport> {
    let chain = oracle_chain(cfg)?;
    validate_against_chain_with(cfg, &chain, opts)
}

/// Exact base chain (`T = 1`) matching the config's kernel and lazy flag.
pub fn oracle_chain(cfg: &ExperimentConfig) -> Result<ChainModel> {
    let res = cfg.resolve()?;
    let FugacityPolicy::Static(lambda) = &res.fugacity else {
        return Err(CsmaError::Unsupported(
            "validation needs static fugacity; queue-driven weights are simulation-only".into(),
        ));
    };
    let chain = build_chain_with(
        &res.graph.graph,
        &res.access,
        lambda,
        &ChainOptions {
            kernel: res.spec.kernel,
            lazy: res.spec.lazy,
            ..ChainOptions::default()
        },
    )?;
    chain.pi()?;
    Ok(chain)
}

pub fn validate_against_chain(cfg: &ExperimentConfig, chain: &ChainModel) -> Result<ValidationReport> {
    validate_against_chain_with(cfg, chain, &ValidateOptions::default())
}

pub fn validate_against_chain_with(
    cfg: &ExperimentConfig,
    chain: &ChainModel,
    opts: &ValidateOptions,
) -> Result<ValidationReport> {
    let mut cfg = cfg.clone();
    let res = cfg.resolve()?;
    let g = &res.graph.graph;
    let n = g.n_links();
    let order = res.spec.order;
    let FugacityPolicy::Static(lambda) = &res.fugacity else {
        return Err(CsmaError::Unsupported("validation needs static fugacity".into()));
    };
    let mut report = ValidationReport::default();
    let checks = &mut report.checks;

    let row_err = chain.max_row_sum_error();
    checks.push(Check::new("stochastic-rows", row_err < 1e-12, format!("max |row sum − 1| = {row_err:.2e}")));

    let st = stationary_distribution(chain)?;
    checks.push(Check::new(
        "product-form",
        st.product_form_residual < 1e-10,
        format!("residual {:.2e}", st.product_form_residual),
    ));
    let db = chain.detailed_balance_residual()?;
    checks.push(Check::new("detailed-balance", db < 1e-10, format!("residual {db:.2e}")));

    let mix = slem_and_mixing_bound(chain, w_max(lambda))?;
    checks.push(Check::new(
        "mixing-bound",
        mix.bound_ok,
        format!("ρ = {:.6}, ln 1/(1−ρ) = {:.3} ≤ {:.3}", mix.slem, mix.log_relaxation_time, mix.log_bound),
    ));

    // Exact correlation of each link in the base chain.
    let base_lag = (cfg.max_lag.max(3 * order) / order).max(400);
    let mut base = Vec::with_capacity(n);
    for v in 0..n {
        base.push(spectral_correlation(chain, v, base_lag)?);
    }
    let gap = base.iter().map(|(_, gap)| *gap).fold(0.0, f64::max);
    checks.push(Check::new("spectral-consistency", gap < 1e-10, format!("max gap {gap:.2e}")));

    if res.spec.kernel == UpdateKernel::Glauber {
        let mut worst_psi1 = 0.0f64;
        let mut bound_ok = true;
        let mut worst_margin = f64::INFINITY;
        for (v, (spec, _)) in base.iter().enumerate() {
            let b = proposition1_bounds(g, v, &res.access, lambda, 25)?;
            let psi1 = if res.spec.lazy { 0.5 + 0.5 * b.psi1 } else { b.psi1 };
            worst_psi1 = worst_psi1.max((spec.psi[1] - psi1).abs());
            if !res.spec.lazy {
                for &(lag, bound) in &b.even_lag_bounds {
                    if let Some(&exact) = spec.psi.get(lag) {
                        worst_margin = worst_margin.min(exact - bound);
                        bound_ok &= bound <= exact + 1e-12;
                    }
                }
            }
        }
        checks.push(Check::new(
            "psi1-closed-form",
            worst_psi1 < 1e-10,
            format!("max |ψ(1) − formula| = {worst_psi1:.2e}"),
        ));
        if !res.spec.lazy {
            checks.push(Check::new(
                "even-lag-bounds",
                bound_ok,
                format!("min exact − bound = {worst_margin:.3e}"),
            ));
        }
    }

    // Simulation: marginals and correlation against the order-T oracle.
    // Only lags up to 3T are checked; the estimator runs until the
    // correlation has died out so the reported ψ̂ covers the whole tail.
    let max_lag = 3 * order;
    let specs: Vec<&CorrelationSpec> = base.iter().map(|(spec, _)| spec).collect();
    cfg.max_lag = estimator_lag(&specs, order, max_lag);
    cfg.measured_links = (0..n).collect();
    let run = run_resolved(&cfg, &cfg.resolve()?)?;
    let mut worst_z = 0.0f64;
    for a in &run.activity {
        let exact = base[a.link].0.mean;
        worst_z = worst_z.max((a.fraction - exact).abs() / a.se);
    }
    checks.push(Check::new(
        "marginals",
        worst_z < opts.z,
        format!("max |π̂ − π| / s.e. = {worst_z:.2}"),
    ));

    let mut worst_pad = 0.0f64;
    let mut worst_shift = 0.0f64;
    for m in &run.measured {
        let Some(ac) = &m.autocorr else {
            continue;
        };
        let exact = delayed_correlation(&base[m.link].0, order)?;
        for k in 1..=max_lag {
            let z = (ac.psi[k] - exact.psi[k]).abs() / ac.se[k];
            if k % order == 0 {
                worst_shift = worst_shift.max(z);
            } else {
                worst_pad = worst_pad.max(z);
            }
        }
    }
    checks.push(Check::new(
        "lag-shifting",
        worst_shift < opts.z,
        format!("max |ψ̂(nT) − ψ(n)| / s.e. = {worst_shift:.2}"),
    ));
    if order > 1 {
        checks.push(Check::new(
            "zero-padding",
            worst_pad < opts.z,
            format!("max |ψ̂(k)| / s.e. off multiples of T = {worst_pad:.2}"),
        ));
    }

    let (stat, dof) = transition_chi2(&cfg, chain)?;
    let p = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(0.0)
    };
    checks.push(Check::new(
        "transition-chi2",
        p > opts.chi2_alpha,
        format!("χ² = {stat:.1} on {dof} dof, p = {p:.4}"),
    ));

    if opts.variant_sweep {
        for (name, sched) in sweep_variants(&cfg.scheduler) {
            let mut c = cfg.clone();
            c.scheduler = sched;
            c.horizon = opts.sweep_slots;
            c.warmup_slots = None;
            c.warmup_fraction = 0.2;
            c.replications = 1;
            c.max_lag = 1;
            let run = run_resolved(&c, &c.resolve()?)?;
            let worst = run
                .activity
                .iter()
                .map(|a| (a.fraction - base[a.link].0.mean).abs() / a.se)
                .fold(0.0, f64::max);
            checks.push(Check::new(
                format!("variant-{name}"),
                worst < opts.z,
                format!("max |π̂ − π| / s.e. = {worst:.2}"),
            ));
        }
    }
    Ok(report)
}

fn sweep_variants(base: &SchedulerConfig) -> Vec<(&'static str, SchedulerConfig)> {
    let with = |variant, order, spacing, lazy| SchedulerConfig {
        variant,
        order: Some(order),
        spacing,
        gentle_warmup: None,
        lazy,
        ..base.clone()
    };
    vec![
        ("glauber", with(Variant::Glauber, 1, None, false)),
        ("delayed", with(Variant::Delayed, 3, None, false)),
        ("delayed-lazy", with(Variant::Delayed, 3, None, true)),
        ("delayed-gentle", with(Variant::DelayedGentle, 3, Some(4), false)),
        ("mh", with(Variant::Mh, 2, None, false)),
    ]
}

/// Pearson χ² of observed `σ(t − T) → σ(t)` transitions against the chain's rows,
/// pooling cells with expected count below 5.
fn transition_chi2(cfg: &ExperimentConfig, chain: &ChainModel) -> Result<(f64, usize)> {
    let res = cfg.resolve()?;
    let FugacityPolicy::Static(lambda) = &res.fugacity else {
        unreachable!("checked by caller")
    };
    let g = &res.graph.graph;
    let order = res.spec.order;
    let k = chain.n_states();
    let mut rng = stream_rng(cfg.seed, 2 * cfg.replications);
    let mut sched = SlotScheduler::new(g, res.access.clone(), res.spec)?;
    let first_delayed = match res.spec.start {
        StartMode::Cold => 1,
        StartMode::Gentle { .. } => sched.delayed_start_slot().unwrap_or(1),
    };
    let start = cfg.warmup().max(first_delayed + order as u64);
    let mut counts = vec![0u64; k * k];
    let mut ring = vec![0usize; order];
    for t in 1..=cfg.horizon {
        let s = sched.step(lambda, &mut rng);
        let idx = chain
            .state_index(s)
            .ok_or_else(|| CsmaError::ContractViolation(format!("simulated schedule {s} is not in Ω")))?;
        let slot = (t as usize) % order;
        if t > start {
            counts[ring[slot] * k + idx] += 1;
        }
        ring[slot] = idx;
    }
    let p = chain.transition();
    let mut stat = 0.0;
    let mut dof = 0;
    for x in 0..k {
        let row = &counts[x * k..(x + 1) * k];
        let total: u64 = row.iter().sum();
        if total == 0 {
            continue;
        }
        let mut cells: Vec<(f64, f64)> = (0..k)
            .filter(|&y| p[(x, y)] > 0.0)
            .map(|y| (total as f64 * p[(x, y)], row[y] as f64))
            .collect();
        let impossible: u64 = (0..k).filter(|&y| p[(x, y)] == 0.0).map(|y| row[y]).sum();
        if impossible > 0 {
            return Ok((f64::INFINITY, dof.max(1)));
        }
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pooled: Vec<(f64, f64)> = Vec::new();
        let mut bucket = (0.0, 0.0);
        for c in cells {
            if bucket.0 < 5.0 {
                bucket.0 += c.0;
                bucket.1 += c.1;
            } else {
                pooled.push(c);
            }
        }
        if bucket.0 > 0.0 {
            if bucket.0 < 5.0 && !pooled.is_empty() {
                pooled[0].0 += bucket.0;
                pooled[0].1 += bucket.1;
            } else {
                pooled.push(bucket);
            }
        }
        if pooled.len() < 2 {
            continue;
        }
        dof += pooled.len() - 1;
        stat += pooled.iter().map(|(e, o)| (o - e) * (o - e) / e).sum::<f64>();
    }
    Ok((stat, dof))
}

/// Lags the ψ̂ estimator covers: the order-`T` image of the lag where the
/// slowest base correlation drops below 0.01, and at least `checked`.
pub(crate) fn estimator_lag(base: &[&CorrelationSpec], order: usize, checked: usize) -> usize {
    let decay = base
        .iter()
        .map(|spec| spec.psi.iter().position(|p| p.abs() < 1e-2).unwrap_or(spec.psi.len()))
        .max()
        .unwrap_or(0);
    (order * (decay + 1)).max(checked)
}
