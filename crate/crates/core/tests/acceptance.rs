//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Numeric arguments select a
//! subset, e.g. `cargo test --test acceptance -- 3 7`.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcsma::graph::ConflictGraph;
use dcsma::harness::config::{ExperimentConfig, GraphSource, PerLink, SchedulerConfig};
use dcsma::harness::experiments::{
    fig_delay, fig_gentle, fig_offdur, fig_transient, run_experiment, DelayParams, GentleParams, OffDurationParams,
    TransientParams,
};
use dcsma::harness::run_simulation;
use dcsma::oracle::{
    build_chain, delayed_correlation, gaussian_queue_tail, gentler_start_lag, proposition1_bounds,
    slem_and_mixing_bound, spectral_correlation, stationary_distribution, variance_vt, w_max, GaussianTailParams,
};
use dcsma::scheduler::AccessParams;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Instance {
    graph: ConflictGraph,
    access: AccessParams,
    lambda: Vec<f64>,
}

/// Randomized graphs with 2..=8 links, `a_v ∈ (0.05, 0.5)`, `λ_v ∈ (0.2, 5)`.
fn random_instances(count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..count)
        .map(|i| {
            let n = 2 + i % 7;
            let graph = ConflictGraph::random(n, 0.45, 1000 + i as u64);
            let access = AccessParams::new((0..n).map(|_| rng.gen_range(0.05..0.5)).collect()).unwrap();
            let lambda = (0..n).map(|_| rng.gen_range(0.2..5.0)).collect();
            Instance { graph, access, lambda }
        })
        .collect()
}

fn c1_product_form() -> Outcome {
    let mut worst = 0.0f64;
    let set = random_instances(30);
    for inst in &set {
        let chain = build_chain(&inst.graph, &inst.access, &inst.lambda, false)?;
        worst = worst.max(stationary_distribution(&chain)?.product_form_residual);
    }
    Ok((worst < 1e-10, format!("{} graphs, max residual {worst:.2e}", set.len())))
}

fn c2_closed_form() -> Outcome {
    let mut worst_psi1 = 0.0f64;
    let mut worst_margin = f64::INFINITY;
    let set = random_instances(30);
    for inst in &set {
        let chain = build_chain(&inst.graph, &inst.access, &inst.lambda, false)?;
        for v in 0..inst.graph.n_links() {
            let (spec, _) = spectral_correlation(&chain, v, 50)?;
            let b = proposition1_bounds(&inst.graph, v, &inst.access, &inst.lambda, 25)?;
            worst_psi1 = worst_psi1.max((spec.psi[1] - b.psi1).abs());
            for &(lag, bound) in &b.even_lag_bounds {
                worst_margin = worst_margin.min(spec.psi[lag] - bound);
            }
        }
    }
    // Bounds that are tight hold with equality up to rounding.
    let ok = worst_psi1 < 1e-10 && worst_margin >= -1e-12;
    Ok((
        ok,
        format!("max |ψ(1) − formula| {worst_psi1:.2e}, min ψ(2k) − bound {worst_margin:.2e} (k ≤ 25)"),
    ))
}

fn c3_padding_shifting() -> Outcome {
    let mut worst_pad = 0.0f64;
    let mut worst_shift = 0.0f64;
    let graphs = [("pair", GraphSource::Pair), ("cycle5", GraphSource::Cycle { n_links: 5 })];
    for (_, src) in &graphs {
        let g = dcsma::harness::config::resolve_graph(src, None)?.graph;
        let n = g.n_links();
        let access = AccessParams::uniform(n, 0.25)?;
        let chain = build_chain(&g, &access, &vec![1.0; n], false)?;
        let (base, _) = spectral_correlation(&chain, 0, 400)?;
        let decay = base.psi.iter().position(|p| p.abs() < 1e-2).unwrap_or(400);
        for order in [2usize, 3, 5] {
            let mut cfg = ExperimentConfig::new(src.clone(), 1_000_000);
            cfg.scheduler = SchedulerConfig::delayed(order);
            cfg.warmup_fraction = 0.1;
            cfg.seed = 11;
            cfg.measured_links = vec![0];
            cfg.max_lag = order * (decay + 1);
            let res = run_simulation(&cfg)?;
            let ac = res.measured[0].autocorr.as_ref().ok_or("no estimate")?;
            let exact = delayed_correlation(&base, order)?;
            for k in 1..=5 * order {
                let z = (ac.psi[k] - exact.psi[k]).abs() / ac.se[k];
                if k % order == 0 {
                    worst_shift = worst_shift.max(z);
                } else {
                    worst_pad = worst_pad.max(z);
                }
            }
        }
    }
    Ok((
        worst_pad < 3.0 && worst_shift < 3.0,
        format!("pair + 5-cycle, T ∈ {{2,3,5}}, 10⁶ slots: max z off Tℤ {worst_pad:.2}, max z at nT {worst_shift:.2}"),
    ))
}

fn c4_marginals() -> Outcome {
    let src = GraphSource::Random {
        n_links: 6,
        edge_prob: 0.4,
        seed: 5,
    };
    let g = dcsma::harness::config::resolve_graph(&src, None)?.graph;
    let lambda = vec![0.5, 2.0, 1.0, 3.0, 0.8, 1.5];
    let access = AccessParams::uniform(6, 0.25)?;
    let expected: Vec<f64> = (0..6)
        .map(|v| {
            let q = proposition1_bounds(&g, v, &access, &lambda, 1).map(|b| b.q)?;
            Ok(lambda[v] / (1.0 + lambda[v]) * q)
        })
        .collect::<Result<_, dcsma::CsmaError>>()?;
    let mut worst = 0.0f64;
    for order in [1usize, 5, 25] {
        let mut cfg = ExperimentConfig::new(src.clone(), 1_000_000);
        cfg.scheduler = SchedulerConfig::delayed(order);
        cfg.scheduler.fugacity = dcsma::harness::config::FugacityConfig::Static(PerLink::Each(lambda.clone()));
        cfg.warmup_fraction = 0.1;
        cfg.seed = 4;
        cfg.max_lag = 1;
        let res = run_simulation(&cfg)?;
        for a in &res.activity {
            worst = worst.max((a.fraction - expected[a.link]).abs() / a.se);
        }
    }
    Ok((worst < 3.0, format!("6-link graph, T ∈ {{1,5,25}}: max |π̂ − λq/(1+λ)| / s.e. = {worst:.2}")))
}

fn c5_variance_monotone() -> Outcome {
    let mut checked = 0usize;
    let mut worst_rise = f64::NEG_INFINITY;
    for inst in random_instances(30).iter().step_by(3) {
        let chain = build_chain(&inst.graph, &inst.access, &inst.lambda, true)?;
        let v = inst.graph.max_degree_link().unwrap_or(0);
        let (base, _) = spectral_correlation(&chain, v, 1000)?;
        for t in [10u64, 100, 1000] {
            let vals: Vec<f64> = (1..=10)
                .map(|order| variance_vt(&base, 0.1, t, order))
                .collect::<Result<_, _>>()?;
            for w in vals.windows(2) {
                worst_rise = worst_rise.max(w[1] - w[0]);
                checked += 1;
            }
        }
    }
    Ok((
        worst_rise <= 1e-9,
        format!("{checked} consecutive pairs on lazy chains, largest increase {worst_rise:.2e}"),
    ))
}

fn c6_gaussian_tail() -> Outcome {
    let (xi, s2) = (0.05, 0.3);
    let gp = GaussianTailParams {
        xi,
        variance: (1..=4000).map(|t| s2 * t as f64).collect(),
    };
    let mut worst = 0.0f64;
    for x in 1..=50 {
        let x = x as f64;
        let est = gaussian_queue_tail(&gp, x)?;
        let closed = (-2.0 * xi * x / s2).exp();
        worst = worst.max((est.prob / closed - 1.0).abs());
    }
    Ok((worst < 0.01, format!("ξ = {xi}, s² = {s2}, x ∈ 1..50: max relative error {worst:.2e}")))
}

fn c7_delay_ordering() -> Outcome {
    let dir = tempfile::tempdir()?;
    let p = DelayParams {
        intensities: vec![0.7],
        orders: vec![1, 5, 25],
        ..DelayParams::default()
    };
    let pts = fig_delay(&p, dir.path())?;
    let [d1, d5, d25] = [&pts[0], &pts[1], &pts[2]];
    let separated = d25.ci_hi < d5.ci_lo && d5.ci_hi < d1.ci_lo;
    let ratio = d25.mean_delay / d1.mean_delay;
    Ok((
        separated && ratio <= 0.5,
        format!(
            "RGG-25 seed {}, ρ = 0.7, R = {}: T=1 {:.1} [{:.1}, {:.1}], T=5 {:.1} [{:.1}, {:.1}], T=25 {:.1} [{:.1}, {:.1}], ratio {ratio:.3}",
            match p.graph {
                GraphSource::Rgg { seed, .. } => seed,
                _ => 0,
            },
            p.replications,
            d1.mean_delay,
            d1.ci_lo,
            d1.ci_hi,
            d5.mean_delay,
            d5.ci_lo,
            d5.ci_hi,
            d25.mean_delay,
            d25.ci_lo,
            d25.ci_hi
        ),
    ))
}

fn c8_offdur() -> Outcome {
    let dir = tempfile::tempdir()?;
    let p = OffDurationParams {
        orders: vec![1, 5, 25],
        replications: 20,
        ..OffDurationParams::default()
    };
    let pts = fig_offdur(&p, dir.path())?;
    let mut worst_z = 0.0f64;
    for a in &pts {
        for b in &pts {
            let se = (a.mean_se.unwrap_or(f64::INFINITY).powi(2) + b.mean_se.unwrap_or(f64::INFINITY).powi(2)).sqrt();
            if se > 0.0 {
                worst_z = worst_z.max((a.mean - b.mean).abs() / se);
            }
        }
    }
    let cov_down = pts.windows(2).all(|w| w[1].cov < w[0].cov);
    let desc: Vec<String> = pts
        .iter()
        .map(|q| format!("T={} E{{U}} {:.3} CoV {:.3}", q.order, q.mean, q.cov))
        .collect();
    Ok((
        worst_z < 3.0 && cov_down,
        format!("link {}: {}; max pairwise z {worst_z:.2}", pts[0].link, desc.join(", ")),
    ))
}

fn c9_mixing_bound() -> Outcome {
    let mut graphs: Vec<(ConflictGraph, Vec<f64>, AccessParams)> = random_instances(30)
        .into_iter()
        .map(|i| (i.graph, i.lambda, i.access))
        .collect();
    for g in [
        ConflictGraph::pair(),
        ConflictGraph::path(8),
        ConflictGraph::cycle(9)?,
        ConflictGraph::star(7),
        ConflictGraph::complete(10),
        ConflictGraph::random(10, 0.5, 3),
    ] {
        let n = g.n_links();
        graphs.push((g, vec![1.0; n], AccessParams::uniform(n, 0.25)?));
    }
    let mut worst_slack = f64::INFINITY;
    let mut all_ok = true;
    for (g, lambda, access) in &graphs {
        for lazy in [false, true] {
            let chain = build_chain(g, access, lambda, lazy)?;
            let mix = slem_and_mixing_bound(&chain, w_max(lambda))?;
            all_ok &= mix.bound_ok;
            worst_slack = worst_slack.min(mix.log_bound - mix.log_relaxation_time);
        }
    }
    Ok((
        all_ok,
        format!("{} chains, min ln(bound) − ln(1/(1−ρ)) = {worst_slack:.3}", 2 * graphs.len()),
    ))
}

fn c10_transient() -> Outcome {
    let dir = tempfile::tempdir()?;
    let p = TransientParams {
        intensities: vec![0.9],
        orders: vec![1, 125],
        ..TransientParams::default()
    };
    let pts = fig_transient(&p, dir.path())?;
    let (a, b) = (&pts[0], &pts[1]);
    Ok((
        b.late_mean < a.late_mean,
        format!(
            "ρ = 0.9, horizon {}: last 10% T=1 {:.1}, T=125 {:.1}; first 5% T=1 {:.1}, T=125 {:.1}",
            p.horizon, a.late_mean, b.late_mean, a.early_mean, b.early_mean
        ),
    ))
}

fn c11_gentle_start() -> Outcome {
    let lag = gentler_start_lag(5, 6, 5, 10);
    let dir = tempfile::tempdir()?;
    let p = GentleParams {
        graph: GraphSource::Pair,
        queue_replications: 0,
        probe_lags: 5,
        ..GentleParams::default()
    };
    let s = fig_gentle(&p, dir.path())?;
    let mut ordered = true;
    let mut worst_z = f64::INFINITY;
    for k in 1..p.probe_order {
        for w in s.probe.windows(2) {
            let (_, r0, se0) = w[0].psi[k];
            let (_, r1, se1) = w[1].psi[k];
            let z = (r0 - r1) / (se0 * se0 + se1 * se1).sqrt();
            ordered &= z > 3.0;
            worst_z = worst_z.min(z);
        }
    }
    let lag1: Vec<String> = s.probe.iter().map(|q| format!("M={} {:.3}", q.spacing, q.psi[1].1)).collect();
    Ok((
        lag == 14 && ordered,
        format!(
            "lag(T=5, M=10, i=5, j=6) = {lag} (M+4 = 14); ψ̂ at t₀ vs t₀+1: {}; min separation {worst_z:.1} s.e.",
            lag1.join(", ")
        ),
    ))
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c12_determinism() -> Outcome {
    let runs: [(&str, Vec<String>); 3] = [
        ("fig-correlation", vec!["horizon=100000".into(), "orders=[1, 3]".into()]),
        (
            "fig-delay",
            vec!["intensities=[0.5]".into(), "orders=[1, 5]".into(), "replications=4".into(), "horizon=20000".into()],
        ),
        (
            "fig-gentle",
            vec!["graph={kind=\"pair\"}".into(), "queue_replications=3".into(), "probe_replications=500".into()],
        ),
    ];
    let mut files = 0usize;
    let mut mismatched = Vec::new();
    for (name, ov) in &runs {
        let a = tempfile::tempdir()?;
        let b = tempfile::tempdir()?;
        run_experiment(name, ov, a.path())?;
        run_experiment(name, ov, b.path())?;
        let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
        files += ta.iter().filter(|(n, _)| n.ends_with(".csv")).count();
        if ta != tb {
            mismatched.push(*name);
        }
    }
    Ok((
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} experiments rerun, {files} CSV files and manifests byte-identical", runs.len())
        } else {
            format!("outputs differ for {}", mismatched.join(", "))
        },
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit_secs: Option<f64>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "product-form stationarity", limit_secs: Some(60.0), run: c1_product_form },
        Criterion { id: 2, name: "closed-form ψ(1) and even-lag bounds", limit_secs: Some(60.0), run: c2_closed_form },
        Criterion { id: 3, name: "zero-padding and lag-shifting", limit_secs: Some(300.0), run: c3_padding_shifting },
        Criterion { id: 4, name: "marginal invariance", limit_secs: Some(120.0), run: c4_marginals },
        Criterion { id: 5, name: "variance monotonicity", limit_secs: None, run: c5_variance_monotone },
        Criterion { id: 6, name: "gaussian tail sanity", limit_secs: None, run: c6_gaussian_tail },
        Criterion { id: 7, name: "delay ordering", limit_secs: Some(1800.0), run: c7_delay_ordering },
        Criterion { id: 8, name: "off-duration behavior", limit_secs: Some(600.0), run: c8_offdur },
        Criterion { id: 9, name: "mixing bound", limit_secs: None, run: c9_mixing_bound },
        Criterion { id: 10, name: "transient trade-off", limit_secs: None, run: c10_transient },
        Criterion { id: 11, name: "gentler-start lag", limit_secs: None, run: c11_gentle_start },
        Criterion { id: 12, name: "determinism", limit_secs: None, run: c12_determinism },
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => match c.limit_secs {
                Some(limit) if secs > limit => (false, format!("{detail}; over the {limit:.0} s budget")),
                _ => (ok, detail),
            },
            Err(e) => (false, format!("error: {e}")),
        };
        ran += 1;
        failed += !ok as usize;
        println!("{} {:>2} {:<36} {detail} ({secs:.1} s)", if ok { "PASS" } else { "FAIL" }, c.id, c.name);
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
