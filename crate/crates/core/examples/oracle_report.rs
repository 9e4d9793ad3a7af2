//! Exact chain for a 5-cycle: stationary law, link correlation and the
//! closed-form lag-one value.
//!
//!     cargo run --example oracle_report

use dcsma::graph::ConflictGraph;
use dcsma::oracle::{build_chain, proposition1_bounds, slem_and_mixing_bound, spectral_correlation, stationary_distribution, w_max};
use dcsma::scheduler::AccessParams;

fn main() -> dcsma::Result<()> {
    let g = ConflictGraph::cycle(5)?;
    let access = AccessParams::uniform(5, 0.25)?;
    let lambda = vec![1.0, 2.0, 1.0, 0.5, 1.0];
    let chain = build_chain(&g, &access, &lambda, false)?;

    let st = stationary_distribution(&chain)?;
    println!("{} feasible schedules, product-form residual {:.1e}", chain.n_states(), st.product_form_residual);
    for (s, p) in chain.states().iter().zip(&st.pi).take(6) {
        println!("  {s}  π = {p:.5}");
    }

    let mix = slem_and_mixing_bound(&chain, w_max(&lambda))?;
    println!("SLEM {:.5}, relaxation time {:.1} slots", mix.slem, mix.relaxation_time);

    for v in [0, 1] {
        let (spec, _) = spectral_correlation(&chain, v, 8)?;
        let b = proposition1_bounds(&g, v, &access, &lambda, 4)?;
        println!("link {v}: π(B) = {:.4}, ψ(1) = {:.4} (closed form {:.4})", spec.mean, spec.psi[1], b.psi1);
        let lags: Vec<String> = spec.psi.iter().map(|p| format!("{p:.3}")).collect();
        println!("  ψ(0..8) = [{}]", lags.join(", "));
        for (k, lo) in &b.even_lag_bounds {
            println!("  ψ({k}) = {:.4} ≥ {lo:.4}", spec.psi[*k]);
        }
    }
    Ok(())
}
