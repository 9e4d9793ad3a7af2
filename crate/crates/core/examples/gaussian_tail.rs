//! Gaussian approximation of a queue tail: the net-input variance `v(t, T)`
//! shrinks with the delay order and the overflow estimate falls with it.
//!
//!     cargo run --release --example gaussian_tail

use dcsma::graph::ConflictGraph;
use dcsma::oracle::{build_chain, gaussian_queue_tail, spectral_correlation, variance_table, GaussianTailParams};
use dcsma::scheduler::AccessParams;

fn main() -> dcsma::Result<()> {
    let chain = build_chain(&ConflictGraph::cycle(7)?, &AccessParams::uniform(7, 0.25)?, &[1.0; 7], true)?;
    let (base, _) = spectral_correlation(&chain, 0, 20_000)?;
    let eta = 0.6 * base.mean;
    let xi = base.mean - eta;
    println!("lazy 7-cycle, π(B) = {:.4}, arrival rate {eta:.4}, drift {xi:.4}", base.mean);
    println!("  T   v(100, T)   P(Q > 20)   P(Q > 50)");
    for order in [1, 2, 5, 10, 25] {
        let variance = variance_table(&base, eta, order, 20_000)?;
        let gp = GaussianTailParams { xi, variance };
        let p20 = gaussian_queue_tail(&gp, 20.0)?;
        let p50 = gaussian_queue_tail(&gp, 50.0)?;
        println!("{order:>3}   {:>9.2}   {:.3e}   {:.3e}", gp.variance[99], p20.prob, p50.prob);
    }
    Ok(())
}
