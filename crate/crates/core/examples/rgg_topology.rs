//! Builds the random geometric conflict graph used by the queueing
//! experiments and prints its structure and capacity profile.
//!
//!     cargo run --example rgg_topology [seed] [out.json]

use dcsma::graph::{capacity_profile, generate_rgg, maximal_independent_sets, GraphFile, RggParams};

fn main() -> dcsma::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let inst = generate_rgg(&RggParams {
        n_nodes: 25,
        area_side: 1000.0,
        tx_range: 250.0,
        seed,
    })?;
    let g = &inst.graph;
    println!("{} links, {} conflict edges, {} nodes without a link", g.n_links(), g.edges().len(), inst.linkless_nodes.len());
    let degrees: Vec<usize> = (0..g.n_links()).map(|v| g.degree(v)).collect();
    println!("degrees {degrees:?}");
    if let Some(v) = g.max_degree_link() {
        let (tx, rx) = inst.links[v];
        println!("max-degree link {v}: node {tx} → node {rx}, {} conflicts", g.degree(v));
    }
    let mis = maximal_independent_sets(g)?;
    println!("{} maximal independent sets", mis.len());
    let cap = capacity_profile(g)?;
    let cells: Vec<String> = cap.iter().map(|c| format!("{c:.2}")).collect();
    println!("capacity profile [{}]", cells.join(", "));

    if let Some(path) = args.next() {
        let text = serde_json::to_string_pretty(&GraphFile::from_rgg(&inst)).expect("graph file serializes");
        std::fs::write(&path, text).map_err(dcsma::CsmaError::Io)?;
        println!("wrote {path}");
    }
    Ok(())
}
