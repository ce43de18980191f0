//! Turn labeled graphs into random-walk chains and compare them.
//!
//! cargo run --example graph_random_walk

use otmkit::chains::{
    cost_matrix, graph_to_chain, structure_check, CostSpec, DanglingPolicy, InitialPolicy, Metric,
};
use otmkit::otm::{dwl_infinity, DiscountParams};

fn main() -> otmkit::Result<()> {
    // a 4-cycle and a 4-path, nodes labeled by position on a line
    let labels: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
    let mut cycle = otmkit::chains::LabeledGraph::new(4).with_labels(labels.clone());
    for i in 0..4 {
        cycle = cycle.with_undirected_edge(i, (i + 1) % 4);
    }
    let path = otmkit::chains::LabeledGraph::new(4)
        .with_labels(labels)
        .with_undirected_edge(0, 1)
        .with_undirected_edge(1, 2)
        .with_undirected_edge(2, 3);

    let x = graph_to_chain(
        &cycle,
        DanglingPolicy::SelfLoop,
        0.1,
        &InitialPolicy::Stationary,
    )?;
    let y = graph_to_chain(
        &path,
        DanglingPolicy::SelfLoop,
        0.1,
        &InitialPolicy::Stationary,
    )?;
    for (name, chain) in [("cycle", &x), ("path", &y)] {
        let s = structure_check(chain);
        println!(
            "{name}: irreducible {} aperiodic {} max out-degree {} stationary {:.4}",
            s.irreducible,
            s.aperiodic,
            s.max_out_degree,
            chain.initial()
        );
    }

    let c = cost_matrix(&x, &y, CostSpec::new(Metric::Euclidean))?;
    let d = dwl_infinity(&x, &y, &c, &DiscountParams::infinite(0.3, 0.0))?;
    println!(
        "discounted WL distance (delta 0.3): {:.6} after {} sweeps",
        d.value, d.iterations
    );
    Ok(())
}
