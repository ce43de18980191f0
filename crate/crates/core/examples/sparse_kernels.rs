//! Restricting cell problems to kernel supports on sparse chains.
//!
//! cargo run --release --example sparse_kernels

use ndarray::Array2;
use otmkit::chains::{graph_to_chain, DanglingPolicy, InitialPolicy, LabeledGraph};
use otmkit::otm::{dwl_depth_k, dwl_depth_k_sparse, DiscountParams};

fn ring(n: usize, skip: usize) -> otmkit::Result<otmkit::chains::MarkovChain> {
    let mut g = LabeledGraph::new(n);
    for i in 0..n {
        g = g.with_edge(i, (i + 1) % n).with_edge(i, (i + skip) % n);
    }
    graph_to_chain(&g, DanglingPolicy::SelfLoop, 0.2, &InitialPolicy::Uniform)
}

fn main() -> otmkit::Result<()> {
    let x = ring(20, 7)?;
    let y = ring(16, 5)?;
    let c = Array2::from_shape_fn((20, 16), |(i, j)| {
        ((i as f64 / 20.0) - (j as f64 / 16.0)).abs()
    });
    let params = DiscountParams::finite(0.2, 0.0, 6);

    let t = std::time::Instant::now();
    let dense = dwl_depth_k(&x, &y, &c, &params)?;
    let dense_time = t.elapsed();
    let t = std::time::Instant::now();
    let sparse = dwl_depth_k_sparse(&x, &y, &c, &params)?;
    let sparse_time = t.elapsed();
    println!(
        "dense  {:.12}  work {:>9}  {:?}",
        dense.value, dense.cell_work, dense_time
    );
    println!(
        "sparse {:.12}  work {:>9}  {:?}",
        sparse.value, sparse.cell_work, sparse_time
    );
    Ok(())
}
