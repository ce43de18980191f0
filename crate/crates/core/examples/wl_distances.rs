//! Depth-k WL distances and their infinite-depth limit.
//!
//! cargo run --example wl_distances

use ndarray::array;
use otmkit::chains::MarkovChain;
use otmkit::otm::{wl_depth_k, wl_infinity};

fn main() -> otmkit::Result<()> {
    let x = MarkovChain::new(
        array![[0.5, 0.5, 0.0], [0.1, 0.6, 0.3], [0.3, 0.0, 0.7]],
        array![1.0, 0.0, 0.0],
        None,
    )?;
    let y = MarkovChain::new(array![[0.8, 0.2], [0.4, 0.6]], array![0.5, 0.5], None)?;
    let c = array![[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]];

    for k in 0..=6 {
        println!("depth {k}: {:.6}", wl_depth_k(&x, &y, &c, k, 0.0)?.value);
    }
    let inf = wl_infinity(&x, &y, &c, 1e-10, 10_000)?;
    println!(
        "depth infinity: {:.8} (gap {:.1e}, {} sweeps, envelopes monotone {})",
        inf.value, inf.gap, inf.iterations, inf.envelopes_monotone
    );
    // the limit forgets the initial distributions
    let x2 = x.with_initial(array![0.0, 0.0, 1.0])?;
    println!(
        "other start:    {:.8}",
        wl_infinity(&x2, &y, &c, 1e-10, 10_000)?.value
    );
    Ok(())
}
