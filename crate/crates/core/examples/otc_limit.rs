//! Approximating the transition-coupling distance by shrinking the discount.
//!
//! cargo run --example otc_limit

use ndarray::array;
use otmkit::chains::MarkovChain;
use otmkit::otm::{otc_estimate, DiscountParams};

fn main() -> otmkit::Result<()> {
    let x = MarkovChain::new(array![[0.9, 0.1], [0.1, 0.9]], array![0.5, 0.5], None)?;
    let y = MarkovChain::new(array![[0.5, 0.5], [0.5, 0.5]], array![0.5, 0.5], None)?;
    let c = array![[0.0, 1.0], [1.0, 0.0]];

    let est = otc_estimate(
        &x,
        &y,
        &c,
        &[0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005],
        0.0,
        &DiscountParams::default(),
    )?;
    for e in &est.entries {
        println!(
            "delta {:<6} value {:.6} ({} sweeps)",
            e.delta, e.value, e.iterations
        );
    }
    println!(
        "estimate {:.6}, nondecreasing {}",
        est.estimate, est.nondecreasing
    );

    // chains must start from stationarity
    let moving = x.with_initial(array![1.0, 0.0])?;
    if let Err(e) = otc_estimate(&moving, &y, &c, &[0.1], 0.0, &DiscountParams::default()) {
        println!("non-stationary input: {e}");
    }
    Ok(())
}
