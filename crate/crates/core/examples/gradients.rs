//! Gradients of the entropic discounted distance, checked by finite differences.
//!
//! cargo run --example gradients

use ndarray::{array, Array2};
use otmkit::chains::MarkovChain;
use otmkit::grad::{backward, finite_difference_check, full_gradient};
use otmkit::otm::DiscountParams;

fn main() -> otmkit::Result<()> {
    let x = MarkovChain::new(array![[0.7, 0.3], [0.4, 0.6]], array![0.6, 0.4], None)?;
    let y = MarkovChain::new(
        array![[0.2, 0.5, 0.3], [0.3, 0.3, 0.4], [0.6, 0.2, 0.2]],
        array![0.3, 0.3, 0.4],
        None,
    )?;
    let c = array![[0.1, 0.8, 0.5], [0.9, 0.2, 0.4]];
    let params = DiscountParams::infinite(0.3, 0.05);

    let (r, g) = full_gradient(&x, &y, &c, &params)?;
    println!("value {:.8}", r.value);
    println!(
        "d/dC\n{:.5}\nd/dmX\n{:.5}\nd/dmY\n{:.5}",
        g.d_c, g.d_mx, g.d_my
    );
    println!("d/dnuX {:.5}\nd/dnuY {:.5}", g.d_nux, g.d_nuy);

    // pull back an arbitrary loss on the whole fixed-point matrix
    let upstream = Array2::from_elem(c.dim(), 1.0 / c.len() as f64);
    let b = backward(&r, &upstream)?;
    println!("mean-entry pullback d/dC\n{:.5}", b.d_c);

    let report = finite_difference_check(&x, &y, &c, &params, 4, &[1e-4, 1e-5], 7)?;
    for (target, err) in &report.max_rel_error {
        println!("finite differences {target:<4} max relative error {err:.2e}");
    }
    Ok(())
}
