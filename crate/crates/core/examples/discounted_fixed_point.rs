//! The discounted distance as a contraction fixed point, with its rate bound.
//!
//! cargo run --example discounted_fixed_point

use ndarray::array;
use otmkit::chains::MarkovChain;
use otmkit::otm::{dwl_depth_k, dwl_infinity, rate_bound, sup_norm, DiscountParams, Init};

fn main() -> otmkit::Result<()> {
    let x = MarkovChain::new(array![[0.9, 0.1], [0.2, 0.8]], array![0.5, 0.5], None)?;
    let y = MarkovChain::new(
        array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
        array![1.0, 0.0, 0.0],
        None,
    )?;
    let c = array![[0.0, 1.0, 2.0], [2.0, 1.0, 0.0]];
    let delta = 0.2;

    let params = DiscountParams::infinite(delta, 0.0).recording_iterates();
    let r = dwl_infinity(&x, &y, &c, &params)?;
    println!(
        "value {:.8}, {} sweeps, residual {:.1e}",
        r.value, r.iterations, r.residual
    );
    let norm = sup_norm(&c);
    for (k, it) in r.iterates.iter().enumerate().step_by(10) {
        println!(
            "k {k:>3}: |C_k - C*| = {:.3e} <= {:.3e}",
            sup_norm(&(it - &r.cost_final)),
            rate_bound(delta, k, norm)
        );
    }

    // every initialization reaches the same point
    for init in [Init::C, Init::Zero] {
        let other = dwl_infinity(
            &x,
            &y,
            &c,
            &DiscountParams::infinite(delta, 0.0).with_init(init),
        )?;
        println!("init {init:?}: {:.8}", other.value);
    }
    // finite depths approach it
    for k in [1, 5, 20, 80] {
        let d = dwl_depth_k(&x, &y, &c, &DiscountParams::finite(delta, 0.0, k))?;
        println!("depth {k:>2}: {:.8}", d.value);
    }
    // entropic smoothing
    let smooth = dwl_infinity(&x, &y, &c, &DiscountParams::infinite(delta, 0.05))?;
    println!("epsilon 0.05: {:.8}", smooth.value);
    Ok(())
}
