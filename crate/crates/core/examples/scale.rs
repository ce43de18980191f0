//! Forward pass and full gradient on 50-state dense chains.
//!
//! cargo run --release --example scale

use ndarray::{Array1, Array2};
use otmkit::chains::MarkovChain;
use otmkit::grad::full_gradient;
use otmkit::otm::DiscountParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_chain(n: usize, rng: &mut ChaCha8Rng) -> otmkit::Result<MarkovChain> {
    let mut k = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.05..1.0));
    for mut row in k.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    let nu: Array1<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s = nu.sum();
    MarkovChain::new(k, nu / s, None)
}

fn main() -> otmkit::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(50);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_chain(n, &mut rng)?;
    let y = random_chain(n, &mut rng)?;
    let c = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.0..1.0));
    let params = DiscountParams::infinite(0.1, 0.05 * c.mean().unwrap_or(1.0));

    let t = std::time::Instant::now();
    let (r, g) = full_gradient(&x, &y, &c, &params)?;
    println!(
        "n = {n}: value {:.10}, {} sweeps, {} cost entries touched, {:.1?} on {} thread(s)",
        r.value,
        r.iterations,
        r.cell_work,
        t.elapsed(),
        rayon::current_num_threads()
    );
    println!("sum of d/dC = {:.12}", g.d_c.sum());
    Ok(())
}
