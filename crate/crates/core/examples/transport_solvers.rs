//! Exact and entropic optimal transport between two histograms.
//!
//! cargo run --example transport_solvers

use ndarray::array;
use otmkit::ot::{exact_ot, sinkhorn, SinkhornOptions};

fn main() -> otmkit::Result<()> {
    let a = array![0.2, 0.5, 0.3];
    let b = array![0.4, 0.1, 0.5];
    let c = array![[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];

    let exact = exact_ot(a.view(), b.view(), c.view())?;
    println!("exact value {:.6}\nplan\n{:.4}", exact.value, exact.plan);

    for eps in [1.0, 0.1, 0.01, 0.001] {
        let s = sinkhorn(
            a.view(),
            b.view(),
            c.view(),
            eps,
            &SinkhornOptions::default(),
        )?;
        let d = s.duals.as_ref().expect("entropic solves carry duals");
        println!(
            "eps {eps:<6} value {:>9.6}  <P,C> {:.6}  iterations {:>5}  f {:.4}  g {:.4}",
            s.value,
            (&s.plan * &c).sum(),
            s.iterations,
            d.f,
            d.g
        );
    }
    Ok(())
}
