//! Distances for general horizon laws and the WL lower bound.
//!
//! cargo run --example horizon_laws

use ndarray::array;
use otmkit::chains::MarkovChain;
use otmkit::otm::{otm_general_p, truncated_geometric, HorizonDistribution};
use otmkit::reference::lower_bound_check;

fn main() -> otmkit::Result<()> {
    let x = MarkovChain::new(array![[0.1, 0.9], [0.8, 0.2]], array![1.0, 0.0], None)?;
    let y = MarkovChain::new(array![[0.9, 0.1], [0.3, 0.7]], array![0.5, 0.5], None)?;
    let c = array![[0.0, 1.0], [1.0, 0.0]];

    let laws = [
        ("dirac at 3", HorizonDistribution::dirac(3)),
        ("uniform on 0..4", HorizonDistribution::new(vec![0.2; 5])?),
        ("geometric 0.3, cut at 6", truncated_geometric(0.3, 6)?),
    ];
    for (name, p) in &laws {
        let d = otm_general_p(&x, &y, &c, p, 0.0)?;
        let b = lower_bound_check(&x, &y, &c, p)?;
        println!(
            "{name:<24} OTM {:.6}  averaged WL {:.6}  bound holds {}",
            d.value, b.rhs, b.holds
        );
    }
    Ok(())
}
