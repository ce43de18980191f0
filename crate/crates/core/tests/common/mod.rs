#![allow(dead_code)]

use ndarray::{Array1, Array2};
use otmkit::chains::{cost_matrix, CostSpec, MarkovChain, Metric};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn prob_vector(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let v: Array1<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s = v.sum();
    v / s
}

/// Dense kernel with strictly positive rows.
pub fn dense_kernel(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut k = Array2::zeros((n, n));
    for mut row in k.rows_mut() {
        row.assign(&prob_vector(n, rng));
    }
    k
}

/// Kernel whose rows have at most `degree` nonzeros, self-loop included.
pub fn sparse_kernel(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut k = Array2::zeros((n, n));
    let states: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let d = rng.gen_range(1..=degree.min(n));
        let mut targets: Vec<usize> = states.choose_multiple(rng, d).copied().collect();
        if !targets.contains(&i) {
            targets[0] = i;
        }
        let w = prob_vector(targets.len(), rng);
        for (t, p) in targets.iter().zip(w.iter()) {
            k[[i, *t]] = *p;
        }
    }
    k
}

pub fn random_chain(n: usize, rng: &mut ChaCha8Rng) -> MarkovChain {
    MarkovChain::new(dense_kernel(n, rng), prob_vector(n, rng), None).unwrap()
}

pub fn labeled_chain(n: usize, labels: &[Vec<f64>], rng: &mut ChaCha8Rng) -> MarkovChain {
    MarkovChain::new(
        dense_kernel(n, rng),
        prob_vector(n, rng),
        Some(labels.to_vec()),
    )
    .unwrap()
}

pub fn stationary_chain(n: usize, rng: &mut ChaCha8Rng) -> MarkovChain {
    random_chain(n, rng).stationary().unwrap()
}

pub fn random_cost(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |_| rng.gen_range(0.0..1.0))
}

/// Points in the plane used as labels of a shared state space.
pub fn planar_labels(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect()
}

pub fn euclidean(x: &MarkovChain, y: &MarkovChain) -> Array2<f64> {
    cost_matrix(x, y, CostSpec::new(Metric::Euclidean)).unwrap()
}

/// Relabels states by `perm`: new state `perm[i]` plays the role of old `i`.
pub fn permute(chain: &MarkovChain, perm: &[usize]) -> MarkovChain {
    let n = chain.n_states();
    let mut k = Array2::zeros((n, n));
    let mut nu = Array1::zeros(n);
    for i in 0..n {
        nu[perm[i]] = chain.initial()[i];
        for j in 0..n {
            k[[perm[i], perm[j]]] = chain.kernel()[[i, j]];
        }
    }
    let labels = chain.labels().map(|l| {
        let mut out = vec![Vec::new(); n];
        for i in 0..n {
            out[perm[i]] = l[i].clone();
        }
        out
    });
    MarkovChain::new(k, nu, labels).unwrap()
}

pub fn random_perm(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
