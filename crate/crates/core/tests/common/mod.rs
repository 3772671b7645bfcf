#![allow(dead_code)]

use fpv_core::nalgebra::DMatrix;
use fpv_core::ChainModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random absorbing chain whose transient states form a cycle, so they all
/// communicate, and at least one of them escapes. `escape` scales the weight
/// on the halt state.
pub fn random_chain(rng: &mut ChaCha8Rng, n: usize, density: f64, escape: f64) -> ChainModel {
    let halt = rng.random_range(0..n);
    let transient: Vec<usize> = (0..n).filter(|&i| i != halt).collect();
    let escaper = transient[rng.random_range(0..transient.len())];
    let mut t = DMatrix::zeros(n, n);
    t[(halt, halt)] = 1.0;
    for (k, &i) in transient.iter().enumerate() {
        let next = transient[(k + 1) % transient.len()];
        let mut w = vec![0.0; n];
        for (j, wj) in w.iter_mut().enumerate() {
            if rng.random_bool(density) {
                *wj = rng.random::<f64>() * if j == halt { escape } else { 1.0 };
            }
        }
        w[next] += 0.05 + rng.random::<f64>();
        if i == escaper {
            w[halt] += escape * (0.01 + rng.random::<f64>());
        }
        let s: f64 = w.iter().sum();
        for j in 0..n {
            t[(i, j)] = w[j] / s;
        }
    }
    let names = (0..n).map(|i| format!("s{i}")).collect();
    ChainModel::new(names, t, halt, None).expect("generated chain is valid")
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Proptest strategy: chains with 2..=max_n states.
pub fn arb_chain(max_n: usize) -> impl Strategy<Value = ChainModel> {
    (2..=max_n, any::<u64>(), 0.1f64..0.9, prop_oneof![Just(1.0), Just(0.05), 0.001f64..1.0])
        .prop_map(|(n, seed, density, escape)| random_chain(&mut seeded(seed), n, density, escape))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
