//! Seeded input builders shared by the benchmarks.

use nalgebra::DMatrix;
use rand::Rng;
use twinpsy::psychnet::{block_loadings, correlation_matrix, simulate_factor_data, ItemData};
use twinpsy::semnet::SemanticNetwork;
use twinpsy::stats::RngStream;

/// Ring of `n` nodes plus `chords` random extra edges.
pub fn random_network(n: usize, chords: usize, seed: u64) -> SemanticNetwork {
    let mut rng = RngStream::new(seed).rng();
    let mut g = SemanticNetwork::new("bench");
    let name = |i: usize| format!("w{i:05}");
    for i in 0..n {
        g.set_edge(&name(i), &name((i + 1) % n), 1);
    }
    for _ in 0..chords {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            g.set_edge(&name(a), &name(b), rng.gen_range(1..5));
        }
    }
    g
}

/// Two-block factor data with `per_block` items per block.
pub fn factor_data(per_block: usize, n: usize, seed: u64) -> ItemData {
    simulate_factor_data(&block_loadings(2, per_block, 0.7), n, &RngStream::new(seed)).expect("valid loadings")
}

pub fn correlation(per_block: usize, n: usize, seed: u64) -> DMatrix<f64> {
    correlation_matrix(&factor_data(per_block, n, seed)).expect("complete data").0
}
