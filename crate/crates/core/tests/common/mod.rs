#![allow(dead_code)]

use entrodecay::models::{ConvexPotential, LatticeGasParams};
use entrodecay::{FiniteChain, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CAP: usize = entrodecay::statespace::DEFAULT_STATE_CAP;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complete_graph(n: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            e.push((a, b));
        }
    }
    e
}

pub fn star(leaves: usize) -> Vec<(usize, usize)> {
    (1..=leaves).map(|l| (0, l)).collect()
}

pub fn cycle(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

/// Outer 5-cycle, inner pentagram, spokes: 3-regular on 10 vertices.
pub fn petersen() -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..5 {
        e.push((i, (i + 1) % 5));
        e.push((5 + i, 5 + (i + 2) % 5));
        e.push((i, 5 + i));
    }
    e
}

pub fn hardcore(n: usize, edges: &[(usize, usize)], rho: f64) -> Model {
    Model::hardcore_graph(n, edges, rho).unwrap()
}

/// Routes {link 0}, {links 0 and 1}, {link 1} over two links of capacity 2.
pub fn two_link_loss_network() -> Model {
    Model::loss_network(vec![2, 2], vec![vec![0], vec![0, 1], vec![1]], vec![0.8, 0.5, 1.2]).unwrap()
}

pub fn two_site(beta: f64, n_max: u32) -> Model {
    Model::two_site_convex(ConvexPotential::default(), beta, 1.0, n_max).unwrap()
}

pub fn nn_gas_1d(side: usize, h: f64, beta: f64, z: f64, n_max: u32) -> Model {
    Model::lattice_gas(LatticeGasParams {
        dimension: 1,
        side,
        potential: vec![(vec![1], h)],
        beta,
        z,
        n_max,
    })
    .unwrap()
}

pub fn chain(model: &Model) -> FiniteChain {
    FiniteChain::new(model, CAP).unwrap()
}

/// `e^g` with `g` uniform in `[−amp, amp]`.
pub fn random_positive(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-amp..amp).exp()).collect()
}

pub fn random_signed(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
