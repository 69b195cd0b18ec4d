mod common;

use common::*;
use entrodecay::functionals::{relative_entropy, tv_distance};
use entrodecay::models::LatticeGasParams;
use entrodecay::montecarlo::{
    asymptotic_variance, chi_square_test, continuum_number_dist_oracle, count_histogram, empirical_distribution,
    simulate_continuum, simulate_continuum_many, simulate_finite, simulate_finite_many, unit_square_pair_exclusion,
    ContinuumEvent, OracleOptions,
};
use entrodecay::{ContinuumSpec, FiniteChain, Model, PairPotential};

fn free_site(z: f64, n_max: u32) -> FiniteChain {
    chain(
        &Model::lattice_gas(LatticeGasParams {
            dimension: 1,
            side: 1,
            potential: Vec::new(),
            beta: 0.0,
            z,
            n_max,
        })
        .unwrap(),
    )
}

fn disks(radius: f64, z: f64, beta: f64, boundary: Vec<Vec<f64>>, periodic: bool) -> ContinuumSpec {
    ContinuumSpec {
        dimension: 2,
        sides: vec![1.0, 1.0],
        z,
        beta,
        potential: PairPotential::Hardcore { radius },
        boundary,
        periodic,
    }
}

/// `|mean − λ|` and `|variance − λ|` in units of their standard errors.
fn poisson_z_scores(samples: &[f64], lambda: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mean_err = (lambda / n).sqrt();
    let var_err = ((lambda + 2.0 * lambda * lambda) / n).sqrt();
    ((mean - lambda).abs() / mean_err, (var - lambda).abs() / var_err)
}

#[test]
fn paths_are_valid_jump_sequences() {
    let c = chain(&two_link_loss_network());
    let space = c.space();
    for stream in 0..20 {
        let t = simulate_finite(&c, 0, 30.0, 7, stream).unwrap();
        assert_eq!(t.times[0], 0.0);
        assert!(t.times.windows(2).all(|w| w[0] < w[1]));
        assert!(*t.times.last().unwrap() <= t.t_end);
        assert_eq!(t.moves.len() + 1, t.states.len());
        for (i, &k) in t.moves.iter().enumerate() {
            assert_ne!(t.states[i], t.states[i + 1]);
            assert_eq!(space.target(t.states[i], k), t.states[i + 1]);
            assert!(c.kernel.rate(t.states[i], k) > 0.0);
        }
        let occ = t.occupation_fractions(c.len());
        assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(simulate_finite(&c, c.len(), 1.0, 0, 0).is_err());
    assert!(simulate_finite(&c, 0, -1.0, 0, 0).is_err());
}

#[test]
fn pair_occupation_matches_stationary_law() {
    let c = chain(&hardcore(2, &complete_graph(2), 1.0));
    let t_end = 20_000.0;
    let traj = simulate_finite(&c, 0, t_end, 3, 0).unwrap();
    let occ = traj.occupation_fractions(c.len());
    for s in 0..c.len() {
        let indicator: Vec<f64> = (0..c.len()).map(|i| f64::from(i == s)).collect();
        let sigma = (asymptotic_variance(&c, &indicator).unwrap() / t_end).sqrt();
        let z = (occ[s] - c.pi.probs()[s]).abs() / sigma;
        assert!(z < 3.0, "state {s}: {} vs {} ({z:.2}σ)", occ[s], c.pi.probs()[s]);
    }
}

#[test]
fn jump_fluxes_balance() {
    let c = chain(&hardcore(3, &complete_graph(3), 0.7));
    let traj = simulate_finite(&c, 0, 20_000.0, 4, 0).unwrap();
    let n = c.len();
    let mut flux = vec![0u64; n * n];
    for w in traj.states.windows(2) {
        flux[w[0] * n + w[1]] += 1;
    }
    for a in 0..n {
        for b in a + 1..n {
            let (x, y) = (flux[a * n + b] as f64, flux[b * n + a] as f64);
            // the jump graph is a star, so each edge is crossed alternately
            assert!((x - y).abs() <= 1.0);
        }
    }
    // and the long-run jump rates match π c
    let empty_births = flux[1] + flux[2] + flux[3];
    let expected = c.pi.probs()[0] * 3.0 * 0.7 * 20_000.0;
    assert!((empty_births as f64 - expected).abs() < 0.05 * expected);
}

#[test]
fn independent_site_counts_are_poisson() {
    let (z, t) = (2.0, 0.7);
    let c = free_site(z, 40);
    let trajectories = simulate_finite_many(&c, 0, t, 5, 10_000).unwrap();
    let counts: Vec<f64> = trajectories
        .iter()
        .map(|tr| c.space().state(tr.state_at(t).unwrap()).total() as f64)
        .collect();
    let (zm, zv) = poisson_z_scores(&counts, z * (1.0 - (-t).exp()));
    assert!(zm < 3.0 && zv < 3.0, "{zm} {zv}");
}

#[test]
fn empirical_law_at_zero_is_a_point_mass() {
    let c = chain(&two_link_loss_network());
    let trajectories = simulate_finite_many(&c, 3, 2.0, 6, 200).unwrap();
    let e = empirical_distribution(&trajectories, 0.0, c.len()).unwrap();
    assert_eq!(e.counts[3], 200);
    assert_eq!(e.probs.iter().sum::<f64>(), 1.0);
    assert!(empirical_distribution(&trajectories, 3.0, c.len()).is_err());
}

#[test]
fn empirical_law_relaxes_to_stationarity() {
    let c = chain(&hardcore(3, &complete_graph(3), 0.7));
    let n_traj = 10_000;
    let trajectories = simulate_finite_many(&c, 0, 12.0, 8, n_traj).unwrap();
    let pi = c.pi.probs();
    let late = empirical_distribution(&trajectories, 12.0, c.len()).unwrap();
    for s in 0..c.len() {
        let sigma = (pi[s] * (1.0 - pi[s]) / n_traj as f64).sqrt();
        assert!((late.probs[s] - pi[s]).abs() < 3.0 * sigma, "state {s}");
    }
    assert!(chi_square_test(&late.counts, pi).unwrap().p_value > 0.001);

    // relative entropy decreases until it reaches the sampling floor
    let floor = 3.0 * (c.len() - 1) as f64 / (2.0 * n_traj as f64);
    let mut previous = f64::INFINITY;
    for k in 0..=24 {
        let e = empirical_distribution(&trajectories, 0.5 * k as f64, c.len()).unwrap();
        let h = relative_entropy(&e.probs, pi).unwrap();
        assert!(h <= previous + floor, "t = {}: {h} after {previous}", 0.5 * k as f64);
        previous = h;
        let tv = tv_distance(&e.probs, pi).unwrap();
        assert!(2.0 * tv * tv <= h * (1.0 + 1e-12));
    }
}

#[test]
fn finite_simulation_is_reproducible() {
    let c = chain(&hardcore(6, &cycle(6), 0.5));
    let a = simulate_finite_many(&c, 0, 5.0, 11, 50).unwrap();
    let b = simulate_finite_many(&c, 0, 5.0, 11, 50).unwrap();
    assert_eq!(a, b);
    let other = simulate_finite_many(&c, 0, 5.0, 12, 50).unwrap();
    assert_ne!(a, other);
    // trajectory i only depends on its own stream
    assert_eq!(a[17], simulate_finite(&c, 0, 5.0, 11, 17).unwrap());
}

#[test]
fn continuum_ideal_gas_is_poisson() {
    let (z, t) = (3.0, 1.0);
    let spec = disks(0.15, z, 0.0, Vec::new(), false);
    let trajectories = simulate_continuum_many(&spec, t, 13, 10_000).unwrap();
    assert!(trajectories.iter().all(|tr| tr.accepted == tr.proposals));
    let counts: Vec<f64> = trajectories.iter().map(|tr| tr.count_at(t).unwrap() as f64).collect();
    let (zm, zv) = poisson_z_scores(&counts, z * (1.0 - (-t).exp()));
    assert!(zm < 3.0 && zv < 3.0, "{zm} {zv}");
}

#[test]
fn hard_disks_never_overlap() {
    let radius = 0.15;
    let boundary = vec![vec![-0.05, 0.5], vec![0.5, 1.1], vec![1.2, 1.2]];
    let spec = disks(radius, 4.0, 1.0, boundary.clone(), false);
    let mut rejected = 0;
    for stream in 0..40 {
        let tr = simulate_continuum(&spec, Vec::new(), 5.0, 14, stream).unwrap();
        rejected += tr.proposals - tr.accepted;
        let mut checkpoints = tr.times.clone();
        checkpoints.push(tr.t_end);
        for t in checkpoints {
            let pts = tr.configuration_at(t).unwrap();
            for (i, x) in pts.iter().enumerate() {
                assert!(x.iter().all(|&c| (0.0..=1.0).contains(&c)));
                for y in pts[i + 1..].iter().chain(&boundary) {
                    assert!(spec.distance(x, y) >= radius, "{x:?} {y:?}");
                }
            }
        }
        let births = tr.events.iter().filter(|e| matches!(e, ContinuumEvent::Birth(_))).count();
        assert_eq!(births as u64, tr.accepted);
    }
    assert!(rejected > 0);
    assert!(simulate_continuum(&spec, vec![vec![2.0, 0.5]], 1.0, 0, 0).is_err());
}

#[test]
fn oracle_pair_weight_matches_exclusion_geometry() {
    let radius = 0.15;
    for periodic in [false, true] {
        let spec = disks(radius, 1.0, 1.0, Vec::new(), periodic);
        let oracle = continuum_number_dist_oracle(&spec, 5, OracleOptions::default()).unwrap();
        assert_eq!(oracle.z_n[0], 1.0);
        assert!((oracle.z_n[1] - 1.0).abs() < 1e-12);
        let exact = 0.5 * (1.0 - unit_square_pair_exclusion(radius, periodic));
        let err = (oracle.z_n[2] - exact).abs();
        assert!(err < 4.0 * oracle.z_n_std_err[2] + 1e-4, "periodic={periodic}: {} vs {exact}", oracle.z_n[2]);
        assert!((oracle.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn continuum_simulation_is_reproducible() {
    let spec = disks(0.15, 1.0, 1.0, Vec::new(), false);
    let a = simulate_continuum_many(&spec, 3.0, 15, 30).unwrap();
    let b = simulate_continuum_many(&spec, 3.0, 15, 30).unwrap();
    assert_eq!(a, b);
    let ha = count_histogram(&a, 3.0, 5).unwrap();
    assert_eq!(ha, count_histogram(&b, 3.0, 5).unwrap());
    assert_eq!(ha.samples, 30);
}
