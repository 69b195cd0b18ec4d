//! Exact stochastic simulation.
//!
//! Finite models are simulated event by event from the effective rates.
//! The continuum birth-and-death dynamics in a box is simulated by thinning:
//! deaths at rate 1 per particle, birth proposals at rate `z|Λ|` with a
//! uniform location, accepted with probability `exp(−β Σ φ(x − y))` over the
//! current points and the boundary condition.
//!
//! Randomness comes from ChaCha streams: one root seed, and trajectory `i`
//! uses stream `i` of that seed.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::generator::FiniteChain;
use crate::models::{ContinuumSpec, PairPotential};
use crate::statespace::StateIndex;

/// RNG for trajectory `stream` of the root `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A finite-model path: `states[i]` is occupied on `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub stream: u64,
    pub model: String,
    pub t_end: f64,
    pub times: Vec<f64>,
    pub states: Vec<StateIndex>,
    /// Move index of each jump (`moves[i]` leads into `states[i+1]`).
    pub moves: Vec<usize>,
    /// The path reached a state with zero total rate before `t_end`.
    pub absorbed: bool,
}

impl Trajectory {
    pub fn state_at(&self, t: f64) -> Result<StateIndex> {
        if t > self.t_end || t < 0.0 {
            return Err(Error::BeyondTrajectory { t, t_end: self.t_end });
        }
        let i = self.times.partition_point(|&s| s <= t);
        Ok(self.states[i.saturating_sub(1)])
    }

    /// Time spent in each state on `[0, t_end]`, divided by `t_end`.
    pub fn occupation_fractions(&self, n_states: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n_states];
        for (i, &s) in self.states.iter().enumerate() {
            let end = self.times.get(i + 1).copied().unwrap_or(self.t_end);
            occ[s] += end - self.times[i];
        }
        occ.iter_mut().for_each(|v| *v /= self.t_end);
        occ
    }

    /// Columns `time,state`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,state")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(w, "{t:e},{s}")?;
        }
        Ok(())
    }
}

/// Event-driven simulation of the finite chain from state `start`.
pub fn simulate_finite(chain: &FiniteChain, start: StateIndex, t_end: f64, seed: u64, stream: u64) -> Result<Trajectory> {
    if t_end < 0.0 {
        return Err(Error::NegativeTime(t_end));
    }
    if start >= chain.len() {
        return Err(Error::InvalidArgument(format!(
            "start state {start} outside 0..{}",
            chain.len()
        )));
    }
    let mut rng = stream_rng(seed, stream);
    let kernel = &chain.kernel;
    let space = chain.space();
    let mut traj = Trajectory {
        seed,
        stream,
        model: chain.family().to_string(),
        t_end,
        times: vec![0.0],
        states: vec![start],
        moves: Vec::new(),
        absorbed: false,
    };
    let mut s = start;
    let mut t = 0.0;
    loop {
        let total = kernel.escape_rate(s);
        if total <= 0.0 {
            traj.absorbed = true;
            break;
        }
        let hold: f64 = Exp::new(total).expect("positive rate").sample(&mut rng);
        t += hold;
        if t > t_end {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = None;
        for k in 0..kernel.n_moves() {
            let r = kernel.rate(s, k);
            if r > 0.0 {
                chosen = Some(k);
                if u < r {
                    break;
                }
                u -= r;
            }
        }
        let k = chosen.expect("positive total rate has a charged move");
        s = space.target(s, k);
        traj.times.push(t);
        traj.states.push(s);
        traj.moves.push(k);
    }
    Ok(traj)
}

/// `count` independent trajectories, stream `i` for trajectory `i`.
pub fn simulate_finite_many(
    chain: &FiniteChain,
    start: StateIndex,
    t_end: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<Trajectory>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_finite(chain, start, t_end, seed, i))
        .collect()
}

/// Histogram with CLT standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Empirical {
    pub samples: usize,
    pub counts: Vec<u64>,
    pub probs: Vec<f64>,
    pub std_err: Vec<f64>,
}

impl Empirical {
    fn from_counts(counts: Vec<u64>) -> Self {
        let samples = counts.iter().sum::<u64>() as usize;
        let n = samples.max(1) as f64;
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let std_err = probs.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
        Self {
            samples,
            counts,
            probs,
            std_err,
        }
    }

    /// Columns `bin,count,probability,std_err`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin,count,probability,std_err")?;
        for (i, ((c, p), e)) in self.counts.iter().zip(&self.probs).zip(&self.std_err).enumerate() {
            writeln!(w, "{i},{c},{p:e},{e:e}")?;
        }
        Ok(())
    }
}

/// State frequencies across trajectories at time `t`.
pub fn empirical_distribution(trajectories: &[Trajectory], t: f64, n_states: usize) -> Result<Empirical> {
    let mut counts = vec![0u64; n_states];
    for traj in trajectories {
        counts[traj.state_at(t)?] += 1;
    }
    Ok(Empirical::from_counts(counts))
}

/// `σ²(f) = 2 ⟨f − π[f], (−Q)^{−1}(f − π[f])⟩_π`, the variance constant of
/// the time average `(1/T)∫ f(X_s) ds`.
pub fn asymptotic_variance(chain: &FiniteChain, f: &[f64]) -> Result<f64> {
    let n = chain.len();
    let pi = chain.pi.probs();
    let mean = chain.pi.expect(f);
    let centered: Vec<f64> = f.iter().map(|v| v - mean).collect();
    // (−Q) h = centered with π[h] = 0: replace the last equation by the constraint
    let mut a = -chain.q.to_dense();
    let mut b = nalgebra::DVector::from_vec(centered.clone());
    for j in 0..n {
        a[(n - 1, j)] = pi[j];
    }
    b[n - 1] = 0.0;
    let h = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NoConvergence("singular Poisson equation".into()))?;
    Ok(2.0 * (0..n).map(|i| pi[i] * centered[i] * h[i]).sum::<f64>())
}

/// Pearson test of observed counts against probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn chi_square_test(observed: &[u64], expected_probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != expected_probs.len() || observed.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: expected_probs.len(),
            got: observed.len(),
        });
    }
    let n: f64 = observed.iter().sum::<u64>() as f64;
    let total: f64 = expected_probs.iter().sum();
    let statistic = observed
        .iter()
        .zip(expected_probs)
        .map(|(&o, &p)| {
            let e = n * p / total;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

// ---------------------------------------------------------------------------
// Continuum

/// Grid-bucket index of points for finite-range potentials.
#[derive(Debug, Clone)]
struct NeighborGrid {
    cell: f64,
    cells_per_side: Vec<i64>,
    periodic: bool,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl NeighborGrid {
    fn new(spec: &ContinuumSpec, range: f64) -> Self {
        let cells_per_side = spec
            .sides
            .iter()
            .map(|s| ((s / range).floor() as i64).max(1))
            .collect();
        Self {
            cell: range,
            cells_per_side,
            periodic: spec.periodic,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter()
            .zip(&self.cells_per_side)
            .map(|(x, &n)| {
                let c = (x / self.cell).floor() as i64;
                if self.periodic {
                    c.clamp(0, n - 1)
                } else {
                    c
                }
            })
            .collect()
    }

    fn insert(&mut self, p: &[f64], id: usize) {
        self.buckets.entry(self.key(p)).or_default().push(id);
    }

    fn remove(&mut self, p: &[f64], id: usize) {
        let key = self.key(p);
        if let Some(b) = self.buckets.get_mut(&key) {
            if let Some(pos) = b.iter().position(|&v| v == id) {
                b.swap_remove(pos);
            }
        }
    }

    fn relabel(&mut self, p: &[f64], from: usize, to: usize) {
        let key = self.key(p);
        if let Some(b) = self.buckets.get_mut(&key) {
            for v in b.iter_mut() {
                if *v == from {
                    *v = to;
                }
            }
        }
    }

    /// Ids in the cells adjacent to the cell of `p`.
    fn candidates(&self, p: &[f64], out: &mut Vec<usize>) {
        out.clear();
        let base = self.key(p);
        let d = base.len();
        let mut offsets = vec![-1i64; d];
        let mut seen: Vec<Vec<i64>> = Vec::new();
        loop {
            let mut key: Vec<i64> = base.iter().zip(&offsets).map(|(b, o)| b + o).collect();
            if self.periodic {
                for (k, &n) in key.iter_mut().zip(&self.cells_per_side) {
                    *k = k.rem_euclid(n);
                }
            }
            if !seen.contains(&key) {
                if let Some(b) = self.buckets.get(&key) {
                    out.extend_from_slice(b);
                }
                seen.push(key);
            }
            let mut i = 0;
            loop {
                if i == d {
                    return;
                }
                offsets[i] += 1;
                if offsets[i] <= 1 {
                    break;
                }
                offsets[i] = -1;
                i += 1;
            }
        }
    }
}

/// Points currently in the box plus the fixed boundary condition.
#[derive(Debug, Clone)]
struct PointState<'a> {
    spec: &'a ContinuumSpec,
    points: Vec<Vec<f64>>,
    grid: Option<NeighborGrid>,
    scratch: Vec<usize>,
}

impl<'a> PointState<'a> {
    fn new(spec: &'a ContinuumSpec, start: Vec<Vec<f64>>) -> Self {
        let grid = spec.potential.range().map(|r| NeighborGrid::new(spec, r));
        let mut state = Self {
            spec,
            points: Vec::new(),
            grid,
            scratch: Vec::new(),
        };
        for p in start {
            state.push(p);
        }
        state
    }

    fn push(&mut self, p: Vec<f64>) {
        if let Some(g) = &mut self.grid {
            g.insert(&p, self.points.len());
        }
        self.points.push(p);
    }

    fn remove(&mut self, i: usize) {
        let last = self.points.len() - 1;
        if let Some(g) = &mut self.grid {
            g.remove(&self.points[i], i);
            if i != last {
                g.relabel(&self.points[last], last, i);
            }
        }
        self.points.swap_remove(i);
    }

    /// `exp(−β Σ_{y ∈ η ∪ τ} φ(x − y))`.
    fn acceptance(&mut self, x: &[f64]) -> f64 {
        let spec = self.spec;
        if spec.beta == 0.0 {
            return 1.0;
        }
        let pot = spec.potential;
        let mut energy = 0.0;
        let mut add = |y: &[f64]| {
            let v = pot.value(spec.distance(x, y));
            energy += v;
        };
        for y in &spec.boundary {
            add(y);
        }
        match &self.grid {
            Some(g) => {
                let mut ids = std::mem::take(&mut self.scratch);
                g.candidates(x, &mut ids);
                for &i in &ids {
                    add(&self.points[i]);
                }
                self.scratch = ids;
            }
            None => {
                for y in &self.points {
                    add(y);
                }
            }
        }
        if energy.is_infinite() {
            0.0
        } else {
            (-spec.beta * energy).exp()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContinuumEvent {
    Birth(Vec<f64>),
    /// Removal of the point at this position in the current point list
    /// (the last point takes its place).
    Death(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumTrajectory {
    pub seed: u64,
    pub stream: u64,
    pub t_end: f64,
    pub initial: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub events: Vec<ContinuumEvent>,
    pub proposals: u64,
    pub accepted: u64,
}

impl ContinuumTrajectory {
    pub fn count_at(&self, t: f64) -> Result<usize> {
        if t > self.t_end || t < 0.0 {
            return Err(Error::BeyondTrajectory { t, t_end: self.t_end });
        }
        let upto = self.times.partition_point(|&s| s <= t);
        let mut n = self.initial.len() as i64;
        for e in &self.events[..upto] {
            n += match e {
                ContinuumEvent::Birth(_) => 1,
                ContinuumEvent::Death(_) => -1,
            };
        }
        Ok(n as usize)
    }

    pub fn configuration_at(&self, t: f64) -> Result<Vec<Vec<f64>>> {
        if t > self.t_end || t < 0.0 {
            return Err(Error::BeyondTrajectory { t, t_end: self.t_end });
        }
        let upto = self.times.partition_point(|&s| s <= t);
        let mut pts = self.initial.clone();
        for e in &self.events[..upto] {
            match e {
                ContinuumEvent::Birth(p) => pts.push(p.clone()),
                ContinuumEvent::Death(i) => {
                    pts.swap_remove(*i);
                }
            }
        }
        Ok(pts)
    }

    /// Columns `time,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,count")?;
        let mut n = self.initial.len() as i64;
        writeln!(w, "{:e},{n}", 0.0)?;
        for (t, e) in self.times.iter().zip(&self.events) {
            n += match e {
                ContinuumEvent::Birth(_) => 1,
                ContinuumEvent::Death(_) => -1,
            };
            writeln!(w, "{t:e},{n}")?;
        }
        Ok(())
    }
}

/// Exact simulation of the continuum dynamics by thinning.
pub fn simulate_continuum(
    spec: &ContinuumSpec,
    start: Vec<Vec<f64>>,
    t_end: f64,
    seed: u64,
    stream: u64,
) -> Result<ContinuumTrajectory> {
    spec.validate()?;
    if t_end < 0.0 {
        return Err(Error::NegativeTime(t_end));
    }
    for p in &start {
        if p.len() != spec.dimension || !spec.contains(p) {
            return Err(Error::InvalidArgument(format!("start point {p:?} is not in the box")));
        }
    }
    if spec.potential.range().is_none() {
        log::warn!("potential has unbounded range: acceptance scans every point");
    }
    let mut rng = stream_rng(seed, stream);
    let volume = spec.volume();
    let birth_rate = spec.z * volume;
    let mut state = PointState::new(spec, start.clone());
    let mut traj = ContinuumTrajectory {
        seed,
        stream,
        t_end,
        initial: start,
        times: Vec::new(),
        events: Vec::new(),
        proposals: 0,
        accepted: 0,
    };
    let mut t = 0.0;
    loop {
        let total = state.points.len() as f64 + birth_rate;
        let hold: f64 = Exp::new(total).expect("positive rate").sample(&mut rng);
        t += hold;
        if t > t_end {
            break;
        }
        let u = rng.random::<f64>() * total;
        if u < state.points.len() as f64 {
            let i = (u as usize).min(state.points.len() - 1);
            state.remove(i);
            traj.times.push(t);
            traj.events.push(ContinuumEvent::Death(i));
        } else {
            traj.proposals += 1;
            let x: Vec<f64> = spec.sides.iter().map(|&s| rng.random::<f64>() * s).collect();
            let accept = state.acceptance(&x);
            if accept >= 1.0 || rng.random::<f64>() < accept {
                traj.accepted += 1;
                state.push(x.clone());
                traj.times.push(t);
                traj.events.push(ContinuumEvent::Birth(x));
            }
        }
    }
    Ok(traj)
}

pub fn simulate_continuum_many(
    spec: &ContinuumSpec,
    t_end: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<ContinuumTrajectory>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_continuum(spec, Vec::new(), t_end, seed, i))
        .collect()
}

/// Particle-count histogram at time `t`; counts `≥ n_max` share the last bin.
pub fn count_histogram(trajectories: &[ContinuumTrajectory], t: f64, n_max: usize) -> Result<Empirical> {
    let mut counts = vec![0u64; n_max + 1];
    for traj in trajectories {
        counts[traj.count_at(t)?.min(n_max)] += 1;
    }
    Ok(Empirical::from_counts(counts))
}

/// Stationary particle-count law of the continuum gas, truncated at `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberOracle {
    /// Normalized over `0..=n_max`.
    pub probs: Vec<f64>,
    /// Estimates of `Z_n = (z^n/n!) ∫_{Λ^n} e^{−βH}`.
    pub z_n: Vec<f64>,
    pub z_n_std_err: Vec<f64>,
    /// `Σ_{n>n_max} (z|Λ|)^n / n!`, an upper bound on the neglected mass
    /// relative to `Z_0 = 1`.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Quasi-random points per shift.
    pub points: usize,
    /// Independent random shifts used for the error estimate.
    pub shifts: usize,
    pub seed: u64,
    pub tail_tolerance: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            points: 1 << 14,
            shifts: 16,
            seed: 0,
            tail_tolerance: 1e-2,
        }
    }
}

/// Generalized golden-ratio (Kronecker) increments in `dim` dimensions.
fn kronecker_alphas(dim: usize) -> Vec<f64> {
    // φ_d solves x^{d+1} = x + 1
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    (1..=dim).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect()
}

/// Gibbs factor `e^{−βH}` of a point set in the box.
fn gibbs_factor(spec: &ContinuumSpec, pts: &[Vec<f64>]) -> f64 {
    if spec.beta == 0.0 {
        return 1.0;
    }
    let mut energy = 0.0;
    for (i, x) in pts.iter().enumerate() {
        for y in &pts[i + 1..] {
            energy += spec.potential.value(spec.distance(x, y));
        }
        for y in &spec.boundary {
            energy += spec.potential.value(spec.distance(x, y));
        }
        if energy.is_infinite() {
            return 0.0;
        }
    }
    (-spec.beta * energy).exp()
}

/// `Z_n` by randomly shifted Kronecker sequences, normalized into a law on
/// `{0, …, n_max}`.
pub fn continuum_number_dist_oracle(spec: &ContinuumSpec, n_max: usize, opts: OracleOptions) -> Result<NumberOracle> {
    spec.validate()?;
    let d = spec.dimension;
    let mass = spec.z * spec.volume();
    let mut tail_bound = 0.0;
    let mut term = (0..=n_max).fold(1.0, |acc, k| if k == 0 { acc } else { acc * mass / k as f64 });
    for k in n_max + 1..n_max + 200 {
        term *= mass / k as f64;
        tail_bound += term;
        if term < 1e-18 * tail_bound {
            break;
        }
    }
    if tail_bound > opts.tail_tolerance {
        return Err(Error::TailTooLarge {
            bound: tail_bound,
            tolerance: opts.tail_tolerance,
        });
    }
    let mut z_n = vec![1.0];
    let mut z_n_std_err = vec![0.0];
    let mut poisson = 1.0;
    for n in 1..=n_max {
        poisson *= mass / n as f64;
        let dim = n * d;
        let alphas = kronecker_alphas(dim);
        let means: Vec<f64> = (0..opts.shifts as u64)
            .into_par_iter()
            .map(|sh| {
                let mut rng = stream_rng(opts.seed, ((n as u64) << 32) + sh);
                let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                let mut sum = 0.0;
                let mut pts = vec![vec![0.0; d]; n];
                for k in 1..=opts.points {
                    for (j, (a, s)) in alphas.iter().zip(&shift).enumerate() {
                        let u = (s + a * k as f64).fract();
                        pts[j / d][j % d] = u * spec.sides[j % d];
                    }
                    sum += gibbs_factor(spec, &pts);
                }
                sum / opts.points as f64
            })
            .collect();
        let r = means.len() as f64;
        let mean = means.iter().sum::<f64>() / r;
        let var = if means.len() > 1 {
            means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        z_n.push(poisson * mean);
        z_n_std_err.push(poisson * (var / r).sqrt());
    }
    let total: f64 = z_n.iter().sum();
    Ok(NumberOracle {
        probs: z_n.iter().map(|v| v / total).collect(),
        z_n,
        z_n_std_err,
        tail_bound,
    })
}

/// Excluded pair volume `|{(x, y) ∈ Λ²: |x − y| < R}|` for a hard disk in
/// the unit square (free boundary, `R ≤ 1`) or the unit torus (`R ≤ ½`).
pub fn unit_square_pair_exclusion(radius: f64, periodic: bool) -> f64 {
    use std::f64::consts::PI;
    if periodic {
        PI * radius * radius
    } else {
        PI * radius * radius - 8.0 * radius.powi(3) / 3.0 + radius.powi(4) / 2.0
    }
}

/// Whether a potential can be simulated by thinning.
pub fn check_thinnable(potential: &PairPotential) -> Result<()> {
    potential.validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Model;

    fn k2() -> FiniteChain {
        FiniteChain::new(&Model::hardcore_graph(2, &[(0, 1)], 1.0).unwrap(), 10).unwrap()
    }

    #[test]
    fn trajectories_are_reproducible() {
        let c = k2();
        let a = simulate_finite(&c, 0, 50.0, 11, 3).unwrap();
        let b = simulate_finite(&c, 0, 50.0, 11, 3).unwrap();
        assert_eq!(a, b);
        let other = simulate_finite(&c, 0, 50.0, 11, 4).unwrap();
        assert_ne!(a.times, other.times);
        assert!(a.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn time_zero_is_point_mass() {
        let c = k2();
        let trajs = simulate_finite_many(&c, 1, 5.0, 2, 50).unwrap();
        let e = empirical_distribution(&trajs, 0.0, 3).unwrap();
        assert_eq!(e.counts, vec![0, 50, 0]);
        assert!(matches!(
            empirical_distribution(&trajs, 6.0, 3),
            Err(Error::BeyondTrajectory { .. })
        ));
    }

    #[test]
    fn chi_square_of_exact_match() {
        let t = chi_square_test(&[250, 250, 500], &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_exclusion_small_radius() {
        // area of the disk minus the boundary correction
        let v = unit_square_pair_exclusion(0.1, false);
        assert!(v < std::f64::consts::PI * 0.01);
        assert!(v > std::f64::consts::PI * 0.01 - 8.0 * 0.001 / 3.0);
    }
}
