//! Spectral gap, semigroup evolution, entropy decay curves and numerical
//! searches for the best entropy constants.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{check_positive, dirichlet_entropy, entropy};
use crate::generator::{FiniteChain, GeneratorMatrix, StationaryMeasure};

/// Largest state count solved with a dense eigendecomposition.
pub const DENSE_THRESHOLD: usize = 4096;
/// A gap below this is reported as a reducible chain.
pub const REDUCIBLE_TOLERANCE: f64 = 1e-10;
/// Poisson mass left out of each uniformization sum.
pub const POISSON_TAIL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub gap: f64,
    pub reducible: bool,
    pub method: String,
    /// `‖(−Q_sym − γ)v‖` of the returned eigenvector.
    pub residual: f64,
    /// Smallest `π[(Qf)²] / E(f,f)` over the probe functions.
    pub min_probe_ratio: f64,
    /// Right eigenvector of `−Q` for the gap, normalized in `L²(π)`.
    #[serde(skip)]
    pub eigenvector: Vec<f64>,
}

/// Symmetrized operator `A = −D^{1/2} Q D^{−1/2}` with `D = diag(π)`.
struct SymmetrizedGenerator<'a> {
    q: &'a GeneratorMatrix,
    sqrt_pi: Vec<f64>,
}

impl SymmetrizedGenerator<'_> {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, v) in self.q.row(i) {
                acc += v * x[j] / self.sqrt_pi[j];
            }
            *o = -acc * self.sqrt_pi[i];
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.sqrt_pi.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.q.row(i) {
                a[(i, j)] = -v * self.sqrt_pi[i] / self.sqrt_pi[j];
            }
        }
        // remove rounding asymmetry
        let t = a.transpose();
        (a + t) * 0.5
    }
}

/// Second-smallest eigenvalue of `−Q` in `L²(π)`.
///
/// Dense symmetric eigendecomposition up to [`DENSE_THRESHOLD`] states,
/// Lanczos with full reorthogonalization and explicit restarts above it.
/// The bound `γ E(f,f) ≤ π[(Qf)²]` is evaluated on the eigenvector and on
/// a few deterministic probes.
pub fn spectral_gap(q: &GeneratorMatrix, pi: &StationaryMeasure) -> Result<SpectralGap> {
    let n = q.dim();
    if n != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pi.len(),
        });
    }
    if n < 2 {
        return Ok(SpectralGap {
            gap: 0.0,
            reducible: true,
            method: "trivial".into(),
            residual: 0.0,
            min_probe_ratio: f64::INFINITY,
            eigenvector: vec![0.0; n],
        });
    }
    let op = SymmetrizedGenerator {
        q,
        sqrt_pi: pi.probs().iter().map(|p| p.sqrt()).collect(),
    };
    let (gap, v, method) = if n <= DENSE_THRESHOLD {
        let eig = SymmetricEigen::new(op.dense());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let k = order[1];
        (
            eig.eigenvalues[k],
            eig.eigenvectors.column(k).iter().copied().collect::<Vec<_>>(),
            "dense",
        )
    } else {
        let (g, v) = lanczos_smallest_nonzero(&op)?;
        (g, v, "lanczos")
    };
    let mut av = vec![0.0; n];
    op.apply(&v, &mut av);
    let residual = av
        .iter()
        .zip(&v)
        .map(|(a, x)| (a - gap * x).powi(2))
        .sum::<f64>()
        .sqrt();
    let eigenvector: Vec<f64> = v.iter().zip(&op.sqrt_pi).map(|(x, s)| x / s).collect();

    let mut probes = vec![eigenvector.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..8 {
        probes.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let min_probe_ratio = probes
        .iter()
        .filter_map(|f| {
            let qf = q.apply(f);
            let energy = -pi.expect(&qf.iter().zip(f).map(|(a, b)| a * b).collect::<Vec<_>>());
            let square = pi.expect(&qf.iter().map(|a| a * a).collect::<Vec<_>>());
            (energy > 1e-14).then_some(square / energy)
        })
        .fold(f64::INFINITY, f64::min);

    Ok(SpectralGap {
        gap,
        reducible: gap.abs() < REDUCIBLE_TOLERANCE,
        method: method.into(),
        residual,
        min_probe_ratio,
        eigenvector,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Smallest eigenpair of `A` on the complement of `√π` (the kernel).
fn lanczos_smallest_nonzero(op: &SymmetrizedGenerator<'_>) -> Result<(f64, Vec<f64>)> {
    let n = op.sqrt_pi.len();
    let kernel = {
        let mut k = op.sqrt_pi.clone();
        normalize(&mut k);
        k
    };
    let deflate = |v: &mut [f64]| {
        let c = dot(v, &kernel);
        axpy(-c, &kernel, v);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let krylov = 300.min(n - 1);
    let mut best = (f64::INFINITY, vec![0.0; n], f64::INFINITY);
    let mut w = vec![0.0; n];
    for _restart in 0..60 {
        deflate(&mut start);
        normalize(&mut start);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        for j in 0..krylov {
            op.apply(&basis[j], &mut w);
            deflate(&mut w);
            alphas.push(dot(&w, &basis[j]));
            // two passes of Gram–Schmidt against the kernel and the whole basis
            for _ in 0..2 {
                deflate(&mut w);
                for b in &basis {
                    let c = dot(&w, b);
                    axpy(-c, b, &mut w);
                }
            }
            let beta = normalize(&mut w);
            if j + 1 == krylov || beta < 1e-13 {
                break;
            }
            betas.push(beta);
            basis.push(w.clone());
        }
        let m = alphas.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let k = (0..m)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .unwrap();
        let theta = eig.eigenvalues[k];
        let y: DVector<f64> = eig.eigenvectors.column(k).into();
        let mut ritz = vec![0.0; n];
        for (i, b) in basis.iter().take(m).enumerate() {
            axpy(y[i], b, &mut ritz);
        }
        deflate(&mut ritz);
        normalize(&mut ritz);
        op.apply(&ritz, &mut w);
        let rayleigh = dot(&w, &ritz);
        axpy(-rayleigh, &ritz, &mut w);
        let residual = dot(&w, &w).sqrt();
        log::debug!("lanczos restart: theta={theta:e} rayleigh={rayleigh:e} residual={residual:e}");
        if residual < best.2 {
            best = (rayleigh, ritz.clone(), residual);
        }
        if residual < 1e-10 {
            return Ok((rayleigh, ritz));
        }
        start = ritz;
    }
    Err(Error::NoConvergence(format!(
        "Lanczos residual {:e} after restarts (eigenvalue estimate {:e})",
        best.2, best.0
    )))
}

/// `T_t f = e^{tQ} f` by uniformization.
///
/// The horizon is split into pieces with `Λ h ≤ 50` (`Λ` the largest exit
/// rate). On each piece `Σ_k Poisson(Λh; k) P^k f` with `P = I + Q/Λ` is
/// summed until the remaining Poisson mass is below [`POISSON_TAIL`], and
/// divided by the mass kept so that constants are reproduced exactly.
pub fn evolve(q: &GeneratorMatrix, f0: &[f64], t: f64) -> Result<Vec<f64>> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    if f0.len() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: f0.len(),
        });
    }
    let lambda = q.max_exit_rate();
    if t == 0.0 || lambda == 0.0 {
        return Ok(f0.to_vec());
    }
    let pieces = (lambda * t / 50.0).ceil().max(1.0) as usize;
    let h = t / pieces as f64;
    let mut f = f0.to_vec();
    let mut qx = vec![0.0; f.len()];
    for _ in 0..pieces {
        let mean = lambda * h;
        let mut weight = (-mean).exp();
        let mut kept = weight;
        let mut power = f.clone();
        let mut acc: Vec<f64> = power.iter().map(|v| v * weight).collect();
        let mut k = 0usize;
        while 1.0 - kept > POISSON_TAIL || (k as f64) < mean {
            k += 1;
            q.apply_into(&power, &mut qx);
            for (p, d) in power.iter_mut().zip(&qx) {
                *p += d / lambda;
            }
            weight *= mean / k as f64;
            kept += weight;
            axpy(weight, &power, &mut acc);
            if k > 10_000 {
                break;
            }
        }
        f = acc.into_iter().map(|v| v / kept).collect();
    }
    Ok(f)
}

/// One row of a decay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub entropy: f64,
    pub dirichlet_entropy: f64,
    pub tv: f64,
    /// `e^{−κ t} Ent(f)`.
    pub envelope_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayChecks {
    /// Largest `Ent(T_t f) − e^{−κt} Ent(f)`, relative to `Ent(f)`.
    pub entropy_envelope_excess: f64,
    /// Largest `E(T_t f, log T_t f) − e^{−κt} E(f, log f)`, relative to `E(f, log f)`.
    pub dirichlet_envelope_excess: f64,
    /// Smallest second difference of the entropy on the grid.
    pub min_second_difference: f64,
    /// Largest gap between the five-point difference quotient of the
    /// entropy and `−E(T_t f, log T_t f)`.
    pub max_derivative_error: f64,
    /// Largest increase of the entropy between grid points.
    pub max_entropy_increase: f64,
    pub derivative_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurves {
    pub kappa_bound: f64,
    pub points: Vec<CurvePoint>,
    pub checks: DecayChecks,
}

impl DecayCurves {
    /// Entropy and Dirichlet envelopes within relative slack `tol`.
    pub fn envelopes_hold(&self, tol: f64) -> bool {
        self.checks.entropy_envelope_excess <= tol && self.checks.dirichlet_envelope_excess <= tol
    }

    /// Columns `t,entropy,dirichlet_entropy,tv,envelope_kappa`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,entropy,dirichlet_entropy,tv,envelope_kappa")?;
        for p in &self.points {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e}",
                p.t, p.entropy, p.dirichlet_entropy, p.tv, p.envelope_kappa
            )?;
        }
        Ok(())
    }
}

/// `n` evenly spaced points on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

/// Entropy decay of `T_t f0` on a grid together with the envelope,
/// convexity and derivative checks.
///
/// The derivative identity `d/dt Ent(T_t f) = −E(T_t f, log T_t f)` is
/// checked with the five-point centered stencil of step `h` at every grid
/// point `t ≥ 2h`.
pub fn decay_curves(
    chain: &FiniteChain,
    f0: &[f64],
    t_grid: &[f64],
    kappa_bound: f64,
    h: f64,
) -> Result<DecayCurves> {
    check_positive(f0)?;
    let pi = &chain.pi;
    let ent0 = entropy(f0, pi)?;
    let dir0 = dirichlet_entropy(&chain.kernel, pi, f0)?;
    if ent0 <= 0.0 {
        return Err(Error::ConstantFunction);
    }
    let mean = pi.expect(f0);
    let mut points = Vec::with_capacity(t_grid.len());
    let mut checks = DecayChecks {
        entropy_envelope_excess: f64::NEG_INFINITY,
        dirichlet_envelope_excess: f64::NEG_INFINITY,
        min_second_difference: f64::INFINITY,
        max_derivative_error: 0.0,
        max_entropy_increase: f64::NEG_INFINITY,
        derivative_step: h,
    };
    let mut current = f0.to_vec();
    let mut last_t = 0.0;
    for &t in t_grid {
        if t < last_t {
            return Err(Error::InvalidArgument("time grid must be increasing".into()));
        }
        if t >= 2.0 * h && t - 2.0 * h >= last_t {
            // five-point stencil across [t − 2h, t + 2h]
            let m2 = evolve(&chain.q, &current, t - 2.0 * h - last_t)?;
            let m1 = evolve(&chain.q, &m2, h)?;
            current = evolve(&chain.q, &m1, h)?;
            let p1 = evolve(&chain.q, &current, h)?;
            let p2 = evolve(&chain.q, &p1, h)?;
            let [e_m2, e_m1, e_p1, e_p2] = [&m2, &m1, &p1, &p2].map(|v| entropy(v, pi));
            let slope = (8.0 * (e_p1? - e_m1?) - (e_p2? - e_m2?)) / (12.0 * h);
            let dir = dirichlet_entropy(&chain.kernel, pi, &current)?;
            checks.max_derivative_error = checks.max_derivative_error.max((slope + dir).abs());
        } else {
            current = evolve(&chain.q, &current, t - last_t)?;
        }
        last_t = t;
        let ent = entropy(&current, pi)?;
        let dir = dirichlet_entropy(&chain.kernel, pi, &current)?;
        let tv = 0.5
            * pi
                .probs()
                .iter()
                .zip(&current)
                .map(|(p, v)| p * (v / mean - 1.0).abs())
                .sum::<f64>();
        let decay = (-kappa_bound * t).exp();
        checks.entropy_envelope_excess = checks.entropy_envelope_excess.max((ent - decay * ent0) / ent0);
        if dir0 > 0.0 {
            checks.dirichlet_envelope_excess =
                checks.dirichlet_envelope_excess.max((dir - decay * dir0) / dir0);
        }
        points.push(CurvePoint {
            t,
            entropy: ent,
            dirichlet_entropy: dir,
            tv,
            envelope_kappa: decay * ent0,
        });
    }
    for w in points.windows(2) {
        checks.max_entropy_increase = checks.max_entropy_increase.max(w[1].entropy - w[0].entropy);
    }
    for w in points.windows(3) {
        checks.min_second_difference = checks
            .min_second_difference
            .min(w[2].entropy - 2.0 * w[1].entropy + w[0].entropy);
    }
    Ok(DecayCurves {
        kappa_bound,
        points,
        checks,
    })
}

// ---------------------------------------------------------------------------
// Constant search

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constant {
    /// `E(f, log f) / Ent(f)`.
    Alpha,
    /// `(π[Lf·L log f] + π[(Lf)²/f]) / E(f, log f)`.
    Kappa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub probes: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Bound on `‖g‖∞` for `f = e^g`.
    pub log_cap: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            probes: 100_000,
            restarts: 32,
            iterations: 200,
            seed: 0,
            log_cap: crate::functionals::DEFAULT_LOG_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub constant: Constant,
    /// Smallest ratio found: an upper bound on the best constant.
    pub value: f64,
    /// `g = log f` of the minimizer.
    pub witness: Vec<f64>,
    pub evaluations: usize,
}

/// Largest accepted estimate of the relative rounding error of the
/// second-order quantity in a ratio. Near constants `Ent(f)` and the
/// entropy production are differences of nearly equal sums.
const MAX_ROUNDING: f64 = 1e-9;

/// Unordered jump pairs `i < j` with both rates, used for
/// cancellation-free differences `Σ_j q_ij (h_j − h_i)`.
struct Jumps {
    pairs: Vec<Pair>,
    pi: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Pair {
    i: usize,
    j: usize,
    forward: f64,
    backward: f64,
}

struct Evaluation {
    ratio: f64,
    /// Gradient with respect to `g`, already divided by `π`.
    direction: Option<Vec<f64>>,
}

impl Jumps {
    fn new(chain: &FiniteChain) -> Self {
        let q = &chain.q;
        let mut pairs = Vec::new();
        for i in 0..q.dim() {
            for (j, v) in q.row(i) {
                if j > i {
                    let back = q.row(j).find(|e| e.0 == i).map_or(0.0, |e| e.1);
                    if v != 0.0 || back != 0.0 {
                        pairs.push(Pair {
                            i,
                            j,
                            forward: v,
                            backward: back,
                        });
                    }
                }
            }
        }
        Self {
            pairs,
            pi: chain.pi.probs().to_vec(),
        }
    }

    fn n(&self) -> usize {
        self.pi.len()
    }

    fn diff(&self, h: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for p in &self.pairs {
            let d = h[p.j] - h[p.i];
            out[p.i] += p.forward * d;
            out[p.j] -= p.backward * d;
        }
    }

    /// The chosen ratio at `f = e^g` and, if asked, its preconditioned gradient.
    fn evaluate(&self, which: Constant, g: &[f64], with_gradient: bool) -> Option<Evaluation> {
        let n = self.n();
        let f: Vec<f64> = g.iter().map(|v| v.exp()).collect();
        // u = Qf from f_j − f_i = f_i expm1(g_j − g_i), v = Qg, and
        // E(f, log f) = ½ Σ π q (f_j − f_i)(g_j − g_i)
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut dirichlet = 0.0;
        for p in &self.pairs {
            let d = g[p.j] - g[p.i];
            let up = d.exp_m1();
            let down = -up / (1.0 + up);
            let (a, b) = (p.forward * up * f[p.i], p.backward * down * f[p.j]);
            u[p.i] += a;
            u[p.j] += b;
            v[p.i] += p.forward * d;
            v[p.j] -= p.backward * d;
            dirichlet += (self.pi[p.i] * a - self.pi[p.j] * b) * d;
        }
        dirichlet *= 0.5;
        let mean: f64 = self.pi.iter().zip(&f).map(|(p, x)| p * x).sum();
        if !(dirichlet > 1e-300) || !mean.is_finite() {
            return None;
        }
        let (ratio, denominator) = match which {
            Constant::Kappa => {
                let (numerator, magnitude) = (0..n).fold((0.0, 0.0), |(s, a), i| {
                    let (x, y) = (u[i] * v[i], u[i] * u[i] / f[i]);
                    (s + self.pi[i] * (x + y), a + self.pi[i] * (x.abs() + y))
                });
                if !(numerator.abs() * MAX_ROUNDING >= f64::EPSILON * magnitude) {
                    return None;
                }
                (numerator / dirichlet, dirichlet)
            }
            Constant::Alpha => {
                let (ent, spread) = (0..n).fold((0.0, 0.0), |(e, d), i| {
                    let x = f[i] / mean;
                    let term = self.pi[i] * mean * (x * (x - 1.0).ln_1p() - (x - 1.0));
                    (e + term, d + self.pi[i] * (f[i] - mean).abs())
                });
                if !(ent > 1e-300 && ent * MAX_ROUNDING >= f64::EPSILON * spread) {
                    return None;
                }
                (dirichlet / ent, ent)
            }
        };
        if !ratio.is_finite() {
            return None;
        }
        if !with_gradient {
            return Some(Evaluation {
                ratio,
                direction: None,
            });
        }
        // gradients divided by π
        let mut qv = vec![0.0; n];
        let mut qg_f = vec![0.0; n];
        let grad_d: Vec<f64> = {
            // −(Qf + f∘Qg)
            (0..n).map(|i| -(u[i] + f[i] * v[i])).collect()
        };
        let direction: Vec<f64> = match which {
            Constant::Kappa => {
                let w: Vec<f64> = (0..n).map(|i| v[i] + 2.0 * u[i] / f[i]).collect();
                self.diff(&w, &mut qv);
                self.diff(&u, &mut qg_f);
                (0..n)
                    .map(|i| {
                        let grad_n = f[i] * qv[i] + qg_f[i] - u[i] * u[i] / f[i];
                        (grad_n - ratio * grad_d[i]) / denominator
                    })
                    .collect()
            }
            Constant::Alpha => {
                let log_mean = mean.ln();
                (0..n)
                    .map(|i| {
                        let grad_e = f[i] * (g[i] - log_mean);
                        (grad_d[i] - ratio * grad_e) / denominator
                    })
                    .collect()
            }
        };
        Some(Evaluation {
            ratio,
            direction: Some(direction),
        })
    }
}

fn center(g: &mut [f64], pi: &[f64], cap: f64) {
    let m: f64 = g.iter().zip(pi).map(|(a, p)| a * p).sum();
    for v in g.iter_mut() {
        *v = (*v - m).clamp(-cap, cap);
    }
}

fn pi_dot(pi: &[f64], a: &[f64], b: &[f64]) -> f64 {
    pi.iter().zip(a).zip(b).map(|((p, x), y)| p * x * y).sum()
}

/// Limited-memory BFGS in the `L²(π)` geometry, projected onto
/// `‖g‖∞ ≤ cap` after each step, with Armijo backtracking.
fn descend(jumps: &Jumps, which: Constant, mut g: Vec<f64>, iterations: usize, cap: f64) -> (f64, Vec<f64>, usize) {
    const MEMORY: usize = 8;
    let pi = &jumps.pi;
    let mut evals = 1;
    let Some(mut cur) = jumps.evaluate(which, &g, true) else {
        return (f64::INFINITY, g, evals);
    };
    let mut grad = cur.direction.take().unwrap();
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    for _ in 0..iterations {
        let scale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            break;
        }
        // two-loop recursion; unit max-norm steepest step when memory is empty
        let mut p = grad.clone();
        let mut coeffs = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * pi_dot(pi, s, &p);
            axpy(-a, y, &mut p);
            coeffs.push(a);
        }
        let h0 = match history.last() {
            Some((s, y, _)) => pi_dot(pi, s, y) / pi_dot(pi, y, y),
            None => 1.0 / scale,
        };
        p.iter_mut().for_each(|v| *v *= h0);
        for ((s, y, rho), a) in history.iter().zip(coeffs.iter().rev()) {
            let b = rho * pi_dot(pi, y, &p);
            axpy(a - b, s, &mut p);
        }
        p.iter_mut().for_each(|v| *v = -*v);
        let mut slope = pi_dot(pi, &grad, &p);
        if !(slope < 0.0) {
            history.clear();
            p = grad.iter().map(|v| -v / scale).collect();
            slope = pi_dot(pi, &grad, &p);
        }

        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..30 {
            let mut trial: Vec<f64> = g.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            center(&mut trial, pi, cap);
            evals += 1;
            if let Some(next) = jumps.evaluate(which, &trial, true) {
                if next.ratio <= cur.ratio + 1e-4 * t * slope && next.ratio < cur.ratio {
                    accepted = Some((trial, next));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, mut next)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let next_grad = next.direction.take().unwrap();
        let s: Vec<f64> = trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = pi_dot(pi, &s, &y);
        if sy > 1e-300 && pi_dot(pi, &y, &y) > 0.0 {
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        g = trial;
        grad = next_grad;
        cur = next;
    }
    (cur.ratio, g, evals)
}

/// `g = λ Σ_x w_x η(x)` for `w` the all-ones vector and each site
/// indicator, over a logarithmic grid of `λ` of both signs.
fn occupation_probes(chain: &FiniteChain, cap: f64) -> Vec<Vec<f64>> {
    let space = chain.space();
    let n_sites = space.model().n_sites();
    let max_total = space.states().iter().map(|s| s.total()).max().unwrap_or(0).max(1) as f64;
    let lambdas: Vec<f64> = (0..24)
        .map(|k| 10f64.powf(-3.0 + k as f64 * ((cap / max_total).log10() + 3.0) / 23.0))
        .flat_map(|l| [l, -l])
        .collect();
    let mut weights: Vec<Vec<f64>> = vec![vec![1.0; n_sites]];
    if n_sites > 1 {
        weights.extend((0..n_sites).map(|x| {
            let mut w = vec![0.0; n_sites];
            w[x] = 1.0;
            w
        }));
    }
    let mut out = Vec::with_capacity(weights.len() * lambdas.len());
    for w in &weights {
        let base: Vec<f64> = space
            .states()
            .iter()
            .map(|s| s.counts().iter().zip(w).map(|(&c, wx)| c as f64 * wx).sum())
            .collect();
        for &l in &lambdas {
            let mut g: Vec<f64> = base.iter().map(|b| l * b).collect();
            center(&mut g, chain.pi.probs(), cap);
            out.push(g);
        }
    }
    out
}

fn random_probe(rng: &mut ChaCha8Rng, n: usize, cap: f64) -> Vec<f64> {
    // amplitudes spread over several decades; a third of the probes are
    // sparse bumps
    let amplitude = 10f64.powf(rng.random_range(-3.0..cap.log10()));
    if rng.random_bool(1.0 / 3.0) {
        let mut g = vec![0.0; n];
        let bumps = 1 + rng.random_range(0..n.min(3));
        for _ in 0..bumps {
            let i = rng.random_range(0..n);
            g[i] = amplitude * rng.random_range(-1.0..1.0);
        }
        g
    } else {
        (0..n).map(|_| amplitude * rng.random_range(-1.0..1.0)).collect()
    }
}

/// Minimizes the chosen ratio over `f = e^g`, `‖g‖∞ ≤ log_cap`.
///
/// Candidates are random probes, exponentials of scaled occupation counts,
/// limited-memory BFGS descents started from the best of both and from
/// random points, and `exp(±ε v)` along the gap eigenvector `v`.
/// The minimum found is an upper bound on the best constant. Each restart
/// and each probe block draws from its own ChaCha stream derived from the
/// seed, and ties are broken by candidate index, so the result does not
/// depend on the thread count.
pub fn best_constant_search(
    chain: &FiniteChain,
    which: Constant,
    options: &SearchOptions,
    gap_eigenvector: Option<&[f64]>,
) -> Result<SearchResult> {
    let jumps = Jumps::new(chain);
    let n = jumps.n();
    let cap = options.log_cap;
    const BLOCK: usize = 1024;
    let blocks = options.probes.div_ceil(BLOCK);
    let probe_best: Vec<(f64, usize, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(1 + b as u64);
            let count = BLOCK.min(options.probes - b * BLOCK);
            let mut best = (f64::INFINITY, usize::MAX, Vec::new());
            for i in 0..count {
                let mut g = random_probe(&mut rng, n, cap);
                center(&mut g, &jumps.pi, cap);
                if let Some(e) = jumps.evaluate(which, &g, false) {
                    if e.ratio < best.0 {
                        best = (e.ratio, b * BLOCK + i, g);
                    }
                }
            }
            best
        })
        .collect();
    let mut evaluations = options.probes;

    let mut candidates: Vec<(f64, usize, Vec<f64>)> = Vec::new();
    let mut ranked: Vec<&(f64, usize, Vec<f64>)> = probe_best.iter().filter(|c| c.0.is_finite()).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut structured: Vec<(f64, usize, Vec<f64>)> = occupation_probes(chain, cap)
        .into_par_iter()
        .enumerate()
        .filter_map(|(i, g)| jumps.evaluate(which, &g, false).map(|e| (e.ratio, blocks * BLOCK + i, g)))
        .collect();
    structured.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    evaluations += structured.len();

    // start points cycle through the best probe blocks, the best occupation
    // probes and fresh random points
    let starts: Vec<Vec<f64>> = (0..options.restarts)
        .map(|r| {
            if r % 3 == 0 && r / 3 < ranked.len() {
                ranked[r / 3].2.clone()
            } else if r % 3 == 1 && r / 3 < structured.len() {
                structured[r / 3].2.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream((1u64 << 32) + r as u64);
                let mut g = random_probe(&mut rng, n, cap.min(3.0));
                center(&mut g, &jumps.pi, cap);
                g
            }
        })
        .collect();
    let descents: Vec<(f64, Vec<f64>, usize)> = starts
        .into_par_iter()
        .map(|g| descend(&jumps, which, g, options.iterations, cap))
        .collect();
    for (r, (value, g, e)) in descents.into_iter().enumerate() {
        evaluations += e;
        candidates.push((value, usize::MAX / 2 + r, g));
    }
    candidates.extend(probe_best);
    candidates.extend(structured);
    if let Some(v) = gap_eigenvector {
        // below this weight the back-transformed eigenvector is rounding noise
        // amplified by 1/√π, so those entries are dropped
        const RELIABLE_WEIGHT: f64 = 1e-20;
        let v: Vec<f64> = v
            .iter()
            .zip(&jumps.pi)
            .map(|(&x, &p)| if p >= RELIABLE_WEIGHT { x } else { 0.0 })
            .collect();
        let norm = pi_dot(&jumps.pi, &v, &v).sqrt();
        if norm > 0.0 {
            let steps = [1e-2, -1e-2, 1e-3, -1e-3, 1e-4, -1e-4, 1e-5, -1e-5];
            for (i, eps) in steps.into_iter().enumerate() {
                let mut g: Vec<f64> = v.iter().map(|x| eps * x / norm).collect();
                center(&mut g, &jumps.pi, cap);
                evaluations += 1;
                if let Some(e) = jumps.evaluate(which, &g, false) {
                    candidates.push((e.ratio, usize::MAX - steps.len() + i, g));
                }
            }
        }
    }
    let best = candidates
        .into_iter()
        .filter(|c| c.0.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .ok_or(Error::DegenerateSearch)?;
    Ok(SearchResult {
        constant: which,
        value: best.0,
        witness: best.2,
        evaluations,
    })
}

/// Ratio of the chosen constant at `f = e^g`, for checking witnesses.
pub fn ratio_at(chain: &FiniteChain, which: Constant, g: &[f64]) -> Option<f64> {
    Jumps::new(chain).evaluate(which, g, false).map(|e| e.ratio)
}

/// Constants and curves for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub gap: f64,
    pub alpha_hat: f64,
    pub kappa_hat: f64,
    pub kappa_bound: f64,
    pub curves: Vec<CurvePoint>,
    pub witnesses: Witnesses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    pub alpha: Vec<f64>,
    pub kappa: Vec<f64>,
}
