//! Entropy, relative entropy, Dirichlet forms and the second-order entropy
//! production `π[Lf·L log f] + π[(Lf)²/f]`.
//!
//! All functions act on vectors tabulated over the enumerated states.

use crate::error::{Error, Result};
use crate::generator::{GeneratorMatrix, RateKernel, StationaryMeasure};

/// Default bound `M` on `|log f|`.
pub const DEFAULT_LOG_CAP: f64 = 30.0;

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub fn check_positive(f: &[f64]) -> Result<()> {
    match f.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        Some((index, &value)) => Err(Error::NonPositive { index, value }),
        None => Ok(()),
    }
}

/// `log f` clamped to `[−cap, cap]`, warning when clamping happens.
pub fn capped_log(f: &[f64], cap: f64) -> Vec<f64> {
    let mut clamped = 0usize;
    let out = f
        .iter()
        .map(|&v| {
            let l = v.ln();
            if l.abs() > cap {
                clamped += 1;
                l.clamp(-cap, cap)
            } else {
                l
            }
        })
        .collect();
    if clamped > 0 {
        log::warn!("log f clamped to ±{cap} at {clamped} states");
    }
    out
}

/// `Ent_π(f) = π[f log f] − π[f] log π[f]`.
///
/// Evaluated as `Σ π m φ(f/m)` with `m = π[f]` and
/// `φ(u) = u log u − u + 1 ≥ 0`, which keeps every summand nonnegative and
/// avoids the cancellation of the textbook form near constants.
pub fn entropy(f: &[f64], pi: &StationaryMeasure) -> Result<f64> {
    check_len(pi.len(), f.len())?;
    check_positive(f)?;
    let m = pi.expect(f);
    Ok(pi
        .probs()
        .iter()
        .zip(f)
        .map(|(p, &v)| {
            let u = v / m;
            p * m * (u * (u - 1.0).ln_1p() - (u - 1.0))
        })
        .sum())
}

/// `h(μ|π)`; `+∞` when `μ` charges a `π`-null state.
pub fn relative_entropy(mu: &[f64], pi: &[f64]) -> Result<f64> {
    check_len(pi.len(), mu.len())?;
    let mut h = 0.0;
    for (&m, &p) in mu.iter().zip(pi) {
        if m > 0.0 && p <= 0.0 {
            return Ok(f64::INFINITY);
        }
        if p <= 0.0 {
            continue;
        }
        // μ log(μ/π) − μ + π: each term ≥ 0 and the extra terms sum to zero
        let u = m / p;
        h += if m > 0.0 {
            p * (u * (u - 1.0).ln_1p() - (u - 1.0))
        } else {
            p
        };
    }
    Ok(h)
}

/// `‖μ − π‖_TV = ½ Σ |μ_s − π_s|`.
pub fn tv_distance(mu: &[f64], pi: &[f64]) -> Result<f64> {
    check_len(pi.len(), mu.len())?;
    Ok(0.5 * mu.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

pub fn variance(f: &[f64], pi: &StationaryMeasure) -> f64 {
    let m = pi.expect(f);
    pi.probs().iter().zip(f).map(|(p, v)| p * (v - m) * (v - m)).sum()
}

/// `E(f,g) = ½ Σ π(η) c(η,m) ∇_m f(η) ∇_m g(η)`.
pub fn dirichlet_form(kernel: &RateKernel, pi: &StationaryMeasure, f: &[f64], g: &[f64]) -> Result<f64> {
    check_len(kernel.len(), f.len())?;
    check_len(kernel.len(), g.len())?;
    let space = kernel.space();
    let mut total = 0.0;
    for (s, &p) in pi.probs().iter().enumerate() {
        let mut row = 0.0;
        for k in 0..kernel.n_moves() {
            let c = kernel.rate(s, k);
            if c != 0.0 {
                row += c * space.gradient(f, s, k) * space.gradient(g, s, k);
            }
        }
        total += p * row;
    }
    Ok(0.5 * total)
}

/// `E(f, log f)` from the kernel sum of `(f(mη) − f(η))(log f(mη) − log f(η))`.
pub fn dirichlet_entropy(kernel: &RateKernel, pi: &StationaryMeasure, f: &[f64]) -> Result<f64> {
    check_len(kernel.len(), f.len())?;
    check_positive(f)?;
    let space = kernel.space();
    let mut total = 0.0;
    for (s, &p) in pi.probs().iter().enumerate() {
        let mut row = 0.0;
        for k in 0..kernel.n_moves() {
            let c = kernel.rate(s, k);
            if c != 0.0 {
                let (a, b) = (f[s], f[space.target(s, k)]);
                row += c * (b - a) * (b / a).ln();
            }
        }
        total += p * row;
    }
    Ok(0.5 * total)
}

/// `π[Qf · Q log f] + π[(Qf)²/f]`, with `log f` capped at `log_cap`.
pub fn mlsi_rhs_capped(q: &GeneratorMatrix, pi: &StationaryMeasure, f: &[f64], log_cap: f64) -> Result<f64> {
    check_len(q.dim(), f.len())?;
    check_positive(f)?;
    let qf = q.apply(f);
    let qlog = q.apply(&capped_log(f, log_cap));
    Ok(pi
        .probs()
        .iter()
        .zip(qf.iter().zip(&qlog))
        .zip(f)
        .map(|((p, (a, b)), v)| p * (a * b + a * a / v))
        .sum())
}

pub fn mlsi_rhs(q: &GeneratorMatrix, pi: &StationaryMeasure, f: &[f64]) -> Result<f64> {
    mlsi_rhs_capped(q, pi, f, DEFAULT_LOG_CAP)
}

/// `π[g · Qf]`.
pub fn pairing(q: &GeneratorMatrix, pi: &StationaryMeasure, f: &[f64], g: &[f64]) -> f64 {
    pi.expect(&q.apply(f).iter().zip(g).map(|(a, b)| a * b).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::FiniteChain;
    use crate::models::Model;

    fn half() -> StationaryMeasure {
        StationaryMeasure::new(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let pi = half();
        assert_eq!(entropy(&[2.0, 2.0], &pi).unwrap(), 0.0);
        let expected = 0.5 * (1.5 * 1.5f64.ln() + 0.5 * 0.5f64.ln());
        assert!((entropy(&[1.5, 0.5], &pi).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.130812).abs() < 1e-6);
        assert!(matches!(entropy(&[1.0, 0.0], &pi), Err(Error::NonPositive { index: 1, .. })));
    }

    #[test]
    fn relative_entropy_examples() {
        let pi = [0.2, 0.3, 0.5];
        assert_eq!(relative_entropy(&pi, &pi).unwrap(), 0.0);
        let point = relative_entropy(&[0.0, 1.0, 0.0], &pi).unwrap();
        assert!((point + 0.3f64.ln()).abs() < 1e-15);
        assert_eq!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(relative_entropy(&[1.0], &pi).is_err());
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn dirichlet_form_matches_generator_pairing() {
        let m = Model::hardcore_graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], 0.6).unwrap();
        let chain = FiniteChain::new(&m, 100).unwrap();
        let n = chain.len();
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let g: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).sin() + 2.0).collect();
        let e = dirichlet_form(&chain.kernel, &chain.pi, &f, &g).unwrap();
        assert!((e + pairing(&chain.q, &chain.pi, &f, &g)).abs() < 1e-12);
        let ones = vec![1.0; n];
        assert_eq!(dirichlet_form(&chain.kernel, &chain.pi, &f, &ones).unwrap(), 0.0);
        let pos: Vec<f64> = g.iter().map(|v| v + 1.0).collect();
        let logp: Vec<f64> = pos.iter().map(|v| v.ln()).collect();
        let a = dirichlet_entropy(&chain.kernel, &chain.pi, &pos).unwrap();
        let b = dirichlet_form(&chain.kernel, &chain.pi, &pos, &logp).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn mlsi_rhs_vanishes_on_constants() {
        let chain = FiniteChain::new(&Model::hardcore_graph(2, &[(0, 1)], 1.0).unwrap(), 10).unwrap();
        assert_eq!(mlsi_rhs(&chain.q, &chain.pi, &[3.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn capped_log_clamps() {
        let l = capped_log(&[1e-20, 1.0, 1e20], 50.0);
        assert!((l[0] + 20.0 * 10f64.ln()).abs() < 1e-12);
        let l = capped_log(&[1e-20, 1e20], 10.0);
        assert_eq!(l, vec![-10.0, 10.0]);
    }
}
