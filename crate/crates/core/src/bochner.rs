//! Admissible weights on (state, move, move) triples, the Bochner-type
//! identities they enable, the Γ/R split of `π·c·c` and the bivariate
//! inequality that controls the Γ part.
//!
//! Sums run over charged triples only: `(η, γ, δ)` with both effective
//! rates positive. Every other triple has `π c c = 0` and contributes
//! nothing. Per-state partial sums are computed in parallel and added in
//! state order, so results do not depend on the thread count.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{check_positive, dirichlet_entropy, mlsi_rhs};
use crate::generator::FiniteChain;
use crate::models::{Constraint, Interaction};
use crate::statespace::{Move, MoveKind, StateIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// Per-family weights: `1(η+δx+δy ∈ A)·e^{−β∇⁺x∇⁺yH}` for two births,
    /// `(η(x)−1)/η(x)` for a repeated death, 1 otherwise.
    Family,
    /// `½[c(γη,δ)/c(η,δ) + 1]`. Not admissible in general.
    Canonical,
}

/// `r(η, γ, δ)`: a rule plus sparse per-triple overrides.
#[derive(Debug, Clone)]
pub struct AdmissibleFunction {
    rule: WeightRule,
    overrides: HashMap<(StateIndex, usize, usize), f64>,
}

impl AdmissibleFunction {
    pub fn family() -> Self {
        Self {
            rule: WeightRule::Family,
            overrides: HashMap::new(),
        }
    }

    pub fn canonical() -> Self {
        log::warn!("canonical weight: admissibility not guaranteed, check before use");
        Self {
            rule: WeightRule::Canonical,
            overrides: HashMap::new(),
        }
    }

    pub fn rule(&self) -> WeightRule {
        self.rule
    }

    /// Whether the rule is known to be admissible for every supported family.
    pub fn is_guaranteed(&self) -> bool {
        self.rule == WeightRule::Family && self.overrides.is_empty()
    }

    pub fn set_override(&mut self, s: StateIndex, gamma: usize, delta: usize, value: f64) {
        self.overrides.insert((s, gamma, delta), value);
    }

    /// `r(η_s, γ, δ)` with moves given by their dense indices.
    pub fn value(&self, chain: &FiniteChain, s: StateIndex, gamma: usize, delta: usize) -> f64 {
        if !self.overrides.is_empty() {
            if let Some(&v) = self.overrides.get(&(s, gamma, delta)) {
                return v;
            }
        }
        match self.rule {
            WeightRule::Family => family_weight(chain, s, gamma, delta),
            WeightRule::Canonical => {
                let c = chain.kernel.rate(s, delta);
                if c == 0.0 {
                    return 0.0;
                }
                let t = chain.space().target(s, gamma);
                0.5 * (chain.kernel.rate(t, delta) / c + 1.0)
            }
        }
    }
}

/// The family weight for the exact finite models.
pub fn admissible_r(chain: &FiniteChain) -> Result<AdmissibleFunction> {
    // every finite family is supported; the signature leaves room for
    // families without a known admissible weight
    let _ = chain.family();
    Ok(AdmissibleFunction::family())
}

fn family_weight(chain: &FiniteChain, s: StateIndex, gamma: usize, delta: usize) -> f64 {
    let space = chain.space();
    let (g, d) = (Move::from_index(gamma), Move::from_index(delta));
    match (g.kind, d.kind) {
        (MoveKind::Birth, MoveKind::Birth) => {
            // 1(η + δx + δy ∈ A); blocked births point back at the state
            if space.is_blocked(s, gamma) || space.is_blocked(s, delta) {
                return 0.0;
            }
            let t = space.target(s, gamma);
            if space.is_blocked(t, delta) {
                return 0.0;
            }
            let model = space.model();
            match model.interaction() {
                Interaction::None => 1.0,
                _ => {
                    let second = model.birth_energy_second(space.state(s).counts(), g.site, d.site);
                    (-model.beta() * second).exp()
                }
            }
        }
        (MoveKind::Death, MoveKind::Death) if g.site == d.site => {
            let n = space.state(s).count(g.site);
            if n > 0 {
                f64::from(n - 1) / f64::from(n)
            } else {
                1.0
            }
        }
        _ => 1.0,
    }
}

/// Charged moves of each state: `(move index, rate, target)`.
#[derive(Debug, Clone)]
struct ChargedMoves(Vec<Vec<(usize, f64, StateIndex)>>);

impl ChargedMoves {
    fn new(chain: &FiniteChain) -> Self {
        let space = chain.space();
        Self(
            (0..chain.len())
                .map(|s| {
                    (0..space.n_moves())
                        .filter_map(|k| {
                            let c = chain.kernel.rate(s, k);
                            (c > 0.0).then(|| (k, c, space.target(s, k)))
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

/// One charged triple.
#[derive(Debug, Clone, Copy)]
pub struct Triple {
    pub state: StateIndex,
    pub gamma: usize,
    pub delta: usize,
    /// `γη`, `δη`, `δγη`, `γδη`.
    pub gamma_eta: StateIndex,
    pub delta_eta: StateIndex,
    pub delta_gamma_eta: StateIndex,
    pub gamma_delta_eta: StateIndex,
    /// `π(η) c(η,γ) c(η,δ)`.
    pub pcc: f64,
    pub r: f64,
}

impl Triple {
    /// `R(η,γ,δ) = π c c r`.
    pub fn r_mass(&self) -> f64 {
        self.pcc * self.r
    }

    /// `Γ(η,γ,δ) = π c c − R`.
    pub fn gamma_mass(&self) -> f64 {
        self.pcc - self.r_mass()
    }

    /// `∇γ∇δ f(η) = f(δγη) − f(γη) − f(δη) + f(η)`.
    pub fn second_difference(&self, f: &[f64]) -> f64 {
        f[self.delta_gamma_eta] - f[self.gamma_eta] - f[self.delta_eta] + f[self.state]
    }
}

/// The measures `π·c·c`, `R` and `Γ` on charged triples.
#[derive(Debug, Clone)]
pub struct GammaMeasure<'a> {
    chain: &'a FiniteChain,
    weight: &'a AdmissibleFunction,
    charged: ChargedMoves,
}

impl<'a> GammaMeasure<'a> {
    pub fn new(chain: &'a FiniteChain, weight: &'a AdmissibleFunction) -> Self {
        Self {
            chain,
            weight,
            charged: ChargedMoves::new(chain),
        }
    }

    pub fn chain(&self) -> &FiniteChain {
        self.chain
    }

    pub fn n_triples(&self) -> usize {
        self.charged.0.iter().map(|c| c.len() * c.len()).sum()
    }

    /// Visits the charged triples of state `s` in move order.
    pub fn for_each_triple<F: FnMut(&Triple)>(&self, s: StateIndex, mut visit: F) {
        let space = self.chain.space();
        let p = self.chain.pi.probs()[s];
        let moves = &self.charged.0[s];
        for &(g, cg, tg) in moves {
            for &(d, cd, td) in moves {
                let triple = Triple {
                    state: s,
                    gamma: g,
                    delta: d,
                    gamma_eta: tg,
                    delta_eta: td,
                    delta_gamma_eta: space.target(tg, d),
                    gamma_delta_eta: space.target(td, g),
                    pcc: p * cg * cd,
                    r: self.weight.value(self.chain, s, g, d),
                };
                visit(&triple);
            }
        }
    }

    /// Sums a per-triple vector quantity over every state.
    pub fn sum<const K: usize, F>(&self, term: F) -> [f64; K]
    where
        F: Fn(&Triple) -> [f64; K] + Sync,
    {
        let partial: Vec<[f64; K]> = (0..self.chain.len())
            .into_par_iter()
            .map(|s| {
                let mut acc = [0.0; K];
                self.for_each_triple(s, |t| {
                    for (a, v) in acc.iter_mut().zip(term(t)) {
                        *a += v;
                    }
                });
                acc
            })
            .collect();
        let mut total = [0.0; K];
        for row in partial {
            for (a, v) in total.iter_mut().zip(row) {
                *a += v;
            }
        }
        total
    }

    /// Largest value of a per-triple quantity.
    pub fn max<F>(&self, term: F) -> f64
    where
        F: Fn(&Triple) -> f64 + Sync,
    {
        (0..self.chain.len())
            .into_par_iter()
            .map(|s| {
                let mut m = 0.0f64;
                self.for_each_triple(s, |t| m = m.max(term(t)));
                m
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Max residuals of the three admissibility conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Largest weight on a charged non-commuting triple.
    pub condition_a: f64,
    /// Largest `|r(η,γ,δ) − r(η,δ,γ)|`.
    pub condition_b: f64,
    /// Largest balance violation on triples away from the occupancy cap.
    pub condition_c: f64,
    /// Largest balance violation on triples touching the occupancy cap.
    pub truncation: f64,
    pub rule: WeightRule,
    pub guaranteed: bool,
}

impl AdmissibilityReport {
    pub fn max_interior(&self) -> f64 {
        self.condition_a.max(self.condition_b).max(self.condition_c)
    }
}

/// Exhaustive check of support, symmetry and balance.
///
/// Balance `c(η,δ) r(η,γ,δ) = c(γη,δ) r(γη,γ⁻¹,δ)` is checked for every
/// state, every charged `γ` and every move `δ`.
pub fn check_admissibility(chain: &FiniteChain, weight: &AdmissibleFunction) -> AdmissibilityReport {
    let measure = GammaMeasure::new(chain, weight);
    let condition_a = measure.max(|t| {
        if t.delta_gamma_eta != t.gamma_delta_eta {
            t.r.abs()
        } else {
            0.0
        }
    });
    let condition_b = measure.max(|t| (t.r - weight.value(chain, t.state, t.delta, t.gamma)).abs());

    let space = chain.space();
    let cap = space.model().occupancy_cap();
    let n_moves = space.n_moves();
    let balance: Vec<(f64, f64)> = (0..chain.len())
        .into_par_iter()
        .map(|s| {
            let (mut interior, mut boundary) = (0.0f64, 0.0f64);
            let counts = space.state(s).counts();
            for &(g, _, t) in &measure.charged.0[s] {
                let back = Move::from_index(g).inverse().index();
                for d in 0..n_moves {
                    let lhs = chain.kernel.rate(s, d) * weight.value(chain, s, g, d);
                    let rhs = chain.kernel.rate(t, d) * weight.value(chain, t, back, d);
                    let v = (lhs - rhs).abs();
                    let near_cap = cap.is_some_and(|n| {
                        let sites = [Move::from_index(g).site, Move::from_index(d).site];
                        sites.iter().any(|&x| counts[x] + 1 >= n)
                    });
                    if near_cap {
                        boundary = boundary.max(v);
                    } else {
                        interior = interior.max(v);
                    }
                }
            }
            (interior, boundary)
        })
        .collect();
    let (condition_c, truncation) = balance
        .into_iter()
        .fold((0.0f64, 0.0f64), |(a, b), (x, y)| (a.max(x), b.max(y)));
    AdmissibilityReport {
        condition_a,
        condition_b,
        condition_c,
        truncation,
        rule: weight.rule(),
        guaranteed: weight.is_guaranteed(),
    }
}

/// Absolute residuals of the two identities with the scales they are
/// measured against (sum of absolute values of all terms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BochnerResiduals {
    pub boch1: f64,
    pub boch1_scale: f64,
    pub boch2: f64,
    pub boch2_scale: f64,
}

impl BochnerResiduals {
    pub fn relative(&self) -> (f64, f64) {
        (
            self.boch1 / self.boch1_scale.max(f64::MIN_POSITIVE),
            self.boch2 / self.boch2_scale.max(f64::MIN_POSITIVE),
        )
    }
}

/// Evaluates both sides of
/// `Σ R ∇γf ∇δg = ¼ Σ R ∇γ∇δf ∇γ∇δg` and of
/// `Σ R ∇γf ∇δf / f = ¼ Σ R [∇γ(∇δf / f∘δ) ∇γ∇δf − ∇γ((∇δf)² / (f·f∘δ)) ∇γf]`.
pub fn bochner_identities(measure: &GammaMeasure<'_>, f: &[f64], g: &[f64]) -> Result<BochnerResiduals> {
    let n = measure.chain().len();
    for v in [f, g] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    check_positive(f)?;
    let [l1, r1, s1, l2, r2, s2] = measure.sum(|t| {
        let w = t.r_mass();
        if w == 0.0 {
            return [0.0; 6];
        }
        let (a, b, c, d) = (
            f[t.state],
            f[t.delta_eta],
            f[t.gamma_eta],
            f[t.delta_gamma_eta],
        );
        let grad_gf = c - a;
        let grad_dg = g[t.delta_eta] - g[t.state];
        let lhs1 = w * grad_gf * grad_dg;
        let rhs1 = 0.25 * w * t.second_difference(f) * t.second_difference(g);

        let lhs2 = w * grad_gf * (b - a) / a;
        let second = d - c - b + a;
        let ratio_step = (d - c) / d - (b - a) / b;
        let square_step = (d - c) * (d - c) / (c * d) - (b - a) * (b - a) / (a * b);
        let rhs2 = 0.25 * w * (ratio_step * second - square_step * grad_gf);
        [lhs1, rhs1, lhs1.abs() + rhs1.abs(), lhs2, rhs2, lhs2.abs() + rhs2.abs()]
    });
    Ok(BochnerResiduals {
        boch1: (l1 - r1).abs(),
        boch1_scale: s1,
        boch2: (l2 - r2).abs(),
        boch2_scale: s2,
    })
}

/// `∇γf ∇δ log f + ∇γf ∇δf / f` at a triple.
fn entropy_production_term(t: &Triple, f: &[f64]) -> f64 {
    let (a, b, c) = (f[t.state], f[t.delta_eta], f[t.gamma_eta]);
    (c - a) * ((b / a).ln() + (b - a) / a)
}

/// `Σ R (∇γf ∇δ log f + ∇γf ∇δf / f)`, nonnegative for admissible `r`.
pub fn gamma_positivity(measure: &GammaMeasure<'_>, f: &[f64]) -> Result<f64> {
    check_positive(f)?;
    let [v] = measure.sum(|t| [t.r_mass() * entropy_production_term(t, f)]);
    Ok(v)
}

/// `T(α, β) = α log α − α log β + β − α ≥ 0`.
pub fn four_term_summand(alpha: f64, beta: f64) -> f64 {
    alpha * (alpha / beta).ln() + beta - alpha
}

/// Per-triple integrand of the R-side after the Bochner step, with
/// `a = f(η)`, `b = f(δη)`, `c = f(γη)`, `d = f(δγη)`, together with its
/// four-summand decomposition.
pub fn four_term_pair(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let second = d - c - b + a;
    let x = second * (a * d / (b * c)).ln() + ((d - c) / d - (b - a) / b) * second
        - ((d - c) * (d - c) / (c * d) - (b - a) * (b - a) / (a * b)) * (c - a);
    let parts = four_term_summand(d, b * c / a)
        + four_term_summand(c, d * a / b)
        + four_term_summand(b, d * a / c)
        + four_term_summand(a, b * c / d);
    (x, parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourTermCheck {
    /// Smallest per-triple integrand over the R-support.
    pub min_integrand: f64,
    /// Largest |integrand − sum of its four summands|, relative to the
    /// summands' size.
    pub max_decomposition_error: f64,
    /// `|R-side − ¼ Σ R · integrand|`.
    pub r_side_error: f64,
}

pub fn four_term_check(measure: &GammaMeasure<'_>, f: &[f64]) -> Result<FourTermCheck> {
    check_positive(f)?;
    let r_side = gamma_positivity(measure, f)?;
    let min_integrand = -measure.max(|t| {
        if t.r_mass() == 0.0 {
            return 0.0;
        }
        let (x, _) = four_term_pair(f[t.state], f[t.delta_eta], f[t.gamma_eta], f[t.delta_gamma_eta]);
        (-x).max(0.0)
    });
    let max_decomposition_error = measure.max(|t| {
        if t.r_mass() == 0.0 {
            return 0.0;
        }
        let (x, parts) = four_term_pair(f[t.state], f[t.delta_eta], f[t.gamma_eta], f[t.delta_gamma_eta]);
        (x - parts).abs() / parts.abs().max(1.0)
    });
    let [quarter] = measure.sum(|t| {
        if t.r_mass() == 0.0 {
            return [0.0];
        }
        let (x, _) = four_term_pair(f[t.state], f[t.delta_eta], f[t.gamma_eta], f[t.delta_gamma_eta]);
        [0.25 * t.r_mass() * x]
    });
    Ok(FourTermCheck {
        min_integrand,
        max_decomposition_error,
        r_side_error: (r_side - quarter).abs(),
    })
}

/// Γ-side and R-side of the entropy production and their reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaDecomposition {
    pub gamma_side: f64,
    pub r_side: f64,
    pub mlsi_rhs: f64,
    /// `E(f, log f)`.
    pub dirichlet_entropy: f64,
    /// `|Γ-side + R-side − mlsi_rhs|`.
    pub reconstruction_error: f64,
    /// Largest `|Γ + R − π c c|` over triples.
    pub max_entry_error: f64,
}

pub fn gamma_decomposition(measure: &GammaMeasure<'_>, f: &[f64]) -> Result<GammaDecomposition> {
    check_positive(f)?;
    let chain = measure.chain();
    let [gamma_side, r_side] = measure.sum(|t| {
        let term = entropy_production_term(t, f);
        [t.gamma_mass() * term, t.r_mass() * term]
    });
    let max_entry_error = measure.max(|t| (t.gamma_mass() + t.r_mass() - t.pcc).abs());
    let rhs = mlsi_rhs(&chain.q, &chain.pi, f)?;
    Ok(GammaDecomposition {
        gamma_side,
        r_side,
        mlsi_rhs: rhs,
        dirichlet_entropy: dirichlet_entropy(&chain.kernel, &chain.pi, f)?,
        reconstruction_error: (gamma_side + r_side - rhs).abs(),
        max_entry_error,
    })
}

/// `Γ-side / E(f, log f)`; a lower bound for `mlsi_rhs / E(f, log f)`
/// whenever the R-side is nonnegative.
pub fn final_inequality_ratio(measure: &GammaMeasure<'_>, f: &[f64]) -> Result<f64> {
    let d = gamma_decomposition(measure, f)?;
    if d.dirichlet_entropy <= 0.0 {
        return Err(Error::ConstantFunction);
    }
    Ok(d.gamma_side / d.dirichlet_entropy)
}

/// Both sides of the bivariate inequality
/// `(a−1)log b + (b−1)log a + 2(a−1)(b−1) ≥ −[(a−1)log a + (b−1)log b + (a−1)²/a + (b−1)²/b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyInequality {
    pub lhs: f64,
    pub rhs: f64,
    /// Sum of absolute values of all terms.
    pub scale: f64,
    pub holds: bool,
}

impl KeyInequality {
    pub fn slack(&self) -> f64 {
        self.lhs - self.rhs
    }
}

pub fn key_inequality(a: f64, b: f64) -> Result<KeyInequality> {
    for (index, value) in [(0, a), (1, b)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositive { index, value });
        }
    }
    let (la, lb) = (a.ln(), b.ln());
    let (am, bm) = (a - 1.0, b - 1.0);
    let lhs_terms = [am * lb, bm * la, 2.0 * am * bm];
    let rhs_terms = [am * la, bm * lb, am * am / a, bm * bm / b];
    let lhs: f64 = lhs_terms.iter().sum();
    let rhs: f64 = -rhs_terms.iter().sum::<f64>();
    let scale: f64 = lhs_terms.iter().chain(&rhs_terms).map(|v| v.abs()).sum();
    Ok(KeyInequality {
        lhs,
        rhs,
        scale,
        holds: lhs >= rhs - 1e-12 * scale,
    })
}

/// The same inequality written with gradients at a state: `f_eta = f(η)`,
/// `f_gamma = f(γη)`, `f_delta = f(δη)`. Returns `(lhs, rhs)`.
pub fn key_inequality_gradient_form(f_eta: f64, f_gamma: f64, f_delta: f64) -> (f64, f64) {
    let (gg, gd) = (f_gamma - f_eta, f_delta - f_eta);
    let (lg, ld) = ((f_gamma / f_eta).ln(), (f_delta / f_eta).ln());
    let lhs = gg * ld + gd * lg + 2.0 * gg * gd / f_eta;
    let rhs = -(gg * lg + gd * ld + gg * gg / f_gamma + gd * gd / f_delta);
    (lhs, rhs)
}

/// Result of a random search for violations of the `n`-variable extension
/// `Σ_{i≠j} [(a_i−1) log a_j + (a_i−1)(a_j−1)] ≥ −Σ_i [(a_i−1) log a_i + (a_i−1)²/a_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSearch {
    pub variables: usize,
    pub samples: usize,
    /// Smallest `(lhs − rhs) / scale` seen.
    pub min_relative_slack: f64,
    pub witness: Vec<f64>,
}

pub fn multivariate_slack(a: &[f64]) -> (f64, f64) {
    let mut lhs = 0.0;
    let mut scale = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        for (j, &aj) in a.iter().enumerate() {
            if i != j {
                let t = (ai - 1.0) * aj.ln() + (ai - 1.0) * (aj - 1.0);
                lhs += t;
                scale += t.abs();
            }
        }
    }
    let mut rhs = 0.0;
    for &ai in a {
        let t = (ai - 1.0) * ai.ln() + (ai - 1.0) * (ai - 1.0) / ai;
        rhs -= t;
        scale += t.abs();
    }
    (lhs - rhs, scale)
}

/// Log-uniform random search over `(10^{−span}, 10^{span})^n`.
pub fn multivariate_counterexample_search(
    variables: usize,
    samples: usize,
    span: f64,
    seed: u64,
) -> CounterexampleSearch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut witness = vec![1.0; variables];
    let mut a = vec![0.0; variables];
    for _ in 0..samples {
        for v in a.iter_mut() {
            *v = 10f64.powf(rng.random_range(-span..span));
        }
        let (slack, scale) = multivariate_slack(&a);
        let rel = slack / scale.max(f64::MIN_POSITIVE);
        if rel < best {
            best = rel;
            witness.copy_from_slice(&a);
        }
    }
    CounterexampleSearch {
        variables,
        samples,
        min_relative_slack: best,
        witness,
    }
}

/// Residual report as written by the command-line front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub condition_a: f64,
    pub condition_b: f64,
    pub condition_c: f64,
    pub boch1: f64,
    pub boch2: f64,
    pub truncation: f64,
}

/// Whether the occupancy truncation is in play for the chain's model.
pub fn is_truncated(chain: &FiniteChain) -> bool {
    matches!(chain.space().model().constraint(), Constraint::Occupancy { .. })
}
