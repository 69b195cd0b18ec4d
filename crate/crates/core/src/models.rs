//! Model families: exclusion (hardcore) systems, loss networks, long hard
//! rods, interacting lattice gases and the two-site convex example, plus the
//! continuum Glauber model description used by the simulator.
//!
//! Every discrete model is a site set with strictly positive intensities,
//! a decreasing allowed set and, for the gas families, a Hamiltonian. The
//! allowed set is described by a [`Constraint`] whose only query is
//! [`Model::can_add`]: since allowed sets are decreasing, "may one more
//! particle be placed at `x`" is enough to enumerate them and to apply moves.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statespace::{enumerate_states, Configuration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    HardcoreGraph,
    LossNetwork,
    HardRods,
    LatticeGas,
    TwoSiteConvex,
}

impl Family {
    /// Families whose only interaction is an exclusion rule.
    pub fn is_hardcore(self) -> bool {
        matches!(
            self,
            Family::HardcoreGraph | Family::LossNetwork | Family::HardRods
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::HardcoreGraph => "hardcore-graph",
            Family::LossNetwork => "loss-network",
            Family::HardRods => "hard-rods",
            Family::LatticeGas => "lattice-gas",
            Family::TwoSiteConvex => "two-site-convex",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Allowed-set description.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// 0/1 occupancy; two conflicting sites are never both occupied.
    Exclusion { conflicts: Vec<Vec<usize>> },
    /// Route occupancies with link capacities: `Σ_{x ∋ e} η(x) ≤ C(e)`.
    /// Links without capacity (`None`) are unconstrained; a route whose
    /// links are all unconstrained is truncated at `n_max`.
    Capacity {
        routes: Vec<Vec<usize>>,
        capacities: Vec<Option<u32>>,
        n_max: u32,
    },
    /// Per-site occupancy truncation `η(x) ≤ n_max`.
    Occupancy { n_max: u32 },
}

/// Increasing convex `K(u) = coefficient · u^exponent`, `exponent ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexPotential {
    pub coefficient: f64,
    pub exponent: f64,
}

impl Default for ConvexPotential {
    fn default() -> Self {
        Self {
            coefficient: 1.0,
            exponent: 2.0,
        }
    }
}

impl ConvexPotential {
    pub fn eval(&self, u: f64) -> f64 {
        self.coefficient * u.powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Interaction {
    None,
    /// `H(η) = ½ Σ_{x,y} h(x−y) η(x) η(y)` on a box of `Z^d`.
    Pair {
        coupling: Vec<Vec<f64>>,
        /// Symmetric closure of the displacement table, zero offset excluded.
        offsets: BTreeMap<Vec<i32>, f64>,
        beta: f64,
    },
    /// `H(η) = K(Σ_x η(x))`.
    TotalCount { potential: ConvexPotential, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    family: Family,
    intensity: Vec<f64>,
    constraint: Constraint,
    interaction: Interaction,
}

/// Parameters of an interacting lattice gas on `Λ_L = Z^d ∩ [1, L]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGasParams {
    pub dimension: usize,
    pub side: usize,
    /// `(offset, h(offset))`; the table is closed under `offset → −offset`.
    pub potential: Vec<(Vec<i32>, f64)>,
    pub beta: f64,
    pub z: f64,
    pub n_max: u32,
}

impl Model {
    /// Hardcore model on a simple graph with constant intensity `rho`.
    pub fn hardcore_graph(n_vertices: usize, edges: &[(usize, usize)], rho: f64) -> Result<Self> {
        Self::hardcore_graph_with_intensities(n_vertices, edges, vec![rho; n_vertices])
    }

    pub fn hardcore_graph_with_intensities(
        n_vertices: usize,
        edges: &[(usize, usize)],
        intensity: Vec<f64>,
    ) -> Result<Self> {
        let mut conflicts = vec![Vec::new(); n_vertices];
        for &(a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::InvalidModel(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n_vertices}"
                )));
            }
            if a == b {
                return Err(Error::InvalidModel(format!("self-loop at vertex {a}")));
            }
            if conflicts[a].contains(&b) {
                return Err(Error::InvalidModel(format!("duplicate edge ({a}, {b})")));
            }
            conflicts[a].push(b);
            conflicts[b].push(a);
        }
        for c in &mut conflicts {
            c.sort_unstable();
        }
        Self::build(
            Family::HardcoreGraph,
            intensity,
            Constraint::Exclusion { conflicts },
            Interaction::None,
        )
    }

    /// Non-touching horizontal and vertical rods of length `k` in the grid
    /// `Z^2 ∩ [0, L]^2`.
    pub fn hard_rods(side: usize, rod_length: usize, rho: f64) -> Result<Self> {
        let geometry = RodGeometry::new(side, rod_length)?;
        let n = geometry.rods.len();
        Self::build(
            Family::HardRods,
            vec![rho; n],
            Constraint::Exclusion {
                conflicts: geometry.conflicts(),
            },
            Interaction::None,
        )
    }

    /// Loss network: `routes[x]` lists the links used by route `x`.
    pub fn loss_network(
        capacities: Vec<u32>,
        routes: Vec<Vec<usize>>,
        intensity: Vec<f64>,
    ) -> Result<Self> {
        Self::loss_network_with_infinite_links(
            capacities.into_iter().map(Some).collect(),
            routes,
            intensity,
            u32::MAX,
        )
    }

    pub fn loss_network_with_infinite_links(
        capacities: Vec<Option<u32>>,
        routes: Vec<Vec<usize>>,
        intensity: Vec<f64>,
        n_max: u32,
    ) -> Result<Self> {
        if routes.len() != intensity.len() {
            return Err(Error::InvalidModel(format!(
                "{} routes but {} intensities",
                routes.len(),
                intensity.len()
            )));
        }
        for (x, route) in routes.iter().enumerate() {
            if route.is_empty() {
                return Err(Error::InvalidModel(format!("route {x} uses no link")));
            }
            for &e in route {
                if e >= capacities.len() {
                    return Err(Error::InvalidModel(format!(
                        "route {x} uses link {e}, but only {} links exist",
                        capacities.len()
                    )));
                }
            }
            let bounded = route.iter().any(|&e| capacities[e].is_some());
            if !bounded && n_max == u32::MAX {
                return Err(Error::InvalidModel(format!(
                    "route {x} only uses infinite-capacity links; set n_max"
                )));
            }
        }
        Self::build(
            Family::LossNetwork,
            intensity,
            Constraint::Capacity {
                routes,
                capacities,
                n_max,
            },
            Interaction::None,
        )
    }

    pub fn lattice_gas(params: LatticeGasParams) -> Result<Self> {
        let LatticeGasParams {
            dimension,
            side,
            potential,
            beta,
            z,
            n_max,
        } = params;
        if dimension == 0 || side == 0 {
            return Err(Error::InvalidModel("lattice gas needs d ≥ 1 and L ≥ 1".into()));
        }
        check_beta(beta)?;
        let mut offsets = BTreeMap::new();
        for (offset, value) in potential {
            if offset.len() != dimension {
                return Err(Error::InvalidModel(format!(
                    "potential offset {offset:?} does not have dimension {dimension}"
                )));
            }
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "h{offset:?} = {value} must be finite and nonnegative"
                )));
            }
            if offset.iter().all(|&o| o == 0) {
                if value != 0.0 {
                    return Err(Error::InvalidModel("h(0) must vanish".into()));
                }
                continue;
            }
            let neg: Vec<i32> = offset.iter().map(|o| -o).collect();
            for key in [offset, neg] {
                if let Some(&old) = offsets.get(&key) {
                    if old != value {
                        return Err(Error::InvalidModel(format!(
                            "h is not even: h{key:?} given as both {old} and {value}"
                        )));
                    }
                }
                offsets.insert(key, value);
            }
        }
        let coords = box_sites(dimension, side);
        let n = coords.len();
        let mut coupling = vec![vec![0.0; n]; n];
        for (x, cx) in coords.iter().enumerate() {
            for (y, cy) in coords.iter().enumerate() {
                let d: Vec<i32> = cx.iter().zip(cy).map(|(a, b)| a - b).collect();
                coupling[x][y] = offsets.get(&d).copied().unwrap_or(0.0);
            }
        }
        Self::build(
            Family::LatticeGas,
            vec![z; n],
            Constraint::Occupancy { n_max },
            Interaction::Pair {
                coupling,
                offsets,
                beta,
            },
        )
    }

    /// Two sites with `H(η) = K(η₁ + η₂)`.
    pub fn two_site_convex(potential: ConvexPotential, beta: f64, z: f64, n_max: u32) -> Result<Self> {
        check_beta(beta)?;
        if !(potential.coefficient > 0.0 && potential.exponent >= 1.0) {
            return Err(Error::InvalidModel(
                "K(u) = c·u^p must have c > 0 and p ≥ 1 (increasing and convex)".into(),
            ));
        }
        Self::build(
            Family::TwoSiteConvex,
            vec![z; 2],
            Constraint::Occupancy { n_max },
            Interaction::TotalCount { potential, beta },
        )
    }

    fn build(
        family: Family,
        intensity: Vec<f64>,
        constraint: Constraint,
        interaction: Interaction,
    ) -> Result<Self> {
        if intensity.is_empty() {
            return Err(Error::InvalidModel("model has no sites".into()));
        }
        if let Some((x, v)) = intensity
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidModel(format!(
                "intensity at site {x} is {v}; it must be finite and > 0"
            )));
        }
        Ok(Self {
            family,
            intensity,
            constraint,
            interaction,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_sites(&self) -> usize {
        self.intensity.len()
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub fn beta(&self) -> f64 {
        match &self.interaction {
            Interaction::None => 0.0,
            Interaction::Pair { beta, .. } | Interaction::TotalCount { beta, .. } => *beta,
        }
    }

    /// Occupancy truncation of the gas families.
    pub fn occupancy_cap(&self) -> Option<u32> {
        match self.constraint {
            Constraint::Occupancy { n_max } => Some(n_max),
            _ => None,
        }
    }

    /// Whether `counts + δ_site` is allowed, given that `counts` is.
    pub fn can_add(&self, counts: &[u32], site: usize) -> bool {
        match &self.constraint {
            Constraint::Exclusion { conflicts } => {
                counts[site] == 0 && conflicts[site].iter().all(|&y| counts[y] == 0)
            }
            Constraint::Capacity {
                routes,
                capacities,
                n_max,
            } => {
                if counts[site] >= *n_max {
                    return false;
                }
                routes[site].iter().all(|&e| match capacities[e] {
                    None => true,
                    Some(c) => {
                        let load: u64 = routes
                            .iter()
                            .enumerate()
                            .filter(|(_, r)| r.contains(&e))
                            .map(|(x, _)| u64::from(counts[x]))
                            .sum();
                        load < u64::from(c)
                    }
                })
            }
            Constraint::Occupancy { n_max } => counts[site] < *n_max,
        }
    }

    /// Membership in the allowed set `A`.
    pub fn is_allowed(&self, counts: &[u32]) -> bool {
        if counts.len() != self.n_sites() {
            return false;
        }
        match &self.constraint {
            Constraint::Exclusion { conflicts } => counts.iter().enumerate().all(|(x, &c)| {
                c <= 1 && (c == 0 || conflicts[x].iter().all(|&y| counts[y] == 0))
            }),
            Constraint::Capacity {
                routes,
                capacities,
                n_max,
            } => {
                counts.iter().all(|&c| c <= *n_max)
                    && capacities.iter().enumerate().all(|(e, cap)| match cap {
                        None => true,
                        Some(c) => {
                            let load: u64 = routes
                                .iter()
                                .enumerate()
                                .filter(|(_, r)| r.contains(&e))
                                .map(|(x, _)| u64::from(counts[x]))
                                .sum();
                            load <= u64::from(*c)
                        }
                    })
            }
            Constraint::Occupancy { n_max } => counts.iter().all(|&c| c <= *n_max),
        }
    }

    /// `H(η)`; the exclusion families have none.
    pub fn hamiltonian(&self, eta: &Configuration) -> Result<f64> {
        match &self.interaction {
            Interaction::None => Err(Error::NoHamiltonian {
                family: self.family,
            }),
            Interaction::Pair { coupling, .. } => {
                let c = eta.counts();
                let mut h = 0.0;
                for (x, row) in coupling.iter().enumerate() {
                    if c[x] == 0 {
                        continue;
                    }
                    for (y, &v) in row.iter().enumerate() {
                        h += v * f64::from(c[x]) * f64::from(c[y]);
                    }
                }
                Ok(0.5 * h)
            }
            Interaction::TotalCount { potential, .. } => Ok(potential.eval(eta.total() as f64)),
        }
    }

    /// `∇⁺_x H(η)`, the energy cost of adding a particle at `x`.
    pub fn birth_energy(&self, counts: &[u32], site: usize) -> f64 {
        match &self.interaction {
            Interaction::None => 0.0,
            Interaction::Pair { coupling, .. } => coupling[site]
                .iter()
                .zip(counts)
                .map(|(h, &c)| h * f64::from(c))
                .sum(),
            Interaction::TotalCount { potential, .. } => {
                let n: f64 = counts.iter().map(|&c| f64::from(c)).sum();
                potential.eval(n + 1.0) - potential.eval(n)
            }
        }
    }

    /// `∇⁺_x ∇⁺_y H(η)`.
    pub fn birth_energy_second(&self, counts: &[u32], x: usize, y: usize) -> f64 {
        match &self.interaction {
            Interaction::None => 0.0,
            Interaction::Pair { coupling, .. } => coupling[x][y],
            Interaction::TotalCount { potential, .. } => {
                let n: f64 = counts.iter().map(|&c| f64::from(c)).sum();
                potential.eval(n + 2.0) - 2.0 * potential.eval(n + 1.0) + potential.eval(n)
            }
        }
    }

    /// Unnormalized log-weight of the stationary measure:
    /// `Σ_x [η(x) ln ν(x) − ln η(x)!] − β H(η)`.
    pub fn log_weight(&self, eta: &Configuration) -> f64 {
        let mut w = 0.0;
        for (&c, &nu) in eta.counts().iter().zip(&self.intensity) {
            if c > 0 {
                w += f64::from(c) * nu.ln() - ln_factorial(c);
            }
        }
        if !matches!(self.interaction, Interaction::None) {
            // hamiltonian never fails for interacting families
            w -= self.beta() * self.hamiltonian(eta).unwrap_or(0.0);
        }
        w
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("β = {beta} must be finite and ≥ 0")))
    }
}

pub(crate) fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}

/// Sites of `Z^d ∩ [1, L]^d` in lexicographic order.
fn box_sites(dimension: usize, side: usize) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for _ in 0..dimension {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (1..=side as i32).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

/// Rods of length `k` (k+1 vertices) in the grid `Z^2 ∩ [0, L]^2`:
/// horizontal rods first, then vertical, each in lexicographic order of the
/// lower-left vertex.
#[derive(Debug, Clone)]
pub struct RodGeometry {
    pub side: usize,
    pub rod_length: usize,
    pub rods: Vec<Vec<(i32, i32)>>,
}

impl RodGeometry {
    pub fn new(side: usize, rod_length: usize) -> Result<Self> {
        if rod_length == 0 || rod_length > side {
            return Err(Error::InvalidModel(format!(
                "rod length {rod_length} must lie in 1..={side}"
            )));
        }
        let (l, k) = (side as i32, rod_length as i32);
        let mut rods = Vec::new();
        for u in 0..=l - k {
            for v in 0..=l {
                rods.push((0..=k).map(|i| (u + i, v)).collect());
            }
        }
        for u in 0..=l {
            for v in 0..=l - k {
                rods.push((0..=k).map(|i| (u, v + i)).collect());
            }
        }
        Ok(Self {
            side,
            rod_length,
            rods,
        })
    }

    /// Two distinct rods conflict iff they share a vertex.
    pub fn conflicts(&self) -> Vec<Vec<usize>> {
        let mut by_vertex: HashMap<(i32, i32), Vec<usize>> = HashMap::new();
        for (r, rod) in self.rods.iter().enumerate() {
            for &v in rod {
                by_vertex.entry(v).or_default().push(r);
            }
        }
        let mut conflicts = vec![Vec::new(); self.rods.len()];
        for (r, rod) in self.rods.iter().enumerate() {
            let mut c: Vec<usize> = rod
                .iter()
                .flat_map(|v| by_vertex[v].iter().copied())
                .filter(|&s| s != r)
                .collect();
            c.sort_unstable();
            c.dedup();
            conflicts[r] = c;
        }
        conflicts
    }
}

/// `ε(β) = Σ_x (1 − e^{−β h(x)})` for the lattice gas.
pub fn epsilon_beta(model: &Model) -> Result<f64> {
    match &model.interaction {
        Interaction::Pair { offsets, beta, .. } => Ok(offsets
            .values()
            .map(|&h| -(-beta * h).exp_m1())
            .sum()),
        _ => Err(Error::UnsupportedFamily {
            family: model.family,
            operation: "epsilon_beta",
        }),
    }
}

// ---------------------------------------------------------------------------
// Bound constants

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon_beta: Option<f64>,
    pub epsilon0: Option<f64>,
    pub epsilon1: Option<f64>,
    pub kappa_bound: f64,
    pub applicable: bool,
    pub message: String,
    /// How the constants were obtained.
    pub method: String,
}

/// `ε₀`, `ε₁` and `κ = 1 − ε₀ + ε₁` for an exclusion family.
///
/// The constants are scanned over every enumerated state and site pair. When
/// the state space exceeds `cap` and the allowed set is a pairwise exclusion
/// rule, the scan is reduced to single-particle configurations: for a rule of
/// that kind both indicators in `ε₀` are monotone in the other particles, so
/// the supremum is attained at `η = δ_x`.
pub fn hardcore_bounds(model: &Model, cap: usize) -> Result<BoundReport> {
    if !model.family.is_hardcore() {
        return Err(Error::UnsupportedFamily {
            family: model.family,
            operation: "hardcore_bounds",
        });
    }
    let (eps0, eps1, method) = match enumerate_states(model, cap) {
        Ok(states) => {
            let (e0, e1) = scan_epsilons(model, &states);
            (e0, e1, "exhaustive scan")
        }
        Err(Error::StateSpaceTooLarge { .. })
            if matches!(model.constraint, Constraint::Exclusion { .. }) =>
        {
            let (e0, e1) = pairwise_exclusion_epsilons(model);
            (e0, e1, "single-particle scan (pairwise exclusion)")
        }
        Err(e) => return Err(e),
    };
    let kappa = 1.0 - eps0 + eps1;
    let applicable = eps0 <= 1.0;
    let message = if applicable {
        format!("kappa = 1 - eps0 + eps1 = {kappa}")
    } else {
        format!("requires eps0 <= 1 (eps0 = {eps0})")
    };
    Ok(BoundReport {
        epsilon_beta: None,
        epsilon0: Some(eps0),
        epsilon1: Some(eps1),
        kappa_bound: kappa,
        applicable,
        message,
        method: method.to_string(),
    })
}

/// Exhaustive evaluation of the definitions of `ε₀` and `ε₁`.
pub fn scan_epsilons(model: &Model, states: &[Configuration]) -> (f64, f64) {
    let nu = model.intensity();
    let mut eps0 = 0.0f64;
    let mut eps1 = f64::INFINITY;
    let mut scratch = vec![0u32; model.n_sites()];
    for eta in states {
        let c = eta.counts();
        for x in 0..c.len() {
            if c[x] == 0 {
                continue;
            }
            eps1 = eps1.min(if model.can_add(c, x) { 0.0 } else { nu[x] });
            scratch.copy_from_slice(c);
            scratch[x] -= 1;
            let mut sum = 0.0;
            for y in 0..c.len() {
                // 1(η − δx + δy ∈ A) 1(η + δy ∉ A)
                if y != x && model.can_add(&scratch, y) && !model.can_add(c, y) {
                    sum += nu[y];
                }
            }
            eps0 = eps0.max(sum);
        }
    }
    if eps1.is_infinite() {
        eps1 = 0.0;
    }
    (eps0, eps1)
}

fn pairwise_exclusion_epsilons(model: &Model) -> (f64, f64) {
    let Constraint::Exclusion { conflicts } = &model.constraint else {
        unreachable!("caller checks the constraint kind")
    };
    let nu = model.intensity();
    let eps0 = conflicts
        .iter()
        .map(|c| c.iter().map(|&y| nu[y]).sum::<f64>())
        .fold(0.0, f64::max);
    let eps1 = nu.iter().copied().fold(f64::INFINITY, f64::min);
    (eps0, eps1)
}

/// `κ = 1 − z ε(β)`, applicable when `z ε(β) < 1`.
pub fn glauber_kappa_bound(z: f64, epsilon_beta: f64) -> BoundReport {
    let product = z * epsilon_beta;
    let applicable = product < 1.0;
    BoundReport {
        epsilon_beta: Some(epsilon_beta),
        epsilon0: None,
        epsilon1: None,
        kappa_bound: 1.0 - product,
        applicable,
        message: if applicable {
            format!("kappa = 1 - z*eps(beta) = {}", 1.0 - product)
        } else {
            format!("requires z*eps(beta) < 1 (z*eps(beta) = {product})")
        },
        method: "closed form".into(),
    }
}

/// Theoretical `κ` for any discrete family.
pub fn theoretical_bounds(model: &Model, cap: usize) -> Result<BoundReport> {
    match model.family {
        f if f.is_hardcore() => hardcore_bounds(model, cap),
        Family::LatticeGas => {
            let eps = epsilon_beta(model)?;
            Ok(glauber_kappa_bound(model.intensity[0], eps))
        }
        Family::TwoSiteConvex => Ok(BoundReport {
            epsilon_beta: None,
            epsilon0: None,
            epsilon1: None,
            kappa_bound: 1.0,
            applicable: (model.intensity[0] - 1.0).abs() < 1e-12,
            message: "convex K, z = 1: kappa = 1 for every beta >= 0".into(),
            method: "closed form".into(),
        }),
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// Continuum

/// Nonnegative, even, radially symmetric pair potential `φ(x) = φ(|x|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PairPotential {
    /// `φ = +∞` for `|x| < radius`.
    Hardcore { radius: f64 },
    /// `φ = height` for `|x| < radius`.
    Step { radius: f64, height: f64 },
    /// `φ = amplitude · e^{−|x|/length}`, set to zero beyond `cutoff` if given.
    ExponentialDecay {
        amplitude: f64,
        length: f64,
        cutoff: Option<f64>,
    },
}

impl PairPotential {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PairPotential::Hardcore { radius } => radius > 0.0 && radius.is_finite(),
            PairPotential::Step { radius, height } => {
                radius > 0.0 && radius.is_finite() && height >= 0.0
            }
            PairPotential::ExponentialDecay {
                amplitude,
                length,
                cutoff,
            } => amplitude >= 0.0 && length > 0.0 && cutoff.is_none_or(|c| c > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPotential(format!(
                "{self:?}: radii and lengths must be > 0, values ≥ 0"
            )))
        }
    }

    /// `φ(r)`, possibly `+∞`.
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            PairPotential::Hardcore { radius } => {
                if r < radius {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PairPotential::Step { radius, height } => {
                if r < radius {
                    height
                } else {
                    0.0
                }
            }
            PairPotential::ExponentialDecay {
                amplitude,
                length,
                cutoff,
            } => {
                if cutoff.is_some_and(|c| r >= c) {
                    0.0
                } else {
                    amplitude * (-r / length).exp()
                }
            }
        }
    }

    /// Radius beyond which `φ` vanishes, if finite.
    pub fn range(&self) -> Option<f64> {
        match *self {
            PairPotential::Hardcore { radius } | PairPotential::Step { radius, .. } => Some(radius),
            PairPotential::ExponentialDecay { cutoff, .. } => cutoff,
        }
    }

    /// `e^{−β φ(r)}`, with `β = 0` meaning no interaction even for `φ = ∞`.
    pub fn boltzmann(&self, beta: f64, r: f64) -> f64 {
        if beta == 0.0 {
            return 1.0;
        }
        let v = self.value(r);
        if v.is_infinite() {
            0.0
        } else {
            (-beta * v).exp()
        }
    }

    /// Radii where `φ` jumps.
    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            PairPotential::Hardcore { radius } | PairPotential::Step { radius, .. } => vec![radius],
            PairPotential::ExponentialDecay { cutoff, .. } => cutoff.into_iter().collect(),
        }
    }
}

/// Grand canonical continuum gas in a box `Λ = Π [0, side_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumSpec {
    pub dimension: usize,
    pub sides: Vec<f64>,
    pub z: f64,
    pub beta: f64,
    pub potential: PairPotential,
    /// Boundary condition `τ`: points outside the box.
    #[serde(default)]
    pub boundary: Vec<Vec<f64>>,
    /// Minimum-image distances inside the box (used for oracle cross-checks).
    #[serde(default)]
    pub periodic: bool,
}

impl ContinuumSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.sides.len() != self.dimension {
            return Err(Error::InvalidModel(format!(
                "box has {} sides for dimension {}",
                self.sides.len(),
                self.dimension
            )));
        }
        if self.sides.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidModel("box sides must be > 0".into()));
        }
        if !(self.z > 0.0 && self.z.is_finite()) {
            return Err(Error::InvalidModel(format!("activity z = {} must be > 0", self.z)));
        }
        check_beta(self.beta)?;
        self.potential.validate()?;
        for p in &self.boundary {
            if p.len() != self.dimension {
                return Err(Error::InvalidModel(format!(
                    "boundary point {p:?} has the wrong dimension"
                )));
            }
            if self.contains(p) {
                return Err(Error::InvalidModel(format!(
                    "boundary point {p:?} lies inside the box"
                )));
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.sides).all(|(&x, &s)| (0.0..s).contains(&x))
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut d2 = 0.0;
        for ((&x, &y), &s) in a.iter().zip(b).zip(&self.sides) {
            let mut d = (x - y).abs();
            if self.periodic {
                d = d.min(s - d);
            }
            d2 += d * d;
        }
        d2.sqrt()
    }
}

/// Quadrature controls for the continuum `ε(β)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Largest radius integrated when the potential has unbounded support.
    pub max_radius: f64,
    /// Refinement stops when the relative change drops below this.
    pub rel_tol: f64,
    /// Acceptable relative size of the neglected tail.
    pub tail_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            max_radius: 50.0,
            rel_tol: 1e-6,
            tail_tol: 1e-6,
        }
    }
}

/// Surface area of the unit sphere in `R^d`.
fn unit_sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// `ε(β) = ∫_{R^d} (1 − e^{−βφ(x)}) dx` for a radial potential.
///
/// The radial integral `S_d ∫ (1 − e^{−βφ(r)}) r^{d−1} dr` is computed with
/// the midpoint rule on panels split at the jumps of `φ`, doubling the
/// number of cells until the relative change falls below `rel_tol`.
pub fn continuum_epsilon_beta(spec: &ContinuumSpec, opts: QuadratureOptions) -> Result<f64> {
    spec.potential.validate()?;
    if spec.beta == 0.0 {
        return Ok(0.0);
    }
    let d = spec.dimension;
    let pot = spec.potential;
    let outer = pot.range().unwrap_or(opts.max_radius).min(opts.max_radius);
    let integrand = |r: f64| -(pot.boltzmann(spec.beta, r) - 1.0) * r.powi(d as i32 - 1);
    let mut edges = vec![0.0];
    edges.extend(pot.breakpoints().into_iter().filter(|&b| b < outer));
    edges.push(outer);
    let midpoint = |cells: usize| -> f64 {
        edges
            .windows(2)
            .map(|w| {
                let h = (w[1] - w[0]) / cells as f64;
                (0..cells)
                    .map(|i| integrand(w[0] + (i as f64 + 0.5) * h))
                    .sum::<f64>()
                    * h
            })
            .sum()
    };
    let mut cells = 8;
    let mut prev = midpoint(cells);
    let value = loop {
        cells *= 2;
        let next = midpoint(cells);
        // Richardson step for the O(h²) midpoint error
        let extrapolated = next + (next - prev) / 3.0;
        if (extrapolated - next).abs() <= opts.rel_tol * extrapolated.abs().max(f64::MIN_POSITIVE)
            || cells >= 1 << 22
        {
            break extrapolated;
        }
        prev = next;
    } * unit_sphere_area(d);

    if pot.range().is_none_or(|r| r > opts.max_radius) {
        // 1 − e^{−βφ} ≤ βφ; bound the tail of the exponential decay analytically
        // by the integrand at the edge times a few decay lengths.
        let edge = -(pot.boltzmann(spec.beta, outer) - 1.0);
        let length = match pot {
            PairPotential::ExponentialDecay { length, .. } => length,
            _ => outer,
        };
        let tail = edge * unit_sphere_area(d) * outer.powi(d as i32 - 1) * length * (d as f64);
        if tail > opts.tail_tol * value.abs() {
            return Err(Error::QuadratureTruncation { estimate: tail });
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::Move;

    fn gas_1d(side: usize, c: f64, beta: f64, n_max: u32) -> Model {
        Model::lattice_gas(LatticeGasParams {
            dimension: 1,
            side,
            potential: vec![(vec![1], c)],
            beta,
            z: 1.0,
            n_max,
        })
        .unwrap()
    }

    #[test]
    fn empty_configuration_has_zero_energy() {
        let m = gas_1d(4, 0.7, 1.0, 3);
        assert_eq!(m.hamiltonian(&Configuration::empty(4)).unwrap(), 0.0);
    }

    #[test]
    fn two_site_quadratic_energy() {
        let m = Model::two_site_convex(ConvexPotential::default(), 1.0, 1.0, 10).unwrap();
        assert_eq!(m.hamiltonian(&Configuration::new(vec![1, 2])).unwrap(), 9.0);
    }

    #[test]
    fn single_interacting_pair() {
        let c = 1.25;
        let m = gas_1d(5, c, 1.0, 3);
        let eta = Configuration::new(vec![0, 1, 1, 0, 0]);
        assert!((m.hamiltonian(&eta).unwrap() - c).abs() < 1e-15);
    }

    #[test]
    fn hardcore_has_no_hamiltonian() {
        let m = Model::hardcore_graph(2, &[(0, 1)], 1.0).unwrap();
        assert!(matches!(
            m.hamiltonian(&Configuration::empty(2)),
            Err(Error::NoHamiltonian { .. })
        ));
    }

    #[test]
    fn birth_energy_is_local_field() {
        let m = Model::lattice_gas(LatticeGasParams {
            dimension: 2,
            side: 3,
            potential: vec![(vec![1, 0], 0.5), (vec![0, 1], 0.3), (vec![1, 1], 0.1)],
            beta: 1.0,
            z: 1.0,
            n_max: 3,
        })
        .unwrap();
        let eta = Configuration::new(vec![1, 0, 2, 0, 1, 0, 3, 1, 0]);
        let h0 = m.hamiltonian(&eta).unwrap();
        for x in 0..9 {
            let mut up = eta.counts().to_vec();
            up[x] += 1;
            let diff = m.hamiltonian(&Configuration::new(up)).unwrap() - h0;
            assert!((diff - m.birth_energy(eta.counts(), x)).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_beta_values() {
        let c = 0.8;
        for beta in [0.0, 0.3, 2.0] {
            let m = gas_1d(4, c, beta, 2);
            let expected = 2.0 * (1.0 - (-beta * c).exp());
            assert!((epsilon_beta(&m).unwrap() - expected).abs() < 1e-15);
        }
        let hc = Model::hardcore_graph(2, &[(0, 1)], 1.0).unwrap();
        assert!(epsilon_beta(&hc).is_err());
    }

    #[test]
    fn continuum_hardcore_epsilon_is_disk_area() {
        let spec = ContinuumSpec {
            dimension: 2,
            sides: vec![1.0, 1.0],
            z: 1.0,
            beta: 1.0,
            potential: PairPotential::Hardcore { radius: 0.3 },
            boundary: vec![],
            periodic: false,
        };
        let eps = continuum_epsilon_beta(&spec, QuadratureOptions::default()).unwrap();
        assert!((eps - PI * 0.09).abs() < 1e-6 * PI * 0.09);
        let free = ContinuumSpec { beta: 0.0, ..spec };
        assert_eq!(continuum_epsilon_beta(&free, QuadratureOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn continuum_exponential_tail_needs_range() {
        let spec = ContinuumSpec {
            dimension: 3,
            sides: vec![1.0; 3],
            z: 1.0,
            beta: 1.0,
            potential: PairPotential::ExponentialDecay {
                amplitude: 1.0,
                length: 1.0,
                cutoff: None,
            },
            boundary: vec![],
            periodic: false,
        };
        let short = QuadratureOptions {
            max_radius: 2.0,
            ..Default::default()
        };
        assert!(matches!(
            continuum_epsilon_beta(&spec, short),
            Err(Error::QuadratureTruncation { .. })
        ));
        assert!(continuum_epsilon_beta(&spec, QuadratureOptions::default()).is_ok());
    }

    #[test]
    fn hardcore_graph_closed_forms() {
        // path on 4 vertices: Δ = 2
        let rho = 0.3;
        let m = Model::hardcore_graph(4, &[(0, 1), (1, 2), (2, 3)], rho).unwrap();
        let b = hardcore_bounds(&m, 1000).unwrap();
        assert!((b.epsilon0.unwrap() - 2.0 * rho).abs() < 1e-15);
        assert!((b.epsilon1.unwrap() - rho).abs() < 1e-15);
        assert!((b.kappa_bound - (1.0 - rho)).abs() < 1e-15);
        assert!(b.applicable);
    }

    #[test]
    fn hard_rods_interior_conflicts() {
        for k in 1..=3 {
            let geom = RodGeometry::new(3 * k, k).unwrap();
            let conflicts = geom.conflicts();
            let max = conflicts.iter().map(Vec::len).max().unwrap();
            assert_eq!(max, k * k + 4 * k + 1, "k = {k}");
        }
    }

    #[test]
    fn hard_rods_bounds_large_grid() {
        let m = Model::hard_rods(6, 2, 0.05).unwrap();
        let b = hardcore_bounds(&m, 10_000).unwrap();
        assert!((b.epsilon0.unwrap() - 0.05 * 13.0).abs() < 1e-12);
        assert!((b.epsilon1.unwrap() - 0.05).abs() < 1e-15);
        assert!((b.kappa_bound - 0.4).abs() < 1e-12);
        assert!(b.method.starts_with("single-particle"));
    }

    #[test]
    fn local_reduction_agrees_with_scan() {
        let m = Model::hard_rods(4, 2, 0.07).unwrap();
        let full = hardcore_bounds(&m, 100_000).unwrap();
        let local = hardcore_bounds(&m, 10).unwrap();
        assert_eq!(full.method, "exhaustive scan");
        assert_eq!(full.epsilon0, local.epsilon0);
        assert_eq!(full.epsilon1, local.epsilon1);
    }

    #[test]
    fn single_route_loss_network_bounds() {
        let m = Model::loss_network(vec![3], vec![vec![0]], vec![2.5]).unwrap();
        let b = hardcore_bounds(&m, 100).unwrap();
        assert_eq!(b.epsilon0, Some(0.0));
        assert_eq!(b.epsilon1, Some(0.0));
        assert_eq!(b.kappa_bound, 1.0);
    }

    #[test]
    fn glauber_bound_cases() {
        let b = glauber_kappa_bound(1.0, 0.3);
        assert!((b.kappa_bound - 0.7).abs() < 1e-15 && b.applicable);
        assert_eq!(glauber_kappa_bound(2.0, 0.0).kappa_bound, 1.0);
        assert!(!glauber_kappa_bound(2.0, 0.6).applicable);
    }

    #[test]
    fn non_hardcore_bounds_rejected() {
        let m = gas_1d(3, 1.0, 1.0, 2);
        assert!(hardcore_bounds(&m, 100).is_err());
    }

    #[test]
    fn allowed_sets_are_decreasing() {
        let models = [
            Model::hardcore_graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], 1.0).unwrap(),
            Model::loss_network(vec![2, 3], vec![vec![0], vec![0, 1], vec![1]], vec![1.0; 3])
                .unwrap(),
            Model::hard_rods(3, 1, 1.0).unwrap(),
            gas_1d(3, 1.0, 1.0, 2),
        ];
        for m in &models {
            for eta in enumerate_states(m, 100_000).unwrap() {
                assert!(m.is_allowed(eta.counts()));
                for x in 0..m.n_sites() {
                    let down = crate::statespace::apply_move(m, &eta, Move::death(x)).unwrap();
                    assert!(m.is_allowed(down.counts()));
                }
            }
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(Model::hardcore_graph(2, &[(0, 0)], 1.0).is_err());
        assert!(Model::hardcore_graph(2, &[(0, 1)], 0.0).is_err());
        assert!(Model::hardcore_graph(2, &[(0, 3)], 1.0).is_err());
        assert!(Model::loss_network(vec![1], vec![vec![2]], vec![1.0]).is_err());
        assert!(Model::lattice_gas(LatticeGasParams {
            dimension: 1,
            side: 2,
            potential: vec![(vec![1], 1.0), (vec![-1], 2.0)],
            beta: 1.0,
            z: 1.0,
            n_max: 2
        })
        .is_err());
    }
}
