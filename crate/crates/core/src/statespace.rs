//! Finite configuration spaces, birth/death moves and discrete gradients.
//!
//! A configuration is an occupancy vector over the sites of a model. Moves
//! add or remove one particle at a site; a move whose result would leave the
//! allowed set (or go negative) acts as the identity, so every move maps
//! allowed configurations to allowed configurations.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;

/// Default bound on the number of enumerated configurations.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// States whose Gibbs weight is below `e^{−700}` times the largest one
/// underflow in double precision and are removed from interacting models.
pub const NEGLIGIBLE_LOG_WEIGHT: f64 = 700.0;

/// Position of a configuration in the canonical (lexicographic) enumeration.
pub type StateIndex = usize;

/// Occupancy vector `η(x)` indexed by site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration(Vec<u32>);

impl Configuration {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn empty(n_sites: usize) -> Self {
        Self(vec![0; n_sites])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn count(&self, site: usize) -> u32 {
        self.0[site]
    }

    pub fn n_sites(&self) -> usize {
        self.0.len()
    }

    /// Total number of particles.
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl From<Vec<u32>> for Configuration {
    fn from(counts: Vec<u32>) -> Self {
        Self(counts)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Birth,
    Death,
}

/// Creation or annihilation of one particle at a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Move {
    pub kind: MoveKind,
    pub site: usize,
}

impl Move {
    pub const fn birth(site: usize) -> Self {
        Self {
            kind: MoveKind::Birth,
            site,
        }
    }

    pub const fn death(site: usize) -> Self {
        Self {
            kind: MoveKind::Death,
            site,
        }
    }

    pub const fn inverse(self) -> Self {
        match self.kind {
            MoveKind::Birth => Self::death(self.site),
            MoveKind::Death => Self::birth(self.site),
        }
    }

    pub fn is_birth(self) -> bool {
        self.kind == MoveKind::Birth
    }

    /// Dense index: `2·site` for births, `2·site + 1` for deaths.
    pub const fn index(self) -> usize {
        match self.kind {
            MoveKind::Birth => 2 * self.site,
            MoveKind::Death => 2 * self.site + 1,
        }
    }

    pub const fn from_index(index: usize) -> Self {
        if index % 2 == 0 {
            Self::birth(index / 2)
        } else {
            Self::death(index / 2)
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MoveKind::Birth => write!(f, "+{}", self.site),
            MoveKind::Death => write!(f, "-{}", self.site),
        }
    }
}

/// Every move of a model with `n_sites` sites, ordered by [`Move::index`].
pub fn all_moves(n_sites: usize) -> Vec<Move> {
    (0..2 * n_sites).map(Move::from_index).collect()
}

/// Enumerates the allowed configurations in lexicographic order of their
/// count vectors.
pub fn enumerate_states(model: &Model, cap: usize) -> Result<Vec<Configuration>> {
    let n = model.n_sites();
    let mut counts = vec![0u32; n];
    let mut out = Vec::new();
    descend(model, 0, &mut counts, &mut out, cap)?;
    Ok(out)
}

fn descend(
    model: &Model,
    site: usize,
    counts: &mut [u32],
    out: &mut Vec<Configuration>,
    cap: usize,
) -> Result<()> {
    if site == counts.len() {
        if out.len() >= cap {
            return Err(Error::StateSpaceTooLarge { cap });
        }
        out.push(Configuration(counts.to_vec()));
        return Ok(());
    }
    loop {
        descend(model, site + 1, counts, out, cap)?;
        // Later sites are zero here, so `can_add` sees the partial prefix.
        if !model.can_add(counts, site) {
            break;
        }
        counts[site] += 1;
    }
    counts[site] = 0;
    Ok(())
}

/// `γ_x^±(η)` with the identity convention for blocked moves.
pub fn apply_move(model: &Model, eta: &Configuration, m: Move) -> Result<Configuration> {
    check_site(model, eta, m)?;
    let mut out = eta.clone();
    match m.kind {
        MoveKind::Birth => {
            if model.can_add(eta.counts(), m.site) {
                out.0[m.site] += 1;
            }
        }
        MoveKind::Death => {
            if eta.0[m.site] > 0 {
                out.0[m.site] -= 1;
            }
        }
    }
    Ok(out)
}

/// `∇_m f(η) = f(m(η)) − f(η)`.
pub fn discrete_gradient<F>(f: F, model: &Model, eta: &Configuration, m: Move) -> Result<f64>
where
    F: Fn(&Configuration) -> f64,
{
    let moved = apply_move(model, eta, m)?;
    if moved == *eta {
        return Ok(0.0);
    }
    Ok(f(&moved) - f(eta))
}

fn check_site(model: &Model, eta: &Configuration, m: Move) -> Result<()> {
    let n_sites = model.n_sites();
    if m.site >= n_sites {
        return Err(Error::UnknownSite {
            site: m.site,
            n_sites,
        });
    }
    if eta.n_sites() != n_sites {
        return Err(Error::DimensionMismatch {
            expected: n_sites,
            got: eta.n_sites(),
        });
    }
    Ok(())
}

/// An enumerated state space together with its move table.
///
/// `target(s, m)` is the index of `m(η_s)`; blocked moves point back at `s`.
/// For interacting models, configurations of negligible weight (see
/// [`NEGLIGIBLE_LOG_WEIGHT`]) are left out and moves into them are blocked.
#[derive(Debug, Clone)]
pub struct StateSpace {
    model: Model,
    states: Vec<Configuration>,
    pruned: usize,
    index: HashMap<Configuration, StateIndex>,
    moves: Vec<Move>,
    targets: Vec<u32>,
}

impl StateSpace {
    pub fn new(model: Model) -> Result<Self> {
        Self::with_cap(model, DEFAULT_STATE_CAP)
    }

    pub fn with_cap(model: Model, cap: usize) -> Result<Self> {
        let mut states = enumerate_states(&model, cap.min(u32::MAX as usize))?;
        let before = states.len();
        if !model.family().is_hardcore() {
            let logw: Vec<f64> = states.iter().map(|c| model.log_weight(c)).collect();
            let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut keep = logw.iter().map(|l| *l >= max - NEGLIGIBLE_LOG_WEIGHT);
            states.retain(|_| keep.next().unwrap());
        }
        let pruned = before - states.len();
        if pruned > 0 {
            log::info!("{pruned} configurations of negligible weight left out");
        }
        let index: HashMap<_, _> = states
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        let moves = all_moves(model.n_sites());
        let n_moves = moves.len();
        let mut targets = vec![0u32; states.len() * n_moves];
        let mut scratch = vec![0u32; model.n_sites()];
        for (s, eta) in states.iter().enumerate() {
            for (k, &m) in moves.iter().enumerate() {
                scratch.copy_from_slice(eta.counts());
                let moved = match m.kind {
                    MoveKind::Birth if model.can_add(&scratch, m.site) => {
                        scratch[m.site] += 1;
                        true
                    }
                    MoveKind::Death if scratch[m.site] > 0 => {
                        scratch[m.site] -= 1;
                        true
                    }
                    _ => false,
                };
                targets[s * n_moves + k] = match moved.then(|| index.get(scratch.as_slice())).flatten() {
                    Some(&t) => t as u32,
                    None => s as u32,
                };
            }
        }
        Ok(Self {
            model,
            states,
            pruned,
            index,
            moves,
            targets,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// Number of enumerated configurations left out for negligible weight.
    pub fn pruned(&self) -> usize {
        self.pruned
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn state(&self, s: StateIndex) -> &Configuration {
        &self.states[s]
    }

    pub fn index_of(&self, eta: &Configuration) -> Option<StateIndex> {
        self.index.get(eta).copied()
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn n_moves(&self) -> usize {
        self.moves.len()
    }

    /// Index of `m(η_s)` where `m` is given by its dense index.
    #[inline]
    pub fn target(&self, s: StateIndex, move_index: usize) -> StateIndex {
        self.targets[s * self.moves.len() + move_index] as StateIndex
    }

    #[inline]
    pub fn is_blocked(&self, s: StateIndex, move_index: usize) -> bool {
        self.target(s, move_index) == s
    }

    /// `∇_m f(η_s)` for a function tabulated on the state space.
    #[inline]
    pub fn gradient(&self, f: &[f64], s: StateIndex, move_index: usize) -> f64 {
        f[self.target(s, move_index)] - f[s]
    }

    /// Tabulates `f` over the enumerated states.
    pub fn tabulate<F: Fn(&Configuration) -> f64>(&self, f: F) -> Vec<f64> {
        self.states.iter().map(f).collect()
    }
}

// Lets the move table look states up by slice without allocating.
impl std::borrow::Borrow<[u32]> for Configuration {
    fn borrow(&self) -> &[u32] {
        &self.0
    }
}
