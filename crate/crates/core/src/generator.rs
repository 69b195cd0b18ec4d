//! Rate kernels, sparse generator matrices and stationary measures.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::models::{Family, Interaction, Model};
use crate::statespace::{MoveKind, StateIndex, StateSpace};

/// Jump rates `c(η, m)` over the enumerated states and all moves.
///
/// Two rates are kept per (state, move). The nominal rate follows the model's
/// formula (for exclusion families a blocked birth keeps its intensity). The
/// effective rate is zero whenever the move is blocked; it is what the
/// generator, the R-measure and the simulators use, and the two only differ
/// on moves whose gradient vanishes.
#[derive(Debug, Clone)]
pub struct RateKernel {
    space: StateSpace,
    nominal: Vec<f64>,
}

impl RateKernel {
    pub fn new(space: StateSpace) -> Self {
        let model = space.model().clone();
        let n_moves = space.n_moves();
        let mut nominal = vec![0.0; space.len() * n_moves];
        for (s, eta) in space.states().iter().enumerate() {
            let counts = eta.counts();
            for (k, m) in space.moves().iter().enumerate() {
                nominal[s * n_moves + k] = match m.kind {
                    MoveKind::Death => f64::from(counts[m.site]),
                    MoveKind::Birth => birth_rate(&model, counts, m.site),
                };
            }
        }
        Self { space, nominal }
    }

    /// Enumerates the model and builds its kernel.
    pub fn for_model(model: &Model, cap: usize) -> Result<Self> {
        Ok(Self::new(StateSpace::with_cap(model.clone(), cap)?))
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn n_moves(&self) -> usize {
        self.space.n_moves()
    }

    #[inline]
    pub fn nominal_rate(&self, s: StateIndex, k: usize) -> f64 {
        self.nominal[s * self.space.n_moves() + k]
    }

    #[inline]
    pub fn rate(&self, s: StateIndex, k: usize) -> f64 {
        if self.space.is_blocked(s, k) {
            0.0
        } else {
            self.nominal_rate(s, k)
        }
    }

    /// Total jump rate out of `s`.
    pub fn escape_rate(&self, s: StateIndex) -> f64 {
        (0..self.n_moves()).map(|k| self.rate(s, k)).sum()
    }

    /// Overwrites one rate; used to build corrupted fixtures.
    pub fn set_rate(&mut self, s: StateIndex, k: usize, value: f64) {
        let n = self.space.n_moves();
        self.nominal[s * n + k] = value;
    }

    /// `Σ_m c(η,m) ∇_m f(η)` evaluated move by move.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|s| {
                (0..self.n_moves())
                    .map(|k| self.rate(s, k) * self.space.gradient(f, s, k))
                    .sum()
            })
            .collect()
    }
}

fn birth_rate(model: &Model, counts: &[u32], site: usize) -> f64 {
    let nu = model.intensity()[site];
    match model.interaction() {
        Interaction::None => nu,
        _ => {
            if !model.can_add(counts, site) {
                // above the occupancy truncation
                return 0.0;
            }
            nu * (-model.beta() * model.birth_energy(counts, site)).exp()
        }
    }
}

/// Sparse generator in compressed-row form; the diagonal is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn from_kernel(kernel: &RateKernel) -> Self {
        let n = kernel.len();
        let space = kernel.space();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for s in 0..n {
            row.clear();
            let mut diag = 0.0;
            for k in 0..kernel.n_moves() {
                let r = kernel.rate(s, k);
                if r != 0.0 {
                    row.push((space.target(s, k), r));
                    diag -= r;
                }
            }
            row.push((s, diag));
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for &(c, v) in row.iter() {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Builds a generator from off-diagonal `(row, col, rate)` entries; the
    /// diagonal is filled in so rows sum to zero.
    pub fn from_off_diagonal(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: i.max(j) + 1,
                });
            }
            if i == j || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i}, {j}, {v}) must be off-diagonal and nonnegative"
                )));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, mut row) in rows.into_iter().enumerate() {
            let diag: f64 = -row.iter().map(|e| e.1).sum::<f64>();
            row.push((i, diag));
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.row(i).find(|e| e.0 == i).map_or(0.0, |e| e.1)
    }

    /// `Qf`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(f, &mut out);
        out
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * f[self.cols[p]];
            }
            *o = acc;
        }
    }

    /// `μQ` for a row vector `μ`.
    pub fn apply_left(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &m) in mu.iter().enumerate() {
            for (j, v) in self.row(i) {
                out[j] += m * v;
            }
        }
        out
    }

    /// Largest `|Q_ii|`.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.n).map(|i| -self.diagonal(i)).fold(0.0, f64::max)
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|e| e.1).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Writes `row col value` lines (zero-based), one per stored entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# rows={} cols={} nnz={}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v:e}")?;
            }
        }
        Ok(())
    }

    /// CSV with header `row,col,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "row,col,value")?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{i},{j},{v:e}")?;
            }
        }
        Ok(())
    }
}

/// Normalized stationary probabilities over the enumerated states.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMeasure {
    probs: Vec<f64>,
}

impl StationaryMeasure {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some((i, &v)) = probs.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositive { index: i, value: v });
        }
        let total: f64 = probs.iter().sum();
        Ok(Self {
            probs: probs.into_iter().map(|p| p / total).collect(),
        })
    }

    /// Product-form Gibbs weights, normalized after a max shift in log space.
    pub fn for_space(space: &StateSpace) -> Self {
        let model = space.model();
        let logw: Vec<f64> = space.states().iter().map(|c| model.log_weight(c)).collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        Self {
            probs: w.into_iter().map(|x| x / total).collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `π[f]`.
    pub fn expect(&self, f: &[f64]) -> f64 {
        self.probs.iter().zip(f).map(|(p, v)| p * v).sum()
    }

    /// `max_s |(πQ)_s|`.
    pub fn stationarity_residual(&self, q: &GeneratorMatrix) -> f64 {
        q.apply_left(&self.probs)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, space: &StateSpace, mut w: W) -> io::Result<()> {
        writeln!(w, "index,state,probability")?;
        for (i, p) in self.probs.iter().enumerate() {
            writeln!(w, "{i},\"{}\",{p:e}", space.state(i))?;
        }
        Ok(())
    }
}

pub fn stationary_measure(space: &StateSpace) -> StationaryMeasure {
    StationaryMeasure::for_space(space)
}

/// Everything a finite-model computation needs.
#[derive(Debug, Clone)]
pub struct FiniteChain {
    pub kernel: RateKernel,
    pub q: GeneratorMatrix,
    pub pi: StationaryMeasure,
}

impl FiniteChain {
    pub fn new(model: &Model, cap: usize) -> Result<Self> {
        let kernel = RateKernel::for_model(model, cap)?;
        let q = GeneratorMatrix::from_kernel(&kernel);
        let pi = StationaryMeasure::for_space(kernel.space());
        Ok(Self { kernel, q, pi })
    }

    pub fn space(&self) -> &StateSpace {
        self.kernel.space()
    }

    pub fn family(&self) -> Family {
        self.space().model().family()
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// Largest detailed-balance violation `|π(η)c(η,m) − π(mη)c(mη,m⁻¹)|` over
/// non-blocked moves.
pub fn check_reversibility(kernel: &RateKernel, pi: &StationaryMeasure) -> f64 {
    let space = kernel.space();
    let p = pi.probs();
    let mut worst = 0.0f64;
    for s in 0..space.len() {
        for (k, m) in space.moves().iter().enumerate() {
            let t = space.target(s, k);
            if t == s {
                continue;
            }
            let back = m.inverse().index();
            let v = (p[s] * kernel.rate(s, k) - p[t] * kernel.rate(t, back)).abs();
            worst = worst.max(v);
        }
    }
    worst
}
