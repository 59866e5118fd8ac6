//! Gamma process paths and pathwise integrals `int_0^t f dGamma`.
//!
//! A path is a grid plus one Gamma increment per cell. Cells carry a key
//! (lattice index, refinement depth, part) that addresses their own random
//! stream, so extending the horizon or refining cells never changes the
//! mass already assigned to existing cells.

use crate::error::{Error, Result};
use crate::integrands::IntegrandSpec;
use crate::quad::{integrate, QuadOptions};
use crate::rng::{CellStream, PathSeed};
use rand::Rng;
use rand_distr::StandardNormal;

/// Stream depth reserved for splitting a lattice cell at the horizon.
const PARTIAL_SPLIT_DEPTH: u32 = u32::MAX;

/// `ln` of a Gamma(shape, 1) draw. Working in logs keeps tiny shapes
/// meaningful where the variate itself underflows.
pub fn sample_ln_gamma(shape: f64, rng: &mut CellStream) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::domain(format!("Gamma shape must be positive, got {shape}")));
    }
    if shape < 1.0 {
        // Gamma(a) = Gamma(a + 1) * U^{1/a}
        let g = marsaglia_tsang(shape + 1.0, rng);
        return Ok(g.ln() + rng.open01().ln() / shape);
    }
    Ok(marsaglia_tsang(shape, rng).ln())
}

/// One Gamma(shape, 1) draw.
pub fn sample_gamma_variate(shape: f64, rng: &mut CellStream) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::domain(format!("Gamma shape must be positive, got {shape}")));
    }
    if shape < 1.0 {
        return Ok(sample_ln_gamma(shape, rng)?.exp());
    }
    Ok(marsaglia_tsang(shape, rng))
}

/// Marsaglia-Tsang squeeze/rejection for shape >= 1.
fn marsaglia_tsang(shape: f64, rng: &mut CellStream) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.open01();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Splits `delta ~ Gamma(a + b)` into independent `Gamma(a)` and `Gamma(b)`
/// parts via a Beta(a, b) fraction. The parts sum to `delta` exactly.
pub fn split_increment(delta: f64, a: f64, b: f64, rng: &mut CellStream) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("split shapes must be positive, got ({a}, {b})")));
    }
    let la = sample_ln_gamma(a, rng)?;
    let lb = sample_ln_gamma(b, rng)?;
    // B = 1 / (1 + e^{lb - la})
    let frac = 1.0 / (1.0 + (lb - la).exp());
    let left = delta * frac;
    Ok((left, delta - left))
}

/// Strictly increasing abscissas starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::domain("a grid needs at least two nodes starting at 0"));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0] && w[1].is_finite()) {
                return Err(Error::domain(format!(
                    "grid nodes must be finite and strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Grid { nodes })
    }

    /// Multiples of `h` up to `t`, with a shorter last cell if `h` does
    /// not divide `t`.
    pub fn uniform(t: f64, h: f64) -> Result<Self> {
        check_horizon(t, h)?;
        let (full, rem) = lattice_cells(t, h);
        let mut nodes: Vec<f64> = (0..=full).map(|k| k as f64 * h).collect();
        if rem > 0.0 {
            nodes.push(t);
        }
        Grid::new(nodes)
    }

    /// `min(0.01, t / 10^4)`.
    pub fn default_step(t: f64) -> f64 {
        (t / 1e4).min(0.01)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().expect("grid has nodes")
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.windows(2).map(|w| w[1] - w[0])
    }
}

fn check_horizon(t: f64, h: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite() && h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("need positive finite horizon and step, got t={t}, h={h}")));
    }
    Ok(())
}

/// Number of whole lattice cells below `t` and the leftover width.
fn lattice_cells(t: f64, h: f64) -> (u64, f64) {
    let q = t / h;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * q.max(1.0) {
        (r as u64, 0.0)
    } else {
        let full = q.floor() as u64;
        (full, t - full as f64 * h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Whole,
    /// Left piece of a lattice cell cut at the horizon.
    Head,
    /// Later pieces of such a cell, appended on extension.
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CellKey {
    index: u64,
    depth: u32,
    part: Part,
    /// Distinguishes successive tail pieces of one lattice cell.
    sub: u32,
}

impl CellKey {
    fn whole(index: u64) -> Self {
        CellKey { index, depth: 0, part: Part::Whole, sub: 0 }
    }

    fn stream_id(&self) -> u64 {
        let p = match self.part {
            Part::Whole => 0u64,
            Part::Head => 1,
            Part::Tail => 2,
        };
        self.index.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (p << 62) ^ ((self.sub as u64) << 40)
    }
}

/// A lattice cell that is only partly materialized.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    index: u64,
    total: f64,
    used: f64,
    pieces: u32,
}

/// One sample path of Gamma increments on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaIncrements {
    grid: Grid,
    deltas: Vec<f64>,
    keys: Vec<CellKey>,
    seed: PathSeed,
    /// Lattice step for extensible paths.
    step: Option<f64>,
    pending: Option<Pending>,
}

/// Independent Gamma increments on an arbitrary grid, cell `k` drawn from
/// its own stream. Such paths can be refined but not extended.
pub fn sample_increments(grid: Grid, seed: PathSeed) -> GammaIncrements {
    let mut deltas = Vec::with_capacity(grid.cells());
    let mut keys = Vec::with_capacity(grid.cells());
    for (k, w) in grid.widths().enumerate() {
        let key = CellKey::whole(k as u64);
        let mut rng = seed.stream(key.stream_id(), 0);
        deltas.push(sample_gamma_variate(w, &mut rng).expect("grid widths are positive"));
        keys.push(key);
    }
    GammaIncrements { grid, deltas, keys, seed, step: None, pending: None }
}

/// A path on the lattice `hZ` up to `t`; extensible with [`extend_path`].
pub fn sample_lattice_path(t: f64, h: f64, seed: PathSeed) -> Result<GammaIncrements> {
    check_horizon(t, h)?;
    let mut path = GammaIncrements {
        grid: Grid { nodes: vec![0.0] },
        deltas: Vec::new(),
        keys: Vec::new(),
        seed,
        step: Some(h),
        pending: None,
    };
    path.append_lattice(0, t, h);
    Ok(path)
}

impl GammaIncrements {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn seed(&self) -> PathSeed {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn step(&self) -> Option<f64> {
        self.step
    }

    /// `Gamma_t` over the whole path.
    pub fn total(&self) -> f64 {
        self.deltas.iter().sum()
    }

    /// Gamma mass of `(0, x]`; `x` must be a grid node.
    pub fn mass_upto(&self, x: f64) -> Option<f64> {
        let n = self.grid.nodes.partition_point(|&y| y < x);
        (n < self.grid.nodes.len() && self.grid.nodes[n] == x).then(|| self.deltas[..n].iter().sum())
    }

    fn whole_cell(&self, k: u64, h: f64) -> f64 {
        let mut rng = self.seed.stream(CellKey::whole(k).stream_id(), 0);
        sample_gamma_variate(h, &mut rng).expect("positive step")
    }

    /// Appends lattice cells from index `first` (whose left node is the
    /// current horizon) up to `t`.
    fn append_lattice(&mut self, first: u64, t: f64, h: f64) {
        let (full, rem) = lattice_cells(t, h);
        for k in first..full {
            self.deltas.push(self.whole_cell(k, h));
            self.keys.push(CellKey::whole(k));
            self.grid.nodes.push((k + 1) as f64 * h);
        }
        self.pending = None;
        if rem > 0.0 {
            let total = self.whole_cell(full, h);
            let key = CellKey { index: full, depth: 0, part: Part::Head, sub: 0 };
            let mut rng = self.seed.stream(key.stream_id(), PARTIAL_SPLIT_DEPTH);
            let (head, _) = split_increment(total, rem, h - rem, &mut rng).expect("positive widths");
            self.deltas.push(head);
            self.keys.push(key);
            self.grid.nodes.push(t);
            self.pending = Some(Pending { index: full, total, used: head, pieces: 1 });
        }
    }
}

/// Extends a lattice path to `new_horizon`. Existing cells are kept as
/// they are; a lattice cell previously cut at the horizon is completed
/// from its remaining mass, so the masses of whole lattice cells do not
/// depend on the sequence of extensions.
pub fn extend_path(path: &GammaIncrements, new_horizon: f64) -> Result<GammaIncrements> {
    let t = path.horizon();
    if !(new_horizon > t && new_horizon.is_finite()) {
        return Err(Error::domain(format!("new horizon {new_horizon} must exceed the current horizon {t}")));
    }
    let Some(h) = path.step else {
        return Err(Error::usage("only lattice paths can be extended"));
    };
    let mut out = path.clone();
    let next = match out.pending.take() {
        None => lattice_cells(t, h).0,
        Some(p) => {
            let end = (p.index + 1) as f64 * h;
            let rest = (p.total - p.used).max(0.0);
            let key = CellKey { index: p.index, depth: 0, part: Part::Tail, sub: p.pieces };
            if new_horizon < end * (1.0 - 1e-12) {
                let mut rng = out.seed.stream(key.stream_id(), PARTIAL_SPLIT_DEPTH);
                let (piece, _) = split_increment(rest, new_horizon - t, end - new_horizon, &mut rng)?;
                out.deltas.push(piece);
                out.keys.push(key);
                out.grid.nodes.push(new_horizon);
                out.pending = Some(Pending { used: p.used + piece, pieces: p.pieces + 1, ..p });
                return Ok(out);
            }
            out.deltas.push(rest);
            out.keys.push(key);
            out.grid.nodes.push(end);
            p.index + 1
        }
    };
    if new_horizon > out.horizon() {
        out.append_lattice(next, new_horizon, h);
    }
    Ok(out)
}

/// Halves every cell, splitting its mass with an independent Beta draw
/// keyed by the cell and its new depth.
pub fn refine(path: &GammaIncrements) -> GammaIncrements {
    let n = path.deltas.len();
    let mut nodes = Vec::with_capacity(2 * n + 1);
    let mut deltas = Vec::with_capacity(2 * n);
    let mut keys = Vec::with_capacity(2 * n);
    nodes.push(0.0);
    for (k, (&d, key)) in path.deltas.iter().zip(&path.keys).enumerate() {
        let (a, b) = (path.grid.nodes[k], path.grid.nodes[k + 1]);
        let mid = 0.5 * (a + b);
        let depth = key.depth + 1;
        let mut rng = path.seed.stream(key.stream_id(), depth);
        let (l, r) = split_increment(d, mid - a, b - mid, &mut rng).expect("positive widths");
        let child = |i| CellKey { index: key.index * 2 + i, depth, ..*key };
        nodes.push(mid);
        nodes.push(b);
        deltas.push(l);
        deltas.push(r);
        keys.push(child(0));
        keys.push(child(1));
    }
    GammaIncrements { grid: Grid { nodes }, deltas, keys, seed: path.seed, step: None, pending: None }
}

/// Riemann bounds from cell-endpoint values.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IntegralBracket {
    pub lower: f64,
    pub upper: f64,
}

impl IntegralBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// `sum min(f(x_k), f(x_{k+1})) Delta_k` and the matching upper sum. The
/// bounds are only valid for monotone `f`; other integrands need
/// `allow_nonmonotone`.
pub fn integral_bracket(f: &IntegrandSpec, path: &GammaIncrements, allow_nonmonotone: bool) -> Result<IntegralBracket> {
    if !allow_nonmonotone && !f.monotone().is_monotone() {
        return Err(Error::usage(format!("{f} is not monotone; its endpoint bracket is not valid")));
    }
    let nodes = path.grid.nodes();
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut left = f.value(nodes[0]);
    for (k, &d) in path.deltas.iter().enumerate() {
        let right = f.value(nodes[k + 1]);
        lower += left.min(right) * d;
        upper += left.max(right) * d;
        left = right;
    }
    Ok(IntegralBracket { lower, upper })
}

/// Per-cell weights: the cell mean of `f` when `int f` has a closed form,
/// otherwise the midpoint value. Cell means keep `E Gamma f = lambda f`
/// exact on any grid and stay finite next to integrable spikes.
pub fn cell_weights(f: &IntegrandSpec, grid: &Grid) -> Vec<f64> {
    grid.nodes.windows(2).map(|w| ln_cell_weight(f, w[0], w[1]).exp()).collect()
}

/// `ln` of the [`cell_weights`] entry for the cell `[a, b]`.
pub fn ln_cell_weight(f: &IntegrandSpec, a: f64, b: f64) -> f64 {
    if let Some(v) = f.ln_integral_closed(1.0, a, b) {
        if v.is_finite() || v == f64::NEG_INFINITY {
            return v - (b - a).ln();
        }
    }
    match f.integral_closed(1.0, a, b) {
        Some(v) if v.is_finite() => (v / (b - a)).ln(),
        _ => f.ln_value(0.5 * (a + b)),
    }
}

/// `sum w_k Delta_k` with the weights of [`cell_weights`].
pub fn integral_estimate(f: &IntegrandSpec, path: &GammaIncrements) -> f64 {
    cell_weights(f, &path.grid).iter().zip(&path.deltas).map(|(w, d)| w * d).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Membership {
    /// `int_0^inf ln(1 + f)` converges, with the estimated value.
    Member {
        value: f64,
    },
    NonMember,
    Undecided,
}

/// Default probe horizon of [`lphi_membership`].
pub const LPHI_HORIZON: f64 = 1e6;

/// Decides whether `int_0^inf ln(1 + f) < inf`.
///
/// The integral is computed over the doubling blocks `(H/2^{j+1}, H/2^j]`
/// below the probe horizon `H`. An integrable catalog entry or block
/// contributions that die out geometrically (tail extrapolated as a
/// geometric series) give membership; blocks that stop shrinking while
/// larger than `tol` witness divergence.
pub fn lphi_membership(f: &IntegrandSpec, horizon: Option<f64>, tol: f64) -> Result<Membership> {
    let h = horizon.unwrap_or(LPHI_HORIZON).min(LPHI_HORIZON);
    if !(h > 0.0) {
        return Err(Error::domain(format!("probe horizon must be positive, got {h}")));
    }
    let log1p_f = |x: f64| {
        let l = f.ln_value(x);
        if l > 30.0 {
            l + (-l).exp().ln_1p()
        } else {
            l.exp().ln_1p()
        }
    };
    let opts = QuadOptions::default().with_rel_tol(1e-10).graded(40);
    let levels = 12;
    let mut edges: Vec<f64> = (0..=levels).rev().map(|j| h / 2f64.powi(j)).collect();
    edges.insert(0, 0.0);
    let mut blocks = Vec::with_capacity(edges.len());
    for w in edges.windows(2) {
        let bp = f.breakpoints(w[1], 4096);
        let r = integrate(log1p_f, w[0], w[1], &bp, &opts)?;
        blocks.push(r.value);
    }
    let total: f64 = blocks.iter().sum();
    let last = &blocks[blocks.len() - 4..];
    if f.metadata().integrable {
        // ln(1 + f) <= f, and the entry's closed form bounds the tail
        let tail = f.integral_closed(1.0, h, 1e300).filter(|v| v.is_finite());
        return Ok(match tail {
            Some(t) if t <= tol => Membership::Member { value: total },
            _ if last[3] <= tol => Membership::Member { value: total },
            _ => Membership::Undecided,
        });
    }
    let ratios: Vec<f64> = last.windows(2).map(|w| w[1] / w[0]).collect();
    if last[3] > tol && ratios.iter().all(|&r| r >= 0.9) {
        return Ok(Membership::NonMember);
    }
    if ratios.iter().all(|&r| r.is_finite() && r < 0.9) {
        let r = ratios.iter().copied().fold(0.0, f64::max);
        let tail = last[3] * r / (1.0 - r);
        if tail <= tol {
            return Ok(Membership::Member { value: total + tail });
        }
    }
    if last[3] == 0.0 {
        return Ok(Membership::Member { value: total });
    }
    Ok(Membership::Undecided)
}
