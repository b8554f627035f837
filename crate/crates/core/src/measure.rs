//! Discrete measures on δ-sets: energies, amplitudes, Frostman audits, and
//! measures with a Fubini (slice) structure.
//!
//! Atoms sit at cell centers. The Riesz kernel is clamped below at δ, so the
//! diagonal term of an energy is `w² δ^-s` and every sum stays finite.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{parse_err, LabError, Result};
use crate::grid::{self, Cell, DeltaSet, MAX_DIM};
use crate::numeric::{compensated_sum, CompensatedSum};

/// Non-negative weights on the cells of a [`DeltaSet`], in support order.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    support: DeltaSet,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: DeltaSet, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(LabError::DimensionMismatch(format!(
                "{} weights for {} cells",
                weights.len(),
                support.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(LabError::InvalidParameter(format!("weight {w}")));
        }
        Ok(Self { support, weights })
    }

    /// Equal weights summing to one.
    pub fn uniform(set: &DeltaSet) -> Result<Self> {
        if set.is_empty() {
            return Err(LabError::Empty("uniform measure on an empty set".into()));
        }
        let w = 1.0 / set.len() as f64;
        Self::new(set.clone(), vec![w; set.len()])
    }

    /// Lebesgue measure restricted to the set: every cell weighs `δ^dim`.
    pub fn lebesgue(set: &DeltaSet) -> Self {
        let w = set.delta().powi(set.dim() as i32);
        Self {
            support: set.clone(),
            weights: vec![w; set.len()],
        }
    }

    pub fn point_mass(dim: usize, level: u32, cell: Cell, mass: f64) -> Result<Self> {
        Self::new(DeltaSet::new(dim, level, vec![cell])?, vec![mass])
    }

    pub fn support(&self) -> &DeltaSet {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn level(&self) -> u32 {
        self.support.level()
    }

    pub fn delta(&self) -> f64 {
        self.support.delta()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn atoms(&self) -> impl Iterator<Item = ([f64; MAX_DIM], f64)> + '_ {
        self.support
            .cells()
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| (self.support.center(c), w))
    }

    /// Clamped Riesz potential at every atom: `Σ_y w_y max(|x - y|, δ)^-s`.
    pub fn potentials(&self, s: f64) -> Result<Vec<f64>> {
        check_exponent("s", s)?;
        let kernel = Kernel::new(s, &self.support);
        let cells = self.support.cells();
        let dim = self.dim();
        Ok(cells
            .par_iter()
            .map(|ci| {
                let mut acc = CompensatedSum::new();
                for (cj, &wj) in cells.iter().zip(&self.weights) {
                    acc.add(wj * kernel.at(sq_index_dist(ci, cj, dim)));
                }
                acc.value()
            })
            .collect())
    }

    /// s-dimensional energy `Σ_{i,j} w_i w_j max(|x_i - x_j|, δ)^-s`.
    pub fn energy(&self, s: f64) -> Result<f64> {
        let pot = self.potentials(s)?;
        Ok(compensated_sum(
            pot.iter().zip(&self.weights).map(|(p, w)| p * w),
        ))
    }

    /// α-dimensional amplitude: the largest potential over the support centers.
    pub fn amplitude(&self, alpha: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(LabError::Empty("amplitude of an empty measure".into()));
        }
        Ok(self.potentials(alpha)?.into_iter().fold(0.0, f64::max))
    }

    /// Smallest `c` with `μ(B(x, r)) ≤ c r^α` over support centers `x` and dyadic
    /// radii `r = 2^m δ ≤ 1`. Balls are open.
    pub fn frostman_constant(&self, alpha: f64) -> Result<f64> {
        check_exponent("alpha", alpha)?;
        let level = self.level() as usize;
        let delta = self.delta();
        let denom: Vec<f64> = (0..=level)
            .map(|m| (delta * (m as f64).exp2()).powf(alpha))
            .collect();
        let cells = self.support.cells();
        let dim = self.dim();
        Ok(cells
            .par_iter()
            .map(|ci| {
                let mut shells = vec![0.0; level + 1];
                for (cj, &wj) in cells.iter().zip(&self.weights) {
                    let m = radius_bucket(sq_index_dist(ci, cj, dim));
                    if m <= level {
                        shells[m] += wj;
                    }
                }
                let mut mass = 0.0;
                let mut best: f64 = 0.0;
                for (shell, d) in shells.iter().zip(&denom) {
                    mass += shell;
                    best = best.max(mass / d);
                }
                best
            })
            .reduce(|| 0.0, f64::max))
    }

    /// Moves each atom's mass to the cell `map(cell)` of a new grid. Masses landing in
    /// one cell are added in support order.
    pub fn aggregate(
        &self,
        dim: usize,
        level: u32,
        span: u32,
        map: impl Fn(&Cell) -> Cell,
    ) -> Result<Self> {
        let mut pairs: Vec<(Cell, usize)> = self
            .support
            .cells()
            .iter()
            .enumerate()
            .map(|(i, c)| (map(c), i))
            .collect();
        pairs.sort_unstable();
        let mut cells: Vec<Cell> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (c, i) in pairs {
            if cells.last() == Some(&c) {
                *weights.last_mut().unwrap() += self.weights[i];
            } else {
                cells.push(c);
                weights.push(self.weights[i]);
            }
        }
        let support = DeltaSet::with_span(dim, level, span, cells)?;
        Self::new(support, weights)
    }

    /// Sums weights into parent cells at a coarser level.
    pub fn coarsen(&self, level: u32) -> Result<Self> {
        if level < 1 || level > self.level() {
            return Err(LabError::InvalidParameter(format!(
                "coarse level {level} outside [1, {}]",
                self.level()
            )));
        }
        let shift = self.level() - level;
        self.aggregate(self.dim(), level, self.support.span(), |c| {
            [c[0] >> shift, c[1] >> shift, c[2] >> shift]
        })
    }

    /// Marginal on the listed coordinate axes, in the listed order.
    pub fn marginal(&self, axes: &[usize]) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|&a| a >= self.dim()) {
            return Err(LabError::InvalidParameter(format!(
                "marginal axes {axes:?} for dimension {}",
                self.dim()
            )));
        }
        self.aggregate(axes.len(), self.level(), self.support.span(), |c| {
            let mut out = [0; MAX_DIM];
            for (k, &a) in axes.iter().enumerate() {
                out[k] = c[a];
            }
            out
        })
    }

    /// Set block followed by one weight per line.
    pub fn to_text(&self) -> String {
        let mut out = self.support.to_text();
        for w in &self.weights {
            let _ = writeln!(out, "{w:.16e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = grid::numbered_lines(text).collect();
        let Some((&header, rows)) = lines.split_first() else {
            return Err(parse_err(1, "missing header"));
        };
        let (dim, level, span) = grid::parse_header(header)?;
        let ncells = if dim == 1 {
            if rows.len() % 2 != 0 {
                let n = rows.last().map_or(header.0, |r| r.0);
                return Err(parse_err(n, "cell and weight counts differ"));
            }
            rows.len() / 2
        } else {
            rows.iter()
                .position(|(_, l)| l.split_whitespace().count() == 1)
                .unwrap_or(rows.len())
        };
        let (cell_rows, weight_rows) = rows.split_at(ncells);
        if weight_rows.len() != ncells {
            let n = rows.last().map_or(header.0, |r| r.0);
            return Err(parse_err(n, "cell and weight counts differ"));
        }
        let cells = grid::parse_cell_rows(dim, cell_rows)?;
        let mut pairs = Vec::with_capacity(ncells);
        for (c, &(n, w)) in cells.into_iter().zip(weight_rows) {
            let w: f64 = w
                .parse()
                .map_err(|_| parse_err(n, format!("bad weight `{w}`")))?;
            if !w.is_finite() || w < 0.0 {
                return Err(parse_err(n, format!("weight {w} must be finite and >= 0")));
            }
            pairs.push((c, w));
        }
        pairs.sort_by_key(|a| a.0);
        if let Some(i) = pairs.windows(2).position(|p| p[0].0 == p[1].0) {
            return Err(parse_err(cell_rows[i + 1].0, "duplicate cell"));
        }
        let (cells, weights): (Vec<Cell>, Vec<f64>) = pairs.into_iter().unzip();
        let last = rows.last().map_or(header.0, |r| r.0);
        let support = DeltaSet::with_span(dim, level, span, cells)
            .map_err(|e| parse_err(last, e.to_string()))?;
        Self::new(support, weights)
    }
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "{name} = {v} must be positive"
        )));
    }
    Ok(())
}

#[inline]
fn sq_index_dist(a: &Cell, b: &Cell, dim: usize) -> u64 {
    let mut q = 0u64;
    for axis in 0..dim {
        let d = a[axis] as i64 - b[axis] as i64;
        q += (d * d) as u64;
    }
    q
}

/// Smallest `m` with `q < 4^m`, i.e. the first dyadic radius `2^m δ` whose open ball
/// reaches squared index distance `q`.
#[inline]
fn radius_bucket(q: u64) -> usize {
    if q == 0 {
        0
    } else {
        (63 - q.leading_zeros() as usize) / 2 + 1
    }
}

/// Clamped kernel `max(|x-y|, δ)^-s` as a function of squared index distance.
struct Kernel {
    s: f64,
    delta: f64,
    table: Option<Vec<f64>>,
}

const KERNEL_TABLE_MAX: u64 = 1 << 23;

impl Kernel {
    fn new(s: f64, support: &DeltaSet) -> Self {
        let mut k = Self {
            s,
            delta: support.delta(),
            table: None,
        };
        let e = support.extent() as u64 - 1;
        let max_q = support.dim() as u64 * e * e;
        // a table only pays off once there are more pairs than entries
        let pairs = (support.len() as u64).saturating_mul(support.len() as u64);
        if max_q < KERNEL_TABLE_MAX && max_q < pairs {
            k.table = Some((0..=max_q).map(|q| k.eval(q)).collect());
        }
        k
    }

    fn eval(&self, q: u64) -> f64 {
        if q == 0 {
            self.delta.powf(-self.s)
        } else {
            (self.delta * self.delta * q as f64).powf(-0.5 * self.s)
        }
    }

    #[inline]
    fn at(&self, q: u64) -> f64 {
        match &self.table {
            Some(t) => t[q as usize],
            None => self.eval(q),
        }
    }
}

/// `dμ(x1, x2) = dμ1^{x2}(x1) dμ2(x2)`: one slice measure per cell of the base.
///
/// Assembled coordinates put the slice axes first, then the base axes.
#[derive(Clone, Debug, PartialEq)]
pub struct FubiniMeasure {
    base: DiscreteMeasure,
    slices: Vec<DiscreteMeasure>,
}

impl FubiniMeasure {
    pub fn new(base: DiscreteMeasure, slices: Vec<DiscreteMeasure>) -> Result<Self> {
        if slices.len() != base.len() {
            return Err(LabError::DimensionMismatch(format!(
                "{} slices for {} base cells",
                slices.len(),
                base.len()
            )));
        }
        let Some(first) = slices.first() else {
            return Err(LabError::Empty("fubini measure without slices".into()));
        };
        let (n, level, span) = (first.dim(), first.level(), first.support().span());
        for s in &slices {
            if s.dim() != n || s.support().span() != span {
                return Err(LabError::DimensionMismatch("slices differ in shape".into()));
            }
            if s.level() != level {
                return Err(LabError::LevelMismatch {
                    left: level,
                    right: s.level(),
                });
            }
        }
        if base.level() != level {
            return Err(LabError::LevelMismatch {
                left: base.level(),
                right: level,
            });
        }
        if n + base.dim() > MAX_DIM {
            return Err(LabError::DimensionMismatch(format!(
                "assembled dimension {} exceeds 3",
                n + base.dim()
            )));
        }
        Ok(Self { base, slices })
    }

    /// Cartesian product `mu1 × mu2`: every slice equals `mu1`.
    pub fn product(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure) -> Result<Self> {
        Self::new(mu2.clone(), vec![mu1.clone(); mu2.len()])
    }

    pub fn base(&self) -> &DiscreteMeasure {
        &self.base
    }

    pub fn slices(&self) -> &[DiscreteMeasure] {
        &self.slices
    }

    /// Dimension `n` of the slice factor.
    pub fn slice_dim(&self) -> usize {
        self.slices[0].dim()
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn dim(&self) -> usize {
        self.slice_dim() + self.base_dim()
    }

    pub fn level(&self) -> u32 {
        self.base.level()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(
            self.base
                .weights()
                .iter()
                .zip(&self.slices)
                .map(|(w, s)| w * s.total_mass()),
        )
    }

    /// The measure on the product grid.
    pub fn assemble(&self) -> Result<DiscreteMeasure> {
        self.assemble_with(|w| w)
    }

    /// The slices integrated against the uniform probability on the base support
    /// instead of the base weights.
    pub fn assemble_uniform_base(&self) -> Result<DiscreteMeasure> {
        let w = 1.0 / self.base.len() as f64;
        self.assemble_with(|_| w)
    }

    fn assemble_with(&self, base_weight: impl Fn(f64) -> f64) -> Result<DiscreteMeasure> {
        let n = self.slice_dim();
        let span = self.base.support().span().max(self.slices[0].support().span());
        let mut pairs = Vec::new();
        for ((c2, &w2), slice) in self
            .base
            .support()
            .cells()
            .iter()
            .zip(self.base.weights())
            .zip(&self.slices)
        {
            let bw = base_weight(w2);
            for (c1, &w1) in slice.support().cells().iter().zip(slice.weights()) {
                let mut c = [0u32; MAX_DIM];
                c[..n].copy_from_slice(&c1[..n]);
                c[n..n + self.base_dim()].copy_from_slice(&c2[..self.base_dim()]);
                pairs.push((c, bw * w1));
            }
        }
        pairs.sort_by_key(|a| a.0);
        let (cells, weights): (Vec<Cell>, Vec<f64>) = pairs.into_iter().unzip();
        let support = DeltaSet::with_span(self.dim(), self.level(), span, cells)?;
        DiscreteMeasure::new(support, weights)
    }

    /// `sup_{x2} A_α(μ1^{x2})` over the base cells.
    pub fn slice_amplitude(&self, alpha: f64) -> Result<f64> {
        if alpha >= self.slice_dim() as f64 {
            return Err(LabError::Precondition(format!(
                "alpha < n violated: {alpha} >= {}",
                self.slice_dim()
            )));
        }
        let mut best: f64 = 0.0;
        for s in &self.slices {
            if s.is_empty() {
                return Err(LabError::Empty("empty slice".into()));
            }
            best = best.max(s.amplitude(alpha)?);
        }
        Ok(best)
    }
}

pub fn uniform_measure(set: &DeltaSet) -> Result<DiscreteMeasure> {
    DiscreteMeasure::uniform(set)
}

pub fn product_measure(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure) -> Result<FubiniMeasure> {
    FubiniMeasure::product(mu1, mu2)
}

pub fn fubini_slice_amplitude(m: &FubiniMeasure, alpha: f64) -> Result<f64> {
    m.slice_amplitude(alpha)
}
