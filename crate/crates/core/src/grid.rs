//! Dyadic δ-discretization of subsets of `[0, span]^d`.
//!
//! A [`DeltaSet`] is a sorted, duplicate-free list of half-open cells
//! `[i δ, (i + 1) δ)` at scale `δ = 2^-level`. Everything downstream (measures,
//! tubes, sum and product sets) is built from these.

use std::fmt::Write as _;

use crate::error::{parse_err, LabError, Result};
use crate::numeric::least_squares;

pub const MAX_DIM: usize = 3;
/// Deepest supported level; keeps `span * 2^level` inside `u32`.
pub const MAX_LEVEL: u32 = 24;
/// Largest side length of the box `[0, span]^d` a set may live in.
pub const MAX_SPAN: u32 = 8;

/// Integer cell index. Components past the set's dimension are always zero.
pub type Cell = [u32; MAX_DIM];

/// A union of dyadic cells at a single level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaSet {
    dim: usize,
    level: u32,
    span: u32,
    cells: Vec<Cell>,
}

impl DeltaSet {
    /// Builds a set inside the unit cube. Cells are sorted and deduplicated.
    pub fn new(dim: usize, level: u32, cells: Vec<Cell>) -> Result<Self> {
        Self::with_span(dim, level, 1, cells)
    }

    /// Builds a set inside `[0, span]^dim`; indices run over `[0, span * 2^level)`.
    pub fn with_span(dim: usize, level: u32, span: u32, mut cells: Vec<Cell>) -> Result<Self> {
        validate_shape(dim, level, span)?;
        let extent = span << level;
        for c in &cells {
            for (axis, &v) in c.iter().enumerate() {
                if axis < dim && v >= extent {
                    return Err(LabError::OutOfDomain(format!(
                        "cell component {v} outside [0, {extent})"
                    )));
                }
                if axis >= dim && v != 0 {
                    return Err(LabError::DimensionMismatch(format!(
                        "cell {c:?} has a nonzero component past dimension {dim}"
                    )));
                }
            }
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(Self {
            dim,
            level,
            span,
            cells,
        })
    }

    /// Caller guarantees sorted, unique, in-range cells.
    pub(crate) fn from_sorted_unchecked(dim: usize, level: u32, span: u32, cells: Vec<Cell>) -> Self {
        debug_assert!(cells.windows(2).all(|w| w[0] < w[1]));
        Self {
            dim,
            level,
            span,
            cells,
        }
    }

    pub fn empty(dim: usize, level: u32) -> Result<Self> {
        Self::new(dim, level, Vec::new())
    }

    /// Every cell of `[0,1]^dim`.
    pub fn full(dim: usize, level: u32) -> Result<Self> {
        validate_shape(dim, level, 1)?;
        let side = 1u32 << level;
        let total = (side as u64).pow(dim as u32);
        if total > 1 << 26 {
            return Err(LabError::InvalidParameter(format!(
                "full grid of {total} cells is too large"
            )));
        }
        let mut cells = Vec::with_capacity(total as usize);
        for_each_index(dim, [side; MAX_DIM], |c| cells.push(c));
        Ok(Self::from_sorted_unchecked(dim, level, 1, cells))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn span(&self) -> u32 {
        self.span
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn delta(&self) -> f64 {
        delta(self.level)
    }

    /// Cells per axis inside the unit interval.
    pub fn side(&self) -> u32 {
        1 << self.level
    }

    /// Cells per axis across the whole `[0, span]` range.
    pub fn extent(&self) -> u32 {
        self.span << self.level
    }

    pub fn contains(&self, cell: &Cell) -> bool {
        self.cells.binary_search(cell).is_ok()
    }

    pub fn position(&self, cell: &Cell) -> Option<usize> {
        self.cells.binary_search(cell).ok()
    }

    /// Cell center in ambient coordinates (unused axes are zero).
    pub fn center(&self, cell: &Cell) -> [f64; MAX_DIM] {
        cell_center(cell, self.dim, self.level)
    }

    /// Lebesgue measure of the union, `len * δ^dim`.
    pub fn lebesgue(&self) -> f64 {
        self.len() as f64 * self.delta().powi(self.dim as i32)
    }

    /// The parent cells at a coarser level.
    pub fn coarsen(&self, level: u32) -> Result<Self> {
        if level < 1 || level > self.level {
            return Err(LabError::InvalidParameter(format!(
                "coarse level {level} outside [1, {}]",
                self.level
            )));
        }
        let shift = self.level - level;
        let mut cells: Vec<Cell> = self
            .cells
            .iter()
            .map(|c| [c[0] >> shift, c[1] >> shift, c[2] >> shift])
            .collect();
        cells.sort_unstable();
        cells.dedup();
        Ok(Self::from_sorted_unchecked(self.dim, level, self.span, cells))
    }

    /// Re-expresses the set at a wider span without moving any cell.
    pub fn widen(&self, span: u32) -> Result<Self> {
        if span < self.span {
            return Err(LabError::InvalidParameter(format!(
                "cannot shrink span {} to {span}",
                self.span
            )));
        }
        validate_shape(self.dim, self.level, span)?;
        Ok(Self {
            span,
            ..self.clone()
        })
    }

    /// Line-oriented text form: `dim level [span]` then one index vector per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.span == 1 {
            let _ = writeln!(out, "{} {}", self.dim, self.level);
        } else {
            let _ = writeln!(out, "{} {} {}", self.dim, self.level, self.span);
        }
        for c in &self.cells {
            let line: Vec<String> = c[..self.dim].iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = numbered_lines(text).collect();
        let Some((&header, rows)) = lines.split_first() else {
            return Err(parse_err(1, "missing header"));
        };
        let (dim, level, span) = parse_header(header)?;
        let cells = parse_cell_rows(dim, rows)?;
        let last = rows.last().map_or(header.0, |r| r.0);
        DeltaSet::with_span(dim, level, span, cells).map_err(|e| parse_err(last, e.to_string()))
    }
}

pub(crate) fn validate_shape(dim: usize, level: u32, span: u32) -> Result<()> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(LabError::InvalidParameter(format!(
            "dimension {dim} outside 1..=3"
        )));
    }
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(LabError::InvalidParameter(format!(
            "level {level} outside 1..={MAX_LEVEL}"
        )));
    }
    if span == 0 || span > MAX_SPAN {
        return Err(LabError::InvalidParameter(format!(
            "span {span} outside 1..={MAX_SPAN}"
        )));
    }
    Ok(())
}

pub fn delta(level: u32) -> f64 {
    (-(level as f64)).exp2()
}

pub fn cell_center(cell: &Cell, dim: usize, level: u32) -> [f64; MAX_DIM] {
    let d = delta(level);
    let mut x = [0.0; MAX_DIM];
    for axis in 0..dim {
        x[axis] = (cell[axis] as f64 + 0.5) * d;
    }
    x
}

/// Visits every index vector in `[0, bounds)` (first `dim` axes) in lexicographic order.
pub(crate) fn for_each_index(dim: usize, bounds: [u32; MAX_DIM], mut f: impl FnMut(Cell)) {
    let b = |axis: usize| if axis < dim { bounds[axis] } else { 1 };
    for i in 0..b(0) {
        for j in 0..b(1) {
            for k in 0..b(2) {
                f([i, j, k]);
            }
        }
    }
}

pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses a `dim level [span]` header line.
pub(crate) fn parse_header((line, text): (usize, &str)) -> Result<(usize, u32, u32)> {
    let head: Vec<&str> = text.split_whitespace().collect();
    if head.len() != 2 && head.len() != 3 {
        return Err(parse_err(line, "header must be `dim level [span]`"));
    }
    let num = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| parse_err(line, format!("bad header value `{s}`")))
    };
    let dim = num(head[0])? as usize;
    let level = num(head[1])?;
    let span = if head.len() == 3 { num(head[2])? } else { 1 };
    validate_shape(dim, level, span).map_err(|e| parse_err(line, e.to_string()))?;
    Ok((dim, level, span))
}

/// Parses cell rows of `dim` integer indices each.
pub(crate) fn parse_cell_rows(dim: usize, rows: &[(usize, &str)]) -> Result<Vec<Cell>> {
    rows.iter()
        .map(|&(n, line)| {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != dim {
                return Err(parse_err(n, format!("expected {dim} indices")));
            }
            let mut c = [0u32; MAX_DIM];
            for (axis, t) in toks.iter().enumerate() {
                c[axis] = t
                    .parse()
                    .map_err(|_| parse_err(n, format!("bad index `{t}`")))?;
            }
            Ok(c)
        })
        .collect()
}

/// Input shapes for [`quantize`].
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Point(Vec<f64>),
    /// Closed axis-aligned box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// All level cells meeting at least one generator.
pub fn quantize(generators: &[Generator], level: u32, dim: usize) -> Result<DeltaSet> {
    validate_shape(dim, level, 1)?;
    let side = 1u32 << level;
    let n = side as f64;
    let in_unit = |v: &[f64]| v.len() == dim && v.iter().all(|x| (0.0..=1.0).contains(x));
    let index = |x: f64| ((x * n).floor() as u32).min(side - 1);
    let mut cells = Vec::new();
    for g in generators {
        match g {
            Generator::Point(p) => {
                if !in_unit(p) {
                    return Err(LabError::OutOfDomain(format!("point {p:?}")));
                }
                let mut c = [0u32; MAX_DIM];
                for axis in 0..dim {
                    c[axis] = index(p[axis]);
                }
                cells.push(c);
            }
            Generator::Box { lo, hi } => {
                if !in_unit(lo) || !in_unit(hi) || lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Err(LabError::OutOfDomain(format!("box {lo:?}..{hi:?}")));
                }
                let mut first = [0u32; MAX_DIM];
                let mut count = [1u32; MAX_DIM];
                for axis in 0..dim {
                    first[axis] = index(lo[axis]);
                    count[axis] = index(hi[axis]) - first[axis] + 1;
                }
                for_each_index(dim, count, |c| {
                    cells.push([c[0] + first[0], c[1] + first[1], c[2] + first[2]]);
                });
            }
        }
    }
    DeltaSet::new(dim, level, cells)
}

/// Number of distinct `2^-coarse_level` cells occupied by the set.
pub fn box_count(set: &DeltaSet, coarse_level: u32) -> Result<usize> {
    Ok(set.coarsen(coarse_level)?.len())
}

/// All cells within Chebyshev distance `radius_cells` of the set, clipped to the grid.
pub fn neighborhood(set: &DeltaSet, radius_cells: u32) -> DeltaSet {
    if radius_cells == 0 || set.is_empty() {
        return set.clone();
    }
    let r = radius_cells as i64;
    let extent = set.extent() as i64;
    let width = 2 * radius_cells + 1;
    let mut cells = Vec::with_capacity(set.len() * (width as usize).pow(set.dim as u32));
    for c in &set.cells {
        for_each_index(set.dim, [width; MAX_DIM], |off| {
            let mut out = [0u32; MAX_DIM];
            for axis in 0..set.dim {
                let v = c[axis] as i64 + off[axis] as i64 - r;
                if v < 0 || v >= extent {
                    return;
                }
                out[axis] = v as u32;
            }
            cells.push(out);
        });
    }
    cells.sort_unstable();
    cells.dedup();
    DeltaSet::from_sorted_unchecked(set.dim, set.level, set.span, cells)
}

/// Least-squares box-counting fit.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of `log2 count` from the fitted line.
    pub residual: f64,
    pub levels: Vec<u32>,
}

/// Fits `log2 counts[i]` against `levels[i]`.
pub fn fit_log_counts(levels: &[u32], counts: &[usize]) -> Result<DimensionFit> {
    if levels.len() < 3 || levels.len() != counts.len() {
        return Err(LabError::InvalidParameter(
            "dimension fit needs at least 3 levels".into(),
        ));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::InvalidParameter(
            "levels must be strictly increasing".into(),
        ));
    }
    if counts.contains(&0) {
        return Err(LabError::Empty("zero count in dimension fit".into()));
    }
    let xs: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).log2()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).abs())
        .fold(0.0, f64::max);
    Ok(DimensionFit {
        slope,
        intercept,
        residual,
        levels: levels.to_vec(),
    })
}

/// Box-counting dimension over `[min_level, max_level]`.
pub fn box_dimension(set: &DeltaSet, min_level: u32, max_level: u32) -> Result<DimensionFit> {
    if min_level < 1 || max_level > set.level || max_level < min_level + 2 {
        return Err(LabError::InvalidParameter(format!(
            "levels {min_level}..={max_level} must give at least 3 levels inside 1..={}",
            set.level
        )));
    }
    let levels: Vec<u32> = (min_level..=max_level).collect();
    let counts = levels
        .iter()
        .map(|&l| box_count(set, l))
        .collect::<Result<Vec<_>>>()?;
    fit_log_counts(&levels, &counts)
}

struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64) + 1],
            len,
        }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.words[i / 64] >> (i % 64) & 1 == 1)
    }
}

fn check_one_dim_pair(a: &DeltaSet, b: &DeltaSet) -> Result<()> {
    if a.dim != 1 || b.dim != 1 {
        return Err(LabError::DimensionMismatch(
            "sum and product sets are one-dimensional".into(),
        ));
    }
    if a.level != b.level {
        return Err(LabError::LevelMismatch {
            left: a.level,
            right: b.level,
        });
    }
    Ok(())
}

/// Minkowski sum of two 1D sets. Cell `i` plus cell `j` covers cells `i+j` and `i+j+1`;
/// the output span is the sum of the input spans, so nothing is clipped.
pub fn sumset(a: &DeltaSet, b: &DeltaSet) -> Result<DeltaSet> {
    check_one_dim_pair(a, b)?;
    let span = a.span + b.span;
    validate_shape(1, a.level, span)?;
    let extent = (span as usize) << a.level;
    // dilated B: B ∪ (B + 1), as a bitset
    let mut dilated = Bits::new(extent);
    for c in &b.cells {
        dilated.set(c[0] as usize);
        dilated.set(c[0] as usize + 1);
    }
    let mut out = Bits::new(extent);
    let nwords = dilated.words.len();
    for c in &a.cells {
        let shift = c[0] as usize;
        let (ws, bs) = (shift / 64, shift % 64);
        for w in 0..nwords - ws {
            let v = dilated.words[w];
            if v == 0 {
                continue;
            }
            out.words[w + ws] |= v << bs;
            if bs != 0 && w + ws + 1 < out.words.len() {
                out.words[w + ws + 1] |= v >> (64 - bs);
            }
        }
    }
    let cells = out.indices().map(|i| [i as u32, 0, 0]).collect();
    Ok(DeltaSet::from_sorted_unchecked(1, a.level, span, cells))
}

/// Product set of two subsets of `[1, 2]`, each stored in the chart `x ↦ x - 1`.
/// The result lies in `[1, 4)`, stored in the same chart with span 3.
///
/// Endpoint products are exact in integer arithmetic: with `N = 2^level`, cell `i`
/// is `[(N+i)/N, (N+i+1)/N)`.
pub fn productset(a: &DeltaSet, c: &DeltaSet) -> Result<DeltaSet> {
    check_one_dim_pair(a, c)?;
    if a.span != 1 || c.span != 1 {
        return Err(LabError::OutOfDomain(
            "product set factors must lie in [1, 2]".into(),
        ));
    }
    let n = 1u64 << a.level;
    let span = 3u32;
    let extent = (span as usize) << a.level;
    let mut diff = vec![0i64; extent + 1];
    for ca in &a.cells {
        let i = ca[0] as u64;
        for cc in &c.cells {
            let k = cc[0] as u64;
            let (lo, hi) = product_cell_range(n, i, k);
            diff[lo as usize] += 1;
            diff[hi as usize + 1] -= 1;
        }
    }
    let mut cells = Vec::new();
    let mut run = 0i64;
    for (m, d) in diff.iter().take(extent).enumerate() {
        run += d;
        if run > 0 {
            cells.push([m as u32, 0, 0]);
        }
    }
    Ok(DeltaSet::from_sorted_unchecked(1, a.level, span, cells))
}

/// Inclusive chart-index range of cells meeting `cell_i * cell_k` (both in `[1,2]`).
pub(crate) fn product_cell_range(n: u64, i: u64, k: u64) -> (u64, u64) {
    let p = (n + i) * (n + k);
    let q = (n + i + 1) * (n + k + 1);
    // cell m meets [p/n², q/n²) iff (n+m+1) n > p and (n+m) n < q
    let lo = p / n - n;
    let hi = q.div_ceil(n) - 1 - n;
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set1(level: u32, idx: &[u32]) -> DeltaSet {
        DeltaSet::new(1, level, idx.iter().map(|&i| [i, 0, 0]).collect()).unwrap()
    }

    #[test]
    fn quantize_full_interval() {
        let g = [Generator::Box {
            lo: vec![0.0],
            hi: vec![1.0],
        }];
        assert_eq!(quantize(&g, 3, 1).unwrap().len(), 8);
    }

    #[test]
    fn quantize_half_open_point() {
        let s = quantize(&[Generator::Point(vec![0.5, 0.5])], 2, 2).unwrap();
        assert_eq!(s.cells(), &[[2, 2, 0]]);
    }

    #[test]
    fn quantize_two_thirds_boxes() {
        // hand enumeration: [0,.25) [.25,.5) meet [0,1/3]; [.5,.75) [.75,1) meet [2/3,1]
        let g = [
            Generator::Box {
                lo: vec![0.0],
                hi: vec![1.0 / 3.0],
            },
            Generator::Box {
                lo: vec![2.0 / 3.0],
                hi: vec![1.0],
            },
        ];
        let s = quantize(&g, 2, 1).unwrap();
        assert_eq!(s, set1(2, &[0, 1, 2, 3]));
        let g3 = [
            Generator::Box {
                lo: vec![0.0],
                hi: vec![1.0 / 3.0],
            },
            Generator::Box {
                lo: vec![2.0 / 3.0],
                hi: vec![1.0],
            },
        ];
        // at level 3: [0,1/3] meets cells 0..=2, [2/3,1] meets cells 5..=7
        assert_eq!(quantize(&g3, 3, 1).unwrap(), set1(3, &[0, 1, 2, 5, 6, 7]));
    }

    #[test]
    fn quantize_rejects_bad_input() {
        assert!(quantize(&[Generator::Point(vec![0.5])], 0, 1).is_err());
        assert!(quantize(&[Generator::Point(vec![1.5])], 3, 1).is_err());
        assert!(quantize(&[Generator::Point(vec![0.5, 0.5])], 3, 1).is_err());
    }

    #[test]
    fn box_count_examples() {
        let full = DeltaSet::full(1, 5).unwrap();
        assert_eq!(box_count(&full, 3).unwrap(), 8);
        let single = set1(9, &[77]);
        for l in 1..=9 {
            assert_eq!(box_count(&single, l).unwrap(), 1);
        }
        assert!(box_count(&full, 0).is_err());
        assert!(box_count(&full, 6).is_err());
    }

    fn middle_thirds_like(level: u32) -> DeltaSet {
        // ternary-digit Cantor points quantized dyadically
        let mut pts = vec![0.0f64];
        for k in 1..=10 {
            let step = 3f64.powi(-k);
            pts = pts.iter().flat_map(|&p| [p, p + 2.0 * step]).collect();
        }
        let g: Vec<_> = pts.into_iter().map(|p| Generator::Point(vec![p])).collect();
        quantize(&g, level, 1).unwrap()
    }

    #[test]
    fn box_count_cantor_matches_recount() {
        let set = middle_thirds_like(8);
        // independent recount: integer division of each index, distinct values
        let mut coarse: Vec<u32> = set.cells().iter().map(|c| c[0] / 16).collect();
        coarse.dedup();
        let expected = coarse.len();
        assert_eq!(box_count(&set, 4).unwrap(), expected);
    }

    #[test]
    fn neighborhood_examples() {
        let s = set1(4, &[7]);
        assert_eq!(neighborhood(&s, 0), s);
        assert_eq!(neighborhood(&s, 1).len(), 3);
        let s2 = DeltaSet::new(2, 4, vec![[5, 5, 0]]).unwrap();
        assert_eq!(neighborhood(&s2, 1).len(), 9);
        let corner = DeltaSet::new(2, 4, vec![[0, 0, 0]]).unwrap();
        assert_eq!(neighborhood(&corner, 1).len(), 4);
    }

    #[test]
    fn box_dimension_full_cubes() {
        let sq = DeltaSet::full(2, 6).unwrap();
        let fit = box_dimension(&sq, 2, 6).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        let line = DeltaSet::full(1, 8).unwrap();
        assert!((box_dimension(&line, 1, 8).unwrap().slope - 1.0).abs() < 1e-12);
        assert!(box_dimension(&line, 3, 4).is_err());
    }

    #[test]
    fn box_dimension_two_of_four() {
        // keep children 0 and 2 of every 4 at each two-level step
        let mut cells = vec![0u32];
        for _ in 0..6 {
            cells = cells.iter().flat_map(|&c| [4 * c, 4 * c + 2]).collect();
        }
        let set = set1(12, &cells);
        let fit = box_dimension(&set, 2, 12).unwrap();
        assert!((fit.slope - 0.5).abs() < 0.05, "{fit:?}");
    }

    fn interval_sum_oracle(a: &DeltaSet, b: &DeltaSet) -> Vec<u32> {
        // [iδ,(i+1)δ) + [jδ,(j+1)δ) = [(i+j)δ, (i+j+2)δ); in units of δ, collect unions
        let mut out = std::collections::BTreeSet::new();
        for x in a.cells() {
            for y in b.cells() {
                let lo = x[0] + y[0];
                let hi = lo + 2;
                for m in lo..hi {
                    out.insert(m);
                }
            }
        }
        out.into_iter().collect()
    }

    #[test]
    fn sumset_examples() {
        let z = set1(4, &[0]);
        let s = sumset(&z, &z).unwrap();
        assert_eq!(s.cells(), &[[0, 0, 0], [1, 0, 0]]);
        assert_eq!(s.span(), 2);
        let a = set1(4, &[3, 9, 10]);
        let t = sumset(&a, &z).unwrap();
        assert!(a.cells().iter().all(|c| t.contains(c)));
    }

    #[test]
    fn sumset_random_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                let v: Vec<u32> = (0..20).map(|_| rng.random_range(0..256)).collect();
                set1(8, &v)
            };
            let a = pick(&mut rng);
            let b = pick(&mut rng);
            let got: Vec<u32> = sumset(&a, &b).unwrap().cells().iter().map(|c| c[0]).collect();
            assert_eq!(got, interval_sum_oracle(&a, &b));
        }
    }

    fn interval_product_oracle(a: &DeltaSet, c: &DeltaSet) -> Vec<u32> {
        // exact rationals: endpoints (N+i)/N; cell m meets [lo, hi) iff m_lo < hi && m_hi > lo
        let n = a.side() as u128;
        let mut out = std::collections::BTreeSet::new();
        for x in a.cells() {
            for y in c.cells() {
                let (i, k) = (x[0] as u128, y[0] as u128);
                let lo_num = (n + i) * (n + k); // over n²
                let hi_num = (n + i + 1) * (n + k + 1);
                for m in 0..3 * n {
                    let cell_lo = (n + m) * n;
                    let cell_hi = (n + m + 1) * n;
                    if cell_lo < hi_num && cell_hi > lo_num {
                        out.insert(m as u32);
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    #[test]
    fn productset_examples() {
        let one = set1(5, &[0]);
        let p = productset(&one, &one).unwrap();
        // [1, (1+δ)²) = [1, 1 + 2δ + δ²) meets cells 0, 1, 2
        assert_eq!(p.cells(), &[[0, 0, 0], [1, 0, 0], [2, 0, 0]]);
        let a = set1(5, &[4, 5, 6, 20]);
        let q = productset(&a, &one).unwrap();
        assert!(a.cells().iter().all(|c| q.contains(c)));
    }

    #[test]
    fn productset_random_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                let v: Vec<u32> = (0..20).map(|_| rng.random_range(0..256)).collect();
                set1(8, &v)
            };
            let a = pick(&mut rng);
            let c = pick(&mut rng);
            let got: Vec<u32> = productset(&a, &c).unwrap().cells().iter().map(|c| c[0]).collect();
            assert_eq!(got, interval_product_oracle(&a, &c));
        }
    }

    #[test]
    fn productset_rejects_wide_input() {
        let z = set1(4, &[0]);
        let wide = sumset(&z, &z).unwrap();
        assert!(productset(&wide, &z).is_err());
        assert!(sumset(&z, &set1(5, &[0])).is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = DeltaSet::new(2, 3, vec![[1, 2, 0], [7, 0, 0]]).unwrap();
        assert_eq!(DeltaSet::from_text(&s.to_text()).unwrap(), s);
        let w = sumset(&set1(3, &[1]), &set1(3, &[6])).unwrap();
        assert_eq!(DeltaSet::from_text(&w.to_text()).unwrap(), w);
        let err = DeltaSet::from_text("2 3\n1 2\n1\n").unwrap_err();
        assert_eq!(err, parse_err(3, "expected 2 indices"));
    }

    fn arb_set(dim: usize, level: u32) -> impl Strategy<Value = DeltaSet> {
        let side = 1u32 << level;
        prop::collection::vec(prop::array::uniform3(0..side), 1..60).prop_map(move |mut v| {
            for c in &mut v {
                for x in c.iter_mut().skip(dim) {
                    *x = 0;
                }
            }
            DeltaSet::new(dim, level, v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn refinement_sandwich(set in (1usize..=3).prop_flat_map(|d| arb_set(d, 6))) {
            let d = set.dim() as u32;
            for l in 1..set.level() {
                let lo = box_count(&set, l).unwrap();
                let hi = box_count(&set, l + 1).unwrap();
                prop_assert!(lo <= hi && hi <= (1 << d) * lo);
            }
        }

        #[test]
        fn neighborhood_monotone(set in arb_set(2, 5), r in 0u32..3) {
            let n0 = neighborhood(&set, r);
            let n1 = neighborhood(&set, r + 1);
            prop_assert!(set.cells().iter().all(|c| n0.contains(c)));
            prop_assert!(n0.cells().iter().all(|c| n1.contains(c)));
        }

        #[test]
        fn sumset_count_bounds(a in arb_set(1, 7), b in arb_set(1, 7)) {
            let s = sumset(&a, &b).unwrap();
            prop_assert!(s.len() + 1 >= a.len() + b.len());
            prop_assert!(s.len() <= 2 * a.len() * b.len());
        }

        #[test]
        fn quantize_idempotent(set in arb_set(2, 5)) {
            let g: Vec<_> = set.cells().iter().map(|c| {
                let x = set.center(c);
                Generator::Point(vec![x[0], x[1]])
            }).collect();
            prop_assert_eq!(quantize(&g, 5, 2).unwrap(), set);
        }
    }
}
