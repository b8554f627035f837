//! δ-tubes around affine planes, weighted incidence masses, and the incidence bound
//! check.
//!
//! A cell belongs to the tube of `P` when its center is within distance `δ` of `P`.
//! The fast path only visits grid slabs that can meet the tube and then applies the
//! same distance predicate as the brute-force scan, so both produce identical sets.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{parse_err, LabError, Result};
use crate::grassmann::{affine_metric, AffinePlane, Subspace};
use crate::grid::{self, cell_center, Cell, DeltaSet, MAX_DIM};
use crate::linalg::{dot, Vec3, ZERO3};
use crate::measure::DiscreteMeasure;
use crate::numeric::{compensated_sum, split_seed, streams, CompensatedSum};
use crate::projector::{exponent_fubini, exponent_general, MeasureInput, Variant, SPAN_TOLERANCE};
use crate::report::BoundReport;

/// Weighted affine k-planes at one dyadic level: the discrete stand-in for a set
/// `𝒜 ⊂ 𝔸(d,k)` with its λ-weights.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineFamily {
    members: Vec<AffinePlane>,
    weights: Vec<f64>,
    level: u32,
}

impl AffineFamily {
    pub fn new(members: Vec<AffinePlane>, weights: Vec<f64>, level: u32) -> Result<Self> {
        if weights.len() != members.len() {
            return Err(LabError::DimensionMismatch(format!(
                "{} weights for {} planes",
                weights.len(),
                members.len()
            )));
        }
        if let Some(first) = members.first() {
            if members
                .iter()
                .any(|m| m.ambient_dim() != first.ambient_dim() || m.dim() != first.dim())
            {
                return Err(LabError::DimensionMismatch("planes of mixed shape".into()));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(LabError::InvalidParameter("negative or non-finite weight".into()));
        }
        grid::validate_shape(1, level, 1)?;
        Ok(Self {
            members,
            weights,
            level,
        })
    }

    pub fn members(&self) -> &[AffinePlane] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `(d, k)`, or `None` for an empty family.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.members.first().map(|m| (m.ambient_dim(), m.dim()))
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// Same planes at another level, with weights rescaled by `(δ'/δ)^exponent`.
    pub fn at_level(&self, level: u32, exponent: f64) -> Result<Self> {
        let factor = (self.level as f64 - level as f64).exp2().powf(exponent);
        Self::new(
            self.members.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
            level,
        )
    }

    /// Header `d k count level`; per member the basis row-major (d rows of k entries),
    /// the offset and the weight.
    pub fn to_text(&self) -> String {
        let (d, k) = self.shape().unwrap_or((2, 1));
        let mut out = format!("{d} {k} {} {}\n", self.len(), self.level);
        for (m, w) in self.members.iter().zip(&self.weights) {
            let mut row = Vec::with_capacity(d * k + d + 1);
            for i in 0..d {
                for b in m.plane().basis() {
                    row.push(b[i].to_string());
                }
            }
            row.extend(m.offset()[..d].iter().map(f64::to_string));
            row.push(w.to_string());
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = grid::numbered_lines(text);
        let Some((hl, header)) = lines.next() else {
            return Err(parse_err(1, "missing header"));
        };
        let toks: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(hl, format!("bad integer `{t}`"))))
            .collect::<Result<_>>()?;
        let [d, k, count, level] = toks[..] else {
            return Err(parse_err(hl, "expected `d k count level`"));
        };
        if !(2..=3).contains(&d) || k == 0 || k >= d {
            return Err(parse_err(hl, format!("unsupported shape ({d}, {k})")));
        }
        let mut members = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        let mut last = hl;
        for (ln, row) in lines {
            last = ln;
            let vals: Vec<f64> = row
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(ln, format!("bad number `{t}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != d * k + d + 1 {
                return Err(parse_err(ln, format!("expected {} numbers", d * k + d + 1)));
            }
            let mut basis = vec![ZERO3; k];
            for i in 0..d {
                for (j, b) in basis.iter_mut().enumerate() {
                    b[i] = vals[i * k + j];
                }
            }
            let mut offset = ZERO3;
            offset[..d].copy_from_slice(&vals[d * k..d * k + d]);
            let plane = Subspace::new(d, &basis)
                .and_then(|w| AffinePlane::new(w, offset))
                .map_err(|e| parse_err(ln, e.to_string()))?;
            members.push(plane);
            weights.push(vals[d * k + d]);
        }
        if members.len() != count {
            return Err(parse_err(last, format!("header declares {count} planes, found {}", members.len())));
        }
        Self::new(members, weights, level as u32).map_err(|e| parse_err(last, e.to_string()))
    }
}

fn tube_predicate(plane: &AffinePlane, dim: usize, level: u32) -> impl Fn(&Cell) -> bool + '_ {
    let delta = grid::delta(level);
    move |c: &Cell| plane.distance(&cell_center(c, dim, level)) <= delta
}

/// Cells of `[0, 1]^d` at `level` whose centers lie within `δ` of `plane`.
pub fn rasterize_tube(plane: &AffinePlane, level: u32) -> Result<DeltaSet> {
    rasterize_tube_in(plane, level, 1)
}

/// [`rasterize_tube`] on the grid of `[0, span]^d`.
pub fn rasterize_tube_in(plane: &AffinePlane, level: u32, span: u32) -> Result<DeltaSet> {
    let d = plane.ambient_dim();
    grid::validate_shape(d, level, span)?;
    let mut cells = Vec::new();
    tube_cells(plane, level, span, |c| cells.push(c));
    cells.sort_unstable();
    Ok(DeltaSet::from_sorted_unchecked(d, level, span, cells))
}

/// Brute-force scan over every cell of the grid.
pub fn rasterize_tube_brute(plane: &AffinePlane, level: u32, span: u32) -> Result<DeltaSet> {
    let d = plane.ambient_dim();
    grid::validate_shape(d, level, span)?;
    let extent = span << level;
    let inside = tube_predicate(plane, d, level);
    let mut cells = Vec::new();
    grid::for_each_index(d, [extent; MAX_DIM], |c| {
        if inside(&c) {
            cells.push(c);
        }
    });
    Ok(DeltaSet::from_sorted_unchecked(d, level, span, cells))
}

/// Index window `[lo, hi]` of cells whose centers `(i + 1/2)δ` can fall in `[a, b]`,
/// padded by one cell and clipped to the grid.
fn center_window(a: f64, b: f64, delta: f64, extent: u32) -> Option<(u32, u32)> {
    let lo = (a / delta - 0.5).ceil() - 1.0;
    let hi = (b / delta - 0.5).floor() + 1.0;
    let lo = lo.max(0.0);
    let hi = hi.min(extent as f64 - 1.0);
    (lo <= hi).then_some((lo as u32, hi as u32))
}

/// Visits the tube cells of `plane` (unordered). Hyperplanes are solved along their
/// steepest axis; lines in R³ are walked along their dominant direction axis.
fn tube_cells(plane: &AffinePlane, level: u32, span: u32, mut emit: impl FnMut(Cell)) {
    let d = plane.ambient_dim();
    let k = plane.dim();
    let delta = grid::delta(level);
    let extent = span << level;
    let inside = tube_predicate(plane, d, level);
    let center = |i: u32| (i as f64 + 0.5) * delta;
    let u = plane.offset();

    if k + 1 == d {
        let normal = plane
            .plane()
            .complement()
            .expect("hyperplane has a normal")
            .basis()[0];
        let c = dot(&normal, u);
        let a = argmax_abs(&normal, d);
        let others: Vec<usize> = (0..d).filter(|&b| b != a).collect();
        let mut bounds = [1u32; MAX_DIM];
        for (slot, _) in others.iter().enumerate() {
            bounds[slot] = extent;
        }
        grid::for_each_index(d - 1, bounds, |idx| {
            let mut cell = [0u32; MAX_DIM];
            let mut rest = 0.0;
            for (slot, &b) in others.iter().enumerate() {
                cell[b] = idx[slot];
                rest += normal[b] * center(idx[slot]);
            }
            let t0 = (c - delta - rest) / normal[a];
            let t1 = (c + delta - rest) / normal[a];
            if let Some((lo, hi)) = center_window(t0.min(t1), t0.max(t1), delta, extent) {
                for i in lo..=hi {
                    cell[a] = i;
                    if inside(&cell) {
                        emit(cell);
                    }
                }
            }
        });
    } else {
        // a line in R³: cells within δ of the line sit within δ/|w_a| of the line's
        // crossing point in every slab x_a = const
        let w = plane.plane().basis()[0];
        let a = argmax_abs(&w, d);
        let reach = delta / w[a].abs();
        let others: Vec<usize> = (0..d).filter(|&b| b != a).collect();
        for i in 0..extent {
            let t = (center(i) - u[a]) / w[a];
            let mut windows = [(0u32, 0u32); 2];
            let mut empty = false;
            for (slot, &b) in others.iter().enumerate() {
                let q = u[b] + t * w[b];
                match center_window(q - reach, q + reach, delta, extent) {
                    Some(win) => windows[slot] = win,
                    None => empty = true,
                }
            }
            if empty {
                continue;
            }
            let mut cell = [0u32; MAX_DIM];
            cell[a] = i;
            for j in windows[0].0..=windows[0].1 {
                cell[others[0]] = j;
                for l in windows[1].0..=windows[1].1 {
                    cell[others[1]] = l;
                    if inside(&cell) {
                        emit(cell);
                    }
                }
            }
        }
    }
}

fn argmax_abs(v: &Vec3, d: usize) -> usize {
    (0..d)
        .max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()).then(j.cmp(&i)))
        .unwrap()
}

/// Cell → support position lookup: dense when the grid is small, binary search
/// otherwise.
struct SupportIndex<'a> {
    support: &'a DeltaSet,
    dense: Option<Vec<u32>>,
}

const DENSE_INDEX_MAX: u64 = 1 << 24;

impl<'a> SupportIndex<'a> {
    fn new(support: &'a DeltaSet) -> Self {
        let e = support.extent() as u64;
        let size = e.pow(support.dim() as u32);
        let dense = (size <= DENSE_INDEX_MAX).then(|| {
            let mut table = vec![u32::MAX; size as usize];
            for (i, c) in support.cells().iter().enumerate() {
                table[Self::flat(c, e, support.dim())] = i as u32;
            }
            table
        });
        Self { support, dense }
    }

    fn flat(c: &Cell, e: u64, dim: usize) -> usize {
        let mut f = 0u64;
        for &x in &c[..dim] {
            f = f * e + x as u64;
        }
        f as usize
    }

    fn get(&self, c: &Cell) -> Option<usize> {
        match &self.dense {
            Some(t) => {
                let i = t[Self::flat(c, self.support.extent() as u64, self.support.dim())];
                (i != u32::MAX).then_some(i as usize)
            }
            None => self.support.position(c),
        }
    }
}

fn check_compatible(mu: &DiscreteMeasure, fam: &AffineFamily) -> Result<()> {
    if mu.level() != fam.level() {
        return Err(LabError::LevelMismatch {
            left: mu.level(),
            right: fam.level(),
        });
    }
    if let Some((d, _)) = fam.shape() {
        if d != mu.dim() {
            return Err(LabError::DimensionMismatch(format!(
                "measure in R^{}, planes in R^{d}",
                mu.dim()
            )));
        }
    }
    Ok(())
}

/// `μ(tube)` per family member, summed in lexicographic cell order.
fn tube_masses(mu: &DiscreteMeasure, fam: &AffineFamily) -> Result<Vec<f64>> {
    let index = SupportIndex::new(mu.support());
    let span = mu.support().span();
    let weights = mu.weights();
    fam.members
        .par_iter()
        .map(|p| {
            let tube = rasterize_tube_in(p, fam.level, span)?;
            let mut acc = CompensatedSum::new();
            for c in tube.cells() {
                if let Some(i) = index.get(c) {
                    acc.add(weights[i]);
                }
            }
            Ok(acc.value())
        })
        .collect()
}

/// `Σ_P weight(P) · μ(tube(P))`.
pub fn incidence_mass(mu: &DiscreteMeasure, fam: &AffineFamily) -> Result<f64> {
    check_compatible(mu, fam)?;
    let masses = tube_masses(mu, fam)?;
    Ok(compensated_sum(masses.iter().zip(&fam.weights).map(|(m, w)| m * w)))
}

/// The same quantity as a plain double loop over planes and support atoms.
pub fn incidence_mass_brute(mu: &DiscreteMeasure, fam: &AffineFamily) -> Result<f64> {
    check_compatible(mu, fam)?;
    let mut total = CompensatedSum::new();
    for (p, w) in fam.members.iter().zip(&fam.weights) {
        let inside = tube_predicate(p, mu.dim(), mu.level());
        let mut acc = CompensatedSum::new();
        for (c, &m) in mu.support().cells().iter().zip(mu.weights()) {
            if inside(c) {
                acc.add(m);
            }
        }
        total.add(acc.value() * w);
    }
    Ok(total.value())
}

/// Clusters of a greedy r-net.
#[derive(Clone, Debug, PartialEq)]
pub struct Net {
    /// Member indices of the net centers, in the order they were chosen.
    pub centers: Vec<usize>,
    /// For every member, the position in `centers` of its cluster.
    pub assignment: Vec<usize>,
}

/// Maximal r-separated net in `affine_metric`, built greedily over the members in the
/// lexicographic order of [`AffinePlane::sort_key`]. Each member joins the earliest
/// center closer than `r`, otherwise it becomes a center.
pub fn greedy_net(planes: &[AffinePlane], r: f64) -> Result<Net> {
    if !(r > 0.0) {
        return Err(LabError::InvalidParameter(format!("net radius {r}")));
    }
    let mut order: Vec<usize> = (0..planes.len()).collect();
    let keys: Vec<[f64; 9]> = planes.iter().map(AffinePlane::sort_key).collect();
    order.sort_by(|&i, &j| {
        keys[i]
            .iter()
            .zip(&keys[j])
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    // |u - u'| < r and |P00 - P'00| < r both follow from distance < r
    let bucket = |i: usize| -> [i64; 4] {
        let k = &keys[i];
        [
            (k[6] / r).floor() as i64,
            (k[7] / r).floor() as i64,
            (k[8] / r).floor() as i64,
            (k[0] / r).floor() as i64,
        ]
    };
    let mut grid_map: HashMap<[i64; 4], Vec<usize>> = HashMap::new();
    let mut centers: Vec<usize> = Vec::new();
    let mut assignment = vec![0usize; planes.len()];
    for &i in &order {
        let b = bucket(i);
        let mut best: Option<usize> = None;
        for db in 0..81usize {
            let mut nb = b;
            let mut code = db;
            for slot in nb.iter_mut() {
                *slot += (code % 3) as i64 - 1;
                code /= 3;
            }
            if let Some(list) = grid_map.get(&nb) {
                for &ci in list {
                    if best.is_some_and(|b| b <= ci) {
                        continue;
                    }
                    if affine_metric(&planes[i], &planes[centers[ci]])? < r {
                        best = Some(ci);
                    }
                }
            }
        }
        match best {
            Some(ci) => assignment[i] = ci,
            None => {
                assignment[i] = centers.len();
                grid_map.entry(b).or_default().push(centers.len());
                centers.push(i);
            }
        }
    }
    Ok(Net {
        centers,
        assignment,
    })
}

/// `λ(𝒩_δ(𝒜))`: members within affine distance δ merge into one ball, which keeps the
/// largest member weight.
pub fn merged_weight(fam: &AffineFamily) -> Result<f64> {
    let net = greedy_net(&fam.members, grid::delta(fam.level))?;
    let mut best = vec![0.0f64; net.centers.len()];
    for (i, &c) in net.assignment.iter().enumerate() {
        best[c] = best[c].max(fam.weights[i]);
    }
    Ok(compensated_sum(best))
}

/// Keeps the centers of the δ-net, each with its cluster's largest weight.
pub fn merge_family(fam: &AffineFamily) -> Result<AffineFamily> {
    let net = greedy_net(&fam.members, grid::delta(fam.level))?;
    let mut best = vec![0.0f64; net.centers.len()];
    for (i, &c) in net.assignment.iter().enumerate() {
        best[c] = best[c].max(fam.weights[i]);
    }
    let members = net.centers.iter().map(|&i| fam.members[i]).collect();
    AffineFamily::new(members, best, fam.level)
}

/// Incidence bound check with both masses kept for the Fubini variant.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceCheck {
    pub report: BoundReport,
    pub mass_mu: f64,
    /// Mass with the base weights replaced by the uniform probability on the base
    /// support; only for Fubini inputs.
    pub mass_uniform_base: Option<f64>,
    pub merged_weight: f64,
}

/// Compares `μ×λ(I_δ)` with `I_s(μ)^{1/p} A^{(p-2)/p} λ(𝒩_δ(𝒜))^{1/p'} δ^{d-k}`.
pub fn check_incidence_bound(
    input: MeasureInput<'_>,
    fam: &AffineFamily,
    s: f64,
    sigma: f64,
    alpha: f64,
    variant: Variant,
) -> Result<IncidenceCheck> {
    let Some((d, k)) = fam.shape() else {
        return Err(LabError::Empty("incidence check on an empty family".into()));
    };
    let n = d - k;
    let (mu, p, amp, alt) = match (variant, input) {
        (Variant::General, input) => {
            let mu = match input {
                MeasureInput::Plain(m) => m.clone(),
                MeasureInput::Fubini(f) => f.assemble()?,
            };
            let p = exponent_general(d, n, s, sigma, alpha)?;
            let amp = mu.amplitude(alpha)?;
            (mu, p, amp, None)
        }
        (Variant::Fubini, MeasureInput::Plain(_)) => {
            return Err(LabError::Precondition("fubini variant needs a Fubini measure".into()));
        }
        (Variant::Fubini, MeasureInput::Fubini(f)) => {
            if f.slice_dim() != n || f.dim() != d {
                return Err(LabError::DimensionMismatch(format!(
                    "slices of dimension {} against planes of codimension {n}",
                    f.slice_dim()
                )));
            }
            for (i, m) in fam.members.iter().enumerate() {
                let margin = m.plane().complement()?.fubini_span_margin();
                if margin <= SPAN_TOLERANCE {
                    return Err(LabError::Precondition(format!(
                        "span condition violated by member {i} (smallest singular value {margin:e})"
                    )));
                }
            }
            let p = exponent_fubini(d, n, s, sigma, alpha)?;
            let alt = f.assemble_uniform_base()?;
            (f.assemble()?, p, f.slice_amplitude(alpha)?, Some(alt))
        }
    };
    let mass_mu = incidence_mass(&mu, fam)?;
    let mass_alt = alt.map(|m| incidence_mass(&m, fam)).transpose()?;
    let lhs = mass_alt.map_or(mass_mu, |a| a.max(mass_mu));
    let lambda = merged_weight(fam)?;
    let p_conj = p / (p - 1.0);
    let delta = grid::delta(fam.level);
    let rhs = mu.energy(s)?.powf(1.0 / p)
        * amp.powf((p - 2.0) / p)
        * lambda.powf(1.0 / p_conj)
        * delta.powi(n as i32);
    Ok(IncidenceCheck {
        report: BoundReport::new(
            format!("incidence_{}", variant.name()),
            d,
            k,
            s,
            sigma,
            Some(alpha),
            p,
            fam.level,
            lhs,
            rhs,
            fam.len(),
        ),
        mass_mu,
        mass_uniform_base: mass_alt,
        merged_weight: lambda,
    })
}

/// `count` random lines meeting the unit square: a uniform angle and a uniform point of
/// the square per line. The lines do not depend on `level`; each carries the λ-weight
/// `δ²` of one δ-cell of 𝔸(2,1).
pub fn random_lines(count: usize, level: u32, seed: u64) -> Result<AffineFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, streams::LINES));
    let members = (0..count)
        .map(|_| {
            let theta: f64 = rng.random_range(0.0..PI);
            let x: Vec3 = [rng.random(), rng.random(), 0.0];
            AffinePlane::through_point(Subspace::line_at_angle(theta), &x)
        })
        .collect::<Result<Vec<_>>>()?;
    let w = grid::delta(level).powi(2);
    AffineFamily::new(members, vec![w; count], level)
}

/// Every line meeting `[0, 1]²` on the grid of angles `jπ/2^level` and signed offsets
/// that are multiples of `δ`, each with λ-weight `δ²`.
pub fn full_line_family(level: u32) -> Result<AffineFamily> {
    grid::validate_shape(2, level, 1)?;
    let n = 1u64 << level;
    let delta = grid::delta(level);
    let mut members = Vec::new();
    for j in 0..n {
        let theta = j as f64 * PI / n as f64;
        let w = Subspace::line_at_angle(theta);
        let normal = [-theta.sin(), theta.cos(), 0.0];
        // range of normal·x over the square's corners
        let corners = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        let vals: Vec<f64> = corners.iter().map(|c| dot(&normal, c)).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = (lo / delta).ceil() as i64;
        let last = (hi / delta).floor() as i64;
        for m in first..=last {
            let c = m as f64 * delta;
            members.push(AffinePlane::new(w, [normal[0] * c, normal[1] * c, 0.0])?);
        }
    }
    let weight = delta * delta;
    let count = members.len();
    AffineFamily::new(members, vec![weight; count], level)
}
