//! Subspaces of R^d (d <= 3), affine planes, the metrics on G(d,n) and 𝔸(d,k),
//! and finite weighted direction families.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{parse_err, LabError, Result};
use crate::generators::cantor_set;
use crate::grid::{self, DeltaSet};
use crate::linalg::{self, dot, mat_sub, mat_vec, norm, scale, sub, Mat3, Vec3, ZERO3};
use crate::measure::DiscreteMeasure;
use crate::numeric::{compensated_sum, split_seed, streams};

const ORTHO_TOL: f64 = 1e-10;

/// An n-dimensional linear subspace of R^d with an orthonormal basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Subspace {
    d: usize,
    n: usize,
    basis: [Vec3; 3],
}

impl Subspace {
    /// Orthonormalizes `vectors` (Gram–Schmidt, in order).
    pub fn new(d: usize, vectors: &[Vec3]) -> Result<Self> {
        if !(1..=3).contains(&d) || vectors.is_empty() || vectors.len() > d {
            return Err(LabError::DimensionMismatch(format!(
                "{} spanning vectors in R^{d}",
                vectors.len()
            )));
        }
        let mut basis = [ZERO3; 3];
        for (j, v) in vectors.iter().enumerate() {
            if v[d..].iter().any(|&x| x != 0.0) {
                return Err(LabError::DimensionMismatch(format!("vector {v:?} not in R^{d}")));
            }
            let mut w = *v;
            for _ in 0..2 {
                for b in &basis[..j] {
                    w = sub(&w, &scale(b, dot(b, &w)));
                }
            }
            let len = norm(&w);
            if len < 1e-12 * norm(v).max(1.0) {
                return Err(LabError::Degenerate("linearly dependent spanning vectors".into()));
            }
            basis[j] = scale(&w, 1.0 / len);
        }
        Ok(Self {
            d,
            n: vectors.len(),
            basis,
        })
    }

    pub fn line(d: usize, direction: Vec3) -> Result<Self> {
        Self::new(d, &[direction])
    }

    /// Line in R² through the origin at angle `theta` from the first axis.
    pub fn line_at_angle(theta: f64) -> Self {
        Self {
            d: 2,
            n: 1,
            basis: [[theta.cos(), theta.sin(), 0.0], ZERO3, ZERO3],
        }
    }

    /// Span of the listed coordinate axes.
    pub fn coordinate(d: usize, axes: &[usize]) -> Result<Self> {
        let vs: Vec<Vec3> = axes
            .iter()
            .map(|&a| {
                let mut e = ZERO3;
                if a < 3 {
                    e[a] = 1.0;
                }
                e
            })
            .collect();
        Self::new(d, &vs)
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &[Vec3] {
        &self.basis[..self.n]
    }

    /// Orthogonal projector `B Bᵀ`.
    pub fn projector(&self) -> Mat3 {
        let mut p = [[0.0; 3]; 3];
        for b in self.basis() {
            for i in 0..3 {
                for j in 0..3 {
                    p[i][j] += b[i] * b[j];
                }
            }
        }
        p
    }

    /// Orthogonal complement in R^d. The complement of the whole space is rejected.
    pub fn complement(&self) -> Result<Self> {
        if self.n == self.d {
            return Err(LabError::Degenerate("complement of the full space".into()));
        }
        let mut vs: Vec<Vec3> = self.basis().to_vec();
        for axis in 0..self.d {
            let mut e = ZERO3;
            e[axis] = 1.0;
            let mut w = e;
            for _ in 0..2 {
                for b in &vs {
                    w = sub(&w, &scale(b, dot(b, &w)));
                }
            }
            if norm(&w) > 1e-6 {
                vs.push(scale(&w, 1.0 / norm(&w)));
            }
            if vs.len() == self.d {
                break;
            }
        }
        Self::new(self.d, &vs[self.n..])
    }

    /// Coordinates `Bᵀx` of `π_V(x)` in the plane's frame (first `n` entries used).
    pub fn project_point(&self, x: &Vec3) -> Vec3 {
        let mut out = ZERO3;
        for (o, b) in out.iter_mut().zip(self.basis()) {
            *o = dot(b, x);
        }
        out
    }

    /// `π_V(x)` as a point of R^d.
    pub fn project_ambient(&self, x: &Vec3) -> Vec3 {
        mat_vec(&self.projector(), x)
    }

    /// `B c` for plane coordinates `c`.
    pub fn embed(&self, coords: &Vec3) -> Vec3 {
        let mut out = ZERO3;
        for (b, &c) in self.basis().iter().zip(coords) {
            out = linalg::add(&out, &scale(b, c));
        }
        out
    }

    /// Smallest singular value of `[B | e_{n+1} … e_d]`; positive exactly when
    /// `V + ({0} × R^{d-n}) = R^d`.
    pub fn fubini_span_margin(&self) -> f64 {
        let mut cols: Vec<Vec3> = self.basis().to_vec();
        for axis in self.n..self.d {
            let mut e = ZERO3;
            e[axis] = 1.0;
            cols.push(e);
        }
        linalg::smallest_singular_value(&cols, self.d)
    }

    fn check_orthonormal(&self) -> Result<()> {
        let g = linalg::gram(self.basis());
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j { 1.0 } else { 0.0 };
                if (g[i][j] - target).abs() > 1e-9 {
                    return Err(LabError::InvalidParameter("basis is not orthonormal".into()));
                }
            }
        }
        Ok(())
    }
}

fn same_shape(a: &Subspace, b: &Subspace) -> Result<()> {
    if a.d != b.d || a.n != b.n {
        return Err(LabError::DimensionMismatch(format!(
            "G({},{}) vs G({},{})",
            a.d, a.n, b.d, b.n
        )));
    }
    Ok(())
}

/// `‖π_V − π_V'‖` in operator norm.
pub fn grassmann_metric(v: &Subspace, vp: &Subspace) -> Result<f64> {
    same_shape(v, vp)?;
    Ok(linalg::symmetric_operator_norm(&mat_sub(&v.projector(), &vp.projector()), v.d).min(1.0))
}

/// `W + u` with `u ∈ W^⊥`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffinePlane {
    plane: Subspace,
    offset: Vec3,
}

impl AffinePlane {
    pub fn new(plane: Subspace, offset: Vec3) -> Result<Self> {
        let along = norm(&plane.project_ambient(&offset));
        if along > ORTHO_TOL * norm(&offset).max(1.0) {
            return Err(LabError::InvalidParameter(format!(
                "offset has component {along:e} along the plane"
            )));
        }
        if offset[plane.d..].iter().any(|&x| x != 0.0) {
            return Err(LabError::DimensionMismatch("offset outside R^d".into()));
        }
        // planes meeting [0, span]^d for some supported span
        if norm(&offset) > grid::MAX_SPAN as f64 * (plane.d as f64).sqrt() + 1e-9 {
            return Err(LabError::OutOfDomain(format!(
                "offset length {} misses every grid box",
                norm(&offset)
            )));
        }
        Ok(Self { plane, offset })
    }

    /// The translate of `plane` containing `x`.
    pub fn through_point(plane: Subspace, x: &Vec3) -> Result<Self> {
        let u = sub(x, &plane.project_ambient(x));
        Self::new(plane, u)
    }

    pub fn plane(&self) -> &Subspace {
        &self.plane
    }

    pub fn offset(&self) -> &Vec3 {
        &self.offset
    }

    pub fn ambient_dim(&self) -> usize {
        self.plane.d
    }

    pub fn dim(&self) -> usize {
        self.plane.n
    }

    /// Euclidean distance from `x` to the plane.
    pub fn distance(&self, x: &Vec3) -> f64 {
        let perp = sub(x, &self.plane.project_ambient(x));
        norm(&sub(&perp, &self.offset))
    }

    /// A point of the plane from plane coordinates.
    pub fn point(&self, coords: &Vec3) -> Vec3 {
        linalg::add(&self.offset, &self.plane.embed(coords))
    }

    /// Projector upper triangle followed by the offset: a canonical ordering key that
    /// does not depend on the chosen basis.
    pub fn sort_key(&self) -> [f64; 9] {
        let p = self.plane.projector();
        [
            p[0][0], p[0][1], p[0][2], p[1][1], p[1][2], p[2][2], self.offset[0], self.offset[1],
            self.offset[2],
        ]
    }
}

/// `d_G(W, W') + |u − u'|`.
pub fn affine_metric(p: &AffinePlane, pp: &AffinePlane) -> Result<f64> {
    Ok(grassmann_metric(&p.plane, &pp.plane)? + norm(&sub(&p.offset, &pp.offset)))
}

/// How a direction family is sampled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DirectionSpec {
    /// A uniform net of the whole Grassmannian.
    Full,
    /// Angles forming a Cantor (δ,σ)-set in `[0, π)`; planar lines only.
    Cantor(f64),
}

/// Finite weighted family of n-planes, the discrete stand-in for a Frostman measure
/// on G(d,n).
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionFamily {
    members: Vec<Subspace>,
    weights: Vec<f64>,
    sigma: f64,
    angular_level: u32,
}

impl DirectionFamily {
    pub fn new(members: Vec<Subspace>, weights: Vec<f64>, sigma: f64, angular_level: u32) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(LabError::Empty("direction family without members".into()));
        };
        if weights.len() != members.len() {
            return Err(LabError::DimensionMismatch(format!(
                "{} weights for {} members",
                weights.len(),
                members.len()
            )));
        }
        for m in &members {
            same_shape(first, m)?;
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(LabError::InvalidParameter("negative or non-finite weight".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidParameter(format!("weights sum to {total}")));
        }
        Ok(Self {
            members,
            weights,
            sigma,
            angular_level,
        })
    }

    /// A single subspace with weight one.
    pub fn single(v: Subspace) -> Self {
        Self {
            members: vec![v],
            weights: vec![1.0],
            sigma: 0.0,
            angular_level: 0,
        }
    }

    fn uniform(members: Vec<Subspace>, sigma: f64, angular_level: u32) -> Result<Self> {
        let w = 1.0 / members.len() as f64;
        let weights = vec![w; members.len()];
        Self::new(members, weights, sigma, angular_level)
    }

    pub fn members(&self) -> &[Subspace] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn angular_level(&self) -> u32 {
        self.angular_level
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.members[0].d
    }

    pub fn plane_dim(&self) -> usize {
        self.members[0].n
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Subspace, f64)> {
        self.members.iter().zip(self.weights.iter().copied())
    }

    /// Keeps the members satisfying `keep` and renormalizes their weights.
    pub fn restricted(&self, keep: impl Fn(&Subspace) -> bool) -> Result<Self> {
        let (members, weights): (Vec<Subspace>, Vec<f64>) =
            self.iter().filter(|(v, _)| keep(v)).map(|(v, w)| (*v, w)).unzip();
        let total = compensated_sum(weights.iter().copied());
        if members.is_empty() || total <= 0.0 {
            return Err(LabError::Empty("restriction removed every member".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::new(members, weights, self.sigma, self.angular_level)
    }

    /// For planar lines: the angle parameters in `[0, π)` as a measure on `[0, 1)`
    /// (angle / π) at the family's angular level.
    pub fn angle_measure(&self) -> Result<DiscreteMeasure> {
        if self.ambient_dim() != 2 || self.plane_dim() != 1 {
            return Err(LabError::Unsupported("angle measure needs lines in R^2".into()));
        }
        let level = self.angular_level.max(1);
        let n = 1u64 << level;
        let mut pairs: Vec<([u32; 3], f64)> = self
            .iter()
            .map(|(v, w)| {
                let b = v.basis()[0];
                let theta = b[1].atan2(b[0]).rem_euclid(PI);
                let i = ((theta / PI * n as f64).round() as u64 % n) as u32;
                ([i, 0, 0], w)
            })
            .collect();
        pairs.sort_by_key(|a| a.0);
        let mut cells = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (c, w) in pairs {
            if cells.last() == Some(&c) {
                *weights.last_mut().unwrap() += w;
            } else {
                cells.push(c);
                weights.push(w);
            }
        }
        DiscreteMeasure::new(DeltaSet::new(1, level, cells)?, weights)
    }

    /// Largest `ν(B(V, r)) / r^α` over members and radii `r = 2^{m - angular_level} ≤ 1`
    /// in the Grassmann metric (open balls).
    pub fn frostman_constant(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) {
            return Err(LabError::InvalidParameter(format!("alpha = {alpha}")));
        }
        let level = self.angular_level as usize;
        let radii: Vec<f64> = (0..=level).map(|m| grid::delta((level - m) as u32)).collect();
        let radii = if level == 0 { vec![1.0] } else { radii };
        let projectors: Vec<Mat3> = self.members.iter().map(Subspace::projector).collect();
        let d = self.ambient_dim();
        Ok(projectors
            .par_iter()
            .map(|p| {
                let mut mass = vec![0.0; radii.len()];
                for (q, &w) in projectors.iter().zip(&self.weights) {
                    let dist = linalg::symmetric_operator_norm(&mat_sub(p, q), d);
                    for (m, r) in radii.iter().enumerate() {
                        if dist < *r {
                            mass[m] += w;
                        }
                    }
                }
                mass.iter()
                    .zip(&radii)
                    .map(|(m, r)| m / r.powf(alpha))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max))
    }

    /// Header `d n count sigma angular_level`, then per member the basis row-major
    /// (d rows of n entries) and the weight.
    pub fn to_text(&self) -> String {
        let (d, n) = (self.ambient_dim(), self.plane_dim());
        let mut out = format!("{d} {n} {} {} {}\n", self.len(), self.sigma, self.angular_level);
        for (v, w) in self.iter() {
            let mut row = Vec::with_capacity(d * n + 1);
            for i in 0..d {
                for b in v.basis() {
                    row.push(b[i].to_string());
                }
            }
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
        let toks: Vec<&str> = header.split_whitespace().collect();
        if !(4..=5).contains(&toks.len()) {
            return Err(parse_err(hl, "expected `d n count sigma [angular_level]`"));
        }
        let int = |t: &str| t.parse::<usize>().map_err(|_| parse_err(hl, format!("bad integer `{t}`")));
        let (d, n, count) = (int(toks[0])?, int(toks[1])?, int(toks[2])?);
        let sigma: f64 = toks[3].parse().map_err(|_| parse_err(hl, format!("bad sigma `{}`", toks[3])))?;
        let angular_level = match toks.get(4) {
            Some(t) => int(t)? as u32,
            None => 0,
        };
        if !(1..=3).contains(&d) || n == 0 || n > d {
            return Err(parse_err(hl, format!("unsupported shape ({d}, {n})")));
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
            if vals.len() != d * n + 1 {
                return Err(parse_err(ln, format!("expected {} numbers", d * n + 1)));
            }
            let mut basis = [ZERO3; 3];
            for i in 0..d {
                for j in 0..n {
                    basis[j][i] = vals[i * n + j];
                }
            }
            let v = Subspace { d, n, basis };
            v.check_orthonormal().map_err(|e| parse_err(ln, e.to_string()))?;
            members.push(v);
            weights.push(vals[d * n]);
        }
        if members.len() != count {
            return Err(parse_err(last, format!("header declares {count} members, found {}", members.len())));
        }
        Self::new(members, weights, sigma, angular_level).map_err(|e| parse_err(last, e.to_string()))
    }
}

/// Largest angular level accepted for 3D nets (about 2·4^L/π members).
pub const MAX_ANGULAR_LEVEL_3D: u32 = 10;
pub const MAX_ANGULAR_LEVEL_2D: u32 = 22;

/// Samples a direction family on G(d, n) for `(d, n)` in {(2,1), (3,1), (3,2)}.
///
/// Planar `Full` families are the lines at angles `kπ/2^L`. In R³ the unit normals
/// (or directions) come from a ring net of the upper hemisphere with spacing about
/// `π/2^L`, and planes are their complements.
pub fn sample_directions(
    d: usize,
    n: usize,
    spec: DirectionSpec,
    angular_level: u32,
    seed: u64,
) -> Result<DirectionFamily> {
    if angular_level < 3 {
        return Err(LabError::InvalidParameter(format!(
            "angular_level {angular_level} < 3"
        )));
    }
    match (d, n, spec) {
        (2, 1, DirectionSpec::Full) => {
            if angular_level > MAX_ANGULAR_LEVEL_2D {
                return Err(LabError::InvalidParameter("angular_level too large".into()));
            }
            let count = 1u64 << angular_level;
            let members = (0..count)
                .map(|k| Subspace::line_at_angle(k as f64 * PI / count as f64))
                .collect();
            DirectionFamily::uniform(members, 1.0, angular_level)
        }
        (2, 1, DirectionSpec::Cantor(sigma)) => {
            if angular_level > MAX_ANGULAR_LEVEL_2D {
                return Err(LabError::InvalidParameter("angular_level too large".into()));
            }
            let set = cantor_set(angular_level, sigma, split_seed(seed, streams::DIRECTIONS))?;
            let scale = PI * set.delta();
            let members = set
                .cells()
                .iter()
                .map(|c| Subspace::line_at_angle(c[0] as f64 * scale))
                .collect();
            DirectionFamily::uniform(members, sigma, angular_level)
        }
        (3, 1 | 2, DirectionSpec::Full) => {
            if angular_level > MAX_ANGULAR_LEVEL_3D {
                return Err(LabError::InvalidParameter("angular_level too large".into()));
            }
            let units = hemisphere_net(angular_level);
            let members = units
                .into_iter()
                .map(|u| {
                    let line = Subspace::line(3, u)?;
                    if n == 1 {
                        Ok(line)
                    } else {
                        line.complement()
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            DirectionFamily::uniform(members, 2.0, angular_level)
        }
        (3, _, DirectionSpec::Cantor(_)) => Err(LabError::Unsupported(
            "cantor direction families are only built for lines in R^2".into(),
        )),
        _ => Err(LabError::Unsupported(format!("direction family on G({d},{n})"))),
    }
}

fn hemisphere_net(level: u32) -> Vec<Vec3> {
    let big_n = 1usize << level;
    let step = PI / big_n as f64;
    let mut out = Vec::new();
    for i in 0..big_n / 2 {
        let polar = (i as f64 + 0.5) * step;
        let ring = ((2.0 * big_n as f64 * polar.sin()).round() as usize).max(1);
        let shift = if i % 2 == 1 { 0.5 } else { 0.0 };
        for j in 0..ring {
            let az = 2.0 * PI * (j as f64 + shift) / ring as f64;
            out.push([polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos()]);
        }
    }
    out
}
