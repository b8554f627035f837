//! Dual Furstenberg families built from projections, their box dimension in the
//! affine Grassmannian, and the dimension bounds they are compared against.

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::generators::{cantor_set, product_set};
use crate::grassmann::{sample_directions, AffinePlane, DirectionFamily, DirectionSpec};
use crate::grid::{self, fit_log_counts, DeltaSet, DimensionFit};
use crate::incidence::{greedy_net, merge_family, AffineFamily};
use crate::numeric::{split_seed, streams};
use crate::report::{fmt_num, CsvRow};

/// `{V + π_{V⊥}(x) : V ∈ 𝒱, x ∈ E}`: for every direction and every cell center of `E`
/// the n-plane parallel to `V` through `x`. Members closer than `δ` are merged; each
/// carries `ν(V)·δ^{d-n}`.
pub fn dual_furstenberg_example(e: &DeltaSet, dirs: &DirectionFamily) -> Result<AffineFamily> {
    let fam = dual_furstenberg_pairs(e, dirs)?;
    merge_family(&fam)
}

/// The unmerged family, one member per (direction, cell) pair in that order.
pub fn dual_furstenberg_pairs(e: &DeltaSet, dirs: &DirectionFamily) -> Result<AffineFamily> {
    if e.is_empty() || dirs.is_empty() {
        return Err(LabError::Empty("dual family needs points and directions".into()));
    }
    if e.dim() != dirs.ambient_dim() {
        return Err(LabError::DimensionMismatch(format!(
            "points in R^{}, directions in R^{}",
            e.dim(),
            dirs.ambient_dim()
        )));
    }
    let codim = (e.dim() - dirs.plane_dim()) as i32;
    let vol = e.delta().powi(codim);
    let per_dir: Vec<Vec<(AffinePlane, f64)>> = dirs
        .members()
        .par_iter()
        .zip(dirs.weights())
        .map(|(v, &w)| {
            e.cells()
                .iter()
                .map(|c| Ok((AffinePlane::through_point(*v, &e.center(c))?, w * vol)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let (members, weights): (Vec<_>, Vec<_>) = per_dir.into_iter().flatten().unzip();
    AffineFamily::new(members, weights, e.level())
}

/// Slope of `log₂ N(r)` against `ℓ` for greedy r-nets at `r = 2^-ℓ`.
pub fn affine_box_dimension(fam: &AffineFamily, min_level: u32, max_level: u32) -> Result<DimensionFit> {
    if fam.len() < 2 {
        return Err(LabError::Degenerate("net counts of a single plane".into()));
    }
    if min_level >= max_level || max_level - min_level < 2 {
        return Err(LabError::InvalidParameter(format!(
            "need at least 3 levels, got {min_level}..={max_level}"
        )));
    }
    let levels: Vec<u32> = (min_level..=max_level).collect();
    let counts = levels
        .iter()
        .map(|&l| Ok(greedy_net(fam.members(), grid::delta(l))?.centers.len()))
        .collect::<Result<Vec<_>>>()?;
    fit_log_counts(&levels, &counts)
}

/// A lower bound together with whether its hypothesis `s > (k+1)(d-k) - σ` holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    pub hypothesis_met: bool,
}

/// `t + (d-k) - (d-s)(σ-t) / (d + σ - (k+1)(d-k))`, or with a product split
/// `s = s1 + s2`: `t + (d-k) - (d-k-s1)(σ-t) / (d-k + s2 + σ - (k+1)(d-k))`.
///
/// The formula is evaluated outside its hypothesis too; the flag records it.
pub fn thm13_lower_bound(
    d: usize,
    k: usize,
    s: f64,
    t: f64,
    sigma: f64,
    split: Option<(f64, f64)>,
) -> Result<LowerBound> {
    if !(2..=3).contains(&d) || k == 0 || k >= d {
        return Err(LabError::InvalidParameter(format!("unsupported (d, k) = ({d}, {k})")));
    }
    let (df, kf) = (d as f64, k as f64);
    let critical = (kf + 1.0) * (df - kf);
    let (num, den) = match split {
        None => (df - s, df + sigma - critical),
        Some((s1, s2)) => {
            if (s1 + s2 - s).abs() > 1e-12 {
                return Err(LabError::Precondition(format!("s1 + s2 = s violated: {s1} + {s2} != {s}")));
            }
            (df - kf - s1, df - kf + s2 + sigma - critical)
        }
    };
    if !(den > 0.0) {
        return Err(LabError::Precondition(format!("denominator {den} must be positive")));
    }
    Ok(LowerBound {
        value: t + (df - kf) - num * (sigma - t) / den,
        hypothesis_met: s > critical - sigma,
    })
}

/// `min{t + s, (3t + s)/2, t + 1}`.
pub fn conjectured_upper_bound(s: f64, t: f64) -> f64 {
    (t + s).min((3.0 * t + s) / 2.0).min(t + 1.0)
}

/// One measured dual Furstenberg family against its bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct FurstenbergReport {
    pub d: usize,
    pub k: usize,
    pub s: f64,
    pub t: f64,
    pub sigma: f64,
    pub measured_dim: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub min_level: u32,
    pub max_level: u32,
    pub hypothesis_met: bool,
    pub family_size: usize,
}

/// Tolerance on both sides of the bound sandwich.
pub const SANDWICH_TOLERANCE: f64 = 0.15;

impl FurstenbergReport {
    pub fn in_sandwich(&self) -> bool {
        self.measured_dim >= self.lower_bound - SANDWICH_TOLERANCE
            && self.measured_dim <= self.upper_bound + SANDWICH_TOLERANCE
    }
}

impl CsvRow for FurstenbergReport {
    const HEADER: &'static [&'static str] = &[
        "d", "k", "s", "t", "sigma", "measured_dim", "lower_bound", "upper_bound", "levels",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.k.to_string(),
            fmt_num(self.s),
            fmt_num(self.t),
            fmt_num(self.sigma),
            fmt_num(self.measured_dim),
            fmt_num(self.lower_bound),
            fmt_num(self.upper_bound),
            format!("{}-{}", self.min_level, self.max_level),
        ]
    }
}

/// Planar experiment: `E` a product of two Cantor sets of dimension `s/2` each and
/// `𝒱` a Cantor family of line directions of dimension `t`, both built at
/// `build_level`; the family's dimension is fitted over `min_level..=max_level`.
pub fn run_furstenberg(
    s: f64,
    t: f64,
    sigma: f64,
    build_level: u32,
    min_level: u32,
    max_level: u32,
    seed: u64,
) -> Result<FurstenbergReport> {
    if max_level > build_level {
        return Err(LabError::InvalidParameter(format!(
            "fit level {max_level} finer than build level {build_level}"
        )));
    }
    let e1 = cantor_set(build_level, s / 2.0, split_seed(seed, streams::CANTOR_A))?;
    let e2 = cantor_set(build_level, s / 2.0, split_seed(seed, streams::CANTOR_B))?;
    let e = product_set(&e1, &e2)?;
    let dirs = sample_directions(2, 1, DirectionSpec::Cantor(t), build_level, seed)?;
    let fam = dual_furstenberg_example(&e, &dirs)?;
    let fit = affine_box_dimension(&fam, min_level, max_level)?;
    let lower = thm13_lower_bound(2, 1, s, t, sigma, None)?;
    Ok(FurstenbergReport {
        d: 2,
        k: 1,
        s,
        t,
        sigma,
        measured_dim: fit.slope,
        lower_bound: lower.value,
        upper_bound: conjectured_upper_bound(s, t),
        min_level,
        max_level,
        hypothesis_met: lower.hypothesis_met,
        family_size: fam.len(),
    })
}
