//! Sum-product through incidences: lines `x₂ = c(x₁ - b)` over `B × C`, point-line
//! duality, and discretized `|A+B|`, `|AC|` for sets in `[1, 2]`.
//!
//! One-dimensional sets in `[1, 2]` are span-1 `DeltaSet`s in the chart `x - 1`. The
//! plane experiments use the chart `(x₁ - 2, x₂ - 1)` with span 3, which holds
//! `(A+B) × (AC) ⊂ [2, 4] × [1, 4]`.

use crate::error::{LabError, Result};
use crate::generators::{non_concentration_constant, product_set};
use crate::grassmann::{AffinePlane, Subspace};
use crate::grid::{self, productset, sumset, DeltaSet};
use crate::incidence::{incidence_mass, AffineFamily};
use crate::measure::DiscreteMeasure;
use crate::report::{fmt_num, CsvRow};

/// Offset of the plane chart: chart coordinates are `x - CHART_ORIGIN`.
pub const CHART_ORIGIN: [f64; 2] = [2.0, 1.0];
/// Exponent slack standing in for the arbitrary `ε`.
pub const EPSILON_SLACK: f64 = 0.1;
/// Largest non-concentration constant accepted when auditing `B` and `C`.
pub const AUDIT_LIMIT: f64 = 8.0;

/// The non-vertical line `x₂ = slope·x₁ + intercept`, kept exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line2 {
    pub slope: f64,
    pub intercept: f64,
}

impl Line2 {
    pub fn residual(&self, x: [f64; 2]) -> f64 {
        x[1] - (self.slope * x[0] + self.intercept)
    }

    pub fn contains(&self, x: [f64; 2], tol: f64) -> bool {
        self.residual(x).abs() <= tol
    }

    /// The same line written in chart coordinates.
    pub fn in_chart(&self) -> Line2 {
        Line2 {
            slope: self.slope,
            intercept: self.slope * CHART_ORIGIN[0] + self.intercept - CHART_ORIGIN[1],
        }
    }

    pub fn to_plane(&self) -> Result<AffinePlane> {
        let dir = Subspace::line(2, [1.0, self.slope, 0.0])?;
        AffinePlane::through_point(dir, &[0.0, self.intercept, 0.0])
    }

    pub fn from_plane(p: &AffinePlane) -> Result<Self> {
        if p.ambient_dim() != 2 || p.dim() != 1 {
            return Err(LabError::DimensionMismatch("expected a line in the plane".into()));
        }
        let w = p.plane().basis()[0];
        if w[0].abs() < 1e-12 {
            return Err(LabError::OutOfDomain("vertical line has no dual point".into()));
        }
        let slope = w[1] / w[0];
        let u = p.offset();
        Ok(Line2 {
            slope,
            intercept: u[1] - slope * u[0],
        })
    }
}

/// `(a, b) ↦ {x₂ = a x₁ + b}`.
pub fn duality_point_to_line(a: f64, b: f64) -> Line2 {
    Line2 {
        slope: a,
        intercept: b,
    }
}

/// `{x₂ = a x₁ + b} ↦ (-a, b)`.
pub fn duality_line_to_point(l: &Line2) -> [f64; 2] {
    [-l.slope, l.intercept]
}

/// [`duality_line_to_point`] for a line given as an affine plane.
pub fn duality_plane_to_point(p: &AffinePlane) -> Result<[f64; 2]> {
    Ok(duality_line_to_point(&Line2::from_plane(p)?))
}

fn unit_interval_centers(set: &DeltaSet) -> Result<Vec<f64>> {
    if set.dim() != 1 || set.span() != 1 {
        return Err(LabError::OutOfDomain("expected a one-dimensional set in [1, 2]".into()));
    }
    Ok(set.cells().iter().map(|c| 1.0 + set.center(c)[0]).collect())
}

/// `x₂ = c(x₁ - b)` for every pair of cell centers, `b` outer.
pub fn sumproduct_lines(b: &DeltaSet, c: &DeltaSet) -> Result<Vec<Line2>> {
    if b.level() != c.level() {
        return Err(LabError::LevelMismatch {
            left: b.level(),
            right: c.level(),
        });
    }
    let bs = unit_interval_centers(b)?;
    let cs = unit_interval_centers(c)?;
    Ok(bs
        .iter()
        .flat_map(|&b| cs.iter().map(move |&c| Line2 { slope: c, intercept: -c * b }))
        .collect())
}

/// [`sumproduct_lines`] as a family in the plane chart, each line weighing `δ²`.
pub fn line_family(b: &DeltaSet, c: &DeltaSet) -> Result<AffineFamily> {
    let members = sumproduct_lines(b, c)?
        .iter()
        .map(|l| l.in_chart().to_plane())
        .collect::<Result<Vec<_>>>()?;
    let w = b.delta().powi(2);
    let n = members.len();
    AffineFamily::new(members, vec![w; n], b.level())
}

/// `1 - (s_B + s_C - 1) / (2 min{s_B, s_C})`, defined for `s_B + s_C >= 1`. At the
/// boundary the exponent is 1.
pub fn sumproduct_exponent(s_b: f64, s_c: f64) -> Result<f64> {
    for s in [s_b, s_c] {
        if !(s > 0.0 && s <= 1.0) {
            return Err(LabError::InvalidParameter(format!("dimension {s} outside (0, 1]")));
        }
    }
    if s_b + s_c < 1.0 {
        return Err(LabError::Precondition(format!("s_B + s_C = {} is below 1", s_b + s_c)));
    }
    Ok(sumproduct_exponent_unchecked(s_b, s_c))
}

/// The same expression with no gate; at `s_B = s_C` it is `1/(2 s_B)`.
pub fn sumproduct_exponent_unchecked(s_b: f64, s_c: f64) -> f64 {
    1.0 - (s_b + s_c - 1.0) / (2.0 * s_b.min(s_c))
}

/// Largest `|x₂ - c(x₁ - b)|` over witnesses `(a+b, ac)`, and whether every witness
/// lies in a cell of `(A+B) × (AC)`.
pub fn witness_check(a: &DeltaSet, b: &DeltaSet, c: &DeltaSet) -> Result<(f64, bool)> {
    let sums = sumset(a, b)?;
    let prods = productset(a, c)?;
    let (av, bv, cv) = (unit_interval_centers(a)?, unit_interval_centers(b)?, unit_interval_centers(c)?);
    let inv = 1.0 / a.delta();
    let cell_of = |x: f64, origin: f64| [((x - origin) * inv).floor() as u32, 0, 0];
    let mut worst = 0.0f64;
    let mut inside = true;
    for &bb in &bv {
        for &cc in &cv {
            let line = Line2 { slope: cc, intercept: -cc * bb };
            for &aa in &av {
                let x = [aa + bb, aa * cc];
                worst = worst.max(line.residual(x).abs());
                inside &= sums.contains(&cell_of(x[0], CHART_ORIGIN[0]))
                    && prods.contains(&cell_of(x[1], CHART_ORIGIN[1]));
            }
        }
    }
    Ok((worst, inside))
}

/// One sum-product instance at one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct SumProductReport {
    pub level: u32,
    pub s_b: f64,
    pub s_c: f64,
    /// Lebesgue measures: cell count times `δ`.
    pub card_a: f64,
    pub sum_size: f64,
    pub prod_size: f64,
    pub max_size: f64,
    pub exponent: f64,
    /// `|A|^exponent`.
    pub bound: f64,
    pub ratio: f64,
    /// `max_size ≥ bound · δ^EPSILON_SLACK`.
    pub pass: bool,
    /// `s_B + s_C >= 1` and both audits under [`AUDIT_LIMIT`].
    pub hypothesis_met: bool,
    pub audit_b: f64,
    pub audit_c: f64,
    /// `δ |A| · λ(𝓛)` against the measured incidence of `𝓛` with Lebesgue on `F`.
    pub incidence_lower: Option<f64>,
    pub incidence_mass: Option<f64>,
    pub witness_residual: f64,
    pub witness_inside: bool,
}

impl CsvRow for SumProductReport {
    const HEADER: &'static [&'static str] = &[
        "level", "sB", "sC", "cardA", "sumsize", "prodsize", "maxsize", "exponent", "bound",
        "ratio", "pass",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            self.level.to_string(),
            fmt_num(self.s_b),
            fmt_num(self.s_c),
            fmt_num(self.card_a),
            fmt_num(self.sum_size),
            fmt_num(self.prod_size),
            fmt_num(self.max_size),
            fmt_num(self.exponent),
            fmt_num(self.bound),
            fmt_num(self.ratio),
            self.pass.to_string(),
        ]
    }
}

/// Sizes of `A+B` and `AC` against `|A|^exponent`. Out-of-range dimensions or failed
/// audits do not stop the run; they clear `hypothesis_met`. With `with_incidence`
/// the tube incidence of `𝓛` against Lebesgue on `(A+B) × (AC)` is measured too.
pub fn run_sumproduct(
    a: &DeltaSet,
    b: &DeltaSet,
    c: &DeltaSet,
    s_b: f64,
    s_c: f64,
    with_incidence: bool,
) -> Result<SumProductReport> {
    if a.is_empty() || b.is_empty() || c.is_empty() {
        return Err(LabError::Empty("sum-product needs non-empty A, B, C".into()));
    }
    let sums = sumset(a, b)?;
    let prods = productset(a, c)?;
    let delta = a.delta();
    let card_a = a.len() as f64 * delta;
    let sum_size = sums.len() as f64 * delta;
    let prod_size = prods.len() as f64 * delta;
    let max_size = sum_size.max(prod_size);
    let exponent = sumproduct_exponent_unchecked(s_b, s_c);
    let bound = card_a.powf(exponent);
    let audit_b = non_concentration_constant(b, s_b)?;
    let audit_c = non_concentration_constant(c, s_c)?;
    let gate = sumproduct_exponent(s_b, s_c).is_ok();
    let (incidence_lower, incidence_mass) = if with_incidence {
        let fam = line_family(b, c)?;
        let f = product_set(&sums, &prods)?;
        let mass = incidence_mass(&DiscreteMeasure::lebesgue(&f), &fam)?;
        (Some(delta * card_a * fam.total_weight()), Some(mass))
    } else {
        (None, None)
    };
    let (witness_residual, witness_inside) = witness_check(a, b, c)?;
    Ok(SumProductReport {
        level: a.level(),
        s_b,
        s_c,
        card_a,
        sum_size,
        prod_size,
        max_size,
        exponent,
        bound,
        ratio: max_size / bound,
        pass: max_size >= bound * delta.powf(EPSILON_SLACK),
        hypothesis_met: gate && audit_b <= AUDIT_LIMIT && audit_c <= AUDIT_LIMIT,
        audit_b,
        audit_c,
        incidence_lower,
        incidence_mass,
        witness_residual,
        witness_inside,
    })
}

/// `|A| = |A-cells| · δ`.
pub fn lebesgue_1d(set: &DeltaSet) -> f64 {
    set.len() as f64 * grid::delta(set.level())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::cantor_set;
    use crate::grassmann::affine_metric;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cells(level: u32, idx: &[u32]) -> DeltaSet {
        DeltaSet::new(1, level, idx.iter().map(|&i| [i, 0, 0]).collect()).unwrap()
    }

    #[test]
    fn exponent_values() {
        assert!(sumproduct_exponent(0.4, 0.4).is_err());
        assert_abs_diff_eq!(sumproduct_exponent(0.7, 0.7).unwrap(), 5.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 / (2.0 * 0.7), 5.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sumproduct_exponent(0.4, 0.6).unwrap(), 1.0, epsilon = 1e-12);
        assert!(sumproduct_exponent(0.45, 0.5).is_err());
        assert!(sumproduct_exponent(1.2, 0.5).is_err());
        assert_abs_diff_eq!(sumproduct_exponent_unchecked(0.4, 0.4), 1.25, epsilon = 1e-15);
    }

    #[test]
    fn duality_examples() {
        assert_eq!(duality_point_to_line(0.0, 0.0), Line2 { slope: 0.0, intercept: 0.0 });
        let l = duality_point_to_line(1.0, 3.0);
        assert!(l.contains([0.0, 3.0], 0.0) && l.contains([2.0, 5.0], 0.0));
        assert_eq!(duality_line_to_point(&Line2 { slope: 2.0, intercept: 1.0 }), [-2.0, 1.0]);
        // (1,3) on x₂ = 2x₁ + 1 and (-2,1) on x₂ = x₁ + 3
        let l21 = duality_point_to_line(2.0, 1.0);
        assert_eq!(l21.residual([1.0, 3.0]), 0.0);
        let dual = duality_line_to_point(&l21);
        assert_eq!(duality_point_to_line(1.0, 3.0).residual(dual), 0.0);
        let axis = AffinePlane::new(Subspace::line_at_angle(0.0), [0.0; 3]).unwrap();
        assert_eq!(duality_plane_to_point(&axis).unwrap(), [0.0, 0.0]);
        let vertical = AffinePlane::new(Subspace::line_at_angle(std::f64::consts::FRAC_PI_2), [0.3, 0.0, 0.0]).unwrap();
        assert!(duality_plane_to_point(&vertical).is_err());
    }

    #[test]
    fn duality_round_trip_is_exact_on_dyadics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = rng.random_range(-512i32..512) as f64 / 256.0;
            let b = rng.random_range(-512i32..512) as f64 / 256.0;
            let l = duality_point_to_line(a, b);
            assert_eq!(duality_line_to_point(&l), [-a, b]);
        }
    }

    #[test]
    fn random_incidences_survive_transport() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let x1: f64 = rng.random_range(-3.0..3.0);
            let x = [x1, a * x1 + b];
            let l = duality_point_to_line(a, b);
            assert!(l.contains(x, 1e-10));
            // x on l_{a,b}  ⟺  (-a, b) on l_{x₁, x₂}
            let back = duality_line_to_point(&l);
            assert!(duality_point_to_line(x[0], x[1]).contains(back, 1e-10));
            // through the affine plane form as well
            let via_plane = duality_plane_to_point(&l.to_plane().unwrap()).unwrap();
            assert!(duality_point_to_line(x[0], x[1]).contains(via_plane, 1e-10));
        }
    }

    #[test]
    fn line_family_examples() {
        let one = cells(4, &[0]);
        assert_eq!(line_family(&one, &one).unwrap().len(), 1);
        let b = cells(4, &[1, 5, 9]);
        let c = cells(4, &[0, 15]);
        assert_eq!(line_family(&b, &c).unwrap().len(), 6);
        assert!(line_family(&b, &cells(5, &[0])).is_err());
        let l = Line2 { slope: 1.0, intercept: -1.0 };
        assert!(l.contains([3.0, 2.0], 0.0));
        // chart form of x₂ = x₁ - 1 passes through (3, 2) - (2, 1)
        assert!(l.in_chart().contains([1.0, 1.0], 0.0));
        let p = l.in_chart().to_plane().unwrap();
        assert!(p.distance(&[1.0, 1.0, 0.0]) < 1e-12);
    }

    #[test]
    fn witnesses_lie_on_their_lines() {
        let a = cantor_set(10, 0.5, 1).unwrap();
        let b = cantor_set(10, 0.6, 2).unwrap();
        let c = cantor_set(10, 0.6, 3).unwrap();
        let (res, inside) = witness_check(&a, &b, &c).unwrap();
        assert!(res <= 1e-12, "{res}");
        assert!(inside);
    }

    #[test]
    fn full_interval_instance() {
        let full = DeltaSet::full(1, 6).unwrap();
        let r = run_sumproduct(&full, &full, &full, 1.0, 1.0, false).unwrap();
        assert_abs_diff_eq!(r.sum_size, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.prod_size, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.max_size, 3.0, epsilon = 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn single_cell_a_translates_b() {
        let b = cantor_set(9, 0.5, 5).unwrap();
        let a = cells(9, &[77]);
        let r = run_sumproduct(&a, &b, &b, 0.5, 0.5, false).unwrap();
        assert!(r.sum_size >= lebesgue_1d(&b) && r.sum_size <= 2.0 * lebesgue_1d(&b));
        assert!(r.pass);
    }

    #[test]
    fn incidence_lower_bound_holds() {
        let level = 8;
        let a = cantor_set(level, 0.5, 7).unwrap();
        let b = cantor_set(level, 0.7, 8).unwrap();
        let r = run_sumproduct(&a, &b, &b, 0.7, 0.7, true).unwrap();
        let (lo, m) = (r.incidence_lower.unwrap(), r.incidence_mass.unwrap());
        assert!(m >= 0.25 * lo, "{m} < {lo} / 4");
        assert!(r.hypothesis_met);
    }

    #[test]
    fn near_monotone_sizes() {
        for seed in 0..5 {
            let a = cantor_set(10, 0.5, seed).unwrap();
            let b = cantor_set(10, 0.6, seed + 100).unwrap();
            let r = run_sumproduct(&a, &b, &b, 0.6, 0.6, false).unwrap();
            let delta = grid::delta(10);
            assert!(r.sum_size >= r.card_a.max(lebesgue_1d(&b)) - 2.0 * delta);
            assert!(r.prod_size >= r.card_a.max(lebesgue_1d(&b)) - 2.0 * delta);
        }
    }

    #[test]
    fn dual_lines_are_bi_lipschitz_in_b_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let dual = |b: f64, c: f64| duality_line_to_point(&Line2 { slope: c, intercept: -c * b });
        for _ in 0..1000 {
            let p: [f64; 2] = [rng.random_range(1.0..2.0), rng.random_range(1.0..2.0)];
            let q: [f64; 2] = [rng.random_range(1.0..2.0), rng.random_range(1.0..2.0)];
            let d0 = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            let (dp, dq) = (dual(p[0], p[1]), dual(q[0], q[1]));
            let d1 = ((dp[0] - dq[0]).powi(2) + (dp[1] - dq[1]).powi(2)).sqrt();
            if d0 > 0.0 {
                assert!(d1 / d0 <= 4.0 && d1 / d0 >= 0.25, "{}", d1 / d0);
            }
        }
    }

    #[test]
    fn chart_lines_are_distinct_planes() {
        let b = cells(5, &[3, 20]);
        let fam = line_family(&b, &b).unwrap();
        let m = fam.members();
        for i in 0..m.len() {
            for j in 0..i {
                assert!(affine_metric(&m[i], &m[j]).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn csv_header_matches_record() {
        let full = DeltaSet::full(1, 4).unwrap();
        let r = run_sumproduct(&full, &full, &full, 1.0, 1.0, false).unwrap();
        assert_eq!(r.record().len(), SumProductReport::HEADER.len());
    }
}
