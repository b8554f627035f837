//! Pushforwards under orthogonal projections, L^p norms of projected densities,
//! and the projection bound checks.

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::grassmann::{DirectionFamily, Subspace};
use crate::grid::MAX_DIM;
use crate::linalg::ZERO3;
use crate::measure::{DiscreteMeasure, FubiniMeasure};
use crate::numeric::compensated_sum;
use crate::report::BoundReport;

/// Smallest singular value a family member needs for the Fubini variant.
pub const SPAN_TOLERANCE: f64 = 1e-8;

/// `π_V μ` binned on the n-dimensional grid at the source level. Range cell `i`
/// along axis `a` covers `[range_offset[a] + iδ, range_offset[a] + (i+1)δ)` in the
/// plane's coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Pushforward {
    direction: Subspace,
    histogram: DiscreteMeasure,
    range_offset: [i64; MAX_DIM],
}

impl Pushforward {
    pub fn direction(&self) -> &Subspace {
        &self.direction
    }

    pub fn histogram(&self) -> &DiscreteMeasure {
        &self.histogram
    }

    pub fn range_offset(&self) -> &[i64; MAX_DIM] {
        &self.range_offset
    }

    /// `∫ f^p` for the step density `f = w / δ^n`.
    pub fn lp_integral(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(LabError::InvalidParameter(format!("p = {p} must be >= 1")));
        }
        let n = self.histogram.dim() as i32;
        let vol = self.histogram.delta().powi(n);
        Ok(compensated_sum(
            self.histogram.weights().iter().map(|w| (w / vol).powf(p) * vol),
        ))
    }

    /// `(∫ f^p)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        Ok(self.lp_integral(p)?.powf(1.0 / p))
    }
}

/// Deposits each atom's mass in the range cell containing the projection of its center.
pub fn project(mu: &DiscreteMeasure, v: &Subspace) -> Result<Pushforward> {
    let d = mu.dim();
    if v.ambient_dim() != d {
        return Err(LabError::DimensionMismatch(format!(
            "measure in R^{d}, subspace in R^{}",
            v.ambient_dim()
        )));
    }
    let n = v.dim();
    let span = mu.support().span() as f64;
    let mut lo = [0i64; MAX_DIM];
    let mut hi = [0i64; MAX_DIM];
    for (a, b) in v.basis().iter().enumerate() {
        // extremes of x ↦ b·x over the box [0, span]^d
        let neg: f64 = b[..d].iter().filter(|x| **x < 0.0).sum();
        let pos: f64 = b[..d].iter().filter(|x| **x > 0.0).sum();
        lo[a] = (neg * span).floor() as i64;
        hi[a] = (pos * span).ceil() as i64;
    }
    let range_span = (0..n).map(|a| hi[a] - lo[a]).max().unwrap_or(1).max(1) as u32;
    let side = mu.support().side() as f64;
    let limit = range_span as i64 * mu.support().side() as i64 - 1;
    let level = mu.level();
    let support = mu.support();
    let histogram = mu.aggregate(n, level, range_span, |c| {
        let x = support.center(c);
        let coords = v.project_point(&x);
        let mut out = [0u32; MAX_DIM];
        for a in 0..n {
            let t = ((coords[a] - lo[a] as f64) * side).floor() as i64;
            out[a] = t.clamp(0, limit) as u32;
        }
        out
    })?;
    Ok(Pushforward {
        direction: *v,
        histogram,
        range_offset: lo,
    })
}

pub fn lp_norm_p(pf: &Pushforward, p: f64) -> Result<f64> {
    pf.lp_norm(p)
}

fn check_shape(d: usize, n: usize) -> Result<()> {
    if !(1..=3).contains(&d) || n == 0 || n >= d {
        return Err(LabError::InvalidParameter(format!("unsupported (d, n) = ({d}, {n})")));
    }
    Ok(())
}

fn excess(d: usize, n: usize, s: f64, sigma: f64) -> Result<f64> {
    let threshold = (n * (d - n + 1)) as f64;
    let e = s + sigma - threshold;
    if e < 0.0 {
        return Err(LabError::Precondition(format!(
            "s + sigma >= n(d-n+1) violated: {s} + {sigma} < {threshold}"
        )));
    }
    Ok(e)
}

/// `p = 2 + (s + σ − n(d−n+1)) / (d − α)`.
pub fn exponent_general(d: usize, n: usize, s: f64, sigma: f64, alpha: f64) -> Result<f64> {
    check_shape(d, n)?;
    if !(alpha > 0.0 && alpha < d as f64) {
        return Err(LabError::Precondition(format!("0 < alpha < d violated: alpha = {alpha}, d = {d}")));
    }
    Ok(2.0 + excess(d, n, s, sigma)? / (d as f64 - alpha))
}

/// `p = 2 + (s + σ − n(d−n+1)) / (n − α)`.
pub fn exponent_fubini(d: usize, n: usize, s: f64, sigma: f64, alpha: f64) -> Result<f64> {
    check_shape(d, n)?;
    if !(alpha > 0.0 && alpha < n as f64) {
        return Err(LabError::Precondition(format!("0 < alpha < n violated: alpha = {alpha}, n = {n}")));
    }
    Ok(2.0 + excess(d, n, s, sigma)? / (n as f64 - alpha))
}

#[derive(Clone, Copy, Debug)]
pub enum MeasureInput<'a> {
    Plain(&'a DiscreteMeasure),
    Fubini(&'a FubiniMeasure),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    General,
    Fubini,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::General => "general",
            Variant::Fubini => "fubini",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Variant::General),
            "fubini" => Ok(Variant::Fubini),
            _ => Err(LabError::InvalidParameter(format!("unknown variant `{s}`"))),
        }
    }
}

/// `Σ_V ν(V) ∫ |π_V μ|^p`, evaluated per direction in parallel and summed in family order.
pub fn family_lp_integral(mu: &DiscreteMeasure, fam: &DirectionFamily, p: f64) -> Result<f64> {
    let terms: Vec<f64> = fam
        .members()
        .par_iter()
        .map(|v| project(mu, v)?.lp_integral(p))
        .collect::<Result<_>>()?;
    Ok(compensated_sum(terms.iter().zip(fam.weights()).map(|(t, w)| t * w)))
}

/// Checks that every member satisfies `V + ({0} × R^{d-n}) = R^d`.
pub fn check_span_condition(fam: &DirectionFamily) -> Result<()> {
    for (i, v) in fam.members().iter().enumerate() {
        let m = v.fubini_span_margin();
        if m <= SPAN_TOLERANCE {
            return Err(LabError::Precondition(format!(
                "span condition violated by member {i} (smallest singular value {m:e})"
            )));
        }
    }
    Ok(())
}

/// Compares `Σ_V ν(V) ∫|π_V μ|^p` with `I_s(μ)·A_α(μ)^{p-2}` (general) or
/// `I_s(μ)·sup A_α(μ₁^{x₂})^{p-2}` (fubini).
pub fn check_projection_bound(
    input: MeasureInput<'_>,
    fam: &DirectionFamily,
    s: f64,
    alpha: f64,
    variant: Variant,
) -> Result<BoundReport> {
    let (d, n, sigma) = (fam.ambient_dim(), fam.plane_dim(), fam.sigma());
    let (mu, p, amp) = match (variant, input) {
        (Variant::General, input) => {
            let mu = match input {
                MeasureInput::Plain(m) => m.clone(),
                MeasureInput::Fubini(f) => f.assemble()?,
            };
            let p = exponent_general(d, n, s, sigma, alpha)?;
            let amp = mu.amplitude(alpha)?;
            (mu, p, amp)
        }
        (Variant::Fubini, MeasureInput::Plain(_)) => {
            return Err(LabError::Precondition("fubini variant needs a Fubini measure".into()));
        }
        (Variant::Fubini, MeasureInput::Fubini(f)) => {
            if f.slice_dim() != n || f.dim() != d {
                return Err(LabError::DimensionMismatch(format!(
                    "slices of dimension {} in R^{} against G({d},{n})",
                    f.slice_dim(),
                    f.dim()
                )));
            }
            check_span_condition(fam)?;
            let p = exponent_fubini(d, n, s, sigma, alpha)?;
            (f.assemble()?, p, f.slice_amplitude(alpha)?)
        }
    };
    if mu.dim() != d {
        return Err(LabError::DimensionMismatch(format!("measure in R^{}, family in R^{d}", mu.dim())));
    }
    let lhs = family_lp_integral(&mu, fam, p)?;
    let rhs = mu.energy(s)? * amp.powf(p - 2.0);
    Ok(BoundReport::new(
        format!("projection_{}", variant.name()),
        d,
        n,
        s,
        sigma,
        Some(alpha),
        p,
        mu.level(),
        lhs,
        rhs,
        fam.len(),
    ))
}

/// Compares `Σ_V ν(V) ∫|π_V μ|²` with `I_{n(d-n+1)-σ}(μ)`.
pub fn check_l2_classical(mu: &DiscreteMeasure, fam: &DirectionFamily, sigma: f64) -> Result<BoundReport> {
    let (d, n) = (fam.ambient_dim(), fam.plane_dim());
    check_shape(d, n)?;
    if mu.dim() != d {
        return Err(LabError::DimensionMismatch(format!("measure in R^{}, family in R^{d}", mu.dim())));
    }
    let e = (n * (d - n + 1)) as f64 - sigma;
    if !(e > 0.0 && e < d as f64) {
        return Err(LabError::Precondition(format!(
            "energy exponent n(d-n+1) - sigma = {e} outside (0, {d})"
        )));
    }
    let lhs = family_lp_integral(mu, fam, 2.0)?;
    let rhs = mu.energy(e)?;
    Ok(BoundReport::new(
        "l2_classical".into(),
        d,
        n,
        e,
        sigma,
        None,
        2.0,
        mu.level(),
        lhs,
        rhs,
        fam.len(),
    ))
}

/// Point on the plane's coordinate chart for a range cell center, mostly for display.
pub fn range_cell_center(pf: &Pushforward, cell: &[u32; MAX_DIM]) -> [f64; MAX_DIM] {
    let mut out = ZERO3;
    let delta = pf.histogram.delta();
    for a in 0..pf.histogram.dim() {
        out[a] = pf.range_offset[a] as f64 + (cell[a] as f64 + 0.5) * delta;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{cantor_measure, cantor_product_measure};
    use crate::grassmann::{sample_directions, DirectionSpec};
    use crate::grid::DeltaSet;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn exponent_examples() {
        assert_relative_eq!(exponent_general(2, 1, 1.5, 1.0, 1.5).unwrap(), 3.0, epsilon = 1e-15);
        assert_eq!(exponent_general(2, 1, 1.0, 1.0, 1.2).unwrap(), 2.0);
        assert_relative_eq!(exponent_general(3, 1, 1.5, 2.0, 1.0).unwrap(), 2.25, epsilon = 1e-15);
        assert_relative_eq!(exponent_fubini(2, 1, 1.4, 1.0, 0.4).unwrap(), 8.0 / 3.0, epsilon = 1e-15);
        assert_eq!(exponent_fubini(2, 1, 0.5, 1.5, 0.3).unwrap(), 2.0);
        assert!(exponent_fubini(2, 1, 1.4, 1.0, 1.0).is_err());
        let err = exponent_general(2, 1, 0.5, 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("s + sigma >= n(d-n+1)"));
        assert!(exponent_general(2, 1, 1.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn fubini_exponent_dominates() {
        for &(d, n) in &[(2, 1), (3, 1), (3, 2)] {
            for &alpha in &[0.1, 0.5, 0.9] {
                let s = (n * (d - n + 1)) as f64 - 0.5;
                let g = exponent_general(d, n, s, 1.0, alpha).unwrap();
                let f = exponent_fubini(d, n, s, 1.0, alpha).unwrap();
                assert!(f > g);
            }
        }
    }

    #[test]
    fn lp_examples() {
        let axis = Subspace::coordinate(2, &[0]).unwrap();
        let full = DiscreteMeasure::lebesgue(&DeltaSet::full(2, 6).unwrap());
        let pf = project(&full, &axis).unwrap();
        for p in [1.0, 1.5, 2.0, 3.7] {
            assert_relative_eq!(pf.lp_norm(p).unwrap(), 1.0, max_relative = 1e-12);
        }

        let point = DiscreteMeasure::point_mass(2, 5, [4, 9, 0], 1.0).unwrap();
        let pf = project(&point, &axis).unwrap();
        let delta: f64 = 1.0 / 32.0;
        for p in [1.0, 2.0, 2.5] {
            assert_relative_eq!(pf.lp_norm(p).unwrap(), delta.powf(1.0 / p - 1.0), max_relative = 1e-12);
        }

        let two = DiscreteMeasure::new(DeltaSet::new(2, 2, vec![[0, 0, 0], [1, 0, 0]]).unwrap(), vec![0.25, 0.75]).unwrap();
        let pf = project(&two, &axis).unwrap();
        assert_relative_eq!(pf.lp_norm(2.0).unwrap(), 2.5f64.sqrt(), epsilon = 1e-14);
        assert!(pf.lp_norm(0.5).is_err());
    }

    #[test]
    fn axis_projection_of_product_is_marginal() {
        let f = cantor_product_measure(8, 0.6, 0.4, 1).unwrap();
        let mu = f.assemble().unwrap();
        let pf = project(&mu, &Subspace::coordinate(2, &[0]).unwrap()).unwrap();
        assert_eq!(pf.histogram(), &mu.marginal(&[0]).unwrap());
        assert_eq!(pf.range_offset(), &[0, 0, 0]);
        let pf = project(&mu, &Subspace::coordinate(2, &[1]).unwrap()).unwrap();
        assert_eq!(pf.histogram(), &mu.marginal(&[1]).unwrap());
    }

    #[test]
    fn point_mass_lands_in_one_cell() {
        let mu = DiscreteMeasure::point_mass(3, 6, [10, 20, 30], 0.7).unwrap();
        let fam = sample_directions(3, 2, DirectionSpec::Full, 3, 0).unwrap();
        for v in fam.members() {
            let pf = project(&mu, v).unwrap();
            assert_eq!(pf.histogram().len(), 1);
            assert_eq!(pf.histogram().weights(), &[0.7]);
        }
    }

    fn isqrt(x: u128) -> u128 {
        let mut r = (x as f64).sqrt() as u128;
        while r * r > x {
            r -= 1;
        }
        while (r + 1) * (r + 1) <= x {
            r += 1;
        }
        r
    }

    #[test]
    fn diagonal_projection_matches_integer_oracle() {
        // the center of cell (i, j) projects to (i + j + 1) / (√2 N); its range cell is
        // the largest m with 2 m² <= (i + j + 1)²
        let level = 8;
        let mu = DiscreteMeasure::uniform(&DeltaSet::full(2, level).unwrap()).unwrap();
        let pf = project(&mu, &Subspace::line_at_angle(PI / 4.0)).unwrap();
        let n = 1u128 << level;
        let mut counts = std::collections::BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                let t = i + j + 1;
                *counts.entry(isqrt(t * t / 2)).or_insert(0u64) += 1;
            }
        }
        let hist = pf.histogram();
        assert_eq!(hist.len(), counts.len());
        let w = 1.0 / (n * n) as f64;
        for ((cell, mass), (m, c)) in hist.support().cells().iter().zip(hist.weights()).zip(&counts) {
            assert_eq!(cell[0] as u128, *m);
            assert_eq!(*mass, *c as f64 * w);
        }
    }

    #[test]
    fn coarsening_commutes_for_axis_directions() {
        let mu = cantor_product_measure(9, 0.7, 0.5, 4).unwrap().assemble().unwrap();
        for axis in [0, 1] {
            let v = Subspace::coordinate(2, &[axis]).unwrap();
            let fine = project(&mu, &v).unwrap().histogram().coarsen(8).unwrap();
            let coarse = project(&mu.coarsen(8).unwrap(), &v).unwrap();
            let h = coarse.histogram();
            assert_eq!(fine.support(), h.support());
            for (a, b) in fine.weights().iter().zip(h.weights()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn point_mass_bound_report() {
        let mu = DiscreteMeasure::point_mass(2, 6, [3, 40, 0], 1.0).unwrap();
        let fam = sample_directions(2, 1, DirectionSpec::Full, 6, 0).unwrap();
        let r = check_projection_bound(MeasureInput::Plain(&mu), &fam, 1.5, 1.5, Variant::General).unwrap();
        assert!(r.lhs > 0.0 && r.rhs > 0.0 && r.ratio.is_finite());
        let r = check_l2_classical(&mu, &fam, 1.0).unwrap();
        assert_eq!(r.s, 1.0);
        assert!(r.lhs > 0.0 && r.rhs > 0.0);
    }

    #[test]
    fn fubini_variant_preconditions() {
        let f = cantor_product_measure(6, 0.6, 0.6, 1).unwrap();
        let fam = sample_directions(2, 1, DirectionSpec::Full, 6, 0).unwrap();
        // the vertical direction violates the span condition
        assert!(check_projection_bound(MeasureInput::Fubini(&f), &fam, 1.1, 0.55, Variant::Fubini).is_err());
        let ok = fam.restricted(|v| v.fubini_span_margin() > SPAN_TOLERANCE).unwrap();
        assert!(check_projection_bound(MeasureInput::Fubini(&f), &ok, 1.1, 0.55, Variant::Fubini).is_ok());
        let mu = f.assemble().unwrap();
        assert!(check_projection_bound(MeasureInput::Plain(&mu), &ok, 1.1, 0.55, Variant::Fubini).is_err());
    }

    #[test]
    fn l2_classical_on_small_instance() {
        let mu = cantor_product_measure(7, 0.63, 0.63, 2).unwrap().assemble().unwrap();
        let fam = sample_directions(2, 1, DirectionSpec::Full, 7, 0).unwrap();
        let r = check_l2_classical(&mu, &fam, 1.0).unwrap();
        assert!(r.ratio < 10.0);
        assert!(check_l2_classical(&mu, &fam, 2.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn mass_is_conserved(seed in any::<u64>(), theta in 0.0f64..PI) {
            let mu = cantor_product_measure(7, 0.8, 0.7, seed).unwrap().assemble().unwrap();
            let pf = project(&mu, &Subspace::line_at_angle(theta)).unwrap();
            prop_assert!((pf.histogram().total_mass() - mu.total_mass()).abs() < 1e-9);
        }

        #[test]
        fn lp_norm_grows_with_p(weights in prop::collection::vec(0.0f64..1.0, 64)) {
            // a probability histogram on [0, 1]: ‖f‖_p is non-decreasing in p
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 0.0);
            let set = DeltaSet::full(1, 6).unwrap();
            let mu = DiscreteMeasure::new(set, weights.iter().map(|w| w / total).collect()).unwrap();
            let lifted = FubiniMeasure::product(&mu, &DiscreteMeasure::point_mass(1, 6, [0, 0, 0], 1.0).unwrap()).unwrap();
            let pf = project(&lifted.assemble().unwrap(), &Subspace::coordinate(2, &[0]).unwrap()).unwrap();
            let mut prev = 0.0;
            for p in [1.0, 1.3, 2.0, 2.7, 4.0] {
                let v = pf.lp_norm(p).unwrap();
                prop_assert!(v >= prev * (1.0 - 1e-12));
                prev = v;
            }
        }

        #[test]
        fn cantor_marginal_round_trip(seed in any::<u64>()) {
            let m = cantor_measure(8, 0.5, seed).unwrap();
            let prod = FubiniMeasure::product(&m, &m).unwrap().assemble().unwrap();
            let pf = project(&prod, &Subspace::coordinate(2, &[1]).unwrap()).unwrap();
            prop_assert_eq!(pf.histogram().support(), m.support());
        }
    }
}
