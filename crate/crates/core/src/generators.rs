//! Constructors for (δ,s)-sets and the structured examples the experiments run on.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::grid::{self, Cell, DeltaSet, MAX_DIM};
use crate::measure::{DiscreteMeasure, FubiniMeasure};
use crate::numeric::{split_seed, streams};

/// Random dyadic Cantor set of dimension `s` in `[0, 1]`.
///
/// Every node of the 4-adic tree carries a credit `ρ` (1 at the root). A node keeps
/// `clamp(round(ρ·4^s), 1, 4)` of its four grandchildren, picked by a seeded shuffle,
/// and passes the rounding error on as the children's credit. All nodes of one
/// generation share the same credit, so the tree is uniform and the count tracks
/// `4^{s·t}` within a bounded factor. Nodes are expanded in order with a single random
/// stream, which makes the sets for one seed nested across levels. Odd levels are built
/// one level finer and coarsened.
pub fn cantor_set(level: u32, s: f64, seed: u64) -> Result<DeltaSet> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(LabError::InvalidParameter(format!("s = {s} outside (0, 1]")));
    }
    if !(2..=grid::MAX_LEVEL).contains(&level) {
        return Err(LabError::InvalidParameter(format!(
            "cantor level {level} outside [2, {}]",
            grid::MAX_LEVEL
        )));
    }
    let even = level + level % 2;
    let gain = 4f64.powf(s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<u32> = vec![0];
    let mut credit = 1.0;
    let mut order = [0u32, 1, 2, 3];
    for _ in 0..even / 2 {
        let target = credit * gain;
        let keep = (target.round() as usize).clamp(1, 4);
        credit = target / keep as f64;
        let mut next = Vec::with_capacity(nodes.len() * keep);
        for &node in &nodes {
            order.shuffle(&mut rng);
            let mut kids = order[..keep].to_vec();
            kids.sort_unstable();
            next.extend(kids.into_iter().map(|k| 4 * node + k));
        }
        nodes = next;
    }
    nodes.sort_unstable();
    let cells: Vec<Cell> = nodes.into_iter().map(|i| [i, 0, 0]).collect();
    let set = DeltaSet::new(1, even, cells)?;
    if even == level {
        Ok(set)
    } else {
        set.coarsen(level)
    }
}

/// Cells containing the progression `k·2^-spacing_exponent`, `k < terms`.
pub fn ap_neighborhood_set(level: u32, terms: u64, spacing_exponent: u32) -> Result<DeltaSet> {
    if terms == 0 {
        return Err(LabError::InvalidParameter("terms must be >= 1".into()));
    }
    if spacing_exponent > 62 || (terms - 1) >> spacing_exponent.min(63) != 0 {
        return Err(LabError::OutOfDomain(format!(
            "{terms} terms at spacing 2^-{spacing_exponent} overflow [0, 1)"
        )));
    }
    grid::validate_shape(1, level, 1)?;
    let cells: Vec<Cell> = (0..terms)
        .map(|k| {
            // k·2^-e lies in cell floor(k·2^(level-e))
            let i = if level >= spacing_exponent {
                k << (level - spacing_exponent)
            } else {
                k >> (spacing_exponent - level)
            };
            [i as u32, 0, 0]
        })
        .collect();
    DeltaSet::new(1, level, cells)
}

/// Index product `E1 × E2`; `E1` supplies the leading coordinates.
pub fn product_set(e1: &DeltaSet, e2: &DeltaSet) -> Result<DeltaSet> {
    if e1.level() != e2.level() {
        return Err(LabError::LevelMismatch {
            left: e1.level(),
            right: e2.level(),
        });
    }
    let (n1, n2) = (e1.dim(), e2.dim());
    if n1 + n2 > MAX_DIM {
        return Err(LabError::DimensionMismatch(format!(
            "product dimension {} exceeds 3",
            n1 + n2
        )));
    }
    let mut cells = Vec::with_capacity(e1.len() * e2.len());
    for a in e1.cells() {
        for b in e2.cells() {
            let mut c = [0u32; MAX_DIM];
            c[..n1].copy_from_slice(&a[..n1]);
            c[n1..n1 + n2].copy_from_slice(&b[..n2]);
            cells.push(c);
        }
    }
    // lexicographic order of (a, b) is already the order of the product cells
    Ok(DeltaSet::from_sorted_unchecked(
        n1 + n2,
        e1.level(),
        e1.span().max(e2.span()),
        cells,
    ))
}

/// Largest `#{cells in B(x, r)} / (r/δ)^s` over cells `x` and dyadic radii `r ≤ 1`
/// (open balls around cell centers).
pub fn non_concentration_constant(set: &DeltaSet, s: f64) -> Result<f64> {
    let counting = DiscreteMeasure::new(set.clone(), vec![1.0; set.len()])?;
    Ok(counting.frostman_constant(s)? * set.delta().powf(s))
}

/// Uniform probability measure on [`cantor_set`].
pub fn cantor_measure(level: u32, s: f64, seed: u64) -> Result<DiscreteMeasure> {
    DiscreteMeasure::uniform(&cantor_set(level, s, seed)?)
}

/// Product of two independent uniform Cantor measures of dimensions `s1` (first
/// coordinate) and `s2` (second coordinate), as a Fubini measure over the second.
pub fn cantor_product_measure(level: u32, s1: f64, s2: f64, seed: u64) -> Result<FubiniMeasure> {
    let m1 = cantor_measure(level, s1, split_seed(seed, streams::CANTOR_A))?;
    let m2 = cantor_measure(level, s2, split_seed(seed, streams::CANTOR_B))?;
    FubiniMeasure::product(&m1, &m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{box_count, box_dimension};
    use proptest::prelude::*;

    #[test]
    fn cantor_full_dimension_is_interval() {
        assert_eq!(cantor_set(9, 1.0, 5).unwrap(), DeltaSet::full(1, 9).unwrap());
    }

    #[test]
    fn cantor_half_dimension_count_and_audit() {
        let set = cantor_set(12, 0.5, 11).unwrap();
        assert_eq!(set.len(), 64);
        assert!(non_concentration_constant(&set, 0.45).unwrap() <= 8.0);
    }

    #[test]
    fn cantor_count_envelope() {
        for &s in &[0.1, 0.25, 0.3, 0.5, 0.6, 0.75, 0.9] {
            for level in 2..=16 {
                let n = cantor_set(level, s, 1).unwrap().len() as f64;
                let target = (level as f64 * s).exp2();
                assert!(n <= 2.0 * target && n >= 0.5 * target, "s={s} level={level} n={n}");
            }
        }
    }

    #[test]
    fn cantor_audit_across_sublevels() {
        for &s in &[0.3, 0.5, 0.6, 0.8] {
            let set = cantor_set(14, s, 2).unwrap();
            for level in (4..=14).step_by(2) {
                let c = non_concentration_constant(&set.coarsen(level).unwrap(), s - 0.05).unwrap();
                assert!(c <= 8.0, "s={s} level={level} c={c}");
            }
        }
    }

    #[test]
    fn cantor_box_dimension_tracks_s() {
        for &s in &[0.3, 0.5, 0.6, 0.75] {
            let set = cantor_set(16, s, 9).unwrap();
            let fit = box_dimension(&set, 10, 16).unwrap();
            assert!((fit.slope - s).abs() < 0.07, "s={s} slope={}", fit.slope);
        }
    }

    #[test]
    fn cantor_errors() {
        assert!(cantor_set(10, 0.0, 1).is_err());
        assert!(cantor_set(10, 1.2, 1).is_err());
        assert!(cantor_set(1, 0.5, 1).is_err());
    }

    #[test]
    fn ap_examples() {
        assert_eq!(ap_neighborhood_set(8, 1, 3).unwrap().len(), 1);
        let ap = ap_neighborhood_set(10, 16, 4).unwrap();
        assert_eq!(box_count(&ap, 4).unwrap(), 16);
        assert_eq!(ap.len(), 16);
        assert!(ap_neighborhood_set(10, 17, 4).is_err());
    }

    #[test]
    fn ap_box_counts_against_direct_count() {
        let (level, terms, e) = (14, 40, 6);
        let ap = ap_neighborhood_set(level, terms, e).unwrap();
        for coarse in 2..=level {
            let direct: std::collections::BTreeSet<u64> =
                (0..terms).map(|k| ((k as f64 / 64.0) * (coarse as f64).exp2()).floor() as u64).collect();
            let bc = box_count(&ap, coarse).unwrap();
            assert_eq!(bc, direct.len());
            let ideal = (terms as f64).min((coarse as f64).exp2());
            assert!(bc as f64 <= 2.0 * ideal && bc as f64 >= 0.5 * ideal);
        }
    }

    #[test]
    fn product_examples() {
        let full = DeltaSet::full(1, 4).unwrap();
        assert_eq!(product_set(&full, &full).unwrap(), DeltaSet::full(2, 4).unwrap());
        let a = cantor_set(12, 0.5, 3).unwrap();
        let b = cantor_set(12, 0.3, 4).unwrap();
        let p = product_set(&a, &b).unwrap();
        assert_eq!(p.len(), a.len() * b.len());
        let sum = box_dimension(&a, 6, 12).unwrap().slope + box_dimension(&b, 6, 12).unwrap().slope;
        assert!((box_dimension(&p, 6, 12).unwrap().slope - sum).abs() < 0.1);
        assert!(product_set(&p, &p).is_err());
        assert!(product_set(&a, &DeltaSet::full(1, 3).unwrap()).is_err());
    }

    #[test]
    fn product_measure_mass() {
        let m = cantor_product_measure(10, 0.6, 0.6, 7).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(m.dim(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cantor_is_nested_and_deterministic(s in 0.05f64..=1.0, level in 2u32..14, seed in any::<u64>()) {
            let coarse = cantor_set(level, s, seed).unwrap();
            let fine = cantor_set(level + 2, s, seed).unwrap();
            prop_assert_eq!(fine.coarsen(level).unwrap(), coarse.clone());
            prop_assert_eq!(cantor_set(level, s, seed).unwrap(), coarse);
        }

        #[test]
        fn generators_pass_count_audit(s in 0.2f64..=1.0, seed in any::<u64>()) {
            let set = cantor_set(12, s, seed).unwrap();
            prop_assert!(non_concentration_constant(&set, s).unwrap() <= 8.0);
        }
    }
}
