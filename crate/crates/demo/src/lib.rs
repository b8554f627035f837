//! Browser bindings: a Cantor set with its fitted dimension, the projection of a
//! product Cantor measure onto a line, and the δ-tube of a line with its mass.
//!
//! Everything returns flat numeric arrays so the page can draw without a framework.

use wasm_bindgen::prelude::*;

use frostlab::generators::{cantor_product_measure, cantor_set};
use frostlab::grassmann::{AffinePlane, Subspace};
use frostlab::grid::box_dimension;
use frostlab::incidence::rasterize_tube;
use frostlab::projector::project;
use frostlab::DiscreteMeasure;

fn msg(e: frostlab::LabError) -> String {
    e.to_string()
}

/// Cell indices of a 1D Cantor set.
#[wasm_bindgen]
pub fn cantor_cells(level: u32, s: f64, seed: u32) -> Result<Vec<u32>, String> {
    let set = cantor_set(level, s, seed as u64).map_err(msg)?;
    Ok(set.cells().iter().map(|c| c[0]).collect())
}

/// Least-squares box-counting slope of the same set over levels `2..=level`.
#[wasm_bindgen]
pub fn cantor_dimension(level: u32, s: f64, seed: u32) -> Result<f64, String> {
    let set = cantor_set(level, s, seed as u64).map_err(msg)?;
    Ok(box_dimension(&set, 2, level).map_err(msg)?.slope)
}

fn product(level: u32, s1: f64, s2: f64, seed: u32) -> Result<DiscreteMeasure, String> {
    cantor_product_measure(level, s1, s2, seed as u64)
        .and_then(|m| m.assemble())
        .map_err(msg)
}

/// Flattened `(i, j)` cells of the product Cantor measure.
#[wasm_bindgen]
pub fn product_cells(level: u32, s1: f64, s2: f64, seed: u32) -> Result<Vec<u32>, String> {
    let mu = product(level, s1, s2, seed)?;
    Ok(mu.support().cells().iter().flat_map(|c| [c[0], c[1]]).collect())
}

/// `[start, δ, m_0, m_1, ...]`: masses of consecutive δ-bins of the pushforward onto
/// the line at `angle`, the first bin starting at coordinate `start`.
#[wasm_bindgen]
pub fn projection_histogram(level: u32, s1: f64, s2: f64, seed: u32, angle: f64) -> Result<Vec<f64>, String> {
    let mu = product(level, s1, s2, seed)?;
    let pf = project(&mu, &Subspace::line_at_angle(angle)).map_err(msg)?;
    let hist = pf.histogram();
    let cells = hist.support().cells();
    let (Some(first), Some(last)) = (cells.first(), cells.last()) else {
        return Ok(vec![]);
    };
    let delta = hist.delta();
    let mut out = vec![pf.range_offset()[0] as f64 + first[0] as f64 * delta, delta];
    let mut bins = vec![0.0; (last[0] - first[0] + 1) as usize];
    for (c, w) in cells.iter().zip(hist.weights()) {
        bins[(c[0] - first[0]) as usize] = *w;
    }
    out.extend(bins);
    Ok(out)
}

/// `[mass, i_0, j_0, i_1, j_1, ...]`: the δ-tube cells of the line through `(x, y)` at
/// `angle`, and the product measure's mass inside it.
#[wasm_bindgen]
pub fn tube(level: u32, s1: f64, s2: f64, seed: u32, angle: f64, x: f64, y: f64) -> Result<Vec<f64>, String> {
    let mu = product(level, s1, s2, seed)?;
    let line = AffinePlane::through_point(Subspace::line_at_angle(angle), &[x, y, 0.0]).map_err(msg)?;
    let cells = rasterize_tube(&line, level).map_err(msg)?;
    let mass: f64 = mu
        .support()
        .cells()
        .iter()
        .zip(mu.weights())
        .filter(|(c, _)| cells.contains(c))
        .fold(0.0, |acc, (_, w)| acc + w);
    let mut out = vec![mass];
    out.extend(cells.cells().iter().flat_map(|c| [c[0] as f64, c[1] as f64]));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_dimension_is_close() {
        let cells = cantor_cells(12, 0.5, 1).unwrap();
        assert_eq!(cells.len(), 64);
        assert!((cantor_dimension(12, 0.5, 1).unwrap() - 0.5).abs() < 0.07);
        assert!(cantor_cells(12, 1.5, 1).is_err());
    }

    #[test]
    fn histogram_carries_all_mass() {
        let h = projection_histogram(8, 0.6, 0.6, 3, 0.7).unwrap();
        let total: f64 = h[2..].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(h[1], 1.0 / 256.0);
        // the horizontal projection is the first marginal
        let flat = projection_histogram(8, 0.6, 0.6, 3, 0.0).unwrap();
        assert!(flat[0] >= 0.0 && flat[0] < 1.0);
    }

    #[test]
    fn tube_through_a_cell_contains_it() {
        let cells = product_cells(7, 0.6, 0.6, 2).unwrap();
        let (i, j) = (cells[0], cells[1]);
        let d = 1.0 / 128.0;
        let t = tube(7, 0.6, 0.6, 2, 1.1, (i as f64 + 0.5) * d, (j as f64 + 0.5) * d).unwrap();
        assert!(t[0] > 0.0 && t[0] <= 1.0);
        let hit = t[1..].chunks(2).any(|c| c[0] == i as f64 && c[1] == j as f64);
        assert!(hit);
    }
}
