//! Numerical laboratory for Frostman measures, projection bounds along families
//! of subspaces, δ-tube incidences, and Furstenberg / sum-product experiments.
//!
//! Everything is discretized on dyadic grids in `[0, 1]^d` with `d <= 3`.

pub mod error;
pub mod furstenberg;
pub mod generators;
pub mod grassmann;
pub mod grid;
pub mod incidence;
pub mod linalg;
pub mod measure;
pub mod numeric;
pub mod projector;
pub mod report;
pub mod sumproduct;

pub use error::{LabError, Result};
pub use grid::{Cell, DeltaSet};
pub use measure::{DiscreteMeasure, FubiniMeasure};
