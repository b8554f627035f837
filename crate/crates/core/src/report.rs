//! CSV rows for experiment results and the multi-scale pass rules.

use crate::error::{LabError, Result};

/// A record type with a fixed CSV header.
pub trait CsvRow {
    const HEADER: &'static [&'static str];

    fn record(&self) -> Vec<String>;
}

/// Shortest round-trip decimal form; identical inputs always print identically.
pub fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// One bound check at one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub check: String,
    pub d: usize,
    pub n: usize,
    pub s: f64,
    pub sigma: f64,
    pub alpha: Option<f64>,
    pub p: f64,
    pub level: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub family_size: usize,
}

impl BoundReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        check: String,
        d: usize,
        n: usize,
        s: f64,
        sigma: f64,
        alpha: Option<f64>,
        p: f64,
        level: u32,
        lhs: f64,
        rhs: f64,
        family_size: usize,
    ) -> Self {
        let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
        Self {
            check,
            d,
            n,
            s,
            sigma,
            alpha,
            p,
            level,
            lhs,
            rhs,
            ratio,
            family_size,
        }
    }
}

impl CsvRow for BoundReport {
    const HEADER: &'static [&'static str] = &[
        "check", "d", "n", "s", "sigma", "alpha", "p", "level", "lhs", "rhs", "ratio", "family_size",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            self.check.clone(),
            self.d.to_string(),
            self.n.to_string(),
            fmt_num(self.s),
            fmt_num(self.sigma),
            fmt_opt(self.alpha),
            fmt_num(self.p),
            self.level.to_string(),
            fmt_num(self.lhs),
            fmt_num(self.rhs),
            fmt_num(self.ratio),
            self.family_size.to_string(),
        ]
    }
}

pub fn write_csv<R: CsvRow, W: std::io::Write>(out: W, rows: &[R]) -> Result<()> {
    let io = |e: csv::Error| LabError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::HEADER).map_err(io)?;
    for r in rows {
        w.write_record(r.record()).map_err(io)?;
    }
    w.flush().map_err(|e| LabError::Io(e.to_string()))
}

pub fn csv_string<R: CsvRow>(rows: &[R]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| LabError::Io(e.to_string()))
}

/// Reads back a CSV written by [`write_csv`] as raw string records, checking the header.
pub fn read_csv<R: CsvRow>(text: &str) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| LabError::Io(e.to_string()))?;
    if header.iter().ne(R::HEADER.iter().copied()) {
        return Err(LabError::Parse {
            line: 1,
            msg: format!("expected header {}", R::HEADER.join(",")),
        });
    }
    rdr.records()
        .map(|r| {
            r.map(|r| r.iter().map(str::to_string).collect())
                .map_err(|e| LabError::Io(e.to_string()))
        })
        .collect()
}

/// Ratio growth across dyadic levels no faster than `log²(1/δ)`: every
/// `ratio_j ≤ ratio_{j0}·(j/j0)²` relative to the coarsest level `j0`.
pub fn bounded_growth(levels: &[u32], ratios: &[f64]) -> bool {
    let (Some(&j0), Some(&r0)) = (levels.first(), ratios.first()) else {
        return false;
    };
    ratios.iter().all(|r| r.is_finite())
        && levels
            .iter()
            .zip(ratios)
            .all(|(&j, &r)| r <= r0 * (j as f64 / j0 as f64).powi(2) * (1.0 + 1e-12))
}

/// Ratio decay across dyadic levels no faster than `δ^slack` relative to the coarsest level.
pub fn bounded_decay(levels: &[u32], ratios: &[f64], slack: f64) -> bool {
    let (Some(&j0), Some(&r0)) = (levels.first(), ratios.first()) else {
        return false;
    };
    levels
        .iter()
        .zip(ratios)
        .all(|(&j, &r)| r.is_finite() && r >= r0 * (-(slack * (j - j0) as f64)).exp2() * (1.0 - 1e-12))
}
