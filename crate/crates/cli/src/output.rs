//! CSV and JSON emission, schema listing for `--help`, and `verify`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde_json::{json, Value};

use frostlab::furstenberg::FurstenbergReport;
use frostlab::grid;
use frostlab::report::{bounded_growth, fmt_num, read_csv, write_csv, BoundReport, CsvRow};
use frostlab::sumproduct::{SumProductReport, EPSILON_SLACK};

use crate::experiments::{Criterion, Experiment, MeasureRow, Outputs, SetRow};

pub const RESULTS: &str = "results.csv";
pub const SETS: &str = "sets.csv";
pub const MEASURES: &str = "measures.csv";
pub const FURSTENBERG: &str = "furstenberg.csv";
pub const SUMPRODUCT: &str = "sumproduct.csv";
pub const SUMMARY: &str = "summary.json";

fn schemas() -> [(&'static str, &'static [&'static str]); 5] {
    [
        (RESULTS, BoundReport::HEADER),
        (SETS, SetRow::HEADER),
        (MEASURES, MeasureRow::HEADER),
        (FURSTENBERG, FurstenbergReport::HEADER),
        (SUMPRODUCT, SumProductReport::HEADER),
    ]
}

pub fn schema_help() -> String {
    let mut s = String::from("Output files (all written on every run, header-only when empty):\n");
    for (file, header) in schemas() {
        s.push_str(&format!("  {file:<16} {}\n", header.join(",")));
    }
    s.push_str(&format!(
        "  {SUMMARY:<16} keys: experiment, params, criteria[], pass, seed, runtime_ms\n"
    ));
    s
}

fn write_one<R: CsvRow>(dir: &Path, name: &str, rows: &[R]) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(BufWriter::new(f), rows)?;
    Ok(path)
}

pub fn criteria_pass(criteria: &[Criterion]) -> bool {
    criteria.iter().all(|c| c.pass || c.advisory)
}

pub fn summary(exps: &[Experiment], out: &Outputs, seed: u64, runtime_ms: u128) -> Value {
    let criteria: Vec<Value> = out
        .criteria
        .iter()
        .map(|c| {
            json!({
                "experiment": c.experiment,
                "name": c.name,
                "pass": c.pass,
                "advisory": c.advisory,
                "detail": c.detail,
            })
        })
        .collect();
    json!({
        "experiment": exps.iter().map(|e| e.name.clone()).collect::<Vec<_>>(),
        "params": exps.iter().map(|e| {
            let mut p = e.params.clone();
            p.insert("seed".into(), e.seed.to_string());
            p
        }).collect::<Vec<BTreeMap<_, _>>>(),
        "criteria": criteria,
        "pass": criteria_pass(&out.criteria),
        "seed": seed,
        "runtime_ms": runtime_ms as u64,
    })
}

pub fn emit_report(out: &Outputs, summary: &Value, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = vec![
        write_one(dir, RESULTS, &out.bounds)?,
        write_one(dir, SETS, &out.sets)?,
        write_one(dir, MEASURES, &out.measures)?,
        write_one(dir, FURSTENBERG, &out.furstenberg)?,
        write_one(dir, SUMPRODUCT, &out.sumproduct)?,
    ];
    let path = dir.join(SUMMARY);
    let text = serde_json::to_string_pretty(summary)? + "\n";
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    paths.push(path);
    Ok(paths)
}

fn num(s: &str) -> anyhow::Result<f64> {
    s.parse().with_context(|| format!("not a number: `{s}`"))
}

/// Recomputes derived columns from the raw ones. Returns the problems found.
pub fn verify(text: &str) -> anyhow::Result<(String, Vec<String>)> {
    let header = text.lines().next().unwrap_or("");
    let mut problems = Vec::new();
    if header == BoundReport::HEADER.join(",") {
        let rows = read_csv::<BoundReport>(text)?;
        let mut groups: BTreeMap<Vec<String>, (Vec<u32>, Vec<f64>)> = BTreeMap::new();
        for (i, r) in rows.iter().enumerate() {
            let (lhs, rhs) = (num(&r[8])?, num(&r[9])?);
            let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
            if fmt_num(ratio) != r[10] {
                problems.push(format!("row {}: ratio {} but lhs/rhs = {}", i + 2, r[10], fmt_num(ratio)));
            }
            let g = groups.entry(r[..6].to_vec()).or_default();
            g.0.push(r[7].parse()?);
            g.1.push(ratio);
        }
        for (key, (levels, ratios)) in &groups {
            if levels.len() >= 3 && !bounded_growth(levels, ratios) {
                problems.push(format!("{}: ratio growth beyond the allowed envelope", key.join(",")));
            }
        }
        Ok((format!("{} bound rows in {} groups", rows.len(), groups.len()), problems))
    } else if header == SumProductReport::HEADER.join(",") {
        let rows = read_csv::<SumProductReport>(text)?;
        for (i, r) in rows.iter().enumerate() {
            let level: u32 = r[0].parse()?;
            let (card, max, exponent) = (num(&r[3])?, num(&r[6])?, num(&r[7])?);
            let bound = card.powf(exponent);
            let pass = max >= bound * grid::delta(level).powf(EPSILON_SLACK);
            if fmt_num(bound) != r[8] || fmt_num(max / bound) != r[9] || pass.to_string() != r[10] {
                problems.push(format!("row {}: bound, ratio or pass flag disagrees with the raw sizes", i + 2));
            }
        }
        Ok((format!("{} sum-product rows", rows.len()), problems))
    } else if header == FurstenbergReport::HEADER.join(",") {
        let rows = read_csv::<FurstenbergReport>(text)?;
        for (i, r) in rows.iter().enumerate() {
            let (m, lo, hi) = (num(&r[5])?, num(&r[6])?, num(&r[7])?);
            if lo > hi + 1e-12 {
                problems.push(format!("row {}: lower bound above upper bound", i + 2));
            }
            if !(m.is_finite()) {
                problems.push(format!("row {}: measured dimension not finite", i + 2));
            }
        }
        Ok((format!("{} furstenberg rows", rows.len()), problems))
    } else if header == SetRow::HEADER.join(",") || header == MeasureRow::HEADER.join(",") {
        let n = text.lines().count().saturating_sub(1);
        Ok((format!("{n} rows, no derived columns"), problems))
    } else {
        bail!("unrecognized CSV header `{header}`")
    }
}
