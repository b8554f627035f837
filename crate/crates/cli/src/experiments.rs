//! Typed experiments parsed from config sections, and their execution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;

use frostlab::furstenberg::{run_furstenberg, FurstenbergReport};
use frostlab::generators::{
    ap_neighborhood_set, cantor_measure, cantor_product_measure, cantor_set, non_concentration_constant,
    product_set,
};
use frostlab::grassmann::{sample_directions, DirectionFamily, DirectionSpec};
use frostlab::grid::box_dimension;
use frostlab::incidence::{check_incidence_bound, full_line_family, random_lines, AffineFamily};
use frostlab::numeric::{split_seed, streams};
use frostlab::projector::{check_l2_classical, check_projection_bound, MeasureInput, Variant, SPAN_TOLERANCE};
use frostlab::report::{bounded_growth, fmt_num, BoundReport, CsvRow};
use frostlab::sumproduct::{run_sumproduct, SumProductReport};
use frostlab::{DeltaSet, DiscreteMeasure, FubiniMeasure};

use crate::config::{err, ConfigError, Section};

#[derive(Clone, Debug)]
pub enum Source {
    Cantor { level: u32, s: f64 },
    CantorProduct { level: u32, s1: f64, s2: f64 },
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct Dirs {
    pub spec: DirectionSpec,
    pub n: usize,
    pub angular_level: Option<u32>,
}

#[derive(Clone, Debug)]
pub enum Lines {
    Random(usize),
    Full,
    File(PathBuf),
}

#[derive(Clone, Copy, Debug)]
pub enum GenKind {
    Cantor,
    CantorProduct,
    Ap,
}

#[derive(Clone, Debug)]
pub enum Spec {
    Gen { kind: GenKind, level: u32, s1: f64, s2: f64, terms: u64, spacing: u32, file: Option<PathBuf> },
    Energy { source: Source, s: f64, alpha: f64 },
    Project { source: Source, dirs: Dirs, s: f64, alpha: f64, variant: Variant },
    L2 { source: Source, dirs: Dirs },
    Incidence { source: Source, lines: Lines, s: f64, sigma: f64, alpha: f64, variant: Variant },
    Furstenberg { s: f64, t: f64, sigma: f64, build_level: u32, min_level: u32, max_level: u32 },
    SumProduct { s_a: f64, s_b: f64, s_c: f64, levels: (u32, u32), incidence: bool },
    Sweep { inner: Box<Spec>, levels: (u32, u32) },
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub name: String,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
    pub spec: Spec,
}

pub const EXPERIMENTS: &[&str] =
    &["gen", "energy", "project", "l2", "incidence", "furstenberg", "sumproduct", "sweep"];

fn parse_variant(sec: &mut Section) -> Result<Variant, ConfigError> {
    match sec.raw("variant") {
        None => Ok(Variant::General),
        Some((line, v)) => v.parse().map_err(|_| err(line, format!("unknown variant `{v}`"))),
    }
}

/// With `level` given (sweeps) the section must not set its own.
fn parse_source(sec: &mut Section, level: Option<u32>) -> Result<Source, ConfigError> {
    let (line, kind) = sec.raw("measure").unwrap_or((sec.line, "cantor_product".into()));
    let level_key = |sec: &mut Section| match level {
        Some(l) => match sec.raw("level") {
            Some((line, _)) => Err(err(line, "`level` is set by `levels` in a sweep")),
            None => Ok(l),
        },
        None => sec.require("level"),
    };
    match kind.as_str() {
        "cantor" => Ok(Source::Cantor {
            level: level_key(sec)?,
            s: sec.or("s1", 0.5)?,
        }),
        "cantor_product" => Ok(Source::CantorProduct {
            level: level_key(sec)?,
            s1: sec.or("s1", 0.6)?,
            s2: sec.or("s2", 0.6)?,
        }),
        "file" if level.is_none() => Ok(Source::File(sec.require::<String>("path")?.into())),
        "file" => Err(err(line, "a sweep needs a generated measure")),
        other => Err(err(line, format!("unknown measure `{other}`"))),
    }
}

fn parse_dirs(sec: &mut Section) -> Result<Dirs, ConfigError> {
    let (line, kind) = sec.raw("directions").unwrap_or((sec.line, "full".into()));
    let spec = match kind.as_str() {
        "full" => DirectionSpec::Full,
        "cantor" => DirectionSpec::Cantor(sec.require("t")?),
        other => return Err(err(line, format!("unknown directions `{other}`"))),
    };
    Ok(Dirs {
        spec,
        n: sec.or("n", 1)?,
        angular_level: sec.get("angular_level")?,
    })
}

fn parse_lines(sec: &mut Section) -> Result<Lines, ConfigError> {
    let (line, kind) = sec.raw("lines").unwrap_or((sec.line, "random".into()));
    match kind.as_str() {
        "random" => Ok(Lines::Random(sec.or("count", 200)?)),
        "full" => Ok(Lines::Full),
        "file" => Ok(Lines::File(sec.require::<String>("family_path")?.into())),
        other => Err(err(line, format!("unknown lines `{other}`"))),
    }
}

fn parse_check(name: &str, sec: &mut Section, level: Option<u32>) -> Result<Spec, ConfigError> {
    Ok(match name {
        "energy" => {
            let source = parse_source(sec, level)?;
            let s = sec.require("s")?;
            Spec::Energy { source, s, alpha: sec.or("alpha", s)? }
        }
        "project" | "projection" => {
            let source = parse_source(sec, level)?;
            let dirs = parse_dirs(sec)?;
            let s = sec.require("s")?;
            Spec::Project { source, dirs, s, alpha: sec.or("alpha", s)?, variant: parse_variant(sec)? }
        }
        "l2" => Spec::L2 { source: parse_source(sec, level)?, dirs: parse_dirs(sec)? },
        "incidence" => {
            let source = parse_source(sec, level)?;
            let lines = parse_lines(sec)?;
            let s = sec.require("s")?;
            Spec::Incidence {
                source,
                lines,
                s,
                sigma: sec.or("sigma", 1.0)?,
                alpha: sec.or("alpha", s)?,
                variant: parse_variant(sec)?,
            }
        }
        other => return Err(err(sec.line, format!("`{other}` cannot be swept"))),
    })
}

pub fn parse_experiment(mut sec: Section, global_seed: u64) -> Result<Experiment, ConfigError> {
    let params = sec.echo();
    let name: String = sec.require("name")?;
    let seed = sec.or("seed", global_seed)?;
    let spec = match name.as_str() {
        "gen" => {
            let (line, kind) = sec.raw("kind").unwrap_or((sec.line, "cantor".into()));
            let kind = match kind.as_str() {
                "cantor" => GenKind::Cantor,
                "cantor_product" => GenKind::CantorProduct,
                "ap" => GenKind::Ap,
                other => return Err(err(line, format!("unknown kind `{other}`"))),
            };
            Spec::Gen {
                kind,
                level: sec.require("level")?,
                s1: sec.or("s1", 0.5)?,
                s2: sec.or("s2", 0.5)?,
                terms: sec.or("terms", 16)?,
                spacing: sec.or("spacing", 4)?,
                file: sec.get::<String>("file")?.map(PathBuf::from),
            }
        }
        "furstenberg" => {
            let (min_level, max_level) = sec.range("levels", (6, 10))?;
            Spec::Furstenberg {
                s: sec.or("s", 0.5)?,
                t: sec.or("t", 0.5)?,
                sigma: sec.or("sigma", 1.0)?,
                build_level: sec.or("build_level", 14)?,
                min_level,
                max_level,
            }
        }
        "sumproduct" => {
            let s_b = sec.or("s_b", 0.4)?;
            Spec::SumProduct {
                s_a: sec.or("s_a", s_b)?,
                s_b,
                s_c: sec.or("s_c", s_b)?,
                levels: sec.range("levels", (8, 12))?,
                incidence: sec.or("incidence", false)?,
            }
        }
        "sweep" => {
            let levels = sec.range("levels", (6, 10))?;
            let check: String = sec.require("check")?;
            Spec::Sweep { inner: Box::new(parse_check(&check, &mut sec, Some(levels.0))?), levels }
        }
        other if EXPERIMENTS.contains(&other) => parse_check(other, &mut sec, None)?,
        other => return Err(err(sec.line, format!("unknown experiment `{other}`"))),
    };
    sec.finish()?;
    Ok(Experiment { name, seed, params, spec })
}

/// Extra CSV schemas owned by the runner.
#[derive(Clone, Debug, PartialEq)]
pub struct SetRow {
    pub kind: String,
    pub dim: usize,
    pub level: u32,
    pub cells: usize,
    pub box_dim: Option<f64>,
    pub non_concentration: Option<f64>,
}

impl CsvRow for SetRow {
    const HEADER: &'static [&'static str] = &["kind", "dim", "level", "cells", "box_dim", "non_concentration"];

    fn record(&self) -> Vec<String> {
        vec![
            self.kind.clone(),
            self.dim.to_string(),
            self.level.to_string(),
            self.cells.to_string(),
            self.box_dim.map(fmt_num).unwrap_or_default(),
            self.non_concentration.map(fmt_num).unwrap_or_default(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureRow {
    pub dim: usize,
    pub level: u32,
    pub atoms: usize,
    pub mass: f64,
    pub s: f64,
    pub energy: f64,
    pub alpha: f64,
    pub amplitude: f64,
    pub frostman: f64,
}

impl CsvRow for MeasureRow {
    const HEADER: &'static [&'static str] =
        &["dim", "level", "atoms", "mass", "s", "energy", "alpha", "amplitude", "frostman"];

    fn record(&self) -> Vec<String> {
        vec![
            self.dim.to_string(),
            self.level.to_string(),
            self.atoms.to_string(),
            fmt_num(self.mass),
            fmt_num(self.s),
            fmt_num(self.energy),
            fmt_num(self.alpha),
            fmt_num(self.amplitude),
            fmt_num(self.frostman),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Criterion {
    pub experiment: String,
    pub name: String,
    pub pass: bool,
    /// Advisory criteria are reported but never change the exit code.
    pub advisory: bool,
    pub detail: String,
}

#[derive(Default, Debug)]
pub struct Outputs {
    pub bounds: Vec<BoundReport>,
    pub sets: Vec<SetRow>,
    pub measures: Vec<MeasureRow>,
    pub furstenberg: Vec<FurstenbergReport>,
    pub sumproduct: Vec<SumProductReport>,
    pub criteria: Vec<Criterion>,
}

enum Loaded {
    Plain(DiscreteMeasure),
    Fubini(FubiniMeasure),
}

impl Loaded {
    fn input(&self) -> MeasureInput<'_> {
        match self {
            Loaded::Plain(m) => MeasureInput::Plain(m),
            Loaded::Fubini(f) => MeasureInput::Fubini(f),
        }
    }

    fn plain(&self) -> anyhow::Result<DiscreteMeasure> {
        Ok(match self {
            Loaded::Plain(m) => m.clone(),
            Loaded::Fubini(f) => f.assemble()?,
        })
    }
}

fn read(base: &Path, p: &Path) -> anyhow::Result<String> {
    let full = base.join(p);
    std::fs::read_to_string(&full).with_context(|| format!("reading {}", full.display()))
}

fn load(source: &Source, seed: u64, base: &Path) -> anyhow::Result<Loaded> {
    Ok(match source {
        Source::Cantor { level, s } => Loaded::Plain(cantor_measure(*level, *s, seed)?),
        Source::CantorProduct { level, s1, s2 } => Loaded::Fubini(cantor_product_measure(*level, *s1, *s2, seed)?),
        Source::File(p) => Loaded::Plain(DiscreteMeasure::from_text(&read(base, p)?)?),
    })
}

fn directions(dirs: &Dirs, d: usize, level: u32, seed: u64) -> anyhow::Result<DirectionFamily> {
    Ok(sample_directions(d, dirs.n, dirs.spec, dirs.angular_level.unwrap_or(level), seed)?)
}

fn with_level(spec: &Spec, level: u32) -> Spec {
    let mut out = spec.clone();
    match &mut out {
        Spec::Energy { source, .. }
        | Spec::Project { source, .. }
        | Spec::L2 { source, .. }
        | Spec::Incidence { source, .. } => match source {
            Source::Cantor { level: l, .. } | Source::CantorProduct { level: l, .. } => *l = level,
            Source::File(_) => {}
        },
        _ => {}
    }
    out
}

/// One bound row for project / l2 / incidence.
fn bound_row(spec: &Spec, seed: u64, base: &Path) -> anyhow::Result<BoundReport> {
    match spec {
        Spec::Project { source, dirs, s, alpha, variant } => {
            let m = load(source, seed, base)?;
            let d = m.plain()?.dim();
            let level = m.plain()?.level();
            let mut fam = directions(dirs, d, level, split_seed(seed, streams::DIRECTIONS))?;
            if *variant == Variant::Fubini {
                fam = fam.restricted(|v| v.fubini_span_margin() > SPAN_TOLERANCE)?;
            }
            Ok(check_projection_bound(m.input(), &fam, *s, *alpha, *variant)?)
        }
        Spec::L2 { source, dirs } => {
            let mu = load(source, seed, base)?.plain()?;
            let fam = directions(dirs, mu.dim(), mu.level(), split_seed(seed, streams::DIRECTIONS))?;
            Ok(check_l2_classical(&mu, &fam, fam.sigma())?)
        }
        Spec::Incidence { source, lines, s, sigma, alpha, variant } => {
            let m = load(source, seed, base)?;
            let level = m.plain()?.level();
            let fam = match lines {
                Lines::Random(count) => random_lines(*count, level, seed)?,
                Lines::Full => full_line_family(level)?,
                Lines::File(p) => AffineFamily::from_text(&read(base, p)?)?,
            };
            Ok(check_incidence_bound(m.input(), &fam, *s, *sigma, *alpha, *variant)?.report)
        }
        _ => bail!("not a bound check"),
    }
}

fn crit(exp: &Experiment, name: &str, pass: bool, advisory: bool, detail: String) -> Criterion {
    Criterion { experiment: exp.name.clone(), name: name.into(), pass, advisory, detail }
}

/// Runs one experiment, appending rows and exactly one criterion to `out`.
/// `base` resolves relative input paths; `out_dir` receives generated files.
pub fn run_experiment(exp: &Experiment, base: &Path, out_dir: &Path, out: &mut Outputs) -> anyhow::Result<()> {
    let seed = exp.seed;
    match &exp.spec {
        Spec::Gen { kind, level, s1, s2, terms, spacing, file } => {
            let (set, s): (DeltaSet, Option<f64>) = match kind {
                GenKind::Cantor => (cantor_set(*level, *s1, seed)?, Some(*s1)),
                GenKind::CantorProduct => (
                    product_set(
                        &cantor_set(*level, *s1, split_seed(seed, streams::CANTOR_A))?,
                        &cantor_set(*level, *s2, split_seed(seed, streams::CANTOR_B))?,
                    )?,
                    Some(s1 + s2),
                ),
                GenKind::Ap => (ap_neighborhood_set(*level, *terms, *spacing)?, None),
            };
            if let Some(f) = file {
                let path = out_dir.join(f);
                std::fs::write(&path, set.to_text()).with_context(|| format!("writing {}", path.display()))?;
            }
            let box_dim = if *level >= 4 { Some(box_dimension(&set, 2, *level)?.slope) } else { None };
            let non_concentration = s.map(|s| non_concentration_constant(&set, s)).transpose()?;
            out.sets.push(SetRow {
                kind: format!("{kind:?}").to_lowercase(),
                dim: set.dim(),
                level: *level,
                cells: set.len(),
                box_dim,
                non_concentration,
            });
            out.criteria.push(crit(exp, "nonempty", !set.is_empty(), false, format!("{} cells", set.len())));
        }
        Spec::Energy { source, s, alpha } => {
            let mu = load(source, seed, base)?.plain()?;
            let row = MeasureRow {
                dim: mu.dim(),
                level: mu.level(),
                atoms: mu.len(),
                mass: mu.total_mass(),
                s: *s,
                energy: mu.energy(*s)?,
                alpha: *alpha,
                amplitude: mu.amplitude(*alpha)?,
                frostman: mu.frostman_constant(*alpha)?,
            };
            let ok = row.energy.is_finite();
            out.criteria.push(crit(exp, "energy_finite", ok, false, format!("I_s = {}", fmt_num(row.energy))));
            out.measures.push(row);
        }
        Spec::Project { .. } | Spec::L2 { .. } | Spec::Incidence { .. } => {
            let row = bound_row(&exp.spec, seed, base)?;
            let ok = row.ratio.is_finite();
            out.criteria.push(crit(exp, "ratio_finite", ok, false, format!("ratio {}", fmt_num(row.ratio))));
            out.bounds.push(row);
        }
        Spec::Sweep { inner, levels } => {
            let lv: Vec<u32> = (levels.0..=levels.1).collect();
            let rows = lv
                .par_iter()
                .map(|&l| bound_row(&with_level(inner, l), seed, base))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
            let ok = bounded_growth(&lv, &ratios);
            let detail = ratios.iter().map(|r| fmt_num(*r)).collect::<Vec<_>>().join(" ");
            out.criteria.push(crit(exp, "ratio_growth", ok, false, detail));
            out.bounds.extend(rows);
        }
        Spec::Furstenberg { s, t, sigma, build_level, min_level, max_level } => {
            let r = run_furstenberg(*s, *t, *sigma, *build_level, *min_level, *max_level, seed)?;
            let detail = format!(
                "measured {} in [{}, {}] +- 0.15",
                fmt_num(r.measured_dim),
                fmt_num(r.lower_bound),
                fmt_num(r.upper_bound)
            );
            out.criteria.push(crit(exp, "sandwich", r.in_sandwich(), !r.hypothesis_met, detail));
            out.furstenberg.push(r);
        }
        Spec::SumProduct { s_a, s_b, s_c, levels, incidence } => {
            let rows = (levels.0..=levels.1)
                .into_par_iter()
                .map(|l| {
                    let b = cantor_set(l, *s_b, split_seed(seed, streams::CANTOR_B))?;
                    let c = if s_c == s_b { b.clone() } else { cantor_set(l, *s_c, split_seed(seed, streams::CANTOR_C))? };
                    let a = if s_a == s_b { b.clone() } else { cantor_set(l, *s_a, split_seed(seed, streams::CANTOR_A))? };
                    run_sumproduct(&a, &b, &c, *s_b, *s_c, *incidence)
                })
                .collect::<frostlab::Result<Vec<_>>>()?;
            let ok = rows.iter().all(|r| r.pass && r.witness_residual <= 1e-12 && r.witness_inside);
            let detail = format!(
                "mode=confirmation, hypothesis {}",
                if rows.iter().all(|r| r.hypothesis_met) { "met" } else { "not met" }
            );
            out.criteria.push(crit(exp, "sumproduct_lower", ok, false, detail));
            out.sumproduct.extend(rows);
        }
    }
    Ok(())
}

pub fn run_all(exps: &[Experiment], base: &Path, out_dir: &Path) -> anyhow::Result<Outputs> {
    let mut out = Outputs::default();
    for (i, e) in exps.iter().enumerate() {
        run_experiment(e, base, out_dir, &mut out)
            .map_err(|err| anyhow!("experiment {} ({}): {err:#}", i + 1, e.name))?;
    }
    Ok(out)
}
