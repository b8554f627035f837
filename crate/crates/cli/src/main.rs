mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use frostlab::generators::{ap_neighborhood_set, cantor_set, product_set};
use frostlab::numeric::{split_seed, streams};

const CONFIG_HELP: &str = "\
Config format: `key = value` lines, `#` comments, one `[experiment]` section per run.
Top-level keys: seed (default 0).
Every section needs `name`, one of: gen, energy, project, l2, incidence, furstenberg,
sumproduct, sweep. Sections may override `seed`.

  measure = cantor | cantor_product | file   (default cantor_product)
      level, s1, s2 for generated measures; path for files
  directions = full | cantor   t (cantor dimension), n (plane dim, default 1),
      angular_level (default = measure level)
  lines = random | full | file  count (default 200), family_path
  energy:      s, alpha (default s)
  project:     s, alpha, variant = general | fubini
  l2:          directions only
  incidence:   s, sigma (default 1), alpha, variant
  furstenberg: s, t, sigma, build_level (14), levels (6..10)
  sumproduct:  s_b (0.4), s_c, s_a (default s_b; equal dimensions share one set),
               levels (8..12), incidence (false)
  sweep:       check = project | l2 | incidence, levels (6..10), plus that check's keys
  gen:         kind = cantor | cantor_product | ap, level, s1, s2, terms, spacing, file

Exit codes: 0 all criteria pass, 1 a bound criterion failed, 2 config or I/O error.
FROSTLAB_THREADS caps the worker threads.
";

#[derive(Parser)]
#[command(name = "frostlab", version, about = "Multi-scale experiments on Frostman measures, projections and incidences")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every experiment in a config file
    Run {
        config: PathBuf,
        /// Output directory
        #[arg(long, default_value = "frostlab-out")]
        out: PathBuf,
    },
    /// Print a generated set in the text format
    Gen {
        kind: Kind,
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 0.5)]
        s1: f64,
        #[arg(long, default_value_t = 0.5)]
        s2: f64,
        #[arg(long, default_value_t = 16)]
        terms: u64,
        #[arg(long, default_value_t = 4)]
        spacing: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute derived columns of an emitted CSV
    Verify { csv: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cantor,
    CantorProduct,
    Ap,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FROSTLAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("FROSTLAB_THREADS=`{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(config: &PathBuf, out: &PathBuf) -> anyhow::Result<bool> {
    let started = Instant::now();
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = config::parse(&text)?;
    let mut global = cfg.global;
    let seed = global.or("seed", 0u64)?;
    global.finish()?;
    let exps = cfg
        .experiments
        .into_iter()
        .map(|s| experiments::parse_experiment(s, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let base = config.parent().map(PathBuf::from).unwrap_or_default();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let outputs = experiments::run_all(&exps, &base, out)?;
    let summary = output::summary(&exps, &outputs, seed, started.elapsed().as_millis());
    for p in output::emit_report(&outputs, &summary, out)? {
        println!("wrote {}", p.display());
    }
    for c in &outputs.criteria {
        let tag = match (c.pass, c.advisory) {
            (true, _) => "PASS",
            (false, true) => "WARN",
            (false, false) => "FAIL",
        };
        println!("{tag} {} {}: {}", c.experiment, c.name, c.detail);
    }
    Ok(output::criteria_pass(&outputs.criteria))
}

fn main() -> ExitCode {
    let matches = Cli::command().after_long_help(format!("{CONFIG_HELP}\n{}", output::schema_help())).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.cmd {
        Cmd::Run { config, out } => run(&config, &out),
        Cmd::Gen { kind, level, s1, s2, terms, spacing, seed } => (|| {
            let set = match kind {
                Kind::Cantor => cantor_set(level, s1, seed)?,
                Kind::CantorProduct => product_set(
                    &cantor_set(level, s1, split_seed(seed, streams::CANTOR_A))?,
                    &cantor_set(level, s2, split_seed(seed, streams::CANTOR_B))?,
                )?,
                Kind::Ap => ap_neighborhood_set(level, terms, spacing)?,
            };
            print!("{}", set.to_text());
            Ok(true)
        })(),
        Cmd::Verify { csv } => (|| {
            let text = std::fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            let (what, problems) = output::verify(&text)?;
            println!("{what}");
            for p in &problems {
                println!("FAIL {p}");
            }
            Ok(problems.is_empty())
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
