use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use vmbif::config::{Mu0Selector, RunConfig};
use vmbif::output::OutputDir;
use vmbif::pipeline::{run_branch, run_check, run_scan, Outcome, SCAN_CSV};

#[derive(Parser)]
#[command(
    name = "vmbif",
    version,
    about = "Bifurcation points of reduced Vlasov-Maxwell equilibria"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the species relations, the β fits and ε(λ) ∈ Ω on the λ grid.
    Check(Common),
    /// Scan g(λ) for sign changes and classify the roots.
    Scan(Common),
    /// Continue the branch through one point of a previous scan.
    Branch {
        #[command(flatten)]
        common: Common,
        /// 1-based id of the point in the scan summary.
        #[arg(long, default_value_t = 1)]
        point: usize,
        /// Also write the fields of every branch point under <out>/fields.
        #[arg(long)]
        dump_fields: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for λ and τ work items (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Reserved; every algorithm is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mu0_index: Option<usize>,
    #[arg(long)]
    tol_omega: Option<f64>,
    #[arg(long)]
    tol_root: Option<f64>,
    #[arg(long)]
    tol_newton: Option<f64>,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("vmbif: {msg}");
    ExitCode::from(2)
}

fn load(common: &Common) -> Result<(RunConfig, Map<String, Value>), String> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| format!("{}: {e}", common.config.display()))?;
    let mut cfg =
        RunConfig::parse(&text).map_err(|e| format!("{}: {e}", common.config.display()))?;
    let mut overrides = Map::new();
    if let Some(i) = common.mu0_index {
        cfg.mu0 = Mu0Selector::Index(i);
        overrides.insert("mu0_index".into(), json!(i));
    }
    for (name, value, slot) in [
        ("tol_omega", common.tol_omega, &mut cfg.tol.omega),
        ("tol_root", common.tol_root, &mut cfg.tol.root),
        ("tol_newton", common.tol_newton, &mut cfg.tol.newton),
    ] {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("--{} must be positive", name.replace('_', "-")));
            }
            *slot = v;
            overrides.insert(name.into(), json!(v));
        }
    }
    if let Some(t) = common.threads {
        overrides.insert("threads".into(), json!(t));
    }
    if let Some(s) = common.seed {
        overrides.insert("seed".into(), json!(s));
    }
    let mut meta = Map::new();
    meta.insert("input".into(), json!(text));
    meta.insert("overrides".into(), Value::Object(overrides));
    Ok((cfg, meta))
}

fn finish(result: vmbif::Result<Outcome>) -> ExitCode {
    match result {
        Ok(outcome) => {
            for note in &outcome.notes {
                println!("{note}");
            }
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(vmbif::Error::Io(e)) => usage(e),
        Err(e) => {
            eprintln!("vmbif: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Check(c) | Command::Scan(c) => c,
        Command::Branch { common, .. } => common,
    };
    if let Some(t) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            return usage(e);
        }
    }
    let (cfg, meta) = match load(common) {
        Ok(v) => v,
        Err(e) => return usage(e),
    };
    let out = match OutputDir::create(&common.out) {
        Ok(o) => o,
        Err(e) => return usage(e),
    };
    match &cli.command {
        Command::Check(_) => finish(run_check(&cfg, &out, &meta)),
        Command::Scan(_) => finish(run_scan(&cfg, &out, &meta)),
        Command::Branch {
            point, dump_fields, ..
        } => {
            if !out.exists(SCAN_CSV) {
                return usage(format!(
                    "{} not found; run scan first",
                    out.path(SCAN_CSV).display()
                ));
            }
            finish(run_branch(&cfg, &out, &meta, *point, *dump_fields))
        }
    }
}
