use clap::{Parser, Subcommand};
use lzc_cli::config::{Mode, RunConfig, SweepPath};
use lzc_cli::output::{write_csv, write_svg};
use lzc_cli::presets;
use lzc_cli::runner::{self, Outcome};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const LONG_ABOUT: &str = "\
Transition probabilities for a linear level crossing a Coulomb band.

CONFIG FORMAT (flat key = value, `#` comments, arrays comma-separated):
  beta        slope of the crossing level (required, > 0)
  k           Coulomb strengths k_1..k_N (required)
  g           couplings g_1..g_N (required, same length as k)
  init        level0 | band:<q>          (default level0)
  mode        analytic | numeric | validate   (default analytic)
  sweep       <path>, <start>, <stop>, <steps>, linear|log
              path is beta, k[i], g[i] (0-based index) or dk (k[1]=k[0]+v)
  bt_horizon  integration horizon as beta*t  (default 2000)
  rel_tol, abs_tol, tau0, max_steps    integrator overrides
  csv, svg    output paths

CSV COLUMNS (subset per mode, header always present; 12 significant digits):
  sweep_value      swept parameter value (0 for single runs)
  p00_analytic     exact survival probability from the characteristic roots
  p00_numeric      propagator estimate with Richardson extrapolation
  p10, p20         N=2 closed-form band-to-level probabilities
  p10_numeric, p20_numeric   time-averaged numerics for the same
  pq0_avg          analytic time-averaged P_q0 for band:<q> runs
  pq0_avg_numeric  numeric counterpart
  err_estimate     largest numeric error estimate in the row

Validate mode prints a per-point pass/fail table (tolerances 1e-3 for p00,
1e-2 for band probabilities) and exits 2 when any check fails.

ENVIRONMENT:
  LZC_THREADS   cap the number of parallel sweep workers";

#[derive(Parser)]
#[command(name = "lzc", version, about = "Level-crossing-with-a-Coulomb-band calculator", long_about = LONG_ABOUT)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a config, writing CSV/SVG outputs
    Run {
        config: PathBuf,
        /// Override a config field, e.g. --set mode=numeric (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run with analytic-vs-numeric cross-checks (exit 2 on disagreement)
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Write and execute a built-in preset (fig3a | fig3b)
    Preset {
        /// fig3a: sweep g1; fig3b: sweep the splitting k2-k1
        name: String,
        /// Output directory for the config, CSV and SVG files
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config, set } => execute_file(&config, &set, None),
        Cmd::Validate { config, set } => execute_file(&config, &set, Some(Mode::Validate)),
        Cmd::Preset { name, out } => execute_preset(&name, &out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn execute_file(
    path: &Path,
    overrides: &[String],
    force_mode: Option<Mode>,
) -> Result<ExitCode, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let mut cfg =
        RunConfig::parse(&path.display().to_string(), &text).map_err(|e| e.to_string())?;
    for spec in overrides {
        cfg.apply_override(spec).map_err(|e| e.to_string())?;
    }
    if let Some(mode) = force_mode {
        cfg.mode = mode;
    }
    execute(
        &cfg,
        path.file_stem().and_then(|s| s.to_str()).unwrap_or("run"),
    )
}

fn execute_preset(name: &str, out_dir: &Path) -> Result<ExitCode, String> {
    let mut cfg = presets::by_name(name).ok_or_else(|| {
        format!(
            "unknown preset `{name}`; available: {}",
            presets::PRESET_NAMES.join(", ")
        )
    })?;
    std::fs::create_dir_all(out_dir).map_err(|e| format!("creating {}: {e}", out_dir.display()))?;
    cfg.csv = Some(out_dir.join(format!("{name}.csv")));
    cfg.svg = Some(out_dir.join(format!("{name}.svg")));
    let config_path = out_dir.join(format!("{name}.lzc"));
    std::fs::write(&config_path, cfg.to_config_text())
        .map_err(|e| format!("writing {}: {e}", config_path.display()))?;
    println!("preset {name}: config written to {}", config_path.display());
    execute(&cfg, name)
}

fn execute(cfg: &RunConfig, title: &str) -> Result<ExitCode, String> {
    let outcome = runner::run(cfg).map_err(|e| e.to_string())?;
    if let Some(path) = &cfg.csv {
        write_csv(path, &outcome).map_err(|e| e.to_string())?;
        println!("wrote {} ({} rows)", path.display(), outcome.rows.len());
    }
    if let Some(path) = &cfg.svg {
        let x_label = cfg
            .sweep
            .as_ref()
            .map(|s| sweep_label(s.path))
            .unwrap_or_else(|| "sweep_value".into());
        write_svg(path, &outcome, title, &x_label).map_err(|e| e.to_string())?;
        println!("wrote {}", path.display());
    }
    if cfg.csv.is_none() && cfg.svg.is_none() {
        print!("{}", lzc_cli::output::csv_text(&outcome));
    }
    if let Some(validation) = &outcome.validation {
        print_validation(&outcome, validation);
        if !validation.passed() {
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_label(path: SweepPath) -> String {
    match path {
        SweepPath::DeltaK => "k2 - k1".into(),
        other => other.to_string(),
    }
}

fn print_validation(_outcome: &Outcome, v: &lzc_cli::runner::ValidationSummary) {
    println!(
        "{:>14}  {:<5} {:>16} {:>16} {:>10} {:>8}  status",
        "sweep_value", "qty", "analytic", "numeric", "delta", "tol"
    );
    for c in &v.checks {
        println!(
            "{:>14.6e}  {:<5} {:>16.9e} {:>16.9e} {:>10.2e} {:>8.0e}  {}",
            c.sweep_value,
            c.quantity,
            c.analytic,
            c.numeric,
            c.delta,
            c.tol,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    let passed = v.checks.iter().filter(|c| c.pass).count();
    println!(
        "validation: {} ({passed}/{} checks within tolerance)",
        if v.passed() { "PASS" } else { "FAIL" },
        v.checks.len()
    );
}
