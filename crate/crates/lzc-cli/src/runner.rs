//! Sweep execution: builds the per-point model, evaluates the requested
//! quantities, and assembles rows for the CSV/SVG writers. Sweep points run
//! in parallel; rows come back in sweep order.

use crate::config::{InitSpec, Mode, RunConfig, SweepPath};
use lzc::propagator::{
    converged_p00, time_averaged_population, InitialCondition, IntegratorConfig,
};
use lzc::{
    band_coefficients, find_roots, n2_probabilities, pq0_time_average, survival_probability,
    AnalyticError, ModelError, ModelParams, PropagatorError,
};
use rayon::prelude::*;
use thiserror::Error;

/// Analytic-vs-numeric agreement thresholds used by `validate` mode.
pub const P00_VALIDATE_TOL: f64 = 1e-3;
pub const PQ0_VALIDATE_TOL: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("sweep point {index} ({path} = {value}): {source}")]
    Model {
        index: usize,
        path: String,
        value: f64,
        #[source]
        source: ModelError,
    },
    #[error("sweep point {index} ({path} = {value}): {source}")]
    Analytic {
        index: usize,
        path: String,
        value: f64,
        #[source]
        source: AnalyticError,
    },
    #[error("sweep point {index} ({path} = {value}): {source}")]
    Propagator {
        index: usize,
        path: String,
        value: f64,
        #[source]
        source: PropagatorError,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One output row. Fields are `None` when the mode does not produce them.
#[derive(Debug, Clone, Default)]
pub struct PointResult {
    pub sweep_value: f64,
    pub p00_analytic: Option<f64>,
    pub p00_numeric: Option<f64>,
    pub p10: Option<f64>,
    pub p20: Option<f64>,
    pub p10_numeric: Option<f64>,
    pub p20_numeric: Option<f64>,
    pub pq0_avg: Option<f64>,
    pub pq0_avg_numeric: Option<f64>,
    pub err_estimate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ValidationCheck {
    pub sweep_value: f64,
    pub quantity: &'static str,
    pub analytic: f64,
    pub numeric: f64,
    pub delta: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationSummary {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub columns: Vec<&'static str>,
    pub rows: Vec<PointResult>,
    pub validation: Option<ValidationSummary>,
}

/// Columns present for a given mode / initialization / band size.
pub fn columns_for(cfg: &RunConfig) -> Vec<&'static str> {
    let n2 = cfg.k.len() == 2;
    let band = matches!(cfg.init, InitSpec::Band(_));
    let mut cols = vec!["sweep_value"];
    match cfg.mode {
        Mode::Analytic => {
            cols.push("p00_analytic");
            if n2 {
                cols.extend(["p10", "p20"]);
            }
            if band {
                cols.push("pq0_avg");
            }
        }
        Mode::Numeric => {
            if !band {
                cols.push("p00_numeric");
            }
            if band {
                cols.push("pq0_avg_numeric");
            }
            cols.push("err_estimate");
        }
        Mode::Validate => {
            cols.extend(["p00_analytic", "p00_numeric"]);
            if n2 {
                cols.extend(["p10", "p20", "p10_numeric", "p20_numeric"]);
            }
            if band {
                cols.extend(["pq0_avg", "pq0_avg_numeric"]);
            }
            cols.push("err_estimate");
        }
    }
    cols
}

impl PointResult {
    pub fn get(&self, column: &str) -> Option<f64> {
        match column {
            "sweep_value" => Some(self.sweep_value),
            "p00_analytic" => self.p00_analytic,
            "p00_numeric" => self.p00_numeric,
            "p10" => self.p10,
            "p20" => self.p20,
            "p10_numeric" => self.p10_numeric,
            "p20_numeric" => self.p20_numeric,
            "pq0_avg" => self.pq0_avg,
            "pq0_avg_numeric" => self.pq0_avg_numeric,
            "err_estimate" => self.err_estimate,
            _ => None,
        }
    }
}

/// Materializes the model parameters at one sweep value.
fn params_at(cfg: &RunConfig, value: f64) -> Result<ModelParams, ModelError> {
    let mut beta = cfg.beta;
    let mut k = cfg.k.clone();
    let mut g = cfg.g.clone();
    if let Some(sweep) = &cfg.sweep {
        match sweep.path {
            SweepPath::Beta => beta = value,
            SweepPath::K(i) => k[i] = value,
            SweepPath::G(i) => g[i] = value,
            SweepPath::DeltaK => k[1] = k[0] + value,
        }
    }
    ModelParams::new(beta, k, g)
}

fn integrator_for(cfg: &RunConfig, params: &ModelParams) -> IntegratorConfig {
    let mut ic = IntegratorConfig::with_horizon(params, cfg.bt_horizon);
    ic.rel_tol = cfg.rel_tol;
    ic.abs_tol = cfg.abs_tol;
    ic.max_steps = cfg.max_steps;
    if let Some(t0) = cfg.tau0 {
        ic.tau0 = t0;
    }
    ic
}

fn eval_point(cfg: &RunConfig, index: usize, value: f64) -> Result<PointResult, RunError> {
    let path = cfg
        .sweep
        .as_ref()
        .map(|s| s.path.to_string())
        .unwrap_or_else(|| "-".into());
    let wrap_model = |source| RunError::Model {
        index,
        path: path.clone(),
        value,
        source,
    };
    let wrap_analytic = |source| RunError::Analytic {
        index,
        path: path.clone(),
        value,
        source,
    };
    let wrap_prop = |source| RunError::Propagator {
        index,
        path: path.clone(),
        value,
        source,
    };

    let params = params_at(cfg, value).map_err(wrap_model)?;
    let n2 = params.n_levels() == 2;
    let mut row = PointResult {
        sweep_value: value,
        ..Default::default()
    };
    let analytic_wanted = cfg.mode != Mode::Numeric;
    let numeric_wanted = cfg.mode != Mode::Analytic;

    if analytic_wanted {
        let roots = find_roots(&params).map_err(wrap_model)?;
        row.p00_analytic = Some(survival_probability(&params, &roots));
        if n2 && !params.has_degenerate_k() {
            let v = n2_probabilities(&params).map_err(wrap_analytic)?;
            row.p10 = Some(v.p10);
            row.p20 = Some(v.p20);
        }
        if let InitSpec::Band(q) = cfg.init {
            let bc = band_coefficients(&params, &roots, q).map_err(wrap_analytic)?;
            row.pq0_avg = Some(pq0_time_average(&bc, &params));
        }
    }

    if numeric_wanted {
        let ic = integrator_for(cfg, &params);
        let mut err: f64 = 0.0;
        if cfg.init == InitSpec::Level0 || cfg.mode == Mode::Validate {
            let c = converged_p00(&params, &ic).map_err(wrap_prop)?;
            row.p00_numeric = Some(c.p00);
            err = err.max(c.error);
        }
        if let InitSpec::Band(q) = cfg.init {
            let avg = time_averaged_population(&params, InitialCondition::Band { q }, 0, &ic)
                .map_err(wrap_prop)?;
            row.pq0_avg_numeric = Some(avg.mean);
            err = err.max(avg.std_dev / (avg.n_samples as f64).sqrt());
        }
        if n2 && cfg.mode == Mode::Validate {
            for (q, slot) in [(1usize, 0usize), (2, 1)] {
                // skip decoupled channels: the averaged population is 0
                let avg = if params.g()[q - 1] == 0.0 {
                    0.0
                } else {
                    let t = time_averaged_population(&params, InitialCondition::Band { q }, 0, &ic)
                        .map_err(wrap_prop)?;
                    err = err.max(t.std_dev / (t.n_samples as f64).sqrt());
                    t.mean
                };
                if slot == 0 {
                    row.p10_numeric = Some(avg);
                } else {
                    row.p20_numeric = Some(avg);
                }
            }
        }
        row.err_estimate = Some(err);
    }
    Ok(row)
}

/// Runs every sweep point (in parallel, honoring `LZC_THREADS`) and collects
/// rows in sweep order plus the validation table for `validate` mode.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let values: Vec<f64> = match &cfg.sweep {
        Some(s) => s.values(),
        None => vec![0.0],
    };

    let eval_all = || -> Result<Vec<PointResult>, RunError> {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| eval_point(cfg, i, v))
            .collect()
    };
    let rows = match thread_pool() {
        Some(pool) => pool.install(eval_all),
        None => eval_all(),
    }?;

    let validation = (cfg.mode == Mode::Validate).then(|| validate_rows(&rows));
    Ok(Outcome {
        columns: columns_for(cfg),
        rows,
        validation,
    })
}

fn validate_rows(rows: &[PointResult]) -> ValidationSummary {
    let mut checks = Vec::new();
    let mut push =
        |sweep_value: f64, quantity: &'static str, a: Option<f64>, n: Option<f64>, tol: f64| {
            if let (Some(a), Some(n)) = (a, n) {
                let delta = (a - n).abs();
                checks.push(ValidationCheck {
                    sweep_value,
                    quantity,
                    analytic: a,
                    numeric: n,
                    delta,
                    tol,
                    pass: delta <= tol,
                });
            }
        };
    for r in rows {
        push(
            r.sweep_value,
            "p00",
            r.p00_analytic,
            r.p00_numeric,
            P00_VALIDATE_TOL,
        );
        push(r.sweep_value, "p10", r.p10, r.p10_numeric, PQ0_VALIDATE_TOL);
        push(r.sweep_value, "p20", r.p20, r.p20_numeric, PQ0_VALIDATE_TOL);
        push(
            r.sweep_value,
            "pq0",
            r.pq0_avg,
            r.pq0_avg_numeric,
            PQ0_VALIDATE_TOL,
        );
    }
    ValidationSummary { checks }
}

/// A dedicated pool when `LZC_THREADS` caps parallelism.
fn thread_pool() -> Option<rayon::ThreadPool> {
    let n = std::env::var("LZC_THREADS").ok()?.parse::<usize>().ok()?;
    if n == 0 {
        return None;
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()
}
