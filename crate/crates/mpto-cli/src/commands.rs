//! The `run`, `verify` and `gain` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpto::frontend::Pipeline;
use mpto::optimizer::{optimize, MmaSettings, OptimizeOptions, OptimizeResult};
use mpto::perf::{gain_problem1, gain_problem2, log_space, measure_runtime_gain, GainRow, GAIN_CSV_HEADER};
use mpto::problems::{build_problem1, build_problem2, Problem};
use mpto::sensitivity::{fd_verify, FD_STEP};

use crate::config::{GainConfig, ProblemChoice, RunConfig};
use crate::error::CliError;
use crate::output::*;

/// Overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "MPTO_OUTPUT_DIR";

/// Largest grid dimension used by `verify`.
pub const VERIFY_MAX_EL: usize = 10;
/// Largest relative gradient error accepted by `verify`.
pub const VERIFY_TOL: f64 = 1e-4;

/// Command line flag, then environment, then config.
pub fn resolve_output_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output_dir.clone(),
    }
}

pub fn build_problem(cfg: &RunConfig, nelx: usize, nely: usize) -> Result<Problem, CliError> {
    cfg.validate()?;
    let p = match cfg.problem {
        ProblemChoice::Problem1 => build_problem1(nelx, nely, cfg.ports, cfg.vbar, cfg.seed),
        ProblemChoice::Problem2 => {
            let x = cfg.jbar.len();
            let flat: Vec<f64> = cfg.jbar.iter().flatten().copied().collect();
            build_problem2(nelx, nely, DMatrix::from_row_slice(x, x, &flat))
        }
    };
    p.map_err(|e| match e {
        mpto::Error::Invalid(m) => CliError::Validation(m),
        other => CliError::Solver(other),
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[derive(Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub results: Vec<(Pipeline, OptimizeResult)>,
    pub summary: Summary,
}

/// Optimizes with every selected pipeline and writes all artifacts.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    let problem = build_problem(cfg, cfg.nelx, cfg.nely)?;
    create_dir(out)?;
    write_file(&out.join(CONFIG_FILE), &cfg.to_text())?;
    let mut settings = MmaSettings::for_problem(&problem);
    if let Some(m) = cfg.move_limit {
        settings.move_limit = m;
    }
    let opts = OptimizeOptions { max_iters: cfg.max_iters, tol: cfg.tol, backend: cfg.backend, settings, ..Default::default() };
    let names = problem.response_names();
    let mut log = log_header(&names);
    let mut timings = TIMINGS_HEADER.to_string();
    let mut results = Vec::new();
    for pipeline in cfg.pipeline.pipelines() {
        let res = optimize(&problem, pipeline, &opts, |rec| {
            log.push_str(&log_line(pipeline, rec));
            timings.push_str(&timing_line(pipeline, rec));
        })?;
        results.push((pipeline, res));
    }
    write_file(&out.join(LOG_FILE), &log)?;
    write_file(&out.join(TIMINGS_FILE), &timings)?;

    let (_, last) = results.last().expect("at least one pipeline");
    let xt = problem.design(&last.x)?.filtered().to_vec();
    write_file(&out.join(PGM_FILE), &pgm(cfg.problem, cfg.nelx, cfg.nely, &xt))?;
    write_file(&out.join(CSV_FILE), &density_csv(cfg.nelx, cfg.nely, &xt))?;

    let mut s = Summary::default();
    s.push("problem", cfg.problem);
    s.push("nelx", cfg.nelx);
    s.push("nely", cfg.nely);
    s.push("pipeline", cfg.pipeline);
    s.push("backend", cfg.backend);
    s.push("threads", cfg.threads);
    s.push("seed", cfg.seed);
    s.push("move_limit", opts.settings.move_limit);
    for (p, r) in &results {
        s.push(format!("{p}.iterations"), r.history.len());
        s.push(format!("{p}.converged"), r.converged);
        for (n, v) in names.iter().zip(&r.final_values) {
            s.push(format!("{p}.{n}"), format!("{v:e}"));
        }
        s.push(format!("{p}.large_factorizations"), r.ledger.large_factorizations);
        s.push(format!("{p}.large_solves"), r.ledger.large_solves);
        s.push(format!("{p}.dense_factorizations"), r.ledger.dense_factorizations);
        s.push(format!("{p}.dense_solves"), r.ledger.dense_solves);
    }
    if let [(_, a), (_, b)] = results.as_slice() {
        let diff = a
            .history
            .iter()
            .zip(&b.history)
            .map(|(p, q)| ((p.values[0] - q.values[0]) / p.values[0].abs().max(f64::MIN_POSITIVE)).abs())
            .fold(0.0f64, f64::max);
        s.push("max_rel_objective_diff", format!("{diff:e}"));
    }
    write_file(&out.join(SUMMARY_FILE), &s.to_text())?;
    Ok(RunReport { output_dir: out.to_path_buf(), results, summary: s })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyRow {
    pub pipeline: Pipeline,
    pub response: String,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub nelx: usize,
    pub nely: usize,
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.max_rel_error <= VERIFY_TOL)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("grid {}x{}, tolerance {VERIFY_TOL:e}\n", self.nelx, self.nely);
        for r in &self.rows {
            let status = if r.max_rel_error <= VERIFY_TOL { "ok" } else { "FAIL" };
            s.push_str(&format!("{}\t{}\t{:.3e}\t{status}\n", r.pipeline, r.response, r.max_rel_error));
        }
        s
    }
}

/// Central-difference check of every response gradient in both pipelines.
///
/// `tamper` scales the analytic gradients by 1.01 and must make the check fail.
pub fn cmd_verify(cfg: &RunConfig, tamper: bool) -> Result<VerifyReport, CliError> {
    let (nelx, nely) = (cfg.nelx.min(VERIFY_MAX_EL), cfg.nely.min(VERIFY_MAX_EL));
    let problem = build_problem(cfg, nelx, nely)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x: Vec<f64> = (0..problem.n_elements()).map(|_| rng.random_range(0.2..0.9)).collect();
    let names = problem.response_names();
    let mut rows = Vec::new();
    for pipeline in [Pipeline::Elementary, Pipeline::Condensed] {
        let ev = problem.evaluate(pipeline, cfg.backend, &x, true)?;
        for (r, name) in names.iter().enumerate() {
            let mut grad = ev.gradients[r].clone();
            if tamper {
                grad.iter_mut().for_each(|g| *g *= 1.01);
            }
            let err = fd_verify(
                |xp| Ok(problem.evaluate(pipeline, cfg.backend, xp, false)?.values[r]),
                &x,
                &grad,
                FD_STEP,
            )?;
            rows.push(VerifyRow { pipeline, response: name.clone(), max_rel_error: err });
        }
    }
    Ok(VerifyReport { nelx, nely, rows })
}

/// Predicted gains over the sweep plus measured gains where configured.
pub fn gain_rows(cfg: &RunConfig) -> Result<Vec<GainRow>, CliError> {
    cfg.validate()?;
    let g = cfg.gain.clone().unwrap_or_default();
    let mut rows = Vec::new();
    for &n in &g.n {
        for m in sweep_m(cfg.problem, &g) {
            if m >= n {
                continue;
            }
            for &model in &g.models {
                let xi = match cfg.problem {
                    ProblemChoice::Problem1 => gain_problem1(model, n, m),
                    ProblemChoice::Problem2 => gain_problem2(model, n, m as usize)?,
                };
                rows.push(GainRow { n, m, model, xi_beta: xi, xi_t: None });
            }
        }
    }
    if cfg.problem == ProblemChoice::Problem1 {
        for &n in &g.n {
            // square conduction grids have (nel + 1)² DOFs
            let side = n.sqrt().round();
            if n > g.measure_max_n || side * side != n || side < 2.0 {
                continue;
            }
            let nel = side as usize - 1;
            for &m in &g.measure_m {
                let p = build_problem1(nel, nel, m, cfg.vbar, cfg.seed).map_err(|e| CliError::Validation(e.to_string()))?;
                let t = measure_runtime_gain(&p, cfg.backend, g.repeats)?;
                let xi = gain_problem1(cfg.backend, n, m as f64);
                rows.push(GainRow { n, m: m as f64, model: cfg.backend, xi_beta: xi, xi_t: Some(t.xi_t) });
            }
        }
    }
    Ok(rows)
}

fn sweep_m(problem: ProblemChoice, g: &GainConfig) -> Vec<f64> {
    let ms = log_space(g.m_min, g.m_max, g.m_points);
    match problem {
        ProblemChoice::Problem1 => ms,
        ProblemChoice::Problem2 => {
            let mut even: Vec<f64> = ms.iter().map(|m| (2.0 * (m / 2.0).round()).max(2.0)).collect();
            even.dedup();
            even
        }
    }
}

pub fn gain_csv(rows: &[GainRow]) -> String {
    let mut s = format!("{GAIN_CSV_HEADER}\n");
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

/// Writes the gain table and returns its path.
pub fn cmd_gain(cfg: &RunConfig, out: &Path) -> Result<(PathBuf, Vec<GainRow>), CliError> {
    let rows = gain_rows(cfg)?;
    create_dir(out)?;
    let path = out.join(GAIN_FILE);
    write_file(&path, &gain_csv(&rows))?;
    Ok((path, rows))
}
