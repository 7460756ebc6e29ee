//! Executes one configured command inside its own run directory.

use std::fs;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use khessian_core::acceptance::{self, CriterionOutcome};
use khessian_core::branch::{continue_branch_with, ContinuationOptions};
use khessian_core::export::{self, write_json};
use khessian_core::greens::nonexistence_threshold;
use khessian_core::phaseplane::{self, nonexistence_certificate_with, ManifoldTrace};
use khessian_core::shoot::{self, ShootOptions};
use khessian_core::Error as SolverError;

use crate::config::{Command, ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    NotConverged(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::NotConverged(_) => 2,
            RunError::Solver(e) if is_non_convergence(e) => 2,
            _ => 1,
        }
    }
}

fn is_non_convergence(e: &SolverError) -> bool {
    matches!(
        e,
        SolverError::NoConvergence(_)
            | SolverError::MaxIterations { .. }
            | SolverError::IterationOrder { .. }
            | SolverError::SingularJacobian { .. }
            | SolverError::StepUnderflow { .. }
            | SolverError::StepLimit { .. }
    )
}

#[derive(Debug, Serialize)]
struct Versions {
    khessian: &'static str,
}

#[derive(Debug, Serialize)]
struct Tolerances {
    tol: f64,
    truncation_t: f64,
    grid_nodes: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    command: Command,
    config_digest: String,
    config: RunConfig,
    versions: Versions,
    started_unix_seconds: u64,
    wall_time_seconds: f64,
    threads: usize,
    tolerances: Tolerances,
    artifacts: Vec<String>,
    exit_code: i32,
    message: Option<String>,
}

/// Successful command output: artifacts written and an optional exit
/// status other than 0 (the verification table with failures).
struct Outcome {
    artifacts: Vec<String>,
    exit_code: i32,
    message: Option<String>,
}

impl Outcome {
    fn ok(artifacts: Vec<String>) -> Self {
        Self { artifacts, exit_code: 0, message: None }
    }
}

struct RunDir {
    path: PathBuf,
}

impl RunDir {
    fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T, names: &mut Vec<String>) -> Result<(), RunError> {
        write_json(&self.file(name), value)?;
        names.push(name.to_string());
        Ok(())
    }

    fn csv(
        &self,
        name: &str,
        names: &mut Vec<String>,
        body: impl FnOnce(fs::File) -> khessian_core::Result<()>,
    ) -> Result<(), RunError> {
        let path = self.file(name);
        let file = fs::File::create(&path).map_err(|source| RunError::Io { path, source })?;
        body(file)?;
        names.push(name.to_string());
        Ok(())
    }
}

/// Result of [`run`]: the run directory (when created) and the exit status.
pub struct Report {
    pub directory: Option<PathBuf>,
    pub exit_code: i32,
    pub lines: Vec<String>,
}

pub fn run(config: &RunConfig) -> Result<Report, RunError> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let digest = config.digest();
    let path = config.output.directory.join(format!("{}-{}", config.command, &digest[..16]));
    fs::create_dir_all(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
    let dir = RunDir { path };

    let mut lines = Vec::new();
    let result = execute(config, &dir, &mut lines);
    let (outcome, failure) = match result {
        Ok(outcome) => (outcome, None),
        Err(e) => (Outcome { artifacts: Vec::new(), exit_code: e.exit_code(), message: Some(e.to_string()) }, Some(e)),
    };
    let manifest = Manifest {
        command: config.command,
        config_digest: digest,
        config: config.clone(),
        versions: Versions { khessian: env!("CARGO_PKG_VERSION") },
        started_unix_seconds: started_unix,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        tolerances: Tolerances {
            tol: config.numeric.tol,
            truncation_t: config.numeric.t_end,
            grid_nodes: config.numeric.grid_nodes,
        },
        artifacts: outcome.artifacts,
        exit_code: outcome.exit_code,
        message: outcome.message,
    };
    write_json(&dir.file("manifest.json"), &manifest)?;
    match failure {
        // usage problems surface as errors; solver trouble is recorded and reported by exit code
        Some(e) if e.exit_code() == 1 => Err(e),
        Some(e) => {
            lines.push(format!("error: {e}"));
            Ok(Report { directory: Some(dir.path), exit_code: manifest.exit_code, lines })
        }
        None => Ok(Report { directory: Some(dir.path), exit_code: manifest.exit_code, lines }),
    }
}

fn execute(config: &RunConfig, dir: &RunDir, lines: &mut Vec<String>) -> Result<Outcome, RunError> {
    match config.command {
        Command::Solve => solve(config, dir, lines),
        Command::Portrait => portrait(config, dir, lines),
        Command::Manifold => manifold(config, dir, lines),
        Command::Scan => scan(config, dir, lines),
        Command::Branch => branch(config, dir, lines),
        Command::Threshold => threshold(config, dir, lines),
        Command::Verify => verify(config, dir, lines),
    }
}

fn window(config: &RunConfig) -> (f64, f64) {
    (config.numeric.s_window[0], config.numeric.s_window[1])
}

#[derive(Serialize)]
struct RootSummary {
    s: f64,
    residual: f64,
    boundary_residual: f64,
    weighted_tail: f64,
    sup_norm: f64,
    profile: Option<String>,
}

fn solve(config: &RunConfig, dir: &RunDir, lines: &mut Vec<String>) -> Result<Outcome, RunError> {
    let spec = config.problem()?;
    let n = &config.numeric;
    let opts = ShootOptions { polish_tol: n.tol, profile_nodes: n.grid_nodes, ..ShootOptions::default() };
    let result = shoot::solve_with(&spec, n.t_end, window(config), n.samples, &opts)?;
    let mut names = Vec::new();
    let mut summary = Vec::new();
    for (i, root) in result.roots.iter().enumerate() {
        let profile = if config.output.csv() {
            let name = format!("profile_{i}.csv");
            dir.csv(&name, &mut names, |f| export::write_profile(f, &root.profile))?;
            Some(name)
        } else {
            None
        };
        lines.push(format!("root s = {} (matching residual {:.2e}, sup |z| {:.6e})", root.s, root.residual, root.profile.sup_norm()));
        summary.push(RootSummary {
            s: root.s,
            residual: root.residual,
            boundary_residual: root.boundary_residual,
            weighted_tail: root.weighted_tail,
            sup_norm: root.profile.sup_norm(),
            profile,
        });
    }
    if config.output.json() {
        #[derive(Serialize)]
        struct Roots<'a> {
            truncation_t: f64,
            roots: &'a [RootSummary],
            rejected: &'a [shoot::RejectedBracket],
        }
        dir.json("roots.json", &Roots { truncation_t: result.truncation_t, roots: &summary, rejected: &result.rejected }, &mut names)?;
    }
    if result.roots.is_empty() {
        return Err(RunError::NotConverged(format!(
            "no root of the shooting mismatch on [{}, {}] ({} brackets rejected)",
            n.s_window[0],
            n.s_window[1],
            result.rejected.len()
        )));
    }
    Ok(Outcome::ok(names))
}

#[derive(Serialize)]
struct TraceSummary {
    branch: &'static str,
    offset: f64,
    seed: [f64; 2],
    verdict: phaseplane::Verdict,
    verdict_stable: Option<bool>,
    terminal: &'static str,
    crossings: usize,
    orbit: Option<String>,
}

fn trace_summary(trace: &ManifoldTrace, orbit: Option<String>) -> TraceSummary {
    TraceSummary {
        branch: trace.branch.name(),
        offset: trace.offset,
        seed: trace.seed,
        verdict: trace.verdict,
        verdict_stable: trace.verdict_stable,
        terminal: trace.trajectory.terminal.label(),
        crossings: trace.crossings.len(),
        orbit,
    }
}

fn write_orbit(config: &RunConfig, dir: &RunDir, trace: &ManifoldTrace, names: &mut Vec<String>) -> Result<Option<String>, RunError> {
    if !config.output.csv() {
        return Ok(None);
    }
    let name = format!("orbit_{}.csv", trace.branch.name());
    dir.csv(&name, names, |f| export::write_trajectory(f, &trace.trajectory))?;
    Ok(Some(name))
}

fn portrait(config: &RunConfig, dir: &RunDir, lines: &mut Vec<String>) -> Result<Outcome, RunError> {
    let spec = config.problem()?;
    let portrait = phaseplane::portrait(&spec, config.numeric.horizon)?;
    let mut names = Vec::new();
    let mut traces = Vec::new();
    for trace in &portrait.traces {
        let orbit = write_orbit(config, dir, trace, &mut names)?;
        lines.push(format!("{}: {:?}", trace.branch.name(), trace.verdict));
        traces.push(trace_summary(trace, orbit));
    }
    for eq in &portrait.equilibria {
        lines.push(format!("equilibrium ({}, {}): {:?}", eq.point[0], eq.point[1], eq.classification));
    }
    if config.output.json() {
        dir.json("equilibria.json", &export::equilibrium_records(&portrait.equilibria), &mut names)?;
        dir.json("manifolds.json", &traces, &mut names)?;
    }
    Ok(Outcome::ok(names))
}

fn manifold(config: &RunConfig, dir: &RunDir, lines: &mut Vec<String>) -> Result<Outcome, RunError> {
    let spec = config.problem()?;
    let certificate = nonexistence_certificate_with(&spec, config.numeric.horizon)?;
    let origin = phaseplane::equilibria(&spec)?.into_iter().find(|e| e.is_origin()).expect("origin is an equilibrium");
    let mut names = Vec::new();
    let mut traces = Vec::new();
    for branch in [phaseplane::ManifoldBranch::StableLeft, phaseplane::ManifoldBranch::StableRight] {
        let trace = phaseplane::trace_manifold(&origin, branch, &spec, config.numeric.horizon)?;
        let orbit = write_orbit(config, dir, &trace, &mut names)?;
        traces.push(trace_summary(&trace, orbit));
    }
    for c in &certificate.crossings {
        lines.push(format!("{} crosses the {} set at t = {} ({}, {})", c.branch.name(), c.boundary, c.t, c.state[0], c.state[1]));
    }
    lines.push(format!("certified: {} ({} crossings)", certificate.certified, certificate.crossings.len()));
    if config.output.json() {
        dir.json("certificate.json", &certificate, &mut names)?;
        dir.json("manifolds.json", &traces, &mut names)?;
    }
    Ok(Outcome::ok(names))
}

fn scan(config: &RunConfig, dir: &RunDir, lines: &mut Vec<String>) -> Result<Outcome, RunError> {
    let spec = config.problem()?;
    let n = &config.numeric;
    let samples = shoot::scan(&spec, n.t_end, window(config), n.samples, n.tol)?;
    let changes = shoot::sign_changes(&samples);
    let brackets: Vec<(f64, f64)> = changes.iter().filter(|c| !c.pole).map(|c| (c.lo, c.hi)).collect();
    let poles: Vec<(f64, f64)> = changes.iter().filter(|c| c.pole).map(|c| (c.lo, c.hi)).collect();
    lines.push(format!("{} samples, brackets {brackets:?}, poles {poles:?}", samples.len()));
    let mut names = Vec::new();
    if config.output.csv() {
        dir.csv("scan.csv", &mut names, |f| export::write_scan(f, &samples))?;
    }
    if config.output.json() {
        #[derive(Serialize)]
        struct ScanSummary<'a> {
            samples: usize,
            sign_changes: &'a [shoot::SignChange],
        }
        dir.json("scan.json", &ScanSummary { samples: samples.len(), sign_changes: &changes }, &mut names)?;
    }
    Ok(Outcome::ok(names))
}

fn branch(config: &RunConfig, dir: &RunDir, lines: &mut Vec<String>) -> Result<Outcome, RunError> {
    let spec = config.problem()?;
    let n = &config.numeric;
    let opts = ContinuationOptions { t_end: n.t_end, nodes: n.grid_nodes, ..ContinuationOptions::default() };
    let run = continue_branch_with(&spec, n.lambda_step, n.lambda_max, &opts)?;
    let mut names = Vec::new();
    if config.output.csv() {
        dir.csv("branch.csv", &mut names, |f| export::write_branch(f, &run.points))?;
    }
    match &run.fold {
        Some(fold) => lines.push(format!("fold at lambda* = {} (bound {:?})", fold.lambda_star, fold.lambda_bar)),
        None => lines.push(format!("{} points, no fold up to lambda = {}", run.points.len(), n.lambda_max)),
    }
    if config.output.json() {
        #[derive(Serialize)]
        struct BranchSummary<'a> {
            points: usize,
            last_lambda: Option<f64>,
            fold: &'a Option<khessian_core::branch::FoldReport>,
        }
        let summary = BranchSummary { points: run.points.len(), last_lambda: run.points.last().map(|p| p.lambda), fold: &run.fold };
        dir.json("branch.json", &summary, &mut names)?;
    }
    Ok(Outcome::ok(names))
}

fn threshold(config: &RunConfig, dir: &RunDir, lines: &mut Vec<String>) -> Result<Outcome, RunError> {
    let spec = config.problem()?;
    let report = nonexistence_threshold(&spec.datum, spec.dim, spec.boundary)?;
    lines.push(format!(
        "lambda_bar = {} (C1 = {}, C2 = {}, error estimate {:.1e})",
        report.lambda_bar, report.c1, report.c2, report.quadrature_error_estimate
    ));
    let mut names = Vec::new();
    // the report is small; it is always written
    dir.json("threshold.json", &report, &mut names)?;
    Ok(Outcome::ok(names))
}

fn verify(config: &RunConfig, dir: &RunDir, lines: &mut Vec<String>) -> Result<Outcome, RunError> {
    let outcomes: Vec<CriterionOutcome> = acceptance::ALL.par_iter().map(|c| c()).collect();
    lines.extend(outcomes.iter().map(CriterionOutcome::line));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    lines.push(format!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len()));
    let mut names = Vec::new();
    if config.output.json() {
        dir.json("verify.json", &outcomes, &mut names)?;
    }
    let mut outcome = Outcome::ok(names);
    if failed > 0 {
        outcome.exit_code = 2;
        outcome.message = Some(format!("{failed} criteria failed"));
    }
    Ok(outcome)
}
