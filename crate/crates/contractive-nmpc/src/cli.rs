//! Batch front-end: JSON experiment configs, the four commands
//! (`simulate`, `verify`, `compare`, `check`), CSV trajectory logs and
//! versioned JSON summaries.
//!
//! Every resolved value (auto penalty weight, auto initial budget, solver
//! defaults) is echoed into the summary so a run can be reproduced from its
//! artifacts alone. With a fixed seed both the CSV and the JSON artifacts
//! are byte-identical across repeated runs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contraction::{verify_contraction, ContractionReport, ContractionSpec};
use crate::controller::{
    run_diagnostics, simulate, DiagnosticReport, Mode, SimLog, StepRecord, Termination,
};
use crate::error::{Error, Result};
use crate::model::{norm, DoubleIntegratorParams, Model, NonholonomicParams};
use crate::objective::{alpha_min, l_bar_nonholonomic, PenaltyConfig, StageCost, StageCostKind};
use crate::solver::SolverConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Model selection and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Nonholonomic { rho: f64, b: f64, mu: f64 },
    DoubleIntegrator { tau: f64, u_max: f64, r_max: f64 },
}

/// Stage-cost selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostConfig {
    L1,
    L2,
    Custom {
        state_weights: Vec<f64>,
        control_weights: Vec<f64>,
        l_bar: f64,
    },
}

/// Contraction triple; omitted entries fall back to model defaults
/// (`gamma = 1 - mu`, `horizon = 3` for the nonholonomic system).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecSection {
    pub gamma: Option<f64>,
    pub horizon: Option<usize>,
}

/// Either the literal string `"auto"` or an explicit value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Auto(AutoTag),
    Value(T),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

impl<T> Default for AutoOr<T> {
    fn default() -> Self {
        AutoOr::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySection {
    /// `"auto"` resolves to `2 N l_bar / (1 - gamma)` before any solve.
    pub alpha: AutoOr<f64>,
    pub beta: f64,
    /// `"auto"` resolves to `W(x0)`.
    pub z0: AutoOr<f64>,
}

impl Default for PenaltySection {
    fn default() -> Self {
        Self {
            alpha: AutoOr::default(),
            beta: 0.5,
            z0: AutoOr::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub restarts: Option<usize>,
    pub samples_per_iter: Option<usize>,
    pub max_iters: Option<usize>,
    pub elite_frac: Option<f64>,
    pub init_std: Option<Vec<f64>>,
    pub constraint_penalty: Option<f64>,
    pub tie_tol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub x0: Vec<f64>,
    pub max_steps: usize,
    pub stop_norm: f64,
    pub mode: Mode,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            x0: Vec::new(),
            max_steps: 1000,
            stop_norm: 1e-2,
            mode: Mode::TwoStage,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub csv_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

/// A complete experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub cost: CostConfig,
    #[serde(default)]
    pub spec: SpecSection,
    #[serde(default)]
    pub penalty: PenaltySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Everything the commands need, with `"auto"` entries resolved.
pub struct Resolved {
    pub model: Model,
    pub cost: StageCost,
    pub spec: ContractionSpec,
    pub penalty: PenaltyConfig,
    pub solver: SolverConfig,
    pub run: RunSection,
    pub echo: ResolvedEcho,
}

/// Resolved scalars echoed into every summary.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedEcho {
    pub model: ModelConfig,
    pub cost: StageCostKind,
    pub l_bar: f64,
    pub gamma: f64,
    pub horizon: usize,
    pub alpha: f64,
    pub beta: f64,
    pub z0: f64,
    pub mode: Mode,
    pub x0: Vec<f64>,
    pub max_steps: usize,
    pub stop_norm: f64,
    pub solver: SolverConfig,
}

fn build_model(cfg: &ModelConfig) -> Result<(Model, Option<NonholonomicParams>)> {
    match *cfg {
        ModelConfig::Nonholonomic { rho, b, mu } => {
            let p = NonholonomicParams::new(rho, b, mu)?;
            Ok((Model::nonholonomic(p)?, Some(p)))
        }
        ModelConfig::DoubleIntegrator { tau, u_max, r_max } => {
            let p = DoubleIntegratorParams::new(tau, u_max, r_max)?;
            Ok((Model::tightened_double_integrator(p)?, None))
        }
    }
}

fn resolve_spec(
    cfg: &ExperimentConfig,
    nh: Option<&NonholonomicParams>,
) -> Result<ContractionSpec> {
    let gamma = match (cfg.spec.gamma, nh) {
        (Some(g), _) => g,
        (None, Some(p)) => 1.0 - p.mu,
        (None, None) => {
            return Err(Error::Config(
                "spec.gamma is required for this model".into(),
            ))
        }
    };
    let horizon = match (cfg.spec.horizon, nh) {
        (Some(n), _) => n,
        (None, Some(_)) => 3,
        (None, None) => {
            return Err(Error::Config(
                "spec.horizon is required for this model".into(),
            ))
        }
    };
    ContractionSpec::norm_sq(gamma, horizon)
        .map_err(|e| Error::Config(format!("invalid contraction spec: {e}")))
}

fn resolve_cost(
    cfg: &CostConfig,
    model: &Model,
    nh: Option<&NonholonomicParams>,
) -> Result<StageCost> {
    match cfg {
        CostConfig::L1 => {
            let p = nh.ok_or_else(|| {
                Error::Config("cost l1 has an analytic bound for the nonholonomic model only; use a custom cost with an explicit l_bar".into())
            })?;
            Ok(StageCost::l1(l_bar_nonholonomic(StageCostKind::L1, p)))
        }
        CostConfig::L2 => {
            let p = nh.ok_or_else(|| {
                Error::Config("cost l2 has an analytic bound for the nonholonomic model only; use a custom cost with an explicit l_bar".into())
            })?;
            if model.state_dim() < 3 {
                return Err(Error::Config(
                    "cost l2 needs at least three state components".into(),
                ));
            }
            Ok(StageCost::l2(l_bar_nonholonomic(StageCostKind::L2, p)))
        }
        CostConfig::Custom {
            state_weights,
            control_weights,
            l_bar,
        } => {
            if state_weights.len() != model.state_dim()
                || control_weights.len() != model.control_dim()
            {
                return Err(Error::Config(
                    "custom cost weight lengths must match the model dimensions".into(),
                ));
            }
            if !(l_bar.is_finite() && *l_bar > 0.0) {
                return Err(Error::Config(
                    "custom cost requires a positive finite l_bar".into(),
                ));
            }
            StageCost::quadratic(state_weights.clone(), control_weights.clone(), *l_bar)
        }
    }
}

fn resolve_solver(cfg: &SolverSection, model: &Model) -> Result<SolverConfig> {
    let mut s = SolverConfig::for_model(model);
    if let Some(v) = cfg.restarts {
        s.restarts = v;
    }
    if let Some(v) = cfg.samples_per_iter {
        s.samples_per_iter = v;
    }
    if let Some(v) = cfg.max_iters {
        s.max_iters = v;
    }
    if let Some(v) = cfg.elite_frac {
        s.elite_frac = v;
    }
    if let Some(v) = &cfg.init_std {
        s.init_std = v.clone();
    }
    if let Some(v) = cfg.constraint_penalty {
        s.constraint_penalty = v;
    }
    if let Some(v) = cfg.tie_tol {
        s.tie_tol = v;
    }
    if let Some(v) = cfg.seed {
        s.seed = v;
    }
    s.validate(model)?;
    Ok(s)
}

/// Resolves a config for a closed-loop run, turning every `"auto"` into its
/// concrete value.
pub fn resolve(cfg: &ExperimentConfig) -> Result<Resolved> {
    let (model, nh) = build_model(&cfg.model)?;
    let spec = resolve_spec(cfg, nh.as_ref())?;
    let cost = resolve_cost(&cfg.cost, &model, nh.as_ref())?;
    let solver = resolve_solver(&cfg.solver, &model)?;

    let x0 = cfg.run.x0.clone();
    if x0.len() != model.state_dim() {
        return Err(Error::Config(format!(
            "run.x0 must have {} components, got {}",
            model.state_dim(),
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("run.x0 must be finite".into()));
    }

    let alpha = match cfg.penalty.alpha {
        AutoOr::Value(v) => v,
        AutoOr::Auto(_) => alpha_min(spec.horizon(), cost.l_bar, spec.gamma()),
    };
    let z0 = match cfg.penalty.z0 {
        AutoOr::Value(v) => v,
        AutoOr::Auto(_) => spec.w(&x0),
    };
    let penalty = PenaltyConfig::new(alpha, cfg.penalty.beta, z0)
        .map_err(|e| Error::Config(format!("invalid penalty section: {e}")))?;

    let echo = ResolvedEcho {
        model: cfg.model.clone(),
        cost: cost.kind(),
        l_bar: cost.l_bar,
        gamma: spec.gamma(),
        horizon: spec.horizon(),
        alpha: penalty.alpha,
        beta: penalty.beta,
        z0: penalty.z0,
        mode: cfg.run.mode,
        x0: x0.clone(),
        max_steps: cfg.run.max_steps,
        stop_norm: cfg.run.stop_norm,
        solver: solver.clone(),
    };
    Ok(Resolved {
        model,
        cost,
        spec,
        penalty,
        solver,
        run: cfg.run.clone(),
        echo,
    })
}

/// Model, contraction spec and solver only; enough for `verify`.
pub fn resolve_verify(cfg: &ExperimentConfig) -> Result<(Model, ContractionSpec, SolverConfig)> {
    let (model, nh) = build_model(&cfg.model)?;
    let spec = resolve_spec(cfg, nh.as_ref())?;
    let solver = resolve_solver(&cfg.solver, &model)?;
    Ok((model, spec, solver))
}

// ---------------------------------------------------------------------------
// CSV log format
// ---------------------------------------------------------------------------

fn csv_header(model: &Model) -> String {
    let mut cols = vec!["k".to_string()];
    cols.extend((1..=model.state_dim()).map(|i| format!("x{i}")));
    cols.extend((1..=model.control_dim()).map(|i| format!("u{i}")));
    for c in [
        "z",
        "w",
        "e",
        "j_star",
        "phi_star",
        "w_under_star",
        "q_star",
        "ell_star",
        "evals",
        "feasible",
    ] {
        cols.push(c.to_string());
    }
    cols.join(",")
}

/// Writes the per-step trajectory log. Floats use the shortest
/// round-trippable decimal representation, so reading the file back
/// recovers every value bit-exactly.
pub fn write_csv(path: &Path, model: &Model, log: &SimLog) -> Result<()> {
    let mut out = String::new();
    out.push_str(&csv_header(model));
    out.push('\n');
    for r in &log.records {
        let mut fields: Vec<String> = vec![r.k.to_string()];
        fields.extend(r.x.iter().map(|v| v.to_string()));
        fields.extend(r.u.iter().map(|v| v.to_string()));
        for v in [r.z, r.w, r.e, r.j_star, r.phi_star, r.w_under_star] {
            fields.push(v.to_string());
        }
        fields.push(r.q_star.to_string());
        fields.push(r.ell_star.to_string());
        fields.push(r.evals.to_string());
        fields.push(r.feasible.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a trajectory log written by [`write_csv`] for the same model.
pub fn read_csv(path: &Path, model: &Model) -> Result<Vec<StepRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::LogFormat("empty file".into()))?;
    let expected = csv_header(model);
    if header != expected {
        return Err(Error::LogFormat(format!(
            "header mismatch: expected '{expected}', got '{header}'"
        )));
    }
    let n = model.state_dim();
    let m = model.control_dim();
    let ncols = 1 + n + m + 10;
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != ncols {
            return Err(Error::LogFormat(format!(
                "line {}: expected {ncols} columns, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::LogFormat(format!("line {}: {e}", lineno + 2)))
        };
        let parse_u = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|e| Error::LogFormat(format!("line {}: {e}", lineno + 2)))
        };
        let mut it = fields.into_iter();
        let k = parse_u(it.next().unwrap())?;
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            x.push(parse_f(it.next().unwrap())?);
        }
        let mut u = Vec::with_capacity(m);
        for _ in 0..m {
            u.push(parse_f(it.next().unwrap())?);
        }
        let z = parse_f(it.next().unwrap())?;
        let w = parse_f(it.next().unwrap())?;
        let e = parse_f(it.next().unwrap())?;
        let j_star = parse_f(it.next().unwrap())?;
        let phi_star = parse_f(it.next().unwrap())?;
        let w_under_star = parse_f(it.next().unwrap())?;
        let q_star = parse_u(it.next().unwrap())?;
        let ell_star = parse_u(it.next().unwrap())?;
        let evals = it
            .next()
            .unwrap()
            .parse::<u64>()
            .map_err(|e| Error::LogFormat(format!("line {}: {e}", lineno + 2)))?;
        let feasible = match it.next().unwrap() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::LogFormat(format!(
                    "line {}: bad feasible flag '{other}'",
                    lineno + 2
                )))
            }
        };
        records.push(StepRecord {
            k,
            x,
            u,
            z,
            w,
            e,
            j_star,
            phi_star,
            w_under_star,
            q_star,
            ell_star,
            evals,
            feasible,
        });
    }
    Ok(records)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Summary written next to every simulation log.
#[derive(Debug, Serialize)]
pub struct SimSummary {
    pub schema: u32,
    pub terminated_reason: Termination,
    pub steps: usize,
    pub final_state: Vec<f64>,
    pub final_norm: f64,
    /// Strict increases of `W` along the trace; nonzero shows the
    /// characteristic non-monotone decrease.
    pub w_increases: usize,
    pub diagnostics_all_pass: bool,
    pub resolved: ResolvedEcho,
    pub diagnostics: DiagnosticReport,
}

pub struct SimulateOutcome {
    pub exit: i32,
    pub summary: SimSummary,
    pub log: SimLog,
}

/// Runs one closed-loop experiment, writing the CSV log and the JSON
/// summary. Exit 0 on convergence, 2 when the step budget ran out, 3 on an
/// infeasible solve; configuration problems surface as errors (exit 1).
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateOutcome> {
    let r = resolve(cfg)?;
    let csv_path = cfg
        .output
        .csv_path
        .as_ref()
        .ok_or_else(|| Error::Config("output.csv_path is required for simulate".into()))?;
    let summary_path = cfg
        .output
        .summary_path
        .as_ref()
        .ok_or_else(|| Error::Config("output.summary_path is required for simulate".into()))?;

    let log = simulate(
        &r.model,
        &r.cost,
        &r.spec,
        &r.penalty,
        &r.run.x0,
        r.run.max_steps,
        r.run.stop_norm,
        r.run.mode,
        &r.solver,
    )?;
    let diagnostics = run_diagnostics(&log.records, &r.penalty, &r.spec, &r.cost, &r.model);
    let summary = SimSummary {
        schema: SCHEMA_VERSION,
        terminated_reason: log.terminated,
        steps: log.records.len(),
        final_state: log.final_state.clone(),
        final_norm: norm(&log.final_state),
        w_increases: log.w_increases(&r.spec),
        diagnostics_all_pass: diagnostics.all_pass,
        resolved: r.echo,
        diagnostics,
    };
    write_csv(csv_path, &r.model, &log)?;
    write_json(summary_path, &summary)?;
    let exit = match log.terminated {
        Termination::Converged => 0,
        Termination::MaxSteps => 2,
        Termination::Infeasible => 3,
    };
    Ok(SimulateOutcome { exit, summary, log })
}

#[derive(Debug, Serialize)]
pub struct VerifySummary {
    pub schema: u32,
    pub model: ModelConfig,
    pub gamma: f64,
    pub horizon: usize,
    pub samples: usize,
    pub successes: usize,
    pub worst_ratio: f64,
    pub worst_state: Vec<f64>,
    pub seed: u64,
}

pub struct VerifyOutcome {
    pub exit: i32,
    pub summary: VerifySummary,
    pub report: ContractionReport,
}

/// Randomized certification of the contraction property. Exit 0 iff every
/// sampled state certified.
pub fn cmd_verify(cfg: &ExperimentConfig, samples: usize, seed: u64) -> Result<VerifyOutcome> {
    if samples == 0 {
        return Err(Error::Config("verify needs at least one sample".into()));
    }
    let (model, spec, solver) = resolve_verify(cfg)?;
    let report = verify_contraction(&model, &spec, &solver, samples, seed)?;
    let summary = VerifySummary {
        schema: SCHEMA_VERSION,
        model: cfg.model.clone(),
        gamma: spec.gamma(),
        horizon: spec.horizon(),
        samples: report.samples,
        successes: report.successes,
        worst_ratio: report.worst_ratio,
        worst_state: report.worst_state.clone(),
        seed: report.seed,
    };
    if let Some(path) = &cfg.output.summary_path {
        write_json(path, &summary)?;
    }
    let exit = if report.successes == report.samples {
        0
    } else {
        2
    };
    Ok(VerifyOutcome {
        exit,
        summary,
        report,
    })
}

#[derive(Debug, Serialize)]
pub struct CompareRun {
    pub csv_path: PathBuf,
    pub terminated_reason: Termination,
    pub steps: usize,
    /// Mean of `|x2 - x3|` over the visited states; absent for models with
    /// fewer than three state components.
    pub mean_gap: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct CompareSummary {
    pub schema: u32,
    pub metric: String,
    pub a: CompareRun,
    pub b: CompareRun,
}

pub struct CompareOutcome {
    pub exit: i32,
    pub summary: CompareSummary,
}

fn mean_gap(log: &SimLog) -> Option<f64> {
    if log.final_state.len() < 3 {
        return None;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for x in log
        .records
        .iter()
        .map(|r| &r.x)
        .chain(std::iter::once(&log.final_state))
    {
        total += (x[1] - x[2]).abs();
        count += 1;
    }
    Some(total / count as f64)
}

/// Runs two configs sharing a model and initial state, writing both CSV logs
/// plus a comparison summary. Exit 0 iff both runs converge.
pub fn cmd_compare(
    cfg_a: &ExperimentConfig,
    cfg_b: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<CompareOutcome> {
    if cfg_a.model != cfg_b.model {
        return Err(Error::Config(
            "compare requires identical model sections".into(),
        ));
    }
    if cfg_a.run.x0 != cfg_b.run.x0 {
        return Err(Error::Config(
            "compare requires identical initial states".into(),
        ));
    }
    let a = cmd_simulate(cfg_a)?;
    let b = cmd_simulate(cfg_b)?;
    let summary = CompareSummary {
        schema: SCHEMA_VERSION,
        metric: "mean_abs_x2_minus_x3".to_string(),
        a: CompareRun {
            csv_path: cfg_a.output.csv_path.clone().unwrap_or_default(),
            terminated_reason: a.log.terminated,
            steps: a.log.records.len(),
            mean_gap: mean_gap(&a.log),
        },
        b: CompareRun {
            csv_path: cfg_b.output.csv_path.clone().unwrap_or_default(),
            terminated_reason: b.log.terminated,
            steps: b.log.records.len(),
            mean_gap: mean_gap(&b.log),
        },
    };
    if let Some(path) = out {
        write_json(path, &summary)?;
    }
    let converged =
        a.log.terminated == Termination::Converged && b.log.terminated == Termination::Converged;
    Ok(CompareOutcome {
        exit: if converged { 0 } else { 2 },
        summary,
    })
}

#[derive(Debug, Serialize)]
pub struct CheckSummary {
    pub schema: u32,
    pub csv_path: PathBuf,
    pub report: DiagnosticReport,
}

pub struct CheckCmdOutcome {
    pub exit: i32,
    pub summary: CheckSummary,
}

/// Re-runs the diagnostic checker on a stored log. Exit 0 iff every
/// applicable check passes; format or config mismatches are errors (exit 1).
pub fn cmd_check(
    csv_path: &Path,
    cfg: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<CheckCmdOutcome> {
    let r = resolve(cfg)?;
    let records = read_csv(csv_path, &r.model)?;
    if records.is_empty() {
        return Err(Error::LogFormat("log holds no steps".into()));
    }
    if records[0].x != r.run.x0 {
        return Err(Error::LogFormat(format!(
            "log starts at {:?} but the config says {:?}",
            records[0].x, r.run.x0
        )));
    }
    let report = run_diagnostics(&records, &r.penalty, &r.spec, &r.cost, &r.model);
    let summary = CheckSummary {
        schema: SCHEMA_VERSION,
        csv_path: csv_path.to_path_buf(),
        report,
    };
    if let Some(path) = out {
        write_json(path, &summary)?;
    }
    let exit = if summary.report.all_pass { 0 } else { 2 };
    Ok(CheckCmdOutcome { exit, summary })
}
