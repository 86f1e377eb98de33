//! Scenario registry, config ingestion, run execution, and artifact
//! serialization.
//!
//! A scenario bundles a model, an initial state, a target state, a time
//! grid, and a shipped reference control. Three ship with the crate:
//!
//! * `transport_fig1` — right-shift transport on `(0, 30)`, `T = 9`,
//!   `r = 2`, `y0 = x·e^{-x}`, target `y_d = S(T)y0`; the zero control is
//!   admissible with `J(0) = 2.25` and the constrained optimum costs
//!   noticeably less.
//! * `heat_scalar` — Dirichlet heat on `(0, 1)` with scalar control,
//!   `y0 = sin(πx)`, target `λ·S(T)y0`; the control
//!   `v(t) = (λ-1)/(T+(λ-1)t)` attains it exactly.
//! * `heat_distributed` — Dirichlet heat with field control; the target is
//!   manufactured as `y_v(T)` from a shipped reference field, so it is
//!   attainable by construction.
//!
//! Config files are `key = value` lines with `#` comments; unknown keys are
//! rejected with their line number. Artifacts are plain CSV (full-precision
//! floats) plus a JSON report, and identical configs produce bit-identical
//! files.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::continuation::{check_admissible, solve_constrained, ContinuationConfig, StageRecord};
use crate::dynamics::{
    cost_j, endpoint_residual, solve_forward, step_semigroup, ControlSignal, TimeGrid, Trajectory,
};
use crate::error::{Error, Result};
use crate::feedback::{solve_feedback, FeedbackConfig};
use crate::penalty::{solve_penalized, PenaltyConfig};
use crate::space::{ControlSpace, ControlValue, Generator, Grid, StateVector, SystemModel};

/// Named scenario presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    TransportFig1,
    HeatScalar,
    HeatDistributed,
    Custom,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::TransportFig1 => "transport_fig1",
            ScenarioKind::HeatScalar => "heat_scalar",
            ScenarioKind::HeatDistributed => "heat_distributed",
            ScenarioKind::Custom => "custom",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "transport_fig1" => Some(ScenarioKind::TransportFig1),
            "heat_scalar" => Some(ScenarioKind::HeatScalar),
            "heat_distributed" => Some(ScenarioKind::HeatDistributed),
            "custom" => Some(ScenarioKind::Custom),
            _ => None,
        }
    }
}

/// Which solver a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// One penalized solve at `eps_start`.
    Penalized,
    /// Full ε-continuation to the endpoint-constrained optimum.
    Constrained,
    /// Fixed point of the commutative feedback formula.
    Feedback,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Penalized => "penalized",
            Mode::Constrained => "constrained",
            Mode::Feedback => "feedback",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "penalized" => Some(Mode::Penalized),
            "constrained" => Some(Mode::Constrained),
            "feedback" => Some(Mode::Feedback),
            _ => None,
        }
    }
}

/// Initial-state presets for custom scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialProfile {
    /// `x·e^{-x}`.
    XExpNegX,
    /// `sin(πx)` rescaled to the grid interval.
    SinPi,
    /// `4·s(1-s)` with `s` the normalized coordinate.
    Bump,
}

impl InitialProfile {
    fn from_name(s: &str) -> Option<Self> {
        match s {
            "x_exp_neg_x" => Some(InitialProfile::XExpNegX),
            "sin_pi" => Some(InitialProfile::SinPi),
            "bump" => Some(InitialProfile::Bump),
            _ => None,
        }
    }

    fn sample(&self, grid: Grid) -> StateVector {
        match self {
            InitialProfile::XExpNegX => StateVector::from_fn(grid, |x| x * (-x).exp()),
            InitialProfile::SinPi => StateVector::from_fn(grid, |x| {
                let s = (x - grid.x_min) / (grid.x_max - grid.x_min);
                (std::f64::consts::PI * s).sin()
            }),
            InitialProfile::Bump => StateVector::from_fn(grid, |x| {
                let s = (x - grid.x_min) / (grid.x_max - grid.x_min);
                4.0 * s * (1.0 - s)
            }),
        }
    }
}

/// How the target state is manufactured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSpec {
    /// `y_d = S(T)·y0`, attained exactly by the zero control.
    SemigroupOfInitial,
    /// `y_d = λ·S(T)·y0`, attained by `v(t) = (λ-1)/(T+(λ-1)t)`.
    ScaledSemigroup,
    /// `y_d = y_v(T)` for the scenario's shipped reference control.
    FromReferenceControl,
}

impl TargetSpec {
    fn from_name(s: &str) -> Option<Self> {
        match s {
            "semigroup_of_initial" => Some(TargetSpec::SemigroupOfInitial),
            "scaled_semigroup" => Some(TargetSpec::ScaledSemigroup),
            "from_reference_control" => Some(TargetSpec::FromReferenceControl),
            _ => None,
        }
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub mode: Mode,
    pub generator: Generator,
    pub control_space: ControlSpace,
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub r: f64,
    /// Target scaling for `scaled_semigroup`; must exceed 1.
    pub lambda: f64,
    pub y0_profile: InitialProfile,
    pub target: TargetSpec,
    pub eps_start: f64,
    pub decay_rho: f64,
    pub n_stages: usize,
    pub endpoint_tol: f64,
    pub fixed_point_tol: f64,
    pub max_iters: usize,
    pub relaxation_omega: f64,
    pub ball_radius: Option<f64>,
    pub out_dir: PathBuf,
    /// Seed echoed into reports; reserved for seeded probe tooling.
    pub seed: u64,
}

impl ScenarioConfig {
    /// Preset defaults for a scenario kind.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let base = ScenarioConfig {
            scenario: kind,
            mode: Mode::Constrained,
            generator: Generator::TransportRightShift,
            control_space: ControlSpace::Scalar,
            x_min: 0.0,
            x_max: 30.0,
            n_cells: 3000,
            horizon: 9.0,
            n_steps: 900,
            r: 2.0,
            lambda: 2.0,
            y0_profile: InitialProfile::XExpNegX,
            target: TargetSpec::SemigroupOfInitial,
            eps_start: 1.0,
            decay_rho: 0.3,
            n_stages: 12,
            endpoint_tol: 1e-3,
            fixed_point_tol: 1e-5,
            max_iters: 400,
            relaxation_omega: 0.5,
            ball_radius: None,
            out_dir: PathBuf::from("runs/out"),
            seed: 0,
        };
        match kind {
            ScenarioKind::TransportFig1 => base,
            ScenarioKind::HeatScalar => ScenarioConfig {
                mode: Mode::Feedback,
                generator: Generator::HeatDirichlet,
                x_max: 1.0,
                n_cells: 50,
                horizon: 1.0,
                n_steps: 1000,
                y0_profile: InitialProfile::SinPi,
                target: TargetSpec::ScaledSemigroup,
                fixed_point_tol: 1e-8,
                ..base
            },
            ScenarioKind::HeatDistributed => ScenarioConfig {
                mode: Mode::Constrained,
                generator: Generator::HeatDirichlet,
                control_space: ControlSpace::Distributed,
                x_max: 1.0,
                n_cells: 50,
                horizon: 0.2,
                n_steps: 200,
                y0_profile: InitialProfile::SinPi,
                target: TargetSpec::FromReferenceControl,
                fixed_point_tol: 1e-6,
                ..base
            },
            ScenarioKind::Custom => ScenarioConfig {
                generator: Generator::TransportRightShift,
                x_max: 1.0,
                n_cells: 100,
                horizon: 0.5,
                n_steps: 50,
                y0_profile: InitialProfile::Bump,
                ..base
            },
        }
    }

    fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let bad = |what: &str| Error::Parse {
            line,
            msg: format!("invalid value `{value}` for `{key}`: {what}"),
        };
        match key {
            "scenario" => {
                // Handled by the first pass of the parser; accept silently
                // so overrides can reuse this setter.
                self.scenario =
                    ScenarioKind::from_name(value).ok_or_else(|| bad("unknown scenario name"))?;
            }
            "mode" => self.mode = Mode::from_name(value).ok_or_else(|| bad("unknown mode"))?,
            "generator" => {
                self.generator = match value {
                    "transport" => Generator::TransportRightShift,
                    "heat" => Generator::HeatDirichlet,
                    _ => return Err(bad("expected `transport` or `heat`")),
                }
            }
            "control_space" => {
                self.control_space = match value {
                    "scalar" => ControlSpace::Scalar,
                    "distributed" => ControlSpace::Distributed,
                    _ => return Err(bad("expected `scalar` or `distributed`")),
                }
            }
            "y0" => {
                self.y0_profile =
                    InitialProfile::from_name(value).ok_or_else(|| bad("unknown profile"))?
            }
            "target" => {
                self.target = TargetSpec::from_name(value).ok_or_else(|| bad("unknown target"))?
            }
            "x_min" => self.x_min = parse_f64(value).ok_or_else(|| bad("not a number"))?,
            "x_max" => self.x_max = parse_f64(value).ok_or_else(|| bad("not a number"))?,
            "n_cells" => self.n_cells = parse_usize(value).ok_or_else(|| bad("not an integer"))?,
            "horizon_t" => self.horizon = parse_f64(value).ok_or_else(|| bad("not a number"))?,
            "n_steps" => self.n_steps = parse_usize(value).ok_or_else(|| bad("not an integer"))?,
            "r" => self.r = parse_f64(value).ok_or_else(|| bad("not a number"))?,
            "lambda" => self.lambda = parse_f64(value).ok_or_else(|| bad("not a number"))?,
            "eps_start" => self.eps_start = parse_f64(value).ok_or_else(|| bad("not a number"))?,
            "decay_rho" => self.decay_rho = parse_f64(value).ok_or_else(|| bad("not a number"))?,
            "n_stages" => {
                self.n_stages = parse_usize(value).ok_or_else(|| bad("not an integer"))?
            }
            "endpoint_tol" => {
                self.endpoint_tol = parse_f64(value).ok_or_else(|| bad("not a number"))?
            }
            "fixed_point_tol" => {
                self.fixed_point_tol = parse_f64(value).ok_or_else(|| bad("not a number"))?
            }
            "max_iters" => {
                self.max_iters = parse_usize(value).ok_or_else(|| bad("not an integer"))?
            }
            "relaxation_omega" => {
                self.relaxation_omega = parse_f64(value).ok_or_else(|| bad("not a number"))?
            }
            "ball_radius" => {
                self.ball_radius = Some(parse_f64(value).ok_or_else(|| bad("not a number"))?)
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse_usize(value).ok_or_else(|| bad("not an integer"))? as u64,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key `{key}`"),
                })
            }
        }
        Ok(())
    }

    /// Reject invalid or inconsistent settings, naming the field.
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(Error::Config(format!("r must be positive, got {}", self.r)));
        }
        if self.n_cells < 2 {
            return Err(Error::Config("n_cells must be at least 2".into()));
        }
        if !(self.x_max > self.x_min) {
            return Err(Error::Config("x_max must exceed x_min".into()));
        }
        if !(self.horizon > 0.0) || self.n_steps == 0 {
            return Err(Error::Config(
                "horizon_t and n_steps must be positive".into(),
            ));
        }
        if self.generator == Generator::TransportRightShift {
            let (dt, dx) = (self.dt(), self.dx());
            if ((dt - dx) / dx).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "transport uses exact-shift stepping, which requires dt = dx \
                     (dt = {dt}, dx = {dx}; adjust n_steps or n_cells)"
                )));
            }
        }
        if self.target == TargetSpec::ScaledSemigroup && !(self.lambda > 1.0) {
            return Err(Error::Config(format!(
                "lambda must exceed 1, got {}",
                self.lambda
            )));
        }
        if !(self.eps_start > 0.0) {
            return Err(Error::Config("eps_start must be positive".into()));
        }
        if !(self.decay_rho > 0.0 && self.decay_rho < 1.0) {
            return Err(Error::Config("decay_rho must lie in (0, 1)".into()));
        }
        if self.n_stages == 0 {
            return Err(Error::Config("n_stages must be at least 1".into()));
        }
        if !(self.endpoint_tol > 0.0) || !(self.fixed_point_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.relaxation_omega > 0.0 && self.relaxation_omega <= 1.0) {
            return Err(Error::Config("relaxation_omega must lie in (0, 1]".into()));
        }
        if let Some(m) = self.ball_radius {
            if !(m > 0.0) {
                return Err(Error::Config("ball_radius must be positive".into()));
            }
        }
        if self.mode == Mode::Feedback && self.control_space == ControlSpace::Distributed {
            return Err(Error::Config(
                "feedback mode requires scalar control".into(),
            ));
        }
        Ok(())
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_usize(s: &str) -> Option<usize> {
    s.parse::<usize>().ok()
}

/// Parse a `key = value` config file into a validated [`ScenarioConfig`].
///
/// The `scenario` key selects the defaults; every other key overrides one
/// field. Unknown keys and malformed lines are rejected with their line
/// number.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            });
        };
        entries.push((line, key.trim().to_string(), value.trim().to_string()));
    }

    let Some(kind_entry) = entries.iter().find(|(_, k, _)| k == "scenario") else {
        return Err(Error::Parse {
            line: 0,
            msg: "missing required key `scenario`".into(),
        });
    };
    let kind = ScenarioKind::from_name(&kind_entry.2).ok_or_else(|| Error::Parse {
        line: kind_entry.0,
        msg: format!("unknown scenario `{}`", kind_entry.2),
    })?;

    let mut cfg = ScenarioConfig::defaults(kind);
    for (line, key, value) in &entries {
        if key == "scenario" {
            continue;
        }
        cfg.set(key, value, *line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Registry listing for `--list-scenarios`.
pub fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "transport_fig1",
            "transport on (0,30), T=9, r=2, shift target; J(0)=2.25 and the optimum roughly halves it",
        ),
        (
            "heat_scalar",
            "Dirichlet heat on (0,1), scalar control, target 2·S(T)y0; feedback mode preserves ∫v = ln 2",
        ),
        (
            "heat_distributed",
            "Dirichlet heat on (0,1), field control, target manufactured from a shipped reference control",
        ),
        (
            "custom",
            "explicit generator/control/grid/target settings from the config file",
        ),
    ]
}

/// Model, data, and reference control resolved from a config.
pub struct Problem {
    pub model: SystemModel,
    pub y0: StateVector,
    pub y_d: StateVector,
    pub tgrid: TimeGrid,
    pub reference_v: ControlSignal,
}

/// Resolve grids, states, and the shipped reference control.
pub fn build_problem(cfg: &ScenarioConfig) -> Result<Problem> {
    cfg.validate()?;
    let grid = Grid::new(cfg.x_min, cfg.x_max, cfg.n_cells)?;
    let model = SystemModel::new(cfg.generator, cfg.control_space, grid);
    let tgrid = TimeGrid::new(cfg.horizon, cfg.n_steps)?;

    let mut y0 = cfg.y0_profile.sample(grid);
    model.project_boundary(&mut y0.values);

    let reference_v = match (cfg.scenario, cfg.target) {
        (_, TargetSpec::ScaledSemigroup) => {
            let (lambda, t_final) = (cfg.lambda, cfg.horizon);
            ControlSignal::scalar_fn(tgrid, grid, move |t| {
                (lambda - 1.0) / (t_final + (lambda - 1.0) * t)
            })
        }
        (ScenarioKind::HeatDistributed, _) => ControlSignal::field_fn(tgrid, grid, |_, x| {
            let s = (x - grid.x_min) / (grid.x_max - grid.x_min);
            2.0 * s * (1.0 - s)
        }),
        _ => ControlSignal::zeros(tgrid, grid, cfg.control_space),
    };

    let y_d = match cfg.target {
        TargetSpec::SemigroupOfInitial => semigroup_endpoint(&model, &y0, &tgrid)?,
        TargetSpec::ScaledSemigroup => semigroup_endpoint(&model, &y0, &tgrid)?.scale(cfg.lambda),
        TargetSpec::FromReferenceControl => solve_forward(&model, &y0, &reference_v, &tgrid)?
            .last()
            .clone(),
    };

    Ok(Problem {
        model,
        y0,
        y_d,
        tgrid,
        reference_v,
    })
}

fn semigroup_endpoint(
    model: &SystemModel,
    y0: &StateVector,
    tgrid: &TimeGrid,
) -> Result<StateVector> {
    let mut s_t = y0.clone();
    model.project_boundary(&mut s_t.values);
    for _ in 0..tgrid.n_steps {
        s_t = step_semigroup(model, &s_t, tgrid.dt)?;
    }
    Ok(s_t)
}

/// Deterministic content of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: String,
    pub seed: u64,
    pub r: f64,
    /// Stage table; a single row for penalized mode, empty for feedback.
    pub stages: Vec<StageRecord>,
    pub attained: bool,
    pub target_not_attained: bool,
    pub converged: bool,
    pub iterations: usize,
    pub j_value: f64,
    /// Cost of the shipped reference control, when one exists.
    pub j_reference: Option<f64>,
    pub endpoint_gap: f64,
    pub control_l2_norm: f64,
    /// Mean of the control over `[0, T]` (scalar controls only).
    pub control_mean: Option<f64>,
}

/// In-memory summary of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: ScenarioKind,
    pub mode: Mode,
    pub j_value: f64,
    pub j_reference: Option<f64>,
    /// `J(v)/J(u*)` when a reference control exists.
    pub cost_ratio: Option<f64>,
    pub endpoint_gap: f64,
    pub converged: bool,
    pub wall_time_secs: f64,
}

/// Paths of the files a run produced, plus its summary.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub control_csv: PathBuf,
    pub trajectory_csv: PathBuf,
    pub target_csv: PathBuf,
    pub report_json: PathBuf,
    pub summary: RunSummary,
}

/// Execute the configured solver and write all artifacts into `out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunArtifacts> {
    let started = Instant::now();
    let problem = build_problem(cfg)?;
    let Problem {
        model,
        y0,
        y_d,
        tgrid,
        reference_v,
    } = &problem;

    let traj_v = solve_forward(model, y0, reference_v, tgrid)?;
    let j_reference = cost_j(reference_v, &traj_v, cfg.r).ok();

    let (u, traj, stages, attained, target_not_attained, converged, iterations) = match cfg.mode {
        Mode::Penalized => {
            let pcfg = penalty_config(cfg, cfg.eps_start);
            let u_init = ControlSignal::zeros(*tgrid, model.grid, cfg.control_space);
            let (u, traj, report) = solve_penalized(model, y0, y_d, &pcfg, &u_init)?;
            let stage = StageRecord {
                eps: cfg.eps_start,
                endpoint_gap: report.endpoint_gap,
                j_value: report.j_value,
                control_l2_norm: report.control_l2_norm,
                inner_iterations: report.iterations,
                converged: report.converged,
                control_delta: u.l2_norm(),
            };
            let attained = report.endpoint_gap <= cfg.endpoint_tol * (1.0 + y_d.norm());
            (
                u,
                traj,
                vec![stage],
                attained,
                false,
                report.converged,
                report.iterations,
            )
        }
        Mode::Constrained => {
            let ccfg = continuation_config(cfg);
            let (u, report) = solve_constrained(model, y0, y_d, tgrid, &ccfg)?;
            let traj = solve_forward(model, y0, &u, tgrid)?;
            // The continuation's own goal is the endpoint tolerance; inner
            // stages may stop on their iteration budget without harm.
            let converged = report.attained && !report.target_not_attained;
            let iterations = report.stages.iter().map(|s| s.inner_iterations).sum();
            (
                u,
                traj,
                report.stages,
                report.attained,
                report.target_not_attained,
                converged,
                iterations,
            )
        }
        Mode::Feedback => {
            if !check_admissible(model, y0, reference_v, y_d, cfg.endpoint_tol)? {
                return Err(Error::Precondition(
                    "the reference control does not reach the scenario target within \
                     endpoint_tol; feedback mode needs an admissible reference"
                        .into(),
                ));
            }
            let fcfg = FeedbackConfig {
                reference_v: reference_v.clone(),
                r: cfg.r,
                max_outer_iters: cfg.max_iters,
                tol: cfg.fixed_point_tol,
                relaxation_omega: cfg.relaxation_omega.min(0.3),
            };
            let (u, traj, report) = solve_feedback(model, y0, &fcfg)?;
            let attained = endpoint_residual(&traj, y_d)? <= cfg.endpoint_tol * (1.0 + y_d.norm());
            (
                u,
                traj,
                Vec::new(),
                attained,
                false,
                report.converged,
                report.iterations,
            )
        }
    };

    let j_value = cost_j(&u, &traj, cfg.r)?;
    let endpoint_gap = endpoint_residual(&traj, y_d)?;
    let control_mean = match u.space() {
        ControlSpace::Scalar => Some(u.integral_to(tgrid.n_steps)? / tgrid.horizon),
        ControlSpace::Distributed => None,
    };

    fs::create_dir_all(&cfg.out_dir)?;
    let control_csv = cfg.out_dir.join("control.csv");
    let trajectory_csv = cfg.out_dir.join("trajectory.csv");
    let target_csv = cfg.out_dir.join("target.csv");
    let report_json = cfg.out_dir.join("report.json");

    write_control_csv(&control_csv, &u)?;
    write_trajectory_csv(&trajectory_csv, &traj)?;
    write_target_csv(&target_csv, y_d)?;

    let report = RunReport {
        scenario: cfg.scenario.name().to_string(),
        mode: cfg.mode.name().to_string(),
        seed: cfg.seed,
        r: cfg.r,
        stages,
        attained,
        target_not_attained,
        converged,
        iterations,
        j_value,
        j_reference,
        endpoint_gap,
        control_l2_norm: u.l2_norm(),
        control_mean,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    fs::write(&report_json, json.as_bytes())?;

    let summary = RunSummary {
        scenario: cfg.scenario,
        mode: cfg.mode,
        j_value,
        j_reference,
        cost_ratio: j_reference.map(|jv| jv / j_value),
        endpoint_gap,
        converged,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };

    Ok(RunArtifacts {
        control_csv,
        trajectory_csv,
        target_csv,
        report_json,
        summary,
    })
}

fn penalty_config(cfg: &ScenarioConfig, eps: f64) -> PenaltyConfig {
    PenaltyConfig {
        eps,
        r: cfg.r,
        ball_radius: cfg.ball_radius,
        max_iters: cfg.max_iters,
        fixed_point_tol: cfg.fixed_point_tol,
        relaxation_omega: cfg.relaxation_omega,
    }
}

fn continuation_config(cfg: &ScenarioConfig) -> ContinuationConfig {
    ContinuationConfig {
        eps_start: cfg.eps_start,
        decay_rho: cfg.decay_rho,
        n_stages: cfg.n_stages,
        inner: penalty_config(cfg, cfg.eps_start),
        endpoint_tol: cfg.endpoint_tol,
    }
}

fn write_control_csv(path: &Path, u: &ControlSignal) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    match u.space() {
        ControlSpace::Scalar => {
            writeln!(w, "t,u")?;
            for (k, v) in u.values.iter().enumerate() {
                if let ControlValue::Scalar(x) = v {
                    writeln!(w, "{},{}", u.tgrid.node(k), x)?;
                }
            }
        }
        ControlSpace::Distributed => {
            writeln!(w, "t,x,u")?;
            for (k, v) in u.values.iter().enumerate() {
                if let ControlValue::Field(field) = v {
                    let t = u.tgrid.node(k);
                    for (i, x) in field.iter().enumerate() {
                        writeln!(w, "{},{},{}", t, u.grid.node(i), x)?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,x,y")?;
    for (k, state) in traj.states.iter().enumerate() {
        let t = traj.tgrid.node(k);
        for (i, y) in state.values.iter().enumerate() {
            writeln!(w, "{},{},{}", t, state.grid.node(i), y)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_target_csv(path: &Path, y_d: &StateVector) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "x,y_d")?;
    for (i, y) in y_d.values.iter().enumerate() {
        writeln!(w, "{},{}", y_d.grid.node(i), y)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the final-state/target overlay `(x, y_T, y_d)` next to the other
/// artifacts; the two curves should coincide for a successful constrained
/// or feedback run.
pub fn emit_plot_data(artifacts: &RunArtifacts) -> Result<PathBuf> {
    let target_rows = read_two_column_csv(&artifacts.target_csv)?;
    if target_rows.is_empty() {
        return Err(Error::Config("target file has no data rows".into()));
    }
    let n_nodes = target_rows.len();

    let text = fs::read_to_string(&artifacts.trajectory_csv)?;
    let data_rows: Vec<&str> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .collect();
    if data_rows.len() < n_nodes {
        return Err(Error::Config(
            "trajectory file has fewer rows than the target grid".into(),
        ));
    }
    let final_rows = &data_rows[data_rows.len() - n_nodes..];

    let out_path = artifacts
        .trajectory_csv
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("overlay.csv");
    let file = fs::File::create(&out_path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "x,y_T,y_d")?;
    for (row, (x, y_d)) in final_rows.iter().zip(&target_rows) {
        let mut cols = row.split(',');
        let (_t, x_row, y) = (cols.next(), cols.next(), cols.next());
        let y = y.ok_or_else(|| Error::Config("malformed trajectory row".into()))?;
        let x_row = x_row.ok_or_else(|| Error::Config("malformed trajectory row".into()))?;
        debug_assert_eq!(x_row.parse::<f64>().ok(), Some(*x));
        writeln!(w, "{},{},{}", x, y, y_d)?;
    }
    w.flush()?;
    Ok(out_path)
}

fn read_two_column_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let parse = |s: Option<&str>| s.and_then(|v| v.parse::<f64>().ok());
        match (parse(cols.next()), parse(cols.next())) {
            (Some(a), Some(b)) => rows.push((a, b)),
            _ => {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: "expected two numeric columns".into(),
                })
            }
        }
    }
    Ok(rows)
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {} ({} mode): J(u) = {:.6}, endpoint gap = {:.3e}, converged = {}",
            self.scenario.name(),
            self.mode.name(),
            self.j_value,
            self.endpoint_gap,
            self.converged
        )?;
        if let (Some(jv), Some(ratio)) = (self.j_reference, self.cost_ratio) {
            writeln!(
                f,
                "reference control: J(v) = {jv:.6}, ratio J(v)/J(u) = {ratio:.4}"
            )?;
        }
        write!(f, "wall time: {:.2}s", self.wall_time_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    fn write_tmp(name: &str, contents: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("bilinear-oc-tests");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn minimal_config_gets_full_defaults() {
        let path = write_tmp("minimal.cfg", "scenario = transport_fig1\n");
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::TransportFig1);
        assert_eq!(cfg.horizon, 9.0);
        assert_eq!(cfg.r, 2.0);
        assert_eq!(cfg.n_cells, 3000);
        assert_eq!(cfg.n_steps, 900);
        assert!((cfg.dt() - cfg.dx()).abs() < 1e-15);
    }

    #[test]
    fn transport_rejects_dt_not_equal_dx() {
        let path = write_tmp("bad_dt.cfg", "scenario = transport_fig1\nn_steps = 450\n");
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("exact-shift"), "{err}");
    }

    #[test]
    fn negative_r_is_rejected() {
        let path = write_tmp("bad_r.cfg", "scenario = heat_scalar\nr = -1.0\n");
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("r must be positive"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let path = write_tmp(
            "bad_key.cfg",
            "scenario = heat_scalar\n# comment line\nnot_a_key = 3\n",
        );
        match load_config(&path) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("not_a_key"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_scenario_is_rejected() {
        let path = write_tmp("no_scenario.cfg", "r = 2.0\n");
        assert!(matches!(load_config(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn registry_has_all_presets() {
        let names: Vec<&str> = list_scenarios().iter().map(|(n, _)| *n).collect();
        for kind in [
            ScenarioKind::TransportFig1,
            ScenarioKind::HeatScalar,
            ScenarioKind::HeatDistributed,
            ScenarioKind::Custom,
        ] {
            assert!(names.contains(&kind.name()));
        }
    }

    #[test]
    fn feedback_mode_rejects_distributed_control() {
        let mut cfg = ScenarioConfig::defaults(ScenarioKind::HeatDistributed);
        cfg.mode = Mode::Feedback;
        assert!(cfg.validate().is_err());
    }

    fn scratch_out(name: &str) -> PathBuf {
        let dir = std::env::temp_dir()
            .join("bilinear-oc-scenario-tests")
            .join(name);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn heat_feedback_run_reports_log_lambda_mean() {
        let mut cfg = ScenarioConfig::defaults(ScenarioKind::HeatScalar);
        cfg.n_steps = 200;
        cfg.out_dir = scratch_out("heat-feedback");
        let artifacts = run_scenario(&cfg).unwrap();
        assert!(artifacts.summary.converged);
        let report: RunReport =
            serde_json::from_str(&fs::read_to_string(&artifacts.report_json).unwrap()).unwrap();
        let mean = report.control_mean.expect("scalar control has a mean");
        assert!(
            (mean - 2.0f64.ln()).abs() < 1e-3,
            "reported ∫u*/T = {mean} vs ln 2"
        );
        // The optimal control costs less than the reference it was seeded with.
        assert!(report.j_value < report.j_reference.unwrap());
    }

    #[test]
    fn overlay_tracks_the_target_after_a_successful_run() {
        let mut cfg = ScenarioConfig::defaults(ScenarioKind::HeatScalar);
        cfg.n_steps = 200;
        cfg.out_dir = scratch_out("overlay");
        let artifacts = run_scenario(&cfg).unwrap();
        let overlay = emit_plot_data(&artifacts).unwrap();

        let text = fs::read_to_string(overlay).unwrap();
        let mut max_target: f64 = 0.0;
        let mut max_diff: f64 = 0.0;
        for line in text.lines().skip(1) {
            let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            let (y_final, y_d) = (cols[1], cols[2]);
            max_target = max_target.max(y_d.abs());
            max_diff = max_diff.max((y_final - y_d).abs());
        }
        assert!(
            max_diff <= 1e-2 * max_target,
            "overlay defect {max_diff} vs peak {max_target}"
        );
    }

    #[test]
    fn emit_plot_data_needs_the_artifact_files() {
        let dir = scratch_out("missing");
        let artifacts = RunArtifacts {
            control_csv: dir.join("control.csv"),
            trajectory_csv: dir.join("nope-trajectory.csv"),
            target_csv: dir.join("nope-target.csv"),
            report_json: dir.join("report.json"),
            summary: RunSummary {
                scenario: ScenarioKind::HeatScalar,
                mode: Mode::Feedback,
                j_value: 0.0,
                j_reference: None,
                cost_ratio: None,
                endpoint_gap: 0.0,
                converged: true,
                wall_time_secs: 0.0,
            },
        };
        assert!(matches!(emit_plot_data(&artifacts), Err(Error::Io(_))));
    }

    #[test]
    fn custom_scenario_runs_from_a_config_file() {
        let out = scratch_out("custom");
        let path = write_tmp(
            "custom.cfg",
            &format!(
                "scenario = custom\ngenerator = heat\ncontrol_space = scalar\n\
                 x_max = 1.0\nn_cells = 24\nhorizon_t = 0.2\nn_steps = 80\n\
                 y0 = sin_pi\ntarget = scaled_semigroup\nlambda = 1.5\n\
                 mode = constrained\nn_stages = 8\nendpoint_tol = 1e-2\n\
                 fixed_point_tol = 1e-6\nout_dir = {}\n",
                out.display()
            ),
        );
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::Custom);
        assert_eq!(cfg.generator, Generator::HeatDirichlet);
        let artifacts = run_scenario(&cfg).unwrap();
        assert!(artifacts.summary.converged, "{:?}", artifacts.summary);
        assert!(artifacts.summary.endpoint_gap <= 1e-2 * 2.0);
    }

    #[test]
    fn penalized_mode_yields_a_single_stage_report() {
        let mut cfg = ScenarioConfig::defaults(ScenarioKind::HeatDistributed);
        cfg.mode = Mode::Penalized;
        cfg.eps_start = 0.5;
        cfg.out_dir = scratch_out("penalized");
        let artifacts = run_scenario(&cfg).unwrap();
        let report: RunReport =
            serde_json::from_str(&fs::read_to_string(&artifacts.report_json).unwrap()).unwrap();
        assert_eq!(report.stages.len(), 1);
        assert_eq!(report.stages[0].eps, 0.5);
        assert!(report.control_mean.is_none());
    }

    #[test]
    fn distributed_constrained_run_beats_its_reference() {
        let mut cfg = ScenarioConfig::defaults(ScenarioKind::HeatDistributed);
        cfg.out_dir = scratch_out("distributed");
        let artifacts = run_scenario(&cfg).unwrap();
        let s = &artifacts.summary;
        assert!(s.converged, "{s:?}");
        assert!(s.j_value < s.j_reference.unwrap());
        assert!(s.endpoint_gap <= cfg.endpoint_tol * 2.0);
    }
}
