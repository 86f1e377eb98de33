//! Penalty continuation: solve the endpoint-constrained problem as the
//! limit of penalized problems.
//!
//! A decreasing schedule `ε_k = eps_start·ρᵏ` is swept with warm starts:
//! each stage's solution seeds the next. As ε shrinks, the endpoint term
//! dominates and the stage solutions approach an admissible minimizer of
//! `J`. The run stops early once the endpoint gap falls below the
//! tolerance; the last stage's control is the numerical stand-in for the
//! limit point.

use serde::{Deserialize, Serialize};

use crate::dynamics::{endpoint_residual, solve_forward, ControlSignal, TimeGrid};
use crate::error::{Error, Result};
use crate::penalty::{solve_penalized, PenaltyConfig};
use crate::space::{StateVector, SystemModel};

/// Schedule and inner-solver template for one continuation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    /// First penalty weight, ε₀ > 0.
    pub eps_start: f64,
    /// Geometric decay ratio in (0, 1); stage k uses `eps_start·ρᵏ`.
    pub decay_rho: f64,
    pub n_stages: usize,
    /// Inner solver parameters; `eps` is overwritten per stage.
    pub inner: PenaltyConfig,
    /// Early-stop tolerance on the endpoint gap, relative to `1 + ‖y_d‖`.
    pub endpoint_tol: f64,
}

impl ContinuationConfig {
    pub fn new(inner: PenaltyConfig) -> Self {
        ContinuationConfig {
            eps_start: 1.0,
            decay_rho: 0.3,
            n_stages: 12,
            inner,
            endpoint_tol: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_start > 0.0) {
            return Err(Error::Config(format!(
                "eps_start must be positive, got {}",
                self.eps_start
            )));
        }
        if !(self.decay_rho > 0.0 && self.decay_rho < 1.0) {
            return Err(Error::Config(format!(
                "decay_rho must lie in (0, 1), got {}",
                self.decay_rho
            )));
        }
        if self.n_stages == 0 {
            return Err(Error::Config("n_stages must be at least 1".into()));
        }
        if !(self.endpoint_tol > 0.0) {
            return Err(Error::Config("endpoint_tol must be positive".into()));
        }
        self.inner.validate()
    }

    /// Penalty weight of stage `k`.
    pub fn eps_at(&self, k: usize) -> f64 {
        self.eps_start * self.decay_rho.powi(k as i32)
    }
}

/// Outcome of one continuation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub eps: f64,
    pub endpoint_gap: f64,
    pub j_value: f64,
    pub control_l2_norm: f64,
    pub inner_iterations: usize,
    pub converged: bool,
    /// `L²` distance of this stage's control from the previous stage's;
    /// diagnoses Cauchy behavior of the sequence.
    pub control_delta: f64,
}

/// Stage table and outcome flags of a continuation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub stages: Vec<StageRecord>,
    pub final_stage_index: usize,
    /// The endpoint gap reached the tolerance at some stage.
    pub attained: bool,
    /// No stage converged and the gap stagnated well above the tolerance —
    /// the target may not be attainable from the control set.
    pub target_not_attained: bool,
}

/// Forward-solve from `y0` with `v` and test whether it steers into `y_d`
/// up to `tol·(1 + ‖y_d‖)`.
pub fn check_admissible(
    model: &SystemModel,
    y0: &StateVector,
    v: &ControlSignal,
    y_d: &StateVector,
    tol: f64,
) -> Result<bool> {
    let traj = solve_forward(model, y0, v, &v.tgrid)?;
    let gap = endpoint_residual(&traj, y_d)?;
    Ok(gap <= tol * (1.0 + y_d.norm()))
}

/// Solve the endpoint-constrained problem by ε-continuation.
///
/// Warm-starts every stage with the previous stage's control and stops
/// early once the endpoint gap is inside the tolerance. Returns the last
/// stage's control with the full stage table.
pub fn solve_constrained(
    model: &SystemModel,
    y0: &StateVector,
    y_d: &StateVector,
    tgrid: &TimeGrid,
    config: &ContinuationConfig,
) -> Result<(ControlSignal, ContinuationReport)> {
    config.validate()?;
    let gap_scale = 1.0 + y_d.norm();

    let mut u = ControlSignal::zeros(*tgrid, model.grid, model.control_space);
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut attained = false;
    // Carry the stabilized relaxation factor across stages: the critical
    // value shrinks with ε, so restarting at the template value would just
    // replay the same rejected steps.
    let mut omega = config.inner.relaxation_omega;

    for k in 0..config.n_stages {
        let mut stage_cfg = config.inner.clone();
        stage_cfg.eps = config.eps_at(k);
        stage_cfg.relaxation_omega = omega;
        let (u_next, _y, report) = solve_penalized(model, y0, y_d, &stage_cfg, &u)?;
        let control_delta = u_next.l2_distance(&u)?;
        u = u_next;
        omega = (report.final_omega * 2.0).min(config.inner.relaxation_omega);
        stages.push(StageRecord {
            eps: stage_cfg.eps,
            endpoint_gap: report.endpoint_gap,
            j_value: report.j_value,
            control_l2_norm: report.control_l2_norm,
            inner_iterations: report.iterations,
            converged: report.converged,
            control_delta,
        });
        if report.endpoint_gap <= config.endpoint_tol * gap_scale {
            attained = true;
            break;
        }
    }

    let final_stage_index = stages.len() - 1;
    let final_gap = stages[final_stage_index].endpoint_gap;
    let first_gap = stages[0].endpoint_gap;
    let any_converged = stages.iter().any(|s| s.converged);
    // Stagnation: shrinking ε three more times bought less than a 10% gap
    // reduction. Attainable targets contract the gap roughly like ε itself,
    // so this separates "still converging" from "pushing against a floor".
    let stagnated = stages.len() >= 4 && final_gap >= 0.9 * stages[stages.len() - 4].endpoint_gap;
    let target_not_attained = !attained
        && final_gap > 10.0 * config.endpoint_tol * gap_scale
        && (stagnated || (!any_converged && final_gap >= 0.5 * first_gap));

    let report = ContinuationReport {
        stages,
        final_stage_index,
        attained,
        target_not_attained,
    };
    Ok((u, report))
}
