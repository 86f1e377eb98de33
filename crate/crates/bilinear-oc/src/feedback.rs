//! Time-varying feedback representation of the optimal control for
//! commutative scalar-control systems.
//!
//! When `A` and `B` commute, `U = ℝ`, and an admissible reference control
//! `v` is known, the optimal control of the endpoint-constrained problem
//! can be written through its own trajectory:
//!
//! ```text
//! u*(t) = (1/T)∫₀ᵀ v(s) ds
//!       + (2/(T·r))∫₀ᵀ∫_α^T ⟨y*(s), B y*(s)⟩ ds dα
//!       - (2/r)∫_t^T ⟨y*(s), B y*(s)⟩ ds
//! ```
//!
//! With the multiplication operator `B = I` the pairing reduces to
//! `‖y*(s)‖²`. The formula defines `u*` only implicitly (the right side
//! depends on the trajectory of `u*`), so [`solve_feedback`] runs a relaxed
//! fixed-point iteration started at `v`, whose initial trajectory already
//! hits the target.
//!
//! Two structural identities follow directly from the quadrature layout
//! and are pinned by tests: the mean of the fixed-point control equals the
//! mean of `v`, and `u*(t₂) − u*(t₁) = (2/r)∫_{t₁}^{t₂}‖y*‖² ds`.

use crate::dynamics::{
    cost_j, endpoint_residual, solve_forward, step_semigroup, ControlSignal, TimeGrid, Trajectory,
};
use crate::error::{Error, Result};
use crate::penalty::SolveReport;
use crate::space::{ControlSpace, ControlValue, StateVector, SystemModel};

/// Relative threshold for deciding kernel membership of `S(T)y0`.
const KERNEL_THRESHOLD: f64 = 1e-10;

/// Reference control and iteration parameters for a feedback solve.
#[derive(Debug, Clone)]
pub struct FeedbackConfig {
    /// Admissible reference control; the iteration starts here.
    pub reference_v: ControlSignal,
    pub r: f64,
    pub max_outer_iters: usize,
    /// Fixed-point tolerance, relative to `‖u‖ + 1`; also the admissibility
    /// tolerance required of `reference_v`.
    pub tol: f64,
    pub relaxation_omega: f64,
}

impl FeedbackConfig {
    pub fn new(reference_v: ControlSignal, r: f64) -> Self {
        FeedbackConfig {
            reference_v,
            r,
            max_outer_iters: 300,
            tol: 1e-8,
            relaxation_omega: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(Error::Config(format!("r must be positive, got {}", self.r)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if !(self.relaxation_omega > 0.0 && self.relaxation_omega <= 1.0) {
            return Err(Error::Config(format!(
                "relaxation omega must lie in (0, 1], got {}",
                self.relaxation_omega
            )));
        }
        if self.reference_v.space() != ControlSpace::Scalar {
            return Err(Error::Unsupported(
                "the feedback law is defined for scalar controls".into(),
            ));
        }
        Ok(())
    }
}

/// Check the hypothesis `S(T)y0 ∉ Ker(B)`.
///
/// For the multiplication operator this is `‖S(T)y0‖ > 1e-10·‖y0‖`;
/// membership in the kernel is not decidable exactly in floating point, so
/// a relative threshold stands in.
pub fn kernel_check(model: &SystemModel, y0: &StateVector, tgrid: &TimeGrid) -> Result<bool> {
    if y0.grid != model.grid {
        return Err(Error::Dimension(
            "initial state does not match model grid".into(),
        ));
    }
    let mut s_t = y0.clone();
    model.project_boundary(&mut s_t.values);
    for _ in 0..tgrid.n_steps {
        s_t = step_semigroup(model, &s_t, tgrid.dt)?;
    }
    Ok(s_t.norm() > KERNEL_THRESHOLD * y0.norm())
}

/// Evaluate the feedback formula on a given trajectory.
///
/// All three terms use trapezoid quadrature. The tail integrals
/// `G(t) = ∫_t^T ‖y(s)‖² ds` come from one backward cumulative pass, so the
/// time-structure identity `u(t₂) − u(t₁) = (2/r)(G(t₁) − G(t₂))` holds to
/// rounding on the returned signal.
pub fn feedback_formula(y_traj: &Trajectory, v: &ControlSignal, r: f64) -> Result<ControlSignal> {
    if v.space() != ControlSpace::Scalar {
        return Err(Error::Unsupported(
            "the feedback law is defined for scalar controls".into(),
        ));
    }
    if v.tgrid != y_traj.tgrid {
        return Err(Error::Dimension(
            "reference control and trajectory time grids differ".into(),
        ));
    }
    if !(r > 0.0) {
        return Err(Error::Config(format!("r must be positive, got {r}")));
    }
    let tgrid = y_traj.tgrid;
    let t_final = tgrid.horizon;
    let n = tgrid.n_steps;

    // Nodal state energies and their tail integrals.
    let energy: Vec<f64> = y_traj.states.iter().map(|y| y.norm().powi(2)).collect();
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + 0.5 * tgrid.dt * (energy[k] + energy[k + 1]);
    }

    let mean_v = v.integral_to(n)? / t_final;
    let double_integral: f64 = (0..=n).map(|k| tgrid.weight(k) * tail[k]).sum();
    let offset = mean_v + 2.0 / (t_final * r) * double_integral;

    let values = (0..=n)
        .map(|k| ControlValue::Scalar(offset - 2.0 / r * tail[k]))
        .collect();
    ControlSignal::new(tgrid, v.grid, values)
}

/// Solve the feedback fixed point by relaxed iteration from `v`.
///
/// Fails with a precondition error when `S(T)y0` falls inside the kernel
/// threshold or `v` is not admissible for its own terminal state target.
pub fn solve_feedback(
    model: &SystemModel,
    y0: &StateVector,
    config: &FeedbackConfig,
) -> Result<(ControlSignal, Trajectory, SolveReport)> {
    config.validate()?;
    if model.control_space != ControlSpace::Scalar {
        return Err(Error::Unsupported(
            "the feedback law is defined for scalar controls".into(),
        ));
    }
    let tgrid = config.reference_v.tgrid;
    if !kernel_check(model, y0, &tgrid)? {
        return Err(Error::Precondition(
            "S(T)y0 lies in the kernel of the control operator; the feedback formula needs \
             S(T)y0 ∉ Ker(B)"
                .into(),
        ));
    }

    // The target the reference control reaches; v is admissible for it by
    // construction and the iteration is measured against it.
    let v = &config.reference_v;
    let traj_v = solve_forward(model, y0, v, &tgrid)?;
    let y_d = traj_v.last().clone();

    let mut u = v.clone();
    let mut y = traj_v;
    let mut omega = config.relaxation_omega;
    let mut residual_history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut growth_streak = 0usize;

    while residual_history.len() < config.max_outer_iters {
        let u_new = feedback_formula(&y, v, config.r)?;
        let residual = u_new.l2_distance(&u)?;
        if let Some(prev) = residual_history.last() {
            if residual > prev * 1.2 {
                growth_streak += 1;
                if growth_streak >= 2 {
                    omega = (omega * 0.5).max(1e-4);
                    growth_streak = 0;
                }
            } else {
                growth_streak = 0;
            }
        }
        residual_history.push(residual);
        if residual <= config.tol * (1.0 + u.l2_norm()) {
            converged = true;
            break;
        }
        u = u.mix(&u_new, omega)?;
        y = solve_forward(model, y0, &u, &tgrid)?;
    }

    let j_value = cost_j(&u, &y, config.r)?;
    let endpoint_gap = endpoint_residual(&y, &y_d)?;
    let report = SolveReport {
        iterations: residual_history.len(),
        converged,
        residual_history,
        j_value,
        // ε = 1 convention: the plain sum of endpoint defect and cost.
        jeps_value: endpoint_gap * endpoint_gap + j_value,
        endpoint_gap,
        control_l2_norm: u.l2_norm(),
        monotonicity_warning: false,
        final_omega: omega,
    };
    Ok((u, y, report))
}
