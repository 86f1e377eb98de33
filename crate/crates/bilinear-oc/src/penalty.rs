//! Forward–backward sweep solver for the penalized problem.
//!
//! For fixed `ε > 0` the penalized cost
//! `J_ε(u) = ‖y(T) − y_d‖² + ε J(u)` has stationary controls characterized
//! through the adjoint state: unconstrained controls satisfy
//! `u(t) = -(1/εr)·B(·, y(t))*φ(t)`, and controls restricted to the ball
//! `‖u‖_{L²(0,T;U)} ≤ M` satisfy the damped variant with coefficient
//! `(‖H'(u)‖_{L²}/M + εr)⁻¹`, where `H'(u)(t) = εr·u(t) + B(·, y(t))*φ(t)`
//! is the Hamiltonian gradient.
//!
//! The sweep iterates: forward solve, adjoint solve, control update, and a
//! relaxed mix `u ← (1-ω)u + ω·u_new`. A candidate mix is accepted only if
//! it does not increase `J_ε`; otherwise ω is halved for the retry and
//! allowed to recover after a run of accepted steps. Relaxed sweeping with
//! the unconstrained update is gradient descent on `J_ε` with step
//! `ω/(εr)`, so the guarded loop cannot climb.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    cost_j, cost_j_eps, endpoint_residual, solve_adjoint, solve_forward, ControlSignal, TimeGrid,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::space::{bilinear_adjoint_control, ControlValue, StateVector, SystemModel};

/// Smallest relaxation factor the safeguard will try.
const OMEGA_FLOOR: f64 = 1e-7;

/// Parameters of one penalized solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Penalty weight ε > 0.
    pub eps: f64,
    /// Control cost weight r > 0.
    pub r: f64,
    /// Radius of the `L²(0,T;U)` control ball; `None` means the whole space.
    pub ball_radius: Option<f64>,
    pub max_iters: usize,
    /// Fixed-point tolerance, relative to `‖u‖ + 1`.
    pub fixed_point_tol: f64,
    /// Initial relaxation factor in `(0, 1]`.
    pub relaxation_omega: f64,
}

impl PenaltyConfig {
    pub fn new(eps: f64, r: f64) -> Self {
        PenaltyConfig {
            eps,
            r,
            ball_radius: None,
            max_iters: 500,
            fixed_point_tol: 1e-8,
            relaxation_omega: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.r > 0.0) {
            return Err(Error::Config(format!("r must be positive, got {}", self.r)));
        }
        if let Some(m) = self.ball_radius {
            if !(m > 0.0) {
                return Err(Error::Config(format!(
                    "ball radius must be positive, got {m}"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.fixed_point_tol > 0.0) {
            return Err(Error::Config("fixed_point_tol must be positive".into()));
        }
        if !(self.relaxation_omega > 0.0 && self.relaxation_omega <= 1.0) {
            return Err(Error::Config(format!(
                "relaxation omega must lie in (0, 1], got {}",
                self.relaxation_omega
            )));
        }
        Ok(())
    }
}

/// Convergence record of one sweep solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Fixed-point residual `‖u_new − u‖_{L²(0,T;U)}` per iteration.
    pub residual_history: Vec<f64>,
    pub j_value: f64,
    pub jeps_value: f64,
    pub endpoint_gap: f64,
    pub control_l2_norm: f64,
    /// Set when the residual history failed to be non-increasing after the
    /// first three iterations.
    pub monotonicity_warning: bool,
    /// Relaxation factor in effect when the solve stopped.
    pub final_omega: f64,
}

/// Hamiltonian gradient `H'(u)(t) = εr·u(t) + B(·, y(t))*φ(t)` at every
/// time node.
pub fn hamiltonian_gradient(
    model: &SystemModel,
    u: &ControlSignal,
    y_traj: &Trajectory,
    phi_traj: &Trajectory,
    eps: f64,
    r: f64,
) -> Result<ControlSignal> {
    if u.tgrid != y_traj.tgrid || u.tgrid != phi_traj.tgrid {
        return Err(Error::Dimension(
            "control and trajectories must share the time grid".into(),
        ));
    }
    let coupling = adjoint_coupling(model, y_traj, phi_traj)?;
    u.scale(eps * r).axpy(1.0, &coupling)
}

/// The control-space signal `t ↦ B(·, y(t))*φ(t)`.
fn adjoint_coupling(
    model: &SystemModel,
    y_traj: &Trajectory,
    phi_traj: &Trajectory,
) -> Result<ControlSignal> {
    if y_traj.tgrid != phi_traj.tgrid {
        return Err(Error::Dimension(
            "trajectories must share the time grid".into(),
        ));
    }
    let values = y_traj
        .states
        .iter()
        .zip(&phi_traj.states)
        .map(|(y, phi)| bilinear_adjoint_control(model, y, phi))
        .collect::<Result<Vec<ControlValue>>>()?;
    ControlSignal::new(y_traj.tgrid, model.grid, values)
}

/// Unconstrained stationary control `t ↦ -(1/εr)·B(·, y(t))*φ(t)`.
pub fn control_update_unconstrained(
    model: &SystemModel,
    y_traj: &Trajectory,
    phi_traj: &Trajectory,
    eps: f64,
    r: f64,
) -> Result<ControlSignal> {
    if !(eps * r > 0.0) {
        return Err(Error::Config(format!(
            "eps·r must be positive, got {}",
            eps * r
        )));
    }
    Ok(adjoint_coupling(model, y_traj, phi_traj)?.scale(-1.0 / (eps * r)))
}

/// Ball-constrained control update.
///
/// Returns the unconstrained update when it already fits into the ball;
/// otherwise damps the coupling by `(‖H'(u)‖_{L²}/M + εr)⁻¹`, evaluated at
/// the current iterate, and rescales onto the sphere if the damped step
/// still exceeds the radius.
pub fn control_update_ball(
    model: &SystemModel,
    y_traj: &Trajectory,
    phi_traj: &Trajectory,
    eps: f64,
    r: f64,
    radius: f64,
    u_current: &ControlSignal,
) -> Result<ControlSignal> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    let coupling = adjoint_coupling(model, y_traj, phi_traj)?;
    let unconstrained = coupling.scale(-1.0 / (eps * r));
    if unconstrained.l2_norm() <= radius {
        return Ok(unconstrained);
    }
    let grad_norm = hamiltonian_gradient(model, u_current, y_traj, phi_traj, eps, r)?.l2_norm();
    let mut update = coupling.scale(-1.0 / (grad_norm / radius + eps * r));
    let norm = update.l2_norm();
    if norm > radius {
        update = update.scale(radius / norm);
    }
    Ok(update)
}

/// Solve the penalized problem by relaxed forward–backward sweeps.
///
/// Returns the final control, its trajectory, and the convergence report.
/// Non-convergence is reported, not raised; only divergence of the state
/// integration is an error.
pub fn solve_penalized(
    model: &SystemModel,
    y0: &StateVector,
    y_d: &StateVector,
    config: &PenaltyConfig,
    u_init: &ControlSignal,
) -> Result<(ControlSignal, Trajectory, SolveReport)> {
    config.validate()?;
    model.check_control(&u_init.values[0])?;
    let tgrid: TimeGrid = u_init.tgrid;

    let mut u = u_init.clone();
    let mut y = solve_forward(model, y0, &u, &tgrid)?;
    let mut jeps = cost_j_eps(&u, &y, y_d, config.eps, config.r)?;

    let mut omega = config.relaxation_omega;
    let mut residual_history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut accept_streak = 0usize;

    'sweep: while residual_history.len() < config.max_iters {
        let phi = solve_adjoint(model, &u, &y, y_d, config.eps, &tgrid)?;
        let u_new = match config.ball_radius {
            None => control_update_unconstrained(model, &y, &phi, config.eps, config.r)?,
            Some(m) => control_update_ball(model, &y, &phi, config.eps, config.r, m, &u)?,
        };
        let residual = u_new.l2_distance(&u)?;
        residual_history.push(residual);
        if residual <= config.fixed_point_tol * (1.0 + u.l2_norm()) {
            converged = true;
            break;
        }
        // A plateau means the damped iteration cannot buy more accuracy at
        // this ε; stop burning sweeps and let the caller tighten ε instead.
        let n = residual_history.len();
        if n >= 30 && residual > 0.98 * residual_history[n - 21] {
            break;
        }

        // Try the relaxed mix; halve omega until J_ε stops increasing.
        loop {
            let candidate = u.mix(&u_new, omega)?;
            let outcome = solve_forward(model, y0, &candidate, &tgrid).and_then(|traj| {
                Ok((
                    cost_j_eps(&candidate, &traj, y_d, config.eps, config.r)?,
                    traj,
                ))
            });
            match outcome {
                Ok((jeps_cand, traj)) if jeps_cand <= jeps + 1e-12 * (1.0 + jeps.abs()) => {
                    u = candidate;
                    y = traj;
                    jeps = jeps_cand;
                    accept_streak += 1;
                    if accept_streak >= 4 {
                        omega = (omega * 1.3).min(config.relaxation_omega);
                        accept_streak = 0;
                    }
                    continue 'sweep;
                }
                Ok(_) | Err(Error::Divergence { .. }) => {
                    omega *= 0.5;
                    accept_streak = 0;
                    if omega < OMEGA_FLOOR {
                        // No descent step exists at any relaxation; stop here.
                        break 'sweep;
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    let monotonicity_warning = residual_history
        .windows(2)
        .skip(2)
        .any(|w| w[1] > w[0] * (1.0 + 1e-12));

    let j_value = cost_j(&u, &y, config.r)?;
    let endpoint_gap = endpoint_residual(&y, y_d)?;
    let report = SolveReport {
        iterations: residual_history.len(),
        converged,
        residual_history,
        j_value,
        jeps_value: jeps,
        endpoint_gap,
        control_l2_norm: u.l2_norm(),
        monotonicity_warning,
        final_omega: omega,
    };
    Ok((u, y, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TimeGrid;
    use crate::rng::SplitMix64;
    use crate::space::{ControlSpace, Generator, Grid, StateVector};
    use std::f64::consts::PI;

    fn heat_scalar(n_cells: usize) -> SystemModel {
        let grid = Grid::new(0.0, 1.0, n_cells).unwrap();
        SystemModel::new(Generator::HeatDirichlet, ControlSpace::Scalar, grid)
    }

    fn transport_scalar() -> SystemModel {
        let grid = Grid::new(0.0, 6.0, 300).unwrap();
        SystemModel::new(Generator::TransportRightShift, ControlSpace::Scalar, grid)
    }

    #[test]
    fn gradient_is_zero_at_the_stationary_formula() {
        let model = heat_scalar(24);
        let tgrid = TimeGrid::new(0.1, 40).unwrap();
        let y0 = StateVector::from_fn(model.grid, |x| (PI * x).sin());
        let u = ControlSignal::scalar_fn(tgrid, model.grid, |t| 0.3 * t);
        let y = solve_forward(&model, &y0, &u, &tgrid).unwrap();
        let y_d = StateVector::zeros(model.grid);
        let (eps, r) = (0.5, 2.0);
        let phi = solve_adjoint(&model, &u, &y, &y_d, eps, &tgrid).unwrap();

        // φ ≡ 0 gives H' = εr·u.
        let zero_phi = Trajectory {
            tgrid,
            states: vec![StateVector::zeros(model.grid); tgrid.n_nodes()],
        };
        let g0 = hamiltonian_gradient(&model, &u, &y, &zero_phi, eps, r).unwrap();
        let expect = u.scale(eps * r);
        assert!(g0.l2_distance(&expect).unwrap() <= 1e-14);

        // At u = -(1/εr)B*(y)φ the gradient vanishes identically.
        let stationary = control_update_unconstrained(&model, &y, &phi, eps, r).unwrap();
        let g = hamiltonian_gradient(&model, &stationary, &y, &phi, eps, r).unwrap();
        assert!(g.l2_norm() <= 1e-14 * (1.0 + stationary.l2_norm()));
    }

    #[test]
    fn unconstrained_update_matches_inner_product_oracle() {
        let model = heat_scalar(24);
        let tgrid = TimeGrid::new(0.1, 30).unwrap();
        let y0 = StateVector::from_fn(model.grid, |x| (PI * x).sin());
        let u = ControlSignal::scalar_fn(tgrid, model.grid, |t| (2.0 * t).sin());
        let y = solve_forward(&model, &y0, &u, &tgrid).unwrap();
        let y_d = StateVector::zeros(model.grid);
        let (eps, r) = (0.2, 1.5);
        let phi = solve_adjoint(&model, &u, &y, &y_d, eps, &tgrid).unwrap();
        let update = control_update_unconstrained(&model, &y, &phi, eps, r).unwrap();
        for k in 0..=tgrid.n_steps {
            let expect = -crate::space::inner(y.state(k), phi.state(k)).unwrap() / (eps * r);
            match update.values[k] {
                crate::space::ControlValue::Scalar(v) => {
                    assert!((v - expect).abs() <= 1e-14 * (1.0 + expect.abs()))
                }
                _ => panic!("scalar model"),
            }
        }
    }

    #[test]
    fn distributed_update_matches_elementwise_oracle() {
        let grid = Grid::new(0.0, 1.0, 20).unwrap();
        let model = SystemModel::new(Generator::HeatDirichlet, ControlSpace::Distributed, grid);
        let tgrid = TimeGrid::new(0.05, 20).unwrap();
        let y0 = StateVector::from_fn(grid, |x| (PI * x).sin());
        let u = ControlSignal::field_fn(tgrid, grid, |t, x| 0.5 * t * (PI * x).sin());
        let y = solve_forward(&model, &y0, &u, &tgrid).unwrap();
        let y_d = StateVector::zeros(grid);
        let (eps, r) = (0.3, 2.0);
        let phi = solve_adjoint(&model, &u, &y, &y_d, eps, &tgrid).unwrap();
        let update = control_update_unconstrained(&model, &y, &phi, eps, r).unwrap();
        for k in 0..=tgrid.n_steps {
            match &update.values[k] {
                crate::space::ControlValue::Field(w) => {
                    for (i, wi) in w.iter().enumerate() {
                        let expect = -y.state(k).values[i] * phi.state(k).values[i] / (eps * r);
                        assert!((wi - expect).abs() <= 1e-14 * (1.0 + expect.abs()));
                    }
                }
                _ => panic!("distributed model"),
            }
        }
    }

    #[test]
    fn ball_update_edge_cases() {
        let model = heat_scalar(20);
        let tgrid = TimeGrid::new(0.1, 20).unwrap();
        let y0 = StateVector::from_fn(model.grid, |x| (PI * x).sin());
        let u = ControlSignal::scalar_fn(tgrid, model.grid, |_| 0.7);
        let y = solve_forward(&model, &y0, &u, &tgrid).unwrap();
        let y_d = StateVector::zeros(model.grid);
        let (eps, r) = (0.1, 2.0);
        let phi = solve_adjoint(&model, &u, &y, &y_d, eps, &tgrid).unwrap();

        // φ ≡ 0 → zero control, interior of any ball.
        let zero_phi = Trajectory {
            tgrid,
            states: vec![StateVector::zeros(model.grid); tgrid.n_nodes()],
        };
        let z = control_update_ball(&model, &y, &zero_phi, eps, r, 1.0, &u).unwrap();
        assert_eq!(z.l2_norm(), 0.0);

        // A huge radius reproduces the unconstrained update.
        let unc = control_update_unconstrained(&model, &y, &phi, eps, r).unwrap();
        let big = control_update_ball(&model, &y, &phi, eps, r, 1e12, &u).unwrap();
        assert!(big.l2_distance(&unc).unwrap() <= 1e-10 * (1.0 + unc.l2_norm()));

        // A tight radius is honored.
        let radius = 0.25 * unc.l2_norm();
        let tight = control_update_ball(&model, &y, &phi, eps, r, radius, &u).unwrap();
        assert!(tight.l2_norm() <= radius + 1e-12);

        assert!(control_update_ball(&model, &y, &phi, eps, r, -1.0, &u).is_err());
    }

    #[test]
    fn sweep_converges_on_attainable_transport_target() {
        // y_d = S(T)y0, so v = 0 is admissible and the sweep settles nearby.
        let model = transport_scalar();
        let tgrid = TimeGrid::new(2.0, 100).unwrap();
        let y0 = StateVector::from_fn(model.grid, |x| if x < 3.0 { x * (-x).exp() } else { 0.0 });
        let u0 = ControlSignal::zeros(tgrid, model.grid, ControlSpace::Scalar);
        let free = solve_forward(&model, &y0, &u0, &tgrid).unwrap();
        let y_d = free.last().clone();
        let mut config = PenaltyConfig::new(50.0, 2.0);
        config.fixed_point_tol = 1e-9;
        let (u, _y, report) = solve_penalized(&model, &y0, &y_d, &config, &u0).unwrap();
        assert!(report.converged, "residuals: {:?}", report.residual_history);
        // Residuals decay monotonically to the tolerance.
        for w in report.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "non-monotone: {w:?}");
        }
        assert!(!report.monotonicity_warning);
        // Stationarity at convergence.
        let y = solve_forward(&model, &y0, &u, &tgrid).unwrap();
        let phi = solve_adjoint(&model, &u, &y, &y_d, config.eps, &tgrid).unwrap();
        let h = hamiltonian_gradient(&model, &u, &y, &phi, config.eps, config.r).unwrap();
        assert!(
            h.l2_norm()
                <= (config.eps * config.r + 1.0) * config.fixed_point_tol * (1.0 + u.l2_norm())
        );
    }

    #[test]
    fn sweep_descends_on_heat_scaling_target() {
        let model = heat_scalar(40);
        let tgrid = TimeGrid::new(0.2, 100).unwrap();
        let y0 = StateVector::from_fn(model.grid, |x| (PI * x).sin());
        let u0 = ControlSignal::zeros(tgrid, model.grid, ControlSpace::Scalar);
        let free = solve_forward(&model, &y0, &u0, &tgrid).unwrap();
        let y_d = free.last().scale(2.0);
        let config = PenaltyConfig {
            eps: 1e-2,
            r: 2.0,
            ball_radius: None,
            max_iters: 300,
            fixed_point_tol: 1e-7,
            relaxation_omega: 0.5,
        };
        let jeps_init = cost_j_eps(&u0, &free, &y_d, config.eps, config.r).unwrap();
        let (_u, y, report) = solve_penalized(&model, &y0, &y_d, &config, &u0).unwrap();
        assert!(report.jeps_value <= jeps_init + 1e-12);
        assert!(report.endpoint_gap < endpoint_residual(&free, &y_d).unwrap());
        assert_eq!(report.residual_history.len(), report.iterations);
        assert!(y.last().norm() > 0.0);
    }

    #[test]
    fn ball_mode_is_feasible() {
        let model = heat_scalar(30);
        let tgrid = TimeGrid::new(0.2, 80).unwrap();
        let y0 = StateVector::from_fn(model.grid, |x| (PI * x).sin());
        let u0 = ControlSignal::zeros(tgrid, model.grid, ControlSpace::Scalar);
        let free = solve_forward(&model, &y0, &u0, &tgrid).unwrap();
        let y_d = free.last().scale(2.0);

        let mut config = PenaltyConfig::new(1e-3, 2.0);
        config.fixed_point_tol = 1e-6;
        let (u_free, _, _) = solve_penalized(&model, &y0, &y_d, &config, &u0).unwrap();

        let radius = 0.5 * u_free.l2_norm();
        config.ball_radius = Some(radius);
        let (u_ball, _, report) = solve_penalized(&model, &y0, &y_d, &config, &u0).unwrap();
        assert!(
            u_ball.l2_norm() <= radius + config.fixed_point_tol,
            "‖u‖ = {} vs M = {radius}",
            u_ball.l2_norm()
        );
        assert!(report.iterations > 0);
    }

    #[test]
    fn gradient_matches_finite_differences_smoke() {
        // Small smoke version of the adjoint-gradient identity; the
        // acceptance suite runs the tight variant.
        let model = heat_scalar(24);
        let tgrid = TimeGrid::new(0.1, 50).unwrap();
        let y0 = StateVector::from_fn(model.grid, |x| (PI * x).sin());
        let mut rng = SplitMix64::new(91);
        let u = ControlSignal::scalar_fn(tgrid, model.grid, |t| 0.4 * (3.0 * t).sin() + 0.1);
        let base_dir: Vec<f64> = (0..tgrid.n_nodes()).map(|_| rng.next_signed()).collect();
        let delta = ControlSignal::new(
            tgrid,
            model.grid,
            base_dir.iter().map(|v| ControlValue::Scalar(*v)).collect(),
        )
        .unwrap();
        let y_d = StateVector::zeros(model.grid);
        let (eps, r) = (0.7, 1.3);

        let y = solve_forward(&model, &y0, &u, &tgrid).unwrap();
        let phi = solve_adjoint(&model, &u, &y, &y_d, eps, &tgrid).unwrap();
        let g = hamiltonian_gradient(&model, &u, &y, &phi, eps, r).unwrap();
        let pairing = g.dot(&delta).unwrap();

        let h = 1e-5;
        let plus = u.axpy(h, &delta).unwrap();
        let minus = u.axpy(-h, &delta).unwrap();
        let j_plus = {
            let t = solve_forward(&model, &y0, &plus, &tgrid).unwrap();
            cost_j_eps(&plus, &t, &y_d, eps, r).unwrap()
        };
        let j_minus = {
            let t = solve_forward(&model, &y0, &minus, &tgrid).unwrap();
            cost_j_eps(&minus, &t, &y_d, eps, r).unwrap()
        };
        let fd = (j_plus - j_minus) / (2.0 * h);
        assert!(
            (pairing - fd).abs() <= 1e-4 * fd.abs().max(1e-10),
            "adjoint {pairing} vs fd {fd}"
        );
    }
}
