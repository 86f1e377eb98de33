//! Time stepping for the controlled system and its adjoint, plus the cost
//! functionals.
//!
//! The forward solver approximates the mild solution of
//! `ẏ = Ay + B(u, y)` by Strang splitting: per step, a half kick by the
//! exact exponential of the multiplication factor, one semigroup step for
//! `A`, and the second half kick. The semigroup step is an exact one-node
//! shift for transport (hence the `dt = dx` requirement) and one
//! Crank–Nicolson step for the Dirichlet heat equation. Controls are stored
//! at time nodes and each step kicks with the midpoint value
//! `(u(t_k) + u(t_{k+1}))/2`, which keeps the scheme second order.
//!
//! The adjoint solver integrates
//! `φ̇ = -A*φ - B*(u, φ) - 2εy`, `φ(T) = 2(y(T) - y_d)`
//! backward with the splitting order reversed and the adjoint semigroup
//! step (the transpose of the forward step in the grid inner product). The
//! `-2εy` source is accumulated with trapezoid weights split across the two
//! steps adjacent to each node; with that convention the discrete
//! adjoint-gradient identity checked in the test suite holds essentially to
//! quadrature accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ControlSpace, ControlValue, Generator, Grid, StateVector, SystemModel};

/// Norm bound beyond which integration aborts with a divergence error.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Uniform time grid on `[0, T]` with `n_steps` steps and `n_steps + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::Config("time grid needs at least one step".into()));
        }
        Ok(TimeGrid {
            horizon,
            n_steps,
            dt: horizon / n_steps as f64,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Trapezoid quadrature weight of time node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.n_steps {
            0.5 * self.dt
        } else {
            self.dt
        }
    }
}

/// A time-sampled control: one [`ControlValue`] per time node.
///
/// The spatial grid is carried along so field controls know their
/// quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub tgrid: TimeGrid,
    pub grid: Grid,
    pub values: Vec<ControlValue>,
}

impl ControlSignal {
    pub fn new(tgrid: TimeGrid, grid: Grid, values: Vec<ControlValue>) -> Result<Self> {
        if values.len() != tgrid.n_nodes() {
            return Err(Error::Dimension(format!(
                "control has {} samples, time grid has {} nodes",
                values.len(),
                tgrid.n_nodes()
            )));
        }
        let space = values
            .first()
            .map(ControlValue::space)
            .ok_or_else(|| Error::Dimension("control signal is empty".into()))?;
        for v in &values {
            if v.space() != space {
                return Err(Error::Config(
                    "control mixes scalar and field samples".into(),
                ));
            }
            if let ControlValue::Field(w) = v {
                if w.len() != grid.n_nodes() {
                    return Err(Error::Dimension(format!(
                        "control field has {} nodes, grid has {}",
                        w.len(),
                        grid.n_nodes()
                    )));
                }
            }
        }
        Ok(ControlSignal {
            tgrid,
            grid,
            values,
        })
    }

    /// The zero control of the given kind.
    pub fn zeros(tgrid: TimeGrid, grid: Grid, space: ControlSpace) -> Self {
        let value = match space {
            ControlSpace::Scalar => ControlValue::Scalar(0.0),
            ControlSpace::Distributed => ControlValue::Field(vec![0.0; grid.n_nodes()]),
        };
        ControlSignal {
            tgrid,
            grid,
            values: vec![value; tgrid.n_nodes()],
        }
    }

    /// Scalar control sampled from `f(t)`.
    pub fn scalar_fn(tgrid: TimeGrid, grid: Grid, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = (0..tgrid.n_nodes())
            .map(|k| ControlValue::Scalar(f(tgrid.node(k))))
            .collect();
        ControlSignal {
            tgrid,
            grid,
            values,
        }
    }

    /// Field control sampled from `f(t, x)`.
    pub fn field_fn(tgrid: TimeGrid, grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..tgrid.n_nodes())
            .map(|k| {
                let t = tgrid.node(k);
                ControlValue::Field((0..grid.n_nodes()).map(|i| f(t, grid.node(i))).collect())
            })
            .collect();
        ControlSignal {
            tgrid,
            grid,
            values,
        }
    }

    pub fn space(&self) -> ControlSpace {
        self.values[0].space()
    }

    /// `L²(0,T;U)` norm by trapezoid rule in time.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            acc += self.tgrid.weight(k) * v.norm_sq(&self.grid);
        }
        acc.sqrt()
    }

    /// `L²(0,T;U)` inner product with another signal of the same kind.
    pub fn dot(&self, other: &ControlSignal) -> Result<f64> {
        self.check_compatible(other)?;
        let mut acc = 0.0;
        for k in 0..self.values.len() {
            acc += self.tgrid.weight(k) * self.values[k].dot(&other.values[k], &self.grid)?;
        }
        Ok(acc)
    }

    pub fn l2_distance(&self, other: &ControlSignal) -> Result<f64> {
        self.check_compatible(other)?;
        let mut acc = 0.0;
        for k in 0..self.values.len() {
            let d_sq = match (&self.values[k], &other.values[k]) {
                (ControlValue::Scalar(a), ControlValue::Scalar(b)) => (a - b) * (a - b),
                (ControlValue::Field(a), ControlValue::Field(b)) => {
                    let mut s = 0.0;
                    for i in 0..a.len() {
                        let d = a[i] - b[i];
                        s += self.grid.weight(i) * d * d;
                    }
                    s
                }
                _ => unreachable!("kinds checked in check_compatible"),
            };
            acc += self.tgrid.weight(k) * d_sq;
        }
        Ok(acc.sqrt())
    }

    /// Relaxed mix `(1 - omega)·self + omega·other`.
    pub fn mix(&self, other: &ControlSignal, omega: f64) -> Result<ControlSignal> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| match (a, b) {
                (ControlValue::Scalar(x), ControlValue::Scalar(y)) => {
                    ControlValue::Scalar((1.0 - omega) * x + omega * y)
                }
                (ControlValue::Field(x), ControlValue::Field(y)) => ControlValue::Field(
                    x.iter()
                        .zip(y)
                        .map(|(a, b)| (1.0 - omega) * a + omega * b)
                        .collect(),
                ),
                _ => unreachable!("kinds checked in check_compatible"),
            })
            .collect();
        Ok(ControlSignal {
            tgrid: self.tgrid,
            grid: self.grid,
            values,
        })
    }

    pub fn scale(&self, alpha: f64) -> ControlSignal {
        let values = self
            .values
            .iter()
            .map(|v| match v {
                ControlValue::Scalar(x) => ControlValue::Scalar(alpha * x),
                ControlValue::Field(w) => {
                    ControlValue::Field(w.iter().map(|x| alpha * x).collect())
                }
            })
            .collect();
        ControlSignal {
            tgrid: self.tgrid,
            grid: self.grid,
            values,
        }
    }

    /// `self + alpha·other`.
    pub fn axpy(&self, alpha: f64, other: &ControlSignal) -> Result<ControlSignal> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| match (a, b) {
                (ControlValue::Scalar(x), ControlValue::Scalar(y)) => {
                    ControlValue::Scalar(x + alpha * y)
                }
                (ControlValue::Field(x), ControlValue::Field(y)) => {
                    ControlValue::Field(x.iter().zip(y).map(|(a, b)| a + alpha * b).collect())
                }
                _ => unreachable!("kinds checked in check_compatible"),
            })
            .collect();
        Ok(ControlSignal {
            tgrid: self.tgrid,
            grid: self.grid,
            values,
        })
    }

    /// Trapezoid value of `∫₀ᵗ u(s) ds` at node `k`, scalar controls only.
    pub fn integral_to(&self, k: usize) -> Result<f64> {
        let mut acc = 0.0;
        for j in 0..k {
            match (&self.values[j], &self.values[j + 1]) {
                (ControlValue::Scalar(a), ControlValue::Scalar(b)) => {
                    acc += 0.5 * self.tgrid.dt * (a + b);
                }
                _ => {
                    return Err(Error::Unsupported(
                        "time integral is defined for scalar controls".into(),
                    ))
                }
            }
        }
        Ok(acc)
    }

    fn check_compatible(&self, other: &ControlSignal) -> Result<()> {
        if self.tgrid != other.tgrid
            || self.values.len() != other.values.len()
            || self.space() != other.space()
        {
            return Err(Error::Dimension(
                "control signals live on different grids or spaces".into(),
            ));
        }
        Ok(())
    }
}

/// States (or adjoint states) at every time node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tgrid: TimeGrid,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn state(&self, k: usize) -> &StateVector {
        &self.states[k]
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Midpoint control value over step `k`, `(u_k + u_{k+1})/2`.
fn midpoint(a: &ControlValue, b: &ControlValue) -> ControlValue {
    match (a, b) {
        (ControlValue::Scalar(x), ControlValue::Scalar(y)) => ControlValue::Scalar(0.5 * (x + y)),
        (ControlValue::Field(x), ControlValue::Field(y)) => {
            ControlValue::Field(x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect())
        }
        _ => unreachable!("signal constructors enforce homogeneous kinds"),
    }
}

/// Multiply by `exp(h·u)` pointwise. Scalar controls use one `exp` per call.
fn kick(values: &mut [f64], u: &ControlValue, h: f64) {
    match u {
        ControlValue::Scalar(c) => {
            let factor = (h * c).exp();
            for v in values.iter_mut() {
                *v *= factor;
            }
        }
        ControlValue::Field(w) => {
            for (v, c) in values.iter_mut().zip(w) {
                *v *= (h * c).exp();
            }
        }
    }
}

fn transport_check_dt(grid: &Grid, dt: f64) -> Result<()> {
    if ((dt - grid.dx) / grid.dx).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "transport stepping is an exact shift and requires dt = dx (dt = {dt}, dx = {})",
            grid.dx
        )));
    }
    Ok(())
}

/// Exact right shift with zero inflow: `y_i ← y_{i-1}`, `y_0 ← 0`.
fn shift_right(values: &mut [f64]) {
    let n = values.len();
    values.copy_within(0..n - 1, 1);
    values[0] = 0.0;
}

/// Adjoint of [`shift_right`] in the trapezoid inner product:
/// `p_j ← (w_{j+1}/w_j)·p_{j+1}`, `p_n ← 0`. The weight ratio differs from
/// one only at the two boundary nodes.
fn shift_left_adjoint(values: &mut [f64]) {
    let n = values.len();
    values[0] = 2.0 * values[1];
    for j in 1..n - 2 {
        values[j] = values[j + 1];
    }
    values[n - 2] = 0.5 * values[n - 1];
    values[n - 1] = 0.0;
}

/// Workspace for Crank–Nicolson steps: precomputed elimination
/// coefficients and an RHS buffer.
struct HeatStepper {
    c: f64,
    cp: Vec<f64>,
    rhs: Vec<f64>,
}

impl HeatStepper {
    fn new(grid: &Grid, dt: f64) -> Self {
        let c = 0.5 * dt / (grid.dx * grid.dx);
        let m = grid.n_nodes() - 2; // interior unknowns
        let mut cp = vec![0.0; m];
        let diag = 1.0 + 2.0 * c;
        cp[0] = -c / diag;
        for i in 1..m {
            cp[i] = -c / (diag + c * cp[i - 1]);
        }
        HeatStepper {
            c,
            cp,
            rhs: vec![0.0; m],
        }
    }

    /// One Crank–Nicolson step of `ẏ = Δy` with Dirichlet rows; the matrix
    /// is symmetric, so the same step serves the adjoint equation.
    fn step(&mut self, values: &mut [f64]) {
        let n = values.len();
        let m = n - 2;
        let c = self.c;
        let diag = 1.0 + 2.0 * c;
        // Dirichlet nodes hold zero before the stencil is formed; the step
        // then stays self-adjoint on the interior.
        values[0] = 0.0;
        values[n - 1] = 0.0;
        // rhs = (I + c Δ_h dx²) y on interior nodes
        for i in 0..m {
            let y = values[i + 1];
            self.rhs[i] = y + c * (values[i] - 2.0 * y + values[i + 2]);
        }
        // forward elimination
        self.rhs[0] /= diag;
        for i in 1..m {
            self.rhs[i] = (self.rhs[i] + c * self.rhs[i - 1]) / (diag + c * self.cp[i - 1]);
        }
        // back substitution
        values[m] = self.rhs[m - 1];
        for i in (0..m - 1).rev() {
            values[i + 1] = self.rhs[i] - self.cp[i] * values[i + 2];
        }
        values[0] = 0.0;
        values[n - 1] = 0.0;
    }
}

/// One semigroup step `S(dt)` of the uncontrolled dynamics.
pub fn step_semigroup(model: &SystemModel, y: &StateVector, dt: f64) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if y.grid != model.grid {
        return Err(Error::Dimension("state does not match model grid".into()));
    }
    let mut out = y.clone();
    match model.generator {
        Generator::TransportRightShift => {
            transport_check_dt(&model.grid, dt)?;
            shift_right(&mut out.values);
        }
        Generator::HeatDirichlet => {
            let mut stepper = HeatStepper::new(&model.grid, dt);
            stepper.step(&mut out.values);
        }
    }
    Ok(out)
}

/// One adjoint semigroup step `S(dt)*`.
///
/// Transport: the transpose of the forward shift (a left shift with zero
/// inflow at `x_max`). Heat: Crank–Nicolson is self-adjoint, so the forward
/// step is reused.
pub fn step_semigroup_adjoint(
    model: &SystemModel,
    p: &StateVector,
    dt: f64,
) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if p.grid != model.grid {
        return Err(Error::Dimension("state does not match model grid".into()));
    }
    let mut out = p.clone();
    match model.generator {
        Generator::TransportRightShift => {
            transport_check_dt(&model.grid, dt)?;
            shift_left_adjoint(&mut out.values);
        }
        Generator::HeatDirichlet => {
            let mut stepper = HeatStepper::new(&model.grid, dt);
            stepper.step(&mut out.values);
        }
    }
    Ok(out)
}

fn trapezoid_norm(grid: &Grid, values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += grid.weight(i) * v * v;
    }
    acc.sqrt()
}

fn guard_divergence(grid: &Grid, values: &[f64], step: usize) -> Result<()> {
    let norm = trapezoid_norm(grid, values);
    // NaN fails the comparison too.
    if !(norm <= DIVERGENCE_LIMIT) {
        return Err(Error::Divergence {
            step,
            norm,
            limit: DIVERGENCE_LIMIT,
        });
    }
    Ok(())
}

fn check_forward_inputs(
    model: &SystemModel,
    y0: &StateVector,
    u: &ControlSignal,
    tgrid: &TimeGrid,
) -> Result<()> {
    if y0.grid != model.grid {
        return Err(Error::Dimension(
            "initial state does not match model grid".into(),
        ));
    }
    if u.tgrid != *tgrid {
        return Err(Error::Dimension(
            "control does not match the time grid".into(),
        ));
    }
    model.check_control(&u.values[0])?;
    model.check_boundary(y0)?;
    if model.generator == Generator::TransportRightShift {
        transport_check_dt(&model.grid, tgrid.dt)?;
    }
    Ok(())
}

/// Integrate the controlled system forward; `states[0] = y0`.
pub fn solve_forward(
    model: &SystemModel,
    y0: &StateVector,
    u: &ControlSignal,
    tgrid: &TimeGrid,
) -> Result<Trajectory> {
    check_forward_inputs(model, y0, u, tgrid)?;
    let dt = tgrid.dt;
    let mut heat = match model.generator {
        Generator::HeatDirichlet => Some(HeatStepper::new(&model.grid, dt)),
        Generator::TransportRightShift => None,
    };

    let mut current = y0.clone();
    model.project_boundary(&mut current.values);
    let mut states = Vec::with_capacity(tgrid.n_nodes());
    states.push(current.clone());

    for k in 0..tgrid.n_steps {
        let m = midpoint(&u.values[k], &u.values[k + 1]);
        kick(&mut current.values, &m, 0.5 * dt);
        match (&model.generator, heat.as_mut()) {
            (Generator::TransportRightShift, _) => shift_right(&mut current.values),
            (Generator::HeatDirichlet, Some(stepper)) => stepper.step(&mut current.values),
            _ => unreachable!(),
        }
        kick(&mut current.values, &m, 0.5 * dt);
        guard_divergence(&model.grid, &current.values, k + 1)?;
        states.push(current.clone());
    }

    Ok(Trajectory {
        tgrid: *tgrid,
        states,
    })
}

/// Integrate the adjoint system backward from `φ(T) = 2(y(T) − y_d)`.
///
/// Returns φ at every node. The trajectory must come from [`solve_forward`]
/// with the same control.
pub fn solve_adjoint(
    model: &SystemModel,
    u: &ControlSignal,
    y_traj: &Trajectory,
    y_d: &StateVector,
    eps: f64,
    tgrid: &TimeGrid,
) -> Result<Trajectory> {
    if y_traj.tgrid != *tgrid || u.tgrid != *tgrid {
        return Err(Error::Dimension(
            "trajectory and control must share the time grid".into(),
        ));
    }
    if y_d.grid != model.grid || y_traj.last().grid != model.grid {
        return Err(Error::Dimension(
            "terminal target does not match model grid".into(),
        ));
    }
    if !(eps >= 0.0) {
        return Err(Error::Config(format!(
            "penalty weight must be non-negative, got {eps}"
        )));
    }
    model.check_control(&u.values[0])?;
    if model.generator == Generator::TransportRightShift {
        transport_check_dt(&model.grid, tgrid.dt)?;
    }

    let dt = tgrid.dt;
    let n = tgrid.n_steps;
    let mut heat = match model.generator {
        Generator::HeatDirichlet => Some(HeatStepper::new(&model.grid, dt)),
        Generator::TransportRightShift => None,
    };

    let mut states = vec![StateVector::zeros(model.grid); tgrid.n_nodes()];

    // φ(T) as reported; the running-cost share of the terminal node enters
    // the carried vector only.
    let terminal = y_traj.last().axpy(-1.0, y_d)?.scale(2.0);
    let mut carry = terminal.clone();
    if eps > 0.0 {
        carry = carry.axpy(eps * dt, y_traj.last())?;
    }
    states[n] = terminal;

    for k in (0..n).rev() {
        let m = midpoint(&u.values[k], &u.values[k + 1]);
        kick(&mut carry.values, &m, 0.5 * dt);
        match (&model.generator, heat.as_mut()) {
            (Generator::TransportRightShift, _) => shift_left_adjoint(&mut carry.values),
            (Generator::HeatDirichlet, Some(stepper)) => stepper.step(&mut carry.values),
            _ => unreachable!(),
        }
        kick(&mut carry.values, &m, 0.5 * dt);
        // Each interior node's source weight 2εdt·y_k splits evenly between
        // the two adjacent steps: one half lands in the reported value, the
        // other half rides along when the sweep passes the node. The first
        // node borders a single step and gets no share of its own.
        if eps > 0.0 && k > 0 {
            carry = carry.axpy(eps * dt, y_traj.state(k))?;
        }
        guard_divergence(&model.grid, &carry.values, k)?;
        states[k] = carry.clone();
        if eps > 0.0 && k > 0 {
            carry = carry.axpy(eps * dt, y_traj.state(k))?;
        }
    }

    Ok(Trajectory {
        tgrid: *tgrid,
        states,
    })
}

/// Closed-form state of a commutative scalar-control system at time node `t`:
/// `S(t)·exp(∫₀ᵗ u ds)·y0`, with the integral by trapezoid rule and `S(t)`
/// by composed semigroup steps.
pub fn commutative_closed_form(
    model: &SystemModel,
    y0: &StateVector,
    u: &ControlSignal,
    t: f64,
) -> Result<StateVector> {
    if model.control_space != ControlSpace::Scalar {
        return Err(Error::Unsupported(
            "the commutative closed form requires scalar control".into(),
        ));
    }
    if y0.grid != model.grid {
        return Err(Error::Dimension(
            "initial state does not match model grid".into(),
        ));
    }
    let dt = u.tgrid.dt;
    let k_real = t / dt;
    let k = k_real.round() as usize;
    if k > u.tgrid.n_steps || (t - k as f64 * dt).abs() > 1e-9 * dt.max(1.0) {
        return Err(Error::Config(format!(
            "t = {t} is not a node of the time grid"
        )));
    }
    if model.generator == Generator::TransportRightShift {
        transport_check_dt(&model.grid, dt)?;
    }

    let w = u.integral_to(k)?;
    let mut out = y0.clone();
    model.project_boundary(&mut out.values);
    let mut heat = match model.generator {
        Generator::HeatDirichlet => Some(HeatStepper::new(&model.grid, dt)),
        Generator::TransportRightShift => None,
    };
    for _ in 0..k {
        match (&model.generator, heat.as_mut()) {
            (Generator::TransportRightShift, _) => shift_right(&mut out.values),
            (Generator::HeatDirichlet, Some(stepper)) => stepper.step(&mut out.values),
            _ => unreachable!(),
        }
    }
    Ok(out.scale(w.exp()))
}

/// Quadratic cost `J(u) = ∫‖y‖² dt + (r/2)∫‖u‖²_U dt`, trapezoid in time.
pub fn cost_j(u: &ControlSignal, y_traj: &Trajectory, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Config(format!(
            "control weight r must be positive, got {r}"
        )));
    }
    if u.tgrid != y_traj.tgrid {
        return Err(Error::Dimension(
            "control and trajectory time grids differ".into(),
        ));
    }
    let mut state_term = 0.0;
    let mut control_term = 0.0;
    for k in 0..u.tgrid.n_nodes() {
        let tau = u.tgrid.weight(k);
        let y = y_traj.state(k);
        state_term += tau * trapezoid_norm(&y.grid, &y.values).powi(2);
        control_term += tau * u.values[k].norm_sq(&u.grid);
    }
    Ok(state_term + 0.5 * r * control_term)
}

/// Penalized cost `J_ε(u) = ‖y(T) − y_d‖² + ε·J(u)`.
pub fn cost_j_eps(
    u: &ControlSignal,
    y_traj: &Trajectory,
    y_d: &StateVector,
    eps: f64,
    r: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!(
            "penalty weight must be positive, got {eps}"
        )));
    }
    let gap = endpoint_residual(y_traj, y_d)?;
    Ok(gap * gap + eps * cost_j(u, y_traj, r)?)
}

/// Endpoint gap `‖y(T) − y_d‖` in the grid norm.
pub fn endpoint_residual(y_traj: &Trajectory, y_d: &StateVector) -> Result<f64> {
    let diff = y_traj.last().axpy(-1.0, y_d)?;
    Ok(diff.norm())
}
