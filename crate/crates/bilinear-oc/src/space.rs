//! Discrete state space, control space, and the bilinear control operator.
//!
//! States are nodal values on a uniform 1-D grid; the inner product is the
//! trapezoid rule, so `inner(a, b)` approximates `∫ a(x) b(x) dx`. Controls
//! are either scalars (one real number per time node) or fields (one nodal
//! vector per time node). The control operator is the multiplication form
//! `B(u, y) = u · y`, together with its two partial adjoints: one in the
//! state slot, one in the control slot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[x_min, x_max]` with `n_cells` cells and `n_cells + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 cells, got {n_cells}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Config(format!(
                "grid interval [{x_min}, {x_max}] is empty or not finite"
            )));
        }
        let dx = (x_max - x_min) / n_cells as f64;
        Ok(Grid {
            x_min,
            x_max,
            n_cells,
            dx,
        })
    }

    /// Number of nodes, `n_cells + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    /// Coordinate of node `i`.
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Trapezoid quadrature weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_cells {
            0.5 * self.dx
        } else {
            self.dx
        }
    }
}

/// Nodal values of a state on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl StateVector {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Dimension(format!(
                "state has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("state contains non-finite values".into()));
        }
        Ok(StateVector { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        StateVector {
            grid,
            values: vec![0.0; grid.n_nodes()],
        }
    }

    /// Sample `f` at every node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|i| f(grid.node(i))).collect();
        StateVector { grid, values }
    }

    /// Trapezoid norm `sqrt(inner(self, self))`.
    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            acc += self.grid.weight(i) * v * v;
        }
        acc.sqrt()
    }

    /// `self + alpha * other`, on the same grid.
    pub fn axpy(&self, alpha: f64, other: &StateVector) -> Result<StateVector> {
        check_same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(StateVector {
            grid: self.grid,
            values,
        })
    }

    pub fn scale(&self, alpha: f64) -> StateVector {
        StateVector {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }
}

fn check_same_grid(a: &StateVector, b: &StateVector) -> Result<()> {
    if a.grid != b.grid || a.values.len() != b.values.len() {
        return Err(Error::Dimension(
            "states live on different grids".to_string(),
        ));
    }
    Ok(())
}

/// Trapezoid approximation of `∫ a(x) b(x) dx`.
///
/// Symmetric and bilinear; the grid weights make it an inner product on
/// nodal vectors.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<f64> {
    check_same_grid(a, b)?;
    let mut acc = 0.0;
    for i in 0..a.values.len() {
        // Pairing the nodal product first keeps the sum exactly symmetric.
        acc += a.grid.weight(i) * (a.values[i] * b.values[i]);
    }
    Ok(acc)
}

/// A control value at one time node: a scalar or a nodal field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControlValue {
    Scalar(f64),
    Field(Vec<f64>),
}

impl ControlValue {
    pub fn space(&self) -> ControlSpace {
        match self {
            ControlValue::Scalar(_) => ControlSpace::Scalar,
            ControlValue::Field(_) => ControlSpace::Distributed,
        }
    }

    /// Squared norm in the control space: `u²` for scalars, the trapezoid
    /// norm for fields.
    pub fn norm_sq(&self, grid: &Grid) -> f64 {
        match self {
            ControlValue::Scalar(u) => u * u,
            ControlValue::Field(w) => {
                let mut acc = 0.0;
                for (i, v) in w.iter().enumerate() {
                    acc += grid.weight(i) * v * v;
                }
                acc
            }
        }
    }

    /// Control-space inner product of two values of the same kind.
    pub fn dot(&self, other: &ControlValue, grid: &Grid) -> Result<f64> {
        match (self, other) {
            (ControlValue::Scalar(a), ControlValue::Scalar(b)) => Ok(a * b),
            (ControlValue::Field(a), ControlValue::Field(b)) => {
                if a.len() != b.len() {
                    return Err(Error::Dimension(
                        "control fields have different lengths".into(),
                    ));
                }
                let mut acc = 0.0;
                for i in 0..a.len() {
                    acc += grid.weight(i) * a[i] * b[i];
                }
                Ok(acc)
            }
            _ => Err(Error::Dimension(
                "cannot pair a scalar control with a field control".into(),
            )),
        }
    }
}

/// Which uncontrolled dynamics the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    /// `ẏ = -∂y/∂x` on `(x_min, x_max)` with zero inflow at `x_min`;
    /// stepped as an exact one-node right shift (requires `dt = dx`).
    TransportRightShift,
    /// `ẏ = Δy` with homogeneous Dirichlet conditions at both ends;
    /// stepped by Crank–Nicolson.
    HeatDirichlet,
}

/// Which control space the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlSpace {
    /// `U = ℝ`: one scalar per time node.
    Scalar,
    /// `U = L²`: one nodal field per time node.
    Distributed,
}

/// Generator, control space, and grid of one evolution system
/// `ẏ = Ay + B(u, y)` with `B(u, y) = u · y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub generator: Generator,
    pub control_space: ControlSpace,
    pub grid: Grid,
}

impl SystemModel {
    pub fn new(generator: Generator, control_space: ControlSpace, grid: Grid) -> Self {
        SystemModel {
            generator,
            control_space,
            grid,
        }
    }

    /// Check that a control value matches the model's control space and,
    /// for fields, the grid size.
    pub fn check_control(&self, u: &ControlValue) -> Result<()> {
        match (self.control_space, u) {
            (ControlSpace::Scalar, ControlValue::Scalar(_)) => Ok(()),
            (ControlSpace::Distributed, ControlValue::Field(w)) => {
                if w.len() != self.grid.n_nodes() {
                    Err(Error::Dimension(format!(
                        "control field has {} nodes, grid has {}",
                        w.len(),
                        self.grid.n_nodes()
                    )))
                } else {
                    Ok(())
                }
            }
            (ControlSpace::Scalar, ControlValue::Field(_)) => Err(Error::Config(
                "model uses scalar control but got a field value".into(),
            )),
            (ControlSpace::Distributed, ControlValue::Scalar(_)) => Err(Error::Config(
                "model uses distributed control but got a scalar value".into(),
            )),
        }
    }

    /// Zero out boundary nodes the generator keeps at zero.
    pub fn project_boundary(&self, values: &mut [f64]) {
        match self.generator {
            Generator::TransportRightShift => values[0] = 0.0,
            Generator::HeatDirichlet => {
                values[0] = 0.0;
                let last = values.len() - 1;
                values[last] = 0.0;
            }
        }
    }

    /// Error unless `y` already satisfies the boundary conditions (up to
    /// rounding in sampled initial data).
    pub fn check_boundary(&self, y: &StateVector) -> Result<()> {
        let scale = 1e-10 * (1.0 + y.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let bad = |v: f64| v.abs() > scale;
        let violated = match self.generator {
            Generator::TransportRightShift => bad(y.values[0]),
            Generator::HeatDirichlet => bad(y.values[0]) || bad(*y.values.last().unwrap()),
        };
        if violated {
            return Err(Error::Config(
                "state violates the model's homogeneous boundary conditions".into(),
            ));
        }
        Ok(())
    }
}

/// Apply the bilinear control operator: `B(u, y) = u · y` pointwise.
pub fn bilinear_apply(
    model: &SystemModel,
    u: &ControlValue,
    y: &StateVector,
) -> Result<StateVector> {
    model.check_control(u)?;
    if y.values.len() != model.grid.n_nodes() {
        return Err(Error::Dimension("state does not match model grid".into()));
    }
    let values = match u {
        ControlValue::Scalar(c) => y.values.iter().map(|v| c * v).collect(),
        ControlValue::Field(w) => y.values.iter().zip(w).map(|(v, c)| c * v).collect(),
    };
    Ok(StateVector {
        grid: y.grid,
        values,
    })
}

/// Adjoint of `y ↦ B(u, y)` applied to `p`.
///
/// Multiplication operators are self-adjoint in the state slot, so this
/// equals `B(u, p)`; it satisfies `inner(B(u,y), p) = inner(y, B*(u,p))`.
pub fn bilinear_adjoint_state(
    model: &SystemModel,
    u: &ControlValue,
    p: &StateVector,
) -> Result<StateVector> {
    bilinear_apply(model, u, p)
}

/// Adjoint of `u ↦ B(u, y)` applied to `p`: the control-space element with
/// `⟨B(u,y), p⟩_X = ⟨u, B(·,y)*p⟩_U` for every `u`.
///
/// Scalar control: the real number `inner(y, p)`. Distributed control: the
/// nodal product `x ↦ y(x) p(x)`.
pub fn bilinear_adjoint_control(
    model: &SystemModel,
    y: &StateVector,
    p: &StateVector,
) -> Result<ControlValue> {
    check_same_grid(y, p)?;
    match model.control_space {
        ControlSpace::Scalar => Ok(ControlValue::Scalar(inner(y, p)?)),
        ControlSpace::Distributed => Ok(ControlValue::Field(
            y.values.iter().zip(&p.values).map(|(a, b)| a * b).collect(),
        )),
    }
}
