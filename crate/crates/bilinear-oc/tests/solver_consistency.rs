//! The continuation solver and the feedback fixed point approximate the
//! same optimal control; this suite checks that the two routes agree on the
//! transport benchmark and that the feedback formula evaluated on the
//! continuation trajectory reproduces the continuation control.

use bilinear_oc::continuation::{solve_constrained, ContinuationConfig};
use bilinear_oc::dynamics::{endpoint_residual, solve_forward, ControlSignal, TimeGrid};
use bilinear_oc::feedback::{feedback_formula, solve_feedback, FeedbackConfig};
use bilinear_oc::penalty::PenaltyConfig;
use bilinear_oc::space::{ControlSpace, Generator, Grid, StateVector, SystemModel};

/// Transport benchmark at half resolution (dx = dt = 0.02), which keeps the
/// cross-check fast while using the same continuous problem.
fn setup() -> (SystemModel, StateVector, StateVector, TimeGrid) {
    let grid = Grid::new(0.0, 30.0, 1500).unwrap();
    let model = SystemModel::new(Generator::TransportRightShift, ControlSpace::Scalar, grid);
    let tgrid = TimeGrid::new(9.0, 450).unwrap();
    let y0 = StateVector::from_fn(grid, |x| x * (-x).exp());
    let y_d = StateVector::from_fn(grid, |x| {
        if x >= 9.0 {
            (x - 9.0) * (9.0 - x).exp()
        } else {
            0.0
        }
    });
    (model, y0, y_d, tgrid)
}

#[test]
fn feedback_and_continuation_agree_on_transport() {
    let (model, y0, y_d, tgrid) = setup();
    let r = 2.0;

    let mut inner = PenaltyConfig::new(1.0, r);
    inner.fixed_point_tol = 1e-6;
    inner.max_iters = 400;
    let ccfg = ContinuationConfig {
        eps_start: 1.0,
        decay_rho: 0.3,
        n_stages: 12,
        inner,
        endpoint_tol: 2e-4,
    };
    let (u_cont, report) = solve_constrained(&model, &y0, &y_d, &tgrid, &ccfg).unwrap();
    assert!(report.attained);

    let v = ControlSignal::zeros(tgrid, model.grid, ControlSpace::Scalar);
    let mut fcfg = FeedbackConfig::new(v.clone(), r);
    fcfg.tol = 1e-9;
    fcfg.max_outer_iters = 500;
    let (u_fb, y_fb, fb_report) = solve_feedback(&model, &y0, &fcfg).unwrap();
    assert!(fb_report.converged);

    // Mean preservation at the fixed point.
    let mean = u_fb.integral_to(tgrid.n_steps).unwrap();
    assert!(mean.abs() <= 1e-3 * (1.0 + 0.0), "∫u* = {mean}");

    // Terminal attainability of the feedback trajectory.
    let gap = endpoint_residual(&y_fb, &y_d).unwrap();
    assert!(gap <= 1e-2 * y_d.norm(), "feedback endpoint gap {gap}");

    // The two solvers produce the same control to a few percent.
    let diff = u_cont.l2_distance(&u_fb).unwrap();
    let rel = diff / u_fb.l2_norm();
    assert!(
        rel <= 0.05,
        "continuation vs feedback controls differ by {rel:.3}"
    );

    // Evaluating the formula on the continuation trajectory also lands on
    // the continuation control.
    let y_cont = solve_forward(&model, &y0, &u_cont, &tgrid).unwrap();
    let formula_on_cont = feedback_formula(&y_cont, &v, r).unwrap();
    let rel_formula = formula_on_cont.l2_distance(&u_cont).unwrap() / u_cont.l2_norm();
    assert!(
        rel_formula <= 0.05,
        "formula on the continuation trajectory differs by {rel_formula:.3}"
    );
}
