//! Shared helpers for integration tests: an independently derived
//! transformed-coordinate robot model and a small open-loop integrator.

use ccf_core::plant::{solve_linear, MobileRobot, Plant};

pub type Mat2 = [[f64; 2]; 2];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat_transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn mat_inv(a: &Mat2) -> Mat2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

pub fn mat_vec2(a: &Mat2, v: &[f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn mat_scale(a: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

fn mat_add(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

/// The same robot expressed directly in hand-point coordinates, derived
/// independently through the coordinate change: with `p_dot = J(theta)·psi`,
/// the body-frame equations `Mbar·psi_dot + Dbar·psi = J^T u + dbar` become
///
/// `M(theta)·p_ddot + (C + D)(theta, theta_dot)·p_dot = u + J^-T dbar`
///
/// with `M = J^-T Mbar J^-1`, `C = -J^-T Mbar J^-1 Jdot J^-1`,
/// `D = J^-T Dbar J^-1`. The heading is carried along as an internal state
/// driven by `theta_dot = (J^-1 p_dot)_2`.
///
/// State layout: `[p1, p2, pd1, pd2, theta]`.
pub struct TransformedRobot(pub MobileRobot);

impl Plant for TransformedRobot {
    fn n_outputs(&self) -> usize {
        2
    }

    fn state_dim(&self) -> usize {
        5
    }

    fn output(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (state[..2].to_vec(), state[2..4].to_vec())
    }

    fn derivative(&self, t: f64, state: &[f64], u: &[f64]) -> Vec<f64> {
        let r = &self.0;
        let pd = [state[2], state[3]];
        let theta = state[4];
        let j = r.jacobian(theta);
        let j_inv = mat_inv(&j);
        let j_inv_t = mat_transpose(&j_inv);
        let psi = mat_vec2(&j_inv, &pd);
        let theta_dot = psi[1];
        let j_dot = mat_scale(&r.jacobian_dtheta(theta), theta_dot);

        let m_bar = [[r.mass, 0.0], [0.0, r.inertia]];
        let m = mat_mul(&j_inv_t, &mat_mul(&m_bar, &j_inv));
        let c = mat_scale(
            &mat_mul(&j_inv_t, &mat_mul(&m_bar, &mat_mul(&j_inv, &mat_mul(&j_dot, &j_inv)))),
            -1.0,
        );
        let d = mat_mul(&j_inv_t, &mat_mul(&r.damping, &j_inv));
        let dist = mat_vec2(&j_inv_t, &r.disturbance_at(t));

        let cd_pd = mat_vec2(&mat_add(&c, &d), &pd);
        let rhs = [u[0] + dist[0] - cd_pd[0], u[1] + dist[1] - cd_pd[1]];
        let pdd = solve_linear(&[m[0].to_vec(), m[1].to_vec()], &rhs);
        vec![pd[0], pd[1], pdd[0], pdd[1], theta_dot]
    }
}

/// RK4 integration of a plant under a time-driven input, recording the
/// output at every step.
pub fn open_loop_rk4<F>(
    plant: &dyn Plant,
    initial: &[f64],
    input: F,
    h: f64,
    t_end: f64,
) -> Vec<(f64, Vec<f64>, Vec<f64>)>
where
    F: Fn(f64) -> Vec<f64>,
{
    let axpy = |y: &[f64], d: &[f64], s: f64| -> Vec<f64> {
        y.iter().zip(d).map(|(yi, di)| yi + s * di).collect()
    };
    let mut y = initial.to_vec();
    let steps = (t_end / h).round() as usize;
    let mut log = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * h;
        let (x, v) = plant.output(&y);
        log.push((t, x, v));
        if k == steps {
            break;
        }
        let k1 = plant.derivative(t, &y, &input(t));
        let k2 = plant.derivative(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h), &input(t + 0.5 * h));
        let k3 = plant.derivative(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h), &input(t + 0.5 * h));
        let k4 = plant.derivative(t + h, &axpy(&y, &k3, h), &input(t + h));
        y = y
            .iter()
            .enumerate()
            .map(|(i, yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
    }
    log
}

/// The bundled robot with its published disturbances.
pub fn scenario_robot() -> MobileRobot {
    use ccf_core::scenario::{BuiltPlant, Scenario};
    let built = Scenario::robot_kc3().build().expect("bundled scenario builds");
    match built.plant {
        BuiltPlant::MobileRobot(robot) => robot,
        _ => unreachable!("bundled scenario uses the mobile robot"),
    }
}
