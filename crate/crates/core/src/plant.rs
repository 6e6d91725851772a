//! Plant models: the abstract Euler-Lagrange form and the nonholonomic
//! mobile robot with hand-point transformation.
//!
//! The engine integrates any [`Plant`]: a state-space system whose output is
//! the vector the constraints and the controller act on. The mobile robot is
//! integrated in its native `(p_c, psi)` coordinates and exposes the hand
//! point `p` and its velocity through the transform; the transformed
//! Euler-Lagrange form in `(p, p_dot)` coordinates exists only in the
//! cross-check tests.

use serde::{Deserialize, Serialize};

use crate::signals::TimeSignal;

/// A simulable plant: internal state plus an output map to the constrained
/// coordinates. `u` is expressed in output coordinates.
pub trait Plant {
    /// Number of constrained outputs.
    fn n_outputs(&self) -> usize;
    /// Internal state dimension.
    fn state_dim(&self) -> usize;
    /// Output position and velocity `(x, v)` as functions of the state.
    fn output(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>);
    /// State derivative under control `u` (output coordinates).
    fn derivative(&self, t: f64, state: &[f64], u: &[f64]) -> Vec<f64>;
}

/// Euler-Lagrange system given by its matrix callables. The acceleration is
/// `v_dot = M(x)^-1 (-C(x,v)v - g(x) - D(x)v + u + d(t))`.
pub trait EulerLagrange {
    fn dim(&self) -> usize;
    /// Inertia matrix, symmetric positive definite.
    fn mass(&self, x: &[f64]) -> Vec<Vec<f64>>;
    fn coriolis(&self, x: &[f64], v: &[f64]) -> Vec<Vec<f64>>;
    fn gravity(&self, x: &[f64]) -> Vec<f64>;
    fn damping(&self, x: &[f64]) -> Vec<Vec<f64>>;
    fn disturbance(&self, t: f64) -> Vec<f64>;
}

/// Solve `A z = b` by Gaussian elimination with partial pivoting. Dimensions
/// here are tiny (2 for the robot), so this is plenty.
pub fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let diag = m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / diag;
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * z[k];
        }
        z[row] = acc / m[row][row];
    }
    z
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(aij, vj)| aij * vj).sum()).collect()
}

/// Acceleration of an Euler-Lagrange system.
pub fn el_accel(plant: &dyn EulerLagrange, t: f64, x: &[f64], v: &[f64], u: &[f64]) -> Vec<f64> {
    let mass = plant.mass(x);
    let cv = mat_vec(&plant.coriolis(x, v), v);
    let dv = mat_vec(&plant.damping(x), v);
    let g = plant.gravity(x);
    let d = plant.disturbance(t);
    let rhs: Vec<f64> =
        (0..plant.dim()).map(|i| -cv[i] - g[i] - dv[i] + u[i] + d[i]).collect();
    solve_linear(&mass, &rhs)
}

/// Adapter exposing an [`EulerLagrange`] system as a [`Plant`] with state
/// `[x; v]`.
pub struct ElStatePlant<P: EulerLagrange>(pub P);

impl<P: EulerLagrange> Plant for ElStatePlant<P> {
    fn n_outputs(&self) -> usize {
        self.0.dim()
    }

    fn state_dim(&self) -> usize {
        2 * self.0.dim()
    }

    fn output(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.0.dim();
        (state[..n].to_vec(), state[n..].to_vec())
    }

    fn derivative(&self, t: f64, state: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.0.dim();
        let (x, v) = (&state[..n], &state[n..]);
        let vdot = el_accel(&self.0, t, x, v, u);
        let mut out = v.to_vec();
        out.extend(vdot);
        out
    }
}

/// `n`-dimensional double integrator, the simplest probe plant:
/// `x_dot = v`, `v_dot = u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoubleIntegrator {
    pub n: usize,
}

impl Plant for DoubleIntegrator {
    fn n_outputs(&self) -> usize {
        self.n
    }

    fn state_dim(&self) -> usize {
        2 * self.n
    }

    fn output(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (state[..self.n].to_vec(), state[self.n..].to_vec())
    }

    fn derivative(&self, _t: f64, state: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = state[self.n..].to_vec();
        out.extend_from_slice(u);
        out
    }
}

/// Planar nonholonomic mobile robot.
///
/// Native state is `[x_c, y_c, theta, v_t, omega]`: body-frame pose plus
/// translational and angular speed. The constrained output is the hand point
/// `p = [x_c, y_c] + L·[cos theta, sin theta]`, whose offset `L > 0` removes
/// the nonholonomic constraint from the output dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileRobot {
    /// Mass in kg.
    pub mass: f64,
    /// Moment of inertia about the vertical axis, kg·m².
    pub inertia: f64,
    /// Constant damping matrix on `psi = [v_t, omega]`.
    pub damping: [[f64; 2]; 2],
    /// Hand offset L along the heading, m, strictly positive.
    pub hand_offset: f64,
    /// Disturbances on the `psi` channels.
    pub disturbance: Vec<TimeSignal>,
}

impl MobileRobot {
    /// Hand position for a body pose `(x_c, y_c, theta)`.
    pub fn hand_position(&self, pose: &[f64]) -> [f64; 2] {
        let (xc, yc, theta) = (pose[0], pose[1], pose[2]);
        [xc + self.hand_offset * theta.cos(), yc + self.hand_offset * theta.sin()]
    }

    /// Jacobian `J(theta)` of the hand point with respect to `psi`, so that
    /// `p_dot = J(theta)·psi`. `det J = L` for every heading.
    pub fn jacobian(&self, theta: f64) -> [[f64; 2]; 2] {
        let (s, c) = theta.sin_cos();
        let l = self.hand_offset;
        [[c, -l * s], [s, l * c]]
    }

    /// Derivative of the Jacobian with respect to `theta`.
    pub fn jacobian_dtheta(&self, theta: f64) -> [[f64; 2]; 2] {
        let (s, c) = theta.sin_cos();
        let l = self.hand_offset;
        [[-s, -l * c], [c, -l * s]]
    }

    /// Map hand-point forces back to body coordinates: `u_bar = J(theta)^T u`.
    pub fn input_back_transform(&self, u: &[f64], theta: f64) -> [f64; 2] {
        let j = self.jacobian(theta);
        [j[0][0] * u[0] + j[1][0] * u[1], j[0][1] * u[0] + j[1][1] * u[1]]
    }

    /// Disturbance vector on the `psi` channels at time `t`.
    pub fn disturbance_at(&self, t: f64) -> [f64; 2] {
        [self.disturbance[0].value(t), self.disturbance[1].value(t)]
    }

    /// Body pose giving the requested hand position and heading.
    pub fn pose_for_hand(&self, hand: [f64; 2], theta: f64) -> [f64; 3] {
        [
            hand[0] - self.hand_offset * theta.cos(),
            hand[1] - self.hand_offset * theta.sin(),
            theta,
        ]
    }
}

impl Plant for MobileRobot {
    fn n_outputs(&self) -> usize {
        2
    }

    fn state_dim(&self) -> usize {
        5
    }

    fn output(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let theta = state[2];
        let psi = [state[3], state[4]];
        let p = self.hand_position(state);
        let j = self.jacobian(theta);
        let v = [
            j[0][0] * psi[0] + j[0][1] * psi[1],
            j[1][0] * psi[0] + j[1][1] * psi[1],
        ];
        (p.to_vec(), v.to_vec())
    }

    fn derivative(&self, t: f64, state: &[f64], u: &[f64]) -> Vec<f64> {
        let theta = state[2];
        let psi = [state[3], state[4]];
        let u_bar = self.input_back_transform(u, theta);
        let d_bar = self.disturbance_at(t);
        let damp = [
            self.damping[0][0] * psi[0] + self.damping[0][1] * psi[1],
            self.damping[1][0] * psi[0] + self.damping[1][1] * psi[1],
        ];
        let (s, c) = theta.sin_cos();
        vec![
            psi[0] * c,
            psi[0] * s,
            psi[1],
            (u_bar[0] + d_bar[0] - damp[0]) / self.mass,
            (u_bar[1] + d_bar[1] - damp[1]) / self.inertia,
        ]
    }
}
