//! Two-step low-complexity prescribed-performance controller.
//!
//! Step I maps each output, normalized with respect to its planned funnel,
//! through the logarithmic barrier transform and produces a reference
//! velocity. Step II does the same for the velocity error inside a symmetric
//! exponentially narrowing envelope and produces the control input. Both
//! steps are static feedback laws: no plant parameters, no internal state.

use serde::{Deserialize, Serialize};

use crate::fault::{ComponentFault, FaultKind};
use crate::signals::TimeSignal;

/// Normalized values within this distance of ±1 raise a fault instead of
/// evaluating the barrier transform near its pole.
pub const DELTA_EDGE: f64 = 1e-9;

/// Gains and velocity-error envelopes for the two-step controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Step-I gain on the transformed output error.
    pub k_x: f64,
    /// Step-II gain on the transformed velocity error.
    pub k_v: f64,
    /// Velocity-error envelopes, one per output, positive for all t >= 0.
    pub gamma_v: Vec<TimeSignal>,
}

/// Everything the controller computes in one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerOutput {
    /// Reference velocities from Step I.
    pub v_d: Vec<f64>,
    /// Velocity errors `v - v_d`.
    pub e_v: Vec<f64>,
    /// Control inputs (generalized forces) from Step II.
    pub u: Vec<f64>,
    /// Normalized outputs, each strictly in (-1, 1).
    pub x_hat: Vec<f64>,
    /// Normalized velocity errors, each strictly in (-1, 1).
    pub ev_hat: Vec<f64>,
    /// Transformed outputs `T(x_hat)`.
    pub eps_x: Vec<f64>,
    /// Transformed velocity errors `T(ev_hat)`.
    pub eps_v: Vec<f64>,
}

/// Normalize `x` with respect to the asymmetric funnel `(rho_lower, rho_upper)`:
/// returns `(x - center) / half_width`, in (-1, 1) iff `x` is inside.
pub fn normalize_output(x: f64, rho_lower: f64, rho_upper: f64) -> Result<f64, FaultKind> {
    let xhat = (x - 0.5 * (rho_upper + rho_lower)) / (0.5 * (rho_upper - rho_lower));
    if xhat.abs() >= 1.0 - DELTA_EDGE {
        return Err(FaultKind::FunnelViolation { xhat });
    }
    Ok(xhat)
}

/// Logarithmic barrier transform `T(z) = ln((1+z)/(1-z))`, a strictly
/// increasing odd bijection from (-1, 1) onto the reals.
pub fn transform(z: f64) -> Result<f64, FaultKind> {
    if z.abs() >= 1.0 {
        return Err(FaultKind::TransformDomain { z });
    }
    Ok(((1.0 + z) / (1.0 - z)).ln())
}

/// Inverse of [`transform`]: `(e^w - 1)/(e^w + 1)`.
pub fn inverse_transform(w: f64) -> f64 {
    // Written as tanh(w/2) for symmetry and overflow safety.
    (0.5 * w).tanh()
}

/// Step I: reference velocity `v_d = -k_x · xi_x · T(x_hat)` componentwise,
/// with `xi_x = 4 / ((rho_upper - rho_lower)(1 - x_hat^2))`.
pub fn velocity_reference(
    x: &[f64],
    rho_lower: &[f64],
    rho_upper: &[f64],
    k_x: f64,
) -> Result<Vec<f64>, ComponentFault> {
    x.iter()
        .zip(rho_lower.iter().zip(rho_upper))
        .enumerate()
        .map(|(i, (&xi, (&lo, &up)))| {
            let xhat = normalize_output(xi, lo, up).map_err(|k| ComponentFault::new(i, k))?;
            let xi_x = 4.0 / ((up - lo) * (1.0 - xhat * xhat));
            let eps = transform(xhat).map_err(|k| ComponentFault::new(i, k))?;
            Ok(-k_x * xi_x * eps)
        })
        .collect()
}

/// Step II: control input `u = -k_v · xi_v · T(ev_hat)` componentwise, with
/// `ev_hat = e_v / gamma_v` and `xi_v = 2 / (gamma_v (1 - ev_hat^2))`.
pub fn control_input(e_v: &[f64], gamma_v: &[f64], k_v: f64) -> Result<Vec<f64>, ComponentFault> {
    e_v.iter()
        .zip(gamma_v)
        .enumerate()
        .map(|(i, (&ev, &gamma))| {
            let evhat = ev / gamma;
            if evhat.abs() >= 1.0 - DELTA_EDGE {
                return Err(ComponentFault::new(i, FaultKind::VelocityFunnelViolation { evhat }));
            }
            let xi_v = 2.0 / (gamma * (1.0 - evhat * evhat));
            let eps = transform(evhat).map_err(|k| ComponentFault::new(i, k))?;
            Ok(-k_v * xi_v * eps)
        })
        .collect()
}

/// Full controller evaluation at one instant.
///
/// Pure function of `(t, x, v)` and the planner bounds at the same `t`; it
/// reads no plant parameters, which is what makes the design model-free.
pub fn controller_step(
    t: f64,
    x: &[f64],
    v: &[f64],
    rho_lower: &[f64],
    rho_upper: &[f64],
    cfg: &ControllerConfig,
) -> Result<ControllerOutput, ComponentFault> {
    let n = x.len();
    let mut x_hat = Vec::with_capacity(n);
    let mut eps_x = Vec::with_capacity(n);
    let mut v_d = Vec::with_capacity(n);
    for i in 0..n {
        let xhat = normalize_output(x[i], rho_lower[i], rho_upper[i])
            .map_err(|k| ComponentFault::new(i, k))?;
        let xi_x = 4.0 / ((rho_upper[i] - rho_lower[i]) * (1.0 - xhat * xhat));
        let eps = transform(xhat).map_err(|k| ComponentFault::new(i, k))?;
        x_hat.push(xhat);
        eps_x.push(eps);
        v_d.push(-cfg.k_x * xi_x * eps);
    }

    let e_v: Vec<f64> = v.iter().zip(&v_d).map(|(vi, vdi)| vi - vdi).collect();
    let mut ev_hat = Vec::with_capacity(n);
    let mut eps_v = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for i in 0..n {
        let gamma = cfg.gamma_v[i].value(t);
        let evhat = e_v[i] / gamma;
        if evhat.abs() >= 1.0 - DELTA_EDGE {
            return Err(ComponentFault::new(i, FaultKind::VelocityFunnelViolation { evhat }));
        }
        let xi_v = 2.0 / (gamma * (1.0 - evhat * evhat));
        let eps = transform(evhat).map_err(|k| ComponentFault::new(i, k))?;
        ev_hat.push(evhat);
        eps_v.push(eps);
        u.push(-cfg.k_v * xi_v * eps);
    }

    Ok(ControllerOutput { v_d, e_v, u, x_hat, ev_hat, eps_x, eps_v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_midpoint_and_interior() {
        assert_eq!(normalize_output(1.0, -1.0, 3.0).unwrap(), 0.0);
        assert_eq!(normalize_output(2.0, -1.0, 3.0).unwrap(), 0.5);
    }

    #[test]
    fn normalize_boundary_faults() {
        // x = rho_upper maps to 1, which is out of the open interval.
        let err = normalize_output(3.0, -1.0, 3.0).unwrap_err();
        match err {
            FaultKind::FunnelViolation { xhat } => assert_eq!(xhat, 1.0),
            other => panic!("unexpected fault {other:?}"),
        }
    }

    #[test]
    fn transform_is_odd_with_known_values() {
        assert_eq!(transform(0.0).unwrap(), 0.0);
        assert!((transform(0.5).unwrap() - 3.0f64.ln()).abs() < 1e-15);
        assert!((transform(-0.5).unwrap() + 3.0f64.ln()).abs() < 1e-15);
        assert!(transform(1.0).is_err());
        assert!(transform(-1.2).is_err());
    }

    #[test]
    fn velocity_reference_known_value() {
        // rho = (-1, 1), x = 0.5, k_x = 0.2: xi_x = 8/3, eps = ln 3
        let vd = velocity_reference(&[0.5], &[-1.0], &[1.0], 0.2).unwrap();
        let expect = -0.2 * (8.0 / 3.0) * 3.0f64.ln();
        assert!((vd[0] - expect).abs() < 1e-12);
        assert!((vd[0] - (-0.5859)).abs() < 1e-4);
    }

    #[test]
    fn velocity_reference_zero_at_midpoint() {
        let vd = velocity_reference(&[1.0, -2.0], &[-1.0, -3.0], &[3.0, -1.0], 0.2).unwrap();
        assert_eq!(vd, vec![0.0, 0.0]);
    }

    #[test]
    fn velocity_reference_grows_toward_edge() {
        let mut last = 0.0;
        for xhat in [0.9, 0.99, 0.999] {
            let vd = velocity_reference(&[xhat], &[-1.0], &[1.0], 0.2).unwrap();
            assert!(vd[0].abs() > last, "barrier must grow: {} vs {last}", vd[0].abs());
            last = vd[0].abs();
        }
    }

    #[test]
    fn control_input_known_value() {
        let u = control_input(&[1.0], &[2.0], 3.0).unwrap();
        let expect = -3.0 * (4.0 / 3.0) * 3.0f64.ln();
        assert!((u[0] - expect).abs() < 1e-12);
        assert!((u[0] - (-4.394)).abs() < 1e-3);
        // sign symmetry
        let u_neg = control_input(&[-1.0], &[2.0], 3.0).unwrap();
        assert!((u_neg[0] + u[0]).abs() < 1e-12);
    }

    #[test]
    fn control_input_zero_error() {
        let u = control_input(&[0.0, 0.0], &[2.0, 1.0], 3.0).unwrap();
        assert_eq!(u, vec![0.0, 0.0]);
    }

    #[test]
    fn control_input_faults_outside_envelope() {
        let err = control_input(&[2.5], &[2.0], 3.0).unwrap_err();
        assert_eq!(err.index, 0);
        assert!(matches!(err.kind, FaultKind::VelocityFunnelViolation { .. }));
    }

    fn test_cfg() -> ControllerConfig {
        ControllerConfig {
            k_x: 0.2,
            k_v: 3.0,
            gamma_v: vec![
                TimeSignal::exp_envelope(1.0, 0.1, 0.3),
                TimeSignal::exp_envelope(1.0, 0.1, 0.3),
            ],
        }
    }

    #[test]
    fn step_zero_control_when_tracking_reference() {
        let cfg = test_cfg();
        let rho_l = [-1.0, -2.0];
        let rho_u = [1.0, 2.0];
        let x = [0.3, -0.5];
        let vd = velocity_reference(&x, &rho_l, &rho_u, cfg.k_x).unwrap();
        let out = controller_step(0.0, &x, &vd, &rho_l, &rho_u, &cfg).unwrap();
        assert_eq!(out.u, vec![0.0, 0.0]);
        assert_eq!(out.e_v, vec![0.0, 0.0]);
    }

    #[test]
    fn step_doubling_kv_doubles_u() {
        let mut cfg = test_cfg();
        let rho_l = [-1.0, -2.0];
        let rho_u = [1.0, 2.0];
        let x = [0.3, -0.5];
        let v = [0.2, 0.1];
        let out1 = controller_step(0.5, &x, &v, &rho_l, &rho_u, &cfg).unwrap();
        cfg.k_v *= 2.0;
        let out2 = controller_step(0.5, &x, &v, &rho_l, &rho_u, &cfg).unwrap();
        for i in 0..2 {
            assert!((out2.u[i] - 2.0 * out1.u[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn step_all_normalized_values_interior() {
        let cfg = test_cfg();
        let out =
            controller_step(0.0, &[0.3, -0.5], &[0.2, 0.1], &[-1.0, -2.0], &[1.0, 2.0], &cfg)
                .unwrap();
        for z in out.x_hat.iter().chain(&out.ev_hat) {
            assert!(z.abs() < 1.0);
        }
        for q in out.u.iter().chain(&out.v_d) {
            assert!(q.is_finite());
        }
    }

    proptest! {
        #[test]
        fn transform_roundtrip(w in -20.0..20.0f64) {
            let z = inverse_transform(w);
            prop_assert!(z.abs() < 1.0);
            let back = transform(z).unwrap();
            prop_assert!((back - w).abs() < 1e-9 * (1.0 + w.abs()));
        }

        #[test]
        fn transform_inverse_on_interval(z in -0.999..0.999f64) {
            let w = transform(z).unwrap();
            prop_assert!((inverse_transform(w) - z).abs() < 1e-12);
        }

        #[test]
        fn reference_pushes_toward_funnel_center(xhat in -0.999..0.999f64) {
            prop_assume!(xhat.abs() > 1e-6);
            let vd = velocity_reference(&[xhat], &[-1.0], &[1.0], 0.2).unwrap();
            prop_assert!(vd[0] * xhat < 0.0, "v_d must oppose the offset");
        }

        #[test]
        fn control_pushes_against_velocity_error(ev in -0.999..0.999f64) {
            prop_assume!(ev.abs() > 1e-6);
            let u = control_input(&[ev], &[1.0], 3.0).unwrap();
            prop_assert!(u[0] * ev < 0.0);
        }

        #[test]
        fn barrier_is_monotone_in_offset(a in 0.0..0.9f64, b in 0.0..0.9f64) {
            prop_assume!((a - b).abs() > 1e-6);
            let (small, large) = if a < b { (a, b) } else { (b, a) };
            let vs = velocity_reference(&[small], &[-1.0], &[1.0], 0.2).unwrap();
            let vl = velocity_reference(&[large], &[-1.0], &[1.0], 0.2).unwrap();
            prop_assert!(vl[0].abs() > vs[0].abs());
        }
    }
}
