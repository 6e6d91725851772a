//! Online constraint-consistent funnel planning.
//!
//! Each output carries a pair of time-varying hard (safety) and soft
//! (performance) bounds. When the two bands drift into conflict, nonnegative
//! modification signals `phi` relax the soft bounds just enough to keep the
//! planned funnel feasible, and decay exponentially at rate `k_c` once the
//! conflict resolves. The funnel boundaries are assembled from the relaxed
//! soft bounds and the hard bounds, either with exact max/min (nonsmooth
//! variant) or with log-sum-exp over/under-approximations (smooth variant).

use serde::{Deserialize, Serialize};

use crate::engine::Scheme;
use crate::fault::{ComponentFault, FaultKind};
use crate::signals::TimeSignal;

/// Floor on `eta + phi` before division in the modification dynamics.
///
/// Exact solutions keep this quantity bounded away from zero; crossing the
/// floor numerically is reported as a fault instead of producing huge rates.
pub const DELTA_FLOOR: f64 = 1e-9;

/// Hard and soft boundary signals for one output, with feasibility margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPair {
    pub hard_lower: TimeSignal,
    pub hard_upper: TimeSignal,
    pub soft_lower: TimeSignal,
    pub soft_upper: TimeSignal,
    /// Minimum hard band width over the horizon.
    pub eps_hard: f64,
    /// Minimum soft band width over the horizon.
    pub eps_soft: f64,
}

impl ConstraintPair {
    /// Hard bounds `(lower, upper)` at time `t`.
    pub fn hard(&self, t: f64) -> (f64, f64) {
        (self.hard_lower.value(t), self.hard_upper.value(t))
    }

    /// Soft bounds `(lower, upper)` at time `t`.
    pub fn soft(&self, t: f64) -> (f64, f64) {
        (self.soft_lower.value(t), self.soft_upper.value(t))
    }

    /// Compatibility gaps `(eta_lower, eta_upper)` at time `t`:
    /// `eta_lower = hard_upper - soft_lower`, `eta_upper = soft_upper - hard_lower`.
    pub fn eta(&self, t: f64) -> (f64, f64) {
        (
            self.hard_upper.value(t) - self.soft_lower.value(t),
            self.soft_upper.value(t) - self.hard_lower.value(t),
        )
    }
}

/// Switching variant for the modification dynamics and bound assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerVariant {
    /// Exact sign switch and exact max/min.
    Nonsmooth,
    /// `tanh(kappa·(eta - mu))` switch and log-sum-exp bounds with
    /// sharpness `nu`.
    Smooth { kappa: f64, nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Trigger distance: relaxation activates when a compatibility gap drops
    /// to `mu` or below.
    pub mu: f64,
    /// Recovery rate of the modification signals after a conflict.
    pub k_c: f64,
    pub variant: PlannerVariant,
}

/// Modification signals for all outputs. `phi(0) = 0` and `phi >= 0` along
/// any trajectory produced by [`step_modification`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    pub phi_lower: Vec<f64>,
    pub phi_upper: Vec<f64>,
}

impl PlannerState {
    pub fn zeros(n: usize) -> Self {
        PlannerState { phi_lower: vec![0.0; n], phi_upper: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.phi_lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_lower.is_empty()
    }
}

/// sign with the symmetric convention sign(0) = 0, matching the value of the
/// tanh switch at the threshold. `f64::signum` maps 0 to 1, which is not what
/// the switch coefficient wants.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Shift-stabilized two-argument smooth max: exceeds `max(a, b)` by at most
/// `ln(2)/nu`, with equality at `a = b`. Stable for large `nu`.
pub fn smooth_max(a: f64, b: f64, nu: f64) -> f64 {
    let m = a.max(b);
    m + ((nu * (a - m)).exp() + (nu * (b - m)).exp()).ln() / nu
}

/// Smooth min as the mirrored smooth max: undershoots `min(a, b)` by at most
/// `ln(2)/nu`.
pub fn smooth_min(a: f64, b: f64, nu: f64) -> f64 {
    -smooth_max(-a, -b, nu)
}

/// Rate of one modification signal given its compatibility gap.
///
/// Mode I (`eta > mu`): pure decay `-k_c·phi`. Mode II (`eta <= mu`): the
/// relaxation term `1/(eta + phi)` is active. The smooth variant blends the
/// two modes with a tanh switch.
pub fn modification_rate(eta: f64, phi: f64, cfg: &PlannerConfig) -> Result<f64, FaultKind> {
    let slack = eta + phi;
    if slack <= DELTA_FLOOR {
        return Err(FaultKind::PlannerInfeasible { value: slack });
    }
    let gate = match cfg.variant {
        PlannerVariant::Nonsmooth => 0.5 * (1.0 - sign(eta - cfg.mu)),
        PlannerVariant::Smooth { kappa, .. } => 0.5 * (1.0 - (kappa * (eta - cfg.mu)).tanh()),
    };
    Ok(gate / slack - cfg.k_c * phi)
}

/// Rates `(dphi_lower, dphi_upper)` for one output.
pub fn modification_rates(
    phi_lower: f64,
    phi_upper: f64,
    eta_lower: f64,
    eta_upper: f64,
    cfg: &PlannerConfig,
) -> Result<(f64, f64), FaultKind> {
    Ok((
        modification_rate(eta_lower, phi_lower, cfg)?,
        modification_rate(eta_upper, phi_upper, cfg)?,
    ))
}

/// Rates for all outputs, with the offending component identified on fault.
pub fn modification_rates_all(
    state: &PlannerState,
    pairs: &[ConstraintPair],
    cfg: &PlannerConfig,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>), ComponentFault> {
    let n = pairs.len();
    let mut dl = Vec::with_capacity(n);
    let mut du = Vec::with_capacity(n);
    for (i, pair) in pairs.iter().enumerate() {
        let (eta_l, eta_u) = pair.eta(t);
        let (rl, ru) = modification_rates(state.phi_lower[i], state.phi_upper[i], eta_l, eta_u, cfg)
            .map_err(|kind| ComponentFault::new(i, kind))?;
        dl.push(rl);
        du.push(ru);
    }
    Ok((dl, du))
}

/// Funnel boundaries `(rho_lower, rho_upper)` for one output.
pub fn funnel_bounds(
    phi_lower: f64,
    phi_upper: f64,
    pair: &ConstraintPair,
    cfg: &PlannerConfig,
    t: f64,
) -> (f64, f64) {
    let relaxed_lower = pair.soft_lower.value(t) - phi_lower;
    let relaxed_upper = pair.soft_upper.value(t) + phi_upper;
    let (hard_lower, hard_upper) = pair.hard(t);
    match cfg.variant {
        PlannerVariant::Nonsmooth => {
            (relaxed_lower.max(hard_lower), relaxed_upper.min(hard_upper))
        }
        PlannerVariant::Smooth { nu, .. } => (
            smooth_max(relaxed_lower, hard_lower, nu),
            smooth_min(relaxed_upper, hard_upper, nu),
        ),
    }
}

/// Funnel boundaries for all outputs.
pub fn funnel_bounds_all(
    state: &PlannerState,
    pairs: &[ConstraintPair],
    cfg: &PlannerConfig,
    t: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut lo = Vec::with_capacity(pairs.len());
    let mut up = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let (l, u) = funnel_bounds(state.phi_lower[i], state.phi_upper[i], pair, cfg, t);
        lo.push(l);
        up.push(u);
    }
    (lo, up)
}

/// Advance the modification signals by one integrator step of size `h`.
///
/// After the step each `phi` is clamped to `>= 0`: nonnegativity is proven
/// for exact solutions, and discrete steps can undershoot by O(h^2).
pub fn step_modification(
    state: &PlannerState,
    pairs: &[ConstraintPair],
    cfg: &PlannerConfig,
    t: f64,
    h: f64,
    scheme: Scheme,
) -> Result<PlannerState, ComponentFault> {
    let rates = |s: &PlannerState, tau: f64| modification_rates_all(s, pairs, cfg, tau);
    let apply = |s: &PlannerState, d: &(Vec<f64>, Vec<f64>), dt: f64| PlannerState {
        phi_lower: s.phi_lower.iter().zip(&d.0).map(|(p, r)| p + dt * r).collect(),
        phi_upper: s.phi_upper.iter().zip(&d.1).map(|(p, r)| p + dt * r).collect(),
    };
    let mut next = match scheme {
        Scheme::Euler => {
            let k1 = rates(state, t)?;
            apply(state, &k1, h)
        }
        Scheme::Rk4 => {
            let k1 = rates(state, t)?;
            let k2 = rates(&apply(state, &k1, 0.5 * h), t + 0.5 * h)?;
            let k3 = rates(&apply(state, &k2, 0.5 * h), t + 0.5 * h)?;
            let k4 = rates(&apply(state, &k3, h), t + h)?;
            let n = state.len();
            let mut out = state.clone();
            for i in 0..n {
                out.phi_lower[i] +=
                    h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
                out.phi_upper[i] +=
                    h / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
            }
            out
        }
    };
    for p in next.phi_lower.iter_mut().chain(next.phi_upper.iter_mut()) {
        *p = p.max(0.0);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn box_pair(hl: f64, hu: f64, sl: f64, su: f64) -> ConstraintPair {
        ConstraintPair {
            hard_lower: TimeSignal::constant(hl),
            hard_upper: TimeSignal::constant(hu),
            soft_lower: TimeSignal::constant(sl),
            soft_upper: TimeSignal::constant(su),
            eps_hard: 0.1,
            eps_soft: 0.1,
        }
    }

    fn nonsmooth(mu: f64, k_c: f64) -> PlannerConfig {
        PlannerConfig { mu, k_c, variant: PlannerVariant::Nonsmooth }
    }

    fn smooth(mu: f64, k_c: f64, kappa: f64, nu: f64) -> PlannerConfig {
        PlannerConfig { mu, k_c, variant: PlannerVariant::Smooth { kappa, nu } }
    }

    #[test]
    fn eta_gaps_for_box_constraints() {
        let pair = box_pair(-6.58, 6.58, -1.0, 1.0);
        let (el, eu) = pair.eta(3.7);
        assert!((el - 7.58).abs() < 1e-12);
        assert!((eu - 7.58).abs() < 1e-12);
    }

    #[test]
    fn eta_touching_and_threshold_cases() {
        // soft_lower == hard_upper -> eta_lower = 0
        let pair = box_pair(-1.0, 2.0, 2.0, 3.0);
        assert_eq!(pair.eta(0.0).0, 0.0);
        // soft_upper == hard_lower + mu -> eta_upper = mu
        let mu = 0.01;
        let pair = box_pair(-1.0, 5.0, -3.0, -1.0 + mu);
        assert!((pair.eta(0.0).1 - mu).abs() < 1e-12);
    }

    #[test]
    fn rate_mode_one_is_pure_decay() {
        let cfg = nonsmooth(0.01, 3.0);
        let rate = modification_rate(7.58, 0.2, &cfg).unwrap();
        assert!((rate - (-0.6)).abs() < 1e-12);
    }

    #[test]
    fn rate_mode_two_adds_relaxation_term() {
        let cfg = nonsmooth(0.01, 3.0);
        let rate = modification_rate(0.005, 0.1, &cfg).unwrap();
        assert!((rate - (1.0 / 0.105 - 0.3)).abs() < 1e-12);
        assert!((rate - 9.2238).abs() < 1e-3);
    }

    #[test]
    fn rate_zero_at_mode_one_equilibrium() {
        let cfg = nonsmooth(0.01, 3.0);
        assert_eq!(modification_rate(7.58, 0.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn rate_faults_at_singularity_floor() {
        let cfg = nonsmooth(0.01, 3.0);
        let err = modification_rate(-0.5, 0.5, &cfg).unwrap_err();
        assert!(matches!(err, FaultKind::PlannerInfeasible { .. }));
    }

    #[test]
    fn sign_convention_at_threshold_matches_tanh() {
        // At eta == mu the nonsmooth gate is 1/2, same as the tanh gate.
        let ns = nonsmooth(0.01, 3.0);
        let sm = smooth(0.01, 3.0, 4.0, 10.0);
        let r_ns = modification_rate(0.01, 0.3, &ns).unwrap();
        let r_sm = modification_rate(0.01, 0.3, &sm).unwrap();
        assert!((r_ns - r_sm).abs() < 1e-12);
    }

    #[test]
    fn bounds_soft_inside_hard() {
        let pair = box_pair(-6.58, 6.58, -1.0, 1.0);
        let cfg = nonsmooth(0.01, 3.0);
        let (lo, up) = funnel_bounds(0.0, 0.0, &pair, &cfg, 0.0);
        assert_eq!((lo, up), (-1.0, 1.0));
    }

    #[test]
    fn bounds_saturate_at_hard_constraint() {
        let pair = box_pair(-6.58, 6.58, -1.0, 1.0);
        let cfg = nonsmooth(0.01, 3.0);
        // phi_upper large enough that soft_upper + phi exceeds hard_upper
        let (_, up) = funnel_bounds(0.0, 10.0, &pair, &cfg, 0.0);
        assert_eq!(up, 6.58);
    }

    #[test]
    fn smooth_max_at_equal_arguments() {
        let nu = 10.0;
        let v = smooth_max(2.0, 2.0, nu);
        assert!((v - (2.0 + 2.0f64.ln() / nu)).abs() < 1e-12);
        let w = smooth_min(2.0, 2.0, nu);
        assert!((w - (2.0 - 2.0f64.ln() / nu)).abs() < 1e-12);
    }

    #[test]
    fn smooth_max_survives_large_nu() {
        let v = smooth_max(1000.0, -1000.0, 1e4);
        assert!(v.is_finite());
        assert!((v - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn compatible_constraints_keep_phi_at_zero() {
        let pairs = vec![box_pair(-6.58, 6.58, -1.0, 1.0)];
        let cfg = nonsmooth(0.01, 3.0);
        let mut state = PlannerState::zeros(1);
        for k in 0..1000 {
            let t = 1e-3 * k as f64;
            state = step_modification(&state, &pairs, &cfg, t, 1e-3, Scheme::Rk4).unwrap();
        }
        assert_eq!(state.phi_lower[0], 0.0);
        assert_eq!(state.phi_upper[0], 0.0);
    }

    #[test]
    fn mode_one_decay_matches_closed_form() {
        let pairs = vec![box_pair(-6.58, 6.58, -1.0, 1.0)];
        let cfg = nonsmooth(0.01, 3.0);
        let phi0 = 0.8;
        let mut state = PlannerState::zeros(1);
        state.phi_upper[0] = phi0;
        let h = 1e-3;
        let steps = 2000;
        for k in 0..steps {
            let t = h * k as f64;
            state = step_modification(&state, &pairs, &cfg, t, h, Scheme::Rk4).unwrap();
        }
        let elapsed = h * steps as f64;
        let expected = phi0 * (-3.0 * elapsed).exp();
        assert!(
            (state.phi_upper[0] - expected).abs() <= 1e-6 * elapsed,
            "phi = {}, closed form = {}",
            state.phi_upper[0],
            expected
        );
    }

    /// Conflicting pair: the soft band slides past the hard band periodically.
    fn conflicting_pair() -> ConstraintPair {
        let reference = TimeSignal::sine(1.5, 0.8, 0.0, 0.1);
        ConstraintPair {
            hard_lower: TimeSignal::constant(-1.0),
            hard_upper: TimeSignal::constant(3.0),
            soft_lower: reference.clone().minus(TimeSignal::constant(0.3)),
            soft_upper: reference.plus(TimeSignal::constant(0.3)),
            eps_hard: 0.1,
            eps_soft: 0.1,
        }
    }

    #[test]
    fn phi_stays_nonnegative_through_conflicts() {
        for cfg in [nonsmooth(0.01, 3.0), smooth(0.01, 3.0, 4.0, 10.0)] {
            let pairs = vec![conflicting_pair()];
            let mut state = PlannerState::zeros(1);
            let h = 1e-3;
            let mut saw_active = false;
            for k in 0..20_000 {
                let t = h * k as f64;
                state = step_modification(&state, &pairs, &cfg, t, h, Scheme::Rk4).unwrap();
                assert!(state.phi_lower[0] >= 0.0);
                assert!(state.phi_upper[0] >= 0.0);
                if state.phi_upper[0] > 0.1 {
                    saw_active = true;
                }
                let (lo, up) = funnel_bounds_all(&state, &pairs, &cfg, t + h);
                assert!(up[0] - lo[0] > 0.0, "funnel collapsed at t = {}", t + h);
            }
            assert!(saw_active, "scenario never triggered the relaxation");
        }
    }

    proptest! {
        #[test]
        fn smooth_and_nonsmooth_bounds_are_close(
            phi_l in 0.0..3.0f64,
            phi_u in 0.0..3.0f64,
            t in 0.0..30.0f64,
        ) {
            let pair = conflicting_pair();
            let nu = 10.0;
            let ns = nonsmooth(0.01, 3.0);
            let sm = smooth(0.01, 3.0, 4.0, nu);
            let (lo_n, up_n) = funnel_bounds(phi_l, phi_u, &pair, &ns, t);
            let (lo_s, up_s) = funnel_bounds(phi_l, phi_u, &pair, &sm, t);
            let bound = 2.0f64.ln() / nu;
            // equality occurs when the arguments are so far apart that the
            // log-sum-exp correction underflows
            prop_assert!(lo_s >= lo_n, "smooth lower must over-approximate");
            prop_assert!(up_s <= up_n, "smooth upper must under-approximate");
            prop_assert!((lo_s - lo_n).abs() <= bound);
            prop_assert!((up_s - up_n).abs() <= bound);
        }
    }
}
