//! Fixed-step closed-loop simulation of plant plus planner.
//!
//! The modification signals are integrated together with the plant state as
//! one augmented ODE; the controller is an algebraic output map evaluated at
//! every integrator stage with stage-consistent time. Any module fault
//! aborts the run and lands in the trace's fault log instead of silently
//! producing garbage.

use serde::{Deserialize, Serialize};

use crate::controller::{controller_step, ControllerConfig, ControllerOutput};
use crate::fault::{Fault, FaultKind};
use crate::planner::{funnel_bounds_all, modification_rates_all, ConstraintPair, PlannerConfig, PlannerState};
use crate::plant::Plant;
use crate::trace::{SimTrace, TraceRow};

/// Fixed-step integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4,
    Euler,
}

/// Integration window and resolution. `record_stride` decimates the trace:
/// a row is kept every `record_stride` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub h: f64,
    pub scheme: Scheme,
    pub record_stride: usize,
}

/// Step size of the independent Euler reference oracle.
pub const ORACLE_STEP: f64 = 1e-5;

/// The interconnection the engine integrates: plant, constraints, planner
/// and controller. Borrowed pieces only; the engine owns no configuration.
pub struct ClosedLoop<'a> {
    pub plant: &'a dyn Plant,
    pub constraints: &'a [ConstraintPair],
    pub planner: &'a PlannerConfig,
    pub controller: &'a ControllerConfig,
}

/// Everything computed algebraically at one integrator stage.
struct StageEval {
    x: Vec<f64>,
    v: Vec<f64>,
    rho_lower: Vec<f64>,
    rho_upper: Vec<f64>,
    out: ControllerOutput,
}

impl ClosedLoop<'_> {
    fn n(&self) -> usize {
        self.constraints.len()
    }

    fn split<'y>(&self, y: &'y [f64]) -> (&'y [f64], PlannerState) {
        let m = self.plant.state_dim();
        let n = self.n();
        let state = PlannerState {
            phi_lower: y[m..m + n].to_vec(),
            phi_upper: y[m + n..m + 2 * n].to_vec(),
        };
        (&y[..m], state)
    }

    fn eval_stage(&self, t: f64, y: &[f64]) -> Result<StageEval, Fault> {
        let (plant_state, phi) = self.split(y);
        let (x, v) = self.plant.output(plant_state);
        let (rho_lower, rho_upper) = funnel_bounds_all(&phi, self.constraints, self.planner, t);
        for (i, (lo, up)) in rho_lower.iter().zip(&rho_upper).enumerate() {
            if !lo.is_finite() || !up.is_finite() {
                return Err(Fault { t, index: i, kind: FaultKind::NonFinite { quantity: "funnel bound" } });
            }
        }
        let out = controller_step(t, &x, &v, &rho_lower, &rho_upper, self.controller)
            .map_err(|cf| cf.at(t))?;
        for (i, value) in out.u.iter().chain(&out.v_d).enumerate() {
            if !value.is_finite() {
                return Err(Fault {
                    t,
                    index: i % self.n(),
                    kind: FaultKind::NonFinite { quantity: "control output" },
                });
            }
        }
        Ok(StageEval { x, v, rho_lower, rho_upper, out })
    }

    /// Right-hand side of the augmented ODE `[plant_state, phi_L, phi_U]`.
    fn derivative(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, Fault> {
        let (plant_state, phi) = self.split(y);
        let stage = self.eval_stage(t, y)?;
        let mut dy = self.plant.derivative(t, plant_state, &stage.out.u);
        for (i, value) in dy.iter().enumerate() {
            if !value.is_finite() {
                return Err(Fault {
                    t,
                    index: i.min(self.n().saturating_sub(1)),
                    kind: FaultKind::NonFinite { quantity: "plant derivative" },
                });
            }
        }
        let (dl, du) = modification_rates_all(&phi, self.constraints, self.planner, t)
            .map_err(|cf| cf.at(t))?;
        for (i, value) in dl.iter().chain(&du).enumerate() {
            if !value.is_finite() {
                return Err(Fault {
                    t,
                    index: i % self.n(),
                    kind: FaultKind::NonFinite { quantity: "modification rate" },
                });
            }
        }
        dy.extend(dl);
        dy.extend(du);
        Ok(dy)
    }

    fn record(&self, t: f64, y: &[f64], trace: &mut SimTrace) -> Result<(), Fault> {
        let stage = self.eval_stage(t, y)?;
        let (_, phi) = self.split(y);
        let n = self.n();
        let mut soft_lower = Vec::with_capacity(n);
        let mut soft_upper = Vec::with_capacity(n);
        let mut hard_lower = Vec::with_capacity(n);
        let mut hard_upper = Vec::with_capacity(n);
        for pair in self.constraints {
            let (sl, su) = pair.soft(t);
            let (hl, hu) = pair.hard(t);
            soft_lower.push(sl);
            soft_upper.push(su);
            hard_lower.push(hl);
            hard_upper.push(hu);
        }
        trace.rows.push(TraceRow {
            t,
            x: stage.x,
            v: stage.v,
            v_d: stage.out.v_d,
            e_v: stage.out.e_v,
            u: stage.out.u,
            phi_lower: phi.phi_lower,
            phi_upper: phi.phi_upper,
            rho_lower: stage.rho_lower,
            rho_upper: stage.rho_upper,
            soft_lower,
            soft_upper,
            hard_lower,
            hard_upper,
        });
        Ok(())
    }
}

fn axpy(y: &[f64], d: &[f64], scale: f64) -> Vec<f64> {
    y.iter().zip(d).map(|(yi, di)| yi + scale * di).collect()
}

/// Run the closed loop from `initial_plant_state` (modification signals start
/// at zero). On a fault the trace ends early with the fault recorded.
pub fn simulate(sys: &ClosedLoop<'_>, initial_plant_state: &[f64], cfg: &SimConfig) -> SimTrace {
    let n = sys.n();
    let m = sys.plant.state_dim();
    let mut y = initial_plant_state.to_vec();
    y.extend(std::iter::repeat(0.0).take(2 * n));

    let mut trace = SimTrace::new(n);
    if let Err(fault) = sys.record(0.0, &y, &mut trace) {
        trace.faults.push(fault);
        return trace;
    }

    let n_steps = (cfg.t_end / cfg.h).round() as usize;
    let h = cfg.h;
    for k in 0..n_steps {
        let t = k as f64 * h;
        let step = match cfg.scheme {
            Scheme::Euler => sys.derivative(t, &y).map(|d| axpy(&y, &d, h)),
            Scheme::Rk4 => (|| {
                let k1 = sys.derivative(t, &y)?;
                let k2 = sys.derivative(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h))?;
                let k3 = sys.derivative(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h))?;
                let k4 = sys.derivative(t + h, &axpy(&y, &k3, h))?;
                Ok(y.iter()
                    .enumerate()
                    .map(|(i, yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect())
            })(),
        };
        match step {
            Ok(next) => y = next,
            Err(fault) => {
                trace.faults.push(fault);
                return trace;
            }
        }
        // discrete steps can undershoot the proven phi >= 0 invariant by O(h^2)
        for phi in &mut y[m..] {
            *phi = phi.max(0.0);
        }
        if let Some(bad) = y.iter().position(|z| !z.is_finite()) {
            trace.faults.push(Fault {
                t: (k + 1) as f64 * h,
                index: bad.min(n.saturating_sub(1)),
                kind: FaultKind::NonFinite { quantity: "state" },
            });
            return trace;
        }
        if (k + 1) % cfg.record_stride == 0 {
            let t_next = (k + 1) as f64 * h;
            if let Err(fault) = sys.record(t_next, &y, &mut trace) {
                trace.faults.push(fault);
                return trace;
            }
        }
    }
    trace
}

/// Independent reference: the same interconnection integrated with explicit
/// Euler at a deliberately small fixed step. Used only for verification.
pub fn oracle_simulate(sys: &ClosedLoop<'_>, initial_plant_state: &[f64], t_end: f64) -> SimTrace {
    let cfg = SimConfig {
        t_end,
        h: ORACLE_STEP,
        scheme: Scheme::Euler,
        record_stride: 1000,
    };
    simulate(sys, initial_plant_state, &cfg)
}

/// Run independent simulations in parallel, one thread per job.
/// Each closure builds and runs its own scenario; nothing is shared.
pub fn simulate_batch<F>(jobs: Vec<F>) -> Vec<SimTrace>
where
    F: FnOnce() -> SimTrace + Send,
{
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs.into_iter().map(|job| scope.spawn(job)).collect();
        handles.into_iter().map(|handle| handle.join().expect("simulation panicked")).collect()
    })
}
