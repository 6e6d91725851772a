//! Runtime faults raised by the planner, controller and engine.
//!
//! Faults are loud by design: the underlying theory guarantees that exact
//! solutions never reach these conditions, so hitting one means the scenario
//! violates its assumptions or the integration step is too coarse.

use thiserror::Error;

/// What went wrong, without location information.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FaultKind {
    /// `eta + phi` crossed the singularity floor in the modification-signal
    /// dynamics; the constraints violated their feasibility assumptions.
    #[error("planner infeasible: eta + phi = {value:e} at or below floor")]
    PlannerInfeasible { value: f64 },
    /// A normalized output reached the edge of the planned funnel.
    #[error("output left planned funnel: x_hat = {xhat}")]
    FunnelViolation { xhat: f64 },
    /// A normalized velocity error reached the edge of its envelope.
    #[error("velocity error left funnel: ev_hat = {evhat}")]
    VelocityFunnelViolation { evhat: f64 },
    /// Argument handed to the barrier transform was outside (-1, 1).
    #[error("barrier transform argument out of domain: {z}")]
    TransformDomain { z: f64 },
    /// A non-finite value appeared in an integrator stage.
    #[error("non-finite value in {quantity}")]
    NonFinite { quantity: &'static str },
}

impl FaultKind {
    /// Compact code used in trace-file fault rows.
    pub fn code(&self) -> &'static str {
        match self {
            FaultKind::PlannerInfeasible { .. } => "planner_infeasible",
            FaultKind::FunnelViolation { .. } => "funnel_violation",
            FaultKind::VelocityFunnelViolation { .. } => "velocity_funnel_violation",
            FaultKind::TransformDomain { .. } => "transform_domain",
            FaultKind::NonFinite { .. } => "non_finite",
        }
    }
}

/// A fault attributed to an output component, before the engine knows the time.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("output {index}: {kind}")]
pub struct ComponentFault {
    pub index: usize,
    pub kind: FaultKind,
}

impl ComponentFault {
    pub fn new(index: usize, kind: FaultKind) -> Self {
        ComponentFault { index, kind }
    }

    pub fn at(self, t: f64) -> Fault {
        Fault { t, index: self.index, kind: self.kind }
    }
}

/// A fault with full location: simulation time and output component.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("fault at t = {t}, output {index}: {kind}")]
pub struct Fault {
    pub t: f64,
    pub index: usize,
    pub kind: FaultKind,
}
