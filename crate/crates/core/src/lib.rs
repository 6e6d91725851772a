//! Funnel-based constrained tracking control.
//!
//! This crate plans and simulates *constraint-consistent funnels*: per-output
//! performance tubes that normally follow tight, time-varying soft bounds but
//! relax online — by the minimum amount, and only while necessary — whenever
//! the soft bounds drift into conflict with non-negotiable hard (safety)
//! bounds. A low-complexity prescribed-performance controller then keeps each
//! output inside its planned funnel without knowing any plant parameters.
//!
//! The pieces compose left to right:
//!
//! * [`signals`] — scalar functions of time with exact derivatives, the
//!   vocabulary for every bound, envelope, reference and disturbance;
//! * [`planner`] — modification-signal dynamics and funnel-bound assembly,
//!   in exact (nonsmooth) and smoothed variants;
//! * [`controller`] — the two-step barrier-transform feedback law;
//! * [`plant`] — plant models, including the nonholonomic mobile robot with
//!   its hand-point output transform;
//! * [`engine`] — fixed-step closed-loop integration with fault capture;
//! * [`trace`] / [`check`] — trace serialization and post-hoc verification
//!   of every closed-loop invariant;
//! * [`scenario`] — declarative TOML scenario files tying it all together.
//!
//! ```
//! use ccf_core::scenario::Scenario;
//!
//! let built = Scenario::robot_kc3().build().unwrap();
//! let trace = built.run_with(&ccf_core::engine::SimConfig {
//!     t_end: 0.5,
//!     h: 1e-3,
//!     scheme: ccf_core::engine::Scheme::Rk4,
//!     record_stride: 10,
//! });
//! assert!(trace.is_fault_free());
//! ```

pub mod check;
pub mod controller;
pub mod engine;
pub mod fault;
pub mod planner;
pub mod plant;
pub mod scenario;
pub mod signals;
pub mod trace;

pub use check::{check_trace, CheckContext, CheckReport};
pub use controller::{controller_step, ControllerConfig, ControllerOutput};
pub use engine::{oracle_simulate, simulate, ClosedLoop, Scheme, SimConfig};
pub use fault::{ComponentFault, Fault, FaultKind};
pub use planner::{ConstraintPair, PlannerConfig, PlannerState, PlannerVariant};
pub use plant::{DoubleIntegrator, MobileRobot, Plant};
pub use scenario::{BuiltScenario, Scenario, ScenarioError};
pub use signals::TimeSignal;
pub use trace::SimTrace;
