//! Scenario files: a declarative description of one closed-loop run.
//!
//! A scenario is a TOML document with sections for the simulation window,
//! the planner, the controller, the per-output constraint pairs, the plant
//! and the initial state. Every constant of a published case study lives in
//! one auditable file; `--set`-style overrides edit the parsed document
//! before deserialization, so parameter sweeps need no file duplication.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::CheckContext;
use crate::controller::{velocity_reference, ControllerConfig};
use crate::engine::{simulate, ClosedLoop, SimConfig};
use crate::planner::{funnel_bounds_all, ConstraintPair, PlannerConfig, PlannerState, PlannerVariant};
use crate::plant::{DoubleIntegrator, MobileRobot, Plant};
use crate::signals::TimeSignal;
use crate::trace::SimTrace;

/// Velocity-error envelope parameters for one output. The envelope is the
/// exponential form `(rho0 - rho_inf)·e^(-decay·t) + rho_inf`; when `rho0`
/// is omitted the loader auto-sizes it to `1.5·max(|e_v(0)|, rho_inf)` so
/// the initial velocity error starts strictly inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityFunnelSpec {
    pub rho_inf: f64,
    pub decay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub k_x: f64,
    pub k_v: f64,
    pub velocity_funnel: Vec<VelocityFunnelSpec>,
}

/// Which plant the scenario simulates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantSpec {
    MobileRobot(MobileRobot),
    DoubleIntegrator { n: usize },
}

/// Initial condition, in the plant's natural coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Mobile robot: hand position, heading and `psi = [v_t, omega]`.
    Unicycle { hand: [f64; 2], theta: f64, psi: [f64; 2] },
    /// State-space plants: output positions and velocities.
    Direct { x: Vec<f64>, v: Vec<f64> },
}

/// A full scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub sim: SimConfig,
    pub planner: PlannerConfig,
    pub controller: ControllerSpec,
    pub constraints: Vec<ConstraintPair>,
    pub plant: PlantSpec,
    pub initial: InitialState,
    /// Reference trajectory, used only for plot emission.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<TimeSignal>>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("bad override '{0}': {1}")]
    Override(String, String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// A scenario that fails its static checks, with the offending quantity and
/// (for sampled checks) the time of violation.
#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("hard band of output {output} is {width} wide at t = {t}, below its feasibility margin eps_hard = {eps}")]
    HardBandTooNarrow { output: usize, t: f64, width: f64, eps: f64 },
    #[error("soft band of output {output} is {width} wide at t = {t}, below its feasibility margin eps_soft = {eps}")]
    SoftBandTooNarrow { output: usize, t: f64, width: f64, eps: f64 },
    #[error("hard and soft constraints of output {output} are incompatible at t = 0")]
    InitiallyIncompatible { output: usize },
    #[error("initial output {output} = {x} violates the {which} constraints at t = 0")]
    InitialOutsideConstraints { output: usize, x: f64, which: &'static str },
    #[error("initial output {output} = {x} is outside the initial funnel ({lo}, {hi})")]
    InitialOutsideFunnel { output: usize, x: f64, lo: f64, hi: f64 },
    #[error("velocity funnel of output {output}: rho0 = {rho0} does not exceed |e_v(0)| = {ev}")]
    VelocityFunnelTooSmall { output: usize, rho0: f64, ev: f64 },
}

/// Plant instance owned by a built scenario.
#[derive(Debug)]
pub enum BuiltPlant {
    MobileRobot(MobileRobot),
    DoubleIntegrator(DoubleIntegrator),
}

impl BuiltPlant {
    pub fn as_dyn(&self) -> &dyn Plant {
        match self {
            BuiltPlant::MobileRobot(robot) => robot,
            BuiltPlant::DoubleIntegrator(plant) => plant,
        }
    }
}

/// A validated scenario, ready to simulate. The velocity envelopes have been
/// resolved to concrete signals (auto-sized `rho0` included).
#[derive(Debug)]
pub struct BuiltScenario {
    pub plant: BuiltPlant,
    pub constraints: Vec<ConstraintPair>,
    pub planner: PlannerConfig,
    pub controller: ControllerConfig,
    pub initial_state: Vec<f64>,
    pub sim: SimConfig,
    pub reference: Option<Vec<TimeSignal>>,
}

impl BuiltScenario {
    pub fn n_outputs(&self) -> usize {
        self.constraints.len()
    }

    pub fn closed_loop(&self) -> ClosedLoop<'_> {
        ClosedLoop {
            plant: self.plant.as_dyn(),
            constraints: &self.constraints,
            planner: &self.planner,
            controller: &self.controller,
        }
    }

    pub fn check_context(&self) -> CheckContext<'_> {
        CheckContext {
            constraints: &self.constraints,
            planner: &self.planner,
            controller: &self.controller,
        }
    }

    /// Run with the scenario's own simulation settings.
    pub fn run(&self) -> SimTrace {
        simulate(&self.closed_loop(), &self.initial_state, &self.sim)
    }

    /// Run with different settings (step studies, oracle comparisons).
    pub fn run_with(&self, cfg: &SimConfig) -> SimTrace {
        simulate(&self.closed_loop(), &self.initial_state, cfg)
    }
}

const ROBOT_KC3: &str = include_str!("../assets/robot_kc3.toml");
const ROBOT_KC03: &str = include_str!("../assets/robot_kc03.toml");

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    /// Parse after applying `key.path=value` overrides to the document.
    pub fn from_toml_str_with_overrides(text: &str, sets: &[String]) -> Result<Self, ScenarioError> {
        if sets.is_empty() {
            return Self::from_toml_str(text);
        }
        let mut doc: toml::Value = toml::from_str(text)?;
        for set in sets {
            apply_override(&mut doc, set)?;
        }
        Ok(doc.try_into()?)
    }

    pub fn load(path: &Path, sets: &[String]) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str_with_overrides(&text, sets)
    }

    pub fn to_toml_string(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Bundled mobile-robot scenario with fast soft-constraint recovery
    /// (`k_c = 3`).
    pub fn robot_kc3() -> Self {
        Self::from_toml_str(ROBOT_KC3).expect("bundled scenario must parse")
    }

    /// Same scenario with slow recovery (`k_c = 0.3`).
    pub fn robot_kc03() -> Self {
        Self::from_toml_str(ROBOT_KC03).expect("bundled scenario must parse")
    }

    /// Look up a bundled scenario by name.
    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "robot_kc3" => Some(Self::robot_kc3()),
            "robot_kc03" => Some(Self::robot_kc03()),
            _ => None,
        }
    }

    pub fn bundled_source(name: &str) -> Option<&'static str> {
        match name {
            "robot_kc3" => Some(ROBOT_KC3),
            "robot_kc03" => Some(ROBOT_KC03),
            _ => None,
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.constraints.len()
    }

    /// Validate every static precondition and resolve the scenario into
    /// simulable pieces.
    pub fn build(&self) -> Result<BuiltScenario, ScenarioError> {
        let n = self.constraints.len();
        if n == 0 {
            return Err(ValidationError::Dimension("no constraints defined".into()).into());
        }
        if self.controller.velocity_funnel.len() != n {
            return Err(ValidationError::Dimension(format!(
                "{} velocity funnels for {} outputs",
                self.controller.velocity_funnel.len(),
                n
            ))
            .into());
        }
        if let Some(reference) = &self.reference {
            if reference.len() != n {
                return Err(ValidationError::Dimension(format!(
                    "{} reference signals for {} outputs",
                    reference.len(),
                    n
                ))
                .into());
            }
        }
        self.validate_parameters()?;

        let (plant, initial_state) = self.build_plant(n)?;
        self.validate_bands()?;
        let controller = self.resolve_controller(&plant, &initial_state)?;

        Ok(BuiltScenario {
            plant,
            constraints: self.constraints.clone(),
            planner: self.planner,
            controller,
            initial_state,
            sim: self.sim,
            reference: self.reference.clone(),
        })
    }

    fn validate_parameters(&self) -> Result<(), ValidationError> {
        let par = |msg: String| Err(ValidationError::Parameter(msg));
        if !(self.sim.h > 0.0 && self.sim.h <= 0.01) {
            return par(format!("sim.h = {} must be in (0, 0.01]", self.sim.h));
        }
        if self.sim.t_end <= 0.0 {
            return par(format!("sim.t_end = {} must be positive", self.sim.t_end));
        }
        if self.sim.record_stride == 0 {
            return par("sim.record_stride must be at least 1".into());
        }
        if self.planner.mu <= 0.0 || self.planner.k_c <= 0.0 {
            return par(format!(
                "planner.mu = {} and planner.k_c = {} must be positive",
                self.planner.mu, self.planner.k_c
            ));
        }
        if let PlannerVariant::Smooth { kappa, nu } = self.planner.variant {
            if kappa <= 0.0 || nu <= 0.0 {
                return par(format!("smooth planner needs kappa, nu > 0 (got {kappa}, {nu})"));
            }
        }
        if self.controller.k_x <= 0.0 || self.controller.k_v <= 0.0 {
            return par(format!(
                "controller gains k_x = {}, k_v = {} must be positive",
                self.controller.k_x, self.controller.k_v
            ));
        }
        for (i, spec) in self.controller.velocity_funnel.iter().enumerate() {
            if spec.rho_inf <= 0.0 || spec.decay <= 0.0 {
                return par(format!(
                    "velocity funnel {i}: rho_inf = {} and decay = {} must be positive",
                    spec.rho_inf, spec.decay
                ));
            }
        }
        for (i, pair) in self.constraints.iter().enumerate() {
            if pair.eps_hard <= 0.0 || pair.eps_soft <= 0.0 {
                return par(format!("constraints {i}: eps_hard and eps_soft must be positive"));
            }
        }
        if let PlantSpec::MobileRobot(robot) = &self.plant {
            if robot.mass <= 0.0 || robot.inertia <= 0.0 {
                return par("robot mass and inertia must be positive".into());
            }
            if robot.hand_offset <= 0.0 {
                return par(format!(
                    "robot hand_offset = {} must be positive (the transform is singular otherwise)",
                    robot.hand_offset
                ));
            }
            if robot.disturbance.len() != 2 {
                return Err(ValidationError::Dimension(format!(
                    "robot needs 2 disturbance signals, got {}",
                    robot.disturbance.len()
                )));
            }
        }
        Ok(())
    }

    fn build_plant(&self, n: usize) -> Result<(BuiltPlant, Vec<f64>), ValidationError> {
        match (&self.plant, &self.initial) {
            (PlantSpec::MobileRobot(robot), InitialState::Unicycle { hand, theta, psi }) => {
                if n != 2 {
                    return Err(ValidationError::Dimension(format!(
                        "mobile robot has 2 outputs, scenario declares {n}"
                    )));
                }
                let pose = robot.pose_for_hand(*hand, *theta);
                let state = vec![pose[0], pose[1], pose[2], psi[0], psi[1]];
                Ok((BuiltPlant::MobileRobot(robot.clone()), state))
            }
            (PlantSpec::DoubleIntegrator { n: plant_n }, InitialState::Direct { x, v }) => {
                if *plant_n != n || x.len() != n || v.len() != n {
                    return Err(ValidationError::Dimension(format!(
                        "double integrator n = {plant_n}, initial x has {}, v has {}, constraints {n}",
                        x.len(),
                        v.len()
                    )));
                }
                let mut state = x.clone();
                state.extend_from_slice(v);
                Ok((BuiltPlant::DoubleIntegrator(DoubleIntegrator { n }), state))
            }
            _ => Err(ValidationError::Dimension(
                "initial-state kind does not match plant kind".into(),
            )),
        }
    }

    /// Sampled feasibility of each band over the horizon.
    fn validate_bands(&self) -> Result<(), ValidationError> {
        let dt = 0.01f64.min(self.sim.t_end / 10.0);
        let steps = (self.sim.t_end / dt).ceil() as usize;
        for (i, pair) in self.constraints.iter().enumerate() {
            for k in 0..=steps {
                let t = (k as f64 * dt).min(self.sim.t_end);
                let (hl, hu) = pair.hard(t);
                let width = hu - hl;
                if width < pair.eps_hard {
                    return Err(ValidationError::HardBandTooNarrow {
                        output: i,
                        t,
                        width,
                        eps: pair.eps_hard,
                    });
                }
                let (sl, su) = pair.soft(t);
                let width = su - sl;
                if width < pair.eps_soft {
                    return Err(ValidationError::SoftBandTooNarrow {
                        output: i,
                        t,
                        width,
                        eps: pair.eps_soft,
                    });
                }
            }
        }
        Ok(())
    }

    /// Initial-compatibility checks plus velocity-envelope sizing; both need
    /// the plant's initial output.
    fn resolve_controller(
        &self,
        plant: &BuiltPlant,
        initial_state: &[f64],
    ) -> Result<ControllerConfig, ValidationError> {
        let n = self.constraints.len();
        let (x0, v0) = plant.as_dyn().output(initial_state);

        for (i, pair) in self.constraints.iter().enumerate() {
            let (hl, hu) = pair.hard(0.0);
            let (sl, su) = pair.soft(0.0);
            if !(hu > sl && su > hl) {
                return Err(ValidationError::InitiallyIncompatible { output: i });
            }
            if !(hl < x0[i] && x0[i] < hu) {
                return Err(ValidationError::InitialOutsideConstraints {
                    output: i,
                    x: x0[i],
                    which: "hard",
                });
            }
            if !(sl < x0[i] && x0[i] < su) {
                return Err(ValidationError::InitialOutsideConstraints {
                    output: i,
                    x: x0[i],
                    which: "soft",
                });
            }
        }

        let phi0 = PlannerState::zeros(n);
        let (rho_l, rho_u) = funnel_bounds_all(&phi0, &self.constraints, &self.planner, 0.0);
        for i in 0..n {
            if !(rho_l[i] < x0[i] && x0[i] < rho_u[i]) {
                return Err(ValidationError::InitialOutsideFunnel {
                    output: i,
                    x: x0[i],
                    lo: rho_l[i],
                    hi: rho_u[i],
                });
            }
        }

        let v_d0 = velocity_reference(&x0, &rho_l, &rho_u, self.controller.k_x)
            .map_err(|cf| ValidationError::InitialOutsideFunnel {
                output: cf.index,
                x: x0[cf.index],
                lo: rho_l[cf.index],
                hi: rho_u[cf.index],
            })?;

        let mut gamma_v = Vec::with_capacity(n);
        for (i, spec) in self.controller.velocity_funnel.iter().enumerate() {
            let ev0 = (v0[i] - v_d0[i]).abs();
            let rho0 = spec.rho0.unwrap_or(1.5 * ev0.max(spec.rho_inf));
            if rho0 <= ev0 {
                return Err(ValidationError::VelocityFunnelTooSmall { output: i, rho0, ev: ev0 });
            }
            gamma_v.push(TimeSignal::exp_envelope(rho0, spec.rho_inf, spec.decay));
        }

        Ok(ControllerConfig {
            k_x: self.controller.k_x,
            k_v: self.controller.k_v,
            gamma_v,
        })
    }
}

/// Apply one `path.to.key=value` override to a parsed TOML document.
/// Numeric path segments index arrays (zero-based).
pub fn apply_override(doc: &mut toml::Value, set: &str) -> Result<(), ScenarioError> {
    let bad = |msg: &str| ScenarioError::Override(set.to_string(), msg.to_string());
    let (path, raw) = set.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let value = parse_toml_value(raw.trim())?;
    let mut node = doc;
    let segments: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = segments.split_last().ok_or_else(|| bad("empty key"))?;
    for segment in parents {
        node = if let Ok(index) = segment.parse::<usize>() {
            node.as_array_mut()
                .and_then(|array| array.get_mut(index))
                .ok_or_else(|| bad(&format!("no array element '{segment}'")))?
        } else {
            node.as_table_mut()
                .and_then(|table| table.get_mut(*segment))
                .ok_or_else(|| bad(&format!("no key '{segment}'")))?
        };
    }
    if let Ok(index) = last.parse::<usize>() {
        let array = node.as_array_mut().ok_or_else(|| bad("parent is not an array"))?;
        let slot = array.get_mut(index).ok_or_else(|| bad("array index out of range"))?;
        *slot = value;
    } else {
        let table = node.as_table_mut().ok_or_else(|| bad("parent is not a table"))?;
        table.insert(last.to_string(), value);
    }
    Ok(())
}

fn parse_toml_value(raw: &str) -> Result<toml::Value, ScenarioError> {
    let wrapped = format!("v = {raw}");
    if let Ok(table) = wrapped.parse::<toml::Table>() {
        if let Some(value) = table.get("v") {
            return Ok(value.clone());
        }
    }
    // fall back to treating the payload as a bare string
    Ok(toml::Value::String(raw.to_string()))
}
