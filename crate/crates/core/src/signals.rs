//! Composable scalar functions of time with exact first derivatives.
//!
//! Constraint boundaries, reference trajectories, performance envelopes and
//! disturbances are all described by the same small [`TimeSignal`] grammar.
//! Signals are immutable value objects; evaluation is pure, so the planner,
//! the engine and any test oracle can evaluate the same descriptor
//! independently and get identical numbers.

use serde::{Deserialize, Serialize};

/// Waveform selector for [`TimeSignal::Sinusoid`].
///
/// Scenario files quote published constants verbatim; supporting both
/// `sin` and `cos` avoids folding phase shifts into the stored numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    #[default]
    Cos,
    Sin,
}

/// A scalar function of time, evaluable for value and first derivative.
///
/// The grammar is closed under [`Sum`](TimeSignal::Sum) and
/// [`Scaled`](TimeSignal::Scaled), so tracking-style soft constraints
/// `x_d(t) ± γ(t)` are built compositionally instead of through a general
/// expression interpreter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeSignal {
    /// `value(t) = value`
    Constant { value: f64 },
    /// `value(t) = offset + amp · form(omega·t + phase)`
    Sinusoid {
        amp: f64,
        /// Angular frequency in rad/s.
        omega: f64,
        /// Phase in rad.
        phase: f64,
        offset: f64,
        #[serde(default)]
        form: Waveform,
    },
    /// `value(t) = (rho0 − rho_inf)·e^(−decay·t) + rho_inf`, the standard
    /// exponentially narrowing performance envelope.
    ExpEnvelope { rho0: f64, rho_inf: f64, decay: f64 },
    /// Pointwise sum of the component signals.
    Sum { terms: Vec<TimeSignal> },
    /// `value(t) = coeff · inner(t)`
    Scaled { coeff: f64, inner: Box<TimeSignal> },
}

impl TimeSignal {
    pub fn constant(value: f64) -> Self {
        TimeSignal::Constant { value }
    }

    /// Cosine-form sinusoid: `offset + amp·cos(omega·t + phase)`.
    pub fn cosine(amp: f64, omega: f64, phase: f64, offset: f64) -> Self {
        TimeSignal::Sinusoid { amp, omega, phase, offset, form: Waveform::Cos }
    }

    /// Sine-form sinusoid: `offset + amp·sin(omega·t + phase)`.
    pub fn sine(amp: f64, omega: f64, phase: f64, offset: f64) -> Self {
        TimeSignal::Sinusoid { amp, omega, phase, offset, form: Waveform::Sin }
    }

    pub fn exp_envelope(rho0: f64, rho_inf: f64, decay: f64) -> Self {
        TimeSignal::ExpEnvelope { rho0, rho_inf, decay }
    }

    pub fn sum(terms: Vec<TimeSignal>) -> Self {
        TimeSignal::Sum { terms }
    }

    pub fn scaled(coeff: f64, inner: TimeSignal) -> Self {
        TimeSignal::Scaled { coeff, inner: Box::new(inner) }
    }

    /// Convenience for `self + other`.
    pub fn plus(self, other: TimeSignal) -> Self {
        TimeSignal::Sum { terms: vec![self, other] }
    }

    /// Convenience for `self - other`.
    pub fn minus(self, other: TimeSignal) -> Self {
        TimeSignal::Sum { terms: vec![self, TimeSignal::scaled(-1.0, other)] }
    }

    /// Signal value at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeSignal::Constant { value } => *value,
            TimeSignal::Sinusoid { amp, omega, phase, offset, form } => {
                let arg = omega * t + phase;
                match form {
                    Waveform::Cos => offset + amp * arg.cos(),
                    Waveform::Sin => offset + amp * arg.sin(),
                }
            }
            TimeSignal::ExpEnvelope { rho0, rho_inf, decay } => {
                (rho0 - rho_inf) * (-decay * t).exp() + rho_inf
            }
            TimeSignal::Sum { terms } => terms.iter().map(|s| s.value(t)).sum(),
            TimeSignal::Scaled { coeff, inner } => coeff * inner.value(t),
        }
    }

    /// Analytic first derivative of [`value`](Self::value) at time `t`.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeSignal::Constant { .. } => 0.0,
            TimeSignal::Sinusoid { amp, omega, phase, form, .. } => {
                let arg = omega * t + phase;
                match form {
                    Waveform::Cos => -amp * omega * arg.sin(),
                    Waveform::Sin => amp * omega * arg.cos(),
                }
            }
            TimeSignal::ExpEnvelope { rho0, rho_inf, decay } => {
                -decay * (rho0 - rho_inf) * (-decay * t).exp()
            }
            TimeSignal::Sum { terms } => terms.iter().map(|s| s.derivative(t)).sum(),
            TimeSignal::Scaled { coeff, inner } => coeff * inner.derivative(t),
        }
    }
}
