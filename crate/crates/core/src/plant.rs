//! Integrator-chain plant with a lumped stochastic disturbance:
//!
//! ```text
//! ẋ_i = x_{i+1}   (i = 1..n-1)
//! ẋ_n = f(t, x, v₁, v₂) + u(t)
//! y   = x₁
//! ```
//!
//! The extended state x_{n+1}(t) := f(t, x(t), v₁(t), v₂(t)) is what the
//! observers estimate alongside x.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Caller-provided disturbance evaluation f(t, x, v₁, v₂).
pub type DisturbanceHook = Arc<dyn Fn(f64, &[f64], f64, f64) -> f64 + Send + Sync>;

/// Shape of the total disturbance f(t, x, v₁, v₂).
///
/// `DampedSinusoid` is the benchmark form
/// -b₁x₁ - b₂x₂ + b₃·sin(b₄x₁ + b₅x₂) + v₁ + b₉·v₂ with b₁, b₂ > 0. The
/// bounded-noise factor arrives pre-evaluated as v₁ (its amplitude is b₆ and
/// its phase parameters b₇, b₈ live in the noise configuration, which owns
/// all Brownian access); b₆..b₈ are carried here only so a configuration is
/// self-describing.
#[derive(Clone)]
pub enum DisturbanceSpec {
    DampedSinusoid { b: [f64; 9] },
    Constant { c: f64 },
    Zero,
    Custom(DisturbanceHook),
}

impl fmt::Debug for DisturbanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisturbanceSpec::DampedSinusoid { b } => write!(f, "DampedSinusoid({b:?})"),
            DisturbanceSpec::Constant { c } => write!(f, "Constant({c})"),
            DisturbanceSpec::Zero => write!(f, "Zero"),
            DisturbanceSpec::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Known control input u(t).
#[derive(Clone)]
pub enum InputSignal {
    /// u(t) = cos(freq · t).
    Cosine {
        freq: f64,
    },
    Zero,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSignal::Cosine { freq } => write!(f, "Cosine({freq})"),
            InputSignal::Zero => write!(f, "Zero"),
            InputSignal::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Plant order, initial state, disturbance and input.
#[derive(Debug, Clone)]
pub struct PlantConfig {
    pub n: usize,
    pub x_init: Vec<f64>,
    pub disturbance: DisturbanceSpec,
    pub input: InputSignal,
    /// Diagnostic threshold: trajectories report (not fail) when any |x_i|
    /// first exceeds this.
    pub sanity_bound: f64,
}

pub const DEFAULT_SANITY_BOUND: f64 = 1e6;

impl PlantConfig {
    pub fn new(
        n: usize,
        x_init: Vec<f64>,
        disturbance: DisturbanceSpec,
        input: InputSignal,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("plant order n must be >= 1".into()));
        }
        if x_init.len() != n {
            return Err(Error::InvalidArgument(format!(
                "x_init has {} components, plant order is {n}",
                x_init.len()
            )));
        }
        if x_init.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("x_init must be finite".into()));
        }
        match &disturbance {
            DisturbanceSpec::DampedSinusoid { b } => {
                if !(b[0] > 0.0 && b[1] > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "damped sinusoid needs b1 > 0 and b2 > 0, got b1={}, b2={}",
                        b[0], b[1]
                    )));
                }
                if n < 2 {
                    return Err(Error::InvalidArgument(
                        "damped sinusoid disturbance reads x1 and x2; plant order must be >= 2"
                            .into(),
                    ));
                }
            }
            DisturbanceSpec::Constant { c } if !c.is_finite() => {
                return Err(Error::InvalidArgument(
                    "constant disturbance must be finite".into(),
                ));
            }
            _ => {}
        }
        Ok(Self {
            n,
            x_init,
            disturbance,
            input,
            sanity_bound: DEFAULT_SANITY_BOUND,
        })
    }

    pub fn with_sanity_bound(mut self, bound: f64) -> Self {
        self.sanity_bound = bound;
        self
    }
}

/// Evaluates the disturbance f(t, x, v₁, v₂).
pub fn disturbance_eval(
    spec: &DisturbanceSpec,
    t: f64,
    x: &[f64],
    v1: f64,
    v2: f64,
) -> Result<f64> {
    match spec {
        DisturbanceSpec::DampedSinusoid { b } => {
            if x.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "damped sinusoid needs at least 2 state components, got {}",
                    x.len()
                )));
            }
            Ok(-b[0] * x[0] - b[1] * x[1]
                + b[2] * (b[3] * x[0] + b[4] * x[1]).sin()
                + v1
                + b[8] * v2)
        }
        DisturbanceSpec::Constant { c } => Ok(*c),
        DisturbanceSpec::Zero => Ok(0.0),
        DisturbanceSpec::Custom(f) => Ok(f(t, x, v1, v2)),
    }
}

/// Evaluates the input u(t).
pub fn input_eval(input: &InputSignal, t: f64) -> f64 {
    match input {
        InputSignal::Cosine { freq } => (freq * t).cos(),
        InputSignal::Zero => 0.0,
        InputSignal::Custom(f) => f(t),
    }
}

/// Chain derivative (x₂, ..., x_n, f + u), written into `out`.
pub fn plant_derivative_into(
    config: &PlantConfig,
    t: f64,
    x: &[f64],
    v1: f64,
    v2: f64,
    out: &mut [f64],
) -> Result<()> {
    if x.len() != config.n || out.len() != config.n {
        return Err(Error::InvalidArgument(format!(
            "state/derivative must have {} components, got {}/{}",
            config.n,
            x.len(),
            out.len()
        )));
    }
    out[..config.n - 1].copy_from_slice(&x[1..]);
    out[config.n - 1] =
        disturbance_eval(&config.disturbance, t, x, v1, v2)? + input_eval(&config.input, t);
    Ok(())
}

pub fn plant_derivative(
    config: &PlantConfig,
    t: f64,
    x: &[f64],
    v1: f64,
    v2: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; config.n];
    plant_derivative_into(config, t, x, v1, v2, &mut out)?;
    Ok(out)
}

/// The extended state x_{n+1}(t) = f(t, x, v₁, v₂), recorded along
/// trajectories as ground truth for the (n+1)-th estimation error.
pub fn extended_state(config: &PlantConfig, t: f64, x: &[f64], v1: f64, v2: f64) -> Result<f64> {
    if x.len() != config.n {
        return Err(Error::InvalidArgument(format!(
            "state must have {} components, got {}",
            config.n,
            x.len()
        )));
    }
    disturbance_eval(&config.disturbance, t, x, v1, v2)
}
