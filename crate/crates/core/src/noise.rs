//! Stochastic inputs: two independent Brownian motions B₁, B₂, the bounded
//! noise v₁(t) = σ(t, B₁(t)), and the exponentially correlated colored noise
//!
//! ```text
//! dv₂(t) = -α₁ v₂(t) dt + α₁ √(2α₂) dB₂(t)
//! ```
//!
//! v₂ is advanced by its exact Gaussian transition kernel (no discretization
//! error): v₂(t+h) = e^(-α₁h) v₂(t) + N(0, α₁α₂(1 - e^(-2α₁h))), which has
//! stationary variance α₁α₂.
//!
//! Reproducibility contract: per step exactly two standard normal draws are
//! consumed, in the fixed order (z₁ for ΔB₁, z₂ shared by ΔB₂ and the OU
//! innovation). Gaussians come from Box-Muller over a counter-based ChaCha
//! stream, so a (master seed, path index) pair pins the whole sequence
//! bit-for-bit regardless of what other threads do.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Source of standard normal draws. Implemented by the production
/// Box-Muller generator and by degenerate test sources.
pub trait GaussianSource {
    fn next_gaussian(&mut self) -> f64;
}

/// Box-Muller transform over a seeded ChaCha stream.
#[derive(Debug, Clone)]
pub struct BoxMullerRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl BoxMullerRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Independent generator for one sample path: the master seed selects the
    /// key, the path index selects the ChaCha stream.
    pub fn for_path(master_seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        Self { rng, spare: None }
    }
}

impl GaussianSource for BoxMullerRng {
    fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1: f64 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Bounded-noise family σ(t, b): the trigonometric-affine forms take the
/// argument t_coeff·t + b_coeff·B₁(t); `DeterministicOnly` ignores B₁ and
/// reads b_coeff as a fixed phase; `Custom` accepts any σ(t, b) hook, whose
/// boundedness is the caller's promise.
#[derive(Clone)]
pub enum BoundedNoise {
    SinAffine {
        amplitude: f64,
        t_coeff: f64,
        b_coeff: f64,
    },
    CosAffine {
        amplitude: f64,
        t_coeff: f64,
        b_coeff: f64,
    },
    DeterministicOnly {
        amplitude: f64,
        t_coeff: f64,
        b_coeff: f64,
    },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for BoundedNoise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundedNoise::SinAffine {
                amplitude,
                t_coeff,
                b_coeff,
            } => write!(f, "SinAffine({amplitude}, {t_coeff}, {b_coeff})"),
            BoundedNoise::CosAffine {
                amplitude,
                t_coeff,
                b_coeff,
            } => write!(f, "CosAffine({amplitude}, {t_coeff}, {b_coeff})"),
            BoundedNoise::DeterministicOnly {
                amplitude,
                t_coeff,
                b_coeff,
            } => write!(f, "DeterministicOnly({amplitude}, {t_coeff}, {b_coeff})"),
            BoundedNoise::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl BoundedNoise {
    /// The amplitude bound |v₁| <= |amplitude|, when the family exposes one.
    pub fn amplitude(&self) -> Option<f64> {
        match self {
            BoundedNoise::SinAffine { amplitude, .. }
            | BoundedNoise::CosAffine { amplitude, .. }
            | BoundedNoise::DeterministicOnly { amplitude, .. } => Some(*amplitude),
            BoundedNoise::Custom(_) => None,
        }
    }
}

/// Parameters of the stochastic inputs.
#[derive(Debug, Clone)]
pub struct NoiseConfig {
    pub bounded: BoundedNoise,
    /// Correlation rate α₁ > 0 of the colored noise.
    pub alpha1: f64,
    /// Intensity α₂ > 0 of the colored noise.
    pub alpha2: f64,
    /// v₂(0).
    pub v2_init: f64,
}

impl NoiseConfig {
    pub fn new(bounded: BoundedNoise, alpha1: f64, alpha2: f64, v2_init: f64) -> Result<Self> {
        let cfg = Self {
            bounded,
            alpha1,
            alpha2,
            v2_init,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 > 0.0 && self.alpha1.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "correlation rate alpha1 must be positive, got {}",
                self.alpha1
            )));
        }
        if !(self.alpha2 > 0.0 && self.alpha2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise intensity alpha2 must be positive, got {}",
                self.alpha2
            )));
        }
        if let Some(a) = self.bounded.amplitude() {
            if !a.is_finite() {
                return Err(Error::InvalidArgument(
                    "bounded-noise amplitude must be finite".into(),
                ));
            }
        }
        if !self.v2_init.is_finite() {
            return Err(Error::InvalidArgument("v2_init must be finite".into()));
        }
        Ok(())
    }
}

/// Live noise values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseState {
    pub t: f64,
    /// B₁(t).
    pub b1: f64,
    /// B₂(t).
    pub b2: f64,
    /// Colored-noise value v₂(t).
    pub v2: f64,
}

impl NoiseState {
    pub fn initial(config: &NoiseConfig) -> Self {
        Self {
            t: 0.0,
            b1: 0.0,
            b2: 0.0,
            v2: config.v2_init,
        }
    }
}

/// Advances the noise state by one step of size h > 0.
///
/// Draw order per step: z₁ updates B₁, z₂ updates B₂ and the OU innovation
/// (same draw). The OU update is the exact transition
/// v₂' = e^(-α₁h)·v₂ + √(α₁α₂(1 - e^(-2α₁h)))·z₂.
pub fn advance<S: GaussianSource>(
    state: &NoiseState,
    h: f64,
    config: &NoiseConfig,
    source: &mut S,
) -> Result<NoiseState> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step size h must be positive, got {h}"
        )));
    }
    let sqrt_h = h.sqrt();
    let z1 = source.next_gaussian();
    let z2 = source.next_gaussian();
    let decay = (-config.alpha1 * h).exp();
    let ou_std = (config.alpha1 * config.alpha2 * (1.0 - decay * decay)).sqrt();
    Ok(NoiseState {
        t: state.t + h,
        b1: state.b1 + sqrt_h * z1,
        b2: state.b2 + sqrt_h * z2,
        v2: decay * state.v2 + ou_std * z2,
    })
}

/// Evaluates the bounded noise v₁ = σ(t, B₁(t)).
pub fn bounded_eval(config: &NoiseConfig, t: f64, b1: f64) -> f64 {
    match &config.bounded {
        BoundedNoise::SinAffine {
            amplitude,
            t_coeff,
            b_coeff,
        } => amplitude * (t_coeff * t + b_coeff * b1).sin(),
        BoundedNoise::CosAffine {
            amplitude,
            t_coeff,
            b_coeff,
        } => amplitude * (t_coeff * t + b_coeff * b1).cos(),
        BoundedNoise::DeterministicOnly {
            amplitude,
            t_coeff,
            b_coeff,
        } => amplitude * (t_coeff * t + b_coeff).cos(),
        BoundedNoise::Custom(f) => f(t, b1),
    }
}
