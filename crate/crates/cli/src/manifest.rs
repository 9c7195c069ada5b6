//! Run manifests: a versioned TOML file describing plant, noise, designs,
//! simulation grid and per-command parameters.
//!
//! Parsing re-validates every cross-field invariant by constructing the core
//! configuration types; a manifest that parses and converts is exactly a
//! manifest the engine will accept.

use serde::{Deserialize, Serialize};

use eteso_core::{
    BoundedNoise, CompanionGains, Design, DesignSpec, DisturbanceSpec, GainPolicy, InputSignal,
    LinearDesign, NoiseConfig, NonlinearDesign, PlantConfig, SimConfig, SweepConfig, DEFAULT_ZETA,
};

use crate::CliError;

/// Manifest schema understood by this tool version.
pub const SCHEMA_VERSION: u32 = 1;

fn default_theta() -> f64 {
    1.0
}
fn default_zeta() -> f64 {
    DEFAULT_ZETA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub plant: PlantSection,
    pub noise: NoiseSection,
    pub design: DesignSection,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSection {
    pub n: usize,
    pub x_init: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sanity_bound: Option<f64>,
    pub disturbance: DisturbanceSection,
    pub input: InputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceSection {
    /// -b1·x1 - b2·x2 + b3·sin(b4·x1 + b5·x2) + v1 + b9·v2, with the
    /// bounded noise v1 (amplitude b6, coefficients b7, b8) supplied by the
    /// noise section.
    DampedSinusoid {
        b: Vec<f64>,
    },
    Constant {
        c: f64,
    },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSection {
    /// u(t) = cos(freq·t).
    Cosine {
        freq: f64,
    },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSection {
    pub alpha1: f64,
    pub alpha2: f64,
    #[serde(default)]
    pub v2_init: f64,
    #[serde(flatten)]
    pub bounded: BoundedSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BoundedSection {
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinear: Option<NonlinearSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSection {
    pub a: Vec<f64>,
    pub r: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_theta")]
    pub epsilon: f64,
    /// Accept r below the theoretical floor r* (reported, not enforced).
    #[serde(default)]
    pub allow_r_below_r_star: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearSection {
    pub a: Vec<f64>,
    pub r: f64,
    pub p: f64,
    pub nu: f64,
    /// Analysis exponent for reported rates; defaults to the interval
    /// midpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default = "default_theta")]
    pub theta_star: f64,
    #[serde(default = "default_theta")]
    pub epsilon_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSection {
    pub t_end: f64,
    pub master_seed: u64,
    pub paths: usize,
    /// Step size; omitted means dwell/20 of the tightest configured ETM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverChoice {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverChoice>,
    /// Include the scaled error variables as extra trajectory columns.
    #[serde(default)]
    pub eta: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EnsembleSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_start: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub r_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_start: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CompareSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_start: Option<f64>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| CliError::Manifest(format!("parse error: {e}")))?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(CliError::Manifest(format!(
                "schema_version {} not accepted; this tool reads version {SCHEMA_VERSION}",
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Manifest(format!("serialize error: {e}")))
    }

    pub fn plant_config(&self) -> Result<PlantConfig, CliError> {
        let disturbance = match &self.plant.disturbance {
            DisturbanceSection::DampedSinusoid { b } => {
                if b.len() != 9 {
                    return Err(CliError::Manifest(format!(
                        "damped_sinusoid needs exactly 9 coefficients b1..b9, got {}",
                        b.len()
                    )));
                }
                let mut arr = [0.0; 9];
                arr.copy_from_slice(b);
                DisturbanceSpec::DampedSinusoid { b: arr }
            }
            DisturbanceSection::Constant { c } => DisturbanceSpec::Constant { c: *c },
            DisturbanceSection::Zero => DisturbanceSpec::Zero,
        };
        let input = match &self.plant.input {
            InputSection::Cosine { freq } => InputSignal::Cosine { freq: *freq },
            InputSection::Zero => InputSignal::Zero,
        };
        let mut config =
            PlantConfig::new(self.plant.n, self.plant.x_init.clone(), disturbance, input)?;
        if let Some(bound) = self.plant.sanity_bound {
            config = config.with_sanity_bound(bound);
        }
        Ok(config)
    }

    pub fn noise_config(&self) -> Result<NoiseConfig, CliError> {
        let bounded = match &self.noise.bounded {
            BoundedSection::SinAffine {
                amplitude,
                t_coeff,
                b_coeff,
            } => BoundedNoise::SinAffine {
                amplitude: *amplitude,
                t_coeff: *t_coeff,
                b_coeff: *b_coeff,
            },
            BoundedSection::CosAffine {
                amplitude,
                t_coeff,
                b_coeff,
            } => BoundedNoise::CosAffine {
                amplitude: *amplitude,
                t_coeff: *t_coeff,
                b_coeff: *b_coeff,
            },
            BoundedSection::DeterministicOnly {
                amplitude,
                t_coeff,
                b_coeff,
            } => BoundedNoise::DeterministicOnly {
                amplitude: *amplitude,
                t_coeff: *t_coeff,
                b_coeff: *b_coeff,
            },
        };
        Ok(NoiseConfig::new(
            bounded,
            self.noise.alpha1,
            self.noise.alpha2,
            self.noise.v2_init,
        )?)
    }

    pub fn linear_design(&self) -> Result<LinearDesign, CliError> {
        let section =
            self.design.linear.as_ref().ok_or_else(|| {
                CliError::Manifest("manifest has no [design.linear] section".into())
            })?;
        let gains = CompanionGains::new(section.a.clone())?;
        let policy = if section.allow_r_below_r_star {
            GainPolicy::AllowBelowRStar
        } else {
            GainPolicy::Strict
        };
        Ok(LinearDesign::with_policy(
            gains,
            section.r,
            section.zeta,
            section.theta,
            section.epsilon,
            policy,
        )?)
    }

    pub fn nonlinear_design(&self) -> Result<NonlinearDesign, CliError> {
        let section = self.design.nonlinear.as_ref().ok_or_else(|| {
            CliError::Manifest("manifest has no [design.nonlinear] section".into())
        })?;
        let gains = CompanionGains::new(section.a.clone())?;
        Ok(NonlinearDesign::new(
            gains,
            section.r,
            section.p,
            section.nu,
            section.mu,
            section.theta_star,
            section.epsilon_star,
        )?)
    }

    /// Resolves which observer a command should use: the explicit choice, or
    /// the only design present.
    pub fn pick_observer(
        &self,
        choice: Option<ObserverChoice>,
    ) -> Result<ObserverChoice, CliError> {
        if let Some(c) = choice {
            return Ok(c);
        }
        match (&self.design.linear, &self.design.nonlinear) {
            (Some(_), None) => Ok(ObserverChoice::Linear),
            (None, Some(_)) => Ok(ObserverChoice::Nonlinear),
            (Some(_), Some(_)) => Err(CliError::Manifest(
                "both designs are configured; set observer = \"linear\" or \"nonlinear\"".into(),
            )),
            (None, None) => Err(CliError::Manifest(
                "manifest configures no observer design".into(),
            )),
        }
    }

    pub fn design_for(&self, choice: ObserverChoice) -> Result<Design, CliError> {
        Ok(match choice {
            ObserverChoice::Linear => Design::Linear(self.linear_design()?),
            ObserverChoice::Nonlinear => Design::Nonlinear(self.nonlinear_design()?),
        })
    }

    /// Template for gain sweeps (the swept design without its r).
    pub fn design_spec(&self, choice: ObserverChoice) -> Result<DesignSpec, CliError> {
        Ok(match choice {
            ObserverChoice::Linear => {
                let s = self.design.linear.as_ref().ok_or_else(|| {
                    CliError::Manifest("manifest has no [design.linear] section".into())
                })?;
                DesignSpec::Linear {
                    a: s.a.clone(),
                    zeta: s.zeta,
                    theta: s.theta,
                    epsilon: s.epsilon,
                    policy: if s.allow_r_below_r_star {
                        GainPolicy::AllowBelowRStar
                    } else {
                        GainPolicy::Strict
                    },
                }
            }
            ObserverChoice::Nonlinear => {
                let s = self.design.nonlinear.as_ref().ok_or_else(|| {
                    CliError::Manifest("manifest has no [design.nonlinear] section".into())
                })?;
                DesignSpec::Nonlinear {
                    a: s.a.clone(),
                    p: s.p,
                    nu: s.nu,
                    mu: s.mu,
                    theta_star: s.theta_star,
                    epsilon_star: s.epsilon_star,
                }
            }
        })
    }

    /// Concrete simulation grid: explicit h, or dwell/20 of the tightest
    /// ETM among `dwells`.
    pub fn sim_config(
        &self,
        dwells: &[f64],
        seed_override: Option<u64>,
        paths_override: Option<usize>,
    ) -> Result<SimConfig, CliError> {
        let min_dwell = dwells.iter().copied().fold(f64::INFINITY, f64::min);
        let h = self.sim.h.unwrap_or(min_dwell / 20.0);
        let sim = SimConfig::new(
            h,
            self.sim.t_end,
            seed_override.unwrap_or(self.sim.master_seed),
            paths_override.unwrap_or(self.sim.paths),
            self.sim.record_stride,
        )?;
        for dwell in dwells {
            sim.validate_against_dwell(*dwell)?;
        }
        Ok(sim)
    }

    pub fn sweep_config(
        &self,
        seed_override: Option<u64>,
        paths_override: Option<usize>,
    ) -> SweepConfig {
        SweepConfig {
            h: self.sim.h,
            t_end: self.sim.t_end,
            master_seed: seed_override.unwrap_or(self.sim.master_seed),
            paths: paths_override.unwrap_or(self.sim.paths),
            record_stride: self.sim.record_stride,
        }
    }
}
