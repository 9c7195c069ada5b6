//! Shared fixtures for the criterion benchmarks in `benches/`.

use eteso_core::{
    BoundedNoise, CompanionGains, Design, DisturbanceSpec, GainPolicy, InputSignal, LinearDesign,
    NoiseConfig, NonlinearDesign, PlantConfig,
};

/// Benchmark gains a = (3, 3, 1), i.e. (s+1)^3 poles.
pub fn gains() -> CompanionGains {
    CompanionGains::new(vec![3.0, 3.0, 1.0]).unwrap()
}

pub fn linear_design(r: f64) -> LinearDesign {
    LinearDesign::with_policy(gains(), r, 0.9, 1.0, 1.0, GainPolicy::AllowBelowRStar).unwrap()
}

pub fn nonlinear_design(r: f64) -> NonlinearDesign {
    NonlinearDesign::new(gains(), r, 3.0, 6.0 / 7.0, None, 1.0, 1.0).unwrap()
}

pub fn designs(r: f64) -> (Design, Design) {
    (
        Design::Linear(linear_design(r)),
        Design::Nonlinear(nonlinear_design(r)),
    )
}

/// Second-order benchmark plant with both noise couplings active.
pub fn plant() -> PlantConfig {
    PlantConfig::new(
        2,
        vec![1.0, -1.0],
        DisturbanceSpec::DampedSinusoid {
            b: [2.0, 2.0, 1.5, 1.5, 1.5, 1.5, 2.5, 2.5, 2.5],
        },
        InputSignal::Cosine { freq: 2.5 },
    )
    .unwrap()
}

pub fn noise() -> NoiseConfig {
    NoiseConfig::new(
        BoundedNoise::CosAffine {
            amplitude: 1.5,
            t_coeff: 2.5,
            b_coeff: 2.5,
        },
        2.0,
        2.0,
        0.0,
    )
    .unwrap()
}
