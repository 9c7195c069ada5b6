//! Linear and nonlinear event-triggered extended state observers (ESOs) for
//! uncertain stochastic integrator-chain plants, with gain design formulas
//! and a reproducible Monte Carlo harness.
//!
//! The library splits into five parts:
//!
//! * [`gains`] — design-time construction and validation: companion gain
//!   matrix, Hurwitz test, Lyapunov solution, gain floor r*, admissible
//!   (ν, μ) intervals, homogeneity weights, dwell times and trigger
//!   thresholds;
//! * [`noise`] — Brownian motions, bounded noise v₁(t) = σ(t, B₁(t)) and
//!   exponentially correlated (Ornstein–Uhlenbeck) colored noise v₂,
//!   advanced by its exact transition kernel;
//! * [`plant`] — the integrator chain ẋ_n = f(t, x, v₁, v₂) + u with the
//!   extended state x_{n+1} = f;
//! * [`observer`] — the linear and homogeneous nonlinear ESO right-hand
//!   sides and the dwell-time event-triggering rule;
//! * [`engine`] — fixed-step co-simulation, ensembles, gain sweeps and
//!   paired observer comparisons.
//!
//! Everything is deterministic given a (master seed, path index) pair,
//! independent of thread count.

pub mod engine;
pub mod error;
pub mod gains;
pub mod noise;
pub mod observer;
pub mod plant;

pub use nalgebra;

pub use engine::{
    compare_observers, run_ensemble, simulate_path, sweep_r, ComparePath, CompareReport,
    EnsembleStats, Histogram, SimConfig, SweepConfig, SweepResult, SweepRow, Trajectory,
};
pub use error::{Error, Result};
pub use gains::{
    build_companion, homogeneity_residual, homogeneity_weights, homogeneous_field, is_hurwitz,
    linear_r_star, mu_interval, nu_interval, solve_lyapunov, CompanionGains, Design, DesignSpec,
    GainPolicy, LinearDesign, NonlinearDesign, DEFAULT_ZETA,
};
pub use noise::{
    advance as advance_noise, bounded_eval, BoundedNoise, BoxMullerRng, GaussianSource,
    NoiseConfig, NoiseState,
};
pub use observer::{signed_power, EsoState, EtmState, TriggerEvent};
pub use plant::{
    disturbance_eval, extended_state, input_eval, plant_derivative, DisturbanceSpec, InputSignal,
    PlantConfig,
};
