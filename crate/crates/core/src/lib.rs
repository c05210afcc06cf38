//! Simulation and verification toolkit for alignment (flocking) particle
//! dynamics and their large-ensemble limits: explicit Euler integration of
//! the interacting system, exact Wasserstein-2 distances between empirical
//! measures via linear assignment, the closed-form constants of the
//! flocking regime, and deterministic parallel Monte Carlo studies of the
//! coupling error.

pub mod assignment;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod quadrature;
pub mod rng;
pub mod theory;

pub use dynamics::{
    rhs, sample_initial, simulate, step, InitialLaw, ModelParams, ParticleEnsemble,
    RecordedObservables, Trajectory,
};
pub use error::{Error, Result};
pub use experiments::{
    aggregate, monte_carlo, run_coupling, run_simulation, run_stability, run_telescope,
    run_w2_rate, ExperimentConfig, ExperimentReport, MonteCarloStats, SeriesStats,
    StabilityDiagnostics,
};
pub use measures::{
    empirical, normalized_config_distance, recenter_config, recenter_measure, w2, w2_bruteforce,
    w2_with_cap, AssignmentResult, EmpiricalMeasure, Normalization, DEFAULT_SIZE_CAP,
};
pub use theory::{
    c_mf, c_stab, flocking_condition, tail_integral, tail_integral_numeric, validate_rate,
    x_infinity, x_infinity_bisection, CommunicationRate, RateSpec, StabilityVariant,
    TheoryConstants,
};
