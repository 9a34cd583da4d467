//! Synthetic traffic, simulated users, run orchestration and sweeps.

pub mod generator;
pub mod metrics;
pub mod run;
pub mod sweep;
pub mod user;

pub use generator::{generate_stream, GeneratorConfig, RequestGenerator};
pub use metrics::{ad_position_report, advantage, AdPositionReport, RunMetrics};
pub use run::{
    calibrate_rho, run, CalibrationConfig, Experiment, RequestSource, RunObserver, RunOutput,
    RunSettings, Strategy, StrategyFamily,
};
pub use sweep::{pareto_front, pareto_sweep, pareto_sweep_with, SweepRow};
pub use user::{simulate_user, UserDraws, UserEvent};
