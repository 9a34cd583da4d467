//! Constrained adaptive ad exposure for mixed feeds.
//!
//! Each request picks an exposure template (which slots carry ads) by a constrained beam search
//! that maximizes the knapsack value increment `v - rho * w`. A proportional controller moves the
//! threshold `rho` so the stream's monetization rate tracks a target. The crate also ships the
//! comparison baselines, a synthetic traffic simulator and the `hca2e` command-line tool.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod controller;
pub mod error;
pub mod evaluator;
pub mod io;
pub mod knapsack;
pub mod model;
pub mod search;
pub mod simulator;

pub use controller::{ControllerConfig, ControllerState, WindowReport};
pub use error::{Error, Result};
pub use evaluator::{score_template, TemplateScore, TradeoffParams};
pub use model::{
    merge_rpp, validate_template, Candidate, CandidateKind, ExposureTemplate, MergedPage, Request,
    RequestConstraints, SlotExposureModel,
};
pub use search::{ets_search, exhaustive_oracle, finalize_template, SearchConfig, SearchOutcome};
