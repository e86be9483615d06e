//! Simulation and decision tools for stochastic wealth processes.
//!
//! The crate simulates continuous (Itô) and discrete wealth dynamics,
//! estimates the four growth-rate notions (finite-time, sample-average,
//! time-average, ensemble-average) under a monotone transformation of
//! wealth, decides whether a dynamic admits an ergodic transformation and
//! derives it, ranks processes by time-average growth, and replays a
//! gamble-choice experiment with competing decision agents.

// Validation guards are written as negations like `!(x > 0.0)` on
// purpose: unlike `x <= 0.0`, they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ce;
pub mod config;
pub mod error;
pub mod expr;
pub mod growth;
pub mod preference;
pub mod rng;
pub mod swp;
pub mod transform;

pub use ce::{
    decide_backward_induction, decide_ergodicity, decide_static_exponential, generate_trials,
    run_game, AgentOutcome, AgentSpec, BiPlan, CEConfig, Choice, GameResult, Gamble, Trial,
    WealthUpdate,
};
pub use config::{
    AgentSection, BudgetSection, BuiltProcess, CalibrateSection, CeSection, DomainSpec,
    DynamicsSection, ProcessSpec, RunConfig, TransformSection,
};
pub use error::{Error, Result};
pub use growth::{
    diagnose_ensemble, ensemble_rate, ergodicity_diagnostic, growth_report, rate_of_change,
    sample_average_rate, time_average_rate, Budget, Checkpoint, DiagnosticReport,
    EnsembleRateEstimate, GrowthReport, RateEstimate, SubsetEstimate, TimeAverageEstimate,
    Verdict,
};
pub use preference::{
    certainty_growth_equivalent, fit_discount, mixture, rank, representation_value,
    risk_adjusted_transform, unique_alpha_star, AlphaStarResult, CertaintyEquivalent,
    DiscountFit, Preference, QueryPosition, RankThresholds, RankingResult,
    RepresentationFrame, RepresentationValue,
};
pub use swp::{
    build_ito, simulate_discrete, simulate_ito, DiscreteDynamics, Ensemble, Family, GambleMode,
    Interval, ItoDynamics,
};
pub use transform::{
    apply_transform, check_ergodizable, default_check_grid, derive_transform, verify_levy,
    ErgodizabilityReport, LevyReport, NumericTable, TransformForm, TransformRole, TransformSpec,
};
