//! A unified horizontal-differentiation game on compact manifolds: softmin
//! demand, profit gradient-ascent dynamics, analytic concentrated-equilibrium
//! checkers, phase-transition thresholds, and an experiment harness.
//!
//! The library is organized bottom-up:
//! - [`geometry`]: manifold families (segment, circle, hypercube, torus,
//!   products), geodesic distances and gradients, quadrature, and the
//!   aggregate distance integrals `I1`/`I2`.
//! - [`market`]: softmin choice probabilities, demand, profit, welfare, and
//!   their analytic derivatives and concentrated-point Hessian spectra.
//! - [`dynamics`]: synchronous gradient-ascent simulation and outcome
//!   classification.
//! - [`equilibrium`]: median sets, the concentrated price, curvature
//!   conditions, β thresholds, learning-rate bounds, and Nash reports.
//! - [`experiments`]: phase diagrams, threshold localization, Eaton–Lipsey
//!   pattern detection, and the cylinder separability demo.
//! - [`config`] / [`output`]: run configuration and plot-ready CSV emission
//!   for the CLI.

pub mod config;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod market;
pub mod output;

pub use config::RunConfig;
pub use dynamics::{
    classify_outcome, simulate, OutcomeKind, OutcomeLabel, SimOptions, TerminationReason,
    Trajectory,
};
pub use equilibrium::{
    beta_threshold, check_nash_concentrated, concentrated_price, curvature_condition,
    estimate_ihat, learning_rate_bounds, median_set, reachability_beta_threshold,
    separability_check, CardinalityClass, EquilibriumReport, LearningRateBounds, MedianSet,
};
pub use error::{ModelError, Result};
pub use experiments::{
    cylinder_demo, detect_eaton_lipsey, empirical_threshold, phase_sweep, EatonLipseyPattern,
    PhaseCell, PhaseDiagram,
};
pub use geometry::{
    gauss_legendre, gauss_legendre_on, CoordKind, CoordSpec, DistanceIntegrals, ManifoldModel,
    Point, Provenance, QuadratureRule, TangentVector,
};
pub use market::{
    choice_probabilities, concentrated_hessian_eigenvalues, demand_profile, laplace_crossterm,
    limiting_boundary_markup, profit_gradient, ConcentratedCurvature, DemandProfile,
    MarketConfig, MarketState, ProfitGradient,
};
