//! Solver and verification suite for the radial fast diffusion equation
//! `u_t = (n-1)/m Δu^m` on ℝⁿ: self-similar profiles, their far-field
//! expansion constants, and the long-time convergence of rescaled solutions.

pub mod asymptotics;
pub mod constants;
mod ode;
pub mod pde;
pub mod profile;

pub use asymptotics::{
    analyze, brace_residual, build_diagnostics, expansion_bracket, expansion_eval, extract_k,
    extract_k0, fixed_point_k, k0_from_k, limit_suite, sign_check, yamabe_limit_check, Analysis,
    AsymError, KExtraction, LimitEntry, LimitReport, SignVerdict, WDiagnostics,
};
pub use constants::{
    a0_of, a1_of, classify, derive_constants, k_closed_form, lambda1_of, unit_sphere_area,
    DerivedConstants, ParamError, ProblemParams, Regime,
};
pub use pde::{
    advance, advance_pair, bracket_sup_outer, build_initial, contraction_check, convergence_run,
    decay_bound_diag, field_from_profile, l1_distance, l1_nodal, radial_grid, rescale, sup_distance,
    Bump,
    ContractionReport, ConvergenceConfig, ConvergenceReport, InitialData, K2Diagnostic, OuterBc,
    PdeError, RadialField, StepControl,
};
pub use profile::{
    default_s_start, integrate_profile, residual_stats, scaled_eval, series_origin, OriginSeries,
    Profile, ProfileError, DEFAULT_TOL,
};
