//! Transition probabilities for a linear diabatic level crossing a band of
//! `N` levels whose energies decay as `k_j / t` (a "Coulomb band").
//!
//! The Schrödinger system for the amplitudes `b_0`, `a_1..a_N` is
//!
//! ```text
//! i db0/dτ = β τ b0 + Σ_j g_j a_j
//! i daj/dτ = (k_j / τ) a_j + g_j b0
//! ```
//!
//! with `t = τ²/2`. The crate provides:
//!
//! * [`model`] — parameter validation, the characteristic polynomial and its
//!   `N` real roots;
//! * [`special`] — complex log-Gamma, Stirling numbers, falling factorials;
//! * [`analytic`] — every closed-form probability: the exact survival
//!   probability `P00`, the degenerate-band and independent-crossing limits,
//!   the `N = 2` closed forms, the band-to-level asymptote `P_q0` and the
//!   level-to-band asymptote `P_0j(t)`;
//! * [`propagator`] — an adaptive Runge-Kutta integrator for the same system,
//!   serving as an independent numerical oracle for all of the above.

pub mod analytic;
pub mod model;
pub mod propagator;
pub mod special;

pub use analytic::{
    band_coefficients, n2_probabilities, n2_roots, p00_degenerate, p00_independent_crossings,
    p0j_asymptote, p0j_curve, pq0_asymptote, pq0_time_average, survival_probability, AnalyticError,
    BandCoefficients, N2Probabilities, P0jCurve, ProbabilityReport,
};
pub use model::{
    build_char_poly, find_roots, find_roots_companion, CharacteristicRoots, ModelError, ModelParams,
};
pub use propagator::{
    converged_p00, init_band, init_level0, propagate, time_averaged_population, AmplitudeState,
    ConvergedP00, InitialCondition, IntegratorConfig, PropagatorError, TimeAverage,
};
pub use special::{falling_factorial, log_gamma, stirling2, SpecialFnError};

#[cfg(doctest)]
mod book_doctests;
