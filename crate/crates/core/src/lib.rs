//! Numerical laboratory for the periodic very fast diffusion equation
//!
//! ```text
//! ∂t f = −r ∂x( f ∂x(ρ / f^{r+1}) ),   x ∈ [0, 1) periodic, r > 1,
//! ```
//!
//! the Wasserstein gradient flow of `F_ρ[f] = ∫ ρ / f^r`, together with its
//! Lagrangian form, circle optimal transport, convergence diagnostics and
//! the N-point quantization energy it arises from.
//!
//! Everything is generic over the scalar type through [`Real`]; the aliases
//! at the crate root fix it to `f64`.

// `!(x > 0)` is deliberate throughout: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod diagnostics;
pub mod error;
pub mod eulerian;
pub mod experiment;
pub mod grid;
pub mod lagrangian;
pub mod linalg;
pub mod map;
pub mod params;
pub mod quadrature;
pub mod quantization;
pub mod random;
pub mod rho;
pub mod scalar;
pub mod transport;

pub use density::Density;
pub use diagnostics::{
    alpha, beta_projection, dissipation, energy, fit_decay_rate, hessian_quadratic_form, modulated_energy,
    mu_lower_bound, otto_metric, solve_potential, stationary_density, DecayFit, HessianBoundInputs, RowBuilder,
    TimeSeriesRow,
};
pub use error::{Result, VfdError};
pub use eulerian::{
    comparison_check, evolve, step_implicit, DiagnosticsSink, EulerianSolver, EulerianState, InitialDatum, Preset,
    Trajectory,
};
pub use grid::PeriodicGrid;
pub use lagrangian::{evolve_lagrangian, lagrangian_rhs, pushforward_density, quantile_map};
pub use map::TransportMap;
pub use params::Params;
pub use quantization::{descend, fnr_energy, fnr_gradient, optimal_weights, PointConfig};
pub use rho::RhoSpec;
pub use scalar::Real;
pub use transport::{displacement_interpolate, geodesic_action, optimal_map, w2_circle, AtomicMeasure, CdfTable};

pub type Grid = PeriodicGrid<f64>;
pub type Rho = RhoSpec<f64>;
pub type Dens = Density<f64>;
pub type Map = TransportMap<f64>;
pub type RunParams = Params<f64>;
pub type State = EulerianState<f64>;
pub type Row = TimeSeriesRow<f64>;
pub type Points = PointConfig<f64>;
