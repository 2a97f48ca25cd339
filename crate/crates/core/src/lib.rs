//! R-norm computations for functions viewed as infinite-width two-layer ReLU networks.

pub mod analysis;
pub mod constants;
pub mod engine;
pub mod error;
pub mod fit;
pub mod grid;
pub mod jet;
pub mod piecewise;
pub mod poly;
pub mod radial;
pub mod radon;
pub mod spectral;

pub use analysis::{
    bump_finiteness_sweep, parallelogram_check, parallelogram_check_scaled, pwl_infinite_certificate,
    pyramid_threelayer, rbar_gap_demo, BumpRow, EquivalenceReport, GapDemoConfig, GapDemoReport,
    InfinityCertificate, ParallelogramReport, RayClass,
};
pub use constants::{constants, Constants};
pub use engine::{
    grad_at_infinity, grad_at_infinity_sampled, laplacian_lower_bound_grid, laplacian_lower_bound_radial,
    rbar_bounds, rnorm_finite_net, rnorm_grid_2d, rnorm_radial_odd, rnorm_radial_odd_dilated, sobolev_upper_bound_2d, FiniteReluNet,
    GradEstimate, Method, RNormReport, RbarBounds, ReluUnit,
};
pub use error::{Error, Result};
pub use fit::{
    build_dictionary, min_norm_fit, solver_settings, refinement_study, refinement_study_sampled, AtomicMeasure, FitProblem, FitResult,
    MeasureAtom, OffsetRange, RefinementRow, RefinementTable, SampledRefinement, Samples, SolverSettings,
};
pub use grid::{GridFunction2D, GridSpec};
pub use piecewise::{
    profile_l1, profile_l1_half_line, pw_derivative, pw_derivative_n, Atom, DistributionalProfile,
    NormValue, PiecewisePolynomial,
};
pub use poly::{Poly, Q};
pub use radial::{radial_radon_profile, ProfileSpec, RadialFunction, RadialProfile};
pub use radon::{dual_radon_2d, fbp_inverse_2d, grid_radon_2d, grid_radon_2d_with_range, DualRadon, Parity, Sinogram};
pub use spectral::{
    boundary_leakage, frac_laplacian_2d, grid_fourier_ray, offset_power_derivative, pwl_fourier_ray,
    PwlCurvatureMeasure2D, RayDecaySample, Segment,
};
