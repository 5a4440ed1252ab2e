//! Thermal operations with inhomogeneous reservoirs.
//!
//! A qudit repeatedly collides with ancillas prepared in thermal states whose
//! couplings g0 (1 + delta) carry Gaussian noise. The crate tracks the Rényi
//! divergences D_alpha(rho_r || tau_S) along single realizations and
//! ensembles of them, and checks whether they decrease monotonically.

pub mod collision;
pub mod divergence;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod quadrature;
pub mod qudit;

pub use collision::{
    analytic_trajectory, block_dimensions, build_block_unitary, collide, energy_audit, free_parameter_count,
    reference_collide, simulate_single_shot, BlockParams, BlockUnitary, CollisionUnitary, EnergyAudit,
    TrajectoryRecord,
};
pub use divergence::{divergence_profile, free_energy, renyi_divergence, Alpha};
pub use ensemble::{divergence_of_mean, run_ensemble, EnsembleConfig, EnsembleResult};
pub use error::{Error, Result};
pub use geometry::{
    contour_grid, detect_violations, qubit_violation_scan, simplex_coords, straightness_deviation, ContourGrid,
    QubitScan, SimplexPoint, ViolationReport,
};
pub use qudit::{
    energy_levels, ensemble_thermal_state, sample_delta, thermal_state, DiagonalState, EnergySpec, PerturbationSpec,
};
