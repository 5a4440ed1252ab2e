//! Shared fixtures for the benchmarks.

use thermops_core::{thermal_state, CollisionUnitary, DiagonalState, EnergySpec, EnsembleConfig, PerturbationSpec};

/// Qubit setup with the reference noise level.
pub fn qubit_ensemble(runs: usize, steps: usize) -> EnsembleConfig {
    EnsembleConfig {
        runs,
        steps,
        master_seed: 1,
        spec: EnergySpec::new(2, 2.0, 1.0).unwrap(),
        pert: PerturbationSpec::gaussian(0.1).unwrap(),
        unitary: CollisionUnitary::partial_swap(0.1).unwrap(),
        initial: DiagonalState::ground(2).unwrap(),
        alphas: vec![
            thermops_core::Alpha::Finite(0.5),
            thermops_core::Alpha::ONE,
            thermops_core::Alpha::Infinity,
        ],
    }
}

/// A mixed state and a thermal reservoir in dimension d.
pub fn state_pair(d: usize) -> (DiagonalState, DiagonalState) {
    let w: Vec<f64> = (1..=d).map(|j| j as f64).collect();
    let s: f64 = w.iter().sum();
    let p = DiagonalState::new(w.into_iter().map(|x| x / s).collect()).unwrap();
    (p, thermal_state(&EnergySpec::new(d, 2.0, 1.0).unwrap(), 0.05))
}
