//! Energy structure of the system qudit, thermal states and the Gaussian
//! coupling perturbation of the reservoir ancillas.
//!
//! Units: hbar = k_B = 1, natural logarithms throughout.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_gaussian_expectation, AdaptiveAverage};

/// Probabilities must sum to one within this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// System dimension, coupling g0 and inverse temperature beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySpec {
    d: usize,
    g0: f64,
    beta: f64,
}

impl EnergySpec {
    pub fn new(d: usize, g0: f64, beta: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::param("d", format!("dimension must be >= 2, got {d}")));
        }
        if !(g0.is_finite() && g0 > 0.0) {
            return Err(Error::param("g0", format!("coupling must be finite and > 0, got {g0}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::param(
                "beta",
                format!("inverse temperature must be finite and >= 0, got {beta}"),
            ));
        }
        Ok(Self { d, g0, beta })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn energy_levels(&self) -> Vec<f64> {
        energy_levels(self)
    }

    /// ln Z_S of the unperturbed reference state.
    pub fn log_partition(&self) -> f64 {
        let exps: Vec<f64> = self.energy_levels().iter().map(|e| -self.beta * e).collect();
        log_sum_exp(&exps)
    }
}

/// Eigenvalues j - (d-1)/2 of s_z.
pub fn spin_projections(d: usize) -> Vec<f64> {
    let mid = (d as f64 - 1.0) / 2.0;
    (0..d).map(|j| j as f64 - mid).collect()
}

/// E_j = g0 (j - (d-1)/2), ascending.
pub fn energy_levels(spec: &EnergySpec) -> Vec<f64> {
    spin_projections(spec.d).into_iter().map(|s| spec.g0 * s).collect()
}

/// Populations of a state diagonal in the energy eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    probs: Vec<f64>,
}

impl DiagonalState {
    /// Rejects negative, non-finite or unnormalized input; never renormalizes.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidState(format!(
                "need at least 2 levels, got {}",
                probs.len()
            )));
        }
        if let Some((j, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidState(format!(
                "population p_{j} = {p} is not a finite non-negative number"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidState(format!(
                "populations sum to {total}, not 1 (tolerance {NORMALIZATION_TOL:e})"
            )));
        }
        Ok(Self { probs })
    }

    /// Output of an operation that is known to stay on the simplex. Clamps
    /// round-off negatives to zero.
    pub(crate) fn from_simplex(mut probs: Vec<f64>) -> Self {
        for p in &mut probs {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { probs }
    }

    pub fn pure(d: usize, level: usize) -> Result<Self> {
        if level >= d {
            return Err(Error::param("level", format!("level {level} out of range for d = {d}")));
        }
        let mut probs = vec![0.0; d];
        probs[level] = 1.0;
        Self::new(probs)
    }

    pub fn ground(d: usize) -> Result<Self> {
        Self::pure(d, 0)
    }

    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(vec![1.0 / d as f64; d])
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Expectation of a per-level observable.
    pub fn expect(&self, observable: &[f64]) -> f64 {
        self.probs.iter().zip(observable).map(|(p, o)| p * o).sum()
    }

    pub fn l1_distance(&self, other: &DiagonalState) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum()
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Gaussian distribution of the relative coupling shifts delta_r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    variance: f64,
}

impl PerturbationSpec {
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::param(
                "delta_variance",
                format!("variance must be finite and >= 0, got {variance}"),
            ));
        }
        Ok(Self { variance })
    }

    pub fn none() -> Self {
        Self { variance: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn is_unperturbed(&self) -> bool {
        self.variance == 0.0
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Boltzmann populations for coupling g0 (1 + delta).
pub fn thermal_state(spec: &EnergySpec, delta: f64) -> DiagonalState {
    let scale = spec.beta * (1.0 + delta);
    let exps: Vec<f64> = energy_levels(spec).iter().map(|e| -scale * e).collect();
    let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exps.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    DiagonalState {
        probs: weights.into_iter().map(|w| w / total).collect(),
    }
}

/// The Gaussian average of thermal_state over delta, together with the
/// quadrature diagnostics.
pub fn ensemble_thermal_state_detailed(
    spec: &EnergySpec,
    pert: &PerturbationSpec,
) -> Result<(DiagonalState, Option<AdaptiveAverage>)> {
    if pert.is_unperturbed() {
        return Ok((thermal_state(spec, 0.0), None));
    }
    let avg = adaptive_gaussian_expectation(pert.std_dev(), spec.d, |delta| thermal_state(spec, delta).probs)?;
    Ok((DiagonalState::from_simplex(avg.value.clone()), Some(avg)))
}

/// tau_bar: the perturbed thermal state averaged over the Gaussian.
pub fn ensemble_thermal_state(spec: &EnergySpec, pert: &PerturbationSpec) -> Result<DiagonalState> {
    ensemble_thermal_state_detailed(spec, pert).map(|(s, _)| s)
}

/// One draw of delta with mean 0 and variance `pert.variance()`. Consumes
/// nothing from the stream when the perturbation is switched off.
pub fn sample_delta<R: Rng + ?Sized>(pert: &PerturbationSpec, rng: &mut R) -> f64 {
    if pert.is_unperturbed() {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    pert.std_dev() * z
}
