//! Monte Carlo ensembles of single-shot trajectories.
//!
//! Run `i` draws from ChaCha8 stream `i` of `master_seed`, so results do not
//! depend on how runs are scheduled across threads. Aggregation is a
//! sequential reduction in run order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::collision::{
    analytic_trajectory, deterministic_trajectory, divergence_rows, simulate_single_shot, CollisionUnitary,
    TrajectoryRecord,
};
use crate::divergence::Alpha;
use crate::error::{Error, Result};
use crate::qudit::{ensemble_thermal_state, thermal_state, DiagonalState, EnergySpec, PerturbationSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub runs: usize,
    pub steps: usize,
    pub master_seed: u64,
    pub spec: EnergySpec,
    pub pert: PerturbationSpec,
    pub unitary: CollisionUnitary,
    pub initial: DiagonalState,
    pub alphas: Vec<Alpha>,
}

impl EnsembleConfig {
    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::param("runs", "need at least one run"));
        }
        if self.steps == 0 {
            return Err(Error::param("steps", "need at least one collision"));
        }
        self.initial.check_dim(self.spec.d())
    }
}

/// Random stream for one run of an ensemble.
pub fn run_rng(master_seed: u64, run_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub runs: usize,
    pub alphas: Vec<Alpha>,
    /// Unperturbed reference tau_S.
    pub reference: DiagonalState,
    /// Gaussian-averaged thermal state tau_bar.
    pub ensemble_thermal: DiagonalState,
    /// Componentwise Monte Carlo mean of rho_r, r = 0..=steps.
    pub mean_states: Vec<DiagonalState>,
    /// Standard error of each component of `mean_states`.
    pub state_std_errors: Vec<Vec<f64>>,
    /// Exact evolution of the ensemble mean (iterated collisions with tau_bar).
    pub analytic_states: Vec<DiagonalState>,
    /// Run average of D_alpha(rho_r || tau_S), [step][alpha].
    pub mean_divergence: Vec<Vec<f64>>,
    /// Standard error of `mean_divergence`.
    pub std_errors: Vec<Vec<f64>>,
    /// D_alpha(mean_states[r] || tau_S).
    pub divergence_of_mc_mean: Vec<Vec<f64>>,
    /// D_alpha(analytic_states[r] || tau_S).
    pub divergence_of_analytic_mean: Vec<Vec<f64>>,
    /// Run mean and sample standard deviation of the energy change of each
    /// collision.
    pub energy_mean: Vec<f64>,
    pub energy_std: Vec<f64>,
    /// Run 0, kept as the representative single-shot trajectory.
    pub first_trajectory: TrajectoryRecord,
}

impl EnsembleResult {
    pub fn steps(&self) -> usize {
        self.mean_states.len() - 1
    }
}

pub(crate) fn column(table: &[Vec<f64>], i: usize) -> Vec<f64> {
    table.iter().map(|row| row[i]).collect()
}

/// Mean and sample standard deviation of each coordinate over samples.
fn moments<'a, I>(samples: I, n: usize, dim: usize) -> (Vec<f64>, Vec<f64>)
where
    I: Iterator<Item = &'a [f64]> + Clone,
{
    let mut mean = vec![0.0; dim];
    for s in samples.clone() {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; dim];
    if n > 1 {
        for s in samples {
            for ((v, x), m) in var.iter_mut().zip(s).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        for v in &mut var {
            *v /= (n - 1) as f64;
        }
    }
    (mean, var.into_iter().map(f64::sqrt).collect())
}

/// Evolution of the ensemble mean: the collision map is linear in the
/// reservoir state, so the mean follows collisions with tau_bar exactly.
pub fn analytic_ensemble_trajectory(
    initial: &DiagonalState,
    ensemble_thermal: &DiagonalState,
    unitary: &CollisionUnitary,
    steps: usize,
) -> Result<Vec<DiagonalState>> {
    match unitary {
        CollisionUnitary::UniformPartialSwap { theta } => analytic_trajectory(initial, ensemble_thermal, *theta, steps),
        _ => deterministic_trajectory(initial, ensemble_thermal, unitary, steps),
    }
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let records: Vec<TrajectoryRecord> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(cfg.master_seed, i);
            simulate_single_shot(
                &cfg.initial,
                &cfg.spec,
                &cfg.pert,
                &cfg.unitary,
                cfg.steps,
                &cfg.alphas,
                &mut rng,
            )
        })
        .collect::<Result<_>>()?;

    let n = cfg.runs;
    let d = cfg.spec.d();
    let se = |sd: Vec<f64>| -> Vec<f64> { sd.into_iter().map(|s| s / (n as f64).sqrt()).collect() };

    let mut mean_states = Vec::with_capacity(cfg.steps + 1);
    let mut state_std_errors = Vec::with_capacity(cfg.steps + 1);
    let mut mean_divergence = Vec::with_capacity(cfg.steps + 1);
    let mut std_errors = Vec::with_capacity(cfg.steps + 1);
    for r in 0..=cfg.steps {
        let (mean, sd) = moments(records.iter().map(|t| t.states[r].probs()), n, d);
        mean_states.push(DiagonalState::from_simplex(mean));
        state_std_errors.push(se(sd));
        let (mean, sd) = moments(records.iter().map(|t| t.divergences[r].as_slice()), n, cfg.alphas.len());
        mean_divergence.push(mean);
        std_errors.push(se(sd));
    }
    let mut energy_mean = Vec::with_capacity(cfg.steps);
    let mut energy_std = Vec::with_capacity(cfg.steps);
    for r in 0..cfg.steps {
        let (m, sd) = moments(records.iter().map(|t| std::slice::from_ref(&t.energy_ledger[r])), n, 1);
        energy_mean.push(m[0]);
        energy_std.push(sd[0]);
    }

    let reference = thermal_state(&cfg.spec, 0.0);
    let ensemble_thermal = ensemble_thermal_state(&cfg.spec, &cfg.pert)?;
    let analytic_states = analytic_ensemble_trajectory(&cfg.initial, &ensemble_thermal, &cfg.unitary, cfg.steps)?;
    let divergence_of_mc_mean = divergence_rows(&mean_states, &reference, &cfg.alphas)?;
    let divergence_of_analytic_mean = divergence_rows(&analytic_states, &reference, &cfg.alphas)?;

    let first_trajectory = records.into_iter().next().expect("runs >= 1");
    Ok(EnsembleResult {
        runs: n,
        alphas: cfg.alphas.clone(),
        reference,
        ensemble_thermal,
        mean_states,
        state_std_errors,
        analytic_states,
        mean_divergence,
        std_errors,
        divergence_of_mc_mean,
        divergence_of_analytic_mean,
        energy_mean,
        energy_std,
        first_trajectory,
    })
}

/// D_alpha of the Monte Carlo and analytic mean states against tau_S.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanStateDivergences {
    pub mc: Vec<Vec<f64>>,
    pub analytic: Vec<Vec<f64>>,
}

pub fn divergence_of_mean(result: &EnsembleResult, alphas: &[Alpha]) -> Result<MeanStateDivergences> {
    Ok(MeanStateDivergences {
        mc: divergence_rows(&result.mean_states, &result.reference, alphas)?,
        analytic: divergence_rows(&result.analytic_states, &result.reference, alphas)?,
    })
}
