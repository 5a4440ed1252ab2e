//! Mode dispatch: builds the core pipeline for a validated config and writes
//! its outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thermops_core::collision::deterministic_trajectory;
use thermops_core::ensemble::run_rng;
use thermops_core::geometry::{
    default_scan_alphas, detect_table_violations, qubit_violation_scan_with, ANALYTIC_TOL, SAMPLED_TOL,
};
use thermops_core::{
    contour_grid, ensemble_thermal_state, run_ensemble, simulate_single_shot, straightness_deviation, Alpha,
    CollisionUnitary, EnsembleConfig, Error as CoreError,
};

use crate::config::{ConfigError, Mode, RunConfig};
use crate::output::{self, AlphaJson, SeriesJson};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Core { context: &'static str, source: CoreError },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core { source, .. } if source.is_numerical() => 3,
            RunError::Core { .. } => 2,
            RunError::Io { .. } => 1,
        }
    }
}

fn core(context: &'static str) -> impl FnOnce(CoreError) -> RunError {
    move |source| RunError::Core { context, source }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's master_seed.
    pub seed: Option<u64>,
    /// Overrides the config's output_dir.
    pub out_dir: Option<PathBuf>,
}

/// Runs `mode` and returns the files written, in write order.
pub fn run(mode: Mode, config: &RunConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, RunError> {
    if let Some(m) = config.mode {
        if m != mode {
            return Err(ConfigError::Invalid {
                field: "mode".into(),
                message: format!("config says {m} but {mode} was requested"),
            }
            .into());
        }
    }
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).map_err(|source| RunError::Io {
        path: out_dir.clone(),
        source,
    })?;
    let seed = opts.seed.unwrap_or(config.master_seed);
    let mut w = Writer {
        dir: &out_dir,
        files: Vec::new(),
    };
    match mode {
        Mode::SingleShot => single_shot(config, seed, &mut w)?,
        Mode::Ensemble => ensemble(config, seed, &mut w)?,
        Mode::Contour => contour(config, &mut w)?,
        Mode::Scan => scan(config, &mut w)?,
        Mode::Curved => curved(config, seed, &mut w)?,
    }
    Ok(w.files)
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        output::write_atomic(&path, &bytes).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }
}

fn trajectory_alphas(config: &RunConfig) -> Vec<Alpha> {
    config.alphas_or(|| vec![Alpha::Infinity])
}

fn sampled_tol(config: &RunConfig) -> f64 {
    config.tolerance.unwrap_or(SAMPLED_TOL)
}

fn exact_tol(config: &RunConfig) -> f64 {
    config.tolerance.unwrap_or(ANALYTIC_TOL)
}

fn single_shot(config: &RunConfig, seed: u64, w: &mut Writer) -> Result<(), RunError> {
    let u = config.require_unitary()?;
    let alphas = trajectory_alphas(config);
    let mut rng = run_rng(seed, 0);
    let traj = simulate_single_shot(
        &config.initial,
        &config.spec,
        &config.pert,
        u,
        config.steps,
        &alphas,
        &mut rng,
    )
    .map_err(core("single-shot trajectory"))?;
    w.put("trajectory.csv", output::trajectory_csv(&traj))?;
    let reports = detect_table_violations(&alphas, &traj.divergences, exact_tol(config));
    w.put(
        "violations.json",
        output::json_bytes(&vec![SeriesJson::new("single_shot", exact_tol(config), &reports)]),
    )
}

fn ensemble(config: &RunConfig, seed: u64, w: &mut Writer) -> Result<(), RunError> {
    let alphas = trajectory_alphas(config);
    let cfg = EnsembleConfig {
        runs: config.runs,
        steps: config.steps,
        master_seed: seed,
        spec: config.spec,
        pert: config.pert,
        unitary: config.require_unitary()?.clone(),
        initial: config.initial.clone(),
        alphas: alphas.clone(),
    };
    let res = run_ensemble(&cfg).map_err(core("ensemble"))?;
    w.put("trajectory.csv", output::trajectory_csv(&res.first_trajectory))?;
    w.put("ensemble.csv", output::ensemble_csv(&res))?;
    let (exact, sampled) = (exact_tol(config), sampled_tol(config));
    let series = vec![
        SeriesJson::new(
            "analytic_mean",
            exact,
            &detect_table_violations(&alphas, &res.divergence_of_analytic_mean, exact),
        ),
        SeriesJson::new(
            "mc_mean_state",
            sampled,
            &detect_table_violations(&alphas, &res.divergence_of_mc_mean, sampled),
        ),
        SeriesJson::new(
            "mean_divergence",
            sampled,
            &detect_table_violations(&alphas, &res.mean_divergence, sampled),
        ),
        SeriesJson::new(
            "single_shot",
            exact,
            &detect_table_violations(&alphas, &res.first_trajectory.divergences, exact),
        ),
    ];
    w.put("violations.json", output::json_bytes(&series))
}

fn contour(config: &RunConfig, w: &mut Writer) -> Result<(), RunError> {
    let alphas = config.alphas_or(|| vec![Alpha::Finite(0.5), Alpha::ONE, Alpha::Finite(2.0), Alpha::Infinity]);
    let grid = contour_grid(&config.spec, &alphas, config.resolution).map_err(core("contour grid"))?;
    w.put("contour.csv", output::contour_csv(&grid))
}

#[derive(Serialize)]
struct ScanJson {
    alphas: Vec<AlphaJson>,
    q0: f64,
    q_bar0: f64,
    /// Smallest grid p0 from which every point violates every order.
    boundary: Option<f64>,
    dichotomous: bool,
    tolerance: f64,
}

fn scan(config: &RunConfig, w: &mut Writer) -> Result<(), RunError> {
    let theta = match config.require_unitary()? {
        CollisionUnitary::UniformPartialSwap { theta } => *theta,
        _ => {
            return Err(ConfigError::Invalid {
                field: "theta".into(),
                message: "scan mode needs a uniform partial swap (`theta`)".into(),
            }
            .into())
        }
    };
    let alphas = config.alphas_or(default_scan_alphas);
    let tol = exact_tol(config);
    let result = qubit_violation_scan_with(
        &config.spec,
        &config.pert,
        theta,
        config.steps,
        &config.p0_grid,
        &alphas,
        tol,
    )
    .map_err(core("violation scan"))?;
    let mut header = vec!["p0".to_string(), "all_violated".to_string()];
    header.extend(alphas.iter().map(|a| format!("violated_{a}")));
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|pt| {
            let mut row = vec![output::fmt_f64(pt.p0), u8::from(pt.all_violated()).to_string()];
            row.extend(pt.violated.iter().map(|&v| u8::from(v).to_string()));
            row
        })
        .collect();
    w.put("scan.csv", output::csv_bytes(header, rows))?;
    let summary = ScanJson {
        alphas: alphas.iter().map(|&a| a.into()).collect(),
        q0: result.q0,
        q_bar0: result.q_bar0,
        boundary: result.boundary(),
        dichotomous: result.is_dichotomous(),
        tolerance: tol,
    };
    w.put("scan.json", output::json_bytes(&summary))
}

#[derive(Serialize)]
struct CurvedJson {
    steps: usize,
    ensemble_thermal: Vec<f64>,
    ensemble_mean_straightness_deviation: f64,
    single_shot_straightness_deviation: f64,
}

fn curved(config: &RunConfig, seed: u64, w: &mut Writer) -> Result<(), RunError> {
    let u = config.require_unitary()?;
    let alphas = trajectory_alphas(config);
    let mut rng = run_rng(seed, 0);
    let traj = simulate_single_shot(
        &config.initial,
        &config.spec,
        &config.pert,
        u,
        config.steps,
        &alphas,
        &mut rng,
    )
    .map_err(core("curved trajectory"))?;
    w.put("trajectory.csv", output::trajectory_csv(&traj))?;
    let tau_bar = ensemble_thermal_state(&config.spec, &config.pert).map_err(core("ensemble thermal state"))?;
    let mean_path =
        deterministic_trajectory(&config.initial, &tau_bar, u, config.steps).map_err(core("ensemble mean path"))?;
    let summary = CurvedJson {
        steps: config.steps,
        ensemble_thermal: tau_bar.probs().to_vec(),
        ensemble_mean_straightness_deviation: straightness_deviation(&mean_path).map_err(core("straightness"))?,
        single_shot_straightness_deviation: straightness_deviation(&traj.states).map_err(core("straightness"))?,
    };
    w.put("curved.json", output::json_bytes(&summary))
}
