//! JSON run configuration. Unknown fields are rejected and every value is
//! validated against the core constructors before anything runs.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;
use thermops_core::{
    build_block_unitary, Alpha, BlockParams, CollisionUnitary, DiagonalState, EnergySpec, Error as CoreError,
    PerturbationSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SingleShot,
    Ensemble,
    Contour,
    Scan,
    Curved,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::SingleShot => "single-shot",
            Mode::Ensemble => "ensemble",
            Mode::Contour => "contour",
            Mode::Scan => "scan",
            Mode::Curved => "curved",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.to_string(),
    }
}

fn from_core(field: &str, err: CoreError) -> ConfigError {
    match err {
        CoreError::InvalidParameter { name, reason } => invalid(name, reason),
        other => invalid(field, other),
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AlphaToken {
    Number(f64),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum InitialToken {
    Word(String),
    Probs(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GridToken {
    Count(usize),
    Points(Vec<f64>),
}

/// Raw file contents, before validation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    d: usize,
    g0: f64,
    beta: f64,
    #[serde(default)]
    delta_variance: f64,
    theta: Option<f64>,
    theta_blocks: Option<Vec<f64>>,
    /// One matrix per block, rows of [re, im] pairs.
    blocks: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    steps: Option<usize>,
    runs: Option<usize>,
    alphas: Option<Vec<AlphaToken>>,
    initial_state: Option<InitialToken>,
    #[serde(default)]
    master_seed: u64,
    resolution: Option<usize>,
    p0_grid: Option<GridToken>,
    tolerance: Option<f64>,
    output_dir: Option<PathBuf>,
}

pub const DEFAULT_STEPS: usize = 300;
pub const DEFAULT_RUNS: usize = 1000;
pub const DEFAULT_RESOLUTION: usize = 100;
pub const DEFAULT_GRID_POINTS: usize = 200;

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub spec: EnergySpec,
    pub pert: PerturbationSpec,
    pub unitary: Option<CollisionUnitary>,
    pub steps: usize,
    pub runs: usize,
    /// None when the file does not list orders; each mode picks its default.
    pub alphas: Option<Vec<Alpha>>,
    pub initial: DiagonalState,
    pub master_seed: u64,
    pub resolution: usize,
    pub p0_grid: Vec<f64>,
    /// Violation tolerance override for sampled series.
    pub tolerance: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Unitary, or a config error naming the missing fields.
    pub fn require_unitary(&self) -> Result<&CollisionUnitary, ConfigError> {
        self.unitary
            .as_ref()
            .ok_or_else(|| invalid("theta", "one of `theta`, `theta_blocks` or `blocks` is required"))
    }

    pub fn alphas_or(&self, default: impl FnOnce() -> Vec<Alpha>) -> Vec<Alpha> {
        self.alphas.clone().unwrap_or_else(default)
    }

    pub fn theta(&self) -> Option<f64> {
        match self.unitary {
            Some(CollisionUnitary::UniformPartialSwap { theta }) => Some(theta),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

pub fn parse_config(path: &Path) -> Result<ParsedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ParsedConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<ParsedConfig, ConfigError> {
    let mut warnings = Vec::new();
    let spec = EnergySpec::new(raw.d, raw.g0, raw.beta).map_err(|e| from_core("d", e))?;
    let pert = PerturbationSpec::gaussian(raw.delta_variance).map_err(|e| from_core("delta_variance", e))?;

    let given = [raw.theta.is_some(), raw.theta_blocks.is_some(), raw.blocks.is_some()];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(invalid("theta", "give only one of `theta`, `theta_blocks`, `blocks`"));
    }
    let unitary = if let Some(theta) = raw.theta {
        Some(CollisionUnitary::partial_swap(theta).map_err(|e| from_core("theta", e))?)
    } else if let Some(angles) = raw.theta_blocks {
        Some(build_block_unitary(raw.d, BlockParams::PartialSwaps(angles)).map_err(|e| from_core("theta_blocks", e))?)
    } else if let Some(blocks) = raw.blocks {
        let mut mats = Vec::with_capacity(blocks.len());
        for (k, rows) in blocks.into_iter().enumerate() {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(invalid(format!("blocks[{k}]"), "block must be square"));
            }
            mats.push(DMatrix::from_fn(n, n, |i, j| {
                Complex64::new(rows[i][j][0], rows[i][j][1])
            }));
        }
        Some(build_block_unitary(raw.d, BlockParams::Explicit(mats)).map_err(|e| from_core("blocks", e))?)
    } else {
        None
    };

    let steps = raw.steps.unwrap_or(DEFAULT_STEPS);
    if steps == 0 {
        return Err(invalid("steps", "need at least one collision"));
    }
    let runs = raw.runs.unwrap_or(DEFAULT_RUNS);
    if runs == 0 {
        return Err(invalid("runs", "need at least one run"));
    }

    let alphas = match raw.alphas {
        None => None,
        Some(tokens) => {
            let mut out = Vec::with_capacity(tokens.len());
            for (i, t) in tokens.into_iter().enumerate() {
                let a = match t {
                    AlphaToken::Number(x) => Alpha::new(x).map_err(|e| from_core("alphas", e))?,
                    AlphaToken::Word(w) if w == "inf" => Alpha::Infinity,
                    AlphaToken::Word(w) => {
                        return Err(invalid(
                            format!("alphas[{i}]"),
                            format!("expected a number or \"inf\", got {w:?}"),
                        ))
                    }
                };
                if a.is_negative() {
                    warnings.push(format!(
                        "alphas[{i}] = {a} is negative: divergences are computed but no monotonicity claims apply"
                    ));
                }
                out.push(a);
            }
            if out.is_empty() {
                return Err(invalid("alphas", "need at least one order"));
            }
            Some(out)
        }
    };

    let initial = match raw.initial_state {
        None => DiagonalState::ground(raw.d),
        Some(InitialToken::Word(w)) if w == "ground" => DiagonalState::ground(raw.d),
        Some(InitialToken::Word(w)) => {
            return Err(invalid(
                "initial_state",
                format!("expected a probability list or \"ground\", got {w:?}"),
            ))
        }
        Some(InitialToken::Probs(p)) => {
            if p.len() != raw.d {
                return Err(invalid(
                    "initial_state",
                    format!("expected {} probabilities, got {}", raw.d, p.len()),
                ));
            }
            DiagonalState::new(p)
        }
    }
    .map_err(|e| invalid("initial_state", e))?;

    let resolution = raw.resolution.unwrap_or(DEFAULT_RESOLUTION);
    if resolution < 2 {
        return Err(invalid("resolution", "need >= 2"));
    }
    let p0_grid = match raw.p0_grid {
        None => thermops_core::geometry::uniform_grid(DEFAULT_GRID_POINTS),
        Some(GridToken::Count(n)) if n >= 2 => thermops_core::geometry::uniform_grid(n),
        Some(GridToken::Count(n)) => return Err(invalid("p0_grid", format!("need >= 2 points, got {n}"))),
        Some(GridToken::Points(points)) => {
            if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(invalid("p0_grid", format!("{p} is outside [0, 1]")));
            }
            points
        }
    };
    if let Some(t) = raw.tolerance {
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid("tolerance", format!("must be finite and >= 0, got {t}")));
        }
    }

    Ok(ParsedConfig {
        config: RunConfig {
            mode: raw.mode,
            spec,
            pert,
            unitary,
            steps,
            runs,
            alphas,
            initial,
            master_seed: raw.master_seed,
            resolution,
            p0_grid,
            tolerance: raw.tolerance,
            output_dir: raw.output_dir,
        },
        warnings,
    })
}
