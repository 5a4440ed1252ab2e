//! Second-law violation detection and the triangle picture of qutrit
//! populations.
//!
//! Triangle embedding: p0 = 1 at (1, 0) (bottom right), p1 = 1 at (0, 0)
//! (bottom left), p2 = 1 at (1/2, sqrt(3)/2) (apex).

use crate::collision::analytic_trajectory;
use crate::divergence::{free_energy, renyi_divergence, Alpha};
use crate::ensemble::column;
use crate::error::{Error, Result};
use crate::qudit::{ensemble_thermal_state, thermal_state, DiagonalState, EnergySpec, PerturbationSpec};

/// Default tolerance for exact (analytic) series.
pub const ANALYTIC_TOL: f64 = 1e-10;
/// Default tolerance for sampled series.
pub const SAMPLED_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationEvent {
    /// The series rises between `step` and `step + 1`.
    pub step: usize,
    pub increase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub alpha: Alpha,
    pub events: Vec<ViolationEvent>,
    /// 0 when there are no events.
    pub max_increase: f64,
    pub first_violation_step: Option<usize>,
}

impl ViolationReport {
    pub fn is_violated(&self) -> bool {
        !self.events.is_empty()
    }
}

/// Flags every step at which `series` rises by more than `tolerance`.
pub fn detect_violations(alpha: Alpha, series: &[f64], tolerance: f64) -> ViolationReport {
    let events: Vec<ViolationEvent> = series
        .windows(2)
        .enumerate()
        .filter_map(|(step, w)| {
            let increase = w[1] - w[0];
            (increase > tolerance).then_some(ViolationEvent { step, increase })
        })
        .collect();
    ViolationReport {
        alpha,
        max_increase: events.iter().map(|e| e.increase).fold(0.0, f64::max),
        first_violation_step: events.first().map(|e| e.step),
        events,
    }
}

/// One report per column of a [step][alpha] divergence table.
pub fn detect_table_violations(alphas: &[Alpha], table: &[Vec<f64>], tolerance: f64) -> Vec<ViolationReport> {
    alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| detect_violations(a, &column(table, i), tolerance))
        .collect()
}

/// Orders probed by [`qubit_violation_scan`].
pub fn default_scan_alphas() -> Vec<Alpha> {
    vec![
        Alpha::Finite(0.5),
        Alpha::ONE,
        Alpha::Finite(2.0),
        Alpha::Finite(5.0),
        Alpha::Infinity,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub p0: f64,
    /// Violation flag per scanned order.
    pub violated: Vec<bool>,
}

impl ScanPoint {
    pub fn all_violated(&self) -> bool {
        self.violated.iter().all(|&v| v)
    }

    pub fn none_violated(&self) -> bool {
        self.violated.iter().all(|&v| !v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitScan {
    pub alphas: Vec<Alpha>,
    /// Ground occupation of tau_S.
    pub q0: f64,
    /// Ground occupation of tau_bar.
    pub q_bar0: f64,
    pub points: Vec<ScanPoint>,
}

impl QubitScan {
    /// Smallest scanned p0 above which every point violates all orders, if the
    /// all-violated points form an upper set of the grid.
    pub fn boundary(&self) -> Option<f64> {
        let mut sorted: Vec<&ScanPoint> = self.points.iter().collect();
        sorted.sort_by(|a, b| a.p0.total_cmp(&b.p0));
        let first = sorted.iter().position(|p| p.all_violated())?;
        sorted[first..]
            .iter()
            .all(|p| p.all_violated())
            .then(|| sorted[first].p0)
    }

    /// True when every point is either all-violated or none-violated.
    pub fn is_dichotomous(&self) -> bool {
        self.points.iter().all(|p| p.all_violated() || p.none_violated())
    }
}

/// Runs the analytic ensemble trajectory for each initial ground occupation
/// and checks every order for increases.
pub fn qubit_violation_scan(
    spec: &EnergySpec,
    pert: &PerturbationSpec,
    theta: f64,
    steps: usize,
    p0_grid: &[f64],
) -> Result<QubitScan> {
    qubit_violation_scan_with(spec, pert, theta, steps, p0_grid, &default_scan_alphas(), ANALYTIC_TOL)
}

pub fn qubit_violation_scan_with(
    spec: &EnergySpec,
    pert: &PerturbationSpec,
    theta: f64,
    steps: usize,
    p0_grid: &[f64],
    alphas: &[Alpha],
    tolerance: f64,
) -> Result<QubitScan> {
    if spec.d() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: spec.d(),
        });
    }
    let reference = thermal_state(spec, 0.0);
    let target = ensemble_thermal_state(spec, pert)?;
    let points = p0_grid
        .iter()
        .map(|&p0| {
            if !(0.0..=1.0).contains(&p0) {
                return Err(Error::param("p0_grid", format!("{p0} is outside [0, 1]")));
            }
            let initial = DiagonalState::new(vec![p0, 1.0 - p0])?;
            let traj = analytic_trajectory(&initial, &target, theta, steps)?;
            let violated = alphas
                .iter()
                .map(|&a| {
                    let series = traj
                        .iter()
                        .map(|s| renyi_divergence(s, &reference, a))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(detect_violations(a, &series, tolerance).is_violated())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ScanPoint { p0, violated })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QubitScan {
        alphas: alphas.to_vec(),
        q0: reference.probs()[0],
        q_bar0: target.probs()[0],
        points,
    })
}

/// `n` evenly spaced points covering [0, 1].
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexPoint {
    pub x: f64,
    pub y: f64,
}

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

pub const VERTEX_GROUND: SimplexPoint = SimplexPoint { x: 1.0, y: 0.0 };
pub const VERTEX_MIDDLE: SimplexPoint = SimplexPoint { x: 0.0, y: 0.0 };
pub const VERTEX_TOP: SimplexPoint = SimplexPoint { x: 0.5, y: SQRT3_2 };

impl SimplexPoint {
    pub fn distance(&self, other: &SimplexPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Inside or on the reference triangle, within `tol`.
    pub fn in_triangle(&self, tol: f64) -> bool {
        // y >= 0, and on the inner side of both slanted edges
        self.y >= -tol && SQRT3_2 * 2.0 * self.x - self.y >= -tol && SQRT3_2 * 2.0 * (1.0 - self.x) - self.y >= -tol
    }
}

pub fn simplex_coords(p: &DiagonalState) -> Result<SimplexPoint> {
    p.check_dim(3)?;
    let w = p.probs();
    Ok(SimplexPoint {
        x: w[0] * VERTEX_GROUND.x + w[1] * VERTEX_MIDDLE.x + w[2] * VERTEX_TOP.x,
        y: w[0] * VERTEX_GROUND.y + w[1] * VERTEX_MIDDLE.y + w[2] * VERTEX_TOP.y,
    })
}

/// What the value columns of a [`ContourGrid`] hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourQuantity {
    /// F_alpha, for beta > 0.
    FreeEnergy,
    /// D_alpha(p || tau_S), used at beta = 0 where F_alpha is undefined. Its
    /// level sets are the same curves.
    Divergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourPoint {
    pub point: SimplexPoint,
    pub probs: [f64; 3],
    /// One value per order; `f64::INFINITY` marks a divergent value.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub quantity: ContourQuantity,
    pub alphas: Vec<Alpha>,
    pub resolution: usize,
    pub points: Vec<ContourPoint>,
}

impl ContourGrid {
    /// Index of the lattice point with the smallest value of order `i`.
    pub fn argmin(&self, i: usize) -> usize {
        (0..self.points.len())
            .min_by(|&a, &b| self.points[a].values[i].total_cmp(&self.points[b].values[i]))
            .expect("non-empty grid")
    }

    /// Index of the lattice point closest to `target` in the plane.
    pub fn nearest(&self, target: &SimplexPoint) -> usize {
        (0..self.points.len())
            .min_by(|&a, &b| {
                self.points[a]
                    .point
                    .distance(target)
                    .total_cmp(&self.points[b].point.distance(target))
            })
            .expect("non-empty grid")
    }
}

/// Barycentric lattice p = (i, j, n - i - j) / n with every order evaluated.
pub fn contour_grid(spec: &EnergySpec, alphas: &[Alpha], resolution: usize) -> Result<ContourGrid> {
    if spec.d() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: spec.d(),
        });
    }
    if resolution < 2 {
        return Err(Error::param("resolution", format!("need >= 2, got {resolution}")));
    }
    let quantity = if spec.beta() > 0.0 {
        ContourQuantity::FreeEnergy
    } else {
        ContourQuantity::Divergence
    };
    let reference = thermal_state(spec, 0.0);
    let n = resolution;
    let mut points = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=n - i {
            let k = n - i - j;
            let probs = [i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64];
            let state = DiagonalState::new(probs.to_vec())?;
            let values = alphas
                .iter()
                .map(|&a| {
                    let v = match quantity {
                        ContourQuantity::FreeEnergy => free_energy(&state, spec, a),
                        ContourQuantity::Divergence => renyi_divergence(&state, &reference, a),
                    };
                    match v {
                        Ok(v) => Ok(v),
                        Err(Error::DivergentInput { .. }) => Ok(f64::INFINITY),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            points.push(ContourPoint {
                point: simplex_coords(&state)?,
                probs,
                values,
            });
        }
    }
    Ok(ContourGrid {
        quantity,
        alphas: alphas.to_vec(),
        resolution,
        points,
    })
}

/// Largest distance of a qutrit trajectory's triangle image from the chord
/// joining its endpoints.
pub fn straightness_deviation(traj: &[DiagonalState]) -> Result<f64> {
    let pts = traj.iter().map(simplex_coords).collect::<Result<Vec<_>>>()?;
    if pts.len() < 3 {
        return Ok(0.0);
    }
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let chord = dx.hypot(dy);
    Ok(pts
        .iter()
        .map(|p| {
            if chord == 0.0 {
                p.distance(&a)
            } else {
                ((p.x - a.x) * dy - (p.y - a.y) * dx).abs() / chord
            }
        })
        .fold(0.0, f64::max))
}

/// Level maximizing p_j / q_j, which fixes D_inf.
pub fn argmax_ratio(p: &DiagonalState, q: &DiagonalState) -> usize {
    (0..p.dim())
        .max_by(|&i, &j| (p.probs()[i] / q.probs()[i]).total_cmp(&(p.probs()[j] / q.probs()[j])))
        .expect("non-empty state")
}
