//! Gauss-Hermite rules for expectations over a centred Gaussian, with a
//! trapezoidal fallback for integrands whose complex poles sit close to the
//! real axis.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Node counts tried in order until two successive rules agree.
pub const NODE_LADDER: [usize; 6] = [16, 32, 64, 128, 256, 512];

/// Agreement required between successive rules (max componentwise change).
pub const CONVERGENCE_TOL: f64 = 1e-12;

/// Step sizes (in units of the standard-normal variable scaled by sqrt 2)
/// for the trapezoidal fallback.
pub const TRAPEZOID_STEPS: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

/// Half-width of the truncated trapezoidal range. e^{-x^2} < 1e-43 beyond it.
pub const TRAPEZOID_HALF_WIDTH: f64 = 10.0;

/// A Gauss-Hermite rule for the weight e^{-x^2} on (-inf, inf).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes start from the eigenvalues of the Jacobi matrix of the Hermite
    /// recurrence and are polished by Newton steps on the orthonormal
    /// recurrence, which also yields the weights.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let mut nodes = tridiagonal_eigenvalues(vec![0.0; n], off);
        nodes.sort_by(|a, b| b.total_cmp(a));
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = nodes[i];
            let mut deriv = 0.0;
            for _ in 0..20 {
                let (p, dp) = orthonormal_hermite(n, z);
                deriv = dp;
                let step = p / dp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (deriv * deriv);
            weights[n - 1 - i] = weights[i];
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[f(X)] for X ~ N(0, sigma^2), vector-valued.
    pub fn gaussian_expectation<F>(&self, sigma: f64, dim: usize, mut f: F) -> Vec<f64>
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        let scale = std::f64::consts::SQRT_2 * sigma;
        let norm = PI.sqrt().recip();
        let mut acc = vec![0.0; dim];
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(scale * x);
            for (a, vi) in acc.iter_mut().zip(v) {
                *a += w * norm * vi;
            }
        }
        acc
    }
}

/// Orthonormal Hermite polynomial of degree n at x and sqrt(2n) times the
/// degree n-1 one (its derivative).
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson shifts.
fn tridiagonal_eigenvalues(mut diag: Vec<f64>, off: Vec<f64>) -> Vec<f64> {
    let n = diag.len();
    let mut e = off;
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "tridiagonal QL failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    diag
}

/// E[f(X)] for X ~ N(0, sigma^2) by the trapezoidal rule with step `h` on
/// [-TRAPEZOID_HALF_WIDTH, TRAPEZOID_HALF_WIDTH] in x = X / (sqrt 2 sigma).
/// For analytic integrands the error falls like exp(-2 pi a / h), a the
/// distance of the nearest singularity from the real axis.
pub fn trapezoid_gaussian_expectation<F>(sigma: f64, dim: usize, h: f64, mut f: F) -> (Vec<f64>, usize)
where
    F: FnMut(f64) -> Vec<f64>,
{
    let scale = std::f64::consts::SQRT_2 * sigma;
    let half = (TRAPEZOID_HALF_WIDTH / h).ceil() as i64;
    let norm = h / PI.sqrt();
    let mut acc = vec![0.0; dim];
    for k in -half..=half {
        let x = k as f64 * h;
        let w = norm * (-x * x).exp();
        for (a, vi) in acc.iter_mut().zip(f(scale * x)) {
            *a += w * vi;
        }
    }
    (acc, (2 * half + 1) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    GaussHermite,
    Trapezoid,
}

/// Outcome of an adaptive Gaussian average.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveAverage {
    pub value: Vec<f64>,
    pub rule: QuadratureRule,
    /// Nodes in the accepted rule.
    pub nodes: usize,
    /// Max componentwise change against the previous rule on the ladder.
    pub last_change: f64,
}

/// Doubles the node count along [`NODE_LADDER`] until successive rules agree
/// to [`CONVERGENCE_TOL`]. If the ladder runs out, halves the trapezoidal
/// step along [`TRAPEZOID_STEPS`] under the same test.
pub fn adaptive_gaussian_expectation<F>(sigma: f64, dim: usize, f: F) -> Result<AdaptiveAverage>
where
    F: Fn(f64) -> Vec<f64>,
{
    let mut previous = GaussHermite::new(NODE_LADDER[0]).gaussian_expectation(sigma, dim, &f);
    let mut change = f64::INFINITY;
    for &n in &NODE_LADDER[1..] {
        let current = GaussHermite::new(n).gaussian_expectation(sigma, dim, &f);
        change = previous
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < CONVERGENCE_TOL {
            return Ok(AdaptiveAverage {
                value: current,
                rule: QuadratureRule::GaussHermite,
                nodes: n,
                last_change: change,
            });
        }
        previous = current;
    }
    let gh_change = change;
    let (mut previous, _) = trapezoid_gaussian_expectation(sigma, dim, TRAPEZOID_STEPS[0], &f);
    for &h in &TRAPEZOID_STEPS[1..] {
        let (current, nodes) = trapezoid_gaussian_expectation(sigma, dim, h, &f);
        let change = previous
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < CONVERGENCE_TOL {
            return Ok(AdaptiveAverage {
                value: current,
                rule: QuadratureRule::Trapezoid,
                nodes,
                last_change: change,
            });
        }
        previous = current;
    }
    Err(Error::QuadratureNotConverged {
        nodes: *NODE_LADDER.last().unwrap(),
        change: gh_change,
    })
}
