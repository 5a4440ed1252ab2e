//! One system-ancilla collision and its iteration.
//!
//! The joint space of system and ancilla splits into blocks of fixed
//! j + j' (blocks k = 0..=2d-2, dimension d - |k - (d-1)|). Every collision
//! unitary here is a direct sum over those blocks, so for diagonal inputs
//! only populations need to be tracked: block k sends |j, k-j> to
//! |m, k-m> with probability |<m, k-m| U_k |j, k-j>|^2.
//!
//! Joint basis index for the dense oracle: system level * d + ancilla level.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::divergence::{divergence_profile, Alpha};
use crate::error::{Error, Result};
use crate::qudit::{sample_delta, spin_projections, thermal_state, DiagonalState, EnergySpec, PerturbationSpec};

/// Max entrywise deviation tolerated in unitarity and commutator checks.
pub const UNITARY_TOL: f64 = 1e-12;

/// The dense oracle only runs up to this dimension.
pub const ORACLE_MAX_DIM: usize = 8;

pub fn block_dimensions(d: usize) -> Vec<usize> {
    (0..2 * d - 1)
        .map(|k| d - (k as isize - (d as isize - 1)).unsigned_abs())
        .collect()
}

/// Real parameters of a general block-diagonal unitary: sum of dim_k^2.
pub fn free_parameter_count(d: usize) -> usize {
    block_dimensions(d).iter().map(|n| n * n).sum()
}

/// (system, ancilla) levels spanning block k, ordered by system level.
pub fn block_basis(d: usize, k: usize) -> Vec<(usize, usize)> {
    let lo = k.saturating_sub(d - 1);
    let hi = k.min(d - 1);
    (lo..=hi).map(|j| (j, k - j)).collect()
}

fn unitarity_deviation(u: &DMatrix<Complex64>) -> f64 {
    let prod = u.adjoint() * u;
    let n = u.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    dev
}

/// Partial swap restricted to block k: |jj> fixed, (|jj'>, |j'j>) rotated.
fn partial_swap_block(d: usize, k: usize, theta: f64) -> DMatrix<Complex64> {
    let basis = block_basis(d, k);
    let n = basis.len();
    let (c, s) = (theta.cos(), theta.sin());
    let mut u = DMatrix::zeros(n, n);
    for (a, &(j, jp)) in basis.iter().enumerate() {
        if j == jp {
            u[(a, a)] = Complex64::new(1.0, 0.0);
        } else {
            let b = basis.iter().position(|&x| x == (jp, j)).unwrap();
            u[(a, a)] = Complex64::new(c, 0.0);
            u[(b, a)] = Complex64::new(0.0, s);
        }
    }
    u
}

/// A validated direct sum of per-block unitaries for a d-level system.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUnitary {
    d: usize,
    blocks: Vec<DMatrix<Complex64>>,
}

impl BlockUnitary {
    pub fn new(d: usize, blocks: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if d < 2 {
            return Err(Error::param("d", format!("dimension must be >= 2, got {d}")));
        }
        let dims = block_dimensions(d);
        if blocks.len() != dims.len() {
            return Err(Error::param(
                "blocks",
                format!("expected {} blocks for d = {d}, got {}", dims.len(), blocks.len()),
            ));
        }
        for (k, (u, &n)) in blocks.iter().zip(&dims).enumerate() {
            if u.nrows() != n || u.ncols() != n {
                return Err(Error::BlockDimension {
                    block: k,
                    expected: n,
                    found: u.nrows().max(u.ncols()),
                });
            }
            let deviation = unitarity_deviation(u);
            if deviation.is_nan() || deviation > UNITARY_TOL {
                return Err(Error::NonUnitaryBlock { block: k, deviation });
            }
        }
        Ok(Self { d, blocks })
    }

    pub fn identity(d: usize) -> Self {
        let blocks = block_dimensions(d)
            .into_iter()
            .map(|n| DMatrix::identity(n, n))
            .collect();
        Self { d, blocks }
    }

    /// Haar-random blocks (QR of complex Ginibre matrices with the phase of
    /// R's diagonal divided out).
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let blocks = block_dimensions(d)
            .into_iter()
            .map(|n| {
                let g = DMatrix::from_fn(n, n, |_, _| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im)
                });
                let qr = g.qr();
                let (mut q, r) = (qr.q(), qr.r());
                for j in 0..n {
                    let rjj = r[(j, j)];
                    let phase = if rjj.norm() > 0.0 {
                        rjj / rjj.norm()
                    } else {
                        Complex64::new(1.0, 0.0)
                    };
                    for i in 0..n {
                        q[(i, j)] *= phase;
                    }
                }
                q
            })
            .collect();
        Self { d, blocks }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }
}

/// Per-block input to [`build_block_unitary`].
#[derive(Debug, Clone, PartialEq)]
pub enum BlockParams {
    /// One mixing angle per block (2d - 1 values), or one per block of
    /// dimension >= 2 (2d - 3 values, blocks k = 1..=2d-3).
    PartialSwaps(Vec<f64>),
    Explicit(Vec<DMatrix<Complex64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CollisionUnitary {
    /// Partial swap of every pair |jj'> <-> |j'j> by one angle, any dimension.
    UniformPartialSwap {
        theta: f64,
    },
    /// Partial swaps with a separate angle in each block.
    BlockPartialSwap {
        thetas: Vec<f64>,
        unitary: BlockUnitary,
    },
    GeneralBlockUnitary(BlockUnitary),
}

pub fn build_block_unitary(d: usize, params: BlockParams) -> Result<CollisionUnitary> {
    if d < 2 {
        return Err(Error::param("d", format!("dimension must be >= 2, got {d}")));
    }
    match params {
        BlockParams::PartialSwaps(angles) => {
            let n_blocks = 2 * d - 1;
            let thetas = if angles.len() == n_blocks {
                angles
            } else if angles.len() == n_blocks - 2 {
                let mut full = Vec::with_capacity(n_blocks);
                full.push(0.0);
                full.extend(angles);
                full.push(0.0);
                full
            } else {
                return Err(Error::param(
                    "theta_blocks",
                    format!(
                        "expected {} or {} angles for d = {d}, got {}",
                        n_blocks,
                        n_blocks - 2,
                        angles.len()
                    ),
                ));
            };
            if let Some(t) = thetas.iter().find(|t| !t.is_finite()) {
                return Err(Error::param("theta_blocks", format!("angle {t} is not finite")));
            }
            let blocks = thetas
                .iter()
                .enumerate()
                .map(|(k, &t)| partial_swap_block(d, k, t))
                .collect();
            let unitary = BlockUnitary::new(d, blocks)?;
            Ok(CollisionUnitary::BlockPartialSwap { thetas, unitary })
        }
        BlockParams::Explicit(blocks) => Ok(CollisionUnitary::GeneralBlockUnitary(BlockUnitary::new(d, blocks)?)),
    }
}

impl CollisionUnitary {
    pub fn partial_swap(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::param("theta", format!("mixing angle {theta} is not finite")));
        }
        Ok(CollisionUnitary::UniformPartialSwap { theta })
    }

    /// Dimension fixed by the unitary, if any (the uniform swap fits all d).
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            CollisionUnitary::UniformPartialSwap { .. } => None,
            CollisionUnitary::BlockPartialSwap { unitary, .. } | CollisionUnitary::GeneralBlockUnitary(unitary) => {
                Some(unitary.dim())
            }
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self.fixed_dim() {
            Some(expected) if expected != d => Err(Error::DimensionMismatch { expected, found: d }),
            _ => Ok(()),
        }
    }

    /// Block `k` for dimension `d`, materialized for every variant.
    pub fn block(&self, d: usize, k: usize) -> DMatrix<Complex64> {
        match self {
            CollisionUnitary::UniformPartialSwap { theta } => partial_swap_block(d, k, *theta),
            CollisionUnitary::BlockPartialSwap { unitary, .. } | CollisionUnitary::GeneralBlockUnitary(unitary) => {
                unitary.blocks[k].clone()
            }
        }
    }

    /// The d^2 x d^2 joint unitary.
    pub fn dense(&self, d: usize) -> Result<DMatrix<Complex64>> {
        self.check_dim(d)?;
        let mut u = DMatrix::zeros(d * d, d * d);
        for k in 0..2 * d - 1 {
            let basis = block_basis(d, k);
            let block = self.block(d, k);
            for (a, &(j, jp)) in basis.iter().enumerate() {
                for (b, &(m, mp)) in basis.iter().enumerate() {
                    u[(m * d + mp, j * d + jp)] = block[(b, a)];
                }
            }
        }
        Ok(u)
    }

    /// max |[H0, U]| for the unperturbed H0 = g0 (s_z (x) 1 + 1 (x) s_z).
    pub fn commutator_norm(&self, spec: &EnergySpec) -> Result<f64> {
        let d = spec.d();
        let u = self.dense(d)?;
        let e = spec.energy_levels();
        let h = |idx: usize| e[idx / d] + e[idx % d];
        let mut worst = 0.0f64;
        for a in 0..d * d {
            for b in 0..d * d {
                worst = worst.max(((h(a) - h(b)) * u[(a, b)]).norm());
            }
        }
        Ok(worst)
    }

    /// System transfer matrix T[m, j] = sum_j' |<m, k-m|U_k|j, j'>|^2 q_j'.
    pub fn transfer_matrix(&self, reservoir: &DiagonalState) -> Result<DMatrix<f64>> {
        let d = reservoir.dim();
        self.check_dim(d)?;
        let q = reservoir.probs();
        let mut t = DMatrix::zeros(d, d);
        for k in 0..2 * d - 1 {
            let basis = block_basis(d, k);
            let block = self.block(d, k);
            for (a, &(j, jp)) in basis.iter().enumerate() {
                for (b, &(m, _)) in basis.iter().enumerate() {
                    t[(m, j)] += block[(b, a)].norm_sqr() * q[jp];
                }
            }
        }
        Ok(t)
    }
}

fn check_pair(state: &DiagonalState, reservoir: &DiagonalState, u: &CollisionUnitary) -> Result<usize> {
    let d = state.dim();
    reservoir.check_dim(d)?;
    u.check_dim(d)?;
    Ok(d)
}

/// Joint populations P'[m * d + n] of system level m and ancilla level n
/// after one collision.
pub fn joint_populations(state: &DiagonalState, reservoir: &DiagonalState, u: &CollisionUnitary) -> Result<Vec<f64>> {
    let d = check_pair(state, reservoir, u)?;
    let (p, q) = (state.probs(), reservoir.probs());
    let mut out = vec![0.0; d * d];
    match u {
        CollisionUnitary::UniformPartialSwap { theta } => {
            let c2 = theta.cos().powi(2);
            let s2 = theta.sin().powi(2);
            for m in 0..d {
                for n in 0..d {
                    out[m * d + n] = if m == n {
                        p[m] * q[m]
                    } else {
                        c2 * p[m] * q[n] + s2 * p[n] * q[m]
                    };
                }
            }
        }
        _ => {
            for k in 0..2 * d - 1 {
                let basis = block_basis(d, k);
                let block = u.block(d, k);
                for (a, &(j, jp)) in basis.iter().enumerate() {
                    let weight = p[j] * q[jp];
                    if weight == 0.0 {
                        continue;
                    }
                    for (b, &(m, mp)) in basis.iter().enumerate() {
                        out[m * d + mp] += block[(b, a)].norm_sqr() * weight;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Reduced system populations after one collision with an ancilla in
/// `reservoir`.
pub fn collide(state: &DiagonalState, reservoir: &DiagonalState, u: &CollisionUnitary) -> Result<DiagonalState> {
    let d = check_pair(state, reservoir, u)?;
    match u {
        CollisionUnitary::UniformPartialSwap { theta } => {
            let c2 = theta.cos().powi(2);
            let s2 = theta.sin().powi(2);
            Ok(DiagonalState::from_simplex(
                state
                    .probs()
                    .iter()
                    .zip(reservoir.probs())
                    .map(|(p, q)| c2 * p + s2 * q)
                    .collect(),
            ))
        }
        _ => {
            let joint = joint_populations(state, reservoir, u)?;
            Ok(DiagonalState::from_simplex(
                (0..d).map(|m| joint[m * d..(m + 1) * d].iter().sum()).collect(),
            ))
        }
    }
}

/// Result of the dense conjugate-and-trace computation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCollision {
    /// Reduced system density matrix, d x d.
    pub reduced: DMatrix<Complex64>,
    /// Largest off-diagonal magnitude of `reduced`.
    pub leakage: f64,
}

/// tr_R[U (rho (x) sigma) U^dagger] with dense matrices.
pub fn dense_collision(
    state: &DiagonalState,
    reservoir: &DiagonalState,
    u: &CollisionUnitary,
) -> Result<DenseCollision> {
    let d = check_pair(state, reservoir, u)?;
    if d > ORACLE_MAX_DIM {
        return Err(Error::param(
            "d",
            format!("dense oracle supports d <= {ORACLE_MAX_DIM}, got {d}"),
        ));
    }
    let big = u.dense(d)?;
    let rho = DMatrix::from_fn(d * d, d * d, |a, b| {
        if a == b {
            Complex64::new(state.probs()[a / d] * reservoir.probs()[a % d], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let evolved = &big * rho * big.adjoint();
    let reduced = DMatrix::from_fn(d, d, |m, mp| {
        (0..d).map(|n| evolved[(m * d + n, mp * d + n)]).sum::<Complex64>()
    });
    let mut leakage = 0.0f64;
    for m in 0..d {
        for mp in 0..d {
            if m != mp {
                leakage = leakage.max(reduced[(m, mp)].norm());
            }
        }
    }
    Ok(DenseCollision { reduced, leakage })
}

/// Dense-matrix oracle for [`collide`]. Fails if the reduced output carries
/// coherences above [`UNITARY_TOL`].
pub fn reference_collide(
    state: &DiagonalState,
    reservoir: &DiagonalState,
    u: &CollisionUnitary,
) -> Result<DiagonalState> {
    let out = dense_collision(state, reservoir, u)?;
    if out.leakage > UNITARY_TOL {
        return Err(Error::CoherenceLeak { magnitude: out.leakage });
    }
    let d = state.dim();
    Ok(DiagonalState::from_simplex(
        (0..d).map(|m| out.reduced[(m, m)].re).collect(),
    ))
}

/// rho_r = fixed_point - (fixed_point - rho_0) cos^{2r} theta, r = 0..=steps.
pub fn analytic_trajectory(
    initial: &DiagonalState,
    fixed_point: &DiagonalState,
    theta: f64,
    steps: usize,
) -> Result<Vec<DiagonalState>> {
    fixed_point.check_dim(initial.dim())?;
    let c2 = theta.cos().powi(2);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial.clone());
    let mut decay = 1.0;
    for _ in 0..steps {
        decay *= c2;
        out.push(DiagonalState::from_simplex(
            initial
                .probs()
                .iter()
                .zip(fixed_point.probs())
                .map(|(p0, f)| f - (f - p0) * decay)
                .collect(),
        ));
    }
    Ok(out)
}

/// Repeated collisions against one fixed reservoir state.
pub fn deterministic_trajectory(
    initial: &DiagonalState,
    reservoir: &DiagonalState,
    u: &CollisionUnitary,
    steps: usize,
) -> Result<Vec<DiagonalState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial.clone());
    for r in 0..steps {
        let next = collide(&out[r], reservoir, u)?;
        out.push(next);
    }
    Ok(out)
}

/// One realization of the delta sequence and everything measured along it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// rho_0..=rho_N.
    pub states: Vec<DiagonalState>,
    /// delta_1..=delta_N.
    pub deltas: Vec<f64>,
    pub alphas: Vec<Alpha>,
    /// divergences[r][i] = D_{alphas[i]}(rho_r || tau_S).
    pub divergences: Vec<Vec<f64>>,
    /// Change of the expected total energy in collision r (after - before).
    pub energy_ledger: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn steps(&self) -> usize {
        self.deltas.len()
    }

    /// D_alpha series for the i-th requested order.
    pub fn divergence_series(&self, i: usize) -> Vec<f64> {
        self.divergences.iter().map(|row| row[i]).collect()
    }
}

pub(crate) fn divergence_rows(
    states: &[DiagonalState],
    reference: &DiagonalState,
    alphas: &[Alpha],
) -> Result<Vec<Vec<f64>>> {
    states
        .iter()
        .map(|s| divergence_profile(s, reference, alphas))
        .collect()
}

/// Expected total energy change of one collision, with the ancilla
/// Hamiltonian g0 (1 + delta) s_z.
pub fn collision_energy_change(
    state: &DiagonalState,
    delta: f64,
    spec: &EnergySpec,
    u: &CollisionUnitary,
) -> Result<f64> {
    let d = spec.d();
    state.check_dim(d)?;
    let reservoir = thermal_state(spec, delta);
    let after = joint_populations(state, &reservoir, u)?;
    let s = spin_projections(d);
    let g_res = spec.g0() * (1.0 + delta);
    let (p, q) = (state.probs(), reservoir.probs());
    let mut change = 0.0;
    for m in 0..d {
        for n in 0..d {
            let energy = spec.g0() * s[m] + g_res * s[n];
            change += energy * (after[m * d + n] - p[m] * q[n]);
        }
    }
    Ok(change)
}

/// Per-collision and running total of expected energy changes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyAudit {
    pub per_step: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// Recomputes the energy bookkeeping of a trajectory from its stored states
/// and deltas.
pub fn energy_audit(traj: &TrajectoryRecord, spec: &EnergySpec, u: &CollisionUnitary) -> Result<EnergyAudit> {
    if traj.states.len() != traj.deltas.len() + 1 {
        return Err(Error::InvalidState(format!(
            "trajectory has {} states for {} collisions",
            traj.states.len(),
            traj.deltas.len()
        )));
    }
    let per_step = traj
        .states
        .iter()
        .zip(&traj.deltas)
        .map(|(s, &delta)| collision_energy_change(s, delta, spec, u))
        .collect::<Result<Vec<_>>>()?;
    let cumulative = per_step
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    Ok(EnergyAudit { per_step, cumulative })
}

/// Draws delta_r, collides with tau(delta_r), and records D_alpha against the
/// unperturbed tau_S after every step.
pub fn simulate_single_shot<R: Rng + ?Sized>(
    initial: &DiagonalState,
    spec: &EnergySpec,
    pert: &PerturbationSpec,
    u: &CollisionUnitary,
    steps: usize,
    alphas: &[Alpha],
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    if steps == 0 {
        return Err(Error::param("steps", "need at least one collision"));
    }
    initial.check_dim(spec.d())?;
    u.check_dim(spec.d())?;
    let reference = thermal_state(spec, 0.0);
    let mut states = Vec::with_capacity(steps + 1);
    let mut deltas = Vec::with_capacity(steps);
    let mut energy_ledger = Vec::with_capacity(steps);
    states.push(initial.clone());
    for r in 0..steps {
        let delta = sample_delta(pert, rng);
        let reservoir = thermal_state(spec, delta);
        energy_ledger.push(collision_energy_change(&states[r], delta, spec, u)?);
        let next = collide(&states[r], &reservoir, u)?;
        states.push(next);
        deltas.push(delta);
    }
    let divergences = divergence_rows(&states, &reference, alphas)?;
    Ok(TrajectoryRecord {
        states,
        deltas,
        alphas: alphas.to_vec(),
        divergences,
        energy_ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn st(p: &[f64]) -> DiagonalState {
        DiagonalState::new(p.to_vec()).unwrap()
    }

    fn random_state<R: Rng>(d: usize, rng: &mut R) -> DiagonalState {
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = w.iter().sum();
        st(&w.iter().map(|x| x / total).collect::<Vec<_>>())
    }

    #[test]
    fn block_dimensions_and_parameter_counts() {
        assert_eq!(block_dimensions(2), vec![1, 2, 1]);
        assert_eq!(block_dimensions(3), vec![1, 2, 3, 2, 1]);
        assert_eq!(free_parameter_count(2), 6);
        // 1 + 4 + 9 + 4 + 1
        assert_eq!(free_parameter_count(3), 19);
        for d in 2..10 {
            assert_eq!(block_dimensions(d).iter().sum::<usize>(), d * d);
        }
    }

    #[test]
    fn zero_angle_is_identity_and_right_angle_is_swap() {
        let p = st(&[0.6, 0.3, 0.1]);
        let q = st(&[0.2, 0.2, 0.6]);
        let id = CollisionUnitary::partial_swap(0.0).unwrap();
        assert_eq!(collide(&p, &q, &id).unwrap(), p);
        let swap = CollisionUnitary::partial_swap(FRAC_PI_2).unwrap();
        for (a, b) in collide(&p, &q, &swap).unwrap().probs().iter().zip(q.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let r = reference_collide(&p, &q, &swap).unwrap();
        for (a, b) in r.probs().iter().zip(q.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn qubit_single_collision() {
        let spec = EnergySpec::new(2, 2.0, 1.0).unwrap();
        let q = thermal_state(&spec, 0.0);
        let u = CollisionUnitary::partial_swap(0.1).unwrap();
        let out = collide(&DiagonalState::ground(2).unwrap(), &q, &u).unwrap();
        assert_abs_diff_eq!(out.probs()[0], 0.998_811_938_916_387_8, epsilon = 1e-15);
    }

    #[test]
    fn identity_blocks_leave_state_unchanged() {
        let p = st(&[0.1, 0.5, 0.4]);
        let q = st(&[0.3, 0.3, 0.4]);
        let u = CollisionUnitary::GeneralBlockUnitary(BlockUnitary::identity(3));
        assert_eq!(collide(&p, &q, &u).unwrap(), p);
        let r = reference_collide(&p, &q, &u).unwrap();
        for (a, b) in r.probs().iter().zip(p.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn equal_block_angles_reproduce_uniform_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 3, 4] {
            let block = build_block_unitary(d, BlockParams::PartialSwaps(vec![0.37; 2 * d - 1])).unwrap();
            let uniform = CollisionUnitary::partial_swap(0.37).unwrap();
            for _ in 0..20 {
                let (p, q) = (random_state(d, &mut rng), random_state(d, &mut rng));
                let a = collide(&p, &q, &block).unwrap();
                let b = collide(&p, &q, &uniform).unwrap();
                for (x, y) in a.probs().iter().zip(b.probs()) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn interior_angles_shorthand() {
        let short = build_block_unitary(3, BlockParams::PartialSwaps(vec![0.075, 0.05, 0.1])).unwrap();
        match short {
            CollisionUnitary::BlockPartialSwap { thetas, .. } => {
                assert_eq!(thetas, vec![0.0, 0.075, 0.05, 0.1, 0.0])
            }
            _ => unreachable!(),
        }
        assert!(build_block_unitary(3, BlockParams::PartialSwaps(vec![0.1; 4])).is_err());
    }

    #[test]
    fn rejects_bad_blocks() {
        let mut blocks: Vec<_> = BlockUnitary::identity(2).blocks().to_vec();
        blocks[1][(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(matches!(
            build_block_unitary(2, BlockParams::Explicit(blocks)),
            Err(Error::NonUnitaryBlock { block: 1, .. })
        ));
        let mut blocks: Vec<_> = BlockUnitary::identity(2).blocks().to_vec();
        blocks[0] = DMatrix::identity(2, 2);
        assert!(matches!(
            build_block_unitary(2, BlockParams::Explicit(blocks)),
            Err(Error::BlockDimension {
                block: 0,
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let u = CollisionUnitary::GeneralBlockUnitary(BlockUnitary::identity(3));
        let p = st(&[0.5, 0.5]);
        assert!(matches!(collide(&p, &p, &u), Err(Error::DimensionMismatch { .. })));
        let swap = CollisionUnitary::partial_swap(0.1).unwrap();
        assert!(collide(&p, &st(&[0.2, 0.3, 0.5]), &swap).is_err());
    }

    #[test]
    fn assembled_unitaries_commute_with_unperturbed_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 3, 4] {
            let spec = EnergySpec::new(d, 1.7, 1.0).unwrap();
            let variants = [
                CollisionUnitary::partial_swap(0.3).unwrap(),
                build_block_unitary(
                    d,
                    BlockParams::PartialSwaps((0..2 * d - 1).map(|k| 0.1 * k as f64).collect()),
                )
                .unwrap(),
                CollisionUnitary::GeneralBlockUnitary(BlockUnitary::random(d, &mut rng)),
            ];
            for u in &variants {
                assert!(u.commutator_norm(&spec).unwrap() <= UNITARY_TOL);
                let dense = u.dense(d).unwrap();
                assert!(unitarity_deviation(&dense) <= 1e-12);
            }
        }
    }

    #[test]
    fn transfer_matrix_is_column_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2, 3] {
            let u = CollisionUnitary::GeneralBlockUnitary(BlockUnitary::random(d, &mut rng));
            let q = random_state(d, &mut rng);
            let t = u.transfer_matrix(&q).unwrap();
            for j in 0..d {
                let col: f64 = (0..d).map(|m| t[(m, j)]).sum();
                assert_abs_diff_eq!(col, 1.0, epsilon = 1e-12);
            }
            let p = random_state(d, &mut rng);
            let via_t = &t * nalgebra::DVector::from_column_slice(p.probs());
            for (a, b) in via_t.iter().zip(collide(&p, &q, &u).unwrap().probs()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn reduced_output_has_no_coherences() {
        let p = st(&[0.8, 0.2]);
        let q = st(&[0.3, 0.7]);
        let u = CollisionUnitary::partial_swap(0.4).unwrap();
        let out = dense_collision(&p, &q, &u).unwrap();
        assert!(out.leakage <= 1e-15);
    }

    #[test]
    fn analytic_geometric_decay() {
        let fp = st(&[0.7, 0.2, 0.1]);
        let p0 = st(&[0.0, 0.0, 1.0]);
        let traj = analytic_trajectory(&p0, &fp, 0.1, 300).unwrap();
        assert_eq!(traj[0], p0);
        let d0 = p0.l1_distance(&fp);
        for (r, s) in traj.iter().enumerate() {
            let expected = (0.1f64).cos().powi(2 * r as i32) * d0;
            assert_abs_diff_eq!(s.l1_distance(&fp), expected, epsilon = 1e-12);
        }
        let u = CollisionUnitary::partial_swap(0.1).unwrap();
        let one = collide(&p0, &fp, &u).unwrap();
        for (a, b) in one.probs().iter().zip(traj[1].probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn unperturbed_single_shot_is_analytic() {
        let spec = EnergySpec::new(3, 2.0, 1.0).unwrap();
        let tau = thermal_state(&spec, 0.0);
        let u = CollisionUnitary::partial_swap(0.1).unwrap();
        let p0 = DiagonalState::ground(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rec =
            simulate_single_shot(&p0, &spec, &PerturbationSpec::none(), &u, 200, &[Alpha::ONE], &mut rng).unwrap();
        let exact = analytic_trajectory(&p0, &tau, 0.1, 200).unwrap();
        for (a, b) in rec.states.iter().zip(&exact) {
            for (x, y) in a.probs().iter().zip(b.probs()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
        assert!(rec.deltas.iter().all(|&d| d == 0.0));
        assert!(rec.energy_ledger.iter().all(|e| e.abs() <= 1e-12));
    }

    #[test]
    fn single_shot_is_deterministic_for_a_seed() {
        let spec = EnergySpec::new(2, 2.0, 1.0).unwrap();
        let pert = PerturbationSpec::gaussian(0.1).unwrap();
        let u = CollisionUnitary::partial_swap(0.1).unwrap();
        let p0 = DiagonalState::ground(2).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            simulate_single_shot(&p0, &spec, &pert, &u, 50, &[Alpha::Infinity], &mut rng).unwrap()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
        assert!(simulate_single_shot(&p0, &spec, &pert, &u, 0, &[], &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn full_swap_energy_change_closed_form() {
        let spec = EnergySpec::new(3, 2.0, 0.8).unwrap();
        let u = CollisionUnitary::partial_swap(FRAC_PI_2).unwrap();
        let p = st(&[0.2, 0.3, 0.5]);
        let s = spin_projections(3);
        for delta in [-0.4, 0.25, 1.3] {
            let res = thermal_state(&spec, delta);
            let expected = spec.g0() * delta * (p.expect(&s) - res.expect(&s));
            let got = collision_energy_change(&p, delta, &spec, &u).unwrap();
            assert_abs_diff_eq!(got, expected, epsilon = 1e-14);
            assert!(got.signum() == (delta * (p.expect(&s) - res.expect(&s))).signum());
        }
    }

    #[test]
    fn audit_recomputes_the_ledger() {
        let spec = EnergySpec::new(2, 2.0, 1.0).unwrap();
        let pert = PerturbationSpec::gaussian(0.1).unwrap();
        let u = CollisionUnitary::partial_swap(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rec =
            simulate_single_shot(&DiagonalState::ground(2).unwrap(), &spec, &pert, &u, 40, &[], &mut rng).unwrap();
        let audit = energy_audit(&rec, &spec, &u).unwrap();
        assert_eq!(audit.per_step, rec.energy_ledger);
        assert_abs_diff_eq!(
            *audit.cumulative.last().unwrap(),
            rec.energy_ledger.iter().sum::<f64>(),
            epsilon = 1e-14
        );
        let other = EnergySpec::new(3, 2.0, 1.0).unwrap();
        assert!(energy_audit(&rec, &other, &u).is_err());
    }
}
