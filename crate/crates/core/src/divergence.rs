//! Rényi divergences D_alpha(p || q) between diagonal states and the
//! generalized free energies F_alpha built on them.
//!
//! All sums are taken in log space with a max shift. Special orders:
//! alpha = 1 is the Kullback-Leibler limit, alpha = +inf the max log-ratio,
//! alpha = 0 the alpha -> 0+ limit -ln sum_{p_j > 0} q_j.

use std::fmt;

use crate::error::{Error, Result};
use crate::qudit::{thermal_state, DiagonalState, EnergySpec};

/// Orders closer than this to 1 use the Kullback-Leibler branch.
pub const KL_ROUTING_TOL: f64 = 1e-9;

/// Order of a Rényi divergence: any real number, or +inf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    Infinity,
}

impl Alpha {
    pub const ZERO: Alpha = Alpha::Finite(0.0);
    pub const ONE: Alpha = Alpha::Finite(1.0);

    /// `f64::INFINITY` maps to [`Alpha::Infinity`]; NaN and -inf are rejected.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::NEG_INFINITY {
            return Err(Error::param("alpha", format!("unsupported order {value}")));
        }
        Ok(if value == f64::INFINITY {
            Alpha::Infinity
        } else {
            Alpha::Finite(value)
        })
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Alpha::Finite(a) => a,
            Alpha::Infinity => f64::INFINITY,
        }
    }

    pub fn is_negative(self) -> bool {
        self.as_f64() < 0.0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::Infinity => f.write_str("inf"),
        }
    }
}

impl From<f64> for Alpha {
    fn from(value: f64) -> Self {
        if value == f64::INFINITY {
            Alpha::Infinity
        } else {
            Alpha::Finite(value)
        }
    }
}

fn log_ratios(p: &DiagonalState, q: &DiagonalState) -> Result<Vec<Option<f64>>> {
    p.check_dim(q.dim())?;
    if let Some(level) = q.probs().iter().position(|&qj| qj <= 0.0) {
        return Err(Error::UnsupportedReference { level });
    }
    Ok(p.probs()
        .iter()
        .zip(q.probs())
        .map(|(&pj, &qj)| (pj > 0.0).then(|| pj.ln() - qj.ln()))
        .collect())
}

/// D_alpha(p || q) in nats. `q` must have full support.
pub fn renyi_divergence(p: &DiagonalState, q: &DiagonalState, alpha: Alpha) -> Result<f64> {
    let ratios = log_ratios(p, q)?;
    let probs = p.probs();
    let a = match alpha {
        Alpha::Infinity => {
            return Ok(ratios.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        Alpha::Finite(a) => a,
    };

    if (a - 1.0).abs() < KL_ROUTING_TOL {
        return Ok(ratios.iter().zip(probs).filter_map(|(r, pj)| r.map(|r| pj * r)).sum());
    }

    if a == 0.0 {
        let missing: f64 = ratios
            .iter()
            .zip(q.probs())
            .filter(|(r, _)| r.is_none())
            .map(|(_, qj)| qj)
            .sum();
        return Ok(-(-missing).ln_1p());
    }

    if a < 0.0 {
        if let Some(level) = ratios.iter().position(Option::is_none) {
            return Err(Error::DivergentInput { level, alpha: a });
        }
    }

    // sum_j p_j^a q_j^(1-a) = sum_j p_j exp((a - 1) r_j)
    let shift = a - 1.0;
    let max_exponent = ratios.iter().flatten().map(|r| (shift * r).abs()).fold(0.0, f64::max);
    let log_sum = if max_exponent < 1.0 {
        let excess: f64 = ratios
            .iter()
            .zip(probs)
            .filter_map(|(r, pj)| r.map(|r| pj * (shift * r).exp_m1()))
            .sum::<f64>()
            + (probs.iter().sum::<f64>() - 1.0);
        excess.ln_1p()
    } else {
        let terms: Vec<f64> = ratios
            .iter()
            .zip(probs)
            .filter_map(|(r, pj)| r.map(|r| pj.ln() + shift * r))
            .collect();
        crate::qudit::log_sum_exp(&terms)
    };
    // sgn(a) / (a - 1)
    Ok(a.signum() / shift * log_sum)
}

/// F_alpha = (D_alpha(p || tau_S) - ln Z_S) / beta.
pub fn free_energy(p: &DiagonalState, spec: &EnergySpec, alpha: Alpha) -> Result<f64> {
    if spec.beta() == 0.0 {
        return Err(Error::UndefinedTemperature);
    }
    let reference = thermal_state(spec, 0.0);
    let d = renyi_divergence(p, &reference, alpha)?;
    Ok((d - spec.log_partition()) / spec.beta())
}

/// Elementwise [`renyi_divergence`]; errors carry the offending order.
pub fn divergence_profile(p: &DiagonalState, q: &DiagonalState, alphas: &[Alpha]) -> Result<Vec<f64>> {
    alphas
        .iter()
        .map(|&alpha| {
            renyi_divergence(p, q, alpha).map_err(|e| Error::AtAlpha {
                alpha,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn st(p: &[f64]) -> DiagonalState {
        DiagonalState::new(p.to_vec()).unwrap()
    }

    fn qubit_ref() -> DiagonalState {
        thermal_state(&EnergySpec::new(2, 2.0, 1.0).unwrap(), 0.0)
    }

    fn all_orders() -> Vec<Alpha> {
        [0.0, 0.3, 0.5, 1.0, 2.0, 5.0, 10.0, -0.5]
            .into_iter()
            .map(Alpha::Finite)
            .chain([Alpha::Infinity])
            .collect()
    }

    #[test]
    fn identical_states_have_zero_divergence() {
        let q = thermal_state(&EnergySpec::new(3, 2.0, 1.0).unwrap(), 0.0);
        for a in all_orders() {
            assert_abs_diff_eq!(renyi_divergence(&q, &q, a).unwrap(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn pure_ground_collapses_to_minus_log_q0() {
        let q = qubit_ref();
        let expected = 0.126_928_011_042_972_6;
        for a in [0.3, 0.5, 1.0, 2.0, 10.0] {
            let d = renyi_divergence(&st(&[1.0, 0.0]), &q, Alpha::Finite(a)).unwrap();
            assert_abs_diff_eq!(d, expected, epsilon = 1e-12);
        }
        let d = renyi_divergence(&st(&[1.0, 0.0]), &q, Alpha::Infinity).unwrap();
        assert_abs_diff_eq!(d, expected, epsilon = 1e-12);
    }

    #[test]
    fn kl_example() {
        let d = renyi_divergence(&st(&[0.9, 0.1]), &qubit_ref(), Alpha::ONE).unwrap();
        // 0.9 ln(0.9/q0) + 0.1 ln(0.1/q1) evaluated separately
        assert_abs_diff_eq!(d, 0.001_845_037_651_524_366_5, epsilon = 1e-14);
    }

    #[test]
    fn order_zero_is_support_overlap() {
        let q = st(&[0.5, 0.3, 0.2]);
        assert_eq!(renyi_divergence(&st(&[0.2, 0.3, 0.5]), &q, Alpha::ZERO).unwrap(), 0.0);
        let d = renyi_divergence(&st(&[0.6, 0.4, 0.0]), &q, Alpha::ZERO).unwrap();
        assert_abs_diff_eq!(d, -(0.8f64).ln(), epsilon = 1e-15);
    }

    #[test]
    fn reference_without_full_support_is_rejected() {
        let err = renyi_divergence(&st(&[0.5, 0.5]), &st(&[1.0, 0.0]), Alpha::ONE).unwrap_err();
        assert_eq!(err, Error::UnsupportedReference { level: 1 });
    }

    #[test]
    fn negative_order_needs_full_support() {
        let q = st(&[0.5, 0.5]);
        let err = renyi_divergence(&st(&[1.0, 0.0]), &q, Alpha::Finite(-0.5)).unwrap_err();
        assert!(matches!(err, Error::DivergentInput { level: 1, .. }));
        // sgn(a)/(a-1) ln sum p^a q^(1-a)
        let p = [0.7f64, 0.3];
        let a = -0.5f64;
        let sum: f64 = p.iter().map(|pj| pj.powf(a) * 0.5f64.powf(1.0 - a)).sum();
        let expected = -1.0 / (a - 1.0) * sum.ln();
        let d = renyi_divergence(&st(&p), &q, Alpha::Finite(a)).unwrap();
        assert_abs_diff_eq!(d, expected, epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let err = renyi_divergence(&st(&[0.5, 0.5]), &st(&[0.2, 0.3, 0.5]), Alpha::ONE).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn free_energy_of_reference_and_ground() {
        let spec = EnergySpec::new(2, 2.0, 1.0).unwrap();
        let tau = thermal_state(&spec, 0.0);
        for a in all_orders() {
            assert_abs_diff_eq!(
                free_energy(&tau, &spec, a).unwrap(),
                -spec.log_partition(),
                epsilon = 1e-14
            );
        }
        // pure ground: -ln q0 - ln Z = E_0 = -1
        let f = free_energy(&st(&[1.0, 0.0]), &spec, Alpha::ONE).unwrap();
        assert_abs_diff_eq!(f, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn free_energy_differences_are_offset_free() {
        let spec = EnergySpec::new(3, 1.0, 0.7).unwrap();
        let tau = thermal_state(&spec, 0.0);
        let p = st(&[0.2, 0.5, 0.3]);
        for a in [Alpha::Finite(0.5), Alpha::ONE, Alpha::Infinity] {
            let df = free_energy(&p, &spec, a).unwrap() - free_energy(&tau, &spec, a).unwrap();
            let d = renyi_divergence(&p, &tau, a).unwrap();
            assert_abs_diff_eq!(df, d / 0.7, epsilon = 1e-13);
        }
    }

    #[test]
    fn free_energy_at_infinite_temperature_fails() {
        let spec = EnergySpec::new(2, 2.0, 0.0).unwrap();
        assert_eq!(
            free_energy(&st(&[0.5, 0.5]), &spec, Alpha::ONE).unwrap_err(),
            Error::UndefinedTemperature
        );
    }

    #[test]
    fn profile_matches_individual_calls() {
        let q = qubit_ref();
        let p = st(&[1.0, 0.0]);
        let alphas = [Alpha::Finite(0.5), Alpha::ONE, Alpha::Finite(2.0), Alpha::Infinity];
        let prof = divergence_profile(&p, &q, &alphas).unwrap();
        for (v, a) in prof.iter().zip(alphas) {
            assert_eq!(*v, renyi_divergence(&p, &q, a).unwrap());
            assert_abs_diff_eq!(*v, 0.126_928_011_042_972_6, epsilon = 1e-12);
        }
        let zeros = divergence_profile(&q, &q, &[Alpha::ZERO, Alpha::ONE, Alpha::Infinity]).unwrap();
        assert!(zeros.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn profile_error_names_alpha() {
        let err =
            divergence_profile(&st(&[1.0, 0.0]), &st(&[0.5, 0.5]), &[Alpha::ONE, Alpha::Finite(-2.0)]).unwrap_err();
        match err {
            Error::AtAlpha { alpha, .. } => assert_eq!(alpha, Alpha::Finite(-2.0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn alpha_parsing_and_display() {
        assert_eq!(Alpha::new(f64::INFINITY).unwrap(), Alpha::Infinity);
        assert!(Alpha::new(f64::NAN).is_err());
        assert_eq!(Alpha::Infinity.to_string(), "inf");
        assert_eq!(Alpha::Finite(0.5).to_string(), "0.5");
    }

    fn simplex(d: usize) -> impl Strategy<Value = DiagonalState> {
        proptest::collection::vec(0.01f64..1.0, d).prop_map(|w| {
            let total: f64 = w.iter().sum();
            DiagonalState::new(w.iter().map(|x| x / total).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn nondecreasing_in_order(p in simplex(3), q in simplex(3)) {
            let grid = [0.0, 0.1, 0.3, 0.5, 0.9, 1.0, 1.5, 2.0, 5.0, 20.0];
            let mut prev = f64::NEG_INFINITY;
            for a in grid {
                let v = renyi_divergence(&p, &q, Alpha::Finite(a)).unwrap();
                prop_assert!(v >= prev - 1e-12, "a = {a}: {v} < {prev}");
                prev = v;
            }
            let inf = renyi_divergence(&p, &q, Alpha::Infinity).unwrap();
            prop_assert!(inf >= prev - 1e-12);
            prop_assert!(renyi_divergence(&p, &q, Alpha::ZERO).unwrap() >= 0.0);
        }

        #[test]
        fn limits_agree_with_special_branches(p in simplex(3), q in simplex(3)) {
            let kl = renyi_divergence(&p, &q, Alpha::ONE).unwrap();
            for a in [1.0 - 1e-6, 1.0 + 1e-6] {
                let v = renyi_divergence(&p, &q, Alpha::Finite(a)).unwrap();
                prop_assert!((v - kl).abs() < 1e-5);
            }
            // r_max + ln p_argmax / (a - 1) <= D_a <= r_max
            let inf = renyi_divergence(&p, &q, Alpha::Infinity).unwrap();
            let big = renyi_divergence(&p, &q, Alpha::Finite(1e3)).unwrap();
            let argmax = (0..3)
                .max_by(|&i, &j| {
                    let ri = p.probs()[i] / q.probs()[i];
                    let rj = p.probs()[j] / q.probs()[j];
                    ri.partial_cmp(&rj).unwrap()
                })
                .unwrap();
            let gap = inf - big;
            prop_assert!(gap >= -1e-12);
            prop_assert!(gap <= -p.probs()[argmax].ln() / 999.0 + 1e-12);
            if p.probs()[argmax] > 0.37 {
                prop_assert!(gap < 1e-3);
            }
        }
    }
}
