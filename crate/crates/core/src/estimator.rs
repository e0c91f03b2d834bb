//! Mean estimation of a bounded loss by repeated amplitude estimation and a
//! median over the repetitions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::{
    amplitude_a, analytic_ae_distribution, measure, psi_for, simulate_qpe, EngineConfig,
    EngineMode, QubitLayout, QueryLedger,
};
use crate::error::{QalError, Result};
use crate::problem::ProblemInstance;
use crate::seed::substream;

/// Multiplier on `ln(1/δ)` in the repetition count. Each run lands within the
/// error bound with probability at least `8/π²`, and a Chernoff bound on the
/// median then needs `R ≥ 5.2 ln(1/δ)`.
pub const REPETITION_CONSTANT: f64 = 2.6;

const MAX_M: usize = 62;

/// Smallest `m` with `π/2^m + π²/4^m ≤ ε′`: the worst case (`a = 1/2`) of the
/// amplitude-estimation error bound at `t = 2^m`.
pub fn choose_m(epsilon_rescaled: f64) -> Result<usize> {
    if !(epsilon_rescaled > 0.0 && epsilon_rescaled < 1.0) {
        return Err(QalError::invalid(
            "epsilon",
            format!("rescaled accuracy must lie in (0, 1), got {epsilon_rescaled}"),
        ));
    }
    (1..=MAX_M)
        .find(|&m| {
            let t = (1u64 << m) as f64;
            PI / t + PI * PI / (t * t) <= epsilon_rescaled
        })
        .ok_or(QalError::Capacity {
            required: MAX_M,
            cap: MAX_M,
        })
}

/// `R = 2⌈2.6 ln(1/δ)⌉ + 1`, always odd.
pub fn choose_repetitions(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(QalError::invalid(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    Ok(2 * (REPETITION_CONSTANT * (1.0 / delta).ln()).ceil() as usize + 1)
}

/// Middle order statistic of an odd-length list.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(QalError::Empty("median of an empty list"));
    }
    if values.len().is_multiple_of(2) {
        return Err(QalError::invalid(
            "values",
            "median needs an odd number of values",
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[sorted.len() / 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub hypothesis: String,
    /// `μ̃` on the original loss scale.
    pub mu_hat: f64,
    pub epsilon_target: f64,
    pub delta_target: f64,
    pub m: usize,
    pub repetitions: usize,
    pub ledger: QueryLedger,
    /// Per-repetition `ã` on the unit scale.
    pub raw_estimates: Vec<f64>,
}

impl EstimateResult {
    pub fn quantum_samples(&self) -> u64 {
        self.ledger.quantum_samples()
    }
}

/// Estimates `E[L_f(X, Y)]` for hypothesis `h` to within `epsilon` with
/// probability at least `1 − delta`.
///
/// Repetition `r` measures with a single uniform from the substream
/// `(seed, r)`, so both engines give identical results for identical seeds.
pub fn estimate_mean(
    inst: &ProblemInstance,
    h: usize,
    epsilon: f64,
    delta: f64,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<EstimateResult> {
    let c = inst.bound();
    if !(epsilon > 0.0 && epsilon < c) {
        return Err(QalError::invalid(
            "epsilon",
            format!("must lie in (0, C) = (0, {c}), got {epsilon}"),
        ));
    }
    let id = inst
        .hypotheses()
        .get(h)
        .map(|f| f.id.clone())
        .ok_or_else(|| QalError::UnknownHypothesis(format!("#{h}")))?;
    let m = choose_m(epsilon / c)?;
    let repetitions = choose_repetitions(delta)?;
    QubitLayout::new(inst.k(), m).check(cfg.qubit_cap)?;

    let psi = psi_for(inst, h)?;
    // The circuit is deterministic up to measurement; every repetition
    // measures a fresh copy of the same pre-measurement state.
    let probs = match cfg.mode {
        EngineMode::Statevector => simulate_qpe(&psi, m, cfg)?.probs,
        EngineMode::Analytic => analytic_ae_distribution(amplitude_a(&psi).clamp(0.0, 1.0), m)?,
    };
    let outcomes: Vec<_> = (0..repetitions)
        .map(|r| measure(&probs, m, &mut substream(seed, &[r as u64])))
        .collect();
    let raw_estimates: Vec<f64> = outcomes.iter().map(|o| o.a_hat).collect();
    let mu_hat = c * median(&raw_estimates)?;
    Ok(EstimateResult {
        hypothesis: id,
        mu_hat,
        epsilon_target: epsilon,
        delta_target: delta,
        m,
        repetitions,
        ledger: outcomes.iter().map(|o| o.ledger).sum(),
        raw_estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        demo2, Hypothesis, LossKind, LossSpec, RandomLoss, RandomSpec, SupportPoint,
    };
    use indexmap::IndexMap;

    /// Independent scan of the worst-case bound, written out longhand.
    fn bound_at(m: u32) -> f64 {
        let t = 2f64.powi(m as i32);
        std::f64::consts::PI / t + std::f64::consts::PI.powi(2) / t.powi(2)
    }

    #[test]
    fn choose_m_examples() {
        assert!(bound_at(6) > 0.05 && bound_at(7) <= 0.05);
        assert_eq!(choose_m(0.05).unwrap(), 7);
        assert!(bound_at(5) > 0.1 && bound_at(6) <= 0.1);
        assert_eq!(choose_m(0.1).unwrap(), 6);
        assert!(bound_at(2) > 0.9 && bound_at(3) <= 0.9);
        assert_eq!(choose_m(0.9).unwrap(), 3);
        assert!(choose_m(0.0).is_err());
        assert!(choose_m(1.0).is_err());
        assert!(matches!(choose_m(1e-300), Err(QalError::Capacity { .. })));
    }

    #[test]
    fn choose_repetitions_examples() {
        assert_eq!(choose_repetitions(0.05).unwrap(), 17);
        assert_eq!(choose_repetitions(0.5).unwrap(), 5);
        assert_eq!(choose_repetitions(0.1).unwrap(), 13);
        assert!(choose_repetitions(0.0).is_err());
        assert!(choose_repetitions(1.0).is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[0.1]).unwrap(), 0.1);
        assert_eq!(median(&[0.3, 0.1, 0.9]).unwrap(), 0.3);
        assert_eq!(median(&[0.2, 0.2, 0.8, 0.2, 0.9]).unwrap(), 0.2);
        assert!(median(&[]).is_err());
    }

    fn constant_loss(value: f64, c: f64) -> ProblemInstance {
        let mut t = IndexMap::new();
        t.insert("f".to_string(), vec![vec![value, value]]);
        ProblemInstance::new(
            1,
            vec![0.0, 1.0],
            1,
            vec![
                SupportPoint {
                    x: 0,
                    y: 0,
                    p: 0.35,
                },
                SupportPoint {
                    x: 0,
                    y: 1,
                    p: 0.65,
                },
            ],
            vec![Hypothesis::new("f", vec![0.0])],
            LossSpec::new(LossKind::Table(t), c),
        )
        .unwrap()
    }

    #[test]
    fn constant_loss_at_half_is_exact() {
        let inst = constant_loss(1.0, 2.0);
        for seed in 0..5 {
            for mode in [EngineMode::Analytic, EngineMode::Statevector] {
                let r = estimate_mean(&inst, 0, 0.2, 0.1, seed, &EngineConfig::with_mode(mode))
                    .unwrap();
                assert_eq!(r.mu_hat, 1.0);
                assert!(r.raw_estimates.iter().all(|&a| a == 0.5));
            }
        }
    }

    #[test]
    fn constant_loss_within_bound() {
        let inst = constant_loss(0.6, 1.0);
        let r = estimate_mean(&inst, 0, 0.05, 0.1, 42, &EngineConfig::default()).unwrap();
        assert!((r.mu_hat - 0.6).abs() <= 0.05);
        assert!(r.mu_hat >= 0.0 && r.mu_hat <= 1.0);
    }

    #[test]
    fn ledger_total() {
        let r = estimate_mean(&demo2(), 0, 0.05, 0.05, 1, &EngineConfig::default()).unwrap();
        assert_eq!(r.m, 7);
        assert_eq!(r.repetitions, 17);
        assert_eq!(r.quantum_samples(), 4335);
        assert_eq!(r.raw_estimates.len(), 17);
    }

    #[test]
    fn engines_agree() {
        let inst =
            ProblemInstance::random(21, &RandomSpec::new(2, 2, 3, RandomLoss::Squared)).unwrap();
        for h in 0..3 {
            for seed in 0..4 {
                let a = estimate_mean(
                    &inst,
                    h,
                    0.1,
                    0.2,
                    seed,
                    &EngineConfig::with_mode(EngineMode::Analytic),
                )
                .unwrap();
                let s = estimate_mean(
                    &inst,
                    h,
                    0.1,
                    0.2,
                    seed,
                    &EngineConfig::with_mode(EngineMode::Statevector),
                )
                .unwrap();
                assert_eq!(a, s);
            }
        }
    }

    #[test]
    fn argument_errors() {
        let inst = demo2();
        let cfg = EngineConfig::default();
        assert!(estimate_mean(&inst, 0, 0.0, 0.1, 0, &cfg).is_err());
        assert!(estimate_mean(&inst, 0, 1.0, 0.1, 0, &cfg).is_err());
        assert!(estimate_mean(&inst, 0, 0.1, 1.0, 0, &cfg).is_err());
        assert!(matches!(
            estimate_mean(&inst, 9, 0.1, 0.1, 0, &cfg),
            Err(QalError::UnknownHypothesis(_))
        ));
        let tight = EngineConfig {
            qubit_cap: 6,
            ..Default::default()
        };
        assert!(matches!(
            estimate_mean(&inst, 0, 0.1, 0.1, 0, &tight),
            Err(QalError::Capacity {
                required: 9,
                cap: 6
            })
        ));
    }
}
