//! Agnostic learner: estimate every hypothesis's risk under a union-bound
//! budget and return the minimizer of the estimates.

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::{QalError, Result};
use crate::estimator::{estimate_mean, EstimateResult};
use crate::problem::{argmin, ProblemInstance};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub epsilon_per_hyp: f64,
    pub delta_per_hyp: f64,
}

/// Splits `(ε, δ)` into `(ε/2, δ/|H|)`: each estimate within `ε/2` gives an
/// excess risk of at most `ε`, and the union bound over `|H|` estimates keeps
/// the total failure probability at `δ`.
pub fn allocate_budget(h_size: usize, epsilon: f64, delta: f64) -> Result<Budget> {
    if h_size == 0 {
        return Err(QalError::Empty("hypothesis class"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(QalError::invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(QalError::invalid(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    Ok(Budget {
        epsilon_per_hyp: epsilon / 2.0,
        delta_per_hyp: delta / h_size as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub chosen_id: String,
    pub chosen_index: usize,
    pub estimates: IndexMap<String, EstimateResult>,
    pub total_quantum_samples: u64,
    pub budget: Budget,
    /// Parameter ranges outside those where the guarantee is claimed.
    pub warnings: Vec<String>,
}

/// `epsilon` here is relative to the loss bound.
fn range_warnings(epsilon: f64, delta: f64) -> Vec<String> {
    let mut warnings = Vec::new();
    if epsilon >= 0.125 {
        warnings.push(format!(
            "epsilon / C = {epsilon} >= 1/8: the excess-risk guarantee is not claimed"
        ));
    }
    if delta >= 0.5 {
        warnings.push(format!(
            "delta = {delta} >= 1/2: the excess-risk guarantee is not claimed"
        ));
    }
    warnings
}

pub fn learn(
    inst: &ProblemInstance,
    epsilon: f64,
    delta: f64,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<LearnResult> {
    let n = inst.hypotheses().len();
    let budget = allocate_budget(n, epsilon, delta)?;
    let warnings = range_warnings(epsilon / inst.bound(), delta);
    for w in &warnings {
        log::warn!("{w}");
    }
    let estimates: Vec<EstimateResult> = (0..n)
        .into_par_iter()
        .map(|h| {
            estimate_mean(
                inst,
                h,
                budget.epsilon_per_hyp,
                budget.delta_per_hyp,
                derive_seed(seed, &[h as u64]),
                cfg,
            )
        })
        .collect::<Result<_>>()?;
    let mu: Vec<f64> = estimates.iter().map(|e| e.mu_hat).collect();
    let chosen_index = argmin(&mu)?;
    Ok(LearnResult {
        chosen_id: inst.hypotheses()[chosen_index].id.clone(),
        chosen_index,
        total_quantum_samples: estimates.iter().map(EstimateResult::quantum_samples).sum(),
        estimates: estimates
            .into_iter()
            .map(|e| (e.hypothesis.clone(), e))
            .collect(),
        budget,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SelectionOutcome {
    /// Every estimate is within `ε` and the estimate-minimizer is within `2ε`
    /// of the best risk.
    Holds,
    /// Some estimate is off by more than `ε`; nothing is claimed.
    PremiseViolated,
    /// All estimates are within `ε` yet the chosen risk misses by more than
    /// `2ε`. Cannot happen unless the reduction is broken.
    Counterexample { chosen: String, excess: f64 },
}

/// Checks the deterministic reduction from uniformly accurate estimates to
/// near-optimal selection.
pub fn selection_check(
    exact_risks: &IndexMap<String, f64>,
    estimates: &IndexMap<String, f64>,
    epsilon: f64,
) -> Result<SelectionOutcome> {
    if exact_risks.len() != estimates.len()
        || exact_risks
            .keys()
            .zip(estimates.keys())
            .any(|(a, b)| a != b)
    {
        return Err(QalError::KeyMismatch(format!(
            "{:?} vs {:?}",
            exact_risks.keys().collect::<Vec<_>>(),
            estimates.keys().collect::<Vec<_>>()
        )));
    }
    if exact_risks.is_empty() {
        return Err(QalError::Empty("hypothesis class"));
    }
    let premise = exact_risks
        .values()
        .zip(estimates.values())
        .all(|(e, m)| (e - m).abs() <= epsilon);
    if !premise {
        return Ok(SelectionOutcome::PremiseViolated);
    }
    let est: Vec<f64> = estimates.values().copied().collect();
    let chosen = argmin(&est)?;
    let best = exact_risks.values().copied().fold(f64::INFINITY, f64::min);
    let chosen_risk = exact_risks[chosen];
    if chosen_risk <= best + 2.0 * epsilon {
        Ok(SelectionOutcome::Holds)
    } else {
        Ok(SelectionOutcome::Counterexample {
            chosen: exact_risks
                .get_index(chosen)
                .map(|(k, _)| k.clone())
                .unwrap_or_default(),
            excess: chosen_risk - best,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineMode;
    use crate::problem::{demo2, Hypothesis, LossKind, LossSpec, SupportPoint};

    fn map(values: &[f64]) -> IndexMap<String, f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("f{}", i + 1), *v))
            .collect()
    }

    #[test]
    fn budget_examples() {
        assert_eq!(
            allocate_budget(4, 0.1, 0.05).unwrap(),
            Budget {
                epsilon_per_hyp: 0.05,
                delta_per_hyp: 0.0125
            }
        );
        let b = allocate_budget(1, 0.07, 0.3).unwrap();
        assert_eq!((b.epsilon_per_hyp, b.delta_per_hyp), (0.035, 0.3));
        let b = allocate_budget(8, 0.05, 0.1).unwrap();
        assert_eq!((b.epsilon_per_hyp, b.delta_per_hyp), (0.025, 0.0125));
        assert!(allocate_budget(0, 0.1, 0.1).is_err());
        assert!(allocate_budget(2, -0.1, 0.1).is_err());
        assert!(allocate_budget(2, f64::NAN, 0.1).is_err());
        assert!(allocate_budget(2, 0.1, 0.0).is_err());
    }

    #[test]
    fn selection_examples() {
        assert_eq!(
            selection_check(&map(&[0.3, 0.5]), &map(&[0.32, 0.48]), 0.05).unwrap(),
            SelectionOutcome::Holds
        );
        assert_eq!(
            selection_check(&map(&[0.3, 0.5]), &map(&[0.45, 0.35]), 0.05).unwrap(),
            SelectionOutcome::PremiseViolated
        );
        assert_eq!(
            selection_check(&map(&[0.3, 0.31]), &map(&[0.33, 0.29]), 0.05).unwrap(),
            SelectionOutcome::Holds
        );
        assert!(matches!(
            selection_check(&map(&[0.3]), &map(&[0.3, 0.4]), 0.05),
            Err(QalError::KeyMismatch(_))
        ));
    }

    #[test]
    fn learns_demo2() {
        let inst = demo2();
        let r = learn(&inst, 0.1, 0.1, 5, &EngineConfig::default()).unwrap();
        assert_eq!(r.chosen_id, "identity");
        assert_eq!(r.estimates.len(), 4);
        assert_eq!(
            r.total_quantum_samples,
            r.estimates
                .values()
                .map(|e| e.quantum_samples())
                .sum::<u64>()
        );
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn singleton_and_zero_loss() {
        let single = ProblemInstance::new(
            1,
            vec![0.0, 1.0],
            1,
            vec![
                SupportPoint { x: 0, y: 0, p: 0.5 },
                SupportPoint { x: 0, y: 1, p: 0.5 },
            ],
            vec![Hypothesis::new("only", vec![0.0])],
            LossSpec::new(LossKind::ZeroOne, 1.0),
        )
        .unwrap();
        let r = learn(&single, 0.1, 0.1, 0, &EngineConfig::default()).unwrap();
        assert_eq!(r.chosen_id, "only");

        let mut t = IndexMap::new();
        t.insert("a".to_string(), vec![vec![0.0, 0.0]]);
        t.insert("b".to_string(), vec![vec![0.0, 0.0]]);
        let zero = ProblemInstance::new(
            1,
            vec![0.0, 1.0],
            1,
            single.support().to_vec(),
            vec![
                Hypothesis::new("a", vec![0.0]),
                Hypothesis::new("b", vec![1.0]),
            ],
            LossSpec::new(LossKind::Table(t), 1.0),
        )
        .unwrap();
        let r = learn(
            &zero,
            0.1,
            0.1,
            0,
            &EngineConfig::with_mode(EngineMode::Statevector),
        )
        .unwrap();
        assert_eq!(r.chosen_id, "a");
        assert!(r.estimates.values().all(|e| e.mu_hat == 0.0));
    }

    #[test]
    fn warns_outside_claimed_ranges() {
        let r = learn(&demo2(), 0.2, 0.6, 0, &EngineConfig::default()).unwrap();
        assert_eq!(r.warnings.len(), 2);
    }
}
