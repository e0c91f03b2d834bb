//! Classical baseline: empirical risk minimization on i.i.d. draws, with the
//! Hoeffding + union-bound sample size.

use indexmap::IndexMap;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QalError, Result};
use crate::problem::{argmin, ProblemInstance};

/// `N_c = ⌈2C² ln(2|H|/δ) / ε²⌉`: Hoeffding at accuracy `ε/2` and confidence
/// `δ/|H|` per hypothesis.
pub fn hoeffding_sample_size(c: f64, h_size: usize, epsilon: f64, delta: f64) -> Result<u64> {
    if c <= 0.0 || !c.is_finite() {
        return Err(QalError::invalid("C", format!("must be positive, got {c}")));
    }
    if h_size == 0 {
        return Err(QalError::Empty("hypothesis class"));
    }
    if !(epsilon > 0.0 && epsilon < c) {
        return Err(QalError::invalid(
            "epsilon",
            format!("must lie in (0, C), got {epsilon}"),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(QalError::invalid(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    Ok(hoeffding_real(c, h_size, epsilon, delta).ceil() as u64)
}

fn hoeffding_real(c: f64, h_size: usize, epsilon: f64, delta: f64) -> f64 {
    2.0 * c * c * (2.0 * h_size as f64 / delta).ln() / (epsilon * epsilon)
}

/// `n` independent draws from the support distribution, as support indices.
pub fn draw_iid_samples<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    n: usize,
    rng: &mut R,
) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let dist = WeightedIndex::new(inst.probabilities()).expect("validated probabilities");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Mean loss of every hypothesis over one shared sample.
pub fn empirical_risks(inst: &ProblemInstance, samples: &[usize]) -> Result<Vec<f64>> {
    let mut counts = vec![0u64; inst.support().len()];
    for &z in samples {
        counts[z] += 1;
    }
    let n = samples.len().max(1) as f64;
    (0..inst.hypotheses().len())
        .map(|h| {
            let mut total = 0.0;
            for (z, &count) in counts.iter().enumerate() {
                if count > 0 {
                    total += count as f64 * inst.loss_at(h, z)?;
                }
            }
            Ok(total / n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalLearnResult {
    pub chosen_id: String,
    pub chosen_index: usize,
    pub samples_used: u64,
    pub empirical_risks: IndexMap<String, f64>,
}

pub fn erm_learn<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<ClassicalLearnResult> {
    let n = hoeffding_sample_size(inst.bound(), inst.hypotheses().len(), epsilon, delta)?;
    let samples = draw_iid_samples(inst, n as usize, rng);
    let risks = empirical_risks(inst, &samples)?;
    let chosen_index = argmin(&risks)?;
    Ok(ClassicalLearnResult {
        chosen_id: inst.hypotheses()[chosen_index].id.clone(),
        chosen_index,
        samples_used: n,
        empirical_risks: inst
            .hypotheses()
            .iter()
            .map(|h| h.id.clone())
            .zip(risks)
            .collect(),
    })
}
