//! Closed-form outcome law of amplitude estimation.
//!
//! The Grover iterate acts on `span{|ψ₀⟩, |ψ₁⟩}` as a rotation with
//! eigenphases `±θ/π` (in turns), `a = sin²θ`, and `|ψ⟩` splits evenly
//! between the two eigenvectors. Phase estimation of a single eigenphase `φ`
//! with `T = 2^m` outcomes yields `y` with the Fejér-kernel probability
//! `sin²(πTΔ) / (T² sin²(πΔ))`, `Δ = φ − y/T`.

use std::f64::consts::PI;

use rand::Rng;

use super::{measure, AEOutcome};
use crate::error::{QalError, Result};

fn fejer(mut delta: f64, t: usize) -> f64 {
    delta -= delta.round();
    if delta == 0.0 {
        return 1.0;
    }
    let t = t as f64;
    let ratio = (PI * t * delta).sin() / (t * (PI * delta).sin());
    ratio * ratio
}

fn single_phase(phase: f64, t: usize) -> Vec<f64> {
    (0..t)
        .map(|y| fejer(phase - y as f64 / t as f64, t))
        .collect()
}

pub fn analytic_ae_distribution(a: f64, m: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&a) {
        return Err(QalError::invalid(
            "a",
            format!("amplitude {a} outside [0, 1]"),
        ));
    }
    if m == 0 || m >= 40 {
        return Err(QalError::invalid("m", format!("need 1 <= m < 40, got {m}")));
    }
    let t = 1usize << m;
    if a == 0.0 {
        return Ok(single_phase(0.0, t));
    }
    if a == 1.0 {
        return Ok(single_phase(0.5, t));
    }
    let phase = a.sqrt().asin() / PI;
    let plus = single_phase(phase, t);
    let minus = single_phase(1.0 - phase, t);
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, q)| 0.5 * (p + q))
        .collect())
}

/// Draws one outcome from [`analytic_ae_distribution`] with a single uniform.
pub fn sample_analytic<R: Rng + ?Sized>(a: f64, m: usize, rng: &mut R) -> Result<AEOutcome> {
    let probs = analytic_ae_distribution(a, m)?;
    Ok(measure(&probs, m, rng))
}
