//! Amplitude estimation over the state `|ψ⟩ = (I⊗W)(A⊗I)|0⟩`.
//!
//! Two interchangeable back ends produce the phase-estimation outcome law:
//! [`state`] simulates the full circuit on a complex statevector, and
//! [`analytic`] evaluates the closed-form law of the two-dimensional
//! invariant subspace of the Grover iterate. Each checks the other.

pub mod analytic;
pub mod state;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QalError, Result};

pub use analytic::{analytic_ae_distribution, sample_analytic};
pub use state::{
    amplitude_a, apply_w, build_psi, prepare_a, psi_for, qpe_ae_distribution, qpe_ae_run,
    simulate_qpe, QpeSimulation, StateVector,
};

pub const DEFAULT_QUBIT_CAP: usize = 24;

/// Register widths: `data` qubits for `|z⟩` (plus garbage), one loss
/// ancilla, and `m` phase-estimation ancillas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitLayout {
    pub data: usize,
    pub m: usize,
}

impl QubitLayout {
    pub fn new(data: usize, m: usize) -> Self {
        QubitLayout { data, m }
    }

    pub fn total(&self) -> usize {
        self.data + 1 + self.m
    }

    /// Dimension of the data + ancilla register.
    pub fn work_dim(&self) -> usize {
        1 << (self.data + 1)
    }

    pub fn check(&self, cap: usize) -> Result<()> {
        if self.data == 0 || self.m == 0 {
            return Err(QalError::invalid(
                "layout",
                "data and phase registers need at least one qubit",
            ));
        }
        if self.total() > cap {
            return Err(QalError::Capacity {
                required: self.total(),
                cap,
            });
        }
        Ok(())
    }
}

/// Uses of `A`, `W` and their inverses. One quantum sample is one call to
/// `A` or `A⁻¹`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub a_calls: u64,
    pub a_inv_calls: u64,
    pub w_calls: u64,
    pub w_inv_calls: u64,
}

impl QueryLedger {
    /// Counts for a single amplitude-estimation run with `m` ancillas: one
    /// preparation of `|ψ⟩` plus `2^m − 1` Grover iterates, each reflecting
    /// about `|ψ⟩` with one `A` and one `A⁻¹`.
    pub fn for_run(m: usize) -> Self {
        let t = 1u64 << m;
        QueryLedger {
            a_calls: t,
            a_inv_calls: t - 1,
            w_calls: t,
            w_inv_calls: t - 1,
        }
    }

    pub(crate) fn record_preparation(&mut self) {
        self.a_calls += 1;
        self.w_calls += 1;
    }

    pub(crate) fn record_reflections(&mut self, uses: u64) {
        self.a_calls += uses;
        self.a_inv_calls += uses;
        self.w_calls += uses;
        self.w_inv_calls += uses;
    }

    pub fn quantum_samples(&self) -> u64 {
        self.a_calls + self.a_inv_calls
    }
}

impl std::ops::AddAssign for QueryLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.a_calls += rhs.a_calls;
        self.a_inv_calls += rhs.a_inv_calls;
        self.w_calls += rhs.w_calls;
        self.w_inv_calls += rhs.w_inv_calls;
    }
}

impl std::iter::Sum for QueryLedger {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(QueryLedger::default(), |mut acc, l| {
            acc += l;
            acc
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    Statevector,
    #[default]
    Analytic,
}

impl std::str::FromStr for EngineMode {
    type Err = QalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statevector" => Ok(EngineMode::Statevector),
            "analytic" => Ok(EngineMode::Analytic),
            other => Err(QalError::invalid(
                "engine",
                format!("unknown engine `{other}`"),
            )),
        }
    }
}

/// Deliberate circuit defects, used only to check that verification notices them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    /// Replace `V = I − 2P` by `−V`.
    FlipV,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: EngineMode,
    pub qubit_cap: usize,
    pub fault: Fault,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: EngineMode::Analytic,
            qubit_cap: DEFAULT_QUBIT_CAP,
            fault: Fault::None,
        }
    }
}

impl EngineConfig {
    pub fn with_mode(mode: EngineMode) -> Self {
        EngineConfig {
            mode,
            ..Default::default()
        }
    }
}

/// One amplitude-estimation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AEOutcome {
    pub y: usize,
    pub a_hat: f64,
    pub ledger: QueryLedger,
}

/// `sin²(π y / 2^m)`, folded so that `y` and `2^m − y` give identical bits.
pub fn phase_to_amplitude(y: usize, m: usize) -> f64 {
    let t = 1usize << m;
    let y = y % t;
    let r = y.min(t - y);
    if r == 0 {
        0.0
    } else if 4 * r == t {
        0.5
    } else if 2 * r == t {
        1.0
    } else {
        let s = (PI * r as f64 / t as f64).sin();
        s * s
    }
}

/// Inverse-CDF draw: the first outcome whose cumulative mass exceeds `u`.
/// Prefix sums run in index order, so the result is reproducible.
pub fn sample_from(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the total mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub(crate) fn measure<R: Rng + ?Sized>(probs: &[f64], m: usize, rng: &mut R) -> AEOutcome {
    let u: f64 = rng.random();
    let y = sample_from(probs, u);
    AEOutcome {
        y,
        a_hat: phase_to_amplitude(y, m),
        ledger: QueryLedger::for_run(m),
    }
}

/// Total-variation distance between two distributions on the same outcomes.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(
        p.len(),
        q.len(),
        "distributions over different outcome sets"
    );
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// The error bound `2π√(a(1−a))/t + π²/t²` with `t = 2^m`.
pub fn ae_error_bound(a: f64, m: usize) -> f64 {
    let t = (1u64 << m) as f64;
    2.0 * PI * (a * (1.0 - a)).max(0.0).sqrt() / t + PI * PI / (t * t)
}

/// Probability mass of outcomes whose estimate lands within the error bound of `a`.
pub fn coverage_mass(probs: &[f64], a: f64, m: usize) -> f64 {
    let bound = ae_error_bound(a, m);
    probs
        .iter()
        .enumerate()
        .filter(|(y, _)| (phase_to_amplitude(*y, m) - a).abs() <= bound)
        .map(|(_, p)| p)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_closed_form() {
        for m in 1..12 {
            let l = QueryLedger::for_run(m);
            assert_eq!(l.a_calls + l.a_inv_calls, (1u64 << (m + 1)) - 1);
            assert_eq!(l.a_calls, 1u64 << m);
        }
    }

    #[test]
    fn amplitude_is_symmetric_and_exact_at_dyadic_points() {
        assert_eq!(phase_to_amplitude(0, 3), 0.0);
        assert_eq!(phase_to_amplitude(1, 2), 0.5);
        assert_eq!(phase_to_amplitude(3, 2), 0.5);
        assert_eq!(phase_to_amplitude(4, 3), 1.0);
        for m in 1..8 {
            let t = 1 << m;
            for y in 1..t {
                let a = phase_to_amplitude(y, m);
                assert!((0.0..=1.0).contains(&a));
                assert_eq!(a, phase_to_amplitude(t - y, m));
            }
        }
    }

    #[test]
    fn inverse_cdf_sampling() {
        let p = [0.25, 0.0, 0.5, 0.25];
        assert_eq!(sample_from(&p, 0.0), 0);
        assert_eq!(sample_from(&p, 0.2499), 0);
        assert_eq!(sample_from(&p, 0.25), 2);
        assert_eq!(sample_from(&p, 0.9), 3);
        assert_eq!(
            sample_from(&[0.5, 0.5 - 1e-17, 0.0], 0.999_999_999_999_999_9),
            1
        );
    }

    #[test]
    fn layout_capacity() {
        assert!(QubitLayout::new(2, 1).check(4).is_ok());
        assert!(matches!(
            QubitLayout::new(2, 2).check(4),
            Err(QalError::Capacity {
                required: 5,
                cap: 4
            })
        ));
    }

    #[test]
    fn engine_mode_parses() {
        assert_eq!(
            "analytic".parse::<EngineMode>().unwrap(),
            EngineMode::Analytic
        );
        assert_eq!(
            "statevector".parse::<EngineMode>().unwrap(),
            EngineMode::Statevector
        );
        assert!("gpu".parse::<EngineMode>().is_err());
    }
}
