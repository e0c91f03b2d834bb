//! Self-check suite run by `qal verify`.

use std::f64::consts::PI;
use std::fmt;

use indexmap::IndexMap;
use rand::Rng;
use serde::Serialize;

use crate::engine::{
    amplitude_a, analytic_ae_distribution, build_psi, coverage_mass, phase_to_amplitude, psi_for,
    sample_analytic, simulate_qpe, total_variation, EngineConfig, Fault, DEFAULT_QUBIT_CAP,
};
use crate::error::Result;
use crate::learner::{selection_check, SelectionOutcome};
use crate::problem::{demo2, ProblemInstance, RandomLoss, RandomSpec};
use crate::seed::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub quick: bool,
    pub qubit_cap: usize,
    pub fault: Fault,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            quick: false,
            qubit_cap: DEFAULT_QUBIT_CAP,
            fault: Fault::None,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub observed: String,
    pub required: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: observed {}, required {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.required
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

fn check(
    name: &'static str,
    required: impl Into<String>,
    run: impl FnOnce() -> Result<(bool, String)>,
) -> CheckResult {
    let required = required.into();
    match run() {
        Ok((passed, observed)) => CheckResult {
            name,
            passed,
            observed,
            required,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            observed: format!("error: {e}"),
            required,
        },
    }
}

/// Small random instances, `|Ω| ≤ 16` so `k ≤ 4`.
pub fn random_instances(seed: u64, count: usize, loss: RandomLoss) -> Result<Vec<ProblemInstance>> {
    let mut rng = substream(seed, &[0x1235]);
    (0..count)
        .map(|i| {
            let x = rng.random_range(1..=4);
            let y = rng.random_range(2..=4);
            let h = rng.random_range(1..=4);
            ProblemInstance::random(seed.wrapping_add(i as u64), &RandomSpec::new(x, y, h, loss))
        })
        .collect()
}

pub fn verify(opts: &VerifyOptions) -> VerifyReport {
    let cfg = EngineConfig {
        qubit_cap: opts.qubit_cap,
        fault: opts.fault,
        ..Default::default()
    };
    let (n_inst, m_max, lemma_trials, ae_runs) = if opts.quick {
        (8, 4, 2_000, 500)
    } else {
        (24, 6, 10_000, 2_000)
    };
    let seed = opts.seed;
    let mut checks = Vec::new();

    checks.push(check(
        "amplitude equals risk / C",
        "max error <= 1e-10",
        || {
            let mut worst: f64 = 0.0;
            for loss in [RandomLoss::ZeroOne, RandomLoss::Squared] {
                for inst in random_instances(seed, n_inst, loss)? {
                    for h in 0..inst.hypotheses().len() {
                        let a = amplitude_a(&psi_for(&inst, h)?);
                        let want = inst.exact_risk(h)? / inst.bound();
                        worst = worst.max((a - want).abs());
                    }
                }
            }
            Ok((worst <= 1e-10, format!("{worst:.3e}")))
        },
    ));

    checks.push(check(
        "squared-risk decomposition",
        "max |lhs - rhs| <= 1e-12",
        || {
            let mut worst: f64 = 0.0;
            for inst in random_instances(seed ^ 0xdec0, n_inst, RandomLoss::Squared)? {
                for h in 0..inst.hypotheses().len() {
                    let (lhs, rhs) = inst.decomposition_check(h)?;
                    worst = worst.max((lhs - rhs).abs());
                }
            }
            Ok((worst <= 1e-12, format!("{worst:.3e}")))
        },
    ));

    let floor = 8.0 / (PI * PI);
    checks.push(check(
        "error-bound coverage (statevector)",
        format!("exact coverage mass >= 8/pi^2 = {floor:.4}"),
        || {
            let mut worst: f64 = 1.0;
            let mut cases = vec![(demo2(), 0usize)];
            cases.extend(
                random_instances(seed ^ 0xc0de, n_inst / 2, RandomLoss::ZeroOne)?
                    .into_iter()
                    .map(|i| (i, 0)),
            );
            for (inst, h) in &cases {
                let psi = psi_for(inst, *h)?;
                let a = amplitude_a(&psi);
                for m in [3, m_max] {
                    let sim = simulate_qpe(&psi, m, &cfg)?;
                    worst = worst.min(coverage_mass(&sim.probs, a, m));
                }
            }
            Ok((worst >= floor - 1e-9, format!("min {worst:.4}")))
        },
    ));

    checks.push(check(
        "error-bound coverage (analytic sampler)",
        "empirical rate >= 0.78",
        || {
            let mut rng = substream(seed, &[0xae]);
            let mut worst: f64 = 1.0;
            for a in [0.1, 0.25, 0.5, 0.75, 0.9] {
                for m in [4, 6, 8] {
                    let bound = crate::engine::ae_error_bound(a, m);
                    let mut hits = 0;
                    for _ in 0..ae_runs {
                        let out = sample_analytic(a, m, &mut rng)?;
                        if (phase_to_amplitude(out.y, m) - a).abs() <= bound {
                            hits += 1;
                        }
                    }
                    worst = worst.min(hits as f64 / ae_runs as f64);
                }
            }
            Ok((worst >= 0.78, format!("min {worst:.4}")))
        },
    ));

    checks.push(check(
        "statevector vs analytic law",
        "max TV <= 1e-9",
        || {
            let mut worst: f64 = 0.0;
            for inst in random_instances(seed ^ 0x0ac1e, n_inst / 2, RandomLoss::Squared)? {
                for h in 0..inst.hypotheses().len() {
                    let psi = psi_for(&inst, h)?;
                    let a = amplitude_a(&psi).clamp(0.0, 1.0);
                    for m in 1..=m_max {
                        let sim = simulate_qpe(&psi, m, &cfg)?;
                        worst = worst.max(total_variation(
                            &sim.probs,
                            &analytic_ae_distribution(a, m)?,
                        ));
                    }
                }
            }
            Ok((worst <= 1e-9, format!("{worst:.3e}")))
        },
    ));

    checks.push(check(
        "garbage-register invariance",
        "max TV <= 1e-9",
        || {
            let mut worst: f64 = 0.0;
            let mut rng = substream(seed, &[0x9a7b]);
            for inst in random_instances(seed ^ 0x9a7b, n_inst / 2, RandomLoss::Squared)? {
                let plain = psi_for(&inst, 0)?;
                let dirty = build_psi(&inst, 0, Some(&mut rng))?;
                let m = m_max.min(5);
                let p = simulate_qpe(&plain, m, &cfg)?.probs;
                let q = simulate_qpe(&dirty, m, &cfg)?.probs;
                worst = worst.max(total_variation(&p, &q));
            }
            Ok((worst <= 1e-9, format!("{worst:.3e}")))
        },
    ));

    checks.push(check(
        "unitarity through the full circuit",
        "max norm drift <= 1e-10",
        || {
            let mut worst: f64 = 0.0;
            for inst in random_instances(seed ^ 0x0717, n_inst / 2, RandomLoss::ZeroOne)? {
                let sim = simulate_qpe(&psi_for(&inst, 0)?, m_max, &cfg)?;
                worst = worst.max(sim.max_norm_drift);
            }
            Ok((worst <= 1e-10, format!("{worst:.3e}")))
        },
    ));

    checks.push(check(
        "selection reduction",
        "holds in 100% of premise cases",
        || {
            let mut rng = substream(seed, &[0x1e33a]);
            let mut holds = 0;
            let mut bad = 0;
            while holds + bad < lemma_trials {
                let (exact, est, eps) = random_premise_triple(&mut rng);
                match selection_check(&exact, &est, eps)? {
                    SelectionOutcome::Holds => holds += 1,
                    SelectionOutcome::Counterexample { .. } => bad += 1,
                    SelectionOutcome::PremiseViolated => {}
                }
            }
            Ok((bad == 0, format!("{holds} holds, {bad} counterexamples")))
        },
    ));

    VerifyReport { checks }
}

/// Random exact risks, estimates perturbed by at most `ε`, and `ε`.
pub fn random_premise_triple<R: Rng + ?Sized>(
    rng: &mut R,
) -> (IndexMap<String, f64>, IndexMap<String, f64>, f64) {
    let n = rng.random_range(1..=16);
    let eps: f64 = rng.random_range(1e-3..0.25);
    let mut exact = IndexMap::new();
    let mut est = IndexMap::new();
    for i in 0..n {
        let r: f64 = rng.random_range(0.0..1.0);
        let noise: f64 = rng.random_range(-eps..=eps);
        exact.insert(format!("h{i}"), r);
        est.insert(format!("h{i}"), r + noise);
    }
    (exact, est, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_verify_passes() {
        let report = verify(&VerifyOptions {
            quick: true,
            ..Default::default()
        });
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn flipped_v_is_caught() {
        let report = verify(&VerifyOptions {
            quick: true,
            fault: Fault::FlipV,
            ..Default::default()
        });
        let cov = report
            .checks
            .iter()
            .find(|c| c.name == "error-bound coverage (statevector)")
            .unwrap();
        assert!(!cov.passed, "{cov}");
        assert!(!report.passed());
    }

    #[test]
    fn small_cap_reports_capacity() {
        let report = verify(&VerifyOptions {
            quick: true,
            qubit_cap: 4,
            ..Default::default()
        });
        assert!(!report.passed());
        assert!(report
            .checks
            .iter()
            .any(|c| c.observed.contains("capacity exceeded")));
    }
}
