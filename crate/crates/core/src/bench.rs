//! Experiment harness: learning trials over `(method, ε, δ)` grids, written
//! as CSV, plus the log-log and affine fits used to read scaling exponents.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::erm_learn;
use crate::engine::{EngineConfig, EngineMode, DEFAULT_QUBIT_CAP};
use crate::error::{QalError, Result};
use crate::learner::learn;
use crate::problem::{ProblemInstance, RandomSpec};
use crate::seed::{derive_seed, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quantum,
    Classical,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Quantum => "quantum",
            Method::Classical => "classical",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = QalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(Method::Quantum),
            "classical" => Ok(Method::Classical),
            other => Err(QalError::invalid(
                "method",
                format!("unknown method `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Path(PathBuf),
    Random {
        seed: u64,
        #[serde(flatten)]
        spec: RandomSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub instance: InstanceSource,
    pub methods: Vec<Method>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: EngineMode,
    #[serde(default = "default_cap")]
    pub qubit_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_QUBIT_CAP
}

impl BenchConfig {
    /// Reads a config; a relative instance path is taken relative to the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| QalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: BenchConfig = serde_json::from_str(&text)?;
        if let InstanceSource::Path(p) = &mut cfg.instance {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(QalError::validation("methods", "must be nonempty"));
        }
        if self.epsilons.is_empty() {
            return Err(QalError::validation("epsilons", "must be nonempty"));
        }
        if self.deltas.is_empty() {
            return Err(QalError::validation("deltas", "must be nonempty"));
        }
        if self.trials == 0 {
            return Err(QalError::validation("trials", "must be at least 1"));
        }
        Ok(())
    }

    pub fn load_instance(&self) -> Result<(String, ProblemInstance)> {
        match &self.instance {
            InstanceSource::Path(p) => {
                let id = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string());
                Ok((id, ProblemInstance::load(p)?))
            }
            InstanceSource::Random { seed, spec } => Ok((
                format!(
                    "random-{seed}-{}x{}-h{}",
                    spec.x_size, spec.y_size, spec.h_size
                ),
                ProblemInstance::random(*seed, spec)?,
            )),
        }
    }

    fn engine(&self) -> EngineConfig {
        EngineConfig {
            mode: self.engine,
            qubit_cap: self.qubit_cap,
            ..Default::default()
        }
    }

    /// `(method, ε, δ)` cells in output order.
    pub fn cells(&self) -> Vec<(Method, f64, f64)> {
        let mut cells = Vec::new();
        for &method in &self.methods {
            for &eps in &self.epsilons {
                for &delta in &self.deltas {
                    cells.push((method, eps, delta));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub instance_id: String,
    pub method: Method,
    pub epsilon: f64,
    pub delta: f64,
    pub trial: usize,
    pub seed: u64,
    pub chosen_id: String,
    /// Calls to `A` and `A⁻¹` for quantum rows, i.i.d. draws for classical rows.
    pub samples_used: u64,
    /// Exact risk of the chosen hypothesis minus the best exact risk.
    pub risk_gap: Option<f64>,
    pub success: bool,
    /// Why the trial produced no hypothesis, if it failed to run.
    pub reason: String,
}

pub const CSV_HEADER: [&str; 11] = [
    "instance_id",
    "method",
    "epsilon",
    "delta",
    "trial",
    "seed",
    "chosen_id",
    "samples_used",
    "risk_gap",
    "success",
    "reason",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn render_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl BenchRow {
    fn record(&self) -> [String; 11] {
        [
            self.instance_id.clone(),
            self.method.to_string(),
            render_f64(self.epsilon),
            render_f64(self.delta),
            self.trial.to_string(),
            self.seed.to_string(),
            self.chosen_id.clone(),
            self.samples_used.to_string(),
            self.risk_gap.map(render_f64).unwrap_or_default(),
            u8::from(self.success).to_string(),
            self.reason.clone(),
        ]
    }
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    inst: &ProblemInstance,
    risks: &[f64],
    best: f64,
    instance_id: &str,
    cell: (Method, f64, f64),
    trial: usize,
    seed: u64,
    engine: &EngineConfig,
) -> BenchRow {
    let (method, epsilon, delta) = cell;
    let outcome = match method {
        Method::Quantum => learn(inst, epsilon, delta, seed, engine)
            .map(|r| (r.chosen_index, r.total_quantum_samples)),
        Method::Classical => erm_learn(inst, epsilon, delta, &mut substream(seed, &[]))
            .map(|r| (r.chosen_index, r.samples_used)),
    };
    let mut row = BenchRow {
        instance_id: instance_id.to_string(),
        method,
        epsilon,
        delta,
        trial,
        seed,
        chosen_id: String::new(),
        samples_used: 0,
        risk_gap: None,
        success: false,
        reason: String::new(),
    };
    match outcome {
        Ok((chosen, samples)) => {
            let gap = risks[chosen] - best;
            row.chosen_id = inst.hypotheses()[chosen].id.clone();
            row.samples_used = samples;
            row.risk_gap = Some(gap);
            row.success = gap <= epsilon;
        }
        Err(e) => row.reason = e.to_string(),
    }
    row
}

/// Runs every `(method, ε, δ, trial)` combination. Trial seeds derive from
/// `(seed, cell index, trial index)`, so output does not depend on scheduling.
pub fn run_bench(
    config: &BenchConfig,
    instance_id: &str,
    inst: &ProblemInstance,
) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let engine = config.engine();
    let risks = inst.exact_risks();
    let best = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let cells = config.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.trials).map(move |t| (c, t)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(c, t)| {
            let seed = derive_seed(config.seed, &[c as u64, t as u64]);
            run_trial(inst, &risks, best, instance_id, cells[c], t, seed, &engine)
        })
        .collect())
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn csv_string(rows: &[BenchRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Least-squares slope of `ln(samples)` against `ln(ε)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(QalError::invalid("points", "need at least three points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(QalError::invalid("points", "coordinates must be positive"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    Ok(fit_affine(&logs)?.slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Largest `|y − ŷ| / |y|` over the input points.
    pub max_relative_residual: f64,
}

/// Ordinary least squares `y ≈ intercept + slope · x`.
pub fn fit_affine(points: &[(f64, f64)]) -> Result<AffineFit> {
    if points.len() < 2 {
        return Err(QalError::invalid("points", "need at least two points"));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return Err(QalError::invalid("points", "all x values are equal"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_relative_residual = points
        .iter()
        .map(|&(x, y)| ((y - intercept - slope * x) / y).abs())
        .fold(0.0, f64::max);
    Ok(AffineFit {
        intercept,
        slope,
        max_relative_residual,
    })
}

/// Per-method scaling summary at one `δ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSummary {
    pub method: Method,
    pub delta: f64,
    /// `(ε, mean samples_used)` over runs that completed.
    pub points: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    pub success_rate: f64,
    /// Mean of `samples · ε^p / (ln|H| + ln(1/δ))` with `p = 1` (quantum) or
    /// `p = 2` (classical): the empirically calibrated leading constant.
    pub fitted_constant: f64,
}

pub fn summarize(rows: &[BenchRow], h_size: usize) -> Vec<ScalingSummary> {
    let mut keys: Vec<(Method, u64)> = Vec::new();
    for r in rows {
        let key = (r.method, r.delta.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, delta_bits)| {
            let delta = f64::from_bits(delta_bits);
            let cell: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.method == method && r.delta.to_bits() == delta_bits)
                .collect();
            let mut eps: Vec<f64> = Vec::new();
            for r in &cell {
                if !eps.iter().any(|e| e.to_bits() == r.epsilon.to_bits()) {
                    eps.push(r.epsilon);
                }
            }
            let points: Vec<(f64, f64)> = eps
                .iter()
                .filter_map(|&e| {
                    let ran: Vec<f64> = cell
                        .iter()
                        .filter(|r| r.epsilon == e && r.risk_gap.is_some())
                        .map(|r| r.samples_used as f64)
                        .collect();
                    (!ran.is_empty()).then(|| (e, ran.iter().sum::<f64>() / ran.len() as f64))
                })
                .collect();
            let power = match method {
                Method::Quantum => 1,
                Method::Classical => 2,
            };
            let log_term = (h_size as f64).ln() + (1.0 / delta).ln();
            let fitted_constant = if points.is_empty() {
                f64::NAN
            } else {
                points
                    .iter()
                    .map(|&(e, s)| s * e.powi(power) / log_term)
                    .sum::<f64>()
                    / points.len() as f64
            };
            ScalingSummary {
                method,
                delta,
                slope: fit_loglog_slope(&points).ok(),
                success_rate: cell.iter().filter(|r| r.success).count() as f64 / cell.len() as f64,
                points,
                fitted_constant,
            }
        })
        .collect()
}
