//! Finite learning problems: the joint distribution over `(x, y)`, the
//! hypothesis class, the bounded loss, and every exact expectation the rest
//! of the crate treats as ground truth.
//!
//! Points of the support are coded by their position in the support list, so
//! the basis state `|z⟩` of the data register is simply `|index⟩`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QalError, Result};
use crate::seed::substream;

/// Probabilities must sum to one within this slack before renormalization.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub x: usize,
    /// Index into the instance's `y_values`.
    pub y: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    /// `table[x]` is `f(x)`.
    pub table: Vec<f64>,
}

impl Hypothesis {
    pub fn new(id: impl Into<String>, table: Vec<f64>) -> Self {
        Hypothesis {
            id: id.into(),
            table,
        }
    }

    pub fn eval(&self, x: usize) -> f64 {
        self.table[x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    ZeroOne,
    Squared,
    /// Hypothesis id → `[x][y_index]` loss values.
    Table(IndexMap<String, Vec<Vec<f64>>>),
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::Squared => "squared",
            LossKind::Table(_) => "table",
        }
    }
}

/// A bounded, nonnegative loss `L(f, (x, y))`.
///
/// Values are `raw · scale / divisor`, where `raw` comes from `kind`. Loading
/// from JSON gives `scale = divisor = 1`; [`LossSpec::rescaled`] and
/// [`LossSpec::scaled`] adjust them without touching the underlying table.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    kind: LossKind,
    bound: f64,
    scale: f64,
    divisor: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, bound: f64) -> Self {
        LossSpec {
            kind,
            bound,
            scale: 1.0,
            divisor: 1.0,
        }
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    /// The uniform bound `C` on the loss.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `L_f(x, y)` where `y = y_value` is the label with index `y_index`.
    pub fn value(&self, f: &Hypothesis, x: usize, y_index: usize, y_value: f64) -> Result<f64> {
        let raw = match &self.kind {
            LossKind::ZeroOne => {
                if f.eval(x) != y_value {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::Squared => {
                let d = f.eval(x) - y_value;
                d * d
            }
            LossKind::Table(table) => {
                let rows = table
                    .get(&f.id)
                    .ok_or_else(|| QalError::UnknownHypothesis(f.id.clone()))?;
                *rows
                    .get(x)
                    .and_then(|row| row.get(y_index))
                    .ok_or_else(|| {
                        QalError::validation(
                            format!("loss.table.{}[{x}][{y_index}]", f.id),
                            "missing entry",
                        )
                    })?
            }
        };
        Ok(raw * self.scale / self.divisor)
    }

    /// Divides the loss by its bound `C`, returning the unit-bounded loss and `C`.
    pub fn rescaled(&self) -> Result<(LossSpec, f64)> {
        if self.bound <= 0.0 || !self.bound.is_finite() {
            return Err(QalError::invalid(
                "loss.bound",
                format!("bound must be positive and finite, got {}", self.bound),
            ));
        }
        let c = self.bound;
        let spec = LossSpec {
            kind: self.kind.clone(),
            bound: 1.0,
            scale: self.scale,
            divisor: self.divisor * c,
        };
        Ok((spec, c))
    }

    /// Multiplies every loss value and the bound by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<LossSpec> {
        if c <= 0.0 || !c.is_finite() {
            return Err(QalError::invalid(
                "c",
                format!("scale must be positive, got {c}"),
            ));
        }
        Ok(LossSpec {
            kind: self.kind.clone(),
            bound: self.bound * c,
            scale: self.scale * c,
            divisor: self.divisor,
        })
    }
}

/// `L_f(z)` for a support point of `inst`.
pub fn loss_value(
    inst: &ProblemInstance,
    loss: &LossSpec,
    f: &Hypothesis,
    z: &SupportPoint,
) -> Result<f64> {
    let y_value = *inst.y_values.get(z.y).ok_or_else(|| {
        QalError::validation("support[*].y", format!("label index {} out of range", z.y))
    })?;
    if z.x >= inst.x_size || f.table.len() != inst.x_size {
        return Err(QalError::validation(
            "support[*].x",
            "point outside the hypothesis domain",
        ));
    }
    loss.value(f, z.x, z.y, y_value)
}

/// See [`LossSpec::rescaled`].
pub fn rescale_loss(loss: &LossSpec) -> Result<(LossSpec, f64)> {
    loss.rescaled()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactStatistics {
    /// `f_ρ(x)` for every `x` with positive marginal mass.
    pub regression: BTreeMap<usize, f64>,
    pub noise_variance: f64,
    pub risks: IndexMap<String, f64>,
    pub best_id: String,
}

/// A validated finite learning problem. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    x_size: usize,
    y_values: Vec<f64>,
    k: usize,
    support: Vec<SupportPoint>,
    /// Renormalized copy of the support probabilities.
    probs: Vec<f64>,
    hypotheses: Vec<Hypothesis>,
    loss: LossSpec,
}

impl ProblemInstance {
    pub fn new(
        x_size: usize,
        y_values: Vec<f64>,
        k: usize,
        support: Vec<SupportPoint>,
        hypotheses: Vec<Hypothesis>,
        loss: LossSpec,
    ) -> Result<Self> {
        let mut inst = ProblemInstance {
            x_size,
            y_values,
            k,
            support,
            probs: Vec::new(),
            hypotheses,
            loss,
        };
        inst.validate()?;
        let total: f64 = inst.support.iter().map(|s| s.p).sum();
        inst.probs = inst.support.iter().map(|s| s.p / total).collect();
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        if self.x_size == 0 {
            return Err(QalError::validation("x_size", "must be at least 1"));
        }
        if self.y_values.is_empty() {
            return Err(QalError::validation("y_values", "must be nonempty"));
        }
        for (i, y) in self.y_values.iter().enumerate() {
            if !y.is_finite() {
                return Err(QalError::validation(
                    format!("y_values[{i}]"),
                    "must be finite",
                ));
            }
        }
        if self.support.is_empty() {
            return Err(QalError::validation("support", "must be nonempty"));
        }
        let mut seen = HashSet::new();
        for (i, s) in self.support.iter().enumerate() {
            if s.x >= self.x_size {
                return Err(QalError::validation(
                    format!("support[{i}].x"),
                    format!("{} is outside 0..{}", s.x, self.x_size),
                ));
            }
            if s.y >= self.y_values.len() {
                return Err(QalError::validation(
                    format!("support[{i}].y"),
                    format!("{} is outside 0..{}", s.y, self.y_values.len()),
                ));
            }
            if s.p < 0.0 || !s.p.is_finite() {
                return Err(QalError::validation(
                    format!("support[{i}].p"),
                    format!("probability {} is not a finite nonnegative number", s.p),
                ));
            }
            if !seen.insert((s.x, s.y)) {
                return Err(QalError::validation(
                    format!("support[{i}]"),
                    format!("duplicate point (x={}, y={})", s.x, s.y),
                ));
            }
        }
        let total: f64 = self.support.iter().map(|s| s.p).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(QalError::validation(
                "support[*].p",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        if self.k == 0 || self.k >= usize::BITS as usize || (1usize << self.k) < self.support.len()
        {
            return Err(QalError::validation(
                "k",
                format!(
                    "2^k must cover {} support points (k = {})",
                    self.support.len(),
                    self.k
                ),
            ));
        }
        if self.hypotheses.is_empty() {
            return Err(QalError::validation(
                "hypotheses",
                "hypothesis class is empty",
            ));
        }
        let mut ids = HashSet::new();
        for (i, h) in self.hypotheses.iter().enumerate() {
            if !ids.insert(h.id.as_str()) {
                return Err(QalError::validation(
                    format!("hypotheses[{i}].id"),
                    format!("duplicate id `{}`", h.id),
                ));
            }
            if h.table.len() != self.x_size {
                return Err(QalError::validation(
                    format!("hypotheses[{i}].table"),
                    format!("has {} entries, expected {}", h.table.len(), self.x_size),
                ));
            }
            if let Some(x) = h.table.iter().position(|v| !v.is_finite()) {
                return Err(QalError::validation(
                    format!("hypotheses[{i}].table[{x}]"),
                    "must be finite",
                ));
            }
        }
        let c = self.loss.bound;
        if c <= 0.0 || !c.is_finite() {
            return Err(QalError::validation(
                "loss.bound",
                format!("must be positive and finite, got {c}"),
            ));
        }
        if let LossKind::Table(table) = &self.loss.kind {
            for h in &self.hypotheses {
                if !table.contains_key(&h.id) {
                    return Err(QalError::validation(
                        format!("loss.table.{}", h.id),
                        "missing hypothesis",
                    ));
                }
            }
        }
        for (hi, h) in self.hypotheses.iter().enumerate() {
            for (i, s) in self.support.iter().enumerate() {
                let l = self.loss.value(h, s.x, s.y, self.y_values[s.y])?;
                if !(0.0..=c).contains(&l) {
                    return Err(QalError::validation(
                        format!("loss (hypotheses[{hi}], support[{i}])"),
                        format!("loss value {l} outside [0, {c}]"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| QalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }

    /// A random instance over the full grid `X × Y`, deterministic in `seed`.
    pub fn random(seed: u64, spec: &RandomSpec) -> Result<Self> {
        let RandomSpec {
            x_size,
            y_size,
            h_size,
            loss,
        } = *spec;
        if x_size == 0 || y_size == 0 || h_size == 0 {
            return Err(QalError::invalid(
                "random",
                "x_size, y_size, h_size must all be >= 1",
            ));
        }
        let mut rng = substream(seed, &[0x5eed]);
        let y_values: Vec<f64> = if y_size == 1 {
            vec![0.0]
        } else {
            (0..y_size)
                .map(|j| j as f64 / (y_size - 1) as f64)
                .collect()
        };
        let weights: Vec<f64> = (0..x_size * y_size)
            .map(|_| rng.random_range(0.05..1.0))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut support: Vec<SupportPoint> = weights
            .iter()
            .enumerate()
            .map(|(i, w)| SupportPoint {
                x: i / y_size,
                y: i % y_size,
                p: w / total,
            })
            .collect();
        // Push the rounding residue into the largest entry so the sum is 1 to
        // well within tolerance.
        let residue = 1.0 - support.iter().map(|s| s.p).sum::<f64>();
        if let Some(s) = support.iter_mut().max_by(|a, b| a.p.total_cmp(&b.p)) {
            s.p += residue;
        }
        let hypotheses = (0..h_size)
            .map(|h| {
                let table = (0..x_size)
                    .map(|_| match loss {
                        RandomLoss::ZeroOne => *y_values.choose(&mut rng).expect("nonempty"),
                        RandomLoss::Squared => rng.random_range(0.0..=1.0),
                    })
                    .collect();
                Hypothesis::new(format!("h{h}"), table)
            })
            .collect();
        let k = qubits_for(support.len());
        let loss = match loss {
            RandomLoss::ZeroOne => LossSpec::new(LossKind::ZeroOne, 1.0),
            RandomLoss::Squared => LossSpec::new(LossKind::Squared, 1.0),
        };
        ProblemInstance::new(x_size, y_values, k, support, hypotheses, loss)
    }

    /// The same problem with every loss value (and the bound) multiplied by `c`.
    pub fn with_scaled_loss(&self, c: f64) -> Result<Self> {
        let mut inst = self.clone();
        inst.loss = self.loss.scaled(c)?;
        Ok(inst)
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y_values
    }

    /// Data-register width.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn support(&self) -> &[SupportPoint] {
        &self.support
    }

    /// Support probabilities renormalized to sum to one.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn bound(&self) -> f64 {
        self.loss.bound
    }

    pub fn hypothesis_index(&self, id: &str) -> Result<usize> {
        self.hypotheses
            .iter()
            .position(|h| h.id == id)
            .ok_or_else(|| QalError::UnknownHypothesis(id.to_string()))
    }

    fn check_index(&self, h: usize) -> Result<&Hypothesis> {
        self.hypotheses
            .get(h)
            .ok_or_else(|| QalError::UnknownHypothesis(format!("#{h}")))
    }

    /// `L_f(z)` for hypothesis `h` and support point index `z`.
    pub fn loss_at(&self, h: usize, z: usize) -> Result<f64> {
        let f = self.check_index(h)?;
        loss_value(self, &self.loss, f, &self.support[z])
    }

    /// Loss values of hypothesis `h` on each support point, divided by `C`.
    pub fn unit_losses(&self, h: usize) -> Result<Vec<f64>> {
        let f = self.check_index(h)?;
        let (unit, _) = self.loss.rescaled()?;
        self.support
            .iter()
            .map(|z| loss_value(self, &unit, f, z))
            .collect()
    }

    /// `E[L_f(X, Y)] = Σ_z p_z L_f(z)`.
    pub fn exact_risk(&self, h: usize) -> Result<f64> {
        let f = self.check_index(h)?;
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(z, p)| Ok(p * loss_value(self, &self.loss, f, z)?))
            .sum()
    }

    pub fn exact_risks(&self) -> Vec<f64> {
        (0..self.hypotheses.len())
            .map(|h| self.exact_risk(h).expect("validated instance"))
            .collect()
    }

    /// Index of the risk minimizer, lowest index on ties.
    pub fn best_hypothesis(&self) -> usize {
        argmin(&self.exact_risks()).expect("validated instance has hypotheses")
    }

    /// Marginal mass `ρ_X(x)` for every `x` in the domain.
    pub fn marginal_x(&self) -> Vec<f64> {
        let mut marginal = vec![0.0; self.x_size];
        for (z, p) in self.support.iter().zip(&self.probs) {
            marginal[z.x] += p;
        }
        marginal
    }

    /// The regression function `f_ρ` and the noise variance `σ_ρ²`.
    pub fn regression_and_variance(&self) -> (BTreeMap<usize, f64>, f64) {
        let marginal = self.marginal_x();
        let mut weighted = vec![0.0; self.x_size];
        for (z, p) in self.support.iter().zip(&self.probs) {
            weighted[z.x] += p * self.y_values[z.y];
        }
        let regression: BTreeMap<usize, f64> = (0..self.x_size)
            .filter(|&x| marginal[x] > 0.0)
            .map(|x| (x, weighted[x] / marginal[x]))
            .collect();
        // Σ_x ρ_X(x) Σ_y (y − f_ρ(x))² ρ_x(y), with ρ_X(x) ρ_x(y) = p(x, y).
        let variance = self
            .support
            .iter()
            .zip(&self.probs)
            .filter(|(z, _)| marginal[z.x] > 0.0)
            .map(|(z, p)| {
                let d = self.y_values[z.y] - regression[&z.x];
                p * d * d
            })
            .sum();
        (regression, variance)
    }

    /// Both sides of the squared-risk decomposition: the risk of `h`, and
    /// `Σ_x ρ_X(x)(f(x) − f_ρ(x))² + σ_ρ²`.
    pub fn decomposition_check(&self, h: usize) -> Result<(f64, f64)> {
        if self.loss.kind != LossKind::Squared {
            return Err(QalError::invalid(
                "loss.kind",
                format!(
                    "decomposition needs squared loss, instance uses {}",
                    self.loss.kind.name()
                ),
            ));
        }
        let f = self.check_index(h)?;
        let scale = self.loss.scale / self.loss.divisor;
        let lhs = self.exact_risk(h)?;
        let (regression, variance) = self.regression_and_variance();
        let marginal = self.marginal_x();
        let approx: f64 = regression
            .iter()
            .map(|(&x, fr)| {
                let d = f.eval(x) - fr;
                marginal[x] * d * d
            })
            .sum();
        Ok((lhs, scale * (approx + variance)))
    }

    pub fn exact_statistics(&self) -> ExactStatistics {
        let (regression, noise_variance) = self.regression_and_variance();
        let risks = self.exact_risks();
        let best = argmin(&risks).expect("validated instance has hypotheses");
        ExactStatistics {
            regression,
            noise_variance,
            risks: self
                .hypotheses
                .iter()
                .map(|h| h.id.clone())
                .zip(risks)
                .collect(),
            best_id: self.hypotheses[best].id.clone(),
        }
    }
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(QalError::Empty("argmin over an empty list"));
    }
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Smallest `k >= 1` with `2^k >= n`.
pub fn qubits_for(n: usize) -> usize {
    let mut k = 1;
    while (1usize << k) < n {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomLoss {
    ZeroOne,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub x_size: usize,
    pub y_size: usize,
    pub h_size: usize,
    pub loss: RandomLoss,
}

impl RandomSpec {
    pub fn new(x_size: usize, y_size: usize, h_size: usize, loss: RandomLoss) -> Self {
        RandomSpec {
            x_size,
            y_size,
            h_size,
            loss,
        }
    }
}

// On-disk schema.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    x_size: usize,
    y_values: Vec<f64>,
    k: usize,
    support: Vec<SupportPoint>,
    hypotheses: Vec<Hypothesis>,
    loss: LossFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossFile {
    kind: String,
    bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<IndexMap<String, Vec<Vec<f64>>>>,
}

impl InstanceFile {
    fn into_instance(self) -> Result<ProblemInstance> {
        let kind = match (self.loss.kind.as_str(), self.loss.table) {
            ("zero_one", None) => LossKind::ZeroOne,
            ("squared", None) => LossKind::Squared,
            ("table", Some(t)) => LossKind::Table(t),
            ("table", None) => {
                return Err(QalError::validation(
                    "loss.table",
                    "required for kind `table`",
                ))
            }
            ("zero_one" | "squared", Some(_)) => {
                return Err(QalError::validation(
                    "loss.table",
                    "only allowed for kind `table`",
                ))
            }
            (other, _) => {
                return Err(QalError::validation(
                    "loss.kind",
                    format!("unknown kind `{other}` (expected zero_one, squared or table)"),
                ))
            }
        };
        ProblemInstance::new(
            self.x_size,
            self.y_values,
            self.k,
            self.support,
            self.hypotheses,
            LossSpec::new(kind, self.loss.bound),
        )
    }
}

impl From<&ProblemInstance> for InstanceFile {
    fn from(inst: &ProblemInstance) -> Self {
        let loss = &inst.loss;
        let unscaled = loss.scale == 1.0 && loss.divisor == 1.0;
        let (kind, table) = match &loss.kind {
            LossKind::Table(t) if unscaled => ("table", Some(t.clone())),
            k if unscaled => (k.name(), None),
            // Any in-memory scaling is baked into an explicit table.
            _ => {
                let t = inst
                    .hypotheses
                    .iter()
                    .map(|h| {
                        let rows = (0..inst.x_size)
                            .map(|x| {
                                inst.y_values
                                    .iter()
                                    .enumerate()
                                    .map(|(yi, &y)| loss.value(h, x, yi, y).unwrap_or(0.0))
                                    .collect()
                            })
                            .collect();
                        (h.id.clone(), rows)
                    })
                    .collect();
                ("table", Some(t))
            }
        };
        InstanceFile {
            x_size: inst.x_size,
            y_values: inst.y_values.clone(),
            k: inst.k,
            support: inst.support.clone(),
            hypotheses: inst.hypotheses.clone(),
            loss: LossFile {
                kind: kind.to_string(),
                bound: loss.bound,
                table,
            },
        }
    }
}

/// The four-point demo instance shipped in `instances/demo2.json`.
pub fn demo2() -> ProblemInstance {
    ProblemInstance::from_json_str(DEMO2_JSON).expect("bundled demo2 instance is valid")
}

pub const DEMO2_JSON: &str = include_str!("../../../instances/demo2.json");
