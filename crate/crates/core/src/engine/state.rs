//! Exact complex statevector simulation of the estimation circuit.
//!
//! Qubit order, least significant first: data register (the `k` bits of `z`,
//! then the optional garbage qubit), loss ancilla, phase register. A full
//! index is therefore `c · D + w` with `c` the phase-register value and `w`
//! an index of the `D = 2^(n+1)` dimensional work register.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;

use super::{measure, AEOutcome, EngineConfig, Fault, QubitLayout, QueryLedger};
use crate::error::{QalError, Result};
use crate::problem::ProblemInstance;
use crate::seed::TrialRng;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(QalError::invalid(
                "amplitudes",
                "length must be a power of two",
            ));
        }
        let qubits = amps.len().trailing_zeros() as usize;
        Ok(StateVector { qubits, amps })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        inner(&self.amps, &other.amps)
    }
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// `⟨u|v⟩`.
fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// `A|0^n⟩ = Σ_z √p_z |ψ_z⟩|z⟩`.
///
/// Without `garbage`, the state lives on `k` qubits with real nonnegative
/// amplitudes. With `garbage`, one extra qubit carries a random normalized
/// state `|ψ_z⟩` chosen per `z`.
pub fn prepare_a<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    garbage: Option<&mut R>,
) -> Result<StateVector> {
    let k = inst.k();
    let probs = inst.probabilities();
    if probs.len() > 1 << k {
        return Err(QalError::validation(
            "k",
            format!(
                "2^{k} basis states cannot hold {} support points",
                probs.len()
            ),
        ));
    }
    match garbage {
        None => {
            let mut amps = vec![ZERO; 1 << k];
            for (z, p) in probs.iter().enumerate() {
                amps[z] = Complex64::new(p.sqrt(), 0.0);
            }
            Ok(StateVector { qubits: k, amps })
        }
        Some(rng) => {
            let mut amps = vec![ZERO; 1 << (k + 1)];
            for (z, p) in probs.iter().enumerate() {
                let polar: f64 = rng.random_range(0.0..PI);
                let phase: f64 = rng.random_range(0.0..2.0 * PI);
                let r = p.sqrt();
                amps[z] = Complex64::new(r * (polar / 2.0).cos(), 0.0);
                amps[z | (1 << k)] = Complex64::from_polar(r * (polar / 2.0).sin(), phase);
            }
            Ok(StateVector {
                qubits: k + 1,
                amps,
            })
        }
    }
}

/// Appends the loss ancilla in `|0⟩` and rotates it per basis state:
/// `|z⟩|0⟩ ↦ |z⟩(√(1−L̄(z))|0⟩ + √L̄(z)|1⟩)`.
///
/// `unit_losses[z]` is the unit-bounded loss of support point `z`. Only the
/// low `z_bits` bits of a data index select `z`; higher data bits (garbage)
/// are spectators. Indices beyond the support carry no amplitude and are
/// left alone.
pub fn apply_w(state: StateVector, z_bits: usize, unit_losses: &[f64]) -> Result<StateVector> {
    if let Some((z, l)) = unit_losses
        .iter()
        .enumerate()
        .find(|(_, l)| !(0.0..=1.0).contains(*l))
    {
        return Err(QalError::Contract(format!(
            "unit loss {l} at z = {z} is outside [0, 1]"
        )));
    }
    let dim = state.amps.len();
    let z_mask = (1usize << z_bits) - 1;
    let mut out = vec![ZERO; 2 * dim];
    for (i, &amp) in state.amps.iter().enumerate() {
        let l = unit_losses.get(i & z_mask).copied().unwrap_or(0.0);
        out[i] = amp * (1.0 - l).sqrt();
        out[i | dim] = amp * l.sqrt();
    }
    Ok(StateVector {
        qubits: state.qubits + 1,
        amps: out,
    })
}

/// `|ψ⟩ = (I⊗W)(A⊗I)|0^(n+1)⟩` for hypothesis `h`.
pub fn build_psi<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    h: usize,
    garbage: Option<&mut R>,
) -> Result<StateVector> {
    let losses = inst.unit_losses(h)?;
    let a = prepare_a(inst, garbage)?;
    apply_w(a, inst.k(), &losses)
}

/// [`build_psi`] without a garbage register.
pub fn psi_for(inst: &ProblemInstance, h: usize) -> Result<StateVector> {
    build_psi(inst, h, None::<&mut TrialRng>)
}

/// `a = ⟨ψ|P|ψ⟩`, the mass on basis states whose loss ancilla (top qubit) is 1.
pub fn amplitude_a(psi: &StateVector) -> f64 {
    let half = psi.amps.len() / 2;
    norm_sqr(&psi.amps[half..])
}

/// `U = 2|ψ⟩⟨ψ| − I`.
fn reflect_about(psi: &[Complex64], v: &mut [Complex64]) {
    let overlap = inner(psi, v) * 2.0;
    for (x, p) in v.iter_mut().zip(psi) {
        *x = p * overlap - *x;
    }
}

/// `V = I − 2P`: negate the half of the work register with the ancilla set.
fn flip_marked(v: &mut [Complex64], fault: Fault) {
    let half = v.len() / 2;
    let marked = match fault {
        Fault::None => half..v.len(),
        Fault::FlipV => 0..half,
    };
    for x in &mut v[marked] {
        *x = -*x;
    }
}

/// One Grover iterate `Q = U·V`.
fn grover(psi: &[Complex64], v: &mut [Complex64], fault: Fault) {
    flip_marked(v, fault);
    reflect_about(psi, v);
}

fn hadamard(amps: &mut [Complex64], qubit: usize) {
    let stride = 1 << qubit;
    for base in (0..amps.len()).step_by(2 * stride) {
        for i in base..base + stride {
            let (a, b) = (amps[i], amps[i + stride]);
            amps[i] = (a + b) * FRAC_1_SQRT_2;
            amps[i + stride] = (a - b) * FRAC_1_SQRT_2;
        }
    }
}

/// Diagonal phase `e^{iθ}` on basis states with both qubits set.
fn controlled_phase(amps: &mut [Complex64], q1: usize, q2: usize, theta: f64) {
    let mask = (1 << q1) | (1 << q2);
    let phase = Complex64::from_polar(1.0, theta);
    for (i, x) in amps.iter_mut().enumerate() {
        if i & mask == mask {
            *x *= phase;
        }
    }
}

fn swap_qubits(amps: &mut [Complex64], q1: usize, q2: usize) {
    let (b1, b2) = (1 << q1, 1 << q2);
    for i in 0..amps.len() {
        // visit each pair once, from the side with q1 set and q2 clear
        if i & b1 != 0 && i & b2 == 0 {
            amps.swap(i, i ^ b1 ^ b2);
        }
    }
}

/// Inverse QFT on `m` qubits starting at `offset`, least significant first,
/// mapping `T^{-1/2} Σ_c e^{2πi c y/T}|c⟩` to `|y⟩`.
///
/// Qubit `j` enters holding the fractional phase `0.φ_{j+1}…φ_m`. Decoding
/// runs from the top qubit down: bits already read on higher qubits cancel
/// their share of the phase, a Hadamard reads `φ_{j+1}`, and a final bit
/// reversal puts `y` in natural order.
fn inverse_qft(amps: &mut [Complex64], offset: usize, m: usize) {
    for j in (0..m).rev() {
        for l in j + 1..m {
            let theta = -2.0 * PI / (1u64 << (l - j + 1)) as f64;
            controlled_phase(amps, offset + l, offset + j, theta);
        }
        hadamard(amps, offset + j);
    }
    for j in 0..m / 2 {
        swap_qubits(amps, offset + j, offset + m - 1 - j);
    }
}

/// Result of simulating one amplitude-estimation circuit up to measurement.
#[derive(Debug, Clone)]
pub struct QpeSimulation {
    pub layout: QubitLayout,
    /// Pre-measurement distribution of the phase register.
    pub probs: Vec<f64>,
    pub ledger: QueryLedger,
    /// Largest `|‖state‖ − 1|` observed after any unitary step.
    pub max_norm_drift: f64,
}

/// Runs phase estimation of the Grover iterate on `|ψ⟩` with `m` ancillas.
pub fn simulate_qpe(psi: &StateVector, m: usize, cfg: &EngineConfig) -> Result<QpeSimulation> {
    if psi.qubits < 2 {
        return Err(QalError::invalid(
            "psi",
            "needs a data qubit and the loss ancilla",
        ));
    }
    let layout = QubitLayout::new(psi.qubits - 1, m);
    layout.check(cfg.qubit_cap)?;
    let work = psi.amps.len();
    let t = 1usize << m;
    let offset = psi.qubits;

    let mut ledger = QueryLedger::default();
    let mut drift: f64 = (psi.norm() - 1.0).abs();
    let mut amps = vec![ZERO; work * t];
    amps[..work].copy_from_slice(&psi.amps);
    ledger.record_preparation();

    let mut track = |amps: &[Complex64]| drift = drift.max((norm_sqr(amps).sqrt() - 1.0).abs());

    for j in 0..m {
        hadamard(&mut amps, offset + j);
        track(&amps);
    }
    for j in 0..m {
        let power = 1usize << j;
        for (c, block) in amps.chunks_mut(work).enumerate() {
            if c & power != 0 {
                for _ in 0..power {
                    grover(&psi.amps, block, cfg.fault);
                }
            }
        }
        ledger.record_reflections(power as u64);
        track(&amps);
    }
    inverse_qft(&mut amps, offset, m);
    track(&amps);

    let probs = amps.chunks(work).map(norm_sqr).collect();
    Ok(QpeSimulation {
        layout,
        probs,
        ledger,
        max_norm_drift: drift,
    })
}

/// Exact outcome distribution of the phase register for hypothesis `h`.
pub fn qpe_ae_distribution(
    inst: &ProblemInstance,
    h: usize,
    m: usize,
    cfg: &EngineConfig,
) -> Result<Vec<f64>> {
    let psi = psi_for(inst, h)?;
    Ok(simulate_qpe(&psi, m, cfg)?.probs)
}

/// One full-circuit amplitude-estimation run, measured with one uniform draw.
pub fn qpe_ae_run<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    h: usize,
    m: usize,
    cfg: &EngineConfig,
    rng: &mut R,
) -> Result<AEOutcome> {
    let psi = build_psi::<R>(inst, h, None)?;
    let sim = simulate_qpe(&psi, m, cfg)?;
    let mut outcome = measure(&sim.probs, m, rng);
    outcome.ledger = sim.ledger;
    Ok(outcome)
}
