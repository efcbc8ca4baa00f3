//! Partitioned power, nonlocal work and the work sum rule.
//!
//! For every subsystem γ the thermodynamic work rate splits as
//! `Ẇ_γ = ⟨Ḣ|_γ⟩ + I^W_γ`. Both pieces share the off-diagonal
//! "generation" sum `Σ_{μ≠ν} (f_ν+f_μ)/2 M_{νμ} ⟨μ|π_γ|ν⟩`, which is
//! computed once per subsystem and used with opposite signs, so the
//! decomposition holds to round-off by construction.

use crate::error::{Error, Result};
use crate::model::{CMatrix, Partition, Reservoir, C64};
use crate::spectral::{self, max_abs, SpectralFrame};
use crate::thermo::{fermi, grand_kernel};

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemWork {
    pub label: String,
    /// Ẇ_γ = Ω̇_γ.
    pub work_rate: f64,
    /// ⟨Ḣ|_γ⟩.
    pub power: f64,
    /// I^W_γ.
    pub nonlocal_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkRecord {
    pub s: f64,
    pub subsystems: Vec<SubsystemWork>,
    pub external_power: f64,
    /// `W_ext_rate − Σ_γ Ẇ_γ`.
    pub sum_rule_residual: f64,
    /// `‖h‖_max` at this point; sets the floor below which η is undefined.
    pub h_norm: f64,
}

impl WorkRecord {
    pub fn get(&self, label: &str) -> Option<&SubsystemWork> {
        self.subsystems.iter().find(|w| w.label == label)
    }

    /// `Σ_γ I^W_γ`.
    pub fn nonlocal_total(&self) -> f64 {
        self.subsystems.iter().map(|w| w.nonlocal_rate).sum()
    }
}

struct Pieces {
    /// Σ_ν P_ν f_ν ε̇_ν
    diagonal: f64,
    /// Σ_{μ≠ν} (f_ν+f_μ)/2 M_{νμ} ⟨μ|π|ν⟩ (real part)
    generation: f64,
    /// Σ_ν Ṗ_ν ω_ν
    flow: f64,
    magnitude: f64,
}

fn occupations(frame: &SpectralFrame, res: &Reservoir) -> Vec<f64> {
    frame.energies.iter().map(|&e| fermi(e, res)).collect()
}

fn generation_term(frame: &SpectralFrame, pm: &CMatrix, occ: &[f64]) -> Result<(f64, f64)> {
    let n = frame.dim();
    let mut sum = C64::new(0.0, 0.0);
    let mut mag: f64 = 0.0;
    for nu in 0..n {
        for mu in 0..n {
            if mu != nu {
                let z = frame.drive[(nu, mu)] * pm[(mu, nu)] * (0.5 * (occ[nu] + occ[mu]));
                mag += z.norm();
                sum += z;
            }
        }
    }
    let scale = mag.max(1.0);
    if sum.im.abs() > 1e-12 * scale {
        return Err(Error::Consistency(format!(
            "partitioned power has imaginary part {:e} at s = {}",
            sum.im, frame.s
        )));
    }
    Ok((sum.re, mag))
}

fn diagonal_term(frame: &SpectralFrame, weights: &[f64], occ: &[f64]) -> f64 {
    (0..frame.dim()).map(|nu| weights[nu] * occ[nu] * frame.energy_rates[nu]).sum()
}

fn flow_term(frame: &SpectralFrame, rates: &[f64], res: &Reservoir) -> f64 {
    frame.energies.iter().zip(rates).map(|(&e, pd)| pd * grand_kernel(e, res)).sum()
}

fn pieces(frame: &SpectralFrame, projector: &CMatrix, res: &Reservoir) -> Result<Pieces> {
    let pm = frame.project(projector);
    let occ = occupations(frame, res);
    let weights = spectral::weights_from_projected(&pm);
    let rates = spectral::rates_from_projected(frame, &pm)?;
    let diagonal = diagonal_term(frame, &weights, &occ);
    let (generation, gmag) = generation_term(frame, &pm, &occ)?;
    let flow = flow_term(frame, &rates, res);
    let magnitude = diagonal.abs().max(gmag).max(flow.abs());
    Ok(Pieces { diagonal, generation, flow, magnitude })
}

/// Expectation value of the partitioned power operator `⟨Ḣ|_γ⟩`.
pub fn partitioned_power(frame: &SpectralFrame, projector: &CMatrix, res: &Reservoir) -> Result<f64> {
    let pm = frame.project(projector);
    let occ = occupations(frame, res);
    let weights = spectral::weights_from_projected(&pm);
    let (generation, _) = generation_term(frame, &pm, &occ)?;
    Ok(diagonal_term(frame, &weights, &occ) + generation)
}

/// Rate of nonlocal work `I^W_γ = Σ Ṗ_ν ω_ν − generation term`.
pub fn nonlocal_work_rate(
    frame: &SpectralFrame,
    weights: &[f64],
    rates: &[f64],
    projector: &CMatrix,
    res: &Reservoir,
) -> Result<f64> {
    if rates.len() != frame.dim() || weights.len() != frame.dim() {
        return Err(Error::Validation(format!(
            "{} weights and {} rates for {} levels",
            weights.len(),
            rates.len(),
            frame.dim()
        )));
    }
    let pm = frame.project(projector);
    let occ = occupations(frame, res);
    let (generation, _) = generation_term(frame, &pm, &occ)?;
    Ok(flow_term(frame, rates, res) - generation)
}

/// Per-subsystem work decomposition with the sum rule and conservation of
/// nonlocal work checked to `1e-11 · scale`.
pub fn work_record(frame: &SpectralFrame, partition: &Partition, res: &Reservoir) -> Result<WorkRecord> {
    if partition.dim() != frame.dim() {
        return Err(Error::Validation(format!(
            "partition covers {} sites but the frame has {} levels",
            partition.dim(),
            frame.dim()
        )));
    }
    let external_power: f64 = occupations(frame, res).iter().zip(&frame.energy_rates).map(|(f, ed)| f * ed).sum();
    let mut scale = external_power.abs().max(1.0);
    let mut subsystems = Vec::with_capacity(partition.labels().len());
    for (label, proj) in partition.labels().iter().zip(partition.projectors()) {
        let p = pieces(frame, &proj, res)?;
        scale = scale.max(p.magnitude);
        subsystems.push(SubsystemWork {
            label: label.clone(),
            work_rate: p.flow + p.diagonal,
            power: p.diagonal + p.generation,
            nonlocal_rate: p.flow - p.generation,
        });
    }
    let tol = 1e-11 * scale;
    for w in &subsystems {
        let split = w.work_rate - w.power - w.nonlocal_rate;
        if split.abs() > tol {
            return Err(Error::Consistency(format!(
                "subsystem `{}` at s = {}: W_rate {} != power {} + nonlocal {}",
                w.label, frame.s, w.work_rate, w.power, w.nonlocal_rate
            )));
        }
    }
    let nonlocal: f64 = subsystems.iter().map(|w| w.nonlocal_rate).sum();
    if nonlocal.abs() > tol {
        return Err(Error::Consistency(format!("nonlocal work not conserved at s = {}: sum {nonlocal:e}", frame.s)));
    }
    let sum_rule_residual = external_power - subsystems.iter().map(|w| w.work_rate).sum::<f64>();
    if sum_rule_residual.abs() > tol {
        return Err(Error::Consistency(format!(
            "work sum rule violated at s = {}: residual {sum_rule_residual:e}",
            frame.s
        )));
    }
    Ok(WorkRecord { s: frame.s, subsystems, external_power, sum_rule_residual, h_norm: max_abs(&frame.hamiltonian) })
}

/// `η = Ẇ_γ / Ẇ_ext`, or `None` when `|Ẇ_ext| ≤ 1e-12 ‖h‖`.
pub fn mechanical_advantage(record: &WorkRecord, drive_label: &str) -> Result<Option<f64>> {
    let w = record.get(drive_label).ok_or_else(|| Error::Config(format!("unknown subsystem label `{drive_label}`")))?;
    if record.external_power.abs() <= 1e-12 * record.h_norm || record.external_power == 0.0 {
        return Ok(None);
    }
    Ok(Some(w.work_rate / record.external_power))
}

/// `|Σ_ν f_ν ⟨ν|[h, h|_γ]|ν⟩|` with `h|_γ = ½{π_γ, h}`. Vanishes in
/// equilibrium; evaluated in the site basis so the cancellation is not
/// built in.
pub fn commutator_flow(frame: &SpectralFrame, partition: &Partition, gamma: &str, res: &Reservoir) -> Result<f64> {
    let proj = partition.projector(gamma)?;
    let h = &frame.hamiltonian;
    let h_part = (&proj * h + h * &proj) * C64::new(0.5, 0.0);
    let comm = h * &h_part - &h_part * h;
    let occ = occupations(frame, res);
    let mut total = C64::new(0.0, 0.0);
    for (nu, f) in occ.iter().enumerate() {
        let v = frame.vectors.column(nu);
        total += v.dotc(&(&comm * v)) * *f;
    }
    Ok(total.norm())
}

/// Low-temperature, weak-coupling estimate for the two-level lever,
/// `η ≈ 2(μ − ε₂)/(ε₁ − ε₂)`.
pub fn perturbative_eta(e1: f64, e2: f64, mu: f64) -> Result<f64> {
    let delta = e1 - e2;
    if delta == 0.0 {
        return Err(Error::Validation("perturbative eta needs e1 != e2".into()));
    }
    Ok(2.0 * (mu - e2) / delta)
}

/// Multi-level version: `η ≈ (−2/Δ)(⟨ε_far⟩ − μ)` where `⟨ε_far⟩` is the
/// mean energy of the occupied manifold localised away from the driven
/// subsystem and `Δ` the offset of the driven levels from it.
pub fn perturbative_eta_multi(mean_far: f64, delta: f64, mu: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::Validation("perturbative eta needs a nonzero level offset".into()));
    }
    Ok(-2.0 / delta * (mean_far - mu))
}
