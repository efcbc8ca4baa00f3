//! Thermodynamics of Hilbert-space subsystems.
//!
//! Each eigenstate's contribution to U, S, N and Ω is split between
//! subsystems by its probability weight `P_ν(γ) = ⟨ν|π_γ|ν⟩`. Rates follow
//! from the product rule with analytic `Ṗ` (perturbation theory) and `ḟ`
//! (chain rule).

use crate::error::{Error, Result};
use crate::model::{CMatrix, Partition, Reservoir};
use crate::spectral::{self, SpectralFrame};
use crate::thermo::{fermi_rate, LevelKernels};

/// One row of values per subsystem label, one column per eigenstate.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl WeightTable {
    /// `P_ν(γ)` for every label of `partition`.
    pub fn weights(frame: &SpectralFrame, partition: &Partition) -> Self {
        let rows = partition.projectors().iter().map(|p| spectral::prob_weights(frame, p)).collect();
        WeightTable { labels: partition.labels().to_vec(), rows }
    }

    /// `Ṗ_ν(γ)` for every label of `partition`.
    pub fn rates(frame: &SpectralFrame, partition: &Partition) -> Result<Self> {
        let rows = partition.projectors().iter().map(|p| spectral::prob_rates(frame, p)).collect::<Result<Vec<_>>>()?;
        Ok(WeightTable { labels: partition.labels().to_vec(), rows })
    }

    fn check(&self, n: usize, what: &str) -> Result<()> {
        if self.rows.len() != self.labels.len() {
            return Err(Error::Validation(format!(
                "{what}: {} rows for {} labels",
                self.rows.len(),
                self.labels.len()
            )));
        }
        if let Some((l, r)) = self.labels.iter().zip(&self.rows).find(|(_, r)| r.len() != n) {
            return Err(Error::Validation(format!("{what}: label `{l}` has {} entries, expected {n}", r.len())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemState {
    pub label: String,
    pub internal_energy: f64,
    pub entropy: f64,
    pub particles: f64,
    pub grand_potential: f64,
}

/// Subsystem rates per unit path parameter. `grand_rate` is the
/// thermodynamic work rate on the subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemRates {
    pub label: String,
    pub energy_rate: f64,
    pub heat_rate: f64,
    pub particle_rate: f64,
    pub grand_rate: f64,
}

pub fn subsystem_state(frame: &SpectralFrame, weights: &WeightTable, res: &Reservoir) -> Result<Vec<SubsystemState>> {
    weights.check(frame.dim(), "probability weights")?;
    let levels: Vec<LevelKernels> = frame.energies.iter().map(|&e| LevelKernels::new(e, res)).collect();
    Ok(weights
        .labels
        .iter()
        .zip(&weights.rows)
        .map(|(label, p)| {
            let mut st = SubsystemState {
                label: label.clone(),
                internal_energy: 0.0,
                entropy: 0.0,
                particles: 0.0,
                grand_potential: 0.0,
            };
            for (w, k) in p.iter().zip(&levels) {
                st.internal_energy += w * k.occupation * k.energy;
                st.entropy += w * k.entropy;
                st.particles += w * k.occupation;
                st.grand_potential += w * k.grand;
            }
            st
        })
        .collect())
}

pub fn subsystem_rates(
    frame: &SpectralFrame,
    weights: &WeightTable,
    rates: &WeightTable,
    res: &Reservoir,
) -> Result<Vec<SubsystemRates>> {
    let n = frame.dim();
    weights.check(n, "probability weights")?;
    rates.check(n, "probability rates")?;
    if weights.labels != rates.labels {
        return Err(Error::Validation("weight and rate tables have different labels".into()));
    }
    let t = res.temperature();
    let mu = res.mu();
    let levels: Vec<LevelKernels> = frame.energies.iter().map(|&e| LevelKernels::new(e, res)).collect();
    let fdot: Vec<f64> =
        frame.energies.iter().zip(&frame.energy_rates).map(|(&e, &ed)| fermi_rate(e, ed, res)).collect();

    Ok(weights
        .labels
        .iter()
        .zip(weights.rows.iter().zip(&rates.rows))
        .map(|(label, (p, pd))| {
            let mut r = SubsystemRates {
                label: label.clone(),
                energy_rate: 0.0,
                heat_rate: 0.0,
                particle_rate: 0.0,
                grand_rate: 0.0,
            };
            for nu in 0..n {
                let k = &levels[nu];
                let (e, f, ed, fd) = (k.energy, k.occupation, frame.energy_rates[nu], fdot[nu]);
                r.grand_rate += pd[nu] * k.grand + p[nu] * f * ed;
                r.heat_rate += t * pd[nu] * k.entropy + p[nu] * (e - mu) * fd;
                r.particle_rate += pd[nu] * f + p[nu] * fd;
                r.energy_rate += pd[nu] * f * e + p[nu] * (fd * e + f * ed);
            }
            r
        })
        .collect())
}

/// `U̇_γ − TṠ_γ − μṄ_γ − Ω̇_γ`; zero up to round-off for consistent rates.
pub fn first_law_residual(rates: &SubsystemRates, res: &Reservoir) -> f64 {
    rates.energy_rate - rates.heat_rate - res.mu() * rates.particle_rate - rates.grand_rate
}

/// Gaussian-broadened local density of states
/// `g_γ(ε) = Σ_ν P_ν(γ) G_σ(ε − ε_ν)` sampled on `grid`.
pub fn ldos(frame: &SpectralFrame, projector: &CMatrix, grid: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Validation(format!("LDOS broadening must be positive, got {sigma}")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Validation("LDOS energy grid must be sorted".into()));
    }
    let weights = spectral::prob_weights(frame, projector);
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&e| {
            weights
                .iter()
                .zip(&frame.energies)
                .map(|(w, &ev)| {
                    let z = (e - ev) / sigma;
                    w * norm * (-0.5 * z * z).exp()
                })
                .sum()
        })
        .collect())
}

/// Default LDOS broadening, a quarter of the temperature.
pub fn default_broadening(res: &Reservoir) -> f64 {
    res.temperature() / 4.0
}
