//! Grand-canonical single-level kernels and whole-system quantities.
//!
//! All kernels are written in terms of `x = β(ε − μ)` and only ever
//! exponentiate `−|x|`, so they stay finite at `T = 1e-4` and below.

use crate::error::{Error, Result};
use crate::model::Reservoir;
use crate::spectral::SpectralFrame;

fn reduced(e: f64, res: &Reservoir) -> f64 {
    (e - res.mu()) * res.beta()
}

/// `ln(1 + e^{-x})`.
fn softplus_neg(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Fermi-Dirac occupation `1 / (1 + e^{β(ε−μ)})`.
pub fn fermi(e: f64, res: &Reservoir) -> f64 {
    let x = reduced(e, res);
    if x >= 0.0 {
        let g = (-x).exp();
        g / (1.0 + g)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Entropy of one level, `−f ln f − (1−f) ln(1−f)`, evaluated as
/// `|x| g/(1+g) + ln(1+g)` with `g = e^{−|x|}`.
pub fn entropy_kernel(e: f64, res: &Reservoir) -> f64 {
    let a = reduced(e, res).abs();
    let g = (-a).exp();
    a * g / (1.0 + g) + g.ln_1p()
}

/// Grand potential of one level, `−T ln(1 + e^{−β(ε−μ)})`.
pub fn grand_kernel(e: f64, res: &Reservoir) -> f64 {
    -res.temperature() * softplus_neg(reduced(e, res))
}

/// `f(1 − f)`, without cancellation in either tail.
pub fn fermi_variance(e: f64, res: &Reservoir) -> f64 {
    let g = (-reduced(e, res).abs()).exp();
    g / ((1.0 + g) * (1.0 + g))
}

/// `ḟ = −β f (1 − f) ε̇`.
pub fn fermi_rate(e: f64, e_rate: f64, res: &Reservoir) -> f64 {
    -res.beta() * fermi_variance(e, res) * e_rate
}

/// Kernel values of a single level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelKernels {
    pub energy: f64,
    pub occupation: f64,
    pub entropy: f64,
    pub grand: f64,
}

impl LevelKernels {
    pub fn new(e: f64, res: &Reservoir) -> Self {
        LevelKernels {
            energy: e,
            occupation: fermi(e, res),
            entropy: entropy_kernel(e, res),
            grand: grand_kernel(e, res),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GlobalState {
    pub internal_energy: f64,
    pub entropy: f64,
    pub particles: f64,
    pub grand_potential: f64,
}

/// Rates per unit path parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GlobalRates {
    pub external_power: f64,
    pub grand_rate: f64,
    pub energy_rate: f64,
    /// Reversible heat rate `T dS/ds`.
    pub heat_rate: f64,
    pub particle_rate: f64,
}

impl GlobalRates {
    /// `U̇ − TṠ − μṄ − Ω̇`.
    pub fn identity_residual(&self, res: &Reservoir) -> f64 {
        self.energy_rate - self.heat_rate - res.mu() * self.particle_rate - self.grand_rate
    }
}

/// U, S, N and Ω of independent fermions occupying `energies`.
pub fn global_state(energies: &[f64], res: &Reservoir) -> Result<GlobalState> {
    let mut st = GlobalState::default();
    for &e in energies {
        if !e.is_finite() {
            return Err(Error::Validation(format!("non-finite level energy {e}")));
        }
        let k = LevelKernels::new(e, res);
        st.internal_energy += k.occupation * e;
        st.entropy += k.entropy;
        st.particles += k.occupation;
        st.grand_potential += k.grand;
    }
    let t = res.temperature();
    let rhs = st.internal_energy - t * st.entropy - res.mu() * st.particles;
    let scale = 1f64.max(st.internal_energy.abs()).max((res.mu() * st.particles).abs());
    if (st.grand_potential - rhs).abs() > 1e-10 * scale {
        return Err(Error::Consistency(format!("Omega = {} but U - TS - mu N = {rhs}", st.grand_potential)));
    }
    Ok(st)
}

/// Global rates in the quasi-static limit. `ḟ` comes from the chain rule.
pub fn global_rates(frame: &SpectralFrame, res: &Reservoir) -> GlobalRates {
    let mu = res.mu();
    let mut r = GlobalRates::default();
    for (&e, &ed) in frame.energies.iter().zip(&frame.energy_rates) {
        let f = fermi(e, res);
        let fd = fermi_rate(e, ed, res);
        r.external_power += f * ed;
        r.energy_rate += f * ed + e * fd;
        r.heat_rate += (e - mu) * fd;
        r.particle_rate += fd;
    }
    r.grand_rate = r.external_power;
    r
}
