//! Independent checks: exact diagonalisation in Fock space and the
//! closed-form two-level solution.
//!
//! Many-body operators act on occupation-number states stored as bit masks,
//! bit `i` being site `i`. Jordan-Wigner signs count the occupied modes with
//! a lower index than the one acted on. The grand density is built from
//! nalgebra's Hermitian eigensolver, not the in-crate Jacobi routine, so the
//! two paths share no diagonalisation code.

use nalgebra::linalg::SymmetricEigen;

use crate::error::{Error, Result};
use crate::model::{CMatrix, Reservoir, C64};

pub const MAX_MODES: usize = 12;

/// `c_j |state⟩`: the sign and the resulting state, or `None` if mode `j` is empty.
pub fn annihilate(j: usize, state: u64) -> Option<(f64, u64)> {
    if state & (1 << j) == 0 {
        return None;
    }
    Some((parity_below(j, state), state & !(1 << j)))
}

/// `c_j† |state⟩`, or `None` if mode `j` is already occupied.
pub fn create(j: usize, state: u64) -> Option<(f64, u64)> {
    if state & (1 << j) != 0 {
        return None;
    }
    Some((parity_below(j, state), state | (1 << j)))
}

fn parity_below(j: usize, state: u64) -> f64 {
    if (state & ((1u64 << j) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `Σ_ij o_ij c_i† c_j` on the full `2^n` Fock space.
pub fn second_quantize(o: &CMatrix) -> Result<CMatrix> {
    let n = o.nrows();
    if o.ncols() != n {
        return Err(Error::Validation("one-body operator must be square".into()));
    }
    if n > MAX_MODES {
        return Err(Error::Capacity(format!("{n} modes exceeds the Fock-space cap of {MAX_MODES}")));
    }
    let dim = 1usize << n;
    let mut out = CMatrix::zeros(dim, dim);
    for m in 0..dim as u64 {
        for j in 0..n {
            let Some((s1, m1)) = annihilate(j, m) else { continue };
            for i in 0..n {
                let amp = o[(i, j)];
                if amp == C64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((s2, m2)) = create(i, m1) {
                    out[(m2 as usize, m as usize)] += amp * (s1 * s2);
                }
            }
        }
    }
    Ok(out)
}

/// `½{π, o}`: the part of a one-body operator assigned to subsystem π.
pub fn partition_operator(o: &CMatrix, projector: &CMatrix) -> CMatrix {
    (projector * o + o * projector) * C64::new(0.5, 0.0)
}

#[derive(Debug, Clone)]
pub struct FockSystem {
    pub n_modes: usize,
    pub hamiltonian: CMatrix,
    /// Diagonal of the total number operator.
    pub number: Vec<f64>,
}

impl FockSystem {
    pub fn dim(&self) -> usize {
        self.number.len()
    }

    pub fn number_operator(&self) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.number.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    /// Eigenvalues of the Hamiltonian restricted to the `k`-particle sector.
    pub fn sector_energies(&self, k: u32) -> Vec<f64> {
        let idx: Vec<usize> = (0..self.dim()).filter(|&m| (m as u64).count_ones() == k).collect();
        let block = CMatrix::from_fn(idx.len(), idx.len(), |a, b| self.hamiltonian[(idx[a], idx[b])]);
        let mut e: Vec<f64> = SymmetricEigen::new(block).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

pub fn fock_build(h: &CMatrix) -> Result<FockSystem> {
    let hamiltonian = second_quantize(h)?;
    let n = h.nrows();
    let number = (0..1u64 << n).map(|m| m.count_ones() as f64).collect();
    Ok(FockSystem { n_modes: n, hamiltonian, number })
}

/// `ρ = e^{−β(H − μN)} / Z`.
#[derive(Debug, Clone)]
pub struct GrandDensity {
    pub rho: CMatrix,
    /// Eigenvalues of ρ (Boltzmann weights of the eigenstates of H − μN).
    pub populations: Vec<f64>,
    pub ln_z: f64,
    pub temperature: f64,
}

impl GrandDensity {
    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.populations.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `−tr ρ ln ρ`.
    pub fn von_neumann_entropy(&self) -> f64 {
        self.populations.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
    }

    /// `Ω = −T ln Z`.
    pub fn grand_potential(&self) -> f64 {
        -self.temperature * self.ln_z
    }
}

pub fn grand_density(sys: &FockSystem, res: &Reservoir) -> GrandDensity {
    let k = &sys.hamiltonian - sys.number_operator() * C64::new(res.mu(), 0.0);
    let eig = SymmetricEigen::new(k);
    let beta = res.beta();
    let exponents: Vec<f64> = eig.eigenvalues.iter().map(|&l| -beta * l).collect();
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|&a| (a - top).exp()).collect();
    let z: f64 = weights.iter().sum();
    let populations: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        populations.len(),
        populations.iter().map(|&p| C64::new(p, 0.0)),
    ));
    let rho = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
    GrandDensity { rho, populations, ln_z: top + z.ln(), temperature: res.temperature() }
}

/// `tr(ρ O)` for a Fock-space operator.
pub fn fock_expect(rho: &GrandDensity, op: &CMatrix) -> Result<f64> {
    if op.nrows() != rho.rho.nrows() || op.ncols() != rho.rho.ncols() {
        return Err(Error::Validation(format!(
            "operator is {}x{} but the density matrix is {}x{}",
            op.nrows(),
            op.ncols(),
            rho.rho.nrows(),
            rho.rho.ncols()
        )));
    }
    Ok((&rho.rho * op).trace().re)
}

/// Global (U, S, N, Ω) from the Fock-space density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockGlobals {
    pub internal_energy: f64,
    pub entropy: f64,
    pub particles: f64,
    pub grand_potential: f64,
}

pub fn fock_globals(sys: &FockSystem, rho: &GrandDensity) -> Result<FockGlobals> {
    Ok(FockGlobals {
        internal_energy: fock_expect(rho, &sys.hamiltonian)?,
        entropy: rho.von_neumann_entropy(),
        particles: fock_expect(rho, &sys.number_operator())?,
        grand_potential: rho.grand_potential(),
    })
}

/// Partitioned `(U_γ, N_γ)` via `tr(ρ Ô|_γ)` with `o ∈ {h, 1}`.
pub fn fock_partitioned(h: &CMatrix, projector: &CMatrix, rho: &GrandDensity) -> Result<(f64, f64)> {
    let n = h.nrows();
    let u = fock_expect(rho, &second_quantize(&partition_operator(h, projector))?)?;
    let id = CMatrix::identity(n, n);
    let num = fock_expect(rho, &second_quantize(&partition_operator(&id, projector))?)?;
    Ok((u, num))
}

/// Closed-form two-level spectrum and site-1 weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevel {
    pub e_minus: f64,
    pub e_plus: f64,
    pub p_minus: f64,
    pub p_plus: f64,
}

/// `ε_± = (ε₁+ε₂)/2 ± √((Δ/2)² + w²)` and
/// `P_±(1) = 1 − 4w²/((Δ ± √(Δ²+4w²))² + 4w²) = a²/(a² + 4w²)` with
/// `a = Δ ± √(Δ²+4w²)`. The branch where `a` cancels is evaluated through
/// `(Δ + r)(r − Δ) = 4w²`.
pub fn two_level_closed_form(e1: f64, e2: f64, w: f64) -> TwoLevel {
    let delta = e1 - e2;
    let mean = 0.5 * (e1 + e2);
    let half = (0.25 * delta * delta + w * w).sqrt();
    let r = 2.0 * half;
    let w2 = 4.0 * w * w;
    // The branch whose `a` has the sign of Δ has no cancellation; the other
    // is `−4w²/a`, giving weight 4w²/(a² + 4w²).
    let a = if delta >= 0.0 { delta + r } else { delta - r };
    let d = a * a + w2;
    let (big, small) = if d == 0.0 { (0.5, 0.5) } else { (a * a / d, w2 / d) };
    let (p_plus, p_minus) = if delta >= 0.0 { (big, small) } else { (small, big) };
    TwoLevel { e_minus: mean - half, e_plus: mean + half, p_minus, p_plus }
}
