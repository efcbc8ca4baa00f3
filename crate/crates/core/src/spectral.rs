//! Instantaneous eigenframes of the single-particle Hamiltonian.
//!
//! The eigensolver is a cyclic complex Jacobi iteration: each rotation first
//! removes the phase of the pivot `a_pq`, then applies the real symmetric
//! Jacobi rotation. Sweep order is fixed, so identical input gives
//! bit-identical output.

use crate::error::{Error, Result};
use crate::model::{CMatrix, C64};

/// Largest matrix accepted by [`eigh`].
pub const DEFAULT_DIM_CAP: usize = 64;
const MAX_SWEEPS: usize = 100;
/// Overlap magnitude below which gauge tracking reports a warning.
pub const TRACKING_OVERLAP_MIN: f64 = 0.1;

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_hermitian(m: &CMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Validation(format!("{what} is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let defect = hermitian_defect(m);
    if !(defect <= 1e-12 * max_abs(m).max(1.0)) {
        return Err(Error::Validation(format!("{what} is not Hermitian (asymmetry {defect:e})")));
    }
    Ok(())
}

/// Degeneracy threshold `1e-9 · max(1, ‖h‖_max)`.
pub fn degeneracy_threshold(h: &CMatrix) -> f64 {
    1e-9 * max_abs(h).max(1.0)
}

/// Ascending eigenvalues and orthonormal eigenvectors (columns) of a
/// Hermitian matrix. Each column is gauge-fixed so that its largest entry is
/// real and positive.
pub fn eigh(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    eigh_with_cap(h, DEFAULT_DIM_CAP)
}

pub fn eigh_with_cap(h: &CMatrix, cap: usize) -> Result<(Vec<f64>, CMatrix)> {
    check_hermitian(h, "matrix")?;
    let n = h.nrows();
    if n > cap {
        return Err(Error::Capacity(format!("eigh dimension {n} exceeds cap {cap}")));
    }
    let (diag, vecs) = jacobi(h)?;

    // Ascending order; numerically degenerate clusters are ordered by the
    // position of each column's dominant component.
    let tol = degeneracy_threshold(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && diag[order[end]] - diag[order[end - 1]] <= tol {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by_key(|&c| dominant_index(&vecs, c));
        }
        start = end;
    }

    let energies = order.iter().map(|&c| diag[c]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let k = dominant_index(&vecs, src);
        let z = vecs[(k, src)];
        let phase = if z.norm() > 0.0 { z.conj() / z.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            vectors[(i, dst)] = vecs[(i, src)] * phase;
        }
    }
    Ok((energies, vectors))
}

/// First row index whose modulus is within round-off of the column maximum.
fn dominant_index(v: &CMatrix, col: usize) -> usize {
    let mags: Vec<f64> = (0..v.nrows()).map(|i| v[(i, col)].norm()).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    mags.iter().position(|&m| m >= max * (1.0 - 1e-12)).unwrap_or(0)
}

fn jacobi(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = h.nrows();
    let mut a = (h + h.adjoint()) * C64::new(0.5, 0.0);
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
    }
    let mut v = CMatrix::identity(n, n);

    let off_norm = |a: &CMatrix| {
        let mut sum = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                sum += a[(p, q)].norm_sqr();
            }
        }
        (2.0 * sum).sqrt()
    };
    let total = a.norm();
    let target = 1e-15 * total;

    for _ in 0..MAX_SWEEPS {
        if off_norm(&a) <= target {
            return Ok(((0..n).map(|i| a[(i, i)].re).collect(), v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let e = apq / r;
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U restricted to (p, q): [[c, s], [-s e*, c e*]]
                let ec = e.conj();
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * c - akq * ec * s;
                    a[(k, q)] = akp * s + akq * ec * c;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = apk * c - aqk * e * s;
                    a[(q, k)] = apk * s + aqk * e * c;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * c - vkq * ec * s;
                    v[(k, q)] = vkp * s + vkq * ec * c;
                }
            }
        }
    }
    let residual = off_norm(&a);
    if residual <= 1e-12 * total.max(f64::MIN_POSITIVE) {
        return Ok(((0..n).map(|i| a[(i, i)].re).collect(), v));
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS, residual })
}

/// Eigen-decomposition of `h(s)` together with the drive `ḣ(s)` expressed in
/// the eigenbasis.
#[derive(Debug, Clone)]
pub struct SpectralFrame {
    pub s: f64,
    pub hamiltonian: CMatrix,
    /// Ascending eigenvalues ε_ν.
    pub energies: Vec<f64>,
    /// Column ν is |ν(s)⟩.
    pub vectors: CMatrix,
    /// M_{νμ} = ⟨ν|ḣ|μ⟩.
    pub drive: CMatrix,
    /// Hellmann-Feynman rates ε̇_ν = M_{νν}.
    pub energy_rates: Vec<f64>,
    /// Smallest level spacing (infinite for a single level).
    pub min_gap: f64,
    pub warnings: Vec<String>,
}

impl SpectralFrame {
    pub fn new(s: f64, hamiltonian: CMatrix, drive_site: &CMatrix) -> Result<Self> {
        check_hermitian(drive_site, "drive derivative")?;
        if drive_site.nrows() != hamiltonian.nrows() {
            return Err(Error::Validation("drive derivative and Hamiltonian differ in size".into()));
        }
        let (energies, vectors) = eigh(&hamiltonian)?;
        let mut frame = SpectralFrame {
            s,
            hamiltonian,
            energies,
            vectors,
            drive: CMatrix::zeros(0, 0),
            energy_rates: Vec::new(),
            min_gap: f64::INFINITY,
            warnings: Vec::new(),
        };
        frame.min_gap = frame.energies.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        frame.set_drive(drive_site);
        frame.check()?;
        Ok(frame)
    }

    fn set_drive(&mut self, drive_site: &CMatrix) {
        self.drive = to_eigenbasis(&self.vectors, drive_site);
        self.energy_rates = (0..self.dim()).map(|i| self.drive[(i, i)].re).collect();
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `max(1, ‖h‖_max)`.
    pub fn h_scale(&self) -> f64 {
        max_abs(&self.hamiltonian).max(1.0)
    }

    pub fn degeneracy_threshold(&self) -> f64 {
        degeneracy_threshold(&self.hamiltonian)
    }

    /// Residual, unitarity and ordering checks.
    pub fn check(&self) -> Result<()> {
        let n = self.dim();
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.energies.iter().map(|&e| C64::new(e, 0.0)),
        ));
        let residual = max_abs(&(&self.hamiltonian * &self.vectors - &self.vectors * d));
        let bound = 1e-10 * self.h_scale() * n as f64;
        if residual > bound {
            return Err(Error::Consistency(format!("eigen residual {residual:e} exceeds {bound:e} at s = {}", self.s)));
        }
        let unitarity = max_abs(&(self.vectors.adjoint() * &self.vectors - CMatrix::identity(n, n)));
        if unitarity > 1e-12 {
            return Err(Error::Consistency(format!("eigenvectors not orthonormal ({unitarity:e}) at s = {}", self.s)));
        }
        if self.energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Consistency(format!("eigenvalues not ascending at s = {}", self.s)));
        }
        Ok(())
    }

    /// Rephase columns to follow `prev` continuously; see [`gauge_align`].
    /// The drive matrix is transformed along with the vectors.
    pub fn align_to(&mut self, prev: &SpectralFrame) {
        let (phases, warnings) = gauge_phases(&prev.vectors, &self.vectors);
        for w in warnings {
            self.warnings.push(format!("s = {}: {w}", self.s));
        }
        let n = self.dim();
        for nu in 0..n {
            for i in 0..n {
                self.vectors[(i, nu)] *= phases[nu];
            }
        }
        for nu in 0..n {
            for mu in 0..n {
                if nu != mu {
                    self.drive[(nu, mu)] *= phases[nu].conj() * phases[mu];
                }
            }
        }
    }

    /// π in the eigenbasis: `⟨ν|π|μ⟩`.
    pub fn project(&self, op_site: &CMatrix) -> CMatrix {
        to_eigenbasis(&self.vectors, op_site)
    }
}

/// `V† A V`, symmetrised so the result is exactly Hermitian.
fn to_eigenbasis(v: &CMatrix, op: &CMatrix) -> CMatrix {
    let m = v.adjoint() * op * v;
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Multiply each column of `vectors` by the unit phase that makes its overlap
/// with the matching column of `prev` real and non-negative. Column order is
/// kept. Returns a warning for every column whose overlap magnitude is below
/// [`TRACKING_OVERLAP_MIN`].
pub fn gauge_align(prev: &CMatrix, vectors: &CMatrix) -> (CMatrix, Vec<String>) {
    let (phases, warnings) = gauge_phases(prev, vectors);
    let mut out = vectors.clone();
    for (nu, phase) in phases.iter().enumerate() {
        for i in 0..out.nrows() {
            out[(i, nu)] *= *phase;
        }
    }
    (out, warnings)
}

fn gauge_phases(prev: &CMatrix, vectors: &CMatrix) -> (Vec<C64>, Vec<String>) {
    let one = C64::new(1.0, 0.0);
    let mut warnings = Vec::new();
    let phases = (0..vectors.ncols())
        .map(|nu| {
            let overlap = prev.column(nu).dotc(&vectors.column(nu));
            let mag = overlap.norm();
            if mag < TRACKING_OVERLAP_MIN {
                warnings
                    .push(format!("eigenvector {nu} overlap {mag:.3e} with previous point; possible level crossing"));
            }
            // real positive overlaps are left bit-identical
            if mag > 0.0 && !(overlap.im == 0.0 && overlap.re > 0.0) {
                overlap.conj() / mag
            } else {
                one
            }
        })
        .collect();
    (phases, warnings)
}

/// `P_ν(γ) = ⟨ν|π_γ|ν⟩`.
pub fn prob_weights(frame: &SpectralFrame, projector: &CMatrix) -> Vec<f64> {
    weights_from_projected(&frame.project(projector))
}

pub(crate) fn weights_from_projected(pm: &CMatrix) -> Vec<f64> {
    (0..pm.nrows()).map(|i| pm[(i, i)].re).collect()
}

/// `Ṗ_ν(γ) = 2 Re Σ_{μ≠ν} ⟨ν|π_γ|μ⟩ M_{μν} / (ε_ν − ε_μ)` from first-order
/// adiabatic perturbation theory.
pub fn prob_rates(frame: &SpectralFrame, projector: &CMatrix) -> Result<Vec<f64>> {
    rates_from_projected(frame, &frame.project(projector))
}

pub(crate) fn rates_from_projected(frame: &SpectralFrame, pm: &CMatrix) -> Result<Vec<f64>> {
    let threshold = frame.degeneracy_threshold();
    if frame.min_gap <= threshold {
        return Err(Error::Degeneracy { s: frame.s, gap: frame.min_gap, threshold });
    }
    let n = frame.dim();
    let e = &frame.energies;
    Ok((0..n)
        .map(|nu| {
            let sum: f64 = (0..n)
                .filter(|&mu| mu != nu)
                .map(|mu| (pm[(nu, mu)] * frame.drive[(mu, nu)]).re / (e[nu] - e[mu]))
                .sum();
            2.0 * sum
        })
        .collect())
}
