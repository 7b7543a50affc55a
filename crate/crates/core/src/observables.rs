//! One-body reduced density matrix, von Neumann entropy, region populations
//! and fidelities.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{SapError, SapResult};
use crate::grid::{Site, TrapConfiguration, TwoBodyWavefunction};

/// Eigenvalues at or below this are left out of the entropy sum.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

/// `ρ(x_i, x_j)` with the quadrature weight folded in, so `tr ρ = 1`.
#[derive(Debug, Clone)]
pub struct ReducedDensityMatrix {
    entries: DMatrix<C64>,
    spectrum: Vec<f64>,
}

impl ReducedDensityMatrix {
    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Eigenvalues, largest first.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.entries.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `S = -Σ λ ln λ` in nats.
    pub fn entropy(&self) -> f64 {
        vn_entropy(&self.spectrum)
    }
}

/// Reduced one-body density matrix of a two-body state.
///
/// `ρ_ij = Σ_k conj(Ψ_ik) Ψ_jk dx²`, i.e. `conj(Ψ)·Ψᵀ` scaled so a normalized
/// state gives unit trace. The spectrum comes from a dense Hermitian
/// eigensolver.
pub fn reduced_density(psi: &TwoBodyWavefunction) -> ReducedDensityMatrix {
    let n = psi.grid().len();
    let w = psi.grid().dx().powi(2);
    let a = psi.amplitudes();
    // row-major Ψ viewed as column-major storage is Ψᵀ
    let psi_t = DMatrix::from_column_slice(n, n, a.as_slice().expect("standard layout"));
    let psi_m = psi_t.transpose();
    let mut rho = psi_m.conjugate() * &psi_t;
    rho *= C64::new(w, 0.0);
    // exact Hermitian symmetrization against roundoff
    for i in 0..n {
        rho[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let s = 0.5 * (rho[(i, j)] + rho[(j, i)].conj());
            rho[(i, j)] = s;
            rho[(j, i)] = s.conj();
        }
    }
    let mut spectrum: Vec<f64> = rho.clone().symmetric_eigenvalues().iter().copied().collect();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    ReducedDensityMatrix { entries: rho, spectrum }
}

/// Von Neumann entropy of a spectrum, dropping eigenvalues `≤ 1e-12`.
pub fn vn_entropy(spectrum: &[f64]) -> f64 {
    let s: f64 = spectrum
        .iter()
        .filter(|&&l| l > ENTROPY_CUTOFF)
        .map(|&l| -l * l.ln())
        .sum();
    s.max(0.0)
}

/// Entropy straight from a state.
pub fn entropy(psi: &TwoBodyWavefunction) -> f64 {
    reduced_density(psi).entropy()
}

/// Probability of finding the atoms in each pair of trap regions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrapPopulations {
    pub p_ll: f64,
    pub p_mm: f64,
    pub p_rr: f64,
    pub p_lm: f64,
    pub p_lr: f64,
    pub p_mr: f64,
}

impl TrapPopulations {
    pub fn total(&self) -> f64 {
        self.p_ll + self.p_mm + self.p_rr + self.p_lm + self.p_lr + self.p_mr
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.p_ll, self.p_mm, self.p_rr, self.p_lm, self.p_lr, self.p_mr]
    }
}

/// Integrate `|Ψ|²` over the 3×3 region pairs and fold `(a,b)` with `(b,a)`.
///
/// Regions are split at `boundaries`, normally
/// [`TrapConfiguration::region_boundaries`]. The result is normalized by the
/// state norm.
pub fn trap_populations(psi: &TwoBodyWavefunction, boundaries: [f64; 2]) -> TrapPopulations {
    let x = psi.grid().positions();
    let site = |v: f64| {
        if v < boundaries[0] {
            0
        } else if v < boundaries[1] {
            1
        } else {
            2
        }
    };
    let idx: Vec<usize> = x.iter().map(|&v| site(v)).collect();
    let mut p = [[0.0_f64; 3]; 3];
    for (i, row) in psi.amplitudes().rows().into_iter().enumerate() {
        let mut acc = [0.0_f64; 3];
        for (j, z) in row.iter().enumerate() {
            acc[idx[j]] += z.norm_sqr();
        }
        for (s, v) in acc.iter().enumerate() {
            p[idx[i]][s] += v;
        }
    }
    let total: f64 = p.iter().flatten().sum();
    let f = |a: usize, b: usize| if a == b { p[a][a] / total } else { (p[a][b] + p[b][a]) / total };
    TrapPopulations {
        p_ll: f(0, 0),
        p_mm: f(1, 1),
        p_rr: f(2, 2),
        p_lm: f(0, 1),
        p_lr: f(0, 2),
        p_mr: f(1, 2),
    }
}

/// Populations using the potential maxima of `config` as region edges.
pub fn trap_populations_for(psi: &TwoBodyWavefunction, config: &TrapConfiguration) -> TrapPopulations {
    trap_populations(psi, config.region_boundaries())
}

/// `|⟨reference|Ψ⟩|²`. Already insensitive to a global phase of either state.
pub fn state_fidelity(psi: &TwoBodyWavefunction, reference: &TwoBodyWavefunction) -> SapResult<f64> {
    let ov = reference.inner(psi)?;
    let norms = reference.norm_sq() * psi.norm_sq();
    if !(norms > 0.0) {
        return Err(SapError::Numerical { t: f64::NAN, msg: "fidelity with a zero state".into() });
    }
    Ok(ov.norm_sqr() / norms)
}

/// `(a + phase·b)/√2`-style superpositions of two localized references,
/// normalized on the grid.
pub fn superpose(a: &TwoBodyWavefunction, b: &TwoBodyWavefunction, coeff_b: C64) -> SapResult<TwoBodyWavefunction> {
    a.check_grid(b)?;
    let mut amps = a.amplitudes().clone();
    amps.zip_mut_with(b.amplitudes(), |x, &y| *x += coeff_b * y);
    let mut psi = TwoBodyWavefunction::from_amplitudes(a.grid(), amps)?;
    psi.normalize()?;
    Ok(psi)
}

/// NOON reference `(|2 0 0⟩ - |0 0 2⟩)/√2` built from the two pair states.
pub fn noon_reference(left_pair: &TwoBodyWavefunction, right_pair: &TwoBodyWavefunction) -> SapResult<TwoBodyWavefunction> {
    superpose(left_pair, right_pair, C64::new(-1.0, 0.0))
}

/// Population of one region pair, e.g. `(Left, Right)`.
pub fn pair_population(p: &TrapPopulations, a: Site, b: Site) -> f64 {
    use Site::*;
    match (a, b) {
        (Left, Left) => p.p_ll,
        (Middle, Middle) => p.p_mm,
        (Right, Right) => p.p_rr,
        (Left, Middle) | (Middle, Left) => p.p_lm,
        (Left, Right) | (Right, Left) => p.p_lr,
        (Middle, Right) | (Right, Middle) => p.p_mr,
    }
}
