//! Two-particle Hamiltonian on the grid and imaginary-time ground states.
//!
//! `H = Σ_j [-½ ∂²_j + V(x_j)] + g δ(x1 - x2)` with a spectral kinetic term,
//! the three-trap potential on both coordinates and the contact term as
//! `g/dx` on the grid diagonal.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{SapError, SapResult};
use crate::exec::Execution;
use crate::fft2::Fft2;
use crate::grid::{Grid1D, Site, TrapConfiguration, TwoBodyWavefunction};

/// `V1(x1) + V1(x2) + g/dx δ_{ij}`, stored in separable form.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub single: Vec<f64>,
    pub contact: f64,
}

impl PotentialField {
    pub fn new(config: &TrapConfiguration, g: f64, grid: &Grid1D) -> Self {
        Self { single: config.potential_on(grid), contact: g / grid.dx() }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        let v = self.single[i] + self.single[j];
        if i == j {
            v + self.contact
        } else {
            v
        }
    }
}

/// Kinetic energy `½(k1² + k2²)` in DFT layout.
pub fn kinetic_field(grid: &Grid1D) -> Array2<f64> {
    let k = grid.wavenumbers();
    Array2::from_shape_fn((grid.len(), grid.len()), |(i, j)| 0.5 * (k[i] * k[i] + k[j] * k[j]))
}

/// Applies `H` to two-body states on one grid.
#[derive(Debug)]
pub struct HamiltonianOperator {
    grid: Grid1D,
    fft: Fft2,
    kinetic: Array2<f64>,
}

impl HamiltonianOperator {
    pub fn new(grid: &Grid1D, exec: Execution) -> Self {
        Self { grid: grid.clone(), fft: Fft2::new(grid.len(), exec), kinetic: kinetic_field(grid) }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// `T Ψ` via forward FFT, multiplication by `½k²`, inverse FFT.
    pub fn kinetic_apply(&self, psi: &TwoBodyWavefunction) -> Array2<C64> {
        let n = self.grid.len();
        let scale = 1.0 / (n * n) as f64;
        let mut a = psi.amplitudes().clone();
        self.fft.forward(&mut a);
        a.zip_mut_with(&self.kinetic, |z, &t| *z *= t * scale);
        self.fft.inverse(&mut a);
        a
    }

    pub fn apply(&self, psi: &TwoBodyWavefunction, config: &TrapConfiguration, g: f64) -> SapResult<TwoBodyWavefunction> {
        if psi.grid() != &self.grid {
            return Err(SapError::GridMismatch("state grid differs from operator grid".into()));
        }
        let v = PotentialField::new(config, g, &self.grid);
        let mut out = self.kinetic_apply(psi);
        let amps = psi.amplitudes();
        for ((i, j), z) in out.indexed_iter_mut() {
            *z += amps[[i, j]] * v.at(i, j);
        }
        TwoBodyWavefunction::from_amplitudes(&self.grid, out)
    }

    /// Energy split into kinetic, trap and contact parts.
    pub fn energy_parts(&self, psi: &TwoBodyWavefunction, config: &TrapConfiguration, g: f64) -> SapResult<EnergyParts> {
        if psi.grid() != &self.grid {
            return Err(SapError::GridMismatch("state grid differs from operator grid".into()));
        }
        let n = self.grid.len();
        let w = self.grid.dx() * self.grid.dx();
        let norm = psi.norm_sq();
        let t_psi = self.kinetic_apply(psi);
        let v = PotentialField::new(config, g, &self.grid);
        let amps = psi.amplitudes();
        let mut kin = C64::default();
        let mut trap = 0.0;
        let mut contact = 0.0;
        for i in 0..n {
            let mut kr = C64::default();
            let mut tr = 0.0;
            for j in 0..n {
                let a = amps[[i, j]];
                kr += a.conj() * t_psi[[i, j]];
                tr += a.norm_sqr() * (v.single[i] + v.single[j]);
            }
            kin += kr;
            trap += tr;
            contact += amps[[i, i]].norm_sqr() * v.contact;
        }
        Ok(EnergyParts {
            kinetic: kin.re * w / norm,
            trap: trap * w / norm,
            contact: contact * w / norm,
            imaginary_residue: kin.im * w / norm,
        })
    }

    /// `⟨Ψ|H|Ψ⟩ / ⟨Ψ|Ψ⟩`.
    pub fn total_energy(&self, psi: &TwoBodyWavefunction, config: &TrapConfiguration, g: f64) -> SapResult<f64> {
        Ok(self.energy_parts(psi, config, g)?.total())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub trap: f64,
    pub contact: f64,
    pub imaginary_residue: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.trap + self.contact
    }
}

/// Convenience wrapper around [`HamiltonianOperator::total_energy`].
pub fn total_energy(psi: &TwoBodyWavefunction, config: &TrapConfiguration, g: f64) -> SapResult<f64> {
    HamiltonianOperator::new(psi.grid(), Execution::default()).total_energy(psi, config, g)
}

/// Where the two atoms sit when a state is prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "sites")]
pub enum Occupancy {
    /// Both atoms in one trap, e.g. `|2 0 0⟩`.
    Pair(Site),
    /// One atom in each of two different traps, e.g. `|1 0 1⟩`.
    Split(Site, Site),
}

impl Occupancy {
    fn seed_sites(self) -> (Site, Site) {
        match self {
            Occupancy::Pair(s) => (s, s),
            Occupancy::Split(a, b) => (a, b),
        }
    }

    /// Whether `(s1, s2)` belongs to the requested configuration.
    pub fn contains(self, s1: Site, s2: Site) -> bool {
        match self {
            Occupancy::Pair(s) => s1 == s && s2 == s,
            Occupancy::Split(a, b) => (s1 == a && s2 == b) || (s1 == b && s2 == a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundStateSettings {
    /// Final imaginary-time step.
    pub dtau: f64,
    /// Convergence threshold on the energy change per step.
    pub tolerance: f64,
    pub max_steps: usize,
    /// Allowed probability outside the requested region.
    pub max_leakage: f64,
}

impl Default for GroundStateSettings {
    fn default() -> Self {
        Self { dtau: 1e-3, tolerance: 1e-10, max_steps: 400_000, max_leakage: 0.01 }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedState {
    pub psi: TwoBodyWavefunction,
    pub energy: f64,
    pub steps: usize,
}

/// Lowest symmetric state with the atoms held in the requested trap(s).
///
/// Imaginary-time Strang splitting seeded by Gaussians in the requested traps.
/// After every step the state is projected onto the requested region pair and
/// renormalized. The step starts coarse and is refined down to
/// `settings.dtau`; at each level the energy is read off the norm decay and the
/// level ends once it changes by less than `settings.tolerance` per step.
pub fn prepare_ground_state(
    config: &TrapConfiguration,
    g: f64,
    grid: &Grid1D,
    occupancy: Occupancy,
    settings: &GroundStateSettings,
    exec: Execution,
) -> SapResult<PreparedState> {
    config.validate()?;
    if !(g >= 0.0) {
        return Err(SapError::Domain(format!("coupling g = {g} must be non-negative")));
    }
    let n = grid.len();
    let x = grid.positions();
    let sites: Vec<Site> = x.iter().map(|&xi| config.site_of(xi)).collect();
    let mask = Array2::from_shape_fn((n, n), |(i, j)| occupancy.contains(sites[i], sites[j]));

    let (sa, sb) = occupancy.seed_sites();
    let (ca, cb) = (config.center(sa), config.center(sb));
    let mut psi = TwoBodyWavefunction::from_fn(grid, |x1, x2| {
        let f = |a: f64, b: f64| (-0.5 * (x1 - a).powi(2) - 0.5 * (x2 - b).powi(2)).exp();
        C64::new(f(ca, cb) + f(cb, ca), 0.0)
    });
    apply_mask(&mut psi, &mask);
    psi.normalize()?;

    let op = HamiltonianOperator::new(grid, exec);
    let field = PotentialField::new(config, g, grid);
    let mut steps = 0;
    let mut ladder: Vec<f64> = [5e-2, 1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4]
        .into_iter()
        .filter(|&d| d > settings.dtau * 1.0001)
        .collect();
    ladder.push(settings.dtau);

    for &dtau in &ladder {
        let final_level = dtau == settings.dtau;
        let tol = if final_level { settings.tolerance } else { settings.tolerance.max(1e-8) };
        let stepper = ImaginaryStep::new(&op, &field, dtau);
        let mut last: Option<f64> = None;
        loop {
            if steps >= settings.max_steps {
                return Err(SapError::NoConvergence(format!(
                    "imaginary-time propagation exceeded {} steps",
                    settings.max_steps
                )));
            }
            steps += 1;
            stepper.apply(&op, &mut psi);
            apply_mask(&mut psi, &mask);
            let norm = psi.normalize()?;
            let e = -norm.ln() / dtau;
            if let Some(prev) = last {
                if (e - prev).abs() < tol {
                    break;
                }
            }
            last = Some(e);
        }
    }
    psi.symmetrize();
    psi.normalize()?;

    let leakage = leakage(&psi, &mask);
    if leakage > settings.max_leakage {
        return Err(SapError::Localization(format!(
            "{:.3}% of the probability lies outside the requested traps",
            100.0 * leakage
        )));
    }
    let energy = op.total_energy(&psi, config, g)?;
    Ok(PreparedState { psi, energy, steps })
}

/// One unnormalized imaginary-time Strang step `e^{-V dτ/2} e^{-T dτ} e^{-V dτ/2}`.
pub struct ImaginaryStep {
    half_v: Array2<f64>,
    kin: Array2<f64>,
}

impl ImaginaryStep {
    pub fn new(op: &HamiltonianOperator, field: &PotentialField, dtau: f64) -> Self {
        let n = op.grid.len();
        let half_v = Array2::from_shape_fn((n, n), |(i, j)| (-0.5 * dtau * field.at(i, j)).exp());
        let kin = op.kinetic.mapv(|t| (-dtau * t).exp() / (n * n) as f64);
        Self { half_v, kin }
    }

    pub fn apply(&self, op: &HamiltonianOperator, psi: &mut TwoBodyWavefunction) {
        let a = psi.amplitudes_mut();
        a.zip_mut_with(&self.half_v, |z, &f| *z *= f);
        op.fft.forward(a);
        a.zip_mut_with(&self.kin, |z, &f| *z *= f);
        op.fft.inverse(a);
        a.zip_mut_with(&self.half_v, |z, &f| *z *= f);
    }
}

fn apply_mask(psi: &mut TwoBodyWavefunction, mask: &Array2<bool>) {
    psi.amplitudes_mut().zip_mut_with(mask, |z, &keep| {
        if !keep {
            *z = C64::default();
        }
    });
}

fn leakage(psi: &TwoBodyWavefunction, mask: &Array2<bool>) -> f64 {
    let w = psi.grid().dx().powi(2);
    let outside: f64 = psi
        .amplitudes()
        .iter()
        .zip(mask.iter())
        .filter(|(_, &m)| !m)
        .map(|(z, _)| z.norm_sqr())
        .sum();
    outside * w / psi.norm_sq()
}
