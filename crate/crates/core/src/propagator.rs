//! Real-time split-operator propagation.
//!
//! One step is `e^{-iV dt/2} · F⁻¹ e^{-iT dt} F · e^{-iV dt/2}` where `V` holds
//! the trap potential on both coordinates plus the contact diagonal. With a
//! time-dependent schedule the potential is sampled at the step midpoint.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{SapError, SapResult};
use crate::exec::Execution;
use crate::fft2::Fft2;
use crate::grid::{Grid1D, TrapConfiguration, TwoBodyWavefunction};
use crate::hamiltonian::{kinetic_field, PotentialField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    pub dt: f64,
    pub t_total: f64,
    pub snapshot_stride: usize,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self { dt: 5e-3, t_total: 800.0, snapshot_stride: 1000 }
    }
}

impl PropagationSettings {
    pub fn validate(&self, grid: &Grid1D) -> SapResult<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SapError::InvalidConfig(format!("time step {} must be positive", self.dt)));
        }
        if !(self.t_total >= 0.0) || !self.t_total.is_finite() {
            return Err(SapError::InvalidConfig(format!("duration {} must be non-negative", self.t_total)));
        }
        if self.snapshot_stride == 0 {
            return Err(SapError::InvalidConfig("snapshot stride must be at least 1".into()));
        }
        let phase = self.dt * grid.k_max().powi(2) / 2.0;
        if phase >= std::f64::consts::PI {
            return Err(SapError::InvalidConfig(format!(
                "dt = {} too large for the grid: kinetic phase dt·k_max²/2 = {phase:.3} ≥ π",
                self.dt
            )));
        }
        Ok(())
    }

    /// Number of steps; the step is shrunk slightly so the run ends exactly at `t_total`.
    pub fn steps(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }

    pub fn effective_dt(&self) -> f64 {
        match self.steps() {
            0 => self.dt,
            s => self.t_total / s as f64,
        }
    }
}

/// Anything that yields the trap configuration at time `t`.
pub trait TrapSchedule: Sync {
    fn config_at(&self, t: f64) -> TrapConfiguration;
    fn duration(&self) -> f64;
}

/// A schedule that never changes.
#[derive(Debug, Clone, Copy)]
pub struct StaticSchedule {
    pub config: TrapConfiguration,
    pub duration: f64,
}

impl TrapSchedule for StaticSchedule {
    fn config_at(&self, _t: f64) -> TrapConfiguration {
        self.config
    }

    fn duration(&self) -> f64 {
        self.duration
    }
}

/// Split-operator stepper with cached kinetic phases for one `dt`.
#[derive(Debug)]
pub struct SplitStepPropagator {
    grid: Grid1D,
    fft: Fft2,
    dt: f64,
    kinetic_phase: Array2<C64>,
}

impl SplitStepPropagator {
    pub fn new(grid: &Grid1D, dt: f64, exec: Execution) -> Self {
        let n = grid.len();
        let scale = 1.0 / (n * n) as f64;
        let kinetic_phase = kinetic_field(grid).mapv(|t| C64::from_polar(scale, -t * dt));
        Self { grid: grid.clone(), fft: Fft2::new(n, exec), dt, kinetic_phase }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Advance `psi` by one step under the configuration `config_mid`
    /// (evaluated by the caller at the step midpoint).
    pub fn step(&self, psi: &mut TwoBodyWavefunction, config_mid: &TrapConfiguration, g: f64) -> SapResult<()> {
        self.step_field(psi, &PotentialField::new(config_mid, g, &self.grid))
    }

    /// One step under an explicit potential field.
    pub fn step_field(&self, psi: &mut TwoBodyWavefunction, field: &PotentialField) -> SapResult<()> {
        if psi.grid() != &self.grid {
            return Err(SapError::GridMismatch("state grid differs from propagator grid".into()));
        }
        let n = self.grid.len();
        if field.single.len() != n {
            return Err(SapError::GridMismatch("potential field length differs from grid".into()));
        }
        let half: Vec<C64> = field.single.iter().map(|&v| C64::from_polar(1.0, -0.5 * self.dt * v)).collect();
        let contact = C64::from_polar(1.0, -0.5 * self.dt * field.contact);
        let exec = self.fft.execution();
        let a = psi.amplitudes_mut();
        let potential_half = |a: &mut Array2<C64>| {
            let data = a.as_slice_mut().expect("standard layout");
            exec.for_each_row(data, n, |i, row| {
                let hi = half[i];
                for (j, z) in row.iter_mut().enumerate() {
                    *z *= hi * half[j];
                }
                row[i] *= contact;
            });
        };
        potential_half(a);
        self.fft.forward(a);
        a.zip_mut_with(&self.kinetic_phase, |z, &p| *z *= p);
        self.fft.inverse(a);
        potential_half(a);
        Ok(())
    }
}

/// Free function form of [`SplitStepPropagator::step`].
pub fn step(psi: &mut TwoBodyWavefunction, config_mid: &TrapConfiguration, g: f64, dt: f64) -> SapResult<()> {
    SplitStepPropagator::new(psi.grid(), dt, Execution::default()).step(psi, config_mid, g)
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub psi: TwoBodyWavefunction,
}

/// Evolve `psi0` along `schedule`, calling `observe(t, ψ)` at `t = 0`, every
/// `snapshot_stride` steps and at the final time.
///
/// Any non-finite amplitude found at a snapshot aborts the run.
pub fn evolve_with<S, F>(
    psi0: &TwoBodyWavefunction,
    schedule: &S,
    g: f64,
    settings: &PropagationSettings,
    exec: Execution,
    mut observe: F,
) -> SapResult<TwoBodyWavefunction>
where
    S: TrapSchedule + ?Sized,
    F: FnMut(f64, &TwoBodyWavefunction) -> SapResult<()>,
{
    settings.validate(psi0.grid())?;
    let steps = settings.steps();
    let dt = settings.effective_dt();
    let prop = SplitStepPropagator::new(psi0.grid(), dt, exec);
    let mut psi = psi0.clone();
    observe(0.0, &psi)?;
    for s in 0..steps {
        let t_mid = (s as f64 + 0.5) * dt;
        prop.step(&mut psi, &schedule.config_at(t_mid), g)?;
        let done = s + 1 == steps;
        if (s + 1) % settings.snapshot_stride == 0 || done {
            let t = (s + 1) as f64 * dt;
            if psi.has_non_finite() {
                return Err(SapError::Numerical { t, msg: "non-finite amplitude in wavefunction".into() });
            }
            observe(t, &psi)?;
        }
    }
    Ok(psi)
}

/// Evolve and collect every snapshot.
pub fn evolve<S: TrapSchedule + ?Sized>(
    psi0: &TwoBodyWavefunction,
    schedule: &S,
    g: f64,
    settings: &PropagationSettings,
) -> SapResult<Vec<Snapshot>> {
    let mut out = Vec::new();
    evolve_with(psi0, schedule, g, settings, Execution::default(), |t, psi| {
        out.push(Snapshot { t, psi: psi.clone() });
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gaussian_orbital, Site};
    use crate::hamiltonian::{prepare_ground_state, GroundStateSettings, HamiltonianOperator, Occupancy};
    use crate::observables::{entropy, state_fidelity};

    fn second_moment(psi: &TwoBodyWavefunction, center: f64) -> f64 {
        let g = psi.grid();
        let x = g.positions();
        let mut acc = 0.0;
        for (i, row) in psi.amplitudes().rows().into_iter().enumerate() {
            let w: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            acc += (x[i] - center).powi(2) * w;
        }
        acc / psi.norm_sq() * g.dx() * g.dx()
    }

    fn mean_x1(psi: &TwoBodyWavefunction) -> f64 {
        let g = psi.grid();
        let x = g.positions();
        let mut acc = 0.0;
        for (i, row) in psi.amplitudes().rows().into_iter().enumerate() {
            acc += x[i] * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        acc / psi.norm_sq() * g.dx() * g.dx()
    }

    #[test]
    fn free_gaussian_spreads_analytically() {
        let grid = Grid1D::symmetric(256, 24.0).unwrap();
        let mut psi = TwoBodyWavefunction::gaussian_pair(&grid, 0.0);
        let free = PotentialField { single: vec![0.0; 256], contact: 0.0 };
        let prop = SplitStepPropagator::new(&grid, 0.01, Execution::Sequential);
        for _ in 0..200 {
            prop.step_field(&mut psi, &free).unwrap();
        }
        // <x²> = (1 + t²)/2 for a unit-width Gaussian at t = 2
        let m2 = second_moment(&psi, 0.0);
        assert!((m2 - 2.5).abs() < 1e-4, "{m2}");
    }

    #[test]
    fn coherent_state_returns_after_one_period() {
        let grid = Grid1D::symmetric(128, 12.0).unwrap();
        let a = gaussian_orbital(&grid, 2.0);
        let b = gaussian_orbital(&grid, 0.0);
        let psi0 = TwoBodyWavefunction::symmetrized_product(&grid, &a, &b).unwrap();
        let sched = StaticSchedule { config: TrapConfiguration::single(0.0), duration: 2.0 * std::f64::consts::PI };
        let settings = PropagationSettings { dt: 2.0 * std::f64::consts::PI / 2000.0, t_total: sched.duration, snapshot_stride: 1000 };
        let mut mid = 0.0;
        let end = evolve_with(&psi0, &sched, 0.0, &settings, Execution::Sequential, |t, psi| {
            if (t - std::f64::consts::PI).abs() < 1e-9 {
                mid = mean_x1(psi);
            }
            Ok(())
        })
        .unwrap();
        assert!((mid + 1.0).abs() < 1e-4, "half period mean {mid}");
        assert!((mean_x1(&end) - 1.0).abs() < 1e-4);
        assert!(state_fidelity(&end, &psi0).unwrap() > 1.0 - 1e-4);
    }

    // a localized pair slightly off the left trap, so it moves
    fn triple_well_state(grid: &Grid1D) -> (TwoBodyWavefunction, TrapConfiguration) {
        let config = TrapConfiguration::symmetric(3.5);
        let mut psi = TwoBodyWavefunction::from_fn(grid, |x1, x2| {
            let f = |x: f64| (-0.5 * (x + 3.0).powi(2)).exp();
            C64::new(f(x1) * f(x2), 0.0)
        });
        psi.normalize().unwrap();
        (psi, config)
    }

    // <H> is conserved up to an O(dt²) oscillation of the splitting
    #[test]
    fn static_potential_conserves_norm_and_energy() {
        let grid = Grid1D::symmetric(64, 12.0).unwrap();
        let op = HamiltonianOperator::new(&grid, Execution::Sequential);
        let prop = SplitStepPropagator::new(&grid, 5e-5, Execution::Sequential);
        for g in [0.0, 1.45, 6.0] {
            let (psi0, config) = triple_well_state(&grid);
            let field = PotentialField::new(&config, g, &grid);
            let mut psi = psi0.clone();
            let e_start = op.total_energy(&psi, &config, g).unwrap();
            let mut worst: f64 = 0.0;
            for s in 0..10_000 {
                prop.step_field(&mut psi, &field).unwrap();
                if s % 500 == 499 {
                    worst = worst.max((op.total_energy(&psi, &config, g).unwrap() - e_start).abs());
                }
            }
            assert!((psi.norm_sq() - 1.0).abs() < 1e-10, "g = {g}: norm {}", psi.norm_sq());
            assert!(worst < 1e-6, "g = {g}: energy drift {worst}");
        }
    }

    #[test]
    fn time_reversal_recovers_initial_state() {
        let grid = Grid1D::symmetric(64, 12.0).unwrap();
        let g = 0.587;
        let (psi0, config) = triple_well_state(&grid);
        let field = PotentialField::new(&config, g, &grid);
        let fwd = SplitStepPropagator::new(&grid, 0.02, Execution::Sequential);
        let back = SplitStepPropagator::new(&grid, -0.02, Execution::Sequential);
        let mut psi = psi0.clone();
        for _ in 0..2000 {
            fwd.step_field(&mut psi, &field).unwrap();
        }
        assert!(state_fidelity(&psi, &psi0).unwrap() < 0.99);
        for _ in 0..2000 {
            back.step_field(&mut psi, &field).unwrap();
        }
        assert!(state_fidelity(&psi, &psi0).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn second_order_in_dt() {
        let grid = Grid1D::symmetric(64, 12.0).unwrap();
        let g = 1.0;
        let (psi0, config) = triple_well_state(&grid);
        let field = PotentialField::new(&config, g, &grid);
        let run = |dt: f64| {
            let prop = SplitStepPropagator::new(&grid, dt, Execution::Sequential);
            let mut psi = psi0.clone();
            for _ in 0..(2.0 / dt).round() as usize {
                prop.step_field(&mut psi, &field).unwrap();
            }
            psi
        };
        let reference = run(0.0025);
        let err = |p: &TwoBodyWavefunction| {
            let d: f64 = p.amplitudes().iter().zip(reference.amplitudes().iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
            d.sqrt()
        };
        let e1 = err(&run(0.02));
        let e2 = err(&run(0.01));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
    }

    #[test]
    fn zero_duration_returns_initial_state_only() {
        let grid = Grid1D::symmetric(64, 12.0).unwrap();
        let psi0 = TwoBodyWavefunction::gaussian_pair(&grid, 0.0);
        let sched = StaticSchedule { config: TrapConfiguration::single(0.0), duration: 0.0 };
        let settings = PropagationSettings { dt: 0.01, t_total: 0.0, snapshot_stride: 10 };
        let snaps = evolve(&psi0, &sched, 0.0, &settings).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].t, 0.0);
        assert_eq!(snaps[0].psi.amplitudes(), psi0.amplitudes());
    }

    // the box leaves 7 oscillator lengths beyond the outer traps so the
    // periodic wrap does not clip the prepared state
    #[test]
    fn prepared_eigenstate_is_stationary() {
        let grid = Grid1D::symmetric(128, 16.0).unwrap();
        let config = TrapConfiguration::symmetric(9.0);
        let g = 1.4535679291761374;
        let gs = GroundStateSettings { dtau: 2e-3, tolerance: 1e-11, ..Default::default() };
        let psi0 = prepare_ground_state(&config, g, &grid, Occupancy::Pair(Site::Left), &gs, Execution::Sequential).unwrap().psi;
        let sched = StaticSchedule { config, duration: 10.0 };
        let settings = PropagationSettings { dt: 0.01, t_total: 10.0, snapshot_stride: 100 };
        let snaps = evolve(&psi0, &sched, g, &settings).unwrap();
        assert_eq!(snaps.len(), 11);
        for s in &snaps {
            let f = state_fidelity(&s.psi, &psi0).unwrap();
            assert!(f > 0.9999, "t = {} f = {f}", s.t);
        }
    }

    #[test]
    fn exchange_symmetry_is_kept() {
        let grid = Grid1D::symmetric(64, 12.0).unwrap();
        let a = gaussian_orbital(&grid, -2.0);
        let b = gaussian_orbital(&grid, 1.0);
        let psi0 = TwoBodyWavefunction::symmetrized_product(&grid, &a, &b).unwrap();
        let sched = StaticSchedule { config: TrapConfiguration::symmetric(3.0), duration: 5.0 };
        let settings = PropagationSettings { dt: 0.01, t_total: 5.0, snapshot_stride: 500 };
        let end = evolve_with(&psi0, &sched, 2.0, &settings, Execution::Sequential, |_, _| Ok(())).unwrap();
        assert!(end.exchange_asymmetry() < 1e-12);
    }

    #[test]
    fn product_state_stays_unentangled_without_interaction() {
        let grid = Grid1D::symmetric(64, 12.0).unwrap();
        let psi0 = TwoBodyWavefunction::gaussian_pair(&grid, -3.0);
        let sched = StaticSchedule { config: TrapConfiguration::symmetric(3.0), duration: 20.0 };
        let settings = PropagationSettings { dt: 0.02, t_total: 20.0, snapshot_stride: 100 };
        let mut worst: f64 = 0.0;
        evolve_with(&psi0, &sched, 0.0, &settings, Execution::Sequential, |_, psi| {
            worst = worst.max(entropy(psi));
            Ok(())
        })
        .unwrap();
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn settings_validation() {
        let grid = Grid1D::symmetric(512, 12.0).unwrap();
        let s = PropagationSettings::default();
        // dt = 5e-3 is too coarse for n = 512 on this box
        assert!(s.validate(&grid).is_err());
        let s = PropagationSettings { dt: 1e-3, ..s };
        assert!(s.validate(&grid).is_ok());
        assert!(PropagationSettings { snapshot_stride: 0, ..s }.validate(&grid).is_err());
        assert!(PropagationSettings { dt: -1.0, ..s }.validate(&grid).is_err());
        assert_eq!(PropagationSettings { dt: 0.3, t_total: 1.0, snapshot_stride: 1 }.steps(), 3);
    }

    #[test]
    fn nan_is_detected() {
        let grid = Grid1D::symmetric(64, 12.0).unwrap();
        let mut amps = TwoBodyWavefunction::gaussian_pair(&grid, 0.0).into_amplitudes();
        amps[[3, 3]] = C64::new(f64::NAN, 0.0);
        let psi0 = TwoBodyWavefunction::from_amplitudes(&grid, amps).unwrap();
        let sched = StaticSchedule { config: TrapConfiguration::single(0.0), duration: 1.0 };
        let settings = PropagationSettings { dt: 0.01, t_total: 1.0, snapshot_stride: 10 };
        let r = evolve_with(&psi0, &sched, 0.0, &settings, Execution::Sequential, |_, _| Ok(()));
        assert!(matches!(r, Err(SapError::Numerical { .. })));
    }
}
