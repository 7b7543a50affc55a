//! Configuration, protocol runs, E_g sweeps and the entropy decomposition.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::busch::g_from_eg;
use crate::error::{SapError, SapResult};
use crate::exec::Execution;
use crate::grid::{gaussian_orbital, Grid1D, Site, TrapConfiguration, TwoBodyWavefunction};
use crate::hamiltonian::{prepare_ground_state, GroundStateSettings, Occupancy};
use crate::observables::{entropy, noon_reference, state_fidelity, trap_populations_for, TrapPopulations};
use crate::propagator::{evolve_with, PropagationSettings};
use crate::protocols::{schedule_for, ProtocolKind, ProtocolSchedule, ScheduleShape};
use crate::three_mode::{evolve_three_mode, write_three_mode_csv, CouplingProfile, ThreeModeState};

/// Sweep points below this fidelity are flagged.
pub const FIDELITY_FLAG: f64 = 0.98;

/// Stage of a run, used to tag errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Preparation,
    Propagation,
    Observables,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Preparation => "preparation",
            Stage::Propagation => "propagation",
            Stage::Observables => "observables",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug)]
pub struct RunError {
    pub stage: Stage,
    pub source: SapError,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.source)
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub type RunResult<T> = Result<T, RunError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> RunResult<T>;
}

impl<T> AtStage<T> for SapResult<T> {
    fn at(self, stage: Stage) -> RunResult<T> {
        self.map_err(|source| RunError { stage, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub n: usize,
    /// The box is `[-half_width, half_width)`.
    pub half_width: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { n: 128, half_width: 12.0 }
    }
}

impl GridSettings {
    pub fn build(&self) -> SapResult<Grid1D> {
        Grid1D::symmetric(self.n, self.half_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreeModeSettings {
    pub profile: CouplingProfile,
    pub dt: f64,
    /// Write every `stride`-th sample.
    pub stride: usize,
}

impl Default for ThreeModeSettings {
    fn default() -> Self {
        Self { profile: CouplingProfile::gaussian(600.0, 1.0), dt: 0.05, stride: 100 }
    }
}

impl Default for CouplingProfile {
    fn default() -> Self {
        CouplingProfile::gaussian(600.0, 1.0)
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match Option::<OneOrMany>::deserialize(d)? {
        None => None,
        Some(OneOrMany::One(x)) => Some(vec![x]),
        Some(OneOrMany::Many(v)) => Some(v),
    })
}

/// Everything a run needs, read from one JSON document.
///
/// Missing fields take their defaults. `e_g` may be a number or a list; when
/// it is absent `run` uses 1.2 and `sweep` the grid 1.0, 1.05, …, 1.95.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolKind,
    #[serde(deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub e_g: Option<Vec<f64>>,
    pub grid: GridSettings,
    pub schedule: ScheduleShape,
    pub dt: f64,
    pub snapshot_stride: usize,
    pub ground_state: GroundStateSettings,
    pub out_dir: Option<PathBuf>,
    /// Reserved; every run is deterministic.
    pub seed: u64,
    pub workers: Option<usize>,
    /// Also write the final wavefunction (`final_state.bin`).
    pub save_final_state: bool,
    pub three_mode: ThreeModeSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolKind::Transport,
            e_g: None,
            grid: GridSettings::default(),
            schedule: ScheduleShape::default(),
            dt: 0.02,
            snapshot_stride: 1000,
            ground_state: GroundStateSettings { dtau: 2e-3, tolerance: 1e-11, ..Default::default() },
            out_dir: None,
            seed: 0,
            workers: None,
            save_final_state: false,
            three_mode: ThreeModeSettings::default(),
        }
    }
}

/// `1.0, 1.05, …, 1.95`.
pub fn default_sweep_grid() -> Vec<f64> {
    (0..20).map(|i| 1.0 + 0.05 * i as f64).collect()
}

impl RunConfig {
    pub fn from_json(text: &str) -> SapResult<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> SapResult<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Values for a single run.
    pub fn run_values(&self) -> Vec<f64> {
        self.e_g.clone().unwrap_or_else(|| vec![1.2])
    }

    /// Values for a sweep.
    pub fn sweep_values(&self) -> Vec<f64> {
        self.e_g.clone().unwrap_or_else(default_sweep_grid)
    }

    pub fn propagation(&self) -> PropagationSettings {
        PropagationSettings { dt: self.dt, t_total: self.schedule.duration, snapshot_stride: self.snapshot_stride }
    }

    /// Check every precondition before any computation starts.
    pub fn validate(&self, values: &[f64]) -> SapResult<()> {
        if values.is_empty() {
            return Err(SapError::InvalidConfig("e_g list is empty".into()));
        }
        for &e in values {
            g_from_eg(e)?;
            schedule_for(self.protocol, self.schedule, e.max(1.0))?;
        }
        let grid = self.grid.build()?;
        if self.schedule.d_far + 3.0 > self.grid.half_width {
            return Err(SapError::Geometry(format!(
                "outer traps at ±{} do not fit in the box ±{}",
                self.schedule.d_far, self.grid.half_width
            )));
        }
        self.propagation().validate(&grid)?;
        let gs = &self.ground_state;
        if !(gs.dtau > 0.0 && gs.tolerance > 0.0 && gs.max_steps > 0 && gs.max_leakage > 0.0) {
            return Err(SapError::InvalidConfig(format!("bad ground-state settings {gs:?}")));
        }
        if self.workers == Some(0) {
            return Err(SapError::InvalidConfig("workers must be at least 1".into()));
        }
        self.three_mode.profile.validate()?;
        if !(self.three_mode.dt > 0.0) || self.three_mode.stride == 0 {
            return Err(SapError::InvalidConfig("three-mode dt and stride must be positive".into()));
        }
        Ok(())
    }

    fn execution(&self) -> Execution {
        match self.workers {
            Some(1) => Execution::Sequential,
            _ => Execution::default(),
        }
    }
}

/// One row of the observable time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub entropy: f64,
    pub populations: TrapPopulations,
    pub fidelity: f64,
}

impl SeriesRow {
    fn check(&self) -> SapResult<()> {
        let p = self.populations.as_array();
        let bad = p.iter().any(|&x| !(-1e-9..=1.0 + 1e-9).contains(&x))
            || (self.populations.total() - 1.0).abs() > 1e-8
            || !(self.entropy >= 0.0)
            || !(-1e-9..=1.0 + 1e-9).contains(&self.fidelity);
        if bad {
            return Err(SapError::Numerical { t: self.t, msg: format!("observable out of range: {self:?}") });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub protocol: ProtocolKind,
    pub e_g: f64,
    pub g: f64,
    /// Overlap with the target state.
    pub fidelity: f64,
    pub s_initial: f64,
    pub s_final: f64,
    pub s_max: f64,
    pub t_max: f64,
    pub final_populations: TrapPopulations,
    pub initial_energy: f64,
    pub duration: f64,
    pub n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: RunSummary,
    pub series: Vec<SeriesRow>,
    pub final_state: TwoBodyWavefunction,
}

/// Initial pair state and target state for a protocol.
pub struct Endpoints {
    pub initial: TwoBodyWavefunction,
    pub initial_energy: f64,
    pub target: TwoBodyWavefunction,
}

/// `|2 0 0⟩` in the initial configuration plus the target of the protocol:
/// `|0 0 2⟩`, the NOON state, or `|1 0 1⟩`.
pub fn endpoints(schedule: &ProtocolSchedule, g: f64, grid: &Grid1D, gs: &GroundStateSettings, exec: Execution) -> SapResult<Endpoints> {
    let c0 = schedule.config_at(0.0);
    let c1 = schedule.config_at(schedule.duration());
    let left = prepare_ground_state(&c0, g, grid, Occupancy::Pair(Site::Left), gs, exec)?;
    let target = match schedule.kind {
        ProtocolKind::Transport | ProtocolKind::Noon => {
            let pair_left = if c1 == c0 { left.psi.clone() } else { prepare_ground_state(&c1, g, grid, Occupancy::Pair(Site::Left), gs, exec)?.psi };
            let pair_right = if is_mirror_symmetric(&c1) {
                pair_left.mirrored()?
            } else {
                prepare_ground_state(&c1, g, grid, Occupancy::Pair(Site::Right), gs, exec)?.psi
            };
            if schedule.kind == ProtocolKind::Transport {
                pair_right
            } else {
                noon_reference(&pair_left, &pair_right)?
            }
        }
        ProtocolKind::Separation => prepare_ground_state(&c1, g, grid, Occupancy::Split(Site::Left, Site::Right), gs, exec)?.psi,
    };
    Ok(Endpoints { initial: left.psi, initial_energy: left.energy, target })
}

fn is_mirror_symmetric(c: &TrapConfiguration) -> bool {
    c.centers[1] == 0.0 && c.centers[0] == -c.centers[2] && c.offsets[0] == c.offsets[2]
}

/// Prepare `|2 0 0⟩`, run the schedule and record observables at every snapshot.
///
/// With `out` set, the time series, summary, schedule and optionally the final
/// state are written there; the time series is flushed even if the run fails.
pub fn run_protocol(config: &RunConfig, e_g: f64, exec: Execution, out: Option<&Path>) -> RunResult<RunReport> {
    config.validate(&[e_g]).at(Stage::Config)?;
    let grid = config.grid.build().at(Stage::Config)?;
    let g = g_from_eg(e_g).at(Stage::Config)?;
    let schedule = schedule_for(config.protocol, config.schedule, e_g).at(Stage::Config)?;
    let ends = endpoints(&schedule, g, &grid, &config.ground_state, exec).at(Stage::Preparation)?;

    let mut series_out = match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(SapError::from).at(Stage::Output)?;
            let mut f = File::create(dir.join("schedule.csv")).map_err(SapError::from).at(Stage::Output)?;
            schedule.write_csv(&mut f, 400).at(Stage::Output)?;
            let mut w = BufWriter::new(File::create(dir.join("timeseries.csv")).map_err(SapError::from).at(Stage::Output)?);
            writeln!(w, "t,entropy,p_ll,p_mm,p_rr,p_lm,p_lr,p_mr,fidelity").map_err(SapError::from).at(Stage::Output)?;
            Some(w)
        }
        None => None,
    };

    let mut series = Vec::new();
    let mut observe = |t: f64, psi: &TwoBodyWavefunction| -> SapResult<()> {
        let row = SeriesRow {
            t,
            entropy: entropy(psi),
            populations: trap_populations_for(psi, &schedule.config_at(t)),
            fidelity: state_fidelity(psi, &ends.target)?,
        };
        row.check()?;
        if let Some(w) = series_out.as_mut() {
            let p = row.populations;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                row.t, row.entropy, p.p_ll, p.p_mm, p.p_rr, p.p_lm, p.p_lr, p.p_mr, row.fidelity
            )?;
        }
        series.push(row);
        Ok(())
    };
    let result = evolve_with(&ends.initial, &schedule, g, &config.propagation(), exec, &mut observe);
    if let Some(mut w) = series_out.take() {
        w.flush().map_err(SapError::from).at(Stage::Output)?;
    }
    let final_state = result.map_err(|e| {
        let stage = match e {
            SapError::Numerical { .. } | SapError::InvalidConfig(_) | SapError::GridMismatch(_) => Stage::Propagation,
            _ => Stage::Observables,
        };
        RunError { stage, source: e }
    })?;

    let first = series.first().expect("initial row");
    let last = series.last().expect("final row");
    let peak = series.iter().max_by(|a, b| a.entropy.total_cmp(&b.entropy)).expect("non-empty");
    let summary = RunSummary {
        protocol: config.protocol,
        e_g,
        g,
        fidelity: last.fidelity,
        s_initial: first.entropy,
        s_final: last.entropy,
        s_max: peak.entropy,
        t_max: peak.t,
        final_populations: last.populations,
        initial_energy: ends.initial_energy,
        duration: schedule.duration(),
        n: grid.len(),
        dt: config.propagation().effective_dt(),
    };
    if let Some(dir) = out {
        let f = File::create(dir.join("summary.json")).map_err(SapError::from).at(Stage::Output)?;
        serde_json::to_writer_pretty(f, &summary).map_err(SapError::from).at(Stage::Output)?;
        if config.save_final_state {
            final_state.save(&dir.join("final_state.bin")).at(Stage::Output)?;
        }
    }
    Ok(RunReport { summary, series, final_state })
}

/// Directory name of one run inside the output directory.
pub fn run_dir_name(kind: ProtocolKind, e_g: f64) -> String {
    format!("{kind}_eg{e_g:.4}")
}

/// One row of an E_g sweep. Failed points carry the error text and `NaN`s.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub e_g: f64,
    pub fidelity: f64,
    pub s_initial: f64,
    pub s_final: f64,
    pub s_max: f64,
    pub p_ll: f64,
    pub p_rr: f64,
    pub p_lr: f64,
    /// Fidelity below [`FIDELITY_FLAG`] (or a failed point).
    pub flagged: bool,
    pub error: Option<String>,
}

impl SweepRow {
    fn from_result(e_g: f64, r: RunResult<RunReport>) -> Self {
        match r {
            Ok(rep) => {
                let s = rep.summary;
                let p = s.final_populations;
                Self {
                    e_g,
                    fidelity: s.fidelity,
                    s_initial: s.s_initial,
                    s_final: s.s_final,
                    s_max: s.s_max,
                    p_ll: p.p_ll,
                    p_rr: p.p_rr,
                    p_lr: p.p_lr,
                    flagged: s.fidelity < FIDELITY_FLAG,
                    error: None,
                }
            }
            Err(e) => Self {
                e_g,
                fidelity: f64::NAN,
                s_initial: f64::NAN,
                s_final: f64::NAN,
                s_max: f64::NAN,
                p_ll: f64::NAN,
                p_rr: f64::NAN,
                p_lr: f64::NAN,
                flagged: true,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Run the protocol for every E_g in the configuration, up to `workers` at a
/// time. Rows come back sorted by E_g; failures are recorded, not raised.
pub fn sweep_eg(config: &RunConfig, out: Option<&Path>) -> RunResult<Vec<SweepRow>> {
    let mut values = config.sweep_values();
    config.validate(&values).at(Stage::Config)?;
    values.sort_by(f64::total_cmp);
    values.dedup();
    let job = |e: f64| {
        let dir = out.map(|d| d.join(run_dir_name(config.protocol, e)));
        SweepRow::from_result(e, run_protocol(config, e, Execution::Sequential, dir.as_deref()))
    };
    let rows = run_jobs(config.workers, values, job).at(Stage::Config)?;
    if let Some(dir) = out {
        write_sweep_csv(&dir.join(format!("sweep_{}.csv", config.protocol)), &rows).at(Stage::Output)?;
    }
    Ok(rows)
}

#[cfg(feature = "parallel")]
fn run_jobs<T: Send, U: Send>(workers: Option<usize>, jobs: Vec<T>, f: impl Fn(T) -> U + Sync + Send) -> SapResult<Vec<U>> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    let pool = b.build().map_err(|e| SapError::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(pool.install(|| Execution::Parallel.map_jobs(jobs, f)))
}

#[cfg(not(feature = "parallel"))]
fn run_jobs<T: Send, U: Send>(_workers: Option<usize>, jobs: Vec<T>, f: impl Fn(T) -> U + Sync + Send) -> SapResult<Vec<U>> {
    Ok(Execution::Sequential.map_jobs(jobs, f))
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> SapResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "e_g,fidelity,s_initial,s_final,s_max,p_ll,p_rr,p_lr,flagged,error")?;
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace(['"', '\n'], "'");
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},\"{}\"",
            r.e_g, r.fidelity, r.s_initial, r.s_final, r.s_max, r.p_ll, r.p_rr, r.p_lr, r.flagged, err
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Entropy of the three reference states at one interaction energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyDecomposition {
    pub e_g: f64,
    /// `|2 0 0⟩`.
    pub s_int: f64,
    /// `|1 0 1⟩` built from single-particle orbitals.
    pub s_dist: f64,
    /// `(|2 0 0⟩ - |0 0 2⟩)/√2`.
    pub s_noon: f64,
    /// `s_noon - s_int - s_dist`.
    pub residual: f64,
}

/// Build the reference states in the resting configuration `±d_far` and
/// compute their entropies.
pub fn entropy_decomposition(e_g: f64, d_far: f64, grid: &Grid1D, gs: &GroundStateSettings, exec: Execution) -> SapResult<EntropyDecomposition> {
    let g = g_from_eg(e_g)?;
    let config = TrapConfiguration::symmetric(d_far);
    let left = prepare_ground_state(&config, g, grid, Occupancy::Pair(Site::Left), gs, exec)?.psi;
    let right = left.mirrored()?;
    let s_int = entropy(&left);
    let split = TwoBodyWavefunction::symmetrized_product(grid, &gaussian_orbital(grid, -d_far), &gaussian_orbital(grid, d_far))?;
    let s_dist = entropy(&split);
    let s_noon = entropy(&noon_reference(&left, &right)?);
    Ok(EntropyDecomposition { e_g, s_int, s_dist, s_noon, residual: s_noon - s_int - s_dist })
}

pub fn decompose(config: &RunConfig, out: Option<&Path>) -> RunResult<Vec<EntropyDecomposition>> {
    let values = config.sweep_values();
    for &e in &values {
        g_from_eg(e).at(Stage::Config)?;
    }
    let grid = config.grid.build().at(Stage::Config)?;
    let exec = config.execution();
    let rows = values
        .iter()
        .map(|&e| entropy_decomposition(e, config.schedule.d_far, &grid, &config.ground_state, exec))
        .collect::<SapResult<Vec<_>>>()
        .at(Stage::Preparation)?;
    if let Some(dir) = out {
        let write = || -> SapResult<()> {
            fs::create_dir_all(dir)?;
            let mut w = BufWriter::new(File::create(dir.join("decomposition.csv"))?);
            writeln!(w, "e_g,s_int,s_dist,s_noon,residual")?;
            for r in &rows {
                writeln!(w, "{},{},{},{},{}", r.e_g, r.s_int, r.s_dist, r.s_noon, r.residual)?;
            }
            w.flush()?;
            Ok(())
        };
        write().at(Stage::Output)?;
    }
    Ok(rows)
}

/// Final populations of a three-mode run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeModeSummary {
    pub p_l: f64,
    pub p_m: f64,
    pub p_r: f64,
    pub max_p_m: f64,
}

pub fn run_three_mode(config: &RunConfig, out: Option<&Path>) -> RunResult<ThreeModeSummary> {
    let tm = &config.three_mode;
    let samples = evolve_three_mode(&ThreeModeState::left(), &tm.profile, tm.dt).map_err(|e| {
        let stage = if matches!(e, SapError::Numerical { .. }) { Stage::Propagation } else { Stage::Config };
        RunError { stage, source: e }
    })?;
    let last = samples.last().expect("initial sample").state.populations();
    let max_p_m = samples.iter().map(|s| s.state.populations()[1]).fold(0.0, f64::max);
    let summary = ThreeModeSummary { p_l: last[0], p_m: last[1], p_r: last[2], max_p_m };
    if let Some(dir) = out {
        let write = || -> SapResult<()> {
            fs::create_dir_all(dir)?;
            write_three_mode_csv(BufWriter::new(File::create(dir.join("three_mode.csv"))?), &samples, tm.stride)?;
            serde_json::to_writer_pretty(File::create(dir.join("three_mode_summary.json"))?, &summary)?;
            Ok(())
        };
        write().at(Stage::Output)?;
    }
    Ok(summary)
}

/// `(E_g, g)` pairs on the default sweep grid plus a few points near the limits.
pub fn busch_table() -> Vec<(f64, f64)> {
    let mut e: Vec<f64> = default_sweep_grid();
    e.extend([1.001, 1.99, 1.999]);
    e.sort_by(f64::total_cmp);
    e.into_iter().map(|x| (x, g_from_eg(x).expect("grid lies in [1, 2)"))).collect()
}

pub fn write_busch_csv<W: Write>(mut w: W, table: &[(f64, f64)]) -> SapResult<()> {
    writeln!(w, "e_g,g")?;
    for (e, g) in table {
        writeln!(w, "{e},{g}")?;
    }
    Ok(())
}
