//! Trap trajectories for the three adiabatic passage protocols.
//!
//! The middle trap stays at the origin and the outer traps move. Every
//! schedule runs in three stages:
//!
//! 1. approach: the right trap comes in from `d_far` to `d_near`, then the
//!    left one to `d_stage > d_near`, so the right pair of wells is coupled
//!    first (counter-intuitive ordering);
//! 2. swap: the left trap moves in to `d_near` while the right one moves out to
//!    `d_stage`, with `d_left + d_right` held fixed. Both are at
//!    `(d_near + d_stage)/2` exactly at the midpoint of the protocol;
//! 3. retreat: the right trap returns to `d_far`, then the left one.
//!
//! The trajectory is the mirror image of itself under time reversal. Every
//! move starts and ends at rest, so positions and velocities are continuous.
//! The swap also comes to rest at its midpoint; the NOON
//! schedule stops there (equal couplings) and retracts both traps
//! symmetrically over the remaining time. The separation schedule
//! reuses the transport motion with constant onsite offsets.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{SapError, SapResult};
use crate::grid::TrapConfiguration;
use crate::propagator::TrapSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Transport,
    Noon,
    Separation,
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProtocolKind::Transport => "transport",
            ProtocolKind::Noon => "noon",
            ProtocolKind::Separation => "separation",
        })
    }
}

/// Geometry and timing shared by the three protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleShape {
    pub duration: f64,
    /// Resting distance of the outer traps from the middle one.
    pub d_far: f64,
    /// Closest approach of an outer trap.
    pub d_near: f64,
    /// Distance of the lagging trap while the leading one sits at `d_near`.
    pub d_stage: f64,
    /// Fraction of the duration taken by each single-trap approach or retreat.
    pub approach_fraction: f64,
}

impl Default for ScheduleShape {
    fn default() -> Self {
        Self { duration: 6000.0, d_far: 9.0, d_near: 2.75, d_stage: 4.25, approach_fraction: 0.08 }
    }
}

impl ScheduleShape {
    pub fn new(duration: f64, d_far: f64, d_near: f64) -> Self {
        let d = Self::default();
        Self { duration, d_far, d_near, d_stage: (d_near + 1.5).min(d_far), ..d }
    }

    pub fn validate(&self) -> SapResult<()> {
        let bad = |m: String| Err(SapError::Geometry(m));
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return bad(format!("duration {} must be non-negative", self.duration));
        }
        if !(self.d_near > 0.0) {
            return bad(format!("d_near = {} must be positive to keep the traps ordered", self.d_near));
        }
        if !(self.d_far > self.d_near) {
            return bad(format!("d_far = {} must exceed d_near = {}", self.d_far, self.d_near));
        }
        if !(self.d_stage >= self.d_near && self.d_stage <= self.d_far) {
            return bad(format!(
                "d_stage = {} must lie in [d_near, d_far] = [{}, {}]",
                self.d_stage, self.d_near, self.d_far
            ));
        }
        if !(self.approach_fraction > 0.0 && self.approach_fraction < 0.25) {
            return bad(format!("approach fraction {} must lie in (0, 0.25)", self.approach_fraction));
        }
        Ok(())
    }

    fn approach_time(&self) -> f64 {
        self.approach_fraction * self.duration
    }

    /// Outer-trap distances `(d_left, d_right)` of the transport motion.
    pub fn transport_distances(&self, t: f64) -> (f64, f64) {
        let ta = self.approach_time();
        let (far, near, stage) = (self.d_far, self.d_near, self.d_stage);
        let end = self.duration;
        if t <= ta {
            (far, far - (far - near) * ramp(t / ta))
        } else if t <= 2.0 * ta {
            (far - (far - stage) * ramp((t - ta) / ta), near)
        } else if t < end - 2.0 * ta {
            let f = swap_profile((t - 2.0 * ta) / (end - 4.0 * ta));
            (stage - (stage - near) * f, near + (stage - near) * f)
        } else if t < end - ta {
            (near, stage + (far - stage) * ramp((t - (end - 2.0 * ta)) / ta))
        } else {
            (near + (far - near) * ramp((t - (end - ta)) / ta), far)
        }
    }

    /// Outer-trap distances of the NOON motion.
    pub fn noon_distances(&self, t: f64) -> (f64, f64) {
        let half = 0.5 * self.duration;
        if t <= half {
            return self.transport_distances(t);
        }
        let mid = 0.5 * (self.d_near + self.d_stage);
        let a = ramp((t - half) / (self.duration - half));
        let d = mid + (self.d_far - mid) * a;
        (d, d)
    }
}

/// Raised-cosine ramp from 0 to 1 with zero slope at both ends.
pub fn ramp(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    0.5 * (1.0 - (PI * u).cos())
}

/// Monotone 0 → 1 profile whose velocity `1 - cos 4πu` vanishes at both ends
/// and at the midpoint, where it passes ½.
pub fn swap_profile(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u - (4.0 * PI * u).sin() / (4.0 * PI)
}

/// A concrete time-dependent trap protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    pub kind: ProtocolKind,
    pub shape: ScheduleShape,
    pub offsets: [f64; 3],
}

impl ProtocolSchedule {
    pub fn duration(&self) -> f64 {
        self.shape.duration
    }

    pub fn distances(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, self.shape.duration);
        match self.kind {
            ProtocolKind::Transport | ProtocolKind::Separation => self.shape.transport_distances(t),
            ProtocolKind::Noon => self.shape.noon_distances(t),
        }
    }

    pub fn config_at(&self, t: f64) -> TrapConfiguration {
        let (dl, dr) = self.distances(t);
        TrapConfiguration { centers: [-dl, 0.0, dr], offsets: self.offsets }
    }

    /// Instant at which the NOON schedule leaves the transport motion.
    pub fn switch_time(&self) -> f64 {
        0.5 * self.shape.duration
    }

    /// Rows `(t, λ_L, λ_M, λ_R, ε_L, ε_M, ε_R)` sampled at `samples + 1` times.
    pub fn sample(&self, samples: usize) -> Vec<[f64; 7]> {
        let samples = samples.max(1);
        (0..=samples)
            .map(|i| {
                let t = self.duration() * i as f64 / samples as f64;
                let c = self.config_at(t);
                [t, c.centers[0], c.centers[1], c.centers[2], c.offsets[0], c.offsets[1], c.offsets[2]]
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, samples: usize) -> SapResult<()> {
        writeln!(w, "t,lambda_l,lambda_m,lambda_r,eps_l,eps_m,eps_r")?;
        for r in self.sample(samples) {
            writeln!(w, "{},{},{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4], r[5], r[6])?;
        }
        Ok(())
    }
}

impl TrapSchedule for ProtocolSchedule {
    fn config_at(&self, t: f64) -> TrapConfiguration {
        ProtocolSchedule::config_at(self, t)
    }

    fn duration(&self) -> f64 {
        self.shape.duration
    }
}

pub fn transport_schedule(shape: ScheduleShape) -> SapResult<ProtocolSchedule> {
    shape.validate()?;
    Ok(ProtocolSchedule { kind: ProtocolKind::Transport, shape, offsets: [0.0; 3] })
}

pub fn noon_schedule(shape: ScheduleShape) -> SapResult<ProtocolSchedule> {
    shape.validate()?;
    Ok(ProtocolSchedule { kind: ProtocolKind::Noon, shape, offsets: [0.0; 3] })
}

/// Transport motion with `ε_M = ε_R = E_g - 1`, which makes `|2 0 0⟩`,
/// `|1 1 0⟩` and `|1 0 1⟩` degenerate.
pub fn separation_schedule(shape: ScheduleShape, e_g: f64) -> SapResult<ProtocolSchedule> {
    shape.validate()?;
    if !(1.0..2.0).contains(&e_g) {
        return Err(SapError::Domain(format!("E_g = {e_g} outside [1, 2)")));
    }
    let shift = e_g - 1.0;
    Ok(ProtocolSchedule { kind: ProtocolKind::Separation, shape, offsets: [0.0, shift, shift] })
}

pub fn schedule_for(kind: ProtocolKind, shape: ScheduleShape, e_g: f64) -> SapResult<ProtocolSchedule> {
    match kind {
        ProtocolKind::Transport => transport_schedule(shape),
        ProtocolKind::Noon => noon_schedule(shape),
        ProtocolKind::Separation => separation_schedule(shape, e_g),
    }
}

/// Tunneling-rate proxy: splitting of the two lowest single-particle levels
/// of an isolated double well with centres `±d/2`.
///
/// Finite differences on a grid of spacing `0.05`. Only used for reporting.
pub fn tunneling_rate(d: f64) -> f64 {
    let h = 0.05;
    let half = 0.5 * d + 7.0;
    let n = (2.0 * half / h) as usize;
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    let k = 0.5 / (h * h);
    for i in 0..n {
        let x = -half + (i as f64 + 0.5) * h;
        let v = 0.5 * (x.abs() - 0.5 * d).powi(2);
        m[(i, i)] = 2.0 * k + v;
        if i + 1 < n {
            m[(i, i + 1)] = -k;
            m[(i + 1, i)] = -k;
        }
    }
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev[1] - ev[0]
}

/// `(J_LM, J_MR)` proxies for the configuration at time `t`.
pub fn coupling_proxies(schedule: &ProtocolSchedule, t: f64) -> (f64, f64) {
    let (dl, dr) = schedule.distances(t);
    (tunneling_rate(dl), tunneling_rate(dr))
}
