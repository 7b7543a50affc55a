//! Three-mode reduction of the triple well: dark-state algebra and
//! coupling-driven dynamics, used as a fast reference for the grid runs.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{SapError, SapResult};

/// Allowed norm drift before a run is declared unstable.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Amplitudes `(c_L, c_M, c_R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeModeState {
    pub amps: Vector3<C64>,
}

impl ThreeModeState {
    pub fn new(c_l: C64, c_m: C64, c_r: C64) -> Self {
        Self { amps: Vector3::new(c_l, c_m, c_r) }
    }

    pub fn left() -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.amps[0].norm_sqr(), self.amps[1].norm_sqr(), self.amps[2].norm_sqr()]
    }

    /// `|⟨other|self⟩|²`.
    pub fn overlap_sq(&self, other: &ThreeModeState) -> f64 {
        other.amps.dotc(&self.amps).norm_sqr()
    }
}

/// `H = -½ [[0, J_LM, 0], [J_LM, 0, J_MR], [0, J_MR, 0]]`.
pub fn hamiltonian_matrix(j_lm: f64, j_mr: f64) -> Matrix3<f64> {
    Matrix3::new(0.0, j_lm, 0.0, j_lm, 0.0, j_mr, 0.0, j_mr, 0.0) * -0.5
}

/// `θ = atan2(J_LM, J_MR)`, so `tan θ = J_LM / J_MR`.
pub fn mixing_angle(j_lm: f64, j_mr: f64) -> SapResult<f64> {
    if j_lm < 0.0 || j_mr < 0.0 {
        return Err(SapError::Domain(format!("negative tunneling rate ({j_lm}, {j_mr})")));
    }
    if j_lm == 0.0 && j_mr == 0.0 {
        return Err(SapError::UndefinedAngle);
    }
    Ok(j_lm.atan2(j_mr))
}

/// `(cos θ, 0, -sin θ)`.
pub fn dark_state(theta: f64) -> ThreeModeState {
    let (s, c) = theta.sin_cos();
    ThreeModeState::new(C64::new(c, 0.0), C64::new(0.0, 0.0), C64::new(-s, 0.0))
}

/// Pulse family for [`CouplingProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PulseShape {
    /// `exp(-((t - t_c)/width)²)`.
    Gaussian { width: f64 },
    /// `sin²(π (t - t_c + L/2)/L)` on a window of length `L`, zero outside.
    RaisedCosine { length: f64 },
}

/// Two pulses of height `peak` centred at `T/2 ∓ delay/2`.
///
/// With `counter_intuitive` the `J_MR` pulse comes first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    pub duration: f64,
    pub peak: f64,
    pub delay: f64,
    pub pulse: PulseShape,
    pub counter_intuitive: bool,
}

impl CouplingProfile {
    /// Gaussian pulses of width `T/6` separated by `T/6`.
    pub fn gaussian(duration: f64, peak: f64) -> Self {
        Self {
            duration,
            peak,
            delay: duration / 6.0,
            pulse: PulseShape::Gaussian { width: duration / 6.0 },
            counter_intuitive: true,
        }
    }

    /// Raised-cosine pulses of length `2T/3` offset by `T/3`.
    pub fn raised_cosine(duration: f64, peak: f64) -> Self {
        Self {
            duration,
            peak,
            delay: duration / 3.0,
            pulse: PulseShape::RaisedCosine { length: 2.0 * duration / 3.0 },
            counter_intuitive: true,
        }
    }

    pub fn intuitive(self) -> Self {
        Self { counter_intuitive: false, ..self }
    }

    pub fn validate(&self) -> SapResult<()> {
        let ok = self.duration >= 0.0 && self.duration.is_finite() && self.peak >= 0.0 && self.peak.is_finite();
        let shape_ok = match self.pulse {
            PulseShape::Gaussian { width } => width > 0.0,
            PulseShape::RaisedCosine { length } => length > 0.0,
        };
        if !ok || !shape_ok || !self.delay.is_finite() {
            return Err(SapError::InvalidConfig(format!("bad coupling profile {self:?}")));
        }
        Ok(())
    }

    fn pulse(&self, t: f64, centre: f64) -> f64 {
        match self.pulse {
            PulseShape::Gaussian { width } => (-((t - centre) / width).powi(2)).exp(),
            PulseShape::RaisedCosine { length } => {
                let u = (t - centre) / length + 0.5;
                if (0.0..=1.0).contains(&u) {
                    (PI * u).sin().powi(2)
                } else {
                    0.0
                }
            }
        }
    }

    /// `(J_LM(t), J_MR(t))`.
    pub fn rates(&self, t: f64) -> (f64, f64) {
        let mid = 0.5 * self.duration;
        let early = self.peak * self.pulse(t, mid - 0.5 * self.delay);
        let late = self.peak * self.pulse(t, mid + 0.5 * self.delay);
        if self.counter_intuitive {
            (late, early)
        } else {
            (early, late)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeModeSample {
    pub t: f64,
    pub state: ThreeModeState,
    /// `NaN` where both rates vanish.
    pub theta: f64,
}

fn derivative(c: &Vector3<C64>, h: &Matrix3<f64>) -> Vector3<C64> {
    // dc/dt = -i H c
    let hc = h.map(|v| C64::new(v, 0.0)) * c;
    hc.map(|z| C64::new(z.im, -z.re))
}

/// RK4 integration of `i dc/dt = H(t) c`, sampled after every step.
pub fn evolve_three_mode(state0: &ThreeModeState, profile: &CouplingProfile, dt: f64) -> SapResult<Vec<ThreeModeSample>> {
    profile.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SapError::InvalidConfig(format!("time step {dt} must be positive")));
    }
    let n0 = state0.norm_sq();
    if (n0 - 1.0).abs() > 1e-12 {
        return Err(SapError::InvalidConfig(format!("initial state has norm² {n0}")));
    }
    let steps = (profile.duration / dt - 1e-9).ceil().max(0.0) as usize;
    let h_step = if steps == 0 { dt } else { profile.duration / steps as f64 };
    let ham = |t: f64| {
        let (a, b) = profile.rates(t);
        hamiltonian_matrix(a, b)
    };
    let angle = |t: f64| {
        let (a, b) = profile.rates(t);
        mixing_angle(a, b).unwrap_or(f64::NAN)
    };
    let mut c = state0.amps;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(ThreeModeSample { t: 0.0, state: *state0, theta: angle(0.0) });
    for s in 0..steps {
        let t = s as f64 * h_step;
        let hm = ham(t + 0.5 * h_step);
        let k1 = derivative(&c, &ham(t));
        let k2 = derivative(&(c + k1 * C64::from(0.5 * h_step)), &hm);
        let k3 = derivative(&(c + k2 * C64::from(0.5 * h_step)), &hm);
        let k4 = derivative(&(c + k3 * C64::from(h_step)), &ham(t + h_step));
        c += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h_step / 6.0);
        let t1 = (s + 1) as f64 * h_step;
        let state = ThreeModeState { amps: c };
        let drift = (state.norm_sq() - 1.0).abs();
        if !(drift <= NORM_DRIFT_LIMIT) {
            return Err(SapError::Numerical { t: t1, msg: format!("three-mode norm drift {drift:.3e}; reduce dt") });
        }
        out.push(ThreeModeSample { t: t1, state, theta: angle(t1) });
    }
    Ok(out)
}

/// CSV with columns `t,p_l,p_m,p_r,theta`, every `stride`-th sample plus the last.
pub fn write_three_mode_csv<W: Write>(mut w: W, samples: &[ThreeModeSample], stride: usize) -> SapResult<()> {
    writeln!(w, "t,p_l,p_m,p_r,theta")?;
    let stride = stride.max(1);
    for (i, s) in samples.iter().enumerate() {
        if i % stride == 0 || i + 1 == samples.len() {
            let p = s.state.populations();
            writeln!(w, "{},{},{},{},{}", s.t, p[0], p[1], p[2], s.theta)?;
        }
    }
    Ok(())
}
