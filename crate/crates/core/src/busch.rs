//! Map between the 1D contact coupling `g` and the ground-state energy `E_g`
//! of two atoms in a single harmonic trap (natural units, ħ = m = ω = 1).
//!
//! The relation is
//!
//! ```text
//! g = -2√2 Γ(1 - E_g/2) / Γ((1 - E_g)/2)
//! ```
//!
//! and only the repulsive branch `E_g ∈ [1, 2)` is supported. `E_g = 1` is the
//! non-interacting pair and `E_g → 2` the infinitely repulsive limit.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{SapError, SapResult};

// Lanczos approximation, g = 7, n = 9 (Godfrey coefficients)
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments, including negative non-integers.
///
/// Returns `NaN` at the poles (zero and negative integers).
pub fn gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return f64::NAN;
    }
    if x < 0.5 {
        // reflection: Γ(x) Γ(1 - x) = π / sin(πx)
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

/// Interaction strength expressed both as a coupling constant and as the
/// pair ground-state energy it produces in a single trap.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InteractionStrength {
    pub g: f64,
    pub e_g: f64,
}

impl InteractionStrength {
    pub fn from_eg(e_g: f64) -> SapResult<Self> {
        Ok(Self { g: g_from_eg(e_g)?, e_g })
    }

    pub fn from_g(g: f64) -> SapResult<Self> {
        Ok(Self { g, e_g: eg_from_g(g)? })
    }

    /// Interaction energy of the pair above two free trapped atoms.
    pub fn pair_shift(&self) -> f64 {
        self.e_g - 1.0
    }
}

/// Coupling constant that gives the pair ground-state energy `e_g`.
pub fn g_from_eg(e_g: f64) -> SapResult<f64> {
    if !(1.0..2.0).contains(&e_g) {
        return Err(SapError::Domain(format!(
            "pair energy E_g = {e_g} outside the repulsive branch [1, 2)"
        )));
    }
    if e_g == 1.0 {
        // Γ((1 - E_g)/2) has a pole here
        return Ok(0.0);
    }
    Ok(-2.0 * SQRT_2 * gamma(1.0 - 0.5 * e_g) / gamma(0.5 * (1.0 - e_g)))
}

const INVERSE_MAX_ITER: usize = 200;

/// Pair ground-state energy for coupling `g ≥ 0`.
///
/// Bisection on `(1, 2)` until the bracket is small, then Newton polishing with
/// a finite-difference slope, falling back to bisection if a Newton step leaves
/// the bracket.
pub fn eg_from_g(g: f64) -> SapResult<f64> {
    if !(g >= 0.0) || !g.is_finite() {
        return Err(SapError::Domain(format!(
            "coupling g = {g} must be finite and non-negative"
        )));
    }
    if g == 0.0 {
        return Ok(1.0);
    }
    let f = |e: f64| g_from_eg(e).map(|v| v - g);
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64);
    // g_from_eg is increasing: f(lo) < 0 and f(e) → +∞ as e → 2
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut e = 0.5 * (lo + hi);
    for _ in 0..INVERSE_MAX_ITER {
        let fe = f(e)?;
        if fe.abs() <= 1e-13 * g.max(1.0) {
            return Ok(e);
        }
        if fe < 0.0 {
            lo = e;
        } else {
            hi = e;
        }
        let h = 1e-7 * (hi - lo).max(1e-9);
        let slope = (f((e + h).min(2.0 - f64::EPSILON))? - f(e - h)?) / (2.0 * h);
        let mut next = e - fe / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - e).abs() <= 4.0 * f64::EPSILON * e {
            return Ok(next);
        }
        e = next;
    }
    Err(SapError::NoConvergence(format!(
        "inverse Busch relation did not converge for g = {g}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        // Γ(-1/2) = -2√π
        assert!((gamma(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert!(gamma(0.0).is_nan());
        assert!(gamma(-2.0).is_nan());
    }

    #[test]
    fn non_interacting_is_exact_zero() {
        assert_eq!(g_from_eg(1.0).unwrap(), 0.0);
        assert_eq!(eg_from_g(0.0).unwrap(), 1.0);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn matches_high_precision_values() {
        // reference values from a 40-digit Gamma evaluation
        let cases = [
            (1.2, 0.587_098_456_941_722_39),
            (1.4, 1.453_567_929_176_137_4),
            (1.6, 3.000_996_926_842_138_2),
            (1.001, 0.002_508_367_371_528_897_2),
            (1.95, 31.357_711_734_007_894),
        ];
        for (e, g) in cases {
            let got = g_from_eg(e).unwrap();
            assert!((got - g).abs() <= 1e-12 * g, "e={e}: {got} vs {g}");
        }
    }

    #[test]
    fn diverges_towards_two() {
        assert!(g_from_eg(1.999).unwrap() > 1e3);
    }

    #[test]
    fn rejects_outside_repulsive_branch() {
        assert!(matches!(g_from_eg(0.99), Err(SapError::Domain(_))));
        assert!(matches!(g_from_eg(2.0), Err(SapError::Domain(_))));
        assert!(matches!(eg_from_g(-1.0), Err(SapError::Domain(_))));
        assert!(eg_from_g(f64::NAN).is_err());
    }

    #[test]
    fn inverse_values() {
        let e = eg_from_g(100.0).unwrap();
        assert!(e > 1.9 && e < 2.0);
        assert!((e - 1.984_123_511_167_397).abs() < 1e-10);
        assert!((eg_from_g(1.0).unwrap() - 1.306_745_541_231_082_7).abs() < 1e-10);
        let g = g_from_eg(1.4).unwrap();
        assert!((eg_from_g(g).unwrap() - 1.4).abs() < 1e-12);
    }

    #[test]
    fn strength_pair_shift() {
        let s = InteractionStrength::from_eg(1.4).unwrap();
        assert!((s.pair_shift() - 0.4).abs() < 1e-15);
        let t = InteractionStrength::from_g(s.g).unwrap();
        assert!((t.e_g - 1.4).abs() < 1e-10);
    }

    proptest::proptest! {
        #[test]
        fn round_trip(e in 1.0005f64..1.995) {
            let g = g_from_eg(e).unwrap();
            let back = eg_from_g(g).unwrap();
            proptest::prop_assert!((back - e).abs() < 1e-10);
        }

        #[test]
        fn increasing(e in 1.0f64..1.99, de in 1e-6f64..1e-2) {
            proptest::prop_assert!(g_from_eg(e + de).unwrap() > g_from_eg(e).unwrap());
        }
    }
}
