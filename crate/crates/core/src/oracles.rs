//! Closed-form correlations of the one-photon state under displaced counting.
//!
//! Plain scalar arithmetic, kept independent of the Fock-space engine so the
//! two can check each other.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};

/// The two nonzero displacements `alpha` (mode a) and `beta` (mode b).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BellSettings {
    #[serde(serialize_with = "ser_complex")]
    pub alpha: C64,
    #[serde(serialize_with = "ser_complex")]
    pub beta: C64,
}

fn ser_complex<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

impl BellSettings {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        for z in [alpha, beta] {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFiniteAmplitude { re: z.re, im: z.im });
            }
        }
        Ok(Self { alpha, beta })
    }

    /// Equal intensities `|alpha|^2 = |beta|^2 = J`, `alpha` real and
    /// `beta = exp(2 i phi) alpha`.
    pub fn from_intensity_phase(intensity: f64, phi: f64) -> Result<Self> {
        if !(intensity >= 0.0) || !intensity.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidRange(format!(
                "intensity {intensity} and phase {phi} must be finite with intensity >= 0"
            )));
        }
        let alpha = C64::new(intensity.sqrt(), 0.0);
        Ok(Self {
            alpha,
            beta: alpha * C64::from_polar(1.0, 2.0 * phi),
        })
    }

    /// Both displacements multiplied by `exp(i theta)`.
    pub fn rotated(&self, theta: f64) -> Self {
        let r = C64::from_polar(1.0, theta);
        Self {
            alpha: self.alpha * r,
            beta: self.beta * r,
        }
    }

    /// `|alpha|^2`
    pub fn intensity(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// Half the phase of `beta` relative to `alpha`, in `[0, pi)`; zero when
    /// either amplitude vanishes.
    pub fn half_phase(&self) -> f64 {
        if self.alpha.norm() == 0.0 || self.beta.norm() == 0.0 {
            return 0.0;
        }
        let rel = (self.beta * self.alpha.conj()).arg();
        (0.5 * rel).rem_euclid(std::f64::consts::PI)
    }
}

/// Joint no-click probability `1/2 |alpha - beta|^2 exp(-|alpha|^2 - |beta|^2)`.
pub fn q_joint(alpha: C64, beta: C64) -> f64 {
    0.5 * (alpha - beta).norm_sqr() * (-alpha.norm_sqr() - beta.norm_sqr()).exp()
}

/// Single-detector no-click probability `1/2 (|alpha|^2 + 1) exp(-|alpha|^2)`.
pub fn q_single(alpha: C64) -> f64 {
    let x = alpha.norm_sqr();
    0.5 * (x + 1.0) * (-x).exp()
}

/// Joint no-click probability for the incoherent mixture,
/// `1/2 (|alpha|^2 + |beta|^2) exp(-|alpha|^2 - |beta|^2)`.
pub fn q_joint_mixture(alpha: C64, beta: C64) -> f64 {
    let (x, y) = (alpha.norm_sqr(), beta.norm_sqr());
    0.5 * (x + y) * (-x - y).exp()
}

/// CH value at equal intensity `j` and half phase difference `phi`.
pub fn ch_closed_form(j: f64, phi: f64) -> f64 {
    let s = phi.sin();
    1.0 - j * (-j).exp() + 2.0 * j * (-2.0 * j).exp() * s * s
}

/// Joint parity correlation `(2|alpha - beta|^2 - 1) exp(-2|alpha|^2 - 2|beta|^2)`.
pub fn pi_joint(alpha: C64, beta: C64) -> f64 {
    (2.0 * (alpha - beta).norm_sqr() - 1.0) * (-2.0 * alpha.norm_sqr() - 2.0 * beta.norm_sqr()).exp()
}

/// Parity correlation of the incoherent mixture,
/// `(2|alpha|^2 + 2|beta|^2 - 1) exp(-2|alpha|^2 - 2|beta|^2)`.
pub fn pi_joint_mixture(alpha: C64, beta: C64) -> f64 {
    let (x, y) = (alpha.norm_sqr(), beta.norm_sqr());
    (2.0 * x + 2.0 * y - 1.0) * (-2.0 * x - 2.0 * y).exp()
}

/// CHSH-type value at equal intensity `j` and half phase difference `phi`.
pub fn b_closed_form(j: f64, phi: f64) -> f64 {
    let s = phi.sin();
    -1.0 + (4.0 * j - 2.0) * (-2.0 * j).exp() - (8.0 * j * s * s - 1.0) * (-4.0 * j).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, LN_2, PI};

    const ZERO: C64 = C64::new(0.0, 0.0);

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn joint_examples() {
        assert_eq!(q_joint(ZERO, ZERO), 0.0);
        assert_eq!(q_joint(C64::new(0.3, 0.7), C64::new(0.3, 0.7)), 0.0);
        assert_abs_diff_eq!(q_joint(re(1.0), re(-1.0)), 0.27067056647322538, epsilon = 1e-15);
    }

    #[test]
    fn single_examples() {
        assert_eq!(q_single(ZERO), 0.5);
        assert_abs_diff_eq!(q_single(re(1.0)), 0.36787944117144233, epsilon = 1e-15);
        assert!(q_single(re(40.0)) < 1e-300);
    }

    #[test]
    fn ch_examples() {
        assert_eq!(ch_closed_form(0.0, 1.234), 1.0);
        assert_abs_diff_eq!(ch_closed_form(LN_2, FRAC_PI_2), 1.0, epsilon = 1e-15);
        // 40-digit reference
        assert_abs_diff_eq!(ch_closed_form(0.26, FRAC_PI_2), 1.1086772726355738, epsilon = 1e-14);
    }

    #[test]
    fn pi_examples() {
        assert_eq!(pi_joint(ZERO, ZERO), -1.0);
        assert_abs_diff_eq!(pi_joint(re(1.0), re(-1.0)), 0.12820947222113926, epsilon = 1e-15);
        let a = C64::new(0.4, -0.2);
        assert_abs_diff_eq!(pi_joint(a, a), -(-4.0 * a.norm_sqr()).exp(), epsilon = 1e-15);

        assert_eq!(pi_joint_mixture(ZERO, ZERO), -1.0);
        assert_abs_diff_eq!(pi_joint_mixture(re(1.0), re(-1.0)), 0.054946916666202541, epsilon = 1e-15);
    }

    #[test]
    fn b_examples() {
        assert_eq!(b_closed_form(0.0, 0.3), -2.0);
        assert_abs_diff_eq!(b_closed_form(0.1, FRAC_PI_2), -2.1759051957176431, epsilon = 1e-14);
        assert_abs_diff_eq!(b_closed_form(60.0, 0.7), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn coherence_term_vanishes_for_orthogonal_phases() {
        // |alpha - beta|^2 = |alpha|^2 + |beta|^2 when Re(alpha beta^*) = 0
        let (a, b) = (re(1.0), C64::new(0.0, 1.0));
        assert_abs_diff_eq!(pi_joint(a, b), pi_joint_mixture(a, b), epsilon = 1e-15);
        assert_abs_diff_eq!(q_joint(a, b), q_joint_mixture(a, b), epsilon = 1e-15);
    }

    #[test]
    fn settings_from_intensity_phase() {
        let s = BellSettings::from_intensity_phase(0.25, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(s.intensity(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!((s.beta + s.alpha).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.half_phase(), FRAC_PI_2, epsilon = 1e-12);
        assert!(BellSettings::from_intensity_phase(-0.1, 0.0).is_err());
        assert!(BellSettings::from_intensity_phase(0.1, f64::NAN).is_err());
    }

    #[test]
    fn ch_violation_window_at_opposite_phase() {
        for i in 1..400 {
            let j = i as f64 * 0.005;
            let v = ch_closed_form(j, FRAC_PI_2);
            if (j - LN_2).abs() < 1e-3 {
                continue;
            }
            assert_eq!(v > 1.0, j < LN_2, "j={j} v={v}");
        }
    }

    proptest! {
        #[test]
        fn closed_forms_match_assembled_terms(j in 0.0f64..3.0, phi in 0.0f64..PI) {
            let s = BellSettings::from_intensity_phase(j, phi).unwrap();
            let (a, b) = (s.alpha, s.beta);
            let ch = q_single(ZERO) + q_single(ZERO) - q_joint(ZERO, ZERO)
                - q_joint(a, ZERO) - q_joint(ZERO, b) + q_joint(a, b);
            prop_assert!((ch - ch_closed_form(j, phi)).abs() < 1e-12);
            let bb = pi_joint(ZERO, ZERO) + pi_joint(a, ZERO) + pi_joint(ZERO, b) - pi_joint(a, b);
            prop_assert!((bb - b_closed_form(j, phi)).abs() < 1e-12);
        }

        #[test]
        fn global_phase_invariance(
            ar in -1.5f64..1.5, ai in -1.5f64..1.5,
            br in -1.5f64..1.5, bi in -1.5f64..1.5,
            theta in 0.0f64..(2.0 * PI),
        ) {
            let s = BellSettings::new(C64::new(ar, ai), C64::new(br, bi)).unwrap();
            let r = s.rotated(theta);
            for f in [q_joint, pi_joint, pi_joint_mixture, q_joint_mixture] {
                prop_assert!((f(s.alpha, s.beta) - f(r.alpha, r.beta)).abs() < 1e-12);
            }
            prop_assert!((q_single(s.alpha) - q_single(r.alpha)).abs() < 1e-12);
        }

        #[test]
        fn probabilities_in_range(ar in -3.0f64..3.0, ai in -3.0f64..3.0, br in -3.0f64..3.0, bi in -3.0f64..3.0) {
            let (a, b) = (C64::new(ar, ai), C64::new(br, bi));
            let q = q_joint(a, b);
            prop_assert!((0.0..=1.0).contains(&q));
            let s = q_single(a);
            prop_assert!(s > 0.0 && s <= 0.5);
            prop_assert!((-1.0..=1.0).contains(&pi_joint(a, b)));
            prop_assert!((-1.0..=1.0).contains(&pi_joint_mixture(a, b)));
            prop_assert!((pi_joint_mixture(a, C64::from_polar(b.norm(), 1.3)) - pi_joint_mixture(a, b)).abs() < 1e-12);
        }
    }
}
