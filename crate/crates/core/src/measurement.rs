//! Displaced photon-counting measurements.
//!
//! Each apparatus displaces its mode by a coherent amplitude and then counts
//! photons. A bucket detector gives the no-click/click pair `Q(alpha)`,
//! `P(alpha)`; a number-resolving detector gives the even/odd parity pair.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fock::{
    check_amplitude, displacement_matrix, parity_matrix, tensor, CMatrix, FockCutoff, ModeOperator,
    TwoModeOperator, C64,
};

/// Coherent displacement applied in front of a detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisplacementSetting {
    alpha: C64,
}

impl DisplacementSetting {
    pub fn new(alpha: C64) -> Result<Self> {
        check_amplitude(alpha)?;
        Ok(Self { alpha })
    }

    pub fn zero() -> Self {
        Self {
            alpha: C64::new(0.0, 0.0),
        }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    /// `|alpha|^2`
    pub fn intensity(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

impl TryFrom<C64> for DisplacementSetting {
    type Error = Error;

    fn try_from(alpha: C64) -> Result<Self> {
        Self::new(alpha)
    }
}

/// Beam splitter of power transmission `T` whose other port carries the
/// coherent state `|gamma>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApparatusSetting {
    transmission: f64,
    gamma: C64,
}

impl ApparatusSetting {
    pub fn new(transmission: f64, gamma: C64) -> Result<Self> {
        if !(transmission > 0.0 && transmission <= 1.0) {
            return Err(Error::InvalidTransmission(transmission));
        }
        check_amplitude(gamma)?;
        Ok(Self {
            transmission,
            gamma,
        })
    }

    /// Apparatus whose reflected ancilla amplitude `sqrt(1-T) gamma` equals
    /// `alpha`. Requires `T < 1`.
    pub fn for_displacement(alpha: C64, transmission: f64) -> Result<Self> {
        if !(transmission > 0.0 && transmission < 1.0) {
            return Err(Error::InvalidTransmission(transmission));
        }
        Self::new(transmission, alpha / (1.0 - transmission).sqrt())
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    pub fn gamma(&self) -> C64 {
        self.gamma
    }

    /// Displacement of the exact no-click element, `sqrt((1-T)/T) gamma`.
    pub fn effective_displacement(&self) -> C64 {
        self.gamma * ((1.0 - self.transmission) / self.transmission).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParitySign {
    Even,
    Odd,
}

/// `Q(alpha) = D(alpha)|0><0|D^dag(alpha)`, the projector onto `|alpha>`.
pub fn noclick_povm(setting: DisplacementSetting, cutoff: FockCutoff) -> Result<ModeOperator> {
    let d = displacement_matrix(setting.alpha, cutoff)?;
    let col: DVector<C64> = d.matrix().column(0).into_owned();
    ModeOperator::from_matrix(&col * col.adjoint(), cutoff)
}

/// `P(alpha) = 1 - Q(alpha)`. Completeness holds exactly by construction.
pub fn click_povm(setting: DisplacementSetting, cutoff: FockCutoff) -> Result<ModeOperator> {
    ModeOperator::identity(cutoff).sub(&noclick_povm(setting, cutoff)?)
}

/// Displaced projector onto the even or odd photon-number subspace.
pub fn parity_povm(
    setting: DisplacementSetting,
    sign: ParitySign,
    cutoff: FockCutoff,
) -> Result<ModeOperator> {
    let keep = match sign {
        ParitySign::Even => 0,
        ParitySign::Odd => 1,
    };
    let dim = cutoff.dim();
    let proj = CMatrix::from_fn(dim, dim, |r, c| {
        if r == c && r % 2 == keep {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let d = displacement_matrix(setting.alpha, cutoff)?;
    ModeOperator::from_matrix(proj, cutoff)?.conjugate_by(&d)
}

/// `Pi+(alpha) - Pi-(alpha)`, the single-mode +-1 observable.
/// Built as `D (-1)^n D^dag`, which equals the POVM difference exactly.
pub fn displaced_parity(setting: DisplacementSetting, cutoff: FockCutoff) -> Result<ModeOperator> {
    let d = displacement_matrix(setting.alpha, cutoff)?.into_matrix();
    let mut scaled = d.clone();
    for (n, mut col) in scaled.column_iter_mut().enumerate() {
        if n % 2 == 1 {
            col.neg_mut();
        }
    }
    ModeOperator::from_matrix(&scaled * d.adjoint(), cutoff)
}

/// Joint parity correlation observable built from the parity POVMs:
/// `(Pi_a+ - Pi_a-) (x) (Pi_b+ - Pi_b-)`.
pub fn displaced_parity_observable(
    a: DisplacementSetting,
    b: DisplacementSetting,
    cutoff: FockCutoff,
) -> Result<TwoModeOperator> {
    let diff = |s| parity_povm(s, ParitySign::Even, cutoff)?.sub(&parity_povm(s, ParitySign::Odd, cutoff)?);
    tensor(&diff(a)?, &diff(b)?)
}

/// Same observable as `D_a(alpha) D_b(beta) (-1)^(n_a + n_b) D_a^dag D_b^dag`,
/// assembled on the product space.
pub fn displaced_parity_observable_direct(
    a: DisplacementSetting,
    b: DisplacementSetting,
    cutoff: FockCutoff,
) -> Result<TwoModeOperator> {
    let da = displacement_matrix(a.alpha, cutoff)?;
    let db = displacement_matrix(b.alpha, cutoff)?;
    let dab = tensor(&da, &db)?.matrix().clone();
    let parity = tensor(&parity_matrix(cutoff), &parity_matrix(cutoff))?;
    let mut scaled = dab.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let s = parity.matrix()[(j, j)];
        col *= s;
    }
    TwoModeOperator::from_matrix(&scaled * dab.adjoint(), cutoff)
}

/// Exact no-click element behind a beam splitter of transmission `T` with
/// coherent ancilla `gamma`, detected mode `c = sqrt(T) a - sqrt(1-T) b`:
///
/// `E0 = D(z) (1-T)^n D^dag(z)`, `z = sqrt((1-T)/T) gamma`.
///
/// As `T -> 1` with `sqrt(1-T) gamma = alpha` fixed this tends to `Q(alpha)`.
pub fn finite_t_noclick_povm(app: ApparatusSetting, cutoff: FockCutoff) -> Result<ModeOperator> {
    let z = app.effective_displacement();
    let leak = 1.0 - app.transmission;
    let dim = cutoff.dim();
    let atten = CMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            // 0^0 = 1 at T = 1
            C64::new(leak.powi(r as i32), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let d = displacement_matrix(z, cutoff)?;
    ModeOperator::from_matrix(atten, cutoff)?.conjugate_by(&d)
}
