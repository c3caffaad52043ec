//! The one-photon states of the experiment and single-mode coherent states.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;

use crate::error::Result;
use crate::fock::{check_amplitude, ln_factorials, CMatrix, FockCutoff, TwoModeState, C64};

/// `(|1,0> - |0,1>) / sqrt(2)`: one photon split by a balanced beam splitter.
pub fn singlet_state(cutoff: FockCutoff) -> TwoModeState {
    let mut c = CMatrix::zeros(cutoff.dim(), cutoff.dim());
    c[(1, 0)] = C64::new(FRAC_1_SQRT_2, 0.0);
    c[(0, 1)] = C64::new(-FRAC_1_SQRT_2, 0.0);
    TwoModeState::pure(c, cutoff).expect("singlet state is normalized")
}

/// `(|1,0><1,0| + |0,1><0,1|) / 2`, the same two components without coherence.
pub fn incoherent_mixture(cutoff: FockCutoff) -> TwoModeState {
    let d = cutoff.two_mode_dim();
    let mut rho = CMatrix::zeros(d, d);
    for (a, b) in [(1, 0), (0, 1)] {
        let i = cutoff.index(a, b);
        rho[(i, i)] = C64::new(0.5, 0.0);
    }
    TwoModeState::mixed_unchecked(rho, cutoff)
}

/// Truncated coherent state, renormalized on the retained space.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentState {
    pub alpha: C64,
    /// renormalized amplitudes `<n|alpha>`
    pub amplitudes: DVector<C64>,
    /// squared norm of the truncated expansion before renormalization
    pub retained_norm: f64,
}

impl CoherentState {
    /// Probability mass lost beyond the cutoff.
    pub fn truncation_deficit(&self) -> f64 {
        1.0 - self.retained_norm
    }

    /// `<alpha|psi>` for a single-mode vector.
    pub fn overlap(&self, psi: &DVector<C64>) -> C64 {
        self.amplitudes.dotc(psi)
    }
}

/// `|alpha> = exp(-|alpha|^2/2) sum_n alpha^n / sqrt(n!) |n>`
pub fn coherent_state(alpha: C64, cutoff: FockCutoff) -> Result<CoherentState> {
    check_amplitude(alpha)?;
    let lnf = ln_factorials(cutoff.n_max());
    let r = alpha.norm();
    let theta = alpha.arg();
    let amps = DVector::from_fn(cutoff.dim(), |n, _| {
        if r == 0.0 {
            return if n == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        }
        let log_mag = n as f64 * r.ln() - 0.5 * lnf[n] - 0.5 * r * r;
        C64::from_polar(log_mag.exp(), n as f64 * theta)
    });
    let retained_norm = amps.norm_squared();
    let amplitudes = amps / C64::new(retained_norm.sqrt(), 0.0);
    Ok(CoherentState {
        alpha,
        amplitudes,
        retained_norm,
    })
}
