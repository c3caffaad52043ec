//! Truncated Fock-space linear algebra for one and two bosonic modes.
//!
//! Single-mode operators are `(n_max+1) x (n_max+1)` complex matrices in the
//! number basis `|0>, .., |n_max>`. Two-mode objects live on the product space
//! with row-major ordering: basis index `n_a * (n_max+1) + n_b`, mode `a` being
//! the slow index. Both modes always share one cutoff.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Highest retained photon number per mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FockCutoff {
    n_max: usize,
}

impl FockCutoff {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidCutoff(n_max));
        }
        Ok(Self { n_max })
    }

    /// Default cutoff for displacements up to `max_amplitude` in modulus:
    /// `ceil(a^2 + 8a + 10)`, never below 16.
    pub fn for_amplitude(max_amplitude: f64) -> Self {
        let a = max_amplitude.abs();
        let n = (a * a + 8.0 * a + 10.0).ceil() as usize;
        Self { n_max: n.max(16) }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Single-mode Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn two_mode_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    /// Size of the inner block (indices `<= n_max / 2`) on which truncation
    /// artefacts are checked.
    pub fn inner_dim(&self) -> usize {
        self.n_max / 2 + 1
    }

    /// Product-space index of `|n_a, n_b>`.
    pub fn index(&self, n_a: usize, n_b: usize) -> usize {
        n_a * self.dim() + n_b
    }

    fn check_same(&self, other: &FockCutoff) -> Result<()> {
        if self.n_max != other.n_max {
            return Err(Error::CutoffMismatch {
                left: self.n_max,
                right: other.n_max,
            });
        }
        Ok(())
    }
}

/// Operator on a single truncated mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    matrix: CMatrix,
    cutoff: FockCutoff,
}

impl ModeOperator {
    pub fn from_matrix(matrix: CMatrix, cutoff: FockCutoff) -> Result<Self> {
        if matrix.nrows() != cutoff.dim() || matrix.ncols() != cutoff.dim() {
            return Err(Error::InvalidState(format!(
                "mode operator must be {0}x{0}, got {1}x{2}",
                cutoff.dim(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, cutoff })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix, cutoff: FockCutoff) -> Self {
        debug_assert_eq!(matrix.nrows(), cutoff.dim());
        Self { matrix, cutoff }
    }

    pub fn identity(cutoff: FockCutoff) -> Self {
        Self::from_matrix_unchecked(CMatrix::identity(cutoff.dim(), cutoff.dim()), cutoff)
    }

    /// `|n><n|`
    pub fn number_projector(n: usize, cutoff: FockCutoff) -> Self {
        let mut m = CMatrix::zeros(cutoff.dim(), cutoff.dim());
        if n < cutoff.dim() {
            m[(n, n)] = ONE;
        }
        Self::from_matrix_unchecked(m, cutoff)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn adjoint(&self) -> Self {
        Self::from_matrix_unchecked(self.matrix.adjoint(), self.cutoff)
    }

    pub fn compose(&self, rhs: &ModeOperator) -> Result<Self> {
        self.cutoff.check_same(&rhs.cutoff)?;
        Ok(Self::from_matrix_unchecked(&self.matrix * &rhs.matrix, self.cutoff))
    }

    pub fn add(&self, rhs: &ModeOperator) -> Result<Self> {
        self.cutoff.check_same(&rhs.cutoff)?;
        Ok(Self::from_matrix_unchecked(&self.matrix + &rhs.matrix, self.cutoff))
    }

    pub fn sub(&self, rhs: &ModeOperator) -> Result<Self> {
        self.cutoff.check_same(&rhs.cutoff)?;
        Ok(Self::from_matrix_unchecked(&self.matrix - &rhs.matrix, self.cutoff))
    }

    /// `U X U^dagger`
    pub fn conjugate_by(&self, unitary: &ModeOperator) -> Result<Self> {
        self.cutoff.check_same(&unitary.cutoff)?;
        Ok(Self::from_matrix_unchecked(
            &unitary.matrix * &self.matrix * unitary.matrix.adjoint(),
            self.cutoff,
        ))
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Leading `size x size` sub-block.
    pub fn inner_block(&self, size: usize) -> CMatrix {
        let size = size.min(self.cutoff.dim());
        self.matrix.view((0, 0), (size, size)).into_owned()
    }

    /// Largest elementwise deviation from `other` on the leading `size` block.
    pub fn max_abs_diff(&self, other: &ModeOperator, size: usize) -> f64 {
        max_abs_diff(&self.inner_block(size), &other.inner_block(size))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    /// Ascending eigenvalues of the Hermitian part of the leading block.
    pub fn block_eigenvalues(&self, size: usize) -> Vec<f64> {
        hermitian_eigenvalues(&self.inner_block(size))
    }
}

/// Operator on the two-mode product space.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeOperator {
    matrix: CMatrix,
    cutoff: FockCutoff,
}

impl TwoModeOperator {
    pub fn from_matrix(matrix: CMatrix, cutoff: FockCutoff) -> Result<Self> {
        let d = cutoff.two_mode_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidState(format!(
                "two-mode operator must be {d}x{d}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, cutoff })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix, cutoff: FockCutoff) -> Self {
        Self { matrix, cutoff }
    }

    pub fn identity(cutoff: FockCutoff) -> Self {
        let d = cutoff.two_mode_dim();
        Self::from_matrix_unchecked(CMatrix::identity(d, d), cutoff)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn adjoint(&self) -> Self {
        Self::from_matrix_unchecked(self.matrix.adjoint(), self.cutoff)
    }

    pub fn add(&self, rhs: &TwoModeOperator) -> Result<Self> {
        self.cutoff.check_same(&rhs.cutoff)?;
        Ok(Self::from_matrix_unchecked(&self.matrix + &rhs.matrix, self.cutoff))
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::from_matrix_unchecked(&self.matrix * factor, self.cutoff)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Element `<m_a, m_b| O |n_a, n_b>`.
    pub fn element(&self, row: (usize, usize), col: (usize, usize)) -> C64 {
        self.matrix[(
            self.cutoff.index(row.0, row.1),
            self.cutoff.index(col.0, col.1),
        )]
    }

    /// Restriction to basis states with both photon numbers below `size`.
    pub fn inner_block(&self, size: usize) -> CMatrix {
        let size = size.min(self.cutoff.dim());
        let idx: Vec<usize> = (0..size)
            .flat_map(|a| (0..size).map(move |b| (a, b)))
            .map(|(a, b)| self.cutoff.index(a, b))
            .collect();
        CMatrix::from_fn(idx.len(), idx.len(), |r, c| self.matrix[(idx[r], idx[c])])
    }

    pub fn max_abs_diff(&self, other: &TwoModeOperator, size: usize) -> f64 {
        max_abs_diff(&self.inner_block(size), &other.inner_block(size))
    }

    pub fn block_eigenvalues(&self, size: usize) -> Vec<f64> {
        hermitian_eigenvalues(&self.inner_block(size))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Pure,
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
enum StateRepr {
    /// `c[(n_a, n_b)]`
    Pure(CMatrix),
    /// density matrix in the product basis, plus its nonzero entries as
    /// `((n_a, n_b, m_a, m_b), value)` for `<n_a n_b| rho |m_a m_b>`
    Mixed(CMatrix, Vec<([usize; 4], C64)>),
}

/// Two-mode state, pure (amplitude table) or mixed (density operator).
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeState {
    repr: StateRepr,
    cutoff: FockCutoff,
}

const NORM_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

impl TwoModeState {
    /// Pure state from the amplitude table `c[(n_a, n_b)]`, which must be
    /// normalized.
    pub fn pure(amplitudes: CMatrix, cutoff: FockCutoff) -> Result<Self> {
        if amplitudes.nrows() != cutoff.dim() || amplitudes.ncols() != cutoff.dim() {
            return Err(Error::InvalidState(format!(
                "amplitude table must be {0}x{0}",
                cutoff.dim()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("norm {norm} != 1")));
        }
        Ok(Self {
            repr: StateRepr::Pure(amplitudes),
            cutoff,
        })
    }

    /// Mixed state; checks Hermiticity, unit trace and positivity.
    pub fn mixed(density: CMatrix, cutoff: FockCutoff) -> Result<Self> {
        let d = cutoff.two_mode_dim();
        if density.nrows() != d || density.ncols() != d {
            return Err(Error::InvalidState(format!("density matrix must be {d}x{d}")));
        }
        if max_abs_diff(&density, &density.adjoint()) > NORM_TOL {
            return Err(Error::InvalidState("density matrix not Hermitian".into()));
        }
        let tr = density.trace();
        if (tr - ONE).norm() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let smallest = hermitian_eigenvalues(&density)
            .first()
            .copied()
            .unwrap_or(0.0);
        if smallest < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix has eigenvalue {smallest}"
            )));
        }
        Ok(Self::mixed_unchecked(density, cutoff))
    }

    /// Density matrices produced by trace-preserving constructions skip the
    /// eigenvalue check.
    pub(crate) fn mixed_unchecked(density: CMatrix, cutoff: FockCutoff) -> Self {
        let d = cutoff.dim();
        let mut entries = Vec::new();
        for (c, col) in density.column_iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                if v != ZERO {
                    entries.push(([r / d, r % d, c / d, c % d], v));
                }
            }
        }
        Self {
            repr: StateRepr::Mixed(density, entries),
            cutoff,
        }
    }

    /// `|n_a, n_b>`
    pub fn basis(n_a: usize, n_b: usize, cutoff: FockCutoff) -> Result<Self> {
        if n_a > cutoff.n_max() || n_b > cutoff.n_max() {
            return Err(Error::InvalidState(format!(
                "|{n_a},{n_b}> outside cutoff {}",
                cutoff.n_max()
            )));
        }
        let mut c = CMatrix::zeros(cutoff.dim(), cutoff.dim());
        c[(n_a, n_b)] = ONE;
        Ok(Self {
            repr: StateRepr::Pure(c),
            cutoff,
        })
    }

    pub fn kind(&self) -> StateKind {
        match self.repr {
            StateRepr::Pure(_) => StateKind::Pure,
            StateRepr::Mixed(..) => StateKind::Mixed,
        }
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    /// Amplitude `c_{n_a n_b}`; `None` for mixed states.
    pub fn amplitude(&self, n_a: usize, n_b: usize) -> Option<C64> {
        match &self.repr {
            StateRepr::Pure(c) => Some(c[(n_a, n_b)]),
            StateRepr::Mixed(..) => None,
        }
    }

    pub fn amplitudes(&self) -> Option<&CMatrix> {
        match &self.repr {
            StateRepr::Pure(c) => Some(c),
            StateRepr::Mixed(..) => None,
        }
    }

    /// Product-basis state vector for pure states.
    pub fn state_vector(&self) -> Option<nalgebra::DVector<C64>> {
        let c = self.amplitudes()?;
        let d = self.cutoff.dim();
        Some(nalgebra::DVector::from_fn(d * d, |i, _| c[(i / d, i % d)]))
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.repr {
            StateRepr::Pure(_) => {
                let v = self.state_vector().expect("pure");
                &v * v.adjoint()
            }
            StateRepr::Mixed(rho, _) => rho.clone(),
        }
    }

    /// Element `<m_a, m_b| rho |n_a, n_b>`.
    pub fn density_element(&self, row: (usize, usize), col: (usize, usize)) -> C64 {
        match &self.repr {
            StateRepr::Pure(c) => c[row] * c[col].conj(),
            StateRepr::Mixed(rho, _) => {
                rho[(self.cutoff.index(row.0, row.1), self.cutoff.index(col.0, col.1))]
            }
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            StateRepr::Pure(c) => c.iter().map(|x| x.norm_sqr()).sum(),
            StateRepr::Mixed(rho, _) => rho.trace().re,
        }
    }

    /// Largest photon number (in either mode) carrying diagonal weight above
    /// `tol`.
    pub fn photon_support(&self, tol: f64) -> usize {
        let d = self.cutoff.dim();
        let mut support = 0;
        for a in 0..d {
            for b in 0..d {
                if self.density_element((a, b), (a, b)).re > tol {
                    support = support.max(a).max(b);
                }
            }
        }
        support
    }
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub(crate) fn check_amplitude(alpha: C64) -> Result<()> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::NonFiniteAmplitude {
            re: alpha.re,
            im: alpha.im,
        });
    }
    Ok(())
}

/// `ln n!` for `n = 0..=n_max`.
pub(crate) fn ln_factorials(n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n_max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Associated Laguerre polynomials `L_j^{(k)}(x)` for `j = 0..=n` by the
/// three-term recurrence.
fn laguerre_sequence(n: usize, k: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    let k = k as f64;
    out.push(1.0);
    if n == 0 {
        return;
    }
    out.push(1.0 + k - x);
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * out[j] - (jf + k) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
}

/// Matrix of `<m| D(alpha) |n>` on the truncated space.
///
/// For `m >= n` the element is
/// `sqrt(n!/m!) alpha^(m-n) exp(-|alpha|^2/2) L_n^(m-n)(|alpha|^2)`; the prefactor
/// is assembled in log space. Elements above the diagonal follow from
/// `<m|D(alpha)|n> = conj(<n|D(-alpha)|m>)`.
pub fn displacement_matrix(alpha: C64, cutoff: FockCutoff) -> Result<ModeOperator> {
    check_amplitude(alpha)?;
    let dim = cutoff.dim();
    let mut m = CMatrix::zeros(dim, dim);
    let r = alpha.norm();
    if r == 0.0 {
        return Ok(ModeOperator::identity(cutoff));
    }
    let x = r * r;
    let ln_r = r.ln();
    let theta = alpha.arg();
    let lnf = ln_factorials(cutoff.n_max());
    let mut lag = Vec::with_capacity(dim);

    // Fixed offset k = row - col >= 0 along each sub-diagonal.
    for k in 0..dim {
        let len = dim - k;
        laguerre_sequence(len - 1, k, x, &mut lag);
        let phase_lower = C64::from_polar(1.0, k as f64 * theta);
        // (-alpha)^k conjugated: conj((-1)^k e^{ik theta}) = (-1)^k e^{-ik theta}
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let phase_upper = C64::from_polar(sign, -(k as f64) * theta);
        for n in 0..len {
            let row = n + k;
            let log_mag = 0.5 * (lnf[n] - lnf[row]) + k as f64 * ln_r - 0.5 * x;
            let mag = log_mag.exp() * lag[n];
            m[(row, n)] = phase_lower * mag;
            if k > 0 {
                m[(n, row)] = phase_upper * mag;
            }
        }
    }
    Ok(ModeOperator::from_matrix_unchecked(m, cutoff))
}

/// Photon-number parity `(-1)^n`.
pub fn parity_matrix(cutoff: FockCutoff) -> ModeOperator {
    let d = cutoff.dim();
    let m = CMatrix::from_fn(d, d, |r, c| {
        if r != c {
            ZERO
        } else if r % 2 == 0 {
            ONE
        } else {
            -ONE
        }
    });
    ModeOperator::from_matrix_unchecked(m, cutoff)
}

/// Number operator `n`.
pub fn number_matrix(cutoff: FockCutoff) -> ModeOperator {
    let d = cutoff.dim();
    let m = CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::new(r as f64, 0.0)
        } else {
            ZERO
        }
    });
    ModeOperator::from_matrix_unchecked(m, cutoff)
}

/// Kronecker product `a (x) b` in the row-major `(n_a, n_b)` basis.
pub fn tensor(a: &ModeOperator, b: &ModeOperator) -> Result<TwoModeOperator> {
    a.cutoff.check_same(&b.cutoff)?;
    Ok(TwoModeOperator::from_matrix_unchecked(
        a.matrix.kronecker(&b.matrix),
        a.cutoff,
    ))
}

/// `<psi|O|psi>` for pure states, `Tr[rho O]` for mixed ones.
pub fn expectation(state: &TwoModeState, obs: &TwoModeOperator) -> Result<C64> {
    state.cutoff.check_same(&obs.cutoff)?;
    match &state.repr {
        StateRepr::Pure(_) => {
            let v = state.state_vector().expect("pure");
            let ov = &obs.matrix * &v;
            Ok(v.dotc(&ov))
        }
        StateRepr::Mixed(rho, _) => Ok((rho * &obs.matrix).trace()),
    }
}

/// `<a (x) b>` without materializing the product-space operator.
pub fn expectation_product(state: &TwoModeState, a: &ModeOperator, b: &ModeOperator) -> Result<C64> {
    state.cutoff.check_same(&a.cutoff)?;
    state.cutoff.check_same(&b.cutoff)?;
    match &state.repr {
        StateRepr::Pure(c) => {
            // (a (x) b)|psi> has amplitude table a C b^T
            let transformed = &a.matrix * c * b.matrix.transpose();
            Ok(c.iter().zip(transformed.iter()).map(|(x, y)| x.conj() * y).sum())
        }
        StateRepr::Mixed(_, entries) => {
            // Tr[rho (a (x) b)] = sum rho[(i,j),(k,l)] a[k,i] b[l,j]
            Ok(entries
                .iter()
                .map(|&([i, j, k, l], v)| v * a.matrix[(k, i)] * b.matrix[(l, j)])
                .sum())
        }
    }
}

/// `sqrt(C(n,k) eta^(n-k) (1-eta)^k)`, the pure-loss Kraus weight that maps
/// `|n>` to `|n-k>`.
fn kraus_weight(n: usize, k: usize, eta: f64, lnf: &[f64]) -> f64 {
    if k > n {
        return 0.0;
    }
    if eta == 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if eta == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln_binom = lnf[n] - lnf[k] - lnf[n - k];
    (0.5 * (ln_binom + (n - k) as f64 * eta.ln() + k as f64 * (1.0 - eta).ln())).exp()
}

#[derive(Clone, Copy)]
enum Mode {
    A,
    B,
}

fn apply_loss_one_mode(rho: &CMatrix, eta: f64, mode: Mode, cutoff: FockCutoff) -> CMatrix {
    let d = cutoff.dim();
    let lnf = ln_factorials(cutoff.n_max());
    let weights: Vec<Vec<f64>> = (0..d)
        .map(|n| (0..d).map(|k| kraus_weight(n, k, eta, &lnf)).collect())
        .collect();
    let split = |idx: usize| (idx / d, idx % d);
    let mut out = CMatrix::zeros(d * d, d * d);
    for r in 0..d * d {
        let (ra, rb) = split(r);
        for c in 0..d * d {
            let (ca, cb) = split(c);
            let (rn, cn) = match mode {
                Mode::A => (ra, ca),
                Mode::B => (rb, cb),
            };
            let mut acc = ZERO;
            for k in 0..d {
                if rn + k >= d || cn + k >= d {
                    break;
                }
                let w = weights[rn + k][k] * weights[cn + k][k];
                if w == 0.0 {
                    continue;
                }
                let (src_r, src_c) = match mode {
                    Mode::A => (cutoff.index(ra + k, rb), cutoff.index(ca + k, cb)),
                    Mode::B => (cutoff.index(ra, rb + k), cutoff.index(ca, cb + k)),
                };
                acc += rho[(src_r, src_c)] * w;
            }
            out[(r, c)] = acc;
        }
    }
    out
}

/// Independent pure-loss channels with transmissivities `eta_a`, `eta_b`.
/// The output is always a mixed state.
pub fn loss_channel(state: &TwoModeState, eta_a: f64, eta_b: f64) -> Result<TwoModeState> {
    for eta in [eta_a, eta_b] {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidEfficiency(eta));
        }
    }
    let cutoff = state.cutoff;
    let rho = state.density_matrix();
    let rho = apply_loss_one_mode(&rho, eta_a, Mode::A, cutoff);
    let rho = apply_loss_one_mode(&rho, eta_b, Mode::B, cutoff);
    Ok(TwoModeState::mixed_unchecked(rho, cutoff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cut(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    /// exp(alpha a^dag - alpha^* a) by Taylor series on a larger space.
    fn displacement_by_series(alpha: C64, big: usize) -> CMatrix {
        let d = big + 1;
        let mut gen = CMatrix::zeros(d, d);
        for n in 0..big {
            let s = ((n + 1) as f64).sqrt();
            gen[(n + 1, n)] += alpha * s;
            gen[(n, n + 1)] -= alpha.conj() * s;
        }
        // scaling and squaring: exp(G) = exp(G / 2^s)^(2^s)
        let squarings = 8;
        let small = gen / C64::new(f64::powi(2.0, squarings), 0.0);
        let mut term = CMatrix::identity(d, d);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &small / C64::new(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn cutoff_rules() {
        assert!(FockCutoff::new(0).is_err());
        assert_eq!(FockCutoff::for_amplitude(0.0).n_max(), 16);
        assert_eq!(FockCutoff::for_amplitude(2.0).n_max(), 30);
        assert_eq!(cut(4).index(1, 0), 5);
    }

    #[test]
    fn displacement_zero_is_identity() {
        let d = displacement_matrix(C64::new(0.0, 0.0), cut(8)).unwrap();
        assert_eq!(d, ModeOperator::identity(cut(8)));
    }

    #[test]
    fn displacement_vacuum_element() {
        let d = displacement_matrix(C64::new(1.0, 0.0), cut(10)).unwrap();
        assert_abs_diff_eq!(d.matrix()[(0, 0)].re, (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.matrix()[(0, 0)].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn displacement_rejects_non_finite() {
        assert!(displacement_matrix(C64::new(f64::NAN, 0.0), cut(4)).is_err());
        assert!(displacement_matrix(C64::new(0.0, f64::INFINITY), cut(4)).is_err());
    }

    #[test]
    fn displacement_inner_block_unitary() {
        let d = displacement_matrix(C64::new(1.0, 0.0), cut(30)).unwrap();
        let ddag = d.adjoint().compose(&d).unwrap();
        let dev = ddag.max_abs_diff(&ModeOperator::identity(cut(30)), 11);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn displacement_matches_series_oracle() {
        for alpha in [C64::new(0.7, -0.4), C64::new(-1.3, 0.9), C64::new(0.0, 2.0)] {
            let closed = displacement_matrix(alpha, cut(40)).unwrap();
            let series = displacement_by_series(alpha, 80);
            let block = closed.inner_block(15);
            let dev = max_abs_diff(&block, &series.view((0, 0), (15, 15)).into_owned());
            assert!(dev < 1e-12, "alpha={alpha} dev={dev}");
        }
    }

    #[test]
    fn displacement_composition_and_large_cutoff() {
        // The half-size block needs room for the displaced rows to spread:
        // four times the default cutoff.
        for alpha in [C64::new(0.5, 0.0), C64::new(1.2, -0.8), C64::new(0.0, 2.0)] {
            let c = cut(4 * FockCutoff::for_amplitude(alpha.norm()).n_max());
            let plus = displacement_matrix(alpha, c).unwrap();
            let minus = displacement_matrix(-alpha, c).unwrap();
            let id = ModeOperator::identity(c);
            assert!(plus.compose(&minus).unwrap().max_abs_diff(&id, c.inner_dim()) < 1e-8);
            assert!(plus.adjoint().compose(&plus).unwrap().max_abs_diff(&id, c.inner_dim()) < 1e-8);
        }
        // log-space prefactors keep large cutoffs finite
        let big = displacement_matrix(C64::new(1.5, 0.5), cut(400)).unwrap();
        assert!(big.matrix().iter().all(|x| x.re.is_finite() && x.im.is_finite()));
        let u = big.adjoint().compose(&big).unwrap();
        assert!(u.max_abs_diff(&ModeOperator::identity(cut(400)), 100) < 1e-8);
    }

    #[test]
    fn parity_is_involution() {
        let p = parity_matrix(cut(7));
        assert_eq!(p.matrix()[(0, 0)], ONE);
        assert_eq!(p.matrix()[(1, 1)], -ONE);
        assert_eq!(p.compose(&p).unwrap(), ModeOperator::identity(cut(7)));
    }

    #[test]
    fn tensor_basics() {
        let c = cut(3);
        let id = tensor(&ModeOperator::identity(c), &ModeOperator::identity(c)).unwrap();
        assert_eq!(id, TwoModeOperator::identity(c));
        let pp = tensor(&parity_matrix(c), &parity_matrix(c)).unwrap();
        assert_eq!(pp.element((1, 0), (1, 0)), -ONE);
        assert!(tensor(&ModeOperator::identity(c), &ModeOperator::identity(cut(4))).is_err());
    }

    #[test]
    fn tensor_trace_factorizes() {
        let c = cut(4);
        let a = CMatrix::from_fn(5, 5, |r, k| C64::new((r + 2 * k) as f64 * 0.1, r as f64 - k as f64));
        let b = CMatrix::from_fn(5, 5, |r, k| C64::new(1.0 / (1 + r + k) as f64, 0.3 * (k as f64 - r as f64)));
        let ha = ModeOperator::from_matrix(&a + a.adjoint(), c).unwrap();
        let hb = ModeOperator::from_matrix(&b + b.adjoint(), c).unwrap();
        let t = tensor(&ha, &hb).unwrap();
        assert_abs_diff_eq!((t.trace() - ha.trace() * hb.trace()).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn product_expectation_matches_full_operator() {
        let c = cut(5);
        let mut amp = CMatrix::zeros(6, 6);
        amp[(1, 0)] = C64::new(0.6, 0.0);
        amp[(0, 2)] = C64::new(0.0, 0.8);
        let psi = TwoModeState::pure(amp, c).unwrap();
        let a = displacement_matrix(C64::new(0.3, 0.1), c).unwrap();
        let b = number_matrix(c);
        let full = expectation(&psi, &tensor(&a, &b).unwrap()).unwrap();
        let fast = expectation_product(&psi, &a, &b).unwrap();
        assert_abs_diff_eq!((full - fast).norm(), 0.0, epsilon = 1e-13);

        let lossy = loss_channel(&psi, 0.8, 0.6).unwrap();
        let full = expectation(&lossy, &tensor(&a, &b).unwrap()).unwrap();
        let fast = expectation_product(&lossy, &a, &b).unwrap();
        assert_abs_diff_eq!((full - fast).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn pure_state_validation() {
        let c = cut(2);
        assert!(TwoModeState::pure(CMatrix::zeros(3, 3), c).is_err());
        assert!(TwoModeState::pure(CMatrix::zeros(2, 2), c).is_err());
        assert!(TwoModeState::basis(3, 0, c).is_err());
        let s = TwoModeState::basis(1, 2, c).unwrap();
        assert_eq!(s.photon_support(1e-12), 2);
    }

    #[test]
    fn mixed_state_validation() {
        let c = cut(1);
        let mut rho = CMatrix::zeros(4, 4);
        rho[(0, 0)] = C64::new(1.5, 0.0);
        rho[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(TwoModeState::mixed(rho.clone(), c).is_err());
        rho[(0, 0)] = C64::new(0.5, 0.0);
        rho[(1, 1)] = C64::new(0.5, 0.0);
        assert!(TwoModeState::mixed(rho.clone(), c).is_ok());
        rho[(0, 1)] = C64::new(0.0, 0.1);
        assert!(TwoModeState::mixed(rho, c).is_err());
    }

    #[test]
    fn loss_channel_edges() {
        let c = cut(3);
        let psi = TwoModeState::basis(2, 1, c).unwrap();
        let same = loss_channel(&psi, 1.0, 1.0).unwrap();
        assert!(max_abs_diff(&same.density_matrix(), &psi.density_matrix()) < 1e-15);
        let vac = loss_channel(&psi, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(vac.density_element((0, 0), (0, 0)).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vac.trace(), 1.0, epsilon = 1e-15);
        assert!(loss_channel(&psi, 1.1, 0.5).is_err());
        assert!(loss_channel(&psi, 0.5, -0.1).is_err());
    }

    #[test]
    fn loss_channel_binomial_populations() {
        // |2,0> through eta: populations eta^2, 2 eta (1-eta), (1-eta)^2
        let c = cut(3);
        let eta = 0.7;
        let out = loss_channel(&TwoModeState::basis(2, 0, c).unwrap(), eta, 1.0).unwrap();
        let pop = |n| out.density_element((n, 0), (n, 0)).re;
        assert_abs_diff_eq!(pop(2), eta * eta, epsilon = 1e-14);
        assert_abs_diff_eq!(pop(1), 2.0 * eta * (1.0 - eta), epsilon = 1e-14);
        assert_abs_diff_eq!(pop(0), (1.0 - eta) * (1.0 - eta), epsilon = 1e-14);
    }
}
