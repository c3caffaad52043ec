//! Oracle and invariant battery run by `phasebell verify`.
//!
//! Every check compares a numeric quantity against an independent reference
//! and records the worst deviation seen next to its tolerance.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};
use std::fmt::Write as _;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::bell::{self, CountBasis, OptimizeOptions, Target};
use crate::error::Result;
use crate::fock::{
    displacement_matrix, expectation, expectation_product, loss_channel, max_abs_diff, number_matrix,
    parity_matrix, FockCutoff, ModeOperator, C64,
};
use crate::measurement::{
    click_povm, displaced_parity_observable, displaced_parity_observable_direct, finite_t_noclick_povm,
    noclick_povm, parity_povm, ApparatusSetting, DisplacementSetting, ParitySign,
};
use crate::models::{AnalyticMixtureModel, AnalyticModel, CorrelationModel, NumericModel};
use crate::oracles::{self, BellSettings};
use crate::optimize;
use crate::states::{coherent_state, singlet_state};

/// Random settings per randomized check.
pub const RANDOM_POINTS: usize = 20;
/// Largest displacement modulus drawn for randomized checks.
pub const MAX_RANDOM_AMPLITUDE: f64 = 1.5;
const BATTERY_SEED: u64 = 0x5EED_B311;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// worst deviation (or the checked quantity for one-sided checks)
    pub measured: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn within(name: &'static str, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed: measured.is_finite() && measured <= tolerance,
            measured,
            tolerance,
        }
    }

    fn flag(name: &'static str, passed: bool, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed,
            measured,
            tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub cutoff: usize,
    pub model: String,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "model={} cutoff={}", self.model, self.cutoff);
        let _ = writeln!(out, "{:<width$}  {:<4}  {:>12}  {:>9}", "check", "ok", "measured", "tolerance");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<width$}  {:<4}  {:>12.3e}  {:>9.1e}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.measured,
                c.tolerance
            );
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(out, "{} checks, {} failed", self.checks.len(), failed);
        out
    }
}

/// Deterministic displacements with modulus at most `radius`.
pub fn random_amplitudes(seed: u64, count: usize, radius: f64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    (0..count)
        .map(|_| C64::from_polar(radius * u().sqrt(), 2.0 * PI * u()))
        .collect()
}

fn worst<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

/// Runs every check with `model` as the engine under test.
pub fn run_battery(cutoff: FockCutoff, model: &dyn CorrelationModel) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let zero = DisplacementSetting::zero();
    let amps = random_amplitudes(BATTERY_SEED, 2 * RANDOM_POINTS, MAX_RANDOM_AMPLITUDE);
    let pairs: Vec<(C64, C64)> = amps.chunks(2).map(|c| (c[0], c[1])).collect();
    let psi = singlet_state(cutoff);
    let id = ModeOperator::identity(cutoff);

    // fock core
    let c30 = FockCutoff::new(30)?;
    let d1 = displacement_matrix(C64::new(1.0, 0.0), c30)?;
    checks.push(CheckOutcome::within(
        "displacement-unitary-block",
        d1.adjoint().compose(&d1)?.max_abs_diff(&ModeOperator::identity(c30), 11),
        1e-10,
    ));
    let wide = FockCutoff::new(4 * FockCutoff::for_amplitude(2.0).n_max())?;
    let a2 = C64::new(1.2, -1.6);
    let comp = displacement_matrix(a2, wide)?.compose(&displacement_matrix(-a2, wide)?)?;
    checks.push(CheckOutcome::within(
        "displacement-composition",
        comp.max_abs_diff(&ModeOperator::identity(wide), wide.inner_dim()),
        1e-8,
    ));
    let p = parity_matrix(cutoff);
    checks.push(CheckOutcome::within(
        "parity-involution",
        max_abs_diff(p.compose(&p)?.matrix(), id.matrix()),
        0.0,
    ));
    let total_n = expectation_product(&psi, &number_matrix(cutoff), &id)? + expectation_product(&psi, &id, &number_matrix(cutoff))?;
    checks.push(CheckOutcome::within("singlet-photon-number", (total_n - 1.0).norm(), 1e-12));
    let lossy = loss_channel(&psi, 0.63, 0.81)?;
    checks.push(CheckOutcome::within("loss-trace", (lossy.trace() - 1.0).abs(), 1e-12));

    // measurements
    let mut herm = 0.0f64;
    let mut spectrum = 0.0f64;
    for &(a, _) in pairs.iter().take(5) {
        let s = DisplacementSetting::new(a)?;
        for e in [
            noclick_povm(s, cutoff)?,
            click_povm(s, cutoff)?,
            parity_povm(s, ParitySign::Even, cutoff)?,
            parity_povm(s, ParitySign::Odd, cutoff)?,
        ] {
            herm = herm.max(e.hermiticity_defect());
            let ev = e.block_eigenvalues(cutoff.inner_dim());
            spectrum = spectrum.max(-ev[0]).max(ev[ev.len() - 1] - 1.0);
        }
    }
    checks.push(CheckOutcome::within("povm-hermitian", herm, 1e-12));
    checks.push(CheckOutcome::within("povm-spectrum", spectrum.max(0.0), 1e-9));

    let mut qfun = 0.0f64;
    let mut qformula = 0.0f64;
    let mut marg = 0.0f64;
    for &(a, b) in &pairs {
        let qa = noclick_povm(DisplacementSetting::new(a)?, cutoff)?;
        let qb = noclick_povm(DisplacementSetting::new(b)?, cutoff)?;
        let joint = expectation_product(&psi, &qa, &qb)?.re;
        let ca = coherent_state(a, cutoff)?;
        let cb = coherent_state(b, cutoff)?;
        let overlap = psi
            .amplitudes()
            .expect("pure")
            .iter()
            .enumerate()
            .map(|(i, c)| {
                // column-major storage: i = n_a + dim * n_b
                let (na, nb) = (i % cutoff.dim(), i / cutoff.dim());
                ca.amplitudes[na].conj() * cb.amplitudes[nb].conj() * c
            })
            .sum::<C64>();
        qfun = qfun.max((joint - overlap.norm_sqr()).abs());
        qformula = qformula.max((joint - oracles::q_joint(a, b)).abs());
        marg = marg
            .max((expectation_product(&psi, &qa, &id)?.re - oracles::q_single(a)).abs())
            .max((expectation_product(&psi, &id, &qb)?.re - oracles::q_single(b)).abs());
    }
    checks.push(CheckOutcome::within("q-function-overlap", qfun, 1e-9));
    checks.push(CheckOutcome::within("q-joint-closed-form", qformula, 1e-9));
    checks.push(CheckOutcome::within("q-marginals", marg, 1e-9));

    let basis = worst(
        pairs
            .iter()
            .map(|&(a, b)| -> Result<f64> {
                let s = BellSettings::new(a, b)?;
                let q = bell::ch_combination(&s, model, CountBasis::NoClick)?.value;
                let p = bell::ch_combination(&s, model, CountBasis::Click)?.value;
                Ok((q - p).abs())
            })
            .collect::<Result<Vec<_>>>()?,
    );
    checks.push(CheckOutcome::within("ch-click-basis", basis, 1e-10));

    // the product-space construction is cubic in (n_max+1)^2; keep it small
    let small = FockCutoff::new(cutoff.n_max().min(20))?;
    let (a, b) = pairs[0];
    let (sa, sb) = (DisplacementSetting::new(a)?, DisplacementSetting::new(b)?);
    let via_povm = displaced_parity_observable(sa, sb, small)?;
    let via_displacement = displaced_parity_observable_direct(sa, sb, small)?;
    checks.push(CheckOutcome::within(
        "parity-constructions",
        max_abs_diff(via_povm.matrix(), via_displacement.matrix()),
        1e-9,
    ));
    let full = displaced_parity_observable(zero, zero, small)?;
    checks.push(CheckOutcome::within(
        "parity-origin",
        (expectation(&singlet_state(small), &full)? + 1.0).norm(),
        1e-12,
    ));
    let pi = worst(
        pairs
            .iter()
            .map(|&(a, b)| Ok((model.parity_joint(a, b)? - oracles::pi_joint(a, b)).abs()))
            .collect::<Result<Vec<_>>>()?,
    );
    checks.push(CheckOutcome::within("parity-closed-form", pi, 1e-8));

    // Bell combinations against the closed forms
    let js = optimize::linspace(0.0, 2.0, 21);
    let phis = optimize::linspace(0.0, PI, 16);
    let mut ch_dev = 0.0f64;
    let mut b_dev = 0.0f64;
    for &j in &js {
        for &phi in &phis {
            ch_dev = ch_dev.max((bell::evaluate_at(Target::Ch, j, phi, model)? - oracles::ch_closed_form(j, phi)).abs());
            b_dev = b_dev.max((bell::evaluate_at(Target::B, j, phi, model)? - oracles::b_closed_form(j, phi)).abs());
        }
    }
    checks.push(CheckOutcome::within("ch-model-vs-closed-form", ch_dev, 1e-8));
    checks.push(CheckOutcome::within("b-model-vs-closed-form", b_dev, 1e-8));

    let crossing = bell::locate_bound_crossing(Target::Ch, FRAC_PI_2, 0.5, 1.0, &AnalyticModel, 1e-13)?;
    checks.push(CheckOutcome::within("ch-bound-crossing", (crossing - LN_2).abs(), 1e-9));

    let opts = OptimizeOptions::default();
    for (name_j, name_v, target, hi) in [
        ("ch-optimum-location", "ch-optimum-value", Target::Ch, LN_2),
        ("b-optimum-location", "b-optimum-value", Target::B, 0.5),
    ] {
        let report = bell::optimize_violation(target, (0.0, hi), &AnalyticModel, &opts)?;
        let brute = optimize::dense_grid(
            |j| Ok(match target {
                Target::Ch => oracles::ch_closed_form(j, FRAC_PI_2),
                Target::B => oracles::b_closed_form(j, FRAC_PI_2),
            }),
            0.0,
            hi,
            1e-6,
            target.goal(),
        )?;
        checks.push(CheckOutcome::within(name_j, (report.j_star - brute.x).abs(), 1e-6));
        checks.push(CheckOutcome::within(name_v, (report.value_star - brute.value).abs(), 1e-9));
    }

    // incoherent mixture
    let mixture = NumericModel::mixture(cutoff);
    let mix_dev = worst(
        pairs
            .iter()
            .map(|&(a, b)| Ok((mixture.parity_joint(a, b)? - oracles::pi_joint_mixture(a, b)).abs()))
            .collect::<Result<Vec<_>>>()?,
    );
    checks.push(CheckOutcome::within("mixture-correlation", mix_dev, 1e-9));
    let rows = bell::scan(
        Target::B,
        &bell::Axis::new(0.0, 2.0, 201)?,
        &bell::Axis::new(0.0, PI, 315)?,
        &AnalyticMixtureModel,
    )?;
    let max_b = worst(rows.iter().map(|r| r.value.abs()));
    checks.push(CheckOutcome::flag("mixture-no-violation", max_b <= 2.0, max_b, 2.0));

    // apparatus limit
    let devs = finite_t_deviations(C64::new(1.0, 0.0), &[0.9, 0.99, 0.999], FockCutoff::new(64)?)?;
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    checks.push(CheckOutcome::flag(
        "finite-t-convergence",
        decreasing && devs[2] < 0.01,
        devs[2],
        0.01,
    ));

    // Monte Carlo sanity at a modest shot count
    let settings = BellSettings::from_intensity_phase(0.26, FRAC_PI_2)?;
    let dists = crate::sim::outcome_distributions(&psi, &settings, Target::Ch)?;
    let norm = worst(dists.iter().map(|d| (d.iter().sum::<f64>() - 1.0).abs()));
    checks.push(CheckOutcome::within("outcome-normalization", norm, 1e-9));

    Ok(VerifyReport {
        cutoff: cutoff.n_max(),
        model: model.name().to_string(),
        checks,
    })
}

/// Largest inner-block deviation of the finite-`T` no-click element from
/// `Q(alpha)`, for each `T`, with `gamma = alpha / sqrt(1-T)`.
pub fn finite_t_deviations(alpha: C64, transmissions: &[f64], cutoff: FockCutoff) -> Result<Vec<f64>> {
    let q = noclick_povm(DisplacementSetting::new(alpha)?, cutoff)?;
    transmissions
        .iter()
        .map(|&t| {
            let e = finite_t_noclick_povm(ApparatusSetting::for_displacement(alpha, t)?, cutoff)?;
            Ok(e.max_abs_diff(&q, cutoff.inner_dim()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_amplitudes_are_bounded_and_reproducible() {
        let a = random_amplitudes(3, 50, 1.5);
        assert_eq!(a, random_amplitudes(3, 50, 1.5));
        assert!(a.iter().all(|z| z.norm() <= 1.5));
        assert!(a.iter().any(|z| z.norm() > 1.0));
    }

    #[test]
    fn amplitude_storage_order() {
        // the overlap check walks the amplitude table in storage order
        let c = FockCutoff::new(3).unwrap();
        let psi = singlet_state(c);
        let amps = psi.amplitudes().unwrap();
        let (i, _) = amps.iter().enumerate().find(|(_, x)| x.re > 0.0).unwrap();
        assert_eq!((i % c.dim(), i / c.dim()), (1, 0));
    }

    #[test]
    fn battery_passes_for_numeric_model() {
        let c = FockCutoff::new(32).unwrap();
        let report = run_battery(c, &NumericModel::singlet(c)).unwrap();
        assert!(report.all_passed(), "{}", report.render_table());
    }

    #[test]
    fn finite_t_sequence_decreases() {
        let d = finite_t_deviations(C64::new(1.0, 0.0), &[0.9, 0.99, 0.999], FockCutoff::new(64).unwrap()).unwrap();
        assert!(d[0] > d[1] && d[1] > d[2] && d[2] < 0.01, "{d:?}");
    }
}
