//! Bell combinations built from a correlation model, parameter scans and
//! violation search.
//!
//! Each apparatus uses two settings: no displacement, or `alpha` (mode a) /
//! `beta` (mode b). The CH combination of no-click probabilities obeys
//! `0 <= CH <= 1` for local theories; the CHSH-type sum `B` of parity
//! correlations obeys `|B| <= 2`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::C64;
use crate::models::CorrelationModel;
use crate::optimize::{self, Goal};
use crate::oracles::BellSettings;

/// Slack added to the local bounds before flagging a violation.
pub const BOUND_SLACK: f64 = 1e-12;

pub const CH_UPPER: f64 = 1.0;
pub const CH_LOWER: f64 = 0.0;
pub const B_BOUND: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Ch,
    B,
}

impl Target {
    /// Direction in which the combination violates its local bound.
    pub fn goal(self) -> Goal {
        match self {
            Target::Ch => Goal::Maximize,
            Target::B => Goal::Minimize,
        }
    }

    /// The local bound that the violation crosses: `CH = 1`, `B = -2`.
    pub fn violated_bound(self) -> f64 {
        match self {
            Target::Ch => CH_UPPER,
            Target::B => -B_BOUND,
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ch" => Ok(Target::Ch),
            "b" | "chsh" => Ok(Target::B),
            _ => Err(Error::Unknown {
                kind: "target",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Ch => "ch",
            Target::B => "b",
        })
    }
}

/// Which detector event the CH probabilities count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountBasis {
    NoClick,
    Click,
}

/// The six CH terms, in the event basis of the enclosing result.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChComponents {
    pub single_a0: f64,
    pub single_b0: f64,
    pub joint_00: f64,
    pub joint_a0: f64,
    pub joint_0b: f64,
    pub joint_ab: f64,
}

impl ChComponents {
    pub fn assemble(&self) -> f64 {
        self.single_a0 + self.single_b0 - self.joint_00 - self.joint_a0 - self.joint_0b + self.joint_ab
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChResult {
    pub value: f64,
    pub basis: CountBasis,
    pub components: ChComponents,
    pub violates_upper: bool,
    pub violates_lower: bool,
    pub settings: BellSettings,
}

/// The four parity correlations of `B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BComponents {
    pub pi_00: f64,
    pub pi_a0: f64,
    pub pi_0b: f64,
    pub pi_ab: f64,
}

impl BComponents {
    pub fn assemble(&self) -> f64 {
        self.pi_00 + self.pi_a0 + self.pi_0b - self.pi_ab
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BResult {
    pub value: f64,
    pub components: BComponents,
    pub violates: bool,
    pub settings: BellSettings,
}

const ORIGIN: C64 = C64::new(0.0, 0.0);

pub fn ch_combination(
    settings: &BellSettings,
    model: &dyn CorrelationModel,
    basis: CountBasis,
) -> Result<ChResult> {
    let (a, b) = (settings.alpha, settings.beta);
    let components = match basis {
        CountBasis::NoClick => ChComponents {
            single_a0: model.noclick_a(ORIGIN)?,
            single_b0: model.noclick_b(ORIGIN)?,
            joint_00: model.noclick_joint(ORIGIN, ORIGIN)?,
            joint_a0: model.noclick_joint(a, ORIGIN)?,
            joint_0b: model.noclick_joint(ORIGIN, b)?,
            joint_ab: model.noclick_joint(a, b)?,
        },
        CountBasis::Click => ChComponents {
            single_a0: model.click_a(ORIGIN)?,
            single_b0: model.click_b(ORIGIN)?,
            joint_00: model.click_joint(ORIGIN, ORIGIN)?,
            joint_a0: model.click_joint(a, ORIGIN)?,
            joint_0b: model.click_joint(ORIGIN, b)?,
            joint_ab: model.click_joint(a, b)?,
        },
    };
    let value = components.assemble();
    Ok(ChResult {
        value,
        basis,
        components,
        violates_upper: value > CH_UPPER + BOUND_SLACK,
        violates_lower: value < CH_LOWER - BOUND_SLACK,
        settings: *settings,
    })
}

pub fn chsh_combination(settings: &BellSettings, model: &dyn CorrelationModel) -> Result<BResult> {
    let (a, b) = (settings.alpha, settings.beta);
    let components = BComponents {
        pi_00: model.parity_joint(ORIGIN, ORIGIN)?,
        pi_a0: model.parity_joint(a, ORIGIN)?,
        pi_0b: model.parity_joint(ORIGIN, b)?,
        pi_ab: model.parity_joint(a, b)?,
    };
    let value = components.assemble();
    Ok(BResult {
        value,
        components,
        violates: value.abs() > B_BOUND + BOUND_SLACK,
        settings: *settings,
    })
}

/// Value of `target` at `settings` (no-click basis for CH).
pub fn evaluate(target: Target, settings: &BellSettings, model: &dyn CorrelationModel) -> Result<f64> {
    match target {
        Target::Ch => Ok(ch_combination(settings, model, CountBasis::NoClick)?.value),
        Target::B => Ok(chsh_combination(settings, model)?.value),
    }
}

/// Value of `target` at equal intensity `j` and half phase difference `phi`.
pub fn evaluate_at(target: Target, j: f64, phi: f64, model: &dyn CorrelationModel) -> Result<f64> {
    evaluate(target, &BellSettings::from_intensity_phase(j, phi)?, model)
}

/// Evenly spaced scan axis, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() || min > max {
            return Err(Error::InvalidRange(format!("[{min}, {max}]")));
        }
        if steps < 2 && min != max {
            return Err(Error::InvalidRange(format!("{steps} steps over [{min}, {max}]")));
        }
        if steps == 0 {
            return Err(Error::InvalidRange("zero steps".into()));
        }
        Ok(Self { min, max, steps })
    }

    /// Single-point axis.
    pub fn fixed(value: f64) -> Result<Self> {
        Self::new(value, value, 1)
    }

    /// Points `min, min + step, ...` up to `max`; the last point may fall
    /// short of `max` by less than one step.
    pub fn from_step(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidRange(format!("step {step}")));
        }
        if !min.is_finite() || !max.is_finite() || min > max {
            return Err(Error::InvalidRange(format!("[{min}, {max}]")));
        }
        let steps = ((max - min) / step + 1e-9).floor() as usize + 1;
        Self::new(min, min + (steps - 1) as f64 * step, steps)
    }

    pub fn points(&self) -> Vec<f64> {
        optimize::linspace(self.min, self.max, self.steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub j: f64,
    pub phi: f64,
    pub value: f64,
}

/// Evaluates `target` on the `j x phi` grid. Rows come out with `j` as the
/// outer index whatever order the points were evaluated in.
pub fn scan(target: Target, j_axis: &Axis, phi_axis: &Axis, model: &dyn CorrelationModel) -> Result<Vec<ScanRow>> {
    if j_axis.min < 0.0 {
        return Err(Error::InvalidRange(format!("intensity axis starts at {}", j_axis.min)));
    }
    let phis = phi_axis.points();
    let grid: Vec<(f64, f64)> = j_axis
        .points()
        .into_iter()
        .flat_map(|j| phis.iter().map(move |&p| (j, p)))
        .collect();
    grid.par_iter()
        .map(|&(j, phi)| {
            Ok(ScanRow {
                j,
                phi,
                value: evaluate_at(target, j, phi, model)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimumReport {
    pub target: Target,
    #[serde(rename = "J_star")]
    pub j_star: f64,
    pub phi_star: f64,
    #[serde(rename = "value")]
    pub value_star: f64,
    pub evaluations: usize,
    pub grid_resolution: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeOptions {
    /// Dense-grid spacing in `J`.
    pub grid_resolution: f64,
    /// Final golden-section bracket width.
    pub tolerance: f64,
    /// Also search the phase instead of fixing `phi = pi/2`.
    pub search_phase: bool,
    /// Phase grid points in `[0, pi]` when `search_phase` is set.
    pub phase_steps: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            grid_resolution: 1e-4,
            tolerance: 1e-10,
            search_phase: false,
            phase_steps: 65,
        }
    }
}

/// Strongest violation of `target` for `J` in `j_bounds`.
///
/// Both closed forms are affine in `sin^2 phi` with the sign that favours
/// opposite displacements, so by default `phi = pi/2` is fixed and only `J`
/// is searched. `search_phase` runs a joint grid over `(J, phi)` followed by
/// alternating golden-section refinements instead.
pub fn optimize_violation(
    target: Target,
    j_bounds: (f64, f64),
    model: &dyn CorrelationModel,
    options: &OptimizeOptions,
) -> Result<OptimumReport> {
    let (lo, hi) = j_bounds;
    if !lo.is_finite() || !hi.is_finite() || lo > hi || lo < 0.0 {
        return Err(Error::InvalidRange(format!("intensity bounds [{lo}, {hi}]")));
    }
    let goal = target.goal();
    if !options.search_phase {
        let f = |j: f64| evaluate_at(target, j, FRAC_PI_2, model);
        let best = optimize::grid_then_golden(f, lo, hi, options.grid_resolution, options.tolerance, goal)?;
        return Ok(OptimumReport {
            target,
            j_star: best.x,
            phi_star: FRAC_PI_2,
            value_star: best.value,
            evaluations: best.evaluations,
            grid_resolution: options.grid_resolution,
        });
    }

    let j_steps = if hi == lo {
        1
    } else {
        ((hi - lo) / options.grid_resolution).ceil() as usize + 1
    };
    let phase_steps = options.phase_steps.max(2);
    let js = optimize::linspace(lo, hi, j_steps);
    let phis = optimize::linspace(0.0, PI, phase_steps);
    let grid: Vec<(f64, f64)> = js
        .iter()
        .flat_map(|&j| phis.iter().map(move |&p| (j, p)))
        .collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&(j, p)| evaluate_at(target, j, p, model))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if goal.improves(*v, values[best]) {
            best = i;
        }
    }
    let (mut j, mut phi) = grid[best];
    let mut value = values[best];
    let mut evaluations = grid.len();
    let dphi = PI / (phase_steps - 1) as f64;
    for _ in 0..4 {
        if hi > lo {
            let e = optimize::golden_section(
                |x| evaluate_at(target, x, phi, model),
                (j - options.grid_resolution).max(lo),
                (j + options.grid_resolution).min(hi),
                options.tolerance,
                goal,
            )?;
            evaluations += e.evaluations;
            if goal.improves(e.value, value) {
                j = e.x;
                value = e.value;
            }
        }
        let e = optimize::golden_section(
            |p| evaluate_at(target, j, p, model),
            (phi - dphi).max(0.0),
            (phi + dphi).min(PI),
            options.tolerance,
            goal,
        )?;
        evaluations += e.evaluations;
        if goal.improves(e.value, value) {
            phi = e.x;
            value = e.value;
        }
    }
    Ok(OptimumReport {
        target,
        j_star: j,
        phi_star: phi,
        value_star: value,
        evaluations,
        grid_resolution: options.grid_resolution,
    })
}

/// Intensity in `[lo, hi]` at which `target(J, phi)` crosses its violated
/// local bound, by bisection. The bracket must straddle the bound.
pub fn locate_bound_crossing(
    target: Target,
    phi: f64,
    lo: f64,
    hi: f64,
    model: &dyn CorrelationModel,
    tol: f64,
) -> Result<f64> {
    let bound = target.violated_bound();
    let g = |j: f64| -> Result<f64> { Ok(evaluate_at(target, j, phi, model)? - bound) };
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (g(a)?, g(b)?);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(Error::InvalidRange(format!(
            "[{lo}, {hi}] does not bracket the bound {bound}"
        )));
    }
    let sa = ga.signum();
    while b - a > tol {
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if gm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
