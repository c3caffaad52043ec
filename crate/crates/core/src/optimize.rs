//! One-dimensional extremum search: dense grid followed by golden-section
//! refinement.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    Maximize,
    Minimize,
}

impl Goal {
    /// `true` when `candidate` is strictly better than `incumbent`.
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Goal::Maximize => candidate > incumbent,
            Goal::Minimize => candidate < incumbent,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

fn check_bounds(lo: f64, hi: f64) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::InvalidRange(format!("bounds [{lo}, {hi}]")));
    }
    Ok(())
}

/// Best value over a grid of spacing at most `step` covering `[lo, hi]`.
/// Points are evaluated in parallel; on exact ties the smallest `x` wins.
pub fn dense_grid<F>(f: F, lo: f64, hi: f64, step: f64, goal: Goal) -> Result<Extremum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    check_bounds(lo, hi)?;
    if !(step > 0.0) {
        return Err(Error::InvalidRange(format!("grid step {step}")));
    }
    let n = if hi == lo {
        1
    } else {
        ((hi - lo) / step).ceil() as usize + 1
    };
    let xs = linspace(lo, hi, n);
    let values: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if goal.improves(*v, values[best]) {
            best = i;
        }
    }
    Ok(Extremum {
        x: xs[best],
        value: values[best],
        evaluations: n,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2

/// Golden-section search on `[lo, hi]` until the bracket is narrower than
/// `tol`. Assumes a single extremum inside the bracket.
pub fn golden_section<F>(f: F, lo: f64, hi: f64, tol: f64, goal: Goal) -> Result<Extremum>
where
    F: Fn(f64) -> Result<f64>,
{
    check_bounds(lo, hi)?;
    let (mut a, mut b) = (lo, hi);
    let mut evaluations = 0;
    let mut eval = |x: f64| {
        evaluations += 1;
        f(x)
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > tol {
        // keep [a, d] when c is at least as good, so ties drift left
        if !goal.improves(fd, fc) {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let value = eval(x)?;
    Ok(Extremum {
        x,
        value,
        evaluations,
    })
}

/// Dense grid at `resolution`, then golden-section refinement to `tol`
/// inside the neighbouring grid cells.
pub fn grid_then_golden<F>(f: F, lo: f64, hi: f64, resolution: f64, tol: f64, goal: Goal) -> Result<Extremum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let coarse = dense_grid(&f, lo, hi, resolution, goal)?;
    if hi == lo {
        return Ok(coarse);
    }
    let a = (coarse.x - resolution).max(lo);
    let b = (coarse.x + resolution).min(hi);
    let fine = golden_section(&f, a, b, tol, goal)?;
    let evaluations = coarse.evaluations + fine.evaluations;
    let best = if goal.improves(fine.value, coarse.value) {
        fine
    } else {
        coarse
    };
    Ok(Extremum { evaluations, ..best })
}
