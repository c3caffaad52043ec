//! Finite-statistics emulation of the counting experiment.
//!
//! For each of the four setting pairs `(0,0), (alpha,0), (0,beta),
//! (alpha,beta)` the exact four-outcome joint distribution is computed from
//! the POVMs and sampled shot by shot. Uniform draws come from ChaCha8 keyed
//! by `(seed, setting index, shot index)`: the seed fixes the key, the setting
//! index selects the stream and the shot index the position in it, so tallies
//! do not depend on how shots are split across threads.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::bell::Target;
use crate::error::{Error, Result};
use crate::fock::{expectation_product, loss_channel, ModeOperator, TwoModeState, C64};
use crate::measurement::{click_povm, noclick_povm, parity_povm, DisplacementSetting, ParitySign};
use crate::models::NumericModel;
use crate::oracles::BellSettings;

/// Shots handled per parallel task.
const BLOCK: u64 = 1 << 16;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Tallies for one setting pair. Outcome order is `(first_a, first_b),
/// (first_a, second_b), (second_a, first_b), (second_a, second_b)` with
/// first/second = no-click/click in CH mode and even/odd in B mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PairCounts {
    pub tallies: [u64; 4],
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.tallies.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountsRecord {
    pub mode: Target,
    pub settings: BellSettings,
    pub shots: u64,
    pub seed: u64,
    pub cutoff: usize,
    pub efficiency: Option<(f64, f64)>,
    /// indexed like [`setting_pairs`]
    pub pairs: [PairCounts; 4],
}

impl CountsRecord {
    fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::ZeroShots);
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if p.total() != self.shots {
                return Err(Error::InvalidState(format!(
                    "setting pair {i} tallies sum to {}, expected {}",
                    p.total(),
                    self.shots
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub mode: Target,
    pub value: f64,
    pub std_error: f64,
    pub shots_total: u64,
    pub settings: BellSettings,
}

/// `(alpha_i, beta_i)` for the four setting pairs.
pub fn setting_pairs(settings: &BellSettings) -> [(C64, C64); 4] {
    let zero = C64::new(0.0, 0.0);
    [
        (zero, zero),
        (settings.alpha, zero),
        (zero, settings.beta),
        (settings.alpha, settings.beta),
    ]
}

fn binary_povm(mode: Target, alpha: C64, state: &TwoModeState) -> Result<[ModeOperator; 2]> {
    let s = DisplacementSetting::new(alpha)?;
    let c = state.cutoff();
    Ok(match mode {
        Target::Ch => [noclick_povm(s, c)?, click_povm(s, c)?],
        Target::B => [parity_povm(s, ParitySign::Even, c)?, parity_povm(s, ParitySign::Odd, c)?],
    })
}

/// Exact outcome distribution of each setting pair.
pub fn outcome_distributions(state: &TwoModeState, settings: &BellSettings, mode: Target) -> Result<[[f64; 4]; 4]> {
    let guard = NumericModel::new("sampler", state.clone());
    let mut out = [[0.0; 4]; 4];
    for (row, (a, b)) in out.iter_mut().zip(setting_pairs(settings)) {
        guard.check_cutoff(a)?;
        guard.check_cutoff(b)?;
        let pa = binary_povm(mode, a, state)?;
        let pb = binary_povm(mode, b, state)?;
        for (k, slot) in row.iter_mut().enumerate() {
            let p = expectation_product(state, &pa[k / 2], &pb[k % 2])?.re;
            if p < -NORMALIZATION_TOL {
                return Err(Error::InvalidState(format!("negative outcome probability {p}")));
            }
            *slot = p.max(0.0);
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::ProbabilityNormalization(sum));
        }
    }
    Ok(out)
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn tally_block(probs: &[f64; 4], seed: u64, pair: usize, start: u64, len: u64) -> [u64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair as u64);
    // one u64 (two 32-bit words) per shot
    rng.set_word_pos(2 * start as u128);
    let cdf = [probs[0], probs[0] + probs[1], probs[0] + probs[1] + probs[2]];
    let mut tallies = [0u64; 4];
    for _ in 0..len {
        let u = uniform(&mut rng);
        let k = cdf.iter().position(|&c| u < c).unwrap_or(3);
        tallies[k] += 1;
    }
    tallies
}

/// Draws `shots` outcomes for each setting pair, optionally after pure-loss
/// channels with efficiencies `efficiency = (eta_a, eta_b)`.
pub fn sample_counts(
    state: &TwoModeState,
    settings: &BellSettings,
    mode: Target,
    shots: u64,
    seed: u64,
    efficiency: Option<(f64, f64)>,
) -> Result<CountsRecord> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let lossy;
    let state = match efficiency {
        Some((eta_a, eta_b)) => {
            lossy = loss_channel(state, eta_a, eta_b)?;
            &lossy
        }
        None => state,
    };
    let dists = outcome_distributions(state, settings, mode)?;
    let blocks = shots.div_ceil(BLOCK);
    let tasks: Vec<(usize, u64)> = (0..4).flat_map(|p| (0..blocks).map(move |b| (p, b))).collect();
    let partial: Vec<(usize, [u64; 4])> = tasks
        .par_iter()
        .map(|&(pair, block)| {
            let start = block * BLOCK;
            let len = BLOCK.min(shots - start);
            (pair, tally_block(&dists[pair], seed, pair, start, len))
        })
        .collect();
    let mut pairs = [PairCounts { tallies: [0; 4] }; 4];
    for (pair, t) in partial {
        for k in 0..4 {
            pairs[pair].tallies[k] += t[k];
        }
    }
    Ok(CountsRecord {
        mode,
        settings: *settings,
        shots,
        seed,
        cutoff: state.cutoff().n_max(),
        efficiency,
        pairs,
    })
}

fn binomial_var(p: f64, n: f64) -> f64 {
    p * (1.0 - p) / n
}

/// Bell value from empirical frequencies. Setting pairs are independent
/// experiments; each term carries binomial variance and the terms add in
/// quadrature.
pub fn estimate(counts: &CountsRecord) -> Result<EstimateReport> {
    counts.validate()?;
    let n = counts.shots as f64;
    let freq = |pair: usize, k: usize| counts.pairs[pair].tallies[k] as f64 / n;
    let (value, variance) = match counts.mode {
        Target::Ch => {
            // mode-a no-click with a undisplaced: pairs 0 and 2; mode b: 0 and 1
            let qa0 = (freq(0, 0) + freq(0, 1) + freq(2, 0) + freq(2, 1)) / 2.0;
            let qb0 = (freq(0, 0) + freq(0, 2) + freq(1, 0) + freq(1, 2)) / 2.0;
            let joints = [freq(0, 0), freq(1, 0), freq(2, 0), freq(3, 0)];
            let value = qa0 + qb0 - joints[0] - joints[1] - joints[2] + joints[3];
            let variance = binomial_var(qa0, 2.0 * n)
                + binomial_var(qb0, 2.0 * n)
                + joints.iter().map(|&p| binomial_var(p, n)).sum::<f64>();
            (value, variance)
        }
        Target::B => {
            let corr: Vec<f64> = (0..4)
                .map(|s| freq(s, 0) - freq(s, 1) - freq(s, 2) + freq(s, 3))
                .collect();
            let value = corr[0] + corr[1] + corr[2] - corr[3];
            // a +-1 variable with mean E has variance 1 - E^2
            let variance = corr.iter().map(|e| (1.0 - e * e).max(0.0) / n).sum::<f64>();
            (value, variance)
        }
    };
    Ok(EstimateReport {
        mode: counts.mode,
        value,
        std_error: variance.sqrt(),
        shots_total: 4 * counts.shots,
        settings: counts.settings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockCutoff;
    use crate::states::singlet_state;
    use std::f64::consts::FRAC_PI_2;

    fn cut() -> FockCutoff {
        FockCutoff::new(20).unwrap()
    }

    #[test]
    fn photon_always_registered_without_displacement() {
        let s = BellSettings::from_intensity_phase(0.0, 0.0).unwrap();
        let rec = sample_counts(&singlet_state(cut()), &s, Target::Ch, 5000, 7, None).unwrap();
        for p in &rec.pairs {
            assert_eq!(p.tallies[0], 0);
            assert_eq!(p.tallies[3], 0);
            assert_eq!(p.total(), 5000);
        }
    }

    #[test]
    fn odd_total_parity_without_displacement() {
        let s = BellSettings::from_intensity_phase(0.0, 0.0).unwrap();
        let rec = sample_counts(&singlet_state(cut()), &s, Target::B, 3000, 1, None).unwrap();
        for p in &rec.pairs {
            assert_eq!(p.tallies[0] + p.tallies[3], 0);
        }
        let est = estimate(&rec).unwrap();
        assert_eq!(est.value, -2.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn same_seed_same_counts() {
        let s = BellSettings::from_intensity_phase(0.26, FRAC_PI_2).unwrap();
        let psi = singlet_state(cut());
        let a = sample_counts(&psi, &s, Target::Ch, 200_000, 42, None).unwrap();
        let b = sample_counts(&psi, &s, Target::Ch, 200_000, 42, None).unwrap();
        assert_eq!(a, b);
        let c = sample_counts(&psi, &s, Target::Ch, 200_000, 43, None).unwrap();
        assert_ne!(a.pairs, c.pairs);
    }

    #[test]
    fn prefix_of_stream_is_stable() {
        // shot i of pair s is the same draw whatever the total shot count
        let probs = [0.25; 4];
        let whole = tally_block(&probs, 9, 2, 0, 1000);
        let first = tally_block(&probs, 9, 2, 0, 400);
        let rest = tally_block(&probs, 9, 2, 400, 600);
        for k in 0..4 {
            assert_eq!(whole[k], first[k] + rest[k]);
        }
    }

    #[test]
    fn degenerate_counts_have_zero_error() {
        let s = BellSettings::from_intensity_phase(0.1, 0.0).unwrap();
        let rec = CountsRecord {
            mode: Target::Ch,
            settings: s,
            shots: 10,
            seed: 0,
            cutoff: 20,
            efficiency: None,
            pairs: [PairCounts { tallies: [0, 0, 0, 10] }; 4],
        };
        let est = estimate(&rec).unwrap();
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn invalid_records_rejected() {
        let s = BellSettings::from_intensity_phase(0.1, 0.0).unwrap();
        let mut rec = CountsRecord {
            mode: Target::B,
            settings: s,
            shots: 0,
            seed: 0,
            cutoff: 20,
            efficiency: None,
            pairs: [PairCounts { tallies: [0; 4] }; 4],
        };
        assert_eq!(estimate(&rec), Err(Error::ZeroShots));
        rec.shots = 5;
        assert!(estimate(&rec).is_err());
        assert_eq!(
            sample_counts(&singlet_state(cut()), &s, Target::Ch, 0, 1, None),
            Err(Error::ZeroShots)
        );
    }

    #[test]
    fn too_small_cutoff_detected() {
        let s = BellSettings::from_intensity_phase(4.0, 0.0).unwrap();
        let psi = singlet_state(FockCutoff::new(3).unwrap());
        assert!(outcome_distributions(&psi, &s, Target::B).is_err());
    }

    #[test]
    fn distributions_are_normalized() {
        let psi = singlet_state(FockCutoff::new(32).unwrap());
        for j in [0.0, 0.3, 1.0, 2.0] {
            let s = BellSettings::from_intensity_phase(j, 1.1).unwrap();
            for mode in [Target::Ch, Target::B] {
                for row in outcome_distributions(&psi, &s, mode).unwrap() {
                    assert!(row.iter().all(|&p| p >= 0.0));
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
