use std::f64::consts::FRAC_PI_2;

use phasebell::bell::{self, OptimizeOptions, Target};
use phasebell::fock::FockCutoff;
use phasebell::models::AnalyticModel;
use phasebell::oracles::{self, BellSettings};
use phasebell::sim::{estimate, sample_counts};
use phasebell::states::{incoherent_mixture, singlet_state};

fn optimum(target: Target) -> f64 {
    bell::optimize_violation(target, (0.0, 2.0), &AnalyticModel, &OptimizeOptions::default())
        .unwrap()
        .j_star
}

#[test]
fn ch_error_shrinks_with_shots() {
    let cutoff = FockCutoff::new(32).unwrap();
    let psi = singlet_state(cutoff);
    let j = optimum(Target::Ch);
    let settings = BellSettings::from_intensity_phase(j, FRAC_PI_2).unwrap();
    let exact = oracles::ch_closed_form(j, FRAC_PI_2);
    let seeds = 0..16u64;
    let errors: Vec<f64> = [100u64, 1_000, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&shots| {
            let total: f64 = seeds
                .clone()
                .map(|seed| {
                    let record = sample_counts(&psi, &settings, Target::Ch, shots, seed, None).unwrap();
                    (estimate(&record).unwrap().value - exact).abs()
                })
                .sum();
            total / seeds.clone().count() as f64
        })
        .collect();
    let improving = errors.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(improving >= 3, "{errors:?}");
}

#[test]
fn loss_degrades_ch_violation() {
    let cutoff = FockCutoff::new(32).unwrap();
    let psi = singlet_state(cutoff);
    let settings = BellSettings::from_intensity_phase(optimum(Target::Ch), FRAC_PI_2).unwrap();
    let values: Vec<(f64, f64)> = [1.0, 0.9, 0.7]
        .iter()
        .map(|&eta| {
            let eff = if eta == 1.0 { None } else { Some((eta, eta)) };
            let record = sample_counts(&psi, &settings, Target::Ch, 1_000_000, 11, eff).unwrap();
            let e = estimate(&record).unwrap();
            (e.value, e.std_error)
        })
        .collect();
    for w in values.windows(2) {
        assert!(w[1].0 < w[0].0, "{values:?}");
    }
}

#[test]
fn estimates_track_analytic_values() {
    let cutoff = FockCutoff::new(32).unwrap();
    let psi = singlet_state(cutoff);
    for (j, phi) in [(0.05, 0.3), (0.4, 1.0), (1.0, FRAC_PI_2)] {
        let settings = BellSettings::from_intensity_phase(j, phi).unwrap();
        for target in [Target::Ch, Target::B] {
            let record = sample_counts(&psi, &settings, target, 200_000, 5, None).unwrap();
            let e = estimate(&record).unwrap();
            let exact = bell::evaluate(target, &settings, &AnalyticModel).unwrap();
            assert!((e.value - exact).abs() < 5.0 * e.std_error, "{target:?} {j} {phi}");
        }
    }
}

#[test]
fn mixture_samples_stay_local() {
    let cutoff = FockCutoff::new(32).unwrap();
    let rho = incoherent_mixture(cutoff);
    let settings = BellSettings::from_intensity_phase(optimum(Target::B), FRAC_PI_2).unwrap();
    let record = sample_counts(&rho, &settings, Target::B, 1_000_000, 2, None).unwrap();
    let e = estimate(&record).unwrap();
    assert!(e.value.abs() < 2.0 + 5.0 * e.std_error);
}
