//! Statistical checks of the model against the microsimulation that are not
//! part of the acceptance suite.

mod common;

use lanewise::lanechange::{p_multilane, p_multilane_with, ConvolutionMethod, Quadrature};
use lanewise::simulator::{compare_with_model, run_trials, SimConfig};

#[test]
fn halving_the_grid_step_barely_moves_the_answer() {
    for n in [3, 4] {
        for d in [500.0, 1000.0, 2500.0, 5000.0] {
            let s = common::base_scenario(n, d);
            let coarse = p_multilane(&s, common::table(), 5.0).unwrap();
            let fine = p_multilane(&s, common::table(), 2.5).unwrap();
            assert!((coarse - fine).abs() < 1e-3, "n={n} d={d}: {coarse} vs {fine}");
        }
    }
}

#[test]
fn fft_matches_direct_quadrature() {
    let fft = Quadrature { method: ConvolutionMethod::Fft, ..Quadrature::default() };
    for n in [3, 4] {
        let s = common::base_scenario(n, 5000.0);
        let direct = p_multilane(&s, common::table(), 5.0).unwrap();
        let fast = p_multilane_with(&s, common::table(), &fft).unwrap();
        assert!((direct - fast).abs() < 1e-3);
    }
}

#[test]
fn halving_dt_barely_moves_the_simulation() {
    let mut config = SimConfig::new(common::base_scenario(2, 5000.0), 100_000, 8);
    let coarse = run_trials(&config).unwrap();
    config.dt = 0.05;
    let fine = run_trials(&config).unwrap();
    for (a, b) in coarse.probabilities.iter().zip(&fine.probabilities) {
        // identical streams, so the difference is discretisation, not noise
        assert!((a - b).abs() <= 0.005, "{a} vs {b}");
    }
}

#[test]
fn jitter_makes_equal_speed_lanes_rise_with_distance() {
    let mut lanes = common::base_lanes(2);
    lanes[0].v = lanes[1].v;
    let scenario = lanewise::Scenario::new(lanes, 5000.0).unwrap();
    let mut config = SimConfig::new(scenario, 20_000, 5);
    let flat = compare_with_model(&config, common::table()).unwrap();
    let model_rise = flat.model.last().unwrap() - flat.model[0];
    assert!(model_rise.abs() < 1e-12);
    let idle_rise = flat.report.probabilities.last().unwrap() - flat.report.probabilities[0];
    assert!(idle_rise.abs() < 1e-12, "no relative motion, so no later chances: {idle_rise}");

    config.jitter_speed_kmh = Some(5.0);
    let jittered = run_trials(&config).unwrap();
    let rise = jittered.probabilities.last().unwrap() - jittered.probabilities[0];
    assert!(rise > 0.05, "simulated P(S) should rise with jitter, rose {rise}");
}

#[test]
fn single_trial_report_is_well_formed() {
    let config = SimConfig::new(common::base_scenario(3, 5000.0), 1, 0);
    let cmp = compare_with_model(&config, common::table()).unwrap();
    assert_eq!(cmp.report.checkpoints.len(), 10);
    assert!(cmp.abs_errors.iter().all(|&e| (0.0..=1.0).contains(&e)));
    assert!(cmp.report.probabilities.iter().all(|&p| p == 0.0 || p == 1.0));
}
