mod common;

use proptest::prelude::*;

use lanewise::lanechange::{p_two_lane, profile, reduce_two_lane, Reduction};
use lanewise::{fit_lognormal, AbstractGapQuery, HeadwaySample, LaneProfile, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lookup_stays_in_unit_interval(g in 1e-6f64..3.0, mu in -9.0f64..5.0, sigma in 0.0f64..3.0) {
        let q = common::table().lookup(&AbstractGapQuery::new(g, mu, sigma).unwrap());
        prop_assert!((0.0..=1.0).contains(&q));
        if g > 1.0 {
            prop_assert_eq!(q, 0.0);
        }
    }

    #[test]
    fn two_lane_depends_on_speed_ratio_only_through_its_distance_from_one(
        d_i in 50.0f64..4000.0, v1 in 15.0f64..40.0, frac in 0.0f64..0.5,
    ) {
        let lane = |v2: f64| LaneProfile::new(v2, 4.1, 0.8, 60.0, 3.0).unwrap();
        let d = d_i + 3.0 * v1;
        let slow = p_two_lane(d, v1, &lane(v1 * (1.0 - frac)), common::table()).unwrap();
        let fast = p_two_lane(d, v1, &lane(v1 * (1.0 + frac)), common::table()).unwrap();
        prop_assert!((slow - fast).abs() < 1e-12, "{} vs {}", slow, fast);
    }

    #[test]
    fn reduction_produces_valid_queries(d in 1.0f64..6000.0, v1 in 1.0f64..50.0, v2 in 1.0f64..50.0, g in 1.0f64..150.0) {
        let lane = LaneProfile::new(v2, 4.0, 0.8, g, 3.0).unwrap();
        match reduce_two_lane(d, v1, &lane).unwrap() {
            Reduction::Impossible => prop_assert!(d <= 3.0 * v1 + 1e-9),
            Reduction::Query(q) => {
                prop_assert!(q.g > 0.0 && q.g <= 1.0);
                prop_assert!(d > 3.0 * v1);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profiles_are_monotone_and_zero_before_the_first_maneuver(
        n in 2usize..5,
        rho in 400.0f64..2400.0,
        delta in 0.4f64..3.2,
        base in 80.0f64..110.0,
        step in 0.0f64..20.0,
    ) {
        let speeds = (0..n).map(|i| base + step * (n - 1 - i) as f64).collect();
        let spec = lanewise::TrafficSpec::new(rho, delta, speeds);
        let lanes = lanewise::profiles_from_spec(&spec).unwrap();
        let scenario = Scenario::new(lanes, 5000.0).unwrap();
        let p = profile(&scenario, common::table(), 10.0).unwrap();
        let min_d = scenario.min_maneuver_distance();
        for (d, prob) in p.distances.iter().zip(&p.probabilities) {
            prop_assert!((0.0..=1.0).contains(prob));
            if *d <= min_d {
                prop_assert_eq!(*prob, 0.0);
            }
        }
        for w in p.probabilities.windows(2) {
            prop_assert!(w[1] >= w[0] - 0.02, "{} then {}", w[0], w[1]);
        }
    }
}

#[test]
fn fit_recovers_generator_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let law = LogNormal::new(4.4, 0.8).unwrap();
    let values = (0..100_000).map(|_| law.sample(&mut rng)).collect();
    let (mu, sigma) = fit_lognormal(&HeadwaySample { values, lane_id: 2 }).unwrap();
    assert!((mu - 4.4).abs() < 0.02 && (sigma - 0.8).abs() < 0.02, "{mu} {sigma}");
}

#[test]
fn profiles_from_spec_round_trip_through_sampling() {
    for lane in common::base_lanes(4) {
        let mut rng = ChaCha8Rng::seed_from_u64(lane.v.to_bits());
        let law = LogNormal::new(lane.mu, lane.sigma).unwrap();
        let values = (0..50_000).map(|_| law.sample(&mut rng)).collect();
        let (mu, sigma) = fit_lognormal(&HeadwaySample { values, lane_id: 0 }).unwrap();
        assert!((mu - lane.mu).abs() < 0.02 && (sigma - lane.sigma).abs() < 0.02);
        let mean = (lane.mu + 0.5 * lane.sigma * lane.sigma).exp();
        assert!((mean / (lane.v * 3.0) - 1.0).abs() < 1e-9);
    }
}
