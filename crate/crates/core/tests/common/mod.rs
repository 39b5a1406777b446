#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use lanewise::qtable::{linspace, load_table, precompute_table, save_table, GridAxes, QTable};
use lanewise::{profiles_from_spec, LaneProfile, Scenario, TrafficSpec};

pub const TABLE_TRIALS: u64 = 100_000;
pub const TABLE_SEED: u64 = 2024;

/// Standard g and mu axes with a narrow sigma axis around 0.8, the log-sd
/// used by every aggregate scenario in the tests. Lookups at sigma = 0.8 hit
/// the middle plane exactly, so the narrow axis changes nothing for them.
pub fn test_axes() -> GridAxes {
    let std = GridAxes::standard();
    GridAxes::new(std.g().to_vec(), std.mu().to_vec(), linspace(0.75, 0.85, 3)).unwrap()
}

/// The shared test table, cached on disk between test binaries and runs.
pub fn table() -> &'static QTable {
    static TABLE: OnceLock<QTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
            .join(format!("lanewise-test-table-{TABLE_TRIALS}-{TABLE_SEED}.bin"));
        if let Ok(t) = load_table(&path) {
            if t.axes() == &test_axes() && t.trials_per_cell() == TABLE_TRIALS && t.seed() == TABLE_SEED {
                return t;
            }
        }
        let t = precompute_table(&test_axes(), TABLE_TRIALS, TABLE_SEED).unwrap();
        // write then rename so concurrent test binaries never see a partial file
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        save_table(&t, &tmp).unwrap();
        std::fs::rename(&tmp, &path).unwrap();
        t
    })
}

pub fn base_lanes(n: usize) -> Vec<LaneProfile> {
    profiles_from_spec(&TrafficSpec::base_case(n)).unwrap()
}

pub fn base_scenario(n: usize, goal: f64) -> Scenario {
    Scenario::new(base_lanes(n), goal).unwrap()
}
