use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rayon::prelude::*;

use super::{AbstractGapQuery, GridAxes, QTable};
use crate::error::{Error, Result};
use crate::headway::SpacingLaw;
use crate::rng::stream_rng;

/// Widest part of the unit window left free by the points, for a window
/// placed at a stationary random position.
///
/// The window start falls uniformly inside a length-biased covering spacing,
/// which is exactly what a uniformly placed window sees on an infinitely long
/// line. The scan stops once the result is known to reach `enough`, or once
/// no remaining spacing could beat the current best.
#[inline]
pub(crate) fn widest_free_stretch<R: Rng + ?Sized>(law: &SpacingLaw, rng: &mut R, enough: f64) -> f64 {
    let cover = law.draw_covering(rng);
    let mut pos = cover * (1.0 - rng.random::<f64>());
    let mut best = pos.min(1.0);
    while pos < 1.0 && best < enough && 1.0 - pos > best {
        let next = pos + law.draw(rng);
        best = best.max(next.min(1.0) - pos);
        pos = next;
    }
    best
}

/// Monte Carlo estimate of `q(g, mu, sigma)` from `trials` windows.
pub fn estimate_q(query: AbstractGapQuery, trials: u64, seed: u64) -> Result<f64> {
    let query = AbstractGapQuery::new(query.g, query.mu, query.sigma)?;
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let law = SpacingLaw::new(query.mu, query.sigma);
    let mut rng = stream_rng(seed, 0);
    let hits = (0..trials)
        .filter(|_| widest_free_stretch(&law, &mut rng, query.g) >= query.g)
        .count();
    Ok(hits as f64 / trials as f64)
}

/// One `(mu, sigma)` column of the table: every g value is scored against the
/// same set of windows, so a column is exactly non-increasing in g.
fn fill_column(g_axis: &[f64], law: &SpacingLaw, trials: u64, seed: u64, stream: u64) -> Vec<f32> {
    let mut rng = stream_rng(seed, stream);
    let enough = g_axis.last().copied().unwrap_or(1.0).min(1.0);
    // hist[k] = number of windows whose widest stretch covers exactly the first k g values
    let mut hist = vec![0u64; g_axis.len() + 1];
    for _ in 0..trials {
        let widest = widest_free_stretch(law, &mut rng, enough);
        hist[g_axis.partition_point(|&g| g <= widest)] += 1;
    }
    let mut column = vec![0f32; g_axis.len()];
    let mut above = 0u64;
    for k in (0..g_axis.len()).rev() {
        above += hist[k + 1];
        column[k] = if g_axis[k] == 0.0 { 1.0 } else { (above as f64 / trials as f64) as f32 };
    }
    column
}

pub fn precompute_table(axes: &GridAxes, trials_per_cell: u64, seed: u64) -> Result<QTable> {
    precompute_table_with_progress(axes, trials_per_cell, seed, &|_, _| {})
}

/// Fills the table one `(mu, sigma)` column at a time, in parallel.
///
/// The column at `(imu, isigma)` draws from stream `imu * n_sigma + isigma`
/// of `seed`, so the output is independent of thread count and scheduling.
/// `progress(done, total)` is called after each finished column.
pub fn precompute_table_with_progress(
    axes: &GridAxes,
    trials_per_cell: u64,
    seed: u64,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<QTable> {
    if trials_per_cell == 0 {
        return Err(Error::param("trials_per_cell must be at least 1"));
    }
    let (ng, nmu, nsig) = axes.shape();
    let total = nmu * nsig;
    let done = AtomicUsize::new(0);
    let columns: Vec<Vec<f32>> = (0..total)
        .into_par_iter()
        .map(|col| {
            let law = SpacingLaw::new(axes.mu()[col / nsig], axes.sigma()[col % nsig]);
            let column = fill_column(axes.g(), &law, trials_per_cell, seed, col as u64);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            column
        })
        .collect();

    let mut values = vec![0f32; axes.len()];
    for (col, column) in columns.iter().enumerate() {
        for (ig, &v) in column.iter().enumerate() {
            values[ig * total + col] = v;
        }
    }
    debug_assert_eq!(values.len(), ng * total);
    QTable::from_parts(axes.clone(), values, trials_per_cell, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(g: f64, mu: f64, sigma: f64, trials: u64) -> f64 {
        estimate_q(AbstractGapQuery { g, mu, sigma }, trials, 11).unwrap()
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(matches!(
            estimate_q(AbstractGapQuery { g: 0.2, mu: 0.0, sigma: -0.1 }, 10, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            estimate_q(AbstractGapQuery { g: 0.0, mu: 0.0, sigma: 0.1 }, 10, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            estimate_q(AbstractGapQuery { g: 0.2, mu: 0.0, sigma: 0.1 }, 0, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn vanishing_gap_always_found() {
        assert_eq!(q(1e-9, -2.0, 0.4, 10_000), 1.0);
    }

    #[test]
    fn gap_larger_than_window_never_found() {
        assert_eq!(q(1.3, 1.0, 0.5, 1_000), 0.0);
    }

    #[test]
    fn nearly_fixed_long_spacings() {
        // Spacings of length e > 1: the window misses every point with
        // probability (e - 1) / e, and only then is the whole window free.
        let p = q(1.0, 1.0, 1e-6, 100_000);
        let expect = 1.0 - (-1f64).exp();
        assert!((p - expect).abs() < 0.006, "{p} vs {expect}");
    }

    #[test]
    fn lattice_half_window() {
        // Unit lattice: exactly one point in the window at uniform offset u,
        // widest stretch max(u, 1 - u) >= 0.75 with probability 1/2.
        let p = q(0.75, 0.0, 0.0, 100_000);
        assert!((p - 0.5).abs() < 0.006, "{p}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = estimate_q(AbstractGapQuery { g: 0.3, mu: -1.5, sigma: 0.7 }, 5_000, 42).unwrap();
        let b = estimate_q(AbstractGapQuery { g: 0.3, mu: -1.5, sigma: 0.7 }, 5_000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lattice_table_at_full_gap_is_zero() {
        // With unit spacings a unit window almost surely contains a point, so
        // no stretch of full length exists.
        let axes = GridAxes::new(vec![0.0, 0.5, 1.0], vec![0.0], vec![0.0]).unwrap();
        let t = precompute_table(&axes, 10_000, 3).unwrap();
        assert_eq!(t.at(0, 0, 0), 1.0);
        assert_eq!(t.at(1, 0, 0), 1.0);
        assert_eq!(t.at(2, 0, 0), 0.0);
    }

    #[test]
    fn mini_table_invariants() {
        let t = precompute_table(&GridAxes::mini(), 1_000, 5).unwrap();
        assert_eq!(t.values().len(), 27);
        assert!(t.values().iter().all(|v| (0.0..=1.0).contains(v)));
        for imu in 0..3 {
            for is in 0..3 {
                assert_eq!(t.at(0, imu, is), 1.0);
                assert!(t.at(1, imu, is) >= t.at(2, imu, is));
            }
        }
    }

    #[test]
    fn precompute_is_schedule_independent() {
        let axes = GridAxes::mini();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| precompute_table(&axes, 500, 9).unwrap());
        let b = wide.install(|| precompute_table(&axes, 500, 9).unwrap());
        assert_eq!(a, b);
    }
}
