//! Tabulated gap-finding probability `q(g, mu, sigma)`.
//!
//! `q` is the probability that the unit window `[0, 1]`, dropped at a random
//! position onto a line of points with i.i.d. log-normal(mu, sigma) spacings,
//! leaves a free stretch of length at least `g`. A spacing that straddles a
//! window edge contributes only the part inside the window.

mod format;
mod interp;
mod iso;
mod sampler;

pub use format::{load_table, read_table, save_table, write_table, FORMAT_VERSION};
pub use iso::{export_isosurface_slice, write_isosurface_csv, IsoRecord};
pub use sampler::{estimate_q, precompute_table, precompute_table_with_progress};

use crate::error::{Error, Result};

/// Evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let span = stop - start;
            let last = (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { stop } else { start + span * i as f64 / last })
                .collect()
        }
    }
}

/// `linspace` driven by a step size; the count is rounded to the nearest integer.
pub fn stepped(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::param(format!("bad range {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step).round() as usize + 1;
    Ok(linspace(start, stop, count))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes {
    g: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl GridAxes {
    /// Axes must be non-empty, finite and strictly ascending; `g` and `sigma`
    /// must be non-negative. A single-value axis is allowed and is treated as
    /// constant by `lookup`.
    pub fn new(g: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("g", &g), ("mu", &mu), ("sigma", &sigma)] {
            if axis.is_empty() {
                return Err(Error::param(format!("{name} axis is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("{name} axis has non-finite values")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param(format!("{name} axis is not strictly ascending")));
            }
        }
        if g[0] < 0.0 {
            return Err(Error::param("g axis must be non-negative"));
        }
        if sigma[0] < 0.0 {
            return Err(Error::param("sigma axis must be non-negative"));
        }
        Ok(GridAxes { g, mu, sigma })
    }

    /// 101 x 121 x 41 grid: g in [0, 1] step 0.01, mu in [-5, 1] step 0.05,
    /// sigma in [0, 2] step 0.05.
    pub fn standard() -> Self {
        GridAxes {
            g: linspace(0.0, 1.0, 101),
            mu: linspace(-5.0, 1.0, 121),
            sigma: linspace(0.0, 2.0, 41),
        }
    }

    /// 3 x 3 x 3 smoke-test grid.
    pub fn mini() -> Self {
        GridAxes {
            g: vec![0.0, 0.5, 1.0],
            mu: vec![-2.0, -1.0, 0.0],
            sigma: vec![0.4, 0.8, 1.2],
        }
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.g.len(), self.mu.len(), self.sigma.len())
    }

    pub fn len(&self) -> usize {
        self.g.len() * self.mu.len() * self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A point `(g, mu, sigma)` of the abstract problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbstractGapQuery {
    pub g: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl AbstractGapQuery {
    pub fn new(g: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::param(format!("gap fraction must be positive and finite, got {g}")));
        }
        if !mu.is_finite() {
            return Err(Error::param(format!("mu must be finite, got {mu}")));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(AbstractGapQuery { g, mu, sigma })
    }
}

/// Precomputed `q` values on a [`GridAxes`] grid, stored g-major
/// (`index = (ig * n_mu + imu) * n_sigma + isigma`).
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    axes: GridAxes,
    values: Vec<f32>,
    trials_per_cell: u64,
    seed: u64,
}

impl QTable {
    pub fn from_parts(axes: GridAxes, values: Vec<f32>, trials_per_cell: u64, seed: u64) -> Result<Self> {
        if values.len() != axes.len() {
            let (a, b, c) = axes.shape();
            return Err(Error::Shape(format!(
                "{} values for a {a}x{b}x{c} grid",
                values.len()
            )));
        }
        if trials_per_cell == 0 {
            return Err(Error::Integrity("trials_per_cell is zero".into()));
        }
        if let Some(bad) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Integrity(format!("value {} at index {bad} outside [0, 1]", values[bad])));
        }
        let table = QTable { axes, values, trials_per_cell, seed };
        if table.axes.g[0] == 0.0 {
            let plane = table.axes.mu.len() * table.axes.sigma.len();
            if table.values[..plane].iter().any(|&v| v != 1.0) {
                return Err(Error::Integrity("g = 0 plane must be exactly 1".into()));
            }
        }
        Ok(table)
    }

    pub fn axes(&self) -> &GridAxes {
        &self.axes
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn trials_per_cell(&self) -> u64 {
        self.trials_per_cell
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn version(&self) -> u32 {
        FORMAT_VERSION
    }

    #[inline]
    pub fn index(&self, ig: usize, imu: usize, isigma: usize) -> usize {
        (ig * self.axes.mu.len() + imu) * self.axes.sigma.len() + isigma
    }

    pub fn at(&self, ig: usize, imu: usize, isigma: usize) -> f32 {
        self.values[self.index(ig, imu, isigma)]
    }
}
