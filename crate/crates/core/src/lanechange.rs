//! Success probability for reaching a goal `d` metres ahead on another lane.
//!
//! Two lanes reduce to a single table lookup. For `n >= 3` lanes the
//! probability of reaching lane `n` by distance `d` is
//!
//! ```text
//! F_n(d) = integral over x in [0, d] of K_n(d - x) dF_{n-1}(x)
//! ```
//!
//! where `F_{n-1}` is the cumulative probability of having entered lane
//! `n - 1` by `x`, and `K_n(y)` is the two-lane probability of then reaching
//! lane `n` within `y`.
//!
//! Both functions have exactly one jump. `K_n` is 0 up to the maneuver
//! distance `b = t_n * v_{n-1}` and then starts at the immediate-acceptance
//! probability `q0`. `F_{n-1}` jumps at the sum of all earlier maneuver
//! distances, by the product of their `q0`s. Each curve is therefore kept as
//! a continuous part on the grid plus one known jump. The jump terms are
//! integrated exactly. The continuous part is differentiated by central
//! differences and integrated with the trapezoid rule.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::qtable::{AbstractGapQuery, QTable};

/// One lane as seen by the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneProfile {
    /// Average speed (m/s).
    pub v: f64,
    /// Headway log-mean (log metres).
    pub mu: f64,
    /// Headway log-sd.
    pub sigma: f64,
    /// Critical gap (m).
    pub g_crit: f64,
    /// Duration of the lane change into this lane (s).
    pub t_lc: f64,
}

impl LaneProfile {
    pub fn new(v: f64, mu: f64, sigma: f64, g_crit: f64, t_lc: f64) -> Result<Self> {
        let lane = LaneProfile { v, mu, sigma, g_crit, t_lc };
        lane.validate()?;
        Ok(lane)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0) || !self.v.is_finite() {
            return Err(Error::param(format!("lane speed must be positive, got {}", self.v)));
        }
        if !self.mu.is_finite() {
            return Err(Error::param(format!("headway mu must be finite, got {}", self.mu)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::param(format!("headway sigma must be non-negative, got {}", self.sigma)));
        }
        if !(self.g_crit > 0.0) || !self.g_crit.is_finite() {
            return Err(Error::param(format!("critical gap must be positive, got {}", self.g_crit)));
        }
        if !(self.t_lc >= 0.0) || !self.t_lc.is_finite() {
            return Err(Error::param(format!("lane-change time must be non-negative, got {}", self.t_lc)));
        }
        Ok(())
    }

    /// Probability of accepting a gap into this lane at the very first look,
    /// i.e. the two-lane probability just past the maneuver distance.
    pub fn immediate_acceptance(&self, table: &QTable) -> f64 {
        table.lookup(&AbstractGapQuery { g: 1.0, mu: self.mu - self.g_crit.ln(), sigma: self.sigma })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    lanes: Vec<LaneProfile>,
    goal_distance: f64,
}

impl Scenario {
    /// `lanes[0]` is the start lane; only its speed is used.
    pub fn new(lanes: Vec<LaneProfile>, goal_distance: f64) -> Result<Self> {
        if lanes.len() < 2 {
            return Err(Error::param(format!("need at least 2 lanes, got {}", lanes.len())));
        }
        let start = lanes[0].v;
        if !(start > 0.0) || !start.is_finite() {
            return Err(Error::param(format!("start lane speed must be positive, got {start}")));
        }
        for lane in &lanes[1..] {
            lane.validate()?;
        }
        if !(goal_distance > 0.0) || !goal_distance.is_finite() {
            return Err(Error::param(format!("goal distance must be positive, got {goal_distance}")));
        }
        Ok(Scenario { lanes, goal_distance })
    }

    pub fn lanes(&self) -> &[LaneProfile] {
        &self.lanes
    }

    pub fn goal_distance(&self) -> f64 {
        self.goal_distance
    }

    pub fn with_goal_distance(&self, goal_distance: f64) -> Result<Self> {
        Scenario::new(self.lanes.clone(), goal_distance)
    }

    /// Sum of the distances covered during each lane change; no success is
    /// possible at or below it.
    pub fn min_maneuver_distance(&self) -> f64 {
        self.lanes.windows(2).map(|w| w[1].t_lc * w[0].v).sum()
    }

    /// The model is meant for goals between 100 m and 5 km.
    pub fn range_warning(&self) -> Option<String> {
        let d = self.goal_distance;
        (!(100.0..=5000.0).contains(&d))
            .then(|| format!("goal distance {d} m is outside the 100-5000 m range the model targets"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityProfile {
    pub distances: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub scenario: Scenario,
}

/// Result of mapping a two-lane case onto the abstract unit-window problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reduction {
    /// Not enough distance left to complete the lane change.
    Impossible,
    Query(AbstractGapQuery),
}

/// Maps `(d, v1, lane 2)` to the abstract query.
///
/// The lane change must start within `d_i = d - t * v1`. Searching that far
/// sweeps `d_r = d_i * |1 - v2 / v1|` of lane 2, and a point at least `g / 2`
/// from both neighbours exists there iff lane 2 has a gap of at least `g`
/// inside a stretch of length `d_e = d_r + g`. Rescaling that stretch to unit
/// length turns the headway law into log-normal(mu - ln d_e, sigma).
pub fn reduce_two_lane(d: f64, v1: f64, lane2: &LaneProfile) -> Result<Reduction> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::param(format!("distance must be positive, got {d}")));
    }
    if !(v1 > 0.0) || !v1.is_finite() {
        return Err(Error::param(format!("start speed must be positive, got {v1}")));
    }
    let d_i = d - lane2.t_lc * v1;
    if d_i <= 0.0 {
        return Ok(Reduction::Impossible);
    }
    let d_r = d_i * (1.0 - lane2.v / v1).abs();
    let d_e = d_r + lane2.g_crit;
    AbstractGapQuery::new(lane2.g_crit / d_e, lane2.mu - d_e.ln(), lane2.sigma).map(Reduction::Query)
}

pub fn p_two_lane(d: f64, v1: f64, lane2: &LaneProfile, table: &QTable) -> Result<f64> {
    Ok(match reduce_two_lane(d, v1, lane2)? {
        Reduction::Impossible => 0.0,
        Reduction::Query(q) => table.lookup(&q),
    })
}

/// Two-lane probability extended by 0 to non-positive distances.
fn kernel(y: f64, v1: f64, lane2: &LaneProfile, table: &QTable) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    match reduce_two_lane(y, v1, lane2) {
        Ok(Reduction::Query(q)) => table.lookup(&q),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    /// Direct O(N^2) sum.
    #[default]
    Direct,
    /// Zero-padded FFT, O(N log N).
    Fft,
}

/// Discretization of the lane-composition integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    /// Target x-grid spacing (m); the grid over [0, d] uses the largest
    /// uniform step not exceeding it.
    pub grid_step: f64,
    pub method: ConvolutionMethod,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { grid_step: 5.0, method: ConvolutionMethod::Direct }
    }
}

impl Quadrature {
    pub fn with_step(grid_step: f64) -> Self {
        Quadrature { grid_step, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0) || !self.grid_step.is_finite() {
            return Err(Error::param(format!("grid step must be positive, got {}", self.grid_step)));
        }
        Ok(())
    }
}

/// Cumulative probability on the grid `x_k = k * step`, split into a
/// continuous part and a single jump of height `jump` just after `jump_at`.
struct Curve {
    step: f64,
    smooth: Vec<f64>,
    jump_at: f64,
    jump: f64,
}

impl Curve {
    fn step_part(&self, x: f64) -> f64 {
        if x > self.jump_at {
            self.jump
        } else {
            0.0
        }
    }

    fn at_node(&self, k: usize) -> f64 {
        (self.smooth[k] + self.step_part(k as f64 * self.step)).clamp(0.0, 1.0)
    }

    /// Continuous part linearly interpolated at `x` (0 for `x <= 0`).
    fn smooth_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let s = x / self.step;
        let k = (s.floor() as usize).min(self.smooth.len() - 2);
        let t = s - k as f64;
        (1.0 - t) * self.smooth[k] + t * self.smooth[k + 1]
    }

    /// Density of the continuous part: central differences inside, one-sided
    /// at both ends.
    fn density(&self) -> Vec<f64> {
        let n = self.smooth.len();
        let g = &self.smooth;
        let h = self.step;
        (0..n)
            .map(|k| {
                let d = if k == 0 {
                    (g[1] - g[0]) / h
                } else if k == n - 1 {
                    (g[n - 1] - g[n - 2]) / h
                } else {
                    (g[k + 1] - g[k - 1]) / (2.0 * h)
                };
                if d < 0.0 && d > -1e-6 {
                    0.0
                } else {
                    d
                }
            })
            .collect()
    }
}

fn two_lane_curve(v1: f64, lane: &LaneProfile, table: &QTable, step: f64, nodes: usize) -> Curve {
    let jump_at = lane.t_lc * v1;
    let jump = lane.immediate_acceptance(table);
    let smooth = (0..nodes)
        .map(|k| {
            let x = k as f64 * step;
            let stepped = if x > jump_at { jump } else { 0.0 };
            kernel(x, v1, lane, table) - stepped
        })
        .collect();
    Curve { step, smooth, jump_at, jump }
}

/// `out[j] = step * trapezoid sum over k in [0, j] of kern[j - k] * dens[k]`.
fn trapezoid_convolution(kern: &[f64], dens: &[f64], step: f64, method: ConvolutionMethod) -> Vec<f64> {
    let n = kern.len();
    let full = match method {
        ConvolutionMethod::Direct => (0..n)
            .map(|j| (0..=j).map(|k| kern[j - k] * dens[k]).sum::<f64>())
            .collect::<Vec<_>>(),
        ConvolutionMethod::Fft => fft_convolution(kern, dens),
    };
    (0..n)
        .map(|j| step * (full[j] - 0.5 * kern[j] * dens[0] - 0.5 * kern[0] * dens[j]))
        .collect()
}

/// First `a.len()` terms of the linear convolution of `a` and `b`.
fn fft_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    let lift = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(len, Complex::new(0.0, 0.0));
        buf
    };
    let (mut fa, mut fb) = (lift(a), lift(b));
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inverse.process(&mut fa);
    fa.iter().take(n).map(|c| c.re / len as f64).collect()
}

/// Composes one more lane onto `prev`, the curve for reaching the lane
/// before `lane`.
fn compose(prev: &Curve, v_prev: f64, lane: &LaneProfile, table: &QTable, method: ConvolutionMethod) -> Curve {
    let step = prev.step;
    let nodes = prev.smooth.len();
    let reach = lane.t_lc * v_prev;
    let q0 = lane.immediate_acceptance(table);
    // kernel without its jump at `reach`; continuous and 0 at the origin
    let smooth_kernel = |y: f64| kernel(y, v_prev, lane, table) - if y > reach { q0 } else { 0.0 };

    let kern: Vec<f64> = (0..nodes).map(|k| smooth_kernel(k as f64 * step)).collect();
    let conv = trapezoid_convolution(&kern, &prev.density(), step, method);

    let jump_at = prev.jump_at + reach;
    let smooth = (0..nodes)
        .map(|j| {
            let x = j as f64 * step;
            // no arrival is possible before both maneuvers are done; the
            // finite-difference density would otherwise leak a little mass there
            if x <= jump_at {
                return 0.0;
            }
            q0 * prev.smooth_at(x - reach) + prev.jump * smooth_kernel(x - prev.jump_at) + conv[j]
        })
        .collect();
    Curve { step, smooth, jump_at, jump: prev.jump * q0 }
}

/// Cumulative success curve for the last lane over `nodes` grid points.
fn final_curve(lanes: &[LaneProfile], table: &QTable, step: f64, nodes: usize, method: ConvolutionMethod) -> Curve {
    let mut curve = two_lane_curve(lanes[0].v, &lanes[1], table, step, nodes);
    for w in lanes[1..].windows(2) {
        curve = compose(&curve, w[0].v, &w[1], table, method);
    }
    curve
}

/// Grid over [0, d] with the largest uniform step not exceeding `target`.
fn grid_for(d: f64, target: f64) -> (f64, usize) {
    let intervals = ((d / target) - 1e-9).ceil().max(1.0) as usize;
    (d / intervals as f64, intervals + 1)
}

pub fn p_multilane(scenario: &Scenario, table: &QTable, grid_step: f64) -> Result<f64> {
    p_multilane_with(scenario, table, &Quadrature::with_step(grid_step))
}

pub fn p_multilane_with(scenario: &Scenario, table: &QTable, quad: &Quadrature) -> Result<f64> {
    quad.validate()?;
    let lanes = scenario.lanes();
    let d = scenario.goal_distance();
    if lanes.len() == 2 {
        return p_two_lane(d, lanes[0].v, &lanes[1], table);
    }
    let (step, nodes) = grid_for(d, quad.grid_step);
    let curve = final_curve(lanes, table, step, nodes, quad.method);
    Ok(curve.at_node(nodes - 1))
}

/// Sample distances `0, s, 2s, ...` up to the goal, ending exactly at it.
fn sample_points(goal: f64, sample_step: f64) -> Vec<f64> {
    let count = (goal / sample_step + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=count).map(|k| k as f64 * sample_step).collect();
    if goal - out[count] > 1e-9 * goal {
        out.push(goal);
    } else {
        out[count] = goal;
    }
    out
}

fn is_multiple(x: f64, unit: f64) -> bool {
    let r = x / unit;
    (r - r.round()).abs() < 1e-9 * r.max(1.0)
}

pub fn profile(scenario: &Scenario, table: &QTable, sample_step: f64) -> Result<ProbabilityProfile> {
    profile_with(scenario, table, sample_step, &Quadrature::default())
}

/// P(S) sampled every `sample_step` metres from 0 to the goal distance.
///
/// When every sample falls on the quadrature grid the whole profile comes
/// from a single pass of the recursion; otherwise each sample is computed on
/// its own grid.
pub fn profile_with(
    scenario: &Scenario,
    table: &QTable,
    sample_step: f64,
    quad: &Quadrature,
) -> Result<ProbabilityProfile> {
    quad.validate()?;
    if !(sample_step > 0.0) || !sample_step.is_finite() {
        return Err(Error::param(format!("sample step must be positive, got {sample_step}")));
    }
    let goal = scenario.goal_distance();
    let lanes = scenario.lanes();
    let distances = sample_points(goal, sample_step);

    let probabilities = if lanes.len() == 2 {
        distances
            .iter()
            .map(|&d| if d > 0.0 { p_two_lane(d, lanes[0].v, &lanes[1], table) } else { Ok(0.0) })
            .collect::<Result<Vec<_>>>()?
    } else if is_multiple(goal, quad.grid_step) && is_multiple(sample_step, quad.grid_step) {
        let (step, nodes) = grid_for(goal, quad.grid_step);
        let curve = final_curve(lanes, table, step, nodes, quad.method);
        distances
            .iter()
            .map(|&d| curve.at_node(((d / step).round() as usize).min(nodes - 1)))
            .collect()
    } else {
        distances
            .par_iter()
            .map(|&d| {
                if d > 0.0 {
                    p_multilane_with(&scenario.with_goal_distance(d)?, table, quad)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ProbabilityProfile { distances, probabilities, scenario: scenario.clone() })
}
