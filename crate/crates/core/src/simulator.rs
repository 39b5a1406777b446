//! Time-stepped gap-acceptance microsimulation used as an independent check
//! of the analytic model.
//!
//! Each target lane is a line of point vehicles with i.i.d. log-normal
//! spacings moving at the lane speed. The ego starts at 0 on the first lane.
//! At every step, before moving, it looks at the next lane and accepts if no
//! vehicle there is closer than `g / 2` ahead or behind. It then holds its
//! speed for the lane-change duration, adopts the new lane's speed and starts
//! looking at the following lane. A trial succeeds at checkpoint `c` when the
//! ego completes its last lane change at or before `c`.
//!
//! Vehicles are stored in the frame moving with their lane, where (without
//! speed jitter) they stand still and the ego slides past them.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::headway::SpacingLaw;
use crate::lanechange::{p_multilane_with, Quadrature, Scenario};
use crate::qtable::QTable;
use crate::report::sig6;
use crate::rng::{stream_rng, StreamRng};

/// Upper bound on generated vehicles per lane and trial.
const MAX_VEHICLES_PER_LANE: f64 = 5e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub trials: u64,
    /// Time step (s).
    pub dt: f64,
    /// Spacing of the checkpoint counters (m).
    pub checkpoint_interval: f64,
    pub seed: u64,
    /// Half-width (km/h) of per-vehicle speed deviations; `None` keeps every
    /// vehicle at its lane speed.
    pub jitter_speed_kmh: Option<f64>,
}

impl SimConfig {
    pub fn new(scenario: Scenario, trials: u64, seed: u64) -> Self {
        SimConfig { scenario, trials, dt: 0.1, checkpoint_interval: 500.0, seed, jitter_speed_kmh: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.checkpoint_interval > 0.0) || !self.checkpoint_interval.is_finite() {
            return Err(Error::param(format!(
                "checkpoint interval must be positive, got {}",
                self.checkpoint_interval
            )));
        }
        if self.checkpoint_interval > self.scenario.goal_distance() * (1.0 + 1e-12) {
            return Err(Error::param("checkpoint interval exceeds the goal distance"));
        }
        if let Some(j) = self.jitter_speed_kmh {
            if !(j >= 0.0) || !j.is_finite() {
                return Err(Error::param(format!("jitter must be non-negative, got {j}")));
            }
        }
        Ok(())
    }

    /// `interval, 2 * interval, ...` up to the goal distance.
    pub fn checkpoints(&self) -> Vec<f64> {
        let n = (self.scenario.goal_distance() / self.checkpoint_interval + 1e-9).floor() as usize;
        (1..=n).map(|i| i as f64 * self.checkpoint_interval).collect()
    }

    fn jitter_ms(&self) -> f64 {
        self.jitter_speed_kmh.unwrap_or(0.0) / 3.6
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub checkpoints: Vec<f64>,
    pub pass_counts: Vec<u64>,
    pub trials: u64,
    pub probabilities: Vec<f64>,
    /// Normal-approximation 95% binomial half-widths.
    pub ci_halfwidths: Vec<f64>,
}

impl SimReport {
    fn from_counts(checkpoints: Vec<f64>, pass_counts: Vec<u64>, trials: u64) -> Self {
        let probabilities: Vec<f64> = pass_counts.iter().map(|&c| c as f64 / trials as f64).collect();
        let ci_halfwidths = probabilities
            .iter()
            .map(|&p| 1.96 * (p * (1.0 - p) / trials as f64).sqrt())
            .collect();
        SimReport { checkpoints, pass_counts, trials, probabilities, ci_halfwidths }
    }

    /// `checkpoint_m,passes,trials,p,ci95` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "checkpoint_m,passes,trials,p,ci95")?;
        for i in 0..self.checkpoints.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                sig6(self.checkpoints[i]),
                self.pass_counts[i],
                self.trials,
                sig6(self.probabilities[i]),
                sig6(self.ci_halfwidths[i])
            )?;
        }
        out.flush()
    }
}

/// Vehicles of one lane in that lane's moving frame, sorted by position.
struct LaneField {
    positions: Vec<f64>,
    /// Per-vehicle speed relative to the lane (m/s); empty without jitter.
    drift: Vec<f64>,
    max_drift: f64,
}

impl LaneField {
    fn generate(law: &SpacingLaw, lo: f64, hi: f64, jitter: f64, rng: &mut StreamRng) -> Self {
        // The spacing around the ego's starting point is length-biased and
        // the ego sits uniformly inside it.
        let cover = law.draw_covering(rng);
        let ahead = cover * (1.0 - rng.random::<f64>());
        let mut behind = Vec::new();
        let mut pos = ahead - cover;
        while pos >= lo {
            behind.push(pos);
            pos -= law.draw(rng);
        }
        behind.reverse();
        let mut positions = behind;
        let mut pos = ahead;
        while pos <= hi {
            positions.push(pos);
            pos += law.draw(rng);
        }
        let drift = if jitter > 0.0 {
            // Gaussian with sd jitter / 2, redrawn outside +-jitter
            positions
                .iter()
                .map(|_| loop {
                    let z: f64 = rng.sample(StandardNormal);
                    if z.abs() <= 2.0 {
                        break 0.5 * jitter * z;
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        LaneField { positions, drift, max_drift: jitter }
    }

    /// True if no vehicle is strictly closer than `half` to `r` at time `t`.
    /// `hint` caches the search position between calls.
    fn clear_around(&self, r: f64, t: f64, half: f64, hint: &mut usize) -> bool {
        let p = &self.positions;
        if self.drift.is_empty() {
            let lo = r - half;
            let mut i = (*hint).min(p.len());
            while i > 0 && p[i - 1] > lo {
                i -= 1;
            }
            while i < p.len() && p[i] <= lo {
                i += 1;
            }
            *hint = i;
            i == p.len() || p[i] >= r + half
        } else {
            let reach = half + self.max_drift * t;
            let start = p.partition_point(|&x| x <= r - reach);
            p[start..]
                .iter()
                .zip(&self.drift[start..])
                .take_while(|(&x, _)| x < r + reach)
                .all(|(&x, &dv)| (x + dv * t - r).abs() >= half)
        }
    }
}

/// Ego state recorded at every step by [`trace_trial`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoStep {
    pub time: f64,
    pub position: f64,
    pub lane: usize,
    pub changing: bool,
}

struct Plan {
    laws: Vec<SpacingLaw>,
    bounds: Vec<(f64, f64)>,
    horizon: f64,
    jitter: f64,
}

fn plan(config: &SimConfig) -> Result<Plan> {
    config.validate()?;
    let lanes = config.scenario.lanes();
    let horizon = config.scenario.goal_distance();
    let jitter = config.jitter_ms();
    let mut laws = vec![SpacingLaw::new(0.0, 0.0)];
    let mut bounds = vec![(0.0, 0.0)];
    for j in 1..lanes.len() {
        let law = SpacingLaw::new(lanes[j].mu, lanes[j].sigma);
        // ego speed before entering lane j is one of the earlier lane speeds
        let slowest = lanes[..j].iter().map(|l| l.v).fold(f64::INFINITY, f64::min);
        let t_max = horizon / slowest + lanes[j].t_lc;
        let pad = 10.0 * law.mean() + lanes[j].g_crit + jitter * t_max;
        let lo = (slowest - lanes[j].v).min(0.0) * t_max - pad;
        let hi = horizon + pad;
        let expected = (hi - lo) / law.mean();
        if !expected.is_finite() || expected > MAX_VEHICLES_PER_LANE {
            return Err(Error::Config(format!(
                "lane {} would need about {expected:.3e} vehicles per trial; headway mean {:.3e} m is too small",
                j + 1,
                law.mean()
            )));
        }
        laws.push(law);
        bounds.push((lo, hi));
    }
    Ok(Plan { laws, bounds, horizon, jitter })
}

/// Runs one trial and returns the position at which the ego completed its
/// final lane change, if it did so before passing the horizon.
fn run_trial(config: &SimConfig, plan: &Plan, trial: u64, record: &mut impl FnMut(EgoStep)) -> Option<f64> {
    let lanes = config.scenario.lanes();
    let last = lanes.len() - 1;
    let dt = config.dt;
    let mut rng = stream_rng(config.seed, trial);
    let fields: Vec<Option<LaneField>> = (0..lanes.len())
        .map(|j| {
            (j > 0).then(|| LaneField::generate(&plan.laws[j], plan.bounds[j].0, plan.bounds[j].1, plan.jitter, &mut rng))
        })
        .collect();

    let mut lane = 0;
    let mut hint = 0usize;
    let mut changing: Option<u64> = None;
    // position is tracked per constant-speed phase to avoid drift from summing
    let (mut phase_x, mut phase_step) = (0.0f64, 0u64);
    let mut step = 0u64;
    loop {
        let time = step as f64 * dt;
        let x = phase_x + lanes[lane].v * dt * (step - phase_step) as f64;
        record(EgoStep { time, position: x, lane, changing: changing.is_some() });
        if x > plan.horizon {
            return None;
        }
        if changing.is_none() {
            let target = &lanes[lane + 1];
            let field = fields[lane + 1].as_ref().expect("target lanes have fields");
            if field.clear_around(x - target.v * time, time, 0.5 * target.g_crit, &mut hint) {
                changing = Some((target.t_lc / dt).round() as u64);
            }
        }
        let done = matches!(changing, Some(0));
        if !done {
            step += 1;
            if let Some(left) = changing.as_mut() {
                *left -= 1;
            }
        }
        if changing == Some(0) {
            let x = phase_x + lanes[lane].v * dt * (step - phase_step) as f64;
            lane += 1;
            changing = None;
            hint = 0;
            phase_x = x;
            phase_step = step;
            if lane == last {
                record(EgoStep { time: step as f64 * dt, position: x, lane, changing: false });
                return Some(x);
            }
        }
    }
}

pub fn run_trials(config: &SimConfig) -> Result<SimReport> {
    let plan = plan(config)?;
    let checkpoints = config.checkpoints();
    let n = checkpoints.len();
    let pass_counts = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &plan, trial, &mut |_| {}))
        .fold(
            || vec![0u64; n],
            |mut acc, arrival| {
                if let Some(x) = arrival {
                    for (count, &c) in acc.iter_mut().zip(&checkpoints) {
                        if x <= c + 1e-9 {
                            *count += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| vec![0u64; n], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    Ok(SimReport::from_counts(checkpoints, pass_counts, config.trials))
}

/// Step-by-step ego states of a single trial.
pub fn trace_trial(config: &SimConfig, trial: u64) -> Result<Vec<EgoStep>> {
    let plan = plan(config)?;
    let mut steps = Vec::new();
    run_trial(config, &plan, trial, &mut |s| steps.push(s));
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub report: SimReport,
    pub model: Vec<f64>,
    /// |simulated - model| per checkpoint.
    pub abs_errors: Vec<f64>,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

impl Comparison {
    /// `checkpoint_m,simulated,model,abs_error,ci95` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "checkpoint_m,simulated,model,abs_error,ci95")?;
        let r = &self.report;
        for i in 0..r.checkpoints.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                sig6(r.checkpoints[i]),
                sig6(r.probabilities[i]),
                sig6(self.model[i]),
                sig6(self.abs_errors[i]),
                sig6(r.ci_halfwidths[i])
            )?;
        }
        out.flush()
    }
}

pub fn compare_with_model(config: &SimConfig, table: &QTable) -> Result<Comparison> {
    compare_with_model_using(config, table, &Quadrature::default())
}

pub fn compare_with_model_using(config: &SimConfig, table: &QTable, quad: &Quadrature) -> Result<Comparison> {
    let report = run_trials(config)?;
    let model = report
        .checkpoints
        .iter()
        .map(|&c| p_multilane_with(&config.scenario.with_goal_distance(c)?, table, quad))
        .collect::<Result<Vec<_>>>()?;
    let abs_errors: Vec<f64> = model.iter().zip(&report.probabilities).map(|(m, s)| (m - s).abs()).collect();
    let max_abs_error = abs_errors.iter().copied().fold(0.0, f64::max);
    let mean_abs_error = abs_errors.iter().sum::<f64>() / abs_errors.len().max(1) as f64;
    Ok(Comparison { report, model, abs_errors, max_abs_error, mean_abs_error })
}
