//! TOML run configuration shared by the CLI subcommands.
//!
//! A configuration describes the lanes either explicitly (per-lane `mu`,
//! `sigma`, `g_crit`, or a headway sample file to fit) or through a
//! `[traffic]` block of aggregate descriptors. Mixing both is an error.
//!
//! ```toml
//! goal_distance = 5000.0
//! seed = 7
//!
//! [traffic]
//! rho_l = 1200.0
//! delta = 2.0
//!
//! [[lane]]
//! speed_kmh = 120.0
//! [[lane]]
//! speed_kmh = 110.0
//! [[lane]]
//! speed_kmh = 100.0
//!
//! [sweep]
//! var = "delta"
//! from = 0.4
//! to = 3.2
//! step = 0.4
//! ```

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimation::{fit_lognormal, profiles_from_spec, read_headways, TrafficSpec};
use crate::lanechange::{LaneProfile, Scenario};
use crate::qtable::stepped;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    goal_distance: Option<f64>,
    seed: Option<u64>,
    trials: Option<f64>,
    grid_step: Option<f64>,
    sample_step: Option<f64>,
    dt: Option<f64>,
    checkpoint_interval: Option<f64>,
    jitter_kmh: Option<f64>,
    table: Option<PathBuf>,
    output: Option<PathBuf>,
    traffic: Option<RawTraffic>,
    #[serde(default)]
    lane: Vec<RawLane>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraffic {
    rho_l: f64,
    delta: f64,
    s0: Option<f64>,
    sigma_default: Option<f64>,
    t_lc: Option<f64>,
    /// Lane count for the standard speed ladder when no `[[lane]]` is given.
    lanes: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLane {
    speed_kmh: Option<f64>,
    speed_ms: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    headways: Option<PathBuf>,
    g_crit: Option<f64>,
    t_lc: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    var: String,
    from: f64,
    to: f64,
    step: f64,
    at: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// Density, veh/h/ln.
    RhoL,
    /// Desired time headway, s.
    Delta,
    /// Start-lane speed, km/h.
    V1,
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rho_l" => Ok(SweepVar::RhoL),
            "delta" => Ok(SweepVar::Delta),
            "v1" => Ok(SweepVar::V1),
            other => Err(Error::Config(format!("unknown sweep variable {other:?}; expected rho_l, delta or v1"))),
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVar::RhoL => "rho_l",
            SweepVar::Delta => "delta",
            SweepVar::V1 => "v1",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    /// Distance of the cross-section (m).
    pub at: f64,
}

impl SweepSpec {
    pub const DEFAULT_AT: f64 = 1000.0;

    pub fn values(&self) -> Result<Vec<f64>> {
        stepped(self.from, self.to, self.step).map_err(|e| Error::Config(format!("sweep range: {e}")))
    }
}

/// Where the lane parameters came from.
#[derive(Debug, Clone, PartialEq)]
pub enum LaneSource {
    Explicit,
    Aggregate(TrafficSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub source: LaneSource,
    pub seed: u64,
    pub trials: u64,
    pub grid_step: f64,
    pub sample_step: f64,
    pub dt: f64,
    pub checkpoint_interval: f64,
    pub jitter_kmh: Option<f64>,
    /// Resolved relative to the configuration file.
    pub table: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("config file {} not found", path.display())),
            _ => Error::Io(e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses a document; relative paths inside it are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };

        let goal_distance = raw.goal_distance.unwrap_or(5000.0);
        let (lanes, source) = build_lanes(&raw, base)?;
        let scenario = Scenario::new(lanes, goal_distance).map_err(to_config)?;

        let trials = match raw.trials {
            None => 100_000,
            Some(t) => parse_count(t).ok_or_else(|| Error::Config(format!("trials must be a positive integer, got {t}")))?,
        };
        let positive = |name: &str, v: Option<f64>, default: f64| -> Result<f64> {
            let v = v.unwrap_or(default);
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(j) = raw.jitter_kmh {
            if !(j >= 0.0) || !j.is_finite() {
                return Err(Error::Config(format!("jitter_kmh must be non-negative, got {j}")));
            }
        }
        let table = raw.table.as_ref().map(resolve);
        if let Some(t) = &table {
            if !t.is_file() {
                return Err(Error::MissingArtifact(t.clone()));
            }
        }
        let sweep = match raw.sweep {
            None => None,
            Some(s) => {
                let spec = SweepSpec {
                    var: s.var.parse()?,
                    from: s.from,
                    to: s.to,
                    step: s.step,
                    at: positive("sweep.at", s.at, SweepSpec::DEFAULT_AT)?,
                };
                spec.values()?;
                Some(spec)
            }
        };
        let config = RunConfig {
            scenario,
            source,
            seed: raw.seed.unwrap_or(0),
            trials,
            grid_step: positive("grid_step", raw.grid_step, 5.0)?,
            sample_step: positive("sample_step", raw.sample_step, 10.0)?,
            dt: positive("dt", raw.dt, 0.1)?,
            checkpoint_interval: positive("checkpoint_interval", raw.checkpoint_interval, 500.0)?,
            jitter_kmh: raw.jitter_kmh,
            table,
            output: raw.output.as_ref().map(resolve),
            sweep,
        };
        if let Some(s) = &config.sweep {
            config.scenario_at(s.var, s.from)?;
        }
        Ok(config)
    }

    /// The configured scenario with one sweep variable replaced.
    pub fn scenario_at(&self, var: SweepVar, value: f64) -> Result<Scenario> {
        let goal = self.scenario.goal_distance();
        match (var, &self.source) {
            (SweepVar::V1, _) => {
                let mut lanes = self.scenario.lanes().to_vec();
                lanes[0].v = value / 3.6;
                Scenario::new(lanes, goal)
            }
            (_, LaneSource::Explicit) => Err(Error::Config(format!(
                "sweeping {var} needs a [traffic] block; this config gives lanes explicitly"
            ))),
            (_, LaneSource::Aggregate(spec)) => {
                let mut spec = spec.clone();
                if var == SweepVar::RhoL {
                    spec.rho_l = value;
                } else {
                    spec.delta = value;
                }
                let mut lanes = profiles_from_spec(&spec)?;
                // a v1 override in the file is kept
                lanes[0].v = self.scenario.lanes()[0].v;
                Scenario::new(lanes, goal)
            }
        }
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::Parameter(m) => Error::Config(m),
        other => other,
    }
}

/// Accepts integral floats such as `1e5`.
pub fn parse_count(t: f64) -> Option<u64> {
    (t >= 1.0 && t.fract() == 0.0 && t <= u64::MAX as f64).then_some(t as u64)
}

fn lane_speed(i: usize, lane: &RawLane) -> Result<f64> {
    match (lane.speed_kmh, lane.speed_ms) {
        (Some(k), None) => Ok(k / 3.6),
        (None, Some(v)) => Ok(v),
        (Some(_), Some(_)) => Err(Error::Config(format!("lane {}: give speed_kmh or speed_ms, not both", i + 1))),
        (None, None) => Err(Error::Config(format!("lane {}: missing speed_kmh", i + 1))),
    }
}

fn build_lanes(raw: &RawConfig, base: &Path) -> Result<(Vec<LaneProfile>, LaneSource)> {
    let has_explicit = |l: &RawLane| l.mu.is_some() || l.sigma.is_some() || l.headways.is_some() || l.g_crit.is_some();
    let any_explicit = raw.lane.iter().any(has_explicit);

    if let Some(t) = &raw.traffic {
        if any_explicit {
            return Err(Error::Config(
                "lane parameters are given both per lane and through [traffic]; use one or the other".into(),
            ));
        }
        let speeds_kmh = if raw.lane.is_empty() {
            let n = t.lanes.ok_or_else(|| Error::Config("[traffic] needs `lanes` when no [[lane]] is given".into()))?;
            TrafficSpec::base_case(n).speeds_kmh
        } else {
            if t.lanes.is_some_and(|n| n != raw.lane.len()) {
                return Err(Error::Config("[traffic].lanes disagrees with the number of [[lane]] blocks".into()));
            }
            raw.lane.iter().enumerate().map(|(i, l)| lane_speed(i, l).map(|v| v * 3.6)).collect::<Result<_>>()?
        };
        let mut spec = TrafficSpec::new(t.rho_l, t.delta, speeds_kmh);
        spec.s0 = t.s0.unwrap_or(spec.s0);
        spec.sigma_default = t.sigma_default.unwrap_or(spec.sigma_default);
        spec.t_lc = t.t_lc.unwrap_or(spec.t_lc);
        let mut lanes = profiles_from_spec(&spec).map_err(to_config)?;
        for (lane, raw_lane) in lanes.iter_mut().zip(&raw.lane) {
            if let Some(t_lc) = raw_lane.t_lc {
                lane.t_lc = t_lc;
            }
        }
        return Ok((lanes, LaneSource::Aggregate(spec)));
    }

    if raw.lane.is_empty() {
        return Err(Error::Config("no lanes: add [[lane]] blocks or a [traffic] block".into()));
    }
    let mut lanes = Vec::with_capacity(raw.lane.len());
    for (i, l) in raw.lane.iter().enumerate() {
        let v = lane_speed(i, l)?;
        if i == 0 && !has_explicit(l) {
            // the start lane only needs a speed
            lanes.push(LaneProfile { v, mu: 0.0, sigma: 0.0, g_crit: 1.0, t_lc: 0.0 });
            continue;
        }
        let (mu, sigma) = match (l.mu, l.sigma, &l.headways) {
            (Some(mu), Some(sigma), None) => (mu, sigma),
            (None, None, Some(file)) => {
                let path = if file.is_absolute() { file.clone() } else { base.join(file) };
                let f = fs::File::open(&path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => Error::MissingArtifact(path.clone()),
                    _ => Error::Io(e),
                })?;
                let sample = read_headways(BufReader::new(f), i + 1)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                fit_lognormal(&sample).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            _ => {
                return Err(Error::Config(format!(
                    "lane {}: give both mu and sigma, or a headways file",
                    i + 1
                )))
            }
        };
        let g_crit = l.g_crit.ok_or_else(|| Error::Config(format!("lane {}: missing g_crit", i + 1)))?;
        let t_lc = l.t_lc.unwrap_or(TrafficSpec::DEFAULT_T_LC);
        lanes.push(LaneProfile::new(v, mu, sigma, g_crit, t_lc).map_err(|e| match e {
            Error::Parameter(m) => Error::Config(format!("lane {}: {m}", i + 1)),
            other => other,
        })?);
    }
    Ok((lanes, LaneSource::Explicit))
}

/// Template configuration for the standard base case with `n` lanes.
pub fn base_case_template(n: usize) -> String {
    let spec = TrafficSpec::base_case(n);
    let mut s = String::from(
        "goal_distance = 5000.0\nseed = 1\ntrials = 100000\nsample_step = 10.0\ngrid_step = 5.0\n\n[traffic]\nrho_l = 1200.0\ndelta = 2.0\ns0 = 7.0\nsigma_default = 0.8\nt_lc = 3.0\n",
    );
    for v in &spec.speeds_kmh {
        s.push_str(&format!("\n[[lane]]\nspeed_kmh = {v:.1}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("."))
    }

    #[test]
    fn template_round_trips_to_base_case() {
        let c = parse(&base_case_template(3)).unwrap();
        let expected = profiles_from_spec(&TrafficSpec::base_case(3)).unwrap();
        assert_eq!(c.scenario.lanes(), &expected[..]);
        assert_eq!(c.trials, 100_000);
        assert!(matches!(c.source, LaneSource::Aggregate(_)));
    }

    #[test]
    fn traffic_lane_count_shortcut() {
        let c = parse("[traffic]\nrho_l = 800\ndelta = 1.5\nlanes = 4\n").unwrap();
        assert_eq!(c.scenario.lanes().len(), 4);
        assert!((c.scenario.lanes()[0].v - 130.0 / 3.6).abs() < 1e-12);
    }

    #[test]
    fn explicit_lanes() {
        let c = parse(
            "goal_distance = 1000\n[[lane]]\nspeed_ms = 33.3\n[[lane]]\nspeed_ms = 30.6\nmu = 4.4\nsigma = 0.8\ng_crit = 68\n",
        )
        .unwrap();
        let l = c.scenario.lanes()[1];
        assert_eq!((l.v, l.mu, l.sigma, l.g_crit, l.t_lc), (30.6, 4.4, 0.8, 68.0, 3.0));
        assert_eq!(c.source, LaneSource::Explicit);
    }

    #[test]
    fn mixing_modes_is_rejected() {
        let e = parse("[traffic]\nrho_l = 800\ndelta = 1.5\n[[lane]]\nspeed_kmh = 120\n[[lane]]\nspeed_kmh = 110\nmu = 4\nsigma = 1\n")
            .unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn incomplete_and_unknown_keys_are_rejected() {
        for bad in [
            "[[lane]]\nspeed_kmh = 120\n[[lane]]\nspeed_kmh = 110\nmu = 4\ng_crit = 60\n",
            "[[lane]]\nspeed_kmh = 120\n[[lane]]\nspeed_kmh = 110\nmu = 4\nsigma = 1\n",
            "[[lane]]\nspeed_kmh = 120\n",
            "colour = 3\n[traffic]\nrho_l = 1\ndelta = 1\nlanes = 2\n",
            "[traffic]\nrho_l = -1\ndelta = 1\nlanes = 2\n",
            "trials = 2.5\n[traffic]\nrho_l = 1\ndelta = 1\nlanes = 2\n",
            "[traffic]\nrho_l = 1\ndelta = 1\nlanes = 2\n[sweep]\nvar = \"speed\"\nfrom = 1\nto = 2\nstep = 1\n",
        ] {
            assert!(matches!(parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn missing_files_are_reported() {
        let e = parse("table = \"nope.bin\"\n[traffic]\nrho_l = 1\ndelta = 1\nlanes = 2\n").unwrap_err();
        assert!(matches!(e, Error::MissingArtifact(_)));
        let e = parse("[[lane]]\nspeed_kmh = 120\n[[lane]]\nspeed_kmh = 110\nheadways = \"nope.txt\"\ng_crit = 60\n")
            .unwrap_err();
        assert!(matches!(e, Error::MissingArtifact(_)));
    }

    #[test]
    fn scientific_trials() {
        let c = parse("trials = 1e5\n[traffic]\nrho_l = 1\ndelta = 1\nlanes = 2\n").unwrap();
        assert_eq!(c.trials, 100_000);
    }

    #[test]
    fn sweep_substitution() {
        let c = parse(&format!("{}\n[sweep]\nvar = \"delta\"\nfrom = 0.4\nto = 3.2\nstep = 0.4\n", base_case_template(2))).unwrap();
        let s = c.sweep.clone().unwrap();
        assert_eq!(s.values().unwrap().len(), 8);
        assert_eq!(s.at, 1000.0);
        let sc = c.scenario_at(SweepVar::Delta, 0.4).unwrap();
        let v2 = sc.lanes()[1].v;
        assert!((sc.lanes()[1].g_crit - (7.0 + 0.4 * v2)).abs() < 1e-12);
        let sc = c.scenario_at(SweepVar::V1, 90.0).unwrap();
        assert!((sc.lanes()[0].v - 25.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_configs_cannot_sweep_aggregates() {
        let c = parse("[[lane]]\nspeed_kmh = 120\n[[lane]]\nspeed_kmh = 110\nmu = 4\nsigma = 1\ng_crit = 60\n").unwrap();
        assert!(c.scenario_at(SweepVar::RhoL, 400.0).is_err());
        assert!(c.scenario_at(SweepVar::V1, 100.0).is_ok());
    }
}
