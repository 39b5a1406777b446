//! Headway fitting and aggregate-traffic lane profiles.

use std::io::BufRead;

use crate::error::{Error, Result};
use crate::lanechange::LaneProfile;

pub const MIN_FIT_SAMPLES: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadwaySample {
    pub values: Vec<f64>,
    pub lane_id: usize,
}

/// Log-normal `(mu, sigma)` by moments of the log headways; `sigma` uses the
/// n - 1 denominator.
pub fn fit_lognormal(sample: &HeadwaySample) -> Result<(f64, f64)> {
    if let Some((i, v)) = sample.values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::param(format!("headway #{} is {v}; all headways must be positive", i + 1)));
    }
    let n = sample.values.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::SampleSize { got: n, need: MIN_FIT_SAMPLES });
    }
    let logs: Vec<f64> = sample.values.iter().map(|v| v.ln()).collect();
    let mu = logs.iter().sum::<f64>() / n as f64;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mu, var.sqrt()))
}

/// Reads a single-column headway file. Blank lines and `#` comments are
/// skipped; a non-numeric first data line is taken as a header. Errors name
/// the offending line.
pub fn read_headways<R: BufRead>(input: R, lane_id: usize) -> Result<HeadwaySample> {
    let mut values = Vec::new();
    let mut seen_data = false;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let cell = line.split([',', ';', '\t']).next().unwrap_or("").trim();
        if cell.is_empty() || cell.starts_with('#') {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => values.push(v),
            Ok(v) => return Err(Error::param(format!("line {}: headway {v} is not positive", i + 1))),
            Err(_) if !seen_data => {}
            Err(_) => return Err(Error::param(format!("line {}: {cell:?} is not a number", i + 1))),
        }
        seen_data = true;
    }
    Ok(HeadwaySample { values, lane_id })
}

/// Aggregate description of traffic on all lanes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSpec {
    /// Vehicles per hour per lane.
    pub rho_l: f64,
    /// Minimum desired time headway (s).
    pub delta: f64,
    /// Standstill distance (m).
    pub s0: f64,
    /// Desired speed of each lane, start lane first (km/h).
    pub speeds_kmh: Vec<f64>,
    /// Headway log-sd used for every lane.
    pub sigma_default: f64,
    /// Lane-change duration (s).
    pub t_lc: f64,
}

impl TrafficSpec {
    pub const DEFAULT_S0: f64 = 7.0;
    pub const DEFAULT_SIGMA: f64 = 0.8;
    pub const DEFAULT_T_LC: f64 = 3.0;

    pub fn new(rho_l: f64, delta: f64, speeds_kmh: Vec<f64>) -> Self {
        TrafficSpec {
            rho_l,
            delta,
            s0: Self::DEFAULT_S0,
            speeds_kmh,
            sigma_default: Self::DEFAULT_SIGMA,
            t_lc: Self::DEFAULT_T_LC,
        }
    }

    /// Highway base case for `n` lanes: 1200 veh/h/ln, delta = 2 s, 100 km/h on
    /// the rightmost lane and 10 km/h more for each lane to the left.
    pub fn base_case(n: usize) -> Self {
        let speeds = (0..n).map(|i| 100.0 + 10.0 * (n - 1 - i) as f64).collect();
        TrafficSpec::new(1200.0, 2.0, speeds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_l > 0.0) || !self.rho_l.is_finite() {
            return Err(Error::param(format!("rho_l must be positive, got {}", self.rho_l)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::param(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.s0 >= 0.0) || !self.s0.is_finite() {
            return Err(Error::param(format!("s0 must be non-negative, got {}", self.s0)));
        }
        if !(self.sigma_default >= 0.0) || !self.sigma_default.is_finite() {
            return Err(Error::param(format!("sigma_default must be non-negative, got {}", self.sigma_default)));
        }
        if !(self.t_lc >= 0.0) || !self.t_lc.is_finite() {
            return Err(Error::param(format!("t_lc must be non-negative, got {}", self.t_lc)));
        }
        if let Some(v) = self.speeds_kmh.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::param(format!("lane speeds must be positive, got {v}")));
        }
        Ok(())
    }

    /// Mean time headway (s).
    pub fn time_headway(&self) -> f64 {
        3600.0 / self.rho_l
    }
}

/// Lane profiles implied by aggregate traffic.
///
/// The mean distance headway of lane i is `v_i * 3600 / rho_l`; `mu` is set
/// so the log-normal mean `e^(mu + sigma^2 / 2)` equals it. The critical gap
/// is `s0 + delta * v_i`.
pub fn profiles_from_spec(spec: &TrafficSpec) -> Result<Vec<LaneProfile>> {
    spec.validate()?;
    let sigma = spec.sigma_default;
    spec.speeds_kmh
        .iter()
        .map(|&kmh| {
            let v = kmh / 3.6;
            let mean = v * spec.time_headway();
            LaneProfile::new(v, mean.ln() - 0.5 * sigma * sigma, sigma, spec.s0 + spec.delta * v, spec.t_lc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::headway::SpacingLaw;
    use crate::rng::stream_rng;

    #[test]
    fn constant_sample() {
        let s = HeadwaySample { values: vec![2f64.exp(); 50], lane_id: 2 };
        let (mu, sigma) = fit_lognormal(&s).unwrap();
        assert!((mu - 2.0).abs() < 1e-12);
        assert_eq!(sigma, 0.0);
    }

    #[test]
    fn recovers_generator() {
        let law = SpacingLaw::new(4.4, 0.8);
        let mut rng = stream_rng(3, 0);
        let values = (0..100_000).map(|_| law.draw(&mut rng)).collect();
        let (mu, sigma) = fit_lognormal(&HeadwaySample { values, lane_id: 2 }).unwrap();
        assert!((mu - 4.4).abs() < 0.02, "{mu}");
        assert!((sigma - 0.8).abs() < 0.02, "{sigma}");
    }

    #[test]
    fn rejects_zero_and_short_samples() {
        let mut values = vec![10.0; 40];
        values[7] = 0.0;
        assert!(matches!(fit_lognormal(&HeadwaySample { values, lane_id: 1 }), Err(Error::Parameter(_))));
        let short = HeadwaySample { values: vec![10.0; 29], lane_id: 1 };
        assert!(matches!(fit_lognormal(&short), Err(Error::SampleSize { got: 29, need: 30 })));
    }

    #[test]
    fn reads_with_header_and_reports_bad_line() {
        let s = read_headways("headway_m\n12.5\n\n30\n".as_bytes(), 2).unwrap();
        assert_eq!(s.values, vec![12.5, 30.0]);
        let err = read_headways("h\n12.5\n0\n".as_bytes(), 2).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = read_headways("1\nfoo\n".as_bytes(), 2).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn time_headways() {
        let spec = TrafficSpec::new(400.0, 2.0, vec![108.0]);
        assert_eq!(spec.time_headway(), 9.0);
        let lane = profiles_from_spec(&spec).unwrap()[0];
        assert!((lane.v - 30.0).abs() < 1e-12);
        let mean = (lane.mu + 0.5 * lane.sigma * lane.sigma).exp();
        assert!((mean - 270.0).abs() < 1e-9);
        assert_eq!(TrafficSpec::new(2400.0, 2.0, vec![108.0]).time_headway(), 1.5);
    }

    #[test]
    fn zero_sigma_uses_plain_log_mean() {
        let mut spec = TrafficSpec::new(1200.0, 2.0, vec![108.0]);
        spec.sigma_default = 0.0;
        let lane = profiles_from_spec(&spec).unwrap()[0];
        assert_eq!(lane.mu, 90f64.ln());
    }

    #[test]
    fn critical_gap_from_delta_and_speed() {
        let spec = TrafficSpec::base_case(3);
        assert_eq!(spec.speeds_kmh, vec![120.0, 110.0, 100.0]);
        let lanes = profiles_from_spec(&spec).unwrap();
        for lane in &lanes {
            assert!((lane.g_crit - (7.0 + 2.0 * lane.v)).abs() < 1e-12);
            assert_eq!(lane.t_lc, 3.0);
        }
        assert!(lanes[0].g_crit > lanes[1].g_crit);
    }
}
