//! Rest-period detection: maximal runs of samples where deck tilt (and
//! optionally the heave rate) stays inside landing thresholds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::ForecastResult;
use crate::series::MotionSeries;
use crate::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestCriteria {
    pub pitch_max: f64,
    pub roll_max: f64,
    /// Bound on `|d heave / dt|`, if heave participates at all.
    pub heave_rate_max: Option<f64>,
    /// Shortest interval reported, seconds.
    pub min_duration: f64,
}

impl RestCriteria {
    pub fn new(pitch_max: f64, roll_max: f64) -> Self {
        RestCriteria {
            pitch_max,
            roll_max,
            heave_rate_max: None,
            min_duration: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.pitch_max) || !positive(self.roll_max) || !self.heave_rate_max.is_none_or(positive) {
            return Err(Error::InvalidArgument(format!(
                "rest thresholds must be positive: {self:?}"
            )));
        }
        if !(self.min_duration.is_finite() && self.min_duration >= 0.0) {
            return Err(Error::InvalidArgument("min_duration must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestInterval {
    pub start_index: usize,
    /// Inclusive.
    pub end_index: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub duration: f64,
}

/// Heave velocity by central differences, one-sided at the ends.
pub fn heave_rate(samples: &[Sample], dt: f64) -> Vec<f64> {
    let n = samples.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| match i {
            0 => (samples[1][0] - samples[0][0]) / dt,
            i if i == n - 1 => (samples[n - 1][0] - samples[n - 2][0]) / dt,
            i => (samples[i + 1][0] - samples[i - 1][0]) / (2.0 * dt),
        })
        .collect()
}

/// Whether each sample satisfies every criterion.
pub fn calm_mask(samples: &[Sample], dt: f64, criteria: &RestCriteria) -> Vec<bool> {
    let rates = criteria.heave_rate_max.map(|_| heave_rate(samples, dt));
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s[1].abs() <= criteria.pitch_max
                && s[2].abs() <= criteria.roll_max
                && match (&rates, criteria.heave_rate_max) {
                    (Some(r), Some(max)) => r[i].abs() <= max,
                    _ => true,
                }
        })
        .collect()
}

/// Runs of calm samples. `first_index` is the source index of
/// `samples[0]`, and sample `k` sits at `t0 + (first_index + k) * dt`.
fn intervals(
    samples: &[Sample],
    first_index: usize,
    t0: f64,
    dt: f64,
    criteria: &RestCriteria,
) -> Result<Vec<RestInterval>> {
    criteria.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to scan".into()));
    }
    let mask = calm_mask(samples, dt, criteria);
    let mut out = Vec::new();
    let mut k = 0;
    while k < mask.len() {
        if !mask[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < mask.len() && mask[k + 1] {
            k += 1;
        }
        let (a, b) = (first_index + start, first_index + k);
        let duration = (b - a) as f64 * dt;
        if duration >= criteria.min_duration {
            out.push(RestInterval {
                start_index: a,
                end_index: b,
                start_time: t0 + a as f64 * dt,
                end_time: t0 + b as f64 * dt,
                duration,
            });
        }
        k += 1;
    }
    Ok(out)
}

pub fn detect_rest_periods(series: &MotionSeries, criteria: &RestCriteria) -> Result<Vec<RestInterval>> {
    intervals(series.samples(), 0, series.t0(), series.dt(), criteria)
}

/// Applies the rest rule to predicted channels. Interval indices refer to
/// the forecast's source series.
pub fn rest_periods_from_forecast(
    result: &ForecastResult,
    dt: f64,
    criteria: &RestCriteria,
) -> Result<Vec<RestInterval>> {
    if result.is_empty() {
        return Err(Error::InvalidArgument("empty forecast".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    intervals(&result.predictions, result.target_indices[0], result.t0, dt, criteria)
}

pub fn write_intervals_csv<W: Write>(intervals: &[RestInterval], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start_t", "end_t", "duration"])?;
    for iv in intervals {
        w.write_record([
            iv.start_time.to_string(),
            iv.end_time.to_string(),
            iv.duration.to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(rows: &[Sample]) -> MotionSeries {
        MotionSeries::new(0.5, 0.0, rows.to_vec()).unwrap()
    }

    #[test]
    fn everything_calm_is_one_interval() {
        let s = series(&[[5.0, 0.1, -0.2], [5.0, -0.1, 0.2], [0.0, 0.0, 0.0]]);
        let iv = detect_rest_periods(&s, &RestCriteria::new(1.0, 1.0)).unwrap();
        assert_eq!(iv.len(), 1);
        assert_eq!((iv[0].start_index, iv[0].end_index), (0, 2));
        assert_eq!(iv[0].duration, 1.0);
    }

    #[test]
    fn splits_on_rough_samples_and_filters_short_runs() {
        let s = series(&[
            [0.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 0.0, -3.0],
        ]);
        let c = RestCriteria::new(1.0, 1.0);
        let iv = detect_rest_periods(&s, &c).unwrap();
        assert_eq!(
            iv.iter().map(|i| (i.start_index, i.end_index)).collect::<Vec<_>>(),
            [(0, 0), (2, 4)]
        );
        let c = RestCriteria { min_duration: 1.5, ..c };
        assert!(detect_rest_periods(&s, &c).unwrap().is_empty());
    }

    #[test]
    fn heave_rate_uses_central_differences() {
        let rows: Vec<Sample> = [0.0, 1.0, 4.0, 9.0].iter().map(|&h| [h, 0.0, 0.0]).collect();
        assert_eq!(heave_rate(&rows, 1.0), vec![1.0, 2.0, 4.0, 5.0]);
        let c = RestCriteria {
            heave_rate_max: Some(3.0),
            ..RestCriteria::new(1.0, 1.0)
        };
        let iv = detect_rest_periods(&series(&rows), &c).unwrap();
        // dt = 0.5 doubles the rates: 2, 4, 8, 10.
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].end_index, 0);
    }

    #[test]
    fn rejects_bad_thresholds() {
        let s = series(&[[0.0; 3]]);
        assert!(detect_rest_periods(&s, &RestCriteria::new(0.0, 1.0)).is_err());
        let c = RestCriteria {
            heave_rate_max: Some(-1.0),
            ..RestCriteria::new(1.0, 1.0)
        };
        assert!(detect_rest_periods(&s, &c).is_err());
    }

    #[test]
    fn csv_layout() {
        let iv = [RestInterval {
            start_index: 2,
            end_index: 6,
            start_time: 0.2,
            end_time: 0.6,
            duration: 0.4,
        }];
        let mut buf = Vec::new();
        write_intervals_csv(&iv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "start_t,end_t,duration\n0.2,0.6,0.4\n");
    }
}
