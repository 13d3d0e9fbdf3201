//! One-step-ahead forecasting from observed history and absolute-error
//! reporting.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::predict_batch;
use crate::series::{MotionSeries, Normalizer};
use crate::train::{ModelArtifact, PREDICT_CHUNK};
use crate::wavegen::Channel;
use crate::{Sample, CHANNELS};

/// Predictions in physical units aligned with the true samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub target_indices: Vec<usize>,
    pub predictions: Vec<Sample>,
    pub truths: Vec<Sample>,
    /// Time of source sample 0.
    pub t0: f64,
    pub dt: f64,
}

impl ForecastResult {
    pub fn len(&self) -> usize {
        self.target_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_indices.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.target_indices[k] as f64 * self.dt
    }
}

/// Predicts every sample from `start_index` on, each from the true
/// preceding window, using the artifact's stored normalizer.
pub fn predict_series(artifact: &ModelArtifact, series: &MotionSeries, start_index: usize) -> Result<ForecastResult> {
    predict_series_with(artifact, series, start_index, &artifact.normalizer)
}

/// [`predict_series`] with an explicit normalizer in place of the stored one.
pub fn predict_series_with(
    artifact: &ModelArtifact,
    series: &MotionSeries,
    start_index: usize,
    normalizer: &Normalizer,
) -> Result<ForecastResult> {
    let l = artifact.config.lookback;
    let n = series.len();
    if n < l + 1 {
        return Err(Error::InvalidArgument(format!(
            "series of length {n} is shorter than lookback + 1 = {}",
            l + 1
        )));
    }
    if start_index < l || start_index >= n {
        return Err(Error::InvalidArgument(format!(
            "start index {start_index} must lie in {l}..{n}"
        )));
    }
    let normed: Vec<Sample> = series.samples().iter().map(|s| normalizer.apply_sample(s)).collect();
    let target_indices: Vec<usize> = (start_index..n).collect();
    let mut predictions = Vec::with_capacity(target_indices.len());

    for chunk in target_indices.chunks(PREDICT_CHUNK) {
        let windows = Array3::from_shape_fn((chunk.len(), l, CHANNELS), |(k, r, c)| normed[chunk[k] - l + r][c]);
        let y = predict_batch(&artifact.params, windows.view())?;
        for row in y.outer_iter() {
            predictions.push(normalizer.invert_sample(&[row[0], row[1], row[2]]));
        }
    }
    let truths = series.samples()[start_index..].to_vec();
    Ok(ForecastResult {
        target_indices,
        predictions,
        truths,
        t0: series.t0(),
        dt: series.dt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelError {
    /// `|prediction - truth|` per forecast point.
    #[serde(skip)]
    pub curve: Vec<f64>,
    pub mae: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub channels: [ChannelError; 3],
    pub count: usize,
}

impl ErrorReport {
    pub fn channel(&self, ch: Channel) -> &ChannelError {
        &self.channels[ch.index()]
    }

    /// `{"count", "heave": {"mae", "max_error"}, "pitch": ..., "roll": ...}`
    pub fn summary_json(&self) -> String {
        let mut map = serde_json::Map::new();
        map.insert("count".into(), self.count.into());
        for ch in Channel::ALL {
            map.insert(
                ch.name().into(),
                serde_json::to_value(self.channel(ch)).expect("finite summary"),
            );
        }
        serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("summary serializes")
    }
}

pub fn error_report(result: &ForecastResult) -> Result<ErrorReport> {
    if result.is_empty() {
        return Err(Error::InvalidArgument("empty forecast".into()));
    }
    if result.predictions.len() != result.len() || result.truths.len() != result.len() {
        return Err(Error::ShapeMismatch("forecast fields differ in length".into()));
    }
    let channels = std::array::from_fn(|c| {
        let curve: Vec<f64> = result
            .predictions
            .iter()
            .zip(&result.truths)
            .map(|(p, t)| (p[c] - t[c]).abs())
            .collect();
        let mae = curve.iter().sum::<f64>() / curve.len() as f64;
        let max_error = curve.iter().copied().fold(0.0, f64::max);
        ChannelError { curve, mae, max_error }
    });
    Ok(ErrorReport {
        channels,
        count: result.len(),
    })
}

/// One row of the long-format error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub t: f64,
    pub channel: String,
    pub truth: f64,
    pub prediction: f64,
    pub abs_error: f64,
}

/// Rows grouped by channel (heave, pitch, roll), time order within each.
pub fn error_rows(result: &ForecastResult) -> Vec<ErrorRow> {
    let mut rows = Vec::with_capacity(result.len() * CHANNELS);
    for ch in Channel::ALL {
        let c = ch.index();
        for k in 0..result.len() {
            let (truth, prediction) = (result.truths[k][c], result.predictions[k][c]);
            rows.push(ErrorRow {
                t: result.time(k),
                channel: ch.name().into(),
                truth,
                prediction,
                abs_error: (prediction - truth).abs(),
            });
        }
    }
    rows
}

pub fn write_error_csv<W: Write>(result: &ForecastResult, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "channel", "truth", "prediction", "abs_error"])?;
    for r in error_rows(result) {
        w.write_record([
            r.t.to_string(),
            r.channel,
            r.truth.to_string(),
            r.prediction.to_string(),
            r.abs_error.to_string(),
        ])?;
    }
    w.flush()
}

pub fn save_error_csv(result: &ForecastResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_error_csv(result, file).map_err(|e| Error::io(path, e))
}

pub fn read_error_csv(path: &Path) -> Result<Vec<ErrorRow>> {
    let mut rdr = csv::Reader::from_reader(File::open(path).map_err(|e| Error::io(path, e))?);
    rdr.deserialize()
        .collect::<std::result::Result<Vec<ErrorRow>, _>>()
        .map_err(|e| Error::malformed(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(preds: Vec<Sample>, truths: Vec<Sample>) -> ForecastResult {
        ForecastResult {
            target_indices: (40..40 + preds.len()).collect(),
            predictions: preds,
            truths,
            t0: 0.0,
            dt: 0.1,
        }
    }

    #[test]
    fn perfect_forecast_has_zero_error() {
        let truths = vec![[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]];
        let rep = error_report(&result(truths.clone(), truths)).unwrap();
        for ch in &rep.channels {
            assert_eq!(ch.mae, 0.0);
            assert_eq!(ch.max_error, 0.0);
            assert!(ch.curve.iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn constant_heave_offset() {
        let truths: Vec<Sample> = (0..7).map(|i| [i as f64 * 0.25, -(i as f64), 2.0]).collect();
        let preds = truths.iter().map(|t| [t[0] + 0.3, t[1], t[2]]).collect();
        let rep = error_report(&result(preds, truths)).unwrap();
        assert!((rep.channel(Channel::Heave).mae - 0.3).abs() < 1e-12);
        assert_eq!(rep.channel(Channel::Pitch).mae, 0.0);
        assert_eq!(rep.channel(Channel::Roll).mae, 0.0);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(error_report(&result(vec![], vec![])).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = result(vec![[1.0, 2.0, 3.0]], vec![[1.5, 2.0, 2.0]]);
        let mut buf = Vec::new();
        write_error_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,channel,truth,prediction,abs_error");
        assert_eq!(lines[1], "4,heave,1.5,1,0.5");
        assert_eq!(lines[3], "4,roll,2,3,1");
    }

    #[test]
    fn summary_fields() {
        let r = result(vec![[1.0, 2.0, 3.0]], vec![[1.5, 2.0, 2.0]]);
        let v: serde_json::Value = serde_json::from_str(&error_report(&r).unwrap().summary_json()).unwrap();
        assert_eq!(v["count"], 1);
        assert_eq!(v["heave"]["mae"], 0.5);
        assert_eq!(v["roll"]["max_error"], 1.0);
    }
}
