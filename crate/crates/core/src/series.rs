//! Uniform tri-channel time series, sliding windows and normalization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavegen::WaveModel;
use crate::{Sample, CHANNELS};

/// Uniformly sampled `[heave, pitch, roll]` series; sample `i` is at
/// `t0 + i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSeries {
    dt: f64,
    t0: f64,
    samples: Vec<Sample>,
}

impl MotionSeries {
    pub fn new(dt: f64, t0: f64, samples: Vec<Sample>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidArgument("t0 must be finite".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("series needs at least one sample".into()));
        }
        Ok(MotionSeries { dt, t0, samples })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Values of one channel in time order.
    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[ch]).collect()
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        MotionSeries::new(self.dt, self.t0, self.samples[..n.min(self.len())].to_vec())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file).map_err(|e| Error::io(path, e))
    }

    /// Writes `t,heave,pitch,roll` rows with shortest round-trip decimals.
    pub fn write_csv_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "heave", "pitch", "roll"])?;
        for (i, s) in self.samples.iter().enumerate() {
            w.write_record([
                self.time(i).to_string(),
                s[0].to_string(),
                s[1].to_string(),
                s[2].to_string(),
            ])?;
        }
        w.flush()
    }

    /// Reads a series written by [`write_csv`](Self::write_csv). The
    /// sampling interval is inferred from the time column, which must be
    /// uniform.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let headers = rdr.headers().map_err(|e| Error::malformed(path, e))?;
        if headers.iter().collect::<Vec<_>>() != ["t", "heave", "pitch", "roll"] {
            return Err(Error::malformed(path, "expected header t,heave,pitch,roll"));
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::malformed(path, e))?;
            let mut vals = [0.0; 4];
            for (slot, field) in vals.iter_mut().zip(rec.iter()) {
                *slot = field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::malformed(path, format!("row {}: {e}", row + 1)))?;
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::malformed(path, format!("row {}: non-finite value", row + 1)));
            }
            times.push(vals[0]);
            samples.push([vals[1], vals[2], vals[3]]);
        }
        if samples.len() < 2 {
            return Err(Error::malformed(
                path,
                "need at least two rows to infer the sampling interval",
            ));
        }
        let t0 = times[0];
        let n = times.len();
        let dt = (times[n - 1] - t0) / (n - 1) as f64;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::malformed(path, "time column must be increasing"));
        }
        for (i, &t) in times.iter().enumerate() {
            let expected = t0 + i as f64 * dt;
            if (t - expected).abs() > 1e-6 * dt.max(expected.abs()) {
                return Err(Error::malformed(path, format!("row {}: non-uniform sampling", i + 1)));
            }
        }
        MotionSeries::new(dt, t0, samples)
    }
}

/// Samples `model` at `t = i * dt` for `i` in `0..n`.
pub fn sample_series(model: &WaveModel, n: usize, dt: f64) -> Result<MotionSeries> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let samples = (0..n).map(|i| model.evaluate(i as f64 * dt)).collect();
    MotionSeries::new(dt, 0.0, samples)
}

/// Lookback windows paired with the next sample.
///
/// `inputs[k]` holds source samples `target_indices[k] - lookback ..
/// target_indices[k]` and `targets[k]` the sample at `target_indices[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    lookback: usize,
    inputs: Array3<f64>,
    targets: Array2<f64>,
    target_indices: Vec<usize>,
}

impl WindowedDataset {
    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn len(&self) -> usize {
        self.target_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_indices.is_empty()
    }

    /// All inputs, shape `(count, lookback, 3)`.
    pub fn inputs(&self) -> &Array3<f64> {
        &self.inputs
    }

    /// All targets, shape `(count, 3)`.
    pub fn targets(&self) -> &Array2<f64> {
        &self.targets
    }

    pub fn target_indices(&self) -> &[usize] {
        &self.target_indices
    }

    pub fn window(&self, k: usize) -> ArrayView2<'_, f64> {
        self.inputs.index_axis(Axis(0), k)
    }

    pub fn target(&self, k: usize) -> Sample {
        let t = self.targets.row(k);
        [t[0], t[1], t[2]]
    }

    /// Windows at the given positions, in that order.
    pub fn select(&self, positions: &[usize]) -> WindowedDataset {
        WindowedDataset {
            lookback: self.lookback,
            inputs: self.inputs.select(Axis(0), positions),
            targets: self.targets.select(Axis(0), positions),
            target_indices: positions.iter().map(|&p| self.target_indices[p]).collect(),
        }
    }

    /// Applies `norm` to every input row and target.
    pub fn normalized(&self, norm: &Normalizer) -> WindowedDataset {
        let mut out = self.clone();
        for c in 0..CHANNELS {
            let (off, sc) = (norm.offset[c], norm.scale[c]);
            out.inputs.slice_mut(s![.., .., c]).mapv_inplace(|x| (x - off) / sc);
            out.targets.column_mut(c).mapv_inplace(|x| (x - off) / sc);
        }
        out
    }
}

/// One window per target index `lookback..n`.
pub fn make_windows(series: &MotionSeries, lookback: usize) -> Result<WindowedDataset> {
    let n = series.len();
    if lookback == 0 {
        return Err(Error::InvalidArgument("lookback must be at least 1".into()));
    }
    if n <= lookback {
        return Err(Error::InvalidArgument(format!(
            "series of length {n} is too short for lookback {lookback}"
        )));
    }
    let count = n - lookback;
    let samples = series.samples();
    let inputs = Array3::from_shape_fn((count, lookback, CHANNELS), |(k, r, c)| samples[k + r][c]);
    let targets = Array2::from_shape_fn((count, CHANNELS), |(k, c)| samples[k + lookback][c]);
    Ok(WindowedDataset {
        lookback,
        inputs,
        targets,
        target_indices: (lookback..n).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: WindowedDataset,
    pub test: WindowedDataset,
    /// First target index of the test side.
    pub boundary_index: usize,
}

impl SplitDataset {
    /// Source samples with index below the boundary that appear anywhere in
    /// the training windows, keyed by index.
    pub fn training_samples(&self) -> Vec<Sample> {
        let mut seen = BTreeMap::new();
        let l = self.train.lookback;
        for (k, &j) in self.train.target_indices.iter().enumerate() {
            seen.insert(j, self.train.target(k));
            let w = self.train.window(k);
            for r in 0..l {
                seen.insert(j - l + r, [w[[r, 0]], w[[r, 1]], w[[r, 2]]]);
            }
        }
        seen.range(..self.boundary_index).map(|(_, s)| *s).collect()
    }
}

/// Splits windows on target index at `round(train_fraction * source_length)`.
pub fn split_series(windows: &WindowedDataset, train_fraction: f64, source_length: usize) -> Result<SplitDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let boundary = (train_fraction * source_length as f64).round() as usize;
    let idx = windows.target_indices();
    let (first, last) = match (idx.first(), idx.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidArgument("no windows to split".into())),
    };
    if boundary <= first || boundary > last {
        return Err(Error::InvalidArgument(format!(
            "split boundary {boundary} leaves one side empty (targets {first}..={last})"
        )));
    }
    let (train_pos, test_pos): (Vec<usize>, Vec<usize>) = (0..windows.len()).partition(|&k| idx[k] < boundary);
    Ok(SplitDataset {
        train: windows.select(&train_pos),
        test: windows.select(&test_pos),
        boundary_index: boundary,
    })
}

/// Per-channel affine map `x -> (x - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub offset: [f64; 3],
    pub scale: [f64; 3],
}

impl Default for Normalizer {
    fn default() -> Self {
        Self::identity()
    }
}

impl Normalizer {
    pub fn identity() -> Self {
        Normalizer {
            offset: [0.0; 3],
            scale: [1.0; 3],
        }
    }

    /// Population mean and standard deviation per channel; a constant
    /// channel gets scale 1.
    pub fn fit(samples: &[Sample]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("normalizer needs at least two samples".into()));
        }
        let n = samples.len() as f64;
        let mut norm = Normalizer::identity();
        for c in 0..CHANNELS {
            let mean = samples.iter().map(|s| s[c]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[c] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            norm.offset[c] = mean;
            norm.scale[c] = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        }
        Ok(norm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.offset.iter().any(|o| !o.is_finite()) || self.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::ShapeMismatch(format!(
                "normalizer needs finite offsets and positive scales: {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn apply_sample(&self, s: &Sample) -> Sample {
        std::array::from_fn(|c| (s[c] - self.offset[c]) / self.scale[c])
    }

    #[inline]
    pub fn invert_sample(&self, s: &Sample) -> Sample {
        std::array::from_fn(|c| s[c] * self.scale[c] + self.offset[c])
    }

    pub fn apply(&self, series: &MotionSeries) -> MotionSeries {
        MotionSeries {
            dt: series.dt,
            t0: series.t0,
            samples: series.samples.iter().map(|s| self.apply_sample(s)).collect(),
        }
    }

    pub fn invert(&self, series: &MotionSeries) -> MotionSeries {
        MotionSeries {
            dt: series.dt,
            t0: series.t0,
            samples: series.samples.iter().map(|s| self.invert_sample(s)).collect(),
        }
    }
}

/// Fits on samples `0..fit_range_end`.
pub fn fit_normalizer(series: &MotionSeries, fit_range_end: usize) -> Result<Normalizer> {
    if fit_range_end < 2 || fit_range_end > series.len() {
        return Err(Error::InvalidArgument(format!(
            "fit range end {fit_range_end} must lie in 2..={}",
            series.len()
        )));
    }
    Normalizer::fit(&series.samples[..fit_range_end])
}

pub fn apply_normalizer(norm: &Normalizer, series: &MotionSeries) -> MotionSeries {
    norm.apply(series)
}

pub fn invert_normalizer(norm: &Normalizer, series: &MotionSeries) -> MotionSeries {
    norm.invert(series)
}
