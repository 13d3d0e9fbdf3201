//! Python bindings: wave models, series, training, one-step forecasts and
//! rest-period detection.

use std::path::PathBuf;

use deckmotion::evaluate::save_error_csv;
use deckmotion::series::{make_windows, split_series};
use deckmotion::train::model_to_json;
use deckmotion::wavegen::{knox_training_model, random_sea_state_model_with, sea_state5_reference_model, table1_spec};
use deckmotion::{
    detect_rest_periods, error_report, load_model, predict_series_with, rest_periods_from_forecast, save_model,
    Channel, Error, ForecastResult, ModelArtifact, MotionSeries, Normalizer, Optimizer, RestCriteria, TrainConfig,
    WaveModel,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(pydeckmotion, TrainingDiverged, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(format!(
            "{e}: {}",
            std::error::Error::source(&e).map(|s| s.to_string()).unwrap_or_default()
        )),
        Error::Diverged { .. } => TrainingDiverged::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn channel(name: &str) -> PyResult<Channel> {
    Channel::ALL
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown channel {name:?}; expected heave, pitch or roll")))
}

/// Parses JSON produced by serde into Python objects.
fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(
        py,
        &serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?,
    )
}

fn triples(samples: &[[f64; 3]]) -> Vec<(f64, f64, f64)> {
    samples.iter().map(|s| (s[0], s[1], s[2])).collect()
}

fn criteria(pitch_max: f64, roll_max: f64, heave_rate_max: Option<f64>, min_duration: f64) -> RestCriteria {
    RestCriteria {
        pitch_max,
        roll_max,
        heave_rate_max,
        min_duration,
    }
}

/// Sum of sines per channel (heave, pitch, roll).
#[pyclass(name = "WaveModel", module = "pydeckmotion", frozen)]
struct PyWaveModel {
    inner: WaveModel,
}

#[pymethods]
impl PyWaveModel {
    #[staticmethod]
    fn knox() -> Self {
        PyWaveModel {
            inner: knox_training_model(),
        }
    }

    #[staticmethod]
    fn sea_state5() -> Self {
        PyWaveModel {
            inner: sea_state5_reference_model(),
        }
    }

    /// A random sea state 5 model drawn from the built-in ranges.
    #[staticmethod]
    #[pyo3(signature = (seed, random_phases = false))]
    fn random(seed: u64, random_phases: bool) -> PyResult<Self> {
        let inner = random_sea_state_model_with(&table1_spec(), seed, random_phases).map_err(py_err)?;
        Ok(PyWaveModel { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyWaveModel { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("model serializes")
    }

    #[getter]
    fn label(&self) -> &str {
        self.inner.label()
    }

    /// `(amplitude, omega, phase)` triples of one channel.
    fn components(&self, channel_name: &str) -> PyResult<Vec<(f64, f64, f64)>> {
        let ch = channel(channel_name)?;
        Ok(self
            .inner
            .channel(ch)
            .iter()
            .map(|c| (c.amplitude, c.omega, c.phase))
            .collect())
    }

    fn amplitude_sum(&self, channel_name: &str) -> PyResult<f64> {
        Ok(self.inner.amplitude_sum(channel(channel_name)?))
    }

    fn evaluate(&self, t: f64) -> (f64, f64, f64) {
        let s = self.inner.evaluate(t);
        (s[0], s[1], s[2])
    }

    #[pyo3(signature = (n = 2000, dt = 0.1))]
    fn sample(&self, n: usize, dt: f64) -> PyResult<PySeries> {
        let inner = deckmotion::series::sample_series(&self.inner, n, dt).map_err(py_err)?;
        Ok(PySeries { inner })
    }

    fn __repr__(&self) -> String {
        format!("WaveModel(label={:?})", self.inner.label())
    }
}

/// Uniformly sampled heave/pitch/roll series.
#[pyclass(name = "MotionSeries", module = "pydeckmotion", frozen)]
struct PySeries {
    inner: MotionSeries,
}

#[pymethods]
impl PySeries {
    #[new]
    #[pyo3(signature = (samples, dt = 0.1, t0 = 0.0))]
    fn new(samples: Vec<(f64, f64, f64)>, dt: f64, t0: f64) -> PyResult<Self> {
        let samples = samples.into_iter().map(|(a, b, c)| [a, b, c]).collect();
        Ok(PySeries {
            inner: MotionSeries::new(dt, t0, samples).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        Ok(PySeries {
            inner: MotionSeries::read_csv(&path).map_err(py_err)?,
        })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(&path).map_err(py_err)
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn t0(&self) -> f64 {
        self.inner.t0()
    }

    fn samples(&self) -> Vec<(f64, f64, f64)> {
        triples(self.inner.samples())
    }

    fn times(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|i| self.inner.time(i)).collect()
    }

    fn channel(&self, name: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.channel(channel(name)?.index()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("MotionSeries(len={}, dt={})", self.inner.len(), self.inner.dt())
    }
}

/// A trained network together with its normalizer.
#[pyclass(name = "Model", module = "pydeckmotion", frozen)]
struct PyModel {
    inner: ModelArtifact,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: load_model(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.inner, &path).map_err(py_err)
    }

    fn to_json(&self) -> String {
        model_to_json(&self.inner)
    }

    #[getter]
    fn hidden_dim(&self) -> usize {
        self.inner.config.hidden_dim
    }

    #[getter]
    fn lookback(&self) -> usize {
        self.inner.config.lookback
    }

    #[getter]
    fn provenance(&self) -> &str {
        &self.inner.provenance
    }

    #[getter]
    fn normalizer<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.normalizer)
    }

    /// One-step-ahead predictions from observed history. With
    /// `renormalize`, the series' own statistics replace the stored ones.
    #[pyo3(signature = (series, start_index = None, renormalize = false))]
    fn predict(
        &self,
        py: Python<'_>,
        series: &PySeries,
        start_index: Option<usize>,
        renormalize: bool,
    ) -> PyResult<PyForecast> {
        let start = start_index.unwrap_or(self.inner.config.lookback);
        let norm = if renormalize {
            Normalizer::fit(series.inner.samples()).map_err(py_err)?
        } else {
            self.inner.normalizer
        };
        let inner = py
            .detach(|| predict_series_with(&self.inner, &series.inner, start, &norm))
            .map_err(py_err)?;
        Ok(PyForecast { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(hidden_dim={}, lookback={})",
            self.inner.config.hidden_dim, self.inner.config.lookback
        )
    }
}

/// Predictions aligned with the true samples they forecast.
#[pyclass(name = "Forecast", module = "pydeckmotion", frozen)]
struct PyForecast {
    inner: ForecastResult,
}

#[pymethods]
impl PyForecast {
    fn target_indices(&self) -> Vec<usize> {
        self.inner.target_indices.clone()
    }

    fn times(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|k| self.inner.time(k)).collect()
    }

    fn predictions(&self) -> Vec<(f64, f64, f64)> {
        triples(&self.inner.predictions)
    }

    fn truths(&self) -> Vec<(f64, f64, f64)> {
        triples(&self.inner.truths)
    }

    /// `{"count", "heave": {"mae", "max_error"}, "pitch": ..., "roll": ...}`
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &error_report(&self.inner).map_err(py_err)?.summary_json())
    }

    fn write_error_csv(&self, path: PathBuf) -> PyResult<()> {
        save_error_csv(&self.inner, &path).map_err(py_err)
    }

    /// Rest periods of the predicted motion, as a list of dicts.
    #[pyo3(signature = (pitch_max, roll_max, heave_rate_max = None, min_duration = 0.0))]
    fn rest_periods<'py>(
        &self,
        py: Python<'py>,
        pitch_max: f64,
        roll_max: f64,
        heave_rate_max: Option<f64>,
        min_duration: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let c = criteria(pitch_max, roll_max, heave_rate_max, min_duration);
        to_py(
            py,
            &rest_periods_from_forecast(&self.inner, self.inner.dt, &c).map_err(py_err)?,
        )
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Trains a network on the first `split` of `series`; returns the model and
/// the training report as a dict.
#[pyfunction]
#[pyo3(signature = (
    series, lookback = 40, split = 0.7, hidden = 64, epochs = 200, batch = 32, lr = 1e-3,
    optimizer = "adam", seed = 0, shuffle_seed = None
))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    series: &PySeries,
    lookback: usize,
    split: f64,
    hidden: usize,
    epochs: usize,
    batch: usize,
    lr: f64,
    optimizer: &str,
    seed: u64,
    shuffle_seed: Option<u64>,
) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
    let optimizer = match optimizer {
        "adam" => Optimizer::adam(),
        "sgd" => Optimizer::Sgd,
        other => return Err(PyValueError::new_err(format!("unknown optimizer {other:?}"))),
    };
    let config = TrainConfig {
        epochs,
        batch_size: batch,
        learning_rate: lr,
        optimizer,
        shuffle_seed: shuffle_seed.unwrap_or(seed),
        hidden_dim: hidden,
        lookback,
    };
    let s = &series.inner;
    let (artifact, report) = py
        .detach(|| {
            let windows = make_windows(s, lookback)?;
            let split = split_series(&windows, split, s.len())?;
            deckmotion::train(&split, &config, seed)
        })
        .map_err(py_err)?;
    Ok((PyModel { inner: artifact }, to_py(py, &report)?))
}

/// Rest periods of an observed series, as a list of dicts.
#[pyfunction]
#[pyo3(signature = (series, pitch_max, roll_max, heave_rate_max = None, min_duration = 0.0))]
fn rest_periods<'py>(
    py: Python<'py>,
    series: &PySeries,
    pitch_max: f64,
    roll_max: f64,
    heave_rate_max: Option<f64>,
    min_duration: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = criteria(pitch_max, roll_max, heave_rate_max, min_duration);
    to_py(py, &detect_rest_periods(&series.inner, &c).map_err(py_err)?)
}

#[pymodule]
fn pydeckmotion(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWaveModel>()?;
    m.add_class::<PySeries>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyForecast>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(rest_periods, m)?)?;
    m.add("TrainingDiverged", m.py().get_type::<TrainingDiverged>())?;
    Ok(())
}
