//! Test-only reference implementations, written with plain scalar loops and
//! sharing nothing with the library's batched kernels.

#![allow(dead_code, clippy::needless_range_loop)]

use deckmotion::lstm::Gate;
use deckmotion::{LstmParams, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod dd;

use dd::Dd;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar type the reference network is written over.
pub trait Real:
    Copy
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
}

impl Real for f64 {
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    fn tanh(self) -> f64 {
        f64::tanh(self)
    }
}

impl Real for Dd {
    fn exp(self) -> Dd {
        Dd::exp(self)
    }
    fn tanh(self) -> Dd {
        Dd::tanh(self)
    }
}

pub fn sigmoid<R: Real>(x: R) -> R {
    R::from(1.0) / (R::from(1.0) + (-x).exp())
}

/// One LSTM step by explicit loops over the per-gate weight views.
pub fn scalar_step_generic<R: Real>(p: &LstmParams, x: &[R], h: &[R], c: &[R]) -> (Vec<R>, Vec<R>) {
    let hd = p.hidden_dim();
    let pre = |gate: Gate, j: usize| {
        let w = p.input_weights(gate);
        let u = p.recurrent_weights(gate);
        let mut a = R::from(p.gate_bias(gate)[j]);
        for (k, &xk) in x.iter().enumerate() {
            a = a + R::from(w[[j, k]]) * xk;
        }
        for (k, &hk) in h.iter().enumerate() {
            a = a + R::from(u[[j, k]]) * hk;
        }
        a
    };
    let mut h_new = Vec::with_capacity(hd);
    let mut c_new = Vec::with_capacity(hd);
    for j in 0..hd {
        let i = sigmoid(pre(Gate::Input, j));
        let f = sigmoid(pre(Gate::Forget, j));
        let g = pre(Gate::Cell, j).tanh();
        let o = sigmoid(pre(Gate::Output, j));
        let cj = f * c[j] + i * g;
        c_new.push(cj);
        h_new.push(o * cj.tanh());
    }
    (h_new, c_new)
}

pub fn scalar_step(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    scalar_step_generic(p, x, h, c)
}

/// Hidden and cell states after every row, starting from zero.
pub fn scalar_transcript_generic<R: Real>(p: &LstmParams, rows: &[Sample]) -> Vec<(Vec<R>, Vec<R>)> {
    let hd = p.hidden_dim();
    let mut h = vec![R::from(0.0); hd];
    let mut c = vec![R::from(0.0); hd];
    let mut out = Vec::new();
    for x in rows {
        let x: Vec<R> = x.iter().map(|&v| R::from(v)).collect();
        let (hn, cn) = scalar_step_generic(p, &x, &h, &c);
        h = hn;
        c = cn;
        out.push((h.clone(), c.clone()));
    }
    out
}

pub fn scalar_transcript(p: &LstmParams, rows: &[Sample]) -> Vec<(Vec<f64>, Vec<f64>)> {
    scalar_transcript_generic(p, rows)
}

pub fn scalar_predict_generic<R: Real>(p: &LstmParams, rows: &[Sample]) -> [R; 3] {
    let hd = p.hidden_dim();
    let h = scalar_transcript_generic::<R>(p, rows)
        .pop()
        .map(|s| s.0)
        .unwrap_or(vec![R::from(0.0); hd]);
    let w = p.head_weights();
    let b = p.head_bias();
    std::array::from_fn(|o| {
        let mut y = R::from(b[o]);
        for j in 0..hd {
            y = y + R::from(w[[o, j]]) * h[j];
        }
        y
    })
}

pub fn scalar_predict(p: &LstmParams, rows: &[Sample]) -> Sample {
    scalar_predict_generic(p, rows)
}

pub fn scalar_loss_generic<R: Real>(p: &LstmParams, windows: &[Vec<Sample>], targets: &[Sample]) -> R {
    let mut sum = R::from(0.0);
    for (w, t) in windows.iter().zip(targets) {
        let y = scalar_predict_generic::<R>(p, w);
        for c in 0..3 {
            let e = y[c] - R::from(t[c]);
            sum = sum + e * e;
        }
    }
    sum / R::from((3 * windows.len()) as f64)
}

pub fn scalar_loss(p: &LstmParams, windows: &[Vec<Sample>], targets: &[Sample]) -> f64 {
    scalar_loss_generic(p, windows, targets)
}

/// Central finite differences of the reference loss for every parameter,
/// in `LstmParams::tensors` order. The loss is evaluated in double-double
/// so rounding noise stays far below the differencing step.
pub fn finite_difference_gradients(
    p: &LstmParams,
    windows: &[Vec<Sample>],
    targets: &[Sample],
    step: f64,
) -> Vec<Vec<f64>> {
    let shapes: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
    let mut out = Vec::new();
    let mut probe = p.clone();
    for (ti, &len) in shapes.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (k, gk) in g.iter_mut().enumerate() {
            let orig = probe.tensors()[ti][k];
            let up_at = orig + step;
            let down_at = orig - step;
            probe.tensors_mut()[ti][k] = up_at;
            let up: Dd = scalar_loss_generic(&probe, windows, targets);
            probe.tensors_mut()[ti][k] = down_at;
            let down: Dd = scalar_loss_generic(&probe, windows, targets);
            probe.tensors_mut()[ti][k] = orig;
            // Divide by the step actually taken after rounding.
            *gk = ((up - down) / (Dd::from(up_at) - Dd::from(down_at))).to_f64();
        }
        out.push(g);
    }
    out
}

/// Parameters with every entry uniform in `(-scale, scale)`.
pub fn random_params(hidden: usize, scale: f64, seed: u64) -> LstmParams {
    let mut p = LstmParams::zeros(&deckmotion::LstmConfig::new(hidden, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in p.tensors_mut() {
        for v in t {
            *v = rng.random_range(-scale..scale);
        }
    }
    p
}

pub fn random_windows(count: usize, lookback: usize, seed: u64) -> (Vec<Vec<Sample>>, Vec<Sample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = || -> Sample { std::array::from_fn(|_| rng.random_range(-1.5..1.5)) };
    let windows: Vec<Vec<Sample>> = (0..count).map(|_| (0..lookback).map(|_| sample()).collect()).collect();
    let targets = (0..count).map(|_| sample()).collect();
    (windows, targets)
}

pub fn to_arrays(windows: &[Vec<Sample>], targets: &[Sample]) -> (ndarray::Array3<f64>, ndarray::Array2<f64>) {
    let l = windows[0].len();
    let w = ndarray::Array3::from_shape_fn((windows.len(), l, 3), |(b, r, c)| windows[b][r][c]);
    let t = ndarray::Array2::from_shape_fn((targets.len(), 3), |(b, c)| targets[b][c]);
    (w, t)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Naive rest scan: walk samples, open a run on the first calm sample and
/// close it on the first rough one. Returns inclusive index pairs.
pub fn naive_rest_scan(
    samples: &[Sample],
    dt: f64,
    pitch_max: f64,
    roll_max: f64,
    heave_rate_max: Option<f64>,
    min_duration: f64,
) -> Vec<(usize, usize)> {
    let n = samples.len();
    let calm = |i: usize| {
        let s = samples[i];
        let mut ok = s[1].abs() <= pitch_max && s[2].abs() <= roll_max;
        if let Some(max) = heave_rate_max {
            let rate = if n == 1 {
                0.0
            } else if i == 0 {
                (samples[1][0] - samples[0][0]) / dt
            } else if i == n - 1 {
                (samples[n - 1][0] - samples[n - 2][0]) / dt
            } else {
                (samples[i + 1][0] - samples[i - 1][0]) / (2.0 * dt)
            };
            ok &= rate.abs() <= max;
        }
        ok
    };
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for i in 0..=n {
        let c = i < n && calm(i);
        match (open, c) {
            (None, true) => open = Some(i),
            (Some(s), false) => {
                if (i - 1 - s) as f64 * dt >= min_duration {
                    out.push((s, i - 1));
                }
                open = None;
            }
            _ => {}
        }
    }
    out
}

/// Sea state 5 ranges typed in by hand: (amplitude sum, period) per channel.
const TABLE1: [((f64, f64), (f64, f64)); 3] = [
    ((1.0, 1.9), (5.0, 8.0)),
    ((1.3, 2.5), (5.0, 8.0)),
    ((6.3, 12.0), (8.0, 13.0)),
];

pub fn table1_problems(model: &deckmotion::WaveModel) -> Vec<String> {
    let mut out = Vec::new();
    for (ch, ((a_lo, a_hi), (t_lo, t_hi))) in deckmotion::Channel::ALL.into_iter().zip(TABLE1) {
        let comps = model.channel(ch);
        if comps.len() != 4 {
            out.push(format!("{ch}: {} components", comps.len()));
        }
        let sum: f64 = comps.iter().map(|c| c.amplitude).sum();
        if !(a_lo..=a_hi).contains(&sum) {
            out.push(format!("{ch}: amplitude sum {sum}"));
        }
        for c in comps {
            let period = 2.0 * std::f64::consts::PI / c.omega;
            if !(t_lo..=t_hi).contains(&period) || c.amplitude <= 0.0 {
                out.push(format!("{ch}: component {c:?} (period {period})"));
            }
        }
    }
    out
}
