//! Composite single-layer LSTM with a linear head.
//!
//! One network reads a window of `[heave, pitch, roll]` rows from a zero
//! initial state and predicts the next sample of all three channels from the
//! final hidden state. Gate weights are stored stacked in the block order
//! input, forget, cell candidate, output:
//!
//! ```text
//! a = W x + U h + b            (4H)
//! i = σ(a_i)  f = σ(a_f)  g = tanh(a_g)  o = σ(a_o)
//! c' = f ⊙ c + i ⊙ g
//! h' = o ⊙ tanh(c')
//! y = W_out h_L + b_out
//! ```
//!
//! Windows in a batch are stepped in lockstep so every per-step product is a
//! matrix-matrix multiply; gradients are exact (backpropagation through all
//! steps of the window).

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ArrayView3, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Sample, CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub lookback: usize,
}

impl LstmConfig {
    pub fn new(hidden_dim: usize, lookback: usize) -> Self {
        LstmConfig {
            input_dim: CHANNELS,
            hidden_dim,
            output_dim: CHANNELS,
            lookback,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim != CHANNELS || self.output_dim != CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "input and output dimension must both be {CHANNELS}, got {} and {}",
                self.input_dim, self.output_dim
            )));
        }
        if self.hidden_dim == 0 || self.lookback == 0 {
            return Err(Error::InvalidArgument(
                "hidden_dim and lookback must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig::new(64, 40)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Cell,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];

    fn block(self) -> usize {
        self as usize
    }

    fn suffix(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Cell => "g",
            Gate::Output => "o",
        }
    }
}

/// All weights and biases of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `(4H, input_dim)`
    w_input: Array2<f64>,
    /// `(4H, H)`
    w_recurrent: Array2<f64>,
    /// `(4H)`
    bias: Array1<f64>,
    /// `(output_dim, H)`
    w_out: Array2<f64>,
    /// `(output_dim)`
    b_out: Array1<f64>,
}

/// Derivatives of a scalar loss, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub LstmParams);

impl std::ops::Deref for Gradients {
    type Target = LstmParams;

    fn deref(&self) -> &LstmParams {
        &self.0
    }
}

impl LstmParams {
    pub fn zeros(config: &LstmConfig) -> Self {
        let h = config.hidden_dim;
        LstmParams {
            w_input: Array2::zeros((4 * h, config.input_dim)),
            w_recurrent: Array2::zeros((4 * h, h)),
            bias: Array1::zeros(4 * h),
            w_out: Array2::zeros((config.output_dim, h)),
            b_out: Array1::zeros(config.output_dim),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_recurrent.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w_out.nrows()
    }

    fn gate_rows(&self, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden_dim();
        gate.block() * h..(gate.block() + 1) * h
    }

    pub fn input_weights(&self, gate: Gate) -> ArrayView2<'_, f64> {
        self.w_input.slice(s![self.gate_rows(gate), ..])
    }

    pub fn recurrent_weights(&self, gate: Gate) -> ArrayView2<'_, f64> {
        self.w_recurrent.slice(s![self.gate_rows(gate), ..])
    }

    pub fn gate_bias(&self, gate: Gate) -> ndarray::ArrayView1<'_, f64> {
        self.bias.slice(s![self.gate_rows(gate)])
    }

    pub fn head_weights(&self) -> ArrayView2<'_, f64> {
        self.w_out.view()
    }

    pub fn head_weights_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.w_out.view_mut()
    }

    pub fn head_bias(&self) -> &Array1<f64> {
        &self.b_out
    }

    pub fn head_bias_mut(&mut self) -> &mut Array1<f64> {
        &mut self.b_out
    }

    /// Every parameter tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            self.w_input.as_slice().expect("standard layout"),
            self.w_recurrent.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
            self.w_out.as_slice().expect("standard layout"),
            self.b_out.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.w_input.as_slice_mut().expect("standard layout"),
            self.w_recurrent.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
            self.w_out.as_slice_mut().expect("standard layout"),
            self.b_out.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Checks shapes against `config` and that every entry is finite.
    pub fn validate(&self, config: &LstmConfig) -> Result<()> {
        let h = config.hidden_dim;
        let expect = [
            (self.w_input.dim(), (4 * h, config.input_dim), "input weights"),
            (self.w_recurrent.dim(), (4 * h, h), "recurrent weights"),
            (self.w_out.dim(), (config.output_dim, h), "head weights"),
            ((self.bias.len(), 1), (4 * h, 1), "gate biases"),
            ((self.b_out.len(), 1), (config.output_dim, 1), "head bias"),
        ];
        for (got, want, what) in expect {
            if got != want {
                return Err(Error::ShapeMismatch(format!("{what}: got {got:?}, expected {want:?}")));
            }
        }
        if !self.is_finite() {
            return Err(Error::ShapeMismatch("parameters contain non-finite entries".into()));
        }
        Ok(())
    }
}

/// Uniform `(-s, s)` weights with `s = 1/sqrt(hidden_dim)`; zero biases
/// except the forget gate, which starts at 1.
pub fn init_params(config: &LstmConfig, seed: u64) -> LstmParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / (config.hidden_dim as f64).sqrt();
    let mut p = LstmParams::zeros(config);
    let mut fill = |a: &mut [f64]| {
        for v in a {
            *v = rng.random_range(-s..s);
        }
    };
    fill(p.w_input.as_slice_mut().unwrap());
    fill(p.w_recurrent.as_slice_mut().unwrap());
    fill(p.w_out.as_slice_mut().unwrap());
    let forget = p.gate_rows(Gate::Forget);
    p.bias.slice_mut(s![forget]).fill(1.0);
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            h: Array1::zeros(hidden_dim),
            c: Array1::zeros(hidden_dim),
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One time step for a batch of rows.
///
/// On entry `gates` is scratch; on exit it holds the activated gates
/// `[i, f, g, o]`. `c_new`, `tanh_c` and `h_new` receive the new cell
/// state, its tanh and the new hidden state.
#[allow(clippy::too_many_arguments)]
fn step(
    p: &LstmParams,
    x: ArrayView2<'_, f64>,
    h: ArrayView2<'_, f64>,
    c: ArrayView2<'_, f64>,
    mut gates: ArrayViewMut2<'_, f64>,
    mut c_new: ArrayViewMut2<'_, f64>,
    mut tanh_c: ArrayViewMut2<'_, f64>,
    mut h_new: ArrayViewMut2<'_, f64>,
) {
    let hd = p.hidden_dim();
    let dim = gates.dim();
    gates.assign(&p.bias.broadcast(dim).unwrap());
    general_mat_mul(1.0, &x, &p.w_input.t(), 1.0, &mut gates);
    general_mat_mul(1.0, &h, &p.w_recurrent.t(), 1.0, &mut gates);

    for b in 0..gates.nrows() {
        let a = gates.row_mut(b).into_slice().expect("contiguous gate row");
        let (ai, rest) = a.split_at_mut(hd);
        let (af, rest) = rest.split_at_mut(hd);
        let (ag, ao) = rest.split_at_mut(hd);
        let cp = c.row(b);
        let mut cn = c_new.row_mut(b);
        let mut tc = tanh_c.row_mut(b);
        let mut hn = h_new.row_mut(b);
        for j in 0..hd {
            let i = sigmoid(ai[j]);
            let f = sigmoid(af[j]);
            let g = ag[j].tanh();
            let o = sigmoid(ao[j]);
            ai[j] = i;
            af[j] = f;
            ag[j] = g;
            ao[j] = o;
            let cj = f * cp[j] + i * g;
            let t = cj.tanh();
            cn[j] = cj;
            tc[j] = t;
            hn[j] = o * t;
        }
    }
}

/// Advances one state by one input row.
pub fn cell_forward(params: &LstmParams, x: &Sample, state: &LstmState) -> LstmState {
    let hd = params.hidden_dim();
    let x = ArrayView2::from_shape((1, CHANNELS), &x[..]).unwrap();
    let h = state.h.view().insert_axis(Axis(0));
    let c = state.c.view().insert_axis(Axis(0));
    let mut gates = Array2::zeros((1, 4 * hd));
    let mut c_new = Array2::zeros((1, hd));
    let mut tanh_c = Array2::zeros((1, hd));
    let mut h_new = Array2::zeros((1, hd));
    step(
        params,
        x,
        h,
        c,
        gates.view_mut(),
        c_new.view_mut(),
        tanh_c.view_mut(),
        h_new.view_mut(),
    );
    LstmState {
        h: h_new.remove_axis(Axis(0)),
        c: c_new.remove_axis(Axis(0)),
    }
}

fn check_batch(params: &LstmParams, windows: &ArrayView3<'_, f64>) -> Result<()> {
    let (b, l, d) = windows.dim();
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if l == 0 || d != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "windows have shape ({b}, {l}, {d}); expected rows of width {}",
            params.input_dim()
        )));
    }
    Ok(())
}

/// Predictions for a batch of windows, shape `(batch, lookback, 3)` in,
/// `(batch, 3)` out. Each window starts from a zero state.
pub fn predict_batch(params: &LstmParams, windows: ArrayView3<'_, f64>) -> Result<Array2<f64>> {
    check_batch(params, &windows)?;
    let (b, l, _) = windows.dim();
    let hd = params.hidden_dim();
    let mut h = Array2::zeros((b, hd));
    let mut c = Array2::zeros((b, hd));
    let mut h_next = Array2::zeros((b, hd));
    let mut c_next = Array2::zeros((b, hd));
    let mut tanh_c = Array2::zeros((b, hd));
    let mut gates = Array2::zeros((b, 4 * hd));
    for t in 0..l {
        step(
            params,
            windows.slice(s![.., t, ..]),
            h.view(),
            c.view(),
            gates.view_mut(),
            c_next.view_mut(),
            tanh_c.view_mut(),
            h_next.view_mut(),
        );
        std::mem::swap(&mut h, &mut h_next);
        std::mem::swap(&mut c, &mut c_next);
    }
    Ok(head(params, &h))
}

fn head(params: &LstmParams, h: &Array2<f64>) -> Array2<f64> {
    let mut y = params
        .b_out
        .broadcast((h.nrows(), params.output_dim()))
        .unwrap()
        .to_owned();
    general_mat_mul(1.0, h, &params.w_out.t(), 1.0, &mut y);
    y
}

/// Joint `[heave, pitch, roll]` prediction for one `(lookback, 3)` window.
pub fn forward_window(params: &LstmParams, window: ArrayView2<'_, f64>, lookback: usize) -> Result<Sample> {
    if window.dim() != (lookback, params.input_dim()) {
        return Err(Error::ShapeMismatch(format!(
            "window has shape {:?}, expected ({lookback}, {})",
            window.dim(),
            params.input_dim()
        )));
    }
    let y = predict_batch(params, window.insert_axis(Axis(0)))?;
    Ok([y[[0, 0]], y[[0, 1]], y[[0, 2]]])
}

/// Mean squared error over batch and channels, and its exact gradient.
///
/// `windows` is `(batch, lookback, 3)`, `targets` is `(batch, 3)`.
pub fn loss_and_gradients(
    params: &LstmParams,
    windows: ArrayView3<'_, f64>,
    targets: ArrayView2<'_, f64>,
) -> Result<(f64, Gradients)> {
    check_batch(params, &windows)?;
    let (b, l, d) = windows.dim();
    let o_dim = params.output_dim();
    if targets.dim() != (b, o_dim) {
        return Err(Error::ShapeMismatch(format!(
            "targets have shape {:?}, expected ({b}, {o_dim})",
            targets.dim()
        )));
    }
    let hd = params.hidden_dim();
    let rows = l * b;

    // Tape: block t of each array holds step t for every window.
    let mut x_all = Array2::zeros((rows, d));
    let mut h_prev = Array2::zeros((rows, hd));
    let mut c_prev = Array2::zeros((rows, hd));
    let mut gates = Array2::zeros((rows, 4 * hd));
    let mut tanh_c = Array2::zeros((rows, hd));
    let mut h = Array2::zeros((b, hd));
    let mut c = Array2::zeros((b, hd));
    let mut h_next = Array2::zeros((b, hd));
    let mut c_next = Array2::zeros((b, hd));

    for t in 0..l {
        let r = t * b..(t + 1) * b;
        x_all.slice_mut(s![r.clone(), ..]).assign(&windows.slice(s![.., t, ..]));
        h_prev.slice_mut(s![r.clone(), ..]).assign(&h);
        c_prev.slice_mut(s![r.clone(), ..]).assign(&c);
        step(
            params,
            x_all.slice(s![r.clone(), ..]),
            h.view(),
            c.view(),
            gates.slice_mut(s![r.clone(), ..]),
            c_next.view_mut(),
            tanh_c.slice_mut(s![r.clone(), ..]),
            h_next.view_mut(),
        );
        std::mem::swap(&mut h, &mut h_next);
        std::mem::swap(&mut c, &mut c_next);
    }
    let y = head(params, &h);

    let n = (b * o_dim) as f64;
    let err = &y - &targets;
    let loss = err.iter().map(|e| e * e).sum::<f64>() / n;
    let dy = err.mapv(|e| 2.0 * e / n);

    let mut grads = LstmParams::zeros(&LstmConfig {
        input_dim: d,
        hidden_dim: hd,
        output_dim: o_dim,
        lookback: l,
    });
    general_mat_mul(1.0, &dy.t(), &h, 0.0, &mut grads.w_out);
    grads.b_out = dy.sum_axis(Axis(0));

    let mut dh = dy.dot(&params.w_out);
    let mut dc: Array2<f64> = Array2::zeros((b, hd));
    let mut da = Array2::zeros((rows, 4 * hd));

    for t in (0..l).rev() {
        let r = t * b..(t + 1) * b;
        {
            let g_t = gates.slice(s![r.clone(), ..]);
            let tc_t = tanh_c.slice(s![r.clone(), ..]);
            let cp_t = c_prev.slice(s![r.clone(), ..]);
            let mut da_t = da.slice_mut(s![r.clone(), ..]);
            for bi in 0..b {
                let g_row = g_t.row(bi);
                let (gi, gf) = (g_row.slice(s![0..hd]), g_row.slice(s![hd..2 * hd]));
                let (gg, go) = (g_row.slice(s![2 * hd..3 * hd]), g_row.slice(s![3 * hd..]));
                let tc = tc_t.row(bi);
                let cp = cp_t.row(bi);
                let dh_row = dh.row(bi);
                let mut dc_row = dc.row_mut(bi);
                let da_row = da_t.row_mut(bi).into_slice().expect("contiguous");
                for j in 0..hd {
                    let (i, f, g, o) = (gi[j], gf[j], gg[j], go[j]);
                    let dhj = dh_row[j];
                    let d_o = dhj * tc[j];
                    let dcj = dc_row[j] + dhj * o * (1.0 - tc[j] * tc[j]);
                    da_row[j] = dcj * g * i * (1.0 - i);
                    da_row[hd + j] = dcj * cp[j] * f * (1.0 - f);
                    da_row[2 * hd + j] = dcj * i * (1.0 - g * g);
                    da_row[3 * hd + j] = d_o * o * (1.0 - o);
                    dc_row[j] = dcj * f;
                }
            }
        }
        if t > 0 {
            general_mat_mul(1.0, &da.slice(s![r, ..]), &params.w_recurrent, 0.0, &mut dh);
        }
    }

    general_mat_mul(1.0, &da.t(), &x_all, 0.0, &mut grads.w_input);
    general_mat_mul(1.0, &da.t(), &h_prev, 0.0, &mut grads.w_recurrent);
    grads.bias = da.sum_axis(Axis(0));

    Ok((loss, Gradients(grads)))
}

/// Wire form: one named nested array per weight matrix.
#[derive(Serialize, Deserialize)]
pub(crate) struct ParamsDoc(pub std::collections::BTreeMap<String, serde_json::Value>);

impl LstmParams {
    pub(crate) fn to_doc(&self) -> ParamsDoc {
        use serde_json::json;
        let mut map = std::collections::BTreeMap::new();
        let rows = |a: ArrayView2<'_, f64>| a.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        for gate in Gate::ALL {
            let sfx = gate.suffix();
            map.insert(format!("W_{sfx}"), json!(rows(self.input_weights(gate))));
            map.insert(format!("U_{sfx}"), json!(rows(self.recurrent_weights(gate))));
            map.insert(format!("b_{sfx}"), json!(self.gate_bias(gate).to_vec()));
        }
        map.insert("W_out".into(), json!(rows(self.w_out.view())));
        map.insert("b_out".into(), json!(self.b_out.to_vec()));
        ParamsDoc(map)
    }

    pub(crate) fn from_doc(doc: &ParamsDoc, config: &LstmConfig) -> std::result::Result<Self, String> {
        let get = |name: &str| doc.0.get(name).ok_or_else(|| format!("missing weight {name}"));
        let matrix = |name: &str, r: usize, c: usize| -> std::result::Result<Array2<f64>, String> {
            let v: Vec<Vec<f64>> = serde_json::from_value(get(name)?.clone()).map_err(|e| format!("{name}: {e}"))?;
            if v.len() != r || v.iter().any(|row| row.len() != c) {
                return Err(format!("{name}: expected {r}x{c} matrix"));
            }
            Ok(Array2::from_shape_vec((r, c), v.concat()).unwrap())
        };
        let vector = |name: &str, n: usize| -> std::result::Result<Array1<f64>, String> {
            let v: Vec<f64> = serde_json::from_value(get(name)?.clone()).map_err(|e| format!("{name}: {e}"))?;
            if v.len() != n {
                return Err(format!("{name}: expected length {n}"));
            }
            Ok(Array1::from(v))
        };
        let (hd, id, od) = (config.hidden_dim, config.input_dim, config.output_dim);
        let mut p = LstmParams::zeros(config);
        for gate in Gate::ALL {
            let sfx = gate.suffix();
            let rows = p.gate_rows(gate);
            p.w_input
                .slice_mut(s![rows.clone(), ..])
                .assign(&matrix(&format!("W_{sfx}"), hd, id)?);
            p.w_recurrent
                .slice_mut(s![rows.clone(), ..])
                .assign(&matrix(&format!("U_{sfx}"), hd, hd)?);
            p.bias.slice_mut(s![rows]).assign(&vector(&format!("b_{sfx}"), hd)?);
        }
        p.w_out = matrix("W_out", od, hd)?;
        p.b_out = vector("b_out", od)?;
        Ok(p)
    }
}
