//! The recurrent network that forecasts next-day GDU: a single LSTM layer
//! unrolled over a 30-day window, a ReLU dense layer, and a scalar linear
//! head. Hand-rolled on flat f64 buffers, including backpropagation through
//! time, so the gradients are inspectable and the whole thing stays
//! dependency-free.
//!
//! Gate math, per step: f/i/o are sigmoid gates and g is the tanh candidate,
//! each computed from [h_prev, x]; c = f*c_prev + i*g; h = o*tanh(c).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Weights of one LSTM cell. Each gate matrix is `hidden_size` rows by
/// `hidden_size + input_size` columns, row-major, applied to the
/// concatenation [h_prev, x]; hidden-state columns come first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_c: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let m = hidden_size * (hidden_size + input_size);
        LstmParams {
            input_size,
            hidden_size,
            w_f: vec![0.0; m],
            w_i: vec![0.0; m],
            w_c: vec![0.0; m],
            w_o: vec![0.0; m],
            b_f: vec![0.0; hidden_size],
            b_i: vec![0.0; hidden_size],
            b_c: vec![0.0; hidden_size],
            b_o: vec![0.0; hidden_size],
        }
    }

    fn check_dims(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<()> {
        for (what, got, expected) in [
            ("lstm input", x.len(), self.input_size),
            ("lstm hidden state", h_prev.len(), self.hidden_size),
            ("lstm cell state", c_prev.len(), self.hidden_size),
        ] {
            if got != expected {
                return Err(Error::ShapeMismatch {
                    what,
                    expected,
                    got,
                });
            }
        }
        Ok(())
    }

    /// Gate activations for one step, written into the provided slices.
    /// This is the single home of the gate equations; every forward path
    /// (cell API, network inference, training caches) routes through it.
    fn gates(
        &self,
        x: &[f64],
        h_prev: &[f64],
        f: &mut [f64],
        i_: &mut [f64],
        g: &mut [f64],
        o: &mut [f64],
    ) {
        let h = self.hidden_size;
        let cols = h + self.input_size;
        let fill = |w: &[f64], b: &[f64], out: &mut [f64], tanh_act: bool| {
            for r in 0..h {
                let row = &w[r * cols..(r + 1) * cols];
                let mut acc = b[r];
                for c in 0..h {
                    acc += row[c] * h_prev[c];
                }
                for c in 0..self.input_size {
                    acc += row[h + c] * x[c];
                }
                out[r] = if tanh_act { acc.tanh() } else { sigmoid(acc) };
            }
        };
        fill(&self.w_f, &self.b_f, f, false);
        fill(&self.w_i, &self.b_i, i_, false);
        fill(&self.w_c, &self.b_c, g, true);
        fill(&self.w_o, &self.b_o, o, false);
    }

    /// One cell step: returns (h, c).
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dims(x, h_prev, c_prev)?;
        let h = self.hidden_size;
        let (mut f, mut i_, mut g, mut o) = (
            vec![0.0; h],
            vec![0.0; h],
            vec![0.0; h],
            vec![0.0; h],
        );
        self.gates(x, h_prev, &mut f, &mut i_, &mut g, &mut o);
        let mut c = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        for r in 0..h {
            c[r] = f[r] * c_prev[r] + i_[r] * g[r];
            h_out[r] = o[r] * c[r].tanh();
        }
        Ok((h_out, c))
    }

    /// Vector-Jacobian product through one step: given cotangents (dh, dc)
    /// on the step's outputs, returns (dx, dh_prev, dc_prev). Used to check
    /// cell-level Jacobians against finite differences independently of the
    /// fused training backward pass.
    pub fn step_vjp(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        dh: &[f64],
        dc: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.check_dims(x, h_prev, c_prev)?;
        let h = self.hidden_size;
        if dh.len() != h || dc.len() != h {
            return Err(Error::ShapeMismatch {
                what: "lstm cotangent",
                expected: h,
                got: dh.len().max(dc.len()),
            });
        }
        let (mut f, mut i_, mut g, mut o) = (
            vec![0.0; h],
            vec![0.0; h],
            vec![0.0; h],
            vec![0.0; h],
        );
        self.gates(x, h_prev, &mut f, &mut i_, &mut g, &mut o);
        let cols = h + self.input_size;
        let mut dz = vec![0.0; cols];
        let mut dc_prev = vec![0.0; h];
        for r in 0..h {
            let c = f[r] * c_prev[r] + i_[r] * g[r];
            let tc = c.tanh();
            let dct = dc[r] + dh[r] * o[r] * (1.0 - tc * tc);
            let dpo = dh[r] * tc * o[r] * (1.0 - o[r]);
            let dpf = dct * c_prev[r] * f[r] * (1.0 - f[r]);
            let dpi = dct * g[r] * i_[r] * (1.0 - i_[r]);
            let dpg = dct * i_[r] * (1.0 - g[r] * g[r]);
            for c_idx in 0..cols {
                dz[c_idx] += self.w_f[r * cols + c_idx] * dpf
                    + self.w_i[r * cols + c_idx] * dpi
                    + self.w_c[r * cols + c_idx] * dpg
                    + self.w_o[r * cols + c_idx] * dpo;
            }
            dc_prev[r] = dct * f[r];
        }
        let dh_prev = dz[..h].to_vec();
        let dx = dz[h..].to_vec();
        Ok((dx, dh_prev, dc_prev))
    }
}

/// Production network dimensions.
pub const WINDOW: usize = 30;
pub const HIDDEN: usize = 20;
pub const DENSE: usize = 20;

/// The full forecaster: LSTM over a scalar GDU window, dense ReLU layer,
/// scalar linear head, plus the z-score constants the inputs and target
/// were normalized with. `forward` takes raw (unnormalized) GDUs and
/// returns a raw prediction, so callers never touch the normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub lstm: LstmParams,
    /// dense_size rows by hidden_size columns, row-major.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
    pub window: usize,
    pub input_mean: f64,
    pub input_scale: f64,
}

impl ForecastModel {
    pub fn zeros(input_size: usize, hidden: usize, dense: usize, window: usize) -> Self {
        ForecastModel {
            lstm: LstmParams::zeros(input_size, hidden),
            dense_w: vec![0.0; dense * hidden],
            dense_b: vec![0.0; dense],
            out_w: vec![0.0; dense],
            out_b: 0.0,
            window,
            input_mean: 0.0,
            input_scale: 1.0,
        }
    }

    pub fn dense_size(&self) -> usize {
        self.dense_b.len()
    }

    pub(crate) fn layout(&self) -> ParamLayout {
        ParamLayout {
            input: self.lstm.input_size,
            hidden: self.lstm.hidden_size,
            dense: self.dense_size(),
        }
    }

    /// Predict the next raw GDU from the raw GDU window; also returns the
    /// final hidden state, the feature vector the residual model keys on.
    pub fn forward(&self, window_raw: &[f64]) -> Result<(f64, Vec<f64>)> {
        if window_raw.len() != self.window {
            return Err(Error::ShapeMismatch {
                what: "forecast input window",
                expected: self.window,
                got: window_raw.len(),
            });
        }
        let h = self.lstm.hidden_size;
        let mut h_state = vec![0.0; h];
        let mut c_state = vec![0.0; h];
        let (mut f, mut i_, mut g, mut o) = (
            vec![0.0; h],
            vec![0.0; h],
            vec![0.0; h],
            vec![0.0; h],
        );
        for &raw in window_raw {
            let x = [(raw - self.input_mean) / self.input_scale];
            self.lstm
                .gates(&x, &h_state, &mut f, &mut i_, &mut g, &mut o);
            for r in 0..h {
                c_state[r] = f[r] * c_state[r] + i_[r] * g[r];
                h_state[r] = o[r] * c_state[r].tanh();
            }
        }
        let mut y_norm = self.out_b;
        for (j, (&wo, &b)) in self.out_w.iter().zip(&self.dense_b).enumerate() {
            let row = &self.dense_w[j * h..(j + 1) * h];
            let mut pre = b;
            for r in 0..h {
                pre += row[r] * h_state[r];
            }
            y_norm += wo * pre.max(0.0);
        }
        Ok((y_norm * self.input_scale + self.input_mean, h_state))
    }

    /// All trainable parameters in the fixed flat order used by the
    /// optimizer and the finite-difference checks.
    pub(crate) fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout().count());
        for part in [
            &self.lstm.w_f,
            &self.lstm.w_i,
            &self.lstm.w_c,
            &self.lstm.w_o,
            &self.lstm.b_f,
            &self.lstm.b_i,
            &self.lstm.b_c,
            &self.lstm.b_o,
            &self.dense_w,
            &self.dense_b,
            &self.out_w,
        ] {
            out.extend_from_slice(part);
        }
        out.push(self.out_b);
        out
    }

    pub(crate) fn assign_from_flat(&mut self, theta: &[f64]) {
        debug_assert_eq!(theta.len(), self.layout().count());
        let mut pos = 0;
        for part in [
            &mut self.lstm.w_f,
            &mut self.lstm.w_i,
            &mut self.lstm.w_c,
            &mut self.lstm.w_o,
            &mut self.lstm.b_f,
            &mut self.lstm.b_i,
            &mut self.lstm.b_c,
            &mut self.lstm.b_o,
            &mut self.dense_w,
            &mut self.dense_b,
            &mut self.out_w,
        ] {
            let len = part.len();
            part.copy_from_slice(&theta[pos..pos + len]);
            pos += len;
        }
        self.out_b = theta[pos];
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ParamLayout {
    pub input: usize,
    pub hidden: usize,
    pub dense: usize,
}

impl ParamLayout {
    fn gate(&self) -> usize {
        self.hidden * (self.hidden + self.input)
    }

    pub fn count(&self) -> usize {
        4 * self.gate() + 4 * self.hidden + self.dense * self.hidden + 2 * self.dense + 1
    }

    /// Start offset of gate matrix k (f=0, i=1, c=2, o=3).
    fn w(&self, k: usize) -> usize {
        k * self.gate()
    }

    /// Start offset of gate bias k.
    fn b(&self, k: usize) -> usize {
        4 * self.gate() + k * self.hidden
    }

    fn dense_w(&self) -> usize {
        4 * self.gate() + 4 * self.hidden
    }

    fn dense_b(&self) -> usize {
        self.dense_w() + self.dense * self.hidden
    }

    fn out_w(&self) -> usize {
        self.dense_b() + self.dense
    }

    fn out_b(&self) -> usize {
        self.out_w() + self.dense
    }
}

/// Per-sample activations recorded by the training forward pass, laid out
/// as window-by-hidden blocks. Reused across samples to keep the training
/// loop allocation-free.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    window: usize,
    hidden: usize,
    /// h[t] is the state entering step t; h[window] is the final state.
    h: Vec<f64>,
    c: Vec<f64>,
    f: Vec<f64>,
    i_: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tc: Vec<f64>,
    pub dense_pre: Vec<f64>,
    dense_act: Vec<f64>,
    pub y: f64,
}

impl ForwardCache {
    pub fn new(window: usize, hidden: usize, dense: usize) -> Self {
        ForwardCache {
            window,
            hidden,
            h: vec![0.0; (window + 1) * hidden],
            c: vec![0.0; (window + 1) * hidden],
            f: vec![0.0; window * hidden],
            i_: vec![0.0; window * hidden],
            g: vec![0.0; window * hidden],
            o: vec![0.0; window * hidden],
            tc: vec![0.0; window * hidden],
            dense_pre: vec![0.0; dense],
            dense_act: vec![0.0; dense],
            y: 0.0,
        }
    }
}

impl ForecastModel {
    /// Training-path forward over an already-normalized window. Records
    /// every activation needed by `backward`.
    pub(crate) fn forward_cached(&self, xs_norm: &[f64], cache: &mut ForwardCache) {
        let h = self.lstm.hidden_size;
        debug_assert_eq!(xs_norm.len(), cache.window);
        debug_assert_eq!(h, cache.hidden);
        cache.h[..h].fill(0.0);
        cache.c[..h].fill(0.0);
        for (t, &x) in xs_norm.iter().enumerate() {
            let (h_blocks, h_next) = cache.h.split_at_mut((t + 1) * h);
            let h_prev = &h_blocks[t * h..];
            let (f, i_, g, o) = (
                &mut cache.f[t * h..(t + 1) * h],
                &mut cache.i_[t * h..(t + 1) * h],
                &mut cache.g[t * h..(t + 1) * h],
                &mut cache.o[t * h..(t + 1) * h],
            );
            self.lstm.gates(&[x], h_prev, f, i_, g, o);
            for r in 0..h {
                let c = f[r] * cache.c[t * h + r] + i_[r] * g[r];
                cache.c[(t + 1) * h + r] = c;
                let tc = c.tanh();
                cache.tc[t * h + r] = tc;
                h_next[r] = o[r] * tc;
            }
        }
        let h_last = &cache.h[cache.window * h..];
        let mut y = self.out_b;
        for j in 0..self.dense_size() {
            let row = &self.dense_w[j * h..(j + 1) * h];
            let mut pre = self.dense_b[j];
            for r in 0..h {
                pre += row[r] * h_last[r];
            }
            cache.dense_pre[j] = pre;
            let act = pre.max(0.0);
            cache.dense_act[j] = act;
            y += self.out_w[j] * act;
        }
        cache.y = y;
    }

    /// Backpropagation through time for one sample. `dy` is the loss
    /// cotangent on the (normalized) prediction; gradients accumulate into
    /// `grads`, which uses the `flatten` layout.
    pub(crate) fn backward(
        &self,
        xs_norm: &[f64],
        cache: &ForwardCache,
        dy: f64,
        grads: &mut [f64],
    ) {
        let lay = self.layout();
        let h = lay.hidden;
        let cols = h + lay.input;
        debug_assert_eq!(grads.len(), lay.count());

        // Head.
        let h_last = &cache.h[cache.window * h..];
        let mut dh = vec![0.0; h];
        grads[lay.out_b()] += dy;
        for j in 0..lay.dense {
            grads[lay.out_w() + j] += dy * cache.dense_act[j];
            if cache.dense_pre[j] > 0.0 {
                let dpre = dy * self.out_w[j];
                grads[lay.dense_b() + j] += dpre;
                let gw = &mut grads[lay.dense_w() + j * h..lay.dense_w() + (j + 1) * h];
                for r in 0..h {
                    gw[r] += dpre * h_last[r];
                }
                for r in 0..h {
                    dh[r] += dpre * self.dense_w[j * h + r];
                }
            }
        }

        // Through time. `deltas` holds the pre-activation gradients of the
        // four gates for the current step, in the f/i/g/o block order the
        // flat layout uses.
        let mut dc = vec![0.0; h];
        let mut deltas = vec![0.0; 4 * h];
        let mut dh_prev = vec![0.0; h];
        for t in (0..cache.window).rev() {
            let (f, i_, g, o, tc) = (
                &cache.f[t * h..(t + 1) * h],
                &cache.i_[t * h..(t + 1) * h],
                &cache.g[t * h..(t + 1) * h],
                &cache.o[t * h..(t + 1) * h],
                &cache.tc[t * h..(t + 1) * h],
            );
            let c_prev = &cache.c[t * h..(t + 1) * h];
            let h_prev = &cache.h[t * h..(t + 1) * h];
            let x = xs_norm[t];
            for r in 0..h {
                let dct = dc[r] + dh[r] * o[r] * (1.0 - tc[r] * tc[r]);
                deltas[r] = dct * c_prev[r] * f[r] * (1.0 - f[r]);
                deltas[h + r] = dct * g[r] * i_[r] * (1.0 - i_[r]);
                deltas[2 * h + r] = dct * i_[r] * (1.0 - g[r] * g[r]);
                deltas[3 * h + r] = dh[r] * tc[r] * o[r] * (1.0 - o[r]);
                dc[r] = dct * f[r];
            }
            dh_prev.fill(0.0);
            for (k, w) in [
                (0, &self.lstm.w_f),
                (1, &self.lstm.w_i),
                (2, &self.lstm.w_c),
                (3, &self.lstm.w_o),
            ] {
                let dpk = &deltas[k * h..(k + 1) * h];
                for r in 0..h {
                    let d = dpk[r];
                    let row = r * cols;
                    let grow = lay.w(k) + row;
                    for c_idx in 0..h {
                        grads[grow + c_idx] += d * h_prev[c_idx];
                        dh_prev[c_idx] += w[row + c_idx] * d;
                    }
                    grads[grow + h] += d * x;
                    grads[lay.b(k) + r] += d;
                }
            }
            dh.copy_from_slice(&dh_prev);
        }
    }
}
