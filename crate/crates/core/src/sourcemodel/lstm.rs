//! Single-layer gated recurrent (LSTM) cell with a linear head, with
//! hand-written backpropagation through time.
//!
//! A forward pass processes a batch of depths that share one driver
//! sequence: input `x_t = [drivers_t (7), depth]`. Parameters live in one
//! flat vector laid out as `W (4H x (8+H), row-major) | b (4H) | w_out (H) | b_out`,
//! with gate rows ordered input, forget, cell, output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::normalizer::{N_DRIVERS, N_INPUTS};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRegressor {
    hidden: usize,
    seed: u64,
    params: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations recorded by [`SequenceRegressor::forward_tape`].
pub struct Tape {
    n_steps: usize,
    n_depths: usize,
    hidden: usize,
    /// activated gates (i, f, g, o) per (t, d)
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    hiddens: Vec<f64>,
    /// outputs, depth-major: `[d * n_steps + t]`
    pub outputs: Vec<f64>,
}

impl SequenceRegressor {
    pub fn param_count_for(hidden: usize) -> usize {
        4 * (N_INPUTS + hidden + 1) * hidden + (hidden + 1)
    }

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) initialization; forget-gate bias starts at 1.
    pub fn new(hidden: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, "lstm-init", "");
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut params: Vec<f64> = (0..Self::param_count_for(hidden))
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let mut model = SequenceRegressor { hidden, seed, params: Vec::new() };
        let b_off = model.bias_offset();
        for j in 0..hidden {
            params[b_off + hidden + j] = 1.0;
        }
        *params.last_mut().expect("non-empty") = 0.0;
        model.params = params;
        model
    }

    pub fn zeros(hidden: usize) -> Self {
        SequenceRegressor {
            hidden,
            seed: 0,
            params: vec![0.0; Self::param_count_for(hidden)],
        }
    }

    pub fn from_params(hidden: usize, seed: u64, params: Vec<f64>) -> Option<Self> {
        (params.len() == Self::param_count_for(hidden)).then_some(SequenceRegressor { hidden, seed, params })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn output_bias(&self) -> f64 {
        *self.params.last().expect("non-empty")
    }

    pub fn set_output_bias(&mut self, value: f64) {
        *self.params.last_mut().expect("non-empty") = value;
    }

    #[inline]
    fn row_len(&self) -> usize {
        N_INPUTS + self.hidden
    }

    #[inline]
    fn bias_offset(&self) -> usize {
        4 * self.hidden * self.row_len()
    }

    #[inline]
    fn head_offset(&self) -> usize {
        self.bias_offset() + 4 * self.hidden
    }

    /// Forward pass without recording; outputs depth-major.
    pub fn forward(&self, drivers: &[[f64; N_DRIVERS]], depths: &[f64]) -> Vec<f64> {
        self.run(drivers, depths, None)
    }

    pub fn forward_tape(&self, drivers: &[[f64; N_DRIVERS]], depths: &[f64]) -> Tape {
        let (n_steps, n_depths, h) = (drivers.len(), depths.len(), self.hidden);
        let mut tape = Tape {
            n_steps,
            n_depths,
            hidden: h,
            gates: vec![0.0; n_steps * n_depths * 4 * h],
            cells: vec![0.0; n_steps * n_depths * h],
            tanh_cells: vec![0.0; n_steps * n_depths * h],
            hiddens: vec![0.0; n_steps * n_depths * h],
            outputs: Vec::new(),
        };
        tape.outputs = self.run(drivers, depths, Some(&mut tape));
        tape
    }

    fn run(&self, drivers: &[[f64; N_DRIVERS]], depths: &[f64], mut tape: Option<&mut Tape>) -> Vec<f64> {
        let h = self.hidden;
        let g4 = 4 * h;
        let row = self.row_len();
        let (n_steps, n_depths) = (drivers.len(), depths.len());
        let w = &self.params[..self.bias_offset()];
        let b = &self.params[self.bias_offset()..self.head_offset()];
        let w_out = &self.params[self.head_offset()..self.head_offset() + h];
        let b_out = self.output_bias();

        let mut hs = vec![0.0; n_depths * h];
        let mut cs = vec![0.0; n_depths * h];
        let mut base = vec![0.0; g4];
        let mut pre = vec![0.0; g4];
        let mut out = vec![0.0; n_depths * n_steps];

        for (t, x) in drivers.iter().enumerate() {
            for r in 0..g4 {
                let wr = &w[r * row..r * row + N_DRIVERS];
                let mut acc = b[r];
                for j in 0..N_DRIVERS {
                    acc += wr[j] * x[j];
                }
                base[r] = acc;
            }
            for (d, depth) in depths.iter().enumerate() {
                let h_prev = &hs[d * h..(d + 1) * h];
                for r in 0..g4 {
                    let wr = &w[r * row + N_DRIVERS..(r + 1) * row];
                    let mut acc = base[r] + wr[0] * depth;
                    let wh = &wr[1..];
                    for j in 0..h {
                        acc += wh[j] * h_prev[j];
                    }
                    pre[r] = acc;
                }
                let slot = t * n_depths + d;
                let mut y = b_out;
                for j in 0..h {
                    let ig = sigmoid(pre[j]);
                    let fg = sigmoid(pre[h + j]);
                    let gg = pre[2 * h + j].tanh();
                    let og = sigmoid(pre[3 * h + j]);
                    let c = fg * cs[d * h + j] + ig * gg;
                    let tc = c.tanh();
                    let hv = og * tc;
                    cs[d * h + j] = c;
                    if let Some(tp) = tape.as_deref_mut() {
                        let gb = slot * g4;
                        tp.gates[gb + j] = ig;
                        tp.gates[gb + h + j] = fg;
                        tp.gates[gb + 2 * h + j] = gg;
                        tp.gates[gb + 3 * h + j] = og;
                        tp.cells[slot * h + j] = c;
                        tp.tanh_cells[slot * h + j] = tc;
                        tp.hiddens[slot * h + j] = hv;
                    }
                    y += w_out[j] * hv;
                    // input-gate slot j is consumed; stage the new hidden state there
                    pre[j] = hv;
                }
                hs[d * h..(d + 1) * h].copy_from_slice(&pre[..h]);
                out[d * n_steps + t] = y;
            }
        }
        out
    }

    /// Gradient of a loss with respect to every parameter, given
    /// `d_outputs` (depth-major, same layout as the outputs).
    pub fn backward(&self, drivers: &[[f64; N_DRIVERS]], depths: &[f64], tape: &Tape, d_outputs: &[f64]) -> Vec<f64> {
        let h = self.hidden;
        let g4 = 4 * h;
        let row = self.row_len();
        let (n_steps, n_depths) = (tape.n_steps, tape.n_depths);
        debug_assert_eq!(tape.hidden, h);
        debug_assert_eq!(d_outputs.len(), n_steps * n_depths);
        let w = &self.params[..self.bias_offset()];
        let w_out = &self.params[self.head_offset()..self.head_offset() + h];

        let mut grad = vec![0.0; self.params.len()];
        let (gw, rest) = grad.split_at_mut(self.bias_offset());
        let (gb, rest) = rest.split_at_mut(g4);
        let (gw_out, gb_out) = rest.split_at_mut(h);

        let mut dh_next = vec![0.0; n_depths * h];
        let mut dc_next = vec![0.0; n_depths * h];
        let mut dpre = vec![0.0; g4];
        let mut dpre_sum = vec![0.0; g4];
        let zeros = vec![0.0; h];

        for t in (0..n_steps).rev() {
            dpre_sum.iter_mut().for_each(|v| *v = 0.0);
            for d in 0..n_depths {
                let slot = t * n_depths + d;
                let dy = d_outputs[d * n_steps + t];
                let gates = &tape.gates[slot * g4..(slot + 1) * g4];
                let tc = &tape.tanh_cells[slot * h..(slot + 1) * h];
                let hv = &tape.hiddens[slot * h..(slot + 1) * h];
                let (c_prev, h_prev) = if t > 0 {
                    let p = (t - 1) * n_depths + d;
                    (&tape.cells[p * h..(p + 1) * h], &tape.hiddens[p * h..(p + 1) * h])
                } else {
                    (&zeros[..], &zeros[..])
                };
                gb_out[0] += dy;
                for j in 0..h {
                    gw_out[j] += dy * hv[j];
                    let dh = dy * w_out[j] + dh_next[d * h + j];
                    let (ig, fg, gg, og) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                    let dc = dh * og * (1.0 - tc[j] * tc[j]) + dc_next[d * h + j];
                    dpre[j] = dc * gg * ig * (1.0 - ig);
                    dpre[h + j] = dc * c_prev[j] * fg * (1.0 - fg);
                    dpre[2 * h + j] = dc * ig * (1.0 - gg * gg);
                    dpre[3 * h + j] = dh * tc[j] * og * (1.0 - og);
                    dc_next[d * h + j] = dc * fg;
                }
                let dhn = &mut dh_next[d * h..(d + 1) * h];
                dhn.iter_mut().for_each(|v| *v = 0.0);
                let depth = depths[d];
                for r in 0..g4 {
                    let g = dpre[r];
                    dpre_sum[r] += g;
                    let wr = &w[r * row + N_DRIVERS..(r + 1) * row];
                    let gwr = &mut gw[r * row + N_DRIVERS..(r + 1) * row];
                    gwr[0] += g * depth;
                    for j in 0..h {
                        gwr[1 + j] += g * h_prev[j];
                        dhn[j] += wr[1 + j] * g;
                    }
                }
            }
            let x = &drivers[t];
            for r in 0..g4 {
                let g = dpre_sum[r];
                gb[r] += g;
                let gwr = &mut gw[r * row..r * row + N_DRIVERS];
                for j in 0..N_DRIVERS {
                    gwr[j] += g * x[j];
                }
            }
        }
        grad
    }
}
