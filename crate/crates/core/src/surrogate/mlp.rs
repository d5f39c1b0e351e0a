//! Dense feed-forward network with tanh hidden layers and a linear output,
//! parameters stored in one flat vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Input width, hidden widths, output width (always 1).
    widths: Vec<usize>,
    /// Per layer: weights `out x in` row-major, then `out` biases.
    params: Vec<f64>,
}

/// Reusable activation buffers for one sample.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Mlp {
    /// Weights uniform in `±sqrt(3 / fan_in)`, biases zero.
    pub fn new(inputs: usize, hidden: &[usize], seed: u64) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(inputs);
        widths.extend_from_slice(hidden);
        widths.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(Self::count(&widths));
        for w in widths.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = (3.0 / n_in as f64).sqrt();
            params.extend((0..n_in * n_out).map(|_| rng.gen_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        Mlp { widths, params }
    }

    fn count(widths: &[usize]) -> usize {
        widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Rebuilds a network from explicit parameters; `None` on a size mismatch.
    pub fn from_params(widths: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (widths.len() >= 2 && *widths.last()? == 1 && params.len() == Self::count(&widths))
            .then_some(Mlp { widths, params })
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.widths.windows(2).map(move |w| {
            let at = offset;
            offset += w[0] * w[1] + w[1];
            (at, w[0], w[1])
        })
    }

    pub fn forward(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        let n_layers = self.widths.len() - 1;
        scratch.acts.resize(n_layers + 1, Vec::new());
        scratch.acts[0].clear();
        scratch.acts[0].extend_from_slice(x);
        for (l, (at, n_in, n_out)) in self.layers().enumerate() {
            let (prev, next) = scratch.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            out.clear();
            let w = &self.params[at..at + n_in * n_out];
            let b = &self.params[at + n_in * n_out..at + n_in * n_out + n_out];
            let last = l + 1 == n_layers;
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = b[o] + row.iter().zip(input).map(|(a, c)| a * c).sum::<f64>();
                out.push(if last { z } else { z.tanh() });
            }
        }
        scratch.acts[n_layers][0]
    }

    /// Adds `scale * d(output)/d(params)` to `grad`, using the activations
    /// left in `scratch` by the preceding [`Mlp::forward`].
    pub fn backward(&self, scale: f64, scratch: &mut Scratch, grad: &mut [f64]) {
        let n_layers = self.widths.len() - 1;
        scratch.deltas.resize(n_layers, Vec::new());
        let layers: Vec<_> = self.layers().collect();
        scratch.deltas[n_layers - 1].clear();
        scratch.deltas[n_layers - 1].push(scale);
        for l in (0..n_layers).rev() {
            let (at, n_in, n_out) = layers[l];
            let input = &scratch.acts[l];
            for o in 0..n_out {
                let d = scratch.deltas[l][o];
                let g = &mut grad[at + o * n_in..at + (o + 1) * n_in];
                for (gi, a) in g.iter_mut().zip(input) {
                    *gi += d * a;
                }
                grad[at + n_in * n_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[at..at + n_in * n_out];
                let mut back = std::mem::take(&mut scratch.deltas[l - 1]);
                back.clear();
                back.resize(n_in, 0.0);
                for o in 0..n_out {
                    let d = scratch.deltas[l][o];
                    for (bi, wi) in back.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *bi += d * wi;
                    }
                }
                for (bi, a) in back.iter_mut().zip(&scratch.acts[l]) {
                    *bi *= 1.0 - a * a;
                }
                scratch.deltas[l - 1] = back;
            }
        }
    }

    /// Mean squared error over a batch and its gradient.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[f64], scratch: &mut Scratch) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate(xs.iter().map(Vec::as_slice), ys, scratch, &mut grad);
        (loss, grad)
    }

    /// As [`Mlp::loss_and_grad`], writing into a caller-owned gradient.
    pub fn accumulate<'a>(
        &self,
        xs: impl Iterator<Item = &'a [f64]>,
        ys: &[f64],
        scratch: &mut Scratch,
        grad: &mut [f64],
    ) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n = ys.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.zip(ys) {
            let err = self.forward(x, scratch) - y;
            loss += err * err;
            self.backward(2.0 * err / n, scratch, grad);
        }
        loss / n
    }
}

/// Adam optimiser state.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}
