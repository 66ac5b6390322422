//! Two-layer ReLU networks: a mean/quantile network with interval
//! propagation, and an implicit quantile network for sampling.

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundingBox, Interval};
use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::scalar::Real;

pub const LOW_QUANTILE: f64 = 0.05;
pub const HIGH_QUANTILE: f64 = 0.95;

/// Pinball loss `u * (kappa - 1{u < 0})` for residual `u = y - prediction`.
pub fn pinball<T: Real>(u: T, kappa: T) -> T {
    if u < T::zero() {
        u * (kappa - T::one())
    } else {
        u * kappa
    }
}

/// Derivative of the pinball loss with respect to the prediction.
fn pinball_grad<T: Real>(u: T, kappa: T) -> T {
    if u < T::zero() {
        T::one() - kappa
    } else {
        -kappa
    }
}

/// Affine map of raw inputs to roughly `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaling<T> {
    pub center: Vec<T>,
    pub half_width: Vec<T>,
}

impl<T: Real> InputScaling<T> {
    pub fn identity(dim: usize) -> Self {
        Self { center: vec![T::zero(); dim], half_width: vec![T::one(); dim] }
    }

    pub fn from_ranges(ranges: &[(T, T)]) -> Self {
        let two = T::lit(2.0);
        Self {
            center: ranges.iter().map(|&(lo, hi)| (lo + hi) / two).collect(),
            half_width: ranges.iter().map(|&(lo, hi)| ((hi - lo) / two).max(T::epsilon())).collect(),
        }
    }

    fn apply(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(x.iter().zip(&self.center).zip(&self.half_width).map(|((&v, &c), &s)| (v - c) / s));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub stepsize: T,
    beta1: T,
    beta2: T,
    eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(num_params: usize, stepsize: T) -> Self {
        Self {
            stepsize,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.stepsize * mh / (vh.sqrt() + self.eps);
        }
    }
}

fn init_uniform<T: Real>(n: usize, fan_in: usize, rng: &mut RngStream) -> Vec<T> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| T::lit(rng.uniform(-limit, limit))).collect()
}

/// Input -> ReLU hidden layer -> linear outputs, scaled by `output_scale`.
/// Parameters are laid out as `[W1, b1, W2, b2]`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    scaling: InputScaling<T>,
    output_scale: T,
    params: Vec<T>,
}

struct Activations<T> {
    x: Vec<T>,
    pre: Vec<T>,
    h: Vec<T>,
}

impl<T: Real> Mlp<T> {
    pub fn new(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        scaling: InputScaling<T>,
        output_scale: T,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if inputs == 0 || hidden == 0 || outputs == 0 {
            return invalid("network layers must be nonempty");
        }
        if scaling.center.len() != inputs || !(output_scale > T::zero()) {
            return invalid("input scaling must match the input size and output scale must be positive");
        }
        let mut params = init_uniform(hidden * inputs, inputs, rng);
        params.extend(std::iter::repeat(T::zero()).take(hidden));
        params.extend(init_uniform::<T>(outputs * hidden, hidden, rng));
        params.extend(std::iter::repeat(T::zero()).take(outputs));
        Ok(Self { inputs, hidden, outputs, scaling, output_scale, params })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        (b1, w2, w2 + self.outputs * self.hidden)
    }

    fn activations(&self, x: &[T]) -> Activations<T> {
        let (b1, _, _) = self.offsets();
        let mut xs = Vec::with_capacity(self.inputs);
        self.scaling.apply(x, &mut xs);
        let mut pre = Vec::with_capacity(self.hidden);
        for j in 0..self.hidden {
            let row = &self.params[j * self.inputs..(j + 1) * self.inputs];
            pre.push(self.params[b1 + j] + row.iter().zip(&xs).map(|(&w, &v)| w * v).sum::<T>());
        }
        let h = pre.iter().map(|&p| p.max(T::zero())).collect();
        Activations { x: xs, pre, h }
    }

    fn output_from_hidden(&self, h: &[T], k: usize) -> T {
        let (_, w2, b2) = self.offsets();
        let row = &self.params[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
        (self.params[b2 + k] + row.iter().zip(h).map(|(&w, &v)| w * v).sum::<T>()) * self.output_scale
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let a = self.activations(x);
        (0..self.outputs).map(|k| self.output_from_hidden(&a.h, k)).collect()
    }

    /// Accumulates into `grad` the parameter gradient for output
    /// derivatives `dout` (with respect to the scaled outputs).
    fn backward(&self, a: &Activations<T>, dout: &[T], grad: &mut [T]) {
        let (b1, w2, b2) = self.offsets();
        let mut dh = vec![T::zero(); self.hidden];
        for k in 0..self.outputs {
            let dz = dout[k] * self.output_scale;
            grad[b2 + k] += dz;
            for j in 0..self.hidden {
                grad[w2 + k * self.hidden + j] += dz * a.h[j];
                dh[j] += dz * self.params[w2 + k * self.hidden + j];
            }
        }
        for j in 0..self.hidden {
            if a.pre[j] <= T::zero() {
                continue;
            }
            grad[b1 + j] += dh[j];
            for i in 0..self.inputs {
                grad[j * self.inputs + i] += dh[j] * a.x[i];
            }
        }
    }

    /// Interval over each output for inputs in the box: per-unit linear
    /// bounds, then the monotone activation at both endpoints.
    pub fn propagate(&self, b: &BoundingBox<T>) -> Vec<Interval<T>> {
        let (b1, w2, b2) = self.offsets();
        let mut lo = Vec::with_capacity(self.inputs);
        let mut hi = Vec::with_capacity(self.inputs);
        self.scaling.apply(b.lower(), &mut lo);
        self.scaling.apply(b.upper(), &mut hi);
        let linear = |weights: &[T], bias: T, lo: &[T], hi: &[T]| {
            let mut l = bias;
            let mut u = bias;
            for ((&w, &a), &c) in weights.iter().zip(lo).zip(hi) {
                if w >= T::zero() {
                    l += w * a;
                    u += w * c;
                } else {
                    l += w * c;
                    u += w * a;
                }
            }
            (l, u)
        };
        let mut hl = Vec::with_capacity(self.hidden);
        let mut hu = Vec::with_capacity(self.hidden);
        for j in 0..self.hidden {
            let (l, u) = linear(&self.params[j * self.inputs..(j + 1) * self.inputs], self.params[b1 + j], &lo, &hi);
            hl.push(l.max(T::zero()));
            hu.push(u.max(T::zero()));
        }
        (0..self.outputs)
            .map(|k| {
                let (l, u) = linear(&self.params[w2 + k * self.hidden..w2 + (k + 1) * self.hidden], self.params[b2 + k], &hl, &hu);
                Interval::spanning(l * self.output_scale, u * self.output_scale)
            })
            .collect()
    }
}

/// Per-head losses of one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Losses<T> {
    pub squared: T,
    pub low: T,
    pub high: T,
}

/// Network predicting the mean and the 0.05 and 0.95 quantiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedForward<T> {
    net: Mlp<T>,
    adam: Adam<T>,
}

impl<T: Real> FeedForward<T> {
    pub fn new(inputs: usize, hidden: usize, scaling: InputScaling<T>, output_scale: T, rng: &mut RngStream) -> Result<Self> {
        let net = Mlp::new(inputs, hidden, 3, scaling, output_scale, rng)?;
        let adam = Adam::new(net.num_params(), T::lit(1e-3));
        Ok(Self { net, adam })
    }

    pub fn net(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    /// `[mean, q05, q95]`.
    pub fn predict(&self, x: &[T]) -> [T; 3] {
        let o = self.net.forward(x);
        [o[0], o[1], o[2]]
    }

    pub fn mean(&self, x: &[T]) -> T {
        self.predict(x)[0]
    }

    /// Per-head output intervals `[mean, q05, q95]` over the box.
    pub fn output_bounds(&self, b: &BoundingBox<T>) -> [Interval<T>; 3] {
        let o = self.net.propagate(b);
        [o[0], o[1], o[2]]
    }

    /// Lower bound of the low quantile to upper bound of the high quantile.
    pub fn outcome_bounds(&self, b: &BoundingBox<T>) -> Interval<T> {
        let [_, lo, hi] = self.output_bounds(b);
        Interval::spanning(lo.lo(), hi.hi().max(lo.lo()))
    }

    /// Sum of the three head losses at one example, and its gradient.
    pub fn loss_and_grad(&self, x: &[T], y: T, grad: &mut [T]) -> Losses<T> {
        let a = self.net.activations(x);
        let o: Vec<T> = (0..3).map(|k| self.net.output_from_hidden(&a.h, k)).collect();
        let half = T::lit(0.5);
        let (kl, kh) = (T::lit(LOW_QUANTILE), T::lit(HIGH_QUANTILE));
        let losses = Losses { squared: half * (o[0] - y) * (o[0] - y), low: pinball(y - o[1], kl), high: pinball(y - o[2], kh) };
        let dout = [o[0] - y, pinball_grad(y - o[1], kl), pinball_grad(y - o[2], kh)];
        self.net.backward(&a, &dout, grad);
        losses
    }

    pub fn loss(&self, x: &[T], y: T) -> T {
        let o = self.net.forward(x);
        let half = T::lit(0.5);
        half * (o[0] - y) * (o[0] - y) + pinball(y - o[1], T::lit(LOW_QUANTILE)) + pinball(y - o[2], T::lit(HIGH_QUANTILE))
    }

    /// One Adam step on the batch-mean loss.
    pub fn train_batch(&mut self, xs: &[&[T]], ys: &[T]) -> Losses<T> {
        let mut grad = vec![T::zero(); self.net.num_params()];
        let mut total = Losses { squared: T::zero(), low: T::zero(), high: T::zero() };
        for (x, &y) in xs.iter().zip(ys) {
            let l = self.loss_and_grad(x, y, &mut grad);
            total.squared += l.squared;
            total.low += l.low;
            total.high += l.high;
        }
        let n = T::lit(xs.len() as f64);
        for g in &mut grad {
            *g /= n;
        }
        self.adam.step(&mut self.net.params, &grad);
        Losses { squared: total.squared / n, low: total.low / n, high: total.high / n }
    }
}

/// Implicit quantile network: `out = w . (psi(x) * phi(tau)) + b`, where
/// `psi` is the ReLU hidden layer and `phi` a ReLU layer over a cosine
/// embedding of the quantile level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iqn<T> {
    inputs: usize,
    hidden: usize,
    embedding: usize,
    scaling: InputScaling<T>,
    output_scale: T,
    /// `[W1, b1, We, be, w, b]`.
    params: Vec<T>,
    adam: Adam<T>,
    /// Quantile levels drawn per example in a training step.
    pub taus_per_example: usize,
}

impl<T: Real> Iqn<T> {
    pub fn new(
        inputs: usize,
        hidden: usize,
        embedding: usize,
        scaling: InputScaling<T>,
        output_scale: T,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if inputs == 0 || hidden == 0 || embedding == 0 || scaling.center.len() != inputs {
            return invalid("IQN layers must be nonempty and match the input scaling");
        }
        let mut params = init_uniform(hidden * inputs, inputs, rng);
        params.extend(std::iter::repeat(T::zero()).take(hidden));
        params.extend(init_uniform::<T>(hidden * embedding, embedding, rng));
        params.extend(std::iter::repeat(T::zero()).take(hidden));
        params.extend(init_uniform::<T>(hidden, hidden, rng));
        params.push(T::zero());
        let adam = Adam::new(params.len(), T::lit(1e-3));
        Ok(Self { inputs, hidden, embedding, scaling, output_scale, params, adam, taus_per_example: 8 })
    }

    fn offsets(&self) -> [usize; 5] {
        let b1 = self.hidden * self.inputs;
        let we = b1 + self.hidden;
        let be = we + self.hidden * self.embedding;
        let w = be + self.hidden;
        [b1, we, be, w, w + self.hidden]
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn cosines(&self, tau: T) -> Vec<T> {
        (0..self.embedding).map(|i| (T::PI() * T::lit(i as f64) * tau).cos()).collect()
    }

    fn psi(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let [b1, ..] = self.offsets();
        let mut xs = Vec::with_capacity(self.inputs);
        self.scaling.apply(x, &mut xs);
        let pre = (0..self.hidden)
            .map(|j| self.params[b1 + j] + (0..self.inputs).map(|i| self.params[j * self.inputs + i] * xs[i]).sum::<T>())
            .collect();
        (xs, pre)
    }

    fn phi_pre(&self, c: &[T]) -> Vec<T> {
        let [_, we, be, ..] = self.offsets();
        (0..self.hidden)
            .map(|j| {
                self.params[be + j] + (0..self.embedding).map(|i| self.params[we + j * self.embedding + i] * c[i]).sum::<T>()
            })
            .collect()
    }

    fn head(&self, psi_pre: &[T], phi_pre: &[T]) -> T {
        let [.., w, b] = self.offsets();
        let z = self.params[b]
            + (0..self.hidden)
                .map(|j| self.params[w + j] * psi_pre[j].max(T::zero()) * phi_pre[j].max(T::zero()))
                .sum::<T>();
        z * self.output_scale
    }

    /// Predicted `tau`-quantile at `x`.
    pub fn quantile(&self, x: &[T], tau: T) -> T {
        let (_, pre) = self.psi(x);
        self.head(&pre, &self.phi_pre(&self.cosines(tau)))
    }

    pub fn sample(&self, x: &[T], rng: &mut RngStream) -> T {
        self.quantile(x, T::lit(rng.unit()))
    }

    /// Pinball loss at level `tau` and its gradient.
    pub fn loss_and_grad(&self, x: &[T], y: T, tau: T, grad: &mut [T]) -> T {
        let [b1, we, be, w, b] = self.offsets();
        let (xs, psi_pre) = self.psi(x);
        let c = self.cosines(tau);
        let phi_pre = self.phi_pre(&c);
        let out = self.head(&psi_pre, &phi_pre);
        let dz = pinball_grad(y - out, tau) * self.output_scale;
        grad[b] += dz;
        for j in 0..self.hidden {
            let psi = psi_pre[j].max(T::zero());
            let phi = phi_pre[j].max(T::zero());
            grad[w + j] += dz * psi * phi;
            let dpsi = dz * self.params[w + j] * phi;
            let dphi = dz * self.params[w + j] * psi;
            if psi_pre[j] > T::zero() {
                grad[b1 + j] += dpsi;
                for i in 0..self.inputs {
                    grad[j * self.inputs + i] += dpsi * xs[i];
                }
            }
            if phi_pre[j] > T::zero() {
                grad[be + j] += dphi;
                for i in 0..self.embedding {
                    grad[we + j * self.embedding + i] += dphi * c[i];
                }
            }
        }
        pinball(y - out, tau)
    }

    pub fn loss(&self, x: &[T], y: T, tau: T) -> T {
        pinball(y - self.quantile(x, tau), tau)
    }

    /// One Adam step on pinball losses at freshly drawn quantile levels.
    pub fn train_batch(&mut self, xs: &[&[T]], ys: &[T], rng: &mut RngStream) -> T {
        let mut grad = vec![T::zero(); self.params.len()];
        let mut total = T::zero();
        let mut count = 0usize;
        for (x, &y) in xs.iter().zip(ys) {
            for _ in 0..self.taus_per_example {
                total += self.loss_and_grad(x, y, T::lit(rng.unit()), &mut grad);
                count += 1;
            }
        }
        let n = T::lit(count as f64);
        for g in &mut grad {
            *g /= n;
        }
        self.adam.step(&mut self.params, &grad);
        total / n
    }
}
