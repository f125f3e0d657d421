//! Small tanh MLP with a policy head and two value heads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ExtrinsicCritic, PolicyOutput, NUM_ACTIONS};

/// A dense layer stored in the parameter vector. `w` is input-major
/// (`w[i * out + o]`), which keeps sparse inputs cheap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct Dense {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

impl Dense {
    fn len(&self) -> usize {
        self.inp * self.out + self.out
    }

    fn forward(&self, theta: &[f64], x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        y.extend_from_slice(&theta[self.b..self.b + self.out]);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &theta[self.w + i * self.out..self.w + (i + 1) * self.out];
                for (yo, &w) in y.iter_mut().zip(row) {
                    *yo += xi * w;
                }
            }
        }
    }

    /// Accumulates parameter gradients; writes the input gradient to `dx`
    /// when asked.
    fn backward(&self, theta: &[f64], x: &[f64], dy: &[f64], grad: &mut [f64], dx: Option<&mut Vec<f64>>) {
        for (g, &d) in grad[self.b..self.b + self.out].iter_mut().zip(dy) {
            *g += d;
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &mut grad[self.w + i * self.out..self.w + (i + 1) * self.out];
                for (g, &d) in row.iter_mut().zip(dy) {
                    *g += xi * d;
                }
            }
        }
        if let Some(dx) = dx {
            dx.clear();
            dx.extend((0..self.inp).map(|i| {
                let row = &theta[self.w + i * self.out..self.w + (i + 1) * self.out];
                row.iter().zip(dy).map(|(w, d)| w * d).sum::<f64>()
            }));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Layout {
    trunk: Vec<Dense>,
    policy: Dense,
    total: Dense,
    /// Own trunk of the extrinsic critic when it does not share features.
    ext_trunk: Option<Vec<Dense>>,
    ext: Dense,
    len: usize,
    /// First parameter that only the extrinsic critic uses.
    ext_start: usize,
}

impl Layout {
    fn new(input: usize, hidden: &[usize], critic: ExtrinsicCritic) -> Self {
        let mut cursor = 0;
        let mut dense = |inp: usize, out: usize| {
            let d = Dense { w: cursor, b: cursor + inp * out, inp, out };
            cursor += d.len();
            d
        };
        let mut trunk = Vec::new();
        let mut width = input;
        for &h in hidden {
            trunk.push(dense(width, h));
            width = h;
        }
        let policy = dense(width, NUM_ACTIONS);
        let total = dense(width, 1);
        // everything allocated from here on belongs to the extrinsic critic
        let ext_start = total.b + total.out;
        let ext_trunk = match critic {
            ExtrinsicCritic::SharedTrunk => None,
            ExtrinsicCritic::Separate => {
                let mut layers = Vec::new();
                let mut w = input;
                for &h in hidden {
                    layers.push(dense(w, h));
                    w = h;
                }
                Some(layers)
            }
        };
        let ext = dense(width, 1);
        Self { trunk, policy, total, ext_trunk, ext, len: cursor, ext_start }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Mlp {
    pub(crate) theta: Vec<f64>,
    layout: Layout,
    input_scale: f64,
}

/// Activations kept from a forward pass for backpropagation.
pub(crate) struct Trace {
    trunk: Vec<Vec<f64>>,
    ext: Option<Vec<Vec<f64>>>,
}

fn run_trunk(layers: &[Dense], theta: &[f64], x: Vec<f64>) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x);
    for layer in layers {
        let mut y = Vec::with_capacity(layer.out);
        layer.forward(theta, acts.last().expect("input present"), &mut y);
        y.iter_mut().for_each(|v| *v = v.tanh());
        acts.push(y);
    }
    acts
}

fn backprop_trunk(layers: &[Dense], theta: &[f64], acts: &[Vec<f64>], mut dh: Vec<f64>, grad: &mut [f64]) {
    let mut dx = Vec::new();
    for (l, layer) in layers.iter().enumerate().rev() {
        let out = &acts[l + 1];
        for (d, &a) in dh.iter_mut().zip(out) {
            *d *= 1.0 - a * a;
        }
        let want_dx = l > 0;
        layer.backward(theta, &acts[l], &dh, grad, want_dx.then_some(&mut dx));
        if want_dx {
            std::mem::swap(&mut dh, &mut dx);
        }
    }
}

impl Mlp {
    pub(crate) fn new(input: usize, hidden: &[usize], critic: ExtrinsicCritic, input_scale: f64) -> Self {
        let layout = Layout::new(input, hidden, critic);
        Self { theta: vec![0.0; layout.len], layout, input_scale }
    }

    /// Uniform(±1/√fan_in) weights, zero biases; the policy head is scaled
    /// down so the initial policy is close to uniform.
    pub(crate) fn randomize(&mut self, rng: &mut impl Rng) {
        let layout = self.layout.clone();
        let mut fill = |d: &Dense, gain: f64| {
            let bound = gain / (d.inp as f64).sqrt();
            for w in &mut self.theta[d.w..d.w + d.inp * d.out] {
                *w = rng.random_range(-bound..bound);
            }
        };
        for d in layout.trunk.iter().chain(layout.ext_trunk.iter().flatten()) {
            fill(d, 1.0);
        }
        fill(&layout.policy, 0.01);
        fill(&layout.total, 1.0);
        fill(&layout.ext, 1.0);
    }

    pub(crate) fn input_dim(&self) -> usize {
        self.layout.trunk.first().map_or(self.layout.policy.inp, |d| d.inp)
    }

    pub(crate) fn num_params(&self) -> usize {
        self.layout.len
    }

    pub(crate) fn ext_only_range(&self) -> std::ops::Range<usize> {
        self.layout.ext_start..self.layout.len
    }

    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        if self.input_scale == 1.0 {
            x.to_vec()
        } else {
            x.iter().map(|v| v * self.input_scale).collect()
        }
    }

    pub(crate) fn forward_traced(&self, x: &[f64]) -> (PolicyOutput, Trace) {
        let l = &self.layout;
        let trunk = run_trunk(&l.trunk, &self.theta, self.scaled(x));
        let h = trunk.last().expect("trunk output");
        let mut logits = Vec::with_capacity(NUM_ACTIONS);
        l.policy.forward(&self.theta, h, &mut logits);
        let mut v = Vec::with_capacity(1);
        l.total.forward(&self.theta, h, &mut v);
        let v_total = v[0];
        let ext = l.ext_trunk.as_ref().map(|layers| run_trunk(layers, &self.theta, self.scaled(x)));
        let he = ext.as_ref().map_or(h, |a| a.last().expect("ext trunk output"));
        l.ext.forward(&self.theta, he, &mut v);
        let v_ext = v[0];
        let mut action_logits = [0.0; NUM_ACTIONS];
        action_logits.copy_from_slice(&logits);
        (PolicyOutput { action_logits, v_total, v_ext }, Trace { trunk, ext })
    }

    pub(crate) fn forward(&self, x: &[f64]) -> PolicyOutput {
        self.forward_traced(x).0
    }

    /// Accumulates the gradient for one sample given the loss derivatives
    /// with respect to the three head outputs. The extrinsic head's error
    /// does not reach the shared trunk.
    pub(crate) fn backward(&self, trace: &Trace, dlogits: &[f64; NUM_ACTIONS], dv_total: f64, dv_ext: f64, grad: &mut [f64]) {
        let l = &self.layout;
        let h = trace.trunk.last().expect("trunk output");
        let mut dh = Vec::new();
        l.policy.backward(&self.theta, h, dlogits, grad, Some(&mut dh));
        let mut dh_v = Vec::new();
        l.total.backward(&self.theta, h, &[dv_total], grad, Some(&mut dh_v));
        for (a, b) in dh.iter_mut().zip(&dh_v) {
            *a += b;
        }
        backprop_trunk(&l.trunk, &self.theta, &trace.trunk, dh, grad);

        match (&l.ext_trunk, &trace.ext) {
            (Some(layers), Some(acts)) => {
                let he = acts.last().expect("ext trunk output");
                let mut dhe = Vec::new();
                l.ext.backward(&self.theta, he, &[dv_ext], grad, Some(&mut dhe));
                backprop_trunk(layers, &self.theta, acts, dhe, grad);
            }
            _ => l.ext.backward(&self.theta, h, &[dv_ext], grad, None),
        }
    }
}
