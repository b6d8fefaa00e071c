//! Dense feed-forward network over a flat parameter vector.
//!
//! Layout per layer: `out x in` weights (row-major), then `out` biases.
//! A linear model is the zero-hidden-layer case.

use std::ops::Range;

use super::Activation;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layer {
    pub weights: Range<usize>,
    pub biases: Range<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Network {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub nonnegative: bool,
    widths: Vec<usize>,
}

impl Network {
    pub fn new(dim: usize, hidden: &[usize], activation: Activation, nonnegative: bool) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(dim);
        widths.extend_from_slice(hidden);
        widths.push(1);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = offset..offset + fan_in * fan_out;
            let biases = weights.end..weights.end + fan_out;
            offset = biases.end;
            layers.push(Layer {
                weights,
                biases,
                fan_in,
                fan_out,
            });
        }
        Network {
            layers,
            activation,
            nonnegative,
            widths,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.last().map_or(0, |l| l.biases.end)
    }

    pub fn workspace<T: Scalar>(&self) -> Workspace<T> {
        Workspace {
            acts: self.widths.iter().map(|&w| vec![T::zero(); w]).collect(),
            pre: self.widths[1..].iter().map(|&w| vec![T::zero(); w]).collect(),
            delta: Vec::new(),
            next: Vec::new(),
        }
    }

    pub fn forward<T: Scalar>(&self, params: &[T], x: &[T], ws: &mut Workspace<T>) -> T {
        ws.acts[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let w = &params[layer.weights.clone()];
            let b = &params[layer.biases.clone()];
            let (input, rest) = ws.acts.split_at_mut(l + 1);
            let input = &input[l];
            let output = &mut rest[0];
            for o in 0..layer.fan_out {
                let row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                let z = row
                    .iter()
                    .zip(input.iter())
                    .fold(b[o], |acc, (&wi, &ai)| acc + wi * ai);
                ws.pre[l][o] = z;
                output[o] = if l == last { z } else { self.activation.apply(z) };
            }
        }
        let z = ws.acts[last + 1][0];
        if self.nonnegative {
            softplus(z)
        } else {
            z
        }
    }

    /// Accumulates `d_out * d(output)/d(params)` into `grad`, using the cache
    /// left by the preceding `forward` call.
    pub fn backward<T: Scalar>(&self, params: &[T], ws: &mut Workspace<T>, d_out: T, grad: &mut [T]) {
        let last = self.layers.len() - 1;
        let z_out = ws.pre[last][0];
        let d_out = if self.nonnegative {
            d_out * sigmoid(z_out)
        } else {
            d_out
        };
        ws.delta.clear();
        ws.delta.push(d_out);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &ws.acts[l];
            for o in 0..layer.fan_out {
                let d = ws.delta[o];
                grad[layer.biases.start + o] += d;
                let base = layer.weights.start + o * layer.fan_in;
                for (i, &a) in input.iter().enumerate() {
                    grad[base + i] += d * a;
                }
            }
            if l == 0 {
                break;
            }
            ws.next.clear();
            let w = &params[layer.weights.clone()];
            for i in 0..layer.fan_in {
                let s = (0..layer.fan_out).fold(T::zero(), |acc, o| {
                    acc + w[o * layer.fan_in + i] * ws.delta[o]
                });
                ws.next.push(s * self.activation.derivative(ws.pre[l - 1][i]));
            }
            std::mem::swap(&mut ws.delta, &mut ws.next);
        }
    }

    pub fn is_weight(&self, idx: usize) -> bool {
        self.layers.iter().any(|l| l.weights.contains(&idx))
    }
}

pub(crate) struct Workspace<T> {
    acts: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    delta: Vec<T>,
    next: Vec<T>,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(T::zero()),
        }
    }

    fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

pub(crate) fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts() {
        let net = Network::new(3, &[4, 2], Activation::Tanh, false);
        assert_eq!(net.param_count(), 3 * 4 + 4 + 4 * 2 + 2 + 2 + 1);
        assert!(net.is_weight(0));
        assert!(!net.is_weight(12));
        assert_eq!(Network::new(2, &[], Activation::Tanh, false).param_count(), 3);
    }

    #[test]
    fn softplus_is_stable_and_positive() {
        assert!(softplus(-800.0f64) >= 0.0);
        assert!((softplus(800.0f64) - 800.0).abs() < 1e-9);
        assert!((softplus(0.0f64) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((sigmoid(-800.0f64)).is_finite());
    }
}
