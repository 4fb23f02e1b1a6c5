use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::loss::{loss, LossKind};
use crate::error::{Error, Result};

/// One dense layer, `out = input . weights + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Shape `(inputs, outputs)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weights: Array2::zeros(self.weights.raw_dim()),
            bias: Array1::zeros(self.bias.len()),
        }
    }
}

/// Feed-forward binary classifier: ReLU hidden layers, one sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Network {
    /// He-normal weights and zero biases.
    pub fn new(inputs: usize, hidden_units: usize, num_layers: usize, seed: u64) -> Result<Self> {
        if inputs == 0 || hidden_units == 0 || num_layers == 0 {
            return Err(Error::InvalidInput(format!(
                "network needs positive widths, got inputs={inputs} hidden={hidden_units} layers={num_layers}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(num_layers + 1);
        let mut width = inputs;
        for l in 0..=num_layers {
            let out = if l == num_layers { 1 } else { hidden_units };
            let normal = Normal::new(0.0, (2.0 / width as f64).sqrt()).expect("positive sd");
            let weights = Array2::from_shape_simple_fn((width, out), || normal.sample(&mut rng));
            layers.push(Layer {
                weights,
                bias: Array1::zeros(out),
            });
            width = out;
        }
        Ok(Self { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameter count of a network with the given shape.
    pub fn param_count_for(inputs: usize, hidden_units: usize, num_layers: usize) -> usize {
        let first = (inputs + 1) * hidden_units;
        let middle = (num_layers - 1) * (hidden_units + 1) * hidden_units;
        first + middle + hidden_units + 1
    }

    pub(crate) fn zeros_like(&self) -> Vec<Layer> {
        self.layers.iter().map(Layer::zeros_like).collect()
    }

    /// Inverted-dropout masks, one `(batch, hidden_units)` matrix per hidden
    /// layer, with entries `0` or `1 / (1 - rate)`.
    pub fn draw_masks<R: Rng + ?Sized>(&self, batch: usize, rate: f64, rng: &mut R) -> Vec<Array2<f64>> {
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        self.layers[..self.hidden_layers()]
            .iter()
            .map(|l| {
                Array2::from_shape_simple_fn((batch, l.bias.len()), || {
                    if rng.random::<f64>() < keep {
                        scale
                    } else {
                        0.0
                    }
                })
            })
            .collect()
    }

    /// Forward pass. Returns the input of every layer and the hidden
    /// pre-activations, plus the output logits.
    fn forward(
        &self,
        x: ArrayView2<f64>,
        masks: Option<&[Array2<f64>]>,
    ) -> (Vec<Array2<f64>>, Vec<Array2<f64>>, Array1<f64>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.hidden_layers());
        let mut a = x.to_owned();
        for (l, layer) in self.layers[..self.hidden_layers()].iter().enumerate() {
            let z = a.dot(&layer.weights) + &layer.bias;
            let mut h = z.mapv(|v| v.max(0.0));
            if let Some(m) = masks {
                h *= &m[l];
            }
            inputs.push(a);
            pre.push(z);
            a = h;
        }
        let out = self.layers.last().expect("output layer");
        let logits = a.dot(&out.weights).column(0).to_owned() + out.bias[0];
        inputs.push(a);
        (inputs, pre, logits)
    }

    /// Logits at inference time (no dropout).
    pub fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.forward(x, None).2
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.logits(x).iter().map(|z| sigmoid(*z)).collect()
    }

    /// Mean batch loss and its gradient for every parameter. `masks` are
    /// the dropout masks to apply (none at evaluation time).
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        labels: &[bool],
        kind: LossKind,
        class_weights: &[f64],
        gamma: f64,
        masks: Option<&[Array2<f64>]>,
    ) -> Result<(f64, Vec<Layer>)> {
        let (inputs, pre, logits) = self.forward(x, masks);
        let probs: Vec<f64> = logits.iter().map(|z| sigmoid(*z)).collect();
        let (value, dlogits) = loss(kind, &probs, labels, class_weights, gamma)?;

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = Array2::from_shape_vec((dlogits.len(), 1), dlogits).expect("column");
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let gw = inputs[l].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Layer { weights: gw, bias: gb });
            if l == 0 {
                break;
            }
            let mut da = delta.dot(&layer.weights.t());
            if let Some(m) = masks {
                da *= &m[l - 1];
            }
            da.zip_mut_with(&pre[l - 1], |g, z| {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = da;
        }
        grads.reverse();
        Ok((value, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Array2<f64>, Vec<bool>) {
        let x = Array2::from_shape_simple_fn((n, d), || rng.random_range(-2.0..2.0));
        let mut y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        y[0] = true;
        y[1] = false;
        (x, y)
    }

    #[test]
    fn shapes_chain() {
        let net = Network::new(7, 5, 3, 0).unwrap();
        let shapes: Vec<_> = net.layers.iter().map(|l| l.weights.dim()).collect();
        assert_eq!(shapes, vec![(7, 5), (5, 5), (5, 5), (5, 1)]);
        assert_eq!(net.param_count(), Network::param_count_for(7, 5, 3));
        let x = Array2::zeros((4, 7));
        assert_eq!(net.predict_proba(x.view()).len(), 4);
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..6 {
            let kind = if case % 2 == 0 { LossKind::WeightedBce } else { LossKind::Focal };
            let mut net = Network::new(4, 6, 1 + case % 3, case as u64).unwrap();
            for layer in &mut net.layers {
                layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            }
            let (x, y) = random_batch(&mut rng, 8, 4);
            let masks = net.draw_masks(8, 0.3, &mut rng);
            let w = [0.7, 1.6];
            let (_, grads) = net.loss_and_gradients(x.view(), &y, kind, &w, 2.0, Some(&masks)).unwrap();
            let f = |n: &Network| n.loss_and_gradients(x.view(), &y, kind, &w, 2.0, Some(&masks)).unwrap().0;
            let h = 1e-5;
            for l in 0..net.layers.len() {
                for j in 0..net.layers[l].bias.len() {
                    let mut p = net.clone();
                    p.layers[l].bias[j] += h;
                    let mut m = net.clone();
                    m.layers[l].bias[j] -= h;
                    let fd = (f(&p) - f(&m)) / (2.0 * h);
                    let a = grads[l].bias[j];
                    assert!((fd - a).abs() <= 1e-4 * fd.abs().max(a.abs()).max(1e-9), "layer {l} b[{j}]: {a} vs {fd}");
                }
                for idx in 0..net.layers[l].weights.len() {
                    let (r, c) = (idx / net.layers[l].weights.ncols(), idx % net.layers[l].weights.ncols());
                    let mut p = net.clone();
                    p.layers[l].weights[[r, c]] += h;
                    let mut m = net.clone();
                    m.layers[l].weights[[r, c]] -= h;
                    let fd = (f(&p) - f(&m)) / (2.0 * h);
                    let a = grads[l].weights[[r, c]];
                    let scale = fd.abs().max(a.abs());
                    assert!(scale < 1e-9 || (fd - a).abs() / scale < 1e-4, "layer {l} w[{r},{c}]: {a} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn dropout_preserves_expected_activation() {
        // with one hidden layer the logit is linear in the masked activations
        let net = Network::new(3, 8, 1, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_vec((1, 3), vec![0.8, -0.3, 1.1]).unwrap();
        let clean = net.logits(x.view())[0];
        let rate = 0.4;
        let trials = 20_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..trials {
            let m = net.draw_masks(1, rate, &mut rng);
            let v = net.forward(x.view(), Some(&m)).2[0];
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / trials as f64;
        let se = ((sum_sq / trials as f64 - mean * mean) / trials as f64).sqrt();
        assert!((mean - clean).abs() < 3.0 * se, "dropout mean {mean}, clean {clean}, se {se}");
    }
}
