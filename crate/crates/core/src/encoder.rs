//! Feed-forward encoder mapping raw features to unit-norm embeddings, with
//! hand-written backpropagation.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SuvrError};
use crate::numeric::{self, Matrix, SeededRng};

pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_EMBED_DIM: usize = 64;
const BIAS_INIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Affine map `out × in` followed by an activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        numeric::check_len(weights.rows(), biases.len())?;
        Ok(Layer {
            weights,
            biases,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Stack of layers whose output is always L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpEncoder {
    layers: Vec<Layer>,
}

/// Intermediate values from [`MlpEncoder::forward`] needed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    output: Vec<f64>,
    output_norm: f64,
}

impl ForwardCache {
    pub fn embedding(&self) -> &[f64] {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradients for every encoder parameter, laid out like the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub layers: Vec<LayerGrads>,
}

impl EncoderGrads {
    pub fn zeros_like(enc: &MlpEncoder) -> Self {
        EncoderGrads {
            layers: enc
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: vec![0.0; l.weights.as_slice().len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &EncoderGrads) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            for x in s {
                *x *= factor;
            }
        }
    }

    /// `[w_0, b_0, w_1, b_1, ...]`, matching [`MlpEncoder::parameters_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
            .collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }
}

impl MlpEncoder {
    /// Validates that consecutive layer dimensions chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(SuvrError::InvalidArgument("encoder needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(SuvrError::ShapeMismatch(format!(
                    "layer emits {} values but the next expects {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(MlpEncoder { layers })
    }

    /// `d_in → hidden[0] → ... → d_out`, ReLU on hidden layers and linear on
    /// the last. Weights are N(0, 1/fan_in), biases 0.01.
    pub fn new(d_in: usize, hidden: &[usize], d_out: usize, rng: &mut SeededRng) -> Result<Self> {
        let dims: Vec<usize> = std::iter::once(d_in)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(d_out))
            .collect();
        if dims.contains(&0) {
            return Err(SuvrError::InvalidArgument(format!(
                "encoder dimensions must be positive: {dims:?}"
            )));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = 1.0 / (fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.normal() * std).collect();
                let activation = if i == last {
                    Activation::Linear
                } else {
                    Activation::Relu
                };
                Layer::new(
                    Matrix::from_vec(fan_out, fan_in, data)?,
                    vec![BIAS_INIT; fan_out],
                    activation,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        MlpEncoder::from_layers(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        numeric::check_len(self.input_dim(), x.len())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.weights.mul_vec(&h)?;
            for (zi, b) in z.iter_mut().zip(&layer.biases) {
                *zi += b;
            }
            let next = z.iter().map(|&zi| layer.activation.apply(zi)).collect();
            inputs.push(std::mem::replace(&mut h, next));
            pre_activations.push(z);
        }
        let output_norm = numeric::l2_normalize_in_place(&mut h)?;
        Ok(ForwardCache {
            inputs,
            pre_activations,
            output: h,
            output_norm,
        })
    }

    /// The normalized embedding of `x`.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.output)
    }

    /// Embeds every row of `features`.
    pub fn embed_all(&self, features: &Matrix) -> Result<Matrix> {
        let mut data = Vec::with_capacity(features.rows() * self.output_dim());
        for row in features.iter_rows() {
            data.extend(self.embed(row)?);
        }
        Matrix::from_vec(features.rows(), self.output_dim(), data)
    }

    /// Backpropagates `dL/dv` through the normalization and every layer.
    pub fn backward(&self, cache: &ForwardCache, dl_dv: &[f64]) -> Result<EncoderGrads> {
        if cache.inputs.len() != self.layers.len()
            || cache
                .pre_activations
                .iter()
                .zip(&self.layers)
                .any(|(z, l)| z.len() != l.output_dim())
        {
            return Err(SuvrError::ShapeMismatch(
                "forward cache does not belong to this encoder".into(),
            ));
        }
        numeric::check_len(self.output_dim(), dl_dv.len())?;

        // v = u/‖u‖  ⇒  dL/du = (I − v vᵀ) dL/dv / ‖u‖
        let v = &cache.output;
        let radial = numeric::dot(v, dl_dv)?;
        let mut upstream: Vec<f64> = dl_dv
            .iter()
            .zip(v)
            .map(|(g, vi)| (g - radial * vi) / cache.output_norm)
            .collect();

        let mut grads = EncoderGrads::zeros_like(self);
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[li];
            let input = &cache.inputs[li];
            let dz: Vec<f64> = upstream
                .iter()
                .zip(z)
                .map(|(g, &zi)| g * layer.activation.derivative(zi))
                .collect();
            let lg = &mut grads.layers[li];
            let fan_in = layer.input_dim();
            for (r, &dzr) in dz.iter().enumerate() {
                lg.biases[r] = dzr;
                for (w, x) in lg.weights[r * fan_in..(r + 1) * fan_in].iter_mut().zip(input) {
                    *w = dzr * x;
                }
            }
            if li > 0 {
                let mut dx = vec![0.0; fan_in];
                for (r, &dzr) in dz.iter().enumerate() {
                    for (acc, w) in dx.iter_mut().zip(layer.weights.row(r)) {
                        *acc += dzr * w;
                    }
                }
                upstream = dx;
            }
        }
        Ok(grads)
    }

    /// `[w_0, b_0, w_1, b_1, ...]` as mutable slices.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    pub fn parameter_lengths(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice().len(), l.biases.len()])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_encoder(d: usize) -> MlpEncoder {
        let mut w = Matrix::zeros(d, d);
        for i in 0..d {
            w.row_mut(i)[i] = 1.0;
        }
        MlpEncoder::from_layers(vec![Layer::new(w, vec![0.0; d], Activation::Linear).unwrap()])
            .unwrap()
    }

    #[test]
    fn identity_network_passes_unit_input_through() {
        let enc = identity_encoder(3);
        let x = numeric::l2_normalize(&[1.0, -2.0, 0.5]).unwrap();
        let v = enc.embed(&x).unwrap();
        for (a, b) in v.iter().zip(&x) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dead_relu_leaves_bias_path() {
        let hidden = Layer::new(
            Matrix::from_rows(&[vec![-1.0, -1.0], vec![-2.0, 0.0]]).unwrap(),
            vec![0.0, 0.0],
            Activation::Relu,
        )
        .unwrap();
        let out = Layer::new(
            Matrix::from_rows(&[vec![5.0, 1.0], vec![1.0, 3.0]]).unwrap(),
            vec![3.0, 4.0],
            Activation::Linear,
        )
        .unwrap();
        let enc = MlpEncoder::from_layers(vec![hidden, out]).unwrap();
        let v = enc.embed(&[1.0, 0.5]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn output_is_unit_norm() {
        let mut rng = SeededRng::new(4);
        let enc = MlpEncoder::new(10, &[16, 8], 5, &mut rng).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
            let v = enc.embed(&x).unwrap();
            assert!((numeric::norm(&v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_is_rejected() {
        let w = Matrix::zeros(2, 2);
        let enc = MlpEncoder::from_layers(vec![Layer::new(w, vec![0.0; 2], Activation::Linear).unwrap()])
            .unwrap();
        assert!(matches!(enc.forward(&[1.0, 1.0]), Err(SuvrError::NormTooSmall { .. })));
        assert!(matches!(enc.forward(&[1.0]), Err(SuvrError::DimensionMismatch { .. })));
    }

    #[test]
    fn layers_must_chain() {
        let a = Layer::new(Matrix::zeros(3, 2), vec![0.0; 3], Activation::Relu).unwrap();
        let b = Layer::new(Matrix::zeros(2, 4), vec![0.0; 2], Activation::Linear).unwrap();
        assert!(matches!(
            MlpEncoder::from_layers(vec![a, b]),
            Err(SuvrError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn backward_zero_and_radial_upstream() {
        let mut rng = SeededRng::new(8);
        let enc = MlpEncoder::new(6, &[7], 4, &mut rng).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let cache = enc.forward(&x).unwrap();
        let zero = enc.backward(&cache, &[0.0; 4]).unwrap();
        assert!(zero.slices().iter().all(|s| s.iter().all(|&g| g == 0.0)));

        let radial: Vec<f64> = cache.embedding().iter().map(|v| 3.0 * v).collect();
        let g = enc.backward(&cache, &radial).unwrap();
        assert!(g.slices().iter().all(|s| s.iter().all(|&g| g.abs() < 1e-12)));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let mut rng = SeededRng::new(1);
        let a = MlpEncoder::new(4, &[5], 3, &mut rng).unwrap();
        let b = MlpEncoder::new(4, &[6], 3, &mut rng).unwrap();
        let cache = a.forward(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            b.backward(&cache, &[1.0, 0.0, 0.0]),
            Err(SuvrError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn grads_line_up_with_parameters() {
        let mut rng = SeededRng::new(2);
        let mut enc = MlpEncoder::new(4, &[5], 3, &mut rng).unwrap();
        let g = EncoderGrads::zeros_like(&enc);
        let lens: Vec<usize> = g.slices().iter().map(|s| s.len()).collect();
        assert_eq!(lens, enc.parameter_lengths());
        assert_eq!(enc.parameters_mut().len(), 4);
    }
}
