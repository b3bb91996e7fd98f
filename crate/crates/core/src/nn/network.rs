use super::{backward, forward, forward_into, seeded_init, LayerKind, LayerParams, NnError, Scalar, Shape, Tensor4};

/// Activations recorded by [`Network::forward_trace`]: the input followed by
/// the output of every layer.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub activations: Vec<Tensor4<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &Tensor4<T> {
        self.activations.last().expect("trace holds at least the input")
    }
}

/// Two activation buffers reused across calls to
/// [`Network::forward_with`], so repeated inference does not allocate.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    bufs: [Tensor4<T>; 2],
}

impl<T: Scalar> Default for Workspace<T> {
    fn default() -> Self {
        let empty = || Tensor4::zeros(0, Shape::new(0, 0, 0));
        Self { bufs: [empty(), empty()] }
    }
}

/// A shape-checked sequential stack of layers with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<LayerKind>,
    params: Vec<LayerParams<T>>,
    input: Shape,
    shapes: Vec<Shape>,
}

impl<T: Scalar> Network<T> {
    /// Output shape of every layer, failing at the first layer whose input
    /// does not fit.
    pub fn infer_shapes(layers: &[LayerKind], input: Shape) -> Result<Vec<Shape>, NnError> {
        let mut cur = input;
        layers
            .iter()
            .enumerate()
            .map(|(i, k)| {
                cur = k.output_shape(cur).map_err(|e| e.at_layer(i))?;
                Ok(cur)
            })
            .collect()
    }

    pub fn new(
        layers: Vec<LayerKind>,
        input: Shape,
        params: Vec<LayerParams<T>>,
    ) -> Result<Self, NnError> {
        let shapes = Self::infer_shapes(&layers, input)?;
        if params.len() != layers.len() {
            return Err(NnError::ParamCount {
                expected: layers.len(),
                actual: params.len(),
            });
        }
        for (k, p) in layers.iter().zip(&params) {
            if p.weights.len() != k.weight_len() || p.bias.len() != k.bias_len() {
                return Err(NnError::ParamCount {
                    expected: k.weight_len() + k.bias_len(),
                    actual: p.len(),
                });
            }
        }
        Ok(Self {
            layers,
            params,
            input,
            shapes,
        })
    }

    pub fn seeded(layers: Vec<LayerKind>, input: Shape, seed: u64) -> Result<Self, NnError> {
        let params = seeded_init(&layers, seed);
        Self::new(layers, input, params)
    }

    /// Builds a network from a flat `[w0, b0, w1, b1, ...]` buffer.
    pub fn from_flat(layers: Vec<LayerKind>, input: Shape, flat: &[T]) -> Result<Self, NnError> {
        let params: Vec<LayerParams<T>> = layers.iter().map(LayerParams::zeros).collect();
        let mut net = Self::new(layers, input, params)?;
        net.set_flat(flat)?;
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    pub fn params(&self) -> &[LayerParams<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.params
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.shapes.last().copied().unwrap_or(self.input)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(LayerParams::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(LayerParams::zero_grad);
    }

    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for p in &self.params {
            out.extend_from_slice(&p.weights);
            out.extend_from_slice(&p.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<(), NnError> {
        if flat.len() != self.param_count() {
            return Err(NnError::ParamCount {
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        let mut rest = flat;
        for p in &mut self.params {
            let (w, tail) = rest.split_at(p.weights.len());
            p.weights.copy_from_slice(w);
            let (b, tail) = tail.split_at(p.bias.len());
            p.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
        x.expect_shape(self.input)?;
        let mut cur: Option<Tensor4<T>> = None;
        for (i, (k, p)) in self.layers.iter().zip(&self.params).enumerate() {
            let next = forward(k, p, cur.as_ref().unwrap_or(x)).map_err(|e| e.at_layer(i))?;
            cur = Some(next);
        }
        Ok(cur.unwrap_or_else(|| x.clone()))
    }

    /// [`Network::forward`] through reusable buffers; the result borrows
    /// the workspace.
    pub fn forward_with<'w>(&self, x: &Tensor4<T>, ws: &'w mut Workspace<T>) -> Result<&'w Tensor4<T>, NnError> {
        x.expect_shape(self.input)?;
        let [a, b] = &mut ws.bufs;
        if self.layers.is_empty() {
            a.reset(x.batch(), x.shape());
            a.data_mut().copy_from_slice(x.data());
            return Ok(a);
        }
        for (i, (k, p)) in self.layers.iter().zip(&self.params).enumerate() {
            let r = match i {
                0 => forward_into(k, p, x, a),
                _ if i % 2 == 1 => forward_into(k, p, a, b),
                _ => forward_into(k, p, b, a),
            };
            r.map_err(|e| e.at_layer(i))?;
        }
        Ok(if self.layers.len() % 2 == 1 { a } else { b })
    }

    pub fn forward_trace(&self, x: &Tensor4<T>) -> Result<Trace<T>, NnError> {
        x.expect_shape(self.input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for (i, (k, p)) in self.layers.iter().zip(&self.params).enumerate() {
            let next = forward(k, p, activations.last().unwrap()).map_err(|e| e.at_layer(i))?;
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    /// Back-propagates through the whole stack, accumulating parameter
    /// gradients, and returns the gradient with respect to the input.
    pub fn backward(&mut self, trace: &Trace<T>, grad_out: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
        let mut grad = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            grad = backward(&self.layers[i], &mut self.params[i], &trace.activations[i], &grad)
                .map_err(|e| e.at_layer(i))?;
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    #[test]
    fn shape_errors_name_the_layer() {
        let layers = vec![
            LayerKind::PointwiseConv2d { in_ch: 1, out_ch: 4 },
            LayerKind::Activation(Activation::Relu),
            LayerKind::DepthwiseConv2d { ch: 3, stride: 1, pad: 1 },
        ];
        let err = Network::<f32>::infer_shapes(&layers, Shape::new(1, 8, 8)).unwrap_err();
        assert!(matches!(err, NnError::Shape { layer: Some(2), .. }), "{err}");
        assert!(err.to_string().contains("layer 2"));
    }

    #[test]
    fn flat_roundtrip() {
        let layers = vec![
            LayerKind::Conv2d { in_ch: 1, out_ch: 2, stride: 2, pad: 1 },
            LayerKind::Flatten,
            LayerKind::Dense { in_dim: 8, out_dim: 3 },
        ];
        let net = Network::<f32>::seeded(layers.clone(), Shape::new(1, 4, 4), 5).unwrap();
        let flat = net.flat();
        assert_eq!(flat.len(), 2 * 9 + 2 + 24 + 3);
        let back = Network::from_flat(layers, Shape::new(1, 4, 4), &flat).unwrap();
        assert_eq!(back.params(), net.params());
        let mut short = back.clone();
        assert!(short.set_flat(&flat[1..]).is_err());
    }

    #[test]
    fn workspace_forward_matches_allocating_forward() {
        let base = [
            LayerKind::DepthwiseConv2d { ch: 1, stride: 2, pad: 1 },
            LayerKind::PointwiseConv2d { in_ch: 1, out_ch: 3 },
            LayerKind::Activation(Activation::Relu),
            LayerKind::Replicator { factor: 2 },
        ];
        let x = Tensor4::from_vec((0..2 * 64).map(|i| (i as f32 * 0.37).sin()).collect(), 2, Shape::new(1, 8, 8)).unwrap();
        let mut ws = Workspace::default();
        for n in 0..=base.len() {
            let net = Network::<f32>::seeded(base[..n].to_vec(), Shape::new(1, 8, 8), 2).unwrap();
            let want = net.forward(&x).unwrap();
            for _ in 0..2 {
                assert_eq!(net.forward_with(&x, &mut ws).unwrap(), &want, "{n} layers");
            }
        }
    }
}
