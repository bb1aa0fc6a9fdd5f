//! Layer stack: specification, initialization, forward pass, and exact
//! reverse-mode gradients for parameters and inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NeuralError;

const LEAKY_SLOPE: f64 = 0.01;

/// One layer descriptor. Shapes are inferred when a network is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv2d { out_channels: usize, kernel: usize, stride: usize, padding: usize },
    Dense { out_dim: usize },
    LeakyRelu,
    Relu,
    Dropout { p: f64 },
    Flatten,
}

/// An ordered layer stack with a fixed input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Self {
        NetworkSpec { input_shape, layers }
    }

    /// The wcd surrogate: three 3x3 convolutions (16/32/32 channels) with
    /// leaky activations, then dense 32 -> 16 -> 1 with dropout and a ReLU
    /// head so predictions stay non-negative.
    pub fn wcd_predictor(channels: usize, n: usize) -> Self {
        NetworkSpec::new(
            vec![channels, n, n],
            vec![
                LayerSpec::Conv2d { out_channels: 16, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::LeakyRelu,
                LayerSpec::Conv2d { out_channels: 32, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::LeakyRelu,
                LayerSpec::Conv2d { out_channels: 32, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::LeakyRelu,
                LayerSpec::Flatten,
                LayerSpec::Dense { out_dim: 32 },
                LayerSpec::LeakyRelu,
                LayerSpec::Dropout { p: 0.2 },
                LayerSpec::Dense { out_dim: 16 },
                LayerSpec::LeakyRelu,
                LayerSpec::Dropout { p: 0.2 },
                LayerSpec::Dense { out_dim: 1 },
                LayerSpec::Relu,
            ],
        )
    }

    /// The behavior-cloning policy head: a 4-layer perceptron over the
    /// flattened encoding, ending in 4 action logits.
    pub fn policy_mlp(channels: usize, n: usize) -> Self {
        NetworkSpec::new(
            vec![channels, n, n],
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { out_dim: 128 },
                LayerSpec::LeakyRelu,
                LayerSpec::Dense { out_dim: 64 },
                LayerSpec::LeakyRelu,
                LayerSpec::Dense { out_dim: 32 },
                LayerSpec::LeakyRelu,
                LayerSpec::Dense { out_dim: 4 },
            ],
        )
    }

    /// Walks the stack checking shape compatibility; returns the output shape.
    pub fn output_shape(&self) -> Result<Vec<usize>, NeuralError> {
        let mut shape = self.input_shape.clone();
        for layer in &self.layers {
            shape = layer_output_shape(layer, &shape)?;
        }
        Ok(shape)
    }
}

fn layer_output_shape(layer: &LayerSpec, input: &[usize]) -> Result<Vec<usize>, NeuralError> {
    match layer {
        LayerSpec::Conv2d { out_channels, kernel, stride, padding } => {
            if input.len() != 3 {
                return Err(NeuralError::Shape(format!(
                    "conv needs [C, H, W] input, got {input:?}"
                )));
            }
            let (h, w) = (input[1], input[2]);
            if h + 2 * padding < *kernel || w + 2 * padding < *kernel || *stride == 0 {
                return Err(NeuralError::Shape("conv kernel exceeds padded input".into()));
            }
            let oh = (h + 2 * padding - kernel) / stride + 1;
            let ow = (w + 2 * padding - kernel) / stride + 1;
            Ok(vec![*out_channels, oh, ow])
        }
        LayerSpec::Dense { out_dim } => {
            if input.len() != 1 {
                return Err(NeuralError::Shape(format!(
                    "dense needs a flat input, got {input:?}"
                )));
            }
            Ok(vec![*out_dim])
        }
        LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        LayerSpec::LeakyRelu | LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
    }
}

/// A layer with its resolved input shape and, where applicable, parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum LayerState {
    Conv2d {
        weight: Tensor, // [O, C, K, K]
        bias: Tensor,   // [O]
        stride: usize,
        padding: usize,
        in_shape: [usize; 3],
        out_shape: [usize; 3],
    },
    Dense {
        weight: Tensor, // [out, in]
        bias: Tensor,   // [out]
    },
    LeakyRelu,
    Relu,
    Dropout {
        p: f64,
    },
    Flatten,
}

/// A built network: spec plus initialized parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<LayerState>,
    seed: u64,
}

/// Per-layer cache captured during a forward pass, consumed by backward.
pub struct ForwardTape {
    inputs: Vec<Tensor>,
    dropout_masks: Vec<Option<Vec<f64>>>,
    pub output: Tensor,
}

/// Parameter gradients in the same order as [`Network::param_slices`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients(net.param_slices().iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.0 {
            for x in g {
                *x *= factor;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
    }
}

impl Network {
    /// Builds the network with fan-in-scaled uniform weights drawn from a
    /// seeded generator; biases start at zero.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self, NeuralError> {
        spec.output_shape()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = spec.input_shape.clone();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            let out_shape = layer_output_shape(layer, &shape)?;
            let state = match layer {
                LayerSpec::Conv2d { out_channels, kernel, stride, padding } => {
                    let in_channels = shape[0];
                    let fan_in = in_channels * kernel * kernel;
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    let weight = random_tensor(
                        vec![*out_channels, in_channels, *kernel, *kernel],
                        bound,
                        &mut rng,
                    );
                    LayerState::Conv2d {
                        weight,
                        bias: Tensor::zeros(vec![*out_channels]),
                        stride: *stride,
                        padding: *padding,
                        in_shape: [shape[0], shape[1], shape[2]],
                        out_shape: [out_shape[0], out_shape[1], out_shape[2]],
                    }
                }
                LayerSpec::Dense { out_dim } => {
                    let in_dim = shape[0];
                    let bound = 1.0 / (in_dim as f64).sqrt();
                    let weight = random_tensor(vec![*out_dim, in_dim], bound, &mut rng);
                    LayerState::Dense { weight, bias: Tensor::zeros(vec![*out_dim]) }
                }
                LayerSpec::LeakyRelu => LayerState::LeakyRelu,
                LayerSpec::Relu => LayerState::Relu,
                LayerSpec::Dropout { p } => {
                    if !(0.0..1.0).contains(p) {
                        return Err(NeuralError::Shape(format!("dropout p {p} out of range")));
                    }
                    LayerState::Dropout { p: *p }
                }
                LayerSpec::Flatten => LayerState::Flatten,
            };
            layers.push(state);
            shape = out_shape;
        }
        Ok(Network { spec, layers, seed })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.spec.output_shape().expect("validated at init")
    }

    /// Flat views of every parameter tensor (weights then bias per layer).
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerState::Conv2d { weight, bias, .. }
                | LayerState::Dense { weight, bias } => {
                    out.push(weight.data());
                    out.push(bias.data());
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                LayerState::Conv2d { weight, bias, .. }
                | LayerState::Dense { weight, bias } => {
                    out.push(weight.data_mut());
                    out.push(bias.data_mut());
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|p| p.len()).sum()
    }

    pub fn snapshot_params(&self) -> Vec<Vec<f64>> {
        self.param_slices().iter().map(|p| p.to_vec()).collect()
    }

    pub fn restore_params(&mut self, snapshot: &[Vec<f64>]) {
        for (param, saved) in self.param_slices_mut().into_iter().zip(snapshot) {
            param.copy_from_slice(saved);
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NeuralError> {
        if x.shape() != self.spec.input_shape.as_slice() {
            return Err(NeuralError::Shape(format!(
                "expected input shape {:?}, got {:?}",
                self.spec.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Inference-mode forward pass: deterministic, dropout disabled.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NeuralError> {
        Ok(self.forward_tape(x, None)?.output)
    }

    /// Scalar convenience for single-output networks.
    pub fn forward_scalar(&self, x: &Tensor) -> Result<f64, NeuralError> {
        let y = self.forward(x)?;
        if y.numel() != 1 {
            return Err(NeuralError::Shape(format!(
                "expected scalar output, got shape {:?}",
                y.shape()
            )));
        }
        Ok(y.data()[0])
    }

    /// Forward pass recording everything backward needs. Dropout is active
    /// only when a generator is supplied.
    pub fn forward_tape(
        &self,
        x: &Tensor,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardTape, NeuralError> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            inputs.push(cur.clone());
            let mut mask = None;
            cur = match layer {
                LayerState::Conv2d { weight, bias, stride, padding, in_shape, out_shape } => {
                    conv_forward(&cur, weight, bias, *stride, *padding, in_shape, out_shape)
                }
                LayerState::Dense { weight, bias } => dense_forward(&cur, weight, bias),
                LayerState::LeakyRelu => map_tensor(&cur, |v| {
                    if v > 0.0 {
                        v
                    } else {
                        LEAKY_SLOPE * v
                    }
                }),
                LayerState::Relu => map_tensor(&cur, |v| v.max(0.0)),
                LayerState::Dropout { p } => match dropout_rng.as_deref_mut() {
                    Some(rng) => {
                        let keep = 1.0 - p;
                        let m: Vec<f64> = (0..cur.numel())
                            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        let mut out = cur.clone();
                        for (o, &mi) in out.data_mut().iter_mut().zip(&m) {
                            *o *= mi;
                        }
                        mask = Some(m);
                        out
                    }
                    None => cur.clone(),
                },
                LayerState::Flatten => cur.reshaped(vec![cur.numel()])?,
            };
            masks.push(mask);
        }
        Ok(ForwardTape { inputs, dropout_masks: masks, output: cur })
    }

    /// Reverse pass from `output_grad`, producing parameter gradients and the
    /// gradient with respect to the network input.
    pub fn backward(
        &self,
        tape: &ForwardTape,
        output_grad: &[f64],
    ) -> Result<(Gradients, Tensor), NeuralError> {
        if output_grad.len() != tape.output.numel() {
            return Err(NeuralError::Shape("output gradient length mismatch".into()));
        }
        let mut grads: Vec<Vec<f64>> = Vec::new();
        let mut upstream = output_grad.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.inputs[idx];
            match layer {
                LayerState::Conv2d { weight, stride, padding, in_shape, out_shape, .. } => {
                    let (dw, db, dx) =
                        conv_backward(input, weight, &upstream, *stride, *padding, in_shape, out_shape);
                    grads.push(db);
                    grads.push(dw);
                    upstream = dx;
                }
                LayerState::Dense { weight, .. } => {
                    let (dw, db, dx) = dense_backward(input, weight, &upstream);
                    grads.push(db);
                    grads.push(dw);
                    upstream = dx;
                }
                LayerState::LeakyRelu => {
                    for (g, &v) in upstream.iter_mut().zip(input.data()) {
                        if v <= 0.0 {
                            *g *= LEAKY_SLOPE;
                        }
                    }
                }
                LayerState::Relu => {
                    for (g, &v) in upstream.iter_mut().zip(input.data()) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
                LayerState::Dropout { .. } => {
                    if let Some(mask) = &tape.dropout_masks[idx] {
                        for (g, &m) in upstream.iter_mut().zip(mask) {
                            *g *= m;
                        }
                    }
                }
                LayerState::Flatten => {}
            }
        }
        grads.reverse();
        let input_grad = Tensor::new(self.spec.input_shape.clone(), upstream)?;
        Ok((Gradients(grads), input_grad))
    }

    /// Gradient of the scalar network output with respect to the input,
    /// dropout disabled. The returned tensor carries the values as data.
    pub fn input_gradient(&self, x: &Tensor) -> Result<Tensor, NeuralError> {
        let tape = self.forward_tape(x, None)?;
        if tape.output.numel() != 1 {
            return Err(NeuralError::Shape(format!(
                "input gradient needs a scalar output, got {:?}",
                tape.output.shape()
            )));
        }
        let (_, input_grad) = self.backward(&tape, &[1.0])?;
        Ok(input_grad)
    }
}

fn random_tensor(shape: Vec<usize>, bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("shape and data agree")
}

fn map_tensor(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let mut out = t.clone();
    for v in out.data_mut() {
        *v = f(*v);
    }
    out
}

fn pad_input(x: &[f64], c: usize, h: usize, w: usize, padding: usize) -> (Vec<f64>, usize, usize) {
    let (ph, pw) = (h + 2 * padding, w + 2 * padding);
    if padding == 0 {
        return (x.to_vec(), ph, pw);
    }
    let mut padded = vec![0.0; c * ph * pw];
    for ch in 0..c {
        for row in 0..h {
            let src = ch * h * w + row * w;
            let dst = ch * ph * pw + (row + padding) * pw + padding;
            padded[dst..dst + w].copy_from_slice(&x[src..src + w]);
        }
    }
    (padded, ph, pw)
}

/// Receptive fields as rows: `cols[pos]` holds the `C*K*K` inputs feeding
/// output position `pos`, so forward is a plain dot product per output and
/// both backward products run over contiguous slices.
fn im2col(
    padded: &[f64],
    c: usize,
    pw: usize,
    k: usize,
    stride: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let field = c * k * k;
    let ph = padded.len() / (c * pw);
    debug_assert_eq!(padded.len(), c * ph * pw);
    let mut cols = vec![0.0; oh * ow * field];
    for oy in 0..oh {
        for ox in 0..ow {
            let dst_base = (oy * ow + ox) * field;
            for ic in 0..c {
                for ky in 0..k {
                    let src = ic * ph * pw + (oy * stride + ky) * pw + ox * stride;
                    let dst = dst_base + ic * k * k + ky * k;
                    cols[dst..dst + k].copy_from_slice(&padded[src..src + k]);
                }
            }
        }
    }
    cols
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (xi, yi) in x.iter().zip(y) {
        *yi += alpha * xi;
    }
}

fn conv_forward(
    x: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    in_shape: &[usize; 3],
    out_shape: &[usize; 3],
) -> Tensor {
    let [c, h, w] = *in_shape;
    let [o, oh, ow] = *out_shape;
    let k = weight.shape()[2];
    let (padded, _ph, pw) = pad_input(x.data(), c, h, w, padding);
    let cols = im2col(&padded, c, pw, k, stride, oh, ow);
    let field = c * k * k;
    let wd = weight.data();
    let bd = bias.data();
    let mut out = vec![0.0; o * oh * ow];
    for oc in 0..o {
        let w_row = &wd[oc * field..(oc + 1) * field];
        let out_plane = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
        for (pos, slot) in out_plane.iter_mut().enumerate() {
            *slot = bd[oc] + dot(w_row, &cols[pos * field..(pos + 1) * field]);
        }
    }
    Tensor::new(vec![o, oh, ow], out).expect("conv output shape")
}

fn conv_backward(
    x: &Tensor,
    weight: &Tensor,
    upstream: &[f64],
    stride: usize,
    padding: usize,
    in_shape: &[usize; 3],
    out_shape: &[usize; 3],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let [c, h, w] = *in_shape;
    let [o, oh, ow] = *out_shape;
    let k = weight.shape()[2];
    let (padded, ph, pw) = pad_input(x.data(), c, h, w, padding);
    let cols = im2col(&padded, c, pw, k, stride, oh, ow);
    let field = c * k * k;
    let positions = oh * ow;
    let wd = weight.data();

    let mut dw = vec![0.0; wd.len()];
    let mut db = vec![0.0; o];
    let mut dcols = vec![0.0; cols.len()];
    for oc in 0..o {
        let g_plane = &upstream[oc * positions..(oc + 1) * positions];
        let w_row = &wd[oc * field..(oc + 1) * field];
        let dw_row = &mut dw[oc * field..(oc + 1) * field];
        for (pos, &g) in g_plane.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            db[oc] += g;
            let col = &cols[pos * field..(pos + 1) * field];
            axpy(g, col, dw_row);
            axpy(g, w_row, &mut dcols[pos * field..(pos + 1) * field]);
        }
    }

    // col2im: scatter the receptive-field gradients back onto the input.
    let mut dpad = vec![0.0; padded.len()];
    for oy in 0..oh {
        for ox in 0..ow {
            let src_base = (oy * ow + ox) * field;
            for ic in 0..c {
                for ky in 0..k {
                    let dst = ic * ph * pw + (oy * stride + ky) * pw + ox * stride;
                    let src = src_base + ic * k * k + ky * k;
                    axpy(1.0, &dcols[src..src + k], &mut dpad[dst..dst + k]);
                }
            }
        }
    }

    let mut dx = vec![0.0; c * h * w];
    for ic in 0..c {
        for row in 0..h {
            let src = ic * ph * pw + (row + padding) * pw + padding;
            let dst = ic * h * w + row * w;
            dx[dst..dst + w].copy_from_slice(&dpad[src..src + w]);
        }
    }
    (dw, db, dx)
}

fn dense_forward(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let out_dim = weight.shape()[0];
    let in_dim = weight.shape()[1];
    let xd = x.data();
    let wd = weight.data();
    let mut out = bias.data().to_vec();
    for (row, o) in out.iter_mut().enumerate().take(out_dim) {
        let wrow = &wd[row * in_dim..(row + 1) * in_dim];
        let mut acc = 0.0;
        for (wv, xv) in wrow.iter().zip(xd) {
            acc += wv * xv;
        }
        *o += acc;
    }
    Tensor::new(vec![out_dim], out).expect("dense output shape")
}

fn dense_backward(x: &Tensor, weight: &Tensor, upstream: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let out_dim = weight.shape()[0];
    let in_dim = weight.shape()[1];
    let xd = x.data();
    let wd = weight.data();
    let mut dw = vec![0.0; wd.len()];
    let mut dx = vec![0.0; in_dim];
    for row in 0..out_dim {
        let g = upstream[row];
        if g == 0.0 {
            continue;
        }
        let dwrow = &mut dw[row * in_dim..(row + 1) * in_dim];
        let wrow = &wd[row * in_dim..(row + 1) * in_dim];
        for i in 0..in_dim {
            dwrow[i] += g * xd[i];
            dx[i] += g * wrow[i];
        }
    }
    (dw, upstream.to_vec(), dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dense_forward() {
        let spec = NetworkSpec::new(vec![2], vec![LayerSpec::Dense { out_dim: 2 }]);
        let mut net = Network::init(spec, 0).unwrap();
        {
            let mut params = net.param_slices_mut();
            params[0].copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
            params[1].copy_from_slice(&[0.0, 0.0]);
        }
        let x = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        assert_eq!(net.forward(&x).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn relu_head_clamps_negative() {
        let spec = NetworkSpec::new(
            vec![1],
            vec![LayerSpec::Dense { out_dim: 1 }, LayerSpec::Relu],
        );
        let mut net = Network::init(spec, 0).unwrap();
        {
            let mut params = net.param_slices_mut();
            params[0].copy_from_slice(&[1.0]);
            params[1].copy_from_slice(&[0.0]);
        }
        let y = net.forward_scalar(&Tensor::scalar(-5.0)).unwrap();
        assert_eq!(y, 0.0);
    }

    #[test]
    fn forward_deterministic_across_runs() {
        let spec = NetworkSpec::wcd_predictor(6, 6);
        let net_a = Network::init(spec.clone(), 99).unwrap();
        let net_b = Network::init(spec, 99).unwrap();
        let x = Tensor::new(vec![6, 6, 6], (0..216).map(|i| (i % 7) as f64 / 7.0).collect())
            .unwrap();
        let ya = net_a.forward(&x).unwrap();
        let yb = net_b.forward(&x).unwrap();
        assert_eq!(ya.data(), yb.data());
    }

    #[test]
    fn forward_rejects_bad_shape() {
        let net = Network::init(NetworkSpec::wcd_predictor(6, 6), 0).unwrap();
        let x = Tensor::zeros(vec![6, 5, 6]);
        assert!(matches!(net.forward(&x), Err(NeuralError::Shape(_))));
    }

    #[test]
    fn zero_network_has_zero_input_gradient() {
        let spec = NetworkSpec::new(
            vec![4],
            vec![LayerSpec::Dense { out_dim: 1 }],
        );
        let mut net = Network::init(spec, 0).unwrap();
        for params in net.param_slices_mut() {
            params.fill(0.0);
        }
        let g = net.input_gradient(&Tensor::new(vec![4], vec![1.0; 4]).unwrap()).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn final_layer_scaling_scales_input_gradient() {
        let spec = NetworkSpec::new(
            vec![3],
            vec![
                LayerSpec::Dense { out_dim: 4 },
                LayerSpec::LeakyRelu,
                LayerSpec::Dense { out_dim: 1 },
            ],
        );
        let net = Network::init(spec, 5).unwrap();
        let x = Tensor::new(vec![3], vec![0.3, -0.2, 0.9]).unwrap();
        let g1 = net.input_gradient(&x).unwrap();

        let mut scaled = net.clone();
        {
            let mut params = scaled.param_slices_mut();
            let last_weight = params.len() - 2;
            for v in params[last_weight].iter_mut() {
                *v *= 3.0;
            }
            for v in params[last_weight + 1].iter_mut() {
                *v *= 3.0;
            }
        }
        let g3 = scaled.input_gradient(&x).unwrap();
        for (a, b) in g1.data().iter().zip(g3.data()) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }
}
