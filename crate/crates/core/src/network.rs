//! Feed-forward network model: dense, 2-D convolution (cross-correlation),
//! and flatten layers, plus the `.nnj` JSON serialization.
//!
//! Conventions: dense layers compute `phi(W x + b)` with weight rows as
//! neurons; conv layers cross-correlate (no kernel flip) with configurable
//! stride and `valid` or explicit zero padding; tensors are row-major; all
//! accumulation is f64.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activations::ActivationKind;
use crate::error::{invalid, Error, Result};
use crate::tensor::{Kernels, Matrix, Tensor};

// --- layers -----------------------------------------------------------------

/// Zero padding applied on both sides of each spatial axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding.
    Valid,
    /// `(pad_h, pad_w)` zeros on each border.
    Explicit(usize, usize),
}

impl Padding {
    pub fn amounts(&self) -> (usize, usize) {
        match self {
            Padding::Valid => (0, 0),
            Padding::Explicit(ph, pw) => (*ph, *pw),
        }
    }
}

/// Fully connected layer: `y = phi(W x + b)`, one weight row per neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: ActivationKind,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: ActivationKind) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::ShapeMismatch(format!(
                "dense bias has {} entries for {} neurons",
                bias.len(),
                weights.rows()
            )));
        }
        activation.validate()?;
        check_finite("dense weights", weights.data())?;
        check_finite("dense bias", &bias)?;
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn out_features(&self) -> usize {
        self.weights.rows()
    }

    pub fn in_features(&self) -> usize {
        self.weights.cols()
    }
}

/// 2-D convolution layer (cross-correlation).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kernels: Kernels,
    pub bias: Vec<f64>,
    pub activation: ActivationKind,
    pub stride: (usize, usize),
    pub padding: Padding,
}

impl ConvLayer {
    pub fn new(
        kernels: Kernels,
        bias: Vec<f64>,
        activation: ActivationKind,
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Self> {
        if bias.len() != kernels.out_channels() {
            return Err(Error::ShapeMismatch(format!(
                "conv bias has {} entries for {} output channels",
                bias.len(),
                kernels.out_channels()
            )));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(invalid("stride", "stride components must be at least 1"));
        }
        activation.validate()?;
        check_finite("conv kernels", kernels.data())?;
        check_finite("conv bias", &bias)?;
        Ok(ConvLayer {
            kernels,
            bias,
            activation,
            stride,
            padding,
        })
    }

    /// Output spatial size for an input of `h x w`.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (ph, pw) = self.padding.amounts();
        let (kh, kw) = self.kernels.spatial();
        let (eh, ew) = (h + 2 * ph, w + 2 * pw);
        if eh < kh || ew < kw {
            return Err(Error::ShapeMismatch(format!(
                "conv kernel {kh}x{kw} exceeds padded input {eh}x{ew}"
            )));
        }
        Ok(((eh - kh) / self.stride.0 + 1, (ew - kw) / self.stride.1 + 1))
    }
}

/// One network layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Conv2d(ConvLayer),
    Flatten,
}

impl Layer {
    pub fn type_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::Flatten => "flatten",
        }
    }

    pub fn as_dense(&self, index: usize) -> Result<&DenseLayer> {
        match self {
            Layer::Dense(d) => Ok(d),
            _ => Err(Error::LayerTypeMismatch {
                index,
                expected: "dense",
            }),
        }
    }

    pub fn as_conv(&self, index: usize) -> Result<&ConvLayer> {
        match self {
            Layer::Conv2d(c) => Ok(c),
            _ => Err(Error::LayerTypeMismatch {
                index,
                expected: "conv2d",
            }),
        }
    }
}

fn check_finite(what: &'static str, data: &[f64]) -> Result<()> {
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(invalid(
            "weights",
            format!("{what}: non-finite entry at offset {pos}"),
        ));
    }
    Ok(())
}

// --- network ----------------------------------------------------------------

/// A feed-forward stack of layers with a declared input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_shape: Vec<usize>,
    /// Optional per-layer input-norm bounds: entry `i` bounds the Euclidean
    /// norm of the input reaching layer `i`.
    per_layer_beta: Option<Vec<f64>>,
}

impl Network {
    pub fn new(
        layers: Vec<Layer>,
        input_shape: Vec<usize>,
        per_layer_beta: Option<Vec<f64>>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("layers", "need at least one layer"));
        }
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "invalid input shape {input_shape:?}"
            )));
        }
        if let Some(betas) = &per_layer_beta {
            if betas.len() != layers.len() {
                return Err(invalid(
                    "beta",
                    format!("{} entries for {} layers", betas.len(), layers.len()),
                ));
            }
            if let Some(b) = betas.iter().find(|b| !b.is_finite() || **b <= 0.0) {
                return Err(invalid(
                    "beta",
                    format!("entries must be positive and finite, got {b}"),
                ));
            }
        }
        let net = Network {
            layers,
            input_shape,
            per_layer_beta,
        };
        net.shape_chain()?; // every layer must be reachable with consistent shapes
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> Result<&Layer> {
        self.layers.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.layers.len(),
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn per_layer_beta(&self) -> Option<&[f64]> {
        self.per_layer_beta.as_deref()
    }

    /// Replaces the stored per-layer beta list (validated).
    pub fn with_per_layer_beta(mut self, betas: Option<Vec<f64>>) -> Result<Self> {
        self.per_layer_beta = None;
        Network::new(self.layers, self.input_shape, betas)
    }

    /// Input shape of every layer plus the final output shape
    /// (`len = num_layers + 1`).
    pub fn shape_chain(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = shapes.last().unwrap();
            let next = match layer {
                Layer::Dense(d) => {
                    if cur.len() != 1 || cur[0] != d.in_features() {
                        return Err(Error::ShapeMismatch(format!(
                            "layer {i}: dense expects [{}], got {cur:?}",
                            d.in_features()
                        )));
                    }
                    vec![d.out_features()]
                }
                Layer::Conv2d(c) => {
                    if cur.len() != 3 || cur[0] != c.kernels.in_channels() {
                        return Err(Error::ShapeMismatch(format!(
                            "layer {i}: conv2d expects [{}, h, w], got {cur:?}",
                            c.kernels.in_channels()
                        )));
                    }
                    let (oh, ow) = c.output_hw(cur[1], cur[2]).map_err(|e| e.at_layer(i))?;
                    vec![c.kernels.out_channels(), oh, ow]
                }
                Layer::Flatten => vec![cur.iter().product()],
            };
            shapes.push(next);
        }
        Ok(shapes)
    }

    /// Full forward pass.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for i in 0..self.layers.len() {
            cur = self.apply_layer(i, &cur, true)?;
        }
        Ok(cur)
    }

    /// Runs layers `0..layer` fully, then layer `layer` WITHOUT its
    /// activation, returning the pre-activation values.
    pub fn forward_linear_part(&self, layer: usize, x: &Tensor) -> Result<Tensor> {
        if layer >= self.layers.len() {
            return Err(Error::IndexOutOfRange {
                index: layer,
                len: self.layers.len(),
            });
        }
        let mut cur = x.clone();
        for i in 0..layer {
            cur = self.apply_layer(i, &cur, true)?;
        }
        self.apply_layer(layer, &cur, false)
    }

    fn apply_layer(&self, i: usize, x: &Tensor, activate: bool) -> Result<Tensor> {
        match &self.layers[i] {
            Layer::Dense(d) => dense_forward(d, x, activate).map_err(|e| e.at_layer(i)),
            Layer::Conv2d(c) => conv_forward(c, x, activate).map_err(|e| e.at_layer(i)),
            Layer::Flatten => Ok(x.flattened()),
        }
    }
}

fn dense_forward(layer: &DenseLayer, x: &Tensor, activate: bool) -> Result<Tensor> {
    if x.shape().len() != 1 || x.len() != layer.in_features() {
        return Err(Error::ShapeMismatch(format!(
            "dense expects [{}], got {:?}",
            layer.in_features(),
            x.shape()
        )));
    }
    let xv = x.data();
    let out: Vec<f64> = (0..layer.out_features())
        .map(|o| {
            let pre = layer
                .weights
                .row(o)
                .iter()
                .zip(xv)
                .map(|(w, v)| w * v)
                .sum::<f64>()
                + layer.bias[o];
            if activate {
                layer.activation.eval(pre)
            } else {
                pre
            }
        })
        .collect();
    Tensor::vector(out)
}

fn conv_forward(layer: &ConvLayer, x: &Tensor, activate: bool) -> Result<Tensor> {
    let k = &layer.kernels;
    if x.shape().len() != 3 || x.shape()[0] != k.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "conv2d expects [{}, h, w], got {:?}",
            k.in_channels(),
            x.shape()
        )));
    }
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let (oh, ow) = layer.output_hw(h, w)?;
    let (ph, pw) = layer.padding.amounts();
    let (sh, sw) = layer.stride;
    let (kh, kw) = k.spatial();
    let mut out = vec![0.0f64; k.out_channels() * oh * ow];
    for o in 0..k.out_channels() {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = layer.bias[o];
                for ic in 0..k.in_channels() {
                    for r in 0..kh {
                        // Input row for this kernel row; may fall in padding.
                        let y = (oy * sh + r) as isize - ph as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for c in 0..kw {
                            let xcol = (ox * sw + c) as isize - pw as isize;
                            if xcol < 0 || xcol >= w as isize {
                                continue;
                            }
                            acc += k.get(o, ic, r, c) * x.get3(ic, y as usize, xcol as usize);
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = if activate {
                    layer.activation.eval(acc)
                } else {
                    acc
                };
            }
        }
    }
    Tensor::new(vec![k.out_channels(), oh, ow], out)
}

// --- serialization (.nnj) ----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelFile {
    input_shape: Vec<usize>,
    layers: Vec<LayerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LayerFile {
    Dense {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        activation: ActivationKind,
    },
    Conv2d {
        weights: Vec<Vec<Vec<Vec<f64>>>>,
        bias: Vec<f64>,
        activation: ActivationKind,
        #[serde(default = "default_stride")]
        stride: [usize; 2],
        #[serde(default)]
        padding: PaddingFile,
    },
    Flatten {},
}

fn default_stride() -> [usize; 2] {
    [1, 1]
}

#[derive(Serialize, Deserialize, Default)]
#[serde(untagged)]
enum PaddingFile {
    #[default]
    #[serde(skip)]
    ValidDefault,
    Name(String),
    Pair([usize; 2]),
}

impl PaddingFile {
    fn to_padding(&self, layer: usize) -> Result<Padding> {
        match self {
            PaddingFile::ValidDefault => Ok(Padding::Valid),
            PaddingFile::Name(n) if n == "valid" => Ok(Padding::Valid),
            PaddingFile::Name(n) => Err(Error::Parse {
                context: format!("layers[{layer}].padding"),
                reason: format!("unknown padding `{n}` (expected \"valid\" or [ph, pw])"),
            }),
            PaddingFile::Pair([ph, pw]) => Ok(Padding::Explicit(*ph, *pw)),
        }
    }

    fn from_padding(p: Padding) -> Self {
        match p {
            Padding::Valid => PaddingFile::Name("valid".into()),
            Padding::Explicit(ph, pw) => PaddingFile::Pair([ph, pw]),
        }
    }
}

fn network_to_file(net: &Network) -> ModelFile {
    let layers = net
        .layers()
        .iter()
        .map(|layer| match layer {
            Layer::Dense(d) => LayerFile::Dense {
                weights: d.weights.to_rows(),
                bias: d.bias.clone(),
                activation: d.activation,
            },
            Layer::Conv2d(c) => LayerFile::Conv2d {
                weights: c.kernels.to_nested(),
                bias: c.bias.clone(),
                activation: c.activation,
                stride: [c.stride.0, c.stride.1],
                padding: PaddingFile::from_padding(c.padding),
            },
            Layer::Flatten => LayerFile::Flatten {},
        })
        .collect();
    ModelFile {
        input_shape: net.input_shape().to_vec(),
        layers,
        beta: net.per_layer_beta().map(|b| b.to_vec()),
    }
}

fn file_to_network(file: ModelFile) -> Result<Network> {
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, lf) in file.layers.into_iter().enumerate() {
        let ctx = |field: &str| format!("layers[{i}].{field}");
        let layer = match lf {
            LayerFile::Dense {
                weights,
                bias,
                activation,
            } => {
                let weights = Matrix::from_rows(weights).map_err(|e| Error::Parse {
                    context: ctx("weights"),
                    reason: e.to_string(),
                })?;
                Layer::Dense(DenseLayer::new(weights, bias, activation).map_err(|e| {
                    Error::Parse {
                        context: ctx("*"),
                        reason: e.to_string(),
                    }
                })?)
            }
            LayerFile::Conv2d {
                weights,
                bias,
                activation,
                stride,
                padding,
            } => {
                let kernels = Kernels::from_nested(weights).map_err(|e| Error::Parse {
                    context: ctx("weights"),
                    reason: e.to_string(),
                })?;
                let padding = padding.to_padding(i)?;
                Layer::Conv2d(
                    ConvLayer::new(kernels, bias, activation, (stride[0], stride[1]), padding)
                        .map_err(|e| Error::Parse {
                            context: ctx("*"),
                            reason: e.to_string(),
                        })?,
                )
            }
            LayerFile::Flatten {} => Layer::Flatten,
        };
        layers.push(layer);
    }
    Network::new(layers, file.input_shape, file.beta)
}

/// Serializes a network to the `.nnj` JSON model format. The encoding is
/// compact and deterministic, and floats round-trip losslessly at 64-bit
/// precision.
pub fn model_to_json(net: &Network) -> String {
    serde_json::to_string(&network_to_file(net)).expect("model serialization cannot fail")
}

/// Parses a `.nnj` JSON string.
pub fn model_from_json(json: &str) -> Result<Network> {
    let file: ModelFile = serde_json::from_str(json).map_err(|e| Error::Parse {
        context: format!("model json (line {}, column {})", e.line(), e.column()),
        reason: e.to_string(),
    })?;
    file_to_network(file)
}

/// Writes a network to disk as `.nnj`.
pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(net))?;
    Ok(())
}

/// Reads a `.nnj` model from disk.
pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    let text = fs::read_to_string(&path)?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, rng_from_seed};

    fn single_conv_net(kernels: Kernels, bias: Vec<f64>, input_shape: Vec<usize>) -> Network {
        let layer =
            ConvLayer::new(kernels, bias, ActivationKind::Relu, (1, 1), Padding::Valid).unwrap();
        Network::new(vec![Layer::Conv2d(layer)], input_shape, None).unwrap()
    }

    #[test]
    fn dense_forward_matches_hand_computation() {
        let w = Matrix::from_rows(vec![vec![1.0, -1.0], vec![0.5, 2.0]]).unwrap();
        let layer = DenseLayer::new(w, vec![0.25, -3.0], ActivationKind::Relu).unwrap();
        let net = Network::new(vec![Layer::Dense(layer)], vec![2], None).unwrap();
        let x = Tensor::vector(vec![3.0, 1.0]).unwrap();
        let y = net.forward(&x).unwrap();
        // pre = [3 - 1 + 0.25, 1.5 + 2 - 3] = [2.25, 0.5]
        assert_eq!(y.data(), &[2.25, 0.5]);
        let pre = net.forward_linear_part(0, &x).unwrap();
        assert_eq!(pre.data(), &[2.25, 0.5]);
    }

    #[test]
    fn conv_identity_kernel_scales_input() {
        let mut k = Kernels::zeros(1, 1, 1, 1);
        k.set(0, 0, 0, 0, 2.0);
        let net = single_conv_net(k, vec![0.0], vec![1, 2, 2]);
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, -1.0, 3.0, 0.0]).unwrap();
        let y = net.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert_eq!(y.data(), &[2.0, 0.0, 6.0, 0.0]); // relu clamps negatives
    }

    #[test]
    fn conv_is_cross_correlation_not_flipped() {
        let mut k = Kernels::zeros(1, 1, 1, 3);
        k.set(0, 0, 0, 0, 1.0);
        k.set(0, 0, 0, 1, 0.0);
        k.set(0, 0, 0, 2, -1.0);
        let net = single_conv_net(k, vec![0.0], vec![1, 1, 5]);
        let x = Tensor::new(vec![1, 1, 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let pre = net.forward_linear_part(0, &x).unwrap();
        assert_eq!(pre.shape(), &[1, 1, 3]);
        assert_eq!(pre.data(), &[-2.0, -2.0, -2.0]);
    }

    /// Independent naive oracle: correlate by gathering each full patch and
    /// accumulating in (channel, row, col) order, with explicit zero padding.
    fn naive_conv(layer: &ConvLayer, x: &Tensor) -> Vec<f64> {
        let k = &layer.kernels;
        let (h, w) = (x.shape()[1], x.shape()[2]);
        let (ph, pw) = layer.padding.amounts();
        let (kh, kw) = k.spatial();
        let (oh, ow) = layer.output_hw(h, w).unwrap();
        let fetch = |ic: usize, y: isize, xc: isize| -> f64 {
            if y < 0 || xc < 0 || y >= h as isize || xc >= w as isize {
                0.0
            } else {
                x.get3(ic, y as usize, xc as usize)
            }
        };
        let mut out = Vec::new();
        for o in 0..k.out_channels() {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut patch = Vec::new();
                    for ic in 0..k.in_channels() {
                        for r in 0..kh {
                            for c in 0..kw {
                                patch.push(fetch(
                                    ic,
                                    (oy * layer.stride.0 + r) as isize - ph as isize,
                                    (ox * layer.stride.1 + c) as isize - pw as isize,
                                ));
                            }
                        }
                    }
                    let dot: f64 = patch.iter().zip(k.kernel_flat(o)).map(|(a, b)| a * b).sum();
                    out.push(dot + layer.bias[o]);
                }
            }
        }
        out
    }

    #[test]
    fn conv_forward_agrees_with_naive_patch_oracle() {
        let mut rng = rng_from_seed(99);
        for (stride, padding) in [
            ((1, 1), Padding::Valid),
            ((2, 1), Padding::Valid),
            ((1, 1), Padding::Explicit(1, 1)),
            ((2, 2), Padding::Explicit(1, 2)),
        ] {
            let (out_c, in_c, kh, kw) = (3, 2, 3, 2);
            let mut k = Kernels::zeros(out_c, in_c, kh, kw);
            for o in 0..out_c {
                for i in 0..in_c {
                    for r in 0..kh {
                        for c in 0..kw {
                            k.set(o, i, r, c, normal_vec(&mut rng, 1)[0]);
                        }
                    }
                }
            }
            let bias = normal_vec(&mut rng, out_c);
            let layer = ConvLayer::new(k, bias, ActivationKind::Sigmoid, stride, padding).unwrap();
            let (h, w) = (6, 5);
            let x = Tensor::new(vec![in_c, h, w], normal_vec(&mut rng, in_c * h * w)).unwrap();
            let net =
                Network::new(vec![Layer::Conv2d(layer.clone())], vec![in_c, h, w], None).unwrap();
            let got = net.forward_linear_part(0, &x).unwrap();
            let want = naive_conv(&layer, &x);
            assert_eq!(got.data().len(), want.len());
            for (a, b) in got.data().iter().zip(&want) {
                assert!(
                    (a - b).abs() < 1e-12,
                    "stride {stride:?} padding {padding:?}"
                );
            }
        }
    }

    #[test]
    fn forward_rejects_mismatched_shapes() {
        let w = Matrix::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        let layer = DenseLayer::new(w, vec![0.0], ActivationKind::Relu).unwrap();
        let net = Network::new(vec![Layer::Dense(layer)], vec![2], None).unwrap();
        let bad = Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(net.forward(&bad), Err(Error::AtLayer { .. })));
        assert!(net.forward_linear_part(1, &bad).is_err()); // out of range
    }

    #[test]
    fn network_validates_layer_chain_on_construction() {
        let l0 = DenseLayer::new(
            Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap(),
            vec![0.0; 3],
            ActivationKind::Relu,
        )
        .unwrap();
        let l1_bad = DenseLayer::new(
            Matrix::from_rows(vec![vec![1.0, 0.0]]).unwrap(), // expects 2 inputs, gets 3
            vec![0.0],
            ActivationKind::Relu,
        )
        .unwrap();
        let err = Network::new(vec![Layer::Dense(l0), Layer::Dense(l1_bad)], vec![2], None);
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn model_json_round_trips_bit_exactly() {
        let mut rng = rng_from_seed(5);
        // Conv output below is [2, 4, 2], so the dense layer reads 16 values.
        let dense = DenseLayer::new(
            Matrix::from_rows((0..3).map(|_| normal_vec(&mut rng, 16)).collect()).unwrap(),
            normal_vec(&mut rng, 3),
            ActivationKind::SoftClip { alpha: 1.7 },
        )
        .unwrap();
        let mut k = Kernels::zeros(2, 1, 2, 2);
        for o in 0..2 {
            for r in 0..2 {
                for c in 0..2 {
                    k.set(o, 0, r, c, normal_vec(&mut rng, 1)[0] * 1e-7);
                }
            }
        }
        let conv = ConvLayer::new(
            k,
            vec![0.1, -0.2],
            ActivationKind::Gauss,
            (1, 1),
            Padding::Explicit(1, 0),
        )
        .unwrap();
        let net = Network::new(
            vec![Layer::Conv2d(conv), Layer::Flatten, Layer::Dense(dense)],
            vec![1, 3, 3],
            Some(vec![1.0, 2.0, 2.0]),
        )
        .unwrap();
        let json = model_to_json(&net);
        let back = model_from_json(&json).unwrap();
        assert_eq!(back, net);
        // Second serialization is byte-identical (deterministic encoder).
        assert_eq!(model_to_json(&back), json);
    }

    #[test]
    fn parse_errors_name_the_offending_field() {
        let json = r#"{
            "input_shape": [2],
            "layers": [
                {"type": "dense", "weights": [[1.0, 2.0]], "bias": [0.0], "activation": "reluu"}
            ]
        }"#;
        let err = model_from_json(json).unwrap_err();
        assert_eq!(err.kind(), "ParseError");
        let msg = err.to_string();
        assert!(msg.contains("activation") || msg.contains("reluu"), "{msg}");

        let ragged = r#"{
            "input_shape": [2],
            "layers": [
                {"type": "dense", "weights": [[1.0, 2.0], [1.0]], "bias": [0.0, 0.0], "activation": "relu"}
            ]
        }"#;
        let err = model_from_json(ragged).unwrap_err();
        assert_eq!(err.kind(), "ParseError");
        assert!(err.to_string().contains("layers[0].weights"), "{err}");

        let bad_padding = r#"{
            "input_shape": [1, 3, 3],
            "layers": [
                {"type": "conv2d", "weights": [[[[1.0]]]], "bias": [0.0], "activation": "relu", "padding": "same"}
            ]
        }"#;
        let err = model_from_json(bad_padding).unwrap_err();
        assert!(err.to_string().contains("padding"), "{err}");
    }

    #[test]
    fn save_and_load_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.nnj");
        let net = Network::new(
            vec![Layer::Dense(
                DenseLayer::new(
                    Matrix::from_rows(vec![vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap(),
                    vec![0.0, 1.0],
                    ActivationKind::Relu,
                )
                .unwrap(),
            )],
            vec![2],
            None,
        )
        .unwrap();
        save_model(&net, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, net);
    }
}
