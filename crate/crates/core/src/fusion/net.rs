//! Densely connected convolutional fusion network.
//!
//! Layout: a 3×3 stem (2 → 16), four 3×3 dense layers of growth 16 where
//! layer `k` reads the concatenation of every earlier block, and a 1×1 output
//! convolution over all 80 feature channels followed by a sigmoid. Hidden
//! layers use softplus. 3×3 convolutions pad by replicating the border, so
//! every map keeps the input size.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, ImageF, Result};

pub const INPUT_CHANNELS: usize = 2;
pub const GROWTH: usize = 16;
pub const DENSE_LAYERS: usize = 4;
/// Feature blocks feeding the output layer: the stem plus the dense layers.
pub const FEATURE_BLOCKS: usize = DENSE_LAYERS + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub out_channels: usize,
    pub in_channels: usize,
    /// Square kernel side.
    pub kernel: usize,
}

impl LayerShape {
    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }
}

/// Layer shapes in parameter order.
pub fn architecture() -> Vec<LayerShape> {
    let mut shapes = vec![LayerShape {
        out_channels: GROWTH,
        in_channels: INPUT_CHANNELS,
        kernel: 3,
    }];
    for k in 1..=DENSE_LAYERS {
        shapes.push(LayerShape {
            out_channels: GROWTH,
            in_channels: GROWTH * k,
            kernel: 3,
        });
    }
    shapes.push(LayerShape {
        out_channels: 1,
        in_channels: GROWTH * FEATURE_BLOCKS,
        kernel: 1,
    });
    shapes
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerDescription {
    pub name: String,
    pub shape: LayerShape,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetDescription {
    pub layers: Vec<LayerDescription>,
    pub parameter_count: usize,
}

impl fmt::Display for NetDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.layers {
            writeln!(
                f,
                "{:<8} {:>3} -> {:>3}  {}x{}  {:>6} params",
                l.name, l.shape.in_channels, l.shape.out_channels, l.shape.kernel, l.shape.kernel, l.params
            )?;
        }
        write!(f, "total {} parameters", self.parameter_count)
    }
}

/// Network weights in one flat vector: per layer, weights laid out as
/// `[out][in][ky][kx]` followed by the biases.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionNet {
    shapes: Vec<LayerShape>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Intermediate maps kept by [`FusionNet::forward`] for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations {
    height: usize,
    width: usize,
    input: Vec<f64>,
    /// Replicate-padded softplus output of each feature block.
    blocks: Vec<Vec<f64>>,
    /// softplus′(z) = sigmoid(z) per feature block, unpadded.
    gates: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Replicate-pads an `h × w` plane by one pixel on every side.
fn pad_into(src: &[f64], h: usize, w: usize, dst: &mut [f64]) {
    let pw = w + 2;
    for py in 0..h + 2 {
        let y = py.saturating_sub(1).min(h - 1);
        let row = &src[y * w..(y + 1) * w];
        let out = &mut dst[py * pw..(py + 1) * pw];
        out[0] = row[0];
        out[1..w + 1].copy_from_slice(row);
        out[w + 1] = row[w - 1];
    }
}

/// Adds a padded-plane gradient into the unpadded plane it was padded from.
fn fold_into(dpad: &[f64], h: usize, w: usize, dst: &mut [f64]) {
    let pw = w + 2;
    for py in 0..h + 2 {
        let y = py.saturating_sub(1).min(h - 1);
        let row = &dpad[py * pw..(py + 1) * pw];
        let out = &mut dst[y * w..(y + 1) * w];
        out[0] += row[0];
        out.iter_mut().zip(&row[1..w + 1]).for_each(|(o, g)| *o += g);
        out[w - 1] += row[w + 1];
    }
}

/// 3×3 valid convolution of padded inputs, one output plane.
fn conv3_forward(inputs: &[&[f64]], weights: &[f64], bias: f64, h: usize, w: usize, out: &mut [f64]) {
    let pw = w + 2;
    out.iter_mut().for_each(|v| *v = bias);
    for (i, plane) in inputs.iter().enumerate() {
        let k = &weights[i * 9..(i + 1) * 9];
        for y in 0..h {
            let o = &mut out[y * w..(y + 1) * w];
            for ky in 0..3 {
                let row = &plane[(y + ky) * pw..(y + ky + 1) * pw];
                let (k0, k1, k2) = (k[ky * 3], k[ky * 3 + 1], k[ky * 3 + 2]);
                for (x, v) in o.iter_mut().enumerate() {
                    *v += k0 * row[x] + k1 * row[x + 1] + k2 * row[x + 2];
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl FusionNet {
    /// Seeded uniform fan-in initialization: weights in `±√(3 / fan_in)`,
    /// biases zero.
    pub fn new(seed: u64) -> Self {
        let shapes = architecture();
        let mut net = FusionNet::zeros(shapes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..net.shapes.len() {
            let s = net.shapes[l];
            let bound = (3.0 / (s.in_channels * s.kernel * s.kernel) as f64).sqrt();
            let range = net.weight_range(l);
            for p in &mut net.params[range] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        net
    }

    fn zeros(shapes: Vec<LayerShape>) -> Self {
        let mut offsets = Vec::with_capacity(shapes.len() + 1);
        let mut total = 0;
        for s in &shapes {
            offsets.push(total);
            total += s.param_count();
        }
        offsets.push(total);
        FusionNet {
            shapes,
            offsets,
            params: vec![0.0; total],
        }
    }

    /// Rebuilds a network from stored shapes and parameters. The shapes must
    /// match [`architecture`].
    pub fn from_parameters(shapes: &[LayerShape], params: Vec<f64>) -> Result<Self> {
        if shapes != architecture().as_slice() {
            return Err(Error::param("layer shapes do not match the fusion architecture"));
        }
        let mut net = FusionNet::zeros(shapes.to_vec());
        if params.len() != net.params.len() {
            return Err(Error::param("parameter count does not match the layer shapes"));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("non-finite network parameter"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn weight_range(&self, layer: usize) -> Range<usize> {
        let start = self.offsets[layer];
        start..start + self.shapes[layer].weight_count()
    }

    pub fn bias_range(&self, layer: usize) -> Range<usize> {
        self.weight_range(layer).end..self.offsets[layer + 1]
    }

    pub fn describe(&self) -> NetDescription {
        let last = self.shapes.len() - 1;
        let layers = self
            .shapes
            .iter()
            .enumerate()
            .map(|(l, s)| LayerDescription {
                name: match l {
                    0 => String::from("stem"),
                    l if l == last => String::from("output"),
                    l => format!("dense{l}"),
                },
                shape: *s,
                params: s.param_count(),
            })
            .collect();
        NetDescription {
            layers,
            parameter_count: self.params.len(),
        }
    }

    /// Forward pass on a stacked pair of equal-size 1-channel images.
    pub fn forward(&self, first: &ImageF, second: &ImageF) -> Result<Activations> {
        if first.channels() != 1 || second.channels() != 1 {
            return Err(Error::param("fusion inputs must be 1-channel"));
        }
        if first.size() != second.size() {
            return Err(Error::SizeMismatch {
                expected: first.size(),
                found: second.size(),
            });
        }
        let (h, w) = first.size();
        if h == 0 || w == 0 {
            return Err(Error::param("fusion inputs must be non-empty"));
        }
        let plane = (h + 2) * (w + 2);
        let mut input = vec![0.0; INPUT_CHANNELS * plane];
        pad_into(first.data(), h, w, &mut input[..plane]);
        pad_into(second.data(), h, w, &mut input[plane..]);

        let mut blocks: Vec<Vec<f64>> = Vec::with_capacity(FEATURE_BLOCKS);
        let mut gates: Vec<Vec<f64>> = Vec::with_capacity(FEATURE_BLOCKS);
        let mut z = vec![0.0; h * w];
        for l in 0..FEATURE_BLOCKS {
            let inputs: Vec<&[f64]> = if l == 0 {
                input.chunks(plane).collect()
            } else {
                blocks.iter().flat_map(|b| b.chunks(plane)).collect()
            };
            let weights = &self.params[self.weight_range(l)];
            let biases = &self.params[self.bias_range(l)];
            let per_out = inputs.len() * 9;
            let mut padded = vec![0.0; GROWTH * plane];
            let mut gate = vec![0.0; GROWTH * h * w];
            for o in 0..GROWTH {
                conv3_forward(&inputs, &weights[o * per_out..(o + 1) * per_out], biases[o], h, w, &mut z);
                let g = &mut gate[o * h * w..(o + 1) * h * w];
                for (gv, zv) in g.iter_mut().zip(z.iter_mut()) {
                    *gv = sigmoid(*zv);
                    *zv = softplus(*zv);
                }
                pad_into(&z, h, w, &mut padded[o * plane..(o + 1) * plane]);
            }
            blocks.push(padded);
            gates.push(gate);
        }

        let l = FEATURE_BLOCKS;
        let weights = &self.params[self.weight_range(l)];
        let bias = self.params[self.bias_range(l)][0];
        let mut out = vec![bias; h * w];
        let pw = w + 2;
        for (c, plane_data) in blocks.iter().flat_map(|b| b.chunks(plane)).enumerate() {
            let wc = weights[c];
            for y in 0..h {
                let row = &plane_data[(y + 1) * pw + 1..(y + 1) * pw + 1 + w];
                out[y * w..(y + 1) * w].iter_mut().zip(row).for_each(|(o, a)| *o += wc * a);
            }
        }
        out.iter_mut().for_each(|v| *v = sigmoid(*v));
        Ok(Activations {
            height: h,
            width: w,
            input,
            blocks,
            gates,
            output: out,
        })
    }

    /// Fused image of two 1-channel sources. A pixel is valid when it is
    /// valid in both sources.
    pub fn fuse(&self, first: &ImageF, second: &ImageF) -> Result<ImageF> {
        let act = self.forward(first, second)?;
        let (h, w) = first.size();
        let mask = first.mask().iter().zip(second.mask()).map(|(&a, &b)| a && b).collect();
        ImageF::from_data(h, w, 1, act.output)?.with_mask(mask)
    }

    /// Gradient of a scalar objective with respect to every parameter, given
    /// its gradient `d_output` with respect to the network output.
    pub fn backward(&self, act: &Activations, d_output: &[f64]) -> Vec<f64> {
        let (h, w) = (act.height, act.width);
        let n = h * w;
        let pw = w + 2;
        let plane = (h + 2) * pw;
        let mut grad = vec![0.0; self.params.len()];

        // Output layer: dz = dy · y(1 − y).
        let dz: Vec<f64> = d_output.iter().zip(&act.output).map(|(g, y)| g * y * (1.0 - y)).collect();
        let l = FEATURE_BLOCKS;
        let wr = self.weight_range(l);
        let br = self.bias_range(l);
        grad[br.start] = dz.iter().sum();
        let mut d_blocks: Vec<Vec<f64>> = (0..FEATURE_BLOCKS).map(|_| vec![0.0; GROWTH * n]).collect();
        for (c, plane_data) in act.blocks.iter().flat_map(|b| b.chunks(plane)).enumerate() {
            let mut acc = 0.0;
            for y in 0..h {
                let row = &plane_data[(y + 1) * pw + 1..(y + 1) * pw + 1 + w];
                acc += dot(&dz[y * w..(y + 1) * w], row);
            }
            grad[wr.start + c] = acc;
            let wc = self.params[wr.start + c];
            let d = &mut d_blocks[c / GROWTH][(c % GROWTH) * n..(c % GROWTH + 1) * n];
            d.iter_mut().zip(&dz).for_each(|(a, g)| *a += wc * g);
        }

        let mut dpad = vec![0.0; plane];
        for l in (0..FEATURE_BLOCKS).rev() {
            // dz = dA ⊙ softplus′(z).
            let mut dzl = core::mem::take(&mut d_blocks[l]);
            dzl.iter_mut().zip(&act.gates[l]).for_each(|(d, g)| *d *= g);
            let inputs: Vec<&[f64]> = if l == 0 {
                act.input.chunks(plane).collect()
            } else {
                act.blocks[..l].iter().flat_map(|b| b.chunks(plane)).collect()
            };
            let wr = self.weight_range(l);
            let br = self.bias_range(l);
            let per_out = inputs.len() * 9;
            for o in 0..GROWTH {
                let d = &dzl[o * n..(o + 1) * n];
                grad[br.start + o] = d.iter().sum();
                for (i, p) in inputs.iter().enumerate() {
                    let base = wr.start + o * per_out + i * 9;
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let mut acc = 0.0;
                            for y in 0..h {
                                acc += dot(&d[y * w..(y + 1) * w], &p[(y + ky) * pw + kx..(y + ky) * pw + kx + w]);
                            }
                            grad[base + ky * 3 + kx] = acc;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            // Input gradients for every earlier block.
            for i in 0..inputs.len() {
                dpad.iter_mut().for_each(|v| *v = 0.0);
                for o in 0..GROWTH {
                    let d = &dzl[o * n..(o + 1) * n];
                    let k = &self.params[wr.start + o * per_out + i * 9..wr.start + o * per_out + i * 9 + 9];
                    for y in 0..h {
                        let drow = &d[y * w..(y + 1) * w];
                        for ky in 0..3 {
                            let (k0, k1, k2) = (k[ky * 3], k[ky * 3 + 1], k[ky * 3 + 2]);
                            let prow = &mut dpad[(y + ky) * pw..(y + ky + 1) * pw];
                            for (x, &g) in drow.iter().enumerate() {
                                prow[x] += k0 * g;
                                prow[x + 1] += k1 * g;
                                prow[x + 2] += k2 * g;
                            }
                        }
                    }
                }
                let (b, c) = (i / GROWTH, i % GROWTH);
                fold_into(&dpad, h, w, &mut d_blocks[b][c * n..(c + 1) * n]);
            }
        }
        grad
    }
}
