//! Flat-parameter 1-d convolutional network with manual backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, ConvMode, Head, LearnerError, ModelConfig};
use crate::sensors::Deployment;

/// Named block of the parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ConvPlan {
    c_in: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    l_in: usize,
    l_conv: usize,
    l_pool: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GroupPlan {
    channels: Vec<usize>,
    blocks: Vec<ConvPlan>,
    feat_offset: usize,
    feat_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DensePlan {
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
}

/// Layer graph; parameters live in a separate flat vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub n_channels: usize,
    pub window_len: usize,
    pub n_classes: usize,
    pub input_len: usize,
    pub feat_dim: usize,
    pub n_params: usize,
    pub manifest: Vec<LayerShape>,
    activation: Activation,
    dropout: f64,
    groups: Vec<GroupPlan>,
    hidden: Option<DensePlan>,
    out: DensePlan,
}

fn act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
    }
}

/// Derivative expressed through the activated value and the pre-activation.
fn act_grad(a: Activation, z: f64, y: f64) -> f64 {
    match a {
        Activation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Tanh => 1.0 - y * y,
    }
}

/// Channel groups for a convolution mode.
pub fn channel_groups(mode: ConvMode, deployment: &Deployment) -> Vec<Vec<usize>> {
    let n = deployment.n_channels();
    match mode {
        ConvMode::GroupedModalities => vec![(0..n).collect()],
        ConvMode::SplitModalities => (0..deployment.sources.len())
            .map(|s| deployment.channel_range(s).collect())
            .collect(),
        ConvMode::SplitChannels => (0..n).map(|c| vec![c]).collect(),
    }
}

struct Alloc {
    next: usize,
    manifest: Vec<LayerShape>,
}

impl Alloc {
    fn take(&mut self, name: String, shape: Vec<usize>) -> usize {
        let off = self.next;
        self.next += shape.iter().product::<usize>();
        self.manifest.push(LayerShape { name, shape, offset: off });
        off
    }
}

impl Network {
    /// Builds the layer graph for frames of `window_len` samples and `n_classes` outputs.
    pub fn new(config: &ModelConfig, deployment: &Deployment, window_len: usize, n_classes: usize) -> Result<Self, LearnerError> {
        config.validate()?;
        let n_channels = deployment.n_channels();
        let mut alloc = Alloc {
            next: 0,
            manifest: Vec::new(),
        };
        let mut groups = Vec::new();
        let (input_len, feat_dim) = if config.n_conv_blocks == 0 {
            (3 * n_channels, 3 * n_channels)
        } else {
            let mut feat = 0;
            for (g, channels) in channel_groups(config.conv_mode, deployment).into_iter().enumerate() {
                let mut c_in = channels.len();
                let mut l_in = window_len;
                let mut blocks = Vec::new();
                for b in 0..config.n_conv_blocks {
                    let k = config.kernel_sizes[b];
                    if k > l_in {
                        return Err(LearnerError::KernelTooLarge { block: b + 1, kernel: k, length: l_in });
                    }
                    let stride = ((config.stride_fraction * k as f64).round() as usize).max(1);
                    let l_conv = (l_in - k) / stride + 1;
                    let l_pool = l_conv / 2;
                    if l_pool == 0 {
                        return Err(LearnerError::KernelTooLarge { block: b + 1, kernel: k, length: l_in });
                    }
                    let c_out = config.n_filters;
                    let w = alloc.take(format!("g{g}.conv{}.weight", b + 1), vec![c_out, c_in, k]);
                    let bias = alloc.take(format!("g{g}.conv{}.bias", b + 1), vec![c_out]);
                    blocks.push(ConvPlan {
                        c_in,
                        c_out,
                        k,
                        stride,
                        l_in,
                        l_conv,
                        l_pool,
                        w,
                        b: bias,
                    });
                    c_in = c_out;
                    l_in = l_pool;
                }
                let feat_len = c_in * l_in;
                groups.push(GroupPlan {
                    channels,
                    blocks,
                    feat_offset: feat,
                    feat_len,
                });
                feat += feat_len;
            }
            (n_channels * window_len, feat)
        };
        let mut dense = |name: &str, n_in: usize, n_out: usize| {
            let w = alloc.take(format!("{name}.weight"), vec![n_out, n_in]);
            let b = alloc.take(format!("{name}.bias"), vec![n_out]);
            DensePlan { n_in, n_out, w, b }
        };
        let (hidden, out) = match config.head {
            Head::SoftmaxLinear => (None, dense("out", feat_dim, n_classes)),
            Head::Mlp => {
                let h = dense("hidden", feat_dim, config.dense_units);
                (Some(h), dense("out", config.dense_units, n_classes))
            }
            Head::Hybrid => return Err(LearnerError::Config("the hybrid recurrent head is not supported".into())),
        };
        Ok(Self {
            n_channels,
            window_len,
            n_classes,
            input_len,
            feat_dim,
            n_params: alloc.next,
            manifest: alloc.manifest,
            activation: config.activation,
            dropout: config.dropout,
            groups,
            hidden,
            out,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.n_params];
        for layer in &self.manifest {
            if layer.name.ends_with(".bias") {
                continue;
            }
            let (fan_in, fan_out) = match layer.shape.as_slice() {
                [o, i, k] => (i * k, o * k),
                [o, i] => (*i, *o),
                _ => unreachable!("weights are 2-d or 3-d"),
            };
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let n: usize = layer.shape.iter().product();
            for v in &mut p[layer.offset..layer.offset + n] {
                *v = rng.gen_range(-a..a);
            }
        }
        p
    }
}

/// Per-sample activations kept for the backward pass.
#[derive(Default)]
pub struct Cache {
    /// Per group, per block: input, pre-activation, activation, pool argmax, pooled output.
    blocks: Vec<Vec<BlockCache>>,
    feats: Vec<f64>,
    mask: Vec<f64>,
    head_in: Vec<f64>,
    hidden_z: Vec<f64>,
    hidden_a: Vec<f64>,
    pub probs: Vec<f64>,
}

struct BlockCache {
    input: Vec<f64>,
    z: Vec<f64>,
    a: Vec<f64>,
    argmax: Vec<usize>,
}

fn dense_forward(d: &DensePlan, p: &[f64], x: &[f64]) -> Vec<f64> {
    (0..d.n_out)
        .map(|o| {
            let w = &p[d.w + o * d.n_in..d.w + (o + 1) * d.n_in];
            p[d.b + o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Accumulates parameter gradients and returns the input gradient.
fn dense_backward(d: &DensePlan, p: &[f64], x: &[f64], dy: &[f64], g: &mut [f64]) -> Vec<f64> {
    let mut dx = vec![0.0; d.n_in];
    for o in 0..d.n_out {
        let go = dy[o];
        if go == 0.0 {
            continue;
        }
        g[d.b + o] += go;
        let row = d.w + o * d.n_in;
        for i in 0..d.n_in {
            g[row + i] += go * x[i];
            dx[i] += go * p[row + i];
        }
    }
    dx
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Network {
    /// Forward pass; `dropout` supplies the mask stream during training.
    pub fn forward<R: Rng + ?Sized>(&self, p: &[f64], x: &[f64], dropout: Option<&mut R>) -> Cache {
        let mut cache = Cache::default();
        let feats = if self.groups.is_empty() {
            x.to_vec()
        } else {
            let mut feats = vec![0.0; self.feat_dim];
            for g in &self.groups {
                let mut input: Vec<f64> = Vec::with_capacity(g.channels.len() * self.window_len);
                for &c in &g.channels {
                    input.extend_from_slice(&x[c * self.window_len..(c + 1) * self.window_len]);
                }
                let mut caches = Vec::with_capacity(g.blocks.len());
                for b in &g.blocks {
                    let mut z = vec![0.0; b.c_out * b.l_conv];
                    for o in 0..b.c_out {
                        for t in 0..b.l_conv {
                            let mut s = p[b.b + o];
                            for i in 0..b.c_in {
                                let w = &p[b.w + (o * b.c_in + i) * b.k..][..b.k];
                                let xi = &input[i * b.l_in + t * b.stride..][..b.k];
                                s += w.iter().zip(xi).map(|(a, c)| a * c).sum::<f64>();
                            }
                            z[o * b.l_conv + t] = s;
                        }
                    }
                    let a: Vec<f64> = z.iter().map(|&v| act(self.activation, v)).collect();
                    let mut pooled = vec![0.0; b.c_out * b.l_pool];
                    let mut argmax = vec![0; b.c_out * b.l_pool];
                    for o in 0..b.c_out {
                        for q in 0..b.l_pool {
                            let i0 = o * b.l_conv + 2 * q;
                            let best = if a[i0 + 1] > a[i0] { i0 + 1 } else { i0 };
                            pooled[o * b.l_pool + q] = a[best];
                            argmax[o * b.l_pool + q] = best;
                        }
                    }
                    caches.push(BlockCache { input, z, a, argmax });
                    input = pooled;
                }
                feats[g.feat_offset..g.feat_offset + g.feat_len].copy_from_slice(&input);
                cache.blocks.push(caches);
            }
            feats
        };
        let mask: Vec<f64> = match dropout {
            Some(rng) if self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                (0..feats.len())
                    .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect()
            }
            _ => Vec::new(),
        };
        let head_in: Vec<f64> = if mask.is_empty() {
            feats.clone()
        } else {
            feats.iter().zip(&mask).map(|(f, m)| f * m).collect()
        };
        let logits = match &self.hidden {
            Some(h) => {
                let z = dense_forward(h, p, &head_in);
                let a: Vec<f64> = z.iter().map(|&v| act(self.activation, v)).collect();
                let logits = dense_forward(&self.out, p, &a);
                cache.hidden_z = z;
                cache.hidden_a = a;
                logits
            }
            None => dense_forward(&self.out, p, &head_in),
        };
        cache.probs = softmax(&logits);
        cache.feats = feats;
        cache.mask = mask;
        cache.head_in = head_in;
        cache
    }

    /// Cross-entropy of one sample and its gradient, accumulated into `g`.
    pub fn backward(&self, p: &[f64], cache: &Cache, label: usize, g: &mut [f64]) -> f64 {
        let loss = -cache.probs[label].max(f64::MIN_POSITIVE).ln();
        let mut dlogits = cache.probs.clone();
        dlogits[label] -= 1.0;
        let mut d_head_in = match &self.hidden {
            Some(h) => {
                let da = dense_backward(&self.out, p, &cache.hidden_a, &dlogits, g);
                let dz: Vec<f64> = da
                    .iter()
                    .zip(cache.hidden_z.iter().zip(&cache.hidden_a))
                    .map(|(d, (&z, &a))| d * act_grad(self.activation, z, a))
                    .collect();
                dense_backward(h, p, &cache.head_in, &dz, g)
            }
            None => dense_backward(&self.out, p, &cache.head_in, &dlogits, g),
        };
        if self.groups.is_empty() {
            return loss;
        }
        if !cache.mask.is_empty() {
            for (d, m) in d_head_in.iter_mut().zip(&cache.mask) {
                *d *= m;
            }
        }
        for (g_plan, caches) in self.groups.iter().zip(&cache.blocks) {
            let mut d_out = d_head_in[g_plan.feat_offset..g_plan.feat_offset + g_plan.feat_len].to_vec();
            for (b, bc) in g_plan.blocks.iter().zip(caches).rev() {
                let mut dz = vec![0.0; b.c_out * b.l_conv];
                for (q, &idx) in bc.argmax.iter().enumerate() {
                    dz[idx] += d_out[q];
                }
                for (i, d) in dz.iter_mut().enumerate() {
                    *d *= act_grad(self.activation, bc.z[i], bc.a[i]);
                }
                let mut d_in = vec![0.0; b.c_in * b.l_in];
                for o in 0..b.c_out {
                    for t in 0..b.l_conv {
                        let go = dz[o * b.l_conv + t];
                        if go == 0.0 {
                            continue;
                        }
                        g[b.b + o] += go;
                        for i in 0..b.c_in {
                            let wo = b.w + (o * b.c_in + i) * b.k;
                            let xo = i * b.l_in + t * b.stride;
                            for j in 0..b.k {
                                g[wo + j] += go * bc.input[xo + j];
                                d_in[xo + j] += go * p[wo + j];
                            }
                        }
                    }
                }
                d_out = d_in;
            }
        }
        loss
    }

    /// Mean loss and gradient over a batch without dropout.
    pub fn loss_and_grad(&self, p: &[f64], inputs: &[Vec<f64>], labels: &[usize]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.n_params];
        let mut loss = 0.0;
        for (x, &y) in inputs.iter().zip(labels) {
            let c = self.forward::<rand_chacha::ChaCha8Rng>(p, x, None);
            loss += self.backward(p, &c, y, &mut g);
        }
        let n = inputs.len().max(1) as f64;
        g.iter_mut().for_each(|v| *v /= n);
        (loss / n, g)
    }

    /// Class probabilities in evaluation mode.
    pub fn predict_proba(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        self.forward::<rand_chacha::ChaCha8Rng>(p, x, None).probs
    }
}
