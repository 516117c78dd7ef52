use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::softmax;
use super::conv::ConvLayer;
use crate::{ComplexSignal, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, pre: &[f64]) -> Vec<f64> {
        match self {
            Activation::Relu => pre.iter().map(|v| v.max(0.0)).collect(),
            Activation::Tanh => pre.iter().map(|v| v.tanh()).collect(),
            Activation::Identity => pre.to_vec(),
        }
    }

    /// `dpost ⊙ f'(pre)`.
    fn backward(self, pre: &[f64], dpost: &[f64]) -> Vec<f64> {
        match self {
            Activation::Relu => pre
                .iter()
                .zip(dpost)
                .map(|(p, d)| if *p > 0.0 { *d } else { 0.0 })
                .collect(),
            Activation::Tanh => pre
                .iter()
                .zip(dpost)
                .map(|(p, d)| d * (1.0 - p.tanh().powi(2)))
                .collect(),
            Activation::Identity => dpost.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchArch {
    pub channels: usize,
    pub layers: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub in_channels: usize,
    pub encoder_channels: usize,
    pub encoder_layers: usize,
    pub encoder_width: usize,
    pub tcn_blocks: usize,
    pub dilation_base: usize,
    pub tcn_width: usize,
    /// Width of the per-segment logit vectors.
    pub logit_dim: usize,
    pub n_classes: usize,
    pub segment_len: usize,
    pub branch: Option<BranchArch>,
    pub activation: Activation,
}

impl ArchConfig {
    pub fn new(n_classes: usize) -> Self {
        Self {
            in_channels: 2,
            encoder_channels: 16,
            encoder_layers: 2,
            encoder_width: 3,
            tcn_blocks: 4,
            dilation_base: 2,
            tcn_width: 2,
            logit_dim: 8,
            n_classes,
            segment_len: 100,
            branch: Some(BranchArch {
                channels: 8,
                layers: 2,
                width: 3,
            }),
            activation: Activation::Relu,
        }
    }

    pub fn dilations(&self) -> Vec<usize> {
        (0..self.tcn_blocks).map(|i| self.dilation_base.pow(i as u32)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("in_channels", self.in_channels),
            ("encoder_channels", self.encoder_channels),
            ("encoder_layers", self.encoder_layers),
            ("encoder_width", self.encoder_width),
            ("tcn_blocks", self.tcn_blocks),
            ("tcn_width", self.tcn_width),
            ("logit_dim", self.logit_dim),
            ("segment_len", self.segment_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::param(format!("{name} must be at least 1")));
            }
        }
        if self.n_classes < 2 {
            return Err(Error::param("a classifier needs at least 2 classes"));
        }
        if self.tcn_blocks > 1 && self.dilation_base < 2 {
            return Err(Error::param("dilations must strictly increase (dilation_base >= 2)"));
        }
        if let Some(b) = &self.branch {
            if b.channels == 0 || b.layers == 0 || b.width == 0 {
                return Err(Error::param("branch channels, layers and width must be at least 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[out × in]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut l = Self::zeros(n, n);
        for i in 0..n {
            l.weight[i * n + i] = 1.0;
        }
        l
    }

    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut l = Self::zeros(in_dim, out_dim);
        let bound = (1.0 / in_dim as f64).sqrt();
        for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        l
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|o| {
                let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                self.bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            grad.bias[o] += dy[o];
            let row = o * self.in_dim..(o + 1) * self.in_dim;
            for ((g, w), (d, xv)) in grad.weight[row.clone()]
                .iter_mut()
                .zip(&self.weight[row])
                .zip(dx.iter_mut().zip(x))
            {
                *g += dy[o] * xv;
                *d += dy[o] * w;
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBlock {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnStack {
    pub blocks: Vec<ResidualBlock>,
    /// Width-1 convolution over the concatenated block outputs.
    pub merge: ConvLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub convs: Vec<ConvLayer>,
    /// Score weights over the pooled branch channels. No bias: the softmax
    /// across segments would cancel it.
    pub head: Vec<f64>,
}

impl Branch {
    fn score(&self, pooled: &[f64]) -> f64 {
        self.head.iter().zip(pooled).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub arch: ArchConfig,
    pub encoder: Vec<ConvLayer>,
    pub tcn: TcnStack,
    pub classifier1: Linear,
    pub branch: Option<Branch>,
    pub classifier2: Linear,
}

/// One named parameter tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

fn conv_tensors<'a>(prefix: &str, c: &'a ConvLayer, out: &mut Vec<TensorRef<'a>>) {
    out.push(TensorRef {
        name: format!("{prefix}.weight"),
        shape: vec![c.out_channels, c.in_channels, c.width],
        data: &c.weight,
    });
    out.push(TensorRef {
        name: format!("{prefix}.bias"),
        shape: vec![c.out_channels],
        data: &c.bias,
    });
}

fn linear_tensors<'a>(prefix: &str, l: &'a Linear, out: &mut Vec<TensorRef<'a>>) {
    out.push(TensorRef {
        name: format!("{prefix}.weight"),
        shape: vec![l.out_dim, l.in_dim],
        data: &l.weight,
    });
    out.push(TensorRef {
        name: format!("{prefix}.bias"),
        shape: vec![l.out_dim],
        data: &l.bias,
    });
}

impl NetParams {
    pub fn init(arch: &ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = arch.encoder_channels;
        let mut encoder = Vec::new();
        for i in 0..arch.encoder_layers {
            let cin = if i == 0 { arch.in_channels } else { c };
            encoder.push(ConvLayer::init(cin, c, arch.encoder_width, 1, &mut rng));
        }
        let blocks = arch
            .dilations()
            .into_iter()
            .map(|d| ResidualBlock {
                conv1: ConvLayer::init(c, c, arch.tcn_width, d, &mut rng),
                conv2: ConvLayer::init(c, c, arch.tcn_width, d, &mut rng),
            })
            .collect();
        let merge = ConvLayer::init(c * arch.tcn_blocks, c, 1, 1, &mut rng);
        let classifier1 = Linear::init(c, arch.logit_dim, &mut rng);
        let branch = arch.branch.as_ref().map(|b| {
            let convs = (0..b.layers)
                .map(|i| {
                    let cin = if i == 0 { arch.in_channels } else { b.channels };
                    ConvLayer::init(cin, b.channels, b.width, 1, &mut rng)
                })
                .collect();
            let bound = (1.0 / b.channels as f64).sqrt();
            let head = (0..b.channels).map(|_| rng.random_range(-bound..bound)).collect();
            Branch { convs, head }
        });
        let classifier2 = Linear::init(arch.logit_dim, arch.n_classes, &mut rng);
        Ok(Self {
            arch: arch.clone(),
            encoder,
            tcn: TcnStack { blocks, merge },
            classifier1,
            branch,
            classifier2,
        })
    }

    /// Same structure, every value zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, v| v.fill(0.0));
        z
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (i, c) in self.encoder.iter().enumerate() {
            conv_tensors(&format!("encoder.{i}"), c, &mut out);
        }
        for (i, b) in self.tcn.blocks.iter().enumerate() {
            conv_tensors(&format!("tcn.block.{i}.conv1"), &b.conv1, &mut out);
            conv_tensors(&format!("tcn.block.{i}.conv2"), &b.conv2, &mut out);
        }
        conv_tensors("tcn.merge", &self.tcn.merge, &mut out);
        linear_tensors("classifier1", &self.classifier1, &mut out);
        if let Some(b) = &self.branch {
            for (i, c) in b.convs.iter().enumerate() {
                conv_tensors(&format!("branch.conv.{i}"), c, &mut out);
            }
            out.push(TensorRef {
                name: "branch.head.weight".into(),
                shape: vec![1, b.head.len()],
                data: &b.head,
            });
        }
        linear_tensors("classifier2", &self.classifier2, &mut out);
        out
    }

    /// Visits every tensor mutably in the order of [`tensors`](Self::tensors).
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Vec<f64>)) {
        let conv = |p: String, c: &mut ConvLayer, f: &mut dyn FnMut(&str, &mut Vec<f64>)| {
            f(&format!("{p}.weight"), &mut c.weight);
            f(&format!("{p}.bias"), &mut c.bias);
        };
        for (i, c) in self.encoder.iter_mut().enumerate() {
            conv(format!("encoder.{i}"), c, &mut f);
        }
        for (i, b) in self.tcn.blocks.iter_mut().enumerate() {
            conv(format!("tcn.block.{i}.conv1"), &mut b.conv1, &mut f);
            conv(format!("tcn.block.{i}.conv2"), &mut b.conv2, &mut f);
        }
        conv("tcn.merge".into(), &mut self.tcn.merge, &mut f);
        f("classifier1.weight", &mut self.classifier1.weight);
        f("classifier1.bias", &mut self.classifier1.bias);
        if let Some(b) = &mut self.branch {
            for (i, c) in b.convs.iter_mut().enumerate() {
                conv(format!("branch.conv.{i}"), c, &mut f);
            }
            f("branch.head.weight", &mut b.head);
        }
        f("classifier2.weight", &mut self.classifier2.weight);
        f("classifier2.bias", &mut self.classifier2.bias);
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        self.for_each_mut(|_, v| {
            let n = v.len();
            v.copy_from_slice(&flat[at..at + n]);
            at += n;
        });
        assert_eq!(at, flat.len(), "flat parameter vector has the wrong length");
    }

    /// Which flat coordinates belong to the attention branch.
    pub fn branch_mask(&self) -> Vec<bool> {
        self.tensors()
            .iter()
            .flat_map(|t| std::iter::repeat_n(t.name.starts_with("branch."), t.data.len()))
            .collect()
    }

    pub fn branch_flat(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .filter(|t| t.name.starts_with("branch."))
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }

    pub fn segments(&self, len: usize) -> usize {
        len / self.arch.segment_len
    }
}

/// A model input: main (feature part) and branch (signal part) maps, each
/// `[2 × len]` with I in row 0 and Q in row 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub main: Vec<f64>,
    pub branch: Vec<f64>,
    pub len: usize,
    pub label: usize,
}

pub fn iq_channels(x: &ComplexSignal) -> Vec<f64> {
    x.samples()
        .iter()
        .map(|c| c.re)
        .chain(x.samples().iter().map(|c| c.im))
        .collect()
}

impl Sample {
    pub fn new(main: &ComplexSignal, branch: &ComplexSignal, label: usize) -> Result<Self> {
        if main.len() != branch.len() {
            return Err(Error::param(format!(
                "main input has {} samples but branch input has {}",
                main.len(),
                branch.len()
            )));
        }
        Ok(Self {
            main: iq_channels(main),
            branch: iq_channels(branch),
            len: main.len(),
            label,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// Weighted per-segment logit vectors.
    #[default]
    Soft,
    /// Weighted one-hot per-segment argmax; inference only.
    Hard,
}

struct LayerTrace {
    input: Vec<f64>,
    pre: Vec<f64>,
}

struct BlockTrace {
    input: Vec<f64>,
    pre1: Vec<f64>,
    h1: Vec<f64>,
}

struct BranchTrace {
    layers: Vec<LayerTrace>,
    pooled: Vec<f64>,
}

/// Everything the backward pass needs.
pub struct Trace {
    t: usize,
    encoder: Vec<LayerTrace>,
    blocks: Vec<BlockTrace>,
    concat: Vec<f64>,
    merge_pre: Vec<f64>,
    pooled: Vec<Vec<f64>>,
    branch: Option<Vec<BranchTrace>>,
    pub tcn_output: Vec<f64>,
    pub seg_logits: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub combined: Vec<f64>,
    pub logits: Vec<f64>,
}

fn segment_means(x: &[f64], channels: usize, t: usize, seg: usize, s: usize) -> Vec<f64> {
    (0..channels)
        .map(|c| x[c * t + s * seg..c * t + (s + 1) * seg].iter().sum::<f64>() / seg as f64)
        .collect()
}

fn conv_stack(layers: &[ConvLayer], act: Activation, x: Vec<f64>, t: usize) -> (Vec<LayerTrace>, Vec<f64>) {
    let mut trace = Vec::with_capacity(layers.len());
    let mut cur = x;
    for l in layers {
        let pre = l.forward(&cur, t);
        let post = act.apply(&pre);
        trace.push(LayerTrace { input: cur, pre });
        cur = post;
    }
    (trace, cur)
}

fn conv_stack_backward(
    layers: &[ConvLayer],
    grads: &mut [ConvLayer],
    act: Activation,
    trace: &[LayerTrace],
    t: usize,
    dout: Vec<f64>,
) -> Vec<f64> {
    let mut d = dout;
    for ((l, g), tr) in layers.iter().zip(grads.iter_mut()).zip(trace).rev() {
        let dpre = act.backward(&tr.pre, &d);
        d = l.backward(&tr.input, t, &dpre, g);
    }
    d
}

/// `y = x + conv2(act(conv1(x)))`.
pub fn residual_block(x: &[f64], t: usize, block: &ResidualBlock, act: Activation) -> Result<Vec<f64>> {
    let (c1, c2) = (&block.conv1, &block.conv2);
    if c1.out_channels != c2.in_channels || c2.out_channels != c1.in_channels || x.len() != c1.in_channels * t {
        return Err(Error::param(
            "residual block shapes do not chain back to the input width",
        ));
    }
    c1.validate()?;
    c2.validate()?;
    let f = c2.forward(&act.apply(&c1.forward(x, t)), t);
    Ok(x.iter().zip(&f).map(|(a, b)| a + b).collect())
}

/// Per-segment branch scores; segments are processed independently.
fn branch_forward(
    b: &Branch,
    act: Activation,
    input: &[f64],
    channels: usize,
    t: usize,
    seg: usize,
    s: usize,
) -> BranchTrace {
    let mut x = Vec::with_capacity(channels * seg);
    for c in 0..channels {
        x.extend_from_slice(&input[c * t + s * seg..c * t + (s + 1) * seg]);
    }
    let (layers, out) = conv_stack(&b.convs, act, x, seg);
    let pooled = segment_means(&out, b.head.len(), seg, seg, 0);
    BranchTrace { layers, pooled }
}

/// Per-segment softmax weights from the branch (uniform without one).
pub fn spatial_attention_weights(p: &NetParams, branch_input: &[f64], len: usize) -> Result<Vec<f64>> {
    let s = p.segments(len);
    if s == 0 || branch_input.len() != p.arch.in_channels * len {
        return Err(Error::param("branch input is empty or shorter than one segment"));
    }
    Ok(match &p.branch {
        None => vec![1.0 / s as f64; s],
        Some(b) => {
            let scores: Vec<f64> = (0..s)
                .map(|i| {
                    let tr = branch_forward(
                        b,
                        p.arch.activation,
                        branch_input,
                        p.arch.in_channels,
                        len,
                        p.arch.segment_len,
                        i,
                    );
                    b.score(&tr.pooled)
                })
                .collect();
            softmax(&scores)
        }
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn forward_trace(p: &NetParams, x: &Sample, decision: Decision) -> Result<Trace> {
    let a = &p.arch;
    let t = x.len;
    let seg = a.segment_len;
    let s = t / seg;
    if s == 0 {
        return Err(Error::param(format!(
            "input of {t} samples is shorter than one {seg}-sample segment"
        )));
    }
    if x.main.len() != a.in_channels * t || x.branch.len() != a.in_channels * t {
        return Err(Error::param("main and branch inputs must share the segment grid"));
    }
    let act = a.activation;
    let c = a.encoder_channels;

    let (encoder, mut h) = conv_stack(&p.encoder, act, x.main.clone(), t);
    let mut blocks = Vec::with_capacity(p.tcn.blocks.len());
    let mut concat = Vec::with_capacity(c * t * p.tcn.blocks.len());
    for b in &p.tcn.blocks {
        let pre1 = b.conv1.forward(&h, t);
        let h1 = act.apply(&pre1);
        let f = b.conv2.forward(&h1, t);
        let out: Vec<f64> = h.iter().zip(&f).map(|(u, v)| u + v).collect();
        concat.extend_from_slice(&out);
        blocks.push(BlockTrace { input: h, pre1, h1 });
        h = out;
    }
    let merge_pre = p.tcn.merge.forward(&concat, t);
    let tcn_output = act.apply(&merge_pre);
    let pooled: Vec<Vec<f64>> = (0..s).map(|i| segment_means(&tcn_output, c, t, seg, i)).collect();
    let seg_logits: Vec<Vec<f64>> = pooled.iter().map(|q| p.classifier1.forward(q)).collect();

    let (branch, weights) = match &p.branch {
        None => (None, vec![1.0 / s as f64; s]),
        Some(b) => {
            let traces: Vec<BranchTrace> = (0..s)
                .map(|i| branch_forward(b, act, &x.branch, a.in_channels, t, seg, i))
                .collect();
            let scores: Vec<f64> = traces.iter().map(|tr| b.score(&tr.pooled)).collect();
            (Some(traces), softmax(&scores))
        }
    };

    let mut combined = vec![0.0; a.logit_dim];
    for (w, l) in weights.iter().zip(&seg_logits) {
        match decision {
            Decision::Soft => {
                for (z, v) in combined.iter_mut().zip(l) {
                    *z += w * v;
                }
            }
            Decision::Hard => combined[argmax(l)] += w,
        }
    }
    let logits = p.classifier2.forward(&combined);
    Ok(Trace {
        t,
        encoder,
        blocks,
        concat,
        merge_pre,
        pooled,
        branch,
        tcn_output,
        seg_logits,
        weights,
        combined,
        logits,
    })
}

pub fn model_forward(p: &NetParams, x: &Sample, decision: Decision) -> Result<Vec<f64>> {
    Ok(forward_trace(p, x, decision)?.logits)
}

/// Softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mut prob = softmax(logits);
    let loss = -prob[label].max(f64::MIN_POSITIVE).ln();
    prob[label] -= 1.0;
    (loss, prob)
}

/// Accumulates `scale · dL/dθ` into `grad` for a soft-decision trace.
pub fn backward(p: &NetParams, tr: &Trace, dlogits: &[f64], scale: f64, grad: &mut NetParams) {
    let a = &p.arch;
    let act = a.activation;
    let (t, seg, c) = (tr.t, a.segment_len, a.encoder_channels);
    let s = tr.seg_logits.len();
    let dlogits: Vec<f64> = dlogits.iter().map(|v| v * scale).collect();

    let dz = p.classifier2.backward(&tr.combined, &dlogits, &mut grad.classifier2);
    let dw: Vec<f64> = tr
        .seg_logits
        .iter()
        .map(|l| l.iter().zip(&dz).map(|(u, v)| u * v).sum())
        .collect();

    if let (Some(b), Some(traces), Some(gb)) = (&p.branch, &tr.branch, grad.branch.as_mut()) {
        let mean: f64 = tr.weights.iter().zip(&dw).map(|(w, d)| w * d).sum();
        let bc = b.head.len();
        for (i, btr) in traces.iter().enumerate() {
            let dscore = tr.weights[i] * (dw[i] - mean);
            for (g, v) in gb.head.iter_mut().zip(&btr.pooled) {
                *g += dscore * v;
            }
            let dp: Vec<f64> = b.head.iter().map(|w| dscore * w).collect();
            let mut dfeat = vec![0.0; bc * seg];
            for ch in 0..bc {
                dfeat[ch * seg..(ch + 1) * seg].fill(dp[ch] / seg as f64);
            }
            conv_stack_backward(&b.convs, &mut gb.convs, act, &btr.layers, seg, dfeat);
        }
    }

    let mut dmerged = vec![0.0; c * t];
    for i in 0..s {
        let dl: Vec<f64> = dz.iter().map(|v| v * tr.weights[i]).collect();
        let dq = p.classifier1.backward(&tr.pooled[i], &dl, &mut grad.classifier1);
        for ch in 0..c {
            dmerged[ch * t + i * seg..ch * t + (i + 1) * seg].fill(dq[ch] / seg as f64);
        }
    }
    let dpre = act.backward(&tr.merge_pre, &dmerged);
    let dconcat = p.tcn.merge.backward(&tr.concat, t, &dpre, &mut grad.tcn.merge);

    let mut carry = vec![0.0; c * t];
    for (i, (b, btr)) in p.tcn.blocks.iter().zip(&tr.blocks).enumerate().rev() {
        let gout: Vec<f64> = carry
            .iter()
            .zip(&dconcat[i * c * t..(i + 1) * c * t])
            .map(|(u, v)| u + v)
            .collect();
        let gb = &mut grad.tcn.blocks[i];
        let dh1 = b.conv2.backward(&btr.h1, t, &gout, &mut gb.conv2);
        let dpre1 = act.backward(&btr.pre1, &dh1);
        let dx = b.conv1.backward(&btr.input, t, &dpre1, &mut gb.conv1);
        carry = gout.iter().zip(&dx).map(|(u, v)| u + v).collect();
    }
    conv_stack_backward(&p.encoder, &mut grad.encoder, act, &tr.encoder, t, carry);
}

/// Mean cross-entropy over `batch` and its gradient.
pub fn loss_and_grad(p: &NetParams, batch: &[&Sample]) -> Result<(f64, NetParams)> {
    let mut grad = p.zeros_like();
    let mut total = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for x in batch {
        check_label(p, x)?;
        let tr = forward_trace(p, x, Decision::Soft)?;
        let (loss, dl) = cross_entropy(&tr.logits, x.label);
        total += loss;
        backward(p, &tr, &dl, scale, &mut grad);
    }
    Ok((total * scale, grad))
}

pub fn loss(p: &NetParams, batch: &[&Sample]) -> Result<f64> {
    let mut total = 0.0;
    for x in batch {
        check_label(p, x)?;
        total += cross_entropy(&model_forward(p, x, Decision::Soft)?, x.label).0;
    }
    Ok(total / batch.len() as f64)
}

fn check_label(p: &NetParams, x: &Sample) -> Result<()> {
    if x.label >= p.arch.n_classes {
        return Err(Error::param(format!(
            "label {} outside {} classes",
            x.label, p.arch.n_classes
        )));
    }
    Ok(())
}

pub fn predict(p: &NetParams, x: &Sample, decision: Decision) -> Result<usize> {
    Ok(argmax(&model_forward(p, x, decision)?))
}
