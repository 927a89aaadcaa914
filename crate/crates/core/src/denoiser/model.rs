use std::fmt;
use std::str::FromStr;

use super::conv::{
    conv_backward, conv_forward_cached, Activation, ConvLayer, ConvLayerGrad, ConvParams,
};
use super::vqc::{VqcParams, VqcPlan, QUBITS};
use crate::encoding::NUM_CHANNELS;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor3;

const KERNEL: usize = 3;
const CLASSICAL_DEPTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Classical,
    Hybrid,
    FullyQuantum,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::Classical,
        ModelKind::Hybrid,
        ModelKind::FullyQuantum,
    ];

    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Classical => 0,
            ModelKind::Hybrid => 1,
            ModelKind::FullyQuantum => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Classical => "classical",
            ModelKind::Hybrid => "hybrid",
            ModelKind::FullyQuantum => "quantum",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(ModelKind::Classical),
            "hybrid" => Ok(ModelKind::Hybrid),
            "quantum" | "fully-quantum" => Ok(ModelKind::FullyQuantum),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind `{other}` (classical, hybrid, quantum)"
            ))),
        }
    }
}

/// Architecture knobs shared by all model kinds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub vqc_layers: usize,
    /// Fully quantum only: one VQC per channel instead of a shared one.
    pub per_channel_vqc: bool,
    /// All parameters zero instead of random.
    pub zero_init: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vqc_layers: 2,
            per_channel_vqc: false,
            zero_init: false,
        }
    }
}

/// The three denoisers. Every variant maps a 4-channel `(H/2)×(W/2)` tensor
/// in `[0,1]` to one of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub enum DenoiserModel {
    /// 3×3 sigmoid conv stack, 4 → 4 → 4 → 4 channels.
    Classical { layers: ConvParams },
    /// Conv front, per-group VQC, conv back.
    Hybrid {
        front: ConvParams,
        vqc: VqcParams,
        back: ConvParams,
    },
    /// Per-group VQC only; one shared parameter set or one per channel.
    FullyQuantum { vqcs: Vec<VqcParams> },
}

impl DenoiserModel {
    pub fn init(kind: ModelKind, cfg: &ModelConfig, rng: &mut RngStream) -> Self {
        let conv = |rng: &mut RngStream| {
            if cfg.zero_init {
                ConvLayer::zeros(NUM_CHANNELS, NUM_CHANNELS, KERNEL, Activation::Sigmoid)
            } else {
                ConvLayer::random(NUM_CHANNELS, NUM_CHANNELS, KERNEL, Activation::Sigmoid, rng)
            }
        };
        let vqc = |rng: &mut RngStream| {
            if cfg.zero_init {
                VqcParams::zeros(cfg.vqc_layers)
            } else {
                VqcParams::random(cfg.vqc_layers, rng)
            }
        };
        match kind {
            ModelKind::Classical => DenoiserModel::Classical {
                layers: (0..CLASSICAL_DEPTH).map(|_| conv(rng)).collect(),
            },
            ModelKind::Hybrid => {
                let front = vec![conv(rng)];
                let v = vqc(rng);
                let back = vec![conv(rng)];
                DenoiserModel::Hybrid {
                    front,
                    vqc: v,
                    back,
                }
            }
            ModelKind::FullyQuantum => {
                let n = if cfg.per_channel_vqc { NUM_CHANNELS } else { 1 };
                DenoiserModel::FullyQuantum {
                    vqcs: (0..n).map(|_| vqc(rng)).collect(),
                }
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            DenoiserModel::Classical { .. } => ModelKind::Classical,
            DenoiserModel::Hybrid { .. } => ModelKind::Hybrid,
            DenoiserModel::FullyQuantum { .. } => ModelKind::FullyQuantum,
        }
    }

    /// Named parameter blocks in canonical order.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        fn conv_blocks<'a>(
            out: &mut Vec<(String, &'a [f64])>,
            prefix: &str,
            layers: &'a [ConvLayer],
        ) {
            for (i, l) in layers.iter().enumerate() {
                out.push((format!("{prefix}{i}.weight"), &l.weights[..]));
                out.push((format!("{prefix}{i}.bias"), &l.bias[..]));
            }
        }
        match self {
            DenoiserModel::Classical { layers } => conv_blocks(&mut out, "conv", layers),
            DenoiserModel::Hybrid { front, vqc, back } => {
                conv_blocks(&mut out, "front", front);
                out.push(("vqc.angles".to_string(), vqc.angles()));
                conv_blocks(&mut out, "back", back);
            }
            DenoiserModel::FullyQuantum { vqcs } => {
                for (i, v) in vqcs.iter().enumerate() {
                    out.push((format!("vqc{i}.angles"), v.angles()));
                }
            }
        }
        out
    }

    /// Mutable blocks in the same order as [`DenoiserModel::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        fn conv_blocks<'a>(out: &mut Vec<&'a mut [f64]>, layers: &'a mut [ConvLayer]) {
            for l in layers {
                out.push(&mut l.weights[..]);
                out.push(&mut l.bias[..]);
            }
        }
        match self {
            DenoiserModel::Classical { layers } => conv_blocks(&mut out, layers),
            DenoiserModel::Hybrid { front, vqc, back } => {
                conv_blocks(&mut out, front);
                out.push(vqc.angles_mut());
                conv_blocks(&mut out, back);
            }
            DenoiserModel::FullyQuantum { vqcs } => {
                for v in vqcs {
                    out.push(v.angles_mut());
                }
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.blocks()
            .into_iter()
            .flat_map(|(_, b)| b.iter().copied())
            .collect()
    }

    /// Prepares the VQC plans, including the parameter-shifted unitaries
    /// needed for [`PreparedModel::backward`].
    pub fn prepare(&self) -> PreparedModel<'_> {
        self.prepare_with(VqcPlan::new)
    }

    /// Cheaper preparation for evaluation only.
    pub fn prepare_inference(&self) -> PreparedModel<'_> {
        self.prepare_with(VqcPlan::forward_only)
    }

    fn prepare_with(&self, plan: fn(&VqcParams) -> VqcPlan) -> PreparedModel<'_> {
        let plans = match self {
            DenoiserModel::Classical { .. } => Vec::new(),
            DenoiserModel::Hybrid { vqc, .. } => vec![plan(vqc)],
            DenoiserModel::FullyQuantum { vqcs } => vqcs.iter().map(plan).collect(),
        };
        PreparedModel { model: self, plans }
    }
}

/// Gradient with the same block layout as the model.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub names: Vec<String>,
    pub blocks: Vec<Vec<f64>>,
}

impl GradientBundle {
    pub fn zeros_for(model: &DenoiserModel) -> Self {
        let (names, blocks) = model
            .blocks()
            .into_iter()
            .map(|(n, b)| (n, vec![0.0; b.len()]))
            .unzip();
        Self { names, blocks }
    }

    pub fn is_congruent(&self, model: &DenoiserModel) -> bool {
        let mb = model.blocks();
        mb.len() == self.blocks.len()
            && mb
                .iter()
                .zip(self.names.iter().zip(&self.blocks))
                .all(|((mn, m), (gn, g))| mn == gn && m.len() == g.len())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.blocks.iter_mut().flatten() {
            *v *= s;
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    fn conv_grads(&mut self, first_block: usize, layers: usize) -> Vec<ConvLayerGrad> {
        (0..layers)
            .map(|i| ConvLayerGrad {
                weights: std::mem::take(&mut self.blocks[first_block + 2 * i]),
                bias: std::mem::take(&mut self.blocks[first_block + 2 * i + 1]),
            })
            .collect()
    }

    fn restore_conv(&mut self, first_block: usize, grads: Vec<ConvLayerGrad>) {
        for (i, g) in grads.into_iter().enumerate() {
            self.blocks[first_block + 2 * i] = g.weights;
            self.blocks[first_block + 2 * i + 1] = g.bias;
        }
    }
}

/// A model with its VQC unitaries precomputed.
pub struct PreparedModel<'a> {
    model: &'a DenoiserModel,
    plans: Vec<VqcPlan>,
}

/// Intermediate values of one forward pass.
pub struct ForwardTrace {
    front: Vec<Tensor3>,
    vqc_input: Option<Tensor3>,
    back: Vec<Tensor3>,
    output: Tensor3,
}

impl ForwardTrace {
    pub fn output(&self) -> &Tensor3 {
        &self.output
    }

    pub fn into_output(self) -> Tensor3 {
        self.output
    }
}

fn check_input(x: &Tensor3) -> Result<()> {
    if x.channels() != NUM_CHANNELS {
        return Err(Error::Dimension(format!(
            "denoiser expects {NUM_CHANNELS} channels, got {}",
            x.channels()
        )));
    }
    Ok(())
}

/// Applies a VQC to every raster-order group of four values in each channel.
/// Channel `c` uses `plans[c]` when there is one plan per channel, otherwise
/// the single shared plan.
pub fn vqc_layer_forward(x: &Tensor3, plans: &[VqcPlan]) -> Result<Tensor3> {
    if !x.plane_len().is_multiple_of(QUBITS) {
        return Err(Error::Dimension(format!(
            "channel of {} pixels does not split into groups of {QUBITS}",
            x.plane_len()
        )));
    }
    let mut out = x.clone();
    for c in 0..x.channels() {
        let plan = &plans[if plans.len() == 1 { 0 } else { c }];
        for (src, dst) in x
            .channel(c)
            .chunks_exact(QUBITS)
            .zip(out.channel_mut(c).chunks_exact_mut(QUBITS))
        {
            dst.copy_from_slice(&plan.forward([src[0], src[1], src[2], src[3]]));
        }
    }
    Ok(out)
}

fn vqc_layer_backward(
    x: &Tensor3,
    upstream: &Tensor3,
    plans: &[VqcPlan],
    grads: &mut [Vec<f64>],
) -> Tensor3 {
    let mut dx = Tensor3::zeros(x.channels(), x.height(), x.width());
    for c in 0..x.channels() {
        let idx = if plans.len() == 1 { 0 } else { c };
        let (plan, grad) = (&plans[idx], &mut grads[idx]);
        let groups = x
            .channel(c)
            .chunks_exact(QUBITS)
            .zip(upstream.channel(c).chunks_exact(QUBITS));
        for (g, (src, up)) in groups.enumerate() {
            let gx = plan.backward(
                [src[0], src[1], src[2], src[3]],
                [up[0], up[1], up[2], up[3]],
                grad,
            );
            dx.channel_mut(c)[g * QUBITS..(g + 1) * QUBITS].copy_from_slice(&gx);
        }
    }
    dx
}

impl PreparedModel<'_> {
    pub fn model(&self) -> &DenoiserModel {
        self.model
    }

    pub fn plans(&self) -> &[VqcPlan] {
        &self.plans
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        Ok(self.forward_traced(x)?.output)
    }

    pub fn forward_traced(&self, x: &Tensor3) -> Result<ForwardTrace> {
        check_input(x)?;
        match self.model {
            DenoiserModel::Classical { layers } => {
                let mut acts = conv_forward_cached(x, layers)?;
                let output = acts.last().expect("input cached").clone();
                acts.shrink_to_fit();
                Ok(ForwardTrace {
                    front: acts,
                    vqc_input: None,
                    back: Vec::new(),
                    output,
                })
            }
            DenoiserModel::Hybrid { front, back, .. } => {
                let front_acts = conv_forward_cached(x, front)?;
                let mid_in = front_acts.last().expect("input cached").clone();
                let mid_out = vqc_layer_forward(&mid_in, &self.plans)?;
                let back_acts = conv_forward_cached(&mid_out, back)?;
                let output = back_acts.last().expect("input cached").clone();
                Ok(ForwardTrace {
                    front: front_acts,
                    vqc_input: Some(mid_in),
                    back: back_acts,
                    output,
                })
            }
            DenoiserModel::FullyQuantum { .. } => {
                let output = vqc_layer_forward(x, &self.plans)?;
                Ok(ForwardTrace {
                    front: Vec::new(),
                    vqc_input: Some(x.clone()),
                    back: Vec::new(),
                    output,
                })
            }
        }
    }

    /// Gradient of `Σ upstream ⊙ output` with respect to every parameter.
    pub fn backward(&self, trace: &ForwardTrace, upstream: &Tensor3) -> Result<GradientBundle> {
        if !upstream.same_shape(&trace.output) {
            return Err(Error::Dimension(
                "upstream gradient shape differs from output".into(),
            ));
        }
        if !self.plans.iter().all(VqcPlan::can_differentiate) {
            return Err(Error::InvalidArgument(
                "model was prepared for inference only".into(),
            ));
        }
        let mut grad = GradientBundle::zeros_for(self.model);
        match self.model {
            DenoiserModel::Classical { layers } => {
                let mut g = grad.conv_grads(0, layers.len());
                conv_backward(layers, &trace.front, upstream, &mut g)?;
                grad.restore_conv(0, g);
            }
            DenoiserModel::Hybrid { front, back, .. } => {
                let vqc_block = 2 * front.len();
                let back_first = vqc_block + 1;
                let mut gb = grad.conv_grads(back_first, back.len());
                let d_mid = conv_backward(back, &trace.back, upstream, &mut gb)?;
                grad.restore_conv(back_first, gb);

                let mid_in = trace.vqc_input.as_ref().expect("hybrid trace");
                let d_front_out = vqc_layer_backward(
                    mid_in,
                    &d_mid,
                    &self.plans,
                    std::slice::from_mut(&mut grad.blocks[vqc_block]),
                );

                let mut gf = grad.conv_grads(0, front.len());
                conv_backward(front, &trace.front, &d_front_out, &mut gf)?;
                grad.restore_conv(0, gf);
            }
            DenoiserModel::FullyQuantum { .. } => {
                let x = trace.vqc_input.as_ref().expect("quantum trace");
                vqc_layer_backward(x, upstream, &self.plans, &mut grad.blocks);
            }
        }
        Ok(grad)
    }
}

pub fn model_forward(m: &DenoiserModel, noisy: &Tensor3) -> Result<Tensor3> {
    m.prepare_inference().forward(noisy)
}

pub fn model_backward(
    m: &DenoiserModel,
    noisy: &Tensor3,
    upstream: &Tensor3,
) -> Result<GradientBundle> {
    let prepared = m.prepare();
    let trace = prepared.forward_traced(noisy)?;
    prepared.backward(&trace, upstream)
}
