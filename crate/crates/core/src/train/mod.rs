//! Training loop, sample generation and evaluation.
//!
//! Training is denoising-autoencoder style: each clean four-channel tensor is
//! corrupted (Haar scrambling by default, Gaussian noise in classical mode),
//! decoded back to pixels, and the model learns to map it to the clean
//! channels under MSE with Adam.

pub mod fid;
pub mod metrics;
pub mod optim;
pub mod postprocess;

use std::str::FromStr;

use crate::denoiser::{DenoiserModel, GradientBundle, ModelConfig, ModelKind, PreparedModel};
use crate::diffusion::{
    classical_forward, gaussian_like, make_schedule, noise_prior_channel, scramble_channel,
    ChannelScrambler, NoiseSchedule, UnitarySpectrum,
};
use crate::encoding::{
    decode_channel, depth_to_space, encode_channel, space_to_depth, ChannelSet, JetImage, GROUP,
    NUM_CHANNELS,
};
use crate::error::{Error, Result};
use crate::par;
use crate::qlinalg::ComplexMatrix;
use crate::rng::RngStream;
use crate::tensor::Tensor3;

pub use fid::{fid, FidReference, Moments};
pub use metrics::{read_metrics_csv, write_metrics_csv, MetricsRecord};
pub use optim::{adam_step, mse_loss, AdamState};
pub use postprocess::prominence_filter;

/// How clean channels are corrupted during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardMode {
    /// Haar scrambling of the encoded channels.
    Quantum,
    /// `√ᾱ_t·x + √(1−ᾱ_t)·ε` at a uniformly drawn step, clamped to `[0,1]`.
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScrambleMode {
    /// The full Haar unitary.
    Single,
    /// `u^s` with `s` drawn uniformly from `(0, 1]` per batch.
    Fractional,
}

impl FromStr for ForwardMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(Self::Quantum),
            "classical" => Ok(Self::Classical),
            _ => Err(Error::InvalidArgument(format!(
                "unknown forward mode `{s}` (quantum, classical)"
            ))),
        }
    }
}

impl FromStr for ScrambleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Self::Single),
            "fractional" => Ok(Self::Fractional),
            _ => Err(Error::InvalidArgument(format!(
                "unknown scramble mode `{s}` (single, fractional)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub model: ModelKind,
    pub model_config: ModelConfig,
    pub forward: ForwardMode,
    pub scramble: ScrambleMode,
    pub schedule_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Fraction of the dataset held out as the FID reference.
    pub holdout: f64,
    /// Denoiser applications per generated sample.
    pub refine: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            learning_rate: 0.02,
            seed: 0,
            model: ModelKind::Hybrid,
            model_config: ModelConfig::default(),
            forward: ForwardMode::Quantum,
            scramble: ScrambleMode::Single,
            schedule_steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
            holdout: 0.2,
            refine: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.model_config.vqc_layers == 0 {
            return bad("VQC layer count must be at least 1");
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return bad("holdout fraction must lie in (0, 1)");
        }
        if self.refine == 0 {
            return bad("refine count must be at least 1");
        }
        self.schedule().map(|_| ())
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        make_schedule(self.schedule_steps, self.beta_start, self.beta_end)
    }
}

/// Per-batch corruption operator.
enum Corruption {
    /// One unitary per channel.
    Unitaries(Vec<ComplexMatrix>),
    Gaussian(NoiseSchedule),
}

impl Corruption {
    fn draw(cfg: &TrainConfig, sched: &NoiseSchedule, rng: &mut RngStream) -> Result<Self> {
        Ok(match cfg.forward {
            ForwardMode::Classical => Corruption::Gaussian(sched.clone()),
            ForwardMode::Quantum => {
                let scrambler = ChannelScrambler::new(rng.next_seed());
                match cfg.scramble {
                    ScrambleMode::Single => Corruption::Unitaries(scrambler.unitaries().to_vec()),
                    ScrambleMode::Fractional => {
                        let s = 1.0 - rng.uniform();
                        let powered = scrambler
                            .unitaries()
                            .iter()
                            .map(|u| Ok(UnitarySpectrum::new(u)?.power(s)))
                            .collect::<Result<_>>()?;
                        Corruption::Unitaries(powered)
                    }
                }
            }
        })
    }

    fn apply(&self, clean: &Tensor3, rng: &mut RngStream) -> Result<Tensor3> {
        match self {
            Corruption::Unitaries(us) => scramble_tensor(clean, us),
            Corruption::Gaussian(sched) => {
                let t = 1 + rng.below(sched.steps());
                let noise = gaussian_like(clean.shape(), rng);
                Ok(classical_forward(clean, t, &noise, sched)?.map(|v| v.clamp(0.0, 1.0)))
            }
        }
    }
}

/// Encodes every channel, applies its unitary, and decodes back to pixels.
pub fn scramble_tensor(clean: &ChannelSet, unitaries: &[ComplexMatrix]) -> Result<ChannelSet> {
    if unitaries.len() != clean.channels() {
        return Err(Error::Dimension(format!(
            "{} unitaries for {} channels",
            unitaries.len(),
            clean.channels()
        )));
    }
    let mut out = clean.clone();
    for (c, u) in unitaries.iter().enumerate() {
        let ec = scramble_channel(&encode_channel(clean.channel(c))?, u)?;
        out.channel_mut(c).copy_from_slice(&decode_channel(&ec)?);
    }
    Ok(out)
}

/// Converts images to the model's channel layout, checking they share a
/// shape compatible with 4-pixel grouping.
pub fn to_channel_sets(images: &[JetImage]) -> Result<Vec<ChannelSet>> {
    let Some(first) = images.first() else {
        return Err(Error::InvalidArgument("empty dataset".into()));
    };
    let (h, w) = (first.height(), first.width());
    if (h / 2) * (w / 2) % GROUP != 0 {
        return Err(Error::Dimension(format!(
            "{h}x{w} images give channels that do not split into {GROUP}-pixel groups"
        )));
    }
    images
        .iter()
        .map(|im| {
            if (im.height(), im.width()) != (h, w) {
                return Err(Error::Dimension("dataset images differ in size".into()));
            }
            if im.pixels().iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidArgument(
                    "training pixels must lie in [0, 1]".into(),
                ));
            }
            space_to_depth(im)
        })
        .collect()
}

/// Sum of per-sample MSE and the accumulated gradient of the batch-mean MSE.
fn batch_gradient(
    prepared: &PreparedModel<'_>,
    pairs: &[(Tensor3, &Tensor3)],
) -> Result<(f64, GradientBundle)> {
    let scale = 1.0 / pairs.len() as f64;
    let per_sample = par::map_slice(pairs, |(noisy, clean)| -> Result<(f64, GradientBundle)> {
        let trace = prepared.forward_traced(noisy)?;
        let y = trace.output();
        let loss = mse_loss(y.as_slice(), clean.as_slice())?;
        let k = 2.0 * scale / y.as_slice().len() as f64;
        let up = Tensor3::new(
            y.channels(),
            y.height(),
            y.width(),
            y.as_slice()
                .iter()
                .zip(clean.as_slice())
                .map(|(a, b)| k * (a - b))
                .collect(),
        )?;
        Ok((loss, prepared.backward(&trace, &up)?))
    });
    let mut total = 0.0;
    let mut grad = GradientBundle::zeros_for(prepared.model());
    for r in per_sample {
        let (l, g) = r?;
        total += l;
        grad.add_assign(&g);
    }
    Ok((total, grad))
}

/// One pass over `data` in a seeded random order. Returns the mean per-sample
/// MSE observed during the epoch.
pub fn train_epoch(
    model: &mut DenoiserModel,
    adam: &mut AdamState,
    data: &[ChannelSet],
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let sched = cfg.schedule()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.below(i + 1));
    }

    let mut total = 0.0;
    for batch in order.chunks(cfg.batch_size) {
        let corruption = Corruption::draw(cfg, &sched, rng)?;
        let seeds: Vec<u64> = batch.iter().map(|_| rng.next_seed()).collect();
        let noisy = par::map_range(batch.len(), |k| {
            corruption.apply(&data[batch[k]], &mut RngStream::new(seeds[k]))
        });
        let pairs = noisy
            .into_iter()
            .zip(batch)
            .map(|(n, &i)| n.map(|n| (n, &data[i])))
            .collect::<Result<Vec<_>>>()?;

        let prepared = model.prepare();
        let (loss, grad) = batch_gradient(&prepared, &pairs)?;
        drop(prepared);
        adam_step(&mut model.blocks_mut(), &grad, adam, cfg.learning_rate)?;
        total += loss;
    }
    Ok(total / data.len() as f64)
}

/// Starting points for generation: decoded Haar-random group states, or
/// clamped Gaussian noise for models trained in classical mode.
pub fn draw_prior(
    mode: ForwardMode,
    count: usize,
    height: usize,
    width: usize,
    rng: &mut RngStream,
) -> Result<Vec<ChannelSet>> {
    if !height.is_multiple_of(2)
        || !width.is_multiple_of(2)
        || !((height / 2) * (width / 2)).is_multiple_of(GROUP)
    {
        return Err(Error::Dimension(format!(
            "cannot generate {height}x{width} images"
        )));
    }
    let (h, w) = (height / 2, width / 2);
    (0..count)
        .map(|_| match mode {
            ForwardMode::Quantum => {
                let mut t = Tensor3::zeros(NUM_CHANNELS, h, w);
                for c in 0..NUM_CHANNELS {
                    let ec = noise_prior_channel(h * w / GROUP, rng);
                    t.channel_mut(c).copy_from_slice(&decode_channel(&ec)?);
                }
                Ok(t)
            }
            ForwardMode::Classical => {
                Ok(gaussian_like((NUM_CHANNELS, h, w), rng).map(|v| v.clamp(0.0, 1.0)))
            }
        })
        .collect()
}

/// Applies the denoiser `refine` times to each prior draw and reassembles
/// full images.
pub fn denoise_priors(
    model: &DenoiserModel,
    priors: &[ChannelSet],
    refine: usize,
) -> Result<Vec<JetImage>> {
    let prepared = model.prepare_inference();
    par::map_slice(priors, |p| {
        let mut x = p.clone();
        for _ in 0..refine {
            x = prepared.forward(&x)?;
        }
        depth_to_space(&x)
    })
    .into_iter()
    .collect()
}

pub fn generate(
    model: &DenoiserModel,
    count: usize,
    height: usize,
    width: usize,
    refine: usize,
    mode: ForwardMode,
    rng: &mut RngStream,
) -> Result<Vec<JetImage>> {
    let priors = draw_prior(mode, count, height, width, rng)?;
    denoise_priors(model, &priors, refine)
}

/// Result of a full training run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub model: DenoiserModel,
    pub metrics: Vec<MetricsRecord>,
    /// FID of the freshly initialised model against the held-out set.
    pub untrained_fid: f64,
    pub train_size: usize,
    pub holdout_size: usize,
}

/// Splits off the held-out set, trains for `cfg.epochs` and scores every
/// epoch against the held-out images with a fixed set of prior draws.
/// `on_epoch` sees each record as it is produced.
pub fn run_training(
    cfg: &TrainConfig,
    images: &[JetImage],
    mut on_epoch: impl FnMut(&MetricsRecord),
) -> Result<RunOutput> {
    cfg.validate()?;
    let all = to_channel_sets(images)?;
    let n = all.len();
    let holdout_size =
        ((n as f64 * cfg.holdout).round() as usize).clamp(2, n.saturating_sub(1).max(2));
    if n < holdout_size + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 images to split, got {n}"
        )));
    }

    let mut root = RngStream::new(cfg.seed);
    let mut split_rng = root.fork();
    let mut init_rng = root.fork();
    let mut train_rng = root.fork();
    let mut gen_rng = root.fork();

    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, split_rng.below(i + 1));
    }
    let (held_idx, train_idx) = order.split_at(holdout_size);
    let held: Vec<JetImage> = held_idx.iter().map(|&i| images[i].clone()).collect();
    let train: Vec<ChannelSet> = train_idx.iter().map(|&i| all[i].clone()).collect();

    let reference = FidReference::from_images(&held)?;
    let (h, w) = (images[0].height(), images[0].width());
    let priors = draw_prior(cfg.forward, holdout_size, h, w, &mut gen_rng)?;

    let mut model = DenoiserModel::init(cfg.model, &cfg.model_config, &mut init_rng);
    let mut adam = AdamState::new(&model);
    let untrained_fid = reference.score_images(&denoise_priors(&model, &priors, cfg.refine)?)?;

    let mut metrics = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let loss = train_epoch(&mut model, &mut adam, &train, cfg, &mut train_rng)?;
        let fid = reference.score_images(&denoise_priors(&model, &priors, cfg.refine)?)?;
        let rec = MetricsRecord { epoch, loss, fid };
        on_epoch(&rec);
        metrics.push(rec);
    }
    Ok(RunOutput {
        model,
        metrics,
        untrained_fid,
        train_size: train.len(),
        holdout_size,
    })
}
