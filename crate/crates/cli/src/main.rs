use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use qdiff::denoiser::checkpoint::{self, Checkpoint};
use qdiff::denoiser::{ModelConfig, ModelKind};
use qdiff::jetio::{
    line_chart_svg, read_dataset, synth_jets, write_dataset, write_pgm, SyntheticJetConfig,
};
use qdiff::train::{
    fid, generate, prominence_filter, read_metrics_csv, run_training, write_metrics_csv,
    ForwardMode, ScrambleMode, TrainConfig,
};
use qdiff::{Error, RngStream};

mod config;
use config::ConfigFile;

/// Quantum, hybrid and classical denoising diffusion for sparse jet images.
#[derive(Parser)]
#[command(name = "qdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic jet dataset.
    GenData(GenDataArgs),
    /// Train a denoiser; writes a checkpoint and a metrics CSV.
    Train(TrainArgs),
    /// Generate images from a checkpoint.
    Sample(SampleArgs),
    /// FID between two datasets.
    Evaluate { real: PathBuf, generated: PathBuf },
    /// Render loss and FID curves from a metrics CSV.
    Plot {
        metrics: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Keep only the k brightest pixels of every image.
    Postprocess {
        input: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    min_blobs: Option<usize>,
    #[arg(long)]
    max_blobs: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    peak_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Dataset file; the default synthetic dataset when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// classical, hybrid or quantum.
    #[arg(long)]
    model: Option<String>,
    /// VQC layer count.
    #[arg(long)]
    layers: Option<usize>,
    /// Fully quantum model: one VQC per channel.
    #[arg(long)]
    per_channel: bool,
    #[arg(long)]
    zero_init: bool,
    /// quantum or classical corruption.
    #[arg(long)]
    forward: Option<String>,
    /// single or fractional scrambling.
    #[arg(long)]
    scramble: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    beta_start: Option<f64>,
    #[arg(long)]
    beta_end: Option<f64>,
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "model.qdm")]
    checkpoint: PathBuf,
    #[arg(long, default_value = "metrics.csv")]
    metrics: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(clap::Args)]
struct SampleArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 16)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    refine: usize,
    /// Prior to sample from: quantum or classical.
    #[arg(long, default_value = "quantum")]
    forward: String,
    /// Directory for the PGM files and samples.qjet.
    #[arg(long, default_value = "samples")]
    out_dir: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

/// Library errors caused by bad arguments are usage errors; the rest come
/// from the data.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn parse_str<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

const GEN_KEYS: &[&str] = &[
    "count",
    "size",
    "min_blobs",
    "max_blobs",
    "sigma",
    "peak_rate",
    "seed",
];
const TRAIN_KEYS: &[&str] = &[
    "data",
    "epochs",
    "batch_size",
    "lr",
    "seed",
    "model",
    "layers",
    "per_channel",
    "zero_init",
    "forward",
    "scramble",
    "steps",
    "beta_start",
    "beta_end",
    "holdout",
    "refine",
];

fn load_config(path: Option<&Path>, keys: &[&str]) -> Result<ConfigFile, CliError> {
    path.map_or(Ok(ConfigFile::empty()), |p| ConfigFile::load(p, keys))
}

fn gen_data(a: GenDataArgs) -> Result<(), CliError> {
    let file = load_config(a.config.as_deref(), GEN_KEYS)?;
    let d = SyntheticJetConfig::default();
    let cfg = SyntheticJetConfig {
        count: a.count.or(file.usize("count")?).unwrap_or(d.count),
        size: a.size.or(file.usize("size")?).unwrap_or(d.size),
        min_blobs: a
            .min_blobs
            .or(file.usize("min_blobs")?)
            .unwrap_or(d.min_blobs),
        max_blobs: a
            .max_blobs
            .or(file.usize("max_blobs")?)
            .unwrap_or(d.max_blobs),
        sigma: a.sigma.or(file.f64("sigma")?).unwrap_or(d.sigma),
        peak_rate: a
            .peak_rate
            .or(file.f64("peak_rate")?)
            .unwrap_or(d.peak_rate),
        seed: a.seed.or(file.u64("seed")?).unwrap_or(d.seed),
    };
    let images = synth_jets(&cfg)?;
    write_dataset(&a.out, &images)?;
    println!(
        "wrote {} {}x{} images to {}",
        images.len(),
        cfg.size,
        cfg.size,
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let file = load_config(a.config.as_deref(), TRAIN_KEYS)?;
    let d = TrainConfig::default();
    let model = match a.model.clone().or(file.string("model")?) {
        Some(s) => parse_str::<ModelKind>(&s)?,
        None => d.model,
    };
    let forward = match a.forward.clone().or(file.string("forward")?) {
        Some(s) => parse_str::<ForwardMode>(&s)?,
        None => d.forward,
    };
    let scramble = match a.scramble.clone().or(file.string("scramble")?) {
        Some(s) => parse_str::<ScrambleMode>(&s)?,
        None => d.scramble,
    };
    let flag = |set: bool, key: &str| -> Result<bool, CliError> {
        Ok(set || file.bool(key)?.unwrap_or(false))
    };
    let cfg = TrainConfig {
        epochs: a.epochs.or(file.usize("epochs")?).unwrap_or(d.epochs),
        batch_size: a
            .batch_size
            .or(file.usize("batch_size")?)
            .unwrap_or(d.batch_size),
        learning_rate: a.lr.or(file.f64("lr")?).unwrap_or(d.learning_rate),
        seed: a.seed.or(file.u64("seed")?).unwrap_or(d.seed),
        model,
        model_config: ModelConfig {
            vqc_layers: a
                .layers
                .or(file.usize("layers")?)
                .unwrap_or(d.model_config.vqc_layers),
            per_channel_vqc: flag(a.per_channel, "per_channel")?,
            zero_init: flag(a.zero_init, "zero_init")?,
        },
        forward,
        scramble,
        schedule_steps: a.steps.or(file.usize("steps")?).unwrap_or(d.schedule_steps),
        beta_start: a
            .beta_start
            .or(file.f64("beta_start")?)
            .unwrap_or(d.beta_start),
        beta_end: a.beta_end.or(file.f64("beta_end")?).unwrap_or(d.beta_end),
        holdout: a.holdout.or(file.f64("holdout")?).unwrap_or(d.holdout),
        refine: a.refine.or(file.usize("refine")?).unwrap_or(d.refine),
    };
    cfg.validate()?;

    let data = a.data.clone().or(file.string("data")?.map(PathBuf::from));
    let images = match &data {
        Some(p) => read_dataset(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        None => synth_jets(&SyntheticJetConfig::default())?,
    };
    let (height, width) = (images[0].height(), images[0].width());

    let quiet = a.quiet;
    let epochs = cfg.epochs;
    let out = run_training(&cfg, &images, |r| {
        if !quiet {
            eprintln!(
                "epoch {:>3}/{epochs}  loss {:.6}  fid {:.6}",
                r.epoch, r.loss, r.fid
            );
        }
    })
    .map_err(|e| match e {
        Error::InvalidArgument(m) => CliError::Data(m),
        other => CliError::Data(other.to_string()),
    })?;

    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &out.metrics)?;
    fs::write(&a.metrics, csv).map_err(io_err(&a.metrics))?;
    let ck = Checkpoint {
        model: out.model,
        height,
        width,
    };
    checkpoint::save(&a.checkpoint, &ck)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.checkpoint.display())))?;
    let last = out.metrics.last().expect("epochs >= 1");
    println!(
        "{} model, {} train / {} held out; untrained fid {:.6}; final loss {:.6}, fid {:.6}",
        cfg.model, out.train_size, out.holdout_size, out.untrained_fid, last.loss, last.fid
    );
    Ok(())
}

fn sample(a: SampleArgs) -> Result<(), CliError> {
    if a.count == 0 || a.refine == 0 {
        return Err(CliError::Usage(
            "--count and --refine must be at least 1".into(),
        ));
    }
    let mode = parse_str::<ForwardMode>(&a.forward)?;
    let ck = checkpoint::load(&a.checkpoint)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.checkpoint.display())))?;
    let images = generate(
        &ck.model,
        a.count,
        ck.height,
        ck.width,
        a.refine,
        mode,
        &mut RngStream::new(a.seed),
    )?;
    fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    for (i, im) in images.iter().enumerate() {
        write_pgm(a.out_dir.join(format!("sample_{i:04}.pgm")), im)?;
    }
    let set = a.out_dir.join("samples.qjet");
    write_dataset(&set, &images)?;
    println!("wrote {} samples to {}", images.len(), a.out_dir.display());
    Ok(())
}

fn read(p: &Path) -> Result<Vec<qdiff::encoding::JetImage>, CliError> {
    read_dataset(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn evaluate(real: &Path, generated: &Path) -> Result<(), CliError> {
    let score = fid(&read(real)?, &read(generated)?).map_err(|e| CliError::Data(e.to_string()))?;
    println!("{score:.6}");
    Ok(())
}

fn plot(metrics: &Path, out_dir: &Path) -> Result<(), CliError> {
    let f = fs::File::open(metrics).map_err(io_err(metrics))?;
    let recs = read_metrics_csv(BufReader::new(f))
        .map_err(|e| CliError::Data(format!("{}: {e}", metrics.display())))?;
    if recs.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no epochs to plot",
            metrics.display()
        )));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let loss: Vec<(f64, f64)> = recs.iter().map(|r| (r.epoch as f64, r.loss)).collect();
    let fidv: Vec<(f64, f64)> = recs.iter().map(|r| (r.epoch as f64, r.fid)).collect();
    for (name, title, label, pts) in [
        ("loss.svg", "Training loss", "MSE", &loss),
        ("fid.svg", "FID", "FID", &fidv),
    ] {
        let svg = line_chart_svg(title, "epoch", label, pts)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let path = out_dir.join(name);
        fs::write(&path, svg).map_err(io_err(&path))?;
    }
    println!("wrote loss.svg and fid.svg to {}", out_dir.display());
    Ok(())
}

fn postprocess(input: &Path, k: usize, out: &Path) -> Result<(), CliError> {
    let filtered: Vec<_> = read(input)?
        .iter()
        .map(|im| prominence_filter(im, k))
        .collect();
    write_dataset(out, &filtered).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    println!("kept the {k} brightest pixels of {} images", filtered.len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Sample(a) => sample(a),
        Command::Evaluate { real, generated } => evaluate(&real, &generated),
        Command::Plot { metrics, out_dir } => plot(&metrics, &out_dir),
        Command::Postprocess { input, k, out } => postprocess(&input, k, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut err = std::io::stderr().lock();
            match &e {
                CliError::Usage(m) => {
                    let _ = writeln!(err, "error: {m}\n\n{}", Cli::command().render_usage());
                }
                CliError::Data(m) => {
                    let _ = writeln!(err, "error: {m}");
                }
            }
            ExitCode::from(e.code())
        }
    }
}
