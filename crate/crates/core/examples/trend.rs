//! Trains each model kind on the default synthetic dataset and prints the
//! first/last epoch loss and FID.
//!
//! ```text
//! cargo run --release --example trend -- [epochs] [seeds] [count]
//! ```

use std::time::Instant;

use qdiff::denoiser::ModelKind;
use qdiff::jetio::{synth_jets, SyntheticJetConfig};
use qdiff::train::{run_training, TrainConfig};

fn main() -> qdiff::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let epochs = args.first().copied().unwrap_or(50);
    let seeds = args.get(1).copied().unwrap_or(1);
    let count = args.get(2).copied().unwrap_or(512);
    let images = synth_jets(&SyntheticJetConfig {
        count,
        ..Default::default()
    })?;
    for kind in ModelKind::ALL {
        for seed in 0..seeds as u64 {
            let cfg = TrainConfig {
                epochs,
                seed,
                model: kind,
                ..Default::default()
            };
            let t = Instant::now();
            let out = run_training(&cfg, &images, |_| {})?;
            let (first, last) = (out.metrics[0], out.metrics[out.metrics.len() - 1]);
            println!(
                "{kind:>9} seed {seed}: loss {:.5} -> {:.5} ({:.2}x)  fid untrained {:.3} -> {:.3}  [{:.1}s]",
                first.loss,
                last.loss,
                last.loss / first.loss,
                out.untrained_fid,
                last.fid,
                t.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
