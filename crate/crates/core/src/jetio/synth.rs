use rand_distr::{Distribution, Exp};

use crate::encoding::JetImage;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Gaussian-blob stand-in for calorimeter jet images.
///
/// Each image gets a uniform number of blobs in `min_blobs..=max_blobs`,
/// centred on uniform integer pixels, with exponentially distributed peak
/// heights. The sum is divided by its maximum, so the brightest pixel is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticJetConfig {
    pub count: usize,
    pub size: usize,
    pub min_blobs: usize,
    pub max_blobs: usize,
    /// Blob standard deviation in pixels.
    pub sigma: f64,
    /// Rate of the exponential peak distribution.
    pub peak_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticJetConfig {
    fn default() -> Self {
        Self {
            count: 512,
            size: 16,
            min_blobs: 1,
            max_blobs: 3,
            sigma: 0.6,
            peak_rate: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticJetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.count == 0 {
            return bad("sample count must be at least 1".into());
        }
        if self.size == 0 || !self.size.is_multiple_of(2) {
            return bad(format!(
                "image size {} must be even and positive",
                self.size
            ));
        }
        if self.size > u16::MAX as usize {
            return bad(format!("image size {} too large", self.size));
        }
        if self.min_blobs > self.max_blobs {
            return bad(format!(
                "min blobs {} exceeds max blobs {}",
                self.min_blobs, self.max_blobs
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("blob width {} must be positive", self.sigma));
        }
        if !(self.peak_rate > 0.0 && self.peak_rate.is_finite()) {
            return bad(format!("peak rate {} must be positive", self.peak_rate));
        }
        Ok(())
    }
}

pub fn synth_jets(cfg: &SyntheticJetConfig) -> Result<Vec<JetImage>> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed);
    let peaks = Exp::new(cfg.peak_rate).expect("validated rate");
    let n = cfg.size;
    let inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    let mut out = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let blobs = cfg.min_blobs + rng.below(cfg.max_blobs - cfg.min_blobs + 1);
        let mut acc = vec![0.0f64; n * n];
        for _ in 0..blobs {
            let (cy, cx) = (rng.below(n) as f64, rng.below(n) as f64);
            // Tiny floor keeps a zero draw from producing an all-zero image.
            let peak: f64 = peaks.sample(&mut rng).max(1e-6);
            for (k, v) in acc.iter_mut().enumerate() {
                let (y, x) = ((k / n) as f64, (k % n) as f64);
                *v += peak * (-((y - cy).powi(2) + (x - cx).powi(2)) * inv).exp();
            }
        }
        let max = acc.iter().copied().fold(0.0, f64::max);
        let px = acc
            .iter()
            .map(|&v| {
                if max > 0.0 {
                    (v / max).clamp(0.0, 1.0) as f32
                } else {
                    0.0
                }
            })
            .collect();
        out.push(JetImage::new(n, n, px)?);
    }
    Ok(out)
}

/// Fraction of pixels below `threshold`, over all images.
pub fn sparsity(images: &[JetImage], threshold: f32) -> f64 {
    let total: usize = images.iter().map(JetImage::len).sum();
    if total == 0 {
        return 1.0;
    }
    let low: usize = images
        .iter()
        .map(|im| im.pixels().iter().filter(|&&p| p < threshold).count())
        .sum();
    low as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_blobs_gives_zero_images() {
        let cfg = SyntheticJetConfig {
            count: 5,
            min_blobs: 0,
            max_blobs: 0,
            ..Default::default()
        };
        assert!(synth_jets(&cfg)
            .unwrap()
            .iter()
            .all(|im| im.count_nonzero() == 0));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SyntheticJetConfig {
            count: 20,
            ..Default::default()
        };
        assert_eq!(synth_jets(&cfg).unwrap(), synth_jets(&cfg).unwrap());
        let other = SyntheticJetConfig {
            seed: 1,
            ..cfg.clone()
        };
        assert_ne!(synth_jets(&cfg).unwrap(), synth_jets(&other).unwrap());
    }

    #[test]
    fn default_is_sparse_and_normalised() {
        let cfg = SyntheticJetConfig {
            count: 100,
            ..Default::default()
        };
        let imgs = synth_jets(&cfg).unwrap();
        let s = sparsity(&imgs, 0.01);
        assert!(s >= 0.9, "sparsity {s}");
        for im in &imgs {
            assert_eq!((im.height(), im.width()), (16, 16));
            let max = im.pixels().iter().copied().fold(0.0f32, f32::max);
            assert!((max - 1.0).abs() < 1e-6);
            assert!(im.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SyntheticJetConfig {
                count: 0,
                ..Default::default()
            },
            SyntheticJetConfig {
                size: 15,
                ..Default::default()
            },
            SyntheticJetConfig {
                sigma: 0.0,
                ..Default::default()
            },
            SyntheticJetConfig {
                min_blobs: 4,
                ..Default::default()
            },
        ] {
            assert!(synth_jets(&cfg).is_err());
        }
    }
}
