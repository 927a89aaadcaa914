//! Dataset files, synthetic jets, cropping and image/plot output.

pub mod dataset;
pub mod output;
pub mod synth;

pub use dataset::{read_dataset, write_dataset};
pub use output::{line_chart_svg, write_pgm};
pub use synth::{synth_jets, SyntheticJetConfig};

use crate::encoding::JetImage;
use crate::error::{Error, Result};

/// Centred `h×w` window; offsets round down when the margin is odd.
pub fn center_crop(img: &JetImage, h: usize, w: usize) -> Result<JetImage> {
    if h > img.height() || w > img.width() {
        return Err(Error::InvalidArgument(format!(
            "cannot crop {}x{} to {h}x{w}",
            img.height(),
            img.width()
        )));
    }
    let (oy, ox) = ((img.height() - h) / 2, (img.width() - w) / 2);
    let px = (0..h)
        .flat_map(|y| (0..w).map(move |x| (y, x)))
        .map(|(y, x)| img.get(oy + y, ox + x))
        .collect();
    JetImage::new(h, w, px)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> JetImage {
        JetImage::new(h, w, (0..h * w).map(|k| k as f32).collect()).unwrap()
    }

    #[test]
    fn crop_cases() {
        let img = ramp(5, 3);
        assert_eq!(center_crop(&img, 5, 3).unwrap(), img);

        // Rows/cols 1..=2 of a 4x4 ramp.
        let c = center_crop(&ramp(4, 4), 2, 2).unwrap();
        assert_eq!(c.pixels(), &[5.0, 6.0, 9.0, 10.0]);

        let big = ramp(125, 125);
        let c = center_crop(&big, 16, 16).unwrap();
        assert_eq!(c.get(0, 0), big.get(54, 54));
        assert_eq!(c.get(15, 15), big.get(69, 69));

        assert!(center_crop(&img, 6, 3).is_err());
    }
}
