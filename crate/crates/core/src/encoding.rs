//! Classical pixels to quantum states and back.
//!
//! An image is split into four channels by 2×2 space-to-depth. Each channel is
//! read in raster order, four pixels at a time, and every quadruple is
//! angle-encoded onto four qubits with `Rx(π·x)` applied to `|0000>`. Decoding
//! inverts the angle map through the Z expectations:
//! `x_q = arccos(<Z_q>) / π`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::qlinalg::{C64, ZERO};
use crate::qsim::StateVector;
use crate::tensor::Tensor3;

/// Qubits (and pixels) per encoded group.
pub const GROUP: usize = 4;
pub const NUM_CHANNELS: usize = 4;

const RANGE_TOL: f64 = 1e-9;

/// Single-channel pixel grid. Pixels are stored in single precision.
#[derive(Clone, Debug, PartialEq)]
pub struct JetImage {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

impl JetImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::Dimension(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            pixels: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.pixels
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn count_nonzero(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0.0).count()
    }
}

/// Four `(H/2)×(W/2)` channels; see [`space_to_depth`].
pub type ChannelSet = Tensor3;

/// Per-group 4-qubit states of one channel, in raster order.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedChannel {
    pub groups: Vec<StateVector>,
}

impl EncodedChannel {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Divides by `max_value` and clamps into `[0, 1]`.
pub fn normalize(img: &JetImage, max_value: f64) -> Result<JetImage> {
    if !(max_value > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "normalization max must be positive, got {max_value}"
        )));
    }
    let pixels = img
        .pixels
        .iter()
        .map(|&p| (f64::from(p) / max_value).clamp(0.0, 1.0) as f32)
        .collect();
    JetImage::new(img.height, img.width, pixels)
}

/// Channel `2·dy + dx` holds pixel `(2i + dy, 2j + dx)` at `(i, j)`.
pub fn space_to_depth(img: &JetImage) -> Result<ChannelSet> {
    if !img.height.is_multiple_of(2) || !img.width.is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "channel split needs even dimensions, got {}x{}",
            img.height, img.width
        )));
    }
    let (h, w) = (img.height / 2, img.width / 2);
    let mut out = Tensor3::zeros(NUM_CHANNELS, h, w);
    for dy in 0..2 {
        for dx in 0..2 {
            let c = 2 * dy + dx;
            for i in 0..h {
                for j in 0..w {
                    out.set(c, i, j, f64::from(img.get(2 * i + dy, 2 * j + dx)));
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`space_to_depth`].
pub fn depth_to_space(cs: &ChannelSet) -> Result<JetImage> {
    if cs.channels() != NUM_CHANNELS {
        return Err(Error::Dimension(format!(
            "expected {NUM_CHANNELS} channels, got {}",
            cs.channels()
        )));
    }
    let (h, w) = (cs.height(), cs.width());
    let mut img = JetImage::zeros(2 * h, 2 * w);
    let width = 2 * w;
    for dy in 0..2 {
        for dx in 0..2 {
            let c = 2 * dy + dx;
            for i in 0..h {
                for j in 0..w {
                    img.pixels[(2 * i + dy) * width + 2 * j + dx] = cs.get(c, i, j) as f32;
                }
            }
        }
    }
    Ok(img)
}

fn check_pixel(x: f64) -> Result<f64> {
    if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&x) {
        return Err(Error::InvalidArgument(format!("pixel {x} outside [0, 1]")));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// Product state `⊗_q Rx(π·x_q)|0>`, written out amplitude by amplitude.
pub(crate) fn encode_angles(angles: &[f64; GROUP]) -> Vec<C64> {
    let halves: Vec<(f64, f64)> = angles.iter().map(|a| (a / 2.0).sin_cos()).collect();
    let mut amps = vec![ZERO; 1 << GROUP];
    for (idx, amp) in amps.iter_mut().enumerate() {
        // Rx(θ)|0> = cos(θ/2)|0> - i sin(θ/2)|1>
        let mut mag = 1.0;
        let mut ones = 0;
        for (q, &(s, c)) in halves.iter().enumerate() {
            if idx & (1 << (GROUP - 1 - q)) != 0 {
                mag *= s;
                ones += 1;
            } else {
                mag *= c;
            }
        }
        // (-i)^ones
        *amp = match ones % 4 {
            0 => C64::new(mag, 0.0),
            1 => C64::new(0.0, -mag),
            2 => C64::new(-mag, 0.0),
            _ => C64::new(0.0, mag),
        };
    }
    amps
}

pub fn encode_group(pixels: [f64; GROUP]) -> Result<StateVector> {
    let mut angles = [0.0; GROUP];
    for (a, &x) in angles.iter_mut().zip(&pixels) {
        *a = PI * check_pixel(x)?;
    }
    Ok(StateVector::from_amplitudes_unchecked(encode_angles(
        &angles,
    )))
}

/// Pixel value for a Z expectation; the inverse of the angle map.
pub fn decode_value(z: f64) -> f64 {
    z.clamp(-1.0, 1.0).acos() / PI
}

/// Same map as [`decode_value`] written in the qubit marginals:
/// `arccos(p0 - p1) / π = 2·atan2(√p1, √p0) / π`. Unlike the arccos form it
/// stays accurate for pixels near 0 and 1.
pub fn decode_probabilities(p0: f64, p1: f64) -> f64 {
    2.0 * p1.max(0.0).sqrt().atan2(p0.max(0.0).sqrt()) / PI
}

pub fn decode_group(state: &StateVector) -> Result<[f64; GROUP]> {
    if state.num_qubits() != GROUP {
        return Err(Error::Dimension(format!(
            "decoding needs a {GROUP}-qubit state, got {}",
            state.num_qubits()
        )));
    }
    let p = state.qubit_probabilities();
    Ok(std::array::from_fn(|q| {
        decode_probabilities(p[q].0, p[q].1)
    }))
}

/// Encodes consecutive raster-order quadruples of a channel.
pub fn encode_channel(pixels: &[f64]) -> Result<EncodedChannel> {
    if !pixels.len().is_multiple_of(GROUP) {
        return Err(Error::Dimension(format!(
            "{} pixels do not split into groups of {GROUP}",
            pixels.len()
        )));
    }
    let groups = pixels
        .chunks_exact(GROUP)
        .map(|q| encode_group([q[0], q[1], q[2], q[3]]))
        .collect::<Result<_>>()?;
    Ok(EncodedChannel { groups })
}

pub fn decode_channel(ec: &EncodedChannel) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ec.groups.len() * GROUP);
    for g in &ec.groups {
        out.extend_from_slice(&decode_group(g)?);
    }
    Ok(out)
}
