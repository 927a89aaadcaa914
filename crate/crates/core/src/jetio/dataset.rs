//! `.qjet` dataset files.
//!
//! ```text
//! "QJET"  u16 version  u32 count  u16 height  u16 width
//! f32 pixels, count·height·width, sample-major then row-major
//! u32 crc32 of the pixel payload
//! ```
//!
//! Everything is little-endian.

use std::path::Path;

use crate::encoding::JetImage;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QJET";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 2 + 2;

pub fn encode_dataset(images: &[JetImage]) -> Result<Vec<u8>> {
    let Some(first) = images.first() else {
        return Err(Error::InvalidArgument(
            "cannot write an empty dataset".into(),
        ));
    };
    let (h, w) = (first.height(), first.width());
    let h16 =
        u16::try_from(h).map_err(|_| Error::InvalidArgument(format!("height {h} exceeds u16")))?;
    let w16 =
        u16::try_from(w).map_err(|_| Error::InvalidArgument(format!("width {w} exceeds u16")))?;
    let count = u32::try_from(images.len())
        .map_err(|_| Error::InvalidArgument("too many images".into()))?;

    let mut buf = Vec::with_capacity(HEADER_LEN + images.len() * h * w * 4 + 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&h16.to_le_bytes());
    buf.extend_from_slice(&w16.to_le_bytes());
    for (i, im) in images.iter().enumerate() {
        if (im.height(), im.width()) != (h, w) {
            return Err(Error::Dimension(format!(
                "image {i} is {}x{}, expected {h}x{w}",
                im.height(),
                im.width()
            )));
        }
        if let Some(p) = im.pixels().iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "image {i} has invalid pixel {p}"
            )));
        }
        for p in im.pixels() {
            buf.extend_from_slice(&p.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf[HEADER_LEN..]);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<JetImage>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic { expected: "QJET" });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!(
            "header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let count = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let (h, w) = (u16_at(10) as usize, u16_at(12) as usize);

    let payload_len = count
        .checked_mul(h * w * 4)
        .ok_or_else(|| Error::Malformed("payload size overflows".into()))?;
    let expected = HEADER_LEN + payload_len + 4;
    if bytes.len() < expected {
        return Err(Error::Truncated(format!(
            "expected {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(Error::Malformed(format!(
            "{} trailing bytes",
            bytes.len() - expected
        )));
    }
    let payload = &bytes[HEADER_LEN..HEADER_LEN + payload_len];
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Crc { stored, computed });
    }

    let pixels: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(p) = pixels.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::Malformed(format!("invalid pixel value {p}")));
    }
    if h * w == 0 {
        return Ok(vec![JetImage::zeros(h, w); count]);
    }
    pixels
        .chunks_exact(h * w)
        .map(|c| JetImage::new(h, w, c.to_vec()))
        .collect()
}

pub fn write_dataset(path: impl AsRef<Path>, images: &[JetImage]) -> Result<()> {
    std::fs::write(path, encode_dataset(images)?)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<JetImage>> {
    decode_dataset(&std::fs::read(path)?)
}
