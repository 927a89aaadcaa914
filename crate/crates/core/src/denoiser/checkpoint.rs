//! Binary model checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "QDMW"  u16 version  u8 kind  u16 height  u16 width
//! u16 n_front  { u16 out, u16 in, u16 k, u8 act } * n_front
//! u16 n_vqc    { u16 layers } * n_vqc
//! u16 n_back   { u16 out, u16 in, u16 k, u8 act } * n_back
//! u32 n_params  f64 * n_params
//! u32 crc32 of every preceding byte
//! ```
//!
//! Classical models store their stack as the front section.

use std::io::{Read, Write};
use std::path::Path;

use super::conv::{Activation, ConvLayer};
use super::model::{DenoiserModel, ModelKind};
use super::vqc::VqcParams;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QDMW";
pub const VERSION: u16 = 1;

/// A model plus the image size it was trained for.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: DenoiserModel,
    pub height: usize,
    pub width: usize,
}

fn put_u16(buf: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v =
        u16::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds u16")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_convs(buf: &mut Vec<u8>, layers: &[ConvLayer]) -> Result<()> {
    put_u16(buf, layers.len(), "layer count")?;
    for l in layers {
        put_u16(buf, l.out_ch, "channels")?;
        put_u16(buf, l.in_ch, "channels")?;
        put_u16(buf, l.kernel, "kernel")?;
        buf.push(l.activation.tag());
    }
    Ok(())
}

pub fn encode(ck: &Checkpoint) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(ck.model.kind().tag());
    put_u16(&mut buf, ck.height, "height")?;
    put_u16(&mut buf, ck.width, "width")?;

    let (front, vqcs, back): (&[ConvLayer], Vec<&VqcParams>, &[ConvLayer]) = match &ck.model {
        DenoiserModel::Classical { layers } => (layers, vec![], &[]),
        DenoiserModel::Hybrid { front, vqc, back } => (front, vec![vqc], back),
        DenoiserModel::FullyQuantum { vqcs } => (&[], vqcs.iter().collect(), &[]),
    };
    put_convs(&mut buf, front)?;
    put_u16(&mut buf, vqcs.len(), "vqc count")?;
    for v in &vqcs {
        put_u16(&mut buf, v.layers(), "vqc layers")?;
    }
    put_convs(&mut buf, back)?;

    let params = ck.model.flat_params();
    let n = u32::try_from(params.len())
        .map_err(|_| Error::InvalidArgument("too many parameters".into()))?;
    buf.extend_from_slice(&n.to_le_bytes());
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(format!("checkpoint ends inside {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<usize> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]) as usize)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}

struct ConvShape {
    out_ch: usize,
    in_ch: usize,
    kernel: usize,
    activation: Activation,
}

fn get_convs(cur: &mut Cursor<'_>) -> Result<Vec<ConvShape>> {
    let n = cur.u16("layer count")?;
    (0..n)
        .map(|_| {
            let out_ch = cur.u16("conv shape")?;
            let in_ch = cur.u16("conv shape")?;
            let kernel = cur.u16("conv shape")?;
            let tag = cur.u8("activation")?;
            let activation = Activation::from_tag(tag)
                .ok_or_else(|| Error::Malformed(format!("unknown activation tag {tag}")))?;
            Ok(ConvShape {
                out_ch,
                in_ch,
                kernel,
                activation,
            })
        })
        .collect()
}

fn build_convs(
    shapes: &[ConvShape],
    params: &mut impl Iterator<Item = f64>,
) -> Result<Vec<ConvLayer>> {
    shapes
        .iter()
        .map(|s| {
            let nw = s.out_ch * s.in_ch * s.kernel * s.kernel;
            let w: Vec<f64> = params.by_ref().take(nw).collect();
            let b: Vec<f64> = params.by_ref().take(s.out_ch).collect();
            ConvLayer::new(s.out_ch, s.in_ch, s.kernel, w, b, s.activation)
                .map_err(|e| Error::Malformed(e.to_string()))
        })
        .collect()
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic { expected: "QDMW" });
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let version = cur.u16("header")? as u16;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    // Verify the checksum before trusting any length field further on.
    if bytes.len() < 4 + 2 + 4 {
        return Err(Error::Truncated(
            "checkpoint shorter than its header".into(),
        ));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Crc { stored, computed });
    }
    let mut cur = Cursor {
        bytes: body,
        pos: cur.pos,
    };

    let tag = cur.u8("header")?;
    let kind = ModelKind::from_tag(tag)
        .ok_or_else(|| Error::Malformed(format!("unknown model kind tag {tag}")))?;
    let height = cur.u16("header")?;
    let width = cur.u16("header")?;
    let front = get_convs(&mut cur)?;
    let n_vqc = cur.u16("vqc count")?;
    let vqc_layers = (0..n_vqc)
        .map(|_| cur.u16("vqc layers"))
        .collect::<Result<Vec<_>>>()?;
    let back = get_convs(&mut cur)?;
    let n = cur.u32("parameter count")?;
    let raw = cur.take(
        n.checked_mul(8)
            .ok_or_else(|| Error::Malformed("parameter count".into()))?,
        "parameters",
    )?;
    if cur.pos != body.len() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes",
            body.len() - cur.pos
        )));
    }

    let expected: usize = front
        .iter()
        .chain(&back)
        .map(|s| s.out_ch * (s.in_ch * s.kernel * s.kernel + 1))
        .sum::<usize>()
        + vqc_layers.iter().map(|l| l * 12).sum::<usize>();
    if expected != n {
        return Err(Error::Malformed(format!(
            "header implies {expected} parameters, payload has {n}"
        )));
    }
    let mut params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));

    let front_layers = build_convs(&front, &mut params)?;
    let mut vqcs = Vec::with_capacity(n_vqc);
    for &l in &vqc_layers {
        let angles: Vec<f64> = params.by_ref().take(l * 12).collect();
        vqcs.push(VqcParams::new(l, angles).map_err(|e| Error::Malformed(e.to_string()))?);
    }
    let back_layers = build_convs(&back, &mut params)?;

    let model = match (kind, vqcs.len(), back_layers.is_empty()) {
        (ModelKind::Classical, 0, true) => DenoiserModel::Classical {
            layers: front_layers,
        },
        (ModelKind::Hybrid, 1, _) => DenoiserModel::Hybrid {
            front: front_layers,
            vqc: vqcs.pop().expect("one vqc"),
            back: back_layers,
        },
        (ModelKind::FullyQuantum, 1.., true) if front_layers.is_empty() => {
            DenoiserModel::FullyQuantum { vqcs }
        }
        _ => {
            return Err(Error::Malformed(format!(
                "sections do not form a {kind} model"
            )))
        }
    };
    Ok(Checkpoint {
        model,
        height,
        width,
    })
}

pub fn save(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let bytes = encode(ck)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
