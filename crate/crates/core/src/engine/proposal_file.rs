//! Binary proposal-feature records.
//!
//! Little-endian layout:
//!
//! ```text
//! header  "OPSF" | version u16 | feature_dim u32 | record_count u64
//! record  image_id u64 | x y w h f32×4 | objectness f32 | in_void u8 | pad u8×3 | feature f32×D
//! ```
//!
//! Boxes are rounded to integer pixel corners on read.

use std::io::{Read, Write};

use super::EngineError;
use crate::types::BoundingBox;

pub const MAGIC: &[u8; 4] = b"OPSF";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalRecord {
    pub image_id: u64,
    pub bbox: BoundingBox,
    pub objectness: f32,
    pub feature: Vec<f32>,
    pub in_void: bool,
}

pub fn record_len(dim: usize) -> usize {
    8 + 16 + 4 + 4 + 4 * dim
}

fn format_err(msg: impl Into<String>) -> EngineError {
    EngineError::Format(msg.into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
}

fn to_box(v: [f32; 4], index: u64) -> Result<BoundingBox, EngineError> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(format_err(format!("record {index}: non-finite box")));
    }
    let [x, y, w, h] = v.map(|c| f64::from(c).round());
    let in_i32 = |c: f64| c >= f64::from(i32::MIN) && c <= f64::from(i32::MAX);
    if !in_i32(x) || !in_i32(y) || !(1.0..=f64::from(u32::MAX)).contains(&w) || !(1.0..=f64::from(u32::MAX)).contains(&h) {
        return Err(format_err(format!("record {index}: box {v:?} out of range")));
    }
    Ok(BoundingBox::new(x as i32, y as i32, w as u32, h as u32).expect("extent checked"))
}

/// Parses a whole proposal file. Returns the feature dimension and records.
pub fn read_proposals(bytes: &[u8]) -> Result<(usize, Vec<ProposalRecord>), EngineError> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    if dim == 0 {
        return Err(format_err("feature_dim must be positive"));
    }
    let body = bytes.len() - HEADER_LEN;
    let expected = (count as u128) * record_len(dim) as u128;
    if expected != body as u128 {
        return Err(format_err(format!(
            "{count} records of dim {dim} need {expected} bytes, found {body}"
        )));
    }
    let mut cur = Cursor { bytes, pos: HEADER_LEN };
    let mut records = Vec::with_capacity(count as usize);
    for index in 0..count {
        let image_id = cur.u64();
        let raw_box = [cur.f32(), cur.f32(), cur.f32(), cur.f32()];
        let bbox = to_box(raw_box, index)?;
        let objectness = cur.f32();
        if !(0.0..=1.0).contains(&objectness) {
            return Err(format_err(format!("record {index}: objectness {objectness} outside [0, 1]")));
        }
        let [in_void, p0, p1, p2] = cur.take::<4>();
        if in_void > 1 || (p0, p1, p2) != (0, 0, 0) {
            return Err(format_err(format!("record {index}: bad flag or padding bytes")));
        }
        let feature: Vec<f32> = (0..dim).map(|_| cur.f32()).collect();
        if feature.iter().any(|f| !f.is_finite()) {
            return Err(format_err(format!("record {index}: non-finite feature")));
        }
        records.push(ProposalRecord {
            image_id,
            bbox,
            objectness,
            feature,
            in_void: in_void == 1,
        });
    }
    Ok((dim, records))
}

pub fn read_proposals_from(mut r: impl Read) -> Result<(usize, Vec<ProposalRecord>), EngineError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    read_proposals(&bytes)
}

pub fn write_proposals(
    mut w: impl Write,
    dim: usize,
    records: &[ProposalRecord],
) -> Result<(), EngineError> {
    let dim32 = u32::try_from(dim).map_err(|_| format_err("feature_dim exceeds u32"))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + records.len() * record_len(dim));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&dim32.to_le_bytes());
    buf.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in records {
        if r.feature.len() != dim {
            return Err(EngineError::DimensionMismatch {
                expected: dim,
                actual: r.feature.len(),
            });
        }
        buf.extend_from_slice(&r.image_id.to_le_bytes());
        for c in [r.bbox.x as f32, r.bbox.y as f32, r.bbox.w as f32, r.bbox.h as f32] {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        buf.extend_from_slice(&r.objectness.to_le_bytes());
        buf.extend_from_slice(&[u8::from(r.in_void), 0, 0, 0]);
        for f in &r.feature {
            buf.extend_from_slice(&f.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}
