//! Binary interchange formats, all little-endian.
//!
//! `.featb` per-vertex field: `b"SGFT"`, `u32` version 1, `u64` N, `u32` D,
//! N*D `f32` row-major, N `u16` coverage counts.
//!
//! `.pxf` per-pixel map: `b"SGPX"`, `u32` version 1, `u32` H, `u32` W,
//! `u32` D, H*W*D `f32` row-major.

use super::{FeatureField, PixelFeatureMap, UnprojectError, UnprojectResult};
use std::path::Path;

const FEATB_MAGIC: &[u8; 4] = b"SGFT";
const PXF_MAGIC: &[u8; 4] = b"SGPX";
const VERSION: u32 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> UnprojectResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            UnprojectError::Format(format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> UnprojectResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> UnprojectResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4]) -> UnprojectResult<()> {
        if self.take(4)? != magic {
            return Err(UnprojectError::Format(format!("bad magic, expected {:?}", String::from_utf8_lossy(magic))));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(UnprojectError::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn f32s(&mut self, count: usize) -> UnprojectResult<Vec<f32>> {
        let bytes = self.take(count.checked_mul(4).ok_or_else(|| UnprojectError::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> UnprojectResult<()> {
        if self.pos != self.bytes.len() {
            return Err(UnprojectError::Format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn encode_featb(field: &FeatureField) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + field.data().len() * 4 + field.len() * 2);
    out.extend_from_slice(FEATB_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(field.len() as u64).to_le_bytes());
    out.extend_from_slice(&(field.dim() as u32).to_le_bytes());
    for v in field.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for c in field.coverage() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

pub fn decode_featb(bytes: &[u8]) -> UnprojectResult<FeatureField> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(FEATB_MAGIC)?;
    let n = r.u64()? as usize;
    let dim = r.u32()? as usize;
    let data = r.f32s(n.checked_mul(dim).ok_or_else(|| UnprojectError::Format("size overflow".into()))?)?;
    let coverage = r
        .take(n * 2)?
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    r.finish()?;
    FeatureField::new(n, dim, data, coverage)
}

pub fn write_featb(path: &Path, field: &FeatureField) -> UnprojectResult<()> {
    Ok(std::fs::write(path, encode_featb(field))?)
}

pub fn read_featb(path: &Path) -> UnprojectResult<FeatureField> {
    decode_featb(&std::fs::read(path)?)
}

pub fn encode_pxf(map: &PixelFeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + map.data().len() * 4);
    out.extend_from_slice(PXF_MAGIC);
    for v in [VERSION, map.height() as u32, map.width() as u32, map.dim() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in map.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_pxf(bytes: &[u8]) -> UnprojectResult<PixelFeatureMap> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(PXF_MAGIC)?;
    let (h, w, d) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let data = r.f32s(h * w * d)?;
    r.finish()?;
    PixelFeatureMap::new(h, w, d, data)
}

pub fn write_pxf(path: &Path, map: &PixelFeatureMap) -> UnprojectResult<()> {
    Ok(std::fs::write(path, encode_pxf(map))?)
}

pub fn read_pxf(path: &Path) -> UnprojectResult<PixelFeatureMap> {
    decode_pxf(&std::fs::read(path)?)
}
