//! Policy checkpoints: magic `SGPI`, `u32` version, `u32` tensor count, then
//! per tensor a `u16` name length, the name, `u32` rows, `u32` cols and `f32`
//! row-major data, all little-endian. Names are `actor.l{i}.{w,b}` and
//! `critic.l{i}.{w,b}`.

use super::mlp::Mlp;
use super::ppo::Policy;
use super::{ScanpathError, ScanpathResult};
use ndarray::Array2;
use std::collections::BTreeMap;
use std::path::Path;

const MAGIC: &[u8; 4] = b"SGPI";
const VERSION: u32 = 1;

pub fn encode_policy(p: &Policy) -> Vec<u8> {
    let tensors: Vec<(String, &Array2<f64>)> = [("actor", &p.actor), ("critic", &p.critic)]
        .into_iter()
        .flat_map(|(pre, net)| net.tensors().into_iter().map(move |(n, t)| (format!("{pre}.{n}"), t)))
        .collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize) -> ScanpathResult<&'a [u8]> {
    let end = pos.checked_add(n).filter(|&e| e <= buf.len()).ok_or_else(|| ScanpathError::Format("truncated".into()))?;
    let s = &buf[*pos..end];
    *pos = end;
    Ok(s)
}

fn u32_at(buf: &[u8], pos: &mut usize) -> ScanpathResult<u32> {
    Ok(u32::from_le_bytes(take(buf, pos, 4)?.try_into().unwrap()))
}

pub fn decode_policy(buf: &[u8]) -> ScanpathResult<Policy> {
    let mut pos = 0;
    if take(buf, &mut pos, 4)? != MAGIC {
        return Err(ScanpathError::Format("bad magic".into()));
    }
    let version = u32_at(buf, &mut pos)?;
    if version != VERSION {
        return Err(ScanpathError::Format(format!("unsupported version {version}")));
    }
    let count = u32_at(buf, &mut pos)? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(take(buf, &mut pos, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(buf, &mut pos, len)?.to_vec()).map_err(|_| ScanpathError::Format("tensor name".into()))?;
        let rows = u32_at(buf, &mut pos)? as usize;
        let cols = u32_at(buf, &mut pos)? as usize;
        let bytes = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| ScanpathError::Format("tensor size".into()))?;
        let data = take(buf, &mut pos, bytes)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        tensors.insert(name, Array2::from_shape_vec((rows, cols), data).unwrap());
    }
    if pos != buf.len() {
        return Err(ScanpathError::Format("trailing bytes".into()));
    }
    let mut policy = Policy::init(0);
    for (pre, net) in [("actor", &mut policy.actor), ("critic", &mut policy.critic)] {
        fill(net, pre, &mut tensors)?;
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(ScanpathError::Format(format!("unexpected tensor {extra}")));
    }
    Ok(policy)
}

fn fill(net: &mut Mlp, prefix: &str, tensors: &mut BTreeMap<String, Array2<f64>>) -> ScanpathResult<()> {
    let names: Vec<String> = net.tensors().into_iter().map(|(n, _)| format!("{prefix}.{n}")).collect();
    for (name, slot) in names.into_iter().zip(net.tensors_mut()) {
        let t = tensors.remove(&name).ok_or_else(|| ScanpathError::Format(format!("missing tensor {name}")))?;
        if t.dim() != slot.dim() {
            return Err(ScanpathError::Format(format!("{name} is {:?}, expected {:?}", t.dim(), slot.dim())));
        }
        *slot = t;
    }
    Ok(())
}

pub fn save_policy(path: &Path, p: &Policy) -> ScanpathResult<()> {
    std::fs::write(path, encode_policy(p))?;
    Ok(())
}

pub fn load_policy(path: &Path) -> ScanpathResult<Policy> {
    decode_policy(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_rounds_to_f32() {
        let p = Policy::init(6);
        let bytes = encode_policy(&p);
        assert_eq!(&bytes[..4], b"SGPI");
        let q = decode_policy(&bytes).unwrap();
        assert_eq!(q.actor.weights[1][[3, 4]], p.actor.weights[1][[3, 4]] as f32 as f64);
        assert_eq!(encode_policy(&q), bytes);
        assert!(decode_policy(&bytes[..bytes.len() - 2]).is_err());
    }
}
