//! Binary parameter checkpoints.
//!
//! Layout, little-endian: magic `SGWT`, `u32` version, `u32` tensor count, then
//! per tensor a `u16` name length, the UTF-8 name, `u32` rows, `u32` cols and
//! row-major `f32` data. Normalization statistics are stored as `1 x n`
//! tensors named `norm.<layer>.<mean|var>`. A trailing `u32`-prefixed UTF-8
//! block holds `key=value` lines describing the network and its training run.

use super::nn::RunningStats;
use super::params::{FusionConfig, FusionParams, NormState};
use super::train::{check_shapes, TrainConfig};
use super::{FusionError, FusionResult};
use ndarray::{Array1, Array2};
use std::collections::BTreeMap;
use std::path::Path;

const MAGIC: &[u8; 4] = b"SGWT";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: FusionConfig,
    pub params: FusionParams,
    pub norm: NormState,
    /// Echoed training settings; informational only.
    pub echo: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn new(net: FusionConfig, params: FusionParams, norm: NormState, train: Option<&TrainConfig>) -> Self {
        let echo = train
            .map(|t| t.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect())
            .unwrap_or_default();
        Self { net, params, norm, echo }
    }
}

pub fn net_pairs(net: &FusionConfig) -> Vec<(&'static str, String)> {
    vec![
        ("net.sem_dim", net.sem_dim.to_string()),
        ("net.sem_hidden", net.sem_hidden.to_string()),
        ("net.hidden", net.hidden.to_string()),
        ("net.heads", net.heads.to_string()),
        ("net.head_hidden", net.head_hidden.to_string()),
        ("net.enc_hidden", net.enc_hidden.to_string()),
        ("net.enc_neighbors", net.enc_neighbors.to_string()),
        ("net.mode", net.mode.to_string()),
    ]
}

fn norm_tensors(norm: &NormState) -> Vec<(String, Array2<f64>)> {
    let row = |a: &Array1<f64>| a.clone().insert_axis(ndarray::Axis(0));
    [("geo", &norm.geo), ("sem1", &norm.sem1), ("sem2", &norm.sem2)]
        .into_iter()
        .flat_map(|(n, s)| [(format!("norm.{n}.mean"), row(&s.mean)), (format!("norm.{n}.var"), row(&s.var))])
        .collect()
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut tensors: Vec<(String, Array2<f64>)> =
        ck.params.tensors().into_iter().map(|(n, t)| (n.to_string(), t.clone())).collect();
    tensors.extend(norm_tensors(&ck.norm));

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let mut text = String::new();
    for (k, v) in net_pairs(&ck.net) {
        text.push_str(&format!("{k}={v}\n"));
    }
    for (k, v) in &ck.echo {
        text.push_str(&format!("{k}={v}\n"));
    }
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> FusionResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| FusionError::Format("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> FusionResult<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> FusionResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> FusionResult<T> {
    map.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| FusionError::Format(format!("missing or invalid {key}")))
}

pub fn decode_checkpoint(buf: &[u8]) -> FusionResult<Checkpoint> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(FusionError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FusionError::Format(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| FusionError::Format("tensor name".into()))?.to_string();
        let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
        let n = rows.checked_mul(cols).ok_or_else(|| FusionError::Format("tensor size".into()))?;
        let bytes = r.take(n.checked_mul(4).ok_or_else(|| FusionError::Format("tensor size".into()))?)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        tensors.insert(name, Array2::from_shape_vec((rows, cols), data).unwrap());
    }
    let len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(len)?).map_err(|_| FusionError::Format("config block".into()))?;
    if r.pos != buf.len() {
        return Err(FusionError::Format("trailing bytes".into()));
    }
    let mut map = BTreeMap::new();
    let mut echo = Vec::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| FusionError::Format(format!("bad line '{line}'")))?;
        map.insert(k.to_string(), v.to_string());
        if !k.starts_with("net.") {
            echo.push((k.to_string(), v.to_string()));
        }
    }
    let mode: String = parse(&map, "net.mode")?;
    let net = FusionConfig {
        sem_dim: parse(&map, "net.sem_dim")?,
        sem_hidden: parse(&map, "net.sem_hidden")?,
        hidden: parse(&map, "net.hidden")?,
        heads: parse(&map, "net.heads")?,
        head_hidden: parse(&map, "net.head_hidden")?,
        enc_hidden: parse(&map, "net.enc_hidden")?,
        enc_neighbors: parse(&map, "net.enc_neighbors")?,
        mode: mode.parse()?,
    };
    net.validate()?;

    let mut params = FusionParams::init(&net, 0)?;
    for (name, slot) in params.tensors_mut() {
        *slot = tensors.remove(name).ok_or_else(|| FusionError::Format(format!("missing tensor {name}")))?;
    }
    check_shapes(&params, &net)?;
    let mut stats = |layer: &str, n: usize| -> FusionResult<RunningStats> {
        let mut get = |part: &str| -> FusionResult<Array1<f64>> {
            let t = tensors
                .remove(&format!("norm.{layer}.{part}"))
                .ok_or_else(|| FusionError::Format(format!("missing norm.{layer}.{part}")))?;
            if t.dim() != (1, n) {
                return Err(FusionError::Shape(format!("norm.{layer}.{part} is {:?}", t.dim())));
            }
            Ok(t.row(0).to_owned())
        };
        Ok(RunningStats { mean: get("mean")?, var: get("var")? })
    };
    let norm = NormState { geo: stats("geo", net.hidden)?, sem1: stats("sem1", net.sem_hidden)?, sem2: stats("sem2", net.hidden)? };
    if let Some(extra) = tensors.keys().next() {
        return Err(FusionError::Format(format!("unexpected tensor {extra}")));
    }
    Ok(Checkpoint { net, params, norm, echo })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> FusionResult<()> {
    std::fs::write(path, encode_checkpoint(ck))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> FusionResult<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FusionMode;

    fn small() -> FusionConfig {
        FusionConfig { sem_dim: 6, sem_hidden: 5, hidden: 4, heads: 2, head_hidden: 3, enc_hidden: 4, enc_neighbors: 3, mode: FusionMode::Concat }
    }

    #[test]
    fn round_trip_is_f32_exact() {
        let net = small();
        let mut norm = NormState::new(&net);
        norm.sem1.mean[2] = 0.125;
        let ck = Checkpoint::new(net.clone(), FusionParams::init(&net, 3).unwrap(), norm, Some(&TrainConfig::default()));
        let bytes = encode_checkpoint(&ck);
        assert_eq!(&bytes[..4], b"SGWT");
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.net, net);
        assert_eq!(back.norm, ck.norm);
        for ((_, a), (_, b)) in back.params.tensors().into_iter().zip(ck.params.tensors()) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| *x == (*y as f32) as f64));
        }
        assert!(back.echo.iter().any(|(k, v)| k == "train.lr" && v == "0.0001"));
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let net = small();
        let bytes = encode_checkpoint(&Checkpoint::new(net.clone(), FusionParams::init(&net, 3).unwrap(), NormState::new(&net), None));
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode_checkpoint(&long).is_err());
    }
}
