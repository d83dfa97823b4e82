//! File formats for saliency maps, fixation sets and scanpaths.
//!
//! - text saliency: one decimal value per line
//! - binary `.smap`: `b"SMAP"`, `u32` version 1, `u64` N, N little-endian `f32`
//! - fixations: one vertex index per line
//! - scanpath JSON: `{"mesh": .., "fixations": [{"v": .., "p": [x,y,z], "d": ..}]}`

use super::{Fixation, FixationSet, MetricError, SaliencyMap, Scanpath};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::io;
use std::path::Path;

const SMAP_MAGIC: &[u8; 4] = b"SMAP";
const SMAP_VERSION: u32 = 1;

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn from_metric(e: MetricError) -> io::Error {
    invalid(e.to_string())
}

/// Reads either format; binary is recognized by its magic bytes.
pub fn read_saliency(path: &Path) -> io::Result<SaliencyMap> {
    let bytes = std::fs::read(path)?;
    let values = if bytes.starts_with(SMAP_MAGIC) {
        decode_smap(&bytes)?
    } else {
        let text = String::from_utf8(bytes).map_err(|_| invalid("saliency text is not UTF-8"))?;
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| l.parse::<f64>().map_err(|_| invalid(format!("line {}: bad value '{l}'", i + 1))))
            .collect::<io::Result<Vec<f64>>>()?
    };
    SaliencyMap::new(values).map_err(from_metric)
}

fn decode_smap(bytes: &[u8]) -> io::Result<Vec<f64>> {
    if bytes.len() < 16 {
        return Err(invalid("truncated smap header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SMAP_VERSION {
        return Err(invalid(format!("unsupported smap version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != n * 4 {
        return Err(invalid(format!("smap payload {} bytes, expected {}", body.len(), n * 4)));
    }
    Ok(body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
}

pub fn encode_smap(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * values.len());
    out.extend_from_slice(SMAP_MAGIC);
    out.extend_from_slice(&SMAP_VERSION.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn write_saliency_binary(path: &Path, map: &SaliencyMap) -> io::Result<()> {
    std::fs::write(path, encode_smap(map.values()))
}

pub fn write_saliency_text(path: &Path, map: &SaliencyMap) -> io::Result<()> {
    let mut s = String::with_capacity(map.len() * 12);
    for v in map.values() {
        s.push_str(&format!("{v:?}\n"));
    }
    std::fs::write(path, s)
}

pub fn read_fixations(path: &Path, n_vertices: usize) -> io::Result<FixationSet> {
    let text = std::fs::read_to_string(path)?;
    let idx = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<usize>().map_err(|_| invalid(format!("bad fixation index '{l}'"))))
        .collect::<io::Result<Vec<usize>>>()?;
    FixationSet::new(idx, n_vertices).map_err(from_metric)
}

pub fn write_fixations(path: &Path, fix: &FixationSet) -> io::Result<()> {
    let s: String = fix.indices().iter().map(|i| format!("{i}\n")).collect();
    std::fs::write(path, s)
}

#[derive(Serialize, Deserialize)]
struct ScanpathJson {
    mesh: String,
    fixations: Vec<FixationJson>,
}

#[derive(Serialize, Deserialize)]
struct FixationJson {
    v: u64,
    p: [f64; 3],
    d: f64,
}

pub fn scanpath_to_json(s: &Scanpath) -> String {
    let j = ScanpathJson {
        mesh: s.mesh.clone(),
        fixations: s
            .fixations
            .iter()
            .map(|f| FixationJson {
                v: f.vertex as u64,
                p: [f.position.x, f.position.y, f.position.z],
                d: f.duration,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&j).expect("scanpath serializes")
}

pub fn scanpath_from_json(text: &str) -> io::Result<Scanpath> {
    let j: ScanpathJson = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
    Ok(Scanpath {
        mesh: j.mesh,
        fixations: j
            .fixations
            .into_iter()
            .map(|f| Fixation {
                vertex: f.v as usize,
                position: Point3::new(f.p[0], f.p[1], f.p[2]),
                duration: f.d,
            })
            .collect(),
    })
}

pub fn write_scanpath(path: &Path, s: &Scanpath) -> io::Result<()> {
    std::fs::write(path, scanpath_to_json(s) + "\n")
}

pub fn read_scanpath(path: &Path) -> io::Result<Scanpath> {
    scanpath_from_json(&std::fs::read_to_string(path)?)
}
