//! OFF, OBJ (`v`/`f` records) and ASCII PLY readers and writers.

use super::{Mesh, MeshError, MeshResult};
use nalgebra::Point3;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> MeshResult<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "off" => Ok(Self::Off),
            "obj" => Ok(Self::Obj),
            "ply" => Ok(Self::Ply),
            _ => Err(MeshError::UnsupportedFormat(path.display().to_string())),
        }
    }
}

type Raw = (Vec<Point3<f64>>, Vec<[usize; 3]>);

pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> MeshResult<Mesh> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let text = std::fs::read_to_string(path)?;
    let (verts, faces) = parse(&text, format)?;
    Mesh::new(verts, faces)
}

pub fn parse(text: &str, format: MeshFormat) -> MeshResult<Raw> {
    match format {
        MeshFormat::Off => parse_off(text),
        MeshFormat::Obj => parse_obj(text),
        MeshFormat::Ply => parse_ply(text),
    }
}

pub fn save_mesh(mesh: &Mesh, path: &Path, format: Option<MeshFormat>) -> MeshResult<()> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    std::fs::write(path, to_text(mesh, format))?;
    Ok(())
}

/// Serializes with shortest round-trip float formatting.
pub fn to_text(mesh: &Mesh, format: MeshFormat) -> String {
    let mut s = String::new();
    let (nv, nf) = (mesh.len(), mesh.faces().len());
    match format {
        MeshFormat::Off => {
            let _ = writeln!(s, "OFF\n{nv} {nf} 0");
        }
        MeshFormat::Ply => {
            let _ = write!(
                s,
                "ply\nformat ascii 1.0\nelement vertex {nv}\nproperty double x\nproperty double y\n\
                 property double z\nelement face {nf}\nproperty list uchar int vertex_indices\nend_header\n"
            );
        }
        MeshFormat::Obj => {}
    }
    for v in mesh.vertices() {
        let prefix = if format == MeshFormat::Obj { "v " } else { "" };
        let _ = writeln!(s, "{prefix}{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = match format {
            MeshFormat::Obj => writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1),
            _ => writeln!(s, "3 {} {} {}", f[0], f[1], f[2]),
        };
    }
    s
}

fn perr(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> MeshResult<T> {
    let tok = tok.ok_or_else(|| perr(line, "missing value"))?;
    tok.parse().map_err(|_| perr(line, format!("bad number '{tok}'")))
}

/// Fan-triangulates a polygon.
fn push_polygon(poly: &[usize], faces: &mut Vec<[usize; 3]>, line: usize) -> MeshResult<()> {
    if poly.len() < 3 {
        return Err(perr(line, "face with fewer than 3 vertices"));
    }
    for k in 1..poly.len() - 1 {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
    Ok(())
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_off(text: &str) -> MeshResult<Raw> {
    let mut lines = content_lines(text);
    let (ln, first) = lines.next().ok_or_else(|| perr(0, "empty file"))?;
    let counts_line = if first == "OFF" {
        lines.next().ok_or_else(|| perr(ln, "missing counts"))?
    } else if let Some(rest) = first.strip_prefix("OFF") {
        (ln, rest.trim())
    } else {
        return Err(perr(ln, "missing OFF header"));
    };
    let mut toks = counts_line.1.split_whitespace();
    let nv: usize = num(toks.next(), counts_line.0)?;
    let nf: usize = num(toks.next(), counts_line.0)?;
    let mut verts = Vec::with_capacity(nv);
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated vertex list"))?;
        let mut t = l.split_whitespace();
        verts.push(Point3::new(num(t.next(), ln)?, num(t.next(), ln)?, num(t.next(), ln)?));
    }
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated face list"))?;
        let mut t = l.split_whitespace();
        let k: usize = num(t.next(), ln)?;
        let poly = (0..k).map(|_| num(t.next(), ln)).collect::<MeshResult<Vec<usize>>>()?;
        check_indices(&poly, nv, ln)?;
        push_polygon(&poly, &mut faces, ln)?;
    }
    Ok((verts, faces))
}

fn check_indices(poly: &[usize], nv: usize, line: usize) -> MeshResult<()> {
    match poly.iter().find(|&&i| i >= nv) {
        Some(i) => Err(perr(line, format!("vertex index {i} out of range"))),
        None => Ok(()),
    }
}

fn parse_obj(text: &str) -> MeshResult<Raw> {
    let mut verts = Vec::new();
    let mut polys: Vec<(usize, Vec<i64>)> = Vec::new();
    for (ln, l) in content_lines(text) {
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                verts.push(Point3::new(num(t.next(), ln)?, num(t.next(), ln)?, num(t.next(), ln)?))
            }
            Some("f") => {
                let idx = t
                    .map(|tok| {
                        let head = tok.split('/').next().unwrap_or("");
                        head.parse::<i64>().map_err(|_| perr(ln, format!("bad face index '{tok}'")))
                    })
                    .collect::<MeshResult<Vec<i64>>>()?;
                polys.push((ln, idx));
            }
            _ => {}
        }
    }
    let nv = verts.len() as i64;
    let mut faces = Vec::new();
    for (ln, poly) in polys {
        let resolved = poly
            .iter()
            .map(|&i| {
                let r = if i < 0 { nv + i } else { i - 1 };
                if (0..nv).contains(&r) {
                    Ok(r as usize)
                } else {
                    Err(perr(ln, format!("vertex index {i} out of range")))
                }
            })
            .collect::<MeshResult<Vec<usize>>>()?;
        push_polygon(&resolved, &mut faces, ln)?;
    }
    Ok((verts, faces))
}

fn parse_ply(text: &str) -> MeshResult<Raw> {
    struct Element {
        name: String,
        count: usize,
        props: Vec<String>,
    }
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, "ply")) => {}
        Some((ln, _)) => return Err(perr(ln, "missing ply magic")),
        None => return Err(perr(0, "empty file")),
    }
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "unterminated header"))?;
        let mut t = l.split_whitespace();
        match t.next() {
            Some("format") => {
                if t.next() != Some("ascii") {
                    return Err(perr(ln, "only ascii PLY is supported"));
                }
            }
            Some("element") => {
                let name = t.next().ok_or_else(|| perr(ln, "element name"))?.to_string();
                let count = num(t.next(), ln)?;
                elements.push(Element { name, count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| perr(ln, "property before element"))?;
                let name = l.split_whitespace().last().unwrap_or("").to_string();
                el.props.push(name);
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let mut verts = Vec::new();
    let mut raw_faces: Vec<(usize, Vec<usize>)> = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, format!("truncated {}", el.name)))?;
            match el.name.as_str() {
                "vertex" => {
                    let vals = l
                        .split_whitespace()
                        .map(|x| x.parse::<f64>().map_err(|_| perr(ln, format!("bad number '{x}'"))))
                        .collect::<MeshResult<Vec<f64>>>()?;
                    let get = |name: &str| -> MeshResult<f64> {
                        let k = el
                            .props
                            .iter()
                            .position(|p| p == name)
                            .ok_or_else(|| perr(ln, format!("vertex lacks {name}")))?;
                        vals.get(k).copied().ok_or_else(|| perr(ln, "short vertex row"))
                    };
                    verts.push(Point3::new(get("x")?, get("y")?, get("z")?));
                }
                "face" => {
                    let mut t = l.split_whitespace();
                    let k: usize = num(t.next(), ln)?;
                    let poly = (0..k).map(|_| num(t.next(), ln)).collect::<MeshResult<Vec<usize>>>()?;
                    raw_faces.push((ln, poly));
                }
                _ => {}
            }
        }
    }
    let mut faces = Vec::new();
    for (ln, poly) in raw_faces {
        check_indices(&poly, verts.len(), ln)?;
        push_polygon(&poly, &mut faces, ln)?;
    }
    Ok((verts, faces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, torus};
    use proptest::prelude::*;

    const CUBE_OFF: &str = "OFF\n8 12 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n0 0 1\n1 0 1\n0 1 1\n1 1 1\n\
        3 0 2 1\n3 1 2 3\n3 4 5 6\n3 5 7 6\n3 0 1 4\n3 1 5 4\n3 2 6 3\n3 3 6 7\n3 0 4 2\n3 2 4 6\n3 1 3 5\n3 3 7 5\n";

    #[test]
    fn unit_cube_off() {
        let (v, f) = parse(CUBE_OFF, MeshFormat::Off).unwrap();
        let m = Mesh::new(v, f).unwrap();
        assert_eq!(m.len(), 8);
        assert!((m.bbox_diagonal() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn obj_with_slashes_quads_and_negative_indices() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 -1//1\n";
        let (v, f) = parse(text, MeshFormat::Obj).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(f, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn ply_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float nx\nproperty float x\n\
            property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\n\
            end_header\n9 0 0 0\n9 1 0 0\n9 0 1 0\n3 0 1 2\n";
        let (v, f) = parse(text, MeshFormat::Ply).unwrap();
        assert_eq!(v[1], Point3::new(1.0, 0.0, 0.0));
        assert_eq!(f, vec![[0, 1, 2]]);
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        assert!(matches!(parse("OFF\n3 1 0\n0 0 0\n1 0\n", MeshFormat::Off), Err(MeshError::Parse { .. })));
        assert!(matches!(parse("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n", MeshFormat::Off), Err(MeshError::Parse { .. })));
        assert!(matches!(parse("v 0 0 0\nf 1 2 3\n", MeshFormat::Obj), Err(MeshError::Parse { .. })));
        assert!(matches!(parse("ply\nformat binary_little_endian 1.0\nend_header\n", MeshFormat::Ply), Err(MeshError::Parse { .. })));
    }

    #[test]
    fn fixture_round_trips_all_formats() {
        for mesh in [icosphere(2), torus(1.0, 0.3, 10, 7)] {
            for fmt in [MeshFormat::Off, MeshFormat::Obj, MeshFormat::Ply] {
                let (v, f) = parse(&to_text(&mesh, fmt), fmt).unwrap();
                assert_eq!(v, mesh.vertices());
                assert_eq!(f, mesh.faces());
            }
        }
    }

    proptest! {
        #[test]
        fn coordinates_round_trip_bit_exact(
            coords in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 9..30)
        ) {
            let n = coords.len() / 3;
            let verts: Vec<_> = (0..n).map(|i| Point3::new(coords[3 * i], coords[3 * i + 1], coords[3 * i + 2])).collect();
            let faces = vec![[0, 1, 2]];
            let mesh = Mesh::new(verts.clone(), faces).unwrap();
            for fmt in [MeshFormat::Off, MeshFormat::Obj, MeshFormat::Ply] {
                let (v, _) = parse(&to_text(&mesh, fmt), fmt).unwrap();
                for (a, b) in v.iter().zip(&verts) {
                    for k in 0..3 {
                        prop_assert_eq!(a[k].to_bits(), b[k].to_bits());
                    }
                }
            }
        }
    }
}
