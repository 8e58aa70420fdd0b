//! Wavefront OBJ subset: `v`, `vn` and triangular `f` records.

use std::fmt::Write as _;
use std::path::Path;

use super::Mesh;
use crate::{Error, Result, Vec3};

pub fn read_obj(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text).map_err(|e| match e {
        Error::Format(m) => Error::schema(path, m),
        other => other,
    })
}

pub(crate) fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let err = |m: &str| Error::Format(format!("line {}: {m}", lineno + 1));
        match tag {
            "v" | "vn" => {
                let xyz: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err("bad coordinate"))?;
                if xyz.len() != 3 {
                    return Err(err("expected three coordinates"));
                }
                let p = Vec3::new(xyz[0], xyz[1], xyz[2]);
                if tag == "v" {
                    vertices.push(p);
                } else {
                    normals.push(p);
                }
            }
            "f" => {
                let idx: Vec<&str> = parts.collect();
                if idx.len() != 3 {
                    return Err(err("only triangular faces are supported"));
                }
                let mut face = [0usize; 3];
                for (k, tok) in idx.iter().enumerate() {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| err("bad face index"))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(err("face index 0 is invalid"));
                    };
                    if resolved < 0 {
                        return Err(err("face index out of range"));
                    }
                    face[k] = resolved as usize;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    let mut mesh = Mesh::new(vertices, faces)?;
    if !normals.is_empty() {
        mesh.normals = Some(normals);
        mesh.validate()?;
    }
    Ok(mesh)
}

/// Rounds to 1e-9 and prints the shortest representation, with `-0` folded
/// to `0`. Two meshes that agree to the nanometre serialize identically.
pub fn format_coord(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

pub(crate) fn format_obj(mesh: &Mesh, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    for v in &mesh.vertices {
        let _ = writeln!(
            out,
            "v {} {} {}",
            format_coord(v.x),
            format_coord(v.y),
            format_coord(v.z)
        );
    }
    if let Some(normals) = &mesh.normals {
        for n in normals {
            let _ = writeln!(
                out,
                "vn {} {} {}",
                format_coord(n.x),
                format_coord(n.y),
                format_coord(n.z)
            );
        }
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

/// Writes `mesh`, prefixing each `header` line as an OBJ comment.
pub fn write_obj(path: &Path, mesh: &Mesh, header: &[String]) -> Result<()> {
    std::fs::write(path, format_obj(mesh, header)).map_err(|e| Error::io(path, e))
}
