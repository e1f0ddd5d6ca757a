//! Wavefront OBJ reading and writing, with rest positions in a JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};

use super::QuadMesh;
use crate::error::{Error, Result};

/// `<dir>/<stem>.rest.json` next to an OBJ file.
pub fn rest_sidecar_path(obj_path: &Path) -> PathBuf {
    let stem = obj_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    obj_path.with_file_name(format!("{stem}.rest.json"))
}

/// Writes `v`/`f` lines (1-indexed quads) and the rest-position sidecar.
pub fn save_obj(mesh: &QuadMesh, path: &Path) -> Result<()> {
    fs::write(path, obj_string(mesh))?;
    let rest: Vec<[f64; 2]> = mesh.rest_positions().iter().map(|p| [p.x, p.y]).collect();
    fs::write(rest_sidecar_path(path), serde_json::to_string(&rest)?)?;
    Ok(())
}

pub(crate) fn obj_string(mesh: &QuadMesh) -> String {
    let mut out = String::with_capacity(40 * (mesh.num_vertices() + mesh.num_faces()));
    // shortest round-trip representation, always >= 9 significant digits of fidelity
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1);
    }
    out
}

/// Reads a quad-only OBJ. Rest positions come from the sidecar when present,
/// otherwise from the x/y coordinates of the vertices.
pub fn load_obj(path: &Path) -> Result<QuadMesh> {
    let text = fs::read_to_string(path)?;
    let (vertices, faces) = parse_obj(&text, path)?;
    let sidecar = rest_sidecar_path(path);
    let rest = if sidecar.exists() {
        let pairs: Vec<[f64; 2]> = serde_json::from_str(&fs::read_to_string(&sidecar)?)?;
        pairs.into_iter().map(|[u, v]| Vector2::new(u, v)).collect()
    } else {
        vertices.iter().map(|v| Vector2::new(v.x, v.y)).collect()
    };
    QuadMesh::new(vertices, rest, faces)
}

type Parsed = (Vec<Vector3<f64>>, Vec<[usize; 4]>);

pub(crate) fn parse_obj(text: &str, path: &Path) -> Result<Parsed> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| parse_err(line, format!("bad coordinate {t:?}: {e}")))
                    })
                    .collect::<Result<_>>()?;
                if !(3..=4).contains(&coords.len()) {
                    return Err(parse_err(
                        line,
                        format!("vertex needs 3 coordinates, found {}", coords.len()),
                    ));
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| {
                        resolve_index(t, vertices.len())
                            .ok_or_else(|| parse_err(line, format!("bad face index {t:?}")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 4 {
                    return Err(Error::NonQuadFace {
                        path: path.to_path_buf(),
                        line,
                        count: idx.len(),
                    });
                }
                faces.push([idx[0], idx[1], idx[2], idx[3]]);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

/// 1-based (or negative, relative) OBJ index to 0-based.
fn resolve_index(token: &str, num_vertices: usize) -> Option<usize> {
    let head = token.split('/').next()?;
    let i: i64 = head.parse().ok()?;
    match i {
        0 => None,
        i if i > 0 => Some(i as usize - 1),
        i => num_vertices.checked_sub(i.unsigned_abs() as usize),
    }
}
