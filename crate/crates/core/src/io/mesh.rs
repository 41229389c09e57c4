//! OFF and OBJ mesh readers. Polygons are fan-triangulated; triangles that
//! collapse onto a repeated vertex index are dropped.

use thiserror::Error;

use crate::geometry::{TriangleMesh, Vec3};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct MeshParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> MeshParseError {
    MeshParseError { line, message: message.into() }
}

/// Non-empty lines with comments removed, tagged with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(n, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((n + 1, line))
    })
}

fn parse_num<T: std::str::FromStr>(token: &str, line: usize, what: &str) -> Result<T, MeshParseError> {
    token.parse().map_err(|_| err(line, format!("invalid {what} `{token}`")))
}

fn push_fan(faces: &mut Vec<[usize; 3]>, polygon: &[usize]) {
    for k in 1..polygon.len() - 1 {
        let tri = [polygon[0], polygon[k], polygon[k + 1]];
        if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
            faces.push(tri);
        }
    }
}

fn to_text(bytes: &[u8]) -> Result<&str, MeshParseError> {
    std::str::from_utf8(bytes).map_err(|e| err(0, format!("not UTF-8 text: {e}")))
}

/// Parses an ASCII OFF file, including the `OFF3 1 0` variant where the
/// counts are fused onto the magic line.
pub fn parse_off(bytes: &[u8]) -> Result<TriangleMesh, MeshParseError> {
    let text = to_text(bytes)?;
    let mut lines = content_lines(text);
    let (header_line, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| err(header_line, "missing OFF magic"))?;

    let (counts_line, counts): (usize, Vec<&str>) = if rest.trim().is_empty() {
        let (n, l) = lines.next().ok_or_else(|| err(header_line + 1, "missing element counts"))?;
        (n, l.split_whitespace().collect())
    } else {
        (header_line, rest.split_whitespace().collect())
    };
    if counts.len() < 2 {
        return Err(err(counts_line, "expected vertex and face counts"));
    }
    let n_vertices: usize = parse_num(counts[0], counts_line, "vertex count")?;
    let n_faces: usize = parse_num(counts[1], counts_line, "face count")?;

    let mut vertices: Vec<Vec3> = Vec::with_capacity(n_vertices);
    let mut faces = Vec::with_capacity(n_faces);
    let mut last_line = counts_line;
    for _ in 0..n_vertices {
        let (n, l) = lines
            .next()
            .ok_or_else(|| err(last_line + 1, format!("count mismatch: expected {n_vertices} vertices, found {}", vertices.len())))?;
        last_line = n;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(err(n, "vertex needs three coordinates"));
        }
        vertices.push([
            parse_num(t[0], n, "coordinate")?,
            parse_num(t[1], n, "coordinate")?,
            parse_num(t[2], n, "coordinate")?,
        ]);
    }
    for f in 0..n_faces {
        let (n, l) = lines
            .next()
            .ok_or_else(|| err(last_line + 1, format!("count mismatch: expected {n_faces} faces, found {f}")))?;
        last_line = n;
        let t: Vec<&str> = l.split_whitespace().collect();
        let k: usize = parse_num(t[0], n, "face size")?;
        if k < 3 || t.len() < k + 1 {
            return Err(err(n, format!("face declares {k} vertices but lists {}", t.len() - 1)));
        }
        let mut polygon = Vec::with_capacity(k);
        for tok in &t[1..=k] {
            let idx: usize = parse_num(tok, n, "vertex index")?;
            if idx >= n_vertices {
                return Err(err(n, format!("vertex index {idx} out of range ({n_vertices} vertices)")));
            }
            polygon.push(idx);
        }
        push_fan(&mut faces, &polygon);
    }
    if let Some((n, _)) = lines.next() {
        return Err(err(n, "count mismatch: unexpected data after the declared elements"));
    }
    TriangleMesh::new(vertices, faces).map_err(|e| err(0, e.to_string()))
}

/// Parses `v` and `f` statements of a Wavefront OBJ file. Face indices may be
/// 1-based or negative (relative to the vertices read so far); texture and
/// normal references after `/` are ignored along with all other statements.
pub fn parse_obj(bytes: &[u8]) -> Result<TriangleMesh, MeshParseError> {
    let text = to_text(bytes)?;
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces = Vec::new();
    for (n, l) in content_lines(text) {
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return Err(err(n, "vertex needs three coordinates"));
                }
                vertices.push([
                    parse_num(c[0], n, "coordinate")?,
                    parse_num(c[1], n, "coordinate")?,
                    parse_num(c[2], n, "coordinate")?,
                ]);
            }
            Some("f") => {
                let mut polygon = Vec::new();
                for tok in t {
                    let head = tok.split('/').next().unwrap_or("");
                    let raw: i64 = parse_num(head, n, "vertex index")?;
                    let count = vertices.len() as i64;
                    let idx = if raw > 0 { raw - 1 } else { count + raw };
                    if raw == 0 || idx < 0 || idx >= count {
                        return Err(err(n, format!("vertex index {raw} out of range ({count} vertices)")));
                    }
                    polygon.push(idx as usize);
                }
                if polygon.len() < 3 {
                    return Err(err(n, "face needs at least three vertices"));
                }
                push_fan(&mut faces, &polygon);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces).map_err(|e| err(0, e.to_string()))
}
