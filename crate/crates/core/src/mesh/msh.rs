//! ASCII MSH 4.1 subset: `$MeshFormat`, `$Nodes`, `$Elements` with 3-node
//! triangles. Point and line elements are skipped on input; any other cell
//! type is rejected. Unknown sections are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::AffineMesh;
use crate::geometry::SmoothDomain;
use crate::{Error, Point2, Result};

/// Distance below which a read vertex is flagged as a boundary vertex.
pub const BOUNDARY_FLAG_TOL: f64 = 1e-8;

const TRIANGLE: usize = 2;

pub fn format_msh(mesh: &AffineMesh) -> String {
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    let mut s = String::new();
    s.push_str("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n");
    s.push_str("$Nodes\n");
    let _ = writeln!(s, "1 {nv} 1 {nv}");
    let _ = writeln!(s, "2 1 0 {nv}");
    for i in 0..nv {
        let _ = writeln!(s, "{}", i + 1);
    }
    for v in &mesh.vertices {
        // shortest representation that parses back to the same bits
        let _ = writeln!(s, "{} {} 0", v.x, v.y);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "1 {nt} 1 {nt}");
    let _ = writeln!(s, "2 1 {TRIANGLE} {nt}");
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", t + 1, tri[0] + 1, tri[1] + 1, tri[2] + 1);
    }
    s.push_str("$EndElements\n");
    s
}

pub fn write_msh(mesh: &AffineMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_msh(mesh))?;
    Ok(())
}

pub fn read_msh(path: impl AsRef<Path>, dom: &SmoothDomain) -> Result<AffineMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_msh(&text, dom)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Ok(l);
            }
        }
        Err(Error::Parse {
            line: self.line + 1,
            message: "unexpected end of file".into(),
        })
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn numbers<T: std::str::FromStr>(&mut self, expected: usize) -> Result<Vec<T>> {
        let l = self.next_line()?;
        let out: Option<Vec<T>> = l.split_whitespace().map(|w| w.parse().ok()).collect();
        match out {
            Some(v) if v.len() >= expected => Ok(v),
            _ => Err(self.err(format!("expected {expected} numeric fields, got '{l}'"))),
        }
    }

    fn expect(&mut self, tag: &str) -> Result<()> {
        let l = self.next_line()?;
        if l == tag {
            Ok(())
        } else {
            Err(self.err(format!("expected '{tag}', got '{l}'")))
        }
    }
}

/// Parse an MSH document; boundary flags are recomputed from the distance
/// to `dom`.
pub fn parse_msh(text: &str, dom: &SmoothDomain) -> Result<AffineMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let mut format_seen = false;
    let mut node_tags: Vec<usize> = Vec::new();
    let mut coords: Vec<Point2> = Vec::new();
    let mut raw_triangles: Vec<[usize; 3]> = Vec::new();
    while let Ok(header) = lines.next_line() {
        if !header.starts_with('$') || header.starts_with("$End") {
            return Err(lines.err(format!("malformed section header '{header}'")));
        }
        match header {
            "$MeshFormat" => {
                let l = lines.next_line()?;
                let f: Vec<&str> = l.split_whitespace().collect();
                if f.len() < 3 {
                    return Err(lines.err("malformed $MeshFormat line"));
                }
                if f[0] != "4.1" {
                    return Err(Error::UnsupportedFeature(format!("MSH version {}", f[0])));
                }
                if f[1] != "0" {
                    return Err(Error::UnsupportedFeature("binary MSH files".into()));
                }
                lines.expect("$EndMeshFormat")?;
                format_seen = true;
            }
            "$Nodes" => {
                let head: Vec<usize> = lines.numbers(4)?;
                let (blocks, total) = (head[0], head[1]);
                for _ in 0..blocks {
                    let b: Vec<usize> = lines.numbers(4)?;
                    let (dim, parametric, count) = (b[0], b[2], b[3]);
                    if dim > 2 {
                        return Err(Error::UnsupportedFeature("3D node entities".into()));
                    }
                    if parametric != 0 {
                        return Err(Error::UnsupportedFeature("parametric node coordinates".into()));
                    }
                    for _ in 0..count {
                        node_tags.push(lines.numbers::<usize>(1)?[0]);
                    }
                    for _ in 0..count {
                        let xyz: Vec<f64> = lines.numbers(3)?;
                        coords.push(Point2::new(xyz[0], xyz[1]));
                    }
                }
                if coords.len() != total {
                    return Err(lines.err(format!("expected {total} nodes, read {}", coords.len())));
                }
                lines.expect("$EndNodes")?;
            }
            "$Elements" => {
                let head: Vec<usize> = lines.numbers(4)?;
                let blocks = head[0];
                for _ in 0..blocks {
                    let b: Vec<usize> = lines.numbers(4)?;
                    let (ty, count) = (b[2], b[3]);
                    let arity = match ty {
                        15 => 1,
                        1 => 2,
                        TRIANGLE => 3,
                        other => {
                            return Err(Error::UnsupportedFeature(format!("element type {other}")));
                        }
                    };
                    for _ in 0..count {
                        let e: Vec<usize> = lines.numbers(arity + 1)?;
                        if ty == TRIANGLE {
                            raw_triangles.push([e[1], e[2], e[3]]);
                        }
                    }
                }
                lines.expect("$EndElements")?;
            }
            other => {
                let end = format!("$End{}", &other[1..]);
                while lines.next_line()? != end {}
            }
        }
    }
    if !format_seen {
        return Err(Error::Parse {
            line: 1,
            message: "missing $MeshFormat section".into(),
        });
    }
    let index: std::collections::HashMap<usize, usize> =
        node_tags.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut triangles = Vec::with_capacity(raw_triangles.len());
    for tri in raw_triangles {
        let mut out = [0; 3];
        for (o, tag) in out.iter_mut().zip(tri) {
            *o = *index
                .get(&tag)
                .ok_or_else(|| Error::Parse {
                    line: lines.line,
                    message: format!("element references unknown node {tag}"),
                })?;
        }
        triangles.push(out);
    }
    // drop nodes referenced by no triangle (e.g. geometry points)
    let mut used = vec![false; coords.len()];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    let mut renumber = vec![usize::MAX; coords.len()];
    let mut vertices = Vec::new();
    for (i, c) in coords.iter().enumerate() {
        if used[i] {
            renumber[i] = vertices.len();
            vertices.push(*c);
        }
    }
    for t in &mut triangles {
        *t = t.map(|v| renumber[v]);
    }
    let n = vertices.len();
    let mut mesh = AffineMesh::new(vertices, triangles, vec![false; n])?;
    mesh.flag_boundary_vertices(dom, BOUNDARY_FLAG_TOL)?;
    Ok(mesh)
}
