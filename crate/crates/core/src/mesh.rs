//! Indexed triangle meshes with edge adjacency and ASCII file I/O.
//!
//! Faces are stored counter-clockwise. Construction validates index range,
//! degeneracy, manifoldness and orientation consistency, so every
//! [`TriangleMesh`] in circulation satisfies those invariants.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Relative area below which a face counts as degenerate.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-12;

/// An undirected edge and the faces incident to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints with `v[0] < v[1]`.
    pub v: [usize; 2],
    pub faces: Vec<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.faces.len() == 1
    }
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    // neighbor across local edge i, where edge i joins corners i and (i+1)%3
    face_neighbors: Vec<[Option<usize>; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
            Some("off") => Ok(MeshFormat::Off),
            Some("obj") => Ok(MeshFormat::Obj),
            _ => Err(Error::InvalidArgument(format!("cannot infer mesh format from {}", path.display()))),
        }
    }
}

impl TriangleMesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= n) {
                return Err(Error::parse(0, format!("face {fi} references vertex {bad} but only {n} vertices exist")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace(fi));
            }
        }
        if faces.is_empty() {
            return Err(Error::parse(0, "mesh has no faces"));
        }

        let areas: Vec<f64> = faces.iter().map(|f| tri_area(&vertices, f)).collect();
        let mean = areas.iter().sum::<f64>() / areas.len() as f64;
        if let Some(fi) = areas.iter().position(|&a| !(a > DEGENERATE_AREA_RATIO * mean) || !a.is_finite()) {
            return Err(Error::DegenerateFace(fi));
        }

        let mut referenced = vec![false; n];
        for f in &faces {
            for &v in f {
                referenced[v] = true;
            }
        }
        if let Some(v) = referenced.iter().position(|r| !r) {
            return Err(Error::UnreferencedVertex(v));
        }

        // directed half-edge -> face; a repeated directed edge is an orientation flip
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
        let mut undirected: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 2);
        let mut edges: Vec<Edge> = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (f[i], f[(i + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let ei = *undirected.entry(key).or_insert_with(|| {
                    edges.push(Edge { v: [key.0, key.1], faces: Vec::with_capacity(2) });
                    edges.len() - 1
                });
                edges[ei].faces.push(fi);
                if edges[ei].faces.len() > 2 {
                    return Err(Error::NonManifold(key.0, key.1));
                }
                if directed.insert((a, b), fi).is_some() {
                    return Err(Error::InconsistentOrientation(key.0, key.1));
                }
            }
        }

        let mut face_neighbors = vec![[None; 3]; faces.len()];
        for (fi, f) in faces.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (f[i], f[(i + 1) % 3]);
                face_neighbors[fi][i] = directed.get(&(b, a)).copied();
            }
        }

        Ok(Self { vertices, faces, edges, face_neighbors })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_closed(&self) -> bool {
        self.edges.iter().all(|e| e.faces.len() == 2)
    }

    /// Faces across local edges 0 = (v0,v1), 1 = (v1,v2), 2 = (v2,v0).
    pub fn face_one_ring(&self, face: usize) -> [Option<usize>; 3] {
        self.face_neighbors[face]
    }

    pub fn face_positions(&self, face: usize) -> [Point3; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        tri_area(&self.vertices, &self.faces[face])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Mean edge length, a convenient length scale.
    pub fn mean_edge_length(&self) -> f64 {
        let s: f64 = self.edges.iter().map(|e| (self.vertices[e.v[0]] - self.vertices[e.v[1]]).norm()).sum();
        s / self.edges.len() as f64
    }

    /// Sorted neighbor lists of the vertex graph.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e.v[0]].push(e.v[1]);
            adj[e.v[1]].push(e.v[0]);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Hop distances from `source` in the edge graph.
    pub fn hop_distances(&self, source: usize) -> Vec<usize> {
        let adj = self.vertex_adjacency();
        let mut dist = vec![usize::MAX; self.vertices.len()];
        let mut queue = std::collections::VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch { expected: self.vertices.len(), found: vertices.len() });
        }
        Self::new(vertices, self.faces.clone())
    }

    pub fn to_off_string(&self) -> String {
        let mut s = String::with_capacity(self.vertices.len() * 48 + self.faces.len() * 24);
        s.push_str("OFF\n");
        let _ = writeln!(s, "{} {} {}", self.vertices.len(), self.faces.len(), self.edges.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
        }
        s
    }

    pub fn write_off(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_off_string()).map_err(|e| Error::io(path, e))
    }
}

fn tri_area(vertices: &[Point3], f: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
    0.5 * (b - a).cross(&(c - a)).norm()
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::parse(0, "file is not ASCII text (binary variants are unsupported)"))?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

/// Loads a mesh, inferring the format from the file extension.
pub fn load_mesh_auto(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    load_mesh(path, format)
}

fn off_tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?
        .parse::<T>()
        .map_err(|_| Error::parse(line, format!("malformed {what}")))
}

pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut lines = off_tokens(text);
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let mut head = header.split_whitespace();
    match head.next() {
        Some("OFF") => {}
        Some(h) if h.ends_with("OFF") => return Err(Error::parse(hline, format!("unsupported OFF variant {h}"))),
        _ => return Err(Error::parse(hline, "missing OFF header")),
    }
    let rest: Vec<&str> = head.collect();
    if rest.first() == Some(&"BINARY") {
        return Err(Error::parse(hline, "binary OFF is unsupported"));
    }
    let (cline, counts) = if rest.is_empty() {
        let (l, c) = lines.next().ok_or_else(|| Error::parse(hline, "missing counts"))?;
        (l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (hline, rest)
    };
    let mut it = counts.into_iter();
    let nv: usize = parse_num(it.next(), cline, "vertex count")?;
    let nf: usize = parse_num(it.next(), cline, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| Error::parse(cline, "unexpected end of file in vertex list"))?;
        let mut t = s.split_whitespace();
        let x: f64 = parse_num(t.next(), l, "coordinate")?;
        let y: f64 = parse_num(t.next(), l, "coordinate")?;
        let z: f64 = parse_num(t.next(), l, "coordinate")?;
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::parse(l, "non-finite coordinate"));
        }
        vertices.push(Point3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| Error::parse(cline, "unexpected end of file in face list"))?;
        let mut t = s.split_whitespace();
        let k: usize = parse_num(t.next(), l, "face size")?;
        if k != 3 {
            return Err(Error::parse(l, format!("non-triangular face with {k} vertices")));
        }
        let mut f = [0usize; 3];
        for slot in &mut f {
            *slot = parse_num(t.next(), l, "vertex index")?;
            if *slot >= nv {
                return Err(Error::parse(l, format!("vertex index {} out of range", *slot)));
            }
        }
        faces.push(f);
    }
    TriangleMesh::new(vertices, faces)
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                let x: f64 = parse_num(t.next(), line, "coordinate")?;
                let y: f64 = parse_num(t.next(), line, "coordinate")?;
                let z: f64 = parse_num(t.next(), line, "coordinate")?;
                vertices.push(Point3::new(x, y, z));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in t {
                    let first = tok.split('/').next().unwrap_or("");
                    let raw: i64 = first.parse().map_err(|_| Error::parse(line, "malformed face index"))?;
                    let n = vertices.len() as i64;
                    let v = if raw > 0 { raw - 1 } else { n + raw };
                    if raw == 0 || v < 0 || v >= n {
                        return Err(Error::parse(line, format!("vertex index {raw} out of range")));
                    }
                    idx.push(v as usize);
                }
                if idx.len() < 3 {
                    return Err(Error::parse(line, "face with fewer than 3 vertices"));
                }
                // fan anchored at the first corner
                for j in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[j], idx[j + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Fixed blue-to-red linear colormap over `[min, max]`; constant fields are mid-gray.
pub fn scalar_colors(field: &[f64]) -> Vec<[u8; 3]> {
    let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![[128, 128, 128]; field.len()];
    }
    field
        .iter()
        .map(|&v| {
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            [(255.0 * t).round() as u8, 0, (255.0 * (1.0 - t)).round() as u8]
        })
        .collect()
}

pub fn scalar_ply_string(mesh: &TriangleMesh, field: &[f64]) -> Result<String> {
    if field.len() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch { expected: mesh.vertex_count(), found: field.len() });
    }
    let colors = scalar_colors(field);
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", mesh.vertex_count());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    let _ = writeln!(s, "element face {}", mesh.face_count());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for (v, c) in mesh.vertices().iter().zip(&colors) {
        let _ = writeln!(s, "{} {} {} {} {} {}", v.x, v.y, v.z, c[0], c[1], c[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    Ok(s)
}

pub fn export_scalar_ply(mesh: &TriangleMesh, field: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let s = scalar_ply_string(mesh, field)?;
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
