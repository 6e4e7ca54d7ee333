//! Synthetic closed surfaces used by tests, the bundled benchmark and the
//! command-line demos.
//!
//! Every sphere-like shape is a radial graph over a subdivided icosahedron,
//! so a shape and its refinements share directions exactly at the coarse
//! vertices.

use std::collections::HashMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::mesh::{Point3, TriangleMesh};

const PHI: f64 = 1.618_033_988_749_895;

fn orient_outward(vertices: &[Point3], faces: &mut [[usize; 3]]) {
    for f in faces.iter_mut() {
        let [a, b, c] = f.map(|i| vertices[i]);
        let n = (b - a).cross(&(c - a));
        if n.dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }
}

/// Regular icosahedron inscribed in the unit sphere, mirror-symmetric in
/// each coordinate plane.
pub fn icosahedron() -> TriangleMesh {
    let (v, f) = icosahedron_raw();
    TriangleMesh::new(v, f).expect("valid icosahedron")
}

fn icosahedron_raw() -> (Vec<Point3>, Vec<[usize; 3]>) {
    let s = (1.0 + PHI * PHI).sqrt();
    let raw = [
        (-1.0, PHI, 0.0),
        (1.0, PHI, 0.0),
        (-1.0, -PHI, 0.0),
        (1.0, -PHI, 0.0),
        (0.0, -1.0, PHI),
        (0.0, 1.0, PHI),
        (0.0, -1.0, -PHI),
        (0.0, 1.0, -PHI),
        (PHI, 0.0, -1.0),
        (PHI, 0.0, 1.0),
        (-PHI, 0.0, -1.0),
        (-PHI, 0.0, 1.0),
    ];
    let v: Vec<Point3> = raw.iter().map(|&(x, y, z)| Vector3::new(x, y, z) / s).collect();
    let mut f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    orient_outward(&v, &mut f);
    (v, f)
}

/// Unit directions and faces of the icosahedron with every face split into
/// `freq^2` triangles. `freq = 2^s` matches `s` rounds of 1-to-4 subdivision.
pub fn sphere_lattice(freq: usize) -> (Vec<Point3>, Vec<[usize; 3]>) {
    assert!(freq >= 1, "frequency must be positive");
    let (base, base_faces) = icosahedron_raw();
    // a lattice point is identified by its integer barycentric weights on the
    // original vertices, which agree between faces sharing an edge
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces = Vec::with_capacity(20 * freq * freq);
    for f in &base_faces {
        let mut id = |i: usize, j: usize| -> usize {
            let w = [freq - i - j, i, j];
            let mut key: Vec<(usize, usize)> = (0..3).filter(|&c| w[c] > 0).map(|c| (f[c], w[c])).collect();
            key.sort_unstable();
            *index.entry(key).or_insert_with(|| {
                let p = (base[f[0]] * w[0] as f64 + base[f[1]] * w[1] as f64 + base[f[2]] * w[2] as f64) / freq as f64;
                vertices.push(p.normalize());
                vertices.len() - 1
            })
        };
        for i in 0..freq {
            for j in 0..freq - i {
                let a = id(i, j);
                let b = id(i + 1, j);
                let c = id(i, j + 1);
                faces.push([a, b, c]);
                if i + j + 1 < freq {
                    let d = id(i + 1, j + 1);
                    faces.push([b, d, c]);
                }
            }
        }
    }
    orient_outward(&vertices, &mut faces);
    (vertices, faces)
}

/// Vertex count of [`sphere_lattice`] at a given frequency.
pub fn lattice_vertex_count(freq: usize) -> usize {
    10 * freq * freq + 2
}

/// Closed surface `r(u) u` over the lattice directions `u`.
pub fn radial_mesh(freq: usize, radius: impl Fn(&Point3) -> f64) -> TriangleMesh {
    let (dirs, faces) = sphere_lattice(freq);
    let vertices = dirs.iter().map(|u| u * radius(u)).collect();
    TriangleMesh::new(vertices, faces).expect("radial graphs over the lattice are valid meshes")
}

/// Unit sphere at lattice frequency `freq` (`freq = 16` has 2562 vertices).
pub fn icosphere(freq: usize) -> TriangleMesh {
    radial_mesh(freq, |_| 1.0)
}

/// Icosphere after `subdivisions` rounds of 1-to-4 refinement.
pub fn icosphere_subdivided(subdivisions: u32) -> TriangleMesh {
    icosphere(1usize << subdivisions)
}

/// Smooth random bumps on the unit sphere.
#[derive(Debug, Clone)]
pub struct BumpField {
    pub centers: Vec<Point3>,
    pub amplitudes: Vec<f64>,
    pub sharpness: f64,
}

impl BumpField {
    /// `count` bumps with amplitudes in `[-amplitude/2, amplitude]`.
    pub fn random(seed: u64, count: usize, amplitude: f64, sharpness: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..count)
            .map(|_| loop {
                let p = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let n = p.norm();
                if n > 0.1 && n <= 1.0 {
                    break p / n;
                }
            })
            .collect();
        let amplitudes = (0..count).map(|_| rng.gen_range(-0.5 * amplitude..amplitude)).collect();
        Self { centers, amplitudes, sharpness }
    }

    pub fn radius(&self, u: &Point3) -> f64 {
        1.0 + self
            .centers
            .iter()
            .zip(&self.amplitudes)
            .map(|(c, a)| a * (self.sharpness * (u.dot(c) - 1.0)).exp())
            .sum::<f64>()
    }

    pub fn mesh(&self, freq: usize) -> TriangleMesh {
        radial_mesh(freq, |u| self.radius(u))
    }
}

/// Strictly convex blob: broad low-amplitude bumps on the unit sphere.
pub fn bumped_blob(freq: usize, seed: u64) -> TriangleMesh {
    BumpField::random(seed, 6, 0.12, 2.0).mesh(freq)
}

/// Two overlapping balls joined by a smooth waist, with bumps placed
/// symmetrically about `x = 0` so that the `x -> -x` mirror is the only
/// non-trivial symmetry. Returns the mesh and that mirror as a vertex
/// permutation.
pub fn fused_spheres(freq: usize) -> (TriangleMesh, Vec<usize>) {
    let (c, r, eps) = (0.6f64, 1.0f64, 0.25f64);
    let bumps = [
        (Vector3::new(0.5, 0.6, 0.6).normalize(), 0.2),
        (Vector3::new(-0.5, 0.6, 0.6).normalize(), 0.2),
        (Vector3::new(0.0, -0.9, 0.3).normalize(), 0.15),
    ];
    let m = radial_mesh(freq, |u| {
        let lobes = c * (u.x * u.x + eps * eps).sqrt() + (r * r - c * c * (1.0 - u.x * u.x)).sqrt();
        lobes + bumps.iter().map(|(b, a)| a * (4.0 * (u.dot(b) - 1.0)).exp()).sum::<f64>()
    });
    let v: Vec<Point3> = m.vertices().iter().map(|p| Vector3::new(p.x, p.y, 0.7 * p.z)).collect();
    let m = m.with_vertices(v).expect("scaling keeps the mesh valid");
    let mirror = mirror_permutation(m.vertices(), |p| Vector3::new(-p.x, p.y, p.z));
    (m, mirror)
}

/// `perm[i]` is the vertex nearest to the image of vertex `i`.
pub fn mirror_permutation(vertices: &[Point3], map: impl Fn(&Point3) -> Point3) -> Vec<usize> {
    vertices
        .iter()
        .map(|p| {
            let q = map(p);
            let mut best = (f64::INFINITY, 0);
            for (j, v) in vertices.iter().enumerate() {
                let d = (v - q).norm_squared();
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

/// Wraps the x axis around a cylinder of radius `radius` about the line
/// `y = radius`, keeping `z`. Lengths change only by the factor `(R - y) / R`.
pub fn bend(mesh: &TriangleMesh, radius: f64) -> Result<TriangleMesh> {
    let v = mesh
        .vertices()
        .iter()
        .map(|p| {
            let theta = p.x / radius;
            let rho = radius - p.y;
            Vector3::new(rho * theta.sin(), radius - rho * theta.cos(), p.z)
        })
        .collect();
    mesh.with_vertices(v)
}

pub fn tetrahedron() -> TriangleMesh {
    let v = vec![
        Vector3::new(1.0, 1.0, 1.0),
        Vector3::new(1.0, -1.0, -1.0),
        Vector3::new(-1.0, 1.0, -1.0),
        Vector3::new(-1.0, -1.0, 1.0),
    ];
    let mut f = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    orient_outward(&v, &mut f);
    TriangleMesh::new(v, f).expect("valid tetrahedron")
}

/// Open `nx` by `ny` grid of unit squares in the plane `z = height(x, y)`,
/// each square split along its diagonal.
pub fn grid(nx: usize, ny: usize, height: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = (i as f64, j as f64);
            v.push(Vector3::new(x, y, height(x, y)));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut f = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(v, f).expect("valid grid")
}

/// 1-to-4 midpoint subdivision; new vertices are projected by `project`.
pub fn subdivide(mesh: &TriangleMesh, project: impl Fn(&Point3) -> Point3) -> TriangleMesh {
    let mut v: Vec<Point3> = mesh.vertices().to_vec();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, v: &mut Vec<Point3>| {
        *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
            v.push(project(&((v[a] + v[b]) * 0.5)));
            v.len() - 1
        })
    };
    let mut f = Vec::with_capacity(4 * mesh.face_count());
    for &[a, b, c] in mesh.faces() {
        let ab = midpoint(a, b, &mut v);
        let bc = midpoint(b, c, &mut v);
        let ca = midpoint(c, a, &mut v);
        f.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
    }
    TriangleMesh::new(v, f).expect("subdivision keeps the mesh valid")
}
