//! Per-face first fundamental forms.
//!
//! In equi-affine mode each face is processed independently:
//!
//! 1. the face and its (up to three) edge neighbors are unfolded isometrically
//!    into the plane,
//! 2. a planar affine map sends the central triangle onto the unit simplex
//!    `(0,0), (1,0), (0,1)` and carries the neighbor apexes along,
//! 3. a quadratic patch `x(u)` is fitted through the six 3D positions,
//! 4. the pre-metric `g~_ij = det(x_1, x_2, x_ij)` is evaluated at the simplex
//!    barycenter and normalized by `|det g~|^{-1/4}`,
//! 5. the eigenvalues of the result are replaced by their absolute values
//!    (floored at `eps_min`) so the metric is positive definite.
//!
//! Euclidean mode uses `g_ij = x_i . x_j` of the linear parametrization over
//! the same unit simplex, which reproduces the classical cotangent operator.

use nalgebra::{DMatrix, Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// Relative Tikhonov weight on the quadratic coefficients in the fallback fit.
pub const FIT_REGULARIZATION: f64 = 1e-8;
/// Six-point systems worse conditioned than this are solved by least squares.
pub const FIT_MAX_CONDITION: f64 = 1e10;
/// Pre-metric determinant threshold relative to the mesh median.
pub const DET_RELATIVE_EPS: f64 = 1e-10;
/// Dimensionless flatness floor: `|det g~| / (det g_E)^{3/2}`.
pub const DET_FLATNESS_EPS: f64 = 1e-14;
/// Eigenvalue floor relative to the reference scale.
pub const EIGEN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricMode {
    Euclidean,
    EquiAffine,
}

impl std::fmt::Display for MetricMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricMode::Euclidean => "euclidean",
            MetricMode::EquiAffine => "equi-affine",
        })
    }
}

impl std::str::FromStr for MetricMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(MetricMode::Euclidean),
            "equi-affine" | "equiaffine" | "affine" => Ok(MetricMode::EquiAffine),
            _ => Err(Error::InvalidArgument(format!("unknown metric mode {s}"))),
        }
    }
}

/// A neighbor vertex laid out in the plane of the central face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Apex {
    pub vertex: usize,
    pub planar: Vector2<f64>,
    pub position: Vector3<f64>,
}

/// Central triangle plus neighbor apexes, flattened into one plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPatch {
    pub central: [Vector2<f64>; 3],
    pub central_positions: [Vector3<f64>; 3],
    /// Apex across local edge i, `None` on the boundary.
    pub apexes: [Option<Apex>; 3],
}

impl PlanarPatch {
    /// `(planar, position)` pairs, central vertices first.
    pub fn points(&self) -> Vec<(Vector2<f64>, Vector3<f64>)> {
        let mut pts: Vec<_> = self.central.iter().copied().zip(self.central_positions.iter().copied()).collect();
        pts.extend(self.apexes.iter().flatten().map(|a| (a.planar, a.position)));
        pts
    }
}

/// Lays the face and its edge neighbors flat. Vertex 0 sits at the origin,
/// edge (0,1) runs along +u1 and vertex 2 has positive u2. Each neighbor is
/// rotated about the shared edge to the side opposite the central apex.
pub fn unfold_patch(mesh: &TriangleMesh, face: usize) -> PlanarPatch {
    let f = mesh.faces()[face];
    let p = mesh.face_positions(face);
    let l01 = (p[1] - p[0]).norm();
    let e = p[1] - p[0];
    let w = p[2] - p[0];
    let x2 = w.dot(&e) / l01;
    let y2 = (w.norm_squared() - x2 * x2).max(0.0).sqrt();
    let central = [Vector2::zeros(), Vector2::new(l01, 0.0), Vector2::new(x2, y2)];

    let ring = mesh.face_one_ring(face);
    let mut apexes = [None; 3];
    for i in 0..3 {
        let Some(nf) = ring[i] else { continue };
        let (a, b) = (f[i], f[(i + 1) % 3]);
        let nv = mesh.faces()[nf];
        let apex = nv.iter().copied().find(|&v| v != a && v != b).expect("manifold face");
        let (pa, pb) = (p[i], p[(i + 1) % 3]);
        let q = mesh.vertices()[apex];
        let edge = pb - pa;
        let len2 = edge.norm_squared();
        let t = (q - pa).dot(&edge) / len2;
        let h = (q - pa - edge * t).norm();
        let (ua, ub) = (central[i], central[(i + 1) % 3]);
        let opp = central[(i + 2) % 3];
        let d = ub - ua;
        let mut nrm = Vector2::new(-d.y, d.x) / d.norm();
        if nrm.dot(&(opp - ua)) > 0.0 {
            nrm = -nrm;
        }
        apexes[i] = Some(Apex { vertex: apex, planar: ua + d * t + nrm * h, position: q });
    }
    PlanarPatch { central, central_positions: p, apexes }
}

/// Planar affine map `u -> M (u - origin)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonization {
    pub linear: Matrix2<f64>,
    pub origin: Vector2<f64>,
}

impl Canonization {
    pub fn apply(&self, u: &Vector2<f64>) -> Vector2<f64> {
        self.linear * (u - self.origin)
    }
}

/// Affine map taking the central triangle to the unit simplex.
pub fn canonize(central: &[Vector2<f64>; 3]) -> Result<Canonization> {
    let e = Matrix2::from_columns(&[central[1] - central[0], central[2] - central[0]]);
    let scale = (central[1] - central[0]).norm_squared().max((central[2] - central[0]).norm_squared());
    let det = e.determinant();
    if !(det.abs() > 1e-14 * scale) {
        return Err(Error::DegenerateTriangle);
    }
    let linear = e.try_inverse().ok_or(Error::DegenerateTriangle)?;
    Ok(Canonization { linear, origin: central[0] })
}

/// Canonized patch points paired with their positions in space.
pub type CanonizedPoints = Vec<(Vector2<f64>, Vector3<f64>)>;

/// Canonizes a whole patch: central vertices land on the unit simplex exactly.
pub fn canonize_patch(patch: &PlanarPatch) -> Result<(Canonization, CanonizedPoints)> {
    let m = canonize(&patch.central)?;
    let mut pts = vec![
        (Vector2::new(0.0, 0.0), patch.central_positions[0]),
        (Vector2::new(1.0, 0.0), patch.central_positions[1]),
        (Vector2::new(0.0, 1.0), patch.central_positions[2]),
    ];
    pts.extend(patch.apexes.iter().flatten().map(|a| (m.apply(&a.planar), a.position)));
    Ok((m, pts))
}

/// `x(u) = c0 + c1 u1 + c2 u2 + c3 u1^2 + c4 u1 u2 + c5 u2^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPatch {
    pub c: [Vector3<f64>; 6],
}

impl QuadraticPatch {
    pub fn eval(&self, u: &Vector2<f64>) -> Vector3<f64> {
        let c = &self.c;
        c[0] + c[1] * u.x + c[2] * u.y + c[3] * (u.x * u.x) + c[4] * (u.x * u.y) + c[5] * (u.y * u.y)
    }

    /// `(x_1, x_2)` at `u`.
    pub fn first_derivatives(&self, u: &Vector2<f64>) -> [Vector3<f64>; 2] {
        let c = &self.c;
        [c[1] + c[3] * (2.0 * u.x) + c[4] * u.y, c[2] + c[4] * u.x + c[5] * (2.0 * u.y)]
    }

    /// `(x_11, x_12, x_22)`, constant over the patch.
    pub fn second_derivatives(&self) -> [Vector3<f64>; 3] {
        [self.c[3] * 2.0, self.c[4], self.c[5] * 2.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub patch: QuadraticPatch,
    /// Least-squares path was taken (boundary or ill-conditioned patch).
    pub fallback: bool,
    /// Largest interpolation error over the input points.
    pub residual: f64,
}

fn monomials(u: &Vector2<f64>) -> [f64; 6] {
    [1.0, u.x, u.y, u.x * u.x, u.x * u.y, u.y * u.y]
}

/// Fits a quadratic patch through canonized points (central vertices first).
pub fn fit_quadratic(points: &[(Vector2<f64>, Vector3<f64>)]) -> Result<QuadraticFit> {
    let m = points.len();
    if m < 3 {
        return Err(Error::InsufficientPoints(m));
    }
    let v = DMatrix::from_fn(m, 6, |r, c| monomials(&points[r].0)[c]);
    let rhs = DMatrix::from_fn(m, 3, |r, c| points[r].1[c]);
    let sv = v.clone().svd(false, false).singular_values;
    let smax = sv.max();

    let exact = if m == 6 {
        let smin = sv.min();
        if smin > 0.0 && smax / smin <= FIT_MAX_CONDITION {
            v.clone().lu().solve(&rhs)
        } else {
            None
        }
    } else {
        None
    };
    let (coef, fallback) = match exact {
        Some(c) => (c, false),
        None => {
            let alpha = FIT_REGULARIZATION * smax;
            let mut aug = DMatrix::zeros(m + 3, 6);
            aug.view_mut((0, 0), (m, 6)).copy_from(&v);
            for j in 0..3 {
                aug[(m + j, 3 + j)] = alpha;
            }
            let mut aug_rhs = DMatrix::zeros(m + 3, 3);
            aug_rhs.view_mut((0, 0), (m, 3)).copy_from(&rhs);
            let c = aug.svd(true, true).solve(&aug_rhs, 0.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            (c, true)
        }
    };
    let mut c = [Vector3::zeros(); 6];
    for (k, ck) in c.iter_mut().enumerate() {
        *ck = Vector3::new(coef[(k, 0)], coef[(k, 1)], coef[(k, 2)]);
    }
    let patch = QuadraticPatch { c };
    let residual = points.iter().map(|(u, x)| (patch.eval(u) - x).norm()).fold(0.0, f64::max);
    Ok(QuadraticFit { patch, fallback, residual })
}

pub const BARYCENTER: Vector2<f64> = Vector2::new(1.0 / 3.0, 1.0 / 3.0);

/// `g~_ij = det(x_1, x_2, x_ij)` at the simplex barycenter.
pub fn pre_metric_tensor(patch: &QuadraticPatch) -> Matrix2<f64> {
    let [x1, x2] = patch.first_derivatives(&BARYCENTER);
    let [x11, x12, x22] = patch.second_derivatives();
    let det = |xij: &Vector3<f64>| Matrix3::from_columns(&[x1, x2, *xij]).determinant();
    let g12 = det(&x12);
    Matrix2::new(det(&x11), g12, g12, det(&x22))
}

/// `g^ = g~ |det g~|^{-1/4}`; fails below `eps_det`.
pub fn normalize_pre_metric(gtilde: &Matrix2<f64>, eps_det: f64) -> Result<Matrix2<f64>> {
    let d = gtilde.determinant().abs();
    if !(d >= eps_det) || d == 0.0 {
        return Err(Error::DegeneratePreMetric(d));
    }
    Ok(gtilde * d.powf(-0.25))
}

/// Pre-metric of a fitted patch.
pub fn pre_metric(patch: &QuadraticPatch, eps_det: f64) -> Result<Matrix2<f64>> {
    normalize_pre_metric(&pre_metric_tensor(patch), eps_det)
}

/// `G = U max(|Gamma|, eps_min) U^T`. Already-valid inputs (and negations of
/// valid inputs) are returned without round-off.
pub fn correct_metric(ghat: &Matrix2<f64>, eps_min: f64) -> Matrix2<f64> {
    let (g, _) = correct_metric_with_eigenvalues(ghat, eps_min);
    g
}

fn sym2_eigenvalues(m: &Matrix2<f64>) -> [f64; 2] {
    let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let r = diff.hypot(m[(0, 1)]);
    [half_tr - r, half_tr + r]
}

fn correct_metric_with_eigenvalues(ghat: &Matrix2<f64>, eps_min: f64) -> (Matrix2<f64>, [f64; 2]) {
    let sym = (ghat + ghat.transpose()) * 0.5;
    let gamma = sym2_eigenvalues(&sym);
    if gamma[0] >= eps_min {
        return (sym, gamma);
    }
    if -gamma[1] >= eps_min {
        return (-sym, gamma);
    }
    // The spectral absolute value only commutes with orthogonal frame changes,
    // so it is taken in each of the six vertex orderings of the simplex and
    // averaged; the result no longer depends on how the face is labelled.
    let mut g = Matrix2::zeros();
    for l in SIMPLEX_RELABELINGS.iter().map(|c| Matrix2::new(c[0], c[1], c[2], c[3])) {
        let li = l.try_inverse().expect("unimodular");
        let eig = SymmetricEigen::new(li.transpose() * sym * li);
        let clamped = eig.eigenvalues.map(|v| v.abs().max(eps_min));
        let u = eig.eigenvectors;
        g += l.transpose() * (u * Matrix2::from_diagonal(&clamped) * u.transpose()) * l;
    }
    g /= 6.0;
    (g, gamma)
}

/// Linear parts of the six affine maps permuting the unit simplex vertices,
/// row-major.
const SIMPLEX_RELABELINGS: [[f64; 4]; 6] = [
    [1.0, 0.0, 0.0, 1.0],
    [0.0, 1.0, 1.0, 0.0],
    [-1.0, -1.0, 1.0, 0.0],
    [-1.0, -1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0, -1.0],
    [0.0, 1.0, -1.0, -1.0],
];

/// Diagnostic record for one face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaceMetric {
    /// Corrected first fundamental form in canonized coordinates.
    pub g: [[f64; 2]; 2],
    /// Raw pre-metric `det(x_1, x_2, x_ij)` (zero in euclidean mode).
    pub gtilde: [[f64; 2]; 2],
    /// Eigenvalues of the normalized pre-metric.
    pub gamma: [f64; 2],
    pub det_gtilde: f64,
    /// Euclidean form substituted for a degenerate pre-metric.
    pub fallback: bool,
    /// Quadratic fit took the least-squares path.
    pub fit_fallback: bool,
    /// Unfolded planar coordinates of the face's three vertices.
    pub planar: [[f64; 2]; 3],
}

impl FaceMetric {
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.g[0][0], self.g[0][1], self.g[1][0], self.g[1][1])
    }
}

#[derive(Debug, Clone)]
pub struct MetricField {
    pub mode: MetricMode,
    pub faces: Vec<FaceMetric>,
    pub reference_scale: f64,
    pub eps_min: f64,
    pub eps_det: f64,
}

impl MetricField {
    pub fn fallback_count(&self) -> usize {
        self.faces.iter().filter(|f| f.fallback).count()
    }

    /// Metric lengths of the three canonized edges `(1,0)`, `(-1,1)`, `(0,-1)`.
    pub fn edge_lengths(&self, face: usize) -> [f64; 3] {
        let g = self.faces[face].matrix();
        let edges = [Vector2::new(1.0, 0.0), Vector2::new(-1.0, 1.0), Vector2::new(0.0, -1.0)];
        edges.map(|e| (e.transpose() * g * e)[(0, 0)].max(0.0).sqrt())
    }

    /// `sum sqrt(det G) / 2` over all faces.
    pub fn total_area(&self) -> f64 {
        self.faces.iter().map(|f| f.matrix().determinant().max(0.0).sqrt() * 0.5).sum()
    }

    /// One JSON object per face, for debugging.
    pub fn debug_records(&self) -> Vec<serde_json::Value> {
        self.faces
            .iter()
            .enumerate()
            .map(|(i, f)| {
                serde_json::json!({
                    "face": i,
                    "gtilde": f.gtilde,
                    "G": f.g,
                    "fallback": f.fallback,
                    "det": f.det_gtilde,
                })
            })
            .collect()
    }
}

/// Euclidean first fundamental form of the linear map onto the unit simplex.
pub fn euclidean_form(p: &[Vector3<f64>; 3]) -> Matrix2<f64> {
    let (e1, e2) = (p[1] - p[0], p[2] - p[0]);
    let g12 = e1.dot(&e2);
    Matrix2::new(e1.norm_squared(), g12, g12, e2.norm_squared())
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn mat_to_array(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

struct FaceStage {
    gtilde: Matrix2<f64>,
    euclid: Matrix2<f64>,
    fit_fallback: bool,
    planar: [[f64; 2]; 3],
}

pub fn compute_metric_field(mesh: &TriangleMesh, mode: MetricMode) -> Result<MetricField> {
    let stages: Vec<FaceStage> = (0..mesh.face_count())
        .into_par_iter()
        .map(|f| -> Result<FaceStage> {
            let patch = unfold_patch(mesh, f);
            let euclid = euclidean_form(&patch.central_positions);
            let planar = patch.central.map(|u| [u.x, u.y]);
            if mode == MetricMode::Euclidean {
                return Ok(FaceStage { gtilde: Matrix2::zeros(), euclid, fit_fallback: false, planar });
            }
            let (_, pts) = canonize_patch(&patch)?;
            let fit = fit_quadratic(&pts)?;
            Ok(FaceStage { gtilde: pre_metric_tensor(&fit.patch), euclid, fit_fallback: fit.fallback, planar })
        })
        .collect::<Result<_>>()?;

    let (eps_det, reference_scale) = match mode {
        MetricMode::Euclidean => {
            let reference = median(stages.iter().map(|s| s.euclid.determinant().sqrt()).collect()).unwrap_or(1.0);
            (0.0, reference)
        }
        MetricMode::EquiAffine => {
            let dets: Vec<f64> = stages.iter().map(|s| s.gtilde.determinant().abs()).collect();
            let flat_scale =
                median(stages.iter().map(|s| s.euclid.determinant().max(0.0).powf(1.5)).collect()).unwrap_or(0.0);
            let rel = DET_RELATIVE_EPS * median(dets.clone()).unwrap_or(0.0);
            let eps_det = rel.max(DET_FLATNESS_EPS * flat_scale);
            let good: Vec<f64> =
                dets.iter().copied().filter(|&d| d >= eps_det && d > 0.0).map(|d| d.powf(0.25)).collect();
            // with no curved face every metric is euclidean
            let reference = median(good).unwrap_or_else(|| {
                median(stages.iter().map(|s| s.euclid.determinant().sqrt()).collect()).unwrap_or(1.0)
            });
            (eps_det, reference)
        }
    };
    let eps_min = EIGEN_FLOOR * reference_scale;

    let faces = stages
        .iter()
        .map(|s| {
            let det_gtilde = s.gtilde.determinant();
            let (g, gamma, fallback) = match mode {
                MetricMode::Euclidean => {
                    let (g, gamma) = correct_metric_with_eigenvalues(&s.euclid, eps_min);
                    (g, gamma, false)
                }
                MetricMode::EquiAffine => match normalize_pre_metric(&s.gtilde, eps_det) {
                    Ok(ghat) => {
                        let (g, gamma) = correct_metric_with_eigenvalues(&ghat, eps_min);
                        (g, gamma, false)
                    }
                    Err(_) => {
                        let (g, _) = correct_metric_with_eigenvalues(&s.euclid, eps_min);
                        (g, [0.0, 0.0], true)
                    }
                },
            };
            FaceMetric {
                g: mat_to_array(&g),
                gtilde: mat_to_array(&s.gtilde),
                gamma,
                det_gtilde,
                fallback,
                fit_fallback: s.fit_fallback,
                planar: s.planar,
            }
        })
        .collect();

    Ok(MetricField { mode, faces, reference_scale, eps_min, eps_det })
}
