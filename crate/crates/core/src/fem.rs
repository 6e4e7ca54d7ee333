//! Piecewise-linear finite elements for the Laplace-Beltrami operator of a
//! per-face constant metric.
//!
//! Every face is integrated over its canonized unit simplex, where the hat
//! functions have constant gradients `(-1,-1)`, `(1,0)`, `(0,1)` and the area
//! element is `sqrt(det G) du1 du2`.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::metric::{MetricField, MetricMode};
use crate::sparse::CsrMatrix;

pub type Block3 = [[f64; 3]; 3];

pub const HAT_GRADIENTS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Stiffness and consistent mass blocks for one face with metric `g`.
pub fn element_matrices(g: &Matrix2<f64>) -> Result<(Block3, Block3)> {
    let det = g.determinant();
    if !(det > 0.0) || g[(0, 0)] <= 0.0 {
        return Err(Error::SingularMetric(det));
    }
    let ginv = g.try_inverse().ok_or(Error::SingularMetric(det))?;
    let sqrt_det = det.sqrt();
    let grads = HAT_GRADIENTS.map(|[a, b]| Vector2::new(a, b));
    let mut stiff = [[0.0; 3]; 3];
    let mut mass = [[0.0; 3]; 3];
    for k in 0..3 {
        for l in 0..3 {
            stiff[k][l] = 0.5 * sqrt_det * grads[k].dot(&(ginv * grads[l]));
            mass[k][l] = sqrt_det * if k == l { 1.0 / 12.0 } else { 1.0 / 24.0 };
        }
    }
    Ok((stiff, mass))
}

/// Global stiffness `A` and mass `B`.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub mode: MetricMode,
}

impl FemSystem {
    pub fn n(&self) -> usize {
        self.stiffness.n()
    }

    /// Row sums of `B`, the per-vertex area weights.
    pub fn lumped_mass(&self) -> Vec<f64> {
        self.mass.row_sums()
    }

    pub fn total_area(&self) -> f64 {
        self.mass.sum()
    }
}

pub fn assemble(mesh: &TriangleMesh, metric: &MetricField) -> Result<FemSystem> {
    if metric.faces.len() != mesh.face_count() {
        return Err(Error::DimensionMismatch { expected: mesh.face_count(), found: metric.faces.len() });
    }
    let blocks: Vec<(Block3, Block3)> =
        metric.faces.par_iter().map(|fm| element_matrices(&fm.matrix())).collect::<Result<_>>()?;

    let n = mesh.vertex_count();
    let mut ta = Vec::with_capacity(9 * blocks.len());
    let mut tb = Vec::with_capacity(9 * blocks.len());
    for (f, (s, m)) in mesh.faces().iter().zip(&blocks) {
        for k in 0..3 {
            for l in 0..3 {
                ta.push((f[k], f[l], s[k][l]));
                tb.push((f[k], f[l], m[k][l]));
            }
        }
    }
    Ok(FemSystem {
        stiffness: CsrMatrix::from_triplets(n, ta),
        mass: CsrMatrix::from_triplets(n, tb),
        mode: metric.mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_metric_blocks() {
        let (s, m) = element_matrices(&Matrix2::identity()).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for k in 0..3 {
            for l in 0..3 {
                assert!((s[k][l] - expect[k][l]).abs() < 1e-15);
            }
        }
        let total: f64 = m.iter().flatten().sum();
        assert!((total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conformal_scaling() {
        let (s1, m1) = element_matrices(&Matrix2::identity()).unwrap();
        let (s2, m2) = element_matrices(&(Matrix2::identity() * 3.0)).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                assert!((s1[k][l] - s2[k][l]).abs() < 1e-14);
                assert!((3.0 * m1[k][l] - m2[k][l]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_metric() {
        assert!(matches!(element_matrices(&Matrix2::zeros()), Err(Error::SingularMetric(_))));
    }
}
