//! Affine maps of the embedding space.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

pub const SINGULAR_DET: f64 = 1e-12;
pub const EQUI_AFFINE_DET_TOL: f64 = 1e-12;

/// `x -> A x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    a: Matrix3<f64>,
    b: Vector3<f64>,
}

impl AffineTransform {
    pub fn new(a: Matrix3<f64>, b: Vector3<f64>) -> Result<Self> {
        let det = a.determinant();
        if !(det.abs() > SINGULAR_DET) {
            return Err(Error::SingularTransform(det));
        }
        Ok(Self { a, b })
    }

    pub fn linear(a: Matrix3<f64>) -> Result<Self> {
        Self::new(a, Vector3::zeros())
    }

    pub fn identity() -> Self {
        Self { a: Matrix3::identity(), b: Vector3::zeros() }
    }

    /// Row-major 3x3 matrix followed by an optional translation.
    pub fn from_row_slice(values: &[f64]) -> Result<Self> {
        match values.len() {
            9 => Self::linear(Matrix3::from_row_slice(values)),
            12 => Self::new(Matrix3::from_row_slice(&values[..9]), Vector3::new(values[9], values[10], values[11])),
            n => Err(Error::InvalidArgument(format!("affine transform needs 9 or 12 values, got {n}"))),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.a
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.b
    }

    pub fn determinant(&self) -> f64 {
        self.a.determinant()
    }

    pub fn is_equi_affine(&self) -> bool {
        (self.determinant() - 1.0).abs() <= EQUI_AFFINE_DET_TOL
    }

    /// Ratio of extreme singular values of `A`.
    pub fn condition_number(&self) -> f64 {
        let sv = self.a.singular_values();
        sv.max() / sv.min()
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.a * x + self.b
    }

    pub fn inverse(&self) -> Self {
        // invertibility is a construction invariant
        let ai = self.a.try_inverse().expect("invertible by construction");
        Self { a: ai, b: -(ai * self.b) }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self { a: self.a * other.a, b: self.a * other.b + self.b }
    }
}

pub fn apply_affine(mesh: &TriangleMesh, t: &AffineTransform) -> Result<TriangleMesh> {
    let v = mesh.vertices().iter().map(|x| t.apply(x)).collect();
    mesh.with_vertices(v)
}

/// Random volume- and orientation-preserving linear map with condition
/// number at most `max_condition`. Deterministic for a fixed seed.
pub fn random_equi_affine(seed: u64, max_condition: f64) -> Result<AffineTransform> {
    build_equi_affine(seed, max_condition, false)
}

/// Like [`random_equi_affine`] but the condition number equals
/// `condition` exactly (up to rounding).
pub fn equi_affine_with_condition(seed: u64, condition: f64) -> Result<AffineTransform> {
    build_equi_affine(seed, condition, true)
}

fn build_equi_affine(seed: u64, cond: f64, exact: bool) -> Result<AffineTransform> {
    if !(cond >= 1.0) || !cond.is_finite() {
        return Err(Error::InvalidArgument(format!("condition bound must be >= 1, got {cond}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let svd = m.svd(true, true);
    let mut u = svd.u.expect("requested");
    let mut vt = svd.v_t.expect("requested");
    // exclude reflections: make both orthogonal factors proper rotations
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if vt.determinant() < 0.0 {
        vt.row_mut(2).neg_mut();
    }

    let mut logs: Vec<f64> = svd.singular_values.iter().map(|s| s.max(1e-300).ln()).collect();
    let mean = logs.iter().sum::<f64>() / 3.0;
    logs.iter_mut().for_each(|l| *l -= mean);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi - lo;
    let budget = cond.ln();
    if budget == 0.0 {
        logs = vec![0.0; 3];
    } else if spread < 1e-9 {
        if exact {
            logs = vec![budget / 2.0, 0.0, -budget / 2.0];
        }
    } else if spread > budget || exact {
        let f = budget / spread;
        logs.iter_mut().for_each(|l| *l *= f);
    }
    let sigma = Matrix3::from_diagonal(&Vector3::from_iterator(logs.iter().map(|l| l.exp())));
    let mut a = u * sigma * vt;
    let det = a.determinant();
    a /= det.cbrt();
    AffineTransform::linear(a)
}

/// Volume-preserving shear `x += k y` (or any axis pair).
pub fn shear(from_axis: usize, into_axis: usize, k: f64) -> AffineTransform {
    let mut a = Matrix3::identity();
    a[(into_axis, from_axis)] = k;
    AffineTransform { a, b: Vector3::zeros() }
}

/// Shear strength `k` giving condition number `cond` for [`shear`].
pub fn shear_for_condition(cond: f64) -> f64 {
    // singular values of [[1,k],[0,1]] satisfy s1/s2 = cond with s1 s2 = 1
    cond.sqrt() - 1.0 / cond.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_rejected() {
        let a = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0);
        assert!(matches!(AffineTransform::linear(a), Err(Error::SingularTransform(_))));
    }

    #[test]
    fn diag_scaling_is_equi_affine() {
        let t = AffineTransform::linear(Matrix3::from_diagonal(&Vector3::new(2.0, 0.5, 1.0))).unwrap();
        assert!(t.is_equi_affine());
        assert_eq!(t.apply(&Vector3::new(1.0, 0.0, 0.0)), Vector3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn unit_condition_gives_rotation() {
        for seed in 0..20 {
            let t = random_equi_affine(seed, 1.0).unwrap();
            let a = t.matrix();
            assert!((a.transpose() * a - Matrix3::identity()).norm() < 1e-12);
            assert!((t.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_determinism() {
        assert_eq!(random_equi_affine(7, 3.0).unwrap(), random_equi_affine(7, 3.0).unwrap());
    }

    #[test]
    fn exact_condition() {
        for seed in 0..10 {
            let t = equi_affine_with_condition(seed, 4.0).unwrap();
            assert!((t.condition_number() - 4.0).abs() < 1e-9);
            assert!((t.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shear_condition() {
        let k = shear_for_condition(5.0);
        let t = shear(0, 1, k);
        assert!((t.condition_number() - 5.0).abs() < 1e-10);
        assert!(t.is_equi_affine());
    }

    #[test]
    fn bad_condition_bound() {
        assert!(random_equi_affine(0, 0.5).is_err());
    }
}
