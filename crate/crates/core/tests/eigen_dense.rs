use affdiff::shapes::{bumped_blob, fused_spheres, grid, icosphere};
use affdiff::{assemble, compute_metric_field, smallest_eigenpairs, FemSystem, MetricMode, TriangleMesh};
use nalgebra::{DMatrix, SymmetricEigen};

fn dense(m: &affdiff::sparse::CsrMatrix) -> DMatrix<f64> {
    let rows = m.to_dense();
    DMatrix::from_fn(m.n(), m.n(), |i, j| rows[i][j])
}

/// All generalized eigenvalues via `L^-1 A L^-T` with `B = L L^T`.
fn dense_spectrum(sys: &FemSystem) -> Vec<f64> {
    let a = dense(&sys.stiffness);
    let b = dense(&sys.mass);
    let l = b.cholesky().expect("mass is SPD").l();
    let li = l.try_inverse().unwrap();
    let c = &li * a * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn small_meshes() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("sphere", icosphere(4)),
        ("blob", bumped_blob(5, 9)),
        ("fused", fused_spheres(4).0),
        ("grid", grid(12, 10, |x, y| 0.2 * (x * x - y * y))),
    ]
}

#[test]
fn matches_dense_solver() {
    for mode in [MetricMode::Euclidean, MetricMode::EquiAffine] {
        for (name, mesh) in small_meshes() {
            assert!(mesh.vertex_count() <= 300);
            let sys = assemble(&mesh, &compute_metric_field(&mesh, mode).unwrap()).unwrap();
            let k = 40;
            let spec = smallest_eigenpairs(&sys, k, 1e-10).unwrap();
            let want = dense_spectrum(&sys);
            let scale = want[k - 1];
            for (i, (&g, &w)) in spec.eigenvalues.iter().zip(&want).enumerate() {
                // the kernel eigenvalue is compared against the spectrum scale
                let denom = if i == 0 { scale } else { w.abs() };
                assert!((g - w).abs() <= 1e-8 * denom, "{mode} {name} #{i}: {g} vs {w}");
            }

            let norm_a = sys.stiffness.norm_inf();
            for (i, phi) in spec.eigenvectors.iter().enumerate() {
                let r: Vec<f64> = sys
                    .stiffness
                    .mul_vec(phi)
                    .iter()
                    .zip(sys.mass.mul_vec(phi))
                    .map(|(a, b)| a - spec.eigenvalues[i] * b)
                    .collect();
                let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(rn <= 1e-8 * norm_a, "{mode} {name} residual #{i}: {rn:e}");
                for (j, psi) in spec.eigenvectors.iter().enumerate().take(i + 1) {
                    let ip = sys.mass.bilinear(phi, psi);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - want).abs() <= 1e-8, "{mode} {name} <{i},{j}>_B = {ip}");
                }
                let peak = phi.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
                assert!(peak > 0.0, "sign convention");
            }
        }
    }
}

#[test]
fn repeated_solves_are_identical() {
    let mesh = bumped_blob(6, 2);
    let sys = assemble(&mesh, &compute_metric_field(&mesh, MetricMode::EquiAffine).unwrap()).unwrap();
    let a = smallest_eigenpairs(&sys, 20, 1e-10).unwrap();
    let b = smallest_eigenpairs(&sys, 20, 1e-10).unwrap();
    assert_eq!(a.eigenvalues, b.eigenvalues);
    assert_eq!(a.eigenvectors, b.eigenvectors);
}

#[test]
fn sphere_has_exact_low_multiplets() {
    let mesh = icosphere(4);
    let sys = assemble(&mesh, &compute_metric_field(&mesh, MetricMode::Euclidean).unwrap()).unwrap();
    // l = 3 splits into 3 + 4 on the icosahedral lattice; l <= 2 stays exact
    let spec = smallest_eigenpairs(&sys, 9, 1e-10).unwrap();
    let groups: Vec<usize> =
        spec.eigenvalues.chunk_by(|a, b| (b - a) <= 1e-3 * b.abs().max(1.0)).map(<[f64]>::len).collect();
    assert_eq!(groups, vec![1, 3, 5]);
    assert!(spec.multiplet[1..].iter().all(|&m| m));
    assert!(!spec.multiplet[0]);
}
