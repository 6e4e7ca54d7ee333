//! Deterministic miniature retrieval benchmark: a few base shapes, each
//! paired with equi-affine transforms of growing strength and mild bends.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::retrieval::{DatasetManifest, ManifestEntry};
use crate::shapes::{bend, radial_mesh, BumpField};
use crate::transform::{apply_affine, equi_affine_with_condition};

/// Condition numbers of the equi-affine rows, strengths `1..=5`.
pub const AFFINE_CONDITIONS: [f64; 5] = [1.5, 2.0, 3.0, 4.0, 5.0];
/// Bend radii of the near-isometric rows, strengths `1..=3`.
pub const BEND_RADII: [f64; 3] = [8.0, 6.0, 4.5];
pub const DEFAULT_FREQUENCY: usize = 8;

/// Named base shapes of unit-order size. No two are related by a
/// volume-preserving affine map.
pub fn base_shapes(freq: usize) -> Vec<(String, TriangleMesh)> {
    let bumpy = BumpField::random(101, 6, 0.3, 3.0);
    let spiky = BumpField::random(606, 8, 0.4, 8.0);
    vec![
        ("bumpy".into(), bumpy.mesh(freq)),
        (
            "peanut".into(),
            radial_mesh(freq, |u| {
                let (c, eps) = (0.5f64, 0.3f64);
                c * (u.x * u.x + eps * eps).sqrt() + (1.0 - c * c * (1.0 - u.x * u.x)).sqrt()
            }),
        ),
        (
            "trilobe".into(),
            radial_mesh(freq, |u| {
                let phi = u.y.atan2(u.x);
                1.0 + 0.3 * (3.0 * phi).cos() * (1.0 - u.z * u.z)
            }),
        ),
        ("cube".into(), radial_mesh(freq, |u| (u.x.powi(4) + u.y.powi(4) + u.z.powi(4)).powf(-0.25))),
        ("egg".into(), radial_mesh(freq, |u| 1.0 + 0.3 * u.z)),
        ("spiky".into(), spiky.mesh(freq)),
    ]
}

/// Writes every shape as OFF plus `manifest.json` into `dir`. Null shapes
/// form the corpus; every transformed shape is a query.
pub fn write_benchmark(dir: impl AsRef<Path>, freq: usize) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    let mut add = |id: String, class: &str, transform: &str, strength: u32, mesh: &TriangleMesh| -> Result<()> {
        let file = PathBuf::from(format!("{id}.off"));
        mesh.write_off(dir.join(&file))?;
        entries.push(ManifestEntry {
            id,
            path: file,
            class: class.to_string(),
            transform: transform.to_string(),
            strength,
            query: transform != "null",
            corpus: transform == "null",
        });
        Ok(())
    };
    for (ci, (class, mesh)) in base_shapes(freq).iter().enumerate() {
        add(format!("{class}-null"), class, "null", 0, mesh)?;
        for (s, &cond) in AFFINE_CONDITIONS.iter().enumerate() {
            let t = equi_affine_with_condition(1000 * ci as u64 + s as u64, cond)?;
            add(format!("{class}-affine{}", s + 1), class, "affine", s as u32 + 1, &apply_affine(mesh, &t)?)?;
        }
        for (s, &r) in BEND_RADII.iter().enumerate() {
            add(format!("{class}-bend{}", s + 1), class, "isometry", s as u32 + 1, &bend(mesh, r)?)?;
        }
    }
    let manifest = DatasetManifest { entries };
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
