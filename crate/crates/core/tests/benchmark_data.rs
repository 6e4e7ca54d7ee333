use std::path::PathBuf;

use affdiff::benchmark::{write_benchmark, DEFAULT_FREQUENCY};
use affdiff::DatasetManifest;

fn bundled() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/benchmark")
}

#[test]
fn bundled_benchmark_regenerates_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_benchmark(tmp.path(), DEFAULT_FREQUENCY).unwrap();
    let mut names: Vec<String> = manifest.entries.iter().map(|e| e.path.display().to_string()).collect();
    names.push("manifest.json".into());
    for name in &names {
        let fresh = std::fs::read(tmp.path().join(name)).unwrap();
        let kept = std::fs::read(bundled().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(fresh == kept, "{name} differs from the bundled copy");
    }
    let on_disk = std::fs::read_dir(bundled()).unwrap().count();
    assert_eq!(on_disk, names.len());
}

#[test]
fn bundled_manifest_layout() {
    let m = DatasetManifest::load(bundled().join("manifest.json")).unwrap();
    m.validate().unwrap();
    assert_eq!(m.entries.len(), 6 * 9);
    let classes: std::collections::BTreeSet<&str> = m.entries.iter().map(|e| e.class.as_str()).collect();
    assert_eq!(classes.len(), 6);
    for class in classes {
        let rows: Vec<_> = m.entries.iter().filter(|e| e.class == class).collect();
        assert_eq!(rows.iter().filter(|e| e.transform == "null" && e.corpus && !e.query).count(), 1);
        let affine: Vec<u32> = rows.iter().filter(|e| e.transform == "affine").map(|e| e.strength).collect();
        assert_eq!(affine, vec![1, 2, 3, 4, 5]);
        assert_eq!(rows.iter().filter(|e| e.transform == "isometry" && e.query).count(), 3);
    }
}
