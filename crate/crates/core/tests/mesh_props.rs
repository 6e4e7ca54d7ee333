use affdiff::mesh::{parse_obj, parse_off, scalar_ply_string};
use affdiff::shapes::{bumped_blob, icosahedron, tetrahedron};
use affdiff::transform::random_equi_affine;
use affdiff::{apply_affine, AffineTransform, TriangleMesh};
use nalgebra::Matrix3;
use proptest::prelude::*;

#[derive(Debug, Clone, Copy)]
enum Corruption {
    IndexOutOfRange,
    RepeatedIndex,
    FlippedFace,
    DuplicatedFace,
    QuadFace,
    Truncated,
    NonFiniteCoordinate,
    CollapsedVertex,
    UnreferencedVertex,
}

const ALL: [Corruption; 9] = [
    Corruption::IndexOutOfRange,
    Corruption::RepeatedIndex,
    Corruption::FlippedFace,
    Corruption::DuplicatedFace,
    Corruption::QuadFace,
    Corruption::Truncated,
    Corruption::NonFiniteCoordinate,
    Corruption::CollapsedVertex,
    Corruption::UnreferencedVertex,
];

fn off(v: &[[f64; 3]], f: &[Vec<usize>]) -> String {
    let mut s = format!("OFF\n{} {} 0\n", v.len(), f.len());
    for p in v {
        s += &format!("{} {} {}\n", p[0], p[1], p[2]);
    }
    for face in f {
        s += &format!("{}", face.len());
        for i in face {
            s += &format!(" {i}");
        }
        s += "\n";
    }
    s
}

fn corrupted(mesh: &TriangleMesh, c: Corruption, pick: usize) -> String {
    let mut v: Vec<[f64; 3]> = mesh.vertices().iter().map(|p| [p.x, p.y, p.z]).collect();
    let mut f: Vec<Vec<usize>> = mesh.faces().iter().map(|t| t.to_vec()).collect();
    let k = pick % f.len();
    let n = v.len();
    match c {
        Corruption::IndexOutOfRange => f[k][pick % 3] = n + pick % 5,
        Corruption::RepeatedIndex => f[k][1] = f[k][0],
        Corruption::FlippedFace => f[k].swap(1, 2),
        Corruption::DuplicatedFace => f.push(f[k].clone()),
        Corruption::QuadFace => {
            let extra = (0..n).find(|i| !f[k].contains(i)).unwrap();
            f[k].push(extra);
        }
        Corruption::Truncated => {
            let text = off(&v, &f);
            let tokens: Vec<&str> = text.split_whitespace().collect();
            let keep = tokens.len() - 1 - pick % 4;
            return tokens[..keep].join(" ");
        }
        Corruption::NonFiniteCoordinate => {
            v[pick % n][pick % 3] = if pick.is_multiple_of(2) { f64::NAN } else { f64::INFINITY }
        }
        Corruption::CollapsedVertex => {
            let (a, b) = (f[k][0], f[k][1]);
            v[a] = v[b];
        }
        Corruption::UnreferencedVertex => v.push([9.0, 9.0, 9.0]),
    }
    off(&v, &f)
}

proptest! {
    #[test]
    fn corrupted_files_are_rejected(which in 0usize..ALL.len(), pick in 0usize..1000, blob in any::<bool>()) {
        let mesh = if blob { bumped_blob(2, 3) } else { icosahedron() };
        let text = corrupted(&mesh, ALL[which], pick);
        prop_assert!(parse_off(&text).is_err(), "{:?} accepted", ALL[which]);
    }

    #[test]
    fn inverse_transform_restores_vertices(seed in 0u64..10_000, cond in 1.0f64..5.0) {
        let mesh = bumped_blob(3, seed);
        let t = random_equi_affine(seed, cond).unwrap();
        let back = apply_affine(&apply_affine(&mesh, &t).unwrap(), &t.inverse()).unwrap();
        for (a, b) in mesh.vertices().iter().zip(back.vertices()) {
            prop_assert!((a - b).norm() <= 1e-10 * a.norm());
        }
    }
}

#[test]
fn clean_files_load() {
    for mesh in [icosahedron(), bumped_blob(2, 3)] {
        let v: Vec<[f64; 3]> = mesh.vertices().iter().map(|p| [p.x, p.y, p.z]).collect();
        let f: Vec<Vec<usize>> = mesh.faces().iter().map(|t| t.to_vec()).collect();
        let back = parse_off(&off(&v, &f)).unwrap();
        assert_eq!(back.faces(), mesh.faces());
        assert_eq!(back.to_off_string(), parse_off(&back.to_off_string()).unwrap().to_off_string());
    }
}

#[test]
fn one_ring_is_symmetric() {
    for mesh in [icosahedron(), bumped_blob(4, 1), affdiff::shapes::grid(4, 3, |_, _| 0.0)] {
        for f in 0..mesh.face_count() {
            for g in mesh.face_one_ring(f).into_iter().flatten() {
                assert!(mesh.face_one_ring(g).contains(&Some(f)));
                let shared = mesh.faces()[f].iter().filter(|v| mesh.faces()[g].contains(v)).count();
                assert_eq!(shared, 2);
            }
        }
    }
}

#[test]
fn shear_changes_surface_area() {
    let tet = tetrahedron();
    let t = AffineTransform::linear(Matrix3::new(1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)).unwrap();
    assert!(t.is_equi_affine());
    let sheared = apply_affine(&tet, &t).unwrap();
    let brute: f64 = sheared
        .faces()
        .iter()
        .map(|f| {
            let p = f.map(|i| sheared.vertices()[i]);
            0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm()
        })
        .sum();
    assert!((sheared.total_area() - brute).abs() <= 1e-14 * brute);
    assert!((brute - tet.total_area()).abs() > 1e-3);
}

#[test]
fn obj_and_off_agree() {
    let obj = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0.5 0.5 1\nf 1 4 3 2\nf 1 2 5\nf 2 3 5\nf 3 4 5\nf 4 1 5\n";
    let m = parse_obj(obj).unwrap();
    assert_eq!(m.face_count(), 6);
    assert!(m.is_closed());
}

#[test]
fn ply_round_trip_counts() {
    let mesh = bumped_blob(3, 2);
    let field: Vec<f64> = mesh.vertices().iter().map(|p| p.z).collect();
    let ply = scalar_ply_string(&mesh, &field).unwrap();
    let count = |key: &str| -> usize {
        ply.lines().find_map(|l| l.strip_prefix(key)).and_then(|r| r.trim().parse().ok()).unwrap()
    };
    let (nv, nf) = (count("element vertex"), count("element face"));
    assert_eq!((nv, nf), (mesh.vertex_count(), mesh.face_count()));
    let body: Vec<&str> = ply.lines().skip_while(|l| *l != "end_header").skip(1).collect();
    assert_eq!(body.len(), nv + nf);
    assert!(body[nv..].iter().all(|l| l.starts_with("3 ")));
}
