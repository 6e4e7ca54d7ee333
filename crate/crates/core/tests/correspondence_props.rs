use affdiff::correspondence::GH_SIZE_CAP;
use affdiff::pipeline::Analysis;
use affdiff::shapes::bumped_blob;
use affdiff::{
    distortion, evaluate_matching, farthest_point_sample, gromov_hausdorff_bruteforce, Correspondence, MetricMode,
    SampledMetricSpace,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space(points: &[(f64, f64)]) -> SampledMetricSpace {
    let d = points.iter().map(|a| points.iter().map(|b| (a.0 - b.0).hypot(a.1 - b.1)).collect()).collect();
    SampledMetricSpace::from_matrix(d).unwrap()
}

fn points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..=max)
}

/// Minimum distortion over every pair subset that covers both sides.
fn naive_min_distortion(x: &SampledMetricSpace, y: &SampledMetricSpace) -> f64 {
    let all: Vec<(usize, usize)> = (0..x.len()).flat_map(|i| (0..y.len()).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << all.len()) {
        let pairs: Vec<_> = all.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, p)| *p).collect();
        let c = Correspondence { pairs };
        if let Ok(d) = distortion(&c, x, y) {
            best = best.min(d);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gh_is_symmetric_and_vanishes_on_the_diagonal(a in points(4), b in points(4)) {
        let (x, y) = (space(&a), space(&b));
        let xy = gromov_hausdorff_bruteforce(&x, &y, GH_SIZE_CAP).unwrap();
        let yx = gromov_hausdorff_bruteforce(&y, &x, GH_SIZE_CAP).unwrap();
        prop_assert_eq!(xy.dgh, yx.dgh);
        prop_assert_eq!(gromov_hausdorff_bruteforce(&x, &x, GH_SIZE_CAP).unwrap().dgh, 0.0);
        prop_assert_eq!(distortion(&xy.correspondence, &x, &y).unwrap(), xy.distortion);
    }

    #[test]
    fn gh_matches_naive_enumeration(a in points(3), b in points(3)) {
        let (x, y) = (space(&a), space(&b));
        let gh = gromov_hausdorff_bruteforce(&x, &y, GH_SIZE_CAP).unwrap();
        prop_assert_eq!(gh.distortion, naive_min_distortion(&x, &y));
    }

    #[test]
    fn near_isometric_spaces_are_close(a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4), seed in 0u64..1000) {
        let eps = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // moving each point by at most eps/2 changes every distance by at most eps
        let b: Vec<(f64, f64)> = a
            .iter()
            .map(|&(u, v)| {
                let (r, th) = (rng.gen_range(0.0..0.5 * eps), rng.gen_range(0.0..std::f64::consts::TAU));
                (u + r * th.cos(), v + r * th.sin())
            })
            .collect();
        let (x, y) = (space(&a), space(&b));
        let gh = gromov_hausdorff_bruteforce(&x, &y, GH_SIZE_CAP).unwrap();
        prop_assert!(gh.dgh <= 0.5 * eps + 1e-15);
        prop_assert!(gh.dgh <= 2.0 * eps);
    }
}

#[test]
fn hand_enumerated_cases() {
    let two = |d: f64| SampledMetricSpace::from_matrix(vec![vec![0.0, d], vec![d, 0.0]]).unwrap();
    assert_eq!(gromov_hausdorff_bruteforce(&two(1.0), &two(2.0), 7).unwrap().dgh, 0.5);

    let tri =
        |s: f64| SampledMetricSpace::from_matrix(vec![vec![0.0, s, s], vec![s, 0.0, s], vec![s, s, 0.0]]).unwrap();
    let point = SampledMetricSpace::from_matrix(vec![vec![0.0]]).unwrap();
    assert_eq!(gromov_hausdorff_bruteforce(&tri(1.0), &tri(2.0), 7).unwrap().dgh, 0.5);
    assert_eq!(gromov_hausdorff_bruteforce(&tri(1.0), &point, 7).unwrap().dgh, 0.5);

    // 0, 1, 2 on a line against two points at distance 1
    let line = space(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
    let gh = gromov_hausdorff_bruteforce(&line, &two(1.0), 7).unwrap();
    assert_eq!(gh.dgh, 0.5);
    gh.correspondence.validate(3, 2).unwrap();
}

#[test]
fn minimizer_beats_random_correspondences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
        (0..5).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    };
    let (x, y) = (space(&pts(&mut rng)), space(&pts(&mut rng)));
    let gh = gromov_hausdorff_bruteforce(&x, &y, GH_SIZE_CAP).unwrap();
    for _ in 0..100 {
        let mut pairs: Vec<(usize, usize)> = (0..5).map(|i| (i, rng.gen_range(0..5))).collect();
        pairs.extend((0..5).map(|j| (rng.gen_range(0..5), j)));
        let d = distortion(&Correspondence { pairs }, &x, &y).unwrap();
        assert!(gh.distortion <= d);
    }
}

#[test]
fn size_cap_is_enforced() {
    let big = space(&(0..8).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
    assert!(gromov_hausdorff_bruteforce(&big, &big, 100).is_err());
    let small = space(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
    assert!(gromov_hausdorff_bruteforce(&small, &small, 2).is_err());
}

#[test]
fn identity_matching_on_equal_spaces_has_no_stress() {
    let x = space(&[(0.0, 0.0), (1.0, 0.5), (0.2, 2.0), (-1.0, 0.3)]);
    let r = evaluate_matching(&x, &x, &Correspondence::identity(4)).unwrap();
    assert_eq!(r.distortion, 0.0);
    assert_eq!(r.stress.len(), 6);
    assert!(r.stress.iter().all(|&s| s == 0.0));
}

#[test]
fn farthest_points_are_greedy() {
    let spec = Analysis::run(&bumped_blob(3, 1), MetricMode::EquiAffine, 20, 1e-10).unwrap().spectrum;
    let n = spec.vertex_count;
    assert_eq!(farthest_point_sample(&spec, 1, 17).unwrap().samples, vec![17]);
    assert_eq!(farthest_point_sample(&spec, 1, n as u64 + 4).unwrap().samples, vec![4]);
    let all = farthest_point_sample(&spec, n, 0).unwrap();
    let mut sorted = all.samples.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    assert!(all.radii.windows(2).all(|w| w[1] <= w[0]));
    assert!(farthest_point_sample(&spec, n + 1, 0).is_err());
    assert_eq!(farthest_point_sample(&spec, 30, 5).unwrap(), farthest_point_sample(&spec, 30, 5).unwrap());
}
