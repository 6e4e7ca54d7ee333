//! Correspondences between small sampled metric spaces, their distortion,
//! and the exact Gromov-Hausdorff distance by exhaustive search.

use serde::Serialize;

use crate::diffusion::{check_connected, commute_time_from, commute_time_unchecked, diffusion_distance};
use crate::eigen::SpectralDecomposition;
use crate::error::{Error, Result};

/// Hard limit on either side of [`gromov_hausdorff_bruteforce`].
pub const GH_SIZE_CAP: usize = 7;
const TRIANGLE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledMetricSpace {
    pub samples: Vec<usize>,
    pub d: Vec<Vec<f64>>,
    pub source: String,
}

impl SampledMetricSpace {
    /// Validates symmetry, zero diagonal, non-negativity and the triangle
    /// inequality (with `1e-8` slack relative to the largest distance).
    pub fn new(samples: Vec<usize>, d: Vec<Vec<f64>>, source: impl Into<String>) -> Result<Self> {
        let n = d.len();
        if samples.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: samples.len() });
        }
        if let Some(row) = d.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
        let scale = d.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            if d[i][i] != 0.0 {
                return Err(Error::InvalidArgument(format!("d[{i}][{i}] = {} is not zero", d[i][i])));
            }
            for j in 0..n {
                if !(d[i][j] >= 0.0) || d[i][j] != d[j][i] {
                    return Err(Error::InvalidArgument(format!("d[{i}][{j}] breaks symmetry or sign")));
                }
                for k in 0..n {
                    if d[i][k] > d[i][j] + d[j][k] + TRIANGLE_SLACK * scale {
                        return Err(Error::InvalidArgument(format!("triangle inequality fails at ({i}, {j}, {k})")));
                    }
                }
            }
        }
        Ok(Self { samples, d, source: source.into() })
    }

    /// Distances given directly, with samples numbered `0..n`.
    pub fn from_matrix(d: Vec<Vec<f64>>) -> Result<Self> {
        let n = d.len();
        Self::new((0..n).collect(), d, "matrix")
    }

    pub fn commute_time(spec: &SpectralDecomposition, samples: &[usize], source: impl Into<String>) -> Result<Self> {
        check_connected(spec)?;
        let d = pairwise(samples, |a, b| commute_time_unchecked(spec, a, b));
        Self::new(samples.to_vec(), d, source)
    }

    pub fn diffusion(
        spec: &SpectralDecomposition,
        samples: &[usize],
        t: f64,
        source: impl Into<String>,
    ) -> Result<Self> {
        let d = pairwise(samples, |a, b| diffusion_distance(spec, a, b, t));
        Self::new(samples.to_vec(), d, source)
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn median_distance(&self) -> f64 {
        let mut v: Vec<f64> =
            (0..self.len()).flat_map(|i| (i + 1..self.len()).map(move |j| (i, j))).map(|(i, j)| self.d[i][j]).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    }
}

fn pairwise(samples: &[usize], dist: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    let n = samples.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = dist(samples[i], samples[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Pairs `(i, j)` of sample positions in `X` and `Y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Correspondence {
    pub pairs: Vec<(usize, usize)>,
}

impl Correspondence {
    pub fn identity(n: usize) -> Self {
        Self { pairs: (0..n).map(|i| (i, i)).collect() }
    }

    pub fn validate(&self, nx: usize, ny: usize) -> Result<()> {
        let mut cx = vec![false; nx];
        let mut cy = vec![false; ny];
        for &(i, j) in &self.pairs {
            if i >= nx || j >= ny {
                return Err(Error::InvalidCorrespondence(format!("pair ({i}, {j}) outside {nx} x {ny}")));
            }
            cx[i] = true;
            cy[j] = true;
        }
        if let Some(i) = cx.iter().position(|c| !c) {
            return Err(Error::InvalidCorrespondence(format!("X point {i} is unmatched")));
        }
        if let Some(j) = cy.iter().position(|c| !c) {
            return Err(Error::InvalidCorrespondence(format!("Y point {j} is unmatched")));
        }
        Ok(())
    }
}

/// `max |d_X(x, x') - d_Y(y, y')|` over pairs `(x, y), (x', y')` in `C`.
pub fn distortion(c: &Correspondence, x: &SampledMetricSpace, y: &SampledMetricSpace) -> Result<f64> {
    c.validate(x.len(), y.len())?;
    let mut m = 0.0f64;
    for (p, &(a, b)) in c.pairs.iter().enumerate() {
        for &(a2, b2) in &c.pairs[p + 1..] {
            m = m.max((x.d[a][a2] - y.d[b][b2]).abs());
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchingReport {
    pub distortion: f64,
    /// `|d_X - d_Y|` for every unordered pair of pairs, row-major over `C`.
    pub stress: Vec<f64>,
}

pub fn evaluate_matching(x: &SampledMetricSpace, y: &SampledMetricSpace, c: &Correspondence) -> Result<MatchingReport> {
    c.validate(x.len(), y.len())?;
    let mut stress = Vec::new();
    for (p, &(a, b)) in c.pairs.iter().enumerate() {
        for &(a2, b2) in &c.pairs[p + 1..] {
            stress.push((x.d[a][a2] - y.d[b][b2]).abs());
        }
    }
    let distortion = stress.iter().copied().fold(0.0, f64::max);
    Ok(MatchingReport { distortion, stress })
}

#[derive(Debug, Clone, Serialize)]
pub struct GromovHausdorff {
    pub dgh: f64,
    pub distortion: f64,
    pub correspondence: Correspondence,
}

struct Search<'a> {
    x: &'a SampledMetricSpace,
    y: &'a SampledMetricSpace,
    pairs: Vec<(usize, usize)>,
    f: Vec<usize>,
    best: f64,
    best_pairs: Option<Vec<(usize, usize)>>,
}

impl Search<'_> {
    fn cost_of(&self, a: usize, b: usize, bound: f64) -> Option<f64> {
        let mut m = 0.0f64;
        for &(a2, b2) in &self.pairs {
            m = m.max((self.x.d[a][a2] - self.y.d[b][b2]).abs());
            if m >= bound {
                return None;
            }
        }
        Some(m)
    }

    fn improves(&self, v: f64) -> bool {
        v < self.best
    }

    fn assign_x(&mut self, i: usize, cur: f64) {
        if i == self.x.len() {
            let covered: Vec<bool> = (0..self.y.len()).map(|j| self.f.contains(&j)).collect();
            self.assign_y(0, &covered, cur);
            return;
        }
        for b in 0..self.y.len() {
            if let Some(c) = self.cost_of(i, b, self.best) {
                let next = cur.max(c);
                if !self.improves(next) {
                    continue;
                }
                self.pairs.push((i, b));
                self.f.push(b);
                self.assign_x(i + 1, next);
                self.f.pop();
                self.pairs.pop();
            }
        }
    }

    fn assign_y(&mut self, j: usize, covered: &[bool], cur: f64) {
        if j == self.y.len() {
            if self.improves(cur) {
                self.best = cur;
                let mut p = self.pairs.clone();
                p.sort_unstable();
                p.dedup();
                self.best_pairs = Some(p);
            }
            return;
        }
        // a target already hit by f adds nothing new: reuse that pair
        if covered[j] {
            self.assign_y(j + 1, covered, cur);
            return;
        }
        for a in 0..self.x.len() {
            if let Some(c) = self.cost_of(a, j, self.best) {
                let next = cur.max(c);
                if !self.improves(next) {
                    continue;
                }
                self.pairs.push((a, j));
                self.assign_y(j + 1, covered, next);
                self.pairs.pop();
            }
        }
    }
}

/// Exact `d_GH = min_C dis(C) / 2` by branch and bound.
///
/// Every correspondence contains a relation `graph(f) ∪ graph(g)^T` and
/// distortion is monotone under inclusion, so the search runs over maps
/// `f: X -> Y` and `g` on the points of `Y` that `f` misses. Ties keep the
/// first minimizer in enumeration order.
pub fn gromov_hausdorff_bruteforce(
    x: &SampledMetricSpace,
    y: &SampledMetricSpace,
    max_size: usize,
) -> Result<GromovHausdorff> {
    let cap = max_size.min(GH_SIZE_CAP);
    for s in [x.len(), y.len()] {
        if s > cap {
            return Err(Error::SizeCap { size: s, cap });
        }
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("metric spaces must be non-empty".into()));
    }
    let mut s = Search { x, y, pairs: Vec::new(), f: Vec::new(), best: f64::INFINITY, best_pairs: None };
    s.assign_x(0, 0.0);
    let pairs = s.best_pairs.expect("some relation is always complete");
    Ok(GromovHausdorff { dgh: 0.5 * s.best, distortion: s.best, correspondence: Correspondence { pairs } })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarthestPoints {
    pub samples: Vec<usize>,
    /// Distance from each added sample to those before it (first is infinite).
    pub radii: Vec<f64>,
}

/// Greedy farthest-point sampling under the commute-time distance, starting
/// from vertex `seed mod n`. Ties pick the lowest vertex index.
pub fn farthest_point_sample(spec: &SpectralDecomposition, count: usize, seed: u64) -> Result<FarthestPoints> {
    let n = spec.vertex_count;
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!("cannot sample {count} of {n} vertices")));
    }
    let first = (seed % n as u64) as usize;
    let mut samples = vec![first];
    let mut radii = vec![f64::INFINITY];
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut near = commute_time_from(spec, first)?;
    while samples.len() < count {
        let mut pick = usize::MAX;
        let mut far = -1.0;
        for (v, &d) in near.iter().enumerate() {
            if !chosen[v] && d > far {
                far = d;
                pick = v;
            }
        }
        chosen[pick] = true;
        samples.push(pick);
        radii.push(far);
        for (a, b) in near.iter_mut().zip(commute_time_from(spec, pick)?) {
            *a = a.min(b);
        }
    }
    Ok(FarthestPoints { samples, radii })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(d: f64) -> SampledMetricSpace {
        SampledMetricSpace::from_matrix(vec![vec![0.0, d], vec![d, 0.0]]).unwrap()
    }

    #[test]
    fn two_point_spaces() {
        let (x, y) = (two(1.0), two(2.0));
        assert_eq!(distortion(&Correspondence::identity(2), &x, &y).unwrap(), 1.0);
        let gh = gromov_hausdorff_bruteforce(&x, &y, 7).unwrap();
        assert_eq!(gh.dgh, 0.5);
    }

    #[test]
    fn single_points() {
        let p = SampledMetricSpace::from_matrix(vec![vec![0.0]]).unwrap();
        assert_eq!(distortion(&Correspondence::identity(1), &p, &p).unwrap(), 0.0);
        assert_eq!(gromov_hausdorff_bruteforce(&p, &two(3.0), 7).unwrap().dgh, 1.5);
    }

    #[test]
    fn surjectivity_enforced() {
        let x = two(1.0);
        let c = Correspondence { pairs: vec![(0, 0), (1, 0)] };
        assert!(matches!(distortion(&c, &x, &x), Err(Error::InvalidCorrespondence(_))));
    }

    #[test]
    fn cap() {
        let d = vec![vec![0.0; 8]; 8];
        let x = SampledMetricSpace::from_matrix(d).unwrap();
        assert!(matches!(gromov_hausdorff_bruteforce(&x, &x, 7), Err(Error::SizeCap { size: 8, cap: 7 })));
    }

    #[test]
    fn triangle_inequality_checked() {
        let d = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(SampledMetricSpace::from_matrix(d).is_err());
    }
}
