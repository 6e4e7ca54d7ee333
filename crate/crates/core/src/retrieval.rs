//! Bag-of-features retrieval over per-vertex descriptors: k-means
//! vocabulary, soft quantization, L1 ranking and mean average precision.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::HksDescriptor;
use crate::error::{Error, Result};

pub const DEFAULT_VOCABULARY_SIZE: usize = 64;
const LLOYD_MAX_ITERATIONS: usize = 200;
const LLOYD_RELATIVE_MOVE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub centers: Vec<Vec<f64>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    /// Median over all center pairs of their Euclidean distance.
    pub fn median_center_distance(&self) -> f64 {
        let mut d: Vec<f64> = Vec::new();
        for i in 0..self.size() {
            for j in i + 1..self.size() {
                d.push(sq_dist(&self.centers[i], &self.centers[j]).sqrt());
            }
        }
        median(&mut d)
    }

    /// Gaussian variance `2 * median center distance`.
    pub fn default_sigma2(&self) -> f64 {
        2.0 * self.median_center_distance()
    }
}

fn median(v: &mut [f64]) -> f64 {
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

/// k-means++ seeding then Lloyd iterations over all descriptor rows.
pub fn build_vocabulary(descriptors: &[&HksDescriptor], size: usize, seed: u64) -> Result<Vocabulary> {
    let points: Vec<&[f64]> = descriptors.iter().flat_map(|d| d.values.iter().map(Vec::as_slice)).collect();
    kmeans(&points, size, seed)
}

pub fn kmeans(points: &[&[f64]], size: usize, seed: u64) -> Result<Vocabulary> {
    if size == 0 {
        return Err(Error::InvalidArgument("vocabulary size must be positive".into()));
    }
    if points.len() < size {
        return Err(Error::InsufficientData(format!("{} descriptors for a vocabulary of {size}", points.len())));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.gen_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < size {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InsufficientData(format!(
                "only {} distinct descriptors for a vocabulary of {size}",
                centers.len()
            )));
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = points[pick].to_vec();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }

    let mut assign = vec![0usize; points.len()];
    for _ in 0..LLOYD_MAX_ITERATIONS {
        assign.par_iter_mut().zip(points.par_iter()).for_each(|(a, p)| *a = nearest(p, &centers).0);
        let mut sums = vec![vec![0.0; dim]; size];
        let mut counts = vec![0usize; size];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        let mut moved = 0.0f64;
        let mut scale = 0.0f64;
        for ((c, s), &n) in centers.iter_mut().zip(sums).zip(&counts) {
            scale = scale.max(c.iter().map(|x| x * x).sum::<f64>().sqrt());
            // an emptied cluster keeps its center
            if n == 0 {
                continue;
            }
            let next: Vec<f64> = s.into_iter().map(|x| x / n as f64).collect();
            moved = moved.max(sq_dist(c, &next).sqrt());
            *c = next;
        }
        if moved <= LLOYD_RELATIVE_MOVE * scale.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(Vocabulary { centers })
}

/// Weights `exp(-|p - c|^2 / (2 sigma2))` normalized to sum 1.
pub fn soft_quantize(p: &[f64], vocab: &Vocabulary, sigma2: f64) -> Vec<f64> {
    let d: Vec<f64> = vocab.centers.iter().map(|c| sq_dist(p, c)).collect();
    // shifting by the minimum keeps the nearest weight at exp(0)
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = d.iter().map(|x| (-(x - dmin) / (2.0 * sigma2)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagOfFeatures {
    pub histogram: Vec<f64>,
}

impl BagOfFeatures {
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.histogram.len() != other.histogram.len() {
            return Err(Error::DimensionMismatch { expected: self.histogram.len(), found: other.histogram.len() });
        }
        Ok(self.histogram.iter().zip(&other.histogram).map(|(a, b)| (a - b).abs()).sum())
    }
}

/// `sum_x weight(x) * soft_quantize(p(x))`, L1-normalized. Pass lumped mass
/// for area weighting, or unit weights for plain counting.
pub fn bag_of_features(
    desc: &HksDescriptor,
    vocab: &Vocabulary,
    weights: &[f64],
    sigma2: f64,
) -> Result<BagOfFeatures> {
    if weights.len() != desc.len() {
        return Err(Error::DimensionMismatch { expected: desc.len(), found: weights.len() });
    }
    if desc.dim() != vocab.dim() {
        return Err(Error::DimensionMismatch { expected: vocab.dim(), found: desc.dim() });
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
    }
    let mut h = vec![0.0; vocab.size()];
    for (p, &w) in desc.values.iter().zip(weights) {
        for (hv, q) in h.iter_mut().zip(soft_quantize(p, vocab, sigma2)) {
            *hv += w * q;
        }
    }
    let total: f64 = h.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("bag weights sum to zero".into()));
    }
    h.iter_mut().for_each(|x| *x /= total);
    Ok(BagOfFeatures { histogram: h })
}

/// Corpus indices by ascending L1 distance, ties by index.
pub fn rank(query: &BagOfFeatures, corpus: &[BagOfFeatures]) -> Result<Vec<(usize, f64)>> {
    let mut r: Vec<(usize, f64)> =
        corpus.iter().enumerate().map(|(i, b)| query.l1_distance(b).map(|d| (i, d))).collect::<Result<_>>()?;
    r.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(r)
}

/// Average precision of one ranked relevance list.
pub fn average_precision(relevance: &[bool]) -> Option<f64> {
    let total = relevance.iter().filter(|&&r| r).count();
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &rel) in relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

pub fn mean_average_precision(rankings: &[Vec<bool>]) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::InvalidArgument("no queries".into()));
    }
    let mut sum = 0.0;
    for (q, r) in rankings.iter().enumerate() {
        sum += average_precision(r).ok_or(Error::NoRelevant(q))?;
    }
    Ok(sum / rankings.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub class: String,
    /// `null` for untransformed shapes.
    pub transform: String,
    pub strength: u32,
    #[serde(default)]
    pub query: bool,
    #[serde(default)]
    pub corpus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut m.entries {
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate shape id {:?}", e.id)));
            }
            if !e.path.is_file() {
                return Err(Error::Io {
                    path: e.path.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "listed in manifest"),
                });
            }
        }
        if !self.entries.iter().any(|e| e.query) || !self.entries.iter().any(|e| e.corpus) {
            return Err(Error::InvalidArgument("manifest needs query and corpus entries".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One query's ranked corpus ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub query: String,
    pub transform: String,
    pub strength: u32,
    pub ranking: Vec<(String, f64)>,
    pub average_precision: f64,
}

/// mAP per transform, keyed `"1"`, `"<=2"`, ... over cumulative strengths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub per_transform: BTreeMap<String, BTreeMap<String, f64>>,
    pub overall: f64,
}

fn strength_key(s: u32, first: u32) -> String {
    if s == first {
        s.to_string()
    } else {
        format!("<={s}")
    }
}

/// Ranks every query against the corpus; relevance is class equality, and a
/// query never retrieves itself.
pub fn evaluate(manifest: &DatasetManifest, bags: &[BagOfFeatures]) -> Result<(EvaluationReport, Vec<QueryResult>)> {
    if bags.len() != manifest.entries.len() {
        return Err(Error::DimensionMismatch { expected: manifest.entries.len(), found: bags.len() });
    }
    let corpus: Vec<usize> = (0..bags.len()).filter(|&i| manifest.entries[i].corpus).collect();
    let corpus_bags: Vec<BagOfFeatures> = corpus.iter().map(|&i| bags[i].clone()).collect();
    let mut results = Vec::new();
    for (qi, q) in manifest.entries.iter().enumerate().filter(|(_, e)| e.query) {
        let ranked: Vec<(usize, f64)> =
            rank(&bags[qi], &corpus_bags)?.into_iter().map(|(c, d)| (corpus[c], d)).filter(|&(c, _)| c != qi).collect();
        let relevance: Vec<bool> = ranked.iter().map(|&(c, _)| manifest.entries[c].class == q.class).collect();
        let ap = average_precision(&relevance).ok_or(Error::NoRelevant(qi))?;
        results.push(QueryResult {
            query: q.id.clone(),
            transform: q.transform.clone(),
            strength: q.strength,
            ranking: ranked.iter().map(|&(c, d)| (manifest.entries[c].id.clone(), d)).collect(),
            average_precision: ap,
        });
    }
    if results.is_empty() {
        return Err(Error::InvalidArgument("no queries".into()));
    }

    let mut per_transform: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let transforms: Vec<&str> = {
        let mut t: Vec<&str> = results.iter().map(|r| r.transform.as_str()).collect();
        t.sort_unstable();
        t.dedup();
        t
    };
    for t in transforms {
        let rows: Vec<&QueryResult> = results.iter().filter(|r| r.transform == t).collect();
        let mut strengths: Vec<u32> = rows.iter().map(|r| r.strength).collect();
        strengths.sort_unstable();
        strengths.dedup();
        let first = strengths[0];
        let cols = per_transform.entry(t.to_string()).or_default();
        for &s in &strengths {
            let aps: Vec<f64> = rows.iter().filter(|r| r.strength <= s).map(|r| r.average_precision).collect();
            cols.insert(strength_key(s, first), aps.iter().sum::<f64>() / aps.len() as f64);
        }
    }
    let overall = results.iter().map(|r| r.average_precision).sum::<f64>() / results.len() as f64;
    Ok((EvaluationReport { per_transform, overall }, results))
}

/// `query,rank,id,distance` rows.
pub fn rankings_csv(results: &[QueryResult]) -> String {
    let mut s = String::from("query,rank,id,distance\n");
    for r in results {
        for (i, (id, d)) in r.ranking.iter().enumerate() {
            s.push_str(&format!("{},{},{},{:e}\n", r.query, i + 1, id, d));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(centers: &[&[f64]]) -> Vocabulary {
        Vocabulary { centers: centers.iter().map(|c| c.to_vec()).collect() }
    }

    #[test]
    fn line_weights_by_hand() {
        let v = vocab(&[&[0.0], &[1.0], &[3.0]]);
        let w = soft_quantize(&[1.0], &v, 2.0);
        let raw = [(-0.25f64).exp(), 1.0, (-1.0f64).exp()];
        let total: f64 = raw.iter().sum();
        for (a, b) in w.iter().zip(raw) {
            assert!((a - b / total).abs() < 1e-15);
        }
    }

    #[test]
    fn equidistant_split_and_hard_limit() {
        let v = vocab(&[&[-1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(soft_quantize(&[0.0, 3.0], &v, 0.7), vec![0.5, 0.5]);
        let med = v.median_center_distance();
        let w = soft_quantize(&[1.0, 0.0], &v, 1e-6 * med);
        assert!((w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kmeans_with_k_equal_n_returns_the_points() {
        let pts: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let v = kmeans(&refs, 64, 3).unwrap();
        let mut got = v.centers.clone();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(got, pts);
        assert_eq!(kmeans(&refs, 64, 3).unwrap(), v);
        assert!(matches!(kmeans(&refs, 65, 3), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn ranking_ties_and_self_match() {
        let bags: Vec<BagOfFeatures> = (0..3)
            .map(|i| {
                let mut h = vec![0.0; 3];
                h[i] = 1.0;
                BagOfFeatures { histogram: h }
            })
            .collect();
        let r = rank(&bags[1], &bags).unwrap();
        assert_eq!(r, vec![(1, 0.0), (0, 2.0), (2, 2.0)]);
    }

    #[test]
    fn hand_computed_order() {
        let q = BagOfFeatures { histogram: vec![0.5, 0.5, 0.0] };
        let corpus = vec![
            BagOfFeatures { histogram: vec![0.0, 0.0, 1.0] },
            BagOfFeatures { histogram: vec![0.6, 0.2, 0.2] },
            BagOfFeatures { histogram: vec![0.4, 0.6, 0.0] },
        ];
        let r = rank(&q, &corpus).unwrap();
        let order: Vec<usize> = r.iter().map(|x| x.0).collect();
        assert_eq!(order, vec![2, 1, 0]);
        assert!((r[0].1 - 0.2).abs() < 1e-15 && (r[1].1 - 0.6).abs() < 1e-15 && (r[2].1 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn map_examples() {
        assert_eq!(mean_average_precision(&[vec![true, false], vec![true]]).unwrap(), 1.0);
        assert_eq!(mean_average_precision(&[vec![false, true]]).unwrap(), 0.5);
        assert!(matches!(mean_average_precision(&[vec![false]]), Err(Error::NoRelevant(0))));
    }

    #[test]
    fn concentrated_bag() {
        let desc = HksDescriptor { scales: vec![1.0], values: vec![vec![0.0]; 4] };
        let v = vocab(&[&[0.0], &[1e3]]);
        let b = bag_of_features(&desc, &v, &[1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        assert_eq!(b.histogram, vec![1.0, 0.0]);
    }
}
