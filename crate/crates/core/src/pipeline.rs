//! End-to-end chains used by the command line and the benchmark.

use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::{geometric_scales, hks, HksDescriptor};
use crate::eigen::{smallest_eigenpairs, SpectralDecomposition, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fem::{assemble, FemSystem};
use crate::mesh::{load_mesh_auto, TriangleMesh};
use crate::metric::{compute_metric_field, MetricField, MetricMode};
use crate::retrieval::{
    bag_of_features, evaluate, kmeans, BagOfFeatures, DatasetManifest, EvaluationReport, QueryResult, Vocabulary,
    DEFAULT_VOCABULARY_SIZE,
};

/// Metric, matrices and the low spectrum of one mesh.
pub struct Analysis {
    pub metric: MetricField,
    pub system: FemSystem,
    pub spectrum: SpectralDecomposition,
}

impl Analysis {
    pub fn run(mesh: &TriangleMesh, mode: MetricMode, k: usize, tol: f64) -> Result<Self> {
        let metric = compute_metric_field(mesh, mode)?;
        let system = assemble(mesh, &metric)?;
        let k = k.min(mesh.vertex_count());
        let spectrum = smallest_eigenpairs(&system, k, tol)?;
        Ok(Self { metric, system, spectrum })
    }

    pub fn lumped_mass(&self) -> Vec<f64> {
        self.system.lumped_mass()
    }
}

/// Variance of the soft quantization kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantization {
    /// `sigma2 = 2 * median center distance`. Mixes units, so its sharpness
    /// depends on the descriptor scale.
    TwiceMedianDistance,
    /// `sigma = f * median center distance`.
    RelativeWidth(f64),
    Fixed(f64),
}

impl Quantization {
    pub fn sigma2(&self, vocab: &Vocabulary) -> f64 {
        match *self {
            Quantization::TwiceMedianDistance => vocab.default_sigma2(),
            Quantization::RelativeWidth(f) => (f * vocab.median_center_distance()).powi(2),
            Quantization::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrievalConfig {
    pub mode: MetricMode,
    pub k: usize,
    pub scales: Vec<f64>,
    pub vocabulary_size: usize,
    pub quantization: Quantization,
    pub area_weighted: bool,
    pub seed: u64,
}

impl RetrievalConfig {
    /// Settings for shapes of roughly unit size and volume.
    pub fn unit_scale(mode: MetricMode) -> Self {
        Self {
            mode,
            k: 60,
            scales: geometric_scales(0.05, 6),
            vocabulary_size: DEFAULT_VOCABULARY_SIZE,
            quantization: Quantization::RelativeWidth(0.5),
            area_weighted: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrievalRun {
    pub config: RetrievalConfig,
    pub report: EvaluationReport,
    pub queries: Vec<QueryResult>,
    #[serde(skip)]
    pub vocabulary: Vocabulary,
    #[serde(skip)]
    pub bags: Vec<BagOfFeatures>,
}

/// HKS descriptors and bag weights for every manifest entry.
pub fn describe(mesh: &TriangleMesh, config: &RetrievalConfig) -> Result<(HksDescriptor, Vec<f64>)> {
    let a = Analysis::run(mesh, config.mode, config.k, DEFAULT_TOL)?;
    let desc = hks(&a.spectrum, &config.scales)?;
    let w = if config.area_weighted { a.lumped_mass() } else { vec![1.0; mesh.vertex_count()] };
    Ok((desc, w))
}

pub fn run_retrieval(manifest: &DatasetManifest, config: &RetrievalConfig) -> Result<RetrievalRun> {
    let described: Vec<(HksDescriptor, Vec<f64>)> = manifest
        .entries
        .par_iter()
        .map(|e| load_mesh_auto(&e.path).and_then(|m| describe(&m, config)))
        .collect::<Result<_>>()?;
    let training: Vec<&[f64]> = manifest
        .entries
        .iter()
        .zip(&described)
        .filter(|(e, _)| e.corpus)
        .flat_map(|(_, (d, _))| d.values.iter().map(Vec::as_slice))
        .collect();
    if training.is_empty() {
        return Err(Error::InvalidArgument("manifest has no corpus shapes".into()));
    }
    let vocabulary = kmeans(&training, config.vocabulary_size, config.seed)?;
    let sigma2 = config.quantization.sigma2(&vocabulary);
    let bags: Vec<BagOfFeatures> =
        described.par_iter().map(|(d, w)| bag_of_features(d, &vocabulary, w, sigma2)).collect::<Result<_>>()?;
    let (report, queries) = evaluate(manifest, &bags)?;
    Ok(RetrievalRun { config: config.clone(), report, queries, vocabulary, bags })
}
