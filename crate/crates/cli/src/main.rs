//! `affdiff`: spectra, descriptors, distances, retrieval, symmetry and
//! matching for triangle meshes under the Euclidean or equi-affine metric.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use affdiff::correspondence::{
    evaluate_matching, farthest_point_sample, gromov_hausdorff_bruteforce, Correspondence, SampledMetricSpace,
    GH_SIZE_CAP,
};
use affdiff::diffusion::{self, geometric_scales, DiffusionExponent};
use affdiff::eigen::DEFAULT_TOL;
use affdiff::mesh::{export_scalar_ply, load_mesh_auto, TriangleMesh};
use affdiff::pipeline::{run_retrieval, Analysis, Quantization, RetrievalConfig};
use affdiff::retrieval::{rankings_csv, DatasetManifest};
use affdiff::symmetry::{detect_symmetries, SymmetryOptions};
use affdiff::transform::{apply_affine, random_equi_affine, AffineTransform};
use affdiff::{Error, ErrorClass, MetricMode, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "affdiff", version, about = "Equi-affine invariant spectral geometry of triangle meshes")]
struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker thread cap (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpectralArgs {
    /// Metric defining the Laplace-Beltrami operator.
    #[arg(long, value_enum, default_value_t = Mode::EquiAffine)]
    mode: Mode,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Relative eigen-residual tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Euclidean,
    EquiAffine,
}

impl From<Mode> for MetricMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Euclidean => MetricMode::Euclidean,
            Mode::EquiAffine => MetricMode::EquiAffine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceKind {
    Commute,
    Diffusion,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest eigenpairs of the Laplace-Beltrami operator.
    Spectrum {
        mesh: PathBuf,
        #[command(flatten)]
        spectral: SpectralArgs,
        /// Also write per-face metric records to metric.json.
        #[arg(long)]
        dump_metric: bool,
        /// Also write stiffness.mtx and mass.mtx (Matrix Market).
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Heat kernel signature at every vertex.
    Hks {
        mesh: PathBuf,
        #[command(flatten)]
        spectral: SpectralArgs,
        /// Comma-separated ascending diffusion times (default: 1024 * 2^(2k/5), k = 0..5).
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
    },
    /// Commute-time or diffusion distance between two vertices.
    Distance {
        mesh: PathBuf,
        #[command(flatten)]
        spectral: SpectralArgs,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        #[arg(long, value_enum, default_value_t = DistanceKind::Commute)]
        kind: DistanceKind,
        /// Diffusion time.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Use exp(-lambda t) instead of exp(-2 lambda t) in the diffusion distance.
        #[arg(long)]
        literal_exponent: bool,
    },
    /// Bag-of-features retrieval over a dataset manifest.
    Retrieve {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::EquiAffine)]
        mode: Mode,
        #[arg(long, default_value_t = 60)]
        k: usize,
        /// Comma-separated ascending HKS times (default: 0.05 * 2^(2k/5), k = 0..5).
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        #[arg(long, default_value_t = 64)]
        vocabulary_size: usize,
        /// Soft-quantization variance (default: twice the median center distance).
        #[arg(long, conflicts_with = "sigma_relative")]
        sigma2: Option<f64>,
        /// Soft-quantization width as a fraction of the median center distance.
        #[arg(long)]
        sigma_relative: Option<f64>,
        /// Count vertices instead of weighting them by area.
        #[arg(long)]
        count_weights: bool,
    },
    /// Intrinsic symmetries from eigenfunction sign flips.
    Symmetry {
        mesh: PathBuf,
        #[command(flatten)]
        spectral: SpectralArgs,
        /// Number of non-trivial eigenfunctions in a signature.
        #[arg(long, default_value_t = 5)]
        signature_length: usize,
        /// Number of lowest-energy signatures to report.
        #[arg(long, default_value_t = 3)]
        top: usize,
        /// Leave multiplet eigenfunctions out of the signature.
        #[arg(long)]
        drop_multiplets: bool,
    },
    /// Distortion of the vertex-identity correspondence between two meshes
    /// with equal connectivity, on farthest-point samples.
    Match {
        x: PathBuf,
        y: PathBuf,
        #[command(flatten)]
        spectral: SpectralArgs,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = DistanceKind::Commute)]
        kind: DistanceKind,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Also compute the exact Gromov-Hausdorff distance (at most 7 samples).
        #[arg(long)]
        gh: bool,
    },
    /// Apply a random or given affine map and write the result as OFF.
    Transform {
        mesh: PathBuf,
        /// Row-major 3x3 matrix, optionally followed by a translation (9 or 12 numbers).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        matrix: Option<Vec<f64>>,
        /// Condition-number bound of the random det-1 map.
        #[arg(long, default_value_t = 5.0)]
        max_condition: f64,
        /// Refuse maps whose determinant is not 1.
        #[arg(long)]
        det_check: bool,
    },
    /// Colored PLY of a per-vertex scalar field.
    Export {
        mesh: PathBuf,
        /// JSON array with one value per vertex.
        #[arg(long, conflicts_with = "eigenvector")]
        field: Option<PathBuf>,
        /// Eigenvector index to draw instead of a field file.
        #[arg(long)]
        eigenvector: Option<usize>,
        #[arg(long, value_enum, default_value_t = Mode::EquiAffine)]
        mode: Mode,
    },
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    Ok(path)
}

fn analyze(mesh: &TriangleMesh, s: &SpectralArgs) -> Result<Analysis> {
    Analysis::run(mesh, s.mode.into(), s.k, s.tol)
}

fn check_vertex(mesh: &TriangleMesh, v: usize) -> Result<()> {
    if v >= mesh.vertex_count() {
        return Err(Error::InvalidArgument(format!("vertex {v} outside 0..{}", mesh.vertex_count())));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let out = cli.out.as_path();
    fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    let mut written = Vec::new();
    match cli.command {
        Command::Spectrum { mesh, spectral, dump_metric, dump_matrices } => {
            let m = load_mesh_auto(&mesh)?;
            let a = analyze(&m, &spectral)?;
            let s = &a.spectrum;
            written.push(write_json(
                out,
                "spectrum.json",
                &json!({
                    "mode": a.metric.mode,
                    "k": s.k(),
                    "vertex_count": s.vertex_count,
                    "lambda": s.eigenvalues,
                    "residuals": s.residuals,
                    "multiplet": s.multiplet,
                    "metric_fallbacks": a.metric.fallback_count(),
                }),
            )?);
            if dump_metric {
                written.push(write_json(out, "metric.json", &a.metric.debug_records())?);
            }
            if dump_matrices {
                written.push(write_text(out, "stiffness.mtx", &a.system.stiffness.to_matrix_market())?);
                written.push(write_text(out, "mass.mtx", &a.system.mass.to_matrix_market())?);
            }
        }
        Command::Hks { mesh, spectral, scales } => {
            let m = load_mesh_auto(&mesh)?;
            let a = analyze(&m, &spectral)?;
            let scales = scales.unwrap_or_else(diffusion::default_scales);
            let h = diffusion::hks(&a.spectrum, &scales)?;
            written.push(write_json(
                out,
                "hks.json",
                &json!({ "mode": a.metric.mode, "scales": h.scales, "values": h.values }),
            )?);
        }
        Command::Distance { mesh, spectral, from, to, kind, t, literal_exponent } => {
            let m = load_mesh_auto(&mesh)?;
            check_vertex(&m, from)?;
            check_vertex(&m, to)?;
            let a = analyze(&m, &spectral)?;
            let (name, value) = match kind {
                DistanceKind::Commute => ("commute", diffusion::commute_time(&a.spectrum, from, to)?),
                DistanceKind::Diffusion => {
                    if t.is_nan() || t <= 0.0 {
                        return Err(Error::InvalidArgument(format!("diffusion time must be positive, got {t}")));
                    }
                    let e = if literal_exponent { DiffusionExponent::Literal } else { DiffusionExponent::Doubled };
                    ("diffusion", diffusion::diffusion_distance_with(&a.spectrum, from, to, t, e))
                }
            };
            written.push(write_json(
                out,
                "distance.json",
                &json!({ "mode": a.metric.mode, "kind": name, "from": from, "to": to, "t": t, "value": value }),
            )?);
        }
        Command::Retrieve { manifest, mode, k, scales, vocabulary_size, sigma2, sigma_relative, count_weights } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let mut config = RetrievalConfig::unit_scale(mode.into());
            config.k = k;
            config.scales = scales.unwrap_or_else(|| geometric_scales(0.05, 6));
            config.vocabulary_size = vocabulary_size;
            config.quantization = match (sigma2, sigma_relative) {
                (Some(v), _) => Quantization::Fixed(v),
                (None, Some(f)) => Quantization::RelativeWidth(f),
                (None, None) => Quantization::TwiceMedianDistance,
            };
            config.area_weighted = !count_weights;
            config.seed = cli.seed;
            let run = run_retrieval(&manifest, &config)?;
            written.push(write_json(
                out,
                "report.json",
                &json!({ "config": run.config, "per_transform": run.report.per_transform, "overall": run.report.overall }),
            )?);
            written.push(write_text(out, "rankings.csv", &rankings_csv(&run.queries))?);
        }
        Command::Symmetry { mesh, spectral, signature_length, top, drop_multiplets } => {
            let m = load_mesh_auto(&mesh)?;
            let mut spectral = spectral;
            spectral.k = spectral.k.max(signature_length + 1);
            let a = analyze(&m, &spectral)?;
            let opts = SymmetryOptions { k: signature_length, top, drop_multiplets };
            let r = detect_symmetries(&a.spectrum, &a.lumped_mass(), &opts)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            written.push(write_json(
                out,
                "symmetry.json",
                &json!({
                    "mode": a.metric.mode,
                    "indices": r.indices,
                    "mean_energy": r.mean_energy(),
                    "warnings": r.warnings,
                    "candidates": r.candidates,
                }),
            )?);
        }
        Command::Match { x, y, spectral, samples, kind, t, gh } => {
            let mx = load_mesh_auto(&x)?;
            let my = load_mesh_auto(&y)?;
            if mx.faces() != my.faces() {
                return Err(Error::InvalidCorrespondence("meshes do not share connectivity".into()));
            }
            let ax = analyze(&mx, &spectral)?;
            let ay = analyze(&my, &spectral)?;
            let fps = farthest_point_sample(&ax.spectrum, samples, cli.seed)?;
            let space = |a: &Analysis, name: &str| match kind {
                DistanceKind::Commute => SampledMetricSpace::commute_time(&a.spectrum, &fps.samples, name),
                DistanceKind::Diffusion => SampledMetricSpace::diffusion(&a.spectrum, &fps.samples, t, name),
            };
            let sx = space(&ax, "x")?;
            let sy = space(&ay, "y")?;
            let c = Correspondence::identity(samples);
            let report = evaluate_matching(&sx, &sy, &c)?;
            let dgh = if gh {
                if samples > GH_SIZE_CAP {
                    return Err(Error::SizeCap { size: samples, cap: GH_SIZE_CAP });
                }
                Some(gromov_hausdorff_bruteforce(&sx, &sy, GH_SIZE_CAP)?)
            } else {
                None
            };
            written.push(write_json(
                out,
                "match.json",
                &json!({
                    "mode": ax.metric.mode,
                    "samples": fps.samples,
                    "distortion": report.distortion,
                    "median_distance": sx.median_distance(),
                    "dgh": dgh.as_ref().map(|g| g.dgh),
                    "pairs": dgh.as_ref().map_or(c.pairs.clone(), |g| g.correspondence.pairs.clone()),
                    "stress": report.stress,
                }),
            )?);
        }
        Command::Transform { mesh, matrix, max_condition, det_check } => {
            let m = load_mesh_auto(&mesh)?;
            let t = match matrix {
                Some(v) => AffineTransform::from_row_slice(&v)?,
                None => random_equi_affine(cli.seed, max_condition)?,
            };
            if det_check && !t.is_equi_affine() {
                return Err(Error::NotVolumePreserving(t.determinant()));
            }
            let moved = apply_affine(&m, &t)?;
            written.push(write_text(out, "transformed.off", &moved.to_off_string())?);
            written.push(write_json(
                out,
                "transform.json",
                &json!({
                    "matrix": t.matrix().transpose().as_slice(),
                    "translation": t.translation().as_slice(),
                    "determinant": t.determinant(),
                    "condition": t.condition_number(),
                }),
            )?);
        }
        Command::Export { mesh, field, eigenvector, mode } => {
            let m = load_mesh_auto(&mesh)?;
            let values: Vec<f64> = match (field, eigenvector) {
                (Some(p), _) => {
                    let text = fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    serde_json::from_str(&text)?
                }
                (None, Some(i)) => {
                    let spectral = SpectralArgs { mode, k: i + 1, tol: DEFAULT_TOL };
                    analyze(&m, &spectral)?.spectrum.eigenvectors[i].clone()
                }
                (None, None) => return Err(Error::InvalidArgument("pass --field or --eigenvector".into())),
            };
            let path = out.join("field.ply");
            export_scalar_ply(&m, &values, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Input => 2,
        ErrorClass::Validation => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = json!({ "error": e.code(), "message": e.to_string(), "exit_code": exit_code(&e) });
            eprintln!("{record}");
            ExitCode::from(exit_code(&e))
        }
    }
}
