//! Intrinsic symmetries as sign flips of the first non-trivial
//! eigenfunctions.
//!
//! An intrinsic self-isometry `f` maps each simple eigenfunction to `±` itself,
//! so it is parameterized by a sign vector `s`. Each candidate `s` is scored
//! by how well `x -> s ∘ psi(x)` lands on the embedded surface, where
//! `psi_i = phi_i / sqrt(lambda_i)` is the commute-time embedding.

use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::eigen::SpectralDecomposition;
use crate::error::{Error, Result};

pub const DEFAULT_SIGNATURE_LENGTH: usize = 5;
pub const DEFAULT_TOP: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignSignature(pub Vec<i8>);

impl SignSignature {
    pub fn identity(k: usize) -> Self {
        Self(vec![1; k])
    }

    /// Bit `i` of `mask` set means `s_i = -1`.
    pub fn from_mask(mask: u64, k: usize) -> Self {
        Self((0..k).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&s| s == 1)
    }
}

impl fmt::Display for SignSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl Serialize for SignSignature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Per-vertex commute-time coordinates over the chosen eigen-indices.
struct Embedding {
    dim: usize,
    coords: Vec<f64>,
}

impl Embedding {
    fn new(spec: &SpectralDecomposition, indices: &[usize]) -> Result<Self> {
        let n = spec.vertex_count;
        let mut coords = vec![0.0; n * indices.len()];
        for (c, &i) in indices.iter().enumerate() {
            let l = *spec
                .eigenvalues
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("eigenpair {i} not available")))?;
            if !(l > 0.0) {
                return Err(Error::InvalidArgument(format!("eigenvalue {i} is not positive ({l:e})")));
            }
            let w = 1.0 / l.sqrt();
            for (x, v) in spec.eigenvectors[i].iter().enumerate() {
                coords[x * indices.len() + c] = w * v;
            }
        }
        Ok(Self { dim: indices.len(), coords })
    }

    fn point(&self, x: usize) -> &[f64] {
        &self.coords[x * self.dim..(x + 1) * self.dim]
    }

    fn n(&self) -> usize {
        self.coords.len() / self.dim.max(1)
    }

    /// Nearest vertex to `s ∘ psi(x)`; ties go to the lower index.
    fn nearest_flipped(&self, x: usize, signs: &[i8]) -> (usize, f64) {
        let p: Vec<f64> = self.point(x).iter().zip(signs).map(|(v, &s)| v * f64::from(s)).collect();
        let mut best = (x, f64::INFINITY);
        for y in 0..self.n() {
            let d: f64 = self.point(y).iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (y, d);
            }
        }
        best
    }

    fn evaluate(&self, signs: &[i8], area: &[f64]) -> (f64, Vec<usize>) {
        let hits: Vec<(usize, f64)> = (0..self.n()).into_par_iter().map(|x| self.nearest_flipped(x, signs)).collect();
        let energy = hits.iter().zip(area).map(|((_, d), a)| a * d).sum();
        (energy, hits.into_iter().map(|h| h.0).collect())
    }
}

fn check_area(spec: &SpectralDecomposition, area: &[f64]) -> Result<()> {
    if area.len() != spec.vertex_count {
        return Err(Error::DimensionMismatch { expected: spec.vertex_count, found: area.len() });
    }
    Ok(())
}

/// `sum_x area(x) min_x' sum_i (s_i phi_i(x) - phi_i(x'))^2 / lambda_i` over
/// eigen-indices `1..=K`.
pub fn signature_energy(spec: &SpectralDecomposition, s: &SignSignature, area: &[f64]) -> Result<f64> {
    check_area(spec, area)?;
    let indices: Vec<usize> = (1..=s.len()).collect();
    Ok(Embedding::new(spec, &indices)?.evaluate(&s.0, area).0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryCandidate {
    pub signs: SignSignature,
    pub energy: f64,
    /// `f[x]` is the image of vertex `x`.
    pub f: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct SymmetryOptions {
    pub k: usize,
    pub top: usize,
    /// Leave eigenfunctions flagged as multiplet members out of the signature.
    pub drop_multiplets: bool,
}

impl Default for SymmetryOptions {
    fn default() -> Self {
        Self { k: DEFAULT_SIGNATURE_LENGTH, top: DEFAULT_TOP, drop_multiplets: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    /// Eigen-indices the signature positions refer to.
    pub indices: Vec<usize>,
    pub candidates: Vec<SymmetryCandidate>,
    /// Energies of every non-identity signature, by mask order.
    pub all_energies: Vec<f64>,
    pub warnings: Vec<String>,
}

impl SymmetryReport {
    pub fn mean_energy(&self) -> f64 {
        self.all_energies.iter().sum::<f64>() / self.all_energies.len().max(1) as f64
    }
}

/// Scores all `2^K - 1` non-identity signatures and keeps the `top` lowest.
pub fn detect_symmetries(spec: &SpectralDecomposition, area: &[f64], opts: &SymmetryOptions) -> Result<SymmetryReport> {
    check_area(spec, area)?;
    if opts.k == 0 || opts.k > 20 {
        return Err(Error::InvalidArgument(format!("signature length {} outside 1..=20", opts.k)));
    }
    if spec.k() < opts.k + 1 {
        return Err(Error::InvalidArgument(format!(
            "signature length {} needs {} eigenpairs, got {}",
            opts.k,
            opts.k + 1,
            spec.k()
        )));
    }
    let mut warnings = Vec::new();
    let flagged: Vec<usize> = (1..=opts.k).filter(|&i| spec.multiplet[i]).collect();
    let indices: Vec<usize> = if opts.drop_multiplets {
        (1..=opts.k).filter(|i| !flagged.contains(i)).collect()
    } else {
        (1..=opts.k).collect()
    };
    if !flagged.is_empty() {
        warnings.push(format!(
            "eigenvalues {flagged:?} belong to multiplets; sign flips do not describe symmetries on those eigenspaces"
        ));
    }
    if indices.is_empty() {
        return Err(Error::InvalidArgument("every signature index is a multiplet member".into()));
    }
    let emb = Embedding::new(spec, &indices)?;
    let k = indices.len();
    let mut scored: Vec<(u64, f64, Vec<usize>)> = (1..1u64 << k)
        .map(|mask| {
            let s = SignSignature::from_mask(mask, k);
            let (e, f) = emb.evaluate(&s.0, area);
            (mask, e, f)
        })
        .collect();
    let all_energies = scored.iter().map(|s| s.1).collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let candidates = scored
        .into_iter()
        .take(opts.top)
        .map(|(mask, energy, f)| SymmetryCandidate { signs: SignSignature::from_mask(mask, k), energy, f })
        .collect();
    Ok(SymmetryReport { indices, candidates, all_energies, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path graph values: phi_1 odd about the middle, phi_2 even.
    fn mirror_spec() -> SpectralDecomposition {
        SpectralDecomposition {
            eigenvalues: vec![0.0, 1.0, 3.0],
            eigenvectors: vec![vec![1.0; 4], vec![-2.0, -1.0, 1.0, 2.0], vec![1.0, -1.0, -1.0, 1.0]],
            residuals: vec![0.0; 3],
            multiplet: vec![false; 3],
            vertex_count: 4,
            mode: None,
        }
    }

    #[test]
    fn identity_costs_nothing() {
        let s = mirror_spec();
        assert_eq!(signature_energy(&s, &SignSignature::identity(2), &[1.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn mirror_is_found() {
        let s = mirror_spec();
        let r = detect_symmetries(&s, &[1.0; 4], &SymmetryOptions { k: 2, top: 3, drop_multiplets: false }).unwrap();
        assert_eq!(r.all_energies.len(), 3);
        assert_eq!(r.candidates[0].signs.to_string(), "-+");
        assert_eq!(r.candidates[0].energy, 0.0);
        assert_eq!(r.candidates[0].f, vec![3, 2, 1, 0]);
        assert!(r.candidates[1].energy > 0.0);
    }

    #[test]
    fn single_sign() {
        let s = mirror_spec();
        let r = detect_symmetries(&s, &[1.0; 4], &SymmetryOptions { k: 1, top: 3, drop_multiplets: false }).unwrap();
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.candidates[0].signs.to_string(), "-");
    }

    #[test]
    fn masks_and_display() {
        assert_eq!(SignSignature::from_mask(0b101, 4).to_string(), "-+-+");
        assert!(SignSignature::from_mask(0, 3).is_identity());
    }
}
