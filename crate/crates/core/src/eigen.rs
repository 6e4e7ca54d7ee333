//! Smallest eigenpairs of the generalized problem `A x = lambda B x`.
//!
//! Shift-invert block Lanczos in the `B` inner product: the operator
//! `(A - sigma B)^{-1} B` is applied to a block of vectors, every new vector
//! is `B`-orthogonalized against the whole basis (repeated Gram-Schmidt), and Ritz pairs are
//! extracted from `A` projected onto the basis. The block width covers exactly
//! degenerate eigenvalues up to that multiplicity (symmetric meshes produce
//! them).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cholesky::EnvelopeCholesky;
use crate::error::{Error, Result};
use crate::fem::FemSystem;
use crate::metric::MetricMode;
use crate::sparse::{axpy, dot, norm2, CsrMatrix};

/// Relative gap below which neighboring eigenvalues form a multiplet.
pub const MULTIPLET_TOL: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub block_size: usize,
    /// Krylov basis size limit as a multiple of the requested count.
    pub budget_factor: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { block_size: 8, budget_factor: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `B`-orthonormal vertex values, one vector per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `||A x - lambda B x||` per pair.
    pub residuals: Vec<f64>,
    /// Member of a (numerically) repeated eigenvalue.
    pub multiplet: Vec<bool>,
    pub vertex_count: usize,
    pub mode: Option<MetricMode>,
}

impl SpectralDecomposition {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn phi(&self, i: usize) -> &[f64] {
        &self.eigenvectors[i]
    }

    /// Keeps the first `k` pairs.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.k());
        Self {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenvectors: self.eigenvectors[..k].to_vec(),
            residuals: self.residuals[..k].to_vec(),
            multiplet: self.multiplet[..k].to_vec(),
            vertex_count: self.vertex_count,
            mode: self.mode,
        }
    }
}

pub fn smallest_eigenpairs(system: &FemSystem, k: usize, tol: f64) -> Result<SpectralDecomposition> {
    let mut s = solve_generalized(&system.stiffness, &system.mass, k, tol, &EigenOptions::default())?;
    s.mode = Some(system.mode);
    Ok(s)
}

struct Basis<'a> {
    b: &'a CsrMatrix,
    v: Vec<Vec<f64>>,
    bv: Vec<Vec<f64>>,
}

impl Basis<'_> {
    /// B-orthogonalizes `w` against the basis and appends it. Passes repeat
    /// while a pass removes more than `1/sqrt(2)` of the norm (at most four).
    /// Returns false when `w` is numerically dependent.
    fn push(&mut self, mut w: Vec<f64>) -> bool {
        let mut bw = self.b.mul_vec(&w);
        let before = dot(&w, &bw).max(0.0).sqrt();
        if before == 0.0 || !before.is_finite() {
            return false;
        }
        let mut norm = before;
        for _ in 0..4 {
            let coef: Vec<f64> = self.bv.iter().map(|bvi| dot(bvi, &w)).collect();
            for (c, vi) in coef.iter().zip(&self.v) {
                axpy(-c, vi, &mut w);
            }
            bw = self.b.mul_vec(&w);
            let next = dot(&w, &bw).max(0.0).sqrt();
            let settled = next >= std::f64::consts::FRAC_1_SQRT_2 * norm;
            norm = next;
            if settled {
                break;
            }
        }
        if !(norm > 1e-10 * before) {
            return false;
        }
        let inv = 1.0 / norm;
        w.iter_mut().for_each(|x| *x *= inv);
        self.bv.push(bw.into_iter().map(|x| x * inv).collect());
        self.v.push(w);
        true
    }

    fn len(&self) -> usize {
        self.v.len()
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Factors `A - sigma B`, doubling `sigma` on failure (up to three retries).
///
/// `trace(A) / trace(B)` is a mid-spectrum eigenvalue scale, about `n` times
/// the first nonzero eigenvalue, so `|sigma|` sits near `1e-6 n lambda_1`: small
/// enough for fast convergence, large enough that the near-null direction is
/// amplified by at most about `1e6` in the inverse.
fn factor_shifted(a: &CsrMatrix, b: &CsrMatrix) -> Result<(EnvelopeCholesky, f64)> {
    let mut sigma = -1e-6 * a.trace() / b.trace();
    if !(sigma < 0.0) {
        sigma = -1e-6;
    }
    let mut last = None;
    for _ in 0..4 {
        match EnvelopeCholesky::factor(&a.add_scaled(b, -sigma)) {
            Ok(f) => return Ok((f, sigma)),
            Err(e) => last = Some(e),
        }
        sigma *= 2.0;
    }
    Err(last.unwrap_or_else(|| Error::Factorization("unreachable".into())))
}

/// Restarts allowed once the basis reaches its size limit.
const MAX_RESTARTS: usize = 40;

pub fn solve_generalized(
    a: &CsrMatrix,
    b: &CsrMatrix,
    k: usize,
    tol: f64,
    opts: &EigenOptions,
) -> Result<SpectralDecomposition> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.n() });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs of a {n}x{n} problem")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let (chol, _sigma) = factor_shifted(a, b)?;
    let norm_a = a.norm_inf().max(f64::MIN_POSITIVE);
    let abs_tol = tol * norm_a;
    let p = opts.block_size.clamp(1, n);
    let cap = n.min((opts.budget_factor * k).max(k + 2 * p));
    // Ritz vectors carried over a restart
    let keep = (k + p).min(cap.saturating_sub(p)).max(k);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut basis = Basis { b, v: Vec::new(), bv: Vec::new() };
    let mut guard = 0;
    while basis.len() < p && guard < 10 * p {
        basis.push(random_vector(&mut rng, n));
        guard += 1;
    }

    // Krylov vectors come from the shifted inverse; Ritz values come from
    // A itself, since the inverse dwarfs everything near the zero mode.
    // proj[j][i] = v_i . A v_j for i <= j
    let mut proj: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut processed = 0;
    let mut restarts = 0;
    loop {
        let m = basis.len();
        for j in processed..m {
            let av = a.mul_vec(&basis.v[j]);
            proj.push(basis.v[..=j].iter().map(|vi| dot(vi, &av)).collect());
            images.push(chol.solve(&basis.bv[j]));
        }
        processed = m;

        let full = m == n;
        if m >= k {
            let pairs = ritz_pairs(&basis, &proj, a, b, if m >= cap && !full { keep } else { k });
            if pairs[..k].iter().all(|p| p.residual <= abs_tol) {
                return Ok(finish(pairs.into_iter().take(k).collect(), n, norm_a));
            }
            if full {
                let worst = pairs[..k].iter().map(|p| p.residual).fold(0.0, f64::max);
                return Err(Error::Convergence(format!("residual {worst:e} above tolerance {abs_tol:e}")));
            }
            if m >= cap {
                if restarts == MAX_RESTARTS {
                    let worst = pairs[..k].iter().map(|p| p.residual).fold(0.0, f64::max);
                    return Err(Error::Convergence(format!(
                        "residual {worst:e} above tolerance {abs_tol:e} after {restarts} restarts"
                    )));
                }
                restarts += 1;
                basis = Basis { b, v: Vec::new(), bv: Vec::new() };
                for pair in pairs {
                    basis.push(pair.vector);
                }
                proj.clear();
                images.clear();
                processed = 0;
                continue;
            }
        }

        let new_images = std::mem::take(&mut images);
        for w in new_images {
            if basis.len() >= cap {
                break;
            }
            if !basis.push(w) {
                // invariant subspace: continue from a fresh direction
                let mut tries = 0;
                while tries < 5 && !basis.push(random_vector(&mut rng, n)) {
                    tries += 1;
                }
            }
        }
        if basis.len() == m {
            return Err(Error::Convergence("Krylov space exhausted".into()));
        }
    }
}

struct RitzPair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

/// Lowest `count` Ritz pairs of `A` over the basis, with `B`-normalized
/// vectors and Rayleigh-quotient values.
fn ritz_pairs(basis: &Basis, proj: &[Vec<f64>], a: &CsrMatrix, b: &CsrMatrix, count: usize) -> Vec<RitzPair> {
    let m = proj.len();
    let s = DMatrix::from_fn(m, m, |i, j| proj[i.max(j)][i.min(j)]);
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));

    let n = a.n();
    order
        .iter()
        .take(count.min(m))
        .map(|&c| {
            let mut y = vec![0.0; n];
            for (l, v) in basis.v.iter().enumerate() {
                axpy(eig.eigenvectors[(l, c)], v, &mut y);
            }
            let ay = a.mul_vec(&y);
            let by = b.mul_vec(&y);
            let scale = 1.0 / dot(&y, &by).max(f64::MIN_POSITIVE).sqrt();
            y.iter_mut().for_each(|x| *x *= scale);
            let value = dot(&y, &ay) * scale;
            let res: Vec<f64> = ay.iter().zip(&by).map(|(p, q)| (p - value * q) * scale).collect();
            RitzPair { value, vector: y, residual: norm2(&res) }
        })
        .collect()
}

fn finish(mut pairs: Vec<RitzPair>, n: usize, norm_a: f64) -> SpectralDecomposition {
    pairs.sort_by(|x, y| x.value.total_cmp(&y.value));
    let mut eigenvalues = Vec::with_capacity(pairs.len());
    let mut eigenvectors = Vec::with_capacity(pairs.len());
    let mut residuals = Vec::with_capacity(pairs.len());
    for mut p in pairs {
        // A is positive semi-definite; tiny negatives are round-off
        if p.value < 0.0 && p.value.abs() <= 1e-12 * norm_a {
            p.value = 0.0;
        }
        normalize_sign(&mut p.vector);
        eigenvalues.push(p.value);
        eigenvectors.push(p.vector);
        residuals.push(p.residual);
    }
    let multiplet = multiplet_flags(&eigenvalues);
    SpectralDecomposition { eigenvalues, eigenvectors, residuals, multiplet, vertex_count: n, mode: None }
}

/// Flips `v` so that its entry of largest magnitude is positive.
pub fn normalize_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn multiplet_flags(eigenvalues: &[f64]) -> Vec<bool> {
    let close = |x: f64, y: f64| (x - y).abs() <= MULTIPLET_TOL * x.abs().max(y.abs());
    (0..eigenvalues.len())
        .map(|i| {
            (i > 0 && close(eigenvalues[i - 1], eigenvalues[i]))
                || (i + 1 < eigenvalues.len() && close(eigenvalues[i], eigenvalues[i + 1]))
        })
        .collect()
}
