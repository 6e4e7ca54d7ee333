//! Heat kernels and the distances built from them, evaluated from a
//! truncated spectral decomposition.

use serde::Serialize;

use crate::eigen::SpectralDecomposition;
use crate::error::{Error, Result};

/// Exponent used in the diffusion distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionExponent {
    /// `exp(-2 lambda t)`: the squared L2 distance between heat kernels,
    /// consistent with the commute-time integral.
    #[default]
    Doubled,
    /// `exp(-lambda t)`.
    Literal,
}

/// Default HKS times `1024 * 2^(2k/5)`, `k = 0..5`.
pub fn default_scales() -> Vec<f64> {
    geometric_scales(1024.0, 6)
}

/// `t0 * 2^(2k/5)` for `k = 0..count`.
pub fn geometric_scales(t0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t0 * 2f64.powf(2.0 * k as f64 / 5.0)).collect()
}

pub fn heat_kernel(spec: &SpectralDecomposition, x: usize, y: usize, t: f64) -> f64 {
    spec.eigenvalues.iter().zip(&spec.eigenvectors).map(|(l, phi)| (-l * t).exp() * phi[x] * phi[y]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HksDescriptor {
    pub scales: Vec<f64>,
    /// One row per vertex, one column per scale.
    pub values: Vec<Vec<f64>>,
}

impl HksDescriptor {
    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn hks(spec: &SpectralDecomposition, scales: &[f64]) -> Result<HksDescriptor> {
    if scales.is_empty() {
        return Err(Error::InvalidArgument("no HKS scales".into()));
    }
    if scales.iter().any(|&t| !(t > 0.0)) || scales.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("HKS scales must be positive and ascending".into()));
    }
    let decay: Vec<Vec<f64>> =
        scales.iter().map(|&t| spec.eigenvalues.iter().map(|l| (-l * t).exp()).collect()).collect();
    let values = (0..spec.vertex_count)
        .map(|x| {
            decay.iter().map(|d| d.iter().zip(&spec.eigenvectors).map(|(e, phi)| e * phi[x] * phi[x]).sum()).collect()
        })
        .collect();
    Ok(HksDescriptor { scales: scales.to_vec(), values })
}

pub fn diffusion_distance(spec: &SpectralDecomposition, x: usize, y: usize, t: f64) -> f64 {
    diffusion_distance_with(spec, x, y, t, DiffusionExponent::Doubled)
}

pub fn diffusion_distance_with(
    spec: &SpectralDecomposition,
    x: usize,
    y: usize,
    t: f64,
    exponent: DiffusionExponent,
) -> f64 {
    if x == y {
        return 0.0;
    }
    let factor = match exponent {
        DiffusionExponent::Doubled => 2.0,
        DiffusionExponent::Literal => 1.0,
    };
    spec.eigenvalues
        .iter()
        .zip(&spec.eigenvectors)
        .skip(1)
        .map(|(l, phi)| {
            let d = phi[x] - phi[y];
            (-factor * l * t).exp() * d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Rejects spectra whose second eigenvalue looks like a second kernel vector.
pub fn check_connected(spec: &SpectralDecomposition) -> Result<()> {
    let l = &spec.eigenvalues;
    if l.len() < 2 || !(l[1] > 0.0) {
        return Err(Error::Disconnected(l.get(1).copied().unwrap_or(0.0)));
    }
    if l.len() > 2 && l[1] < 1e-8 * l[2] {
        return Err(Error::Disconnected(l[1]));
    }
    Ok(())
}

pub fn commute_time(spec: &SpectralDecomposition, x: usize, y: usize) -> Result<f64> {
    check_connected(spec)?;
    Ok(commute_time_unchecked(spec, x, y))
}

pub(crate) fn commute_time_unchecked(spec: &SpectralDecomposition, x: usize, y: usize) -> f64 {
    if x == y {
        return 0.0;
    }
    spec.eigenvalues
        .iter()
        .zip(&spec.eigenvectors)
        .skip(1)
        .map(|(l, phi)| {
            let d = phi[x] - phi[y];
            d * d / l
        })
        .sum::<f64>()
        .sqrt()
}

/// Commute-time distances from `x` to every vertex.
pub fn commute_time_from(spec: &SpectralDecomposition, x: usize) -> Result<Vec<f64>> {
    check_connected(spec)?;
    let mut acc = vec![0.0; spec.vertex_count];
    for (l, phi) in spec.eigenvalues.iter().zip(&spec.eigenvectors).skip(1) {
        let px = phi[x];
        for (a, p) in acc.iter_mut().zip(phi) {
            let d = px - p;
            *a += d * d / l;
        }
    }
    Ok(acc.into_iter().map(f64::sqrt).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SpectralDecomposition {
        SpectralDecomposition {
            eigenvalues: vec![0.0, 1.0],
            eigenvectors: vec![vec![0.5, 0.5, 0.5], vec![1.0, -0.5, 0.2]],
            residuals: vec![0.0; 2],
            multiplet: vec![false; 2],
            vertex_count: 3,
            mode: None,
        }
    }

    #[test]
    fn default_scales_span_1024_to_4096() {
        let s = default_scales();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], 1024.0);
        for (v, e) in s[1..4].iter().zip([1351.2, 1782.9, 2352.5]) {
            assert!((v - e).abs() < 0.05, "{v} vs {e}");
        }
        assert!((s[4] - 3104.2).abs() < 0.05);
        assert!((s[5] - 4096.0).abs() < 1e-9);
    }

    #[test]
    fn two_term_kernel() {
        let s = toy();
        let t = 0.7;
        let expect = 0.25 + (-0.7f64).exp() * (1.0 * -0.5);
        assert!((heat_kernel(&s, 0, 1, t) - expect).abs() < 1e-15);
        assert_eq!(heat_kernel(&s, 0, 1, t), heat_kernel(&s, 1, 0, t));
    }

    #[test]
    fn distances_basic() {
        let s = toy();
        assert_eq!(diffusion_distance(&s, 1, 1, 0.3), 0.0);
        assert_eq!(diffusion_distance(&s, 0, 2, 0.3), diffusion_distance(&s, 2, 0, 0.3));
        let d = diffusion_distance(&s, 0, 1, 0.3);
        assert!((d * d - (-0.6f64).exp() * 2.25).abs() < 1e-14);
        let dl = diffusion_distance_with(&s, 0, 1, 0.3, DiffusionExponent::Literal);
        assert!((dl * dl - (-0.3f64).exp() * 2.25).abs() < 1e-14);
        assert!((commute_time(&s, 0, 1).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn disconnected_detection() {
        let mut s = toy();
        s.eigenvalues[1] = 0.0;
        assert!(matches!(commute_time(&s, 0, 1), Err(Error::Disconnected(_))));
    }

    #[test]
    fn scale_validation() {
        assert!(hks(&toy(), &[2.0, 1.0]).is_err());
        assert!(hks(&toy(), &[]).is_err());
        assert!(hks(&toy(), &[-1.0]).is_err());
    }
}
