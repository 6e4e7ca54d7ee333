//! Envelope Cholesky factorization under a reverse Cuthill-McKee ordering.
//!
//! Mesh Laplacians have a small profile after RCM reordering, so storing
//! each row of `L` from its first nonzero column to the diagonal is enough
//! at the sizes this crate targets (up to a few tens of thousands of rows).

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(m: &CsrMatrix) -> Vec<usize> {
    let n = m.n();
    let degree: Vec<usize> = (0..n).map(|i| m.pattern(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(m, seed, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = m.pattern(v).iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(m: &CsrMatrix, start: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; m.n()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in m.pattern(v) {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(m: &CsrMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(m, current);
        let far = level.iter().copied().filter(|&l| l != usize::MAX).max().unwrap_or(0);
        if far <= ecc && current != seed {
            break;
        }
        ecc = far;
        let next = (0..m.n()).filter(|&i| level[i] == far).min_by_key(|&i| (degree[i], i)).unwrap_or(current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// `P A P^T = L L^T` with `L` stored row-wise over its envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0usize; n];
        for (i, f) in first.iter_mut().enumerate() {
            *f = a.pattern(perm[i]).iter().map(|&j| inv[j]).filter(|&j| j <= i).min().unwrap_or(i);
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(perm[i]) {
                let jj = inv[j];
                if jj <= i {
                    data[start[i] + jj - first[i]] = v;
                }
            }
        }
        let scale = a.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[start[i] + j - fi];
                let ri = &data[start[i] + k0 - fi..start[i] + j - fi];
                let rj = &data[start[j] + k0 - fj..start[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if j < i {
                    data[start[i] + j - fi] = s / data[start[j] + j - fj];
                } else {
                    if !(s > 1e-14 * scale) || !s.is_finite() {
                        return Err(Error::Factorization(format!("non-positive pivot {s:e} at row {i}")));
                    }
                    data[start[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self { n, perm, first, start, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries of `L`.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let yi = y[i] / row[i - fi];
            y[i] = yi;
            for (k, l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}
