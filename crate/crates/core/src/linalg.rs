//! Thin wrapper over faer's sparse LU with a deterministic, sequential configuration.

use std::sync::Once;

use faer::sparse::{SparseColMat, Triplet};
use faer::{linalg::solvers::Solve, MatMut};

use crate::error::{Error, Result};

static SEQUENTIAL: Once = Once::new();

fn ensure_sequential() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Square sparse matrix assembled from (row, col, value) entries; duplicates are summed.
#[derive(Clone, Debug, Default)]
pub struct TripletMatrix {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> Self {
        TripletMatrix {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        TripletMatrix {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    /// The same entries embedded in a larger n×n matrix.
    pub fn resized(mut self, n: usize) -> Self {
        assert!(n >= self.n);
        self.n = n;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.n && col < self.n);
        if val != 0.0 {
            self.entries.push(Triplet::new(row, col, val));
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for t in &self.entries {
            y[t.row] += t.val * x[t.col];
        }
        y
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for t in &self.entries {
            rows[t.row] += t.val.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn factorize(&self) -> Result<SparseLu> {
        ensure_sequential();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::State(format!("sparse assembly failed: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::Conditioning(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { n: self.n, lu })
    }
}

pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        assert_eq!(rhs.len(), self.n);
        let col = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_in_place(col);
        if rhs.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Conditioning(
                "linear solve produced non-finite values".into(),
            ))
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Estimates the smallest singular value by a few steps of inverse iteration.
    pub fn smallest_singular_estimate(&self, steps: usize) -> Result<f64> {
        let mut x: Vec<f64> = (0..self.n)
            .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_749_895).fract() - 0.5))
            .collect();
        normalize(&mut x);
        let mut growth = 1.0;
        for _ in 0..steps.max(1) {
            self.solve_in_place(&mut x)?;
            growth = normalize(&mut x);
            if growth == 0.0 {
                return Err(Error::Conditioning("inverse iteration collapsed".into()));
            }
        }
        Ok(1.0 / growth)
    }
}

/// Solves the bordered system [[A, b], [cᵀ, d]]·(x, y) = (f, g) by block elimination on a
/// sparse LU of A, followed by one sweep of iterative refinement. `rhs` holds (f, g) on entry.
pub fn solve_bordered(
    a: &TripletMatrix,
    b: &[f64],
    c: &[f64],
    d: f64,
    rhs: &mut [f64],
) -> Result<()> {
    let n = a.dim();
    assert!(b.len() == n && c.len() == n && rhs.len() == n + 1);
    let lu = a.factorize()?;
    let z = lu.solve(b)?;
    let schur = d - dot(c, &z);
    let scale = d.abs()
        + c.iter().map(|v| v.abs()).sum::<f64>() * z.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if !(schur.abs() > 1e-14 * scale) {
        return Err(Error::Conditioning(format!(
            "bordered system is singular (Schur complement {schur:.3e})"
        )));
    }
    let eliminate = |r: &mut [f64]| -> Result<()> {
        let (f, g) = r.split_at_mut(n);
        lu.solve_in_place(f)?;
        let y = (g[0] - dot(c, f)) / schur;
        f.iter_mut().zip(&z).for_each(|(fi, zi)| *fi -= y * zi);
        g[0] = y;
        Ok(())
    };
    let original = rhs.to_vec();
    eliminate(rhs)?;
    let (x, y) = rhs.split_at(n);
    let ax = a.mul_vec(x);
    let mut resid: Vec<f64> = (0..n).map(|i| original[i] - ax[i] - b[i] * y[0]).collect();
    resid.push(original[n] - dot(c, x) - d * y[0]);
    eliminate(&mut resid)?;
    rhs.iter_mut().zip(&resid).for_each(|(v, r)| *v += r);
    if rhs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Conditioning(
            "bordered solve produced non-finite values".into(),
        ))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        let n = 50;
        let mut m = TripletMatrix::new(n);
        for i in 0..n {
            m.push(i, i, 2.0);
            if i > 0 {
                m.push(i, i - 1, -1.0);
                m.push(i - 1, i, -1.0);
            }
        }
        let b = vec![1.0; n];
        let x = m.factorize().unwrap().solve(&b).unwrap();
        let r = m.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-10);
        }
    }

    #[test]
    fn bordered_solve_matches_dense() {
        let n = 6;
        let mut m = TripletMatrix::new(n);
        for i in 0..n {
            m.push(i, i, 3.0 + i as f64);
            if i + 1 < n {
                m.push(i, i + 1, -1.0);
                m.push(i + 1, i, 0.5);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let c: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let d = 0.25;
        let mut full = m.clone().resized(n + 1);
        for i in 0..n {
            full.push(i, n, b[i]);
            full.push(n, i, c[i]);
        }
        full.push(n, n, d);
        let rhs: Vec<f64> = (0..=n).map(|i| 1.0 + i as f64).collect();
        let want = full.factorize().unwrap().solve(&rhs).unwrap();
        let mut got = rhs.clone();
        solve_bordered(&m, &b, &c, d, &mut got).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn smallest_singular_value_of_diagonal() {
        let mut m = TripletMatrix::new(3);
        m.push(0, 0, 5.0);
        m.push(1, 1, 1e-3);
        m.push(2, 2, 2.0);
        let s = m
            .factorize()
            .unwrap()
            .smallest_singular_estimate(6)
            .unwrap();
        assert!((s - 1e-3).abs() < 1e-8, "{s}");
    }
}
