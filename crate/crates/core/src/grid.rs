//! Uniform tensor-product grids on a rectangle [0, a] × [0, b].

use crate::error::{Error, Result};

/// Node (i, j) sits at (i·hx, j·hy); storage is row-major with rows indexed by j.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!(
                "rectangle extents must be positive, got ({a}, {b})"
            )));
        }
        if nx < 8 || ny < 8 {
            return Err(Error::Domain(format!(
                "need at least 8 cells per side, got {nx}×{ny}"
            )));
        }
        Ok(Grid { a, b, nx, ny })
    }

    /// Grid with (as nearly as possible) the same spacing h in both directions.
    pub fn with_spacing(a: f64, b: f64, nx: usize) -> Result<Self> {
        let ny = ((b / a) * nx as f64).round() as usize;
        Grid::new(a, b, nx, ny)
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Grid::new(1.0, 1.0, n, n)
    }

    pub fn hx(&self) -> f64 {
        self.a / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.b / self.ny as f64
    }

    /// The larger of the two spacings.
    pub fn h(&self) -> f64 {
        self.hx().max(self.hy())
    }

    pub fn cols(&self) -> usize {
        self.nx + 1
    }

    pub fn rows(&self) -> usize {
        self.ny + 1
    }

    pub fn node_count(&self) -> usize {
        self.cols() * self.rows()
    }

    pub fn interior_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.cols() + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Index of interior node (i, j), 1 ≤ i < nx, 1 ≤ j < ny.
    pub fn interior(&self, i: usize, j: usize) -> usize {
        (j - 1) * (self.nx - 1) + (i - 1)
    }

    /// Interior nodes in storage order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.ny).flat_map(move |j| (1..self.nx).map(move |i| (i, j)))
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.node_count());
        for j in 0..self.rows() {
            for i in 0..self.cols() {
                out.push(f(self.x(i), self.y(j)));
            }
        }
        out
    }

    /// Scatters interior values into a full node array with the given boundary value.
    pub fn embed(&self, interior: &[f64], boundary: f64) -> Vec<f64> {
        let mut out = vec![boundary; self.node_count()];
        for (k, (i, j)) in self.interior_nodes().enumerate() {
            out[self.node(i, j)] = interior[k];
        }
        out
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior_nodes()
            .map(|(i, j)| full[self.node(i, j)])
            .collect()
    }

    /// 5-point Laplacian of a full node array, evaluated on interior nodes.
    pub fn laplacian(&self, full: &[f64]) -> Vec<f64> {
        let (ix, iy) = (1.0 / (self.hx() * self.hx()), 1.0 / (self.hy() * self.hy()));
        self.interior_nodes()
            .map(|(i, j)| {
                let c = full[self.node(i, j)];
                (full[self.node(i - 1, j)] - 2.0 * c + full[self.node(i + 1, j)]) * ix
                    + (full[self.node(i, j - 1)] - 2.0 * c + full[self.node(i, j + 1)]) * iy
            })
            .collect()
    }

    /// Discrete L² inner product of two interior arrays.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * self.hx() * self.hy()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_is_exact_on_quadratics() {
        let g = Grid::new(1.0, 2.0, 10, 20).unwrap();
        let f = g.sample(|x, y| x * x + 3.0 * y * y);
        for v in g.laplacian(&f) {
            assert!((v - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn embed_restrict_round_trip() {
        let g = Grid::unit_square(8).unwrap();
        let u: Vec<f64> = (0..g.interior_count()).map(|k| k as f64).collect();
        let full = g.embed(&u, 0.0);
        assert_eq!(g.restrict(&full), u);
        assert_eq!(full[g.node(0, 3)], 0.0);
        assert_eq!(full[g.node(2, 1)], u[g.interior(2, 1)]);
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(Grid::unit_square(4).is_err());
        assert!(Grid::new(-1.0, 1.0, 8, 8).is_err());
    }
}
