use std::io::Write;

use crate::error::{Error, Result};

/// Uniform tensor-product grid on `[0, Lx] × [0, Ly]` with `N` intervals
/// per direction. Interior nodes `(i, k)`, `1 ≤ i, k ≤ N-1`, are numbered
/// row by row with `i` fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid2D {
    lx: f64,
    ly: f64,
    n: usize,
}

impl SpatialGrid2D {
    pub fn new(lx: f64, ly: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("need at least 2 intervals per direction, got {n}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Domain(format!("domain edges must be positive, got {lx} x {ly}")));
        }
        Ok(Self { lx, ly, n })
    }

    pub fn square(l: f64, n: usize) -> Result<Self> {
        Self::new(l, l, n)
    }

    #[inline]
    pub fn intervals(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.n as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.n as f64
    }

    /// Step in the first direction (both coincide on a square).
    #[inline]
    pub fn h(&self) -> f64 {
        self.hx()
    }

    pub fn lengths(&self) -> (f64, f64) {
        (self.lx, self.ly)
    }

    /// Interior nodes per direction, `N - 1`.
    #[inline]
    pub fn interior_side(&self) -> usize {
        self.n - 1
    }

    #[inline]
    pub fn interior_len(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    /// Physical coordinates of node `(i, k)`, `0 ≤ i, k ≤ N`.
    #[inline]
    pub fn coords(&self, i: usize, k: usize) -> (f64, f64) {
        (i as f64 * self.hx(), k as f64 * self.hy())
    }

    /// Linear index of interior node `(i, k)`.
    #[inline]
    pub fn interior_index(&self, i: usize, k: usize) -> usize {
        (k - 1) * (self.n - 1) + (i - 1)
    }

    /// Interior node `(i, k)` for a linear index.
    #[inline]
    pub fn interior_node(&self, idx: usize) -> (usize, usize) {
        let side = self.n - 1;
        (idx % side + 1, idx / side + 1)
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, k: usize) -> bool {
        i == 0 || k == 0 || i == self.n || k == self.n
    }

    /// `f(x, y)` sampled at interior nodes.
    pub fn sample_interior(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.interior_len())
            .map(|idx| {
                let (i, k) = self.interior_node(idx);
                let (x, y) = self.coords(i, k);
                f(x, y)
            })
            .collect()
    }

    /// Whether every node of `self` is also a node of `fine`.
    pub fn nests_in(&self, fine: &SpatialGrid2D) -> bool {
        self.lx == fine.lx && self.ly == fine.ly && fine.n % self.n == 0
    }

    /// Writes `i,k,x,y,U` for a full `(N+1)^2` field stored with `i` fastest.
    pub fn write_field_csv<W: Write>(&self, field: &[f64], mut out: W) -> Result<()> {
        let side = self.n + 1;
        if field.len() != side * side {
            return Err(Error::Domain(format!(
                "field has {} values, grid has {}",
                field.len(),
                side * side
            )));
        }
        writeln!(out, "i,k,x,y,U")?;
        for k in 0..side {
            for i in 0..side {
                let (x, y) = self.coords(i, k);
                writeln!(out, "{i},{k},{x:.16e},{y:.16e},{:.16e}", field[k * side + i])?;
            }
        }
        Ok(())
    }
}
