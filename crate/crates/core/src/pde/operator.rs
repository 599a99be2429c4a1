use std::fmt;
use std::sync::Arc;

use super::grid::SpatialGrid2D;

/// Coefficient or data field `(x, y, t) ↦ value`.
pub type Field = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

fn constant(v: f64) -> Field {
    Arc::new(move |_, _, _| v)
}

/// Coefficients of `ℒu = -Σ ∂_k(a_k ∂_k u) + Σ b_k ∂_k u + c u` and the
/// Dirichlet data `g`.
#[derive(Clone)]
pub struct SpatialOperatorSpec {
    pub a1: Field,
    pub a2: Field,
    pub b1: Field,
    pub b2: Field,
    pub c: Field,
    pub g: Field,
    convection_free: bool,
    /// Caller's note on coercivity (`c ≥ 0` or `c - ½ div b ≥ 0`).
    pub coercivity: Option<String>,
}

impl fmt::Debug for SpatialOperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialOperatorSpec")
            .field("convection_free", &self.convection_free)
            .field("coercivity", &self.coercivity)
            .finish_non_exhaustive()
    }
}

impl Default for SpatialOperatorSpec {
    fn default() -> Self {
        Self::laplacian()
    }
}

impl SpatialOperatorSpec {
    /// `-Δ` with homogeneous Dirichlet data.
    pub fn laplacian() -> Self {
        Self {
            a1: constant(1.0),
            a2: constant(1.0),
            b1: constant(0.0),
            b2: constant(0.0),
            c: constant(0.0),
            g: constant(0.0),
            convection_free: true,
            coercivity: Some("c = 0".into()),
        }
    }

    pub fn with_diffusion(
        mut self,
        a1: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        a2: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.a1 = Arc::new(a1);
        self.a2 = Arc::new(a2);
        self
    }

    /// Adds convection; the operator is then treated as nonsymmetric.
    pub fn with_convection(
        mut self,
        b1: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        b2: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.b1 = Arc::new(b1);
        self.b2 = Arc::new(b2);
        self.convection_free = false;
        self
    }

    pub fn with_reaction(mut self, c: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.c = Arc::new(c);
        self
    }

    pub fn with_boundary(mut self, g: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.g = Arc::new(g);
        self
    }

    pub fn with_coercivity_note(mut self, note: impl Into<String>) -> Self {
        self.coercivity = Some(note.into());
        self
    }

    pub fn convection_free(&self) -> bool {
        self.convection_free
    }
}

/// Five-point discretization `ℒ_h` frozen at one time, acting on interior
/// unknowns. Couplings to boundary nodes are kept so that Dirichlet values
/// can be moved to the right-hand side.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    grid: SpatialGrid2D,
    pub center: Vec<f64>,
    pub west: Vec<f64>,
    pub east: Vec<f64>,
    pub south: Vec<f64>,
    pub north: Vec<f64>,
    symmetric: bool,
    mean_diffusion: f64,
    mean_reaction: f64,
    /// Set when some off-diagonal entry is positive (`h |b_k| > 2 a_k`).
    pub dmp_warning: Option<String>,
}

/// Assembles `ℒ_h` at time `t`: conservative second differences with
/// face-centred `a_k`, central first differences for `b_k`, pointwise `c`.
pub fn assemble_spatial_operator(grid: &SpatialGrid2D, spec: &SpatialOperatorSpec, t: f64) -> SpatialOperator {
    let len = grid.interior_len();
    let (hx, hy) = (grid.hx(), grid.hy());
    let (hx2, hy2) = (hx * hx, hy * hy);
    let mut op = SpatialOperator {
        grid: *grid,
        center: vec![0.0; len],
        west: vec![0.0; len],
        east: vec![0.0; len],
        south: vec![0.0; len],
        north: vec![0.0; len],
        symmetric: spec.convection_free,
        mean_diffusion: 0.0,
        mean_reaction: 0.0,
        dmp_warning: None,
    };
    let mut diffusion_sum = 0.0;
    let mut reaction_sum = 0.0;
    for idx in 0..len {
        let (i, k) = grid.interior_node(idx);
        let (x, y) = grid.coords(i, k);
        let aw = (spec.a1)(x - 0.5 * hx, y, t);
        let ae = (spec.a1)(x + 0.5 * hx, y, t);
        let as_ = (spec.a2)(x, y - 0.5 * hy, t);
        let an = (spec.a2)(x, y + 0.5 * hy, t);
        let c = (spec.c)(x, y, t);
        let (b1, b2) = if spec.convection_free {
            (0.0, 0.0)
        } else {
            ((spec.b1)(x, y, t), (spec.b2)(x, y, t))
        };
        op.west[idx] = -aw / hx2 - 0.5 * b1 / hx;
        op.east[idx] = -ae / hx2 + 0.5 * b1 / hx;
        op.south[idx] = -as_ / hy2 - 0.5 * b2 / hy;
        op.north[idx] = -an / hy2 + 0.5 * b2 / hy;
        op.center[idx] = (aw + ae) / hx2 + (as_ + an) / hy2 + c;
        diffusion_sum += 0.25 * (aw + ae + as_ + an);
        reaction_sum += c;
        if op.dmp_warning.is_none() {
            let worst = op.west[idx].max(op.east[idx]).max(op.south[idx]).max(op.north[idx]);
            if worst > 0.0 {
                op.dmp_warning = Some(format!(
                    "positive off-diagonal {worst:e} at ({x}, {y}), t = {t}: h |b| exceeds 2 a"
                ));
            }
        }
    }
    op.mean_diffusion = diffusion_sum / len as f64;
    op.mean_reaction = reaction_sum / len as f64;
    op
}

impl SpatialOperator {
    pub fn grid(&self) -> &SpatialGrid2D {
        &self.grid
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Averages `(ā, c̄)` used to build a constant-coefficient approximation.
    pub fn mean_coefficients(&self) -> (f64, f64) {
        (self.mean_diffusion, self.mean_reaction)
    }

    /// `out = ℒ_h u` with zero boundary values.
    pub fn apply_interior(&self, u: &[f64], out: &mut [f64]) {
        let side = self.grid.interior_side();
        for k in 0..side {
            let row = k * side;
            for i in 0..side {
                let idx = row + i;
                let mut v = self.center[idx] * u[idx];
                if i > 0 {
                    v += self.west[idx] * u[idx - 1];
                }
                if i + 1 < side {
                    v += self.east[idx] * u[idx + 1];
                }
                if k > 0 {
                    v += self.south[idx] * u[idx - side];
                }
                if k + 1 < side {
                    v += self.north[idx] * u[idx + side];
                }
                out[idx] = v;
            }
        }
    }

    /// Contribution of boundary values `g(x, y)` to each interior row.
    pub fn boundary_term(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.interior_len()];
        self.add_boundary_term(1.0, g, &mut out);
        out
    }

    /// `out += scale · (boundary contribution of g)`.
    pub fn add_boundary_term(&self, scale: f64, g: impl Fn(f64, f64) -> f64, out: &mut [f64]) {
        let side = self.grid.interior_side();
        let n = self.grid.intervals();
        let at = |i: usize, k: usize| {
            let (x, y) = self.grid.coords(i, k);
            g(x, y)
        };
        for j in 1..n {
            // bottom and top rows
            let lo = self.grid.interior_index(j, 1);
            out[lo] += scale * self.south[lo] * at(j, 0);
            let hi = self.grid.interior_index(j, side);
            out[hi] += scale * self.north[hi] * at(j, n);
            // left and right columns
            let l = self.grid.interior_index(1, j);
            out[l] += scale * self.west[l] * at(0, j);
            let r = self.grid.interior_index(side, j);
            out[r] += scale * self.east[r] * at(n, j);
        }
    }

    /// `ℒ_h` applied to a full `(N+1)^2` field (`i` fastest), returning the
    /// interior values.
    pub fn apply_full(&self, field: &[f64]) -> Vec<f64> {
        let n = self.grid.intervals();
        let side = n + 1;
        assert_eq!(field.len(), side * side, "field size mismatch");
        let interior: Vec<f64> = (0..self.grid.interior_len())
            .map(|idx| {
                let (i, k) = self.grid.interior_node(idx);
                field[k * side + i]
            })
            .collect();
        let mut out = vec![0.0; interior.len()];
        self.apply_interior(&interior, &mut out);
        self.add_boundary_term(
            1.0,
            |x, y| {
                let i = (x / self.grid.hx()).round() as usize;
                let k = (y / self.grid.hy()).round() as usize;
                field[k * side + i]
            },
            &mut out,
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_mode_is_near_eigenfunction() {
        let grid = SpatialGrid2D::square(PI, 64).unwrap();
        let op = assemble_spatial_operator(&grid, &SpatialOperatorSpec::laplacian(), 0.0);
        let side = 65;
        let field: Vec<f64> = (0..side * side)
            .map(|p| {
                let (x, y) = grid.coords(p % side, p / side);
                x.sin() * y.sin()
            })
            .collect();
        let out = op.apply_full(&field);
        let h = grid.h();
        let worst = (0..grid.interior_len())
            .map(|idx| {
                let (i, k) = grid.interior_node(idx);
                let (x, y) = grid.coords(i, k);
                (out[idx] - 2.0 * x.sin() * y.sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 0.2 * h * h, "{worst}");
        assert!(worst > 0.0);
    }

    #[test]
    fn constants_annihilated_away_from_boundary() {
        let grid = SpatialGrid2D::square(1.0, 8).unwrap();
        let op = assemble_spatial_operator(&grid, &SpatialOperatorSpec::laplacian(), 0.0);
        let out = op.apply_full(&vec![1.0; 81]);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn reaction_on_zero_field() {
        let grid = SpatialGrid2D::square(PI, 8).unwrap();
        let spec = SpatialOperatorSpec::laplacian().with_reaction(|x, y, t| 1.0 + x + y + t);
        let op = assemble_spatial_operator(&grid, &spec, 0.5);
        let out = op.apply_full(&vec![0.0; 81]);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strong_convection_raises_warning() {
        let grid = SpatialGrid2D::square(1.0, 4).unwrap();
        let mild = SpatialOperatorSpec::laplacian().with_convection(|_, _, _| 1.0, |_, _, _| 0.0);
        assert!(assemble_spatial_operator(&grid, &mild, 0.0).dmp_warning.is_none());
        let strong = SpatialOperatorSpec::laplacian().with_convection(|_, _, _| 100.0, |_, _, _| 0.0);
        let op = assemble_spatial_operator(&grid, &strong, 0.0);
        assert!(op.dmp_warning.is_some());
        assert!(!op.is_symmetric());
    }
}
