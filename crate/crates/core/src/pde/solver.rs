use std::io::Write;

use super::grid::SpatialGrid2D;
use super::linear::{bicgstab, conjugate_gradient, FastPoissonSolver, SolveStats};
use std::sync::Arc;

use super::operator::{assemble_spatial_operator, Field, SpatialOperatorSpec};
use crate::caputo::{check_alpha, DiscreteCaputo, SchemeKind};
use crate::error::{Error, Result};
use crate::mesh::TemporalMesh;

/// Krylov method for the per-level systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Conjugate gradients when `ℒ_h` is symmetric, BiCGStab otherwise.
    #[default]
    Auto,
    ConjugateGradient,
    /// Conjugate gradients preconditioned by the sine-transform solver for
    /// the averaged constant-coefficient operator. Symmetric systems only.
    PreconditionedCg,
    BiCgStab,
}

impl std::str::FromStr for LinearSolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "cg" => Ok(Self::ConjugateGradient),
            "pcg" => Ok(Self::PreconditionedCg),
            "bicgstab" => Ok(Self::BiCgStab),
            other => Err(Error::Config(format!("unknown linear solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: LinearSolverKind,
    /// Relative residual target.
    pub tolerance: f64,
    /// Iteration cap; `None` means `10 N^2`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: LinearSolverKind::Auto,
            tolerance: 1e-10,
            max_iterations: None,
        }
    }
}

impl SolverOptions {
    pub fn with_method(method: LinearSolverKind) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

/// Linear-solve record for one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub iterations: usize,
    pub residual: f64,
}

/// Fully discrete solution: interior values `U^0..U^M` plus the boundary
/// data needed to rebuild full fields.
#[derive(Clone)]
pub struct PdeSolution {
    pub scheme: SchemeKind,
    pub mesh: TemporalMesh,
    pub grid: SpatialGrid2D,
    /// `levels[m]` holds the interior values at `t_m`.
    pub levels: Vec<Vec<f64>>,
    pub stats: Vec<LevelStats>,
    /// Discrete maximum principle warnings raised during assembly.
    pub warnings: Vec<String>,
    boundary: Field,
}

impl std::fmt::Debug for PdeSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PdeSolution")
            .field("scheme", &self.scheme)
            .field("M", &self.mesh.intervals())
            .field("N", &self.grid.intervals())
            .field("warnings", &self.warnings)
            .finish_non_exhaustive()
    }
}

impl PdeSolution {
    /// Full `(N+1)^2` field at level `m` (`i` fastest), boundary from `g`.
    pub fn full_level(&self, m: usize) -> Vec<f64> {
        let n = self.grid.intervals();
        let side = n + 1;
        let t = self.mesh.node(m);
        let mut field = vec![0.0; side * side];
        for k in 0..side {
            for i in 0..side {
                field[k * side + i] = if self.grid.is_boundary(i, k) {
                    let (x, y) = self.grid.coords(i, k);
                    (self.boundary)(x, y, t)
                } else {
                    self.levels[m][self.grid.interior_index(i, k)]
                };
            }
        }
        field
    }

    /// Largest relative residual over all levels.
    pub fn max_residual(&self) -> f64 {
        self.stats.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.stats.iter().map(|s| s.iterations).sum()
    }

    /// Snapshot dump `i,k,x,y,U` at level `m`.
    pub fn write_csv<W: Write>(&self, m: usize, out: W) -> Result<()> {
        self.grid.write_field_csv(&self.full_level(m), out)
    }
}

/// `D^α u + ℒu = f` in `Ω × (0, T]`, `u = g` on `∂Ω`, `u(·, 0) = u0`.
#[derive(Clone)]
pub struct ParabolicProblem {
    pub alpha: f64,
    pub operator: SpatialOperatorSpec,
    pub source: Field,
    pub initial: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ParabolicProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParabolicProblem")
            .field("alpha", &self.alpha)
            .field("operator", &self.operator)
            .finish_non_exhaustive()
    }
}

impl ParabolicProblem {
    pub fn new(
        alpha: f64,
        operator: SpatialOperatorSpec,
        source: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        initial: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            operator,
            source: Arc::new(source),
            initial: Arc::new(initial),
        })
    }

    /// Benchmark on `(0, π)^2`: `ℒ = -Δ + (1 + x1 + x2 + t)`,
    /// `u0 = sin x1 sin x2`, `f = x1(π-x1) x2(π-x2)(1+t^4) + t^2`, `g = 0`.
    pub fn reference(alpha: f64) -> Result<Self> {
        use std::f64::consts::PI;
        let operator = SpatialOperatorSpec::laplacian()
            .with_reaction(|x, y, t| 1.0 + x + y + t)
            .with_coercivity_note("c >= 1");
        Self::new(
            alpha,
            operator,
            |x, y, t| x * (PI - x) * y * (PI - y) * (1.0 + t.powi(4)) + t * t,
            |x, y| x.sin() * y.sin(),
        )
    }

    /// Manufactured solution `u = t^α sin x1 sin x2` on `(0, π)^2` for the
    /// reference operator, with `f = (Γ(1+α) + (2 + c) t^α) sin x1 sin x2`.
    pub fn manufactured_power(alpha: f64) -> Result<Self> {
        Self::manufactured_with_eigenvalue(alpha, 2.0)
    }

    /// Same solution, but `f` uses the eigenvalue of the five-point Laplacian
    /// on `grid` for the mode `sin x1 sin x2`. Nodal values of `u` then solve
    /// the spatially discrete problem exactly, so the fully discrete error is
    /// the time-stepping error alone.
    pub fn manufactured_power_on(alpha: f64, grid: &SpatialGrid2D) -> Result<Self> {
        let eig = |h: f64| {
            let s = (0.5 * h).sin();
            4.0 * s * s / (h * h)
        };
        Self::manufactured_with_eigenvalue(alpha, eig(grid.hx()) + eig(grid.hy()))
    }

    fn manufactured_with_eigenvalue(alpha: f64, lambda: f64) -> Result<Self> {
        let g1 = crate::caputo::gamma(1.0 + alpha);
        let operator = SpatialOperatorSpec::laplacian()
            .with_reaction(|x, y, t| 1.0 + x + y + t)
            .with_coercivity_note("c >= 1");
        Self::new(
            alpha,
            operator,
            move |x, y, t| {
                let c = 1.0 + x + y + t;
                (g1 + (lambda + c) * t.powf(alpha)) * x.sin() * y.sin()
            },
            |_, _| 0.0,
        )
    }
}

/// Exact solution of [`ParabolicProblem::manufactured_power`].
pub fn manufactured_power_exact(alpha: f64, x: f64, y: f64, t: f64) -> f64 {
    t.powf(alpha) * x.sin() * y.sin()
}

/// Future levels whose history sums are gathered in one pass over the
/// stored solution.
const LEVEL_BLOCK: usize = 8;
/// Spatial chunk sized so that `LEVEL_BLOCK` accumulators stay in L1.
const SPACE_CHUNK: usize = 256;

/// `acc[b] = Σ_{j<start} rows[b][j] U^j` for every row in the block.
fn accumulate_block(rows: &[Vec<f64>], start: usize, levels: &[Vec<f64>], acc: &mut [Vec<f64>]) {
    let len = levels[0].len();
    for a in acc.iter_mut() {
        a.fill(0.0);
    }
    let mut lo = 0;
    while lo < len {
        let hi = (lo + SPACE_CHUNK).min(len);
        let mut j = 0;
        while j + 4 <= start {
            let (u0, u1, u2, u3) = (
                &levels[j][lo..hi],
                &levels[j + 1][lo..hi],
                &levels[j + 2][lo..hi],
                &levels[j + 3][lo..hi],
            );
            for (row, a) in rows.iter().zip(acc.iter_mut()) {
                let (k0, k1, k2, k3) = (row[j], row[j + 1], row[j + 2], row[j + 3]);
                let a = &mut a[lo..hi];
                let n = a.len();
                let (u0, u1, u2, u3) = (&u0[..n], &u1[..n], &u2[..n], &u3[..n]);
                for p in 0..n {
                    a[p] += k0 * u0[p] + k1 * u1[p] + k2 * u2[p] + k3 * u3[p];
                }
            }
            j += 4;
        }
        for (jj, u) in levels[j..start].iter().enumerate() {
            let u = &u[lo..hi];
            for (row, a) in rows.iter().zip(acc.iter_mut()) {
                let k = row[j + jj];
                for (x, v) in a[lo..hi].iter_mut().zip(u) {
                    *x += k * v;
                }
            }
        }
        lo = hi;
    }
}

/// Steps `δU^m + ℒ_h U^{m,θ} = f` forward in time.
///
/// L1 evaluates everything at `t_m` with `U^{m,θ} = U^m`. Alikhanov
/// evaluates at `t*_m` with `U^{m,θ} = (α/2) U^{m-1} + (1 - α/2) U^m`.
/// Dirichlet values enter the right-hand side; the operator is
/// reassembled at every level.
pub fn solve_parabolic(
    scheme: SchemeKind,
    mesh: &TemporalMesh,
    grid: &SpatialGrid2D,
    problem: &ParabolicProblem,
    options: &SolverOptions,
) -> Result<PdeSolution> {
    let alpha = problem.alpha;
    let op_t = DiscreteCaputo::new(scheme, mesh, alpha)?;
    let spec = &problem.operator;
    let theta = match scheme {
        SchemeKind::L1 => 1.0,
        SchemeKind::Alikhanov => 1.0 - 0.5 * alpha,
    };
    let method = match options.method {
        LinearSolverKind::Auto if spec.convection_free() => LinearSolverKind::ConjugateGradient,
        LinearSolverKind::Auto => LinearSolverKind::BiCgStab,
        LinearSolverKind::ConjugateGradient | LinearSolverKind::PreconditionedCg
            if !spec.convection_free() =>
        {
            return Err(Error::Config(
                "conjugate gradients need a convection-free (symmetric) operator".into(),
            ))
        }
        m => m,
    };
    let n = grid.intervals();
    let max_iter = options.max_iterations.unwrap_or(10 * n * n);
    let mut fast = match method {
        LinearSolverKind::PreconditionedCg => Some(FastPoissonSolver::new(n, grid.hx(), grid.hy())),
        _ => None,
    };

    let len = grid.interior_len();
    let levels_total = mesh.intervals();
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(levels_total + 1);
    levels.push(grid.sample_interior(|x, y| (problem.initial)(x, y)));
    let mut stats = Vec::with_capacity(levels_total);
    let mut warnings = Vec::new();
    let mut block_rows: Vec<Vec<f64>> = Vec::new();
    let mut block_acc: Vec<Vec<f64>> = Vec::new();
    let mut block_start = 1;
    let mut rhs = vec![0.0; len];
    let mut scratch = vec![0.0; len];

    for m in 1..=levels_total {
        if m == 1 || m - block_start == block_rows.len() {
            block_start = m;
            let count = LEVEL_BLOCK.min(levels_total + 1 - m);
            block_rows = (m..m + count).map(|l| op_t.row(l)).collect();
            block_acc.resize_with(count, || vec![0.0; len]);
            block_acc.truncate(count);
            accumulate_block(&block_rows, m, &levels, &mut block_acc);
        }
        let kappa = &block_rows[m - block_start];
        let t_eval = op_t.eval_point(m);
        let t_m = mesh.node(m);
        let t_prev = mesh.node(m - 1);
        let diag = kappa[m];
        if !(diag > 0.0) {
            return Err(Error::NonPositiveDiagonal { level: m, value: diag });
        }
        let op = assemble_spatial_operator(grid, spec, t_eval);
        if let Some(w) = &op.dmp_warning {
            if warnings.len() < 8 {
                warnings.push(w.clone());
            }
        }

        for (idx, r) in rhs.iter_mut().enumerate() {
            let (i, k) = grid.interior_node(idx);
            let (x, y) = grid.coords(i, k);
            *r = (problem.source)(x, y, t_eval);
        }
        scratch.copy_from_slice(&block_acc[m - block_start]);
        for j in block_start..m {
            let k = kappa[j];
            for (h, v) in scratch.iter_mut().zip(&levels[j]) {
                *h += k * v;
            }
        }
        for (r, h) in rhs.iter_mut().zip(&scratch) {
            *r -= h;
        }
        op.add_boundary_term(-theta, |x, y| (spec.g)(x, y, t_m), &mut rhs);
        if scheme == SchemeKind::Alikhanov {
            let lag = 0.5 * alpha;
            op.apply_interior(&levels[m - 1], &mut scratch);
            for (r, v) in rhs.iter_mut().zip(&scratch) {
                *r -= lag * v;
            }
            op.add_boundary_term(-lag, |x, y| (spec.g)(x, y, t_prev), &mut rhs);
        }

        let apply = |u: &[f64], out: &mut [f64]| {
            op.apply_interior(u, out);
            for (o, v) in out.iter_mut().zip(u) {
                *o = diag * v + theta * *o;
            }
        };
        let mut x = levels[m - 1].clone();
        let result: SolveStats = match method {
            LinearSolverKind::ConjugateGradient => {
                conjugate_gradient(apply, None, &rhs, &mut x, options.tolerance, max_iter)
            }
            LinearSolverKind::PreconditionedCg => {
                let (a_bar, c_bar) = op.mean_coefficients();
                let fps = fast.as_mut().expect("preconditioner allocated");
                let mut pc = |r: &[f64], z: &mut [f64]| fps.solve(diag + theta * c_bar, theta * a_bar, r, z);
                conjugate_gradient(apply, Some(&mut pc), &rhs, &mut x, options.tolerance, max_iter)
            }
            _ => bicgstab(apply, &rhs, &mut x, options.tolerance, max_iter),
        };
        if !result.converged {
            return Err(Error::SolverDivergence {
                level: m,
                iterations: result.iterations,
                residual: result.residual,
                history: result.history,
            });
        }
        stats.push(LevelStats {
            level: m,
            iterations: result.iterations,
            residual: result.residual,
        });
        levels.push(x);
    }

    Ok(PdeSolution {
        scheme,
        mesh: mesh.clone(),
        grid: *grid,
        levels,
        stats,
        warnings,
        boundary: spec.g.clone(),
    })
}

/// Index of `t` among `nodes` under exact equality.
fn locate(nodes: &[f64], t: f64) -> Option<usize> {
    nodes.binary_search_by(|v| v.total_cmp(&t)).ok()
}

/// `max |U_coarse - U_fine|` over the coarse interior nodes at the given
/// coarse levels (the final level when `at` is empty).
pub fn two_mesh_error(coarse: &PdeSolution, fine: &PdeSolution, at: &[usize]) -> Result<f64> {
    if !coarse.grid.nests_in(&fine.grid) {
        return Err(Error::NonNesting(format!(
            "spatial grid N = {} is not contained in N = {}",
            coarse.grid.intervals(),
            fine.grid.intervals()
        )));
    }
    let default = [coarse.mesh.intervals()];
    let at = if at.is_empty() { &default[..] } else { at };
    let ratio = fine.grid.intervals() / coarse.grid.intervals();
    let mut worst = 0.0f64;
    for &m in at {
        if m > coarse.mesh.intervals() {
            return Err(Error::Domain(format!("level {m} beyond coarse mesh")));
        }
        let t = coarse.mesh.node(m);
        let mf = locate(fine.mesh.nodes(), t).ok_or_else(|| {
            Error::NonNesting(format!("coarse node t_{m} = {t:e} is not a fine-mesh node"))
        })?;
        let uc = &coarse.levels[m];
        let uf = &fine.levels[mf];
        for (idx, v) in uc.iter().enumerate() {
            let (i, k) = coarse.grid.interior_node(idx);
            let w = uf[fine.grid.interior_index(ratio * i, ratio * k)];
            worst = worst.max((v - w).abs());
        }
    }
    Ok(worst)
}

/// `max |u(x, t_m) - U^m|` over interior nodes at the given levels (the final
/// level when `at` is empty).
pub fn exact_error(solution: &PdeSolution, exact: impl Fn(f64, f64, f64) -> f64, at: &[usize]) -> f64 {
    let default = [solution.mesh.intervals()];
    let at = if at.is_empty() { &default[..] } else { at };
    let mut worst = 0.0f64;
    for &m in at {
        let t = solution.mesh.node(m);
        for (idx, v) in solution.levels[m].iter().enumerate() {
            let (i, k) = solution.grid.interior_node(idx);
            let (x, y) = solution.grid.coords(i, k);
            worst = worst.max((exact(x, y, t) - v).abs());
        }
    }
    worst
}
