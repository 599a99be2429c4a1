//! Krylov solvers for the per-level systems and a sine-transform solver
//! for constant-coefficient shifted Laplacians.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Outcome of one iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `‖b - Ax‖ / ‖b‖`.
    pub residual: f64,
    pub converged: bool,
    /// Relative residual after each iteration (index 0 is the initial guess).
    pub history: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn trivial(x: &mut [f64]) -> SolveStats {
    x.fill(0.0);
    SolveStats {
        iterations: 0,
        residual: 0.0,
        converged: true,
        history: vec![0.0],
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite `A`.
/// `x` holds the initial guess on entry. Passing `None` for the
/// preconditioner gives plain CG.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    mut precondition: Option<&mut dyn FnMut(&[f64], &mut [f64])>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> SolveStats {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return trivial(x);
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut residual = norm(&r) / b_norm;
    let mut history = vec![residual];
    let mut rz = 0.0;
    let mut iterations = 0;
    while residual > tol && iterations < max_iter {
        match precondition.as_mut() {
            Some(pc) => pc(&r, &mut z),
            None => z.copy_from_slice(&r),
        }
        let rz_new = dot(&r, &z);
        if iterations == 0 {
            p.copy_from_slice(&z);
        } else {
            let beta = rz_new / rz;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        rz = rz_new;
        apply(&p, &mut ap);
        let step = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        iterations += 1;
        residual = norm(&r) / b_norm;
        history.push(residual);
    }
    SolveStats {
        iterations,
        residual,
        converged: residual <= tol,
        history,
    }
}

/// BiCGStab for general nonsingular `A`; `x` holds the initial guess.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> SolveStats {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return trivial(x);
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut residual = norm(&r) / b_norm;
    let mut history = vec![residual];
    let mut iterations = 0;
    while residual > tol && iterations < max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply(&p, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        iterations += 1;
        if norm(&s) / b_norm <= tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            r.copy_from_slice(&s);
            residual = norm(&r) / b_norm;
            history.push(residual);
            break;
        }
        apply(&s, &mut t);
        let tt = dot(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        residual = norm(&r) / b_norm;
        history.push(residual);
    }
    SolveStats {
        iterations,
        residual,
        converged: residual <= tol,
        history,
    }
}

/// Direct solver for `(s I + a(-Δ_h)) z = r` on the interior of a uniform
/// `N × N` grid with homogeneous Dirichlet conditions, diagonalized by the
/// type-I discrete sine transform in each direction.
pub struct FastPoissonSolver {
    n: usize,
    side: usize,
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    work: Vec<f64>,
}

impl std::fmt::Debug for FastPoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastPoissonSolver").field("n", &self.n).finish_non_exhaustive()
    }
}

impl FastPoissonSolver {
    pub fn new(n: usize, hx: f64, hy: f64) -> Self {
        let side = n - 1;
        let eig = |h: f64| -> Vec<f64> {
            (1..n)
                .map(|p| {
                    let s = (0.5 * std::f64::consts::PI * p as f64 / n as f64).sin();
                    4.0 * s * s / (h * h)
                })
                .collect()
        };
        let fft = FftPlanner::new().plan_fft_forward(2 * n);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            n,
            side,
            eig_x: eig(hx),
            eig_y: eig(hy),
            fft,
            buffer: vec![Complex::default(); 2 * n],
            scratch,
            work: vec![0.0; side * side],
        }
    }

    /// Unnormalized DST-I of `data[offset + stride * k]`, `k < N-1`, in place.
    fn dst(&mut self, data: &mut [f64], offset: usize, stride: usize) {
        let n = self.n;
        self.buffer.fill(Complex::default());
        for k in 0..self.side {
            let v = data[offset + stride * k];
            self.buffer[k + 1] = Complex::new(v, 0.0);
            self.buffer[2 * n - k - 1] = Complex::new(-v, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
        for k in 0..self.side {
            data[offset + stride * k] = -0.5 * self.buffer[k + 1].im;
        }
    }

    fn dst_2d(&mut self, data: &mut [f64]) {
        let side = self.side;
        for row in 0..side {
            self.dst(data, row * side, 1);
        }
        for col in 0..side {
            self.dst(data, col, side);
        }
    }

    /// Writes the solution of `(shift I + scale (-Δ_h)) z = r` into `z`.
    pub fn solve(&mut self, shift: f64, scale: f64, r: &[f64], z: &mut [f64]) {
        let side = self.side;
        let mut work = std::mem::take(&mut self.work);
        work.copy_from_slice(r);
        self.dst_2d(&mut work);
        let norm = (2.0 / self.n as f64).powi(2);
        for q in 0..side {
            for p in 0..side {
                work[q * side + p] *= norm / (shift + scale * (self.eig_x[p] + self.eig_y[q]));
            }
        }
        self.dst_2d(&mut work);
        z.copy_from_slice(&work);
        self.work = work;
    }
}
