use std::io::Write;

use crate::caputo::{check_alpha, DiscreteCaputo, SchemeKind};
use crate::error::{Error, Result};
use crate::mesh::TemporalMesh;

/// Offset index `p` used when none is given.
pub const DEFAULT_BARRIER_OFFSET: usize = 8;

/// Stacked sums for `γ > 0` stop once `c_m` drops below this.
pub const STACK_TRUNCATION: f64 = 1e-16;

/// One term `c_m B_m^j` of a stacked barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackLevel {
    /// `p_m = 2^m p`, kept as a float since it may run far past `M`.
    pub offset: f64,
    /// `c_m = 2^{-m γ r}`.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct BarrierProfile<'a> {
    pub mesh: &'a TemporalMesh,
    pub alpha: f64,
    pub p: usize,
    pub beta: f64,
    pub values: Vec<f64>,
    /// `Some(γ)` for stacked barriers.
    pub gamma: Option<f64>,
    /// Grading exponent used for `c_m`.
    pub r: Option<f64>,
    /// Stack terms `m = 0..=N`; a single unit term for the plain barrier.
    pub levels: Vec<StackLevel>,
}

impl BarrierProfile<'_> {
    /// Index `N` of the last stacked term.
    pub fn truncation_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// CSV dump `j,t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "j,t,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{j},{:.16e},{v:.16e}", self.mesh.node(j))?;
        }
        Ok(())
    }
}

fn check_offset(mesh: &TemporalMesh, p: usize) -> Result<()> {
    if p < 2 || p > mesh.intervals() {
        return Err(Error::Domain(format!(
            "barrier offset p = {p} must satisfy 2 <= p <= M = {}",
            mesh.intervals()
        )));
    }
    Ok(())
}

/// Node `t_k`, continued past `T` as `t_M (k/M)^r` for `k > M`.
fn extended_node(mesh: &TemporalMesh, k: f64, r: f64) -> f64 {
    let m = mesh.intervals() as f64;
    if k <= m {
        mesh.node(k as usize)
    } else {
        mesh.final_time() * (k / m).powf(r)
    }
}

#[inline]
fn barrier_value(t: f64, t_p: f64, beta: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        (t * t_p.powf(-beta - 1.0)).min(t.powf(-beta))
    }
}

/// `B^j = min{(t_j / t_p) t_p^{-β}, t_j^{-β}}`, `β = 1 - α`.
pub fn build_barrier(mesh: &TemporalMesh, alpha: f64, p: usize) -> Result<BarrierProfile<'_>> {
    check_alpha(alpha)?;
    check_offset(mesh, p)?;
    let beta = 1.0 - alpha;
    let t_p = mesh.node(p);
    let values = mesh
        .nodes()
        .iter()
        .map(|&t| barrier_value(t, t_p, beta))
        .collect();
    Ok(BarrierProfile {
        mesh,
        alpha,
        p,
        beta,
        values,
        gamma: None,
        r: None,
        levels: vec![StackLevel {
            offset: p as f64,
            weight: 1.0,
        }],
    })
}

/// `min_{j≥1} δ^α B^j / (τ^α t_j^{-α-1})`, with `t_j` replaced by the
/// scheme's evaluation point. Positive values certify the barrier lower
/// bound on this mesh.
pub fn verify_barrier_bound(
    mesh: &TemporalMesh,
    alpha: f64,
    p: usize,
    scheme: SchemeKind,
) -> Result<f64> {
    let barrier = build_barrier(mesh, alpha, p)?;
    let op = DiscreteCaputo::new(scheme, mesh, alpha)?;
    let tau_alpha = mesh.first_step().powf(alpha);
    let mut row = Vec::new();
    let mut worst = f64::INFINITY;
    for m in 1..=mesh.intervals() {
        op.row_into(m, &mut row);
        let value = crate::caputo::dot(&row, &barrier.values[..=m]);
        let reference = tau_alpha * op.eval_point(m).powf(-alpha - 1.0);
        worst = worst.min(value / reference);
    }
    Ok(worst)
}

/// `B̄^j = Σ_m c_m B_m^j` with `p_m = 2^m p`, `c_m = 2^{-m γ r}`.
///
/// For `γ > 0` the series runs until `c_m < 1e-16`, continuing `t_{p_m}`
/// past `T` along the grading law. For `γ ≤ 0` it stops at
/// `N = ⌈log2(n_stop / p) - 1⌉` (`N = 0` when `n_stop ≤ p`).
pub fn build_stacked_barrier(
    mesh: &TemporalMesh,
    alpha: f64,
    gamma: f64,
    p: usize,
    n_stop: usize,
) -> Result<BarrierProfile<'_>> {
    check_alpha(alpha)?;
    check_offset(mesh, p)?;
    if !(gamma < alpha) {
        return Err(Error::Domain(format!(
            "stacked barrier needs gamma < alpha, got gamma = {gamma}, alpha = {alpha}"
        )));
    }
    let r = mesh.grading_or_estimate();
    let beta = 1.0 - alpha;

    let mut levels = Vec::new();
    if gamma > 0.0 {
        let mut m = 0;
        loop {
            let weight = 2f64.powf(-(m as f64) * gamma * r);
            if weight < STACK_TRUNCATION {
                break;
            }
            levels.push(StackLevel {
                offset: p as f64 * 2f64.powi(m),
                weight,
            });
            m += 1;
        }
    } else {
        let n_levels = if n_stop <= p {
            0
        } else {
            ((n_stop as f64 / p as f64).log2() - 1.0).ceil() as usize
        };
        let p_n = p << n_levels;
        if p_n > mesh.intervals() {
            return Err(Error::StackExceedsMesh {
                p_n,
                m: mesh.intervals(),
            });
        }
        for m in 0..=n_levels {
            levels.push(StackLevel {
                offset: (p << m) as f64,
                weight: 2f64.powf(-(m as f64) * gamma * r),
            });
        }
    }

    let offsets: Vec<f64> = levels
        .iter()
        .map(|l| extended_node(mesh, l.offset, r))
        .collect();
    let values = mesh
        .nodes()
        .iter()
        .map(|&t| {
            levels
                .iter()
                .zip(&offsets)
                .fold(0.0, |acc, (l, &t_p)| acc + l.weight * barrier_value(t, t_p, beta))
        })
        .collect();

    Ok(BarrierProfile {
        mesh,
        alpha,
        p,
        beta,
        values,
        gamma: Some(gamma),
        r: Some(r),
        levels,
    })
}
