//! Scalar fractional initial-value problems `D^α u = f(t)`, `u(0) = u0`,
//! solved by forward substitution, plus a truncation-error reporter.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::caputo::{check_alpha, dot, DiscreteCaputo, SchemeKind};
use crate::error::{Error, Result};
use crate::exact::MonomialSum;
use crate::mesh::TemporalMesh;

/// Right-hand side `f(t)`.
pub type Rhs = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct IvpProblem {
    pub alpha: f64,
    pub u0: f64,
    pub rhs: Rhs,
    pub exact: Option<MonomialSum>,
}

impl fmt::Debug for IvpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IvpProblem")
            .field("alpha", &self.alpha)
            .field("u0", &self.u0)
            .field("exact", &self.exact)
            .finish_non_exhaustive()
    }
}

impl IvpProblem {
    pub fn new(alpha: f64, u0: f64, rhs: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            u0,
            rhs: Arc::new(rhs),
            exact: None,
        })
    }

    /// Problem whose right-hand side is the Caputo derivative of `exact`.
    pub fn with_exact(alpha: f64, exact: MonomialSum) -> Result<Self> {
        check_alpha(alpha)?;
        let u0 = exact.value(0.0);
        let e = exact.clone();
        let rhs: Rhs = Arc::new(move |t| e.caputo(alpha, t).unwrap_or(f64::NAN));
        Ok(Self {
            alpha,
            u0,
            rhs,
            exact: Some(exact),
        })
    }

    /// The standard test `u = t^α`, `f = Γ(1+α)`.
    pub fn power_alpha(alpha: f64) -> Result<Self> {
        Self::with_exact(alpha, MonomialSum::power(alpha)?)
    }

    /// Attaches an exact solution to a problem with an explicit `f`, then
    /// validates the pair.
    pub fn attach_exact(mut self, exact: MonomialSum) -> Result<Self> {
        self.exact = Some(exact);
        self.validate()?;
        Ok(self)
    }

    /// Checks `D^α u(t) = f(t)` (to `1e-10` relative) and `u(0) = u0` at a
    /// few sample times when an exact solution is attached.
    pub fn validate(&self) -> Result<()> {
        let Some(exact) = &self.exact else {
            return Ok(());
        };
        if (exact.value(0.0) - self.u0).abs() > 1e-10 * (1.0 + self.u0.abs()) {
            return Err(Error::Domain(format!(
                "initial value {} does not match exact solution ({})",
                self.u0,
                exact.value(0.0)
            )));
        }
        for k in 1..=16 {
            let t = k as f64 / 16.0;
            let lhs = exact.caputo(self.alpha, t)?;
            let rhs = (self.rhs)(t);
            if !((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs())) {
                return Err(Error::Domain(format!(
                    "right-hand side inconsistent with exact solution at t = {t}: {rhs} vs {lhs}"
                )));
            }
        }
        Ok(())
    }
}

/// Runs `U^m = κ_{m,m}^{-1} [rhs(m, s_m) - Σ_{j<m} κ_{m,j} U^j]` for
/// `m = 1..=M`, where `s_m` is the scheme's evaluation point.
pub fn forward_substitution(
    op: &DiscreteCaputo<'_>,
    u0: f64,
    mut rhs: impl FnMut(usize, f64) -> f64,
) -> Result<Vec<f64>> {
    let levels = op.mesh().intervals();
    let mut values = Vec::with_capacity(levels + 1);
    values.push(u0);
    let mut row = Vec::with_capacity(levels + 1);
    for m in 1..=levels {
        op.row_into(m, &mut row);
        let diag = row[m];
        if !(diag > 0.0) {
            return Err(Error::NonPositiveDiagonal { level: m, value: diag });
        }
        let history = dot(&row[..m], &values[..m]);
        values.push((rhs(m, op.eval_point(m)) - history) / diag);
    }
    Ok(values)
}

/// Discrete solution `U^0..U^M` with optional exact nodal values.
#[derive(Debug, Clone)]
pub struct IvpSolution {
    pub mesh: TemporalMesh,
    pub scheme: SchemeKind,
    pub values: Vec<f64>,
    pub exact: Option<Vec<f64>>,
}

impl IvpSolution {
    /// `|u(t_m) - U^m|`, if an exact solution is known.
    pub fn errors(&self) -> Option<Vec<f64>> {
        self.exact
            .as_ref()
            .map(|ex| ex.iter().zip(&self.values).map(|(u, v)| (u - v).abs()).collect())
    }

    pub fn final_error(&self) -> Option<f64> {
        self.errors().and_then(|e| e.last().copied())
    }

    /// `max_m |u(t_m) - U^m|`.
    pub fn max_error(&self) -> Option<f64> {
        self.errors().map(|e| e.into_iter().fold(0.0, f64::max))
    }

    /// CSV dump `m,t,U,exact,error`; the last two columns stay empty when no
    /// exact solution is attached.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "m,t,U,exact,error")?;
        for (m, u) in self.values.iter().enumerate() {
            let t = self.mesh.node(m);
            match &self.exact {
                Some(ex) => writeln!(
                    out,
                    "{m},{t:.16e},{u:.16e},{:.16e},{:.16e}",
                    ex[m],
                    (ex[m] - u).abs()
                )?,
                None => writeln!(out, "{m},{t:.16e},{u:.16e},,")?,
            }
        }
        Ok(())
    }
}

/// `δ^α U^m = f(t_m)` (L1) or `δ^{α,*} U^m = f(t*_m)` (Alikhanov).
pub fn solve_ivp(scheme: SchemeKind, mesh: &TemporalMesh, problem: &IvpProblem) -> Result<IvpSolution> {
    let op = DiscreteCaputo::new(scheme, mesh, problem.alpha)?;
    let values = forward_substitution(&op, problem.u0, |_, t| (problem.rhs)(t))?;
    let exact = problem
        .exact
        .as_ref()
        .map(|ex| mesh.nodes().iter().map(|&t| ex.value(t)).collect());
    Ok(IvpSolution {
        mesh: mesh.clone(),
        scheme,
        values,
        exact,
    })
}

/// Samples per interval used for the suprema in `ψ^j`.
pub const SUP_SAMPLES: usize = 33;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    /// `r^m` for `m = 1..=M` (index `m - 1`).
    pub r_values: Vec<f64>,
    /// `ψ^j` for `j = 1..=M` (index `j - 1`).
    pub psi_values: Vec<f64>,
    /// `max_m |r^m| / [(τ/t_m)^q max_{j≤m} ψ^j]` with
    /// `q = min{α+1, (p-α)/r}`.
    pub bound_ratio: f64,
    /// The exponent `q`.
    pub exponent: f64,
}

/// Sample points of `[a, b]`, skipping `s = 0`.
fn samples(a: f64, b: f64) -> impl Iterator<Item = f64> {
    let n = SUP_SAMPLES - 1;
    (0..=n)
        .map(move |k| a + (b - a) * k as f64 / n as f64)
        .filter(|&s| s > 0.0)
}

fn sup(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    samples(a, b).map(f).fold(0.0, f64::max)
}

fn psi_l1(mesh: &TemporalMesh, u: &MonomialSum, alpha: f64) -> Vec<f64> {
    let t = mesh.nodes();
    let levels = mesh.intervals();
    let mut psi = Vec::with_capacity(levels);
    let slope = (u.value(t[1]) - u.value(t[0])) / (t[1] - t[0]);
    psi.push(sup(0.0, t[1], |s| s.powf(1.0 - alpha) * (slope - u.derivative(1, s)).abs()));
    for j in 2..=levels {
        psi.push(t[j].powf(2.0 - alpha) * sup(t[j - 1], t[j], |s| u.derivative(2, s).abs()));
    }
    psi
}

fn psi_alikhanov(mesh: &TemporalMesh, u: &MonomialSum, alpha: f64) -> Vec<f64> {
    let t = mesh.nodes();
    let levels = mesh.intervals();
    let mut psi = Vec::with_capacity(levels);
    let t2 = t[2.min(levels)];
    let (lo, hi) = samples(0.0, t2)
        .chain(std::iter::once(0.0))
        .map(|s| u.value(s))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let first = sup(0.0, t2, |s| s.powf(1.0 - alpha) * u.derivative(1, s).abs())
        + t2.powf(-alpha) * (hi - lo);
    psi.push(first);
    for j in 2..levels {
        let third = sup(t[j - 1], t[j], |s| u.derivative(3, s).abs())
            .max(sup(t[j], t[j + 1], |s| u.derivative(3, s).abs()));
        psi.push(t[j].powf(3.0 - alpha) * third);
    }
    if levels >= 2 {
        let last = if levels >= 3 { psi[levels - 2] } else { psi[0] };
        psi.push(last);
    }
    psi
}

/// Truncation errors `r^m = δU(t_m) - D^α u(s_m)` of the exact solution and
/// the ratio against the bound shape `(τ/t_m)^q max_{j≤m} ψ^j`.
pub fn truncation_report(scheme: SchemeKind, mesh: &TemporalMesh, problem: &IvpProblem) -> Result<TruncationReport> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Domain("truncation report needs an exact solution".into()))?;
    let alpha = problem.alpha;
    let op = DiscreteCaputo::new(scheme, mesh, alpha)?;
    let history: Vec<f64> = mesh.nodes().iter().map(|&t| exact.value(t)).collect();
    let levels = mesh.intervals();
    let mut r_values = Vec::with_capacity(levels);
    let mut row = Vec::new();
    for m in 1..=levels {
        op.row_into(m, &mut row);
        r_values.push(dot(&row, &history[..=m]) - exact.caputo(alpha, op.eval_point(m))?);
    }
    let psi_values = match scheme {
        SchemeKind::L1 => psi_l1(mesh, exact, alpha),
        SchemeKind::Alikhanov => psi_alikhanov(mesh, exact, alpha),
    };
    let r = mesh.grading_or_estimate();
    let exponent = (alpha + 1.0).min((scheme.order() - alpha) / r);
    let tau = mesh.first_step();
    let mut running_psi = 0.0f64;
    let mut bound_ratio = 0.0f64;
    for m in 1..=levels {
        running_psi = running_psi.max(psi_values[m - 1]);
        let shape = (tau / mesh.node(m)).powf(exponent) * running_psi;
        if shape > 0.0 {
            bound_ratio = bound_ratio.max(r_values[m - 1].abs() / shape);
        }
    }
    Ok(TruncationReport {
        r_values,
        psi_values,
        bound_ratio,
        exponent,
    })
}
