use std::io::Write;

use crate::caputo::check_alpha;
use crate::error::{Error, Result};
use crate::mesh::TemporalMesh;

/// Pointwise error bound families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorEnvelopeKind {
    /// `E^m`, branches split at `r = 2 - α`.
    L1,
    /// `E^{m,*}`, branches split at `r = 3 - α`.
    Alikhanov,
    /// `E^{m,**} = E^{m,*} + M^{-2} t_m^{2α - 2/r}` when `2/r < α + 1`.
    AlikhanovParabolic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeKind {
    /// `𝒱^j` for the given `γ`.
    Stability { gamma: f64 },
    Error(ErrorEnvelopeKind),
}

/// Which side of the `r = p - α` split an error envelope uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeBranch {
    Below,
    Boundary,
    Above,
}

impl EnvelopeBranch {
    /// Branch for `r` against the split point; equality is taken up to a
    /// relative `1e-12`.
    pub fn select(r: f64, split: f64) -> Self {
        if (r - split).abs() <= 1e-12 * split.abs().max(1.0) {
            EnvelopeBranch::Boundary
        } else if r < split {
            EnvelopeBranch::Below
        } else {
            EnvelopeBranch::Above
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeProfile<'a> {
    pub kind: EnvelopeKind,
    pub mesh: &'a TemporalMesh,
    pub alpha: f64,
    pub r: Option<f64>,
    /// Indexed by level; `values[0] = 0`.
    pub values: Vec<f64>,
}

impl EnvelopeProfile<'_> {
    /// CSV dump `j,t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "j,t,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{j},{:.16e},{v:.16e}", self.mesh.node(j))?;
        }
        Ok(())
    }
}

/// `𝒱 = τ t^{α-1} · {1 | 1 + ln(t/τ) | (τ/t)^γ}` for `γ > 0`, `= 0`, `< 0`.
pub fn stability_envelope_value(tau: f64, t: f64, alpha: f64, gamma: f64) -> f64 {
    let base = tau * t.powf(alpha - 1.0);
    if gamma > 0.0 {
        base
    } else if gamma == 0.0 {
        base * (1.0 + (t / tau).ln())
    } else {
        base * (tau / t).powf(gamma)
    }
}

pub fn stability_envelope(mesh: &TemporalMesh, alpha: f64, gamma: f64) -> Result<EnvelopeProfile<'_>> {
    check_alpha(alpha)?;
    let tau = mesh.first_step();
    let values = std::iter::once(0.0)
        .chain(
            mesh.nodes()[1..]
                .iter()
                .map(|&t| stability_envelope_value(tau, t, alpha, gamma)),
        )
        .collect();
    Ok(EnvelopeProfile {
        kind: EnvelopeKind::Stability { gamma },
        mesh,
        alpha,
        r: None,
        values,
    })
}

fn power_law_branch(
    branch: EnvelopeBranch,
    order: f64,
    intervals: f64,
    t1: f64,
    t: f64,
    alpha: f64,
    r: f64,
) -> f64 {
    let rate = order - alpha;
    match branch {
        EnvelopeBranch::Below => intervals.powf(-r) * t.powf(alpha - 1.0),
        EnvelopeBranch::Boundary => {
            intervals.powf(-rate) * t.powf(alpha - 1.0) * (1.0 + (t / t1).ln())
        }
        EnvelopeBranch::Above => intervals.powf(-rate) * t.powf(alpha - rate / r),
    }
}

/// Error envelope at a single node, forcing the given branch.
///
/// `intervals` is `M`, `t1` the first node. For
/// [`ErrorEnvelopeKind::AlikhanovParabolic`] the branch refers to the
/// `E^{m,*}` part.
pub fn error_envelope_value(
    kind: ErrorEnvelopeKind,
    branch: EnvelopeBranch,
    intervals: usize,
    t1: f64,
    t: f64,
    alpha: f64,
    r: f64,
) -> f64 {
    let m = intervals as f64;
    match kind {
        ErrorEnvelopeKind::L1 => power_law_branch(branch, 2.0, m, t1, t, alpha, r),
        ErrorEnvelopeKind::Alikhanov => power_law_branch(branch, 3.0, m, t1, t, alpha, r),
        ErrorEnvelopeKind::AlikhanovParabolic => {
            let base = power_law_branch(branch, 3.0, m, t1, t, alpha, r);
            if 2.0 / r < alpha + 1.0 {
                base + m.powi(-2) * t.powf(2.0 * alpha - 2.0 / r)
            } else {
                base
            }
        }
    }
}

pub fn error_envelope(
    mesh: &TemporalMesh,
    alpha: f64,
    r: f64,
    kind: ErrorEnvelopeKind,
) -> Result<EnvelopeProfile<'_>> {
    check_alpha(alpha)?;
    if !(r >= 1.0) {
        return Err(Error::Domain(format!("grading exponent must be >= 1, got {r}")));
    }
    let order = match kind {
        ErrorEnvelopeKind::L1 => 2.0,
        ErrorEnvelopeKind::Alikhanov | ErrorEnvelopeKind::AlikhanovParabolic => 3.0,
    };
    let branch = EnvelopeBranch::select(r, order - alpha);
    let t1 = mesh.first_step();
    let intervals = mesh.intervals();
    let values = std::iter::once(0.0)
        .chain(
            mesh.nodes()[1..]
                .iter()
                .map(|&t| error_envelope_value(kind, branch, intervals, t1, t, alpha, r)),
        )
        .collect();
    Ok(EnvelopeProfile {
        kind: EnvelopeKind::Error(kind),
        mesh,
        alpha,
        r: Some(r),
        values,
    })
}
