use crate::bounds::envelope::stability_envelope_value;
use crate::caputo::{DiscreteCaputo, SchemeKind};
use crate::error::Result;
use crate::ivp::forward_substitution;
use crate::mesh::TemporalMesh;

/// Outcome of [`empirical_stability_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCheck {
    /// `max_j |V^j| / 𝒱^j`.
    pub max_ratio: f64,
    /// Level attaining the maximum.
    pub worst_level: usize,
    pub solution: Vec<f64>,
}

/// Whether the stability bound is covered by theory for this combination:
/// `γ ≤ α - 1` holds on any mesh, larger `γ` needs `r ≤ (2-α)/α` (L1) or
/// `r ≤ (3-α)/α` (Alikhanov).
pub fn stability_preconditions_hold(scheme: SchemeKind, alpha: f64, r: f64, gamma: f64) -> bool {
    if gamma <= alpha - 1.0 {
        return true;
    }
    let limit = match scheme {
        SchemeKind::L1 => (2.0 - alpha) / alpha,
        SchemeKind::Alikhanov => (3.0 - alpha) / alpha,
    };
    r <= limit * (1.0 + 1e-12)
}

/// Solves `δ^α V^j = (τ/t_j)^{γ+1}`, `V^0 = 0`, and compares `|V^j|` with
/// the envelope `𝒱^j`. For Alikhanov the right-hand side is sampled at `t*_j`.
pub fn empirical_stability_check(
    scheme: SchemeKind,
    mesh: &TemporalMesh,
    alpha: f64,
    gamma: f64,
) -> Result<StabilityCheck> {
    let op = DiscreteCaputo::new(scheme, mesh, alpha)?;
    let tau = mesh.first_step();
    let solution = forward_substitution(&op, 0.0, |_, t| (tau / t).powf(gamma + 1.0))?;
    let mut max_ratio = 0.0;
    let mut worst_level = 1;
    for (j, v) in solution.iter().enumerate().skip(1) {
        let ratio = v.abs() / stability_envelope_value(tau, mesh.node(j), alpha, gamma);
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_level = j;
        }
    }
    Ok(StabilityCheck {
        max_ratio,
        worst_level,
        solution,
    })
}
