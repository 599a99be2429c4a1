//! Temporal meshes on `[0, T]`: standard graded meshes, quasi-gradedness
//! diagnostics, refinement, and extraction of quasi-graded submeshes.

use std::io::Write;

use crate::error::{Error, Result};

/// Band `[1/8, 8]` used to make the `≃` / `∼` relations of a quasi-graded
/// mesh concrete.
pub const QUASI_GRADED_BAND: f64 = 8.0;

/// Lower bound on `ρ_j` in the first sufficient M-matrix condition for the
/// Alikhanov operator (together with `ρ_j ≤ ρ_{j-1}`).
pub const ALIKHANOV_RHO_MONOTONE_MIN: f64 = 0.4656;

/// Lower bound on `ρ_j` in the second sufficient M-matrix condition.
pub const ALIKHANOV_RHO_MIN: f64 = 4.0 / 7.0;

/// Relative slack when testing `ρ_j ≤ ρ_{j-1}`; absorbs rounding in
/// `τ_j = t_j - t_{j-1}` for long meshes.
const MONOTONE_TOL: f64 = 1e-9;

/// Geometric search grid for the submesh density constant `C`.
const SUBMESH_C_RATIO: f64 = 1.25;
const SUBMESH_C_MAX: f64 = 64.0;

/// Strictly increasing nodes `0 = t_0 < t_1 < ... < t_M = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMesh {
    final_time: f64,
    nodes: Vec<f64>,
    grading: Option<f64>,
}

impl TemporalMesh {
    /// Standard graded mesh `t_j = T (j/M)^r`.
    pub fn graded(final_time: f64, intervals: usize, r: f64) -> Result<Self> {
        if !(final_time > 0.0) || !final_time.is_finite() {
            return Err(Error::Domain(format!("final time must be positive, got {final_time}")));
        }
        if intervals == 0 {
            return Err(Error::Domain("number of intervals must be at least 1".into()));
        }
        if !(r >= 1.0) || !r.is_finite() {
            return Err(Error::Domain(format!("grading exponent must be >= 1, got {r}")));
        }
        let m = intervals as f64;
        // `j / M` is correctly rounded, so the node for (j, M) and (2j, 2M)
        // coincide bitwise; nested two-mesh comparisons rely on that.
        let nodes = (0..=intervals)
            .map(|j| final_time * (j as f64 / m).powf(r))
            .collect();
        Ok(Self {
            final_time,
            nodes,
            grading: Some(r),
        })
    }

    pub fn uniform(final_time: f64, intervals: usize) -> Result<Self> {
        Self::graded(final_time, intervals, 1.0)
    }

    /// Arbitrary mesh from explicit nodes. The first node must be 0 and the
    /// sequence strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidMesh("need at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidMesh(format!("t_0 must be 0, got {}", nodes[0])));
        }
        for (j, w) in nodes.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidMesh(format!(
                    "nodes not strictly increasing at j = {}: {} -> {}",
                    j + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self {
            final_time: *nodes.last().unwrap(),
            nodes,
            grading: None,
        })
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// `τ_j = t_j - t_{j-1}` for `j >= 1`.
    #[inline]
    pub fn step(&self, j: usize) -> f64 {
        self.nodes[j] - self.nodes[j - 1]
    }

    /// `τ = t_1`.
    #[inline]
    pub fn first_step(&self) -> f64 {
        self.nodes[1]
    }

    /// Number of intervals `M`.
    #[inline]
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    #[inline]
    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    /// Grading exponent recorded by [`TemporalMesh::graded`].
    #[inline]
    pub fn grading(&self) -> Option<f64> {
        self.grading
    }

    /// Recorded grading, or `ln(T/τ) / ln M` for meshes built otherwise.
    pub fn grading_or_estimate(&self) -> f64 {
        self.grading.unwrap_or_else(|| self.estimate_grading())
    }

    /// Exponent `r` for which `τ = T M^{-r}`; 1 when `M = 1`.
    pub fn estimate_grading(&self) -> f64 {
        let m = self.intervals();
        if m < 2 {
            return 1.0;
        }
        (self.final_time / self.first_step()).ln() / (m as f64).ln()
    }

    /// `ρ_j = τ_{j+1} / τ_j` for `j = 1..M-1` (index 0 holds `ρ_1`).
    pub fn step_ratios(&self) -> Vec<f64> {
        (1..self.intervals())
            .map(|j| self.step(j + 1) / self.step(j))
            .collect()
    }

    /// Tightest constants in the quasi-graded relations for exponent `r`,
    /// the `ρ_j` sequence, and the M-matrix sufficient conditions.
    pub fn diagnose(&self, r: f64) -> MeshDiagnostics {
        let m = self.intervals();
        let tau = self.first_step();
        let t_final = self.final_time;

        let mut c_lower = f64::INFINITY;
        let mut c_upper = 0.0_f64;
        let mut growth_lower = f64::INFINITY;
        let mut growth_upper = 0.0_f64;
        for j in 1..=m {
            let t = self.nodes[j];
            // Normalized by T so the constants are scale-free.
            let scale = (tau / t_final).powf(1.0 / r) * (t / t_final).powf(1.0 - 1.0 / r);
            let ratio = (self.step(j) / t_final) / scale;
            c_lower = c_lower.min(ratio);
            c_upper = c_upper.max(ratio);
            let growth = t / (tau * (j as f64).powf(r));
            growth_lower = growth_lower.min(growth);
            growth_upper = growth_upper.max(growth);
        }
        let first_step_scale = tau * (m as f64).powf(r) / t_final;

        let rho = self.step_ratios();
        let band = |x: f64| (1.0 / QUASI_GRADED_BAND..=QUASI_GRADED_BAND).contains(&x);
        let satisfies_quasi_graded = band(c_lower)
            && band(c_upper)
            && band(growth_lower)
            && band(growth_upper)
            && band(first_step_scale);

        // Conditions are stated for j >= 2, i.e. rho[1..] in 0-based storage.
        let satisfies_alikhanov_condition_a = (1..rho.len()).all(|k| {
            rho[k] >= ALIKHANOV_RHO_MONOTONE_MIN && rho[k] <= rho[k - 1] * (1.0 + MONOTONE_TOL)
        });
        let satisfies_alikhanov_condition_b =
            rho.iter().skip(1).all(|&x| x >= ALIKHANOV_RHO_MIN);

        MeshDiagnostics {
            r_estimate: self.estimate_grading(),
            c_lower,
            c_upper,
            growth_lower,
            growth_upper,
            first_step_scale,
            ratio_sequence: rho,
            satisfies_quasi_graded,
            satisfies_alikhanov_condition_a,
            satisfies_alikhanov_condition_b,
        }
    }

    /// Adds nodes strictly inside `(t_1, T)`; the first interval is kept.
    pub fn refine(&self, extra_nodes: &[f64]) -> Result<Self> {
        if extra_nodes.is_empty() {
            return Ok(self.clone());
        }
        let t1 = self.first_step();
        let mut merged = self.nodes.clone();
        for &s in extra_nodes {
            if !s.is_finite() || s <= t1 || s >= self.final_time {
                return Err(Error::Domain(format!(
                    "extra node {s} must lie strictly inside (t_1, T) = ({t1}, {})",
                    self.final_time
                )));
            }
            merged.push(s);
        }
        merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if let Some(w) = merged.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!("duplicate node {}", w[0])));
        }
        Self::from_nodes(merged)
    }

    /// Submesh `t'_1 = t_1`, `t'_k = min{t_j : t_j >= T (C k / M)^r}`, closed
    /// off at `T`, for a single density constant `C`. Fails if the mesh
    /// violates the weak quasi-graded precondition or if the result is not
    /// quasi-graded.
    pub fn extract_quasi_graded_submesh(&self, r: f64, c: f64) -> Result<Self> {
        self.check_weak_quasi_graded(r)?;
        let sub = self.submesh_for_constant(r, c)?;
        let diag = sub.diagnose(r);
        if diag.satisfies_quasi_graded {
            Ok(sub)
        } else {
            Err(Error::NoSubmesh(format!(
                "C = {c}: submesh constants [{:.3}, {:.3}], growth [{:.3}, {:.3}], scale {:.3}",
                diag.c_lower,
                diag.c_upper,
                diag.growth_lower,
                diag.growth_upper,
                diag.first_step_scale
            )))
        }
    }

    /// Scans `C` over `{1, 1.25, 1.5625, ...} ≤ 64` and returns the first
    /// quasi-graded submesh together with the constant that produced it.
    pub fn search_quasi_graded_submesh(&self, r: f64) -> Result<(Self, f64)> {
        self.check_weak_quasi_graded(r)?;
        let mut c = 1.0;
        while c <= SUBMESH_C_MAX * (1.0 + 1e-12) {
            if let Ok(sub) = self.extract_quasi_graded_submesh(r, c) {
                return Ok((sub, c));
            }
            c *= SUBMESH_C_RATIO;
        }
        Err(Error::NoSubmesh(format!(
            "no C in [1, {SUBMESH_C_MAX}] gives a quasi-graded submesh for r = {r}"
        )))
    }

    fn check_weak_quasi_graded(&self, r: f64) -> Result<()> {
        if !(r >= 1.0) {
            return Err(Error::Domain(format!("grading exponent must be >= 1, got {r}")));
        }
        let m = self.intervals() as f64;
        let t_final = self.final_time;
        let tau = self.first_step();
        let scale = tau * m.powf(r) / t_final;
        if !(1.0 / QUASI_GRADED_BAND..=QUASI_GRADED_BAND).contains(&scale) {
            return Err(Error::NoSubmesh(format!(
                "first interval not of order M^-r: tau M^r / T = {scale:.3e}"
            )));
        }
        for j in 1..=self.intervals() {
            let bound = (tau / t_final).powf(1.0 / r)
                * (self.nodes[j] / t_final).powf(1.0 - 1.0 / r)
                * t_final;
            if self.step(j) > QUASI_GRADED_BAND * bound {
                return Err(Error::NoSubmesh(format!(
                    "interval {j} too long for exponent {r}: {:.3e} > 8 x {:.3e}",
                    self.step(j),
                    bound
                )));
            }
        }
        Ok(())
    }

    fn submesh_for_constant(&self, r: f64, c: f64) -> Result<Self> {
        let m = self.intervals() as f64;
        let t_final = self.final_time;
        let mut out = vec![0.0, self.nodes[1]];
        let mut cursor = 1;
        let mut k = 2usize;
        loop {
            let target = t_final * (c * k as f64 / m).powf(r);
            if target >= t_final {
                break;
            }
            while cursor <= self.intervals() && self.nodes[cursor] < target {
                cursor += 1;
            }
            let t = self.nodes[cursor.min(self.intervals())];
            if t > *out.last().unwrap() {
                out.push(t);
            }
            if t >= t_final {
                break;
            }
            k += 1;
        }
        if *out.last().unwrap() < t_final {
            // Close off at T, merging a sliver final interval into its neighbour.
            let n = out.len();
            if n >= 3 {
                let last = t_final - out[n - 1];
                let prev = out[n - 1] - out[n - 2];
                if last < 0.5 * prev {
                    out.pop();
                }
            }
            out.push(t_final);
        }
        Self::from_nodes(out)
    }

    /// True when every node of `self` equals (bitwise) node `2j` of `fine`.
    pub fn nests_in(&self, fine: &TemporalMesh) -> bool {
        fine.intervals() == 2 * self.intervals()
            && self
                .nodes
                .iter()
                .enumerate()
                .all(|(j, &t)| fine.nodes[2 * j] == t)
    }

    /// CSV dump `j,t,tau` (tau empty for `j = 0`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "j,t,tau")?;
        for (j, &t) in self.nodes.iter().enumerate() {
            if j == 0 {
                writeln!(out, "0,{t:.16e},")?;
            } else {
                writeln!(out, "{j},{t:.16e},{:.16e}", self.step(j))?;
            }
        }
        Ok(())
    }
}

/// Output of [`TemporalMesh::diagnose`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeshDiagnostics {
    pub r_estimate: f64,
    /// `min_j τ_j / (τ^{1/r} t_j^{1-1/r})`.
    pub c_lower: f64,
    /// `max_j τ_j / (τ^{1/r} t_j^{1-1/r})`.
    pub c_upper: f64,
    /// `min_j t_j / (τ j^r)`.
    pub growth_lower: f64,
    /// `max_j t_j / (τ j^r)`.
    pub growth_upper: f64,
    /// `τ M^r / T`.
    pub first_step_scale: f64,
    /// `ρ_j` for `j = 1..M-1`.
    pub ratio_sequence: Vec<f64>,
    pub satisfies_quasi_graded: bool,
    /// `0.4656 ≤ ρ_j ≤ ρ_{j-1}` for all `j ≥ 2`.
    pub satisfies_alikhanov_condition_a: bool,
    /// `ρ_j ≥ 4/7` for all `j ≥ 2`.
    pub satisfies_alikhanov_condition_b: bool,
}

impl MeshDiagnostics {
    pub fn satisfies_alikhanov_condition(&self) -> bool {
        self.satisfies_alikhanov_condition_a || self.satisfies_alikhanov_condition_b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn graded_nodes_match_formula() {
        let mesh = TemporalMesh::graded(1.0, 4, 2.0).unwrap();
        assert_eq!(mesh.nodes(), &[0.0, 0.0625, 0.25, 0.5625, 1.0]);
        let mesh = TemporalMesh::graded(1.0, 4, 1.0).unwrap();
        assert_eq!(mesh.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(mesh.grading(), Some(1.0));
    }

    #[test]
    fn graded_rejects_bad_parameters() {
        assert!(matches!(TemporalMesh::graded(1.0, 4, 0.9), Err(Error::Domain(_))));
        assert!(matches!(TemporalMesh::graded(1.0, 0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(TemporalMesh::graded(0.0, 4, 2.0), Err(Error::Domain(_))));
        assert!(matches!(TemporalMesh::graded(-1.0, 4, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn table_mesh_r1_m512() {
        let mesh = TemporalMesh::graded(1.0, 1 << 9, 1.0).unwrap();
        assert_eq!(mesh.intervals(), 512);
        assert_eq!(mesh.first_step(), 1.0 / 512.0);
        assert_eq!(mesh.final_time(), 1.0);
    }

    #[test]
    fn graded_levels_nest_bitwise() {
        for &r in &[1.0, 1.5, 2.0, 3.0, 2.5 / 0.9] {
            let coarse = TemporalMesh::graded(1.0, 64, r).unwrap();
            let fine = TemporalMesh::graded(1.0, 128, r).unwrap();
            assert!(coarse.nests_in(&fine), "r = {r}");
        }
    }

    #[test]
    fn from_nodes_validates() {
        assert!(TemporalMesh::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TemporalMesh::from_nodes(vec![0.1, 0.5, 1.0]).is_err());
        assert!(TemporalMesh::from_nodes(vec![0.0]).is_err());
        let mesh = TemporalMesh::from_nodes(vec![0.0, 0.3, 1.0]).unwrap();
        assert_eq!(mesh.grading(), None);
        assert_eq!(mesh.final_time(), 1.0);
    }

    #[test]
    fn uniform_diagnostics() {
        let mesh = TemporalMesh::uniform(1.0, 32).unwrap();
        let d = mesh.diagnose(1.0);
        assert_relative_eq!(d.c_lower, 1.0, max_relative = 1e-12);
        assert_relative_eq!(d.c_upper, 1.0, max_relative = 1e-12);
        assert_relative_eq!(d.r_estimate, 1.0, max_relative = 1e-12);
        assert!(d.satisfies_quasi_graded);
        assert!(d.satisfies_alikhanov_condition_a);
        assert!(d.satisfies_alikhanov_condition_b);
    }

    #[test]
    fn graded_r3_diagnostics() {
        let mesh = TemporalMesh::graded(1.0, 64, 3.0).unwrap();
        let d = mesh.diagnose(3.0);
        assert!(d.satisfies_quasi_graded);
        assert!(d.satisfies_alikhanov_condition_a);
        // Independent evaluation of rho_j = ((j+1)^r - j^r) / (j^r - (j-1)^r).
        for (k, &rho) in d.ratio_sequence.iter().enumerate() {
            let j = (k + 1) as f64;
            let expect = ((j + 1.0).powi(3) - j.powi(3)) / (j.powi(3) - (j - 1.0).powi(3));
            assert_relative_eq!(rho, expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn shrunk_interval_breaks_condition_b() {
        let mesh = TemporalMesh::uniform(1.0, 16).unwrap();
        let mut nodes = mesh.nodes().to_vec();
        nodes[8] = nodes[7] + (nodes[8] - nodes[7]) / 100.0;
        let mesh = TemporalMesh::from_nodes(nodes).unwrap();
        let d = mesh.diagnose(1.0);
        assert!(!d.satisfies_alikhanov_condition_b);
        assert!(!d.satisfies_alikhanov_condition_a);
    }

    #[test]
    fn refine_inserts_and_keeps_first_interval() {
        let mesh = TemporalMesh::uniform(1.0, 4).unwrap();
        let fine = mesh.refine(&[0.6]).unwrap();
        assert_eq!(fine.nodes(), &[0.0, 0.25, 0.5, 0.6, 0.75, 1.0]);
        assert_eq!(fine.grading(), None);
        assert_eq!(fine.first_step(), mesh.first_step());
        assert_eq!(mesh.refine(&[]).unwrap(), mesh);
    }

    #[test]
    fn refine_rejects_nodes_in_first_interval_or_duplicates() {
        let mesh = TemporalMesh::uniform(1.0, 4).unwrap();
        assert!(mesh.refine(&[0.1]).is_err());
        assert!(mesh.refine(&[0.25]).is_err());
        assert!(mesh.refine(&[0.0]).is_err());
        assert!(mesh.refine(&[1.0]).is_err());
        assert!(mesh.refine(&[0.5]).is_err());
        assert!(mesh.refine(&[0.6, 0.6]).is_err());
    }

    #[test]
    fn extract_is_identity_on_graded_mesh() {
        for &r in &[1.0, 2.0, 3.0] {
            let mesh = TemporalMesh::graded(1.0, 64, r).unwrap();
            let sub = mesh.extract_quasi_graded_submesh(r, 1.0).unwrap();
            assert_eq!(sub.nodes(), mesh.nodes());
        }
    }

    #[test]
    fn extract_recovers_from_midpoint_refinement() {
        let mesh = TemporalMesh::graded(1.0, 32, 2.0).unwrap();
        let extra: Vec<f64> = (2..=32)
            .map(|j| 0.5 * (mesh.node(j - 1) + mesh.node(j)))
            .collect();
        let refined = mesh.refine(&extra).unwrap();
        let (sub, _c) = refined.search_quasi_graded_submesh(2.0).unwrap();
        assert!(sub.diagnose(2.0).satisfies_quasi_graded);
        assert_eq!(sub.first_step(), mesh.first_step());
        assert_eq!(sub.final_time(), 1.0);
        assert!(sub.nodes().iter().all(|t| refined.nodes().contains(t)));
    }

    #[test]
    fn extract_fails_when_first_interval_too_long() {
        let mut nodes = vec![0.0, 0.5];
        nodes.extend((1..=64).map(|k| 0.5 + 0.5 * k as f64 / 64.0));
        let mesh = TemporalMesh::from_nodes(nodes).unwrap();
        assert!(matches!(
            mesh.search_quasi_graded_submesh(2.0),
            Err(Error::NoSubmesh(_))
        ));
    }

    #[test]
    fn csv_dump_has_blank_tau_on_first_row() {
        let mesh = TemporalMesh::uniform(1.0, 2).unwrap();
        let mut buf = Vec::new();
        mesh.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "j,t,tau");
        assert!(lines[1].ends_with(','));
        assert_eq!(lines.len(), 4);
    }
}
