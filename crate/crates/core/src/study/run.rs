use rayon::prelude::*;

use super::config::{Coupling, ErrorNorm, ExperimentConfig, ExperimentKind, PdeProblemKind};
use super::report::{ErrorReport, PointwiseSeries, RateBase, ReportRow};
use crate::bounds::{empirical_stability_check, error_envelope, verify_barrier_bound, ErrorEnvelopeKind};
use crate::caputo::SchemeKind;
use crate::error::{Error, Result};
use crate::ivp::{solve_ivp, truncation_report, IvpProblem};
use crate::mesh::TemporalMesh;
use crate::pde::{
    exact_error, manufactured_power_exact, solve_parabolic, two_mesh_error, ParabolicProblem, PdeSolution,
    SolverOptions, SpatialGrid2D,
};

fn with_context<T>(result: Result<T>, context: impl FnOnce() -> String) -> Result<T> {
    result.map_err(|e| Error::Experiment {
        context: context(),
        source: Box::new(e),
    })
}

/// Runs a sweep. Independent `(α, r)` series run on the rayon pool; rows are
/// assembled in config order, so output does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ErrorReport> {
    config.validate()?;
    let mut series = Vec::new();
    for &alpha in &config.alphas {
        for g in &config.gradings {
            series.push((alpha, g.eval(alpha)?));
        }
    }
    let rate_base = match (config.kind, config.coupling) {
        (ExperimentKind::Pde, Coupling::Square) => RateBase::N,
        _ => RateBase::M,
    };
    let results: Vec<Result<(Vec<ReportRow>, Vec<PointwiseSeries>)>> = series
        .par_iter()
        .map(|&(alpha, r)| {
            with_context(run_series(config, alpha, r), || {
                format!("{} {} alpha = {alpha}, r = {r}", config.kind, config.scheme)
            })
        })
        .collect();
    let value_label = if config.wants_rates() { "error" } else { "ratio" };
    let title = format!("{} / {} / {}", config.kind, config.scheme, config.norm);
    let mut report = ErrorReport::new(title, value_label, rate_base);
    for result in results {
        let (rows, pointwise) = result?;
        report.rows.extend(rows);
        report.pointwise.extend(pointwise);
    }
    if config.wants_rates() {
        report.fill_rates()?;
    }
    Ok(report)
}

fn row(alpha: f64, r: f64, m: usize, value: f64) -> ReportRow {
    ReportRow {
        alpha,
        r,
        m,
        n: None,
        gamma: None,
        value,
        rate: None,
    }
}

fn envelope_kind(scheme: SchemeKind) -> ErrorEnvelopeKind {
    match scheme {
        SchemeKind::L1 => ErrorEnvelopeKind::L1,
        SchemeKind::Alikhanov => ErrorEnvelopeKind::Alikhanov,
    }
}

fn run_series(config: &ExperimentConfig, alpha: f64, r: f64) -> Result<(Vec<ReportRow>, Vec<PointwiseSeries>)> {
    let t_final = config.final_time;
    let mut rows = Vec::new();
    let mut pointwise = Vec::new();
    match config.kind {
        ExperimentKind::Ivp => {
            let problem = IvpProblem::power_alpha(alpha)?;
            for &m in &config.meshes {
                let mesh = TemporalMesh::graded(t_final, m, r)?;
                let sol = solve_ivp(config.scheme, &mesh, &problem)?;
                let errors = sol.errors().expect("exact solution attached");
                let value = match config.norm {
                    ErrorNorm::FinalTime => *errors.last().expect("non-empty"),
                    _ => errors.iter().copied().fold(0.0, f64::max),
                };
                rows.push(row(alpha, r, m, value));
                if config.envelope_overlay {
                    let env = error_envelope(&mesh, alpha, r, envelope_kind(config.scheme))?;
                    pointwise.push(PointwiseSeries {
                        alpha,
                        r,
                        m,
                        times: mesh.nodes().to_vec(),
                        errors,
                        envelope: env.values,
                    });
                }
            }
        }
        ExperimentKind::Truncation => {
            let problem = IvpProblem::power_alpha(alpha)?;
            for &m in &config.meshes {
                let mesh = TemporalMesh::graded(t_final, m, r)?;
                rows.push(row(alpha, r, m, truncation_report(config.scheme, &mesh, &problem)?.bound_ratio));
            }
        }
        ExperimentKind::Stability => {
            for gamma in config.gammas_for(alpha) {
                for &m in &config.meshes {
                    let mesh = TemporalMesh::graded(t_final, m, r)?;
                    let check = empirical_stability_check(config.scheme, &mesh, alpha, gamma)?;
                    rows.push(ReportRow {
                        gamma: Some(gamma),
                        ..row(alpha, r, m, check.max_ratio)
                    });
                }
            }
        }
        ExperimentKind::Barrier => {
            for &m in &config.meshes {
                let mesh = TemporalMesh::graded(t_final, m, r)?;
                let ratio = verify_barrier_bound(&mesh, alpha, config.barrier_offset, config.scheme)?;
                rows.push(row(alpha, r, m, ratio));
            }
        }
        ExperimentKind::Pde => rows = run_pde_series(config, alpha, r)?,
    }
    Ok((rows, pointwise))
}

/// `(N, M)` pairs of a PDE sweep.
fn pde_resolutions(config: &ExperimentConfig) -> Vec<(usize, usize)> {
    match config.coupling {
        Coupling::FixedN => config.meshes.iter().map(|&m| (config.spatial[0], m)).collect(),
        Coupling::Equal => config.meshes.iter().map(|&m| (m, m)).collect(),
        Coupling::Square => config.spatial.iter().map(|&n| (n, n * n)).collect(),
    }
}

fn pde_problem(kind: PdeProblemKind, alpha: f64, grid: &SpatialGrid2D) -> Result<ParabolicProblem> {
    match kind {
        PdeProblemKind::Reference => ParabolicProblem::reference(alpha),
        PdeProblemKind::Manufactured => ParabolicProblem::manufactured_power(alpha),
        PdeProblemKind::ManufacturedDiscrete => ParabolicProblem::manufactured_power_on(alpha, grid),
    }
}

fn run_pde_series(config: &ExperimentConfig, alpha: f64, r: f64) -> Result<Vec<ReportRow>> {
    use std::f64::consts::PI;
    let options = SolverOptions {
        max_iterations: config.max_iterations,
        ..SolverOptions::with_method(config.solver)
    };
    let solve = |n: usize, m: usize| -> Result<PdeSolution> {
        let mesh = TemporalMesh::graded(config.final_time, m, r)?;
        let grid = SpatialGrid2D::square(PI, n)?;
        let problem = pde_problem(config.problem, alpha, &grid)?;
        with_context(solve_parabolic(config.scheme, &mesh, &grid, &problem, &options), || {
            format!("N = {n}, M = {m}")
        })
    };
    let levels_for = |sol: &PdeSolution| -> Vec<usize> {
        match config.norm {
            ErrorNorm::MaxOverTime => (1..=sol.mesh.intervals()).collect(),
            _ => vec![sol.mesh.intervals()],
        }
    };
    let mut rows = Vec::new();
    // The fine run of one pair is reused when it is the next coarse run.
    let mut cached: Option<((usize, usize), PdeSolution)> = None;
    for (n, m) in pde_resolutions(config) {
        let coarse = match cached.take() {
            Some((key, sol)) if key == (n, m) => sol,
            _ => solve(n, m)?,
        };
        let value = if config.two_mesh {
            let fine = solve(2 * n, 2 * m)?;
            let value = match config.norm {
                ErrorNorm::SpatialL2 => two_mesh_l2(&coarse, &fine)?,
                _ => two_mesh_error(&coarse, &fine, &levels_for(&coarse))?,
            };
            cached = Some(((2 * n, 2 * m), fine));
            value
        } else {
            let exact = |x: f64, y: f64, t: f64| manufactured_power_exact(alpha, x, y, t);
            match config.norm {
                ErrorNorm::SpatialL2 => exact_l2(&coarse, exact),
                _ => exact_error(&coarse, exact, &levels_for(&coarse)),
            }
        };
        rows.push(ReportRow {
            n: Some(n),
            ..row(alpha, r, m, value)
        });
    }
    Ok(rows)
}

fn two_mesh_l2(coarse: &PdeSolution, fine: &PdeSolution) -> Result<f64> {
    if !coarse.grid.nests_in(&fine.grid) {
        return Err(Error::NonNesting("spatial grids do not nest".into()));
    }
    let ratio = fine.grid.intervals() / coarse.grid.intervals();
    let m = coarse.mesh.intervals();
    let mf = fine.mesh.intervals();
    if coarse.mesh.node(m) != fine.mesh.node(mf) {
        return Err(Error::NonNesting("final times differ".into()));
    }
    let uc = &coarse.levels[m];
    let uf = &fine.levels[mf];
    let sum: f64 = uc
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let (i, k) = coarse.grid.interior_node(idx);
            let d = v - uf[fine.grid.interior_index(ratio * i, ratio * k)];
            d * d
        })
        .sum();
    Ok((sum * coarse.grid.hx() * coarse.grid.hy()).sqrt())
}

fn exact_l2(sol: &PdeSolution, exact: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let m = sol.mesh.intervals();
    let t = sol.mesh.node(m);
    let sum: f64 = sol.levels[m]
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let (i, k) = sol.grid.interior_node(idx);
            let (x, y) = sol.grid.coords(i, k);
            let d = exact(x, y, t) - v;
            d * d
        })
        .sum();
    (sum * sol.grid.hx() * sol.grid.hy()).sqrt()
}
