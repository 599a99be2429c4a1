//! Published reference errors for the scalar and parabolic test problems,
//! and a checker that recomputes them.

use std::fmt;
use std::str::FromStr;

use super::config::{Coupling, ErrorNorm, ExperimentConfig, ExperimentKind, GradingExpr, PdeProblemKind};
use super::run::run_experiment;
use crate::caputo::SchemeKind;
use crate::error::{Error, Result};
use crate::pde::LinearSolverKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GoldenTable {
    /// Parabolic benchmark, two-mesh errors with `N = M`.
    Table2Temporal,
    /// Parabolic benchmark, two-mesh errors with `M = N^2`.
    Table2Spatial,
    /// L1, `u = t^α`, error at `t = 1`.
    Table3,
    /// Alikhanov, `u = t^α`, error at `t = 1`.
    Table4,
    /// Alikhanov, `u = t^α`, maximum nodal error.
    Table5,
}

impl GoldenTable {
    pub const ALL: [GoldenTable; 5] = [
        GoldenTable::Table2Temporal,
        GoldenTable::Table2Spatial,
        GoldenTable::Table3,
        GoldenTable::Table4,
        GoldenTable::Table5,
    ];

    /// Significant digits the recomputed errors must reproduce.
    pub fn digits(self) -> u32 {
        match self {
            GoldenTable::Table2Temporal | GoldenTable::Table2Spatial => 2,
            _ => 3,
        }
    }

    /// Allowed deviation of recomputed rates from the published ones.
    pub fn rate_tolerance(self) -> f64 {
        match self {
            GoldenTable::Table2Temporal | GoldenTable::Table2Spatial => 0.015,
            _ => 0.005,
        }
    }

    /// Expands a selector: `2` covers both halves of the parabolic table.
    pub fn parse_list(s: &str) -> Result<Vec<GoldenTable>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "all" => out.extend(GoldenTable::ALL),
                "2" => out.extend([GoldenTable::Table2Temporal, GoldenTable::Table2Spatial]),
                other => out.push(other.parse()?),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for GoldenTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2t" | "2-temporal" => Ok(GoldenTable::Table2Temporal),
            "2s" | "2-spatial" => Ok(GoldenTable::Table2Spatial),
            "3" => Ok(GoldenTable::Table3),
            "4" => Ok(GoldenTable::Table4),
            "5" => Ok(GoldenTable::Table5),
            other => Err(Error::Config(format!("unknown table '{other}'"))),
        }
    }
}

impl fmt::Display for GoldenTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GoldenTable::Table2Temporal => "table 2 (time)",
            GoldenTable::Table2Spatial => "table 2 (space)",
            GoldenTable::Table3 => "table 3",
            GoldenTable::Table4 => "table 4",
            GoldenTable::Table5 => "table 5",
        })
    }
}

/// One row of a published table.
#[derive(Debug, Clone, Copy)]
pub struct GoldenRow {
    pub table: GoldenTable,
    pub alpha: f64,
    /// Grading as an expression in `a`.
    pub r: &'static str,
    /// Smallest resolution; successive columns multiply it by `step`.
    pub first: usize,
    pub step: usize,
    pub errors: &'static [f64],
    pub rates: &'static [f64],
}

impl GoldenRow {
    /// `(resolution, error)` for each column.
    pub fn columns(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.errors
            .iter()
            .enumerate()
            .map(|(k, &e)| (self.first * self.step.pow(k as u32), e))
    }
}

macro_rules! rows {
    ($table:expr, $first:expr, $step:expr; $( ($alpha:expr, $r:expr, [$($e:expr),*], [$($q:expr),*]) ),* $(,)?) => {
        &[ $( GoldenRow { table: $table, alpha: $alpha, r: $r, first: $first, step: $step,
                          errors: &[$($e),*], rates: &[$($q),*] } ),* ]
    };
}

const T2T: &[GoldenRow] = rows![GoldenTable::Table2Temporal, 32, 2;
    (0.3, "(2-a)/0.9", [6.99e-4, 2.30e-4, 7.45e-5, 2.39e-5], [1.60, 1.63, 1.64]),
    (0.5, "(2-a)/0.9", [1.54e-3, 5.75e-4, 2.10e-4, 7.59e-5], [1.43, 1.45, 1.47]),
    (0.7, "(2-a)/0.9", [3.05e-3, 1.28e-3, 5.29e-4, 2.17e-4], [1.25, 1.27, 1.28]),
];

const T2S: &[GoldenRow] = rows![GoldenTable::Table2Spatial, 8, 2;
    (0.3, "(2-a)/0.9", [2.81e-3, 7.36e-4, 1.87e-4, 4.86e-5], [1.93, 1.97, 1.95]),
    (0.5, "(2-a)/0.9", [2.87e-3, 7.34e-4, 1.84e-4, 4.86e-5], [1.97, 1.99, 1.92]),
    (0.7, "(2-a)/0.9", [3.15e-3, 7.84e-4, 1.91e-4, 4.86e-5], [2.01, 2.04, 1.97]),
];

const T3: &[GoldenRow] = rows![GoldenTable::Table3, 128, 4;
    (0.3, "1", [1.182e-3, 2.939e-4, 7.333e-5, 1.832e-5, 4.578e-6, 1.144e-6], [1.004, 1.001, 1.001, 1.000, 1.000]),
    (0.5, "1", [1.953e-3, 4.883e-4, 1.221e-4, 3.052e-5, 7.629e-6, 1.907e-6], [1.000, 1.000, 1.000, 1.000, 1.000]),
    (0.7, "1", [2.489e-3, 6.433e-4, 1.642e-4, 4.163e-5, 1.050e-5, 2.640e-6], [0.976, 0.985, 0.990, 0.994, 0.996]),
    (0.3, "2-a", [1.201e-4, 1.310e-5, 1.401e-6, 1.477e-7, 1.540e-8, 1.592e-9], [1.598, 1.612, 1.623, 1.631, 1.637]),
    (0.5, "2-a", [5.039e-4, 7.407e-5, 1.063e-5, 1.500e-6, 2.089e-7, 2.878e-8], [1.383, 1.400, 1.413, 1.422, 1.430]),
    (0.7, "2-a", [1.267e-3, 2.495e-4, 4.782e-5, 8.986e-6, 1.663e-6, 3.042e-7], [1.172, 1.192, 1.206, 1.217, 1.225]),
    (0.3, "(2-a)/0.95", [1.035e-4, 1.074e-5, 1.094e-6, 1.098e-7, 1.092e-8, 1.076e-9], [1.634, 1.648, 1.658, 1.665, 1.671]),
    (0.5, "(2-a)/0.95", [4.469e-4, 6.276e-5, 8.609e-6, 1.161e-6, 1.546e-7, 2.039e-8], [1.416, 1.433, 1.445, 1.454, 1.461]),
    (0.7, "(2-a)/0.95", [1.143e-3, 2.164e-4, 3.984e-5, 7.192e-6, 1.279e-6, 2.250e-7], [1.201, 1.221, 1.235, 1.245, 1.254]),
];

const T4: &[GoldenRow] = rows![GoldenTable::Table4, 64, 4;
    (0.3, "1", [1.325e-3, 3.306e-4, 8.260e-5, 2.065e-5, 5.162e-6, 1.290e-6], [1.002, 1.000, 1.000, 1.000, 1.000]),
    (0.5, "1", [1.530e-3, 3.819e-4, 9.543e-5, 2.386e-5, 5.964e-6, 1.491e-6], [1.001, 1.000, 1.000, 1.000, 1.000]),
    (0.7, "1", [1.236e-3, 3.087e-4, 7.715e-5, 1.929e-5, 4.821e-6, 1.205e-6], [1.001, 1.000, 1.000, 1.000, 1.000]),
    (0.3, "2", [3.891e-5, 2.446e-6, 1.530e-7, 9.560e-9, 5.975e-10, 3.734e-11], [1.996, 1.999, 2.000, 2.000, 2.000]),
    (0.5, "2", [6.079e-5, 3.940e-6, 2.502e-7, 1.576e-8, 9.885e-10, 6.190e-11], [1.974, 1.988, 1.995, 1.997, 1.999]),
    (0.7, "2", [6.450e-5, 4.436e-6, 2.936e-7, 1.902e-8, 1.216e-9, 7.720e-11], [1.931, 1.959, 1.974, 1.984, 1.989]),
    (0.3, "(3-a)/0.95", [1.085e-5, 3.241e-7, 8.953e-9, 2.363e-10, 6.058e-12, 1.509e-13], [2.532, 2.589, 2.622, 2.643, 2.664]),
    (0.5, "(3-a)/0.95", [2.710e-5, 1.057e-6, 3.839e-8, 1.337e-9, 4.529e-11, 1.517e-12], [2.340, 2.392, 2.422, 2.442, 2.450]),
    (0.7, "(3-a)/0.95", [3.962e-5, 2.017e-6, 9.638e-8, 4.431e-9, 1.986e-10, 8.791e-12], [2.148, 2.194, 2.221, 2.240, 2.249]),
];

const T5: &[GoldenRow] = rows![GoldenTable::Table5, 64, 4;
    (0.3, "1", [2.477e-2, 1.634e-2, 1.078e-2, 7.115e-3, 4.694e-3, 3.097e-3], [0.300, 0.300, 0.300, 0.300, 0.300]),
    (0.5, "1", [1.164e-2, 5.819e-3, 2.909e-3, 1.455e-3, 7.273e-4, 3.637e-4], [0.500, 0.500, 0.500, 0.500, 0.500]),
    (0.7, "1", [3.919e-3, 1.485e-3, 5.627e-4, 2.132e-4, 8.079e-5, 3.061e-5], [0.700, 0.700, 0.700, 0.700, 0.700]),
    (0.3, "2/a", [5.865e-5, 3.665e-6, 2.291e-7, 1.432e-8, 8.949e-10, 5.593e-11], [2.000, 2.000, 2.000, 2.000, 2.000]),
    (0.5, "2/a", [5.250e-5, 3.281e-6, 2.051e-7, 1.282e-8, 8.011e-10, 5.007e-11], [2.000, 2.000, 2.000, 2.000, 2.000]),
    (0.7, "2/a", [4.232e-5, 2.645e-6, 1.653e-7, 1.033e-8, 6.458e-10, 4.036e-11], [2.000, 2.000, 2.000, 2.000, 2.000]),
    (0.3, "(3-a)/a", [5.505e-5, 1.659e-6, 4.472e-8, 1.142e-9, 2.833e-11, 6.923e-13], [2.526, 2.607, 2.646, 2.667, 2.677]),
    (0.5, "(3-a)/a", [3.976e-5, 1.379e-6, 4.508e-8, 1.439e-9, 4.542e-11, 1.425e-12], [2.425, 2.467, 2.485, 2.493, 2.497]),
    (0.7, "(3-a)/a", [3.425e-5, 1.498e-6, 6.307e-8, 2.619e-9, 1.083e-10, 4.469e-12], [2.257, 2.285, 2.295, 2.298, 2.299]),
];

/// Published rows of a table.
pub fn golden_rows(table: GoldenTable) -> &'static [GoldenRow] {
    match table {
        GoldenTable::Table2Temporal => T2T,
        GoldenTable::Table2Spatial => T2S,
        GoldenTable::Table3 => T3,
        GoldenTable::Table4 => T4,
        GoldenTable::Table5 => T5,
    }
}

/// `|computed - expected|` within half a unit in the last of `digits`
/// significant digits of `expected`.
pub fn agrees_to_digits(computed: f64, expected: f64, digits: u32) -> bool {
    let exponent = expected.abs().log10().floor();
    let half_unit = 0.5 * 10f64.powf(exponent - digits as f64 + 1.0);
    (computed - expected).abs() <= half_unit * (1.0 + 1e-9)
}

/// Sweep that regenerates the given rows (same table and grading).
pub fn golden_config(rows: &[GoldenRow], max_resolution: usize, solver: LinearSolverKind) -> ExperimentConfig {
    let first = rows[0];
    let resolutions: Vec<usize> = first.columns().map(|(m, _)| m).filter(|&m| m <= max_resolution).collect();
    let mut config = ExperimentConfig {
        alphas: rows.iter().map(|r| r.alpha).collect(),
        gradings: vec![GradingExpr::new(first.r).expect("valid golden grading")],
        solver,
        ..ExperimentConfig::default()
    };
    match first.table {
        GoldenTable::Table2Temporal | GoldenTable::Table2Spatial => {
            config.kind = ExperimentKind::Pde;
            config.scheme = SchemeKind::L1;
            config.problem = PdeProblemKind::Reference;
            config.two_mesh = true;
            if first.table == GoldenTable::Table2Temporal {
                config.coupling = Coupling::Equal;
                config.meshes = resolutions;
            } else {
                config.coupling = Coupling::Square;
                config.spatial = resolutions;
                config.meshes = vec![1];
            }
        }
        GoldenTable::Table3 => {
            config.scheme = SchemeKind::L1;
            config.meshes = resolutions;
        }
        GoldenTable::Table4 => {
            config.scheme = SchemeKind::Alikhanov;
            config.meshes = resolutions;
        }
        GoldenTable::Table5 => {
            config.scheme = SchemeKind::Alikhanov;
            config.norm = ErrorNorm::MaxOverTime;
            config.meshes = resolutions;
        }
    }
    config
}

/// Comparison of one recomputed value with its published counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub table: GoldenTable,
    pub alpha: f64,
    pub r: &'static str,
    pub resolution: usize,
    pub quantity: &'static str,
    pub expected: f64,
    pub computed: f64,
    pub pass: bool,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: alpha={} r={} res={} expected {:.3e} computed {:.4e} [{}]",
            self.table,
            self.quantity,
            self.alpha,
            self.r,
            self.resolution,
            self.expected,
            self.computed,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Recomputes every row of `table` up to `max_resolution` (on `M`, or on
/// `N` for the spatial half of table 2) and compares errors and rates.
/// `digits` overrides the table's significant-digit tolerance for errors.
pub fn check_table(
    table: GoldenTable,
    max_resolution: usize,
    solver: LinearSolverKind,
    digits: Option<u32>,
) -> Result<Vec<CheckOutcome>> {
    let digits = digits.unwrap_or(table.digits());
    let rows = golden_rows(table);
    let mut outcomes = Vec::new();
    let mut by_grading: Vec<&'static str> = rows.iter().map(|r| r.r).collect();
    by_grading.dedup();
    for grading in by_grading {
        let group: Vec<GoldenRow> = rows.iter().filter(|r| r.r == grading).copied().collect();
        let config = golden_config(&group, max_resolution, solver);
        let report = run_experiment(&config)?;
        for golden in &group {
            let computed: Vec<_> = report.rows.iter().filter(|r| r.alpha == golden.alpha).collect();
            for (k, ((res, expected), row)) in golden.columns().zip(&computed).enumerate() {
                outcomes.push(CheckOutcome {
                    table,
                    alpha: golden.alpha,
                    r: golden.r,
                    resolution: res,
                    quantity: "error",
                    expected,
                    computed: row.value,
                    pass: agrees_to_digits(row.value, expected, digits),
                });
                if k > 0 {
                    let expected = golden.rates[k - 1];
                    let computed = row.rate.unwrap_or(f64::NAN);
                    outcomes.push(CheckOutcome {
                        table,
                        alpha: golden.alpha,
                        r: golden.r,
                        resolution: res,
                        quantity: "rate",
                        expected,
                        computed,
                        pass: (computed - expected).abs() <= table.rate_tolerance(),
                    });
                }
            }
        }
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_agreement() {
        assert!(agrees_to_digits(4.8828e-4, 4.883e-4, 3));
        assert!(agrees_to_digits(4.8849e-4, 4.883e-4, 3));
        assert!(!agrees_to_digits(4.8900e-4, 4.883e-4, 3));
        assert!(agrees_to_digits(6.971e-4, 6.99e-4, 2));
        assert!(!agrees_to_digits(7.1e-4, 6.99e-4, 2));
    }

    #[test]
    fn tables_are_rectangular() {
        for table in GoldenTable::ALL {
            for row in golden_rows(table) {
                assert_eq!(row.rates.len() + 1, row.errors.len(), "{table} {}", row.alpha);
            }
        }
    }

    #[test]
    fn published_rates_follow_from_published_errors() {
        for table in [GoldenTable::Table3, GoldenTable::Table4, GoldenTable::Table5] {
            for row in golden_rows(table) {
                let cols: Vec<(usize, f64)> = row.columns().collect();
                let rates = super::super::report::compute_rates(&cols).unwrap();
                for (q, p) in rates.iter().zip(row.rates) {
                    // published errors are rounded to 4 digits
                    assert!((q - p).abs() < 0.01, "{table} alpha={} r={}: {q} vs {p}", row.alpha, row.r);
                }
            }
        }
    }

    #[test]
    fn selector_parsing() {
        assert_eq!(
            GoldenTable::parse_list("3, 2").unwrap(),
            vec![GoldenTable::Table2Temporal, GoldenTable::Table2Spatial, GoldenTable::Table3]
        );
        assert!(GoldenTable::parse_list("9").is_err());
    }

    #[test]
    fn small_table4_check_passes() {
        let outcomes = check_table(GoldenTable::Table4, 256, LinearSolverKind::Auto, None).unwrap();
        assert_eq!(outcomes.len(), 9 * 3);
        assert!(outcomes.iter().all(|o| o.pass), "{outcomes:#?}");
    }
}
