use caputo_core::bounds::{stability_envelope, verify_barrier_bound};
use caputo_core::ivp::{solve_ivp, IvpProblem};
use caputo_core::study::{compute_rates, parse_csv, write_csv, ErrorReport, RateBase, ReportRow};
use caputo_core::{gamma, DiscreteCaputo, MonomialSum, SchemeKind, TemporalMesh};
use proptest::prelude::*;

fn scheme() -> impl Strategy<Value = SchemeKind> {
    prop_oneof![Just(SchemeKind::L1), Just(SchemeKind::Alikhanov)]
}

/// Textbook telescoped L1 row, accurate when the mesh is not strongly graded.
fn l1_row_direct(mesh: &TemporalMesh, alpha: f64, m: usize) -> Vec<f64> {
    let t = mesh.nodes();
    let beta = 1.0 - alpha;
    let mut row = vec![0.0; m + 1];
    for j in 1..=m {
        let h = t[j] - t[j - 1];
        let w = ((t[m] - t[j - 1]).powf(beta) - (t[m] - t[j]).powf(beta)) / (beta * h * gamma(1.0 - alpha));
        row[j] += w;
        row[j - 1] -= w;
    }
    row
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_annihilate_constants(alpha in 0.05..0.95f64, r in 1.0..6.0f64, m in 1usize..160, scheme in scheme()) {
        let mesh = TemporalMesh::graded(1.0, m, r).unwrap();
        let op = DiscreteCaputo::new(scheme, &mesh, alpha).unwrap();
        for level in 1..=m {
            let row = op.row(level);
            let scale = row.iter().fold(0.0_f64, |a, k| a.max(k.abs()));
            prop_assert!(row.iter().sum::<f64>().abs() <= 1e-12 * scale);
            prop_assert!(row[level] > 0.0);
        }
    }

    #[test]
    fn l1_rows_have_mmatrix_signs(alpha in 0.05..0.95f64, r in 1.0..8.0f64, m in 2usize..160) {
        let mesh = TemporalMesh::graded(1.0, m, r).unwrap();
        prop_assert!(DiscreteCaputo::new(SchemeKind::L1, &mesh, alpha).unwrap().mmatrix_check().passed());
    }

    #[test]
    fn l1_rows_match_telescoped_formula(alpha in 0.1..0.9f64, r in 1.0..2.0f64, m in 1usize..64) {
        let mesh = TemporalMesh::graded(1.0, m, r).unwrap();
        let op = DiscreteCaputo::new(SchemeKind::L1, &mesh, alpha).unwrap();
        for level in 1..=m {
            for (a, b) in op.row(level).iter().zip(l1_row_direct(&mesh, alpha, level)) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn exactness_on_low_degree_polynomials(alpha in 0.05..0.95f64, r in 1.0..4.0f64, m in 1usize..64, c1 in -3.0..3.0f64, c2 in -3.0..3.0f64) {
        let mesh = TemporalMesh::graded(2.0, m, r).unwrap();
        let cases = [
            (SchemeKind::L1, MonomialSum::new(vec![(c1, 1.0)]).unwrap()),
            (SchemeKind::Alikhanov, MonomialSum::new(vec![(c1, 1.0), (c2, 2.0)]).unwrap()),
        ];
        for (scheme, u) in cases {
            let op = DiscreteCaputo::new(scheme, &mesh, alpha).unwrap();
            let history: Vec<f64> = mesh.nodes().iter().map(|&t| 1.5 + u.value(t)).collect();
            for level in 1..=m {
                let exact = u.caputo(alpha, op.eval_point(level)).unwrap();
                let discrete = op.apply(level, &history[..=level]).unwrap();
                // The constant offset cancels inside the row, so the attainable
                // accuracy is set by the magnitude of the individual products.
                let scale: f64 = op.row(level).iter().zip(&history).map(|(k, u)| (k * u).abs()).sum();
                prop_assert!((discrete - exact).abs() <= 1e-13 * scale + 1e-10 * exact.abs());
            }
        }
    }

    #[test]
    fn graded_step_ratios_decrease_from_above_one(r in 1.0..8.0f64, m in 2usize..2048) {
        let mesh = TemporalMesh::graded(1.0, m, r).unwrap();
        let rho = mesh.step_ratios();
        for w in rho.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        prop_assert!(rho.iter().all(|&x| x >= 1.0 - 1e-12));
    }

    #[test]
    fn rates_are_scale_invariant(
        errors in prop::collection::vec(1e-12..1.0f64, 2..8),
        scale in 1e-6..1e6f64,
    ) {
        let points: Vec<(usize, f64)> = errors.iter().enumerate().map(|(k, &e)| (16 << k, e)).collect();
        let scaled: Vec<(usize, f64)> = points.iter().map(|&(m, e)| (m, e * scale)).collect();
        for (a, b) in compute_rates(&points).unwrap().iter().zip(compute_rates(&scaled).unwrap()) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn halving_error_per_doubling_gives_unit_rate(e in 1e-10..1.0f64, m in 1usize..1000) {
        let q = compute_rates(&[(m, e), (2 * m, e / 2.0)]).unwrap()[0];
        prop_assert!((q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip(
        rows in prop::collection::vec(
            (0.01..0.99f64, 1.0..9.0f64, 1usize..100_000, 0.0..1.0f64, prop::option::of(-5.0..5.0f64),
             prop::option::of(1usize..512), prop::option::of(-1.0..1.0f64)),
            1..12,
        )
    ) {
        let mut report = ErrorReport::new("t", "error", RateBase::M);
        let any_n = rows.iter().any(|r| r.5.is_some());
        let any_gamma = rows.iter().any(|r| r.6.is_some());
        for (alpha, r, m, value, rate, n, gamma) in rows {
            report.rows.push(ReportRow {
                alpha, r, m, value, rate,
                n: if any_n { Some(n.unwrap_or(1)) } else { None },
                gamma: if any_gamma { Some(gamma.unwrap_or(0.0)) } else { None },
            });
        }
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        prop_assert_eq!(parse_csv(buf.as_slice()).unwrap(), report.rows);
    }

    #[test]
    fn stability_envelope_positive(alpha in 0.05..0.95f64, gamma_ in -1.5..0.95f64, r in 1.0..4.0f64, m in 2usize..256) {
        let mesh = TemporalMesh::graded(1.0, m, r).unwrap();
        let env = stability_envelope(&mesh, alpha, gamma_).unwrap();
        prop_assert_eq!(env.values[0], 0.0);
        prop_assert!(env.values[1..].iter().all(|&v| v > 0.0 && v.is_finite()));
    }

    #[test]
    fn barrier_bound_positive_in_lemma_range(alpha in 0.2..0.8f64, frac in 0.0..1.0f64, k in 5u32..10, scheme in scheme()) {
        let top = match scheme {
            SchemeKind::L1 => (2.0 - alpha) / alpha,
            SchemeKind::Alikhanov => (3.0 - alpha) / alpha,
        };
        let r = 1.0 + frac * (top - 1.0);
        let mesh = TemporalMesh::graded(1.0, 1 << k, r).unwrap();
        let best = [4, 8, 16]
            .into_iter()
            .map(|p| verify_barrier_bound(&mesh, alpha, p, scheme).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(best > 0.0, "r = {}, ratio = {}", r, best);
    }

    #[test]
    fn l1_solution_nonnegative_for_nonnegative_data(alpha in 0.1..0.9f64, r in 1.0..3.0f64, m in 1usize..128, u0 in 0.0..2.0f64) {
        // M-matrix structure: f >= 0 and u0 >= 0 give U >= 0.
        let problem = IvpProblem::new(alpha, u0, |t| t.sin().abs()).unwrap();
        let mesh = TemporalMesh::graded(1.0, m, r).unwrap();
        for scheme in [SchemeKind::L1, SchemeKind::Alikhanov] {
            let sol = solve_ivp(scheme, &mesh, &problem).unwrap();
            prop_assert!(sol.values.iter().all(|&v| v >= -1e-14));
        }
    }
}
