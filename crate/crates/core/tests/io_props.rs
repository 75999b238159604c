use proptest::prelude::*;
use tcopt::io::{read_residuals, read_summary, read_trajectory, write_residuals, write_summary, write_trajectory, RunSummary};
use tcopt::nalgebra::DMatrix;
use tcopt::scenarios::{build_application, cyclicity_gap, AppId, ScenarioOverrides};
use tcopt::solver::{solve, IterationReport, SolverConfig, Trajectory};

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn report() -> impl Strategy<Value = IterationReport> {
    (0usize..10_000, finite(), finite(), finite(), finite(), finite()).prop_map(|(i, a, b, c, d, e)| {
        IterationReport {
            iteration: i,
            proj_residual_v: a,
            proj_residual_w: b,
            task_residual: c,
            cost: d,
            wall_ms: e,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_csv_round_trip_is_bitwise(
        (n, m, values) in (1usize..12, 1usize..8)
            .prop_flat_map(|(n, m)| (Just(n), Just(m), prop::collection::vec(finite(), n * m)))
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        let traj = Trajectory { q: DMatrix::from_row_slice(n, m, &values), dt: 0.1 };
        write_trajectory(&path, &traj).unwrap();
        let back = read_trajectory(&path, 0.1).unwrap();
        prop_assert_eq!(back.q.shape(), (n, m));
        for (a, b) in traj.q.iter().zip(back.q.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn residual_csv_round_trip_is_bitwise(reports in prop::collection::vec(report(), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("residuals.csv");
        write_residuals(&path, &reports).unwrap();
        let back = read_residuals(&path).unwrap();
        prop_assert_eq!(back.len(), reports.len());
        for (a, b) in reports.iter().zip(&back) {
            prop_assert_eq!(a.iteration, b.iteration);
            prop_assert!(a.same_numbers(b, 0.0));
            prop_assert_eq!(a.wall_ms.to_bits(), b.wall_ms.to_bits());
        }
    }
}

#[test]
fn summary_matches_last_residual_row() {
    let o = ScenarioOverrides {
        n: Some(20),
        ..Default::default()
    };
    let scenario = build_application(AppId::App1, &o).unwrap();
    let problem = scenario.problem().unwrap();
    let cfg = scenario.solver_config(&SolverConfig::default());
    let out = solve(&problem, &cfg).unwrap();
    let summary = RunSummary::from_outcome("app1", &cfg, &out, Some(cyclicity_gap(&out.trajectory)));

    let dir = tempfile::tempdir().unwrap();
    write_residuals(&dir.path().join("residuals.csv"), &out.reports).unwrap();
    write_summary(&dir.path().join("summary.json"), &summary).unwrap();
    let rows = read_residuals(&dir.path().join("residuals.csv")).unwrap();
    let back = read_summary(&dir.path().join("summary.json")).unwrap();
    let last = rows.last().unwrap();

    assert_eq!(back.iterations, rows.len());
    assert_eq!(back.task_residual.to_bits(), last.task_residual.to_bits());
    assert_eq!(back.proj_residual_v.to_bits(), last.proj_residual_v.to_bits());
    assert_eq!(back.proj_residual_w.to_bits(), last.proj_residual_w.to_bits());
    assert_eq!(back.cost.to_bits(), last.cost.to_bits());
    assert_eq!(back.converged, out.converged);
    if back.converged {
        assert!(back.task_residual < cfg.task_tol);
        assert!(back.proj_residual_v < cfg.proj_tol && back.proj_residual_w < cfg.proj_tol);
    }
}
