//! Hyperbolic space cannot immerse in codimension one for n >= 3: the
//! curvature operator is negative, so ln(R) does not exist. The analysis
//! reports NotPositiveOperator and the embed pipeline refuses to run.

use isoimm::diff::DiffScheme;
use isoimm::grid::ChartGrid;
use isoimm::obstruction::{analyze, Tolerances, Verdict};
use isoimm::pipeline::{embed, error_exit_code, EmbedOptions};
use isoimm::presets::{generate, GridSpec, MetricKind, MetricSpec};

fn main() {
    let grid = ChartGrid::new(vec![0.7, 0.2, 0.2], vec![0.02; 3], vec![9; 3]).unwrap();
    let metric = generate(&MetricSpec {
        kind: MetricKind::Hyperbolic {
            dim: 3,
            radius: 1.0,
        },
        grid: GridSpec::from(grid),
    })
    .unwrap();

    let report = analyze(&metric, &Tolerances::default(), DiffScheme::Central2).unwrap();
    assert_eq!(report.verdict, Verdict::NotPositiveOperator);
    println!("verdict:          {}", report.verdict);
    println!("min operator eig: {:.3e}", report.min_operator_eigenvalue);

    let err = embed(&metric, &Tolerances::default(), &EmbedOptions::default()).unwrap_err();
    println!("embed error:      {err}");
    println!("exit code:        {}", error_exit_code(&err));
}
