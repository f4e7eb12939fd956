//! Runs the full obstruction analysis on a round 3-sphere chart and prints
//! the report. The verdict should be Immersible with Pi = (1/r) g.

use isoimm::diff::DiffScheme;
use isoimm::grid::ChartGrid;
use isoimm::obstruction::{analyze, Tolerances};
use isoimm::presets::{generate, GridSpec, MetricKind, MetricSpec, SphereChart};

fn main() {
    let radius = 2.0;
    let grid = ChartGrid::new(vec![1.4, 0.4, 0.4], vec![0.006; 3], vec![17; 3]).unwrap();
    let metric = generate(&MetricSpec {
        kind: MetricKind::Sphere {
            dim: 3,
            radius,
            chart: SphereChart::PolarCap,
        },
        grid: GridSpec::from(grid),
    })
    .unwrap();

    let report = analyze(&metric, &Tolerances::default(), DiffScheme::Central2).unwrap();
    println!("verdict:           {}", report.verdict);
    println!("weyl* norm:        {:.3e}", report.weyl_star_norm);
    println!("gauss residual:    {:.3e}", report.gauss_residual);
    println!("codazzi residual:  {:.3e}", report.codazzi_residual);

    // Pi should be g / radius everywhere it was recovered
    let pi = report.pi.unwrap();
    let mut worst = 0.0f64;
    for flat in 0..metric.grid.len() {
        if !pi.valid[flat] {
            continue;
        }
        let g = metric.value(flat);
        for (a, p) in pi.at(flat).iter().enumerate() {
            worst = worst.max((p - g[(a / 3, a % 3)] / radius).abs());
        }
    }
    println!("max |Pi - g/r|:    {worst:.3e}");
}
