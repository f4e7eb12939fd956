//! Recovers the second fundamental form of a 4-dimensional graph metric
//! g = delta + (Pi0 x) (x) (Pi0 x) at the origin and compares it to Pi0.

use isoimm::grid::ChartGrid;
use isoimm::obstruction::{recover_pi_at, Tolerances};
use isoimm::curvature::riemann;
use isoimm::diff::DiffScheme;
use isoimm::presets::{generate, GridSpec, MetricKind, MetricSpec};

fn main() {
    let pi0 = vec![
        vec![1.2, 0.3, 0.0, 0.1],
        vec![0.3, 0.9, 0.2, 0.0],
        vec![0.0, 0.2, 1.6, 0.0],
        vec![0.1, 0.0, 0.0, 0.7],
    ];
    let grid = ChartGrid::new(vec![-0.02; 4], vec![0.005; 4], vec![9; 4]).unwrap();
    let metric = generate(&MetricSpec {
        kind: MetricKind::QuadraticGraph { dim: 4, pi0: pi0.clone() },
        grid: GridSpec::from(grid),
    })
    .unwrap();

    let bundle = riemann(&metric, DiffScheme::Central2).unwrap();
    let origin = metric.grid.flat(&[4, 4, 4, 4]);
    let rec = recover_pi_at(
        bundle.riemann.at(origin),
        &metric.value(origin),
        &Tolerances::default(),
    )
    .unwrap();

    println!("weyl* at origin: {:.3e}", rec.weyl_rel);
    let mut worst = 0.0f64;
    for a in 0..4 {
        for b in 0..4 {
            worst = worst.max((rec.pi[(a, b)] - pi0[a][b]).abs());
        }
    }
    println!("max |Pi - Pi0|:  {worst:.3e}");
    println!("recovered Pi:\n{:.6}", rec.pi);
}
