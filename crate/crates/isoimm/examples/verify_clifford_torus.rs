//! Verifies a k = 2 candidate solution on a flat patch: the Clifford torus
//! in R^4 over the chart metric g = (1/2) delta, with height fields
//! h1 = cos(x)/sqrt(2), h2 = cos(y)/sqrt(2). The curvature identity residual
//! should vanish and f = g - sum dh (x) dh stays positive-definite inside
//! |x|, |y| < pi/2.

use isoimm::diff::DiffScheme;
use isoimm::field::TensorField;
use isoimm::general_k::{verify_k_tuple, KTupleCandidate};
use isoimm::grid::ChartGrid;
use isoimm::presets::{generate, GridSpec, MetricKind, MetricSpec};

fn main() {
    let grid = ChartGrid::new(vec![-1.2, -1.2], vec![0.1, 0.1], vec![25, 25]).unwrap();
    let mut metric = generate(&MetricSpec {
        kind: MetricKind::FlatCartesian { dim: 2 },
        grid: GridSpec::from(grid.clone()),
    })
    .unwrap();
    metric = scale_half(metric);

    let h1 = TensorField::scalar_from_fn(grid.clone(), |x| x[0].cos() / 2f64.sqrt());
    let h2 = TensorField::scalar_from_fn(grid, |x| x[1].cos() / 2f64.sqrt());
    let candidate = KTupleCandidate::new(vec![h1, h2]).unwrap();

    let report = verify_k_tuple(&metric, &candidate, DiffScheme::Central2).unwrap();
    println!("relative residual: {:.3e}", report.residual);
    println!("absolute residual: {:.3e}", report.absolute_residual);
    println!("min f eigenvalue:  {:.3e}", report.min_f_eigenvalue);
    println!("f positive:        {}", report.f_positive_definite);
    println!("points checked:    {}", report.points_checked);
}

fn scale_half(metric: isoimm::field::MetricField) -> isoimm::field::MetricField {
    let vals = TensorField::sym2_from_fn(metric.grid.clone(), |_| {
        nalgebra::DMatrix::from_diagonal_element(2, 2, 0.5)
    });
    isoimm::field::MetricField::new(vals).unwrap()
}
