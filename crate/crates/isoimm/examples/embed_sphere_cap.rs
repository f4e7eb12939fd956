//! Embeds a polar cap of the unit 2-sphere into R^3 and writes an OBJ mesh.
//! The assembled immersion is checked against a best-fit sphere.

use isoimm::grid::ChartGrid;
use isoimm::io::write_embedding_obj;
use isoimm::obstruction::Tolerances;
use isoimm::pipeline::{embed, EmbedOptions};
use isoimm::presets::{generate, GridSpec, MetricKind, MetricSpec, SphereChart};

fn main() {
    let grid = ChartGrid::new(vec![0.5, 0.5], vec![0.02, 0.02], vec![33, 33]).unwrap();
    let metric = generate(&MetricSpec {
        kind: MetricKind::Sphere {
            dim: 2,
            radius: 1.0,
            chart: SphereChart::PolarCap,
        },
        grid: GridSpec::from(grid),
    })
    .unwrap();

    let e = embed(&metric, &Tolerances::default(), &EmbedOptions::default()).unwrap();
    println!("verdict:              {}", e.report.verdict);
    println!("induced residual:     {:.3e}", e.immersion.induced_residual);
    println!("second-form residual: {:.3e}", e.immersion.second_form_residual);

    // every valid image point should sit at unit distance from a common center
    let valid: Vec<usize> = (0..metric.grid.len())
        .filter(|&f| e.immersion.valid[f])
        .collect();
    let c = fit_center(&e.immersion, &valid);
    let mut worst = 0.0f64;
    for &f in &valid {
        let p = e.immersion.point(f);
        let r = (0..3).map(|u| (p[u] - c[u]).powi(2)).sum::<f64>().sqrt();
        worst = worst.max((r - 1.0).abs());
    }
    println!("max | |I - c| - 1 |:  {worst:.3e}");

    let out = std::env::temp_dir().join("sphere_cap.obj");
    write_embedding_obj(&e.immersion, &out).unwrap();
    println!("mesh written to {}", out.display());
}

// least-squares sphere: |I|^2 = 2 c.I + (r^2 - |c|^2) is linear in (c, const)
fn fit_center(imm: &isoimm::flatten::ImmersionGrid, valid: &[usize]) -> [f64; 3] {
    let mut a = nalgebra::DMatrix::zeros(valid.len(), 4);
    let mut b = nalgebra::DVector::zeros(valid.len());
    for (row, &f) in valid.iter().enumerate() {
        let p = imm.point(f);
        for u in 0..3 {
            a[(row, u)] = 2.0 * p[u];
        }
        a[(row, 3)] = 1.0;
        b[row] = p.iter().map(|v| v * v).sum();
    }
    let sol = a.svd(true, true).solve(&b, 1e-12).unwrap();
    [sol[0], sol[1], sol[2]]
}
