//! Integrates the height transport ODE on the unit 2-sphere with Pi = g and
//! compares the result with the closed form h = 1 - cos(d): the height of a
//! sphere over its tangent plane at the seed, d the geodesic distance.

use isoimm::grid::ChartGrid;
use isoimm::height::{guaranteed_radius, integrate_height, IntegrateOptions, PiSource};
use isoimm::presets::{generate, GridSpec, MetricKind, MetricSpec, SphereChart};

fn main() {
    let grid = ChartGrid::new(vec![0.4, 0.4], vec![0.01, 0.01], vec![61, 61]).unwrap();
    let metric = generate(&MetricSpec {
        kind: MetricKind::Sphere {
            dim: 2,
            radius: 1.0,
            chart: SphereChart::PolarCap,
        },
        grid: GridSpec::from(grid),
    })
    .unwrap();

    let g = metric.analytic.as_ref().unwrap().g.clone();
    let pi = move |x: &[f64]| g(x); // umbilic: Pi = g on the unit sphere
    let seed = [30usize, 30];
    let hf = integrate_height(
        &PiSource::Analytic(&pi),
        &metric,
        &seed,
        0.0,
        &[0.0, 0.0],
        &IntegrateOptions::default(),
    )
    .unwrap();

    // geodesic distance from the seed on the polar-cap chart: both points
    // lie on the sphere, so use the chord angle of their ambient images
    let x0 = metric.grid.point(&seed);
    let mut worst = 0.0f64;
    for flat in 0..metric.grid.len() {
        if !hf.valid()[flat] {
            continue;
        }
        let x = metric.grid.point_of_flat(flat);
        let d = sphere_distance(&x0, &x);
        worst = worst.max((hf.h.data[flat] - (1.0 - d.cos())).abs());
    }
    let covered = hf.valid().iter().filter(|v| **v).count();
    println!("max |h - (1 - cos d)|: {worst:.3e}");
    println!("valid points:          {covered} / {}", metric.grid.len());

    let pi_field = isoimm::field::TensorField::sym2_from_fn(metric.grid.clone(), |x| {
        metric.analytic.as_ref().unwrap().g.as_ref()(x)
    });
    println!(
        "guaranteed radius:     {:.4} (pi/2 = {:.4})",
        guaranteed_radius(&pi_field, &metric).unwrap(),
        std::f64::consts::FRAC_PI_2
    );
}

// great-circle angle; chart coordinates are (colatitude, azimuth)
fn sphere_distance(p: &[f64], q: &[f64]) -> f64 {
    let a = [p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin(), p[0].cos()];
    let b = [q[0].sin() * q[1].cos(), q[0].sin() * q[1].sin(), q[0].cos()];
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}
