//! End-to-end acceptance checks against analytically known geometries.
//! Each test prints one `criterion N: PASS/FAIL` line.

use std::panic::AssertUnwindSafe;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use isoimm::cross_section::cross_section_check;
use isoimm::curvature::riemann;
use isoimm::diff::DiffScheme;
use isoimm::error::Error;
use isoimm::field::{MetricField, TensorField};
use isoimm::general_k::{verify_k_tuple, KTupleCandidate};
use isoimm::grid::ChartGrid;
use isoimm::height::{integrate_height, path_independence_residual, IntegrateOptions, PiSource};
use isoimm::obstruction::{
    analyze, gauss_residual, recover_pi, recover_pi_at, ObstructionReport, Tolerances, Verdict,
};
use isoimm::operator::{pi_wedge_pi, random_weyl_tensor};
use isoimm::pipeline::{embed, EmbedOptions};
use isoimm::presets::{generate, GridSpec, MetricKind, MetricSpec, SphereChart};

fn criterion(n: usize, desc: &str, f: impl FnOnce()) {
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(f));
    match &outcome {
        Ok(()) => println!("criterion {n}: PASS - {desc}"),
        Err(_) => println!("criterion {n}: FAIL - {desc}"),
    }
    if outcome.is_err() {
        panic!("criterion {n} failed");
    }
}

fn sphere_spec(dim: usize, radius: f64, grid: ChartGrid) -> MetricSpec {
    MetricSpec {
        kind: MetricKind::Sphere {
            dim,
            radius,
            chart: SphereChart::PolarCap,
        },
        grid: GridSpec::from(grid),
    }
}

/// Least-squares sphere through the valid image points:
/// |I|^2 = 2 c . I + (r^2 - |c|^2) is linear in (c, const).
fn fit_sphere(imm: &isoimm::flatten::ImmersionGrid) -> ([f64; 3], f64) {
    let valid: Vec<usize> = (0..imm.valid.len()).filter(|&f| imm.valid[f]).collect();
    let mut a = DMatrix::zeros(valid.len(), 4);
    let mut b = DVector::zeros(valid.len());
    for (row, &f) in valid.iter().enumerate() {
        let p = imm.point(f);
        for u in 0..3 {
            a[(row, u)] = 2.0 * p[u];
        }
        a[(row, 3)] = 1.0;
        b[row] = p.iter().map(|v| v * v).sum();
    }
    let sol = a.svd(true, true).solve(&b, 1e-12).unwrap();
    let c = [sol[0], sol[1], sol[2]];
    let r = (sol[3] + c.iter().map(|v| v * v).sum::<f64>()).sqrt();
    (c, r)
}

#[test]
fn criterion_01_sphere_pipeline_n2() {
    criterion(1, "n = 2 sphere analyze + embed", || {
        let t0 = Instant::now();
        let grid = ChartGrid::new(vec![0.3, 0.0], vec![0.02, 0.02], vec![65, 65]).unwrap();
        let metric = generate(&sphere_spec(2, 1.0, grid)).unwrap();

        let report = analyze(&metric, &Tolerances::default(), DiffScheme::Central2).unwrap();
        assert_eq!(report.verdict, Verdict::SurfaceCase);
        let pi = report.pi.as_ref().unwrap();
        let mut worst = 0.0f64;
        for flat in 0..metric.grid.len() {
            if !pi.valid[flat] {
                continue;
            }
            let g = metric.value(flat);
            let gn = g.norm();
            for (c, p) in pi.at(flat).iter().enumerate() {
                worst = worst.max((p - g[(c / 2, c % 2)]).abs() / gn);
            }
        }
        assert!(worst < 1e-6, "Pi deviates from g by {worst:.3e}");

        let e = embed(&metric, &Tolerances::default(), &EmbedOptions::default()).unwrap();
        assert!(
            e.immersion.induced_residual < 1e-3,
            "induced residual {:.3e}",
            e.immersion.induced_residual
        );
        let (c, r) = fit_sphere(&e.immersion);
        assert!((r - 1.0).abs() < 1e-3, "fitted radius {r}");
        let mut dev = 0.0f64;
        for flat in 0..metric.grid.len() {
            if !e.immersion.valid[flat] {
                continue;
            }
            let p = e.immersion.point(flat);
            let d = (0..3).map(|u| (p[u] - c[u]).powi(2)).sum::<f64>().sqrt();
            dev = dev.max((d - 1.0).abs());
        }
        assert!(dev < 1e-3, "sphere deviation {dev:.3e}");
        assert!(t0.elapsed().as_secs_f64() < 10.0, "took {:?}", t0.elapsed());
    });
}

/// Criterion-2 fixture: purely sampled (no analytic jets) polar-cap chart of
/// the radius-r 3-sphere on a small angular box; returns the analysis report
/// and the Gauss residual of the recovered Pi against the exact curvature.
fn sphere3_sampled(radius: f64, shape: usize) -> (MetricField, ObstructionReport, f64) {
    let extent = 0.016;
    let spacing = extent / (shape - 1) as f64;
    let grid = ChartGrid::new(vec![0.8; 3], vec![spacing; 3], vec![shape; 3]).unwrap();
    let exact = generate(&sphere_spec(3, radius, grid)).unwrap();
    let sampled = exact.without_analytic();
    let report = analyze(&sampled, &Tolerances::default(), DiffScheme::Central2).unwrap();
    let exact_bundle = riemann(&exact, DiffScheme::Central2).unwrap();
    let gauss =
        gauss_residual(report.pi.as_ref().unwrap(), &exact_bundle.riemann).unwrap();
    (sampled, report, gauss)
}

#[test]
fn criterion_02_sphere_obstructions_n3() {
    criterion(2, "n = 3 spheres pass every obstruction", || {
        let t0 = Instant::now();
        for radius in [1.0, 2.0] {
            let (metric, report, gauss) = sphere3_sampled(radius, 33);
            assert_eq!(report.verdict, Verdict::Immersible, "r = {radius}");
            assert!(report.weyl_star_norm < 1e-6, "weyl* {:.3e}", report.weyl_star_norm);
            assert!(gauss < 1e-6, "gauss {gauss:.3e}");
            assert!(
                report.codazzi_residual < 1e-5,
                "codazzi {:.3e}",
                report.codazzi_residual
            );
            let pi = report.pi.as_ref().unwrap();
            let mut worst = 0.0f64;
            for flat in 0..metric.grid.len() {
                if !pi.valid[flat] {
                    continue;
                }
                let g = metric.value(flat);
                let gn = g.norm() / radius;
                for (c, p) in pi.at(flat).iter().enumerate() {
                    worst = worst.max((p - g[(c / 3, c % 3)] / radius).abs() / gn);
                }
            }
            assert!(worst < 1e-5, "Pi deviates from g/r by {worst:.3e}");
        }
        assert!(t0.elapsed().as_secs_f64() < 30.0, "took {:?}", t0.elapsed());
    });
}

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let q = a.qr().q();
    let lam = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.gen_range(lo..hi)));
    let m = &q * lam * q.transpose();
    (0..n)
        .map(|i| (0..n).map(|j| (m[(i, j)] + m[(j, i)]) / 2.0).collect())
        .collect()
}

#[test]
fn criterion_03_quadratic_graph_recovery() {
    criterion(3, "random Pi0 recovered at the origin", || {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..10 {
            let pi0 = random_symmetric(3, &mut rng, 0.5, 3.0);
            let grid = ChartGrid::new(vec![-0.02; 3], vec![0.01; 3], vec![5; 3]).unwrap();
            let metric = generate(&MetricSpec {
                kind: MetricKind::QuadraticGraph { dim: 3, pi0: pi0.clone() },
                grid: GridSpec::from(grid),
            })
            .unwrap();
            let bundle = riemann(&metric, DiffScheme::Central2).unwrap();
            let origin = metric.grid.flat(&[2, 2, 2]);
            let rec = recover_pi_at(
                bundle.riemann.at(origin),
                &metric.value(origin),
                &Tolerances::default(),
            )
            .unwrap();
            let expect = DMatrix::from_fn(3, 3, |i, j| pi0[i][j]);
            let rel = (&rec.pi - &expect).norm() / expect.norm();
            assert!(rel < 1e-6, "trial {trial}: relative error {rel:.3e}");
        }
    });
}

#[test]
fn criterion_04_weyl_vanishing_implies_codazzi() {
    criterion(4, "n = 4 graphs: Weyl* = 0 forces Codazzi", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2 {
            let pi0 = random_symmetric(4, &mut rng, 0.5, 3.0);
            let grid = ChartGrid::new(vec![-0.016; 4], vec![0.004; 4], vec![9; 4]).unwrap();
            let metric = generate(&MetricSpec {
                kind: MetricKind::QuadraticGraph { dim: 4, pi0 },
                grid: GridSpec::from(grid),
            })
            .unwrap();
            let report = analyze(&metric, &Tolerances::default(), DiffScheme::Central2).unwrap();
            assert!(
                report.weyl_star_norm < 1e-6,
                "weyl* {:.3e}",
                report.weyl_star_norm
            );
            assert!(
                report.codazzi_residual < 1e-4,
                "codazzi {:.3e}",
                report.codazzi_residual
            );
        }
    });
}

#[test]
fn criterion_05_negative_curvature_rejection() {
    criterion(5, "hyperbolic rejected (exit 2), flat polar is FlatCase", || {
        let dir = tempfile::tempdir().unwrap();
        let hyp = dir.path().join("hyperbolic3.toml");
        isoimm::io::write_toml(
            &MetricSpec {
                kind: MetricKind::Hyperbolic { dim: 3, radius: 1.0 },
                grid: GridSpec {
                    origin: vec![0.7, 0.2, 0.2],
                    spacing: vec![0.02; 3],
                    shape: vec![9; 3],
                },
            },
            &hyp,
        )
        .unwrap();
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_isoimm"))
            .args(["analyze", "--metric"])
            .arg(&hyp)
            .output()
            .unwrap();
        assert_eq!(status.status.code(), Some(2), "hyperbolic exit code");

        let flat = MetricSpec {
            kind: MetricKind::FlatPolar,
            grid: GridSpec {
                origin: vec![1.0, 0.1],
                spacing: vec![0.01, 0.01],
                shape: vec![33, 33],
            },
        };
        let metric = generate(&flat).unwrap();
        let report = analyze(&metric, &Tolerances::default(), DiffScheme::Central2).unwrap();
        assert_eq!(report.verdict, Verdict::FlatCase);
        let pi = report.pi.unwrap();
        assert!(pi.data.iter().all(|v| *v == 0.0), "FlatCase Pi must be zero");

        let flat_path = dir.path().join("flat_polar.toml");
        isoimm::io::write_toml(&flat, &flat_path).unwrap();
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_isoimm"))
            .args(["analyze", "--metric"])
            .arg(&flat_path)
            .output()
            .unwrap();
        assert_eq!(status.status.code(), Some(0), "flat polar exit code");
    });
}

// great-circle angle between polar-cap chart points (colatitude, azimuth)
fn sphere_distance(p: &[f64], q: &[f64]) -> f64 {
    let a = [p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin(), p[0].cos()];
    let b = [q[0].sin() * q[1].cos(), q[0].sin() * q[1].sin(), q[0].cos()];
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

#[test]
fn criterion_06_height_ode_fidelity() {
    criterion(6, "S^2 height gradient matches sin(d), clamp at pi/2", || {
        let grid = ChartGrid::new(vec![0.2, 0.0], vec![0.045, 0.045], vec![61, 61]).unwrap();
        let metric = generate(&sphere_spec(2, 1.0, grid)).unwrap();
        let g = metric.analytic.as_ref().unwrap().g.clone();
        let pi = move |x: &[f64]| g(x);
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

        let x0 = metric.grid.point(&seed);
        let mut sup = 0.0f64;
        for flat in 0..metric.grid.len() {
            let x = metric.grid.point_of_flat(flat);
            let d = sphere_distance(&x0, &x);
            let gm = metric.value(flat);
            // upper bound on the geodesic diameter of one grid cell
            let cell = gm[(0, 0)].sqrt() * 0.045 + gm[(1, 1)].sqrt() * 0.045;
            if hf.valid()[flat] {
                sup = sup.max((hf.grad_norm_sq.data[flat].sqrt() - d.sin()).abs());
                assert!(
                    d <= std::f64::consts::FRAC_PI_2 + 2.0 * cell,
                    "valid point at distance {d}"
                );
            } else {
                assert!(
                    d >= std::f64::consts::FRAC_PI_2 - 2.0 * cell,
                    "invalid point at distance {d}"
                );
            }
        }
        assert!(sup < 1e-4, "sup ||grad h| - sin d| = {sup:.3e}");
    });
}

#[test]
fn criterion_07_path_independence() {
    criterion(7, "Codazzi Pi is path independent, non-Codazzi is not", || {
        let grid = ChartGrid::new(vec![0.5, 0.0], vec![0.02, 0.02], vec![33, 33]).unwrap();
        let metric = generate(&sphere_spec(2, 1.0, grid)).unwrap();
        let g = metric.analytic.as_ref().unwrap().g.clone();
        let pi = move |x: &[f64]| g(x);
        let res = path_independence_residual(
            &PiSource::Analytic(&pi),
            &metric,
            &[16, 16],
            0.0,
            &[0.0, 0.0],
            &IntegrateOptions::default(),
        )
        .unwrap();
        assert!(res < 1e-6, "sphere residual {res:.3e}");

        let grid = ChartGrid::new(vec![0.0, 0.0], vec![0.05, 0.05], vec![21, 21]).unwrap();
        let metric = generate(&MetricSpec {
            kind: MetricKind::FlatCartesian { dim: 2 },
            grid: GridSpec::from(grid),
        })
        .unwrap();
        let bad = |x: &[f64]| DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0 + x[0]]));
        let res = path_independence_residual(
            &PiSource::Analytic(&bad),
            &metric,
            &[10, 10],
            0.0,
            &[0.0, 0.0],
            &IntegrateOptions::default(),
        )
        .unwrap();
        assert!(res > 1e-2, "non-Codazzi residual only {res:.3e}");
    });
}

#[test]
fn criterion_08_weyl_obstruction_detection() {
    criterion(8, "Weyl-perturbed curvature is rejected, clean recovers", || {
        let n = 4;
        let g = DMatrix::identity(n, n);
        let pi0 = DMatrix::from_row_slice(
            n,
            n,
            &[
                1.3, 0.2, 0.0, 0.1, //
                0.2, 1.0, 0.1, 0.0, //
                0.0, 0.1, 1.7, 0.0, //
                0.1, 0.0, 0.0, 0.8,
            ],
        );
        let clean = pi_wedge_pi(&pi0);
        let mut w = random_weyl_tensor(n, 11);
        let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        w.iter_mut().for_each(|v| *v /= wn);

        let rec = recover_pi(&clean, &g, &Tolerances::default()).unwrap();
        assert!((&rec.pi - &pi0).norm() < 1e-8);

        let perturbed: Vec<f64> = clean.iter().zip(&w).map(|(c, wv)| c + 0.1 * wv).collect();
        match recover_pi(&perturbed, &g, &Tolerances::default()) {
            Err(Error::WeylObstruction { .. }) => {}
            other => panic!("expected WeylObstruction, got {other:?}"),
        }
    });
}

#[test]
fn criterion_09_general_k_verifier() {
    criterion(9, "Clifford k = 2 verifies, zero fields measure ||R||", || {
        // Clifford-torus patch: g = delta/2, h1 = cos(x)/sqrt(2), h2 = cos(y)/sqrt(2)
        let grid = ChartGrid::new(vec![-1.2, -1.2], vec![0.1, 0.1], vec![25, 25]).unwrap();
        let vals = TensorField::sym2_from_fn(grid.clone(), |_| {
            DMatrix::from_diagonal_element(2, 2, 0.5)
        });
        let metric = MetricField::new(vals).unwrap();
        let h1 = TensorField::scalar_from_fn(grid.clone(), |x| x[0].cos() / 2f64.sqrt());
        let h2 = TensorField::scalar_from_fn(grid.clone(), |x| x[1].cos() / 2f64.sqrt());
        let cand = KTupleCandidate::new(vec![h1, h2]).unwrap();
        let report = verify_k_tuple(&metric, &cand, DiffScheme::Central2).unwrap();
        assert!(report.residual < 1e-8, "residual {:.3e}", report.residual);
        assert!(report.f_positive_definite, "f must stay positive-definite");

        // zero fields on the unit 2-sphere: the defect is exactly ||R||
        let grid = ChartGrid::new(vec![0.5, 0.0], vec![0.02, 0.02], vec![17, 17]).unwrap();
        let metric = generate(&sphere_spec(2, 1.0, grid)).unwrap();
        let zero = TensorField::scalar_from_fn(metric.grid.clone(), |_| 0.0);
        let cand = KTupleCandidate::new(vec![zero]).unwrap();
        let report = verify_k_tuple(&metric, &cand, DiffScheme::Central2).unwrap();
        let bundle = riemann(&metric, DiffScheme::Central2).unwrap();
        let mut r2 = 0.0;
        for flat in 0..metric.grid.len() {
            let idx = metric.grid.unflat(flat);
            if !metric.grid.is_interior(&idx, 2) || !bundle.riemann.valid[flat] {
                continue;
            }
            r2 += bundle.riemann.at(flat).iter().map(|v| v * v).sum::<f64>();
        }
        let expected = r2.sqrt();
        assert!(
            (report.absolute_residual - expected).abs() < 1e-12,
            "absolute residual {:.15e} vs ||R|| {expected:.15e}",
            report.absolute_residual
        );
        assert!((report.residual - 1.0).abs() < 1e-12);
    });
}

#[test]
fn criterion_10_cross_section_scaling() {
    criterion(10, "S^3 level sets obey the curvature scaling law", || {
        let grid = ChartGrid::new(vec![0.7, 0.2, 0.2], vec![0.02; 3], vec![21; 3]).unwrap();
        let metric = generate(&sphere_spec(3, 1.0, grid)).unwrap();
        let bundle = riemann(&metric, DiffScheme::Central2).unwrap();
        let g = metric.analytic.as_ref().unwrap().g.clone();
        let pi = move |x: &[f64]| g(x);
        let hf = integrate_height(
            &PiSource::Analytic(&pi),
            &metric,
            &[10, 10, 10],
            0.0,
            &[0.0, 0.0, 0.0],
            &IntegrateOptions::default(),
        )
        .unwrap();
        let mut levels = 0;
        for d in [0.12f64, 0.16, 0.2] {
            let r = cross_section_check(&metric, &bundle, &hf, 1.0 - d.cos()).unwrap();
            assert!(r.residual < 1e-3, "residual {:.3e} at d = {d}", r.residual);
            assert!(r.min_factor >= 1.0, "factor {} at d = {d}", r.min_factor);
            levels += 1;
        }
        assert!(levels >= 3);
    });
}

#[test]
fn criterion_11_convergence_order() {
    criterion(11, "halving the spacing divides the Gauss residual by ~4", || {
        let (_, _, coarse) = sphere3_sampled(1.0, 33);
        let (_, _, fine) = sphere3_sampled(1.0, 65);
        let ratio = coarse / fine;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "coarse {coarse:.3e} / fine {fine:.3e} = {ratio:.2}"
        );
    });
}
