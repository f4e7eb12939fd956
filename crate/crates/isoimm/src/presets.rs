use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{AnalyticMetric, MetricField};
use crate::grid::ChartGrid;

/// Grid description as it appears in metric spec files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
}

impl From<ChartGrid> for GridSpec {
    fn from(g: ChartGrid) -> Self {
        Self {
            origin: g.origin,
            spacing: g.spacing,
            shape: g.shape,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<ChartGrid> {
        ChartGrid::new(self.origin.clone(), self.spacing.clone(), self.shape.clone())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SphereChart {
    /// Hyperspherical angles; g = r^2 diag(1, sin^2 x0, sin^2 x0 sin^2 x1, ...).
    PolarCap,
    /// Graph chart over the tangent plane at the pole.
    GraphCap,
}

/// Kind-specific parameters of an analytic (or file-backed) metric fixture.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    Sphere {
        dim: usize,
        radius: f64,
        chart: SphereChart,
    },
    FlatCartesian {
        dim: usize,
    },
    FlatPolar,
    QuadraticGraph {
        dim: usize,
        pi0: Vec<Vec<f64>>,
    },
    Hyperbolic {
        dim: usize,
        radius: f64,
    },
    Samples {
        path: String,
    },
}

/// A metric fixture: what to build and on which grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricSpec {
    #[serde(flatten)]
    pub kind: MetricKind,
    pub grid: GridSpec,
}

/// Builds the metric field described by a spec. Analytic kinds carry exact
/// evaluators for g, dg and ddg; `Samples` loads values from file.
pub fn generate(spec: &MetricSpec) -> Result<MetricField> {
    let grid = spec.grid.build()?;
    match &spec.kind {
        MetricKind::FlatCartesian { dim } => {
            check_dim(*dim, &grid)?;
            let n = *dim;
            MetricField::from_analytic(
                grid,
                AnalyticMetric {
                    g: Arc::new(move |_x| DMatrix::identity(n, n)),
                    dg: Some(Arc::new(move |_x| vec![DMatrix::zeros(n, n); n])),
                    ddg: Some(Arc::new(move |_x| {
                        vec![vec![DMatrix::zeros(n, n); n]; n]
                    })),
                },
            )
        }
        MetricKind::FlatPolar => {
            check_dim(2, &grid)?;
            if grid.origin[0] <= 0.0 {
                return Err(Error::Spec("flat_polar chart requires rho > 0".into()));
            }
            MetricField::from_analytic(
                grid,
                AnalyticMetric {
                    g: Arc::new(|x| DMatrix::from_diagonal(&nalgebra::dvector![1.0, x[0] * x[0]])),
                    dg: Some(Arc::new(|x| {
                        let mut d0 = DMatrix::zeros(2, 2);
                        d0[(1, 1)] = 2.0 * x[0];
                        vec![d0, DMatrix::zeros(2, 2)]
                    })),
                    ddg: Some(Arc::new(|_x| {
                        let mut d00 = DMatrix::zeros(2, 2);
                        d00[(1, 1)] = 2.0;
                        let z = DMatrix::zeros(2, 2);
                        vec![vec![d00, z.clone()], vec![z.clone(), z]]
                    })),
                },
            )
        }
        MetricKind::Sphere { dim, radius, chart } => {
            check_dim(*dim, &grid)?;
            if !(*radius > 0.0) {
                return Err(Error::Spec("sphere radius must be positive".into()));
            }
            match chart {
                SphereChart::PolarCap => sphere_polar(grid, *dim, *radius),
                SphereChart::GraphCap => sphere_graph(grid, *dim, *radius),
            }
        }
        MetricKind::QuadraticGraph { dim, pi0 } => {
            check_dim(*dim, &grid)?;
            let n = *dim;
            if pi0.len() != n || pi0.iter().any(|r| r.len() != n) {
                return Err(Error::Spec("pi0 must be an n x n matrix".into()));
            }
            let p = DMatrix::from_fn(n, n, |i, j| pi0[i][j]);
            if (p.clone() - p.transpose()).norm() > 1e-12 * (1.0 + p.norm()) {
                return Err(Error::Spec("pi0 must be symmetric".into()));
            }
            quadratic_graph(grid, p)
        }
        MetricKind::Hyperbolic { dim, radius } => {
            check_dim(*dim, &grid)?;
            if !(*radius > 0.0) {
                return Err(Error::Spec("hyperbolic radius must be positive".into()));
            }
            let n = *dim;
            // upper half-space: g = (r / x_{n-1})^2 delta, curvature -1/r^2
            if grid.origin[n - 1] <= 0.0 {
                return Err(Error::Spec(
                    "hyperbolic chart requires last coordinate > 0".into(),
                ));
            }
            let r2 = radius * radius;
            MetricField::from_analytic(
                grid,
                AnalyticMetric {
                    g: Arc::new(move |x| {
                        let w = x[n - 1];
                        DMatrix::identity(n, n) * (r2 / (w * w))
                    }),
                    dg: Some(Arc::new(move |x| {
                        let w = x[n - 1];
                        let mut out = vec![DMatrix::zeros(n, n); n];
                        out[n - 1] = DMatrix::identity(n, n) * (-2.0 * r2 / (w * w * w));
                        out
                    })),
                    ddg: Some(Arc::new(move |x| {
                        let w = x[n - 1];
                        let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
                        out[n - 1][n - 1] = DMatrix::identity(n, n) * (6.0 * r2 / (w * w * w * w));
                        out
                    })),
                },
            )
        }
        MetricKind::Samples { path } => {
            let base = std::path::Path::new(path);
            crate::io::read_metric_samples(base, &grid)
        }
    }
}

fn check_dim(dim: usize, grid: &ChartGrid) -> Result<()> {
    if dim != grid.dim {
        return Err(Error::Spec(format!(
            "metric dimension {dim} does not match grid dimension {}",
            grid.dim
        )));
    }
    if dim < 1 {
        return Err(Error::Spec("dimension must be at least 1".into()));
    }
    Ok(())
}

fn sphere_polar(grid: ChartGrid, n: usize, radius: f64) -> Result<MetricField> {
    // angles must stay away from the coordinate singularities sin(x_j) = 0
    for a in 0..n.saturating_sub(1) {
        let lo = grid.origin[a];
        let hi = grid.origin[a] + grid.spacing[a] * (grid.shape[a] - 1) as f64;
        if lo <= 0.0 || hi >= std::f64::consts::PI {
            return Err(Error::Spec(format!(
                "polar_cap chart axis {a} must stay inside (0, pi)"
            )));
        }
    }
    let r2 = radius * radius;
    // g_ii = r^2 prod_{j<i} sin^2 x_j ; diagonal
    let gval = move |x: &[f64]| -> Vec<f64> {
        let mut out = vec![r2; x.len()];
        let mut acc = r2;
        for i in 0..x.len() {
            out[i] = acc;
            if i < x.len() {
                acc *= x[i].sin().powi(2);
            }
        }
        out
    };
    let g = {
        let gval = gval;
        Arc::new(move |x: &[f64]| {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gval(x)))
        })
    };
    let dg = {
        let g = g.clone();
        Arc::new(move |x: &[f64]| {
            let base = (g)(x);
            let mut out = vec![DMatrix::zeros(n, n); n];
            for c in 0..n {
                for i in 0..n {
                    if c < i {
                        out[c][(i, i)] = 2.0 * cot(x[c]) * base[(i, i)];
                    }
                }
            }
            out
        })
    };
    let ddg = {
        let g = g.clone();
        Arc::new(move |x: &[f64]| {
            let base = (g)(x);
            let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
            for d in 0..n {
                for c in 0..n {
                    for i in 0..n {
                        if c < i && d < i {
                            let v = if c == d {
                                (4.0 * cot(x[c]).powi(2) - 2.0 / x[c].sin().powi(2)) * base[(i, i)]
                            } else {
                                4.0 * cot(x[c]) * cot(x[d]) * base[(i, i)]
                            };
                            out[d][c][(i, i)] = v;
                        }
                    }
                }
            }
            out
        })
    };
    MetricField::from_analytic(
        grid,
        AnalyticMetric {
            g,
            dg: Some(dg),
            ddg: Some(ddg),
        },
    )
}

fn cot(x: f64) -> f64 {
    x.cos() / x.sin()
}

fn sphere_graph(grid: ChartGrid, n: usize, radius: f64) -> Result<MetricField> {
    let r2 = radius * radius;
    for flat in [0, grid.len() - 1] {
        let x = grid.point_of_flat(flat);
        let s: f64 = x.iter().map(|v| v * v).sum();
        if s >= r2 {
            return Err(Error::Spec(
                "graph_cap chart must stay strictly inside |x| < r".into(),
            ));
        }
    }
    // g_ab = delta_ab + x_a x_b / (r^2 - |x|^2)
    let g = Arc::new(move |x: &[f64]| {
        let s = r2 - x.iter().map(|v| v * v).sum::<f64>();
        DMatrix::from_fn(n, n, |a, b| {
            (if a == b { 1.0 } else { 0.0 }) + x[a] * x[b] / s
        })
    });
    let dg = Arc::new(move |x: &[f64]| {
        let s = r2 - x.iter().map(|v| v * v).sum::<f64>();
        let mut out = Vec::with_capacity(n);
        for c in 0..n {
            out.push(DMatrix::from_fn(n, n, |a, b| {
                let mut v = 0.0;
                if a == c {
                    v += x[b] / s;
                }
                if b == c {
                    v += x[a] / s;
                }
                v + 2.0 * x[a] * x[b] * x[c] / (s * s)
            }));
        }
        out
    });
    let ddg = Arc::new(move |x: &[f64]| {
        let s = r2 - x.iter().map(|v| v * v).sum::<f64>();
        let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
        let kron = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for d in 0..n {
            for c in 0..n {
                out[d][c] = DMatrix::from_fn(n, n, |a, b| {
                    (kron(a, c) * kron(b, d) + kron(a, d) * kron(b, c)) / s
                        + (kron(a, c) * x[b] + x[a] * kron(b, c)) * 2.0 * x[d] / (s * s)
                        + (kron(a, d) * x[b] + x[a] * kron(b, d)) * 2.0 * x[c] / (s * s)
                        + x[a] * x[b] * (2.0 * kron(c, d) / (s * s) + 8.0 * x[c] * x[d] / (s * s * s))
                });
            }
        }
        out
    });
    MetricField::from_analytic(
        grid,
        AnalyticMetric {
            g,
            dg: Some(dg),
            ddg: Some(ddg),
        },
    )
}

fn quadratic_graph(grid: ChartGrid, pi0: DMatrix<f64>) -> Result<MetricField> {
    let n = pi0.nrows();
    let p = pi0;
    // g_ab = delta_ab + (P v)_a (P v)_b for w = P v
    let g = {
        let p = p.clone();
        Arc::new(move |x: &[f64]| {
            let v = nalgebra::DVector::from_column_slice(x);
            let w = &p * v;
            DMatrix::from_fn(n, n, |a, b| (if a == b { 1.0 } else { 0.0 }) + w[a] * w[b])
        })
    };
    let dg = {
        let p = p.clone();
        Arc::new(move |x: &[f64]| {
            let v = nalgebra::DVector::from_column_slice(x);
            let w = &p * v;
            (0..n)
                .map(|c| DMatrix::from_fn(n, n, |a, b| p[(a, c)] * w[b] + w[a] * p[(b, c)]))
                .collect()
        })
    };
    let ddg = {
        let p = p.clone();
        Arc::new(move |_x: &[f64]| {
            (0..n)
                .map(|d| {
                    (0..n)
                        .map(|c| {
                            DMatrix::from_fn(n, n, |a, b| {
                                p[(a, c)] * p[(b, d)] + p[(a, d)] * p[(b, c)]
                            })
                        })
                        .collect()
                })
                .collect()
        })
    };
    MetricField::from_analytic(
        grid,
        AnalyticMetric {
            g,
            dg: Some(dg),
            ddg: Some(ddg),
        },
    )
}
