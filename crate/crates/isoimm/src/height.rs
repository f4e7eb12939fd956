use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::curvature::{christoffel_analytic, christoffel_field};
use crate::diff::DiffScheme;
use crate::error::{Error, Result};
use crate::field::{MetricField, TensorField, Variance};
use crate::frame::orthonormal_frame;
use crate::grid::ChartGrid;

/// Reconstructed height function and its gradient.
///
/// The validity mask marks where the reconstruction holds; outside it either
/// the gradient bound g^ab h_;a h_;b < 1 failed (clamp) or the integration
/// could not reach the point.
#[derive(Debug, Clone)]
pub struct HeightField {
    pub h: TensorField,
    /// h_;a per point (covector).
    pub grad: TensorField,
    /// g^ab h_;a h_;b per point.
    pub grad_norm_sq: TensorField,
    pub base: Vec<usize>,
}

impl HeightField {
    pub fn grid(&self) -> &ChartGrid {
        &self.h.grid
    }

    pub fn valid(&self) -> &[bool] {
        &self.h.valid
    }
}

/// Where the integrator reads the second fundamental form between grid
/// points: multilinear interpolation of a sampled field, or an exact
/// closure for analytic fixtures.
pub enum PiSource<'a> {
    Sampled(&'a TensorField),
    Analytic(&'a (dyn Fn(&[f64]) -> DMatrix<f64> + Sync)),
}

impl PiSource<'_> {
    fn at(&self, grid: &ChartGrid, x: &[f64]) -> Option<DMatrix<f64>> {
        match self {
            PiSource::Sampled(field) => {
                let n = grid.dim;
                let mut m = DMatrix::zeros(n, n);
                for a in 0..n {
                    for b in 0..n {
                        let v = grid.interpolate(x, |flat| {
                            field.valid[flat].then(|| field.at(flat)[a * n + b])
                        })?;
                        m[(a, b)] = v;
                    }
                }
                Some(m)
            }
            PiSource::Analytic(f) => Some(f(x)),
        }
    }
}

/// Christoffel symbols between grid points: exact for analytic metrics,
/// multilinear interpolation of the sampled field otherwise.
pub(crate) enum GammaSrc {
    Analytic,
    Sampled(TensorField),
}

impl GammaSrc {
    pub(crate) fn for_metric(metric: &MetricField, scheme: DiffScheme) -> Self {
        if metric
            .analytic
            .as_ref()
            .map(|a| a.dg.is_some())
            .unwrap_or(false)
        {
            GammaSrc::Analytic
        } else {
            GammaSrc::Sampled(christoffel_field(metric, scheme))
        }
    }

    pub(crate) fn at(&self, metric: &MetricField, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            GammaSrc::Analytic => christoffel_analytic(metric, x),
            GammaSrc::Sampled(field) => {
                let c = field.comp_count();
                let mut out = vec![0.0; c];
                for (off, slot) in out.iter_mut().enumerate() {
                    *slot = field.grid.interpolate(x, |flat| {
                        field.valid[flat].then(|| field.data[flat * c + off])
                    })?;
                }
                Some(out)
            }
        }
    }
}

/// Knobs of the height integrator.
#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    /// RK4 substeps per grid cell.
    pub substeps: usize,
    /// Invalidate points where 1 - gradNormSq drops below this.
    pub clamp: f64,
    /// Sweep order over axes; `None` means ascending.
    pub order: Option<Vec<usize>>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            substeps: 4,
            clamp: 1e-6,
            order: None,
        }
    }
}

struct PointState {
    flat: usize,
    h: f64,
    grad: Vec<f64>,
    gns: f64,
    valid: bool,
}

/// Integrates D h_;a / dt = (1 - g^mn h_;m h_;n)^{1/2} Pi_ab dc^b/dt along a
/// spine-and-fiber sweep from the base point, co-integrating
/// dh = h_;a dc^a. Classical RK4 with a fixed substep per cell.
pub fn integrate_height(
    pi: &PiSource,
    metric: &MetricField,
    p0: &[usize],
    h0: f64,
    grad0: &[f64],
    opts: &IntegrateOptions,
) -> Result<HeightField> {
    let grid = metric.grid.clone();
    let n = grid.dim;
    assert_eq!(p0.len(), n);
    assert_eq!(grad0.len(), n);
    let order: Vec<usize> = opts.order.clone().unwrap_or_else(|| (0..n).collect());
    assert_eq!(order.len(), n);

    let base_flat = grid.flat(p0);
    let g0inv = metric.inverse(base_flat);
    let grad0v = DVector::from_row_slice(grad0);
    let gns0 = (grad0v.transpose() * &g0inv * &grad0v)[(0, 0)];
    if gns0 >= 1.0 {
        return Err(Error::InvalidSeed { grad_norm_sq: gns0 });
    }

    let gamma_src = GammaSrc::for_metric(metric, DiffScheme::Central2);

    let mut h = TensorField::scalar_from_fn(grid.clone(), |_| 0.0);
    let mut grad = TensorField::zeros(grid.clone(), vec![Variance::Covariant]);
    let mut gns = TensorField::scalar_from_fn(grid.clone(), |_| 0.0);
    let mut valid = vec![false; grid.len()];

    h.data[base_flat] = h0;
    grad.at_mut(base_flat).copy_from_slice(grad0);
    gns.data[base_flat] = gns0;
    valid[base_flat] = true;

    for (stage, &axis) in order.iter().enumerate() {
        // fibers start wherever all not-yet-swept axes sit at the base index
        let starts: Vec<usize> = (0..grid.len())
            .filter(|&flat| {
                if !valid[flat] {
                    return false;
                }
                let idx = grid.unflat(flat);
                order[stage..].iter().all(|&a| idx[a] == p0[a])
            })
            .collect();

        let gamma_ref = &gamma_src;
        let grid_ref = &grid;
        let fibers: Vec<Vec<PointState>> = starts
            .par_iter()
            .flat_map(|&start| {
                let state = (
                    h.data[start],
                    grad.at(start).to_vec(),
                );
                [1isize, -1]
                    .into_par_iter()
                    .map(move |sgn| {
                        march_fiber(
                            metric, pi, gamma_ref, grid_ref, start, axis, sgn, state.clone(), opts,
                        )
                    })
                    .collect::<Vec<_>>()
            })
            .collect();

        for fiber in fibers {
            for p in fiber {
                h.data[p.flat] = p.h;
                grad.at_mut(p.flat).copy_from_slice(&p.grad);
                gns.data[p.flat] = p.gns;
                valid[p.flat] = p.valid;
            }
        }
    }

    h.valid = valid.clone();
    grad.valid = valid.clone();
    gns.valid = valid;
    Ok(HeightField {
        h,
        grad,
        grad_norm_sq: gns,
        base: p0.to_vec(),
    })
}

/// Marches one fiber from a start point along `axis` in direction `sgn`,
/// returning the states at the grid points it reaches. Stops at the clamp
/// locus or wherever a source term cannot be evaluated.
#[allow(clippy::too_many_arguments)]
fn march_fiber(
    metric: &MetricField,
    pi: &PiSource,
    gamma_src: &GammaSrc,
    grid: &ChartGrid,
    start: usize,
    axis: usize,
    sgn: isize,
    state: (f64, Vec<f64>),
    opts: &IntegrateOptions,
) -> Vec<PointState> {
    let n = grid.dim;
    let mut idx = grid.unflat(start);
    let (mut hval, mut gradv) = state;
    let mut out = Vec::new();
    let spacing = grid.spacing[axis];
    let dt = spacing / opts.substeps as f64 * sgn as f64;

    let rhs = |x: &[f64], g_state: &[f64]| -> Option<(f64, Vec<f64>)> {
        let gamma = gamma_src.at(metric, x)?;
        let pim = pi.at(grid, x)?;
        let gm = metric.value_at_point(x)?;
        let ginv = gm.try_inverse()?;
        let gv = DVector::from_row_slice(g_state);
        let gns = (gv.transpose() * &ginv * &gv)[(0, 0)];
        let root = (1.0 - gns).max(0.0).sqrt();
        let mut dgrad = vec![0.0; n];
        for a in 0..n {
            let mut v = root * pim[(a, axis)];
            for d in 0..n {
                v += gamma[(d * n + a) * n + axis] * g_state[d];
            }
            dgrad[a] = v;
        }
        Some((g_state[axis], dgrad))
    };

    loop {
        let next = idx[axis] as isize + sgn;
        if next < 0 || next as usize >= grid.shape[axis] {
            break;
        }
        let mut x = grid.point(&idx);
        let mut failed = false;
        for _ in 0..opts.substeps {
            // classical RK4 on the joint state (h, grad)
            let step = |x0: &[f64], h0: f64, g0: &[f64], tau: f64| -> Option<(f64, Vec<f64>)> {
                let mut xs = x0.to_vec();
                xs[axis] += tau;
                let _ = h0;
                rhs(&xs, g0)
            };
            let (k1h, k1g) = match step(&x, hval, &gradv, 0.0) {
                Some(v) => v,
                None => {
                    failed = true;
                    break;
                }
            };
            let g2: Vec<f64> = gradv.iter().zip(&k1g).map(|(g, k)| g + 0.5 * dt * k).collect();
            let (k2h, k2g) = match step(&x, hval, &g2, 0.5 * dt) {
                Some(v) => v,
                None => {
                    failed = true;
                    break;
                }
            };
            let g3: Vec<f64> = gradv.iter().zip(&k2g).map(|(g, k)| g + 0.5 * dt * k).collect();
            let (k3h, k3g) = match step(&x, hval, &g3, 0.5 * dt) {
                Some(v) => v,
                None => {
                    failed = true;
                    break;
                }
            };
            let g4: Vec<f64> = gradv.iter().zip(&k3g).map(|(g, k)| g + dt * k).collect();
            let (k4h, k4g) = match step(&x, hval, &g4, dt) {
                Some(v) => v,
                None => {
                    failed = true;
                    break;
                }
            };
            hval += dt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
            for a in 0..n {
                gradv[a] += dt / 6.0 * (k1g[a] + 2.0 * k2g[a] + 2.0 * k3g[a] + k4g[a]);
            }
            x[axis] += dt;
        }
        if failed {
            break;
        }
        idx[axis] = next as usize;
        let flat = grid.flat(&idx);
        let gns = match metric.value_at_point(&grid.point(&idx)).and_then(|g| {
            let ginv = g.try_inverse()?;
            let gv = DVector::from_row_slice(&gradv);
            Some((gv.transpose() * &ginv * &gv)[(0, 0)])
        }) {
            Some(v) => v,
            None => break,
        };
        let clamped = 1.0 - gns < opts.clamp;
        out.push(PointState {
            flat,
            h: hval,
            grad: gradv.clone(),
            gns,
            valid: !clamped,
        });
        if clamped {
            // do not extend past the |grad| = 1 locus
            break;
        }
    }
    out
}

/// Max deviation between gradients integrated in ascending and descending
/// axis order, normalized by max |grad| + 1. Near zero iff the integral is
/// path independent, i.e. Pi satisfies Codazzi.
pub fn path_independence_residual(
    pi: &PiSource,
    metric: &MetricField,
    p0: &[usize],
    h0: f64,
    grad0: &[f64],
    opts: &IntegrateOptions,
) -> Result<f64> {
    let n = metric.grid.dim;
    let fwd = integrate_height(pi, metric, p0, h0, grad0, opts)?;
    let mut rev_opts = opts.clone();
    rev_opts.order = Some((0..n).rev().collect());
    let rev = integrate_height(pi, metric, p0, h0, grad0, &rev_opts)?;
    let mut max_diff = 0.0f64;
    let mut max_grad = 0.0f64;
    for flat in 0..metric.grid.len() {
        if !fwd.valid()[flat] || !rev.valid()[flat] {
            continue;
        }
        for (a, b) in fwd.grad.at(flat).iter().zip(rev.grad.at(flat)) {
            max_diff = max_diff.max((a - b).abs());
            max_grad = max_grad.max(a.abs());
        }
    }
    Ok(max_diff / (max_grad + 1.0))
}

/// Lower bound pi/(2r) on the extensibility radius, with r the largest
/// |eigenvalue| of Pi in a g-orthonormal frame over the valid grid.
/// Returns +inf when Pi vanishes.
pub fn guaranteed_radius(pi: &TensorField, metric: &MetricField) -> Result<f64> {
    if !pi.grid.same_lattice(&metric.grid) {
        return Err(Error::GridMismatch);
    }
    let mut r = 0.0f64;
    for flat in 0..pi.grid.len() {
        if !pi.valid[flat] || !metric.valid()[flat] {
            continue;
        }
        let fr = orthonormal_frame(&metric.value(flat))?;
        let pihat = fr.to_frame_sym2(&pi.matrix_at(flat));
        let eig = pihat.symmetric_eigenvalues();
        r = r.max(eig.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(std::f64::consts::FRAC_PI_2 / r)
}
