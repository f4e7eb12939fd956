use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::curvature::{covariant_derivative, relative_curvature_norm, riemann};
use crate::diff::{partial_component, DiffScheme};
use crate::error::{Error, Result};
use crate::field::{MetricField, TensorField, Variance};
use crate::frame::orthonormal_frame;
use crate::grid::ChartGrid;
use crate::height::{GammaSrc, HeightField, IntegrateOptions};

/// Builds the candidate flat metric f = g - dh (x) dh and measures how flat
/// it actually is (relative curvature norm of f over the valid region).
pub fn flat_metric(
    metric: &MetricField,
    height: &HeightField,
    scheme: DiffScheme,
) -> Result<(MetricField, f64)> {
    if !metric.grid.same_lattice(height.grid()) {
        return Err(Error::GridMismatch);
    }
    let n = metric.grid.dim;
    let mut vals = TensorField::zeros(metric.grid.clone(), vec![Variance::Covariant; 2]);
    for flat in 0..metric.grid.len() {
        let ok = metric.valid()[flat] && height.valid()[flat];
        vals.valid[flat] = ok;
        if !ok {
            continue;
        }
        let g = metric.values().at(flat);
        let dh = height.grad.at(flat);
        let dst = vals.at_mut(flat);
        for a in 0..n {
            for b in 0..n {
                dst[a * n + b] = g[a * n + b] - dh[a] * dh[b];
            }
        }
    }
    let f = MetricField::new(vals)?;
    let bundle = riemann(&f, scheme)?;
    let residual = relative_curvature_norm(&bundle, &f);
    Ok((f, residual))
}

/// Flat coordinates of a flat metric and their closure quality.
#[derive(Debug, Clone)]
pub struct FlatChart {
    /// m^i per point (components indexed like chart axes), m(p0) = 0.
    pub map: TensorField,
    /// The transported f-orthonormal coframe theta^i_a = dm^i/dx^a.
    pub coframe: TensorField,
    /// Relative norm of (FD Gram of m) - f over the valid interior.
    pub closure_residual: f64,
}

/// Constructs flat coordinates m for a flat metric f by parallel-transporting
/// the triangular-root coframe at `p0` along the sweep paths and
/// line-integrating dm^i = theta^i_a dc^a.
pub fn flat_coordinates(
    f: &MetricField,
    p0: &[usize],
    flatness_tol: f64,
    opts: &IntegrateOptions,
) -> Result<FlatChart> {
    let grid = f.grid.clone();
    let n = grid.dim;
    let bundle = riemann(f, DiffScheme::Central2)?;
    let flatness = relative_curvature_norm(&bundle, f);
    if flatness > flatness_tol {
        return Err(Error::FlatnessViolation { residual: flatness });
    }

    let base_flat = grid.flat(p0);
    if !f.valid()[base_flat] {
        return Err(Error::Spec("base point is outside the valid region".into()));
    }
    let gamma_src = GammaSrc::for_metric(f, DiffScheme::Central2);

    // state per point: m (n) then theta row-major (n x n)
    let state_len = n + n * n;
    let mut state = vec![0.0; grid.len() * state_len];
    let mut valid = vec![false; grid.len()];
    let seed_coframe = orthonormal_frame(&f.value(base_flat))?.coframe;
    {
        let dst = &mut state[base_flat * state_len..(base_flat + 1) * state_len];
        for i in 0..n {
            for a in 0..n {
                dst[n + i * n + a] = seed_coframe[(i, a)];
            }
        }
        valid[base_flat] = true;
    }

    let order: Vec<usize> = opts.order.clone().unwrap_or_else(|| (0..n).collect());
    for (stage, &axis) in order.iter().enumerate() {
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
        let state_ref = &state;
        let fibers: Vec<Vec<(usize, Vec<f64>)>> = starts
            .par_iter()
            .flat_map(|&start| {
                let s0 = state_ref[start * state_len..(start + 1) * state_len].to_vec();
                [1isize, -1]
                    .into_par_iter()
                    .map(move |sgn| {
                        transport_fiber(f, gamma_ref, grid_ref, start, axis, sgn, s0.clone(), opts)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        for fiber in fibers {
            for (flat, s) in fiber {
                state[flat * state_len..(flat + 1) * state_len].copy_from_slice(&s);
                valid[flat] = true;
            }
        }
    }

    let mut map = TensorField::zeros(grid.clone(), vec![Variance::Contravariant]);
    let mut coframe = TensorField::zeros(
        grid.clone(),
        vec![Variance::Contravariant, Variance::Covariant],
    );
    for flat in 0..grid.len() {
        map.valid[flat] = valid[flat];
        coframe.valid[flat] = valid[flat];
        if !valid[flat] {
            continue;
        }
        let src = &state[flat * state_len..(flat + 1) * state_len];
        map.at_mut(flat).copy_from_slice(&src[..n]);
        coframe.at_mut(flat).copy_from_slice(&src[n..]);
    }

    let closure_residual = gram_residual(&map, f.values(), DiffScheme::Central4)
        .or_else(|| gram_residual(&map, f.values(), DiffScheme::Central2))
        .unwrap_or(f64::NAN);
    Ok(FlatChart {
        map,
        coframe,
        closure_residual,
    })
}

/// Transports (m, theta) along one fiber with f's connection:
/// d theta^i_a/dt = sgn Gamma^b_{a,axis} theta^i_b, d m^i/dt = sgn theta^i_axis.
#[allow(clippy::too_many_arguments)]
fn transport_fiber(
    f: &MetricField,
    gamma_src: &GammaSrc,
    grid: &ChartGrid,
    start: usize,
    axis: usize,
    sgn: isize,
    mut state: Vec<f64>,
    opts: &IntegrateOptions,
) -> Vec<(usize, Vec<f64>)> {
    let n = grid.dim;
    let state_len = n + n * n;
    let mut idx = grid.unflat(start);
    let mut out = Vec::new();
    let dt = grid.spacing[axis] / opts.substeps as f64 * sgn as f64;

    let rhs = |x: &[f64], s: &[f64]| -> Option<Vec<f64>> {
        let gamma = gamma_src.at(f, x)?;
        let mut d = vec![0.0; state_len];
        for i in 0..n {
            d[i] = s[n + i * n + axis];
            for a in 0..n {
                let mut v = 0.0;
                for b in 0..n {
                    v += gamma[(b * n + a) * n + axis] * s[n + i * n + b];
                }
                d[n + i * n + a] = v;
            }
        }
        Some(d)
    };

    loop {
        let next = idx[axis] as isize + sgn;
        if next < 0 || next as usize >= grid.shape[axis] {
            break;
        }
        // the landing point must be inside the valid region of f
        let mut next_idx = idx.clone();
        next_idx[axis] = next as usize;
        if !f.valid()[grid.flat(&next_idx)] {
            break;
        }
        let mut x = grid.point(&idx);
        let mut failed = false;
        for _ in 0..opts.substeps {
            let eval = |tau: f64, s: &[f64]| -> Option<Vec<f64>> {
                let mut xs = x.clone();
                xs[axis] += tau;
                rhs(&xs, s)
            };
            let Some(k1) = eval(0.0, &state) else {
                failed = true;
                break;
            };
            let s2: Vec<f64> = state.iter().zip(&k1).map(|(s, k)| s + 0.5 * dt * k).collect();
            let Some(k2) = eval(0.5 * dt, &s2) else {
                failed = true;
                break;
            };
            let s3: Vec<f64> = state.iter().zip(&k2).map(|(s, k)| s + 0.5 * dt * k).collect();
            let Some(k3) = eval(0.5 * dt, &s3) else {
                failed = true;
                break;
            };
            let s4: Vec<f64> = state.iter().zip(&k3).map(|(s, k)| s + dt * k).collect();
            let Some(k4) = eval(dt, &s4) else {
                failed = true;
                break;
            };
            for (s, (((a, b), c), d)) in state
                .iter_mut()
                .zip(k1.iter().zip(&k2).zip(&k3).zip(&k4))
            {
                *s += dt / 6.0 * (a + 2.0 * b + 2.0 * c + d);
            }
            x[axis] += dt;
        }
        if failed {
            break;
        }
        idx[axis] = next as usize;
        out.push((grid.flat(&idx), state.clone()));
    }
    out
}

/// Relative norm of (FD Gram of m) - f over points with a full stencil.
fn gram_residual(map: &TensorField, f_vals: &TensorField, scheme: DiffScheme) -> Option<f64> {
    let grid = &map.grid;
    let n = grid.dim;
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    let mut any = false;
    for flat in 0..grid.len() {
        if !map.valid[flat] || !f_vals.valid[flat] {
            continue;
        }
        let idx = grid.unflat(flat);
        // dm[i][a]
        let mut dm = vec![0.0; n * n];
        let mut full = true;
        'outer: for i in 0..n {
            for a in 0..n {
                match partial_component(map, &idx, a, i, scheme) {
                    Some(v) => dm[i * n + a] = v,
                    None => {
                        full = false;
                        break 'outer;
                    }
                }
            }
        }
        if !full {
            continue;
        }
        any = true;
        let fv = f_vals.at(flat);
        for a in 0..n {
            for b in 0..n {
                let mut gram = 0.0;
                for i in 0..n {
                    gram += dm[i * n + a] * dm[i * n + b];
                }
                diff2 += (gram - fv[a * n + b]).powi(2);
                norm2 += fv[a * n + b].powi(2);
            }
        }
    }
    any.then(|| diff2.sqrt() / norm2.sqrt().max(1e-300))
}

/// The assembled immersion I = (m, h) into R^{n+1} with its diagnostics.
#[derive(Debug, Clone)]
pub struct ImmersionGrid {
    pub grid: ChartGrid,
    /// Number of ambient components, n + 1.
    pub components: usize,
    /// Per point, stride `components`: the immersion I.
    pub map: Vec<f64>,
    /// Per point, stride `components`: the closed-form unit normal.
    pub normal: Vec<f64>,
    pub valid: Vec<bool>,
    /// Relative norm of (FD Gram of I) - g.
    pub induced_residual: f64,
    /// Relative norm of (I^u_;ab normal^u) - Pi.
    pub second_form_residual: f64,
    /// Max deviation between the closed-form normal and the numerically
    /// orthogonalized one.
    pub normal_discrepancy: f64,
}

impl ImmersionGrid {
    pub fn point(&self, flat: usize) -> &[f64] {
        &self.map[flat * self.components..(flat + 1) * self.components]
    }

    pub fn normal_at(&self, flat: usize) -> &[f64] {
        &self.normal[flat * self.components..(flat + 1) * self.components]
    }
}

/// Assembles I = (m, h), the unit normal, and the induced-metric and
/// second-fundamental-form residuals.
pub fn assemble_immersion(
    chart: &FlatChart,
    height: &HeightField,
    metric: &MetricField,
    f: &MetricField,
    pi: &TensorField,
) -> Result<ImmersionGrid> {
    let grid = metric.grid.clone();
    if !chart.map.grid.same_lattice(&grid)
        || !height.grid().same_lattice(&grid)
        || !f.grid.same_lattice(&grid)
        || !pi.grid.same_lattice(&grid)
    {
        return Err(Error::GridMismatch);
    }
    let n = grid.dim;
    let comps = n + 1;
    let mut map = vec![0.0; grid.len() * comps];
    let mut normal = vec![0.0; grid.len() * comps];
    let mut valid = vec![false; grid.len()];
    let mut normal_discrepancy = 0.0f64;

    for flat in 0..grid.len() {
        let ok = chart.map.valid[flat] && height.valid()[flat] && f.valid()[flat];
        valid[flat] = ok;
        if !ok {
            continue;
        }
        let m = chart.map.at(flat);
        map[flat * comps..flat * comps + n].copy_from_slice(m);
        map[flat * comps + n] = height.h.data[flat];

        // normal = sqrt(1-G) (-dm^t_p (f^-1)^{pk} h_;k, 1)
        let root = (1.0 - height.grad_norm_sq.data[flat]).max(0.0).sqrt();
        let finv = f.inverse(flat);
        let dh = DVector::from_row_slice(height.grad.at(flat));
        let theta = chart.coframe.matrix_at(flat); // theta^i_a = dm^i/dx^a
        let v = &theta * &finv * &dh; // component i: dm^i_p (f^-1)^{pk} h_k
        for i in 0..n {
            normal[flat * comps + i] = -root * v[i];
        }
        normal[flat * comps + n] = root;

        // diagnostic: compare with the orthogonal complement of span{d_a I}
        // computed by Gram-Schmidt in the ambient space
        let mut basis = DMatrix::zeros(comps, n);
        for a in 0..n {
            for i in 0..n {
                basis[(i, a)] = theta[(i, a)];
            }
            basis[(n, a)] = dh[a];
        }
        if let Some(gs) = orthogonal_complement(&basis) {
            let closed = DVector::from_row_slice(&normal[flat * comps..(flat + 1) * comps]);
            // orientations may differ; compare up to sign
            let d = (closed.clone() - &gs).norm().min((closed + &gs).norm());
            normal_discrepancy = normal_discrepancy.max(d);
        }
    }

    // induced residual: FD Gram of I vs g
    let mut ifield = TensorField::zeros(grid.clone(), vec![Variance::Contravariant]);
    // store only the first n components in a tensor field for FD; the last
    // component is handled via the height's own field
    for flat in 0..grid.len() {
        ifield.valid[flat] = valid[flat];
        if valid[flat] {
            ifield
                .at_mut(flat)
                .copy_from_slice(&map[flat * comps..flat * comps + n]);
        }
    }
    let induced_residual =
        induced_metric_residual(&map, comps, &valid, &grid, metric, DiffScheme::Central4)
            .or_else(|| {
                induced_metric_residual(&map, comps, &valid, &grid, metric, DiffScheme::Central2)
            })
            .unwrap_or(f64::NAN);

    // second fundamental form: covariant Hessian of each component against
    // the normal
    let second_form_residual =
        second_form_residual(&map, comps, &normal, &valid, &grid, metric, pi)?;

    Ok(ImmersionGrid {
        grid,
        components: comps,
        map,
        normal,
        valid,
        induced_residual,
        second_form_residual,
        normal_discrepancy,
    })
}

/// Unit vector spanning the orthogonal complement of the column span of
/// `basis` (comps x n), via Gram-Schmidt on the columns plus one probe.
fn orthogonal_complement(basis: &DMatrix<f64>) -> Option<DVector<f64>> {
    let comps = basis.nrows();
    let n = basis.ncols();
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(n);
    for a in 0..n {
        let mut v = basis.column(a).into_owned();
        for u in &ortho {
            let c = u.dot(&v);
            v -= u * c;
        }
        let norm = v.norm();
        if norm < 1e-12 {
            return None;
        }
        ortho.push(v / norm);
    }
    // project the best unit probe out of the span
    let mut best: Option<DVector<f64>> = None;
    let mut best_norm = 0.0;
    for probe in 0..comps {
        let mut v = DVector::zeros(comps);
        v[probe] = 1.0;
        for u in &ortho {
            let c = u.dot(&v);
            v -= u * c;
        }
        let norm = v.norm();
        if norm > best_norm {
            best_norm = norm;
            best = Some(v / norm);
        }
    }
    best
}

fn induced_metric_residual(
    map: &[f64],
    comps: usize,
    valid: &[bool],
    grid: &ChartGrid,
    metric: &MetricField,
    scheme: DiffScheme,
) -> Option<f64> {
    let n = grid.dim;
    let margin = scheme.margin();
    let h = &grid.spacing;
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    let mut any = false;
    let sample = |flat: usize, u: usize| valid[flat].then(|| map[flat * comps + u]);
    for flat in 0..grid.len() {
        if !valid[flat] {
            continue;
        }
        let idx = grid.unflat(flat);
        if !grid.is_interior(&idx, margin) {
            continue;
        }
        let mut di = vec![0.0; comps * n];
        let mut full = true;
        'outer: for u in 0..comps {
            for a in 0..n {
                let mut shifted = idx.clone();
                let v = match scheme {
                    DiffScheme::Central2 => {
                        shifted[a] = idx[a] + 1;
                        let p = sample(grid.flat(&shifted), u);
                        shifted[a] = idx[a] - 1;
                        let m = sample(grid.flat(&shifted), u);
                        match (p, m) {
                            (Some(p), Some(m)) => (p - m) / (2.0 * h[a]),
                            _ => {
                                full = false;
                                break 'outer;
                            }
                        }
                    }
                    DiffScheme::Central4 => {
                        let mut vals = [0.0; 4];
                        let offs = [2isize, 1, -1, -2];
                        let mut ok = true;
                        for (slot, &o) in offs.iter().enumerate() {
                            shifted[a] = (idx[a] as isize + o) as usize;
                            match sample(grid.flat(&shifted), u) {
                                Some(v) => vals[slot] = v,
                                None => {
                                    ok = false;
                                    break;
                                }
                            }
                        }
                        if !ok {
                            full = false;
                            break 'outer;
                        }
                        (-vals[0] + 8.0 * vals[1] - 8.0 * vals[2] + vals[3]) / (12.0 * h[a])
                    }
                };
                di[u * n + a] = v;
            }
        }
        if !full {
            continue;
        }
        any = true;
        let g = metric.values().at(flat);
        for a in 0..n {
            for b in 0..n {
                let mut gram = 0.0;
                for u in 0..comps {
                    gram += di[u * n + a] * di[u * n + b];
                }
                diff2 += (gram - g[a * n + b]).powi(2);
                norm2 += g[a * n + b].powi(2);
            }
        }
    }
    any.then(|| diff2.sqrt() / norm2.sqrt().max(1e-300))
}

fn second_form_residual(
    map: &[f64],
    comps: usize,
    normal: &[f64],
    valid: &[bool],
    grid: &ChartGrid,
    metric: &MetricField,
    pi: &TensorField,
) -> Result<f64> {
    let n = grid.dim;
    // covariant Hessians of each ambient component with g's connection
    let mut hessians = Vec::with_capacity(comps);
    for u in 0..comps {
        let mut scalar = TensorField::zeros(grid.clone(), vec![]);
        for flat in 0..grid.len() {
            scalar.valid[flat] = valid[flat];
            scalar.data[flat] = map[flat * comps + u];
        }
        let grad = covariant_derivative(metric, &scalar, DiffScheme::Central2)?;
        let hess = covariant_derivative(metric, &grad, DiffScheme::Central2)?;
        hessians.push(hess);
    }
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    for flat in 0..grid.len() {
        if !pi.valid[flat] || hessians.iter().any(|h| !h.valid[flat]) {
            continue;
        }
        let nv = &normal[flat * comps..(flat + 1) * comps];
        let pv = pi.at(flat);
        for a in 0..n {
            for b in 0..n {
                let mut proj = 0.0;
                for (u, h) in hessians.iter().enumerate() {
                    proj += h.at(flat)[a * n + b] * nv[u];
                }
                diff2 += (proj - pv[a * n + b]).powi(2);
                norm2 += pv[a * n + b].powi(2);
            }
        }
    }
    Ok(diff2.sqrt() / norm2.sqrt().max(1e-300))
}
