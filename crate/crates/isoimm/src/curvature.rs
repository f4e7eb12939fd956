use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::diff::{partial_component, DiffScheme};
use crate::error::{Error, Result};
use crate::field::{MetricField, TensorField, Variance};

/// Per-point connection and curvature of a metric, in chart coordinates.
///
/// `gamma` holds Gamma^a_bc (slot order a, b, c), `riemann` the fully
/// covariant R_pijk. Points where the stencil could not be evaluated are
/// masked out in each field's `valid` vector.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub gamma: TensorField,
    pub riemann: TensorField,
    pub ricci: TensorField,
    pub scalar: TensorField,
}

impl CurvatureBundle {
    pub fn grid(&self) -> &crate::grid::ChartGrid {
        &self.riemann.grid
    }

    pub fn valid(&self) -> &[bool] {
        &self.riemann.valid
    }
}

/// d_c g_ab at a grid index: analytic when evaluators are present, central
/// differences of the samples otherwise. Layout: dg[c][(a,b)].
fn metric_partials(
    metric: &MetricField,
    idx: &[usize],
    scheme: DiffScheme,
) -> Result<Vec<DMatrix<f64>>> {
    let n = metric.grid.dim;
    if let Some(analytic) = &metric.analytic {
        if let Some(dg) = &analytic.dg {
            return Ok((dg)(&metric.grid.point(idx)));
        }
    }
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let v = partial_component(metric.values(), idx, c, a * n + b, scheme).ok_or(
                    Error::BoundaryStencil {
                        index: idx.to_vec(),
                        axis: c,
                    },
                )?;
                m[(a, b)] = v;
            }
        }
        out.push(m);
    }
    Ok(out)
}

fn gamma_from_jet(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Vec<f64> {
    let n = ginv.nrows();
    let mut gamma = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += ginv[(a, m)] * (dg[c][(m, b)] + dg[b][(m, c)] - dg[m][(b, c)]);
                }
                gamma[(a * n + b) * n + c] = 0.5 * acc;
            }
        }
    }
    gamma
}

/// Christoffel symbols Gamma^a_bc at one grid index.
pub fn christoffel(metric: &MetricField, idx: &[usize], scheme: DiffScheme) -> Result<Vec<f64>> {
    let flat = metric.grid.flat(idx);
    let ginv = metric.inverse(flat);
    let dg = metric_partials(metric, idx, scheme)?;
    Ok(gamma_from_jet(&ginv, &dg))
}

/// Christoffel symbols at an arbitrary chart point of an analytic metric.
pub fn christoffel_analytic(metric: &MetricField, x: &[f64]) -> Option<Vec<f64>> {
    let analytic = metric.analytic.as_ref()?;
    let dg = analytic.dg.as_ref()?;
    let g = (analytic.g)(x);
    let ginv = g.try_inverse()?;
    Some(gamma_from_jet(&ginv, &(dg)(x)))
}

/// Christoffel field over the whole grid; boundary points are masked.
pub fn christoffel_field(metric: &MetricField, scheme: DiffScheme) -> TensorField {
    let mut out = TensorField::zeros(
        metric.grid.clone(),
        vec![Variance::Contravariant, Variance::Covariant, Variance::Covariant],
    );
    let comp = out.comp_count();
    let grid = metric.grid.clone();
    let results: Vec<Option<Vec<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            if !metric.valid()[flat] {
                return None;
            }
            christoffel(metric, &grid.unflat(flat), scheme).ok()
        })
        .collect();
    for (flat, r) in results.into_iter().enumerate() {
        match r {
            Some(g) => out.data[flat * comp..(flat + 1) * comp].copy_from_slice(&g),
            None => out.valid[flat] = false,
        }
    }
    out
}

/// d_d Gamma^a_bc from analytic first and second metric derivatives.
/// Layout: dgamma[d][(a*n+b)*n+c].
fn dgamma_analytic(
    g: &DMatrix<f64>,
    dg: &[DMatrix<f64>],
    ddg: &[Vec<DMatrix<f64>>],
) -> Option<Vec<Vec<f64>>> {
    let n = g.nrows();
    let ginv = g.clone().try_inverse()?;
    let mut out = Vec::with_capacity(n);
    for d in 0..n {
        // d_d g^{an} = -g^{am} (d_d g_mk) g^{kn}
        let dginv = -(&ginv * &dg[d] * &ginv);
        let mut block = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        let s = dg[c][(m, b)] + dg[b][(m, c)] - dg[m][(b, c)];
                        let ds = ddg[d][c][(m, b)] + ddg[d][b][(m, c)] - ddg[d][m][(b, c)];
                        acc += dginv[(a, m)] * s + ginv[(a, m)] * ds;
                    }
                    block[(a * n + b) * n + c] = 0.5 * acc;
                }
            }
        }
        out.push(block);
    }
    Some(out)
}

/// Connection, Riemann, Ricci and scalar curvature of a metric.
///
/// With full analytic evaluators every point is computed exactly; otherwise
/// two finite-difference levels are used and the valid mask shrinks by the
/// corresponding margins.
pub fn riemann(metric: &MetricField, scheme: DiffScheme) -> Result<CurvatureBundle> {
    let n = metric.grid.dim;
    let grid = metric.grid.clone();
    let gamma = christoffel_field(metric, scheme);

    let fully_analytic = metric
        .analytic
        .as_ref()
        .map(|a| a.dg.is_some() && a.ddg.is_some())
        .unwrap_or(false);

    let mut rie = TensorField::zeros(grid.clone(), vec![Variance::Covariant; 4]);
    let mut ricci = TensorField::zeros(grid.clone(), vec![Variance::Covariant; 2]);
    let mut scalar = TensorField::zeros(grid.clone(), vec![]);

    let rcomp = rie.comp_count();
    struct PointOut {
        rie: Vec<f64>,
        ricci: Vec<f64>,
        scalar: f64,
    }

    let results: Vec<Option<PointOut>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            if !gamma.valid[flat] {
                return None;
            }
            let idx = grid.unflat(flat);
            // dgamma[d] = d_d Gamma
            let dgamma: Vec<Vec<f64>> = if fully_analytic {
                let analytic = metric.analytic.as_ref().unwrap();
                let x = grid.point(&idx);
                let g = (analytic.g)(&x);
                let dg = (analytic.dg.as_ref().unwrap())(&x);
                let ddg = (analytic.ddg.as_ref().unwrap())(&x);
                dgamma_analytic(&g, &dg, &ddg)?
            } else {
                let mut blocks = Vec::with_capacity(n);
                for d in 0..n {
                    let mut block = vec![0.0; n * n * n];
                    for off in 0..n * n * n {
                        block[off] = partial_component(&gamma, &idx, d, off, scheme)?;
                    }
                    blocks.push(block);
                }
                blocks
            };
            let gam = gamma.at(flat);
            let gm = |a: usize, b: usize, c: usize| gam[(a * n + b) * n + c];
            // R^l_ijk = d_j Gamma^l_ik - d_k Gamma^l_ij
            //           + Gamma^l_js Gamma^s_ik - Gamma^l_ks Gamma^s_ij
            let mut up = vec![0.0; rcomp];
            for l in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let mut v = dgamma[j][(l * n + i) * n + k] - dgamma[k][(l * n + i) * n + j];
                            for s in 0..n {
                                v += gm(l, j, s) * gm(s, i, k) - gm(l, k, s) * gm(s, i, j);
                            }
                            up[((l * n + i) * n + j) * n + k] = v;
                        }
                    }
                }
            }
            let g = metric.value(flat);
            let ginv = metric.inverse(flat);
            let mut low = vec![0.0; rcomp];
            for p in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let mut v = 0.0;
                            for l in 0..n {
                                v += g[(p, l)] * up[((l * n + i) * n + j) * n + k];
                            }
                            low[((p * n + i) * n + j) * n + k] = v;
                        }
                    }
                }
            }
            // R_ij = g^{kl} R_{likj}
            let mut ric = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for k in 0..n {
                        for l in 0..n {
                            v += ginv[(k, l)] * low[((l * n + i) * n + k) * n + j];
                        }
                    }
                    ric[i * n + j] = v;
                }
            }
            let mut sc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    sc += ginv[(i, j)] * ric[i * n + j];
                }
            }
            Some(PointOut {
                rie: low,
                ricci: ric,
                scalar: sc,
            })
        })
        .collect();

    for (flat, r) in results.into_iter().enumerate() {
        match r {
            Some(p) => {
                rie.data[flat * rcomp..(flat + 1) * rcomp].copy_from_slice(&p.rie);
                ricci.data[flat * n * n..(flat + 1) * n * n].copy_from_slice(&p.ricci);
                scalar.data[flat] = p.scalar;
            }
            None => {
                rie.valid[flat] = false;
                ricci.valid[flat] = false;
                scalar.valid[flat] = false;
            }
        }
    }
    if !rie.valid.iter().any(|&v| v) {
        return Err(Error::BoundaryStencil {
            index: grid.center(),
            axis: 0,
        });
    }
    Ok(CurvatureBundle {
        gamma,
        riemann: rie,
        ricci,
        scalar,
    })
}

/// Levi-Civita covariant derivative of a tensor field; the new covariant
/// slot is appended last (T_{A;c}).
pub fn covariant_derivative(
    metric: &MetricField,
    field: &TensorField,
    scheme: DiffScheme,
) -> Result<TensorField> {
    let gamma = christoffel_field(metric, scheme);
    covariant_derivative_with_gamma(&gamma, field, scheme)
}

pub fn covariant_derivative_with_gamma(
    gamma: &TensorField,
    field: &TensorField,
    scheme: DiffScheme,
) -> Result<TensorField> {
    if !gamma.grid.same_lattice(&field.grid) {
        return Err(Error::GridMismatch);
    }
    let n = field.grid.dim;
    let rank = field.rank();
    let mut variance = field.variance.clone();
    variance.push(Variance::Covariant);
    let mut out = TensorField::zeros(field.grid.clone(), variance);
    let in_comp = field.comp_count();
    let out_comp = out.comp_count();
    let grid = field.grid.clone();

    let results: Vec<Option<Vec<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            if !field.valid[flat] || !gamma.valid[flat] {
                return None;
            }
            let idx = grid.unflat(flat);
            let gam = gamma.at(flat);
            let gm = |a: usize, b: usize, c: usize| gam[(a * n + b) * n + c];
            let vals = field.at(flat);
            let mut comp = vec![0usize; rank];
            let mut res = vec![0.0; out_comp];
            for off in 0..in_comp {
                let mut o = off;
                for s in (0..rank).rev() {
                    comp[s] = o % n;
                    o /= n;
                }
                for c in 0..n {
                    let mut v = partial_component(field, &idx, c, off, scheme)?;
                    for (slot, &var) in field.variance.iter().enumerate() {
                        let orig = comp[slot];
                        for d in 0..n {
                            comp[slot] = d;
                            let t = vals[field.comp_offset(&comp)];
                            match var {
                                Variance::Covariant => v -= gm(d, c, orig) * t,
                                Variance::Contravariant => v += gm(orig, c, d) * t,
                            }
                        }
                        comp[slot] = orig;
                    }
                    res[off * n + c] = v;
                }
            }
            Some(res)
        })
        .collect();

    for (flat, r) in results.into_iter().enumerate() {
        match r {
            Some(v) => out.data[flat * out_comp..(flat + 1) * out_comp].copy_from_slice(&v),
            None => out.valid[flat] = false,
        }
    }
    Ok(out)
}

/// Frobenius norm of a field over its valid points.
pub fn field_norm(field: &TensorField) -> f64 {
    let c = field.comp_count();
    let mut acc = 0.0;
    for flat in 0..field.grid.len() {
        if !field.valid[flat] {
            continue;
        }
        for v in field.at(flat) {
            acc += v * v;
        }
        let _ = c;
    }
    acc.sqrt()
}

/// Scale-free curvature magnitude: RMS over valid points of
/// ||R(p)||_F / ||g(p)||_F^2.
pub fn relative_curvature_norm(bundle: &CurvatureBundle, metric: &MetricField) -> f64 {
    let mut num = 0.0;
    let mut cnt = 0usize;
    for flat in 0..metric.grid.len() {
        if !bundle.riemann.valid[flat] {
            continue;
        }
        let r2: f64 = bundle.riemann.at(flat).iter().map(|v| v * v).sum();
        let g2: f64 = metric.values().at(flat).iter().map(|v| v * v).sum();
        num += r2 / (g2 * g2).max(1e-300);
        cnt += 1;
    }
    if cnt == 0 {
        return f64::NAN;
    }
    (num / cnt as f64).sqrt()
}
