use nalgebra::{DMatrix, DVector};

use crate::curvature::{covariant_derivative, CurvatureBundle};
use crate::diff::DiffScheme;
use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::height::HeightField;

/// Outcome of the level-set curvature-scaling check.
#[derive(Debug, Clone)]
pub struct CrossSectionReport {
    /// Max over the band of the relative deviation between
    /// tangential(R) + K^K and tangential(R)/|grad h|^2.
    pub residual: f64,
    /// Smallest scaling factor 1/|grad h|^2 on the band (>= 1 on the valid
    /// region, where |grad h|^2 < 1).
    pub min_factor: f64,
    pub band_points: usize,
}

/// Verifies, pointwise on the band |h - level| < half a cell's h-variation,
/// that the level hypersurface's Gauss curvature tensor
/// R_N = P(R_M) + K^K equals the scaled ambient curvature P(R_M)/|grad h|^2,
/// with K the tangential restriction of (sqrt(1-G)/|grad h|) Pi and
/// Pi = Hess(h)/sqrt(1-G) read off the reconstructed height field.
pub fn cross_section_check(
    metric: &MetricField,
    curvature: &CurvatureBundle,
    height: &HeightField,
    level: f64,
) -> Result<CrossSectionReport> {
    let grid = &metric.grid;
    if !curvature.grid().same_lattice(grid) || !height.grid().same_lattice(grid) {
        return Err(Error::GridMismatch);
    }
    let n = grid.dim;
    let hess = covariant_derivative(metric, &height.grad, DiffScheme::Central2)?;

    let mut residual = 0.0f64;
    let mut min_factor = f64::INFINITY;
    let mut band_points = 0usize;
    let mut degenerate_only = true;
    let mut any_in_band = false;

    for flat in 0..grid.len() {
        if !height.valid()[flat] || !curvature.riemann.valid[flat] || !hess.valid[flat] {
            continue;
        }
        let gradv = height.grad.at(flat);
        // band tolerance: half of one grid cell's h-variation at this point
        let band = 0.5
            * gradv
                .iter()
                .zip(&grid.spacing)
                .map(|(g, s)| g.abs() * s)
                .sum::<f64>()
            + 1e-9 * (1.0 + level.abs());
        if (height.h.data[flat] - level).abs() >= band {
            continue;
        }
        any_in_band = true;
        let gns = height.grad_norm_sq.data[flat];
        let grad_norm = gns.sqrt();
        if grad_norm <= 1e-3 {
            continue;
        }
        degenerate_only = false;
        band_points += 1;
        min_factor = min_factor.min(1.0 / gns);

        let ginv = metric.inverse(flat);
        let dh = DVector::from_row_slice(gradv);
        // unit normal covector and vector
        let ncov = &dh / grad_norm;
        let nvec = &ginv * &ncov;
        // tangential projector P^a_b = delta - n^a n_b
        let proj = DMatrix::identity(n, n) - &nvec * ncov.transpose();

        // K_ab = tangential restriction of Hess(h)/|grad h|
        let hm = hess.at(flat);
        let hmat = DMatrix::from_row_slice(n, n, hm);
        let kmat = proj.transpose() * (&hmat / grad_norm) * &proj;

        // tangential restriction of R_pijk, slotwise
        let r = curvature.riemann.at(flat);
        let rt = project_cov4(r, &proj, n);

        let mut num2 = 0.0;
        let mut lhs2 = 0.0;
        let mut rhs2 = 0.0;
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let kk = kmat[(p, j)] * kmat[(i, k)] - kmat[(p, k)] * kmat[(i, j)];
                        let lhs = rt[((p * n + i) * n + j) * n + k] + kk;
                        let rhs = rt[((p * n + i) * n + j) * n + k] / gns;
                        num2 += (lhs - rhs) * (lhs - rhs);
                        lhs2 += lhs * lhs;
                        rhs2 += rhs * rhs;
                    }
                }
            }
        }
        let den = lhs2.max(rhs2).sqrt();
        if den > 1e-14 {
            residual = residual.max(num2.sqrt() / den);
        }
    }

    if !any_in_band {
        return Err(Error::EmptyLevelBand { level });
    }
    if degenerate_only {
        return Err(Error::DegenerateGradient { level });
    }
    Ok(CrossSectionReport {
        residual,
        min_factor,
        band_points,
    })
}

/// Applies the projector to every slot of a covariant 4-tensor.
fn project_cov4(t: &[f64], proj: &DMatrix<f64>, n: usize) -> Vec<f64> {
    let mut cur = t.to_vec();
    let mut next = vec![0.0; t.len()];
    for _ in 0..4 {
        next.iter_mut().for_each(|v| *v = 0.0);
        let block = n * n * n;
        for a in 0..n {
            for b in 0..n {
                let w = proj[(a, b)];
                if w == 0.0 {
                    continue;
                }
                for rest in 0..block {
                    next[rest * n + b] += w * cur[a * block + rest];
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}
