use nalgebra::{DMatrix, DVector};

use crate::curvature::{covariant_derivative, riemann};
use crate::diff::DiffScheme;
use crate::error::{Error, Result};
use crate::field::{MetricField, TensorField};

/// A candidate k-tuple of height fields h^1..h^k on a shared grid.
#[derive(Debug, Clone)]
pub struct KTupleCandidate {
    pub fields: Vec<TensorField>,
}

impl KTupleCandidate {
    pub fn new(fields: Vec<TensorField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Spec("candidate needs at least one field".into()));
        }
        let grid = fields[0].grid.clone();
        for f in &fields {
            if f.rank() != 0 {
                return Err(Error::Spec("candidate fields must be scalars".into()));
            }
            if !f.grid.same_lattice(&grid) {
                return Err(Error::GridMismatch);
            }
        }
        // the tuple shares one validity mask: the intersection
        let mut valid = vec![true; grid.len()];
        for f in &fields {
            for (v, fv) in valid.iter_mut().zip(&f.valid) {
                *v &= fv;
            }
        }
        let mut fields = fields;
        for f in &mut fields {
            f.valid = valid.clone();
        }
        Ok(Self { fields })
    }

    pub fn k(&self) -> usize {
        self.fields.len()
    }

    pub fn grid(&self) -> &crate::grid::ChartGrid {
        &self.fields[0].grid
    }
}

/// Outcome of checking a k-tuple against the master immersion equation
/// (h^m_;pj h^n_;ik - h^m_;pk h^n_;ij)(A^{-1})_{mn} = R_pijk with
/// A_mn = delta_mn - h^m_;a h^n_;b g^{ab}.
#[derive(Debug, Clone)]
pub struct KTupleReport {
    /// ||LHS - R|| / max(||R||, ||LHS||) over the checked interior.
    pub residual: f64,
    /// ||LHS - R|| unnormalized (equals ||R|| for zero fields).
    pub absolute_residual: f64,
    /// Smallest eigenvalue of f = g - h^t_;a h^t_;b over the interior.
    pub min_f_eigenvalue: f64,
    pub f_positive_definite: bool,
    /// Worst condition number of the k x k coupling matrix A.
    pub max_condition: f64,
    /// Cross-check of the inverse identity
    /// (A^{-1})_mn = delta_mn + h^m_;a h^n_;b (f^{-1})^{ab}.
    pub identity_residual: f64,
    pub points_checked: usize,
}

/// Verifies a candidate k-tuple against the master equation, using g's
/// connection for the covariant Hessians.
pub fn verify_k_tuple(
    metric: &MetricField,
    candidate: &KTupleCandidate,
    scheme: DiffScheme,
) -> Result<KTupleReport> {
    if !metric.grid.same_lattice(candidate.grid()) {
        return Err(Error::GridMismatch);
    }
    let n = metric.grid.dim;
    let k = candidate.k();
    let bundle = riemann(metric, scheme)?;

    let mut grads = Vec::with_capacity(k);
    let mut hessians = Vec::with_capacity(k);
    for h in &candidate.fields {
        let grad = covariant_derivative(metric, h, scheme)?;
        let hess = covariant_derivative(metric, &grad, scheme)?;
        grads.push(grad);
        hessians.push(hess);
    }

    let mut diff2 = 0.0;
    let mut r2 = 0.0;
    let mut lhs2 = 0.0;
    let mut min_f_eigenvalue = f64::INFINITY;
    let mut max_condition = 0.0f64;
    let mut identity_residual = 0.0f64;
    let mut points = 0usize;

    for flat in 0..metric.grid.len() {
        if !bundle.riemann.valid[flat]
            || grads.iter().any(|g| !g.valid[flat])
            || hessians.iter().any(|h| !h.valid[flat])
        {
            continue;
        }
        points += 1;
        let idx = metric.grid.unflat(flat);
        let ginv = metric.inverse(flat);
        let g = metric.value(flat);

        // coupling matrix A_mn = delta - grad h^m . grad h^n (g-inner product)
        let mut a: DMatrix<f64> = DMatrix::identity(k, k);
        for m in 0..k {
            let gm = DVector::from_row_slice(grads[m].at(flat));
            for nn in 0..k {
                let gn = DVector::from_row_slice(grads[nn].at(flat));
                a[(m, nn)] -= (gm.transpose() * &ginv * &gn)[(0, 0)];
            }
        }
        let svd = a.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 1e-12 * smax {
            return Err(Error::SingularCouplingMatrix { index: idx });
        }
        max_condition = max_condition.max(smax / smin);
        let ainv = a.clone().try_inverse().ok_or(Error::SingularCouplingMatrix {
            index: idx.clone(),
        })?;

        // f = g - sum_t grad h^t (x) grad h^t
        let mut f = g.clone();
        for grad in &grads {
            let gv = DVector::from_row_slice(grad.at(flat));
            f -= &gv * gv.transpose();
        }
        let feig = f.clone().symmetric_eigenvalues();
        min_f_eigenvalue = min_f_eigenvalue.min(feig.min());

        // inverse identity cross-check (only meaningful when f invertible)
        if let Some(finv) = f.clone().try_inverse() {
            let mut rhs: DMatrix<f64> = DMatrix::identity(k, k);
            for m in 0..k {
                let gm = DVector::from_row_slice(grads[m].at(flat));
                for nn in 0..k {
                    let gn = DVector::from_row_slice(grads[nn].at(flat));
                    rhs[(m, nn)] += (gm.transpose() * &finv * &gn)[(0, 0)];
                }
            }
            identity_residual = identity_residual.max((ainv.clone() - rhs).norm());
        }

        // LHS_pijk = (h^m_;pj h^n_;ik - h^m_;pk h^n_;ij)(A^{-1})_mn vs R_pijk
        let r = bundle.riemann.at(flat);
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for kk in 0..n {
                        let mut lhs = 0.0;
                        for m in 0..k {
                            let hm = hessians[m].at(flat);
                            for nn in 0..k {
                                let hn = hessians[nn].at(flat);
                                lhs += (hm[p * n + j] * hn[i * n + kk]
                                    - hm[p * n + kk] * hn[i * n + j])
                                    * ainv[(m, nn)];
                            }
                        }
                        let rv = r[((p * n + i) * n + j) * n + kk];
                        diff2 += (lhs - rv) * (lhs - rv);
                        r2 += rv * rv;
                        lhs2 += lhs * lhs;
                    }
                }
            }
        }
    }

    if points == 0 {
        return Err(Error::BoundaryStencil {
            index: metric.grid.center(),
            axis: 0,
        });
    }
    let denom = r2.max(lhs2).sqrt();
    let absolute_residual = diff2.sqrt();
    let residual = if denom == 0.0 {
        0.0
    } else {
        absolute_residual / denom
    };
    Ok(KTupleReport {
        residual,
        absolute_residual,
        min_f_eigenvalue,
        f_positive_definite: min_f_eigenvalue > 0.0,
        max_condition,
        identity_residual,
        points_checked: points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ChartGrid;
    use crate::height::{integrate_height, IntegrateOptions, PiSource};
    use crate::presets::{generate, GridSpec, MetricKind, MetricSpec, SphereChart};

    fn clifford_patch() -> (MetricField, KTupleCandidate) {
        // g = (1/2) delta on a box inside |x|, |y| < pi/2
        let grid = ChartGrid::new(vec![-1.2, -1.2], vec![0.1, 0.1], vec![25, 25]).unwrap();
        let g0 = nalgebra::DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        let vals = TensorField::sym2_from_fn(grid.clone(), move |_| g0.clone());
        let metric = MetricField::new(vals).unwrap();
        let h1 = TensorField::scalar_from_fn(grid.clone(), |x| x[0].cos() / 2f64.sqrt());
        let h2 = TensorField::scalar_from_fn(grid, |x| x[1].cos() / 2f64.sqrt());
        (metric, KTupleCandidate::new(vec![h1, h2]).unwrap())
    }

    #[test]
    fn clifford_torus_patch_solves_exactly() {
        let (metric, cand) = clifford_patch();
        let report = verify_k_tuple(&metric, &cand, DiffScheme::Central2).unwrap();
        assert!(report.residual < 1e-8, "residual {}", report.residual);
        assert!(report.absolute_residual < 1e-8);
        assert!(report.f_positive_definite, "min f eig {}", report.min_f_eigenvalue);
        assert!(report.identity_residual < 1e-10);
    }

    #[test]
    fn permuting_fields_leaves_residual_unchanged() {
        let (metric, cand) = clifford_patch();
        let swapped =
            KTupleCandidate::new(vec![cand.fields[1].clone(), cand.fields[0].clone()]).unwrap();
        let a = verify_k_tuple(&metric, &cand, DiffScheme::Central2).unwrap();
        let b = verify_k_tuple(&metric, &swapped, DiffScheme::Central2).unwrap();
        assert_eq!(a.residual, b.residual);
        assert_eq!(a.absolute_residual, b.absolute_residual);
    }

    fn unit_sphere_2d(spacing: f64, m: usize) -> MetricField {
        let grid = ChartGrid::new(vec![0.8, 0.3], vec![spacing; 2], vec![m; 2]).unwrap();
        generate(&MetricSpec {
            kind: MetricKind::Sphere {
                dim: 2,
                radius: 1.0,
                chart: SphereChart::PolarCap,
            },
            grid: GridSpec::from(grid),
        })
        .unwrap()
    }

    #[test]
    fn zero_field_residual_is_curvature_norm() {
        let metric = unit_sphere_2d(0.02, 9);
        let zero = TensorField::scalar_from_fn(metric.grid.clone(), |_| 0.0);
        let cand = KTupleCandidate::new(vec![zero]).unwrap();
        let report = verify_k_tuple(&metric, &cand, DiffScheme::Central2).unwrap();
        // LHS vanishes identically, so the absolute residual equals ||R||
        let bundle = riemann(&metric, DiffScheme::Central2).unwrap();
        let mut r2 = 0.0;
        // restrict to the points the verifier actually checked (margin 2)
        let grad = covariant_derivative(&metric, &cand.fields[0], DiffScheme::Central2).unwrap();
        let hess = covariant_derivative(&metric, &grad, DiffScheme::Central2).unwrap();
        for flat in 0..metric.grid.len() {
            if bundle.riemann.valid[flat] && hess.valid[flat] {
                r2 += bundle.riemann.at(flat).iter().map(|v| v * v).sum::<f64>();
            }
        }
        assert!((report.absolute_residual - r2.sqrt()).abs() < 1e-12);
        assert!((report.residual - 1.0).abs() < 1e-12);
        assert!(report.f_positive_definite);
    }

    #[test]
    fn sphere_height_field_passes_k1() {
        let metric = unit_sphere_2d(0.02, 21);
        let g = metric.analytic.as_ref().unwrap().g.clone();
        let closure = move |x: &[f64]| g(x);
        let hf = integrate_height(
            &PiSource::Analytic(&closure),
            &metric,
            &[10, 10],
            0.0,
            &[0.0, 0.0],
            &IntegrateOptions::default(),
        )
        .unwrap();
        let cand = KTupleCandidate::new(vec![hf.h.clone()]).unwrap();
        let report = verify_k_tuple(&metric, &cand, DiffScheme::Central2).unwrap();
        assert!(report.residual < 1e-3, "residual {}", report.residual);
        assert!(report.f_positive_definite);
        assert!(report.identity_residual < 1e-6, "identity {}", report.identity_residual);
    }

    #[test]
    fn k1_matches_gauss_residual_of_normalized_hessian() {
        let metric = unit_sphere_2d(0.02, 21);
        let g = metric.analytic.as_ref().unwrap().g.clone();
        let closure = move |x: &[f64]| g(x);
        let hf = integrate_height(
            &PiSource::Analytic(&closure),
            &metric,
            &[10, 10],
            0.0,
            &[0.0, 0.0],
            &IntegrateOptions::default(),
        )
        .unwrap();
        let cand = KTupleCandidate::new(vec![hf.h.clone()]).unwrap();
        let report = verify_k_tuple(&metric, &cand, DiffScheme::Central2).unwrap();

        // Pi = Hess(h) / sqrt(1 - |grad h|^2) from the same FD values
        let grad = covariant_derivative(&metric, &cand.fields[0], DiffScheme::Central2).unwrap();
        let hess = covariant_derivative(&metric, &grad, DiffScheme::Central2).unwrap();
        let mut pi = hess.clone();
        let n = 2;
        for flat in 0..metric.grid.len() {
            if !hess.valid[flat] {
                continue;
            }
            let gv = DVector::from_row_slice(grad.at(flat));
            let ginv = metric.inverse(flat);
            let gns = (gv.transpose() * &ginv * &gv)[(0, 0)];
            let root = (1.0 - gns).sqrt();
            for off in 0..n * n {
                pi.at_mut(flat)[off] = hess.at(flat)[off] / root;
            }
        }
        let bundle = riemann(&metric, DiffScheme::Central2).unwrap();
        let gauss = crate::obstruction::gauss_residual(&pi, &bundle.riemann).unwrap();
        assert!(
            (gauss - report.residual).abs() < 1e-10,
            "gauss {gauss} vs k-residual {}",
            report.residual
        );
    }

    #[test]
    fn singular_coupling_matrix_detected() {
        // |grad h| = 1 in the g-inner product makes A = 0 for k = 1
        let grid = ChartGrid::new(vec![-0.5, -0.5], vec![0.125, 0.125], vec![9, 9]).unwrap();
        let metric = generate(&MetricSpec {
            kind: MetricKind::FlatCartesian { dim: 2 },
            grid: GridSpec::from(grid.clone()),
        })
        .unwrap();
        let h = TensorField::scalar_from_fn(grid, |x| x[0]);
        let cand = KTupleCandidate::new(vec![h]).unwrap();
        assert!(matches!(
            verify_k_tuple(&metric, &cand, DiffScheme::Central2),
            Err(Error::SingularCouplingMatrix { .. })
        ));
    }
}
