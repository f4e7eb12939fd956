use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{
    covariant_derivative, field_norm, relative_curvature_norm, riemann, CurvatureBundle,
};
use crate::diff::DiffScheme;
use crate::error::{Error, Result};
use crate::field::{MetricField, TensorField, Variance};
use crate::frame::orthonormal_frame;
use crate::operator::{decompose, pi_wedge_pi, sym_exp, CurvatureOperator};

/// Tolerances for every obstruction decision, all relative.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative curvature norm below which the metric counts as flat.
    pub flatness: f64,
    /// Weyl* norm (relative to 1 + the R* norm) above which the Gauss
    /// equation is unsolvable.
    pub weyl: f64,
    /// Codazzi residual bound; one finite-difference level noisier than Weyl.
    pub codazzi: f64,
    /// Gauss residual bound for recovered fields.
    pub gauss: f64,
    /// Operator positivity: min eigenvalue must exceed this times max |eig|.
    pub positivity: f64,
    /// Accepted violation of the curvature symmetries of ln(R).
    pub symmetry: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            flatness: 1e-8,
            weyl: 1e-6,
            codazzi: 1e-5,
            gauss: 1e-6,
            positivity: 1e-9,
            symmetry: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// All obstructions vanish; a local isometric immersion into R^{n+1}
    /// exists with the recovered second fundamental form.
    Immersible,
    /// Curvature is zero to tolerance; the chart immerses with Pi = 0, h = 0.
    FlatCase,
    /// ln(R) undefined: the curvature operator has a nonpositive eigenvalue.
    NotPositiveOperator,
    /// Weyl part of ln(R) nonzero: the Gauss equation has no solution.
    WeylObstruction,
    /// Gauss solvable but the recovered Pi fails the Codazzi equation.
    CodazziObstruction,
    /// n = 2: Gauss underdetermines Pi; the umbilic representative is
    /// reported, without an immersibility claim.
    SurfaceCase,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Immersible => "Immersible",
            Verdict::FlatCase => "FlatCase",
            Verdict::NotPositiveOperator => "NotPositiveOperator",
            Verdict::WeylObstruction => "WeylObstruction",
            Verdict::CodazziObstruction => "CodazziObstruction",
            Verdict::SurfaceCase => "SurfaceCase",
        };
        f.write_str(s)
    }
}

/// Result of the full obstruction analysis of one chart.
#[derive(Debug, Clone)]
pub struct ObstructionReport {
    pub verdict: Verdict,
    /// max over points of ||C*|| / (1 + ||R*||).
    pub weyl_star_norm: f64,
    pub gauss_residual: f64,
    pub codazzi_residual: f64,
    /// min over points of the smallest curvature-operator eigenvalue.
    pub min_operator_eigenvalue: f64,
    /// max over points of the operator's |eig| spread; large values flag
    /// near-zero positive modes whose ln is ill-conditioned.
    pub conditioning: f64,
    /// Relative curvature norm used by the flatness test.
    pub flatness: f64,
    /// Recovered second fundamental form, when one exists.
    pub pi: Option<TensorField>,
    pub tolerances: Tolerances,
}

/// Per-point outcome of Pi recovery.
#[derive(Debug, Clone)]
pub struct PointRecovery {
    /// Pi_ab in chart coordinates, positive-trace branch.
    pub pi: DMatrix<f64>,
    /// ||C*|| / (1 + ||R*||) at the point.
    pub weyl_rel: f64,
    pub min_eigenvalue: f64,
    pub condition: f64,
}

/// Recovers the candidate second fundamental form at one point from the
/// chart components of R_pijk and the metric value, via
/// Pi = theta^T exp(P*) theta with P* the Schouten tensor of ln(R).
///
/// Always attaches the point's Weyl* norm; enforcing the Weyl tolerance is
/// the caller's job (see [`recover_pi`]).
pub fn recover_pi_at(
    r_chart: &[f64],
    g: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<PointRecovery> {
    let n = g.nrows();
    let fr = orthonormal_frame(g)?;
    let rhat = fr.to_frame_cov4(r_chart, n);
    let op = CurvatureOperator::from_frame_tensor(&rhat, n);
    let min_eigenvalue = op.min_eigenvalue();
    let condition = op.condition();
    let rstar = op.log(tol.positivity)?;
    let rstar_tensor = rstar.to_frame_tensor();
    let dec = decompose(&rstar_tensor, n, tol.symmetry)?;
    let rstar_norm = rstar_tensor.iter().map(|v| v * v).sum::<f64>().sqrt();
    let weyl_rel = dec.weyl_norm() / (1.0 + rstar_norm);
    let pihat = sym_exp(&dec.schouten);
    let pi = fr.from_frame_sym2(&pihat);
    Ok(PointRecovery {
        pi,
        weyl_rel,
        min_eigenvalue,
        condition,
    })
}

/// [`recover_pi_at`] with the Weyl obstruction enforced as an error.
pub fn recover_pi(r_chart: &[f64], g: &DMatrix<f64>, tol: &Tolerances) -> Result<PointRecovery> {
    let rec = recover_pi_at(r_chart, g, tol)?;
    if rec.weyl_rel > tol.weyl {
        return Err(Error::WeylObstruction { norm: rec.weyl_rel });
    }
    Ok(rec)
}

/// Relative Frobenius norm of the Gauss defect Pi^Pi - R over the points
/// where both fields are valid.
pub fn gauss_residual(pi: &TensorField, riemann_field: &TensorField) -> Result<f64> {
    if !pi.grid.same_lattice(&riemann_field.grid) {
        return Err(Error::GridMismatch);
    }
    let n = pi.grid.dim;
    let mut diff2 = 0.0;
    let mut r2 = 0.0;
    let mut w2 = 0.0;
    for flat in 0..pi.grid.len() {
        if !pi.valid[flat] || !riemann_field.valid[flat] {
            continue;
        }
        let wedge = pi_wedge_pi(&pi.matrix_at(flat));
        let r = riemann_field.at(flat);
        debug_assert_eq!(r.len(), n * n * n * n);
        for (w, rv) in wedge.iter().zip(r.iter()) {
            diff2 += (w - rv) * (w - rv);
            r2 += rv * rv;
            w2 += w * w;
        }
    }
    let denom = r2.max(w2).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(diff2.sqrt() / denom)
}

/// Codazzi residual: norm of Y_abc = (Pi_ab;c - Pi_ac;b)/2 relative to
/// ||grad Pi|| + ||Pi||.
pub fn codazzi_residual(
    pi: &TensorField,
    metric: &MetricField,
    scheme: DiffScheme,
) -> Result<f64> {
    if !pi.grid.same_lattice(&metric.grid) {
        return Err(Error::GridMismatch);
    }
    let nabla = covariant_derivative(metric, pi, scheme)?;
    let n = pi.grid.dim;
    let mut y = nabla.clone();
    for flat in 0..nabla.grid.len() {
        if !nabla.valid[flat] {
            continue;
        }
        let src = nabla.at(flat).to_vec();
        let dst = y.at_mut(flat);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let v = src[(a * n + b) * n + c] - src[(a * n + c) * n + b];
                    dst[(a * n + b) * n + c] = 0.5 * v;
                }
            }
        }
    }
    let denom = field_norm(&nabla) + field_norm(pi);
    Ok(field_norm(&y) / denom.max(1e-300))
}

enum PointOutcome {
    Recovered(PointRecovery),
    NotPositive { min_eigenvalue: f64, condition: f64 },
}

/// Full obstruction analysis of one chart: flatness, the n = 2 branch,
/// operator positivity, the Weyl* obstruction, Pi recovery and the Gauss and
/// Codazzi checks, in that order.
pub fn analyze(metric: &MetricField, tol: &Tolerances, scheme: DiffScheme) -> Result<ObstructionReport> {
    let n = metric.grid.dim;
    assert!(n >= 2, "analysis needs chart dimension >= 2");
    let bundle = riemann(metric, scheme)?;
    let flatness = relative_curvature_norm(&bundle, metric);

    if flatness < tol.flatness {
        // flat chart: Pi = 0 solves Gauss and Codazzi exactly; the reported
        // Gauss residual is the deviation from flatness itself
        let mut pi = TensorField::zeros(metric.grid.clone(), vec![Variance::Covariant; 2]);
        pi.valid = bundle.riemann.valid.clone();
        return Ok(ObstructionReport {
            verdict: Verdict::FlatCase,
            weyl_star_norm: 0.0,
            gauss_residual: flatness,
            codazzi_residual: 0.0,
            min_operator_eigenvalue: 0.0,
            conditioning: f64::INFINITY,
            flatness,
            pi: Some(pi),
            tolerances: *tol,
        });
    }

    if n == 2 {
        return analyze_surface(metric, &bundle, tol, scheme, flatness);
    }

    let grid = metric.grid.clone();
    let outcomes: Vec<Option<Result<PointOutcome>>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            if !bundle.riemann.valid[flat] {
                return None;
            }
            let g = metric.value(flat);
            let r = bundle.riemann.at(flat);
            let out = match recover_pi_at(r, &g, tol) {
                Ok(rec) => Ok(PointOutcome::Recovered(rec)),
                Err(Error::NotPositiveOperator { eigenvalue }) => {
                    // rebuild just the spectrum data for the report
                    let fr = match orthonormal_frame(&g) {
                        Ok(fr) => fr,
                        Err(e) => return Some(Err(e)),
                    };
                    let op = CurvatureOperator::from_frame_tensor(&fr.to_frame_cov4(r, n), n);
                    Ok(PointOutcome::NotPositive {
                        min_eigenvalue: eigenvalue,
                        condition: op.condition(),
                    })
                }
                Err(e) => Err(e),
            };
            Some(out)
        })
        .collect();

    let mut min_eig = f64::INFINITY;
    let mut max_cond = 0.0f64;
    let mut max_weyl = 0.0f64;
    let mut any_not_positive = false;
    let mut pi = TensorField::zeros(grid.clone(), vec![Variance::Covariant; 2]);
    pi.valid = vec![false; grid.len()];
    for (flat, o) in outcomes.into_iter().enumerate() {
        let Some(o) = o else { continue };
        match o? {
            PointOutcome::Recovered(rec) => {
                min_eig = min_eig.min(rec.min_eigenvalue);
                max_cond = max_cond.max(rec.condition);
                max_weyl = max_weyl.max(rec.weyl_rel);
                let dst = pi.at_mut(flat);
                for a in 0..n {
                    for b in 0..n {
                        dst[a * n + b] = rec.pi[(a, b)];
                    }
                }
                pi.valid[flat] = true;
            }
            PointOutcome::NotPositive {
                min_eigenvalue,
                condition,
            } => {
                any_not_positive = true;
                min_eig = min_eig.min(min_eigenvalue);
                max_cond = max_cond.max(condition);
            }
        }
    }

    if any_not_positive {
        return Ok(ObstructionReport {
            verdict: Verdict::NotPositiveOperator,
            weyl_star_norm: max_weyl,
            gauss_residual: f64::NAN,
            codazzi_residual: f64::NAN,
            min_operator_eigenvalue: min_eig,
            conditioning: max_cond,
            flatness,
            pi: None,
            tolerances: *tol,
        });
    }

    let gauss = gauss_residual(&pi, &bundle.riemann)?;

    if max_weyl > tol.weyl {
        return Ok(ObstructionReport {
            verdict: Verdict::WeylObstruction,
            weyl_star_norm: max_weyl,
            gauss_residual: gauss,
            codazzi_residual: f64::NAN,
            min_operator_eigenvalue: min_eig,
            conditioning: max_cond,
            flatness,
            pi: None,
            tolerances: *tol,
        });
    }

    let codazzi = codazzi_residual(&pi, metric, scheme)?;
    let verdict = if codazzi > tol.codazzi {
        Verdict::CodazziObstruction
    } else {
        Verdict::Immersible
    };
    Ok(ObstructionReport {
        verdict,
        weyl_star_norm: max_weyl,
        gauss_residual: gauss,
        codazzi_residual: codazzi,
        min_operator_eigenvalue: min_eig,
        conditioning: max_cond,
        flatness,
        pi: Some(pi),
        tolerances: *tol,
    })
}

/// n = 2 branch: Gaussian curvature K = R_0101 / det g; the umbilic pick
/// Pi = sqrt(K) g is one of infinitely many Gauss solutions.
fn analyze_surface(
    metric: &MetricField,
    bundle: &CurvatureBundle,
    tol: &Tolerances,
    scheme: DiffScheme,
    flatness: f64,
) -> Result<ObstructionReport> {
    let grid = &metric.grid;
    let mut pi = TensorField::zeros(grid.clone(), vec![Variance::Covariant; 2]);
    pi.valid = vec![false; grid.len()];
    let mut min_k = f64::INFINITY;
    let mut all_positive = true;
    for flat in 0..grid.len() {
        if !bundle.riemann.valid[flat] {
            continue;
        }
        let g = metric.value(flat);
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let k = bundle.riemann.get(flat, &[0, 1, 0, 1]) / det;
        min_k = min_k.min(k);
        if k > 0.0 {
            let sk = k.sqrt();
            let dst = pi.at_mut(flat);
            for a in 0..2 {
                for b in 0..2 {
                    dst[a * 2 + b] = sk * g[(a, b)];
                }
            }
            pi.valid[flat] = true;
        } else {
            all_positive = false;
        }
    }
    let (gauss, codazzi, pi_out) = if all_positive {
        let gauss = gauss_residual(&pi, &bundle.riemann)?;
        let codazzi = codazzi_residual(&pi, metric, scheme)?;
        (gauss, codazzi, Some(pi))
    } else {
        (f64::NAN, f64::NAN, None)
    };
    Ok(ObstructionReport {
        verdict: Verdict::SurfaceCase,
        weyl_star_norm: 0.0,
        gauss_residual: gauss,
        codazzi_residual: codazzi,
        min_operator_eigenvalue: min_k,
        conditioning: if min_k.abs() > 0.0 { 1.0 } else { f64::INFINITY },
        flatness,
        pi: pi_out,
        tolerances: *tol,
    })
}
