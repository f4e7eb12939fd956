use serde::{Deserialize, Serialize};

use crate::diff::DiffScheme;
use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::flatten::{assemble_immersion, flat_coordinates, flat_metric, FlatChart, ImmersionGrid};
use crate::height::{guaranteed_radius, integrate_height, HeightField, IntegrateOptions, PiSource};
use crate::obstruction::{analyze, ObstructionReport, Tolerances, Verdict};
use crate::presets::MetricSpec;

/// Serializable summary of an obstruction analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeDocument {
    pub verdict: String,
    pub dim: usize,
    pub shape: Vec<usize>,
    pub weyl_star_norm: f64,
    pub gauss_residual: f64,
    pub codazzi_residual: f64,
    pub min_operator_eigenvalue: f64,
    pub conditioning: f64,
    pub flatness: f64,
    pub tolerances: Tolerances,
}

/// Loads a metric spec and runs the full obstruction analysis.
pub fn analyze_spec(
    spec: &MetricSpec,
    tol: &Tolerances,
) -> Result<(MetricField, ObstructionReport)> {
    let metric = crate::presets::generate(spec)?;
    let report = analyze(&metric, tol, DiffScheme::Central2)?;
    Ok((metric, report))
}

pub fn analyze_document(metric: &MetricField, report: &ObstructionReport) -> AnalyzeDocument {
    AnalyzeDocument {
        verdict: report.verdict.to_string(),
        dim: metric.grid.dim,
        shape: metric.grid.shape.clone(),
        weyl_star_norm: report.weyl_star_norm,
        gauss_residual: report.gauss_residual,
        codazzi_residual: report.codazzi_residual,
        min_operator_eigenvalue: report.min_operator_eigenvalue,
        conditioning: report.conditioning,
        flatness: report.flatness,
        tolerances: report.tolerances,
    }
}

/// Knobs for the embedding pipeline on top of the analysis tolerances.
#[derive(Debug, Clone)]
pub struct EmbedOptions {
    /// Grid index seeding the height integration and the flat chart;
    /// defaults to the grid center.
    pub seed_point: Option<Vec<usize>>,
    pub seed_h: f64,
    /// Covariant components of the initial height gradient; defaults to zero.
    pub seed_grad: Option<Vec<f64>>,
    /// Accepted curvature residual of the flattened metric f = g - dh (x) dh.
    /// Looser than the analysis flatness tolerance because f carries the
    /// finite-difference error of the height integration.
    pub flat_tol: f64,
    pub integrate: IntegrateOptions,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            seed_point: None,
            seed_h: 0.0,
            seed_grad: None,
            flat_tol: 1e-2,
            integrate: IntegrateOptions::default(),
        }
    }
}

/// Full output of the embedding pipeline.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub report: ObstructionReport,
    pub height: HeightField,
    pub chart: FlatChart,
    pub immersion: ImmersionGrid,
    /// Relative curvature norm of the flattened metric.
    pub flatness_residual: f64,
    /// Chart radius on which the height field is guaranteed extensible.
    pub guaranteed_radius: f64,
}

/// Serializable summary of an embedding run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedDocument {
    pub verdict: String,
    pub induced_residual: f64,
    pub second_form_residual: f64,
    pub normal_discrepancy: f64,
    pub closure_residual: f64,
    pub flatness_residual: f64,
    pub guaranteed_radius: f64,
}

pub fn embed_document(e: &Embedding) -> EmbedDocument {
    EmbedDocument {
        verdict: e.report.verdict.to_string(),
        induced_residual: e.immersion.induced_residual,
        second_form_residual: e.immersion.second_form_residual,
        normal_discrepancy: e.immersion.normal_discrepancy,
        closure_residual: e.chart.closure_residual,
        flatness_residual: e.flatness_residual,
        guaranteed_radius: e.guaranteed_radius,
    }
}

/// Turns an obstructed verdict into the matching error, `None` otherwise.
pub fn obstruction_error(report: &ObstructionReport) -> Option<Error> {
    match report.verdict {
        Verdict::NotPositiveOperator => Some(Error::NotPositiveOperator {
            eigenvalue: report.min_operator_eigenvalue,
        }),
        Verdict::WeylObstruction => Some(Error::WeylObstruction {
            norm: report.weyl_star_norm,
        }),
        Verdict::CodazziObstruction => Some(Error::CodazziObstruction {
            residual: report.codazzi_residual,
        }),
        _ => None,
    }
}

/// Runs analyze -> height integration -> flattening -> immersion assembly.
/// Obstructed verdicts abort with the matching error.
pub fn embed(metric: &MetricField, tol: &Tolerances, opts: &EmbedOptions) -> Result<Embedding> {
    let report = analyze(metric, tol, DiffScheme::Central2)?;
    if let Some(err) = obstruction_error(&report) {
        return Err(err);
    }
    let pi = report
        .pi
        .clone()
        .ok_or_else(|| Error::Spec("no second fundamental form available for embedding".into()))?;
    let seed = opts
        .seed_point
        .clone()
        .unwrap_or_else(|| metric.grid.center());
    let grad0 = opts
        .seed_grad
        .clone()
        .unwrap_or_else(|| vec![0.0; metric.grid.dim]);
    let height = integrate_height(
        &PiSource::Sampled(&pi),
        metric,
        &seed,
        opts.seed_h,
        &grad0,
        &opts.integrate,
    )?;
    let (f, flatness_residual) = flat_metric(metric, &height, DiffScheme::Central2)?;
    let chart = flat_coordinates(&f, &seed, opts.flat_tol, &opts.integrate)?;
    let immersion = assemble_immersion(&chart, &height, metric, &f, &pi)?;
    let radius = guaranteed_radius(&pi, metric)?;
    Ok(Embedding {
        report,
        height,
        chart,
        immersion,
        flatness_residual,
        guaranteed_radius: radius,
    })
}

/// Process exit code for a verdict: 0 only when nothing obstructs the
/// immersion and nothing is left undetermined.
pub fn verdict_exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Immersible | Verdict::FlatCase => 0,
        _ => 2,
    }
}

/// Process exit code for an error: 2 = obstruction, 3 = input problem,
/// 4 = numerical failure.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::NotPositiveOperator { .. }
        | Error::WeylObstruction { .. }
        | Error::CodazziObstruction { .. } => 2,
        Error::Spec(_) | Error::Schema(_) | Error::Io(_) | Error::GridMismatch => 3,
        _ => 4,
    }
}
