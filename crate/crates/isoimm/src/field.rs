use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::ChartGrid;

/// Variance of one tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Covariant,
    Contravariant,
}

/// A tensor field sampled on a grid: one multi-index array per point.
///
/// All indices range over the chart dimension `n`; components are stored
/// densely per point in slot order, last slot fastest.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub grid: ChartGrid,
    pub variance: Vec<Variance>,
    pub data: Vec<f64>,
    pub valid: Vec<bool>,
}

impl TensorField {
    pub fn zeros(grid: ChartGrid, variance: Vec<Variance>) -> Self {
        let comps = grid.dim.pow(variance.len() as u32);
        let npts = grid.len();
        Self {
            grid,
            variance,
            data: vec![0.0; npts * comps],
            valid: vec![true; npts],
        }
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn comp_count(&self) -> usize {
        self.grid.dim.pow(self.rank() as u32)
    }

    pub fn comp_offset(&self, comp: &[usize]) -> usize {
        debug_assert_eq!(comp.len(), self.rank());
        let n = self.grid.dim;
        comp.iter().fold(0, |acc, &c| acc * n + c)
    }

    pub fn at(&self, flat: usize) -> &[f64] {
        let c = self.comp_count();
        &self.data[flat * c..(flat + 1) * c]
    }

    pub fn at_mut(&mut self, flat: usize) -> &mut [f64] {
        let c = self.comp_count();
        &mut self.data[flat * c..(flat + 1) * c]
    }

    pub fn get(&self, flat: usize, comp: &[usize]) -> f64 {
        self.data[flat * self.comp_count() + self.comp_offset(comp)]
    }

    pub fn set(&mut self, flat: usize, comp: &[usize], v: f64) {
        let off = flat * self.comp_count() + self.comp_offset(comp);
        self.data[off] = v;
    }

    /// Builds a scalar field from a closure over chart coordinates.
    pub fn scalar_from_fn<F: Fn(&[f64]) -> f64>(grid: ChartGrid, f: F) -> Self {
        let mut out = Self::zeros(grid, vec![]);
        for flat in 0..out.grid.len() {
            let x = out.grid.point_of_flat(flat);
            out.data[flat] = f(&x);
        }
        out
    }

    /// Builds a symmetric covariant 2-tensor field from a matrix-valued closure.
    pub fn sym2_from_fn<F: Fn(&[f64]) -> DMatrix<f64>>(grid: ChartGrid, f: F) -> Self {
        let mut out = Self::zeros(grid, vec![Variance::Covariant, Variance::Covariant]);
        let n = out.grid.dim;
        for flat in 0..out.grid.len() {
            let x = out.grid.point_of_flat(flat);
            let m = f(&x);
            let dst = out.at_mut(flat);
            for a in 0..n {
                for b in 0..n {
                    dst[a * n + b] = m[(a, b)];
                }
            }
        }
        out
    }

    /// Per-point view as an n x n matrix (rank-2 fields only).
    pub fn matrix_at(&self, flat: usize) -> DMatrix<f64> {
        assert_eq!(self.rank(), 2);
        let n = self.grid.dim;
        DMatrix::from_row_slice(n, n, self.at(flat))
    }

    /// Largest relative violation of symmetry in the two given slots.
    pub fn symmetry_violation(&self, slot_a: usize, slot_b: usize) -> f64 {
        let n = self.grid.dim;
        let rank = self.rank();
        let mut comp = vec![0usize; rank];
        let mut worst = 0.0f64;
        for flat in 0..self.grid.len() {
            if !self.valid[flat] {
                continue;
            }
            let vals = self.at(flat);
            let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for off in 0..self.comp_count() {
                let mut o = off;
                for s in (0..rank).rev() {
                    comp[s] = o % n;
                    o /= n;
                }
                comp.swap(slot_a, slot_b);
                let swapped = vals[self.comp_offset(&comp)];
                comp.swap(slot_a, slot_b);
                worst = worst.max((vals[off] - swapped).abs() / scale);
            }
        }
        worst
    }
}

pub type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
/// First derivatives: axis c -> matrix of d_c g_ab.
pub type MetricJetFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;
/// Second derivatives: axes (d, c) -> matrix of d_d d_c g_ab.
pub type MetricJet2Fn = Arc<dyn Fn(&[f64]) -> Vec<Vec<DMatrix<f64>>> + Send + Sync>;

/// Exact evaluators attached to analytic fixtures; they override finite
/// differences wherever derivatives of g are needed.
#[derive(Clone)]
pub struct AnalyticMetric {
    pub g: MetricFn,
    pub dg: Option<MetricJetFn>,
    pub ddg: Option<MetricJet2Fn>,
}

impl std::fmt::Debug for AnalyticMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticMetric")
            .field("dg", &self.dg.is_some())
            .field("ddg", &self.ddg.is_some())
            .finish()
    }
}

/// Samples of a symmetric positive-definite bilinear form g_ab per grid point.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub grid: ChartGrid,
    values: TensorField,
    pub analytic: Option<AnalyticMetric>,
}

impl MetricField {
    /// Wraps sampled values, enforcing symmetry and positive-definiteness at
    /// every valid point.
    pub fn new(values: TensorField) -> Result<Self> {
        assert_eq!(values.rank(), 2);
        let sym = values.symmetry_violation(0, 1);
        if sym > 1e-9 {
            return Err(Error::Schema(format!(
                "metric not symmetric (relative violation {sym:.3e})"
            )));
        }
        for flat in 0..values.grid.len() {
            if !values.valid[flat] {
                continue;
            }
            let m = values.matrix_at(flat);
            if m.clone().cholesky().is_none() {
                return Err(Error::NotPositiveDefinite {
                    index: Some(values.grid.unflat(flat)),
                });
            }
        }
        Ok(Self {
            grid: values.grid.clone(),
            values,
            analytic: None,
        })
    }

    pub fn from_analytic(grid: ChartGrid, analytic: AnalyticMetric) -> Result<Self> {
        let g = analytic.g.clone();
        let values = TensorField::sym2_from_fn(grid, move |x| (g)(x));
        let mut out = Self::new(values)?;
        out.analytic = Some(analytic);
        Ok(out)
    }

    /// Drops the analytic evaluators, forcing the finite-difference path.
    pub fn without_analytic(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.clone(),
            analytic: None,
        }
    }

    pub fn values(&self) -> &TensorField {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.values.valid
    }

    pub fn set_valid(&mut self, valid: Vec<bool>) {
        assert_eq!(valid.len(), self.grid.len());
        self.values.valid = valid;
    }

    pub fn value(&self, flat: usize) -> DMatrix<f64> {
        self.values.matrix_at(flat)
    }

    pub fn inverse(&self, flat: usize) -> DMatrix<f64> {
        self.value(flat)
            .try_inverse()
            .expect("metric value not invertible")
    }

    /// Metric value at an arbitrary chart point: analytic when available,
    /// multilinear interpolation of the samples otherwise.
    pub fn value_at_point(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        if let Some(a) = &self.analytic {
            return Some((a.g)(x));
        }
        let n = self.grid.dim;
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let v = self.grid.interpolate(x, |flat| {
                    self.values.valid[flat].then(|| self.values.at(flat)[a * n + b])
                })?;
                m[(a, b)] = v;
            }
        }
        Some(m)
    }

    /// Smallest eigenvalue over the valid points.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut min = f64::INFINITY;
        for flat in 0..self.grid.len() {
            if !self.values.valid[flat] {
                continue;
            }
            let eig = self.value(flat).symmetric_eigenvalues();
            min = min.min(eig.min());
        }
        min
    }
}
