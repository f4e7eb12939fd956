use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular sample lattice over a box in chart coordinates.
///
/// All fields in this crate live on such a grid. Indexing is row-major with
/// the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartGrid {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
}

impl ChartGrid {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let dim = origin.len();
        if dim == 0 || spacing.len() != dim || shape.len() != dim {
            return Err(Error::Spec(format!(
                "grid axis counts disagree: origin {}, spacing {}, shape {}",
                origin.len(),
                spacing.len(),
                shape.len()
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Spec("grid spacing must be positive".into()));
        }
        // second-order central differences need an interior margin
        if shape.iter().any(|&m| m < 5) {
            return Err(Error::Spec("every grid axis needs at least 5 points".into()));
        }
        Ok(Self {
            dim,
            origin,
            spacing,
            shape,
        })
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides, last axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dim];
        for a in (0..self.dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        strides
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        let mut f = 0;
        for a in 0..self.dim {
            debug_assert!(idx[a] < self.shape[a]);
            f = f * self.shape[a] + idx[a];
        }
        f
    }

    pub fn unflat(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    /// Chart coordinates of a grid index.
    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.origin[a] + self.spacing[a] * idx[a] as f64)
            .collect()
    }

    pub fn point_of_flat(&self, flat: usize) -> Vec<f64> {
        self.point(&self.unflat(flat))
    }

    /// True when `idx` is at least `margin` points away from every face.
    pub fn is_interior(&self, idx: &[usize], margin: usize) -> bool {
        (0..self.dim).all(|a| idx[a] >= margin && idx[a] + margin < self.shape[a])
    }

    /// Grid index closest to the box center.
    pub fn center(&self) -> Vec<usize> {
        self.shape.iter().map(|&m| m / 2).collect()
    }

    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(|f| self.unflat(f))
    }

    pub fn same_lattice(&self, other: &ChartGrid) -> bool {
        self == other
    }

    /// Base corner and per-axis fractional weights of the cell containing `x`.
    ///
    /// Returns `None` when `x` lies outside the grid box (up to a small slack
    /// at the far face so that the last sample is reachable).
    pub fn cell(&self, x: &[f64]) -> Option<(Vec<usize>, Vec<f64>)> {
        let mut base = vec![0usize; self.dim];
        let mut frac = vec![0f64; self.dim];
        for a in 0..self.dim {
            let t = (x[a] - self.origin[a]) / self.spacing[a];
            if t < -1e-9 || t > (self.shape[a] - 1) as f64 + 1e-9 {
                return None;
            }
            let mut b = t.floor() as isize;
            if b < 0 {
                b = 0;
            }
            if b as usize >= self.shape[a] - 1 {
                b = self.shape[a] as isize - 2;
            }
            base[a] = b as usize;
            frac[a] = (t - b as f64).clamp(0.0, 1.0);
        }
        Some((base, frac))
    }

    /// Multilinear interpolation of a per-point quantity at chart point `x`.
    ///
    /// `value` maps a flat grid index to the sampled value; `None` from any
    /// corner (e.g. masked-out point) makes the interpolation fail.
    pub fn interpolate<F>(&self, x: &[f64], value: F) -> Option<f64>
    where
        F: Fn(usize) -> Option<f64>,
    {
        let (base, frac) = self.cell(x)?;
        let mut acc = 0.0;
        let corners = 1usize << self.dim;
        let mut idx = vec![0usize; self.dim];
        for c in 0..corners {
            let mut w = 1.0;
            for a in 0..self.dim {
                let hi = (c >> a) & 1 == 1;
                idx[a] = base[a] + hi as usize;
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            acc += w * value(self.flat(&idx))?;
        }
        Some(acc)
    }
}
