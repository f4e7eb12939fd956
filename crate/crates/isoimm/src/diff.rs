use crate::field::TensorField;
use crate::grid::ChartGrid;

/// Finite-difference scheme for first derivatives of sampled fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffScheme {
    /// 2nd-order central differences (default).
    #[default]
    Central2,
    /// 4th-order central differences.
    Central4,
}

impl DiffScheme {
    pub fn margin(self) -> usize {
        match self {
            DiffScheme::Central2 => 1,
            DiffScheme::Central4 => 2,
        }
    }
}

/// Central difference of a per-point quantity along `axis`.
///
/// `value` maps a flat index to the sampled value, returning `None` on masked
/// points; the derivative is `None` whenever the stencil is incomplete.
pub fn partial<F>(grid: &ChartGrid, idx: &[usize], axis: usize, scheme: DiffScheme, value: F) -> Option<f64>
where
    F: Fn(usize) -> Option<f64>,
{
    let m = scheme.margin();
    if idx[axis] < m || idx[axis] + m >= grid.shape[axis] {
        return None;
    }
    let h = grid.spacing[axis];
    let mut shifted = idx.to_vec();
    let mut sample = |offset: isize| -> Option<f64> {
        shifted[axis] = (idx[axis] as isize + offset) as usize;
        value(grid.flat(&shifted))
    };
    match scheme {
        DiffScheme::Central2 => {
            let p = sample(1)?;
            let n = sample(-1)?;
            Some((p - n) / (2.0 * h))
        }
        DiffScheme::Central4 => {
            let p2 = sample(2)?;
            let p1 = sample(1)?;
            let n1 = sample(-1)?;
            let n2 = sample(-2)?;
            Some((-p2 + 8.0 * p1 - 8.0 * n1 + n2) / (12.0 * h))
        }
    }
}

/// Derivative of one component of a tensor field at a grid index.
pub fn partial_component(
    field: &TensorField,
    idx: &[usize],
    axis: usize,
    comp_offset: usize,
    scheme: DiffScheme,
) -> Option<f64> {
    let c = field.comp_count();
    partial(&field.grid, idx, axis, scheme, |flat| {
        field.valid[flat].then(|| field.data[flat * c + comp_offset])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TensorField;

    fn grid1d() -> ChartGrid {
        ChartGrid::new(vec![0.0], vec![0.05], vec![41]).unwrap()
    }

    #[test]
    fn central2_is_second_order() {
        let g = grid1d();
        let f = TensorField::scalar_from_fn(g.clone(), |x| x[0].sin());
        let idx = [20usize];
        let d = partial_component(&f, &idx, 0, 0, DiffScheme::Central2).unwrap();
        let x = g.point(&idx)[0];
        assert!((d - x.cos()).abs() < 0.05f64.powi(2));
    }

    #[test]
    fn central4_beats_central2() {
        let g = grid1d();
        let f = TensorField::scalar_from_fn(g.clone(), |x| x[0].sin());
        let idx = [20usize];
        let x = g.point(&idx)[0];
        let e2 = (partial_component(&f, &idx, 0, 0, DiffScheme::Central2).unwrap() - x.cos()).abs();
        let e4 = (partial_component(&f, &idx, 0, 0, DiffScheme::Central4).unwrap() - x.cos()).abs();
        assert!(e4 < e2 / 10.0);
    }

    #[test]
    fn stencil_needs_margin() {
        let g = grid1d();
        let f = TensorField::scalar_from_fn(g, |x| x[0]);
        assert!(partial_component(&f, &[0], 0, 0, DiffScheme::Central2).is_none());
        assert!(partial_component(&f, &[1], 0, 0, DiffScheme::Central4).is_none());
        assert!(partial_component(&f, &[2], 0, 0, DiffScheme::Central4).is_some());
    }

    #[test]
    fn masked_point_blocks_stencil() {
        let g = grid1d();
        let mut f = TensorField::scalar_from_fn(g, |x| x[0]);
        f.valid[11] = false;
        assert!(partial_component(&f, &[10], 0, 0, DiffScheme::Central2).is_none());
        assert!(partial_component(&f, &[20], 0, 0, DiffScheme::Central2).is_some());
    }
}
