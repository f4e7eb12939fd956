use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Per-point orthonormal frame and coframe of a metric value.
///
/// `frame` holds E^a_i in column i, `coframe` holds theta^i_a in row i; they
/// satisfy E^T g E = id and coframe = frame^{-1}. The frame is the inverse
/// transpose of the lower Cholesky factor of g, which makes it deterministic
/// and smooth in g.
#[derive(Debug, Clone)]
pub struct OrthonormalFrame {
    pub frame: DMatrix<f64>,
    pub coframe: DMatrix<f64>,
}

pub fn orthonormal_frame(g: &DMatrix<f64>) -> Result<OrthonormalFrame> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { index: None })?;
    let l = chol.l();
    let coframe = l.transpose();
    let n = g.nrows();
    let frame = coframe
        .clone()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite { index: None })?;
    Ok(OrthonormalFrame { frame, coframe })
}

impl OrthonormalFrame {
    /// Frame components of a covariant 2-tensor: T^hat_ij = E^a_i E^b_j T_ab.
    pub fn to_frame_sym2(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        self.frame.transpose() * t * &self.frame
    }

    /// Chart components from frame components: T_ab = theta^i_a theta^j_b T^hat_ij.
    pub fn from_frame_sym2(&self, t_hat: &DMatrix<f64>) -> DMatrix<f64> {
        self.coframe.transpose() * t_hat * &self.coframe
    }

    /// Frame components of a fully covariant 4-tensor, by staged contraction.
    pub fn to_frame_cov4(&self, t: &[f64], n: usize) -> Vec<f64> {
        transform_cov4(t, &self.frame, n)
    }

    /// Chart components of a fully covariant 4-tensor from frame components.
    pub fn from_frame_cov4(&self, t_hat: &[f64], n: usize) -> Vec<f64> {
        transform_cov4(t_hat, &self.coframe.transpose(), n)
    }
}

/// Applies a change of basis matrix B (new index j from old index a via
/// B[(a, j)]) to every slot of a covariant 4-tensor.
fn transform_cov4(t: &[f64], b: &DMatrix<f64>, n: usize) -> Vec<f64> {
    debug_assert_eq!(t.len(), n * n * n * n);
    let mut cur = t.to_vec();
    let mut next = vec![0.0; t.len()];
    // one slot at a time; slot order in memory is (s0 s1 s2 s3), s3 fastest
    for _slot in 0..4 {
        next.iter_mut().for_each(|v| *v = 0.0);
        // rotate: contract the first slot, write it as the last
        for a in 0..n {
            for j in 0..n {
                let w = b[(a, j)];
                if w == 0.0 {
                    continue;
                }
                let block = n * n * n;
                for rest in 0..block {
                    next[rest * n + j] += w * cur[a * block + rest];
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_metric_gives_identity_frame() {
        let g = DMatrix::identity(3, 3);
        let fr = orthonormal_frame(&g).unwrap();
        assert!((fr.frame - DMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_metric() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let fr = orthonormal_frame(&g).unwrap();
        assert!((fr.frame[(1, 1)] - 0.5).abs() < 1e-14);
        assert!((fr.coframe[(1, 1)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_spd_frames_are_orthonormal() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.gen_range(2..=4);
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let g = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
            let fr = orthonormal_frame(&g).unwrap();
            let delta = fr.frame.transpose() * &g * &fr.frame;
            assert!((delta - DMatrix::identity(n, n)).norm() < 1e-12);
            let id = &fr.frame * &fr.coframe;
            assert!((id - DMatrix::identity(n, n)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        assert!(orthonormal_frame(&g).is_err());
    }

    #[test]
    fn cov4_transform_matches_naive() {
        let mut rng = StdRng::seed_from_u64(3);
        let n = 3;
        let t: Vec<f64> = (0..n * n * n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = {
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0f64));
            &a * a.transpose() + DMatrix::identity(n, n)
        };
        let fr = orthonormal_frame(&g).unwrap();
        let fast = fr.to_frame_cov4(&t, n);
        let e = &fr.frame;
        let mut slow = vec![0.0; t.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = 0.0;
                        for a in 0..n {
                            for b in 0..n {
                                for c in 0..n {
                                    for d in 0..n {
                                        acc += t[((a * n + b) * n + c) * n + d]
                                            * e[(a, i)]
                                            * e[(b, j)]
                                            * e[(c, k)]
                                            * e[(d, l)];
                                    }
                                }
                            }
                        }
                        slow[((i * n + j) * n + k) * n + l] = acc;
                    }
                }
            }
        }
        let err: f64 = fast
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }
}
