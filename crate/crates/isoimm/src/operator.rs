use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordered basis of the space of 2-forms in dimension n: index pairs (i, j)
/// with i < j in lexicographic order, N = n(n-1)/2 of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoFormBasis {
    pub dim: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl TwoFormBasis {
    pub fn new(dim: usize) -> Self {
        let mut pairs = Vec::with_capacity(dim * (dim - 1) / 2);
        for i in 0..dim {
            for j in i + 1..dim {
                pairs.push((i, j));
            }
        }
        Self { dim, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn position(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // lexicographic offset for i < j
        i * self.dim - i * (i + 1) / 2 + (j - i - 1)
    }
}

/// The curvature tensor realized as a symmetric operator on 2-forms, in an
/// orthonormal frame: matrix entry ((i,j),(k,l)) = R^hat_ijkl. No extra
/// combinatorial factor, so Pi wedge Pi has eigenvalues lambda_k lambda_p.
#[derive(Debug, Clone)]
pub struct CurvatureOperator {
    pub basis: TwoFormBasis,
    pub matrix: DMatrix<f64>,
    /// Eigenvalues in ascending order.
    pub eigenvalues: DVector<f64>,
    /// Eigenvectors as columns, matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// Asymmetry of the raw input matrix that was projected out.
    pub asymmetry: f64,
}

impl CurvatureOperator {
    /// Builds the operator from frame components of a covariant 4-tensor.
    pub fn from_frame_tensor(rhat: &[f64], dim: usize) -> Self {
        let basis = TwoFormBasis::new(dim);
        let nn = basis.len();
        let n = dim;
        let mut m = DMatrix::zeros(nn, nn);
        for (row, &(i, j)) in basis.pairs.iter().enumerate() {
            for (col, &(k, l)) in basis.pairs.iter().enumerate() {
                m[(row, col)] = rhat[((i * n + j) * n + k) * n + l];
            }
        }
        Self::from_matrix(basis, m)
    }

    pub fn from_matrix(basis: TwoFormBasis, m: DMatrix<f64>) -> Self {
        let sym = (&m + m.transpose()) * 0.5;
        let asymmetry = (&m - m.transpose()).norm() * 0.5;
        let eig = sym.clone().symmetric_eigen();
        // ascending, deterministic order
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| eig.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        Self {
            basis,
            matrix: sym,
            eigenvalues,
            eigenvectors,
            asymmetry,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Ratio of extreme absolute eigenvalues; large values flag near-zero
    /// positive modes whose logarithm is poorly conditioned.
    pub fn condition(&self) -> f64 {
        let min = self.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v.abs()));
        self.max_abs_eigenvalue() / min.max(1e-300)
    }

    pub fn is_positive_definite(&self, positivity_rel: f64) -> bool {
        self.min_eigenvalue() > positivity_rel * self.max_abs_eigenvalue()
    }

    /// Applies a real function to the spectrum, keeping the eigenvectors.
    fn map_spectrum<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        let vals = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&v| f(v)),
        );
        let m = &self.eigenvectors * DMatrix::from_diagonal(&vals) * self.eigenvectors.transpose();
        Self::from_matrix(self.basis.clone(), m)
    }

    /// Logarithm of the operator; defined only on the positive-definite cone.
    pub fn log(&self, positivity_rel: f64) -> Result<Self> {
        if !self.is_positive_definite(positivity_rel) {
            return Err(Error::NotPositiveOperator {
                eigenvalue: self.min_eigenvalue(),
            });
        }
        Ok(self.map_spectrum(f64::ln))
    }

    pub fn exp(&self) -> Self {
        self.map_spectrum(f64::exp)
    }

    /// Unpacks the operator to a fully covariant 4-index frame tensor,
    /// extending by antisymmetry in each pair.
    pub fn to_frame_tensor(&self) -> Vec<f64> {
        let n = self.basis.dim;
        let mut out = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let (i, j, s1) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
                let row = self.basis.position(i, j);
                for c in 0..n {
                    for d in 0..n {
                        if c == d {
                            continue;
                        }
                        let (k, l, s2) = if c < d { (c, d, 1.0) } else { (d, c, -1.0) };
                        let col = self.basis.position(k, l);
                        out[((a * n + b) * n + c) * n + d] = s1 * s2 * self.matrix[(row, col)];
                    }
                }
            }
        }
        out
    }
}

/// Scalar, traceless-Ricci, Schouten and Weyl parts of a curvature-like
/// 4-tensor given in an orthonormal frame (the metric there is the identity,
/// so contractions are plain index sums).
#[derive(Debug, Clone)]
pub struct RStarDecomposition {
    pub dim: usize,
    pub scalar: f64,
    /// Traceless Ricci part S_ab = Ric_ab - (R/n) delta_ab.
    pub traceless_ricci: DMatrix<f64>,
    /// Schouten tensor P_ab = (Ric_ab - R/(2(n-1)) delta_ab) / (n-2).
    pub schouten: DMatrix<f64>,
    /// Fully traceless Weyl part, 4-index frame components.
    pub weyl: Vec<f64>,
}

impl RStarDecomposition {
    pub fn weyl_norm(&self) -> f64 {
        self.weyl.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Largest violation of the curvature symmetries (pair antisymmetry, pair
/// swap, first Bianchi), relative to the tensor's largest entry.
pub fn curvature_symmetry_violation(t: &[f64], n: usize) -> f64 {
    let at = |a: usize, b: usize, c: usize, d: usize| t[((a * n + b) * n + c) * n + d];
    let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let v = at(a, b, c, d);
                    worst = worst.max((v + at(b, a, c, d)).abs());
                    worst = worst.max((v + at(a, b, d, c)).abs());
                    worst = worst.max((v - at(c, d, a, b)).abs());
                    let bianchi = v + at(a, c, d, b) + at(a, d, b, c);
                    worst = worst.max(bianchi.abs());
                }
            }
        }
    }
    worst / scale
}

/// Decomposes a 4-index frame tensor with curvature symmetries into its
/// scalar / traceless-Ricci / Schouten / Weyl parts. Requires n >= 3.
pub fn decompose(t: &[f64], n: usize, symmetry_tol: f64) -> Result<RStarDecomposition> {
    assert!(n >= 3, "decomposition is bypassed for n = 2");
    let violation = curvature_symmetry_violation(t, n);
    if violation > symmetry_tol {
        return Err(Error::NotCurvatureLike { violation });
    }
    let at = |a: usize, b: usize, c: usize, d: usize| t[((a * n + b) * n + c) * n + d];
    // Ric_ij = sum_k T_kikj
    let ricci = DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| at(k, i, k, j)).sum());
    let scalar = ricci.trace();
    let nf = n as f64;
    let traceless_ricci = &ricci - DMatrix::identity(n, n) * (scalar / nf);
    let schouten = (&ricci - DMatrix::identity(n, n) * (scalar / (2.0 * (nf - 1.0)))) / (nf - 2.0);
    let kn = kulkarni_nomizu(&schouten, &DMatrix::identity(n, n));
    let weyl: Vec<f64> = t.iter().zip(kn.iter()).map(|(a, b)| a - b).collect();
    Ok(RStarDecomposition {
        dim: n,
        scalar,
        traceless_ricci,
        schouten,
        weyl,
    })
}

/// Kulkarni-Nomizu product:
/// (P o Q)_abcd = P_ac Q_bd + Q_ac P_bd - P_ad Q_bc - Q_ad P_bc.
pub fn kulkarni_nomizu(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    let mut out = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    out[((a * n + b) * n + c) * n + d] = p[(a, c)] * q[(b, d)]
                        + q[(a, c)] * p[(b, d)]
                        - p[(a, d)] * q[(b, c)]
                        - q[(a, d)] * p[(b, c)];
                }
            }
        }
    }
    out
}

/// Gauss-equation right-hand side: R_pijk = Pi_pj Pi_ik - Pi_pk Pi_ij.
pub fn pi_wedge_pi(pi: &DMatrix<f64>) -> Vec<f64> {
    let n = pi.nrows();
    let mut out = vec![0.0; n * n * n * n];
    for p in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[((p * n + i) * n + j) * n + k] =
                        pi[(p, j)] * pi[(i, k)] - pi[(p, k)] * pi[(i, j)];
                }
            }
        }
    }
    out
}

/// Deterministic random tensor with all curvature symmetries and zero
/// scalar/Ricci parts (pure Weyl), for obstruction fixtures. Needs n >= 4;
/// in lower dimension the Weyl part vanishes identically.
pub fn random_weyl_tensor(n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    use rand::SeedableRng;
    assert!(n >= 4);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sym = || {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0f64));
        (&m + m.transpose()) * 0.5
    };
    let (p, q) = (sym(), sym());
    // a Kulkarni-Nomizu product has every curvature symmetry exactly, and
    // for generic factors a nonzero Weyl part when n >= 4
    let r = kulkarni_nomizu(&p, &q);
    decompose(&r, n, 1e-9)
        .expect("KN product is curvature-like")
        .weyl
}

/// Symmetric matrix exponential via eigendecomposition.
pub fn sym_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let vals = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| v.exp()));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}
