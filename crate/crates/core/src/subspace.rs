//! Orthonormalization of a dictionary over the grid, numerical dimension,
//! Christoffel values, sampling weights and induced measures.
//!
//! Given dictionary values psi_j(z_l) on a K-point grid, the scaled matrix
//! B[l][j] = psi_j(z_l) / sqrt(K) is factorized by a thin SVD. Left singular
//! vectors u_j with sigma_j / sigma_1 above the tolerance form an orthonormal
//! basis phi_j(z_l) = sqrt(K) u_{lj} of the numerically resolved span; the
//! per-basis-function induced measures are mu_j(z_l) = u_{lj}^2 and the
//! reciprocal Christoffel function is their scaled average,
//! 𝒦(z_l) = (K/n) sum_j u_{lj}^2, with sampling weights w = 1/𝒦.
//!
//! The factorization runs as a QR of the tall matrix followed by an SVD of
//! the small triangular factor, and the resulting left vectors are
//! renormalized columnwise. That keeps the basis orthonormal to close to
//! machine precision even for singular-value ratios near 1e-12, which a
//! Gram-matrix route would square away.

use crate::error::{Error, Result};
use crate::sample_grid::DiscreteDistribution;
use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};

/// Dictionary values on the grid: entry (l, j) is psi_j(z_l). Requires at
/// least as many grid points as dictionary elements.
#[derive(Debug, Clone)]
pub struct DictionaryEvaluation {
    values: Array2<f64>,
}

impl DictionaryEvaluation {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (k, n) = values.dim();
        if k == 0 || n == 0 {
            return Err(Error::EmptyGrid);
        }
        if n > k {
            return Err(Error::DictionaryTooLarge { n, k });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dictionary values"));
        }
        Ok(DictionaryEvaluation { values })
    }

    pub fn grid_size(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
}

/// B[l][j] = psi_j(z_l) / sqrt(K).
pub fn assemble_matrix(dict: &DictionaryEvaluation) -> Array2<f64> {
    let scale = 1.0 / (dict.grid_size() as f64).sqrt();
    &dict.values * scale
}

/// Thin SVD of the scaled dictionary matrix, truncated at the numerical
/// dimension.
#[derive(Debug, Clone)]
pub struct SubspaceFactorization {
    numerical_dimension: usize,
    /// All N singular values, descending.
    singular_values: Vec<f64>,
    /// K x n, orthonormal columns.
    left: Array2<f64>,
    /// N x n right singular vectors for the retained directions.
    right: Array2<f64>,
    eps_tol: f64,
    grid_size: usize,
}

/// Factorizes B and keeps the directions with sigma_i / sigma_1 > eps_tol.
pub fn factorize(b: ArrayView2<'_, f64>, eps_tol: f64) -> Result<SubspaceFactorization> {
    let (k, n_dict) = b.dim();
    if k == 0 || n_dict == 0 {
        return Err(Error::EmptyGrid);
    }
    if n_dict > k {
        return Err(Error::DictionaryTooLarge { n: n_dict, k });
    }
    if !(eps_tol > 0.0 && eps_tol < 1.0) {
        return Err(Error::InvalidTolerance(eps_tol));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scaled dictionary matrix"));
    }

    let b_na = DMatrix::from_row_iterator(k, n_dict, b.iter().copied());
    let qr = b_na.qr();
    let q = qr.q();
    let svd = qr.r().svd(true, true);
    let u_small = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");

    // nalgebra sorts descending already; keep an explicit order anyway so the
    // contract does not rest on that detail.
    let mut order: Vec<usize> = (0..n_dict).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).expect("finite")
    });
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let sigma_max = singular_values[0];
    if sigma_max <= 0.0 {
        return Err(Error::TrivialSubspace);
    }
    let n = singular_values.iter().filter(|s| **s / sigma_max > eps_tol).count();

    // Left vectors of the retained directions, recombined through Q and
    // renormalized so each column has unit norm to rounding.
    let mut left_na = DMatrix::zeros(k, n);
    for (out_col, &src) in order[..n].iter().enumerate() {
        let col = &q * u_small.column(src);
        left_na.set_column(out_col, &col);
    }
    for mut col in left_na.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }

    let left = Array2::from_shape_fn((k, n), |(i, j)| left_na[(i, j)]);
    let right = Array2::from_shape_fn((n_dict, n), |(i, j)| v_t[(order[j], i)]);

    Ok(SubspaceFactorization {
        numerical_dimension: n,
        singular_values,
        left,
        right,
        eps_tol,
        grid_size: k,
    })
}

impl SubspaceFactorization {
    pub fn numerical_dimension(&self) -> usize {
        self.numerical_dimension
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// K x n matrix of left singular vectors u.
    pub fn left_vectors(&self) -> ArrayView2<'_, f64> {
        self.left.view()
    }

    /// N x n matrix of right singular vectors.
    pub fn right_vectors(&self) -> ArrayView2<'_, f64> {
        self.right.view()
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn eps_tol(&self) -> f64 {
        self.eps_tol
    }

    /// Orthonormal basis values phi_j(z_l) = sqrt(K) u_{lj}.
    pub fn orthonormal_values(&self) -> Array2<f64> {
        &self.left * (self.grid_size as f64).sqrt()
    }

    /// Reciprocal Christoffel function 𝒦(z_l) = (K/n) sum_j u_{lj}^2.
    /// Its grid average is exactly 1 up to rounding.
    pub fn christoffel_values(&self) -> Array1<f64> {
        let scale = self.grid_size as f64 / self.numerical_dimension as f64;
        let mut out = Array1::zeros(self.grid_size);
        for col in self.left.columns() {
            for (acc, &u) in out.iter_mut().zip(col.iter()) {
                *acc += u * u;
            }
        }
        out * scale
    }

    /// Sampling weights w(z_l) = 1/𝒦(z_l). Points where the whole retained
    /// basis vanishes get +inf, and carry probability 0 under every induced
    /// measure, so they are never drawn.
    pub fn weight_values(&self) -> Array1<f64> {
        self.christoffel_values().mapv(|c| 1.0 / c)
    }

    /// The j-th induced measure mu_j(z_l) = u_{lj}^2.
    pub fn induced_measure(&self, j: usize) -> Result<DiscreteDistribution> {
        if j >= self.numerical_dimension {
            return Err(Error::InvalidDistribution(format!(
                "measure index {j} out of range for dimension {}",
                self.numerical_dimension
            )));
        }
        DiscreteDistribution::new(self.left.column(j).iter().map(|u| u * u).collect())
    }

    /// All n induced measures, in descending singular-value order.
    pub fn induced_measures(&self) -> Result<Vec<DiscreteDistribution>> {
        (0..self.numerical_dimension).map(|j| self.induced_measure(j)).collect()
    }
}
