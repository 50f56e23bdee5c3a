//! Test errors and the sampling stability constant.

use crate::cas_sampler::SampleSet;
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream, StreamId};
use crate::subspace::SubspaceFactorization;
use crate::test_functions::TargetFunction;
use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::distributions::{Distribution, Uniform};

/// Uniform Monte Carlo test points with the target values at them. The same
/// (size, dimension, seed) always produces the same set, independently of
/// every training-side stream.
#[derive(Debug, Clone)]
pub struct TestSet {
    points: Array2<f64>,
    values: Array2<f64>,
    seed: u64,
}

impl TestSet {
    pub fn generate(f: &TargetFunction, size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyGrid);
        }
        let mut rng = RngStream::substream(seed, StreamId::new(Purpose::TestSet, 0, 0, 0));
        let coord = Uniform::new_inclusive(-1.0f64, 1.0);
        let mut points = Array2::zeros((size, f.dimension()));
        for mut row in points.rows_mut() {
            for v in row.iter_mut() {
                *v = coord.sample(&mut rng);
            }
        }
        let values = f.eval_rows(points.view())?;
        Ok(TestSet { points, values, seed })
    }

    /// Wraps externally supplied test tables.
    pub fn from_tables(points: Array2<f64>, values: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyGrid);
        }
        if points.nrows() != values.nrows() {
            return Err(Error::LengthMismatch(format!(
                "{} test points vs {} value rows",
                points.nrows(),
                values.nrows()
            )));
        }
        if points.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("test tables"));
        }
        Ok(TestSet { points, values, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.points.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
}

/// Relative discrete L2 error pooled over all output components:
/// ||pred - truth|| / ||truth|| over the test set.
pub fn relative_l2_error(pred: ArrayView2<'_, f64>, test: &TestSet) -> Result<f64> {
    if pred.dim() != test.values.dim() {
        return Err(Error::LengthMismatch(format!(
            "predictions {:?} vs test values {:?}",
            pred.dim(),
            test.values.dim()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, t) in pred.iter().zip(test.values.iter()) {
        num += (p - t) * (p - t);
        den += t * t;
    }
    if den == 0.0 {
        return Err(Error::ZeroNormTarget);
    }
    Ok((num / den).sqrt())
}

/// Relative L2 error of each output component separately.
pub fn per_component_relative_l2_error(
    pred: ArrayView2<'_, f64>,
    test: &TestSet,
) -> Result<Vec<f64>> {
    if pred.dim() != test.values.dim() {
        return Err(Error::LengthMismatch(format!(
            "predictions {:?} vs test values {:?}",
            pred.dim(),
            test.values.dim()
        )));
    }
    let mut out = Vec::with_capacity(test.output_dim());
    for j in 0..test.output_dim() {
        let mut num = 0.0;
        let mut den = 0.0;
        for (p, t) in pred.column(j).iter().zip(test.values.column(j).iter()) {
            num += (p - t) * (p - t);
            den += t * t;
        }
        if den == 0.0 {
            return Err(Error::ZeroNormTarget);
        }
        out.push((num / den).sqrt());
    }
    Ok(out)
}

/// Builds the m x n design matrix sqrt(w_i / m) phi_j(y_i) for the sampled
/// indices, with phi the orthonormal basis of the factorization.
fn design_matrix(fact: &SubspaceFactorization, samples: &SampleSet) -> DMatrix<f64> {
    let m = samples.len();
    let n = fact.numerical_dimension();
    let u = fact.left_vectors();
    let sqrt_k = (fact.grid_size() as f64).sqrt();
    let mut a = DMatrix::zeros(m, n);
    for (i, (&idx, &w)) in samples.indices().iter().zip(samples.weights()).enumerate() {
        let scale = (w / m as f64).sqrt() * sqrt_k;
        for j in 0..n {
            a[(i, j)] = scale * u[[idx, j]];
        }
    }
    a
}

/// Smallest singular value of the weighted design matrix. This is the
/// discrete stability constant of the sample set for least-squares recovery
/// in the factorized subspace; 1 means perfectly conditioned, 0 means some
/// basis direction is invisible to the samples. Fewer samples than basis
/// functions cannot be injective, so that case returns 0.
pub fn stability_constant(fact: &SubspaceFactorization, samples: &SampleSet) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDraw);
    }
    if samples.indices().iter().any(|&idx| idx >= fact.grid_size()) {
        return Err(Error::LengthMismatch("sample index outside the grid".into()));
    }
    if samples.len() < fact.numerical_dimension() {
        return Ok(0.0);
    }
    let a = design_matrix(fact, samples);
    let sv = a.singular_values();
    Ok(sv[sv.len() - 1])
}

/// Weighted least-squares fit of sampled values in the orthonormal basis:
/// minimizes sum_i (w_i / m) || sum_j c_j phi_j(y_i) - v_i ||^2 and returns
/// the n x J coefficient matrix.
pub fn weighted_ls_coefficients(
    fact: &SubspaceFactorization,
    samples: &SampleSet,
    values: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyDraw);
    }
    if values.nrows() != samples.len() {
        return Err(Error::LengthMismatch(format!(
            "{} value rows vs {} samples",
            values.nrows(),
            samples.len()
        )));
    }
    let m = samples.len();
    let a = design_matrix(fact, samples);
    let mut b = DMatrix::zeros(m, values.ncols());
    for (i, &w) in samples.weights().iter().enumerate() {
        let scale = (w / m as f64).sqrt();
        for j in 0..values.ncols() {
            b[(i, j)] = scale * values[[i, j]];
        }
    }
    let svd = a.svd(true, true);
    let eps = svd.singular_values.max() * 1e-14;
    let sol = svd.solve(&b, eps).map_err(|e| Error::LengthMismatch(e.to_string()))?;
    Ok(Array2::from_shape_fn((sol.nrows(), sol.ncols()), |(i, j)| sol[(i, j)]))
}
