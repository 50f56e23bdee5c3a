//! Reference grids and discrete sampling.
//!
//! All measures in the crate are discrete: a grid of K points standing in
//! for the continuous domain, and probability vectors over its indices.
//! Sampling inverts the cumulative distribution with a binary search, so a
//! draw costs O(log K) after an O(K) setup.

use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream, StreamId};
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

/// K points in [-1, 1]^d, one per row. Grids built by [`build_grid`] are a
/// pure function of (dimension, size, seed); grids wrapping external tables
/// carry seed 0 and are reproduced from their files instead.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Array2<f64>,
    seed: u64,
}

impl Grid {
    pub fn from_points(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::EmptyGrid);
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid points"));
        }
        Ok(Grid { points, seed: 0 })
    }

    pub fn size(&self) -> usize {
        self.points.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.points.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, index: usize) -> ArrayView1<'_, f64> {
        self.points.row(index)
    }

    /// Copies the rows at `indices` into an m x d array.
    pub fn gather(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.dimension()));
        for (i, &idx) in indices.iter().enumerate() {
            out.row_mut(i).assign(&self.points.row(idx));
        }
        out
    }
}

/// Draws K points uniformly from [-1, 1]^d. Coordinates are sampled row by
/// row from the grid stream of `seed`, so the result is bit-identical for
/// equal (dimension, size, seed).
pub fn build_grid(dimension: usize, size: usize, seed: u64) -> Result<Grid> {
    if dimension == 0 || size == 0 {
        return Err(Error::EmptyGrid);
    }
    let mut rng = RngStream::substream(seed, StreamId::new(Purpose::Grid, 0, 0, 0));
    let coord = Uniform::new_inclusive(-1.0f64, 1.0);
    let mut points = Array2::zeros((size, dimension));
    for mut row in points.rows_mut() {
        for v in row.iter_mut() {
            *v = coord.sample(&mut rng);
        }
    }
    Ok(Grid { points, seed })
}

/// A probability vector over grid indices with its cumulative sums.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates and normalizes `probabilities`. Entries must be finite and
    /// nonnegative and the sum must already be within 1e-8 of 1; the small
    /// residual is then divided out so the cumulative ends exactly at 1.
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite probability".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("negative probability {p}")));
        }
        let sum: f64 = probabilities.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("probabilities sum to zero".into()));
        }
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}, expected 1 within 1e-8"
            )));
        }
        let probabilities: Vec<f64> = probabilities.iter().map(|p| p / sum).collect();
        let mut cumulative = Vec::with_capacity(probabilities.len());
        let mut acc = 0.0;
        for &p in &probabilities {
            acc += p;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(DiscreteDistribution { probabilities, cumulative })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Inverse-CDF draw: the smallest index whose cumulative sum exceeds a
    /// uniform variate. Zero-probability indices can never be returned
    /// because their cumulative entry equals the previous one.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cumulative.partition_point(|&c| c <= u)
    }
}

/// Draws `count` independent indices from `dist`.
pub fn draw_indices<R: Rng + ?Sized>(
    dist: &DiscreteDistribution,
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    (0..count).map(|_| dist.sample(rng)).collect()
}

/// The uniform distribution over `size` indices.
pub fn uniform_distribution(size: usize) -> Result<DiscreteDistribution> {
    if size == 0 {
        return Err(Error::InvalidDistribution("empty probability vector".into()));
    }
    DiscreteDistribution::new(vec![1.0 / size as f64; size])
}
