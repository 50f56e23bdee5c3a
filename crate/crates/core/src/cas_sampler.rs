//! Sample allocation and drawing from the induced measures.
//!
//! A budget of m draws is split over the n induced measures as evenly as
//! possible: k = floor(m/n) draws from every measure, plus one extra draw
//! from each of the first s = m - kn measures in descending singular-value
//! order. Each drawn index keeps the reciprocal-Christoffel weight of its
//! grid point at draw time.

use crate::error::{Error, Result};
use crate::sample_grid::Grid;
use crate::subspace::{assemble_matrix, factorize, DictionaryEvaluation, SubspaceFactorization};
use ndarray::Array2;
use rand::Rng;

/// Indices drawn from the grid with their draw-time weights and the stage
/// that produced them.
#[derive(Debug, Clone)]
pub struct SampleSet {
    indices: Vec<usize>,
    weights: Vec<f64>,
    stage: u32,
}

impl SampleSet {
    pub fn new(indices: Vec<usize>, weights: Vec<f64>, stage: u32) -> Result<Self> {
        if indices.len() != weights.len() {
            return Err(Error::LengthMismatch(format!(
                "{} indices vs {} weights",
                indices.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::NonPositiveWeight);
        }
        Ok(SampleSet { indices, weights, stage })
    }

    /// Uniform draws carry weight 1.
    pub fn with_unit_weights(indices: Vec<usize>, stage: u32) -> Self {
        let weights = vec![1.0; indices.len()];
        SampleSet { indices, weights, stage }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    /// The sampled points as an m x d array.
    pub fn points(&self, grid: &Grid) -> Array2<f64> {
        grid.gather(&self.indices)
    }
}

/// Draws per measure: k to everyone, one extra to the first s measures.
/// The counts sum to m and never differ by more than one.
pub fn allocation(m: usize, n: usize) -> Vec<usize> {
    assert!(n > 0, "allocation needs at least one measure");
    let k = m / n;
    let s = m - k * n;
    (0..n).map(|j| k + usize::from(j < s)).collect()
}

/// Draws m weighted samples from the induced measures of an existing
/// factorization. Samples are laid out as the n blocks of k common draws
/// followed by the s extra draws.
pub fn draw_from_factorization<R: Rng + ?Sized>(
    fact: &SubspaceFactorization,
    m: usize,
    rng: &mut R,
    stage: u32,
) -> Result<SampleSet> {
    if m == 0 {
        return Err(Error::EmptyDraw);
    }
    let n = fact.numerical_dimension();
    let k = m / n;
    let s = m - k * n;
    let weights_by_index = fact.weight_values();

    let mut main = vec![0usize; k * n];
    let mut extra = vec![0usize; s];
    for j in 0..n {
        // One measure is materialized at a time; its cumulative table is
        // dropped before the next column is processed.
        let mu = fact.induced_measure(j)?;
        for slot in 0..k {
            main[j * k + slot] = mu.sample(rng);
        }
        if j < s {
            extra[j] = mu.sample(rng);
        }
    }
    main.extend(extra);

    let weights: Vec<f64> = main.iter().map(|&idx| weights_by_index[idx]).collect();
    SampleSet::new(main, weights, stage)
}

/// Factorizes the dictionary and draws m samples from its induced measures.
pub fn cas_draw<R: Rng + ?Sized>(
    dict: &DictionaryEvaluation,
    m: usize,
    eps_tol: f64,
    rng: &mut R,
    stage: u32,
) -> Result<SampleSet> {
    let fact = factorize(assemble_matrix(dict).view(), eps_tol)?;
    draw_from_factorization(&fact, m, rng, stage)
}
