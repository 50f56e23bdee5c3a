//! Staged experiments comparing Christoffel-weighted adaptive sampling
//! against uniform Monte Carlo on the same network and budget schedule.
//!
//! Per trial, both methods start from identical network parameters. At
//! stage l with cumulative budget m_l, the adaptive method factorizes the
//! penultimate-layer dictionary of the current network, draws the m_l -
//! m_{l-1} new samples from its induced measures and keeps their draw-time
//! weights for the rest of the run; the baseline draws uniformly with unit
//! weights. The network then trains on all samples gathered so far, warm
//! started from the previous stage, with a single learning-rate schedule
//! indexed by a global epoch counter. After training, the stage is scored on
//! a fixed test set, and the trained dictionary is factorized once more to
//! report its numerical dimension and the stability constant of the
//! accumulated samples; that same factorization serves next stage's draws.
//!
//! Randomness: every decision draws from a dedicated substream of the base
//! seed keyed by (purpose, method, trial, stage), so trials are independent,
//! methods share only the initializer, and any single trial can be
//! reproduced in isolation (see [`crate::rng`] for the exact mapping).
//! Reported `final_loss` is the training loss of the trained network on its
//! cumulative sample set.

use crate::cas_sampler::{draw_from_factorization, SampleSet};
use crate::checkpoint::{encode, Checkpoint};
use crate::error::{Error, Result};
use crate::metrics::{
    per_component_relative_l2_error, relative_l2_error, stability_constant, TestSet,
};
use crate::neural_net::{
    init_params, train, weighted_loss, Activation, AdamState, Architecture, LrSchedule,
    NetworkParams,
};
use crate::precision::{Precision, Real};
use crate::rng::{Purpose, RngStream, StreamId, METHOD_SHARED};
use crate::sample_grid::{build_grid, draw_indices, uniform_distribution, Grid};
use crate::subspace::{
    assemble_matrix, factorize, DictionaryEvaluation, SubspaceFactorization,
};
use crate::test_functions::TargetFunction;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::time::Instant;

/// Sampling method under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cas,
    Mc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cas => "CAS",
            Method::Mc => "MC",
        }
    }

    /// Tag used in stream ids.
    pub fn tag(self) -> u8 {
        match self {
            Method::Cas => 1,
            Method::Mc => 2,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "CAS" => Ok(Method::Cas),
            "MC" => Ok(Method::Mc),
            other => Err(format!("unknown method {other:?}, expected CAS or MC")),
        }
    }
}

/// Externally tabulated target: its points become the reference grid.
#[derive(Debug, Clone)]
pub struct TabulatedTarget {
    pub points: Array2<f64>,
    pub values: Array2<f64>,
    pub test_points: Array2<f64>,
    pub test_values: Array2<f64>,
}

/// What the network learns: a named analytic family or tabulated data.
#[derive(Debug, Clone)]
pub enum TargetSpec {
    Analytic(TargetFunction),
    Tabulated(TabulatedTarget),
}

impl TargetSpec {
    pub fn input_dim(&self) -> usize {
        match self {
            TargetSpec::Analytic(f) => f.dimension(),
            TargetSpec::Tabulated(t) => t.points.ncols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            TargetSpec::Analytic(f) => f.output_dim(),
            TargetSpec::Tabulated(t) => t.values.ncols(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TargetSpec::Analytic(f) => {
                format!("{}(d={})", f.kind().as_str(), f.dimension())
            }
            TargetSpec::Tabulated(t) => {
                format!("tabulated(d={}, outputs={})", t.points.ncols(), t.values.ncols())
            }
        }
    }
}

/// Network shape options; input and output widths come from the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkConfig {
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// A fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    /// Grid size for analytic targets; tabulated targets bring their own.
    pub grid_size: usize,
    pub grid_seed: u64,
    pub network: NetworkConfig,
    /// Strictly increasing cumulative sample budgets m_1 < ... < m_T.
    pub schedule: Vec<usize>,
    pub epochs_per_stage: usize,
    pub lr_initial: f64,
    /// Factor by which the learning rate decays over the whole run.
    pub lr_drop: f64,
    pub adam: AdamConfig,
    pub eps_tol: f64,
    pub methods: Vec<Method>,
    pub trials: u32,
    pub base_seed: u64,
    pub test_size: usize,
    pub test_seed: u64,
    /// Standard deviation of additive Gaussian noise on training targets.
    pub noise_sigma: f64,
    pub precision: Precision,
    /// Points along the first-axis segment used for dictionary traces.
    pub dictionary_trace_points: usize,
    pub save_checkpoints: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::Config("schedule must have at least one stage".into()));
        }
        if self.schedule[0] == 0 {
            return Err(Error::Config("schedule budgets must be positive".into()));
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("schedule not strictly increasing".into()));
        }
        if self.schedule.len() >= 1 << 16 {
            return Err(Error::Config("schedule has too many stages".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method must be selected".into()));
        }
        let mut seen = self.methods.clone();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods must be distinct".into()));
        }
        if !(self.eps_tol > 0.0 && self.eps_tol < 1.0) {
            return Err(Error::InvalidTolerance(self.eps_tol));
        }
        if !(self.lr_initial > 0.0 && self.lr_initial.is_finite()) {
            return Err(Error::Config("initial learning rate must be positive".into()));
        }
        if !(self.lr_drop >= 1.0 && self.lr_drop.is_finite()) {
            return Err(Error::Config("learning-rate drop must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise level must be nonnegative".into()));
        }
        if self.network.width == 0 {
            return Err(Error::Config("network width must be positive".into()));
        }
        let grid_size = match &self.target {
            TargetSpec::Analytic(_) => self.grid_size,
            TargetSpec::Tabulated(t) => t.points.nrows(),
        };
        if grid_size < self.network.width {
            return Err(Error::Config(format!(
                "grid size {} is smaller than the network width {}; the dictionary \
                 cannot be resolved on the grid",
                grid_size, self.network.width
            )));
        }
        if matches!(self.target, TargetSpec::Analytic(_)) && self.test_size == 0 {
            return Err(Error::Config("test size must be positive".into()));
        }
        if self.dictionary_trace_points < 2 {
            return Err(Error::Config("dictionary trace needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.target.input_dim(),
            depth: self.network.depth,
            width: self.network.width,
            output_dim: self.target.output_dim(),
            activation: self.network.activation,
        }
    }

    fn total_epochs(&self) -> usize {
        self.schedule.len() * self.epochs_per_stage
    }
}

/// Config resolved into concrete data: the grid, target values on it, and
/// the test set.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub grid: Grid,
    /// K x J target values at the grid points, noise-free.
    pub targets_on_grid: Array2<f64>,
    pub test: TestSet,
}

/// Builds grid, grid targets and test set from a validated config.
pub fn prepare(config: ExperimentConfig) -> Result<PreparedExperiment> {
    config.validate()?;
    let (grid, targets_on_grid, test) = match &config.target {
        TargetSpec::Analytic(f) => {
            let grid = build_grid(f.dimension(), config.grid_size, config.grid_seed)?;
            let targets = f.eval_rows(grid.points())?;
            let test = TestSet::generate(f, config.test_size, config.test_seed)?;
            (grid, targets, test)
        }
        TargetSpec::Tabulated(t) => {
            let grid = Grid::from_points(t.points.clone())?;
            if t.values.nrows() != grid.size() {
                return Err(Error::LengthMismatch(format!(
                    "{} grid points vs {} value rows",
                    grid.size(),
                    t.values.nrows()
                )));
            }
            let test = TestSet::from_tables(t.test_points.clone(), t.test_values.clone())?;
            if test.dimension() != grid.dimension() || test.output_dim() != t.values.ncols() {
                return Err(Error::LengthMismatch(
                    "test tables do not match the target tables".into(),
                ));
            }
            (grid, t.values.clone(), test)
        }
    };
    for j in 0..test.output_dim() {
        if test.values().column(j).iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroNormTarget);
        }
    }
    Ok(PreparedExperiment { config, grid, targets_on_grid, test })
}

/// One row of stages.csv.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub method: Method,
    pub trial: u32,
    /// 1-based stage index.
    pub stage: u32,
    /// Cumulative sample count at this stage.
    pub m: usize,
    /// Numerical dimension of the trained dictionary.
    pub n: usize,
    pub rel_error: f64,
    /// Reciprocal of the stability constant; +inf when the sample set does
    /// not see some basis direction.
    pub alpha_inv: f64,
    pub final_loss: f64,
    pub wall_time_s: f64,
}

/// First-axis traces of the most important dictionary neurons, ranked by
/// output-coefficient magnitude over the neuron's discrete L2 norm.
#[derive(Debug, Clone)]
pub struct DictionaryTrace {
    pub parameter: Vec<f64>,
    /// One column per selected neuron, in rank order.
    pub traces: Array2<f64>,
    pub selected: Vec<usize>,
}

/// Per-trial artifacts beyond the stage records.
#[derive(Debug, Clone)]
pub struct TrialDiagnostics {
    pub method: Method,
    pub trial: u32,
    /// One sample set per completed stage, in draw order.
    pub sample_sets: Vec<SampleSet>,
    /// Final-stage reciprocal Christoffel values over the grid (adaptive
    /// method only).
    pub christoffel: Option<Array1<f64>>,
    pub dictionary_trace: Option<DictionaryTrace>,
    /// Final-stage test error per output component.
    pub per_component_error: Vec<f64>,
    /// Encoded final training state.
    pub checkpoint: Vec<u8>,
}

/// A trial that stopped early, with the stage it died in.
#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub method: Method,
    pub trial: u32,
    pub stage: u32,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub records: Vec<StageRecord>,
    pub diagnostics: TrialDiagnostics,
    pub failure: Option<TrialFailure>,
}

/// Per-(method, stage) statistics over the trials that completed the stage.
#[derive(Debug, Clone)]
pub struct AggregateRecord {
    pub method: Method,
    pub stage: u32,
    pub m: usize,
    pub trials: usize,
    pub rel_error_mean: f64,
    pub rel_error_median: f64,
    pub rel_error_std: f64,
    pub n_mean: f64,
    pub n_median: f64,
    pub n_std: f64,
    pub alpha_inv_mean: f64,
    pub alpha_inv_median: f64,
    pub alpha_inv_std: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub records: Vec<StageRecord>,
    pub aggregates: Vec<AggregateRecord>,
    pub diagnostics: Vec<TrialDiagnostics>,
    pub failures: Vec<TrialFailure>,
}

/// Evaluates the penultimate dictionary of `params` on points given in f64,
/// returning f64 values for the factorization path.
fn dictionary_on_points<F: Real>(
    params: &NetworkParams<F>,
    points: &Array2<F>,
) -> Result<DictionaryEvaluation> {
    let feats = params.penultimate_batch(points.view());
    DictionaryEvaluation::new(feats.mapv(|v| v.as_f64()))
}

fn trace_segment(dimension: usize, count: usize) -> Array2<f64> {
    let mut pts = Array2::zeros((count, dimension));
    for (i, mut row) in pts.rows_mut().into_iter().enumerate() {
        row[0] = -1.0 + 2.0 * i as f64 / (count - 1) as f64;
    }
    pts
}

/// Ranks dictionary neurons by |final-layer coefficient| / grid L2 norm and
/// returns traces of the top ones along the first coordinate axis.
fn dictionary_trace<F: Real>(
    params: &NetworkParams<F>,
    grid_dict: &DictionaryEvaluation,
    count: usize,
) -> DictionaryTrace {
    let arch = params.arch();
    let final_weights = &params.weights()[arch.depth + 1];
    let k = grid_dict.grid_size() as f64;
    let mut scores: Vec<(usize, f64)> = (0..arch.width)
        .map(|i| {
            let coeff = final_weights
                .column(i)
                .iter()
                .map(|w| w.as_f64() * w.as_f64())
                .sum::<f64>()
                .sqrt();
            let norm =
                (grid_dict.values().column(i).iter().map(|v| v * v).sum::<f64>() / k).sqrt();
            let score = if norm > 0.0 { coeff / norm } else { 0.0 };
            (i, score)
        })
        .collect();
    scores.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores").then(a.0.cmp(&b.0)));
    let keep = arch.width.min(6);
    let selected: Vec<usize> = scores[..keep].iter().map(|(i, _)| *i).collect();

    let pts = trace_segment(arch.input_dim, count);
    let pts_f = pts.mapv(F::cast);
    let feats = params.penultimate_batch(pts_f.view());
    let mut traces = Array2::zeros((count, keep));
    for (out_col, &neuron) in selected.iter().enumerate() {
        for (dst, src) in traces.column_mut(out_col).iter_mut().zip(feats.column(neuron)) {
            *dst = src.as_f64();
        }
    }
    DictionaryTrace { parameter: pts.column(0).to_vec(), traces, selected }
}

/// Runs one adaptive-sampling trial.
pub fn run_adaptive_trial(prep: &PreparedExperiment, trial: u32) -> Result<TrialOutput> {
    run_trial_dispatch(prep, Method::Cas, trial)
}

/// Runs one uniform Monte Carlo trial.
pub fn run_uniform_trial(prep: &PreparedExperiment, trial: u32) -> Result<TrialOutput> {
    run_trial_dispatch(prep, Method::Mc, trial)
}

fn run_trial_dispatch(prep: &PreparedExperiment, method: Method, trial: u32) -> Result<TrialOutput> {
    match prep.config.precision {
        Precision::Single => run_trial::<f32>(prep, method, trial),
        Precision::Double => run_trial::<f64>(prep, method, trial),
    }
}

fn run_trial<F: Real>(
    prep: &PreparedExperiment,
    method: Method,
    trial: u32,
) -> Result<TrialOutput> {
    let cfg = &prep.config;
    let arch = cfg.architecture();
    let grid = &prep.grid;
    let k = grid.size();
    let j_out = arch.output_dim;
    let d = arch.input_dim;

    // Both methods of a trial initialize from the same stream so they start
    // at identical parameters.
    let mut init_rng =
        RngStream::substream(cfg.base_seed, StreamId::new(Purpose::Init, METHOD_SHARED, trial, 0));
    let mut params = init_params::<F>(arch, &mut init_rng)?;
    let mut adam =
        AdamState::with_hyperparams(arch, cfg.adam.beta1, cfg.adam.beta2, cfg.adam.epsilon);
    let lr = LrSchedule::exponential_drop(cfg.lr_initial, cfg.total_epochs(), cfg.lr_drop);
    let mut noise_rng =
        RngStream::substream(cfg.base_seed, StreamId::new(Purpose::Noise, method.tag(), trial, 0));
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");

    let grid_points_f: Array2<F> = grid.points().mapv(F::cast);
    let test_points_f: Array2<F> = prep.test.points().mapv(F::cast);

    // Cumulative training data in row-major flat buffers.
    let mut flat_points: Vec<F> = Vec::new();
    let mut flat_targets: Vec<F> = Vec::new();
    let mut flat_weights_f: Vec<F> = Vec::new();
    let mut cum_indices: Vec<usize> = Vec::new();
    let mut cum_weights: Vec<f64> = Vec::new();

    let mut records = Vec::new();
    let mut sample_sets = Vec::new();
    let mut failure = None;
    let mut current_fact: Option<SubspaceFactorization> = None;
    let mut last_grid_dict: Option<DictionaryEvaluation> = None;
    let mut per_component_error = Vec::new();
    let mut global_epoch = 0usize;
    let mut prev_m = 0usize;
    let mut last_draw_state = RngStream::substream(
        cfg.base_seed,
        StreamId::new(Purpose::Draw, method.tag(), trial, 1),
    )
    .state();

    for (stage_idx, &m_stage) in cfg.schedule.iter().enumerate() {
        let stage = stage_idx as u32 + 1;
        let timer = Instant::now();
        let draw_count = m_stage - prev_m;
        let mut draw_rng = RngStream::substream(
            cfg.base_seed,
            StreamId::new(Purpose::Draw, method.tag(), trial, stage),
        );

        let set = match method {
            Method::Mc => {
                let dist = uniform_distribution(k)?;
                SampleSet::with_unit_weights(draw_indices(&dist, draw_count, &mut draw_rng), stage)
            }
            Method::Cas => {
                if current_fact.is_none() {
                    // First stage: factorize the dictionary of the untrained
                    // network. A degenerate all-zero dictionary falls back to
                    // uniform unit-weight draws for this stage.
                    match factorize_current(&params, &grid_points_f, cfg.eps_tol) {
                        Ok(f) => current_fact = Some(f),
                        Err(Error::TrivialSubspace) => {}
                        Err(e) => return Err(e),
                    }
                }
                match current_fact.as_ref() {
                    Some(f) => draw_from_factorization(f, draw_count, &mut draw_rng, stage)?,
                    None => {
                        let dist = uniform_distribution(k)?;
                        SampleSet::with_unit_weights(
                            draw_indices(&dist, draw_count, &mut draw_rng),
                            stage,
                        )
                    }
                }
            }
        };
        last_draw_state = draw_rng.state();

        // Append the new samples to the cumulative training data. Noise is
        // drawn once per sample and target component, at append time, and
        // stays with the sample for the rest of the run.
        for &idx in set.indices() {
            flat_points.extend(grid.point(idx).iter().map(|v| F::cast(*v)));
            for t in prep.targets_on_grid.row(idx) {
                let noisy =
                    if cfg.noise_sigma > 0.0 { t + noise.sample(&mut noise_rng) } else { *t };
                flat_targets.push(F::cast(noisy));
            }
        }
        for &w in set.weights() {
            flat_weights_f.push(F::cast(w));
        }
        cum_indices.extend_from_slice(set.indices());
        cum_weights.extend_from_slice(set.weights());
        sample_sets.push(set);

        let m_total = cum_indices.len();
        let points_view = ArrayView2::from_shape((m_total, d), &flat_points).expect("row-major");
        let targets_view =
            ArrayView2::from_shape((m_total, j_out), &flat_targets).expect("row-major");
        let weights_view = ArrayView1::from_shape(m_total, &flat_weights_f).expect("flat");

        match train(
            &mut params,
            &mut adam,
            points_view,
            targets_view,
            weights_view,
            cfg.epochs_per_stage,
            lr,
            global_epoch,
        ) {
            Ok(_) => {}
            Err(Error::TrainingDiverged { epoch }) => {
                failure = Some(TrialFailure {
                    method,
                    trial,
                    stage,
                    message: format!("training diverged at global epoch {epoch}"),
                });
                break;
            }
            Err(e) => return Err(e),
        }
        global_epoch += cfg.epochs_per_stage;
        let final_loss =
            weighted_loss(&params, points_view, targets_view, weights_view)?.as_f64();

        // Factorize the trained dictionary: it scores this stage and drives
        // the next stage's draws.
        let grid_dict = dictionary_on_points(&params, &grid_points_f)?;
        let fact = match factorize(assemble_matrix(&grid_dict).view(), cfg.eps_tol) {
            Ok(f) => f,
            Err(Error::TrivialSubspace) => {
                failure = Some(TrialFailure {
                    method,
                    trial,
                    stage,
                    message: "trained dictionary collapsed to zero".into(),
                });
                break;
            }
            Err(e) => return Err(e),
        };
        last_grid_dict = Some(grid_dict);

        let pred = params.forward_batch(test_points_f.view()).mapv(|v| v.as_f64());
        let rel_error = relative_l2_error(pred.view(), &prep.test)?;
        per_component_error = per_component_relative_l2_error(pred.view(), &prep.test)?;

        let pooled = SampleSet::new(cum_indices.clone(), cum_weights.clone(), stage)?;
        let alpha = stability_constant(&fact, &pooled)?;
        let alpha_inv = if alpha > 0.0 { 1.0 / alpha } else { f64::INFINITY };

        records.push(StageRecord {
            method,
            trial,
            stage,
            m: m_stage,
            n: fact.numerical_dimension(),
            rel_error,
            alpha_inv,
            final_loss,
            wall_time_s: timer.elapsed().as_secs_f64(),
        });
        current_fact = Some(fact);
        prev_m = m_stage;
    }

    let christoffel = match (method, &current_fact) {
        (Method::Cas, Some(f)) => Some(f.christoffel_values()),
        _ => None,
    };
    let dictionary_trace = match (method, &last_grid_dict) {
        (Method::Cas, Some(dict)) => {
            Some(dictionary_trace(&params, dict, cfg.dictionary_trace_points))
        }
        _ => None,
    };
    let checkpoint =
        encode(&Checkpoint { params, adam, rng: last_draw_state });

    Ok(TrialOutput {
        records,
        diagnostics: TrialDiagnostics {
            method,
            trial,
            sample_sets,
            christoffel,
            dictionary_trace,
            per_component_error,
            checkpoint,
        },
        failure,
    })
}

fn factorize_current<F: Real>(
    params: &NetworkParams<F>,
    grid_points_f: &Array2<F>,
    eps_tol: f64,
) -> Result<SubspaceFactorization> {
    let dict = dictionary_on_points(params, grid_points_f)?;
    factorize(assemble_matrix(&dict).view(), eps_tol)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in aggregated metrics"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Aggregates stage records per (method, stage) over completed trials.
pub fn aggregate(config: &ExperimentConfig, records: &[StageRecord]) -> Vec<AggregateRecord> {
    let mut out = Vec::new();
    for &method in &config.methods {
        for (stage_idx, &m) in config.schedule.iter().enumerate() {
            let stage = stage_idx as u32 + 1;
            let rows: Vec<&StageRecord> = records
                .iter()
                .filter(|r| r.method == method && r.stage == stage)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let errs: Vec<f64> = rows.iter().map(|r| r.rel_error).collect();
            let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let alphas: Vec<f64> = rows.iter().map(|r| r.alpha_inv).collect();
            out.push(AggregateRecord {
                method,
                stage,
                m,
                trials: rows.len(),
                rel_error_mean: mean(&errs),
                rel_error_median: median(&errs),
                rel_error_std: sample_std(&errs),
                n_mean: mean(&ns),
                n_median: median(&ns),
                n_std: sample_std(&ns),
                alpha_inv_mean: mean(&alphas),
                alpha_inv_median: median(&alphas),
                alpha_inv_std: sample_std(&alphas),
            });
        }
    }
    out
}

/// Runs every (method, trial) pair, in parallel over trials, and gathers
/// records, aggregates and diagnostics in a deterministic order. Diverged
/// trials contribute their completed stages and a failure note; they do not
/// abort the suite.
pub fn run_suite(prep: &PreparedExperiment) -> Result<SuiteResult> {
    let jobs: Vec<(Method, u32)> = prep
        .config
        .methods
        .iter()
        .flat_map(|&m| (0..prep.config.trials).map(move |t| (m, t)))
        .collect();
    let outputs: Result<Vec<TrialOutput>> = jobs
        .par_iter()
        .map(|&(method, trial)| run_trial_dispatch(prep, method, trial))
        .collect();
    let outputs = outputs?;

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut failures = Vec::new();
    for out in outputs {
        records.extend(out.records);
        diagnostics.push(out.diagnostics);
        failures.extend(out.failure);
    }
    let aggregates = aggregate(&prep.config, &records);
    Ok(SuiteResult { records, aggregates, diagnostics, failures })
}
