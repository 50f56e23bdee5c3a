//! Feedforward network, exact gradients of the weighted loss, Adam, and the
//! training loop.
//!
//! An architecture of depth L and width N applies L+1 activated affine
//! layers and one final linear map with zero bias:
//!
//! ```text
//! h_0 = rho(W_0 y + b_0)          W_0: N x d
//! h_l = rho(W_l h_{l-1} + b_l)    W_l: N x N,  l = 1..L
//! out = W_{L+1} h_L               W_{L+1}: J x N
//! ```
//!
//! The penultimate features h_L double as an adaptive dictionary of N
//! functions of y. Training minimizes the weighted square loss
//! (1/m) sum_i w_i ||out(y_i) - t_i||^2 by full-batch Adam with an
//! exponentially decaying learning rate; gradients are exact reverse-mode
//! accumulation, not a finite-difference stand-in.
//!
//! Everything here is generic over the training scalar; all randomness is
//! drawn as f64 and cast so single and double precision runs see the same
//! draws.

use crate::error::{Error, Result};
use crate::precision::Real;
use crate::rng::RngStream;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Elu,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Elu => "elu",
        }
    }

    pub fn apply<F: Real>(self, x: F) -> F {
        match self {
            Activation::Relu => {
                if x > F::zero() {
                    x
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Elu => {
                if x > F::zero() {
                    x
                } else {
                    x.exp() - F::one()
                }
            }
        }
    }

    /// Derivative expressed through the activation output. For all three
    /// activations the output determines the derivative: relu' = [h > 0],
    /// tanh' = 1 - h^2, elu' = h + 1 on the negative branch.
    pub fn derivative_from_output<F: Real>(self, h: F) -> F {
        match self {
            Activation::Relu => {
                if h > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => F::one() - h * h,
            Activation::Elu => {
                if h > F::zero() {
                    F::one()
                } else {
                    h + F::one()
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "elu" => Ok(Activation::Elu),
            other => Err(format!("unknown activation {other:?}, expected relu, tanh or elu")),
        }
    }
}

/// Shape of the network: depth L (so L+1 activated layers), width N, input
/// dimension d and output dimension J.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub depth: usize,
    pub width: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.output_dim == 0 {
            return Err(Error::Config(
                "network input, width and output dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Shapes of W_0 .. W_{L+1}.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.depth + 2);
        shapes.push((self.width, self.input_dim));
        for _ in 0..self.depth {
            shapes.push((self.width, self.width));
        }
        shapes.push((self.output_dim, self.width));
        shapes
    }

    /// Number of bias vectors; the final linear map has none.
    pub fn bias_count(&self) -> usize {
        self.depth + 1
    }

    pub fn parameter_count(&self) -> usize {
        let w: usize = self.weight_shapes().iter().map(|(r, c)| r * c).sum();
        w + self.bias_count() * self.width
    }
}

/// All trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<F: Real> {
    arch: Architecture,
    weights: Vec<Array2<F>>,
    biases: Vec<Array1<F>>,
}

/// Parameter-shaped gradient.
#[derive(Debug, Clone)]
pub struct Gradient<F: Real> {
    pub weights: Vec<Array2<F>>,
    pub biases: Vec<Array1<F>>,
}

impl<F: Real> Gradient<F> {
    fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Draws all parameters from N(0, 0.01), i.e. standard deviation 0.1.
/// Sampling order is fixed: per layer the weight matrix row-major, then its
/// bias; the final linear layer has no bias. Draws are f64 casts.
pub fn init_params<F: Real>(arch: Architecture, rng: &mut RngStream) -> Result<NetworkParams<F>> {
    arch.validate()?;
    let normal = Normal::new(0.0f64, 0.1).expect("valid std");
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, (rows, cols)) in arch.weight_shapes().into_iter().enumerate() {
        let w = Array2::from_shape_fn((rows, cols), |_| F::cast(normal.sample(rng)));
        weights.push(w);
        if l < arch.bias_count() {
            let b = Array1::from_shape_fn(arch.width, |_| F::cast(normal.sample(rng)));
            biases.push(b);
        }
    }
    Ok(NetworkParams { arch, weights, biases })
}

impl<F: Real> NetworkParams<F> {
    /// Builds params from explicit arrays, checking shapes against `arch`.
    pub fn from_parts(
        arch: Architecture,
        weights: Vec<Array2<F>>,
        biases: Vec<Array1<F>>,
    ) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.weight_shapes();
        if weights.len() != shapes.len() || biases.len() != arch.bias_count() {
            return Err(Error::LengthMismatch(format!(
                "expected {} weight matrices and {} biases, got {} and {}",
                shapes.len(),
                arch.bias_count(),
                weights.len(),
                biases.len()
            )));
        }
        for (w, shape) in weights.iter().zip(&shapes) {
            if w.dim() != *shape {
                return Err(Error::LengthMismatch(format!(
                    "weight shape {:?} does not match {:?}",
                    w.dim(),
                    shape
                )));
            }
        }
        for b in &biases {
            if b.len() != arch.width {
                return Err(Error::LengthMismatch(format!(
                    "bias length {} does not match width {}",
                    b.len(),
                    arch.width
                )));
            }
        }
        Ok(NetworkParams { arch, weights, biases })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn weights(&self) -> &[Array2<F>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<F>] {
        &self.biases
    }

    /// Activations of the last hidden layer for a batch (rows are points).
    pub fn penultimate_batch(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        let act = self.arch.activation;
        let mut h = x.dot(&self.weights[0].t()) + &self.biases[0];
        h.mapv_inplace(|v| act.apply(v));
        for l in 1..=self.arch.depth {
            let mut z = h.dot(&self.weights[l].t()) + &self.biases[l];
            z.mapv_inplace(|v| act.apply(v));
            h = z;
        }
        h
    }

    /// Network output for a batch: the final linear map over the
    /// penultimate features.
    pub fn forward_batch(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        self.penultimate_batch(x).dot(&self.weights[self.arch.depth + 1].t())
    }

    pub fn penultimate(&self, y: ArrayView1<'_, F>) -> Array1<F> {
        let x = y.insert_axis(Axis(0));
        self.penultimate_batch(x).index_axis_move(Axis(0), 0)
    }

    pub fn forward(&self, y: ArrayView1<'_, F>) -> Array1<F> {
        let x = y.insert_axis(Axis(0));
        self.forward_batch(x).index_axis_move(Axis(0), 0)
    }
}

fn check_batch<F: Real>(
    params: &NetworkParams<F>,
    points: ArrayView2<'_, F>,
    targets: ArrayView2<'_, F>,
    weights: ArrayView1<'_, F>,
) -> Result<()> {
    if points.nrows() == 0 {
        return Err(Error::EmptyDraw);
    }
    if points.nrows() != targets.nrows() || points.nrows() != weights.len() {
        return Err(Error::LengthMismatch(format!(
            "{} points vs {} targets vs {} weights",
            points.nrows(),
            targets.nrows(),
            weights.len()
        )));
    }
    if points.ncols() != params.arch.input_dim {
        return Err(Error::DimensionMismatch {
            expected: params.arch.input_dim,
            actual: points.ncols(),
        });
    }
    if targets.ncols() != params.arch.output_dim {
        return Err(Error::DimensionMismatch {
            expected: params.arch.output_dim,
            actual: targets.ncols(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= F::zero()) {
        return Err(Error::NonPositiveWeight);
    }
    Ok(())
}

/// (1/m) sum_i w_i ||out(y_i) - t_i||^2.
pub fn weighted_loss<F: Real>(
    params: &NetworkParams<F>,
    points: ArrayView2<'_, F>,
    targets: ArrayView2<'_, F>,
    weights: ArrayView1<'_, F>,
) -> Result<F> {
    check_batch(params, points, targets, weights)?;
    let out = params.forward_batch(points);
    let m = F::from_usize(points.nrows()).unwrap();
    let mut acc = F::zero();
    for (i, w) in weights.iter().enumerate() {
        let mut row = F::zero();
        for (o, t) in out.row(i).iter().zip(targets.row(i).iter()) {
            let r = *o - *t;
            row = row + r * r;
        }
        acc = acc + *w * row;
    }
    Ok(acc / m)
}

/// Loss plus its exact gradient in one reverse-mode pass.
pub fn loss_and_gradient<F: Real>(
    params: &NetworkParams<F>,
    points: ArrayView2<'_, F>,
    targets: ArrayView2<'_, F>,
    weights: ArrayView1<'_, F>,
) -> Result<(F, Gradient<F>)> {
    check_batch(params, points, targets, weights)?;
    let arch = params.arch;
    let act = arch.activation;
    let depth = arch.depth;
    let m = points.nrows();
    let m_f = F::from_usize(m).unwrap();

    // Forward pass, keeping every activated layer output.
    let mut hidden: Vec<Array2<F>> = Vec::with_capacity(depth + 1);
    let mut h = points.dot(&params.weights[0].t()) + &params.biases[0];
    h.mapv_inplace(|v| act.apply(v));
    hidden.push(h);
    for l in 1..=depth {
        let mut z = hidden[l - 1].dot(&params.weights[l].t()) + &params.biases[l];
        z.mapv_inplace(|v| act.apply(v));
        hidden.push(z);
    }
    let out = hidden[depth].dot(&params.weights[depth + 1].t());

    // Loss and the weighted residual that seeds backpropagation.
    let mut resid = &out - &targets;
    let mut loss = F::zero();
    for (i, w) in weights.iter().enumerate() {
        let mut row = F::zero();
        for r in resid.row(i).iter() {
            row = row + *r * *r;
        }
        loss = loss + *w * row;
    }
    loss = loss / m_f;

    let two_over_m = F::cast(2.0) / m_f;
    for (mut row, w) in resid.rows_mut().into_iter().zip(weights.iter()) {
        let scale = two_over_m * *w;
        row.mapv_inplace(|r| r * scale);
    }

    let mut d_weights: Vec<Array2<F>> = Vec::with_capacity(depth + 2);
    let mut d_biases: Vec<Array1<F>> = Vec::with_capacity(depth + 1);
    d_weights.push(resid.t().dot(&hidden[depth]));
    let mut upstream = resid.dot(&params.weights[depth + 1]);
    for l in (0..=depth).rev() {
        Zip::from(&mut upstream).and(&hidden[l]).for_each(|u, h| {
            *u = *u * act.derivative_from_output(*h);
        });
        let input_grad = if l == 0 {
            upstream.t().dot(&points)
        } else {
            upstream.t().dot(&hidden[l - 1])
        };
        d_weights.push(input_grad);
        d_biases.push(upstream.sum_axis(Axis(0)));
        if l > 0 {
            upstream = upstream.dot(&params.weights[l]);
        }
    }
    d_weights.reverse();
    d_biases.reverse();

    Ok((loss, Gradient { weights: d_weights, biases: d_biases }))
}

/// Exact gradient of the weighted loss.
pub fn gradient<F: Real>(
    params: &NetworkParams<F>,
    points: ArrayView2<'_, F>,
    targets: ArrayView2<'_, F>,
    weights: ArrayView1<'_, F>,
) -> Result<Gradient<F>> {
    loss_and_gradient(params, points, targets, weights).map(|(_, g)| g)
}

/// Adam moment estimates plus the step counter. Hyperparameters are stored
/// in f64 and cast at use.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F: Real> {
    m_weights: Vec<Array2<F>>,
    v_weights: Vec<Array2<F>>,
    m_biases: Vec<Array1<F>>,
    v_biases: Vec<Array1<F>>,
    step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl<F: Real> AdamState<F> {
    pub fn new(arch: Architecture) -> Self {
        Self::with_hyperparams(arch, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparams(arch: Architecture, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let shapes = arch.weight_shapes();
        let m_weights: Vec<Array2<F>> = shapes.iter().map(|&s| Array2::zeros(s)).collect();
        let m_biases: Vec<Array1<F>> =
            (0..arch.bias_count()).map(|_| Array1::zeros(arch.width)).collect();
        AdamState {
            v_weights: m_weights.clone(),
            m_weights,
            v_biases: m_biases.clone(),
            m_biases,
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// Rebuilds a state from raw parts; used by checkpoint decoding.
    pub fn from_parts(
        m_weights: Vec<Array2<F>>,
        v_weights: Vec<Array2<F>>,
        m_biases: Vec<Array1<F>>,
        v_biases: Vec<Array1<F>>,
        step: u64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        AdamState { m_weights, v_weights, m_biases, v_biases, step, beta1, beta2, epsilon }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn hyperparams(&self) -> (f64, f64, f64) {
        (self.beta1, self.beta2, self.epsilon)
    }

    pub fn moment_weights(&self) -> (&[Array2<F>], &[Array2<F>]) {
        (&self.m_weights, &self.v_weights)
    }

    pub fn moment_biases(&self) -> (&[Array1<F>], &[Array1<F>]) {
        (&self.m_biases, &self.v_biases)
    }
}

/// One bias-corrected Adam step with learning rate `lr`. The v-hat bias
/// correction is folded into the denominator so each tensor is touched once.
pub fn adam_step<F: Real>(
    params: &mut NetworkParams<F>,
    state: &mut AdamState<F>,
    grad: &Gradient<F>,
    lr: f64,
) -> Result<()> {
    if grad.weights.len() != params.weights.len() || grad.biases.len() != params.biases.len() {
        return Err(Error::LengthMismatch("gradient does not match parameters".into()));
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    // theta -= lr * (m/bc1) / (sqrt(v/bc2) + eps) is rewritten with
    // sqrt(bc2) hoisted: lr/bc1 * m / (sqrt(v)/sqrt(bc2) + eps).
    // Keeping eps outside the scaling matches the bias-corrected form.
    let consts = (
        F::cast(state.beta1),
        F::cast(state.beta2),
        F::cast(1.0 - state.beta1),
        F::cast(1.0 - state.beta2),
        F::cast(lr / bc1),
        F::cast(state.epsilon),
    );
    let sqrt_bc2 = F::cast(bc2.sqrt());
    for ((w, g), (m, v)) in params
        .weights
        .iter_mut()
        .zip(&grad.weights)
        .zip(state.m_weights.iter_mut().zip(&mut state.v_weights))
    {
        adam_update_corrected(w, g, m, v, consts, sqrt_bc2);
    }
    for ((b, g), (m, v)) in params
        .biases
        .iter_mut()
        .zip(&grad.biases)
        .zip(state.m_biases.iter_mut().zip(&mut state.v_biases))
    {
        adam_update_corrected(b, g, m, v, consts, sqrt_bc2);
    }
    Ok(())
}

fn adam_update_corrected<F: Real, D: ndarray::Dimension>(
    theta: &mut ndarray::Array<F, D>,
    g: &ndarray::Array<F, D>,
    m: &mut ndarray::Array<F, D>,
    v: &mut ndarray::Array<F, D>,
    consts: (F, F, F, F, F, F),
    sqrt_bc2: F,
) {
    let (b1, b2, one_minus_b1, one_minus_b2, lr_over_bc1, eps) = consts;
    Zip::from(theta).and(g).and(m).and(v).for_each(|t, &g, m, v| {
        *m = b1 * *m + one_minus_b1 * g;
        *v = b2 * *v + one_minus_b2 * g * g;
        *t = *t - lr_over_bc1 * *m / (v.sqrt() / sqrt_bc2 + eps);
    });
}

/// Exponentially decaying learning rate: lr(e) = initial * decay^e.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        LrSchedule { initial: lr, decay: 1.0 }
    }

    /// Schedule that shrinks the rate by `drop` over `total_epochs` epochs.
    pub fn exponential_drop(initial: f64, total_epochs: usize, drop: f64) -> Self {
        let decay =
            if total_epochs == 0 { 1.0 } else { drop.powf(-1.0 / total_epochs as f64) };
        LrSchedule { initial, decay }
    }

    pub fn at(&self, epoch: usize) -> f64 {
        self.initial * self.decay.powf(epoch as f64)
    }
}

/// Runs `epochs` full-batch Adam epochs, recording the pre-step loss of each
/// epoch. `epoch_offset` continues a global epoch counter so a decaying rate
/// spans several calls. A non-finite loss or gradient aborts with the global
/// epoch index.
#[allow(clippy::too_many_arguments)]
pub fn train<F: Real>(
    params: &mut NetworkParams<F>,
    state: &mut AdamState<F>,
    points: ArrayView2<'_, F>,
    targets: ArrayView2<'_, F>,
    weights: ArrayView1<'_, F>,
    epochs: usize,
    schedule: LrSchedule,
    epoch_offset: usize,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let global_epoch = epoch_offset + e;
        let (loss, grad) = loss_and_gradient(params, points, targets, weights)?;
        let loss = loss.as_f64();
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch: global_epoch });
        }
        adam_step(params, state, &grad, schedule.at(global_epoch))
            .map_err(|_| Error::TrainingDiverged { epoch: global_epoch })?;
        losses.push(loss);
    }
    Ok(losses)
}
