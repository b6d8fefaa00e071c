//! Trainable scalar regressors: the deployed model `f(x)` and the bound
//! models `u(x)`, `l(x)`.
//!
//! Two kinds are supported. `linear` with a free output is solved in closed
//! form (ridge normal equations, bias unpenalized). Everything else, that is
//! `mlp` and nonnegative-output `linear`, trains with plain mini-batch SGD on
//! the loss `mean((ŷ - y)^2) + l2 * sum(w^2)` where the penalty covers
//! weights but not biases. A nonnegative output passes the network's raw
//! output through softplus.

mod gradcheck;
mod linear;
pub(crate) mod network;
mod serial;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

pub use gradcheck::{gradient_check, GradientReport};
pub use serial::MODEL_FORMAT_VERSION;

use network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputConstraint {
    #[default]
    Free,
    Nonnegative,
}

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorSpec {
    pub kind: ModelKind,
    /// Hidden layer widths; must be nonempty for `mlp`, ignored for `linear`.
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub l2: f64,
    #[serde(default)]
    pub output: OutputConstraint,
    pub seed: u64,
}

impl RegressorSpec {
    pub fn linear() -> Self {
        RegressorSpec {
            kind: ModelKind::Linear,
            hidden: Vec::new(),
            activation: Activation::Tanh,
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 32,
            l2: 0.0,
            output: OutputConstraint::Free,
            seed: 0,
        }
    }

    pub fn mlp(hidden: Vec<usize>, activation: Activation) -> Self {
        RegressorSpec {
            kind: ModelKind::Mlp,
            hidden,
            activation,
            ..Self::linear()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_output(mut self, output: OutputConstraint) -> Self {
        self.output = output;
        self
    }

    pub fn with_training(mut self, learning_rate: f64, epochs: usize, batch_size: usize) -> Self {
        self.learning_rate = learning_rate;
        self.epochs = epochs;
        self.batch_size = batch_size;
        self
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2 = l2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be > 0", self.learning_rate));
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch size must be >= 1".into());
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 penalty {} must be >= 0", self.l2));
        }
        if self.kind == ModelKind::Mlp {
            if self.hidden.is_empty() {
                return bad("mlp needs at least one hidden layer".into());
            }
            if self.hidden.contains(&0) {
                return bad("hidden layer sizes must be positive".into());
            }
        }
        Ok(())
    }

    fn hidden_layers(&self) -> &[usize] {
        match self.kind {
            ModelKind::Linear => &[],
            ModelKind::Mlp => &self.hidden,
        }
    }

    pub(crate) fn network(&self, dim: usize) -> Network {
        Network::new(
            dim,
            self.hidden_layers(),
            self.activation,
            self.output == OutputConstraint::Nonnegative,
        )
    }

    /// Number of parameters for input dimension `dim`.
    pub fn param_count(&self, dim: usize) -> usize {
        self.network(dim).param_count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Training MSE (without penalty) after the last update.
    pub final_loss: f64,
    /// Total SGD epochs applied, including fine-tuning; 0 for closed-form fits.
    pub epochs_run: usize,
}

/// A fitted model. Immutable: fine-tuning returns a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor<T> {
    spec: RegressorSpec,
    dim: usize,
    params: Vec<T>,
    history: TrainingHistory,
}

impl<T: Scalar> Regressor<T> {
    /// Builds a model from explicit parameters (layout as produced by `fit`).
    pub fn from_parameters(spec: RegressorSpec, dim: usize, params: Vec<T>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.param_count(dim);
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("parameters must be finite".into()));
        }
        Ok(Regressor {
            spec,
            dim,
            params,
            history: TrainingHistory {
                final_loss: f64::NAN,
                epochs_run: 0,
            },
        })
    }

    /// Freshly initialized, untrained model: parameters uniform in
    /// `±1/sqrt(fan_in)` from the spec's seed.
    pub fn initialize(spec: &RegressorSpec, dim: usize) -> Result<Self> {
        spec.validate()?;
        let net = spec.network(dim);
        let mut rng = seed::rng(seed::derive(spec.seed, "init"));
        let mut params = vec![T::zero(); net.param_count()];
        for layer in &net.layers {
            let bound = 1.0 / (layer.fan_in.max(1) as f64).sqrt();
            for p in &mut params[layer.weights.start..layer.biases.end] {
                *p = T::lit(rng.random_range(-bound..=bound));
            }
        }
        Self::from_parameters(spec.clone(), dim, params)
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parameters(&self) -> &[T] {
        &self.params
    }

    pub fn history(&self) -> &TrainingHistory {
        &self.history
    }

    pub fn predict(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let net = self.spec.network(self.dim);
        let mut ws = net.workspace();
        Ok(net.forward(&self.params, x, &mut ws))
    }

    /// Predictions for every sample of `ds`, in order.
    pub fn predict_dataset(&self, ds: &Dataset<T>) -> Result<Vec<T>> {
        self.check_dim(ds.dim())?;
        let net = self.spec.network(self.dim);
        let mut ws = net.workspace();
        Ok(ds.iter().map(|s| net.forward(&self.params, &s.x, &mut ws)).collect())
    }

    pub fn mse(&self, ds: &Dataset<T>) -> Result<f64> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset("mse"));
        }
        let preds = self.predict_dataset(ds)?;
        let sse: f64 = preds
            .iter()
            .zip(ds.iter())
            .map(|(&p, s)| (p - s.y).as_f64().powi(2))
            .sum();
        Ok(sse / ds.len() as f64)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: dim,
            });
        }
        Ok(())
    }
}

/// Fits a new model on `train`.
pub fn fit<T: Scalar>(spec: &RegressorSpec, train: &Dataset<T>) -> Result<Regressor<T>> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training set"));
    }
    let dim = train.dim();
    if spec.kind == ModelKind::Linear && spec.output == OutputConstraint::Free {
        let params = linear::ridge(train, spec.l2)?;
        let mut model = Regressor::from_parameters(spec.clone(), dim, params)?;
        model.history.final_loss = model.mse(train)?;
        return Ok(model);
    }
    let model = Regressor::initialize(spec, dim)?;
    let shuffle_seed = seed::derive(spec.seed, "fit");
    sgd(model, train, spec.epochs, spec.learning_rate, shuffle_seed)
}

/// Continues training from `model`'s parameters on `data`. The input model is
/// left untouched; `epochs == 0` returns an exact copy.
pub fn fine_tune<T: Scalar>(
    model: &Regressor<T>,
    data: &Dataset<T>,
    epochs: usize,
    learning_rate: f64,
) -> Result<Regressor<T>> {
    model.check_dim(data.dim())?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("fine-tuning set"));
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "learning rate {learning_rate} must be > 0"
        )));
    }
    if epochs == 0 {
        return Ok(model.clone());
    }
    let shuffle_seed = seed::derive(
        model.spec.seed,
        &format!("fine-tune/{}", model.history.epochs_run),
    );
    sgd(model.clone(), data, epochs, learning_rate, shuffle_seed)
}

fn sgd<T: Scalar>(
    mut model: Regressor<T>,
    data: &Dataset<T>,
    epochs: usize,
    learning_rate: f64,
    shuffle_seed: u64,
) -> Result<Regressor<T>> {
    let net = model.spec.network(model.dim);
    let mut ws = net.workspace();
    let mut rng = seed::rng(shuffle_seed);
    let lr = T::lit(learning_rate);
    let two_l2 = T::lit(2.0 * model.spec.l2);
    let penalized: Vec<bool> = (0..model.params.len()).map(|i| net.is_weight(i)).collect();
    let mut grad = vec![T::zero(); model.params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let samples = data.samples();
    let two = T::lit(2.0);

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut epoch_sse = T::zero();
        for batch in order.chunks(model.spec.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let scale = two / T::from_usize_lossy(batch.len());
            for &i in batch {
                let s = &samples[i];
                let r = net.forward(&model.params, &s.x, &mut ws) - s.y;
                epoch_sse += r * r;
                net.backward(&model.params, &mut ws, scale * r, &mut grad);
            }
            for ((p, g), &pen) in model.params.iter_mut().zip(&grad).zip(&penalized) {
                let g = if pen { *g + two_l2 * *p } else { *g };
                *p -= lr * g;
            }
        }
        if !epoch_sse.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
    }
    model.history.epochs_run += epochs;
    model.history.final_loss = model.mse(data)?;
    if !model.history.final_loss.is_finite() {
        return Err(Error::Divergence { epoch: epochs });
    }
    Ok(model)
}
