//! Experiment drivers. Each reads its keys from a [`RawConfig`], runs its
//! cells (possibly in parallel) and writes CSVs and an optional SVG.
//!
//! Every cell derives its own seeds from the base seed and the cell's indices,
//! and results are collected in cell order, so output does not depend on the
//! number of worker threads.

pub mod hard_margin;
pub mod rates;
pub mod soft_margin;

use std::path::PathBuf;

use rayon::prelude::*;
use simplex_margin::synthetic::{Dataset, WeightedSet};
use simplex_margin::trainer::{smoothness_constant, train, DEFAULT_STEP_FRACTION};
use simplex_margin::{
    rng, Codebook, Error, FeatureKind, FeatureMap, GdConfig, LinearRffModel, SurrogateLoss,
    TrainTrace,
};

use crate::config::{ensure, ConfigError, RawConfig};
use crate::CliError;

/// Settings shared by every experiment run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub svg: bool,
}

/// Seed-derivation tags, one per experiment.
pub mod tag {
    pub const HARD_MARGIN: u64 = 0x48;
    pub const SOFT_MARGIN: u64 = 0x53;
    pub const RATES: u64 = 0x52;
    pub const PROPERTIES: u64 = 0x50;

    pub const TRAIN: u64 = 0;
    pub const TEST: u64 = 1;
    pub const FEATURES: u64 = 2;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSettings {
    pub kind: FeatureKind,
    pub num_features: usize,
    pub bandwidth: f64,
}

impl ModelSettings {
    pub fn from_config(cfg: &mut RawConfig, default_kind: FeatureKind) -> Result<Self, ConfigError> {
        let kind = cfg.get("features", default_kind)?;
        let num_features = cfg.get("num_features", 300usize)?;
        let bandwidth = cfg.get("bandwidth", 0.5f64)?;
        ensure(num_features >= 1, "num_features", "must be at least 1")?;
        ensure(bandwidth > 0.0 && bandwidth.is_finite(), "bandwidth", "must be positive")?;
        Ok(ModelSettings {
            kind,
            num_features,
            bandwidth,
        })
    }

    pub fn feature_map(&self, input_dim: usize, seed: u64) -> Result<FeatureMap, Error> {
        match self.kind {
            FeatureKind::RandomFourier => {
                FeatureMap::sample(input_dim, self.num_features, self.bandwidth, seed)
            }
            FeatureKind::Identity => FeatureMap::identity(input_dim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub lambda: f64,
    pub max_epochs: usize,
    /// Step size as a fraction of `1 / L`.
    pub step_fraction: f64,
    pub stop_grad_norm: f64,
    pub eval_every: usize,
}

impl TrainSettings {
    pub fn from_config(cfg: &mut RawConfig, eval_every: usize) -> Result<Self, ConfigError> {
        let s = TrainSettings {
            lambda: cfg.get("lambda", 1e-4)?,
            max_epochs: cfg.get("max_epochs", simplex_margin::trainer::DEFAULT_MAX_EPOCHS)?,
            step_fraction: cfg.get("step_fraction", DEFAULT_STEP_FRACTION)?,
            stop_grad_norm: cfg.get("stop_grad_norm", simplex_margin::trainer::DEFAULT_STOP_GRAD_NORM)?,
            eval_every: cfg.get("eval_every", eval_every)?,
        };
        ensure(s.lambda >= 0.0 && s.lambda.is_finite(), "lambda", "must be non-negative")?;
        ensure(s.max_epochs >= 1, "max_epochs", "must be at least 1")?;
        ensure(
            s.step_fraction > 0.0 && s.step_fraction.is_finite(),
            "step_fraction",
            "must be positive",
        )?;
        ensure(s.stop_grad_norm >= 0.0, "stop_grad_norm", "must be non-negative")?;
        ensure(s.eval_every >= 1, "eval_every", "must be at least 1")?;
        Ok(s)
    }
}

/// Outcome of one training cell. Divergence is an expected result, not an
/// error: such runs are excluded from averages and counted.
pub enum CellResult<T> {
    Done(T),
    Diverged { epoch: usize },
}

impl<T> CellResult<T> {
    pub fn done(&self) -> Option<&T> {
        match self {
            CellResult::Done(v) => Some(v),
            CellResult::Diverged { .. } => None,
        }
    }
}

/// Trains a zero-initialised model with step `step_fraction / L`.
pub fn fit(
    train_set: &Dataset,
    test_set: &Dataset,
    model: &ModelSettings,
    feature_seed: u64,
    loss: SurrogateLoss,
    settings: &TrainSettings,
) -> Result<CellResult<(LinearRffModel, TrainTrace)>, Error> {
    let fm = model.feature_map(train_set.dim(), feature_seed)?;
    let init = LinearRffModel::zeros(fm, train_set.num_classes())?;
    let l = smoothness_constant(&init, train_set, loss, settings.lambda)?;
    let config = GdConfig {
        step_size: settings.step_fraction / l,
        max_epochs: settings.max_epochs,
        lambda: settings.lambda,
        stop_grad_norm: settings.stop_grad_norm,
        eval_every: settings.eval_every,
    };
    match train(train_set, test_set, init, loss, &config) {
        Ok(out) => Ok(CellResult::Done(out)),
        Err(Error::Diverged { epoch, .. }) => Ok(CellResult::Diverged { epoch }),
        Err(e) => Err(e),
    }
}

/// Weighted 0-1 error of `model` on a quadrature set.
pub fn quadrature_error(model: &LinearRffModel, q: &WeightedSet) -> Result<f64, Error> {
    let cb = Codebook::new(model.output_dim() + 1)?;
    let preds = model.predict_rows(q.points.view())?;
    let classes: Vec<usize> = preds
        .rows()
        .into_iter()
        .map(|w| cb.decode(w.as_slice().expect("contiguous row")))
        .collect::<Result<_, _>>()?;
    q.weighted_error(&classes)
}

pub fn seed_for(base: u64, key: &[u64]) -> u64 {
    rng::derive_seed(base, key)
}

/// Maps `f` over `items` on `jobs` threads, keeping input order.
pub fn par_map<I, T, F>(jobs: usize, items: Vec<I>, f: F) -> Result<Vec<T>, CliError>
where
    I: Send,
    T: Send,
    F: Fn(I) -> Result<T, Error> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))?;
    pool.install(|| items.into_par_iter().map(&f).collect::<Result<Vec<T>, Error>>())
        .map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn parse_losses(cfg: &mut RawConfig, default: &[SurrogateLoss]) -> Result<Vec<SurrogateLoss>, ConfigError> {
    let losses: Vec<SurrogateLoss> = cfg.get_list("losses", default)?;
    let mut seen = Vec::new();
    for l in &losses {
        ensure(!seen.contains(l), "losses", format!("'{l}' listed twice"))?;
        seen.push(*l);
    }
    Ok(losses)
}
