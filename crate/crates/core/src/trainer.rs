//! Full-batch gradient descent on the ridge-regularised empirical surrogate
//! risk `(1/n) sum_i l(W^T z(x_i), y_i) + lambda ||W||_F^2`.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::codec::Codebook;
use crate::error::{check_dim, invalid, Error, Result};
use crate::features::LinearRffModel;
use crate::losses::SurrogateLoss;
use crate::synthetic::Dataset;

/// Objective value treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
pub const DEFAULT_MAX_EPOCHS: usize = 2000;
pub const DEFAULT_STOP_GRAD_NORM: f64 = 1e-7;
/// Default step is this fraction of `1 / L`.
pub const DEFAULT_STEP_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    pub step_size: f64,
    pub max_epochs: usize,
    pub lambda: f64,
    pub stop_grad_norm: f64,
    pub eval_every: usize,
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.max_epochs == 0 {
            return Err(invalid("max_epochs must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if self.stop_grad_norm.is_nan() || self.stop_grad_norm < 0.0 {
            return Err(invalid("stop_grad_norm must be non-negative"));
        }
        if self.eval_every == 0 {
            return Err(invalid("eval_every must be at least 1"));
        }
        Ok(())
    }
}

/// One evaluation of the training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub epoch: usize,
    /// Regularised training objective.
    pub train_surrogate: f64,
    /// Mean surrogate loss on the held-out set, without the penalty.
    pub test_surrogate: f64,
    pub test_zero_one: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub points: Vec<TracePoint>,
    /// Gradient norm when training stopped.
    pub final_grad_norm: f64,
}

pub const TRACE_SCHEMA: &str = "#schema=trace/v1";

impl TrainTrace {
    /// CSV with a `#schema=` comment line and columns
    /// `epoch,train_surrogate,test_surrogate,test_zero_one`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_SCHEMA}")?;
        writeln!(out, "epoch,train_surrogate,test_surrogate,test_zero_one")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                p.epoch, p.train_surrogate, p.test_surrogate, p.test_zero_one
            )?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }

    /// First evaluated epoch with zero held-out 0-1 error.
    pub fn first_zero_error_epoch(&self) -> Option<usize> {
        self.points.iter().find(|p| p.test_zero_one == 0.0).map(|p| p.epoch)
    }

    /// First evaluated epoch whose held-out surrogate is within `rel` of the
    /// final value.
    pub fn surrogate_settled_epoch(&self, rel: f64) -> Option<usize> {
        let last = self.last()?.test_surrogate;
        self.points
            .iter()
            .find(|p| (p.test_surrogate - last).abs() <= rel * last.abs())
            .map(|p| p.epoch)
    }
}

/// Precomputed features of one dataset.
struct Design<'a> {
    z: Array2<f64>,
    labels: &'a [usize],
}

impl<'a> Design<'a> {
    fn new(model: &LinearRffModel, data: &'a Dataset) -> Result<Self> {
        Ok(Design {
            z: model.feature_map.transform_rows(data.points())?,
            labels: data.labels(),
        })
    }

    /// Mean loss, gradient of the mean loss in `W`, and 0-1 error.
    fn evaluate(
        &self,
        cb: &Codebook,
        loss: SurrogateLoss,
        weights: &Array2<f64>,
        want_grad: bool,
    ) -> (f64, Option<Array2<f64>>, f64) {
        let n = self.labels.len() as f64;
        let preds = self.z.dot(weights);
        let k = weights.ncols();
        let mut pred_grads = Array2::<f64>::zeros((self.labels.len(), k));
        let mut total = 0.0;
        let mut wrong = 0usize;
        let mut buf = vec![0.0; k];
        for ((row, &y), mut g) in preds
            .rows()
            .into_iter()
            .zip(self.labels)
            .zip(pred_grads.rows_mut())
        {
            let w = row.as_slice().expect("contiguous row");
            if cb.decode_unchecked(w) != y {
                wrong += 1;
            }
            if want_grad {
                total += loss.value_and_grad_into(cb.vertex(y), w, &mut buf);
                g.iter_mut().zip(&buf).for_each(|(a, b)| *a = *b);
            } else {
                total += loss.value(cb.vertex(y), w);
            }
        }
        let grad = want_grad.then(|| self.z.t().dot(&pred_grads) / n);
        (total / n, grad, wrong as f64 / n)
    }
}

fn check_pair(model: &LinearRffModel, data: &Dataset) -> Result<Codebook> {
    if data.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    check_dim(model.feature_map.input_dim(), data.dim())?;
    check_dim(data.num_classes() - 1, model.output_dim())?;
    Codebook::new(data.num_classes())
}

/// Regularised empirical risk and its gradient in the weights.
pub fn empirical_risk_and_grad(
    model: &LinearRffModel,
    data: &Dataset,
    loss: SurrogateLoss,
    lambda: f64,
) -> Result<(f64, Array2<f64>)> {
    let cb = check_pair(model, data)?;
    let design = Design::new(model, data)?;
    let w = model.weights().to_owned();
    let (risk, grad, _) = design.evaluate(&cb, loss, &w, true);
    let grad = grad.expect("requested") + &(2.0 * lambda * &w);
    Ok((risk + lambda * w.iter().map(|v| v * v).sum::<f64>(), grad))
}

/// Largest eigenvalue of `Z^T Z / n` by power iteration.
pub fn gram_top_eigenvalue(z: ArrayView2<'_, f64>) -> f64 {
    let n = z.nrows().max(1) as f64;
    let mut v = Array1::<f64>::ones(z.ncols());
    v /= v.dot(&v).sqrt();
    let mut eig = 0.0;
    for _ in 0..200 {
        let next = z.t().dot(&z.dot(&v)) / n;
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let new_eig = v.dot(&next);
        v = next / norm;
        if (new_eig - eig).abs() <= 1e-12 * new_eig.abs() {
            return new_eig;
        }
        eig = new_eig;
    }
    eig
}

/// Smoothness constant `L` of the training objective: the loss curvature
/// bound times the top eigenvalue of the feature Gram matrix, plus `2 lambda`.
/// The exponential loss has no global bound; its curvature at zero (1) is
/// used instead.
pub fn smoothness_constant(
    model: &LinearRffModel,
    data: &Dataset,
    loss: SurrogateLoss,
    lambda: f64,
) -> Result<f64> {
    check_pair(model, data)?;
    let z = model.feature_map.transform_rows(data.points())?;
    let curvature = loss.smoothness().unwrap_or(1.0);
    Ok(curvature * gram_top_eigenvalue(z.view()) + 2.0 * lambda)
}

/// Runs gradient descent from `model_init`.
///
/// Epoch `e` in the trace is evaluated after `e` updates; epoch 0 is the
/// initial model. Evaluations happen every `eval_every` epochs and always at
/// the last one. Training stops after `max_epochs` updates or once the
/// gradient norm is at most `stop_grad_norm`.
pub fn train(
    train_set: &Dataset,
    test_set: &Dataset,
    model_init: LinearRffModel,
    loss: SurrogateLoss,
    config: &GdConfig,
) -> Result<(LinearRffModel, TrainTrace)> {
    config.validate()?;
    let cb = check_pair(&model_init, train_set)?;
    check_pair(&model_init, test_set)?;
    let train_design = Design::new(&model_init, train_set)?;
    let test_design = Design::new(&model_init, test_set)?;

    let mut w = model_init.weights().to_owned();
    let mut trace = TrainTrace::default();
    for epoch in 0..=config.max_epochs {
        let (risk, grad, _) = train_design.evaluate(&cb, loss, &w, true);
        let penalty = config.lambda * w.iter().map(|v| v * v).sum::<f64>();
        let objective = risk + penalty;
        if !objective.is_finite() || objective > DIVERGENCE_THRESHOLD {
            return Err(Error::Diverged {
                epoch,
                risk: objective,
            });
        }
        let grad = grad.expect("requested") + &(2.0 * config.lambda * &w);
        let grad_norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        let last = epoch == config.max_epochs || grad_norm <= config.stop_grad_norm;
        if epoch % config.eval_every == 0 || last {
            let (test_surrogate, _, test_zero_one) = test_design.evaluate(&cb, loss, &w, false);
            trace.points.push(TracePoint {
                epoch,
                train_surrogate: objective,
                test_surrogate,
                test_zero_one,
            });
        }
        if last {
            trace.final_grad_norm = grad_norm;
            break;
        }
        w.scaled_add(-config.step_size, &grad);
    }
    let mut model = model_init;
    model.set_weights(w)?;
    Ok((model, trace))
}

/// Mean of several traces evaluated on the same epochs. Traces that stopped
/// early are extended with their last point.
pub fn average_traces(traces: &[TrainTrace]) -> TrainTrace {
    let Some(longest) = traces.iter().max_by_key(|t| t.points.len()) else {
        return TrainTrace::default();
    };
    let m = traces.len() as f64;
    let points = longest
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let at = |t: &TrainTrace| *t.points.get(i).or(t.points.last()).expect("non-empty");
            let sum = traces.iter().map(at).fold((0.0, 0.0, 0.0), |acc, q| {
                (
                    acc.0 + q.train_surrogate,
                    acc.1 + q.test_surrogate,
                    acc.2 + q.test_zero_one,
                )
            });
            TracePoint {
                epoch: p.epoch,
                train_surrogate: sum.0 / m,
                test_surrogate: sum.1 / m,
                test_zero_one: sum.2 / m,
            }
        })
        .collect();
    TrainTrace {
        points,
        final_grad_norm: traces.iter().map(|t| t.final_grad_norm).sum::<f64>() / m,
    }
}

/// Sum of squared weights, summed over columns.
pub fn weight_norm_sq(w: ArrayView2<'_, f64>) -> f64 {
    w.map_axis(Axis(0), |c| c.dot(&c)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMap;
    use crate::synthetic::gen_hard_margin;
    use approx::assert_abs_diff_eq;

    fn toy(n: usize, seed: u64) -> (Dataset, LinearRffModel) {
        let ds = gen_hard_margin(n, 3, 0.2, seed).unwrap();
        let fm = FeatureMap::sample(2, 20, 0.5, seed).unwrap();
        (ds, LinearRffModel::zeros(fm, 3).unwrap())
    }

    fn config(step: f64, epochs: usize, lambda: f64) -> GdConfig {
        GdConfig {
            step_size: step,
            max_epochs: epochs,
            lambda,
            stop_grad_norm: 0.0,
            eval_every: 1,
        }
    }

    #[test]
    fn zero_weights_exponential_risk_is_one() {
        let (ds, model) = toy(10, 1);
        let (risk, _) = empirical_risk_and_grad(&model, &ds, SurrogateLoss::EXPONENTIAL, 0.0).unwrap();
        assert_abs_diff_eq!(risk, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn penalty_gradient_is_two_lambda_w() {
        let (ds, model) = toy(10, 2);
        let w = Array2::from_shape_fn((20, 2), |(i, j)| 0.01 * (i as f64) - 0.02 * j as f64);
        let mut m = model.clone();
        m.set_weights(w.clone()).unwrap();
        let (_, g0) = empirical_risk_and_grad(&m, &ds, SurrogateLoss::Square, 0.0).unwrap();
        let (_, g1) = empirical_risk_and_grad(&m, &ds, SurrogateLoss::Square, 0.3).unwrap();
        for ((a, b), wv) in g1.iter().zip(&g0).zip(&w) {
            assert_abs_diff_eq!(a - b, 0.6 * wv, epsilon = 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (ds, model) = toy(10, 3);
        let h = 1e-5;
        for loss in SurrogateLoss::ALL {
            let w = Array2::from_shape_fn((20, 2), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 0.1 - 0.2);
            let mut m = model.clone();
            m.set_weights(w.clone()).unwrap();
            let (_, g) = empirical_risk_and_grad(&m, &ds, loss, 0.01).unwrap();
            for idx in [(0, 0), (3, 1), (19, 0), (11, 1)] {
                let mut wp = w.clone();
                wp[idx] += h;
                let mut wm = w.clone();
                wm[idx] -= h;
                m.set_weights(wp).unwrap();
                let fp = empirical_risk_and_grad(&m, &ds, loss, 0.01).unwrap().0;
                m.set_weights(wm).unwrap();
                let fm = empirical_risk_and_grad(&m, &ds, loss, 0.01).unwrap().0;
                let fd = (fp - fm) / (2.0 * h);
                let rel = (fd - g[idx]).abs() / fd.abs().max(g[idx].abs()).max(1e-10);
                assert!(rel <= 1e-5, "{loss} {idx:?}: fd={fd} analytic={}", g[idx]);
            }
        }
    }

    #[test]
    fn rejects_bad_configs_and_inputs() {
        let (ds, model) = toy(10, 4);
        let mut c = config(0.0, 10, 0.0);
        assert!(train(&ds, &ds, model.clone(), SurrogateLoss::Square, &c).is_err());
        c.step_size = 0.1;
        c.eval_every = 0;
        assert!(train(&ds, &ds, model.clone(), SurrogateLoss::Square, &c).is_err());
        let empty = Dataset::new(Array2::zeros((0, 2)), vec![], 3).unwrap();
        assert!(empirical_risk_and_grad(&model, &empty, SurrogateLoss::Square, 0.0).is_err());
        let wrong_t = LinearRffModel::zeros(FeatureMap::sample(2, 20, 0.5, 1).unwrap(), 4).unwrap();
        assert!(empirical_risk_and_grad(&wrong_t, &ds, SurrogateLoss::Square, 0.0).is_err());
    }

    #[test]
    fn monotone_descent_below_smoothness_step() {
        let (ds, model) = toy(200, 5);
        let (test, _) = toy(100, 6);
        for loss in [SurrogateLoss::Square, SurrogateLoss::LOGISTIC] {
            let l = smoothness_constant(&model, &ds, loss, 1e-3).unwrap();
            let (_, trace) = train(&ds, &test, model.clone(), loss, &config(1.0 / l, 300, 1e-3)).unwrap();
            for pair in trace.points.windows(2) {
                assert!(pair[1].train_surrogate <= pair[0].train_surrogate + 1e-8, "{loss}");
            }
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (ds, model) = toy(100, 7);
        let c = config(0.5, 50, 1e-4);
        let a = train(&ds, &ds, model.clone(), SurrogateLoss::LOGISTIC, &c).unwrap();
        let b = train(&ds, &ds, model, SurrogateLoss::LOGISTIC, &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let (ds, model) = toy(50, 8);
        let err = train(&ds, &ds, model, SurrogateLoss::Square, &config(1e3, 100, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch, .. } if epoch > 0));
    }

    #[test]
    fn heavy_ridge_collapses_to_tie_break() {
        let (ds, model) = toy(300, 9);
        let test = gen_hard_margin(3000, 3, 0.2, 10).unwrap();
        let l = smoothness_constant(&model, &ds, SurrogateLoss::Square, 1e3).unwrap();
        let (m, trace) =
            train(&ds, &test, model, SurrogateLoss::Square, &config(0.5 / l, 200, 1e3)).unwrap();
        assert!(weight_norm_sq(m.weights()) < 1e-4);
        // Exactly zero weights decode every point to class 0.
        let err = trace.points[0].test_zero_one;
        assert!((err - 2.0 / 3.0).abs() < 0.03, "{err}");
    }

    #[test]
    fn trace_csv_and_summaries() {
        let trace = TrainTrace {
            points: vec![
                TracePoint { epoch: 0, train_surrogate: 1.0, test_surrogate: 1.0, test_zero_one: 0.5 },
                TracePoint { epoch: 10, train_surrogate: 0.5, test_surrogate: 0.5, test_zero_one: 0.0 },
                TracePoint { epoch: 20, train_surrogate: 0.3, test_surrogate: 0.301, test_zero_one: 0.0 },
                TracePoint { epoch: 30, train_surrogate: 0.3, test_surrogate: 0.3, test_zero_one: 0.0 },
            ],
            final_grad_norm: 0.0,
        };
        assert_eq!(trace.first_zero_error_epoch(), Some(10));
        assert_eq!(trace.surrogate_settled_epoch(0.01), Some(20));
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_SCHEMA));
        assert_eq!(lines.next(), Some("epoch,train_surrogate,test_surrogate,test_zero_one"));
        assert_eq!(lines.next(), Some("0,1,1,0.5"));

        let avg = average_traces(&[trace.clone(), trace]);
        assert_eq!(avg.points.len(), 4);
        assert_eq!(avg.points[2].test_surrogate, 0.301);
    }
}
