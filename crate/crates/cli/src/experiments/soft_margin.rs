//! Learning curves under a polynomial soft margin: mean 0-1 error against
//! sample size for each exponent, a log-log slope per exponent, and the slope
//! of those slopes against the exponent.

use std::fs;
use std::str::FromStr;

use simplex_margin::rate_fit::{loglog_slope, ols, RateFit};
use simplex_margin::synthetic::{gen_soft_margin, soft_margin_quadrature, WeightedSet, MAX_SOFT_CLASSES};
use simplex_margin::{Error, FeatureKind, SurrogateLoss};

use super::{
    fit, mean_and_se, par_map, quadrature_error, seed_for, tag, CellResult, ModelSettings, RunContext,
    TrainSettings,
};
use crate::config::{ensure, ConfigError, RawConfig};
use crate::output::Table;
use crate::svg::{self, Panel, Series};
use crate::{row, CliError, Outcome};

pub const ERRORS_FILE: &str = "soft_margin_errors.csv";
pub const SLOPES_FILE: &str = "soft_margin_slopes.csv";
pub const META_FILE: &str = "soft_margin_meta.csv";
pub const SVG_FILE: &str = "soft_margin.svg";

/// Slope of the per-exponent slopes predicted by an `n^(-alpha/2)` rate.
pub const PREDICTED_META_SLOPE: f64 = -0.5;

/// How the test error of a trained model is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    /// Weighted error on a deterministic quadrature of the distribution.
    Quadrature,
    /// Error on a fresh sample of `n_test` points.
    Sample,
}

impl FromStr for Evaluation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quadrature" => Ok(Evaluation::Quadrature),
            "sample" => Ok(Evaluation::Sample),
            other => Err(format!("unknown evaluation '{other}' (expected quadrature or sample)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SoftMarginConfig {
    pub alphas: Vec<f64>,
    pub n_values: Vec<usize>,
    pub num_classes: usize,
    pub loss: SurrogateLoss,
    pub repeats: usize,
    pub evaluation: Evaluation,
    pub n_test: usize,
    pub quadrature_levels: usize,
    pub quadrature_positions: usize,
    pub min_fit_points: usize,
    pub model: ModelSettings,
    pub train: TrainSettings,
}

fn check_sizes(field: &str, ns: &[usize], min_points: usize) -> Result<(), ConfigError> {
    ensure(ns.iter().all(|&n| n >= 1), field, "sample sizes must be at least 1")?;
    ensure(ns.windows(2).all(|w| w[0] < w[1]), field, "must be strictly increasing")?;
    ensure(
        ns.len() >= min_points,
        field,
        format!("{} values given, a rate fit needs at least {min_points}", ns.len()),
    )
}

impl SoftMarginConfig {
    pub fn from_config(cfg: &mut RawConfig) -> Result<Self, CliError> {
        let c = SoftMarginConfig {
            alphas: cfg.get_list("alphas", &[0.5, 1.0, 2.0, 3.0, 4.0])?,
            n_values: cfg.get_list("n_values", &[250, 500, 1000, 2000, 4000])?,
            num_classes: cfg.get("num_classes", 3usize)?,
            loss: cfg.get("loss", SurrogateLoss::LOGISTIC)?,
            repeats: cfg.get("repeats", 20usize)?,
            evaluation: cfg.get("eval", Evaluation::Quadrature)?,
            n_test: cfg.get("n_test", 100_000usize)?,
            quadrature_levels: cfg.get("quadrature_levels", 200usize)?,
            quadrature_positions: cfg.get("quadrature_positions", 40usize)?,
            min_fit_points: cfg.get("min_fit_points", 4usize)?,
            model: ModelSettings::from_config(cfg, FeatureKind::Identity)?,
            train: TrainSettings::from_config(cfg, usize::MAX)?,
        };
        ensure(
            (2..=MAX_SOFT_CLASSES).contains(&c.num_classes),
            "num_classes",
            format!("soft-margin data supports 2 to {MAX_SOFT_CLASSES} classes"),
        )?;
        for &a in &c.alphas {
            ensure(a > 0.0 && a.is_finite(), "alphas", format!("{a} is not positive"))?;
        }
        ensure(c.alphas.windows(2).all(|w| w[0] < w[1]), "alphas", "must be strictly increasing")?;
        ensure(c.min_fit_points >= 2, "min_fit_points", "must be at least 2")?;
        check_sizes("n_values", &c.n_values, c.min_fit_points)?;
        ensure(c.repeats >= 1, "repeats", "must be at least 1")?;
        ensure(c.n_test >= 1, "n_test", "must be at least 1")?;
        ensure(c.quadrature_levels >= 2, "quadrature_levels", "must be at least 2")?;
        ensure(c.quadrature_positions >= 1, "quadrature_positions", "must be at least 1")?;
        Ok(c)
    }
}

pub fn run(cfg: &mut RawConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let c = SoftMarginConfig::from_config(cfg)?;
    cfg.finish()?;
    let quadratures: Vec<Option<WeightedSet>> = c
        .alphas
        .iter()
        .map(|&a| match c.evaluation {
            Evaluation::Quadrature => soft_margin_quadrature(
                c.num_classes,
                a,
                c.quadrature_levels,
                c.quadrature_positions,
            )
            .map(Some),
            Evaluation::Sample => Ok(None),
        })
        .collect::<Result<_, Error>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let cells: Vec<(usize, usize, usize)> = (0..c.alphas.len())
        .flat_map(|a| (0..c.n_values.len()).flat_map(move |n| (0..c.repeats).map(move |r| (a, n, r))))
        .collect();
    eprintln!("soft-margin: {} training runs", cells.len());
    let results = par_map(ctx.jobs, cells.clone(), |(a, n, r)| {
        let (ai, ni, ri) = (a as u64, n as u64, r as u64);
        let alpha = c.alphas[a];
        let train_set = gen_soft_margin(
            c.n_values[n],
            c.num_classes,
            alpha,
            seed_for(ctx.seed, &[tag::SOFT_MARGIN, tag::TRAIN, ai, ni, ri]),
        )?;
        let test_set = match c.evaluation {
            Evaluation::Sample => gen_soft_margin(
                c.n_test,
                c.num_classes,
                alpha,
                seed_for(ctx.seed, &[tag::SOFT_MARGIN, tag::TEST, ai, ni, ri]),
            )?,
            // Only the final error matters; the trace is not kept.
            Evaluation::Quadrature => train_set.clone(),
        };
        let feature_seed = seed_for(ctx.seed, &[tag::SOFT_MARGIN, tag::FEATURES, ri]);
        Ok(match fit(&train_set, &test_set, &c.model, feature_seed, c.loss, &c.train)? {
            CellResult::Done((model, trace)) => CellResult::Done(match &quadratures[a] {
                Some(q) => quadrature_error(&model, q)?,
                None => trace.last().expect("trace has epoch 0").test_zero_one,
            }),
            CellResult::Diverged { epoch } => CellResult::Diverged { epoch },
        })
    })?;

    let mut errors = Table::new(
        "soft-margin-errors/v1",
        &["alpha", "n", "mean_error", "std_error", "runs", "diverged"],
    );
    let mut slopes = Table::new(
        "soft-margin-slopes/v1",
        &["alpha", "slope", "intercept", "r_squared", "n_points", "excluded"],
    );
    let mut curves = Vec::new();
    let mut fitted: Vec<(f64, RateFit)> = Vec::new();
    for (a, &alpha) in c.alphas.iter().enumerate() {
        let mut pairs = Vec::new();
        for (n, &size) in c.n_values.iter().enumerate() {
            let values: Vec<f64> = cells
                .iter()
                .zip(&results)
                .filter(|(k, _)| k.0 == a && k.1 == n)
                .filter_map(|(_, res)| res.done().copied())
                .collect();
            let diverged = c.repeats - values.len();
            let (mean, se) = mean_and_se(&values);
            if values.is_empty() {
                errors.push(row![alpha, size, "", "", 0, diverged]);
                continue;
            }
            errors.push(row![alpha, size, mean, se, values.len(), diverged]);
            pairs.push((size as f64, mean));
        }
        match loglog_slope(&pairs) {
            Ok(f) => {
                slopes.push(row![alpha, f.slope, f.intercept, f.r_squared, f.n_points, f.excluded]);
                eprintln!("  alpha={alpha}: slope {:.3}, r^2 {:.3}", f.slope, f.r_squared);
                fitted.push((alpha, f));
            }
            Err(e) => {
                eprintln!("  alpha={alpha}: no fit ({e})");
                let excluded = pairs.iter().filter(|p| p.1 <= 0.0).count();
                slopes.push(row![alpha, "", "", "", pairs.len() - excluded, excluded]);
            }
        }
        curves.push((alpha, pairs));
    }

    let mut meta = Table::new(
        "soft-margin-meta/v1",
        &["meta_slope", "intercept", "r_squared", "n_alphas", "predicted_slope"],
    );
    let xs: Vec<f64> = fitted.iter().map(|f| f.0).collect();
    let ys: Vec<f64> = fitted.iter().map(|f| f.1.slope).collect();
    let meta_fit = ols(&xs, &ys).ok();
    match meta_fit {
        Some((slope, intercept, r2)) => {
            eprintln!("  slope of slopes against alpha: {slope:.3}");
            meta.push(row![slope, intercept, r2, xs.len(), PREDICTED_META_SLOPE]);
        }
        None => meta.push(row!["", "", "", xs.len(), PREDICTED_META_SLOPE]),
    }

    for (t, name) in [(&errors, ERRORS_FILE), (&slopes, SLOPES_FILE), (&meta, META_FILE)] {
        t.write(&ctx.out_dir, name)
            .map_err(|e| CliError::Runtime(format!("cannot write {name}: {e}")))?;
    }
    if ctx.svg {
        fs::write(ctx.out_dir.join(SVG_FILE), plot(&curves, &fitted, meta_fit))
            .map_err(|e| CliError::Runtime(format!("cannot write {SVG_FILE}: {e}")))?;
    }
    Ok(Outcome::Success)
}

fn plot(
    curves: &[(f64, Vec<(f64, f64)>)],
    fitted: &[(f64, RateFit)],
    meta: Option<(f64, f64, f64)>,
) -> String {
    let mut main = Panel::new("0-1 error against sample size", "n", "mean 0-1 error").log_x().log_y();
    for (alpha, pairs) in curves {
        main.push(Series::line(format!("alpha={alpha}"), pairs.clone()).with_markers());
    }
    let mut inset = Panel::new("fitted slope against alpha", "alpha", "slope");
    inset.push(Series::line("fitted", fitted.iter().map(|f| (f.0, f.1.slope)).collect()).with_markers());
    if let (Some((slope, intercept, _)), Some(first), Some(last)) = (meta, fitted.first(), fitted.last()) {
        let line = |a: f64| (a, intercept + slope * a);
        inset.push(Series::line(format!("fit {slope:.2}"), vec![line(first.0), line(last.0)]).dashed());
    }
    svg::render(&[main, inset], 2)
}
