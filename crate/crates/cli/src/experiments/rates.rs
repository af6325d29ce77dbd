//! Final 0-1 error against sample size on hard-margin data, with an
//! exponential-decay fit per gap width.

use std::fs;

use simplex_margin::rate_fit::exp_decay_fit;
use simplex_margin::synthetic::{gen_hard_margin, hard_margin_quadrature, WeightedSet};
use simplex_margin::{Error, FeatureKind, SurrogateLoss};

use super::{
    fit, mean_and_se, par_map, quadrature_error, seed_for, tag, CellResult, ModelSettings, RunContext,
    TrainSettings,
};
use crate::config::{ensure, RawConfig};
use crate::output::Table;
use crate::svg::{self, Panel, Series};
use crate::{row, CliError, Outcome};

pub const ERRORS_FILE: &str = "hard_margin_rates_errors.csv";
pub const FITS_FILE: &str = "hard_margin_rates_fits.csv";
pub const SVG_FILE: &str = "hard_margin_rates.svg";

/// `100 * sqrt(2)^k` for `k = 0..=8`, rounded.
pub const DEFAULT_N_VALUES: [usize; 9] = [100, 141, 200, 283, 400, 566, 800, 1131, 1600];

#[derive(Debug, Clone)]
pub struct RatesConfig {
    pub deltas: Vec<f64>,
    pub n_values: Vec<usize>,
    pub num_classes: usize,
    pub loss: SurrogateLoss,
    pub repeats: usize,
    pub quadrature_radial: usize,
    pub quadrature_angular: usize,
    pub model: ModelSettings,
    pub train: TrainSettings,
}

impl RatesConfig {
    pub fn from_config(cfg: &mut RawConfig) -> Result<Self, CliError> {
        let c = RatesConfig {
            deltas: cfg.get_list("deltas", &[0.1, 0.2])?,
            n_values: cfg.get_list("n_values", &DEFAULT_N_VALUES)?,
            num_classes: cfg.get("num_classes", 3usize)?,
            loss: cfg.get("loss", SurrogateLoss::Square)?,
            repeats: cfg.get("repeats", 20usize)?,
            quadrature_radial: cfg.get("quadrature_radial", 200usize)?,
            quadrature_angular: cfg.get("quadrature_angular", 720usize)?,
            model: ModelSettings::from_config(cfg, FeatureKind::RandomFourier)?,
            train: TrainSettings::from_config(cfg, usize::MAX)?,
        };
        let min_points = cfg.get("min_fit_points", 4usize)?;
        ensure(min_points >= 2, "min_fit_points", "must be at least 2")?;
        ensure(c.num_classes >= 2, "num_classes", "must be at least 2")?;
        for &d in &c.deltas {
            ensure(d > 0.0 && d < 0.5, "deltas", format!("{d} is outside (0, 0.5)"))?;
        }
        ensure(c.n_values.iter().all(|&n| n >= 1), "n_values", "sample sizes must be at least 1")?;
        ensure(c.n_values.windows(2).all(|w| w[0] < w[1]), "n_values", "must be strictly increasing")?;
        ensure(
            c.n_values.len() >= min_points,
            "n_values",
            format!("{} values given, a rate fit needs at least {min_points}", c.n_values.len()),
        )?;
        ensure(c.repeats >= 1, "repeats", "must be at least 1")?;
        ensure(c.quadrature_radial >= 1, "quadrature_radial", "must be at least 1")?;
        ensure(
            c.quadrature_angular >= c.num_classes,
            "quadrature_angular",
            "must be at least num_classes",
        )?;
        Ok(c)
    }
}

pub fn run(cfg: &mut RawConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let c = RatesConfig::from_config(cfg)?;
    cfg.finish()?;
    let quadratures: Vec<WeightedSet> = c
        .deltas
        .iter()
        .map(|&d| hard_margin_quadrature(c.num_classes, d, c.quadrature_radial, c.quadrature_angular))
        .collect::<Result<_, Error>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let cells: Vec<(usize, usize, usize)> = (0..c.deltas.len())
        .flat_map(|d| (0..c.n_values.len()).flat_map(move |n| (0..c.repeats).map(move |r| (d, n, r))))
        .collect();
    eprintln!("hard-margin-rates: {} training runs", cells.len());
    let results = par_map(ctx.jobs, cells.clone(), |(d, n, r)| {
        let (di, ni, ri) = (d as u64, n as u64, r as u64);
        let train_set = gen_hard_margin(
            c.n_values[n],
            c.num_classes,
            c.deltas[d],
            seed_for(ctx.seed, &[tag::RATES, tag::TRAIN, di, ni, ri]),
        )?;
        let feature_seed = seed_for(ctx.seed, &[tag::RATES, tag::FEATURES, ri]);
        Ok(match fit(&train_set, &train_set, &c.model, feature_seed, c.loss, &c.train)? {
            CellResult::Done((model, _)) => CellResult::Done(quadrature_error(&model, &quadratures[d])?),
            CellResult::Diverged { epoch } => CellResult::Diverged { epoch },
        })
    })?;

    let mut errors = Table::new(
        "hard-margin-rates-errors/v1",
        &["delta", "n", "mean_error", "std_error", "runs", "diverged"],
    );
    let mut fits = Table::new(
        "hard-margin-rates-fits/v1",
        &["delta", "rate", "intercept", "r_squared", "n_points", "excluded"],
    );
    let mut curves = Vec::new();
    for (d, &delta) in c.deltas.iter().enumerate() {
        let mut pairs = Vec::new();
        for (n, &size) in c.n_values.iter().enumerate() {
            let values: Vec<f64> = cells
                .iter()
                .zip(&results)
                .filter(|(k, _)| k.0 == d && k.1 == n)
                .filter_map(|(_, res)| res.done().copied())
                .collect();
            let diverged = c.repeats - values.len();
            if values.is_empty() {
                errors.push(row![delta, size, "", "", 0, diverged]);
                continue;
            }
            let (mean, se) = mean_and_se(&values);
            errors.push(row![delta, size, mean, se, values.len(), diverged]);
            pairs.push((size as f64, mean));
        }
        match exp_decay_fit(&pairs) {
            Ok(f) => {
                eprintln!("  delta={delta}: rate {:.5} per sample, r^2 {:.3}", f.slope, f.r_squared);
                fits.push(row![delta, f.slope, f.intercept, f.r_squared, f.n_points, f.excluded]);
            }
            Err(e) => {
                eprintln!("  delta={delta}: no fit ({e})");
                let excluded = pairs.iter().filter(|p| p.1 <= 0.0).count();
                fits.push(row![delta, "", "", "", pairs.len() - excluded, excluded]);
            }
        }
        curves.push((delta, pairs));
    }

    for (t, name) in [(&errors, ERRORS_FILE), (&fits, FITS_FILE)] {
        t.write(&ctx.out_dir, name)
            .map_err(|e| CliError::Runtime(format!("cannot write {name}: {e}")))?;
    }
    if ctx.svg {
        let mut p = Panel::new("final 0-1 error against sample size", "n", "mean 0-1 error").log_y();
        for (delta, pairs) in curves {
            p.push(Series::line(format!("delta={delta}"), pairs).with_markers());
        }
        fs::write(ctx.out_dir.join(SVG_FILE), svg::render(&[p], 1))
            .map_err(|e| CliError::Runtime(format!("cannot write {SVG_FILE}: {e}")))?;
    }
    Ok(Outcome::Success)
}
