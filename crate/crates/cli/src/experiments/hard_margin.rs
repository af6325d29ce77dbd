//! Optimisation curves on hard-margin data: surrogate and 0-1 test loss per
//! epoch for each loss and gap width, averaged over repeats.

use std::fs;

use simplex_margin::synthetic::gen_hard_margin;
use simplex_margin::trainer::average_traces;
use simplex_margin::{FeatureKind, SurrogateLoss, TrainTrace};

use super::{fit, par_map, parse_losses, seed_for, tag, CellResult, ModelSettings, RunContext, TrainSettings};
use crate::config::{ensure, RawConfig};
use crate::output::{cell, Table};
use crate::svg::{self, Panel, Series};
use crate::{row, CliError, Outcome};

pub const CURVES_FILE: &str = "hard_margin_curves.csv";
pub const RUNS_FILE: &str = "hard_margin_runs.csv";
pub const SUMMARY_FILE: &str = "hard_margin_summary.csv";
pub const SVG_FILE: &str = "hard_margin.svg";

/// Relative tolerance for "the surrogate has settled".
pub const SETTLE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct HardMarginConfig {
    pub losses: Vec<SurrogateLoss>,
    pub deltas: Vec<f64>,
    pub num_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub repeats: usize,
    pub model: ModelSettings,
    pub train: TrainSettings,
}

impl HardMarginConfig {
    pub fn from_config(cfg: &mut RawConfig) -> Result<Self, CliError> {
        let c = HardMarginConfig {
            losses: parse_losses(cfg, &SurrogateLoss::ALL)?,
            deltas: cfg.get_list("deltas", &[0.1, 0.2])?,
            num_classes: cfg.get("num_classes", 3usize)?,
            n_train: cfg.get("n_train", 500usize)?,
            n_test: cfg.get("n_test", 2000usize)?,
            repeats: cfg.get("repeats", 20usize)?,
            model: ModelSettings::from_config(cfg, FeatureKind::RandomFourier)?,
            train: TrainSettings::from_config(cfg, 1)?,
        };
        ensure(c.num_classes >= 2, "num_classes", "must be at least 2")?;
        ensure(c.n_train >= 1, "n_train", "must be at least 1")?;
        ensure(c.n_test >= 1, "n_test", "must be at least 1")?;
        ensure(c.repeats >= 1, "repeats", "must be at least 1")?;
        for &d in &c.deltas {
            ensure(d > 0.0 && d < 0.5, "deltas", format!("{d} is outside (0, 0.5)"))?;
        }
        Ok(c)
    }
}

/// Per-run result kept for the summary files.
struct Run {
    trace: TrainTrace,
}

pub fn run(cfg: &mut RawConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let c = HardMarginConfig::from_config(cfg)?;
    cfg.finish()?;
    let cells: Vec<(usize, usize, usize)> = (0..c.losses.len())
        .flat_map(|l| (0..c.deltas.len()).flat_map(move |d| (0..c.repeats).map(move |r| (l, d, r))))
        .collect();
    eprintln!("hard-margin: {} training runs", cells.len());
    let results = par_map(ctx.jobs, cells.clone(), |(l, d, r)| {
        let (di, ri) = (d as u64, r as u64);
        let train_set = gen_hard_margin(
            c.n_train,
            c.num_classes,
            c.deltas[d],
            seed_for(ctx.seed, &[tag::HARD_MARGIN, tag::TRAIN, di, ri]),
        )?;
        let test_set = gen_hard_margin(
            c.n_test,
            c.num_classes,
            c.deltas[d],
            seed_for(ctx.seed, &[tag::HARD_MARGIN, tag::TEST, di, ri]),
        )?;
        let feature_seed = seed_for(ctx.seed, &[tag::HARD_MARGIN, tag::FEATURES, ri]);
        Ok(match fit(&train_set, &test_set, &c.model, feature_seed, c.losses[l], &c.train)? {
            CellResult::Done((_, trace)) => CellResult::Done(Run { trace }),
            CellResult::Diverged { epoch } => CellResult::Diverged { epoch },
        })
    })?;

    let mut curves = Table::new(
        "hard-margin-curves/v1",
        &["loss", "delta", "epoch", "train_surrogate", "test_surrogate", "test_zero_one"],
    );
    let mut runs = Table::new(
        "hard-margin-runs/v1",
        &[
            "loss",
            "delta",
            "repeat",
            "status",
            "final_test_zero_one",
            "zero_error_epoch",
            "surrogate_settled_epoch",
        ],
    );
    let mut summary = Table::new(
        "hard-margin-summary/v1",
        &["loss", "delta", "runs", "diverged", "mean_final_test_zero_one", "runs_reaching_zero"],
    );
    let mut averaged = Vec::new();
    for (l, loss) in c.losses.iter().enumerate() {
        for (d, delta) in c.deltas.iter().enumerate() {
            let group: Vec<_> = cells
                .iter()
                .zip(&results)
                .filter(|(k, _)| k.0 == l && k.1 == d)
                .collect();
            let mut traces = Vec::new();
            for &((_, _, r), res) in &group {
                match res {
                    CellResult::Done(run) => {
                        let t = &run.trace;
                        runs.push(row![
                            loss,
                            delta,
                            r,
                            "ok",
                            t.last().expect("trace has epoch 0").test_zero_one,
                            cell(t.first_zero_error_epoch()),
                            cell(t.surrogate_settled_epoch(SETTLE_TOLERANCE)),
                        ]);
                        traces.push(t.clone());
                    }
                    CellResult::Diverged { epoch } => {
                        runs.push(row![loss, delta, r, format!("diverged@{epoch}"), "", "", ""]);
                    }
                }
            }
            let diverged = group.len() - traces.len();
            if traces.is_empty() {
                summary.push(row![loss, delta, 0, diverged, "", 0]);
                continue;
            }
            let avg = average_traces(&traces);
            for p in &avg.points {
                curves.push(row![loss, delta, p.epoch, p.train_surrogate, p.test_surrogate, p.test_zero_one]);
            }
            let final_mean = avg.last().expect("non-empty").test_zero_one;
            let reaching = traces.iter().filter(|t| t.first_zero_error_epoch().is_some()).count();
            summary.push(row![loss, delta, traces.len(), diverged, final_mean, reaching]);
            eprintln!(
                "  {loss:<11} delta={delta}: mean final 0-1 error {final_mean:.5}, {diverged} diverged"
            );
            averaged.push((*loss, *delta, avg));
        }
    }

    let write = |t: &Table, name: &str| {
        t.write(&ctx.out_dir, name)
            .map_err(|e| CliError::Runtime(format!("cannot write {name}: {e}")))
    };
    write(&curves, CURVES_FILE)?;
    write(&runs, RUNS_FILE)?;
    write(&summary, SUMMARY_FILE)?;
    if ctx.svg {
        let svg = plot(&c.deltas, &averaged);
        fs::write(ctx.out_dir.join(SVG_FILE), svg)
            .map_err(|e| CliError::Runtime(format!("cannot write {SVG_FILE}: {e}")))?;
    }
    Ok(Outcome::Success)
}

/// Surrogate on the top row, 0-1 error on the bottom row, one column per gap.
fn plot(deltas: &[f64], averaged: &[(SurrogateLoss, f64, TrainTrace)]) -> String {
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for &delta in deltas {
        let mut s = Panel::new(format!("test surrogate, delta={delta}"), "epoch", "surrogate").log_y();
        let mut z = Panel::new(format!("test 0-1 error, delta={delta}"), "epoch", "0-1 error");
        for (loss, _, avg) in averaged.iter().filter(|a| a.1 == delta) {
            let pts = |f: fn(&simplex_margin::trainer::TracePoint) -> f64| {
                avg.points.iter().map(|p| (p.epoch as f64, f(p))).collect::<Vec<_>>()
            };
            s.push(Series::line(loss.name(), pts(|p| p.test_surrogate)));
            z.push(Series::line(loss.name(), pts(|p| p.test_zero_one)));
        }
        top.push(s);
        bottom.push(z);
    }
    top.extend(bottom);
    svg::render(&top, deltas.len())
}
