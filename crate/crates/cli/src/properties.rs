//! Property suite: numerical invariants of the library, each reported with
//! the number of cases checked and the number that failed.

use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use simplex_margin::inner_risk::{
    check_fisher_consistency, check_monotonicity, inner_minimizer, margin_transfer, DEFAULT_TOL,
};
use simplex_margin::metrics::{decode_stability_factor, hamming_distance, zero_one_risk};
use simplex_margin::features::gaussian_kernel;
use simplex_margin::synthetic::{boundary_distance, gen_hard_margin, gen_soft_margin};
use simplex_margin::{rng, Codebook, FeatureMap, LinearRffModel, MarginKind, SurrogateLoss};

use crate::config::RawConfig;
use crate::experiments::{seed_for, tag, RunContext};
use crate::output::Table;
use crate::{row, CliError, Outcome};

pub const REPORT_FILE: &str = "properties_report.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub checked: usize,
    pub violations: usize,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.checked > 0
    }
}

/// Deliberate defects used to confirm the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Flips the sign of the first gradient coordinate.
    BrokenGradient,
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Fault::None),
            "broken-gradient" => Ok(Fault::BrokenGradient),
            other => Err(format!("unknown fault '{other}' (expected none or broken-gradient)")),
        }
    }
}

fn count(name: &'static str, results: impl Iterator<Item = bool>, detail: String) -> Check {
    let (mut checked, mut violations) = (0, 0);
    for ok in results {
        checked += 1;
        if !ok {
            violations += 1;
        }
    }
    Check {
        name,
        checked,
        violations,
        detail,
    }
}

/// Unit norm, pairwise inner product `-1/(T-1)`, zero sum and self-decoding
/// for `T = 2..=16`, to 1e-12.
pub fn codec_invariants() -> Check {
    let mut worst: f64 = 0.0;
    let results = (2..=16usize).map(|t| {
        let cb = Codebook::new(t).expect("valid class count");
        let mut dev: f64 = 0.0;
        let mut sum = vec![0.0; t - 1];
        for i in 0..t {
            let yi = cb.vertex(i);
            for j in 0..t {
                let ip: f64 = yi.iter().zip(cb.vertex(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { -1.0 / (t as f64 - 1.0) };
                dev = dev.max((ip - want).abs());
            }
            sum.iter_mut().zip(yi).for_each(|(s, v)| *s += v);
        }
        dev = sum.iter().fold(dev, |d, s| d.max(s.abs()));
        worst = worst.max(dev);
        let decodes = (0..t).all(|k| cb.decode(cb.vertex(k)) == Ok(k));
        dev <= 1e-12 && decodes
    });
    let mut c = count("codec-invariants", results.collect::<Vec<_>>().into_iter(), String::new());
    c.detail = format!("max deviation {worst:.2e}");
    c
}

/// Central differences against the analytic gradient, 100 draws per loss.
pub fn gradient_checks(seed: u64, fault: Fault) -> Check {
    let mut r = rng::substream(seed, &[tag::PROPERTIES, 1]);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut results = Vec::new();
    for loss in SurrogateLoss::ALL {
        for _ in 0..100 {
            let t = r.random_range(2..=6);
            let cb = Codebook::new(t).expect("valid class count");
            let y = r.random_range(0..t);
            let w: Vec<f64> = (0..t - 1).map(|_| r.random_range(-2.0..2.0)).collect();
            let (_, mut g) = loss.value_and_grad(&cb, &w, y).expect("valid shapes");
            if fault == Fault::BrokenGradient {
                g[0] = -g[0];
            }
            let value = |w: &[f64]| loss.value_and_grad(&cb, w, y).expect("valid shapes").0;
            let ok = (0..w.len()).all(|i| {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[i] += h;
                wm[i] -= h;
                let fd = (value(&wp) - value(&wm)) / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-8);
                worst = worst.max(rel);
                rel <= 1e-5 || (fd - g[i]).abs() < 1e-9
            });
            results.push(ok);
        }
    }
    count("loss-gradients", results.into_iter(), format!("max relative error {worst:.2e}"))
}

/// Binary closed forms: `h(p) = ln(p/(1-p))` (logistic), half that
/// (exponential), and `m(gamma) = h(1/2 + gamma)`.
pub fn inner_risk_oracle() -> Check {
    let cb = Codebook::new(2).expect("valid class count");
    let mut results = Vec::new();
    let mut worst: f64 = 0.0;
    let h = |kind: MarginKind, p: f64| {
        let logit = (p / (1.0 - p)).ln();
        match kind {
            MarginKind::Logistic => logit,
            MarginKind::Exponential => 0.5 * logit,
        }
    };
    for kind in [MarginKind::Logistic, MarginKind::Exponential] {
        for k in 0..9 {
            let p = 0.55 + 0.05 * k as f64;
            let r = inner_minimizer(kind, &cb, &[p, 1.0 - p], DEFAULT_TOL).expect("valid input");
            let err = (r.argmin[0] - h(kind, p)).abs();
            worst = worst.max(err);
            results.push(err <= 1e-6);
        }
        for gamma in [0.1, 0.25, 0.4] {
            let m = margin_transfer(kind, &cb, gamma, 200).expect("valid input").m_gamma;
            let want = h(kind, 0.5 + gamma);
            let err = (m - want).abs();
            worst = worst.max(err);
            results.push(err <= 1e-4);
        }
    }
    count("inner-risk-oracle", results.into_iter(), format!("max abs error {worst:.2e}"))
}

pub fn fisher_and_monotonicity(seed: u64) -> Vec<Check> {
    let mut fisher = (0, 0);
    let mut mono = (0, 0);
    for kind in [MarginKind::Logistic, MarginKind::Exponential] {
        for t in [2usize, 3, 4] {
            let cb = Codebook::new(t).expect("valid class count");
            let s = seed_for(seed, &[tag::PROPERTIES, 2, t as u64]);
            let f = check_fisher_consistency(kind, &cb, 500, s);
            let m = check_monotonicity(kind, &cb, 200, s);
            fisher = (fisher.0 + f.checked, fisher.1 + f.violations);
            mono = (mono.0 + m.checked, mono.1 + m.violations);
        }
    }
    vec![
        Check {
            name: "fisher-consistency",
            checked: fisher.0,
            violations: fisher.1,
            detail: "500 samples per loss at T = 2..4".into(),
        },
        Check {
            name: "inner-monotonicity",
            checked: mono.0,
            violations: mono.1,
            detail: "200 pairs per loss at T = 2..4".into(),
        },
    ]
}

fn random_model<R: Rng>(r: &mut R, seed: u64) -> LinearRffModel {
    let fm = FeatureMap::sample(2, 20, 0.7, seed).expect("valid map");
    let w = Array2::from_shape_fn((20, 2), |_| r.sample::<f64, _>(StandardNormal));
    LinearRffModel::new(fm, w).expect("matching shapes")
}

/// `|R(c1) - R(c2)| <= r(c1, c2)` up to three pooled standard errors, each
/// quantity estimated on its own sample of 10^4 points.
pub fn risk_gap_bound(seed: u64) -> Check {
    let cb = Codebook::new(3).expect("valid class count");
    let mut r = rng::substream(seed, &[tag::PROPERTIES, 3]);
    let n = 10_000;
    let results: Vec<bool> = (0..50u64)
        .map(|pair| {
            let m1 = random_model(&mut r, seed_for(seed, &[tag::PROPERTIES, 3, pair, 0]));
            let m2 = random_model(&mut r, seed_for(seed, &[tag::PROPERTIES, 3, pair, 1]));
            let c1 = |x: &[f64]| m1.classify(&cb, x).expect("2-D input");
            let c2 = |x: &[f64]| m2.classify(&cb, x).expect("2-D input");
            let sample = |k: u64| {
                gen_hard_margin(n, 3, 0.1, seed_for(seed, &[tag::PROPERTIES, 3, pair, 2 + k]))
                    .expect("feasible gap")
            };
            let (s1, s2, s3) = (sample(0), sample(1), sample(2));
            let r1 = zero_one_risk(c1, &s1).expect("non-empty");
            let r2 = zero_one_risk(c2, &s2).expect("non-empty");
            let d = hamming_distance(c1, c2, s3.points()).expect("non-empty");
            let se_d = (d * (1.0 - d) / n as f64).sqrt();
            let pooled = (r1.std_error.powi(2) + r2.std_error.powi(2) + se_d.powi(2)).sqrt();
            (r1.value - r2.value).abs() <= d + 3.0 * pooled
        })
        .collect();
    count("risk-gap-bound", results.into_iter(), "50 classifier pairs".into())
}

/// A decode disagreement between `w1` and `w2` needs
/// `||w1 - w2|| >= sqrt((T-1)/(2T)) M(w1)`; 10^4 random cases.
pub fn decode_stability(seed: u64) -> Check {
    let mut r = rng::substream(seed, &[tag::PROPERTIES, 4]);
    let mut disagreements = 0;
    let results: Vec<bool> = (0..10_000)
        .map(|_| {
            let t = r.random_range(2..=8);
            let cb = Codebook::new(t).expect("valid class count");
            let w1: Vec<f64> = (0..t - 1).map(|_| r.sample(StandardNormal)).collect();
            let scale: f64 = r.random_range(0.0..1.5);
            let w2: Vec<f64> =
                w1.iter().map(|v| v + scale * r.sample::<f64, _>(StandardNormal)).collect();
            if cb.decode(&w1) == cb.decode(&w2) {
                return true;
            }
            disagreements += 1;
            let dist = w1.iter().zip(&w2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let bound = decode_stability_factor(t) * cb.decision_margin(&w1).expect("valid shape");
            dist >= bound - 1e-12
        })
        .collect();
    count(
        "decode-stability",
        results.into_iter(),
        format!("{disagreements} disagreeing cases"),
    )
}

/// Hard-margin gap per point and the soft-margin margin law (KS <= 0.02).
pub fn generator_checks(seed: u64) -> Check {
    let mut results = Vec::new();
    let mut worst_ks: f64 = 0.0;
    for delta in [0.1, 0.2] {
        let ds = gen_hard_margin(10_000, 3, delta, seed_for(seed, &[tag::PROPERTIES, 5]))
            .expect("feasible gap");
        results.extend(
            ds.points()
                .rows()
                .into_iter()
                .map(|x| boundary_distance(x.as_slice().expect("contiguous"), 3) >= delta / 2.0),
        );
    }
    for alpha in [0.5, 1.0, 2.0, 3.0, 4.0] {
        let ds = gen_soft_margin(10_000, 3, alpha, seed_for(seed, &[tag::PROPERTIES, 6]))
            .expect("valid exponent");
        let mut m: Vec<f64> = ds
            .points()
            .rows()
            .into_iter()
            .map(|x| 2.0 * boundary_distance(x.as_slice().expect("contiguous"), 3))
            .collect();
        m.sort_by(f64::total_cmp);
        let n = m.len() as f64;
        let ks = m.iter().enumerate().fold(0.0f64, |acc, (i, &v)| {
            let f = v.min(1.0).powf(alpha);
            acc.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
        });
        worst_ks = worst_ks.max(ks);
        results.push(ks <= 0.02);
    }
    count("generators", results.into_iter(), format!("max KS distance {worst_ks:.4}"))
}

/// Mean absolute kernel error of 2000 random features over 500 pairs.
pub fn kernel_approximation(seed: u64) -> Check {
    let fm = FeatureMap::sample(2, 2000, 1.0, seed_for(seed, &[tag::PROPERTIES, 7])).expect("valid map");
    let mut r = rng::substream(seed, &[tag::PROPERTIES, 8]);
    let err = (0..500)
        .map(|_| {
            let mut p = || [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let (a, b) = (p(), p());
            (fm.kernel(&a, &b).expect("2-D input") - gaussian_kernel(&a, &b, 1.0)).abs()
        })
        .sum::<f64>()
        / 500.0;
    count("kernel-approximation", std::iter::once(err <= 0.05), format!("mean abs error {err:.4}"))
}

pub fn all_checks(seed: u64, fault: Fault) -> Vec<Check> {
    let mut checks = vec![codec_invariants(), gradient_checks(seed, fault), inner_risk_oracle()];
    checks.extend(fisher_and_monotonicity(seed));
    checks.push(risk_gap_bound(seed));
    checks.push(decode_stability(seed));
    checks.push(generator_checks(seed));
    checks.push(kernel_approximation(seed));
    checks
}

pub fn run(cfg: &mut RawConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let fault: Fault = cfg.get("inject_fault", Fault::None)?;
    cfg.finish()?;
    let checks = all_checks(ctx.seed, fault);
    let mut report = Table::new(
        "properties-report/v1",
        &["check", "status", "checked", "violations", "detail"],
    );
    for c in &checks {
        let status = if c.passed() { "pass" } else { "FAIL" };
        println!("{status:<4} {:<22} checked={:<6} violations={:<4} {}", c.name, c.checked, c.violations, c.detail);
        report.push(row![c.name, status, c.checked, c.violations, c.detail.replace(',', ";")]);
    }
    report
        .write(&ctx.out_dir, REPORT_FILE)
        .map_err(|e| CliError::Runtime(format!("cannot write {REPORT_FILE}: {e}")))?;
    if checks.iter().all(Check::passed) {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::PropertyFailure)
    }
}
