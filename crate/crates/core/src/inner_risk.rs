//! Conditional ("inner") risk of a margin loss and its minimiser.
//!
//! For a probability vector `p` over the classes, the inner risk is
//! `Phi(p, w) = sum_y p_y phi(<w, y>)`. Its minimiser `h(p)` is the value the
//! population minimiser of the surrogate risk takes at any input whose
//! conditional label distribution is `p`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::codec::{dot, to_simplex, Codebook};
use crate::error::{invalid, Result};
use crate::losses::MarginKind;
use crate::rng;

/// Gradient-norm target used when callers do not supply their own.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_NEWTON_ITERS: usize = 200;
/// Iterates are kept inside this ball; the minimiser is at infinity whenever
/// some `p_y = 0`.
pub const NORM_CAP: f64 = 50.0;

/// Output of [`inner_minimizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct InnerMinimizerResult {
    pub argmin: Vec<f64>,
    pub min_value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// The infimum is not attained (some `p_y = 0`, or the iterate hit
    /// [`NORM_CAP`]); `argmin` is a capped approximation.
    pub unbounded: bool,
    /// Objective value before the first step and after every accepted step.
    pub objective_history: Vec<f64>,
}

/// `sum_y p_y phi(<w, y>)`.
pub fn inner_risk(kind: MarginKind, cb: &Codebook, p: &[f64], w: &[f64]) -> Result<f64> {
    let p = to_simplex(p, cb.num_classes())?;
    crate::error::check_dim(cb.dim(), w.len())?;
    Ok(value(kind, cb, &p, w))
}

fn value(kind: MarginKind, cb: &Codebook, p: &[f64], w: &[f64]) -> f64 {
    cb.vertices()
        .zip(p)
        .map(|(y, py)| py * kind.eval_unchecked(dot(w, y)).value)
        .sum()
}

/// Value, gradient and Hessian of the inner risk at `w`.
fn second_order(
    kind: MarginKind,
    cb: &Codebook,
    p: &[f64],
    w: &[f64],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let k = cb.dim();
    let mut f = 0.0;
    let mut g = DVector::zeros(k);
    let mut h = DMatrix::zeros(k, k);
    for (y, &py) in cb.vertices().zip(p) {
        if py == 0.0 {
            continue;
        }
        let e = kind.eval_unchecked(dot(w, y));
        f += py * e.value;
        for a in 0..k {
            g[a] += py * e.d1 * y[a];
            for b in 0..k {
                h[(a, b)] += py * e.d2 * y[a] * y[b];
            }
        }
    }
    (f, g, h)
}

/// Minimises `Phi(p, .)` by damped Newton iteration from `w = 0`, falling back
/// to a gradient step when the Hessian is near-singular.
///
/// Stops once the gradient norm is at most `tol`, after
/// [`MAX_NEWTON_ITERS`] iterations, or when the iterate reaches
/// [`NORM_CAP`].
pub fn inner_minimizer(
    kind: MarginKind,
    cb: &Codebook,
    p: &[f64],
    tol: f64,
) -> Result<InnerMinimizerResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("solver tolerance must be positive, got {tol}")));
    }
    let p = to_simplex(p, cb.num_classes())?;
    Ok(minimize(kind, cb, &p, tol))
}

fn minimize(kind: MarginKind, cb: &Codebook, p: &[f64], tol: f64) -> InnerMinimizerResult {
    let k = cb.dim();
    let mut w = DVector::<f64>::zeros(k);
    let mut capped = false;
    let mut iterations = 0;
    let (mut f, mut g, mut h) = second_order(kind, cb, p, w.as_slice());
    let mut history = vec![f];

    while g.norm() > tol && iterations < MAX_NEWTON_ITERS {
        iterations += 1;
        let newton = h.clone().cholesky().and_then(|chol| {
            let l = chol.l();
            let diag = l.diagonal();
            let (lo, hi) = diag
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
            // Near-singular when the Cholesky diagonal spans > 1e7 (condition > 1e14).
            (lo > 1e-7 * hi).then(|| chol.solve(&(-&g)))
        });
        let dir = match newton {
            Some(d) if d.dot(&g) < 0.0 => d,
            _ => -&g,
        };
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let cand = &w + step * &dir;
            let fc = value(kind, cb, p, cand.as_slice());
            if fc <= f + 1e-4 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((mut next, mut fn_)) = accepted else {
            // No representable decrease left; the iterate is as good as it gets.
            break;
        };
        let norm = next.norm();
        if norm > NORM_CAP {
            next *= NORM_CAP / norm;
            fn_ = value(kind, cb, p, next.as_slice());
            capped = true;
        }
        w = next;
        (f, g, h) = second_order(kind, cb, p, w.as_slice());
        debug_assert!((f - fn_).abs() <= 1e-12 * (1.0 + f.abs()));
        history.push(f);
        if capped {
            break;
        }
    }

    InnerMinimizerResult {
        argmin: w.as_slice().to_vec(),
        min_value: f,
        gradient_norm: g.norm(),
        iterations,
        unbounded: capped || p.contains(&0.0),
        objective_history: history,
    }
}

/// Counts of a randomised property check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckReport {
    pub checked: usize,
    pub violations: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Uniform draw from the probability simplex.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, num_classes: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..num_classes).map(|_| Exp1.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|v: f64| v / sum).collect()
}

fn top_two(p: &[f64]) -> (usize, f64, f64) {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    (idx[0], p[idx[0]], p[idx[1]])
}

/// Minimum gap between the two most probable classes for a sample to count.
pub const FISHER_MIN_GAP: f64 = 0.05;

/// Draws `num_samples` probability vectors whose top class leads the runner-up
/// by at least [`FISHER_MIN_GAP`] and counts those where `h(p)` does not
/// decode to the most probable class.
pub fn check_fisher_consistency(
    kind: MarginKind,
    cb: &Codebook,
    num_samples: usize,
    seed: u64,
) -> CheckReport {
    let mut rng = rng::substream(seed, &[rng::purpose::FISHER_CHECK, cb.num_classes() as u64]);
    let mut violations = 0;
    let mut checked = 0;
    while checked < num_samples {
        let p = sample_simplex(&mut rng, cb.num_classes());
        let (argmax, first, second) = top_two(&p);
        if first - second < FISHER_MIN_GAP {
            continue;
        }
        checked += 1;
        let h = minimize(kind, cb, &p, DEFAULT_TOL);
        if cb.decode_unchecked(&h.argmin) != argmax {
            violations += 1;
        }
    }
    CheckReport { checked, violations }
}

/// Mass moved onto the tested coordinate in [`check_monotonicity`].
pub const MONOTONICITY_SHIFT: f64 = 0.01;
pub const MONOTONICITY_SLACK: f64 = 1e-6;

/// Checks that `<h(p), y>` does not decrease when mass moves onto `p_y`.
///
/// Each pair takes a random `p`, a random class `y` and a random donor class
/// `j != y` with `p_j > 2 * shift`, and moves `shift` from `p_j` to `p_y`.
pub fn check_monotonicity(
    kind: MarginKind,
    cb: &Codebook,
    num_pairs: usize,
    seed: u64,
) -> CheckReport {
    let t = cb.num_classes();
    let mut rng = rng::substream(seed, &[rng::purpose::MONOTONICITY_CHECK, t as u64]);
    let mut violations = 0;
    let mut checked = 0;
    while checked < num_pairs {
        let p = sample_simplex(&mut rng, t);
        let y = rng.random_range(0..t);
        let j = (y + rng.random_range(1..t)) % t;
        if p[j] <= 2.0 * MONOTONICITY_SHIFT {
            continue;
        }
        let mut q = p.clone();
        q[y] += MONOTONICITY_SHIFT;
        q[j] -= MONOTONICITY_SHIFT;
        checked += 1;
        let before = dot(&minimize(kind, cb, &p, DEFAULT_TOL).argmin, cb.vertex(y));
        let after = dot(&minimize(kind, cb, &q, DEFAULT_TOL).argmin, cb.vertex(y));
        if after < before - MONOTONICITY_SLACK {
            violations += 1;
        }
    }
    CheckReport { checked, violations }
}

/// Margin-transfer constant at one edge `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginTransfer {
    pub gamma: f64,
    /// `decision_margin * (T-1)/T`: the transferred margin in the units of a
    /// probability edge. For two classes this is `h(1/2 + gamma)`.
    pub m_gamma: f64,
    /// The constrained minimum of `M(h(p))` itself.
    pub decision_margin: f64,
    pub grid_resolution: usize,
    /// Number of facet points evaluated per ordered class pair.
    pub grid_points: usize,
    /// `m_gamma` is infinite (`T = 2`, `gamma = 1/2`).
    pub unbounded: bool,
}

/// Evaluates the margin-transfer constant
/// `max_{y, j} min { M(h(p)) : p_y - p_j = 2 gamma }`
/// on a lattice of the constraint set with `grid_resolution` steps per
/// dimension.
///
/// The constraint set for `(y, j)` is the part of the facet where `y` is the
/// most probable class and `j` its closest competitor, i.e. also
/// `p_y - p_k >= 2 gamma` for every `k != y`. Points are written as
/// `p = 2 gamma e_y + (1 - 2 gamma) q` with `q` on the lattice
/// `{c / N : c_y = c_j >= c_k, sum c = N}`.
///
/// At lattice points with a zero probability the minimiser is at infinity;
/// the margin there is taken as its limit from the interior of the facet.
/// Limit of `M(h(q))` as interior `q` approaches a boundary point `p`.
///
/// Both losses have an exponential tail, so the supported coordinates of the
/// minimiser run off together with `t_i - t_j -> ln(p_i / p_j)`. The margin is
/// therefore the log-ratio of the two largest supported probabilities, and
/// infinite with a single supported class.
fn boundary_margin(p: &[f64]) -> f64 {
    let (_, first, second) = top_two(p);
    if second > 0.0 {
        (first / second).ln()
    } else {
        f64::INFINITY
    }
}

pub fn margin_transfer(
    kind: MarginKind,
    cb: &Codebook,
    gamma: f64,
    grid_resolution: usize,
) -> Result<MarginTransfer> {
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(invalid(format!("gamma must lie in (0, 1/2], got {gamma}")));
    }
    if grid_resolution < 10 {
        return Err(invalid(format!(
            "grid resolution must be at least 10, got {grid_resolution}"
        )));
    }
    let t = cb.num_classes();
    let mut best = f64::NEG_INFINITY;
    let mut grid_points = 0;
    for y in 0..t {
        for j in (0..t).filter(|&j| j != y) {
            let others: Vec<usize> = (0..t).filter(|&k| k != y && k != j).collect();
            let mut facet = Vec::new();
            for_each_lattice_point(&others, grid_resolution, |counts, a| {
                let n = grid_resolution as f64;
                let mut p = vec![0.0; t];
                p[y] = 2.0 * gamma + (1.0 - 2.0 * gamma) * a / n;
                p[j] = (1.0 - 2.0 * gamma) * a / n;
                for (&k, &c) in others.iter().zip(counts) {
                    p[k] = (1.0 - 2.0 * gamma) * c as f64 / n;
                }
                facet.push(p);
            });
            let min_margin = facet
                .iter()
                .map(|p| {
                    if p.contains(&0.0) {
                        boundary_margin(p)
                    } else {
                        cb.decision_margin_unchecked(&minimize(kind, cb, p, DEFAULT_TOL).argmin)
                    }
                })
                .fold(f64::INFINITY, f64::min);
            grid_points = facet.len();
            best = best.max(min_margin);
        }
    }
    let unbounded = best.is_infinite();
    Ok(MarginTransfer {
        gamma,
        m_gamma: best * (t - 1) as f64 / t as f64,
        decision_margin: best,
        grid_resolution,
        grid_points,
        unbounded,
    })
}

/// Calls `visit(counts_of_others, a)` for every lattice point with
/// `c_y = c_j = a`, `0 <= c_k <= a` and `2a + sum c_k = n`.
fn for_each_lattice_point(others: &[usize], n: usize, mut visit: impl FnMut(&[usize], f64)) {
    if others.is_empty() {
        // Two classes: the facet is the single point q = (1/2, 1/2).
        visit(&[], n as f64 / 2.0);
        return;
    }
    let mut counts = vec![0usize; others.len()];
    for a in 0..=n / 2 {
        let rest = n - 2 * a;
        if rest > a * others.len() {
            continue;
        }
        fill(&mut counts, 0, rest, a, &mut |c| visit(c, a as f64));
    }
}

fn fill(counts: &mut [usize], idx: usize, rest: usize, cap: usize, visit: &mut impl FnMut(&[usize])) {
    if idx + 1 == counts.len() {
        if rest <= cap {
            counts[idx] = rest;
            visit(counts);
        }
        return;
    }
    let remaining_slots = counts.len() - idx - 1;
    for c in 0..=cap.min(rest) {
        if rest - c > cap * remaining_slots {
            continue;
        }
        counts[idx] = c;
        fill(counts, idx + 1, rest - c, cap, visit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Golden-section-free brute force: fine grid then local refinement.
    fn grid_argmin_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let mut best = (lo, f(lo));
        let steps = 200_000;
        for i in 0..=steps {
            let x = lo + (hi - lo) * i as f64 / steps as f64;
            let v = f(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        let (mut a, mut b) = (best.0 - (hi - lo) / steps as f64, best.0 + (hi - lo) / steps as f64);
        for _ in 0..200 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if f(m1) < f(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn inner_risk_examples() {
        for t in 2..=5 {
            let cb = Codebook::new(t).unwrap();
            let p = vec![1.0 / t as f64; t];
            let zero = vec![0.0; t - 1];
            for kind in [MarginKind::Logistic, MarginKind::Exponential] {
                assert_abs_diff_eq!(inner_risk(kind, &cb, &p, &zero).unwrap(), 1.0, epsilon = 1e-14);
            }
        }
        let cb = Codebook::new(2).unwrap();
        let w = 0.5 * 3f64.ln();
        let v = inner_risk(MarginKind::Exponential, &cb, &[0.75, 0.25], &[w]).unwrap();
        assert_abs_diff_eq!(v, (4.0f64 * 0.75 * 0.25).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.8660, epsilon = 1e-4);
    }

    #[test]
    fn inner_risk_rejects_bad_probabilities() {
        let cb = Codebook::new(3).unwrap();
        assert!(inner_risk(MarginKind::Logistic, &cb, &[0.5, 0.6, 0.0], &[0.0, 0.0]).is_err());
        assert!(inner_minimizer(MarginKind::Logistic, &cb, &[0.5, 0.6, 0.0], 1e-8).is_err());
        assert!(inner_minimizer(MarginKind::Logistic, &cb, &[0.3, 0.3, 0.4], 0.0).is_err());
    }

    #[test]
    fn uniform_p_gives_zero() {
        for t in 2..=6 {
            let cb = Codebook::new(t).unwrap();
            for kind in [MarginKind::Logistic, MarginKind::Exponential] {
                let r = inner_minimizer(kind, &cb, &vec![1.0 / t as f64; t], DEFAULT_TOL).unwrap();
                assert!(r.argmin.iter().all(|v| v.abs() < 1e-12));
                assert!(!r.unbounded);
            }
        }
    }

    #[test]
    fn binary_minimizer_matches_grid_search() {
        let cb = Codebook::new(2).unwrap();
        for (kind, expected) in [
            (MarginKind::Logistic, 3f64.ln()),
            (MarginKind::Exponential, 0.5 * 3f64.ln()),
        ] {
            let grid = grid_argmin_1d(
                |w| 0.75 * kind.eval_unchecked(w).value + 0.25 * kind.eval_unchecked(-w).value,
                -10.0,
                10.0,
            );
            assert_abs_diff_eq!(grid, expected, epsilon = 1e-6);
            let r = inner_minimizer(kind, &cb, &[0.75, 0.25], DEFAULT_TOL).unwrap();
            assert_abs_diff_eq!(r.argmin[0], expected, epsilon = 1e-9);
            assert!(r.gradient_norm <= DEFAULT_TOL);
        }
    }

    #[test]
    fn binary_minimizer_matches_closed_forms() {
        let cb = Codebook::new(2).unwrap();
        for i in 0..9 {
            let p = 0.55 + 0.05 * i as f64;
            let logit = (p / (1.0 - p)).ln();
            let l = inner_minimizer(MarginKind::Logistic, &cb, &[p, 1.0 - p], DEFAULT_TOL).unwrap();
            let e = inner_minimizer(MarginKind::Exponential, &cb, &[p, 1.0 - p], DEFAULT_TOL).unwrap();
            assert_abs_diff_eq!(l.argmin[0], logit, epsilon = 1e-6);
            assert_abs_diff_eq!(e.argmin[0], 0.5 * logit, epsilon = 1e-6);
        }
    }

    #[test]
    fn newton_objective_decreases_monotonically() {
        let cb = Codebook::new(4).unwrap();
        let mut rng = rng::substream(3, &[99]);
        for _ in 0..50 {
            let p = sample_simplex(&mut rng, 4);
            for kind in [MarginKind::Logistic, MarginKind::Exponential] {
                let r = inner_minimizer(kind, &cb, &p, DEFAULT_TOL).unwrap();
                assert!(r.gradient_norm <= DEFAULT_TOL, "{kind:?} {p:?} {r:?}");
                for pair in r.objective_history.windows(2) {
                    assert!(pair[1] <= pair[0]);
                }
            }
        }
    }

    #[test]
    fn zero_probability_is_flagged_unbounded() {
        let cb = Codebook::new(3).unwrap();
        let r = inner_minimizer(MarginKind::Exponential, &cb, &[0.7, 0.3, 0.0], DEFAULT_TOL).unwrap();
        assert!(r.unbounded);
        assert!(r.argmin.iter().map(|v| v * v).sum::<f64>().sqrt() <= NORM_CAP + 1e-9);
        // The two supported classes run off together; the third never wins.
        assert_ne!(cb.decode(&r.argmin).unwrap(), 2);

        let cb2 = Codebook::new(2).unwrap();
        let r = inner_minimizer(MarginKind::Logistic, &cb2, &[1.0, 0.0], DEFAULT_TOL).unwrap();
        assert!(r.unbounded);
        assert!(r.argmin[0] > 0.0);
    }

    #[test]
    fn dominant_class_decodes_first() {
        let cb = Codebook::new(3).unwrap();
        for kind in [MarginKind::Logistic, MarginKind::Exponential] {
            let r = inner_minimizer(kind, &cb, &[0.9, 0.05, 0.05], DEFAULT_TOL).unwrap();
            assert_eq!(cb.decode(&r.argmin).unwrap(), 0);
        }
    }

    #[test]
    fn fisher_and_monotonicity_small_runs() {
        for t in 2..=4 {
            let cb = Codebook::new(t).unwrap();
            for kind in [MarginKind::Logistic, MarginKind::Exponential] {
                let f = check_fisher_consistency(kind, &cb, 100, 1);
                assert_eq!(f, CheckReport { checked: 100, violations: 0 });
                let m = check_monotonicity(kind, &cb, 50, 1);
                assert_eq!(m, CheckReport { checked: 50, violations: 0 });
            }
        }
    }

    #[test]
    fn binary_monotonicity_closed_form() {
        let cb = Codebook::new(2).unwrap();
        let a = inner_minimizer(MarginKind::Logistic, &cb, &[0.5, 0.5], DEFAULT_TOL).unwrap();
        let b = inner_minimizer(MarginKind::Logistic, &cb, &[0.6, 0.4], DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(a.argmin[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.argmin[0], 1.5f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn binary_margin_transfer_matches_h() {
        let cb = Codebook::new(2).unwrap();
        let mt = margin_transfer(MarginKind::Exponential, &cb, 0.25, 200).unwrap();
        assert_abs_diff_eq!(mt.m_gamma, 0.5 * 3f64.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(mt.decision_margin, 3f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn margin_transfer_argument_checks() {
        let cb = Codebook::new(3).unwrap();
        assert!(margin_transfer(MarginKind::Logistic, &cb, 0.0, 50).is_err());
        assert!(margin_transfer(MarginKind::Logistic, &cb, 0.6, 50).is_err());
        assert!(margin_transfer(MarginKind::Logistic, &cb, 0.2, 5).is_err());
    }

    #[test]
    fn margin_transfer_is_positive_monotone_and_vanishes_at_zero() {
        let cb = Codebook::new(3).unwrap();
        let kind = MarginKind::Logistic;
        let m2 = margin_transfer(kind, &cb, 0.2, 100).unwrap();
        let m2_fine = margin_transfer(kind, &cb, 0.2, 200).unwrap();
        let m3 = margin_transfer(kind, &cb, 0.3, 100).unwrap();
        let tiny = margin_transfer(kind, &cb, 1e-4, 100).unwrap();
        assert!(m2.m_gamma > 0.0);
        assert!(m2.m_gamma <= m3.m_gamma);
        assert!((m2.m_gamma - m2_fine.m_gamma).abs() <= 0.02 * m2_fine.m_gamma);
        assert!(tiny.m_gamma < 1e-3);
    }

    #[test]
    fn boundary_margin_is_the_interior_limit() {
        for t in [3usize, 4] {
            let cb = Codebook::new(t).unwrap();
            let mut p = vec![0.0; t];
            p[0] = 0.6;
            p[1] = 0.4;
            let limit = boundary_margin(&p);
            for kind in [MarginKind::Logistic, MarginKind::Exponential] {
                let mut q: Vec<f64> = p.iter().map(|v| v * (1.0 - 1e-5) + 1e-5 / t as f64).collect();
                let s: f64 = q.iter().sum();
                q.iter_mut().for_each(|v| *v /= s);
                let h = inner_minimizer(kind, &cb, &q, DEFAULT_TOL).unwrap();
                assert!(!h.unbounded, "{kind:?} T={t}");
                let m = cb.decision_margin(&h.argmin).unwrap();
                assert!((m - limit).abs() < 1e-3, "{kind:?} T={t}: {m} vs {limit}");
            }
        }
        assert!(boundary_margin(&[1.0, 0.0, 0.0]).is_infinite());
    }

    #[test]
    fn margin_transfer_grid_stability() {
        for t in [2usize, 3, 4] {
            let cb = Codebook::new(t).unwrap();
            for gamma in [0.1, 0.25, 0.4] {
                let coarse = margin_transfer(MarginKind::Logistic, &cb, gamma, 50).unwrap();
                let fine = margin_transfer(MarginKind::Logistic, &cb, gamma, 100).unwrap();
                assert!(
                    (coarse.m_gamma - fine.m_gamma).abs() <= 0.02 * fine.m_gamma,
                    "T={t} gamma={gamma}: {} vs {}",
                    coarse.m_gamma,
                    fine.m_gamma
                );
            }
        }
    }

    #[test]
    fn lattice_enumeration_counts() {
        // T=3, N=10: a in [0..5], one other coordinate c = N - 2a <= a -> a in {4, 5}.
        let mut n = 0;
        for_each_lattice_point(&[2], 10, |c, a| {
            assert_eq!(c[0] as f64 + 2.0 * a, 10.0);
            assert!(c[0] as f64 <= a);
            n += 1;
        });
        assert_eq!(n, 2);
    }
}
