//! Monte-Carlo risk and distance estimators.

use ndarray::ArrayView2;

use crate::codec::{ClassIndex, Codebook};
use crate::error::{invalid, Result};
use crate::synthetic::Dataset;

/// A Monte-Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub value: f64,
    pub n_eval: usize,
    pub std_error: f64,
}

impl RiskEstimate {
    fn from_count(errors: usize, n: usize) -> Self {
        let value = errors as f64 / n as f64;
        RiskEstimate {
            value,
            n_eval: n,
            std_error: (value * (1.0 - value) / n as f64).sqrt(),
        }
    }
}

fn rows(points: ArrayView2<'_, f64>) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..points.nrows()).map(move |i| points.row(i).to_vec())
}

/// Fraction of `eval_set` that `classifier` gets wrong.
pub fn zero_one_risk<C>(classifier: C, eval_set: &Dataset) -> Result<RiskEstimate>
where
    C: Fn(&[f64]) -> ClassIndex,
{
    if eval_set.is_empty() {
        return Err(invalid("cannot estimate risk on an empty set"));
    }
    let errors = rows(eval_set.points())
        .zip(eval_set.labels())
        .filter(|(x, &y)| classifier(x) != y)
        .count();
    Ok(RiskEstimate::from_count(errors, eval_set.len()))
}

/// Fraction of `eval_points` (one per row) where the two classifiers disagree.
pub fn hamming_distance<C1, C2>(c1: C1, c2: C2, eval_points: ArrayView2<'_, f64>) -> Result<f64>
where
    C1: Fn(&[f64]) -> ClassIndex,
    C2: Fn(&[f64]) -> ClassIndex,
{
    if eval_points.nrows() == 0 {
        return Err(invalid("cannot estimate a distance on an empty set"));
    }
    let disagree = rows(eval_points).filter(|x| c1(x) != c2(x)).count();
    Ok(disagree as f64 / eval_points.nrows() as f64)
}

/// `max_x ||f1(x) - f2(x)||` over the grid. This is a lower bound on the true
/// sup-norm distance; it is exact only if the maximiser lies on the grid.
pub fn sup_norm_distance<F1, F2>(f1: F1, f2: F2, grid: ArrayView2<'_, f64>) -> Result<f64>
where
    F1: Fn(&[f64]) -> Vec<f64>,
    F2: Fn(&[f64]) -> Vec<f64>,
{
    if grid.nrows() == 0 {
        return Err(invalid("sup-norm grid is empty"));
    }
    Ok(rows(grid)
        .map(|x| {
            f1(&x)
                .iter()
                .zip(f2(&x))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}

/// Lattice with `per_side` points per axis over `[-1, 1]^2`, restricted to
/// the closed unit disk.
pub fn disk_grid(per_side: usize) -> ndarray::Array2<f64> {
    let mut coords = Vec::new();
    let step = if per_side > 1 { 2.0 / (per_side - 1) as f64 } else { 0.0 };
    for i in 0..per_side {
        for j in 0..per_side {
            let (x, y) = (-1.0 + i as f64 * step, -1.0 + j as f64 * step);
            if x * x + y * y <= 1.0 {
                coords.push(x);
                coords.push(y);
            }
        }
    }
    ndarray::Array2::from_shape_vec((coords.len() / 2, 2), coords).expect("pairs")
}

/// Empirical CDF of the decision margin `M(f(X))` at each threshold.
pub fn margin_histogram<F>(
    f: F,
    cb: &Codebook,
    eval_points: ArrayView2<'_, f64>,
    thresholds: &[f64],
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("thresholds must be sorted ascending"));
    }
    let n = eval_points.nrows();
    if n == 0 {
        return Ok(vec![0.0; thresholds.len()]);
    }
    let mut margins = rows(eval_points)
        .map(|x| cb.decision_margin(&f(&x)))
        .collect::<Result<Vec<f64>>>()?;
    margins.sort_by(f64::total_cmp);
    Ok(thresholds
        .iter()
        .map(|&t| margins.partition_point(|&m| m <= t) as f64 / n as f64)
        .collect())
}

/// `sqrt((T-1) / (2T))`: a perturbation of `f` smaller than this times
/// `M(f(x))` cannot change the decoded class at `x`.
pub fn decode_stability_factor(num_classes: usize) -> f64 {
    ((num_classes as f64 - 1.0) / (2.0 * num_classes as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{gen_hard_margin, gen_soft_margin, sector, sector_field};
    use ndarray::Array2;

    #[test]
    fn oracle_and_constant_classifiers() {
        let ds = gen_hard_margin(3000, 3, 0.1, 2).unwrap();
        let oracle = zero_one_risk(|x| sector(x, 3), &ds).unwrap();
        assert_eq!(oracle.value, 0.0);
        assert_eq!(oracle.std_error, 0.0);
        let constant = zero_one_risk(|_| 0, &ds).unwrap();
        assert!((constant.value - 2.0 / 3.0).abs() <= 3.0 * constant.std_error + 0.01);
        assert!((0.0..=1.0).contains(&constant.value));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let empty = Dataset::new(Array2::zeros((0, 2)), vec![], 3).unwrap();
        assert!(zero_one_risk(|_| 0, &empty).is_err());
        assert!(hamming_distance(|_| 0, |_| 1, empty.points()).is_err());
        assert!(sup_norm_distance(|_| vec![0.0], |_| vec![0.0], empty.points()).is_err());
    }

    #[test]
    fn hamming_is_zero_on_self_and_symmetric() {
        let pts = disk_grid(40);
        let c1 = |x: &[f64]| sector(x, 3);
        let c2 = |x: &[f64]| if x[0] > 0.2 { 1 } else { sector(x, 3) };
        assert_eq!(hamming_distance(c1, c1, pts.view()).unwrap(), 0.0);
        let (a, b) = (
            hamming_distance(c1, c2, pts.view()).unwrap(),
            hamming_distance(c2, c1, pts.view()).unwrap(),
        );
        assert!(a > 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn sup_norm_examples() {
        let grid = disk_grid(20);
        let f = |x: &[f64]| vec![x[0], x[1] * x[1]];
        assert_eq!(sup_norm_distance(f, f, grid.view()).unwrap(), 0.0);
        let g = |x: &[f64]| vec![x[0] + 0.3, x[1] * x[1] - 0.4];
        assert!((sup_norm_distance(f, g, grid.view()).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disk_grid_stays_in_the_disk() {
        let g = disk_grid(200);
        assert!(g.rows().into_iter().all(|r| r[0] * r[0] + r[1] * r[1] <= 1.0));
        // Roughly pi/4 of the square.
        let frac = g.nrows() as f64 / 40_000.0;
        assert!((frac - std::f64::consts::FRAC_PI_4).abs() < 0.01);
    }

    #[test]
    fn margin_cdf_of_generator_fields() {
        let cb = Codebook::new(3).unwrap();
        let field = |x: &[f64]| sector_field(&cb, x);
        let hard = gen_hard_margin(5000, 3, 0.2, 1).unwrap();
        let cdf = margin_histogram(field, &cb, hard.points(), &[0.1, 0.19, 0.5, 2.0]).unwrap();
        assert_eq!(cdf[0], 0.0);
        assert_eq!(cdf[1], 0.0);
        assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
        assert!(cdf[3] <= 1.0);

        let soft = gen_soft_margin(10_000, 3, 1.0, 1).unwrap();
        let cdf = margin_histogram(field, &cb, soft.points(), &[0.5]).unwrap();
        assert!((cdf[0] - 0.5).abs() < 0.02);

        assert!(margin_histogram(field, &cb, soft.points(), &[0.5, 0.1]).is_err());
    }
}
