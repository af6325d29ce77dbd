//! Surrogate losses on simplex codes.

use std::fmt;
use std::str::FromStr;

use crate::codec::{dot, ClassIndex, Codebook};
use crate::error::{check_dim, invalid, Error, Result};

/// Below this argument the logistic value is computed as `-t + log1p(e^t)`.
const LOGISTIC_SWITCH: f64 = -30.0;

/// Scalar margin function `phi`: convex, non-increasing, twice differentiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarginKind {
    /// `phi(t) = ln(1 + e^{-t}) / ln 2`
    Logistic,
    /// `phi(t) = e^{-t}`
    Exponential,
}

/// `phi(t)`, `phi'(t)` and `phi''(t)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiEval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl MarginKind {
    /// Value and first two derivatives; errors on non-finite `t`.
    pub fn eval(self, t: f64) -> Result<PhiEval> {
        if !t.is_finite() {
            return Err(invalid(format!("phi argument must be finite, got {t}")));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(self, t: f64) -> PhiEval {
        match self {
            MarginKind::Logistic => {
                let ln2 = std::f64::consts::LN_2;
                let value = if t < LOGISTIC_SWITCH {
                    -t + t.exp().ln_1p()
                } else {
                    (-t).exp().ln_1p()
                };
                // sigma(-t) and sigma(t) without overflow.
                let (s_neg, s_pos) = if t >= 0.0 {
                    let e = (-t).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = t.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                PhiEval {
                    value: value / ln2,
                    d1: -s_neg / ln2,
                    d2: s_neg * s_pos / ln2,
                }
            }
            MarginKind::Exponential => {
                let e = (-t).exp();
                PhiEval {
                    value: e,
                    d1: -e,
                    d2: e,
                }
            }
        }
    }

    /// Upper bound on `phi''` over the whole line, if there is one.
    pub fn curvature_bound(self) -> Option<f64> {
        match self {
            MarginKind::Logistic => Some(0.25 / std::f64::consts::LN_2),
            MarginKind::Exponential => None,
        }
    }
}

/// A surrogate for the 0-1 loss on predictions in `R^{T-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurrogateLoss {
    /// `||w - y||^2`
    Square,
    /// `phi(<w, y>)`
    Margin(MarginKind),
}

impl SurrogateLoss {
    pub const LOGISTIC: SurrogateLoss = SurrogateLoss::Margin(MarginKind::Logistic);
    pub const EXPONENTIAL: SurrogateLoss = SurrogateLoss::Margin(MarginKind::Exponential);

    pub const ALL: [SurrogateLoss; 3] = [
        SurrogateLoss::Square,
        SurrogateLoss::LOGISTIC,
        SurrogateLoss::EXPONENTIAL,
    ];

    /// Loss value and its gradient with respect to `w`.
    pub fn value_and_grad(
        self,
        cb: &Codebook,
        w: &[f64],
        class: ClassIndex,
    ) -> Result<(f64, Vec<f64>)> {
        check_dim(cb.dim(), w.len())?;
        if class >= cb.num_classes() {
            return Err(invalid(format!(
                "class {class} out of range for {} classes",
                cb.num_classes()
            )));
        }
        let mut grad = vec![0.0; w.len()];
        let value = self.value_and_grad_into(cb.vertex(class), w, &mut grad);
        Ok((value, grad))
    }

    /// Writes the gradient into `grad` and returns the value. `code` is the
    /// vertex of the target class.
    pub(crate) fn value_and_grad_into(self, code: &[f64], w: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            SurrogateLoss::Square => {
                let mut value = 0.0;
                for ((g, wi), yi) in grad.iter_mut().zip(w).zip(code) {
                    let r = wi - yi;
                    value += r * r;
                    *g = 2.0 * r;
                }
                value
            }
            SurrogateLoss::Margin(kind) => {
                let phi = kind.eval_unchecked(dot(w, code));
                for (g, yi) in grad.iter_mut().zip(code) {
                    *g = phi.d1 * yi;
                }
                phi.value
            }
        }
    }

    pub(crate) fn value(self, code: &[f64], w: &[f64]) -> f64 {
        match self {
            SurrogateLoss::Square => w.iter().zip(code).map(|(a, b)| (a - b) * (a - b)).sum(),
            SurrogateLoss::Margin(kind) => kind.eval_unchecked(dot(w, code)).value,
        }
    }

    /// Global bound on the Hessian of the loss in `w`, if one exists.
    pub fn smoothness(self) -> Option<f64> {
        match self {
            SurrogateLoss::Square => Some(2.0),
            // Hessian is phi'' y y^T and ||y|| = 1.
            SurrogateLoss::Margin(kind) => kind.curvature_bound(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SurrogateLoss::Square => "square",
            SurrogateLoss::Margin(MarginKind::Logistic) => "logistic",
            SurrogateLoss::Margin(MarginKind::Exponential) => "exponential",
        }
    }
}

impl fmt::Display for SurrogateLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurrogateLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "square" => Ok(SurrogateLoss::Square),
            "logistic" => Ok(SurrogateLoss::LOGISTIC),
            "exponential" => Ok(SurrogateLoss::EXPONENTIAL),
            other => Err(invalid(format!("unknown loss '{other}'"))),
        }
    }
}

impl FromStr for MarginKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<SurrogateLoss>()? {
            SurrogateLoss::Margin(kind) => Ok(kind),
            SurrogateLoss::Square => Err(invalid("square is not a margin loss")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phi_at_zero() {
        let l = MarginKind::Logistic.eval(0.0).unwrap();
        assert_abs_diff_eq!(l.value, 1.0, epsilon = 1e-15);
        let e = MarginKind::Exponential.eval(0.0).unwrap();
        assert_eq!((e.value, e.d1, e.d2), (1.0, -1.0, 1.0));
    }

    #[test]
    fn phi_rejects_non_finite() {
        for kind in [MarginKind::Logistic, MarginKind::Exponential] {
            assert!(kind.eval(f64::NAN).is_err());
            assert!(kind.eval(f64::INFINITY).is_err());
        }
    }

    #[test]
    fn logistic_is_stable_and_monotone_over_wide_range() {
        let mut prev = f64::INFINITY;
        let mut t = -500.0;
        while t <= 500.0 {
            let e = MarginKind::Logistic.eval(t).unwrap();
            assert!(e.value.is_finite() && e.d1.is_finite() && e.d2.is_finite(), "t={t}");
            assert!(e.value <= prev && e.value >= 0.0);
            assert!(e.d1 <= 0.0 && e.d2 >= 0.0);
            prev = e.value;
            t += 0.5;
        }
        assert!(prev < 1e-200);
        // Far left the value is asymptotically -t / ln 2.
        let far = MarginKind::Logistic.eval(-500.0).unwrap();
        assert_abs_diff_eq!(far.value, 500.0 / std::f64::consts::LN_2, epsilon = 1e-9);
    }

    #[test]
    fn phi_derivatives_match_finite_differences() {
        let h = 1e-5;
        for kind in [MarginKind::Logistic, MarginKind::Exponential] {
            for &t in &[-40.0, -5.0, -0.3, 0.0, 0.7, 4.0, 25.0] {
                let e = kind.eval(t).unwrap();
                let (p, m) = (kind.eval(t + h).unwrap(), kind.eval(t - h).unwrap());
                let d1 = (p.value - m.value) / (2.0 * h);
                let d2 = (p.d1 - m.d1) / (2.0 * h);
                assert!((d1 - e.d1).abs() <= 1e-6 * (1.0 + e.d1.abs()), "{kind:?} t={t}");
                assert!((d2 - e.d2).abs() <= 1e-6 * (1.0 + e.d2.abs()), "{kind:?} t={t}");
            }
        }
    }

    #[test]
    fn loss_examples() {
        let cb2 = Codebook::new(2).unwrap();
        let (v, g) = SurrogateLoss::Square.value_and_grad(&cb2, &[0.0], 0).unwrap();
        assert_eq!((v, g[0]), (1.0, -2.0));

        for t in 2..=6 {
            let cb = Codebook::new(t).unwrap();
            for y in 0..t {
                let (v, g) = SurrogateLoss::Square
                    .value_and_grad(&cb, cb.vertex(y), y)
                    .unwrap();
                assert_eq!(v, 0.0);
                assert!(g.iter().all(|x| *x == 0.0));

                let zero = vec![0.0; t - 1];
                let (v, g) = SurrogateLoss::EXPONENTIAL.value_and_grad(&cb, &zero, y).unwrap();
                assert_eq!(v, 1.0);
                for (gi, yi) in g.iter().zip(cb.vertex(y)) {
                    assert_eq!(*gi, -yi);
                }
            }
        }
    }

    #[test]
    fn loss_rejects_bad_shapes() {
        let cb = Codebook::new(3).unwrap();
        assert!(SurrogateLoss::Square.value_and_grad(&cb, &[0.0], 0).is_err());
        assert!(SurrogateLoss::LOGISTIC.value_and_grad(&cb, &[0.0, 0.0], 3).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for loss in SurrogateLoss::ALL {
            for _ in 0..100 {
                let t = rng.random_range(2..=6);
                let cb = Codebook::new(t).unwrap();
                let y = rng.random_range(0..t);
                let w: Vec<f64> = (0..t - 1).map(|_| rng.random_range(-2.0..2.0)).collect();
                let (_, g) = loss.value_and_grad(&cb, &w, y).unwrap();
                for i in 0..w.len() {
                    let (mut wp, mut wm) = (w.clone(), w.clone());
                    wp[i] += h;
                    wm[i] -= h;
                    let fd = (loss.value_and_grad(&cb, &wp, y).unwrap().0
                        - loss.value_and_grad(&cb, &wm, y).unwrap().0)
                        / (2.0 * h);
                    let rel = (fd - g[i]).abs() / g[i].abs().max(1e-8).max(fd.abs());
                    assert!(rel <= 1e-5 || (fd - g[i]).abs() < 1e-9, "{loss} rel={rel}");
                }
            }
        }
    }

    #[test]
    fn binary_square_loss_is_a_margin_function() {
        let cb = Codebook::new(2).unwrap();
        for &w in &[-2.0, -0.4, 0.0, 0.3, 1.7] {
            for y in 0..2 {
                let yv = cb.vertex(y)[0];
                let (v, _) = SurrogateLoss::Square.value_and_grad(&cb, &[w], y).unwrap();
                assert_abs_diff_eq!(v, (1.0 - w * yv).powi(2), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for loss in SurrogateLoss::ALL {
            assert_eq!(loss.name().parse::<SurrogateLoss>().unwrap(), loss);
        }
        assert!("hinge".parse::<SurrogateLoss>().is_err());
        assert!("square".parse::<MarginKind>().is_err());
    }

    proptest! {
        #[test]
        fn convex_along_lines(
            w1 in prop::collection::vec(-4.0f64..4.0, 2),
            w2 in prop::collection::vec(-4.0f64..4.0, 2),
            y in 0usize..3,
            s in 0.0f64..=1.0,
            which in 0usize..3,
        ) {
            let cb = Codebook::new(3).unwrap();
            let loss = SurrogateLoss::ALL[which];
            let mid: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| s * a + (1.0 - s) * b).collect();
            let f = |w: &[f64]| loss.value_and_grad(&cb, w, y).unwrap().0;
            prop_assert!(f(&mid) <= s * f(&w1) + (1.0 - s) * f(&w2) + 1e-10);
        }
    }
}
