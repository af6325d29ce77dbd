//! Simplex label coding.
//!
//! The `T` classes are embedded as the vertices of a regular simplex centred
//! at the origin of `R^{T-1}`: unit vectors with pairwise inner product
//! `-1/(T-1)`. A vector is decoded to the class whose vertex has the largest
//! projection, and the gap between the two largest projections is the
//! decision margin.

use crate::error::{check_dim, invalid, Result};

/// Tolerance accepted on the probability-simplex constraints of an input `p`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Index of a class, `0 <= index < T`.
pub type ClassIndex = usize;

/// The `T` simplex vertices in `R^{T-1}`.
///
/// Ties in [`Codebook::decode`] go to the lowest class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    num_classes: usize,
    /// Row-major `T x (T-1)`.
    vertices: Vec<f64>,
}

impl Codebook {
    /// Builds the canonical codebook for `num_classes >= 2` classes.
    ///
    /// Vertices are `sqrt(T/(T-1)) * Q (e_i - 1/T)` where the columns of `Q`
    /// are the Gram-Schmidt orthonormalisation of `e_1 - e_2, ..., e_1 - e_T`
    /// taken in index order. For `T = 2` this gives `{+1, -1}`.
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(invalid(format!(
                "codebook needs at least 2 classes, got {num_classes}"
            )));
        }
        let t = num_classes;
        let k = t - 1;
        // Orthonormal basis of the sum-zero subspace of R^T, one row per basis vector.
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
        for j in 1..t {
            let mut v = vec![0.0; t];
            v[0] = 1.0;
            v[j] = -1.0;
            for q in &basis {
                let c: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
        let scale = (t as f64 / k as f64).sqrt();
        let mut vertices = vec![0.0; t * k];
        for i in 0..t {
            for (c, q) in basis.iter().enumerate() {
                // q is orthogonal to the all-ones vector, so <q, e_i - 1/T> = q_i.
                vertices[i * k + c] = scale * q[i];
            }
        }
        Ok(Codebook {
            num_classes: t,
            vertices,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Dimension of the code space, `T - 1`.
    pub fn dim(&self) -> usize {
        self.num_classes - 1
    }

    /// Vertex of class `class`.
    ///
    /// Panics if `class >= T`.
    pub fn vertex(&self, class: ClassIndex) -> &[f64] {
        let k = self.dim();
        &self.vertices[class * k..(class + 1) * k]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.vertices.chunks_exact(self.dim())
    }

    /// `<w, y_i>` for every class.
    pub fn projections(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), w.len())?;
        Ok(self.projections_unchecked(w))
    }

    pub(crate) fn projections_unchecked(&self, w: &[f64]) -> Vec<f64> {
        self.vertices().map(|y| dot(w, y)).collect()
    }

    /// Class with the largest projection; ties resolved to the lowest index.
    pub fn decode(&self, w: &[f64]) -> Result<ClassIndex> {
        check_dim(self.dim(), w.len())?;
        Ok(self.decode_unchecked(w))
    }

    pub(crate) fn decode_unchecked(&self, w: &[f64]) -> ClassIndex {
        top_two(self.vertices().map(|y| dot(w, y))).0
    }

    /// Decision margin `M(w) = min_{y != D(w)} <w, D(w) - y>`, the gap between
    /// the largest and second-largest projections. Always `>= 0`.
    pub fn decision_margin(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim(), w.len())?;
        Ok(self.decision_margin_unchecked(w))
    }

    pub(crate) fn decision_margin_unchecked(&self, w: &[f64]) -> f64 {
        let (_, first, second) = top_two(self.vertices().map(|y| dot(w, y)));
        (first - second).max(0.0)
    }

    /// Barycentre map `beta(p) = sum_y p_y y` from the probability simplex
    /// onto the convex hull of the codebook.
    pub fn barycenter(&self, p: &[f64]) -> Result<Vec<f64>> {
        let p = to_simplex(p, self.num_classes)?;
        let mut out = vec![0.0; self.dim()];
        for (py, y) in p.iter().zip(self.vertices()) {
            for (o, yi) in out.iter_mut().zip(y) {
                *o += py * yi;
            }
        }
        Ok(out)
    }
}

/// Validates a probability vector over `num_classes` classes and renormalises
/// it. Entries may undershoot zero and the sum may miss one by at most
/// [`SIMPLEX_TOL`]; anything further away is rejected.
pub fn to_simplex(p: &[f64], num_classes: usize) -> Result<Vec<f64>> {
    check_dim(num_classes, p.len())?;
    if p.iter().any(|v| !v.is_finite() || *v < -SIMPLEX_TOL) {
        return Err(invalid(format!("probability vector has negative or non-finite entries: {p:?}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(invalid(format!("probability vector sums to {sum}, not 1")));
    }
    let clipped: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    Ok(clipped.into_iter().map(|v| v / s).collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// (argmax, max, second max); argmax is the first index attaining the max.
fn top_two(values: impl Iterator<Item = f64>) -> (usize, f64, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best.1 {
            second = best.1;
            best = (i, v);
        } else if v > second {
            second = v;
        }
    }
    (best.0, best.1, second)
}
