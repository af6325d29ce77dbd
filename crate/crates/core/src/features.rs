//! Random Fourier features for the Gaussian kernel and the linear model on top.
//!
//! `z(x) = sqrt(2/R) cos(Omega x + b)` with the rows of `Omega` drawn from
//! `Normal(0, bandwidth^-2 I)` and `b` uniform on `[0, 2 pi)`, so that
//! `<z(x), z(x')>` approximates `exp(-||x - x'||^2 / (2 bandwidth^2))`.
//!
//! # Model file format
//!
//! [`LinearRffModel::write_to`] emits a flat little-endian binary file:
//!
//! | bytes        | content                                   |
//! |--------------|-------------------------------------------|
//! | 8            | magic `SMRFF001`                          |
//! | 4 x u64      | input dim `d`, features `R`, outputs `K`, seed |
//! | f64          | bandwidth                                 |
//! | `R*d` f64    | frequencies, row-major                    |
//! | `R` f64      | phases                                    |
//! | `R*K` f64    | weights, row-major                        |
//!
//! Frequencies and phases are stored so that a file never depends on the
//! sampler reproducing them.
//!
//! A model on the identity map ([`FeatureMap::identity`], `z(x) = x`) uses
//! the magic `SMLIN001`, has `R = d`, seed and bandwidth 0, and stores no
//! frequencies or phases.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::codec::{ClassIndex, Codebook};
use crate::error::{check_dim, invalid, Error, Result};
use crate::rng;

pub const MODEL_MAGIC: &[u8; 8] = b"SMRFF001";
pub const LINEAR_MODEL_MAGIC: &[u8; 8] = b"SMLIN001";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Random Fourier features of a Gaussian kernel.
    RandomFourier,
    /// `z(x) = x`: the model is linear in the raw input.
    Identity,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::RandomFourier => "rff",
            FeatureKind::Identity => "linear",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rff" => Ok(FeatureKind::RandomFourier),
            "linear" => Ok(FeatureKind::Identity),
            other => Err(invalid(format!("unknown feature map '{other}' (expected rff or linear)"))),
        }
    }
}

/// A feature map `R^d -> R^R`: sampled random Fourier features, or the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    kind: FeatureKind,
    input_dim: usize,
    num_features: usize,
    /// `R x d`.
    frequencies: Array2<f64>,
    phases: Array1<f64>,
    bandwidth: f64,
    seed: u64,
}

impl FeatureMap {
    /// Samples a map deterministically from `seed`.
    ///
    /// Frequencies are drawn first, row by row, then the phases, all from the
    /// feature-map substream of `seed`.
    pub fn sample(input_dim: usize, num_features: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 || num_features == 0 {
            return Err(invalid(format!(
                "feature map needs positive dimensions, got d={input_dim} R={num_features}"
            )));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let mut rng = rng::substream(seed, &[rng::purpose::FEATURE_MAP]);
        let normal = Normal::new(0.0, 1.0 / bandwidth).expect("finite positive std");
        let frequencies =
            Array2::from_shape_fn((num_features, input_dim), |_| normal.sample(&mut rng));
        let phases = Array1::from_shape_fn(num_features, |_| {
            rng.random_range(0.0..std::f64::consts::TAU)
        });
        Ok(FeatureMap {
            kind: FeatureKind::RandomFourier,
            input_dim,
            num_features,
            frequencies,
            phases,
            bandwidth,
            seed,
        })
    }

    /// `z(x) = x`, with `R = d`.
    pub fn identity(input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(invalid("feature map needs a positive input dimension"));
        }
        Ok(FeatureMap {
            kind: FeatureKind::Identity,
            input_dim,
            num_features: input_dim,
            frequencies: Array2::zeros((0, input_dim)),
            phases: Array1::zeros(0),
            bandwidth: 0.0,
            seed: 0,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Kernel bandwidth; 0 for the identity map.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frequencies(&self) -> ArrayView2<'_, f64> {
        self.frequencies.view()
    }

    pub fn phases(&self) -> ArrayView1<'_, f64> {
        self.phases.view()
    }

    /// `z(x)`.
    pub fn transform(&self, x: &[f64]) -> Result<Array1<f64>> {
        check_dim(self.input_dim, x.len())?;
        if self.kind == FeatureKind::Identity {
            return Ok(Array1::from(x.to_vec()));
        }
        let scale = (2.0 / self.num_features as f64).sqrt();
        let x = ArrayView1::from(x);
        Ok((self.frequencies.dot(&x) + &self.phases).mapv(|v| scale * v.cos()))
    }

    /// `z` applied to every row of `points`, giving an `n x R` matrix.
    pub fn transform_rows(&self, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim, points.ncols())?;
        if self.kind == FeatureKind::Identity {
            return Ok(points.to_owned());
        }
        let scale = (2.0 / self.num_features as f64).sqrt();
        let mut z = points.dot(&self.frequencies.t());
        for mut row in z.rows_mut() {
            row += &self.phases;
            row.mapv_inplace(|v| scale * v.cos());
        }
        Ok(z)
    }

    /// `<z(x), z(x')>`, the approximation of the Gaussian kernel (the linear
    /// kernel for the identity map).
    pub fn kernel(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        Ok(self.transform(x)?.dot(&self.transform(x2)?))
    }
}

/// Exact Gaussian kernel `exp(-||x - x'||^2 / (2 bandwidth^2))`.
pub fn gaussian_kernel(x: &[f64], x2: &[f64], bandwidth: f64) -> f64 {
    let d2: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * bandwidth * bandwidth)).exp()
}

/// `f(x) = W^T z(x)` with `W` of shape `R x (T-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRffModel {
    pub feature_map: FeatureMap,
    weights: Array2<f64>,
}

impl LinearRffModel {
    pub fn new(feature_map: FeatureMap, weights: Array2<f64>) -> Result<Self> {
        check_dim(feature_map.num_features(), weights.nrows())?;
        if weights.ncols() == 0 {
            return Err(invalid("model must have at least one output"));
        }
        Ok(LinearRffModel {
            feature_map,
            weights,
        })
    }

    /// Zero weights for a `num_classes`-class problem.
    pub fn zeros(feature_map: FeatureMap, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(invalid(format!("need at least 2 classes, got {num_classes}")));
        }
        let weights = Array2::zeros((feature_map.num_features(), num_classes - 1));
        Self::new(feature_map, weights)
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn set_weights(&mut self, weights: Array2<f64>) -> Result<()> {
        if weights.dim() != self.weights.dim() {
            return Err(invalid(format!(
                "weight shape {:?} does not match {:?}",
                weights.dim(),
                self.weights.dim()
            )));
        }
        self.weights = weights;
        Ok(())
    }

    /// Dimension of the prediction, `T - 1`.
    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.feature_map.transform(x)?;
        Ok(self.weights.t().dot(&z).to_vec())
    }

    /// Predictions for every row of `points`, `n x (T-1)`.
    pub fn predict_rows(&self, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.feature_map.transform_rows(points)?.dot(&self.weights))
    }

    /// Plug-in classifier `D(f(x))`.
    pub fn classify(&self, cb: &Codebook, x: &[f64]) -> Result<ClassIndex> {
        check_dim(cb.dim(), self.output_dim())?;
        cb.decode(&self.predict(x)?)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let fm = &self.feature_map;
        out.write_all(match fm.kind {
            FeatureKind::RandomFourier => MODEL_MAGIC,
            FeatureKind::Identity => LINEAR_MODEL_MAGIC,
        })?;
        for v in [
            fm.input_dim as u64,
            fm.num_features as u64,
            self.output_dim() as u64,
            fm.seed,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&fm.bandwidth.to_le_bytes())?;
        for v in fm
            .frequencies
            .iter()
            .chain(fm.phases.iter())
            .chain(self.weights.iter())
        {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        let kind = match &magic {
            m if m == MODEL_MAGIC => FeatureKind::RandomFourier,
            m if m == LINEAR_MODEL_MAGIC => FeatureKind::Identity,
            _ => return Err(Error::Parse("not a model file (bad magic)".into())),
        };
        let mut word = [0u8; 8];
        let mut next_u64 = |input: &mut R| -> Result<u64> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let d = next_u64(&mut input)? as usize;
        let r = next_u64(&mut input)? as usize;
        let k = next_u64(&mut input)? as usize;
        let seed = next_u64(&mut input)?;
        let bandwidth = f64::from_bits(next_u64(&mut input)?);
        let header_ok = match kind {
            FeatureKind::RandomFourier => bandwidth > 0.0,
            FeatureKind::Identity => r == d,
        };
        if d == 0 || r == 0 || k == 0 || !header_ok {
            return Err(Error::Parse("model header has invalid dimensions".into()));
        }
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            input.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect())
        };
        let stored = if kind == FeatureKind::Identity { 0 } else { r };
        let frequencies = Array2::from_shape_vec((stored, d), read_f64s(stored * d)?)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let phases = Array1::from_vec(read_f64s(stored)?);
        let weights = Array2::from_shape_vec((r, k), read_f64s(r * k)?)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let feature_map = FeatureMap {
            kind,
            input_dim: d,
            num_features: r,
            frequencies,
            phases,
            bandwidth,
            seed,
        };
        Self::new(feature_map, weights)
    }
}
