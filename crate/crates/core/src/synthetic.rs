//! Synthetic two-dimensional classification problems with controlled margins.
//!
//! The unit disk is cut into `T` equal angular sectors; sector `k` spans the
//! angles `[2 pi k / T, 2 pi (k+1) / T)` and its label is `k`. Labels are
//! noiseless, so the Bayes rule is the sector map and the Bayes risk is zero.
//!
//! The margin of a point is `2 d(x)`, where `d(x)` is the Euclidean distance
//! to the nearest sector boundary ray. [`sector_field`] realises this as a
//! decision margin: `M(sector_field(x)) = 2 d(x)`.
//!
//! * Hard margin `delta`: uniform on the disk, minus every point with
//!   `d(x) < delta / 2`.
//! * Soft margin `alpha`: margins follow `P{M <= t} = t^alpha` on `(0, 1]`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::codec::{ClassIndex, Codebook};
use crate::error::{check_dim, invalid, Error, Result};
use crate::rng;

/// Margin regime of a generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginSpec {
    /// Geometric gap `delta` between sectors, `0 < delta < 0.5`.
    Hard { delta: f64 },
    /// Polynomial margin law with exponent `alpha > 0`.
    Soft { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    pub margin: MarginSpec,
    pub num_classes: usize,
}

impl DistributionSpec {
    pub fn hard(num_classes: usize, delta: f64) -> Result<Self> {
        check_classes(num_classes, usize::MAX)?;
        if !(delta > 0.0 && delta < 0.5) {
            return Err(invalid(format!("hard margin delta must lie in (0, 0.5), got {delta}")));
        }
        Ok(DistributionSpec {
            margin: MarginSpec::Hard { delta },
            num_classes,
        })
    }

    pub fn soft(num_classes: usize, alpha: f64) -> Result<Self> {
        check_classes(num_classes, MAX_SOFT_CLASSES)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("soft margin alpha must be positive, got {alpha}")));
        }
        Ok(DistributionSpec {
            margin: MarginSpec::Soft { alpha },
            num_classes,
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.margin {
            MarginSpec::Hard { .. } => "hard",
            MarginSpec::Soft { .. } => "soft",
        }
    }
}

/// Above five sectors a strip of half-width 1/2 no longer fits inside one
/// sector of the unit disk.
pub const MAX_SOFT_CLASSES: usize = 5;

fn check_classes(t: usize, max: usize) -> Result<()> {
    if t < 2 || t > max {
        return Err(invalid(format!("number of classes {t} outside [2, {max}]")));
    }
    Ok(())
}

/// Generator settings a dataset was drawn with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetMeta {
    pub spec: DistributionSpec,
    pub seed: u64,
}

impl fmt::Display for DatasetMeta {
    /// Sidecar format: one `key=value` per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kind={}", self.spec.kind_name())?;
        writeln!(f, "num_classes={}", self.spec.num_classes)?;
        match self.spec.margin {
            MarginSpec::Hard { delta } => writeln!(f, "delta={delta}")?,
            MarginSpec::Soft { alpha } => writeln!(f, "alpha={alpha}")?,
        }
        writeln!(f, "seed={}", self.seed)
    }
}

impl DatasetMeta {
    pub fn parse(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("metadata is missing '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Parse(format!("metadata '{k}' is not a number")))
        };
        let num_classes: usize = get("num_classes")?
            .parse()
            .map_err(|_| Error::Parse("metadata 'num_classes' is not an integer".into()))?;
        let seed: u64 = get("seed")?
            .parse()
            .map_err(|_| Error::Parse("metadata 'seed' is not an integer".into()))?;
        let spec = match get("kind")? {
            "hard" => DistributionSpec::hard(num_classes, num("delta")?)?,
            "soft" => DistributionSpec::soft(num_classes, num("alpha")?)?,
            other => return Err(Error::Parse(format!("unknown dataset kind '{other}'"))),
        };
        Ok(DatasetMeta { spec, seed })
    }
}

/// Labelled points, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    labels: Vec<ClassIndex>,
    num_classes: usize,
    pub meta: Option<DatasetMeta>,
}

impl Dataset {
    pub fn new(points: Array2<f64>, labels: Vec<ClassIndex>, num_classes: usize) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(invalid(format!(
                "{} points but {} labels",
                points.nrows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(invalid(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Dataset {
            points,
            labels,
            num_classes,
            meta: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn labels(&self) -> &[ClassIndex] {
        &self.labels
    }

    /// Writes `x1,...,xd,label` CSV and, when metadata is present, a
    /// `<path>.meta` sidecar.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, label) in self.points.rows().into_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        if let Some(meta) = &self.meta {
            fs::write(sidecar_path(path), meta.to_string())?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`Dataset::write_csv`]. The number of classes is
    /// taken from the sidecar if there is one, else from the largest label.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let dim = headers.len().saturating_sub(1);
        if dim == 0 || &headers[dim] != "label" {
            return Err(Error::Parse("expected header x1,...,xd,label".into()));
        }
        let mut coords = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for v in rec.iter().take(dim) {
                coords.push(v.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
            }
            labels.push(rec[dim].parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?);
        }
        let meta = match fs::read_to_string(sidecar_path(path)) {
            Ok(text) => Some(DatasetMeta::parse(&text)?),
            Err(_) => None,
        };
        let num_classes = match &meta {
            Some(m) => m.spec.num_classes,
            None => labels.iter().max().map_or(2, |m| (m + 1).max(2)),
        };
        let points = Array2::from_shape_vec((labels.len(), dim), coords)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut ds = Dataset::new(points, labels, num_classes)?;
        ds.meta = meta;
        Ok(ds)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Unit direction of boundary ray `k`.
fn ray(k: usize, num_classes: usize) -> [f64; 2] {
    let a = TAU * k as f64 / num_classes as f64;
    [a.cos(), a.sin()]
}

fn distance_to_ray(x: &[f64], u: [f64; 2]) -> f64 {
    let along = x[0] * u[0] + x[1] * u[1];
    if along <= 0.0 {
        x[0].hypot(x[1])
    } else {
        (x[0] * u[1] - x[1] * u[0]).abs()
    }
}

/// Euclidean distance from `x` to the nearest sector boundary ray.
pub fn boundary_distance(x: &[f64], num_classes: usize) -> f64 {
    (0..num_classes)
        .map(|k| distance_to_ray(x, ray(k, num_classes)))
        .fold(f64::INFINITY, f64::min)
}

/// Sector containing `x`. Points on a boundary ray go to the lower of the two
/// adjacent indices, and the origin to sector 0.
pub fn sector(x: &[f64], num_classes: usize) -> ClassIndex {
    if x[0] == 0.0 && x[1] == 0.0 {
        return 0;
    }
    let mut theta = x[1].atan2(x[0]);
    if theta < 0.0 {
        theta += TAU;
    }
    let pos = theta * num_classes as f64 / TAU;
    let k = (pos.floor() as usize).min(num_classes - 1);
    if pos == pos.floor() && k > 0 {
        // On ray k: between sectors k-1 and k.
        return k - 1;
    }
    k
}

/// Bayes rule of either generator: the sector of `x`.
pub fn bayes_classify(spec: &DistributionSpec, x: &[f64]) -> Result<ClassIndex> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.len(),
        });
    }
    Ok(sector(x, spec.num_classes))
}

/// `2 d(x) (T-1)/T` times the vertex of the sector of `x`; its decision margin
/// is exactly `2 d(x)` and it decodes to the Bayes class.
pub fn sector_field(cb: &Codebook, x: &[f64]) -> Vec<f64> {
    let t = cb.num_classes();
    let scale = 2.0 * boundary_distance(x, t) * (t - 1) as f64 / t as f64;
    cb.vertex(sector(x, t)).iter().map(|v| scale * v).collect()
}

/// Minimum acceptance rate of the hard-margin rejection sampler.
pub const MIN_ACCEPTANCE: f64 = 0.01;

/// `n` points uniform on the unit disk with a gap of `delta` around every
/// sector boundary.
pub fn gen_hard_margin(n: usize, num_classes: usize, delta: f64, seed: u64) -> Result<Dataset> {
    let spec = DistributionSpec::hard(num_classes, delta)?;
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let mut rng = rng::substream(seed, &[rng::purpose::HARD_MARGIN_DATA]);
    let mut coords = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while labels.len() < n {
        attempts += 1;
        if attempts >= 1000 && (labels.len() as f64) < MIN_ACCEPTANCE * attempts as f64 {
            return Err(Error::Infeasible(format!(
                "delta={delta} rejects more than 99% of the disk for {num_classes} classes"
            )));
        }
        let r = rng.random::<f64>().sqrt();
        let theta = TAU * rng.random::<f64>();
        let x = [r * theta.cos(), r * theta.sin()];
        if boundary_distance(&x, num_classes) < delta / 2.0 {
            continue;
        }
        coords.extend_from_slice(&x);
        labels.push(sector(&x, num_classes));
    }
    finish(coords, labels, spec, seed)
}

/// `n` points whose margins follow `P{M <= t} = t^alpha` on `(0, 1]`.
///
/// Each point draws `m = U^(1/alpha)`, a boundary ray and a side, then sits at
/// distance `m/2` from that ray, at a position along it drawn uniformly from
/// the stretch where the ray is the nearest boundary and the point stays in
/// the disk.
pub fn gen_soft_margin(n: usize, num_classes: usize, alpha: f64, seed: u64) -> Result<Dataset> {
    let spec = DistributionSpec::soft(num_classes, alpha)?;
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let mut rng = rng::substream(seed, &[rng::purpose::SOFT_MARGIN_DATA]);
    let half_angle_tan = (PI / num_classes as f64).tan();
    let mut coords = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        // 1 - U lies in (0, 1], so the margin is never exactly zero.
        let m = (1.0 - rng.random::<f64>()).powf(1.0 / alpha);
        let b = rng.random_range(0..num_classes);
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let h = m / 2.0;
        let lo = h / half_angle_tan;
        let hi = (1.0 - h * h).sqrt();
        let s = lo + (hi - lo) * rng.random::<f64>();
        let u = ray(b, num_classes);
        let x = [s * u[0] - side * h * u[1], s * u[1] + side * h * u[0]];
        coords.extend_from_slice(&x);
        labels.push(sector(&x, num_classes));
    }
    finish(coords, labels, spec, seed)
}

/// Weighted points whose weights sum to one; a weighted sum over them stands in
/// for an expectation under the distribution they discretise.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSet {
    pub points: Array2<f64>,
    pub labels: Vec<ClassIndex>,
    pub weights: Vec<f64>,
}

impl WeightedSet {
    /// Weighted fraction of points whose prediction differs from the label.
    pub fn weighted_error(&self, predicted: &[ClassIndex]) -> Result<f64> {
        check_dim(self.labels.len(), predicted.len())?;
        Ok(self
            .labels
            .iter()
            .zip(predicted)
            .zip(&self.weights)
            .filter(|((y, c), _)| y != c)
            .fold(0.0, |acc, (_, w)| acc + w))
    }
}

/// Smallest margin quantile resolved by [`soft_margin_quadrature`]; the mass
/// below it is lumped into one level.
pub const QUADRATURE_MIN_QUANTILE: f64 = 1e-9;

/// Product quadrature of the soft-margin distribution.
///
/// The margin is parametrised by its quantile `u = m^alpha`, which is uniform
/// on `(0, 1]`; `levels` log-spaced midpoints cover `[1e-9, 1]`. Each level
/// takes `positions` midpoints along every side of every boundary ray. The
/// weighted 0-1 error of a classifier on the result is its population risk up
/// to discretisation, and resolves risks far below what a sampled test set
/// of the same size can.
pub fn soft_margin_quadrature(
    num_classes: usize,
    alpha: f64,
    levels: usize,
    positions: usize,
) -> Result<WeightedSet> {
    DistributionSpec::soft(num_classes, alpha)?;
    if levels < 2 || positions < 1 {
        return Err(invalid("quadrature needs at least 2 levels and 1 position"));
    }
    let half_angle_tan = (PI / num_classes as f64).tan();
    let log_min = QUADRATURE_MIN_QUANTILE.ln();
    let edges: Vec<f64> = std::iter::once(0.0)
        .chain((0..levels).map(|i| (log_min * (1.0 - i as f64 / (levels - 1) as f64)).exp()))
        .collect();
    let per_level = 2 * num_classes * positions;
    let mut coords = Vec::with_capacity(2 * levels * per_level);
    let mut labels = Vec::with_capacity(levels * per_level);
    let mut weights = Vec::with_capacity(levels * per_level);
    for pair in edges.windows(2) {
        let u = 0.5 * (pair[0] + pair[1]);
        let w = (pair[1] - pair[0]) / per_level as f64;
        let h = u.powf(1.0 / alpha) / 2.0;
        let lo = h / half_angle_tan;
        let hi = (1.0 - h * h).sqrt();
        for b in 0..num_classes {
            let r = ray(b, num_classes);
            for side in [1.0, -1.0] {
                for j in 0..positions {
                    let s = lo + (hi - lo) * (j as f64 + 0.5) / positions as f64;
                    let x = [s * r[0] - side * h * r[1], s * r[1] + side * h * r[0]];
                    coords.extend_from_slice(&x);
                    labels.push(sector(&x, num_classes));
                    weights.push(w);
                }
            }
        }
    }
    let points = Array2::from_shape_vec((labels.len(), 2), coords).expect("pairs");
    Ok(WeightedSet {
        points,
        labels,
        weights,
    })
}

/// Midpoint quadrature of the hard-margin distribution: a polar grid of the
/// disk with area weights, restricted to points at least `delta / 2` from
/// every boundary ray and renormalised.
pub fn hard_margin_quadrature(
    num_classes: usize,
    delta: f64,
    radial: usize,
    angular: usize,
) -> Result<WeightedSet> {
    DistributionSpec::hard(num_classes, delta)?;
    if radial < 1 || angular < num_classes {
        return Err(invalid("quadrature grid is too coarse"));
    }
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for i in 0..radial {
        let r = (i as f64 + 0.5) / radial as f64;
        for j in 0..angular {
            let theta = TAU * (j as f64 + 0.5) / angular as f64;
            let x = [r * theta.cos(), r * theta.sin()];
            if boundary_distance(&x, num_classes) < delta / 2.0 {
                continue;
            }
            coords.extend_from_slice(&x);
            labels.push(sector(&x, num_classes));
            weights.push(r);
        }
    }
    if labels.is_empty() {
        return Err(Error::Infeasible(format!("delta={delta} leaves no grid point")));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let points = Array2::from_shape_vec((labels.len(), 2), coords).expect("pairs");
    Ok(WeightedSet {
        points,
        labels,
        weights,
    })
}

fn finish(
    coords: Vec<f64>,
    labels: Vec<ClassIndex>,
    spec: DistributionSpec,
    seed: u64,
) -> Result<Dataset> {
    let points = Array2::from_shape_vec((labels.len(), 2), coords).expect("two coords per label");
    let mut ds = Dataset::new(points, labels, spec.num_classes)?;
    ds.meta = Some(DatasetMeta { spec, seed });
    Ok(ds)
}

/// Draws from `spec`.
pub fn generate(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Dataset> {
    match spec.margin {
        MarginSpec::Hard { delta } => gen_hard_margin(n, spec.num_classes, delta, seed),
        MarginSpec::Soft { alpha } => gen_soft_margin(n, spec.num_classes, alpha, seed),
    }
}
