//! Learning samples, the uniform standardization of inputs, and the
//! correlation-based input ranking.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Design matrix (`n x d`, raw units) with its outputs.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingSet {
    inputs: Matrix,
    outputs: Vec<f64>,
    input_names: Vec<String>,
}

impl TrainingSet {
    pub fn new(inputs: Matrix, outputs: Vec<f64>, input_names: Vec<String>) -> Result<Self> {
        let (n, d) = (inputs.nrows(), inputs.ncols());
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 observations, got {n}")));
        }
        if d < 1 {
            return Err(Error::InvalidData("need at least one input".into()));
        }
        if outputs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: outputs.len(),
            });
        }
        if input_names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: input_names.len(),
            });
        }
        if !inputs.is_finite() || outputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite value in learning sample".into()));
        }
        Ok(Self {
            inputs,
            outputs,
            input_names,
        })
    }

    /// Names inputs `x1..xd`.
    pub fn with_default_names(inputs: Matrix, outputs: Vec<f64>) -> Result<Self> {
        let names = (1..=inputs.ncols()).map(|i| format!("x{i}")).collect();
        Self::new(inputs, outputs, names)
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn d(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.inputs.select_rows(indices),
            indices.iter().map(|&i| self.outputs[i]).collect(),
            self.input_names.clone(),
        )
    }

    /// Same outputs, inputs replaced (e.g. by their standardized images).
    pub(crate) fn with_inputs(&self, inputs: Matrix) -> Self {
        Self {
            inputs,
            outputs: self.outputs.clone(),
            input_names: self.input_names.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TransformMode {
    /// Piecewise-linear interpolation of the sample's empirical CDF.
    Empirical,
    /// A supplied CDF: uniform on an interval, or a quantile table.
    Known,
}

/// Source distribution for [`build_uniform_transform`].
#[derive(Clone, Debug, PartialEq)]
pub enum CdfSource {
    Empirical,
    Uniform { lower: f64, upper: f64 },
    /// Values with their cumulative probabilities, both non-decreasing.
    QuantileTable { values: Vec<f64>, probabilities: Vec<f64> },
}

/// Monotone piecewise-linear map from one raw input to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UniformTransform {
    knots: Vec<f64>,
    levels: Vec<f64>,
    mode: TransformMode,
}

/// Builds the standardizing map of one input column.
///
/// In empirical mode the knots are the distinct sample values. Each knot is
/// first given its midpoint CDF rank `(c_before + c_tied / 2) / n`; the ranks
/// are then stretched affinely so the smallest knot maps to 0 and the largest
/// to 1. Values between knots interpolate strictly between their images.
pub fn build_uniform_transform(column: &[f64], source: &CdfSource) -> Result<UniformTransform> {
    if column.len() < 2 {
        return Err(Error::InvalidData("transform needs at least 2 values".into()));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite value in input column".into()));
    }
    match source {
        CdfSource::Empirical => empirical(column),
        CdfSource::Uniform { lower, upper } => {
            if !(lower < upper) {
                return Err(Error::InvalidData(format!(
                    "uniform bounds must satisfy lower < upper, got [{lower}, {upper}]"
                )));
            }
            Ok(UniformTransform {
                knots: alloc::vec![*lower, *upper],
                levels: alloc::vec![0.0, 1.0],
                mode: TransformMode::Known,
            })
        }
        CdfSource::QuantileTable {
            values,
            probabilities,
        } => quantile_table(values, probabilities),
    }
}

fn empirical(column: &[f64]) -> Result<UniformTransform> {
    let n = column.len() as f64;
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut knots = Vec::new();
    let mut ranks = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        knots.push(sorted[start]);
        ranks.push((start as f64 + 0.5 * (end - start) as f64) / n);
        start = end;
    }
    if knots.len() < 2 {
        return Err(Error::ConstantInput { index: 0 });
    }
    let (lo, hi) = (ranks[0], ranks[ranks.len() - 1]);
    let last = ranks.len() - 1;
    let levels = ranks
        .iter()
        .enumerate()
        .map(|(k, r)| match k {
            0 => 0.0,
            k if k == last => 1.0,
            _ => (r - lo) / (hi - lo),
        })
        .collect();
    Ok(UniformTransform {
        knots,
        levels,
        mode: TransformMode::Empirical,
    })
}

fn quantile_table(values: &[f64], probabilities: &[f64]) -> Result<UniformTransform> {
    if values.len() != probabilities.len() || values.len() < 2 {
        return Err(Error::InvalidData(
            "quantile table needs at least two (value, probability) pairs".into(),
        ));
    }
    let increasing = values.windows(2).all(|w| w[0] < w[1]);
    let monotone = probabilities.windows(2).all(|w| w[0] <= w[1]);
    let in_unit = probabilities.iter().all(|p| (0.0..=1.0).contains(p));
    if !increasing || !monotone || !in_unit {
        return Err(Error::InvalidData(
            "quantile table must have increasing values and non-decreasing probabilities in [0, 1]"
                .into(),
        ));
    }
    if probabilities[0] != 0.0 || probabilities[probabilities.len() - 1] != 1.0 {
        return Err(Error::InvalidData("quantile table probabilities must span [0, 1]".into()));
    }
    Ok(UniformTransform {
        knots: values.to_vec(),
        levels: probabilities.to_vec(),
        mode: TransformMode::Known,
    })
}

impl UniformTransform {
    /// Maps a raw value to `[0, 1]`, clamping outside the knot range.
    pub fn apply(&self, x: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        if !(x > k[0]) {
            return self.levels[0];
        }
        if x >= k[last] {
            return self.levels[last];
        }
        // first knot strictly greater than x; 1 <= hi <= last
        let hi = k.partition_point(|&v| v <= x);
        let lo = hi - 1;
        if k[lo] == x {
            return self.levels[lo];
        }
        let t = (x - k[lo]) / (k[hi] - k[lo]);
        self.levels[lo] + t * (self.levels[hi] - self.levels[lo])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn mode(&self) -> &TransformMode {
        &self.mode
    }
}

/// Per-input standardizing maps for a whole design.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InputTransform {
    maps: Vec<UniformTransform>,
}

impl InputTransform {
    /// Empirical transform of every input column.
    pub fn fit_empirical(ts: &TrainingSet) -> Result<Self> {
        let maps = (0..ts.d())
            .map(|j| {
                build_uniform_transform(&ts.inputs().column(j), &CdfSource::Empirical).map_err(
                    |e| match e {
                        Error::ConstantInput { .. } => Error::ConstantInput { index: j },
                        other => other,
                    },
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self { maps })
    }

    pub fn from_maps(maps: Vec<UniformTransform>) -> Self {
        Self { maps }
    }

    pub fn dim(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[UniformTransform] {
        &self.maps
    }

    /// Componentwise standardization of one raw point.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.maps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.maps.len(),
                found: x.len(),
            });
        }
        Ok(self.maps.iter().zip(x).map(|(m, &v)| m.apply(v)).collect())
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Result<Matrix> {
        if x.ncols() != self.maps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.maps.len(),
                found: x.ncols(),
            });
        }
        let mut out = Matrix::zeros(x.nrows(), x.ncols());
        for i in 0..x.nrows() {
            for (j, m) in self.maps.iter().enumerate() {
                out[(i, j)] = m.apply(x[(i, j)]);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RankingCriterion {
    /// Absolute Pearson correlation with the output.
    Correlation,
    /// Q2 increase when the input joins the covariance.
    DeltaQ2,
}

/// Inputs ordered by decreasing influence. `values[k]` belongs to `order[k]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InputRanking {
    pub order: Vec<usize>,
    pub criterion: RankingCriterion,
    pub values: Vec<f64>,
}

impl InputRanking {
    /// Sorts `indices` by decreasing `score`; equal scores keep the given order.
    pub fn sorted(indices: &[usize], scores: &[f64], criterion: RankingCriterion) -> Self {
        let mut pairs: Vec<(usize, f64)> = indices.iter().copied().zip(scores.iter().copied()).collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        Self {
            order: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
            criterion,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn prefix(&self, k: usize) -> &[usize] {
        &self.order[..k]
    }
}

/// Pearson correlation; 0 when either vector is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / math::sqrt(sxx * syy)
}

/// Ranks inputs by decreasing absolute correlation with the output, ties
/// broken by ascending input index.
pub fn rank_by_correlation(ts: &TrainingSet) -> Result<InputRanking> {
    let y = ts.outputs();
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::ConstantOutput);
    }
    let scores: Vec<f64> = (0..ts.d())
        .map(|j| pearson(&ts.inputs().column(j), y).abs())
        .collect();
    let indices: Vec<usize> = (0..ts.d()).collect();
    Ok(InputRanking::sorted(&indices, &scores, RankingCriterion::Correlation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_column_is_identity() {
        let t = build_uniform_transform(&[0.0, 1.0], &CdfSource::Empirical).unwrap();
        assert_eq!(t.apply(0.0), 0.0);
        assert_eq!(t.apply(1.0), 1.0);
        assert_eq!(t.apply(0.5), 0.5);
    }

    #[test]
    fn constant_column_rejected() {
        let err = build_uniform_transform(&[3.0, 3.0, 3.0], &CdfSource::Empirical).unwrap_err();
        assert!(matches!(err, Error::ConstantInput { .. }));
        let ts = TrainingSet::with_default_names(
            Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap(),
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        assert_eq!(InputTransform::fit_empirical(&ts).unwrap_err(), Error::ConstantInput { index: 1 });
    }

    fn ks_uniform(values: &[f64]) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = x - i as f64 / n;
                let hi = (i + 1) as f64 / n - x;
                lo.max(hi)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn transformed_uniform_sample_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let col: Vec<f64> = (0..100).map(|_| 5.0 + 4.0 * rng.random::<f64>()).collect();
        let t = build_uniform_transform(&col, &CdfSource::Empirical).unwrap();
        let img: Vec<f64> = col.iter().map(|&x| t.apply(x)).collect();
        assert!(ks_uniform(&img) < 0.15, "ks = {}", ks_uniform(&img));
    }

    #[test]
    fn apply_clamps_and_interpolates() {
        let col = [1.0, 4.0, 2.0, 8.0];
        let t = build_uniform_transform(&col, &CdfSource::Empirical).unwrap();
        assert_eq!(t.apply(-10.0), 0.0);
        assert_eq!(t.apply(100.0), 1.0);
        let (a, b) = (t.apply(2.0), t.apply(4.0));
        assert_eq!(t.apply(3.0), a + 0.5 * (b - a));
        // training values reproduce their own images exactly
        for &x in &col {
            let k = t.knots().iter().position(|&v| v == x).unwrap();
            assert_eq!(t.apply(x), t.levels()[k]);
        }
    }

    #[test]
    fn unsampled_values_fall_strictly_between_images() {
        let t = build_uniform_transform(&[0.0, 1.0, 1.0, 3.0], &CdfSource::Empirical).unwrap();
        let img = t.apply(2.0);
        assert!(img > t.apply(1.0) && img < t.apply(3.0));
    }

    #[test]
    fn known_uniform_distribution() {
        let t = build_uniform_transform(&[6.0, 7.0], &CdfSource::Uniform { lower: 5.0, upper: 9.0 })
            .unwrap();
        assert_eq!(t.apply(7.0), 0.5);
        assert_eq!(t.mode(), &TransformMode::Known);
    }

    #[test]
    fn ranking_perfect_correlation_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<[f64; 2]> = (0..30).map(|_| [rng.random(), rng.random()]).collect();
        let y = rows.iter().map(|r| 3.0 * r[0]).collect();
        let ts = TrainingSet::with_default_names(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let r = rank_by_correlation(&ts).unwrap();
        assert_eq!(r.order, vec![0, 1]);
        assert!((r.values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_constant_output_fails() {
        let ts = TrainingSet::with_default_names(
            Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap(),
            vec![2.0, 2.0, 2.0],
        )
        .unwrap();
        assert_eq!(rank_by_correlation(&ts).unwrap_err(), Error::ConstantOutput);
    }

    #[test]
    fn ranking_ties_by_index() {
        let ts = TrainingSet::with_default_names(
            Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap(),
            vec![0.0, 1.0, 5.0],
        )
        .unwrap();
        assert_eq!(rank_by_correlation(&ts).unwrap().order, vec![0, 1]);
    }

    #[test]
    fn training_set_rejects_bad_shapes() {
        let m = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(TrainingSet::with_default_names(m.clone(), vec![1.0]).is_err());
        assert!(TrainingSet::with_default_names(m, vec![1.0, f64::NAN]).is_err());
        let one = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(TrainingSet::with_default_names(one, vec![1.0]).is_err());
    }
}
