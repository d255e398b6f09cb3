//! Sobol g-function, Latin hypercube sampling and the replicated benchmark.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::TrainingSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::{mix_seed, sqrt};
use crate::selection::{select, test_q2, FinalValidation, PipelineConfig};

/// `g(x) = prod_k (|4 x_k - 2| + a_k) / (1 + a_k)` on `[0, 1]^d`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GSobolSpec {
    coefficients: Vec<f64>,
}

impl GSobolSpec {
    /// `a_k = k` for `k = 1..d`.
    pub fn new(d: usize) -> Self {
        Self {
            coefficients: (1..=d).map(|k| k as f64).collect(),
        }
    }

    pub fn with_coefficients(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::ParameterDomain("g-function coefficients must be finite and >= 0".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

pub fn g_sobol(x: &[f64], spec: &GSobolSpec) -> Result<f64> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: x.len(),
        });
    }
    let mut g = 1.0;
    for (xk, a) in x.iter().zip(&spec.coefficients) {
        if !(0.0..=1.0).contains(xk) {
            return Err(Error::ParameterDomain(format!("g-function input {xk} outside [0, 1]")));
        }
        g *= ((4.0 * xk - 2.0).abs() + a) / (1.0 + a);
    }
    Ok(g)
}

/// Latin hypercube: column `j` puts exactly one point, uniformly placed, in
/// each stratum `[(k - 1) / n, k / n)`, with strata independently permuted
/// per column.
pub fn lhs(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(n, d);
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(&mut rng);
        for (i, &k) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            // u < 1, but (k + u) / n can round up to the next stratum edge
            let v = (k as f64 + u) / n as f64;
            let upper = (k + 1) as f64 / n as f64;
            m[(i, j)] = if v >= upper { prev_float(upper) } else { v };
        }
    }
    m
}

fn prev_float(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

/// Learning and test samples of the g-function.
pub fn g_sobol_sample(spec: &GSobolSpec, n: usize, seed: u64) -> Result<TrainingSet> {
    let x = lhs(n, spec.dim(), seed);
    let y = x.rows().map(|r| g_sobol(r, spec)).collect::<Result<Vec<_>>>()?;
    TrainingSet::with_default_names(x, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Variant {
    WithSteps45,
    WithoutSteps45,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::WithSteps45 => "with-steps-4-5",
            Variant::WithoutSteps45 => "without-steps-4-5",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkProtocol {
    pub dims: Vec<usize>,
    /// Learning sample size per input.
    pub n_per_input: usize,
    pub n_test: usize,
    pub replicates: usize,
    pub seed: u64,
    pub variants: Vec<Variant>,
    /// Settings for steps 0-6; the final validation field is ignored.
    pub pipeline: PipelineConfig,
}

impl Default for BenchmarkProtocol {
    fn default() -> Self {
        Self {
            dims: vec![4, 8],
            n_per_input: 10,
            n_test: 1000,
            replicates: 10,
            seed: 0,
            variants: vec![Variant::WithSteps45, Variant::WithoutSteps45],
            pipeline: PipelineConfig::default(),
        }
    }
}

impl BenchmarkProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicate count must be at least 1".into()));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::InvalidConfig("dimensions must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig("no variant selected".into()));
        }
        if self.n_test < 2 {
            return Err(Error::InvalidConfig("test sample needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn n_learning(&self, d: usize) -> usize {
        self.n_per_input * d
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TableRow {
    pub d: usize,
    pub n_learning: usize,
    pub variant: Variant,
    /// `None` when every replicate failed.
    pub mean_q2: Option<f64>,
    /// `None` with fewer than two successful replicates.
    pub sd_q2: Option<f64>,
    /// One entry per replicate, in replicate order.
    pub q2: Vec<Option<f64>>,
    pub failures: Vec<(usize, String)>,
}

impl TableRow {
    pub fn successes(&self) -> usize {
        self.q2.iter().flatten().count()
    }
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(sqrt(var)))
}

const LEARNING_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;
const PIPELINE_STREAM: u64 = 3;

fn replicate_seed(protocol: &BenchmarkProtocol, d: usize, r: usize, stream: u64) -> u64 {
    mix_seed(mix_seed(mix_seed(protocol.seed, d as u64), r as u64), stream)
}

/// Q2 of every requested variant on one replicate.
fn run_replicate(protocol: &BenchmarkProtocol, d: usize, r: usize) -> Result<Vec<(Variant, f64)>> {
    let spec = GSobolSpec::new(d);
    let learn = g_sobol_sample(&spec, protocol.n_learning(d), replicate_seed(protocol, d, r, LEARNING_STREAM))?;
    let test = g_sobol_sample(&spec, protocol.n_test, replicate_seed(protocol, d, r, TEST_STREAM))?;
    let mut config = protocol.pipeline.clone();
    config.final_validation = FinalValidation::Skip;
    config.seed = replicate_seed(protocol, d, r, PIPELINE_STREAM);
    config.steps_4_5 = protocol.variants.contains(&Variant::WithSteps45);
    let outcome = select(&learn, &config)?;
    protocol
        .variants
        .iter()
        .map(|v| {
            let model = match v {
                Variant::WithSteps45 => &outcome.model,
                // the first pass is exactly what the pipeline returns without
                // steps 4 and 5
                Variant::WithoutSteps45 => outcome.first_pass_model.as_ref().unwrap_or(&outcome.model),
            };
            Ok((*v, test_q2(model, &test)?))
        })
        .collect()
}

/// All variants for one dimension.
pub fn run_dimension(protocol: &BenchmarkProtocol, d: usize) -> Result<Vec<TableRow>> {
    protocol.validate()?;
    let run = |r: usize| run_replicate(protocol, d, r);
    #[cfg(feature = "parallel")]
    let results: Vec<Result<Vec<(Variant, f64)>>> = {
        use rayon::prelude::*;
        (0..protocol.replicates).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Vec<(Variant, f64)>>> = (0..protocol.replicates).map(run).collect();

    Ok(protocol
        .variants
        .iter()
        .map(|v| {
            let mut q2 = Vec::with_capacity(results.len());
            let mut failures = Vec::new();
            for (r, res) in results.iter().enumerate() {
                match res {
                    Ok(vals) => q2.push(vals.iter().find(|(w, _)| w == v).map(|(_, q)| *q)),
                    Err(e) => {
                        q2.push(None);
                        failures.push((r, e.to_string()));
                    }
                }
            }
            let ok: Vec<f64> = q2.iter().flatten().copied().collect();
            let (mean_q2, sd_q2) = mean_sd(&ok);
            TableRow {
                d,
                n_learning: protocol.n_learning(d),
                variant: *v,
                mean_q2,
                sd_q2,
                q2,
                failures,
            }
        })
        .collect())
}

/// One row per `(d, variant)`.
pub fn run_table1(protocol: &BenchmarkProtocol) -> Result<Vec<TableRow>> {
    protocol.validate()?;
    let mut rows = Vec::new();
    for &d in &protocol.dims {
        rows.extend(run_dimension(protocol, d)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_sobol_examples() {
        let s = GSobolSpec::with_coefficients(vec![1.0, 2.0]).unwrap();
        assert!((g_sobol(&[0.5, 0.5], &s).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((g_sobol(&[1.0, 0.25], &s).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(g_sobol(&[0.0], &GSobolSpec::new(1)).unwrap(), 1.5);
        assert!(g_sobol(&[1.1, 0.0], &s).is_err());
        assert!(g_sobol(&[0.1], &s).is_err());
        assert!(GSobolSpec::with_coefficients(vec![-1.0]).is_err());
    }

    #[test]
    fn lhs_strata() {
        for seed in 0..5 {
            let m = lhs(4, 2, seed);
            for j in 0..2 {
                let mut cells: Vec<usize> = m.column(j).iter().map(|v| (v * 4.0) as usize).collect();
                cells.sort_unstable();
                assert_eq!(cells, vec![0, 1, 2, 3]);
            }
        }
        assert_eq!(lhs(10, 3, 7), lhs(10, 3, 7));
        assert_ne!(lhs(10, 3, 7), lhs(10, 3, 8));
        let one = lhs(1, 3, 1);
        assert!(one.as_slice().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn mean_sd_single_replicate() {
        assert_eq!(mean_sd(&[0.5]), (Some(0.5), None));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_protocol() {
        let p = BenchmarkProtocol {
            replicates: 0,
            ..Default::default()
        };
        assert!(run_table1(&p).is_err());
    }
}
