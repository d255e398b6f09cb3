//! Sequential estimation and input selection.
//!
//! Steps, as numbered in reports and errors:
//!
//! 0. standardize every input to `[0, 1]` through its empirical CDF;
//! 1. rank inputs by absolute correlation with the output (`M1`);
//! 2. fix bounds and starting points of `(theta, p, tau)`;
//! 3. for `i = 1..d` covariance inputs (outer loop) and `j = 1..d` regression
//!    inputs (inner loop) estimate the correlation parameters, warm-started
//!    from the `(i - 1, j)` optimum, and score the cell by AICC; the best `j`
//!    for each `i` is then scored by K-fold Q2;
//! 4. (optional) rerank the covariance inputs by their Q2 increments (`M2`);
//! 5. (optional) rerun step 3 with `M2` for the covariance, `M1` for the
//!    regression;
//! 6. keep the covariance prefix with the highest Q2;
//! 7. validate the final model on data never used in steps 0-6.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::covariance::{ActiveSet, CorrelationParams};
use crate::data::{rank_by_correlation, InputRanking, InputTransform, RankingCriterion, TrainingSet};
use crate::error::{Error, Result};
use crate::estimation::{aicc, PenalizedPsi, ProfileFit, ProfileProblem};
use crate::linalg::Matrix;
use crate::math::mix_seed;
use crate::pattern_search::{self, minimize, Scale, SearchSpec};
use crate::predictor::{GpModel, Kriging, MseKind};
use crate::regression::RegressionBasis;
use crate::validation::{kfold_q2, q2, FoldPlan};

/// Lower bound, upper bound and starting value of one kind of parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParameterBounds {
    pub lower: f64,
    pub upper: f64,
    pub start: f64,
}

impl ParameterBounds {
    pub const fn new(lower: f64, upper: f64, start: f64) -> Self {
        Self { lower, upper, start }
    }

    pub const fn fixed(value: f64) -> Self {
        Self::new(value, value, value)
    }

    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }
}

/// How Q2 is computed for each covariance prefix in step 3.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CvMode {
    /// Re-estimate the correlation parameters inside every fold.
    #[default]
    Refit,
    /// Reuse the full-sample correlation parameters in every fold.
    FixedHyperparameters,
}

/// Data used for the step-7 Q2.
#[derive(Clone, Debug, PartialEq)]
pub enum FinalValidation {
    /// K'-fold cross-validation wrapped around the whole of steps 0-6.
    OuterCv { k: usize },
    /// An independent test sample in raw units.
    TestSet(TrainingSet),
    Skip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Folds of the model-building cross-validation (steps 3 and 5).
    pub k_build: usize,
    pub final_validation: FinalValidation,
    pub theta: ParameterBounds,
    pub power: ParameterBounds,
    /// Nugget ratio; pinned when `lower == upper`.
    pub tau: ParameterBounds,
    /// Powers limited to {0.5, 1, 2}.
    pub restrict_power: bool,
    pub steps_4_5: bool,
    pub cv_mode: CvMode,
    pub initial_step: f64,
    pub shrink: f64,
    pub stop_step: f64,
    pub evals_per_coordinate: usize,
    pub seed: u64,
}

pub const DEFAULT_THETA: ParameterBounds = ParameterBounds::new(1e-8, 100.0, 0.5);
pub const DEFAULT_POWER: ParameterBounds = ParameterBounds::new(0.0, 2.0, 1.0);
pub const DEFAULT_TAU: ParameterBounds = ParameterBounds::new(0.0, 0.1, 1e-6);
pub const RESTRICTED_POWERS: [f64; 3] = [0.5, 1.0, 2.0];

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k_build: 4,
            final_validation: FinalValidation::OuterCv { k: 6 },
            theta: DEFAULT_THETA,
            power: DEFAULT_POWER,
            tau: DEFAULT_TAU,
            restrict_power: false,
            steps_4_5: true,
            cv_mode: CvMode::Refit,
            initial_step: pattern_search::DEFAULT_INITIAL_STEP,
            shrink: pattern_search::DEFAULT_SHRINK,
            stop_step: pattern_search::DEFAULT_STOP_STEP,
            evals_per_coordinate: pattern_search::DEFAULT_EVALS_PER_COORDINATE,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_build < 2 {
            return Err(Error::InvalidConfig(format!("K must be at least 2, got {}", self.k_build)));
        }
        if let FinalValidation::OuterCv { k } = self.final_validation {
            if k < 2 {
                return Err(Error::InvalidConfig(format!("K' must be at least 2, got {k}")));
            }
        }
        let ok = |b: &ParameterBounds| b.lower <= b.start && b.start <= b.upper && b.lower.is_finite() && b.upper.is_finite();
        if !ok(&self.theta) || !(self.theta.lower > 0.0) {
            return Err(Error::InvalidConfig("theta bounds need 0 < lower <= start <= upper".into()));
        }
        if !ok(&self.power) || self.power.lower < 0.0 || self.power.upper > 2.0 {
            return Err(Error::InvalidConfig("power bounds need 0 <= lower <= start <= upper <= 2".into()));
        }
        if !ok(&self.tau) || self.tau.lower < 0.0 {
            return Err(Error::InvalidConfig("tau bounds need 0 <= lower <= start <= upper".into()));
        }
        if self.evals_per_coordinate == 0 {
            return Err(Error::InvalidConfig("evaluation budget must be positive".into()));
        }
        Ok(())
    }

    fn power_bounds(&self) -> ParameterBounds {
        if self.restrict_power {
            ParameterBounds::new(0.5, 2.0, 1.0)
        } else {
            self.power
        }
    }
}

fn snap_power(p: f64) -> f64 {
    if p < 0.75 {
        0.5
    } else if p < 1.5 {
        1.0
    } else {
        2.0
    }
}

/// Search vector layout: `[theta_1..theta_m, p_1..p_m, tau]`.
fn unpack(v: &[f64], restrict: bool) -> CorrelationParams {
    let m = (v.len() - 1) / 2;
    let power = v[m..2 * m]
        .iter()
        .map(|&p| if restrict { snap_power(p) } else { p })
        .collect();
    CorrelationParams {
        theta: v[..m].to_vec(),
        power,
        tau: v[2 * m],
    }
}

fn pack(p: &CorrelationParams) -> Vec<f64> {
    let mut v = p.theta.clone();
    v.extend_from_slice(&p.power);
    v.push(p.tau);
    v
}

/// Appends `(theta0, p0)` for one new covariance input.
fn extend_start(v: &[f64], config: &PipelineConfig) -> Vec<f64> {
    let m = (v.len() - 1) / 2;
    let mut out = Vec::with_capacity(v.len() + 2);
    out.extend_from_slice(&v[..m]);
    out.push(config.theta.start);
    out.extend_from_slice(&v[m..2 * m]);
    out.push(config.power_bounds().start);
    out.push(v[2 * m]);
    out
}

fn initial_start(m: usize, config: &PipelineConfig) -> Vec<f64> {
    let mut v = vec![config.theta.start; m];
    v.extend(core::iter::repeat(config.power_bounds().start).take(m));
    v.push(config.tau.start);
    v
}

/// Result of one hyperparameter estimation.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub params: CorrelationParams,
    pub fit: ProfileFit,
    pub evals: usize,
    pub budget_exhausted: bool,
}

/// Minimizes the profile objective for one (covariance, regression) pair on
/// a standardized design, starting from `start` (search layout).
pub fn estimate(
    design: &Matrix,
    y: &[f64],
    cov: &[usize],
    reg: &[usize],
    start: &[f64],
    config: &PipelineConfig,
) -> Result<Estimate> {
    let m = cov.len();
    if start.len() != 2 * m + 1 {
        return Err(Error::DimensionMismatch {
            expected: 2 * m + 1,
            found: start.len(),
        });
    }
    let basis = RegressionBasis::new(ActiveSet::new(reg.to_vec(), design.ncols())?);
    let problem = ProfileProblem::new(&design.select_columns(cov), basis.matrix(design)?, y.to_vec())?;
    let pb = config.power_bounds();
    let mut lower = vec![config.theta.lower; m];
    let mut upper = vec![config.theta.upper; m];
    lower.extend(core::iter::repeat(pb.lower).take(m));
    upper.extend(core::iter::repeat(pb.upper).take(m));
    lower.push(config.tau.lower);
    upper.push(config.tau.upper);
    let mut scales = vec![Scale::Log10; m];
    scales.extend(core::iter::repeat(Scale::Linear).take(m + 1));
    let start: Vec<f64> = start
        .iter()
        .zip(lower.iter().zip(&upper))
        .map(|(s, (lo, hi))| s.clamp(*lo, *hi))
        .collect();
    let spec = SearchSpec {
        start,
        lower,
        upper,
        scales,
        max_evals: config.evals_per_coordinate * (2 * m + 1),
        initial_step: config.initial_step,
        shrink: config.shrink,
        stop_step: config.stop_step,
    };
    let objective = PenalizedPsi::new(&problem);
    let restrict = config.restrict_power;
    let out = minimize(|v| objective.eval(&unpack(v, restrict)), &spec)?;
    let params = unpack(&out.argmin, restrict);
    let fit = problem.fit(&params)?;
    Ok(Estimate {
        params,
        fit,
        evals: out.evals,
        budget_exhausted: out.budget_exhausted,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum WarmStart {
    /// Reference values `(theta0, p0, tau0)` for every coordinate.
    Initial,
    /// Optimum of cell `(i - 1, j)` plus `(theta0, p0)` for the new input.
    SameRegression,
    /// Optimum of cell `(i - 1, j_optim(i - 1))`, used when `(i - 1, j)` is
    /// missing.
    OptimalRegression,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CellStatus {
    Fitted,
    /// Zero estimated variance: the trend reproduces the data exactly.
    Degenerate,
    /// `n - m1 - m2 - 2 <= 0`; the cell is not estimated.
    AiccUndefined,
    Failed(String),
}

/// One (covariance prefix `i`, regression prefix `j`) estimation.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellRecord {
    pub cov_size: usize,
    pub reg_size: usize,
    pub warm_start: WarmStart,
    /// Starting vector `[theta.., p.., tau]`.
    pub start: Vec<f64>,
    pub optimum: Option<Vec<f64>>,
    pub psi: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub aicc: Option<f64>,
    pub evals: usize,
    pub budget_exhausted: bool,
    pub status: CellStatus,
}

/// One full run of step 3 for a given pair of rankings.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PassTrace {
    pub cov_order: Vec<usize>,
    pub reg_order: Vec<usize>,
    /// Row-major over `(i, j)`, both 1-based sizes.
    pub cells: Vec<CellRecord>,
    /// `j_optim(i)` for `i = 1..d`.
    pub j_optim: Vec<Option<usize>>,
    pub q2: Vec<Option<f64>>,
    pub q2_errors: Vec<Option<String>>,
}

impl PassTrace {
    pub fn d(&self) -> usize {
        self.cov_order.len()
    }

    pub fn cell(&self, i: usize, j: usize) -> &CellRecord {
        &self.cells[(i - 1) * self.d() + (j - 1)]
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Choice {
    pub i_optim: usize,
    pub j_optim: usize,
    pub cov_set: Vec<usize>,
    pub reg_set: Vec<usize>,
    pub q2: f64,
    pub params: CorrelationParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InputEffect {
    Linear,
    Nonlinear,
    LinearAndNonlinear,
    Inactive,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationRecord {
    pub method: String,
    pub n: usize,
    pub q2: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionTrace {
    pub seed: u64,
    pub k_build: usize,
    pub steps_4_5: bool,
    pub input_names: Vec<String>,
    /// Step 1 ranking `M1`.
    pub ranking_initial: InputRanking,
    pub first_pass: PassTrace,
    pub delta_q2: Option<Vec<f64>>,
    /// Step 4 ranking `M2`.
    pub ranking_delta_q2: Option<InputRanking>,
    pub second_pass: Option<PassTrace>,
    /// Step 6 choice on the first pass alone.
    pub first_pass_choice: Choice,
    pub choice: Choice,
    pub effects: Vec<InputEffect>,
    pub final_validation: Option<ValidationRecord>,
}

impl SelectionTrace {
    /// Pass used for the final choice.
    pub fn final_pass(&self) -> &PassTrace {
        self.second_pass.as_ref().unwrap_or(&self.first_pass)
    }
}

/// Standardized learning sample on which steps 1-6 operate.
struct Workspace<'a> {
    ts: &'a TrainingSet,
    config: &'a PipelineConfig,
    plan: FoldPlan,
}

impl Workspace<'_> {
    fn d(&self) -> usize {
        self.ts.d()
    }

    fn n(&self) -> usize {
        self.ts.n()
    }

    fn q2_for(&self, cov: &[usize], reg: &[usize], full: &[f64]) -> Result<f64> {
        let config = self.config;
        let restrict = config.restrict_power;
        let out = kfold_q2(self.ts, &self.plan, |train, test| {
            let params = match config.cv_mode {
                CvMode::Refit => estimate(train.inputs(), train.outputs(), cov, reg, full, config)?.params,
                CvMode::FixedHyperparameters => unpack(full, restrict),
            };
            let k = Kriging::fit(
                train.inputs().clone(),
                train.outputs().to_vec(),
                ActiveSet::new(cov.to_vec(), train.d())?,
                RegressionBasis::new(ActiveSet::new(reg.to_vec(), train.d())?),
                params,
            )?;
            test.rows()
                .map(|r| k.predict_standardized(r, MseKind::Uncorrected).map(|p| p.mean))
                .collect()
        })?;
        Ok(out.q2)
    }
}

/// Step 3 for the given covariance and regression rankings over a
/// standardized learning sample.
pub fn run_step3(
    ts: &TrainingSet,
    cov_ranking: &[usize],
    reg_ranking: &[usize],
    config: &PipelineConfig,
) -> Result<PassTrace> {
    config.validate()?;
    let ws = Workspace {
        ts,
        config,
        plan: FoldPlan::new(ts.n(), config.k_build, config.seed)?,
    };
    run_pass(&ws, cov_ranking, reg_ranking)
}

fn run_pass(ws: &Workspace<'_>, cov_rank: &[usize], reg_rank: &[usize]) -> Result<PassTrace> {
    let (d, n) = (ws.d(), ws.n());
    let config = ws.config;
    let mut cells = Vec::with_capacity(d * d);
    let mut j_optim = Vec::with_capacity(d);
    let mut q2s = Vec::with_capacity(d);
    let mut q2_errors = Vec::with_capacity(d);
    let mut prev: Vec<Option<Vec<f64>>> = vec![None; d + 1];
    let mut prev_best: Option<usize> = None;

    for i in 1..=d {
        let cov = &cov_rank[..i];
        let mut current: Vec<Option<Vec<f64>>> = vec![None; d + 1];
        let mut best: Option<(usize, f64)> = None;
        for j in 1..=d {
            let reg = &reg_rank[..j];
            let (warm_start, start) = if i == 1 {
                (WarmStart::Initial, initial_start(1, config))
            } else if let Some(v) = &prev[j] {
                (WarmStart::SameRegression, extend_start(v, config))
            } else if let Some(v) = prev_best.and_then(|b| prev[b].as_ref()) {
                (WarmStart::OptimalRegression, extend_start(v, config))
            } else {
                (WarmStart::Initial, initial_start(i, config))
            };
            let mut cell = CellRecord {
                cov_size: i,
                reg_size: j,
                warm_start,
                start,
                optimum: None,
                psi: None,
                log_likelihood: None,
                aicc: None,
                evals: 0,
                budget_exhausted: false,
                status: CellStatus::AiccUndefined,
            };
            if n as i64 - i as i64 - j as i64 - 2 > 0 {
                match estimate(ws.ts.inputs(), ws.ts.outputs(), cov, reg, &cell.start, config) {
                    Ok(est) => {
                        let v = pack(&est.params);
                        cell.evals = est.evals;
                        cell.budget_exhausted = est.budget_exhausted;
                        cell.psi = Some(est.fit.psi);
                        match est.fit.log_likelihood() {
                            Ok(ll) => {
                                let a = aicc(ll, n, j, i)?;
                                cell.log_likelihood = Some(ll);
                                cell.aicc = Some(a);
                                cell.status = CellStatus::Fitted;
                                if best.map_or(true, |(_, b)| a < b) {
                                    best = Some((j, a));
                                }
                            }
                            Err(_) => {
                                cell.status = CellStatus::Degenerate;
                                if best.map_or(true, |(_, b)| b > f64::NEG_INFINITY) {
                                    best = Some((j, f64::NEG_INFINITY));
                                }
                            }
                        }
                        cell.optimum = Some(v.clone());
                        current[j] = Some(v);
                    }
                    Err(e) => cell.status = CellStatus::Failed(e.to_string()),
                }
            }
            cells.push(cell);
        }
        let (jb, _) = best.ok_or(Error::NoValidCell { cov_size: i })?;
        j_optim.push(Some(jb));
        let full = current[jb].clone().expect("optimal cell has an optimum");
        match ws.q2_for(cov, &reg_rank[..jb], &full) {
            Ok(q) => {
                q2s.push(Some(q));
                q2_errors.push(None);
            }
            Err(e) => {
                q2s.push(None);
                q2_errors.push(Some(e.to_string()));
            }
        }
        prev = current;
        prev_best = Some(jb);
    }
    Ok(PassTrace {
        cov_order: cov_rank.to_vec(),
        reg_order: reg_rank.to_vec(),
        cells,
        j_optim,
        q2: q2s,
        q2_errors,
    })
}

/// `dQ2(1) = Q2(1)`, `dQ2(k) = Q2(k) - Q2(k - 1)`. A missing Q2 gets
/// `-inf`, and the next increment is taken from the last available value.
pub fn delta_q2(q2: &[Option<f64>]) -> Vec<f64> {
    let mut last: Option<f64> = None;
    q2.iter()
        .map(|q| match q {
            Some(v) => {
                let d = v - last.unwrap_or(0.0);
                last = Some(*v);
                d
            }
            None => f64::NEG_INFINITY,
        })
        .collect()
}

/// Step 4: covariance inputs sorted by decreasing Q2 increment, ties kept in
/// the order of the pass's covariance ranking.
pub fn rerank_by_delta_q2(pass: &PassTrace) -> InputRanking {
    InputRanking::sorted(&pass.cov_order, &delta_q2(&pass.q2), RankingCriterion::DeltaQ2)
}

/// Step 6: `(i_optim, j_optim(i_optim))`, with ties on Q2 going to the
/// smaller covariance set.
pub fn select_optimal(pass: &PassTrace) -> Result<(usize, usize)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, q) in pass.q2.iter().enumerate() {
        if let Some(q) = q {
            if best.map_or(true, |(_, b)| *q > b) {
                best = Some((k + 1, *q));
            }
        }
    }
    let (i, _) = best.ok_or(Error::NoValidQ2)?;
    let j = pass.j_optim[i - 1].ok_or(Error::NoValidQ2)?;
    Ok((i, j))
}

fn choice_of(pass: &PassTrace) -> Result<Choice> {
    let (i, j) = select_optimal(pass)?;
    let cell = pass.cell(i, j);
    let optimum = cell.optimum.as_ref().ok_or(Error::NoValidQ2)?;
    Ok(Choice {
        i_optim: i,
        j_optim: j,
        cov_set: pass.cov_order[..i].to_vec(),
        reg_set: pass.reg_order[..j].to_vec(),
        q2: pass.q2[i - 1].unwrap_or(f64::NAN),
        params: unpack(optimum, false),
    })
}

/// Linear / nonlinear / both / inactive, from the final input sets.
pub fn classify_effects(d: usize, cov: &[usize], reg: &[usize]) -> Vec<InputEffect> {
    (0..d)
        .map(|k| match (reg.contains(&k), cov.contains(&k)) {
            (true, true) => InputEffect::LinearAndNonlinear,
            (true, false) => InputEffect::Linear,
            (false, true) => InputEffect::Nonlinear,
            (false, false) => InputEffect::Inactive,
        })
        .collect()
}

/// Models and trace produced by steps 0-6.
#[derive(Clone, Debug)]
pub struct SelectionOutcome {
    pub model: GpModel,
    pub trace: SelectionTrace,
    /// Model chosen from the first pass alone (what the pipeline returns
    /// without steps 4 and 5); present when steps 4-5 ran.
    pub first_pass_model: Option<GpModel>,
}

fn build_model(std_ts: &TrainingSet, transform: &InputTransform, choice: &Choice) -> Result<GpModel> {
    let d = std_ts.d();
    let kriging = Kriging::fit(
        std_ts.inputs().clone(),
        std_ts.outputs().to_vec(),
        ActiveSet::new(choice.cov_set.clone(), d)?,
        RegressionBasis::new(ActiveSet::new(choice.reg_set.clone(), d)?),
        choice.params.clone(),
    )?;
    GpModel::new(std_ts.input_names().to_vec(), transform.clone(), kriging)
}

/// Steps 0-6 on a raw learning sample.
pub fn select(ts: &TrainingSet, config: &PipelineConfig) -> Result<SelectionOutcome> {
    config.validate()?;
    let transform = InputTransform::fit_empirical(ts).map_err(|e| e.at_step(0))?;
    let std_ts = ts.with_inputs(transform.apply_matrix(ts.inputs()).map_err(|e| e.at_step(0))?);
    let m1 = rank_by_correlation(&std_ts).map_err(|e| e.at_step(1))?;
    let ws = Workspace {
        ts: &std_ts,
        config,
        plan: FoldPlan::new(std_ts.n(), config.k_build, config.seed).map_err(|e| e.at_step(2))?,
    };
    let first_pass = run_pass(&ws, &m1.order, &m1.order).map_err(|e| e.at_step(3))?;
    let first_pass_choice = choice_of(&first_pass).map_err(|e| e.at_step(6))?;

    let (delta, m2, second_pass, choice) = if config.steps_4_5 {
        let m2 = rerank_by_delta_q2(&first_pass);
        let second = run_pass(&ws, &m2.order, &m1.order).map_err(|e| e.at_step(5))?;
        let choice = choice_of(&second).map_err(|e| e.at_step(6))?;
        (Some(delta_q2(&first_pass.q2)), Some(m2), Some(second), choice)
    } else {
        (None, None, None, first_pass_choice.clone())
    };

    let model = build_model(&std_ts, &transform, &choice).map_err(|e| e.at_step(6))?;
    let first_pass_model = if config.steps_4_5 {
        Some(build_model(&std_ts, &transform, &first_pass_choice).map_err(|e| e.at_step(6))?)
    } else {
        None
    };
    let trace = SelectionTrace {
        seed: config.seed,
        k_build: config.k_build,
        steps_4_5: config.steps_4_5,
        input_names: ts.input_names().to_vec(),
        ranking_initial: m1,
        first_pass,
        delta_q2: delta,
        ranking_delta_q2: m2,
        second_pass,
        effects: classify_effects(ts.d(), &choice.cov_set, &choice.reg_set),
        first_pass_choice,
        choice,
        final_validation: None,
    };
    Ok(SelectionOutcome {
        model,
        trace,
        first_pass_model,
    })
}

/// Stream label for the outer validation folds.
const OUTER_FOLD_STREAM: u64 = 0x7;

/// Fold plan of the step-7 cross-validation.
pub fn outer_fold_plan(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    FoldPlan::new(n, k, mix_seed(seed, OUTER_FOLD_STREAM))
}

/// Q2 of `model` on a raw test sample.
pub fn test_q2(model: &GpModel, test: &TrainingSet) -> Result<f64> {
    let preds: Vec<f64> = model
        .predict_batch(test.inputs())?
        .into_iter()
        .map(|p| p.mean)
        .collect();
    q2(test.outputs(), &preds)
}

/// Step 7 for an already selected model.
pub fn final_validation(
    ts: &TrainingSet,
    model: &GpModel,
    config: &PipelineConfig,
) -> Result<Option<ValidationRecord>> {
    let record = match &config.final_validation {
        FinalValidation::Skip => None,
        FinalValidation::TestSet(test) => Some(ValidationRecord {
            method: "test sample".into(),
            n: test.n(),
            q2: test_q2(model, test)?,
        }),
        FinalValidation::OuterCv { k } => {
            let plan = outer_fold_plan(ts.n(), *k, config.seed)?;
            let out = kfold_q2(ts, &plan, |train, test| {
                let inner = select(train, config)?;
                Ok(inner
                    .model
                    .predict_batch(test)?
                    .into_iter()
                    .map(|p| p.mean)
                    .collect())
            })?;
            Some(ValidationRecord {
                method: format!("{k}-fold cross-validation around steps 0-6"),
                n: ts.n(),
                q2: out.q2,
            })
        }
    };
    Ok(record)
}

/// The whole methodology, steps 0-7.
pub fn fit_full(ts: &TrainingSet, config: &PipelineConfig) -> Result<(GpModel, SelectionTrace)> {
    let mut outcome = select(ts, config)?;
    outcome.trace.final_validation =
        final_validation(ts, &outcome.model, config).map_err(|e| Error::Step {
            step: 7,
            source: Box::new(e),
        })?;
    Ok((outcome.model, outcome.trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pass_with_q2(q: &[f64]) -> PassTrace {
        PassTrace {
            cov_order: (0..q.len()).collect(),
            reg_order: (0..q.len()).collect(),
            cells: Vec::new(),
            j_optim: vec![Some(1); q.len()],
            q2: q.iter().map(|v| Some(*v)).collect(),
            q2_errors: vec![None; q.len()],
        }
    }

    #[test]
    fn delta_q2_examples() {
        let d = delta_q2(&[Some(0.5), Some(0.7), Some(0.71)]);
        assert!((d[0] - 0.5).abs() < 1e-15 && (d[1] - 0.2).abs() < 1e-12 && (d[2] - 0.01).abs() < 1e-12);
        assert_eq!(rerank_by_delta_q2(&pass_with_q2(&[0.5, 0.7, 0.71])).order, vec![0, 1, 2]);
        assert_eq!(rerank_by_delta_q2(&pass_with_q2(&[0.1, 0.6, 0.62])).order, vec![1, 0, 2]);
        let mut flat = pass_with_q2(&[0.2, 0.4, 0.6]);
        flat.cov_order = vec![2, 0, 1];
        assert_eq!(rerank_by_delta_q2(&flat).order, vec![2, 0, 1]);
    }

    #[test]
    fn delta_q2_with_missing_value() {
        let d = delta_q2(&[Some(0.3), None, Some(0.5)]);
        assert_eq!(d[1], f64::NEG_INFINITY);
        assert!((d[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn select_optimal_examples() {
        assert_eq!(select_optimal(&pass_with_q2(&[0.3, 0.9, 0.85])).unwrap().0, 2);
        assert_eq!(select_optimal(&pass_with_q2(&[0.9, 0.9])).unwrap().0, 1);
        assert_eq!(select_optimal(&pass_with_q2(&[0.4])).unwrap().0, 1);
        let mut none = pass_with_q2(&[0.4]);
        none.q2 = vec![None];
        assert_eq!(select_optimal(&none), Err(Error::NoValidQ2));
    }

    #[test]
    fn start_vector_layout() {
        let c = PipelineConfig::default();
        assert_eq!(initial_start(2, &c), vec![0.5, 0.5, 1.0, 1.0, 1e-6]);
        assert_eq!(extend_start(&[3.0, 1.7, 0.01], &c), vec![3.0, 0.5, 1.7, 1.0, 0.01]);
        let p = unpack(&[3.0, 0.5, 1.7, 1.0, 0.01], false);
        assert_eq!(p.theta, vec![3.0, 0.5]);
        assert_eq!(p.power, vec![1.7, 1.0]);
        assert_eq!(pack(&p), vec![3.0, 0.5, 1.7, 1.0, 0.01]);
        assert_eq!(unpack(&[1.0, 1.6, 0.0], true).power, vec![2.0]);
    }

    #[test]
    fn effects() {
        let e = classify_effects(4, &[1, 2], &[0, 1]);
        assert_eq!(
            e,
            vec![
                InputEffect::Linear,
                InputEffect::LinearAndNonlinear,
                InputEffect::Nonlinear,
                InputEffect::Inactive
            ]
        );
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let c = PipelineConfig {
            k_build: 1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.theta.lower = 0.0;
        assert!(c.validate().is_err());
    }
}
