//! Bounded Hooke & Jeeves pattern search.
//!
//! Each iteration probes `+step` then `-step` along every coordinate
//! (exploratory move); a successful exploration is followed by pattern moves
//! along the direction of improvement for as long as they keep improving.
//! When exploration fails the step is multiplied by the shrink factor, and
//! the search stops once it falls below the stop fraction or the evaluation
//! budget is spent. Steps are expressed as fractions of each coordinate's
//! (possibly log-scaled) bound range, and every probe is clipped to the box.
//! The search is fully deterministic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Scale {
    Linear,
    /// Searched over `log10` of the value; bounds must be positive.
    Log10,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpec {
    pub start: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub scales: Vec<Scale>,
    pub max_evals: usize,
    /// First step as a fraction of each scaled range.
    pub initial_step: f64,
    pub shrink: f64,
    /// Stop once the step fraction drops below this.
    pub stop_step: f64,
}

pub const DEFAULT_INITIAL_STEP: f64 = 0.25;
pub const DEFAULT_SHRINK: f64 = 0.5;
pub const DEFAULT_STOP_STEP: f64 = 1e-4;
pub const DEFAULT_EVALS_PER_COORDINATE: usize = 500;

impl SearchSpec {
    /// Linear coordinates with the default step schedule and a budget of
    /// `500 * m` evaluations.
    pub fn new(start: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let m = start.len();
        Self {
            start,
            lower,
            upper,
            scales: vec![Scale::Linear; m],
            max_evals: DEFAULT_EVALS_PER_COORDINATE * m.max(1),
            initial_step: DEFAULT_INITIAL_STEP,
            shrink: DEFAULT_SHRINK,
            stop_step: DEFAULT_STOP_STEP,
        }
    }

    pub fn with_scales(mut self, scales: Vec<Scale>) -> Self {
        self.scales = scales;
        self
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.start.len();
        if self.lower.len() != m || self.upper.len() != m || self.scales.len() != m {
            return Err(Error::InvalidSearchSpec(format!(
                "start, bounds and scales must all have length {m}"
            )));
        }
        for k in 0..m {
            let (s, lo, hi) = (self.start[k], self.lower[k], self.upper[k]);
            if !(lo.is_finite() && hi.is_finite() && lo <= s && s <= hi) {
                return Err(Error::InvalidSearchSpec(format!(
                    "coordinate {k}: need lower <= start <= upper, got {lo} <= {s} <= {hi}"
                )));
            }
            if self.scales[k] == Scale::Log10 && !(lo > 0.0) {
                return Err(Error::InvalidSearchSpec(format!(
                    "coordinate {k}: log-scaled bounds must be positive"
                )));
            }
        }
        if !(self.initial_step > 0.0 && self.shrink > 0.0 && self.shrink < 1.0 && self.stop_step > 0.0) {
            return Err(Error::InvalidSearchSpec(
                "need initial_step > 0, 0 < shrink < 1, stop_step > 0".into(),
            ));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidSearchSpec("max_evals must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// The search stopped on the evaluation budget rather than the step size.
    pub budget_exhausted: bool,
}

struct Searcher<'s, F> {
    f: F,
    spec: &'s SearchSpec,
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: Vec<f64>,
    evals: usize,
    user: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Searcher<'_, F> {
    fn exhausted(&self) -> bool {
        self.evals >= self.spec.max_evals
    }

    fn to_user(&self, k: usize, s: f64) -> f64 {
        match self.spec.scales[k] {
            Scale::Linear => s,
            Scale::Log10 => {
                if s == self.start[k] {
                    self.spec.start[k]
                } else if s <= self.lo[k] {
                    self.spec.lower[k]
                } else if s >= self.hi[k] {
                    self.spec.upper[k]
                } else {
                    math::pow10(s).clamp(self.spec.lower[k], self.spec.upper[k])
                }
            }
        }
    }

    fn eval(&mut self, s: &[f64]) -> f64 {
        for k in 0..s.len() {
            self.user[k] = self.to_user(k, s[k]);
        }
        self.evals += 1;
        let v = (self.f)(&self.user);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn explore(&mut self, point: &[f64], value: f64, frac: f64) -> (Vec<f64>, f64) {
        let mut x = point.to_vec();
        let mut fx = value;
        for k in 0..x.len() {
            let step = frac * (self.hi[k] - self.lo[k]);
            if step == 0.0 {
                continue;
            }
            let orig = x[k];
            let mut moved = false;
            for dir in [1.0, -1.0] {
                if self.exhausted() {
                    return (x, fx);
                }
                let cand = (orig + dir * step).clamp(self.lo[k], self.hi[k]);
                if cand == orig {
                    continue;
                }
                x[k] = cand;
                let fc = self.eval(&x);
                if fc < fx {
                    fx = fc;
                    moved = true;
                    break;
                }
            }
            if !moved {
                x[k] = orig;
            }
        }
        (x, fx)
    }
}

/// Minimizes `f` over the box of `spec`. `f` receives points in user units
/// (log-scaled coordinates are exponentiated back).
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, spec: &SearchSpec) -> Result<SearchOutcome> {
    spec.validate()?;
    let m = spec.dim();
    let scaled = |k: usize, v: f64| match spec.scales[k] {
        Scale::Linear => v,
        Scale::Log10 => math::log10(v),
    };
    let lo: Vec<f64> = (0..m).map(|k| scaled(k, spec.lower[k])).collect();
    let hi: Vec<f64> = (0..m).map(|k| scaled(k, spec.upper[k])).collect();
    let start: Vec<f64> = (0..m)
        .map(|k| {
            if spec.start[k] == spec.lower[k] {
                lo[k]
            } else if spec.start[k] == spec.upper[k] {
                hi[k]
            } else {
                scaled(k, spec.start[k]).clamp(lo[k], hi[k])
            }
        })
        .collect();
    let mut s = Searcher {
        f,
        spec,
        lo,
        hi,
        start: start.clone(),
        evals: 0,
        user: vec![0.0; m],
    };

    let mut base = start;
    let mut fbase = s.eval(&base);
    let mut frac = spec.initial_step;
    while frac >= spec.stop_step && !s.exhausted() {
        let (x, fx) = s.explore(&base, fbase, frac);
        if fx < fbase {
            let mut prev = core::mem::replace(&mut base, x);
            fbase = fx;
            while !s.exhausted() {
                let trial: Vec<f64> = (0..m)
                    .map(|k| (2.0 * base[k] - prev[k]).clamp(s.lo[k], s.hi[k]))
                    .collect();
                if trial == base {
                    break;
                }
                let ft = s.eval(&trial);
                let (x, fx) = s.explore(&trial, ft, frac);
                if fx < fbase {
                    prev = core::mem::replace(&mut base, x);
                    fbase = fx;
                } else {
                    break;
                }
            }
        } else {
            frac *= spec.shrink;
        }
    }
    let budget_exhausted = s.exhausted() && frac >= spec.stop_step;
    let argmin = (0..m).map(|k| s.to_user(k, base[k])).collect();
    Ok(SearchOutcome {
        argmin,
        value: fbase,
        evals: s.evals,
        budget_exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_quadratic() {
        let spec = SearchSpec::new(vec![0.5], vec![0.0], vec![1.0]);
        let out = minimize(|x| (x[0] - 0.3) * (x[0] - 0.3), &spec).unwrap();
        assert!((out.argmin[0] - 0.3).abs() < 1e-3);
        assert!(!out.budget_exhausted);
    }

    #[test]
    fn constant_objective_returns_start() {
        let spec = SearchSpec::new(vec![0.2, 0.7], vec![0.0, 0.0], vec![1.0, 1.0]);
        let out = minimize(|_| 4.0, &spec).unwrap();
        assert_eq!(out.argmin, vec![0.2, 0.7]);
        assert_eq!(out.value, 4.0);
    }

    #[test]
    fn optimum_at_bound_corner() {
        let (l, u) = (-1.0, 3.0);
        let spec = SearchSpec::new(vec![0.5, 0.5], vec![l, 0.0], vec![2.0, u]);
        let out = minimize(|x| (x[0] - l).powi(2) + (x[1] - u).powi(2), &spec).unwrap();
        assert_eq!(out.argmin, vec![l, u]);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn log_scaled_coordinate() {
        let spec = SearchSpec::new(vec![0.5], vec![1e-8], vec![1e2]).with_scales(vec![Scale::Log10]);
        let out = minimize(|x| (x[0].log10() + 3.0).powi(2), &spec).unwrap();
        assert!((out.argmin[0].log10() + 3.0).abs() < 1e-2);
        let at_bound = minimize(|x| x[0], &spec).unwrap();
        assert_eq!(at_bound.argmin[0], 1e-8);
    }

    #[test]
    fn budget_flag() {
        let mut spec = SearchSpec::new(vec![0.9], vec![0.0], vec![1.0]);
        spec.max_evals = 3;
        let out = minimize(|x| x[0], &spec).unwrap();
        assert!(out.budget_exhausted);
        assert_eq!(out.evals, 3);
    }

    #[test]
    fn invalid_specs() {
        assert!(minimize(|x| x[0], &SearchSpec::new(vec![2.0], vec![0.0], vec![1.0])).is_err());
        let log = SearchSpec::new(vec![0.5], vec![0.0], vec![1.0]).with_scales(vec![Scale::Log10]);
        assert!(minimize(|x| x[0], &log).is_err());
    }

    #[test]
    fn queries_stay_in_bounds_and_best_is_monotone() {
        let spec = SearchSpec::new(vec![0.1, 0.9], vec![0.0, -1.0], vec![1.0, 1.0]);
        let mut best = f64::INFINITY;
        let mut history = Vec::new();
        let out = minimize(
            |x| {
                assert!((0.0..=1.0).contains(&x[0]) && (-1.0..=1.0).contains(&x[1]));
                let v = (x[0] - 2.0).powi(2) + (x[1] + 0.3).powi(2) + x[0] * x[1];
                best = best.min(v);
                history.push(best);
                v
            },
            &spec,
        )
        .unwrap();
        assert!(history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(out.value, best);
    }

    #[test]
    fn deterministic() {
        let spec = SearchSpec::new(vec![0.5, 0.5], vec![0.0, 0.0], vec![1.0, 1.0]);
        let f = |x: &[f64]| (x[0] - 0.2).powi(2) + 3.0 * (x[1] - 0.8).powi(2) + (x[0] * 7.0).sin() * 0.01;
        assert_eq!(minimize(f, &spec).unwrap(), minimize(f, &spec).unwrap());
    }
}
