//! Flat `key = value` configuration files. Values given on the command line
//! override the file, which overrides the built-in defaults.

use std::path::Path;

use gpsurrogate_core::selection::{CvMode, FinalValidation, ParameterBounds, PipelineConfig};
use serde::Deserialize;

use crate::error::CliError;

/// Settings shared by the config file and the command line. Every field is
/// optional; unset fields leave the lower-precedence value alone.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct PipelineOptions {
    /// Folds of the model-building cross-validation.
    #[arg(long)]
    pub k_build: Option<usize>,
    /// Folds of the final cross-validation around the whole selection (0
    /// skips it).
    #[arg(long)]
    pub k_valid: Option<usize>,
    /// Stop after the first pass (no reranking of the covariance inputs).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub skip_steps_4_5: Option<bool>,
    /// Restrict every power to {0.5, 1, 2}.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub restrict_p: Option<bool>,
    /// Pin the nugget ratio to this value instead of estimating it.
    #[arg(long)]
    pub tau_fixed: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub theta_max: Option<f64>,
    /// Reuse full-sample hyperparameters inside the model-building folds.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fixed_hyper_cv: Option<bool>,
    /// Pattern-search evaluations allowed per estimated parameter.
    #[arg(long)]
    pub evals_per_param: Option<usize>,
    #[arg(long)]
    pub stop_step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl PipelineOptions {
    /// Fills unset fields from `lower`.
    pub fn or(self, lower: PipelineOptions) -> PipelineOptions {
        PipelineOptions {
            k_build: self.k_build.or(lower.k_build),
            k_valid: self.k_valid.or(lower.k_valid),
            skip_steps_4_5: self.skip_steps_4_5.or(lower.skip_steps_4_5),
            restrict_p: self.restrict_p.or(lower.restrict_p),
            tau_fixed: self.tau_fixed.or(lower.tau_fixed),
            tau_max: self.tau_max.or(lower.tau_max),
            theta_min: self.theta_min.or(lower.theta_min),
            theta_max: self.theta_max.or(lower.theta_max),
            fixed_hyper_cv: self.fixed_hyper_cv.or(lower.fixed_hyper_cv),
            evals_per_param: self.evals_per_param.or(lower.evals_per_param),
            stop_step: self.stop_step.or(lower.stop_step),
            seed: self.seed.or(lower.seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut c = PipelineConfig::default();
        if let Some(k) = self.k_build {
            c.k_build = k;
        }
        c.final_validation = match self.k_valid {
            Some(0) => FinalValidation::Skip,
            Some(k) => FinalValidation::OuterCv { k },
            None => c.final_validation,
        };
        if let Some(b) = self.skip_steps_4_5 {
            c.steps_4_5 = !b;
        }
        if let Some(b) = self.restrict_p {
            c.restrict_power = b;
        }
        if let Some(v) = self.tau_max {
            c.tau = ParameterBounds::new(c.tau.lower, v, c.tau.start.min(v));
        }
        if let Some(v) = self.tau_fixed {
            c.tau = ParameterBounds::fixed(v);
        }
        if let Some(v) = self.theta_min {
            c.theta.lower = v;
            c.theta.start = c.theta.start.max(v);
        }
        if let Some(v) = self.theta_max {
            c.theta.upper = v;
            c.theta.start = c.theta.start.min(v);
        }
        if self.fixed_hyper_cv == Some(true) {
            c.cv_mode = CvMode::FixedHyperparameters;
        }
        if let Some(v) = self.evals_per_param {
            c.evals_per_coordinate = v;
        }
        if let Some(v) = self.stop_step {
            c.stop_step = v;
        }
        c.seed = self.seed();
        c
    }
}

/// Contents of a `--config` file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub output_col: Option<String>,
    pub jobs: Option<usize>,
    pub replicates: Option<usize>,
    pub d: Option<Vec<usize>>,
    pub n_test: Option<usize>,
    pub n_per_input: Option<usize>,
    pub pipeline: PipelineOptions,
}

#[derive(Default, Deserialize)]
struct RunKeys {
    output_col: Option<String>,
    jobs: Option<usize>,
    replicates: Option<usize>,
    d: Option<Vec<usize>>,
    n_test: Option<usize>,
    n_per_input: Option<usize>,
}

const RUN_KEYS: [&str; 6] = ["output_col", "jobs", "replicates", "d", "n_test", "n_per_input"];

pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
    let err = |e: toml::de::Error| CliError::Usage(format!("config file: {e}"));
    let mut table: toml::Table = toml::from_str(text).map_err(err)?;
    let mut run = toml::Table::new();
    for key in RUN_KEYS {
        if let Some(v) = table.remove(key) {
            run.insert(key.into(), v);
        }
    }
    let run: RunKeys = run.try_into().map_err(err)?;
    let pipeline: PipelineOptions = table.try_into().map_err(err)?;
    Ok(ConfigFile {
        output_col: run.output_col,
        jobs: run.jobs,
        replicates: run.replicates,
        d: run.d,
        n_test: run.n_test,
        n_per_input: run.n_per_input,
        pipeline,
    })
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(p.display().to_string(), e))?;
            parse(&text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_overrides_file() {
        let file = parse("k_build = 5\nseed = 7\nskip_steps_4_5 = true\ntau_fixed = 0.0\n").unwrap();
        let cli = PipelineOptions {
            seed: Some(9),
            ..Default::default()
        };
        let merged = cli.or(file.pipeline);
        let c = merged.pipeline();
        assert_eq!(c.k_build, 5);
        assert_eq!(c.seed, 9);
        assert!(!c.steps_4_5);
        assert_eq!(c.tau, ParameterBounds::fixed(0.0));
    }

    #[test]
    fn defaults_and_skip() {
        assert_eq!(PipelineOptions::default().pipeline(), PipelineConfig::default());
        let c = PipelineOptions {
            k_valid: Some(0),
            ..Default::default()
        }
        .pipeline();
        assert_eq!(c.final_validation, FinalValidation::Skip);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse("k_bild = 3"), Err(CliError::Usage(_))));
        assert_eq!(parse("d = [2, 3]\n").unwrap().d, Some(vec![2, 3]));
    }
}
