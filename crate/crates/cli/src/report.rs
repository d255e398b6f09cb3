//! Plain-text reports. Everything written here is a function of the inputs
//! and the seed only (no timings, paths or dates), so reruns are
//! byte-identical.

use std::fmt::Write;

use gpsurrogate_core::benchmark::{BenchmarkProtocol, TableRow};
use gpsurrogate_core::selection::{
    CellStatus, Choice, InputEffect, PassTrace, PipelineConfig, SelectionTrace, WarmStart,
};

fn names(trace: &SelectionTrace, idx: &[usize]) -> String {
    if idx.is_empty() {
        return "(none)".into();
    }
    idx.iter()
        .map(|&k| trace.input_names[k].as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn pass_section(out: &mut String, trace: &SelectionTrace, pass: &PassTrace) {
    let d = pass.d();
    let _ = writeln!(out, "  covariance order: {}", names(trace, &pass.cov_order));
    let _ = writeln!(out, "  regression order: {}", names(trace, &pass.reg_order));
    let _ = writeln!(out, "  AICC(i, j), i = covariance inputs, j = regression inputs:");
    let mut header = format!("  {:>6}", "");
    for j in 1..=d {
        let _ = write!(header, " {:>14}", format!("j={j}"));
    }
    let _ = writeln!(out, "{header}");
    for i in 1..=d {
        let mut line = format!("  {:>6}", format!("i={i}"));
        for j in 1..=d {
            let c = pass.cell(i, j);
            let cell = match &c.status {
                CellStatus::Fitted => format!("{:.4}", c.aicc.unwrap_or(f64::NAN)),
                CellStatus::Degenerate => "-inf".into(),
                CellStatus::AiccUndefined => "undef".into(),
                CellStatus::Failed(_) => "failed".into(),
            };
            let mark = if pass.j_optim[i - 1] == Some(j) { "*" } else { " " };
            let _ = write!(line, " {cell:>13}{mark}");
        }
        let _ = writeln!(out, "{line}");
    }
    for c in &pass.cells {
        if let CellStatus::Failed(msg) = &c.status {
            let _ = writeln!(out, "  cell ({}, {}) failed: {msg}", c.cov_size, c.reg_size);
        }
        if c.budget_exhausted {
            let _ = writeln!(out, "  cell ({}, {}) stopped on the evaluation budget", c.cov_size, c.reg_size);
        }
        if c.warm_start == WarmStart::OptimalRegression {
            let _ = writeln!(
                out,
                "  cell ({}, {}) started from the optimal regression cell of the previous row",
                c.cov_size, c.reg_size
            );
        }
    }
    let _ = writeln!(out, "  {:>4} {:>8} {:>12}  covariance input added", "i", "j_optim", "Q2");
    for i in 1..=d {
        let j = pass.j_optim[i - 1].map_or_else(|| "-".into(), |j| j.to_string());
        let _ = writeln!(
            out,
            "  {:>4} {:>8} {:>12}  {}",
            i,
            j,
            opt(pass.q2[i - 1]),
            trace.input_names[pass.cov_order[i - 1]]
        );
        if let Some(e) = &pass.q2_errors[i - 1] {
            let _ = writeln!(out, "       Q2 failed: {e}");
        }
    }
}

fn choice_section(out: &mut String, trace: &SelectionTrace, c: &Choice) {
    let _ = writeln!(out, "  i_optim = {}, j_optim = {}, Q2 = {:.6}", c.i_optim, c.j_optim, c.q2);
    let _ = writeln!(out, "  covariance inputs: {}", names(trace, &c.cov_set));
    let _ = writeln!(out, "  regression inputs: {}", names(trace, &c.reg_set));
    for (l, &k) in c.cov_set.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {:<12} theta = {:.6e}  p = {:.6}",
            trace.input_names[k], c.params.theta[l], c.params.power[l]
        );
    }
    let _ = writeln!(out, "  tau = {:.6e}", c.params.tau);
}

fn effect_label(e: InputEffect) -> &'static str {
    match e {
        InputEffect::Linear => "linear only",
        InputEffect::Nonlinear => "nonlinear only",
        InputEffect::LinearAndNonlinear => "linear and nonlinear",
        InputEffect::Inactive => "inactive",
    }
}

/// Step-by-step account of a selection run.
pub fn selection_report(trace: &SelectionTrace, n: usize, output_name: &str, config: &PipelineConfig) -> String {
    let mut out = String::new();
    let d = trace.input_names.len();
    let _ = writeln!(out, "gpsurrogate selection report");
    let _ = writeln!(out, "seed: {}", trace.seed);
    let _ = writeln!(out, "sample: n = {n}, d = {d}, output = {output_name}");
    let _ = writeln!(out, "inputs: {}", trace.input_names.join(", "));
    let _ = writeln!(out);
    let _ = writeln!(out, "[step 0] inputs mapped to [0, 1] by their empirical distribution functions");
    let _ = writeln!(out, "[step 1] ranking by absolute correlation with the output (M1):");
    for (k, v) in trace.ranking_initial.order.iter().zip(&trace.ranking_initial.values) {
        let _ = writeln!(out, "  {:<12} {v:.6}", trace.input_names[*k]);
    }
    let tau = if config.tau.is_fixed() {
        format!("fixed at {}", config.tau.lower)
    } else {
        format!("in [{}, {}], start {:e}", config.tau.lower, config.tau.upper, config.tau.start)
    };
    let _ = writeln!(out, "[step 2] search space");
    let _ = writeln!(
        out,
        "  theta in [{:e}, {:e}] (log scale), start {}",
        config.theta.lower, config.theta.upper, config.theta.start
    );
    if config.restrict_power {
        let _ = writeln!(out, "  p in {{0.5, 1, 2}}, start 1");
    } else {
        let _ = writeln!(
            out,
            "  p in [{}, {}], start {}",
            config.power.lower, config.power.upper, config.power.start
        );
    }
    let _ = writeln!(out, "  tau {tau}");
    let _ = writeln!(
        out,
        "  pattern search: {} evaluations per parameter, step {} shrinking by {} down to {}",
        config.evals_per_coordinate, config.initial_step, config.shrink, config.stop_step
    );
    let _ = writeln!(out, "  model-building cross-validation: K = {}", trace.k_build);
    let _ = writeln!(out, "[step 3] first pass");
    pass_section(&mut out, trace, &trace.first_pass);
    match (&trace.delta_q2, &trace.ranking_delta_q2, &trace.second_pass) {
        (Some(delta), Some(m2), Some(second)) => {
            let _ = writeln!(out, "[step 4] increments of Q2 along the first pass:");
            for (k, v) in trace.first_pass.cov_order.iter().zip(delta) {
                let _ = writeln!(out, "  {:<12} {v:.6}", trace.input_names[*k]);
            }
            let _ = writeln!(out, "  new covariance ranking (M2): {}", names(trace, &m2.order));
            let _ = writeln!(out, "[step 5] second pass");
            pass_section(&mut out, trace, second);
            let _ = writeln!(out, "  first pass alone would select:");
            let c = &trace.first_pass_choice;
            let _ = writeln!(
                out,
                "  i_optim = {}, j_optim = {}, Q2 = {:.6}",
                c.i_optim, c.j_optim, c.q2
            );
        }
        _ => {
            let _ = writeln!(out, "[step 4] skipped");
            let _ = writeln!(out, "[step 5] skipped");
        }
    }
    let _ = writeln!(out, "[step 6] selected model");
    choice_section(&mut out, trace, &trace.choice);
    let _ = writeln!(out, "  effects:");
    for (name, e) in trace.input_names.iter().zip(&trace.effects) {
        let _ = writeln!(out, "  {name:<12} {}", effect_label(*e));
    }
    match &trace.final_validation {
        Some(v) => {
            let _ = writeln!(out, "[step 7] {} on {} observations: Q2 = {:.6}", v.method, v.n, v.q2);
        }
        None => {
            let _ = writeln!(out, "[step 7] skipped");
        }
    }
    out
}

/// Summary of an outer cross-validation with the extra error measures.
pub fn cv_report(seed: u64, k: usize, y: &[f64], predictions: &[f64], q2: f64) -> String {
    let n = y.len() as f64;
    let sq: f64 = y.iter().zip(predictions).map(|(a, b)| (a - b) * (a - b)).sum();
    let max_abs = y
        .iter()
        .zip(predictions)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut out = String::new();
    let _ = writeln!(out, "gpsurrogate cross-validation report");
    let _ = writeln!(out, "seed: {seed}");
    let _ = writeln!(out, "folds: {k} (steps 0-6 rerun inside every fold)");
    let _ = writeln!(out, "n: {}", y.len());
    let _ = writeln!(out, "Q2: {q2:.6}");
    let _ = writeln!(out, "RMSE: {:.6e}", (sq / n).sqrt());
    let _ = writeln!(out, "max absolute error: {max_abs:.6e}");
    out
}

/// Per-row aggregate and every replicate Q2; no timings.
pub fn benchmark_report(protocol: &BenchmarkProtocol, rows: &[TableRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "gpsurrogate benchmark report (Sobol g-function, a_k = k)");
    let _ = writeln!(out, "seed: {}", protocol.seed);
    let _ = writeln!(
        out,
        "replicates: {}, learning sample: {} x d, test sample: {}",
        protocol.replicates, protocol.n_per_input, protocol.n_test
    );
    let _ = writeln!(out, "model-building folds: {}", protocol.pipeline.k_build);
    for r in rows {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "d = {}, N_LS = {}, {}: mean Q2 = {}, sd = {}, successful replicates = {}",
            r.d,
            r.n_learning,
            r.variant.label(),
            opt(r.mean_q2),
            opt(r.sd_q2),
            r.successes()
        );
        for (k, q) in r.q2.iter().enumerate() {
            let _ = writeln!(out, "  replicate {k:>3}: {}", opt(*q));
        }
        for (k, e) in &r.failures {
            let _ = writeln!(out, "  replicate {k:>3} failed: {e}");
        }
    }
    out
}

/// Summary table; `seconds[k]` is the wall time of the dimension of row `k`.
pub fn benchmark_table(rows: &[TableRow], seconds: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3} {:>5} {:<18} {:>9} {:>9} {:>10} {:>9}",
        "d", "N_LS", "variant", "mean Q2", "sd Q2", "replicates", "time (s)"
    );
    for (r, t) in rows.iter().zip(seconds) {
        let _ = writeln!(
            out,
            "{:>3} {:>5} {:<18} {:>9} {:>9} {:>10} {:>9.1}",
            r.d,
            r.n_learning,
            r.variant.label(),
            r.mean_q2.map_or("-".into(), |v| format!("{v:.4}")),
            r.sd_q2.map_or("n/a".into(), |v| format!("{v:.4}")),
            format!("{}/{}", r.successes(), r.q2.len()),
            t
        );
    }
    out
}

pub fn benchmark_csv(rows: &[TableRow], seconds: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["d", "N_LS", "variant", "mean_q2", "sd_q2", "replicates", "failed", "wall_time_s"])
        .expect("in-memory write");
    for (r, t) in rows.iter().zip(seconds) {
        w.write_record([
            r.d.to_string(),
            r.n_learning.to_string(),
            r.variant.label().to_string(),
            r.mean_q2.map_or(String::new(), |v| v.to_string()),
            r.sd_q2.map_or(String::new(), |v| v.to_string()),
            r.q2.len().to_string(),
            (r.q2.len() - r.successes()).to_string(),
            format!("{t:.3}"),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
