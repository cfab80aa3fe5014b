//! Oracle check: seeded random instances through the lattice pipeline and
//! the brute-force enumerator, compared quantity by quantity.

use latgraph::oracle::{count_alignments, oracle_losses};
use latgraph::synth::{random_instance, rng, Instance, RandomBounds};
use latgraph::{
    build_ctc_lattice, ctc_loss, ctc_topology, delay_penalized_ctc_loss, expected_delay, DenseFsa,
};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    pub trials: usize,
    pub seed: u64,
    pub bounds: RandomBounds,
    pub tolerance: f64,
}

/// Largest absolute discrepancy seen for each compared quantity.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MaxErrors {
    pub loss: f64,
    pub loss_aug: f64,
    pub expected_delay: f64,
    pub row_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub trials: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub tolerance: f64,
    pub max_abs_error: MaxErrors,
    pub path_count_mismatches: usize,
    pub zero_lambda_mismatches: usize,
    pub mismatches: usize,
    /// The first few failing instances, by trial index.
    pub failures: Vec<String>,
    pub ok: bool,
}

const MAX_REPORTED_FAILURES: usize = 10;

#[derive(Default)]
struct Outcome {
    errs: MaxErrors,
    count_bad: bool,
    zero_bad: bool,
    failure: Option<String>,
}

fn check_one(inst: &Instance, lambdas: &[f64], tol: f64) -> Outcome {
    let mut out = Outcome::default();
    let fail = |msg: String| Outcome {
        failure: Some(msg),
        ..Outcome::default()
    };
    let oracle0 = match oracle_losses(&inst.logprobs, &inst.labels, 0.0) {
        Ok(o) => o,
        Err(e) => return fail(format!("oracle: {e}")),
    };
    let (l, grad) = match ctc_loss(&inst.logprobs, &inst.labels) {
        Ok(v) => v,
        Err(e) => return fail(format!("ctc_loss: {e}")),
    };
    out.errs.loss = (l - oracle0.l).abs();
    out.errs.row_sum = grad
        .rows()
        .into_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);

    let lattice_paths = DenseFsa::new(inst.logprobs.clone())
        .and_then(|d| build_ctc_lattice(&ctc_topology(d.vocab_size())?, &inst.labels, &d))
        .map(|lat| lat.count_paths());
    let recurrence = count_alignments(inst.num_frames(), &inst.labels);
    out.count_bad = !matches!(lattice_paths, Ok(n) if n == recurrence && n == oracle0.paths.len() as u128);

    match delay_penalized_ctc_loss(&inst.logprobs, &inst.labels, 0.0) {
        Ok((l0, g0)) => out.zero_bad = l0.to_bits() != l.to_bits() || g0 != grad,
        Err(_) => out.zero_bad = true,
    }

    for &lambda in lambdas {
        let o = oracle_losses(&inst.logprobs, &inst.labels, lambda);
        let aug = delay_penalized_ctc_loss(&inst.logprobs, &inst.labels, lambda);
        let ed = expected_delay(&inst.logprobs, &inst.labels, lambda);
        match (o, aug, ed) {
            (Ok(o), Ok((aug, _)), Ok(ed)) => {
                out.errs.loss_aug = out.errs.loss_aug.max((aug - o.l_aug_approx).abs());
                out.errs.expected_delay = out.errs.expected_delay.max((ed - o.expected_d_penalized).abs());
            }
            _ => return fail(format!("λ={lambda}: pipeline error")),
        }
    }

    let e = &out.errs;
    let worst = e.loss.max(e.loss_aug).max(e.expected_delay).max(e.row_sum);
    if worst > tol || out.count_bad || out.zero_bad || worst.is_nan() {
        out.failure = Some(format!(
            "loss {:.3e}, loss_aug {:.3e}, expected_delay {:.3e}, row_sum {:.3e}, path_count_ok {}, zero_lambda_ok {}",
            e.loss, e.loss_aug, e.expected_delay, e.row_sum, !out.count_bad, !out.zero_bad
        ));
    }
    out
}

pub fn generate(cfg: &CheckConfig) -> Vec<Instance> {
    let mut r = rng(cfg.seed);
    (0..cfg.trials).map(|_| random_instance(&mut r, cfg.bounds)).collect()
}

pub fn oracle_check(cfg: &CheckConfig, lambdas: &[f64]) -> CheckReport {
    let instances = generate(cfg);
    let outcomes: Vec<Outcome> = instances
        .par_iter()
        .map(|inst| check_one(inst, lambdas, cfg.tolerance))
        .collect();
    let mut max = MaxErrors::default();
    let mut failures = Vec::new();
    let mut mismatches = 0;
    for (i, o) in outcomes.iter().enumerate() {
        max.loss = max.loss.max(o.errs.loss);
        max.loss_aug = max.loss_aug.max(o.errs.loss_aug);
        max.expected_delay = max.expected_delay.max(o.errs.expected_delay);
        max.row_sum = max.row_sum.max(o.errs.row_sum);
        if let Some(msg) = &o.failure {
            mismatches += 1;
            if failures.len() < MAX_REPORTED_FAILURES {
                failures.push(format!("trial {i}: {msg}"));
            }
        }
    }
    CheckReport {
        trials: cfg.trials,
        seed: cfg.seed,
        lambdas: lambdas.to_vec(),
        tolerance: cfg.tolerance,
        max_abs_error: max,
        path_count_mismatches: outcomes.iter().filter(|o| o.count_bad).count(),
        zero_lambda_mismatches: outcomes.iter().filter(|o| o.zero_bad).count(),
        mismatches,
        failures,
        ok: mismatches == 0,
    }
}
