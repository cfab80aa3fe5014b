//! λ sweep over an instance set: penalized loss, expected first-emission
//! frame on the fixed logits, and delay metrics after a few rounds of
//! posterior self-training under the penalized objective.

use anyhow::Result;
use latgraph::metrics::{tokens_to_words, DelayAccumulator};
use latgraph::{delay_penalized_ctc_loss, expected_delay, greedy_decode, Label, TimedWord};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

/// Probability mass spread uniformly over each row after a self-training
/// round, so no column collapses to -inf.
pub const SMOOTHING: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SweepInstance {
    pub logprobs: Array2<f64>,
    pub labels: Vec<Label>,
    pub reference: Option<Vec<TimedWord>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub iterations: usize,
    pub frame_shift_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// Mean penalized log-likelihood over instances.
    pub loss_aug: f64,
    /// Mean first-emission frame per token under the penalized posterior.
    pub expected_delay_frames: f64,
    pub msd_ms: Option<f64>,
    pub med_ms: Option<f64>,
    pub wer: Option<f64>,
}

struct Cell {
    loss_aug: f64,
    mean_frame: f64,
    acc: Option<DelayAccumulator>,
}

/// Replaces each frame's distribution by the smoothed posterior occupancy of
/// the λ-penalized lattice, `iterations` times.
pub fn self_train(logprobs: &Array2<f64>, labels: &[Label], lambda: f64, iterations: usize) -> Result<Array2<f64>> {
    let mut current = logprobs.clone();
    let floor = SMOOTHING / current.ncols() as f64;
    for _ in 0..iterations {
        let (_, occupancy) = delay_penalized_ctc_loss(&current, labels, lambda)?;
        current = occupancy.mapv(|g| ((1.0 - SMOOTHING) * g.max(0.0) + floor).ln());
    }
    Ok(current)
}

fn evaluate(inst: &SweepInstance, lambda: f64, cfg: &SweepConfig) -> Result<Cell> {
    let (loss_aug, _) = delay_penalized_ctc_loss(&inst.logprobs, &inst.labels, lambda)?;
    let t = inst.logprobs.nrows() as f64;
    let d = expected_delay(&inst.logprobs, &inst.labels, lambda)?;
    let mean_frame = (t - 1.0) / 2.0 - d / inst.labels.len() as f64;
    let acc = match &inst.reference {
        Some(reference) => {
            let adapted = self_train(&inst.logprobs, &inst.labels, lambda, cfg.iterations)?;
            let hyp = tokens_to_words(&greedy_decode(&adapted), None);
            let mut acc = DelayAccumulator::default();
            acc.add(&hyp, reference);
            Some(acc)
        }
        None => None,
    };
    Ok(Cell {
        loss_aug,
        mean_frame,
        acc,
    })
}

/// One row per λ, in ascending λ order. Instances are evaluated in parallel;
/// results do not depend on scheduling.
pub fn run_sweep(instances: &[SweepInstance], lambdas: &[f64], cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let mut grid = lambdas.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|li| (0..instances.len()).map(move |ii| (li, ii)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(li, ii)| evaluate(&instances[ii], grid[li], cfg))
        .collect::<Result<Vec<Cell>>>()?;

    let n = instances.len().max(1) as f64;
    let mut rows = Vec::with_capacity(grid.len());
    for (li, &lambda) in grid.iter().enumerate() {
        let chunk = &cells[li * instances.len()..(li + 1) * instances.len()];
        let mut acc: Option<DelayAccumulator> = None;
        for c in chunk {
            if let Some(a) = &c.acc {
                acc.get_or_insert_with(DelayAccumulator::default).merge(a);
            }
        }
        let report = acc.map(|a| a.report(cfg.frame_shift_ms)).transpose()?;
        rows.push(SweepRow {
            lambda,
            loss_aug: chunk.iter().map(|c| c.loss_aug).sum::<f64>() / n,
            expected_delay_frames: chunk.iter().map(|c| c.mean_frame).sum::<f64>() / n,
            msd_ms: report.as_ref().and_then(|r| r.msd_ms),
            med_ms: report.as_ref().and_then(|r| r.med_ms),
            wer: report.as_ref().map(|r| r.wer),
        });
    }
    Ok(rows)
}

pub fn rows_tsv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    let mut out = String::from("lambda\tloss_aug\texpected_delay_frames\tmsd_ms\tmed_ms\twer\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{}\t{}\t{}\n",
            r.lambda,
            r.loss_aug,
            r.expected_delay_frames,
            opt(r.msd_ms),
            opt(r.med_ms),
            opt(r.wer)
        ));
    }
    out
}
