//! Thread-pool variants of the embarrassingly parallel steps. Results are
//! collected in input order, so output is identical to the sequential path.

use rayon::prelude::*;
use tayfcs_core::data::Dataset;
use tayfcs_core::lre::{measure, GainEvaluator, GainTask};
use tayfcs_core::models::{DnnModel, LrModel};
use tayfcs_core::tayscorer::{
    compute_expansion_point, field_signals, score_signals, scoring_subset, BackwardCounter, FieldSignals,
    ScorerConfig, ScoringOutcome,
};

use crate::error::{Error, Result};

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Same result as [`tayfcs_core::tayscorer::score_model`], batches spread over
/// `pool`.
pub fn score_model_parallel(
    model: &DnnModel,
    scoring_set: &Dataset,
    config: &ScorerConfig,
    pool: &rayon::ThreadPool,
) -> Result<ScoringOutcome> {
    config.validate()?;
    let subset = scoring_subset(scoring_set, config.fraction, config.seed);
    let x0 = compute_expansion_point(model, &subset, config.expansion)?;
    let all: Vec<usize> = (0..subset.len()).collect();
    let batches: Vec<&[usize]> = all.chunks(config.batch_size).collect();
    let parts = pool.install(|| {
        batches
            .par_iter()
            .map(|b| {
                let mut c = BackwardCounter::default();
                field_signals(model, &x0, &subset, b, config.target, &mut c).map(|s| (s, c.passes))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let passes = parts.iter().map(|(_, p)| p).sum();
    let mut signals = FieldSignals::concat(parts.into_iter().map(|(s, _)| s).collect());
    signals.fields = model.fields().len();
    Ok(score_signals(model, &signals, config.max_order, subset.len(), passes, x0)?)
}

/// Shuffle gains measured on a thread pool.
pub struct PoolEvaluator<'a>(pub &'a rayon::ThreadPool);

impl GainEvaluator for PoolEvaluator<'_> {
    fn evaluate(
        &self,
        model: &LrModel,
        val: &Dataset,
        baseline: f64,
        tasks: &[GainTask],
    ) -> tayfcs_core::Result<Vec<(f64, u64)>> {
        self.0
            .install(|| tasks.par_iter().map(|t| measure(model, val, baseline, *t)).collect())
    }
}
