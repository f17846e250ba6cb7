//! Parallel evaluation of experiment cells.
//!
//! Cells own their generators, so the order in which rayon runs them does not
//! affect the output; rows are merged with the same sort as the sequential
//! runners in `qkl_core::experiments`.

use rayon::prelude::*;
use rayon::ThreadPool;

use qkl_core::experiments::{
    self, AlignmentCurveRow, AlignmentRow, ConcentrationRow, ExperimentConfig, GeneralizationRow, ShotCostRow,
    SpectrumCell, SpectrumRow,
};

use crate::error::{QklError, Result};

pub const THREADS_VAR: &str = "QKL_THREADS";

/// Pool sized by `QKL_THREADS` (unset or `0` means one thread per core).
pub fn thread_pool() -> Result<ThreadPool> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(raw) if !raw.trim().is_empty() => raw
            .trim()
            .parse::<usize>()
            .map_err(|_| QklError::Validation(format!("{THREADS_VAR} must be a non-negative integer, got {raw:?}")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| QklError::Validation(format!("cannot build thread pool: {e}")))
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    config.validate().map_err(|e| QklError::Validation(e.to_string()))
}

fn par_cells<T, F>(pool: &ThreadPool, config: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> qkl_core::Result<T> + Sync,
{
    let cells = config.cells();
    pool.install(|| cells.par_iter().map(|&(d, s)| f(d, s)).collect::<qkl_core::Result<Vec<T>>>())
        .map_err(QklError::from)
}

pub fn generalization(pool: &ThreadPool, config: &ExperimentConfig) -> Result<Vec<GeneralizationRow>> {
    validate(config)?;
    let mut rows: Vec<GeneralizationRow> = par_cells(pool, config, |d, s| experiments::generalization_cell(config, d, s))?
        .into_iter()
        .flatten()
        .collect();
    experiments::sort_generalization(&mut rows);
    Ok(rows)
}

/// Spectrum rows plus the per-cell Lemma check.
pub fn spectrum(pool: &ThreadPool, config: &ExperimentConfig) -> Result<(Vec<SpectrumRow>, Vec<SpectrumCell>)> {
    validate(config)?;
    let cells = par_cells(pool, config, |d, s| experiments::spectrum_cell(config, d, s))?;
    let mut rows: Vec<SpectrumRow> = cells.iter().flat_map(|c| c.rows.iter().cloned()).collect();
    experiments::sort_spectrum(&mut rows);
    Ok((rows, cells))
}

pub fn alignment(pool: &ThreadPool, config: &ExperimentConfig) -> Result<(Vec<AlignmentRow>, Vec<AlignmentCurveRow>)> {
    validate(config)?;
    let cells = par_cells(pool, config, |d, s| experiments::alignment_cell(config, d, s))?;
    let (mut scores, mut curves) = (Vec::new(), Vec::new());
    for (s, c) in cells {
        scores.extend(s);
        curves.extend(c);
    }
    experiments::sort_alignment(&mut scores, &mut curves);
    Ok((scores, curves))
}

fn per_unitary<T, F>(pool: &ThreadPool, d_range: &[usize], count: usize, f: F) -> Result<Vec<(usize, Vec<T>)>>
where
    T: Send,
    F: Fn(usize, u64) -> qkl_core::Result<T> + Sync,
{
    if count == 0 {
        return Err(QklError::Validation("need at least one unitary".into()));
    }
    let jobs: Vec<(usize, u64)> = d_range
        .iter()
        .flat_map(|&d| (0..count as u64).map(move |u| (d, u)))
        .collect();
    let results = pool.install(|| jobs.par_iter().map(|&(d, u)| f(d, u)).collect::<qkl_core::Result<Vec<T>>>())?;
    let mut results = results.into_iter();
    Ok(d_range
        .iter()
        .map(|&d| (d, results.by_ref().take(count).collect()))
        .collect())
}

pub fn concentration(pool: &ThreadPool, d_range: &[usize], unitaries: usize, master_seed: u64) -> Result<Vec<ConcentrationRow>> {
    Ok(per_unitary(pool, d_range, unitaries, |d, u| experiments::concentration_sample(d, u, master_seed))?
        .into_iter()
        .map(|(d, samples)| experiments::summarize_concentration(d, &samples))
        .collect())
}

pub fn shot_cost(pool: &ThreadPool, d_range: &[usize], unitaries: usize, master_seed: u64) -> Result<Vec<ShotCostRow>> {
    Ok(per_unitary(pool, d_range, unitaries, |d, u| experiments::shot_cost_sample(d, u, master_seed))?
        .into_iter()
        .map(|(d, samples)| experiments::summarize_shot_cost(d, &samples))
        .collect())
}
