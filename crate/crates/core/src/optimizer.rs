//! Shared ask/tell protocol and a sequential driver.

use crate::error::{Error, Result};
use crate::search_space::{Configuration, Genotype, SearchSpace};

/// Population optimizer driven from outside: the caller asks for a batch,
/// evaluates it (possibly in parallel) and tells the values back in order.
pub trait AskTell {
    fn space(&self) -> &SearchSpace;

    fn ask(&mut self) -> Result<Vec<Genotype>>;

    /// Values are minimized. `+inf` marks a failed evaluation.
    fn tell(&mut self, values: &[f64]) -> Result<()>;

    /// True once the configured number of generations has been told.
    fn is_finished(&self) -> bool;

    /// Best genotype and value observed so far.
    fn best_genotype(&self) -> Result<(Genotype, f64)>;

    fn best(&self) -> Result<(Configuration, f64)> {
        let (g, v) = self.best_genotype()?;
        Ok((self.space().decode(&g)?, v))
    }
}

/// Checks a told batch: length must match and only `+inf` is accepted as a
/// non-finite value.
pub(crate) fn validate_told(values: &[f64], expected: usize) -> Result<()> {
    if values.len() != expected {
        return Err(Error::Protocol(format!(
            "told {} values for a batch of {expected}",
            values.len()
        )));
    }
    for (index, &value) in values.iter().enumerate() {
        if value.is_nan() || value == f64::NEG_INFINITY {
            return Err(Error::NonFinite { index, value });
        }
    }
    Ok(())
}

/// Summary of a [`minimize`] run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best: Configuration,
    pub best_genotype: Genotype,
    pub best_value: f64,
    pub evaluations: usize,
    /// Best value after each told generation.
    pub history: Vec<f64>,
}

/// Runs `opt` to completion with a batch objective.
///
/// `objective` receives decoded configurations and must return one value per
/// configuration in the same order.
pub fn minimize<O, F>(opt: &mut O, mut objective: F) -> Result<RunOutcome>
where
    O: AskTell + ?Sized,
    F: FnMut(&[Configuration]) -> Vec<f64>,
{
    let mut evaluations = 0;
    let mut history = Vec::new();
    while !opt.is_finished() {
        let batch = opt.ask()?;
        let configs = batch
            .iter()
            .map(|g| opt.space().decode(g))
            .collect::<Result<Vec<_>>>()?;
        let values = objective(&configs);
        evaluations += values.len();
        opt.tell(&values)?;
        history.push(opt.best_genotype()?.1);
    }
    let (best_genotype, best_value) = opt.best_genotype()?;
    Ok(RunOutcome {
        best: opt.space().decode(&best_genotype)?,
        best_genotype,
        best_value,
        evaluations,
        history,
    })
}

/// Applies a scalar function to each configuration.
pub fn pointwise<F>(mut f: F) -> impl FnMut(&[Configuration]) -> Vec<f64>
where
    F: FnMut(&Configuration) -> f64,
{
    move |batch| batch.iter().map(&mut f).collect()
}
