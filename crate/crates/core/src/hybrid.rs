//! Two-stage GA→PSO search.
//!
//! Stage 1 runs the GA over the whole mixed space. The winner's integer and
//! categorical assignments are then frozen and stage 2 runs the swarm over
//! the continuous dimensions only, starting from the stage-1 winner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{GaConfig, GaState};
use crate::optimizer::{minimize, AskTell};
use crate::pso::{PsoConfig, PsoState};
use crate::search_space::{Configuration, Genotype, SearchSpace};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridConfig {
    /// Stage-1 settings. `generations` is recomputed from the budget.
    pub ga: GaConfig,
    /// Stage-2 settings. `iterations` is recomputed from the budget.
    pub pso: PsoConfig,
    /// Total objective evaluations over both stages.
    pub budget: usize,
    /// Share of `budget` given to stage 1.
    pub budget_split: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            ga: GaConfig::default(),
            pso: PsoConfig::default(),
            budget: 1500,
            budget_split: 0.5,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget_split > 0.0 && self.budget_split < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "hybrid budget_split must be in (0, 1), got {}",
                self.budget_split
            )));
        }
        self.ga.validate()?;
        self.pso.validate()?;
        if self.stage1_generations() == 0 {
            return Err(Error::InvalidConfig(format!(
                "hybrid budget {} leaves less than one GA generation of {}",
                self.budget, self.ga.population
            )));
        }
        Ok(())
    }

    fn stage1_generations(&self) -> usize {
        let stage1 = (self.budget as f64 * self.budget_split).floor() as usize;
        stage1 / self.ga.population
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridResult {
    pub stage1_best: (Configuration, f64),
    pub final_best: (Configuration, f64),
    /// Objective evaluations spent in stage 1 and stage 2.
    pub evaluations_used: [usize; 2],
    pub stage2_skipped: bool,
}

/// Runs both stages against a batch objective (values minimized, `+inf`
/// for failures).
pub fn hybrid_run<F>(
    space: &SearchSpace,
    mut objective: F,
    cfg: &HybridConfig,
    seed: u64,
) -> Result<HybridResult>
where
    F: FnMut(&[Configuration]) -> Vec<f64>,
{
    cfg.validate()?;

    let ga_cfg = GaConfig {
        generations: cfg.stage1_generations(),
        ..cfg.ga.clone()
    };
    let mut ga = GaState::new(space.clone(), ga_cfg, derive_seed(seed, &[1]))?;
    let stage1 = minimize(&mut ga, &mut objective)?;
    if !stage1.best_value.is_finite() {
        return Err(Error::OptimizationFailed("every stage-1 evaluation failed".into()));
    }
    let stage1_best = (stage1.best.clone(), stage1.best_value);

    let continuous: Vec<usize> = (0..space.len())
        .filter(|&i| space.dims()[i].is_continuous())
        .collect();
    let remaining = cfg.budget - stage1.evaluations;
    let iterations = remaining / cfg.pso.swarm_size;
    if continuous.is_empty() || iterations == 0 {
        return Ok(HybridResult {
            final_best: stage1_best.clone(),
            stage1_best,
            evaluations_used: [stage1.evaluations, 0],
            stage2_skipped: true,
        });
    }

    let mut frozen = stage1.best.clone();
    frozen
        .assignments
        .retain(|name, _| continuous.iter().all(|&i| space.dims()[i].name != *name));
    let subspace = space.project(|d| d.is_continuous());
    let incumbent = Genotype(
        continuous
            .iter()
            .map(|&i| stage1.best_genotype.values()[i])
            .collect(),
    );
    let pso_cfg = PsoConfig {
        iterations,
        ..cfg.pso.clone()
    };
    let mut pso = PsoState::with_incumbent(
        subspace,
        pso_cfg,
        derive_seed(seed, &[2]),
        incumbent,
        stage1.best_value,
    )?;

    let mut stage2_evals = 0;
    let mut any_finite = false;
    while !pso.is_finished() {
        let batch = pso.ask()?;
        let configs = batch
            .iter()
            .map(|g| Ok(frozen.clone().merged(&pso.space().decode(g)?)))
            .collect::<Result<Vec<_>>>()?;
        for c in &configs {
            for (name, value) in &frozen.assignments {
                assert_eq!(c.get(name), Some(value), "stage 2 altered frozen dim {name}");
            }
        }
        let values = objective(&configs);
        stage2_evals += values.len();
        any_finite |= values.iter().any(|v| v.is_finite());
        pso.tell(&values)?;
    }
    if !any_finite {
        return Err(Error::OptimizationFailed("every stage-2 evaluation failed".into()));
    }
    let (cont_best, value) = pso.best()?;
    let final_best = (frozen.merged(&cont_best), value);
    Ok(HybridResult {
        stage1_best,
        final_best,
        evaluations_used: [stage1.evaluations, stage2_evals],
        stage2_skipped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::pointwise;
    use crate::search_space::{ParamSpec, Scale, Value};

    fn mixed_space() -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::continuous("c", 0.0, 1.0, Scale::Linear),
            ParamSpec::categorical("k", (0..4).map(Value::Int).collect()),
        ])
        .unwrap()
    }

    fn separable(cfg: &Configuration) -> f64 {
        let c = cfg.get_f64("c").unwrap();
        let k = cfg.get_i64("k").unwrap();
        (c - 0.3).powi(2) + if k == 2 { 0.0 } else { 1.0 }
    }

    #[test]
    fn discrete_only_space_skips_stage_two() {
        let space = SearchSpace::new(vec![
            ParamSpec::categorical("k", (0..4).map(Value::Int).collect()),
            ParamSpec::integer("n", 1, 5),
        ])
        .unwrap();
        let res = hybrid_run(
            &space,
            pointwise(|c| (c.get_i64("k").unwrap() + c.get_i64("n").unwrap()) as f64),
            &HybridConfig::default(),
            1,
        )
        .unwrap();
        assert!(res.stage2_skipped);
        assert_eq!(res.final_best, res.stage1_best);
        assert_eq!(res.evaluations_used[1], 0);
    }

    #[test]
    fn respects_budget_and_improves_on_stage_one() {
        for seed in 0..5 {
            let cfg = HybridConfig::default();
            let mut evals = 0;
            let res = hybrid_run(
                &mixed_space(),
                |batch: &[Configuration]| {
                    evals += batch.len();
                    batch.iter().map(separable).collect()
                },
                &cfg,
                seed,
            )
            .unwrap();
            assert!(res.final_best.1 <= res.stage1_best.1);
            assert_eq!(evals, res.evaluations_used.iter().sum::<usize>());
            assert!(evals <= cfg.budget);
            assert_eq!(res.evaluations_used[0], 750);
            assert!(750 - res.evaluations_used[1] < cfg.pso.swarm_size);
            assert_eq!(res.final_best.0.get("k"), res.stage1_best.0.get("k"));
        }
    }

    #[test]
    fn all_failed_stage_is_an_error() {
        let res = hybrid_run(
            &mixed_space(),
            pointwise(|_| f64::INFINITY),
            &HybridConfig::default(),
            0,
        );
        assert!(matches!(res, Err(Error::OptimizationFailed(_))));
    }

    #[test]
    fn invalid_split_rejected() {
        let cfg = HybridConfig { budget_split: 1.0, ..Default::default() };
        assert!(hybrid_run(&mixed_space(), pointwise(separable), &cfg, 0).is_err());
        let cfg = HybridConfig { budget: 20, ..Default::default() };
        assert!(hybrid_run(&mixed_space(), pointwise(separable), &cfg, 0).is_err());
    }
}
