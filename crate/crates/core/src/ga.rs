//! Generational genetic algorithm with tournament selection.
//!
//! Works on the same unit-box genotypes as the swarm. Categorical genes are
//! resampled on mutation; every other gene gets Gaussian noise and is
//! clipped back into `[0, 1]`. [`feature_selection_space`] turns the GA into
//! a feature-subset selector.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{validate_told, AskTell};
use crate::search_space::{Configuration, Genotype, ParamSpec, SearchSpace, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Probability that an offspring gets exactly one gene mutated.
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    /// Standard deviation of the additive noise on non-categorical genes.
    pub mutation_sigma: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 25,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            tournament_size: 3,
            elitism: 1,
            mutation_sigma: 0.1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("ga {m}")));
        if self.population < 2 {
            return bad("population must be >= 2".into());
        }
        if self.generations < 1 {
            return bad("generations must be >= 1".into());
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.tournament_size < 1 || self.tournament_size > self.population {
            return bad(format!(
                "tournament_size must be in [1, {}], got {}",
                self.population, self.tournament_size
            ));
        }
        if self.elitism > self.population {
            return bad(format!("elitism {} exceeds population", self.elitism));
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma >= 0.0) {
            return bad("mutation_sigma must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaState {
    space: SearchSpace,
    cfg: GaConfig,
    population: Vec<Genotype>,
    values: Vec<Option<f64>>,
    generation: usize,
    best_ever: Option<(Genotype, f64)>,
    pending: bool,
    rng: ChaCha8Rng,
}

impl GaState {
    pub fn new(space: SearchSpace, cfg: GaConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            space,
            population: Vec::new(),
            values: Vec::new(),
            generation: 0,
            best_ever: None,
            pending: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
        })
    }

    pub fn config(&self) -> &GaConfig {
        &self.cfg
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn population(&self) -> &[Genotype] {
        &self.population
    }

    /// Indices ordered best first; ties go to the lower index.
    fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.population.len()).collect();
        idx.sort_by(|&a, &b| {
            let va = self.values[a].unwrap_or(f64::INFINITY);
            let vb = self.values[b].unwrap_or(f64::INFINITY);
            va.total_cmp(&vb).then(a.cmp(&b))
        });
        idx
    }

    fn tournament(&mut self, rank_of: &[usize]) -> usize {
        let n = self.population.len();
        sample_indices(&mut self.rng, n, self.cfg.tournament_size)
            .into_iter()
            .min_by_key(|&i| rank_of[i])
            .expect("tournament size >= 1")
    }

    fn mutate(&mut self, g: &mut Genotype) {
        let j = self.rng.random_range(0..g.len());
        if self.space.dims()[j].is_categorical() {
            g.0[j] = self.rng.random();
        } else {
            let noise = Normal::new(0.0, self.cfg.mutation_sigma)
                .expect("sigma validated")
                .sample(&mut self.rng);
            g.0[j] = (g.0[j] + noise).clamp(0.0, 1.0);
        }
    }

    fn next_generation(&mut self) -> Vec<Genotype> {
        let n = self.population.len();
        let ranking = self.ranking();
        let mut rank_of = vec![0; n];
        for (r, &i) in ranking.iter().enumerate() {
            rank_of[i] = r;
        }
        let mut elites: Vec<usize> = ranking[..self.cfg.elitism].to_vec();
        elites.sort_unstable();
        let mut next: Vec<Genotype> = elites.iter().map(|&i| self.population[i].clone()).collect();
        while next.len() < n {
            let a = self.tournament(&rank_of);
            let b = self.tournament(&rank_of);
            let mut child = if self.rng.random::<f64>() < self.cfg.crossover_rate {
                let (pa, pb) = (&self.population[a], &self.population[b]);
                let genes = (0..pa.len())
                    .map(|k| if self.rng.random::<bool>() { pa.0[k] } else { pb.0[k] })
                    .collect();
                Genotype(genes)
            } else {
                self.population[a].clone()
            };
            if !child.is_empty() && self.rng.random::<f64>() < self.cfg.mutation_rate {
                self.mutate(&mut child);
            }
            next.push(child);
        }
        next
    }
}

impl AskTell for GaState {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn ask(&mut self) -> Result<Vec<Genotype>> {
        if self.pending {
            return Err(Error::Protocol("ga: ask called before the previous generation was told".into()));
        }
        self.population = if self.generation == 0 {
            (0..self.cfg.population)
                .map(|_| self.space.sample(&mut self.rng))
                .collect()
        } else {
            self.next_generation()
        };
        self.values = vec![None; self.population.len()];
        self.pending = true;
        Ok(self.population.clone())
    }

    fn tell(&mut self, values: &[f64]) -> Result<()> {
        if !self.pending {
            return Err(Error::Protocol("ga: tell without a pending ask".into()));
        }
        validate_told(values, self.population.len())?;
        for (i, &v) in values.iter().enumerate() {
            self.values[i] = Some(v);
            let improves = match &self.best_ever {
                None => true,
                Some((_, best)) => v < *best,
            };
            if improves {
                self.best_ever = Some((self.population[i].clone(), v));
            }
        }
        self.pending = false;
        self.generation += 1;
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.generation >= self.cfg.generations
    }

    fn best_genotype(&self) -> Result<(Genotype, f64)> {
        self.best_ever
            .clone()
            .ok_or_else(|| Error::NoResult("ga: no values told yet".into()))
    }
}

const OFF: &str = "off";
const ON: &str = "on";

/// One binary categorical dim per feature, named `f0`, `f1`, ...
pub fn feature_selection_space(n_features: usize) -> Result<SearchSpace> {
    if n_features == 0 {
        return Err(Error::InvalidSpace("feature selection needs at least one feature".into()));
    }
    SearchSpace::new(
        (0..n_features)
            .map(|i| {
                ParamSpec::categorical(
                    &format!("f{i}"),
                    vec![Value::Text(OFF.into()), Value::Text(ON.into())],
                )
            })
            .collect(),
    )
}

/// Which input features a model may use.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMask {
    pub bits: Vec<bool>,
}

impl FeatureMask {
    pub fn all(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    /// Reads a mask from a configuration decoded from
    /// [`feature_selection_space`]; bit order follows the space.
    pub fn from_configuration(space: &SearchSpace, cfg: &Configuration) -> Result<Self> {
        let bits = space
            .dims()
            .iter()
            .map(|d| match cfg.get(&d.name).and_then(Value::as_str) {
                Some(ON) => Ok(true),
                Some(OFF) => Ok(false),
                _ => Err(Error::InvalidInput(format!("{} is not an on/off assignment", d.name))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Selected share of features, in `[0, 1]`.
    pub fn fraction(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.bits.len() as f64
        }
    }

    pub fn selected(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }

    /// A mask used as model input must keep at least one feature.
    pub fn validate(&self) -> Result<()> {
        if self.count() == 0 {
            return Err(Error::InvalidInput("feature mask selects no features".into()));
        }
        Ok(())
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|b| if *b { '1' } else { '0' }).collect()
    }
}
