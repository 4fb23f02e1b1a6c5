//! Synchronous global-best particle swarm over the unit box.
//!
//! A generation is asked as one batch and only updates the swarm once all of
//! its values have been told, so the trajectory does not depend on the order
//! in which evaluations finish.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{validate_told, AskTell};
use crate::search_space::{Genotype, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    /// Cognitive coefficient.
    pub c1: f64,
    /// Social coefficient.
    pub c2: f64,
    /// Inertia weight.
    pub w: f64,
    /// Per-dimension speed limit, as a fraction of the unit range.
    pub v_max: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 20,
            iterations: 30,
            c1: 1.5,
            c2: 1.5,
            w: 0.7,
            v_max: 0.5,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::InvalidConfig("pso swarm_size must be >= 2".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("pso iterations must be >= 1".into()));
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("w", self.w), ("v_max", self.v_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("pso {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_value: f64,
}

/// One velocity/position step for a single particle.
///
/// `v' = w v + c1 r1 (pbest - x) + c2 r2 (gbest - x)`, clamped to
/// `±v_max`; `x' = clip(x + v', 0, 1)`.
pub fn update_particle(
    position: &[f64],
    velocity: &[f64],
    pbest: &[f64],
    gbest: &[f64],
    r1: &[f64],
    r2: &[f64],
    cfg: &PsoConfig,
) -> (Vec<f64>, Vec<f64>) {
    let mut x_new = Vec::with_capacity(position.len());
    let mut v_new = Vec::with_capacity(position.len());
    for i in 0..position.len() {
        let x = position[i];
        let v = cfg.w * velocity[i]
            + cfg.c1 * r1[i] * (pbest[i] - x)
            + cfg.c2 * r2[i] * (gbest[i] - x);
        let v = v.clamp(-cfg.v_max, cfg.v_max);
        v_new.push(v);
        x_new.push((x + v).clamp(0.0, 1.0));
    }
    (x_new, v_new)
}

#[derive(Debug, Clone)]
pub struct PsoState {
    space: SearchSpace,
    cfg: PsoConfig,
    particles: Vec<Particle>,
    gbest_position: Vec<f64>,
    gbest_value: f64,
    iteration: usize,
    pending: bool,
    told_any: bool,
    rng: ChaCha8Rng,
}

impl PsoState {
    /// Fresh swarm with uniformly sampled positions and zero velocities.
    pub fn new(space: SearchSpace, cfg: PsoConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = space.len();
        let particles = (0..cfg.swarm_size)
            .map(|_| {
                let position = space.sample(&mut rng).0;
                Particle {
                    velocity: vec![0.0; dim],
                    best_position: position.clone(),
                    best_value: f64::INFINITY,
                    position,
                }
            })
            .collect::<Vec<_>>();
        let gbest_position = particles[0].position.clone();
        Ok(Self {
            space,
            cfg,
            particles,
            gbest_position,
            gbest_value: f64::INFINITY,
            iteration: 0,
            pending: false,
            told_any: false,
            rng,
        })
    }

    /// Swarm whose particle 0 starts at a known point with a known value.
    ///
    /// The incumbent is the initial personal and global best, so the swarm's
    /// best can never end up worse than `value`.
    pub fn with_incumbent(
        space: SearchSpace,
        cfg: PsoConfig,
        seed: u64,
        incumbent: Genotype,
        value: f64,
    ) -> Result<Self> {
        if incumbent.len() != space.len() {
            return Err(Error::EncodingViolation(format!(
                "incumbent has {} entries, space has {} dims",
                incumbent.len(),
                space.len()
            )));
        }
        let mut state = Self::new(space, cfg, seed)?;
        let pos = incumbent.clipped().0;
        let p0 = &mut state.particles[0];
        p0.position = pos.clone();
        p0.best_position = pos.clone();
        p0.best_value = value;
        state.gbest_position = pos;
        state.gbest_value = value;
        state.told_any = true;
        Ok(state)
    }

    pub fn config(&self) -> &PsoConfig {
        &self.cfg
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn gbest_value(&self) -> f64 {
        self.gbest_value
    }
}

impl AskTell for PsoState {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn ask(&mut self) -> Result<Vec<Genotype>> {
        if self.pending {
            return Err(Error::Protocol("pso: ask called twice without tell".into()));
        }
        if self.iteration > 0 {
            let dim = self.space.len();
            for p in &mut self.particles {
                let r1: Vec<f64> = (0..dim).map(|_| self.rng.random()).collect();
                let r2: Vec<f64> = (0..dim).map(|_| self.rng.random()).collect();
                let (x, v) = update_particle(
                    &p.position,
                    &p.velocity,
                    &p.best_position,
                    &self.gbest_position,
                    &r1,
                    &r2,
                    &self.cfg,
                );
                p.position = x;
                p.velocity = v;
            }
        }
        self.pending = true;
        Ok(self
            .particles
            .iter()
            .map(|p| Genotype(p.position.clone()))
            .collect())
    }

    fn tell(&mut self, values: &[f64]) -> Result<()> {
        if !self.pending {
            return Err(Error::Protocol("pso: tell without a pending ask".into()));
        }
        validate_told(values, self.particles.len())?;
        for (p, &value) in self.particles.iter_mut().zip(values) {
            if value < p.best_value {
                p.best_value = value;
                p.best_position = p.position.clone();
            }
        }
        for p in &self.particles {
            if p.best_value < self.gbest_value {
                self.gbest_value = p.best_value;
                self.gbest_position = p.best_position.clone();
            }
        }
        self.pending = false;
        self.told_any = true;
        self.iteration += 1;
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.iteration >= self.cfg.iterations
    }

    fn best_genotype(&self) -> Result<(Genotype, f64)> {
        if !self.told_any {
            return Err(Error::NoResult("pso: no values told yet".into()));
        }
        Ok((Genotype(self.gbest_position.clone()), self.gbest_value))
    }
}
