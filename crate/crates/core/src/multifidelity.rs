//! Successive halving and Hyperband.
//!
//! Budgets are training epochs. Candidates are ranked within a rung only;
//! values obtained at different budgets are never compared during
//! promotion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rung {
    pub budget: u32,
    /// Candidates kept after this rung.
    pub survivors: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalvingSchedule {
    pub n: usize,
    pub eta: u32,
    pub min_budget: u32,
    pub max_budget: u32,
    pub rungs: Vec<Rung>,
}

impl HalvingSchedule {
    /// Epochs spent if every rung trains its candidates from scratch.
    pub fn cold_cost(&self) -> u64 {
        let mut alive = self.n as u64;
        let mut cost = 0;
        for rung in &self.rungs {
            cost += alive * rung.budget as u64;
            alive = rung.survivors as u64;
        }
        cost
    }
}

/// Rung `r` trains at `min(min_budget * eta^r, max_budget)` epochs and keeps
/// `max(1, floor(n / eta^(r+1)))` candidates. The ladder stops once the
/// budget reaches `max_budget` or a single survivor remains.
pub fn sh_schedule(n: usize, eta: u32, min_budget: u32, max_budget: u32) -> Result<HalvingSchedule> {
    if n == 0 {
        return Err(Error::Schedule("need at least one candidate".into()));
    }
    if eta < 2 {
        return Err(Error::Schedule(format!("eta must be >= 2, got {eta}")));
    }
    if min_budget < 1 || max_budget < min_budget {
        return Err(Error::Schedule(format!(
            "budgets must satisfy 1 <= min ({min_budget}) <= max ({max_budget})"
        )));
    }
    let mut rungs = Vec::new();
    let mut scale: u64 = 1;
    loop {
        let budget = (min_budget as u64).saturating_mul(scale).min(max_budget as u64) as u32;
        scale = scale.saturating_mul(eta as u64);
        let survivors = ((n as u64 / scale) as usize).max(1);
        rungs.push(Rung { budget, survivors });
        if budget >= max_budget || survivors == 1 {
            break;
        }
    }
    Ok(HalvingSchedule {
        n,
        eta,
        min_budget,
        max_budget,
        rungs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: u64,
    pub config: Configuration,
}

/// What a budgeted objective reports for one candidate at one rung.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungEval {
    /// Minimized; `+inf` for a failed evaluation.
    pub value: f64,
    /// Epochs the reported value corresponds to.
    pub epochs: u32,
    /// Epochs actually trained for this call (lower when resumed).
    pub trained_epochs: u32,
}

impl RungEval {
    pub fn failed(epochs: u32) -> Self {
        Self {
            value: f64::INFINITY,
            epochs,
            trained_epochs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungResult {
    pub rung: usize,
    pub budget: u32,
    pub evaluated: Vec<(u64, f64)>,
    pub promoted: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShOutcome {
    pub winner: Candidate,
    pub winner_value: f64,
    pub trace: Vec<RungResult>,
    /// Sum of trained epochs over all calls.
    pub total_cost: u64,
}

/// Runs one successive-halving ladder.
///
/// `objective` is called once per rung with the surviving candidates and the
/// rung budget, and must return one [`RungEval`] per candidate in order.
pub fn sh_run<F>(candidates: &[Candidate], schedule: &HalvingSchedule, mut objective: F) -> Result<ShOutcome>
where
    F: FnMut(&[Candidate], u32) -> Vec<RungEval>,
{
    if candidates.is_empty() {
        return Err(Error::InvalidInput("successive halving needs candidates".into()));
    }
    if candidates.len() != schedule.n {
        return Err(Error::Schedule(format!(
            "schedule built for {} candidates, got {}",
            schedule.n,
            candidates.len()
        )));
    }
    let mut alive: Vec<Candidate> = candidates.to_vec();
    let mut trace = Vec::with_capacity(schedule.rungs.len());
    let mut total_cost = 0u64;
    let mut last_best: Option<(Candidate, f64)> = None;

    for (r, rung) in schedule.rungs.iter().enumerate() {
        let evals = objective(&alive, rung.budget);
        if evals.len() != alive.len() {
            return Err(Error::Protocol(format!(
                "objective returned {} results for {} candidates",
                evals.len(),
                alive.len()
            )));
        }
        for (c, e) in alive.iter().zip(&evals) {
            if e.epochs != rung.budget {
                return Err(Error::InvalidBudget(format!(
                    "candidate {} reported {} epochs at a rung of {}",
                    c.id, e.epochs, rung.budget
                )));
            }
            if e.value.is_nan() || e.value == f64::NEG_INFINITY {
                return Err(Error::NonFinite { index: c.id as usize, value: e.value });
            }
        }
        total_cost += evals.iter().map(|e| e.trained_epochs as u64).sum::<u64>();
        if evals.iter().all(|e| !e.value.is_finite()) {
            return Err(Error::OptimizationFailed(format!(
                "all {} candidates failed at rung {r}",
                alive.len()
            )));
        }

        let mut order: Vec<usize> = (0..alive.len()).collect();
        order.sort_by(|&a, &b| {
            evals[a]
                .value
                .total_cmp(&evals[b].value)
                .then(alive[a].id.cmp(&alive[b].id))
        });
        let keep = rung.survivors.min(alive.len());
        let promoted: Vec<Candidate> = order[..keep].iter().map(|&i| alive[i].clone()).collect();
        last_best = Some((alive[order[0]].clone(), evals[order[0]].value));
        trace.push(RungResult {
            rung: r,
            budget: rung.budget,
            evaluated: alive.iter().zip(&evals).map(|(c, e)| (c.id, e.value)).collect(),
            promoted: promoted.iter().map(|c| c.id).collect(),
        });
        alive = promoted;
    }

    let (winner, winner_value) = last_best.expect("schedule has at least one rung");
    Ok(ShOutcome {
        winner,
        winner_value,
        trace,
        total_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    pub s: u32,
    pub n: usize,
    pub min_budget: u32,
}

/// Bracket layout for a maximum budget: `s_max = floor(log_eta(max))` and,
/// for `s = s_max..=0`, `n = ceil((s_max+1) eta^s / (s+1))` candidates
/// starting at `max * eta^-s` epochs.
pub fn hyperband_brackets(max_budget: u32, eta: u32) -> Result<Vec<Bracket>> {
    if max_budget < 1 {
        return Err(Error::Schedule("max_budget must be >= 1".into()));
    }
    if eta < 2 {
        return Err(Error::Schedule(format!("eta must be >= 2, got {eta}")));
    }
    let mut s_max = 0u32;
    while (eta as u64).pow(s_max + 1) <= max_budget as u64 {
        s_max += 1;
    }
    Ok((0..=s_max)
        .rev()
        .map(|s| {
            let pow = (eta as u64).pow(s);
            let num = (s_max as u64 + 1) * pow;
            let den = s as u64 + 1;
            Bracket {
                s,
                n: num.div_ceil(den) as usize,
                min_budget: ((max_budget as u64 / pow) as u32).max(1),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbandOutcome {
    pub winner: Candidate,
    pub winner_value: f64,
    pub brackets: Vec<(Bracket, ShOutcome)>,
}

impl HyperbandOutcome {
    pub fn total_cost(&self) -> u64 {
        self.brackets.iter().map(|(_, o)| o.total_cost).sum()
    }
}

/// Hyperband over fresh candidates from `sampler`. Candidate ids are
/// assigned sequentially across brackets starting at 0.
pub fn hyperband_run<S, F>(mut sampler: S, mut objective: F, eta: u32, max_budget: u32) -> Result<HyperbandOutcome>
where
    S: FnMut() -> Configuration,
    F: FnMut(&[Candidate], u32) -> Vec<RungEval>,
{
    let mut next_id = 0u64;
    let mut brackets = Vec::new();
    let mut best: Option<(Candidate, f64)> = None;
    for bracket in hyperband_brackets(max_budget, eta)? {
        let candidates: Vec<Candidate> = (0..bracket.n)
            .map(|_| {
                let c = Candidate { id: next_id, config: sampler() };
                next_id += 1;
                c
            })
            .collect();
        let schedule = sh_schedule(bracket.n, eta, bracket.min_budget, max_budget)?;
        let outcome = sh_run(&candidates, &schedule, &mut objective)?;
        if best.as_ref().is_none_or(|(_, v)| outcome.winner_value < *v) {
            best = Some((outcome.winner.clone(), outcome.winner_value));
        }
        brackets.push((bracket, outcome));
    }
    let (winner, winner_value) = best.expect("at least one bracket");
    Ok(HyperbandOutcome {
        winner,
        winner_value,
        brackets,
    })
}
