use std::cell::RefCell;
use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cache::{CacheKey, CachedOutcome, CheckpointCache};
use super::config::{ExperimentConfig, OptimizerChoice};
use super::executor::Executor;
use super::log::{Phase, TrialLog, TrialRecord};
use crate::dataset::{smote, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, hex_digest, make_cv_plan, AggregateReport, CvPlan, MetricsReport};
use crate::ga::{feature_selection_space, FeatureMask, GaState};
use crate::hybrid::hybrid_run;
use crate::multifidelity::{hyperband_run, sh_run, sh_schedule, Candidate, RungEval};
use crate::objective::{benchmark, resume_and_score, BenchmarkKind, TrainerConfig};
use crate::optimizer::AskTell;
use crate::pso::PsoState;
use crate::search_space::{Configuration, Genotype, ParamSpec, Scale, SearchSpace, Value};
use crate::seed::derive_seed;

const FINAL_STREAM: u64 = u64::MAX;
const OPTIMIZER_STREAM: u64 = u64::MAX - 1;
const SMOTE_STREAM: u64 = u64::MAX - 2;

/// Scores of the winner in one (repeat, fold) cell of the final phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResult {
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub objective: Option<f64>,
    pub report: Option<MetricsReport>,
}

/// What `summary.json` holds. Contains no timings, so reruns and different
/// worker counts produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub optimizer: OptimizerChoice,
    pub master_seed: u64,
    pub dataset_hash: Option<String>,
    pub plan_hash: Option<String>,
    pub folds: usize,
    /// Objective evaluations requested by the optimizer.
    pub evaluations: usize,
    pub search_trials: u64,
    pub final_trials: u64,
    /// Sum of trained epochs in the search phase (cache hits count 0).
    pub search_epochs: u64,
    pub best_value: f64,
    pub best_config: Configuration,
    pub best_mask: Option<String>,
    /// Best value after each generation, rung or bracket.
    pub history: Vec<f64>,
    pub final_epochs: Option<u32>,
    pub final_results: Vec<FinalResult>,
    pub final_report: Option<AggregateReport>,
}

impl RunSummary {
    pub fn read(dir: &Path) -> Result<Self> {
        let bytes = fs::read(dir.join("summary.json"))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

struct DataContext {
    folds: Vec<(Dataset, Dataset)>,
    n_features: usize,
    dataset_hash: String,
    plan: CvPlan,
    /// Hash of every run-level input that affects training.
    base_hash: String,
}

struct Job {
    candidate: u64,
    repeat: Option<usize>,
    genotype: Option<Genotype>,
    config: Configuration,
    mask: Option<FeatureMask>,
    fold: Option<usize>,
    seed: u64,
    epochs: u32,
    trainer: std::result::Result<TrainerConfig, String>,
}

struct JobResult {
    outcome: Result<CachedOutcome>,
    cache_hit: bool,
    trained_epochs: u32,
    duration_ms: u64,
}

/// One candidate to score with all CV folds.
struct Item {
    candidate: u64,
    genotype: Option<Genotype>,
    config: Configuration,
    mask: Option<FeatureMask>,
    epochs: u32,
}

struct ItemValue {
    value: f64,
    trained_epochs: u32,
}

struct Coordinator<'a> {
    cfg: &'a ExperimentConfig,
    exec: Executor,
    cache: CheckpointCache,
    log: TrialLog,
    data: Option<DataContext>,
    bench: Option<BenchmarkKind>,
    store_checkpoints: bool,
    next_candidate: u64,
    evaluations: usize,
    search_epochs: u64,
    fatal: Option<Error>,
}

fn benchmark_space(dims: usize, kind: BenchmarkKind) -> SearchSpace {
    let (lo, hi) = kind.domain();
    SearchSpace::new(
        (0..dims)
            .map(|i| ParamSpec::continuous(&format!("x{i}"), lo, hi, Scale::Linear))
            .collect(),
    )
    .expect("distinct names")
}

fn benchmark_point(config: &Configuration, dims: usize) -> Result<Vec<f64>> {
    (0..dims)
        .map(|i| {
            config
                .get_f64(&format!("x{i}"))
                .ok_or_else(|| Error::InvalidInput(format!("missing x{i}")))
        })
        .collect()
}

/// The trainer fields a configuration resolves to, as a configuration.
fn trainer_assignments(t: &TrainerConfig) -> Configuration {
    let mut c = Configuration::default();
    c.insert("learning_rate", Value::Real(t.learning_rate));
    c.insert("batch_size", Value::Int(t.batch_size as i64));
    c.insert("dropout", Value::Real(t.dropout));
    c.insert("hidden_units", Value::Int(t.hidden_units as i64));
    c.insert("num_layers", Value::Int(t.num_layers as i64));
    c
}

impl DataContext {
    fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let source = cfg.data.as_ref().expect("validated");
        let data = source.load()?;
        let plan = make_cv_plan(&data.subjects(), cfg.cv.k, cfg.cv.kind, cfg.cv.stratified, cfg.cv.seed)?;
        let mut folds = Vec::with_capacity(plan.folds.len());
        for f in 0..plan.folds.len() {
            let (tr, te) = plan.row_split(f, &data.subject_ids);
            let mut train = data.select_rows(&tr);
            if cfg.smote.enabled {
                train = smote(
                    &train,
                    cfg.smote.k,
                    cfg.smote.target_ratio,
                    derive_seed(cfg.cv.seed, &[SMOTE_STREAM, f as u64]),
                )?;
            }
            folds.push((train, data.select_rows(&te)));
        }
        let dataset_hash = data.content_hash();
        let base = serde_json::json!({
            "dataset": dataset_hash,
            "plan": plan.hash(),
            "smote": cfg.smote,
            "objective": cfg.objective,
        });
        Ok(Self {
            folds,
            n_features: data.n_features(),
            dataset_hash,
            plan,
            base_hash: hex_digest(base.to_string().as_bytes()),
        })
    }

    fn config_hash(&self, trainer: &TrainerConfig, mask: Option<&FeatureMask>) -> String {
        let t = TrainerConfig {
            seed: 0,
            epochs: 0,
            ..trainer.clone()
        };
        let body = serde_json::json!({
            "base": self.base_hash,
            "trainer": t,
            "mask": mask.map(FeatureMask::to_bit_string),
        });
        hex_digest(body.to_string().as_bytes())
    }
}

impl<'a> Coordinator<'a> {
    fn run_job(&self, job: &Job) -> JobResult {
        let start = Instant::now();
        let (outcome, cache_hit, trained) = match self.bench {
            Some(kind) => {
                let dims = self.cfg.benchmark.as_ref().expect("benchmark").dims;
                let r = benchmark_point(&job.config, dims).map(|x| CachedOutcome {
                    objective: benchmark(kind, &x),
                    report: MetricsReport::from_counts(Default::default()),
                });
                (r, false, 0)
            }
            None => match &job.trainer {
                Err(e) => (Err(Error::InvalidConfig(e.clone())), false, 0),
                Ok(trainer) => self.train_job(job, trainer),
            },
        };
        JobResult {
            outcome,
            cache_hit,
            trained_epochs: trained,
            duration_ms: start.elapsed().as_millis() as u64,
        }
    }

    fn train_job(&self, job: &Job, trainer: &TrainerConfig) -> (Result<CachedOutcome>, bool, u32) {
        let ctx = self.data.as_ref().expect("data mode");
        let fold = job.fold.expect("fold");
        let trainer = TrainerConfig {
            seed: job.seed,
            epochs: job.epochs,
            ..trainer.clone()
        };
        let key = CacheKey {
            config_hash: ctx.config_hash(&trainer, job.mask.as_ref()),
            fold,
            seed: job.seed,
            epochs: job.epochs,
        };
        if let Some(hit) = self.cache.get(&key) {
            return (Ok(hit), true, 0);
        }
        let resume = if self.store_checkpoints {
            self.cache.latest_checkpoint_below(&key)
        } else {
            None
        };
        let already = resume.as_ref().map_or(0, |c| c.epochs);
        let (train, val) = &ctx.folds[fold];
        let result = resume_and_score(&trainer, train, val, job.mask.as_ref(), &self.cfg.objective, resume)
            .and_then(|out| {
                let cached = CachedOutcome {
                    objective: out.objective,
                    report: out.report,
                };
                self.cache
                    .put(&key, &cached, self.store_checkpoints.then_some(&out.checkpoint))?;
                Ok(cached)
            });
        (result, false, job.epochs - already)
    }

    fn fold_ids(&self) -> Vec<Option<usize>> {
        match &self.data {
            Some(ctx) => (0..ctx.folds.len()).map(Some).collect(),
            None => vec![None],
        }
    }

    fn resolve_trainer(&self, config: &Configuration) -> std::result::Result<TrainerConfig, String> {
        self.cfg.trainer.with_configuration(config).map_err(|e| e.to_string())
    }

    fn execute(&mut self, jobs: Vec<Job>, phase: Phase) -> Vec<JobResult> {
        let results = self.exec.map(&jobs, |job| Ok(self.run_job(job)));
        let results: Vec<JobResult> = results.into_iter().map(|r| r.expect("run_job is infallible")).collect();
        for (job, res) in jobs.into_iter().zip(&results) {
            let (metrics, objective, error) = match &res.outcome {
                Ok(o) => (
                    self.data.is_some().then(|| o.report.clone()),
                    Some(o.objective).filter(|v| v.is_finite()),
                    None,
                ),
                Err(e) => (None, None, Some(e.to_string())),
            };
            let record = TrialRecord {
                trial_id: 0,
                phase,
                candidate: job.candidate,
                repeat: job.repeat,
                genotype: job.genotype.map(|g| g.0),
                config: job.config,
                mask: job.mask.as_ref().map(FeatureMask::to_bit_string),
                fold: job.fold,
                seed: job.seed,
                budget: job.epochs,
                duration_ms: res.duration_ms,
                metrics,
                objective,
                cache_hit: res.cache_hit,
                error,
            };
            if let Err(e) = self.log.append(record) {
                self.fatal.get_or_insert(e);
            }
        }
        if let Err(e) = self.log.flush() {
            self.fatal.get_or_insert(e);
        }
        results
    }

    /// Scores candidates in the search phase: the unweighted mean of the
    /// per-fold objectives, `+inf` if any fold fails.
    fn evaluate(&mut self, items: Vec<Item>) -> Vec<ItemValue> {
        let folds = self.fold_ids();
        let mut jobs = Vec::with_capacity(items.len() * folds.len());
        for item in &items {
            let trainer = self.resolve_trainer(&item.config);
            for &fold in &folds {
                jobs.push(Job {
                    candidate: item.candidate,
                    repeat: None,
                    genotype: item.genotype.clone(),
                    config: item.config.clone(),
                    mask: item.mask.clone(),
                    fold,
                    seed: derive_seed(self.cfg.master_seed, &[item.candidate, fold.unwrap_or(0) as u64]),
                    epochs: item.epochs,
                    trainer: trainer.clone(),
                });
            }
        }
        self.evaluations += items.len();
        let results = self.execute(jobs, Phase::Search);
        results
            .chunks(folds.len())
            .map(|chunk| {
                let trained: u32 = chunk.iter().map(|r| r.trained_epochs).sum();
                self.search_epochs += trained as u64;
                let mut sum = 0.0;
                for r in chunk {
                    match &r.outcome {
                        Ok(o) if o.objective.is_finite() => sum += o.objective,
                        _ => return ItemValue { value: f64::INFINITY, trained_epochs: trained },
                    }
                }
                ItemValue {
                    value: sum / chunk.len() as f64,
                    trained_epochs: trained,
                }
            })
            .collect()
    }

    fn new_candidate(&mut self) -> u64 {
        let c = self.next_candidate;
        self.next_candidate += 1;
        c
    }

    fn item(&mut self, genotype: Option<Genotype>, config: Configuration, mask: Option<FeatureMask>) -> Item {
        Item {
            candidate: self.new_candidate(),
            genotype,
            config,
            mask,
            epochs: self.cfg.trainer.epochs,
        }
    }

    /// Drives an ask/tell optimizer. With `masks`, configurations are
    /// feature masks and the trainer keeps its configured settings.
    fn run_ask_tell(&mut self, opt: &mut dyn AskTell, masks: bool) -> Result<Search> {
        let mut history = Vec::new();
        while !opt.is_finished() {
            let batch = opt.ask()?;
            let mut items = Vec::with_capacity(batch.len());
            for g in batch {
                let config = opt.space().decode(&g)?;
                let mask = if masks {
                    Some(FeatureMask::from_configuration(opt.space(), &config)?)
                } else {
                    None
                };
                items.push(self.item(Some(g), config, mask));
            }
            let values: Vec<f64> = self.evaluate(items).into_iter().map(|v| v.value).collect();
            opt.tell(&values)?;
            history.push(opt.best_genotype()?.1);
        }
        let (config, value) = opt.best()?;
        let mask = if masks {
            Some(FeatureMask::from_configuration(opt.space(), &config)?)
        } else {
            None
        };
        Ok(Search {
            config,
            mask,
            value,
            history,
            final_epochs: self.cfg.trainer.epochs,
        })
    }

    fn budgeted(&mut self, genotypes: &RefCell<HashMap<u64, Genotype>>, cands: &[Candidate], budget: u32) -> Vec<RungEval> {
        let items: Vec<Item> = cands
            .iter()
            .map(|c| Item {
                candidate: c.id,
                genotype: genotypes.borrow().get(&c.id).cloned(),
                config: c.config.clone(),
                mask: None,
                epochs: budget,
            })
            .collect();
        self.evaluate(items)
            .into_iter()
            .map(|v| RungEval {
                value: v.value,
                epochs: budget,
                trained_epochs: v.trained_epochs,
            })
            .collect()
    }

    fn search(&mut self) -> Result<Search> {
        let cfg = self.cfg;
        let space = match &cfg.benchmark {
            Some(b) => benchmark_space(b.dims, b.function),
            None => cfg.search_space(),
        };
        let opt_seed = derive_seed(cfg.master_seed, &[OPTIMIZER_STREAM]);
        match cfg.optimizer {
            OptimizerChoice::Pso => {
                let mut opt = PsoState::new(space, cfg.pso.clone(), opt_seed)?;
                self.run_ask_tell(&mut opt, false)
            }
            OptimizerChoice::Ga => {
                let mut opt = GaState::new(space, cfg.ga.clone(), opt_seed)?;
                self.run_ask_tell(&mut opt, false)
            }
            OptimizerChoice::FeatureSelect => {
                let n = self.data.as_ref().expect("data mode").n_features;
                let mut opt = GaState::new(feature_selection_space(n)?, cfg.ga.clone(), opt_seed)?;
                self.run_ask_tell(&mut opt, true)
            }
            OptimizerChoice::Hybrid => {
                let res = hybrid_run(
                    &space,
                    |configs: &[Configuration]| {
                        let items = configs.iter().map(|c| self.item(None, c.clone(), None)).collect();
                        self.evaluate(items).into_iter().map(|v| v.value).collect()
                    },
                    &cfg.hybrid,
                    opt_seed,
                )?;
                Ok(Search {
                    config: res.final_best.0,
                    mask: None,
                    value: res.final_best.1,
                    history: vec![res.stage1_best.1, res.final_best.1],
                    final_epochs: cfg.trainer.epochs,
                })
            }
            OptimizerChoice::Fixed => {
                let config = trainer_assignments(&cfg.trainer);
                let item = self.item(None, config.clone(), None);
                let value = self.evaluate(vec![item])[0].value;
                Ok(Search {
                    config,
                    mask: None,
                    value,
                    history: vec![value],
                    final_epochs: cfg.trainer.epochs,
                })
            }
            OptimizerChoice::Sh | OptimizerChoice::Hyperband => {
                let mf = &cfg.multifidelity;
                let mut rng = ChaCha8Rng::seed_from_u64(opt_seed);
                let genotypes = RefCell::new(HashMap::new());
                let mut sample = |id: u64| -> Result<Configuration> {
                    let g = space.sample(&mut rng);
                    let c = space.decode(&g)?;
                    genotypes.borrow_mut().insert(id, g);
                    Ok(c)
                };
                let (winner, value, history, used) = if cfg.optimizer == OptimizerChoice::Sh {
                    let cands = (0..mf.n_candidates as u64)
                        .map(|id| Ok(Candidate { id, config: sample(id)? }))
                        .collect::<Result<Vec<_>>>()?;
                    let schedule = sh_schedule(cands.len(), mf.eta, mf.min_budget, mf.max_budget)?;
                    let out = sh_run(&cands, &schedule, |c: &[Candidate], b| self.budgeted(&genotypes, c, b))?;
                    let history = out
                        .trace
                        .iter()
                        .map(|r| r.evaluated.iter().map(|e| e.1).fold(f64::INFINITY, f64::min))
                        .collect();
                    (out.winner, out.winner_value, history, cands.len() as u64)
                } else {
                    let mut next = 0u64;
                    let out = hyperband_run(
                        || {
                            let c = sample(next).expect("sampled genotypes decode");
                            next += 1;
                            c
                        },
                        |c: &[Candidate], b| self.budgeted(&genotypes, c, b),
                        mf.eta,
                        mf.max_budget,
                    )?;
                    let history = out.brackets.iter().map(|(_, o)| o.winner_value).collect();
                    let used = out.brackets.iter().map(|(b, _)| b.n as u64).sum();
                    (out.winner, out.winner_value, history, used)
                };
                self.next_candidate = used;
                Ok(Search {
                    config: winner.config,
                    mask: None,
                    value,
                    history,
                    final_epochs: mf.max_budget,
                })
            }
        }
    }

    fn final_phase(&mut self, search: &Search) -> Vec<FinalResult> {
        let folds = self.fold_ids();
        let trainer = self.resolve_trainer(&search.config);
        let candidate = self.new_candidate();
        let mut jobs = Vec::new();
        for r in 0..self.cfg.repeats {
            for &fold in &folds {
                jobs.push(Job {
                    candidate,
                    repeat: Some(r),
                    genotype: None,
                    config: search.config.clone(),
                    mask: search.mask.clone(),
                    fold,
                    seed: derive_seed(self.cfg.master_seed, &[FINAL_STREAM, r as u64, fold.unwrap_or(0) as u64]),
                    epochs: search.final_epochs,
                    trainer: trainer.clone(),
                });
            }
        }
        let meta: Vec<(usize, usize, u64)> = jobs
            .iter()
            .map(|j| (j.repeat.unwrap_or(0), j.fold.unwrap_or(0), j.seed))
            .collect();
        let results = self.execute(jobs, Phase::Final);
        meta.into_iter()
            .zip(results)
            .map(|((repeat, fold, seed), r)| {
                let ok = r.outcome.ok();
                FinalResult {
                    repeat,
                    fold,
                    seed,
                    objective: ok.as_ref().map(|o| o.objective),
                    report: ok.map(|o| o.report),
                }
            })
            .collect()
    }
}

struct Search {
    config: Configuration,
    mask: Option<FeatureMask>,
    value: f64,
    history: Vec<f64>,
    final_epochs: u32,
}

/// Runs one experiment and writes `trials.jsonl`, `summary.json` and
/// `best_config.json` into the output directory.
pub fn run_tune(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let log = TrialLog::create(&cfg.output_dir.join("trials.jsonl"))?;
    let cache = match cfg.cache_dir() {
        Some(dir) if cfg.benchmark.is_none() => CheckpointCache::new(Some(dir))?,
        _ => CheckpointCache::disabled(),
    };
    let data = match cfg.benchmark {
        Some(_) => None,
        None => Some(DataContext::build(cfg)?),
    };
    let mut co = Coordinator {
        cfg,
        exec: Executor::new(cfg.workers)?,
        store_checkpoints: cfg.stores_checkpoints() && cache.is_enabled(),
        cache,
        log,
        data,
        bench: cfg.benchmark.as_ref().map(|b| b.function),
        next_candidate: 0,
        evaluations: 0,
        search_epochs: 0,
        fatal: None,
    };

    let search = co.search()?;
    if let Some(e) = co.fatal.take() {
        return Err(e);
    }
    if !search.value.is_finite() {
        return Err(Error::OptimizationFailed("every search evaluation failed".into()));
    }
    let search_trials = co.log.next_id();
    let (final_results, final_report, final_epochs) = if co.data.is_some() {
        let results = co.final_phase(&search);
        if let Some(e) = co.fatal.take() {
            return Err(e);
        }
        let reports: Vec<MetricsReport> = results.iter().filter_map(|r| r.report.clone()).collect();
        if reports.is_empty() {
            return Err(Error::OptimizationFailed("every final evaluation failed".into()));
        }
        (results, Some(aggregate(&reports)?), Some(search.final_epochs))
    } else {
        (Vec::new(), None, None)
    };

    let summary = RunSummary {
        optimizer: cfg.optimizer,
        master_seed: cfg.master_seed,
        dataset_hash: co.data.as_ref().map(|d| d.dataset_hash.clone()),
        plan_hash: co.data.as_ref().map(|d| d.plan.hash()),
        folds: co.data.as_ref().map_or(0, |d| d.folds.len()),
        evaluations: co.evaluations,
        search_trials,
        final_trials: co.log.next_id() - search_trials,
        search_epochs: co.search_epochs,
        best_value: search.value,
        best_config: search.config.clone(),
        best_mask: search.mask.as_ref().map(FeatureMask::to_bit_string),
        history: search.history.clone(),
        final_epochs,
        final_results,
        final_report,
    };
    fs::write(cfg.output_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    let best = serde_json::json!({
        "config": search.config,
        "mask": summary.best_mask,
        "trainer": co.data.as_ref().and_then(|_| cfg.trainer.with_configuration(&search.config).ok()),
        "value": search.value,
    });
    fs::write(cfg.output_dir.join("best_config.json"), serde_json::to_string_pretty(&best)?)?;
    Ok(summary)
}
