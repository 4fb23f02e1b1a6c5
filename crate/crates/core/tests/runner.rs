use std::path::Path;
use std::time::Instant;

use swarmtune::dataset::{DataSource, SynthSpec};
use swarmtune::error::Error;
use swarmtune::ga::GaConfig;
use swarmtune::objective::{BenchmarkKind, TrainerConfig};
use swarmtune::pso::PsoConfig;
use swarmtune::runner::{
    read_trials, report_compare, run_tune, BenchmarkSettings, CacheSettings, CheckpointPolicy, CvSettings,
    ExperimentConfig, OptimizerChoice, Phase, RunSummary,
};
use swarmtune::search_space::{ParamSpec, Scale, SearchSpace, Value};

fn small_space() -> SearchSpace {
    SearchSpace::new(vec![
        ParamSpec::continuous("learning_rate", 1e-4, 1e-2, Scale::Log10),
        ParamSpec::categorical("hidden_units", vec![Value::Int(8), Value::Int(16)]),
        ParamSpec::integer("num_layers", 1, 2),
    ])
    .unwrap()
}

fn base(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        optimizer: OptimizerChoice::Pso,
        master_seed: 4,
        repeats: 2,
        output_dir: out.to_path_buf(),
        data: Some(DataSource::Synthetic(SynthSpec {
            n_subjects: 12,
            windows_per_subject: 8,
            n_features: 6,
            n_informative: 2,
            class_sep: 1.5,
            seed: 1,
            ..SynthSpec::default()
        })),
        space: Some(small_space()),
        cv: CvSettings { k: 3, ..CvSettings::default() },
        trainer: TrainerConfig { epochs: 4, hidden_units: 16, num_layers: 1, ..TrainerConfig::default() },
        pso: PsoConfig { swarm_size: 4, iterations: 2, ..PsoConfig::default() },
        ga: GaConfig { population: 4, generations: 2, ..GaConfig::default() },
        ..ExperimentConfig::default()
    }
}

#[test]
fn warm_cache_replays_the_run() {
    let root = tempfile::tempdir().unwrap();
    let cache = root.path().join("cache");
    let mut cfg = base(&root.path().join("cold"));
    cfg.trainer.epochs = 30;
    cfg.cache = CacheSettings { dir: Some(cache), ..CacheSettings::default() };

    let t = Instant::now();
    let cold = run_tune(&cfg).unwrap();
    let cold_time = t.elapsed();

    let warm_cfg = ExperimentConfig { output_dir: root.path().join("warm"), ..cfg.clone() };
    let t = Instant::now();
    let warm = run_tune(&warm_cfg).unwrap();
    let warm_time = t.elapsed();

    let trials = read_trials(&warm_cfg.output_dir.join("trials.jsonl")).unwrap();
    assert!(!trials.is_empty());
    assert!(trials.iter().all(|r| r.cache_hit), "every warm trial should be a cache hit");
    assert_eq!(warm.search_epochs, 0);
    assert_eq!(
        RunSummary { search_epochs: 0, ..cold.clone() },
        warm,
        "warm run must reproduce the cold summary apart from trained epochs"
    );
    assert!(
        cold_time >= warm_time * 10,
        "warm run {warm_time:?} not 10x faster than cold {cold_time:?}"
    );
}

#[test]
fn trial_log_accounts_for_every_training() {
    let root = tempfile::tempdir().unwrap();
    for opt in [OptimizerChoice::Pso, OptimizerChoice::Ga, OptimizerChoice::Hybrid, OptimizerChoice::Fixed] {
        let mut cfg = base(&root.path().join(opt.name()));
        cfg.optimizer = opt;
        cfg.hybrid.budget = 8;
        cfg.hybrid.ga.population = 4;
        cfg.hybrid.pso.swarm_size = 4;
        let s = run_tune(&cfg).unwrap();
        let trials = read_trials(&cfg.output_dir.join("trials.jsonl")).unwrap();
        let search = trials.iter().filter(|r| r.phase == Phase::Search).count();
        let fin = trials.iter().filter(|r| r.phase == Phase::Final).count();
        assert_eq!(search, s.evaluations * s.folds, "{}", opt.name());
        assert_eq!(fin, cfg.repeats * s.folds, "{}", opt.name());
        assert_eq!(s.search_trials as usize, search);
        assert_eq!(s.final_trials as usize, fin);
        let ids: Vec<u64> = trials.iter().map(|r| r.trial_id).collect();
        assert_eq!(ids, (0..trials.len() as u64).collect::<Vec<_>>());
        assert!(trials.iter().all(|r| r.error.is_some() || r.metrics.is_some()));
        assert!(s.best_value.is_finite());
    }
}

#[test]
fn self_comparison_is_degenerate() {
    let root = tempfile::tempdir().unwrap();
    let cfg = base(&root.path().join("a"));
    run_tune(&cfg).unwrap();
    let r = report_compare(&cfg.output_dir, &cfg.output_dir).unwrap();
    assert_eq!(r.f1_pairs.len(), cfg.repeats * cfg.cv.k);
    let w = r.wilcoxon.result.as_ref().expect("wilcoxon result");
    assert!(w.degenerate);
    assert_eq!(w.p_value, 1.0);
    assert!(r.paired_t.result.is_none());
    assert!(r.paired_t.note.is_some());
    assert!(r.to_table().contains("F1"));
}

#[test]
fn different_plans_are_incomparable() {
    let root = tempfile::tempdir().unwrap();
    let a = base(&root.path().join("a"));
    let mut b = base(&root.path().join("b"));
    b.cv.seed = 99;
    run_tune(&a).unwrap();
    run_tune(&b).unwrap();
    assert!(matches!(
        report_compare(&a.output_dir, &b.output_dir),
        Err(Error::IncomparableRuns(_))
    ));
}

#[test]
fn seed_only_differences_are_rarely_significant() {
    let root = tempfile::tempdir().unwrap();
    let mut significant = 0;
    for i in 0..20u64 {
        let mut a = base(&root.path().join(format!("a{i}")));
        a.optimizer = OptimizerChoice::Fixed;
        a.repeats = 3;
        a.cache.enabled = false;
        a.master_seed = 1000 + 2 * i;
        let b = ExperimentConfig {
            output_dir: root.path().join(format!("b{i}")),
            master_seed: 1001 + 2 * i,
            ..a.clone()
        };
        run_tune(&a).unwrap();
        run_tune(&b).unwrap();
        let r = report_compare(&a.output_dir, &b.output_dir).unwrap();
        if r.wilcoxon.result.is_some_and(|w| w.p_value < 0.05) {
            significant += 1;
        }
    }
    assert!(significant <= 4, "{significant}/20 seed-only comparisons significant");
}

#[test]
fn benchmark_run_converges() {
    let root = tempfile::tempdir().unwrap();
    for (opt, tol) in [(OptimizerChoice::Pso, 1e-3), (OptimizerChoice::Ga, 0.5), (OptimizerChoice::Hybrid, 1e-3)] {
        let cfg = ExperimentConfig {
            optimizer: opt,
            output_dir: root.path().join(opt.name()),
            benchmark: Some(BenchmarkSettings { function: BenchmarkKind::Sphere, dims: 3 }),
            ..ExperimentConfig::default()
        };
        let s = run_tune(&cfg).unwrap();
        assert!(s.best_value < tol, "{}: {}", opt.name(), s.best_value);
        assert!(s.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.final_results.is_empty());
        assert!(s.plan_hash.is_none());
    }
}

#[test]
fn halving_resumes_from_checkpoints() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = base(&root.path().join("resume"));
    cfg.optimizer = OptimizerChoice::Sh;
    cfg.multifidelity.n_candidates = 9;
    cfg.multifidelity.max_budget = 9;
    assert!(cfg.stores_checkpoints());
    let resumed = run_tune(&cfg).unwrap();

    let mut fresh_cfg = cfg.clone();
    fresh_cfg.output_dir = root.path().join("fresh");
    fresh_cfg.cache.checkpoints = CheckpointPolicy::Never;
    let fresh = run_tune(&fresh_cfg).unwrap();

    assert!(resumed.search_epochs < fresh.search_epochs);
    assert_eq!(resumed.best_value, fresh.best_value);
    assert_eq!(resumed.best_config, fresh.best_config);
    assert_eq!(resumed.final_results, fresh.final_results);
}
