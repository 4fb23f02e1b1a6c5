use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvKind {
    #[default]
    Kfold,
    Loso,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_subjects: BTreeSet<String>,
    pub test_subjects: BTreeSet<String>,
}

/// Assignment of whole subjects to test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: Vec<Fold>,
    pub k: usize,
    pub kind: CvKind,
}

impl CvPlan {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plan serializes");
        hex_digest(&json)
    }

    /// Row indices `(train, test)` for one fold, given each row's subject.
    /// Rows whose subject is in neither set are dropped.
    pub fn row_split(&self, fold: usize, subject_ids: &[String]) -> (Vec<usize>, Vec<usize>) {
        let f = &self.folds[fold];
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, s) in subject_ids.iter().enumerate() {
            if f.test_subjects.contains(s) {
                test.push(i);
            } else if f.train_subjects.contains(s) {
                train.push(i);
            }
        }
        (train, test)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds a subject-wise plan.
///
/// `subjects` pairs each subject id with its subject-level label. For
/// `kfold`, subjects are shuffled and dealt round-robin into `k` test folds;
/// with `stratified`, positives are dealt first and negatives continue from
/// the next fold, which keeps both per-fold positive counts and fold sizes
/// within one of each other. `loso` ignores `k` and `stratified`.
pub fn make_cv_plan(
    subjects: &[(String, bool)],
    k: usize,
    kind: CvKind,
    stratified: bool,
    seed: u64,
) -> Result<CvPlan> {
    let mut seen = HashSet::new();
    for (id, _) in subjects {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidPlan(format!("duplicate subject id {id}")));
        }
    }
    let mut sorted: Vec<(String, bool)> = subjects.to_vec();
    sorted.sort();
    let n = sorted.len();

    let assignment: Vec<Vec<String>> = match kind {
        CvKind::Loso => {
            if n < 2 {
                return Err(Error::InvalidPlan("LOSO needs at least 2 subjects".into()));
            }
            sorted.iter().map(|(id, _)| vec![id.clone()]).collect()
        }
        CvKind::Kfold => {
            if k < 2 {
                return Err(Error::InvalidPlan(format!("k must be >= 2, got {k}")));
            }
            if k > n {
                return Err(Error::InvalidPlan(format!("k = {k} exceeds {n} subjects")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut folds = vec![Vec::new(); k];
            let mut deal = |ids: Vec<String>, start: usize| {
                let mut next = start;
                for id in ids {
                    folds[next % k].push(id);
                    next += 1;
                }
                next
            };
            if stratified {
                let mut pos: Vec<String> = sorted.iter().filter(|s| s.1).map(|s| s.0.clone()).collect();
                let mut neg: Vec<String> = sorted.iter().filter(|s| !s.1).map(|s| s.0.clone()).collect();
                pos.shuffle(&mut rng);
                neg.shuffle(&mut rng);
                let next = deal(pos, 0);
                deal(neg, next);
            } else {
                let mut ids: Vec<String> = sorted.iter().map(|s| s.0.clone()).collect();
                ids.shuffle(&mut rng);
                deal(ids, 0);
            }
            folds
        }
    };

    let universe: BTreeSet<String> = sorted.iter().map(|s| s.0.clone()).collect();
    let folds = assignment
        .into_iter()
        .map(|test| {
            let test_subjects: BTreeSet<String> = test.into_iter().collect();
            let train_subjects = universe.difference(&test_subjects).cloned().collect();
            Fold {
                train_subjects,
                test_subjects,
            }
        })
        .collect::<Vec<_>>();
    Ok(CvPlan {
        k: folds.len(),
        folds,
        kind,
    })
}

/// Subject-level labels by majority vote over rows (ties count as positive).
pub fn subject_labels(subject_ids: &[String], labels: &[bool]) -> Vec<(String, bool)> {
    let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
    for (s, &y) in subject_ids.iter().zip(labels) {
        let e = tally.entry(s.as_str()).or_default();
        if y {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let mut out: Vec<(String, bool)> = tally
        .into_iter()
        .map(|(s, (p, n))| (s.to_string(), p >= n))
        .collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subjects(n: usize, n_pos: usize) -> Vec<(String, bool)> {
        (0..n).map(|i| (format!("s{i:02}"), i < n_pos)).collect()
    }

    fn check_partition(plan: &CvPlan, subs: &[(String, bool)]) {
        let universe: BTreeSet<String> = subs.iter().map(|s| s.0.clone()).collect();
        let mut seen = BTreeSet::new();
        for f in &plan.folds {
            assert!(f.train_subjects.is_disjoint(&f.test_subjects));
            let all: BTreeSet<String> = f.train_subjects.union(&f.test_subjects).cloned().collect();
            assert_eq!(all, universe);
            for s in &f.test_subjects {
                assert!(seen.insert(s.clone()), "{s} tested twice");
            }
        }
        assert_eq!(seen, universe);
    }

    #[test]
    fn six_subjects_three_folds() {
        let subs = subjects(6, 3);
        let plan = make_cv_plan(&subs, 3, CvKind::Kfold, false, 1).unwrap();
        assert_eq!(plan.folds.len(), 3);
        assert!(plan.folds.iter().all(|f| f.test_subjects.len() == 2));
        check_partition(&plan, &subs);
    }

    #[test]
    fn stratified_ten_subjects() {
        let subs = subjects(10, 4);
        for seed in 0..20 {
            let plan = make_cv_plan(&subs, 5, CvKind::Kfold, true, seed).unwrap();
            check_partition(&plan, &subs);
            let pos: Vec<usize> = plan
                .folds
                .iter()
                .map(|f| f.test_subjects.iter().filter(|s| subs.iter().any(|(id, y)| id == *s && *y)).count())
                .collect();
            assert!(plan.folds.iter().all(|f| f.test_subjects.len() == 2));
            assert!(pos.iter().all(|&p| p <= 1));
            assert_eq!(pos.iter().sum::<usize>(), 4);
        }
    }

    #[test]
    fn loso_singletons() {
        let subs = subjects(7, 2);
        let plan = make_cv_plan(&subs, 0, CvKind::Loso, false, 0).unwrap();
        assert_eq!(plan.folds.len(), 7);
        assert!(plan.folds.iter().all(|f| f.test_subjects.len() == 1));
        check_partition(&plan, &subs);
    }

    #[test]
    fn invalid_plans() {
        let subs = subjects(3, 1);
        assert!(matches!(make_cv_plan(&subs, 4, CvKind::Kfold, false, 0), Err(Error::InvalidPlan(_))));
        let dup = vec![("a".to_string(), true), ("a".to_string(), false)];
        assert!(make_cv_plan(&dup, 2, CvKind::Kfold, false, 0).is_err());
    }

    #[test]
    fn deterministic_and_order_independent() {
        let subs = subjects(12, 5);
        let mut rev = subs.clone();
        rev.reverse();
        let a = make_cv_plan(&subs, 4, CvKind::Kfold, true, 9).unwrap();
        let b = make_cv_plan(&rev, 4, CvKind::Kfold, true, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn row_split_follows_subjects() {
        let subs = subjects(4, 2);
        let plan = make_cv_plan(&subs, 2, CvKind::Kfold, false, 0).unwrap();
        let rows: Vec<String> = ["s00", "s01", "s02", "s03", "s00", "s02"].iter().map(|s| s.to_string()).collect();
        for f in 0..2 {
            let (tr, te) = plan.row_split(f, &rows);
            assert_eq!(tr.len() + te.len(), rows.len());
            for &i in &te {
                assert!(plan.folds[f].test_subjects.contains(&rows[i]));
            }
        }
    }

    #[test]
    fn majority_subject_labels() {
        let ids: Vec<String> = ["a", "a", "b", "b", "b"].iter().map(|s| s.to_string()).collect();
        let labels = [true, false, false, false, true];
        assert_eq!(
            subject_labels(&ids, &labels),
            vec![("a".to_string(), true), ("b".to_string(), false)]
        );
    }

    proptest! {
        #[test]
        fn plans_partition_subjects(n in 2usize..40, k in 2usize..8, frac in 0.0f64..1.0, strat in any::<bool>(), seed in any::<u64>()) {
            prop_assume!(k <= n);
            let subs = subjects(n, (n as f64 * frac) as usize);
            let plan = make_cv_plan(&subs, k, CvKind::Kfold, strat, seed).unwrap();
            check_partition(&plan, &subs);
            let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test_subjects.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
