use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Example, Result};

/// Index assignment over the victim's train and test pools.
///
/// `known_train` is the slice of the victim's training data the attacker
/// holds (surrogate training data and MIA-training positives);
/// `known_out` are the MIA-training negatives. `hidden_train` and
/// `hidden_out` are the disjoint MIA-evaluation positives and negatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub victim_train_size: usize,
    pub victim_test_size: usize,
    pub known_ratio: f64,
    pub seed: u64,
    pub known_train: Vec<usize>,
    pub hidden_train: Vec<usize>,
    pub known_out: Vec<usize>,
    pub hidden_out: Vec<usize>,
}

impl SplitPlan {
    /// Number of known training examples, `|D_in*|`.
    pub fn known_size(&self) -> usize {
        self.known_train.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Plans the known/hidden split.
///
/// The attacker knows `round(known_ratio × victim_train_size)` training
/// examples; the same number of test examples are drawn as MIA-training
/// negatives, and evaluation sets of the same size are drawn from what is
/// left of each pool.
pub fn plan_splits(
    victim_train_size: usize,
    victim_test_size: usize,
    known_ratio: f64,
    seed: u64,
) -> Result<SplitPlan> {
    if !(known_ratio > 0.0 && known_ratio < 1.0) {
        return Err(CorpusError::RatioOutOfRange(known_ratio));
    }
    let k = round_half_up(known_ratio * victim_train_size as f64);
    if k == 0 || 2 * k > victim_train_size {
        return Err(CorpusError::PoolTooSmall {
            pool: "train",
            available: victim_train_size,
            needed: k.max(1),
        });
    }
    if 2 * k > victim_test_size {
        return Err(CorpusError::PoolTooSmall {
            pool: "test",
            available: victim_test_size,
            needed: k,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let mut known = idx[..k].to_vec();
        let mut hidden = idx[k..2 * k].to_vec();
        known.sort_unstable();
        hidden.sort_unstable();
        (known, hidden)
    };
    let (known_train, hidden_train) = draw(victim_train_size);
    let (known_out, hidden_out) = draw(victim_test_size);

    Ok(SplitPlan {
        victim_train_size,
        victim_test_size,
        known_ratio,
        seed,
        known_train,
        hidden_train,
        known_out,
        hidden_out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub example: Example,
    pub member: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    /// `D_in`, the victim's full training set.
    pub victim_train: Vec<Example>,
    /// `D_in*`, the attacker's known slice.
    pub surrogate_train: Vec<Example>,
    pub mia_train: Vec<LabeledExample>,
    pub mia_eval: Vec<LabeledExample>,
}

impl DatasetBundle {
    /// Every example id used by either MIA set.
    pub fn membership_ids(&self) -> HashSet<&str> {
        self.mia_train
            .iter()
            .chain(&self.mia_eval)
            .map(|l| l.example.id.as_str())
            .collect()
    }
}

/// Applies `plan` to concrete train/test example lists.
pub fn materialize(plan: &SplitPlan, train: &[Example], test: &[Example]) -> Result<DatasetBundle> {
    if train.len() != plan.victim_train_size {
        return Err(CorpusError::SizeMismatch {
            which: "train",
            expected: plan.victim_train_size,
            actual: train.len(),
        });
    }
    if test.len() != plan.victim_test_size {
        return Err(CorpusError::SizeMismatch {
            which: "test",
            expected: plan.victim_test_size,
            actual: test.len(),
        });
    }
    let pick = |pool: &[Example], idx: &[usize], member: bool| -> Vec<LabeledExample> {
        idx.iter()
            .map(|&i| LabeledExample {
                example: pool[i].clone(),
                member,
            })
            .collect()
    };
    let mut mia_train = pick(train, &plan.known_train, true);
    mia_train.extend(pick(test, &plan.known_out, false));
    let mut mia_eval = pick(train, &plan.hidden_train, true);
    mia_eval.extend(pick(test, &plan.hidden_out, false));

    Ok(DatasetBundle {
        victim_train: train.to_vec(),
        surrogate_train: plan.known_train.iter().map(|&i| train[i].clone()).collect(),
        mia_train,
        mia_eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenSeq;
    use proptest::prelude::*;

    fn examples(prefix: &str, n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| Example {
                id: format!("{prefix}{i}"),
                input: TokenSeq::from_strs(&["x"]),
                truth: TokenSeq::from_strs(&["y"]),
            })
            .collect()
    }

    fn disjoint(a: &[usize], b: &[usize]) -> bool {
        let a: HashSet<_> = a.iter().collect();
        b.iter().all(|x| !a.contains(x))
    }

    #[test]
    fn table_sizes() {
        let p = plan_splits(12_934, 8_268, 0.10, 7).unwrap();
        assert_eq!(p.known_size(), 1293);
        assert_eq!(p.known_train.len() + p.known_out.len(), 2586);
        assert_eq!(p.hidden_train.len() + p.hidden_out.len(), 2586);
    }

    #[test]
    fn small_plan_disjoint() {
        let p = plan_splits(100, 100, 0.20, 1).unwrap();
        assert_eq!(p.known_size(), 20);
        assert!(disjoint(&p.known_train, &p.hidden_train));
        assert!(disjoint(&p.known_out, &p.hidden_out));
        assert!(p
            .known_train
            .iter()
            .chain(&p.hidden_train)
            .all(|&i| i < 100));
    }

    #[test]
    fn deterministic() {
        let a = plan_splits(300, 200, 0.25, 42).unwrap();
        let b = plan_splits(300, 200, 0.25, 42).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = plan_splits(300, 200, 0.25, 43).unwrap();
        assert_ne!(a.known_train, c.known_train);
        assert_eq!(SplitPlan::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn ratio_bounds() {
        assert!(matches!(
            plan_splits(10, 10, 0.0, 0),
            Err(CorpusError::RatioOutOfRange(_))
        ));
        assert!(matches!(
            plan_splits(10, 10, 1.0, 0),
            Err(CorpusError::RatioOutOfRange(_))
        ));
        assert!(matches!(
            plan_splits(10, 10, f64::NAN, 0),
            Err(CorpusError::RatioOutOfRange(_))
        ));
    }

    #[test]
    fn test_pool_too_small() {
        assert!(matches!(
            plan_splits(100, 30, 0.2, 0),
            Err(CorpusError::PoolTooSmall { pool: "test", .. })
        ));
        assert!(matches!(
            plan_splits(10, 100, 0.6, 0),
            Err(CorpusError::PoolTooSmall { pool: "train", .. })
        ));
    }

    #[test]
    fn rounding_is_half_up() {
        // 0.25 × 10 = 2.5
        assert_eq!(plan_splits(10, 10, 0.25, 0).unwrap().known_size(), 3);
        assert_eq!(round_half_up(2.4999), 2);
    }

    #[test]
    fn materialize_small() {
        let train = examples("tr", 10);
        let test = examples("te", 10);
        let p = plan_splits(10, 10, 0.2, 3).unwrap();
        let b = materialize(&p, &train, &test).unwrap();
        assert_eq!(b.mia_train.iter().filter(|l| l.member).count(), 2);
        assert_eq!(b.mia_train.iter().filter(|l| !l.member).count(), 2);
        for l in &b.mia_train {
            let from_known = b.surrogate_train.iter().any(|e| e.id == l.example.id);
            assert_eq!(l.member, from_known);
        }
        let train_ids: HashSet<_> = b.mia_train.iter().map(|l| &l.example.id).collect();
        assert!(b
            .mia_eval
            .iter()
            .all(|l| !train_ids.contains(&l.example.id)));
        assert_eq!(b.victim_train.len(), 10);
    }

    #[test]
    fn materialize_size_mismatch() {
        let p = plan_splits(10, 10, 0.2, 3).unwrap();
        let r = materialize(&p, &examples("a", 9), &examples("b", 10));
        assert!(matches!(
            r,
            Err(CorpusError::SizeMismatch { which: "train", .. })
        ));
    }

    proptest! {
        #[test]
        fn plan_invariants(train in 4usize..400, test in 4usize..400, ratio in 0.01f64..0.5, seed in any::<u64>()) {
            let Ok(p) = plan_splits(train, test, ratio, seed) else { return Ok(()); };
            let k = round_half_up(ratio * train as f64);
            prop_assert_eq!(p.known_train.len(), k);
            prop_assert_eq!(p.known_out.len(), k);
            prop_assert_eq!(p.hidden_train.len(), k);
            prop_assert_eq!(p.hidden_out.len(), k);
            prop_assert!(disjoint(&p.known_train, &p.hidden_train));
            prop_assert!(disjoint(&p.known_out, &p.hidden_out));
            prop_assert!(p.known_train.iter().chain(&p.hidden_train).all(|&i| i < train));
            prop_assert!(p.known_out.iter().chain(&p.hidden_out).all(|&i| i < test));

            let b = materialize(&p, &examples("tr", train), &examples("te", test)).unwrap();
            prop_assert_eq!(b.mia_train.len(), 2 * k);
            for set in [&b.mia_train, &b.mia_eval] {
                let pos = set.iter().filter(|l| l.member).count();
                prop_assert_eq!(pos * 2, set.len());
            }
            let ids: HashSet<_> = b.mia_train.iter().map(|l| &l.example.id).collect();
            prop_assert!(b.mia_eval.iter().all(|l| !ids.contains(&l.example.id)));
        }
    }
}
