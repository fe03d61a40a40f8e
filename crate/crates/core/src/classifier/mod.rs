//! One-versus-many linear concept classifiers over precomputed features.
//!
//! Each concept is learned independently: all items carrying the concept are
//! positives, and negatives are a seeded sample of `k × positives` items from
//! the other concepts (`k = max` uses every other item, i.e. one-versus-rest).
//! The ratio `k` is chosen per concept by stratified cross-validated F1.

mod metrics;
mod svm;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::concepts::Taxonomy;
use crate::error::{Error, Result};
use crate::sampling::mix;

pub use metrics::{
    aggregate_rates, binary_rates, confusion, f1_score, rates_table_csv, BinaryRates,
    ConfusionMatrix,
};
pub use svm::{train_svm, train_svm_traced, SvmProblem, TrainTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeature {
    pub id: u64,
    pub features: Vec<f32>,
    pub labels: BTreeSet<String>,
}

impl LabeledFeature {
    pub fn has(&self, concept: &str) -> bool {
        self.labels.contains(concept)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub concept: String,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn score(&self, x: &[f32]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), actual: x.len() });
        }
        Ok(self.weights.iter().zip(x).map(|(w, &v)| w * v as f64).sum::<f64>() + self.bias)
    }

    /// Positive iff the score is strictly above zero. Panics on a dimension mismatch.
    pub fn predict(&self, x: &[f32]) -> bool {
        self.score(x).expect("feature dimension matches the model") > 0.0
    }

    pub fn scaled(&self, factor: f64) -> LinearModel {
        LinearModel {
            concept: self.concept.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            bias: self.bias * factor,
        }
    }
}

/// Sigmoid mapping `1 / (1 + exp(a·s + b))` from raw scores to probabilities.
///
/// No fitting routine is provided; the parameters come from the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattScaling {
    pub a: f64,
    pub b: f64,
}

impl PlattScaling {
    pub fn probability(&self, score: f64) -> f64 {
        1.0 / (1.0 + (self.a * score + self.b).exp())
    }
}

/// Negatives per positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NegRatio {
    Times(u32),
    /// Every available negative (one-versus-rest).
    Max,
}

impl NegRatio {
    /// The grid searched by cross-validation, in tie-break order.
    pub const GRID: [NegRatio; 5] =
        [NegRatio::Times(2), NegRatio::Times(3), NegRatio::Times(5), NegRatio::Times(10), NegRatio::Max];
}

impl fmt::Display for NegRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegRatio::Times(k) => write!(f, "{k}"),
            NegRatio::Max => write!(f, "max"),
        }
    }
}

impl FromStr for NegRatio {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "max" => Ok(NegRatio::Max),
            other => match other.parse::<u32>() {
                Ok(k) if k > 0 => Ok(NegRatio::Times(k)),
                _ => Err(Error::invalid(format!("negative ratio must be a positive integer or `max`, got `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Loss weight against the regularizer.
    pub c: f64,
    pub neg_ratio: NegRatio,
    /// Maximum solver iterations.
    pub epochs: usize,
    /// Relative objective improvement below which training stops.
    pub tol: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig { c: 1.0, neg_ratio: NegRatio::Times(5), epochs: 50, tol: 1e-9, seed }
    }
}

/// Seeded uniform sample, without replacement, of pool items not carrying
/// `concept`. The sample size is `min(k·positives, available)`, where the
/// positives are the pool items carrying `concept`.
pub fn sample_negatives<'a>(
    concept: &str,
    pool: &'a [LabeledFeature],
    cfg: &TrainConfig,
) -> Result<Vec<&'a LabeledFeature>> {
    let positives = pool.iter().filter(|f| f.has(concept)).count();
    let available: Vec<&LabeledFeature> = pool.iter().filter(|f| !f.has(concept)).collect();
    if available.is_empty() {
        return Err(Error::invalid(format!("no negatives available for `{concept}`")));
    }
    let wanted = match cfg.neg_ratio {
        NegRatio::Max => available.len(),
        NegRatio::Times(k) => (k as usize).saturating_mul(positives).min(available.len()),
    };
    if wanted == available.len() {
        return Ok(available);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked: Vec<usize> = sample(&mut rng, available.len(), wanted).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| available[i]).collect())
}

/// One-versus-many training of a single concept over `pool`.
pub fn train_concept(concept: &str, pool: &[LabeledFeature], cfg: &TrainConfig) -> Result<LinearModel> {
    let positives: Vec<&[f32]> =
        pool.iter().filter(|f| f.has(concept)).map(|f| f.features.as_slice()).collect();
    if positives.is_empty() {
        return Err(Error::UnknownConcept(concept.to_string()));
    }
    let negatives: Vec<&[f32]> =
        sample_negatives(concept, pool, cfg)?.into_iter().map(|f| f.features.as_slice()).collect();
    train_svm(concept, &positives, &negatives, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub best: NegRatio,
    /// Mean F1 over folds, in grid order.
    pub per_ratio: Vec<(NegRatio, f64)>,
}

/// Picks the negative ratio with the best mean F1 over stratified folds.
/// Ties go to the earlier (smaller) ratio in `grid`.
pub fn select_k_by_cv(
    concept: &str,
    dataset: &[LabeledFeature],
    grid: &[NegRatio],
    folds: usize,
    cfg: &TrainConfig,
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::invalid("empty ratio grid"));
    }
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let mut pos: Vec<usize> = (0..dataset.len()).filter(|&i| dataset[i].has(concept)).collect();
    let mut neg: Vec<usize> = (0..dataset.len()).filter(|&i| !dataset[i].has(concept)).collect();
    if pos.len() < folds {
        return Err(Error::invalid(format!(
            "`{concept}` has {} positives, fewer than {folds} folds",
            pos.len()
        )));
    }
    if neg.len() < folds {
        return Err(Error::invalid(format!("`{concept}` has fewer negatives than folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold_of = vec![0usize; dataset.len()];
    for (rank, &i) in pos.iter().enumerate() {
        fold_of[i] = rank % folds;
    }
    for (rank, &i) in neg.iter().enumerate() {
        fold_of[i] = rank % folds;
    }

    let mut per_ratio = Vec::with_capacity(grid.len());
    for &ratio in grid {
        let mut f1_sum = 0.0;
        for fold in 0..folds {
            let train: Vec<LabeledFeature> =
                (0..dataset.len()).filter(|&i| fold_of[i] != fold).map(|i| dataset[i].clone()).collect();
            let fold_cfg = TrainConfig {
                neg_ratio: ratio,
                seed: mix(&[cfg.seed, fold as u64]),
                ..*cfg
            };
            let model = train_concept(concept, &train, &fold_cfg)?;
            let held: Vec<&LabeledFeature> =
                (0..dataset.len()).filter(|&i| fold_of[i] == fold).map(|i| &dataset[i]).collect();
            let truth: Vec<bool> = held.iter().map(|f| f.has(concept)).collect();
            let predicted = held
                .iter()
                .map(|f| model.score(&f.features).map(|s| s > 0.0))
                .collect::<Result<Vec<bool>>>()?;
            f1_sum += f1_score(&truth, &predicted);
        }
        per_ratio.push((ratio, f1_sum / folds as f64));
    }
    let mut best = per_ratio[0];
    for &entry in &per_ratio[1..] {
        if entry.1 > best.1 {
            best = entry;
        }
    }
    Ok(CvOutcome { best: best.0, per_ratio })
}

/// Best score over `target` and all of its descendants that have a score.
pub fn hyponym_score(target: &str, scores: &HashMap<String, f64>, taxonomy: &Taxonomy) -> Result<f64> {
    let members = taxonomy.descendants(target)?;
    members
        .iter()
        .filter_map(|name| scores.get(name.as_str()).copied())
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
        .ok_or_else(|| Error::invalid(format!("no scored concept under `{target}`")))
}

/// Single-label synthetic features: concept `i` sits on the basis direction
/// `e_(i mod dim)` scaled by `separation`, plus unit Gaussian noise. Ids run
/// from 0 in concept order.
pub fn synth_features(
    concepts: &[String],
    per_concept: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Vec<LabeledFeature>> {
    if dim == 0 || concepts.is_empty() {
        return Err(Error::invalid("synthetic features need dim > 0 and at least one concept"));
    }
    let distinct: BTreeSet<&String> = concepts.iter().collect();
    if distinct.len() != concepts.len() {
        return Err(Error::invalid("concept names must be distinct"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(concepts.len() * per_concept);
    for (ci, concept) in concepts.iter().enumerate() {
        for _ in 0..per_concept {
            let features = (0..dim)
                .map(|d| {
                    let centre = if d == ci % dim { separation } else { 0.0 };
                    (centre + noise.sample(&mut rng)) as f32
                })
                .collect();
            out.push(LabeledFeature {
                id: out.len() as u64,
                features,
                labels: [concept.clone()].into(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn item(id: u64, x: Vec<f32>, labels: &[&str]) -> LabeledFeature {
        LabeledFeature { id, features: x, labels: labels.iter().map(|s| s.to_string()).collect() }
    }

    fn pool(pos: usize, neg: usize) -> Vec<LabeledFeature> {
        let mut v = Vec::new();
        for i in 0..pos {
            v.push(item(i as u64, vec![1.0, (i % 7) as f32 * 0.1], &["gun"]));
        }
        for i in 0..neg {
            v.push(item((pos + i) as u64, vec![-1.0, (i % 7) as f32 * 0.1], &["car"]));
        }
        v
    }

    fn cfg(ratio: NegRatio) -> TrainConfig {
        TrainConfig { neg_ratio: ratio, ..TrainConfig::new(1) }
    }

    #[test]
    fn negative_counts() {
        let p = pool(10, 200);
        assert_eq!(sample_negatives("gun", &p, &cfg(NegRatio::Times(5))).unwrap().len(), 50);
        assert_eq!(sample_negatives("gun", &p, &cfg(NegRatio::Max)).unwrap().len(), 200);
        let small = pool(10, 30);
        assert_eq!(sample_negatives("gun", &small, &cfg(NegRatio::Times(5))).unwrap().len(), 30);
        assert!(sample_negatives("gun", &pool(3, 0), &cfg(NegRatio::Max)).is_err());
    }

    #[test]
    fn negatives_never_carry_concept_and_are_seeded() {
        let mut p = pool(10, 200);
        p[50].labels.insert("gun".into());
        let a = sample_negatives("gun", &p, &cfg(NegRatio::Times(3))).unwrap();
        assert!(a.iter().all(|f| !f.has("gun")));
        let b = sample_negatives("gun", &p, &cfg(NegRatio::Times(3))).unwrap();
        assert_eq!(a, b);
        let ids: BTreeSet<u64> = a.iter().map(|f| f.id).collect();
        assert_eq!(ids.len(), a.len());
    }

    #[test]
    fn neg_ratio_parsing() {
        assert_eq!("max".parse::<NegRatio>().unwrap(), NegRatio::Max);
        assert_eq!("5".parse::<NegRatio>().unwrap(), NegRatio::Times(5));
        assert!("0".parse::<NegRatio>().is_err());
        assert!("lots".parse::<NegRatio>().is_err());
    }

    #[test]
    fn scale_invariance() {
        let m = LinearModel { concept: "a".into(), weights: vec![0.3, -1.2], bias: 0.1 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = [rng.random_range(-3.0f32..3.0), rng.random_range(-3.0f32..3.0)];
            let c = rng.random_range(0.01..100.0);
            assert_eq!(m.predict(&x), m.scaled(c).predict(&x));
        }
    }

    #[test]
    fn cv_separable_all_perfect() {
        let p = pool(10, 100);
        let out = select_k_by_cv("gun", &p, &NegRatio::GRID, 5, &TrainConfig::new(7)).unwrap();
        assert!(out.per_ratio.iter().all(|&(_, f1)| f1 == 1.0), "{:?}", out.per_ratio);
        assert_eq!(out.best, NegRatio::Times(2));
    }

    #[test]
    fn cv_needs_enough_positives() {
        let p = pool(3, 100);
        assert!(select_k_by_cv("gun", &p, &NegRatio::GRID, 5, &TrainConfig::new(7)).is_err());
    }

    #[test]
    fn cv_imbalanced_prefers_finite_ratio() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut finite = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut data = Vec::new();
            for i in 0..5 {
                let x: Vec<f32> = (0..4).map(|d| (if d == 0 { 1.5 } else { 0.0 }) + normal.sample(&mut rng) as f32).collect();
                data.push(item(i, x, &["rare"]));
            }
            for i in 0..500 {
                let x: Vec<f32> = (0..4).map(|_| normal.sample(&mut rng) as f32).collect();
                data.push(item(5 + i, x, &["other"]));
            }
            let out = select_k_by_cv("rare", &data, &NegRatio::GRID, 5, &TrainConfig::new(seed)).unwrap();
            if out.best != NegRatio::Max {
                finite += 1;
            }
        }
        assert!(finite > 10, "finite ratio chosen in {finite}/20 seeds");
    }

    #[test]
    fn hyponym_examples() {
        let tax = Taxonomy::from_edges(&[
            ("weapon".into(), None),
            ("gun".into(), Some("weapon".into())),
            ("revolver".into(), Some("gun".into())),
            ("rifle".into(), Some("gun".into())),
        ])
        .unwrap();
        let scores: HashMap<String, f64> =
            [("gun", 0.5), ("revolver", 0.2), ("rifle", 0.9)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        assert_eq!(hyponym_score("rifle", &scores, &tax).unwrap(), 0.9);
        assert_eq!(hyponym_score("gun", &scores, &tax).unwrap(), 0.9);
        assert_eq!(hyponym_score("revolver", &scores, &tax).unwrap(), 0.2);
        assert!(hyponym_score("tank", &scores, &tax).is_err());

        let chain = Taxonomy::from_edges(&[
            ("a".into(), None),
            ("b".into(), Some("a".into())),
            ("c".into(), Some("b".into())),
        ])
        .unwrap();
        let scores: HashMap<String, f64> =
            [("a", 0.1), ("b", 0.3), ("c", 0.7)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        assert_eq!(hyponym_score("a", &scores, &chain).unwrap(), 0.7);
        assert!(hyponym_score("a", &HashMap::new(), &chain).is_err());
    }

    #[test]
    fn hyponym_monotone() {
        let tax = Taxonomy::from_edges(&[
            ("r".into(), None),
            ("x".into(), Some("r".into())),
            ("y".into(), Some("x".into())),
            ("z".into(), Some("r".into())),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let mut scores = HashMap::new();
            scores.insert("r".to_string(), rng.random::<f64>());
            let before = hyponym_score("r", &scores, &tax).unwrap();
            for name in ["x", "y", "z"] {
                scores.insert(name.to_string(), rng.random::<f64>());
                let after = hyponym_score("r", &scores, &tax).unwrap();
                assert!(after >= before);
            }
        }
    }

    #[test]
    fn confusion_fixtures() {
        let a = LinearModel { concept: "a".into(), weights: vec![1.0, 0.0], bias: 0.0 };
        let b = LinearModel { concept: "b".into(), weights: vec![0.0, 1.0], bias: 0.0 };
        let test = vec![
            item(0, vec![1.0, 0.0], &["a"]),
            item(1, vec![2.0, 0.0], &["a"]),
            item(2, vec![0.0, 3.0], &["b"]),
        ];
        let m = confusion(&[a.clone(), b], &test).unwrap();
        assert_eq!(m.counts, vec![vec![2, 0], vec![0, 1]]);
        assert_eq!(m.row_sum(0), 2);
        assert_eq!(m.to_csv(), "truth,a,b\na,2,0\nb,0,1\n");

        let single = confusion(std::slice::from_ref(&a), &test[..2]).unwrap();
        assert_eq!(single.counts, vec![vec![2]]);

        let multi = vec![item(9, vec![1.0, 0.0], &["a", "b"])];
        assert!(confusion(std::slice::from_ref(&a), &multi).is_err());
        assert!(matches!(confusion(&[a], &test[2..]), Err(Error::UnknownConcept(_))));
    }

    #[test]
    fn platt_is_a_probability() {
        let p = PlattScaling { a: -2.0, b: 0.0 };
        assert_eq!(p.probability(0.0), 0.5);
        assert!(p.probability(3.0) > 0.99);
    }

    #[test]
    fn train_concept_end_to_end() {
        let p = pool(10, 100);
        let m = train_concept("gun", &p, &TrainConfig::new(2)).unwrap();
        assert!(p.iter().all(|f| m.predict(&f.features) == f.has("gun")));
        assert!(matches!(train_concept("boat", &p, &TrainConfig::new(2)), Err(Error::UnknownConcept(_))));
    }
}
