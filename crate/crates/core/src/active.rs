//! Annotate–train–select loop with a ground-truth oracle standing in for the
//! human annotator, and a per-action time model.
//!
//! The simulator labels whole items. Box counts only enter the cost through
//! `boxes_per_image`: drawing an item costs `draw_s × boxes_per_image`, and a
//! high-confidence item whose model prediction the oracle confirms costs
//! `accept_s × boxes_per_image`; a rejected one costs
//! `(delete_s + draw_s) × boxes_per_image`. Every retrain adds `train_s`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::{train_svm, LinearModel, TrainConfig};
use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::sampling::mix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub draw_s: f64,
    pub accept_s: f64,
    pub delete_s: f64,
    /// Not charged by the item-level simulator; kept for box-level callers.
    pub modify_s: f64,
    pub train_s: f64,
    pub boxes_per_image: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            draw_s: 3.6,
            accept_s: 1.0,
            delete_s: 1.0,
            modify_s: 3.0,
            train_s: 89.0,
            boxes_per_image: 1.3,
        }
    }
}

impl CostModel {
    pub fn zero() -> Self {
        CostModel { draw_s: 0.0, accept_s: 0.0, delete_s: 0.0, modify_s: 0.0, train_s: 0.0, boxes_per_image: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.draw_s, self.accept_s, self.delete_s, self.modify_s, self.train_s, self.boxes_per_image];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("cost parameters must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Random,
    Uncertainty,
    HighConfidence,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Random, Strategy::Uncertainty, Strategy::HighConfidence];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Uncertainty => "uncertainty",
            Strategy::HighConfidence => "high-confidence",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown strategy `{s}`")))
    }
}

/// Items with binary ground truth for one concept.
#[derive(Debug, Clone, PartialEq)]
pub struct AlDataset {
    ids: Vec<u64>,
    features: Vec<Vec<f32>>,
    labels: Vec<bool>,
    position: HashMap<u64, usize>,
}

impl AlDataset {
    pub fn new(items: Vec<(u64, Vec<f32>, bool)>) -> Result<Self> {
        let mut ds = AlDataset { ids: Vec::new(), features: Vec::new(), labels: Vec::new(), position: HashMap::new() };
        for (id, x, y) in items {
            if let Some(first) = ds.features.first() {
                if first.len() != x.len() {
                    return Err(Error::DimensionMismatch { expected: first.len(), actual: x.len() });
                }
            }
            if ds.position.insert(id, ds.ids.len()).is_some() {
                return Err(Error::Record { id: id.to_string(), message: "duplicate id".into() });
            }
            ds.ids.push(id);
            ds.features.push(x);
            ds.labels.push(y);
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn label(&self, id: u64) -> Option<bool> {
        self.position.get(&id).map(|&i| self.labels[i])
    }

    pub fn features(&self, id: u64) -> Option<&[f32]> {
        self.position.get(&id).map(|&i| self.features[i].as_slice())
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }
}

/// Two Gaussian classes: negatives around the origin, positives shifted by
/// `separation` along the first axis, unit variance. Ids start at `first_id`.
pub fn synth_pool(
    n: usize,
    positive_fraction: f64,
    dim: usize,
    separation: f64,
    seed: u64,
    first_id: u64,
) -> Result<AlDataset> {
    if dim == 0 || !(0.0..=1.0).contains(&positive_fraction) {
        return Err(Error::invalid("synthetic pool needs dim > 0 and a fraction in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n_pos = (n as f64 * positive_fraction).round() as usize;
    let mut labels: Vec<bool> = (0..n).map(|i| i < n_pos).collect();
    labels.shuffle(&mut rng);
    let items = labels
        .into_iter()
        .enumerate()
        .map(|(i, y)| {
            let x: Vec<f32> = (0..dim)
                .map(|d| {
                    let shift = if y && d == 0 { separation } else { 0.0 };
                    (shift + normal.sample(&mut rng)) as f32
                })
                .collect();
            (first_id + i as u64, x, y)
        })
        .collect();
    AlDataset::new(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub round: usize,
    pub labeled: usize,
    pub map: f64,
    pub elapsed_s: f64,
    /// Boxes charged so far (`boxes_per_image` per labeled item).
    pub boxes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlState {
    pub labeled: BTreeSet<u64>,
    pub pool: BTreeSet<u64>,
    pub model: Option<LinearModel>,
    pub elapsed_s: f64,
    pub history: Vec<HistoryEntry>,
}

impl AlState {
    /// Everything unlabeled, no model.
    pub fn new(dataset: &AlDataset) -> Self {
        AlState {
            labeled: BTreeSet::new(),
            pool: dataset.ids().iter().copied().collect(),
            model: None,
            elapsed_s: 0.0,
            history: Vec::new(),
        }
    }

    fn boxes(&self) -> f64 {
        self.history.last().map_or(0.0, |h| h.boxes)
    }
}

/// Picks `batch` pool items. Random is a seeded uniform draw; Uncertainty
/// takes the smallest `|score|`, HighConfidence the largest score, with ties
/// to the lower id. Returned ids are in selection order.
pub fn select_batch(
    state: &AlState,
    dataset: &AlDataset,
    strategy: Strategy,
    batch: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    if batch == 0 || batch > state.pool.len() {
        return Err(Error::invalid(format!(
            "batch of {batch} from a pool of {}",
            state.pool.len()
        )));
    }
    let pool: Vec<u64> = state.pool.iter().copied().collect();
    if strategy == Strategy::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(sample(&mut rng, pool.len(), batch).into_iter().map(|i| pool[i]).collect());
    }
    let model = state.model.as_ref().ok_or(Error::ModelRequired(strategy.name()))?;
    let mut scored = pool
        .iter()
        .map(|&id| {
            let x = dataset.features(id).ok_or_else(|| Error::UnknownConcept(id.to_string()))?;
            let s = model.score(x)?;
            Ok((id, if strategy == Strategy::Uncertainty { s.abs() } else { -s }))
        })
        .collect::<Result<Vec<(u64, f64)>>>()?;
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(batch).map(|(id, _)| id).collect())
}

/// Average precision of one ranked list: mean precision at each positive.
/// Items are `(id, score, is_positive)`; equal scores rank by ascending id.
pub fn average_precision(items: &[(u64, f64, bool)]) -> Result<f64> {
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, item) in sorted.iter().enumerate() {
        if item.2 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::invalid("average precision needs at least one positive"));
    }
    Ok(sum / hits as f64)
}

/// Mean over concepts of [`average_precision`].
pub fn mean_average_precision(rankings: &[Vec<(u64, f64, bool)>]) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::invalid("mAP over zero concepts"));
    }
    let mut total = 0.0;
    for r in rankings {
        total += average_precision(r)?;
    }
    Ok(total / rankings.len() as f64)
}

fn model_map(model: &LinearModel, test: &AlDataset) -> Result<f64> {
    let ranking = test
        .ids()
        .iter()
        .map(|&id| {
            let s = model.score(test.features(id).expect("own id"))?;
            Ok((id, s, test.label(id).expect("own id")))
        })
        .collect::<Result<Vec<_>>>()?;
    mean_average_precision(&[ranking])
}

fn retrain(labeled: &BTreeSet<u64>, dataset: &AlDataset, cfg: &TrainConfig) -> Result<LinearModel> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for &id in labeled {
        let x = dataset.features(id).expect("labeled ids come from the dataset");
        if dataset.label(id).expect("known id") {
            pos.push(x);
        } else {
            neg.push(x);
        }
    }
    train_svm("target", &pos, &neg, cfg)
}

/// One annotate–train round.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: AlState,
    dataset: &AlDataset,
    test: &AlDataset,
    strategy: Strategy,
    batch: usize,
    cost: &CostModel,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<AlState> {
    if state.pool.is_empty() {
        return Err(Error::invalid("the unlabeled pool is empty"));
    }
    cost.validate()?;
    let picked = select_batch(&state, dataset, strategy, batch, seed)?;
    let mut charge = 0.0;
    for &id in &picked {
        let truth = dataset.label(id).expect("pool ids come from the dataset");
        charge += match (strategy, &state.model) {
            (Strategy::HighConfidence, Some(model)) => {
                let predicted = model.score(dataset.features(id).expect("known id"))? > 0.0;
                if predicted == truth {
                    cost.accept_s
                } else {
                    cost.delete_s + cost.draw_s
                }
            }
            _ => cost.draw_s,
        } * cost.boxes_per_image;
    }
    let AlState { mut labeled, mut pool, elapsed_s, mut history, .. } = state;
    let boxes = history.last().map_or(0.0, |h| h.boxes) + picked.len() as f64 * cost.boxes_per_image;
    for id in &picked {
        pool.remove(id);
        labeled.insert(*id);
    }
    let model = retrain(&labeled, dataset, cfg)?;
    let elapsed_s = elapsed_s + charge + cost.train_s;
    let map = model_map(&model, test)?;
    history.push(HistoryEntry {
        round: history.last().map_or(0, |h| h.round + 1),
        labeled: labeled.len(),
        map,
        elapsed_s,
        boxes,
    });
    Ok(AlState { labeled, pool, model: Some(model), elapsed_s, history })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rounds: usize,
    pub seed_count: usize,
    pub batch: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(rounds: usize, batch: usize, seed: u64) -> Self {
        RunConfig { rounds, seed_count: 20, batch, seed }
    }
}

/// Seed round plus `rounds` steps.
///
/// The seed round labels `seed_count` random items at drawing cost. If they
/// hold only one class, further random items are drawn (and charged) one at a
/// time until both classes are present, since no model can be trained before.
pub fn run(
    dataset: &AlDataset,
    test: &AlDataset,
    strategy: Strategy,
    run_cfg: &RunConfig,
    cost: &CostModel,
    cfg: &TrainConfig,
) -> Result<AlState> {
    cost.validate()?;
    if run_cfg.seed_count == 0 || run_cfg.seed_count > dataset.len() {
        return Err(Error::invalid(format!(
            "seed round of {} items from a dataset of {}",
            run_cfg.seed_count,
            dataset.len()
        )));
    }
    let positives = dataset.positives();
    if positives == 0 || positives == dataset.len() {
        return Err(Error::invalid("the pool needs both positive and negative items"));
    }
    let mut order: Vec<u64> = dataset.ids().to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(&[run_cfg.seed, 0])));
    let mut state = AlState::new(dataset);
    let mut taken = 0;
    let has_both = |s: &AlState| {
        let pos = s.labeled.iter().filter(|&&id| dataset.label(id) == Some(true)).count();
        pos > 0 && pos < s.labeled.len()
    };
    while taken < run_cfg.seed_count || !has_both(&state) {
        let id = order[taken];
        state.pool.remove(&id);
        state.labeled.insert(id);
        taken += 1;
    }
    let model = retrain(&state.labeled, dataset, cfg)?;
    let boxes = taken as f64 * cost.boxes_per_image;
    state.elapsed_s += boxes * cost.draw_s + cost.train_s;
    state.history.push(HistoryEntry {
        round: 0,
        labeled: state.labeled.len(),
        map: model_map(&model, test)?,
        elapsed_s: state.elapsed_s,
        boxes,
    });
    state.model = Some(model);

    for round in 1..=run_cfg.rounds {
        if state.pool.is_empty() {
            break;
        }
        let batch = run_cfg.batch.min(state.pool.len());
        state = step(state, dataset, test, strategy, batch, cost, cfg, mix(&[run_cfg.seed, round as u64]))?;
    }
    debug_assert!(state.boxes() >= 0.0);
    Ok(state)
}

pub fn history_csv(history: &[HistoryEntry]) -> String {
    let mut s = String::from("round,labeled,map,elapsed_s\n");
    for h in history {
        s.push_str(&format!("{},{},{},{}\n", h.round, h.labeled, fmt_sig(h.map), fmt_sig(h.elapsed_s)));
    }
    s
}

/// First simulated time at which mAP reached `threshold`, if ever.
pub fn time_to_map(history: &[HistoryEntry], threshold: f64) -> Option<f64> {
    history.iter().find(|h| h.map >= threshold).map(|h| h.elapsed_s)
}

/// mAP of the last entry with at most `budget` labeled items.
pub fn map_at_budget(history: &[HistoryEntry], budget: usize) -> Option<f64> {
    history.iter().rfind(|h| h.labeled <= budget).map(|h| h.map)
}

/// Per-strategy averages over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub runs: usize,
    pub budget: usize,
    pub mean_map_at_budget: f64,
    pub map_threshold: f64,
    /// Mean seconds to reach the threshold; infinite if any run never did.
    pub mean_time_to_threshold_s: f64,
    pub runs_reaching_threshold: usize,
    pub mean_boxes_at_budget: f64,
}

pub fn summarize(
    strategy: Strategy,
    histories: &[Vec<HistoryEntry>],
    budget: usize,
    map_threshold: f64,
) -> Result<StrategySummary> {
    if histories.is_empty() {
        return Err(Error::invalid("no runs to summarize"));
    }
    let n = histories.len() as f64;
    let mut map_sum = 0.0;
    let mut boxes_sum = 0.0;
    let mut time_sum = 0.0;
    let mut reached = 0;
    for h in histories {
        let at = h
            .iter().rfind(|e| e.labeled <= budget)
            .ok_or_else(|| Error::invalid(format!("budget {budget} is below the seed round")))?;
        map_sum += at.map;
        boxes_sum += at.boxes;
        match time_to_map(h, map_threshold) {
            Some(t) => {
                time_sum += t;
                reached += 1;
            }
            None => time_sum = f64::INFINITY,
        }
    }
    Ok(StrategySummary {
        strategy,
        runs: histories.len(),
        budget,
        mean_map_at_budget: map_sum / n,
        map_threshold,
        mean_time_to_threshold_s: time_sum / n,
        runs_reaching_threshold: reached,
        mean_boxes_at_budget: boxes_sum / n,
    })
}

pub fn summary_csv(rows: &[StrategySummary]) -> String {
    let mut s = String::from(
        "strategy,runs,labeled_budget,map_at_budget,boxes_at_budget,map_threshold,time_at_threshold_s,runs_reaching_threshold\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.strategy,
            r.runs,
            r.budget,
            fmt_sig(r.mean_map_at_budget),
            fmt_sig(r.mean_boxes_at_budget),
            fmt_sig(r.map_threshold),
            fmt_sig(r.mean_time_to_threshold_s),
            r.runs_reaching_threshold
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::Strategy;
    use proptest::prelude::*;

    fn tiny() -> AlDataset {
        AlDataset::new(vec![
            (1, vec![0.9], true),
            (2, vec![0.1], false),
            (3, vec![-0.8], false),
        ])
        .unwrap()
    }

    fn identity_model() -> LinearModel {
        LinearModel { concept: "t".into(), weights: vec![1.0], bias: 0.0 }
    }

    #[test]
    fn selection_rules() {
        let ds = tiny();
        let mut st = AlState::new(&ds);
        assert!(matches!(
            select_batch(&st, &ds, Strategy::Uncertainty, 1, 0),
            Err(Error::ModelRequired(_))
        ));
        st.model = Some(identity_model());
        assert_eq!(select_batch(&st, &ds, Strategy::Uncertainty, 1, 0).unwrap(), vec![2]);
        assert_eq!(select_batch(&st, &ds, Strategy::HighConfidence, 1, 0).unwrap(), vec![1]);
        for s in Strategy::ALL {
            let mut all = select_batch(&st, &ds, s, 3, 5).unwrap();
            all.sort();
            assert_eq!(all, vec![1, 2, 3]);
        }
        assert!(select_batch(&st, &ds, Strategy::Random, 4, 0).is_err());
    }

    #[test]
    fn ap_examples() {
        let perfect = vec![(1, 0.9, true), (2, 0.5, false)];
        assert_eq!(average_precision(&perfect).unwrap(), 1.0);
        let ranks_1_3 = vec![(1, 0.9, true), (2, 0.8, false), (3, 0.7, true), (4, 0.6, false)];
        assert!((average_precision(&ranks_1_3).unwrap() - 0.8333).abs() < 1e-4);
        let last = vec![(1, 0.9, false), (2, 0.8, false), (3, 0.7, false), (4, 0.6, true)];
        assert_eq!(average_precision(&last).unwrap(), 0.25);
        assert!(average_precision(&[(1, 0.1, false)]).is_err());
        let tied = vec![(2, 0.5, false), (1, 0.5, true)];
        assert_eq!(average_precision(&tied).unwrap(), 1.0);
    }

    /// AP recomputed by counting, for every positive, the items ranked at or
    /// before it under the (score desc, id asc) order.
    fn brute_ap(items: &[(u64, f64, bool)]) -> f64 {
        let before = |a: &(u64, f64, bool), b: &(u64, f64, bool)| a.1 > b.1 || (a.1 == b.1 && a.0 <= b.0);
        let positives: Vec<_> = items.iter().filter(|i| i.2).collect();
        positives
            .iter()
            .map(|p| {
                let rank = items.iter().filter(|o| before(o, p)).count();
                let pos_at = positives.iter().filter(|o| before(o, p)).count();
                pos_at as f64 / rank as f64
            })
            .sum::<f64>()
            / positives.len() as f64
    }

    proptest! {
        #[test]
        fn ap_matches_brute_force(raw in prop::collection::vec((0u8..5, any::<bool>()), 1..30)) {
            let items: Vec<(u64, f64, bool)> =
                raw.iter().enumerate().map(|(i, &(s, y))| (i as u64, s as f64, y)).collect();
            prop_assume!(items.iter().any(|i| i.2));
            let ap = mean_average_precision(std::slice::from_ref(&items)).unwrap();
            prop_assert!((ap - brute_ap(&items)).abs() < 1e-12);
        }
    }

    fn fixture(seed: u64) -> (AlDataset, AlDataset) {
        let pool = synth_pool(200, 0.3, 4, 2.5, seed, 0).unwrap();
        let test = synth_pool(100, 0.3, 4, 2.5, seed + 1000, 10_000).unwrap();
        (pool, test)
    }

    #[test]
    fn zero_cost_step() {
        let (pool, test) = fixture(1);
        let cfg = TrainConfig::new(0);
        let st = run(&pool, &test, Strategy::Random, &RunConfig::new(0, 5, 1), &CostModel::zero(), &cfg).unwrap();
        let before = st.labeled.len();
        let st = step(st, &pool, &test, Strategy::Uncertainty, 7, &CostModel::zero(), &cfg, 3).unwrap();
        assert_eq!(st.elapsed_s, 0.0);
        assert_eq!(st.labeled.len(), before + 7);
        assert_eq!(st.labeled.len() + st.pool.len(), pool.len());
        assert!(st.labeled.is_disjoint(&st.pool));
    }

    #[test]
    fn confirmed_high_confidence_item_costs_accept() {
        let ds = tiny();
        let test = tiny();
        let mut st = AlState::new(&ds);
        for id in [2, 3] {
            st.pool.remove(&id);
            st.labeled.insert(id);
        }
        st.model = Some(identity_model());
        let cost = CostModel { accept_s: 1.0, ..CostModel::default() };
        let st = step(st, &ds, &test, Strategy::HighConfidence, 1, &cost, &TrainConfig::new(0), 0).unwrap();
        assert!((st.elapsed_s - (1.0 * cost.boxes_per_image + cost.train_s)).abs() < 1e-12);
    }

    #[test]
    fn perfect_model_high_confidence_is_cheapest() {
        let ds = AlDataset::new((0..10).map(|i| (i, vec![i as f32 - 4.5], i >= 5)).collect()).unwrap();
        let cost = CostModel { train_s: 0.0, ..CostModel::default() };
        let mut st = AlState::new(&ds);
        st.model = Some(identity_model());
        st.pool.remove(&0);
        st.labeled.insert(0);
        st.pool.remove(&9);
        st.labeled.insert(9);
        let next = step(st.clone(), &ds, &ds, Strategy::HighConfidence, 4, &cost, &TrainConfig::new(0), 0).unwrap();
        assert!((next.elapsed_s - 4.0 * cost.accept_s * cost.boxes_per_image).abs() < 1e-12);
        let random = step(st, &ds, &ds, Strategy::Random, 4, &cost, &TrainConfig::new(0), 0).unwrap();
        assert!(next.elapsed_s <= random.elapsed_s);
    }

    #[test]
    fn seed_round_only() {
        let (pool, test) = fixture(2);
        let st = run(&pool, &test, Strategy::HighConfidence, &RunConfig::new(0, 10, 2), &CostModel::default(), &TrainConfig::new(0)).unwrap();
        assert_eq!(st.history.len(), 1);
        assert_eq!(st.history[0].round, 0);
        assert!(st.history[0].labeled >= 20);
    }

    #[test]
    fn runs_are_deterministic_and_consistent() {
        let (pool, test) = fixture(3);
        let cfg = TrainConfig::new(0);
        for s in Strategy::ALL {
            let a = run(&pool, &test, s, &RunConfig::new(5, 10, 9), &CostModel::default(), &cfg).unwrap();
            let b = run(&pool, &test, s, &RunConfig::new(5, 10, 9), &CostModel::default(), &cfg).unwrap();
            assert_eq!(a.history, b.history);
            for w in a.history.windows(2) {
                assert!(w[1].elapsed_s > w[0].elapsed_s);
                assert_eq!(w[1].labeled, w[0].labeled + 10);
            }
            assert_eq!(a.labeled.len() + a.pool.len(), pool.len());
            assert!(a.labeled.is_disjoint(&a.pool));
        }
    }

    #[test]
    fn empty_pool_step_fails() {
        let ds = tiny();
        let mut st = AlState::new(&ds);
        st.labeled = st.pool.clone();
        st.pool.clear();
        assert!(step(st, &ds, &ds, Strategy::Random, 1, &CostModel::default(), &TrainConfig::new(0), 0).is_err());
    }

    #[test]
    fn summaries() {
        let h = vec![
            HistoryEntry { round: 0, labeled: 20, map: 0.5, elapsed_s: 100.0, boxes: 26.0 },
            HistoryEntry { round: 1, labeled: 30, map: 0.95, elapsed_s: 200.0, boxes: 39.0 },
        ];
        assert_eq!(time_to_map(&h, 0.9), Some(200.0));
        assert_eq!(time_to_map(&h, 0.99), None);
        assert_eq!(map_at_budget(&h, 25), Some(0.5));
        let s = summarize(Strategy::Random, &[h.clone(), h], 30, 0.9).unwrap();
        assert_eq!(s.mean_map_at_budget, 0.95);
        assert_eq!(s.mean_time_to_threshold_s, 200.0);
        assert_eq!(summary_csv(&[s]).lines().count(), 2);
    }

    #[test]
    fn history_csv_layout() {
        let h = vec![HistoryEntry { round: 0, labeled: 20, map: 0.5, elapsed_s: 182.6, boxes: 26.0 }];
        assert_eq!(history_csv(&h), "round,labeled,map,elapsed_s\n0,20,0.5,182.6\n");
    }
}
