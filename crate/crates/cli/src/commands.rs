use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use geolens_core::active::{self, CostModel, HistoryEntry, RunConfig as AlRunConfig, Strategy};
use geolens_core::classifier::{
    self, binary_rates, rates_table_csv, select_k_by_cv, synth_features as make_features, train_concept,
    LabeledFeature, LinearModel, NegRatio, TrainConfig,
};
use geolens_core::concepts::{expand_query, ExpansionMode, Lexicon, Taxonomy};
use geolens_core::geo::GeoPoint;
use geolens_core::index::{read_vec1, PqConfig, VectorSet};
use geolens_core::io::{
    features_to_jsonl, fmt_sig, parse_features, parse_points_csv, parse_polygon_csv, parse_records,
    parse_split_csv, points_to_csv, records_to_jsonl, split_to_csv,
};
use geolens_core::localize::{self, default_cities, synth_dataset, EvalReport, GeoIndex, GeoRecord, SynthConfig};
use geolens_core::osm::{extract_street_nodes, parse_osm};
use geolens_core::sampling::{
    grid_split, leakage_audit, sample_spread_indices, Partition, SamplingConfig, SplitConfig,
};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{in_file, CliError};
use crate::{read_bytes, read_text, write_outputs};

fn load_vectors(path: Option<&Path>) -> Result<Option<VectorSet>, CliError> {
    path.map(|p| read_vec1(read_bytes(p)?.as_slice()).map_err(in_file(p))).transpose()
}

fn load_records(path: &Path, vectors: Option<&Path>) -> Result<Vec<GeoRecord>, CliError> {
    let vs = load_vectors(vectors)?;
    parse_records(&read_text(path)?, vs.as_ref()).map_err(in_file(path))
}

fn load_features(path: &Path, vectors: Option<&Path>) -> Result<Vec<LabeledFeature>, CliError> {
    let vs = load_vectors(vectors)?;
    parse_features(&read_text(path)?, vs.as_ref()).map_err(in_file(path))
}

/// Keeps the records the split assigns to `keep`. Every record must appear
/// in the split.
fn filter_split(records: Vec<GeoRecord>, split: Option<&Path>, keep: Partition) -> Result<Vec<GeoRecord>, CliError> {
    let Some(path) = split else { return Ok(records) };
    let split = parse_split_csv(&read_text(path)?).map_err(in_file(path))?;
    let mut out = Vec::new();
    for r in records {
        match split.get(&r.id) {
            Some(&p) if p == keep => out.push(r),
            Some(_) => {}
            None => {
                return Err(CliError::Validation(format!("record {} is missing from {}", r.id, path.display())))
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!("no {} records after applying {}", keep.as_str(), path.display())));
    }
    Ok(out)
}

fn load_index(path: &Path) -> Result<GeoIndex, CliError> {
    let index: GeoIndex = serde_json::from_slice(&read_bytes(path)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    index.validate().map_err(in_file(path))?;
    Ok(index)
}

fn load_models(path: &Path) -> Result<Vec<LinearModel>, CliError> {
    let models: Vec<LinearModel> = serde_json::from_slice(&read_bytes(path)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    if models.is_empty() {
        return Err(CliError::Validation(format!("{} holds no models", path.display())));
    }
    let dim = models[0].weights.len();
    if let Some(m) = models.iter().find(|m| m.weights.len() != dim) {
        return Err(CliError::Validation(format!(
            "{}: model `{}` has {} weights, expected {dim}",
            path.display(),
            m.concept,
            m.weights.len()
        )));
    }
    Ok(models)
}

fn json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

pub fn osm_extract(osm: &Path, polygon: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let doc = parse_osm(&read_bytes(osm)?).map_err(in_file(osm))?;
    let boundary = polygon
        .map(|p| parse_polygon_csv(&read_text(p)?).map_err(in_file(p)))
        .transpose()?;
    let streets = extract_street_nodes(&doc.nodes, &doc.ways, boundary.as_ref());
    if !streets.dangling_refs.is_empty() {
        eprintln!("warning: {} way references point to missing nodes", streets.dangling_refs.len());
    }
    write_outputs(&[(out, points_to_csv(&streets.points).into_bytes())])
}

pub fn sample(
    cfg: &RunConfig,
    points: &Path,
    k: usize,
    seed: Option<u64>,
    max_iters: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let pts = parse_points_csv(&read_text(points)?).map_err(in_file(points))?;
    let seed = cfg.seed(seed)?;
    if k == 0 || k > pts.len() {
        return Err(CliError::Validation(format!("k = {k} but {} holds {} points", points.display(), pts.len())));
    }
    let mut sc = SamplingConfig::new(k, seed);
    if let Some(it) = max_iters.or(cfg.sampling.max_iters) {
        sc.max_iters = it;
    }
    if let Some(tol) = cfg.sampling.tol {
        sc.tol = tol;
    }
    let locations: Vec<GeoPoint> = pts.iter().map(|(_, p)| *p).collect();
    let chosen: Vec<(i64, GeoPoint)> = sample_spread_indices(&locations, &sc)?.into_iter().map(|i| pts[i]).collect();
    write_outputs(&[(out, points_to_csv(&chosen).into_bytes())])
}

pub fn split(
    cfg: &RunConfig,
    records: &Path,
    vectors: Option<&Path>,
    cell_deg: Option<f64>,
    train_frac: Option<f64>,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let recs = load_records(records, vectors)?;
    let sc = SplitConfig {
        cell_deg: cell_deg.or(cfg.split.cell_deg).unwrap_or(SplitConfig::DEFAULT_CELL_DEG),
        train_fraction: train_frac.or(cfg.split.train_fraction).unwrap_or(0.8),
        seed: cfg.seed(seed)?,
    };
    let keyed: Vec<(u64, GeoPoint)> = recs.iter().map(|r| (r.id, r.location)).collect();
    let assignment = grid_split(&keyed, &sc)?;
    let leaking = leakage_audit(&keyed, &assignment, sc.cell_deg)?;
    if let Some(cell) = leaking.first() {
        return Err(CliError::Invariant(format!(
            "{} grid cells span both partitions, first ({}, {})",
            leaking.len(),
            cell.row,
            cell.col
        )));
    }
    write_outputs(&[(out, split_to_csv(&assignment).into_bytes())])
}

#[allow(clippy::too_many_arguments)]
pub fn synth(
    cfg: &RunConfig,
    cities: usize,
    per_city: usize,
    dim: usize,
    spread_km: f64,
    noise: f64,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let mut specs = default_cities(per_city);
    if cities == 0 || cities > specs.len() {
        return Err(CliError::Validation(format!("--cities must be between 1 and {}", specs.len())));
    }
    specs.truncate(cities);
    let sc = SynthConfig { embed_dim: dim, spread_km, embed_noise: noise, seed: cfg.seed(seed)? };
    let records = synth_dataset(&specs, &sc)?;
    write_outputs(&[(out, records_to_jsonl(&records).into_bytes())])
}

pub struct IndexChoice {
    pub exact: bool,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
}

pub fn index(
    cfg: &RunConfig,
    records: &Path,
    vectors: Option<&Path>,
    split: Option<&Path>,
    choice: IndexChoice,
    out: &Path,
) -> Result<(), CliError> {
    let recs = filter_split(load_records(records, vectors)?, split, Partition::Train)?;
    let pq = if choice.exact {
        None
    } else {
        let dim = recs[0].embedding.len();
        let mut pq = PqConfig::default_for_dim(dim, cfg.seed(choice.seed)?);
        if let Some(m) = choice.m.or(cfg.pq.m) {
            pq.m = m;
        }
        if let Some(k) = choice.k.or(cfg.pq.k_centroids) {
            pq.k_centroids = k;
        }
        if let Some(it) = choice.iters.or(cfg.pq.train_iters) {
            pq.train_iters = it;
        }
        Some(pq)
    };
    let geo_index = GeoIndex::build(&recs, pq.as_ref())?;
    write_outputs(&[(out, json(&geo_index))])
}

pub fn query(
    index: &Path,
    records: &Path,
    vectors: Option<&Path>,
    split: Option<&Path>,
    nn: usize,
    out: &Path,
) -> Result<(), CliError> {
    let idx = load_index(index)?;
    let recs = filter_split(load_records(records, vectors)?, split, Partition::Test)?;
    let mut csv = String::from("id,pred_lat,pred_lon,nearest_id,nearest_distance\n");
    for r in &recs {
        let est = localize::localize(&r.embedding, &idx, nn)
            .map_err(|e| CliError::Validation(format!("record {}: {e}", r.id)))?;
        let top = est.neighbors[0];
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.id,
            fmt_sig(est.predicted.lat()),
            fmt_sig(est.predicted.lon()),
            top.id,
            fmt_sig(top.distance)
        ));
    }
    write_outputs(&[(out, csv.into_bytes())])
}

pub fn evaluate(
    index: &Path,
    records: &Path,
    vectors: Option<&Path>,
    split: Option<&Path>,
    nn: &[usize],
    descriptor: &str,
    out: &Path,
) -> Result<(), CliError> {
    let idx = load_index(index)?;
    let recs = filter_split(load_records(records, vectors)?, split, Partition::Test)?;
    let report = localize::evaluate(&recs, &idx, nn)?;
    if !report.is_monotone() {
        return Err(CliError::Invariant("accuracy decreases with radius".into()));
    }
    if !report.overlapping_ids.is_empty() {
        eprintln!("warning: {} query ids are also in the index", report.overlapping_ids.len());
    }
    let mut csv = format!("{}\n", EvalReport::csv_header());
    for row in report.csv_rows(descriptor) {
        csv.push_str(&row);
        csv.push('\n');
    }
    write_outputs(&[(out, csv.into_bytes())])
}

pub fn synth_features(
    cfg: &RunConfig,
    concepts: &[String],
    per_concept: usize,
    dim: usize,
    separation: f64,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let items = make_features(concepts, per_concept, dim, separation, cfg.seed(seed)?)?;
    write_outputs(&[(out, features_to_jsonl(&items).into_bytes())])
}

pub struct TrainChoice {
    pub neg_ratio: Option<String>,
    pub cv_folds: Option<usize>,
    pub c: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

pub fn train(
    cfg: &RunConfig,
    features: &Path,
    vectors: Option<&Path>,
    concepts: &[String],
    choice: TrainChoice,
    cv_report: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let items = load_features(features, vectors)?;
    let mut tc = TrainConfig::new(cfg.seed(choice.seed)?);
    if let Some(c) = choice.c.or(cfg.svm.c) {
        tc.c = c;
    }
    if let Some(e) = choice.epochs.or(cfg.svm.epochs) {
        tc.epochs = e;
    }
    if let Some(t) = cfg.svm.tol {
        tc.tol = t;
    }
    let ratio = choice.neg_ratio.or_else(|| cfg.svm.neg_ratio.clone()).unwrap_or_else(|| "cv".into());
    let fixed = match ratio.trim() {
        "cv" => None,
        other => Some(other.parse::<NegRatio>()?),
    };
    if fixed.is_some() && cv_report.is_some() {
        return Err(CliError::Validation("--cv-report requires --neg-ratio cv".into()));
    }
    let folds = choice.cv_folds.or(cfg.svm.cv_folds).unwrap_or(5);
    let targets: Vec<String> = if concepts.is_empty() {
        items.iter().flat_map(|f| f.labels.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        concepts.to_vec()
    };
    if targets.is_empty() {
        return Err(CliError::Validation(format!("{} carries no labels", features.display())));
    }

    let mut models = Vec::new();
    let mut report = String::from("concept,neg_ratio,mean_f1,selected\n");
    for concept in &targets {
        let ratio = match fixed {
            Some(r) => r,
            None => {
                let cv = select_k_by_cv(concept, &items, &NegRatio::GRID, folds, &tc)?;
                for (r, f1) in &cv.per_ratio {
                    report.push_str(&format!("{concept},{r},{},{}\n", fmt_sig(*f1), *r == cv.best));
                }
                cv.best
            }
        };
        models.push(train_concept(concept, &items, &TrainConfig { neg_ratio: ratio, ..tc })?);
    }
    let mut outputs = vec![(out, json(&models))];
    if let Some(path) = cv_report {
        outputs.push((path, report.into_bytes()));
    }
    write_outputs(&outputs)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

pub fn rates_from_predictions(path: &Path, out: &Path) -> Result<(), CliError> {
    let text = read_text(path)?;
    let parse_err = |line: usize, msg: String| CliError::Parse(format!("{}:{line}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["concept", "truth", "predicted"] {
        return Err(parse_err(1, "expected header `concept,truth,predicted`".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut columns: BTreeMap<String, (Vec<bool>, Vec<bool>)> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        let truth = parse_bool(&row[1]).ok_or_else(|| parse_err(line, format!("`{}` is not a boolean", &row[1])))?;
        let pred = parse_bool(&row[2]).ok_or_else(|| parse_err(line, format!("`{}` is not a boolean", &row[2])))?;
        let concept = row[0].to_string();
        if !columns.contains_key(&concept) {
            order.push(concept.clone());
        }
        let col = columns.entry(concept).or_default();
        col.0.push(truth);
        col.1.push(pred);
    }
    if order.is_empty() {
        return Err(CliError::Validation(format!("{} holds no predictions", path.display())));
    }
    let mut table = Vec::new();
    for concept in order {
        let (truth, pred) = &columns[&concept];
        let rates = binary_rates(truth, pred).map_err(|e| CliError::Validation(format!("{concept}: {e}")))?;
        table.push((concept, rates));
    }
    write_outputs(&[(out, rates_table_csv(&table)?.into_bytes())])
}

pub fn rates_from_models(models: &Path, features: &Path, vectors: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let models = load_models(models)?;
    let items = load_features(features, vectors)?;
    let mut table = Vec::new();
    for m in &models {
        let truth: Vec<bool> = items.iter().map(|f| f.has(&m.concept)).collect();
        let pred = items
            .iter()
            .map(|f| m.score(&f.features).map(|s| s > 0.0))
            .collect::<Result<Vec<bool>, _>>()?;
        let rates = binary_rates(&truth, &pred).map_err(|e| CliError::Validation(format!("{}: {e}", m.concept)))?;
        table.push((m.concept.clone(), rates));
    }
    write_outputs(&[(out, rates_table_csv(&table)?.into_bytes())])
}

pub fn confusion(models: &Path, features: &Path, vectors: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let models = load_models(models)?;
    let items = load_features(features, vectors)?;
    let matrix = classifier::confusion(&models, &items)?;
    write_outputs(&[(out, matrix.to_csv().into_bytes())])
}

pub enum Source {
    Taxonomy(PathBuf),
    Lexicon(PathBuf),
}

pub fn expand(query: &str, bank: &Path, source: Source, k: usize, out: &Path) -> Result<(), CliError> {
    let bank_items: Vec<String> =
        read_text(bank)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    if k == 0 {
        return Err(CliError::Validation("--k must be positive".into()));
    }
    let result = match &source {
        Source::Taxonomy(p) => {
            let t = Taxonomy::parse_csv(&read_text(p)?).map_err(in_file(p))?;
            expand_query(query, &bank_items, ExpansionMode::Wup(&t), k)?
        }
        Source::Lexicon(p) => {
            let l = Lexicon::parse(&read_text(p)?).map_err(in_file(p))?;
            expand_query(query, &bank_items, ExpansionMode::Cosine(&l), k)?
        }
    };
    if !result.skipped.is_empty() {
        eprintln!("warning: skipped unknown concepts: {}", result.skipped.join(", "));
    }
    write_outputs(&[(out, result.to_csv().into_bytes())])
}

pub struct SimulateChoice {
    pub strategy: String,
    pub rounds: Option<usize>,
    pub batch: Option<usize>,
    pub seed_count: Option<usize>,
    pub runs: u64,
    pub budget: usize,
    pub threshold: f64,
    pub seed: Option<u64>,
}

fn cost_model(cfg: &RunConfig) -> CostModel {
    let d = CostModel::default();
    let c = &cfg.cost;
    CostModel {
        draw_s: c.draw_s.unwrap_or(d.draw_s),
        accept_s: c.accept_s.unwrap_or(d.accept_s),
        delete_s: c.delete_s.unwrap_or(d.delete_s),
        modify_s: c.modify_s.unwrap_or(d.modify_s),
        train_s: c.train_s.unwrap_or(d.train_s),
        boxes_per_image: c.boxes_per_image.unwrap_or(d.boxes_per_image),
    }
}

pub fn simulate(cfg: &RunConfig, choice: SimulateChoice, out: &Path) -> Result<(), CliError> {
    let seed = cfg.seed(choice.seed)?;
    let strategies: Vec<Strategy> = match choice.strategy.trim() {
        "all" => Strategy::ALL.to_vec(),
        s => vec![s.parse()?],
    };
    if choice.runs == 0 {
        return Err(CliError::Validation("--runs must be at least 1".into()));
    }
    let a = &cfg.active;
    let cost = cost_model(cfg);
    cost.validate()?;
    let pool_size = a.pool_size.unwrap_or(500);
    let test_size = a.test_size.unwrap_or(500);
    let fraction = a.positive_fraction.unwrap_or(0.2);
    let dim = a.dim.unwrap_or(8);
    let separation = a.separation.unwrap_or(3.0);
    let template = AlRunConfig {
        rounds: choice.rounds.or(a.rounds).unwrap_or(20),
        seed_count: choice.seed_count.or(a.seed_count).unwrap_or(20),
        batch: choice.batch.or(a.batch).unwrap_or(10),
        seed,
    };
    if template.batch == 0 {
        return Err(CliError::Validation("--batch must be positive".into()));
    }

    let jobs: Vec<(Strategy, u64)> =
        strategies.iter().flat_map(|&s| (0..choice.runs).map(move |r| (s, seed.wrapping_add(r)))).collect();
    let histories = jobs
        .par_iter()
        .map(|&(strategy, run_seed)| -> Result<Vec<HistoryEntry>, CliError> {
            let pool = active::synth_pool(pool_size, fraction, dim, separation, run_seed, 0)?;
            let test = active::synth_pool(test_size, fraction, dim, separation, !run_seed, pool_size as u64)?;
            let mut tc = TrainConfig::new(run_seed);
            if let Some(c) = cfg.svm.c {
                tc.c = c;
            }
            if let Some(e) = cfg.svm.epochs {
                tc.epochs = e;
            }
            if let Some(t) = cfg.svm.tol {
                tc.tol = t;
            }
            let run_cfg = AlRunConfig { seed: run_seed, ..template };
            Ok(active::run(&pool, &test, strategy, &run_cfg, &cost, &tc)?.history)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let csv = if strategies.len() == 1 && choice.runs == 1 {
        active::history_csv(&histories[0])
    } else {
        let per = choice.runs as usize;
        let summaries = strategies
            .iter()
            .enumerate()
            .map(|(i, &s)| active::summarize(s, &histories[i * per..(i + 1) * per], choice.budget, choice.threshold))
            .collect::<Result<Vec<_>, _>>()?;
        active::summary_csv(&summaries)
    };
    write_outputs(&[(out, csv.into_bytes())])
}
