use geolens_core::active::{run, synth_pool, CostModel, RunConfig, Strategy};
use geolens_core::classifier::TrainConfig;

const SEEDS: u64 = 20;
const ROUNDS: usize = 30;
/// Largest drop of the per-round median tolerated between consecutive rounds.
const MEDIAN_DIP: f64 = 0.02;

fn histories(strategy: Strategy) -> Vec<Vec<f64>> {
    (0..SEEDS)
        .map(|seed| {
            let pool = synth_pool(500, 0.2, 8, 3.0, seed, 0).unwrap();
            let test = synth_pool(500, 0.2, 8, 3.0, 10_000 + seed, 100_000).unwrap();
            let cfg = RunConfig { rounds: ROUNDS, seed_count: 20, batch: 10, seed };
            run(&pool, &test, strategy, &cfg, &CostModel::default(), &TrainConfig::new(seed))
                .unwrap()
                .history
                .iter()
                .map(|h| h.map)
                .collect()
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn median_map_rises_over_rounds() {
    for strategy in Strategy::ALL {
        let runs = histories(strategy);
        let medians: Vec<f64> = (0..=ROUNDS).map(|r| median(runs.iter().map(|h| h[r]).collect())).collect();
        for (r, pair) in medians.windows(2).enumerate() {
            assert!(pair[1] >= pair[0] - MEDIAN_DIP, "{strategy}: median fell from {} to {} at round {}", pair[0], pair[1], r + 1);
        }
        let first = medians[0];
        let last = *medians.last().unwrap();
        assert!(last > first + 0.05, "{strategy}: median went from {first} to {last}");
    }
}

#[test]
fn histories_are_bitwise_reproducible() {
    let a = histories(Strategy::Uncertainty);
    let b = histories(Strategy::Uncertainty);
    for (x, y) in a.iter().zip(&b) {
        assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
