//! Optional TOML run configuration. Every key is optional; command-line flags
//! take precedence over values from the file.
//!
//! ```toml
//! seed = 7
//!
//! [split]
//! cell_deg = 0.01
//! train_fraction = 0.8
//!
//! [pq]
//! m = 4
//! k_centroids = 256
//! train_iters = 25
//!
//! [svm]
//! c = 1.0
//! epochs = 50
//! tol = 1e-9
//! neg_ratio = "cv"      # an integer, "max" or "cv"
//! cv_folds = 5
//!
//! [sampling]
//! max_iters = 100
//! tol = 1e-9
//!
//! [cost]
//! draw_s = 3.6
//! accept_s = 1.0
//! delete_s = 1.0
//! modify_s = 3.0
//! train_s = 89.0
//! boxes_per_image = 1.3
//!
//! [active]
//! rounds = 20
//! batch = 10
//! seed_count = 20
//! pool_size = 500
//! test_size = 500
//! positive_fraction = 0.2
//! dim = 8
//! separation = 3.0
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// TOML integers are signed, so seeds above `i64::MAX` go in quotes.
    #[serde(default, deserialize_with = "seed_value")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub pq: PqSection,
    #[serde(default)]
    pub svm: SvmSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub active: ActiveSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub cell_deg: Option<f64>,
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PqSection {
    pub m: Option<usize>,
    pub k_centroids: Option<usize>,
    pub train_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSection {
    pub c: Option<f64>,
    pub epochs: Option<usize>,
    pub tol: Option<f64>,
    pub neg_ratio: Option<String>,
    pub cv_folds: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub draw_s: Option<f64>,
    pub accept_s: Option<f64>,
    pub delete_s: Option<f64>,
    pub modify_s: Option<f64>,
    pub train_s: Option<f64>,
    pub boxes_per_image: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveSection {
    pub rounds: Option<usize>,
    pub batch: Option<usize>,
    pub seed_count: Option<usize>,
    pub pool_size: Option<usize>,
    pub test_size: Option<usize>,
    pub positive_fraction: Option<f64>,
    pub dim: Option<usize>,
    pub separation: Option<f64>,
}

fn seed_value<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }
    use serde::de::Error;
    match Raw::deserialize(d)? {
        Raw::Int(v) => u64::try_from(v).map(Some).map_err(|_| D::Error::custom("seed must be non-negative")),
        Raw::Text(s) => s.trim().parse().map(Some).map_err(|_| D::Error::custom(format!("`{s}` is not a 64-bit seed"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = crate::read_text(path)?;
        toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    /// The flag if given, else the config value, else an error: randomness
    /// is never seeded implicitly.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.seed)
            .ok_or_else(|| CliError::Validation("this command needs --seed (or `seed` in the config)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[pq]\nmm = 1").is_err());
        assert!(toml::from_str::<RunConfig>("seed = -1").is_err());
        assert_eq!(toml::from_str::<RunConfig>("seed = 42").unwrap().seed, Some(42));
    }

    #[test]
    fn all_optional() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert!(cfg.seed.is_none());
        let cfg: RunConfig = toml::from_str("seed = \"18446744073709551615\"\n[cost]\ndraw_s = 2.0").unwrap();
        assert_eq!(cfg.seed, Some(u64::MAX));
        assert_eq!(cfg.cost.draw_s, Some(2.0));
    }

    #[test]
    fn flag_overrides_config_seed() {
        let cfg = RunConfig { seed: Some(3), ..RunConfig::default() };
        assert_eq!(cfg.seed(Some(9)).unwrap(), 9);
        assert_eq!(cfg.seed(None).unwrap(), 3);
        assert!(RunConfig::default().seed(None).is_err());
    }
}
