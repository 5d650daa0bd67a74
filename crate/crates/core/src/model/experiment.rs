//! One prediction experiment: split, impute, standardise, search lambda,
//! refit and score on held-out communities.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cv::cv_grid_search;
use super::logistic::{train_logistic, TrainOptions};
use super::{auc, Matrix, Standardizer};
use crate::error::{Error, Result};
use crate::features::{Family, FeatureVector, ManifestEntry};
use crate::success::{Horizons, Measure};

/// Nine values log-spaced from 1e-4 to 1e4.
pub fn default_lambdas() -> Vec<f64> {
    (-4..=4).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub k_step: usize,
    pub lambdas: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub split_fraction: f64,
    pub qualification_days: f64,
    pub growth_months: usize,
    pub retention_months: usize,
    pub survival_months: usize,
    pub survival_tail_months: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let h = Horizons::default();
        ExperimentConfig {
            k_min: 10,
            k_max: 100,
            k_step: 10,
            lambdas: default_lambdas(),
            folds: 10,
            seed: 2014,
            split_fraction: 0.8,
            qualification_days: crate::ingest::DEFAULT_QUALIFICATION_DAYS,
            growth_months: h.growth_months,
            retention_months: h.retention_months,
            survival_months: h.survival_months,
            survival_tail_months: h.survival_tail_months,
            max_iterations: 10_000,
            tolerance: 1e-8,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.k_min == 0 || self.k_step == 0 || self.k_max < self.k_min {
            return fail(format!(
                "k range {}..={} step {} is empty or starts at 0",
                self.k_min, self.k_max, self.k_step
            ));
        }
        if self.folds < 2 {
            return fail(format!("folds must be at least 2, got {}", self.folds));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return fail(format!("split_fraction must be in (0, 1), got {}", self.split_fraction));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return fail("lambdas must be a non-empty list of finite values >= 0".into());
        }
        if self.growth_months == 0 || self.retention_months == 0 || self.survival_months == 0 {
            return fail("month horizons must be positive".into());
        }
        if self.survival_tail_months == 0 || self.survival_tail_months > self.survival_months {
            return fail("survival_tail_months must be in 1..=survival_months".into());
        }
        if self.qualification_days.is_nan() || self.qualification_days <= 0.0 {
            return fail("qualification_days must be positive".into());
        }
        Ok(())
    }

    pub fn k_values(&self) -> Vec<usize> {
        (self.k_min..=self.k_max).step_by(self.k_step).collect()
    }

    pub fn horizons(&self) -> Horizons {
        Horizons {
            growth_months: self.growth_months,
            retention_months: self.retention_months,
            survival_months: self.survival_months,
            survival_tail_months: self.survival_tail_months,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..TrainOptions::default()
        }
    }
}

/// Feature subset a model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelVariant {
    Family(Family),
    All,
}

impl ModelVariant {
    pub fn all() -> Vec<ModelVariant> {
        Family::ALL
            .into_iter()
            .map(ModelVariant::Family)
            .chain(std::iter::once(ModelVariant::All))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Family(f) => f.name(),
            ModelVariant::All => "all",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        if name == "all" {
            Some(ModelVariant::All)
        } else {
            Family::from_name(name).map(ModelVariant::Family)
        }
    }

    pub fn includes(self, family: Family) -> bool {
        match self {
            ModelVariant::Family(f) => f == family,
            ModelVariant::All => true,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Feature matrix for one k: one row per community, flagged cells marked.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub k: usize,
    pub communities: Vec<String>,
    pub columns: Vec<ManifestEntry>,
    pub values: Matrix,
    /// Row-major, same shape as `values`.
    pub flagged: Vec<bool>,
}

impl FeatureTable {
    pub fn from_vectors(k: usize, columns: Vec<ManifestEntry>, vectors: &[FeatureVector]) -> Result<Self> {
        let d = columns.len();
        let mut values = Vec::with_capacity(vectors.len() * d);
        let mut flagged = Vec::with_capacity(vectors.len() * d);
        for fv in vectors {
            if fv.features.len() != d || !fv.features.iter().zip(&columns).all(|(f, c)| f.name == c.name) {
                return Err(Error::Data(format!(
                    "community {} does not carry the manifest feature columns",
                    fv.community
                )));
            }
            values.extend(fv.features.iter().map(|f| f.value));
            flagged.extend(fv.features.iter().map(|f| f.flagged));
        }
        Ok(FeatureTable {
            k,
            communities: vectors.iter().map(|fv| fv.community.clone()).collect(),
            columns,
            values: Matrix::from_vec(vectors.len(), d, values),
            flagged,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn is_flagged(&self, i: usize, j: usize) -> bool {
        self.flagged[i * self.columns.len() + j]
    }

    pub fn column_indices(&self, variant: ModelVariant) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&j| variant.includes(self.columns[j].family))
            .collect()
    }
}

/// Seeded shuffle into `floor(fraction * n)` training rows and the rest.
pub fn split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 10 {
        return Err(Error::Config(format!("a train/test split needs at least 10 communities, got {n}")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n_train = ((fraction * n as f64) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub measure: Measure,
    pub k: usize,
    pub variant: String,
    pub auc: f64,
    pub lambda: f64,
    pub cv_auc: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub folds_used: usize,
    pub converged: bool,
    pub bias: f64,
    /// Coefficients on standardised features.
    pub weights: Vec<(String, f64)>,
}

/// Replaces flagged cells by the median of the unflagged training values of
/// their column (0 when a column has none).
fn impute(table: &FeatureTable, cols: &[usize], train: &[usize], rows: &[usize]) -> Matrix {
    let medians: Vec<f64> = cols
        .iter()
        .map(|&j| {
            let observed: Vec<f64> = train
                .iter()
                .filter(|&&i| !table.is_flagged(i, j))
                .map(|&i| table.values.get(i, j))
                .collect();
            crate::success::median(&observed).unwrap_or(0.0)
        })
        .collect();
    let mut out = Matrix::zeros(rows.len(), cols.len());
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            let v = if table.is_flagged(i, j) {
                medians[c]
            } else {
                table.values.get(i, j)
            };
            out.set(r, c, v);
        }
    }
    out
}

pub fn run_experiment(
    table: &FeatureTable,
    labels: &[bool],
    measure: Measure,
    variant: ModelVariant,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    if labels.len() != table.rows() {
        return Err(Error::Data(format!(
            "{} labels for {} feature rows at k={}",
            labels.len(),
            table.rows(),
            table.k
        )));
    }
    let cols = table.column_indices(variant);
    if cols.is_empty() {
        return Err(Error::Config(format!("no feature columns in family {variant}")));
    }
    let (train, test) = split(table.rows(), config.split_fraction, seed)?;

    let x_train_raw = impute(table, &cols, &train, &train);
    let x_test_raw = impute(table, &cols, &train, &test);
    let standardizer = Standardizer::fit(&x_train_raw);
    let x_train = standardizer.transform(&x_train_raw);
    let x_test = standardizer.transform(&x_test_raw);
    let y_train: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<bool> = test.iter().map(|&i| labels[i]).collect();

    let options = config.train_options();
    let search = cv_grid_search(
        &x_train,
        &y_train,
        &config.lambdas,
        config.folds,
        seed.wrapping_add(1),
        &options,
    )?;
    let signs: Vec<f64> = y_train.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let model = train_logistic(&x_train, &signs, search.best_lambda, &options)?;
    let test_auc = auc(&model.decision_function(&x_test), &y_test)
        .map_err(|_| Error::Degenerate(format!("test split for {measure} at k={} holds one class", table.k)))?;

    Ok(ExperimentResult {
        measure,
        k: table.k,
        variant: variant.name().to_string(),
        auc: test_auc,
        lambda: search.best_lambda,
        cv_auc: search.best_score,
        seed,
        n_train: train.len(),
        n_test: test.len(),
        folds_used: search.folds_used,
        converged: model.converged(),
        bias: model.bias,
        weights: cols
            .iter()
            .zip(&model.weights)
            .map(|(&j, &w)| (table.columns[j].name.clone(), w))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let (train, test) = split(100, 0.8, 5).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        let (train, test) = split(11, 0.8, 5).unwrap();
        assert_eq!((train.len(), test.len()), (8, 3));
        assert!(matches!(split(9, 0.8, 5), Err(Error::Config(_))));
    }

    #[test]
    fn split_is_seeded_disjoint_and_exhaustive() {
        let a = split(57, 0.8, 11).unwrap();
        assert_eq!(a, split(57, 0.8, 11).unwrap());
        assert_ne!(a, split(57, 0.8, 12).unwrap());
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = ExperimentConfig::default();
        assert_eq!(c.k_values(), vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100]);
        assert_eq!(c.lambdas.len(), 9);
        assert_eq!(c.lambdas[0], 1e-4);
        assert_eq!(c.lambdas[8], 1e4);
        let parsed = ExperimentConfig::from_toml("k_min = 20\nk_max = 40\nfolds = 5\n").unwrap();
        assert_eq!(parsed.k_values(), vec![20, 30, 40]);
        assert_eq!(parsed.folds, 5);
        assert!(ExperimentConfig::from_toml("folds = 1").is_err());
        assert!(ExperimentConfig::from_toml("unknown_key = 3").is_err());
    }

    #[test]
    fn variants_cover_six_families_and_all() {
        let v = ModelVariant::all();
        assert_eq!(v.len(), 7);
        assert_eq!(ModelVariant::from_name("all"), Some(ModelVariant::All));
        assert_eq!(
            ModelVariant::from_name("social"),
            Some(ModelVariant::Family(Family::Social))
        );
    }
}
