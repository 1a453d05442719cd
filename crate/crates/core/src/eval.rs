//! Evaluation: confusion counts and metrics, stratified cross-validation,
//! the 5x2cv paired t-test, inter-annotator agreement, annotation sampling
//! and per-class author statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    normalize_text, AuthorProfile, Category, Label, LabeledCorpus, NormalizeOptions,
};
use crate::error::{Error, Result};
use crate::features::{FeatureScheme, FeatureVector, Featurizer};
use crate::svm::{train, TrainConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                left: truth.len(),
                right: predicted.len(),
            });
        }
        let mut cm = ConfusionMatrix::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Label::Positive, Label::Positive) => cm.tp += 1,
                (Label::Negative, Label::Positive) => cm.fp += 1,
                (Label::Positive, Label::Negative) => cm.fn_ += 1,
                (Label::Negative, Label::Negative) => cm.tn += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn error_rate(&self) -> Option<f64> {
        ratio(self.fp + self.fn_, self.total())
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

/// Positive-class metrics. A ratio with a zero denominator is `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let tpr = ratio(cm.tp, cm.tp + cm.fn_);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let f1 = match (precision, tpr) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    MetricsReport {
        tpr,
        tnr: ratio(cm.tn, cm.tn + cm.fp),
        fpr: ratio(cm.fp, cm.tn + cm.fp),
        fnr: ratio(cm.fn_, cm.tp + cm.fn_),
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall: tpr,
        f1,
    }
}

/// Test-index sets of a k-fold split. Training indices are the complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub test_indices: Vec<Vec<usize>>,
}

impl FoldAssignment {
    pub fn len(&self) -> usize {
        self.test_indices.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let test: HashSet<usize> = self.test_indices[fold].iter().copied().collect();
        (0..self.len()).filter(|i| !test.contains(i)).collect()
    }
}

/// Shuffles each class with `seed` and deals its members round-robin over
/// the folds, continuing the deal where the previous class stopped. Every
/// fold then holds ⌊m/k⌋ or ⌈m/k⌉ members of a class of size m, and fold
/// sizes differ by at most one.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_indices = vec![Vec::new(); k];
    let mut next_fold = 0;
    for class in [Label::Positive, Label::Negative] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class: class.to_string(),
                size: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for idx in members {
            test_indices[next_fold].push(idx);
            next_fold = (next_fold + 1) % k;
        }
    }
    for fold in &mut test_indices {
        fold.sort_unstable();
    }
    Ok(FoldAssignment { k, test_indices })
}

/// Predictions for one fold's test indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPrediction {
    pub predictions: Vec<Label>,
    /// Solver convergence, for detectors that train.
    pub converged: Option<bool>,
}

/// Something that can be fitted on a subset of a corpus and predict another subset.
pub trait Detector: Sync {
    fn fit_predict(&self, train_idx: &[usize], test_idx: &[usize]) -> Result<FoldPrediction>;

    fn feature_dim(&self) -> Option<usize> {
        None
    }
}

/// Rule-only detector with precomputed per-record labels; fitting is a no-op.
#[derive(Debug, Clone)]
pub struct FixedDetector {
    pub labels: Vec<Label>,
}

impl Detector for FixedDetector {
    fn fit_predict(&self, _train_idx: &[usize], test_idx: &[usize]) -> Result<FoldPrediction> {
        Ok(FoldPrediction {
            predictions: test_idx.iter().map(|&i| self.labels[i]).collect(),
            converged: None,
        })
    }
}

/// Linear SVM over precomputed features, optionally overruled by rule decisions.
#[derive(Debug, Clone)]
pub struct LinearDetector {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<Label>,
    pub config: TrainConfig,
    /// Per-record rule decision; `Some` overrides the classifier.
    pub overrule: Option<Vec<Option<Label>>>,
}

impl Detector for LinearDetector {
    fn fit_predict(&self, train_idx: &[usize], test_idx: &[usize]) -> Result<FoldPrediction> {
        let scheme = self
            .features
            .first()
            .map_or(FeatureScheme::DocPool, |f| f.scheme);
        let x: Vec<&[f64]> = train_idx
            .iter()
            .map(|&i| self.features[i].values.as_slice())
            .collect();
        let y: Vec<Label> = train_idx.iter().map(|&i| self.labels[i]).collect();
        let outcome = train(&x, &y, scheme, &self.config)?;
        let predictions = test_idx
            .iter()
            .map(|&i| {
                let classifier = outcome.model.predict(&self.features[i].values)?;
                Ok(match &self.overrule {
                    Some(rules) => combine_overrule(rules[i], classifier),
                    None => classifier,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FoldPrediction {
            predictions,
            converged: Some(outcome.converged),
        })
    }

    fn feature_dim(&self) -> Option<usize> {
        self.features.first().map(FeatureVector::dim)
    }
}

/// Rule label when any rule matched, otherwise the classifier's label.
pub fn combine_overrule(heuristic: Option<Label>, classifier: Label) -> Label {
    heuristic.unwrap_or(classifier)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<FeatureScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ruleset_hash: Option<String>,
    pub positive_count: usize,
    pub negative_count: usize,
    /// Number of folds; 0 when the whole corpus is the test set.
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Summed over folds.
    pub confusion: ConfusionMatrix,
    /// Metrics of the summed confusion counts.
    pub micro: MetricsReport,
    /// Mean of per-fold metrics, over the folds where each is defined.
    #[serde(rename = "macro")]
    pub macro_: MetricsReport,
    pub unconverged_folds: usize,
}

fn macro_average(folds: &[FoldResult]) -> MetricsReport {
    let mean = |get: fn(&MetricsReport) -> Option<f64>| {
        let values: Vec<f64> = folds.iter().filter_map(|f| get(&f.metrics)).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    MetricsReport {
        tpr: mean(|m| m.tpr),
        tnr: mean(|m| m.tnr),
        fpr: mean(|m| m.fpr),
        fnr: mean(|m| m.fnr),
        accuracy: mean(|m| m.accuracy),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
    }
}

impl EvalReport {
    fn from_folds(
        name: &str,
        labels: &[Label],
        k: usize,
        seed: u64,
        folds: Vec<FoldResult>,
    ) -> Self {
        let confusion = folds
            .iter()
            .fold(ConfusionMatrix::default(), |acc, f| acc + f.confusion);
        EvalReport {
            name: name.to_string(),
            scheme: None,
            feature_dim: None,
            ruleset_hash: None,
            positive_count: labels.iter().filter(|&&l| l == Label::Positive).count(),
            negative_count: labels.iter().filter(|&&l| l == Label::Negative).count(),
            k,
            seed,
            micro: metrics(&confusion),
            macro_: macro_average(&folds),
            unconverged_folds: folds.iter().filter(|f| f.converged == Some(false)).count(),
            confusion,
            folds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn run_fold(
    detector: &dyn Detector,
    labels: &[Label],
    folds: &FoldAssignment,
    fold: usize,
) -> Result<FoldResult> {
    let test = &folds.test_indices[fold];
    let train_idx = folds.train_indices(fold);
    let prediction = detector.fit_predict(&train_idx, test)?;
    let truth: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
    let confusion = ConfusionMatrix::from_predictions(&truth, &prediction.predictions)?;
    Ok(FoldResult {
        fold,
        train_size: train_idx.len(),
        test_size: test.len(),
        metrics: metrics(&confusion),
        confusion,
        converged: prediction.converged,
    })
}

/// Stratified k-fold evaluation of any detector. Results are ordered by fold
/// index whether or not folds run in parallel.
pub fn cross_validate_detector(
    name: &str,
    detector: &dyn Detector,
    labels: &[Label],
    k: usize,
    seed: u64,
    parallel: bool,
) -> Result<EvalReport> {
    let folds = stratified_kfold(labels, k, seed)?;
    let results: Vec<FoldResult> = if parallel {
        (0..k)
            .into_par_iter()
            .map(|f| run_fold(detector, labels, &folds, f))
            .collect::<Result<_>>()?
    } else {
        (0..k)
            .map(|f| run_fold(detector, labels, &folds, f))
            .collect::<Result<_>>()?
    };
    let mut report = EvalReport::from_folds(name, labels, k, seed, results);
    report.feature_dim = detector.feature_dim();
    Ok(report)
}

/// Evaluates a detector that needs no training on the whole corpus at once.
pub fn evaluate_whole(
    name: &str,
    detector: &dyn Detector,
    labels: &[Label],
    seed: u64,
) -> Result<EvalReport> {
    let all: Vec<usize> = (0..labels.len()).collect();
    let prediction = detector.fit_predict(&[], &all)?;
    let confusion = ConfusionMatrix::from_predictions(labels, &prediction.predictions)?;
    let fold = FoldResult {
        fold: 0,
        train_size: 0,
        test_size: labels.len(),
        metrics: metrics(&confusion),
        confusion,
        converged: prediction.converged,
    };
    let mut report = EvalReport::from_folds(name, labels, 0, seed, vec![fold]);
    report.feature_dim = detector.feature_dim();
    Ok(report)
}

/// Featurizes `corpus` and runs stratified k-fold CV of a linear SVM.
pub fn cross_validate(
    corpus: &LabeledCorpus,
    featurizer: &Featurizer,
    train_config: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    let labels = corpus.labels()?;
    let detector = LinearDetector {
        features: featurizer.featurize_all(corpus.records(), false)?,
        labels: labels.clone(),
        config: *train_config,
        overrule: None,
    };
    let mut report = cross_validate_detector("custom", &detector, &labels, k, seed, false)?;
    report.scheme = Some(featurizer.scheme());
    report.feature_dim = Some(featurizer.dim());
    Ok(report)
}

pub const FIVE_BY_TWO_TRIALS: usize = 5;

/// Error rates of one detector on each (trial, fold) of the 5x2cv protocol.
pub type FiveByTwoErrors = [[f64; 2]; FIVE_BY_TWO_TRIALS];

fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(trial as u64 + 1)
}

/// Runs five seeded stratified 2-fold splits and records the test error of each fold.
pub fn five_by_two_errors(
    detector: &dyn Detector,
    labels: &[Label],
    seed: u64,
) -> Result<FiveByTwoErrors> {
    let mut errors = [[0.0; 2]; FIVE_BY_TWO_TRIALS];
    for (trial, row) in errors.iter_mut().enumerate() {
        let folds = stratified_kfold(labels, 2, trial_seed(seed, trial))?;
        for (fold, slot) in row.iter_mut().enumerate() {
            let result = run_fold(detector, labels, &folds, fold)?;
            *slot = result.confusion.error_rate().unwrap_or(0.0);
        }
    }
    Ok(errors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDetail {
    pub trial: usize,
    pub differences: [f64; 2],
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_value: f64,
    pub degrees_of_freedom: usize,
    pub per_trial: Vec<TrialDetail>,
}

/// `t = p₁⁽¹⁾ / sqrt((1/5) Σᵢ sᵢ²)`, where `pᵢ⁽ʲ⁾` is the error-rate difference
/// on fold j of trial i and `sᵢ² = Σⱼ (pᵢ⁽ʲ⁾ − p̄ᵢ)²`.
pub fn five_by_two_t_statistic(differences: &FiveByTwoErrors) -> Result<TTestResult> {
    let per_trial: Vec<TrialDetail> = differences
        .iter()
        .enumerate()
        .map(|(trial, d)| {
            let mean = (d[0] + d[1]) / 2.0;
            let variance = (d[0] - mean).powi(2) + (d[1] - mean).powi(2);
            TrialDetail {
                trial,
                differences: *d,
                variance,
            }
        })
        .collect();
    let mean_variance =
        per_trial.iter().map(|t| t.variance).sum::<f64>() / FIVE_BY_TWO_TRIALS as f64;
    if mean_variance <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(TTestResult {
        t_value: differences[0][0] / mean_variance.sqrt(),
        degrees_of_freedom: FIVE_BY_TWO_TRIALS,
        per_trial,
    })
}

/// Combines per-fold error rates of A and B into the paired t statistic (A − B).
pub fn five_by_two_from_errors(a: &FiveByTwoErrors, b: &FiveByTwoErrors) -> Result<TTestResult> {
    let mut diff = [[0.0; 2]; FIVE_BY_TWO_TRIALS];
    for i in 0..FIVE_BY_TWO_TRIALS {
        for j in 0..2 {
            diff[i][j] = a[i][j] - b[i][j];
        }
    }
    five_by_two_t_statistic(&diff)
}

pub fn five_by_two_ttest(
    a: &dyn Detector,
    b: &dyn Detector,
    labels: &[Label],
    seed: u64,
) -> Result<TTestResult> {
    five_by_two_from_errors(
        &five_by_two_errors(a, labels, seed)?,
        &five_by_two_errors(b, labels, seed)?,
    )
}

/// Fleiss' kappa over an items × categories matrix of rating counts.
pub fn fleiss_kappa(ratings: &[Vec<usize>]) -> Result<f64> {
    let first = ratings
        .first()
        .ok_or_else(|| Error::Config("no items to rate".into()))?;
    let categories = first.len();
    let raters: usize = first.iter().sum();
    if raters < 2 {
        return Err(Error::Config(
            "Fleiss' kappa needs at least 2 raters per item".into(),
        ));
    }
    for (item, row) in ratings.iter().enumerate() {
        let count: usize = row.iter().sum();
        if row.len() != categories || count != raters {
            return Err(Error::RaggedRatings {
                item,
                expected: raters,
                actual: count,
            });
        }
    }
    let n = raters as f64;
    let items = ratings.len() as f64;
    let p_bar = ratings
        .iter()
        .map(|row| {
            let agree: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (agree - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..categories)
        .map(|j| {
            let share = ratings.iter().map(|row| row[j]).sum::<usize>() as f64 / (items * n);
            share * share
        })
        .sum();
    Ok(chance_corrected(p_bar, p_e))
}

fn chance_corrected(observed: f64, expected: f64) -> f64 {
    if expected >= 1.0 {
        // Every rating falls in one category; agreement is perfect by construction.
        return if observed >= 1.0 { 1.0 } else { 0.0 };
    }
    (observed - expected) / (1.0 - expected)
}

/// Cohen's kappa between two raters over the binary label space.
pub fn cohen_kappa(a: &[Label], b: &[Label]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Config(
            "Cohen's kappa needs at least one item".into(),
        ));
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let expected: f64 = [Label::Positive, Label::Negative]
        .iter()
        .map(|l| {
            let pa = a.iter().filter(|x| *x == l).count() as f64 / n;
            let pb = b.iter().filter(|x| *x == l).count() as f64 / n;
            pa * pb
        })
        .sum();
    Ok(chance_corrected(observed, expected))
}

/// Picks, per category, the `n_per_category` records least similar to the
/// rest of their category (summed cosine similarity of token-count vectors
/// after annotation preprocessing). Ties go to the smaller id. Output lists
/// SSN picks, then IP picks, each ordered by score then id.
pub fn select_annotation_sample(
    corpus: &LabeledCorpus,
    n_per_category: usize,
) -> Result<Vec<String>> {
    let options = NormalizeOptions::annotation();
    let mut selected = Vec::new();
    for category in Category::ALL {
        let mut records: Vec<_> = corpus
            .records()
            .iter()
            .filter(|r| r.category == category)
            .collect();
        if records.len() < n_per_category {
            return Err(Error::InsufficientRecords {
                category: category.to_string(),
                available: records.len(),
                requested: n_per_category,
            });
        }
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let bags: Vec<BTreeMap<String, f64>> = records
            .iter()
            .map(|r| {
                let mut bag = BTreeMap::new();
                for token in normalize_text(&r.effective_text(), &options) {
                    *bag.entry(token).or_insert(0.0) += 1.0;
                }
                bag
            })
            .collect();
        let norms: Vec<f64> = bags
            .iter()
            .map(|b| b.values().map(|c| c * c).sum::<f64>().sqrt())
            .collect();
        let mut scored: Vec<(f64, &str)> = (0..records.len())
            .map(|i| {
                let score: f64 = (0..records.len())
                    .filter(|&j| j != i)
                    .map(|j| cosine(&bags[i], norms[i], &bags[j], norms[j]))
                    .sum();
                (score, records[i].id.as_str())
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        selected.extend(
            scored
                .into_iter()
                .take(n_per_category)
                .map(|(_, id)| id.to_string()),
        );
    }
    Ok(selected)
}

/// Cosine similarity of sparse count vectors; 0 when either is empty.
pub fn cosine(
    a: &BTreeMap<String, f64>,
    norm_a: f64,
    b: &BTreeMap<String, f64>,
    norm_b: f64,
) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, x)| large.get(t).map(|y| x * y))
        .sum();
    dot / (norm_a * norm_b)
}

/// Per-class author statistics. Percentages are shares of the class's unique users.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassAttributes {
    pub total_samples: usize,
    pub unique_users: usize,
    pub mean_status_count: f64,
    pub no_followers_pct: f64,
    pub no_friends_pct: f64,
    pub no_favourites_pct: f64,
    pub no_location_pct: f64,
    pub no_banner_pct: f64,
    pub no_url_pct: f64,
    pub customized_theme_pct: f64,
    pub default_image_pct: f64,
    pub name_shorter_than_3_pct: f64,
    pub name_longer_than_20_pct: f64,
    pub under_10_statuses_pct: f64,
    pub under_100_statuses_pct: f64,
    pub created_since_2019_pct: f64,
    pub verified_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeTable {
    pub positive: ClassAttributes,
    pub negative: ClassAttributes,
    /// Labeled records skipped for lacking an author profile.
    pub skipped_without_profile: usize,
}

fn user_key(profile: &AuthorProfile) -> String {
    match &profile.user_id {
        Some(id) => format!("id:{id}"),
        None => format!(
            "profile:{}",
            serde_json::to_string(profile).expect("profile serializes")
        ),
    }
}

fn class_attributes(total_samples: usize, users: &[&AuthorProfile]) -> ClassAttributes {
    let count = users.len();
    let pct = |pred: &dyn Fn(&AuthorProfile) -> bool| {
        if count == 0 {
            0.0
        } else {
            100.0 * users.iter().filter(|u| pred(u)).count() as f64 / count as f64
        }
    };
    let blank = |s: &Option<String>| s.as_deref().is_none_or(|v| v.trim().is_empty());
    let name_len = |u: &AuthorProfile| u.name.as_deref().map_or(0, |n| n.chars().count());
    ClassAttributes {
        total_samples,
        unique_users: count,
        mean_status_count: if count == 0 {
            0.0
        } else {
            users.iter().map(|u| u.statuses_count as f64).sum::<f64>() / count as f64
        },
        no_followers_pct: pct(&|u| u.followers_count == 0),
        no_friends_pct: pct(&|u| u.friends_count == 0),
        no_favourites_pct: pct(&|u| u.favourites_count == 0),
        no_location_pct: pct(&|u| blank(&u.location)),
        no_banner_pct: pct(&|u| !u.has_banner),
        no_url_pct: pct(&|u| blank(&u.url)),
        customized_theme_pct: pct(&|u| u.customized_theme),
        default_image_pct: pct(&|u| u.default_profile_image),
        name_shorter_than_3_pct: pct(&|u| name_len(u) < 3),
        name_longer_than_20_pct: pct(&|u| name_len(u) > 20),
        under_10_statuses_pct: pct(&|u| u.statuses_count < 10),
        under_100_statuses_pct: pct(&|u| u.statuses_count < 100),
        created_since_2019_pct: pct(&|u| u.created_year >= 2019),
        verified_count: users.iter().filter(|u| u.verified).count(),
    }
}

/// Unique-user statistics per class. A user's first profile snapshot in a class is used.
pub fn user_attribute_report(corpus: &LabeledCorpus) -> AttributeTable {
    let mut table = AttributeTable::default();
    for label in [Label::Positive, Label::Negative] {
        let mut seen = HashSet::new();
        let mut users = Vec::new();
        let mut samples = 0;
        for record in corpus.records().iter().filter(|r| r.label == Some(label)) {
            samples += 1;
            match &record.author {
                Some(profile) => {
                    if seen.insert(user_key(profile)) {
                        users.push(profile);
                    }
                }
                None => table.skipped_without_profile += 1,
            }
        }
        let attributes = class_attributes(samples, &users);
        match label {
            Label::Positive => table.positive = attributes,
            Label::Negative => table.negative = attributes,
        }
    }
    table
}

impl AttributeTable {
    /// Plain-text table with a positive/negative ratio column.
    pub fn render(&self) -> String {
        let (p, n) = (&self.positive, &self.negative);
        let rows: Vec<(&str, f64, f64, bool)> = vec![
            (
                "Total samples",
                p.total_samples as f64,
                n.total_samples as f64,
                false,
            ),
            (
                "Unique users",
                p.unique_users as f64,
                n.unique_users as f64,
                false,
            ),
            (
                "Mean status count",
                p.mean_status_count,
                n.mean_status_count,
                false,
            ),
            ("No followers", p.no_followers_pct, n.no_followers_pct, true),
            ("No friends", p.no_friends_pct, n.no_friends_pct, true),
            (
                "No favorites",
                p.no_favourites_pct,
                n.no_favourites_pct,
                true,
            ),
            ("No location", p.no_location_pct, n.no_location_pct, true),
            ("No profile banner", p.no_banner_pct, n.no_banner_pct, true),
            ("No URL", p.no_url_pct, n.no_url_pct, true),
            (
                "Customized theme",
                p.customized_theme_pct,
                n.customized_theme_pct,
                true,
            ),
            (
                "Default profile image",
                p.default_image_pct,
                n.default_image_pct,
                true,
            ),
            (
                "Name < 3 chars",
                p.name_shorter_than_3_pct,
                n.name_shorter_than_3_pct,
                true,
            ),
            (
                "Name > 20 chars",
                p.name_longer_than_20_pct,
                n.name_longer_than_20_pct,
                true,
            ),
            (
                "< 10 tweets",
                p.under_10_statuses_pct,
                n.under_10_statuses_pct,
                true,
            ),
            (
                "< 100 tweets",
                p.under_100_statuses_pct,
                n.under_100_statuses_pct,
                true,
            ),
            (
                "Created since 2019",
                p.created_since_2019_pct,
                n.created_since_2019_pct,
                true,
            ),
            (
                "Verified",
                p.verified_count as f64,
                n.verified_count as f64,
                false,
            ),
        ];
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:>12} {:>12} {:>8}",
            "Attribute", "Positive", "Negative", "Pos/Neg"
        );
        for (name, pv, nv, is_pct) in rows {
            let fmt = |v: f64| {
                if is_pct {
                    format!("{v:.2} %")
                } else if v.fract() == 0.0 {
                    format!("{v:.0}")
                } else {
                    format!("{v:.2}")
                }
            };
            let ratio = if nv == 0.0 {
                "n/a".to_string()
            } else {
                format!("{:.2}", pv / nv)
            };
            let _ = writeln!(
                out,
                "{:<24} {:>12} {:>12} {:>8}",
                name,
                fmt(pv),
                fmt(nv),
                ratio
            );
        }
        let _ = writeln!(
            out,
            "skipped (no profile): {}",
            self.skipped_without_profile
        );
        out
    }
}

/// Markdown table with one row per report: TPR, TNR, FPR, FNR, then
/// accuracy, precision, recall and F1 as percentages.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut out =
        String::from("| Method | TPR | TNR | FPR | FNR | Acc. % | Prec. % | Rec. % | F1 % |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    let rate = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.2}"));
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.2}", 100.0 * x));
    for r in reports {
        let m = &r.micro;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.name,
            rate(m.tpr),
            rate(m.tnr),
            rate(m.fpr),
            rate(m.fnr),
            pct(m.accuracy),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1)
        );
    }
    out
}

/// Groups record indices by class, for callers that need counts per class.
pub fn class_counts(labels: &[Label]) -> HashMap<Label, usize> {
    let mut counts = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TweetRecord;
    use proptest::prelude::*;
    use Label::{Negative as N, Positive as P};

    fn cm(tp: usize, fp: usize, fn_: usize, tn: usize) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    #[test]
    fn metrics_example() {
        let m = metrics(&cm(2, 1, 1, 6));
        assert_eq!(m.accuracy, Some(0.8));
        assert!((m.precision.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn undefined_ratios_are_absent() {
        let m = metrics(&cm(0, 0, 3, 4));
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.recall, Some(0.0));
        let empty = metrics(&ConfusionMatrix::default());
        assert_eq!(empty, MetricsReport::default());
    }

    #[test]
    fn from_predictions_counts() {
        let c = ConfusionMatrix::from_predictions(&[P, P, N, N], &[P, N, P, N]).unwrap();
        assert_eq!(c, cm(1, 1, 1, 1));
        assert!(ConfusionMatrix::from_predictions(&[P], &[]).is_err());
    }

    #[test]
    fn stratified_exact_division() {
        let labels: Vec<Label> = (0..20).map(|i| if i < 10 { P } else { N }).collect();
        let folds = stratified_kfold(&labels, 5, 3).unwrap();
        for fold in &folds.test_indices {
            assert_eq!(fold.iter().filter(|&&i| labels[i] == P).count(), 2);
            assert_eq!(fold.iter().filter(|&&i| labels[i] == N).count(), 2);
        }
    }

    #[test]
    fn stratified_rejects_small_class() {
        let labels: Vec<Label> = (0..13).map(|i| if i < 3 { P } else { N }).collect();
        assert!(matches!(
            stratified_kfold(&labels, 5, 0),
            Err(Error::ClassTooSmall { size: 3, k: 5, .. })
        ));
        assert!(stratified_kfold(&labels, 1, 0).is_err());
    }

    #[test]
    fn stratified_is_seeded() {
        let labels: Vec<Label> = (0..40).map(|i| if i % 3 == 0 { P } else { N }).collect();
        assert_eq!(
            stratified_kfold(&labels, 4, 9).unwrap(),
            stratified_kfold(&labels, 4, 9).unwrap()
        );
        assert_ne!(
            stratified_kfold(&labels, 4, 9).unwrap(),
            stratified_kfold(&labels, 4, 10).unwrap()
        );
    }

    #[test]
    fn combine_overrule_examples() {
        assert_eq!(combine_overrule(Some(P), N), P);
        assert_eq!(combine_overrule(None, P), P);
        assert_eq!(combine_overrule(Some(N), P), N);
    }

    #[test]
    fn t_statistic_worked_example() {
        let t = five_by_two_t_statistic(&[[0.1, 0.2]; 5]).unwrap();
        // 0.1 / sqrt((1/5)(5 · 0.005))
        assert!((t.t_value - 0.1 / 0.005f64.sqrt()).abs() < 1e-12);
        assert!((t.t_value - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(t.degrees_of_freedom, 5);
    }

    #[test]
    fn t_statistic_degenerate() {
        assert!(matches!(
            five_by_two_t_statistic(&[[0.0, 0.0]; 5]),
            Err(Error::DegenerateVariance)
        ));
        assert!(matches!(
            five_by_two_t_statistic(&[[0.3, 0.3]; 5]),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn identical_detectors_are_degenerate() {
        let labels: Vec<Label> = (0..20).map(|i| if i % 2 == 0 { P } else { N }).collect();
        let d = FixedDetector {
            labels: (0..20).map(|i| if i % 3 == 0 { P } else { N }).collect(),
        };
        assert!(matches!(
            five_by_two_ttest(&d, &d, &labels, 1),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn fleiss_examples() {
        assert_eq!(
            fleiss_kappa(&[vec![3, 0], vec![0, 3], vec![3, 0]]).unwrap(),
            1.0
        );
        assert_eq!(fleiss_kappa(&[vec![2, 0], vec![2, 0]]).unwrap(), 1.0);
        assert_eq!(fleiss_kappa(&[vec![1, 1], vec![1, 1]]).unwrap(), -1.0);
        assert!(matches!(
            fleiss_kappa(&[vec![2, 1], vec![1, 1]]),
            Err(Error::RaggedRatings { item: 1, .. })
        ));
        assert!(fleiss_kappa(&[]).is_err());
        assert!(fleiss_kappa(&[vec![1, 0]]).is_err());
    }

    #[test]
    fn cohen_examples() {
        assert_eq!(cohen_kappa(&[P, N, N], &[P, N, N]).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[P, P, N, N], &[P, N, P, N]).unwrap(), 0.0);
        assert!(cohen_kappa(&[P], &[P, N]).is_err());
        assert!(cohen_kappa(&[], &[]).is_err());
    }

    fn rec(id: &str, text: &str, category: Category) -> TweetRecord {
        TweetRecord::new(id, text, category).with_label(P)
    }

    #[test]
    fn annotation_sample_picks_outlier() {
        let corpus = LabeledCorpus::from_records(vec![
            rec("a", "your ip is here", Category::Ip),
            rec("b", "your ip is here", Category::Ip),
            rec("c", "totally different words", Category::Ip),
            rec("s1", "ssn leaked again", Category::Ssn),
        ])
        .unwrap();
        assert_eq!(
            select_annotation_sample(&corpus, 1).unwrap(),
            vec!["s1", "c"]
        );
        assert!(matches!(
            select_annotation_sample(&corpus, 2),
            Err(Error::InsufficientRecords { .. })
        ));
    }

    #[test]
    fn cosine_definition() {
        let bag = |words: &[&str]| -> BTreeMap<String, f64> {
            let mut b = BTreeMap::new();
            for w in words {
                *b.entry(w.to_string()).or_insert(0.0) += 1.0;
            }
            b
        };
        let norm = |b: &BTreeMap<String, f64>| b.values().map(|c| c * c).sum::<f64>().sqrt();
        let v = bag(&["a", "b", "b"]);
        assert!((cosine(&v, norm(&v), &v, norm(&v)) - 1.0).abs() < 1e-15);
        let w = bag(&["c"]);
        assert_eq!(cosine(&v, norm(&v), &w, norm(&w)), 0.0);
    }

    fn author(year: i32, name: &str) -> AuthorProfile {
        AuthorProfile {
            created_year: year,
            name: Some(name.into()),
            statuses_count: 50,
            ..Default::default()
        }
    }

    #[test]
    fn user_attributes_examples() {
        let corpus = LabeledCorpus::from_records(vec![
            rec("1", "x", Category::Ip).with_author(author(2020, "ab"))
        ])
        .unwrap();
        let table = user_attribute_report(&corpus);
        assert_eq!(table.positive.unique_users, 1);
        assert_eq!(table.positive.created_since_2019_pct, 100.0);
        assert_eq!(table.positive.name_shorter_than_3_pct, 100.0);
        assert_eq!(table.positive.under_100_statuses_pct, 100.0);
        assert_eq!(table.positive.under_10_statuses_pct, 0.0);
        assert_eq!(table.negative, ClassAttributes::default());

        let empty = user_attribute_report(&LabeledCorpus::default());
        assert_eq!(empty, AttributeTable::default());
        assert!(empty.render().contains("Unique users"));
    }

    #[test]
    fn user_attributes_dedupe_users() {
        let mut a = author(2015, "someone");
        a.user_id = Some("u1".into());
        let corpus = LabeledCorpus::from_records(vec![
            rec("1", "x", Category::Ip).with_author(a.clone()),
            rec("2", "y", Category::Ip).with_author(a),
            rec("3", "z", Category::Ip),
        ])
        .unwrap();
        let table = user_attribute_report(&corpus);
        assert_eq!(table.positive.total_samples, 3);
        assert_eq!(table.positive.unique_users, 1);
        assert_eq!(table.skipped_without_profile, 1);
        assert_eq!(table.positive.created_since_2019_pct, 0.0);
    }

    #[test]
    fn cross_validation_of_fixed_detector() {
        let labels: Vec<Label> = (0..30).map(|i| if i % 3 == 0 { P } else { N }).collect();
        let perfect = FixedDetector {
            labels: labels.clone(),
        };
        let report = cross_validate_detector("perfect", &perfect, &labels, 5, 1, false).unwrap();
        assert_eq!(report.micro.accuracy, Some(1.0));
        assert_eq!(report.folds.len(), 5);
        let parallel = cross_validate_detector("perfect", &perfect, &labels, 5, 1, true).unwrap();
        assert_eq!(report, parallel);
    }

    #[test]
    fn comparison_table_rows() {
        let labels = vec![P, N];
        let d = FixedDetector { labels: vec![P, P] };
        let report = evaluate_whole("Heuristics", &d, &labels, 0).unwrap();
        let table = comparison_table(&[report]);
        assert!(table.contains(
            "| Heuristics | 1.00 | 0.00 | 1.00 | 0.00 | 50.00 | 50.00 | 100.00 | 66.67 |"
        ));
    }

    proptest! {
        #[test]
        fn folds_partition_indices(flags in proptest::collection::vec(any::<bool>(), 10..80), k in 2usize..5, seed in any::<u64>()) {
            let labels: Vec<Label> = flags.iter().map(|&b| if b { P } else { N }).collect();
            let counts = class_counts(&labels);
            prop_assume!(counts.values().all(|&c| c >= k) && counts.len() == 2);
            let folds = stratified_kfold(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = folds.test_indices.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for class in [P, N] {
                let share = counts[&class] as f64 / k as f64;
                for fold in &folds.test_indices {
                    let c = fold.iter().filter(|&&i| labels[i] == class).count() as f64;
                    prop_assert!((c - share).abs() < 1.0);
                }
            }
        }

        #[test]
        fn metric_identities(tp in 0usize..500, fp in 0usize..500, fn_ in 0usize..500, tn in 0usize..500) {
            let c = cm(tp, fp, fn_, tn);
            let m = metrics(&c);
            if tp + fn_ > 0 {
                prop_assert!((m.tpr.unwrap() + m.fnr.unwrap() - 1.0).abs() < 1e-12);
            }
            if tn + fp > 0 {
                prop_assert!((m.tnr.unwrap() + m.fpr.unwrap() - 1.0).abs() < 1e-12);
            }
            if c.total() > 0 {
                prop_assert!((m.accuracy.unwrap() - (tp + tn) as f64 / c.total() as f64).abs() < 1e-12);
            }
        }

        #[test]
        fn t_test_is_antisymmetric(values in proptest::collection::vec(0.0f64..1.0, 20)) {
            let mut a = [[0.0; 2]; 5];
            let mut b = [[0.0; 2]; 5];
            for i in 0..5 {
                for j in 0..2 {
                    a[i][j] = values[i * 2 + j];
                    b[i][j] = values[10 + i * 2 + j];
                }
            }
            if let Ok(ab) = five_by_two_from_errors(&a, &b) {
                let ba = five_by_two_from_errors(&b, &a).unwrap();
                prop_assert_eq!(ab.t_value, -ba.t_value);
            }
        }

        #[test]
        fn kappas_invariant_under_item_order(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..30), seed in any::<u64>()) {
            let a: Vec<Label> = pairs.iter().map(|p| if p.0 { P } else { N }).collect();
            let b: Vec<Label> = pairs.iter().map(|p| if p.1 { P } else { N }).collect();
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a2: Vec<Label> = order.iter().map(|&i| a[i]).collect();
            let b2: Vec<Label> = order.iter().map(|&i| b[i]).collect();
            prop_assert!((cohen_kappa(&a, &b).unwrap() - cohen_kappa(&a2, &b2).unwrap()).abs() < 1e-12);

            let ratings: Vec<Vec<usize>> = pairs.iter().map(|p| {
                let pos = usize::from(p.0) + usize::from(p.1);
                vec![pos, 2 - pos]
            }).collect();
            let shuffled: Vec<Vec<usize>> = order.iter().map(|&i| ratings[i].clone()).collect();
            prop_assert!((fleiss_kappa(&ratings).unwrap() - fleiss_kappa(&shuffled).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn annotation_sample_ignores_input_order(texts in proptest::collection::vec("[a-c ]{1,12}", 3..10), seed in any::<u64>()) {
            let texts: Vec<String> = texts.into_iter().map(|t| format!("w{t}")).collect();
            let records: Vec<TweetRecord> = texts.iter().enumerate().map(|(i, t)| rec(&format!("r{i:02}"), t, if i % 2 == 0 { Category::Ip } else { Category::Ssn })).collect();
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = select_annotation_sample(&LabeledCorpus::from_records(records).unwrap(), 1).unwrap();
            let b = select_annotation_sample(&LabeledCorpus::from_records(shuffled).unwrap(), 1).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
