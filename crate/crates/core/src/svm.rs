//! L2-regularized linear support-vector classifier trained by dual coordinate
//! descent (random permutation each epoch, with shrinking).
//!
//! The primal problem is
//!
//! ```text
//! min_w  ½‖w‖² + C Σᵢ loss(yᵢ w·xᵢ)
//! ```
//!
//! with `loss(m) = max(0, 1 − m)²` (squared hinge, default) or
//! `max(0, 1 − m)` (hinge). When `fit_bias` is set every sample gets an
//! appended constant feature `1.0`, so the bias is regularized like any other
//! weight.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::FeatureScheme;

const MODEL_MAGIC: &str = "doxwatch-linear-model";
const MODEL_VERSION: u32 = 1;
const BIAS_FEATURE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SquaredHinge,
    Hinge,
}

impl Loss {
    fn as_str(self) -> &'static str {
        match self {
            Loss::SquaredHinge => "squared_hinge",
            Loss::Hinge => "hinge",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "squared_hinge" => Some(Loss::SquaredHinge),
            "hinge" => Some(Loss::Hinge),
            _ => None,
        }
    }

    /// Loss of one sample at functional margin `margin = y·w·x`.
    pub fn value(self, margin: f64) -> f64 {
        let slack = (1.0 - margin).max(0.0);
        match self {
            Loss::SquaredHinge => slack * slack,
            Loss::Hinge => slack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub c: f64,
    pub loss: Loss,
    pub tol: f64,
    pub max_iter: usize,
    pub fit_bias: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            loss: Loss::SquaredHinge,
            tol: 1e-4,
            max_iter: 1000,
            fit_bias: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Feature weights, followed by the bias weight when `config.fit_bias`.
    pub weights: Vec<f64>,
    pub dim: usize,
    pub config: TrainConfig,
    pub feature_scheme: FeatureScheme,
    pub ruleset_hash: Option<String>,
    /// Coordinate names for named schemes (one-hot), in index order.
    pub feature_names: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LinearModel,
    pub converged: bool,
    pub epochs: usize,
    /// Dual objective after each epoch.
    pub dual_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains on rows `x` with labels `y`. The rows must share one dimension.
pub fn train<R: AsRef<[f64]>>(
    x: &[R],
    y: &[Label],
    scheme: FeatureScheme,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TrainInput(format!(
            "need at least 2 samples, got {}",
            x.len()
        )));
    }
    let dim = x[0].as_ref().len();
    if let Some(row) = x.iter().find(|r| r.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: row.as_ref().len(),
        });
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass);
    }

    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            let mut row = r.as_ref().to_vec();
            if config.fit_bias {
                row.push(BIAS_FEATURE);
            }
            row
        })
        .collect();
    let signs: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let solution = solve_dual(&rows, &signs, config);

    Ok(TrainOutcome {
        model: LinearModel {
            weights: solution.weights,
            dim,
            config: *config,
            feature_scheme: scheme,
            ruleset_hash: None,
            feature_names: None,
        },
        converged: solution.converged,
        epochs: solution.epochs,
        dual_history: solution.dual_history,
    })
}

struct DualSolution {
    weights: Vec<f64>,
    converged: bool,
    epochs: usize,
    dual_history: Vec<f64>,
}

fn solve_dual(rows: &[Vec<f64>], signs: &[f64], config: &TrainConfig) -> DualSolution {
    let n = rows.len();
    let width = rows[0].len();
    // Squared hinge adds 1/(2C) to the Hessian diagonal and leaves alpha unbounded.
    let (diag, upper) = match config.loss {
        Loss::SquaredHinge => (0.5 / config.c, f64::INFINITY),
        Loss::Hinge => (0.0, config.c),
    };

    let q_diag: Vec<f64> = rows.iter().map(|r| diag + dot(r, r)).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; width];
    let mut index: Vec<usize> = (0..n).collect();
    let mut active = n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut epochs = 0;
    let mut converged = false;
    let mut dual_history = Vec::new();

    while epochs < config.max_iter {
        let mut pg_max_new = f64::NEG_INFINITY;
        let mut pg_min_new = f64::INFINITY;
        index[..active].shuffle(&mut rng);

        let mut s = 0;
        while s < active {
            let i = index[s];
            let g = signs[i] * dot(&w, &rows[i]) - 1.0 + alpha[i] * diag;

            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == upper {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max_new = pg_max_new.max(pg);
            pg_min_new = pg_min_new.min(pg);

            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = if q_diag[i] > 0.0 {
                    (old - g / q_diag[i]).max(0.0).min(upper)
                } else if g < 0.0 {
                    upper
                } else {
                    0.0
                };
                let step = (alpha[i] - old) * signs[i];
                w.iter_mut()
                    .zip(&rows[i])
                    .for_each(|(wj, xj)| *wj += step * xj);
            }
            s += 1;
        }

        epochs += 1;
        dual_history.push(dual_objective(&alpha, &w, diag));

        if pg_max_new - pg_min_new <= config.tol {
            if active == n {
                converged = true;
                break;
            }
            active = n;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max_new <= 0.0 {
            f64::INFINITY
        } else {
            pg_max_new
        };
        pg_min_old = if pg_min_new >= 0.0 {
            f64::NEG_INFINITY
        } else {
            pg_min_new
        };
    }

    DualSolution {
        weights: w,
        converged,
        epochs,
        dual_history,
    }
}

/// `Σα − ½‖w‖² − ½·diag·Σα²`, the quantity the coordinate updates increase.
fn dual_objective(alpha: &[f64], w: &[f64], diag: f64) -> f64 {
    let sum: f64 = alpha.iter().sum();
    let sq: f64 = alpha.iter().map(|a| a * a).sum();
    sum - 0.5 * dot(w, w) - 0.5 * diag * sq
}

impl LinearModel {
    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn bias(&self) -> f64 {
        if self.config.fit_bias {
            self.weights[self.dim] * BIAS_FEATURE
        } else {
            0.0
        }
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(dot(&self.weights[..self.dim], x) + self.bias())
    }

    /// Positive iff the decision value is strictly above zero.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.decision_value(x).map(Label::from_sign)
    }

    /// `½‖w‖² + C Σ loss` over the given samples, bias included in `w`.
    pub fn primal_objective<R: AsRef<[f64]>>(&self, x: &[R], y: &[Label]) -> Result<f64> {
        let mut total = 0.5 * dot(&self.weights, &self.weights);
        for (row, label) in x.iter().zip(y) {
            let margin = label.sign() * self.decision_value(row.as_ref())?;
            total += self.config.c * self.config.loss.value(margin);
        }
        Ok(total)
    }

    /// Serializes to the versioned text model format. Weights carry 17
    /// significant digits so they reload bit-exactly.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC} v{MODEL_VERSION}");
        let _ = writeln!(s, "scheme {}", self.feature_scheme);
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "fit_bias {}", self.config.fit_bias);
        let _ = writeln!(s, "c {:.16e}", self.config.c);
        let _ = writeln!(s, "loss {}", self.config.loss.as_str());
        let _ = writeln!(s, "tol {:.16e}", self.config.tol);
        let _ = writeln!(s, "max_iter {}", self.config.max_iter);
        let _ = writeln!(s, "seed {}", self.config.seed);
        let _ = writeln!(
            s,
            "ruleset_hash {}",
            self.ruleset_hash.as_deref().unwrap_or("-")
        );
        match &self.feature_names {
            Some(names) => {
                let _ = writeln!(s, "features {}", names.len());
                for name in names {
                    let _ = writeln!(s, "{}", serde_json::Value::from(name.as_str()));
                }
            }
            None => {
                let _ = writeln!(s, "features -");
            }
        }
        let _ = writeln!(s, "weights {}", self.weights.len());
        for w in &self.weights {
            let _ = writeln!(s, "{w:.16e}");
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let mut it = lines.iter().map(String::as_str);
        let bad = |m: &str| Error::ModelFormat(m.to_string());

        let header = it.next().ok_or_else(|| bad("empty file"))?;
        if header != format!("{MODEL_MAGIC} v{MODEL_VERSION}") {
            return Err(bad(&format!("unrecognized header {header:?}")));
        }
        fn next_field<'a>(it: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<String> {
            let bad = |m: String| Error::ModelFormat(m);
            let line = it.next().ok_or_else(|| bad(format!("missing {key}")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected {key}, got {line:?}")))
        }
        let mut field = |key: &str| next_field(&mut it, key);
        let parse_num = |key: &str, v: String| -> Result<f64> {
            v.parse().map_err(|_| bad(&format!("bad {key} {v:?}")))
        };

        let scheme = field("scheme")?;
        let feature_scheme =
            FeatureScheme::parse(&scheme).ok_or_else(|| bad(&format!("bad scheme {scheme:?}")))?;
        let dim: usize = field("dim")?.parse().map_err(|_| bad("bad dim"))?;
        let fit_bias: bool = field("fit_bias")?
            .parse()
            .map_err(|_| bad("bad fit_bias"))?;
        let c = parse_num("c", field("c")?)?;
        let loss_str = field("loss")?;
        let loss = Loss::parse(&loss_str).ok_or_else(|| bad(&format!("bad loss {loss_str:?}")))?;
        let tol = parse_num("tol", field("tol")?)?;
        let max_iter: usize = field("max_iter")?
            .parse()
            .map_err(|_| bad("bad max_iter"))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| bad("bad seed"))?;
        let hash = field("ruleset_hash")?;
        let ruleset_hash = (hash != "-").then_some(hash);

        let features = next_field(&mut it, "features")?;
        let feature_names = if features == "-" {
            None
        } else {
            let count: usize = features.parse().map_err(|_| bad("bad feature count"))?;
            let mut names = Vec::with_capacity(count);
            for _ in 0..count {
                let line = it.next().ok_or_else(|| bad("truncated feature list"))?;
                let name: String =
                    serde_json::from_str(line).map_err(|_| bad("bad feature name"))?;
                names.push(name);
            }
            Some(names)
        };

        let count: usize = next_field(&mut it, "weights")?
            .parse()
            .map_err(|_| bad("bad weight count"))?;
        let weights = (0..count)
            .map(|_| {
                let line = it.next().ok_or_else(|| bad("truncated weights"))?;
                line.parse::<f64>()
                    .map_err(|_| bad(&format!("bad weight {line:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if it.any(|l| !l.trim().is_empty()) {
            return Err(bad("trailing content"));
        }
        if weights.len() != dim + usize::from(fit_bias) {
            return Err(bad("weight count inconsistent with dim and fit_bias"));
        }
        if feature_names.as_ref().is_some_and(|n| n.len() != dim) {
            return Err(bad("feature count inconsistent with dim"));
        }
        let config = TrainConfig {
            c,
            loss,
            tol,
            max_iter,
            fit_bias,
            seed,
        };
        config.validate()?;
        Ok(LinearModel {
            weights,
            dim,
            config,
            feature_scheme,
            ruleset_hash,
            feature_names,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fit(x: &[Vec<f64>], y: &[Label], config: &TrainConfig) -> TrainOutcome {
        train(x, y, FeatureScheme::DocPool, config).unwrap()
    }

    fn model(weights: Vec<f64>, dim: usize, fit_bias: bool) -> LinearModel {
        LinearModel {
            weights,
            dim,
            config: TrainConfig {
                fit_bias,
                ..Default::default()
            },
            feature_scheme: FeatureScheme::DocPool,
            ruleset_hash: None,
            feature_names: None,
        }
    }

    use Label::{Negative as N, Positive as P};

    #[test]
    fn decision_value_examples() {
        assert_eq!(
            model(vec![1.0, -1.0], 2, false)
                .decision_value(&[3.0, 1.0])
                .unwrap(),
            2.0
        );
        assert_eq!(
            model(vec![0.0, 0.0], 2, false)
                .decision_value(&[7.0, -3.0])
                .unwrap(),
            0.0
        );
        assert_eq!(
            model(vec![4.0, 0.5], 1, true)
                .decision_value(&[0.0])
                .unwrap(),
            0.5
        );
        assert!(model(vec![1.0], 1, false)
            .decision_value(&[1.0, 2.0])
            .is_err());
    }

    #[test]
    fn predict_tie_is_negative() {
        assert_eq!(model(vec![2.0], 1, false).predict(&[1.0]).unwrap(), P);
        assert_eq!(model(vec![-0.1], 1, false).predict(&[1.0]).unwrap(), N);
        assert_eq!(model(vec![0.0], 1, false).predict(&[1.0]).unwrap(), N);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = TrainConfig::default();
        let single = train(
            &[vec![1.0], vec![2.0]],
            &[P, P],
            FeatureScheme::DocPool,
            &cfg,
        );
        assert!(matches!(single, Err(Error::SingleClass)));
        let ragged = train(
            &[vec![1.0], vec![2.0, 1.0]],
            &[P, N],
            FeatureScheme::DocPool,
            &cfg,
        );
        assert!(matches!(ragged, Err(Error::DimensionMismatch { .. })));
        let one = train(&[vec![1.0]], &[P], FeatureScheme::DocPool, &cfg);
        assert!(one.is_err());
        let bad_c = TrainConfig { c: 0.0, ..cfg };
        assert!(train(
            &[vec![1.0], vec![2.0]],
            &[P, N],
            FeatureScheme::DocPool,
            &bad_c
        )
        .is_err());
    }

    fn tight() -> TrainConfig {
        TrainConfig {
            tol: 1e-12,
            max_iter: 100_000,
            ..Default::default()
        }
    }

    #[test]
    fn symmetric_1d_problem() {
        // By symmetry b = 0; then ½w² + 2(1 − 2w)² is minimized at w = 8/17.
        for (cfg, eps) in [(TrainConfig::default(), 1e-3), (tight(), 1e-9)] {
            let out = fit(&[vec![-2.0], vec![2.0]], &[N, P], &cfg);
            assert!(out.converged);
            let m = &out.model;
            assert!((m.weights[0] - 8.0 / 17.0).abs() < eps, "{:?}", m.weights);
            assert!(m.bias().abs() < eps);
            assert_eq!(m.predict(&[-2.0]).unwrap(), N);
            assert_eq!(m.predict(&[2.0]).unwrap(), P);
        }
    }

    #[test]
    fn contradictory_data_gives_zero_model() {
        // Every x appears with both labels, so the objective is even in (w, b)
        // and its unique minimizer is 0.
        let x = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]];
        let y = vec![P, N, P, N];
        let out = fit(&x, &y, &tight());
        assert!(
            out.model.weights.iter().all(|w| w.abs() < 1e-9),
            "{:?}",
            out.model.weights
        );
        for row in &x {
            assert!(out.model.decision_value(row).unwrap().abs() < 1e-9);
        }
        let zero = model(vec![0.0, 0.0], 1, true);
        for row in &x {
            assert_eq!(zero.decision_value(row).unwrap(), 0.0);
            assert_eq!(zero.predict(row).unwrap(), N);
        }
    }

    #[test]
    fn separable_2d_boundary_is_x_axis() {
        // w = (0, 4/5), b = 0 minimizes ½w₂² + 2(1 − w₂)².
        let out = fit(&[vec![0.0, 1.0], vec![0.0, -1.0]], &[P, N], &tight());
        let m = &out.model;
        assert!(m.decision_value(&[5.0, 0.0]).unwrap().abs() < 1e-9);
        assert!((m.weights[1] - 0.8).abs() < 1e-9);
        assert_eq!(m.weights[0], 0.0);
    }

    #[test]
    fn hinge_loss_trains() {
        let cfg = TrainConfig {
            loss: Loss::Hinge,
            ..Default::default()
        };
        let out = fit(
            &[vec![-2.0], vec![-1.0], vec![1.5], vec![3.0]],
            &[N, N, P, P],
            &cfg,
        );
        assert!(out.converged);
        assert_eq!(out.model.predict(&[-1.0]).unwrap(), N);
        assert_eq!(out.model.predict(&[1.5]).unwrap(), P);
    }

    #[test]
    fn unconverged_run_reports_status() {
        let cfg = TrainConfig {
            max_iter: 1,
            tol: 1e-12,
            ..Default::default()
        };
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()])
            .collect();
        let y: Vec<Label> = (0..20).map(|i| if i % 3 == 0 { P } else { N }).collect();
        let out = fit(&x, &y, &cfg);
        assert!(!out.converged);
        assert_eq!(out.epochs, 1);
    }

    #[test]
    fn model_file_roundtrip_is_exact() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 1.3).sin(), (i as f64).ln_1p()])
            .collect();
        let y: Vec<Label> = (0..12).map(|i| if i % 2 == 0 { P } else { N }).collect();
        let mut m = fit(&x, &y, &TrainConfig::default()).model;
        m.ruleset_hash = Some("abc123".into());
        m.feature_names = Some(vec!["dox".into(), "say \"hi\"".into()]);
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = LinearModel::read(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("doxwatch-linear-model v1\n"));
    }

    #[test]
    fn model_file_rejects_corruption() {
        let m = model(vec![1.0, 2.0, 0.5], 2, true);
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(LinearModel::read(text.replace("dim 2", "dim 3").as_bytes()).is_err());
        assert!(LinearModel::read(text.replace("v1", "v9").as_bytes()).is_err());
        assert!(LinearModel::read(text.replace("hinge", "logistic").as_bytes()).is_err());
        let truncated: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        assert!(LinearModel::read(truncated.as_bytes()).is_err());
    }

    fn arb_problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Label>)> {
        (2usize..16)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 2), n),
                    proptest::collection::vec(any::<bool>(), n),
                )
            })
            .prop_map(|(x, mut flags)| {
                flags[0] = true;
                flags[1] = false;
                let y = flags.into_iter().map(|b| if b { P } else { N }).collect();
                (x, y)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dual_objective_never_decreases((x, y) in arb_problem(), seed in any::<u64>()) {
            let cfg = TrainConfig { seed, ..Default::default() };
            let out = fit(&x, &y, &cfg);
            for pair in out.dual_history.windows(2) {
                prop_assert!(pair[1] >= pair[0] - 1e-12 * pair[0].abs().max(1.0));
            }
        }

        #[test]
        fn training_is_bitwise_deterministic((x, y) in arb_problem(), seed in any::<u64>()) {
            let cfg = TrainConfig { seed, ..Default::default() };
            let a = fit(&x, &y, &cfg).model.weights;
            let b = fit(&x, &y, &cfg).model.weights;
            prop_assert_eq!(a.iter().map(|w| w.to_bits()).collect::<Vec<_>>(), b.iter().map(|w| w.to_bits()).collect::<Vec<_>>());
        }

        #[test]
        fn zero_padding_preserves_predictions((x, y) in arb_problem(), pad in 1usize..4, probe in proptest::collection::vec(-3.0f64..3.0, 2)) {
            let cfg = TrainConfig::default();
            let m = fit(&x, &y, &cfg).model;
            let mut padded = m.clone();
            padded.dim += pad;
            let bias = padded.config.fit_bias.then(|| padded.weights.pop().unwrap());
            padded.weights.extend(std::iter::repeat_n(0.0, pad));
            padded.weights.extend(bias);
            let mut probe_padded = probe.clone();
            probe_padded.extend(std::iter::repeat_n(0.0, pad));
            prop_assert_eq!(m.predict(&probe).unwrap(), padded.predict(&probe_padded).unwrap());

            // Training on zero-padded rows learns zero weights for the padding.
            let xp: Vec<Vec<f64>> = x.iter().map(|r| { let mut r = r.clone(); r.extend(std::iter::repeat_n(0.0, pad)); r }).collect();
            let mp = fit(&xp, &y, &cfg).model;
            prop_assert!(mp.weights[2..2 + pad].iter().all(|&w| w == 0.0));
            prop_assert_eq!(mp.predict(&probe_padded).unwrap(), m.predict(&probe).unwrap());
        }
    }
}
