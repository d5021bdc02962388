// SPDX-License-Identifier: Apache-2.0

//! Class-weighted soft-margin SVM with an RBF kernel.
//!
//! Per-sample box bound is `C * class_weight(y)`. Trojan is the positive class;
//! [`TrainedSvm::classify`] reports trojan iff the decision value is positive.

mod grid;
mod smo;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{Class, ClassMap};
use crate::featex::{FeatureSet, FeatureVector};

pub use grid::{cross_validate, grid_search, stratified_folds, Gamma, GridPoint, GridResult, GridSpec};
pub use smo::{dual_objective, SolverStatus};

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("no training samples")]
    Empty,
    #[error("training data contains only {0} samples")]
    SingleClass(Class),
    #[error("expected {expected} features, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("{0} labels for {1} samples")]
    LabelCount(usize, usize),
    #[error("invalid kernel parameters: {0}")]
    Params(String),
    #[error("cannot form {folds} stratified folds: {class} has only {count} samples")]
    FoldLacksClass { folds: usize, class: Class, count: usize },
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("malformed model: {0}")]
    Model(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub class_weight: ClassMap<f64>,
}

impl KernelParams {
    pub fn new(gamma: f64, c: f64, class_weight: ClassMap<f64>) -> Self {
        Self { gamma, c, class_weight }
    }

    /// Unit class weights.
    pub fn unweighted(gamma: f64, c: f64) -> Self {
        Self::new(gamma, c, ClassMap::new(1.0, 1.0))
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.gamma) {
            return Err(SvmError::Params(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !ok(self.c) {
            return Err(SvmError::Params(format!("C must be positive, got {}", self.c)));
        }
        if !ok(self.class_weight.t) || !ok(self.class_weight.n) {
            return Err(SvmError::Params("class weights must be positive".into()));
        }
        Ok(())
    }

    /// Box bound for a sample of `class`.
    pub fn bound(&self, class: Class) -> f64 {
        self.c * self.class_weight.get(class)
    }
}

/// Per-dimension z-score standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    /// Population mean and standard deviation; constant columns get std 1.
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let dim = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let means: Vec<f64> = (0..dim).map(|d| x.iter().map(|r| r[d]).sum::<f64>() / n).collect();
        let stds = (0..dim)
            .map(|d| {
                let var = x.iter().map(|r| (r[d] - means[d]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, stds }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Maximum number of pair updates.
    pub max_iter: u64,
    pub standardize: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 1_000_000,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSvm {
    pub mask: FeatureSet,
    pub params: KernelParams,
    pub scaler: Scaler,
    /// Support vectors in standardized space.
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
}

pub(crate) fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl TrainedSvm {
    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    /// Decision value for an already projected (unscaled) sample.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.dim() {
            return Err(SvmError::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let z = self.scaler.apply(x);
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * rbf(self.params.gamma, sv, &z))
            .sum::<f64>()
            + self.bias)
    }

    /// Decision value for a full feature vector, projected through the mask.
    pub fn decision(&self, v: &FeatureVector) -> f64 {
        self.decision_value(&self.mask.project(v))
            .expect("projection matches mask")
    }

    pub fn classify(&self, v: &FeatureVector) -> Class {
        class_of(self.decision(v))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDoc::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SvmError> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| SvmError::Model(e.to_string()))?;
        doc.try_into()
    }
}

pub fn class_of(decision: f64) -> Class {
    if decision > 0.0 {
        Class::Trojan
    } else {
        Class::NonTrojan
    }
}

/// On-disk model layout.
#[derive(Serialize, Deserialize)]
struct ModelDoc {
    mask: FeatureSet,
    gamma: f64,
    #[serde(rename = "C")]
    c: f64,
    class_weight: ClassMap<f64>,
    scaler: Scaler,
    svs: Vec<Vec<f64>>,
    dual_coefs: Vec<f64>,
    bias: f64,
}

impl From<&TrainedSvm> for ModelDoc {
    fn from(m: &TrainedSvm) -> Self {
        ModelDoc {
            mask: m.mask,
            gamma: m.params.gamma,
            c: m.params.c,
            class_weight: m.params.class_weight,
            scaler: m.scaler.clone(),
            svs: m.support_vectors.clone(),
            dual_coefs: m.dual_coefs.clone(),
            bias: m.bias,
        }
    }
}

impl TryFrom<ModelDoc> for TrainedSvm {
    type Error = SvmError;

    fn try_from(d: ModelDoc) -> Result<Self, SvmError> {
        let dim = d.mask.len();
        if d.svs.len() != d.dual_coefs.len() {
            return Err(SvmError::Model("svs and dual_coefs differ in length".into()));
        }
        if d.svs.iter().any(|sv| sv.len() != dim) || d.scaler.means.len() != dim || d.scaler.stds.len() != dim {
            return Err(SvmError::Model(format!("vectors must have {dim} components")));
        }
        let params = KernelParams::new(d.gamma, d.c, d.class_weight);
        params.validate()?;
        Ok(TrainedSvm {
            mask: d.mask,
            params,
            scaler: d.scaler,
            support_vectors: d.svs,
            dual_coefs: d.dual_coefs,
            bias: d.bias,
        })
    }
}

/// Result of [`train`]: the model plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedSvm,
    pub status: SolverStatus,
    /// Dual variable of every input sample, in input order.
    pub alphas: Vec<f64>,
    /// Dual objective `sum(alpha) - 1/2 alpha' Q alpha` at the solution.
    pub objective: f64,
}

/// Train on projected samples `x` (one row per sample, `mask.len()` columns).
///
/// Identical (standardized) samples with the same label are merged into one
/// point whose box bound is scaled by its multiplicity; the merged problem has
/// the same optimum and decision function as the original one.
pub fn train(
    x: &[Vec<f64>],
    y: &[Class],
    mask: FeatureSet,
    params: &KernelParams,
    opts: &TrainOptions,
) -> Result<TrainOutcome, SvmError> {
    params.validate()?;
    if x.is_empty() {
        return Err(SvmError::Empty);
    }
    if x.len() != y.len() {
        return Err(SvmError::LabelCount(y.len(), x.len()));
    }
    let dim = mask.len();
    if let Some(bad) = x.iter().find(|r| r.len() != dim) {
        return Err(SvmError::Dimension {
            expected: dim,
            found: bad.len(),
        });
    }
    for class in Class::ALL {
        if !y.contains(&class) {
            let other = if class == Class::Trojan {
                Class::NonTrojan
            } else {
                Class::Trojan
            };
            return Err(SvmError::SingleClass(other));
        }
    }

    let scaler = if opts.standardize {
        Scaler::fit(x)
    } else {
        Scaler::identity(dim)
    };
    let z: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();

    // merge duplicates, first appearance order
    let mut slot: HashMap<(Vec<u64>, Class), usize> = HashMap::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Class> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    let mut member_of = Vec::with_capacity(z.len());
    for (row, &class) in z.iter().zip(y) {
        let key = (row.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), class);
        let k = *slot.entry(key).or_insert_with(|| {
            points.push(row.clone());
            labels.push(class);
            mult.push(0);
            points.len() - 1
        });
        mult[k] += 1;
        member_of.push(k);
    }

    let signs: Vec<f64> = labels.iter().map(|c| c.sign()).collect();
    let bounds: Vec<f64> = labels
        .iter()
        .zip(&mult)
        .map(|(c, &m)| m as f64 * params.bound(*c))
        .collect();
    let sol = smo::solve(&points, &signs, &bounds, params.gamma, opts.tol, opts.max_iter);

    let alphas = member_of.iter().map(|&k| sol.alpha[k] / mult[k] as f64).collect();
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (k, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(points[k].clone());
            dual_coefs.push(a * signs[k]);
        }
    }
    Ok(TrainOutcome {
        model: TrainedSvm {
            mask,
            params: params.clone(),
            scaler,
            support_vectors,
            dual_coefs,
            bias: sol.bias,
        },
        status: sol.status,
        alphas,
        objective: sol.objective,
    })
}

/// Project `records`-style feature vectors through `mask` and train.
pub fn train_features(
    features: &[FeatureVector],
    y: &[Class],
    mask: FeatureSet,
    params: &KernelParams,
    opts: &TrainOptions,
) -> Result<TrainOutcome, SvmError> {
    let x: Vec<Vec<f64>> = features.iter().map(|f| mask.project(f)).collect();
    train(&x, y, mask, params, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featex::Feature;

    fn mask(d: usize) -> FeatureSet {
        FeatureSet::from_features(&Feature::ALL[..d]).unwrap()
    }

    fn raw() -> TrainOptions {
        TrainOptions {
            standardize: false,
            ..TrainOptions::default()
        }
    }

    #[test]
    fn separable_pair() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![Class::NonTrojan, Class::Trojan];
        let out = train(&x, &y, mask(1), &KernelParams::unweighted(1.0, 1000.0), &raw()).unwrap();
        let m = &out.model;
        assert!(m.decision_value(&[0.0]).unwrap() < 0.0);
        assert!(m.decision_value(&[1.0]).unwrap() > 0.0);
        // symmetric problem: boundary at the midpoint
        assert!(m.decision_value(&[0.5]).unwrap().abs() < 1e-9);
        assert!(out.status.converged);
    }

    #[test]
    fn single_support_vector_identity() {
        let m = TrainedSvm {
            mask: mask(2),
            params: KernelParams::unweighted(0.7, 1.0),
            scaler: Scaler::identity(2),
            support_vectors: vec![vec![0.3, -1.2]],
            dual_coefs: vec![2.5],
            bias: 0.0,
        };
        assert_eq!(m.decision_value(&[0.3, -1.2]).unwrap(), 2.5);
        let far = TrainedSvm {
            params: KernelParams::unweighted(1e6, 1.0),
            bias: -0.25,
            ..m.clone()
        };
        assert_eq!(far.decision_value(&[5.0, 5.0]).unwrap(), -0.25);
        assert!(matches!(
            m.decision_value(&[1.0]),
            Err(SvmError::Dimension { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        let p = KernelParams::unweighted(1.0, 1.0);
        let x = vec![vec![0.0], vec![1.0]];
        assert_eq!(
            train(&x, &[Class::Trojan, Class::Trojan], mask(1), &p, &raw()).unwrap_err(),
            SvmError::SingleClass(Class::Trojan)
        );
        assert_eq!(train(&[], &[], mask(1), &p, &raw()).unwrap_err(), SvmError::Empty);
        assert!(matches!(
            train(&x, &[Class::Trojan, Class::NonTrojan], mask(2), &p, &raw()),
            Err(SvmError::Dimension { .. })
        ));
        let bad = KernelParams::unweighted(0.0, 1.0);
        assert!(matches!(
            train(&x, &[Class::Trojan, Class::NonTrojan], mask(1), &bad, &raw()),
            Err(SvmError::Params(_))
        ));
    }

    #[test]
    fn duplicates_share_the_bound() {
        // three copies of the same negative point against one positive
        let x = vec![vec![0.0], vec![0.0], vec![0.0], vec![2.0]];
        let y = vec![Class::NonTrojan, Class::NonTrojan, Class::NonTrojan, Class::Trojan];
        let p = KernelParams::unweighted(1.0, 0.1);
        let out = train(&x, &y, mask(1), &p, &raw()).unwrap();
        for a in &out.alphas {
            assert!(*a >= 0.0 && *a <= 0.1 + 1e-12);
        }
        let balance: f64 = out.alphas.iter().zip(&y).map(|(a, c)| a * c.sign()).sum();
        assert!(balance.abs() < 1e-9);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let x = vec![vec![0.1, 3.0], vec![1.7, -2.0], vec![0.4, 0.4], vec![2.2, 1.0]];
        let y = vec![Class::NonTrojan, Class::Trojan, Class::NonTrojan, Class::Trojan];
        let p = KernelParams::new(0.37, 3.0, ClassMap::new(1.0 / 3.0, 1.0));
        let m = train(&x, &y, mask(2), &p, &TrainOptions::default()).unwrap().model;
        let text = m.to_json();
        assert!(text.contains("\"dual_coefs\""));
        let back = TrainedSvm::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
        assert!(TrainedSvm::from_json("{}").is_err());
    }
}
