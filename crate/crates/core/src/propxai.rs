// SPDX-License-Identifier: Apache-2.0

//! Property-based explainable classification.
//!
//! Every non-empty subset of the five features is a *property* with its own
//! inference engine (an RBF SVM trained on that projection). Engine votes are
//! tallied with per-property effectiveness weights from the knowledge base and
//! the verdict lists, per class, the properties that carried it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{Class, ClassMap};
use crate::dataset::{balance, Dataset, DatasetError};
use crate::featex::{Feature, FeatureSet, FeatureVector};
use crate::metrics::{Confusion, Metric};
use crate::svm::{self, GridSpec, KernelParams, SolverStatus, SvmError, TrainOptions, TrainedSvm};

pub const PROPERTY_COUNT: usize = 31;
pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Property {
    pub id: u8,
    pub features: FeatureSet,
}

impl Property {
    pub fn explainability(&self) -> f64 {
        explainability(self.features.len(), Feature::ALL.len())
    }
}

/// All 31 properties: ascending cardinality, then lexicographic in feature
/// order (LGFi, FFi, FFo, PI, PO). Ids start at 1.
pub fn enumerate_properties() -> Vec<Property> {
    let mut sets: Vec<FeatureSet> = (1u8..32).filter_map(FeatureSet::from_bits).collect();
    sets.sort_by_key(|s| (s.len(), s.iter().map(Feature::index).collect::<Vec<_>>()));
    sets.into_iter()
        .enumerate()
        .map(|(i, features)| Property {
            id: i as u8 + 1,
            features,
        })
        .collect()
}

pub fn property(id: u8) -> Option<Property> {
    enumerate_properties().into_iter().nth(usize::from(id).checked_sub(1)?)
}

/// `1 - (size - 1) / (n - 1)`: single-feature properties score 1, the
/// all-feature property 0.
pub fn explainability(size: usize, n: usize) -> f64 {
    assert!(
        size >= 1 && size <= n && n >= 2,
        "property size {size} out of range for {n} features"
    );
    1.0 - (size as f64 - 1.0) / (n as f64 - 1.0)
}

/// Unweighted mean explainability of the given property ids; 0 for none.
pub fn mean_explainability(ids: &[u8]) -> f64 {
    if ids.is_empty() {
        return 0.0;
    }
    let props = enumerate_properties();
    ids.iter()
        .map(|&id| props[usize::from(id) - 1].explainability())
        .sum::<f64>()
        / ids.len() as f64
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("knowledge base and models disagree: {0}")]
    Mismatch(String),
    #[error("every property has zero effectiveness")]
    NoEffectiveProperty,
}

/// Per-property effectiveness weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub metric: Metric,
    pub weights: BTreeMap<u8, f64>,
}

impl KnowledgeBase {
    pub fn uniform(metric: Metric) -> Self {
        Self {
            metric,
            weights: (1..=PROPERTY_COUNT as u8).map(|id| (id, 1.0)).collect(),
        }
    }

    pub fn weight(&self, id: u8) -> f64 {
        self.weights.get(&id).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let ids: Vec<u8> = self.weights.keys().copied().collect();
        let expected: Vec<u8> = (1..=PROPERTY_COUNT as u8).collect();
        if ids != expected {
            return Err(EnsembleError::Mismatch(format!("weights for ids {ids:?}")));
        }
        if let Some((id, w)) = self.weights.iter().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
            return Err(EnsembleError::Mismatch(format!(
                "weight {w} of property {id} outside [0, 1]"
            )));
        }
        if self.total() <= 0.0 {
            return Err(EnsembleError::NoEffectiveProperty);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("kb serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EnsembleError> {
        let kb: KnowledgeBase =
            serde_json::from_str(text).map_err(|e| EnsembleError::Mismatch(format!("malformed kb: {e}")))?;
        kb.validate()?;
        Ok(kb)
    }
}

/// One inference engine per property, indexed by `id - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyEnsemble {
    pub models: Vec<TrainedSvm>,
}

impl PropertyEnsemble {
    pub fn new(models: Vec<TrainedSvm>) -> Result<Self, EnsembleError> {
        let props = enumerate_properties();
        if models.len() != PROPERTY_COUNT {
            return Err(EnsembleError::Mismatch(format!("{} models, expected 31", models.len())));
        }
        for (p, m) in props.iter().zip(&models) {
            if p.features != m.mask {
                return Err(EnsembleError::Mismatch(format!(
                    "model {} uses [{}], property expects [{}]",
                    p.id, m.mask, p.features
                )));
            }
        }
        Ok(Self { models })
    }

    pub fn votes(&self, x: &FeatureVector) -> BTreeMap<u8, Class> {
        self.models
            .iter()
            .enumerate()
            .map(|(i, m)| (i as u8 + 1, m.classify(x)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EnsembleConfig {
    pub grid: GridSpec,
    pub train: TrainOptions,
}

/// Training diagnostics for one property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub id: u8,
    pub features: FeatureSet,
    pub params: KernelParams,
    /// Mean cross-validated score of the chosen grid point (NaN for a
    /// single-point grid, which skips cross-validation).
    pub cv_score: f64,
    pub effectiveness: f64,
    pub status: SolverStatus,
}

pub struct TrainedEnsemble {
    pub ensemble: PropertyEnsemble,
    pub kb: KnowledgeBase,
    pub balance: f64,
    pub reports: Vec<PropertyReport>,
}

/// Grid-search and train one engine for `mask` with the trojan class weighted by
/// `class_weight.t`; returns the model, its report fields and training-set predictions.
pub fn train_engine(
    train: &Dataset,
    mask: FeatureSet,
    class_weight: ClassMap<f64>,
    cfg: &EnsembleConfig,
) -> Result<(TrainedSvm, GridChoice), SvmError> {
    let x: Vec<Vec<f64>> = train.records.iter().map(|r| mask.project(&r.features)).collect();
    let y: Vec<Class> = train.records.iter().map(|r| r.class).collect();
    let chosen = svm::grid_search(&x, &y, mask, class_weight, &cfg.grid, &cfg.train)?;
    let outcome = svm::train(&x, &y, mask, &chosen.params, &cfg.train)?;
    Ok((
        outcome.model,
        GridChoice {
            params: chosen.params,
            cv_score: chosen.score,
            status: outcome.status,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct GridChoice {
    pub params: KernelParams,
    pub cv_score: f64,
    pub status: SolverStatus,
}

/// Score of `model` when it reclassifies the training set, clamped to `[0, 1]`.
pub fn effectiveness(model: &TrainedSvm, train: &Dataset, metric: Metric) -> f64 {
    let c = Confusion::from_pairs(train.records.iter().map(|r| (r.class, model.classify(&r.features))));
    metric.score(&c).clamp(0.0, 1.0)
}

/// Train all 31 engines with the trojan class weighted by the training balance
/// and measure each engine's effectiveness on the training data.
pub fn train_ensemble(train: &Dataset, cfg: &EnsembleConfig) -> Result<TrainedEnsemble, EnsembleError> {
    let b = balance(train, Class::Trojan)?;
    let class_weight = ClassMap::new(b, 1.0);
    let props = enumerate_properties();
    let run = |p: &Property| -> Result<(TrainedSvm, PropertyReport), EnsembleError> {
        let (model, choice) = train_engine(train, p.features, class_weight, cfg)?;
        let eff = effectiveness(&model, train, cfg.grid.metric);
        Ok((
            model,
            PropertyReport {
                id: p.id,
                features: p.features,
                params: choice.params,
                cv_score: choice.cv_score,
                effectiveness: eff,
                status: choice.status,
            },
        ))
    };

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        props.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = props.iter().map(run).collect();

    let mut models = Vec::with_capacity(PROPERTY_COUNT);
    let mut reports = Vec::with_capacity(PROPERTY_COUNT);
    for r in results {
        let (m, rep) = r?;
        models.push(m);
        reports.push(rep);
    }
    let kb = KnowledgeBase {
        metric: cfg.grid.metric,
        weights: reports.iter().map(|r| (r.id, r.effectiveness)).collect(),
    };
    kb.validate()?;
    Ok(TrainedEnsemble {
        ensemble: PropertyEnsemble::new(models)?,
        kb,
        balance: b,
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Class,
    pub confidence: ClassMap<f64>,
    /// Properties registered for each class, heaviest first.
    pub registered: ClassMap<Vec<u8>>,
    pub explainability: ClassMap<f64>,
    pub raw_votes: BTreeMap<u8, Class>,
}

/// Turn engine votes into a verdict.
///
/// `W(c)` sums the weights of properties voting `c`; the decision is the
/// heavier class (ties go to non-trojan) and `confidence(c) = W(c) / sum(w)`.
/// A property is registered for its class when its weight is at least
/// `threshold` of the total weight over all 31 properties.
pub fn tally(votes: &BTreeMap<u8, Class>, kb: &KnowledgeBase, threshold: f64) -> Result<Verdict, EnsembleError> {
    let total = kb.total();
    if total <= 0.0 {
        return Err(EnsembleError::NoEffectiveProperty);
    }
    if let Some(id) = votes.keys().find(|id| !kb.weights.contains_key(id)) {
        return Err(EnsembleError::Mismatch(format!(
            "vote from property {id} has no weight"
        )));
    }
    let mut mass = ClassMap::new(0.0, 0.0);
    let mut registered: ClassMap<Vec<u8>> = ClassMap::default();
    for (&id, &class) in votes {
        let w = kb.weight(id);
        *mass.get_mut(class) += w;
        if w / total >= threshold {
            registered.get_mut(class).push(id);
        }
    }
    for class in Class::ALL {
        registered
            .get_mut(class)
            .sort_by(|a, b| kb.weight(*b).total_cmp(&kb.weight(*a)).then(a.cmp(b)));
    }
    let confidence = ClassMap::new(mass.t / total, mass.n / total);
    let explainability = registered.map(|ids| mean_explainability(ids));
    Ok(Verdict {
        decision: mass.argmax(),
        confidence,
        registered,
        explainability,
        raw_votes: votes.clone(),
    })
}

/// Classify `x` with every engine and tally the votes.
pub fn decide(
    ensemble: &PropertyEnsemble,
    kb: &KnowledgeBase,
    x: &FeatureVector,
    threshold: f64,
) -> Result<Verdict, EnsembleError> {
    if kb.weights.len() != ensemble.models.len() {
        return Err(EnsembleError::Mismatch(format!(
            "{} weights for {} models",
            kb.weights.len(),
            ensemble.models.len()
        )));
    }
    tally(&ensemble.votes(x), kb, threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyWeight {
    pub id: u8,
    pub features: FeatureSet,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRationale {
    pub properties: Vec<PropertyWeight>,
    pub explainability: f64,
}

/// Explanation document for a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rationale {
    pub decision: Class,
    pub confidence: ClassMap<f64>,
    pub classes: ClassMap<ClassRationale>,
}

pub fn compose_rationale(v: &Verdict, kb: &KnowledgeBase) -> Rationale {
    let props = enumerate_properties();
    let classes = ClassMap::new(Class::Trojan, Class::NonTrojan).map(|&class| ClassRationale {
        properties: v
            .registered
            .get(class)
            .iter()
            .map(|&id| PropertyWeight {
                id,
                features: props[usize::from(id) - 1].features,
                weight: kb.weight(id),
            })
            .collect(),
        explainability: *v.explainability.get(class),
    });
    Rationale {
        decision: v.decision,
        confidence: v.confidence,
        classes,
    }
}

impl Rationale {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rationale serializes")
    }

    /// Table with one row per class (trojan first), then the registered
    /// properties of each class with their features and weights.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Decision: {}", self.decision);
        let _ = writeln!(
            s,
            "{:<10}  {:>10}  {:<48}  {:>14}",
            "Prediction", "Confidence", "Properties", "Explainability"
        );
        for class in Class::ALL {
            let c = self.classes.get(class);
            let ids = if c.properties.is_empty() {
                "No opinion".to_string()
            } else {
                c.properties
                    .iter()
                    .map(|p| p.id.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let _ = writeln!(
                s,
                "{:<10}  {:>9.1}%  {:<48}  {:>13.1}%",
                class.as_u8(),
                100.0 * self.confidence.get(class),
                ids,
                100.0 * c.explainability
            );
        }
        for class in Class::ALL {
            let c = self.classes.get(class);
            let _ = writeln!(s, "\n{class} ({}):", class.short());
            if c.properties.is_empty() {
                let _ = writeln!(s, "  No opinion");
            }
            for p in &c.properties {
                let _ = writeln!(s, "  {:>2}  w={:.4}  [{}]", p.id, p.weight, p.features);
            }
        }
        s
    }
}
