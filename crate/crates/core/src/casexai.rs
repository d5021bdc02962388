// SPDX-License-Identifier: Apache-2.0

//! Case-based explanation: an all-feature SVM decides, and a training index of
//! exact feature keys supplies the nearest training cases with their source references.
//!
//! Neighbor shells are weighted by inverse squared distance (`w = count * b /
//! (d + 1)^2`, with `b = 1` for non-trojans) and the per-class share of the
//! total weight is the *correspondence* of that class.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{Class, ClassMap};
use crate::dataset::{balance_from_counts, Dataset, DatasetError, Origin};
use crate::featex::{FeatureSet, FeatureVector};
use crate::svm::{SvmError, TrainedSvm};

pub const DEFAULT_K: usize = 4;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error("case explanation needs a model over all five features, got [{0}]")]
    PartialMask(FeatureSet),
    #[error("neighbor shells carry no weight")]
    ZeroWeight,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("training index is empty")]
    EmptyIndex,
    #[error("malformed index: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub trojan_refs: Vec<Origin>,
    pub nontrojan_refs: Vec<Origin>,
}

impl IndexEntry {
    pub fn refs(&self, class: Class) -> &[Origin] {
        match class {
            Class::Trojan => &self.trojan_refs,
            Class::NonTrojan => &self.nontrojan_refs,
        }
    }

    fn refs_mut(&mut self, class: Class) -> &mut Vec<Origin> {
        match class {
            Class::Trojan => &mut self.trojan_refs,
            Class::NonTrojan => &mut self.nontrojan_refs,
        }
    }

    pub fn len(&self) -> usize {
        self.trojan_refs.len() + self.nontrojan_refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Exact-match map from raw feature key to the training samples carrying it.
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingIndex {
    entries: BTreeMap<[u32; 5], IndexEntry>,
    balance_t: f64,
}

#[derive(Serialize, Deserialize)]
struct IndexDoc {
    balance_t: f64,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    key: [u32; 5],
    #[serde(flatten)]
    entry: IndexEntry,
}

impl TrainingIndex {
    /// Build from raw entries; the balance is derived from the stored counts.
    pub fn from_entries(entries: BTreeMap<[u32; 5], IndexEntry>) -> Result<Self, CaseError> {
        if entries.values().any(IndexEntry::is_empty) {
            return Err(CaseError::Malformed("key without samples".into()));
        }
        let t: usize = entries.values().map(|e| e.trojan_refs.len()).sum();
        let n: usize = entries.values().map(|e| e.nontrojan_refs.len()).sum();
        let balance_t = balance_from_counts(n, t, Class::Trojan)?;
        Ok(Self { entries, balance_t })
    }

    pub fn entries(&self) -> &BTreeMap<[u32; 5], IndexEntry> {
        &self.entries
    }

    pub fn balance_t(&self) -> f64 {
        self.balance_t
    }

    pub fn key_count(&self) -> usize {
        self.entries.len()
    }

    pub fn sample_count(&self) -> usize {
        self.entries.values().map(IndexEntry::len).sum()
    }

    pub fn to_json(&self) -> String {
        let doc = IndexDoc {
            balance_t: self.balance_t,
            entries: self
                .entries
                .iter()
                .map(|(k, e)| EntryDoc {
                    key: *k,
                    entry: e.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CaseError> {
        let doc: IndexDoc = serde_json::from_str(text).map_err(|e| CaseError::Malformed(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for e in doc.entries {
            if entries.insert(e.key, e.entry).is_some() {
                return Err(CaseError::Malformed(format!("duplicate key {:?}", e.key)));
            }
        }
        let ti = Self::from_entries(entries)?;
        if ti.balance_t.to_bits() != doc.balance_t.to_bits() {
            return Err(CaseError::Malformed(format!(
                "stored balance {} does not match counts ({})",
                doc.balance_t, ti.balance_t
            )));
        }
        Ok(ti)
    }
}

pub fn build_index(train: &Dataset) -> Result<TrainingIndex, CaseError> {
    let mut entries: BTreeMap<[u32; 5], IndexEntry> = BTreeMap::new();
    for r in train.canonical() {
        entries
            .entry(r.features.to_array())
            .or_default()
            .refs_mut(r.class)
            .push(r.origin.clone());
    }
    TrainingIndex::from_entries(entries)
}

/// All training samples sharing one feature key, at one distance from the query.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborShell {
    pub distance: f64,
    pub key: FeatureVector,
    pub t_count: usize,
    pub n_count: usize,
    pub w_t: f64,
    pub w_n: f64,
    pub refs: IndexEntry,
}

pub fn shell_weight(count: usize, b: f64, distance: f64) -> f64 {
    count as f64 * b / ((distance + 1.0) * (distance + 1.0))
}

impl NeighborShell {
    pub fn new(distance: f64, key: FeatureVector, t_count: usize, n_count: usize, balance_t: f64) -> Self {
        Self {
            distance,
            key,
            t_count,
            n_count,
            w_t: shell_weight(t_count, balance_t, distance),
            w_n: shell_weight(n_count, 1.0, distance),
            refs: IndexEntry::default(),
        }
    }

    pub fn weights(&self) -> ClassMap<f64> {
        ClassMap::new(self.w_t, self.w_n)
    }
}

fn sq_distance(a: [u32; 5], b: [u32; 5]) -> u64 {
    a.iter()
        .zip(&b)
        .map(|(&x, &y)| {
            let d = u64::from(x.abs_diff(y));
            d * d
        })
        .sum()
}

/// The `k` nearest distinct keys by raw Euclidean distance, plus every key
/// tied with the k-th. Linear scan; ties are ordered by key.
pub fn knn_query(ti: &TrainingIndex, x: &FeatureVector, k: usize) -> Result<Vec<NeighborShell>, CaseError> {
    if k == 0 {
        return Err(CaseError::ZeroK);
    }
    if ti.entries.is_empty() {
        return Err(CaseError::EmptyIndex);
    }
    let q = x.to_array();
    let mut ranked: Vec<(u64, &[u32; 5], &IndexEntry)> = ti
        .entries
        .iter()
        .map(|(key, e)| (sq_distance(q, *key), key, e))
        .collect();
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
    let cutoff = ranked[k.min(ranked.len()) - 1].0;
    Ok(ranked
        .into_iter()
        .take_while(|(d2, _, _)| *d2 <= cutoff)
        .map(|(d2, key, e)| {
            let mut shell = NeighborShell::new(
                (d2 as f64).sqrt(),
                FeatureVector::from_array(*key),
                e.trojan_refs.len(),
                e.nontrojan_refs.len(),
                ti.balance_t,
            );
            shell.refs = e.clone();
            shell
        })
        .collect())
}

pub fn sum_weights(shells: &[NeighborShell]) -> ClassMap<f64> {
    shells.iter().fold(ClassMap::new(0.0, 0.0), |acc, s| {
        ClassMap::new(acc.t + s.w_t, acc.n + s.w_n)
    })
}

/// Per-class share of the summed shell weight.
pub fn correspondence(shells: &[NeighborShell]) -> Result<ClassMap<f64>, CaseError> {
    correspondence_from_sums(sum_weights(shells))
}

pub fn correspondence_from_sums(sum: ClassMap<f64>) -> Result<ClassMap<f64>, CaseError> {
    let total = sum.sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(CaseError::ZeroWeight);
    }
    Ok(ClassMap::new(sum.t / total, sum.n / total))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseExplanation {
    pub prediction: Class,
    pub shells: Vec<NeighborShell>,
    pub sum_w: ClassMap<f64>,
    pub correspondence: ClassMap<f64>,
    pub agrees: bool,
}

/// Combine an existing prediction with its neighbor evidence.
pub fn justify(prediction: Class, shells: Vec<NeighborShell>) -> Result<CaseExplanation, CaseError> {
    let sum_w = sum_weights(&shells);
    let correspondence = correspondence_from_sums(sum_w)?;
    Ok(CaseExplanation {
        prediction,
        agrees: correspondence.argmax() == prediction,
        shells,
        sum_w,
        correspondence,
    })
}

pub fn explain(
    model: &TrainedSvm,
    ti: &TrainingIndex,
    x: &FeatureVector,
    k: usize,
) -> Result<CaseExplanation, CaseError> {
    if model.mask != FeatureSet::FULL {
        return Err(CaseError::PartialMask(model.mask));
    }
    justify(model.classify(x), knn_query(ti, x, k)?)
}

/// Fraction of `test` records whose neighbor evidence agrees with the model.
pub fn agreement_rate(model: &TrainedSvm, ti: &TrainingIndex, test: &Dataset, k: usize) -> Result<f64, CaseError> {
    if test.is_empty() {
        return Err(CaseError::Dataset(DatasetError::Empty));
    }
    let mut agree = 0usize;
    for r in &test.records {
        if explain(model, ti, &r.features, k)?.agrees {
            agree += 1;
        }
    }
    Ok(agree as f64 / test.len() as f64)
}

#[derive(Serialize)]
struct RefDoc<'a> {
    #[serde(flatten)]
    origin: &'a Origin,
    class: Class,
}

#[derive(Serialize)]
struct ShellDoc<'a> {
    distance: f64,
    key: [u32; 5],
    t: usize,
    n: usize,
    w_t: f64,
    w_n: f64,
    refs: Vec<RefDoc<'a>>,
}

#[derive(Serialize)]
struct ExplanationDoc<'a> {
    prediction: Class,
    correspondence: ClassMap<f64>,
    agrees: bool,
    sum_w: ClassMap<f64>,
    shells: Vec<ShellDoc<'a>>,
}

impl CaseExplanation {
    pub fn to_value(&self) -> serde_json::Value {
        let doc = ExplanationDoc {
            prediction: self.prediction,
            correspondence: self.correspondence,
            agrees: self.agrees,
            sum_w: self.sum_w,
            shells: self
                .shells
                .iter()
                .map(|s| ShellDoc {
                    distance: s.distance,
                    key: s.key.to_array(),
                    t: s.t_count,
                    n: s.n_count,
                    w_t: s.w_t,
                    w_n: s.w_n,
                    refs: Class::ALL
                        .iter()
                        .flat_map(|&c| s.refs.refs(c).iter().map(move |o| RefDoc { origin: o, class: c }))
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("explanation serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("explanation serializes")
    }

    /// Shell table with sum and correspondence rows, then up to
    /// `max_refs` references per shell.
    pub fn render_text(&self, max_refs: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Prediction: {} ({})  agrees: {}",
            self.prediction,
            self.prediction.as_u8(),
            if self.agrees { "yes" } else { "no" }
        );
        let _ = writeln!(
            s,
            "{:>8}  {:<22}  {:>11}  {:>10}  {:>10}",
            "Distance", "Feature Values", "t:n", "w(t)", "w(n)"
        );
        for sh in &self.shells {
            let _ = writeln!(
                s,
                "{:>8.2}  {:<22}  {:>11}  {:>10.2}  {:>10.2}",
                sh.distance,
                sh.key.to_string(),
                format!("{}:{}", sh.t_count, sh.n_count),
                sh.w_t,
                sh.w_n
            );
        }
        let t: usize = self.shells.iter().map(|x| x.t_count).sum();
        let n: usize = self.shells.iter().map(|x| x.n_count).sum();
        let _ = writeln!(
            s,
            "{:>8}  {:<22}  {:>11}  {:>10.2}  {:>10.2}",
            "",
            "Sum",
            format!("{t}+{n}={}", t + n),
            self.sum_w.t,
            self.sum_w.n
        );
        let _ = writeln!(
            s,
            "{:>8}  {:<22}  {:>11}  {:>9.1}%  {:>9.1}%",
            "",
            "Correspondence",
            "",
            100.0 * self.correspondence.t,
            100.0 * self.correspondence.n
        );
        if max_refs > 0 {
            let _ = writeln!(s, "\nReferences:");
            for sh in &self.shells {
                let _ = writeln!(s, "  {}", sh.key);
                let mut shown = 0;
                for class in Class::ALL {
                    for o in sh.refs.refs(class) {
                        if shown == max_refs {
                            break;
                        }
                        let _ = writeln!(
                            s,
                            "    {}  {} {} line {} {} {}",
                            class.short(),
                            o.part,
                            o.version,
                            o.line,
                            o.name,
                            o.net
                        );
                        shown += 1;
                    }
                }
                let total = sh.refs.len();
                if total > shown {
                    let _ = writeln!(s, "    ... {} more", total - shown);
                }
            }
        }
        s
    }
}
