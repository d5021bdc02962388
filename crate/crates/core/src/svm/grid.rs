// SPDX-License-Identifier: Apache-2.0

//! Stratified k-fold cross-validation over a (C, gamma) grid.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{train, KernelParams, SvmError, TrainOptions};
use crate::class::{Class, ClassMap};
use crate::featex::FeatureSet;
use crate::metrics::{Confusion, Metric};

/// A gamma grid entry: a fixed value or `1/d` for a `d`-feature mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Value(f64),
    InverseDim,
}

impl Gamma {
    pub fn resolve(self, dim: usize) -> f64 {
        match self {
            Gamma::Value(v) => v,
            Gamma::InverseDim => 1.0 / dim as f64,
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Value(v) => write!(f, "{v}"),
            Gamma::InverseDim => f.write_str("1/d"),
        }
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Gamma::Value(v) => s.serialize_f64(*v),
            Gamma::InverseDim => s.serialize_str("1/d"),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Gamma::Value(v)),
            Raw::Text(t) if t.trim() == "1/d" => Ok(Gamma::InverseDim),
            Raw::Text(t) => t
                .trim()
                .parse()
                .map(Gamma::Value)
                .map_err(|_| serde::de::Error::custom(format!("bad gamma `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    #[serde(rename = "C_grid")]
    pub c: Vec<f64>,
    #[serde(rename = "gamma_grid")]
    pub gamma: Vec<Gamma>,
    pub folds: usize,
    pub metric: Metric,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            c: vec![0.1, 1.0, 10.0, 100.0, 1000.0],
            gamma: vec![
                Gamma::Value(0.01),
                Gamma::Value(0.1),
                Gamma::InverseDim,
                Gamma::Value(1.0),
                Gamma::Value(10.0),
            ],
            folds: 5,
            metric: Metric::Mcc,
            seed: 0,
        }
    }
}

impl GridSpec {
    /// Candidate `(C, gamma)` pairs in tie-break order: ascending C, then
    /// ascending gamma, duplicates removed.
    pub fn points(&self, dim: usize) -> Vec<(f64, f64)> {
        let mut cs = self.c.clone();
        cs.sort_by(f64::total_cmp);
        cs.dedup();
        let mut gs: Vec<f64> = self.gamma.iter().map(|g| g.resolve(dim)).collect();
        gs.sort_by(f64::total_cmp);
        gs.dedup();
        cs.iter().flat_map(|&c| gs.iter().map(move |&g| (c, g))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub params: KernelParams,
    pub score: f64,
    pub table: Vec<GridPoint>,
}

/// Assign each sample a fold in `0..folds`, shuffling each class separately so
/// every fold receives its share of both classes.
pub fn stratified_folds(y: &[Class], folds: usize, seed: u64) -> Result<Vec<usize>, SvmError> {
    if folds < 2 {
        return Err(SvmError::Params(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; y.len()];
    for class in Class::ALL {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < folds {
            return Err(SvmError::FoldLacksClass {
                folds,
                class,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            fold[i] = k % folds;
        }
    }
    Ok(fold)
}

/// Mean validation score of `params` across the given fold assignment.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    x: &[Vec<f64>],
    y: &[Class],
    mask: FeatureSet,
    params: &KernelParams,
    fold: &[usize],
    folds: usize,
    metric: Metric,
    opts: &TrainOptions,
) -> Result<f64, SvmError> {
    let mut total = 0.0;
    for k in 0..folds {
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..x.len() {
            if fold[i] == k {
                vx.push(x[i].clone());
                vy.push(y[i]);
            } else {
                tx.push(x[i].clone());
                ty.push(y[i]);
            }
        }
        let model = train(&tx, &ty, mask, params, opts)?.model;
        let mut c = Confusion::default();
        for (v, &truth) in vx.iter().zip(&vy) {
            c.add(truth, super::class_of(model.decision_value(v)?));
        }
        total += metric.score(&c);
    }
    Ok(total / folds as f64)
}

/// Pick the grid point with the best mean cross-validated metric. Ties go to
/// the smaller C, then the smaller gamma.
pub fn grid_search(
    x: &[Vec<f64>],
    y: &[Class],
    mask: FeatureSet,
    class_weight: ClassMap<f64>,
    spec: &GridSpec,
    opts: &TrainOptions,
) -> Result<GridResult, SvmError> {
    let points = spec.points(mask.len());
    if points.is_empty() {
        return Err(SvmError::EmptyGrid);
    }
    let params_at = |(c, gamma): (f64, f64)| KernelParams::new(gamma, c, class_weight);
    if points.len() == 1 {
        let params = params_at(points[0]);
        params.validate()?;
        return Ok(GridResult {
            params,
            score: f64::NAN,
            table: Vec::new(),
        });
    }
    let fold = stratified_folds(y, spec.folds, spec.seed)?;
    let eval = |p: &(f64, f64)| cross_validate(x, y, mask, &params_at(*p), &fold, spec.folds, spec.metric, opts);

    #[cfg(feature = "parallel")]
    let scores: Vec<Result<f64, SvmError>> = {
        use rayon::prelude::*;
        points.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let scores: Vec<Result<f64, SvmError>> = points.iter().map(eval).collect();

    let mut table = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64)> = None;
    for (k, (&(c, gamma), score)) in points.iter().zip(scores).enumerate() {
        let score = score?;
        table.push(GridPoint { c, gamma, score });
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((k, score));
        }
    }
    let (k, score) = best.expect("non-empty grid");
    Ok(GridResult {
        params: params_at(points[k]),
        score,
        table,
    })
}
