// SPDX-License-Identifier: Apache-2.0

//! Binary classification scores with trojan as the positive class.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::class::Class;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Class, Class)>) -> Self {
        let mut c = Confusion::default();
        for (truth, pred) in pairs {
            c.add(truth, pred);
        }
        c
    }

    pub fn add(&mut self, truth: Class, pred: Class) {
        match (truth, pred) {
            (Class::Trojan, Class::Trojan) => self.tp += 1,
            (Class::NonTrojan, Class::Trojan) => self.fp += 1,
            (Class::NonTrojan, Class::NonTrojan) => self.tn += 1,
            (Class::Trojan, Class::NonTrojan) => self.r#fn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self, class: Class) -> f64 {
        match class {
            Class::Trojan => ratio(self.tp, self.tp + self.fp),
            Class::NonTrojan => ratio(self.tn, self.tn + self.r#fn),
        }
    }

    pub fn recall(&self, class: Class) -> f64 {
        match class {
            Class::Trojan => ratio(self.tp, self.tp + self.r#fn),
            Class::NonTrojan => ratio(self.tn, self.tn + self.fp),
        }
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.r#fn)
    }

    /// Matthews correlation; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fneg) = (self.tp as f64, self.fp as f64, self.tn as f64, self.r#fn as f64);
        let denom = ((tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg)).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fneg) / denom
        }
    }

    pub fn balanced_accuracy(&self) -> f64 {
        (self.recall(Class::Trojan) + self.recall(Class::NonTrojan)) / 2.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Score used for hyperparameter selection and property effectiveness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    /// F1 of the trojan class.
    F1,
    #[default]
    Mcc,
    BalancedAccuracy,
}

impl Metric {
    pub fn score(self, c: &Confusion) -> f64 {
        match self {
            Metric::Accuracy => c.accuracy(),
            Metric::F1 => c.f1(),
            Metric::Mcc => c.mcc(),
            Metric::BalancedAccuracy => c.balanced_accuracy(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::F1 => "f1",
            Metric::Mcc => "mcc",
            Metric::BalancedAccuracy => "balanced_accuracy",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" => Ok(Metric::Accuracy),
            "f1" => Ok(Metric::F1),
            "mcc" => Ok(Metric::Mcc),
            "balanced_accuracy" => Ok(Metric::BalancedAccuracy),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}
