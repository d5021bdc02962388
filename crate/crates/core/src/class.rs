// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

/// Binary class of a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    #[serde(rename = "n")]
    NonTrojan,
    #[serde(rename = "t")]
    Trojan,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Trojan, Class::NonTrojan];

    /// Integer encoding used in feature CSVs: trojan = 1, non-trojan = 0.
    pub fn as_u8(self) -> u8 {
        match self {
            Class::Trojan => 1,
            Class::NonTrojan => 0,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(Class::Trojan),
            0 => Some(Class::NonTrojan),
            _ => None,
        }
    }

    /// Sign used by the SVM: trojan is the positive class.
    pub fn sign(self) -> f64 {
        match self {
            Class::Trojan => 1.0,
            Class::NonTrojan => -1.0,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Class::Trojan => "t",
            Class::NonTrojan => "n",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Trojan => "trojan",
            Class::NonTrojan => "non-trojan",
        })
    }
}

/// One value per class, serialized as `{"t": .., "n": ..}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassMap<T> {
    pub t: T,
    pub n: T,
}

impl<T> ClassMap<T> {
    pub fn new(t: T, n: T) -> Self {
        Self { t, n }
    }

    pub fn get(&self, class: Class) -> &T {
        match class {
            Class::Trojan => &self.t,
            Class::NonTrojan => &self.n,
        }
    }

    pub fn get_mut(&mut self, class: Class) -> &mut T {
        match class {
            Class::Trojan => &mut self.t,
            Class::NonTrojan => &mut self.n,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> ClassMap<U> {
        ClassMap {
            t: f(&self.t),
            n: f(&self.n),
        }
    }
}

impl ClassMap<f64> {
    pub fn sum(&self) -> f64 {
        self.t + self.n
    }

    /// Class with the larger value; ties go to non-trojan.
    pub fn argmax(&self) -> Class {
        if self.t > self.n {
            Class::Trojan
        } else {
            Class::NonTrojan
        }
    }
}
