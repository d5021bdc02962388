// SPDX-License-Identifier: Apache-2.0

//! Net records, feature CSV persistence, seeded train/test splits and the
//! static class-balance weight.

use std::collections::BTreeSet;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{Class, ClassMap};
use crate::featex::FeatureVector;

/// Where a record comes from: design part and version, instance line, driving
/// cell name and `INSTANCE.PIN` of the driven net.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub part: String,
    pub version: String,
    pub line: u32,
    pub name: String,
    pub net: String,
}

impl Origin {
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.part, &self.version, &self.net)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetRecord {
    pub origin: Origin,
    pub features: FeatureVector,
    pub class: Class,
}

/// Flat CSV row: `part,version,line,name,net,LGFi,FFi,FFo,PI,PO,class`.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    part: String,
    version: String,
    line: u32,
    name: String,
    net: String,
    #[serde(rename = "LGFi")]
    lgfi: u32,
    #[serde(rename = "FFi")]
    ffi: u32,
    #[serde(rename = "FFo")]
    ffo: u32,
    #[serde(rename = "PI")]
    pi: u32,
    #[serde(rename = "PO")]
    po: u32,
    class: u8,
}

pub const CSV_HEADER: &str = "part,version,line,name,net,LGFi,FFi,FFo,PI,PO,class";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    Empty,
    #[error("dataset has no trojan records; balance is undefined")]
    NoTrojans,
    #[error("duplicate record {0}")]
    DuplicateKey(String),
    #[error("record {row}: class must be 0 or 1, found {value}")]
    InvalidClass { row: usize, value: u8 },
    #[error("test fraction must lie in (0, 1), found {0}")]
    BadFraction(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub part: String,
    pub version: String,
    pub path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<NetRecord>,
    pub source_manifest: Vec<SourceEntry>,
}

impl Dataset {
    /// Build a dataset, rejecting duplicate `(part, version, net)` keys.
    pub fn new(records: Vec<NetRecord>) -> Result<Self, DatasetError> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.origin.key()) {
                let (p, v, n) = r.origin.key();
                return Err(DatasetError::DuplicateKey(format!("{p}/{v}/{n}")));
            }
        }
        Ok(Self {
            records,
            source_manifest: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn counts(&self) -> ClassMap<usize> {
        let t = self.records.iter().filter(|r| r.class == Class::Trojan).count();
        ClassMap::new(t, self.records.len() - t)
    }

    /// Concatenate datasets (e.g. one per netlist), keeping the key invariant.
    pub fn combine(parts: impl IntoIterator<Item = Dataset>) -> Result<Self, DatasetError> {
        let mut records = Vec::new();
        let mut manifest = Vec::new();
        for d in parts {
            records.extend(d.records);
            manifest.extend(d.source_manifest);
        }
        let mut ds = Dataset::new(records)?;
        ds.source_manifest = manifest;
        Ok(ds)
    }

    /// Records sorted by `(part, version, net)`.
    pub fn canonical(&self) -> Vec<&NetRecord> {
        let mut v: Vec<&NetRecord> = self.records.iter().collect();
        v.sort_by(|a, b| a.origin.key().cmp(&b.origin.key()));
        v
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            let f = r.features;
            wr.serialize(CsvRow {
                part: r.origin.part.clone(),
                version: r.origin.version.clone(),
                line: r.origin.line,
                name: r.origin.name.clone(),
                net: r.origin.net.clone(),
                lgfi: f.lgfi,
                ffi: f.ffi,
                ffo: f.ffo,
                pi: f.pi,
                po: f.po,
                class: r.class.as_u8(),
            })?;
        }
        if self.records.is_empty() {
            wr.write_record(CSV_HEADER.split(','))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self, DatasetError> {
        let mut rd = csv::Reader::from_reader(r);
        let mut records = Vec::new();
        for (i, row) in rd.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            let class = Class::from_u8(row.class).ok_or(DatasetError::InvalidClass {
                row: i + 1,
                value: row.class,
            })?;
            records.push(NetRecord {
                origin: Origin {
                    part: row.part,
                    version: row.version,
                    line: row.line,
                    name: row.name,
                    net: row.net,
                },
                features: FeatureVector::new(row.lgfi, row.ffi, row.ffo, row.pi, row.po),
                class,
            });
        }
        Dataset::new(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        self.write_csv(io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// `b(class)`: non-trojan over trojan count for the trojan class, 1.0 otherwise.
pub fn balance(ds: &Dataset, class: Class) -> Result<f64, DatasetError> {
    let c = ds.counts();
    balance_from_counts(c.n, c.t, class)
}

pub fn balance_from_counts(non_trojan: usize, trojan: usize, class: Class) -> Result<f64, DatasetError> {
    match class {
        Class::NonTrojan => Ok(1.0),
        Class::Trojan if trojan == 0 => Err(DatasetError::NoTrojans),
        Class::Trojan => Ok(non_trojan as f64 / trojan as f64),
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Audit record of a split: the `(part, version, net)` keys of the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub test_fraction: f64,
    pub test_keys: Vec<[String; 3]>,
}

impl Split {
    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            seed: self.seed,
            test_fraction: self.test_fraction,
            test_keys: self
                .test
                .records
                .iter()
                .map(|r| [r.origin.part.clone(), r.origin.version.clone(), r.origin.net.clone()])
                .collect(),
        }
    }
}

/// Uniform sample without replacement of `round(test_fraction * n)` records.
/// Records are sorted canonically first, so the partition does not depend on
/// input order.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<Split, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::BadFraction(test_fraction));
    }
    if ds.is_empty() {
        return Err(DatasetError::Empty);
    }
    let sorted = ds.canonical();
    let n = sorted.len();
    let k = (test_fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, k) {
        in_test[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - k), Vec::with_capacity(k));
    for (r, t) in sorted.into_iter().zip(in_test) {
        if t {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok(Split {
        train: Dataset {
            records: train,
            source_manifest: ds.source_manifest.clone(),
        },
        test: Dataset {
            records: test,
            source_manifest: ds.source_manifest.clone(),
        },
        seed,
        test_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(i: usize, class: Class) -> NetRecord {
        NetRecord {
            origin: Origin {
                part: "RS232".into(),
                version: "T1000".into(),
                line: i as u32 + 1,
                name: "NAND4X1".into(),
                net: format!("U{i}.QN"),
            },
            features: FeatureVector::new(i as u32 % 9, 1, 3, 2, 3),
            class,
        }
    }

    fn ds(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| rec(i, if i % 4 == 0 { Class::Trojan } else { Class::NonTrojan }))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ten_records_split() {
        let d = ds(10);
        let s = split(&d, 0.2, 7).unwrap();
        assert_eq!(s.test.len(), 2);
        assert_eq!(s.train.len(), 8);
        let test_keys: BTreeSet<_> = s.test.records.iter().map(|r| r.origin.key()).collect();
        assert!(s.train.records.iter().all(|r| !test_keys.contains(&r.origin.key())));
        let again = split(&d, 0.2, 7).unwrap();
        assert_eq!(again.test, s.test);
        assert_eq!(s.manifest().test_keys.len(), 2);
    }

    #[test]
    fn split_size_rounds() {
        assert_eq!((0.2f64 * 52737.0).round() as usize, 10547);
        let s = split(&ds(37), 0.2, 1).unwrap();
        assert_eq!(s.test.len(), 7);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split(&Dataset::default(), 0.2, 1), Err(DatasetError::Empty)));
        assert!(matches!(split(&ds(3), 1.0, 1), Err(DatasetError::BadFraction(_))));
    }

    #[test]
    fn balance_values() {
        let b = balance_from_counts(42190, 160, Class::Trojan).unwrap();
        assert!((b - 263.7).abs() < 0.05);
        assert_eq!(balance_from_counts(42190, 160, Class::NonTrojan).unwrap(), 1.0);
        assert_eq!(balance_from_counts(100, 100, Class::Trojan).unwrap(), 1.0);
        assert!(matches!(
            balance_from_counts(5, 0, Class::Trojan),
            Err(DatasetError::NoTrojans)
        ));
        assert_eq!(balance(&ds(8), Class::Trojan).unwrap(), 3.0);
    }

    #[test]
    fn duplicate_keys_rejected() {
        let err = Dataset::new(vec![rec(1, Class::Trojan), rec(1, Class::NonTrojan)]).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateKey(_)));
    }

    #[test]
    fn csv_header_and_bad_class() {
        let mut buf = Vec::new();
        ds(2).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let bad = format!("{CSV_HEADER}\nRS232,T1000,3,INVX1,U1.QN,1,2,3,4,5,7\n");
        assert!(matches!(
            Dataset::read_csv(bad.as_bytes()),
            Err(DatasetError::InvalidClass { row: 1, value: 7 })
        ));
        let mut empty = Vec::new();
        Dataset::default().write_csv(&mut empty).unwrap();
        assert_eq!(Dataset::read_csv(&empty[..]).unwrap().len(), 0);
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(
            ("[A-Za-z0-9_,\" ]{0,8}", 1u32..5000, prop::array::uniform5(0u32..65), any::<bool>()), 0..20)
        ) {
            let records: Vec<NetRecord> = rows.iter().enumerate().map(|(i, (name, line, f, t))| NetRecord {
                origin: Origin { part: "P".into(), version: "V".into(), line: *line, name: name.clone(), net: format!("n{i}.Q") },
                features: FeatureVector::from_array(*f),
                class: if *t { Class::Trojan } else { Class::NonTrojan },
            }).collect();
            let d = Dataset::new(records).unwrap();
            let mut buf = Vec::new();
            d.write_csv(&mut buf).unwrap();
            prop_assert_eq!(Dataset::read_csv(&buf[..]).unwrap(), d);
        }

        #[test]
        fn split_ignores_input_order(seed in any::<u64>(), rot in 0usize..20) {
            let d = ds(20);
            let mut rotated = d.records.clone();
            rotated.rotate_left(rot);
            let d2 = Dataset::new(rotated).unwrap();
            let a = split(&d, 0.3, seed).unwrap();
            let b = split(&d2, 0.3, seed).unwrap();
            prop_assert_eq!(&a.test.records, &b.test.records);
            prop_assert_eq!(a.train.len() + a.test.len(), 20);
        }
    }
}
