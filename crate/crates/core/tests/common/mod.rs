// SPDX-License-Identifier: Apache-2.0

//! Oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use netlist_sentinel::casexai::{self, IndexEntry, TrainingIndex};
use netlist_sentinel::dataset::{self, Origin};
use netlist_sentinel::featex::{self, FeatureConfig, Labeler};
use netlist_sentinel::netlist::{parse_netlist, CellKind, CellLibrary, Driver, NetlistIr};
use netlist_sentinel::propxai::{self, EnsembleConfig};
use netlist_sentinel::svm::{GridSpec, TrainOptions};
use netlist_sentinel::synthgen::{self, Payload, TrojanSpec};
use netlist_sentinel::{Class, Dataset, FeatureSet, FeatureVector};

pub const INF: u32 = u32::MAX;

/// Features of every gate-driven net by fixed-point relaxation of the
/// per-feature recurrences, straight from the netlist IR.
pub fn feature_oracle(ir: &NetlistIr, cfg: &FeatureConfig) -> BTreeMap<String, [u32; 5]> {
    let n = ir.nets.len();
    let is_ff = |i: usize| ir.instances[i].kind == CellKind::FlipFlop;
    let driver_gate = |net: usize| match ir.driver(netlist_sentinel::netlist::NetId(net as u32)) {
        Some(Driver::Gate { instance, .. }) => Some(instance),
        _ => None,
    };
    let is_control = |pin: &str| cfg.control_pins.iter().any(|p| p.eq_ignore_ascii_case(pin));
    let up_inputs = |i: usize| -> Vec<usize> {
        let g = &ir.instances[i];
        g.inputs
            .iter()
            .filter(|c| !(cfg.skip_control_pins && g.kind == CellKind::FlipFlop && is_control(&c.pin)))
            .map(|c| c.net.index())
            .collect()
    };
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, g) in ir.instances.iter().enumerate() {
        for c in &g.inputs {
            consumers[c.net.index()].push(i);
        }
    }
    let is_pi: Vec<bool> = (0..n)
        .map(|k| ir.primary_inputs.iter().any(|p| p.index() == k))
        .collect();
    let is_po: Vec<bool> = (0..n)
        .map(|k| ir.primary_outputs.iter().any(|p| p.index() == k))
        .collect();
    let add1 = |v: u32| if v == INF { INF } else { v + 1 };

    let mut ffi = vec![INF; n];
    let mut pi = vec![INF; n];
    let mut ffo = vec![INF; n];
    let mut po = vec![INF; n];
    for k in 0..n {
        if is_pi[k] {
            pi[k] = 0;
        }
        if is_po[k] {
            po[k] = 0;
        }
        if let Some(g) = driver_gate(k) {
            if is_ff(g) {
                ffi[k] = 0;
            }
        }
    }
    loop {
        let mut changed = false;
        let mut relax = |slot: &mut u32, v: u32| {
            if v < *slot {
                *slot = v;
                changed = true;
            }
        };
        for k in 0..n {
            if let Some(g) = driver_gate(k) {
                let ins = up_inputs(g);
                if !is_ff(g) {
                    let best = ins.iter().map(|&m| ffi[m]).min().unwrap_or(INF);
                    relax(&mut ffi[k], add1(best));
                }
                let best = ins.iter().map(|&m| pi[m]).min().unwrap_or(INF);
                relax(&mut pi[k], add1(best));
            }
            for &c in &consumers[k] {
                let outs: Vec<usize> = ir.instances[c].outputs.iter().map(|o| o.net.index()).collect();
                if is_ff(c) {
                    relax(&mut ffo[k], 1);
                } else {
                    let best = outs.iter().map(|&o| ffo[o]).min().unwrap_or(INF);
                    relax(&mut ffo[k], add1(best));
                }
                let best = outs.iter().map(|&o| po[o]).min().unwrap_or(INF);
                relax(&mut po[k], add1(best));
            }
        }
        if !changed {
            break;
        }
    }

    let cap = |v: u32| v.min(cfg.cap);
    let mut out = BTreeMap::new();
    for (i, g) in ir.instances.iter().enumerate() {
        let mut lgfi = g.input_pin_count as u32;
        if !is_ff(i) {
            let second: BTreeSet<usize> = g
                .inputs
                .iter()
                .filter_map(|c| driver_gate(c.net.index()))
                .filter(|&h| h != i)
                .collect();
            lgfi += second
                .iter()
                .map(|&h| ir.instances[h].input_pin_count as u32)
                .sum::<u32>();
        }
        for o in &g.outputs {
            let k = o.net.index();
            out.insert(
                format!("{}.{}", g.name, o.pin),
                [cap(lgfi), cap(ffi[k]), cap(ffo[k]), cap(pi[k]), cap(po[k])],
            );
        }
    }
    out
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp()
}

/// Maximize `sum(a) - 1/2 a'Qa` over `{y'a = 0, 0 <= a <= ub}` by accelerated
/// projected gradient; projection onto the feasible set by bisection on the
/// equality multiplier. Returns `(alpha, objective)`.
pub fn dual_oracle(x: &[Vec<f64>], y: &[f64], ub: &[f64], gamma: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * rbf(&x[i], &x[j], gamma)).collect())
        .collect();
    // Lipschitz bound: largest row sum of |Q|
    let l = q
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let project = |v: &[f64]| -> Vec<f64> {
        let at = |lam: f64| -> (Vec<f64>, f64) {
            let a: Vec<f64> = (0..n).map(|i| (v[i] - lam * y[i]).clamp(0.0, ub[i])).collect();
            let s = (0..n).map(|i| y[i] * a[i]).sum();
            (a, s)
        };
        // beyond +-(max |v| + 1) every coordinate is clipped
        let m = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs())) + 1.0;
        let (mut lo, mut hi) = (-m, m);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            // s(lam) is non-increasing in lam
            if at(mid).1 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi)).0
    };
    let obj = |a: &[f64]| -> f64 {
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| a[i] * q[i][j] * a[j]).sum::<f64>()).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..20_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q[i][j] * z[j]).sum::<f64>())
            .collect();
        let step: Vec<f64> = (0..n).map(|i| z[i] + grad[i] / l).collect();
        let next = project(&step);
        // gradient restart: drop momentum when it points against progress
        let against: f64 = (0..n).map(|i| (z[i] - next[i]) * (next[i] - a[i])).sum();
        if against > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = (0..n)
            .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - a[i]))
            .collect();
        t = t_next;
        a = next;
    }
    let f = obj(&a);
    (a, f)
}

/// One synthetic design per index; parts `SYN<i>`, version `T<seed>`.
pub fn synth_specs(seed: u64, count: usize, host_gates: usize) -> Vec<TrojanSpec> {
    (0..count)
        .map(|i| TrojanSpec {
            trigger_width: 12 + i % 5,
            payload: if i % 2 == 0 {
                Payload::MuxLeak
            } else {
                Payload::XorCorrupt
            },
            host_gates,
            seed: seed * 1000 + i as u64,
        })
        .collect()
}

pub fn synth_dataset(specs: &[TrojanSpec]) -> Dataset {
    let lib = CellLibrary::builtin();
    let labeler = Labeler::default();
    let cfg = FeatureConfig::default();
    let parts = specs.iter().enumerate().map(|(i, s)| {
        let (text, _) = synthgen::generate(s).unwrap();
        let ir = parse_netlist(&text, &lib).unwrap();
        Dataset::new(featex::extract_all(
            &ir,
            &format!("SYN{i}"),
            &format!("T{}", s.seed),
            &labeler,
            &cfg,
        ))
        .unwrap()
    });
    Dataset::combine(parts).unwrap()
}

pub struct PipelineRun {
    /// Every artifact and report as `(name, bytes)`.
    pub artifacts: Vec<(String, String)>,
    pub ensemble: propxai::PropertyEnsemble,
    pub kb: propxai::KnowledgeBase,
    pub svm_all: netlist_sentinel::svm::TrainedSvm,
    pub index: TrainingIndex,
    pub prop_recall: f64,
    pub case_recall: f64,
    pub agreement: f64,
    pub test_trojans: usize,
}

/// Desk-scale run: 10 synthetic designs, 80/20 split, both architectures.
pub fn run_pipeline(seed: u64) -> PipelineRun {
    run_pipeline_with(seed, netlist_sentinel::metrics::Metric::BalancedAccuracy)
}

pub fn run_pipeline_with(seed: u64, metric: netlist_sentinel::metrics::Metric) -> PipelineRun {
    let ds = synth_dataset(&synth_specs(seed, 10, 150));
    let split = dataset::split(&ds, 0.2, seed).unwrap();
    let cfg = EnsembleConfig {
        grid: GridSpec {
            seed,
            metric,
            ..GridSpec::default()
        },
        train: TrainOptions::default(),
    };
    let trained = propxai::train_ensemble(&split.train, &cfg).unwrap();
    let b = dataset::balance(&split.train, Class::Trojan).unwrap();
    let (svm_all, _) = propxai::train_engine(
        &split.train,
        FeatureSet::FULL,
        netlist_sentinel::ClassMap::new(b, 1.0),
        &cfg,
    )
    .unwrap();
    let index = casexai::build_index(&split.train).unwrap();

    let mut artifacts = Vec::new();
    for (i, m) in trained.ensemble.models.iter().enumerate() {
        artifacts.push((format!("property_{:02}.json", i + 1), m.to_json()));
    }
    artifacts.push(("svm_all.json".into(), svm_all.to_json()));
    artifacts.push(("kb.json".into(), trained.kb.to_json()));
    artifacts.push(("index.json".into(), index.to_json()));
    artifacts.push(("split.json".into(), serde_json::to_string(&split.manifest()).unwrap()));

    let (mut prop_hits, mut case_hits, mut trojans) = (0usize, 0usize, 0usize);
    let mut report = String::new();
    for r in &split.test.records {
        let v = propxai::decide(&trained.ensemble, &trained.kb, &r.features, propxai::DEFAULT_THRESHOLD).unwrap();
        let e = casexai::explain(&svm_all, &index, &r.features, casexai::DEFAULT_K).unwrap();
        if r.class == Class::Trojan {
            trojans += 1;
            prop_hits += usize::from(v.decision == Class::Trojan);
            case_hits += usize::from(e.prediction == Class::Trojan);
            report.push_str(&propxai::compose_rationale(&v, &trained.kb).render_text());
            report.push_str(&e.render_text(3));
        }
    }
    let agreement = casexai::agreement_rate(&svm_all, &index, &split.test, casexai::DEFAULT_K).unwrap();
    report.push_str(&format!("agreement {agreement}\n"));
    artifacts.push(("report.txt".into(), report));
    PipelineRun {
        artifacts,
        ensemble: trained.ensemble,
        kb: trained.kb,
        svm_all,
        index,
        prop_recall: prop_hits as f64 / trojans.max(1) as f64,
        case_recall: case_hits as f64 / trojans.max(1) as f64,
        agreement,
        test_trojans: trojans,
    }
}

/// Training index holding the given `(key, trojans, non-trojans)` shells plus
/// enough far-away non-trojans to make the balance exactly `b`.
pub fn fixture_index(rows: &[([u32; 5], usize, usize)], b: f64) -> TrainingIndex {
    let origin = |k: usize, class: &str| Origin {
        part: "FIX".into(),
        version: "T0".into(),
        line: k as u32 + 1,
        name: "NAND4X1".into(),
        net: format!("U{k}{class}.QN"),
    };
    let mut entries = BTreeMap::new();
    let mut k = 0;
    let (mut t, mut n) = (0, 0);
    for &(key, tc, nc) in rows {
        let mut e = IndexEntry::default();
        for _ in 0..tc {
            e.trojan_refs.push(origin(k, "t"));
            k += 1;
        }
        for _ in 0..nc {
            e.nontrojan_refs.push(origin(k, "n"));
            k += 1;
        }
        t += tc;
        n += nc;
        entries.insert(key, e);
    }
    let filler = (b * t as f64).round() as usize - n;
    let mut far = IndexEntry::default();
    for _ in 0..filler {
        far.nontrojan_refs.push(origin(k, "n"));
        k += 1;
    }
    entries.insert([60; 5], far);
    TrainingIndex::from_entries(entries).unwrap()
}

pub fn fv(a: [u32; 5]) -> FeatureVector {
    FeatureVector::from_array(a)
}
