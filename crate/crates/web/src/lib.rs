// SPDX-License-Identifier: Apache-2.0

//! Browser bindings: the property table, synthetic netlist generation with
//! feature extraction, and a small trained model that explains samples.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use netlist_sentinel::casexai::{self, TrainingIndex};
use netlist_sentinel::featex::{self, FeatureConfig, Labeler};
use netlist_sentinel::netlist::{parse_netlist, CellLibrary};
use netlist_sentinel::propxai::{self, EnsembleConfig, KnowledgeBase, PropertyEnsemble};
use netlist_sentinel::svm::{Gamma, GridSpec, TrainedSvm};
use netlist_sentinel::synthgen::{self, Payload, TrojanSpec};
use netlist_sentinel::{ClassMap, Dataset, FeatureSet, FeatureVector};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn parse_payload(s: &str) -> Result<Payload, JsError> {
    match s {
        "mux_leak" => Ok(Payload::MuxLeak),
        "xor_corrupt" => Ok(Payload::XorCorrupt),
        other => Err(js_err(format!("unknown payload `{other}`"))),
    }
}

fn parse_sample(s: &str) -> Result<FeatureVector, JsError> {
    let v: Vec<u32> = s
        .split(',')
        .map(|t| t.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| js_err(format!("sample `{s}` is not five non-negative integers")))?;
    let a: [u32; 5] = v
        .try_into()
        .map_err(|_| js_err(format!("sample `{s}` needs exactly five values")))?;
    Ok(FeatureVector::from_array(a))
}

#[derive(Serialize)]
struct PropertyRow {
    id: u8,
    features: Vec<&'static str>,
    explainability: f64,
}

/// The 31 feature-subset properties as JSON rows.
#[wasm_bindgen]
pub fn property_table() -> String {
    let rows: Vec<PropertyRow> = propxai::enumerate_properties()
        .iter()
        .map(|p| PropertyRow {
            id: p.id,
            features: p.features.names(),
            explainability: p.explainability(),
        })
        .collect();
    serde_json::to_string(&rows).expect("rows serialize")
}

fn synth_records(spec: &TrojanSpec, part: &str) -> Result<(String, synthgen::Manifest, Dataset), JsError> {
    let (text, manifest) = synthgen::generate(spec).map_err(js_err)?;
    let ir = parse_netlist(&text, &CellLibrary::builtin()).map_err(js_err)?;
    let records = featex::extract_all(
        &ir,
        part,
        &format!("S{}", spec.seed),
        &Labeler::default(),
        &FeatureConfig::default(),
    );
    Ok((text, manifest, Dataset::new(records).map_err(js_err)?))
}

/// Generate one trojan-inserted netlist and extract its labelled feature rows.
#[wasm_bindgen]
pub fn synth_extract(trigger_width: usize, payload: &str, host_gates: usize, seed: u64) -> Result<String, JsError> {
    let spec = TrojanSpec {
        trigger_width,
        payload: parse_payload(payload)?,
        host_gates,
        seed,
    };
    let (verilog, manifest, ds) = synth_records(&spec, "SYNTH")?;
    let rows: Vec<_> = ds
        .canonical()
        .into_iter()
        .map(|r| {
            json!({
                "net": r.origin.net,
                "cell": r.origin.name,
                "line": r.origin.line,
                "features": r.features.to_array(),
                "class": r.class,
            })
        })
        .collect();
    Ok(json!({"verilog": verilog, "manifest": manifest, "records": rows}).to_string())
}

/// Both explainers trained on a handful of synthetic designs at one fixed
/// grid point, so construction stays interactive.
#[wasm_bindgen]
pub struct Demo {
    ensemble: PropertyEnsemble,
    kb: KnowledgeBase,
    svm_all: TrainedSvm,
    index: TrainingIndex,
    records: usize,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(designs: usize, host_gates: usize, seed: u64) -> Result<Demo, JsError> {
        if designs == 0 {
            return Err(js_err("need at least one design"));
        }
        let parts = (0..designs)
            .map(|i| {
                let spec = TrojanSpec {
                    trigger_width: 8 + i % 5,
                    payload: if i % 2 == 0 {
                        Payload::MuxLeak
                    } else {
                        Payload::XorCorrupt
                    },
                    host_gates,
                    seed: seed * 1000 + i as u64,
                };
                synth_records(&spec, &format!("SYN{i}")).map(|(_, _, ds)| ds)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let train = Dataset::combine(parts).map_err(js_err)?;
        let cfg = EnsembleConfig {
            grid: GridSpec {
                c: vec![10.0],
                gamma: vec![Gamma::InverseDim],
                seed,
                ..GridSpec::default()
            },
            ..EnsembleConfig::default()
        };
        let trained = propxai::train_ensemble(&train, &cfg).map_err(js_err)?;
        let (svm_all, _) = propxai::train_engine(&train, FeatureSet::FULL, ClassMap::new(trained.balance, 1.0), &cfg)
            .map_err(js_err)?;
        let index = casexai::build_index(&train).map_err(js_err)?;
        Ok(Demo {
            ensemble: trained.ensemble,
            kb: trained.kb,
            svm_all,
            index,
            records: train.len(),
        })
    }

    #[wasm_bindgen(getter)]
    pub fn records(&self) -> usize {
        self.records
    }

    /// Explain a `LGFi,FFi,FFo,PI,PO` sample with both architectures.
    pub fn explain(&self, sample: &str, k: usize, threshold: f64) -> Result<String, JsError> {
        let x = parse_sample(sample)?;
        let verdict = propxai::decide(&self.ensemble, &self.kb, &x, threshold).map_err(js_err)?;
        let rationale = propxai::compose_rationale(&verdict, &self.kb);
        let case = casexai::explain(&self.svm_all, &self.index, &x, k).map_err(js_err)?;
        Ok(json!({
            "prop": {
                "decision": rationale.decision,
                "text": rationale.render_text(),
            },
            "case": {
                "prediction": case.prediction,
                "correspondence": case.correspondence,
                "text": case.render_text(3),
            },
        })
        .to_string())
    }
}
