// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::{json, Value};

use netlist_sentinel::casexai::{self, TrainingIndex};
use netlist_sentinel::dataset::{self, SourceEntry};
use netlist_sentinel::featex::{self, Labeler};
use netlist_sentinel::metrics::Confusion;
use netlist_sentinel::netlist::parse_netlist;
use netlist_sentinel::propxai::{self, EnsembleConfig, KnowledgeBase, PropertyEnsemble, PROPERTY_COUNT};
use netlist_sentinel::svm::TrainedSvm;
use netlist_sentinel::synthgen::{self, Payload, TrojanSpec};
use netlist_sentinel::{Class, ClassMap, Dataset, FeatureSet, FeatureVector};

use crate::config::RunConfig;
use crate::{data, usage, Arch, Failure, Outcome};

type CmdResult = Result<Outcome, Failure>;

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(data)?;
    }
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(data)
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    Dataset::load(path)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(data)
}

/// `RS232-T1000.v` gives part `RS232`, version `T1000`.
pub fn part_version(path: &Path) -> (String, String) {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match stem.rsplit_once('-') {
        Some((part, version)) if !part.is_empty() => (part.to_string(), version.to_string()),
        _ => (stem, String::new()),
    }
}

pub fn extract(cfg: &RunConfig, netlists: &[PathBuf]) -> CmdResult {
    let lib = cfg.library().map_err(data)?;
    let labeler = Labeler::new(&cfg.label_patterns).map_err(usage)?;
    let fcfg = cfg.features();
    let mut parts = Vec::new();
    let mut files = Vec::new();
    for path in netlists {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(data)?;
        let ir = parse_netlist(&text, &lib).map_err(|e| data(anyhow!("{}:{}: {}", path.display(), e.line, e.kind)))?;
        for w in &ir.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        let (part, version) = part_version(path);
        let mut ds = Dataset::new(featex::extract_all(&ir, &part, &version, &labeler, &fcfg))
            .with_context(|| format!("{}", path.display()))
            .map_err(data)?;
        let counts = ds.counts();
        println!("{}: {} nets, {} trojan", path.display(), ds.len(), counts.t);
        ds.source_manifest.push(SourceEntry {
            part: part.clone(),
            version: version.clone(),
            path: path.display().to_string(),
        });
        files.push(json!({
            "path": path.display().to_string(),
            "part": part,
            "version": version,
            "nets": ds.len(),
            "trojan": counts.t,
        }));
        parts.push(ds);
    }
    let ds = Dataset::combine(parts).map_err(data)?;
    let csv = cfg.out_dir.join("features.csv");
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))
        .map_err(data)?;
    ds.save(&csv)
        .with_context(|| format!("writing {}", csv.display()))
        .map_err(data)?;
    let counts = ds.counts();
    write(
        &cfg.out_dir.join("extract_report.json"),
        &to_json(&json!({
            "config": cfg,
            "files": files,
            "nets": ds.len(),
            "trojan": counts.t,
            "non_trojan": counts.n,
        })),
    )?;
    println!("{} nets ({} trojan) -> {}", ds.len(), counts.t, csv.display());
    Ok(Outcome::Done)
}

pub fn split(cfg: &RunConfig, csv: &Path) -> CmdResult {
    let ds = load_dataset(csv)?;
    let split = dataset::split(&ds, cfg.split.fraction, cfg.split.seed).map_err(data)?;
    let train = cfg.out_dir.join("train.csv");
    let test = cfg.out_dir.join("test.csv");
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))
        .map_err(data)?;
    split.train.save(&train).map_err(data)?;
    split.test.save(&test).map_err(data)?;
    let (tc, sc) = (split.train.counts(), split.test.counts());
    write(
        &cfg.out_dir.join("split.json"),
        &to_json(&json!({
            "config": cfg,
            "train": {"t": tc.t, "n": tc.n},
            "test": {"t": sc.t, "n": sc.n},
            "manifest": split.manifest(),
        })),
    )?;
    println!(
        "train: {} nets ({} trojan) -> {}",
        split.train.len(),
        tc.t,
        train.display()
    );
    println!(
        "test:  {} nets ({} trojan) -> {}",
        split.test.len(),
        sc.t,
        test.display()
    );
    Ok(Outcome::Done)
}

fn property_path(dir: &Path, id: usize) -> PathBuf {
    dir.join("ie").join(format!("property_{id:02}.json"))
}

pub fn train(cfg: &RunConfig, csv: &Path, arch: Arch) -> CmdResult {
    let ds = load_dataset(csv)?;
    let counts = ds.counts();
    if counts.t == 0 || counts.n == 0 {
        return Err(data(anyhow!(
            "training data needs both classes ({} trojan, {} non-trojan)",
            counts.t,
            counts.n
        )));
    }
    let b = dataset::balance(&ds, Class::Trojan).map_err(data)?;
    let ecfg = EnsembleConfig {
        grid: cfg.grid(),
        train: cfg.train_options(),
    };
    let out = &cfg.out_dir;
    let mut converged = true;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "records: {} ({} trojan, {} non-trojan)",
        ds.len(),
        counts.t,
        counts.n
    );
    let _ = writeln!(text, "b(trojan) = {b:.4}");
    let mut report = json!({
        "config": cfg,
        "arch": format!("{arch:?}").to_lowercase(),
        "records": ds.len(),
        "counts": {"t": counts.t, "n": counts.n},
        "balance_trojan": b,
    });

    if arch.prop() {
        let trained = propxai::train_ensemble(&ds, &ecfg).map_err(data)?;
        for (i, m) in trained.ensemble.models.iter().enumerate() {
            write(&property_path(out, i + 1), &m.to_json())?;
        }
        write(&out.join("kb.json"), &trained.kb.to_json())?;
        let _ = writeln!(
            text,
            "\n{:>2}  {:<22}  {:>8}  {:>6}  {:>8}  {:>13}  conv",
            "id", "features", "C", "gamma", "cv", cfg.propxai.metric
        );
        for r in &trained.reports {
            converged &= r.status.converged;
            let _ = writeln!(
                text,
                "{:>2}  {:<22}  {:>8}  {:>6.3}  {:>8.4}  {:>13.4}  {}",
                r.id,
                r.features.to_string(),
                r.params.c,
                r.params.gamma,
                r.cv_score,
                r.effectiveness,
                if r.status.converged { "yes" } else { "NO" }
            );
        }
        report["properties"] = serde_json::to_value(&trained.reports).expect("reports serialize");
    }

    if arch.case() {
        let (model, choice) =
            propxai::train_engine(&ds, FeatureSet::FULL, ClassMap::new(b, 1.0), &ecfg).map_err(data)?;
        converged &= choice.status.converged;
        write(&out.join("svm_all.json"), &model.to_json())?;
        let index = casexai::build_index(&ds).map_err(data)?;
        write(&out.join("index.json"), &index.to_json())?;
        let _ = writeln!(
            text,
            "\nall-feature svm: C {} gamma {:.3} cv {:.4} ({} support vectors)",
            choice.params.c,
            choice.params.gamma,
            choice.cv_score,
            model.support_vectors.len()
        );
        let _ = writeln!(
            text,
            "training index: {} keys, {} samples",
            index.key_count(),
            index.sample_count()
        );
        report["svm_all"] = json!({
            "params": choice.params,
            "cv_score": choice.cv_score,
            "status": choice.status,
            "support_vectors": model.support_vectors.len(),
        });
        report["index"] = json!({"keys": index.key_count(), "samples": index.sample_count()});
    }
    report["converged"] = json!(converged);
    write(&out.join("train_report.json"), &to_json(&report))?;
    write(&out.join("train_report.txt"), &text)?;
    print!("{text}");
    Ok(if converged {
        Outcome::Done
    } else {
        Outcome::ConvergenceWarning
    })
}

struct PropArtifacts {
    ensemble: PropertyEnsemble,
    kb: KnowledgeBase,
}

struct CaseArtifacts {
    model: TrainedSvm,
    index: TrainingIndex,
}

fn read_artifact(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("missing artifact {}", path.display()))
        .map_err(data)
}

fn load_prop(dir: &Path) -> Result<PropArtifacts, Failure> {
    let mut models = Vec::with_capacity(PROPERTY_COUNT);
    for id in 1..=PROPERTY_COUNT {
        let path = property_path(dir, id);
        let m = TrainedSvm::from_json(&read_artifact(&path)?)
            .with_context(|| format!("{}", path.display()))
            .map_err(data)?;
        models.push(m);
    }
    let kb = KnowledgeBase::from_json(&read_artifact(&dir.join("kb.json"))?).map_err(data)?;
    Ok(PropArtifacts {
        ensemble: PropertyEnsemble::new(models).map_err(data)?,
        kb,
    })
}

fn load_case(dir: &Path) -> Result<CaseArtifacts, Failure> {
    let model = TrainedSvm::from_json(&read_artifact(&dir.join("svm_all.json"))?).map_err(data)?;
    let index = TrainingIndex::from_json(&read_artifact(&dir.join("index.json"))?).map_err(data)?;
    Ok(CaseArtifacts { model, index })
}

pub enum Sample {
    Inline(String),
    Row(PathBuf, usize),
}

pub fn parse_sample(s: &str) -> Result<FeatureVector, Failure> {
    let values: Vec<u32> = s
        .split(',')
        .map(|v| v.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(anyhow!("malformed sample `{s}`: expected five non-negative integers")))?;
    let arr: [u32; 5] = values
        .try_into()
        .map_err(|_| usage(anyhow!("malformed sample `{s}`: expected five values")))?;
    Ok(FeatureVector::from_array(arr))
}

pub fn explain(cfg: &RunConfig, artifacts: &Path, sample: Sample, arch: Arch, as_json: bool) -> CmdResult {
    let (x, origin) = match sample {
        Sample::Inline(s) => (parse_sample(&s)?, None),
        Sample::Row(csv, row) => {
            let ds = load_dataset(&csv)?;
            let r = row
                .checked_sub(1)
                .and_then(|i| ds.records.get(i))
                .ok_or_else(|| usage(anyhow!("row {row} out of range (1..={})", ds.len())))?;
            (r.features, Some(r.origin.clone()))
        }
    };
    let mut doc = json!({"config": cfg, "sample": x.to_array(), "origin": origin});
    let mut text = format!("Sample {x}\n");
    if arch.prop() {
        let p = load_prop(artifacts)?;
        let v = propxai::decide(&p.ensemble, &p.kb, &x, cfg.propxai.threshold).map_err(data)?;
        let r = propxai::compose_rationale(&v, &p.kb);
        let _ = write!(text, "\nProperty-based\n{}", r.render_text());
        doc["prop"] = serde_json::to_value(&r).expect("rationale serializes");
    }
    if arch.case() {
        let c = load_case(artifacts)?;
        let e = casexai::explain(&c.model, &c.index, &x, cfg.casexai.k).map_err(data)?;
        let _ = write!(text, "\nCase-based\n{}", e.render_text(5));
        doc["case"] = e.to_value();
    }
    if as_json {
        print!("{}", to_json(&doc));
    } else {
        print!("{text}");
    }
    Ok(Outcome::Done)
}

fn score_doc(c: &Confusion) -> Value {
    json!({
        "confusion": c,
        "accuracy": c.accuracy(),
        "precision": {"t": c.precision(Class::Trojan), "n": c.precision(Class::NonTrojan)},
        "recall": {"t": c.recall(Class::Trojan), "n": c.recall(Class::NonTrojan)},
        "f1": c.f1(),
        "mcc": c.mcc(),
        "balanced_accuracy": c.balanced_accuracy(),
    })
}

fn score_text(s: &mut String, name: &str, c: &Confusion) {
    let _ = writeln!(s, "{name}");
    let _ = writeln!(s, "  confusion  tp {}  fp {}  tn {}  fn {}", c.tp, c.fp, c.tn, c.r#fn);
    let _ = writeln!(
        s,
        "  accuracy {:.4}  f1 {:.4}  mcc {:.4}  balanced accuracy {:.4}",
        c.accuracy(),
        c.f1(),
        c.mcc(),
        c.balanced_accuracy()
    );
    for class in Class::ALL {
        let _ = writeln!(
            s,
            "  {:<11} precision {:.4}  recall {:.4}",
            class.to_string(),
            c.precision(class),
            c.recall(class)
        );
    }
}

pub fn eval(cfg: &RunConfig, artifacts: &Path, test: &Path, arch: Arch) -> CmdResult {
    let ds = load_dataset(test)?;
    if ds.is_empty() {
        return Err(data(anyhow!("{} has no records", test.display())));
    }
    let prop = if arch.prop() { Some(load_prop(artifacts)?) } else { None };
    let case = if arch.case() { Some(load_case(artifacts)?) } else { None };

    let (mut pc, mut cc) = (Confusion::default(), Confusion::default());
    let (mut agree, mut both_same, mut explain_sum) = (0usize, 0usize, 0.0);
    for r in &ds.records {
        let pd = match &prop {
            Some(p) => {
                let v = propxai::decide(&p.ensemble, &p.kb, &r.features, cfg.propxai.threshold).map_err(data)?;
                pc.add(r.class, v.decision);
                explain_sum += v.explainability.get(v.decision);
                Some(v.decision)
            }
            None => None,
        };
        if let Some(c) = &case {
            let e = casexai::explain(&c.model, &c.index, &r.features, cfg.casexai.k).map_err(data)?;
            cc.add(r.class, e.prediction);
            agree += usize::from(e.agrees);
            both_same += usize::from(pd == Some(e.prediction));
        }
    }
    let n = ds.len() as f64;
    let mut doc = json!({"config": cfg, "test": test.display().to_string(), "records": ds.len()});
    let mut text = format!("{}: {} records\n", test.display(), ds.len());
    if prop.is_some() {
        let mut d = score_doc(&pc);
        d["mean_decision_explainability"] = json!(explain_sum / n);
        doc["prop"] = d;
        score_text(&mut text, "property-based", &pc);
        let _ = writeln!(text, "  mean decision explainability {:.1}%", 100.0 * explain_sum / n);
    }
    if case.is_some() {
        let mut d = score_doc(&cc);
        d["agreement_rate"] = json!(agree as f64 / n);
        doc["case"] = d;
        score_text(&mut text, "case-based", &cc);
        let _ = writeln!(text, "  neighbor agreement rate {:.4}", agree as f64 / n);
    }
    if prop.is_some() && case.is_some() {
        doc["prop_case_agreement"] = json!(both_same as f64 / n);
        let _ = writeln!(text, "prop/case decision agreement {:.4}", both_same as f64 / n);
    }
    write(&cfg.out_dir.join("eval_report.json"), &to_json(&doc))?;
    write(&cfg.out_dir.join("eval_report.txt"), &text)?;
    print!("{text}");
    Ok(Outcome::Done)
}

pub fn synth(cfg: &RunConfig, trigger_width: usize, payload: Payload, host_gates: usize, count: u64) -> CmdResult {
    for seed in cfg.split.seed..cfg.split.seed + count {
        let spec = TrojanSpec {
            trigger_width,
            payload,
            host_gates,
            seed,
        };
        let (text, manifest) = synthgen::generate(&spec).map_err(usage)?;
        let stem = format!("SYNTH-S{seed}");
        write(&cfg.out_dir.join(format!("{stem}.v")), &text)?;
        write(&cfg.out_dir.join(format!("{stem}.manifest.json")), &to_json(&manifest))?;
        println!(
            "{stem}.v: {} gates, {} trojan nets",
            manifest.gate_count,
            manifest.trojan_nets.len()
        );
    }
    Ok(Outcome::Done)
}
