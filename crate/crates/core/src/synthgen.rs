// SPDX-License-Identifier: Apache-2.0

//! Synthetic gate-level netlists with a rare-event trojan.
//!
//! The host is a layered random DAG of builtin combinational cells with about
//! one D flip-flop per ten gates. The trojan is an AND tree over
//! `trigger_width` internal nets (flip-flop outputs first) whose output either
//! switches a mux in front of a primary output to a leaked register value or
//! XORs an internal net. Trojan instances are prefixed `troj_`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    MuxLeak,
    XorCorrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrojanSpec {
    pub trigger_width: usize,
    pub payload: Payload,
    pub host_gates: usize,
    pub seed: u64,
}

impl Default for TrojanSpec {
    fn default() -> Self {
        Self {
            trigger_width: 4,
            payload: Payload::MuxLeak,
            host_gates: 150,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("trigger width must be at least 2, got {0}")]
    TriggerTooNarrow(usize),
    #[error("host needs at least {min} gates, got {got}")]
    HostTooSmall { min: usize, got: usize },
    #[error("trigger width {width} exceeds the {available} available internal nets")]
    Infeasible { width: usize, available: usize },
    #[error("no net can host the {0:?} payload")]
    NoPayloadSite(Payload),
}

/// Ground truth for one generated netlist. Counts refer to the graph the
/// feature extractor builds: one node per PI, instance and PO, one edge per
/// connected input pin plus one per PO.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub module: String,
    pub spec: TrojanSpec,
    /// Names of nets driven by trojan instances.
    pub trojan_nets: Vec<String>,
    /// The same nets as `INSTANCE.PIN`.
    pub trojan_outputs: Vec<String>,
    pub trojan_instances: Vec<String>,
    pub gate_count: usize,
    pub flip_flop_count: usize,
    pub pi_count: usize,
    pub po_count: usize,
    pub node_count: usize,
    pub edge_count: usize,
    /// One feature record per connected instance output.
    pub record_count: usize,
}

pub const MIN_HOST_GATES: usize = 4;

const DATA_PINS: [&str; 4] = ["A", "B", "C", "D"];

#[derive(Debug, Clone)]
struct Gate {
    name: String,
    cell: String,
    inputs: Vec<(&'static str, usize)>,
    out_pin: &'static str,
    out: usize,
    trojan: bool,
}

struct Builder {
    names: Vec<String>,
    gates: Vec<Gate>,
}

impl Builder {
    fn net(&mut self, name: String) -> usize {
        self.names.push(name);
        self.names.len() - 1
    }
}

fn comb_cell(rng: &mut ChaCha8Rng, arity: usize) -> (String, &'static str) {
    if arity == 1 {
        return if rng.gen_bool(0.5) {
            ("INVX1".into(), "QN")
        } else {
            ("BUFX1".into(), "Q")
        };
    }
    let families: &[(&str, &str)] = if arity == 2 {
        &[("NAND", "QN"), ("NOR", "QN"), ("AND", "Q"), ("OR", "Q"), ("XOR", "Q")]
    } else {
        &[("NAND", "QN"), ("NOR", "QN"), ("AND", "Q"), ("OR", "Q")]
    };
    let (family, pin) = families[rng.gen_range(0..families.len())];
    (format!("{family}{arity}X1"), pin)
}

fn arity(rng: &mut ChaCha8Rng) -> usize {
    match rng.gen_range(0..20) {
        0..=4 => 1,
        5..=13 => 2,
        14..=17 => 3,
        _ => 4,
    }
}

/// Split `n >= 2` items into groups of 2 to 4, as evenly as possible.
fn group_sizes(n: usize) -> Vec<usize> {
    let groups = n.div_ceil(4);
    (0..groups).map(|g| n / groups + usize::from(g < n % groups)).collect()
}

pub fn generate(spec: &TrojanSpec) -> Result<(String, Manifest), SynthError> {
    if spec.trigger_width < 2 {
        return Err(SynthError::TriggerTooNarrow(spec.trigger_width));
    }
    if spec.host_gates < MIN_HOST_GATES {
        return Err(SynthError::HostTooSmall {
            min: MIN_HOST_GATES,
            got: spec.host_gates,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = Builder {
        names: Vec::new(),
        gates: Vec::new(),
    };

    let clk = b.net("clk".into());
    let data_pis: Vec<usize> = (0..(spec.host_gates / 12).max(3))
        .map(|i| b.net(format!("in{i}")))
        .collect();
    let ff_count = (spec.host_gates / 10).max(1);
    let ff_q: Vec<usize> = (0..ff_count).map(|i| b.net(format!("r{i}"))).collect();

    // layered combinational host; layer l reads from PIs, registers and
    // earlier layers, mostly the one just before it
    let layers = (spec.host_gates / 12).clamp(2, 16);
    let mut layer_nets: Vec<Vec<usize>> = Vec::new();
    let mut comb_nets: Vec<usize> = Vec::new();
    let mut consumed = BTreeSet::new();
    let mut made = 0;
    for l in 0..layers {
        let size = spec.host_gates / layers + usize::from(l < spec.host_gates % layers);
        let mut pool: Vec<usize> = data_pis.iter().chain(&ff_q).copied().collect();
        for prev in &layer_nets {
            pool.extend(prev);
        }
        let recent: Vec<usize> = layer_nets.last().cloned().unwrap_or_else(|| pool.clone());
        let mut this = Vec::with_capacity(size);
        for _ in 0..size {
            let k = arity(&mut rng).min(pool.len());
            let mut picked: Vec<usize> = Vec::with_capacity(k);
            while picked.len() < k {
                let unused: Vec<usize> = recent.iter().copied().filter(|n| !consumed.contains(n)).collect();
                let n = if !unused.is_empty() && rng.gen_bool(0.5) {
                    unused[rng.gen_range(0..unused.len())]
                } else if rng.gen_bool(0.6) {
                    recent[rng.gen_range(0..recent.len())]
                } else {
                    pool[rng.gen_range(0..pool.len())]
                };
                if !picked.contains(&n) {
                    picked.push(n);
                }
            }
            let (cell, out_pin) = comb_cell(&mut rng, k);
            let out = b.net(format!("n{made}"));
            consumed.extend(picked.iter().copied());
            b.gates.push(Gate {
                name: format!("U{made}"),
                cell,
                inputs: picked.iter().enumerate().map(|(i, &n)| (DATA_PINS[i], n)).collect(),
                out_pin,
                out,
                trojan: false,
            });
            made += 1;
            this.push(out);
            comb_nets.push(out);
        }
        layer_nets.push(this);
    }

    // registers sample nets from every layer but the last
    let d_pool: Vec<usize> = layer_nets[..layers - 1].iter().flatten().copied().collect();
    for (i, &q) in ff_q.iter().enumerate() {
        let d = d_pool[rng.gen_range(0..d_pool.len())];
        consumed.insert(d);
        b.gates.push(Gate {
            name: format!("R{i}_reg"),
            cell: "DFFX1".into(),
            inputs: vec![("D", d), ("CLK", clk)],
            out_pin: "Q",
            out: q,
            trojan: false,
        });
    }

    // trigger taps: registers first, then the earliest combinational nets
    let available = ff_q.len() + comb_nets.len();
    if spec.trigger_width > available {
        return Err(SynthError::Infeasible {
            width: spec.trigger_width,
            available,
        });
    }
    let mut taps: Vec<usize> = ff_q.clone();
    taps.shuffle(&mut rng);
    if taps.len() > spec.trigger_width {
        taps.truncate(spec.trigger_width);
    } else {
        let extra = spec.trigger_width - taps.len();
        let early = &comb_nets[..(2 * extra).min(comb_nets.len()).max(extra)];
        let mut chosen: Vec<usize> = early.choose_multiple(&mut rng, extra).copied().collect();
        chosen.sort_unstable();
        taps.extend(chosen);
    }
    let mut level = taps.clone();
    let mut depth = 0;
    while level.len() > 1 {
        let mut next = Vec::new();
        let mut rest = level.as_slice();
        for (g, size) in group_sizes(level.len()).into_iter().enumerate() {
            let (group, tail) = rest.split_at(size);
            rest = tail;
            let out = b.net(format!("troj_t{depth}_{g}"));
            b.gates.push(Gate {
                name: format!("troj_and{depth}_{g}"),
                cell: format!("AND{size}X1"),
                inputs: group.iter().enumerate().map(|(i, &n)| (DATA_PINS[i], n)).collect(),
                out_pin: "Q",
                out,
                trojan: true,
            });
            next.push(out);
        }
        level = next;
        depth += 1;
    }
    let trigger = level[0];

    let max_comb_tap = taps.iter().filter(|t| comb_nets.contains(t)).max().copied();
    match spec.payload {
        Payload::MuxLeak => {
            let sinks: Vec<usize> = layer_nets
                .last()
                .unwrap()
                .iter()
                .copied()
                .filter(|n| !consumed.contains(n))
                .collect();
            let target = *sinks.choose(&mut rng).ok_or(SynthError::NoPayloadSite(spec.payload))?;
            let leak = ff_q[rng.gen_range(0..ff_q.len())];
            insert_payload(&mut b, target, "troj_mux", "MUX21X1", vec![("B", leak), ("S", trigger)]);
        }
        Payload::XorCorrupt => {
            let sites: Vec<usize> = comb_nets
                .iter()
                .copied()
                .filter(|n| consumed.contains(n) && max_comb_tap.is_none_or(|t| *n > t))
                .collect();
            let target = *sites.choose(&mut rng).ok_or(SynthError::NoPayloadSite(spec.payload))?;
            insert_payload(&mut b, target, "troj_xor", "XOR2X1", vec![("B", trigger)]);
        }
    }

    Ok(emit(spec, b, clk, &data_pis))
}

/// Move the host driver of `target` onto a fresh net and drive `target` from
/// a trojan cell whose `A` input is that fresh net.
fn insert_payload(b: &mut Builder, target: usize, name: &str, cell: &str, rest: Vec<(&'static str, usize)>) {
    let host = b
        .gates
        .iter()
        .position(|g| g.out == target)
        .expect("target has a driver");
    let fresh = b.net(format!("{}_h", b.names[target]));
    b.gates[host].out = fresh;
    let mut inputs = vec![("A", fresh)];
    inputs.extend(rest);
    b.gates.push(Gate {
        name: name.into(),
        cell: cell.into(),
        inputs,
        out_pin: "Q",
        out: target,
        trojan: true,
    });
}

fn emit(spec: &TrojanSpec, mut b: Builder, clk: usize, data_pis: &[usize]) -> (String, Manifest) {
    let mut used = vec![false; b.names.len()];
    for g in &b.gates {
        for &(_, n) in &g.inputs {
            used[n] = true;
        }
    }
    // every unread driven net becomes a primary output
    let mut outputs: Vec<usize> = b.gates.iter().map(|g| g.out).filter(|&n| !used[n]).collect();
    outputs.sort_unstable();
    for (k, &n) in outputs.iter().enumerate() {
        let old = std::mem::replace(&mut b.names[n], format!("out{k}"));
        if old.starts_with("troj") {
            b.names[n] = format!("troj_out{k}");
        }
    }
    let inputs: Vec<usize> = std::iter::once(clk).chain(data_pis.iter().copied()).collect();
    let ports: BTreeSet<usize> = inputs.iter().chain(&outputs).copied().collect();
    let module = format!("synth_{}", spec.seed);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "// synthetic netlist: seed {}, {} host gates, trigger width {}, payload {:?}",
        spec.seed, spec.host_gates, spec.trigger_width, spec.payload
    );
    let port_list: Vec<&str> = inputs.iter().chain(&outputs).map(|&n| b.names[n].as_str()).collect();
    let _ = writeln!(s, "module {module} ({});", port_list.join(", "));
    for &n in &inputs {
        let _ = writeln!(s, "  input {};", b.names[n]);
    }
    for &n in &outputs {
        let _ = writeln!(s, "  output {};", b.names[n]);
    }
    for g in &b.gates {
        if !ports.contains(&g.out) {
            let _ = writeln!(s, "  wire {};", b.names[g.out]);
        }
    }
    // registers, then host gates, then trojan gates
    let order: Vec<&Gate> = b
        .gates
        .iter()
        .filter(|g| g.cell.starts_with("DFF"))
        .chain(b.gates.iter().filter(|g| !g.cell.starts_with("DFF") && !g.trojan))
        .chain(b.gates.iter().filter(|g| g.trojan))
        .collect();
    for g in &order {
        let mut pins: Vec<String> = g.inputs.iter().map(|(p, n)| format!(".{p}({})", b.names[*n])).collect();
        pins.push(format!(".{}({})", g.out_pin, b.names[g.out]));
        if g.cell.starts_with("DFF") {
            pins.push(".QN()".into());
        }
        let _ = writeln!(s, "  {} {} ({});", g.cell, g.name, pins.join(", "));
    }
    let _ = writeln!(s, "endmodule");

    let trojans: Vec<&Gate> = b.gates.iter().filter(|g| g.trojan).collect();
    let pin_edges: usize = b.gates.iter().map(|g| g.inputs.len()).sum();
    let manifest = Manifest {
        module,
        spec: *spec,
        trojan_nets: trojans.iter().map(|g| b.names[g.out].clone()).collect(),
        trojan_outputs: trojans.iter().map(|g| format!("{}.{}", g.name, g.out_pin)).collect(),
        trojan_instances: trojans.iter().map(|g| g.name.clone()).collect(),
        gate_count: b.gates.len(),
        flip_flop_count: b.gates.iter().filter(|g| g.cell.starts_with("DFF")).count(),
        pi_count: inputs.len(),
        po_count: outputs.len(),
        node_count: inputs.len() + b.gates.len() + outputs.len(),
        edge_count: pin_edges + outputs.len(),
        record_count: b.gates.len(),
    };
    (s, manifest)
}
