// SPDX-License-Identifier: Apache-2.0

//! Circuit graph construction and the five per-net topology features.
//!
//! Level-counting convention, shared by every routine here:
//!
//! - `ffi` and `pi` count gates on the shortest upstream path, including the
//!   gate driving the net. A flip-flop output has `ffi = 0`, a primary input
//!   has `pi = 0`.
//! - `ffo` and `po` count gates on the shortest downstream path, excluding the
//!   driver. `ffo` includes the terminating flip-flop (a net feeding a
//!   flip-flop directly has `ffo = 1`); `po` excludes the output terminal (a
//!   primary output has `po = 0`).
//! - `ffi`/`ffo` stop at the first flip-flop. `pi`/`po` pass through
//!   flip-flops, counting each one as a level.
//! - Control pins of flip-flops (clock, reset, scan enable, ...) are skipped
//!   by upstream traversals when [`FeatureConfig::skip_control_pins`] is set.
//! - `lgfi` is the input-pin count of the driver plus the input-pin counts of
//!   the distinct gates driving its inputs. A flip-flop driver contributes
//!   only its own pins.
//!
//! Unreachable targets and longer paths report [`FeatureConfig::cap`].

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::Class;
use crate::dataset::{NetRecord, Origin};
use crate::netlist::{CellKind, Driver, NetId, NetlistIr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Feature {
    #[serde(rename = "LGFi")]
    Lgfi,
    #[serde(rename = "FFi")]
    Ffi,
    #[serde(rename = "FFo")]
    Ffo,
    #[serde(rename = "PI")]
    Pi,
    #[serde(rename = "PO")]
    Po,
}

impl Feature {
    pub const ALL: [Feature; 5] = [Feature::Lgfi, Feature::Ffi, Feature::Ffo, Feature::Pi, Feature::Po];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Lgfi => "LGFi",
            Feature::Ffi => "FFi",
            Feature::Ffo => "FFo",
            Feature::Pi => "PI",
            Feature::Po => "PO",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    pub lgfi: u32,
    pub ffi: u32,
    pub ffo: u32,
    pub pi: u32,
    pub po: u32,
}

impl FeatureVector {
    pub fn new(lgfi: u32, ffi: u32, ffo: u32, pi: u32, po: u32) -> Self {
        Self { lgfi, ffi, ffo, pi, po }
    }

    pub fn from_array(a: [u32; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(self) -> [u32; 5] {
        [self.lgfi, self.ffi, self.ffo, self.pi, self.po]
    }

    pub fn get(&self, f: Feature) -> u32 {
        self.to_array()[f.index()]
    }

    pub fn to_f64(self) -> [f64; 5] {
        self.to_array().map(f64::from)
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{}, {}, {}, {}, {}>",
            self.lgfi, self.ffi, self.ffo, self.pi, self.po
        )
    }
}

/// Subset of the five features, kept in canonical feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureSet(u8);

impl FeatureSet {
    pub const FULL: FeatureSet = FeatureSet(0b11111);

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits != 0 && bits <= 0b11111).then_some(FeatureSet(bits))
    }

    pub fn from_features(features: &[Feature]) -> Option<Self> {
        Self::from_bits(features.iter().fold(0, |acc, f| acc | (1 << f.index())))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, f: Feature) -> bool {
        self.0 & (1 << f.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Feature> {
        Feature::ALL.into_iter().filter(move |&f| self.contains(f))
    }

    /// Components of `v` selected by this set, as reals.
    pub fn project(self, v: &FeatureVector) -> Vec<f64> {
        self.iter().map(|f| f64::from(v.get(f))).collect()
    }

    pub fn names(self) -> Vec<&'static str> {
        self.iter().map(Feature::name).collect()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(", "))
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let features = Vec::<Feature>::deserialize(d)?;
        FeatureSet::from_features(&features).ok_or_else(|| serde::de::Error::custom("empty feature set"))
    }
}

pub const DEFAULT_CAP: u32 = 64;

/// Flip-flop pin names treated as control (not data) inputs.
pub const DEFAULT_CONTROL_PINS: &[&str] = &[
    "CLK", "CK", "CP", "CLOCK", "C", "G", "GN", "RST", "RSTB", "RSTN", "RN", "RESET", "RESETN", "R", "S", "SN", "SET",
    "SETB", "SETN", "CLR", "CLRN", "CLRB", "PRE", "PREN", "SE", "SI",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub cap: u32,
    pub skip_control_pins: bool,
    pub control_pins: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            skip_control_pins: true,
            control_pins: DEFAULT_CONTROL_PINS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FeatureConfig {
    fn is_control(&self, pin: &str) -> bool {
        self.control_pins.iter().any(|p| p.eq_ignore_ascii_case(pin))
    }
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("net `{0}` has no driver")]
    Undriven(String),
    #[error("invalid label pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error("at least one label pattern is required")]
    NoPatterns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    PrimaryInput(NetId),
    Gate(usize),
    PrimaryOutput(NetId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub net: NetId,
}

/// Directed graph of PI terminals, gates and PO terminals. Each edge runs from
/// a net's driver to one of its consumers.
#[derive(Debug, Clone)]
pub struct CircuitGraph<'a> {
    pub ir: &'a NetlistIr,
    /// PI terminals, then gates sorted by instance name, then PO terminals.
    pub nodes: Vec<NodeKind>,
    pub edges: Vec<Edge>,
    /// Per net: consuming `(instance, input index)` pairs.
    consumers: Vec<Vec<(usize, usize)>>,
}

pub fn build_graph(ir: &NetlistIr) -> CircuitGraph<'_> {
    let mut consumers = vec![Vec::new(); ir.nets.len()];
    for (i, inst) in ir.instances.iter().enumerate() {
        for (k, conn) in inst.inputs.iter().enumerate() {
            consumers[conn.net.index()].push((i, k));
        }
    }

    let mut gates: Vec<usize> = (0..ir.instances.len()).collect();
    gates.sort_by(|&a, &b| ir.instances[a].name.cmp(&ir.instances[b].name));
    let mut nodes: Vec<NodeKind> = ir.primary_inputs.iter().map(|&n| NodeKind::PrimaryInput(n)).collect();
    let mut pi_node = vec![usize::MAX; ir.nets.len()];
    for (i, &n) in ir.primary_inputs.iter().enumerate() {
        pi_node[n.index()] = i;
    }
    let mut gate_node = vec![0; ir.instances.len()];
    for g in gates {
        gate_node[g] = nodes.len();
        nodes.push(NodeKind::Gate(g));
    }
    let mut po_node = vec![usize::MAX; ir.nets.len()];
    for &n in &ir.primary_outputs {
        po_node[n.index()] = nodes.len();
        nodes.push(NodeKind::PrimaryOutput(n));
    }

    let mut edges = Vec::new();
    for net in ir.net_ids() {
        let from = match ir.driver(net) {
            Some(Driver::PrimaryInput) => pi_node[net.index()],
            Some(Driver::Gate { instance, .. }) => gate_node[instance],
            None => continue,
        };
        for &(inst, _) in &consumers[net.index()] {
            edges.push(Edge {
                from,
                to: gate_node[inst],
                net,
            });
        }
        if po_node[net.index()] != usize::MAX {
            edges.push(Edge {
                from,
                to: po_node[net.index()],
                net,
            });
        }
    }
    edges.sort_by_key(|e| (e.from, e.to, e.net));

    CircuitGraph {
        ir,
        nodes,
        edges,
        consumers,
    }
}

impl CircuitGraph<'_> {
    pub fn consumers(&self, net: NetId) -> &[(usize, usize)] {
        &self.consumers[net.index()]
    }

    fn gate_driver(&self, net: NetId) -> Option<usize> {
        match self.ir.driver(net) {
            Some(Driver::Gate { instance, .. }) => Some(instance),
            _ => None,
        }
    }

    fn is_ff(&self, inst: usize) -> bool {
        self.ir.instances[inst].kind == CellKind::FlipFlop
    }

    /// Input nets of `inst` followed by upstream traversals.
    fn upstream_inputs<'s>(&'s self, inst: usize, cfg: &'s FeatureConfig) -> impl Iterator<Item = NetId> + 's {
        let gate = &self.ir.instances[inst];
        let skip = cfg.skip_control_pins && gate.kind == CellKind::FlipFlop;
        gate.inputs
            .iter()
            .filter(move |c| !(skip && cfg.is_control(&c.pin)))
            .map(|c| c.net)
    }

    fn lgfi(&self, net: NetId) -> u32 {
        let Some(driver) = self.gate_driver(net) else {
            return 0;
        };
        let gate = &self.ir.instances[driver];
        let mut total = gate.input_pin_count;
        if gate.kind == CellKind::Combinational {
            let second: BTreeSet<usize> = gate
                .inputs
                .iter()
                .filter_map(|c| self.gate_driver(c.net))
                .filter(|&g| g != driver)
                .collect();
            total += second
                .iter()
                .map(|&g| self.ir.instances[g].input_pin_count)
                .sum::<usize>();
        }
        total as u32
    }

    /// Upstream BFS over gates starting at the net's driver (level 1).
    /// `hit` decides whether a gate at the current level reaches the target.
    fn upstream_bfs(
        &self,
        net: NetId,
        cfg: &FeatureConfig,
        through_ff: bool,
        hit: impl Fn(usize) -> bool,
    ) -> Option<u32> {
        let start = self.gate_driver(net)?;
        let mut seen = vec![false; self.ir.instances.len()];
        let mut queue = VecDeque::from([(start, 1u32)]);
        seen[start] = true;
        while let Some((g, depth)) = queue.pop_front() {
            if hit(g) {
                return Some(depth);
            }
            if !through_ff && self.is_ff(g) {
                continue;
            }
            for m in self.upstream_inputs(g, cfg) {
                if let Some(h) = self.gate_driver(m) {
                    if !seen[h] {
                        seen[h] = true;
                        queue.push_back((h, depth + 1));
                    }
                }
            }
        }
        None
    }

    /// Downstream BFS over consuming gates (level 1 = direct consumers).
    fn downstream_bfs(&self, net: NetId, through_ff: bool, hit: impl Fn(usize) -> bool) -> Option<u32> {
        let mut seen = vec![false; self.ir.instances.len()];
        let mut queue = VecDeque::new();
        for &(g, _) in self.consumers(net) {
            if !seen[g] {
                seen[g] = true;
                queue.push_back((g, 1u32));
            }
        }
        while let Some((g, depth)) = queue.pop_front() {
            if hit(g) {
                return Some(depth);
            }
            if !through_ff && self.is_ff(g) {
                continue;
            }
            for out in &self.ir.instances[g].outputs {
                for &(h, _) in self.consumers(out.net) {
                    if !seen[h] {
                        seen[h] = true;
                        queue.push_back((h, depth + 1));
                    }
                }
            }
        }
        None
    }
}

fn capped(v: Option<u32>, cap: u32) -> u32 {
    v.map_or(cap, |v| v.min(cap))
}

/// Features of one net, each computed with its own breadth-first search.
pub fn extract_features(g: &CircuitGraph, net: NetId, cfg: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    let ir = g.ir;
    let driver = ir
        .driver(net)
        .ok_or_else(|| FeatureError::Undriven(ir.net_name(net).to_string()))?;
    let cap = cfg.cap;

    let ffi = match driver {
        Driver::Gate { instance, .. } if g.is_ff(instance) => 0,
        Driver::PrimaryInput => cap,
        Driver::Gate { .. } => capped(
            g.upstream_bfs(net, cfg, false, |gate| {
                g.upstream_inputs(gate, cfg)
                    .any(|m| g.gate_driver(m).is_some_and(|h| g.is_ff(h)))
            }),
            cap,
        ),
    };
    let pi = if ir.is_primary_input(net) {
        0
    } else {
        capped(
            g.upstream_bfs(net, cfg, true, |gate| {
                g.upstream_inputs(gate, cfg).any(|m| ir.is_primary_input(m))
            }),
            cap,
        )
    };
    let ffo = capped(g.downstream_bfs(net, false, |gate| g.is_ff(gate)), cap);
    let po = if ir.is_primary_output(net) {
        0
    } else {
        capped(
            g.downstream_bfs(net, true, |gate| {
                ir.instances[gate].outputs.iter().any(|o| ir.is_primary_output(o.net))
            }),
            cap,
        )
    };

    Ok(FeatureVector {
        lgfi: g.lgfi(net).min(cap),
        ffi,
        ffo,
        pi,
        po,
    })
}

/// Features of every net at once via multi-source breadth-first searches.
/// Agrees with [`extract_features`] on every driven net.
pub fn feature_table(g: &CircuitGraph, cfg: &FeatureConfig) -> Vec<FeatureVector> {
    let ir = g.ir;
    let n = ir.nets.len();
    const UNSET: u32 = u32::MAX;

    type Step<'a> = &'a dyn Fn(NetId, &mut dyn FnMut(NetId));
    let bfs = |mut dist: Vec<u32>, step: Step| -> Vec<u32> {
        let mut order: Vec<usize> = (0..n).filter(|&i| dist[i] != UNSET).collect();
        order.sort_by_key(|&i| dist[i]);
        let mut queue: VecDeque<usize> = order.into();
        while let Some(m) = queue.pop_front() {
            let d = dist[m];
            step(NetId(m as u32), &mut |next: NetId| {
                if dist[next.index()] == UNSET {
                    dist[next.index()] = d + 1;
                    queue.push_back(next.index());
                }
            });
        }
        dist
    };

    // pi: forward from primary inputs through every gate.
    let mut pi0 = vec![UNSET; n];
    for &p in &ir.primary_inputs {
        pi0[p.index()] = 0;
    }
    let pi = bfs(pi0, &|m, push| {
        for &(gate, k) in g.consumers(m) {
            let inst = &ir.instances[gate];
            if cfg.skip_control_pins && inst.kind == CellKind::FlipFlop && cfg.is_control(&inst.inputs[k].pin) {
                continue;
            }
            for o in &inst.outputs {
                push(o.net);
            }
        }
    });

    // ffi: forward from flip-flop outputs through combinational gates.
    let mut ffi0 = vec![UNSET; n];
    for inst in ir.instances.iter().filter(|i| i.kind == CellKind::FlipFlop) {
        for o in &inst.outputs {
            ffi0[o.net.index()] = 0;
        }
    }
    let ffi = bfs(ffi0, &|m, push| {
        for &(gate, _) in g.consumers(m) {
            let inst = &ir.instances[gate];
            if inst.kind == CellKind::Combinational {
                for o in &inst.outputs {
                    push(o.net);
                }
            }
        }
    });

    // po: backward from primary outputs through every gate.
    let mut po0 = vec![UNSET; n];
    for &p in &ir.primary_outputs {
        po0[p.index()] = 0;
    }
    let po = bfs(po0, &|o, push| {
        if let Some(gate) = g.gate_driver(o) {
            for c in &ir.instances[gate].inputs {
                push(c.net);
            }
        }
    });

    // ffo: backward from flip-flop inputs through combinational gates.
    let mut ffo0 = vec![UNSET; n];
    for inst in ir.instances.iter().filter(|i| i.kind == CellKind::FlipFlop) {
        for c in &inst.inputs {
            ffo0[c.net.index()] = 1;
        }
    }
    let ffo = bfs(ffo0, &|o, push| {
        if let Some(gate) = g.gate_driver(o) {
            let inst = &ir.instances[gate];
            if inst.kind == CellKind::Combinational {
                for c in &inst.inputs {
                    push(c.net);
                }
            }
        }
    });

    let cap = cfg.cap;
    let clamp = |v: u32| if v == UNSET { cap } else { v.min(cap) };
    (0..n)
        .map(|i| {
            let net = NetId(i as u32);
            FeatureVector {
                lgfi: g.lgfi(net).min(cap),
                ffi: clamp(ffi[i]),
                ffo: clamp(ffo[i]),
                pi: clamp(pi[i]),
                po: clamp(po[i]),
            }
        })
        .collect()
}

/// Case-insensitive trojan name patterns.
#[derive(Debug, Clone)]
pub struct Labeler {
    patterns: Vec<Regex>,
}

pub const DEFAULT_LABEL_PATTERNS: &[&str] = &["troj"];

impl Labeler {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<Self, FeatureError> {
        if patterns.is_empty() {
            return Err(FeatureError::NoPatterns);
        }
        let patterns = patterns
            .iter()
            .map(|p| RegexBuilder::new(p.as_ref()).case_insensitive(true).build())
            .collect::<Result<_, _>>()?;
        Ok(Self { patterns })
    }

    pub fn matches(&self, s: &str) -> bool {
        self.patterns.iter().any(|p| p.is_match(s))
    }
}

impl Default for Labeler {
    fn default() -> Self {
        Self::new(DEFAULT_LABEL_PATTERNS).expect("default patterns compile")
    }
}

/// Trojan iff the driving instance name or any name of the net matches.
pub fn label_net(ir: &NetlistIr, net: NetId, labeler: &Labeler) -> Class {
    let n = ir.net(net);
    let driver_hit = match ir.driver(net) {
        Some(Driver::Gate { instance, .. }) => labeler.matches(&ir.instances[instance].name),
        _ => false,
    };
    if driver_hit || labeler.matches(&n.name) || n.aliases.iter().any(|a| labeler.matches(a)) {
        Class::Trojan
    } else {
        Class::NonTrojan
    }
}

/// One record per gate-driven net, ordered by driving instance name then
/// output pin order.
pub fn extract_all(
    ir: &NetlistIr,
    part: &str,
    version: &str,
    labeler: &Labeler,
    cfg: &FeatureConfig,
) -> Vec<NetRecord> {
    let graph = build_graph(ir);
    let table = feature_table(&graph, cfg);
    graph
        .nodes
        .iter()
        .filter_map(|n| match n {
            NodeKind::Gate(i) => Some(*i),
            _ => None,
        })
        .flat_map(|i| {
            let inst = &ir.instances[i];
            inst.outputs.iter().map(move |o| (inst, o))
        })
        .map(|(inst, out)| NetRecord {
            origin: Origin {
                part: part.to_string(),
                version: version.to_string(),
                line: inst.line as u32,
                name: inst.cell.clone(),
                net: format!("{}.{}", inst.name, out.pin),
            },
            features: table[out.net.index()],
            class: label_net(ir, out.net, labeler),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, CellLibrary};

    fn parse(src: &str) -> NetlistIr {
        parse_netlist(src, &CellLibrary::builtin()).unwrap()
    }

    const ONE_GATE: &str =
        "module top (a, b, y);\n input a, b;\n output y;\n NAND2X1 U1 (.A(a), .B(b), .QN(y));\nendmodule";

    fn inverter_chain(k: usize) -> String {
        let mut s = String::from("module chain (a, y);\n input a;\n output y;\n");
        for i in 1..k {
            s += &format!(" wire n{i};\n");
        }
        for i in 0..k {
            let input = if i == 0 { "a".to_string() } else { format!("n{i}") };
            let output = if i + 1 == k {
                "y".to_string()
            } else {
                format!("n{}", i + 1)
            };
            s += &format!(" INVX1 g{i} (.A({input}), .QN({output}));\n");
        }
        s + "endmodule\n"
    }

    #[test]
    fn one_gate_graph_counts() {
        let ir = parse(ONE_GATE);
        let g = build_graph(&ir);
        assert_eq!(g.nodes.len(), 4);
        assert_eq!(g.edges.len(), 3);
    }

    #[test]
    fn inverter_chain_counts() {
        for k in 1..6 {
            let ir = parse(&inverter_chain(k));
            let g = build_graph(&ir);
            assert_eq!(g.nodes.len(), k + 2);
            assert_eq!(g.edges.len(), k + 1);
        }
    }

    #[test]
    fn four_input_gate_fed_by_inputs() {
        let ir = parse(
            "module m (a, b, c, d, y);\n input a, b, c, d;\n output y;\n NAND4X1 U294 (.A(a), .B(b), .C(c), .D(d), .QN(y));\nendmodule",
        );
        let g = build_graph(&ir);
        let f = extract_features(&g, ir.net_id("y").unwrap(), &FeatureConfig::default()).unwrap();
        assert_eq!(f.lgfi, 4);
        assert_eq!(f.pi, 1);
        assert_eq!(f.po, 0);
        assert_eq!(f.ffi, DEFAULT_CAP);
        assert_eq!(f.ffo, DEFAULT_CAP);
    }

    const SEQ: &str = "module s (clk, a, b, y);
 input clk, a, b;
 output y;
 wire q, n1, n2, d;
 DFFX1 r0 (.D(d), .CLK(clk), .Q(q));
 NAND2X1 g1 (.A(q), .B(a), .QN(n1));
 INVX1 g2 (.A(n1), .QN(n2));
 AND2X1 g3 (.A(n2), .B(b), .Q(d));
 BUFX1 g4 (.A(q), .Q(y));
endmodule";

    #[test]
    fn sequential_levels() {
        let ir = parse(SEQ);
        let g = build_graph(&ir);
        let cfg = FeatureConfig::default();
        let f = |name: &str| extract_features(&g, ir.net_id(name).unwrap(), &cfg).unwrap();

        // flip-flop output: ffi 0, lgfi counts the flip-flop's own pins only
        let q = f("q");
        assert_eq!(q.ffi, 0);
        assert_eq!(q.lgfi, 2);
        assert_eq!(q.po, 1);
        // q -> g4 -> y and q -> g1 -> g2 -> g3 -> r0
        assert_eq!(q.ffo, 4);
        // b -> g3 -> r0 -> q: pi passes through the flip-flop's data pin
        assert_eq!(q.pi, 2);

        let n1 = f("n1");
        assert_eq!(n1.ffi, 1);
        assert_eq!(n1.pi, 1);
        assert_eq!(n1.ffo, 3);
        assert_eq!(n1.lgfi, 2 + 2);
        assert_eq!(n1.po, 4);

        let d = f("d");
        assert_eq!(d.ffo, 1);
        assert_eq!(d.ffi, 3);
        assert_eq!(d.pi, 1);
        assert_eq!(d.lgfi, 2 + 1);
        assert_eq!(d.po, 2);
    }

    #[test]
    fn clock_pins_excluded_upstream_when_configured() {
        let ir = parse(SEQ);
        let g = build_graph(&ir);
        let q = ir.net_id("q").unwrap();
        let mut cfg = FeatureConfig::default();
        assert_eq!(extract_features(&g, q, &cfg).unwrap().pi, 2);
        cfg.skip_control_pins = false;
        assert_eq!(extract_features(&g, q, &cfg).unwrap().pi, 1);
    }

    #[test]
    fn table_matches_single_net_bfs() {
        for cfg in [
            FeatureConfig::default(),
            FeatureConfig {
                cap: 3,
                ..FeatureConfig::default()
            },
        ] {
            let ir = parse(SEQ);
            let g = build_graph(&ir);
            let table = feature_table(&g, &cfg);
            for net in ir.net_ids() {
                if ir.driver(net).is_some() {
                    assert_eq!(
                        table[net.index()],
                        extract_features(&g, net, &cfg).unwrap(),
                        "{}",
                        ir.net_name(net)
                    );
                }
            }
        }
    }

    #[test]
    fn undriven_net_is_an_error() {
        let ir = parse("module m (a, y, z);\n input a;\n output y, z;\n INVX1 g (.A(a), .QN(y));\nendmodule");
        let g = build_graph(&ir);
        let err = extract_features(&g, ir.net_id("z").unwrap(), &FeatureConfig::default()).unwrap_err();
        assert!(matches!(err, FeatureError::Undriven(n) if n == "z"));
    }

    #[test]
    fn labels() {
        let ir = parse(
            "module m (a, y, z);\n input a;\n output y, z;\n INVX1 Trojan_Trigger_3 (.A(a), .QN(y));\n INVX1 U294 (.A(a), .QN(z));\nendmodule",
        );
        let l = Labeler::default();
        assert_eq!(label_net(&ir, ir.net_id("y").unwrap(), &l), Class::Trojan);
        assert_eq!(label_net(&ir, ir.net_id("z").unwrap(), &l), Class::NonTrojan);
        assert!(matches!(Labeler::new(&["("]), Err(FeatureError::Pattern(_))));
        assert!(matches!(Labeler::new::<&str>(&[]), Err(FeatureError::NoPatterns)));
    }

    #[test]
    fn one_gate_records() {
        let ir = parse(ONE_GATE);
        let recs = extract_all(&ir, "RS232", "T1000", &Labeler::default(), &FeatureConfig::default());
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.origin.net, "U1.QN");
        assert_eq!(r.origin.name, "NAND2X1");
        assert_eq!(r.origin.line, 4);
        assert_eq!(r.features, FeatureVector::new(2, DEFAULT_CAP, DEFAULT_CAP, 1, 0));
        assert_eq!(r.class, Class::NonTrojan);
    }

    #[test]
    fn buffer_on_shortest_pi_path_adds_one_level() {
        let base = "module m (a, b, y);\n input a, b;\n output y;\n wire n1, n2;\n INVX1 g1 (.A(a), .QN(n1));\n AND2X1 g2 (.A(n1), .B(n2), .Q(y));\n INVX1 g3 (.A(b), .QN(n2));\nendmodule";
        let buffered = "module m (a, b, y);\n input a, b;\n output y;\n wire n1, n2, bb;\n INVX1 g1 (.A(a), .QN(n1));\n AND2X1 g2 (.A(n1), .B(n2), .Q(y));\n BUFX1 g0 (.A(b), .Q(bb));\n INVX1 g3 (.A(bb), .QN(n2));\nendmodule";
        let cfg = FeatureConfig::default();
        let before = parse(base);
        let after = parse(buffered);
        let fb = extract_features(&build_graph(&before), before.net_id("n2").unwrap(), &cfg).unwrap();
        let fa = extract_features(&build_graph(&after), after.net_id("n2").unwrap(), &cfg).unwrap();
        assert_eq!(fa.pi, fb.pi + 1);
        assert_eq!((fa.ffo, fa.po), (fb.ffo, fb.po));
    }
}
