// SPDX-License-Identifier: Apache-2.0

//! Structural gate-level Verilog netlists.
//!
//! Accepted subset: one module with a port list, `input`/`output`/`wire`
//! declarations (scalar or `[m:n]` ranged, ranges expanded to `name[i]` scalar
//! nets), cell instantiations with named or positional connections, and
//! identifier-to-identifier `assign` aliases. Instances of cells missing from the
//! [`CellLibrary`] are rejected unless the library infers them, so hierarchical
//! designs are not flattened.

mod lexer;
mod library;
mod parser;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

pub use library::{CellDef, CellKind, CellLibrary, DefaultPolicy, LibraryError};
pub use parser::parse_netlist;

pub fn load_cell_library(text: &str) -> Result<CellLibrary, LibraryError> {
    CellLibrary::from_json(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NetId(pub u32);

impl NetId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Net {
    /// Canonical name; a port name when the net is aliased to a port.
    pub name: String,
    /// Other names unified with this net through `assign`.
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PinConnection {
    pub pin: String,
    pub net: NetId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub cell: String,
    pub kind: CellKind,
    /// Connected input pins in cell-library order.
    pub inputs: Vec<PinConnection>,
    /// Connected output pins in cell-library order.
    pub outputs: Vec<PinConnection>,
    /// Number of input pins the cell declares, connected or not.
    pub input_pin_count: usize,
    /// 1-based line of the instance statement.
    pub line: usize,
}

impl Instance {
    pub fn pin_map(&self) -> BTreeMap<&str, NetId> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .map(|c| (c.pin.as_str(), c.net))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    PrimaryInput,
    /// Output `pin` (index into `Instance::outputs`) of instance `instance`.
    Gate {
        instance: usize,
        pin: usize,
    },
}

#[derive(Debug, Clone)]
pub struct NetlistIr {
    pub module_name: String,
    pub primary_inputs: Vec<NetId>,
    pub primary_outputs: Vec<NetId>,
    pub nets: Vec<Net>,
    pub instances: Vec<Instance>,
    /// Non-fatal findings, e.g. undriven primary outputs.
    pub warnings: Vec<String>,
    drivers: Vec<Option<Driver>>,
    by_name: HashMap<String, NetId>,
}

impl NetlistIr {
    pub fn net(&self, id: NetId) -> &Net {
        &self.nets[id.index()]
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.nets[id.index()].name
    }

    /// Look up a net by its canonical name or any alias.
    pub fn net_id(&self, name: &str) -> Option<NetId> {
        self.by_name.get(name).copied()
    }

    pub fn driver(&self, id: NetId) -> Option<Driver> {
        self.drivers[id.index()]
    }

    pub fn is_primary_input(&self, id: NetId) -> bool {
        matches!(self.drivers[id.index()], Some(Driver::PrimaryInput))
    }

    pub fn is_primary_output(&self, id: NetId) -> bool {
        self.primary_outputs.contains(&id)
    }

    pub fn net_ids(&self) -> impl Iterator<Item = NetId> {
        (0..self.nets.len() as u32).map(NetId)
    }

    /// Nets with neither a primary-input nor a gate driver.
    pub fn floating_nets(&self) -> Vec<NetId> {
        self.net_ids().filter(|&id| self.driver(id).is_none()).collect()
    }

    /// `INSTANCE.PIN` of the gate output driving `id`, if any.
    pub fn driver_label(&self, id: NetId) -> Option<String> {
        match self.driver(id)? {
            Driver::Gate { instance, pin } => {
                let inst = &self.instances[instance];
                Some(format!("{}.{}", inst.name, inst.outputs[pin].pin))
            }
            Driver::PrimaryInput => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown cell `{0}` (submodules are not flattened)")]
    UnknownCell(String),
    #[error("cell `{cell}` has no pin `{pin}`")]
    UnknownPin { cell: String, pin: String },
    #[error("undeclared net `{0}`")]
    UndeclaredNet(String),
    #[error("net `{0}` has more than one driver")]
    MultipleDrivers(String),
    #[error("instance `{0}` has no connected output pin")]
    UnconnectedOutput(String),
    #[error("duplicate declaration `{0}`")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub(crate) fn new(line: usize, kind: ParseErrorKind) -> Self {
        Self { line, kind }
    }

    pub(crate) fn syntax(line: usize, msg: impl Into<String>) -> Self {
        Self::new(line, ParseErrorKind::Syntax(msg.into()))
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.kind)
    }
}
