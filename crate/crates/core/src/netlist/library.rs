// SPDX-License-Identifier: Apache-2.0

//! Cell library: pin directions and sequential/combinational kind per cell.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    #[serde(rename = "comb")]
    Combinational,
    #[serde(rename = "ff")]
    FlipFlop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDef {
    pub name: String,
    pub kind: CellKind,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl CellDef {
    pub fn new(name: &str, kind: CellKind, inputs: &[&str], outputs: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn validate(&self) -> Result<(), LibraryError> {
        if self.outputs.is_empty() {
            return Err(LibraryError::NoOutputs(self.name.clone()));
        }
        if self.inputs.is_empty() {
            return Err(LibraryError::NoInputs(self.name.clone()));
        }
        let mut seen = BTreeSet::new();
        for pin in self.inputs.iter().chain(&self.outputs) {
            if !seen.insert(pin.as_str()) {
                return Err(LibraryError::DuplicatePin {
                    cell: self.name.clone(),
                    pin: pin.clone(),
                });
            }
        }
        Ok(())
    }
}

/// What to do when a netlist instantiates a cell the library does not know.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultPolicy {
    #[default]
    Error,
    InferCombinational,
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("malformed cell library: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("duplicate cell `{0}`")]
    DuplicateCell(String),
    #[error("cell `{0}` has no output pins")]
    NoOutputs(String),
    #[error("cell `{0}` has no input pins")]
    NoInputs(String),
    #[error("cell `{cell}` lists pin `{pin}` more than once")]
    DuplicatePin { cell: String, pin: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellLibrary {
    cells: BTreeMap<String, CellDef>,
    pub default_policy: DefaultPolicy,
}

#[derive(Serialize, Deserialize)]
struct LibraryDoc {
    #[serde(default)]
    cells: Vec<CellDef>,
    #[serde(default)]
    default_policy: DefaultPolicy,
}

/// Output pin names recognised when a cell has to be inferred.
const INFERRED_OUTPUT_PINS: &[&str] = &["Y", "Z", "ZN", "Q", "QN", "O", "OUT", "X"];

impl CellLibrary {
    pub fn new(default_policy: DefaultPolicy) -> Self {
        Self {
            cells: BTreeMap::new(),
            default_policy,
        }
    }

    pub fn insert(&mut self, cell: CellDef) -> Result<(), LibraryError> {
        cell.validate()?;
        if self.cells.contains_key(&cell.name) {
            return Err(LibraryError::DuplicateCell(cell.name));
        }
        self.cells.insert(cell.name.clone(), cell);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CellDef> {
        self.cells.get(name)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = &CellDef> {
        self.cells.values()
    }

    /// Resolve a cell used by an instance. Under [`DefaultPolicy::InferCombinational`]
    /// an unknown cell is synthesised from the pin names it is connected with:
    /// conventional output names (`Y`, `Q`, `QN`, ...) become outputs and every
    /// other pin an input. Positional connections treat the first pin as output.
    pub(crate) fn resolve(&self, name: &str, named_pins: Option<&[String]>, positional: usize) -> Option<CellDef> {
        if let Some(cell) = self.cells.get(name) {
            return Some(cell.clone());
        }
        if self.default_policy == DefaultPolicy::Error {
            return None;
        }
        let (inputs, outputs) = match named_pins {
            Some(pins) => {
                let (outs, ins): (Vec<String>, Vec<String>) = pins
                    .iter()
                    .cloned()
                    .partition(|p| INFERRED_OUTPUT_PINS.contains(&p.to_ascii_uppercase().as_str()));
                (ins, outs)
            }
            None => (
                (1..positional).map(|i| format!("I{i}")).collect(),
                vec!["O".to_string()],
            ),
        };
        Some(CellDef {
            name: name.to_string(),
            kind: CellKind::Combinational,
            inputs,
            outputs,
        })
    }

    /// Parse the JSON library document
    /// `{ "cells": [ { "name", "kind": "comb"|"ff", "inputs", "outputs" } ] }`.
    pub fn from_json(text: &str) -> Result<Self, LibraryError> {
        let doc: LibraryDoc = serde_json::from_str(text)?;
        let mut lib = CellLibrary::new(doc.default_policy);
        for cell in doc.cells {
            lib.insert(cell)?;
        }
        Ok(lib)
    }

    pub fn to_json(&self) -> String {
        let doc = LibraryDoc {
            cells: self.cells.values().cloned().collect(),
            default_policy: self.default_policy,
        };
        serde_json::to_string_pretty(&doc).expect("library serializes")
    }

    /// SAED/LEDA-style cells: NAND/NOR/AND/OR/XOR/XNOR with 2 to 8 inputs,
    /// INV/BUF, 2:1 and 4:1 muxes and D flip-flop variants.
    ///
    /// Inverting cells drive `QN`, non-inverting cells drive `Q`. Data inputs are
    /// named `A`, `B`, `C`, ... in order.
    pub fn builtin() -> Self {
        const DATA_PINS: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];
        let mut lib = CellLibrary::new(DefaultPolicy::Error);
        let mut add = |cell: CellDef| lib.insert(cell).expect("builtin cells are well formed");
        use CellKind::*;
        for drive in [1, 2] {
            add(CellDef::new(&format!("INVX{drive}"), Combinational, &["A"], &["QN"]));
            add(CellDef::new(&format!("BUFX{drive}"), Combinational, &["A"], &["Q"]));
        }
        for (family, out) in [
            ("NAND", "QN"),
            ("NOR", "QN"),
            ("XNOR", "QN"),
            ("AND", "Q"),
            ("OR", "Q"),
            ("XOR", "Q"),
        ] {
            for arity in 2..=8 {
                add(CellDef::new(
                    &format!("{family}{arity}X1"),
                    Combinational,
                    &DATA_PINS[..arity],
                    &[out],
                ));
            }
        }
        add(CellDef::new("MUX21X1", Combinational, &["A", "B", "S"], &["Q"]));
        add(CellDef::new(
            "MUX41X1",
            Combinational,
            &["A", "B", "C", "D", "S0", "S1"],
            &["Q"],
        ));
        add(CellDef::new("DFFX1", FlipFlop, &["D", "CLK"], &["Q", "QN"]));
        add(CellDef::new("DFFARX1", FlipFlop, &["D", "CLK", "RSTB"], &["Q", "QN"]));
        add(CellDef::new("DFFASX1", FlipFlop, &["D", "CLK", "SETB"], &["Q", "QN"]));
        add(CellDef::new(
            "DFFSSRX1",
            FlipFlop,
            &["D", "RSTB", "SETB", "CLK"],
            &["Q", "QN"],
        ));
        add(CellDef::new(
            "SDFFX1",
            FlipFlop,
            &["D", "SI", "SE", "CLK"],
            &["Q", "QN"],
        ));
        lib
    }
}
