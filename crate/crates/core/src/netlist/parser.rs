// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap};

use super::lexer::{tokenize, Tok, Token};
use super::{CellLibrary, Driver, Instance, Net, NetId, NetlistIr, ParseError, ParseErrorKind, PinConnection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Input,
    Output,
    Wire,
}

#[derive(Debug)]
struct Decl {
    name: String,
    range: Option<(u64, u64)>,
    dir: Dir,
    line: usize,
}

#[derive(Debug, Clone)]
enum NetRef {
    Name { name: String, index: Option<u64> },
    Literal(String),
}

#[derive(Debug)]
enum Connections {
    Named(Vec<(String, Option<NetRef>, usize)>),
    Positional(Vec<Option<NetRef>>),
}

#[derive(Debug)]
struct InstanceAst {
    cell: String,
    name: String,
    conns: Connections,
    line: usize,
}

#[derive(Debug, Default)]
struct ModuleAst {
    name: String,
    header_ports: Vec<(String, usize)>,
    decls: Vec<Decl>,
    assigns: Vec<(NetRef, NetRef, usize)>,
    instances: Vec<InstanceAst>,
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.line)
            .unwrap_or(1)
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Result<&'a Token, ParseError> {
        let tok = self
            .toks
            .get(self.pos)
            .ok_or_else(|| ParseError::syntax(self.line(), "unexpected end of input"))?;
        self.pos += 1;
        Ok(tok)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        let line = self.line();
        match self.next()?.tok {
            Tok::Punct(p) if p == c => Ok(()),
            ref other => Err(ParseError::syntax(
                line,
                format!("expected `{c}`, found {}", describe(other)),
            )),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let line = self.line();
        match &self.next()?.tok {
            Tok::Ident(s) => Ok(s.clone()),
            other => Err(ParseError::syntax(
                line,
                format!("expected identifier, found {}", describe(other)),
            )),
        }
    }

    fn number(&mut self) -> Result<u64, ParseError> {
        let line = self.line();
        match self.next()?.tok {
            Tok::Number(n) => Ok(n),
            ref other => Err(ParseError::syntax(
                line,
                format!("expected number, found {}", describe(other)),
            )),
        }
    }

    fn peek_keyword(&self) -> Option<&'a str> {
        match self.peek() {
            Some(Tok::Ident(s)) => Some(s.as_str()),
            _ => None,
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(n) => format!("`{n}`"),
        Tok::Literal(s) => format!("`{s}`"),
        Tok::Punct(c) => format!("`{c}`"),
    }
}

fn direction(word: &str) -> Option<Dir> {
    match word {
        "input" => Some(Dir::Input),
        "output" => Some(Dir::Output),
        "wire" | "tri" => Some(Dir::Wire),
        _ => None,
    }
}

const UNSUPPORTED: &[&str] = &[
    "inout",
    "reg",
    "always",
    "initial",
    "parameter",
    "localparam",
    "generate",
    "function",
    "task",
    "integer",
    "specify",
    "defparam",
];

fn parse_range(cur: &mut Cursor) -> Result<Option<(u64, u64)>, ParseError> {
    if !cur.eat('[') {
        return Ok(None);
    }
    let msb = cur.number()?;
    cur.expect(':')?;
    let lsb = cur.number()?;
    cur.expect(']')?;
    Ok(Some((msb, lsb)))
}

fn parse_net_ref(cur: &mut Cursor) -> Result<NetRef, ParseError> {
    let line = cur.line();
    match &cur.next()?.tok {
        Tok::Ident(name) => {
            let index = if cur.eat('[') {
                let i = cur.number()?;
                if cur.peek() == Some(&Tok::Punct(':')) {
                    return Err(ParseError::syntax(line, "part-select connections are not supported"));
                }
                cur.expect(']')?;
                Some(i)
            } else {
                None
            };
            Ok(NetRef::Name {
                name: name.clone(),
                index,
            })
        }
        Tok::Literal(lit) => Ok(NetRef::Literal(lit.clone())),
        Tok::Punct('{') => Err(ParseError::syntax(line, "concatenations are not supported")),
        other => Err(ParseError::syntax(
            line,
            format!("expected net, found {}", describe(other)),
        )),
    }
}

/// Skip a balanced parenthesised group; the cursor sits on `(`.
fn skip_group(cur: &mut Cursor) -> Result<(), ParseError> {
    cur.expect('(')?;
    let mut depth = 1;
    while depth > 0 {
        match cur.next()?.tok {
            Tok::Punct('(') => depth += 1,
            Tok::Punct(')') => depth -= 1,
            _ => {}
        }
    }
    Ok(())
}

fn parse_decl_list(cur: &mut Cursor, dir: Dir, out: &mut Vec<Decl>) -> Result<(), ParseError> {
    if cur.peek_keyword() == Some("wire") && dir != Dir::Wire {
        cur.pos += 1;
    }
    let range = parse_range(cur)?;
    loop {
        let line = cur.line();
        let name = cur.ident()?;
        out.push(Decl { name, range, dir, line });
        if !cur.eat(',') {
            break;
        }
    }
    cur.expect(';')
}

fn parse_header(cur: &mut Cursor, module: &mut ModuleAst) -> Result<(), ParseError> {
    if !cur.eat('(') {
        return Ok(());
    }
    if cur.eat(')') {
        return Ok(());
    }
    let mut ansi: Option<(Dir, Option<(u64, u64)>)> = None;
    loop {
        let line = cur.line();
        if let Some(dir) = cur.peek_keyword().and_then(direction) {
            cur.pos += 1;
            if cur.peek_keyword() == Some("wire") {
                cur.pos += 1;
            }
            ansi = Some((dir, parse_range(cur)?));
        } else if cur.peek_keyword() == Some("inout") {
            return Err(ParseError::syntax(line, "inout ports are not supported"));
        }
        let name = cur.ident()?;
        if let Some((dir, range)) = ansi {
            module.decls.push(Decl {
                name: name.clone(),
                range,
                dir,
                line,
            });
        }
        module.header_ports.push((name, line));
        if cur.eat(')') {
            return Ok(());
        }
        cur.expect(',')?;
    }
}

fn parse_connections(cur: &mut Cursor) -> Result<Connections, ParseError> {
    cur.expect('(')?;
    if cur.eat(')') {
        return Ok(Connections::Positional(Vec::new()));
    }
    if cur.peek() == Some(&Tok::Punct('.')) {
        let mut named = Vec::new();
        loop {
            let line = cur.line();
            cur.expect('.')?;
            let pin = cur.ident()?;
            cur.expect('(')?;
            let net = if cur.eat(')') {
                None
            } else {
                let r = parse_net_ref(cur)?;
                cur.expect(')')?;
                Some(r)
            };
            named.push((pin, net, line));
            if cur.eat(')') {
                return Ok(Connections::Named(named));
            }
            cur.expect(',')?;
        }
    }
    let mut positional = Vec::new();
    loop {
        if matches!(cur.peek(), Some(Tok::Punct(',')) | Some(Tok::Punct(')'))) {
            positional.push(None);
        } else {
            positional.push(Some(parse_net_ref(cur)?));
        }
        if cur.eat(')') {
            return Ok(Connections::Positional(positional));
        }
        cur.expect(',')?;
    }
}

fn parse_module(toks: &[Token]) -> Result<ModuleAst, ParseError> {
    let mut cur = Cursor { toks, pos: 0 };
    let mut module = ModuleAst::default();
    match cur.peek_keyword() {
        Some("module") | Some("macromodule") => cur.pos += 1,
        _ => return Err(ParseError::syntax(cur.line(), "expected `module`")),
    }
    module.name = cur.ident()?;
    if cur.peek() == Some(&Tok::Punct('#')) {
        return Err(ParseError::syntax(cur.line(), "module parameters are not supported"));
    }
    parse_header(&mut cur, &mut module)?;
    cur.expect(';')?;
    loop {
        let line = cur.line();
        let word = cur.ident()?;
        if word == "endmodule" {
            break;
        }
        if let Some(dir) = direction(&word) {
            parse_decl_list(&mut cur, dir, &mut module.decls)?;
        } else if word == "supply0" || word == "supply1" {
            // tie nets: declared as wires without a driver
            parse_decl_list(&mut cur, Dir::Wire, &mut module.decls)?;
        } else if word == "assign" {
            loop {
                let line = cur.line();
                let lhs = parse_net_ref(&mut cur)?;
                cur.expect('=')?;
                let rhs = parse_net_ref(&mut cur)?;
                module.assigns.push((lhs, rhs, line));
                if !cur.eat(',') {
                    break;
                }
            }
            cur.expect(';')?;
        } else if UNSUPPORTED.contains(&word.as_str()) {
            return Err(ParseError::syntax(
                line,
                format!("`{word}` is not part of the structural subset"),
            ));
        } else {
            if cur.peek() == Some(&Tok::Punct('#')) {
                cur.pos += 1;
                skip_group(&mut cur)?;
            }
            loop {
                let line = cur.line();
                let name = cur.ident()?;
                if cur.peek() == Some(&Tok::Punct('[')) {
                    return Err(ParseError::syntax(line, "instance arrays are not supported"));
                }
                let conns = parse_connections(&mut cur)?;
                module.instances.push(InstanceAst {
                    cell: word.clone(),
                    name,
                    conns,
                    line,
                });
                if !cur.eat(',') {
                    break;
                }
            }
            cur.expect(';')?;
        }
    }
    if cur.pos < toks.len() {
        return Err(ParseError::syntax(
            cur.line(),
            "only one module per file is supported (hierarchy is not flattened)",
        ));
    }
    Ok(module)
}

/// Union-find over provisional net ids.
struct Aliases {
    parent: Vec<usize>,
}

impl Aliases {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut x = x;
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

struct Builder {
    names: Vec<String>,
    ids: HashMap<String, usize>,
    /// Declared buses: base name -> (msb, lsb).
    buses: HashMap<String, (u64, u64)>,
    scalars: BTreeSet<String>,
    dirs: HashMap<String, Dir>,
}

impl Builder {
    fn add(&mut self, name: String) -> usize {
        if let Some(&id) = self.ids.get(&name) {
            return id;
        }
        let id = self.names.len();
        self.ids.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    fn declare(&mut self, d: &Decl) -> Result<Vec<usize>, ParseError> {
        let dup = || ParseError::new(d.line, ParseErrorKind::Duplicate(d.name.clone()));
        match self.dirs.get(&d.name) {
            Some(prev) if *prev != Dir::Wire && d.dir != Dir::Wire && *prev != d.dir => return Err(dup()),
            Some(_) => {
                let same_shape = match d.range {
                    Some(r) => self.buses.get(&d.name) == Some(&r),
                    None => self.scalars.contains(&d.name),
                };
                if !same_shape {
                    return Err(dup());
                }
                if d.dir != Dir::Wire {
                    self.dirs.insert(d.name.clone(), d.dir);
                }
            }
            None => {
                self.dirs.insert(d.name.clone(), d.dir);
            }
        }
        Ok(match d.range {
            None => {
                self.scalars.insert(d.name.clone());
                vec![self.add(d.name.clone())]
            }
            Some((msb, lsb)) => {
                self.buses.insert(d.name.clone(), (msb, lsb));
                let bits: Vec<u64> = if msb >= lsb {
                    (lsb..=msb).rev().collect()
                } else {
                    (msb..=lsb).collect()
                };
                bits.into_iter().map(|i| self.add(format!("{}[{i}]", d.name))).collect()
            }
        })
    }

    fn resolve(&mut self, r: &NetRef, line: usize) -> Result<usize, ParseError> {
        match r {
            NetRef::Literal(lit) => Ok(self.add(lit.clone())),
            NetRef::Name { name, index: None } => {
                if self.scalars.contains(name) {
                    Ok(self.ids[name])
                } else if self.buses.contains_key(name) {
                    Err(ParseError::syntax(
                        line,
                        format!("whole-bus connection of `{name}` is not supported"),
                    ))
                } else {
                    Err(ParseError::new(line, ParseErrorKind::UndeclaredNet(name.clone())))
                }
            }
            NetRef::Name { name, index: Some(i) } => {
                let full = format!("{name}[{i}]");
                match (self.buses.get(name), self.ids.get(&full)) {
                    (Some(_), Some(&id)) => Ok(id),
                    _ => Err(ParseError::new(line, ParseErrorKind::UndeclaredNet(full))),
                }
            }
        }
    }
}

/// Parse a single-module structural netlist against `lib`.
pub fn parse_netlist(text: &str, lib: &CellLibrary) -> Result<NetlistIr, ParseError> {
    let toks = tokenize(text)?;
    let ast = parse_module(&toks)?;

    let mut b = Builder {
        names: Vec::new(),
        ids: HashMap::new(),
        buses: HashMap::new(),
        scalars: BTreeSet::new(),
        dirs: HashMap::new(),
    };
    let mut pis = Vec::new();
    let mut pos = Vec::new();
    let mut port_names: BTreeSet<String> = BTreeSet::new();
    for d in &ast.decls {
        let ids = b.declare(d)?;
        match d.dir {
            Dir::Input => pis.extend(ids),
            Dir::Output => pos.extend(ids),
            Dir::Wire => continue,
        }
        port_names.insert(d.name.clone());
    }
    for (port, line) in &ast.header_ports {
        if !port_names.contains(port) {
            return Err(ParseError::syntax(*line, format!("port `{port}` has no direction")));
        }
    }

    let mut assigns = Vec::new();
    for (lhs, rhs, line) in &ast.assigns {
        assigns.push((b.resolve(lhs, *line)?, b.resolve(rhs, *line)?));
    }

    struct Conn {
        pin: String,
        net: usize,
        output: bool,
        order: usize,
    }
    let mut resolved = Vec::with_capacity(ast.instances.len());
    let mut seen_instances = BTreeSet::new();
    for inst in &ast.instances {
        if !seen_instances.insert(inst.name.as_str()) {
            return Err(ParseError::new(inst.line, ParseErrorKind::Duplicate(inst.name.clone())));
        }
        let (named_pins, positional) = match &inst.conns {
            Connections::Named(v) => (Some(v.iter().map(|(p, _, _)| p.clone()).collect::<Vec<_>>()), 0),
            Connections::Positional(v) => (None, v.len()),
        };
        let cell = lib
            .resolve(&inst.cell, named_pins.as_deref(), positional)
            .ok_or_else(|| ParseError::new(inst.line, ParseErrorKind::UnknownCell(inst.cell.clone())))?;
        let mut conns: Vec<Conn> = Vec::new();
        let mut bind = |pin: &str, r: &Option<NetRef>, line: usize, b: &mut Builder| -> Result<(), ParseError> {
            let (output, order) = if let Some(i) = cell.outputs.iter().position(|p| p == pin) {
                (true, i)
            } else if let Some(i) = cell.inputs.iter().position(|p| p == pin) {
                (false, i)
            } else {
                return Err(ParseError::new(
                    line,
                    ParseErrorKind::UnknownPin {
                        cell: cell.name.clone(),
                        pin: pin.to_string(),
                    },
                ));
            };
            if conns.iter().any(|c| c.pin == pin) {
                return Err(ParseError::syntax(line, format!("pin `{pin}` connected twice")));
            }
            if let Some(r) = r {
                if output && matches!(r, NetRef::Literal(_)) {
                    return Err(ParseError::syntax(
                        line,
                        format!("output pin `{pin}` tied to a constant"),
                    ));
                }
                conns.push(Conn {
                    pin: pin.to_string(),
                    net: b.resolve(r, line)?,
                    output,
                    order,
                });
            }
            Ok(())
        };
        match &inst.conns {
            Connections::Named(v) => {
                for (pin, r, line) in v {
                    bind(pin, r, *line, &mut b)?;
                }
            }
            Connections::Positional(v) => {
                let order: Vec<&String> = cell.outputs.iter().chain(&cell.inputs).collect();
                if v.len() > order.len() {
                    return Err(ParseError::syntax(
                        inst.line,
                        format!("`{}` takes {} connections, found {}", cell.name, order.len(), v.len()),
                    ));
                }
                for (pin, r) in order.into_iter().zip(v) {
                    bind(pin, r, inst.line, &mut b)?;
                }
            }
        }
        if !conns.iter().any(|c| c.output) {
            return Err(ParseError::new(
                inst.line,
                ParseErrorKind::UnconnectedOutput(inst.name.clone()),
            ));
        }
        conns.sort_by_key(|c| (c.output, c.order));
        resolved.push((inst, cell.kind, cell.inputs.len(), conns));
    }

    // Collapse assign aliases onto canonical nets, numbered by first appearance.
    let mut uf = Aliases {
        parent: (0..b.names.len()).collect(),
    };
    for &(l, r) in &assigns {
        uf.union(l, r);
    }
    let mut canon = vec![usize::MAX; b.names.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for id in 0..b.names.len() {
        let root = uf.find(id);
        if canon[root] == usize::MAX {
            canon[root] = groups.len();
            groups.push(Vec::new());
        }
        canon[id] = canon[root];
        groups[canon[id]].push(id);
    }
    let is_port = |id: usize| {
        let name = &b.names[id];
        let base = name.split('[').next().unwrap_or(name);
        matches!(b.dirs.get(base), Some(Dir::Input) | Some(Dir::Output))
    };
    let nets: Vec<Net> = groups
        .iter()
        .map(|members| {
            let primary = members.iter().copied().find(|&m| is_port(m)).unwrap_or(members[0]);
            Net {
                name: b.names[primary].clone(),
                aliases: members
                    .iter()
                    .filter(|&&m| m != primary)
                    .map(|&m| b.names[m].clone())
                    .collect(),
            }
        })
        .collect();
    let by_name: HashMap<String, NetId> = b
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), NetId(canon[i] as u32)))
        .collect();
    let dedup = |ids: Vec<usize>| {
        let mut out: Vec<NetId> = Vec::new();
        for id in ids {
            let n = NetId(canon[id] as u32);
            if !out.contains(&n) {
                out.push(n);
            }
        }
        out
    };
    let primary_inputs = dedup(pis);
    let primary_outputs = dedup(pos);

    let mut drivers: Vec<Option<Driver>> = vec![None; nets.len()];
    for &pi in &primary_inputs {
        if drivers[pi.index()].is_some() {
            return Err(ParseError::new(
                0,
                ParseErrorKind::MultipleDrivers(nets[pi.index()].name.clone()),
            ));
        }
        drivers[pi.index()] = Some(Driver::PrimaryInput);
    }
    let mut instances = Vec::with_capacity(resolved.len());
    for (idx, (ast_inst, kind, input_pin_count, conns)) in resolved.into_iter().enumerate() {
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for c in conns {
            let net = NetId(canon[c.net] as u32);
            if c.output {
                let slot = &mut drivers[net.index()];
                if slot.is_some() {
                    return Err(ParseError::new(
                        ast_inst.line,
                        ParseErrorKind::MultipleDrivers(nets[net.index()].name.clone()),
                    ));
                }
                *slot = Some(Driver::Gate {
                    instance: idx,
                    pin: outputs.len(),
                });
                outputs.push(PinConnection { pin: c.pin, net });
            } else {
                inputs.push(PinConnection { pin: c.pin, net });
            }
        }
        instances.push(Instance {
            name: ast_inst.name.clone(),
            cell: ast_inst.cell.clone(),
            kind,
            inputs,
            outputs,
            input_pin_count,
            line: ast_inst.line,
        });
    }

    let warnings = primary_outputs
        .iter()
        .filter(|po| drivers[po.index()].is_none())
        .map(|po| format!("primary output `{}` has no driver", nets[po.index()].name))
        .collect();

    Ok(NetlistIr {
        module_name: ast.name,
        primary_inputs,
        primary_outputs,
        nets,
        instances,
        warnings,
        drivers,
        by_name,
    })
}
