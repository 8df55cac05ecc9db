//! Netlist data model and text grammar.
//!
//! ```text
//! R <n+> <n-> <value>        resistor, ohms
//! L <n+> <n-> <value>        inductor, henries
//! C <n+> <n-> <value>        capacitor, farads
//! T <n1+> <n1-> <n2+> <n2-> <ratio>
//! P <n+> <n->                driving-point port (file order)
//! F <node> <node> ...        face cycle; the first F line is the outer face
//! # comment
//! ```
//! Node `0` is ground. Values take decimals, exponents or fractions (`3/4`).
//! An element keyword may carry a label suffix (`R1`, `Lload`).

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const GROUND: &str = "0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    R,
    L,
    C,
}

impl ElementKind {
    pub fn letter(&self) -> char {
        match self {
            ElementKind::R => 'R',
            ElementKind::L => 'L',
            ElementKind::C => 'C',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    TwoTerminal { kind: ElementKind, label: String, pos: usize, neg: usize, value: f64 },
    Transformer { label: String, p1: usize, n1: usize, p2: usize, n2: usize, ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Port {
    pub pos: usize,
    pub neg: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    elements: Vec<Element>,
    ports: Vec<Port>,
    faces: Option<Vec<Vec<usize>>>,
    sides: SideHint,
}

/// Per edge (elements, then ports) the two face sides `(face, position)` it
/// occupies, when known exactly. Node cycles alone cannot tell parallel
/// edges apart; this is dropped on any change and never written out.
pub(crate) type Sides = Vec<[(usize, usize); 2]>;

#[derive(Debug, Clone, Default)]
struct SideHint(Option<Sides>);

impl PartialEq for SideHint {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new()
    }
}

impl Netlist {
    pub fn new() -> Self {
        let mut index = HashMap::new();
        index.insert(GROUND.to_string(), 0);
        Netlist { nodes: vec![GROUND.to_string()], index, elements: vec![], ports: vec![], faces: None, sides: SideHint(None) }
    }

    pub fn node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.nodes.push(name.to_string());
        self.index.insert(name.to_string(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn faces(&self) -> Option<&[Vec<usize>]> {
        self.faces.as_deref()
    }

    pub fn add(&mut self, kind: ElementKind, pos: &str, neg: &str, value: f64) -> Result<()> {
        self.add_labeled(kind, "", pos, neg, value)
    }

    pub fn add_labeled(&mut self, kind: ElementKind, label: &str, pos: &str, neg: &str, value: f64) -> Result<()> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Netlist(format!("non-positive value {value} for {}{label}", kind.letter())));
        }
        if pos == neg {
            return Err(Error::Netlist(format!("{}{label} has both terminals on node {pos}", kind.letter())));
        }
        let (p, n) = (self.node(pos), self.node(neg));
        self.sides.0 = None;
        self.elements.push(Element::TwoTerminal { kind, label: label.into(), pos: p, neg: n, value });
        Ok(())
    }

    pub fn add_transformer(&mut self, label: &str, nodes: [&str; 4], ratio: f64) -> Result<()> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::Netlist(format!("non-positive turns ratio {ratio}")));
        }
        if nodes[0] == nodes[1] || nodes[2] == nodes[3] {
            return Err(Error::Netlist("transformer winding shorted to one node".into()));
        }
        let idx: Vec<usize> = nodes.iter().map(|n| self.node(n)).collect();
        self.sides.0 = None;
        self.elements.push(Element::Transformer { label: label.into(), p1: idx[0], n1: idx[1], p2: idx[2], n2: idx[3], ratio });
        Ok(())
    }

    pub fn add_port(&mut self, pos: &str, neg: &str) -> Result<()> {
        if pos == neg {
            return Err(Error::Netlist(format!("port terminals coincide ({pos})")));
        }
        let (p, n) = (self.node(pos), self.node(neg));
        if self.ports.iter().any(|q| (q.pos == p && q.neg == n) || (q.pos == n && q.neg == p)) {
            return Err(Error::Netlist(format!("duplicate port {pos} {neg}")));
        }
        self.sides.0 = None;
        self.ports.push(Port { pos: p, neg: n });
        Ok(())
    }

    /// Replace the embedding; validated against the current edges.
    pub fn set_faces(&mut self, faces: Option<Vec<Vec<usize>>>) -> Result<()> {
        self.faces = faces;
        self.sides.0 = None;
        if self.faces.is_some() {
            crate::netgraph::planar::validate_embedding(self)?;
        }
        Ok(())
    }

    pub(crate) fn set_faces_unchecked(&mut self, faces: Option<Vec<Vec<usize>>>) {
        self.faces = faces;
        self.sides.0 = None;
    }

    pub(crate) fn elements_mut(&mut self) -> &mut Vec<Element> {
        self.sides.0 = None;
        &mut self.elements
    }

    pub(crate) fn side_hint(&self) -> Option<&Sides> {
        self.sides.0.as_ref()
    }

    /// Attach exact face sides for the current faces, then validate.
    pub(crate) fn set_side_hint(&mut self, sides: Option<Sides>) -> Result<()> {
        self.sides.0 = sides;
        if self.faces.is_some() {
            crate::netgraph::planar::validate_embedding(self)?;
        }
        Ok(())
    }

    pub fn count(&self, kind: ElementKind) -> usize {
        self.elements.iter().filter(|e| matches!(e, Element::TwoTerminal { kind: k, .. } if *k == kind)).count()
    }

    pub fn transformer_count(&self) -> usize {
        self.elements.iter().filter(|e| matches!(e, Element::Transformer { .. })).count()
    }

    /// Nodes touched by an element or port.
    pub fn used_nodes(&self) -> HashSet<usize> {
        let mut s = HashSet::new();
        for e in &self.elements {
            match e {
                Element::TwoTerminal { pos, neg, .. } => {
                    s.insert(*pos);
                    s.insert(*neg);
                }
                Element::Transformer { p1, n1, p2, n2, .. } => {
                    s.extend([*p1, *n1, *p2, *n2]);
                }
            }
        }
        for p in &self.ports {
            s.insert(p.pos);
            s.insert(p.neg);
        }
        s
    }

    /// Netlist text; `parse_netlist(to_text())` gives back an identical value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let name = |i: usize| self.nodes[i].as_str();
        // declare node order so that re-parsing interns nodes identically
        let mut order_hint = Vec::new();
        for e in &self.elements {
            match e {
                Element::TwoTerminal { kind, label, pos, neg, value } => {
                    order_hint.extend([*pos, *neg]);
                    let _ = writeln!(out, "{}{} {} {} {}", kind.letter(), label, name(*pos), name(*neg), fmt_value(*value));
                }
                Element::Transformer { label, p1, n1, p2, n2, ratio } => {
                    order_hint.extend([*p1, *n1, *p2, *n2]);
                    let _ = writeln!(out, "T{} {} {} {} {} {}", label, name(*p1), name(*n1), name(*p2), name(*n2), fmt_value(*ratio));
                }
            }
        }
        for p in &self.ports {
            let _ = writeln!(out, "P {} {}", name(p.pos), name(p.neg));
        }
        if let Some(faces) = &self.faces {
            for f in faces {
                let names: Vec<&str> = f.iter().map(|&i| name(i)).collect();
                let _ = writeln!(out, "F {}", names.join(" "));
            }
        }
        out
    }
}

fn fmt_value(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

fn parse_value(tok: &str) -> Option<f64> {
    if let Some((a, b)) = tok.split_once('/') {
        let a: f64 = a.trim().parse().ok()?;
        let b: f64 = b.trim().parse().ok()?;
        if b == 0.0 {
            return None;
        }
        return Some(a / b);
    }
    tok.parse().ok()
}

struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut out = vec![];
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok { text: &line[s..i], col: line[..s].chars().count() + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok { text: &line[s..], col: line[..s].chars().count() + 1 });
    }
    out
}

fn valid_node_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.' || c == '-' || c == ':')
}

/// Parse netlist text; diagnostics carry 1-based line and column.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut net = Netlist::new();
    let mut faces_raw: Vec<(usize, Vec<(String, usize)>)> = vec![];
    let err = |line: usize, column: usize, msg: String| Error::Parse { line, column, msg };

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let body = raw.split('#').next().unwrap_or("");
        let toks = tokenize(body);
        if toks.is_empty() {
            continue;
        }
        let head = &toks[0];
        let mut chars = head.text.chars();
        let letter = chars.next().unwrap();
        let label: String = chars.collect();
        if !label.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(err(line_no, head.col, format!("bad element label '{}'", head.text)));
        }
        let want = |n: usize| -> Result<()> {
            if toks.len() != n {
                let col = toks.get(n).map_or(body.chars().count() + 1, |t| t.col);
                Err(err(line_no, col, format!("'{}' takes {} fields, found {}", letter, n - 1, toks.len() - 1)))
            } else {
                Ok(())
            }
        };
        let node_tok = |t: &Tok| -> Result<String> {
            if valid_node_name(t.text) {
                Ok(t.text.to_string())
            } else {
                Err(err(line_no, t.col, format!("bad node name '{}'", t.text)))
            }
        };
        let value_tok = |t: &Tok| -> Result<f64> {
            let v = parse_value(t.text).ok_or_else(|| err(line_no, t.col, format!("bad number '{}'", t.text)))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(err(line_no, t.col, format!("non-positive value {}", t.text)));
            }
            Ok(v)
        };
        match letter {
            'R' | 'L' | 'C' => {
                want(4)?;
                let (a, b) = (node_tok(&toks[1])?, node_tok(&toks[2])?);
                let v = value_tok(&toks[3])?;
                if a == b {
                    return Err(err(line_no, toks[2].col, format!("element shorted to node {a}")));
                }
                let kind = match letter {
                    'R' => ElementKind::R,
                    'L' => ElementKind::L,
                    _ => ElementKind::C,
                };
                net.add_labeled(kind, &label, &a, &b, v).map_err(|e| err(line_no, head.col, e.to_string()))?;
            }
            'T' => {
                want(6)?;
                let ns: Vec<String> = toks[1..5].iter().map(node_tok).collect::<Result<_>>()?;
                let v = value_tok(&toks[5])?;
                net.add_transformer(&label, [&ns[0], &ns[1], &ns[2], &ns[3]], v).map_err(|e| err(line_no, head.col, e.to_string()))?;
            }
            'P' => {
                want(3)?;
                let (a, b) = (node_tok(&toks[1])?, node_tok(&toks[2])?);
                net.add_port(&a, &b).map_err(|e| err(line_no, toks[1].col, e.to_string()))?;
            }
            'F' => {
                if toks.len() < 3 {
                    return Err(err(line_no, head.col, "face needs at least two nodes".into()));
                }
                let ns = toks[1..].iter().map(|t| node_tok(t).map(|n| (n, t.col))).collect::<Result<Vec<_>>>()?;
                faces_raw.push((line_no, ns));
            }
            _ => return Err(err(line_no, head.col, format!("unknown statement '{}'", head.text))),
        }
    }

    if !faces_raw.is_empty() {
        let used = net.used_nodes();
        let mut faces = vec![];
        for (line_no, ns) in faces_raw {
            let mut f = vec![];
            for (name, col) in ns {
                match net.node_index(&name) {
                    Some(i) if used.contains(&i) => f.push(i),
                    _ => return Err(err(line_no, col, format!("dangling node '{name}' (no element or port)"))),
                }
            }
            faces.push(f);
        }
        net.set_faces(Some(faces))?;
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_and_comments() {
        let net = parse_netlist("# demo\nR1 a 0 3/4   # trailing\nC a b 2e-3\nP a 0\n").unwrap();
        assert_eq!(net.elements().len(), 2);
        assert_eq!(net.ports().len(), 1);
        match &net.elements()[0] {
            Element::TwoTerminal { value, label, .. } => {
                assert_eq!(*value, 0.75);
                assert_eq!(label, "1");
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn negative_value_diagnostic() {
        match parse_netlist("R a 0 1\nR a b -1\n") {
            Err(Error::Parse { line, column, msg }) => {
                assert_eq!((line, column), (2, 7));
                assert!(msg.contains("non-positive"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn open_circuit_port_only() {
        let net = parse_netlist("P a 0\n").unwrap();
        assert_eq!(net.elements().len(), 0);
        assert_eq!(net.ports().len(), 1);
    }

    #[test]
    fn duplicate_port_and_dangling_face_node() {
        assert!(matches!(parse_netlist("R a 0 1\nP a 0\nP 0 a\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_netlist("R a 0 1\nP a 0\nF a 0 z\n"), Err(Error::Parse { line: 3, column: 7, .. })));
        assert!(matches!(parse_netlist("X a 0 1\n"), Err(Error::Parse { line: 1, column: 1, .. })));
        assert!(matches!(parse_netlist("R a 0\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn text_round_trip() {
        let src = "R1 a b 1\nL b 0 0.1\nT a 0 c 0 2.5\nC c 0 1/3\nP a 0\n";
        let net = parse_netlist(src).unwrap();
        let again = parse_netlist(&net.to_text()).unwrap();
        assert_eq!(net, again);
    }
}
