//! Planar embeddings given as face cycles, and the resistive dual.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::netgraph::netlist::{Element, ElementKind, Netlist, Port, Sides};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeRef {
    Elem(usize),
    Port(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Slot {
    face: usize,
    bnd: usize,
    pos: usize,
    /// traversal goes from the edge's first node to its second
    forward: bool,
}

const MAX_PAIRINGS: usize = 100_000;

/// (face, boundary, position, start node) of one side of a face boundary
type SideAt = (usize, usize, usize, usize);

/// All perfect matchings of `items`, each as a list of pairs.
fn matchings<T: Copy>(items: &[T]) -> Vec<Vec<(T, T)>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = vec![];
    for j in 1..items.len() {
        let rest: Vec<T> = items[1..].iter().enumerate().filter(|&(i, _)| i + 1 != j).map(|(_, &t)| t).collect();
        for mut m in matchings(&rest) {
            m.insert(0, (items[0], items[j]));
            out.push(m);
        }
    }
    out
}

/// Working copy of a plane graph: faces may have several boundary walks.
#[derive(Debug, Clone)]
struct Plane {
    edges: Vec<(usize, usize)>,
    refs: Vec<EdgeRef>,
    faces: Vec<Vec<Vec<usize>>>,
    /// exact sides per edge as `(face, position)`, boundary 0
    hint: Option<Sides>,
}

impl Plane {
    fn from_net(net: &Netlist) -> Result<Plane> {
        let faces = net.faces().ok_or_else(|| Error::Embedding("netlist has no face embedding".into()))?;
        let mut edges = vec![];
        let mut refs = vec![];
        for (i, e) in net.elements().iter().enumerate() {
            match e {
                Element::TwoTerminal { pos, neg, .. } => {
                    edges.push((*pos, *neg));
                    refs.push(EdgeRef::Elem(i));
                }
                Element::Transformer { .. } => return Err(Error::Embedding("face embeddings do not cover transformers".into())),
            }
        }
        for (i, p) in net.ports().iter().enumerate() {
            edges.push((p.pos, p.neg));
            refs.push(EdgeRef::Port(i));
        }
        let hint = net.side_hint().filter(|h| h.len() == edges.len()).cloned();
        Ok(Plane { edges, refs, faces: faces.iter().map(|f| vec![f.clone()]).collect(), hint })
    }

    fn edge_nodes(&self) -> HashSet<usize> {
        self.edges.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    /// Slots from the exact side hint, if it is consistent with the faces.
    fn hinted(&self) -> Option<Vec<[Slot; 2]>> {
        let h = self.hint.as_ref()?;
        let total: usize = self.faces.iter().map(|f| f.iter().map(|w| if w.len() > 1 { w.len() } else { 0 }).sum::<usize>()).sum();
        if total != 2 * self.edges.len() {
            return None;
        }
        let mut used = HashSet::new();
        let mut out = vec![];
        for (e, sides) in h.iter().enumerate() {
            let (u, v) = self.edges[e];
            let mut pair = [Slot { face: 0, bnd: 0, pos: 0, forward: true }; 2];
            for (k, &(f, p)) in sides.iter().enumerate() {
                let w = self.faces.get(f)?.first()?;
                let l = w.len();
                if self.faces[f].len() != 1 || l < 2 || p >= l || !used.insert((f, p)) {
                    return None;
                }
                let (a, b) = (w[p], w[(p + 1) % l]);
                if !((a, b) == (u, v) || (a, b) == (v, u)) {
                    return None;
                }
                pair[k] = Slot { face: f, bnd: 0, pos: p, forward: a == u };
            }
            out.push(pair);
        }
        self.rotations_are_cycles(&out).then_some(out)
    }

    /// Pair each edge with the two face sides it occupies.
    fn assign(&self, net: &Netlist) -> Result<Vec<[Slot; 2]>> {
        if let Some(out) = self.hinted() {
            return Ok(out);
        }
        let key = |a: usize, b: usize| (a.min(b), a.max(b));
        let mut by_pair: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            by_pair.entry(key(a, b)).or_default().push(i);
        }
        let mut slots: BTreeMap<(usize, usize), Vec<SideAt>> = BTreeMap::new();
        for (f, bnds) in self.faces.iter().enumerate() {
            for (bi, c) in bnds.iter().enumerate() {
                let l = c.len();
                if l == 1 {
                    continue;
                }
                for p in 0..l {
                    let (u, v) = (c[p], c[(p + 1) % l]);
                    if u == v {
                        return Err(Error::Embedding(format!("face {} repeats node {} consecutively", f + 1, net.node_name(u))));
                    }
                    slots.entry(key(u, v)).or_default().push((f, bi, p, u));
                }
            }
        }
        for (k, s) in &slots {
            if !by_pair.contains_key(k) {
                return Err(Error::Embedding(format!("face side {} {} has no element or port", net.node_name(k.0), net.node_name(k.1))));
            }
            let _ = s;
        }
        type Side = (usize, usize, usize, usize);
        // per node pair: candidate side sequences, consecutive sides forming one edge
        let mut options: Vec<(Vec<usize>, Vec<Vec<Side>>)> = vec![];
        for (k, es) in &by_pair {
            let s = slots.get(k).cloned().unwrap_or_default();
            if s.len() != 2 * es.len() {
                return Err(Error::Embedding(format!(
                    "{} parallel edge(s) between {} and {} border {} face side(s), expected {}",
                    es.len(),
                    net.node_name(k.0),
                    net.node_name(k.1),
                    s.len(),
                    2 * es.len()
                )));
            }
            // a lens is a two-sided walk between the pair; other sides end a bundle
            let mut lenses: Vec<(Side, Side)> = vec![];
            let mut ends: Vec<Side> = vec![];
            for sl in &s {
                if self.faces[sl.0][sl.1].len() == 2 {
                    if sl.2 == 0 {
                        let other = *s.iter().find(|t| t.0 == sl.0 && t.1 == sl.1 && t.2 == 1).expect("lens has two sides");
                        lenses.push((*sl, other));
                    }
                } else {
                    ends.push(*sl);
                }
            }
            let mut seqs = vec![];
            if ends.is_empty() {
                let mut seq: Vec<Side> = lenses.iter().flat_map(|&(a, b)| [a, b]).collect();
                seq.rotate_left(1);
                seqs.push(seq);
            } else {
                for m in matchings(&ends) {
                    let mut seq = vec![];
                    for (ci, (a, b)) in m.into_iter().enumerate() {
                        seq.push(a);
                        if ci == 0 {
                            seq.extend(lenses.iter().flat_map(|&(x, y)| [x, y]));
                        }
                        seq.push(b);
                    }
                    seqs.push(seq);
                }
            }
            options.push((es.clone(), seqs));
        }
        let mut choice = vec![0usize; options.len()];
        for _ in 0..MAX_PAIRINGS {
            let mut out = vec![[Slot { face: 0, bnd: 0, pos: 0, forward: true }; 2]; self.edges.len()];
            for ((es, seqs), &c) in options.iter().zip(&choice) {
                let seq = &seqs[c];
                for (idx, &e) in es.iter().enumerate() {
                    let first = self.edges[e].0;
                    let mk = |t: Side| Slot { face: t.0, bnd: t.1, pos: t.2, forward: t.3 == first };
                    out[e] = [mk(seq[2 * idx]), mk(seq[2 * idx + 1])];
                }
            }
            if self.rotations_are_cycles(&out) {
                return Ok(out);
            }
            // next combination
            let mut i = 0;
            loop {
                if i == choice.len() {
                    return Err(Error::Embedding("no gluing of face sides gives a planar embedding".into()));
                }
                choice[i] += 1;
                if choice[i] < options[i].1.len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
        Err(Error::Embedding("too many ways to glue parallel edges; embedding is ambiguous".into()))
    }

    /// Every vertex's corners must link its edges into a single cycle.
    fn rotations_are_cycles(&self, slots: &[[Slot; 2]]) -> bool {
        let mut side_edge: HashMap<(usize, usize, usize), usize> = HashMap::new();
        for (e, pair) in slots.iter().enumerate() {
            for s in pair {
                side_edge.insert((s.face, s.bnd, s.pos), e);
            }
        }
        let mut parent: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        fn find(p: &mut HashMap<(usize, usize), (usize, usize)>, x: (usize, usize)) -> (usize, usize) {
            let mut r = x;
            while let Some(&q) = p.get(&r) {
                if q == r {
                    break;
                }
                r = q;
            }
            p.insert(x, r);
            r
        }
        for (f, bnds) in self.faces.iter().enumerate() {
            for (bi, c) in bnds.iter().enumerate() {
                let l = c.len();
                if l < 2 {
                    continue;
                }
                for (p, &v) in c.iter().enumerate() {
                    let (Some(&e1), Some(&e2)) = (side_edge.get(&(f, bi, (p + l - 1) % l)), side_edge.get(&(f, bi, p))) else {
                        return false;
                    };
                    let (ra, rb) = (find(&mut parent, (v, e1)), find(&mut parent, (v, e2)));
                    if ra != rb {
                        parent.insert(ra, rb);
                    }
                }
            }
        }
        let mut root_of: HashMap<usize, (usize, usize)> = HashMap::new();
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            for v in [a, b] {
                let r = find(&mut parent, (v, e));
                if *root_of.entry(v).or_insert(r) != r {
                    return false;
                }
            }
        }
        true
    }

    fn components(&self) -> usize {
        let nodes: Vec<usize> = self.edge_nodes().into_iter().collect();
        let mut parent: HashMap<usize, usize> = nodes.iter().map(|&n| (n, n)).collect();
        fn find(p: &mut HashMap<usize, usize>, x: usize) -> usize {
            let mut r = x;
            while p[&r] != r {
                r = p[&r];
            }
            p.insert(x, r);
            r
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent.insert(ra, rb);
            }
        }
        let mut roots = HashSet::new();
        for n in nodes {
            roots.insert(find(&mut parent, n));
        }
        roots.len()
    }

    fn check_euler(&self) -> Result<()> {
        let v = self.edge_nodes().len() as i64;
        let e = self.edges.len() as i64;
        let f = self.faces.len() as i64;
        let c = self.components() as i64;
        if v - e + f != 1 + c {
            return Err(Error::Embedding(format!("Euler count fails: V − E + F = {} but 1 + components = {}", v - e + f, 1 + c)));
        }
        Ok(())
    }

    /// Delete edge `e`, merging or splitting the face walks it separated.
    fn remove_edge(&mut self, e: usize, slots: &[[Slot; 2]]) -> Result<()> {
        let [s1, s2] = slots[e];
        if s1.face != s2.face {
            let c1 = self.faces[s1.face][s1.bnd].clone();
            let mut c2 = self.faces[s2.face][s2.bnd].clone();
            let (l1, mut j) = (c1.len(), s2.pos);
            if s1.forward == s2.forward {
                let l2 = c2.len();
                c2.reverse();
                j = (2 * l2 - 2 - j) % l2;
            }
            let l2 = c2.len();
            let mut merged: Vec<usize> = (0..l1).map(|t| c1[(s1.pos + 1 + t) % l1]).collect();
            merged.extend((0..l2 - 2).map(|t| c2[(j + 2 + t) % l2]));
            let (keep, drop) = (s1.face.min(s2.face), s1.face.max(s2.face));
            let mut bnds: Vec<Vec<usize>> = vec![];
            for (f, b) in [(s1.face, s1.bnd), (s2.face, s2.bnd)] {
                for (bi, w) in self.faces[f].iter().enumerate() {
                    if bi != b {
                        bnds.push(w.clone());
                    }
                }
            }
            bnds.insert(0, merged);
            self.faces[keep] = bnds;
            self.faces.remove(drop);
        } else if s1.bnd == s2.bnd {
            let c = self.faces[s1.face][s1.bnd].clone();
            let l = c.len();
            let (i, j) = (s1.pos, s2.pos);
            let walk = |from: usize, to: usize| -> Vec<usize> {
                let len = (to + l - from) % l + 1;
                let mut w: Vec<usize> = (0..len).map(|t| c[(from + t) % l]).collect();
                if w.len() > 1 {
                    w.pop();
                }
                w
            };
            let a = walk((i + 1) % l, j);
            let b = walk((j + 1) % l, i);
            let f = &mut self.faces[s1.face];
            f[s1.bnd] = a;
            f.push(b);
        } else {
            return Err(Error::Embedding("edge joins two boundary walks of one face".into()));
        }
        self.edges.remove(e);
        self.refs.remove(e);
        self.hint = None;
        self.drop_isolated();
        Ok(())
    }

    fn drop_isolated(&mut self) {
        let used = self.edge_nodes();
        for f in &mut self.faces {
            f.retain(|w| !(w.len() == 1 && !used.contains(&w[0])));
        }
    }

    fn simple_faces(&self) -> Option<Vec<Vec<usize>>> {
        self.faces.iter().map(|f| if f.len() == 1 { Some(f[0].clone()) } else { None }).collect()
    }

    /// Flip face walks so each two-sided edge is traversed both ways.
    fn orient(&mut self, net: &Netlist) -> Result<()> {
        let slots = self.assign(net)?;
        let nf = self.faces.len();
        let mut adj: Vec<Vec<(usize, bool)>> = vec![vec![]; nf];
        for [a, b] in &slots {
            if a.face != b.face {
                // same direction means the faces disagree
                let differ = a.forward == b.forward;
                adj[a.face].push((b.face, differ));
                adj[b.face].push((a.face, differ));
            }
        }
        let mut flip: Vec<Option<bool>> = vec![None; nf];
        for start in 0..nf {
            if flip[start].is_some() {
                continue;
            }
            flip[start] = Some(false);
            let mut q = VecDeque::from([start]);
            while let Some(f) = q.pop_front() {
                let ff = flip[f].unwrap();
                for &(g, differ) in &adj[f] {
                    let want = ff ^ differ;
                    match flip[g] {
                        None => {
                            flip[g] = Some(want);
                            q.push_back(g);
                        }
                        Some(x) if x != want => return Err(Error::Embedding("face cycles cannot be oriented consistently".into())),
                        _ => {}
                    }
                }
            }
        }
        for (f, fl) in flip.into_iter().enumerate() {
            if fl == Some(true) {
                for w in &mut self.faces[f] {
                    w.reverse();
                }
                if let Some(h) = self.hint.as_mut() {
                    let l = self.faces[f][0].len();
                    for side in h.iter_mut().flatten().filter(|s| s.0 == f) {
                        side.1 = (2 * l - 2 - side.1) % l;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Checks slot counts, the parallel-edge chain and the Euler relation.
pub fn validate_embedding(net: &Netlist) -> Result<()> {
    let plane = Plane::from_net(net)?;
    if plane.faces.iter().any(|f| f[0].len() < 2) {
        return Err(Error::Embedding("face with fewer than two nodes".into()));
    }
    plane.assign(net)?;
    plane.check_euler()
}

/// Remove every capacitor. Nodes stay; the embedding merges the two faces
/// beside each removed capacitor, and is dropped when the result can no
/// longer be written as one cycle per face.
pub fn open_circuit_capacitors(net: &Netlist) -> Netlist {
    let mut out = net.clone();
    let mut plane = Plane::from_net(net).ok();
    if let Some(p) = plane.as_mut() {
        while let Some(e) = p
            .refs
            .iter()
            .position(|r| matches!(r, EdgeRef::Elem(i) if matches!(net.elements()[*i], Element::TwoTerminal { kind: ElementKind::C, .. })))
        {
            let ok = p.assign(net).and_then(|s| p.remove_edge(e, &s));
            if ok.is_err() {
                plane = None;
                break;
            }
        }
    }
    let faces = plane.and_then(|p| p.simple_faces());
    out.elements_mut().retain(|e| !matches!(e, Element::TwoTerminal { kind: ElementKind::C, .. }));
    out.set_faces_unchecked(faces);
    out
}

/// Repeatedly delete degree-one nodes that carry no port, with their edge.
pub fn prune_hanging(net: &Netlist) -> Result<Netlist> {
    let mut plane = Plane::from_net(net)?;
    let port_nodes: HashSet<usize> = net.ports().iter().flat_map(|p| [p.pos, p.neg]).collect();
    loop {
        let mut deg: HashMap<usize, usize> = HashMap::new();
        for &(a, b) in &plane.edges {
            *deg.entry(a).or_default() += 1;
            *deg.entry(b).or_default() += 1;
        }
        let hit = plane.edges.iter().position(|&(a, b)| [a, b].iter().any(|n| deg[n] == 1 && !port_nodes.contains(n)));
        let Some(e) = hit else { break };
        let slots = plane.assign(net)?;
        plane.remove_edge(e, &slots)?;
    }
    rebuild(net, &plane)
}

fn rebuild(net: &Netlist, plane: &Plane) -> Result<Netlist> {
    let mut out = net.clone();
    let keep: HashSet<usize> = plane.refs.iter().filter_map(|r| if let EdgeRef::Elem(i) = r { Some(*i) } else { None }).collect();
    let mut idx = 0;
    out.elements_mut().retain(|_| {
        let k = keep.contains(&idx);
        idx += 1;
        k
    });
    let faces = plane.simple_faces().ok_or_else(|| Error::Embedding("a face has more than one boundary walk".into()))?;
    out.set_faces_unchecked(Some(faces));
    if plane.hint.is_some() {
        out.set_side_hint(plane.hint.clone())?;
    }
    Ok(out)
}

/// Planar dual of a resistive multiport. Face `outer` becomes ground `0`,
/// the others `f1, f2, …`; resistances invert; ports map across.
pub fn planar_dual(net: &Netlist, outer: usize) -> Result<Netlist> {
    if net.faces().is_none() {
        return Err(Error::Embedding("netlist has no face embedding".into()));
    }
    if net.elements().iter().any(|e| !matches!(e, Element::TwoTerminal { kind: ElementKind::R, .. })) {
        return Err(Error::Netlist("dual needs a purely resistive network".into()));
    }
    let pruned = prune_hanging(net)?;
    let mut plane = Plane::from_net(&pruned)?;
    if outer >= plane.faces.len() {
        return Err(Error::Embedding(format!("outer face {outer} out of range")));
    }
    plane.orient(&pruned)?;
    let slots = plane.assign(&pruned)?;
    for (e, [a, b]) in slots.iter().enumerate() {
        if a.face == b.face {
            let (u, v) = plane.edges[e];
            return Err(Error::Embedding(format!("edge {} {} borders one face only", pruned.node_name(u), pruned.node_name(v))));
        }
    }

    let mut dual = Netlist::new();
    let mut fname = vec![String::new(); plane.faces.len()];
    let mut k = 1;
    for (f, name) in fname.iter_mut().enumerate() {
        if f == outer {
            *name = "0".into();
        } else {
            *name = format!("f{k}");
            k += 1;
        }
    }
    let mut fidx = vec![0; plane.faces.len()];
    for f in 0..plane.faces.len() {
        fidx[f] = dual.node(&fname[f]);
    }

    let mut port_edges: Vec<(usize, [Slot; 2])> = vec![];
    for (e, r) in plane.refs.iter().enumerate() {
        let [a, b] = slots[e];
        let (fw, bw) = if a.forward { (a.face, b.face) } else { (b.face, a.face) };
        match r {
            EdgeRef::Elem(i) => {
                if let Element::TwoTerminal { label, value, .. } = &pruned.elements()[*i] {
                    dual.add_labeled(ElementKind::R, label, &fname[fw], &fname[bw], 1.0 / value)?;
                }
            }
            EdgeRef::Port(i) => port_edges.push((*i, slots[e])),
        }
    }
    port_edges.sort_by_key(|p| p.0);
    for (_, [a, b]) in &port_edges {
        let (fw, bw) = if a.forward { (a.face, b.face) } else { (b.face, a.face) };
        dual.add_port(&fname[fw], &fname[bw])?;
    }

    // dual faces: rotation of edges and faces around each original node
    let mut at: HashMap<(usize, usize, usize), usize> = HashMap::new();
    for (e, ss) in slots.iter().enumerate() {
        for s in ss {
            at.insert((s.face, s.bnd, s.pos), e);
        }
    }
    // corner: in-edge → (face, out-edge) at a node
    let mut corner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for (f, bnds) in plane.faces.iter().enumerate() {
        for (bi, w) in bnds.iter().enumerate() {
            let l = w.len();
            for p in 0..l {
                let e_in = at[&(f, bi, (p + l - 1) % l)];
                let e_out = at[&(f, bi, p)];
                corner.insert((w[p], e_in), (f, e_out));
            }
        }
    }
    let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (e, &(a, b)) in plane.edges.iter().enumerate() {
        incident.entry(a).or_default().push(e);
        incident.entry(b).or_default().push(e);
    }
    let mut order: Vec<usize> = incident.keys().copied().collect();
    if let Some(pos) = order.iter().position(|&n| n == 0) {
        let g = order.remove(pos);
        order.insert(0, g);
    }
    let mut dual_edge = vec![0; plane.edges.len()];
    let mut next_id = 0;
    for (e, r) in plane.refs.iter().enumerate() {
        if let EdgeRef::Elem(_) = r {
            dual_edge[e] = next_id;
            next_id += 1;
        }
    }
    for (k, (i, _)) in port_edges.iter().enumerate() {
        let e = plane.refs.iter().position(|r| *r == EdgeRef::Port(*i)).expect("port edge");
        dual_edge[e] = next_id + k;
    }
    let mut dsides: Vec<Vec<(usize, usize)>> = vec![vec![]; plane.edges.len()];
    let mut dfaces = vec![];
    for v in order {
        let es = &incident[&v];
        let mut cyc = vec![];
        let mut seen = HashSet::new();
        let mut e = es[0];
        loop {
            seen.insert(e);
            let (f, next) = corner[&(v, e)];
            dsides[dual_edge[next]].push((dfaces.len(), cyc.len()));
            cyc.push(fidx[f]);
            e = next;
            if e == es[0] {
                break;
            }
        }
        if seen.len() != es.len() {
            return Err(Error::Embedding(format!("node {} is a cut vertex", pruned.node_name(v))));
        }
        dfaces.push(cyc);
    }
    dual.set_faces_unchecked(Some(dfaces));
    let hint = dsides.iter().map(|s| if s.len() == 2 { Some([s[0], s[1]]) } else { None }).collect();
    dual.set_side_hint(hint)?;
    Ok(dual)
}

/// Ground-preserving isomorphism of resistive multiports, ports matched in
/// order (orientation may flip globally), values within `rel_tol`.
pub fn isomorphic(a: &Netlist, b: &Netlist, rel_tol: f64) -> bool {
    if a.elements().len() != b.elements().len() || a.ports().len() != b.ports().len() {
        return false;
    }
    for flip in [false, true] {
        if iso_with(a, b, rel_tol, flip) {
            return true;
        }
    }
    false
}

type EdgeBag = HashMap<(usize, usize), Vec<(char, f64)>>;

fn bag(net: &Netlist) -> Option<EdgeBag> {
    let mut m: EdgeBag = HashMap::new();
    for e in net.elements() {
        match e {
            Element::TwoTerminal { kind, pos, neg, value, .. } => {
                let k = ((*pos).min(*neg), (*pos).max(*neg));
                m.entry(k).or_default().push((kind.letter(), *value));
            }
            Element::Transformer { .. } => return None,
        }
    }
    for v in m.values_mut() {
        v.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    }
    Some(m)
}

fn bags_match(x: Option<&Vec<(char, f64)>>, y: Option<&Vec<(char, f64)>>, tol: f64) -> bool {
    match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.0 == q.0 && (p.1 - q.1).abs() <= tol * p.1.abs().max(q.1.abs()))
        }
        _ => false,
    }
}

fn iso_with(a: &Netlist, b: &Netlist, tol: f64, flip: bool) -> bool {
    let (Some(ba), Some(bb)) = (bag(a), bag(b)) else { return false };
    let na: Vec<usize> = {
        let mut s: Vec<usize> = a.used_nodes().into_iter().collect();
        s.sort();
        s
    };
    let nb = b.used_nodes();
    if na.len() != nb.len() {
        return false;
    }
    let mut map: HashMap<usize, usize> = HashMap::new();
    let mut used: HashSet<usize> = HashSet::new();
    let fix = |x: usize, y: usize, map: &mut HashMap<usize, usize>, used: &mut HashSet<usize>| -> bool {
        match map.get(&x) {
            Some(&z) => z == y,
            None => {
                if used.contains(&y) {
                    return false;
                }
                map.insert(x, y);
                used.insert(y);
                true
            }
        }
    };
    if !fix(0, 0, &mut map, &mut used) {
        return false;
    }
    for (pa, pb) in a.ports().iter().zip(b.ports()) {
        let Port { pos: bp, neg: bn } = *pb;
        let (bp, bn) = if flip { (bn, bp) } else { (bp, bn) };
        if !fix(pa.pos, bp, &mut map, &mut used) || !fix(pa.neg, bn, &mut map, &mut used) {
            return false;
        }
    }
    let order: Vec<usize> = na.iter().copied().filter(|n| !map.contains_key(n)).collect();
    let mut cand: Vec<usize> = nb.iter().copied().collect();
    cand.sort();
    fn consistent(ba: &EdgeBag, bb: &EdgeBag, map: &HashMap<usize, usize>, x: usize, tol: f64) -> bool {
        let y = map[&x];
        for (&u, &v) in map.iter() {
            let ka = (x.min(u), x.max(u));
            let kb = (y.min(v), y.max(v));
            if !bags_match(ba.get(&ka), bb.get(&kb), tol) {
                return false;
            }
        }
        true
    }
    let fixed: Vec<usize> = map.keys().copied().collect();
    for &x in &fixed {
        if !consistent(&ba, &bb, &map, x, tol) {
            return false;
        }
    }
    #[allow(clippy::too_many_arguments)]
    fn go(
        i: usize,
        order: &[usize],
        cand: &[usize],
        map: &mut HashMap<usize, usize>,
        used: &mut HashSet<usize>,
        ba: &EdgeBag,
        bb: &EdgeBag,
        tol: f64,
    ) -> bool {
        if i == order.len() {
            return true;
        }
        let x = order[i];
        for &y in cand {
            if used.contains(&y) {
                continue;
            }
            map.insert(x, y);
            used.insert(y);
            if consistent(ba, bb, map, x, tol) && go(i + 1, order, cand, map, used, ba, bb, tol) {
                return true;
            }
            map.remove(&x);
            used.remove(&y);
        }
        false
    }
    go(0, &order, &cand, &mut map, &mut used, &ba, &bb, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::netlist::parse_netlist;

    const BRIDGE: &str = "R a b 1\nR a c 2\nR b c 3\nR b 0 4\nR c 0 5\nP a 0\n\
                          F a b 0\nF a c b\nF b c 0\nF a 0 c\n";

    #[test]
    fn bridge_embedding_valid() {
        parse_netlist(BRIDGE).unwrap();
    }

    #[test]
    fn bad_face_count_rejected() {
        let bad = "R a b 1\nR a c 2\nR b c 3\nR b 0 4\nR c 0 5\nP a 0\nF a b 0\nF a c b\nF b c 0\n";
        assert!(matches!(parse_netlist(bad), Err(Error::Embedding(_))));
    }

    #[test]
    fn parallel_resistors_chain() {
        let net = parse_netlist("R a 0 1\nR a 0 2\nP a 0\nF a 0\nF a 0\nF a 0\n").unwrap();
        let d = planar_dual(&net, 0).unwrap();
        // parallel becomes series
        assert_eq!(d.elements().len(), 2);
        assert_eq!(d.ports().len(), 1);
    }

    #[test]
    fn parallel_bundle_dual_round_trip() {
        let text = "R a 0 1\nR a 0 2\nR a n1 3\nR n1 0 4\nR a 0 5\nP a 0\n\
                    F a 0\nF a 0 n1\nF a n1 0\nF a 0\nF a 0\n";
        let net = parse_netlist(text).unwrap();
        validate_embedding(&net).unwrap();
        let d = planar_dual(&net, 0).unwrap();
        let dd = planar_dual(&d, 0).unwrap();
        assert!(isomorphic(&net, &dd, 1e-12), "{}\n{}\n{}", net.to_text(), d.to_text(), dd.to_text());
    }

    #[test]
    fn split_parallel_bundles() {
        // a–0 edges sit in two bundles on either side of the paths through n1, n2
        let text = "R a n2 1\nR a 0 2\nR a n1 3\nR n1 0 4\nR a 0 5\nR a 0 6\nR a n1 7\nR n2 0 8\nR a n1 9\nP a 0\n\
                    F a 0 n2\nF a 0\nF a n1 0\nF a 0 n1\nF a n2 0\nF a 0\nF a n1\nF a n1\n";
        let net = parse_netlist(text).unwrap();
        validate_embedding(&net).unwrap();
        let d = planar_dual(&net, 0).unwrap();
        let s = nalgebra::Complex::new(1.0, 0.0);
        let z = crate::netgraph::impedance_at(&net, s, &[crate::netgraph::Drive::Current]).unwrap()[(0, 0)];
        let zd = crate::netgraph::impedance_at(&d, s, &[crate::netgraph::Drive::Current]).unwrap()[(0, 0)];
        assert!((z * zd - 1.0).norm() < 1e-12);
    }

    #[test]
    fn hanging_branch_pruned() {
        let net = parse_netlist("R a 0 1\nR a x 7\nP a 0\nF a x a 0\nF a 0\n").unwrap();
        let p = prune_hanging(&net).unwrap();
        assert_eq!(p.elements().len(), 1);
        assert_eq!(p.faces().unwrap().len(), 2);
    }

    #[test]
    fn dual_of_dual_is_original() {
        let net = parse_netlist(BRIDGE).unwrap();
        let d = planar_dual(&net, 0).unwrap();
        let dd = planar_dual(&d, 0).unwrap();
        assert!(isomorphic(&net, &dd, 1e-12));
        assert!(!isomorphic(&net, &d, 1e-12));
    }

    #[test]
    fn capacitor_removal_merges_faces() {
        let net = parse_netlist("R a 0 1\nC a 0 2\nP a 0\nF a 0\nF a 0\nF a 0\n").unwrap();
        let open = open_circuit_capacitors(&net);
        assert_eq!(open.count(ElementKind::C), 0);
        assert_eq!(open.faces().unwrap().len(), 2);
        validate_embedding(&open).unwrap();
    }
}
