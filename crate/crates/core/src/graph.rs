//! 3-regular directed state graphs.
//!
//! Every vertex owns an ordered triple of outgoing arcs. An arc is either one
//! half of a traversable link (its partner runs the opposite way) or a
//! self-loop (its own partner). Arc ids are assigned vertex by vertex in the
//! canonical order, so the vertex subspace of `v` is the arc triple listed in
//! [`StateGraph::vertex_arcs`].
//!
//! The Grover coin is invariant under permutations of a vertex triple, so the
//! within-vertex order never changes the dynamics. It only fixes how a
//! three-component initial state such as `[1, 0, -1]` is read.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcKind {
    #[serde(rename = "paired-link")]
    Link,
    #[serde(rename = "self-loop")]
    Loop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub partner: usize,
    pub kind: ArcKind,
}

/// Which constructor produced a graph; used by the analytic trapped-state
/// constructions to check their preconditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFamily {
    Ladder {
        length: usize,
    },
    /// Full tree when `removed_branches == 0`.
    Cayley {
        order: usize,
        sink_branch: usize,
        removed_branches: usize,
    },
    Custom,
}

#[derive(Clone, Debug)]
pub struct StateGraph {
    family: GraphFamily,
    vertex_count: usize,
    arcs: Vec<Arc>,
    vertex_arcs: Vec<Vec<usize>>,
    source: usize,
    sink: usize,
}

/// One outgoing slot of a vertex during construction.
#[derive(Clone, Copy, Debug)]
enum Slot {
    Loop,
    Link(usize),
}

impl StateGraph {
    /// Assembles a graph without checking it; see [`validate`].
    pub fn from_parts(
        vertex_count: usize,
        arcs: Vec<Arc>,
        vertex_arcs: Vec<Vec<usize>>,
        source: usize,
        sink: usize,
    ) -> Self {
        StateGraph {
            family: GraphFamily::Custom,
            vertex_count,
            arcs,
            vertex_arcs,
            source,
            sink,
        }
    }

    fn from_slots(family: GraphFamily, slots: Vec<Vec<Slot>>, source: usize, sink: usize) -> Self {
        let vertex_count = slots.len();
        let mut arcs = Vec::new();
        let mut vertex_arcs = Vec::with_capacity(vertex_count);
        for (v, vs) in slots.iter().enumerate() {
            let mut ids = Vec::with_capacity(vs.len());
            for slot in vs {
                let id = arcs.len();
                let (to, kind) = match *slot {
                    Slot::Loop => (v, ArcKind::Loop),
                    Slot::Link(w) => (w, ArcKind::Link),
                };
                arcs.push(Arc {
                    id,
                    from: v,
                    to,
                    partner: id,
                    kind,
                });
                ids.push(id);
            }
            vertex_arcs.push(ids);
        }
        for a in 0..arcs.len() {
            if arcs[a].kind == ArcKind::Link {
                let (from, to) = (arcs[a].from, arcs[a].to);
                if let Some(&p) = vertex_arcs[to].iter().find(|&&b| arcs[b].to == from) {
                    arcs[a].partner = p;
                }
            }
        }
        StateGraph {
            family,
            vertex_count,
            arcs,
            vertex_arcs,
            source,
            sink,
        }
    }

    pub fn family(&self) -> GraphFamily {
        self.family
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Hilbert space dimension, one basis state per arc.
    pub fn dimension(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: usize) -> &Arc {
        &self.arcs[id]
    }

    pub fn vertex_arcs(&self, v: usize) -> &[usize] {
        &self.vertex_arcs[v]
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn source_arcs(&self) -> &[usize] {
        &self.vertex_arcs[self.source]
    }

    pub fn sink_arcs(&self) -> &[usize] {
        &self.vertex_arcs[self.sink]
    }

    /// Undirected links as `(arc, partner)` with `arc < partner`.
    pub fn links(&self) -> Vec<(usize, usize)> {
        self.arcs
            .iter()
            .filter(|a| a.kind == ArcKind::Link && a.id < a.partner)
            .map(|a| (a.id, a.partner))
            .collect()
    }

    pub fn loop_count(&self) -> usize {
        self.arcs.iter().filter(|a| a.kind == ArcKind::Loop).count()
    }

    /// First arc running `from -> to`, if any.
    pub fn find_arc(&self, from: usize, to: usize) -> Option<usize> {
        self.vertex_arcs
            .get(from)?
            .iter()
            .copied()
            .find(|&a| self.arcs[a].to == to)
    }

    /// Breadth-first predecessor of every vertex reachable from `root`.
    pub fn bfs_parents(&self, root: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.vertex_count];
        let mut seen = vec![false; self.vertex_count];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            for &a in &self.vertex_arcs[v] {
                let w = self.arcs[a].to;
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
        parent
    }

    pub fn is_reachable(&self, from: usize, to: usize) -> bool {
        from == to || self.bfs_parents(from)[to].is_some()
    }

    /// Embeds three source-vertex coefficients into the full arc space.
    pub fn embed_source(&self, coefficients: &[Complex64; 3]) -> Result<CVec> {
        let arcs = self.source_arcs();
        if arcs.len() != 3 {
            return Err(Error::InvalidGraph(format!(
                "source vertex has {} outgoing arcs",
                arcs.len()
            )));
        }
        let mut v = CVec::zeros(self.dimension());
        for (&a, &c) in arcs.iter().zip(coefficients) {
            v[a] = c;
        }
        Ok(v)
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump {
            vertices: self.vertex_count,
            arcs: self.arcs.clone(),
            source: self.source,
            sink: self.sink,
            vertex_order: self.vertex_arcs.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.dump())?)
    }
}

/// Serialized form of a [`StateGraph`]; field order is part of the format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub vertices: usize,
    pub arcs: Vec<Arc>,
    pub source: usize,
    pub sink: usize,
    pub vertex_order: Vec<Vec<usize>>,
}

/// Ladder with `length` square faces.
///
/// Rung `j` joins vertices `2j` and `2j + 1`; rails join `v` and `v + 2`. The
/// four corners carry a self-loop. The source is vertex 0 and the sink the
/// diagonally opposite corner `2 * length + 1`. Each vertex lists its arcs as
/// (loop if any, rung, rails by ascending neighbour), so `[1, 0, -1]` at the
/// source is `|(0,0)> - |(0,2)>`.
pub fn build_ladder(length: usize) -> Result<StateGraph> {
    if length < 1 {
        return Err(Error::InvalidParameter(
            "ladder length must be at least 1".into(),
        ));
    }
    let n = 2 * (length + 1);
    let last = n - 2;
    let slots = (0..n)
        .map(|v| {
            let mut s = Vec::with_capacity(3);
            if v < 2 || v >= last {
                s.push(Slot::Loop);
            }
            s.push(Slot::Link(v ^ 1));
            if v >= 2 {
                s.push(Slot::Link(v - 2));
            }
            if v < last {
                s.push(Slot::Link(v + 2));
            }
            s
        })
        .collect();
    Ok(StateGraph::from_slots(
        GraphFamily::Ladder { length },
        slots,
        0,
        n - 1,
    ))
}

/// Cayley tree of order `order`: a root with three binary branches whose
/// leaves all sit at distance `order` and carry two self-loops each.
///
/// Vertices are numbered in depth-first preorder, branch 0 first. The sink is
/// the leftmost leaf of `sink_branch`. The root lists the two other branches
/// in ascending order and the sink branch last.
pub fn build_cayley_tree(order: usize, sink_branch: usize) -> Result<StateGraph> {
    if sink_branch > 2 {
        return Err(Error::InvalidParameter(format!(
            "sink branch must be 0, 1 or 2, got {sink_branch}"
        )));
    }
    cayley(order, sink_branch, 0)
}

/// Cayley tree with `removed` (1 or 2) sink-free root branches replaced by
/// self-loops at the root. The loops keep the removed branches' slots in the
/// root's arc order; the sink branch is branch 2.
pub fn build_reduced_cayley(order: usize, removed: usize) -> Result<StateGraph> {
    if !(1..=2).contains(&removed) {
        return Err(Error::InvalidParameter(format!(
            "can remove one or two branches, got {removed}"
        )));
    }
    cayley(order, 2, removed)
}

fn cayley(order: usize, sink_branch: usize, removed: usize) -> Result<StateGraph> {
    if order < 1 {
        return Err(Error::InvalidParameter(
            "Cayley tree order must be at least 1".into(),
        ));
    }
    let root_order: Vec<usize> = (0..3)
        .filter(|&b| b != sink_branch)
        .chain(std::iter::once(sink_branch))
        .collect();
    let mut slots: Vec<Vec<Slot>> = vec![Vec::new()];
    let mut branch_top = [None; 3];
    let mut sink = 0;
    for (branch, top_slot) in branch_top.iter_mut().enumerate() {
        let slot = root_order.iter().position(|&b| b == branch).unwrap_or(0);
        if slot < removed {
            continue;
        }
        let top = grow_subtree(&mut slots, 0, 1, order);
        *top_slot = Some(top);
        if branch == sink_branch {
            let mut v = top;
            while let Some(Slot::Link(child)) = slots[v].get(1).copied() {
                v = child;
            }
            sink = v;
        }
    }
    slots[0] = root_order
        .iter()
        .enumerate()
        .map(|(slot, &b)| match branch_top[b] {
            Some(top) if slot >= removed => Slot::Link(top),
            _ => Slot::Loop,
        })
        .collect();
    Ok(StateGraph::from_slots(
        GraphFamily::Cayley {
            order,
            sink_branch,
            removed_branches: removed,
        },
        slots,
        0,
        sink,
    ))
}

/// Appends a binary subtree hanging below `parent`; returns its top vertex.
fn grow_subtree(slots: &mut Vec<Vec<Slot>>, parent: usize, depth: usize, order: usize) -> usize {
    let v = slots.len();
    slots.push(vec![Slot::Link(parent)]);
    if depth == order {
        slots[v].extend([Slot::Loop, Slot::Loop]);
    } else {
        let left = grow_subtree(slots, v, depth + 1, order);
        let right = grow_subtree(slots, v, depth + 1, order);
        slots[v].extend([Slot::Link(left), Slot::Link(right)]);
    }
    v
}

/// Structural problems found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    OutDegree { vertex: usize, degree: usize },
    InDegree { vertex: usize, degree: usize },
    ArcOutOfRange { arc: usize },
    MisplacedArc { arc: usize, vertex: usize },
    UnpairedArc { arc: usize },
    BadLoop { arc: usize },
    BadRole { vertex: usize },
    SourceIsSink,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutDegree { vertex, degree } => {
                write!(f, "vertex {vertex} has {degree} outgoing arcs")
            }
            Violation::InDegree { vertex, degree } => {
                write!(f, "vertex {vertex} has {degree} incoming arcs")
            }
            Violation::ArcOutOfRange { arc } => {
                write!(f, "arc {arc} references a missing vertex or arc")
            }
            Violation::MisplacedArc { arc, vertex } => {
                write!(
                    f,
                    "arc {arc} is not listed exactly once, under vertex {vertex}"
                )
            }
            Violation::UnpairedArc { arc } => write!(f, "arc {arc} has no reversed partner"),
            Violation::BadLoop { arc } => write!(f, "loop arc {arc} is not its own partner"),
            Violation::BadRole { vertex } => {
                write!(f, "source/sink vertex {vertex} does not exist")
            }
            Violation::SourceIsSink => write!(f, "source and sink coincide"),
        }
    }
}

/// Checks 3-regularity, the pairing involution and that vertex triples
/// partition the arcs. An empty list means the graph is valid.
pub fn validate(g: &StateGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = g.vertex_count;
    let arcs = &g.arcs;
    let mut listed = vec![0usize; arcs.len()];
    for (v, ids) in g.vertex_arcs.iter().enumerate() {
        if ids.len() != 3 {
            out.push(Violation::OutDegree {
                vertex: v,
                degree: ids.len(),
            });
        }
        for &a in ids {
            match arcs.get(a) {
                Some(arc) if arc.from == v => listed[a] += 1,
                Some(_) => out.push(Violation::MisplacedArc { arc: a, vertex: v }),
                None => out.push(Violation::ArcOutOfRange { arc: a }),
            }
        }
    }
    if g.vertex_arcs.len() != n {
        out.push(Violation::BadRole {
            vertex: g.vertex_arcs.len(),
        });
    }
    let mut indegree = vec![0usize; n];
    for (i, arc) in arcs.iter().enumerate() {
        if arc.id != i || arc.from >= n || arc.to >= n || arc.partner >= arcs.len() {
            out.push(Violation::ArcOutOfRange { arc: i });
            continue;
        }
        indegree[arc.to] += 1;
        if listed[i] != 1 {
            out.push(Violation::MisplacedArc {
                arc: i,
                vertex: arc.from,
            });
        }
        let partner = &arcs[arc.partner];
        match arc.kind {
            ArcKind::Loop => {
                if arc.partner != i || arc.from != arc.to {
                    out.push(Violation::BadLoop { arc: i });
                }
            }
            ArcKind::Link => {
                let paired = arc.partner != i
                    && partner.kind == ArcKind::Link
                    && partner.partner == i
                    && partner.from == arc.to
                    && partner.to == arc.from;
                if !paired {
                    out.push(Violation::UnpairedArc { arc: i });
                }
            }
        }
    }
    for (v, &d) in indegree.iter().enumerate() {
        if d != 3 {
            out.push(Violation::InDegree {
                vertex: v,
                degree: d,
            });
        }
    }
    for role in [g.source, g.sink] {
        if role >= n {
            out.push(Violation::BadRole { vertex: role });
        }
    }
    if g.source == g.sink {
        out.push(Violation::SourceIsSink);
    }
    out
}

/// Initial state on the source vertex: three coefficients in the source's
/// canonical arc order, or the maximally mixed state on that subspace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialSpec {
    Pure([Complex64; 3]),
    Averaged,
}

impl InitialSpec {
    /// Normalized pure initial state.
    pub fn pure(coefficients: [Complex64; 3]) -> Result<Self> {
        let norm = coefficients
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::InvalidParameter(
                "initial state must be a nonzero vector".into(),
            ));
        }
        Ok(InitialSpec::Pure(coefficients.map(|c| c / norm)))
    }

    pub fn real(coefficients: [f64; 3]) -> Result<Self> {
        Self::pure(coefficients.map(|c| Complex64::new(c, 0.0)))
    }
}

/// The named initial states used throughout the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamedInitial {
    /// `[1, 0, -1] / sqrt(2)`
    Psi0,
    /// `[1, -1, 0] / sqrt(2)`
    Psi1,
    /// `[1, 1, -2] / sqrt(6)`
    Psi2,
    /// `[1, 1, 1] / sqrt(3)`
    Uniform,
    /// Maximally mixed on the source subspace.
    Averaged,
}

impl NamedInitial {
    pub const ALL: [NamedInitial; 5] = [
        NamedInitial::Psi0,
        NamedInitial::Psi1,
        NamedInitial::Psi2,
        NamedInitial::Uniform,
        NamedInitial::Averaged,
    ];

    pub fn spec(self) -> InitialSpec {
        let real = |c: [f64; 3]| InitialSpec::real(c).expect("nonzero constant state");
        match self {
            NamedInitial::Psi0 => real([1.0, 0.0, -1.0]),
            NamedInitial::Psi1 => real([1.0, -1.0, 0.0]),
            NamedInitial::Psi2 => real([1.0, 1.0, -2.0]),
            NamedInitial::Uniform => real([1.0, 1.0, 1.0]),
            NamedInitial::Averaged => InitialSpec::Averaged,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            NamedInitial::Psi0 => "psi0",
            NamedInitial::Psi1 => "psi1",
            NamedInitial::Psi2 => "psi2",
            NamedInitial::Uniform => "uniform",
            NamedInitial::Averaged => "avg",
        }
    }
}

impl fmt::Display for NamedInitial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for NamedInitial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NamedInitial::ALL
            .into_iter()
            .find(|n| n.token() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown initial state '{s}'")))
    }
}
