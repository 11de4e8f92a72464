//! Trapped subspaces: numeric solvers for both walks and the explicit
//! integer-valued bases of the ladder and the Cayley tree.
//!
//! A vector with equal amplitudes on partner arcs and zero sum on every
//! vertex triple satisfies `C R v = -v` for every link configuration, so it
//! is trapped for the percolated walk. The analytic bases below are built
//! from exactly such vectors.

use num_complex::Complex64;
use serde_json::json;

use crate::dynamics::StepOperators;
use crate::error::{Error, Result};
use crate::graph::{build_ladder, ArcKind, GraphFamily, StateGraph};
use crate::numerics::{
    extend_orthonormal, kernel_basis, kernel_of_conjugate_rows, orthogonal_complement,
    orthonormalize, CMat, CVec, Subspace,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    NumericCqw,
    NumericPcqw,
    /// Largest CQW-invariant subspace on which the coin acts as `-1`.
    NumericCqwLocalized,
    AnalyticLadder,
    AnalyticCayley,
}

impl Provenance {
    pub fn token(self) -> &'static str {
        match self {
            Provenance::NumericCqw => "numeric-cqw",
            Provenance::NumericPcqw => "numeric-pcqw",
            Provenance::NumericCqwLocalized => "numeric-cqw-localized",
            Provenance::AnalyticLadder => "analytic-ladder",
            Provenance::AnalyticCayley => "analytic-cayley",
        }
    }
}

/// Spanning vectors of a trapped subspace and their orthonormalization.
#[derive(Clone, Debug)]
pub struct TrappedBasis {
    raw: Vec<CVec>,
    subspace: Subspace,
    provenance: Provenance,
}

impl TrappedBasis {
    pub fn from_raw(
        raw: Vec<CVec>,
        ambient: usize,
        provenance: Provenance,
        tol: f64,
    ) -> Result<Self> {
        let subspace = if raw.is_empty() {
            Subspace::empty(ambient)
        } else {
            orthonormalize(&raw, tol)?
        };
        if subspace.ambient() != ambient {
            return Err(Error::DimensionMismatch {
                expected: ambient,
                found: subspace.ambient(),
            });
        }
        Ok(TrappedBasis {
            raw,
            subspace,
            provenance,
        })
    }

    fn from_subspace(subspace: Subspace, provenance: Provenance) -> Self {
        TrappedBasis {
            raw: subspace.basis().to_vec(),
            subspace,
            provenance,
        }
    }

    /// Vectors as constructed, before orthonormalization.
    pub fn raw(&self) -> &[CVec] {
        &self.raw
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.subspace.dim()
    }

    pub fn projector(&self) -> CMat {
        self.subspace.projector_matrix()
    }

    /// Keeps the raw vectors with no amplitude on the sink arcs.
    pub fn sink_filtered(&self, g: &StateGraph) -> Result<TrappedBasis> {
        let sink = g.sink_arcs();
        let raw: Vec<CVec> = self
            .raw
            .iter()
            .filter(|v| sink.iter().all(|&a| v[a] == Complex64::new(0.0, 0.0)))
            .cloned()
            .collect();
        TrappedBasis::from_raw(raw, g.dimension(), self.provenance, self.subspace.tol())
    }

    /// `{"provenance": .., "ambient": .., "vectors": [[[re, im], ..], ..]}`
    /// with one arc-indexed list per raw vector.
    pub fn to_json(&self) -> Result<String> {
        let vectors: Vec<Vec<[f64; 2]>> = self
            .raw
            .iter()
            .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        let value = json!({
            "provenance": self.provenance.token(),
            "ambient": self.subspace.ambient(),
            "vectors": vectors,
        });
        Ok(serde_json::to_string_pretty(&value)?)
    }
}

fn check_ops(g: &StateGraph, ops: &StepOperators) -> Result<()> {
    if g.dimension() != ops.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dimension(),
            found: ops.dim(),
        });
    }
    Ok(())
}

/// `M` stacked on top of the unit rows of the sink arcs.
fn with_sink_rows(m: &CMat, sink: &[usize]) -> CMat {
    let d = m.cols();
    let mut out = CMat::zeros(m.rows() + sink.len(), d);
    for i in 0..m.rows() {
        out.row_mut(i).copy_from_slice(m.row(i));
    }
    for (k, &a) in sink.iter().enumerate() {
        out[(m.rows() + k, a)] = Complex64::new(1.0, 0.0);
    }
    out
}

/// Largest subspace of `start` mapped into itself by `C R`.
///
/// This is the fixed point of `N_{j+1} = {v in N_j : C R v in N_j}`. The
/// iteration runs on orthogonal complements: since `C R` is unitary, the
/// complement of `N_{j+1}` is the complement of `N_j` plus its image under
/// `(C R)^dagger`, so the complement is grown one Arnoldi vector at a time
/// until it is closed under the adjoint.
pub fn largest_invariant_subspace(
    ops: &StepOperators,
    start: &Subspace,
    tol: f64,
) -> Result<Subspace> {
    let d = ops.dim();
    if start.ambient() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: start.ambient(),
        });
    }
    let mut outside = orthogonal_complement(start.basis(), d);
    let mut next = 0;
    while next < outside.len() && outside.len() < d {
        let image = ops.apply_u_adjoint(&outside[next])?;
        extend_orthonormal(&mut outside, image, tol);
        next += 1;
    }
    let inside = orthogonal_complement(&outside, d);
    if inside.is_empty() {
        return Ok(Subspace::empty(d));
    }
    orthonormalize(&inside, tol)
}

fn non_sink_space(ops: &StepOperators, tol: f64) -> Result<Subspace> {
    let d = ops.dim();
    let vectors: Vec<CVec> = (0..d)
        .filter(|a| !ops.sink_arcs().contains(a))
        .map(|a| CVec::unit(d, a))
        .collect();
    if vectors.is_empty() {
        return Ok(Subspace::empty(d));
    }
    orthonormalize(&vectors, tol)
}

/// Trapped subspace of the coined walk avoiding the sink: the largest
/// `C R`-invariant subspace of `ker Pi_sink`. With sink-free operators this
/// is the whole space.
pub fn sr_trapped_cqw(g: &StateGraph, ops: &StepOperators, tol: f64) -> Result<TrappedBasis> {
    check_ops(g, ops)?;
    let start = non_sink_space(ops, tol)?;
    let sub = largest_invariant_subspace(ops, &start, tol)?;
    Ok(TrappedBasis::from_subspace(sub, Provenance::NumericCqw))
}

/// Largest `C R`-invariant subspace on which the coin acts as `-1` (and
/// which avoids the sink when the operators have one). These are the
/// trapped states of the coined walk whose support is a finite set of
/// links and loops rather than the whole graph.
pub fn localized_trapped_cqw(
    g: &StateGraph,
    ops: &StepOperators,
    tol: f64,
) -> Result<TrappedBasis> {
    check_ops(g, ops)?;
    let c_plus = ops.c().add(&CMat::identity(ops.dim()))?;
    let start = kernel_basis(&with_sink_rows(&c_plus, ops.sink_arcs()), tol)?;
    let sub = largest_invariant_subspace(ops, &start, tol)?;
    Ok(TrappedBasis::from_subspace(
        sub,
        Provenance::NumericCqwLocalized,
    ))
}

/// Trapped subspace of the percolated walk: vectors with `C R_K v = -v`
/// for the fully open configuration and every configuration with a single
/// closed link, and no amplitude on the sink arcs.
pub fn sr_trapped_pcqw(g: &StateGraph, ops: &StepOperators, tol: f64) -> Result<TrappedBasis> {
    check_ops(g, ops)?;
    let d = ops.dim();
    let u_plus = ops.u().add(&CMat::identity(d))?;
    let n0 = kernel_basis(&with_sink_rows(&u_plus, ops.sink_arcs()), tol)?;
    if n0.dim() == 0 {
        return Ok(TrappedBasis::from_subspace(n0, Provenance::NumericPcqw));
    }
    let links = ops.links().len();
    let mut constraints: Vec<CVec> = Vec::new();
    for closed in 0..links {
        let open: Vec<bool> = (0..links).map(|i| i != closed).collect();
        let cols: Vec<CVec> = n0
            .basis()
            .iter()
            .map(|b| Ok(ops.apply_percolated_u(b, &open)?.add(b)))
            .collect::<Result<_>>()?;
        // Only the rows of the two vertex blocks touched by the closed link
        // can be nonzero.
        for i in 0..d {
            let row: CVec = cols.iter().map(|c| c[i]).collect();
            if row.norm() > tol {
                constraints.push(row);
            }
        }
    }
    let keep = if constraints.is_empty() {
        Subspace::full(n0.dim())
    } else {
        let rows: Vec<Vec<Complex64>> = constraints
            .iter()
            .map(|r| r.iter().map(|z| z.conj()).collect())
            .collect();
        kernel_of_conjugate_rows(&rows, n0.dim(), tol, tol)
    };
    let sub = n0.embed(&keep)?;
    Ok(TrappedBasis::from_subspace(sub, Provenance::NumericPcqw))
}

/// Sets `value` on both arcs of a link, or on a loop.
fn set_edge(g: &StateGraph, v: &mut [i64], from: usize, to: usize, value: i64) -> Result<()> {
    let a = g
        .find_arc(from, to)
        .ok_or_else(|| Error::InvalidGraph(format!("no arc ({from},{to})")))?;
    v[a] = value;
    v[g.arc(a).partner] = value;
    Ok(())
}

fn to_cvec(v: &[i64]) -> CVec {
    v.iter().map(|&x| Complex64::new(x as f64, 0.0)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderStateKind {
    /// Around square `j`.
    FaceCycle(usize),
    /// Loop-rung-loop at the source end.
    SourceShortPath,
    /// Loop-rung-loop at the far end.
    FarShortPath,
    /// Loop to loop along the rail through the source.
    ConnectingPath,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderState {
    pub kind: LadderStateKind,
    pub coefficients: Vec<i64>,
}

/// The `L + 3` integer trapped states of the ladder: one per square, a
/// short loop-to-loop path at each end and one path between the two loops
/// of the source rail.
pub fn ladder_analytic_states(g: &StateGraph) -> Result<Vec<LadderState>> {
    let length = match g.family() {
        GraphFamily::Ladder { length } => length,
        _ => {
            return Err(Error::UnsupportedGraph(
                "ladder states need a ladder graph".into(),
            ))
        }
    };
    let d = g.dimension();
    let mut out = Vec::with_capacity(length + 3);
    for j in 0..length {
        let (a, b, c, e) = (2 * j, 2 * j + 1, 2 * j + 3, 2 * j + 2);
        let mut v = vec![0; d];
        for (k, (x, y)) in [(a, b), (b, c), (c, e), (e, a)].into_iter().enumerate() {
            set_edge(g, &mut v, x, y, if k % 2 == 0 { 1 } else { -1 })?;
        }
        out.push(LadderState {
            kind: LadderStateKind::FaceCycle(j),
            coefficients: v,
        });
    }
    for (kind, x) in [
        (LadderStateKind::SourceShortPath, 0),
        (LadderStateKind::FarShortPath, 2 * length),
    ] {
        let mut v = vec![0; d];
        set_edge(g, &mut v, x, x, -1)?;
        set_edge(g, &mut v, x, x + 1, 1)?;
        set_edge(g, &mut v, x + 1, x + 1, -1)?;
        out.push(LadderState {
            kind,
            coefficients: v,
        });
    }
    let mut v = vec![0; d];
    set_edge(g, &mut v, 0, 0, 1)?;
    let mut s = -1;
    for j in 0..length {
        set_edge(g, &mut v, 2 * j, 2 * j + 2, s)?;
        s = -s;
    }
    set_edge(g, &mut v, 2 * length, 2 * length, s)?;
    out.push(LadderState {
        kind: LadderStateKind::ConnectingPath,
        coefficients: v,
    });
    Ok(out)
}

/// Analytic trapped basis of the ladder of the given length, without sink
/// filtering (`L + 3` vectors).
pub fn ladder_analytic_basis(length: usize) -> Result<TrappedBasis> {
    let g = build_ladder(length)?;
    ladder_basis_for(&g)
}

/// Analytic trapped basis for a ladder graph, without sink filtering.
pub fn ladder_basis_for(g: &StateGraph) -> Result<TrappedBasis> {
    let raw = ladder_analytic_states(g)?
        .iter()
        .map(|s| to_cvec(&s.coefficients))
        .collect();
    TrappedBasis::from_raw(
        raw,
        g.dimension(),
        Provenance::AnalyticLadder,
        crate::numerics::DEFAULT_TOL,
    )
}

/// Rooted view of a tree-shaped state graph.
struct Tree<'a> {
    g: &'a StateGraph,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
}

impl<'a> Tree<'a> {
    fn new(g: &'a StateGraph) -> Result<Self> {
        if !matches!(g.family(), GraphFamily::Cayley { .. }) {
            return Err(Error::UnsupportedGraph(
                "path states need a Cayley tree".into(),
            ));
        }
        let root = g.source();
        let parent = g.bfs_parents(root);
        let mut depth = vec![0; g.vertex_count()];
        let mut order: Vec<usize> = (0..g.vertex_count()).collect();
        order.sort_by_key(|&v| {
            let mut d = 0;
            let mut x = v;
            while let Some(p) = parent[x] {
                d += 1;
                x = p;
            }
            d
        });
        for v in order {
            if let Some(p) = parent[v] {
                depth[v] = depth[p] + 1;
            }
        }
        Ok(Tree { g, parent, depth })
    }

    /// Outgoing arcs of `v` that lead away from the root, loops included,
    /// in canonical order.
    fn downward(&self, v: usize) -> Vec<usize> {
        self.g
            .vertex_arcs(v)
            .iter()
            .copied()
            .filter(|&a| Some(self.g.arc(a).to) != self.parent[v])
            .collect()
    }

    /// Loop arcs in depth-first order, which is a planar order.
    fn planar_loops(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.g.source()];
        while let Some(v) = stack.pop() {
            let mut children = Vec::new();
            for a in self.downward(v) {
                match self.g.arc(a).kind {
                    ArcKind::Loop => out.push(a),
                    ArcKind::Link => children.push(self.g.arc(a).to),
                }
            }
            // Loops sit at leaves or in the leading root slots, so emitting
            // them before the subtrees keeps the order planar.
            stack.extend(children.into_iter().rev());
        }
        out
    }

    /// Vertices on the tree path from `x` to `y`.
    fn path(&self, x: usize, y: usize) -> Vec<usize> {
        let (mut a, mut b) = (x, y);
        let mut left = vec![a];
        let mut right = vec![b];
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a].expect("non-root vertex has a parent");
                left.push(a);
            } else {
                b = self.parent[b].expect("non-root vertex has a parent");
                right.push(b);
            }
        }
        right.pop();
        left.extend(right.into_iter().rev());
        left
    }
}

/// Loop-to-loop path states between planar-neighbouring loops of a Cayley
/// tree (full or reduced), including the pair closing the circle. On the
/// full tree there are `3 * 2^k` of them, spanning a space of dimension
/// `3 * 2^k - 1`. Sink arcs are not filtered; see
/// [`TrappedBasis::sink_filtered`].
pub fn cayley_path_states(g: &StateGraph) -> Result<TrappedBasis> {
    let tree = Tree::new(g)?;
    let loops = tree.planar_loops();
    let n = loops.len();
    let mut raw = Vec::with_capacity(n);
    for i in 0..n {
        let (la, lb) = (loops[i], loops[(i + 1) % n]);
        if n < 2 || la == lb {
            continue;
        }
        let mut v = vec![0i64; g.dimension()];
        v[la] = 1;
        let path = tree.path(g.arc(la).from, g.arc(lb).from);
        let mut s = -1;
        for w in path.windows(2) {
            set_edge(g, &mut v, w[0], w[1], s)?;
            s = -s;
        }
        v[lb] = s;
        raw.push(to_cvec(&v));
    }
    TrappedBasis::from_raw(
        raw,
        g.dimension(),
        Provenance::AnalyticCayley,
        crate::numerics::DEFAULT_TOL,
    )
}

/// The two trapped vectors of the Cayley tree with a nonzero restriction
/// to the root subspace, with their root restrictions.
#[derive(Clone, Debug)]
pub struct SupplementaryPair {
    pub order: usize,
    /// Exact integer coefficients of `t1`.
    pub t1: Vec<i64>,
    /// `2 u_{k-1} + t1`, exact; empty for `k = 1`.
    pub t2_tilde: Vec<i64>,
    /// Sink-affected elements `u_1 .. u_{k-1}`, exact.
    pub u: Vec<Vec<i64>>,
    /// `t2_tilde` orthogonalized against `u_1 .. u_{k-2}`; zero for `k = 1`.
    pub t2: CVec,
    pub t1_norm_sqr: i128,
    pub t2_norm_sqr: f64,
    /// Root restriction of `t1 / |t1|`.
    pub tau1: [f64; 3],
    /// Root restriction of `t2 / |t2|`; zero for `k = 1`.
    pub tau2: [f64; 3],
}

fn inner(a: &[i64], b: &[i64]) -> i128 {
    a.iter().zip(b).map(|(&x, &y)| x as i128 * y as i128).sum()
}

/// Element with middle vertex `middle` at depth `m`: value `2^(k-m)` on the
/// first half, `-2^(k-m)` on the second, halved at each branching and
/// negated at each vertex on the way down. `None` if a half runs into the
/// sink without an alternative branch.
fn element(tree: &Tree, order: usize, halves: [usize; 2]) -> Result<Option<Vec<i64>>> {
    let g = tree.g;
    let m = tree.depth[g.arc(halves[0]).from];
    let top = 1i64 << (order - m);
    let mut v = vec![0i64; g.dimension()];
    let mut stack = vec![(halves[0], top), (halves[1], -top)];
    while let Some((a, x)) = stack.pop() {
        let arc = g.arc(a);
        if arc.to == g.sink() {
            return Ok(None);
        }
        v[a] = x;
        v[arc.partner] = x;
        if arc.kind == ArcKind::Loop {
            continue;
        }
        let next: Vec<usize> = tree
            .downward(arc.to)
            .into_iter()
            .filter(|&b| g.arc(b).to != g.sink())
            .collect();
        let n = next.len() as i64;
        if n == 0 {
            return Ok(None);
        }
        if x % n != 0 {
            return Err(Error::InvalidGraph(format!(
                "value {x} does not split over {n} arcs"
            )));
        }
        for b in next {
            if g.arc(b).kind == ArcKind::Loop {
                v[b] = -x / n;
            } else {
                stack.push((b, -x / n));
            }
        }
    }
    Ok(Some(v))
}

/// Builds `t1`, the chain `u_i`, `t2_tilde = 2 u_{k-1} + t1` and its
/// orthogonalization `t2` on a full Cayley tree.
pub fn supplementary_pair(g: &StateGraph, tol: f64) -> Result<SupplementaryPair> {
    let order = match g.family() {
        GraphFamily::Cayley {
            order,
            removed_branches: 0,
            ..
        } => order,
        _ => {
            return Err(Error::UnsupportedGraph(
                "supplementary pair needs a full Cayley tree".into(),
            ))
        }
    };
    if order < 1 {
        return Err(Error::InvalidParameter("order must be at least 1".into()));
    }
    let tree = Tree::new(g)?;
    let root = g.source();
    let slots = g.vertex_arcs(root);
    let t1 = element(&tree, order, [slots[0], slots[1]])?
        .ok_or_else(|| Error::InvalidGraph("sink found outside the last root branch".into()))?;

    // Chain of vertices from the root down to the sink.
    let chain = tree.path(root, g.sink());
    let mut u: Vec<Vec<i64>> = Vec::new();
    for m in (1..order.saturating_sub(1)).rev() {
        let v = chain[m];
        let sink_side = g
            .find_arc(v, chain[m + 1])
            .ok_or_else(|| Error::InvalidGraph("broken sink chain".into()))?;
        let other = tree
            .downward(v)
            .into_iter()
            .find(|&a| a != sink_side)
            .ok_or_else(|| {
                Error::InvalidGraph("sink chain vertex without a second child".into())
            })?;
        if let Some(e) = element(&tree, order, [sink_side, other])? {
            u.push(e);
        }
    }
    let last = element(&tree, order, [slots[2], slots[0]])?.map(|mut e| {
        if inner(&t1, &e) > 0 {
            e.iter_mut().for_each(|x| *x = -*x);
        }
        e
    });

    let d = g.dimension();
    let t1_norm_sqr = inner(&t1, &t1);
    let scale1 = (t1_norm_sqr as f64).sqrt();
    let tau1 = [0, 1, 2].map(|i| t1[slots[i]] as f64 / scale1);

    let (t2_tilde, t2) = match &last {
        Some(ul) => {
            let tt: Vec<i64> = ul.iter().zip(&t1).map(|(&a, &b)| 2 * a + b).collect();
            let chain_basis = if u.is_empty() {
                Subspace::empty(d)
            } else {
                orthonormalize(&u.iter().map(|e| to_cvec(e)).collect::<Vec<_>>(), tol)?
            };
            let raw = to_cvec(&tt);
            let t2 = raw.sub(&chain_basis.project(&raw)?);
            u.push(ul.clone());
            (tt, t2)
        }
        None => (Vec::new(), CVec::zeros(d)),
    };
    let t2_norm_sqr = t2.norm_sqr();
    let tau2 = if t2_norm_sqr > 0.0 {
        let s = t2_norm_sqr.sqrt();
        [0, 1, 2].map(|i| t2[slots[i]].re / s)
    } else {
        [0.0; 3]
    };
    Ok(SupplementaryPair {
        order,
        t1,
        t2_tilde,
        u,
        t2,
        t1_norm_sqr,
        t2_norm_sqr,
        tau1,
        tau2,
    })
}
