//! Step operators and time evolution for coined and percolated walks.
//!
//! One CQW step maps `rho -> Pi C R rho R C Pi`. The percolated walk averages
//! over link configurations `K`, each link open independently with
//! probability `p` and re-sampled every step:
//! `Phi(rho) = sum_K pi_K Pi C R_K rho R_K C Pi`. A closed link reflects
//! both of its arcs onto themselves, so `R_K` is the product of the swaps
//! `S_e` over the open links. The swaps commute, which lets the average be
//! applied one link at a time.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::{validate, InitialSpec, StateGraph};
use crate::numerics::{CMat, CVec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest link count accepted by [`pcqw_step_bruteforce`].
pub const BRUTE_FORCE_LINK_LIMIT: usize = 16;

/// Grover coin `G3 = (2/3) J - I`.
pub fn grover3() -> CMat {
    CMat::from_fn(3, 3, |i, j| {
        Complex64::new(if i == j { -1.0 / 3.0 } else { 2.0 / 3.0 }, 0.0)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WalkKind {
    Cqw,
    Pcqw,
}

impl WalkKind {
    pub fn token(self) -> &'static str {
        match self {
            WalkKind::Cqw => "cqw",
            WalkKind::Pcqw => "pcqw",
        }
    }
}

impl fmt::Display for WalkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for WalkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cqw" => Ok(WalkKind::Cqw),
            "pcqw" => Ok(WalkKind::Pcqw),
            _ => Err(Error::InvalidParameter(format!("unknown walk type '{s}'"))),
        }
    }
}

/// Dense step operators together with the arc structure they came from.
#[derive(Clone, Debug)]
pub struct StepOperators {
    r: CMat,
    c: CMat,
    pi: CMat,
    u: CMat,
    partner: Vec<usize>,
    blocks: Vec<[usize; 3]>,
    sink_arcs: Vec<usize>,
    links: Vec<(usize, usize)>,
}

impl StepOperators {
    /// Operators with the graph's sink active.
    pub fn new(g: &StateGraph) -> Result<Self> {
        Self::build(g, true)
    }

    /// Operators with `Pi = I`; the walk is then unitary.
    pub fn without_sink(g: &StateGraph) -> Result<Self> {
        Self::build(g, false)
    }

    fn build(g: &StateGraph, with_sink: bool) -> Result<Self> {
        let violations = validate(g);
        if let Some(v) = violations.first() {
            return Err(Error::InvalidGraph(format!(
                "{v} ({} violation(s) in total)",
                violations.len()
            )));
        }
        let d = g.dimension();
        let partner: Vec<usize> = g.arcs().iter().map(|a| a.partner).collect();
        let blocks: Vec<[usize; 3]> = (0..g.vertex_count())
            .map(|v| {
                let a = g.vertex_arcs(v);
                [a[0], a[1], a[2]]
            })
            .collect();
        let sink_arcs = if with_sink {
            g.sink_arcs().to_vec()
        } else {
            Vec::new()
        };

        let r = CMat::from_fn(d, d, |i, j| {
            if partner[j] == i {
                Complex64::new(1.0, 0.0)
            } else {
                ZERO
            }
        });
        let g3 = grover3();
        let mut c = CMat::zeros(d, d);
        for b in &blocks {
            for (x, &i) in b.iter().enumerate() {
                for (y, &j) in b.iter().enumerate() {
                    c[(i, j)] = g3[(x, y)];
                }
            }
        }
        let mut pi = CMat::identity(d);
        for &a in &sink_arcs {
            pi[(a, a)] = ZERO;
        }
        let u = c.matmul(&r)?;
        Ok(StepOperators {
            r,
            c,
            pi,
            u,
            partner,
            blocks,
            sink_arcs,
            links: g.links(),
        })
    }

    pub fn dim(&self) -> usize {
        self.partner.len()
    }

    /// Reflecting shift.
    pub fn r(&self) -> &CMat {
        &self.r
    }

    /// Block-diagonal Grover coin.
    pub fn c(&self) -> &CMat {
        &self.c
    }

    /// Projector onto the complement of the sink subspace.
    pub fn pi(&self) -> &CMat {
        &self.pi
    }

    /// `U = C R`.
    pub fn u(&self) -> &CMat {
        &self.u
    }

    pub fn partner(&self) -> &[usize] {
        &self.partner
    }

    pub fn blocks(&self) -> &[[usize; 3]] {
        &self.blocks
    }

    pub fn sink_arcs(&self) -> &[usize] {
        &self.sink_arcs
    }

    pub fn has_sink(&self) -> bool {
        !self.sink_arcs.is_empty()
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    /// Arc permutation of `R_K`; `open[i]` refers to `links()[i]`.
    pub fn percolated_permutation(&self, open: &[bool]) -> Result<Vec<usize>> {
        if open.len() != self.links.len() {
            return Err(Error::DimensionMismatch {
                expected: self.links.len(),
                found: open.len(),
            });
        }
        let mut perm: Vec<usize> = (0..self.dim()).collect();
        for (&(a, b), &is_open) in self.links.iter().zip(open) {
            if is_open {
                perm[a] = b;
                perm[b] = a;
            }
        }
        Ok(perm)
    }

    /// Dense `R_K`.
    pub fn percolated_shift(&self, open: &[bool]) -> Result<CMat> {
        let perm = self.percolated_permutation(open)?;
        let d = self.dim();
        Ok(CMat::from_fn(d, d, |i, j| {
            if perm[j] == i {
                Complex64::new(1.0, 0.0)
            } else {
                ZERO
            }
        }))
    }

    /// `U v` without the sink projection.
    pub fn apply_u(&self, v: &CVec) -> Result<CVec> {
        self.check(v.len())?;
        let mut w = CVec::zeros(self.dim());
        for (i, &p) in self.partner.iter().enumerate() {
            w[i] = v[p];
        }
        self.coin_vec(&mut w);
        Ok(w)
    }

    /// `R C v`, the adjoint of `C R`.
    pub fn apply_u_adjoint(&self, v: &CVec) -> Result<CVec> {
        let w = self.apply_coin(v)?;
        Ok(self.partner.iter().map(|&p| w[p]).collect())
    }

    /// `C R_K v` without the sink projection.
    pub fn apply_percolated_u(&self, v: &CVec, open: &[bool]) -> Result<CVec> {
        self.check(v.len())?;
        let perm = self.percolated_permutation(open)?;
        let mut w: CVec = perm.iter().map(|&p| v[p]).collect();
        self.coin_vec(&mut w);
        Ok(w)
    }

    /// `C v`
    pub fn apply_coin(&self, v: &CVec) -> Result<CVec> {
        self.check(v.len())?;
        let mut w = v.clone();
        self.coin_vec(&mut w);
        Ok(w)
    }

    fn coin_vec(&self, v: &mut CVec) {
        for b in &self.blocks {
            let s = (v[b[0]] + v[b[1]] + v[b[2]]) * (2.0 / 3.0);
            for &i in b {
                v[i] = s - v[i];
            }
        }
    }

    /// `C rho C`, in place.
    fn coin_conjugate(&self, rho: &mut CMat) {
        let d = self.dim();
        for b in &self.blocks {
            for j in 0..d {
                let s = (rho[(b[0], j)] + rho[(b[1], j)] + rho[(b[2], j)]) * (2.0 / 3.0);
                for &i in b {
                    rho[(i, j)] = s - rho[(i, j)];
                }
            }
        }
        for i in 0..d {
            let row = rho.row_mut(i);
            for b in &self.blocks {
                let s = (row[b[0]] + row[b[1]] + row[b[2]]) * (2.0 / 3.0);
                for &j in b {
                    row[j] = s - row[j];
                }
            }
        }
    }

    fn project_out_sink(&self, rho: &mut CMat) {
        let d = self.dim();
        for &a in &self.sink_arcs {
            rho.row_mut(a).iter_mut().for_each(|z| *z = ZERO);
            for i in 0..d {
                rho[(i, a)] = ZERO;
            }
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }
}

/// Builds the step operators for a graph, with its sink active.
pub fn make_step_operators(g: &StateGraph) -> Result<StepOperators> {
    StepOperators::new(g)
}

/// Per-link open probability of the percolated walk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PercolationSpec {
    p: f64,
}

impl PercolationSpec {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "open probability must lie in (0, 1], got {p}"
            )));
        }
        Ok(PercolationSpec { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Probability of a configuration with `open` of `links` links open.
    pub fn configuration_weight(&self, open: usize, links: usize) -> f64 {
        self.p.powi(open as i32) * (1.0 - self.p).powi((links - open) as i32)
    }
}

impl Default for PercolationSpec {
    fn default() -> Self {
        PercolationSpec { p: 0.5 }
    }
}

/// Density operator over arcs.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOp(CMat);

impl DensityOp {
    /// Wraps a square Hermitian matrix.
    pub fn new(m: CMat, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        if !m.is_hermitian(tol) {
            return Err(Error::InvalidParameter(
                "density operator must be Hermitian".into(),
            ));
        }
        Ok(DensityOp(m))
    }

    /// `|v><v|`
    pub fn pure(v: &CVec) -> Self {
        let n = v.len();
        DensityOp(CMat::from_fn(n, n, |i, j| v[i] * v[j].conj()))
    }

    /// Source-subspace initial state of a graph.
    pub fn initial(g: &StateGraph, spec: &InitialSpec) -> Result<Self> {
        match spec {
            InitialSpec::Pure(c) => Ok(Self::pure(&g.embed_source(c)?)),
            InitialSpec::Averaged => {
                let n = g.dimension();
                let mut m = CMat::zeros(n, n);
                let arcs = g.source_arcs();
                for &a in arcs {
                    m[(a, a)] = Complex64::new(1.0 / arcs.len() as f64, 0.0);
                }
                Ok(DensityOp(m))
            }
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }
}

/// `Pi C R rho R C Pi`
pub fn cqw_step(ops: &StepOperators, rho: &DensityOp) -> Result<DensityOp> {
    ops.check(rho.dim())?;
    let d = ops.dim();
    let src = rho.matrix();
    let p = &ops.partner;
    let mut m = CMat::from_fn(d, d, |i, j| src[(p[i], p[j])]);
    ops.coin_conjugate(&mut m);
    ops.project_out_sink(&mut m);
    Ok(DensityOp(m))
}

/// One step of the percolated channel, averaged link by link.
pub fn pcqw_step(
    ops: &StepOperators,
    perc: &PercolationSpec,
    rho: &DensityOp,
) -> Result<DensityOp> {
    ops.check(rho.dim())?;
    let mut m = rho.matrix().clone();
    let p = perc.p();
    let q = 1.0 - p;
    let d = ops.dim();
    for &(a, b) in &ops.links {
        // rho <- q rho + p S rho S; only rows and columns a, b change.
        let (aa, ab, ba, bb) = (m[(a, a)], m[(a, b)], m[(b, a)], m[(b, b)]);
        for j in 0..d {
            if j == a || j == b {
                continue;
            }
            let (x, y) = (m[(a, j)], m[(b, j)]);
            m[(a, j)] = x * q + y * p;
            m[(b, j)] = y * q + x * p;
            let (x, y) = (m[(j, a)], m[(j, b)]);
            m[(j, a)] = x * q + y * p;
            m[(j, b)] = y * q + x * p;
        }
        m[(a, a)] = aa * q + bb * p;
        m[(b, b)] = bb * q + aa * p;
        m[(a, b)] = ab * q + ba * p;
        m[(b, a)] = ba * q + ab * p;
    }
    ops.coin_conjugate(&mut m);
    ops.project_out_sink(&mut m);
    Ok(DensityOp(m))
}

/// The channel as an explicit sum over all `2^|E_p|` configurations.
pub fn pcqw_step_bruteforce(
    ops: &StepOperators,
    perc: &PercolationSpec,
    rho: &DensityOp,
) -> Result<DensityOp> {
    ops.check(rho.dim())?;
    let n = ops.links.len();
    if n > BRUTE_FORCE_LINK_LIMIT {
        return Err(Error::TooManyLinks {
            links: n,
            limit: BRUTE_FORCE_LINK_LIMIT,
        });
    }
    let d = ops.dim();
    let pic = ops.pi.matmul(&ops.c)?;
    let mut out = CMat::zeros(d, d);
    for mask in 0u32..(1u32 << n) {
        let open: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let weight = perc.configuration_weight(mask.count_ones() as usize, n);
        if weight == 0.0 {
            continue;
        }
        let step = pic.matmul(&ops.percolated_shift(&open)?)?;
        let term = step.matmul(rho.matrix())?.matmul(&step.adjoint())?;
        out = out.add(&term.scale(Complex64::new(weight, 0.0)))?;
    }
    Ok(DensityOp(out))
}

/// `Pi C R v` for a pure state.
pub fn cqw_step_pure(ops: &StepOperators, v: &CVec) -> Result<CVec> {
    let mut w = ops.apply_u(v)?;
    for &a in &ops.sink_arcs {
        w[a] = ZERO;
    }
    Ok(w)
}

fn step(ops: &StepOperators, perc: Option<&PercolationSpec>, rho: &DensityOp) -> Result<DensityOp> {
    match perc {
        Some(p) => pcqw_step(ops, p, rho),
        None => cqw_step(ops, rho),
    }
}

/// Absorbed probability `q(t) = 1 - Tr rho(t)` for `t = 0..=steps`. Without a
/// percolation spec the walk is the plain CQW.
pub fn evolve(
    ops: &StepOperators,
    perc: Option<&PercolationSpec>,
    rho0: &DensityOp,
    steps: usize,
) -> Result<Vec<f64>> {
    let mut rho = rho0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(1.0 - rho.trace());
    for _ in 0..steps {
        rho = step(ops, perc, &rho)?;
        out.push(1.0 - rho.trace());
    }
    Ok(out)
}

/// Stopping rule for long runs: stop once `q(t) - q(t - window) < threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Convergence {
    pub window: usize,
    pub threshold: f64,
    pub max_steps: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            window: 50,
            threshold: 1e-9,
            max_steps: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergedRun {
    pub q: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Runs a walk until the absorbed probability stops changing.
pub fn run_to_convergence(
    ops: &StepOperators,
    perc: Option<&PercolationSpec>,
    rho0: &DensityOp,
    rule: &Convergence,
) -> Result<ConvergedRun> {
    let mut rho = rho0.clone();
    let q0 = 1.0 - rho.trace();
    converge_with(rule, q0, || {
        rho = step(ops, perc, &rho)?;
        Ok(1.0 - rho.trace())
    })
}

/// Same as [`run_to_convergence`] for a CQW started in a mixture of pure
/// states `(weight, vector)`, evolving the vectors instead of `rho`.
pub fn run_pure_cqw_to_convergence(
    ops: &StepOperators,
    mixture: &[(f64, CVec)],
    rule: &Convergence,
) -> Result<ConvergedRun> {
    let mut states: Vec<(f64, CVec)> = mixture.to_vec();
    let survival = |s: &[(f64, CVec)]| s.iter().map(|(w, v)| w * v.norm_sqr()).sum::<f64>();
    let q0 = 1.0 - survival(&states);
    converge_with(rule, q0, || {
        for (_, v) in states.iter_mut() {
            *v = cqw_step_pure(ops, v)?;
        }
        Ok(1.0 - survival(&states))
    })
}

fn converge_with(
    rule: &Convergence,
    q0: f64,
    mut advance: impl FnMut() -> Result<f64>,
) -> Result<ConvergedRun> {
    if rule.window == 0 {
        return Err(Error::InvalidParameter(
            "convergence window must be positive".into(),
        ));
    }
    let mut history = vec![q0];
    for t in 1..=rule.max_steps {
        let q = advance()?;
        history.push(q);
        if t >= rule.window && q - history[t - rule.window] < rule.threshold {
            return Ok(ConvergedRun {
                q,
                steps: t,
                converged: true,
            });
        }
    }
    Ok(ConvergedRun {
        q: *history.last().unwrap_or(&q0),
        steps: rule.max_steps,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cayley_tree, build_ladder, build_reduced_cayley, NamedInitial};
    use proptest::prelude::*;

    fn cv(x: &[f64]) -> CVec {
        CVec::from_real(x)
    }

    #[test]
    fn grover_matrix_entries() {
        let g = grover3();
        let e0 = cv(&[1.0, 0.0, 0.0]);
        let out = g.mul_vec(&e0).unwrap();
        assert!(out.max_abs_diff(&cv(&[-1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0])) < 1e-15);
        let ones = cv(&[1.0, 1.0, 1.0]);
        assert!(g.mul_vec(&ones).unwrap().max_abs_diff(&ones) < 1e-15);
        assert!(g.matmul(&g).unwrap().max_abs_diff(&CMat::identity(3)) < 1e-15);
    }

    #[test]
    fn shift_fixes_loops() {
        let g = build_ladder(2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        for a in g.arcs() {
            if a.partner == a.id {
                assert_eq!(ops.r()[(a.id, a.id)], Complex64::new(1.0, 0.0));
            }
        }
    }

    #[test]
    fn operator_identities() {
        for g in [
            build_ladder(3).unwrap(),
            build_cayley_tree(2, 2).unwrap(),
            build_reduced_cayley(2, 1).unwrap(),
        ] {
            let ops = StepOperators::new(&g).unwrap();
            let id = CMat::identity(g.dimension());
            assert!(ops.r().matmul(ops.r()).unwrap().max_abs_diff(&id) < 1e-12);
            assert!(ops.c().matmul(ops.c()).unwrap().max_abs_diff(&id) < 1e-12);
            assert!(ops.c().max_abs_diff(&ops.c().transpose()) < 1e-15);
            assert!(ops.pi().matmul(ops.pi()).unwrap().max_abs_diff(ops.pi()) < 1e-15);
            let utu = ops.u().transpose().matmul(ops.u()).unwrap();
            assert!(utu.max_abs_diff(&id) < 1e-12);
            assert!(ops.u().as_slice().iter().all(|z| z.im == 0.0));
        }
    }

    #[test]
    fn apply_u_matches_dense() {
        let g = build_cayley_tree(2, 1).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let v: CVec = (0..g.dimension())
            .map(|i| Complex64::new(i as f64 * 0.1, 1.0 - i as f64 * 0.03))
            .collect();
        let dense = ops.u().mul_vec(&v).unwrap();
        assert!(ops.apply_u(&v).unwrap().max_abs_diff(&dense) < 1e-13);
    }

    #[test]
    fn sink_support_is_erased() {
        let g = build_ladder(2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let mut v = CVec::zeros(g.dimension());
        for &a in g.sink_arcs() {
            v[a] = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
        }
        // The projection acts after shift and coin, so start from the
        // pre-image of the sink support under C R.
        let pre = ops.u().transpose().mul_vec(&v).unwrap();
        let rho = DensityOp::pure(&pre);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        let out = cqw_step(&ops, &rho).unwrap();
        assert!(out.matrix().max_abs() < 1e-15);
    }

    #[test]
    fn step_contracts_trace() {
        let g = build_ladder(1).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let rho = DensityOp::initial(&g, &NamedInitial::Psi0.spec()).unwrap();
        let next = cqw_step(&ops, &rho).unwrap();
        assert!(next.trace() <= 1.0 + 1e-12);
        assert!(next.matrix().is_hermitian(1e-14));
    }

    #[test]
    fn cqw_step_matches_dense_definition() {
        let g = build_cayley_tree(1, 2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let rho = DensityOp::initial(&g, &NamedInitial::Psi2.spec()).unwrap();
        let w = ops.pi().matmul(ops.u()).unwrap();
        let dense = w
            .matmul(rho.matrix())
            .unwrap()
            .matmul(&w.adjoint())
            .unwrap();
        let fast = cqw_step(&ops, &rho).unwrap();
        assert!(fast.matrix().max_abs_diff(&dense) < 1e-14);
    }

    #[test]
    fn full_percolation_is_cqw() {
        let g = build_ladder(2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let perc = PercolationSpec::new(1.0).unwrap();
        let mut rho = DensityOp::initial(&g, &NamedInitial::Psi0.spec()).unwrap();
        for _ in 0..5 {
            let a = pcqw_step(&ops, &perc, &rho).unwrap();
            let b = cqw_step(&ops, &rho).unwrap();
            assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-14);
            rho = a;
        }
    }

    #[test]
    fn factorized_channel_matches_sum_on_ladder_1() {
        let g = build_ladder(1).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        assert_eq!(ops.links().len(), 4);
        let perc = PercolationSpec::new(0.37).unwrap();
        let mut rho = DensityOp::initial(&g, &NamedInitial::Psi0.spec()).unwrap();
        for _ in 0..6 {
            let a = pcqw_step(&ops, &perc, &rho).unwrap();
            let b = pcqw_step_bruteforce(&ops, &perc, &rho).unwrap();
            assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
            rho = a;
        }
    }

    #[test]
    fn bruteforce_single_term_at_p_one() {
        let g = build_cayley_tree(1, 2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let perc = PercolationSpec::new(1.0).unwrap();
        let rho = DensityOp::initial(&g, &NamedInitial::Psi1.spec()).unwrap();
        let a = pcqw_step_bruteforce(&ops, &perc, &rho).unwrap();
        let b = cqw_step(&ops, &rho).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-14);
    }

    #[test]
    fn configuration_weights_sum_to_one() {
        let perc = PercolationSpec::new(0.3).unwrap();
        for n in 0..=10usize {
            let total: f64 = (0u32..(1 << n))
                .map(|m| perc.configuration_weight(m.count_ones() as usize, n))
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bruteforce_guard() {
        let g = build_cayley_tree(3, 2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        assert!(ops.links().len() > BRUTE_FORCE_LINK_LIMIT);
        let rho = DensityOp::initial(&g, &InitialSpec::Averaged).unwrap();
        let err = pcqw_step_bruteforce(&ops, &PercolationSpec::default(), &rho).unwrap_err();
        assert!(matches!(err, Error::TooManyLinks { .. }));
    }

    #[test]
    fn invalid_probability() {
        for p in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(PercolationSpec::new(p).is_err());
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let ops = StepOperators::new(&build_ladder(1).unwrap()).unwrap();
        let rho = DensityOp::pure(&CVec::unit(5, 0));
        assert!(cqw_step(&ops, &rho).is_err());
        assert!(pcqw_step(&ops, &PercolationSpec::default(), &rho).is_err());
    }

    #[test]
    fn sink_free_walks_preserve_trace() {
        let g = build_ladder(3).unwrap();
        let ops = StepOperators::without_sink(&g).unwrap();
        let perc = PercolationSpec::default();
        let rho0 = DensityOp::initial(&g, &NamedInitial::Psi0.spec()).unwrap();
        for series in [
            evolve(&ops, None, &rho0, 100).unwrap(),
            evolve(&ops, Some(&perc), &rho0, 100).unwrap(),
        ] {
            assert!(series.iter().all(|q| q.abs() < 1e-12));
        }
    }

    #[test]
    fn cayley_1_percolated_absorption_is_monotone() {
        let g = build_cayley_tree(1, 2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let rho0 = DensityOp::initial(&g, &NamedInitial::Psi1.spec()).unwrap();
        let series = evolve(&ops, Some(&PercolationSpec::default()), &rho0, 400).unwrap();
        assert!(series.windows(2).all(|w| w[1] >= w[0] - 1e-14));
        assert!((series[400] - 0.6).abs() < 1e-3);
        let run = run_to_convergence(
            &ops,
            Some(&PercolationSpec::default()),
            &rho0,
            &Convergence::default(),
        )
        .unwrap();
        assert!(run.converged);
        assert!((run.q - 0.6).abs() < 1e-6);
    }

    #[test]
    fn cayley_2_coined_walk_from_psi1_is_trapped() {
        let g = build_cayley_tree(2, 2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let rho0 = DensityOp::initial(&g, &NamedInitial::Psi1.spec()).unwrap();
        let series = evolve(&ops, None, &rho0, 500).unwrap();
        assert!(series.iter().all(|q| q.abs() < 1e-12));
    }

    #[test]
    fn pure_and_mixed_cqw_runs_agree() {
        let g = build_ladder(2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let rule = Convergence::default();
        let mixed = run_to_convergence(
            &ops,
            None,
            &DensityOp::initial(&g, &InitialSpec::Averaged).unwrap(),
            &rule,
        )
        .unwrap();
        let mixture: Vec<(f64, CVec)> = g
            .source_arcs()
            .iter()
            .map(|&a| (1.0 / 3.0, CVec::unit(g.dimension(), a)))
            .collect();
        let pure = run_pure_cqw_to_convergence(&ops, &mixture, &rule).unwrap();
        assert_eq!(mixed.steps, pure.steps);
        assert!((mixed.q - pure.q).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn absorbed_probability_is_monotone(
            l in 1usize..5,
            p in 0.05f64..1.0,
            re in proptest::array::uniform3(-1.0f64..1.0),
            im in proptest::array::uniform3(-1.0f64..1.0),
        ) {
            let coeffs = [0, 1, 2].map(|i| Complex64::new(re[i], im[i]));
            prop_assume!(coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3);
            let g = build_ladder(l).unwrap();
            let ops = StepOperators::new(&g).unwrap();
            let rho0 = DensityOp::initial(&g, &InitialSpec::pure(coeffs).unwrap()).unwrap();
            let perc = PercolationSpec::new(p).unwrap();
            for series in [evolve(&ops, None, &rho0, 60).unwrap(), evolve(&ops, Some(&perc), &rho0, 60).unwrap()] {
                prop_assert!(series.windows(2).all(|w| w[1] >= w[0] - 1e-12));
                prop_assert!(series.iter().all(|&q| (-1e-12..=1.0 + 1e-12).contains(&q)));
            }
        }

        #[test]
        fn factorized_channel_matches_sum_on_small_graphs(
            which in 0usize..6,
            p in 0.01f64..1.0,
        ) {
            let g = match which {
                0 => build_ladder(1),
                1 => build_ladder(2),
                2 => build_cayley_tree(1, 0),
                3 => build_cayley_tree(2, 2),
                4 => build_reduced_cayley(2, 1),
                _ => build_reduced_cayley(2, 2),
            }.unwrap();
            let ops = StepOperators::new(&g).unwrap();
            let perc = PercolationSpec::new(p).unwrap();
            let mut rho = DensityOp::initial(&g, &InitialSpec::Averaged).unwrap();
            for _ in 0..3 {
                let a = pcqw_step(&ops, &perc, &rho).unwrap();
                let b = pcqw_step_bruteforce(&ops, &perc, &rho).unwrap();
                prop_assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
                rho = a;
            }
        }
    }
}
