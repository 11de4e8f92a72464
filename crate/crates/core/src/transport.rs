//! Transport efficiency: the probability that the walker is eventually
//! absorbed by the sink.
//!
//! The trapped subspace is invariant and never leaks into the sink, while
//! everything orthogonal to it eventually does. The efficiency is therefore
//! `q = 1 - Tr(P_T rho_i)`, with `P_T` the projector onto the trapped
//! subspace avoiding the sink.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::dynamics::{
    run_pure_cqw_to_convergence, run_to_convergence, Convergence, DensityOp, PercolationSpec,
    StepOperators, WalkKind,
};
use crate::error::{Error, Result};
use crate::graph::{InitialSpec, StateGraph};
use crate::numerics::CVec;
use crate::trapped::{sr_trapped_cqw, sr_trapped_pcqw, SupplementaryPair, TrappedBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Projector,
    Dynamic,
    Analytic,
}

impl Method {
    pub fn token(self) -> &'static str {
        match self {
            Method::Projector => "projector",
            Method::Dynamic => "dynamic",
            Method::Analytic => "analytic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyReport {
    pub q: f64,
    pub method: Method,
    /// Steps taken by a dynamic run.
    pub steps: Option<usize>,
    /// Whether a dynamic run met its stopping rule before the step cap.
    pub converged: bool,
}

impl EfficiencyReport {
    fn exact(q: f64, method: Method) -> Self {
        EfficiencyReport {
            q: q.clamp(0.0, 1.0),
            method,
            steps: None,
            converged: true,
        }
    }

    /// Probability of staying trapped forever, `1 - q`.
    pub fn trapping_probability(&self) -> f64 {
        1.0 - self.q
    }
}

/// `q = 1 - Tr(P_T rho_i)`. The averaged initial state is handled by
/// [`average_efficiency`].
pub fn efficiency_projector(
    basis: &TrappedBasis,
    g: &StateGraph,
    initial: &InitialSpec,
) -> Result<EfficiencyReport> {
    check(basis, g)?;
    match initial {
        InitialSpec::Pure(c) => {
            let psi = g.embed_source(c)?;
            let kept = basis.subspace().weight(&psi)?;
            Ok(EfficiencyReport::exact(1.0 - kept, Method::Projector))
        }
        InitialSpec::Averaged => average_efficiency(basis, g),
    }
}

/// Efficiency for the maximally mixed state on the source subspace.
pub fn average_efficiency(basis: &TrappedBasis, g: &StateGraph) -> Result<EfficiencyReport> {
    check(basis, g)?;
    let arcs = g.source_arcs();
    let mut kept = 0.0;
    for &a in arcs {
        kept += basis.subspace().weight(&CVec::unit(g.dimension(), a))?;
    }
    Ok(EfficiencyReport::exact(
        1.0 - kept / arcs.len() as f64,
        Method::Projector,
    ))
}

fn check(basis: &TrappedBasis, g: &StateGraph) -> Result<()> {
    if basis.subspace().ambient() != g.dimension() {
        return Err(Error::DimensionMismatch {
            expected: g.dimension(),
            found: basis.subspace().ambient(),
        });
    }
    Ok(())
}

/// `1 - 2^k / (2^(k+2) - 3)`, the percolated-walk efficiency on the Cayley
/// tree of order `k` from `[1, -1, 0] / sqrt(2)`.
pub fn analytic_q_cayley(k: usize) -> Result<BigRational> {
    if k < 1 {
        return Err(Error::InvalidParameter(
            "Cayley tree order must be at least 1".into(),
        ));
    }
    let two_k = BigInt::from(1) << k;
    let denominator = (BigInt::from(1) << (k + 2)) - BigInt::from(3);
    Ok(BigRational::from_integer(BigInt::from(1)) - BigRational::new(two_k, denominator))
}

pub fn analytic_q_cayley_f64(k: usize) -> Result<f64> {
    analytic_q_cayley(k)?
        .to_f64()
        .ok_or_else(|| Error::InvalidParameter(format!("order {k} does not fit a float")))
}

/// Trapped probability `|<tau1, x>|^2 + |<tau2, x>|^2` of a source state;
/// the averaged state gives the mean over the three source arcs.
pub fn trapping_probability(pair: &SupplementaryPair, x: &InitialSpec) -> f64 {
    let overlap = |tau: &[f64; 3], c: &[Complex64; 3]| -> f64 {
        tau.iter()
            .zip(c)
            .map(|(&t, &z)| z * t)
            .sum::<Complex64>()
            .norm_sqr()
    };
    match x {
        InitialSpec::Pure(c) => overlap(&pair.tau1, c) + overlap(&pair.tau2, c),
        InitialSpec::Averaged => {
            let sq = |t: &[f64; 3]| t.iter().map(|v| v * v).sum::<f64>();
            (sq(&pair.tau1) + sq(&pair.tau2)) / 3.0
        }
    }
}

/// Trapped subspace avoiding the sink for the given walk.
pub fn trapped_basis(g: &StateGraph, walk: WalkKind, tol: f64) -> Result<TrappedBasis> {
    let ops = StepOperators::new(g)?;
    match walk {
        WalkKind::Cqw => sr_trapped_cqw(g, &ops, tol),
        WalkKind::Pcqw => sr_trapped_pcqw(g, &ops, tol),
    }
}

/// Projector efficiency from a freshly computed trapped subspace.
pub fn projector_efficiency(
    g: &StateGraph,
    walk: WalkKind,
    initial: &InitialSpec,
    tol: f64,
) -> Result<EfficiencyReport> {
    efficiency_projector(&trapped_basis(g, walk, tol)?, g, initial)
}

/// Efficiency estimated by evolving the walk until the absorbed probability
/// settles. The percolation spec is ignored for the coined walk.
pub fn dynamic_efficiency(
    g: &StateGraph,
    walk: WalkKind,
    perc: &PercolationSpec,
    initial: &InitialSpec,
    rule: &Convergence,
) -> Result<EfficiencyReport> {
    let ops = StepOperators::new(g)?;
    let run = match walk {
        WalkKind::Cqw => {
            let mixture: Vec<(f64, CVec)> = match initial {
                InitialSpec::Pure(c) => vec![(1.0, g.embed_source(c)?)],
                InitialSpec::Averaged => {
                    let arcs = g.source_arcs();
                    arcs.iter()
                        .map(|&a| (1.0 / arcs.len() as f64, CVec::unit(g.dimension(), a)))
                        .collect()
                }
            };
            run_pure_cqw_to_convergence(&ops, &mixture, rule)?
        }
        WalkKind::Pcqw => {
            run_to_convergence(&ops, Some(perc), &DensityOp::initial(g, initial)?, rule)?
        }
    };
    Ok(EfficiencyReport {
        q: run.q,
        method: Method::Dynamic,
        steps: Some(run.steps),
        converged: run.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cayley_tree, build_ladder, build_reduced_cayley, NamedInitial};
    use crate::numerics::DEFAULT_TOL;
    use crate::trapped::supplementary_pair;

    const TOL: f64 = DEFAULT_TOL;

    fn psi(n: NamedInitial) -> InitialSpec {
        n.spec()
    }

    #[test]
    fn analytic_values() {
        assert_eq!(
            analytic_q_cayley(1).unwrap(),
            BigRational::new(3.into(), 5.into())
        );
        assert_eq!(
            analytic_q_cayley(2).unwrap(),
            BigRational::new(9.into(), 13.into())
        );
        assert!(analytic_q_cayley(0).is_err());
        for k in 1..40 {
            assert!(analytic_q_cayley(k + 1).unwrap() > analytic_q_cayley(k).unwrap());
        }
        let far = analytic_q_cayley_f64(200).unwrap();
        assert!((far - 0.75).abs() < 1e-15);
    }

    #[test]
    fn cayley_2_psi1_efficiencies() {
        let g = build_cayley_tree(2, 2).unwrap();
        let p = projector_efficiency(&g, WalkKind::Pcqw, &psi(NamedInitial::Psi1), TOL).unwrap();
        assert!((p.q - 9.0 / 13.0).abs() < 1e-12);
        let c = projector_efficiency(&g, WalkKind::Cqw, &psi(NamedInitial::Psi1), TOL).unwrap();
        assert!(c.q < 1e-12);
    }

    #[test]
    fn orthogonal_initial_state_is_fully_transported() {
        for k in 1..=3 {
            let g = build_cayley_tree(k, 2).unwrap();
            let q =
                projector_efficiency(&g, WalkKind::Pcqw, &psi(NamedInitial::Uniform), TOL).unwrap();
            assert!((q.q - 1.0).abs() < 1e-12);
        }
        let g = build_ladder(2).unwrap();
        let basis = trapped_basis(&g, WalkKind::Pcqw, TOL).unwrap();
        let q = efficiency_projector(&basis, &g, &psi(NamedInitial::Uniform)).unwrap();
        assert!((q.q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn average_is_mean_over_source_arcs() {
        let g = build_ladder(3).unwrap();
        for walk in [WalkKind::Cqw, WalkKind::Pcqw] {
            let basis = trapped_basis(&g, walk, TOL).unwrap();
            let avg = average_efficiency(&basis, &g).unwrap().q;
            let mean: f64 = (0..3)
                .map(|i| {
                    let mut c = [0.0; 3];
                    c[i] = 1.0;
                    efficiency_projector(&basis, &g, &InitialSpec::real(c).unwrap())
                        .unwrap()
                        .q
                })
                .sum::<f64>()
                / 3.0;
            assert!((avg - mean).abs() < 1e-14);
        }
    }

    #[test]
    fn ladder_values() {
        let expected_pcqw = [0.466666666667, 0.5625, 0.606557377049];
        for (l, want) in (1..=3).zip(expected_pcqw) {
            let g = build_ladder(l).unwrap();
            let q =
                projector_efficiency(&g, WalkKind::Pcqw, &psi(NamedInitial::Psi0), TOL).unwrap();
            assert!((q.q - want).abs() < 1e-9, "L={l}: {}", q.q);
        }
    }

    #[test]
    fn averaged_ladder_pcqw_efficiency_increases() {
        let mut last = 0.0;
        for l in 1..=8 {
            let g = build_ladder(l).unwrap();
            let q = projector_efficiency(&g, WalkKind::Pcqw, &InitialSpec::Averaged, TOL)
                .unwrap()
                .q;
            assert!(q > last, "L={l}");
            last = q;
        }
    }

    #[test]
    fn trapping_probability_matches_projector() {
        for k in 1..=4 {
            let g = build_cayley_tree(k, 2).unwrap();
            let pair = supplementary_pair(&g, TOL).unwrap();
            let basis = trapped_basis(&g, WalkKind::Pcqw, TOL).unwrap();
            for n in NamedInitial::ALL {
                let from_pair = trapping_probability(&pair, &n.spec());
                let from_basis = efficiency_projector(&basis, &g, &n.spec())
                    .unwrap()
                    .trapping_probability();
                assert!((from_pair - from_basis).abs() < 1e-10, "k={k} {n}");
            }
            let p1 = trapping_probability(&pair, &psi(NamedInitial::Psi1));
            let exact = (1u64 << k) as f64 / ((1u64 << (k + 2)) as f64 - 3.0);
            assert!((p1 - exact).abs() < 1e-12);
            assert!(trapping_probability(&pair, &psi(NamedInitial::Uniform)) < 1e-24);
            if k >= 2 {
                let p2 = trapping_probability(&pair, &psi(NamedInitial::Psi2));
                let tau2: f64 = pair.tau2.iter().map(|t| t * t).sum();
                assert!((p2 - tau2).abs() < 1e-12);
                assert!(p2 < p1);
            }
        }
    }

    #[test]
    fn branch_cutting_for_the_coined_walk() {
        for k in 1..=3 {
            let p1 = psi(NamedInitial::Psi1);
            let full =
                projector_efficiency(&build_cayley_tree(k, 2).unwrap(), WalkKind::Cqw, &p1, TOL)
                    .unwrap();
            let one = projector_efficiency(
                &build_reduced_cayley(k, 1).unwrap(),
                WalkKind::Cqw,
                &p1,
                TOL,
            )
            .unwrap();
            let two = projector_efficiency(
                &build_reduced_cayley(k, 2).unwrap(),
                WalkKind::Cqw,
                &p1,
                TOL,
            )
            .unwrap();
            assert!(full.q < 1e-12);
            assert!(one.q > 0.1);
            assert!(two.q < 1e-12);
        }
    }

    #[test]
    fn dynamic_matches_projector_on_small_graphs() {
        let rule = Convergence::default();
        let perc = PercolationSpec::default();
        for g in [build_ladder(2).unwrap(), build_cayley_tree(2, 2).unwrap()] {
            for walk in [WalkKind::Cqw, WalkKind::Pcqw] {
                for n in [
                    NamedInitial::Psi0,
                    NamedInitial::Psi1,
                    NamedInitial::Averaged,
                ] {
                    let proj = projector_efficiency(&g, walk, &n.spec(), TOL).unwrap();
                    let dynm = dynamic_efficiency(&g, walk, &perc, &n.spec(), &rule).unwrap();
                    assert!(dynm.converged);
                    assert!(
                        (proj.q - dynm.q).abs() < 1e-6,
                        "{walk} {n}: {} vs {}",
                        proj.q,
                        dynm.q
                    );
                }
            }
        }
    }

    #[test]
    fn mismatched_basis_is_rejected() {
        let basis = trapped_basis(&build_ladder(1).unwrap(), WalkKind::Pcqw, TOL).unwrap();
        let g = build_ladder(2).unwrap();
        assert!(efficiency_projector(&basis, &g, &psi(NamedInitial::Psi0)).is_err());
        assert!(average_efficiency(&basis, &g).is_err());
    }
}
