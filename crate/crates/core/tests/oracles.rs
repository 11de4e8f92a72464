//! Cross-checks against an independent dense linear algebra backend.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qwalk_core::dynamics::{cqw_step, pcqw_step, DensityOp, PercolationSpec, StepOperators};
use qwalk_core::graph::{
    build_cayley_tree, build_ladder, build_reduced_cayley, NamedInitial, StateGraph,
};
use qwalk_core::numerics::{orthonormalize, CMat, CVec, Subspace, DEFAULT_TOL};
use qwalk_core::trapped::{cayley_path_states, ladder_basis_for, sr_trapped_cqw, sr_trapped_pcqw};

type M = DMatrix<Complex64>;

fn to_na(m: &CMat) -> M {
    M::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn basis_matrix(s: &Subspace) -> M {
    let n = s.ambient();
    M::from_fn(n, s.dim(), |i, j| s.basis()[j][i])
}

/// Cosines of the principal angles between two orthonormal bases.
fn principal_cosines(a: &Subspace, b: &Subspace) -> Vec<f64> {
    let overlap = basis_matrix(a).adjoint() * basis_matrix(b);
    overlap.singular_values().iter().copied().collect()
}

fn assert_same_subspace(a: &Subspace, b: &Subspace, what: &str) {
    assert_eq!(a.dim(), b.dim(), "{what}: dimensions");
    for c in principal_cosines(a, b) {
        assert!((c - 1.0).abs() < 1e-9, "{what}: cosine {c}");
    }
}

/// Null space of a Hermitian positive semidefinite Gram matrix.
fn gram_kernel(gram: &M) -> M {
    let eig = gram.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
    let keep: Vec<usize> = (0..gram.nrows())
        .filter(|&i| eig.eigenvalues[i] < 1e-9 * scale)
        .collect();
    M::from_fn(gram.nrows(), keep.len(), |i, j| {
        eig.eigenvectors[(i, keep[j])]
    })
}

fn kernel_subspace(gram: &M) -> Subspace {
    let k = gram_kernel(gram);
    let vectors: Vec<_> = (0..k.ncols())
        .map(|j| CVec::new(k.column(j).iter().copied().collect()))
        .collect();
    orthonormalize(&vectors, DEFAULT_TOL).unwrap()
}

fn sink_rows(g: &StateGraph) -> M {
    let sink = g.sink_arcs();
    M::from_fn(sink.len(), g.dimension(), |i, j| {
        if sink[i] == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn random_density(d: usize, rng: &mut ChaCha8Rng) -> DensityOp {
    let a = CMat::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let m = a.matmul(&a.adjoint()).unwrap();
    let t = m.trace().re;
    DensityOp::new(m.scale(Complex64::new(1.0 / t, 0.0)), 1e-12).unwrap()
}

fn min_eigenvalue(rho: &DensityOp) -> f64 {
    to_na(rho.matrix())
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn evolution_keeps_states_positive_and_trace_decreasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let graphs = [
        build_ladder(2).unwrap(),
        build_cayley_tree(2, 2).unwrap(),
        build_reduced_cayley(2, 1).unwrap(),
    ];
    for g in &graphs {
        let ops = StepOperators::new(g).unwrap();
        let perc = PercolationSpec::new(0.4).unwrap();
        let starts = [
            random_density(g.dimension(), &mut rng),
            DensityOp::initial(g, &NamedInitial::Averaged.spec()).unwrap(),
        ];
        for start in starts {
            let mut a = start.clone();
            let mut b = start;
            for _ in 0..25 {
                let (ta, tb) = (a.trace(), b.trace());
                a = pcqw_step(&ops, &perc, &a).unwrap();
                b = cqw_step(&ops, &b).unwrap();
                assert!(a.trace() <= ta + 1e-12 && b.trace() <= tb + 1e-12);
                assert!(
                    min_eigenvalue(&a) > -1e-12,
                    "pcqw eigenvalue {}",
                    min_eigenvalue(&a)
                );
                assert!(
                    min_eigenvalue(&b) > -1e-12,
                    "cqw eigenvalue {}",
                    min_eigenvalue(&b)
                );
            }
        }
    }
}

#[test]
fn percolated_trapped_space_equals_intersection_over_all_configurations() {
    let graphs = [
        build_ladder(1).unwrap(),
        build_ladder(2).unwrap(),
        build_ladder(3).unwrap(),
        build_cayley_tree(1, 2).unwrap(),
        build_reduced_cayley(2, 1).unwrap(),
        build_reduced_cayley(2, 2).unwrap(),
    ];
    for g in &graphs {
        let ops = StepOperators::new(g).unwrap();
        let links = ops.links().len();
        assert!(links <= 10);
        let c = to_na(ops.c());
        let id = M::identity(g.dimension(), g.dimension());
        let s = sink_rows(g);
        let mut gram = s.adjoint() * &s;
        for mask in 0u32..(1 << links) {
            let open: Vec<bool> = (0..links).map(|i| mask >> i & 1 == 1).collect();
            let a = &c * to_na(&ops.percolated_shift(&open).unwrap()) + &id;
            gram += a.adjoint() * a;
        }
        let oracle = kernel_subspace(&gram);
        let fast = sr_trapped_pcqw(g, &ops, DEFAULT_TOL).unwrap();
        assert_same_subspace(&oracle, fast.subspace(), &format!("{:?}", g.family()));
    }
}

#[test]
fn coined_trapped_space_is_the_unobservable_subspace() {
    for k in 1..=3 {
        let g = build_cayley_tree(k, 2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let u = to_na(ops.c()) * to_na(ops.r());
        let s = sink_rows(&g);
        let mut gram = M::zeros(g.dimension(), g.dimension());
        let mut power = M::identity(g.dimension(), g.dimension());
        for _ in 0..g.dimension() {
            let rows = &s * &power;
            gram += rows.adjoint() * rows;
            power = &u * power;
        }
        let oracle = kernel_subspace(&gram);
        let fast = sr_trapped_cqw(&g, &ops, DEFAULT_TOL).unwrap();
        assert_same_subspace(&oracle, fast.subspace(), &format!("cayley k={k}"));
    }
}

#[test]
fn constructed_bases_span_numeric_spaces() {
    for l in 1..=5 {
        let g = build_ladder(l).unwrap();
        let free = StepOperators::without_sink(&g).unwrap();
        let numeric = sr_trapped_pcqw(&g, &free, DEFAULT_TOL).unwrap();
        let analytic = ladder_basis_for(&g).unwrap();
        assert_same_subspace(
            analytic.subspace(),
            numeric.subspace(),
            &format!("ladder L={l}"),
        );
    }
    for k in 1..=4 {
        let g = build_cayley_tree(k, 2).unwrap();
        let ops = StepOperators::new(&g).unwrap();
        let numeric = sr_trapped_pcqw(&g, &ops, DEFAULT_TOL).unwrap();
        let paths = cayley_path_states(&g).unwrap().sink_filtered(&g).unwrap();
        assert_same_subspace(
            paths.subspace(),
            numeric.subspace(),
            &format!("cayley k={k}"),
        );
    }
}
