use fractal_khintchine::dioph::{
    block_count, count_all, count_grid, count_one_sided, dani_cross_check, ApproxFunction,
    BlockSchedule,
};
use fractal_khintchine::homspace::{
    enumerate_in_box, lll_reduce, make_k, shortest_vector, AxisBox, GroupElement, LatticeBasis,
};
use fractal_khintchine::ifs::{
    affine_nonconcentration, sample_sigma_n, AffineSubspace, IfsModel, Similarity,
};
use fractal_khintchine::liegeom::{
    adjoint_action, enumerate_staircases, numerical_rank, obstruction_check, wedge_norm, LieVector,
    Subspace,
};
use fractal_khintchine::seed::rng_from_seed;
use fractal_khintchine::walk::{cocycle_identity_check, WalkState};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn rotation(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = m.qr().q();
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

fn random_subspace(d: usize, k: usize, seed: u64) -> Subspace {
    let mut rng = rng_from_seed(seed);
    let n = d + 1;
    let mats: Vec<DMatrix<f64>> = (0..k)
        .map(|_| {
            let mut m = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let tr = m.trace() / n as f64;
            for i in 0..n {
                m[(i, i)] -= tr;
            }
            m
        })
        .collect();
    Subspace::span(d, &mats).unwrap()
}

/// Naive enumeration over a cube of integer coefficients.
fn naive_box(basis: &LatticeBasis, bx: &AxisBox, bound: i64) -> Vec<Vec<i64>> {
    let n = basis.dim();
    let mut out = Vec::new();
    let mut c = vec![-bound; n];
    loop {
        if bx.contains_dd(&basis.point_dd(&c)) {
            out.push(c.clone());
        }
        let mut i = 0;
        while i < n {
            c[i] += 1;
            if c[i] <= bound {
                break;
            }
            c[i] = -bound;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_are_monotone_and_nested(s in prop::collection::vec(0.0f64..1.0, 1..=2), a in 0.3f64..1.5, c in 0.05f64..1.0) {
        let psi = ApproxFunction::power(c, a).unwrap();
        let grid = [10, 50, 200, 1000];
        let counts = count_grid(&s, &psi, &grid).unwrap();
        for w in counts.windows(2) {
            prop_assert!(w[0].two_sided <= w[1].two_sided);
            prop_assert!(w[0].one_sided <= w[1].one_sided);
            prop_assert!(w[0].primitive <= w[1].primitive);
        }
        for c in &counts {
            prop_assert!(c.primitive <= c.one_sided);
        }
        prop_assert_eq!(count_all(&s, &psi, 1000).unwrap(), counts[3]);
    }

    #[test]
    fn blocks_sum_below_total(s in 0.0f64..1.0, n in 1u32..12) {
        let psi = ApproxFunction::power(1.0, 0.5).unwrap();
        let blocks: u64 = (1..=n).map(|k| block_count(&[s], &psi, 2.0, k).unwrap()).sum();
        prop_assert!(blocks <= count_one_sided(&[s], &psi, 1 << n).unwrap());
    }

    #[test]
    fn dani_identity(s in prop::collection::vec(0.0f64..1.0, 1..=2), k in 1u32..14, tau in 1.2f64..3.0) {
        let psi = ApproxFunction::power(1.0, 0.5).unwrap();
        let c = dani_cross_check(&s, &psi, tau, k).unwrap();
        prop_assert!(c.equal, "{:?}", c);
    }

    #[test]
    fn schedule_identities(a in 0.0f64..1.0, tau in 1.01f64..2.0, d in 1usize..=3) {
        let psi = ApproxFunction::power(0.7, a).unwrap();
        let sch = BlockSchedule::new(&psi, d, tau, 40, 0.01).unwrap();
        for e in sch.entries.iter().filter(|e| e.t_k <= 1e12) {
            let tk = tau.powi(e.k as i32);
            let lhs = e.psi_k.powi(d as i32) * tk;
            prop_assert!((lhs - e.r_k.powi(d as i32 + 1)).abs() <= 1e-12 * lhs);
            prop_assert!((e.t_k * e.psi_k - tk).abs() <= 1e-12 * tk);
        }
    }

    #[test]
    fn enumeration_matches_naive(seed in any::<u64>(), d in 1usize..=2) {
        let mut rng = rng_from_seed(seed);
        let n = d + 1;
        let m = loop {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
            let det: f64 = m.determinant();
            if det.abs() > 0.2 {
                break m / det.abs().powf(1.0 / n as f64);
            }
        };
        let basis = LatticeBasis::from_columns(m.clone()).unwrap();
        let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(1.0..10.0)).collect();
        let bx = AxisBox::closed(lower, upper).unwrap();
        // coefficients of points in the box are bounded by |M^{-1}|_∞ · max |x|
        let inv = m.try_inverse().unwrap();
        let reach = bx.lower.iter().chain(&bx.upper).fold(0.0f64, |a, x| a.max(x.abs()));
        let bound = (inv.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) * reach).ceil() as i64 + 1;
        prop_assume!(bound <= if d == 1 { 400 } else { 40 });
        let fast: Vec<Vec<i64>> = enumerate_in_box(&basis, &bx).unwrap().into_iter().map(|p| p.coeffs).collect();
        prop_assert_eq!(fast, naive_box(&basis, &bx, bound));
    }

    #[test]
    fn shortest_vector_invariance(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = rng_from_seed(seed);
        let g = GroupElement::random(d, &mut rng);
        let basis = LatticeBasis::from_group(&g);
        let l0 = shortest_vector(&basis).unwrap().1;
        let n = d + 1;
        let mut u = DMatrix::<f64>::identity(n, n);
        for _ in 0..6 {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            let mut e = DMatrix::<f64>::identity(n, n);
            e[(i, j)] = rng.random_range(-3i32..=3) as f64;
            u *= e;
        }
        let rebased = LatticeBasis::from_columns(g.matrix() * u).unwrap();
        let l1 = shortest_vector(&rebased).unwrap().1;
        let rot = rotation(n, seed ^ 1);
        let rotated = LatticeBasis::from_columns(&rot * g.matrix()).unwrap();
        let l2 = shortest_vector(&rotated).unwrap().1;
        prop_assert!((l0 - l1).abs() <= 1e-10 * l0.max(1.0));
        prop_assert!((l0 - l2).abs() <= 1e-10 * l0.max(1.0));
    }

    #[test]
    fn cocycle_random(seed in any::<u64>(), d in 1usize..=3, t in 0.1f64..10.0, ratio in 0.05f64..0.95) {
        let mut rng = rng_from_seed(seed);
        let b = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let s: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = Similarity::new(ratio, rotation(d, seed), b).unwrap();
        prop_assert!(cocycle_identity_check(&phi, t, &s, 1e-10).unwrap());
    }

    #[test]
    fn wedge_symmetric_and_rotation_invariant(seed in any::<u64>(), d in 1usize..=3) {
        let dims = [d, d, 1];
        let spaces: Vec<Subspace> = dims.iter().enumerate().map(|(i, &k)| random_subspace(d, k, seed.wrapping_add(i as u64))).collect();
        let w = wedge_norm(&[&spaces[0], &spaces[1], &spaces[2]]).unwrap();
        let w_perm = wedge_norm(&[&spaces[2], &spaces[0], &spaces[1]]).unwrap();
        prop_assert!((w - w_perm).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&w));
        let k = GroupElement::new(make_k(&rotation(d, seed ^ 7)).matrix().clone()).unwrap();
        let k = GroupElement::new(rotation(d + 1, seed ^ 9) * k.matrix()).unwrap();
        let moved: Vec<Subspace> = spaces.iter().map(|s| s.adjoint(&k)).collect();
        let w_rot = wedge_norm(&[&moved[0], &moved[1], &moved[2]]).unwrap();
        prop_assert!((w - w_rot).abs() < 1e-10);
    }

    #[test]
    fn wedge_zero_iff_rank_deficient(seed in any::<u64>(), d in 2usize..=3, degenerate in any::<bool>()) {
        let a = random_subspace(d, d, seed);
        let b = if degenerate {
            let extra = random_subspace(d, 1, seed ^ 3);
            Subspace::span(d, &[a.matrices()[0].clone() * 2.0 - extra.matrices()[0].clone(), extra.matrices()[0].clone()]).unwrap()
        } else {
            random_subspace(d, 2, seed ^ 5)
        };
        let c = random_subspace(d, 1, seed ^ 11);
        let w = wedge_norm(&[&a, &b, &c]).unwrap();
        let cols: Vec<DVector<f64>> = [&a, &b, &c].iter().flat_map(|s| s.basis().column_iter().map(|c| c.into_owned())).collect();
        let rank = numerical_rank(&DMatrix::from_columns(&cols));
        let full = rank == a.dim() + b.dim() + c.dim();
        prop_assert_eq!(w > 1e-8, full, "wedge {} rank {}", w, rank);
    }

    #[test]
    fn adjoint_is_a_homomorphism(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = rng_from_seed(seed);
        let g1 = GroupElement::random(d, &mut rng);
        let g2 = GroupElement::random(d, &mut rng);
        let v = LieVector::from_matrix(&random_subspace(d, 1, seed).matrices()[0]).unwrap();
        let lhs = adjoint_action(&g1.mul(&g2), &v);
        let rhs = adjoint_action(&g1, &adjoint_action(&g2, &v));
        let scale = lhs.norm().max(1.0);
        prop_assert!((lhs.coords() - rhs.coords()).amax() <= 1e-10 * scale);
        prop_assert!(lhs.to_matrix().trace().abs() <= 1e-9 * scale);
    }

    #[test]
    fn obstruction_persists(seed in any::<u64>(), d in 2usize..=3) {
        let g = GroupElement::random(d, &mut rng_from_seed(seed));
        prop_assert!(obstruction_check(&g).unwrap() >= d - 1);
    }

    #[test]
    fn sampling_reproducible(seed in any::<u64>(), n in 0usize..40) {
        let m = IfsModel::preset("sierpinski-triangle").unwrap();
        prop_assert_eq!(sample_sigma_n(&m, n, seed), sample_sigma_n(&m, n, seed));
    }
}

#[test]
fn staircases_are_closed() {
    for d in 1..=4 {
        let all = enumerate_staircases(d).unwrap();
        for s in &all {
            for &(i, j) in &s.pairs {
                if i > 1 {
                    assert!(s.pairs.contains(&(i - 1, j)));
                }
                if j < d + 1 {
                    assert!(s.pairs.contains(&(i, j + 1)));
                }
            }
        }
        // every staircase of size d contains the top-right corner
        assert!(all
            .iter()
            .filter(|s| !s.is_empty())
            .all(|s| s.pairs.contains(&(1, d + 1))));
    }
}

#[test]
fn nonconcentration_monotone_in_eps() {
    let m = IfsModel::preset("sierpinski-carpet").unwrap();
    let line = AffineSubspace::new(
        DVector::from_vec(vec![0.5, 0.0]),
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
    )
    .unwrap();
    let eps = [1e-3, 1e-2, 3e-2, 1e-1, 0.3];
    let prof = affine_nonconcentration(&m, &line, &eps, 20, 5000, 4).unwrap();
    assert!(prof.windows(2).all(|w| w[0].1 <= w[1].1));
}

#[test]
fn walk_keeps_unit_determinant() {
    let m = IfsModel::preset("sierpinski-triangle").unwrap();
    let mut st = WalkState::standard(2);
    let mut rng = rng_from_seed(77);
    for _ in 0..10_000 {
        st.step(&m, &mut rng).unwrap();
        assert!((st.basis.det().abs() - 1.0).abs() <= 1e-9);
    }
    assert!(lll_reduce(&st.basis).unwrap().is_reduced());
}
