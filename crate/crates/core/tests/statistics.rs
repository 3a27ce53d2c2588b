use fractal_khintchine::dioph::{schmidt_ratio_experiment, ApproxFunction};
use fractal_khintchine::homspace::{
    c_m, haar_sample_sl2, restricted_siegel_transform, shortest_vector, AxisBox, LatticeBasis,
};
use fractal_khintchine::ifs::{stabilization_profile, IfsModel, PointMeasure, Similarity};
use fractal_khintchine::liegeom::{
    find_transversal_witness, mnc_statistic, v1_of, weight_spaces, WitnessMode,
};
use fractal_khintchine::seed::par_items;
use fractal_khintchine::stats::{loglog_slope, median, Estimate};
use fractal_khintchine::walk::{
    ball_mass_distances, double_correlation, expanding_translate_statistic, haar_reference_sample,
    TestFunction,
};

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn cantor_cdf(mut x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let (mut acc, mut scale) = (0.0, 0.5);
    for _ in 0..40 {
        x *= 3.0;
        let digit = x.floor();
        x -= digit;
        if digit == 1.0 {
            return acc + scale;
        }
        if digit == 2.0 {
            acc += scale;
        }
        scale /= 2.0;
    }
    acc
}

/// `∫ #{primitive (p,q) : a(t)u(s)(-p,q) ∈ [0,L]^2} dF(s)` for a CDF `F` on [0,1].
fn exact_translate_mean(t: f64, side: f64, cdf: impl Fn(f64) -> f64) -> f64 {
    let w = side / t.sqrt();
    let qmax = (side * t.sqrt()).floor() as u64;
    (1..=qmax)
        .flat_map(|q| (0..=q).map(move |p| (p, q)))
        .filter(|&(p, q)| gcd(p, q) == 1)
        .map(|(p, q)| cdf((p as f64 + w) / q as f64) - cdf(p as f64 / q as f64))
        .sum()
}

fn siegel_box(side: f64) -> TestFunction {
    TestFunction::siegel(AxisBox::cube(2, 0.0, side).unwrap(), Some(1))
}

#[test]
fn haar_restricted_siegel_means() {
    let c1 = c_m(1).unwrap();
    for (lo, hi) in [
        ([0.0, 0.0], [1.0, 1.0]),
        ([0.0, 0.0], [1.5, 1.5]),
        ([-1.0, 0.5], [1.0, 3.5]),
    ] {
        let bx = AxisBox::closed(lo.to_vec(), hi.to_vec()).unwrap();
        let v: Vec<f64> = par_items(31, 40_000, |_, s| {
            restricted_siegel_transform(
                &LatticeBasis::from_group(&haar_sample_sl2(s)),
                &bx,
                Some(1),
            )
            .unwrap() as f64
        });
        let e = Estimate::from_values(&v);
        assert!(e.within(c1 * bx.volume(), 3.0, 0.0), "{bx:?}: {e:?}");
    }
}

#[test]
fn haar_cusp_slope_is_positive() {
    let l: Vec<f64> = par_items(8, 50_000, |_, s| {
        shortest_vector(&LatticeBasis::from_group(&haar_sample_sl2(s)))
            .unwrap()
            .1
    });
    let pts: Vec<(f64, f64)> = [0.5, 0.2, 0.1, 0.05, 0.02]
        .iter()
        .map(|&r| {
            (
                r,
                l.iter().filter(|&&x| x <= r).count() as f64 / l.len() as f64,
            )
        })
        .collect();
    // m_X{λ_1 <= ρ} = (3/π) ρ^2 for ρ < 1
    let slope = loglog_slope(&pts).unwrap();
    assert!((slope - 2.0).abs() < 0.2, "{slope}");
}

#[test]
fn lebesgue_schmidt_baseline() {
    let psi: ApproxFunction = "power:a=0.5".parse().unwrap();
    let rows = schmidt_ratio_experiment(&PointMeasure::Lebesgue { d: 1 }, &psi, &[100_000], 40, 3)
        .unwrap();
    let r1: Vec<f64> = rows.iter().map(|r| r.ratio1).collect();
    assert!((0.9..=1.1).contains(&median(&r1)), "{}", median(&r1));
}

#[test]
fn two_sided_is_twice_one_sided_on_cantor() {
    let psi: ApproxFunction = "power:a=0.5".parse().unwrap();
    let m = PointMeasure::self_similar(IfsModel::preset("cantor3").unwrap());
    let rows = schmidt_ratio_experiment(&m, &psi, &[100_000], 40, 4).unwrap();
    let two: f64 = rows.iter().map(|r| r.count2 as f64).sum();
    let one: f64 = rows.iter().map(|r| r.count1 as f64).sum();
    assert!((two / one / 2.0 - 1.0).abs() < 0.1, "{}", two / one);
    for r in &rows {
        assert!(r.count_p <= r.count1);
    }
}

#[test]
fn cantor_translates_match_exact_average() {
    let f = siegel_box(1.5);
    let m = PointMeasure::self_similar(IfsModel::preset("cantor3").unwrap());
    for t in [1e3, 1e4] {
        let e = expanding_translate_statistic(&m, t, &f, 40_000, 12).unwrap();
        let exact = exact_translate_mean(t, 1.5, cantor_cdf);
        assert!(e.within(exact, 4.0, 0.0), "t={t}: {e:?} vs {exact}");
    }
}

#[test]
fn lebesgue_translates_match_exact_average_and_haar() {
    let f = siegel_box(1.5);
    let m = PointMeasure::Lebesgue { d: 1 };
    let uniform = |x: f64| x.clamp(0.0, 1.0);
    let e3 = expanding_translate_statistic(&m, 1e3, &f, 40_000, 13).unwrap();
    assert!(
        e3.within(exact_translate_mean(1e3, 1.5, uniform), 4.0, 0.0),
        "{e3:?}"
    );
    let e6 = expanding_translate_statistic(&m, 1e6, &f, 40_000, 14).unwrap();
    let haar = f.haar_mean(1).unwrap();
    assert!(e6.within(haar, 3.0, 0.0), "{e6:?} vs {haar}");
    assert!((e3.mean - e6.mean).abs() <= 3.0 * (e3.se + e6.se) + 0.05);
}

#[test]
fn decorrelation_at_separated_times() {
    let f = siegel_box(1.0);
    let m = PointMeasure::self_similar(IfsModel::preset("cantor3").unwrap());
    let same = double_correlation(&m, 1e3, 1e3, &f, &f, 20_000, 21).unwrap();
    let apart = double_correlation(&m, 1e3, 1e6, &f, &f, 20_000, 21).unwrap();
    assert!(apart.deviation < same.deviation, "{apart:?} vs {same:?}");
    let again = double_correlation(&m, 1e3, 1e6, &f, &f, 20_000, 22).unwrap();
    assert!(
        (again.product.mean - apart.product.mean).abs()
            <= 3.0 * (again.product.se + apart.product.se)
    );
}

#[test]
fn sigma_n_stabilizes() {
    let rows = stabilization_profile(
        &IfsModel::preset("bernoulli-lambda").unwrap(),
        &[5, 10, 20, 40],
        20_000,
        5,
    );
    for w in rows.windows(2) {
        assert!(
            w[1].gap.mean <= w[0].gap.mean + 3.0 * (w[0].gap.se + w[1].gap.se),
            "{rows:?}"
        );
    }
    assert!(rows[3].gap.mean < rows[0].gap.mean);
}

#[test]
fn ball_masses_shrink_with_radius() {
    let model = IfsModel::preset("cantor3").unwrap();
    let x0 = LatticeBasis::standard(1);
    let target = haar_reference_sample(&model, 1).unwrap().0;
    let fractions = |seed| {
        let d = &ball_mass_distances(&model, &x0, 25, &[target.clone(), x0.clone()], 20_000, seed)
            .unwrap();
        [0.4, 0.2, 0.1, 0.05]
            .map(|r| d[0].iter().filter(|&&x| x <= r).count() as f64 / d[0].len() as f64)
    };
    let a = fractions(1);
    let b = fractions(2);
    assert!(a.windows(2).all(|w| w[1] <= w[0]), "{a:?}");
    assert!(a[0] > a[3] && b[0] > b[3], "{a:?} {b:?}");
}

#[test]
fn mnc_degenerate_and_monotone() {
    let phi = Similarity::homothety(1.0 / 3.0, &[0.25]).unwrap();
    let single = IfsModel::new(1, vec![(1.0, phi.clone())], "single").unwrap();
    let w = v1_of(&phi.compose(&phi)).unwrap();
    let prof = mnc_statistic(&single, 2, &w, &[1e-6, 1e-3, 1.0], 50, 1).unwrap();
    assert!(prof.iter().all(|(_, e)| e.mean == 1.0));
    let cantor = IfsModel::preset("cantor3").unwrap();
    let top = weight_spaces(1).unwrap().plus;
    let prof = mnc_statistic(&cantor, 15, &top, &[1e-3, 1e-2, 1e-1, 1.0], 2000, 2).unwrap();
    assert!(prof.windows(2).all(|w| w[0].1.mean <= w[1].1.mean));
    assert!(find_transversal_witness(&w.sum(&top), WitnessMode::General, 1, 5).is_err());
}
