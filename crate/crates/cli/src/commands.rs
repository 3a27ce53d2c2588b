use anyhow::{anyhow, bail, Context, Result};
use fractal_khintchine::dioph::{dani_cross_check, schmidt_ratio_experiment, ApproxFunction};
use fractal_khintchine::homspace::{
    c_m, haar_sample_sl2, make_a, restricted_siegel_transform, AxisBox, GroupElement, LatticeBasis,
};
use fractal_khintchine::ifs::{
    affine_nonconcentration, sample_sigma_n, AffineSubspace, IfsModel, PointMeasure,
};
use fractal_khintchine::liegeom::{
    d2_constructed_witness, enumerate_staircases, find_transversal_witness, mnc_statistic,
    obstruction_check, sl2_base_case, StaircaseSet, WitnessMode,
};
use fractal_khintchine::seed::{item_seed, par_items, rng_from_seed};
use fractal_khintchine::stats::{loglog_slope, median, Estimate};
use fractal_khintchine::walk::{
    ball_mass_distances, cusp_decay, double_correlation, expanding_translate_statistic,
    haar_reference_sample, run_ensemble, TestFunction, BURN_IN_STEPS,
};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::report::{Outcome, Table};
use crate::spec::{CommandName, ExperimentSpec, Params};

pub const DEFAULT_SEED: u64 = 0;

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn seed(p: &Params, out: &mut Outcome) -> u64 {
    p.seed.unwrap_or_else(|| {
        out.notes
            .push(format!("no --seed given; using {DEFAULT_SEED}"));
        DEFAULT_SEED
    })
}

fn model(p: &Params) -> Result<IfsModel> {
    if let Some(cfg) = &p.inline_model {
        return Ok(IfsModel::from_config(cfg)?);
    }
    let name = p.model.as_deref().unwrap_or("cantor3");
    if name == "lebesgue" {
        bail!("this command needs an IFS model, not `lebesgue`");
    }
    Ok(IfsModel::preset(name)?)
}

fn measure(p: &Params) -> Result<PointMeasure> {
    if p.model.as_deref() == Some("lebesgue") && p.inline_model.is_none() {
        return Ok(PointMeasure::Lebesgue {
            d: p.d.unwrap_or(1),
        });
    }
    let m = model(p)?;
    Ok(match p.n {
        Some(depth) => PointMeasure::SelfSimilar { model: m, depth },
        None => PointMeasure::self_similar(m),
    })
}

fn psi(p: &Params, default: &str) -> Result<ApproxFunction> {
    Ok(p.psi.as_deref().unwrap_or(default).parse()?)
}

fn count(v: Option<u64>, default: u64) -> Result<usize> {
    let v = v.unwrap_or(default);
    if v == 0 {
        bail!("sample/trial/ensemble counts must be positive");
    }
    Ok(v as usize)
}

fn restriction(p: &Params) -> Option<u64> {
    match p.m.unwrap_or(1) {
        0 => None,
        m => Some(m),
    }
}

fn parse_box(p: &Params, default: &str) -> Result<AxisBox> {
    let text = p.bx.as_deref().unwrap_or(default);
    text.parse::<AxisBox>()
        .map_err(|e| anyhow!("--box `{text}`: {e}"))
}

fn start_lattice(p: &Params, d: usize) -> Result<LatticeBasis> {
    match p.start.as_deref().unwrap_or("standard") {
        "standard" => Ok(LatticeBasis::standard(d)),
        s => {
            let lambda: f64 = s
                .strip_prefix("cusp:")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| {
                    anyhow!("--start must be `standard` or `cusp:<lambda1>`, got `{s}`")
                })?;
            if !(lambda > 0.0 && lambda < 1.0) {
                bail!("cusp start needs 0 < lambda1 < 1");
            }
            // a(t)^{-1} shrinks the first d axes by t^{-1/(d+1)} = λ
            let t = lambda.powi(-(d as i32 + 1));
            Ok(LatticeBasis::from_group(&make_a(t, d)?.inverse()))
        }
    }
}

fn parse_staircase(text: &str, d: usize) -> Result<StaircaseSet> {
    let pairs = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (i, j) = pair
                .split_once('-')
                .ok_or_else(|| anyhow!("staircase pair `{pair}` is not `i-j`"))?;
            Ok((i.trim().parse()?, j.trim().parse()?))
        })
        .collect::<Result<Vec<(usize, usize)>>>()?;
    Ok(StaircaseSet::new(d, pairs)?)
}

/// `sqrt(γ_n)`: the largest possible `λ_1` of a covolume-one lattice in `R^n`.
fn hermite_bound(n: usize) -> f64 {
    let gamma: f64 = match n {
        2 => 2.0 / 3f64.sqrt(),
        3 => 2f64.powf(1.0 / 3.0),
        4 => 2f64.sqrt(),
        5 => 8f64.powf(0.2),
        _ => f64::INFINITY,
    };
    gamma.sqrt()
}

fn slope_of(points: &[(f64, Estimate)]) -> f64 {
    loglog_slope(&points.iter().map(|(x, e)| (*x, e.mean)).collect::<Vec<_>>()).unwrap_or(f64::NAN)
}

pub fn run(spec: &ExperimentSpec) -> Result<Outcome> {
    let p = &spec.params;
    let mut out = Outcome::default();
    match spec.command {
        CommandName::Sample => sample(p, &mut out)?,
        CommandName::Count => count_cmd(p, &mut out)?,
        CommandName::DaniCheck => dani(p, &mut out)?,
        CommandName::Walk => walk(p, &mut out)?,
        CommandName::Recurrence => recurrence(p, &mut out)?,
        CommandName::BallMass => ball_mass(p, &mut out)?,
        CommandName::Equidist => equidist(p, &mut out)?,
        CommandName::DoubleCorr => double_corr(p, &mut out)?,
        CommandName::HaarSiegel => haar_siegel(p, &mut out)?,
        CommandName::Mnc => mnc(p, &mut out)?,
        CommandName::Obstruction => obstruction(p, &mut out)?,
        CommandName::Witness => witness(p, &mut out)?,
        CommandName::Staircases => staircases(p, &mut out)?,
        CommandName::Nonconc => nonconc(p, &mut out)?,
    }
    Ok(out)
}

fn sample(p: &Params, out: &mut Outcome) -> Result<()> {
    let m = model(p)?;
    let depth = p.n.unwrap_or_else(|| m.default_depth());
    let samples = count(p.samples, 1000)?;
    let master = seed(p, out);
    let d = m.dimension();
    let mut header = vec!["sample-id".to_string(), "seed".into(), "depth".into()];
    header.extend((1..=d).map(|i| format!("s{i}")));
    out.table.header = header;
    let mut norms = Vec::with_capacity(samples);
    for i in 0..samples {
        let s = item_seed(master, i as u64);
        let pt = sample_sigma_n(&m, depth, s).point;
        norms.push(pt.norm());
        let mut row = vec![i.to_string(), s.to_string(), depth.to_string()];
        row.extend(pt.iter().map(|x| x.to_string()));
        out.table.push(row);
    }
    out.stat("mean-norm", Estimate::from_values(&norms));
    out.stat("lyapunov-exponent", m.lyapunov_exponent());
    out.check(
        "finite points",
        norms.iter().all(|x| x.is_finite()),
        format!("{samples} points at depth {depth}"),
    );
    Ok(())
}

fn count_cmd(p: &Params, out: &mut Outcome) -> Result<()> {
    let ms = measure(p)?;
    let f = psi(p, "power:a=0.5")?;
    let grid = p.big_n.clone().unwrap_or_else(|| vec![100_000]);
    let samples = count(p.samples, 100)?;
    let rows = schmidt_ratio_experiment(&ms, &f, &grid, samples, seed(p, out))?;
    out.table = Table::new(&[
        "sample-id",
        "seed",
        "N",
        "count2",
        "count1",
        "countP",
        "sum_psi_d",
        "ratio2",
        "ratio1",
        "ratioP",
        "boundary-risk",
    ]);
    for r in &rows {
        out.table.push(vec![
            r.sample_id.to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            r.count2.to_string(),
            r.count1.to_string(),
            r.count_p.to_string(),
            r.sum_psi_d.to_string(),
            r.ratio2.to_string(),
            r.ratio1.to_string(),
            r.ratio_p.to_string(),
            r.boundary_risk.to_string(),
        ]);
    }
    let nmax = *grid.iter().max().expect("nonempty grid");
    let last: Vec<_> = rows.iter().filter(|r| r.n == nmax).collect();
    for (name, sel) in [
        (
            "median-ratio2",
            (|r: &&fractal_khintchine::dioph::CountRecord| r.ratio2) as fn(&&_) -> f64,
        ),
        ("median-ratio1", |r| r.ratio1),
        ("median-ratioP", |r| r.ratio_p),
    ] {
        out.stat(name, median(&last.iter().map(sel).collect::<Vec<_>>()));
    }
    out.stat("sum_psi_d", last.first().map_or(0.0, |r| r.sum_psi_d));
    out.stat(
        "boundary-risk-events",
        rows.iter().map(|r| r.boundary_risk as f64).sum::<f64>(),
    );
    let nested = rows
        .iter()
        .all(|r| r.count_p <= r.count1 && r.count1 <= r.count2);
    out.check(
        "countP <= count1 <= count2",
        nested,
        format!("{} rows", rows.len()),
    );
    let monotone = rows
        .windows(2)
        .all(|w| w[0].sample_id != w[1].sample_id || w[0].count1 <= w[1].count1);
    out.check("counts non-decreasing in N", monotone, "");
    if grid.len() > 1 {
        let first = rows
            .iter()
            .find(|r| r.n == grid[0])
            .map_or(0.0, |r| r.sum_psi_d);
        let growth = last.first().map_or(0.0, |r| r.sum_psi_d) - first;
        out.notes.push(format!(
            "sum psi^d grows by {growth} over the N grid (divergence diagnostic)"
        ));
    }
    Ok(())
}

fn dani(p: &Params, out: &mut Outcome) -> Result<()> {
    let ms = measure(p)?;
    let f = psi(p, "power:a=0.5")?;
    let tau = p.tau.unwrap_or(2.0);
    let kmax = p.kmax.unwrap_or(20);
    let trials = count(p.trials, 200)?;
    let master = seed(p, out);
    let results = par_items(master, trials, |_, s| -> fractal_khintchine::Result<_> {
        let pt = ms.sample(s);
        let k = 1 + (item_seed(s, 0) % kmax as u64) as u32;
        Ok((
            s,
            k,
            pt.clone(),
            dani_cross_check(pt.as_slice(), &f, tau, k)?,
        ))
    });
    out.table = Table::new(&["trial", "seed", "k", "s", "direct", "lattice", "equal"]);
    let mut equal = 0;
    for (i, r) in results.into_iter().enumerate() {
        let (s, k, pt, c) = r?;
        equal += c.equal as usize;
        out.table.push(vec![
            i.to_string(),
            s.to_string(),
            k.to_string(),
            fmt_list(pt.as_slice()),
            c.direct.to_string(),
            c.lattice.to_string(),
            c.equal.to_string(),
        ]);
    }
    out.stat("equal-fraction", equal as f64 / trials as f64);
    out.check(
        "direct count equals lattice count",
        equal == trials,
        format!("{equal}/{trials}"),
    );
    Ok(())
}

fn walk(p: &Params, out: &mut Outcome) -> Result<()> {
    let m = model(p)?;
    let d = m.dimension();
    let n = p.n.unwrap_or(20);
    let ensemble = count(p.ensemble, 1000)?;
    let start = start_lattice(p, d)?;
    let fs: Vec<TestFunction> = match &p.bx {
        Some(_) => vec![TestFunction::siegel(parse_box(p, "")?, restriction(p))],
        None => vec![],
    };
    let stats = run_ensemble(&m, &start, n, &fs, ensemble, seed(p, out))?;
    let mut header = vec!["trajectory-id", "seed", "n", "lambda1", "log-lambda1"];
    if !fs.is_empty() {
        header.push("siegel");
    }
    out.table = Table::new(&header);
    for t in &stats.trajectories {
        let mut row = vec![
            t.id.to_string(),
            t.seed.to_string(),
            t.n.to_string(),
            t.lambda1.to_string(),
            t.log_lambda1.to_string(),
        ];
        row.extend(t.statistics.iter().map(|v| v.to_string()));
        out.table.push(row);
    }
    let l = stats.lambda1();
    out.stat("lambda1", Estimate::from_values(&l));
    out.stat("median-lambda1", median(&l));
    if !fs.is_empty() {
        out.stat("siegel", stats.statistic(0));
        out.stat("siegel-haar-mean", fs[0].haar_mean(d)?);
    }
    let bound = hermite_bound(d + 1);
    out.check(
        "lambda1 below the Hermite bound",
        l.iter().all(|&x| x <= bound * (1.0 + 1e-9)),
        format!("bound {bound}"),
    );
    Ok(())
}

fn recurrence(p: &Params, out: &mut Outcome) -> Result<()> {
    let m = model(p)?;
    let d = m.dimension();
    let n = p.n.unwrap_or(30);
    let rhos = p
        .rho
        .clone()
        .unwrap_or_else(|| vec![1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001]);
    let ensemble = count(p.ensemble, 10_000)?;
    let start = start_lattice(p, d)?;
    let master = seed(p, out);
    let stats = run_ensemble(&m, &start, n, &[], ensemble, master)?;
    let prof = stats.cusp_fractions(&rhos);
    out.table = Table::new(&["rho", "fraction", "se"]);
    for (r, e) in &prof {
        out.table
            .push(vec![r.to_string(), e.mean.to_string(), e.se.to_string()]);
    }
    let mut sorted = prof.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.check(
        "fractions non-decreasing in rho",
        sorted.windows(2).all(|w| w[0].1.mean <= w[1].1.mean),
        "",
    );
    let slope = slope_of(&prof);
    out.stat("loglog-slope", slope);
    if let Some(cps) = &p.checkpoints {
        let rho = *rhos
            .iter()
            .min_by(|a, b| a.total_cmp(b))
            .expect("nonempty rho list");
        let decay = cusp_decay(&m, &start, cps, rho, ensemble, master)?;
        let trend = decay
            .windows(2)
            .all(|w| w[1].1.mean <= w[0].1.mean + 3.0 * (w[0].1.se + w[1].1.se));
        out.check(
            "cusp fraction non-increasing along checkpoints (3 SE)",
            trend,
            format!("rho {rho}"),
        );
        out.details = Some(
            json!({ "cusp-decay": decay.iter().map(|(n, e)| json!({"n": n, "fraction": e.mean, "se": e.se})).collect::<Vec<_>>() }),
        );
    }
    Ok(())
}

fn ball_mass(p: &Params, out: &mut Outcome) -> Result<()> {
    let m = model(p)?;
    let d = m.dimension();
    let n = p.n.unwrap_or(20);
    let rhos = p.rho.clone().unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
    let ensemble = count(p.ensemble, 2000)?;
    let start = start_lattice(p, d)?;
    let master = seed(p, out);
    let (haar, exact) = haar_reference_sample(&m, item_seed(master, u64::MAX))?;
    if !exact {
        out.notes.push(format!(
            "haar target is the end of a {BURN_IN_STEPS}-step walk (approximate)"
        ));
    }
    let dists = ball_mass_distances(&m, &start, n, &[start.clone(), haar], ensemble, master)?;
    out.table = Table::new(&["target", "rho", "fraction", "se"]);
    let mut ok = true;
    for (name, ds) in ["start", "haar-sample"].iter().zip(&dists) {
        let mut sorted: Vec<(f64, Estimate)> = rhos
            .iter()
            .map(|&r| {
                (
                    r,
                    Estimate::proportion(ds.iter().filter(|&&x| x <= r).count(), ds.len()),
                )
            })
            .collect();
        for (r, e) in &sorted {
            out.table.push(vec![
                name.to_string(),
                r.to_string(),
                e.mean.to_string(),
                e.se.to_string(),
            ]);
        }
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        ok &= sorted.windows(2).all(|w| w[0].1.mean <= w[1].1.mean);
        out.stat(&format!("median-distance-{name}"), median(ds));
    }
    out.check("fractions non-decreasing in rho", ok, "");
    Ok(())
}

fn equidist(p: &Params, out: &mut Outcome) -> Result<()> {
    let ms = measure(p)?;
    let d = ms.dimension();
    let ts = p.t.clone().unwrap_or_else(|| vec![1e3, 1e6]);
    let default_box = vec!["0,1.5"; d + 1].join("x");
    let f = TestFunction::siegel(parse_box(p, &default_box)?, restriction(p));
    let samples = count(p.samples, 100_000)?;
    let master = seed(p, out);
    let haar = f.haar_mean(d)?;
    out.table = Table::new(&["measure", "t", "mean", "se", "haar"]);
    for &t in &ts {
        let e = expanding_translate_statistic(&ms, t, &f, samples, master)?;
        out.table.push(vec![
            ms.label(),
            t.to_string(),
            e.mean.to_string(),
            e.se.to_string(),
            haar.to_string(),
        ]);
        out.stat(&format!("mean-t={t}"), e);
        out.check(
            &format!("t={t} within 3 SE + 0.05 of the Haar mean"),
            e.within(haar, 3.0, 0.05),
            format!("{} vs {haar}", e.mean),
        );
    }
    out.stat("haar-mean", haar);
    Ok(())
}

fn double_corr(p: &Params, out: &mut Outcome) -> Result<()> {
    let ms = measure(p)?;
    let d = ms.dimension();
    let ts = p.t.clone().unwrap_or_else(|| vec![1e3, 1e6]);
    if ts.len() != 2 {
        bail!("--t needs exactly two times t1,t2");
    }
    let default_box = vec!["0,1"; d + 1].join("x");
    let f = TestFunction::siegel(parse_box(p, &default_box)?, restriction(p));
    let samples = count(p.samples, 20_000)?;
    let c = double_correlation(&ms, ts[0], ts[1], &f, &f, samples, seed(p, out))?;
    out.table = Table::new(&[
        "t1",
        "t2",
        "product-mean",
        "se",
        "haar-product",
        "deviation",
    ]);
    out.table.push(vec![
        ts[0].to_string(),
        ts[1].to_string(),
        c.product.mean.to_string(),
        c.product.se.to_string(),
        c.haar_product.to_string(),
        c.deviation.to_string(),
    ]);
    out.stat("product", c.product);
    out.stat("deviation", c.deviation);
    out.check(
        "finite estimate",
        c.product.mean.is_finite() && c.product.se.is_finite(),
        "",
    );
    Ok(())
}

fn haar_siegel(p: &Params, out: &mut Outcome) -> Result<()> {
    let d = p.d.unwrap_or(1);
    if d != 1 {
        bail!("exact Haar sampling is available only for d = 1");
    }
    let bx = parse_box(p, "0,1.5x0,1.5")?;
    let m = restriction(p);
    let samples = count(p.samples, 100_000)?;
    let master = seed(p, out);
    let values: Vec<f64> = par_items(master, samples, |_, s| {
        restricted_siegel_transform(&LatticeBasis::from_group(&haar_sample_sl2(s)), &bx, m)
            .map(|v| v as f64)
    })
    .into_iter()
    .collect::<fractal_khintchine::Result<_>>()?;
    out.table = Table::new(&["sample-id", "seed", "value"]);
    for (i, v) in values.iter().enumerate() {
        out.table.push(vec![
            i.to_string(),
            item_seed(master, i as u64).to_string(),
            v.to_string(),
        ]);
    }
    let e = Estimate::from_values(&values);
    let density = fractal_khintchine::homspace::restricted_density(1, m)?;
    let target = density * bx.volume();
    let second = values.iter().map(|v| v * v).sum::<f64>() / samples as f64;
    out.stat("mean", e);
    out.stat("haar-mean", target);
    out.stat("second-moment", second);
    out.check(
        "mean within 3 SE of c_m Leb(R)",
        e.within(target, 3.0, 0.0),
        format!("{} ± {} vs {target}", e.mean, e.se),
    );
    let (lo, hi) = (target * target, target * target + 20.0 * bx.volume());
    out.check(
        "second moment in [c^2 L^2, c^2 L^2 + 20 L]",
        (lo..=hi).contains(&second),
        format!("{second} in [{lo}, {hi}]"),
    );
    Ok(())
}

fn mnc(p: &Params, out: &mut Outcome) -> Result<()> {
    let m = model(p)?;
    let d = m.dimension();
    let n = p.n.unwrap_or(20);
    let s = match &p.staircase {
        Some(text) => parse_staircase(text, d)?,
        None => StaircaseSet::top_row(d),
    };
    let rs = p.r.clone().unwrap_or_else(|| vec![0.1, 0.01, 0.001]);
    let samples = count(p.samples, 20_000)?;
    let prof = mnc_statistic(&m, n, &s.subspace()?, &rs, samples, seed(p, out))?;
    out.table = Table::new(&["r", "fraction", "se"]);
    for (r, e) in &prof {
        out.table
            .push(vec![r.to_string(), e.mean.to_string(), e.se.to_string()]);
    }
    let slope = slope_of(&prof);
    out.stat("loglog-slope", slope);
    let mut sorted = prof.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.check(
        "fractions non-decreasing in r",
        sorted.windows(2).all(|w| w[0].1.mean <= w[1].1.mean),
        "",
    );
    out.check("positive log-log slope", slope > 0.0, format!("{slope}"));
    Ok(())
}

fn obstruction(p: &Params, out: &mut Outcome) -> Result<()> {
    let d = p.d.unwrap_or(2);
    let trials = count(p.trials, 500)?;
    let mut rng = rng_from_seed(seed(p, out));
    out.table = Table::new(&["trial", "dimension"]);
    let dims: Vec<usize> = (0..trials)
        .map(|_| obstruction_check(&GroupElement::random(d, &mut rng)))
        .collect::<fractal_khintchine::Result<_>>()?;
    for (i, k) in dims.iter().enumerate() {
        out.table.push(vec![i.to_string(), k.to_string()]);
    }
    let floor = d.saturating_sub(1);
    let hits = dims.iter().filter(|&&k| k >= floor).count();
    out.stat(
        "mean-dimension",
        Estimate::from_values(&dims.iter().map(|&k| k as f64).collect::<Vec<_>>()),
    );
    if d >= 2 {
        out.check(
            &format!("dimension >= {floor} in every trial"),
            hits == trials,
            format!("{hits}/{trials}"),
        );
    } else {
        let zeros = dims.iter().filter(|&&k| k == 0).count();
        out.check(
            "dimension 0 in every trial",
            zeros == trials,
            format!("{zeros}/{trials}"),
        );
    }
    Ok(())
}

fn matrix_rows(g: &GroupElement) -> Vec<Vec<f64>> {
    g.matrix()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

fn witness(p: &Params, out: &mut Outcome) -> Result<()> {
    let d = p.d.unwrap_or(2);
    let mode = match p.mode.as_deref().unwrap_or("general") {
        "general" => WitnessMode::General,
        "unipotent-only" | "unipotent" => WitnessMode::UnipotentOnly,
        other => bail!("--mode must be `general` or `unipotent-only`, got `{other}`"),
    };
    let max_tries = p.max_tries.unwrap_or(100);
    let targets = match &p.staircase {
        Some(text) => vec![parse_staircase(text, d)?],
        None => enumerate_staircases(d)?
            .into_iter()
            .filter(|s| s.len() == d)
            .collect(),
    };
    let master = seed(p, out);
    out.table = Table::new(&["staircase", "found", "tries", "wedge"]);
    let mut found = Vec::new();
    for (i, s) in targets.iter().enumerate() {
        let label = s
            .pairs
            .iter()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect::<Vec<_>>()
            .join(",");
        match find_transversal_witness(&s.subspace()?, mode, item_seed(master, i as u64), max_tries)
        {
            Ok(w) => {
                out.table.push(vec![
                    label.clone(),
                    "true".into(),
                    w.tries.to_string(),
                    w.wedge.to_string(),
                ]);
                found.push(
                    json!({"staircase": label, "wedge": w.wedge, "tries": w.tries,
                    "elements": w.elements.iter().map(matrix_rows).collect::<Vec<_>>()}),
                );
            }
            Err(fractal_khintchine::Error::WitnessNotFound { tries, best }) => {
                out.table.push(vec![
                    label.clone(),
                    "false".into(),
                    tries.to_string(),
                    best.to_string(),
                ]);
                out.check(
                    &format!("witness for {label}"),
                    false,
                    format!("best wedge {best} after {tries} tries"),
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
    out.check(
        "witness found for every staircase",
        found.len() == targets.len(),
        format!("{}/{}", found.len(), targets.len()),
    );
    if d == 1 {
        let base = sl2_base_case();
        out.stat("sl2-base-case-wedge", base.wedge);
        out.check(
            "sl2 base case is a direct sum",
            base.wedge > 1e-8,
            format!("{}", base.wedge),
        );
    }
    if d == 2 {
        for s in targets.iter().filter(|s| s.len() == 2) {
            let w = d2_constructed_witness(s)?;
            out.check(
                &format!("constructed witness for {:?}", s.pairs),
                w.wedge > 1e-8,
                format!("{}", w.wedge),
            );
        }
    }
    out.details = Some(json!({ "witnesses": found }));
    Ok(())
}

fn staircases(p: &Params, out: &mut Outcome) -> Result<()> {
    let d = p.d.unwrap_or(2);
    let all = enumerate_staircases(d)?;
    out.table = Table::new(&["size", "pairs"]);
    for s in &all {
        out.table.push(vec![
            s.len().to_string(),
            s.pairs
                .iter()
                .map(|(i, j)| format!("{i}-{j}"))
                .collect::<Vec<_>>()
                .join(","),
        ]);
    }
    out.stat("count", all.len() as f64);
    out.check(
        "every set is closed under the staircase moves",
        all.iter().all(|s| s.is_valid()),
        format!("{} sets", all.len()),
    );
    out.details = Some(serde_json::to_value(&all)?);
    Ok(())
}

fn nonconc(p: &Params, out: &mut Outcome) -> Result<()> {
    let m = model(p)?;
    let d = m.dimension();
    let n = p.n.unwrap_or_else(|| m.default_depth());
    let samples = count(p.samples, 10_000)?;
    let eps = p.r.clone().unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1]);
    let center = p.center.clone().unwrap_or_else(|| vec![0.0; d]);
    let sub = match &p.directions {
        None => AffineSubspace::point(&center),
        Some(text) => {
            let dirs = text
                .split(';')
                .map(|v| {
                    v.split(',')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
                .context("--directions must look like `x,y;x,y`")?;
            let cols: Vec<DVector<f64>> = dirs.into_iter().map(DVector::from_vec).collect();
            AffineSubspace::new(
                DVector::from_vec(center.clone()),
                DMatrix::from_columns(&cols),
            )?
        }
    };
    let prof = affine_nonconcentration(&m, &sub, &eps, n, samples, seed(p, out))?;
    out.table = Table::new(&["eps", "fraction"]);
    for (e, f) in &prof {
        out.table.push(vec![e.to_string(), f.to_string()]);
    }
    let positive: Vec<(f64, f64)> = prof.iter().copied().filter(|&(_, f)| f > 0.0).collect();
    if let Some(slope) = loglog_slope(&positive) {
        out.stat("loglog-slope", slope);
    }
    let mut sorted = prof.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.check(
        "fractions non-decreasing in eps",
        sorted.windows(2).all(|w| w[0].1 <= w[1].1),
        "",
    );
    Ok(())
}

/// Exact fixtures for one command.
pub fn selftest(command: CommandName) -> Result<Outcome> {
    let mut out = Outcome {
        table: Table::new(&["check", "passed", "detail"]),
        ..Default::default()
    };
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;
    match command {
        CommandName::Sample => {
            let m = IfsModel::preset("cantor3")?;
            out.check(
                "depth 0 gives the origin",
                sample_sigma_n(&m, 0, 5).point[0] == 0.0,
                "",
            );
            out.check(
                "sampling is reproducible",
                sample_sigma_n(&m, 30, 5) == sample_sigma_n(&m, 30, 5),
                "",
            );
            out.check(
                "cantor3 Lyapunov exponent is log 3",
                close(m.lyapunov_exponent(), 3f64.ln(), 1e-15),
                "",
            );
        }
        CommandName::Count => {
            use fractal_khintchine::dioph::count_all;
            let c = count_all(&[0.5], &ApproxFunction::constant(0.4)?, 10)?;
            out.check(
                "s=1/2, psi=0.4, N=10 gives 5/5/1",
                (c.two_sided, c.one_sided, c.primitive) == (5, 5, 1),
                format!("{c:?}"),
            );
            let z = count_all(&[0.3], &ApproxFunction::constant(0.0)?, 50)?;
            out.check(
                "psi = 0 gives no solutions",
                z.two_sided == 0 && z.one_sided == 0,
                "",
            );
            let s0 = count_all(&[0.0], &ApproxFunction::constant(0.4)?, 37)?;
            out.check(
                "s = 0 gives N solutions, one primitive",
                s0.two_sided == 37 && s0.primitive == 1,
                "",
            );
        }
        CommandName::DaniCheck => {
            use fractal_khintchine::dioph::block_count;
            let c04 = ApproxFunction::constant(0.4)?;
            out.check(
                "block k=1, tau=2 at s=1/2 is 1",
                block_count(&[0.5], &c04, 2.0, 1)? == 1,
                "",
            );
            out.check(
                "empty q-window gives 0",
                block_count(&[0.5], &c04, 1.5, 1)? == 0,
                "",
            );
            let f: ApproxFunction = "power:a=0.5".parse()?;
            let ok = (1..=10).all(|k| {
                dani_cross_check(&[1.0 / 3.0], &f, 3.0, k)
                    .map(|c| c.equal)
                    .unwrap_or(false)
            });
            out.check("rational ties agree (s=1/3, tau=3)", ok, "");
        }
        CommandName::Walk => {
            use fractal_khintchine::ifs::Similarity;
            use fractal_khintchine::walk::{mu_element, WalkState};
            let third = Similarity::homothety(1.0 / 3.0, &[0.0])?;
            let g = mu_element(&third)?;
            out.check(
                "s/3 maps to a(3)",
                close(g.matrix()[(0, 0)], 3f64.sqrt(), 1e-14)
                    && close(g.matrix()[(1, 1)], 1.0 / 3f64.sqrt(), 1e-14),
                "",
            );
            let id = mu_element(&Similarity::identity(2))?;
            out.check(
                "identity similarity maps to the identity",
                (id.matrix() - DMatrix::identity(3, 3)).amax() < 1e-15,
                "",
            );
            let single = IfsModel::new(1, vec![(1.0, third)], "third")?;
            let mut st = WalkState::standard(1);
            st.step(&single, &mut rng_from_seed(1))?;
            out.check(
                "one step from Z^2 has lambda1 = 1/sqrt 3",
                close(st.lambda1()?, 1.0 / 3f64.sqrt(), 1e-14),
                "",
            );
        }
        CommandName::Recurrence => {
            let m = IfsModel::preset("cantor3")?;
            let bound = hermite_bound(2);
            let stats = run_ensemble(&m, &LatticeBasis::standard(1), 10, &[], 50, 3)?;
            let f = stats.cusp_fractions(&[bound])[0].1.mean;
            out.check(
                "rho at the Hermite bound captures everything",
                f == 1.0,
                format!("{f}"),
            );
        }
        CommandName::BallMass => {
            let m = IfsModel::preset("cantor3")?;
            let x0 = LatticeBasis::standard(1);
            let d = ball_mass_distances(&m, &x0, 0, std::slice::from_ref(&x0), 8, 1)?;
            out.check(
                "n = 0 stays at the start",
                d[0].iter().all(|&x| x < 1e-12),
                "",
            );
        }
        CommandName::Equidist => {
            let one = TestFunction::Constant { value: 1.0 };
            let e =
                expanding_translate_statistic(&PointMeasure::Lebesgue { d: 1 }, 10.0, &one, 10, 1)?;
            out.check(
                "constant function has its own mean",
                e.mean == 1.0 && e.se == 0.0,
                "",
            );
            let f = TestFunction::siegel(AxisBox::cube(2, 0.0, 1.5)?, Some(1));
            out.check(
                "restricted Siegel Haar mean is c1 * 2.25",
                close(f.haar_mean(1)?, c_m(1)? * 2.25, 1e-15),
                "",
            );
        }
        CommandName::DoubleCorr => {
            let ms = PointMeasure::Lebesgue { d: 1 };
            let one = TestFunction::Constant { value: 1.0 };
            let f = TestFunction::siegel(AxisBox::cube(2, 0.0, 1.0)?, Some(1));
            let single = expanding_translate_statistic(&ms, 20.0, &f, 100, 2)?;
            let c = double_correlation(&ms, 20.0, 20.0, &f, &one, 100, 2)?;
            out.check(
                "f2 = 1 reduces to the single average",
                close(c.product.mean, single.mean, 1e-12),
                "",
            );
        }
        CommandName::HaarSiegel => {
            out.check("c_1 = 6/pi^2", close(c_m(1)?, 0.607927, 1e-6), "");
            out.check("c_2 = 0.759909", close(c_m(2)?, 0.759909, 1e-6), "");
            let bx = AxisBox::cube(2, 0.0, 2.5)?;
            let pts =
                fractal_khintchine::homspace::enumerate_in_box(&LatticeBasis::standard(1), &bx)?;
            out.check("Z^2 in [0,2.5]^2 has 9 points", pts.len() == 9, "");
            out.check(
                "Siegel transform there is 8",
                fractal_khintchine::homspace::siegel_transform(&LatticeBasis::standard(1), &bx)?
                    == 8,
                "",
            );
        }
        CommandName::Mnc => {
            use fractal_khintchine::ifs::Similarity;
            use fractal_khintchine::liegeom::v1_of;
            let phi = Similarity::homothety(1.0 / 3.0, &[0.25])?;
            let single = IfsModel::new(1, vec![(1.0, phi.clone())], "single")?;
            let prof = mnc_statistic(&single, 1, &v1_of(&phi)?, &[1e-6, 1.0], 10, 1)?;
            out.check(
                "W inside V1 gives fraction 1",
                prof.iter().all(|(_, e)| e.mean == 1.0),
                "",
            );
        }
        CommandName::Obstruction => {
            let ok = (1..=4).all(|d| {
                obstruction_check(&GroupElement::identity(d))
                    .map(|k| k == d - 1)
                    .unwrap_or(false)
            });
            out.check("g = Id gives dimension d - 1", ok, "");
        }
        CommandName::Witness => {
            let base = sl2_base_case();
            out.check(
                "sl2 base case wedge is 1/sqrt 2",
                close(base.wedge, 0.5f64.sqrt(), 1e-12),
                format!("{}", base.wedge),
            );
            let w = StaircaseSet::new(2, [(1, 3)])?.subspace()?;
            out.check(
                "W of dimension != d is rejected",
                find_transversal_witness(&w, WitnessMode::General, 1, 5).is_err(),
                "",
            );
        }
        CommandName::Staircases => {
            out.check(
                "d = 1 has two staircases",
                enumerate_staircases(1)?.len() == 2,
                "",
            );
            let d2: Vec<Vec<(usize, usize)>> = enumerate_staircases(2)?
                .into_iter()
                .map(|s| s.pairs.into_iter().collect())
                .collect();
            out.check(
                "d = 2 list",
                d2 == vec![
                    vec![],
                    vec![(1, 3)],
                    vec![(1, 2), (1, 3)],
                    vec![(1, 3), (2, 3)],
                ],
                format!("{d2:?}"),
            );
        }
        CommandName::Nonconc => {
            let m = IfsModel::preset("cantor3")?;
            let prof = affine_nonconcentration(
                &m,
                &AffineSubspace::point(&[0.5]),
                &[0.1, 0.5],
                30,
                2000,
                1,
            )?;
            out.check("middle third is empty", prof[0].1 == 0.0, "");
            out.check("radius 1/2 catches everything", prof[1].1 == 1.0, "");
        }
    }
    for a in out.assertions.clone() {
        out.table.push(vec![a.name, a.passed.to_string(), a.detail]);
    }
    Ok(out)
}
