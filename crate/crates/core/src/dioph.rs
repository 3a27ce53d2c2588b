//! Counting solutions of `0 <= q s_i - p_i < ψ(q)` and its two-sided and
//! primitive variants, the dyadic-style block decomposition, and the
//! exact block-to-lattice correspondence.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::homspace::{enumerate_in_box, make_a, make_u, zeta, AxisBox, LatticeBasis, TIE_REL};
use crate::ifs::PointMeasure;
use crate::seed::par_items;

/// Largest admissible `ψ(q)`; larger values are a degenerate regime.
pub const PSI_MAX: f64 = 10.0;

/// Values `v` with `|v - round(v)|` below this are recounted in
/// double-double arithmetic.
const RISK_BAND: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PsiFamily {
    /// `c q^{-a}`
    Power { c: f64, a: f64 },
    /// `c q^{-a} max(1, log q)^{-b}`
    PowerLog { c: f64, a: f64, b: f64 },
    /// `ψ(q) = values[q-1]`, zero past the table.
    Table { values: Vec<f64> },
}

/// How `ψ` is extended from the integers to real arguments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RealExtension {
    /// `ψ(x) = ψ(⌈x⌉)`
    #[default]
    Ceil,
    /// `ψ(x) = ψ(⌊x⌋)`
    Floor,
}

/// A non-increasing `ψ: N -> R_{>=0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxFunction {
    #[serde(flatten)]
    pub family: PsiFamily,
    #[serde(default)]
    pub extension: RealExtension,
}

impl ApproxFunction {
    pub fn new(family: PsiFamily) -> Result<Self> {
        let f = ApproxFunction {
            family,
            extension: RealExtension::Ceil,
        };
        match &f.family {
            PsiFamily::Power { c, a } | PsiFamily::PowerLog { c, a, .. }
                if !(*c >= 0.0 && *a >= 0.0) =>
            {
                return Err(Error::InvalidArgument(format!(
                    "need c >= 0 and a >= 0, got c={c}, a={a}"
                )));
            }
            PsiFamily::Table { values } if values.iter().any(|v| !(*v >= 0.0)) => {
                return Err(Error::InvalidArgument(
                    "table values must be nonnegative".into(),
                ));
            }
            _ => {}
        }
        f.check_monotone(10_000)?;
        Ok(f)
    }

    pub fn power(c: f64, a: f64) -> Result<Self> {
        ApproxFunction::new(PsiFamily::Power { c, a })
    }

    pub fn constant(c: f64) -> Result<Self> {
        ApproxFunction::power(c, 0.0)
    }

    pub fn power_log(c: f64, a: f64, b: f64) -> Result<Self> {
        ApproxFunction::new(PsiFamily::PowerLog { c, a, b })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        ApproxFunction::new(PsiFamily::Table { values })
    }

    pub fn with_extension(mut self, extension: RealExtension) -> Self {
        self.extension = extension;
        self
    }

    /// `ψ(q)` for `q >= 1`.
    pub fn eval(&self, q: u64) -> f64 {
        debug_assert!(q >= 1);
        let qf = q as f64;
        match &self.family {
            PsiFamily::Power { c, a } => {
                if *a == 0.0 {
                    *c
                } else {
                    c * qf.powf(-a)
                }
            }
            PsiFamily::PowerLog { c, a, b } => c * qf.powf(-a) * qf.ln().max(1.0).powf(-b),
            PsiFamily::Table { values } => values.get(q as usize - 1).copied().unwrap_or(0.0),
        }
    }

    /// `ψ` at a real argument `x >= 1` through the configured extension.
    pub fn eval_real(&self, x: f64) -> f64 {
        let q = match self.extension {
            RealExtension::Ceil => x.ceil(),
            RealExtension::Floor => x.floor(),
        };
        self.eval(q.max(1.0) as u64)
    }

    /// Non-increasing on `1..=grid`.
    pub fn check_monotone(&self, grid: u64) -> Result<()> {
        let mut prev = self.eval(1);
        for q in 2..=grid {
            let v = self.eval(q);
            if v > prev * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!("psi increases at q = {q}")));
            }
            prev = v;
        }
        Ok(())
    }

    /// `Σ_{q=1}^{n} ψ(q)^d`.
    pub fn sum_pow(&self, d: usize, n: u64) -> f64 {
        (1..=n).map(|q| self.eval(q).powi(d as i32)).sum()
    }

    fn check_range(&self) -> Result<()> {
        let v = self.eval(1);
        if v > PSI_MAX {
            return Err(Error::PsiTooLarge { q: 1, value: v });
        }
        Ok(())
    }
}

/// Parses `power:a=0.5,c=1`, `power-log:a=1,b=1,c=1`, `const:0.4` or
/// `table:0.5,0.4,0.3`. A trailing `;floor` selects the floor extension.
impl FromStr for ApproxFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (body, ext) = match s.split_once(';') {
            Some((b, "floor")) => (b, RealExtension::Floor),
            Some((b, "ceil")) => (b, RealExtension::Ceil),
            Some((_, e)) => return Err(Error::InvalidArgument(format!("unknown extension `{e}`"))),
            None => (s, RealExtension::Ceil),
        };
        let (family, args) = body.split_once(':').unwrap_or((body, ""));
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{v}`")))
        };
        let kv = || -> Result<BTreeMap<String, f64>> {
            args.split(',')
                .filter(|x| !x.trim().is_empty())
                .map(|x| {
                    let (k, v) = x.split_once('=').ok_or_else(|| {
                        Error::InvalidArgument(format!("expected key=value, got `{x}`"))
                    })?;
                    Ok((k.trim().to_string(), num(v)?))
                })
                .collect()
        };
        let get = |m: &BTreeMap<String, f64>, k: &str, default: Option<f64>| {
            m.get(k)
                .copied()
                .or(default)
                .ok_or_else(|| Error::InvalidArgument(format!("missing parameter `{k}`")))
        };
        let f = match family.trim() {
            "power" => {
                let m = kv()?;
                ApproxFunction::power(get(&m, "c", Some(1.0))?, get(&m, "a", None)?)?
            }
            "power-log" => {
                let m = kv()?;
                ApproxFunction::power_log(
                    get(&m, "c", Some(1.0))?,
                    get(&m, "a", None)?,
                    get(&m, "b", None)?,
                )?
            }
            "const" => ApproxFunction::constant(num(args)?)?,
            "table" => ApproxFunction::table(args.split(',').map(num).collect::<Result<_>>()?)?,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown psi family `{other}`"
                )))
            }
        };
        Ok(f.with_extension(ext))
    }
}

fn near_integer(v: f64) -> bool {
    (v - v.round()).abs() < RISK_BAND
}

/// Integers `p` with `0 <= x - p < w`, where `x = q s`, as an inclusive
/// range. Ties within `TIE_REL * w` of a window end snap onto it.
fn one_sided_range(q: f64, s: f64, w: f64, risky: &mut u64) -> (i64, i64) {
    let tol = TIE_REL * w;
    let x = q * s;
    let a = x - w + tol;
    let b = x + tol;
    if near_integer(a) || near_integer(b) {
        *risky += 1;
        let xx = Dd::prod(q, s);
        let a = ((xx - w) + tol).floor();
        let b = (xx + tol).floor();
        (a as i64 + 1, b as i64)
    } else {
        (a.floor() as i64 + 1, b.floor() as i64)
    }
}

/// Integers `p` with `|x - p| < w`.
fn two_sided_range(q: f64, s: f64, w: f64, risky: &mut u64) -> (i64, i64) {
    let tol = TIE_REL * w;
    let x = q * s;
    let a = x - w + tol;
    let b = x + w - tol;
    if near_integer(a) || near_integer(b) {
        *risky += 1;
        let xx = Dd::prod(q, s);
        let a = ((xx - w) + tol).floor();
        let b = ((xx + w) - tol).ceil();
        (a as i64 + 1, b as i64 - 1)
    } else {
        (a.floor() as i64 + 1, b.ceil() as i64 - 1)
    }
}

fn range_len(r: (i64, i64)) -> u64 {
    if r.1 >= r.0 {
        (r.1 - r.0 + 1) as u64
    } else {
        0
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Number of `p` in the product of `ranges` with `gcd(p_1, …, p_d, q) = 1`.
fn primitive_in_ranges(ranges: &[(i64, i64)], q: u64) -> u64 {
    fn rec(ranges: &[(i64, i64)], g: u64) -> u64 {
        match ranges.split_first() {
            None => (g == 1) as u64,
            Some((&(lo, hi), rest)) => (lo..=hi).map(|p| rec(rest, gcd(g, p.unsigned_abs()))).sum(),
        }
    }
    if ranges.iter().any(|r| r.1 < r.0) {
        return 0;
    }
    rec(ranges, q)
}

/// Counts up to `N`, from `q = 1` (the `q = 0` term is not included).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub two_sided: u64,
    pub one_sided: u64,
    pub primitive: u64,
    /// Number of `(q, i)` comparisons that fell in the risk band and were
    /// recounted in extended precision.
    pub boundary_risk: u64,
}

/// All three counts at each `N` of an increasing grid, in one pass.
pub fn count_grid(s: &[f64], psi: &ApproxFunction, grid: &[u64]) -> Result<Vec<Counts>> {
    if grid.is_empty() || grid[0] < 1 || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "N grid must be nonempty, increasing and >= 1".into(),
        ));
    }
    psi.check_range()?;
    let d = s.len();
    let nmax = *grid.last().unwrap();
    let mut acc = Counts::default();
    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    let mut ranges = vec![(0i64, -1i64); d];
    for q in 1..=nmax {
        let w = psi.eval(q);
        if w > 0.0 {
            let qf = q as f64;
            let mut two = 1u64;
            let mut one = 1u64;
            for (i, &si) in s.iter().enumerate() {
                two *= range_len(two_sided_range(qf, si, w, &mut acc.boundary_risk));
                ranges[i] = one_sided_range(qf, si, w, &mut acc.boundary_risk);
                one *= range_len(ranges[i]);
            }
            acc.two_sided += two;
            acc.one_sided += one;
            if one > 0 {
                acc.primitive += primitive_in_ranges(&ranges, q);
            }
        }
        while next < grid.len() && grid[next] == q {
            out.push(acc);
            next += 1;
        }
    }
    Ok(out)
}

pub fn count_all(s: &[f64], psi: &ApproxFunction, n: u64) -> Result<Counts> {
    Ok(count_grid(s, psi, &[n])?[0])
}

/// `|{(p, q) : 1 <= q <= N, |q s_i - p_i| < ψ(q) for all i}|`.
pub fn count_two_sided(s: &[f64], psi: &ApproxFunction, n: u64) -> Result<u64> {
    Ok(count_all(s, psi, n)?.two_sided)
}

/// `|{(p, q) : 1 <= q <= N, 0 <= q s_i - p_i < ψ(q) for all i}|`.
pub fn count_one_sided(s: &[f64], psi: &ApproxFunction, n: u64) -> Result<u64> {
    Ok(count_all(s, psi, n)?.one_sided)
}

/// One-sided count restricted to `gcd(p_1, …, p_d, q) = 1`.
pub fn count_primitive(s: &[f64], psi: &ApproxFunction, n: u64) -> Result<u64> {
    Ok(count_all(s, psi, n)?.primitive)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub k: u32,
    pub psi_k: f64,
    pub t_k: f64,
    pub r_k: f64,
    /// `Leb(R_k) = (1 - 1/τ) ψ(τ^k)^d τ^k`.
    pub volume: f64,
    /// `r_k > t_k^{γ_1}`: the large-box regime.
    pub big: bool,
}

/// `t_k = τ^k / ψ(τ^k)` and `r_k^{d+1} = ψ(τ^k)^d τ^k` for `k = 1..=kmax`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub d: usize,
    pub tau: f64,
    pub gamma1: f64,
    pub entries: Vec<BlockEntry>,
}

impl BlockSchedule {
    pub fn new(psi: &ApproxFunction, d: usize, tau: f64, kmax: u32, gamma1: f64) -> Result<Self> {
        check_tau(tau)?;
        let entries = (1..=kmax)
            .map(|k| {
                let (psi_k, t_k, r_k) = schedule_values(psi, d, tau, k)?;
                Ok(BlockEntry {
                    k,
                    psi_k,
                    t_k,
                    r_k,
                    volume: (1.0 - 1.0 / tau) * psi_k.powi(d as i32) * tau.powi(k as i32),
                    big: r_k > t_k.powf(gamma1),
                })
            })
            .collect::<Result<_>>()?;
        Ok(BlockSchedule {
            d,
            tau,
            gamma1,
            entries,
        })
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 1.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau must exceed 1, got {tau}"
        )));
    }
    Ok(())
}

fn schedule_values(psi: &ApproxFunction, d: usize, tau: f64, k: u32) -> Result<(f64, f64, f64)> {
    let tk = tau.powi(k as i32);
    let psi_k = psi.eval_real(tk);
    if !(psi_k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "psi(tau^{k}) = 0; block has no lattice form"
        )));
    }
    let t = tk / psi_k;
    let r = (psi_k.powi(d as i32) * tk).powf(1.0 / (d + 1) as f64);
    Ok((psi_k, t, r))
}

/// `S_k(s)`: solutions with `q ∈ (τ^{k-1}, τ^k]` and the frozen threshold
/// `0 <= q s_i - p_i < ψ(τ^k)`.
pub fn block_count(s: &[f64], psi: &ApproxFunction, tau: f64, k: u32) -> Result<u64> {
    check_tau(tau)?;
    if k < 1 {
        return Err(Error::InvalidArgument(
            "block index k must be at least 1".into(),
        ));
    }
    let hi = tau.powi(k as i32);
    let lo = tau.powi(k as i32 - 1);
    let w = psi.eval_real(hi);
    if w > PSI_MAX {
        return Err(Error::PsiTooLarge {
            q: hi.ceil() as u64,
            value: w,
        });
    }
    let tol_q = TIE_REL * (hi - lo);
    let q_lo = (lo + tol_q).floor() as u64 + 1;
    let q_hi = (hi + tol_q).floor() as u64;
    let mut risky = 0;
    let mut total = 0u64;
    for q in q_lo..=q_hi {
        total += s
            .iter()
            .map(|&si| range_len(one_sided_range(q as f64, si, w, &mut risky)))
            .product::<u64>();
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaniCheck {
    pub direct: u64,
    pub lattice: u64,
    pub equal: bool,
}

/// Counts `S_k(s)` twice: by the direct q-loop, and as the number of points
/// of `a(t_k) u(s) Z^{d+1}` in `R_k = [0, r_k)^d × (r_k/τ, r_k]`.
pub fn dani_cross_check(s: &[f64], psi: &ApproxFunction, tau: f64, k: u32) -> Result<DaniCheck> {
    let direct = block_count(s, psi, tau, k)?;
    let d = s.len();
    let (_, t, r) = schedule_values(psi, d, tau, k)?;
    let basis = LatticeBasis::from_factors(&[make_a(t, d)?, make_u(s)]);
    let bx = AxisBox::block(d, r, tau)?;
    let lattice = enumerate_in_box(&basis, &bx)?
        .iter()
        .filter(|p| !p.is_zero())
        .count() as u64;
    Ok(DaniCheck {
        direct,
        lattice,
        equal: direct == lattice,
    })
}

/// One row of a counting experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub sample_id: usize,
    pub seed: u64,
    pub s: Vec<f64>,
    pub n: u64,
    pub count2: u64,
    pub count1: u64,
    pub count_p: u64,
    pub sum_psi_d: f64,
    /// `count2 / (2^d Σ ψ^d)`
    pub ratio2: f64,
    /// `count1 / Σ ψ^d`
    pub ratio1: f64,
    /// `count_p / (ζ(d+1)^{-1} Σ ψ^d)`
    pub ratio_p: f64,
    pub boundary_risk: u64,
}

/// For `samples` base points drawn from `measure`, the three counts and
/// their ratios to the asymptotic predictions at every `N` of the grid.
pub fn schmidt_ratio_experiment(
    measure: &PointMeasure,
    psi: &ApproxFunction,
    grid: &[u64],
    samples: usize,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    let d = measure.dimension();
    psi.check_range()?;
    let nmax = *grid
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty N grid".into()))?;
    // partial sums Σ ψ^d at each grid point
    let mut sums = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut next = 0;
    for q in 1..=nmax {
        acc += psi.eval(q).powi(d as i32);
        while next < grid.len() && grid[next] == q {
            sums.push(acc);
            next += 1;
        }
    }
    let zeta_inv = 1.0 / zeta((d + 1) as f64);
    let two_d = 2f64.powi(d as i32);
    let rows = par_items(seed, samples, |i, item_seed| -> Result<Vec<CountRecord>> {
        let s: Vec<f64> = measure.sample(item_seed).iter().copied().collect();
        let counts = count_grid(&s, psi, grid)?;
        Ok(counts
            .iter()
            .zip(grid)
            .zip(&sums)
            .map(|((c, &n), &sum)| CountRecord {
                sample_id: i,
                seed: item_seed,
                s: s.clone(),
                n,
                count2: c.two_sided,
                count1: c.one_sided,
                count_p: c.primitive,
                sum_psi_d: sum,
                ratio2: c.two_sided as f64 / (two_d * sum),
                ratio1: c.one_sided as f64 / sum,
                ratio_p: c.primitive as f64 / (zeta_inv * sum),
                boundary_risk: c.boundary_risk,
            })
            .collect())
    });
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c04() -> ApproxFunction {
        ApproxFunction::constant(0.4).unwrap()
    }

    #[test]
    fn half_fixtures() {
        let c = count_all(&[0.5], &c04(), 10).unwrap();
        assert_eq!(c.two_sided, 5);
        assert_eq!(c.one_sided, 5);
        assert_eq!(c.primitive, 1);
    }

    #[test]
    fn zero_and_integer_points() {
        let zero = ApproxFunction::constant(0.0).unwrap();
        assert_eq!(count_two_sided(&[0.3], &zero, 100).unwrap(), 0);
        assert_eq!(count_one_sided(&[0.3], &zero, 100).unwrap(), 0);
        assert_eq!(count_two_sided(&[0.0], &c04(), 37).unwrap(), 37);
        assert_eq!(count_one_sided(&[2.0, -1.0], &c04(), 37).unwrap(), 37);
        assert_eq!(count_primitive(&[0.0], &c04(), 37).unwrap(), 1);
    }

    #[test]
    fn refuses_large_psi() {
        let big = ApproxFunction::constant(11.0).unwrap();
        assert!(matches!(
            count_all(&[0.1], &big, 5),
            Err(Error::PsiTooLarge { .. })
        ));
    }

    #[test]
    fn parse_families() {
        let p: ApproxFunction = "power:a=0.5,c=1".parse().unwrap();
        assert!((p.eval(4) - 0.5).abs() < 1e-15);
        let p: ApproxFunction = "power-log:a=1,b=2".parse().unwrap();
        assert!((p.eval(100) - 0.01 / 100f64.ln().powi(2)).abs() < 1e-15);
        let p: ApproxFunction = "table:0.5,0.4,0.3".parse().unwrap();
        assert_eq!(p.eval(4), 0.0);
        assert!("table:0.3,0.5".parse::<ApproxFunction>().is_err());
        let p: ApproxFunction = "power:a=1;floor".parse().unwrap();
        assert_eq!(p.extension, RealExtension::Floor);
        assert_eq!(p.eval_real(2.7), 0.5);
        assert_eq!(
            p.with_extension(RealExtension::Ceil).eval_real(2.7),
            1.0 / 3.0
        );
    }

    #[test]
    fn block_fixtures() {
        assert_eq!(block_count(&[0.5], &c04(), 2.0, 1).unwrap(), 1);
        // (τ^0, τ^1] = (1, 1.5] holds no integer
        assert_eq!(block_count(&[0.5], &c04(), 1.5, 1).unwrap(), 0);
    }

    #[test]
    fn schedule_invariants() {
        let psi: ApproxFunction = "power:a=0.5".parse().unwrap();
        for d in 1..=3 {
            let sch = BlockSchedule::new(&psi, d, 1.5, 60, 0.01).unwrap();
            for e in &sch.entries {
                let tk = 1.5f64.powi(e.k as i32);
                if e.t_k > 1e12 {
                    continue;
                }
                let lhs = e.psi_k.powi(d as i32) * tk;
                assert!((lhs - e.r_k.powi(d as i32 + 1)).abs() <= 1e-12 * lhs);
                assert!((e.t_k - tk / e.psi_k).abs() <= 1e-12 * e.t_k);
            }
        }
    }

    #[test]
    fn dani_small_cases() {
        let psi: ApproxFunction = "power:a=0.5".parse().unwrap();
        for k in 1..=12 {
            let c = dani_cross_check(&[std::f64::consts::FRAC_1_PI], &psi, 2.0, k).unwrap();
            assert!(c.equal, "k={k}: {c:?}");
        }
    }
}
