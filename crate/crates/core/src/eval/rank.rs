//! Rank aggregation and rank agreement.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Largest n for which the exact permutation test is run.
pub const EXACT_MAX_N: usize = 8;

pub const BUNDLED_RANKINGS: &str = include_str!("../../data/policy_rankings.csv");

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RankError {
    #[error("ranking is empty")]
    Empty,
    #[error("item `{0}` has rank 0; ranks start at 1")]
    ZeroRank(String),
    #[error("rankings cover different items")]
    ItemMismatch,
    #[error("need at least 2 items, got {0}")]
    TooFew(usize),
    #[error("exact p-value needs n <= {EXACT_MAX_N}, got {0}; use the asymptotic method")]
    TooLargeForExact(usize),
    #[error("no voters")]
    NoVoters,
    #[error("tau undefined: a ranking is constant")]
    Constant,
    #[error("rankings table line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// item -> rank, 1 = best; ties allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking(BTreeMap<String, u32>);

impl Ranking {
    pub fn new(ranks: impl IntoIterator<Item = (String, u32)>) -> Result<Self, RankError> {
        let map: BTreeMap<String, u32> = ranks.into_iter().collect();
        if map.is_empty() {
            return Err(RankError::Empty);
        }
        if let Some((item, _)) = map.iter().find(|(_, r)| **r == 0) {
            return Err(RankError::ZeroRank(item.clone()));
        }
        Ok(Self(map))
    }

    /// Ranks in item order for `items`.
    pub fn from_slice(items: &[&str], ranks: &[u32]) -> Result<Self, RankError> {
        if items.len() != ranks.len() {
            return Err(RankError::ItemMismatch);
        }
        Self::new(items.iter().map(|s| s.to_string()).zip(ranks.iter().copied()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rank(&self, item: &str) -> Option<u32> {
        self.0.get(item).copied()
    }

    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn has_ties(&self) -> bool {
        let distinct: BTreeSet<u32> = self.0.values().copied().collect();
        distinct.len() < self.0.len()
    }

    /// Borda points: an item at sorted position p (1-based) of n earns
    /// `n - p`; tied items share the mean of their positions' points.
    pub fn borda_points(&self) -> BTreeMap<String, f64> {
        let n = self.0.len() as f64;
        let mut sorted: Vec<(&String, u32)> = self.0.iter().map(|(k, v)| (k, *v)).collect();
        sorted.sort_by_key(|(_, r)| *r);
        let mut out = BTreeMap::new();
        let mut start = 0;
        while start < sorted.len() {
            let end = start + sorted[start..].iter().take_while(|(_, r)| *r == sorted[start].1).count();
            // positions start+1 ..= end
            let mean_points = (start + 1..=end).map(|p| n - p as f64).sum::<f64>() / (end - start) as f64;
            for (item, _) in &sorted[start..end] {
                out.insert((*item).clone(), mean_points);
            }
            start = end;
        }
        out
    }

    /// Competition ranking ("1, 2, 2, 4") of scores, higher is better.
    pub fn from_scores(scores: &BTreeMap<String, f64>) -> Result<Self, RankError> {
        let ranks = scores.iter().map(|(item, s)| {
            let better = scores.values().filter(|o| **o > *s).count() as u32;
            (item.clone(), better + 1)
        });
        Self::new(ranks)
    }

    fn aligned(&self, other: &Ranking) -> Result<(Vec<u32>, Vec<u32>), RankError> {
        if !self.0.keys().eq(other.0.keys()) {
            return Err(RankError::ItemMismatch);
        }
        Ok((self.0.values().copied().collect(), other.0.values().copied().collect()))
    }
}

/// Borda count over voters with averaged points for ties.
pub fn borda_aggregate(rankings: &[Ranking]) -> Result<Ranking, RankError> {
    let first = rankings.first().ok_or(RankError::NoVoters)?;
    let mut totals: BTreeMap<String, f64> = first.items().map(|i| (i.to_string(), 0.0)).collect();
    for r in rankings {
        if !r.0.keys().eq(first.0.keys()) {
            return Err(RankError::ItemMismatch);
        }
        for (item, pts) in r.borda_points() {
            *totals.get_mut(&item).expect("same items") += pts;
        }
    }
    Ranking::from_scores(&totals)
}

/// Pair counts behind every tau variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub n: usize,
    pub concordant: u64,
    pub discordant: u64,
    /// Pairs tied in the first ranking (including joint ties).
    pub ties_x: u64,
    pub ties_y: u64,
}

impl PairCounts {
    pub fn n0(&self) -> u64 {
        let n = self.n as u64;
        n * (n - 1) / 2
    }

    pub fn s(&self) -> i64 {
        self.concordant as i64 - self.discordant as i64
    }
}

pub fn pair_counts(x: &[u32], y: &[u32]) -> PairCounts {
    let mut c = PairCounts { n: x.len(), concordant: 0, discordant: 0, ties_x: 0, ties_y: 0 };
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = i64::from(x[i]) - i64::from(x[j]);
            let dy = i64::from(y[i]) - i64::from(y[j]);
            if dx == 0 {
                c.ties_x += 1;
            }
            if dy == 0 {
                c.ties_y += 1;
            }
            match (dx * dy).signum() {
                1 => c.concordant += 1,
                -1 => c.discordant += 1,
                _ => {}
            }
        }
    }
    c
}

fn tau_b_raw(x: &[u32], y: &[u32]) -> Option<f64> {
    let c = pair_counts(x, y);
    let n0 = c.n0() as f64;
    let denom = ((n0 - c.ties_x as f64) * (n0 - c.ties_y as f64)).sqrt();
    (denom > 0.0).then(|| c.s() as f64 / denom)
}

fn check_pair(r1: &Ranking, r2: &Ranking) -> Result<(Vec<u32>, Vec<u32>), RankError> {
    let (x, y) = r1.aligned(r2)?;
    if x.len() < 2 {
        return Err(RankError::TooFew(x.len()));
    }
    Ok((x, y))
}

/// Kendall's tau-b.
pub fn kendall_tau_b(r1: &Ranking, r2: &Ranking) -> Result<f64, RankError> {
    let (x, y) = check_pair(r1, r2)?;
    tau_b_raw(&x, &y).ok_or(RankError::Constant)
}

/// Kendall's tau-a, ignoring ties in the denominator.
pub fn kendall_tau_a(r1: &Ranking, r2: &Ranking) -> Result<f64, RankError> {
    let (x, y) = check_pair(r1, r2)?;
    let c = pair_counts(&x, &y);
    Ok(c.s() as f64 / c.n0() as f64)
}

/// Stuart's tau-c.
pub fn kendall_tau_c(r1: &Ranking, r2: &Ranking) -> Result<f64, RankError> {
    let (x, y) = check_pair(r1, r2)?;
    let c = pair_counts(&x, &y);
    let distinct = |v: &[u32]| v.iter().collect::<BTreeSet<_>>().len();
    let m = distinct(&x).min(distinct(&y)) as f64;
    if m < 2.0 {
        return Err(RankError::Constant);
    }
    let n = c.n as f64;
    Ok(2.0 * c.s() as f64 / (n * n * (m - 1.0) / m))
}

/// Two-sided p-value of tau-b under independence, by enumerating every
/// permutation of the second ranking's values.
pub fn tau_exact_pvalue(r1: &Ranking, r2: &Ranking) -> Result<f64, RankError> {
    let (x, y) = check_pair(r1, r2)?;
    if x.len() > EXACT_MAX_N {
        return Err(RankError::TooLargeForExact(x.len()));
    }
    let observed = tau_b_raw(&x, &y).ok_or(RankError::Constant)?.abs();
    let (mut hits, mut total) = (0u64, 0u64);
    let mut perm = y.clone();
    for_each_permutation(&mut perm, &mut |p| {
        total += 1;
        if tau_b_raw(&x, p).is_some_and(|t| t.abs() >= observed - 1e-12) {
            hits += 1;
        }
    });
    Ok(hits as f64 / total as f64)
}

/// Heap's algorithm.
fn for_each_permutation(v: &mut [u32], f: &mut impl FnMut(&[u32])) {
    let n = v.len();
    let mut c = vec![0usize; n];
    f(v);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            f(v);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn tie_groups(v: &[u32]) -> Vec<f64> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for r in v {
        *counts.entry(*r).or_default() += 1;
    }
    counts.into_values().filter(|&t| t > 1).map(|t| t as f64).collect()
}

/// Two-sided p-value from the normal approximation of S = C - D with the
/// tie-corrected variance.
pub fn tau_asymptotic_pvalue(r1: &Ranking, r2: &Ranking) -> Result<f64, RankError> {
    let (x, y) = check_pair(r1, r2)?;
    let c = pair_counts(&x, &y);
    let n = c.n as f64;
    let (tx, ty) = (tie_groups(&x), tie_groups(&y));
    let sum = |g: &[f64], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t)).sum::<f64>();
    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt = sum(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ty, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let mut var = (v0 - vt - vu) / 18.0;
    if n > 2.0 {
        var += sum(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ty, &|t| t * (t - 1.0) * (t - 2.0))
            / (9.0 * n * (n - 1.0) * (n - 2.0));
    }
    var += sum(&tx, &|t| t * (t - 1.0)) * sum(&ty, &|t| t * (t - 1.0)) / (2.0 * n * (n - 1.0));
    if var <= 0.0 {
        return Err(RankError::Constant);
    }
    let z = c.s() as f64 / var.sqrt();
    Ok(erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    /// Exact when both rankings are untied and n is small, else asymptotic.
    #[default]
    Auto,
    Exact,
    Asymptotic,
}

impl std::str::FromStr for PValueMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "exact" => Ok(Self::Exact),
            "asymptotic" => Ok(Self::Asymptotic),
            _ => Err(format!("unknown p-value method `{s}`")),
        }
    }
}

pub fn tau_pvalue(r1: &Ranking, r2: &Ranking, method: PValueMethod) -> Result<f64, RankError> {
    match method {
        PValueMethod::Exact => tau_exact_pvalue(r1, r2),
        PValueMethod::Asymptotic => tau_asymptotic_pvalue(r1, r2),
        PValueMethod::Auto if !r1.has_ties() && !r2.has_ties() && r1.len() <= EXACT_MAX_N => {
            tau_exact_pvalue(r1, r2)
        }
        PValueMethod::Auto => tau_asymptotic_pvalue(r1, r2),
    }
}

/// Named rankings over a shared item list, as in a `policy,<name>...` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingTable {
    pub items: Vec<String>,
    pub columns: Vec<(String, Ranking)>,
}

impl RankingTable {
    pub fn parse_csv(text: &str) -> Result<Self, RankError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(RankError::Parse { line: 1, message: "empty table".into() })?;
        let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        if names.is_empty() {
            return Err(RankError::Parse { line: 1, message: "no ranking columns".into() });
        }
        let mut items = Vec::new();
        let mut cols: Vec<Vec<(String, u32)>> = vec![Vec::new(); names.len()];
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != names.len() + 1 {
                return Err(RankError::Parse {
                    line: i + 1,
                    message: format!("expected {} fields, got {}", names.len() + 1, fields.len()),
                });
            }
            let item = fields[0].to_string();
            if items.contains(&item) {
                return Err(RankError::Parse { line: i + 1, message: format!("duplicate item `{item}`") });
            }
            for (col, f) in cols.iter_mut().zip(&fields[1..]) {
                let r: u32 = f.parse().map_err(|_| RankError::Parse {
                    line: i + 1,
                    message: format!("rank `{f}` is not a positive integer"),
                })?;
                col.push((item.clone(), r));
            }
            items.push(item);
        }
        let columns = names
            .into_iter()
            .zip(cols)
            .map(|(name, col)| Ok((name, Ranking::new(col)?)))
            .collect::<Result<Vec<_>, RankError>>()?;
        Ok(Self { items, columns })
    }

    pub fn bundled() -> Self {
        Self::parse_csv(BUNDLED_RANKINGS).expect("bundled table parses")
    }

    pub fn column(&self, name: &str) -> Option<&Ranking> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub name: String,
    pub tau_b: f64,
    /// Absent when n exceeds the exact-test limit.
    pub p_exact: Option<f64>,
    pub p_asymptotic: f64,
    pub p_auto: f64,
}

/// Agreement of every other column with `reference`.
pub fn compare_to(table: &RankingTable, reference: &str) -> Result<Vec<Agreement>, RankError> {
    let target = table.column(reference).ok_or(RankError::ItemMismatch)?;
    table
        .columns
        .iter()
        .filter(|(n, _)| n != reference)
        .map(|(name, r)| {
            Ok(Agreement {
                name: name.clone(),
                tau_b: kendall_tau_b(r, target)?,
                p_exact: match tau_exact_pvalue(r, target) {
                    Ok(p) => Some(p),
                    Err(RankError::TooLargeForExact(_)) => None,
                    Err(e) => return Err(e),
                },
                p_asymptotic: tau_asymptotic_pvalue(r, target)?,
                p_auto: tau_pvalue(r, target, PValueMethod::Auto)?,
            })
        })
        .collect()
}

pub fn agreements_csv(rows: &[Agreement]) -> String {
    let mut out = String::from("name,tau_b,p_exact,p_asymptotic,p_auto\n");
    for r in rows {
        let exact = r.p_exact.map(|p| format!("{p:.6}")).unwrap_or_default();
        out.push_str(&format!("{},{:.6},{},{:.6},{:.6}\n", r.name, r.tau_b, exact, r.p_asymptotic, r.p_auto));
    }
    out
}
