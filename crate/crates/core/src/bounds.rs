//! Numerical audit of the resolvent and projection estimates: brute-force
//! evaluation of each left side against its right side without the absolute
//! constant, and a seeded battery that fits those constants and checks their
//! stability under window doubling.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{BoundaryCondition, Lattice};
use crate::error::{Result, SpectralError};
use crate::potential::{PotentialSpec, RSequence};
use crate::resolvent::{circle_points, dominated_hs_norm_r, CIRCLE_SAMPLES};

/// Radius of the circles `C_n` in every estimate.
pub const CIRCLE_RADIUS: f64 = 0.5;

/// Largest relative change of a fitted constant under window doubling.
pub const REFINEMENT_TOL: f64 = 0.1;

/// Largest `n` and `N` in the elementary series checks.
pub const ELEMENTARY_LIMIT: i64 = 10_000;

/// One inequality `lhs <= C · rhs_without_constant` at a fixed set of parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs_without_constant: f64,
    pub ratio: f64,
    pub parameters: BTreeMap<String, f64>,
}

impl BoundCheck {
    pub fn new(name: &str, lhs: f64, rhs: f64, parameters: &[(&str, f64)]) -> Self {
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        BoundCheck {
            name: name.to_string(),
            lhs,
            rhs_without_constant: rhs,
            ratio,
            parameters: parameters.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn parameter(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).copied()
    }
}

/// Index set `{j on the lattice : |j| <= hi}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Window {
    lattice: Lattice,
    hi: i64,
}

impl Window {
    fn new(bc: BoundaryCondition, hi: i64) -> Self {
        Window {
            lattice: bc.spectral_lattice(),
            hi,
        }
    }

    fn contains(&self, j: i64) -> bool {
        j.abs() <= self.hi && self.lattice.contains(j)
    }

    fn iter(&self) -> impl Iterator<Item = i64> {
        self.lattice.range(-self.hi, self.hi)
    }

    /// Lattice points with `lo < |n| <= hi`.
    fn outer(&self, lo: i64) -> Vec<i64> {
        self.iter().filter(|n| n.abs() > lo).collect()
    }

    fn slot(&self, j: i64) -> usize {
        (j + self.hi) as usize
    }

    fn slots(&self) -> usize {
        2 * self.hi as usize + 1
    }
}

fn support(r: &RSequence) -> Vec<(i64, f64)> {
    r.values
        .iter()
        .filter(|(_, &v)| v > 0.0)
        .map(|(&m, &v)| (m, v))
        .collect()
}

/// `Σ_{k≠n} r(n+k)²/|n−k|`, exact over the finite support.
pub fn t1_sum(r: &RSequence, n: i64) -> f64 {
    support(r)
        .into_iter()
        .map(|(t, v)| (t - n, v))
        .filter(|&(k, _)| k != n)
        .map(|(k, v)| v * v / (n - k).abs() as f64)
        .sum()
}

/// `Σ_{i,k≠n} r(i+k)²/(|n−i||n−k|)` with `|i|, |k| <= window`.
pub fn t2_sum(r: &RSequence, n: i64, window: i64) -> f64 {
    let w = Window::new(r.bc, window);
    let supp = support(r);
    let mut total = 0.0;
    for i in w.iter().filter(|&i| i != n) {
        for &(t, v) in &supp {
            let k = t - i;
            if k != n && w.contains(k) {
                total += v * v / ((n - i).abs() as f64 * (n - k).abs() as f64);
            }
        }
    }
    total
}

/// Checks `t1` (the single sum against `‖r‖²`, constant one) and `t2` (the double
/// sum against its right side without the constant).
pub fn check_t_lemma1(r: &RSequence, n: i64, window: i64) -> Result<(BoundCheck, BoundCheck)> {
    check_index(r.bc, n)?;
    let norm2 = r.norm_sqr();
    let e = r.tail_norm(n.abs());
    let params = [("n", n as f64), ("window", window as f64)];
    let t1 = BoundCheck::new("t1", t1_sum(r, n), norm2 / n.abs() as f64 + e * e, &params);
    let t2 = BoundCheck::new(
        "t2",
        t2_sum(r, n, window),
        norm2 / (n.abs() as f64).sqrt() + e * e,
        &params,
    );
    Ok((t1, t2))
}

fn check_index(bc: BoundaryCondition, n: i64) -> Result<()> {
    if n == 0 {
        return Err(SpectralError::InvalidParameter("index n must be nonzero".into()));
    }
    let lattice = bc.spectral_lattice();
    if !lattice.contains(n) {
        return Err(SpectralError::ParityMismatch {
            index: n,
            lattice: lattice.name(),
        });
    }
    Ok(())
}

/// `Σ_{k≠n} r(n+k)²/|n−k|^power` for one `n`.
fn weighted_row(supp: &[(i64, f64)], n: i64, power: i32) -> f64 {
    supp.iter()
        .map(|&(t, v)| (t - n, v))
        .filter(|&(k, _)| k != n)
        .map(|(k, v)| v * v / ((n - k).abs() as f64).powi(power))
        .sum()
}

/// `Σ_{j,p≠n} r(j+p)²/(|n−j|^a |n−p|^2)` with `|j| <= window`.
fn pair_row(supp: &[(i64, f64)], w: &Window, n: i64, a: i32) -> f64 {
    let mut total = 0.0;
    for j in w.iter().filter(|&j| j != n) {
        let dj = ((n - j).abs() as f64).powi(a);
        for &(t, v) in supp {
            let p = t - j;
            if p != n {
                let dp = (n - p) as f64;
                total += v * v / (dj * dp * dp);
            }
        }
    }
    total
}

/// Checks `t11` to `t14`: the four outer sums over `N < |n| <= window`.
pub fn check_t_lemma2(r: &RSequence, cutoff: i64, window: i64) -> Result<Vec<BoundCheck>> {
    if cutoff < 1 {
        return Err(SpectralError::InvalidParameter(format!("N = {cutoff} must be at least 1")));
    }
    let w = Window::new(r.bc, window);
    let supp = support(r);
    let (mut s11, mut s12, mut s13, mut s14) = (0.0, 0.0, 0.0, 0.0);
    for n in w.outer(cutoff) {
        let a1 = weighted_row(&supp, n, 1);
        s11 += weighted_row(&supp, n, 2);
        s12 += a1 * a1;
        s13 += pair_row(&supp, &w, n, 2);
        s14 += a1 * pair_row(&supp, &w, n, 1);
    }
    let norm2 = r.norm_sqr();
    let e = r.tail_norm(cutoff);
    let base = norm2 / cutoff as f64 + e * e;
    let params = [("N", cutoff as f64), ("window", window as f64)];
    Ok(vec![
        BoundCheck::new("t11", s11, base, &params),
        BoundCheck::new("t12", s12, base * norm2, &params),
        BoundCheck::new("t13", s13, base, &params),
        BoundCheck::new("t14", s14, base * norm2, &params),
    ])
}

/// Largest sampled `Σ_{i,k} r(i+k)²/(|λ−i||λ−k|)` on `C_n`.
pub fn lemma2_lhs(r: &RSequence, n: i64, cutoff: usize, samples: usize) -> f64 {
    circle_points(n as f64, CIRCLE_RADIUS, samples)
        .into_iter()
        .map(|lam| dominated_hs_norm_r(r, lam, cutoff).powi(2))
        .fold(0.0, f64::max)
}

pub fn check_lemma2_r(r: &RSequence, n: i64, cutoff: usize, samples: usize) -> Result<BoundCheck> {
    check_index(r.bc, n)?;
    let e = r.tail_norm(n.abs());
    Ok(BoundCheck::new(
        "lemma2",
        lemma2_lhs(r, n, cutoff, samples),
        r.norm_sqr() / (n.abs() as f64).sqrt() + e * e,
        &[("n", n as f64), ("K", cutoff as f64), ("samples", samples as f64)],
    ))
}

pub fn check_lemma2(spec: &PotentialSpec, bc: BoundaryCondition, n: i64, cutoff: usize) -> Result<BoundCheck> {
    check_index(bc, n)?;
    check_lemma2_r(&spec.r_sequence(bc), n, cutoff, CIRCLE_SAMPLES)
}

/// Values of `B₁ … B₄` at one order `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BSums {
    pub s: usize,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// Absent for `s = 0`.
    pub b4: Option<f64>,
}

struct ChainContext<'a> {
    supp: &'a [(i64, f64)],
    w: Window,
    /// `r(t)` at slot `t + offset`.
    dense: Vec<f64>,
    offset: i64,
}

impl<'a> ChainContext<'a> {
    fn new(r: &RSequence, supp: &'a [(i64, f64)], window: i64) -> Self {
        let offset = r.support_bound();
        let mut dense = vec![0.0; 2 * offset as usize + 1];
        for &(t, v) in supp {
            dense[(t + offset) as usize] = v;
        }
        ChainContext {
            supp,
            w: Window::new(r.bc, window),
            dense,
            offset,
        }
    }

    fn r(&self, t: i64) -> f64 {
        if t.abs() > self.offset {
            0.0
        } else {
            self.dense[(t + self.offset) as usize]
        }
    }

    /// `x(k) = Σ_j B(λ, k, j…, n)` for every window `k`, written into `out`.
    fn gather_at(&self, s: usize, n: i64, dist: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let d = |j: i64| dist[self.w.slot(j)];
        match s {
            0 => {
                for &(t, v) in self.supp {
                    let k = t - n;
                    if self.w.contains(k) {
                        out[self.w.slot(k)] += v / (d(k) * d(n));
                    }
                }
            }
            _ => {
                for &(t1, v1) in self.supp {
                    let j = t1 - n;
                    if !self.w.contains(j) {
                        continue;
                    }
                    for &(t2, v2) in self.supp {
                        let k = t2 - j;
                        if self.w.contains(k) {
                            out[self.w.slot(k)] += v2 * v1 / (d(k) * d(j) * d(n));
                        }
                    }
                }
            }
        }
    }

    /// `y(m) = Σ_j B(λ, n, j…, m)` for every window `m`, enumerated from the far end.
    fn spread_from(&self, s: usize, n: i64, dist: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let d = |j: i64| dist[self.w.slot(j)];
        match s {
            0 => {
                for m in self.w.iter() {
                    let v = self.r(n + m);
                    if v > 0.0 {
                        out[self.w.slot(m)] = v / (d(n) * d(m));
                    }
                }
            }
            _ => {
                for m in self.w.iter() {
                    let mut acc = 0.0;
                    for &(t2, v2) in self.supp {
                        let j = t2 - m;
                        if !self.w.contains(j) {
                            continue;
                        }
                        let v1 = self.r(n + j);
                        if v1 > 0.0 {
                            acc += v1 * v2 / (d(n) * d(j) * d(m));
                        }
                    }
                    out[self.w.slot(m)] = acc;
                }
            }
        }
    }
}

/// Brute-force `B₁(s) … B₄(s)` with `sup_{λ∈C_n}` over `samples` circle points
/// and every index restricted to `|·| <= window`.
pub fn b_sums(r: &RSequence, s: usize, cutoff: i64, window: i64, samples: usize) -> Result<BSums> {
    if s > 1 {
        return Err(SpectralError::UnsupportedOrder(s));
    }
    let supp = support(r);
    let ctx = ChainContext::new(r, &supp, window);
    let w = ctx.w;
    let mut x = vec![0.0; w.slots()];
    let mut sup_in = vec![0.0; w.slots()];
    let mut sup_out = vec![0.0; w.slots()];
    let mut dist = vec![0.0; w.slots()];
    // (k, m) = (t₁ − n, t₂ − n) indexed by the positions of t₁, t₂ in the support
    let mut sup_pairs = vec![0.0f64; supp.len() * supp.len()];
    let (mut b1, mut b2, mut b3, mut b4) = (0.0, 0.0, 0.0, 0.0);
    for n in w.outer(cutoff) {
        let circle = circle_points(n as f64, CIRCLE_RADIUS, samples);
        sup_in.iter_mut().for_each(|v| *v = 0.0);
        sup_out.iter_mut().for_each(|v| *v = 0.0);
        sup_pairs.iter_mut().for_each(|v| *v = 0.0);
        for &lam in &circle {
            for j in -window..=window {
                dist[w.slot(j)] = (lam - j as f64).norm();
            }
            ctx.gather_at(s, n, &dist, &mut x);
            for (acc, &v) in sup_in.iter_mut().zip(&x) {
                *acc = f64::max(*acc, v);
            }
            ctx.spread_from(s, n, &dist, &mut x);
            for (acc, &v) in sup_out.iter_mut().zip(&x) {
                *acc = f64::max(*acc, v);
            }
            if s == 1 {
                let d = |j: i64| dist[w.slot(j)];
                for (a, &(t1, v1)) in supp.iter().enumerate() {
                    let k = t1 - n;
                    if k == n || !w.contains(k) {
                        continue;
                    }
                    for (b, &(t2, v2)) in supp.iter().enumerate() {
                        let m = t2 - n;
                        if m == n || !w.contains(m) {
                            continue;
                        }
                        let entry = &mut sup_pairs[a * supp.len() + b];
                        *entry = entry.max(v1 * v2 / (d(k) * d(n) * d(m)));
                    }
                }
            }
        }
        let own = w.slot(n);
        b1 += sup_in[own] * sup_in[own];
        for j in w.iter().filter(|&j| j != n) {
            let (a, b) = (sup_in[w.slot(j)], sup_out[w.slot(j)]);
            b2 += a * a;
            b3 += b * b;
        }
        b4 += sup_pairs.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(BSums {
        s,
        b1,
        b2,
        b3,
        b4: (s >= 1).then_some(b4),
    })
}

/// `B₁(0)` in closed form: `16 Σ_{N<|n|<=window} r(2n)²` over spectral-lattice `n`.
pub fn b1_zero_closed_form(r: &RSequence, cutoff: i64, window: i64) -> f64 {
    let denom = CIRCLE_RADIUS.powi(4);
    Window::new(r.bc, window)
        .outer(cutoff)
        .into_iter()
        .map(|n| r.get(2 * n).powi(2) / denom)
        .sum()
}

pub fn check_prop1_r(r: &RSequence, s: usize, cutoff: i64, window: i64, samples: usize) -> Result<Vec<BoundCheck>> {
    if cutoff < 1 {
        return Err(SpectralError::InvalidParameter(format!("N = {cutoff} must be at least 1")));
    }
    let sums = b_sums(r, s, cutoff, window, samples)?;
    let norm2 = r.norm_sqr();
    let rho2 = r.rho(cutoff).powi(2);
    let rhs = norm2 * rho2.powi(s as i32);
    let params = [
        ("s", s as f64),
        ("N", cutoff as f64),
        ("window", window as f64),
        ("samples", samples as f64),
    ];
    let mut out = vec![
        BoundCheck::new(&format!("b1.s{s}"), sums.b1, rhs, &params),
        BoundCheck::new(&format!("b2.s{s}"), sums.b2, rhs, &params),
        BoundCheck::new(&format!("b3.s{s}"), sums.b3, rhs, &params),
    ];
    if let Some(b4) = sums.b4 {
        let rhs4 = s as f64 * norm2 * norm2 * rho2.powi(s as i32 - 1);
        out.push(BoundCheck::new(&format!("b4.s{s}"), b4, rhs4, &params));
    }
    Ok(out)
}

/// `B₁ … B₄` at order `s` over the window `|·| <= K`.
pub fn check_prop1(
    spec: &PotentialSpec,
    bc: BoundaryCondition,
    s: usize,
    cutoff: i64,
    window: i64,
) -> Result<Vec<BoundCheck>> {
    check_prop1_r(&spec.r_sequence(bc), s, cutoff, window, CIRCLE_SAMPLES)
}

/// Upper bound for `Σ_{n>N} 1/n²`: exact summation to `terms` plus the tail bound `1/terms`.
fn inverse_square_tails(limit: i64, terms: i64) -> Vec<f64> {
    let mut tails = vec![0.0; limit as usize + 1];
    let mut acc = 1.0 / terms as f64;
    for n in (1..=terms).rev() {
        if n <= limit {
            tails[n as usize] = acc;
        }
        acc += 1.0 / (n as f64 * n as f64);
    }
    tails
}

/// Upper bound for `Σ_{p∈ℤ, p≠±n} 1/(n²−p²)²`: exact summation over `|p| <= T`
/// with `T >= 2n`, plus the tail bound `2·(16/9)/(3T³)`.
pub fn t00_sum(n: i64) -> f64 {
    let t = 2 * n + 64;
    let n2 = (n * n) as f64;
    let mut acc = 1.0 / (n2 * n2);
    for p in 1..=t {
        if p == n {
            continue;
        }
        let d = n2 - (p * p) as f64;
        acc += 2.0 / (d * d);
    }
    acc + 2.0 * (16.0 / 9.0) / (3.0 * (t as f64).powi(3))
}

/// Checks `t0` (`Σ_{n>N} 1/n² <= 1/N`) and `t00` (the `1/(n²−p²)²` sum against `4/n²`)
/// for every `N, n` in `[1, limit]`.
pub fn check_elementary_up_to(limit: i64) -> Vec<BoundCheck> {
    let tails = inverse_square_tails(limit, 100 * limit.max(1_000));
    let mut out = Vec::with_capacity(2 * limit as usize);
    for n in 1..=limit {
        out.push(BoundCheck::new("t0", tails[n as usize], 1.0 / n as f64, &[("N", n as f64)]));
    }
    for n in 1..=limit {
        out.push(BoundCheck::new("t00", t00_sum(n), 4.0 / (n * n) as f64, &[("n", n as f64)]));
    }
    out
}

pub fn check_elementary() -> Vec<BoundCheck> {
    check_elementary_up_to(ELEMENTARY_LIMIT)
}

/// Seeded random battery. Potentials are drawn with `PotentialSpec::random_trig`
/// from `ChaCha8Rng::seed_from_u64(seed)`; the `t1` cases use the stream `1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub seed: u64,
    pub draws: usize,
    pub modes: i64,
    pub norm: f64,
    /// Base window; every constant-bearing check is repeated at twice this value.
    pub window: i64,
    pub cutoffs: Vec<i64>,
    pub t1_cases: usize,
    pub t1_support: i64,
    pub t1_max_n: i64,
    pub samples: usize,
    pub elementary_limit: i64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 0,
            draws: 20,
            modes: 8,
            norm: 1.0,
            window: 64,
            cutoffs: vec![4, 8],
            t1_cases: 1000,
            t1_support: 32,
            t1_max_n: 64,
            samples: CIRCLE_SAMPLES,
            elementary_limit: ELEMENTARY_LIMIT,
        }
    }
}

/// Fitted constant of one family of checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: String,
    pub checks: usize,
    pub max_ratio: f64,
    /// Largest ratio at the doubled window.
    pub max_ratio_refined: Option<f64>,
    pub refinement_change: Option<f64>,
    /// Hard upper limit on every ratio, for constant-free inequalities.
    pub limit: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub config: BatteryConfig,
    pub checks: Vec<BoundCheck>,
    pub families: Vec<FamilySummary>,
    /// `max |ratio(B₂(1)) − ratio(B₃(1))|`.
    pub b2_b3_gap: f64,
    /// `max |B₁(0) − 16 Σ r(2n)²|`.
    pub b1_zero_closed_form_gap: f64,
    /// `max |B₁(0) − 4 E_N(r)²|`.
    pub b1_zero_tail_gap: f64,
}

impl BatteryReport {
    pub fn family(&self, name: &str) -> Option<&FamilySummary> {
        self.families.iter().find(|f| f.family == name)
    }

    /// True when every constant-free inequality holds.
    pub fn hard_checks_pass(&self) -> bool {
        self.families.iter().filter(|f| f.limit.is_some()).all(|f| f.passed)
    }

    /// True when every fitted constant moves by at most `REFINEMENT_TOL` under doubling.
    pub fn constants_stable(&self) -> bool {
        self.families
            .iter()
            .filter_map(|f| f.refinement_change)
            .all(|c| c <= REFINEMENT_TOL)
    }
}

/// Random `r` for the `t1` property: a few positive masses on the envelope lattice.
pub fn random_r_sequence<R: Rng + ?Sized>(rng: &mut R, bc: BoundaryCondition, support: i64) -> RSequence {
    let lattice = bc.envelope_lattice();
    let points: Vec<i64> = lattice.range(-support, support).collect();
    let count = rng.random_range(1..=8usize);
    let mut values = BTreeMap::new();
    for _ in 0..count {
        let m = *points.choose(rng).expect("nonempty lattice");
        values.insert(m, rng.random_range(0.0..1.0f64).max(f64::MIN_POSITIVE));
    }
    RSequence { bc, values }
}

fn random_index<R: Rng + ?Sized>(rng: &mut R, bc: BoundaryCondition, max_n: i64) -> i64 {
    let choices = bc.shell(0, max_n);
    *choices.choose(rng).expect("nonempty shell")
}

fn summarize(family: &str, base: &[&BoundCheck], refined: &[&BoundCheck], limit: Option<f64>) -> FamilySummary {
    let max = |set: &[&BoundCheck]| set.iter().map(|c| c.ratio).fold(0.0, f64::max);
    let max_ratio = max(base);
    let (max_ratio_refined, refinement_change) = if refined.is_empty() {
        (None, None)
    } else {
        let m = max(refined);
        let change = if max_ratio > 0.0 {
            (m - max_ratio).abs() / max_ratio
        } else if m == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        (Some(m), Some(change))
    };
    let all_finite = base.iter().chain(refined).all(|c| c.ratio.is_finite());
    let passed = all_finite
        && match limit {
            Some(l) => base.iter().all(|c| c.ratio < l || c.lhs == 0.0),
            None => refinement_change.is_none_or(|c| c <= REFINEMENT_TOL),
        };
    FamilySummary {
        family: family.to_string(),
        checks: base.len() + refined.len(),
        max_ratio,
        max_ratio_refined,
        refinement_change,
        limit,
        passed,
    }
}

pub fn run_battery(config: &BatteryConfig) -> Result<BatteryReport> {
    if config.window < 2 * config.cutoffs.iter().copied().max().unwrap_or(1) {
        return Err(SpectralError::InvalidParameter(format!(
            "window {} must be at least twice every cutoff",
            config.window
        )));
    }
    let mut checks = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    for _ in 0..config.t1_cases {
        let bc = *BoundaryCondition::ALL.choose(&mut rng).expect("three conditions");
        let r = random_r_sequence(&mut rng, bc, config.t1_support);
        let n = random_index(&mut rng, bc, config.t1_max_n);
        checks.push(check_t_lemma1(&r, n, config.window)?.0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut b2_b3_gap: f64 = 0.0;
    let mut closed_gap: f64 = 0.0;
    let mut tail_gap: f64 = 0.0;
    for draw in 0..config.draws {
        let spec = PotentialSpec::random_trig(&mut rng, config.modes, config.norm);
        for bc in BoundaryCondition::ALL {
            let r = spec.r_sequence(bc);
            for window in [config.window, 2 * config.window] {
                let tag = |mut c: BoundCheck| {
                    c.parameters.insert("draw".into(), draw as f64);
                    c.parameters.insert("bc".into(), bc_code(bc));
                    c.parameters.insert("window".into(), window as f64);
                    c
                };
                for n in bc.shell(0, window / 2) {
                    checks.push(tag(check_t_lemma1(&r, n, window)?.1));
                }
                for n in bc.shell(7, window / 2) {
                    checks.push(tag(check_lemma2_r(&r, n, window as usize, config.samples)?));
                }
                for &cutoff in &config.cutoffs {
                    checks.extend(check_t_lemma2(&r, cutoff, window)?.into_iter().map(tag));
                    let zero = check_prop1_r(&r, 0, cutoff, window, config.samples)?;
                    let one = check_prop1_r(&r, 1, cutoff, window, config.samples)?;
                    let b1 = zero[0].lhs;
                    closed_gap = closed_gap.max((b1 - b1_zero_closed_form(&r, cutoff, window)).abs());
                    tail_gap = tail_gap.max((b1 - 4.0 * r.tail_norm(cutoff).powi(2)).abs());
                    b2_b3_gap = b2_b3_gap.max((one[1].ratio - one[2].ratio).abs());
                    checks.extend(zero.into_iter().chain(one).map(|c| {
                        let mut c = tag(c);
                        c.name = format!("prop1.{}", c.name);
                        c
                    }));
                }
            }
        }
    }
    checks.extend(check_elementary_up_to(config.elementary_limit));

    let mut families = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for c in &checks {
        if !names.contains(&c.name) {
            names.push(c.name.clone());
        }
    }
    for name in names {
        let members: Vec<&BoundCheck> = checks.iter().filter(|c| c.name == name).collect();
        let limit = matches!(name.as_str(), "t1" | "t0" | "t00").then_some(1.0);
        let (base, refined): (Vec<&BoundCheck>, Vec<&BoundCheck>) = if limit.is_some() {
            (members, Vec::new())
        } else {
            members
                .into_iter()
                .partition(|c| c.parameter("window") == Some(config.window as f64))
        };
        families.push(summarize(&name, &base, &refined, limit));
    }

    Ok(BatteryReport {
        config: config.clone(),
        checks,
        families,
        b2_b3_gap,
        b1_zero_closed_form_gap: closed_gap,
        b1_zero_tail_gap: tail_gap,
    })
}

/// Numeric tag of a boundary condition in check parameters.
pub fn bc_code(bc: BoundaryCondition) -> f64 {
    match bc {
        BoundaryCondition::PeriodicPlus => 0.0,
        BoundaryCondition::PeriodicMinus => 1.0,
        BoundaryCondition::Dirichlet => 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn r_of(bc: BoundaryCondition, pairs: &[(i64, f64)]) -> RSequence {
        RSequence::new(bc, pairs.iter().copied().collect()).unwrap()
    }

    fn random_r(seed: u64, bc: BoundaryCondition) -> RSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PotentialSpec::random_trig(&mut rng, 6, 1.0).r_sequence(bc)
    }

    /// Dense enumeration of every index in the window, with the supremum taken per outer pair.
    fn dense_b_sums(r: &RSequence, s: usize, cutoff: i64, window: i64, samples: usize) -> BSums {
        let idx: Vec<i64> = r.bc.spectral_lattice().range(-window, window).collect();
        let chain = |lam: Complex64, k: i64, m: i64, n: i64, star: bool| -> f64 {
            let d = |j: i64| (lam - j as f64).norm();
            if s == 0 {
                return r.get(k + m) / (d(k) * d(m));
            }
            idx.iter()
                .filter(|&&j| !star || j == n)
                .map(|&j| r.get(k + j) * r.get(j + m) / (d(k) * d(j) * d(m)))
                .sum()
        };
        let (mut b1, mut b2, mut b3, mut b4) = (0.0, 0.0, 0.0, 0.0);
        for &n in idx.iter().filter(|n| n.abs() > cutoff) {
            let circle = circle_points(n as f64, CIRCLE_RADIUS, samples);
            let sup = |k: i64, m: i64, star: bool| {
                circle.iter().map(|&l| chain(l, k, m, n, star)).fold(0.0, f64::max)
            };
            b1 += sup(n, n, false).powi(2);
            for &k in idx.iter().filter(|&&k| k != n) {
                b2 += sup(k, n, false).powi(2);
                b3 += sup(n, k, false).powi(2);
                if s == 1 {
                    for &m in idx.iter().filter(|&&m| m != n) {
                        b4 += sup(k, m, true).powi(2);
                    }
                }
            }
        }
        BSums { s, b1, b2, b3, b4: (s == 1).then_some(b4) }
    }

    #[test]
    fn zero_sequence_gives_zero_everywhere() {
        for bc in BoundaryCondition::ALL {
            let r = r_of(bc, &[]);
            let n = bc.shell(0, 4)[0];
            let (t1, t2) = check_t_lemma1(&r, n, 16).unwrap();
            assert_eq!((t1.lhs, t1.ratio, t2.lhs, t2.ratio), (0.0, 0.0, 0.0, 0.0));
            for c in check_t_lemma2(&r, 2, 16).unwrap() {
                assert_eq!((c.lhs, c.ratio), (0.0, 0.0));
            }
            for s in 0..=1 {
                for c in check_prop1_r(&r, s, 2, 16, 16).unwrap() {
                    assert_eq!((c.lhs, c.ratio), (0.0, 0.0));
                }
            }
            let c = check_lemma2(&PotentialSpec::zero(), bc, n, 16).unwrap();
            assert_eq!((c.lhs, c.ratio), (0.0, 0.0));
        }
    }

    #[test]
    fn t1_two_masses_by_hand() {
        let r = r_of(BoundaryCondition::PeriodicPlus, &[(-2, 1.0), (2, 1.0)]);
        let (t1, _) = check_t_lemma1(&r, 4, 32).unwrap();
        assert!((t1.lhs - (1.0 / 6.0 + 1.0 / 10.0)).abs() < 1e-14);
        assert!((t1.rhs_without_constant - 0.5).abs() < 1e-14);
        assert!(t1.ratio < 1.0);
    }

    #[test]
    fn t2_matches_dense_enumeration() {
        let r = random_r(2, BoundaryCondition::Dirichlet);
        let window = 20;
        let n = 3;
        let mut expected = 0.0;
        for i in -window..=window {
            for k in -window..=window {
                if i != n && k != n {
                    expected += r.get(i + k).powi(2) / ((n - i).abs() * (n - k).abs()) as f64;
                }
            }
        }
        assert!((t2_sum(&r, n, window) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn t11_single_mode_by_hand() {
        let r = r_of(BoundaryCondition::PeriodicPlus, &[(0, 1.0)]);
        let checks = check_t_lemma2(&r, 3, 40).unwrap();
        let hand: f64 = (4..=40)
            .filter(|n| n % 2 == 0)
            .map(|n| 2.0 / (4.0 * (n * n) as f64))
            .sum();
        assert!((checks[0].lhs - hand).abs() < 1e-14);
        assert!((checks[1].lhs - hand).abs() < 1e-14);
    }

    #[test]
    fn t13_and_t14_match_dense_enumeration() {
        let r = random_r(4, BoundaryCondition::PeriodicMinus);
        let (cutoff, window) = (3, 15);
        let idx: Vec<i64> = Lattice::Odd.range(-window, window).collect();
        let (mut s13, mut s14) = (0.0, 0.0);
        for &n in idx.iter().filter(|n| n.abs() > cutoff) {
            for &j in idx.iter().filter(|&&j| j != n) {
                for p in (-3 * window..=3 * window).filter(|&p| p != n && Lattice::Odd.contains(p)) {
                    let a = r.get(j + p).powi(2);
                    let dj = (n - j).abs() as f64;
                    let dp = ((n - p) as f64).powi(2);
                    s13 += a / (dj * dj * dp);
                    for &i in idx.iter().filter(|&&i| i != n) {
                        s14 += r.get(n + i).powi(2) * a / ((n - i).abs() as f64 * dj * dp);
                    }
                }
            }
        }
        let checks = check_t_lemma2(&r, cutoff, window).unwrap();
        assert!((checks[2].lhs - s13).abs() < 1e-12 * s13);
        // The i-sum in the code is unrestricted over the finite support.
        assert!(checks[3].lhs >= s14 * (1.0 - 1e-12));
    }

    #[test]
    fn b_sums_match_dense_enumeration() {
        for (seed, bc) in [(1, BoundaryCondition::Dirichlet), (2, BoundaryCondition::PeriodicPlus)] {
            let r = random_r(seed, bc);
            for s in 0..=1 {
                let fast = b_sums(&r, s, 2, 12, 8).unwrap();
                let slow = dense_b_sums(&r, s, 2, 12, 8);
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.max(1.0);
                assert!(close(fast.b1, slow.b1), "{bc} s={s}");
                assert!(close(fast.b2, slow.b2), "{bc} s={s}");
                assert!(close(fast.b3, slow.b3), "{bc} s={s}");
                if s == 1 {
                    assert!(close(fast.b4.unwrap(), slow.b4.unwrap()), "{bc}");
                } else {
                    assert!(fast.b4.is_none());
                }
            }
        }
    }

    #[test]
    fn b1_zero_closed_form_and_b2_b3_symmetry() {
        for (seed, bc) in BoundaryCondition::ALL.into_iter().enumerate() {
            let r = random_r(seed as u64 + 10, bc);
            let zero = b_sums(&r, 0, 1, 32, 16).unwrap();
            assert!((zero.b1 - b1_zero_closed_form(&r, 1, 32)).abs() < 1e-12);
            let one = check_prop1_r(&r, 1, 2, 32, 16).unwrap();
            assert!((one[1].ratio - one[2].ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn higher_orders_are_refused() {
        let r = random_r(0, BoundaryCondition::Dirichlet);
        assert!(matches!(b_sums(&r, 2, 1, 8, 4), Err(SpectralError::UnsupportedOrder(2))));
        assert!(check_t_lemma1(&r, 0, 8).is_err());
        assert!(matches!(
            check_t_lemma1(&random_r(0, BoundaryCondition::PeriodicPlus), 3, 8),
            Err(SpectralError::ParityMismatch { .. })
        ));
    }

    #[test]
    fn lemma2_single_mode_by_hand() {
        let spec = PotentialSpec::from_even_coefficients(
            BTreeMap::from([(2, Complex64::new(1.0, 0.0))]),
            BTreeMap::new(),
            4,
        )
        .unwrap();
        let bc = BoundaryCondition::PeriodicPlus;
        let k = 16;
        let check = check_lemma2(&spec, bc, 8, k).unwrap();
        let lattice: Vec<i64> = (-2 * k as i64..=2 * k as i64).filter(|n| n % 2 == 0).collect();
        let hand = circle_points(8.0, 0.5, CIRCLE_SAMPLES)
            .into_iter()
            .map(|lam| {
                let d = |j: i64| (lam - j as f64).norm();
                let mut total = 0.0;
                for &i in &lattice {
                    for s in [-2, 2] {
                        let k = s - i;
                        if lattice.contains(&k) {
                            total += 1.0 / (d(i) * d(k));
                        }
                    }
                }
                total
            })
            .fold(0.0, f64::max);
        assert!((check.lhs - hand).abs() < 1e-12 * hand);
        assert!((check.rhs_without_constant - 2.0 / 8f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn elementary_series() {
        let checks = check_elementary_up_to(200);
        let t0_one = &checks[0];
        let exact = std::f64::consts::PI.powi(2) / 6.0 - 1.0;
        assert!(t0_one.lhs >= exact && t0_one.lhs - exact < 1e-6);
        let direct: f64 = (-200_000i64..=200_000)
            .filter(|p| p.abs() != 1)
            .map(|p| 1.0 / ((1 - p * p) as f64).powi(2))
            .sum();
        assert!(t00_sum(1) >= direct && t00_sum(1) - direct < 1e-5);
        assert!(checks.iter().all(|c| c.ratio < 1.0));
    }

    #[test]
    fn small_battery_is_deterministic() {
        let config = BatteryConfig {
            draws: 2,
            window: 16,
            cutoffs: vec![2],
            t1_cases: 50,
            elementary_limit: 50,
            ..BatteryConfig::default()
        };
        let a = run_battery(&config).unwrap();
        let b = run_battery(&config).unwrap();
        assert_eq!(a, b);
        assert!(a.hard_checks_pass());
        assert_eq!(a.family("t1").unwrap().checks, 50);
        assert!(a.b2_b3_gap < 1e-12);
        assert!(a.b1_zero_closed_form_gap < 1e-12);
        for name in ["t2", "t11", "t12", "t13", "t14", "lemma2", "prop1.b1.s0", "prop1.b4.s1"] {
            let f = a.family(name).unwrap();
            assert!(f.max_ratio.is_finite() && f.refinement_change.is_some(), "{name}");
        }
    }
}
