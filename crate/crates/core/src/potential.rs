//! Potentials `v = [[0, P], [Q, 0]]` stored as finite Fourier coefficient maps.
//!
//! Coefficients use the weighted inner product `(1/π)∫₀^π`, so
//! `p(m) = (1/π)∫₀^π P(x) e^{-imx} dx` for even `m` and `p₁(m)` the same
//! integral for odd `m`. Both families are complete in `L²[0, π]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{BoundaryCondition, Lattice};
use crate::error::{Result, SpectralError};

pub type CoefficientMap = BTreeMap<i64, Complex64>;

/// Coefficients below this fraction of the sample RMS are treated as roundoff.
const PRUNE_RELATIVE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub p_even: CoefficientMap,
    pub q_even: CoefficientMap,
    pub p_odd: CoefficientMap,
    pub q_odd: CoefficientMap,
    pub max_mode: i64,
}

fn get(map: &CoefficientMap, m: i64) -> Complex64 {
    map.get(&m).copied().unwrap_or_default()
}

fn check_parity(map: &CoefficientMap, lattice: Lattice) -> Result<()> {
    for (&m, c) in map {
        if !lattice.contains(m) {
            return Err(SpectralError::ParityMismatch {
                index: m,
                lattice: lattice.name(),
            });
        }
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "non-finite coefficient at m = {m}"
            )));
        }
    }
    Ok(())
}

fn support_bound(maps: [&CoefficientMap; 4]) -> i64 {
    maps.iter()
        .flat_map(|m| m.keys())
        .map(|k| k.abs())
        .max()
        .unwrap_or(0)
}

fn squared_sum(map: &CoefficientMap) -> f64 {
    map.values().map(|c| c.norm_sqr()).sum()
}

/// `(1/M) Σ_j f(x_j) e^{-imx_j}` on the left-endpoint grid `x_j = πj/M`.
fn discrete_coefficient(samples: &[Complex64], m: i64) -> Complex64 {
    let len = samples.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &f) in samples.iter().enumerate() {
        let phase = (m * j as i64).rem_euclid(2 * len as i64) as f64 * PI / len as f64;
        acc += f * Complex64::from_polar(1.0, -phase);
    }
    acc / len as f64
}

fn check_finite(samples: &[Complex64]) -> Result<()> {
    match samples
        .iter()
        .position(|c| !(c.re.is_finite() && c.im.is_finite()))
    {
        Some(index) => Err(SpectralError::NonFiniteInput { index }),
        None => Ok(()),
    }
}

/// Integral of a trigonometric polynomial on the even lattice against `e^{-imx}`, `m` odd.
fn odd_from_even(even: &CoefficientMap, m: i64) -> Complex64 {
    even.iter()
        .map(|(&k, &c)| c * Complex64::new(0.0, 2.0 / (PI * (k - m) as f64)))
        .sum()
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec {
            p_even: BTreeMap::new(),
            q_even: BTreeMap::new(),
            p_odd: BTreeMap::new(),
            q_odd: BTreeMap::new(),
            max_mode: 0,
        }
    }

    /// All four maps given explicitly. Parities are validated; `max_mode` is the support bound.
    pub fn from_coefficients(
        p_even: CoefficientMap,
        q_even: CoefficientMap,
        p_odd: CoefficientMap,
        q_odd: CoefficientMap,
    ) -> Result<Self> {
        check_parity(&p_even, Lattice::Even)?;
        check_parity(&q_even, Lattice::Even)?;
        check_parity(&p_odd, Lattice::Odd)?;
        check_parity(&q_odd, Lattice::Odd)?;
        let max_mode = support_bound([&p_even, &q_even, &p_odd, &q_odd]);
        Ok(PotentialSpec {
            p_even,
            q_even,
            p_odd,
            q_odd,
            max_mode,
        })
    }

    /// Trigonometric polynomial given by its even-lattice coefficients.
    ///
    /// The odd-lattice maps are the exact integrals
    /// `p₁(m) = Σ_k p(k)·2i/(π(k−m))`, kept for odd `|m| <= odd_max_mode`.
    pub fn from_even_coefficients(
        p_even: CoefficientMap,
        q_even: CoefficientMap,
        odd_max_mode: i64,
    ) -> Result<Self> {
        check_parity(&p_even, Lattice::Even)?;
        check_parity(&q_even, Lattice::Even)?;
        let odd = |even: &CoefficientMap| -> CoefficientMap {
            if even.is_empty() {
                return BTreeMap::new();
            }
            Lattice::Odd
                .range(-odd_max_mode, odd_max_mode)
                .map(|m| (m, odd_from_even(even, m)))
                .collect()
        };
        let p_odd = odd(&p_even);
        let q_odd = odd(&q_even);
        Self::from_coefficients(p_even, q_even, p_odd, q_odd)
    }

    /// Discrete Fourier sums over `M` uniform left-endpoint samples `x_j = πj/M`.
    ///
    /// Every mode of the `M`-point discrete window is kept on both lattices
    /// (even `m ∈ [−M, M)`, odd `m ∈ [−M+1, M−1]` shifted accordingly), so the
    /// discrete Parseval identity holds on each lattice to roundoff.
    /// `max_mode` is the highest frequency the caller needs resolved and
    /// requires `M >= 4·max_mode`.
    pub fn from_samples(
        samples_p: &[Complex64],
        samples_q: &[Complex64],
        max_mode: i64,
    ) -> Result<Self> {
        if samples_p.len() != samples_q.len() {
            return Err(SpectralError::LengthMismatch {
                left: samples_p.len(),
                right: samples_q.len(),
            });
        }
        let len = samples_p.len();
        let required = (4 * max_mode.max(1)) as usize;
        if len < required {
            return Err(SpectralError::InsufficientResolution {
                required,
                provided: len,
                max_mode,
            });
        }
        check_finite(samples_p)?;
        check_finite(samples_q).map_err(|e| match e {
            SpectralError::NonFiniteInput { index } => SpectralError::NonFiniteInput {
                index: index + len,
            },
            other => other,
        })?;

        let half = len as i64;
        let rms = |s: &[Complex64]| (s.iter().map(|c| c.norm_sqr()).sum::<f64>() / len as f64).sqrt();
        let transform = |samples: &[Complex64], lattice: Lattice| -> CoefficientMap {
            let floor = PRUNE_RELATIVE * rms(samples);
            let lo = match lattice {
                Lattice::Even => -half,
                _ => -half + 1,
            };
            lattice
                .range(lo, lo + 2 * half - 1)
                .map(|m| (m, discrete_coefficient(samples, m)))
                .filter(|(_, c)| c.norm() > floor)
                .collect()
        };
        let p_even = transform(samples_p, Lattice::Even);
        let q_even = transform(samples_q, Lattice::Even);
        let p_odd = transform(samples_p, Lattice::Odd);
        let q_odd = transform(samples_q, Lattice::Odd);
        Self::from_coefficients(p_even, q_even, p_odd, q_odd)
    }

    /// Random trigonometric polynomial: i.i.d. standard complex Gaussian
    /// coefficients on every map for `|m| <= modes`, each lattice rescaled so
    /// that its coefficient norm equals `norm`.
    pub fn random_trig<R: Rng + ?Sized>(rng: &mut R, modes: i64, norm: f64) -> Self {
        let mut draw = |lattice: Lattice| -> CoefficientMap {
            lattice
                .range(-modes, modes)
                .map(|m| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    (m, Complex64::new(re, im))
                })
                .collect()
        };
        let mut p_even = draw(Lattice::Even);
        let mut q_even = draw(Lattice::Even);
        let mut p_odd = draw(Lattice::Odd);
        let mut q_odd = draw(Lattice::Odd);
        for (a, b) in [(&mut p_even, &mut q_even), (&mut p_odd, &mut q_odd)] {
            let total = (squared_sum(a) + squared_sum(b)).sqrt();
            let factor = if total > 0.0 { norm / total } else { 0.0 };
            a.values_mut().chain(b.values_mut()).for_each(|c| *c *= factor);
        }
        let max_mode = support_bound([&p_even, &q_even, &p_odd, &q_odd]);
        PotentialSpec {
            p_even,
            q_even,
            p_odd,
            q_odd,
            max_mode,
        }
    }

    pub fn p(&self, m: i64) -> Complex64 {
        if Lattice::Even.contains(m) {
            get(&self.p_even, m)
        } else {
            get(&self.p_odd, m)
        }
    }

    pub fn q(&self, m: i64) -> Complex64 {
        if Lattice::Even.contains(m) {
            get(&self.q_even, m)
        } else {
            get(&self.q_odd, m)
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        let scale = |map: &CoefficientMap| map.iter().map(|(&m, &c)| (m, c * t)).collect();
        PotentialSpec {
            p_even: scale(&self.p_even),
            q_even: scale(&self.q_even),
            p_odd: scale(&self.p_odd),
            q_odd: scale(&self.q_odd),
            max_mode: self.max_mode,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let sum = |a: &CoefficientMap, b: &CoefficientMap| {
            let mut out = a.clone();
            for (&m, &c) in b {
                *out.entry(m).or_default() += c;
            }
            out
        };
        PotentialSpec {
            p_even: sum(&self.p_even, &other.p_even),
            q_even: sum(&self.q_even, &other.q_even),
            p_odd: sum(&self.p_odd, &other.p_odd),
            q_odd: sum(&self.q_odd, &other.q_odd),
            max_mode: self.max_mode.max(other.max_mode),
        }
    }

    /// `‖v‖ = (Σ_even |p(m)|² + |q(m)|²)^{1/2}`.
    pub fn potential_norm(&self) -> f64 {
        (squared_sum(&self.p_even) + squared_sum(&self.q_even)).sqrt()
    }

    /// Same norm computed on the odd lattice.
    pub fn odd_norm(&self) -> f64 {
        (squared_sum(&self.p_odd) + squared_sum(&self.q_odd)).sqrt()
    }

    /// `W(m) = (p(−m) + q(m))/2`, with the odd-lattice maps for odd `m`.
    pub fn dirichlet_w(&self, m: i64) -> Complex64 {
        (self.p(-m) + self.q(m)) * 0.5
    }

    /// Dominating sequence.
    pub fn r_sequence(&self, bc: BoundaryCondition) -> RSequence {
        let mut values = BTreeMap::new();
        match bc {
            BoundaryCondition::Dirichlet => {
                let keys = self
                    .p_even
                    .keys()
                    .chain(self.p_odd.keys())
                    .map(|&m| -m)
                    .chain(self.q_even.keys().copied())
                    .chain(self.q_odd.keys().copied());
                for m in keys {
                    let w = self.dirichlet_w(m).norm();
                    if w > 0.0 {
                        values.insert(m, w);
                    }
                }
            }
            _ => {
                let keys = self
                    .p_even
                    .keys()
                    .chain(self.q_even.keys())
                    .flat_map(|&m| [m, -m]);
                for m in keys {
                    let p = get(&self.p_even, m).norm().max(get(&self.p_even, -m).norm());
                    let q = get(&self.q_even, m).norm().max(get(&self.q_even, -m).norm());
                    if p + q > 0.0 {
                        values.insert(m, p + q);
                    }
                }
            }
        }
        RSequence { bc, values }
    }

    pub fn rho(&self, bc: BoundaryCondition, n: i64) -> f64 {
        self.r_sequence(bc).rho(n)
    }
}

/// Nonnegative finitely supported sequence on the envelope lattice of `bc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RSequence {
    pub bc: BoundaryCondition,
    pub values: BTreeMap<i64, f64>,
}

impl RSequence {
    pub fn new(bc: BoundaryCondition, values: BTreeMap<i64, f64>) -> Result<Self> {
        let lattice = bc.envelope_lattice();
        for (&m, &v) in &values {
            if !lattice.contains(m) {
                return Err(SpectralError::ParityMismatch {
                    index: m,
                    lattice: lattice.name(),
                });
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(SpectralError::InvalidParameter(format!(
                    "r({m}) = {v} must be finite and nonnegative"
                )));
            }
        }
        Ok(RSequence { bc, values })
    }

    pub fn get(&self, m: i64) -> f64 {
        self.values.get(&m).copied().unwrap_or(0.0)
    }

    pub fn lattice(&self) -> Lattice {
        self.bc.envelope_lattice()
    }

    /// Largest `|m|` with a nonzero value (0 when empty).
    pub fn support_bound(&self) -> i64 {
        self.values
            .iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|(m, _)| m.abs())
            .max()
            .unwrap_or(0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.values().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn tail_norm(&self, m: i64) -> f64 {
        tail_norm(self.values.iter().map(|(&j, &v)| (j, v)), m)
    }

    /// `ρ_N = (‖r‖²/√N + E_N(r)²)^{1/2}`.
    pub fn rho(&self, n: i64) -> f64 {
        let e = self.tail_norm(n);
        (self.norm_sqr() / (n as f64).sqrt() + e * e).sqrt()
    }

    pub fn scaled(&self, t: f64) -> Self {
        RSequence {
            bc: self.bc,
            values: self.values.iter().map(|(&m, &v)| (m, v * t)).collect(),
        }
    }
}

/// `E_m(x) = (Σ_{|j| >= m} |x(j)|²)^{1/2}` over a finitely supported sequence.
pub fn tail_norm<I>(x: I, m: i64) -> f64
where
    I: IntoIterator<Item = (i64, f64)>,
{
    x.into_iter()
        .filter(|(j, _)| j.abs() >= m)
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt()
}
