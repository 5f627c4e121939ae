//! Spectral decomposition `f = S f + Σ P_n f` of concrete vectors, its
//! reconstruction error, and a reordering harness for unconditional
//! convergence.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisIndexSet, Channel};
use crate::error::{Result, SpectralError};
use crate::projections::{deviation, free_projection, outer_indices, ProjectionEngine};

/// Coefficients of `f` against the free eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionVector {
    pub basis: BasisIndexSet,
    pub coeffs: DVector<Complex64>,
}

impl FunctionVector {
    pub fn zeros(basis: &BasisIndexSet) -> Self {
        FunctionVector {
            basis: basis.clone(),
            coeffs: DVector::zeros(basis.dim()),
        }
    }

    /// From a list of `(n, channel, value)`; repeated entries add up.
    pub fn from_coefficients<I>(basis: &BasisIndexSet, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, Channel, Complex64)>,
    {
        let mut out = Self::zeros(basis);
        for (n, channel, value) in entries {
            let pos = basis.position(n, channel).ok_or(SpectralError::ParityMismatch {
                index: n,
                lattice: basis.bc.spectral_lattice().name(),
            })?;
            out.coeffs[pos] += value;
        }
        Ok(out)
    }

    /// Unit vector with i.i.d. complex Gaussian coefficients on every basis element with `|n| <= max_n`.
    pub fn random<R: Rng + ?Sized>(basis: &BasisIndexSet, max_n: i64, rng: &mut R) -> Self {
        let mut out = Self::zeros(basis);
        for (i, ix) in basis.indices.iter().enumerate() {
            if ix.n.abs() <= max_n {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                out.coeffs[i] = Complex64::new(re, im);
            }
        }
        let norm = out.norm();
        if norm > 0.0 {
            out.coeffs /= Complex64::new(norm, 0.0);
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn distance(&self, other: &FunctionVector) -> f64 {
        (&self.coeffs - &other.coeffs).norm()
    }
}

/// Pair of sample arrays `(y₁(x_j), y₂(x_j))` on the closed grid `x_j = πj/M`, `j = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub first: Vec<Complex64>,
    pub second: Vec<Complex64>,
}

fn grid_phase(n: i64, j: usize, intervals: usize) -> Complex64 {
    let period = 2 * intervals as i64;
    let k = (n * j as i64).rem_euclid(period) as f64;
    Complex64::from_polar(1.0, std::f64::consts::PI * k / intervals as f64)
}

/// Coefficients by the trapezoidal rule on `M + 1` closed-grid samples.
///
/// For `f` in the span of the truncated basis and `M` larger than the
/// largest basis index the rule is exact, including the Dirichlet basis.
pub fn expand(samples: &SampledFunction, basis: &BasisIndexSet) -> Result<FunctionVector> {
    if samples.first.len() != samples.second.len() {
        return Err(SpectralError::LengthMismatch {
            left: samples.first.len(),
            right: samples.second.len(),
        });
    }
    let points = samples.first.len();
    let required = basis.max_index() as usize + 2;
    if points < required {
        return Err(SpectralError::InsufficientResolution {
            required,
            provided: points,
            max_mode: basis.max_index(),
        });
    }
    for (index, z) in samples.first.iter().chain(&samples.second).enumerate() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(SpectralError::NonFiniteInput { index });
        }
    }
    let intervals = points - 1;
    let weight = |j: usize| {
        if j == 0 || j == intervals {
            0.5 / intervals as f64
        } else {
            1.0 / intervals as f64
        }
    };
    // ⟨f, e¹ₙ⟩ = (1/π)∫ y₁ e^{inx}, ⟨f, e²ₙ⟩ = (1/π)∫ y₂ e^{-inx}
    let first = |n: i64| -> Complex64 {
        (0..points)
            .map(|j| samples.first[j] * grid_phase(n, j, intervals) * weight(j))
            .sum()
    };
    let second = |n: i64| -> Complex64 {
        (0..points)
            .map(|j| samples.second[j] * grid_phase(-n, j, intervals) * weight(j))
            .sum()
    };
    let coeffs = basis
        .indices
        .iter()
        .map(|ix| match ix.channel {
            Channel::First => first(ix.n),
            Channel::Second => second(ix.n),
            Channel::Diagonal => (first(ix.n) + second(ix.n)) * FRAC_1_SQRT_2,
        })
        .collect::<Vec<_>>();
    Ok(FunctionVector {
        basis: basis.clone(),
        coeffs: DVector::from_vec(coeffs),
    })
}

/// Values of `f` on the closed grid `x_j = πj/M`, `j = 0..=M`.
pub fn synthesize(f: &FunctionVector, intervals: usize) -> SampledFunction {
    let mut first = vec![Complex64::default(); intervals + 1];
    let mut second = vec![Complex64::default(); intervals + 1];
    for (ix, &c) in f.basis.indices.iter().zip(f.coeffs.iter()) {
        if c == Complex64::default() {
            continue;
        }
        let (a, b) = match ix.channel {
            Channel::First => (c, Complex64::default()),
            Channel::Second => (Complex64::default(), c),
            Channel::Diagonal => (c * FRAC_1_SQRT_2, c * FRAC_1_SQRT_2),
        };
        for j in 0..=intervals {
            first[j] += a * grid_phase(-ix.n, j, intervals);
            second[j] += b * grid_phase(ix.n, j, intervals);
        }
    }
    SampledFunction { first, second }
}

/// Parameters of a decomposition run. The inner block `S` is the projection
/// for `|z| < n + 1/2`, holding every disc `|k| <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionParams {
    pub n: i64,
    pub radius: f64,
    pub nodes: usize,
    pub global_nodes: usize,
}

/// `S f` and the terms `P_n f` for `N < |n| <= m_max`, ordered by `|n|`, then `n`.
#[derive(Debug, Clone)]
pub struct DecompositionTerms {
    pub inner: DVector<Complex64>,
    pub terms: Vec<(i64, DVector<Complex64>)>,
}

pub fn decompose(
    f: &FunctionVector,
    engine: &ProjectionEngine,
    params: &DecompositionParams,
    m_max: i64,
) -> Result<DecompositionTerms> {
    check_basis(f, engine)?;
    let limit = engine.op.basis.cutoff as i64 / 2;
    if m_max > limit {
        return Err(SpectralError::InvalidParameter(format!(
            "M = {m_max} exceeds the trusted window K/2 = {limit}"
        )));
    }
    let s = engine.global_projection(params.n + 1, params.global_nodes)?;
    let inner = &s.matrix * &f.coeffs;
    let mut terms = Vec::new();
    for n in outer_indices(engine.bc(), params.n, m_max) {
        let p = engine.disc_projection(n, params.radius, params.nodes)?;
        terms.push((n, &p.matrix * &f.coeffs));
    }
    Ok(DecompositionTerms { inner, terms })
}

fn check_basis(f: &FunctionVector, engine: &ProjectionEngine) -> Result<()> {
    if f.basis != engine.op.basis {
        return Err(SpectralError::DimensionMismatch {
            expected: engine.op.dim(),
            actual: f.basis.dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub f_hat: FunctionVector,
    pub error: f64,
}

/// `f̂ = S f + Σ_{N<|n|<=M} P_n f` and `‖f − f̂‖`.
pub fn reconstruct(
    f: &FunctionVector,
    engine: &ProjectionEngine,
    params: &DecompositionParams,
    m: i64,
) -> Result<Reconstruction> {
    let parts = decompose(f, engine, params, m)?;
    let mut acc = parts.inner.clone();
    for (_, t) in &parts.terms {
        acc += t;
    }
    let error = (&f.coeffs - &acc).norm();
    Ok(Reconstruction {
        f_hat: FunctionVector {
            basis: f.basis.clone(),
            coeffs: acc,
        },
        error,
    })
}

/// Errors `‖f − S f − Σ_{N<|n|<=M} P_n f‖` for `M = N, N+1, …, m_max`.
pub fn reconstruction_sweep(
    f: &FunctionVector,
    engine: &ProjectionEngine,
    params: &DecompositionParams,
    m_max: i64,
) -> Result<Vec<(i64, f64)>> {
    let parts = decompose(f, engine, params, m_max)?;
    let mut acc = parts.inner.clone();
    let mut out = vec![(params.n, (&f.coeffs - &acc).norm())];
    for (n, t) in &parts.terms {
        acc += t;
        let error = (&f.coeffs - &acc).norm();
        match out.last_mut() {
            Some(last) if last.0 == n.abs() => last.1 = error,
            _ => out.push((n.abs(), error)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub terminal_error: f64,
    pub max_excursion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconditionalityReport {
    pub trials: usize,
    pub seed: u64,
    /// Terminal error of the natural ordering.
    pub base_error: f64,
    pub max_reordered_error: f64,
    /// `max_t |terminal_t − base_error|`.
    pub max_terminal_spread: f64,
    /// `max_{t, j >= 1} (error after j terms − base_error)`.
    pub max_partial_sum_spread: f64,
    /// `Σ ‖P_n − P_n⁰‖²_HS` over the window.
    pub bari_markus_tail: f64,
    /// `max_partial_sum_spread / (√tail · ‖f‖)`, zero when the tail vanishes.
    pub excursion_constant: f64,
    pub per_trial: Vec<TrialRecord>,
}

/// Generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

pub fn unconditionality_test(
    f: &FunctionVector,
    engine: &ProjectionEngine,
    params: &DecompositionParams,
    m: i64,
    trials: usize,
    seed: u64,
) -> Result<UnconditionalityReport> {
    let parts = decompose(f, engine, params, m)?;
    let bc = engine.bc();
    let k = engine.op.basis.cutoff;
    let mut tail = 0.0;
    for n in outer_indices(bc, params.n, m) {
        let p = engine.disc_projection(n, params.radius, params.nodes)?;
        let d = deviation(&p, &free_projection(bc, n, k)?)?;
        tail += d * d;
    }

    let run = |order: &[usize]| -> (f64, f64) {
        let mut acc = parts.inner.clone();
        let mut worst = f64::NEG_INFINITY;
        for &i in order {
            acc += &parts.terms[i].1;
            worst = worst.max((&f.coeffs - &acc).norm());
        }
        ((&f.coeffs - &acc).norm(), worst)
    };
    let natural: Vec<usize> = (0..parts.terms.len()).collect();
    let (base_error, _) = run(&natural);

    let mut per_trial = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut order = natural.clone();
        order.shuffle(&mut trial_rng(seed, trial));
        let (terminal_error, worst) = run(&order);
        per_trial.push(TrialRecord {
            trial,
            terminal_error,
            max_excursion: if order.is_empty() { 0.0 } else { worst - base_error },
        });
    }
    let max_reordered_error = per_trial
        .iter()
        .map(|t| t.terminal_error)
        .fold(base_error, f64::max);
    let max_terminal_spread = per_trial
        .iter()
        .map(|t| (t.terminal_error - base_error).abs())
        .fold(0.0, f64::max);
    let max_partial_sum_spread = per_trial.iter().map(|t| t.max_excursion).fold(0.0, f64::max);
    let scale = tail.sqrt() * f.norm();
    Ok(UnconditionalityReport {
        trials,
        seed,
        base_error,
        max_reordered_error,
        max_terminal_spread,
        max_partial_sum_spread,
        bari_markus_tail: tail,
        excursion_constant: if scale > 0.0 { max_partial_sum_spread / scale } else { 0.0 },
        per_trial,
    })
}
