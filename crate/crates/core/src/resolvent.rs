//! Shifted solves `(λ − L)⁻¹`, the square-root free resolvent `K_λ`, and the
//! Hilbert–Schmidt norms of `K_λ V K_λ` and of its dominating majorant.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use crate::basis::{BasisIndexSet, BoundaryCondition};
use crate::error::{Result, SpectralError};
use crate::operator::OperatorMatrix;
use crate::potential::{PotentialSpec, RSequence};
use crate::spectral::eigenvalues;

/// Condition estimates above this refuse the shift.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Default number of equispaced samples on each circle `|λ − n| = 1/2`.
pub const CIRCLE_SAMPLES: usize = 16;

/// LU factorization of `λ − L`.
pub struct ShiftedSolve {
    pub lambda: Complex64,
    pub condition: f64,
    lu: LU<Complex64, Dyn, Dyn>,
}

fn nearest_eigenvalue(op: &OperatorMatrix, lambda: Complex64) -> Complex64 {
    eigenvalues(op)
        .unwrap_or_default()
        .into_iter()
        .min_by(|a, b| (a - lambda).norm().total_cmp(&(b - lambda).norm()))
        .unwrap_or(lambda)
}

impl ShiftedSolve {
    /// Factor `λ − L`, estimating the condition number from one inverse step.
    pub fn new(op: &OperatorMatrix, lambda: Complex64) -> Result<Self> {
        let n = op.dim();
        let shifted = DMatrix::<Complex64>::identity(n, n) * lambda - &op.entries;
        let norm = shifted.norm();
        let lu = LU::new(shifted);
        let b = DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
        let condition = match lu.solve(&b) {
            Some(x) if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => norm * x.norm(),
            _ => f64::INFINITY,
        };
        if condition.is_nan() || condition > CONDITION_LIMIT {
            return Err(SpectralError::IllConditioned {
                lambda,
                condition,
                nearest: nearest_eigenvalue(op, lambda),
            });
        }
        Ok(ShiftedSolve {
            lambda,
            condition,
            lu,
        })
    }

    pub fn solve(&self, rhs: &DVector<Complex64>) -> DVector<Complex64> {
        self.lu
            .solve(rhs)
            .expect("factorization accepted by the condition check")
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.lu
            .solve(rhs)
            .expect("factorization accepted by the condition check")
    }

    pub fn inverse(&self) -> DMatrix<Complex64> {
        self.lu
            .try_inverse()
            .expect("factorization accepted by the condition check")
    }
}

/// `x` with `(λ − L) x = rhs`.
pub fn resolve(op: &OperatorMatrix, lambda: Complex64, rhs: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if rhs.len() != op.dim() {
        return Err(SpectralError::DimensionMismatch {
            expected: op.dim(),
            actual: rhs.len(),
        });
    }
    Ok(ShiftedSolve::new(op, lambda)?.solve(rhs))
}

/// Square root with argument in `[−π, π)`: the negative real axis maps to `−i√r`.
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re < 0.0 {
        Complex64::new(0.0, -(-z.re).sqrt())
    } else {
        let (r, phi) = z.to_polar();
        let phi = if phi >= PI { phi - 2.0 * PI } else { phi };
        Complex64::from_polar(r.sqrt(), phi / 2.0)
    }
}

/// Diagonal operator with entries `1/√(λ − n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KOperator {
    pub basis: BasisIndexSet,
    pub lambda: Complex64,
    pub diagonal: DVector<Complex64>,
}

impl KOperator {
    pub fn new(basis: &BasisIndexSet, lambda: Complex64) -> Result<Self> {
        let mut diag = Vec::with_capacity(basis.dim());
        for n in basis.free_values() {
            let gap = lambda - n as f64;
            if gap.norm() == 0.0 {
                return Err(SpectralError::InvalidParameter(format!(
                    "λ = {lambda} coincides with the free eigenvalue {n}"
                )));
            }
            diag.push(Complex64::new(1.0, 0.0) / principal_sqrt(gap));
        }
        Ok(KOperator {
            basis: basis.clone(),
            lambda,
            diagonal: DVector::from_vec(diag),
        })
    }

    /// `K A K` for a matrix on the same basis.
    pub fn sandwich(&self, a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = a.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] *= self.diagonal[i] * self.diagonal[j];
            }
        }
        out
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&self.diagonal)
    }
}

/// Lattice indices of the truncated basis together with the reciprocal moduli `1/|λ − n|^{1/2}`.
fn weights(bc: BoundaryCondition, cutoff: usize, lambda: Complex64) -> (Vec<i64>, Vec<f64>) {
    let lattice = BasisIndexSet::new(bc, cutoff).lattice();
    let w = lattice
        .iter()
        .map(|&n| 1.0 / (lambda - n as f64).norm().sqrt())
        .collect();
    (lattice, w)
}

/// `Σ_{k,m} c(k+m) w_k w_m` over window pairs with `k + m` in the support of `c`.
fn anti_diagonal_sum<I>(lattice: &[i64], w: &[f64], support: I) -> f64
where
    I: IntoIterator<Item = (i64, f64)>,
{
    let (lo, hi) = (lattice[0], lattice[lattice.len() - 1]);
    let step = if lattice.len() > 1 { lattice[1] - lattice[0] } else { 1 };
    let mut total = 0.0;
    for (s, value) in support {
        if value == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for (i, &k) in lattice.iter().enumerate() {
            let m = s - k;
            if m < lo || m > hi || (m - lo) % step != 0 {
                continue;
            }
            let j = ((m - lo) / step) as usize;
            acc += w[i] * w[i] * w[j] * w[j];
        }
        total += value * acc;
    }
    total
}

/// Squared entries of `V` grouped by the anti-diagonal `k + m`.
fn potential_weights(spec: &PotentialSpec, bc: BoundaryCondition) -> Vec<(i64, f64)> {
    match bc {
        BoundaryCondition::Dirichlet => {
            let keys: BTreeSet<i64> = spec
                .p_even
                .keys()
                .chain(spec.p_odd.keys())
                .map(|&m| -m)
                .chain(spec.q_even.keys().copied())
                .chain(spec.q_odd.keys().copied())
                .collect();
            keys.into_iter()
                .map(|s| (s, spec.dirichlet_w(s).norm_sqr()))
                .collect()
        }
        _ => {
            let keys: BTreeSet<i64> = spec
                .p_even
                .keys()
                .map(|&m| -m)
                .chain(spec.q_even.keys().copied())
                .collect();
            keys.into_iter()
                .map(|s| (s, spec.q(s).norm_sqr() + spec.p(-s).norm_sqr()))
                .collect()
        }
    }
}

/// `‖K_λ V K_λ‖_HS` over the truncated window.
pub fn kvk_hs_norm(spec: &PotentialSpec, bc: BoundaryCondition, lambda: Complex64, cutoff: usize) -> f64 {
    let (lattice, w) = weights(bc, cutoff, lambda);
    anti_diagonal_sum(&lattice, &w, potential_weights(spec, bc)).sqrt()
}

/// `(Σ_{i,k} r(i+k)²/(|λ−i||λ−k|))^{1/2}` over the truncated window.
pub fn dominated_hs_norm_r(r: &RSequence, lambda: Complex64, cutoff: usize) -> f64 {
    let (lattice, w) = weights(r.bc, cutoff, lambda);
    anti_diagonal_sum(&lattice, &w, r.values.iter().map(|(&m, &v)| (m, v * v))).sqrt()
}

pub fn dominated_hs_norm(spec: &PotentialSpec, bc: BoundaryCondition, lambda: Complex64, cutoff: usize) -> f64 {
    dominated_hs_norm_r(&spec.r_sequence(bc), lambda, cutoff)
}

/// Matrix `K̄_λ V̄ K̄_λ` on the lattice indices of the window: entry `(k, m)` is
/// `r(k+m)/(|λ−k||λ−m|)^{1/2}`.
pub fn dominating_matrix(r: &RSequence, lambda: Complex64, cutoff: usize) -> (Vec<i64>, DMatrix<f64>) {
    let (lattice, w) = weights(r.bc, cutoff, lambda);
    let n = lattice.len();
    let m = DMatrix::from_fn(n, n, |i, j| r.get(lattice[i] + lattice[j]) * w[i] * w[j]);
    (lattice, m)
}

/// Points `n + radius·e^{2πij/samples}`.
pub fn circle_points(center: f64, radius: f64, samples: usize) -> Vec<Complex64> {
    (0..samples)
        .map(|j| {
            Complex64::new(center, 0.0) + Complex64::from_polar(radius, 2.0 * PI * j as f64 / samples as f64)
        })
        .collect()
}

/// Largest sampled `‖K_λ V K_λ‖_HS` on `|λ − n| = 1/2` for each lattice `n` with `1 <= |n| <= K/2`.
pub fn circle_maxima(
    spec: &PotentialSpec,
    bc: BoundaryCondition,
    cutoff: usize,
    samples: usize,
) -> Vec<(i64, f64)> {
    let limit = cutoff as i64 / 2;
    bc.shell(0, limit)
        .into_iter()
        .map(|n| {
            let sup = circle_points(n as f64, 0.5, samples)
                .into_iter()
                .map(|lam| kvk_hs_norm(spec, bc, lam, cutoff))
                .fold(0.0, f64::max);
            (n, sup)
        })
        .collect()
}

/// Smallest `N >= 1` such that every sampled circle with `N < |n| <= K/2` has
/// `‖K_λ V K_λ‖_HS <= 1/2`.
pub fn find_threshold_n(
    spec: &PotentialSpec,
    bc: BoundaryCondition,
    cutoff: usize,
    samples: usize,
) -> Result<i64> {
    if samples < 1 {
        return Err(SpectralError::InvalidParameter("at least one circle sample is required".into()));
    }
    let limit = cutoff as i64 / 2;
    let worst = circle_maxima(spec, bc, cutoff, samples)
        .into_iter()
        .filter(|&(_, sup)| sup > 0.5)
        .map(|(n, _)| n.abs())
        .max()
        .unwrap_or(0);
    let n = worst.max(1);
    if n >= limit || bc.shell(n, limit).is_empty() {
        return Err(SpectralError::NoThreshold { limit });
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Channel;
    use crate::operator::{build, build_free, build_v};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_resolve() {
        let op = build_free(BoundaryCondition::Dirichlet, 3);
        let mut g0 = DVector::<Complex64>::zeros(op.dim());
        let pos = op.basis.position(0, Channel::Diagonal).unwrap();
        g0[pos] = c(1.0, 0.0);
        let x = resolve(&op, c(0.5, 0.0), &g0).unwrap();
        assert_eq!(x, &g0 * c(2.0, 0.0));
        match resolve(&op, c(1.0, 0.0), &g0) {
            Err(SpectralError::IllConditioned { nearest, .. }) => assert_eq!(nearest, c(1.0, 0.0)),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn branch_convention() {
        assert_eq!(principal_sqrt(c(-4.0, 0.0)), c(0.0, -2.0));
        assert!((principal_sqrt(c(-4.0, -1e-300)) - c(0.0, -2.0)).norm() < 1e-12);
        let k = KOperator::new(&BasisIndexSet::new(BoundaryCondition::PeriodicPlus, 2), c(2.5, 0.0)).unwrap();
        let pos = k.basis.position(2, Channel::First).unwrap();
        assert_eq!(k.diagonal[pos].im, 0.0);
        assert!((k.diagonal[pos].re - 2f64.sqrt()).abs() < 1e-15);
        // K² is the free resolvent
        for lam in [c(0.3, 0.7), c(-1.5, 0.0), c(3.0, -0.25)] {
            let k = KOperator::new(&BasisIndexSet::new(BoundaryCondition::PeriodicMinus, 3), lam).unwrap();
            for (kk, n) in k.diagonal.iter().zip(k.basis.free_values()) {
                let want = c(1.0, 0.0) / (lam - n as f64);
                assert!((kk * kk - want).norm() <= 1e-14 * want.norm());
            }
        }
    }

    #[test]
    fn kvk_matches_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bc in BoundaryCondition::ALL {
            let spec = PotentialSpec::random_trig(&mut rng, 5, 1.3);
            let lam = c(1.3, 0.4);
            let k = KOperator::new(&BasisIndexSet::new(bc, 7), lam).unwrap();
            let direct = k.sandwich(&build_v(&spec, bc, 7).entries).norm();
            let formula = kvk_hs_norm(&spec, bc, lam, 7);
            assert!((direct - formula).abs() < 1e-10, "{bc}: {direct} vs {formula}");
            assert!(formula <= dominated_hs_norm(&spec, bc, lam, 7) + 1e-12);
        }
        assert_eq!(kvk_hs_norm(&PotentialSpec::zero(), BoundaryCondition::Dirichlet, lam0(), 4), 0.0);
    }

    fn lam0() -> Complex64 {
        c(0.5, 0.5)
    }

    #[test]
    fn single_mode_hand_sum() {
        // p(2) = 1: entries p(−k−m) nonzero only for k + m = −2
        let spec = PotentialSpec::from_even_coefficients(BTreeMap::from([(2, c(1.0, 0.0))]), BTreeMap::new(), 3).unwrap();
        let lam = c(1.0, 0.5);
        let mut hand = 0.0;
        for k in (-8i64..=8).step_by(2) {
            let m = -2 - k;
            if m.abs() <= 8 {
                hand += 1.0 / ((lam - k as f64).norm() * (lam - m as f64).norm());
            }
        }
        assert!((kvk_hs_norm(&spec, BoundaryCondition::PeriodicPlus, lam, 4) - hand.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn neumann_series_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = PotentialSpec::random_trig(&mut rng, 4, 0.4);
        let bc = BoundaryCondition::Dirichlet;
        let op = build(&spec, bc, 10);
        let lam = c(6.5, 0.3);
        let k = KOperator::new(&op.basis, lam).unwrap();
        let kvk = k.sandwich(&build_v(&spec, bc, 10).entries);
        assert!(kvk.norm() < 1.0);
        let mut rhs = DVector::<Complex64>::zeros(op.dim());
        rhs[3] = c(1.0, -0.5);
        rhs[12] = c(0.25, 2.0);
        let mut term = rhs.component_mul(&k.diagonal);
        let mut acc = term.clone();
        for _ in 0..500 {
            term = &kvk * term;
            acc += &term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        let series = acc.component_mul(&k.diagonal);
        let x = resolve(&op, lam, &rhs).unwrap();
        assert!((series - x).norm() < 1e-8);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(find_threshold_n(&PotentialSpec::zero(), BoundaryCondition::PeriodicPlus, 16, 16), Ok(1));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = PotentialSpec::random_trig(&mut rng, 8, 0.5);
        let n = find_threshold_n(&spec, BoundaryCondition::PeriodicPlus, 64, 16).unwrap();
        let small = find_threshold_n(&spec.scaled(0.3), BoundaryCondition::PeriodicPlus, 64, 16).unwrap();
        assert!(small <= n);
        for (m, sup) in circle_maxima(&spec, BoundaryCondition::PeriodicPlus, 64, 16) {
            if m.abs() > n {
                assert!(sup <= 0.5);
            }
        }
    }
}
