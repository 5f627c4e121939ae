//! Truncated matrices of `L⁰` and `V` in the free eigenbasis, and the
//! classification of general two-point boundary conditions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisIndexSet, BoundaryCondition, Channel};
use crate::potential::PotentialSpec;

/// Dense truncation with its index map. Entry `(row, col)` is `⟨L e_col, e_row⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub basis: BasisIndexSet,
    pub entries: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.basis.bc
    }

    /// Frobenius norm of the entries.
    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Entrywise sum of two truncations on the same basis.
    pub fn plus(&self, other: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.basis, other.basis, "operators live on different bases");
        OperatorMatrix {
            basis: self.basis.clone(),
            entries: &self.entries + &other.entries,
        }
    }
}

/// Diagonal matrix of `L⁰`: entry `n` at every basis vector of index `n`.
pub fn build_free(bc: BoundaryCondition, cutoff: usize) -> OperatorMatrix {
    let basis = BasisIndexSet::new(bc, cutoff);
    let diag: Vec<Complex64> = basis.free_values().map(|n| Complex64::new(n as f64, 0.0)).collect();
    OperatorMatrix {
        entries: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)),
        basis,
    }
}

/// Matrix of the potential.
///
/// Periodic/antiperiodic: `⟨V e¹ₙ, e²ₖ⟩ = q(k+n)`, `⟨V e²ₙ, e¹ₖ⟩ = p(−k−n)`,
/// and both same-channel blocks vanish. Dirichlet: `⟨V gₙ, gₖ⟩ = W(k+n)`.
pub fn build_v(spec: &PotentialSpec, bc: BoundaryCondition, cutoff: usize) -> OperatorMatrix {
    let basis = BasisIndexSet::new(bc, cutoff);
    let dim = basis.dim();
    let mut entries = DMatrix::<Complex64>::zeros(dim, dim);
    for (col, ix) in basis.indices.iter().enumerate() {
        for (row, kx) in basis.indices.iter().enumerate() {
            let s = kx.n + ix.n;
            entries[(row, col)] = match (ix.channel, kx.channel) {
                (Channel::First, Channel::Second) => spec.q(s),
                (Channel::Second, Channel::First) => spec.p(-s),
                (Channel::Diagonal, Channel::Diagonal) => spec.dirichlet_w(s),
                _ => Complex64::default(),
            };
        }
    }
    OperatorMatrix { basis, entries }
}

/// `L = L⁰ + V`.
pub fn build(spec: &PotentialSpec, bc: BoundaryCondition, cutoff: usize) -> OperatorMatrix {
    build_free(bc, cutoff).plus(&build_v(spec, bc, cutoff))
}

/// Values of `|bc − ad|` and `|(b−c)² + 4ad|` at or below this (relative to
/// the squared coefficient scale) count as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcClassification {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    /// `bc − ad`
    pub determinant: Complex64,
    /// `(b − c)² + 4ad`
    pub discriminant: Complex64,
    pub regular: bool,
    pub strictly_regular: bool,
    /// Roots of `z² + (b+c)z + (bc−ad) = 0`.
    pub roots: [Complex64; 2],
    pub double_root_present: bool,
    pub double_root: Option<Complex64>,
}

/// Boundary conditions `y₁(0) + b y₁(π) + a y₂(0) = 0`, `d y₁(π) + c y₂(0) + y₂(π) = 0`.
pub fn classify_bc(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> BcClassification {
    let scale = [a, b, c, d]
        .iter()
        .map(|z| z.norm())
        .fold(1.0f64, f64::max);
    let tol = DEGENERACY_TOL * scale * scale;
    let determinant = b * c - a * d;
    let discriminant = (b - c) * (b - c) + a * d * 4.0;
    let regular = determinant.norm() > tol;
    let strictly_regular = regular && discriminant.norm() > tol;

    let lin = b + c;
    let root = discriminant.sqrt();
    let plus = -(lin + root) * 0.5;
    let minus = -(lin - root) * 0.5;
    let big = if plus.norm() >= minus.norm() { plus } else { minus };
    let roots = if big.norm() > 0.0 {
        let mut pair = [big, determinant / big];
        pair.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        pair
    } else {
        [Complex64::default(); 2]
    };
    let double_root_present = regular && !strictly_regular;
    BcClassification {
        a,
        b,
        c,
        d,
        determinant,
        discriminant,
        regular,
        strictly_regular,
        roots,
        double_root_present,
        double_root: double_root_present.then(|| -lin * 0.5),
    }
}

/// Coefficient quadruple of a named boundary condition.
pub fn bc_quadruple(bc: BoundaryCondition) -> [Complex64; 4] {
    let r = |x: f64| Complex64::new(x, 0.0);
    match bc {
        BoundaryCondition::PeriodicPlus => [r(0.0), r(-1.0), r(-1.0), r(0.0)],
        BoundaryCondition::PeriodicMinus => [r(0.0), r(1.0), r(1.0), r(0.0)],
        BoundaryCondition::Dirichlet => [r(-1.0), r(0.0), r(0.0), r(-1.0)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn free_diagonals() {
        let l = build_free(BoundaryCondition::PeriodicPlus, 1);
        let d: Vec<f64> = l.entries.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![-2.0, -2.0, 0.0, 0.0, 2.0, 2.0]);
        let l = build_free(BoundaryCondition::Dirichlet, 1);
        let d: Vec<f64> = l.entries.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![-1.0, 0.0, 1.0]);
        let l = build_free(BoundaryCondition::PeriodicMinus, 0);
        let d: Vec<f64> = l.entries.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(l.entries.norm_squared(), 4.0);
    }

    #[test]
    fn constant_potential_pairs_opposite_indices() {
        let a = Complex64::new(0.3, -0.7);
        let spec = PotentialSpec::from_even_coefficients(
            BTreeMap::from([(0, a)]),
            BTreeMap::from([(0, a)]),
            1,
        )
        .unwrap();
        let v = build_v(&spec, BoundaryCondition::PeriodicPlus, 3);
        for (col, ix) in v.basis.indices.iter().enumerate() {
            for (row, kx) in v.basis.indices.iter().enumerate() {
                let z = v.entries[(row, col)];
                if kx.n + ix.n == 0 && kx.channel != ix.channel {
                    assert_eq!(z, a);
                } else {
                    assert_eq!(z, Complex64::default());
                }
            }
        }
        assert_eq!(
            build_v(&PotentialSpec::zero(), BoundaryCondition::Dirichlet, 4).norm(),
            0.0
        );
    }

    #[test]
    fn dirichlet_matrix_is_hankel() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let spec = PotentialSpec::random_trig(&mut rng, 4, 1.0);
        let v = build_v(&spec, BoundaryCondition::Dirichlet, 6);
        let dim = v.dim();
        for i in 0..dim - 1 {
            for j in 1..dim {
                assert_eq!(v.entries[(i, j)], v.entries[(i + 1, j - 1)]);
            }
        }
        assert_eq!(v.entries[(6, 6)], spec.dirichlet_w(0));
    }

    #[test]
    fn classification_examples() {
        let [a, b, cc, d] = bc_quadruple(BoundaryCondition::PeriodicPlus);
        let k = classify_bc(a, b, cc, d);
        assert!(k.regular && !k.strictly_regular);
        assert_eq!(k.determinant, c(1.0));
        assert_eq!(k.double_root, Some(c(1.0)));

        let [a, b, cc, d] = bc_quadruple(BoundaryCondition::PeriodicMinus);
        let k = classify_bc(a, b, cc, d);
        assert!(k.regular && !k.strictly_regular);
        assert_eq!(k.double_root, Some(c(-1.0)));

        let [a, b, cc, d] = bc_quadruple(BoundaryCondition::Dirichlet);
        let k = classify_bc(a, b, cc, d);
        assert!(k.strictly_regular);
        assert_eq!(k.determinant, c(-1.0));
        assert_eq!(k.discriminant, c(4.0));
        assert_eq!(k.roots, [c(-1.0), c(1.0)]);

        let z = Complex64::default();
        let k = classify_bc(z, z, z, z);
        assert!(!k.regular && !k.strictly_regular && !k.double_root_present);
    }
}
