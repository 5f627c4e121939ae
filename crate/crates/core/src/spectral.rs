//! Dense non-Hermitian eigendecomposition and a block-diagonal spectral
//! factorization used to evaluate contour sums of the resolvent.
//!
//! `L = Q T Q*` (complex Schur form) is reordered so that eigenvalues closer
//! than a separation `δ` sit in contiguous diagonal blocks, then decoupled by
//! a unit upper-triangular similarity `S`: `L = W D Z` with `W = Q S`,
//! `Z = S⁻¹ Q*` and `D` block diagonal. Any rational function of `L` that is
//! analytic on the spectrum then acts blockwise:
//! `Σ_j w_j (λ_j − L)⁻¹ = Σ_c W_c [Σ_j w_j (λ_j − D_c)⁻¹] Z_c`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Result, SpectralError};
use crate::operator::OperatorMatrix;

/// Maximum number of QR sweeps handed to the Schur iteration.
pub const SCHUR_MAX_ITER: usize = 10_000;

/// Default single-linkage separation used to group eigenvalues into blocks.
pub const CLUSTER_SEPARATION: f64 = 0.3;

/// Cluster terms whose bound `‖W_c‖ · max|g| · ‖Z_c‖` is below this are dropped,
/// `g` being the scalar response of the node sum at the cluster's eigenvalues.
pub const NEGLIGIBLE_TERM: f64 = 1e-18;

fn total_order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Complex Schur form `A = Q T Q*` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    pub q: DMatrix<Complex64>,
    pub t: DMatrix<Complex64>,
}

impl ComplexSchur {
    pub fn new(a: &DMatrix<Complex64>) -> Result<Self> {
        let scale = a.norm().max(1.0);
        let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or(
            SpectralError::NoConvergence {
                iterations: SCHUR_MAX_ITER,
            },
        )?;
        let (q, t) = schur.unpack();
        let mut out = ComplexSchur { q, t };
        out.clear_subdiagonal(scale);
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.t.diagonal().iter().copied().collect()
    }

    /// Triangularize any 2×2 bump left on the subdiagonal.
    fn clear_subdiagonal(&mut self, scale: f64) {
        let n = self.dim();
        for k in 0..n.saturating_sub(1) {
            if self.t[(k + 1, k)].norm() <= f64::EPSILON * scale {
                self.t[(k + 1, k)] = Complex64::default();
                continue;
            }
            let a = self.t[(k, k)];
            let b = self.t[(k, k + 1)];
            let c = self.t[(k + 1, k)];
            let d = self.t[(k + 1, k + 1)];
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let mu = (a + d) * 0.5 + disc;
            // eigenvector of the block for eigenvalue mu
            let v = if (mu - a).norm() + b.norm() > (mu - d).norm() + c.norm() {
                [b, mu - a]
            } else {
                [mu - d, c]
            };
            self.rotate(k, v);
            self.t[(k + 1, k)] = Complex64::default();
        }
    }

    /// Apply the unitary `G` whose first column is `v/‖v‖` to rows and
    /// columns `k, k+1`: `T ← G* T G`, `Q ← Q G`.
    fn rotate(&mut self, k: usize, v: [Complex64; 2]) {
        let nv = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        if nv == 0.0 {
            return;
        }
        let (g1, g2) = (v[0] / nv, v[1] / nv);
        let n = self.dim();
        // columns: T[:, (k, k+1)] · G with G = [[g1, -conj(g2)], [g2, conj(g1)]]
        for i in 0..n {
            let x = self.t[(i, k)];
            let y = self.t[(i, k + 1)];
            self.t[(i, k)] = x * g1 + y * g2;
            self.t[(i, k + 1)] = -x * g2.conj() + y * g1.conj();
            let x = self.q[(i, k)];
            let y = self.q[(i, k + 1)];
            self.q[(i, k)] = x * g1 + y * g2;
            self.q[(i, k + 1)] = -x * g2.conj() + y * g1.conj();
        }
        // rows: G* · T[(k, k+1), :]
        for j in 0..n {
            let x = self.t[(k, j)];
            let y = self.t[(k + 1, j)];
            self.t[(k, j)] = g1.conj() * x + g2.conj() * y;
            self.t[(k + 1, j)] = -g2 * x + g1 * y;
        }
    }

    /// Exchange the adjacent diagonal entries `k` and `k+1`.
    fn swap(&mut self, k: usize) {
        let a = self.t[(k, k)];
        let b = self.t[(k + 1, k + 1)];
        let x = self.t[(k, k + 1)];
        self.rotate(k, [x, b - a]);
        self.t[(k + 1, k)] = Complex64::default();
        self.t[(k, k)] = b;
        self.t[(k + 1, k + 1)] = a;
    }

    /// Right eigenvector for diagonal position `k`, unit Euclidean norm.
    pub fn eigenvector(&self, k: usize) -> DVector<Complex64> {
        let n = self.dim();
        let lam = self.t[(k, k)];
        let smin = f64::EPSILON * self.t.norm().max(f64::MIN_POSITIVE);
        let mut x = DVector::<Complex64>::zeros(n);
        x[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::default();
            for j in i + 1..=k {
                s += self.t[(i, j)] * x[j];
            }
            let mut den = self.t[(i, i)] - lam;
            if den.norm() < smin {
                den = Complex64::new(smin, 0.0);
            }
            x[i] = -s / den;
        }
        let v = &self.q * x;
        let nv = v.norm();
        v / Complex64::new(nv, 0.0)
    }
}

/// Eigenvalues sorted by (real, imaginary) part with matching unit right eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: DMatrix<Complex64>,
}

pub fn eigen(op: &OperatorMatrix) -> Result<Eigen> {
    let schur = ComplexSchur::new(&op.entries)?;
    let n = schur.dim();
    let mut order: Vec<usize> = (0..n).collect();
    let diag = schur.eigenvalues();
    order.sort_by(|&i, &j| total_order(&diag[i], &diag[j]).then(i.cmp(&j)));
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &schur.eigenvector(k));
    }
    Ok(Eigen {
        values: order.iter().map(|&k| diag[k]).collect(),
        vectors,
    })
}

/// Eigenvalues only, sorted by (real, imaginary) part.
pub fn eigenvalues(op: &OperatorMatrix) -> Result<Vec<Complex64>> {
    let mut values = ComplexSchur::new(&op.entries)?.eigenvalues();
    values.sort_by(total_order);
    Ok(values)
}

/// Single-linkage groups of points closer than `sep`, each sorted by first appearance.
pub fn single_linkage(points: &[Complex64], sep: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() < sep {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

/// `L = W D Z` with `D` block diagonal over eigenvalue clusters.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    pub t: DMatrix<Complex64>,
    pub w: DMatrix<Complex64>,
    pub z: DMatrix<Complex64>,
    pub clusters: Vec<Range<usize>>,
    w_norms: Vec<f64>,
    z_norms: Vec<f64>,
}

/// Low-rank form `U V` of a contour sum together with its dense matrix.
#[derive(Debug, Clone)]
pub struct ContourSum {
    pub matrix: DMatrix<Complex64>,
    /// `‖M² − M‖_HS` evaluated from the factors.
    pub idempotency_residual: f64,
    /// Sum of the traces of the retained blocks.
    pub trace: Complex64,
}

impl SpectralFactorization {
    pub fn new(op: &OperatorMatrix) -> Result<Self> {
        Self::with_separation(op, CLUSTER_SEPARATION)
    }

    pub fn with_separation(op: &OperatorMatrix, sep: f64) -> Result<Self> {
        let mut schur = ComplexSchur::new(&op.entries)?;
        let n = schur.dim();

        let groups = single_linkage(&schur.eigenvalues(), sep);
        let mut label = vec![0usize; n];
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                label[i] = g;
            }
        }
        // insertion sort of the diagonal into cluster order by adjacent swaps
        for i in 1..n {
            let mut k = i;
            while k > 0 && label[k - 1] > label[k] {
                schur.swap(k - 1);
                label.swap(k - 1, k);
                k -= 1;
            }
        }
        let mut clusters = Vec::with_capacity(groups.len());
        let mut start = 0;
        for g in &groups {
            clusters.push(start..start + g.len());
            start += g.len();
        }

        // S = I + Y, solve T_AA Y − Y T_jj = −T_Aj for each block column j
        let t = &schur.t;
        let mut s = DMatrix::<Complex64>::identity(n, n);
        for block in &clusters {
            let a_len = block.start;
            for c in block.clone() {
                let mut rhs: Vec<Complex64> = (0..a_len).map(|i| -t[(i, c)]).collect();
                for cp in block.start..c {
                    let tjj = t[(cp, c)];
                    for (i, r) in rhs.iter_mut().enumerate() {
                        *r += s[(i, cp)] * tjj;
                    }
                }
                let shift = t[(c, c)];
                for i in (0..a_len).rev() {
                    let mut acc = rhs[i];
                    for j in i + 1..a_len {
                        acc -= t[(i, j)] * s[(j, c)];
                    }
                    s[(i, c)] = acc / (t[(i, i)] - shift);
                }
            }
        }
        let w = &schur.q * &s;
        let qh = schur.q.adjoint();
        let z = s
            .solve_upper_triangular(&qh)
            .ok_or_else(|| SpectralError::InvalidParameter("singular block transform".into()))?;
        let mut dt = schur.t.clone();
        for (bi, block) in clusters.iter().enumerate() {
            for other in clusters.iter().skip(bi + 1) {
                for i in block.clone() {
                    for j in other.clone() {
                        dt[(i, j)] = Complex64::default();
                    }
                }
            }
        }
        let w_norms = clusters.iter().map(|b| w.columns_range(b.clone()).norm()).collect();
        let z_norms = clusters.iter().map(|b| z.rows_range(b.clone()).norm()).collect();
        Ok(SpectralFactorization {
            t: dt,
            w,
            z,
            clusters,
            w_norms,
            z_norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.t.diagonal().iter().copied().collect()
    }

    /// `F_c = Σ_j w_j (λ_j − D_c)⁻¹` for one block.
    fn block_sum(&self, block: &Range<usize>, nodes: &[(Complex64, Complex64)]) -> DMatrix<Complex64> {
        let s = block.len();
        let d = self.t.view((block.start, block.start), (s, s));
        let mut out = DMatrix::<Complex64>::zeros(s, s);
        for &(lambda, weight) in nodes {
            // inverse of the upper-triangular (λ − D_c), column by column
            for col in 0..s {
                let mut x = vec![Complex64::default(); s];
                x[col] = Complex64::new(1.0, 0.0) / (lambda - d[(col, col)]);
                for i in (0..col).rev() {
                    let mut acc = Complex64::default();
                    for j in i + 1..=col {
                        acc += d[(i, j)] * x[j];
                    }
                    x[i] = acc / (lambda - d[(i, i)]);
                }
                for (i, xi) in x.iter().enumerate() {
                    out[(i, col)] += weight * xi;
                }
            }
        }
        out
    }

    /// `Σ_j w_j (λ_j − L)⁻¹` over the given (node, weight) pairs.
    ///
    /// `response(t)` must return the scalar sum `Σ_j w_j/(λ_j − t)` (or an
    /// upper bound of its modulus); it decides which blocks are negligible.
    pub fn contour_sum<G>(&self, nodes: &[(Complex64, Complex64)], response: G) -> ContourSum
    where
        G: Fn(Complex64) -> f64,
    {
        let n = self.dim();
        let mut u_cols: Vec<DMatrix<Complex64>> = Vec::new();
        let mut v_rows: Vec<DMatrix<Complex64>> = Vec::new();
        let mut blocks: Vec<DMatrix<Complex64>> = Vec::new();
        let mut trace = Complex64::default();
        for (ci, block) in self.clusters.iter().enumerate() {
            let size = block.len() as f64;
            let g = block
                .clone()
                .map(|i| response(self.t[(i, i)]))
                .fold(0.0, f64::max);
            if self.w_norms[ci] * g * size * self.z_norms[ci] < NEGLIGIBLE_TERM {
                continue;
            }
            let f = self.block_sum(block, nodes);
            trace += f.trace();
            u_cols.push(self.w.columns_range(block.clone()) * &f);
            v_rows.push(self.z.rows_range(block.clone()).into_owned());
            blocks.push(f);
        }
        let rank: usize = blocks.iter().map(|f| f.nrows()).sum();
        let mut u = DMatrix::<Complex64>::zeros(n, rank);
        let mut v = DMatrix::<Complex64>::zeros(rank, n);
        let mut off = 0;
        for (uc, vr) in u_cols.iter().zip(&v_rows) {
            let s = uc.ncols();
            u.columns_range_mut(off..off + s).copy_from(uc);
            v.rows_range_mut(off..off + s).copy_from(vr);
            off += s;
        }
        let matrix = &u * &v;
        let vu = &v * &u;
        let defect = &u * (vu - DMatrix::<Complex64>::identity(rank, rank));
        let idempotency_residual = (defect * &v).norm();
        ContourSum {
            matrix,
            idempotency_residual,
            trace,
        }
    }
}
