//! Riesz projections by trapezoidal contour quadrature, free projections,
//! deviation reports and spectral localization.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BoundaryCondition;
use crate::error::{Result, SpectralError};
use crate::operator::{build, OperatorMatrix};
use crate::potential::PotentialSpec;
use crate::resolvent::{find_threshold_n, ShiftedSolve, CIRCLE_SAMPLES};
use crate::spectral::{ContourSum, SpectralFactorization};

/// Accepted projections satisfy `‖P² − P‖_HS <= IDEMPOTENCY_TOL` and `|tr P − rank| <= IDEMPOTENCY_TOL`.
pub const IDEMPOTENCY_TOL: f64 = 1e-6;

/// Eigenvalues closer than this to a contour are refused.
pub const CONTOUR_CLEARANCE: f64 = 1e-6;

pub const DEFAULT_NODES: usize = 64;
pub const DEFAULT_RADIUS: f64 = 0.5;

/// Clean localization: exactly the free multiplicity within `INNER·r` of the
/// center and nothing in the annulus up to `OUTER·r`.
pub const LOCALIZATION_INNER: f64 = 0.7;
pub const LOCALIZATION_OUTER: f64 = 1.3;

/// Circle with a trapezoidal rule of `nodes` equispaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(center: Complex64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(SpectralError::InvalidParameter(format!(
                "contour radius must be positive, got {radius}"
            )));
        }
        if nodes < 8 || !nodes.is_multiple_of(2) {
            return Err(SpectralError::InvalidParameter(format!(
                "quadrature node count must be even and at least 8, got {nodes}"
            )));
        }
        Ok(ContourSpec {
            center,
            radius,
            nodes,
        })
    }

    /// Circle `|λ − n| = radius`.
    pub fn disc(n: i64, radius: f64, nodes: usize) -> Result<Self> {
        Self::new(Complex64::new(n as f64, 0.0), radius, nodes)
    }

    /// Circle `|z| = N − 1/2`.
    pub fn global(n: i64, nodes: usize) -> Result<Self> {
        Self::new(Complex64::default(), n as f64 - 0.5, nodes)
    }

    /// Pairs `(λ_j, w_j)` with `λ_j = c + r e^{iθ_j}` and `w_j = (r/nodes) e^{iθ_j}`.
    pub fn nodes_and_weights(&self) -> Vec<(Complex64, Complex64)> {
        (0..self.nodes)
            .map(|j| {
                let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / self.nodes as f64);
                (self.center + e * self.radius, e * (self.radius / self.nodes as f64))
            })
            .collect()
    }

    pub fn distance(&self, z: Complex64) -> f64 {
        ((z - self.center).norm() - self.radius).abs()
    }

    /// Scalar value of the node sum at `z`: `1/(1 − u^nodes)`, `u = (z − c)/r`.
    pub fn response(&self, z: Complex64) -> Complex64 {
        let u = (z - self.center) / self.radius;
        Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - u.powi(self.nodes as i32))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

/// Default node count for the circle `|z| = N − 1/2`.
pub fn default_global_nodes(n: i64) -> usize {
    (256 * n.max(1) as usize).max(DEFAULT_NODES)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub matrix: DMatrix<Complex64>,
    pub rank: usize,
    pub trace: Complex64,
    pub idempotency_residual: f64,
    pub contour: ContourSpec,
}

impl ProjectionResult {
    fn accept(sum: ContourSum, contour: ContourSpec) -> Result<Self> {
        let rank = sum.trace.re.round().max(0.0) as usize;
        let defect = (sum.trace - rank as f64).norm();
        let worst = sum.idempotency_residual.max(defect);
        if worst.is_nan() || worst > IDEMPOTENCY_TOL {
            return Err(SpectralError::QuadratureQuality {
                residual: worst,
                nodes: contour.nodes,
            });
        }
        Ok(ProjectionResult {
            matrix: sum.matrix,
            rank,
            trace: sum.trace,
            idempotency_residual: sum.idempotency_residual,
            contour,
        })
    }
}

/// A factored operator that evaluates many contour integrals cheaply.
#[derive(Debug, Clone)]
pub struct ProjectionEngine {
    pub op: OperatorMatrix,
    factorization: SpectralFactorization,
    eigenvalues: Vec<Complex64>,
}

impl ProjectionEngine {
    pub fn new(op: OperatorMatrix) -> Result<Self> {
        let factorization = SpectralFactorization::new(&op)?;
        let mut eigenvalues = factorization.eigenvalues();
        eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(ProjectionEngine {
            op,
            factorization,
            eigenvalues,
        })
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.op.bc()
    }

    /// Eigenvalues sorted by (real, imaginary) part.
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    fn check_clearance(&self, contour: &ContourSpec) -> Result<()> {
        let closest = self
            .eigenvalues
            .iter()
            .min_by(|a, b| contour.distance(**a).total_cmp(&contour.distance(**b)));
        match closest {
            Some(&z) if contour.distance(z) < CONTOUR_CLEARANCE => Err(SpectralError::EigenvalueOnContour {
                eigenvalue: z,
                distance: contour.distance(z),
                center: contour.center,
                radius: contour.radius,
            }),
            _ => Ok(()),
        }
    }

    fn contour_sum(&self, contour: &ContourSpec) -> ContourSum {
        let response = |z: Complex64| {
            let g = contour.response(z).norm();
            if g.is_nan() {
                f64::INFINITY
            } else {
                g
            }
        };
        self.factorization
            .contour_sum(&contour.nodes_and_weights(), response)
    }

    /// Unchecked trapezoidal sum `(r/nodes) Σ_j e^{iθ_j} (λ_j − L)⁻¹`.
    pub fn raw_quadrature(&self, contour: &ContourSpec) -> DMatrix<Complex64> {
        self.contour_sum(contour).matrix
    }

    pub fn riesz_projection(&self, contour: &ContourSpec) -> Result<ProjectionResult> {
        self.check_clearance(contour)?;
        ProjectionResult::accept(self.contour_sum(contour), *contour)
    }

    /// Projection for the disc `|λ − n| < radius`.
    pub fn disc_projection(&self, n: i64, radius: f64, nodes: usize) -> Result<ProjectionResult> {
        self.riesz_projection(&ContourSpec::disc(n, radius, nodes)?)
    }

    /// Projection for `|z| < N − 1/2`.
    pub fn global_projection(&self, n: i64, nodes: usize) -> Result<ProjectionResult> {
        self.riesz_projection(&ContourSpec::global(n, nodes)?)
    }

    /// Number of eigenvalues in each closed disc `|λ − n| <= radius`, `|n| <= limit`.
    pub fn localization_counts(&self, radius: f64, limit: i64) -> BTreeMap<i64, usize> {
        localization_counts(&self.eigenvalues, self.bc(), radius, limit)
    }
}

pub fn riesz_projection(op: &OperatorMatrix, contour: &ContourSpec) -> Result<ProjectionResult> {
    ProjectionEngine::new(op.clone())?.riesz_projection(contour)
}

/// Same quadrature evaluated with one LU solve per node.
pub fn riesz_projection_by_solves(op: &OperatorMatrix, contour: &ContourSpec) -> Result<ProjectionResult> {
    let n = op.dim();
    let mut matrix = DMatrix::<Complex64>::zeros(n, n);
    for (lambda, weight) in contour.nodes_and_weights() {
        matrix += ShiftedSolve::new(op, lambda)?.inverse() * weight;
    }
    let idempotency_residual = (&matrix * &matrix - &matrix).norm();
    let trace = matrix.trace();
    ProjectionResult::accept(
        ContourSum {
            matrix,
            idempotency_residual,
            trace,
        },
        *contour,
    )
}

/// Exact diagonal projector onto the free eigenvectors with index `n`.
pub fn free_projection(bc: BoundaryCondition, n: i64, cutoff: usize) -> Result<ProjectionResult> {
    let basis = crate::basis::BasisIndexSet::new(bc, cutoff);
    let positions = basis.positions_of(n);
    if positions.is_empty() {
        return Err(SpectralError::ParityMismatch {
            index: n,
            lattice: bc.spectral_lattice().name(),
        });
    }
    let dim = basis.dim();
    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    for &p in &positions {
        matrix[(p, p)] = Complex64::new(1.0, 0.0);
    }
    Ok(ProjectionResult {
        matrix,
        rank: positions.len(),
        trace: Complex64::new(positions.len() as f64, 0.0),
        idempotency_residual: 0.0,
        contour: ContourSpec::disc(n, DEFAULT_RADIUS, DEFAULT_NODES)?,
    })
}

/// `‖P − P⁰‖_HS`.
pub fn deviation(p: &ProjectionResult, p0: &ProjectionResult) -> Result<f64> {
    if p.matrix.shape() != p0.matrix.shape() {
        return Err(SpectralError::DimensionMismatch {
            expected: p0.matrix.nrows(),
            actual: p.matrix.nrows(),
        });
    }
    Ok((&p.matrix - &p0.matrix).norm())
}

pub fn localization_counts(
    eigenvalues: &[Complex64],
    bc: BoundaryCondition,
    radius: f64,
    limit: i64,
) -> BTreeMap<i64, usize> {
    bc.spectral_lattice()
        .range(-limit, limit)
        .map(|n| {
            let center = Complex64::new(n as f64, 0.0);
            let count = eigenvalues.iter().filter(|z| (**z - center).norm() <= radius).count();
            (n, count)
        })
        .collect()
}

/// Smallest `N >= 1` beyond which every disc (up to `|n| <= limit`) is cleanly localized.
pub fn localization_threshold(eigenvalues: &[Complex64], bc: BoundaryCondition, radius: f64, limit: i64) -> i64 {
    let mult = bc.free_multiplicity();
    let clean = |n: i64| {
        let center = Complex64::new(n as f64, 0.0);
        let mut inner = 0;
        for z in eigenvalues {
            let d = (z - center).norm();
            if d <= LOCALIZATION_INNER * radius {
                inner += 1;
            } else if d < LOCALIZATION_OUTER * radius {
                return false;
            }
        }
        inner == mult
    };
    bc.shell(0, limit)
        .into_iter()
        .filter(|&n| !clean(n))
        .map(|n| n.abs())
        .max()
        .unwrap_or(0)
        .max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffCriterion {
    /// The resolvent bound `‖K_λ V K_λ‖_HS <= 1/2` on all outer circles.
    ResolventBound,
    /// Clean localization of the spectrum in all outer discs.
    Localization,
    /// Supplied by the caller.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffChoice {
    pub n: i64,
    pub criterion: CutoffCriterion,
    pub resolvent_threshold: Option<i64>,
    pub localization_threshold: i64,
}

/// `N = min(resolvent threshold, localization threshold)`, recording which fired.
pub fn select_cutoff(
    spec: &PotentialSpec,
    engine: &ProjectionEngine,
    cutoff: usize,
    radius: f64,
) -> Result<CutoffChoice> {
    let bc = engine.bc();
    let limit = cutoff as i64 / 2;
    let resolvent_threshold = match find_threshold_n(spec, bc, cutoff, CIRCLE_SAMPLES) {
        Ok(n) => Some(n),
        Err(SpectralError::NoThreshold { .. }) => None,
        Err(e) => return Err(e),
    };
    let loc = localization_threshold(engine.eigenvalues(), bc, radius, limit);
    let (n, criterion) = match resolvent_threshold {
        Some(t) if t <= loc => (t, CutoffCriterion::ResolventBound),
        _ => (loc, CutoffCriterion::Localization),
    };
    if n >= limit {
        return Err(SpectralError::NoThreshold { limit });
    }
    Ok(CutoffChoice {
        n,
        criterion,
        resolvent_threshold,
        localization_threshold: loc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationEntry {
    pub n: i64,
    pub rank: usize,
    pub deviation_hs: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub bc: BoundaryCondition,
    /// Ordered by `|n|`, then `n`; `cumulative` is the running sum of squared deviations.
    pub entries: Vec<DeviationEntry>,
    pub n_used: i64,
    pub k_used: usize,
    pub radius: f64,
    pub nodes: usize,
    pub cutoff: CutoffChoice,
}

impl DeviationReport {
    pub fn per_n(&self) -> BTreeMap<i64, f64> {
        self.entries.iter().map(|e| (e.n, e.deviation_hs)).collect()
    }

    /// `Σ ‖P_n − P_n⁰‖²_HS` over `lo < |n| <= hi`.
    pub fn squared_sum(&self, lo: i64, hi: i64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.n.abs() > lo && e.n.abs() <= hi)
            .map(|e| e.deviation_hs * e.deviation_hs)
            .sum()
    }
}

/// Disc indices `N < |n| <= hi` ordered by `|n|`, then `n`.
pub fn outer_indices(bc: BoundaryCondition, n: i64, hi: i64) -> Vec<i64> {
    let mut out = bc.shell(n, hi);
    out.sort_by_key(|&m| (m.abs(), m));
    out
}

/// Deviations on an existing engine; `cutoff_n` of `None` selects the cutoff automatically.
pub fn deviation_report_with(
    spec: &PotentialSpec,
    engine: &ProjectionEngine,
    cutoff_n: Option<i64>,
    radius: f64,
    nodes: usize,
) -> Result<DeviationReport> {
    let bc = engine.bc();
    let k = engine.op.basis.cutoff;
    let cutoff = match cutoff_n {
        Some(n) => {
            if n < 1 {
                return Err(SpectralError::InvalidParameter(format!("N must be at least 1, got {n}")));
            }
            CutoffChoice {
                n,
                criterion: CutoffCriterion::Fixed,
                resolvent_threshold: None,
                localization_threshold: localization_threshold(engine.eigenvalues(), bc, radius, k as i64 / 2),
            }
        }
        None => select_cutoff(spec, engine, k, radius)?,
    };
    let mut entries = Vec::new();
    let mut cumulative = 0.0;
    for n in outer_indices(bc, cutoff.n, k as i64 / 2) {
        let p = engine.disc_projection(n, radius, nodes)?;
        let p0 = free_projection(bc, n, k)?;
        let d = deviation(&p, &p0)?;
        cumulative += d * d;
        entries.push(DeviationEntry {
            n,
            rank: p.rank,
            deviation_hs: d,
            cumulative,
        });
    }
    Ok(DeviationReport {
        bc,
        entries,
        n_used: cutoff.n,
        k_used: k,
        radius,
        nodes,
        cutoff,
    })
}

pub fn deviation_report(
    spec: &PotentialSpec,
    bc: BoundaryCondition,
    cutoff: usize,
    n: Option<i64>,
    radius: f64,
    nodes: usize,
) -> Result<DeviationReport> {
    let engine = ProjectionEngine::new(build(spec, bc, cutoff))?;
    deviation_report_with(spec, &engine, n, radius, nodes)
}
