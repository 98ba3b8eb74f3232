//! Catalog of proper l.s.c. convex functions and their subdifferentials.
//!
//! Each catalog kind carries closed forms (or bounded-iteration solvers) for
//! the four objects everything downstream is built from:
//!
//! * the function value, finite exactly on its effective domain,
//! * the resolvent `J_λ x = argmin_z ½|z-x|² + λ φ(z)` (the proximal map,
//!   which is the metric projection for indicator kinds),
//! * the Yosida regularization `A_λ x = (x - J_λ x)/λ`,
//! * the minimal section (least-norm subgradient) where it exists.
//!
//! Indicator kinds describe closed convex sets; membership is decided with a
//! `1e-12` tolerance on constraint residuals because projected points land
//! within round-off of the boundary.

use crate::error::{Error, Result};
use crate::vecmath::{self, dot, norm};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Membership tolerance on constraint residuals.
pub const DOMAIN_TOL: f64 = 1e-12;
/// Stopping tolerance for the cyclic-projection solver.
pub const DYKSTRA_TOL: f64 = 1e-10;
pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;
/// Stopping tolerance for the proximal-gradient inner loop of `Sum`.
pub const PROX_GRAD_TOL: f64 = 1e-10;
pub const PROX_GRAD_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPart {
    /// Symmetric positive-semidefinite matrix, stored by rows.
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum OperatorKind {
    Zero,
    Quadratic {
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
    },
    /// Box with optional bounds; `None` means unbounded on that side.
    IndicatorBox {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
    IndicatorBall {
        center: Vec<f64>,
        radius: f64,
    },
    /// Intersection of halfspaces `normal·x <= offset`.
    IndicatorHalfspaces {
        halfspaces: Vec<Halfspace>,
    },
    ScaledL1 {
        weight: f64,
    },
    /// Quadratic plus an indicator constraint.
    Sum {
        smooth: QuadraticPart,
        constraint: Box<OperatorKind>,
    },
}

/// A convex function together with its ambient dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    pub kind: OperatorKind,
    pub dim: usize,
}

/// Interior ball certificate: `B(a, c1)` lies inside the operator domain and
/// the minimal section is bounded by `c2` on that ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorCertificate {
    pub a: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
}

/// A point of the operator graph: `slope ∈ ∂φ(point)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPair {
    pub point: Vec<f64>,
    pub slope: Vec<f64>,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, dim: usize) -> Result<Self> {
        let spec = OperatorSpec { kind, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero(dim: usize) -> Self {
        OperatorSpec { kind: OperatorKind::Zero, dim }
    }

    /// Indicator of `[0, ∞)^dim`.
    pub fn nonnegative_orthant(dim: usize) -> Self {
        OperatorSpec {
            kind: OperatorKind::IndicatorBox {
                lower: vec![Some(0.0); dim],
                upper: vec![None; dim],
            },
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dim;
        if m == 0 {
            return Err(Error::InvalidInput("operator dimension must be positive".into()));
        }
        self.validate_kind(&self.kind)?;
        Ok(())
    }

    fn validate_kind(&self, kind: &OperatorKind) -> Result<()> {
        let m = self.dim;
        match kind {
            OperatorKind::Zero => Ok(()),
            OperatorKind::Quadratic { q, c } => validate_quadratic(q, c, m),
            OperatorKind::IndicatorBox { lower, upper } => {
                if lower.len() != m || upper.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, got: lower.len().min(upper.len()) });
                }
                for i in 0..m {
                    if let (Some(l), Some(u)) = (lower[i], upper[i]) {
                        if l > u {
                            return Err(Error::InvalidInput(format!(
                                "box is empty in coordinate {i}: {l} > {u}"
                            )));
                        }
                    }
                }
                Ok(())
            }
            OperatorKind::IndicatorBall { center, radius } => {
                if center.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, got: center.len() });
                }
                if !(radius > &0.0) {
                    return Err(Error::InvalidInput("ball radius must be positive".into()));
                }
                Ok(())
            }
            OperatorKind::IndicatorHalfspaces { halfspaces } => {
                if halfspaces.is_empty() {
                    return Err(Error::InvalidInput("halfspace list is empty".into()));
                }
                for h in halfspaces {
                    if h.normal.len() != m {
                        return Err(Error::DimensionMismatch { expected: m, got: h.normal.len() });
                    }
                    if norm(&h.normal) <= 0.0 {
                        return Err(Error::InvalidInput("halfspace normal is zero".into()));
                    }
                }
                Ok(())
            }
            OperatorKind::ScaledL1 { weight } => {
                if *weight < 0.0 {
                    return Err(Error::InvalidInput("l1 weight must be nonnegative".into()));
                }
                Ok(())
            }
            OperatorKind::Sum { smooth, constraint } => {
                validate_quadratic(&smooth.q, &smooth.c, m)?;
                if !constraint.is_indicator() {
                    return Err(Error::InvalidInput(
                        "sum constraint part must be an indicator kind".into(),
                    ));
                }
                self.validate_kind(constraint)
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// φ(x), `+∞` exactly when x lies outside the effective domain.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(eval_kind(&self.kind, x))
    }

    /// The proximal map `argmin_z ½|z-x|² + λ φ(z)`.
    pub fn resolvent(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!("prox parameter must be positive, got {lambda}")));
        }
        prox_kind(&self.kind, lambda, x)
    }

    /// Yosida regularization `(x - J_λ x)/λ`.
    pub fn yosida(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        let j = self.resolvent(lambda, x)?;
        Ok(x.iter().zip(&j).map(|(xi, ji)| (xi - ji) / lambda).collect())
    }

    /// Least-norm subgradient, `None` when x is outside the operator domain.
    pub fn minimal_section(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        self.check_dim(x)?;
        Ok(minimal_section_kind(&self.kind, x))
    }

    /// Distance from x to the closure of the effective domain.
    pub fn distance_to_domain(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(vecmath::dist(x, &self.project_domain(x)?))
    }

    /// Metric projection onto the closure of the effective domain (identity
    /// for kinds finite everywhere).
    pub fn project_domain(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match &self.kind {
            OperatorKind::Zero | OperatorKind::Quadratic { .. } | OperatorKind::ScaledL1 { .. } => {
                Ok(x.to_vec())
            }
            OperatorKind::IndicatorBox { .. }
            | OperatorKind::IndicatorBall { .. }
            | OperatorKind::IndicatorHalfspaces { .. } => prox_kind(&self.kind, 1.0, x),
            OperatorKind::Sum { constraint, .. } => prox_kind(constraint, 1.0, x),
        }
    }

    /// Sampled points of the operator graph. For indicator kinds roughly 30%
    /// of the pairs sit exactly on active constraints and carry outward
    /// normals of magnitude up to 10; the rest are interior with zero slope.
    pub fn sample_graph(&self, count: usize, seed: u64) -> Result<Vec<GraphPair>> {
        if count == 0 {
            return Err(Error::InvalidInput("pair count must be at least 1".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let boundary = i % 10 < 3;
            out.push(sample_pair(self, &self.kind, boundary, &mut rng)?);
        }
        Ok(out)
    }

    /// Interior ball certificate for the operator domain.
    pub fn interior_certificate(&self) -> Result<InteriorCertificate> {
        certificate_kind(self, &self.kind)
    }
}

impl OperatorKind {
    pub fn is_indicator(&self) -> bool {
        matches!(
            self,
            OperatorKind::IndicatorBox { .. }
                | OperatorKind::IndicatorBall { .. }
                | OperatorKind::IndicatorHalfspaces { .. }
        )
    }
}

/// Worst observed violations of the resolvent and Yosida laws over a
/// randomized batch of (x, y, λ) triples plus sampled graph pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorLawReport {
    pub nonexpansive_excess: f64,
    pub yosida_lipschitz_excess: f64,
    pub yosida_monotonicity_defect: f64,
    pub moreau_defect: f64,
    pub graph_monotonicity_defect: f64,
    pub cases: u64,
}

impl OperatorLawReport {
    pub fn pass(&self) -> bool {
        self.nonexpansive_excess <= 1e-9
            && self.yosida_lipschitz_excess <= 1e-9
            && self.yosida_monotonicity_defect <= 1e-9
            && self.moreau_defect <= 1e-12
            && self.graph_monotonicity_defect <= 1e-12
    }

    pub fn worst_violation(&self) -> f64 {
        self.nonexpansive_excess
            .max(self.yosida_lipschitz_excess)
            .max(self.yosida_monotonicity_defect)
            .max(self.moreau_defect)
            .max(self.graph_monotonicity_defect)
    }
}

/// Runs the randomized operator-law battery: nonexpansive resolvent,
/// (1/λ)-Lipschitz monotone Yosida map, the Moreau identity to round-off,
/// and monotonicity across sampled graph pairs.
pub fn operator_law_battery(spec: &OperatorSpec, cases: u64, seed: u64) -> Result<OperatorLawReport> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let m = spec.dim;
    let mut report = OperatorLawReport {
        nonexpansive_excess: 0.0,
        yosida_lipschitz_excess: 0.0,
        yosida_monotonicity_defect: 0.0,
        moreau_defect: 0.0,
        graph_monotonicity_defect: 0.0,
        cases,
    };
    for _ in 0..cases {
        let x: Vec<f64> = (0..m).map(|_| 4.0 * rand_gauss(&mut rng)).collect();
        let y: Vec<f64> = (0..m).map(|_| 4.0 * rand_gauss(&mut rng)).collect();
        let lambda = 10f64.powf(rng.random_range(-3.0..1.0));
        let jx = spec.resolvent(lambda, &x)?;
        let jy = spec.resolvent(lambda, &y)?;
        let ax = spec.yosida(lambda, &x)?;
        let ay = spec.yosida(lambda, &y)?;
        let dxy = vecmath::dist(&x, &y);
        report.nonexpansive_excess = report.nonexpansive_excess.max(vecmath::dist(&jx, &jy) - dxy);
        report.yosida_lipschitz_excess = report
            .yosida_lipschitz_excess
            .max(vecmath::dist(&ax, &ay) - dxy / lambda);
        let mono = dot(&vecmath::sub(&ax, &ay), &vecmath::sub(&x, &y));
        report.yosida_monotonicity_defect = report.yosida_monotonicity_defect.max(-mono);
        for i in 0..m {
            let defect = (x[i] - (jx[i] + lambda * ax[i])).abs() / (1.0 + x[i].abs());
            report.moreau_defect = report.moreau_defect.max(defect);
        }
    }
    let pairs = spec.sample_graph((cases / 10).clamp(10, 200) as usize, seed ^ 0x9e37_79b9)?;
    for p1 in &pairs {
        for p2 in &pairs {
            let inner = dot(
                &vecmath::sub(&p1.slope, &p2.slope),
                &vecmath::sub(&p1.point, &p2.point),
            );
            report.graph_monotonicity_defect = report.graph_monotonicity_defect.max(-inner);
        }
    }
    Ok(report)
}

fn validate_quadratic(q: &[Vec<f64>], c: &[f64], m: usize) -> Result<()> {
    if q.len() != m || c.len() != m || q.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: q.len() });
    }
    let scale = vecmath::frobenius_norm(q).max(1.0);
    for i in 0..m {
        for j in 0..i {
            if (q[i][j] - q[j][i]).abs() > 1e-10 * scale {
                return Err(Error::InvalidInput(format!(
                    "quadratic matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let mat = DMatrix::from_fn(m, m, |i, j| 0.5 * (q[i][j] + q[j][i]));
    let eigs = mat.symmetric_eigenvalues();
    if eigs.iter().any(|&e| e < -1e-10 * scale) {
        return Err(Error::InvalidInput(
            "quadratic matrix is not positive semidefinite".into(),
        ));
    }
    Ok(())
}

fn eval_kind(kind: &OperatorKind, x: &[f64]) -> f64 {
    match kind {
        OperatorKind::Zero => 0.0,
        OperatorKind::Quadratic { q, c } => 0.5 * dot(&vecmath::matvec(q, x), x) + dot(c, x),
        OperatorKind::IndicatorBox { lower, upper } => {
            let inside = x.iter().enumerate().all(|(i, &xi)| {
                lower[i].is_none_or(|l| xi >= l - DOMAIN_TOL)
                    && upper[i].is_none_or(|u| xi <= u + DOMAIN_TOL)
            });
            if inside {
                0.0
            } else {
                f64::INFINITY
            }
        }
        OperatorKind::IndicatorBall { center, radius } => {
            if vecmath::dist(x, center) <= radius + DOMAIN_TOL {
                0.0
            } else {
                f64::INFINITY
            }
        }
        OperatorKind::IndicatorHalfspaces { halfspaces } => {
            let inside = halfspaces
                .iter()
                .all(|h| dot(&h.normal, x) <= h.offset + DOMAIN_TOL * norm(&h.normal).max(1.0));
            if inside {
                0.0
            } else {
                f64::INFINITY
            }
        }
        OperatorKind::ScaledL1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
        OperatorKind::Sum { smooth, constraint } => {
            let quad = OperatorKind::Quadratic { q: smooth.q.clone(), c: smooth.c.clone() };
            eval_kind(&quad, x) + eval_kind(constraint, x)
        }
    }
}

fn prox_kind(kind: &OperatorKind, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
    match kind {
        OperatorKind::Zero => Ok(x.to_vec()),
        OperatorKind::Quadratic { q, c } => quadratic_prox(q, c, lambda, x),
        OperatorKind::IndicatorBox { lower, upper } => Ok(x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let mut v = xi;
                if let Some(l) = lower[i] {
                    v = v.max(l);
                }
                if let Some(u) = upper[i] {
                    v = v.min(u);
                }
                v
            })
            .collect()),
        OperatorKind::IndicatorBall { center, radius } => {
            let d = vecmath::dist(x, center);
            if d <= *radius {
                Ok(x.to_vec())
            } else {
                let t = radius / d;
                Ok(center.iter().zip(x).map(|(c, xi)| c + t * (xi - c)).collect())
            }
        }
        OperatorKind::IndicatorHalfspaces { halfspaces } => dykstra_project(halfspaces, x),
        OperatorKind::ScaledL1 { weight } => {
            let thresh = lambda * weight;
            Ok(x.iter().map(|&v| soft_threshold(v, thresh)).collect())
        }
        OperatorKind::Sum { smooth, constraint } => sum_prox(smooth, constraint, lambda, x),
    }
}

/// Solve `(I + λQ) z = x - λc`; the system matrix is symmetric positive
/// definite for any λ > 0.
fn quadratic_prox(q: &[Vec<f64>], c: &[f64], lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
    let m = x.len();
    let a = DMatrix::from_fn(m, m, |i, j| {
        let sym = 0.5 * (q[i][j] + q[j][i]);
        if i == j {
            1.0 + lambda * sym
        } else {
            lambda * sym
        }
    });
    let rhs = DVector::from_fn(m, |i, _| x[i] - lambda * c[i]);
    let chol = a.clone().cholesky().ok_or(Error::NonConvergence {
        iterations: 0,
        residual: f64::NAN,
    })?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

fn soft_threshold(v: f64, thresh: f64) -> f64 {
    if v > thresh {
        v - thresh
    } else if v < -thresh {
        v + thresh
    } else {
        0.0
    }
}

fn halfspace_violation(h: &Halfspace, x: &[f64]) -> f64 {
    (dot(&h.normal, x) - h.offset) / norm(&h.normal)
}

fn project_halfspace(h: &Halfspace, x: &[f64]) -> Vec<f64> {
    let v = dot(&h.normal, x) - h.offset;
    if v <= 0.0 {
        x.to_vec()
    } else {
        let s = v / dot(&h.normal, &h.normal);
        x.iter().zip(&h.normal).map(|(xi, ni)| xi - s * ni).collect()
    }
}

/// Dykstra's cyclic projections onto an intersection of halfspaces.
///
/// Sweeps continue to round-off where possible; `DYKSTRA_TOL` is the
/// acceptance bound at the sweep budget, not the stopping target, because
/// downstream Yosida quotients divide the projection error by the prox
/// parameter.
fn dykstra_project(halfspaces: &[Halfspace], x: &[f64]) -> Result<Vec<f64>> {
    let m = x.len();
    let scale = 1.0 + norm(x);
    let mut z = x.to_vec();
    let mut corrections = vec![vec![0.0; m]; halfspaces.len()];
    let mut last_moved = f64::INFINITY;
    let mut stalled = 0usize;
    for _sweep in 0..DYKSTRA_MAX_SWEEPS {
        let before = z.clone();
        for (h, p) in halfspaces.iter().zip(corrections.iter_mut()) {
            let y = vecmath::add(&z, p);
            let proj = project_halfspace(h, &y);
            *p = vecmath::sub(&y, &proj);
            z = proj;
        }
        let moved = vecmath::dist(&before, &z);
        let violation = halfspaces
            .iter()
            .map(|h| halfspace_violation(h, &z).max(0.0))
            .fold(0.0f64, f64::max);
        if moved <= 1e-15 * scale && violation <= 1e-13 * scale {
            return Ok(z);
        }
        stalled = if moved >= 0.5 * last_moved { stalled + 1 } else { 0 };
        if stalled >= 64 && moved <= DYKSTRA_TOL * scale && violation <= DYKSTRA_TOL * scale {
            return Ok(z);
        }
        last_moved = moved;
    }
    let residual = halfspaces
        .iter()
        .map(|h| halfspace_violation(h, &z).max(0.0))
        .fold(0.0f64, f64::max);
    if residual <= DYKSTRA_TOL * scale {
        return Ok(z);
    }
    Err(Error::NonConvergence { iterations: DYKSTRA_MAX_SWEEPS, residual })
}

/// Proximal-gradient loop for `argmin_z ½|z-x|² + λ q(z) + λ I_C(z)`.
///
/// The smooth part is 1-strongly convex, so the fixed-point iteration with
/// step `1/L` contracts; the residual reported is the fixed-point defect.
fn sum_prox(
    smooth: &QuadraticPart,
    constraint: &OperatorKind,
    lambda: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let lip = 1.0 + lambda * vecmath::frobenius_norm(&smooth.q);
    let step = 1.0 / lip;
    let tol = PROX_GRAD_TOL * (1.0 + norm(x));
    let grad = |z: &[f64]| -> Vec<f64> {
        let qz = vecmath::matvec(&smooth.q, z);
        (0..z.len())
            .map(|i| (z[i] - x[i]) + lambda * (qz[i] + smooth.c[i]))
            .collect()
    };
    let mut z = prox_kind(constraint, 1.0, x)?;
    let mut residual = f64::INFINITY;
    for _ in 0..PROX_GRAD_MAX_ITERS {
        let g = grad(&z);
        let cand = vecmath::axpy(&z, -step, &g);
        let next = prox_kind(constraint, 1.0, &cand)?;
        residual = vecmath::dist(&next, &z) / step;
        z = next;
        if residual <= tol {
            return Ok(z);
        }
    }
    Err(Error::NonConvergence { iterations: PROX_GRAD_MAX_ITERS, residual })
}

fn minimal_section_kind(kind: &OperatorKind, x: &[f64]) -> Option<Vec<f64>> {
    match kind {
        OperatorKind::Zero => Some(vec![0.0; x.len()]),
        OperatorKind::Quadratic { q, c } => {
            Some(vecmath::add(&vecmath::matvec(q, x), c))
        }
        OperatorKind::IndicatorBox { .. }
        | OperatorKind::IndicatorBall { .. }
        | OperatorKind::IndicatorHalfspaces { .. } => {
            // zero belongs to the normal cone at every point of the set
            if eval_kind(kind, x).is_finite() {
                Some(vec![0.0; x.len()])
            } else {
                None
            }
        }
        OperatorKind::ScaledL1 { weight } => Some(
            x.iter()
                .map(|&v| if v > 0.0 { *weight } else if v < 0.0 { -*weight } else { 0.0 })
                .collect(),
        ),
        OperatorKind::Sum { smooth, constraint } => {
            if !eval_kind(constraint, x).is_finite() {
                return None;
            }
            let g = vecmath::add(&vecmath::matvec(&smooth.q, x), &smooth.c);
            let neg_g = vecmath::scale(&g, -1.0);
            let v = project_normal_cone(constraint, x, &neg_g);
            Some(vecmath::add(&g, &v))
        }
    }
}

/// Projection of `y` onto the normal cone of the constraint set at `x`
/// (a feasible point). Used to build least-norm subgradients of `Sum`.
fn project_normal_cone(kind: &OperatorKind, x: &[f64], y: &[f64]) -> Vec<f64> {
    match kind {
        OperatorKind::IndicatorBox { lower, upper } => x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let at_lower = lower[i].is_some_and(|l| (xi - l).abs() <= DOMAIN_TOL * (1.0 + l.abs()));
                let at_upper = upper[i].is_some_and(|u| (xi - u).abs() <= DOMAIN_TOL * (1.0 + u.abs()));
                match (at_lower, at_upper) {
                    (true, true) => y[i],
                    (true, false) => y[i].min(0.0),
                    (false, true) => y[i].max(0.0),
                    (false, false) => 0.0,
                }
            })
            .collect(),
        OperatorKind::IndicatorBall { center, radius } => {
            let d = vecmath::dist(x, center);
            if d < radius - DOMAIN_TOL * (1.0 + radius) {
                return vec![0.0; x.len()];
            }
            let u = vecmath::scale(&vecmath::sub(x, center), 1.0 / d);
            let t = dot(y, &u).max(0.0);
            vecmath::scale(&u, t)
        }
        OperatorKind::IndicatorHalfspaces { halfspaces } => {
            let active: Vec<&Halfspace> = halfspaces
                .iter()
                .filter(|h| halfspace_violation(h, x).abs() <= DOMAIN_TOL * 10.0)
                .collect();
            if active.is_empty() {
                return vec![0.0; x.len()];
            }
            // nonnegative least squares min_{t>=0} |y - Σ t_i n_i|² by
            // projected gradient
            let n = active.len();
            let gram = DMatrix::from_fn(n, n, |i, j| dot(&active[i].normal, &active[j].normal));
            let rhs: Vec<f64> = active.iter().map(|h| dot(&h.normal, y)).collect();
            let lip = gram.norm().max(1e-12);
            let step = 1.0 / lip;
            let mut t = vec![0.0f64; n];
            for _ in 0..5000 {
                let mut moved = 0.0f64;
                for i in 0..n {
                    let g: f64 = (0..n).map(|j| gram[(i, j)] * t[j]).sum::<f64>() - rhs[i];
                    let next = (t[i] - step * g).max(0.0);
                    moved = moved.max((next - t[i]).abs());
                    t[i] = next;
                }
                if moved <= 1e-14 {
                    break;
                }
            }
            let mut v = vec![0.0; x.len()];
            for (ti, h) in t.iter().zip(&active) {
                for (vi, ni) in v.iter_mut().zip(&h.normal) {
                    *vi += ti * ni;
                }
            }
            v
        }
        _ => vec![0.0; x.len()],
    }
}

fn sample_pair(
    spec: &OperatorSpec,
    kind: &OperatorKind,
    boundary: bool,
    rng: &mut ChaCha12Rng,
) -> Result<GraphPair> {
    let m = spec.dim;
    let gauss = |rng: &mut ChaCha12Rng| -> Vec<f64> {
        (0..m).map(|_| 2.0 * rand_gauss(rng)).collect()
    };
    match kind {
        OperatorKind::Zero => Ok(GraphPair { point: gauss(rng), slope: vec![0.0; m] }),
        OperatorKind::Quadratic { q, c } => {
            let point = gauss(rng);
            let slope = vecmath::add(&vecmath::matvec(q, &point), c);
            Ok(GraphPair { point, slope })
        }
        OperatorKind::ScaledL1 { weight } => {
            let mut point = gauss(rng);
            let mut slope: Vec<f64> = point
                .iter()
                .map(|&v| if v > 0.0 { *weight } else if v < 0.0 { -*weight } else { 0.0 })
                .collect();
            if boundary {
                // pin a coordinate at the kink and pick any valid subgradient
                let j = rng.random_range(0..m);
                point[j] = 0.0;
                slope[j] = rng.random_range(-*weight..=*weight);
            }
            Ok(GraphPair { point, slope })
        }
        OperatorKind::IndicatorBox { lower, upper } => {
            let raw = gauss(rng);
            let mut point = prox_kind(kind, 1.0, &raw)?;
            let mut slope = vec![0.0; m];
            if boundary {
                let bounded: Vec<usize> = (0..m)
                    .filter(|&i| lower[i].is_some() || upper[i].is_some())
                    .collect();
                if let Some(&j) = bounded.get(rng.random_range(0..bounded.len().max(1)).min(bounded.len().saturating_sub(1))) {
                    let mag = rng.random_range(0.0..10.0);
                    let use_lower = match (lower[j], upper[j]) {
                        (Some(_), Some(_)) => rng.random_bool(0.5),
                        (Some(_), None) => true,
                        _ => false,
                    };
                    if use_lower {
                        point[j] = lower[j].unwrap();
                        slope[j] = -mag;
                    } else if let Some(u) = upper[j] {
                        point[j] = u;
                        slope[j] = mag;
                    }
                }
            }
            Ok(GraphPair { point, slope })
        }
        OperatorKind::IndicatorBall { center, radius } => {
            let dir = random_unit(rng, m);
            if boundary {
                let point = vecmath::axpy(center, *radius, &dir);
                let mag = rng.random_range(0.0..10.0);
                Ok(GraphPair { point, slope: vecmath::scale(&dir, mag) })
            } else {
                let r = radius * rng.random_range(0.0f64..1.0).powf(1.0 / m as f64);
                Ok(GraphPair { point: vecmath::axpy(center, r, &dir), slope: vec![0.0; m] })
            }
        }
        OperatorKind::IndicatorHalfspaces { halfspaces } => {
            let cert = certificate_kind(spec, kind)?;
            let dir = random_unit(rng, m);
            // exact exit distance along the ray from the interior anchor
            let mut t_exit = f64::INFINITY;
            let mut face = None;
            for h in halfspaces {
                let along = dot(&h.normal, &dir);
                if along > 1e-14 {
                    let t = (h.offset - dot(&h.normal, &cert.a)) / along;
                    if t < t_exit {
                        t_exit = t;
                        face = Some(h);
                    }
                }
            }
            match (boundary, face) {
                (true, Some(h)) => {
                    let point = vecmath::axpy(&cert.a, t_exit, &dir);
                    let mag = rng.random_range(0.0..10.0) / norm(&h.normal);
                    Ok(GraphPair { point, slope: vecmath::scale(&h.normal, mag) })
                }
                _ => {
                    let reach = if t_exit.is_finite() { t_exit * rng.random_range(0.0..0.95) } else { rng.random_range(0.0..3.0) };
                    Ok(GraphPair { point: vecmath::axpy(&cert.a, reach, &dir), slope: vec![0.0; m] })
                }
            }
        }
        OperatorKind::Sum { smooth, constraint } => {
            let base = sample_pair(spec, constraint, boundary, rng)?;
            let grad = vecmath::add(&vecmath::matvec(&smooth.q, &base.point), &smooth.c);
            Ok(GraphPair { point: base.point, slope: vecmath::add(&grad, &base.slope) })
        }
    }
}

fn rand_gauss(rng: &mut ChaCha12Rng) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

fn random_unit(rng: &mut ChaCha12Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rand_gauss(rng)).collect();
        let n = norm(&v);
        if n > 1e-8 {
            return vecmath::scale(&v, 1.0 / n);
        }
    }
}

fn certificate_kind(spec: &OperatorSpec, kind: &OperatorKind) -> Result<InteriorCertificate> {
    let m = spec.dim;
    match kind {
        OperatorKind::Zero => Ok(InteriorCertificate { a: vec![0.0; m], c1: 1.0, c2: 0.0 }),
        OperatorKind::ScaledL1 { weight } => Ok(InteriorCertificate {
            a: vec![0.0; m],
            c1: 1.0,
            c2: weight * (m as f64).sqrt(),
        }),
        OperatorKind::Quadratic { q, c } => {
            let a = vec![0.0; m];
            let c1 = 1.0;
            let c2 = norm(c) + c1 * vecmath::frobenius_norm(q);
            Ok(InteriorCertificate { a, c1, c2 })
        }
        OperatorKind::IndicatorBox { lower, upper } => {
            let mut a = vec![0.0; m];
            let mut gap = f64::INFINITY;
            for i in 0..m {
                a[i] = match (lower[i], upper[i]) {
                    (Some(l), Some(u)) => {
                        if u - l <= 0.0 {
                            return Err(Error::Unsupported(format!(
                                "box has empty interior in coordinate {i}"
                            )));
                        }
                        0.5 * (l + u)
                    }
                    (Some(l), None) => l + 1.0,
                    (None, Some(u)) => u - 1.0,
                    (None, None) => 0.0,
                };
                if let Some(l) = lower[i] {
                    gap = gap.min(a[i] - l);
                }
                if let Some(u) = upper[i] {
                    gap = gap.min(u - a[i]);
                }
            }
            let c1 = 0.5 * gap.min(2.0);
            Ok(InteriorCertificate { a, c1, c2: 0.0 })
        }
        OperatorKind::IndicatorBall { center, radius } => Ok(InteriorCertificate {
            a: center.clone(),
            c1: (radius / 2.0).min(1.0),
            c2: 0.0,
        }),
        OperatorKind::IndicatorHalfspaces { halfspaces } => {
            // maximize the minimum normalized slack by subgradient ascent
            let slack = |x: &[f64]| -> (f64, usize) {
                let mut best = f64::INFINITY;
                let mut idx = 0;
                for (i, h) in halfspaces.iter().enumerate() {
                    let s = (h.offset - dot(&h.normal, x)) / norm(&h.normal);
                    if s < best {
                        best = s;
                        idx = i;
                    }
                }
                (best, idx)
            };
            let mut x = vec![0.0; m];
            let (mut best_slack, _) = slack(&x);
            let mut best_x = x.clone();
            for k in 0..4000 {
                let (_, idx) = slack(&x);
                let h = &halfspaces[idx];
                let step = 1.0 / ((k + 1) as f64).sqrt();
                let nn = norm(&h.normal);
                for (xi, ni) in x.iter_mut().zip(&h.normal) {
                    *xi -= step * ni / nn;
                }
                let (s, _) = slack(&x);
                if s > best_slack {
                    best_slack = s;
                    best_x = x.clone();
                }
            }
            if best_slack <= 1e-9 {
                return Err(Error::Unsupported(
                    "halfspace intersection has no detectable interior".into(),
                ));
            }
            Ok(InteriorCertificate { a: best_x, c1: (best_slack / 2.0).min(1.0), c2: 0.0 })
        }
        OperatorKind::Sum { smooth, constraint } => {
            let inner = certificate_kind(spec, constraint)?;
            let ga = vecmath::add(&vecmath::matvec(&smooth.q, &inner.a), &smooth.c);
            let c2 = norm(&ga) + inner.c1 * vecmath::frobenius_norm(&smooth.q);
            Ok(InteriorCertificate { a: inner.a, c1: inner.c1, c2 })
        }
    }
}
