//! Brownian drivers on dyadic grids, piecewise-linear approximants of the
//! stochastic variational inequality, the exact reflected oracle and the
//! solution validator.
//!
//! The sign convention throughout: dX = b dt + σ∘dw - dK with K(0) = 0 and
//! dK ∈ ∂φ(X) dt. The compensator recovered from a run therefore pushes
//! inward with the outward normal's sign, e.g. continuous downward pushing
//! at the lower boundary produces a decreasing K.

use crate::coeffs::{DiffusionSpec, DriftSpec};
use crate::dvi::{self, SkeletonInput};
use crate::error::{Error, Result};
use crate::monotone::{GraphPair, InteriorCertificate, OperatorSpec};
use crate::paths::{total_variation, GridPath};
use crate::vecmath;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Hard cap on the dyadic refinement level; 2^24 nodes per coordinate is the
/// most a desk-scale run should ever allocate.
pub const MAX_FINE_LEVEL: u32 = 24;

/// Counter-based RNG stream: `stream` selects an independent substream of
/// the generator seeded by `seed`, so Monte Carlo trials can be generated
/// in any order (or re-generated on demand) without correlation.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The stochastic problem: dX ∈ b(X)dt + σ(X)∘dw - ∂φ(X)dt, X(0) = x.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SviProblem {
    pub operator: OperatorSpec,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub start: Vec<f64>,
    pub horizon: f64,
    /// Driving dimension.
    pub noise_dim: usize,
}

impl SviProblem {
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        let m = self.operator.dim;
        self.drift.validate(m)?;
        self.diffusion.validate(m, self.noise_dim)?;
        if self.start.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.start.len() });
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        let gap = self.operator.distance_to_domain(&self.start)?;
        if gap > 1e-12 * (1.0 + vecmath::norm(&self.start)) {
            return Err(Error::InvalidInput(format!(
                "starting point is {gap:.3e} away from the operator domain"
            )));
        }
        Ok(())
    }

    /// Reflected Brownian motion on [0, ∞): the standard test problem.
    pub fn reflected_bm(start: f64, horizon: f64) -> Self {
        SviProblem {
            operator: OperatorSpec::nonnegative_orthant(1),
            drift: DriftSpec::Zero,
            diffusion: DiffusionSpec::Constant { matrix: vec![vec![1.0]] },
            start: vec![start],
            horizon,
            noise_dim: 1,
        }
    }
}

/// A Brownian path sampled on the dyadic grid of level `n_fine` over the
/// problem horizon.
#[derive(Debug, Clone)]
pub struct DyadicDriver {
    pub n_fine: u32,
    pub path: GridPath,
}

impl DyadicDriver {
    pub fn fine_dt(&self) -> f64 {
        self.path.dt()
    }
}

/// Sample a `d`-dimensional Brownian path on 2^`n_fine` slabs over [0, T].
/// Deterministic in (seed, stream).
pub fn generate_driver(
    d: usize,
    horizon: f64,
    n_fine: u32,
    seed: u64,
    stream: u64,
) -> Result<DyadicDriver> {
    if n_fine > MAX_FINE_LEVEL {
        return Err(Error::InvalidInput(format!(
            "refinement level {n_fine} exceeds the memory guard {MAX_FINE_LEVEL}"
        )));
    }
    if d == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidInput("driver needs d >= 1 and a positive horizon".into()));
    }
    let steps = 1usize << n_fine;
    let dt = horizon / steps as f64;
    let sd = dt.sqrt();
    let mut rng = trial_rng(seed, stream);
    let mut values = vec![0.0f64; (steps + 1) * d];
    for k in 1..=steps {
        for i in 0..d {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            values[k * d + i] = values[(k - 1) * d + i] + sd * z;
        }
    }
    Ok(DyadicDriver { n_fine, path: GridPath::new(dt, d, values)? })
}

/// The level-n piecewise-linear interpolant of a driver and its slab slopes.
#[derive(Debug, Clone)]
pub struct CoarsenedDriver {
    /// Values at the level-n dyadic nodes; piecewise linear in between.
    pub path: GridPath,
    /// Constant forward-difference slope on each dyadic slab.
    pub slopes: Vec<Vec<f64>>,
}

/// Keep every 2^(n_fine - n)-th node of the fine path.
pub fn coarsen_driver(driver: &DyadicDriver, n: u32) -> Result<CoarsenedDriver> {
    if n > driver.n_fine {
        return Err(Error::InvalidInput(format!(
            "cannot coarsen to level {n} above the fine level {}",
            driver.n_fine
        )));
    }
    let skip = 1usize << (driver.n_fine - n);
    let coarse_steps = 1usize << n;
    let d = driver.path.dim();
    let dt = driver.path.dt() * skip as f64;
    let mut values = Vec::with_capacity((coarse_steps + 1) * d);
    for k in 0..=coarse_steps {
        values.extend_from_slice(driver.path.node(k * skip));
    }
    let path = GridPath::new(dt, d, values)?;
    let slopes = (0..coarse_steps)
        .map(|k| {
            path.node(k + 1)
                .iter()
                .zip(path.node(k))
                .map(|(b, a)| (b - a) / dt)
                .collect()
        })
        .collect();
    Ok(CoarsenedDriver { path, slopes })
}

/// A solution pair (X, K) with its headline diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionPair {
    pub x: GridPath,
    pub k: GridPath,
    /// Total variation of K over the full horizon.
    pub tv_k: f64,
    /// Sup-norm defect of the recomputed dynamics identity.
    pub residual: f64,
    /// The driver restricted to the solution grid; kept for validation.
    pub driver: GridPath,
}

/// Solve the piecewise-linear approximant at level `n`: the driver is
/// replaced by its level-n interpolant and the controlled inequality is
/// integrated on the `substep` grid. `substep` must divide the dyadic slab.
pub fn wong_zakai_solve(
    problem: &SviProblem,
    driver: &DyadicDriver,
    n: u32,
    substep: f64,
) -> Result<SolutionPair> {
    problem.validate()?;
    if driver.path.dim() != problem.noise_dim {
        return Err(Error::DimensionMismatch {
            expected: problem.noise_dim,
            got: driver.path.dim(),
        });
    }
    if (driver.path.t_end() - problem.horizon).abs() > 1e-9 * problem.horizon {
        return Err(Error::GridMismatch(format!(
            "driver horizon {} does not match problem horizon {}",
            driver.path.t_end(),
            problem.horizon
        )));
    }
    let coarse = coarsen_driver(driver, n)?;
    let slab = coarse.path.dt();
    let ratio = slab / substep;
    if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "substep {substep} does not divide the dyadic slab {slab}"
        )));
    }
    let input = SkeletonInput {
        operator: problem.operator.clone(),
        drift: problem.drift.clone(),
        diffusion: problem.diffusion.clone(),
        control: coarse.path,
        start: problem.start.clone(),
    };
    let (x, k) = dvi::skeleton(&input, substep)?;
    let w_sub = input.control.resample(substep)?;
    finish_pair(problem, x, k, w_sub)
}

/// The reference solution for one sample path: the finest-level run on its
/// own grid. Downstream comparisons treat it as (X, K) for that path.
pub fn reference_solve(problem: &SviProblem, driver: &DyadicDriver) -> Result<SolutionPair> {
    wong_zakai_solve(problem, driver, driver.n_fine, driver.fine_dt())
}

fn finish_pair(
    problem: &SviProblem,
    x: GridPath,
    k: GridPath,
    driver: GridPath,
) -> Result<SolutionPair> {
    let tv_k = total_variation(&k, k.t_end())?;
    let residual = dynamics_defect(problem, &x, &k, &driver);
    Ok(SolutionPair { x, k, tv_k, residual, driver })
}

/// Sup-norm defect of X(t) - x - ∫b dt - ∫σ∘dw + K(t) with the Stratonovich
/// integral evaluated by midpoint sums on the solution grid.
fn dynamics_defect(problem: &SviProblem, x: &GridPath, k: &GridPath, w: &GridPath) -> f64 {
    let step = x.dt();
    let m = x.dim();
    let mut drift_acc = vec![0.0; m];
    let mut noise_acc = vec![0.0; m];
    let mut worst = 0.0f64;
    for s in 0..x.n_steps() {
        let b = problem.drift.value(x.node(s));
        let mid: Vec<f64> = x
            .node(s)
            .iter()
            .zip(x.node(s + 1))
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let dw = vecmath::sub(w.node(s + 1), w.node(s));
        let sdw = problem.diffusion.apply(&mid, &dw);
        let mut defect = 0.0f64;
        for i in 0..m {
            drift_acc[i] += step * b[i];
            noise_acc[i] += sdw[i];
            let lhs = x.node(s + 1)[i] - x.node(0)[i] - drift_acc[i] - noise_acc[i]
                + k.node(s + 1)[i];
            defect += lhs * lhs;
        }
        worst = worst.max(defect.sqrt());
    }
    worst
}

/// Exact solution of the reflected problem (φ = indicator of [0, ∞), b = 0,
/// σ = 1) by the running-maximum formula:
///
/// X(t) = x + w(t) + max(0, max_{s<=t} -(x + w(s))),  K(t) = -that maximum.
pub fn skorokhod_oracle(start: f64, w: &GridPath) -> Result<SolutionPair> {
    if start < 0.0 {
        return Err(Error::InvalidInput(format!(
            "reflected oracle needs a nonnegative start, got {start}"
        )));
    }
    if w.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: w.dim() });
    }
    let n = w.n_steps();
    let mut running = 0.0f64;
    let mut xs = Vec::with_capacity(n + 1);
    let mut ks = Vec::with_capacity(n + 1);
    for k in 0..=n {
        running = running.max(-(start + w.node(k)[0]));
        xs.push(start + w.node(k)[0] + running);
        ks.push(-running);
    }
    let x = GridPath::scalar(w.dt(), xs)?;
    let k = GridPath::scalar(w.dt(), ks)?;
    let tv_k = total_variation(&k, k.t_end())?;
    Ok(SolutionPair { x, k, tv_k, residual: 0.0, driver: w.clone() })
}

/// Per-clause validation of a solution pair, following the definition of a
/// solution plus the interior-point inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionReport {
    pub initial_gap: f64,
    pub max_domain_distance: f64,
    pub initial_ok: bool,
    pub feasible: bool,
    pub k_starts_at_zero: bool,
    pub tv_k: f64,
    pub dynamics_residual: f64,
    pub dynamics_budget: f64,
    pub dynamics_ok: bool,
    pub flow_min_slack: f64,
    pub flow_ok: bool,
    pub interior_min_slack: f64,
    pub interior_ok: bool,
    pub pass: bool,
}

pub const FLOW_SLACK_TOL: f64 = 1e-6;
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Checks, in order: X(0) = x and pathwise feasibility; K(0) = 0 with finite
/// variation; the integrated dynamics identity within the solver budget
/// `5 sqrt(substep) (1 + sup|w|)`; the flow inequality against sampled graph
/// pairs; and the interior-point inequality for the supplied certificate.
pub fn validate_solution(
    problem: &SviProblem,
    sol: &SolutionPair,
    pairs: &[GraphPair],
    cert: &InteriorCertificate,
) -> Result<SolutionReport> {
    let initial_gap = vecmath::dist(sol.x.node(0), &problem.start);
    let initial_ok = initial_gap <= FEASIBILITY_TOL;

    let mut max_dist = 0.0f64;
    for k in 0..=sol.x.n_steps() {
        max_dist = max_dist.max(problem.operator.distance_to_domain(sol.x.node(k))?);
    }
    let feasible = max_dist <= FEASIBILITY_TOL;

    let k_starts_at_zero = vecmath::norm(sol.k.node(0)) <= 1e-12;
    let tv_k = total_variation(&sol.k, sol.k.t_end())?;

    let sup_w = (0..=sol.driver.n_steps())
        .map(|k| vecmath::norm(sol.driver.node(k)))
        .fold(0.0f64, f64::max);
    let dynamics_budget = 5.0 * sol.x.dt().sqrt() * (1.0 + sup_w);
    let dynamics_residual = dynamics_defect(problem, &sol.x, &sol.k, &sol.driver);
    let dynamics_ok = dynamics_residual <= dynamics_budget;

    let flow_min_slack = dvi::validate_flow(&sol.x, &sol.k, pairs)?;
    let flow_ok = flow_min_slack >= -FLOW_SLACK_TOL;

    let n = sol.x.n_steps();
    let mut interior_min_slack = f64::INFINITY;
    for (s, t) in [(0, n), (0, n / 2), (n / 4, 3 * n / 4), (n / 2, n)] {
        if s < t {
            interior_min_slack = interior_min_slack
                .min(dvi::interior_inequality_slack(&sol.x, &sol.k, cert, s, t)?);
        }
    }
    let interior_ok = interior_min_slack >= -FLOW_SLACK_TOL;

    let pass =
        initial_ok && feasible && k_starts_at_zero && tv_k.is_finite() && dynamics_ok && flow_ok && interior_ok;
    Ok(SolutionReport {
        initial_gap,
        max_domain_distance: max_dist,
        initial_ok,
        feasible,
        k_starts_at_zero,
        tv_k,
        dynamics_residual,
        dynamics_budget,
        dynamics_ok,
        flow_min_slack,
        flow_ok,
        interior_min_slack,
        interior_ok,
        pass,
    })
}
