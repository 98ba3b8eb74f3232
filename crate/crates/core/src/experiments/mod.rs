//! Seeded Monte Carlo studies.
//!
//! Every study derives the randomness of trial i from `(seed, stream = i)`,
//! maps trials in fixed index chunks and reduces sequentially afterwards, so
//! reports are bit-identical whatever the worker count. Rejection-sampled
//! studies scan their full draw budget for acceptance first (cheap, path
//! thrown away) and then re-generate only the accepted draws by stream id.

pub mod levy;
pub mod report;
pub mod smallball;

pub use levy::{levy_area_study, LevyArea, LevyAreaConfig};
pub use report::{binomial_half_width, linear_fit, Cell, ExperimentReport};
pub use smallball::{band_probability, small_ball_study, SmallBallConfig};

use crate::dvi::{self, SkeletonInput};
use crate::error::{Error, Result};
use crate::paths::{sup_distance, total_variation, GridPath};
use crate::svi::{coarsen_driver, generate_driver, reference_solve, wong_zakai_solve, SviProblem};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitTheoremConfig {
    pub problem: SviProblem,
    pub levels: Vec<u32>,
    pub n_fine: u32,
    pub eps: f64,
    pub trials: u64,
    pub seed: u64,
}

impl LimitTheoremConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be positive".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidInput("level list must be nonempty".into()));
        }
        if self.levels.iter().any(|&n| n > self.n_fine) {
            return Err(Error::InvalidInput(
                "every level must lie at or below the fine level".into(),
            ));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidInput("eps must be positive".into()));
        }
        Ok(())
    }
}

/// Per-trial error `sup|X_n - X_ref| + sup|K_n - K_ref|`, indexed
/// `[level][trial]`. Failed trials surface as infinite errors.
pub fn limit_theorem_errors(cfg: &LimitTheoremConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let per_trial: Vec<Vec<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|stream| trial_errors(cfg, stream, false))
        .collect();
    Ok(transpose(per_trial, cfg.levels.len()))
}

/// Same quantity computed through the skeleton route: the level-n driver is
/// coarsened explicitly and fed to the controlled-inequality integrator as
/// a piecewise-smooth control.
pub fn support_direct_errors(cfg: &LimitTheoremConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let per_trial: Vec<Vec<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|stream| trial_errors(cfg, stream, true))
        .collect();
    Ok(transpose(per_trial, cfg.levels.len()))
}

fn trial_errors(cfg: &LimitTheoremConfig, stream: u64, via_skeleton: bool) -> Vec<f64> {
    let horizon = cfg.problem.horizon;
    let run = || -> Result<Vec<f64>> {
        let drv = generate_driver(cfg.problem.noise_dim, horizon, cfg.n_fine, cfg.seed, stream)?;
        let reference = reference_solve(&cfg.problem, &drv)?;
        let mut out = Vec::with_capacity(cfg.levels.len());
        for &n in &cfg.levels {
            let (x_n, k_n) = if via_skeleton {
                let coarse = coarsen_driver(&drv, n)?;
                let input = SkeletonInput {
                    operator: cfg.problem.operator.clone(),
                    drift: cfg.problem.drift.clone(),
                    diffusion: cfg.problem.diffusion.clone(),
                    control: coarse.path,
                    start: cfg.problem.start.clone(),
                };
                dvi::skeleton(&input, drv.fine_dt())?
            } else {
                let sol = wong_zakai_solve(&cfg.problem, &drv, n, drv.fine_dt())?;
                (sol.x, sol.k)
            };
            let err = sup_distance(&x_n, &reference.x, horizon)?
                + sup_distance(&k_n, &reference.k, horizon)?;
            out.push(err);
        }
        Ok(out)
    };
    run().unwrap_or_else(|_| vec![f64::INFINITY; cfg.levels.len()])
}

fn transpose(per_trial: Vec<Vec<f64>>, n_levels: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(per_trial.len()); n_levels];
    for row in &per_trial {
        for (j, &e) in row.iter().enumerate() {
            out[j].push(e);
        }
    }
    out
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Distribution-free 95% half-width for the median from order statistics.
fn median_half_width(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n < 4 {
        return f64::NAN;
    }
    let spread = 1.96 * (n as f64).sqrt() / 2.0;
    let lo = ((n as f64 / 2.0 - spread).floor().max(0.0)) as usize;
    let hi = ((n as f64 / 2.0 + spread).ceil() as usize).min(n - 1);
    0.5 * (sorted[hi] - sorted[lo])
}

fn errors_to_cells(cfg: &LimitTheoremConfig, errors: &[Vec<f64>], report: &mut ExperimentReport) {
    for (j, &n) in cfg.levels.iter().enumerate() {
        let errs = &errors[j];
        let failures = errs.iter().filter(|e| e.is_infinite()).count() as u64;
        let hits = errs.iter().filter(|&&e| e > cfg.eps).count() as u64;
        let mut sorted: Vec<f64> = errs.clone();
        sorted.sort_by(f64::total_cmp);
        let cell = Cell::binomial(format!("level={n}"), hits, cfg.trials)
            .with_extra("level", n as f64)
            .with_extra("median_error", median(&sorted))
            .with_extra("median_half_width", median_half_width(&sorted))
            .with_extra("failed_trials", failures as f64);
        report.cells.push(cell);
    }
}

/// Convergence of the piecewise-linear approximants to the reference pair:
/// per level, the exceedance probability of the combined sup error and the
/// median error across trials.
pub fn limit_theorem_study(cfg: &LimitTheoremConfig) -> Result<ExperimentReport> {
    let started = std::time::Instant::now();
    let errors = limit_theorem_errors(cfg)?;
    let mut report = ExperimentReport::new(
        "limit_theorem",
        serde_json::to_value(cfg).map_err(|e| Error::Parse(e.to_string()))?,
        cfg.seed,
    );
    errors_to_cells(cfg, &errors, &mut report);
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// The direct-inclusion witness: distances from the reference pair to the
/// skeleton pairs of the coarsened drivers. Structurally the same numbers as
/// [`limit_theorem_study`]; the route through the skeleton integrator is the
/// point of the exercise.
pub fn support_direct_study(cfg: &LimitTheoremConfig) -> Result<ExperimentReport> {
    let started = std::time::Instant::now();
    let errors = support_direct_errors(cfg)?;
    let mut report = ExperimentReport::new(
        "support_direct",
        serde_json::to_value(cfg).map_err(|e| Error::Parse(e.to_string()))?,
        cfg.seed,
    );
    errors_to_cells(cfg, &errors, &mut report);
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityConfig {
    pub problem: SviProblem,
    /// Piecewise-smooth anchor control; absent means the zero control.
    pub control: Option<GridPath>,
    pub eps: f64,
    /// Conditioning radii, strictly decreasing.
    pub deltas: Vec<f64>,
    pub trials_target: u64,
    pub max_draws: u64,
    pub n_fine: u32,
    pub seed: u64,
}

impl ContinuityConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.deltas.is_empty() || self.deltas.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::InvalidInput("deltas must be strictly decreasing".into()));
        }
        if self.trials_target == 0 || self.max_draws == 0 {
            return Err(Error::InvalidInput("trial budget must be positive".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidInput("eps must be positive".into()));
        }
        Ok(())
    }
}

/// Conditional closeness of the solution pair to the anchor skeleton pair.
///
/// Drivers are rejection-sampled on `sup|w - h| < δ`; each accepted draw
/// contributes the indicator of `sup|X - ξ| + sup|K - η| < ε`. The cell
/// extras carry the total-variation variant of the K distance, the K-only
/// and X-only events, and the acceptance rate. Cells that fail to reach the
/// target count are flagged, never padded.
pub fn approx_continuity_study(cfg: &ContinuityConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let steps = 1usize << cfg.n_fine;
    let fine_dt = cfg.problem.horizon / steps as f64;
    let d = cfg.problem.noise_dim;
    let control = match &cfg.control {
        Some(h) => h.resample(fine_dt)?,
        None => GridPath::constant(fine_dt, &vec![0.0; d], steps + 1)?,
    };
    if (control.t_end() - cfg.problem.horizon).abs() > 1e-9 {
        return Err(Error::GridMismatch("control must span the problem horizon".into()));
    }
    let anchor_input = SkeletonInput {
        operator: cfg.problem.operator.clone(),
        drift: cfg.problem.drift.clone(),
        diffusion: cfg.problem.diffusion.clone(),
        control: control.clone(),
        start: cfg.problem.start.clone(),
    };
    let (xi, eta) = dvi::skeleton(&anchor_input, fine_dt)?;

    // pass 1: acceptance statistic per draw
    let chunk = 1024u64;
    let n_chunks = cfg.max_draws.div_ceil(chunk);
    let gaps: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(cfg.max_draws);
            (lo..hi)
                .map(|stream| {
                    driver_gap(&cfg.problem, &control, cfg.n_fine, cfg.seed, stream)
                })
                .collect::<Vec<_>>()
                .into_iter()
        })
        .collect();

    let mut accepted: Vec<Vec<u64>> = Vec::new();
    let mut full_rates: Vec<f64> = Vec::new();
    let mut draws_to_target: Vec<u64> = Vec::new();
    for &delta in &cfg.deltas {
        let mut list = Vec::new();
        let mut scanned_at_target = cfg.max_draws;
        for (idx, &g) in gaps.iter().enumerate() {
            if g < delta && (list.len() as u64) < cfg.trials_target {
                list.push(idx as u64);
                if list.len() as u64 == cfg.trials_target {
                    scanned_at_target = idx as u64 + 1;
                }
            }
        }
        full_rates.push(
            gaps.iter().filter(|&&g| g < delta).count() as f64 / cfg.max_draws as f64,
        );
        draws_to_target.push(scanned_at_target);
        accepted.push(list);
    }

    // pass 2: solve the union of accepted draws
    type DrawDistances = (f64, f64, f64);
    let mut needed: Vec<u64> = accepted.iter().flatten().copied().collect();
    needed.sort_unstable();
    needed.dedup();
    let horizon = cfg.problem.horizon;
    let solved: Vec<(u64, Result<DrawDistances>)> = needed
        .par_iter()
        .map(|&stream| {
            let res = (|| {
                let drv = generate_driver(d, horizon, cfg.n_fine, cfg.seed, stream)?;
                let sol = reference_solve(&cfg.problem, &drv)?;
                let dx = sup_distance(&sol.x, &xi, horizon)?;
                let dk = sup_distance(&sol.k, &eta, horizon)?;
                let diff_k = subtract_paths(&sol.k, &eta)?;
                let tvk = total_variation(&diff_k, horizon)?;
                Ok((dx, dk, tvk))
            })();
            (stream, res)
        })
        .collect();
    let lookup: std::collections::HashMap<u64, (f64, f64, f64)> = solved
        .into_iter()
        .map(|(s, r)| (s, r.unwrap_or((f64::INFINITY, f64::INFINITY, f64::INFINITY))))
        .collect();

    let mut report = ExperimentReport::new(
        "approx_continuity",
        serde_json::to_value(cfg).map_err(|e| Error::Parse(e.to_string()))?,
        cfg.seed,
    );
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let draws = &accepted[di];
        let n = draws.len() as u64;
        let rate = full_rates[di];
        let mut sup_hits = 0u64;
        let mut tv_hits = 0u64;
        let mut k_hits = 0u64;
        let mut x_hits = 0u64;
        for s in draws {
            let (dx, dk, tvk) = lookup[s];
            if dx + dk < cfg.eps {
                sup_hits += 1;
            }
            if dx + tvk < cfg.eps {
                tv_hits += 1;
            }
            if dk < cfg.eps {
                k_hits += 1;
            }
            if dx < cfg.eps {
                x_hits += 1;
            }
        }
        let mut cell = Cell::binomial(format!("delta={delta}"), sup_hits, n)
            .with_extra("delta", delta)
            .with_extra("acceptance_rate", rate)
            .with_extra("accepted", n as f64)
            .with_extra("raw_draws", draws_to_target[di] as f64);
        if n > 0 {
            cell = cell
                .with_extra("tv_variant", tv_hits as f64 / n as f64)
                .with_extra("k_part_only", k_hits as f64 / n as f64)
                .with_extra("x_part_only", x_hits as f64 / n as f64);
        }
        if n < cfg.trials_target {
            cell.under_powered = true;
        }
        report.cells.push(cell);
    }
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Sup-norm gap between a freshly generated driver and the anchor control,
/// computed without retaining the path.
fn driver_gap(problem: &SviProblem, control: &GridPath, n_fine: u32, seed: u64, stream: u64) -> f64 {
    let steps = 1usize << n_fine;
    let dt = problem.horizon / steps as f64;
    let sd = dt.sqrt();
    let d = problem.noise_dim;
    let mut rng = crate::svi::trial_rng(seed, stream);
    let mut w = vec![0.0f64; d];
    let mut worst = 0.0f64;
    for k in 1..=steps {
        let h = control.node(k);
        let mut gap_sq = 0.0;
        for (i, wi) in w.iter_mut().enumerate() {
            let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
            *wi += sd * z;
            let g = *wi - h[i];
            gap_sq += g * g;
        }
        worst = worst.max(gap_sq.sqrt());
    }
    worst
}

fn subtract_paths(a: &GridPath, b: &GridPath) -> Result<GridPath> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch("cannot subtract paths on different grids".into()));
    }
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x - y)
        .collect();
    GridPath::new(a.dt(), a.dim(), values)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KTailConfig {
    pub problem: SviProblem,
    pub trials: u64,
    pub n_fine: u32,
    pub r_grid: Vec<f64>,
    pub seed: u64,
}

impl KTailConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.trials == 0 || self.r_grid.is_empty() {
            return Err(Error::InvalidInput("k-tail study needs trials and an r grid".into()));
        }
        Ok(())
    }
}

/// Tail of the compensator's total variation, with a Gaussian-type fit of
/// the log-tail against r² over the powered cells and the pathwise bound
/// cross-check `|K|_T <= 2 sup|w| + |x|` recorded per trial.
pub fn k_tail_study(cfg: &KTailConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let stats: Vec<(f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|stream| {
            let run = || -> Result<(f64, f64)> {
                let drv = generate_driver(
                    cfg.problem.noise_dim,
                    cfg.problem.horizon,
                    cfg.n_fine,
                    cfg.seed,
                    stream,
                )?;
                let sol = reference_solve(&cfg.problem, &drv)?;
                let sup_w = (0..=drv.path.n_steps())
                    .map(|k| {
                        drv.path.node(k).iter().map(|v| v * v).sum::<f64>().sqrt()
                    })
                    .fold(0.0f64, f64::max);
                Ok((sol.tv_k, sup_w))
            };
            run().unwrap_or((f64::INFINITY, 0.0))
        })
        .collect();

    let start_norm = cfg.problem.start.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bound_violations = stats
        .iter()
        .filter(|(tv, sw)| tv.is_finite() && *tv > 2.0 * sw + start_norm + 1e-9)
        .count() as u64;
    let p_k_gt_3 =
        stats.iter().filter(|(tv, _)| *tv > 3.0).count() as f64 / cfg.trials as f64;
    let p_w_gt_1p5 =
        stats.iter().filter(|(_, sw)| *sw > 1.5).count() as f64 / cfg.trials as f64;

    let mut report = ExperimentReport::new(
        "k_tail",
        serde_json::to_value(cfg).map_err(|e| Error::Parse(e.to_string()))?,
        cfg.seed,
    );
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &r in &cfg.r_grid {
        let hits = stats.iter().filter(|(tv, _)| *tv > r).count() as u64;
        let mut cell = Cell::binomial(format!("r={r}"), hits, cfg.trials)
            .with_extra("r", r)
            .with_extra("hits", hits as f64);
        if hits < 50 {
            cell.under_powered = true;
        } else if hits < cfg.trials {
            let p = hits as f64 / cfg.trials as f64;
            xs.push(r * r);
            ys.push(p.ln());
        }
        report.cells.push(cell);
    }
    if xs.len() >= 2 {
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        report.summary.insert("fit_slope".into(), slope);
        report.summary.insert("fit_intercept".into(), intercept);
        report.summary.insert("fit_r_squared".into(), r2);
    }
    report.summary.insert("observable_cells".into(), xs.len() as f64);
    report.summary.insert("bound_violations".into(), bound_violations as f64);
    report.summary.insert("p_tv_k_gt_3".into(), p_k_gt_3);
    report.summary.insert("p_sup_w_gt_1.5".into(), p_w_gt_1p5);
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}
