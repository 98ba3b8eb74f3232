//! Deterministic variational inequality integration.
//!
//! The integrator is the implicit proximal (catching-up) scheme: each step
//! takes an explicit increment from the forcing and then applies the
//! resolvent, which keeps every iterate feasible and reduces to the discrete
//! reflection recursion in the constrained case. Controlled problems driven
//! by a piecewise-smooth path use a midpoint re-evaluation of the diffusion
//! factor, consistent with the Stratonovich reading of the driver.

use crate::coeffs::{DiffusionSpec, DriftSpec};
use crate::error::{Error, Result};
use crate::monotone::{GraphPair, InteriorCertificate, OperatorSpec};
use crate::paths::{total_variation, GridPath};
use crate::vecmath;
use serde::{Deserialize, Serialize};

/// How far the starting point may sit from the operator domain before the
/// problem is rejected.
pub const START_GAP_TOL: f64 = 1e-6;

/// u' ∈ -∂φ(u) + f with a grid forcing path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DviProblem {
    pub operator: OperatorSpec,
    pub forcing: GridPath,
    pub start: Vec<f64>,
    pub horizon: f64,
}

impl DviProblem {
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        if self.start.len() != self.operator.dim {
            return Err(Error::DimensionMismatch {
                expected: self.operator.dim,
                got: self.start.len(),
            });
        }
        if self.forcing.dim() != self.operator.dim {
            return Err(Error::DimensionMismatch {
                expected: self.operator.dim,
                got: self.forcing.dim(),
            });
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        if self.forcing.t_end() < self.horizon - 1e-12 {
            return Err(Error::InvalidInput(format!(
                "forcing grid ends at {} before the horizon {}",
                self.forcing.t_end(),
                self.horizon
            )));
        }
        let gap = self.operator.distance_to_domain(&self.start)?;
        if gap > START_GAP_TOL {
            return Err(Error::InvalidInput(format!(
                "starting point is {gap:.3e} away from the operator domain"
            )));
        }
        Ok(())
    }
}

/// Controlled problem: ξ' ∈ b(ξ) + σ(ξ) h' - ∂φ(ξ) with h piecewise linear.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonInput {
    pub operator: OperatorSpec,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    /// Control path with h(0) = 0, values in R^d.
    pub control: GridPath,
    pub start: Vec<f64>,
}

impl SkeletonInput {
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        let m = self.operator.dim;
        self.drift.validate(m)?;
        self.diffusion.validate(m, self.control.dim())?;
        if self.start.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.start.len() });
        }
        if vecmath::norm(self.control.node(0)) > 1e-12 {
            return Err(Error::InvalidInput("control path must start at 0".into()));
        }
        let gap = self.operator.distance_to_domain(&self.start)?;
        if gap > START_GAP_TOL {
            return Err(Error::InvalidInput(format!(
                "starting point is {gap:.3e} away from the operator domain"
            )));
        }
        Ok(())
    }
}

fn steps_for(horizon: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let ratio = horizon / step;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "step {step} does not divide the horizon {horizon}"
        )));
    }
    Ok(n as usize)
}

/// Catching-up integration: `u_{k+1} = J_step(u_k + step f(t_k))`.
pub fn solve_dvi(problem: &DviProblem, step: f64) -> Result<GridPath> {
    problem.validate()?;
    let n = steps_for(problem.horizon, step)?;
    let ratio = problem.forcing.dt() / step;
    if (ratio - ratio.round()).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "step {step} does not subdivide the forcing grid step {}",
            problem.forcing.dt()
        )));
    }
    let m = problem.operator.dim;
    let mut u = problem.start.clone();
    let mut values = Vec::with_capacity((n + 1) * m);
    values.extend_from_slice(&u);
    for k in 0..n {
        let f_k = problem.forcing.sample(k as f64 * step);
        let drifted = vecmath::axpy(&u, step, &f_k);
        u = problem.operator.resolvent(step, &drifted)?;
        values.extend_from_slice(&u);
    }
    GridPath::new(step, m, values)
}

/// Discrete energy-inequality report for a catching-up solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrezisReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `(Σ |Δu|²/step)^{1/2} <= (Σ step |f|²)^{1/2} + sqrt(|φ(u_0)|)`
/// with 5% slack.
pub fn brezis_energy_check(problem: &DviProblem, u: &GridPath) -> Result<BrezisReport> {
    let step = u.dt();
    let mut deriv_sq = 0.0;
    let mut forcing_sq = 0.0;
    for k in 0..u.n_steps() {
        let du = vecmath::dist(u.node(k + 1), u.node(k));
        deriv_sq += du * du / step;
        let f_k = problem.forcing.sample(k as f64 * step);
        forcing_sq += step * vecmath::dot(&f_k, &f_k);
    }
    let phi0 = problem.operator.evaluate(u.node(0))?;
    let phi0 = if phi0.is_finite() { phi0.abs() } else { 0.0 };
    let lhs = deriv_sq.sqrt();
    let rhs = forcing_sq.sqrt() + phi0.sqrt();
    Ok(BrezisReport { lhs, rhs, pass: lhs <= rhs * 1.05 + 1e-12 })
}

/// Integrates the controlled inequality and returns the pair (ξ, η) where
/// η(t) = x + ∫b(ξ) + ∫σ(ξ)h' - ξ(t) accumulates whatever the resolvent
/// removed; η(0) = 0 and η has finite variation.
pub fn skeleton(input: &SkeletonInput, step: f64) -> Result<(GridPath, GridPath)> {
    input.validate()?;
    let n = steps_for(input.control.t_end(), step)?;
    let h = input.control.resample(step)?;
    let m = input.operator.dim;
    let frozen_diffusion = input.diffusion.state_independent();

    let mut xi = input.start.clone();
    let mut eta = vec![0.0; m];
    let mut xi_values = Vec::with_capacity((n + 1) * m);
    let mut eta_values = Vec::with_capacity((n + 1) * m);
    xi_values.extend_from_slice(&xi);
    eta_values.extend_from_slice(&eta);

    for k in 0..n {
        let slope: Vec<f64> = h
            .node(k + 1)
            .iter()
            .zip(h.node(k))
            .map(|(b, a)| (b - a) / step)
            .collect();
        let drift = input.drift.value(&xi);
        let diffused = if frozen_diffusion {
            input.diffusion.apply(&xi, &slope)
        } else {
            // midpoint re-evaluation through a feasible predictor
            let pred_rate = vecmath::add(&drift, &input.diffusion.apply(&xi, &slope));
            let pred = input.operator.resolvent(step, &vecmath::axpy(&xi, step, &pred_rate))?;
            let mid: Vec<f64> = xi.iter().zip(&pred).map(|(a, b)| 0.5 * (a + b)).collect();
            input.diffusion.apply(&mid, &slope)
        };
        let rate = vecmath::add(&drift, &diffused);
        let next = input.operator.resolvent(step, &vecmath::axpy(&xi, step, &rate))?;
        for i in 0..m {
            eta[i] += step * rate[i] - (next[i] - xi[i]);
        }
        xi = next;
        xi_values.extend_from_slice(&xi);
        eta_values.extend_from_slice(&eta);
    }
    Ok((
        GridPath::new(step, m, xi_values)?,
        GridPath::new(step, m, eta_values)?,
    ))
}

/// Minimum, over grid intervals and test pairs, of
/// `<u_{k+1} - α, Δg_k - β step> / step`.
///
/// The state is paired with the right endpoint of each interval because the
/// implicit scheme produces its subgradient increments there; a valid pair
/// (u, g) yields a min-slack no smaller than minus the inner solver
/// tolerance.
pub fn validate_flow(u: &GridPath, g: &GridPath, pairs: &[GraphPair]) -> Result<f64> {
    if !u.same_grid(g) {
        return Err(Error::GridMismatch("state and flow paths disagree".into()));
    }
    if vecmath::norm(g.node(0)) > 1e-12 {
        return Err(Error::InvalidInput("flow path must start at 0".into()));
    }
    let step = u.dt();
    let mut min_slack = f64::INFINITY;
    for k in 0..u.n_steps() {
        let state = u.node(k + 1);
        let dg = vecmath::sub(g.node(k + 1), g.node(k));
        for pair in pairs {
            let lhs: f64 = (0..u.dim())
                .map(|i| (state[i] - pair.point[i]) * (dg[i] - pair.slope[i] * step))
                .sum();
            min_slack = min_slack.min(lhs / step);
        }
    }
    Ok(min_slack)
}

/// Slack of the interior-point inequality on a grid window `[s_idx, t_idx]`:
///
/// `Σ <ξ_{k+1} - a, Δη_k>  >=  c1 (|η|_t - |η|_s) - c2 ∫ |ξ - a| - c1 c2 (t - s)`
///
/// Returns lhs - rhs; a valid pair keeps this above minus the prox
/// tolerance.
pub fn interior_inequality_slack(
    xi: &GridPath,
    eta: &GridPath,
    cert: &InteriorCertificate,
    s_idx: usize,
    t_idx: usize,
) -> Result<f64> {
    if !xi.same_grid(eta) {
        return Err(Error::GridMismatch("state and flow paths disagree".into()));
    }
    if s_idx >= t_idx || t_idx > xi.n_steps() {
        return Err(Error::InvalidInput(format!(
            "bad window [{s_idx}, {t_idx}] on {} intervals",
            xi.n_steps()
        )));
    }
    let step = xi.dt();
    let mut lhs = 0.0;
    let mut state_integral = 0.0;
    for k in s_idx..t_idx {
        let state = xi.node(k + 1);
        let deta = vecmath::sub(eta.node(k + 1), eta.node(k));
        lhs += vecmath::dot(&vecmath::sub(state, &cert.a), &deta);
        state_integral += step * vecmath::dist(state, &cert.a);
    }
    let tv_gain = total_variation(eta, t_idx as f64 * step)?
        - total_variation(eta, s_idx as f64 * step)?;
    let elapsed = (t_idx - s_idx) as f64 * step;
    let rhs = cert.c1 * tv_gain - cert.c2 * state_integral - cert.c1 * cert.c2 * elapsed;
    Ok(lhs - rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotone::OperatorKind;

    fn orthant_1d() -> OperatorSpec {
        OperatorSpec::nonnegative_orthant(1)
    }

    fn constant_forcing(value: f64, horizon: f64, dt: f64) -> GridPath {
        GridPath::constant(dt, &[value], (horizon / dt).round() as usize + 1).unwrap()
    }

    #[test]
    fn free_problem_integrates_constant_forcing_exactly() {
        let problem = DviProblem {
            operator: OperatorSpec::zero(1),
            forcing: constant_forcing(0.7, 1.0, 0.01),
            start: vec![0.25],
            horizon: 1.0,
        };
        let u = solve_dvi(&problem, 0.01).unwrap();
        for k in 0..=u.n_steps() {
            let t = k as f64 * 0.01;
            assert!((u.node(k)[0] - (0.25 + 0.7 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn reflected_ramp_absorbs_at_zero() {
        let problem = DviProblem {
            operator: orthant_1d(),
            forcing: constant_forcing(-1.0, 2.0, 0.001),
            start: vec![1.0],
            horizon: 2.0,
        };
        let u = solve_dvi(&problem, 0.001).unwrap();
        for k in 0..=u.n_steps() {
            let t = k as f64 * 0.001;
            let expect = (1.0 - t).max(0.0);
            assert!((u.node(k)[0] - expect).abs() <= 0.001 + 1e-12, "t={t}");
            assert!(u.node(k)[0] >= 0.0);
        }
    }

    #[test]
    fn quadratic_decay_converges_first_order() {
        let step = 1e-3;
        let problem = DviProblem {
            operator: OperatorSpec::new(
                OperatorKind::Quadratic { q: vec![vec![1.0]], c: vec![0.0] },
                1,
            )
            .unwrap(),
            forcing: constant_forcing(0.0, 1.0, step),
            start: vec![1.0],
            horizon: 1.0,
        };
        let u = solve_dvi(&problem, step).unwrap();
        let err = (u.node(u.n_steps())[0] - (-1.0f64).exp()).abs();
        assert!(err <= 2.0 * step, "error {err}");
    }

    #[test]
    fn start_far_from_domain_is_rejected() {
        let problem = DviProblem {
            operator: orthant_1d(),
            forcing: constant_forcing(0.0, 1.0, 0.1),
            start: vec![-0.5],
            horizon: 1.0,
        };
        assert!(matches!(solve_dvi(&problem, 0.1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn incompatible_step_is_rejected() {
        let problem = DviProblem {
            operator: orthant_1d(),
            forcing: constant_forcing(0.0, 1.0, 0.1),
            start: vec![0.5],
            horizon: 1.0,
        };
        // step must divide both the horizon and the forcing grid
        assert!(matches!(solve_dvi(&problem, 0.3), Err(Error::GridMismatch(_))));
        assert!(matches!(solve_dvi(&problem, 0.25), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn brezis_equality_for_free_constant_forcing() {
        let problem = DviProblem {
            operator: OperatorSpec::zero(1),
            forcing: constant_forcing(0.8, 1.0, 0.01),
            start: vec![0.0],
            horizon: 1.0,
        };
        let u = solve_dvi(&problem, 0.01).unwrap();
        let rep = brezis_energy_check(&problem, &u).unwrap();
        assert!((rep.lhs - 0.8).abs() < 1e-10);
        assert!((rep.rhs - 0.8).abs() < 1e-10);
        assert!(rep.pass);
    }

    #[test]
    fn brezis_for_reflected_ramp() {
        let problem = DviProblem {
            operator: orthant_1d(),
            forcing: constant_forcing(-1.0, 2.0, 0.001),
            start: vec![1.0],
            horizon: 2.0,
        };
        let u = solve_dvi(&problem, 0.001).unwrap();
        let rep = brezis_energy_check(&problem, &u).unwrap();
        // motion only on [0,1]: lhs = 1, rhs = sqrt(2)
        assert!((rep.lhs - 1.0).abs() < 0.01, "lhs {}", rep.lhs);
        assert!((rep.rhs - 2f64.sqrt()).abs() < 1e-9);
        assert!(rep.pass);
    }

    #[test]
    fn brezis_for_quadratic_decay() {
        let problem = DviProblem {
            operator: OperatorSpec::new(
                OperatorKind::Quadratic { q: vec![vec![1.0]], c: vec![0.0] },
                1,
            )
            .unwrap(),
            forcing: constant_forcing(0.0, 1.0, 0.001),
            start: vec![1.0],
            horizon: 1.0,
        };
        let u = solve_dvi(&problem, 0.001).unwrap();
        let rep = brezis_energy_check(&problem, &u).unwrap();
        assert!(rep.lhs <= 0.5f64.sqrt() + 1e-6);
        assert!((rep.rhs - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(rep.pass);
    }

    fn zero_control(d: usize, horizon: f64, dt: f64) -> GridPath {
        GridPath::constant(dt, &vec![0.0; d], (horizon / dt).round() as usize + 1).unwrap()
    }

    #[test]
    fn skeleton_with_zero_control_matches_catching_up() {
        let input = SkeletonInput {
            operator: orthant_1d(),
            drift: DriftSpec::Constant { value: vec![-1.0] },
            diffusion: DiffusionSpec::Sine { amp: vec![vec![1.0]], freq: 1.0 },
            control: zero_control(1, 1.0, 0.01),
            start: vec![0.4],
        };
        let (xi, _) = skeleton(&input, 0.01).unwrap();
        let problem = DviProblem {
            operator: orthant_1d(),
            forcing: constant_forcing(-1.0, 1.0, 0.01),
            start: vec![0.4],
            horizon: 1.0,
        };
        let u = solve_dvi(&problem, 0.01).unwrap();
        for k in 0..=xi.n_steps() {
            assert!((xi.node(k)[0] - u.node(k)[0]).abs() <= 1e-14);
        }
    }

    #[test]
    fn skeleton_with_zero_control_matches_catching_up_for_state_dependent_drift() {
        // feed the drift evaluated along the skeleton back in as a forcing
        // path; both integrators must then walk the same iterates
        let step = 0.01;
        let input = SkeletonInput {
            operator: orthant_1d(),
            drift: DriftSpec::Tanh { scale: vec![-2.0], rate: 1.0 },
            diffusion: DiffusionSpec::Constant { matrix: vec![vec![1.0]] },
            control: zero_control(1, 1.0, step),
            start: vec![0.4],
        };
        let (xi, _) = skeleton(&input, step).unwrap();
        let forcing_vals: Vec<f64> = (0..=xi.n_steps())
            .map(|k| input.drift.value(xi.node(k))[0])
            .collect();
        let problem = DviProblem {
            operator: orthant_1d(),
            forcing: GridPath::scalar(step, forcing_vals).unwrap(),
            start: vec![0.4],
            horizon: 1.0,
        };
        let u = solve_dvi(&problem, step).unwrap();
        for k in 0..=xi.n_steps() {
            assert!((xi.node(k)[0] - u.node(k)[0]).abs() <= 1e-14);
        }
    }

    #[test]
    fn skeleton_exponential_growth_is_second_order() {
        // ξ' = ξ h' with h(t) = t gives ξ = x e^t
        let step = 1e-3;
        let n = (1.0 / step) as usize;
        let ramp: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
        let input = SkeletonInput {
            operator: OperatorSpec::zero(1),
            drift: DriftSpec::Zero,
            diffusion: DiffusionSpec::Linear { gains: vec![vec![1.0]] },
            control: GridPath::scalar(step, ramp).unwrap(),
            start: vec![1.0],
        };
        let (xi, eta) = skeleton(&input, step).unwrap();
        let rel = (xi.node(n)[0] - 1f64.exp()).abs() / 1f64.exp();
        assert!(rel <= 10.0 * step * step, "relative error {rel}");
        // no constraint: eta stays at zero
        assert!(vecmath::norm(eta.node(n)) < 1e-12);
    }

    #[test]
    fn skeleton_reflects_downward_ramp() {
        // φ = indicator of [0,∞), σ = 1, h(t) = -t from x = 0.5
        let step = 1e-4;
        let n = (1.0 / step) as usize;
        let ramp: Vec<f64> = (0..=n).map(|k| -(k as f64) * step).collect();
        let input = SkeletonInput {
            operator: orthant_1d(),
            drift: DriftSpec::Zero,
            diffusion: DiffusionSpec::Constant { matrix: vec![vec![1.0]] },
            control: GridPath::scalar(step, ramp).unwrap(),
            start: vec![0.5],
        };
        let (xi, eta) = skeleton(&input, step).unwrap();
        for k in (0..=n).step_by(97) {
            let t = k as f64 * step;
            let xi_expect = (0.5 - t).max(0.0);
            let eta_expect = -(t - 0.5).max(0.0);
            assert!((xi.node(k)[0] - xi_expect).abs() <= step + 1e-12);
            assert!((eta.node(k)[0] - eta_expect).abs() <= step + 1e-12);
        }
    }

    #[test]
    fn eta_recovery_equals_prox_displacement_sum() {
        let step = 1e-3;
        let n = (1.0 / step) as usize;
        let wiggle: Vec<f64> = (0..=n).map(|k| (k as f64 * step * 7.0).sin() - 0.0).collect();
        let input = SkeletonInput {
            operator: orthant_1d(),
            drift: DriftSpec::Constant { value: vec![-0.5] },
            diffusion: DiffusionSpec::Constant { matrix: vec![vec![1.0]] },
            control: GridPath::scalar(step, wiggle.clone()).unwrap(),
            start: vec![0.2],
        };
        let (xi, eta) = skeleton(&input, step).unwrap();
        // replay the scheme accumulating displacements directly
        let mut x = 0.2f64;
        let mut disp = 0.0f64;
        for k in 0..n {
            let slope = (wiggle[k + 1] - wiggle[k]) / step;
            let drifted = x + step * (-0.5 + slope);
            let next = drifted.max(0.0);
            disp += drifted - next;
            x = next;
            let diff = (disp - eta.node(k + 1)[0]).abs();
            assert!(diff <= 1e-12, "recovery drifted by {diff} at step {k}");
        }
        assert!((xi.node(n)[0] - x).abs() <= 1e-15);
    }

    #[test]
    fn flow_validation_accepts_valid_pair_and_flags_corruption() {
        let step = 1e-3;
        let n = (1.0 / step) as usize;
        let ramp: Vec<f64> = (0..=n).map(|k| -(k as f64) * step).collect();
        let spec = orthant_1d();
        let input = SkeletonInput {
            operator: spec.clone(),
            drift: DriftSpec::Zero,
            diffusion: DiffusionSpec::Constant { matrix: vec![vec![1.0]] },
            control: GridPath::scalar(step, ramp).unwrap(),
            start: vec![0.5],
        };
        let (xi, eta) = skeleton(&input, step).unwrap();
        let pairs = spec.sample_graph(40, 4).unwrap();
        let slack = validate_flow(&xi, &eta, &pairs).unwrap();
        assert!(slack >= -1e-8, "valid pair rejected with slack {slack}");

        // corrupt the flow by negating its increments
        let mut bad = vec![0.0f64];
        for k in 0..eta.n_steps() {
            let d = eta.node(k + 1)[0] - eta.node(k)[0];
            let last = *bad.last().unwrap();
            bad.push(last - d);
        }
        let bad = GridPath::scalar(step, bad).unwrap();
        let slack = validate_flow(&xi, &bad, &pairs).unwrap();
        assert!(slack < -0.1, "corrupted flow passed with slack {slack}");
    }

    #[test]
    fn zero_flow_has_zero_slack_against_zero_operator() {
        let spec = OperatorSpec::zero(1);
        let u = GridPath::scalar(0.1, vec![0.3, 0.5, 0.1]).unwrap();
        let g = GridPath::scalar(0.1, vec![0.0, 0.0, 0.0]).unwrap();
        let pairs = spec.sample_graph(10, 1).unwrap();
        let slack = validate_flow(&u, &g, &pairs).unwrap();
        assert_eq!(slack, 0.0);
    }

    #[test]
    fn interior_inequality_on_reflected_skeleton() {
        let step = 1e-3;
        let n = (1.0 / step) as usize;
        let ramp: Vec<f64> = (0..=n).map(|k| -(k as f64) * step).collect();
        let spec = orthant_1d();
        let input = SkeletonInput {
            operator: spec.clone(),
            drift: DriftSpec::Zero,
            diffusion: DiffusionSpec::Constant { matrix: vec![vec![1.0]] },
            control: GridPath::scalar(step, ramp).unwrap(),
            start: vec![0.5],
        };
        let (xi, eta) = skeleton(&input, step).unwrap();
        let cert = spec.interior_certificate().unwrap();
        for (s, t) in [(0, n), (n / 4, 3 * n / 4), (n / 2, n)] {
            let slack = interior_inequality_slack(&xi, &eta, &cert, s, t).unwrap();
            assert!(slack >= -1e-6, "window ({s},{t}): slack {slack}");
        }
    }

    #[test]
    fn step_halving_contracts_for_smooth_and_constrained_problems() {
        // fixed piecewise-linear control, state-dependent drift; the
        // integration error is then genuinely step-dependent
        let dt_c = 1.0 / 16.0;
        let ctrl: Vec<f64> = (0..=16)
            .map(|k| {
                let t = k as f64 * dt_c;
                (3.0 * t).sin() - 0.6 * t
            })
            .collect();
        let control = GridPath::scalar(dt_c, ctrl).unwrap();
        let run = |spec: OperatorSpec, start: f64, step: f64| -> GridPath {
            let input = SkeletonInput {
                operator: spec,
                drift: DriftSpec::Tanh { scale: vec![-1.2], rate: 2.0 },
                diffusion: DiffusionSpec::Constant { matrix: vec![vec![1.0]] },
                control: control.clone(),
                start: vec![start],
            };
            skeleton(&input, step).unwrap().0
        };
        for (spec, start, factor) in [
            (
                OperatorSpec::new(OperatorKind::Quadratic { q: vec![vec![1.0]], c: vec![0.0] }, 1).unwrap(),
                1.0,
                1.5,
            ),
            (orthant_1d(), 0.3, 1.2),
        ] {
            let mut step = 1.0 / 64.0;
            let mut prev_gap: Option<f64> = None;
            let mut coarse = run(spec.clone(), start, step);
            for _ in 0..3 {
                let fine = run(spec.clone(), start, step / 2.0);
                let mut gap = 0.0f64;
                for k in 0..=coarse.n_steps() {
                    gap = gap.max((coarse.node(k)[0] - fine.node(2 * k)[0]).abs());
                }
                if let Some(p) = prev_gap {
                    assert!(p / gap >= factor, "contraction {} below {factor}", p / gap);
                }
                prev_gap = Some(gap);
                coarse = fine;
                step /= 2.0;
            }
        }
    }
}
