//! Acceptance suite. Each test is one shipping criterion, runs at its
//! stated tolerance, and prints a single PASS line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Criterion 7 is implemented exactly as specified and is expected to fail:
//! at its stated (eps, delta) pair the target event has conditional
//! probability ~2e-11, which no finite trial budget can witness. The test's
//! failure message carries the full analysis, and the companion test next to
//! it demonstrates the underlying continuity statement at a powered window.

use rand::Rng;
use svi_lab::coeffs::{DiffusionSpec, DriftSpec};
use svi_lab::dvi::{self, SkeletonInput};
use svi_lab::experiments::{
    approx_continuity_study, band_probability, levy_area_study, limit_theorem_study,
    small_ball_study, ContinuityConfig, ExperimentReport, LevyAreaConfig,
    LimitTheoremConfig, SmallBallConfig,
};
use svi_lab::monotone::{operator_law_battery, OperatorKind, OperatorSpec};
use svi_lab::paths::GridPath;
use svi_lab::svi::{
    generate_driver, skorokhod_oracle, trial_rng, validate_solution, wong_zakai_solve, SviProblem,
};

mod common;
use common::random_catalog_operator;

fn catalog_for_laws() -> Vec<(&'static str, OperatorSpec)> {
    vec![
        ("zero", OperatorSpec::zero(2)),
        (
            "quadratic",
            OperatorSpec::new(
                OperatorKind::Quadratic { q: vec![vec![2.0, 0.5], vec![0.5, 1.0]], c: vec![0.3, -0.1] },
                2,
            )
            .unwrap(),
        ),
        ("box", OperatorSpec::nonnegative_orthant(2)),
        (
            "ball",
            OperatorSpec::new(
                OperatorKind::IndicatorBall { center: vec![0.5, -0.5], radius: 1.5 },
                2,
            )
            .unwrap(),
        ),
        (
            "halfspaces",
            OperatorSpec::new(
                OperatorKind::IndicatorHalfspaces {
                    halfspaces: vec![
                        svi_lab::monotone::Halfspace { normal: vec![1.0, 1.0], offset: 1.0 },
                        svi_lab::monotone::Halfspace { normal: vec![-1.0, 0.0], offset: 1.0 },
                        svi_lab::monotone::Halfspace { normal: vec![0.0, -1.0], offset: 1.0 },
                    ],
                },
                2,
            )
            .unwrap(),
        ),
        ("l1", OperatorSpec::new(OperatorKind::ScaledL1 { weight: 1.3 }, 2).unwrap()),
        (
            "sum",
            OperatorSpec::new(
                OperatorKind::Sum {
                    smooth: svi_lab::monotone::QuadraticPart {
                        q: vec![vec![1.0, 0.0], vec![0.0, 0.5]],
                        c: vec![0.1, 0.0],
                    },
                    constraint: Box::new(OperatorKind::IndicatorBox {
                        lower: vec![Some(-1.0), Some(-1.0)],
                        upper: vec![Some(2.0), None],
                    }),
                },
                2,
            )
            .unwrap(),
        ),
    ]
}

#[test]
fn criterion_01_operator_laws() {
    let closed_form = ["zero", "quadratic", "box", "ball", "l1"];
    for (name, spec) in catalog_for_laws() {
        let report = operator_law_battery(&spec, 1000, 0xC1).unwrap();
        assert!(
            report.pass(),
            "criterion 1 FAIL [{name}]: worst violation {:.3e}",
            report.worst_violation()
        );
        if closed_form.contains(&name) {
            let mut rng = trial_rng(0xC1F, 0);
            for _ in 0..50 {
                let raw: Vec<f64> =
                    (0..spec.dim).map(|_| 3.0 * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
                let x = spec.project_domain(&raw).unwrap();
                let target = spec
                    .minimal_section(&x)
                    .unwrap()
                    .expect("projected point is in the operator domain");
                let target_norm = norm(&target);
                let mut prev = -1.0f64;
                let mut lambda = 1.0;
                for _ in 0..10 {
                    let n = norm(&spec.yosida(lambda, &x).unwrap());
                    assert!(
                        n >= prev - 1e-9,
                        "criterion 1 FAIL [{name}]: |A_l x| decreased along l"
                    );
                    prev = n;
                    lambda /= 2.0;
                }
                let limit = norm(&spec.yosida(1e-8, &x).unwrap());
                assert!(
                    (limit - target_norm).abs() <= 1e-6,
                    "criterion 1 FAIL [{name}]: Yosida limit {limit} vs minimal section {target_norm}"
                );
            }
        }
    }
    println!("criterion 1 PASS: operator laws hold over 1000 cases per catalog kind");
}

#[test]
fn criterion_02_yosida_blow_up_outside_domain() {
    let box_spec = OperatorSpec::nonnegative_orthant(2);
    let ball_spec = OperatorSpec::new(
        OperatorKind::IndicatorBall { center: vec![0.0, 0.0], radius: 1.0 },
        2,
    )
    .unwrap();
    let mut rng = trial_rng(0xC2, 0);
    let mut checked = 0;
    for spec in [&box_spec, &ball_spec] {
        for _ in 0..10 {
            let x: Vec<f64> = (0..2)
                .map(|_| -1.0 - rng.random_range(0.0..3.0f64))
                .collect();
            if spec.distance_to_domain(&x).unwrap() < 0.5 {
                continue;
            }
            let proj = spec.project_domain(&x).unwrap();
            let mut prev = 0.0f64;
            let mut n = 2.0f64;
            while n <= 1024.0 {
                let xn: Vec<f64> =
                    x.iter().zip(&proj).map(|(xi, pi)| xi + (pi - xi) / n).collect();
                let mag = norm(&spec.yosida(1.0 / n, &xn).unwrap());
                let dist = spec.distance_to_domain(&xn).unwrap();
                assert!(
                    mag >= n * dist * (1.0 - 1e-6),
                    "criterion 2 FAIL: |A_(1/n)| {mag} below n*dist {}",
                    n * dist
                );
                if prev > 0.0 {
                    assert!(
                        mag >= 1.8 * prev,
                        "criterion 2 FAIL: growth {} below 1.8 at n={n}",
                        mag / prev
                    );
                }
                prev = mag;
                n *= 2.0;
            }
            checked += 1;
        }
    }
    assert!(checked >= 20, "criterion 2 FAIL: only {checked} exterior points exercised");
    println!("criterion 2 PASS: Yosida blow-up of at least 1.8x per doubling at {checked} exterior points");
}

#[test]
fn criterion_03_discrete_energy_inequality() {
    let step = 1e-3;
    let mut rng = trial_rng(0xC3, 0);
    for case in 0..100u64 {
        let spec = random_catalog_operator(case, 1);
        // random bounded piecewise-linear forcing on a coarse grid
        let coarse_dt = 0.05;
        let coarse: Vec<f64> = (0..=20).map(|_| rng.random_range(-2.0..2.0f64)).collect();
        let forcing = GridPath::scalar(coarse_dt, coarse)
            .unwrap()
            .resample(step)
            .unwrap();
        let raw = rng.random_range(-1.0..1.0f64);
        let problem = dvi::DviProblem {
            operator: spec.clone(),
            forcing,
            start: spec.project_domain(&[raw]).unwrap(),
            horizon: 1.0,
        };
        let u = dvi::solve_dvi(&problem, step).unwrap();
        let rep = dvi::brezis_energy_check(&problem, &u).unwrap();
        assert!(
            rep.pass,
            "criterion 3 FAIL: case {case} lhs {} exceeds rhs {} beyond 5%",
            rep.lhs, rep.rhs
        );
    }
    println!("criterion 3 PASS: discrete energy inequality within 5% slack on 100 randomized problems");
}

fn reflected_solutions_for_acceptance() -> Vec<svi_lab::svi::SolutionPair> {
    let problem = SviProblem::reflected_bm(0.5, 1.0);
    (0..1000u64)
        .map(|stream| {
            let drv = generate_driver(1, 1.0, 12, 0xC4, stream).unwrap();
            wong_zakai_solve(&problem, &drv, 12, drv.fine_dt()).unwrap()
        })
        .collect()
}

#[test]
fn criterion_04_reflected_oracle_equivalence() {
    let problem = SviProblem::reflected_bm(0.5, 1.0);
    let pairs = problem.operator.sample_graph(60, 0xC4F).unwrap();
    let cert = problem.operator.interior_certificate().unwrap();
    let mut worst_gap = 0.0f64;
    let mut worst_slack = f64::INFINITY;
    for stream in 0..1000u64 {
        let drv = generate_driver(1, 1.0, 12, 0xC4, stream).unwrap();
        let sol = wong_zakai_solve(&problem, &drv, 12, drv.fine_dt()).unwrap();
        let oracle = skorokhod_oracle(0.5, &drv.path).unwrap();
        for k in 0..=sol.x.n_steps() {
            let gap = (sol.x.node(k)[0] - oracle.x.node(k)[0])
                .abs()
                .max((sol.k.node(k)[0] - oracle.k.node(k)[0]).abs());
            worst_gap = worst_gap.max(gap);
        }
        let report = validate_solution(&problem, &sol, &pairs, &cert).unwrap();
        assert!(
            report.pass,
            "criterion 4 FAIL: stream {stream} validation {report:?}"
        );
        worst_slack = worst_slack
            .min(report.flow_min_slack)
            .min(report.interior_min_slack);
    }
    assert!(
        worst_gap <= 1e-10,
        "criterion 4 FAIL: worst node gap {worst_gap:.3e} above 1e-10"
    );
    assert!(
        worst_slack >= -1e-6,
        "criterion 4 FAIL: validation slack {worst_slack:.3e} below -1e-6"
    );
    println!(
        "criterion 4 PASS: 1000 seeds match the reflection formula to {worst_gap:.2e} with min slack {worst_slack:.2e}"
    );
}

#[test]
fn criterion_05_interior_point_inequality() {
    // on the criterion-4 family
    let problem = SviProblem::reflected_bm(0.5, 1.0);
    let cert = problem.operator.interior_certificate().unwrap();
    let mut worst = f64::INFINITY;
    for sol in reflected_solutions_for_acceptance() {
        let n = sol.x.n_steps();
        for (s, t) in [(0, n), (n / 3, 2 * n / 3)] {
            let slack = dvi::interior_inequality_slack(&sol.x, &sol.k, &cert, s, t).unwrap();
            worst = worst.min(slack);
        }
    }
    assert!(worst >= -1e-6, "criterion 5 FAIL: reflected slack {worst:.3e}");

    // and on 100 skeleton runs across the catalog
    let mut rng = trial_rng(0xC5, 0);
    for case in 0..100u64 {
        let spec = random_catalog_operator(case, 1);
        let cert = spec.interior_certificate().unwrap();
        let dt = 1.0 / 64.0;
        let mut ctrl = vec![0.0f64];
        for _ in 0..64 {
            let last = *ctrl.last().unwrap();
            ctrl.push(last + rng.random_range(-0.3..0.3f64));
        }
        let input = SkeletonInput {
            operator: spec.clone(),
            drift: DriftSpec::Tanh { scale: vec![-0.4], rate: 1.5 },
            diffusion: DiffusionSpec::Sine { amp: vec![vec![1.0]], freq: 1.0 },
            control: GridPath::scalar(dt, ctrl).unwrap(),
            start: spec.project_domain(&[0.3]).unwrap(),
        };
        let (xi, eta) = dvi::skeleton(&input, dt / 4.0).unwrap();
        let n = xi.n_steps();
        let s = rng.random_range(0..n / 2);
        let t = rng.random_range(n / 2 + 1..=n);
        for (a, b) in [(0, n), (s, t)] {
            let slack = dvi::interior_inequality_slack(&xi, &eta, &cert, a, b).unwrap();
            worst = worst.min(slack);
            assert!(
                slack >= -1e-6,
                "criterion 5 FAIL: case {case} window ({a},{b}) slack {slack:.3e}"
            );
        }
    }
    println!("criterion 5 PASS: interior-point inequality with min slack {worst:.2e}");
}

#[test]
fn criterion_06_limit_theorem() {
    let cfg = LimitTheoremConfig {
        problem: SviProblem::reflected_bm(0.5, 1.0),
        levels: vec![4, 6, 8, 10],
        n_fine: 14,
        eps: 0.1,
        trials: 200,
        seed: 0xC6,
    };
    let report = limit_theorem_study(&cfg).unwrap();
    print_cells("criterion 6 cells", &report);
    let cells = &report.cells;
    for w in cells.windows(2) {
        let (p0, p1) = (w[0].estimate.unwrap(), w[1].estimate.unwrap());
        let slack = w[0].half_width.max(w[1].half_width);
        assert!(
            p1 <= p0 + slack,
            "criterion 6 FAIL: exceedance rose {p0} -> {p1} beyond one half-width {slack}"
        );
    }
    let med4 = cells[0].extras["median_error"];
    let med10 = cells[3].extras["median_error"];
    assert!(
        med10 < 0.5 * med4,
        "criterion 6 FAIL: median at n=10 ({med10}) not below half the median at n=4 ({med4})"
    );
    let failed: f64 = cells.iter().map(|c| c.extras["failed_trials"]).sum();
    assert_eq!(failed, 0.0, "criterion 6 FAIL: {failed} solver failures");
    println!(
        "criterion 6 PASS: exceedance nonincreasing across levels, median error {med4:.4} -> {med10:.4}"
    );
}

fn continuity_cfg(eps: f64) -> ContinuityConfig {
    ContinuityConfig {
        problem: SviProblem::reflected_bm(0.5, 1.0),
        control: None,
        eps,
        deltas: vec![0.8, 0.6, 0.45],
        trials_target: 200,
        max_draws: 250_000,
        n_fine: 12,
        seed: 0xC7,
    }
}

#[test]
fn criterion_07_approximate_continuity() {
    let report = approx_continuity_study(&continuity_cfg(0.2)).unwrap();
    print_cells("criterion 7 cells (eps = 0.2)", &report);
    for cell in &report.cells {
        assert!(
            !cell.under_powered,
            "criterion 7 FAIL: cell {} under-powered ({} accepted)",
            cell.label, cell.trials
        );
    }
    // trend clause: conditional estimates nondecreasing as delta shrinks
    for w in report.cells.windows(2) {
        let (p0, p1) = (w[0].estimate.unwrap(), w[1].estimate.unwrap());
        let slack = w[0].half_width.max(w[1].half_width);
        assert!(
            p1 >= p0 - slack,
            "criterion 7 FAIL: estimate fell {p0} -> {p1} beyond one half-width {slack}"
        );
    }
    // threshold clause, as stated
    let top = report.cells.last().unwrap();
    let estimate = top.estimate.unwrap();
    assert!(
        estimate >= 0.9,
        "criterion 7 FAIL: conditional estimate at delta=0.45 is {estimate} ({} of {} accepted), \
         the stated threshold is 0.9. Analysis: with unit diffusion the X-part of the event is \
         sup|X - xi| = sup|w| exactly on contact-free paths (every accepted path at delta=0.45 \
         keeps X = 0.5 + w > 0.05), so the conditional probability equals \
         P(sup|w| < 0.2)/P(sup|w| < 0.45) = {:.3e} by the reflection series; no finite trial \
         budget can reach 0.9 at (eps, delta) = (0.2, 0.45). The K-part of the event is already \
         certain (k_part_only column = {}), and the companion test at a powered window \
         (eps = 0.5) exhibits the conditional estimates trending to 1 as delta shrinks, which \
         is the content of the continuity statement.",
        (top.extras["k_part_only"] * top.trials as f64).round() as u64,
        top.trials,
        band_probability(0.2, 1.0) / band_probability(0.45, 1.0),
        top.extras["k_part_only"],
    );
    println!("criterion 7 PASS: conditional estimates nondecreasing and >= 0.9 at delta=0.45");
}

#[test]
fn criterion_07_companion_powered_window() {
    // same study, same windows, eps chosen above the top delta: the event
    // then isolates the compensator response and the trend to 1 is visible
    let report = approx_continuity_study(&continuity_cfg(0.5)).unwrap();
    print_cells("criterion 7 companion cells (eps = 0.5)", &report);
    let estimates: Vec<f64> = report.cells.iter().map(|c| c.estimate.unwrap()).collect();
    for w in report.cells.windows(2) {
        let (p0, p1) = (w[0].estimate.unwrap(), w[1].estimate.unwrap());
        let slack = w[0].half_width.max(w[1].half_width);
        assert!(p1 >= p0 - slack, "companion trend broke: {estimates:?}");
    }
    let top = *estimates.last().unwrap();
    assert!(
        top >= 0.9,
        "companion FAIL: top cell {top} below 0.9; cells {estimates:?}"
    );
    assert!(
        estimates[0] < 0.5,
        "companion lost its discriminating bottom cell: {estimates:?}"
    );
    println!(
        "criterion 7 companion PASS: estimates {estimates:?} rise to {top} as delta shrinks"
    );
}

#[test]
fn criterion_08_small_ball_probabilities() {
    let cfg = SmallBallConfig {
        noise_dim: 1,
        horizon: 1.0,
        eps_grid: vec![0.5, 0.6, 0.8, 1.0],
        trials: 2_000_000,
        level: 10,
        seed: 0xC8,
    };
    let report = small_ball_study(&cfg).unwrap();
    print_cells("criterion 8 cells", &report);
    // the reflection-series oracle, cross-checked in-crate against the
    // Gaussian-difference form; frozen here
    let series = band_probability(0.8, 1.0);
    assert!(
        (series - 0.1852419073).abs() < 1e-9,
        "criterion 8 FAIL: series oracle drifted from its frozen value: {series}"
    );
    let cell = report.cell("eps=0.8").unwrap();
    let est = cell.estimate.unwrap();
    assert!(
        (est - series).abs() <= 3.0 * cell.half_width,
        "criterion 8 FAIL: estimate {est} not within 3 half-widths ({:.2e}) of the series value {series}",
        cell.half_width
    );
    let r2 = report.summary["fit_r_squared"];
    assert!(
        r2 >= 0.95,
        "criterion 8 FAIL: -log p vs eps^-2 fit has r^2 = {r2}"
    );
    println!(
        "criterion 8 PASS: eps=0.8 cell {est:.6} vs series {series:.6}, fit r^2 = {r2:.6}"
    );
}

#[test]
fn criterion_09_levy_area_conditional_tails() {
    let cfg = LevyAreaConfig {
        horizon: 1.0,
        delta_grid: vec![0.8, 0.6],
        m_grid: vec![1.0, 2.0, 4.0, 8.0],
        trials_target: 200,
        max_draws: 800_000,
        level: 10,
        seed: 0xC9,
    };
    let report = levy_area_study(&cfg).unwrap();
    print_cells("criterion 9 cells", &report);
    for cell in &report.cells {
        assert!(
            !cell.under_powered,
            "criterion 9 FAIL: cell {} under-powered ({} accepted)",
            cell.label, cell.trials
        );
    }
    let sups: Vec<f64> = cfg
        .m_grid
        .iter()
        .map(|m| report.summary[&format!("sup_over_delta_M={m}")])
        .collect();
    for w in sups.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-12,
            "criterion 9 FAIL: sup over delta not nonincreasing in M: {sups:?}"
        );
    }
    let last = *sups.last().unwrap();
    assert!(
        last <= 0.05,
        "criterion 9 FAIL: final cell {last} above 0.05"
    );
    println!("criterion 9 PASS: sup tails {sups:?} nonincreasing with final {last}");
}

#[test]
fn criterion_10_worker_count_reproducibility() {
    fn on_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap()
            .install(f)
    }
    // spot-check subset of criteria 6-9 at reduced sizes
    let limit_cfg = LimitTheoremConfig {
        problem: SviProblem::reflected_bm(0.5, 1.0),
        levels: vec![4, 6],
        n_fine: 10,
        eps: 0.1,
        trials: 40,
        seed: 0xCA,
    };
    let cont_cfg = ContinuityConfig {
        problem: SviProblem::reflected_bm(0.5, 1.0),
        control: None,
        eps: 0.5,
        deltas: vec![1.2, 0.9],
        trials_target: 60,
        max_draws: 3_000,
        n_fine: 8,
        seed: 0xCB,
    };
    let ball_cfg = SmallBallConfig {
        noise_dim: 1,
        horizon: 1.0,
        eps_grid: vec![0.6, 0.9],
        trials: 100_000,
        level: 8,
        seed: 0xCC,
    };
    let levy_cfg = LevyAreaConfig {
        horizon: 1.0,
        delta_grid: vec![1.5],
        m_grid: vec![0.5, 1.0],
        trials_target: 60,
        max_draws: 3_000,
        level: 8,
        seed: 0xCD,
    };
    let single = on_pool(1, || {
        (
            limit_theorem_study(&limit_cfg).unwrap().stable_digest(),
            approx_continuity_study(&cont_cfg).unwrap().stable_digest(),
            small_ball_study(&ball_cfg).unwrap().stable_digest(),
            levy_area_study(&levy_cfg).unwrap().stable_digest(),
        )
    });
    let pooled = on_pool(8, || {
        (
            limit_theorem_study(&limit_cfg).unwrap().stable_digest(),
            approx_continuity_study(&cont_cfg).unwrap().stable_digest(),
            small_ball_study(&ball_cfg).unwrap().stable_digest(),
            levy_area_study(&levy_cfg).unwrap().stable_digest(),
        )
    });
    assert_eq!(single.0, pooled.0, "criterion 10 FAIL: limit-theorem cells depend on workers");
    assert_eq!(single.1, pooled.1, "criterion 10 FAIL: continuity cells depend on workers");
    assert_eq!(single.2, pooled.2, "criterion 10 FAIL: small-ball cells depend on workers");
    assert_eq!(single.3, pooled.3, "criterion 10 FAIL: levy-area cells depend on workers");
    println!("criterion 10 PASS: bit-identical report cells at 1 and 8 workers");
}

fn print_cells(title: &str, report: &ExperimentReport) {
    println!("{title}:");
    for cell in &report.cells {
        println!(
            "  {}: estimate {:?} (trials {}, half-width {:.4}) extras {:?}",
            cell.label, cell.estimate, cell.trials, cell.half_width, cell.extras
        );
    }
    if !report.summary.is_empty() {
        println!("  summary: {:?}", report.summary);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
