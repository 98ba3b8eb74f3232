//! Shared helpers for the integration suites.

use svi_lab::monotone::{Halfspace, OperatorKind, OperatorSpec, QuadraticPart};

/// Deterministic rotation through the operator catalog; `case` selects the
/// kind and perturbs its parameters slightly. All returned functions are
/// nonnegative, so the discrete energy inequality applies with a zero
/// infimum.
pub fn random_catalog_operator(case: u64, dim: usize) -> OperatorSpec {
    let t = case as f64;
    let kind = match case % 7 {
        0 => OperatorKind::Zero,
        1 => OperatorKind::Quadratic {
            q: identity_scaled(dim, 0.5 + 0.1 * (t % 5.0)),
            c: vec![0.0; dim],
        },
        2 => OperatorKind::IndicatorBox {
            lower: vec![Some(-0.1 * ((t % 3.0) + 1.0)); dim],
            upper: vec![None; dim],
        },
        3 => OperatorKind::IndicatorBall {
            center: vec![0.1 * (t % 4.0); dim],
            radius: 1.0 + 0.2 * (t % 3.0),
        },
        4 => OperatorKind::ScaledL1 { weight: 0.3 + 0.1 * (t % 4.0) },
        5 => OperatorKind::IndicatorHalfspaces {
            halfspaces: (0..dim)
                .flat_map(|i| {
                    let mut lo = vec![0.0; dim];
                    lo[i] = -1.0;
                    let mut hi = vec![0.0; dim];
                    hi[i] = 1.0;
                    [
                        Halfspace { normal: lo, offset: 0.5 + 0.1 * (t % 3.0) },
                        Halfspace { normal: hi, offset: 2.0 },
                    ]
                })
                .collect(),
        },
        _ => OperatorKind::Sum {
            smooth: QuadraticPart { q: identity_scaled(dim, 0.8), c: vec![0.0; dim] },
            constraint: Box::new(OperatorKind::IndicatorBox {
                lower: vec![Some(-0.5); dim],
                upper: vec![Some(2.0); dim],
            }),
        },
    };
    OperatorSpec::new(kind, dim).expect("catalog entry is well-formed")
}

fn identity_scaled(dim: usize, s: f64) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { s } else { 0.0 }).collect())
        .collect()
}
