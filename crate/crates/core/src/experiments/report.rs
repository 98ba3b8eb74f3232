//! Experiment reports: one cell per estimated quantity, binomial confidence
//! half-widths, and a stable serialization whose bytes do not depend on the
//! worker count that produced them.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Minimum accepted trials before a cell estimate counts as powered.
pub const MIN_POWERED_TRIALS: u64 = 50;

/// One estimated quantity with its sampling pedigree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    /// Point estimate; absent when no trial informed the cell.
    pub estimate: Option<f64>,
    pub trials: u64,
    pub half_width: f64,
    pub under_powered: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

impl Cell {
    /// Binomial cell from a hit count, with the rule-of-three floor on the
    /// half-width when the estimate saturates at 0 or 1.
    pub fn binomial(label: impl Into<String>, hits: u64, trials: u64) -> Cell {
        let (estimate, half_width) = if trials == 0 {
            (None, f64::NAN)
        } else {
            let p = hits as f64 / trials as f64;
            (Some(p), binomial_half_width(p, trials))
        };
        Cell {
            label: label.into(),
            estimate,
            trials,
            half_width,
            under_powered: trials < MIN_POWERED_TRIALS,
            extras: BTreeMap::new(),
        }
    }

    /// Cell holding a mean of [0, 1]-valued observations; the binomial
    /// half-width at the same mean is an upper bound on the normal one.
    pub fn bounded_mean(label: impl Into<String>, mean: f64, trials: u64) -> Cell {
        Cell {
            label: label.into(),
            estimate: Some(mean),
            trials,
            half_width: binomial_half_width(mean, trials),
            under_powered: trials < MIN_POWERED_TRIALS,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_extra(mut self, key: impl Into<String>, value: f64) -> Cell {
        self.extras.insert(key.into(), value);
        self
    }
}

/// 95% normal-approximation half-width, floored by the rule of three at the
/// saturated estimates.
pub fn binomial_half_width(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let n = trials as f64;
    let normal = 1.96 * (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / n).sqrt();
    if p <= 0.0 || p >= 1.0 {
        normal.max(3.0 / n)
    } else {
        normal
    }
}

/// A named study result. `wall_clock_seconds` is informational and excluded
/// from the reproducibility digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub cells: Vec<Cell>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub summary: BTreeMap<String, f64>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, parameters: serde_json::Value, seed: u64) -> Self {
        ExperimentReport {
            name: name.into(),
            parameters,
            seed,
            cells: Vec::new(),
            summary: BTreeMap::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn cell(&self, label: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.label == label)
    }

    /// Canonical serialization of everything except the wall clock; two runs
    /// of the same study with the same seed must agree byte for byte here.
    pub fn stable_digest(&self) -> String {
        let body = serde_json::json!({
            "name": self.name,
            "parameters": self.parameters,
            "seed": self.seed,
            "cells": self.cells,
            "summary": self.summary,
        });
        body.to_string()
    }

    /// Flat CSV, one row per cell; extra columns are the union of the cells'
    /// extra keys in sorted order.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<String> = Vec::new();
        for cell in &self.cells {
            for k in cell.extras.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
        keys.sort();
        let mut out = String::new();
        out.push_str("label,estimate,trials,half_width,under_powered");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for cell in &self.cells {
            let est = cell.estimate.map_or(String::new(), |e| format!("{e}"));
            out.push_str(&format!(
                "{},{},{},{},{}",
                cell.label, est, cell.trials, cell.half_width, cell.under_powered
            ));
            for k in &keys {
                out.push(',');
                if let Some(v) = cell.extras.get(k) {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Ordinary least squares of y against x; returns (slope, intercept, r²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}
