//! Closed catalog of drift and diffusion coefficients.
//!
//! Entries are chosen so that values and first derivatives have closed
//! forms; the generator-related contractions (diffusion quadratic form and
//! the gradient-of-diffusion contraction) are assembled from those.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Drift b: R^m -> R^m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DriftSpec {
    Zero,
    Constant { value: Vec<f64> },
    /// b(x) = A x.
    Linear { matrix: Vec<Vec<f64>> },
    /// b_i(x) = scale_i * tanh(rate * x_i); bounded with bounded derivatives.
    Tanh { scale: Vec<f64>, rate: f64 },
}

/// Diffusion σ: R^m -> R^{m x d}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DiffusionSpec {
    Zero { rows: usize, cols: usize },
    Constant { matrix: Vec<Vec<f64>> },
    /// σ^{il}(x) = `gains[i][l] * x_i`.
    Linear { gains: Vec<Vec<f64>> },
    /// σ^{il}(x) = `amp[i][l] * sin(freq * x_i)`; bounded with bounded derivatives.
    Sine { amp: Vec<Vec<f64>>, freq: f64 },
}

impl DriftSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            DriftSpec::Zero => None,
            DriftSpec::Constant { value } => Some(value.len()),
            DriftSpec::Linear { matrix } => Some(matrix.len()),
            DriftSpec::Tanh { scale, .. } => Some(scale.len()),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            DriftSpec::Zero => Ok(()),
            DriftSpec::Constant { value } if value.len() == m => Ok(()),
            DriftSpec::Linear { matrix }
                if matrix.len() == m && matrix.iter().all(|r| r.len() == m) =>
            {
                Ok(())
            }
            DriftSpec::Tanh { scale, rate } if scale.len() == m && rate.is_finite() => Ok(()),
            _ => Err(Error::DimensionMismatch { expected: m, got: self.dim().unwrap_or(0) }),
        }
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        match self {
            DriftSpec::Zero => vec![0.0; x.len()],
            DriftSpec::Constant { value } => value.clone(),
            DriftSpec::Linear { matrix } => crate::vecmath::matvec(matrix, x),
            DriftSpec::Tanh { scale, rate } => x
                .iter()
                .zip(scale)
                .map(|(xi, s)| s * (rate * xi).tanh())
                .collect(),
        }
    }

    /// Bounded with bounded derivatives of all orders.
    pub fn is_c3_bounded(&self) -> bool {
        match self {
            DriftSpec::Zero | DriftSpec::Constant { .. } | DriftSpec::Tanh { .. } => true,
            DriftSpec::Linear { .. } => false,
        }
    }
}

impl DiffusionSpec {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            DiffusionSpec::Zero { rows, cols } => (*rows, *cols),
            DiffusionSpec::Constant { matrix } | DiffusionSpec::Linear { gains: matrix } => {
                (matrix.len(), matrix.first().map_or(0, |r| r.len()))
            }
            DiffusionSpec::Sine { amp, .. } => (amp.len(), amp.first().map_or(0, |r| r.len())),
        }
    }

    pub fn validate(&self, m: usize, d: usize) -> Result<()> {
        let (rows, cols) = self.shape();
        if rows != m || cols != d {
            return Err(Error::InvalidInput(format!(
                "diffusion shape ({rows},{cols}) does not match problem ({m},{d})"
            )));
        }
        Ok(())
    }

    /// Entry σ^{il}(x).
    pub fn entry(&self, x: &[f64], i: usize, l: usize) -> f64 {
        match self {
            DiffusionSpec::Zero { .. } => 0.0,
            DiffusionSpec::Constant { matrix } => matrix[i][l],
            DiffusionSpec::Linear { gains } => gains[i][l] * x[i],
            DiffusionSpec::Sine { amp, freq } => amp[i][l] * (freq * x[i]).sin(),
        }
    }

    /// ∂σ^{il}/∂x_j; zero unless j = i for the state-diagonal entries.
    pub fn entry_derivative(&self, x: &[f64], i: usize, l: usize, j: usize) -> f64 {
        match self {
            DiffusionSpec::Zero { .. } | DiffusionSpec::Constant { .. } => 0.0,
            DiffusionSpec::Linear { gains } => {
                if i == j {
                    gains[i][l]
                } else {
                    0.0
                }
            }
            DiffusionSpec::Sine { amp, freq } => {
                if i == j {
                    amp[i][l] * freq * (freq * x[i]).cos()
                } else {
                    0.0
                }
            }
        }
    }

    /// σ(x) v for v in R^d.
    pub fn apply(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let (m, d) = self.shape();
        (0..m)
            .map(|i| (0..d).map(|l| self.entry(x, i, l) * v[l]).sum())
            .collect()
    }

    /// True when σ does not depend on the state; the integrator skips its
    /// midpoint re-evaluation in that case.
    pub fn state_independent(&self) -> bool {
        matches!(self, DiffusionSpec::Zero { .. } | DiffusionSpec::Constant { .. })
    }

    pub fn is_c3_bounded(&self) -> bool {
        !matches!(self, DiffusionSpec::Linear { .. })
    }
}

/// Generator-related closed forms for one coefficient pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoCorrection {
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
}

impl ItoCorrection {
    /// a^{ij}(x) = Σ_k σ^i_k(x) σ^j_k(x); symmetric positive semidefinite.
    pub fn quadratic_form(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let (m, d) = self.diffusion.shape();
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..=i {
                let v: f64 = (0..d)
                    .map(|k| self.diffusion.entry(x, i, k) * self.diffusion.entry(x, j, k))
                    .sum();
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        a
    }

    /// (σ'σ)^{l,l'}_i(x) = Σ_j ∂_j σ^{il}(x) σ^{jl'}(x), indexed `[i][l][l']`.
    pub fn gradient_contraction(&self, x: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let (m, d) = self.diffusion.shape();
        let mut out = vec![vec![vec![0.0; d]; d]; m];
        for i in 0..m {
            for l in 0..d {
                for lp in 0..d {
                    out[i][l][lp] = (0..m)
                        .map(|j| {
                            self.diffusion.entry_derivative(x, i, l, j)
                                * self.diffusion.entry(x, j, lp)
                        })
                        .sum();
                }
            }
        }
        out
    }

    /// First-order part of the generator in Itô form: the drift plus half
    /// the diagonal gradient contraction.
    pub fn generator_drift(&self, x: &[f64]) -> Vec<f64> {
        let contraction = self.gradient_contraction(x);
        let mut b = self.drift.value(x);
        let d = self.diffusion.shape().1;
        for (i, bi) in b.iter_mut().enumerate() {
            let corr: f64 = (0..d).map(|l| contraction[i][l][l]).sum();
            *bi += 0.5 * corr;
        }
        b
    }
}
