//! Grid-based path representation and the path-space utilities built on it:
//! total variation, the weighted integral metric on paths, sup-norm distance
//! and generalized inverses of nondecreasing time changes.
//!
//! Every path is stored on a uniform grid starting at t = 0 and is read as
//! the piecewise-linear interpolant of its node values. That convention is
//! load-bearing: total variation and inverse time changes are computed for
//! the interpolant, which is exactly the object the piecewise-linear driver
//! constructions produce.

use crate::error::{Error, Result};
use crate::vecmath;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// A function on a uniform time grid with values in R^m.
///
/// `values` is node-major: node k occupies `values[k*dim .. (k+1)*dim]` and
/// sits at time `k * dt`. There are at least two nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPath {
    dt: f64,
    dim: usize,
    values: Vec<f64>,
}

// deserialization routes through the validating constructor, so malformed
// configs surface as input errors instead of NaN-laden runs
impl<'de> Deserialize<'de> for GridPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dt: f64,
            dim: usize,
            values: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        GridPath::new(raw.dt, raw.dim, raw.values).map_err(serde::de::Error::custom)
    }
}

impl GridPath {
    pub fn new(dt: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidInput(format!("grid step must be positive, got {dt}")));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("path dimension must be positive".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "value buffer length {} is not a multiple of dimension {dim}",
                values.len()
            )));
        }
        if values.len() / dim < 2 {
            return Err(Error::InvalidInput("a path needs at least two grid nodes".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("path values must be finite".into()));
        }
        Ok(GridPath { dt, dim, values })
    }

    /// Constant path with `n_nodes` nodes all equal to `value`.
    pub fn constant(dt: f64, value: &[f64], n_nodes: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(n_nodes * value.len());
        for _ in 0..n_nodes {
            values.extend_from_slice(value);
        }
        GridPath::new(dt, value.len(), values)
    }

    /// Scalar path from a list of node values.
    pub fn scalar(dt: f64, values: Vec<f64>) -> Result<Self> {
        GridPath::new(dt, 1, values)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Number of grid intervals.
    pub fn n_steps(&self) -> usize {
        self.n_nodes() - 1
    }

    pub fn t_end(&self) -> f64 {
        self.n_steps() as f64 * self.dt
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_grid(&self, other: &GridPath) -> bool {
        self.dim == other.dim
            && self.n_nodes() == other.n_nodes()
            && (self.dt - other.dt).abs() <= 1e-13 * self.dt.max(other.dt)
    }

    /// Value of the piecewise-linear interpolant at time t (clamped to the
    /// grid extent).
    pub fn sample(&self, t: f64) -> Vec<f64> {
        let n = self.n_steps();
        if t <= 0.0 {
            return self.node(0).to_vec();
        }
        let s = t / self.dt;
        if s >= n as f64 {
            return self.node(n).to_vec();
        }
        let k = s.floor() as usize;
        let frac = s - k as f64;
        let a = self.node(k);
        let b = self.node(k + 1);
        a.iter().zip(b).map(|(x, y)| x + frac * (y - x)).collect()
    }

    /// Re-sample the interpolant on a finer grid. `new_dt` must subdivide the
    /// current step by an integer factor, so original nodes are reproduced
    /// bit-for-bit.
    pub fn resample(&self, new_dt: f64) -> Result<GridPath> {
        let ratio = self.dt / new_dt;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "new step {new_dt} does not subdivide grid step {}",
                self.dt
            )));
        }
        let k = k as usize;
        if k == 1 {
            return Ok(self.clone());
        }
        let mut values = Vec::with_capacity((self.n_steps() * k + 1) * self.dim);
        for step in 0..self.n_steps() {
            let a = self.node(step);
            let b = self.node(step + 1);
            for j in 0..k {
                let frac = j as f64 / k as f64;
                values.extend(a.iter().zip(b).map(|(x, y)| x + frac * (y - x)));
            }
        }
        values.extend_from_slice(self.node(self.n_steps()));
        GridPath::new(new_dt, self.dim, values)
    }

    fn check_same_grid(&self, other: &GridPath) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch(format!(
                "paths disagree: dt {} vs {}, nodes {} vs {}, dim {} vs {}",
                self.dt,
                other.dt,
                self.n_nodes(),
                other.n_nodes(),
                self.dim,
                other.dim
            )));
        }
        Ok(())
    }
}

/// Total variation of the piecewise-linear interpolant of `p` on [0, t].
///
/// Full grid intervals contribute the Euclidean norm of their increment; a
/// partial final interval contributes the proportional share of its
/// increment.
pub fn total_variation(p: &GridPath, t: f64) -> Result<f64> {
    if t < -1e-12 || t > p.t_end() + 1e-12 * (1.0 + p.t_end()) {
        return Err(Error::InvalidInput(format!(
            "time {t} outside path extent [0, {}]",
            p.t_end()
        )));
    }
    let s = (t / p.dt()).min(p.n_steps() as f64).max(0.0);
    let full = s.floor() as usize;
    let frac = s - full as f64;
    let mut tv = 0.0;
    for k in 0..full {
        tv += vecmath::dist(p.node(k + 1), p.node(k));
    }
    if frac > 0.0 && full < p.n_steps() {
        tv += frac * vecmath::dist(p.node(full + 1), p.node(full));
    }
    Ok(tv)
}

/// The path-space metric `∫ |f-g|/(1+|f-g|) e^{-t} dt`, truncated at
/// `horizon`.
///
/// On the covered grid the integrand is integrated by the trapezoid rule.
/// Beyond the grid extent both paths are extended by their final value, for
/// which the remaining integral up to the horizon has a closed form. The
/// discarded tail past the horizon is bounded by `e^{-horizon}`.
pub fn metric_d(f: &GridPath, g: &GridPath, horizon: f64) -> Result<f64> {
    f.check_same_grid(g)?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let integrand = |k: usize| {
        let d = vecmath::dist(f.node(k), g.node(k));
        let t = k as f64 * f.dt();
        d / (1.0 + d) * (-t).exp()
    };
    let grid_end = f.t_end().min(horizon);
    let s = grid_end / f.dt();
    let full = s.floor() as usize;
    let frac = s - full as f64;
    let mut acc = 0.0;
    for k in 0..full {
        acc += 0.5 * f.dt() * (integrand(k) + integrand(k + 1));
    }
    if frac > 1e-14 && full < f.n_steps() {
        // partial trapezoid on the cut interval, integrand interpolated linearly
        let a = integrand(full);
        let b = integrand(full + 1);
        let cut = a + frac * (b - a);
        acc += 0.5 * frac * f.dt() * (a + cut);
    }
    if horizon > f.t_end() {
        let d = vecmath::dist(f.node(f.n_steps()), g.node(g.n_steps()));
        let level = d / (1.0 + d);
        acc += level * ((-f.t_end()).exp() - (-horizon).exp());
    }
    Ok(acc)
}

/// Max over grid nodes with `k*dt <= t` of the Euclidean distance between
/// the two paths.
pub fn sup_distance(f: &GridPath, g: &GridPath, t: f64) -> Result<f64> {
    f.check_same_grid(g)?;
    if t < 0.0 || t > f.t_end() + 1e-12 * (1.0 + f.t_end()) {
        return Err(Error::InvalidInput(format!(
            "time {t} outside path extent [0, {}]",
            f.t_end()
        )));
    }
    let last = ((t / f.dt()) + 1e-12).floor() as usize;
    let last = last.min(f.n_steps());
    let mut best = 0.0f64;
    for k in 0..=last {
        best = best.max(vecmath::dist(f.node(k), g.node(k)));
    }
    Ok(best)
}

/// A nondecreasing scalar grid function starting at zero, used for time
/// changes.
#[derive(Debug, Clone, Serialize)]
pub struct IncreasingGridFunction {
    path: GridPath,
}

impl<'de> Deserialize<'de> for IncreasingGridFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            path: GridPath,
        }
        let raw = Raw::deserialize(d)?;
        IncreasingGridFunction::new(raw.path).map_err(serde::de::Error::custom)
    }
}

impl IncreasingGridFunction {
    pub fn new(path: GridPath) -> Result<Self> {
        if path.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: path.dim() });
        }
        if path.node(0)[0].abs() > 1e-12 {
            return Err(Error::InvalidInput("time change must start at 0".into()));
        }
        for k in 0..path.n_steps() {
            if path.node(k + 1)[0] < path.node(k)[0] {
                return Err(Error::InvalidInput(format!(
                    "time change decreases on interval {k}"
                )));
            }
        }
        Ok(IncreasingGridFunction { path })
    }

    pub fn path(&self) -> &GridPath {
        &self.path
    }

    pub fn value(&self, k: usize) -> f64 {
        self.path.node(k)[0]
    }

    /// Generalized inverse `inf { s : kappa(s) > t }` of the piecewise-linear
    /// extension, evaluated exactly.
    ///
    /// At a plateau of level exactly t the strict inequality makes the
    /// infimum the right endpoint of the plateau. If the function never
    /// exceeds t the final grid time is returned.
    pub fn inverse(&self, t: f64) -> f64 {
        let p = &self.path;
        let n = p.n_steps();
        for k in 0..=n {
            if self.value(k) > t {
                if k == 0 {
                    return 0.0;
                }
                let prev = self.value(k - 1);
                let cur = self.value(k);
                // linear crossing inside [ (k-1) dt, k dt ]
                let frac = if cur > prev { (t - prev) / (cur - prev) } else { 0.0 };
                return ((k - 1) as f64 + frac.clamp(0.0, 1.0)) * p.dt();
            }
        }
        p.t_end()
    }
}

// ---------------------------------------------------------------------------
// Serialization: CSV (header `t,x1..xm`) and a binary columnar dump for bulk
// Monte Carlo output. The binary layout is documented in docs/formats.md.
// ---------------------------------------------------------------------------

const BINARY_MAGIC: &[u8; 4] = b"GPTH";
const BINARY_VERSION: u32 = 1;

impl GridPath {
    /// Write as CSV. `metadata` lines, when given, are emitted first as
    /// `# key=value` comments.
    pub fn write_csv<W: Write>(&self, mut w: W, metadata: &[(String, String)]) -> Result<()> {
        for (k, v) in metadata {
            writeln!(w, "# {k}={v}")?;
        }
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for k in 0..self.n_nodes() {
            let t = k as f64 * self.dt;
            let row: Vec<String> = self.node(k).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{t},{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<GridPath> {
        let mut dim = 0usize;
        let mut times: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('t') {
                dim = line.split(',').count() - 1;
                continue;
            }
            let mut fields = line.split(',');
            let t: f64 = fields
                .next()
                .ok_or_else(|| Error::Parse("empty csv row".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad time field: {e}")))?;
            times.push(t);
            for f in fields {
                values.push(
                    f.parse()
                        .map_err(|e| Error::Parse(format!("bad value field: {e}")))?,
                );
            }
        }
        if dim == 0 || times.len() < 2 {
            return Err(Error::Parse("csv path needs a header and at least two rows".into()));
        }
        if values.len() != dim * times.len() {
            return Err(Error::Parse("csv rows have inconsistent column counts".into()));
        }
        let dt = times[1] - times[0];
        for (k, pair) in times.windows(2).enumerate() {
            if ((pair[1] - pair[0]) - dt).abs() > 1e-9 * (1.0 + dt.abs()) {
                return Err(Error::Parse(format!("non-uniform grid at row {}", k + 1)));
            }
        }
        GridPath::new(dt, dim, values)
    }

    /// Binary columnar dump: magic, version, dim, node count, dt, then the
    /// node-major f64 values, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.n_nodes() as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: std::io::Read>(mut r: R) -> Result<GridPath> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Parse("bad magic in binary path file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != BINARY_VERSION {
            return Err(Error::Parse("unsupported binary path version".into()));
        }
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n_nodes = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let dt = f64::from_le_bytes(b8);
        let mut values = vec![0.0f64; dim * n_nodes];
        for v in values.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        GridPath::new(dt, dim, values)
    }
}
