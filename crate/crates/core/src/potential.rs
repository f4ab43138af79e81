//! Piecewise-constant potentials.
//!
//! Segment `i` (0-based) occupies `[x_i, x_{i+1})` and carries the constant
//! value `V_i`. The last segment also owns the right domain edge.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// ħ and m, both fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    pub hbar: f64,
    pub mass: f64,
}

pub const NATURAL_UNITS: ModelConstants = ModelConstants {
    hbar: 1.0,
    mass: 1.0,
};

/// An ordered set of boundaries with one constant potential value per
/// segment. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedPotential {
    boundaries: Vec<f64>,
    values: Vec<f64>,
    label: String,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn check_domain(x_min: f64, x_max: f64, n_segments: usize) -> Result<()> {
    if !x_min.is_finite() || !x_max.is_finite() {
        return Err(invalid("domain bounds must be finite"));
    }
    if x_min >= x_max {
        return Err(invalid(format!(
            "x_min {x_min} must be below x_max {x_max}"
        )));
    }
    if n_segments == 0 {
        return Err(invalid("at least one segment is required"));
    }
    Ok(())
}

/// Uniform grid written as a weighted mean of the end points so that a
/// domain symmetric about zero gives exactly mirrored positions.
fn uniform_point(x_min: f64, x_max: f64, num: usize, den: usize) -> f64 {
    let w_hi = num as f64 / den as f64;
    let w_lo = (den - num) as f64 / den as f64;
    x_min * w_lo + x_max * w_hi
}

fn uniform_grid(x_min: f64, x_max: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let boundaries = (0..=n).map(|i| uniform_point(x_min, x_max, i, n)).collect();
    let midpoints = (0..n)
        .map(|i| uniform_point(x_min, x_max, 2 * i + 1, 2 * n))
        .collect();
    (boundaries, midpoints)
}

impl SegmentedPotential {
    pub fn new(boundaries: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("at least one segment is required"));
        }
        if boundaries.len() != values.len() + 1 {
            return Err(invalid(format!(
                "{} boundaries cannot delimit {} segments",
                boundaries.len(),
                values.len()
            )));
        }
        if boundaries.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("boundaries and values must be finite"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("boundaries must be strictly increasing"));
        }
        Ok(SegmentedPotential {
            boundaries,
            values,
            label: label.into(),
        })
    }

    /// `V = x²/2` sampled at segment midpoints on a uniform grid.
    pub fn harmonic(x_min: f64, x_max: f64, n_segments: usize) -> Result<Self> {
        check_domain(x_min, x_max, n_segments)?;
        let (boundaries, mids) = uniform_grid(x_min, x_max, n_segments);
        let values = mids.iter().map(|c| 0.5 * c * c).collect();
        Self::new(boundaries, values, "harmonic")
    }

    /// Square well of the given depth: `V = 0` for `|x| < width/2`, `depth`
    /// outside, on `[-width/2 - padding, width/2 + padding]`. The well edges
    /// are always segment boundaries; `n_segments = 3` is the exact minimal
    /// representation.
    pub fn finite_well(depth: f64, width: f64, padding: f64, n_segments: usize) -> Result<Self> {
        for (name, v) in [("depth", depth), ("width", width), ("padding", padding)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if n_segments < 3 {
            return Err(invalid("a finite well needs at least 3 segments"));
        }
        let total = width + 2.0 * padding;
        let outer =
            ((n_segments as f64 * padding / total).floor() as usize).clamp(1, (n_segments - 1) / 2);
        let inner = n_segments - 2 * outer;
        let half = 0.5 * width;
        let left = -half - padding;

        let mut boundaries = Vec::with_capacity(n_segments + 1);
        let mut values = Vec::with_capacity(n_segments);
        for i in 0..outer {
            boundaries.push(uniform_point(left, -half, i, outer));
            values.push(depth);
        }
        for i in 0..inner {
            boundaries.push(uniform_point(-half, half, i, inner));
            values.push(0.0);
        }
        for i in 0..outer {
            boundaries.push(uniform_point(half, half + padding, i, outer));
            values.push(depth);
        }
        boundaries.push(half + padding);
        Self::new(boundaries, values, "finite_well")
    }

    /// Soft-core 1D hydrogen, `V = -1/(|x| + softening)` at segment midpoints.
    pub fn hydrogen_1d(softening: f64, x_min: f64, x_max: f64, n_segments: usize) -> Result<Self> {
        if !(softening.is_finite() && softening > 0.0) {
            return Err(invalid(format!(
                "softening must be positive, got {softening}"
            )));
        }
        check_domain(x_min, x_max, n_segments)?;
        let (boundaries, mids) = uniform_grid(x_min, x_max, n_segments);
        let values = mids.iter().map(|c| -1.0 / (c.abs() + softening)).collect();
        Self::new(boundaries, values, "hydrogen_1d")
    }

    /// Builds `len - 1` segments between consecutive sample positions, each
    /// carrying the mean of its two bracketing sample values.
    pub fn from_samples(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("at least two samples are required"));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(invalid("sample positions must be strictly increasing"));
        }
        let boundaries = points.iter().map(|p| p.0).collect();
        let values = points.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1)).collect();
        Self::new(boundaries, values, "samples")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut p = Self::from_samples(&parse_samples(&text)?)?;
        p.label = path.display().to_string();
        Ok(p)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn x_max(&self) -> f64 {
        self.boundaries[self.values.len()]
    }

    /// `(left, right)` edges of segment `i`.
    pub fn extent(&self, i: usize) -> (f64, f64) {
        (self.boundaries[i], self.boundaries[i + 1])
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.boundaries[i] + self.boundaries[i + 1])
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the segment containing `x`; `x_max` maps to the last one.
    pub fn segment_of(&self, x: f64) -> Result<usize> {
        let (lo, hi) = (self.x_min(), self.x_max());
        if !(lo..=hi).contains(&x) {
            return Err(Error::OutOfRange { x, lo, hi });
        }
        let i = self.boundaries.partition_point(|&b| b <= x);
        Ok((i.max(1) - 1).min(self.len() - 1))
    }
}

/// Parses the two-column sample format: one `x V` pair per line,
/// whitespace separated, `#` starts a comment.
pub fn parse_samples(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split_whitespace();
        let mut num = || -> Result<f64> {
            cols.next()
                .ok_or_else(|| invalid(format!("line {}: expected two columns", n + 1)))?
                .parse::<f64>()
                .map_err(|e| invalid(format!("line {}: {e}", n + 1)))
        };
        let x = num()?;
        let v = num()?;
        if cols.next().is_some() {
            return Err(invalid(format!("line {}: expected two columns", n + 1)));
        }
        points.push((x, v));
    }
    Ok(points)
}

/// Inverse of [`parse_samples`]; values are written in shortest round-trip form.
pub fn format_samples(points: &[(f64, f64)]) -> String {
    let mut out = String::from("# x V\n");
    for (x, v) in points {
        let _ = writeln!(out, "{x:e} {v:e}");
    }
    out
}
