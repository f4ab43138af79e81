//! Coefficient propagation across segment boundaries at arbitrary energy.
//!
//! Inside segment `i` the solution is `Ψ_i(x) = a·e^{-ik t} + b·e^{ik t}`
//! (or `a + b·t` when `E = V_i`), with `t = x - x_i` measured from the
//! segment's left edge, and the pair `(a, b)` carried with a binary scale
//! exponent. Fixing the coefficients of one segment fixes all others through
//! value and slope continuity, so no outer boundary condition is imposed and
//! any real energy yields a solution.

use crate::error::{Error, Result};
use crate::potential::SegmentedPotential;
use crate::scaled::{ldexp, Scaled};
use num_complex::Complex64;

/// `|2(E - V)|` below this switches a segment to the linear basis.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `a·e^{-ikt} + b·e^{ikt}`
    Plane,
    /// `a + b·t`
    Linear,
}

/// `k = sqrt(2(E - V))` on the branch `Im k >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber {
    pub k: Complex64,
    pub degenerate: bool,
}

impl Wavenumber {
    pub fn basis(&self) -> Basis {
        if self.degenerate {
            Basis::Linear
        } else {
            Basis::Plane
        }
    }

    /// Real `k` (classically allowed, non-degenerate).
    pub fn is_allowed(&self) -> bool {
        !self.degenerate && self.k.im == 0.0
    }

    pub fn is_forbidden(&self) -> bool {
        !self.degenerate && self.k.im > 0.0
    }
}

pub fn wavenumber(energy: f64, v: f64) -> Wavenumber {
    let q = 2.0 * (energy - v);
    let k = if q >= 0.0 {
        Complex64::new(q.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-q).sqrt())
    };
    Wavenumber {
        k,
        degenerate: q.abs() < DEGENERACY_THRESHOLD,
    }
}

/// Coefficients of one segment. True amplitudes are `(a, b)·2^scale_exp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentWave {
    pub a: Complex64,
    pub b: Complex64,
    pub k: Complex64,
    pub scale_exp: i64,
    pub basis: Basis,
    /// Position where the local coordinate `t` is zero (left segment edge).
    pub origin: f64,
}

impl SegmentWave {
    pub fn new(a: Complex64, b: Complex64, wn: Wavenumber, origin: f64) -> Self {
        SegmentWave {
            a,
            b,
            k: wn.k,
            scale_exp: 0,
            basis: wn.basis(),
            origin,
        }
    }

    pub fn a_scaled(&self) -> Scaled {
        Scaled::new(self.a, self.scale_exp)
    }

    pub fn b_scaled(&self) -> Scaled {
        Scaled::new(self.b, self.scale_exp)
    }

    /// The two basis terms at local coordinate `t`: `a·e^{-ikt}` and
    /// `b·e^{ikt}` (plane), or `a` and `b·t` (linear).
    pub fn terms(&self, t: f64) -> (Scaled, Scaled) {
        match self.basis {
            Basis::Plane => (
                self.a_scaled() * Scaled::exp(-I * self.k * t),
                self.b_scaled() * Scaled::exp(I * self.k * t),
            ),
            Basis::Linear => (
                self.a_scaled(),
                self.b_scaled().scale(Complex64::new(t, 0.0)),
            ),
        }
    }

    /// `(Ψ, Ψ')` at local coordinate `t`.
    pub fn value_at(&self, t: f64) -> (Scaled, Scaled) {
        let (t1, t2) = self.terms(t);
        match self.basis {
            Basis::Plane => {
                let ik = I * self.k;
                (t1 + t2, t2.scale(ik) - t1.scale(ik))
            }
            Basis::Linear => (t1 + t2, self.b_scaled()),
        }
    }

    /// Coefficients in a segment with wavenumber `wn` and left edge `origin`
    /// whose solution has value `psi` and slope `dpsi` at local coordinate `t`.
    pub fn from_values(wn: Wavenumber, origin: f64, t: f64, psi: Scaled, dpsi: Scaled) -> Self {
        let (a, b) = match wn.basis() {
            Basis::Plane => {
                let slope = dpsi.scale(I / wn.k);
                let half = Complex64::new(0.5, 0.0);
                let (a, b) = ((psi + slope).scale(half), (psi - slope).scale(half));
                if t == 0.0 {
                    (a, b)
                } else {
                    (
                        a * Scaled::exp(I * wn.k * t),
                        b * Scaled::exp(-I * wn.k * t),
                    )
                }
            }
            Basis::Linear => (psi - dpsi.scale(Complex64::new(t, 0.0)), dpsi),
        };
        let exp = match (a.is_zero(), b.is_zero()) {
            (true, true) => 0,
            (true, false) => b.exponent,
            (false, true) => a.exponent,
            (false, false) => a.exponent.max(b.exponent),
        };
        SegmentWave {
            a: a.to_complex_at(exp),
            b: b.to_complex_at(exp),
            k: wn.k,
            scale_exp: exp,
            basis: wn.basis(),
            origin,
        }
    }

    /// Moves the scale exponent into the mantissas (used with scaling off).
    fn unscaled(mut self) -> Self {
        self.a = Complex64::new(
            ldexp(self.a.re, self.scale_exp),
            ldexp(self.a.im, self.scale_exp),
        );
        self.b = Complex64::new(
            ldexp(self.b.re, self.scale_exp),
            ldexp(self.b.im, self.scale_exp),
        );
        self.scale_exp = 0;
        self
    }

    fn is_finite(&self) -> bool {
        [self.a.re, self.a.im, self.b.re, self.b.im]
            .iter()
            .all(|v| v.is_finite())
    }

    /// `k(|a|² - |b|²)·4^scale_exp` for segments with real `k`.
    pub fn flux(&self) -> Option<Scaled> {
        if self.basis != Basis::Plane || self.k.im != 0.0 {
            return None;
        }
        let d = self.k.re * (self.a.norm_sqr() - self.b.norm_sqr());
        Some(Scaled::new(Complex64::new(d, 0.0), 2 * self.scale_exp))
    }
}

/// Solves the 2×2 continuity system at `x_b` for the segment to the right,
/// whose left edge is `x_b`.
pub fn match_at_boundary(w: &SegmentWave, next: Wavenumber, x_b: f64) -> Result<SegmentWave> {
    if next.k == Complex64::new(0.0, 0.0) && !next.degenerate {
        return Err(Error::Internal(
            "zero wavenumber without linear basis".into(),
        ));
    }
    let (psi, dpsi) = w.value_at(x_b - w.origin);
    Ok(SegmentWave::from_values(next, x_b, 0.0, psi, dpsi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartMode {
    /// Seed segment `segment` with `a = 1`, `b = b`.
    Interior { segment: usize, b: Complex64 },
    /// Seed the outermost segment on `side` with its decaying solution only.
    Boundary(Side),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    pub start: StartMode,
    pub energy: f64,
    /// Per-segment rescaling of the coefficients; turning it off stores raw
    /// amplitudes and reports overflow as an error.
    pub scaling: bool,
}

impl PropagationConfig {
    pub fn new(start: StartMode, energy: f64) -> Self {
        PropagationConfig {
            start,
            energy,
            scaling: true,
        }
    }

    pub fn boundary(side: Side, energy: f64) -> Self {
        Self::new(StartMode::Boundary(side), energy)
    }

    pub fn interior(segment: usize, b: Complex64, energy: f64) -> Self {
        Self::new(StartMode::Interior { segment, b }, energy)
    }
}

/// One [`SegmentWave`] per segment of the potential.
#[derive(Debug, Clone)]
pub struct WaveSolution<'p> {
    potential: &'p SegmentedPotential,
    config: PropagationConfig,
    waves: Vec<SegmentWave>,
}

/// One point of a sampled solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub segment: usize,
    pub value: Scaled,
    pub derivative: Scaled,
}

pub fn propagate<'p>(
    p: &'p SegmentedPotential,
    cfg: PropagationConfig,
) -> Result<WaveSolution<'p>> {
    let e = cfg.energy;
    if !e.is_finite() {
        return Err(Error::InvalidArgument(format!("energy {e} is not finite")));
    }
    let n = p.len();
    let (segment, a, b) = match cfg.start {
        StartMode::Interior { segment, b } => {
            if segment >= n {
                return Err(Error::InvalidArgument(format!(
                    "seed segment {segment} outside 0..{n}"
                )));
            }
            (segment, Complex64::new(1.0, 0.0), b)
        }
        StartMode::Boundary(side) => {
            let segment = match side {
                Side::Left => 0,
                Side::Right => n - 1,
            };
            let v = p.values()[segment];
            if !wavenumber(e, v).is_forbidden() {
                return Err(Error::Precondition(format!(
                    "oscillatory tail: E = {e} is not below the edge potential {v}; divergence undefined"
                )));
            }
            // decaying outward: e^{κt} on the left edge, e^{-κt} on the right
            let (one, zero) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
            match side {
                Side::Left => (segment, one, zero),
                Side::Right => (segment, zero, one),
            }
        }
    };
    let waves = sweep(p, e, segment, a, b, cfg.scaling)?;
    Ok(WaveSolution {
        potential: p,
        config: cfg,
        waves,
    })
}

/// Propagates an arbitrary seed `(a, b)` placed in `segment`.
pub fn propagate_seed<'p>(
    p: &'p SegmentedPotential,
    energy: f64,
    segment: usize,
    a: Complex64,
    b: Complex64,
) -> Result<WaveSolution<'p>> {
    if segment >= p.len() {
        return Err(Error::InvalidArgument(format!(
            "seed segment {segment} out of range"
        )));
    }
    let waves = sweep(p, energy, segment, a, b, true)?;
    Ok(WaveSolution {
        potential: p,
        config: PropagationConfig::interior(
            segment,
            if a == Complex64::new(0.0, 0.0) {
                b
            } else {
                b / a
            },
            energy,
        ),
        waves,
    })
}

fn sweep(
    p: &SegmentedPotential,
    energy: f64,
    seed: usize,
    a: Complex64,
    b: Complex64,
    scaling: bool,
) -> Result<Vec<SegmentWave>> {
    let n = p.len();
    let bounds = p.boundaries();
    let wn: Vec<Wavenumber> = p.values().iter().map(|&v| wavenumber(energy, v)).collect();
    let mut waves = vec![SegmentWave::new(a, b, wn[seed], bounds[seed]); n];
    let fix = |w: SegmentWave, i: usize| -> Result<SegmentWave> {
        if scaling {
            return Ok(w);
        }
        let w = w.unscaled();
        if w.is_finite() {
            Ok(w)
        } else {
            Err(Error::Overflow { segment: i })
        }
    };
    for i in seed + 1..n {
        waves[i] = fix(match_at_boundary(&waves[i - 1], wn[i], bounds[i])?, i)?;
    }
    for i in (0..seed).rev() {
        let (psi, dpsi) = waves[i + 1].value_at(0.0);
        let w = SegmentWave::from_values(wn[i], bounds[i], bounds[i + 1] - bounds[i], psi, dpsi);
        waves[i] = fix(w, i)?;
    }
    Ok(waves)
}

impl<'p> WaveSolution<'p> {
    pub fn potential(&self) -> &'p SegmentedPotential {
        self.potential
    }

    pub fn config(&self) -> &PropagationConfig {
        &self.config
    }

    pub fn energy(&self) -> f64 {
        self.config.energy
    }

    /// The same solution multiplied by `factor`.
    pub fn scaled_by(&self, factor: &Scaled) -> WaveSolution<'p> {
        let waves = self
            .waves
            .iter()
            .map(|w| {
                let wn = Wavenumber {
                    k: w.k,
                    degenerate: w.basis == Basis::Linear,
                };
                let (a, b) = (w.a_scaled() * *factor, w.b_scaled() * *factor);
                let exp = match (a.is_zero(), b.is_zero()) {
                    (true, false) => b.exponent,
                    (false, true) => a.exponent,
                    _ => a.exponent.max(b.exponent),
                };
                let mut out =
                    SegmentWave::new(a.to_complex_at(exp), b.to_complex_at(exp), wn, w.origin);
                out.scale_exp = exp;
                out
            })
            .collect();
        WaveSolution {
            potential: self.potential,
            config: self.config,
            waves,
        }
    }

    pub fn waves(&self) -> &[SegmentWave] {
        &self.waves
    }

    /// `(Ψ, Ψ')` at `x` evaluated in segment `i`.
    pub fn value_in(&self, i: usize, x: f64) -> (Scaled, Scaled) {
        let w = &self.waves[i];
        w.value_at(x - w.origin)
    }

    pub fn evaluate(&self, x: f64) -> Result<Scaled> {
        Ok(self.evaluate_with_derivative(x)?.0)
    }

    pub fn derivative(&self, x: f64) -> Result<Scaled> {
        Ok(self.evaluate_with_derivative(x)?.1)
    }

    pub fn evaluate_with_derivative(&self, x: f64) -> Result<(Scaled, Scaled)> {
        let i = self.potential.segment_of(x)?;
        Ok(self.value_in(i, x))
    }

    /// `points_per_segment` uniform samples per segment starting at its left
    /// edge, plus the right domain edge: `N·points_per_segment + 1` points.
    pub fn sample_grid(&self, points_per_segment: usize) -> Vec<Sample> {
        let m = points_per_segment.max(1);
        let n = self.potential.len();
        let mut out = Vec::with_capacity(n * m + 1);
        for i in 0..n {
            let (lo, hi) = self.potential.extent(i);
            for j in 0..m {
                let x = if j == 0 {
                    lo
                } else {
                    lo + (hi - lo) * (j as f64 / m as f64)
                };
                let (value, derivative) = self.value_in(i, x);
                out.push(Sample {
                    x,
                    segment: i,
                    value,
                    derivative,
                });
            }
        }
        let x = self.potential.x_max();
        let (value, derivative) = self.value_in(n - 1, x);
        out.push(Sample {
            x,
            segment: n - 1,
            value,
            derivative,
        });
        out
    }

    /// Largest relative mismatch of value or slope across interior boundaries.
    pub fn continuity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.waves.len() {
            let x = self.potential.boundaries()[i];
            let left = &self.waves[i - 1];
            let (psi_l, dpsi_l) = left.value_at(x - left.origin);
            let (psi_r, dpsi_r) = self.waves[i].value_at(0.0);
            let (t1, t2) = left.terms(x - left.origin);
            let mag = t1.abs() + t2.abs();
            let dmag = match left.basis {
                Basis::Plane => mag.scale(Complex64::new(left.k.norm(), 0.0)),
                Basis::Linear => left.b_scaled().abs(),
            };
            for (d, m) in [(psi_l - psi_r, mag), (dpsi_l - dpsi_r, dmag)] {
                if d.is_zero() {
                    continue;
                }
                let rel = if m.is_zero() {
                    f64::INFINITY
                } else {
                    d.div(&m).to_complex().norm()
                };
                worst = worst.max(rel);
            }
        }
        worst
    }

    /// Largest `|ĤΨ - EΨ| / (|E|·|Ψ|)` over segment midpoints, with the
    /// second derivative replaced by the central difference of width `step`
    /// (shrunk to a quarter segment where needed). `|Ψ|` is the sum of the
    /// basis-term magnitudes so nodes do not inflate the ratio.
    pub fn hamiltonian_residual(&self, energy: f64, step: f64) -> f64 {
        let scale = if energy == 0.0 { 1.0 } else { energy.abs() };
        let mut worst: f64 = 0.0;
        for (i, w) in self.waves.iter().enumerate() {
            let (lo, hi) = self.potential.extent(i);
            let s = step.min(0.25 * (hi - lo));
            let t = 0.5 * (hi - lo);
            let v = self.potential.values()[i];
            let (t1, t2) = w.terms(t);
            let mag = t1.abs() + t2.abs();
            if mag.is_zero() {
                continue;
            }
            let psi = t1 + t2;
            // stencil Ψ(t+s) + Ψ(t-s) - 2Ψ(t) evaluated term by term
            let second = match w.basis {
                Basis::Plane => {
                    let sin = (w.k * (0.5 * s)).sin();
                    psi.scale(-4.0 * sin * sin / (s * s))
                }
                Basis::Linear => Scaled::ZERO,
            };
            let residual = second.scale(Complex64::new(-0.5, 0.0))
                + psi.scale(Complex64::new(v - energy, 0.0));
            if residual.is_zero() {
                continue;
            }
            worst = worst.max(residual.div(&mag).to_complex().norm() / scale);
        }
        worst
    }
}
