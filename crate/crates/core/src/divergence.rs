//! Divergence classification of arbitrary-energy solutions.
//!
//! Away from an eigenvalue the solution picks up the exponentially growing
//! branch in the outer forbidden segments. The sign of that branch's
//! coefficient is the direction `Ψ(±∞) = ±∞`; it flips exactly when the
//! energy crosses a convergent state, which is what the eigensolver brackets.

use crate::error::{Error, Result};
use crate::potential::SegmentedPotential;
use crate::scaled::Scaled;
use crate::transfer::{
    propagate, propagate_seed, wavenumber, Basis, PropagationConfig, Sample, SegmentWave, Side,
    StartMode, WaveSolution,
};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const DEFAULT_TAIL_THRESHOLD_EXP: i64 = 64;
pub const DEFAULT_TAU: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateClass {
    Convergent,
    /// Tails diverge with opposite signs.
    Alpha,
    BetaPlus,
    BetaMinus,
}

impl StateClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateClass::Convergent => "convergent",
            StateClass::Alpha => "alpha",
            StateClass::BetaPlus => "beta_plus",
            StateClass::BetaMinus => "beta_minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    pub class: StateClass,
    pub sign_left: Option<i8>,
    pub sign_right: Option<i8>,
    pub x_d: Option<f64>,
    /// `log2(|Ψ(edge)| / max |Ψ| over the allowed region)`, largest over
    /// the free sides.
    pub tail_exponent: i64,
}

/// Divergence direction of the free tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Minus,
    /// The growing coefficient vanished exactly: a convergent state.
    Zero,
    Plus,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Minus => -1,
            Sign::Zero => 0,
            Sign::Plus => 1,
        }
    }

    fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Plus
        } else if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Zero
        }
    }
}

/// How the eigensolver seeds each trial solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seed {
    /// Decaying solution in the leftmost segment; the right tail is free.
    Left,
    /// Decaying solution in the rightmost segment; the left tail is free.
    Right,
    /// `b_j` in `segment` tuned at each energy so the left tail cannot grow;
    /// the right tail is free.
    Interior { segment: usize },
}

/// Sides whose tail is not fixed by the seed.
pub fn free_sides(cfg: &PropagationConfig) -> &'static [Side] {
    match cfg.start {
        StartMode::Boundary(Side::Left) => &[Side::Right],
        StartMode::Boundary(Side::Right) => &[Side::Left],
        StartMode::Interior { .. } => &[Side::Left, Side::Right],
    }
}

fn outer_index(p: &SegmentedPotential, side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => p.len() - 1,
    }
}

fn check_forbidden(sol: &WaveSolution, side: Side) -> Result<()> {
    let p = sol.potential();
    let i = outer_index(p, side);
    let w = &sol.waves()[i];
    if w.basis == Basis::Plane && w.k.im > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "oscillatory edge: E = {} is not below V = {} on the {side:?} side",
            sol.energy(),
            p.values()[i]
        )))
    }
}

/// Coefficient of the branch that grows towards infinity on `side`.
pub fn growing_coefficient(sol: &WaveSolution, side: Side) -> Result<Scaled> {
    check_forbidden(sol, side)?;
    let w = &sol.waves()[outer_index(sol.potential(), side)];
    Ok(match side {
        Side::Left => w.b_scaled(),
        Side::Right => w.a_scaled(),
    })
}

/// Coefficient of the branch that decays towards infinity on `side`.
pub fn decaying_coefficient(sol: &WaveSolution, side: Side) -> Result<Scaled> {
    check_forbidden(sol, side)?;
    let w = &sol.waves()[outer_index(sol.potential(), side)];
    Ok(match side {
        Side::Left => w.a_scaled(),
        Side::Right => w.b_scaled(),
    })
}

/// Segments used as the magnitude reference: the classically allowed ones,
/// or the deepest ones when nothing is allowed.
pub fn reference_segments(p: &SegmentedPotential, energy: f64) -> Vec<usize> {
    let allowed: Vec<usize> = (0..p.len()).filter(|&i| p.values()[i] <= energy).collect();
    if !allowed.is_empty() {
        return allowed;
    }
    let vmin = p.min_value();
    (0..p.len()).filter(|&i| p.values()[i] == vmin).collect()
}

/// Largest `|Ψ|` over the edges and midpoints of the reference segments.
pub fn reference_magnitude(sol: &WaveSolution) -> Scaled {
    let p = sol.potential();
    let mut best = Scaled::ZERO;
    for i in reference_segments(p, sol.energy()) {
        let (lo, hi) = p.extent(i);
        for x in [lo, 0.5 * (lo + hi), hi] {
            let v = sol.value_in(i, x).0.abs();
            if v.abs_cmp(&best).is_gt() {
                best = v;
            }
        }
    }
    best
}

/// `floor(log2(|Ψ(edge)| / reference magnitude))`.
pub fn tail_exponent(sol: &WaveSolution, side: Side) -> i64 {
    let p = sol.potential();
    let (i, x) = match side {
        Side::Left => (0, p.x_min()),
        Side::Right => (p.len() - 1, p.x_max()),
    };
    let edge = sol.value_in(i, x).0;
    let r = reference_magnitude(sol);
    if edge.is_zero() {
        return i64::MIN;
    }
    if r.is_zero() {
        return i64::MAX;
    }
    (edge.log2_abs() - r.log2_abs()).floor() as i64
}

/// Classifies the solution by the sign pattern of its diverging tails.
pub fn classify(sol: &WaveSolution, tail_threshold_exp: i64) -> Result<DivergenceReport> {
    check_forbidden(sol, Side::Left)?;
    check_forbidden(sol, Side::Right)?;
    let mut report = DivergenceReport {
        class: StateClass::Convergent,
        sign_left: None,
        sign_right: None,
        x_d: None,
        tail_exponent: i64::MIN,
    };
    for &side in free_sides(sol.config()) {
        let te = tail_exponent(sol, side);
        report.tail_exponent = report.tail_exponent.max(te);
        if te <= tail_threshold_exp {
            continue;
        }
        let s = match growing_coefficient(sol, side)?.re_signum() {
            0 => continue,
            s => Some(s),
        };
        match side {
            Side::Left => report.sign_left = s,
            Side::Right => report.sign_right = s,
        }
    }
    report.class = match (report.sign_left, report.sign_right) {
        (None, None) => StateClass::Convergent,
        (Some(l), Some(r)) if l != r => StateClass::Alpha,
        (Some(s), _) | (None, Some(s)) => {
            if s > 0 {
                StateClass::BetaPlus
            } else {
                StateClass::BetaMinus
            }
        }
    };
    Ok(report)
}

/// Solution for `seed` at `energy`. Interior seeds are tuned so the left
/// tail cannot grow; all seeds produce real solutions.
pub fn seeded_solution<'p>(
    p: &'p SegmentedPotential,
    energy: f64,
    seed: Seed,
) -> Result<WaveSolution<'p>> {
    match seed {
        Seed::Left => propagate(p, PropagationConfig::boundary(Side::Left, energy)),
        Seed::Right => propagate(p, PropagationConfig::boundary(Side::Right, energy)),
        Seed::Interior { segment } => tuned_interior(p, energy, segment),
    }
}

/// Propagates the solution with real value `psi` and slope `dpsi` at the
/// left edge of `segment`.
fn propagate_values<'p>(
    p: &'p SegmentedPotential,
    energy: f64,
    segment: usize,
    psi: Scaled,
    dpsi: Scaled,
) -> Result<WaveSolution<'p>> {
    if segment >= p.len() {
        return Err(Error::InvalidArgument(format!(
            "seed segment {segment} out of range"
        )));
    }
    let wn = wavenumber(energy, p.values()[segment]);
    let w = SegmentWave::from_values(wn, p.boundaries()[segment], 0.0, psi, dpsi);
    // the seed mantissas drop `scale_exp`; restore it so solutions from
    // different seed data stay comparable
    let sol = propagate_seed(p, energy, segment, w.a, w.b)?;
    Ok(sol.scaled_by(&Scaled::new(Complex64::new(1.0, 0.0), w.scale_exp)))
}

fn tuned_interior<'p>(
    p: &'p SegmentedPotential,
    energy: f64,
    segment: usize,
) -> Result<WaveSolution<'p>> {
    let (one, zero) = (Scaled::from_real(1.0), Scaled::ZERO);
    // left growing coefficient is linear in the seed data (Ψ, Ψ')
    let g_value = growing_coefficient(
        &propagate_values(p, energy, segment, one, zero)?,
        Side::Left,
    )?;
    let g_slope = growing_coefficient(
        &propagate_values(p, energy, segment, zero, one)?,
        Side::Left,
    )?;
    let (psi, dpsi) = (g_slope.re(), -g_value.re());
    if psi.is_zero() && dpsi.is_zero() {
        return Err(Error::Internal("left tail independent of the seed".into()));
    }
    propagate_values(p, energy, segment, psi, dpsi)
}

/// Divergence direction of the free tail for `seed`: the sign of
/// `Re Ψ(±∞)`, read from the growing coefficient of the outer segment.
pub fn divergence_sign(p: &SegmentedPotential, energy: f64, seed: Seed) -> Result<Sign> {
    let sol = seeded_solution(p, energy, seed)?;
    let side = free_side(seed);
    let g = growing_coefficient(&sol, side)?;
    Ok(Sign::of(g.mantissa.re))
}

/// The tail that a seed leaves free.
pub fn free_side(seed: Seed) -> Side {
    match seed {
        Seed::Right => Side::Left,
        Seed::Left | Seed::Interior { .. } => Side::Right,
    }
}

/// Number of zeros of `Re Ψ` on the whole line, with forbidden outer
/// segments continued to infinity. For a real solution decaying on its seed
/// side this counts the eigenvalues below its energy.
pub fn node_count(sol: &WaveSolution) -> usize {
    let p = sol.potential();
    let n = p.len();
    let mut count = 0;
    for (i, w) in sol.waves().iter().enumerate() {
        let (lo, hi) = p.extent(i);
        let width = hi - lo;
        let forbidden = w.basis == Basis::Plane && w.k.im > 0.0;
        let t_lo = if i == 0 && forbidden {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        let t_hi = if i == n - 1 && forbidden {
            f64::INFINITY
        } else {
            width
        };
        let inside = |t: f64| (t > t_lo || (t_lo == f64::NEG_INFINITY && t >= t_lo)) && t <= t_hi;
        match w.basis {
            Basis::Linear => {
                let (p0, q) = (w.a.re, w.b.re);
                if q != 0.0 && inside(-p0 / q) {
                    count += 1;
                }
            }
            Basis::Plane if forbidden => {
                // Re Ψ = P e^{κt} + Q e^{-κt}
                let (pp, q) = (w.a.re, w.b.re);
                if pp != 0.0 && -q / pp > 0.0 {
                    let t = (-q / pp).ln() / (2.0 * w.k.im);
                    if inside(t) {
                        count += 1;
                    }
                }
            }
            Basis::Plane => {
                // Re Ψ = P cos kt + Q sin kt = R cos(kt - φ)
                let pp = w.a.re + w.b.re;
                let q = w.a.im - w.b.im;
                if pp == 0.0 && q == 0.0 {
                    continue;
                }
                let phi = q.atan2(pp);
                let k = w.k.re;
                let hi = ((k * width - phi - 0.5 * PI) / PI).floor();
                let lo = ((-phi - 0.5 * PI) / PI).floor();
                count += (hi - lo).max(0.0) as usize;
            }
        }
    }
    count
}

/// Linear interpolation of the first crossing of `ratio >= 1` along `order`,
/// stopping early where `stop` reports true.
fn first_crossing(
    samples: &[Sample],
    order: impl Iterator<Item = usize>,
    threshold: &Scaled,
    mut stop: impl FnMut(usize) -> bool,
) -> Option<f64> {
    let ratio = |d: &Scaled| d.abs().div(threshold).to_complex().re;
    let mut prev: Option<(f64, f64)> = None;
    for idx in order {
        if stop(idx) {
            return None;
        }
        let r = ratio(&samples[idx].derivative);
        let x = samples[idx].x;
        if r >= 1.0 {
            return Some(match prev {
                Some((x0, r0)) if r.is_finite() => x0 + (1.0 - r0) / (r - r0) * (x - x0),
                _ => x,
            });
        }
        prev = Some((x, r));
    }
    None
}

/// Largest `|Ψ'|` over samples in the reference segments of `energy`.
fn slope_scale(p: &SegmentedPotential, energy: f64, samples: &[Sample]) -> Scaled {
    let allowed = reference_segments(p, energy);
    samples
        .iter()
        .filter(|s| allowed.binary_search(&s.segment).is_ok())
        .map(|s| s.derivative.abs())
        .fold(
            Scaled::ZERO,
            |m, d| if d.abs_cmp(&m).is_gt() { d } else { m },
        )
}

/// Onset of divergence: scanning from the reference's peak in the allowed
/// region towards the free side of `sol`, the first position where `|Ψ'|`
/// reaches `tau · max |Ψ_ref'|` (maximum over the reference's allowed region).
/// The scan stops where the reference itself crosses that level, so a
/// solution indistinguishable from the reference reports `NotDivergent`.
pub fn detect_xd(
    sol: &WaveSolution,
    reference: &WaveSolution,
    tau: f64,
    points_per_segment: usize,
) -> Result<f64> {
    let sides = free_sides(sol.config());
    if sides.len() != 1 {
        return Err(Error::Precondition(
            "onset detection needs a solution with a single free tail".into(),
        ));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let p = sol.potential();
    if p.boundaries() != reference.potential().boundaries() {
        return Err(Error::InvalidArgument(
            "solutions live on different potentials".into(),
        ));
    }
    let grid = sol.sample_grid(points_per_segment);
    let refg = reference.sample_grid(points_per_segment);
    let d_ref = slope_scale(p, reference.energy(), &refg);
    if d_ref.is_zero() {
        return Err(Error::DegenerateInput("reference has no slope".into()));
    }
    let allowed = reference_segments(p, reference.energy());
    let peak = (0..refg.len())
        .filter(|&i| allowed.binary_search(&refg[i].segment).is_ok())
        .max_by(|&i, &j| refg[i].value.abs_cmp(&refg[j].value))
        .unwrap_or(0);
    let threshold = d_ref.scale(Complex64::new(tau, 0.0));
    let ref_past = |idx: usize| refg[idx].derivative.abs_cmp(&threshold).is_ge();
    let found = match sides[0] {
        Side::Left => first_crossing(&grid, (0..=peak).rev(), &threshold, ref_past),
        Side::Right => first_crossing(&grid, peak..grid.len(), &threshold, ref_past),
    };
    found.ok_or(Error::NotDivergent)
}

/// Onsets on both sides of the seed segment's left edge for a single
/// solution, measured against `tau` times its own largest slope in the
/// allowed region. `None` where no onset occurs inside the domain.
pub fn detect_onsets(
    sol: &WaveSolution,
    tau: f64,
    points_per_segment: usize,
) -> Result<(Option<f64>, Option<f64>)> {
    let p = sol.potential();
    let origin = match sol.config().start {
        StartMode::Interior { segment, .. } => p.boundaries()[segment],
        StartMode::Boundary(Side::Left) => p.x_min(),
        StartMode::Boundary(Side::Right) => p.x_max(),
    };
    let grid = sol.sample_grid(points_per_segment);
    let scale = slope_scale(p, sol.energy(), &grid);
    if scale.is_zero() {
        return Ok((None, None));
    }
    let threshold = scale.scale(Complex64::new(tau, 0.0));
    let split = grid.partition_point(|s| s.x < origin);
    let left = first_crossing(&grid, (0..split).rev(), &threshold, |_| false);
    let right = first_crossing(&grid, split..grid.len(), &threshold, |_| false);
    Ok((left, right))
}
