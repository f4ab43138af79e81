//! Energy-share normalization, normal/divergent split, mean momenta and the
//! uncertainty-relation fit.
//!
//! A detuned solution coincides with the nearby eigenstate up to the onset
//! `x_d` (normal part) and diverges beyond it (divergent part). The normal
//! part carries the smaller of `E` and `E_n` as its norm, the divergent part
//! the relative share `|E - E_n| / max(E, E_n)`.

use crate::divergence::{detect_xd, free_side, seeded_solution, Seed, DEFAULT_TAU};
use crate::eigen::count_below;
use crate::error::{Error, Result};
use crate::potential::SegmentedPotential;
use crate::scaled::Scaled;
use crate::transfer::{wavenumber, Basis, Sample, SegmentWave, Side, WaveSolution};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which side of the eigenvalue a detuned energy lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetuningSide {
    Above,
    Below,
}

impl DetuningSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetuningSide::Above => "above",
            DetuningSide::Below => "below",
        }
    }

    pub fn of(energy: f64, e_n: f64) -> DetuningSide {
        if energy >= e_n {
            DetuningSide::Above
        } else {
            DetuningSide::Below
        }
    }
}

fn check_energies(energy: f64, e_n: f64) -> Result<()> {
    if !(energy > 0.0 && e_n > 0.0 && energy.is_finite() && e_n.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "energies must be positive, got E = {energy}, E_n = {e_n}"
        )));
    }
    Ok(())
}

/// Norm carried by the normal part: `E_n` above the eigenvalue, `E` below.
pub fn np_energy(energy: f64, e_n: f64) -> f64 {
    energy.min(e_n)
}

/// Probability share of the divergent part.
pub fn dp_weight(energy: f64, e_n: f64) -> Result<f64> {
    check_energies(energy, e_n)?;
    Ok((energy - e_n).abs() / energy.max(e_n))
}

/// `dp_weight · |k_d|`: the divergent-part mean momentum without the fit
/// coefficient.
pub fn mean_momentum_dp_factor(energy: f64, e_n: f64, k_d: f64) -> Result<f64> {
    Ok(dp_weight(energy, e_n)? * k_d.abs())
}

/// `(e^{z} - 1) / z`, scaled so large `Re z` does not overflow.
fn phi(z: Complex64) -> Scaled {
    if z.norm() < 1e-3 {
        let s = Complex64::new(1.0, 0.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
        return Scaled::from_complex(s);
    }
    (Scaled::exp(z) - Scaled::from_real(1.0)).scale(z.inv())
}

/// `∫_{t0}^{t1} e^{ct} dt`.
fn exp_integral(c: Complex64, t0: f64, t1: f64) -> Scaled {
    let d = t1 - t0;
    Scaled::exp(c * t0) * phi(c * d).scale(Complex64::new(d, 0.0))
}

/// `∫|Ψ|²` and `∫Ψ*·(-iΨ')` over local coordinates `[t0, t1]` of one segment.
fn segment_integrals(w: &SegmentWave, t0: f64, t1: f64) -> (Scaled, Scaled) {
    let (a, b) = (w.a_scaled(), w.b_scaled());
    match w.basis {
        Basis::Linear => {
            let d = t1 - t0;
            let d2 = t1 * t1 - t0 * t0;
            let d3 = t1 * t1 * t1 - t0 * t0 * t0;
            let ab = a.conj() * b;
            let norm = (a.conj() * a).scale(Complex64::new(d, 0.0))
                + ab.re().scale(Complex64::new(d2, 0.0))
                + (b.conj() * b).scale(Complex64::new(d3 / 3.0, 0.0));
            let mom = b.scale(-I)
                * (a.conj().scale(Complex64::new(d, 0.0))
                    + b.conj().scale(Complex64::new(0.5 * d2, 0.0)));
            (norm, mom)
        }
        Basis::Plane => {
            let k = w.k;
            let c1 = Complex64::new(2.0 * k.im, 0.0);
            let c2 = Complex64::new(0.0, 2.0 * k.re);
            let aa = (a.conj() * a) * exp_integral(c1, t0, t1);
            let ab = (a.conj() * b) * exp_integral(c2, t0, t1);
            let ba = (b.conj() * a) * exp_integral(-c2, t0, t1);
            let bb = (b.conj() * b) * exp_integral(-c1, t0, t1);
            let norm = aa + ab + ba + bb;
            let mom = (bb - aa + ab - ba).scale(k);
            (norm, mom)
        }
    }
}

/// `(∫|Ψ|², ∫Ψ*·(-iΨ'))` over `[x0, x1]`, exact per segment.
pub fn interval_integrals(sol: &WaveSolution, x0: f64, x1: f64) -> Result<(Scaled, Scaled)> {
    let p = sol.potential();
    if !(x0 <= x1) {
        return Err(Error::InvalidArgument(format!(
            "empty interval [{x0}, {x1}]"
        )));
    }
    let (i0, i1) = (p.segment_of(x0)?, p.segment_of(x1)?);
    let (mut norm, mut mom) = (Scaled::ZERO, Scaled::ZERO);
    for i in i0..=i1 {
        let (lo, hi) = p.extent(i);
        let w = &sol.waves()[i];
        let (n, m) = segment_integrals(w, x0.max(lo) - w.origin, x1.min(hi) - w.origin);
        norm = norm + n;
        mom = mom + m;
    }
    Ok((norm.re(), mom))
}

/// A solution rescaled so its normal part carries a prescribed norm.
#[derive(Debug, Clone)]
pub struct NormalizedWave<'p> {
    pub wave: WaveSolution<'p>,
    /// Global factor applied to the input solution.
    pub factor: Scaled,
    pub np_interval: (f64, f64),
}

impl NormalizedWave<'_> {
    pub fn samples(&self, points_per_segment: usize) -> Vec<Sample> {
        self.wave.sample_grid(points_per_segment)
    }
}

/// Rescales `sol` so that `∫_NP |Ψ|² dx = np_norm`.
pub fn normalize_energy<'p>(
    sol: &WaveSolution<'p>,
    np_norm: f64,
    np_interval: (f64, f64),
) -> Result<NormalizedWave<'p>> {
    if !(np_norm > 0.0 && np_norm.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target norm must be positive, got {np_norm}"
        )));
    }
    let (x0, x1) = np_interval;
    if !(x0 < x1) {
        return Err(Error::InvalidArgument(format!(
            "empty normal part [{x0}, {x1}]"
        )));
    }
    let (norm, _) = interval_integrals(sol, x0, x1)?;
    if norm.is_zero() || !norm.is_finite() {
        return Err(Error::DegenerateInput("normal part has zero norm".into()));
    }
    // factor = sqrt(np_norm / norm), taken in exponent-split form
    let half = norm.exponent.div_euclid(2);
    let rest = norm.mantissa.re * 2f64.powi((norm.exponent - 2 * half) as i32);
    let factor = Scaled::new(Complex64::new((np_norm / rest).sqrt(), 0.0), -half);
    Ok(NormalizedWave {
        wave: sol.scaled_by(&factor),
        factor,
        np_interval,
    })
}

/// Splits samples at `x_d`: the divergent part lies strictly on
/// `divergent_side`, a sample exactly at `x_d` stays in the normal part.
pub fn split_np_dp(
    samples: &[Sample],
    x_d: f64,
    divergent_side: Side,
) -> (Vec<Sample>, Vec<Sample>) {
    samples.iter().partition(|s| match divergent_side {
        Side::Left => s.x >= x_d,
        Side::Right => s.x <= x_d,
    })
}

/// How the normal-part momentum integral is reduced to a real number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumMode {
    /// Real part: the Hermitian part of the truncated integral. Zero for
    /// real standing waves.
    RealPart,
    /// Modulus, including the imaginary boundary term `½|Ψ(x_d)|²`.
    Magnitude,
}

impl MomentumMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MomentumMode::RealPart => "real",
            MomentumMode::Magnitude => "magnitude",
        }
    }
}

/// `∫_NP Ψ*·(-iΨ') dx` reduced per `mode`.
pub fn mean_momentum_np(nw: &NormalizedWave, mode: MomentumMode) -> Result<f64> {
    let (_, mom) = interval_integrals(&nw.wave, nw.np_interval.0, nw.np_interval.1)?;
    let m = mom.to_complex();
    Ok(match mode {
        MomentumMode::RealPart => m.re,
        MomentumMode::Magnitude => m.norm(),
    })
}

/// `|k|` of the segment containing `x`, shifted by `offset` segments; a
/// degenerate segment takes `|k|` from its nearest plane-basis neighbor.
pub fn onset_wavenumber(p: &SegmentedPotential, energy: f64, x: f64, offset: isize) -> Result<f64> {
    let n = p.len() as isize;
    let i = p.segment_of(x)? as isize + offset;
    if !(0..n).contains(&i) {
        return Err(Error::InvalidArgument(format!(
            "segment offset {offset} leaves the domain"
        )));
    }
    for d in 0..n {
        for j in [i - d, i + d] {
            if (0..n).contains(&j) {
                let wn = wavenumber(energy, p.values()[j as usize]);
                if wn.basis() == Basis::Plane {
                    return Ok(wn.k.norm());
                }
            }
        }
    }
    Err(Error::DegenerateInput(
        "every segment is degenerate at this energy".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyRecord {
    pub energy: f64,
    pub e_n: f64,
    pub delta_e: f64,
    pub x_d: f64,
    pub delta_x: f64,
    pub k_d: f64,
    pub p_d_factor: f64,
    pub p_c: f64,
    pub side: DetuningSide,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetOptions {
    pub tau: f64,
    pub points_per_segment: usize,
    pub momentum_mode: MomentumMode,
    /// Segment offset from the onset segment used for `k_d`.
    pub k_offset: isize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            tau: DEFAULT_TAU,
            points_per_segment: 4,
            momentum_mode: MomentumMode::RealPart,
            k_offset: 0,
        }
    }
}

fn collect_one(
    p: &SegmentedPotential,
    e_n: f64,
    delta: f64,
    side: DetuningSide,
    seed: Seed,
    opts: &DatasetOptions,
) -> Result<Option<UncertaintyRecord>> {
    let energy = match side {
        DetuningSide::Above => e_n + delta,
        DetuningSide::Below => e_n - delta,
    };
    check_energies(energy, e_n)?;
    let nudge = 1e-9 * e_n.abs().max(1.0);
    let (lo, hi) = match side {
        DetuningSide::Above => (e_n - nudge, energy),
        DetuningSide::Below => (energy, e_n + nudge),
    };
    let crossings = count_below(p, hi)?.saturating_sub(count_below(p, lo)?);
    if crossings == 0 {
        return Err(Error::Precondition(format!("no eigenvalue at E_n = {e_n}")));
    }
    if crossings > 1 {
        log::warn!(
            "detuning {delta} from {e_n} spans {} other eigenvalue(s); skipped",
            crossings - 1
        );
        return Ok(None);
    }
    let reference = seeded_solution(p, e_n, seed)?;
    let sol = seeded_solution(p, energy, seed)?;
    let x_d = match detect_xd(&sol, &reference, opts.tau, opts.points_per_segment) {
        Ok(x) => x,
        Err(Error::NotDivergent) => {
            log::warn!("no divergence onset at detuning {delta} from {e_n}; skipped");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let np_interval = match free_side(seed) {
        Side::Left => (x_d, p.x_max()),
        Side::Right => (p.x_min(), x_d),
    };
    let nw = normalize_energy(&sol, np_energy(energy, e_n), np_interval)?;
    let k_d = onset_wavenumber(p, energy, x_d, opts.k_offset)?;
    Ok(Some(UncertaintyRecord {
        energy,
        e_n,
        delta_e: (energy - e_n).abs(),
        x_d,
        delta_x: x_d.abs(),
        k_d,
        p_d_factor: mean_momentum_dp_factor(energy, e_n, k_d)?,
        p_c: mean_momentum_np(&nw, opts.momentum_mode)?,
        side,
    }))
}

/// One record per detuning on `side` of the eigenvalue `e_n`, in input
/// order. Detunings reaching past a neighboring eigenvalue, or too small to
/// produce an onset, are skipped with a warning.
pub fn collect_uncertainty_dataset(
    p: &SegmentedPotential,
    e_n: f64,
    detunings: &[f64],
    side: DetuningSide,
    seed: Seed,
    opts: &DatasetOptions,
) -> Result<Vec<UncertaintyRecord>> {
    if matches!(seed, Seed::Interior { .. }) {
        return Err(Error::InvalidArgument(
            "datasets need a boundary seed".into(),
        ));
    }
    if let Some(d) = detunings.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "detunings must be positive, got {d}"
        )));
    }
    let out = detunings
        .par_iter()
        .map(|&d| collect_one(p, e_n, d, side, seed, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(out.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub a: f64,
    /// `ln|ΔE| - ln(|a·p_d + p_c| / (2Δx))` per record.
    pub residuals: Vec<f64>,
    pub records: usize,
}

impl FitResult {
    pub fn median_abs_residual(&self) -> f64 {
        let mut r: Vec<f64> = self.residuals.iter().map(|x| x.abs()).collect();
        r.sort_by(f64::total_cmp);
        let n = r.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            r[n / 2]
        } else {
            0.5 * (r[n / 2 - 1] + r[n / 2])
        }
    }
}

fn log_residual(r: &UncertaintyRecord, a: f64) -> f64 {
    r.delta_e.ln() - ((a * r.p_d_factor + r.p_c).abs() / (2.0 * r.delta_x)).ln()
}

fn objective(records: &[UncertaintyRecord], a: f64) -> f64 {
    let s: f64 = records.iter().map(|r| log_residual(r, a).powi(2)).sum();
    if s.is_nan() {
        f64::INFINITY
    } else {
        s
    }
}

/// Golden-section minimum of `f` over `[lo, hi]`.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Least-squares fit of `a` in log space, searched separately over `a > 0`
/// and `a < 0` (coarse log-spaced scan, then golden section in `ln|a|`).
pub fn fit_uncertainty(records: &[UncertaintyRecord]) -> Result<FitResult> {
    if records.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: records.len(),
        });
    }
    let mut best: Option<(f64, f64)> = None;
    for sign in [1.0, -1.0] {
        let f = |u: f64| objective(records, sign * u.exp());
        let grid: Vec<f64> = (-300..=300).map(|i| i as f64 * 0.1).collect();
        let vals: Vec<f64> = grid.iter().map(|&u| f(u)).collect();
        let i = (0..grid.len())
            .min_by(|&i, &j| vals[i].total_cmp(&vals[j]))
            .unwrap_or(0);
        if !vals[i].is_finite() {
            continue;
        }
        let u = golden(
            f,
            grid[i.saturating_sub(1)],
            grid[(i + 1).min(grid.len() - 1)],
        );
        let (a, s) = (sign * u.exp(), f(u));
        if best.is_none_or(|(_, bs)| s < bs) {
            best = Some((a, s));
        }
    }
    let (a, _) =
        best.ok_or_else(|| Error::DegenerateInput("fit objective is nowhere finite".into()))?;
    Ok(FitResult {
        a,
        residuals: records.iter().map(|r| log_residual(r, a)).collect(),
        records: records.len(),
    })
}

/// `ΔE·Δx ≥ ½|a·p_d + p_c|` with a relative slack of `1e-6` (`ħ = m = 1`).
pub fn check_uncertainty_inequality(rec: &UncertaintyRecord, a: f64) -> bool {
    rec.delta_e * rec.delta_x >= 0.5 * (a * rec.p_d_factor + rec.p_c).abs() * (1.0 - 1e-6)
}

pub const DATASET_HEADER: &str = "E,E_n,delta_E,x_d,delta_x,k_d,p_d_factor,p_c,side";

/// Dataset as CSV with 17 significant digits per value.
pub fn dataset_csv(records: &[UncertaintyRecord]) -> String {
    let mut out = String::from(DATASET_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.energy,
            r.e_n,
            r.delta_e,
            r.x_d,
            r.delta_x,
            r.k_d,
            r.p_d_factor,
            r.p_c,
            r.side.as_str()
        );
    }
    out
}
