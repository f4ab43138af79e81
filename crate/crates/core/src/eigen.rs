//! Eigenvalues from the divergence criterion.
//!
//! A convergent state sits wherever the divergence direction of the free
//! tail flips. [`scan`] brackets flips on an energy grid, [`bisect`] narrows
//! each bracket on the sign alone, and [`verify_cs`] checks that the result
//! is flanked by states diverging in opposite directions.

use crate::divergence::{
    classify, detect_onsets, divergence_sign, free_side, node_count, seeded_solution,
    tail_exponent, Seed, Sign, StateClass, DEFAULT_TAIL_THRESHOLD_EXP, DEFAULT_TAU,
};
use crate::error::{Error, Result};
use crate::potential::SegmentedPotential;
use crate::transfer::{propagate, PropagationConfig, Sample, Side};
use num_complex::Complex64;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Samples per segment for stored wavefunctions and onset scans.
    pub points_per_segment: usize,
    /// Verification half-width as a multiple of the bisection tolerance.
    pub verify_factor: f64,
    pub tail_threshold_exp: i64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            points_per_segment: 1,
            verify_factor: 1e3,
            tail_threshold_exp: DEFAULT_TAIL_THRESHOLD_EXP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub energy: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub tail_exponent_at_solution: i64,
    pub verified: bool,
    pub wavefunction: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumScan {
    pub energies: Vec<f64>,
    pub signs: Vec<Sign>,
    /// Disjoint, ordered; zero width where a grid point converged exactly.
    pub brackets: Vec<(f64, f64)>,
}

pub fn scan(
    p: &SegmentedPotential,
    e_min: f64,
    e_max: f64,
    steps: usize,
    seed: Seed,
) -> Result<SpectrumScan> {
    if !(e_min.is_finite() && e_max.is_finite() && e_min < e_max) {
        return Err(Error::InvalidArgument(format!(
            "empty energy range [{e_min}, {e_max}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument(
            "a scan needs at least 2 steps".into(),
        ));
    }
    let energies: Vec<f64> = (0..=steps)
        .map(|i| {
            if i == steps {
                e_max
            } else {
                e_min + (e_max - e_min) * (i as f64 / steps as f64)
            }
        })
        .collect();
    let signs = energies
        .par_iter()
        .map(|&e| divergence_sign(p, e, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut brackets = Vec::new();
    for i in 0..energies.len() {
        if signs[i] == Sign::Zero {
            brackets.push((energies[i], energies[i]));
        } else if i + 1 < energies.len() && signs[i + 1] != Sign::Zero && signs[i] != signs[i + 1] {
            brackets.push((energies[i], energies[i + 1]));
        }
    }
    Ok(SpectrumScan {
        energies,
        signs,
        brackets,
    })
}

/// Sign bisection on `bracket` until its width is at most `tol`.
pub fn bisect(
    p: &SegmentedPotential,
    bracket: (f64, f64),
    tol: f64,
    seed: Seed,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let (mut lo, mut hi) = bracket;
    if lo > hi {
        return Err(Error::InvalidArgument(format!(
            "bracket [{lo}, {hi}] is reversed"
        )));
    }
    let mut iterations = 0;
    let mut exact = None;
    if lo == hi {
        exact = Some(lo);
    } else {
        let s_lo = divergence_sign(p, lo, seed)?;
        let s_hi = divergence_sign(p, hi, seed)?;
        if s_lo == Sign::Zero {
            exact = Some(lo);
        } else if s_hi == Sign::Zero {
            exact = Some(hi);
        } else if s_lo == s_hi {
            return Err(Error::InvalidBracket { lo, hi });
        } else {
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                iterations += 1;
                match divergence_sign(p, mid, seed)? {
                    Sign::Zero => {
                        exact = Some(mid);
                        break;
                    }
                    s if s == s_lo => lo = mid,
                    _ => hi = mid,
                }
            }
        }
    }
    let energy = exact.unwrap_or(0.5 * (lo + hi));
    let sol = seeded_solution(p, energy, seed)?;
    let eps = opts.verify_factor * tol;
    Ok(EigenResult {
        energy,
        bracket: (lo, hi),
        iterations,
        tail_exponent_at_solution: tail_exponent(&sol, free_side(seed)),
        verified: verify_cs(p, energy, eps, seed).unwrap_or(false),
        wavefunction: sol.sample_grid(opts.points_per_segment),
    })
}

/// Scans, then bisects every bracket. Results are sorted by energy.
pub fn spectrum(
    p: &SegmentedPotential,
    e_min: f64,
    e_max: f64,
    steps: usize,
    tol: f64,
    seed: Seed,
    opts: &SolverOptions,
) -> Result<Vec<EigenResult>> {
    let s = scan(p, e_min, e_max, steps, seed)?;
    let mut out = s
        .brackets
        .par_iter()
        .map(|&b| bisect(p, b, tol, seed, opts))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(out)
}

/// Side whose boundary seed is usable at both energies, preferring `Right`.
fn counting_side(p: &SegmentedPotential, e_hi: f64) -> Result<Side> {
    let n = p.len();
    if e_hi < p.values()[n - 1] {
        Ok(Side::Right)
    } else if e_hi < p.values()[0] {
        Ok(Side::Left)
    } else {
        Err(Error::Precondition(format!(
            "E = {e_hi} lies above both edge potentials; tails oscillate"
        )))
    }
}

/// Number of eigenvalues strictly below `energy` (oscillation count of a
/// boundary-seeded solution).
pub fn count_below(p: &SegmentedPotential, energy: f64) -> Result<usize> {
    let side = counting_side(p, energy)?;
    Ok(node_count(&propagate(
        p,
        PropagationConfig::boundary(side, energy),
    )?))
}

/// True iff the states at `energy ± epsilon` diverge in opposite directions.
pub fn verify_cs(p: &SegmentedPotential, energy: f64, epsilon: f64, seed: Seed) -> Result<bool> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let (lo, hi) = (energy - epsilon, energy + epsilon);
    let crossings = count_below(p, hi)?.saturating_sub(count_below(p, lo)?);
    if crossings > 1 {
        return Err(Error::UnreliableVerification { lo, hi, crossings });
    }
    let below = divergence_sign(p, lo, seed)?;
    let above = divergence_sign(p, hi, seed)?;
    Ok(below.value() * above.value() == -1)
}

/// Locates eigenvalue number `level` (0 = ground state) by bisecting the
/// oscillation count down to a single-eigenvalue bracket, then refining on
/// the divergence sign.
pub fn find_level(
    p: &SegmentedPotential,
    level: usize,
    tol: f64,
    seed: Seed,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    let edge = p.values()[0].min(p.values()[p.len() - 1]);
    let mut lo = p.min_value();
    let mut hi = edge - 1e-9 * edge.abs().max(1.0);
    if !(lo < hi) || count_below(p, hi)? <= level {
        return Err(Error::Precondition(format!(
            "fewer than {} bound states below the edge potential {edge}",
            level + 1
        )));
    }
    let mut lo_count = count_below(p, lo)?;
    if lo_count > level {
        return Err(Error::Internal(
            "eigenvalue below the potential minimum".into(),
        ));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let c = count_below(p, mid)?;
        if c <= level {
            lo = mid;
            lo_count = c;
        } else if c > level + 1 || lo_count < level {
            hi = mid;
        } else {
            // exactly one eigenvalue in (lo, mid] below which `level` others sit
            hi = mid;
            if lo_count == level {
                break;
            }
        }
    }
    bisect(p, (lo, hi), tol, seed, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TuneOutcome {
    /// The energy is an eigenvalue to tolerance, or the best seed shows no
    /// onset anywhere in the domain.
    Converged { b: f64 },
    /// `onset_distance` is the distance from the seed segment's left edge to
    /// the nearer onset, located at `x_d`.
    Divergent {
        b: f64,
        onset_distance: f64,
        x_d: f64,
    },
}

/// Half-width used by [`self_tune_bj`] to decide that `energy` already is an
/// eigenvalue.
pub const TUNE_EIGEN_TOLERANCE: f64 = 1e-9;

/// Onset distance for the interior seed `(1, b)` at `segment`.
fn onset_distance(
    p: &SegmentedPotential,
    energy: f64,
    segment: usize,
    b: f64,
    points_per_segment: usize,
) -> Result<(f64, Option<f64>)> {
    let cfg = PropagationConfig::interior(segment, Complex64::new(b, 0.0), energy);
    let sol = propagate(p, cfg)?;
    let (left, right) = detect_onsets(&sol, DEFAULT_TAU, points_per_segment)?;
    let origin = p.boundaries()[segment];
    let dl = left.map(|x| origin - x);
    let dr = right.map(|x| x - origin);
    Ok(match (dl, dr) {
        (None, None) => (f64::INFINITY, None),
        (Some(d), None) => (d, left),
        (None, Some(d)) => (d, right),
        (Some(l), Some(r)) if l <= r => (l, left),
        (Some(_), Some(r)) => (r, right),
    })
}

/// Maximizes the divergence-free extent around `segment` over a real `b_j`
/// at fixed `energy`: coarse log-spaced scan over both signs, then
/// golden-section search around the best candidate.
pub fn self_tune_bj(
    p: &SegmentedPotential,
    energy: f64,
    segment: usize,
    opts: &SolverOptions,
) -> Result<TuneOutcome> {
    let pps = opts.points_per_segment;
    let mut grid: Vec<f64> = (-12..=12).map(|k| 10f64.powf(0.5 * k as f64)).collect();
    grid.extend(grid.clone().iter().map(|b| -b));
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);

    let score = |b: f64| onset_distance(p, energy, segment, b, pps).map(|r| r.0);
    let scores = grid
        .par_iter()
        .map(|&b| score(b))
        .collect::<Result<Vec<_>>>()?;
    let best = (0..grid.len())
        .max_by(|&i, &j| scores[i].total_cmp(&scores[j]))
        .unwrap_or(0);

    let mut b_best = grid[best];
    if scores[best].is_finite() {
        let mut lo = grid[best.saturating_sub(1)];
        let mut hi = grid[(best + 1).min(grid.len() - 1)];
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - ratio * (hi - lo);
        let mut d = lo + ratio * (hi - lo);
        let (mut fc, mut fd) = (score(c)?, score(d)?);
        for _ in 0..200 {
            if (hi - lo).abs() <= 1e-13 * (1.0 + c.abs()) {
                break;
            }
            if fc >= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - ratio * (hi - lo);
                fc = score(c)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + ratio * (hi - lo);
                fd = score(d)?;
            }
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = score(mid)?;
        if f_mid >= scores[best] {
            b_best = mid;
        }
    }

    let (dist, x_d) = onset_distance(p, energy, segment, b_best, pps)?;
    let at_eigenvalue =
        verify_cs(p, energy, TUNE_EIGEN_TOLERANCE, Seed::Interior { segment }).unwrap_or(false);
    Ok(match x_d {
        Some(x_d) if !at_eigenvalue => TuneOutcome::Divergent {
            b: b_best,
            onset_distance: dist,
            x_d,
        },
        _ => TuneOutcome::Converged { b: b_best },
    })
}

/// Whether a solution at `energy` for `seed` classifies as convergent.
pub fn is_convergent(
    p: &SegmentedPotential,
    energy: f64,
    seed: Seed,
    opts: &SolverOptions,
) -> Result<bool> {
    let sol = seeded_solution(p, energy, seed)?;
    Ok(classify(&sol, opts.tail_threshold_exp)?.class == StateClass::Convergent)
}

/// One solver configuration of a stability study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub points_per_segment: usize,
    pub steps_per_unit: f64,
}

/// Seed of a stability study. Interior seeds are placed by position so the
/// same seed point carries over between segmentations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudySeed {
    Left,
    Right,
    /// Tuned interior seed in the segment containing `x`.
    Interior {
        x: f64,
    },
}

impl StudySeed {
    pub fn resolve(self, p: &SegmentedPotential) -> Result<Seed> {
        Ok(match self {
            StudySeed::Left => Seed::Left,
            StudySeed::Right => Seed::Right,
            StudySeed::Interior { x } => Seed::Interior {
                segment: p.segment_of(x)?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub level: usize,
    pub seeds: Vec<StudySeed>,
    pub refinements: Vec<Refinement>,
    pub tol: f64,
    /// Detuning at which divergence signs are compared.
    pub delta: f64,
    /// With scaling off, each solve is repeated with raw amplitudes and an
    /// overflow marks the configuration unstable.
    pub scaling: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    /// Index into the list of segmentations.
    pub potential: usize,
    pub seed: StudySeed,
    /// `seed` resolved on this row's segmentation.
    pub resolved: Option<Seed>,
    pub refinement: Refinement,
    pub energy: Option<f64>,
    pub sign_below: Option<Sign>,
    pub sign_above: Option<Sign>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// Largest relative spread of the eigenvalue within one segmentation.
    pub spread: f64,
    /// Relative spread across all segmentations.
    pub spread_across_segmentations: f64,
    /// Every row flips sign across the eigenvalue and, per seed, all rows
    /// agree on both signs.
    pub signs_consistent: bool,
    pub failures: usize,
}

impl StabilityReport {
    pub fn stable(&self, max_spread: f64) -> bool {
        self.failures == 0 && self.signs_consistent && self.spread <= max_spread
    }
}

fn relative_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs());
    if scale == 0.0 {
        hi - lo
    } else {
        (hi - lo) / scale
    }
}

fn stability_row(
    p: &SegmentedPotential,
    index: usize,
    study_seed: StudySeed,
    r: Refinement,
    cfg: &StabilityConfig,
) -> StabilityRow {
    let mut row = StabilityRow {
        potential: index,
        seed: study_seed,
        resolved: study_seed.resolve(p).ok(),
        refinement: r,
        energy: None,
        sign_below: None,
        sign_above: None,
        error: None,
    };
    let run = || -> Result<(f64, Sign, Sign)> {
        let seed = study_seed.resolve(p)?;
        let opts = SolverOptions {
            points_per_segment: r.points_per_segment,
            ..SolverOptions::default()
        };
        let rough = find_level(p, cfg.level, 1e-6, seed, &opts)?.energy;
        let edge = p.values()[0].min(p.values()[p.len() - 1]);
        let lo = p.min_value();
        let hi = (rough + 1.0).min(edge - 1e-9 * edge.abs().max(1.0));
        let steps = (((hi - lo) * r.steps_per_unit).ceil() as usize).max(2);
        let s = scan(p, lo, hi, steps, seed)?;
        let bracket = s
            .brackets
            .iter()
            .find(|b| b.0 <= rough && rough <= b.1)
            .copied()
            .ok_or_else(|| {
                Error::Internal(format!("no scan bracket around level {}", cfg.level))
            })?;
        let e = bisect(p, bracket, cfg.tol, seed, &opts)?.energy;
        if !cfg.scaling {
            for energy in [e - cfg.delta, e, e + cfg.delta] {
                let sol = seeded_solution(p, energy, seed)?;
                let mut raw_cfg = *sol.config();
                raw_cfg.scaling = false;
                // interior seeds are re-propagated from their tuned data
                propagate(p, raw_cfg)?;
            }
        }
        Ok((
            e,
            divergence_sign(p, e - cfg.delta, seed)?,
            divergence_sign(p, e + cfg.delta, seed)?,
        ))
    };
    match run() {
        Ok((e, below, above)) => {
            row.energy = Some(e);
            row.sign_below = Some(below);
            row.sign_above = Some(above);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Re-solves one eigenvalue under every seed × refinement on each
/// segmentation and compares eigenvalues and divergence signs.
pub fn stability_study(
    potentials: &[SegmentedPotential],
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    if potentials.is_empty() || cfg.seeds.is_empty() || cfg.refinements.is_empty() {
        return Err(Error::InvalidArgument(
            "stability study needs potentials, seeds and refinements".into(),
        ));
    }
    if !(cfg.tol > 0.0 && cfg.delta > 0.0) {
        return Err(Error::InvalidArgument(
            "tolerance and delta must be positive".into(),
        ));
    }
    let mut jobs = Vec::new();
    for (i, _) in potentials.iter().enumerate() {
        for &seed in &cfg.seeds {
            for &r in &cfg.refinements {
                jobs.push((i, seed, r));
            }
        }
    }
    let rows: Vec<StabilityRow> = jobs
        .par_iter()
        .map(|&(i, seed, r)| stability_row(&potentials[i], i, seed, r, cfg))
        .collect();

    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    let mut spread: f64 = 0.0;
    for i in 0..potentials.len() {
        let es: Vec<f64> = rows
            .iter()
            .filter(|r| r.potential == i)
            .filter_map(|r| r.energy)
            .collect();
        spread = spread.max(relative_spread(&es));
    }
    let all: Vec<f64> = rows.iter().filter_map(|r| r.energy).collect();
    let mut signs_consistent = rows.iter().filter(|r| r.error.is_none()).all(|r| {
        matches!((r.sign_below, r.sign_above), (Some(b), Some(a)) if b.value() * a.value() == -1)
    });
    for &seed in &cfg.seeds {
        let mut pairs = rows
            .iter()
            .filter(|r| r.seed == seed && r.error.is_none())
            .map(|r| (r.sign_below, r.sign_above));
        if let Some(first) = pairs.next() {
            signs_consistent &= pairs.all(|p| p == first);
        }
    }
    Ok(StabilityReport {
        rows,
        spread,
        spread_across_segmentations: relative_spread(&all),
        signs_consistent,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic() -> SegmentedPotential {
        SegmentedPotential::harmonic(-10.0, 10.0, 10000).unwrap()
    }

    #[test]
    fn scan_brackets_each_harmonic_level() {
        let p = harmonic();
        let s = scan(&p, 0.0, 6.0, 600, Seed::Right).unwrap();
        assert_eq!(s.energies.len(), 601);
        assert_eq!(s.brackets.len(), 6);
        for (n, &(lo, hi)) in s.brackets.iter().enumerate() {
            let e = n as f64 + 0.5;
            assert!(lo <= e + 1e-4 && e - 1e-4 <= hi, "{lo} {hi}");
        }
        assert!(s.brackets.windows(2).all(|w| w[0].1 <= w[1].0));
        assert!(scan(&p, 0.0, 0.4, 40, Seed::Right)
            .unwrap()
            .brackets
            .is_empty());
    }

    #[test]
    fn scan_rejects_bad_arguments() {
        let p = harmonic();
        assert!(scan(&p, 1.0, 1.0, 10, Seed::Right).is_err());
        assert!(scan(&p, 0.0, 1.0, 1, Seed::Right).is_err());
    }

    #[test]
    fn bisection_iteration_count() {
        let p = harmonic();
        let tol = 1e-10;
        let r = bisect(
            &p,
            (0.45, 0.55),
            tol,
            Seed::Right,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(r.iterations, (0.1f64 / tol).log2().ceil() as usize);
        assert!(r.bracket.1 - r.bracket.0 <= tol);
        assert!(r.bracket.0 < r.energy && r.energy < r.bracket.1);
        let lo = divergence_sign(&p, r.bracket.0, Seed::Right).unwrap();
        let hi = divergence_sign(&p, r.bracket.1, Seed::Right).unwrap();
        assert_eq!(lo.value(), -hi.value());
        assert!((r.energy - 0.5).abs() < 1e-6);
        assert!(r.verified);
        assert_eq!(r.wavefunction.len(), p.len() + 1);
    }

    #[test]
    fn bisection_is_reproducible() {
        let p = harmonic();
        let o = SolverOptions::default();
        let a = bisect(&p, (0.45, 0.55), 1e-12, Seed::Right, &o).unwrap();
        let b = bisect(&p, (0.45, 0.55), 1e-12, Seed::Right, &o).unwrap();
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    }

    #[test]
    fn bracket_without_flip_is_rejected() {
        let p = harmonic();
        let r = bisect(
            &p,
            (0.6, 0.7),
            1e-10,
            Seed::Right,
            &SolverOptions::default(),
        );
        assert!(matches!(r, Err(Error::InvalidBracket { .. })));
    }

    #[test]
    fn zero_width_bracket_is_returned_as_is() {
        let p = harmonic();
        let r = bisect(
            &p,
            (0.7, 0.7),
            1e-10,
            Seed::Right,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!((r.energy, r.iterations), (0.7, 0));
    }

    #[test]
    fn spectrum_is_sorted_and_verified() {
        let p = harmonic();
        let o = SolverOptions::default();
        let sp = spectrum(&p, 0.0, 6.0, 600, 1e-12, Seed::Right, &o).unwrap();
        assert_eq!(sp.len(), 6);
        for (n, r) in sp.iter().enumerate() {
            assert!((r.energy - (n as f64 + 0.5)).abs() < 1e-4);
            assert!(r.verified);
        }
        assert!(spectrum(&p, 0.0, 0.4, 40, 1e-12, Seed::Right, &o)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn seeds_agree_on_eigenvalues() {
        let p = harmonic();
        let o = SolverOptions::default();
        for level in 0..3 {
            let e: Vec<f64> = [Seed::Right, Seed::Left, Seed::Interior { segment: 5000 }]
                .iter()
                .map(|&s| find_level(&p, level, 1e-13, s, &o).unwrap().energy)
                .collect();
            for x in &e[1..] {
                assert!(((x - e[0]) / e[0]).abs() <= 1e-10, "{e:?}");
            }
        }
    }

    #[test]
    fn verification_windows() {
        let p = harmonic();
        let o = SolverOptions::default();
        let e0 = find_level(&p, 0, 1e-12, Seed::Right, &o).unwrap().energy;
        assert!(verify_cs(&p, e0, 1e-3, Seed::Right).unwrap());
        assert!(verify_cs(&p, e0, 1e-4, Seed::Right).unwrap());
        assert!(!verify_cs(&p, 1.0, 1e-6, Seed::Right).unwrap());
        assert!(matches!(
            verify_cs(&p, e0, 1.0, Seed::Right),
            Err(Error::UnreliableVerification { crossings: 2, .. })
        ));
        assert!(verify_cs(&p, e0, 0.0, Seed::Right).is_err());
    }

    #[test]
    fn level_beyond_the_bound_spectrum() {
        let p = SegmentedPotential::finite_well(10.0, 2.0, 4.0, 3).unwrap();
        let o = SolverOptions::default();
        assert!(find_level(&p, 2, 1e-12, Seed::Right, &o).is_ok());
        assert!(matches!(
            find_level(&p, 3, 1e-12, Seed::Right, &o),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn self_tuning_at_the_ground_state_recovers_it() {
        let p = harmonic();
        let o = SolverOptions::default();
        let e0 = find_level(&p, 0, 1e-13, Seed::Right, &o).unwrap().energy;
        let b = match self_tune_bj(&p, e0, 5000, &o).unwrap() {
            TuneOutcome::Converged { b } => b,
            other => panic!("{other:?}"),
        };
        let tuned = propagate(
            &p,
            PropagationConfig::interior(5000, Complex64::new(b, 0.0), e0),
        )
        .unwrap();
        let boundary = seeded_solution(&p, e0, Seed::Right).unwrap();
        // correlation over the region where both are free of numerical tails
        let (mut uv, mut uu, mut vv) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
        for x in (-500..=500).map(|i| i as f64 / 100.0) {
            let u = tuned.evaluate(x).unwrap().to_complex_at(0);
            let v = boundary.evaluate(x).unwrap().to_complex();
            uv += u.conj() * v;
            uu += u.norm_sqr();
            vv += v.norm_sqr();
        }
        let corr = uv.norm() / (uu * vv).sqrt();
        assert!(corr >= 1.0 - 1e-8, "correlation {corr}");
    }

    #[test]
    fn self_tuning_pushes_the_onset_outward() {
        let p = harmonic();
        let o = SolverOptions::default();
        let e = find_level(&p, 0, 1e-12, Seed::Right, &o).unwrap().energy + 1e-3;
        let (untuned, _) = onset_distance(&p, e, 5000, 0.0, 1).unwrap();
        match self_tune_bj(&p, e, 5000, &o).unwrap() {
            TuneOutcome::Divergent { onset_distance, .. } => assert!(onset_distance > untuned),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn self_tuning_flat_potential_converges() {
        let p = SegmentedPotential::new(vec![0.0, 1.0], vec![0.0], "flat").unwrap();
        assert!(matches!(
            self_tune_bj(&p, 0.5, 0, &SolverOptions::default()).unwrap(),
            TuneOutcome::Converged { .. }
        ));
    }

    fn study(scaling: bool) -> StabilityConfig {
        StabilityConfig {
            level: 0,
            seeds: vec![
                StudySeed::Right,
                StudySeed::Left,
                StudySeed::Interior { x: 0.0 },
            ],
            refinements: vec![
                Refinement {
                    points_per_segment: 1,
                    steps_per_unit: 100.0,
                },
                Refinement {
                    points_per_segment: 2,
                    steps_per_unit: 250.0,
                },
            ],
            tol: 1e-13,
            delta: 1e-4,
            scaling,
        }
    }

    #[test]
    fn stability_across_seeds_and_refinements() {
        let report = stability_study(&[harmonic()], &study(true)).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.failures, 0);
        assert!(report.spread <= 1e-10, "{}", report.spread);
        assert!(report.signs_consistent);
        assert!(report.stable(1e-10));
    }

    #[test]
    fn exact_segmentations_agree() {
        let wells: Vec<_> = [3, 300]
            .iter()
            .map(|&n| SegmentedPotential::finite_well(10.0, 2.0, 4.0, n).unwrap())
            .collect();
        for level in 0..3 {
            let mut cfg = study(true);
            cfg.level = level;
            cfg.seeds = vec![
                StudySeed::Right,
                StudySeed::Left,
                StudySeed::Interior { x: -0.49 },
            ];
            let report = stability_study(&wells, &cfg).unwrap();
            assert!(report.stable(1e-10), "level {level}: {report:?}");
            assert!(report.spread_across_segmentations <= 1e-10);
            let segments: Vec<_> = report.rows.iter().filter_map(|r| r.resolved).collect();
            assert!(segments.contains(&Seed::Interior { segment: 1 }));
            assert!(segments.contains(&Seed::Interior { segment: 135 }));
        }
    }

    #[test]
    fn disabled_scaling_overflows() {
        let p = SegmentedPotential::harmonic(-30.0, 30.0, 10000).unwrap();
        let mut cfg = study(false);
        cfg.seeds = vec![StudySeed::Right];
        cfg.refinements.truncate(1);
        let report = stability_study(&[p], &cfg).unwrap();
        assert_eq!(report.failures, 1);
        assert!(report.rows[0]
            .error
            .as_deref()
            .unwrap()
            .contains("overflow"));
        assert!(!report.stable(1e-10));
    }
}
