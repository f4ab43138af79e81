use cetm::analysis::{
    collect_uncertainty_dataset, dataset_csv, fit_uncertainty, DatasetOptions, DetuningSide,
    MomentumMode,
};
use cetm::divergence::{
    classify, detect_onsets, detect_xd, reference_magnitude, seeded_solution, Seed, StateClass,
};
use cetm::eigen::{
    count_below, find_level, spectrum, stability_study, Refinement, SolverOptions, StabilityConfig,
    StudySeed,
};
use cetm::oracle::{analytic_finite_well, compare, numerov_spectrum, OracleMethod, OracleResult};
use cetm::{propagate, Error, PropagationConfig, Scaled, SegmentedPotential, WaveSolution};
use num_complex::Complex64;
use serde::Serialize;

use crate::args::{
    Command, Common, OracleArgs, OracleKind, PcMode, PotentialKind, SideArg, SpectrumArgs,
    StabilityArgs, UncertaintyArgs, WavefunctionArgs,
};
use crate::output::{csv, json, num, Outputs};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_EMPTY: u8 = 3;
pub const EXIT_PRECONDITION: u8 = 4;
pub const EXIT_VERIFICATION: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::OutOfRange { .. } => EXIT_CONFIG,
        Error::InsufficientData { .. } => EXIT_EMPTY,
        Error::Precondition(_) | Error::DegenerateInput(_) | Error::NotDivergent => {
            EXIT_PRECONDITION
        }
        Error::Overflow { .. }
        | Error::InvalidBracket { .. }
        | Error::UnreliableVerification { .. }
        | Error::Internal(_) => EXIT_VERIFICATION,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(exit_code(&e), e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(format!("cannot write outputs: {e}"))
    }
}

type Run = Result<(), Failure>;

pub fn run(cmd: Command) -> Run {
    match cmd {
        Command::Spectrum(a) => cmd_spectrum(&a),
        Command::Wavefunction(a) => cmd_wavefunction(&a),
        Command::Uncertainty(a) => cmd_uncertainty(&a),
        Command::OracleCheck(a) => cmd_oracle_check(&a),
        Command::Stability(a) => cmd_stability(&a),
    }
}

fn build_potential(c: &Common, segments: usize) -> Result<SegmentedPotential, Failure> {
    if segments == 0 && c.potential != PotentialKind::File {
        return Err(Failure::config("--segments must be at least 1"));
    }
    let p = match c.potential {
        PotentialKind::Harmonic => SegmentedPotential::harmonic(c.xmin, c.xmax, segments),
        PotentialKind::Well => {
            SegmentedPotential::finite_well(c.depth, c.width, c.padding, segments)
        }
        PotentialKind::Hydrogen => {
            SegmentedPotential::hydrogen_1d(c.softening, c.xmin, c.xmax, segments)
        }
        PotentialKind::File => {
            let path = c
                .file
                .as_ref()
                .ok_or_else(|| Failure::config("--potential file needs --file"))?;
            SegmentedPotential::from_file(path)
        }
    };
    p.map_err(|e| Failure::config(e.to_string()))
}

fn check_tol(c: &Common) -> Run {
    if !(c.tol > 0.0 && c.tol.is_finite()) {
        return Err(Failure::config(format!(
            "--tol must be positive, got {}",
            c.tol
        )));
    }
    if !(c.tau > 0.0 && c.tau.is_finite()) {
        return Err(Failure::config(format!(
            "--tau must be positive, got {}",
            c.tau
        )));
    }
    Ok(())
}

/// A parsed `--seed`; `b` is set only for `interior:J:B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedSpec {
    pub seed: Seed,
    pub b: Option<f64>,
}

pub fn parse_seed(s: &str, n_segments: usize) -> Result<SeedSpec, Failure> {
    let bad = || {
        Failure::config(format!(
            "invalid seed `{s}`: expected left, right, interior:J or interior:J:B"
        ))
    };
    let parts: Vec<&str> = s.trim().split(':').collect();
    let spec = match parts.as_slice() {
        ["left"] => SeedSpec {
            seed: Seed::Left,
            b: None,
        },
        ["right"] => SeedSpec {
            seed: Seed::Right,
            b: None,
        },
        ["interior"] => SeedSpec {
            seed: Seed::Interior {
                segment: n_segments / 2,
            },
            b: None,
        },
        ["interior", j] => SeedSpec {
            seed: Seed::Interior {
                segment: j.parse().map_err(|_| bad())?,
            },
            b: None,
        },
        ["interior", j, b] => SeedSpec {
            seed: Seed::Interior {
                segment: j.parse().map_err(|_| bad())?,
            },
            b: Some(b.parse().map_err(|_| bad())?),
        },
        _ => return Err(bad()),
    };
    if let Seed::Interior { segment } = spec.seed {
        if segment >= n_segments {
            return Err(Failure::config(format!(
                "seed segment {segment} outside 0..{n_segments}"
            )));
        }
    }
    if spec.b.is_some_and(|b| !b.is_finite()) {
        return Err(bad());
    }
    Ok(spec)
}

fn seed_label(seed: Seed) -> String {
    match seed {
        Seed::Left => "left".into(),
        Seed::Right => "right".into(),
        Seed::Interior { segment } => format!("interior:{segment}"),
    }
}

/// `[E_min, E_max]` defaulting to the potential minimum and just below the
/// lower edge potential, with the scan step count at 100 per unit energy.
fn energy_window(
    p: &SegmentedPotential,
    emin: Option<f64>,
    emax: Option<f64>,
    steps: Option<usize>,
) -> Result<(f64, f64, usize), Failure> {
    let edge = p.values()[0].min(p.values()[p.len() - 1]);
    let lo = emin.unwrap_or_else(|| p.min_value());
    let hi = emax.unwrap_or(edge - 1e-9 * edge.abs().max(1.0));
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Failure::config(format!("empty energy range [{lo}, {hi}]")));
    }
    let steps = steps.unwrap_or_else(|| ((100.0 * (hi - lo)).ceil() as usize).max(2));
    if steps < 2 {
        return Err(Failure::config("--steps must be at least 2"));
    }
    Ok((lo, hi, steps))
}

fn write(out: Outputs, c: &Common) -> Run {
    for path in out.write(&c.out)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_spectrum(a: &SpectrumArgs) -> Run {
    let c = &a.common;
    check_tol(c)?;
    let p = build_potential(c, c.segments)?;
    let seed = parse_seed(&c.seed, p.len())?.seed;
    let (lo, hi, steps) = energy_window(&p, a.emin, a.emax, a.steps)?;
    let opts = SolverOptions {
        verify_factor: a.verify_factor,
        ..SolverOptions::default()
    };
    let levels = spectrum(&p, lo, hi, steps, c.tol, seed, &opts)?;
    if levels.is_empty() {
        return Err(Failure::new(
            EXIT_EMPTY,
            format!("no eigenvalues in [{lo}, {hi}]"),
        ));
    }
    let rows: Vec<Vec<String>> = levels
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                num(r.energy),
                num(r.bracket.0),
                num(r.bracket.1),
                r.verified.to_string(),
                r.tail_exponent_at_solution.to_string(),
            ]
        })
        .collect();
    let mut out = Outputs::default();
    out.add(
        "spectrum.csv",
        csv(
            "index,energy,bracket_lo,bracket_hi,verified,tail_exp",
            &rows,
        ),
    );
    write(out, c)
}

#[derive(Serialize)]
struct WaveReport {
    class: &'static str,
    sign_left: Option<i8>,
    sign_right: Option<i8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_d: Option<f64>,
    tail_exp: i64,
}

/// The eigenvalue closest to `energy`, from the levels on either side.
fn nearest_eigenvalue(
    p: &SegmentedPotential,
    energy: f64,
    tol: f64,
    seed: Seed,
) -> Result<Option<f64>, Error> {
    let opts = SolverOptions::default();
    let below = count_below(p, energy)?;
    let mut best: Option<f64> = None;
    let levels = if below > 0 {
        vec![below - 1, below]
    } else {
        vec![below]
    };
    for level in levels {
        match find_level(p, level, tol, seed, &opts) {
            Ok(r) => {
                if best.is_none_or(|b| (r.energy - energy).abs() < (b - energy).abs()) {
                    best = Some(r.energy);
                }
            }
            Err(Error::Precondition(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

fn onset(sol: &WaveSolution, spec: SeedSpec, c: &Common, pps: usize) -> Result<Option<f64>, Error> {
    let p = sol.potential();
    if let Seed::Interior { segment } = spec.seed {
        let origin = p.boundaries()[segment];
        let (l, r) = detect_onsets(sol, c.tau, pps)?;
        return Ok(match (l, r) {
            (Some(l), Some(r)) => Some(if origin - l <= r - origin { l } else { r }),
            (l, r) => l.or(r),
        });
    }
    let Some(e_ref) = nearest_eigenvalue(p, sol.energy(), c.tol, spec.seed)? else {
        return Ok(None);
    };
    let reference = seeded_solution(p, e_ref, spec.seed)?;
    match detect_xd(sol, &reference, c.tau, pps) {
        Ok(x) => Ok(Some(x)),
        Err(Error::NotDivergent) => Ok(None),
        Err(e) => Err(e),
    }
}

fn cmd_wavefunction(a: &WavefunctionArgs) -> Run {
    let c = &a.common;
    check_tol(c)?;
    if a.points_per_segment == 0 {
        return Err(Failure::config("--points-per-segment must be at least 1"));
    }
    let p = build_potential(c, c.segments)?;
    let spec = parse_seed(&c.seed, p.len())?;
    let opts = SolverOptions {
        points_per_segment: a.points_per_segment,
        tail_threshold_exp: a.tail_threshold,
        ..SolverOptions::default()
    };
    let energy = match (a.energy, a.level) {
        (Some(e), _) => e,
        (None, Some(level)) => find_level(&p, level, c.tol, spec.seed, &opts)?.energy,
        (None, None) => return Err(Failure::config("wavefunction needs --energy or --level")),
    };
    if !energy.is_finite() {
        return Err(Failure::config(format!("energy {energy} is not finite")));
    }
    let sol = match (spec.seed, spec.b) {
        (Seed::Interior { segment }, Some(b)) => propagate(
            &p,
            PropagationConfig::interior(segment, Complex64::new(b, 0.0), energy),
        )?,
        (seed, _) => seeded_solution(&p, energy, seed)?,
    };
    let report = classify(&sol, a.tail_threshold)?;
    let x_d = if report.class == StateClass::Convergent {
        None
    } else {
        onset(&sol, spec, c, a.points_per_segment)?
    };

    let peak = reference_magnitude(&sol);
    if peak.is_zero() {
        return Err(
            Error::DegenerateInput("solution vanishes on the allowed region".into()).into(),
        );
    }
    let shown = sol.scaled_by(&Scaled::from_real(1.0).div(&peak));
    let samples = shown.sample_grid(a.points_per_segment);
    let limit = Scaled::from_real(10.0);
    let clamped = |v: &Scaled| -> f64 {
        let re = v.re();
        if re.abs_cmp(&limit).is_gt() {
            10.0 * f64::from(re.re_signum())
        } else {
            re.to_complex().re
        }
    };
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            vec![
                num(s.x),
                num(s.value.mantissa.re),
                num(s.value.mantissa.im),
                s.value.exponent.to_string(),
                num(clamped(&s.value)),
            ]
        })
        .collect();
    // sign of the displayed solution at its largest allowed-region sample
    let peak_sign = samples
        .iter()
        .filter(|s| p.values()[s.segment] <= energy)
        .max_by(|x, y| x.value.abs_cmp(&y.value))
        .map_or(1, |s| if s.value.re_signum() < 0 { -1 } else { 1 });

    let mut out = Outputs::default();
    out.add(
        "wave.csv",
        csv("x,re_mantissa,im_mantissa,exp2,re_value_clamped", &rows),
    );
    out.add(
        "report.json",
        json(&WaveReport {
            class: report.class.as_str(),
            sign_left: report.sign_left,
            sign_right: report.sign_right,
            x_d,
            tail_exp: report.tail_exponent,
        }),
    );
    out.add(
        "wave.gp",
        wave_script(
            &p,
            energy,
            c.potential == PotentialKind::Harmonic,
            peak_sign,
        ),
    );
    write(out, c)
}

fn wave_script(p: &SegmentedPotential, energy: f64, harmonic: bool, sign: i32) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!("set title 'E = {energy:.12}'\n"));
    s.push_str("set xlabel 'x'\nset ylabel 'Re psi (allowed-region peak = 1)'\n");
    s.push_str(&format!(
        "set xrange [{}:{}]\nset yrange [-10.5:10.5]\n",
        p.x_min(),
        p.x_max()
    ));
    if harmonic {
        s.push_str(&format!("psi0(x) = {sign}*exp(-0.5*x*x)\n"));
        s.push_str("plot 'wave.csv' skip 1 using 1:5 with lines title 'CETM', \\\n");
        s.push_str("     psi0(x) with lines dashtype 2 title 'analytic ground state'\n");
    } else {
        s.push_str("plot 'wave.csv' skip 1 using 1:5 with lines title 'CETM'\n");
    }
    s
}

/// `2..8` (inclusive) or `2,3,5`.
pub fn parse_decades(s: &str) -> Result<Vec<i32>, Failure> {
    let bad = || Failure::config(format!("invalid decades `{s}`"));
    let s = s.trim();
    let out: Vec<i32> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: i32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: i32 = hi.trim().parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else if s.is_empty() {
        Vec::new()
    } else {
        s.split(',')
            .map(|d| d.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(Failure::config("decade list is empty"));
    }
    Ok(out)
}

#[derive(Serialize)]
struct FitJson {
    a: f64,
    median_rel_residual: f64,
    n_records: usize,
}

fn cmd_uncertainty(a: &UncertaintyArgs) -> Run {
    let c = &a.common;
    check_tol(c)?;
    let decades = parse_decades(&a.decades)?;
    if a.points_per_segment == 0 {
        return Err(Failure::config("--points-per-segment must be at least 1"));
    }
    let p = build_potential(c, c.segments)?;
    let seed = parse_seed(&c.seed, p.len())?.seed;
    if matches!(seed, Seed::Interior { .. }) {
        return Err(Failure::config(
            "uncertainty datasets need --seed left or right",
        ));
    }
    let e_n = find_level(&p, a.level, c.tol, seed, &SolverOptions::default())
        .map_err(|e| Failure::new(EXIT_EMPTY, format!("cannot solve level {}: {e}", a.level)))?
        .energy;
    let detunings: Vec<f64> = decades.iter().map(|&d| 10f64.powi(-d)).collect();
    let opts = DatasetOptions {
        tau: c.tau,
        points_per_segment: a.points_per_segment,
        momentum_mode: match a.pc_mode {
            PcMode::Real => MomentumMode::RealPart,
            PcMode::Magnitude => MomentumMode::Magnitude,
        },
        k_offset: a.k_offset,
    };
    let sides: &[DetuningSide] = match a.side {
        SideArg::Above => &[DetuningSide::Above],
        SideArg::Below => &[DetuningSide::Below],
        SideArg::Both => &[DetuningSide::Above, DetuningSide::Below],
    };
    let mut records = Vec::new();
    for &side in sides {
        records.extend(collect_uncertainty_dataset(
            &p, e_n, &detunings, side, seed, &opts,
        )?);
    }
    let fit = fit_uncertainty(&records)?;
    let mut out = Outputs::default();
    out.add("dataset.csv", dataset_csv(&records));
    out.add(
        "fit.json",
        json(&FitJson {
            a: fit.a,
            median_rel_residual: fit.median_abs_residual(),
            n_records: fit.records,
        }),
    );
    out.add("uncertainty.gp", uncertainty_script(fit.a));
    write(out, c)
}

fn uncertainty_script(a: f64) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale xy\nset format xy '10^{%L}'\n");
    s.push_str("set xlabel '|a p_d + p_c| / (2 |x_d|)'\nset ylabel '|Delta E|'\n");
    s.push_str(&format!("a = {}\n", num(a)));
    s.push_str("plot 'dataset.csv' skip 1 using (abs(a*$7 + $8)/(2*$5)):3 with points pt 7 title 'records', \\\n");
    s.push_str("     x with lines dashtype 2 title 'model'\n");
    s
}

fn oracle_values(
    kind: OracleKind,
    c: &Common,
    p: &SegmentedPotential,
    lo: f64,
    hi: f64,
    steps: usize,
    a: &OracleArgs,
    tol: f64,
) -> Result<Vec<OracleResult>, Failure> {
    let analytic = |method: OracleMethod, values: Vec<f64>| {
        values
            .into_iter()
            .filter(|e| (lo..=hi).contains(e))
            .map(|e| OracleResult::analytic(e, method))
            .collect::<Vec<_>>()
    };
    let kind = match (kind, c.potential) {
        (OracleKind::Auto, PotentialKind::Harmonic | PotentialKind::Well) => OracleKind::Analytic,
        (OracleKind::Auto, _) => OracleKind::Numerov,
        (k, _) => k,
    };
    match (kind, c.potential) {
        (OracleKind::Numerov, _) => {
            if !(a.numerov_step > 0.0) {
                return Err(Failure::config("--numerov-step must be positive"));
            }
            Ok(numerov_spectrum(p, lo, hi, steps, a.numerov_step, tol)?)
        }
        (_, PotentialKind::Harmonic) => {
            let n_max = (hi - 0.5).floor().max(-1.0) as i64;
            let values = (0..=n_max).map(|n| n as f64 + 0.5).collect();
            Ok(analytic(OracleMethod::AnalyticHarmonic, values))
        }
        (_, PotentialKind::Well) => Ok(analytic(
            OracleMethod::AnalyticWell,
            analytic_finite_well(c.depth, c.width)?,
        )),
        _ => Err(Failure::config(
            "no closed-form reference for this potential; use --oracle numerov",
        )),
    }
}

fn cmd_oracle_check(a: &OracleArgs) -> Run {
    let c = &a.common;
    check_tol(c)?;
    let p = build_potential(c, c.segments)?;
    let seed = parse_seed(&c.seed, p.len())?.seed;
    let (lo, hi, steps) = energy_window(&p, a.emin, a.emax, a.steps)?;
    let solve_tol = c.tol.min(1e-12);
    let opts = SolverOptions::default();
    let cetm = spectrum(&p, lo, hi, steps, solve_tol, seed, &opts)?;
    if cetm.is_empty() {
        return Err(Failure::new(
            EXIT_EMPTY,
            format!("no eigenvalues in [{lo}, {hi}]"),
        ));
    }
    let oracle = oracle_values(a.oracle, c, &p, lo, hi, steps, a, solve_tol)?;
    let n = cetm.len().max(oracle.len());
    let mut rows = Vec::with_capacity(n);
    let mut failed = 0;
    for i in 0..n {
        let row = match (cetm.get(i), oracle.get(i)) {
            (Some(r), Some(o)) => {
                let cmp = compare(r.energy, o, c.tol);
                vec![
                    num(cmp.cetm),
                    num(cmp.oracle),
                    cmp.method.as_str().into(),
                    num(cmp.abs_diff),
                    num(cmp.rel_diff),
                    cmp.pass.to_string(),
                ]
            }
            (Some(r), None) => vec![
                num(r.energy),
                "NaN".into(),
                "none".into(),
                "NaN".into(),
                "NaN".into(),
                "false".into(),
            ],
            (None, Some(o)) => vec![
                "NaN".into(),
                num(o.eigenvalue),
                o.method.as_str().into(),
                "NaN".into(),
                "NaN".into(),
                "false".into(),
            ],
            (None, None) => unreachable!(),
        };
        if row[5] != "true" {
            failed += 1;
        }
        rows.push(std::iter::once(i.to_string()).chain(row).collect());
    }
    let mut out = Outputs::default();
    out.add(
        "oracle.csv",
        csv("index,cetm,oracle,method,abs_diff,rel_diff,pass", &rows),
    );
    write(out, c)?;
    if failed > 0 {
        return Err(Failure::new(
            EXIT_VERIFICATION,
            format!("{failed} of {n} eigenvalues disagree beyond {}", c.tol),
        ));
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    let v = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Failure::config(format!("invalid {what} `{x}`")))
        })
        .collect::<Result<Vec<T>, _>>()?;
    if v.is_empty() {
        return Err(Failure::config(format!("empty {what} list")));
    }
    Ok(v)
}

pub fn parse_refinements(s: &str) -> Result<Vec<Refinement>, Failure> {
    s.split(',')
        .map(|item| {
            let bad = || {
                Failure::config(format!(
                    "invalid refinement `{item}`: expected POINTS:STEPS"
                ))
            };
            let (pps, steps) = item.trim().split_once(':').ok_or_else(bad)?;
            let points_per_segment: usize = pps.parse().map_err(|_| bad())?;
            let steps_per_unit: f64 = steps.parse().map_err(|_| bad())?;
            if points_per_segment == 0 || !(steps_per_unit > 0.0) {
                return Err(bad());
            }
            Ok(Refinement {
                points_per_segment,
                steps_per_unit,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct StabilityJson {
    level: usize,
    spread: f64,
    spread_across_segmentations: f64,
    signs_consistent: bool,
    failures: usize,
    max_spread: f64,
    stable: bool,
}

fn cmd_stability(a: &StabilityArgs) -> Run {
    let c = &a.common;
    check_tol(c)?;
    if !(a.delta > 0.0) {
        return Err(Failure::config("--delta must be positive"));
    }
    let mut counts = vec![c.segments];
    if let Some(list) = &a.segment_counts {
        if c.potential == PotentialKind::File {
            return Err(Failure::config(
                "--segment-counts does not apply to sampled potentials",
            ));
        }
        counts.extend(
            parse_list::<usize>(list, "segment count")?
                .into_iter()
                .filter(|&n| n != c.segments),
        );
    }
    let potentials = counts
        .iter()
        .map(|&n| build_potential(c, n))
        .collect::<Result<Vec<_>, _>>()?;
    // interior seeds are placed by position on the first segmentation
    let first = &potentials[0];
    let seeds = a
        .seeds
        .split(',')
        .map(|s| {
            Ok(match parse_seed(s, first.len())?.seed {
                Seed::Left => StudySeed::Left,
                Seed::Right => StudySeed::Right,
                Seed::Interior { segment } => StudySeed::Interior {
                    x: first.midpoint(segment),
                },
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let cfg = StabilityConfig {
        level: a.level,
        seeds,
        refinements: parse_refinements(&a.refine)?,
        tol: c.tol,
        delta: a.delta,
        scaling: !a.no_scaling,
    };
    let report = stability_study(&potentials, &cfg)?;
    let sign =
        |s: Option<cetm::divergence::Sign>| s.map_or(String::new(), |s| s.value().to_string());
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                potentials[r.potential].len().to_string(),
                r.resolved.map_or_else(|| "unresolved".into(), seed_label),
                r.refinement.points_per_segment.to_string(),
                num(r.refinement.steps_per_unit),
                r.energy.map_or(String::new(), num),
                sign(r.sign_below),
                sign(r.sign_above),
                r.error.as_deref().unwrap_or("").replace(',', ";"),
            ]
        })
        .collect();
    let stable = report.stable(a.max_spread);
    let mut out = Outputs::default();
    out.add(
        "stability.csv",
        csv(
            "segments,seed,points_per_segment,steps_per_unit,energy,sign_below,sign_above,error",
            &rows,
        ),
    );
    out.add(
        "stability.json",
        json(&StabilityJson {
            level: a.level,
            spread: report.spread,
            spread_across_segmentations: report.spread_across_segmentations,
            signs_consistent: report.signs_consistent,
            failures: report.failures,
            max_spread: a.max_spread,
            stable,
        }),
    );
    write(out, c)?;
    if !stable {
        let why = report
            .rows
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_else(|| {
                format!(
                    "spread {:e}, signs consistent: {}",
                    report.spread, report.signs_consistent
                )
            });
        return Err(Failure::new(EXIT_VERIFICATION, format!("unstable: {why}")));
    }
    Ok(())
}
