//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use cetm::analysis::{
    check_uncertainty_inequality, collect_uncertainty_dataset, fit_uncertainty, DatasetOptions,
    DetuningSide, UncertaintyRecord,
};
use cetm::divergence::{divergence_sign, seeded_solution, Seed};
use cetm::eigen::{
    find_level, spectrum, stability_study, EigenResult, Refinement, SolverOptions, StabilityConfig,
    StudySeed,
};
use cetm::oracle::{analytic_finite_well, numerov_spectrum};
use cetm::transfer::propagate_seed;
use cetm::{propagate, PropagationConfig, SegmentedPotential};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use std::process::Command;
use std::time::{Duration, Instant};

const TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn harmonic() -> SegmentedPotential {
    SegmentedPotential::harmonic(-10.0, 10.0, 10000).unwrap()
}

fn edge(p: &SegmentedPotential) -> f64 {
    let e = p.values()[0].min(p.values()[p.len() - 1]);
    e - 1e-9 * e.abs().max(1.0)
}

fn finite_well() -> Outcome {
    let start = Instant::now();
    let p = SegmentedPotential::finite_well(10.0, 2.0, 4.0, 3).unwrap();
    let levels = spectrum(
        &p,
        0.0,
        edge(&p),
        1000,
        TOL,
        Seed::Right,
        &SolverOptions::default(),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let roots = analytic_finite_well(10.0, 2.0).unwrap();
    if levels.len() != roots.len() {
        return outcome(
            false,
            format!("{} eigenvalues, {} roots", levels.len(), roots.len()),
        );
    }
    let worst = levels
        .iter()
        .zip(&roots)
        .map(|(l, r)| (l.energy - r).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(1),
        format!(
            "{} levels, max |ΔE| = {worst:.2e}, {elapsed:.2?}",
            levels.len()
        ),
    )
}

fn harmonic_spectrum() -> (Outcome, Vec<EigenResult>) {
    let p = harmonic();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let found = pool.install(|| {
        spectrum(
            &p,
            0.0,
            6.0,
            600,
            TOL,
            Seed::Right,
            &SolverOptions::default(),
        )
    });
    let elapsed = start.elapsed();
    let found = match found {
        Ok(f) => f,
        Err(e) => return (outcome(false, e.to_string()), Vec::new()),
    };
    let worst = found
        .iter()
        .enumerate()
        .map(|(n, r)| (r.energy - (n as f64 + 0.5)).abs())
        .fold(0.0, f64::max);
    let verified = found.iter().all(|r| r.verified);
    let pass = found.len() == 6 && worst <= 1e-4 && verified && elapsed < Duration::from_secs(30);
    let detail = format!(
        "{} eigenvalues, max |E - (n+½)| = {worst:.2e}, verified {verified}, {elapsed:.2?} on one thread",
        found.len()
    );
    (outcome(pass, detail), found)
}

fn stability() -> Outcome {
    let cfg = StabilityConfig {
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
        tol: TOL,
        delta: 1e-4,
        scaling: true,
    };
    match stability_study(&[harmonic()], &cfg) {
        Ok(r) => outcome(
            r.stable(1e-10),
            format!(
                "{} configurations, relative spread {:.2e}, signs consistent {}, failures {}",
                r.rows.len(),
                r.spread,
                r.signs_consistent,
                r.failures
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn divergence_criterion(levels: &[EigenResult]) -> Outcome {
    if levels.is_empty() {
        return outcome(false, "no eigenvalues from criterion 2");
    }
    let p = harmonic();
    let g = |e: f64| divergence_sign(&p, e, Seed::Right).unwrap().value();
    let mut flips = 0;
    for r in levels {
        for eps in [10.0 * TOL, 1e3 * TOL] {
            if g(r.energy - eps) * g(r.energy + eps) == -1 {
                flips += 1;
            }
        }
    }
    let mut constant = 0;
    for w in levels.windows(2) {
        let (lo, hi) = (w[0].energy, w[1].energy);
        let signs: Vec<i8> = (1..=100)
            .map(|i| g(lo + (hi - lo) * i as f64 / 101.0))
            .collect();
        if signs.iter().all(|&s| s == signs[0] && s != 0) {
            constant += 1;
        }
    }
    let want_flips = 2 * levels.len();
    let want_gaps = levels.len() - 1;
    outcome(
        flips == want_flips && constant == want_gaps,
        format!(
            "{flips}/{want_flips} sign flips at ±ε, {constant}/{want_gaps} gaps of constant sign"
        ),
    )
}

fn dataset() -> Result<Vec<UncertaintyRecord>, String> {
    let p = harmonic();
    let e0 = find_level(&p, 0, TOL, Seed::Right, &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    let detunings: Vec<f64> = (2..=8).map(|d| 10f64.powi(-d)).collect();
    let opts = DatasetOptions::default();
    let mut out = Vec::new();
    for side in [DetuningSide::Above, DetuningSide::Below] {
        out.extend(
            collect_uncertainty_dataset(&p, e0.energy, &detunings, side, Seed::Right, &opts)
                .map_err(|e| e.to_string())?,
        );
    }
    Ok(out)
}

fn xd_law(records: &[UncertaintyRecord]) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for side in [DetuningSide::Above, DetuningSide::Below] {
        let mut r: Vec<&UncertaintyRecord> = records.iter().filter(|r| r.side == side).collect();
        r.sort_by(|a, b| b.delta_e.total_cmp(&a.delta_e));
        let increasing = r.windows(2).all(|w| w[1].x_d.abs() > w[0].x_d.abs());
        pass &= r.len() == 7 && increasing;
        let xs: Vec<String> = r.iter().map(|r| format!("{:.2}", r.x_d.abs())).collect();
        lines.push(format!("{}: |x_d| = {}", side.as_str(), xs.join(" < ")));
    }
    outcome(pass, lines.join("; "))
}

fn synthetic(a_star: f64) -> Vec<UncertaintyRecord> {
    (0..12)
        .map(|i| {
            let delta_x = 2.0 + 0.37 * i as f64;
            let p_d = 10f64.powf(-1.0 - 0.6 * i as f64);
            let p_c = if i % 3 == 0 { 0.0 } else { 0.05 * p_d };
            let delta_e = (a_star * p_d + p_c).abs() / (2.0 * delta_x);
            UncertaintyRecord {
                energy: 0.5 + delta_e,
                e_n: 0.5,
                delta_e,
                x_d: -delta_x,
                delta_x,
                k_d: delta_x,
                p_d_factor: p_d,
                p_c,
                side: DetuningSide::Above,
            }
        })
        .collect()
}

fn uncertainty_fit(records: &[UncertaintyRecord]) -> Outcome {
    let fit = match fit_uncertainty(records) {
        Ok(f) => f,
        Err(e) => return outcome(false, e.to_string()),
    };
    let median = fit.median_abs_residual();
    let satisfied = records
        .iter()
        .filter(|r| check_uncertainty_inequality(r, fit.a))
        .count();
    let planted = fit_uncertainty(&synthetic(0.7))
        .map(|f| f.a)
        .unwrap_or(f64::NAN);
    let recovered = (planted - 0.7).abs() <= 1e-6;
    let pass = records.len() == 14
        && fit.a.is_finite()
        && median <= 0.5
        && satisfied == records.len()
        && recovered;
    outcome(
        pass,
        format!(
            "{} records, a = {:.6}, median log residual {median:.4}, inequality holds for {satisfied}/{}, planted 0.7 → {planted:.9}",
            records.len(),
            fit.a,
            records.len()
        ),
    )
}

struct CorpusEntry {
    name: &'static str,
    potential: SegmentedPotential,
    window: (f64, f64),
    steps: usize,
    numerov_step: f64,
    /// Compare only the lowest states; `None` compares all and requires equal counts.
    take: Option<usize>,
}

fn corpus() -> Vec<CorpusEntry> {
    let well = SegmentedPotential::finite_well(10.0, 2.0, 4.0, 3).unwrap();
    let well_edge = edge(&well);
    let mut corpus = vec![
        CorpusEntry {
            name: "harmonic",
            potential: harmonic(),
            window: (0.0, 6.0),
            steps: 600,
            numerov_step: 1e-3,
            take: None,
        },
        CorpusEntry {
            name: "finite well",
            potential: well,
            window: (0.0, well_edge),
            steps: 1000,
            numerov_step: 2.5e-4,
            take: None,
        },
    ];
    for (name, s) in [("hydrogen s=1", 1.0), ("hydrogen s=0.5", 0.5)] {
        let p = SegmentedPotential::hydrogen_1d(s, -30.0, 30.0, 12000).unwrap();
        corpus.push(CorpusEntry {
            name,
            window: (p.min_value(), -0.1),
            potential: p,
            steps: 400,
            numerov_step: 2.5e-4,
            take: None,
        });
    }
    let p = SegmentedPotential::hydrogen_1d(0.1, -20.0, 20.0, 8000).unwrap();
    corpus.push(CorpusEntry {
        name: "hydrogen s=0.1",
        window: (p.min_value(), -0.1),
        potential: p,
        steps: 2000,
        numerov_step: 2.5e-4,
        take: Some(3),
    });
    corpus
}

fn oracle_equivalence() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in corpus() {
        let (lo, hi) = c.window;
        let cetm = spectrum(
            &c.potential,
            lo,
            hi,
            c.steps,
            TOL,
            Seed::Right,
            &SolverOptions::default(),
        );
        let numerov = numerov_spectrum(&c.potential, lo, hi, c.steps, c.numerov_step, TOL);
        match (cetm, numerov) {
            (Ok(a), Ok(b)) => {
                let n = a.len().min(b.len()).min(c.take.unwrap_or(usize::MAX));
                let counts_ok = c.take.is_some() || a.len() == b.len();
                let worst = a
                    .iter()
                    .zip(&b)
                    .take(n)
                    .map(|(x, y)| (x.energy - y.eigenvalue).abs())
                    .fold(0.0, f64::max);
                pass &= n > 0 && counts_ok && worst <= 1e-6;
                parts.push(format!("{} {n} states max {worst:.1e}", c.name));
            }
            (a, b) => {
                pass = false;
                parts.push(format!("{}: {:?} / {:?}", c.name, a.err(), b.err()));
            }
        }
    }
    outcome(pass, parts.join(", "))
}

fn random_potential(values: Vec<f64>, widths: Vec<f64>) -> SegmentedPotential {
    let mut b = vec![-0.5 * widths.iter().sum::<f64>()];
    for w in &widths {
        b.push(b.last().unwrap() + w);
    }
    SegmentedPotential::new(b, values, "random").unwrap()
}

fn segments(max: usize) -> impl Strategy<Value = SegmentedPotential> {
    (2..max).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0f64..3.0, n),
            prop::collection::vec(0.05f64..0.6, n),
        )
            .prop_map(|(v, w)| random_potential(v, w))
    })
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases: 128,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn invariants() -> Outcome {
    let mut failed = Vec::new();
    let mut check = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failed.push(format!("{name}: {e}"));
        }
    };
    check(
        "continuity",
        runner()
            .run(&(segments(40), -1.0f64..4.0, -2.0f64..2.0), |(p, e, b)| {
                let sol = propagate(
                    &p,
                    PropagationConfig::interior(p.len() / 2, Complex64::new(b, 0.3), e),
                )
                .unwrap();
                prop_assert!(sol.continuity_residual() <= 1e-12);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "flux",
        runner()
            .run(&(segments(30), 3.0f64..6.0, -2.0f64..2.0), |(p, e, b)| {
                let sol = propagate(
                    &p,
                    PropagationConfig::interior(0, Complex64::new(b, 0.7), e),
                )
                .unwrap();
                let f: Vec<Complex64> = sol
                    .waves()
                    .iter()
                    .filter_map(|w| w.flux())
                    .map(|f| f.to_complex())
                    .collect();
                prop_assert_eq!(f.len(), p.len());
                prop_assert!(f.iter().all(|x| rel(*x, f[0]) <= 1e-10));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "gauge linearity",
        runner()
            .run(&(segments(40), -1.0f64..4.0, -3.0f64..3.0), |(p, e, b)| {
                let seg = p.len() / 3;
                let (one, zero, bb) = (
                    Complex64::new(1.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(b, -0.4),
                );
                let full = propagate_seed(&p, e, seg, one, bb).unwrap();
                let base = propagate_seed(&p, e, seg, one, zero).unwrap();
                let unit = propagate_seed(&p, e, seg, zero, one).unwrap();
                for i in 0..p.len() {
                    let (f, u0, u1) = (&full.waves()[i], &base.waves()[i], &unit.waves()[i]);
                    let sa = (u0.a_scaled() + u1.a_scaled().scale(bb)).to_complex();
                    let sb = (u0.b_scaled() + u1.b_scaled().scale(bb)).to_complex();
                    // against the size of the terms: a coefficient can cancel to well
                    // below its neighbours
                    let scale: f64 = [
                        u0.a_scaled(),
                        u1.a_scaled().scale(bb),
                        u0.b_scaled(),
                        u1.b_scaled().scale(bb),
                    ]
                    .iter()
                    .map(|t| t.to_complex().norm())
                    .sum();
                    prop_assert!((f.a_scaled().to_complex() - sa).norm() <= 1e-12 * scale);
                    prop_assert!((f.b_scaled().to_complex() - sb).norm() <= 1e-12 * scale);
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "scaling transparency",
        runner()
            .run(&(segments(51), -1.0f64..4.0, -2.0f64..2.0), |(p, e, b)| {
                let cfg = PropagationConfig::interior(p.len() / 2, Complex64::new(b, 0.1), e);
                let scaled = propagate(&p, cfg).unwrap();
                let raw = propagate(
                    &p,
                    PropagationConfig {
                        scaling: false,
                        ..cfg
                    },
                )
                .unwrap();
                for (s, r) in scaled.waves().iter().zip(raw.waves()) {
                    prop_assert!(rel(s.a_scaled().to_complex(), r.a) <= 1e-12);
                    prop_assert!(rel(s.b_scaled().to_complex(), r.b) <= 1e-12);
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    let p = harmonic();
    let e0 = find_level(&p, 0, TOL, Seed::Right, &SolverOptions::default())
        .unwrap()
        .energy;
    let residual = seeded_solution(&p, e0, Seed::Right)
        .unwrap()
        .hamiltonian_residual(e0, 1e-5);
    if residual > 1e-6 {
        failed.push(format!("hamiltonian residual {residual:.2e}"));
    }
    if failed.is_empty() {
        outcome(
            true,
            format!("4 properties × 128 cases, hamiltonian residual at E0 {residual:.1e}"),
        )
    } else {
        outcome(false, failed.join("; "))
    }
}

fn run_cli(args: &[&str], out: &std::path::Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_cetm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} exited with {status}"))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs: [(&str, &[&str], &[&str]); 2] = [
        (
            "spectrum",
            &[
                "spectrum",
                "--potential",
                "harmonic",
                "--xmin",
                "-10",
                "--xmax",
                "10",
                "--segments",
                "10000",
                "--emin",
                "0",
                "--emax",
                "6",
                "--tol",
                "1e-12",
            ],
            &["spectrum.csv"],
        ),
        (
            "uncertainty",
            &[
                "uncertainty",
                "--level",
                "0",
                "--decades",
                "2..8",
                "--side",
                "both",
            ],
            &["dataset.csv", "fit.json", "uncertainty.gp"],
        ),
    ];
    let mut compared = 0;
    for (name, args, files) in runs {
        let (a, b) = (
            dir.path().join(format!("{name}-1")),
            dir.path().join(format!("{name}-2")),
        );
        if let Err(e) = run_cli(args, &a).and_then(|_| run_cli(args, &b)) {
            return outcome(false, e);
        }
        for f in files {
            match (std::fs::read(a.join(f)), std::fs::read(b.join(f))) {
                (Ok(x), Ok(y)) if x == y => compared += 1,
                _ => return outcome(false, format!("{name}: {f} differs between runs")),
            }
        }
    }
    outcome(
        true,
        format!("{compared} output files byte-identical across two runs"),
    )
}

fn main() {
    let mut results = Vec::new();
    let mut timed = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        results.push(o.pass);
        println!(
            "{} {}. {name}: {} [{:.1?}]",
            if o.pass { "PASS" } else { "FAIL" },
            results.len(),
            o.detail,
            start.elapsed()
        );
    };
    let mut levels = Vec::new();
    let records = dataset();
    timed("finite well vs transcendental roots", &mut finite_well);
    timed("harmonic spectrum on (0, 6)", &mut || {
        let (o, found) = harmonic_spectrum();
        levels = found;
        o
    });
    timed("stability across seeds and refinements", &mut stability);
    timed("divergence criterion", &mut || {
        divergence_criterion(&levels)
    });
    timed("x_d law", &mut || match &records {
        Ok(r) => xd_law(r),
        Err(e) => outcome(false, e.clone()),
    });
    timed("uncertainty fit", &mut || match &records {
        Ok(r) => uncertainty_fit(r),
        Err(e) => outcome(false, e.clone()),
    });
    timed("oracle equivalence", &mut oracle_equivalence);
    timed("core invariants", &mut invariants);
    timed("CLI determinism", &mut determinism);
    let failures = results.iter().filter(|p| !**p).count();
    if failures > 0 {
        println!("{failures} of {} acceptance criteria failed", results.len());
        std::process::exit(1);
    }
}
