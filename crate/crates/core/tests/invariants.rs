use cetm::analysis::normalize_energy;
use cetm::divergence::{divergence_sign, seeded_solution, Seed};
use cetm::eigen::{find_level, verify_cs, SolverOptions};
use cetm::transfer::{propagate_seed, wavenumber};
use cetm::{propagate, PropagationConfig, SegmentedPotential, Side};
use num_complex::Complex64;
use proptest::prelude::*;

fn potential(values: Vec<f64>, widths: Vec<f64>) -> SegmentedPotential {
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
            .prop_map(|(v, w)| potential(v, w))
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn continuity_at_every_boundary(p in segments(40), e in -1.0f64..4.0, b in -2.0f64..2.0) {
        let seg = p.len() / 2;
        let sol = propagate(&p, PropagationConfig::interior(seg, Complex64::new(b, 0.3), e)).unwrap();
        prop_assert!(sol.continuity_residual() <= 1e-12, "{}", sol.continuity_residual());
    }

    #[test]
    fn flux_is_conserved(p in segments(30), e in 3.0f64..6.0, b in -2.0f64..2.0) {
        // every segment allowed: E above all values
        let sol = propagate(&p, PropagationConfig::interior(0, Complex64::new(b, 0.7), e)).unwrap();
        let fluxes: Vec<_> = sol.waves().iter().filter_map(|w| w.flux()).collect();
        prop_assert_eq!(fluxes.len(), p.len());
        let f0 = fluxes[0].to_complex();
        for f in &fluxes {
            prop_assert!(rel(f.to_complex(), f0) <= 1e-10, "{} vs {}", f.to_complex(), f0);
        }
    }

    #[test]
    fn propagation_is_linear_in_the_seed(p in segments(40), e in -1.0f64..4.0, b in -3.0f64..3.0) {
        let seg = p.len() / 3;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let bb = Complex64::new(b, -0.4);
        let full = propagate_seed(&p, e, seg, one, bb).unwrap();
        let base = propagate_seed(&p, e, seg, one, zero).unwrap();
        let unit = propagate_seed(&p, e, seg, zero, one).unwrap();
        for i in 0..p.len() {
            let (f, u0, u1) = (&full.waves()[i], &base.waves()[i], &unit.waves()[i]);
            let sa = (u0.a_scaled() + u1.a_scaled().scale(bb)).to_complex();
            let sb = (u0.b_scaled() + u1.b_scaled().scale(bb)).to_complex();
            // against the size of the terms: a coefficient can cancel to well
            // below its neighbours
            let scale: f64 = [u0.a_scaled(), u1.a_scaled().scale(bb), u0.b_scaled(), u1.b_scaled().scale(bb)]
                .iter()
                .map(|t| t.to_complex().norm())
                .sum();
            prop_assert!((f.a_scaled().to_complex() - sa).norm() <= 1e-12 * scale);
            prop_assert!((f.b_scaled().to_complex() - sb).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn scaling_is_transparent(p in segments(50), e in -1.0f64..4.0, b in -2.0f64..2.0) {
        let cfg = PropagationConfig::interior(p.len() / 2, Complex64::new(b, 0.1), e);
        let scaled = propagate(&p, cfg).unwrap();
        let raw = propagate(&p, PropagationConfig { scaling: false, ..cfg }).unwrap();
        for (s, r) in scaled.waves().iter().zip(raw.waves()) {
            prop_assert_eq!(r.scale_exp, 0);
            prop_assert!(rel(s.a_scaled().to_complex(), r.a) <= 1e-12);
            prop_assert!(rel(s.b_scaled().to_complex(), r.b) <= 1e-12);
        }
    }

    #[test]
    fn wavenumber_branch(e in -10.0f64..10.0, v in -10.0f64..10.0) {
        prop_assert!(wavenumber(e, v).k.im >= 0.0);
    }

    #[test]
    fn sign_ignores_scaling_and_sampling(p in segments(30), e in -1.5f64..-0.1) {
        // raise both edges so they are forbidden
        let mut v = p.values().to_vec();
        let n = v.len();
        v[0] = 1.0;
        v[n - 1] = 1.0;
        let p = SegmentedPotential::new(p.boundaries().to_vec(), v, "walled").unwrap();
        let scaled = propagate(&p, PropagationConfig::boundary(Side::Right, e)).unwrap();
        let raw = propagate(&p, PropagationConfig { scaling: false, ..PropagationConfig::boundary(Side::Right, e) }).unwrap();
        let s1 = scaled.waves()[0].a.re.signum();
        let s2 = raw.waves()[0].a.re.signum();
        prop_assert_eq!(s1, s2);
        let g = divergence_sign(&p, e, Seed::Right).unwrap();
        prop_assert_eq!(g, divergence_sign(&p, e, Seed::Right).unwrap());
    }
}

#[test]
fn harmonic_eigenstate_hamiltonian_residual() {
    let p = SegmentedPotential::harmonic(-10.0, 10.0, 10000).unwrap();
    let e0 = find_level(&p, 0, 1e-12, Seed::Right, &SolverOptions::default())
        .unwrap()
        .energy;
    let sol = seeded_solution(&p, e0, Seed::Right).unwrap();
    // truncation error k⁴s²/24 reaches 8e-6 at the edge for s = 1e-4
    assert!(sol.hamiltonian_residual(e0, 1e-5) <= 1e-6);
}

#[test]
fn verification_survives_a_smaller_window() {
    let p = SegmentedPotential::harmonic(-10.0, 10.0, 10000).unwrap();
    let o = SolverOptions::default();
    for level in 0..4 {
        let r = find_level(&p, level, 1e-12, Seed::Right, &o).unwrap();
        assert!(r.verified);
        assert!(verify_cs(&p, r.energy, 1e-10, Seed::Right).unwrap());
    }
}

#[test]
fn normalization_is_idempotent() {
    let p = SegmentedPotential::harmonic(-8.0, 8.0, 4000).unwrap();
    let sol = seeded_solution(&p, 0.7, Seed::Right).unwrap();
    let once = normalize_energy(&sol, 0.5, (-2.0, 3.0)).unwrap();
    let twice = normalize_energy(&once.wave, 0.5, (-2.0, 3.0)).unwrap();
    assert!((twice.factor.to_complex().re - 1.0).abs() <= 1e-12);
}
