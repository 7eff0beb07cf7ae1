//! Cross-checks between independent reference computations and the main pipeline.

use symhom::dynamics::{FlowConfig, HamiltonianSpec, PhasePoint};
use symhom::genfunc::{build_landscape, LandscapeOptions};
use symhom::measures::returning_rotations;
use symhom::oracle::{check_convexity, lax_oleinik_effham, pendulum_effham, pendulum_table, LaxOleinikGrid};
use symhom::selector::{capacities, homogenize, selector_table, HomogenizeOptions};
use symhom::Error;

/// Closed-form rotational-torus energy by a trapezoid rule that differs from the library's.
fn rotational_energy(a: f64, p: f64) -> f64 {
    let action = |e: f64| {
        let n = 2000;
        (0..n)
            .map(|i| {
                let q = i as f64 / n as f64;
                (2.0 * (e - a * (1.0 - (2.0 * std::f64::consts::PI * q).cos()))).max(0.0).sqrt()
            })
            .sum::<f64>()
            / n as f64
    };
    let (mut lo, mut hi) = (2.0 * a, 2.0 * a + p * p + 1.0);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if action(m) < p.abs() {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn pendulum_action_integral_matches_direct_quadrature() {
    let a = 0.05;
    let pc = pendulum_effham(a, 0.0).half_width;
    for p in [1.5 * pc, 0.6, 1.0, -1.3] {
        let v = pendulum_effham(a, p).value;
        assert!((v - rotational_energy(a, p)).abs() < 1e-6, "p={p}: {v}");
    }
    let t = pendulum_table(a, &[-0.1, 0.0, 0.1]);
    assert!(t.values.iter().all(|v| *v == 2.0 * a));
    assert_eq!(t.convexity_violations(1e-12), 0);
}

#[test]
fn lax_oleinik_agrees_with_action_integral() {
    let a = 0.05;
    let h = HamiltonianSpec::pendulum(a);
    let g = LaxOleinikGrid::default();
    let pc = pendulum_effham(a, 0.0).half_width;
    for p in [0.0, 2.0 * pc, 1.0] {
        let (v, _) = lax_oleinik_effham(&h, p, &g).unwrap();
        let exact = pendulum_effham(a, p).value;
        assert!((v - exact).abs() < 1e-2, "p={p}: lax-oleinik {v} vs {exact}");
    }
}

#[test]
fn convexity_gate_rejects_nonconvex_input() {
    let h = HamiltonianSpec::integrable(vec![0.0, 0.0, 0.5, 0.0, -0.2]);
    assert!(matches!(check_convexity(&h, 2.0), Err(Error::NonConvexInput(_))));
    assert!(check_convexity(&HamiltonianSpec::pendulum(0.1), 2.0).is_ok());
}

#[test]
fn integrable_selector_is_the_hamiltonian() {
    let coeffs = vec![0.0, -0.2, 0.5, 0.1];
    let h = HamiltonianSpec::integrable(coeffs.clone());
    let ps: Vec<f64> = (0..17).map(|i| -0.8 + 0.1 * i as f64).collect();
    let (tables, report) = homogenize(&h, &[1, 3], &ps, &HomogenizeOptions::default()).unwrap();
    for t in &tables {
        for (p, v) in ps.iter().zip(&t.values) {
            let exact = coeffs.iter().rev().fold(0.0, |acc, c| acc * p + c);
            assert!((v - exact).abs() < 1e-9, "k={} p={p}", t.k);
        }
    }
    assert!(report.cauchy.iter().all(|c| c.2 < 1e-9));
}

#[test]
fn pendulum_selector_tracks_the_effective_hamiltonian() {
    let a = 0.01;
    let h = HamiltonianSpec::pendulum(a);
    let ps = [-0.6, -0.2, 0.0, 0.3, 0.7];
    let t = selector_table(&h, 2, &ps, &HomogenizeOptions::default()).unwrap();
    for (p, v) in ps.iter().zip(&t.values) {
        assert!((v - pendulum_effham(a, *p).value).abs() < 0.02, "p={p}: {v}");
    }
}

#[test]
fn integrable_rotations_are_the_frequency() {
    let h = HamiltonianSpec::integrable(vec![0.0, 0.1, 0.5]);
    let cfg = FlowConfig::for_spec(&h);
    // Every orbit returns: the whole circle is critical; all rotations equal the frequency.
    let rots = returning_rotations(&h, 0.3, 4, &cfg).unwrap();
    assert!(!rots.is_empty());
    assert!(rots.iter().all(|r| (r - 0.4).abs() < 1e-9));
}

#[test]
fn landscape_of_zero_hamiltonian_is_flat_quadratic_form() {
    let h = HamiltonianSpec::zero().truncate(1.0);
    let opts = LandscapeOptions { nodes_x: 8, ..Default::default() };
    let l = build_landscape(&h, 2, 0.2, &opts).unwrap();
    assert!(l.values.iter().all(|v| v.is_finite()));
    assert_eq!(capacities(&h, 1, &LandscapeOptions { nodes_x: 8, nodes_graph_y: 8, ..Default::default() }).unwrap(), (0.0, 0.0));
    let _ = PhasePoint::new1(0.0, 0.0);
}
