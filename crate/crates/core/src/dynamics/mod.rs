//! Hamiltonian dynamics on `T*Tⁿ`: families, time-one maps on the universal cover,
//! lifted orbits with action, translated orbits, and phase-space quadrature.

mod flow;
mod hamiltonian;

pub use flow::{
    find_translated_orbit, find_translated_orbit_at_momentum, flow_segment, iterate_lift, rotation_vector,
    time_one_map, FlowConfig, FlowEnd, Integrator, LiftedOrbit, PhasePoint,
};
pub use hamiltonian::{
    Bump, Cutoff, Family, FourierTerm, HamiltonianSpec, PProfile, QProfile, SampledGrid, Shear, Support,
};

use crate::{Error, Result};

/// Node counts for the tensor quadrature over `[0,1) × Tⁿ × [−R, R]ⁿ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub nt: usize,
    pub nq: usize,
    pub np: usize,
}

impl Quadrature {
    pub fn default_for(h: &HamiltonianSpec) -> Self {
        let nt = if h.time_dependent { 16 } else { 1 };
        if h.n == 1 {
            Quadrature { nt, nq: 256, np: 2048 }
        } else {
            Quadrature { nt, nq: 32, np: 160 }
        }
    }
}

/// Integrates `f(H, ∂_q H, ∂_p H, q, p)` against `dt ∧ ωⁿ` over the support box. Trapezoid
/// rules throughout: spectrally accurate in the periodic variables and high order in `p`
/// because the integrands vanish smoothly at the box ends.
pub fn integrate_phase_space<const K: usize>(
    h: &HamiltonianSpec,
    quad: Quadrature,
    f: impl Fn(f64, &[f64], &[f64], &[f64], &[f64]) -> [f64; K],
) -> Result<[f64; K]> {
    let r = h.support_radius().ok_or(Error::UnsupportedCoercive)?;
    let n = h.n;
    let hq = 1.0 / quad.nq as f64;
    let hp = 2.0 * r / quad.np as f64;
    let ht = 1.0 / quad.nt as f64;
    let mut acc = [0.0; K];
    let cells = quad.nq.pow(n as u32) * (quad.np + 1).pow(n as u32);
    let mut q = [0.0; 2];
    let mut p = [0.0; 2];
    let mut dq = [0.0; 2];
    let mut dp = [0.0; 2];
    for it in 0..quad.nt {
        let t = it as f64 * ht;
        for idx in 0..cells {
            let mut rem = idx;
            let mut w = 1.0;
            for i in 0..n {
                let iq = rem % quad.nq;
                rem /= quad.nq;
                q[i] = iq as f64 * hq;
            }
            for i in 0..n {
                let ip = rem % (quad.np + 1);
                rem /= quad.np + 1;
                p[i] = -r + ip as f64 * hp;
                if ip == 0 || ip == quad.np {
                    w *= 0.5;
                }
            }
            let hv = h.eval(t, &q[..n], &p[..n], &mut dq[..n], &mut dp[..n]);
            let v = f(hv, &dq[..n], &dp[..n], &q[..n], &p[..n]);
            for k in 0..K {
                acc[k] += w * v[k];
            }
        }
    }
    let vol = ht * (hq * hp).powi(n as i32);
    Ok(acc.map(|a| a * vol))
}

/// `Cal(φ_H) = ∫₀¹ ∫ H ωⁿ dt`.
pub fn calabi(h: &HamiltonianSpec) -> Result<f64> {
    calabi_with(h, Quadrature::default_for(h))
}

pub fn calabi_with(h: &HamiltonianSpec, quad: Quadrature) -> Result<f64> {
    if h.is_coercive() {
        return Err(Error::UnsupportedCoercive);
    }
    Ok(integrate_phase_space(h, quad, |hv, _, _, _, _| [hv])?[0])
}

/// Compactly supported spec agreeing with `h` on `|p| ≤ radius`, cut off over `[radius, radius + 1]`.
pub fn truncate_coercive(h: &HamiltonianSpec, radius: f64) -> HamiltonianSpec {
    h.truncate(radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> HamiltonianSpec {
        HamiltonianSpec::integrable(vec![0.0, 0.0, 0.5])
    }

    #[test]
    fn zero_flow_is_identity() {
        let z = PhasePoint::new1(0.3, 0.7);
        let h = HamiltonianSpec::zero();
        assert_eq!(time_one_map(&h, z, &FlowConfig::for_spec(&h)).unwrap(), z);
        let orb = iterate_lift(&h, z, 5, &FlowConfig::default()).unwrap();
        assert_eq!(orb.end(), z);
        assert_eq!(orb.average_action(), 0.0);
    }

    #[test]
    fn integrable_flow_and_action() {
        let h = quad();
        for cfg in [FlowConfig::for_spec(&h), FlowConfig::default()] {
            let e = time_one_map(&h, PhasePoint::new1(0.0, 0.5), &cfg).unwrap();
            assert!((e.q[0] - 0.5).abs() < 1e-14 && e.p[0] == 0.5);
            let orb = iterate_lift(&h, PhasePoint::new1(0.0, 1.0), 2, &cfg).unwrap();
            assert!((orb.end().q[0] - 2.0).abs() < 1e-13);
            assert!((orb.average_action() - 0.5).abs() < 1e-13);
            let orb = iterate_lift(&h, PhasePoint::new1(0.0, 0.5), 4, &cfg).unwrap();
            assert!((rotation_vector(&orb)[0] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn pendulum_equilibrium_fixed() {
        let h = HamiltonianSpec::pendulum(0.1);
        let z = PhasePoint::new1(0.0, 0.0);
        assert_eq!(time_one_map(&h, z, &FlowConfig::for_spec(&h)).unwrap(), z);
        assert_eq!(time_one_map(&h.truncate(2.0), z, &FlowConfig::default()).unwrap(), z);
    }

    #[test]
    fn libration_has_zero_rotation() {
        let h = HamiltonianSpec::pendulum(0.1);
        let orb = iterate_lift(&h, PhasePoint::new1(0.1, 0.1), 64, &FlowConfig::for_spec(&h)).unwrap();
        assert!(rotation_vector(&orb)[0].abs() < 0.02);
    }

    #[test]
    fn bump_outside_support_is_constant() {
        let h = HamiltonianSpec::bumps(vec![Bump { q: 0.5, p: 0.0, radius: 0.2, height: 1.0, time_amplitude: 0.5 }]);
        let z = PhasePoint::new1(0.1, 0.05);
        let orb = iterate_lift(&h, z, 3, &FlowConfig::default()).unwrap();
        assert_eq!(orb.end(), z);
        assert_eq!(orb.action, 0.0);
    }

    #[test]
    fn translated_orbits() {
        let h = quad();
        let cfg = FlowConfig::for_spec(&h);
        let (z, r) = find_translated_orbit(&h, 4, &[0.5], PhasePoint::new1(0.2, 0.5), &cfg).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(z.p[0], 0.5);
        let zero = HamiltonianSpec::zero();
        let seed = PhasePoint::new1(0.2, 0.4);
        assert_eq!(find_translated_orbit(&zero, 3, &[0.0], seed, &cfg).unwrap(), (seed, 0.0));
        assert!(matches!(
            find_translated_orbit(&zero, 3, &[0.3], seed, &cfg),
            Err(Error::NoOrbitFound { .. })
        ));
        let pend = HamiltonianSpec::pendulum(0.01);
        let cfg = FlowConfig::for_spec(&pend);
        let (z, r) = find_translated_orbit(&pend, 8, &[0.5], PhasePoint::new1(0.0, 0.5), &cfg).unwrap();
        assert!(r <= cfg.newton_tol);
        let e = flow_segment(&pend, z, 0.0, 8.0, &cfg, None).unwrap().end;
        assert!((e.q[0] - z.q[0] - 4.0).abs() <= cfg.newton_tol);
    }

    #[test]
    fn calabi_values() {
        assert_eq!(calabi(&HamiltonianSpec::zero().truncate(1.0)).unwrap(), 0.0);
        assert!(matches!(calabi(&quad()), Err(Error::UnsupportedCoercive)));
        // (1 − r²/ρ²)³ integrates to πρ²/4 over the disk.
        let rho: f64 = 0.3;
        let height = 4.0 / (std::f64::consts::PI * rho * rho);
        let h = HamiltonianSpec::bumps(vec![Bump { q: 0.5, p: 0.0, radius: rho, height, time_amplitude: 0.0 }]);
        let c = calabi(&h).unwrap();
        assert!((c - 1.0).abs() < 1e-6, "{c}");
        assert!((calabi(&h.clone().negated()).unwrap() + c).abs() < 1e-15);
    }

    #[test]
    fn truncation_agrees_inside() {
        let h = quad();
        let t = truncate_coercive(&h, 2.0);
        t.validate().unwrap();
        for p in [-1.9, 0.0, 0.7, 2.0] {
            assert_eq!(t.value(0.0, &[0.1], &[p]), h.value(0.0, &[0.1], &[p]));
        }
        assert_eq!(t.value(0.0, &[0.1], &[3.0]), 0.0);
        let pend = HamiltonianSpec::pendulum(0.05);
        let tp = truncate_coercive(&pend, 2.0);
        let z = PhasePoint::new1(0.3, 0.5);
        let a = iterate_lift(&pend, z, 4, &FlowConfig::default()).unwrap();
        let b = iterate_lift(&tp, z, 4, &FlowConfig::default()).unwrap();
        assert_eq!(a.end(), b.end());
        let twice = truncate_coercive(&tp, 1.0);
        let once = truncate_coercive(&pend, 1.0);
        for p in [-1.0, -0.3, 0.2, 0.99] {
            assert_eq!(twice.value(0.0, &[0.4], &[p]), once.value(0.0, &[0.4], &[p]));
        }
    }
}
