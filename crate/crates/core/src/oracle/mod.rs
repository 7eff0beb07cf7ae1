//! Independent reference values: the pendulum effective Hamiltonian from action integrals,
//! a Lax-Oleinik cell-problem solver for convex Hamiltonians, and an exhaustive min-max by
//! relative cubical homology over ℤ/2.

mod exhaustive;
mod lax_oleinik;

pub use exhaustive::{brute_force_minimax, BRUTE_FORCE_MAX_CELLS};
pub use lax_oleinik::{check_convexity, lax_oleinik_effham, LaxOleinikGrid};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffHamMethod {
    LaxOleinik,
    ActionIntegral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffHamTable {
    pub p_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub method: EffHamMethod,
    pub residual: f64,
}

impl EffHamTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,value\n");
        for (p, v) in self.p_grid.iter().zip(&self.values) {
            s.push_str(&format!("{p:.12e},{v:.12e}\n"));
        }
        s
    }

    /// Number of discrete midpoint convexity violations beyond `tol`.
    pub fn convexity_violations(&self, tol: f64) -> usize {
        self.values.windows(3).filter(|w| w[1] > 0.5 * (w[0] + w[2]) + tol).count()
    }
}

/// Effective Hamiltonian of `p²/2 + a(1 − cos 2πq)` at cohomology `P`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumEffHam {
    pub value: f64,
    pub plateau_value: f64,
    pub half_width: f64,
}

const ACTION_NODES: usize = 1 << 14;

/// `∫₀¹ √(2(E − V(q))) dq` by the midpoint rule on a symmetric grid.
fn rotation_action(a: f64, e: f64) -> f64 {
    let n = ACTION_NODES;
    let mut s = 0.0;
    for i in 0..n {
        let q = (i as f64 + 0.5) / n as f64;
        let v = a * (1.0 - (2.0 * std::f64::consts::PI * q).cos());
        s += (2.0 * (e - v)).max(0.0).sqrt();
    }
    s / n as f64
}

pub fn pendulum_effham(amplitude: f64, p: f64) -> PendulumEffHam {
    let a = amplitude.abs();
    let top = 2.0 * a;
    let half_width = 4.0 * a.sqrt() / std::f64::consts::PI;
    let pa = p.abs();
    if amplitude == 0.0 {
        return PendulumEffHam { value: 0.5 * p * p, plateau_value: 0.0, half_width: 0.0 };
    }
    if amplitude < 0.0 {
        // V = −a(1 − cos): max V is 0 at q = 0, and the plateau sits at level 0.
        let shifted = pendulum_effham(a, p);
        return PendulumEffHam { value: shifted.value - top, plateau_value: 0.0, half_width };
    }
    if pa <= half_width {
        return PendulumEffHam { value: top, plateau_value: top, half_width };
    }
    let (mut lo, mut hi) = (top, top + 0.5 * pa * pa + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rotation_action(a, mid) < pa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    PendulumEffHam { value: 0.5 * (lo + hi), plateau_value: top, half_width }
}

/// Table of [`pendulum_effham`] values.
pub fn pendulum_table(amplitude: f64, p_grid: &[f64]) -> EffHamTable {
    EffHamTable {
        p_grid: p_grid.to_vec(),
        values: p_grid.iter().map(|&p| pendulum_effham(amplitude, p).value).collect(),
        method: EffHamMethod::ActionIntegral,
        residual: 0.0,
    }
}
