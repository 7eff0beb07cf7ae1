use rayon::prelude::*;

use crate::dynamics::HamiltonianSpec;
use crate::linalg::catmull_rom;
use crate::{Error, Result};

/// Discretization of the semi-Lagrangian value iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaxOleinikGrid {
    pub q_nodes: usize,
    pub velocities: usize,
    pub steps_per_unit_time: usize,
    /// Total horizon of the iteration.
    pub horizon: f64,
    /// Momentum window `[−w, w]` for the Legendre transform and the convexity test.
    pub p_window: f64,
    pub legendre_nodes: usize,
}

impl Default for LaxOleinikGrid {
    fn default() -> Self {
        LaxOleinikGrid {
            q_nodes: 256,
            velocities: 64,
            steps_per_unit_time: 32,
            horizon: 48.0,
            p_window: 4.0,
            legendre_nodes: 1601,
        }
    }
}

/// Directional midpoint convexity test on a grid of `(t, q)` and momentum pairs.
pub fn check_convexity(h: &HamiltonianSpec, window: f64) -> Result<()> {
    let nt = if h.time_dependent { 8 } else { 1 };
    for it in 0..nt {
        let t = it as f64 / nt as f64;
        for iq in 0..32 {
            let q = iq as f64 / 32.0;
            let m = 96;
            let ps: Vec<f64> = (0..=m).map(|i| -window + 2.0 * window * i as f64 / m as f64).collect();
            let hv: Vec<f64> = ps.iter().map(|&p| h.value(t, &[q], &[p])).collect();
            let scale = hv.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            for i in 1..m {
                if hv[i] > 0.5 * (hv[i - 1] + hv[i + 1]) + 1e-10 * scale {
                    return Err(Error::NonConvexInput(format!("midpoint test fails at t={t}, q={q}, p={:.4}", ps[i])));
                }
            }
        }
    }
    Ok(())
}

fn parabolic_min(xm: f64, x0: f64, xp: f64) -> f64 {
    let den = xm - 2.0 * x0 + xp;
    if den > 0.0 {
        let s = 0.5 * (xm - xp) / den;
        x0 - 0.25 * (xm - xp) * s
    } else {
        x0
    }
}

/// Lagrangian `L(t, q, v) = max_p (p v − H)` tabulated on `q_nodes × velocities`.
fn legendre(h: &HamiltonianSpec, t: f64, g: &LaxOleinikGrid, vs: &[f64]) -> Vec<f64> {
    let n = g.legendre_nodes;
    let ps: Vec<f64> = (0..n).map(|i| -g.p_window + 2.0 * g.p_window * i as f64 / (n - 1) as f64).collect();
    (0..g.q_nodes)
        .into_par_iter()
        .flat_map_iter(|iq| {
            let q = (iq as f64 + 0.0) / g.q_nodes as f64;
            let hv: Vec<f64> = ps.iter().map(|&p| h.value(t, &[q], &[p])).collect();
            vs.iter()
                .map(|&v| {
                    let obj = |i: usize| ps[i] * v - hv[i];
                    let (mut best, mut bi) = (f64::NEG_INFINITY, 0);
                    for i in 0..n {
                        let o = obj(i);
                        if o > best {
                            best = o;
                            bi = i;
                        }
                    }
                    if bi > 0 && bi + 1 < n {
                        -parabolic_min(-obj(bi - 1), -best, -obj(bi + 1))
                    } else {
                        best
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn interp_periodic(u: &[f64], x: f64) -> f64 {
    let n = u.len();
    let s = x.rem_euclid(1.0) * n as f64;
    let i0 = s.floor();
    let (w, _) = catmull_rom(s - i0);
    let i0 = i0 as isize;
    (0..4).map(|o| w[o] * u[(i0 + o as isize - 1).rem_euclid(n as isize) as usize]).sum()
}

/// Additive eigenvalue `H̄(P)` of the cell problem `H(t, q, P + ∂_q u) + ∂_t u = H̄`, computed as
/// the mean decay rate of the discounted-free Lax-Oleinik iteration. Returns `(value, residual)`.
pub fn lax_oleinik_effham(h: &HamiltonianSpec, p: f64, g: &LaxOleinikGrid) -> Result<(f64, f64)> {
    if h.n != 1 {
        return Err(Error::InvalidSpec("the cell-problem solver handles n = 1".into()));
    }
    check_convexity(h, g.p_window)?;
    let m = g.steps_per_unit_time;
    let tau = 1.0 / m as f64;
    let nt = if h.time_dependent { m } else { 1 };
    // Velocity window from the range of ∂H/∂p on the momentum window.
    let mut vmax: f64 = 0.0;
    for iq in 0..16 {
        for &pp in &[-g.p_window, g.p_window] {
            let mut dq = [0.0];
            let mut dp = [0.0];
            h.eval(0.0, &[iq as f64 / 16.0], &[pp], &mut dq, &mut dp);
            vmax = vmax.max(dp[0].abs());
        }
    }
    let vmax = vmax.max(1e-3);
    let nv = g.velocities;
    let vs: Vec<f64> = (0..nv).map(|i| -vmax + 2.0 * vmax * i as f64 / (nv - 1) as f64).collect();
    // Lagrangians at the step midpoints (time-periodic sampling).
    let lags: Vec<Vec<f64>> = (0..nt).map(|it| legendre(h, (it as f64 + 0.5) * tau, g, &vs)).collect();
    let nq = g.q_nodes;
    let steps = (g.horizon * m as f64).round() as usize;
    let mut u = vec![0.0; nq];
    let mut next = vec![0.0; nq];
    let mut snapshots = Vec::new();
    for step in 0..steps {
        let lag = &lags[step % nt];
        next.par_iter_mut().enumerate().for_each(|(iq, out)| {
            let q = iq as f64 / nq as f64;
            let obj = |iv: usize| {
                let v = vs[iv];
                // Midpoint rule for the running cost along the straight segment.
                let lq = lag_at(lag, nq, nv, q - 0.5 * v * tau, iv);
                interp_periodic(&u, q - v * tau) + tau * (lq - p * v)
            };
            let vals: Vec<f64> = (0..nv).map(obj).collect();
            let (bi, &best) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            *out = if bi > 0 && bi + 1 < nv { parabolic_min(vals[bi - 1], best, vals[bi + 1]) } else { best };
        });
        std::mem::swap(&mut u, &mut next);
        if (step + 1) % m == 0 {
            snapshots.push(u.clone());
        }
    }
    let ns = snapshots.len();
    if ns < 4 {
        return Err(Error::InvalidSpec("horizon too short for the value iteration".into()));
    }
    let half = ns / 2;
    let span = (ns - 1 - half) as f64;
    let a = &snapshots[half];
    let b = &snapshots[ns - 1];
    let rate = b.iter().zip(a).map(|(x, y)| x - y).sum::<f64>() / (nq as f64 * span);
    let prev = &snapshots[ns - 2];
    let residual = b.iter().zip(prev).map(|(x, y)| (x - y - rate).abs()).fold(0.0, f64::max);
    Ok((-rate, residual))
}

fn lag_at(lag: &[f64], nq: usize, nv: usize, q: f64, iv: usize) -> f64 {
    let s = q.rem_euclid(1.0) * nq as f64;
    let i0 = s.floor();
    let w = s - i0;
    let i0 = i0 as usize % nq;
    let i1 = (i0 + 1) % nq;
    (1.0 - w) * lag[i0 * nv + iv] + w * lag[i1 * nv + iv]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_particle() {
        let h = HamiltonianSpec::integrable(vec![0.0, 0.0, 0.5]);
        let g = LaxOleinikGrid { horizon: 16.0, ..Default::default() };
        for &p in &[0.0, 0.7, -1.3] {
            let (v, _) = lax_oleinik_effham(&h, p, &g).unwrap();
            assert!((v - 0.5 * p * p).abs() < 1e-3, "{p}: {v}");
        }
    }

    #[test]
    fn pendulum_plateau() {
        let a = 0.05;
        let h = HamiltonianSpec::pendulum(a);
        let (v, _) = lax_oleinik_effham(&h, 0.0, &LaxOleinikGrid { horizon: 24.0, ..Default::default() }).unwrap();
        assert!((v - 2.0 * a).abs() < 1e-2, "{v}");
    }

    #[test]
    fn nonconvex_rejected() {
        let h = HamiltonianSpec::integrable(vec![0.0, 0.0, -0.5, 0.0, 0.25]);
        assert!(matches!(lax_oleinik_effham(&h, 0.0, &LaxOleinikGrid::default()), Err(Error::NonConvexInput(_))));
    }
}
