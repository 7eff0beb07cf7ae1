//! Periodic-orbit census: points with `Φᵏ(z) = z + (m, 0)` for `k ≤ N`, found by
//! Levenberg-Marquardt from a seed grid, reduced to minimal period and deduplicated.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use symhom::dynamics::{flow_segment, Family, FlowConfig, HamiltonianSpec, PhasePoint};
use symhom::linalg::{lm_step, norm_inf};
use symhom::Result;

/// Phase-space radius under which two orbit points are identified.
pub const DEDUP_RADIUS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusOptions {
    pub max_period: usize,
    pub seeds_q: usize,
    pub seeds_p: usize,
    /// Momentum window for seeds when `H` is coercive.
    pub p_window: f64,
    pub tol: f64,
    /// Jitters seed points inside their grid cells; cell centres when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for CensusOptions {
    fn default() -> Self {
        CensusOptions { max_period: 20, seeds_q: 8, seeds_p: 24, p_window: 1.0, tol: 1e-10, seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    /// Integer translation `m` of the lift after one period.
    pub winding: Vec<i64>,
    pub rotation: Vec<f64>,
    /// Average action over one period.
    pub action: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    /// Every point is fixed (`H` vanishes identically); no count is reported.
    pub degenerate: bool,
    pub orbits: Vec<PeriodicOrbit>,
    pub distinct_actions: Option<usize>,
    /// Distinct rotation numbers as reduced fractions `(u, v)` (first coordinate).
    pub distinct_rotations: Vec<(i64, usize)>,
}

impl CensusReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("period,winding,rotation,action,q,p,residual\n");
        for o in &self.orbits {
            s.push_str(&format!(
                "{},{},{:.12},{:.12},{:.12},{:.12},{:.3e}\n",
                o.period, o.winding[0], o.rotation[0], o.action, o.q[0], o.p[0], o.residual
            ));
        }
        s
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// `Φᵏ(z) − z − (m, 0)` and the action over `[0, k]`.
fn residual(h: &HamiltonianSpec, z: PhasePoint, k: usize, m: &[i64], cfg: &FlowConfig) -> Result<([f64; 4], f64)> {
    let fe = flow_segment(h, z, 0.0, k as f64, cfg, None)?;
    let n = z.n;
    let mut r = [0.0; 4];
    for i in 0..n {
        r[i] = fe.end.q[i] - z.q[i] - m[i] as f64;
        r[n + i] = fe.end.p[i] - z.p[i];
    }
    Ok((r, fe.action))
}

fn solve(h: &HamiltonianSpec, seed: PhasePoint, k: usize, m: &[i64], cfg: &FlowConfig, tol: f64) -> Result<Option<PhasePoint>> {
    let n = seed.n;
    let d = 2 * n;
    let mut z = seed;
    let (mut r, _) = residual(h, z, k, m, cfg)?;
    let mut lambda = 1e-8;
    for _ in 0..60 {
        let rn = norm_inf(&r[..d]);
        if rn <= tol {
            return Ok(Some(z));
        }
        let mut jac = vec![0.0; d * d];
        for j in 0..d {
            let hh = 1e-7;
            let mut zp = z;
            if j < n {
                zp.q[j] += hh;
            } else {
                zp.p[j - n] += hh;
            }
            let (rp, _) = residual(h, zp, k, m, cfg)?;
            for i in 0..d {
                jac[i * d + j] = (rp[i] - r[i]) / hh;
            }
        }
        let Some(step) = lm_step(&jac, &r[..d], d, d, lambda) else { break };
        let mut zt = z;
        for j in 0..d {
            if j < n {
                zt.q[j] += step[j];
            } else {
                zt.p[j - n] += step[j];
            }
        }
        let (rt, _) = residual(h, zt, k, m, cfg)?;
        if norm_inf(&rt[..d]) < rn {
            z = zt;
            r = rt;
            lambda = (lambda * 0.1).max(1e-14);
        } else {
            lambda *= 10.0;
            if lambda > 1e4 {
                break;
            }
        }
    }
    Ok(None)
}

fn identically_zero(h: &HamiltonianSpec) -> bool {
    if matches!(h.family, Family::Zero) || h.scale == 0.0 {
        return true;
    }
    let n = h.n;
    let r = h.support_radius().unwrap_or(1.0);
    (0..16).all(|i| {
        (0..16).all(|j| {
            let q = [i as f64 / 16.0, i as f64 / 16.0];
            let p = [-r + 2.0 * r * j as f64 / 15.0, r - 2.0 * r * j as f64 / 15.0];
            let (mut dq, mut dp) = ([0.0; 2], [0.0; 2]);
            h.eval(0.0, &q[..n], &p[..n], &mut dq[..n], &mut dp[..n]);
            norm_inf(&dq[..n]) == 0.0 && norm_inf(&dp[..n]) == 0.0
        })
    })
}

fn on_torus_distance(a: &PhasePoint, b: &PhasePoint) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..a.n {
        let dq = (a.q[i] - b.q[i]).rem_euclid(1.0);
        d = d.max(dq.min(1.0 - dq)).max((a.p[i] - b.p[i]).abs());
    }
    d
}

/// Periodic orbits of period at most `max_period` inside the support (one degree of freedom).
pub fn census(h: &HamiltonianSpec, opts: &CensusOptions, cfg: &FlowConfig) -> Result<CensusReport> {
    h.validate()?;
    if identically_zero(h) {
        return Ok(CensusReport { degenerate: true, orbits: Vec::new(), distinct_actions: None, distinct_rotations: Vec::new() });
    }
    if h.n != 1 {
        return Err(symhom::Error::InvalidSpec("census handles n = 1".into()));
    }
    let w = h.support_radius().unwrap_or(opts.p_window);
    let mut rng = opts.seed.map(ChaCha8Rng::seed_from_u64);
    let mut offset = move || rng.as_mut().map_or(0.5, |r| r.random_range(0.25..0.75));
    let mut seeds = Vec::with_capacity(opts.seeds_q * opts.seeds_p);
    for i in 0..opts.seeds_q {
        for j in 0..opts.seeds_p {
            let q = (i as f64 + offset()) / opts.seeds_q as f64;
            let p = -w + 2.0 * w * (j as f64 + offset()) / opts.seeds_p as f64;
            seeds.push(PhasePoint::new1(q, p));
        }
    }
    let mut orbits: Vec<(PhasePoint, Vec<PhasePoint>, PeriodicOrbit)> = Vec::new();
    for k in 1..=opts.max_period {
        let found: Vec<(PhasePoint, i64)> = seeds
            .par_iter()
            .filter(|s| !h.outside_support(s.q(), s.p()))
            .map(|s| -> Result<Option<(PhasePoint, i64)>> {
                let probe = flow_segment(h, *s, 0.0, k as f64, cfg, None)?.end;
                let m = (probe.q[0] - s.q[0]).round() as i64;
                Ok(solve(h, *s, k, &[m], cfg, opts.tol)?.map(|z| (z, m)))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        for (z, m) in found {
            if h.outside_support(z.q(), z.p()) {
                continue;
            }
            // Minimal period among divisors compatible with the winding.
            let mut period = k;
            let mut wind = m;
            for d in 1..k {
                if k % d == 0 && (m * d as i64) % k as i64 == 0 {
                    let md = m * d as i64 / k as i64;
                    let (r, _) = residual(h, z, d, &[md], cfg)?;
                    if norm_inf(&r[..2]) <= 1e3 * opts.tol {
                        period = d;
                        wind = md;
                        break;
                    }
                }
            }
            let mut pts = Vec::with_capacity(period);
            let mut x = z;
            for _ in 0..period {
                pts.push(x);
                x = flow_segment(h, x, 0.0, 1.0, cfg, None)?.end;
            }
            if orbits.iter().any(|(_, other, o)| o.period == period && other.iter().any(|y| on_torus_distance(y, &z) <= DEDUP_RADIUS)) {
                continue;
            }
            let (r, action) = residual(h, z, period, &[wind], cfg)?;
            let rec = PeriodicOrbit {
                period,
                winding: vec![wind],
                rotation: vec![wind as f64 / period as f64],
                action: action / period as f64,
                q: vec![z.q[0].rem_euclid(1.0)],
                p: vec![z.p[0]],
                residual: norm_inf(&r[..2]),
            };
            orbits.push((z, pts, rec));
        }
    }
    let mut recs: Vec<PeriodicOrbit> = orbits.into_iter().map(|o| o.2).collect();
    recs.sort_by(|a, b| a.period.cmp(&b.period).then(a.q[0].total_cmp(&b.q[0])).then(a.p[0].total_cmp(&b.p[0])));
    let mut actions: Vec<f64> = recs.iter().map(|o| o.action).collect();
    actions.sort_by(f64::total_cmp);
    actions.dedup_by(|a, b| (*a - *b).abs() <= 1e-8 * (1.0 + b.abs()));
    let mut rots: Vec<(i64, usize)> = recs
        .iter()
        .map(|o| {
            let g = gcd(o.winding[0], o.period as i64).max(1);
            (o.winding[0] / g, o.period / g as usize)
        })
        .collect();
    rots.sort_by(|a, b| (a.0 as f64 / a.1 as f64).total_cmp(&(b.0 as f64 / b.1 as f64)));
    rots.dedup();
    Ok(CensusReport { degenerate: false, orbits: recs, distinct_actions: Some(actions.len()), distinct_rotations: rots })
}
