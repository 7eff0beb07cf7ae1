//! Invariant measures carried by translated orbits: rotation vectors, average actions,
//! convex combinations realizing a prescribed rotation, and support diagnostics.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    find_translated_orbit, find_translated_orbit_at_momentum, flow_segment, integrate_phase_space, iterate_lift,
    rotation_vector, FlowConfig, HamiltonianSpec, LiftedOrbit, PhasePoint, Quadrature,
};
use crate::subdiff::{convex_hull, SubdiffPolytope};
use crate::{Error, Result};

/// Number of trigonometric observables used for the pushforward defect.
pub const OBSERVABLES: usize = 32;
const OBSERVABLE_SEED: u64 = 0x5eed_0b5e;

/// `g(q, p) = cos(2π⟨m, q⟩ + φ) · cos(c·p₀ + ψ)` with `|g| ≤ 1`.
#[derive(Clone, Debug, PartialEq)]
struct Observable {
    modes: [i32; 2],
    phase: f64,
    freq: [f64; 2],
    shift: f64,
}

impl Observable {
    fn eval(&self, z: &PhasePoint) -> f64 {
        let mut a = self.phase;
        let mut b = self.shift;
        for i in 0..z.n {
            a += 2.0 * std::f64::consts::PI * self.modes[i] as f64 * z.q[i];
            b += self.freq[i] * z.p[i];
        }
        a.cos() * b.cos()
    }
}

fn dictionary() -> Vec<Observable> {
    let mut rng = ChaCha8Rng::seed_from_u64(OBSERVABLE_SEED);
    (0..OBSERVABLES)
        .map(|_| Observable {
            modes: [rng.random_range(-3..=3), rng.random_range(-3..=3)],
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            freq: [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)],
            shift: rng.random_range(0.0..std::f64::consts::TAU),
        })
        .collect()
}

/// One weighted orbit segment of a measure, with one extra unit of time kept for pushforwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurePiece {
    pub orbit: LiftedOrbit,
    pub weight: f64,
    /// Samples on `[T, T + 1]`.
    pub tail: Vec<(f64, PhasePoint)>,
}

/// Convex combination of normalized orbit measures `(1/T) ∫₀ᵀ δ_{γ(t)} dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitMeasure {
    pub pieces: Vec<MeasurePiece>,
    pub rotation: Vec<f64>,
    pub avg_action: f64,
    /// `max_g |∫ g∘Φ¹ dμ − ∫ g dμ|` over the observable dictionary.
    pub invariance_defect: f64,
    /// Momentum the measure was built for, when known.
    #[serde(default)]
    pub cohomology: Option<Vec<f64>>,
}

/// Trapezoid integral of `f` along time-ordered samples.
fn along(samples: &[(f64, PhasePoint)], mut f: impl FnMut(f64, &PhasePoint) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (t, z) in samples {
        let v = f(*t, z);
        if let Some((t0, v0)) = prev {
            acc += 0.5 * (t - t0) * (v + v0);
        }
        prev = Some((*t, v));
    }
    acc
}

fn window(samples: &[(f64, PhasePoint)], a: f64, b: f64) -> Vec<(f64, PhasePoint)> {
    samples.iter().filter(|(t, _)| *t >= a - 1e-12 && *t <= b + 1e-12).copied().collect()
}

/// Assembles a measure from orbits and weights, flowing each orbit one extra unit to measure
/// the pushforward defect.
pub fn orbit_measure(
    h: &HamiltonianSpec,
    orbits: Vec<LiftedOrbit>,
    weights: &[f64],
    cfg: &FlowConfig,
) -> Result<OrbitMeasure> {
    if orbits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if weights.len() != orbits.len() || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidWeights(format!("{weights:?}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    let mut pieces = Vec::with_capacity(orbits.len());
    for (orbit, &weight) in orbits.into_iter().zip(weights) {
        let mut tail = Vec::new();
        flow_segment(h, orbit.end(), orbit.horizon, 1.0, cfg, Some(&mut tail))?;
        pieces.push(MeasurePiece { orbit, weight, tail });
    }
    let n = pieces[0].orbit.start().n;
    let mut rotation = vec![0.0; n];
    let mut avg_action = 0.0;
    for p in &pieces {
        for (r, v) in rotation.iter_mut().zip(rotation_vector(&p.orbit)) {
            *r += p.weight * v;
        }
        avg_action += p.weight * p.orbit.average_action();
    }
    let invariance_defect = dictionary()
        .iter()
        .map(|g| {
            pieces
                .iter()
                .map(|p| {
                    let head = window(&p.orbit.samples, 0.0, 1.0);
                    let a = along(&head, |_, z| g.eval(z));
                    let b = along(&p.tail, |_, z| g.eval(z));
                    p.weight * (b - a) / p.orbit.horizon
                })
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max);
    Ok(OrbitMeasure { pieces, rotation, avg_action, invariance_defect, cohomology: None })
}

/// `∫ ⟨dq_i, ∂H/∂p⟩ dμ` for each coordinate 1-form, by quadrature along the pieces.
pub fn rotation_of_measure(mu: &OrbitMeasure, h: &HamiltonianSpec) -> Vec<f64> {
    let n = h.n;
    (0..n)
        .map(|i| {
            mu.pieces
                .iter()
                .map(|p| {
                    let v = along(&p.orbit.samples, |t, z| {
                        let (mut dq, mut dp) = ([0.0; 2], [0.0; 2]);
                        h.eval(t, z.q(), z.p(), &mut dq[..n], &mut dp[..n]);
                        dp[i]
                    });
                    p.weight * v / p.orbit.horizon
                })
                .sum()
        })
        .collect()
}

/// `∫ (⟨p, ∂H/∂p⟩ − H) dμ` by quadrature along the pieces.
pub fn average_action(mu: &OrbitMeasure, h: &HamiltonianSpec) -> f64 {
    let n = h.n;
    mu.pieces
        .iter()
        .map(|p| {
            let v = along(&p.orbit.samples, |t, z| {
                let (mut dq, mut dp) = ([0.0; 2], [0.0; 2]);
                let hv = h.eval(t, z.q(), z.p(), &mut dq[..n], &mut dp[..n]);
                (0..n).map(|i| z.p[i] * dp[i]).sum::<f64>() - hv
            });
            p.weight * v / p.orbit.horizon
        })
        .sum()
}

/// Pairings of the (unnormalized) Liouville measure `dt ∧ ωⁿ` of a compactly supported `H`:
/// `(∫ ∂H/∂p, ∫ ⟨p, ∂H/∂p⟩ − H)`.
pub fn liouville_pairings(h: &HamiltonianSpec, quad: Quadrature) -> Result<(Vec<f64>, f64)> {
    let n = h.n;
    let r = integrate_phase_space::<3>(h, quad, |hv, _dq, dp, _q, p| {
        let lag: f64 = (0..n).map(|i| p[i] * dp[i]).sum::<f64>() - hv;
        [dp[0], if n > 1 { dp[1] } else { 0.0 }, lag]
    })?;
    Ok((r[..n].to_vec(), r[2]))
}

/// Momentum-return tolerance separating translated periodic orbits from mere `q`-returns.
pub const RETURN_TOL: f64 = 1e-5;

fn seeds(n: usize, p: &[f64]) -> Vec<PhasePoint> {
    let m = 4;
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let q = [i as f64 / m as f64, j as f64 / m as f64];
            out.push(PhasePoint::new(&q[..n], p));
        }
    }
    out
}

/// Grid nodes of the `q`-circle scan used to bracket translated orbits in one degree of freedom.
pub const SCAN_NODES: usize = 512;
const STEEP_JUMP: f64 = 0.25;

/// Starting points `(q, p)` with `Φᵏ(q, p)_q = q + kα` in one degree of freedom, bracketed on a
/// grid of the circle and refined by the Illinois method.
fn scan_roots(h: &HamiltonianSpec, p: f64, k: usize, alpha: f64, cfg: &FlowConfig) -> Result<Vec<PhasePoint>> {
    let kf = k as f64;
    let r = |q: f64| -> Result<f64> {
        Ok(flow_segment(h, PhasePoint::new1(q, p), 0.0, kf, cfg, None)?.end.q[0] - q - kf * alpha)
    };
    let qs: Vec<f64> = (0..=SCAN_NODES).map(|i| -0.5 + i as f64 / SCAN_NODES as f64).collect();
    let vals: Vec<f64> = qs.par_iter().map(|&q| r(q)).collect::<Result<_>>()?;
    // Steep cells (near separatrices) are subdivided so that clustered roots get bracketed.
    let brackets: Vec<(f64, f64, f64, f64)> = (0..SCAN_NODES)
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, f64, f64, f64)>> {
            let mut out = Vec::new();
            let mut stack = vec![(qs[i], vals[i], qs[i + 1], vals[i + 1])];
            while let Some((a, fa, b, fb)) = stack.pop() {
                if (fb - fa).abs() > STEEP_JUMP && b - a > 1e-13 {
                    let m = 0.5 * (a + b);
                    let fm = r(m)?;
                    stack.push((m, fm, b, fb));
                    stack.push((a, fa, m, fm));
                } else if fa == 0.0 || fa.signum() != fb.signum() {
                    out.push((a, fa, b, fb));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let tol = cfg.newton_tol;
    let roots: Vec<Option<f64>> = brackets
        .par_iter()
        .map(|&(mut a, mut fa, mut b, mut fb)| -> Result<Option<f64>> {
            if fa == 0.0 {
                return Ok(Some(a));
            }
            let mut side = 0;
            for _ in 0..100 {
                let c = (a * fb - b * fa) / (fb - fa);
                let fc = r(c)?;
                if fc.abs() <= tol || (b - a).abs() < 1e-14 {
                    return Ok((fc.abs() <= 1e3 * tol).then_some(c));
                }
                if fc.signum() == fb.signum() {
                    b = c;
                    fb = fc;
                    if side == 1 {
                        fa *= 0.5;
                    }
                    side = 1;
                } else {
                    a = c;
                    fa = fc;
                    if side == -1 {
                        fb *= 0.5;
                    }
                    side = -1;
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;
    Ok(roots.into_iter().flatten().map(|q| PhasePoint::new1(q, p)).collect())
}

/// Rotations `α = (Q − q)/k` of all orbits starting at momentum `p` whose momentum returns after
/// time `k` (one degree of freedom), found by bracketing the momentum defect on the circle.
pub fn returning_rotations(h: &HamiltonianSpec, p: f64, k: usize, cfg: &FlowConfig) -> Result<Vec<f64>> {
    if h.n != 1 {
        return Err(Error::InvalidSpec("returning_rotations handles n = 1".into()));
    }
    let kf = k as f64;
    let s = |q: f64| -> Result<f64> { Ok(flow_segment(h, PhasePoint::new1(q, p), 0.0, kf, cfg, None)?.end.p[0] - p) };
    let qs: Vec<f64> = (0..=SCAN_NODES).map(|i| i as f64 / SCAN_NODES as f64).collect();
    let vals: Vec<f64> = qs.par_iter().map(|&q| s(q)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..SCAN_NODES {
        let (mut a, mut fa, mut b, mut fb) = (qs[i], vals[i], qs[i + 1], vals[i + 1]);
        if fa != 0.0 && fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            if fa == 0.0 || b - a < 1e-14 {
                break;
            }
            let m = 0.5 * (a + b);
            let fm = s(m)?;
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
        let _ = fb;
        let end = flow_segment(h, PhasePoint::new1(a, p), 0.0, kf, cfg, None)?.end;
        if (end.p[0] - p).abs() <= RETURN_TOL {
            out.push((end.q[0] - a) / kf);
        }
    }
    Ok(out)
}

/// Translated orbit starting at momentum `p`. Orbits whose momentum also returns are preferred,
/// and among those the one with the least average action, i.e. the largest critical value
/// `⟨p, α⟩ − 𝒜` (the fundamental-class critical point). Without any returning orbit the
/// smallest momentum defect wins; a free `(q, p)` search is the last resort.
fn orbit_with_rotation(h: &HamiltonianSpec, p: &[f64], k: usize, alpha: &[f64], cfg: &FlowConfig) -> Result<LiftedOrbit> {
    let found: Vec<PhasePoint> = if h.n == 1 {
        scan_roots(h, p[0], k, alpha[0], cfg)?
    } else {
        seeds(h.n, p)
            .par_iter()
            .filter_map(|s| find_translated_orbit_at_momentum(h, k, alpha, *s, cfg).ok().map(|r| r.0))
            .collect()
    };
    let mut best: Option<(bool, f64, LiftedOrbit)> = None;
    for z in found {
        let orb = iterate_lift(h, z, k, cfg)?;
        let e = orb.end();
        let defect = (0..h.n).map(|i| (e.p[i] - z.p[i]).abs()).fold(0.0, f64::max);
        let returns = defect <= RETURN_TOL * (1.0 + p.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        let score = if returns { orb.average_action() } else { defect };
        let better = match &best {
            None => true,
            Some((r, s, _)) => (returns && !r) || (returns == *r && score < *s),
        };
        if better {
            best = Some((returns, score, orb));
        }
    }
    if let Some((_, _, orb)) = best {
        return Ok(orb);
    }
    let seed = PhasePoint::new(&vec![0.0; h.n], p);
    let (z, _) = find_translated_orbit(h, k, alpha, seed, cfg)?;
    iterate_lift(h, z, k, cfg)
}

/// Barycentric weights of `alpha` in a simplex of at most `n + 1` hull vertices.
fn caratheodory(hull: &[Vec<f64>], alpha: &[f64]) -> Option<Vec<(Vec<f64>, f64)>> {
    let tol = 1e-9;
    match hull.len() {
        0 => None,
        1 => {
            let d = hull[0].iter().zip(alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (d <= tol).then(|| vec![(hull[0].clone(), 1.0)])
        }
        2 => {
            let d: Vec<f64> = hull[1].iter().zip(&hull[0]).map(|(a, b)| a - b).collect();
            let dd: f64 = d.iter().map(|x| x * x).sum();
            let t = alpha.iter().zip(&hull[0]).zip(&d).map(|((a, b), e)| (a - b) * e).sum::<f64>() / dd;
            let proj: Vec<f64> = hull[0].iter().zip(&d).map(|(b, e)| b + t * e).collect();
            let off = proj.iter().zip(alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if t < -tol || t > 1.0 + tol || off > tol * (1.0 + dd.sqrt()) {
                return None;
            }
            let t = t.clamp(0.0, 1.0);
            Some(vec![(hull[0].clone(), 1.0 - t), (hull[1].clone(), t)])
        }
        m => {
            for i in 1..m - 1 {
                let (a, b, c) = (&hull[0], &hull[i], &hull[i + 1]);
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                if det.abs() < 1e-300 {
                    continue;
                }
                let l1 = ((alpha[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (alpha[1] - a[1])) / det;
                let l2 = ((b[0] - a[0]) * (alpha[1] - a[1]) - (alpha[0] - a[0]) * (b[1] - a[1])) / det;
                let l0 = 1.0 - l1 - l2;
                if l0 >= -tol && l1 >= -tol && l2 >= -tol {
                    let w = [l0.max(0.0), l1.max(0.0), l2.max(0.0)];
                    let s: f64 = w.iter().sum();
                    return Some(
                        [a, b, c].iter().zip(w).filter(|(_, w)| *w > 0.0).map(|(v, w)| ((*v).clone(), w / s)).collect(),
                    );
                }
            }
            None
        }
    }
}

/// Measure with rotation `alpha` at momentum `p` from `k`-translated orbits. A direct orbit with
/// rotation `alpha` is tried first; otherwise orbits at the vertices of a simplex of `hull`
/// containing `alpha` are combined with barycentric weights.
pub fn build_mu_alpha(
    h: &HamiltonianSpec,
    alpha: &[f64],
    p: &[f64],
    k: usize,
    hull: &SubdiffPolytope,
    cfg: &FlowConfig,
) -> Result<OrbitMeasure> {
    let vertices = convex_hull(&hull.vertices);
    let Some(combo) = caratheodory(&vertices, alpha) else {
        return Err(Error::InfeasibleAlpha { alpha: alpha.to_vec(), hull: vertices });
    };
    let mut mu = match orbit_with_rotation(h, p, k, alpha, cfg) {
        Ok(orb) => orbit_measure(h, vec![orb], &[1.0], cfg)?,
        Err(Error::NoOrbitFound { .. }) if combo.len() > 1 => {
            let mut orbits = Vec::with_capacity(combo.len());
            let mut weights = Vec::with_capacity(combo.len());
            for (a, w) in &combo {
                orbits.push(orbit_with_rotation(h, p, k, a, cfg)?);
                weights.push(*w);
            }
            orbit_measure(h, orbits, &weights, cfg)?
        }
        Err(e) => return Err(e),
    };
    mu.cohomology = Some(p.to_vec());
    Ok(mu)
}

/// Support diagnostics of a measure built from orbits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// μ-mass of the set where `H` or its gradient is nonzero.
    pub mass_in_support: f64,
    /// Largest oscillation of `H` along a piece (autonomous `H` only).
    pub energy_spread: Option<f64>,
    /// μ-average of `H` (autonomous `H` only).
    pub level: Option<f64>,
    /// `|𝒜(μ) − (⟨p, ρ(μ)⟩ − level)|` when the momentum is known and `H` is autonomous.
    pub level_identity_residual: Option<f64>,
}

pub fn support_checks(mu: &OrbitMeasure, h: &HamiltonianSpec) -> SupportReport {
    let n = h.n;
    let tol = 1e-12;
    let mut mass = 0.0;
    for p in &mu.pieces {
        let inside = along(&p.orbit.samples, |t, z| {
            let (mut dq, mut dp) = ([0.0; 2], [0.0; 2]);
            let hv = h.eval(t, z.q(), z.p(), &mut dq[..n], &mut dp[..n]) - h.offset;
            let g = dq[..n].iter().chain(&dp[..n]).fold(0.0f64, |m, v| m.max(v.abs()));
            if hv.abs() > tol || g > tol {
                1.0
            } else {
                0.0
            }
        });
        mass += p.weight * inside / p.orbit.horizon;
    }
    if h.time_dependent {
        return SupportReport { mass_in_support: mass, energy_spread: None, level: None, level_identity_residual: None };
    }
    let mut spread: f64 = 0.0;
    let mut level = 0.0;
    for p in &mu.pieces {
        let vals: Vec<f64> = p.orbit.samples.iter().map(|(_, z)| h.value(0.0, z.q(), z.p())).collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &v| (l.min(v), u.max(v)));
        spread = spread.max(hi - lo);
        level += p.weight * along(&p.orbit.samples, |_, z| h.value(0.0, z.q(), z.p())) / p.orbit.horizon;
    }
    let residual = mu.cohomology.as_ref().map(|c| {
        let pa: f64 = c.iter().zip(&mu.rotation).map(|(a, b)| a * b).sum();
        (mu.avg_action - (pa - level)).abs()
    });
    SupportReport { mass_in_support: mass, energy_spread: Some(spread), level: Some(level), level_identity_residual: residual }
}

/// One sampled point `(α, ⟨p, α⟩ − H̄(p))` of the rotation-action set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RPoint {
    pub p: f64,
    pub alpha: f64,
    pub action: f64,
    /// Vertex of the convex hull of all sampled points.
    pub extremal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RSet {
    pub points: Vec<RPoint>,
}

impl RSet {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,alpha,action,extremal\n");
        for r in &self.points {
            s.push_str(&format!("{:.10},{:.10},{:.10},{}\n", r.p, r.alpha, r.action, r.extremal));
        }
        s
    }
}

/// Samples `{(α, pα − H̄(p)) : α ∈ ∂_C H̄(p)}` from a one-dimensional table, with
/// `alpha_samples` evenly spaced slopes per Clarke interval. Duplicate points are merged.
pub fn emit_r_set(p_grid: &[f64], values: &[f64], alpha_samples: usize) -> Result<RSet> {
    let n = p_grid.len();
    if n < 2 || values.len() != n {
        return Err(Error::EmptyInput);
    }
    let slope = |i: usize| (values[i + 1] - values[i]) / (p_grid[i + 1] - p_grid[i]);
    let mut pts: Vec<RPoint> = Vec::new();
    for i in 0..n {
        let left = if i > 0 { Some(slope(i - 1)) } else { None };
        let right = if i + 1 < n { Some(slope(i)) } else { None };
        let (a, b) = match (left, right) {
            (Some(l), Some(r)) => (l.min(r), l.max(r)),
            (Some(l), None) => (l, l),
            (None, Some(r)) => (r, r),
            (None, None) => unreachable!(),
        };
        let m = if b > a { alpha_samples.max(2) } else { 1 };
        for j in 0..m {
            let alpha = if m == 1 { a } else { a + (b - a) * j as f64 / (m - 1) as f64 };
            let action = p_grid[i] * alpha - values[i];
            let dup = pts.iter().any(|q| (q.alpha - alpha).abs() <= 1e-12 && (q.action - action).abs() <= 1e-12);
            if !dup {
                pts.push(RPoint { p: p_grid[i], alpha, action, extremal: false });
            }
        }
    }
    let coords: Vec<Vec<f64>> = pts.iter().map(|r| vec![r.alpha, r.action]).collect();
    let hull = convex_hull(&coords);
    for r in pts.iter_mut() {
        r.extremal = hull.iter().any(|v| (v[0] - r.alpha).abs() <= 1e-12 && (v[1] - r.action).abs() <= 1e-12);
    }
    Ok(RSet { points: pts })
}
