//! Symplectic integrators, lifted orbits and translated-orbit search.

use serde::{Deserialize, Serialize};

use super::hamiltonian::HamiltonianSpec;
use crate::linalg::{lm_step, norm_inf, solve_in_place};
use crate::{Error, Result};

/// A point of `T*ℝⁿ`, the universal cover of `T*Tⁿ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PointRepr", try_from = "PointRepr")]
pub struct PhasePoint {
    pub n: usize,
    pub q: [f64; 2],
    pub p: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct PointRepr {
    q: Vec<f64>,
    p: Vec<f64>,
}

impl From<PhasePoint> for PointRepr {
    fn from(z: PhasePoint) -> Self {
        PointRepr { q: z.q().to_vec(), p: z.p().to_vec() }
    }
}

impl TryFrom<PointRepr> for PhasePoint {
    type Error = String;
    fn try_from(r: PointRepr) -> std::result::Result<Self, String> {
        if r.q.len() != r.p.len() || r.q.is_empty() || r.q.len() > 2 {
            return Err("q and p must have equal length 1 or 2".into());
        }
        Ok(PhasePoint::new(&r.q, &r.p))
    }
}

impl PhasePoint {
    pub fn new(q: &[f64], p: &[f64]) -> Self {
        let n = q.len();
        let mut z = PhasePoint { n, q: [0.0; 2], p: [0.0; 2] };
        z.q[..n].copy_from_slice(q);
        z.p[..n].copy_from_slice(&p[..n]);
        z
    }

    pub fn new1(q: f64, p: f64) -> Self {
        PhasePoint { n: 1, q: [q, 0.0], p: [p, 0.0] }
    }

    pub fn q(&self) -> &[f64] {
        &self.q[..self.n]
    }

    pub fn p(&self) -> &[f64] {
        &self.p[..self.n]
    }

    pub fn is_finite(&self) -> bool {
        self.q().iter().chain(self.p()).all(|x| x.is_finite())
    }

    /// Projection of `q` to the torus `[0,1)ⁿ`.
    pub fn on_torus(&self) -> PhasePoint {
        let mut z = *self;
        for i in 0..self.n {
            z.q[i] = z.q[i].rem_euclid(1.0);
        }
        z
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            s += (self.q[i] - other.q[i]).powi(2) + (self.p[i] - other.p[i]).powi(2);
        }
        s.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    SplittingSeparable,
    ImplicitMidpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub integrator: Integrator,
    pub substeps_per_unit_time: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            integrator: Integrator::ImplicitMidpoint,
            substeps_per_unit_time: 16,
            newton_tol: 1e-11,
            max_newton_iters: 50,
        }
    }
}

impl FlowConfig {
    /// Splitting when the Hamiltonian is separable, implicit midpoint otherwise.
    pub fn for_spec(h: &HamiltonianSpec) -> Self {
        let integrator =
            if h.is_separable() { Integrator::SplittingSeparable } else { Integrator::ImplicitMidpoint };
        FlowConfig { integrator, ..Default::default() }
    }

    pub fn with_substeps(mut self, m: usize) -> Self {
        self.substeps_per_unit_time = m;
        self
    }

    pub fn validate(&self, h: &HamiltonianSpec) -> Result<()> {
        if self.substeps_per_unit_time == 0 || !(self.newton_tol > 0.0) {
            return Err(Error::InvalidSpec("flow config requires m >= 1 and newton_tol > 0".into()));
        }
        if self.integrator == Integrator::SplittingSeparable && !h.is_separable() {
            return Err(Error::IncompatibleIntegrator {
                integrator: "splitting_separable".into(),
                reason: "Hamiltonian is not of the form T(p) + V(t,q)".into(),
            });
        }
        Ok(())
    }
}

/// Time-ordered samples of a lifted trajectory with its accumulated action `∫ p·q̇ − H dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedOrbit {
    pub samples: Vec<(f64, PhasePoint)>,
    pub action: f64,
    pub horizon: f64,
}

impl LiftedOrbit {
    pub fn start(&self) -> PhasePoint {
        self.samples[0].1
    }

    pub fn end(&self) -> PhasePoint {
        self.samples[self.samples.len() - 1].1
    }

    /// `A_T = (1/T) ∫₀ᵀ p·q̇ − H dt`.
    pub fn average_action(&self) -> f64 {
        self.action / self.horizon
    }
}

/// Endpoint and action of a flow segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowEnd {
    pub end: PhasePoint,
    pub action: f64,
}

/// State in local coordinates: `q` shifted by an integer vector so it starts in `[0,1)ⁿ`.
#[derive(Clone, Copy)]
struct Local {
    z: [f64; 4],
    n: usize,
}

impl Local {
    fn q(&self) -> &[f64] {
        &self.z[..self.n]
    }
}

fn splitting_step(h: &HamiltonianSpec, t: f64, dt: f64, s: &mut Local) -> f64 {
    let n = s.n;
    let mut g = [0.0; 2];
    let v0 = h.potential(t, s.q(), &mut g);
    let mut ph = [0.0; 2];
    for i in 0..n {
        ph[i] = s.z[n + i] - 0.5 * dt * g[i];
    }
    let mut tp = [0.0; 2];
    let kin = h.kinetic(&ph[..n], &mut tp);
    let mut dq = [0.0; 2];
    for i in 0..n {
        dq[i] = dt * tp[i];
        s.z[i] += dq[i];
    }
    let v1 = h.potential(t + dt, s.q(), &mut g);
    let mut work = 0.0;
    for i in 0..n {
        s.z[n + i] = ph[i] - 0.5 * dt * g[i];
        work += ph[i] * dq[i];
    }
    work - dt * kin - 0.5 * dt * (v0 + v1)
}

fn midpoint_step(h: &HamiltonianSpec, t: f64, dt: f64, s: &mut Local, cfg: &FlowConfig) -> Result<f64> {
    let n = s.n;
    let m = 2 * n;
    let tm = t + 0.5 * dt;
    let z0 = s.z;
    let field = |w: &[f64; 4], out: &mut [f64; 4]| {
        let mut gq = [0.0; 2];
        let mut gp = [0.0; 2];
        h.eval(tm, &w[..n], &w[n..m], &mut gq, &mut gp);
        for i in 0..n {
            out[i] = gp[i];
            out[n + i] = -gq[i];
        }
    };
    let mut f = [0.0; 4];
    field(&z0, &mut f);
    let mut w = z0;
    for i in 0..m {
        w[i] += 0.5 * dt * f[i];
    }
    let mut res = f64::INFINITY;
    for _ in 0..cfg.max_newton_iters {
        field(&w, &mut f);
        let mut g = [0.0; 4];
        for i in 0..m {
            g[i] = w[i] - z0[i] - 0.5 * dt * f[i];
        }
        res = norm_inf(&g[..m]);
        if res <= 1e-15 * (1.0 + norm_inf(&w[..m])) {
            break;
        }
        let mut hess = [0.0; 16];
        h.hessian(tm, &w[..n], &w[n..m], &mut hess[..m * m]);
        let mut a = [0.0; 16];
        for i in 0..m {
            for j in 0..m {
                // J·Hess: rows of ∂_p H come first, then −∂_q H.
                let jh = if i < n { hess[(n + i) * m + j] } else { -hess[(i - n) * m + j] };
                a[i * m + j] = if i == j { 1.0 } else { 0.0 } - 0.5 * dt * jh;
            }
        }
        let mut b = [0.0; 4];
        for i in 0..m {
            b[i] = -g[i];
        }
        if !solve_in_place(&mut a[..m * m], &mut b[..m], m) {
            break;
        }
        let step = norm_inf(&b[..m]);
        for i in 0..m {
            w[i] += b[i];
        }
        if step <= 1e-16 * (1.0 + norm_inf(&w[..m])) {
            field(&w, &mut f);
            res = (0..m).map(|i| (w[i] - z0[i] - 0.5 * dt * f[i]).abs()).fold(0.0, f64::max);
            break;
        }
    }
    if !(res <= cfg.newton_tol) {
        return Err(Error::NonConvergentImplicitStep { t, residual: res });
    }
    let mut gq = [0.0; 2];
    let mut gp = [0.0; 2];
    let hv = h.eval(tm, &w[..n], &w[n..m], &mut gq, &mut gp);
    let mut work = 0.0;
    for i in 0..m {
        s.z[i] = 2.0 * w[i] - z0[i];
    }
    for i in 0..n {
        work += w[n + i] * (s.z[i] - z0[i]);
    }
    Ok(work - dt * hv)
}

/// Integrates from `t0` for `duration`, optionally recording every substep.
pub fn flow_segment(
    h: &HamiltonianSpec,
    z: PhasePoint,
    t0: f64,
    duration: f64,
    cfg: &FlowConfig,
    mut samples: Option<&mut Vec<(f64, PhasePoint)>>,
) -> Result<FlowEnd> {
    cfg.validate(h)?;
    let steps = ((duration * cfg.substeps_per_unit_time as f64) - 1e-9).ceil().max(1.0) as usize;
    let dt = duration / steps as f64;
    if let Some(s) = samples.as_deref_mut() {
        s.push((t0, z));
    }
    if h.outside_support(z.q(), z.p()) {
        if let Some(s) = samples.as_deref_mut() {
            for i in 1..=steps {
                s.push((t0 + i as f64 * dt, z));
            }
        }
        return Ok(FlowEnd { end: z, action: -h.offset * duration });
    }
    let n = z.n;
    let mut shift = [0.0; 2];
    let mut st = Local { z: [0.0; 4], n };
    for i in 0..n {
        shift[i] = z.q[i].floor();
        st.z[i] = z.q[i] - shift[i];
        st.z[n + i] = z.p[i];
    }
    let lift = |st: &Local| {
        let mut out = PhasePoint { n, q: [0.0; 2], p: [0.0; 2] };
        for i in 0..n {
            out.q[i] = st.z[i] + shift[i];
            out.p[i] = st.z[n + i];
        }
        out
    };
    let mut action = 0.0;
    for i in 0..steps {
        let t = t0 + i as f64 * dt;
        action += match cfg.integrator {
            Integrator::SplittingSeparable => splitting_step(h, t, dt, &mut st),
            Integrator::ImplicitMidpoint => midpoint_step(h, t, dt, &mut st, cfg)?,
        };
        if let Some(s) = samples.as_deref_mut() {
            s.push((t0 + (i + 1) as f64 * dt, lift(&st)));
        }
    }
    let end = lift(&st);
    if !end.is_finite() {
        return Err(Error::NonConvergentImplicitStep { t: t0 + duration, residual: f64::INFINITY });
    }
    Ok(FlowEnd { end, action })
}

/// `Φ¹(z)` on the universal cover.
pub fn time_one_map(h: &HamiltonianSpec, z: PhasePoint, cfg: &FlowConfig) -> Result<PhasePoint> {
    Ok(flow_segment(h, z, 0.0, 1.0, cfg, None)?.end)
}

/// Orbit of `z` over `[0, k]` with all substeps recorded.
pub fn iterate_lift(h: &HamiltonianSpec, z: PhasePoint, k: usize, cfg: &FlowConfig) -> Result<LiftedOrbit> {
    if k == 0 {
        return Err(Error::InvalidSpec("k must be at least 1".into()));
    }
    let mut samples = Vec::with_capacity(k * cfg.substeps_per_unit_time + 1);
    let fe = flow_segment(h, z, 0.0, k as f64, cfg, Some(&mut samples))?;
    Ok(LiftedOrbit { samples, action: fe.action, horizon: k as f64 })
}

/// `(Φᵀ(z) − z)_q / T`.
pub fn rotation_vector(orb: &LiftedOrbit) -> Vec<f64> {
    let a = orb.start();
    let b = orb.end();
    (0..a.n).map(|i| (b.q[i] - a.q[i]) / orb.horizon).collect()
}

fn translation_residual(
    h: &HamiltonianSpec,
    z: PhasePoint,
    k: usize,
    alpha: &[f64],
    cfg: &FlowConfig,
) -> Result<[f64; 2]> {
    let e = flow_segment(h, z, 0.0, k as f64, cfg, None)?.end;
    let mut r = [0.0; 2];
    for i in 0..z.n {
        r[i] = e.q[i] - z.q[i] - k as f64 * alpha[i];
    }
    Ok(r)
}

/// Solves `Φᵏ(z)_q = z_q + kα`. The momentum is first held at `seed.p`; if that fails it is
/// released and a minimum-norm Levenberg-Marquardt search runs over `(q, p)`.
pub fn find_translated_orbit(
    h: &HamiltonianSpec,
    k: usize,
    alpha: &[f64],
    seed: PhasePoint,
    cfg: &FlowConfig,
) -> Result<(PhasePoint, f64)> {
    if k == 0 || alpha.len() != seed.n {
        return Err(Error::InvalidSpec("k >= 1 and alpha of dimension n required".into()));
    }
    if let Some(found) = translated_fixed_p(h, k, alpha, seed, cfg)? {
        return Ok(found);
    }
    if let Some(found) = translated_free(h, k, alpha, seed, cfg)? {
        return Ok(found);
    }
    Err(Error::NoOrbitFound { k, alpha: alpha.to_vec() })
}

/// Translated-orbit search with the momentum held fixed at `seed.p`.
pub fn find_translated_orbit_at_momentum(
    h: &HamiltonianSpec,
    k: usize,
    alpha: &[f64],
    seed: PhasePoint,
    cfg: &FlowConfig,
) -> Result<(PhasePoint, f64)> {
    translated_fixed_p(h, k, alpha, seed, cfg)?.ok_or(Error::NoOrbitFound { k, alpha: alpha.to_vec() })
}

fn translated_fixed_p(
    h: &HamiltonianSpec,
    k: usize,
    alpha: &[f64],
    seed: PhasePoint,
    cfg: &FlowConfig,
) -> Result<Option<(PhasePoint, f64)>> {
    let n = seed.n;
    let offsets: Vec<f64> = (0..8).map(|j| j as f64 / 8.0).collect();
    for &off in &offsets {
        let mut z = seed;
        for i in 0..n {
            z.q[i] += off;
        }
        let mut r = translation_residual(h, z, k, alpha, cfg)?;
        for _ in 0..40 {
            let rn = norm_inf(&r[..n]);
            if rn <= cfg.newton_tol {
                return Ok(Some((z, rn)));
            }
            let mut jac = [0.0; 4];
            for j in 0..n {
                let hh = 1e-7;
                let mut zp = z;
                zp.q[j] += hh;
                let rp = translation_residual(h, zp, k, alpha, cfg)?;
                for i in 0..n {
                    jac[i * n + j] = (rp[i] - r[i]) / hh;
                }
            }
            let mut b = [0.0; 2];
            for i in 0..n {
                b[i] = -r[i];
            }
            if !solve_in_place(&mut jac[..n * n], &mut b[..n], n) {
                break;
            }
            let mut lam = 1.0;
            let mut accepted = false;
            while lam > 1e-4 {
                let mut zt = z;
                for i in 0..n {
                    zt.q[i] += lam * b[i];
                }
                let rt = translation_residual(h, zt, k, alpha, cfg)?;
                if norm_inf(&rt[..n]) < rn {
                    z = zt;
                    r = rt;
                    accepted = true;
                    break;
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
    Ok(None)
}

fn translated_free(
    h: &HamiltonianSpec,
    k: usize,
    alpha: &[f64],
    seed: PhasePoint,
    cfg: &FlowConfig,
) -> Result<Option<(PhasePoint, f64)>> {
    let n = seed.n;
    let m = 2 * n;
    for &dp in &[0.0, 0.1, -0.1, 0.3, -0.3] {
        for &dq in &[0.0, 0.25, 0.5, 0.75] {
            let mut z = seed;
            for i in 0..n {
                z.q[i] += dq;
                z.p[i] += dp;
            }
            let mut r = translation_residual(h, z, k, alpha, cfg)?;
            let mut lambda = 1e-6;
            for _ in 0..60 {
                let rn = norm_inf(&r[..n]);
                if rn <= cfg.newton_tol {
                    return Ok(Some((z, rn)));
                }
                let mut jac = vec![0.0; n * m];
                for j in 0..m {
                    let hh = 1e-7;
                    let mut zp = z;
                    if j < n {
                        zp.q[j] += hh;
                    } else {
                        zp.p[j - n] += hh;
                    }
                    let rp = translation_residual(h, zp, k, alpha, cfg)?;
                    for i in 0..n {
                        jac[i * m + j] = (rp[i] - r[i]) / hh;
                    }
                }
                if norm_inf(&jac) < 1e-12 {
                    break;
                }
                let Some(step) = lm_step(&jac, &r[..n], n, m, lambda) else { break };
                let mut zt = z;
                for j in 0..m {
                    if j < n {
                        zt.q[j] += step[j];
                    } else {
                        zt.p[j - n] += step[j];
                    }
                }
                let rt = translation_residual(h, zt, k, alpha, cfg)?;
                if norm_inf(&rt[..n]) < rn {
                    z = zt;
                    r = rt;
                    lambda = (lambda * 0.1).max(1e-12);
                } else {
                    lambda *= 10.0;
                    if lambda > 1e6 {
                        break;
                    }
                }
            }
        }
    }
    Ok(None)
}
