//! Hamiltonian families `H(t, q, p)` on `S¹ × T*Tⁿ`, n ∈ {1, 2}.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::catmull_rom;
use crate::{Error, Result};

const TAU: f64 = 2.0 * PI;

/// Polynomial profile `T(p) = Σ c_i p^i`, applied to each momentum component and summed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PProfile {
    pub coeffs: Vec<f64>,
}

impl PProfile {
    pub fn quadratic() -> Self {
        PProfile { coeffs: vec![0.0, 0.0, 0.5] }
    }

    /// Returns `(T, T', T'')` at `p`.
    pub fn eval(&self, p: f64) -> (f64, f64, f64) {
        let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dd = dd * p + 2.0 * d;
            d = d * p + v;
            v = v * p + c;
        }
        (v, d, dd)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub mode: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Trigonometric potential `V(t,q) = (1 + a_t cos 2πt) · (c + Σ a_m cos 2πmq + b_m sin 2πmq)`,
/// summed over the components of `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QProfile {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<FourierTerm>,
    #[serde(default)]
    pub time_amplitude: f64,
}

impl QProfile {
    fn modulation(&self, t: f64) -> f64 {
        1.0 + self.time_amplitude * (TAU * t).cos()
    }

    fn eval(&self, q: f64) -> (f64, f64, f64) {
        let (mut v, mut d, mut dd) = (self.constant, 0.0, 0.0);
        for term in &self.terms {
            let w = TAU * term.mode as f64;
            let (s, c) = (w * q).sin_cos();
            v += term.cos * c + term.sin * s;
            d += w * (-term.cos * s + term.sin * c);
            dd -= w * w * (term.cos * c + term.sin * s);
        }
        (v, d, dd)
    }
}

/// Smooth bump `height · (1 + a_t sin 2πt) · (1 − r²/ρ²)³₊` centered at `(q, p)`, n = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub q: f64,
    pub p: f64,
    pub radius: f64,
    pub height: f64,
    #[serde(default)]
    pub time_amplitude: f64,
}

/// Tensor samples of `H(t, q, p)`: uniform and periodic in `t` and `q`, uniform on
/// `[p_min, p_max]` in `p`, zero beyond. Values are indexed `[it][iq][ip]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledGrid {
    pub nt: usize,
    pub nq: usize,
    pub np: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Zero,
    Integrable { profile: PProfile },
    MechanicalPendulum { amplitude: f64 },
    SeparableNonconvex { p_profile: PProfile, q_profile: QProfile },
    Bumps { bumps: Vec<Bump> },
    CustomGrid { grid: SampledGrid },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    Coercive,
    Compact { radius: f64 },
}

/// Multiplicative cutoff in `|p|`: 1 below `inner`, 0 above `outer`, C² in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    /// Returns `(χ, χ', χ'')` as functions of `s = |p|`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        if s <= self.inner {
            return (1.0, 0.0, 0.0);
        }
        if s >= self.outer {
            return (0.0, 0.0, 0.0);
        }
        let w = self.outer - self.inner;
        let u = (s - self.inner) / w;
        let step = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        let d = 30.0 * u * u * (1.0 - u) * (1.0 - u) / w;
        let dd = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (w * w);
        (1.0 - step, -d, -dd)
    }
}

/// Symplectic shear `ψ(q, p) = (q, p + a sin 2πmq)`; the Hamiltonian is evaluated as `H ∘ ψ`. n = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shear {
    pub amplitude: f64,
    pub mode: u32,
}

impl Shear {
    pub fn eval(&self, q: f64) -> (f64, f64) {
        let w = TAU * self.mode as f64;
        let (s, c) = (w * q).sin_cos();
        (self.amplitude * s, self.amplitude * w * c)
    }

    pub fn apply(&self, q: f64, p: f64) -> (f64, f64) {
        (q, p + self.eval(q).0)
    }

    pub fn invert(&self, q: f64, p: f64) -> (f64, f64) {
        (q, p - self.eval(q).0)
    }
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

/// `H(t,q,p) = scale · Π χ_j(|p'|) · family(t, q, p') + offset` with `p' = p + s(q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub family: Family,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default)]
    pub time_dependent: bool,
    pub support: Support,
    #[serde(default)]
    pub cutoffs: Vec<Cutoff>,
    #[serde(default = "one_f")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub shear: Option<Shear>,
}

impl HamiltonianSpec {
    pub fn new(family: Family, support: Support) -> Self {
        HamiltonianSpec {
            family,
            n: 1,
            time_dependent: false,
            support,
            cutoffs: Vec::new(),
            scale: 1.0,
            offset: 0.0,
            shear: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(Family::Zero, Support::Coercive)
    }

    pub fn integrable(coeffs: Vec<f64>) -> Self {
        Self::new(Family::Integrable { profile: PProfile { coeffs } }, Support::Coercive)
    }

    pub fn pendulum(amplitude: f64) -> Self {
        Self::new(Family::MechanicalPendulum { amplitude }, Support::Coercive)
    }

    pub fn bumps(bumps: Vec<Bump>) -> Self {
        let time_dependent = bumps.iter().any(|b| b.time_amplitude != 0.0);
        let radius = bumps
            .iter()
            .map(|b| b.p.abs() + b.radius)
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut spec = Self::new(Family::Bumps { bumps }, Support::Compact { radius });
        spec.time_dependent = time_dependent;
        spec
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self.offset *= factor;
        self
    }

    pub fn negated(self) -> Self {
        self.scaled(-1.0)
    }

    pub fn shifted(mut self, c: f64) -> Self {
        self.offset += c;
        self
    }

    pub fn with_shear(mut self, shear: Shear) -> Self {
        self.shear = Some(shear);
        self
    }

    pub fn is_coercive(&self) -> bool {
        matches!(self.support, Support::Coercive)
    }

    pub fn support_radius(&self) -> Option<f64> {
        match self.support {
            Support::Compact { radius } => Some(radius),
            Support::Coercive => None,
        }
    }

    /// Whether the family itself (before cutoffs) depends on time.
    pub fn family_depends_on_time(&self) -> bool {
        match &self.family {
            Family::SeparableNonconvex { q_profile, .. } => q_profile.time_amplitude != 0.0,
            Family::Bumps { bumps } => bumps.iter().any(|b| b.time_amplitude != 0.0),
            Family::CustomGrid { grid } => grid.nt > 1,
            _ => false,
        }
    }

    fn family_vanishes_outside(&self) -> Option<f64> {
        match &self.family {
            Family::Zero => Some(0.0),
            Family::Bumps { bumps } => Some(bumps.iter().map(|b| b.p.abs() + b.radius).fold(0.0, f64::max)),
            Family::CustomGrid { grid } => Some(grid.p_min.abs().max(grid.p_max.abs())),
            _ => None,
        }
    }

    /// Radius beyond which `H - offset` vanishes identically in `|p'|`, if any.
    pub fn vanishing_radius(&self) -> Option<f64> {
        let from_cut = self.cutoffs.iter().map(|c| c.outer).fold(None, |m: Option<f64>, r| {
            Some(m.map_or(r, |m| m.min(r)))
        });
        match (self.family_vanishes_outside(), from_cut) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n != 1 && self.n != 2 {
            return bad("n must be 1 or 2");
        }
        if !self.scale.is_finite() || !self.offset.is_finite() {
            return bad("scale and offset must be finite");
        }
        if self.n == 2
            && (matches!(self.family, Family::Bumps { .. } | Family::CustomGrid { .. }) || self.shear.is_some())
        {
            return bad("bumps, sampled grids and shears are only available for n = 1");
        }
        if self.family_depends_on_time() && !self.time_dependent {
            return bad("family depends on time but time_dependent is false");
        }
        for c in &self.cutoffs {
            if !(c.inner >= 0.0 && c.outer > c.inner) {
                return bad("cutoff requires 0 <= inner < outer");
            }
        }
        match &self.family {
            Family::MechanicalPendulum { amplitude } if !amplitude.is_finite() => return bad("amplitude must be finite"),
            Family::Bumps { bumps } => {
                if bumps.iter().any(|b| !(b.radius > 0.0) || !b.height.is_finite()) {
                    return bad("bump radius must be positive");
                }
            }
            Family::CustomGrid { grid } => {
                if grid.nt == 0 || grid.nq < 4 || grid.np < 4 || grid.values.len() != grid.nt * grid.nq * grid.np {
                    return bad("sampled grid needs nt >= 1, nq >= 4, np >= 4 and nt*nq*np values");
                }
                if !(grid.p_max > grid.p_min) || grid.values.iter().any(|v| !v.is_finite()) {
                    return bad("sampled grid needs p_max > p_min and finite values");
                }
            }
            Family::Integrable { profile } | Family::SeparableNonconvex { p_profile: profile, .. } => {
                if profile.coeffs.iter().any(|c| !c.is_finite()) {
                    return bad("profile coefficients must be finite");
                }
            }
            _ => {}
        }
        match self.support {
            Support::Coercive => Ok(()),
            Support::Compact { radius } => {
                if !(radius > 0.0) {
                    return bad("support radius must be positive");
                }
                if self.offset != 0.0 {
                    return bad("compactly supported Hamiltonian cannot carry a constant offset");
                }
                let shear_pad = self.shear.map_or(0.0, |s| s.amplitude.abs());
                match self.vanishing_radius() {
                    Some(r) if r + shear_pad <= radius + 1e-12 => Ok(()),
                    _ => bad("compact support radius does not contain the support of the family"),
                }
            }
        }
    }

    /// `H(t, q, p)`.
    pub fn value(&self, t: f64, q: &[f64], p: &[f64]) -> f64 {
        let mut dq = [0.0; 2];
        let mut dp = [0.0; 2];
        self.eval(t, q, p, &mut dq, &mut dp)
    }

    /// Returns `H` and fills the gradient `(∂_q H, ∂_p H)`.
    pub fn eval(&self, t: f64, q: &[f64], p: &[f64], dq: &mut [f64], dp: &mut [f64]) -> f64 {
        let n = self.n;
        let mut pp = [0.0; 2];
        pp[..n].copy_from_slice(&p[..n]);
        let mut sh_d = 0.0;
        if let Some(sh) = self.shear {
            let (s, ds) = sh.eval(q[0]);
            pp[0] += s;
            sh_d = ds;
        }
        let mut gq = [0.0; 2];
        let mut gp = [0.0; 2];
        let mut f = self.family_eval(t, q, &pp[..n], &mut gq, &mut gp);
        if !self.cutoffs.is_empty() {
            let s = pp[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
            let (mut chi, mut dchi) = (1.0, 0.0);
            for c in &self.cutoffs {
                let (v, d, _) = c.eval(s);
                dchi = dchi * v + chi * d;
                chi *= v;
            }
            for i in 0..n {
                let ds = if s > 0.0 { pp[i] / s } else { 0.0 };
                gp[i] = chi * gp[i] + dchi * ds * f;
                gq[i] *= chi;
            }
            f *= chi;
        }
        if self.shear.is_some() {
            gq[0] += gp[0] * sh_d;
        }
        for i in 0..n {
            dq[i] = self.scale * gq[i];
            dp[i] = self.scale * gp[i];
        }
        self.scale * f + self.offset
    }

    fn family_eval(&self, t: f64, q: &[f64], p: &[f64], gq: &mut [f64; 2], gp: &mut [f64; 2]) -> f64 {
        let n = self.n;
        match &self.family {
            Family::Zero => 0.0,
            Family::Integrable { profile } => {
                let mut v = 0.0;
                for i in 0..n {
                    let (a, b, _) = profile.eval(p[i]);
                    v += a;
                    gp[i] = b;
                }
                v
            }
            Family::MechanicalPendulum { amplitude } => {
                let mut v = 0.0;
                for i in 0..n {
                    let (s, c) = (TAU * q[i]).sin_cos();
                    v += 0.5 * p[i] * p[i] + amplitude * (1.0 - c);
                    gp[i] = p[i];
                    gq[i] = amplitude * TAU * s;
                }
                v
            }
            Family::SeparableNonconvex { p_profile, q_profile } => {
                let m = q_profile.modulation(t);
                let mut v = 0.0;
                for i in 0..n {
                    let (a, b, _) = p_profile.eval(p[i]);
                    let (c, d, _) = q_profile.eval(q[i]);
                    v += a + m * c;
                    gp[i] = b;
                    gq[i] = m * d;
                }
                v
            }
            Family::Bumps { bumps } => {
                let mut v = 0.0;
                for b in bumps {
                    let dqv = q[0] - b.q - (q[0] - b.q).round();
                    let dpv = p[0] - b.p;
                    let r2 = (dqv * dqv + dpv * dpv) / (b.radius * b.radius);
                    if r2 >= 1.0 {
                        continue;
                    }
                    let amp = b.height * (1.0 + b.time_amplitude * (TAU * t).sin());
                    let u = 1.0 - r2;
                    v += amp * u * u * u;
                    let d = -3.0 * amp * u * u * 2.0 / (b.radius * b.radius);
                    gq[0] += d * dqv;
                    gp[0] += d * dpv;
                }
                v
            }
            Family::CustomGrid { grid } => grid.eval(t, q[0], p[0], gq, gp),
        }
    }

    /// Separable `T(p) + V(t, q)` without cutoffs or shear.
    pub fn is_separable(&self) -> bool {
        self.cutoffs.is_empty()
            && self.shear.is_none()
            && matches!(
                self.family,
                Family::Zero
                    | Family::Integrable { .. }
                    | Family::MechanicalPendulum { .. }
                    | Family::SeparableNonconvex { .. }
            )
    }

    /// Kinetic part `(T, ∇T)` of a separable Hamiltonian, scaled.
    pub fn kinetic(&self, p: &[f64], dp: &mut [f64]) -> f64 {
        let n = self.n;
        let mut v = 0.0;
        for i in 0..n {
            let (a, b) = match &self.family {
                Family::Integrable { profile } | Family::SeparableNonconvex { p_profile: profile, .. } => {
                    let (a, b, _) = profile.eval(p[i]);
                    (a, b)
                }
                Family::MechanicalPendulum { .. } => (0.5 * p[i] * p[i], p[i]),
                _ => (0.0, 0.0),
            };
            v += a;
            dp[i] = self.scale * b;
        }
        self.scale * v
    }

    /// Potential part `(V, ∇V)` of a separable Hamiltonian, scaled, including the offset.
    pub fn potential(&self, t: f64, q: &[f64], dq: &mut [f64]) -> f64 {
        let n = self.n;
        let mut v = 0.0;
        for i in 0..n {
            let (a, b) = match &self.family {
                Family::MechanicalPendulum { amplitude } => {
                    let (s, c) = (TAU * q[i]).sin_cos();
                    (amplitude * (1.0 - c), amplitude * TAU * s)
                }
                Family::SeparableNonconvex { q_profile, .. } => {
                    let m = q_profile.modulation(t);
                    let (a, b, _) = q_profile.eval(q[i]);
                    (m * a, m * b)
                }
                _ => (0.0, 0.0),
            };
            v += a;
            dq[i] = self.scale * b;
        }
        self.scale * v + self.offset
    }

    /// True when `H - offset` vanishes on a neighbourhood of the point.
    pub fn outside_support(&self, q: &[f64], p: &[f64]) -> bool {
        if self.scale == 0.0 || matches!(self.family, Family::Zero) {
            return true;
        }
        let n = self.n;
        let mut pp = [0.0; 2];
        pp[..n].copy_from_slice(&p[..n]);
        if let Some(sh) = self.shear {
            pp[0] += sh.eval(q[0]).0;
        }
        let s = pp[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
        if self.cutoffs.iter().any(|c| s >= c.outer) {
            return true;
        }
        match &self.family {
            Family::Bumps { bumps } => bumps.iter().all(|b| {
                let dqv = q[0] - b.q - (q[0] - b.q).round();
                let dpv = pp[0] - b.p;
                dqv * dqv + dpv * dpv >= b.radius * b.radius
            }),
            Family::CustomGrid { grid } => pp[0] >= grid.p_max || pp[0] <= grid.p_min,
            _ => false,
        }
    }

    /// Extent in `|p|` of the region needing quadrature or grid coverage.
    pub fn p_extent(&self) -> Option<f64> {
        self.support_radius()
    }

    /// Appends a C² cutoff over `[radius, radius + 1]` and makes the support compact.
    pub fn truncate(&self, radius: f64) -> HamiltonianSpec {
        let mut out = self.clone();
        out.cutoffs.push(Cutoff { inner: radius, outer: radius + 1.0 });
        let shear_pad = out.shear.map_or(0.0, |s| s.amplitude.abs());
        let r = out.vanishing_radius().unwrap_or(radius + 1.0) + shear_pad;
        let r = if r > 0.0 { r } else { radius + 1.0 };
        out.support = Support::Compact { radius: r };
        out.offset = 0.0;
        out
    }

    /// Second derivatives by central differences of the analytic gradient, row-major over
    /// `(q_1..q_n, p_1..p_n)`.
    pub fn hessian(&self, t: f64, q: &[f64], p: &[f64], out: &mut [f64]) {
        let n = self.n;
        let m = 2 * n;
        let mut z = [0.0; 4];
        z[..n].copy_from_slice(&q[..n]);
        z[n..m].copy_from_slice(&p[..n]);
        for j in 0..m {
            let h = 1e-6 * (1.0 + z[j].abs());
            let mut gp = [0.0; 4];
            let mut gm = [0.0; 4];
            for (sign, g) in [(1.0, &mut gp), (-1.0, &mut gm)] {
                let mut zz = z;
                zz[j] += sign * h;
                let (a, b) = g.split_at_mut(n);
                self.eval(t, &zz[..n], &zz[n..m], a, &mut b[..n]);
            }
            for i in 0..m {
                out[i * m + j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
    }

    /// Content hash of the canonical JSON serialization.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: HamiltonianSpec = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: HamiltonianSpec = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

impl SampledGrid {
    fn at(&self, it: usize, iq: usize, ip: isize) -> f64 {
        if ip < 0 || ip >= self.np as isize {
            return 0.0;
        }
        self.values[(it * self.nq + iq) * self.np + ip as usize]
    }

    fn eval(&self, t: f64, q: f64, p: f64, gq: &mut [f64; 2], gp: &mut [f64; 2]) -> f64 {
        let hp = (self.p_max - self.p_min) / (self.np - 1) as f64;
        let sp = (p - self.p_min) / hp;
        if sp <= -1.0 || sp >= self.np as f64 {
            return 0.0;
        }
        let ip0 = sp.floor();
        let (wp, dwp) = catmull_rom(sp - ip0);
        let sq = q.rem_euclid(1.0) * self.nq as f64;
        let iq0 = sq.floor();
        let (wq, dwq) = catmull_rom(sq - iq0);
        let (wt, it0) = if self.nt > 1 {
            let st = t.rem_euclid(1.0) * self.nt as f64;
            let i = st.floor();
            (catmull_rom(st - i).0, i as isize)
        } else {
            ([0.0, 1.0, 0.0, 0.0], 0)
        };
        let (mut v, mut vq, mut vp) = (0.0, 0.0, 0.0);
        for (a, wta) in wt.iter().enumerate() {
            if *wta == 0.0 {
                continue;
            }
            let it = (it0 + a as isize - 1).rem_euclid(self.nt as isize) as usize;
            for b in 0..4 {
                let iq = (iq0 as isize + b as isize - 1).rem_euclid(self.nq as isize) as usize;
                for c in 0..4 {
                    let f = self.at(it, iq, ip0 as isize + c as isize - 1);
                    v += wta * wq[b] * wp[c] * f;
                    vq += wta * dwq[b] * wp[c] * f;
                    vp += wta * wq[b] * dwp[c] * f;
                }
            }
        }
        gq[0] = vq * self.nq as f64;
        gp[0] = vp / hp;
        v
    }

    /// Reads a tensor grid from CSV with columns `t,q,p,H`.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t: f64,
            q: f64,
            p: f64,
            #[serde(rename = "H")]
            h: f64,
        }
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for r in rdr.deserialize::<Row>() {
            rows.push(r.map_err(|e| Error::Format(e.to_string()))?);
        }
        if rows.is_empty() {
            return Err(Error::Format("empty grid".into()));
        }
        let uniq = |f: &dyn Fn(&Row) -> f64| {
            let mut v: Vec<f64> = rows.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            v
        };
        let ts = uniq(&|r| r.t);
        let qs = uniq(&|r| r.q);
        let ps = uniq(&|r| r.p);
        let (nt, nq, np) = (ts.len(), qs.len(), ps.len());
        if rows.len() != nt * nq * np {
            return Err(Error::Format(format!("grid is not a full tensor: {} rows for {nt}x{nq}x{np}", rows.len())));
        }
        let idx = |v: &[f64], x: f64| v.iter().position(|y| (y - x).abs() < 1e-12).unwrap();
        let mut values = vec![0.0; rows.len()];
        for r in &rows {
            values[(idx(&ts, r.t) * nq + idx(&qs, r.q)) * np + idx(&ps, r.p)] = r.h;
        }
        Ok(SampledGrid { nt, nq, np, p_min: ps[0], p_max: ps[np - 1], values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(spec: &HamiltonianSpec, t: f64, q: f64, p: f64) {
        let mut dq = [0.0; 1];
        let mut dp = [0.0; 1];
        spec.eval(t, &[q], &[p], &mut dq, &mut dp);
        let h = 1e-6;
        let nq = (spec.value(t, &[q + h], &[p]) - spec.value(t, &[q - h], &[p])) / (2.0 * h);
        let np = (spec.value(t, &[q], &[p + h]) - spec.value(t, &[q], &[p - h])) / (2.0 * h);
        assert!((dq[0] - nq).abs() < 1e-6, "dq {} vs {}", dq[0], nq);
        assert!((dp[0] - np).abs() < 1e-6, "dp {} vs {}", dp[0], np);
    }

    #[test]
    fn gradients_match_differences() {
        let specs = vec![
            HamiltonianSpec::pendulum(0.3),
            HamiltonianSpec::pendulum(0.3).truncate(0.8),
            HamiltonianSpec::integrable(vec![0.0, 0.1, -0.5, 0.0, 0.25]).truncate(1.0),
            HamiltonianSpec::bumps(vec![Bump { q: 0.2, p: 0.1, radius: 0.3, height: -1.0, time_amplitude: 0.5 }]),
            HamiltonianSpec::pendulum(0.2).with_shear(Shear { amplitude: 0.1, mode: 2 }),
        ];
        for s in &specs {
            for &(q, p) in &[(0.1, 0.2), (0.37, -0.9), (0.8, 1.4)] {
                fd_check(s, 0.3, q, p);
            }
        }
    }

    #[test]
    fn cutoff_is_c2_monotone() {
        let c = Cutoff { inner: 1.0, outer: 2.0 };
        let mut prev = 1.0;
        for i in 0..=100 {
            let (v, d, _) = c.eval(1.0 + i as f64 / 100.0);
            assert!(v <= prev + 1e-15 && d <= 0.0);
            prev = v;
        }
        assert_eq!(c.eval(2.0).0, 0.0);
        assert_eq!(c.eval(1.0).0, 1.0);
    }

    #[test]
    fn toml_roundtrip() {
        let s = HamiltonianSpec::pendulum(0.01).truncate(2.0);
        let txt = s.to_toml().unwrap();
        assert_eq!(HamiltonianSpec::from_toml(&txt).unwrap(), s);
    }

    #[test]
    fn validation_rejects_inconsistent_support() {
        let mut s = HamiltonianSpec::pendulum(0.01);
        s.support = Support::Compact { radius: 1.0 };
        assert!(s.validate().is_err());
        assert!(HamiltonianSpec::pendulum(0.01).truncate(1.0).validate().is_ok());
    }

    #[test]
    fn sampled_grid_interpolates_nodes() {
        let mut csv = String::from("t,q,p,H\n");
        for iq in 0..8 {
            for ip in 0..9 {
                let q = iq as f64 / 8.0;
                let p = -1.0 + ip as f64 * 0.25;
                let h = (1.0 - p * p).max(0.0).powi(3) * (TAU * q).cos();
                csv.push_str(&format!("0,{q},{p},{h}\n"));
            }
        }
        let g = SampledGrid::from_csv_str(&csv).unwrap();
        let spec = HamiltonianSpec::new(Family::CustomGrid { grid: g }, Support::Compact { radius: 1.0 });
        spec.validate().unwrap();
        let v = spec.value(0.0, &[0.25], &[0.5]);
        let exact = (1.0f64 - 0.25).powi(3) * (TAU * 0.25).cos();
        assert!((v - exact).abs() < 1e-12);
    }
}
