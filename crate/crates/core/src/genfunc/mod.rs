//! Broken-orbit generating functions sampled on grids.
//!
//! A landscape for momentum `y` and horizon `k` is a function of the free variables
//! `(x, ξ)` whose critical points are orbits of `φᵏ` starting and ending at momentum `y`,
//! with critical value `⟨y, α⟩ − A_k` (rotation `α`, average action `A_k`). The flow is cut
//! into `ℓ` pieces; consecutive pieces are glued by the coupling
//! `−Σ ⟨p_j − y, q_{j+1} − q_j⟩`, and the whole sum carries the prefactor `1/k`.
//!
//! Three reductions are available:
//! - `Single`: `φᵏ` is a graph over the momentum, one piece, no fiber.
//! - `TwistPair`: two halves, the first satisfying the twist condition; its momentum block is
//!   eliminated exactly, leaving `(x, δ)` with one negative direction.
//! - `Full`: `ℓ` type-`(q, P)` pieces with fibers `(p_j, δ_j)`.

mod cache;
mod tables;

pub use cache::LandscapeCache;
pub use tables::{
    build_step_table, build_twist_table, invert, sweep_all, Inversion, Piece, StepGenFun, Sweep, TwistTable,
    MAX_CONTRACTION,
};

use serde::{Deserialize, Serialize};

use crate::dynamics::{FlowConfig, HamiltonianSpec};
use crate::linalg::{catmull_rom, symmetric_eigenvalues};
use crate::{Error, Result};

/// One sampled coordinate axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub step: f64,
    pub nodes: usize,
    pub periodic: bool,
}

impl Axis {
    pub fn coord(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn hi(&self) -> f64 {
        if self.periodic {
            self.lo + self.nodes as f64 * self.step
        } else {
            self.coord(self.nodes - 1)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YSlice {
    Fixed(Vec<f64>),
    GraphMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Single,
    TwistPair,
    Full,
}

/// Sampled landscape `F(x, ξ)` on a product grid. Values are stored row-major with the first
/// axis slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratingLandscape {
    pub k: usize,
    pub ell: usize,
    pub y_slice: YSlice,
    pub reduction: Reduction,
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub negative_index: usize,
    /// Vertices lying on the negative end of the fiber box.
    pub boundary_tag: Vec<bool>,
}

impl GeneratingLandscape {
    pub fn from_values(axes: Vec<Axis>, values: Vec<f64>, negative_index: usize, boundary_tag: Vec<bool>) -> Self {
        GeneratingLandscape {
            k: 1,
            ell: 1 + negative_index,
            y_slice: YSlice::Fixed(vec![0.0]),
            reduction: if negative_index == 0 { Reduction::Single } else { Reduction::Full },
            axes,
            values,
            negative_index,
            boundary_tag,
        }
    }

    pub fn free_dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes).collect()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for d in (0..self.axes.len()).rev() {
            out[d] = idx % self.axes[d].nodes;
            idx /= self.axes[d].nodes;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.nodes + i)
    }

    pub fn node_point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().zip(&self.axes).map(|(&i, a)| a.coord(i)).collect()
    }

    fn check_inside(&self, point: &[f64]) -> Result<()> {
        let ok = point.len() == self.axes.len()
            && point
                .iter()
                .zip(&self.axes)
                .all(|(&x, a)| a.periodic || (x >= a.lo - 1e-12 && x <= a.hi() + 1e-12));
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfBox(point.to_vec()))
        }
    }

    /// Tensor Catmull-Rom interpolation (periodic axes wrap, bounded axes clamp).
    pub fn interpolate(&self, point: &[f64]) -> Result<f64> {
        self.check_inside(point)?;
        let dims = self.axes.len();
        let mut base = vec![0isize; dims];
        let mut weights = vec![[0.0; 4]; dims];
        for d in 0..dims {
            let a = &self.axes[d];
            let mut s = (point[d] - a.lo) / a.step;
            if a.periodic {
                s = s.rem_euclid(a.nodes as f64);
            } else {
                s = s.clamp(0.0, (a.nodes - 1) as f64);
            }
            let i0 = s.floor().min((a.nodes - 1) as f64);
            base[d] = i0 as isize;
            weights[d] = catmull_rom(s - i0).0;
        }
        let mut total = 0.0;
        let mut multi = vec![0usize; dims];
        for combo in 0..4usize.pow(dims as u32) {
            let mut w = 1.0;
            let mut c = combo;
            for d in 0..dims {
                let o = c % 4;
                c /= 4;
                w *= weights[d][o];
                let a = &self.axes[d];
                let i = base[d] + o as isize - 1;
                multi[d] = if a.periodic {
                    i.rem_euclid(a.nodes as isize) as usize
                } else {
                    i.clamp(0, a.nodes as isize - 1) as usize
                };
            }
            if w != 0.0 {
                total += w * self.values[self.flat_index(&multi)];
            }
        }
        Ok(total)
    }

    /// Central-difference gradient of the interpolant.
    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.check_inside(point)?;
        let mut g = Vec::with_capacity(point.len());
        for d in 0..point.len() {
            let a = &self.axes[d];
            let h = 0.25 * a.step;
            let mut lo = point.to_vec();
            let mut hi = point.to_vec();
            if !a.periodic {
                hi[d] = (hi[d] + h).min(a.hi());
                lo[d] = (lo[d] - h).max(a.lo);
            } else {
                hi[d] += h;
                lo[d] -= h;
            }
            g.push((self.interpolate(&hi)? - self.interpolate(&lo)?) / (hi[d] - lo[d]));
        }
        Ok(g)
    }

    /// Largest absolute sampled value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Largest absolute difference between neighbouring nodes, a modulus of continuity.
    pub fn grid_modulus(&self) -> f64 {
        let mut m: f64 = 0.0;
        let shape = self.shape();
        let mut strides = vec![1usize; shape.len()];
        for d in (0..shape.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * shape[d + 1];
        }
        for idx in 0..self.values.len() {
            let mi = self.multi_index(idx);
            for d in 0..shape.len() {
                let next = if mi[d] + 1 < shape[d] {
                    Some(idx + strides[d])
                } else if self.axes[d].periodic {
                    Some(idx + strides[d] - shape[d] * strides[d])
                } else {
                    None
                };
                if let Some(j) = next {
                    m = m.max((self.values[idx] - self.values[j]).abs());
                }
            }
        }
        m
    }
}

/// Finite-difference gradient norm of the landscape interpolant at `point`.
pub fn grad_residual(l: &GeneratingLandscape, point: &[f64]) -> Result<f64> {
    Ok(crate::linalg::norm(&l.gradient(point)?))
}

/// Construction parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeOptions {
    /// Nodes on the periodic base axis.
    pub nodes_x: usize,
    /// Base nodes used by the `Full` reduction.
    pub nodes_x_full: usize,
    /// Momentum fiber nodes per piece for the `Full` reduction (odd).
    pub fiber_nodes: usize,
    /// Stride (in base steps) of the displacement fiber for the `Full` reduction.
    pub delta_stride: usize,
    /// Momentum fiber half-width; chosen from the observed momentum change when absent.
    pub fiber_halfwidth: Option<f64>,
    /// Momentum spacing of the monotonicity sweeps.
    pub sweep_step: f64,
    /// Periodic momentum nodes in graph mode.
    pub nodes_graph_y: usize,
    /// Maximum number of grid vertices.
    pub cell_budget: usize,
    pub reduction: Option<Reduction>,
    pub flow: Option<FlowConfig>,
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        LandscapeOptions {
            nodes_x: 64,
            nodes_x_full: 32,
            fiber_nodes: 17,
            delta_stride: 2,
            fiber_halfwidth: None,
            sweep_step: 0.01,
            nodes_graph_y: 64,
            cell_budget: 600_000,
            reduction: None,
            flow: None,
        }
    }
}

impl LandscapeOptions {
    fn flow_for(&self, h: &HamiltonianSpec) -> FlowConfig {
        self.flow.unwrap_or_else(|| FlowConfig::for_spec(h))
    }
}

fn stripped(h: &HamiltonianSpec) -> HamiltonianSpec {
    let mut h0 = h.clone();
    h0.offset = 0.0;
    h0
}

fn span(ys: &[f64]) -> (f64, f64) {
    ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)))
}

fn max_momentum_change(sweeps: &[Sweep], lo: f64, hi: f64) -> f64 {
    let mut m: f64 = 0.0;
    for s in sweeps {
        for (i, &p) in s.p.iter().enumerate() {
            if p >= lo && p <= hi {
                m = m.max((s.end_p[i] - p).abs());
            }
        }
    }
    m
}

/// Landscapes `F_{k,y}` for every `y` in `ys`, sharing the piece tables.
pub fn build_landscapes(
    h: &HamiltonianSpec,
    k: usize,
    ys: &[f64],
    opts: &LandscapeOptions,
) -> Result<Vec<GeneratingLandscape>> {
    if k == 0 || ys.is_empty() {
        return Err(Error::InvalidSpec("k >= 1 and a nonempty momentum list are required".into()));
    }
    if h.n != 1 {
        return Err(Error::InvalidSpec("landscapes are sampled for n = 1".into()));
    }
    h.validate()?;
    match opts.reduction {
        Some(Reduction::Single) => single(h, k, ys, opts),
        Some(Reduction::TwistPair) => twist_pair(h, k, ys, opts),
        Some(Reduction::Full) => full(h, k as f64, 2, k, ys, opts),
        None => match single(h, k, ys, opts) {
            Err(Error::NoGeneratingFunction { .. }) => match twist_pair(h, k, ys, opts) {
                Err(Error::NoGeneratingFunction { .. }) => full(h, k as f64, 2, k, ys, opts),
                other => other,
            },
            other => other,
        },
    }
}

/// Landscape `F_{k,y}` for a single momentum.
pub fn build_landscape(h: &HamiltonianSpec, k: usize, y: f64, opts: &LandscapeOptions) -> Result<GeneratingLandscape> {
    Ok(build_landscapes(h, k, &[y], opts)?.remove(0))
}

/// `ℓ`-fold composition: `φᵏ` taken `ℓ` times, broken into `ℓ` pieces glued by the coupling
/// form, normalized per unit time.
pub fn compose_landscape(
    h: &HamiltonianSpec,
    k: usize,
    ell: usize,
    y: f64,
    opts: &LandscapeOptions,
) -> Result<GeneratingLandscape> {
    if ell == 0 {
        return Err(Error::InvalidSpec("ell must be at least 1".into()));
    }
    if ell == 1 {
        return build_landscape(h, k, y, opts);
    }
    h.validate()?;
    let mut l = full(h, (k * ell) as f64, ell, k * ell, &[y], opts)?.remove(0);
    l.k = k;
    Ok(l)
}

/// Single-piece graph landscape `S(x, y)/k` of `φᵏ` with `y` compactified on the support box.
pub fn graph_landscape(h: &HamiltonianSpec, k: usize, opts: &LandscapeOptions) -> Result<GeneratingLandscape> {
    let r = h.support_radius().ok_or(Error::UnsupportedCoercive)?;
    h.validate()?;
    let ny = opts.nodes_graph_y;
    let ys: Vec<f64> = (0..ny).map(|j| -r + 2.0 * r * j as f64 / ny as f64).collect();
    let mut l = single(h, k, &ys, opts)?;
    let nx = opts.nodes_x;
    let mut values = vec![0.0; nx * ny];
    for (j, lj) in l.iter().enumerate() {
        for i in 0..nx {
            values[i * ny + j] = lj.values[i];
        }
    }
    let mut g = l.remove(0);
    g.axes.push(Axis { lo: -r, step: 2.0 * r / ny as f64, nodes: ny, periodic: true });
    g.values = values;
    g.boundary_tag = vec![false; nx * ny];
    g.y_slice = YSlice::GraphMode;
    Ok(g)
}

fn base_axis(n: usize) -> Axis {
    Axis { lo: 0.0, step: 1.0 / n as f64, nodes: n, periodic: true }
}

fn single(h: &HamiltonianSpec, k: usize, ys: &[f64], opts: &LandscapeOptions) -> Result<Vec<GeneratingLandscape>> {
    let h0 = stripped(h);
    let piece = Piece { h: &h0, t0: 0.0, duration: k as f64, cfg: opts.flow_for(h) };
    let (lo, hi) = span(ys);
    let nx = opts.nodes_x;
    let sweeps = sweep_all(&piece, nx, Inversion::Momentum, (lo - 0.5, hi + 0.5), (lo, hi), opts.sweep_step)?;
    let table = build_step_table(&piece, &sweeps, ys)?;
    let kf = k as f64;
    Ok(ys
        .iter()
        .enumerate()
        .map(|(j, &y)| GeneratingLandscape {
            k,
            ell: 1,
            y_slice: YSlice::Fixed(vec![y]),
            reduction: Reduction::Single,
            axes: vec![base_axis(nx)],
            values: (0..nx).map(|i| table.at(i, j) / kf + h.offset).collect(),
            negative_index: 0,
            boundary_tag: vec![false; nx],
        })
        .collect())
}

fn fiber_halfwidth(opts: &LandscapeOptions, change: f64, pieces: usize) -> f64 {
    opts.fiber_halfwidth.unwrap_or_else(|| (pieces as f64 * change + 0.15).max(0.25))
}

fn twist_pair(h: &HamiltonianSpec, k: usize, ys: &[f64], opts: &LandscapeOptions) -> Result<Vec<GeneratingLandscape>> {
    let h0 = stripped(h);
    let cfg = opts.flow_for(h);
    let half = 0.5 * k as f64;
    let first = Piece { h: &h0, t0: 0.0, duration: half, cfg };
    let second = Piece { h: &h0, t0: half, duration: half, cfg };
    let (lo, hi) = span(ys);
    let nx = opts.nodes_x;
    let hx = 1.0 / nx as f64;
    let sweeps2 = sweep_all(&second, nx, Inversion::Momentum, (lo - 0.5, hi + 0.5), (lo, hi), opts.sweep_step)?;
    let change = max_momentum_change(&sweeps2, lo - 0.5, hi + 0.5);
    let w = fiber_halfwidth(opts, change, 2);
    let sweeps1 = sweep_all(
        &first,
        nx,
        Inversion::Displacement,
        (lo - w - 0.3, hi + w + 0.3),
        (f64::INFINITY, f64::NEG_INFINITY),
        opts.sweep_step,
    )?;
    let t2 = build_step_table(&second, &sweeps2, ys)?;
    // Per momentum: center and half-range of the displacement fiber, in base steps.
    let mut frames = Vec::with_capacity(ys.len());
    for &y in ys {
        let mut disp: Vec<f64> = sweeps1.iter().map(|s| s.interp(Inversion::Displacement, y)).collect();
        disp.sort_by(f64::total_cmp);
        let c = (disp[disp.len() / 2] / hx).round() as i64;
        let up = sweeps1.iter().map(|s| s.interp(Inversion::Displacement, y + w)).fold(f64::INFINITY, f64::min);
        let dn = sweeps1.iter().map(|s| s.interp(Inversion::Displacement, y - w)).fold(f64::NEG_INFINITY, f64::max);
        let dmax = ((up / hx).floor() as i64 - c).min(c - (dn / hx).ceil() as i64);
        if dmax < 2 {
            return Err(Error::NoGeneratingFunction { q: 0.0, p: y, contraction: f64::INFINITY });
        }
        frames.push((c, dmax));
    }
    let mlo = frames.iter().map(|(c, d)| c - d).min().unwrap();
    let mhi = frames.iter().map(|(c, d)| c + d).max().unwrap();
    let d_nodes: Vec<f64> = (mlo..=mhi).map(|m| m as f64 * hx).collect();
    let t1 = build_twist_table(&first, &sweeps1, &d_nodes)?;
    let nd_all = d_nodes.len();
    let kf = k as f64;
    Ok(ys
        .iter()
        .enumerate()
        .map(|(j, &y)| {
            let (c, dmax) = frames[j];
            let nd = (2 * dmax + 1) as usize;
            let mut values = Vec::with_capacity(nx * nd);
            let mut tags = Vec::with_capacity(nx * nd);
            for i in 0..nx {
                for jd in 0..nd {
                    let m = c - dmax + jd as i64;
                    let d = m as f64 * hx;
                    let a = t1.action[i * nd_all + (m - mlo) as usize];
                    let i2 = (i as i64 + m).rem_euclid(nx as i64) as usize;
                    values.push((y * d - a + t2.at(i2, j)) / kf + h.offset);
                    tags.push(jd == 0 || jd == nd - 1);
                }
            }
            GeneratingLandscape {
                k,
                ell: 2,
                y_slice: YSlice::Fixed(vec![y]),
                reduction: Reduction::TwistPair,
                axes: vec![base_axis(nx), Axis { lo: -(dmax as f64) * hx, step: hx, nodes: nd, periodic: false }],
                values,
                negative_index: 1,
                boundary_tag: tags,
            }
        })
        .collect())
}

/// Number of negative eigenvalues of the coupling form `−Σ (p_j − y) δ_j` on the fiber.
pub fn coupling_index(pieces: usize) -> usize {
    let m = 2 * (pieces - 1);
    if m == 0 {
        return 0;
    }
    let mut mat = vec![0.0; m * m];
    for j in 0..pieces - 1 {
        let (a, b) = (2 * j, 2 * j + 1);
        mat[a * m + b] = -0.5;
        mat[b * m + a] = -0.5;
    }
    symmetric_eigenvalues(&mat, m).iter().filter(|&&e| e < -1e-12).count()
}

fn full(
    h: &HamiltonianSpec,
    total: f64,
    pieces: usize,
    k_label: usize,
    ys: &[f64],
    opts: &LandscapeOptions,
) -> Result<Vec<GeneratingLandscape>> {
    let h0 = stripped(h);
    let cfg = opts.flow_for(h);
    let dur = total / pieces as f64;
    let nx = opts.nodes_x_full;
    let hx = 1.0 / nx as f64;
    let nf = opts.fiber_nodes.max(3) | 1;
    let stride = opts.delta_stride.max(1) as i64;
    let (lo, hi) = span(ys);
    let prs: Vec<Piece> = (0..pieces).map(|j| Piece { h: &h0, t0: j as f64 * dur, duration: dur, cfg }).collect();
    let mut sweeps = Vec::with_capacity(pieces);
    let mut change: f64 = 0.0;
    for pr in &prs {
        let s = sweep_all(pr, nx, Inversion::Momentum, (lo - 1.0, hi + 1.0), (lo, hi), opts.sweep_step)?;
        change = change.max(max_momentum_change(&s, lo - 1.0, hi + 1.0));
        sweeps.push(s);
    }
    let w = fiber_halfwidth(opts, change, pieces);
    for (j, pr) in prs.iter().enumerate().take(pieces - 1) {
        let (plo, phi) = (lo - w, hi + w);
        if !sweeps[j].iter().all(|s| s.covers(Inversion::Momentum, plo, phi)) {
            sweeps[j] = sweep_all(pr, nx, Inversion::Momentum, (plo - 0.3, phi + 0.3), (plo, phi), opts.sweep_step)?;
        }
    }
    let hf = 2.0 * w / (nf - 1) as f64;
    let mut out = Vec::with_capacity(ys.len());
    for &y in ys {
        let fiber_p: Vec<f64> = (0..nf).map(|a| y - w + a as f64 * hf).collect();
        let mut tables = Vec::with_capacity(pieces);
        for j in 0..pieces - 1 {
            tables.push(build_step_table(&prs[j], &sweeps[j], &fiber_p)?);
        }
        tables.push(build_step_table(&prs[pieces - 1], &sweeps[pieces - 1], &[y])?);
        let mut frames = Vec::with_capacity(pieces - 1);
        for t in tables.iter().take(pieces - 1) {
            let mid = (nf - 1) / 2;
            let mut dv: Vec<f64> = (0..nx).map(|i| t.displacement[i * nf + mid]).collect();
            dv.sort_by(f64::total_cmp);
            let c = (dv[dv.len() / 2] / hx).round() as i64;
            let spread = t.displacement.iter().fold(0.0f64, |m, &d| m.max((d - c as f64 * hx).abs()));
            let dsteps = (((spread + 0.1) / hx).ceil() as i64 + stride - 1) / stride;
            frames.push((c, dsteps.max(2)));
        }
        let mut axes = vec![base_axis(nx)];
        for &(_, ds) in &frames {
            axes.push(Axis { lo: -w, step: hf, nodes: nf, periodic: false });
            axes.push(Axis { lo: -(ds * stride) as f64 * hx, step: stride as f64 * hx, nodes: (2 * ds + 1) as usize, periodic: false });
        }
        let count: usize = axes.iter().map(|a| a.nodes).product();
        if count > opts.cell_budget {
            return Err(Error::GridBudgetExceeded { cells: count, free_vars: axes.len(), budget: opts.cell_budget });
        }
        let mut l = GeneratingLandscape {
            k: k_label,
            ell: pieces,
            y_slice: YSlice::Fixed(vec![y]),
            reduction: Reduction::Full,
            axes,
            values: Vec::with_capacity(count),
            negative_index: coupling_index(pieces),
            boundary_tag: Vec::with_capacity(count),
        };
        for idx in 0..count {
            let mi = l.multi_index(idx);
            let mut qi = mi[0] as i64;
            let mut sum = 0.0;
            let mut quad = 0.0;
            let mut on_boundary = false;
            for j in 0..pieces - 1 {
                let (c, ds) = frames[j];
                let ia = mi[1 + 2 * j];
                let id = mi[2 + 2 * j] as i64;
                on_boundary |= ia == 0 || ia == nf - 1 || id == 0 || id == 2 * ds;
                let dp = fiber_p[ia] - y;
                let dsteps = (id - ds) * stride;
                let d = (c + dsteps) as f64 * hx;
                sum += tables[j].at(qi.rem_euclid(nx as i64) as usize, ia) - dp * d;
                quad -= dp * dsteps as f64 * hx;
                qi += c + dsteps;
            }
            sum += tables[pieces - 1].at(qi.rem_euclid(nx as i64) as usize, 0);
            l.values.push(sum / total + h.offset);
            l.boundary_tag.push(on_boundary && quad < 0.0);
        }
        out.push(l);
    }
    Ok(out)
}
