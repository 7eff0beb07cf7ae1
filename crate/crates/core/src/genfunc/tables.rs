//! Momentum sweeps and the per-piece generating-function tables built from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow_segment, FlowConfig, FlowEnd, HamiltonianSpec, PhasePoint};
use crate::{Error, Result};

/// Contraction factor at or above which a piece is rejected as not graph-like.
pub const MAX_CONTRACTION: f64 = 0.95;

/// Which endpoint coordinate parametrizes the piece.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inversion {
    /// Final momentum `P` (type `(q, P)` generating function).
    Momentum,
    /// Displacement `Q − q` (type `(q, Q)`, requires the twist condition).
    Displacement,
}

/// One flow piece `[t0, t0 + duration]` of `H` with the offset removed.
#[derive(Clone, Debug)]
pub struct Piece<'a> {
    pub h: &'a HamiltonianSpec,
    pub t0: f64,
    pub duration: f64,
    pub cfg: FlowConfig,
}

impl Piece<'_> {
    pub fn run(&self, q: f64, p: f64) -> Result<FlowEnd> {
        flow_segment(self.h, PhasePoint::new1(q, p), self.t0, self.duration, &self.cfg, None)
    }

    fn coord(&self, q: f64, fe: &FlowEnd, inv: Inversion) -> f64 {
        match inv {
            Inversion::Momentum => fe.end.p[0],
            Inversion::Displacement => fe.end.q[0] - q,
        }
    }
}

/// Samples `p ↦ Φ(q, p)` on a uniform momentum grid at fixed `q`.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub q: f64,
    pub p: Vec<f64>,
    pub end_p: Vec<f64>,
    pub disp: Vec<f64>,
}

impl Sweep {
    pub fn build(piece: &Piece, q: f64, lo: f64, hi: f64, step: f64) -> Result<Sweep> {
        let n = (((hi - lo) / step).ceil() as usize).max(2);
        let mut s = Sweep { q, p: Vec::with_capacity(n + 1), end_p: Vec::new(), disp: Vec::new() };
        for i in 0..=n {
            let p = lo + (hi - lo) * i as f64 / n as f64;
            let fe = piece.run(q, p)?;
            s.p.push(p);
            s.end_p.push(fe.end.p[0]);
            s.disp.push(fe.end.q[0] - q);
        }
        Ok(s)
    }

    pub fn values(&self, inv: Inversion) -> &[f64] {
        match inv {
            Inversion::Momentum => &self.end_p,
            Inversion::Displacement => &self.disp,
        }
    }

    /// `(min slope, max slope)` of the sampled coordinate.
    pub fn slopes(&self, inv: Inversion) -> (f64, f64) {
        let v = self.values(inv);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..v.len() - 1 {
            let s = (v[i + 1] - v[i]) / (self.p[i + 1] - self.p[i]);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }

    /// Contraction factor `1 − s_min/s_max` of the optimally damped fixed-point iteration.
    pub fn contraction(&self, inv: Inversion) -> f64 {
        let (lo, hi) = self.slopes(inv);
        if hi <= 0.0 {
            return f64::INFINITY;
        }
        1.0 - lo / hi
    }

    pub fn check(&self, inv: Inversion) -> Result<()> {
        let c = self.contraction(inv);
        if c >= MAX_CONTRACTION {
            let i = self.worst_index(inv);
            return Err(Error::NoGeneratingFunction { q: self.q, p: self.p[i], contraction: c });
        }
        Ok(())
    }

    fn worst_index(&self, inv: Inversion) -> usize {
        let v = self.values(inv);
        (0..v.len() - 1)
            .min_by(|&a, &b| {
                let sa = v[a + 1] - v[a];
                let sb = v[b + 1] - v[b];
                sa.total_cmp(&sb)
            })
            .unwrap_or(0)
    }

    /// Linear interpolation of the sampled coordinate at initial momentum `p`.
    pub fn interp(&self, inv: Inversion, p: f64) -> f64 {
        let v = self.values(inv);
        let n = self.p.len() - 1;
        let s = ((p - self.p[0]) / (self.p[n] - self.p[0]) * n as f64).clamp(0.0, n as f64);
        let i = (s.floor() as usize).min(n - 1);
        let w = s - i as f64;
        v[i] * (1.0 - w) + v[i + 1] * w
    }

    pub fn covers(&self, inv: Inversion, lo: f64, hi: f64) -> bool {
        let v = self.values(inv);
        v[0] <= lo && v[v.len() - 1] >= hi
    }
}

/// Finds the initial momentum whose flow hits `target` in the chosen coordinate, polished by
/// safeguarded secant steps on the exact flow.
pub fn invert(piece: &Piece, sweep: &Sweep, inv: Inversion, target: f64) -> Result<(f64, FlowEnd, f64)> {
    let v = sweep.values(inv);
    let q = sweep.q;
    let j = match v.partition_point(|&x| x < target) {
        0 => 0,
        j if j >= v.len() => v.len() - 2,
        j => j - 1,
    };
    let (mut a, mut b) = (sweep.p[j], sweep.p[j + 1]);
    let (mut fa, mut fb) = (v[j] - target, v[j + 1] - target);
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::NoGeneratingFunction { q, p: target, contraction: f64::INFINITY });
    }
    let mut p = if fb != fa { a - fa * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
    let mut best: Option<(f64, FlowEnd, f64)> = None;
    for _ in 0..60 {
        let fe = piece.run(q, p)?;
        let f = piece.coord(q, &fe, inv) - target;
        if best.as_ref().is_none_or(|bst| f.abs() < bst.2) {
            best = Some((p, fe, f.abs()));
        }
        if f.abs() <= 1e-13 * (1.0 + target.abs()) {
            break;
        }
        if f < 0.0 {
            a = p;
            fa = f;
        } else {
            b = p;
            fb = f;
        }
        if b - a <= 1e-15 * (1.0 + p.abs()) {
            break;
        }
        let sec = a - fa * (b - a) / (fb - fa);
        let mid = 0.5 * (a + b);
        p = if sec > a + 0.01 * (b - a) && sec < b - 0.01 * (b - a) { sec } else { mid };
    }
    Ok(best.expect("at least one evaluation"))
}

/// Sweeps every node `q_i = i/nq`, extending the momentum window until `[lo_t, hi_t]` is
/// covered in the chosen coordinate.
pub fn sweep_all(
    piece: &Piece,
    nq: usize,
    inv: Inversion,
    window: (f64, f64),
    targets: (f64, f64),
    step: f64,
) -> Result<Vec<Sweep>> {
    (0..nq)
        .into_par_iter()
        .map(|i| {
            let q = i as f64 / nq as f64;
            let (mut lo, mut hi) = window;
            for _ in 0..8 {
                let s = Sweep::build(piece, q, lo, hi, step)?;
                s.check(inv)?;
                if s.covers(inv, targets.0, targets.1) {
                    return Ok(s);
                }
                let w = hi - lo;
                let v = s.values(inv);
                if v[0] > targets.0 {
                    lo -= 0.5 * w;
                }
                if v[v.len() - 1] < targets.1 {
                    hi += 0.5 * w;
                }
            }
            Err(Error::NoGeneratingFunction { q, p: targets.1, contraction: f64::INFINITY })
        })
        .collect()
}

/// Tabulated type-`(q, P)` generating function `S(q, P) = P·(Q − q) − A` of one flow piece.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepGenFun {
    pub t0: f64,
    pub dt: f64,
    pub nq: usize,
    pub p_nodes: Vec<f64>,
    /// `values[iq * p_nodes.len() + ip]`.
    pub values: Vec<f64>,
    /// `Q − q = ∂S/∂P` at the nodes.
    pub displacement: Vec<f64>,
    /// `p − P = ∂S/∂q` at the nodes.
    pub momentum_change: Vec<f64>,
    pub iteration_residual: f64,
    pub contraction: f64,
}

impl StepGenFun {
    pub fn at(&self, iq: usize, ip: usize) -> f64 {
        self.values[iq.rem_euclid(self.nq) * self.p_nodes.len() + ip]
    }
}

/// Tabulated type-`(q, Q)` action `A(q, q + d)` of one twist piece on a displacement lattice.
#[derive(Clone, Debug)]
pub struct TwistTable {
    pub nq: usize,
    pub d_nodes: Vec<f64>,
    pub action: Vec<f64>,
    pub end_p: Vec<f64>,
    pub start_p: Vec<f64>,
    pub iteration_residual: f64,
    pub contraction: f64,
}

pub fn build_step_table(piece: &Piece, sweeps: &[Sweep], p_nodes: &[f64]) -> Result<StepGenFun> {
    let nq = sweeps.len();
    let contraction = sweeps.iter().map(|s| s.contraction(Inversion::Momentum)).fold(0.0, f64::max);
    let rows: Vec<Vec<(f64, f64, f64, f64)>> = sweeps
        .par_iter()
        .map(|s| {
            p_nodes
                .iter()
                .map(|&pt| {
                    let (p0, fe, res) = invert(piece, s, Inversion::Momentum, pt)?;
                    let disp = fe.end.q[0] - s.q;
                    Ok((pt * disp - fe.action, disp, p0 - pt, res))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let np = p_nodes.len();
    let mut t = StepGenFun {
        t0: piece.t0,
        dt: piece.duration,
        nq,
        p_nodes: p_nodes.to_vec(),
        values: Vec::with_capacity(nq * np),
        displacement: Vec::with_capacity(nq * np),
        momentum_change: Vec::with_capacity(nq * np),
        iteration_residual: 0.0,
        contraction,
    };
    for row in rows {
        for (s, d, m, r) in row {
            t.values.push(s);
            t.displacement.push(d);
            t.momentum_change.push(m);
            t.iteration_residual = t.iteration_residual.max(r);
        }
    }
    Ok(t)
}

pub fn build_twist_table(piece: &Piece, sweeps: &[Sweep], d_nodes: &[f64]) -> Result<TwistTable> {
    let nq = sweeps.len();
    let contraction = sweeps.iter().map(|s| s.contraction(Inversion::Displacement)).fold(0.0, f64::max);
    let rows: Vec<Vec<(f64, f64, f64, f64)>> = sweeps
        .par_iter()
        .map(|s| {
            d_nodes
                .iter()
                .map(|&d| {
                    let (p0, fe, res) = invert(piece, s, Inversion::Displacement, d)?;
                    Ok((fe.action, fe.end.p[0], p0, res))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut t = TwistTable {
        nq,
        d_nodes: d_nodes.to_vec(),
        action: Vec::new(),
        end_p: Vec::new(),
        start_p: Vec::new(),
        iteration_residual: 0.0,
        contraction,
    };
    for row in rows {
        for (a, pe, ps, r) in row {
            t.action.push(a);
            t.end_p.push(pe);
            t.start_p.push(ps);
            t.iteration_residual = t.iteration_residual.max(r);
        }
    }
    Ok(t)
}
