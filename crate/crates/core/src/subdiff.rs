//! Non-smooth differentials of sampled functions on boxes and tori of dimension one or two.
//!
//! A sampled function is a [`GeneratingLandscape`] with no negative directions. The Clarke
//! differential is that of the piecewise-linear interpolant (Freudenthal triangulation in two
//! dimensions). The strong differential collects slopes `α` for which `f − ⟨α,·⟩` has a
//! persistent local homology change at the base point, detected by sublevel persistence on a
//! small window. Locally flat witnesses are reported as degenerate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::genfunc::{Axis, GeneratingLandscape};
use crate::selector::cubical::{reduce, Cell, Filtration};
use crate::{Error, Result};

const EPS: f64 = 1e-9;

/// Convex polytope (or detected point set) of covectors attached to a base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdiffPolytope {
    pub vertices: Vec<Vec<f64>>,
    pub at: Vec<f64>,
    /// Some detection came from a locally constant witness.
    #[serde(default)]
    pub degenerate: bool,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Closest point of the segment `[a, b]` to the origin.
fn segment_min_norm(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = sub(b, a);
    let dd = dot(&d, &d);
    let t = if dd > 0.0 { (-dot(a, &d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    a.iter().zip(&d).map(|(x, y)| x + t * y).collect()
}

/// Vertices of the convex hull in convex position (interval ends in 1D, counter-clockwise in 2D).
pub fn convex_hull(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if points.is_empty() {
        return Vec::new();
    }
    match points[0].len() {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo <= EPS * (1.0 + hi.abs()) {
                vec![vec![lo]]
            } else {
                vec![vec![lo], vec![hi]]
            }
        }
        _ => {
            let mut pts = points.to_vec();
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= EPS && (a[1] - b[1]).abs() <= EPS);
            if pts.len() < 3 {
                return pts;
            }
            let mut hull: Vec<Vec<f64>> = Vec::with_capacity(2 * pts.len());
            for pass in 0..2 {
                let start = hull.len();
                let iter: Box<dyn Iterator<Item = &Vec<f64>>> =
                    if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
                for p in iter {
                    while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= EPS * EPS {
                        hull.pop();
                    }
                    hull.push(p.clone());
                }
                hull.pop();
            }
            if hull.len() < 2 {
                // Collinear input: keep the extreme pair.
                return vec![pts[0].clone(), pts[pts.len() - 1].clone()];
            }
            hull
        }
    }
}

impl SubdiffPolytope {
    pub fn dim(&self) -> usize {
        self.at.len()
    }

    /// Minimum-norm element of the convex hull of the vertices.
    pub fn min_norm(&self) -> Vec<f64> {
        let hull = convex_hull(&self.vertices);
        match (self.dim(), hull.len()) {
            (_, 0) => vec![0.0; self.dim()],
            (_, 1) => hull[0].clone(),
            (1, _) => vec![0.0f64.clamp(hull[0][0], hull[1][0])],
            (_, 2) => segment_min_norm(&hull[0], &hull[1]),
            _ => {
                let o = [0.0, 0.0];
                let inside = (0..hull.len()).all(|i| cross(&hull[i], &hull[(i + 1) % hull.len()], &o) >= -EPS);
                if inside {
                    return vec![0.0, 0.0];
                }
                (0..hull.len())
                    .map(|i| segment_min_norm(&hull[i], &hull[(i + 1) % hull.len()]))
                    .min_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
                    .unwrap()
            }
        }
    }

    /// Euclidean distance from `point` to the convex hull of the vertices.
    pub fn distance_to(&self, point: &[f64]) -> f64 {
        let shifted = SubdiffPolytope {
            vertices: self.vertices.iter().map(|v| sub(v, point)).collect(),
            at: self.at.clone(),
            degenerate: false,
        };
        let m = shifted.min_norm();
        dot(&m, &m).sqrt()
    }

    /// Whether every vertex of `other` lies within `tol` of this hull.
    pub fn contains(&self, other: &SubdiffPolytope, tol: f64) -> bool {
        other.vertices.iter().all(|v| self.distance_to(v) <= tol)
    }

    pub fn scaled(&self, s: f64) -> SubdiffPolytope {
        SubdiffPolytope {
            vertices: convex_hull(&self.vertices.iter().map(|v| v.iter().map(|x| s * x).collect()).collect::<Vec<_>>()),
            at: self.at.clone(),
            degenerate: self.degenerate,
        }
    }

    pub fn minkowski_sum(&self, other: &SubdiffPolytope) -> SubdiffPolytope {
        let mut pts = Vec::with_capacity(self.vertices.len() * other.vertices.len());
        for a in &self.vertices {
            for b in &other.vertices {
                pts.push(a.iter().zip(b).map(|(x, y)| x + y).collect());
            }
        }
        SubdiffPolytope { vertices: convex_hull(&pts), at: self.at.clone(), degenerate: false }
    }
}

/// Samples `f` on the tensor grid of `axes` as a function without negative directions.
pub fn sample_function(axes: Vec<Axis>, f: impl Fn(&[f64]) -> f64 + Sync) -> GeneratingLandscape {
    let total: usize = axes.iter().map(|a| a.nodes).product();
    let mut l = GeneratingLandscape::from_values(axes, vec![0.0; total], 0, vec![false; total]);
    let values: Vec<f64> = (0..total).into_par_iter().map(|i| f(&l.node_point(i))).collect();
    l.values = values;
    l
}

fn check_dim(f: &GeneratingLandscape) -> Result<()> {
    if f.free_dim() == 0 || f.free_dim() > 2 {
        return Err(Error::InvalidSpec(format!("sampled functions of dimension 1 or 2 only, got {}", f.free_dim())));
    }
    Ok(())
}

/// Candidate base-cell indices along one axis for a point at grid coordinate `s`.
fn cells_along(a: &Axis, x: f64) -> Option<Vec<isize>> {
    let s = (x - a.lo) / a.step;
    let n = a.nodes as f64;
    if !a.periodic && (s < EPS || s > n - 1.0 - EPS) {
        return None;
    }
    let lo = (s - EPS).floor() as isize;
    let hi = (s + EPS).floor() as isize;
    let mut out = vec![lo];
    if hi != lo {
        out.push(hi);
    }
    Some(out)
}

fn sample(f: &GeneratingLandscape, idx: &[isize]) -> f64 {
    let m: Vec<usize> = idx.iter().zip(&f.axes).map(|(&i, a)| i.rem_euclid(a.nodes as isize) as usize).collect();
    f.values[f.flat_index(&m)]
}

/// Clarke differential of the piecewise-linear interpolant at `x`: the convex hull of the
/// gradients of all simplices whose closure contains `x`.
pub fn clarke_pl(f: &GeneratingLandscape, x: &[f64]) -> Result<SubdiffPolytope> {
    check_dim(f)?;
    let mut cells = Vec::new();
    for (a, &xi) in f.axes.iter().zip(x) {
        cells.push(cells_along(a, xi).ok_or_else(|| Error::BoundaryPoint(x.to_vec()))?);
    }
    let mut grads = Vec::new();
    if f.free_dim() == 1 {
        let h = f.axes[0].step;
        for &i in &cells[0] {
            grads.push(vec![(sample(f, &[i + 1]) - sample(f, &[i])) / h]);
        }
    } else {
        let (hx, hy) = (f.axes[0].step, f.axes[1].step);
        for &i in &cells[0] {
            for &j in &cells[1] {
                let u = (x[0] - f.axes[0].lo) / hx - i as f64;
                let v = (x[1] - f.axes[1].lo) / hy - j as f64;
                let (f00, f10, f01, f11) =
                    (sample(f, &[i, j]), sample(f, &[i + 1, j]), sample(f, &[i, j + 1]), sample(f, &[i + 1, j + 1]));
                if u >= v - EPS {
                    grads.push(vec![(f10 - f00) / hx, (f11 - f10) / hy]);
                }
                if v >= u - EPS {
                    grads.push(vec![(f11 - f01) / hx, (f01 - f00) / hy]);
                }
            }
        }
    }
    Ok(SubdiffPolytope { vertices: convex_hull(&grads), at: x.to_vec(), degenerate: false })
}

/// Minimum-norm element of the Clarke differential.
pub fn lambda(f: &GeneratingLandscape, x: &[f64]) -> Result<Vec<f64>> {
    Ok(clarke_pl(f, x)?.min_norm())
}

/// Half-width, in grid steps, of the window used by the local persistence test.
pub const STRONG_WINDOW_STEPS: usize = 4;

/// Window of `f − ⟨α,·⟩` around the node nearest to `x`, with bounded axes in unwrapped
/// coordinates. Returns the window and the window coordinates of the centre node.
fn tilted_window(f: &GeneratingLandscape, x: &[f64], alpha: &[f64], half: usize) -> Option<(GeneratingLandscape, Vec<f64>)> {
    let dims = f.free_dim();
    let mut ranges = Vec::with_capacity(dims);
    let mut axes = Vec::with_capacity(dims);
    let mut centre = Vec::with_capacity(dims);
    for (d, a) in f.axes.iter().enumerate() {
        let c = ((x[d] - a.lo) / a.step).round() as isize;
        let (lo, hi) = if a.periodic {
            let half = half.min((a.nodes - 1) / 2) as isize;
            (c - half, c + half)
        } else {
            if c < 0 || c >= a.nodes as isize {
                return None;
            }
            ((c - half as isize).max(0), (c + half as isize).min(a.nodes as isize - 1))
        };
        ranges.push((lo, hi));
        axes.push(Axis { lo: a.lo + lo as f64 * a.step, step: a.step, nodes: (hi - lo + 1) as usize, periodic: false });
        centre.push(a.lo + c as f64 * a.step);
    }
    let total: usize = axes.iter().map(|a| a.nodes).product();
    let mut values = Vec::with_capacity(total);
    let mut idx = vec![0isize; dims];
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..dims).rev() {
            idx[d] = ranges[d].0 + (rem % axes[d].nodes) as isize;
            rem /= axes[d].nodes;
        }
        let tilt: f64 = (0..dims).map(|d| alpha[d] * (f.axes[d].lo + idx[d] as f64 * f.axes[d].step)).sum();
        values.push(sample(f, &idx) - tilt);
    }
    Some((GeneratingLandscape::from_values(axes, values, 0, vec![false; total]), centre))
}

/// Lower-star filtration of the Freudenthal triangulation of a window (the triangulation of the
/// piecewise-linear interpolant). Cubical 4-connectivity would create spurious extrema along
/// diagonal ridges.
fn freudenthal_filtration(w: &GeneratingLandscape) -> Filtration {
    let nx = w.axes[0].nodes;
    let ny = if w.free_dim() == 2 { w.axes[1].nodes } else { 1 };
    let v = |i: usize, j: usize| i * ny + j;
    // Vertex ids coincide with flat window indices; faces are listed by simplex id.
    let mut simplices: Vec<Vec<usize>> = (0..nx * ny).map(|i| vec![i]).collect();
    let mut faces: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
    let mut edge_id = std::collections::HashMap::new();
    for i in 0..nx {
        for j in 0..ny {
            let ends = [(i + 1 < nx, v(i + 1, j)), (j + 1 < ny, v(i, j + 1)), (i + 1 < nx && j + 1 < ny, v(i + 1, (j + 1).min(ny - 1)))];
            for (present, other) in ends {
                if present {
                    edge_id.insert((v(i, j), other), simplices.len());
                    simplices.push(vec![v(i, j), other]);
                    faces.push(vec![v(i, j), other]);
                }
            }
        }
    }
    for i in 0..nx.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            for tri in [[v(i, j), v(i + 1, j), v(i + 1, j + 1)], [v(i, j), v(i, j + 1), v(i + 1, j + 1)]] {
                faces.push(vec![edge_id[&(tri[0], tri[1])], edge_id[&(tri[1], tri[2])], edge_id[&(tri[0], tri[2])]]);
                simplices.push(tri.to_vec());
            }
        }
    }
    let cells: Vec<Cell> = simplices
        .iter()
        .enumerate()
        .map(|(id, s)| {
            let vertex = *s.iter().max_by(|a, b| w.values[**a].total_cmp(&w.values[**b])).unwrap();
            Cell { value: w.values[vertex], dim: s.len() - 1, vertex, id }
        })
        .collect();
    let mut order = cells.clone();
    order.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.dim.cmp(&b.dim)).then(a.id.cmp(&b.id)));
    let mut pos = vec![0u32; order.len()];
    for (k, c) in order.iter().enumerate() {
        pos[c.id] = k as u32;
    }
    let boundary = order
        .iter()
        .map(|c| {
            let mut col: Vec<u32> = faces[c.id].iter().map(|&f| pos[f]).collect();
            col.sort_unstable();
            col
        })
        .collect();
    let max_dim = order.iter().map(|c| c.dim).max().unwrap_or(0);
    Filtration { cells: order, boundary, max_dim }
}

/// Whether `x` is a strong critical point of `f − ⟨α,·⟩`, and whether the detection is
/// degenerate (flat witness).
fn strong_at(f: &GeneratingLandscape, x: &[f64], alpha: &[f64], half: usize) -> Option<bool> {
    let (w, centre) = tilted_window(f, x, alpha, half)?;
    let scale = 1.0 + w.sup_norm();
    let tol = 1e-12 * scale;
    let (lo, hi) = w.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= tol {
        return Some(true);
    }
    let near = |i: usize| {
        let p = w.node_point(i);
        p.iter().zip(&centre).zip(&w.axes).all(|((a, b), ax)| (a - b).abs() <= ax.step * (1.0 + EPS))
    };
    let interior = |i: usize| {
        let m = w.multi_index(i);
        m.iter().zip(&w.axes).all(|(&k, a)| k > 0 && k + 1 < a.nodes)
    };
    // Neighbours in the triangulation (axis steps and the main diagonal).
    let neighbours = |i: usize| -> Vec<usize> {
        let m = w.multi_index(i);
        let steps: &[[isize; 2]] = &[[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1]];
        let mut out = Vec::new();
        'step: for d in steps {
            let mut n = m.clone();
            for k in 0..m.len() {
                let v = m[k] as isize + d[k];
                if v < 0 || v >= w.axes[k].nodes as isize {
                    continue 'step;
                }
                n[k] = v as usize;
            }
            if n != m && !out.contains(&w.flat_index(&n)) {
                out.push(w.flat_index(&n));
            }
        }
        out
    };
    let level = |i: usize, j: usize| (w.values[i] - w.values[j]).abs() <= tol;
    // Witnesses on a plateau stand for the whole plateau; such detections are degenerate.
    let plateau = |i: usize| -> Vec<usize> {
        let mut seen = vec![i];
        let mut k = 0;
        while k < seen.len() {
            for n in neighbours(seen[k]) {
                if level(n, i) && !seen.contains(&n) {
                    seen.push(n);
                }
            }
            k += 1;
        }
        seen
    };
    let filt = freudenthal_filtration(&w);
    let mut found = None;
    for (b, d) in reduce(&filt) {
        let cb = filt.cells[b];
        let mut witnesses = vec![cb.vertex];
        if let Some(d) = d {
            let cd = filt.cells[d];
            if cd.value - cb.value <= tol {
                continue;
            }
            witnesses.push(cd.vertex);
        }
        for i in witnesses {
            let flat = plateau(i);
            if flat.iter().any(|&j| interior(j) && near(j)) {
                found = Some(found.unwrap_or(false) || flat.len() > 1);
            }
        }
    }
    found
}

/// Slopes `α` from `alphas` for which `f − ⟨α,·⟩` has a strong critical point at `x`.
pub fn strong_diff(f: &GeneratingLandscape, x: &[f64], alphas: &[Vec<f64>]) -> SubdiffPolytope {
    strong_diff_window(f, x, alphas, STRONG_WINDOW_STEPS)
}

pub fn strong_diff_window(f: &GeneratingLandscape, x: &[f64], alphas: &[Vec<f64>], half: usize) -> SubdiffPolytope {
    let hits: Vec<(Vec<f64>, bool)> =
        alphas.par_iter().filter_map(|a| strong_at(f, x, a, half).map(|deg| (a.clone(), deg))).collect();
    let degenerate = hits.iter().any(|h| h.1);
    SubdiffPolytope { vertices: hits.into_iter().map(|h| h.0).collect(), at: x.to_vec(), degenerate }
}

fn directions(n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        (0..8)
            .map(|i| {
                let th = std::f64::consts::PI * i as f64 / 4.0;
                vec![th.cos(), th.sin()]
            })
            .collect()
    }
}

/// Limits of strong differentials at points `x + r·e` along the radius schedule, for unit
/// directions `e`. Candidate slopes are `alphas` together with the Clarke vertices at each sample
/// point. The result gathers the detections at the smallest radius.
pub fn limit_diff(f: &GeneratingLandscape, x: &[f64], radii: &[f64], alphas: &[Vec<f64>]) -> Result<SubdiffPolytope> {
    check_dim(f)?;
    let r = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidSpec("limit_diff needs a positive radius".into()));
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut degenerate = false;
    for e in directions(f.free_dim()) {
        let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + r * b).collect();
        let Ok(c) = clarke_pl(f, &y) else { continue };
        let mut cands = alphas.to_vec();
        cands.extend(c.vertices.iter().cloned());
        let s = strong_diff(f, &y, &cands);
        degenerate |= s.degenerate;
        for v in s.vertices {
            if !out.iter().any(|w| sub(w, &v).iter().all(|d| d.abs() <= 1e-9)) {
                out.push(v);
            }
        }
    }
    Ok(SubdiffPolytope { vertices: out, at: x.to_vec(), degenerate })
}

/// Outcome of one slope in the ball-inclusion check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRow {
    pub alpha: Vec<f64>,
    pub in_ball: bool,
    pub certified: bool,
    pub witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallReport {
    pub sup_norm: f64,
    pub radius: f64,
    pub rows: Vec<BallRow>,
}

impl BallReport {
    /// Slopes inside the ball that could not be certified.
    pub fn failures(&self) -> Vec<&BallRow> {
        self.rows.iter().filter(|r| r.in_ball && !r.certified).collect()
    }

    pub fn to_csv(&self) -> String {
        let n = self.rows.first().map_or(1, |r| r.alpha.len());
        let mut s = String::new();
        let cols: Vec<String> = (0..n)
            .map(|i| format!("alpha_{i}"))
            .chain(["in_ball".into(), "certified".into()])
            .chain((0..n).map(|i| format!("witness_{i}")))
            .collect();
        s.push_str(&cols.join(","));
        s.push('\n');
        for r in &self.rows {
            let mut f: Vec<String> = r.alpha.iter().map(|a| format!("{a:.10}")).collect();
            f.push(r.in_ball.to_string());
            f.push(r.certified.to_string());
            match &r.witness {
                Some(w) => f.extend(w.iter().map(|x| format!("{x:.10}"))),
                None => f.extend((0..n).map(|_| String::new())),
            }
            s.push_str(&f.join(","));
            s.push('\n');
        }
        s
    }
}

/// Searches a global extremum of `f − ⟨α,·⟩` off the box boundary that is a strong critical point.
pub fn certify_alpha(f: &GeneratingLandscape, alpha: &[f64]) -> Option<Vec<f64>> {
    let tilt = |i: usize| {
        let p = f.node_point(i);
        f.values[i] - dot(alpha, &p)
    };
    let n = f.len();
    let (mut imin, mut imax) = (0, 0);
    for i in 1..n {
        if tilt(i) < tilt(imin) {
            imin = i;
        }
        if tilt(i) > tilt(imax) {
            imax = i;
        }
    }
    for i in [imin, imax] {
        let p = f.node_point(i);
        let interior = p.iter().zip(&f.axes).all(|(&x, a)| a.periodic || (x > a.lo + 0.5 * a.step && x < a.hi() - 0.5 * a.step));
        if interior && strong_at(f, &p, alpha, STRONG_WINDOW_STEPS).is_some() {
            return Some(p);
        }
    }
    None
}

/// For every slope on a grid of the ball of radius `‖f‖_∞ / 4` (plus `extra` slopes), looks for a
/// point where the slope lies in the strong differential.
pub fn ball_inclusion_check(f: &GeneratingLandscape, resolution: usize, extra: &[Vec<f64>]) -> Result<BallReport> {
    check_dim(f)?;
    let sup = f.sup_norm();
    let (lo, hi) = f.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= 1e-14 * (1.0 + sup) {
        return Err(Error::ConstantFunction);
    }
    let radius = sup / 4.0;
    let n = f.free_dim();
    let m = resolution.max(2);
    let mut alphas: Vec<Vec<f64>> = Vec::new();
    let coord = |i: usize| -radius + 2.0 * radius * i as f64 / (m - 1) as f64;
    if n == 1 {
        alphas.extend((0..m).map(|i| vec![coord(i)]));
    } else {
        for i in 0..m {
            for j in 0..m {
                let a = vec![coord(i), coord(j)];
                if dot(&a, &a).sqrt() <= radius * (1.0 + 1e-12) {
                    alphas.push(a);
                }
            }
        }
    }
    alphas.extend(extra.iter().cloned());
    let rows = alphas
        .par_iter()
        .map(|a| {
            let witness = certify_alpha(f, a);
            BallRow {
                alpha: a.clone(),
                in_ball: dot(a, a).sqrt() <= radius * (1.0 + 1e-12),
                certified: witness.is_some(),
                witness,
            }
        })
        .collect();
    Ok(BallReport { sup_norm: sup, radius, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(lo: f64, hi: f64, nodes: usize) -> Axis {
        Axis { lo, step: (hi - lo) / (nodes - 1) as f64, nodes, periodic: false }
    }

    #[test]
    fn clarke_abs() {
        let f = sample_function(vec![line(-1.0, 1.0, 41)], |x| x[0].abs());
        let c = clarke_pl(&f, &[0.0]).unwrap();
        assert_eq!(c.vertices.len(), 2);
        assert!((c.vertices[0][0] + 1.0).abs() < 1e-12 && (c.vertices[1][0] - 1.0).abs() < 1e-12);
        assert_eq!(c.min_norm(), vec![0.0]);
        let c = clarke_pl(&f, &[0.33]).unwrap();
        assert_eq!(c.vertices.len(), 1);
        assert!((c.vertices[0][0] - 1.0).abs() < 1e-12);
        assert!(matches!(clarke_pl(&f, &[1.0]), Err(Error::BoundaryPoint(_))));
    }

    #[test]
    fn clarke_cone_2d() {
        let f = sample_function(vec![line(-1.0, 1.0, 21), line(-1.0, 1.0, 21)], |x| x[0].abs() + 0.5 * x[1].abs());
        let c = clarke_pl(&f, &[0.0, 0.0]).unwrap();
        assert_eq!(c.vertices.len(), 4);
        assert!(c.distance_to(&[0.0, 0.0]) < 1e-12);
        assert!(c.distance_to(&[1.0, 0.5]) < 1e-12);
        assert!((c.distance_to(&[2.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_abs_and_smooth() {
        let f = sample_function(vec![line(-1.0, 1.0, 41)], |x| x[0].abs());
        let alphas: Vec<Vec<f64>> = (-9..=9).map(|i| vec![i as f64 / 10.0]).collect();
        assert_eq!(strong_diff(&f, &[0.0], &alphas).vertices.len(), alphas.len());
        let g = sample_function(vec![line(-1.0, 1.0, 201)], |x| (2.0 * x[0]).sin());
        let x: f64 = 0.3;
        let slope = 2.0 * (2.0 * x).cos();
        let alphas: Vec<Vec<f64>> = (-40..=40).map(|i| vec![slope + i as f64 * 0.01]).collect();
        let s = strong_diff(&g, &[x], &alphas);
        assert!(!s.vertices.is_empty());
        assert!(s.vertices.iter().all(|a| (a[0] - slope).abs() <= 0.05), "{:?}", s.vertices);
    }

    #[test]
    fn zero_is_degenerate() {
        let f = sample_function(vec![line(-1.0, 1.0, 21)], |_| 0.0);
        let s = strong_diff(&f, &[0.1], &[vec![0.0]]);
        assert_eq!(s.vertices, vec![vec![0.0]]);
        assert!(s.degenerate);
        assert!(matches!(ball_inclusion_check(&f, 5, &[]), Err(Error::ConstantFunction)));
    }

    #[test]
    fn limit_of_abs() {
        let f = sample_function(vec![line(-1.0, 1.0, 81)], |x| x[0].abs());
        let d = limit_diff(&f, &[0.0], &[0.2, 0.1], &[]).unwrap();
        let mut v: Vec<f64> = d.vertices.iter().map(|a| a[0]).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(v.len(), 2);
        assert!((v[0] + 1.0).abs() < 1e-9 && (v[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_bump_ball() {
        let bump = |x: f64| if x.abs() < 1.0 { -(1.0 - x * x).powi(3) } else { 0.0 };
        let f = sample_function(vec![line(-2.0, 2.0, 401)], |x| bump(x[0]));
        let r = ball_inclusion_check(&f, 11, &[vec![0.24999], vec![0.5]]).unwrap();
        assert!(r.failures().is_empty());
        let row = r.rows.iter().find(|r| r.alpha == vec![0.24999]).unwrap();
        assert!(row.certified && row.in_ball);
        assert!(!r.rows.last().unwrap().in_ball);
    }
}
