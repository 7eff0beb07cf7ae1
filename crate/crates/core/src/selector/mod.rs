//! Min-max selectors of sampled landscapes via relative sublevel persistence (ℤ/2
//! coefficients), homogenized tables `h_k`, capacities and strong critical values.

mod bottleneck;
pub mod cubical;

pub use bottleneck::bottleneck_distance;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::HamiltonianSpec;
use crate::genfunc::{build_landscapes, graph_landscape, GeneratingLandscape, LandscapeCache, LandscapeOptions, YSlice};
use crate::linalg::{norm_inf, solve_in_place};
use crate::{Error, Result};

/// Largest free dimension handled by the persistence backend.
pub const MAX_FREE_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub birth: f64,
    /// `+∞` for essential classes.
    pub death: f64,
    /// Homological degree after subtracting the negative index.
    pub degree: i64,
    pub birth_point: Vec<f64>,
    pub death_point: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub pairs: Vec<PersistencePair>,
    pub relative_to: String,
    pub negative_index: usize,
}

impl PersistenceDiagram {
    pub fn essential(&self, degree: i64) -> Vec<&PersistencePair> {
        self.pairs.iter().filter(|p| p.degree == degree && !p.death.is_finite()).collect()
    }

    /// Plot-ready `(birth, death, degree)` triples.
    pub fn triples(&self) -> Vec<(f64, f64, i64)> {
        self.pairs.iter().map(|p| (p.birth, p.death, p.degree)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("birth,death,degree\n");
        for (b, d, g) in self.triples() {
            s.push_str(&format!("{b:.12e},{},{g}\n", if d.is_finite() { format!("{d:.12e}") } else { "inf".into() }));
        }
        s
    }
}

/// Persistence of the cubical sublevel filtration relative to the tagged negative end.
pub fn sublevel_persistence(l: &GeneratingLandscape) -> Result<PersistenceDiagram> {
    if l.free_dim() > MAX_FREE_DIM {
        return Err(Error::GridBudgetExceeded {
            cells: cubical::cell_count(l),
            free_vars: l.free_dim(),
            budget: MAX_FREE_DIM,
        });
    }
    let f = cubical::build_filtration(l);
    let raw = cubical::reduce(&f);
    let shift = l.negative_index as i64;
    let mut pairs = Vec::with_capacity(raw.len());
    for (b, d) in raw {
        let cb = f.cells[b];
        match d {
            Some(d) => {
                let cd = f.cells[d];
                if cd.value > cb.value {
                    pairs.push(PersistencePair {
                        birth: cb.value,
                        death: cd.value,
                        degree: cb.dim as i64 - shift,
                        birth_point: l.node_point(cb.vertex),
                        death_point: Some(l.node_point(cd.vertex)),
                    });
                }
            }
            None => pairs.push(PersistencePair {
                birth: cb.value,
                death: f64::INFINITY,
                degree: cb.dim as i64 - shift,
                birth_point: l.node_point(cb.vertex),
                death_point: None,
            }),
        }
    }
    let relative_to = if l.boundary_tag.iter().any(|&t| t) { "negative_end" } else { "none" };
    Ok(PersistenceDiagram { pairs, relative_to: relative_to.into(), negative_index: l.negative_index })
}

/// Cohomology class of the base torus selecting the min-max.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    /// Unit class (degree 0).
    Unit,
    /// Fundamental class (top degree of the base).
    Fundamental,
}

/// Dimension of the base over which the landscape is a fibration.
pub fn base_dim(l: &GeneratingLandscape) -> usize {
    match l.y_slice {
        YSlice::GraphMode => 2,
        YSlice::Fixed(_) => 1,
    }
}

fn class_degree(l: &GeneratingLandscape, class: Class) -> i64 {
    match class {
        Class::Unit => 0,
        Class::Fundamental => base_dim(l) as i64,
    }
}

fn find_class<'a>(l: &GeneratingLandscape, d: &'a PersistenceDiagram, class: Class) -> Result<&'a PersistencePair> {
    let degree = class_degree(l, class);
    d.essential(degree)
        .into_iter()
        .min_by(|a, b| a.birth.total_cmp(&b.birth))
        .ok_or(Error::ClassNotFound { degree: degree as usize + l.negative_index, negative_index: l.negative_index })
}

/// Birth value of the essential class (a sampled value of the landscape).
pub fn minimax(l: &GeneratingLandscape, class: Class) -> Result<f64> {
    let d = sublevel_persistence(l)?;
    Ok(find_class(l, &d, class)?.birth)
}

/// Raw min-max value together with the node where it is attained.
pub fn minimax_located(l: &GeneratingLandscape, class: Class) -> Result<(f64, Vec<f64>)> {
    let d = sublevel_persistence(l)?;
    let p = find_class(l, &d, class)?;
    Ok((p.birth, p.birth_point.clone()))
}

/// Newton refinement of a critical point of the landscape interpolant near `start`. Returns
/// `None` if the iteration leaves the neighbouring grid cells.
pub fn polish_critical(l: &GeneratingLandscape, start: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = start.len();
    let mut x = start.to_vec();
    for _ in 0..30 {
        let g = l.gradient(&x).ok()?;
        let mut hess = vec![0.0; n * n];
        for j in 0..n {
            let a = &l.axes[j];
            let h = 0.25 * a.step;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            if !a.periodic && (xp[j] > a.hi() || xm[j] < a.lo) {
                return None;
            }
            let gp = l.gradient(&xp).ok()?;
            let gm = l.gradient(&xm).ok()?;
            for i in 0..n {
                hess[i * n + j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (hess[i * n + j] + hess[j * n + i]);
                hess[i * n + j] = s;
                hess[j * n + i] = s;
            }
        }
        let mut step: Vec<f64> = g.iter().map(|v| -v).collect();
        if norm_inf(&g) < 1e-13 || !solve_in_place(&mut hess, &mut step, n) {
            break;
        }
        let mut small = true;
        for j in 0..n {
            let lim = l.axes[j].step;
            step[j] = step[j].clamp(-lim, lim);
            x[j] += step[j];
            small &= step[j].abs() < 1e-12 * lim;
        }
        if small {
            break;
        }
    }
    for j in 0..n {
        if (x[j] - start[j]).abs() > 1.5 * l.axes[j].step {
            return None;
        }
    }
    let v = l.interpolate(&x).ok()?;
    Some((x, v))
}

/// `p ↦ h_k(p)` on a momentum grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorTable {
    pub k: usize,
    pub p_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Sampled (unrefined) min-max values.
    pub raw: Vec<f64>,
    pub uncertainty: Vec<f64>,
}

impl SelectorTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,value,uncertainty\n");
        for i in 0..self.p_grid.len() {
            s.push_str(&format!("{:.12e},{:.12e},{:.6e}\n", self.p_grid[i], self.values[i], self.uncertainty[i]));
        }
        s
    }

    /// Largest difference quotient between neighbouring nodes.
    pub fn lipschitz(&self) -> f64 {
        self.p_grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(p, v)| ((v[1] - v[0]) / (p[1] - p[0])).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub k_list: Vec<usize>,
    /// `(k_i, k_{i+1}, sup |h_{k_{i+1}} − h_{k_i}|)`.
    pub cauchy: Vec<(usize, usize, f64)>,
    /// Richardson extrapolation under an `O(1/k)` error model from the last two tables.
    pub extrapolated: Vec<f64>,
    /// Per-node disagreement between the last two extrapolations (zero if only one exists).
    pub extrapolation_residual: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct HomogenizeOptions {
    pub landscape: LandscapeOptions,
    pub class: Class,
    pub cache: Option<LandscapeCache>,
}

impl Default for HomogenizeOptions {
    fn default() -> Self {
        HomogenizeOptions { landscape: LandscapeOptions::default(), class: Class::Fundamental, cache: None }
    }
}

fn richardson(k1: usize, h1: &[f64], k2: usize, h2: &[f64]) -> Vec<f64> {
    let r = k2 as f64 / k1 as f64;
    h1.iter().zip(h2).map(|(a, b)| (r * b - a) / (r - 1.0)).collect()
}

/// Selector table for one horizon.
pub fn selector_table(h: &HamiltonianSpec, k: usize, p_grid: &[f64], opts: &HomogenizeOptions) -> Result<SelectorTable> {
    let mut h0 = h.clone();
    h0.offset = 0.0;
    let ls = match &opts.cache {
        Some(c) => c.get_or_build(&h0, k, p_grid, &opts.landscape)?.0,
        None => build_landscapes(&h0, k, p_grid, &opts.landscape)?,
    };
    let rows: Vec<(f64, f64, f64)> = ls
        .par_iter()
        .map(|l| {
            let (raw, at) = minimax_located(l, opts.class)?;
            Ok(match polish_critical(l, &at) {
                Some((_, v)) => (raw, v, (raw - v).abs()),
                None => (raw, raw, l.grid_modulus()),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SelectorTable {
        k,
        p_grid: p_grid.to_vec(),
        values: rows.iter().map(|r| r.1 + h.offset).collect(),
        raw: rows.iter().map(|r| r.0 + h.offset).collect(),
        uncertainty: rows.iter().map(|r| r.2).collect(),
    })
}

/// Tables `h_k` for increasing `k` with Cauchy differences and an extrapolated limit.
pub fn homogenize(
    h: &HamiltonianSpec,
    k_list: &[usize],
    p_grid: &[f64],
    opts: &HomogenizeOptions,
) -> Result<(Vec<SelectorTable>, ConvergenceReport)> {
    if k_list.is_empty() || k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("k_list must be nonempty and strictly increasing".into()));
    }
    let tables: Vec<SelectorTable> =
        k_list.iter().map(|&k| selector_table(h, k, p_grid, opts)).collect::<Result<_>>()?;
    let cauchy = tables
        .windows(2)
        .map(|w| {
            let d = w[0].values.iter().zip(&w[1].values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (w[0].k, w[1].k, d)
        })
        .collect();
    let m = tables.len();
    let (extrapolated, extrapolation_residual) = if m >= 2 {
        let last = richardson(tables[m - 2].k, &tables[m - 2].values, tables[m - 1].k, &tables[m - 1].values);
        let res = if m >= 3 {
            let prev = richardson(tables[m - 3].k, &tables[m - 3].values, tables[m - 2].k, &tables[m - 2].values);
            last.iter().zip(&prev).map(|(a, b)| (a - b).abs()).collect()
        } else {
            tables[m - 1].values.iter().zip(&tables[m - 2].values).map(|(a, b)| (a - b).abs()).collect()
        };
        (last, res)
    } else {
        (tables[0].values.clone(), tables[0].uncertainty.clone())
    };
    Ok((tables, ConvergenceReport { k_list: k_list.to_vec(), cauchy, extrapolated, extrapolation_residual }))
}

/// `(c₊, c₋)` of `φᵏ` from the graph landscape: `c₊ = −c(1, S)`, `c₋ = −c(μ, S)`.
pub fn capacities(h: &HamiltonianSpec, k: usize, opts: &LandscapeOptions) -> Result<(f64, f64)> {
    let g = graph_landscape(h, k, opts)?;
    let kf = k as f64;
    let unit = minimax(&g, Class::Unit)?;
    let fund = minimax(&g, Class::Fundamental)?;
    Ok((0.0 - kf * unit + 0.0, 0.0 - kf * fund + 0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongValue {
    pub value: f64,
    pub witnesses: Vec<Vec<f64>>,
    /// Some witness sits on a plateau of equal samples: degenerate, not isolated.
    pub degenerate: bool,
}

/// Default lifetime threshold: twice the grid modulus of continuity.
pub fn default_lifetime_threshold(f: &GeneratingLandscape) -> f64 {
    2.0 * f.grid_modulus()
}

fn on_plateau(f: &GeneratingLandscape, point: &[f64], tol: f64) -> bool {
    let idx = f.flat_index(
        &point.iter().zip(&f.axes).map(|(&x, a)| ((x - a.lo) / a.step).round() as usize).collect::<Vec<_>>(),
    );
    let mi = f.multi_index(idx);
    let v = f.values[idx];
    (0..mi.len()).any(|d| {
        let n = f.axes[d].nodes;
        [mi[d] as isize - 1, mi[d] as isize + 1].iter().any(|&j| {
            let j = if f.axes[d].periodic { j.rem_euclid(n as isize) } else { j };
            if j < 0 || j >= n as isize {
                return false;
            }
            let mut m = mi.clone();
            m[d] = j as usize;
            (f.values[f.flat_index(&m)] - v).abs() <= tol
        })
    })
}

fn is_boundary_point(f: &GeneratingLandscape, point: &[f64]) -> bool {
    point.iter().zip(&f.axes).any(|(&x, a)| !a.periodic && (x <= a.lo + 0.5 * a.step || x >= a.hi() - 0.5 * a.step))
}

/// Values where sublevel homology changes persistently: endpoints of pairs with lifetime above
/// `threshold`, and births of essential classes. Witnesses on the box boundary are excluded.
pub fn strong_critical_values(f: &GeneratingLandscape, threshold: f64) -> Result<Vec<StrongValue>> {
    let d = sublevel_persistence(f)?;
    let mut raw: Vec<(f64, Vec<f64>)> = Vec::new();
    for p in &d.pairs {
        if p.death - p.birth > threshold {
            raw.push((p.birth, p.birth_point.clone()));
            if let Some(dp) = &p.death_point {
                raw.push((p.death, dp.clone()));
            }
        }
    }
    raw.retain(|(_, x)| !is_boundary_point(f, x));
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tol = 1e-12 * (1.0 + f.sup_norm());
    let mut out: Vec<StrongValue> = Vec::new();
    for (v, x) in raw {
        let plateau = on_plateau(f, &x, tol);
        match out.last_mut() {
            Some(last) if (last.value - v).abs() <= tol => {
                if !last.witnesses.contains(&x) {
                    last.witnesses.push(x);
                }
                last.degenerate |= plateau;
            }
            _ => out.push(StrongValue { value: v, witnesses: vec![x], degenerate: plateau }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfunc::Axis;
    use std::f64::consts::PI;

    fn circle(f: impl Fn(f64) -> f64, n: usize) -> GeneratingLandscape {
        let axes = vec![Axis { lo: 0.0, step: 1.0 / n as f64, nodes: n, periodic: true }];
        let values = (0..n).map(|i| f(i as f64 / n as f64)).collect();
        GeneratingLandscape::from_values(axes, values, 0, vec![false; n])
    }

    #[test]
    fn double_well_on_circle() {
        let l = circle(|x| (4.0 * PI * x).cos() + 0.3 * (2.0 * PI * x).cos(), 64);
        let d = sublevel_persistence(&l).unwrap();
        let finite: Vec<_> = d.pairs.iter().filter(|p| p.death.is_finite()).collect();
        // The two minima merge at the lower maximum; the global minimum and the loop stay essential.
        assert_eq!(finite.len(), 1);
        assert_eq!(d.essential(0).len(), 1);
        assert_eq!(d.essential(1).len(), 1);
        let max = l.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = l.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(minimax(&l, Class::Fundamental).unwrap(), max);
        assert_eq!(minimax(&l, Class::Unit).unwrap(), min);
    }

    #[test]
    fn pure_quadratic_classes_born_at_zero() {
        let (nx, nxi) = (8, 9);
        let axes = vec![
            Axis { lo: 0.0, step: 1.0 / nx as f64, nodes: nx, periodic: true },
            Axis { lo: -1.0, step: 0.25, nodes: nxi, periodic: false },
        ];
        let mut values = Vec::new();
        let mut tags = Vec::new();
        for _ in 0..nx {
            for j in 0..nxi {
                let xi = -1.0 + 0.25 * j as f64;
                values.push(-xi * xi);
                tags.push(j == 0 || j == nxi - 1);
            }
        }
        let l = GeneratingLandscape::from_values(axes, values, 1, tags);
        let d = sublevel_persistence(&l).unwrap();
        assert_eq!(d.essential(0).len(), 1);
        assert_eq!(d.essential(1).len(), 1);
        assert_eq!(minimax(&l, Class::Unit).unwrap(), 0.0);
        assert_eq!(minimax(&l, Class::Fundamental).unwrap(), 0.0);
    }

    #[test]
    fn stability_under_perturbation() {
        let l = circle(|x| (2.0 * PI * x).sin() + 0.2 * (6.0 * PI * x).cos(), 48);
        let mut m = l.clone();
        for (i, v) in m.values.iter_mut().enumerate() {
            *v += 0.01 * ((i * 7919 % 13) as f64 / 13.0 - 0.5);
        }
        let a = sublevel_persistence(&l).unwrap();
        let b = sublevel_persistence(&m).unwrap();
        assert!(bottleneck_distance(&a, &b) <= 0.005 + 1e-15);
    }

    #[test]
    fn strong_values_of_cubic_and_plateau() {
        let seg = |f: &dyn Fn(f64) -> f64| {
            let n = 81;
            let axes = vec![Axis { lo: -2.0, step: 0.05, nodes: n, periodic: false }];
            let values = (0..n).map(|i| f(-2.0 + 0.05 * i as f64)).collect();
            GeneratingLandscape::from_values(axes, values, 0, vec![false; n])
        };
        let cubic = seg(&|x| x * x * x);
        let s = strong_critical_values(&cubic, default_lifetime_threshold(&cubic)).unwrap();
        assert!(s.iter().all(|v| v.value.abs() > 1e-9));
        let plateau = seg(&|x| if x < -1.0 { x + 1.0 } else if x > 1.0 { x - 1.0 } else { 0.0 });
        let s = strong_critical_values(&plateau, default_lifetime_threshold(&plateau)).unwrap();
        assert!(s.iter().all(|v| v.value != 0.0));
        let f = |x: f64| (4.0 * PI * x).cos() + 0.3 * (2.0 * PI * x).cos() + 0.2 * (2.0 * PI * x).sin();
        let morse = circle(f, 256);
        let s = strong_critical_values(&morse, default_lifetime_threshold(&morse)).unwrap();
        let v = &morse.values;
        let n = v.len();
        let mut extrema: Vec<f64> = (0..n)
            .filter(|&i| {
                let (a, b) = (v[(i + n - 1) % n], v[(i + 1) % n]);
                (v[i] > a && v[i] > b) || (v[i] < a && v[i] < b)
            })
            .map(|i| v[i])
            .collect();
        extrema.sort_by(f64::total_cmp);
        assert_eq!(extrema.len(), 4);
        assert_eq!(s.iter().map(|x| x.value).collect::<Vec<_>>(), extrema);
    }

    #[test]
    fn zero_hamiltonian_capacities_vanish() {
        let h = HamiltonianSpec::zero().truncate(1.0);
        let opts = LandscapeOptions { nodes_x: 8, nodes_graph_y: 8, ..Default::default() };
        assert_eq!(capacities(&h, 1, &opts).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn integrable_table_is_exact() {
        let h = HamiltonianSpec::integrable(vec![0.0, 0.1, 0.5]);
        let ps: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
        let (tables, rep) = homogenize(&h, &[1, 2], &ps, &HomogenizeOptions::default()).unwrap();
        for t in &tables {
            for (p, v) in ps.iter().zip(&t.values) {
                assert!((v - (0.1 * p + 0.5 * p * p)).abs() < 1e-12);
            }
        }
        assert!(rep.cauchy[0].2 < 1e-12);
    }
}
