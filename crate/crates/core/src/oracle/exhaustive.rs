use crate::genfunc::GeneratingLandscape;
use crate::selector::cubical::{build_filtration, cell_count, Filtration};
use crate::selector::{base_dim, Class};
use crate::{Error, Result};

/// Largest landscape (grid nodes) the dense linear-algebra oracle accepts.
pub const BRUTE_FORCE_MAX_CELLS: usize = 12 * 12 * 12;

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] ^= 1 << (i % 64);
    }
    fn xor(&mut self, o: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a ^= b;
        }
    }
    fn highest(&self) -> Option<usize> {
        self.0.iter().enumerate().rev().find(|(_, w)| **w != 0).map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
    }
}

/// Incremental GF(2) echelon basis keyed by the highest set bit.
struct Echelon {
    rows: Vec<Option<Bits>>,
    rank: usize,
}

impl Echelon {
    fn new(n: usize) -> Self {
        Echelon { rows: vec![None; n], rank: 0 }
    }
    fn insert(&mut self, mut v: Bits) -> bool {
        while let Some(h) = v.highest() {
            match &self.rows[h] {
                Some(r) => v.xor(r),
                None => {
                    self.rows[h] = Some(v);
                    self.rank += 1;
                    return true;
                }
            }
        }
        false
    }
}

struct Complex {
    /// Local index within its dimension for each filtration position.
    local: Vec<usize>,
    by_dim: Vec<Vec<usize>>,
}

impl Complex {
    fn new(f: &Filtration) -> Self {
        let mut by_dim = vec![Vec::new(); f.max_dim + 2];
        let mut local = vec![0; f.cells.len()];
        for (i, c) in f.cells.iter().enumerate() {
            local[i] = by_dim[c.dim].len();
            by_dim[c.dim].push(i);
        }
        Complex { local, by_dim }
    }

    fn boundary_bits(&self, f: &Filtration, cell: usize) -> Bits {
        let d = f.cells[cell].dim;
        let mut b = Bits::zeros(if d == 0 { 1 } else { self.by_dim[d - 1].len() });
        for &x in &f.boundary[cell] {
            b.set(self.local[x as usize]);
        }
        b
    }
}

/// Whether some `dim`-cycle of the sublevel complex `{F ≤ level}` is nonzero in `H_dim(K, E)`.
fn class_survives(f: &Filtration, cx: &Complex, boundaries: &Echelon, dim: usize, level: f64) -> bool {
    let cells = &cx.by_dim[dim];
    let n = cells.len();
    // Kernel of ∂ restricted to sublevel cells, by elimination with combination tracking.
    let m = if dim == 0 { 1 } else { cx.by_dim[dim - 1].len() };
    let mut pivots: Vec<Option<(Bits, Bits)>> = vec![None; m];
    let mut span = Echelon { rows: boundaries.rows.clone(), rank: boundaries.rank };
    for (j, &c) in cells.iter().enumerate() {
        if f.cells[c].value > level {
            continue;
        }
        let mut b = if dim == 0 { Bits::zeros(1) } else { cx.boundary_bits(f, c) };
        let mut combo = Bits::zeros(n);
        combo.set(j);
        loop {
            match b.highest() {
                None => {
                    if span.insert(combo) {
                        return true;
                    }
                    break;
                }
                Some(h) => match &pivots[h] {
                    Some((pb, pc)) => {
                        b.xor(pb);
                        combo.xor(pc);
                    }
                    None => {
                        pivots[h] = Some((b, combo));
                        break;
                    }
                },
            }
        }
    }
    false
}

/// Min-max value of the requested class by brute force: the smallest sampled level whose
/// sublevel complex carries a cycle surviving in the relative homology of the whole grid.
pub fn brute_force_minimax(l: &GeneratingLandscape, class: Class) -> Result<f64> {
    if l.len() > BRUTE_FORCE_MAX_CELLS || l.free_dim() > 3 {
        return Err(Error::TooLarge { cells: cell_count(l) });
    }
    let degree = match class {
        Class::Unit => 0,
        Class::Fundamental => base_dim(l),
    };
    let dim = degree + l.negative_index;
    let f = build_filtration(l);
    let cx = Complex::new(&f);
    let not_found = Error::ClassNotFound { degree: dim, negative_index: l.negative_index };
    if dim > f.max_dim || cx.by_dim[dim].is_empty() {
        return Err(not_found);
    }
    let n = cx.by_dim[dim].len();
    let mut boundaries = Echelon::new(n);
    for &c in &cx.by_dim[dim + 1] {
        boundaries.insert(cx.boundary_bits(&f, c));
    }
    let mut levels: Vec<f64> = cx.by_dim[dim].iter().map(|&c| f.cells[c].value).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let top = *levels.last().unwrap();
    if !class_survives(&f, &cx, &boundaries, dim, top) {
        return Err(not_found);
    }
    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if class_survives(&f, &cx, &boundaries, dim, levels[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(levels[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfunc::{Axis, YSlice};
    use crate::selector::minimax;

    fn circle(vals: Vec<f64>) -> GeneratingLandscape {
        let n = vals.len();
        let mut l = GeneratingLandscape::from_values(
            vec![Axis { lo: 0.0, step: 1.0 / n as f64, nodes: n, periodic: true }],
            vals,
            0,
            vec![false; n],
        );
        l.y_slice = YSlice::Fixed(vec![0.0]);
        l
    }

    #[test]
    fn circle_min_and_max() {
        let n = 40;
        let vals: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect();
        let l = circle(vals.clone());
        let mx = vals.iter().cloned().fold(f64::MIN, f64::max);
        let mn = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert_eq!(brute_force_minimax(&l, Class::Unit).unwrap(), mn);
        assert_eq!(brute_force_minimax(&l, Class::Fundamental).unwrap(), mx);
        assert_eq!(minimax(&l, Class::Fundamental).unwrap(), mx);
    }

    #[test]
    fn too_large() {
        let l = circle(vec![0.0; BRUTE_FORCE_MAX_CELLS + 1]);
        assert!(matches!(brute_force_minimax(&l, Class::Unit), Err(Error::TooLarge { .. })));
    }
}
