//! Lower-star cubical filtrations of sampled landscapes and their ℤ/2 reduction.
//!
//! Cells live on the doubled grid: an even coordinate is a vertex position, an odd one an
//! edge between neighbours. Periodic axes with `N` nodes have `2N` positions (wrapping), bounded
//! axes `2N − 1`. A cell's value is the maximum over its vertices. Cells whose vertices are all
//! tagged form the subcomplex `E` and are quotiented out.

use crate::genfunc::GeneratingLandscape;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub dim: usize,
    /// Vertex (flat landscape index) attaining the cell value.
    pub vertex: usize,
    pub id: usize,
}

/// Cells of `K / E` in filtration order with boundaries expressed as filtration positions.
#[derive(Clone, Debug)]
pub struct Filtration {
    pub cells: Vec<Cell>,
    pub boundary: Vec<Vec<u32>>,
    pub max_dim: usize,
}

struct Geometry {
    sizes: Vec<usize>,
    periodic: Vec<bool>,
    nodes: Vec<usize>,
}

impl Geometry {
    fn new(l: &GeneratingLandscape) -> Self {
        let nodes: Vec<usize> = l.axes.iter().map(|a| a.nodes).collect();
        let periodic: Vec<bool> = l.axes.iter().map(|a| a.periodic && a.nodes >= 2).collect();
        let sizes = nodes.iter().zip(&periodic).map(|(&n, &p)| if p { 2 * n } else { 2 * n - 1 }).collect();
        Geometry { sizes, periodic, nodes }
    }

    fn decode(&self, mut id: usize, out: &mut [usize]) {
        for d in (0..self.sizes.len()).rev() {
            out[d] = id % self.sizes[d];
            id /= self.sizes[d];
        }
    }

    fn encode(&self, c: &[usize]) -> usize {
        c.iter().zip(&self.sizes).fold(0, |acc, (&x, &s)| acc * s + x)
    }

    /// Flat landscape indices of the vertices of the cell with doubled coordinates `c`.
    fn vertices(&self, c: &[usize], out: &mut Vec<usize>) {
        out.clear();
        out.push(0);
        for d in 0..c.len() {
            let n = self.nodes[d];
            let lo = c[d] / 2;
            let len = out.len();
            if c[d] % 2 == 0 {
                for v in out.iter_mut() {
                    *v = *v * n + lo;
                }
            } else {
                let hi = if lo + 1 == n { 0 } else { lo + 1 };
                for i in 0..len {
                    let base = out[i] * n;
                    out[i] = base + lo;
                    out.push(base + hi);
                }
            }
        }
    }

    fn faces(&self, c: &[usize], out: &mut Vec<usize>) {
        out.clear();
        let mut tmp = c.to_vec();
        for d in 0..c.len() {
            if c[d] % 2 == 1 {
                let s = self.sizes[d];
                tmp[d] = c[d] - 1;
                out.push(self.encode(&tmp));
                tmp[d] = if self.periodic[d] { (c[d] + 1) % s } else { c[d] + 1 };
                out.push(self.encode(&tmp));
                tmp[d] = c[d];
            }
        }
    }
}

/// Total number of cells of the complex on the landscape grid (before quotienting).
pub fn cell_count(l: &GeneratingLandscape) -> usize {
    Geometry::new(l).sizes.iter().product()
}

pub fn build_filtration(l: &GeneratingLandscape) -> Filtration {
    let g = Geometry::new(l);
    let total: usize = g.sizes.iter().product();
    let dims = g.sizes.len();
    let mut coord = vec![0usize; dims];
    let mut verts = Vec::with_capacity(1 << dims);
    let mut info: Vec<Option<Cell>> = Vec::with_capacity(total);
    let tagged = |v: usize| l.boundary_tag.get(v).copied().unwrap_or(false);
    for id in 0..total {
        g.decode(id, &mut coord);
        g.vertices(&coord, &mut verts);
        if verts.iter().all(|&v| tagged(v)) {
            info.push(None);
            continue;
        }
        let mut best = verts[0];
        for &v in &verts[1..] {
            if l.values[v] > l.values[best] {
                best = v;
            }
        }
        let dim = coord.iter().filter(|&&x| x % 2 == 1).count();
        info.push(Some(Cell { value: l.values[best], dim, vertex: best, id }));
    }
    let mut order: Vec<Cell> = info.iter().flatten().copied().collect();
    order.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.dim.cmp(&b.dim)).then(a.id.cmp(&b.id)));
    let mut pos = vec![u32::MAX; total];
    for (i, c) in order.iter().enumerate() {
        pos[c.id] = i as u32;
    }
    let mut faces = Vec::with_capacity(2 * dims);
    let mut boundary = Vec::with_capacity(order.len());
    let mut max_dim = 0;
    for c in &order {
        max_dim = max_dim.max(c.dim);
        g.decode(c.id, &mut coord);
        g.faces(&coord, &mut faces);
        let mut col: Vec<u32> = Vec::with_capacity(faces.len());
        for &f in &faces {
            let p = pos[f];
            if p != u32::MAX {
                // Faces repeated on tiny periodic axes cancel mod 2.
                match col.iter().position(|&x| x == p) {
                    Some(i) => {
                        col.swap_remove(i);
                    }
                    None => col.push(p),
                }
            }
        }
        col.sort_unstable();
        boundary.push(col);
    }
    Filtration { cells: order, boundary, max_dim }
}

fn add_mod2(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Persistence pairs `(birth position, Some(death position))` and essential births
/// `(position, None)`, from column reduction with clearing.
pub fn reduce(f: &Filtration) -> Vec<(usize, Option<usize>)> {
    let n = f.cells.len();
    let mut pivot_of = vec![u32::MAX; n];
    let mut cleared = vec![false; n];
    let mut negative = vec![false; n];
    let mut reduced: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut by_dim: Vec<Vec<usize>> = vec![Vec::new(); f.max_dim + 1];
    for (i, c) in f.cells.iter().enumerate() {
        by_dim[c.dim].push(i);
    }
    let mut scratch = Vec::new();
    for d in (1..=f.max_dim).rev() {
        for &j in &by_dim[d] {
            if cleared[j] {
                continue;
            }
            let mut col = f.boundary[j].clone();
            while let Some(&low) = col.last() {
                let k = pivot_of[low as usize];
                if k == u32::MAX {
                    break;
                }
                add_mod2(&col, &reduced[k as usize], &mut scratch);
                std::mem::swap(&mut col, &mut scratch);
            }
            if let Some(&low) = col.last() {
                pivot_of[low as usize] = j as u32;
                cleared[low as usize] = true;
                negative[j] = true;
                reduced[j] = col;
            }
        }
    }
    let mut out = Vec::new();
    for i in 0..n {
        if negative[i] {
            continue;
        }
        let k = pivot_of[i];
        out.push((i, if k == u32::MAX { None } else { Some(k as usize) }));
    }
    out
}
