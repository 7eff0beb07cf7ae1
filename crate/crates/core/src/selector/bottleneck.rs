//! Bottleneck distance between persistence diagrams.

use super::PersistenceDiagram;

fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn diag_cost(a: (f64, f64)) -> f64 {
    0.5 * (a.1 - a.0)
}

/// Hopcroft-Karp perfect-matching test on the bipartite graph where `edge(i, j)` holds.
fn perfect_matching(n: usize, edge: &dyn Fn(usize, usize) -> bool) -> bool {
    const NIL: usize = usize::MAX;
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| edge(i, j)).collect()).collect();
    let mut mu = vec![NIL; n];
    let mut mv = vec![NIL; n];
    let mut dist = vec![0usize; n];
    loop {
        let mut queue = std::collections::VecDeque::new();
        let mut found = false;
        for u in 0..n {
            if mu[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = mv[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        fn dfs(u: usize, adj: &[Vec<usize>], mu: &mut [usize], mv: &mut [usize], dist: &mut [usize]) -> bool {
            for &v in &adj[u] {
                let w = mv[v];
                if w == usize::MAX || (dist[w] == dist[u] + 1 && dfs(w, adj, mu, mv, dist)) {
                    mu[u] = v;
                    mv[v] = u;
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }
        let mut any = false;
        for u in 0..n {
            if mu[u] == NIL && dfs(u, &adj, &mut mu, &mut mv, &mut dist) {
                any = true;
            }
        }
        if !any {
            break;
        }
    }
    mu.iter().all(|&v| v != NIL)
}

fn finite_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    if n == 0 {
        return 0.0;
    }
    // Left: a_0..a_{na-1}, diagonal copies of b. Right: b_0..b_{nb-1}, diagonal copies of a.
    let cost = |i: usize, j: usize| -> f64 {
        match (i < na, j < nb) {
            (true, true) => linf(a[i], b[j]),
            (true, false) => {
                if j - nb == i {
                    diag_cost(a[i])
                } else {
                    f64::INFINITY
                }
            }
            (false, true) => {
                if i - na == j {
                    diag_cost(b[j])
                } else {
                    f64::INFINITY
                }
            }
            (false, false) => 0.0,
        }
    };
    let mut candidates: Vec<f64> = vec![0.0];
    for i in 0..n {
        for j in 0..n {
            let c = cost(i, j);
            if c.is_finite() {
                candidates.push(c);
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        let t = candidates[mid];
        if perfect_matching(n, &|i, j| cost(i, j) <= t) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Bottleneck distance per degree, maximized over degrees. Essential classes are matched to
/// essential classes of the same degree by sorted birth; a count mismatch gives infinity.
pub fn bottleneck_distance(x: &PersistenceDiagram, y: &PersistenceDiagram) -> f64 {
    let mut degrees: Vec<i64> = x.pairs.iter().chain(&y.pairs).map(|p| p.degree).collect();
    degrees.sort_unstable();
    degrees.dedup();
    let mut worst: f64 = 0.0;
    for d in degrees {
        let fin = |g: &PersistenceDiagram| -> Vec<(f64, f64)> {
            g.pairs.iter().filter(|p| p.degree == d && p.death.is_finite()).map(|p| (p.birth, p.death)).collect()
        };
        let ess = |g: &PersistenceDiagram| -> Vec<f64> {
            let mut v: Vec<f64> =
                g.pairs.iter().filter(|p| p.degree == d && !p.death.is_finite()).map(|p| p.birth).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (ex, ey) = (ess(x), ess(y));
        if ex.len() != ey.len() {
            return f64::INFINITY;
        }
        for (a, b) in ex.iter().zip(&ey) {
            worst = worst.max((a - b).abs());
        }
        worst = worst.max(finite_bottleneck(&fin(x), &fin(y)));
    }
    worst
}
