#![allow(dead_code)]

use rand::Rng;
use testbed_core::topo::{LinkSpec, Medium, Topology};

/// Random connected graph: a random spanning tree plus extra edges, integer delays in `1..=50`.
pub fn random_connected(rng: &mut impl Rng, n: usize, extra_p: f64) -> Topology {
    let mut links = Vec::new();
    let mut present = vec![vec![false; n]; n];
    for v in 1..n {
        let u = rng.gen_range(0..v);
        present[u][v] = true;
        links.push((u, v, LinkSpec::new(rng.gen_range(1..=50) as f64, Medium::Wired)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if !present[u][v] && rng.gen_bool(extra_p) {
                let medium = if rng.gen_bool(0.2) { Medium::Wireless } else { Medium::Wired };
                links.push((u, v, LinkSpec::new(rng.gen_range(1..=50) as f64, medium)));
            }
        }
    }
    Topology::from_links((0..n).map(|i| format!("N{i}")).collect(), links).unwrap()
}

/// All-pairs shortest distances by Floyd–Warshall.
pub fn floyd_warshall(topo: &Topology) -> Vec<Vec<Option<f64>>> {
    let n = topo.node_count();
    let mut d = vec![vec![None; n]; n];
    for i in 0..n {
        d[i][i] = Some(0.0);
        for (j, l) in topo.neighbors(i) {
            if l.up {
                d[i][j] = Some(l.delay_ms);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].map_or(true, |c: f64| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Cheapest simple path from `s` to `t`, ties broken by lexicographically
/// smallest index sequence, by exhaustive enumeration.
pub fn brute_force_path(topo: &Topology, s: usize, t: usize) -> Option<(f64, Vec<usize>)> {
    fn walk(
        topo: &Topology,
        t: usize,
        path: &mut Vec<usize>,
        cost: f64,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let here = *path.last().unwrap();
        if here == t {
            let better = match best {
                None => true,
                Some((c, p)) => cost < *c || (cost == *c && path < p),
            };
            if better {
                *best = Some((cost, path.clone()));
            }
            return;
        }
        let next: Vec<(usize, f64)> = topo
            .neighbors(here)
            .filter(|(v, l)| l.up && !path.contains(v))
            .map(|(v, l)| (v, l.delay_ms))
            .collect();
        for (v, d) in next {
            path.push(v);
            walk(topo, t, path, cost + d, best);
            path.pop();
        }
    }
    let mut best = None;
    walk(topo, t, &mut vec![s], 0.0, &mut best);
    best
}
