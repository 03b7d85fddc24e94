//! Brute-force prune classifier over small weighted graphs.
//!
//! Every simple path from a node to the trunk is enumerated; the node's path
//! is the one with the least total weight, ties going to the path whose
//! node-id sequence is lexicographically smallest. A node is removed when
//! its path contains a cut node.

#![allow(dead_code)]

use std::collections::BTreeSet;

use canopy_core::treegraph::{shortest_paths, simulate_prune, CutSpec, TreeGraph};
use canopy_core::Vec3;

pub type Edge = (usize, usize, f64);

pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == v && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Every connected labeled graph on `n` nodes with every weighting drawn
/// from `weights`, passed to `visit`.
pub fn for_each_weighted_graph(n: usize, weights: &[f64], mut visit: impl FnMut(&[Edge])) {
    let all = pairs(n);
    for mask in 0u64..(1 << all.len()) {
        let chosen: Vec<(usize, usize)> = all
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        if !is_connected(n, &chosen) {
            continue;
        }
        let combos = weights.len().pow(chosen.len() as u32);
        let mut edges: Vec<Edge> = chosen.iter().map(|&(a, b)| (a, b, weights[0])).collect();
        for code in 0..combos {
            let mut c = code;
            for e in edges.iter_mut() {
                e.2 = weights[c % weights.len()];
                c /= weights.len();
            }
            visit(&edges);
        }
    }
}

fn weight(edges: &[Edge], a: usize, b: usize) -> Option<f64> {
    edges
        .iter()
        .find(|&&(x, y, _)| (x == a && y == b) || (x == b && y == a))
        .map(|e| e.2)
}

/// Least-weight path from every node to `trunk`, by exhaustive search.
pub fn brute_paths(n: usize, edges: &[Edge], trunk: usize) -> Vec<Option<(f64, Vec<usize>)>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b, _) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    (0..n)
        .map(|start| {
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut path = vec![start];
            let mut on = vec![false; n];
            on[start] = true;
            walk(&adj, edges, trunk, &mut path, &mut on, 0.0, &mut best);
            best
        })
        .collect()
}

fn walk(
    adj: &[Vec<usize>],
    edges: &[Edge],
    trunk: usize,
    path: &mut Vec<usize>,
    on: &mut [bool],
    cost: f64,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    let v = *path.last().unwrap();
    if v == trunk {
        let better = match best {
            None => true,
            Some((c, p)) => cost < *c || (cost == *c && path.as_slice() < p.as_slice()),
        };
        if better {
            *best = Some((cost, path.clone()));
        }
        return;
    }
    for &u in &adj[v] {
        if !on[u] {
            on[u] = true;
            path.push(u);
            walk(adj, edges, trunk, path, on, cost + weight(edges, v, u).unwrap(), best);
            path.pop();
            on[u] = false;
        }
    }
}

pub fn brute_removed(paths: &[Option<(f64, Vec<usize>)>], cut: &BTreeSet<usize>) -> BTreeSet<usize> {
    paths
        .iter()
        .enumerate()
        .filter(|(v, p)| cut.contains(v) || p.as_ref().is_some_and(|(_, p)| p.iter().any(|x| cut.contains(x))))
        .map(|(v, _)| v)
        .collect()
}

/// Nodes spread far apart so a unit-radius cut at a node's position
/// selects exactly that node.
pub fn positions(n: usize) -> Vec<Vec3> {
    (0..n).map(|i| Vec3::new(10.0 * i as f64, 0.0, 0.0)).collect()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    pub graphs: u64,
    pub cases: u64,
    pub mismatches: u64,
}

impl Tally {
    pub fn add(&mut self, o: Tally) {
        self.graphs += o.graphs;
        self.cases += o.cases;
        self.mismatches += o.mismatches;
    }
}

/// Compares the simulator with the brute-force classifier for every trunk
/// choice and every non-empty cut set of at most `max_cut` nodes.
pub fn check_graph(n: usize, edges: &[Edge], max_cut: usize) -> Tally {
    let mut t = Tally {
        graphs: 1,
        ..Default::default()
    };
    let pos = positions(n);
    for trunk in 0..n {
        let graph = TreeGraph::from_edges(pos.clone(), edges, trunk).unwrap();
        let paths = shortest_paths(&graph);
        let truth = brute_paths(n, edges, trunk);
        for v in 0..n {
            let ours = paths.path(v);
            let theirs = truth[v].as_ref().map(|(_, p)| p.clone());
            t.cases += 1;
            if ours != theirs || truth[v].as_ref().map(|x| x.0) != Some(paths.dist[v]) {
                t.mismatches += 1;
            }
        }
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize > max_cut {
                continue;
            }
            let cut: BTreeSet<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let specs: Vec<CutSpec> = cut.iter().map(|&i| CutSpec::new(pos[i], 1.0)).collect();
            let result = simulate_prune(&graph, &paths, &specs).unwrap();
            t.cases += 1;
            if result.removed_nodes != brute_removed(&truth, &cut) || result.cut_nodes != cut {
                t.mismatches += 1;
            }
        }
    }
    t
}

/// Random connected graph on `n` nodes: a random spanning tree plus extra
/// edges, each weighted from `weights`.
pub fn random_graph(n: usize, weights: &[f64], extra_p: f64, rng: &mut impl rand::Rng) -> Vec<Edge> {
    let mut edges = Vec::new();
    let mut present = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        present.insert((u, v));
    }
    for (a, b) in pairs(n) {
        if !present.contains(&(a, b)) && rng.random_bool(extra_p) {
            present.insert((a, b));
        }
    }
    for (a, b) in present {
        edges.push((a, b, weights[rng.random_range(0..weights.len())]));
    }
    // Relabel so the spanning-tree shape is not tied to low ids.
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    edges.into_iter().map(|(a, b, w)| (perm[a], perm[b], w)).collect()
}
