use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::graph::TreeGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on cost, then node id.
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest paths from every node to the trunk, stored as a shortest-path
/// tree: each reachable node records its next hop toward the trunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMap {
    pub trunk: usize,
    /// Distance to the trunk; `f64::INFINITY` when unreachable.
    pub dist: Vec<f64>,
    pub next_hop: Vec<Option<usize>>,
    /// Reachable nodes sorted by increasing distance (trunk first).
    pub order: Vec<usize>,
}

impl PathMap {
    pub fn is_reachable(&self, node: usize) -> bool {
        self.dist[node].is_finite()
    }

    pub fn unreachable_count(&self) -> usize {
        self.dist.len() - self.order.len()
    }

    /// The node sequence from `node` to the trunk, inclusive at both ends.
    pub fn path(&self, node: usize) -> Option<Vec<usize>> {
        if !self.is_reachable(node) {
            return None;
        }
        let mut out = vec![node];
        let mut cur = node;
        while let Some(next) = self.next_hop[cur] {
            out.push(next);
            cur = next;
        }
        Some(out)
    }

    /// Number of nodes on the path from `node` to the trunk.
    pub fn path_len(&self, node: usize) -> Option<usize> {
        self.path(node).map(|p| p.len())
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Minimal-weight paths to the trunk for every node.
///
/// Among equally short paths the one whose first hop has the smallest node
/// id wins; applied recursively this gives the lexicographically smallest
/// node sequence among all shortest paths.
pub fn shortest_paths(graph: &TreeGraph) -> PathMap {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    dist[graph.trunk] = 0.0;
    heap.push(Entry {
        cost: 0.0,
        node: graph.trunk,
    });
    while let Some(Entry { cost, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        order.push(node);
        for &(m, w) in &graph.adjacency[node] {
            let c = cost + w;
            if c < dist[m] {
                dist[m] = c;
                heap.push(Entry { cost: c, node: m });
            }
        }
    }

    let next_hop = (0..n)
        .map(|v| {
            if v == graph.trunk || !dist[v].is_finite() {
                return None;
            }
            graph.adjacency[v]
                .iter()
                .filter(|&&(m, w)| dist[m] < dist[v] && ties(dist[m] + w, dist[v]))
                .map(|&(m, _)| m)
                .min()
        })
        .collect();

    if order.len() < n {
        log::warn!("{} of {} graph nodes are unreachable from the trunk", n - order.len(), n);
    }
    PathMap {
        trunk: graph.trunk,
        dist,
        next_hop,
        order,
    }
}

/// Single-source A* search from `source` to the trunk. Uses straight-line
/// distance as the heuristic on geometric graphs and plain Dijkstra
/// otherwise. Returns the path (source first) and its length.
pub fn astar(graph: &TreeGraph, source: usize) -> Option<(Vec<usize>, f64)> {
    let goal = graph.trunk;
    let target = graph.nodes[goal].centroid;
    let h = |v: usize| {
        if graph.geometric {
            (graph.nodes[v].centroid - target).norm()
        } else {
            0.0
        }
    };
    let n = graph.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    g[source] = 0.0;
    heap.push(Entry {
        cost: h(source),
        node: source,
    });
    while let Some(Entry { node, .. }) = heap.pop() {
        if closed[node] {
            continue;
        }
        if node == goal {
            let mut path = vec![goal];
            let mut cur = goal;
            while cur != source {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Some((path, g[goal]));
        }
        closed[node] = true;
        for &(m, w) in &graph.adjacency[node] {
            let c = g[node] + w;
            if c < g[m] {
                g[m] = c;
                parent[m] = node;
                heap.push(Entry { cost: c + h(m), node: m });
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{voxelize, Label, LabeledPoint, PointCloud};
    use crate::Vec3;
    use rand::{Rng, SeedableRng};

    fn abstract_graph(n: usize, edges: &[(usize, usize, f64)], trunk: usize) -> TreeGraph {
        TreeGraph::from_edges(vec![Vec3::zeros(); n], edges, trunk).unwrap()
    }

    #[test]
    fn chain() {
        // t=0, a=1, b=2
        let g = abstract_graph(3, &[(0, 1, 1.0), (1, 2, 1.0)], 0);
        let p = shortest_paths(&g);
        assert_eq!(p.path(2).unwrap(), vec![2, 1, 0]);
        assert_eq!(p.path(0).unwrap(), vec![0]);
        assert_eq!(p.order, vec![0, 1, 2]);
    }

    #[test]
    fn diamond_prefers_smaller_next_hop() {
        // t=0, a=1, b=2, c=3: t–a–c and t–b–c, equal weights.
        let g = abstract_graph(4, &[(0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)], 0);
        assert_eq!(shortest_paths(&g).path(3).unwrap(), vec![3, 1, 0]);
        // Relabel so the other branch carries the smaller id.
        let g = abstract_graph(4, &[(0, 2, 1.0), (0, 1, 1.0), (2, 3, 1.0), (1, 3, 1.0)], 0);
        assert_eq!(shortest_paths(&g).path(3).unwrap(), vec![3, 1, 0]);
    }

    #[test]
    fn unreachable_nodes_have_no_path() {
        let g = abstract_graph(4, &[(0, 1, 1.0), (2, 3, 1.0)], 0);
        let p = shortest_paths(&g);
        assert!(p.path(2).is_none());
        assert_eq!(p.unreachable_count(), 2);
        assert!(astar(&g, 3).is_none());
    }

    /// Floyd–Warshall as an independent all-pairs reference.
    fn all_pairs(g: &TreeGraph) -> Vec<Vec<f64>> {
        let n = g.len();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (a, row) in d.iter_mut().enumerate() {
            row[a] = 0.0;
            for &(b, w) in &g.adjacency[a] {
                row[b] = w;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    #[test]
    fn paths_are_optimal_on_random_point_graphs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let cloud: PointCloud = (0..400)
                .map(|_| LabeledPoint::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..3.0), Label::Unknown))
                .collect();
            let grid = voxelize(&cloud, 0.25).unwrap();
            let g = TreeGraph::build(&grid, &cloud, 0.45).unwrap();
            let paths = shortest_paths(&g);
            let reference = all_pairs(&g);
            for v in 0..g.len() {
                let expected = reference[v][g.trunk];
                match paths.path(v) {
                    None => assert!(expected.is_infinite()),
                    Some(path) => {
                        let len: f64 = path.windows(2).map(|w| g.weight(w[0], w[1]).unwrap()).sum();
                        assert!((len - expected).abs() < 1e-9, "node {v}: {len} vs {expected}");
                        let (_, a_len) = astar(&g, v).unwrap();
                        assert!((a_len - expected).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
