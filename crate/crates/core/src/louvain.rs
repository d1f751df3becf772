//! Louvain modularity maximization: greedy local moves plus aggregation
//! passes. Node visitation is fixed to ascending index (callers pass nodes
//! sorted by user id), so the result is deterministic.

/// Weighted level graph. Self-loop weight counts twice toward a node degree.
struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_w: Vec<f64>,
    degree: Vec<f64>,
    m2: f64,
}

impl LevelGraph {
    fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b {
                continue;
            }
            adj[a].push((b, 1.0));
            adj[b].push((a, 1.0));
        }
        let self_w = vec![0.0; n];
        let mut graph = LevelGraph {
            adj,
            self_w,
            degree: Vec::new(),
            m2: 0.0,
        };
        graph.refresh_degrees();
        graph
    }

    fn refresh_degrees(&mut self) {
        self.degree = self
            .adj
            .iter()
            .zip(&self.self_w)
            .map(|(nbrs, &s)| nbrs.iter().map(|(_, w)| w).sum::<f64>() + 2.0 * s)
            .collect();
        self.m2 = self.degree.iter().sum();
    }

    fn len(&self) -> usize {
        self.adj.len()
    }
}

/// One pass of greedy local moves. Returns the node -> community assignment
/// and whether any node moved.
fn local_move(graph: &LevelGraph, resolution: f64) -> (Vec<usize>, bool) {
    let n = graph.len();
    let mut node_comm: Vec<usize> = (0..n).collect();
    let mut comm_tot: Vec<f64> = graph.degree.clone();
    let mut any_moved = false;

    const MAX_SWEEPS: usize = 1000;
    for _ in 0..MAX_SWEEPS {
        let mut moved_this_sweep = false;
        for i in 0..n {
            let old = node_comm[i];
            // Weight of links from i into each neighbouring community,
            // iterated in ascending community id for deterministic ties.
            let mut links: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
            links.insert(old, 0.0);
            for &(j, w) in &graph.adj[i] {
                *links.entry(node_comm[j]).or_insert(0.0) += w;
            }
            comm_tot[old] -= graph.degree[i];

            let gain_of = |c: usize, link: f64| link - resolution * comm_tot[c] * graph.degree[i] / graph.m2;
            let mut best = old;
            let mut best_gain = gain_of(old, links[&old]);
            for (&c, &link) in &links {
                if c == old {
                    continue;
                }
                let gain = gain_of(c, link);
                if gain > best_gain + 1e-12 {
                    best_gain = gain;
                    best = c;
                }
            }
            comm_tot[best] += graph.degree[i];
            if best != old {
                node_comm[i] = best;
                moved_this_sweep = true;
                any_moved = true;
            }
        }
        if !moved_this_sweep {
            break;
        }
    }
    (node_comm, any_moved)
}

/// Collapse communities into supernodes. Community ids are renumbered by
/// first occurrence in node order.
fn aggregate(graph: &LevelGraph, node_comm: &[usize]) -> (LevelGraph, Vec<usize>) {
    let n = graph.len();
    let mut renumber = vec![usize::MAX; n];
    let mut next = 0usize;
    for i in 0..n {
        let c = node_comm[i];
        if renumber[c] == usize::MAX {
            renumber[c] = next;
            next += 1;
        }
    }
    let compact: Vec<usize> = node_comm.iter().map(|&c| renumber[c]).collect();

    let mut self_w = vec![0.0; next];
    let mut weights: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
    for i in 0..n {
        self_w[compact[i]] += graph.self_w[i];
        for &(j, w) in &graph.adj[i] {
            if j < i {
                continue; // each undirected edge once
            }
            let (ci, cj) = (compact[i], compact[j]);
            if ci == cj {
                self_w[ci] += w;
            } else {
                let key = (ci.min(cj), ci.max(cj));
                *weights.entry(key).or_insert(0.0) += w;
            }
        }
    }
    let mut adj = vec![Vec::new(); next];
    for (&(a, b), &w) in &weights {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let mut new_graph = LevelGraph {
        adj,
        self_w,
        degree: Vec::new(),
        m2: 0.0,
    };
    new_graph.refresh_degrees();
    (new_graph, compact)
}

/// Louvain partition of an undirected unweighted graph given as unique node
/// pairs. Returns one community id per node, ids numbered by the smallest
/// member node.
pub fn louvain(n_nodes: usize, edges: &[(usize, usize)], resolution: f64) -> Vec<usize> {
    if n_nodes == 0 {
        return Vec::new();
    }
    let mut graph = LevelGraph::from_edges(n_nodes, edges);
    let mut membership: Vec<usize> = (0..n_nodes).collect();
    if graph.m2 == 0.0 {
        return membership;
    }
    loop {
        let (node_comm, moved) = local_move(&graph, resolution);
        if !moved {
            break;
        }
        let (aggregated, compact) = aggregate(&graph, &node_comm);
        for slot in membership.iter_mut() {
            *slot = compact[*slot];
        }
        if aggregated.len() == graph.len() {
            break;
        }
        graph = aggregated;
    }
    // Renumber by smallest original member.
    let mut renumber = std::collections::BTreeMap::new();
    let mut next = 0usize;
    for &c in &membership {
        renumber.entry(c).or_insert_with(|| {
            let id = next;
            next += 1;
            id
        });
    }
    membership.into_iter().map(|c| renumber[&c]).collect()
}

/// Modularity of a partition of an unweighted undirected graph:
/// `sum_c [ L_c / m - resolution * (D_c / 2m)^2 ]`.
pub fn modularity(
    n_nodes: usize,
    edges: &[(usize, usize)],
    communities: &[usize],
    resolution: f64,
) -> f64 {
    assert_eq!(communities.len(), n_nodes);
    let m = edges.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let n_comms = communities.iter().copied().max().unwrap_or(0) + 1;
    let mut intra = vec![0.0f64; n_comms];
    let mut comm_degree = vec![0.0f64; n_comms];
    for &(a, b) in edges {
        if communities[a] == communities[b] {
            intra[communities[a]] += 1.0;
        }
        comm_degree[communities[a]] += 1.0;
        comm_degree[communities[b]] += 1.0;
    }
    intra
        .iter()
        .zip(&comm_degree)
        .map(|(&l, &d)| l / m - resolution * (d / (2.0 * m)).powi(2))
        .sum()
}
