use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::ClusterId;

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Undirected cluster association graph split into connected components.
///
/// Communities are components with at least two clusters; every other
/// cluster is isolated. Components are listed by their smallest member, and
/// members are sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssociationGraph {
    vertices: Vec<ClusterId>,
    edges: Vec<(ClusterId, ClusterId)>,
    communities: Vec<Vec<ClusterId>>,
    isolated: Vec<ClusterId>,
}

impl AssociationGraph {
    /// Builds the graph. Edges are normalized to `(smaller, larger)`,
    /// deduplicated and sorted; self-loops are dropped.
    ///
    /// Panics if an edge names a cluster missing from `all_clusters`.
    pub fn from_edges(edges: &[(ClusterId, ClusterId)], all_clusters: &[ClusterId]) -> Self {
        let mut vertices = all_clusters.to_vec();
        vertices.sort_unstable();
        vertices.dedup();
        let index: BTreeMap<ClusterId, usize> =
            vertices.iter().enumerate().map(|(i, &c)| (c, i)).collect();

        let mut norm: Vec<(ClusterId, ClusterId)> = edges
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        norm.sort_unstable();
        norm.dedup();

        let mut uf = UnionFind::new(vertices.len());
        for (a, b) in &norm {
            let ia = *index.get(a).unwrap_or_else(|| panic!("edge names unknown cluster {a}"));
            let ib = *index.get(b).unwrap_or_else(|| panic!("edge names unknown cluster {b}"));
            uf.union(ia, ib);
        }
        // Vertices are sorted, so components come out keyed by first member.
        let mut by_root: BTreeMap<usize, Vec<ClusterId>> = BTreeMap::new();
        let mut order: Vec<usize> = Vec::new();
        for (i, &c) in vertices.iter().enumerate() {
            let root = uf.find(i);
            let entry = by_root.entry(root).or_default();
            if entry.is_empty() {
                order.push(root);
            }
            entry.push(c);
        }
        let mut communities = Vec::new();
        let mut isolated = Vec::new();
        for root in order {
            let comp = by_root.remove(&root).expect("root recorded");
            if comp.len() >= 2 {
                communities.push(comp);
            } else {
                isolated.push(comp[0]);
            }
        }
        Self {
            vertices,
            edges: norm,
            communities,
            isolated,
        }
    }

    /// A graph without edges: every cluster isolated.
    pub fn unconnected(all_clusters: &[ClusterId]) -> Self {
        Self::from_edges(&[], all_clusters)
    }

    pub fn vertices(&self) -> &[ClusterId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(ClusterId, ClusterId)] {
        &self.edges
    }

    pub fn communities(&self) -> &[Vec<ClusterId>] {
        &self.communities
    }

    pub fn isolated(&self) -> &[ClusterId] {
        &self.isolated
    }

    pub fn has_edge(&self, a: ClusterId, b: ClusterId) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).is_ok()
    }

    /// One `client:cluster client:cluster` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }
}

/// Connected components of the association graph.
pub fn build_graph(edges: &[(ClusterId, ClusterId)], all_clusters: &[ClusterId]) -> AssociationGraph {
    AssociationGraph::from_edges(edges, all_clusters)
}
