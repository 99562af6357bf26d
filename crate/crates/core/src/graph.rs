//! Signed correlation graph and maximal clique enumeration.
//!
//! Every variable appears twice, once per copy. Two nodes of the same copy
//! are joined when their correlation is at most `rho`; nodes of different
//! copies are joined when it is at least `-rho`. Reading copy 1 as sign `+1`
//! and copy 2 as sign `-1`, a node set is a clique exactly when the
//! corresponding sign assignment makes every adjusted pairwise correlation
//! `<= rho`. Each such signed set therefore appears twice, once as its mirror
//! image with the copies swapped.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::dataset::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::measures::SignedSet;

pub type NodeId = u32;

/// Default number of maximal cliques enumerated before giving up.
pub const DEFAULT_CLIQUE_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub var: usize,
    /// 1 or 2.
    pub copy: u8,
}

#[derive(Clone, Debug)]
pub struct PromisingGraph {
    vars: usize,
    rho: f64,
    adj: Vec<Vec<NodeId>>,
}

impl PromisingGraph {
    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn node_id(&self, node: Node) -> NodeId {
        ((usize::from(node.copy) - 1) * self.vars + node.var) as NodeId
    }

    pub fn node(&self, id: NodeId) -> Node {
        let id = id as usize;
        Node {
            var: id % self.vars,
            copy: (id / self.vars + 1) as u8,
        }
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adj[id as usize]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn adjacency(&self) -> &[Vec<NodeId>] {
        &self.adj
    }

    pub fn maximal_cliques(&self, min_size: usize, opts: &CliqueOptions) -> CliqueResult {
        maximal_cliques(&self.adj, min_size, opts)
    }

    /// Writes one line `var:copy var:copy corr` per edge, with 0-based
    /// variable indices and copies 1/2.
    pub fn write_edge_list<W: Write>(
        &self,
        a: &CorrelationMatrix,
        mut w: W,
    ) -> std::io::Result<()> {
        for (u, nbrs) in self.adj.iter().enumerate() {
            let nu = self.node(u as NodeId);
            for &v in nbrs.iter().filter(|&&v| v as usize > u) {
                let nv = self.node(v);
                writeln!(
                    w,
                    "{}:{} {}:{} {}",
                    nu.var,
                    nu.copy,
                    nv.var,
                    nv.copy,
                    a.get(nu.var, nv.var)
                )?;
            }
        }
        Ok(())
    }
}

pub fn build_graph(a: &CorrelationMatrix, rho: f64) -> Result<PromisingGraph> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument("rho must be in [-1,1]".into()));
    }
    let n = a.dim();
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); 2 * n];
    let id = |copy: usize, var: usize| (copy * n + var) as NodeId;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = a.get(i, j);
            if r <= rho {
                for c in 0..2 {
                    adj[id(c, i) as usize].push(id(c, j));
                    adj[id(c, j) as usize].push(id(c, i));
                }
            }
            if r >= -rho {
                for c in 0..2 {
                    adj[id(c, i) as usize].push(id(1 - c, j));
                    adj[id(1 - c, j) as usize].push(id(c, i));
                }
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    Ok(PromisingGraph { vars: n, rho, adj })
}

/// Maps copy-1 nodes to `+1` and copy-2 nodes to `-1`. A clique and its
/// mirror image map to the same canonical signed set.
pub fn clique_to_signed_set(g: &PromisingGraph, clique: &[NodeId]) -> Result<SignedSet> {
    let mut pairs: Vec<(usize, i8)> = clique
        .iter()
        .map(|&id| {
            let node = g.node(id);
            (node.var, if node.copy == 1 { 1 } else { -1 })
        })
        .collect();
    pairs.sort_unstable();
    if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidSubset(
            "clique contains both copies of a variable".into(),
        ));
    }
    SignedSet::from_pairs(pairs)
}

#[derive(Clone, Debug)]
pub struct CliqueOptions {
    /// Abort once more than this many maximal cliques have been found.
    pub budget: u64,
    /// Checked between branches; setting it stops enumeration early.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for CliqueOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_CLIQUE_BUDGET,
            cancel: None,
        }
    }
}

/// Enumeration stopped before completion. `partial` holds the cliques found
/// so far (sorted); which ones depends on scheduling.
#[derive(Clone, Debug, PartialEq)]
pub struct CliqueInterrupted {
    pub partial: Vec<Vec<NodeId>>,
    pub cancelled: bool,
}

pub type CliqueResult = std::result::Result<Vec<Vec<NodeId>>, CliqueInterrupted>;

/// Vertices ordered by repeatedly removing a minimum-degree vertex, ties
/// broken by smallest id.
pub fn degeneracy_order(adj: &[Vec<NodeId>]) -> Vec<NodeId> {
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let max_degree = degree.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); max_degree + 1];
    for (v, &d) in degree.iter().enumerate() {
        buckets[d].insert(v as NodeId);
    }
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut low = 0;
    for _ in 0..n {
        low = low.min(max_degree);
        while buckets[low].is_empty() {
            low += 1;
        }
        let v = buckets[low].pop_first().expect("non-empty bucket");
        removed[v as usize] = true;
        order.push(v);
        for &u in &adj[v as usize] {
            let u = u as usize;
            if removed[u] {
                continue;
            }
            let d = degree[u];
            buckets[d].remove(&(u as NodeId));
            degree[u] = d - 1;
            buckets[d - 1].insert(u as NodeId);
            low = low.min(d - 1);
        }
    }
    order
}

struct Search<'a> {
    adj: &'a [Vec<NodeId>],
    min_size: usize,
    budget: u64,
    found: &'a AtomicU64,
    stop: &'a AtomicBool,
    cancel: Option<&'a AtomicBool>,
}

impl Search<'_> {
    fn halted(&self) -> bool {
        self.stop.load(Ordering::Relaxed) || self.cancel.is_some_and(|c| c.load(Ordering::Relaxed))
    }

    fn intersect(&self, set: &[NodeId], v: NodeId) -> Vec<NodeId> {
        let nbrs = &self.adj[v as usize];
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < set.len() && j < nbrs.len() {
            match set[i].cmp(&nbrs[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(set[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    fn count_common(&self, set: &[NodeId], v: NodeId) -> usize {
        let nbrs = &self.adj[v as usize];
        set.iter().filter(|x| nbrs.binary_search(x).is_ok()).count()
    }

    /// Bron–Kerbosch with Tomita pivoting. `p` and `x` are sorted.
    fn expand(
        &self,
        r: &mut Vec<NodeId>,
        mut p: Vec<NodeId>,
        mut x: Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) {
        if self.halted() {
            return;
        }
        if p.is_empty() {
            if x.is_empty() && r.len() >= self.min_size {
                let mut clique = r.clone();
                clique.sort_unstable();
                out.push(clique);
                if self.found.fetch_add(1, Ordering::Relaxed) + 1 > self.budget {
                    self.stop.store(true, Ordering::Relaxed);
                }
            }
            return;
        }
        if r.len() + p.len() < self.min_size {
            return;
        }
        let pivot = p
            .iter()
            .chain(&x)
            .copied()
            .max_by(|&a, &b| {
                self.count_common(&p, a)
                    .cmp(&self.count_common(&p, b))
                    .then(b.cmp(&a))
            })
            .expect("p is non-empty");
        let pivot_nbrs = &self.adj[pivot as usize];
        let candidates: Vec<NodeId> = p
            .iter()
            .copied()
            .filter(|v| pivot_nbrs.binary_search(v).is_err())
            .collect();
        for v in candidates {
            let new_p = self.intersect(&p, v);
            let new_x = self.intersect(&x, v);
            r.push(v);
            self.expand(r, new_p, new_x, out);
            r.pop();
            if let Ok(pos) = p.binary_search(&v) {
                p.remove(pos);
            }
            let pos = x.binary_search(&v).unwrap_or_else(|e| e);
            x.insert(pos, v);
            if self.halted() {
                return;
            }
        }
    }
}

/// Enumerates every maximal clique with at least `min_size` vertices of the
/// undirected graph given by sorted adjacency lists. Each vertex in
/// degeneracy order roots an independent subtree; subtrees run in parallel
/// and the merged output is sorted, so the result does not depend on the
/// number of threads.
pub fn maximal_cliques(adj: &[Vec<NodeId>], min_size: usize, opts: &CliqueOptions) -> CliqueResult {
    let order = degeneracy_order(adj);
    let mut position = vec![0usize; adj.len()];
    for (i, &v) in order.iter().enumerate() {
        position[v as usize] = i;
    }
    let found = AtomicU64::new(0);
    let stop = AtomicBool::new(false);
    let search = Search {
        adj,
        min_size: min_size.max(1),
        budget: opts.budget,
        found: &found,
        stop: &stop,
        cancel: opts.cancel.as_deref(),
    };
    let mut cliques: Vec<Vec<NodeId>> = order
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, &v)| {
            let mut out = Vec::new();
            if search.halted() {
                return out;
            }
            let (p, x): (Vec<NodeId>, Vec<NodeId>) = adj[v as usize]
                .iter()
                .partition(|&&u| position[u as usize] > i);
            search.expand(&mut vec![v], p, x, &mut out);
            out
        })
        .collect();
    cliques.sort_unstable();
    let cancelled = opts
        .cancel
        .as_deref()
        .is_some_and(|c| c.load(Ordering::Relaxed));
    if stop.load(Ordering::Relaxed) || cancelled {
        cliques.truncate(opts.budget as usize);
        return Err(CliqueInterrupted {
            partial: cliques,
            cancelled,
        });
    }
    Ok(cliques)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    fn undirected(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        adj.iter_mut().for_each(|l| l.sort_unstable());
        adj
    }

    fn cliques(adj: &[Vec<NodeId>], min: usize) -> Vec<Vec<NodeId>> {
        maximal_cliques(adj, min, &CliqueOptions::default()).unwrap()
    }

    fn mixed_triple() -> CorrelationMatrix {
        CorrelationMatrix::new(
            SymMatrix::from_rows(&[
                vec![1.0, -0.6, 0.5],
                vec![-0.6, 1.0, 0.3],
                vec![0.5, 0.3, 1.0],
            ])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn small_graphs() {
        assert_eq!(
            cliques(&undirected(3, &[(0, 1), (1, 2), (0, 2)]), 1),
            vec![vec![0, 1, 2]]
        );
        assert_eq!(
            cliques(&undirected(3, &[(0, 1), (1, 2)]), 1),
            vec![vec![0, 1], vec![1, 2]]
        );
        let c5 = undirected(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let found = cliques(&c5, 1);
        assert_eq!(found.len(), 5);
        assert!(found.iter().all(|c| c.len() == 2));
        assert!(cliques(&c5, 3).is_empty());
    }

    #[test]
    fn isolated_vertices_are_cliques() {
        assert_eq!(cliques(&undirected(2, &[]), 1), vec![vec![0], vec![1]]);
    }

    #[test]
    fn mixed_signs_form_a_cross_copy_triangle() {
        let g = build_graph(&mixed_triple(), 0.0).unwrap();
        let ids: Vec<NodeId> = [(0, 1), (1, 1), (2, 2)]
            .iter()
            .map(|&(var, copy)| g.node_id(Node { var, copy }))
            .collect();
        for (i, &u) in ids.iter().enumerate() {
            for &v in &ids[i + 1..] {
                assert!(g.has_edge(u, v));
            }
        }
        let found = g.maximal_cliques(3, &CliqueOptions::default()).unwrap();
        let signed: BTreeSet<SignedSet> = found
            .iter()
            .map(|c| clique_to_signed_set(&g, c).unwrap())
            .collect();
        assert_eq!(found.len(), 2);
        assert_eq!(
            signed.into_iter().collect::<Vec<_>>(),
            vec![SignedSet::new(vec![0, 1, 2], vec![1, 1, -1]).unwrap()]
        );
    }

    #[test]
    fn positive_block_has_no_triangles() {
        let a = CorrelationMatrix::equicorrelated(4, 0.5).unwrap();
        let g = build_graph(&a, 0.0).unwrap();
        for v in 0..4 {
            let u = g.node_id(Node { var: v, copy: 1 });
            assert!(g.neighbors(u).iter().all(|&w| g.node(w).copy == 2));
        }
        let all = g.maximal_cliques(1, &CliqueOptions::default()).unwrap();
        assert!(all.iter().all(|c| c.len() <= 2));
    }

    #[test]
    fn negative_block_copies_are_complete() {
        let a = CorrelationMatrix::equicorrelated(4, -0.1).unwrap();
        let g = build_graph(&a, 0.0).unwrap();
        for copy in [1, 2] {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    assert!(g.has_edge(
                        g.node_id(Node { var: i, copy }),
                        g.node_id(Node { var: j, copy })
                    ));
                }
            }
        }
        // no cross-copy edges at rho = 0 since every correlation is negative
        assert_eq!(g.edge_count(), 12);
    }

    #[test]
    fn no_self_pair_edges() {
        let g = build_graph(&CorrelationMatrix::identity(3), 1.0).unwrap();
        for v in 0..3 {
            assert!(!g.has_edge(
                g.node_id(Node { var: v, copy: 1 }),
                g.node_id(Node { var: v, copy: 2 })
            ));
        }
        assert!(build_graph(&CorrelationMatrix::identity(3), 1.5).is_err());
    }

    #[test]
    fn mirror_cliques_share_a_signed_set() {
        let g = build_graph(&mixed_triple(), 0.0).unwrap();
        let ids = |spec: &[(usize, u8)]| -> Vec<NodeId> {
            spec.iter()
                .map(|&(var, copy)| g.node_id(Node { var, copy }))
                .collect()
        };
        let a = clique_to_signed_set(&g, &ids(&[(0, 1), (1, 1), (2, 2)])).unwrap();
        let b = clique_to_signed_set(&g, &ids(&[(0, 2), (1, 2), (2, 1)])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.signs(), &[1, 1, -1]);
        let c = clique_to_signed_set(&g, &ids(&[(0, 1), (2, 1)])).unwrap();
        assert_eq!(c.signs(), &[1, 1]);
        assert!(clique_to_signed_set(&g, &ids(&[(0, 1), (0, 2), (1, 1)])).is_err());
    }

    #[test]
    fn budget_aborts_with_partial() {
        let c5 = undirected(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let opts = CliqueOptions {
            budget: 2,
            cancel: None,
        };
        let err = maximal_cliques(&c5, 1, &opts).unwrap_err();
        assert!(!err.cancelled);
        assert!(err.partial.len() <= 2);
    }

    #[test]
    fn cancellation() {
        let flag = Arc::new(AtomicBool::new(true));
        let opts = CliqueOptions {
            budget: 100,
            cancel: Some(flag),
        };
        let err = maximal_cliques(&undirected(3, &[(0, 1)]), 1, &opts).unwrap_err();
        assert!(err.cancelled);
    }

    #[test]
    fn degeneracy_order_breaks_ties_by_id() {
        let adj = undirected(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(degeneracy_order(&adj), vec![0, 1, 2, 3]);
    }
}
