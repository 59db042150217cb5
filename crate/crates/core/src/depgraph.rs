//! Worker dependency graph, chordal completion with maximal cliques, and the
//! recursive tree whose sibling subtrees hold mutually independent workers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::model::WorkerId;
use crate::seqplan::SequenceCatalog;

/// Undirected simple graph over workers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Wdg {
    adj: BTreeMap<WorkerId, BTreeSet<WorkerId>>,
}

impl Wdg {
    pub fn new(nodes: impl IntoIterator<Item = WorkerId>) -> Self {
        Wdg {
            adj: nodes.into_iter().map(|n| (n, BTreeSet::new())).collect(),
        }
    }

    /// Adds an edge, inserting missing endpoints. Self-loops are ignored.
    pub fn add_edge(&mut self, a: WorkerId, b: WorkerId) {
        if a == b {
            return;
        }
        self.adj.entry(a).or_default().insert(b);
        self.adj.entry(b).or_default().insert(a);
    }

    pub fn nodes(&self) -> impl Iterator<Item = WorkerId> + '_ {
        self.adj.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn contains(&self, v: WorkerId) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn neighbors(&self, v: WorkerId) -> impl Iterator<Item = WorkerId> + '_ {
        self.adj.get(&v).into_iter().flatten().copied()
    }

    pub fn has_edge(&self, a: WorkerId, b: WorkerId) -> bool {
        self.adj.get(&a).is_some_and(|n| n.contains(&b))
    }

    /// Edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(WorkerId, WorkerId)> {
        self.adj
            .iter()
            .flat_map(|(&a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect()
    }

    /// Subgraph induced by `keep`.
    pub fn induced(&self, keep: &BTreeSet<WorkerId>) -> Wdg {
        Wdg {
            adj: self
                .adj
                .iter()
                .filter(|(v, _)| keep.contains(v))
                .map(|(&v, ns)| (v, ns.intersection(keep).copied().collect()))
                .collect(),
        }
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<BTreeSet<WorkerId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in self.nodes() {
            if seen.contains(&v) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut stack = vec![v];
            seen.insert(v);
            while let Some(u) = stack.pop() {
                comp.insert(u);
                for n in self.neighbors(u) {
                    if seen.insert(n) {
                        stack.push(n);
                    }
                }
            }
            out.push(comp);
        }
        out
    }
}

/// Edge between two workers iff their reachable sets share a task. Uses a
/// sorted-merge intersection per pair.
pub fn build_wdg(catalog: &SequenceCatalog) -> Wdg {
    let mut g = Wdg::new(catalog.workers.iter().map(|c| c.worker));
    for (i, a) in catalog.workers.iter().enumerate() {
        for b in &catalog.workers[i + 1..] {
            if sorted_intersect(&a.reachable, &b.reachable) {
                g.add_edge(a.worker, b.worker);
            }
        }
    }
    g
}

fn sorted_intersect<T: Ord>(a: &[T], b: &[T]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Maximal cliques of the chordal completion of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueSet {
    /// Each clique sorted; cliques in order of first appearance along the
    /// elimination order.
    pub cliques: Vec<Vec<WorkerId>>,
    /// Edges added to make the graph chordal, `(a, b)` with `a < b`.
    pub fill_edges: Vec<(WorkerId, WorkerId)>,
    /// Perfect elimination order of the completed graph.
    pub elimination_order: Vec<WorkerId>,
    /// The completed (chordal) graph.
    pub chordal: Wdg,
}

/// Maximum cardinality search visit order: each step numbers the vertex
/// with the most already-numbered neighbours, lowest id on ties.
pub fn mcs_order(g: &Wdg) -> Vec<WorkerId> {
    let mut weight: BTreeMap<WorkerId, usize> = g.nodes().map(|v| (v, 0)).collect();
    let mut order = Vec::with_capacity(weight.len());
    while !weight.is_empty() {
        let (&v, _) = weight
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("non-empty");
        weight.remove(&v);
        order.push(v);
        for n in g.neighbors(v) {
            if let Some(w) = weight.get_mut(&n) {
                *w += 1;
            }
        }
    }
    order
}

/// Chordal completion and maximal cliques. The reverse of the MCS visit
/// order is eliminated one vertex at a time; the remaining neighbours of
/// each eliminated vertex are joined into a clique (the fill), and the
/// vertex with those neighbours is a candidate clique. Candidates contained
/// in another are dropped.
pub fn mcs_partition(g: &Wdg) -> CliqueSet {
    let mut elimination_order = mcs_order(g);
    elimination_order.reverse();
    let mut chordal = g.clone();
    let mut eliminated = BTreeSet::new();
    let mut fill = BTreeSet::new();
    let mut candidates: Vec<Vec<WorkerId>> = Vec::new();
    for &v in &elimination_order {
        let later: Vec<WorkerId> = chordal.neighbors(v).filter(|n| !eliminated.contains(n)).collect();
        for (i, &a) in later.iter().enumerate() {
            for &b in &later[i + 1..] {
                if !chordal.has_edge(a, b) {
                    chordal.add_edge(a, b);
                    fill.insert((a.min(b), a.max(b)));
                }
            }
        }
        let mut clique = later;
        clique.push(v);
        clique.sort_unstable();
        candidates.push(clique);
        eliminated.insert(v);
    }
    let sets: Vec<BTreeSet<WorkerId>> = candidates.iter().map(|c| c.iter().copied().collect()).collect();
    let mut cliques = Vec::new();
    for (i, c) in sets.iter().enumerate() {
        let dominated = sets
            .iter()
            .enumerate()
            .any(|(j, d)| j != i && c.is_subset(d) && (c.len() < d.len() || j < i));
        if !dominated {
            cliques.push(candidates[i].clone());
        }
    }
    CliqueSet {
        cliques,
        fill_edges: fill.into_iter().collect(),
        elimination_order,
        chordal,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeNode {
    pub id: usize,
    /// Sorted.
    pub workers: Vec<WorkerId>,
    pub parent: Option<usize>,
    /// Ordered by smallest worker id of the child subtree.
    pub children: Vec<usize>,
}

/// Recursive clique tree of one graph. Node 0 is the root; node worker sets
/// partition the graph's vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Serialize)]
struct JsonNode<'a> {
    id: usize,
    workers: &'a [WorkerId],
    children: Vec<JsonNode<'a>>,
}

impl DependencyTree {
    pub fn root(&self) -> Option<&TreeNode> {
        self.nodes.first()
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    /// Workers of the subtree rooted at `id`, sorted.
    pub fn subtree_workers(&self, id: usize) -> Vec<WorkerId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.extend_from_slice(&self.nodes[n].workers);
            stack.extend_from_slice(&self.nodes[n].children);
        }
        out.sort_unstable();
        out
    }

    pub fn workers(&self) -> Vec<WorkerId> {
        if self.nodes.is_empty() {
            Vec::new()
        } else {
            self.subtree_workers(0)
        }
    }

    fn json_node(&self, id: usize) -> JsonNode<'_> {
        let n = &self.nodes[id];
        JsonNode {
            id,
            workers: &n.workers,
            children: n.children.iter().map(|&c| self.json_node(c)).collect(),
        }
    }

    /// Nested `{id, workers, children}` document.
    pub fn to_json(&self) -> serde_json::Value {
        if self.nodes.is_empty() {
            return serde_json::Value::Null;
        }
        serde_json::to_value(self.json_node(0)).expect("tree serializes")
    }

    /// One line per node, indented two spaces per level.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.nodes.is_empty() {
            self.text_node(0, 0, &mut out);
        }
        out
    }

    fn text_node(&self, id: usize, depth: usize, out: &mut String) {
        let n = &self.nodes[id];
        let ws: Vec<String> = n.workers.iter().map(|w| w.to_string()).collect();
        let _ = writeln!(out, "{:indent$}[{}] {{{}}}", "", id, ws.join(", "), indent = depth * 2);
        for &c in &n.children {
            self.text_node(c, depth + 1, out);
        }
    }
}

/// Picks the root clique: most components left after removing it from `g`,
/// then fewest workers, then smallest id list.
fn choose_root<'a>(g: &Wdg, x: &'a CliqueSet) -> Option<&'a Vec<WorkerId>> {
    x.cliques
        .iter()
        .map(|c| {
            let rest: BTreeSet<WorkerId> = g.nodes().filter(|v| c.binary_search(v).is_err()).collect();
            (g.induced(&rest).components().len(), c)
        })
        .max_by(|(na, a), (nb, b)| na.cmp(nb).then(b.len().cmp(&a.len())).then(b.cmp(a)))
        .map(|(_, c)| c)
}

/// Builds the recursive tree: the chosen clique becomes the root, and each
/// connected component left after removing it is completed and split again
/// to form one child subtree.
pub fn build_tree(g: &Wdg, x: &CliqueSet) -> DependencyTree {
    let mut tree = DependencyTree { nodes: Vec::new() };
    grow(g, x, None, &mut tree);
    tree
}

fn grow(g: &Wdg, x: &CliqueSet, parent: Option<usize>, tree: &mut DependencyTree) -> Option<usize> {
    let root = choose_root(g, x)?;
    let id = tree.nodes.len();
    tree.nodes.push(TreeNode {
        id,
        workers: root.clone(),
        parent,
        children: Vec::new(),
    });
    let rest: BTreeSet<WorkerId> = g.nodes().filter(|v| root.binary_search(v).is_err()).collect();
    for comp in g.induced(&rest).components() {
        let sub = g.induced(&comp);
        let sub_x = mcs_partition(&sub);
        if let Some(child) = grow(&sub, &sub_x, Some(id), tree) {
            tree.nodes[id].children.push(child);
        }
    }
    Some(id)
}

/// One tree per connected component, ordered by smallest worker id.
pub fn build_forest(g: &Wdg) -> Vec<DependencyTree> {
    g.components()
        .into_iter()
        .map(|comp| {
            let sub = g.induced(&comp);
            let x = mcs_partition(&sub);
            build_tree(&sub, &x)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(i: u64) -> WorkerId {
        WorkerId(i)
    }

    fn graph(n: u64, edges: &[(u64, u64)]) -> Wdg {
        let mut g = Wdg::new((1..=n).map(w));
        for &(a, b) in edges {
            g.add_edge(w(a), w(b));
        }
        g
    }

    #[test]
    fn triangle_is_one_clique() {
        let g = graph(3, &[(1, 2), (2, 3), (1, 3)]);
        let x = mcs_partition(&g);
        assert_eq!(x.cliques, vec![vec![w(1), w(2), w(3)]]);
        assert!(x.fill_edges.is_empty());
        let t = build_tree(&g, &x);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].workers, vec![w(1), w(2), w(3)]);
    }

    #[test]
    fn path_gives_two_cliques_and_lexicographic_root() {
        let g = graph(3, &[(1, 2), (2, 3)]);
        let x = mcs_partition(&g);
        let mut cl = x.cliques.clone();
        cl.sort();
        assert_eq!(cl, vec![vec![w(1), w(2)], vec![w(2), w(3)]]);
        assert!(x.fill_edges.is_empty());
        let t = build_tree(&g, &x);
        assert_eq!(t.nodes[0].workers, vec![w(1), w(2)]);
        assert_eq!(t.nodes[0].children, vec![1]);
        assert_eq!(t.nodes[1].workers, vec![w(3)]);
    }

    #[test]
    fn four_cycle_gets_one_chord() {
        // 1-2-3-4-1; MCS visits 1, 2, 3, 4 so 4 is eliminated first and
        // joins its neighbours 1 and 3.
        let g = graph(4, &[(1, 2), (2, 3), (3, 4), (4, 1)]);
        let x = mcs_partition(&g);
        assert_eq!(x.fill_edges, vec![(w(1), w(3))]);
        let mut cl = x.cliques.clone();
        cl.sort();
        assert_eq!(cl, vec![vec![w(1), w(2), w(3)], vec![w(1), w(3), w(4)]]);
    }

    #[test]
    fn star_root_splits_leaves() {
        let g = graph(4, &[(1, 2), (1, 3), (1, 4)]);
        let t = build_tree(&g, &mcs_partition(&g));
        // Every clique {1, leaf} leaves two components; {1, 2} wins on ids.
        assert_eq!(t.nodes[0].workers, vec![w(1), w(2)]);
        assert_eq!(t.nodes[0].children.len(), 2);
        assert_eq!(t.workers(), vec![w(1), w(2), w(3), w(4)]);
    }

    #[test]
    fn forest_and_exports() {
        let g = graph(5, &[(1, 2), (4, 5)]);
        let f = build_forest(&g);
        assert_eq!(f.len(), 3);
        assert_eq!(f[1].workers(), vec![w(3)]);
        let text = f[0].to_text();
        assert_eq!(text, "[0] {w1, w2}\n");
        let json = f[2].to_json();
        assert_eq!(json["workers"], serde_json::json!([4, 5]));
        assert!(build_tree(&Wdg::default(), &mcs_partition(&Wdg::default())).nodes.is_empty());
    }
}
