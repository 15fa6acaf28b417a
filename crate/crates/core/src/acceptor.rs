//! Node-labeled acyclic acceptors.
//!
//! A [`LabelGraph`] carries one vocabulary symbol per node. Every node has an
//! implicit self-loop — an accepting path may dwell on a node for any number
//! of consecutive frames — so explicit arcs must stay acyclic, which keeps
//! topological ordering and forward-backward well defined. A path from a
//! start node to a final node spells a phoneme sequence once blank nodes are
//! dropped.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::vocab::{Vocabulary, BLANK};

/// Weighted-acceptor skeleton: nodes labeled with symbol indices, explicit
/// arcs forming a DAG, and non-empty start/final node sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGraph {
    vocab_size: usize,
    symbols: Vec<usize>,
    arcs: Vec<(usize, usize)>,
    starts: Vec<usize>,
    finals: Vec<usize>,
}

impl LabelGraph {
    /// Validates node labels, arc endpoints, acyclicity of explicit arcs, the
    /// non-empty start/final sets, and the repeat rule: no explicit arc may
    /// connect two distinct nodes carrying the same non-blank symbol (such
    /// transitions must route through a blank node).
    pub fn new(
        vocab_size: usize,
        symbols: Vec<usize>,
        mut arcs: Vec<(usize, usize)>,
        mut starts: Vec<usize>,
        mut finals: Vec<usize>,
    ) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::InvalidGraph("vocabulary size must be >= 2".into()));
        }
        let n = symbols.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s >= vocab_size) {
            return Err(Error::InvalidGraph(format!(
                "node symbol {s} out of range for vocabulary of {vocab_size}"
            )));
        }
        arcs.sort_unstable();
        arcs.dedup();
        for &(src, dst) in &arcs {
            if src >= n || dst >= n {
                return Err(Error::InvalidGraph(format!("arc {src}->{dst} out of range")));
            }
            if src == dst {
                return Err(Error::InvalidGraph(format!(
                    "explicit self-loop on node {src}; self-loops are implicit"
                )));
            }
            if symbols[src] != BLANK && symbols[src] == symbols[dst] {
                return Err(Error::InvalidGraph(format!(
                    "arc {src}->{dst} connects two nodes with the same non-blank symbol"
                )));
            }
        }
        topo_order(n, &arcs)?;
        starts.sort_unstable();
        starts.dedup();
        finals.sort_unstable();
        finals.dedup();
        if starts.is_empty() || finals.is_empty() {
            return Err(Error::InvalidGraph("start and final sets must be non-empty".into()));
        }
        if starts.iter().chain(finals.iter()).any(|&v| v >= n) {
            return Err(Error::InvalidGraph("start/final node out of range".into()));
        }
        Ok(LabelGraph {
            vocab_size,
            symbols,
            arcs,
            starts,
            finals,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_nodes(&self) -> usize {
        self.symbols.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn symbol_of(&self, node: usize) -> usize {
        self.symbols[node]
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    /// Explicit arcs, sorted by `(src, dst)`.
    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn finals(&self) -> &[usize] {
        &self.finals
    }

    pub fn is_start(&self, node: usize) -> bool {
        self.starts.binary_search(&node).is_ok()
    }

    pub fn is_final(&self, node: usize) -> bool {
        self.finals.binary_search(&node).is_ok()
    }

    /// Successors through explicit arcs, ascending.
    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let lo = self.arcs.partition_point(|&(s, _)| s < node);
        self.arcs[lo..]
            .iter()
            .take_while(move |&&(s, _)| s == node)
            .map(|&(_, d)| d)
    }

    /// Removes nodes that are not both reachable from a start node and
    /// co-reachable to a final node, then renumbers the survivors densely in
    /// topological order. The accepted-sequence set is preserved.
    pub fn trim(&self) -> Result<LabelGraph> {
        let n = self.num_nodes();
        let mut fwd = vec![Vec::new(); n];
        let mut bwd = vec![Vec::new(); n];
        for &(src, dst) in &self.arcs {
            fwd[src].push(dst);
            bwd[dst].push(src);
        }
        let reach = flood(n, &self.starts, &fwd);
        let coreach = flood(n, &self.finals, &bwd);
        let alive: Vec<bool> = (0..n).map(|v| reach[v] && coreach[v]).collect();
        if !alive.iter().any(|&a| a) {
            return Err(Error::EmptyGraph);
        }

        let kept_arcs: Vec<(usize, usize)> = self
            .arcs
            .iter()
            .copied()
            .filter(|&(s, d)| alive[s] && alive[d])
            .collect();
        // Topological order over the surviving subgraph, ties by old id; the
        // position in that order becomes the new id.
        let order = topo_order_filtered(n, &kept_arcs, &alive)?;
        let mut new_id = vec![usize::MAX; n];
        for (pos, &old) in order.iter().enumerate() {
            new_id[old] = pos;
        }

        let symbols = order.iter().map(|&old| self.symbols[old]).collect();
        let arcs = kept_arcs
            .into_iter()
            .map(|(s, d)| (new_id[s], new_id[d]))
            .collect();
        let starts = self
            .starts
            .iter()
            .filter(|&&v| alive[v])
            .map(|&v| new_id[v])
            .collect();
        let finals = self
            .finals
            .iter()
            .filter(|&&v| alive[v])
            .map(|&v| new_id[v])
            .collect();
        LabelGraph::new(self.vocab_size, symbols, arcs, starts, finals)
    }

    /// Graphviz rendering: start nodes get a double border, final nodes a
    /// bold border.
    pub fn to_dot(&self, vocab: &Vocabulary) -> String {
        assert_eq!(vocab.size(), self.vocab_size, "vocabulary size mismatch");
        let mut out = String::from("digraph label_graph {\n  rankdir=LR;\n");
        for (id, &sym) in self.symbols.iter().enumerate() {
            let mut attrs = format!("label=\"{}\"", vocab.symbol(sym));
            if self.is_start(id) {
                attrs.push_str(", peripheries=2");
            }
            if self.is_final(id) {
                attrs.push_str(", style=bold");
            }
            out.push_str(&format!("  {id} [{attrs}];\n"));
        }
        for &(src, dst) in &self.arcs {
            out.push_str(&format!("  {src} -> {dst};\n"));
        }
        out.push_str("}\n");
        out
    }

    /// Textual dump: one line per node `id symbol [start] [final]`, then one
    /// line per arc `src dst`.
    pub fn dump(&self, vocab: &Vocabulary) -> String {
        assert_eq!(vocab.size(), self.vocab_size, "vocabulary size mismatch");
        let mut out = String::new();
        for (id, &sym) in self.symbols.iter().enumerate() {
            out.push_str(&format!("{id} {}", vocab.symbol(sym)));
            if self.is_start(id) {
                out.push_str(" start");
            }
            if self.is_final(id) {
                out.push_str(" final");
            }
            out.push('\n');
        }
        for &(src, dst) in &self.arcs {
            out.push_str(&format!("{src} {dst}\n"));
        }
        out
    }
}

fn flood(n: usize, seeds: &[usize], adj: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = seeds.to_vec();
    for &s in seeds {
        seen[s] = true;
    }
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Kahn topological order over explicit arcs; ties broken by ascending node
/// id so the output is deterministic.
pub fn topo_order(num_nodes: usize, arcs: &[(usize, usize)]) -> Result<Vec<usize>> {
    let alive = vec![true; num_nodes];
    topo_order_filtered(num_nodes, arcs, &alive)
}

fn topo_order_filtered(
    num_nodes: usize,
    arcs: &[(usize, usize)],
    alive: &[bool],
) -> Result<Vec<usize>> {
    let mut indegree = vec![0usize; num_nodes];
    let mut fwd = vec![Vec::new(); num_nodes];
    let mut seen_arcs = BTreeSet::new();
    for &(src, dst) in arcs {
        if !alive[src] || !alive[dst] || !seen_arcs.insert((src, dst)) {
            continue;
        }
        indegree[dst] += 1;
        fwd[src].push(dst);
    }
    let mut ready: BTreeSet<usize> = (0..num_nodes)
        .filter(|&v| alive[v] && indegree[v] == 0)
        .collect();
    let total = alive.iter().filter(|&&a| a).count();
    let mut order = Vec::with_capacity(total);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &w in &fwd[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.insert(w);
            }
        }
    }
    if order.len() != total {
        return Err(Error::CycleDetected);
    }
    Ok(order)
}

/// Single-node graph used in tests and as a degenerate acceptor.
#[cfg(test)]
pub(crate) fn single_node(vocab_size: usize, symbol: usize) -> LabelGraph {
    LabelGraph::new(vocab_size, vec![symbol], vec![], vec![0], vec![0]).unwrap()
}
