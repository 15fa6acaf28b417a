//! Time-synchronous intersection of a label graph with an emission matrix,
//! and log-domain forward-backward over the result.
//!
//! A trellis state is a `(frame, node)` pair: "frame `t` was emitted while
//! dwelling on `node`". Entry arcs lead from a virtual source into frame-0
//! states for start nodes; every other arc advances the frame by one, either
//! dwelling on the same node (the implicit self-loop) or following an
//! explicit arc. Arc weights are the log-posterior of the symbol of the
//! destination node at the destination frame. States are trimmed to those
//! both reachable and co-reachable, so forward-backward never visits dead
//! states.

use crate::acceptor::LabelGraph;
use crate::emissions::EmissionMatrix;
use crate::error::{Error, Result};
use crate::util::{log_add, log_sum_exp};
use crate::vocab::Vocabulary;

/// One trellis state: frame `t` emitted at label-graph node `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrellisState {
    pub frame: usize,
    pub node: usize,
}

/// `src == None` marks an entry arc from the virtual source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrellisArc {
    pub src: Option<usize>,
    pub dst: usize,
    pub symbol: usize,
    pub weight: f64,
}

/// Trimmed intersection trellis. States are numbered in `(frame, node)`
/// order, which is also a topological order; arcs are stored in ascending
/// destination-frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    num_frames: usize,
    vocab_size: usize,
    states: Vec<TrellisState>,
    arcs: Vec<TrellisArc>,
    finals: Vec<usize>,
}

impl Trellis {
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[TrellisState] {
        &self.states
    }

    pub fn arcs(&self) -> &[TrellisArc] {
        &self.arcs
    }

    /// Final states (frame `T-1` states at final graph nodes).
    pub fn finals(&self) -> &[usize] {
        &self.finals
    }

    pub fn frame_of(&self, state: usize) -> usize {
        self.states[state].frame
    }

    /// Graphviz rendering; the virtual source is drawn as a point.
    pub fn to_dot(&self, vocab: &Vocabulary) -> String {
        assert_eq!(vocab.size(), self.vocab_size, "vocabulary size mismatch");
        let is_final = |s: usize| self.finals.binary_search(&s).is_ok();
        let mut out = String::from("digraph trellis {\n  rankdir=LR;\n  src [shape=point];\n");
        for (id, st) in self.states.iter().enumerate() {
            let sym = vocab.symbol(self.arc_symbol_of_state(id));
            let mut attrs = format!("label=\"{sym}\"");
            if st.frame == 0 {
                attrs.push_str(", peripheries=2");
            }
            if is_final(id) {
                attrs.push_str(", style=bold");
            }
            out.push_str(&format!("  {id} [{attrs}];\n"));
        }
        for arc in &self.arcs {
            let src = match arc.src {
                Some(s) => s.to_string(),
                None => "src".to_string(),
            };
            out.push_str(&format!(
                "  {src} -> {} [label=\"{}/{:.4}\"];\n",
                arc.dst,
                vocab.symbol(arc.symbol),
                arc.weight
            ));
        }
        out.push_str("}\n");
        out
    }

    fn arc_symbol_of_state(&self, state: usize) -> usize {
        // All incoming arcs of a state carry the symbol of its node.
        self.arcs
            .iter()
            .find(|a| a.dst == state)
            .map(|a| a.symbol)
            .unwrap_or(0)
    }
}

/// Intersects the label graph with the emission lattice. The surviving states
/// are exactly the `(t, node)` pairs reachable from a start node in `t` steps
/// and co-reachable to a final node in `T-1-t` steps.
pub fn intersect(graph: &LabelGraph, emissions: &EmissionMatrix) -> Result<Trellis> {
    if graph.vocab_size() != emissions.vocab_size() {
        return Err(Error::Mismatch(format!(
            "graph vocabulary {} vs emissions vocabulary {}",
            graph.vocab_size(),
            emissions.vocab_size()
        )));
    }
    let n = graph.num_nodes();
    let t_max = emissions.num_frames();

    // Successor/predecessor lists including the implicit self-loop.
    let mut fwd: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut bwd: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    for &(src, dst) in graph.arcs() {
        fwd[src].push(dst);
        bwd[dst].push(src);
    }
    for list in fwd.iter_mut().chain(bwd.iter_mut()) {
        list.sort_unstable();
    }

    let mut reach = vec![vec![false; n]; t_max];
    for &s in graph.starts() {
        reach[0][s] = true;
    }
    for t in 1..t_max {
        for v in 0..n {
            if reach[t - 1][v] {
                for &w in &fwd[v] {
                    reach[t][w] = true;
                }
            }
        }
    }
    let mut coreach = vec![vec![false; n]; t_max];
    for &f in graph.finals() {
        coreach[t_max - 1][f] = true;
    }
    for t in (0..t_max - 1).rev() {
        for v in 0..n {
            if coreach[t + 1][v] {
                for &w in &bwd[v] {
                    coreach[t][w] = true;
                }
            }
        }
    }

    let alive = |t: usize, v: usize| reach[t][v] && coreach[t][v];
    if !(0..n).any(|v| alive(0, v)) {
        return Err(Error::EmptyIntersection { num_frames: t_max });
    }

    let mut states = Vec::new();
    let mut id_of = vec![vec![usize::MAX; n]; t_max];
    for t in 0..t_max {
        for v in 0..n {
            if alive(t, v) {
                id_of[t][v] = states.len();
                states.push(TrellisState { frame: t, node: v });
            }
        }
    }

    let mut arcs = Vec::new();
    for v in 0..n {
        if alive(0, v) {
            arcs.push(TrellisArc {
                src: None,
                dst: id_of[0][v],
                symbol: graph.symbol_of(v),
                weight: emissions.get(0, graph.symbol_of(v)),
            });
        }
    }
    for t in 0..t_max - 1 {
        for v in 0..n {
            if !alive(t, v) {
                continue;
            }
            for &w in &fwd[v] {
                if alive(t + 1, w) {
                    arcs.push(TrellisArc {
                        src: Some(id_of[t][v]),
                        dst: id_of[t + 1][w],
                        symbol: graph.symbol_of(w),
                        weight: emissions.get(t + 1, graph.symbol_of(w)),
                    });
                }
            }
        }
    }

    let finals = (0..n)
        .filter(|&v| alive(t_max - 1, v))
        .map(|v| id_of[t_max - 1][v])
        .collect();

    Ok(Trellis {
        num_frames: t_max,
        vocab_size: emissions.vocab_size(),
        states,
        arcs,
        finals,
    })
}

/// Log-sum over all source-to-final paths plus per-arc posteriors.
///
/// The total is computed with log-sum-exp reductions in topological order
/// (forward) and reverse order (backward); each arc's posterior is
/// `exp(alpha(src) + weight + beta(dst) - total)`. Arcs crossing any fixed
/// frame boundary have posteriors summing to one. If every path has zero
/// probability the total is `-inf` and all posteriors are zero.
pub fn forward_backward(trellis: &Trellis) -> (f64, Vec<f64>) {
    let ns = trellis.num_states();
    let mut alpha = vec![f64::NEG_INFINITY; ns];
    for arc in &trellis.arcs {
        let a_src = match arc.src {
            Some(s) => alpha[s],
            None => 0.0,
        };
        alpha[arc.dst] = log_add(alpha[arc.dst], a_src + arc.weight);
    }
    let mut beta = vec![f64::NEG_INFINITY; ns];
    for &f in &trellis.finals {
        beta[f] = 0.0;
    }
    for arc in trellis.arcs.iter().rev() {
        if let Some(s) = arc.src {
            beta[s] = log_add(beta[s], arc.weight + beta[arc.dst]);
        }
    }
    let total = log_sum_exp(
        &trellis
            .finals
            .iter()
            .map(|&f| alpha[f])
            .collect::<Vec<_>>(),
    );
    if total == f64::NEG_INFINITY {
        return (total, vec![0.0; trellis.arcs.len()]);
    }
    let posteriors = trellis
        .arcs
        .iter()
        .map(|arc| {
            let a_src = match arc.src {
                Some(s) => alpha[s],
                None => 0.0,
            };
            (a_src + arc.weight + beta[arc.dst] - total).exp()
        })
        .collect();
    (total, posteriors)
}
