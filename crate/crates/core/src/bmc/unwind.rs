//! Unwinding of a CFA into a DAG. Each node is a vertex paired with a
//! vector counting back-edge traversals; once the count reaches the bound,
//! taking a back edge leads to that edge's violation marker node instead.
//!
//! Back edges within one strongly connected component share a single
//! counter. Every path then still traverses each back edge at most `k`
//! times, but interleavings of the cycles through one loop region do not
//! multiply into separate count vectors, which keeps the DAG small when
//! acceleration adds alternative cycles to a loop.

use crate::ir::{Cfa, OccId, Vertex};
use std::collections::{BTreeMap, HashMap, VecDeque};

/// Node of the unwound DAG.
#[derive(Clone, Debug)]
pub struct UNode {
    /// CFA vertex; `None` for bound-violation markers.
    pub vertex: Option<Vertex>,
    /// Traversal count per loop region (strongly connected component that
    /// contains at least one back edge).
    pub counts: Vec<u16>,
}

/// Edge of the unwound DAG, tagged with the CFA edge it instantiates.
#[derive(Clone, Debug)]
pub struct UEdge {
    pub from: usize,
    pub to: usize,
    /// Index into `cfa.edges`.
    pub cfa_edge: usize,
}

#[derive(Clone, Debug)]
pub struct UnwoundDag {
    pub nodes: Vec<UNode>,
    pub edges: Vec<UEdge>,
    pub root: usize,
    /// Indices into `cfa.edges` of the back edges, in occurrence order.
    pub back_edges: Vec<usize>,
    /// Marker node per back edge (position matching `back_edges`), present
    /// only if some path exhausts that back edge's bound.
    pub markers: BTreeMap<usize, usize>,
    /// Nodes whose vertex is an error vertex.
    pub error_nodes: Vec<usize>,
}

/// Iterative Tarjan SCC over the CFA vertices. Returns a component id per
/// vertex.
fn scc_ids(cfa: &Cfa) -> Vec<usize> {
    let out = cfa.out_edges();
    let n = cfa.n_vertices;
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut comp = vec![UNSET; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<Vertex> = Vec::new();
    let mut next_index = 0usize;
    let mut n_comps = 0usize;
    // Frames hold (vertex, next out-edge position to explore).
    let mut frames: Vec<(Vertex, usize)> = Vec::new();
    for start in 0..n {
        if index[start] != UNSET {
            continue;
        }
        frames.push((start, 0));
        while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
            if *pos == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&ei) = out[v].get(*pos) {
                *pos += 1;
                let w = cfa.edges[ei].tgt;
                if index[w] == UNSET {
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = n_comps;
                        if w == v {
                            break;
                        }
                    }
                    n_comps += 1;
                }
                frames.pop();
                if let Some(&(p, _)) = frames.last() {
                    low[p] = low[p].min(low[v]);
                }
            }
        }
    }
    comp
}

/// Unwind `cfa` so every back edge is taken at most `k` times per path.
pub fn unwind(cfa: &Cfa, k: u32) -> UnwoundDag {
    let back_edges = cfa.back_edges();
    let back_pos: HashMap<usize, usize> =
        back_edges.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    // Back edges in the same SCC share one counter.
    let comp = scc_ids(cfa);
    let mut group_of_comp: HashMap<usize, usize> = HashMap::new();
    let group: Vec<usize> = back_edges
        .iter()
        .map(|&b| {
            let c = comp[cfa.edges[b].tgt];
            let next = group_of_comp.len();
            *group_of_comp.entry(c).or_insert(next)
        })
        .collect();
    let n_groups = group_of_comp.len();
    let out_edges = cfa.out_edges();
    let k = u16::try_from(k.min(u16::MAX as u32 - 1)).unwrap();

    let mut nodes: Vec<UNode> = Vec::new();
    let mut edges: Vec<UEdge> = Vec::new();
    let mut ids: HashMap<(Vertex, Vec<u16>), usize> = HashMap::new();
    let mut markers: BTreeMap<usize, usize> = BTreeMap::new();
    let mut error_nodes = Vec::new();

    let root_counts = vec![0u16; n_groups];
    nodes.push(UNode {
        vertex: Some(cfa.v0),
        counts: root_counts.clone(),
    });
    ids.insert((cfa.v0, root_counts.clone()), 0);
    if cfa.errors.contains(&cfa.v0) {
        error_nodes.push(0);
    }
    let mut queue: VecDeque<usize> = [0].into_iter().collect();
    while let Some(n) = queue.pop_front() {
        let (v, counts) = match &nodes[n] {
            UNode {
                vertex: Some(v),
                counts,
            } => (*v, counts.clone()),
            _ => continue,
        };
        for &ei in &out_edges[v] {
            let tgt = cfa.edges[ei].tgt;
            let to = match back_pos.get(&ei) {
                Some(&bp) if counts[group[bp]] >= k => {
                    // Bound exhausted: route into the violation marker.
                    *markers.entry(back_edges[bp]).or_insert_with(|| {
                        let id = nodes.len();
                        nodes.push(UNode {
                            vertex: None,
                            counts: Vec::new(),
                        });
                        id
                    })
                }
                bp => {
                    let mut c = counts.clone();
                    if let Some(&bp) = bp {
                        c[group[bp]] += 1;
                    }
                    match ids.get(&(tgt, c.clone())) {
                        Some(&id) => id,
                        None => {
                            let id = nodes.len();
                            ids.insert((tgt, c.clone()), id);
                            nodes.push(UNode {
                                vertex: Some(tgt),
                                counts: c,
                            });
                            if cfa.errors.contains(&tgt) {
                                error_nodes.push(id);
                            }
                            queue.push_back(id);
                            id
                        }
                    }
                }
            };
            edges.push(UEdge {
                from: n,
                to,
                cfa_edge: ei,
            });
        }
    }
    UnwoundDag {
        nodes,
        edges,
        root: 0,
        back_edges,
        markers,
        error_nodes,
    }
}

impl UnwoundDag {
    /// Occurrence ids of back edges that still had traversals blocked by
    /// the bound.
    pub fn live_back_edges(&self, cfa: &Cfa) -> Vec<OccId> {
        self.markers
            .keys()
            .map(|&ei| cfa.edges[ei].id)
            .collect()
    }
}
