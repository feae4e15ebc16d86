//! Boykov-Kolmogorov augmenting-path max-flow with search-tree reuse.

use std::collections::VecDeque;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parent {
    /// Orphan or free node.
    None,
    Terminal,
    /// Edge from this node to its parent.
    Edge(usize),
}

/// Flow network with terminal capacities folded into one signed value per
/// node: positive means residual capacity from the source, negative means
/// residual capacity to the sink.
#[derive(Debug, Clone)]
pub struct Graph<T> {
    terminal: Vec<T>,
    adjacency: Vec<Vec<usize>>,
    head: Vec<usize>,
    residual: Vec<T>,
    flow: T,
}

impl<T: Real> Graph<T> {
    pub fn new(nodes: usize) -> Self {
        Self { terminal: vec![T::zero(); nodes], adjacency: vec![Vec::new(); nodes], head: Vec::new(), residual: Vec::new(), flow: T::zero() }
    }

    pub fn node_count(&self) -> usize {
        self.terminal.len()
    }

    /// Adds capacity `to_source` on edge source->node and `to_sink` on node->sink.
    pub fn add_terminal(&mut self, node: usize, from_source: T, to_sink: T) {
        let shared = from_source.min(to_sink);
        self.flow = self.flow + shared;
        self.terminal[node] = self.terminal[node] + from_source - to_sink;
    }

    /// Adds the edge pair `u -> v` (capacity `forward`) and `v -> u` (capacity `backward`).
    pub fn add_edge(&mut self, u: usize, v: usize, forward: T, backward: T) {
        let e = self.head.len();
        self.head.push(v);
        self.residual.push(forward);
        self.head.push(u);
        self.residual.push(backward);
        self.adjacency[u].push(e);
        self.adjacency[v].push(e + 1);
    }

    #[inline]
    fn rev(e: usize) -> usize {
        e ^ 1
    }

    /// Runs max-flow and returns the flow value together with the minimal
    /// source-side set (nodes reachable from the source in the residual graph).
    pub fn solve(mut self) -> (T, Vec<bool>) {
        let n = self.node_count();
        let zero = T::zero();
        let mut tree = vec![Tree::Free; n];
        let mut parent = vec![Parent::None; n];
        let mut active: VecDeque<usize> = VecDeque::new();
        for v in 0..n {
            if self.terminal[v] > zero {
                tree[v] = Tree::Source;
                parent[v] = Parent::Terminal;
                active.push_back(v);
            } else if self.terminal[v] < zero {
                tree[v] = Tree::Sink;
                parent[v] = Parent::Terminal;
                active.push_back(v);
            }
        }
        let mut orphans: VecDeque<usize> = VecDeque::new();

        'grow: while let Some(&p) = active.front() {
            if tree[p] == Tree::Free {
                active.pop_front();
                continue;
            }
            // find an edge joining the two trees
            let mut bridge = None;
            for &e in &self.adjacency[p] {
                let q = self.head[e];
                match tree[p] {
                    Tree::Source if self.residual[e] > zero => match tree[q] {
                        Tree::Free => {
                            tree[q] = Tree::Source;
                            parent[q] = Parent::Edge(Self::rev(e));
                            active.push_back(q);
                        }
                        Tree::Sink => {
                            bridge = Some(e);
                            break;
                        }
                        Tree::Source => {}
                    },
                    Tree::Sink if self.residual[Self::rev(e)] > zero => match tree[q] {
                        Tree::Free => {
                            tree[q] = Tree::Sink;
                            parent[q] = Parent::Edge(Self::rev(e));
                            active.push_back(q);
                        }
                        Tree::Source => {
                            bridge = Some(Self::rev(e));
                            break;
                        }
                        Tree::Sink => {}
                    },
                    _ => {}
                }
            }
            let Some(bridge) = bridge else {
                active.pop_front();
                continue 'grow;
            };

            // bridge runs from a source-tree node to a sink-tree node
            let s_end = self.head[Self::rev(bridge)];
            let t_end = self.head[bridge];
            let mut bottleneck = self.residual[bridge];
            let mut x = s_end;
            loop {
                match parent[x] {
                    Parent::Edge(pe) => {
                        bottleneck = bottleneck.min(self.residual[Self::rev(pe)]);
                        x = self.head[pe];
                    }
                    _ => {
                        bottleneck = bottleneck.min(self.terminal[x]);
                        break;
                    }
                }
            }
            let mut x = t_end;
            loop {
                match parent[x] {
                    Parent::Edge(pe) => {
                        bottleneck = bottleneck.min(self.residual[pe]);
                        x = self.head[pe];
                    }
                    _ => {
                        bottleneck = bottleneck.min(-self.terminal[x]);
                        break;
                    }
                }
            }

            self.residual[bridge] = self.residual[bridge] - bottleneck;
            self.residual[Self::rev(bridge)] = self.residual[Self::rev(bridge)] + bottleneck;
            let mut x = s_end;
            loop {
                match parent[x] {
                    Parent::Edge(pe) => {
                        let down = Self::rev(pe);
                        self.residual[down] = self.residual[down] - bottleneck;
                        self.residual[pe] = self.residual[pe] + bottleneck;
                        let next = self.head[pe];
                        if self.residual[down] <= zero {
                            parent[x] = Parent::None;
                            orphans.push_back(x);
                        }
                        x = next;
                    }
                    _ => {
                        self.terminal[x] = self.terminal[x] - bottleneck;
                        if self.terminal[x] <= zero {
                            parent[x] = Parent::None;
                            orphans.push_back(x);
                        }
                        break;
                    }
                }
            }
            let mut x = t_end;
            loop {
                match parent[x] {
                    Parent::Edge(pe) => {
                        self.residual[pe] = self.residual[pe] - bottleneck;
                        self.residual[Self::rev(pe)] = self.residual[Self::rev(pe)] + bottleneck;
                        let next = self.head[pe];
                        if self.residual[pe] <= zero {
                            parent[x] = Parent::None;
                            orphans.push_back(x);
                        }
                        x = next;
                    }
                    _ => {
                        self.terminal[x] = self.terminal[x] + bottleneck;
                        if self.terminal[x] >= zero {
                            parent[x] = Parent::None;
                            orphans.push_back(x);
                        }
                        break;
                    }
                }
            }
            self.flow = self.flow + bottleneck;

            while let Some(o) = orphans.pop_front() {
                self.adopt(o, &mut tree, &mut parent, &mut active, &mut orphans);
            }
        }

        let source_side = self.reachable_from_source();
        (self.flow, source_side)
    }

    fn origin_is_terminal(&self, mut x: usize, parent: &[Parent]) -> bool {
        let mut guard = 0usize;
        loop {
            match parent[x] {
                Parent::Terminal => return true,
                Parent::None => return false,
                Parent::Edge(pe) => x = self.head[pe],
            }
            guard += 1;
            if guard > parent.len() {
                return false;
            }
        }
    }

    fn adopt(
        &self,
        o: usize,
        tree: &mut [Tree],
        parent: &mut [Parent],
        active: &mut VecDeque<usize>,
        orphans: &mut VecDeque<usize>,
    ) {
        let zero = T::zero();
        let side = tree[o];
        for &e in &self.adjacency[o] {
            let q = self.head[e];
            if tree[q] != side {
                continue;
            }
            let open = match side {
                Tree::Source => self.residual[Self::rev(e)] > zero,
                _ => self.residual[e] > zero,
            };
            if open && self.origin_is_terminal(q, parent) {
                parent[o] = Parent::Edge(e);
                return;
            }
        }
        for &e in &self.adjacency[o] {
            let q = self.head[e];
            if tree[q] != side {
                continue;
            }
            let open = match side {
                Tree::Source => self.residual[Self::rev(e)] > zero,
                _ => self.residual[e] > zero,
            };
            if open {
                active.push_back(q);
            }
            if let Parent::Edge(pe) = parent[q] {
                if self.head[pe] == o {
                    parent[q] = Parent::None;
                    orphans.push_back(q);
                }
            }
        }
        tree[o] = Tree::Free;
    }

    fn reachable_from_source(&self) -> Vec<bool> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| self.terminal[v] > T::zero()).collect();
        for &v in &queue {
            seen[v] = true;
        }
        while let Some(p) = queue.pop_front() {
            for &e in &self.adjacency[p] {
                let q = self.head[e];
                if !seen[q] && self.residual[e] > T::zero() {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        seen
    }
}
