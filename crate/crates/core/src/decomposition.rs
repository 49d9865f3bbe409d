//! Large automata as a hierarchy of small ones.
//!
//! The parse tree is cut into connected clusters. Each cluster, with every
//! edge to a child cluster replaced by a leaf labelled β, is itself a parse
//! tree; its Thompson automaton is one member of the *nested decomposition*.
//! A child automaton appears in its parent as a single β-transition between
//! its own start and accept states, which the two automata share.
//!
//! A global state-set is kept as one local state-set per automaton. Move and
//! Close recurse over the hierarchy, passing shared start states down and
//! shared accept states up. One pass of Close covers every ε-path that uses
//! forward transitions only; since a cycle-free ε-path takes at most one back
//! transition, two passes give the full closure.

use thiserror::Error;

use crate::bitstring::BitString;
use crate::separator::{self, SeparatorSim};
use crate::sim::{SimError, Simulation};
use crate::simple::{self, required_bits, SimpleSim};
use crate::syntax::{Node, NodeId, ParseTree, Symbol, TreeBuilder};
use crate::tnfa::{StateId, StateSet, Tnfa};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecompError {
    #[error("cluster size {0} is too small; need at least 2")]
    ClusterTooSmall(usize),
    #[error("decomposition parameter {0} is too small; need at least 6")]
    ParameterTooSmall(usize),
    #[error(transparent)]
    Inner(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub root: NodeId,
    /// Members in preorder; `nodes[0] == root`.
    pub nodes: Vec<NodeId>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Node-disjoint connected clusters covering a parse tree, numbered in
/// preorder of their roots.
#[derive(Debug, Clone)]
pub struct ClusterPartition {
    x: usize,
    clusters: Vec<Cluster>,
    cluster_of: Vec<usize>,
}

impl ClusterPartition {
    pub fn x(&self) -> usize {
        self.x
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster_of(&self, v: NodeId) -> usize {
        self.cluster_of[v.index()]
    }
}

/// Partitions `tree` into connected clusters of at most `x` nodes.
pub fn cluster_partition(tree: &ParseTree, x: usize) -> Result<ClusterPartition, DecompError> {
    if x < 2 {
        return Err(DecompError::ClusterTooSmall(x));
    }
    Ok(greedy_partition(tree, x, 0, x))
}

/// Bottom-up greedy clustering. A node's open cluster weighs one plus its
/// children's contributions: an open child contributes its own weight, a
/// sealed one `sealed_weight`. While the total exceeds `cap`, the heaviest
/// open child is sealed into a cluster of its own.
fn greedy_partition(
    tree: &ParseTree,
    cap: usize,
    sealed_weight: usize,
    x: usize,
) -> ClusterPartition {
    let n = tree.node_count();
    let mut weight = vec![0usize; n];
    let mut sealed = vec![false; n];
    for v in tree.postorder() {
        let kids: Vec<NodeId> = tree.node(v).children().collect();
        let mut total = 1 + kids.iter().map(|c| weight[c.index()]).sum::<usize>();
        while total > cap {
            let c = kids
                .iter()
                .copied()
                .filter(|c| !sealed[c.index()])
                .max_by_key(|c| (weight[c.index()], std::cmp::Reverse(*c)))
                .expect("cap admits a node whose children are all sealed");
            sealed[c.index()] = true;
            total = total - weight[c.index()] + sealed_weight;
        }
        weight[v.index()] = total;
    }
    sealed[tree.root().index()] = true;

    let parents = tree.parents();
    let mut cluster_of = vec![usize::MAX; n];
    let mut clusters: Vec<Cluster> = Vec::new();
    for v in tree.preorder() {
        let parent_cluster = parents[v.index()].map(|p| cluster_of[p.index()]);
        let c = if sealed[v.index()] {
            let id = clusters.len();
            clusters.push(Cluster {
                root: v,
                nodes: Vec::new(),
                parent: parent_cluster,
                children: Vec::new(),
            });
            if let Some(p) = parent_cluster {
                clusters[p].children.push(id);
            }
            id
        } else {
            parent_cluster.expect("only the root lacks a parent")
        };
        cluster_of[v.index()] = c;
        clusters[c].nodes.push(v);
    }
    ClusterPartition {
        x,
        clusters,
        cluster_of,
    }
}

/// One automaton of a nested decomposition.
#[derive(Debug, Clone)]
pub struct Component {
    pub tnfa: Tnfa,
    pub parent: Option<usize>,
    /// Child automata, ordered by the rank of their start state here.
    pub children: Vec<usize>,
    /// `(θ, φ)` of each child's pseudo-transition, in this automaton.
    pub pseudo: Vec<(StateId, StateId)>,
    /// The state of the whole automaton each local state stands for.
    pub global: Vec<StateId>,
    /// Parse nodes of the original tree owned by this automaton.
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct NestedDecomposition {
    x: usize,
    whole: Tnfa,
    components: Vec<Component>,
    depth: usize,
}

/// Builds the nested decomposition of `tree` in which every automaton has at
/// most `x` states. Automata are listed in preorder of the hierarchy.
pub fn nested_decomposition(
    tree: &ParseTree,
    x: usize,
) -> Result<NestedDecomposition, DecompError> {
    if x < 6 {
        return Err(DecompError::ParameterTooSmall(x));
    }
    let whole = Tnfa::thompson(tree);
    // A cluster tree with its pseudo-leaves must have at most x/2 nodes.
    let part = greedy_partition(tree, x / 2, 1, x);
    let mut built: Vec<Component> = part
        .clusters()
        .iter()
        .enumerate()
        .map(|(c, cl)| build_component(tree, &whole, &part, c, cl))
        .collect();

    // Renumber in preorder with children in topological order.
    let mut order = Vec::with_capacity(built.len());
    let mut depth = 0;
    let mut stack = vec![(0usize, 0usize)];
    while let Some((c, k)) = stack.pop() {
        order.push(c);
        depth = depth.max(k);
        stack.extend(built[c].children.iter().rev().map(|&ch| (ch, k + 1)));
    }
    let mut new_id = vec![0usize; built.len()];
    for (i, &c) in order.iter().enumerate() {
        new_id[c] = i;
    }
    let mut components: Vec<Option<Component>> = built.drain(..).map(Some).collect();
    let components = order
        .iter()
        .map(|&c| {
            let mut comp = components[c].take().expect("each cluster visited once");
            comp.parent = comp.parent.map(|p| new_id[p]);
            comp.children.iter_mut().for_each(|ch| *ch = new_id[*ch]);
            comp
        })
        .collect();
    Ok(NestedDecomposition {
        x,
        whole,
        components,
        depth,
    })
}

fn build_component(
    tree: &ParseTree,
    whole: &Tnfa,
    part: &ClusterPartition,
    c: usize,
    cluster: &Cluster,
) -> Component {
    let mut b = TreeBuilder::new();
    let mut local = std::collections::HashMap::with_capacity(cluster.nodes.len());
    // (local node, original node it stands for)
    let mut origin: Vec<(NodeId, NodeId)> = Vec::new();
    let mut pseudo_nodes: Vec<(NodeId, usize)> = Vec::new();
    for &v in cluster.nodes.iter().rev() {
        let mut sub = |u: NodeId, b: &mut TreeBuilder| -> NodeId {
            if part.cluster_of(u) == c {
                local[&u]
            } else {
                let p = b.char(Symbol::BETA);
                origin.push((p, u));
                pseudo_nodes.push((p, part.cluster_of(u)));
                p
            }
        };
        let id = match tree.node(v) {
            Node::Char(a) => b.char(a),
            Node::Concat(l, r) => {
                let (l, r) = (sub(l, &mut b), sub(r, &mut b));
                b.concat(l, r)
            }
            Node::Union(l, r) => {
                let (l, r) = (sub(l, &mut b), sub(r, &mut b));
                b.union(l, r)
            }
            Node::Star(x) => {
                let x = sub(x, &mut b);
                b.star(x)
            }
        };
        local.insert(v, id);
        origin.push((id, v));
    }
    let t = b
        .finish(local[&cluster.root])
        .expect("cluster induces a tree");
    let tnfa = Tnfa::thompson(&t);
    let mut global = vec![StateId(0); tnfa.state_count()];
    for &(ln, orig) in &origin {
        let (lt, lp) = tnfa.assoc(ln);
        let (gt, gp) = whole.assoc(orig);
        global[lt.index()] = gt;
        global[lp.index()] = gp;
    }
    let mut kids: Vec<(StateId, StateId, usize)> = pseudo_nodes
        .iter()
        .map(|&(p, child)| {
            let (th, ph) = tnfa.assoc(p);
            (th, ph, child)
        })
        .collect();
    kids.sort();
    Component {
        tnfa,
        parent: cluster.parent,
        children: kids.iter().map(|k| k.2).collect(),
        pseudo: kids.iter().map(|k| (k.0, k.1)).collect(),
        global,
        nodes: cluster.nodes.clone(),
    }
}

impl NestedDecomposition {
    pub fn x(&self) -> usize {
        self.x
    }

    /// The undecomposed automaton.
    pub fn whole(&self) -> &Tnfa {
        &self.whole
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn max_states(&self) -> usize {
        self.components
            .iter()
            .map(|c| c.tnfa.state_count())
            .max()
            .unwrap_or(0)
    }

    /// Depth of the automaton hierarchy; a single automaton has depth 0.
    pub fn depth(&self) -> usize {
        self.depth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerKind {
    Simple,
    Separator,
    /// Simple when the automaton fits, separator otherwise.
    Auto,
}

/// Per-automaton simulation used inside a decomposition.
#[derive(Debug, Clone)]
pub enum InnerSim {
    Simple(SimpleSim),
    Separator(SeparatorSim),
}

pub enum InnerScratch {
    Simple(simple::Scratch),
    Separator(separator::Scratch),
}

impl InnerSim {
    pub fn build(tnfa: &Tnfa, kind: InnerKind, w: usize) -> Result<InnerSim, SimError> {
        let simple = match kind {
            InnerKind::Simple => true,
            InnerKind::Separator => false,
            InnerKind::Auto => required_bits(tnfa.state_count()) <= w,
        };
        Ok(if simple {
            InnerSim::Simple(SimpleSim::build(tnfa, w)?)
        } else {
            InnerSim::Separator(SeparatorSim::build(tnfa, w)?)
        })
    }
}

impl Simulation for InnerSim {
    type Scratch = InnerScratch;

    fn automaton(&self) -> &Tnfa {
        match self {
            InnerSim::Simple(s) => s.automaton(),
            InnerSim::Separator(s) => s.automaton(),
        }
    }

    fn set_len(&self) -> usize {
        match self {
            InnerSim::Simple(s) => s.set_len(),
            InnerSim::Separator(s) => s.set_len(),
        }
    }

    fn position(&self, st: StateId) -> usize {
        match self {
            InnerSim::Simple(s) => s.position(st),
            InnerSim::Separator(s) => s.position(st),
        }
    }

    fn scratch(&self) -> InnerScratch {
        match self {
            InnerSim::Simple(s) => InnerScratch::Simple(s.scratch()),
            InnerSim::Separator(s) => InnerScratch::Separator(s.scratch()),
        }
    }

    fn move_into(&self, s: &BitString, a: Symbol, out: &mut BitString) {
        match self {
            InnerSim::Simple(sim) => sim.move_into(s, a, out),
            InnerSim::Separator(sim) => sim.move_into(s, a, out),
        }
    }

    fn close_in_place(&self, s: &mut BitString, scratch: &mut InnerScratch) {
        match (self, scratch) {
            (InnerSim::Simple(sim), InnerScratch::Simple(sc)) => sim.close_in_place(s, sc),
            (InnerSim::Separator(sim), InnerScratch::Separator(sc)) => sim.close_in_place(s, sc),
            _ => unreachable!("scratch belongs to another backend"),
        }
    }
}

/// Bit positions of shared states, cached per automaton.
#[derive(Debug, Clone)]
struct Links {
    start: usize,
    accept: usize,
    /// `(parent, θ position, φ position)` of this automaton's pseudo-transition.
    up: Option<(usize, usize, usize)>,
    /// `(child, θ position, φ position)` in topological order.
    down: Vec<(usize, usize, usize)>,
    /// Per child: the local states whose ε-closure holds the child's θ.
    feeds: Vec<BitString>,
}

/// The decomposition together with a simulation structure per automaton.
#[derive(Debug, Clone)]
pub struct DecomposedSim {
    nd: NestedDecomposition,
    sims: Vec<InnerSim>,
    links: Vec<Links>,
}

/// One local state-set per automaton, plus per-run bookkeeping: whether a
/// set is known to be ε-closed already, and whether a whole sub-hierarchy
/// may hold any state at all. Both only let work be skipped whose result is
/// known in advance.
pub struct StateSetArray {
    sets: Vec<BitString>,
    closed: Vec<bool>,
    live: Vec<bool>,
    tmp: Vec<BitString>,
    scratch: Vec<InnerScratch>,
}

impl StateSetArray {
    pub fn get(&self, a: usize) -> &BitString {
        &self.sets[a]
    }

    pub fn sets(&self) -> &[BitString] {
        &self.sets
    }
}

impl DecomposedSim {
    pub fn build(
        nd: NestedDecomposition,
        inner: InnerKind,
        w: usize,
    ) -> Result<DecomposedSim, SimError> {
        let sims = nd
            .components()
            .iter()
            .map(|c| InnerSim::build(&c.tnfa, inner, w))
            .collect::<Result<Vec<_>, _>>()?;
        let mut links: Vec<Links> = nd
            .components()
            .iter()
            .zip(&sims)
            .map(|(c, s)| Links {
                start: s.position(c.tnfa.start()),
                accept: s.position(c.tnfa.accept()),
                up: None,
                down: c
                    .children
                    .iter()
                    .zip(&c.pseudo)
                    .map(|(&ch, &(th, ph))| (ch, s.position(th), s.position(ph)))
                    .collect(),
                feeds: c
                    .pseudo
                    .iter()
                    .map(|&(th, _)| {
                        let mut b = s.empty();
                        for u in c.tnfa.eps_reach_within(th, true, |_| true) {
                            b.set(s.position(u), true);
                        }
                        b
                    })
                    .collect(),
            })
            .collect();
        for a in 0..links.len() {
            for (ch, th, ph) in links[a].down.clone() {
                links[ch].up = Some((a, th, ph));
            }
        }
        Ok(DecomposedSim { nd, sims, links })
    }

    pub fn from_tree(
        tree: &ParseTree,
        x: usize,
        inner: InnerKind,
        w: usize,
    ) -> Result<DecomposedSim, DecompError> {
        let nd = nested_decomposition(tree, x)?;
        Ok(DecomposedSim::build(nd, inner, w)?)
    }

    pub fn decomposition(&self) -> &NestedDecomposition {
        &self.nd
    }

    pub fn sims(&self) -> &[InnerSim] {
        &self.sims
    }

    pub fn empty_array(&self) -> StateSetArray {
        StateSetArray {
            sets: self.sims.iter().map(|s| s.empty()).collect(),
            closed: vec![true; self.sims.len()],
            live: vec![false; self.sims.len()],
            tmp: self.sims.iter().map(|s| s.empty()).collect(),
            scratch: self.sims.iter().map(|s| s.scratch()).collect(),
        }
    }

    /// The array modelling the global state-set `s`.
    pub fn from_global(&self, s: &StateSet) -> StateSetArray {
        let mut x = self.empty_array();
        for (a, comp) in self.nd.components().iter().enumerate() {
            for (local, g) in comp.global.iter().enumerate() {
                if s.contains(*g) {
                    let pos = self.sims[a].position(StateId(local as u32));
                    self.insert(&mut x, a, pos);
                }
            }
        }
        x.closed.iter_mut().for_each(|c| *c = false);
        x
    }

    /// The global state-set `x` models: the union of its local sets.
    pub fn modeled_set(&self, x: &StateSetArray) -> StateSet {
        let mut out = self.nd.whole().empty_set();
        for (a, comp) in self.nd.components().iter().enumerate() {
            for (local, g) in comp.global.iter().enumerate() {
                if x.sets[a].get(self.sims[a].position(StateId(local as u32))) {
                    out.insert(*g);
                }
            }
        }
        out
    }

    /// Every state shared by a parent and a child is in both or neither.
    pub fn is_consistent(&self, x: &StateSetArray) -> bool {
        self.links.iter().enumerate().all(|(a, l)| match l.up {
            None => true,
            Some((p, th, ph)) => {
                x.sets[a].get(l.start) == x.sets[p].get(th)
                    && x.sets[a].get(l.accept) == x.sets[p].get(ph)
            }
        })
    }

    /// `Move_AS(A, X, α)`.
    pub fn move_as(&self, a: usize, x: &mut StateSetArray, alpha: Symbol) {
        self.move_rec(a, x, alpha);
        debug_assert!(self.is_consistent(x));
    }

    /// `Close_AS(A, X)`, one pass.
    pub fn close_as(&self, a: usize, x: &mut StateSetArray) {
        self.close_rec(a, x);
        debug_assert!(self.is_consistent(x));
    }

    /// `Insert_A(X[A], s)` for a local state of automaton `a`, written
    /// through to the automaton sharing it.
    pub fn insert_state(&self, x: &mut StateSetArray, a: usize, s: StateId) {
        let pos = self.sims[a].position(s);
        self.insert(x, a, pos);
        self.write_through(x, a);
    }

    pub fn is_match(&self, q: &[u8]) -> bool {
        let r = self.nd.root();
        let mut x = self.empty_array();
        self.insert(&mut x, r, self.links[r].start);
        self.close_rec(r, &mut x);
        self.close_rec(r, &mut x);
        for &c in q {
            if !x.live[r] {
                return false;
            }
            let a = Symbol::byte(c);
            self.move_rec(r, &mut x, a);
            self.close_rec(r, &mut x);
            self.close_rec(r, &mut x);
        }
        x.sets[r].get(self.links[r].accept)
    }

    fn insert(&self, x: &mut StateSetArray, a: usize, pos: usize) {
        if !x.sets[a].get(pos) {
            x.sets[a].set(pos, true);
            x.closed[a] = false;
        }
        let mut v = Some(a);
        while let Some(b) = v {
            if x.live[b] {
                break;
            }
            x.live[b] = true;
            v = self.links[b].up.map(|u| u.0);
        }
    }

    fn write_through(&self, x: &mut StateSetArray, a: usize) {
        let l = &self.links[a];
        if let Some((p, th, ph)) = l.up {
            if x.sets[a].get(l.start) {
                self.insert(x, p, th);
            }
            if x.sets[a].get(l.accept) {
                self.insert(x, p, ph);
            }
        }
        for &(ch, th, ph) in &l.down {
            if x.sets[a].get(th) {
                self.insert(x, ch, self.links[ch].start);
            }
            if x.sets[a].get(ph) {
                self.insert(x, ch, self.links[ch].accept);
            }
        }
    }

    fn close_local(&self, x: &mut StateSetArray, a: usize) {
        if x.closed[a] {
            return;
        }
        self.sims[a].close_in_place(&mut x.sets[a], &mut x.scratch[a]);
        x.closed[a] = true;
        self.write_through(x, a);
    }

    fn settle(&self, x: &mut StateSetArray, a: usize) {
        x.live[a] = !x.sets[a].is_zero() || self.links[a].down.iter().any(|d| x.live[d.0]);
    }

    fn move_rec(&self, a: usize, x: &mut StateSetArray, alpha: Symbol) {
        if !x.live[a] {
            return;
        }
        let (set, tmp) = (&x.sets[a], &mut x.tmp[a]);
        self.sims[a].move_into(set, alpha, tmp);
        std::mem::swap(&mut x.sets[a], &mut x.tmp[a]);
        x.closed[a] = false;
        for &(ch, _, ph) in &self.links[a].down {
            self.move_rec(ch, x, alpha);
            if x.sets[ch].get(self.links[ch].accept) {
                self.insert(x, a, ph);
            }
        }
        self.settle(x, a);
    }

    /// One pass of Close over the hierarchy below `a`.
    ///
    /// Instead of re-closing `X[A]` after every child, a child's start state
    /// is tested against the states that reach it, and `X[A]` is closed once
    /// at the end. Closure distributes over the inserted accept states, so
    /// every local set ends up exactly as with closing after each child.
    fn close_rec(&self, a: usize, x: &mut StateSetArray) {
        if !x.live[a] {
            return;
        }
        let l = &self.links[a];
        for (&(ch, _, ph), feed) in l.down.iter().zip(&l.feeds) {
            if x.sets[a].intersects(feed) {
                self.insert(x, ch, self.links[ch].start);
            }
            self.close_rec(ch, x);
            if x.sets[ch].get(self.links[ch].accept) {
                self.insert(x, a, ph);
            }
        }
        self.close_local(x, a);
        self.settle(x, a);
    }

    /// The pass as literally stated: close, then per child push the start
    /// state down, recurse, pull the accept state up and close again.
    #[cfg(test)]
    fn close_rec_stepwise(&self, a: usize, x: &mut StateSetArray) {
        if !x.live[a] {
            return;
        }
        self.close_local(x, a);
        for &(ch, th, ph) in &self.links[a].down {
            if x.sets[a].get(th) {
                self.insert(x, ch, self.links[ch].start);
            }
            self.close_rec_stepwise(ch, x);
            if x.sets[ch].get(self.links[ch].accept) {
                self.insert(x, a, ph);
            }
            self.close_local(x, a);
        }
        self.settle(x, a);
    }
}
