//! Thompson automata and the reference state-set simulation.
//!
//! [`Tnfa::thompson`] builds `N(R)` bottom-up over the parse tree. The
//! concatenation rule adds its own start and accept state joined by three
//! ε-transitions, so every parse node owns exactly two states. States are
//! renumbered by a depth-first topological order of the forward transitions,
//! which leaves the endpoints of every symbol transition adjacent.
//!
//! The `naive_*` operations work directly on the transition list. They are
//! the semantic reference every word-parallel backend is checked against.

use std::fmt;

use thiserror::Error;

use crate::bitstring::BitString;
use crate::syntax::{Node, NodeId, ParseTree, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// 1-based rank in the topological numbering.
    #[inline]
    pub fn rank(self) -> usize {
        self.0 as usize + 1
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rank())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Epsilon,
    Symbol(Symbol),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Forward,
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: StateId,
    pub to: StateId,
    pub label: Label,
    pub kind: Kind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TnfaError {
    #[error("forward transitions contain a cycle through state {0}")]
    Cycle(u32),
    #[error("symbol transition {from} -> {to} cannot be placed on adjacent ranks")]
    NotAdjacent { from: u32, to: u32 },
}

/// A set of states of one automaton, bit `rank(s)` set iff `s` present.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct StateSet(BitString);

impl StateSet {
    pub fn empty(state_count: usize) -> Self {
        StateSet(BitString::zeros(state_count))
    }

    pub fn from_states(state_count: usize, states: impl IntoIterator<Item = StateId>) -> Self {
        let mut s = StateSet::empty(state_count);
        for st in states {
            s.insert(st);
        }
        s
    }

    pub fn from_bits(bits: BitString) -> Self {
        StateSet(bits)
    }

    #[inline]
    pub fn bits(&self) -> &BitString {
        &self.0
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn contains(&self, s: StateId) -> bool {
        self.0.get(s.rank())
    }

    #[inline]
    pub fn insert(&mut self, s: StateId) {
        self.0.set(s.rank(), true);
    }

    #[inline]
    pub fn remove(&mut self, s: StateId) {
        self.0.set(s.rank(), false);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_zero()
    }

    pub fn len(&self) -> usize {
        self.0.count_ones()
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.0
            .ones_positions()
            .into_iter()
            .map(|p| StateId(p as u32 - 1))
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.0.is_subset_of(&other.0)
    }

    pub fn union_with(&mut self, other: &StateSet) {
        self.0 |= &other.0;
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set()
            .entries(self.iter().map(|s| s.rank()))
            .finish()
    }
}

/// Compressed adjacency lists.
#[derive(Debug, Clone, Default)]
struct Adjacency {
    offsets: Vec<u32>,
    targets: Vec<StateId>,
}

impl Adjacency {
    fn build(n: usize, edges: impl Iterator<Item = (StateId, StateId)> + Clone) -> Self {
        let mut offsets = vec![0u32; n + 1];
        for (from, _) in edges.clone() {
            offsets[from.index() + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![StateId(0); offsets[n] as usize];
        for (from, to) in edges {
            let slot = &mut fill[from.index()];
            targets[*slot as usize] = to;
            *slot += 1;
        }
        Adjacency { offsets, targets }
    }

    #[inline]
    fn of(&self, s: StateId) -> &[StateId] {
        let i = s.index();
        &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

/// Thompson automaton `N(R)` with states numbered in topological order.
#[derive(Debug, Clone)]
pub struct Tnfa {
    tree: ParseTree,
    state_count: usize,
    transitions: Vec<Transition>,
    start: StateId,
    accept: StateId,
    /// `(θ_v, φ_v)` for every parse node `v`.
    assoc: Vec<(StateId, StateId)>,
    /// Label on the incoming transitions of each state, `None` for ε-states
    /// and the start state.
    incoming: Vec<Option<Symbol>>,
    eps_out: Adjacency,
    eps_in: Adjacency,
}

impl Tnfa {
    pub fn thompson(tree: &ParseTree) -> Tnfa {
        let (n, raw, assoc) = construct(tree);
        let order =
            topo_order(n, &raw).expect("Thompson automata have acyclic forward transitions");
        // order[rank] = old id; invert it.
        let mut rename = vec![StateId(0); n];
        for (rank, old) in order.iter().enumerate() {
            rename[old.index()] = StateId(rank as u32);
        }
        let transitions: Vec<Transition> = raw
            .iter()
            .map(|t| Transition {
                from: rename[t.from.index()],
                to: rename[t.to.index()],
                ..*t
            })
            .collect();
        let assoc = assoc
            .iter()
            .map(|&(th, ph)| (rename[th.index()], rename[ph.index()]))
            .collect::<Vec<_>>();
        let root = tree.root().index();
        Tnfa::assemble(
            tree.clone(),
            n,
            transitions,
            assoc[root].0,
            assoc[root].1,
            assoc,
        )
    }

    fn assemble(
        tree: ParseTree,
        n: usize,
        transitions: Vec<Transition>,
        start: StateId,
        accept: StateId,
        assoc: Vec<(StateId, StateId)>,
    ) -> Tnfa {
        let mut incoming = vec![None; n];
        for t in &transitions {
            if let Label::Symbol(a) = t.label {
                incoming[t.to.index()] = Some(a);
            }
        }
        let eps = transitions.iter().filter(|t| t.label == Label::Epsilon);
        let eps_out = Adjacency::build(n, eps.clone().map(|t| (t.from, t.to)));
        let eps_in = Adjacency::build(n, eps.map(|t| (t.to, t.from)));
        Tnfa {
            tree,
            state_count: n,
            transitions,
            start,
            accept,
            assoc,
            incoming,
            eps_out,
            eps_in,
        }
    }

    #[inline]
    pub fn state_count(&self) -> usize {
        self.state_count
    }

    #[inline]
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    #[inline]
    pub fn start(&self) -> StateId {
        self.start
    }

    #[inline]
    pub fn accept(&self) -> StateId {
        self.accept
    }

    #[inline]
    pub fn tree(&self) -> &ParseTree {
        &self.tree
    }

    /// `S(v) = (θ_v, φ_v)`, the two states parse node `v` associates.
    #[inline]
    pub fn assoc(&self, v: NodeId) -> (StateId, StateId) {
        self.assoc[v.index()]
    }

    /// The symbol on the incoming transitions of `s`, if `s` is a symbol
    /// state.
    #[inline]
    pub fn incoming_symbol(&self, s: StateId) -> Option<Symbol> {
        self.incoming[s.index()]
    }

    #[inline]
    pub fn eps_successors(&self, s: StateId) -> &[StateId] {
        self.eps_out.of(s)
    }

    #[inline]
    pub fn eps_predecessors(&self, s: StateId) -> &[StateId] {
        self.eps_in.of(s)
    }

    pub fn back_transition_count(&self) -> usize {
        self.transitions
            .iter()
            .filter(|t| t.kind == Kind::Back)
            .count()
    }

    /// Distinct symbols labelling transitions, in increasing order.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut v: Vec<Symbol> = self.incoming.iter().flatten().copied().collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.state_count as u32).map(StateId)
    }

    pub fn empty_set(&self) -> StateSet {
        StateSet::empty(self.state_count)
    }

    /// Topological numbering of the current states; the identity for
    /// automata built by [`Tnfa::thompson`].
    pub fn topo_order(&self) -> Result<Vec<StateId>, TnfaError> {
        topo_order(self.state_count, &self.transitions)
    }

    /// States reachable from `s` through exactly one transition labelled
    /// `a`. Scans the whole transition list.
    pub fn naive_move(&self, s: &StateSet, a: Symbol) -> StateSet {
        let mut out = self.empty_set();
        for t in &self.transitions {
            if t.label == Label::Symbol(a) && s.contains(t.from) {
                out.insert(t.to);
            }
        }
        out
    }

    /// ε-closure of `s` by graph search.
    pub fn naive_close(&self, s: &StateSet) -> StateSet {
        let mut out = s.clone();
        let mut stack: Vec<StateId> = s.iter().collect();
        while let Some(u) = stack.pop() {
            for &v in self.eps_out.of(u) {
                if !out.contains(v) {
                    out.insert(v);
                    stack.push(v);
                }
            }
        }
        out
    }

    pub fn naive_match(&self, q: &[u8]) -> bool {
        let mut s = self.naive_close(&StateSet::from_states(self.state_count, [self.start]));
        for &c in q {
            if s.is_empty() {
                return false;
            }
            s = self.naive_close(&self.naive_move(&s, Symbol::byte(c)));
        }
        s.contains(self.accept)
    }

    /// States reachable from `s` using forward ε-transitions only.
    pub fn forward_closure(&self, s: &StateSet) -> StateSet {
        let mut out = s.clone();
        let mut stack: Vec<StateId> = s.iter().collect();
        while let Some(u) = stack.pop() {
            for &v in self.eps_out.of(u) {
                // forward transitions always increase the rank
                if v > u && !out.contains(v) {
                    out.insert(v);
                    stack.push(v);
                }
            }
        }
        out
    }

    /// `s` plus the targets of back transitions leaving `s`.
    pub fn back_step(&self, s: &StateSet) -> StateSet {
        let mut out = s.clone();
        for t in &self.transitions {
            if t.kind == Kind::Back && s.contains(t.from) {
                out.insert(t.to);
            }
        }
        out
    }

    /// States ε-reachable from `from` (or reaching it, when `reverse`),
    /// staying inside the states accepted by `allowed`.
    pub fn eps_reach_within(
        &self,
        from: StateId,
        reverse: bool,
        allowed: impl Fn(StateId) -> bool,
    ) -> Vec<StateId> {
        let adj = if reverse { &self.eps_in } else { &self.eps_out };
        let mut seen = vec![false; self.state_count];
        let mut out = vec![from];
        seen[from.index()] = true;
        let mut i = 0;
        while i < out.len() {
            let u = out[i];
            i += 1;
            for &v in adj.of(u) {
                if !seen[v.index()] && allowed(v) {
                    seen[v.index()] = true;
                    out.push(v);
                }
            }
        }
        out
    }
}

/// Builds the raw automaton with states in creation order (children before
/// parents, θ before φ).
fn construct(tree: &ParseTree) -> (usize, Vec<Transition>, Vec<(StateId, StateId)>) {
    let mut assoc = vec![(StateId(0), StateId(0)); tree.node_count()];
    let mut next = 0u32;
    let mut transitions = Vec::with_capacity(4 * tree.node_count());
    let mut add = |from: StateId, to: StateId, label: Label, kind: Kind| {
        transitions.push(Transition {
            from,
            to,
            label,
            kind,
        })
    };
    let eps = Label::Epsilon;
    let fwd = Kind::Forward;
    for v in tree.postorder() {
        let th = StateId(next);
        let ph = StateId(next + 1);
        next += 2;
        assoc[v.index()] = (th, ph);
        match tree.node(v) {
            Node::Char(a) => add(th, ph, Label::Symbol(a), fwd),
            Node::Concat(l, r) => {
                let (tl, pl) = assoc[l.index()];
                let (tr, pr) = assoc[r.index()];
                add(th, tl, eps, fwd);
                add(pl, tr, eps, fwd);
                add(pr, ph, eps, fwd);
            }
            Node::Union(l, r) => {
                let (tl, pl) = assoc[l.index()];
                let (tr, pr) = assoc[r.index()];
                add(th, tl, eps, fwd);
                add(th, tr, eps, fwd);
                add(pl, ph, eps, fwd);
                add(pr, ph, eps, fwd);
            }
            Node::Star(c) => {
                let (tc, pc) = assoc[c.index()];
                add(th, tc, eps, fwd);
                add(th, ph, eps, fwd);
                add(pc, ph, eps, fwd);
                add(pc, tc, eps, Kind::Back);
            }
        }
    }
    (next as usize, transitions, assoc)
}

/// Depth-first topological order of the forward transitions: reverse
/// postorder, successors taken in transition order. Returns `order` with
/// `order[rank] = state`.
///
/// A symbol transition's target is emitted immediately after its source;
/// if the graph shape prevents that an error is returned.
pub fn topo_order(
    state_count: usize,
    transitions: &[Transition],
) -> Result<Vec<StateId>, TnfaError> {
    let fwd = Adjacency::build(
        state_count,
        transitions
            .iter()
            .filter(|t| t.kind == Kind::Forward)
            .map(|t| (t.from, t.to)),
    );
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; state_count];
    let mut post = Vec::with_capacity(state_count);
    // (state, next successor index)
    let mut stack: Vec<(StateId, usize)> = Vec::new();
    for root in 0..state_count as u32 {
        if mark[root as usize] != Mark::New {
            continue;
        }
        stack.push((StateId(root), 0));
        mark[root as usize] = Mark::Active;
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            let succ = fwd.of(u);
            if *i < succ.len() {
                let v = succ[*i];
                *i += 1;
                match mark[v.index()] {
                    Mark::New => {
                        mark[v.index()] = Mark::Active;
                        stack.push((v, 0));
                    }
                    Mark::Active => return Err(TnfaError::Cycle(v.0)),
                    Mark::Done => {}
                }
            } else {
                mark[u.index()] = Mark::Done;
                post.push(u);
                stack.pop();
            }
        }
    }
    post.reverse();
    let mut rank = vec![0usize; state_count];
    for (r, s) in post.iter().enumerate() {
        rank[s.index()] = r;
    }
    for t in transitions {
        if matches!(t.label, Label::Symbol(_)) && rank[t.to.index()] != rank[t.from.index()] + 1 {
            return Err(TnfaError::NotAdjacent {
                from: t.from.0,
                to: t.to.0,
            });
        }
    }
    Ok(post)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn build(p: &str) -> Tnfa {
        Tnfa::thompson(&parse(p).unwrap())
    }

    fn set(t: &Tnfa, ranks: &[usize]) -> StateSet {
        StateSet::from_states(
            t.state_count(),
            ranks.iter().map(|&r| StateId(r as u32 - 1)),
        )
    }

    #[test]
    fn single_char() {
        let t = build("a");
        assert_eq!(t.state_count(), 2);
        assert_eq!(t.transitions().len(), 1);
        let tr = t.transitions()[0];
        assert_eq!(tr.label, Label::Symbol(Symbol::byte(b'a')));
        assert_eq!((tr.from.rank(), tr.to.rank()), (1, 2));
        assert_eq!((t.start().rank(), t.accept().rank()), (1, 2));
    }

    #[test]
    fn star_has_one_back_transition() {
        let t = build("a*");
        assert_eq!(t.state_count(), 4);
        let sym: Vec<_> = t
            .transitions()
            .iter()
            .filter(|t| matches!(t.label, Label::Symbol(_)))
            .collect();
        assert_eq!(sym.len(), 1);
        let eps: Vec<_> = t
            .transitions()
            .iter()
            .filter(|t| t.label == Label::Epsilon)
            .collect();
        assert_eq!(eps.len(), 4);
        let back: Vec<_> = eps.iter().filter(|t| t.kind == Kind::Back).collect();
        assert_eq!(back.len(), 1);
        // (φ_a, θ_a): from the a-state back to the a-transition's source,
        // a higher rank to a lower one
        let b = back[0];
        assert_eq!(t.incoming_symbol(b.from), Some(Symbol::byte(b'a')));
        assert_eq!(b.from.rank(), b.to.rank() + 1);
        assert!(b.from > b.to);
    }

    #[test]
    fn concat_endpoints_adjacent() {
        let t = build("ab");
        assert_eq!(t.state_count(), 6);
        for tr in t.transitions() {
            if let Label::Symbol(_) = tr.label {
                assert_eq!(tr.to.rank(), tr.from.rank() + 1);
            }
        }
        assert_eq!(t.start().rank(), 1);
        assert_eq!(t.accept().rank(), 6);
        // already topologically numbered
        let order = t.topo_order().unwrap();
        assert!(order.iter().enumerate().all(|(i, s)| s.index() == i));
    }

    #[test]
    fn topo_order_rejects_forward_cycle() {
        let e = |f: u32, t: u32| Transition {
            from: StateId(f),
            to: StateId(t),
            label: Label::Epsilon,
            kind: Kind::Forward,
        };
        let err = topo_order(3, &[e(0, 1), e(1, 2), e(2, 1)]).unwrap_err();
        assert!(matches!(err, TnfaError::Cycle(_)));
    }

    #[test]
    fn naive_move_examples() {
        let t = build("a");
        let a = Symbol::byte(b'a');
        assert_eq!(t.naive_move(&set(&t, &[1]), a), set(&t, &[2]));
        assert!(t.naive_move(&t.empty_set(), a).is_empty());
        assert!(t.naive_move(&set(&t, &[1]), Symbol::byte(b'z')).is_empty());

        let t = build("ac|a*b");
        let s0 = t.naive_close(&set(&t, &[1]));
        let moved = t.naive_move(&s0, a);
        assert_eq!(moved.len(), 2);
        assert!(moved.iter().all(|s| t.incoming_symbol(s) == Some(a)));
        let all_a = t
            .states()
            .filter(|&s| t.incoming_symbol(s) == Some(a))
            .count();
        assert_eq!(all_a, 2);
    }

    #[test]
    fn naive_close_examples() {
        let t = build("a");
        assert!(t.naive_close(&t.empty_set()).is_empty());
        assert_eq!(t.naive_close(&set(&t, &[2])), set(&t, &[2]));

        let t = build("a*");
        let root = t.tree().root();
        let (th_star, ph_star) = t.assoc(root);
        let Node::Star(child) = t.tree().node(root) else {
            panic!()
        };
        let (th_a, _) = t.assoc(child);
        let closed = t.naive_close(&StateSet::from_states(4, [th_star]));
        assert_eq!(closed, StateSet::from_states(4, [th_star, th_a, ph_star]));
    }

    #[test]
    fn naive_match_examples() {
        let t = build("ac|a*b");
        assert!(t.naive_match(b"b"));
        assert!(t.naive_match(b"aab"));
        assert!(t.naive_match(b"ac"));
        assert!(!t.naive_match(b"ca"));
        assert!(!t.naive_match(b""));
        assert!(build("a*").naive_match(b""));
    }

    #[test]
    fn state_and_transition_counts() {
        for p in ["a", "ab", "a|b", "a*", "(ab|c)*d", "ac|a*b"] {
            let tree = parse(p).unwrap();
            let t = Tnfa::thompson(&tree);
            assert_eq!(t.state_count(), 2 * tree.node_count());
            assert!(t.transitions().len() <= 4 * tree.node_count());
            assert!(t.eps_predecessors(t.start()).is_empty());
            assert!(t.eps_successors(t.accept()).is_empty());
            for s in t.states() {
                let out = t.transitions().iter().filter(|tr| tr.from == s).count();
                assert!(out <= 2);
            }
        }
    }
}
