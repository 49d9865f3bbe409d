//! ε-closure in one word-parallel pass per level of a separator tree.
//!
//! A pTNFA is the part of an automaton induced by a connected cluster of
//! parse nodes. Cutting one cluster edge splits it into an *outer* part
//! (holding the cluster root) and an *inner* part, and the only transitions
//! between them enter the inner part at its start state or leave it at its
//! accept state. Splitting recursively down to single parse nodes gives the
//! separator tree.
//!
//! Every tree node at depth `k` owns an aligned interval of length `l / 2^k`
//! in `[1, l]`, `l = 3 * 2^d`; a leaf's two states sit at local positions 2
//! and 3, and local position 1 of every interval is never mapped. That spare
//! position is the test bit the per-level update uses to broadcast "the
//! interval's start (or accept) state is reachable" across the whole
//! interval with two subtractions.

use thiserror::Error;

use crate::bitstring::BitString;
use crate::sim::{check_width, SimError, Simulation, SymbolMasks};
use crate::syntax::{NodeId, Symbol};
use crate::tnfa::{StateId, StateSet, Tnfa};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeparatorError {
    #[error("a pTNFA with two states is a leaf and cannot be split")]
    Leaf,
}

/// Part of an automaton induced by a connected cluster of parse nodes.
/// `nodes` is in preorder, so `nodes[0]` is the cluster root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ptnfa {
    nodes: Vec<NodeId>,
}

impl Ptnfa {
    /// The whole automaton.
    pub fn whole(tnfa: &Tnfa) -> Ptnfa {
        Ptnfa {
            nodes: tnfa.tree().preorder(),
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn state_count(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn start(&self, tnfa: &Tnfa) -> StateId {
        tnfa.assoc(self.root()).0
    }

    pub fn accept(&self, tnfa: &Tnfa) -> StateId {
        tnfa.assoc(self.root()).1
    }

    pub fn states<'a>(&'a self, tnfa: &'a Tnfa) -> impl Iterator<Item = StateId> + 'a {
        self.nodes.iter().flat_map(move |&v| {
            let (th, ph) = tnfa.assoc(v);
            [th, ph]
        })
    }
}

/// Splits `p` at the cluster edge that maximises the smaller side; ties go to
/// the smallest child node id. Returns `(outer, inner)`.
pub fn split_ptnfa(tnfa: &Tnfa, p: &Ptnfa) -> Result<(Ptnfa, Ptnfa), SeparatorError> {
    let parents = tnfa.tree().parents();
    let mut slot = vec![u32::MAX; tnfa.tree().node_count()];
    split_with(&parents, &mut slot, p)
}

fn split_with(
    parents: &[Option<NodeId>],
    slot: &mut [u32],
    p: &Ptnfa,
) -> Result<(Ptnfa, Ptnfa), SeparatorError> {
    let t = p.nodes.len();
    if t < 2 {
        return Err(SeparatorError::Leaf);
    }
    for (i, v) in p.nodes.iter().enumerate() {
        slot[v.index()] = i as u32;
    }
    // Subtree sizes inside the cluster; preorder puts parents first.
    let mut size = vec![1usize; t];
    for i in (1..t).rev() {
        let par = parents[p.nodes[i].index()].expect("non-root cluster node has a parent");
        size[slot[par.index()] as usize] += size[i];
    }
    let mut best: Option<(usize, NodeId, usize)> = None;
    for (i, &sz) in size.iter().enumerate().take(t).skip(1) {
        let score = sz.min(t - sz);
        let id = p.nodes[i];
        let better = match best {
            None => true,
            Some((s, bid, _)) => score > s || (score == s && id < bid),
        };
        if better {
            best = Some((score, id, i));
        }
    }
    for v in &p.nodes {
        slot[v.index()] = u32::MAX;
    }
    let (_, _, at) = best.expect("cluster has an edge");
    // The child's cluster subtree is contiguous in preorder.
    let inner = p.nodes[at..at + size[at]].to_vec();
    let outer = p.nodes[..at]
        .iter()
        .chain(&p.nodes[at + size[at]..])
        .copied()
        .collect();
    Ok((Ptnfa { nodes: outer }, Ptnfa { nodes: inner }))
}

#[derive(Debug, Clone)]
pub struct SepNode {
    pub ptnfa: Ptnfa,
    pub depth: usize,
    /// `X(v)`: the pTNFA's own start/accept for a leaf, the inner child's
    /// start/accept otherwise.
    pub pair: (StateId, StateId),
    /// `(outer, inner)` node indices.
    pub children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct SeparatorTree {
    nodes: Vec<SepNode>,
    depth: usize,
}

impl SeparatorTree {
    pub fn build(tnfa: &Tnfa) -> SeparatorTree {
        let parents = tnfa.tree().parents();
        let mut slot = vec![u32::MAX; tnfa.tree().node_count()];
        let mut nodes = Vec::new();
        let mut depth = 0;
        let mut stack = vec![(Ptnfa::whole(tnfa), 0usize, None::<(usize, bool)>)];
        while let Some((p, k, link)) = stack.pop() {
            let id = nodes.len();
            depth = depth.max(k);
            let own = (p.start(tnfa), p.accept(tnfa));
            let (pair, split) = match split_with(&parents, &mut slot, &p) {
                Ok((outer, inner)) => {
                    let pair = (inner.start(tnfa), inner.accept(tnfa));
                    (pair, Some((outer, inner)))
                }
                Err(SeparatorError::Leaf) => (own, None),
            };
            nodes.push(SepNode {
                ptnfa: p,
                depth: k,
                pair,
                children: None,
            });
            if let Some((parent, is_inner)) = link {
                let entry = nodes[parent]
                    .children
                    .get_or_insert((usize::MAX, usize::MAX));
                if is_inner {
                    entry.1 = id;
                } else {
                    entry.0 = id;
                }
            }
            if let Some((outer, inner)) = split {
                stack.push((inner, k + 1, Some((id, true))));
                stack.push((outer, k + 1, Some((id, false))));
            }
        }
        SeparatorTree { nodes, depth }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> &[SepNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &SepNode {
        &self.nodes[i]
    }

    /// Maximum leaf depth `d`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].children.is_none()
    }
}

/// Constant strings for one separator-tree level.
#[derive(Debug, Clone)]
pub struct Level {
    pub x_theta: BitString,
    pub e_theta: BitString,
    pub x_phi: BitString,
    pub e_phi: BitString,
    /// Test bit at the first position of every interval.
    pub i: BitString,
    /// `I_k >> t`
    pub i_low: BitString,
    /// Number of intervals at this level that hold a pTNFA.
    pub mapped: usize,
}

#[derive(Debug, Clone)]
pub struct SeparatorSim {
    tnfa: Tnfa,
    tree: SeparatorTree,
    w: usize,
    l: usize,
    /// `M(s)` per state, 1-based.
    position: Vec<u32>,
    /// Interval index of every separator-tree node at its level.
    interval: Vec<usize>,
    levels: Vec<Level>,
    /// Per level, the words of `X_θ, E_θ, X_φ, E_φ, I, I >> t` back to back.
    packed: Vec<u64>,
    /// Per level, `t = l / 2^k - 1`.
    shifts: Vec<usize>,
    d: SymbolMasks,
}

pub struct Scratch {
    acc: Vec<u64>,
    z: Vec<u64>,
}

impl SeparatorSim {
    pub fn build(tnfa: &Tnfa, w: usize) -> Result<SeparatorSim, SimError> {
        check_width(w)?;
        let tree = SeparatorTree::build(tnfa);
        let (l, position, interval) = build_mapping(tnfa, &tree);
        let levels = build_level_strings(tnfa, &tree, l, &position, &interval);
        let mut d = SymbolMasks::new();
        for s in tnfa.states() {
            if let Some(a) = tnfa.incoming_symbol(s) {
                d.add(a, position[s.index()] as usize, l);
            }
        }
        let mut packed = Vec::new();
        for lv in &levels {
            for b in [
                &lv.x_theta,
                &lv.e_theta,
                &lv.x_phi,
                &lv.e_phi,
                &lv.i,
                &lv.i_low,
            ] {
                packed.extend_from_slice(b.words());
            }
        }
        let shifts = (0..levels.len()).map(|k| (l >> k) - 1).collect();
        Ok(SeparatorSim {
            tnfa: tnfa.clone(),
            tree,
            w,
            l,
            position,
            interval,
            levels,
            packed,
            shifts,
            d,
        })
    }

    pub fn tree(&self) -> &SeparatorTree {
        &self.tree
    }

    /// Bitstring length `l = 3 * 2^d`.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.l
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn word_width(&self) -> usize {
        self.w
    }

    /// Simulated words per bitstring, `ceil(l / w)`.
    pub fn words_per_string(&self) -> usize {
        self.l.div_ceil(self.w)
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// Aligned interval `[start, end]` (1-based, inclusive) owned by
    /// separator-tree node `v`.
    pub fn interval_of(&self, v: usize) -> (usize, usize) {
        let len = self.l >> self.tree.node(v).depth;
        let start = self.interval[v] * len + 1;
        (start, start + len - 1)
    }

    /// Positions that some state maps to.
    pub fn mapped_positions(&self) -> BitString {
        let mut out = BitString::zeros(self.l);
        for &p in &self.position {
            out.set(p as usize, true);
        }
        out
    }

    pub fn d(&self, a: Symbol) -> Option<&BitString> {
        self.d.get(a)
    }

    /// Runs Close level by level, returning `S_0, S_1, ..., S_{d+1}`.
    pub fn close_levels(&self, s: &BitString) -> Vec<BitString> {
        let mut scratch = self.scratch();
        let mut cur = s.clone();
        let mut out = vec![cur.clone()];
        for k in 0..self.levels.len() {
            self.level_step(k, &mut cur, &mut scratch);
            out.push(cur.clone());
        }
        out
    }

    fn level_step(&self, k: usize, s: &mut BitString, sc: &mut Scratch) {
        let n = sc.acc.len();
        let lv = &self.packed[k * 6 * n..(k + 1) * 6 * n];
        sc.acc.iter_mut().for_each(|w| *w = 0);
        if level_words(lv, self.shifts[k], s.words(), &mut sc.acc, &mut sc.z) {
            for (w, a) in s.words_mut().iter_mut().zip(&sc.acc) {
                *w |= a;
            }
        }
    }
}

/// All levels on an `N`-word string held in registers.
fn close_fixed<const N: usize>(packed: &[u64], shifts: &[usize], s: &mut [u64]) {
    let mut cur: [u64; N] = s[..N].try_into().expect("N words");
    let mut z = [0u64; N];
    for (lv, &t) in packed.chunks_exact(6 * N).zip(shifts) {
        let mut acc = [0u64; N];
        if level_words(lv, t, &cur, &mut acc, &mut z) {
            for w in 0..N {
                cur[w] |= acc[w];
            }
        }
    }
    s.copy_from_slice(&cur);
}

/// One level on raw words (`n = s.len()`), both halves computed from the
/// incoming `s`: `acc |= G_θ | G_φ` with
///
/// ```text
/// Y := S & X
/// Z := ((Y | I) - (I >> t)) & I
/// F := Z - (Z >> t)
/// G := F & E
/// ```
///
/// A zero `Y` makes `Z`, `F` and `G` zero and is skipped. Returns whether
/// anything was accumulated.
#[inline(always)]
fn level_words(lv: &[u64], t: usize, s: &[u64], acc: &mut [u64], z: &mut [u64]) -> bool {
    let n = s.len();
    let lv = &lv[..6 * n];
    let (acc, z) = (&mut acc[..n], &mut z[..n]);
    let i = &lv[4 * n..5 * n];
    let i_low = &lv[5 * n..6 * n];
    let ws = t / 64;
    let bs = (t % 64) as u32;
    let mut hit = false;
    for half in 0..2 {
        let x = &lv[2 * half * n..(2 * half + 1) * n];
        let e = &lv[(2 * half + 1) * n..(2 * half + 2) * n];
        let mut any = 0;
        for w in 0..n {
            any |= s[w] & x[w];
        }
        if any == 0 {
            continue;
        }
        hit = true;
        let mut borrow = 0u64;
        for w in 0..n {
            let v = (s[w] & x[w]) | i[w];
            let (d1, o1) = v.overflowing_sub(i_low[w]);
            let (d2, o2) = d1.overflowing_sub(borrow);
            borrow = (o1 | o2) as u64;
            z[w] = d2 & i[w];
        }
        borrow = 0;
        for w in 0..n {
            let j = w + ws;
            let lo = if j < n { z[j] >> bs } else { 0 };
            let hi = if bs != 0 && j + 1 < n {
                z[j + 1] << (64 - bs)
            } else {
                0
            };
            let (d1, o1) = z[w].overflowing_sub(lo | hi);
            let (d2, o2) = d1.overflowing_sub(borrow);
            borrow = (o1 | o2) as u64;
            acc[w] |= d2 & e[w];
        }
    }
    hit
}

/// Separator mapping: returns `(l, M, interval index per tree node)`.
fn build_mapping(tnfa: &Tnfa, tree: &SeparatorTree) -> (usize, Vec<u32>, Vec<usize>) {
    let l = 3usize << tree.depth();
    let mut position = vec![0u32; tnfa.state_count()];
    let mut interval = vec![0usize; tree.nodes().len()];
    let mut stack = vec![tree.root()];
    while let Some(v) = stack.pop() {
        let node = tree.node(v);
        match node.children {
            Some((outer, inner)) => {
                interval[outer] = 2 * interval[v];
                interval[inner] = 2 * interval[v] + 1;
                stack.push(outer);
                stack.push(inner);
            }
            None => {
                let start = interval[v] * (l >> node.depth);
                let (th, ph) = node.pair;
                position[th.index()] = (start + 2) as u32;
                position[ph.index()] = (start + 3) as u32;
            }
        }
    }
    (l, position, interval)
}

fn build_level_strings(
    tnfa: &Tnfa,
    tree: &SeparatorTree,
    l: usize,
    position: &[u32],
    interval: &[usize],
) -> Vec<Level> {
    let d = tree.depth();
    let mut levels: Vec<Level> = (0..=d)
        .map(|k| {
            let len = l >> k;
            let mut i = BitString::zeros(l);
            for j in 0..(1usize << k) {
                i.set(j * len + 1, true);
            }
            let i_low = i.shr(len - 1).expect("t < l");
            Level {
                x_theta: BitString::zeros(l),
                e_theta: BitString::zeros(l),
                x_phi: BitString::zeros(l),
                e_phi: BitString::zeros(l),
                i,
                i_low,
                mapped: 0,
            }
        })
        .collect();
    let mut inside = vec![false; tnfa.state_count()];
    for (v, node) in tree.nodes().iter().enumerate() {
        let lv = &mut levels[node.depth];
        lv.mapped += 1;
        debug_assert!(interval[v] < (1 << node.depth));
        for s in node.ptnfa.states(tnfa) {
            inside[s.index()] = true;
        }
        let allowed = |s: StateId| inside[s.index()];
        let (th, ph) = node.pair;
        let mark = |target: &mut BitString, states: Vec<StateId>| {
            for s in states {
                target.set(position[s.index()] as usize, true);
            }
        };
        mark(&mut lv.x_theta, tnfa.eps_reach_within(th, true, allowed));
        mark(&mut lv.e_theta, tnfa.eps_reach_within(th, false, allowed));
        mark(&mut lv.x_phi, tnfa.eps_reach_within(ph, true, allowed));
        mark(&mut lv.e_phi, tnfa.eps_reach_within(ph, false, allowed));
        for s in node.ptnfa.states(tnfa) {
            inside[s.index()] = false;
        }
    }
    levels
}

impl Simulation for SeparatorSim {
    type Scratch = Scratch;

    fn automaton(&self) -> &Tnfa {
        &self.tnfa
    }

    fn set_len(&self) -> usize {
        self.l
    }

    #[inline]
    fn position(&self, s: StateId) -> usize {
        self.position[s.index()] as usize
    }

    fn scratch(&self) -> Scratch {
        let n = self.l.div_ceil(64);
        Scratch {
            acc: vec![0; n],
            z: vec![0; n],
        }
    }

    fn move_into(&self, s: &BitString, a: Symbol, out: &mut BitString) {
        match self.d.get(a) {
            Some(d) => {
                out.assign_shr(s, 1);
                *out &= d;
            }
            None => out.clear(),
        }
    }

    fn close_in_place(&self, s: &mut BitString, scratch: &mut Scratch) {
        if s.is_zero() {
            return;
        }
        // l = 3 * 2^d bits, so only a few word counts occur
        let (p, t) = (&self.packed[..], &self.shifts[..]);
        match scratch.acc.len() {
            1 => close_fixed::<1>(p, t, s.words_mut()),
            2 => close_fixed::<2>(p, t, s.words_mut()),
            3 => close_fixed::<3>(p, t, s.words_mut()),
            6 => close_fixed::<6>(p, t, s.words_mut()),
            12 => close_fixed::<12>(p, t, s.words_mut()),
            _ => {
                for k in 0..self.levels.len() {
                    self.level_step(k, s, scratch);
                }
            }
        }
    }
}

/// Set-based recursive closure over the separator tree, used to validate
/// the bit-parallel level updates.
pub fn recursive_close(tnfa: &Tnfa, tree: &SeparatorTree, v: usize, s: &StateSet) -> StateSet {
    let node = tree.node(v);
    let mut inside = vec![false; tnfa.state_count()];
    for st in node.ptnfa.states(tnfa) {
        inside[st.index()] = true;
    }
    let allowed = |st: StateId| inside[st.index()];
    let within = |set: &StateSet| {
        StateSet::from_states(tnfa.state_count(), set.iter().filter(|&x| allowed(x)))
    };
    let s = within(s);
    // Z: members of X(v) reachable from S inside P(v)
    let (th, ph) = node.pair;
    let mut z = Vec::new();
    for target in [th, ph] {
        if tnfa
            .eps_reach_within(target, true, allowed)
            .iter()
            .any(|&x| s.contains(x))
        {
            z.push(target);
        }
    }
    let Some((outer, inner)) = node.children else {
        return StateSet::from_states(tnfa.state_count(), z);
    };
    let mut g = s.clone();
    for zs in z {
        for x in tnfa.eps_reach_within(zs, false, allowed) {
            g.insert(x);
        }
    }
    let mut out = recursive_close(tnfa, tree, outer, &g);
    out.union_with(&recursive_close(tnfa, tree, inner, &g));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, Node};
    use crate::tnfa::{Kind, Label};

    fn tnfa(p: &str) -> Tnfa {
        Tnfa::thompson(&parse(p).unwrap())
    }

    #[test]
    fn split_star_into_two_leaves() {
        let t = tnfa("a*");
        let whole = Ptnfa::whole(&t);
        let (outer, inner) = split_ptnfa(&t, &whole).unwrap();
        assert_eq!(outer.state_count(), 2);
        assert_eq!(inner.state_count(), 2);
        assert_eq!(outer.root(), t.tree().root());
        assert!(matches!(t.tree().node(inner.root()), Node::Char(_)));
        assert_boundary(&t, &outer, &inner);
        assert_eq!(split_ptnfa(&t, &inner), Err(SeparatorError::Leaf));
    }

    #[test]
    fn split_three_node_cluster() {
        for p in ["ab", "a|b", "a**"] {
            let t = tnfa(p);
            let (o, i) = split_ptnfa(&t, &Ptnfa::whole(&t)).unwrap();
            // 2/3 * 3 + 1 = 3 nodes
            assert!(o.nodes().len() <= 3 && i.nodes().len() <= 3);
            assert_eq!(o.nodes().len() + i.nodes().len(), 3);
            assert_boundary(&t, &o, &i);
        }
    }

    fn assert_boundary(t: &Tnfa, outer: &Ptnfa, inner: &Ptnfa) {
        let ins: Vec<StateId> = inner.states(t).collect();
        let outs: Vec<StateId> = outer.states(t).collect();
        for tr in t.transitions() {
            if outs.contains(&tr.from) && ins.contains(&tr.to) {
                assert_eq!(tr.to, inner.start(t));
            }
            if ins.contains(&tr.from) && outs.contains(&tr.to) {
                assert_eq!(tr.from, inner.accept(t));
            }
        }
    }

    #[test]
    fn tree_shapes() {
        let t = tnfa("a");
        let tree = SeparatorTree::build(&t);
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.depth(), 0);

        let t = tnfa("a*");
        let tree = SeparatorTree::build(&t);
        assert_eq!(tree.depth(), 1);
        let (o, i) = tree.node(0).children.unwrap();
        assert!(tree.is_leaf(o) && tree.is_leaf(i));
        assert_eq!(
            tree.node(0).pair,
            (tree.node(i).ptnfa.start(&t), tree.node(i).ptnfa.accept(&t))
        );
    }

    #[test]
    fn mapping_examples() {
        let s = SeparatorSim::build(&tnfa("a"), 64).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.position(s.automaton().start()), 2);
        assert_eq!(s.position(s.automaton().accept()), 3);

        let s = SeparatorSim::build(&tnfa("a*"), 64).unwrap();
        let t = s.automaton();
        assert_eq!(s.len(), 6);
        let (th, ph) = t.assoc(t.tree().root());
        assert_eq!((s.position(th), s.position(ph)), (2, 3));
        let Node::Star(c) = t.tree().node(t.tree().root()) else {
            panic!()
        };
        let (ta, pa) = t.assoc(c);
        assert_eq!((s.position(ta), s.position(pa)), (5, 6));
        assert_eq!(s.interval_of(0), (1, 6));
    }

    #[test]
    fn level_strings_for_single_leaf() {
        let s = SeparatorSim::build(&tnfa("a"), 64).unwrap();
        let lv = &s.levels()[0];
        let b = |x: &str| BitString::parse(x).unwrap();
        assert_eq!(lv.x_theta, b("010"));
        assert_eq!(lv.e_theta, b("010"));
        assert_eq!(lv.x_phi, b("001"));
        assert_eq!(lv.e_phi, b("001"));
        assert_eq!(lv.i, b("100"));
        assert_eq!(lv.mapped, 1);
    }

    #[test]
    fn inner_level_string_for_star() {
        let s = SeparatorSim::build(&tnfa("a*"), 64).unwrap();
        let lv1 = &s.levels()[1];
        // Inner leaf {θ_a, φ_a} at [4,6]: the star's back edge φ_a → θ_a
        // stays inside it, so φ_a reaches θ_a.
        assert_eq!(lv1.x_theta.to_string(), "010011");
        assert_eq!(lv1.i.to_string(), "100100");
        assert_eq!(lv1.mapped, 2);
        // Outer leaf holds θ*, φ* joined by an ε-transition.
        assert_eq!(lv1.e_theta.to_string(), "011010");
    }

    #[test]
    fn unmapped_positions_stay_zero() {
        for p in ["a", "a*", "ac|a*b", "(ab|c)*d", "a(b|c)*d*"] {
            let s = SeparatorSim::build(&tnfa(p), 64).unwrap();
            let unmapped = !&s.mapped_positions();
            for lv in s.levels() {
                for x in [&lv.x_theta, &lv.e_theta, &lv.x_phi, &lv.e_phi] {
                    assert!(!x.intersects(&unmapped));
                }
                // first position of every interval is a test bit, never mapped
                assert!(lv.i.is_subset_of(&unmapped));
            }
            let all = s.empty().with_len(s.len());
            let full = &!&all & &s.mapped_positions();
            for level in s.close_levels(&full) {
                assert!(!level.intersects(&unmapped));
            }
        }
    }

    #[test]
    fn star_close_matches_naive() {
        let s = SeparatorSim::build(&tnfa("a*"), 64).unwrap();
        let t = s.automaton();
        let set = StateSet::from_states(4, [t.start()]);
        let closed = s.decode(&s.close(&s.encode(&set)));
        assert_eq!(closed, t.naive_close(&set));
        assert_eq!(closed.len(), 3);
        assert!(s.close(&s.empty()).is_zero());
    }

    #[test]
    fn symbol_endpoints_consecutive() {
        for p in ["ac|a*b", "(ab|c)*d", "abcabc", "((a|b)*c)*"] {
            let s = SeparatorSim::build(&tnfa(p), 64).unwrap();
            let t = s.automaton();
            for tr in t.transitions() {
                if let Label::Symbol(_) = tr.label {
                    assert_eq!(s.position(tr.to), s.position(tr.from) + 1);
                }
                let _ = tr.kind == Kind::Back;
            }
        }
    }

    #[test]
    fn move_and_close_match_naive_on_union_example() {
        let s = SeparatorSim::build(&tnfa("ac|a*b"), 64).unwrap();
        let t = s.automaton();
        let m = t.state_count();
        for bits in 0u32..(1 << 10) {
            let set =
                StateSet::from_states(m, t.states().filter(|x| bits >> (x.index() % 10) & 1 == 1));
            let enc = s.encode(&set);
            assert_eq!(s.decode(&s.close(&enc)), t.naive_close(&set));
            assert_eq!(recursive_close(t, s.tree(), 0, &set), t.naive_close(&set));
            for &a in b"abc" {
                let a = Symbol::byte(a);
                assert_eq!(s.decode(&s.move_set(&enc, a)), t.naive_move(&set, a));
            }
        }
    }

    #[test]
    fn close_matches_naive_on_singletons_and_pairs() {
        for p in [
            "(a|b)*abb",
            "((a|b)*c)*d",
            "a(b(c(d)*)*)*",
            "(ab|cd|ef)*g**",
            "a|b|c|d|e|f",
        ] {
            let s = SeparatorSim::build(&tnfa(p), 64).unwrap();
            let t = s.automaton();
            let m = t.state_count();
            for x in t.states() {
                for y in t.states().filter(|y| y.index() >= x.index()) {
                    let set = StateSet::from_states(m, [x, y]);
                    let naive = t.naive_close(&set);
                    assert_eq!(s.decode(&s.close(&s.encode(&set))), naive, "{p} {set:?}");
                    assert_eq!(recursive_close(t, s.tree(), 0, &set), naive, "{p} {set:?}");
                }
            }
        }
    }

    #[test]
    fn leaves_sit_at_max_depth_or_above() {
        let t = tnfa("(ab|cd|ef)*g**");
        let s = SeparatorSim::build(&t, 64).unwrap();
        let tree = s.tree();
        let leaves = (0..tree.nodes().len()).filter(|&v| tree.is_leaf(v)).count();
        assert_eq!(leaves, t.tree().node_count());
        for (v, node) in tree.nodes().iter().enumerate() {
            assert!(node.depth <= tree.depth());
            let (a, b) = s.interval_of(v);
            assert_eq!(b - a + 1, s.len() >> node.depth);
            if let Some((o, i)) = node.children {
                let n = node.ptnfa.nodes().len();
                // each side keeps at most 2/3 of the parse nodes (plus one)
                for c in [o, i] {
                    assert!(3 * tree.node(c).ptnfa.nodes().len() <= 2 * n + 3);
                }
            }
        }
    }

    /// The level update written with whole-string operations.
    fn reference_step(s: &SeparatorSim, k: usize, cur: &BitString) -> BitString {
        let lv = &s.levels()[k];
        let t = (s.len() >> k) - 1;
        let mut next = cur.clone();
        for (x, e) in [(&lv.x_theta, &lv.e_theta), (&lv.x_phi, &lv.e_phi)] {
            let y = cur & x;
            let z = &(&y | &lv.i).try_sub(&lv.i_low).unwrap() & &lv.i;
            let f = z.try_sub(&z.shr(t).unwrap()).unwrap();
            next = &next | &(&f & e);
        }
        next
    }

    #[test]
    fn fused_step_matches_whole_string_ops() {
        for p in ["(ab|cd|ef)*g**", "((a|b)*c)*d", "a(b(c(d)*)*)*|(e|f)*"] {
            let s = SeparatorSim::build(&tnfa(p), 64).unwrap();
            let t = s.automaton();
            let m = t.state_count();
            for x in t.states() {
                let set = s.encode(&StateSet::from_states(
                    m,
                    [x, StateId(((x.0 as usize * 7) % m) as u32)],
                ));
                let levels = s.close_levels(&set);
                for k in 0..s.levels().len() {
                    assert_eq!(
                        levels[k + 1],
                        reference_step(&s, k, &levels[k]),
                        "{p} level {k}"
                    );
                }
            }
        }
    }
}
