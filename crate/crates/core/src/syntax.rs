//! Pattern parsing into a binary parse tree.
//!
//! Grammar over single bytes, lowest to highest precedence:
//!
//! ```text
//! union   := concat ('|' concat)*
//! concat  := repeat repeat*          (juxtaposition)
//! repeat  := atom '*'*
//! atom    := byte | '\' byte | '(' union ')'
//! ```
//!
//! Union and concatenation associate to the left. Parentheses only group;
//! they never produce nodes. There is no empty-string literal.

use std::fmt;

use thiserror::Error;

/// An input symbol. Bytes occupy `0..=255`; [`Symbol::BETA`] is the
/// pseudo-transition label used by nested decompositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(pub u16);

impl Symbol {
    pub const BETA: Symbol = Symbol(256);

    #[inline]
    pub fn byte(b: u8) -> Symbol {
        Symbol(b as u16)
    }

    #[inline]
    pub fn is_beta(self) -> bool {
        self == Symbol::BETA
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_beta() {
            f.write_str("β")
        } else {
            let b = self.0 as u8;
            if b.is_ascii_graphic() {
                write!(f, "{}", b as char)
            } else {
                write!(f, "\\x{b:02x}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Char(Symbol),
    Concat(NodeId, NodeId),
    Union(NodeId, NodeId),
    Star(NodeId),
}

impl Node {
    pub fn children(&self) -> impl Iterator<Item = NodeId> {
        let (a, b) = match *self {
            Node::Char(_) => (None, None),
            Node::Star(c) => (Some(c), None),
            Node::Concat(l, r) | Node::Union(l, r) => (Some(l), Some(r)),
        };
        a.into_iter().chain(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty pattern")]
    Empty,
    #[error("'*' at position {0} has no operand")]
    DanglingStar(usize),
    #[error("'|' at position {0} is missing an operand")]
    MissingOperand(usize),
    #[error("'(' at position {0} is never closed")]
    UnclosedGroup(usize),
    #[error("')' at position {0} has no matching '('")]
    UnmatchedParen(usize),
    #[error("group at position {0} is empty")]
    EmptyGroup(usize),
    #[error("trailing escape at position {0}")]
    TrailingEscape(usize),
}

impl ParseError {
    /// Byte offset the error refers to, if any.
    pub fn position(&self) -> Option<usize> {
        match *self {
            ParseError::Empty => None,
            ParseError::DanglingStar(p)
            | ParseError::MissingOperand(p)
            | ParseError::UnclosedGroup(p)
            | ParseError::UnmatchedParen(p)
            | ParseError::EmptyGroup(p)
            | ParseError::TrailingEscape(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("node {0} is not reachable from the root")]
    Unreachable(u32),
    #[error("node {0} is reachable more than once")]
    Shared(u32),
    #[error("node {0} refers to a missing child")]
    DanglingChild(u32),
}

/// Binary parse tree `T(R)`. Nodes live in an arena; every node is reachable
/// from `root` exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    nodes: Vec<Node>,
    root: NodeId,
}

impl ParseTree {
    /// Validates and wraps an arena. Fails unless the nodes form a single
    /// tree rooted at `root`.
    pub fn from_nodes(nodes: Vec<Node>, root: NodeId) -> Result<Self, TreeError> {
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        if root.index() >= nodes.len() {
            return Err(TreeError::DanglingChild(root.0));
        }
        while let Some(v) = stack.pop() {
            if seen[v.index()] {
                return Err(TreeError::Shared(v.0));
            }
            seen[v.index()] = true;
            for c in nodes[v.index()].children() {
                if c.index() >= nodes.len() {
                    return Err(TreeError::DanglingChild(v.0));
                }
                stack.push(c);
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(TreeError::Unreachable(i as u32));
        }
        Ok(ParseTree { nodes, root })
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of nodes, the `m` of the pattern.
    #[inline]
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, Node)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| (NodeId(i as u32), n))
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Char(_)))
            .count()
    }

    /// Parent of every node (`None` for the root).
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parent = vec![None; self.nodes.len()];
        for (id, node) in self.nodes() {
            for c in node.children() {
                parent[c.index()] = Some(id);
            }
        }
        parent
    }

    /// Nodes in preorder (parent before children, left before right).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            let kids: Vec<_> = self.node(v).children().collect();
            stack.extend(kids.into_iter().rev());
        }
        out
    }

    /// Nodes in postorder (children before parent).
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = self.preorder_mirrored();
        out.reverse();
        out
    }

    // Preorder visiting right before left; reversed it is a postorder.
    fn preorder_mirrored(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.node(v).children());
        }
        out
    }

    /// Writes the pattern back out with the minimal parentheses the
    /// precedence rules need. Reparsing gives an isomorphic tree.
    pub fn unparse(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.unparse_into(self.root, 0, &mut out);
        out
    }

    // prec: 0 = union context, 1 = concat operand, 2 = star operand
    fn unparse_into(&self, v: NodeId, prec: u8, out: &mut Vec<u8>) {
        match self.node(v) {
            Node::Char(sym) => push_literal(sym, out),
            Node::Star(c) => {
                self.unparse_into(c, 2, out);
                out.push(b'*');
            }
            Node::Concat(l, r) => {
                let wrap = prec > 1;
                if wrap {
                    out.push(b'(');
                }
                self.unparse_into(l, 1, out);
                // Right operand of a left-associative chain needs grouping
                // when it is itself a concatenation.
                let right_is_concat = matches!(self.node(r), Node::Concat(..));
                self.unparse_into(r, if right_is_concat { 2 } else { 1 }, out);
                if wrap {
                    out.push(b')');
                }
            }
            Node::Union(l, r) => {
                let wrap = prec > 0;
                if wrap {
                    out.push(b'(');
                }
                self.unparse_into(l, 0, out);
                out.push(b'|');
                let right_is_union = matches!(self.node(r), Node::Union(..));
                self.unparse_into(r, if right_is_union { 1 } else { 0 }, out);
                if wrap {
                    out.push(b')');
                }
            }
        }
    }

    /// Structural equality ignoring arena numbering.
    pub fn isomorphic(&self, other: &ParseTree) -> bool {
        fn eq(a: &ParseTree, x: NodeId, b: &ParseTree, y: NodeId) -> bool {
            match (a.node(x), b.node(y)) {
                (Node::Char(s), Node::Char(t)) => s == t,
                (Node::Star(c), Node::Star(d)) => eq(a, c, b, d),
                (Node::Concat(l1, r1), Node::Concat(l2, r2))
                | (Node::Union(l1, r1), Node::Union(l2, r2)) => {
                    eq(a, l1, b, l2) && eq(a, r1, b, r2)
                }
                _ => false,
            }
        }
        self.node_count() == other.node_count() && eq(self, self.root, other, other.root)
    }
}

fn push_literal(sym: Symbol, out: &mut Vec<u8>) {
    if sym.is_beta() {
        out.extend_from_slice("β".as_bytes());
        return;
    }
    let b = sym.0 as u8;
    if matches!(b, b'(' | b')' | b'|' | b'*' | b'\\') {
        out.push(b'\\');
    }
    out.push(b);
}

/// Incremental arena builder used by the parser, the decomposition and the
/// random pattern generator.
#[derive(Debug, Default, Clone)]
pub struct TreeBuilder {
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        TreeBuilder::default()
    }

    pub fn push(&mut self, node: Node) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        id
    }

    pub fn char(&mut self, sym: Symbol) -> NodeId {
        self.push(Node::Char(sym))
    }

    pub fn concat(&mut self, l: NodeId, r: NodeId) -> NodeId {
        self.push(Node::Concat(l, r))
    }

    pub fn union(&mut self, l: NodeId, r: NodeId) -> NodeId {
        self.push(Node::Union(l, r))
    }

    pub fn star(&mut self, c: NodeId) -> NodeId {
        self.push(Node::Star(c))
    }

    pub fn finish(self, root: NodeId) -> Result<ParseTree, TreeError> {
        ParseTree::from_nodes(self.nodes, root)
    }
}

pub fn parse(pattern: &str) -> Result<ParseTree, ParseError> {
    parse_bytes(pattern.as_bytes())
}

pub fn parse_bytes(pattern: &[u8]) -> Result<ParseTree, ParseError> {
    let mut p = Parser {
        src: pattern,
        pos: 0,
        b: TreeBuilder::new(),
    };
    if pattern.is_empty() {
        return Err(ParseError::Empty);
    }
    let root = p.union()?;
    match p.peek() {
        None => {}
        Some(b')') => return Err(ParseError::UnmatchedParen(p.pos)),
        // union() only stops at ')' or end of input
        Some(_) => unreachable!("parser stopped early"),
    }
    let root = root.ok_or(ParseError::Empty)?;
    Ok(p.b.finish(root).expect("parser builds a tree"))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    b: TreeBuilder,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    // Returns None for an empty alternative list (only possible when the
    // whole input or a group is empty).
    fn union(&mut self) -> Result<Option<NodeId>, ParseError> {
        let start = self.pos;
        let mut acc = self.concat()?;
        while self.peek() == Some(b'|') {
            let bar = self.pos;
            let Some(left) = acc else {
                return Err(ParseError::MissingOperand(bar));
            };
            self.pos += 1;
            let Some(right) = self.concat()? else {
                return Err(ParseError::MissingOperand(bar));
            };
            acc = Some(self.b.union(left, right));
        }
        if acc.is_none() && self.pos == start {
            return Ok(None);
        }
        Ok(acc)
    }

    fn concat(&mut self) -> Result<Option<NodeId>, ParseError> {
        let mut acc: Option<NodeId> = None;
        while let Some(item) = self.repeat()? {
            acc = Some(match acc {
                None => item,
                Some(l) => self.b.concat(l, item),
            });
        }
        Ok(acc)
    }

    fn repeat(&mut self) -> Result<Option<NodeId>, ParseError> {
        let Some(mut node) = self.atom()? else {
            return Ok(None);
        };
        while self.peek() == Some(b'*') {
            self.pos += 1;
            node = self.b.star(node);
        }
        Ok(Some(node))
    }

    fn atom(&mut self) -> Result<Option<NodeId>, ParseError> {
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        match c {
            b'|' | b')' => Ok(None),
            b'*' => Err(ParseError::DanglingStar(self.pos)),
            b'\\' => {
                let at = self.pos;
                let Some(&lit) = self.src.get(at + 1) else {
                    return Err(ParseError::TrailingEscape(at));
                };
                self.pos += 2;
                Ok(Some(self.b.char(Symbol::byte(lit))))
            }
            b'(' => {
                let open = self.pos;
                self.pos += 1;
                let inner = self.union()?;
                match self.peek() {
                    Some(b')') => self.pos += 1,
                    _ => return Err(ParseError::UnclosedGroup(open)),
                }
                inner.map(Some).ok_or(ParseError::EmptyGroup(open))
            }
            _ => {
                self.pos += 1;
                Ok(Some(self.b.char(Symbol::byte(c))))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(c: char) -> Node {
        Node::Char(Symbol::byte(c as u8))
    }

    #[test]
    fn union_example_tree() {
        let t = parse("ac|a*b").unwrap();
        assert_eq!(t.node_count(), 8);
        let Node::Union(l, r) = t.node(t.root()) else {
            panic!("root should be a union")
        };
        let Node::Concat(a, c) = t.node(l) else {
            panic!()
        };
        assert_eq!((t.node(a), t.node(c)), (sym('a'), sym('c')));
        let Node::Concat(st, b) = t.node(r) else {
            panic!()
        };
        assert_eq!(t.node(b), sym('b'));
        let Node::Star(a2) = t.node(st) else { panic!() };
        assert_eq!(t.node(a2), sym('a'));
    }

    #[test]
    fn single_char_and_parentheses() {
        let a = parse("a").unwrap();
        assert_eq!(a.node_count(), 1);
        assert_eq!(a.node(a.root()), sym('a'));
        assert!(parse("((a))").unwrap().isomorphic(&a));
    }

    #[test]
    fn left_associative_operators() {
        let t = parse("abc").unwrap();
        let Node::Concat(l, r) = t.node(t.root()) else {
            panic!()
        };
        assert!(matches!(t.node(l), Node::Concat(..)));
        assert_eq!(t.node(r), sym('c'));
        let u = parse("a|b|c").unwrap();
        let Node::Union(l, _) = u.node(u.root()) else {
            panic!()
        };
        assert!(matches!(u.node(l), Node::Union(..)));
    }

    #[test]
    fn escapes_are_literals() {
        let t = parse(r"\*\(").unwrap();
        let Node::Concat(l, r) = t.node(t.root()) else {
            panic!()
        };
        assert_eq!((t.node(l), t.node(r)), (sym('*'), sym('(')));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(parse("*a"), Err(ParseError::DanglingStar(0)));
        assert_eq!(parse("a|*"), Err(ParseError::DanglingStar(2)));
        assert_eq!(parse("(*)"), Err(ParseError::DanglingStar(1)));
        assert_eq!(parse(""), Err(ParseError::Empty));
        assert_eq!(parse("a|"), Err(ParseError::MissingOperand(1)));
        assert_eq!(parse("|a"), Err(ParseError::MissingOperand(0)));
        assert_eq!(parse("a||b"), Err(ParseError::MissingOperand(1)));
        assert_eq!(parse("(a|)"), Err(ParseError::MissingOperand(2)));
        assert_eq!(parse("("), Err(ParseError::UnclosedGroup(0)));
        assert_eq!(parse("a(b"), Err(ParseError::UnclosedGroup(1)));
        assert_eq!(parse("a)"), Err(ParseError::UnmatchedParen(1)));
        assert_eq!(parse("()"), Err(ParseError::EmptyGroup(0)));
        assert_eq!(parse("a\\"), Err(ParseError::TrailingEscape(1)));
        assert_eq!(parse("(a)(").unwrap_err().position(), Some(3));
    }

    #[test]
    fn unparse_examples() {
        for p in [
            "ac|a*b", "(ab)*", "a(b|c)", "(a|b)*c", "a(bc)", "a|(b|c)", r"\**",
        ] {
            let t = parse(p).unwrap();
            let back = parse_bytes(&t.unparse()).unwrap();
            assert!(t.isomorphic(&back), "{p}");
        }
        assert_eq!(parse("a(bc)").unwrap().unparse(), b"a(bc)");
        assert_eq!(parse("((a)b)").unwrap().unparse(), b"ab");
    }

    #[test]
    fn from_nodes_rejects_non_trees() {
        let shared = vec![sym('a'), Node::Concat(NodeId(0), NodeId(0))];
        assert_eq!(
            ParseTree::from_nodes(shared, NodeId(1)),
            Err(TreeError::Shared(0))
        );
        let orphan = vec![sym('a'), sym('b')];
        assert_eq!(
            ParseTree::from_nodes(orphan, NodeId(0)),
            Err(TreeError::Unreachable(1))
        );
    }

    #[test]
    fn traversal_orders() {
        let t = parse("ab|c").unwrap();
        let pre = t.preorder();
        let post = t.postorder();
        assert_eq!(pre[0], t.root());
        assert_eq!(*post.last().unwrap(), t.root());
        let parents = t.parents();
        let pos: Vec<usize> = {
            let mut p = vec![0; t.node_count()];
            for (i, v) in post.iter().enumerate() {
                p[v.index()] = i;
            }
            p
        };
        for (id, _) in t.nodes() {
            if let Some(par) = parents[id.index()] {
                assert!(pos[id.index()] < pos[par.index()]);
            }
        }
    }
}
