#![allow(dead_code)]

use rxe::syntax::{Node, NodeId, ParseTree, Symbol, TreeBuilder};

/// Every parse tree with exactly `nodes` nodes over `alphabet`.
pub fn trees_with(nodes: usize, alphabet: &[u8]) -> Vec<ParseTree> {
    shapes(nodes, alphabet)
        .into_iter()
        .map(|e| {
            let mut b = TreeBuilder::new();
            let root = e.build(&mut b);
            b.finish(root).unwrap()
        })
        .collect()
}

/// Every parse tree with at most `nodes` nodes.
pub fn trees_up_to(nodes: usize, alphabet: &[u8]) -> Vec<ParseTree> {
    (1..=nodes).flat_map(|k| trees_with(k, alphabet)).collect()
}

#[derive(Clone)]
enum Expr {
    Char(u8),
    Concat(Box<Expr>, Box<Expr>),
    Union(Box<Expr>, Box<Expr>),
    Star(Box<Expr>),
}

impl Expr {
    fn build(&self, b: &mut TreeBuilder) -> NodeId {
        match self {
            Expr::Char(c) => b.char(Symbol::byte(*c)),
            Expr::Concat(l, r) => {
                let (l, r) = (l.build(b), r.build(b));
                b.concat(l, r)
            }
            Expr::Union(l, r) => {
                let (l, r) = (l.build(b), r.build(b));
                b.union(l, r)
            }
            Expr::Star(c) => {
                let c = c.build(b);
                b.star(c)
            }
        }
    }
}

fn shapes(n: usize, alphabet: &[u8]) -> Vec<Expr> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return alphabet.iter().map(|&c| Expr::Char(c)).collect();
    }
    let mut out: Vec<Expr> = shapes(n - 1, alphabet)
        .into_iter()
        .map(|e| Expr::Star(Box::new(e)))
        .collect();
    for k in 1..n - 1 {
        let left = shapes(k, alphabet);
        let right = shapes(n - 1 - k, alphabet);
        for l in &left {
            for r in &right {
                out.push(Expr::Concat(Box::new(l.clone()), Box::new(r.clone())));
                out.push(Expr::Union(Box::new(l.clone()), Box::new(r.clone())));
            }
        }
    }
    out
}

/// Membership by dynamic programming over the parse tree: `t[i][j]` says
/// whether the subexpression matches `q[i..j]`.
pub fn dp_match(tree: &ParseTree, q: &[u8]) -> bool {
    let n = q.len();
    let table = dp(tree, tree.root(), q);
    table[0][n]
}

#[allow(clippy::needless_range_loop)]
fn dp(tree: &ParseTree, v: NodeId, q: &[u8]) -> Vec<Vec<bool>> {
    let n = q.len();
    let mut t = vec![vec![false; n + 1]; n + 1];
    match tree.node(v) {
        Node::Char(a) => {
            for i in 0..n {
                t[i][i + 1] = Symbol::byte(q[i]) == a;
            }
        }
        Node::Union(l, r) => {
            let (l, r) = (dp(tree, l, q), dp(tree, r, q));
            for i in 0..=n {
                for j in i..=n {
                    t[i][j] = l[i][j] || r[i][j];
                }
            }
        }
        Node::Concat(l, r) => {
            let (l, r) = (dp(tree, l, q), dp(tree, r, q));
            for (i, row) in t.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate().skip(i) {
                    *cell = (i..=j).any(|k| l[i][k] && r[k][j]);
                }
            }
        }
        Node::Star(c) => {
            let c = dp(tree, c, q);
            for i in (0..=n).rev() {
                t[i][i] = true;
                for j in i + 1..=n {
                    t[i][j] = (i + 1..=j).any(|k| c[i][k] && t[k][j]);
                }
            }
        }
    }
    t
}
