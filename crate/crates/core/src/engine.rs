//! Backend selection, the matching front end, structure reports and the
//! benchmark harness.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::decomposition::{DecompError, DecomposedSim, InnerKind};
use crate::separator::SeparatorSim;
use crate::sim::{check_width, NaiveSim, SimError, Simulation};
use crate::simple::{required_bits, SimpleSim};
use crate::syntax::{parse_bytes, Node, NodeId, ParseError, ParseTree, Symbol, TreeBuilder};
use crate::tnfa::Tnfa;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Naive,
    Simple,
    Separator,
    Decomposed,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Naive => "naive",
            BackendKind::Simple => "simple",
            BackendKind::Separator => "separator",
            BackendKind::Decomposed => "decomposed",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A requested backend; `Auto` defers to [`select_backend`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendChoice {
    #[default]
    Auto,
    Fixed(BackendKind),
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "auto" => BackendChoice::Auto,
            "naive" => BackendChoice::Fixed(BackendKind::Naive),
            "simple" => BackendChoice::Fixed(BackendKind::Simple),
            "separator" => BackendChoice::Fixed(BackendKind::Separator),
            "decomposed" => BackendChoice::Fixed(BackendKind::Decomposed),
            _ => {
                return Err(format!(
                    "unknown backend '{s}' (auto, naive, simple, separator, decomposed)"
                ))
            }
        })
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendChoice::Auto => f.write_str("auto"),
            BackendChoice::Fixed(k) => k.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub backend: BackendChoice,
    /// Simulated word width.
    pub w: usize,
    /// Decomposition parameter; defaults to `w`.
    pub x: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            backend: BackendChoice::Auto,
            w: 64,
            x: None,
        }
    }
}

impl EngineConfig {
    pub fn x(&self) -> usize {
        self.x.unwrap_or(self.w)
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Decomp(#[from] DecompError),
    #[error(
        "backends disagree on m={m}: {first} says {first_verdict}, {other} says {other_verdict}"
    )]
    Disagreement {
        m: usize,
        first: BackendKind,
        first_verdict: bool,
        other: BackendKind,
        other_verdict: bool,
    },
    #[error("{0}")]
    Config(String),
}

/// Picks the backend for an automaton with `m` states: simple when the
/// reachability matrix fits a word, separator when the states do, and the
/// decomposition otherwise.
pub fn select_backend(m: usize, cfg: &EngineConfig) -> BackendKind {
    match cfg.backend {
        BackendChoice::Fixed(k) => k,
        BackendChoice::Auto if required_bits(m) <= cfg.w => BackendKind::Simple,
        BackendChoice::Auto if m <= cfg.w => BackendKind::Separator,
        BackendChoice::Auto => BackendKind::Decomposed,
    }
}

/// A built matcher for one pattern.
#[derive(Debug, Clone)]
pub enum Matcher {
    Naive(NaiveSim),
    Simple(SimpleSim),
    Separator(SeparatorSim),
    Decomposed(DecomposedSim),
}

impl Matcher {
    pub fn new(tree: &ParseTree, cfg: &EngineConfig) -> Result<Matcher, EngineError> {
        check_width(cfg.w)?;
        let tnfa = Tnfa::thompson(tree);
        Ok(match select_backend(tnfa.state_count(), cfg) {
            BackendKind::Naive => Matcher::Naive(NaiveSim::new(tnfa)),
            BackendKind::Simple => Matcher::Simple(SimpleSim::build(&tnfa, cfg.w)?),
            BackendKind::Separator => Matcher::Separator(SeparatorSim::build(&tnfa, cfg.w)?),
            BackendKind::Decomposed => Matcher::Decomposed(DecomposedSim::from_tree(
                tree,
                cfg.x(),
                InnerKind::Separator,
                cfg.w,
            )?),
        })
    }

    pub fn from_pattern(pattern: &[u8], cfg: &EngineConfig) -> Result<Matcher, EngineError> {
        Matcher::new(&parse_bytes(pattern)?, cfg)
    }

    pub fn kind(&self) -> BackendKind {
        match self {
            Matcher::Naive(_) => BackendKind::Naive,
            Matcher::Simple(_) => BackendKind::Simple,
            Matcher::Separator(_) => BackendKind::Separator,
            Matcher::Decomposed(_) => BackendKind::Decomposed,
        }
    }

    pub fn automaton(&self) -> &Tnfa {
        match self {
            Matcher::Naive(s) => s.automaton(),
            Matcher::Simple(s) => s.automaton(),
            Matcher::Separator(s) => s.automaton(),
            Matcher::Decomposed(s) => s.decomposition().whole(),
        }
    }

    /// Whether the whole of `q` is in the pattern's language.
    pub fn is_match(&self, q: &[u8]) -> bool {
        match self {
            Matcher::Naive(s) => s.is_match(q),
            Matcher::Simple(s) => s.is_match(q),
            Matcher::Separator(s) => s.is_match(q),
            Matcher::Decomposed(s) => s.is_match(q),
        }
    }
}

/// Structure report as ordered `key: value` pairs.
pub fn explain(
    pattern: &[u8],
    cfg: &EngineConfig,
) -> Result<Vec<(&'static str, String)>, EngineError> {
    let tree = parse_bytes(pattern)?;
    let matcher = Matcher::new(&tree, cfg)?;
    let t = matcher.automaton();
    let mut out = vec![
        ("pattern", String::from_utf8_lossy(pattern).into_owned()),
        ("parse_nodes", tree.node_count().to_string()),
        ("states", t.state_count().to_string()),
        ("transitions", t.transitions().len().to_string()),
        ("back_transitions", t.back_transition_count().to_string()),
        ("backend", matcher.kind().to_string()),
        ("word_size", cfg.w.to_string()),
    ];
    match &matcher {
        Matcher::Naive(_) => {}
        Matcher::Simple(s) => {
            out.push(("matrix_bits", required_bits(s.state_count()).to_string()));
        }
        Matcher::Separator(s) => {
            out.push(("separator_depth", s.depth().to_string()));
            out.push(("bitstring_len", s.len().to_string()));
            out.push(("words_per_set", s.words_per_string().to_string()));
            let mapped: Vec<String> = s.levels().iter().map(|l| l.mapped.to_string()).collect();
            out.push(("mapped_per_level", mapped.join(",")));
        }
        Matcher::Decomposed(s) => {
            let nd = s.decomposition();
            out.push(("x", nd.x().to_string()));
            out.push(("automata", nd.len().to_string()));
            out.push(("max_automaton_states", nd.max_states().to_string()));
            out.push(("macro_depth", nd.depth().to_string()));
            out.push(("inner", "separator".to_string()));
        }
    }
    Ok(out)
}

/// A random parse tree with exactly `nodes` nodes over `alphabet`.
pub fn random_tree(rng: &mut impl Rng, nodes: usize, alphabet: &[u8]) -> ParseTree {
    assert!(nodes >= 1 && !alphabet.is_empty());
    let mut b = TreeBuilder::new();
    let root = random_subtree(rng, &mut b, nodes, alphabet, false);
    b.finish(root).expect("generated tree is well formed")
}

fn random_subtree(
    rng: &mut impl Rng,
    b: &mut TreeBuilder,
    n: usize,
    alphabet: &[u8],
    under_star: bool,
) -> NodeId {
    if n == 1 {
        return b.char(Symbol::byte(alphabet[rng.gen_range(0..alphabet.len())]));
    }
    // Stars directly over stars are legal but rarely interesting.
    let star_p = if under_star { 0.05 } else { 0.2 };
    if n == 2 || rng.gen_bool(star_p) {
        let c = random_subtree(rng, b, n - 1, alphabet, true);
        return b.star(c);
    }
    let k = rng.gen_range(1..n - 1);
    let l = random_subtree(rng, b, k, alphabet, false);
    let r = random_subtree(rng, b, n - 1 - k, alphabet, false);
    if rng.gen_bool(0.6) {
        b.concat(l, r)
    } else {
        b.union(l, r)
    }
}

/// `(P)*` with `P` random over `{a, b, c}`, sized so the automaton has about
/// `m` states.
pub fn bench_pattern(rng: &mut impl Rng, m: usize) -> ParseTree {
    let inner_nodes = (m / 2).saturating_sub(1).max(1);
    let p = random_tree(rng, inner_nodes, b"abc");
    let mut b = TreeBuilder::new();
    let root = graft(&mut b, &p, p.root());
    let root = b.star(root);
    b.finish(root).expect("well formed")
}

fn graft(b: &mut TreeBuilder, t: &ParseTree, v: NodeId) -> NodeId {
    match t.node(v) {
        Node::Char(a) => b.char(a),
        Node::Concat(l, r) => {
            let (l, r) = (graft(b, t, l), graft(b, t, r));
            b.concat(l, r)
        }
        Node::Union(l, r) => {
            let (l, r) = (graft(b, t, l), graft(b, t, r));
            b.union(l, r)
        }
        Node::Star(c) => {
            let c = graft(b, t, c);
            b.star(c)
        }
    }
}

/// Appends one random member of the language of `v`, taking every star at
/// least once, stopping early once `out` reaches `limit` bytes.
pub fn sample_into(rng: &mut impl Rng, t: &ParseTree, v: NodeId, out: &mut Vec<u8>, limit: usize) {
    if out.len() >= limit {
        return;
    }
    match t.node(v) {
        Node::Char(a) => out.push(a.0 as u8),
        Node::Concat(l, r) => {
            sample_into(rng, t, l, out, limit);
            sample_into(rng, t, r, out, limit);
        }
        Node::Union(l, r) => {
            let pick = if rng.gen_bool(0.5) { l } else { r };
            sample_into(rng, t, pick, out, limit);
        }
        Node::Star(c) => {
            let reps = rng.gen_range(1..=2);
            for _ in 0..reps {
                sample_into(rng, t, c, out, limit);
            }
        }
    }
}

/// Text of exactly `n` bytes made of samples from the pattern.
pub fn bench_text(rng: &mut impl Rng, t: &ParseTree, n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(n + 64);
    while out.len() < n {
        let before = out.len();
        sample_into(rng, t, t.root(), &mut out, n);
        if out.len() == before {
            // language without non-empty words over the alphabet: pad
            out.push(b'a');
        }
    }
    out.truncate(n);
    out
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub text_len: usize,
    pub repeat: usize,
    pub backends: Vec<BackendKind>,
    pub w: usize,
    pub x: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub backend: BackendKind,
    pub m: usize,
    pub n: usize,
    pub w: usize,
    pub build_ns: u64,
    pub match_ns: u64,
    pub ns_per_char: f64,
    pub verdict: bool,
}

pub const CSV_HEADER: &str = "backend,m,n,w,build_ns,match_ns,ns_per_char";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3}",
            self.backend, self.m, self.n, self.w, self.build_ns, self.match_ns, self.ns_per_char
        )
    }
}

/// Shortest interval we trust a single timing over.
const MIN_TIMED: Duration = Duration::from_micros(200);

/// Mean time per call of `f`, batching calls until the batch is long enough
/// to measure. Returns the last result too.
fn time_per_call<T>(mut f: impl FnMut() -> T) -> (u64, T) {
    let mut iters = 1u64;
    loop {
        let start = Instant::now();
        let mut last = f();
        for _ in 1..iters {
            last = f();
        }
        let elapsed = start.elapsed();
        if elapsed >= MIN_TIMED || iters >= 1 << 20 {
            return ((elapsed.as_nanos() / iters as u128) as u64, last);
        }
        iters *= 2;
    }
}

/// Runs the benchmark; each size gets one row per backend, reported only
/// after all backends agree on the verdict.
pub fn bench(
    cfg: &BenchConfig,
    mut emit: impl FnMut(&BenchRow),
) -> Result<Vec<BenchRow>, EngineError> {
    check_width(cfg.w)?;
    if cfg.repeat == 0 {
        return Err(EngineError::Config("repeat must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let tree = bench_pattern(&mut rng, size);
        let text = bench_text(&mut rng, &tree, cfg.text_len);
        let m = 2 * tree.node_count();
        let mut group: Vec<BenchRow> = Vec::new();
        for &kind in &cfg.backends {
            let ecfg = EngineConfig {
                backend: BackendChoice::Fixed(kind),
                w: cfg.w,
                x: cfg.x,
            };
            let mut build_ns = u64::MAX;
            let mut matcher = None;
            for _ in 0..cfg.repeat {
                let (ns, built) = time_per_call(|| Matcher::new(&tree, &ecfg));
                build_ns = build_ns.min(ns);
                matcher = Some(built?);
            }
            let matcher = matcher.expect("repeat >= 1");
            let mut match_ns = u64::MAX;
            let mut verdict = false;
            for _ in 0..cfg.repeat {
                let (ns, v) = time_per_call(|| matcher.is_match(&text));
                match_ns = match_ns.min(ns);
                verdict = v;
            }
            if let Some(first) = group.first() {
                if first.verdict != verdict {
                    return Err(EngineError::Disagreement {
                        m,
                        first: first.backend,
                        first_verdict: first.verdict,
                        other: kind,
                        other_verdict: verdict,
                    });
                }
            }
            group.push(BenchRow {
                backend: kind,
                m,
                n: text.len(),
                w: cfg.w,
                build_ns,
                match_ns,
                ns_per_char: match_ns as f64 / text.len().max(1) as f64,
                verdict,
            });
        }
        group.iter().for_each(&mut emit);
        rows.extend(group);
    }
    Ok(rows)
}

/// The full CSV text for a set of rows.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    for r in rows {
        writeln!(out, "{}", r.csv()).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn auto(w: usize) -> EngineConfig {
        EngineConfig {
            w,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn selection_thresholds() {
        let c = auto(64);
        assert_eq!(select_backend(6, &c), BackendKind::Simple);
        assert_eq!(select_backend(7, &c), BackendKind::Simple);
        assert_eq!(select_backend(8, &c), BackendKind::Separator);
        assert_eq!(select_backend(40, &c), BackendKind::Separator);
        assert_eq!(select_backend(64, &c), BackendKind::Separator);
        assert_eq!(select_backend(65, &c), BackendKind::Decomposed);
        assert_eq!(select_backend(500, &c), BackendKind::Decomposed);
        assert_eq!(select_backend(500, &c), select_backend(500, &c));
        assert_eq!(select_backend(2, &auto(8)), BackendKind::Simple);
        assert_eq!(select_backend(4, &auto(8)), BackendKind::Separator);
        let fixed = EngineConfig {
            backend: BackendChoice::Fixed(BackendKind::Naive),
            ..auto(64)
        };
        assert_eq!(select_backend(6, &fixed), BackendKind::Naive);
    }

    #[test]
    fn matcher_on_union_of_stars() {
        for backend in ["auto", "naive", "separator", "decomposed"] {
            let cfg = EngineConfig {
                backend: backend.parse().unwrap(),
                w: 64,
                x: Some(8),
            };
            let m = Matcher::from_pattern(b"ac|a*b", &cfg).unwrap();
            assert!(m.is_match(b"aab"), "{backend}");
            assert!(m.is_match(b"ac"));
            assert!(m.is_match(b"b"));
            assert!(!m.is_match(b"acb"));
            assert!(!m.is_match(b""));
        }
        let simple = EngineConfig {
            backend: "simple".parse().unwrap(),
            ..auto(64)
        };
        assert!(Matcher::from_pattern(b"ac|a*b", &simple).is_err());
        assert!("bogus".parse::<BackendChoice>().is_err());
    }

    #[test]
    fn explain_counts() {
        let get = |p: &[u8], key: &str| {
            explain(p, &auto(64))
                .unwrap()
                .into_iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| v)
                .unwrap()
        };
        assert_eq!(get(b"a", "states"), "2");
        assert_eq!(get(b"a", "transitions"), "1");
        assert_eq!(get(b"a", "back_transitions"), "0");
        assert_eq!(get(b"a", "backend"), "simple");
        assert_eq!(get(b"a*", "states"), "4");
        assert_eq!(get(b"a*", "back_transitions"), "1");
        assert_eq!(get(b"ac|a*b", "states"), "16");
        assert_eq!(get(b"ac|a*b", "backend"), "separator");
        assert!(explain(b"(", &auto(64)).is_err());
    }

    #[test]
    fn random_tree_has_requested_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..60 {
            let t = random_tree(&mut rng, n, b"ab");
            assert_eq!(t.node_count(), n);
            let again = parse_bytes(&t.unparse()).unwrap();
            assert!(again.isomorphic(&t));
        }
        let p = bench_pattern(&mut rng, 500);
        assert_eq!(2 * p.node_count(), 500);
        assert!(matches!(p.node(p.root()), Node::Star(_)));
    }

    #[test]
    fn samples_belong_to_the_language() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let t = random_tree(&mut rng, 15, b"abc");
            let tnfa = Tnfa::thompson(&t);
            let mut w = Vec::new();
            sample_into(&mut rng, &t, t.root(), &mut w, usize::MAX);
            assert!(
                tnfa.naive_match(&w),
                "{:?}",
                String::from_utf8_lossy(&t.unparse())
            );
        }
        let t = parse("(ab)*").unwrap();
        let text = bench_text(&mut rng, &t, 101);
        assert_eq!(text.len(), 101);
    }

    #[test]
    fn bench_is_deterministic_and_agrees() {
        let cfg = BenchConfig {
            seed: 3,
            sizes: vec![6, 40],
            text_len: 500,
            repeat: 1,
            backends: vec![
                BackendKind::Naive,
                BackendKind::Separator,
                BackendKind::Decomposed,
            ],
            w: 64,
            x: None,
        };
        let strip = |rows: &[BenchRow]| -> Vec<(BackendKind, usize, usize, bool)> {
            rows.iter()
                .map(|r| (r.backend, r.m, r.n, r.verdict))
                .collect()
        };
        let a = bench(&cfg, |_| {}).unwrap();
        let b = bench(&cfg, |_| {}).unwrap();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.len(), 6);
        assert!(bench_csv(&a).starts_with("backend,m,n,w,build_ns,match_ns,ns_per_char\n"));
    }
}
