//! Regular expression membership testing by word-parallel simulation of
//! Thompson automata.
//!
//! A pattern is parsed into a [`ParseTree`](syntax::ParseTree), turned into a
//! Thompson automaton ([`Tnfa`](tnfa::Tnfa)) and then simulated by one of
//! several interchangeable backends:
//!
//! * [`tnfa`]: the plain transition-scanning simulation, the reference
//!   semantics for everything else;
//! * [`simple`]: constant-time Move/Close for automata whose ε-reachability
//!   matrix fits one simulated word;
//! * [`separator`]: ε-closure in one pass per level of a separator tree of
//!   the automaton;
//! * [`decomposition`]: large automata split into a hierarchy of small ones,
//!   each simulated by one of the above.
//!
//! [`engine`] picks a backend from the automaton size and the simulated word
//! width and drives the matching loop.

pub mod bitstring;
pub mod decomposition;
pub mod engine;
pub mod separator;
pub mod sim;
pub mod simple;
pub mod syntax;
pub mod tnfa;
