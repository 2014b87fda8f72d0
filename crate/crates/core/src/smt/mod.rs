//! Terms, their SMT-LIB rendering and concrete evaluation.

pub mod regex;
pub mod smtlib;
pub mod term;

pub use regex::Regex;
pub use term::{Assignment, Lit, Node, Sort, Store, Term};
