//! The goal-program language: syntax tree, reader, printer, checks, and a
//! fitted grammar for sampling.

pub mod ast;
pub mod nodes;
pub mod parse;
pub mod pcfg;
pub mod print;
pub mod validate;
pub mod vocab;

pub use ast::*;
pub use nodes::{Category, NodeInfo, Section};
pub use parse::{parse_game, parse_games, parse_pref_def, ParseError};
pub use pcfg::{regrow, sample_game, Pcfg};
pub use print::print_game;
pub use validate::{validate, Violation};
