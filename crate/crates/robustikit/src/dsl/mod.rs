//! The textual model format: tokenizer, parser, canonical printer, and an
//! Event-B-flavoured export.

pub mod eventb;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use eventb::print_eventb;
pub use parser::{load_source, parse_expr, parse_source, SourceFile};
pub use printer::{print_expr, print_machine, print_uncertainty};
