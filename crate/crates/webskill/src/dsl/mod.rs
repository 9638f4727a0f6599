//! The skill DSL: grammar, parser, canonical printer, and expander.
//!
//! Skill bodies are straight-line sequences of primitive browser actions and
//! calls to other skills. There is no control flow; conditional behavior is
//! the policy's job.
//!
//! # Grammar (EBNF)
//!
//! ```text
//! file            = interface_file | impl_file ;
//! interface_file  = "interface" ident "for" ident "{" { sig_decl | skill_decl } "}" ;
//! impl_file       = "impl" ident "for" ident "{" { skill_decl } "}" ;
//! sig_decl        = "sig" signature [ string ] term ;
//! skill_decl      = [ "induced" ] "skill" signature [ string ] block ;
//! signature       = ident "(" [ param { "," param } ] ")" ;
//! param           = ident [ ":" kind ] ;                (* kind defaults to text *)
//! kind            = "text" | "integer" | "selector" ;
//! block           = "{" { statement term } "}" ;
//! statement       = prim_stmt | call_stmt | "stop" ;
//! prim_stmt       = nullary_prim [ "(" ")" ]
//!                 | unary_prim "(" expr ")"
//!                 | "type" "(" expr "," expr ")" ;
//! nullary_prim    = "noop" | "new_tab" | "tab_close" | "go_back" | "go_forward" ;
//! unary_prim      = "click" | "hover" | "press" | "scroll" | "tab_focus" | "goto" ;
//! call_stmt       = "call" ident "(" [ expr { "," expr } ] ")" ;
//! expr            = string | integer | selector | ident ;  (* ident = param reference *)
//! selector        = "#" ident ;
//! term            = ";" | newline ;                     (* optional before "}" *)
//! ```
//!
//! `//` starts a line comment. Newlines inside parentheses do not terminate
//! statements. Selectors name simulated-site element ids; there is no CSS or
//! XPath. Diagnostics are reported as `line:col: message`.

pub mod ast;
pub mod expand;
mod lexer;
pub mod parser;
pub mod printer;

pub use ast::{Expr, PrimitiveAction, PrimitiveKind, ScrollDirection, Statement, Value};
pub use expand::{bind_args, count_steps, expand, expand_sequence, Bindings};
pub use parser::{parse_skill_def, parse_skill_file, parse_statement, parse_statements, ParsedFile};
pub use printer::{print_implementation, print_interface, print_signature, print_statement};

use crate::skill_model::ModelError;
use thiserror::Error;

/// Parse-time errors, positioned in the source.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DslError {
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: unknown primitive `{name}`")]
    UnknownPrimitive {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: `{name}` takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: argument {index} of `{name}` must be a {expected}")]
    ArgKind {
        name: String,
        index: usize,
        expected: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: `{name}` is a reserved word")]
    ReservedName {
        name: String,
        line: usize,
        col: usize,
    },
}

/// Expansion-time errors.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExpandError {
    #[error("unbound parameter `{name}`")]
    UnboundParam { name: String },
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("parameter `{param}` of `{skill}` expects {expected}, got {got}")]
    KindMismatch {
        skill: String,
        param: String,
        expected: String,
        got: String,
    },
    #[error(transparent)]
    Resolve(ModelError),
    #[error("expansion exceeded maximum call depth")]
    DepthExceeded,
}
