//! The audio-editing language: tokens, syntax tree, parser, validator and
//! canonical formatter.

mod ast;
mod diagnostic;
mod extract;
pub mod fixtures;
mod format;
mod lexer;
mod parser;
mod signature;
mod validate;

pub use ast::{BinOpKind, Expr, Number, Program, Stmt, Target, Token, TokenKind};
pub use diagnostic::{codes, render, Diagnostic, Severity};
pub use extract::{extract_code, NoCodeFound};
pub use format::{format, format_expr, format_stmt};
pub use lexer::tokenize;
pub use parser::parse;
pub use signature::{
    BoundArgs, Param, ParamDefault, ResultShape, SemanticType, Signature, SignatureTable, ROOM_DEFAULTS, SPEAKERS,
};
pub use validate::{const_number, input_name, input_names, validate, ValidatedProgram, OUTPUT_NAME};

/// Parses and validates in one step.
pub fn compile(
    source: &str,
    table: &SignatureTable,
    allowed_inputs: &std::collections::BTreeSet<String>,
) -> Result<ValidatedProgram, Vec<Diagnostic>> {
    let program = parse(source)?;
    validate(&program, table, allowed_inputs)
}
