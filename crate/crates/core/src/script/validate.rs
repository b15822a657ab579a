//! Static checks over a parsed program.

use std::collections::{BTreeSet, HashMap};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::ast::{BinOpKind, Expr, Number, Program, Stmt, Target};
use super::diagnostic::{codes, Diagnostic};
use super::signature::{ParamDefault, ResultShape, SemanticType, Signature, SignatureTable, SPEAKERS};

pub const OUTPUT_NAME: &str = "OUTPUT_WAV";

/// A program that passed validation, with calls normalized (variadic list
/// arguments collected into a single list literal).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidatedProgram {
    pub program: Program,
    pub warnings: Vec<Diagnostic>,
    pub allowed_inputs: BTreeSet<String>,
}

impl ValidatedProgram {
    pub fn statements(&self) -> &[Stmt] {
        &self.program.statements
    }
}

/// The names `INPUT_WAV0 .. INPUT_WAV{count-1}`.
pub fn input_names(count: usize) -> BTreeSet<String> {
    (0..count).map(input_name).collect()
}

pub fn input_name(index: usize) -> String {
    format!("INPUT_WAV{index}")
}

/// Type of an expression as far as it can be inferred.
#[derive(Clone, Debug, PartialEq)]
enum Ty {
    Audio,
    Text,
    Num,
    List(Box<Ty>),
    Tuple(Vec<Ty>),
    Void,
    Unknown,
}

impl Ty {
    fn from_semantic(ty: &SemanticType) -> Ty {
        match ty {
            SemanticType::Audio => Ty::Audio,
            SemanticType::Text => Ty::Text,
            SemanticType::Num => Ty::Num,
            SemanticType::Void => Ty::Void,
            SemanticType::ListOf(inner) => Ty::List(Box::new(Ty::from_semantic(inner))),
            SemanticType::TupleOf(items) => Ty::Tuple(items.iter().map(Ty::from_semantic).collect()),
        }
    }

    fn describe(&self) -> String {
        match self {
            Ty::Audio => "Audio".into(),
            Ty::Text => "Text".into(),
            Ty::Num => "Num".into(),
            Ty::Void => "Void".into(),
            Ty::Unknown => "?".into(),
            Ty::List(inner) => format!("list[{}]", inner.describe()),
            Ty::Tuple(items) => {
                format!("tuple[{}]", items.iter().map(Ty::describe).collect::<Vec<_>>().join(", "))
            }
        }
    }

    /// Whether a value of this type can be passed where `expected` is wanted.
    fn fits(&self, expected: &SemanticType) -> bool {
        match (self, expected) {
            (Ty::Unknown, _) => true,
            (Ty::Audio, SemanticType::Audio) | (Ty::Text, SemanticType::Text) | (Ty::Num, SemanticType::Num) => true,
            (Ty::Void, SemanticType::Void) => true,
            (Ty::List(inner), SemanticType::ListOf(want)) => inner.fits(want),
            (Ty::Tuple(items), SemanticType::TupleOf(want)) => {
                items.len() == want.len() && items.iter().zip(want).all(|(a, b)| a.fits(b))
            }
            _ => false,
        }
    }

    /// Least type covering both, if compatible.
    fn join(&self, other: &Ty) -> Option<Ty> {
        match (self, other) {
            (Ty::Unknown, t) | (t, Ty::Unknown) => Some(t.clone()),
            (Ty::List(a), Ty::List(b)) => Some(Ty::List(Box::new(a.join(b)?))),
            (Ty::Tuple(a), Ty::Tuple(b)) if a.len() == b.len() => {
                Some(Ty::Tuple(a.iter().zip(b).map(|(x, y)| x.join(y)).collect::<Option<Vec<_>>>()?))
            }
            (a, b) if a == b => Some(a.clone()),
            _ => None,
        }
    }
}

/// Folds a constant numeric expression.
pub fn const_number(expr: &Expr) -> Option<Number> {
    match expr {
        Expr::Num { value } => Some(value.clone()),
        Expr::BinOp { op, lhs, rhs } => {
            let (a, b) = (const_number(lhs)?.0, const_number(rhs)?.0);
            let value = match op {
                BinOpKind::Add => a + b,
                BinOpKind::Sub => a - b,
                BinOpKind::Mul => a * b,
                BinOpKind::Div => {
                    if b.is_zero() {
                        return None;
                    }
                    a / b
                }
            };
            Some(Number(value))
        }
        _ => None,
    }
}

fn const_f64(expr: &Expr) -> Option<f64> {
    const_number(expr).map(|n| n.to_f64())
}

/// Checks `program` against `table`, permitting `allowed_inputs` as free
/// variables.
pub fn validate(
    program: &Program,
    table: &SignatureTable,
    allowed_inputs: &BTreeSet<String>,
) -> Result<ValidatedProgram, Vec<Diagnostic>> {
    let mut checker = Checker { table, allowed: allowed_inputs, env: HashMap::new(), diagnostics: Vec::new() };
    for name in allowed_inputs {
        checker.env.insert(name.clone(), Ty::Audio);
    }
    let mut normalized = program.clone();
    let mut output_lines = Vec::new();
    for stmt in &mut normalized.statements {
        normalize(&mut stmt.value, table);
        checker.statement(stmt, &mut output_lines);
    }
    let last_line = normalized.statements.last().map_or(1, |s| s.line);
    match output_lines.as_slice() {
        [] => checker.diagnostics.push(Diagnostic::error(
            codes::MISSING_OUTPUT,
            last_line,
            format!("{OUTPUT_NAME} is never assigned"),
        )),
        [line] => {
            if *line != last_line {
                checker.diagnostics.push(Diagnostic::warning(
                    codes::OUTPUT_NOT_LAST,
                    *line,
                    format!("{OUTPUT_NAME} is assigned before the final statement"),
                ));
            }
        }
        [_, rest @ ..] => {
            for line in rest {
                checker.diagnostics.push(Diagnostic::error(
                    codes::DUPLICATE_OUTPUT,
                    *line,
                    format!("{OUTPUT_NAME} is assigned more than once"),
                ));
            }
        }
    }
    let mut diagnostics = checker.diagnostics;
    diagnostics.sort_by_key(|d| d.line);
    if diagnostics.iter().any(Diagnostic::is_error) {
        return Err(diagnostics);
    }
    Ok(ValidatedProgram { program: normalized, warnings: diagnostics, allowed_inputs: allowed_inputs.clone() })
}

/// Collects variadic list arguments into one list literal.
fn normalize(expr: &mut Expr, table: &SignatureTable) {
    match expr {
        Expr::Call { op, positional, keyword } => {
            if table.get(op).is_some_and(|sig| sig.variadic_list) {
                let needs_wrap = positional.len() > 1 || matches!(positional.first(), Some(Expr::Tuple { .. }));
                if needs_wrap {
                    let items = std::mem::take(positional);
                    positional.push(Expr::List { items });
                }
            }
            positional.iter_mut().for_each(|arg| normalize(arg, table));
            keyword.iter_mut().for_each(|(_, arg)| normalize(arg, table));
        }
        Expr::List { items } | Expr::Tuple { items } => items.iter_mut().for_each(|item| normalize(item, table)),
        Expr::BinOp { lhs, rhs, .. } => {
            normalize(lhs, table);
            normalize(rhs, table);
        }
        Expr::Var { .. } | Expr::Num { .. } | Expr::Str { .. } => {}
    }
}

struct Checker<'a> {
    table: &'a SignatureTable,
    allowed: &'a BTreeSet<String>,
    env: HashMap<String, Ty>,
    diagnostics: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn error(&mut self, code: &str, line: usize, message: String) {
        self.diagnostics.push(Diagnostic::error(code, line, message));
    }

    fn warn(&mut self, code: &str, line: usize, message: String) {
        self.diagnostics.push(Diagnostic::warning(code, line, message));
    }

    fn statement(&mut self, stmt: &Stmt, output_lines: &mut Vec<usize>) {
        let line = stmt.line;
        let ty = self.expr(&stmt.value, line);
        let targets = &stmt.targets;
        let bound: Vec<Ty> = if targets.len() == 1 { vec![ty] } else { self.destructure(stmt, ty) };
        for (target, ty) in targets.iter().zip(bound) {
            let Target::Name(name) = target else { continue };
            if self.allowed.contains(name) {
                self.error(codes::INPUT_REASSIGNED, line, format!("input `{name}` cannot be reassigned"));
                continue;
            }
            if name == OUTPUT_NAME {
                output_lines.push(line);
                if !ty.fits(&SemanticType::Audio) {
                    self.error(
                        codes::TYPE_MISMATCH,
                        line,
                        format!("{OUTPUT_NAME} must be Audio, found {}", ty.describe()),
                    );
                }
            }
            self.env.insert(name.clone(), ty);
        }
    }

    fn destructure(&mut self, stmt: &Stmt, ty: Ty) -> Vec<Ty> {
        let count = stmt.targets.len();
        let line = stmt.line;
        match ty {
            Ty::Tuple(items) if items.len() == count => items,
            Ty::Tuple(items) => {
                self.error(codes::ARITY, line, format!("cannot unpack {} value(s) into {count} targets", items.len()));
                vec![Ty::Unknown; count]
            }
            Ty::List(inner) => {
                if let Some(known) = static_segment_count(&stmt.value) {
                    if known != count {
                        self.error(
                            codes::ARITY,
                            line,
                            format!("SPLIT yields {known} segment(s) here but {count} targets are given"),
                        );
                    }
                }
                vec![*inner; count]
            }
            Ty::Unknown => vec![Ty::Unknown; count],
            other => {
                self.error(
                    codes::ARITY,
                    line,
                    format!("cannot unpack a single {} into {count} targets", other.describe()),
                );
                vec![Ty::Unknown; count]
            }
        }
    }

    fn expr(&mut self, expr: &Expr, line: usize) -> Ty {
        match expr {
            Expr::Num { .. } => Ty::Num,
            Expr::Str { .. } => Ty::Text,
            Expr::Var { name } => match self.env.get(name) {
                Some(ty) => ty.clone(),
                None if name == OUTPUT_NAME => {
                    self.error(
                        codes::OUTPUT_AS_INPUT,
                        line,
                        format!("{OUTPUT_NAME} from a previous round cannot be used as an input"),
                    );
                    Ty::Unknown
                }
                None => {
                    self.error(codes::UNDEFINED_VARIABLE, line, format!("`{name}` is not defined"));
                    Ty::Unknown
                }
            },
            Expr::List { items } => {
                let mut elem = Ty::Unknown;
                for item in items {
                    let ty = self.expr(item, line);
                    match elem.join(&ty) {
                        Some(joined) => elem = joined,
                        None => {
                            self.error(
                                codes::TYPE_MISMATCH,
                                line,
                                format!("list mixes {} and {} elements", elem.describe(), ty.describe()),
                            );
                            return Ty::Unknown;
                        }
                    }
                }
                Ty::List(Box::new(elem))
            }
            Expr::Tuple { items } => Ty::Tuple(items.iter().map(|item| self.expr(item, line)).collect()),
            Expr::BinOp { op, lhs, rhs } => self.binop(*op, lhs, rhs, line),
            Expr::Call { op, positional, keyword } => self.call(op, positional, keyword, line),
        }
    }

    fn binop(&mut self, op: BinOpKind, lhs: &Expr, rhs: &Expr, line: usize) -> Ty {
        let (a, b) = (self.expr(lhs, line), self.expr(rhs, line));
        match (&a, &b) {
            (Ty::Num | Ty::Unknown, Ty::Num | Ty::Unknown) => {
                if op == BinOpKind::Div && const_number(rhs).is_some_and(|n| n.0.is_zero()) {
                    self.error(codes::INVALID_ARGUMENT, line, "division by zero".into());
                }
                if a == Ty::Unknown && b == Ty::Unknown && op == BinOpKind::Mul {
                    Ty::Unknown
                } else {
                    Ty::Num
                }
            }
            (Ty::List(_), Ty::Num | Ty::Unknown) | (Ty::Num | Ty::Unknown, Ty::List(_)) if op == BinOpKind::Mul => {
                let (list, count_expr) = if matches!(a, Ty::List(_)) { (a.clone(), rhs) } else { (b.clone(), lhs) };
                if let Some(count) = const_number(count_expr) {
                    if !count.is_integer() || count.to_f64() < 0.0 {
                        self.error(
                            codes::TYPE_MISMATCH,
                            line,
                            format!("list repetition count must be a non-negative integer, got {count}"),
                        );
                    }
                }
                list
            }
            _ => {
                self.error(
                    codes::TYPE_MISMATCH,
                    line,
                    format!("operator `{}` cannot combine {} and {}", op.symbol(), a.describe(), b.describe()),
                );
                Ty::Unknown
            }
        }
    }

    fn call(&mut self, op: &str, positional: &[Expr], keyword: &[(String, Expr)], line: usize) -> Ty {
        let arg_types: Vec<Ty> = positional.iter().map(|arg| self.expr(arg, line)).collect();
        let kw_types: Vec<Ty> = keyword.iter().map(|(_, arg)| self.expr(arg, line)).collect();
        let Some(sig) = self.table.get(op) else {
            self.error(codes::UNKNOWN_OPERATION, line, format!("unknown operation `{op}`"));
            return Ty::Unknown;
        };
        let result = Ty::from_semantic(&sig.result.semantic_type());
        let bound = match sig.bind(positional, keyword) {
            Ok(bound) => bound,
            Err(message) => {
                self.error(codes::ARITY, line, message);
                return result;
            }
        };
        // Types by parameter slot.
        let mut slot_types: Vec<Option<&Ty>> = vec![None; sig.params.len()];
        for (idx, ty) in arg_types.iter().enumerate() {
            slot_types[idx] = Some(ty);
        }
        for ((name, _), ty) in keyword.iter().zip(&kw_types) {
            if let Some((idx, _)) = sig.param(name) {
                slot_types[idx] = Some(ty);
            }
        }
        for (param, ty) in sig.params.iter().zip(&slot_types) {
            if let Some(ty) = ty {
                if !ty.fits(&param.ty) {
                    self.error(
                        codes::TYPE_MISMATCH,
                        line,
                        format!("{op} argument `{}` expects {}, found {}", param.name, param.ty, ty.describe()),
                    );
                }
            }
        }
        self.constraints(sig, &bound.slots, line);
        if let ResultShape::Segments = sig.result {
            return Ty::List(Box::new(Ty::Audio));
        }
        result
    }

    fn constraints(&mut self, sig: &Signature, slots: &[Option<&Expr>], line: usize) {
        let arg = |name: &str| sig.param(name).and_then(|(idx, _)| slots[idx]);
        let value = |name: &str| -> Option<f64> {
            match sig.param(name) {
                Some((idx, param)) => match slots[idx] {
                    Some(expr) => const_f64(expr),
                    None => match param.default {
                        ParamDefault::Num(v) => Some(v),
                        _ => None,
                    },
                },
                None => None,
            }
        };
        match sig.name.as_str() {
            "SPLIT" => {
                if let Some(Expr::List { items }) = arg("break_points") {
                    let points: Vec<Option<f64>> = items.iter().map(const_f64).collect();
                    if points.iter().flatten().any(|&t| t <= 0.0) {
                        self.warn(codes::NUMERIC_CONSTRAINT, line, "SPLIT break points must be positive".into());
                    }
                    let known: Vec<f64> = points.iter().flatten().copied().collect();
                    if points.len() == known.len() && known.windows(2).any(|w| w[1] <= w[0]) {
                        self.warn(
                            codes::NUMERIC_CONSTRAINT,
                            line,
                            "SPLIT break points must be strictly increasing".into(),
                        );
                    }
                }
            }
            "CLIP" | "INPAINT" => {
                if let (Some(onset), Some(offset)) = (value("onset"), value("offset")) {
                    if onset >= offset || onset < 0.0 {
                        self.warn(
                            codes::NUMERIC_CONSTRAINT,
                            line,
                            format!("{} needs 0 <= onset < offset, got {onset} and {offset}", sig.name),
                        );
                    }
                }
            }
            "TTS" => {
                if let Some(Expr::Str { value: speaker }) = arg("speaker") {
                    if !SPEAKERS.contains(&speaker.as_str()) {
                        self.error(
                            codes::INVALID_ARGUMENT,
                            line,
                            format!("speaker `{speaker}` is not one of {}", SPEAKERS.join(", ")),
                        );
                    }
                }
            }
            "TTA" | "TTM" if value("length").is_some_and(|len| len <= 0.0) => {
                self.warn(codes::NUMERIC_CONSTRAINT, line, format!("{} length must be positive", sig.name));
            }
            _ => {}
        }
        for param in &sig.params {
            let Some(stem) = param.name.strip_prefix("min_") else { continue };
            let max_name = format!("max_{stem}");
            if let (Some(lo), Some(hi)) = (value(&param.name), value(&max_name)) {
                if lo > hi {
                    self.warn(
                        codes::NUMERIC_CONSTRAINT,
                        line,
                        format!("{} {} = {lo} exceeds {max_name} = {hi}", sig.name, param.name),
                    );
                }
            }
            if stem == "rolloff" {
                for name in [param.name.clone(), max_name] {
                    if let Some(v) = value(&name) {
                        if v <= 0.0 || v % 6.0 != 0.0 {
                            self.warn(
                                codes::NUMERIC_CONSTRAINT,
                                line,
                                format!("{} {name} = {v} is not a positive multiple of 6", sig.name),
                            );
                        }
                    }
                }
            }
        }
    }
}

/// Number of segments a SPLIT call produces when its break points are a
/// list literal.
fn static_segment_count(expr: &Expr) -> Option<usize> {
    let Expr::Call { op, positional, keyword } = expr else { return None };
    if op != "SPLIT" {
        return None;
    }
    let points = positional.get(1).or_else(|| keyword.iter().find(|(k, _)| k == "break_points").map(|(_, v)| v));
    match points {
        Some(Expr::List { items }) => Some(items.len() + 1),
        _ => None,
    }
}
