use super::ast::{Expr, Program, Stmt};
use super::lexer::quote;

/// Renders the canonical text of a program: one statement per line, each
/// preceded by its comment lines, with a trailing newline.
pub fn format(program: &Program) -> String {
    let mut out = String::new();
    for stmt in &program.statements {
        if let Some(comment) = &stmt.comment {
            for line in comment.split('\n') {
                if line.is_empty() {
                    out.push_str("#\n");
                } else {
                    out.push_str("# ");
                    out.push_str(line);
                    out.push('\n');
                }
            }
        }
        out.push_str(&format_stmt(stmt));
        out.push('\n');
    }
    out
}

pub fn format_stmt(stmt: &Stmt) -> String {
    let targets: Vec<String> = stmt.targets.iter().map(|t| t.to_string()).collect();
    format!("{} = {}", targets.join(", "), format_expr(&stmt.value))
}

pub fn format_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn write_expr(expr: &Expr, out: &mut String) {
    match expr {
        Expr::Var { name } => out.push_str(name),
        Expr::Num { value } => out.push_str(&value.to_decimal_string()),
        Expr::Str { value } => out.push_str(&quote(value)),
        Expr::List { items } => {
            out.push('[');
            write_items(items, out);
            out.push(']');
        }
        Expr::Tuple { items } => {
            out.push('(');
            write_items(items, out);
            if items.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        Expr::Call { op, positional, keyword } => {
            out.push_str(op);
            out.push('(');
            let mut first = true;
            for arg in positional {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                write_expr(arg, out);
            }
            for (name, arg) in keyword {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                out.push_str(name);
                out.push('=');
                write_expr(arg, out);
            }
            out.push(')');
        }
        Expr::BinOp { op, lhs, rhs } => {
            let prec = op.precedence();
            write_operand(lhs, out, |p| p < prec);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_operand(rhs, out, |p| p <= prec);
        }
    }
}

fn write_operand(expr: &Expr, out: &mut String, needs_parens: impl Fn(u8) -> bool) {
    let wrap = matches!(expr, Expr::BinOp { op, .. } if needs_parens(op.precedence()));
    if wrap {
        out.push('(');
    }
    write_expr(expr, out);
    if wrap {
        out.push(')');
    }
}

fn write_items(items: &[Expr], out: &mut String) {
    for (idx, item) in items.iter().enumerate() {
        if idx > 0 {
            out.push_str(", ");
        }
        write_expr(item, out);
    }
}
