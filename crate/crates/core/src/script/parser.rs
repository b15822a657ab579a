//! Recursive-descent parser.
//!
//! ```text
//! program   := { line }
//! line      := [ comment ] NEWLINE | stmt [ comment ] ( NEWLINE | EOF )
//! stmt      := target { "," target } "=" expr
//! target    := IDENT | "_"
//! expr      := term { ( "+" | "-" ) term }
//! term      := unary { ( "*" | "/" ) unary }
//! unary     := "-" unary | primary
//! primary   := NUMBER | STRING | IDENT | call | list | paren
//! call      := IDENT "(" [ arg { "," arg } [ "," ] ] ")"
//! arg       := IDENT "=" expr | expr
//! list      := "[" [ expr { "," expr } [ "," ] ] "]"
//! paren     := "(" ")" | "(" expr ")" | "(" expr "," [ expr { "," expr } [ "," ] ] ")"
//! ```

use super::ast::{parse_decimal, BinOpKind, Expr, Number, Program, Stmt, Target, Token, TokenKind};
use super::diagnostic::{codes, Diagnostic};
use super::lexer::{tokenize, unquote};

/// Parses source text into a [`Program`].
///
/// Any syntax error rejects the whole input; no partial program is returned.
pub fn parse(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0, errors: Vec::new() };
    let statements = parser.program();
    if !parser.errors.is_empty() {
        return Err(parser.errors);
    }
    if statements.is_empty() && !source.trim().is_empty() {
        return Err(vec![Diagnostic::error(codes::EMPTY_PROGRAM, 1, "script contains no statements")]);
    }
    Ok(Program { statements, source: source.to_string() })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    errors: Vec<Diagnostic>,
}

type ParseResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn program(&mut self) -> Vec<Stmt> {
        let mut statements = Vec::new();
        let mut pending: Vec<String> = Vec::new();
        while let Some(token) = self.peek().cloned() {
            match token.kind {
                TokenKind::Newline => {
                    self.pos += 1;
                    // A blank line detaches comments from the next statement.
                    if self.peek().is_some_and(|t| t.kind == TokenKind::Newline) {
                        pending.clear();
                    }
                }
                TokenKind::Comment => {
                    self.pos += 1;
                    pending.push(comment_text(&token.text));
                }
                _ => match self.statement() {
                    Ok(mut stmt) => {
                        if let Some(tok) = self.peek().filter(|t| t.kind == TokenKind::Comment).cloned() {
                            pending.push(comment_text(&tok.text));
                            self.pos += 1;
                        }
                        if !pending.is_empty() {
                            stmt.comment = Some(pending.join("\n"));
                        }
                        pending.clear();
                        match self.peek() {
                            None => {}
                            Some(t) if t.kind == TokenKind::Newline => {}
                            Some(t) => {
                                let err = unexpected(t, "end of line");
                                self.errors.push(err);
                                self.recover();
                            }
                        }
                        statements.push(stmt);
                    }
                    Err(err) => {
                        self.errors.push(err);
                        pending.clear();
                        self.recover();
                    }
                },
            }
        }
        statements
    }

    fn recover(&mut self) {
        while let Some(token) = self.peek() {
            if token.kind == TokenKind::Newline {
                break;
            }
            self.pos += 1;
        }
    }

    fn statement(&mut self) -> ParseResult<Stmt> {
        let line = self.peek().map_or(1, |t| t.line);
        let mut targets = vec![self.target()?];
        while self.eat_punct(",") {
            targets.push(self.target()?);
        }
        match self.peek() {
            Some(t) if t.kind == TokenKind::Punct && t.text == "=" => self.pos += 1,
            Some(t) => return Err(unexpected(t, "'='")),
            None => return Err(self.eof_error("'='")),
        }
        let value = self.expr()?;
        Ok(Stmt { targets, value, comment: None, line })
    }

    fn target(&mut self) -> ParseResult<Target> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                let target = if t.text == "_" { Target::Wildcard } else { Target::Name(t.text.clone()) };
                self.pos += 1;
                Ok(target)
            }
            Some(t) => Err(unexpected(t, "an assignment target")),
            None => Err(self.eof_error("an assignment target")),
        }
    }

    fn expr(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat_punct("+") {
                BinOpKind::Add
            } else if self.eat_punct("-") {
                BinOpKind::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::BinOp { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn term(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat_punct("*") {
                BinOpKind::Mul
            } else if self.eat_punct("/") {
                BinOpKind::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::BinOp { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> ParseResult<Expr> {
        if !self.eat_punct("-") {
            return self.primary();
        }
        if let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Number).cloned() {
            self.pos += 1;
            let value = number(&t, true)?;
            return Ok(Expr::Num { value });
        }
        let operand = self.unary()?;
        Ok(Expr::BinOp {
            op: BinOpKind::Sub,
            lhs: Box::new(Expr::Num { value: Number::from_integer(0) }),
            rhs: Box::new(operand),
        })
    }

    fn primary(&mut self) -> ParseResult<Expr> {
        let Some(token) = self.peek().cloned() else {
            return Err(self.eof_error("an expression"));
        };
        match token.kind {
            TokenKind::Number => {
                self.pos += 1;
                Ok(Expr::Num { value: number(&token, false)? })
            }
            TokenKind::String => {
                self.pos += 1;
                Ok(Expr::Str { value: unquote(&token.text) })
            }
            TokenKind::Identifier => {
                self.pos += 1;
                if self.eat_punct("(") {
                    self.call(token.text)
                } else {
                    Ok(Expr::Var { name: token.text })
                }
            }
            TokenKind::Punct if token.text == "[" => {
                self.pos += 1;
                let items = self.sequence("]")?;
                Ok(Expr::List { items })
            }
            TokenKind::Punct if token.text == "(" => {
                self.pos += 1;
                self.paren()
            }
            _ => Err(unexpected(&token, "an expression")),
        }
    }

    fn paren(&mut self) -> ParseResult<Expr> {
        self.skip_comments();
        if self.eat_punct(")") {
            return Ok(Expr::Tuple { items: Vec::new() });
        }
        let first = self.expr()?;
        self.skip_comments();
        if self.eat_punct(")") {
            return Ok(first);
        }
        self.expect_punct(",")?;
        let mut items = vec![first];
        items.extend(self.sequence(")")?);
        Ok(Expr::Tuple { items })
    }

    /// Comma-separated expressions up to `close`, trailing comma allowed.
    fn sequence(&mut self, close: &str) -> ParseResult<Vec<Expr>> {
        let mut items = Vec::new();
        loop {
            self.skip_comments();
            if self.eat_punct(close) {
                return Ok(items);
            }
            items.push(self.expr()?);
            self.skip_comments();
            if self.eat_punct(close) {
                return Ok(items);
            }
            self.expect_punct(",")?;
        }
    }

    fn call(&mut self, op: String) -> ParseResult<Expr> {
        let mut positional = Vec::new();
        let mut keyword: Vec<(String, Expr)> = Vec::new();
        loop {
            self.skip_comments();
            if self.eat_punct(")") {
                break;
            }
            let is_keyword = matches!(
                (self.tokens.get(self.pos), self.tokens.get(self.pos + 1)),
                (Some(a), Some(b)) if a.kind == TokenKind::Identifier && b.kind == TokenKind::Punct && b.text == "="
            );
            if is_keyword {
                let name_token = self.tokens[self.pos].clone();
                self.pos += 2;
                if keyword.iter().any(|(k, _)| *k == name_token.text) {
                    return Err(Diagnostic::error(
                        codes::SYNTAX,
                        name_token.line,
                        format!("keyword argument `{}` repeated in call to {op}", name_token.text),
                    ));
                }
                let value = self.expr()?;
                keyword.push((name_token.text, value));
            } else {
                let line = self.peek().map_or(0, |t| t.line);
                let value = self.expr()?;
                if !keyword.is_empty() {
                    return Err(Diagnostic::error(
                        codes::SYNTAX,
                        line,
                        format!("positional argument follows keyword argument in call to {op}"),
                    ));
                }
                positional.push(value);
            }
            self.skip_comments();
            if self.eat_punct(")") {
                break;
            }
            self.expect_punct(",")?;
        }
        Ok(Expr::Call { op, positional, keyword })
    }

    fn skip_comments(&mut self) {
        while self.peek().is_some_and(|t| t.kind == TokenKind::Comment) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_punct(&mut self, text: &str) -> bool {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Punct && t.text == text => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn expect_punct(&mut self, text: &str) -> ParseResult<()> {
        if self.eat_punct(text) {
            return Ok(());
        }
        match self.peek() {
            Some(t) => Err(unexpected(t, &format!("'{text}'"))),
            None => Err(self.eof_error(&format!("'{text}'"))),
        }
    }

    fn eof_error(&self, expected: &str) -> Diagnostic {
        let line = self.tokens.last().map_or(1, |t| t.line);
        Diagnostic::error(codes::SYNTAX, line, format!("unexpected end of input, expected {expected}"))
    }
}

fn unexpected(token: &Token, expected: &str) -> Diagnostic {
    let found = match token.kind {
        TokenKind::Newline => "end of line".to_string(),
        _ => format!("`{}`", token.text),
    };
    let message = if token.kind == TokenKind::Newline && (expected == "')'" || expected == "']'") {
        format!("unbalanced brackets: found {found}, expected {expected}")
    } else {
        format!("unexpected {found} at column {}, expected {expected}", token.col)
    };
    Diagnostic::error(codes::SYNTAX, token.line, message)
}

fn number(token: &Token, negate: bool) -> ParseResult<Number> {
    let text = if negate { format!("-{}", token.text) } else { token.text.clone() };
    parse_decimal(&text).ok_or_else(|| {
        Diagnostic::error(codes::BAD_NUMBER, token.line, format!("numeric literal `{}` out of range", token.text))
    })
}

fn comment_text(raw: &str) -> String {
    let body = raw.strip_prefix('#').unwrap_or(raw);
    body.strip_prefix(' ').unwrap_or(body).trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(source: &str) -> Expr {
        let program = parse(source).unwrap();
        assert_eq!(program.statements.len(), 1);
        program.statements.into_iter().next().unwrap().value
    }

    #[test]
    fn minimal_mix_program() {
        let expr = single("OUTPUT_WAV = MIX([(WAV0, 0)])");
        let Expr::Call { op, positional, keyword } = expr else { panic!("not a call") };
        assert_eq!(op, "MIX");
        assert!(keyword.is_empty());
        let Expr::List { items } = &positional[0] else { panic!("not a list") };
        assert_eq!(items.len(), 1);
        assert_eq!(items[0], Expr::Tuple { items: vec![Expr::var("WAV0"), Expr::int(0)] });
    }

    #[test]
    fn truncated_call_is_a_syntax_error_on_line_one() {
        let errors = parse("WAV0 = TTA(text=\"dog\", length=").unwrap_err();
        assert!(!errors.is_empty());
        assert_eq!(errors[0].line, 1);
        assert_eq!(errors[0].code, codes::SYNTAX);
    }

    #[test]
    fn missing_equals() {
        let errors = parse("A = LEN(B)\nWAV0 TTA(text=\"x\")\n").unwrap_err();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].line, 2);
        assert!(errors[0].message.contains("'='"));
    }

    #[test]
    fn unbalanced_brackets() {
        assert!(parse("A = MIX([(B, 0)]").is_err());
        assert!(parse("A = MIX([(B, 0)]))").is_err());
        assert!(parse("A = CAT([B, C)").is_err());
    }

    #[test]
    fn comments_attach_to_the_next_statement() {
        let program =
            parse("# first\n# second\nA = LEN(B)\n\n# detached\n\nC = LEN(D)  # inline\nE = LEN(F)\n").unwrap();
        let comments: Vec<_> = program.statements.iter().map(|s| s.comment.clone()).collect();
        assert_eq!(comments, vec![Some("first\nsecond".to_string()), Some("inline".to_string()), None]);
        assert_eq!(program.statements[2].line, 8);
    }

    #[test]
    fn operator_precedence_and_unary_minus() {
        let expr = single("X = 1 + 2 * -3");
        let Expr::BinOp { op: BinOpKind::Add, rhs, .. } = expr else { panic!() };
        let Expr::BinOp { op: BinOpKind::Mul, rhs: inner, .. } = *rhs else { panic!() };
        assert_eq!(*inner, Expr::int(-3));
        let expr = single("X = -(LEN(A))");
        assert!(matches!(expr, Expr::BinOp { op: BinOpKind::Sub, .. }));
    }

    #[test]
    fn tuples_and_grouping() {
        assert_eq!(single("X = (A)"), Expr::var("A"));
        assert_eq!(single("X = (A,)"), Expr::Tuple { items: vec![Expr::var("A")] });
        assert_eq!(single("X = ()"), Expr::Tuple { items: vec![] });
    }

    #[test]
    fn wrapped_calls_and_trailing_commas() {
        let expr = single("X = LOW_PASS(W,\n    min_cutoff_freq=300.0,\n    max_cutoff_freq=800.0,\n)");
        let Expr::Call { keyword, .. } = expr else { panic!() };
        assert_eq!(keyword.len(), 2);
        assert_eq!(keyword[0].1, Expr::int(300));
    }

    #[test]
    fn keyword_rules() {
        assert!(parse("X = F(a=1, 2)").is_err());
        assert!(parse("X = F(a=1, a=2)").is_err());
    }

    #[test]
    fn wildcard_targets() {
        let program = parse("_, WAV1 = TSS(INPUT_WAV0, text=\"x\")").unwrap();
        assert_eq!(program.statements[0].targets, vec![Target::Wildcard, Target::Name("WAV1".into())]);
    }

    #[test]
    fn comment_only_script_is_rejected_and_blank_is_empty() {
        assert!(parse("# nothing here\n").is_err());
        assert!(parse("  \n\n").unwrap().statements.is_empty());
    }

    #[test]
    fn multiple_errors_are_collected() {
        let errors = parse("A = \nB = F(\nC = 1").unwrap_err();
        assert!(errors.len() >= 2, "{errors:?}");
    }
}
