use super::ast::{Token, TokenKind};
use super::diagnostic::{codes, Diagnostic};

/// Splits source text into tokens.
///
/// Newlines inside `(...)` or `[...]` are treated as whitespace so that long
/// calls may wrap. Whitespace itself produces no token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let mut lexer = Lexer { source, chars: source.char_indices().peekable(), line: 1, col: 1, depth: 0 };
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    while let Some(&(offset, c)) = lexer.chars.peek() {
        let (line, col) = (lexer.line, lexer.col);
        match c {
            ' ' | '\t' | '\r' | '\u{feff}' => {
                lexer.bump();
            }
            '\n' => {
                lexer.bump();
                if lexer.depth == 0 {
                    tokens.push(Token { kind: TokenKind::Newline, text: "\n".into(), line, col, offset });
                }
            }
            '#' => {
                let end = lexer.take_while(|c| c != '\n');
                tokens.push(lexer.token(TokenKind::Comment, offset, end, line, col));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let end = lexer.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
                tokens.push(lexer.token(TokenKind::Identifier, offset, end, line, col));
            }
            c if c.is_ascii_digit() || (c == '.' && lexer.next_is_digit(offset)) => {
                let end = lexer.number();
                tokens.push(lexer.token(TokenKind::Number, offset, end, line, col));
            }
            '"' | '\'' => match lexer.string(c) {
                Some(end) => tokens.push(lexer.token(TokenKind::String, offset, end, line, col)),
                None => {
                    errors.push(Diagnostic::error(
                        codes::UNTERMINATED_STRING,
                        line,
                        format!("unterminated string starting at column {col}"),
                    ));
                }
            },
            '(' | '[' | ')' | ']' | ',' | '=' | '+' | '-' | '*' | '/' => {
                lexer.bump();
                match c {
                    '(' | '[' => lexer.depth += 1,
                    ')' | ']' => lexer.depth = lexer.depth.saturating_sub(1),
                    _ => {}
                }
                let end = offset + c.len_utf8();
                tokens.push(lexer.token(TokenKind::Punct, offset, end, line, col));
            }
            other => {
                lexer.bump();
                errors.push(Diagnostic::error(
                    codes::UNKNOWN_TOKEN,
                    line,
                    format!("unexpected character {other:?} at column {col}"),
                ));
            }
        }
    }
    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors)
    }
}

struct Lexer<'a> {
    source: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    col: usize,
    depth: usize,
}

impl<'a> Lexer<'a> {
    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn position(&mut self) -> usize {
        self.chars.peek().map_or(self.source.len(), |&(i, _)| i)
    }

    fn take_while(&mut self, keep: impl Fn(char) -> bool) -> usize {
        while let Some(&(_, c)) = self.chars.peek() {
            if !keep(c) {
                break;
            }
            self.bump();
        }
        self.position()
    }

    fn next_is_digit(&self, offset: usize) -> bool {
        self.source[offset + 1..].chars().next().is_some_and(|c| c.is_ascii_digit())
    }

    fn number(&mut self) -> usize {
        self.take_while(|c| c.is_ascii_digit());
        if self.chars.peek().is_some_and(|&(_, c)| c == '.') {
            self.bump();
            self.take_while(|c| c.is_ascii_digit());
        }
        if let Some(&(idx, c)) = self.chars.peek() {
            if c == 'e' || c == 'E' {
                // Only consume the exponent if digits follow.
                let rest = &self.source[idx + 1..];
                let rest = rest.strip_prefix(['+', '-']).unwrap_or(rest);
                if rest.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                    if self.chars.peek().is_some_and(|&(_, c)| c == '+' || c == '-') {
                        self.bump();
                    }
                    self.take_while(|c| c.is_ascii_digit());
                }
            }
        }
        self.position()
    }

    /// Consumes a quoted string; returns the end offset or `None` when the
    /// line ends first.
    fn string(&mut self, quote: char) -> Option<usize> {
        self.bump();
        loop {
            match self.chars.peek() {
                None => return None,
                Some(&(_, '\n')) => return None,
                Some(&(_, '\\')) => {
                    self.bump();
                    if self.chars.peek().is_some_and(|&(_, c)| c != '\n') {
                        self.bump();
                    }
                }
                Some(&(_, c)) if c == quote => {
                    self.bump();
                    return Some(self.position());
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
    }

    fn token(&self, kind: TokenKind, start: usize, end: usize, line: usize, col: usize) -> Token {
        Token { kind, text: self.source[start..end].to_string(), line, col, offset: start }
    }
}

/// Decodes the body of a string token, resolving escapes.
pub(crate) fn unquote(text: &str) -> String {
    let inner = &text[1..text.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// Renders a string literal with double quotes.
pub(crate) fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_point_into_source() {
        let source = "# c\nWAV0, _ = TSS(INPUT_WAV0,\n    text=\"a b\")  # tail\nX = -1.5e3\n";
        let tokens = tokenize(source).unwrap();
        for token in &tokens {
            assert_eq!(&source[token.offset..token.offset + token.text.len()], token.text);
            let line_start = source[..token.offset].rfind('\n').map_or(0, |i| i + 1);
            assert_eq!(token.line, source[..token.offset].matches('\n').count() + 1);
            assert_eq!(token.col, source[line_start..token.offset].chars().count() + 1);
        }
        // Newline inside the call is swallowed.
        let newlines = tokens.iter().filter(|t| t.kind == TokenKind::Newline).count();
        assert_eq!(newlines, 3);
    }

    #[test]
    fn gaps_between_tokens_are_whitespace() {
        let source = "A = MIX([(B, 0), (C, 3)])\n\n# x\nD = CAT([A] * 5)";
        let tokens = tokenize(source).unwrap();
        let mut cursor = 0;
        for token in &tokens {
            assert!(source[cursor..token.offset].chars().all(char::is_whitespace));
            cursor = token.offset + token.text.len();
        }
        assert!(source[cursor..].chars().all(char::is_whitespace));
    }

    #[test]
    fn unknown_characters_are_reported() {
        let errors = tokenize("A = B @ C\nD = {").unwrap_err();
        assert_eq!(errors.len(), 2);
        assert_eq!(errors[0].line, 1);
        assert_eq!(errors[1].line, 2);
    }

    #[test]
    fn string_escapes_round_trip() {
        let raw = "say \"hi\"\\\n\t";
        assert_eq!(unquote(&quote(raw)), raw);
        assert_eq!(unquote("'it\\'s'"), "it's");
    }

    #[test]
    fn unterminated_string() {
        let errors = tokenize("A = TTA(\"dog)\n").unwrap_err();
        assert_eq!(errors[0].code, codes::UNTERMINATED_STRING);
    }
}
