//! A small Lean 4 scanner that knows about comments, strings and identifiers.
//!
//! This is not a full Lean lexer. It only has to tell code tokens apart from
//! comments and literals so that `sorry` inside `-- sorry about this` or an
//! identifier such as `sorryless_lemma` is never mistaken for the tactic.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    /// `#exit`, `#eval`, ...
    HashCommand,
    /// `` `name ``
    NameLiteral,
    Symbol,
    LineComment,
    BlockComment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Range<usize>,
    /// 1-based.
    pub line: usize,
    /// 0-based, counted in chars.
    pub column: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.clone()]
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.kind, TokenKind::LineComment | TokenKind::BlockComment)
    }
}

fn is_id_first(c: char) -> bool {
    (c.is_alphabetic() && !matches!(c, 'λ' | 'Π' | 'Σ')) || c == '_' || is_letter_like(c)
}

fn is_letter_like(c: char) -> bool {
    // Letterlike symbols such as ℕ, ℝ.
    ('\u{2100}'..='\u{214f}').contains(&c)
}

fn is_subscript(c: char) -> bool {
    ('\u{2080}'..='\u{209c}').contains(&c) || ('\u{1d62}'..='\u{1d6a}').contains(&c)
}

fn is_id_rest(c: char) -> bool {
    is_id_first(c) || c.is_alphanumeric() || matches!(c, '\'' | '!' | '?') || is_subscript(c)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 0;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, f: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.bump();
        }
    }

    fn eat_ident(&mut self) {
        loop {
            if self.peek() == Some('«') {
                while let Some(c) = self.bump() {
                    if c == '»' {
                        break;
                    }
                }
            } else {
                self.eat_while(is_id_rest);
            }
            // Dotted names: `Nat.add_zero`.
            match (self.peek(), self.peek_nth(1)) {
                (Some('.'), Some(c)) if is_id_first(c) || c == '«' => {
                    self.bump();
                }
                _ => break,
            }
        }
    }
}

/// Splits `src` into tokens. Whitespace is dropped; comments are kept as tokens.
/// Unterminated comments and strings run to the end of the input.
pub fn tokenize(src: &str) -> Vec<Token> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        col: 0,
    };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let (start, line, column) = (cur.pos, cur.line, cur.col);
        let kind = if cur.starts_with("--") {
            cur.eat_while(|c| c != '\n');
            TokenKind::LineComment
        } else if cur.starts_with("/-") {
            cur.bump();
            cur.bump();
            let mut depth = 1;
            while depth > 0 && cur.peek().is_some() {
                if cur.starts_with("/-") {
                    cur.bump();
                    cur.bump();
                    depth += 1;
                } else if cur.starts_with("-/") {
                    cur.bump();
                    cur.bump();
                    depth -= 1;
                } else {
                    cur.bump();
                }
            }
            TokenKind::BlockComment
        } else if c == '"' {
            cur.bump();
            while let Some(c) = cur.bump() {
                match c {
                    '\\' => {
                        cur.bump();
                    }
                    '"' => break,
                    _ => {}
                }
            }
            TokenKind::Str
        } else if c == '\'' && char_literal_len(&src[cur.pos..]).is_some() {
            let n = char_literal_len(&src[cur.pos..]).unwrap();
            for _ in 0..n {
                cur.bump();
            }
            TokenKind::Char
        } else if c == '#' && cur.peek_nth(1).is_some_and(is_id_first) {
            cur.bump();
            cur.eat_ident();
            TokenKind::HashCommand
        } else if c == '`' && cur.peek_nth(1).is_some_and(|c| is_id_first(c) || c == '«') {
            cur.bump();
            cur.eat_ident();
            TokenKind::NameLiteral
        } else if is_id_first(c) || c == '«' {
            cur.eat_ident();
            TokenKind::Ident
        } else if c.is_ascii_digit() {
            cur.eat_while(|c| c.is_ascii_alphanumeric() || c == '_');
            if cur.peek() == Some('.') && cur.peek_nth(1).is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
                cur.eat_while(|c| c.is_ascii_alphanumeric());
            }
            TokenKind::Number
        } else {
            if cur.starts_with(":=") || cur.starts_with("=>") {
                cur.bump();
            }
            cur.bump();
            TokenKind::Symbol
        };
        out.push(Token {
            kind,
            span: start..cur.pos,
            line,
            column,
        });
    }
    out
}

/// Length in chars of a char literal at the start of `s` (`'a'`, `'\n'`).
fn char_literal_len(s: &str) -> Option<usize> {
    let mut it = s.chars();
    it.next()?; // opening quote
    match it.next()? {
        '\\' => {
            // Simple escapes only; enough to keep `'\''` from opening a string.
            let esc = it.next()?;
            if esc == 'x' {
                let a = it.next()?;
                let b = it.next()?;
                (a.is_ascii_hexdigit() && b.is_ascii_hexdigit() && it.next()? == '\'').then_some(6)
            } else {
                (it.next()? == '\'').then_some(4)
            }
        }
        '\'' | '\n' => None,
        _ => (it.next()? == '\'').then_some(3),
    }
}

/// Code tokens only (comments removed).
pub fn code_tokens(src: &str) -> Vec<Token> {
    tokenize(src).into_iter().filter(|t| !t.is_comment()).collect()
}

const DECL_KEYWORDS: &[&str] = &["theorem", "lemma"];

/// Name declared by the first `theorem`/`lemma` header in `src`.
pub fn theorem_name(src: &str) -> Option<String> {
    let toks = code_tokens(src);
    toks.windows(2).find_map(|w| {
        (w[0].kind == TokenKind::Ident
            && DECL_KEYWORDS.contains(&w[0].text(src))
            && w[1].kind == TokenKind::Ident)
            .then(|| w[1].text(src).to_string())
    })
}

const CONTINUATIONS: &[&str] = &["termination_by", "decreasing_by", "|", "where"];

/// Byte range of the declaration `theorem name`/`lemma name` in `file`.
///
/// Starts at the beginning of the header line when only attributes or modifiers
/// precede the keyword on that line; ends before the next token (comments
/// included) that starts in column 0, with trailing whitespace trimmed.
pub fn find_declaration(file: &str, name: &str) -> Option<Range<usize>> {
    let toks = tokenize(file);
    let idx = toks.windows(2).position(|w| {
        w[0].kind == TokenKind::Ident
            && DECL_KEYWORDS.contains(&w[0].text(file))
            && w[1].kind == TokenKind::Ident
            && w[1].text(file) == name
    })?;
    let kw = &toks[idx];
    let line_start = file[..kw.span.start].rfind('\n').map_or(0, |i| i + 1);
    let only_modifiers = toks[..idx]
        .iter()
        .rev()
        .take_while(|t| t.line == kw.line)
        .all(|t| !t.is_comment());
    let start = if only_modifiers { line_start } else { kw.span.start };
    let end = toks[idx + 1..]
        .iter()
        .find(|t| t.line > kw.line && t.column == 0 && !CONTINUATIONS.contains(&t.text(file)))
        .map_or(file.len(), |t| t.span.start);
    let end = start + file[start..end].trim_end().len();
    Some(start..end)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<(TokenKind, &str)> {
        tokenize(src).iter().map(|t| (t.kind, t.text(src))).collect()
    }

    #[test]
    fn comments_and_strings_are_single_tokens() {
        let src = "-- sorry\n/- nested /- sorry -/ still -/ \"sorry\" x";
        let kinds: Vec<_> = texts(src).into_iter().map(|(k, _)| k).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::LineComment,
                TokenKind::BlockComment,
                TokenKind::Str,
                TokenKind::Ident
            ]
        );
    }

    #[test]
    fn identifiers_follow_lean_rules() {
        assert_eq!(
            texts("apply? h' Nat.add_zero sorryless_lemma x₁ «weird name».b"),
            vec![
                (TokenKind::Ident, "apply?"),
                (TokenKind::Ident, "h'"),
                (TokenKind::Ident, "Nat.add_zero"),
                (TokenKind::Ident, "sorryless_lemma"),
                (TokenKind::Ident, "x₁"),
                (TokenKind::Ident, "«weird name».b"),
            ]
        );
    }

    #[test]
    fn symbols_numbers_and_commands() {
        assert_eq!(
            texts("#exit := => 'a' 3.5 `foo λ x"),
            vec![
                (TokenKind::HashCommand, "#exit"),
                (TokenKind::Symbol, ":="),
                (TokenKind::Symbol, "=>"),
                (TokenKind::Char, "'a'"),
                (TokenKind::Number, "3.5"),
                (TokenKind::NameLiteral, "`foo"),
                (TokenKind::Symbol, "λ"),
                (TokenKind::Ident, "x"),
            ]
        );
    }

    #[test]
    fn positions_are_line_and_char_column() {
        let src = "theorem t : ℕ := by\n  | zero => sorry";
        let t = tokenize(src).into_iter().find(|t| t.text(src) == "sorry").unwrap();
        assert_eq!((t.line, t.column), (2, 12));
        let n = tokenize(src).into_iter().find(|t| t.text(src) == ":=").unwrap();
        assert_eq!((n.line, n.column), (1, 14));
    }

    #[test]
    fn escaped_string_does_not_leak() {
        let src = r#""a \" sorry" sorry"#;
        let idents: Vec<_> = texts(src)
            .into_iter()
            .filter(|(k, _)| *k == TokenKind::Ident)
            .collect();
        assert_eq!(idents, vec![(TokenKind::Ident, "sorry")]);
    }

    #[test]
    fn declaration_span_with_attribute_and_trailing_command() {
        let file = "import Mathlib\n\n/-- doc -/\n@[simp] theorem foo (n : ℕ) :\n    n = n := by\n  rfl\n\n-- next\ntheorem bar : True := trivial\n";
        let span = find_declaration(file, "foo").unwrap();
        assert_eq!(&file[span], "@[simp] theorem foo (n : ℕ) :\n    n = n := by\n  rfl");
        let span = find_declaration(file, "bar").unwrap();
        assert_eq!(&file[span], "theorem bar : True := trivial");
        assert!(find_declaration(file, "baz").is_none());
    }

    #[test]
    fn theorem_name_skips_comments() {
        assert_eq!(theorem_name("-- theorem fake\nlemma real : True := trivial").as_deref(), Some("real"));
        assert_eq!(theorem_name("def x := 1"), None);
    }
}
