use std::collections::BTreeMap;

use super::{vocab, Issue, IssueCode, Literal, Location, Object, OntologyDoc, ValidationReport};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Iri(String),
    PName { prefix: String, local: String },
    A,
    PrefixAt,
    PrefixSparql,
    Str(Literal),
    Dot,
    Semicolon,
    Comma,
}

#[derive(Debug, Clone, PartialEq)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

#[derive(Debug)]
struct SyntaxError {
    message: String,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn err<T>(&self, line: usize, column: usize, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            message: message.into(),
            line,
            column,
        })
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<Spanned>, SyntaxError> {
        self.skip_trivia();
        let (line, column) = (self.line, self.column);
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let tok = match c {
            '<' => {
                self.bump();
                let mut iri = String::new();
                loop {
                    match self.bump() {
                        Some('>') => break,
                        Some(c) if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') => {
                            return self.err(line, column, format!("invalid character {c:?} in IRI"));
                        }
                        Some(c) => iri.push(c),
                        None => return self.err(line, column, "unterminated IRI"),
                    }
                }
                Tok::Iri(iri)
            }
            '"' | '\'' => Tok::Str(self.string(c, line, column)?),
            '.' => {
                self.bump();
                Tok::Dot
            }
            ';' => {
                self.bump();
                Tok::Semicolon
            }
            ',' => {
                self.bump();
                Tok::Comma
            }
            '@' => {
                self.bump();
                let word = self.word();
                match word.as_str() {
                    "prefix" => Tok::PrefixAt,
                    "base" => return self.err(line, column, "@base is not supported"),
                    _ => return self.err(line, column, format!("unexpected directive @{word}")),
                }
            }
            '[' => return self.err(line, column, "blank nodes are not supported"),
            '(' => return self.err(line, column, "collections are not supported"),
            '_' if self.lookahead_is_blank_node() => return self.err(line, column, "blank nodes are not supported"),
            '^' => return self.err(line, column, "typed literals are not supported"),
            c if c.is_ascii_digit() || c == '+' || c == '-' => {
                return self.err(line, column, "numeric literals are not supported")
            }
            c if is_name_char(c) || c == ':' => {
                let prefix = self.word();
                if self.peek() == Some(':') {
                    self.bump();
                    Tok::PName {
                        prefix,
                        local: self.local_name(),
                    }
                } else {
                    match prefix.as_str() {
                        "a" => Tok::A,
                        w if w.eq_ignore_ascii_case("prefix") => Tok::PrefixSparql,
                        w if w.eq_ignore_ascii_case("base") => return self.err(line, column, "BASE is not supported"),
                        "true" | "false" => return self.err(line, column, "boolean literals are not supported"),
                        w => return self.err(line, column, format!("unexpected bare word {w:?}")),
                    }
                }
            }
            other => return self.err(line, column, format!("unexpected character {other:?}")),
        };
        Ok(Some(Spanned { tok, line, column }))
    }

    fn lookahead_is_blank_node(&self) -> bool {
        let mut it = self.chars.clone();
        it.next();
        it.next() == Some(':')
    }

    fn word(&mut self) -> String {
        let mut w = String::new();
        while let Some(c) = self.peek() {
            // a '.' inside a prefix is allowed only when followed by a name char
            if is_name_char(c) || (c == '.' && self.dot_continues_name()) {
                w.push(c);
                self.bump();
            } else {
                break;
            }
        }
        w
    }

    fn dot_continues_name(&self) -> bool {
        let mut it = self.chars.clone();
        it.next();
        matches!(it.next(), Some(c) if is_name_char(c) || c == ':' || c == '%')
    }

    fn local_name(&mut self) -> String {
        let mut w = String::new();
        while let Some(c) = self.peek() {
            if is_name_char(c) || c == ':' || c == '%' || (c == '.' && self.dot_continues_name()) {
                w.push(c);
                self.bump();
            } else {
                break;
            }
        }
        w
    }

    fn string(&mut self, quote: char, line: usize, column: usize) -> Result<Literal, SyntaxError> {
        self.bump();
        let mut it = self.chars.clone();
        if it.next() == Some(quote) && it.next() == Some(quote) {
            return self.err(line, column, "multi-line string literals are not supported");
        }
        let mut value = String::new();
        loop {
            match self.bump() {
                Some(c) if c == quote => break,
                Some('\n') | None => return self.err(line, column, "unterminated string literal"),
                Some('\\') => {
                    let esc = match self.bump() {
                        Some('t') => '\t',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('b') => '\u{8}',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some(u @ ('u' | 'U')) => {
                            let n = if u == 'u' { 4 } else { 8 };
                            let hex: String = (0..n).filter_map(|_| self.bump()).collect();
                            match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                                Some(c) if hex.len() == n => c,
                                _ => return self.err(self.line, self.column, "invalid unicode escape"),
                            }
                        }
                        _ => return self.err(self.line, self.column, "invalid escape sequence"),
                    };
                    value.push(esc);
                }
                Some(c) => value.push(c),
            }
        }
        if self.peek() == Some('^') {
            return self.err(self.line, self.column, "typed literals are not supported");
        }
        let lang = if self.peek() == Some('@') {
            self.bump();
            let mut tag = String::new();
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == '-' {
                    tag.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            if tag.is_empty() || !tag.starts_with(|c: char| c.is_ascii_alphabetic()) {
                return self.err(self.line, self.column, "invalid language tag");
            }
            Some(tag)
        } else {
            None
        };
        Ok(Literal { value, lang })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    lookahead: Option<Spanned>,
    doc: OntologyDoc,
    /// Prefixes declared so far, in document order; standard ones are implicit.
    declared: BTreeMap<String, String>,
    errors: Vec<Issue>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<Option<&Spanned>, SyntaxError> {
        if self.lookahead.is_none() {
            self.lookahead = self.lexer.next_token()?;
        }
        Ok(self.lookahead.as_ref())
    }

    fn next(&mut self) -> Result<Option<Spanned>, SyntaxError> {
        self.peek()?;
        Ok(self.lookahead.take())
    }

    fn here(&self) -> (usize, usize) {
        (self.lexer.line, self.lexer.column)
    }

    fn expect_next(&mut self, what: &str) -> Result<Spanned, SyntaxError> {
        match self.next()? {
            Some(t) => Ok(t),
            None => {
                let (line, column) = self.here();
                Err(SyntaxError {
                    message: format!("unexpected end of input, expected {what}"),
                    line,
                    column,
                })
            }
        }
    }

    fn unexpected<T>(t: &Spanned, what: &str) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            message: format!("expected {what}, found {}", describe(&t.tok)),
            line: t.line,
            column: t.column,
        })
    }

    fn run(&mut self) -> Result<(), SyntaxError> {
        while let Some(t) = self.next()? {
            match t.tok {
                Tok::PrefixAt => {
                    self.prefix_body()?;
                    let dot = self.expect_next("'.' after @prefix")?;
                    if dot.tok != Tok::Dot {
                        return Self::unexpected(&dot, "'.' after @prefix");
                    }
                }
                Tok::PrefixSparql => self.prefix_body()?,
                _ => {
                    let subject = self.resolve_subject(t)?;
                    self.predicate_object_list(&subject)?;
                    let end = self.expect_next("'.' ending the statement")?;
                    if end.tok != Tok::Dot {
                        return Self::unexpected(&end, "'.' ending the statement");
                    }
                }
            }
        }
        Ok(())
    }

    fn prefix_body(&mut self) -> Result<(), SyntaxError> {
        let name = self.expect_next("prefix name")?;
        let Tok::PName { prefix, local } = &name.tok else {
            return Self::unexpected(&name, "prefix name ending in ':'");
        };
        if !local.is_empty() {
            return Self::unexpected(&name, "prefix name ending in ':'");
        }
        let iri = self.expect_next("namespace IRI")?;
        let Tok::Iri(ns) = iri.tok else {
            return Self::unexpected(&iri, "namespace IRI");
        };
        self.declared.insert(prefix.clone(), ns.clone());
        self.doc.prefixes.insert(prefix.clone(), ns);
        Ok(())
    }

    fn resolve_name(&mut self, prefix: &str, local: &str, line: usize, column: usize) -> String {
        let ns = self.declared.get(prefix).cloned().or_else(|| {
            vocab::DEFAULT_PREFIXES
                .iter()
                .find(|(p, _)| *p == prefix)
                .map(|(_, ns)| ns.to_string())
        });
        match ns {
            Some(ns) => format!("{ns}{local}"),
            None => {
                self.errors.push(Issue {
                    code: IssueCode::UndefinedPrefix,
                    message: format!("prefix {prefix:?} is used but never declared"),
                    location: Location::Text { line, column },
                });
                format!("{prefix}:{local}")
            }
        }
    }

    fn resolve_subject(&mut self, t: Spanned) -> Result<String, SyntaxError> {
        match t.tok {
            Tok::Iri(iri) => Ok(iri),
            Tok::PName { prefix, local } => Ok(self.resolve_name(&prefix, &local, t.line, t.column)),
            _ => Self::unexpected(&t, "subject IRI"),
        }
    }

    fn predicate_object_list(&mut self, subject: &str) -> Result<(), SyntaxError> {
        loop {
            let verb = self.expect_next("predicate")?;
            let predicate = match verb.tok {
                Tok::A => vocab::RDF_TYPE.to_string(),
                Tok::Iri(iri) => iri,
                Tok::PName { prefix, local } => self.resolve_name(&prefix, &local, verb.line, verb.column),
                _ => return Self::unexpected(&verb, "predicate"),
            };
            loop {
                let obj = self.expect_next("object")?;
                let object = match obj.tok {
                    Tok::Iri(iri) => Object::Iri(iri),
                    Tok::PName { prefix, local } => Object::Iri(self.resolve_name(&prefix, &local, obj.line, obj.column)),
                    Tok::Str(lit) => Object::Literal(lit),
                    _ => return Self::unexpected(&obj, "object"),
                };
                self.doc.add_statement(subject, &predicate, object);
                if matches!(self.peek()?, Some(Spanned { tok: Tok::Comma, .. })) {
                    self.next()?;
                } else {
                    break;
                }
            }
            if matches!(self.peek()?, Some(Spanned { tok: Tok::Semicolon, .. })) {
                // `;` may repeat and may trail before the final '.'
                while matches!(self.peek()?, Some(Spanned { tok: Tok::Semicolon, .. })) {
                    self.next()?;
                }
                if matches!(self.peek()?, Some(Spanned { tok: Tok::Dot, .. }) | None) {
                    return Ok(());
                }
            } else {
                return Ok(());
            }
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Iri(i) => format!("IRI <{i}>"),
        Tok::PName { prefix, local } => format!("name {prefix}:{local}"),
        Tok::A => "'a'".into(),
        Tok::PrefixAt => "@prefix".into(),
        Tok::PrefixSparql => "PREFIX".into(),
        Tok::Str(_) => "string literal".into(),
        Tok::Dot => "'.'".into(),
        Tok::Semicolon => "';'".into(),
        Tok::Comma => "','".into(),
    }
}

/// Parses the Turtle subset. Undefined prefixes are collected across the whole
/// document; a syntax error stops parsing and is reported with its position.
pub fn parse_turtle(text: &str) -> Result<OntologyDoc, ValidationReport> {
    let mut parser = Parser {
        lexer: Lexer::new(text),
        lookahead: None,
        doc: OntologyDoc::new(),
        declared: BTreeMap::new(),
        errors: Vec::new(),
    };
    if let Err(e) = parser.run() {
        parser.errors.push(Issue {
            code: IssueCode::ParseError,
            message: e.message,
            location: Location::Text {
                line: e.line,
                column: e.column,
            },
        });
    }
    if parser.errors.is_empty() {
        Ok(parser.doc)
    } else {
        Err(ValidationReport {
            errors: parser.errors,
            warnings: Vec::new(),
        })
    }
}
