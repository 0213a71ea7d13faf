//! Hand-rolled C/C++ scanner producing the token sequence whose elements
//! become graph nodes.
//!
//! Comments and preprocessor lines are skipped. Compound identifiers stay
//! whole, every bracket/separator is its own token, and string/char literals
//! are single tokens. The sequence is wrapped in `<s>` ... `</s>` markers.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::AnalysisConfig;

pub const START_MARKER: &str = "<s>";
pub const END_MARKER: &str = "</s>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("input contains no tokens")]
    EmptyInput,
    #[error("input has {count} tokens (including markers), limit is {max}")]
    OversizeInput { count: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenKind {
    Identifier,
    Keyword,
    ConditionalKeyword,
    Operator,
    AssignmentOperator,
    Punctuation,
    NumberLiteral,
    StringLiteral,
    CharLiteral,
    ApiCall,
    BoundaryMarker,
}

impl TokenKind {
    pub const ALL: [TokenKind; 11] = [
        TokenKind::Identifier,
        TokenKind::Keyword,
        TokenKind::ConditionalKeyword,
        TokenKind::Operator,
        TokenKind::AssignmentOperator,
        TokenKind::Punctuation,
        TokenKind::NumberLiteral,
        TokenKind::StringLiteral,
        TokenKind::CharLiteral,
        TokenKind::ApiCall,
        TokenKind::BoundaryMarker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TokenKind::Identifier => "Identifier",
            TokenKind::Keyword => "Keyword",
            TokenKind::ConditionalKeyword => "ConditionalKeyword",
            TokenKind::Operator => "Operator",
            TokenKind::AssignmentOperator => "AssignmentOperator",
            TokenKind::Punctuation => "Punctuation",
            TokenKind::NumberLiteral => "NumberLiteral",
            TokenKind::StringLiteral => "StringLiteral",
            TokenKind::CharLiteral => "CharLiteral",
            TokenKind::ApiCall => "ApiCall",
            TokenKind::BoundaryMarker => "BoundaryMarker",
        }
    }

    /// Value-bearing kinds: names, calls and literals.
    pub fn is_operand(self) -> bool {
        matches!(
            self,
            TokenKind::Identifier
                | TokenKind::ApiCall
                | TokenKind::NumberLiteral
                | TokenKind::StringLiteral
                | TokenKind::CharLiteral
        )
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    pub index: usize,
    pub line: usize,
    pub col: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }
}

/// Marker-wrapped token list. `truncated_from` records the original count
/// when the input was cut down to the configured limit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<Token>,
    pub truncated_from: Option<usize>,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }

    /// Token texts joined by single spaces, markers excluded.
    pub fn join(&self) -> String {
        self.tokens
            .iter()
            .filter(|t| t.kind != TokenKind::BoundaryMarker)
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Deref for TokenSequence {
    type Target = [Token];

    fn deref(&self) -> &[Token] {
        &self.tokens
    }
}

const CONDITIONAL_KEYWORDS: &[&str] = &["if", "else", "while", "for", "switch"];

const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "enum",
    "extern", "float", "goto", "inline", "int", "long", "register", "restrict", "return",
    "short", "signed", "sizeof", "static", "struct", "typedef", "union", "unsigned", "void",
    "volatile", "_Bool", "bool", "true", "false", "nullptr", "class", "namespace", "template",
    "typename", "public", "private", "protected", "virtual", "new", "delete", "this",
    "operator", "throw", "try", "catch", "using", "friend", "explicit", "mutable", "constexpr",
    "static_cast", "dynamic_cast", "reinterpret_cast", "const_cast", "noexcept", "decltype",
    "static_assert", "alignof", "alignas", "thread_local", "wchar_t", "char16_t", "char32_t",
    "override", "final",
];

const ASSIGNMENT_OPERATORS: &[&str] =
    &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];

const OPERATORS_3: &[&str] = &[">>=", "<<=", "...", "->*", "<=>"];
const OPERATORS_2: &[&str] = &[
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "::", ".*", "##",
];

const PUNCTUATION: &[&str] = &["(", ")", "{", "}", "[", "]", ";", ","];

pub fn is_assignment_operator(lexeme: &str) -> bool {
    ASSIGNMENT_OPERATORS.contains(&lexeme)
}

/// Kind of a scanned lexeme. Total: every string maps to exactly one kind.
pub fn classify_kind(lexeme: &str, lookahead: Option<&str>) -> TokenKind {
    if lexeme == START_MARKER || lexeme == END_MARKER {
        return TokenKind::BoundaryMarker;
    }
    let first = match lexeme.chars().next() {
        Some(c) => c,
        None => return TokenKind::Operator,
    };
    if first == '"' || (is_ident_start(first) && lexeme.contains('"')) {
        return TokenKind::StringLiteral;
    }
    if first == '\'' || (is_ident_start(first) && lexeme.contains('\'')) {
        return TokenKind::CharLiteral;
    }
    if first.is_ascii_digit() || (first == '.' && lexeme[1..].starts_with(|c: char| c.is_ascii_digit())) {
        return TokenKind::NumberLiteral;
    }
    if is_ident_start(first) && lexeme.chars().all(is_ident_continue) {
        if CONDITIONAL_KEYWORDS.contains(&lexeme) {
            return TokenKind::ConditionalKeyword;
        }
        if KEYWORDS.contains(&lexeme) {
            return TokenKind::Keyword;
        }
        if lookahead == Some("(") {
            return TokenKind::ApiCall;
        }
        return TokenKind::Identifier;
    }
    if is_assignment_operator(lexeme) {
        return TokenKind::AssignmentOperator;
    }
    if PUNCTUATION.contains(&lexeme) {
        return TokenKind::Punctuation;
    }
    TokenKind::Operator
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

struct RawLexeme {
    text: String,
    line: usize,
    col: usize,
}

struct Scanner {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    /// True while only whitespace has been seen on the current line.
    line_start: bool,
}

impl Scanner {
    fn new(src: &str) -> Self {
        Scanner {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            line_start: true,
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
            self.line_start = true;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    /// Skips whitespace, comments and preprocessor lines.
    fn skip_trivia(&mut self) {
        loop {
            match self.peek(0) {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek(1) == Some('/') => {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some('/') if self.peek(1) == Some('*') => {
                    self.bump();
                    self.bump();
                    while self.peek(0).is_some() && !self.starts_with("*/") {
                        self.bump();
                    }
                    self.bump();
                    self.bump();
                }
                Some('#') if self.line_start => {
                    // Directive, with backslash-newline continuations.
                    while let Some(c) = self.peek(0) {
                        if c == '\\' && self.peek(1) == Some('\n') {
                            self.bump();
                            self.bump();
                            continue;
                        }
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn quoted(&mut self, text: &mut String, quote: char) {
        // Opening quote.
        if let Some(c) = self.bump() {
            text.push(c);
        }
        while let Some(c) = self.peek(0) {
            if c == '\n' {
                break;
            }
            self.bump();
            text.push(c);
            if c == '\\' {
                if let Some(n) = self.peek(0) {
                    if n != '\n' {
                        self.bump();
                        text.push(n);
                    }
                }
                continue;
            }
            if c == quote {
                break;
            }
        }
    }

    fn next_lexeme(&mut self) -> Option<RawLexeme> {
        self.skip_trivia();
        let c = self.peek(0)?;
        let (line, col) = (self.line, self.col);
        self.line_start = false;
        let mut text = String::new();

        if is_ident_start(c) {
            while let Some(c) = self.peek(0) {
                if !is_ident_continue(c) {
                    break;
                }
                text.push(c);
                self.bump();
            }
            // Encoding prefixes glue onto a following literal.
            if matches!(text.as_str(), "L" | "u" | "U" | "u8") {
                match self.peek(0) {
                    Some('"') => self.quoted(&mut text, '"'),
                    Some('\'') => self.quoted(&mut text, '\''),
                    _ => {}
                }
            }
        } else if c.is_ascii_digit()
            || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit()))
        {
            let hex = c == '0' && matches!(self.peek(1), Some('x') | Some('X'));
            while let Some(d) = self.peek(0) {
                let exp_sign = (d == '+' || d == '-')
                    && text.chars().last().is_some_and(|p| {
                        if hex {
                            p == 'p' || p == 'P'
                        } else {
                            p == 'e' || p == 'E'
                        }
                    });
                if d.is_ascii_alphanumeric() || d == '_' || d == '.' || exp_sign {
                    text.push(d);
                    self.bump();
                } else {
                    break;
                }
            }
        } else if c == '"' || c == '\'' {
            self.quoted(&mut text, c);
        } else if let Some(op) = OPERATORS_3
            .iter()
            .chain(OPERATORS_2.iter())
            .find(|op| self.starts_with(op))
        {
            for _ in 0..op.chars().count() {
                self.bump();
            }
            text.push_str(op);
        } else {
            self.bump();
            text.push(c);
        }
        Some(RawLexeme { text, line, col })
    }
}

/// Tokenizes a function body using the limits in `cfg`.
pub fn tokenize(source: &str, cfg: &AnalysisConfig) -> Result<TokenSequence, LexError> {
    let mut scanner = Scanner::new(source);
    let mut raw = Vec::new();
    while let Some(lx) = scanner.next_lexeme() {
        raw.push(lx);
    }
    if raw.is_empty() {
        return Err(LexError::EmptyInput);
    }
    let end_pos = (scanner.line, scanner.col);

    let total = raw.len() + 2;
    let mut truncated_from = None;
    if total > cfg.max_tokens {
        if !cfg.truncate {
            return Err(LexError::OversizeInput {
                count: total,
                max: cfg.max_tokens,
            });
        }
        truncated_from = Some(total);
        raw.truncate(cfg.max_tokens.saturating_sub(2).max(1));
    }

    let mut tokens = Vec::with_capacity(raw.len() + 2);
    tokens.push(Token {
        text: START_MARKER.to_string(),
        kind: TokenKind::BoundaryMarker,
        index: 0,
        line: raw[0].line,
        col: raw[0].col,
    });
    for i in 0..raw.len() {
        let lookahead = raw.get(i + 1).map(|r| r.text.as_str());
        let kind = classify_kind(&raw[i].text, lookahead);
        tokens.push(Token {
            text: raw[i].text.clone(),
            kind,
            index: i + 1,
            line: raw[i].line,
            col: raw[i].col,
        });
    }
    tokens.push(Token {
        text: END_MARKER.to_string(),
        kind: TokenKind::BoundaryMarker,
        index: raw.len() + 1,
        line: end_pos.0,
        col: end_pos.1,
    });
    Ok(TokenSequence {
        tokens,
        truncated_from,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src, &AnalysisConfig::default())
            .unwrap()
            .iter()
            .map(|t| (t.kind, t.text.clone()))
            .collect()
    }

    fn texts(src: &str) -> Vec<String> {
        lex(src).into_iter().map(|(_, t)| t).collect()
    }

    #[test]
    fn compound_identifier_stays_whole() {
        use TokenKind::*;
        assert_eq!(
            lex("get_item("),
            vec![
                (BoundaryMarker, "<s>".into()),
                (ApiCall, "get_item".into()),
                (Punctuation, "(".into()),
                (BoundaryMarker, "</s>".into()),
            ]
        );
        // Not followed by a call paren: plain identifier.
        assert_eq!(lex("getItem;")[1], (Identifier, "getItem".into()));
    }

    #[test]
    fn simple_assignment() {
        use TokenKind::*;
        let got = lex("a = b + 1;");
        assert_eq!(
            got,
            vec![
                (BoundaryMarker, "<s>".into()),
                (Identifier, "a".into()),
                (AssignmentOperator, "=".into()),
                (Identifier, "b".into()),
                (Operator, "+".into()),
                (NumberLiteral, "1".into()),
                (Punctuation, ";".into()),
                (BoundaryMarker, "</s>".into()),
            ]
        );
    }

    #[test]
    fn empty_and_comment_only_inputs() {
        let cfg = AnalysisConfig::default();
        assert_eq!(tokenize("", &cfg), Err(LexError::EmptyInput));
        assert_eq!(tokenize("  // nothing\n/* here */\n", &cfg), Err(LexError::EmptyInput));
        assert_eq!(tokenize("#include <stdio.h>\n", &cfg), Err(LexError::EmptyInput));
    }

    #[test]
    fn classify_table() {
        assert_eq!(classify_kind("while", None), TokenKind::ConditionalKeyword);
        assert_eq!(classify_kind("while", Some("(")), TokenKind::ConditionalKeyword);
        assert_eq!(classify_kind("strcpy", Some("(")), TokenKind::ApiCall);
        assert_eq!(classify_kind("strcpy", Some(";")), TokenKind::Identifier);
        assert_eq!(classify_kind("+=", None), TokenKind::AssignmentOperator);
        assert_eq!(classify_kind("<<=", None), TokenKind::AssignmentOperator);
        assert_eq!(classify_kind("==", None), TokenKind::Operator);
        assert_eq!(classify_kind("sizeof", Some("(")), TokenKind::Keyword);
        assert_eq!(classify_kind("0x1F", None), TokenKind::NumberLiteral);
        assert_eq!(classify_kind(".5", None), TokenKind::NumberLiteral);
        assert_eq!(classify_kind("\"a\\\"b\"", None), TokenKind::StringLiteral);
        assert_eq!(classify_kind("L\"wide\"", None), TokenKind::StringLiteral);
        assert_eq!(classify_kind("'\\n'", None), TokenKind::CharLiteral);
        assert_eq!(classify_kind(";", None), TokenKind::Punctuation);
        assert_eq!(classify_kind("", None), TokenKind::Operator);
    }

    #[test]
    fn literals_are_single_tokens() {
        let t = texts(r#"printf("a \"quoted\" ; { string", 'x', '\'');"#);
        assert_eq!(
            t,
            vec![
                "<s>",
                "printf",
                "(",
                r#""a \"quoted\" ; { string""#,
                ",",
                "'x'",
                ",",
                r"'\''",
                ")",
                ";",
                "</s>"
            ]
        );
    }

    #[test]
    fn comments_and_directives_are_dropped() {
        let src = "#define N 10 \\\n  + 1\nint x; // trailing\n/* block\n comment */ x++;";
        assert_eq!(texts(src), vec!["<s>", "int", "x", ";", "x", "++", ";", "</s>"]);
    }

    #[test]
    fn positions_are_one_based() {
        let seq = tokenize("int a;\n  a = 2;", &AnalysisConfig::default()).unwrap();
        let a2 = &seq[4];
        assert_eq!(a2.text, "a");
        assert_eq!((a2.line, a2.col), (2, 3));
        assert_eq!((seq[1].line, seq[1].col), (1, 1));
    }

    #[test]
    fn numbers_with_exponents_and_hex() {
        assert_eq!(texts("x = 1e-5 + 0x1e+5;")[3..6], ["1e-5", "+", "0x1e"]);
        assert_eq!(texts("f = 3.0f;")[3], "3.0f");
    }

    #[test]
    fn longest_operator_match() {
        assert_eq!(texts("a <<= b >> c->d;")[1..8], ["a", "<<=", "b", ">>", "c", "->", "d"]);
    }

    #[test]
    fn oversize_is_rejected_or_truncated() {
        let mut cfg = AnalysisConfig {
            max_tokens: 5,
            ..AnalysisConfig::default()
        };
        let err = tokenize("a b c d", &cfg).unwrap_err();
        assert_eq!(err, LexError::OversizeInput { count: 6, max: 5 });
        cfg.truncate = true;
        let seq = tokenize("a b c d", &cfg).unwrap();
        assert_eq!(seq.len(), 5);
        assert_eq!(seq.truncated_from, Some(6));
        assert_eq!(seq.last().unwrap().kind, TokenKind::BoundaryMarker);
    }

    proptest! {
        #[test]
        fn never_panics_and_keeps_invariants(src in "[ -~\n\t]{0,200}") {
            let cfg = AnalysisConfig { max_tokens: 10_000, ..AnalysisConfig::default() };
            match tokenize(&src, &cfg) {
                Err(LexError::EmptyInput) => {}
                Err(e) => prop_assert!(false, "unexpected {e}"),
                Ok(seq) => {
                    prop_assert!(seq.len() >= 3);
                    prop_assert_eq!(seq[0].kind, TokenKind::BoundaryMarker);
                    prop_assert_eq!(seq[seq.len() - 1].kind, TokenKind::BoundaryMarker);
                    for (i, t) in seq.iter().enumerate() {
                        prop_assert_eq!(t.index, i);
                        prop_assert!(!t.text.is_empty());
                        if i != 0 && i != seq.len() - 1 {
                            prop_assert!(t.kind != TokenKind::BoundaryMarker);
                        }
                    }
                }
            }
        }

        #[test]
        fn retokenizing_joined_text_is_stable(src in "[a-z_0-9 =+;(){}<>!&|*,.-]{1,120}") {
            let cfg = AnalysisConfig { max_tokens: 10_000, ..AnalysisConfig::default() };
            if let Ok(seq) = tokenize(&src, &cfg) {
                let again = tokenize(&seq.join(), &cfg).unwrap();
                let a: Vec<_> = seq.iter().map(|t| (t.kind, t.text.clone())).collect();
                let b: Vec<_> = again.iter().map(|t| (t.kind, t.text.clone())).collect();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn token_texts_cover_input(src in "[a-z_0-9 =+;(){}\n]{1,120}") {
            let cfg = AnalysisConfig { max_tokens: 10_000, ..AnalysisConfig::default() };
            if let Ok(seq) = tokenize(&src, &cfg) {
                let squeezed: String = src.chars().filter(|c| !c.is_whitespace()).collect();
                let joined: String = seq.iter()
                    .filter(|t| t.kind != TokenKind::BoundaryMarker)
                    .map(|t| t.text.as_str())
                    .collect();
                prop_assert_eq!(squeezed, joined);
            }
        }
    }
}
