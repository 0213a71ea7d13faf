use crate::lexer::{Token, TokenKind};

/// Delimiter matching over a token sequence, computed once per graph.
pub(crate) struct Structure {
    partner: Vec<Option<usize>>,
}

impl Structure {
    pub(crate) fn new(tokens: &[Token]) -> Self {
        let mut partner = vec![None; tokens.len()];
        let mut stacks: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (i, t) in tokens.iter().enumerate() {
            if t.kind != TokenKind::Punctuation {
                continue;
            }
            let (slot, open) = match t.text.as_str() {
                "(" => (0, true),
                ")" => (0, false),
                "[" => (1, true),
                "]" => (1, false),
                "{" => (2, true),
                "}" => (2, false),
                _ => continue,
            };
            if open {
                stacks[slot].push(i);
            } else if let Some(o) = stacks[slot].pop() {
                partner[o] = Some(i);
                partner[i] = Some(o);
            }
        }
        Structure { partner }
    }

    /// Matching delimiter of the bracket at `i`.
    pub(crate) fn partner(&self, i: usize) -> Option<usize> {
        self.partner.get(i).copied().flatten()
    }

    /// `(open, close)` of the parenthesized list directly after token `i`.
    pub(crate) fn parens_after(&self, tokens: &[Token], i: usize) -> Option<(usize, usize)> {
        let open = i + 1;
        if tokens.get(open).is_some_and(|t| t.is("(")) {
            self.partner(open).map(|close| (open, close))
        } else {
            None
        }
    }

    /// Index one past the end of the expression starting at `start`: stops at
    /// `;` or `,` outside brackets, or at a closing bracket opened before
    /// `start`.
    pub(crate) fn expression_end(&self, tokens: &[Token], start: usize) -> usize {
        let mut j = start;
        while j < tokens.len() {
            let t = &tokens[j];
            if t.kind == TokenKind::BoundaryMarker {
                return j;
            }
            if t.kind == TokenKind::Punctuation {
                match t.text.as_str() {
                    ";" | "," | ")" | "]" | "}" => return j,
                    "(" | "[" | "{" => match self.partner(j) {
                        Some(close) => {
                            j = close + 1;
                            continue;
                        }
                        None => return j,
                    },
                    _ => {}
                }
            }
            j += 1;
        }
        j
    }
}

/// Parameter names from a leading function signature, if one is present.
///
/// The signature is the parenthesized list closing right before the first
/// `{` (allowing qualifiers such as `const` in between). Each top-level
/// comma-separated entry contributes its last identifier.
pub fn function_params(tokens: &[Token]) -> Vec<String> {
    let structure = Structure::new(tokens);
    params_with(tokens, &structure)
}

pub(crate) fn params_with(tokens: &[Token], structure: &Structure) -> Vec<String> {
    let Some(brace) = tokens.iter().position(|t| t.is("{")) else {
        return Vec::new();
    };
    let mut close = brace;
    while close > 0 {
        close -= 1;
        let t = &tokens[close];
        if t.is(")") {
            break;
        }
        if t.kind != TokenKind::Keyword && t.kind != TokenKind::Identifier {
            return Vec::new();
        }
    }
    if !tokens[close].is(")") {
        return Vec::new();
    }
    let Some(open) = structure.partner(close) else {
        return Vec::new();
    };
    // The list must follow the function name.
    if open == 0 || tokens[open - 1].kind != TokenKind::ApiCall {
        return Vec::new();
    }

    let mut names = Vec::new();
    let mut last_ident: Option<&str> = None;
    let mut j = open + 1;
    while j < close {
        let t = &tokens[j];
        if t.is(",") {
            names.extend(last_ident.take().map(str::to_string));
        } else if t.is("(") || t.is("[") {
            // Function-pointer declarators keep their name inside the first
            // group; array bounds never hold the name.
            if t.is("(") {
                if let Some(c) = structure.partner(j) {
                    if let Some(inner) = tokens[j + 1..c]
                        .iter()
                        .rev()
                        .find(|t| t.kind == TokenKind::Identifier)
                    {
                        last_ident = Some(&inner.text);
                    }
                }
            }
            match structure.partner(j) {
                Some(c) if c < close => {
                    j = c + 1;
                    continue;
                }
                _ => break,
            }
        } else if t.kind == TokenKind::Identifier {
            last_ident = Some(&t.text);
        }
        j += 1;
    }
    names.extend(last_ident.map(str::to_string));
    names
}
