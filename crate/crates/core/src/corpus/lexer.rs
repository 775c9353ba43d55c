// A small heuristic lexer for C-family source text. It does not parse; it only
// separates identifiers, numbers, string/char literals and operators so that
// identifiers can be counted.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Identifier,
    Number,
    StringLit,
    CharLit,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexToken {
    pub text: String,
    pub kind: TokenKind,
}

// Longest match first.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "->", "::", "<<", ">>",
];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Lexes `text` into classified tokens. Unterminated literals run to the end
/// of the input.
pub fn lex(text: &str) -> Vec<LexToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if is_ident_start(c) {
            while i < chars.len() && is_ident_continue(chars[i]) {
                i += 1;
            }
            TokenKind::Identifier
        } else if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_')
            {
                i += 1;
            }
            TokenKind::Number
        } else if c == '"' || c == '\'' {
            i += 1;
            while i < chars.len() && chars[i] != c {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(chars.len());
            if c == '"' {
                TokenKind::StringLit
            } else {
                TokenKind::CharLit
            }
        } else {
            let rest: String = chars[i..chars.len().min(i + 4)].iter().collect();
            let op_len = OPERATORS
                .iter()
                .find(|op| rest.starts_with(*op))
                .map(|op| op.chars().count())
                .unwrap_or(1);
            i += op_len;
            TokenKind::Punct
        };
        out.push(LexToken {
            text: chars[start..i].iter().collect(),
            kind,
        });
    }
    out
}

/// Replaces the contents of string literals longer than `limit` characters
/// with an empty literal. Text outside literals is untouched.
pub fn strip_long_strings(text: &str, limit: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] != '"' {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        while i < chars.len() && chars[i] != '"' {
            if chars[i] == '\\' {
                i += 1;
            }
            i += 1;
        }
        let end = i.min(chars.len());
        let body_len = end - start - 1;
        i = (i + 1).min(chars.len());
        if body_len > limit {
            out.push_str("\"\"");
        } else {
            out.extend(&chars[start..i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<String> {
        lex(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn assignment_without_spaces() {
        let toks = lex("x=1");
        assert_eq!(texts("x=1"), ["x", "=", "1"]);
        assert_eq!(toks[0].kind, TokenKind::Identifier);
        assert_eq!(toks[1].kind, TokenKind::Punct);
        assert_eq!(toks[2].kind, TokenKind::Number);
    }

    #[test]
    fn multi_char_operators() {
        assert_eq!(
            texts("i++<=n&&a!=b"),
            ["i", "++", "<=", "n", "&&", "a", "!=", "b"]
        );
        assert_eq!(texts("x>>>=2"), ["x", ">>>=", "2"]);
    }

    #[test]
    fn literals_stay_whole() {
        let toks = lex("s = \"a b\\\"c\" + 'x' + 1.5f;");
        let t: Vec<_> = toks.iter().map(|t| (t.text.as_str(), t.kind)).collect();
        assert_eq!(
            t,
            [
                ("s", TokenKind::Identifier),
                ("=", TokenKind::Punct),
                ("\"a b\\\"c\"", TokenKind::StringLit),
                ("+", TokenKind::Punct),
                ("'x'", TokenKind::CharLit),
                ("+", TokenKind::Punct),
                ("1.5f", TokenKind::Number),
                (";", TokenKind::Punct),
            ]
        );
    }

    #[test]
    fn member_access_and_calls() {
        assert_eq!(texts("a.b(c)"), ["a", ".", "b", "(", "c", ")"]);
    }

    #[test]
    fn unterminated_string() {
        assert_eq!(texts("\"abc"), ["\"abc"]);
    }

    #[test]
    fn long_strings_blanked() {
        assert_eq!(strip_long_strings("f(\"short\")", 15), "f(\"short\")");
        assert_eq!(
            strip_long_strings("f(\"exactly15chars!\")", 15),
            "f(\"exactly15chars!\")"
        );
        assert_eq!(strip_long_strings("f(\"sixteen chars!!!\")", 15), "f(\"\")");
        assert_eq!(
            strip_long_strings("a \"x\" b \"yyyyyyyyyyyyyyyyyy\" c", 15),
            "a \"x\" b \"\" c"
        );
    }
}
