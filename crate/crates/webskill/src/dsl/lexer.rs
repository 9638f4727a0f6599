//! Tokenizer for `.skill` sources.
//!
//! Newlines are significant (they terminate statements) except inside
//! parentheses, where they are swallowed so argument lists may wrap.

use super::DslError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    /// Element selector without the leading `#`.
    Selector(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Semi,
    Newline,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Int(_) => "integer literal".into(),
            Tok::Selector(s) => format!("selector `#{s}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Spanned>, DslError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut paren_depth = 0usize;
    let mut chars = src.chars().peekable();

    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr) => {
            out.push(Spanned {
                tok: $tok,
                line: $l,
                col: $c,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                chars.next();
                if paren_depth == 0 {
                    push!(Tok::Newline, tl, tc);
                }
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '/' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'/') {
                    while let Some(&c2) = chars.peek() {
                        if c2 == '\n' {
                            break;
                        }
                        chars.next();
                        col += 1;
                    }
                } else {
                    return Err(DslError::Syntax {
                        line: tl,
                        col: tc,
                        expected: "`//` comment".into(),
                        found: "`/`".into(),
                    });
                }
            }
            '{' => {
                chars.next();
                col += 1;
                push!(Tok::LBrace, tl, tc);
            }
            '}' => {
                chars.next();
                col += 1;
                push!(Tok::RBrace, tl, tc);
            }
            '(' => {
                chars.next();
                col += 1;
                paren_depth += 1;
                push!(Tok::LParen, tl, tc);
            }
            ')' => {
                chars.next();
                col += 1;
                paren_depth = paren_depth.saturating_sub(1);
                push!(Tok::RParen, tl, tc);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, tl, tc);
            }
            ':' => {
                chars.next();
                col += 1;
                push!(Tok::Colon, tl, tc);
            }
            ';' => {
                chars.next();
                col += 1;
                push!(Tok::Semi, tl, tc);
            }
            '#' => {
                chars.next();
                col += 1;
                let mut name = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' {
                        name.push(c2);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if name.is_empty() {
                    return Err(DslError::Syntax {
                        line: tl,
                        col: tc,
                        expected: "element id after `#`".into(),
                        found: chars
                            .peek()
                            .map(|c| format!("`{c}`"))
                            .unwrap_or_else(|| "end of input".into()),
                    });
                }
                push!(Tok::Selector(name), tl, tc);
            }
            '"' => {
                chars.next();
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            col += 1;
                            match chars.next() {
                                Some('n') => {
                                    s.push('\n');
                                    col += 1;
                                }
                                Some('t') => {
                                    s.push('\t');
                                    col += 1;
                                }
                                Some('\\') => {
                                    s.push('\\');
                                    col += 1;
                                }
                                Some('"') => {
                                    s.push('"');
                                    col += 1;
                                }
                                other => {
                                    return Err(DslError::Syntax {
                                        line: tl,
                                        col: tc,
                                        expected: "escape sequence".into(),
                                        found: other
                                            .map(|c| format!("`\\{c}`"))
                                            .unwrap_or_else(|| "end of input".into()),
                                    })
                                }
                            }
                        }
                        Some('\n') | None => {
                            return Err(DslError::Syntax {
                                line: tl,
                                col: tc,
                                expected: "closing `\"`".into(),
                                found: "end of line".into(),
                            })
                        }
                        Some(c2) => {
                            s.push(c2);
                            col += 1;
                        }
                    }
                }
                push!(Tok::Str(s), tl, tc);
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut num = String::new();
                num.push(c);
                chars.next();
                col += 1;
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_digit() {
                        num.push(c2);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let v: i64 = num.parse().map_err(|_| DslError::Syntax {
                    line: tl,
                    col: tc,
                    expected: "integer".into(),
                    found: format!("`{num}`"),
                })?;
                push!(Tok::Int(v), tl, tc);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut id = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' {
                        id.push(c2);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(id), tl, tc);
            }
            other => {
                return Err(DslError::Syntax {
                    line: tl,
                    col: tc,
                    expected: "statement or declaration".into(),
                    found: format!("`{other}`"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_statement_tokens() {
        let toks = lex("click(#q); type(#q, \"mug\")\n").unwrap();
        let kinds: Vec<&Tok> = toks.iter().map(|s| &s.tok).collect();
        assert!(matches!(kinds[0], Tok::Ident(s) if s == "click"));
        assert!(matches!(kinds[2], Tok::Selector(s) if s == "q"));
        assert!(matches!(kinds[4], Tok::Semi));
    }

    #[test]
    fn newlines_inside_parens_are_swallowed() {
        let toks = lex("call buy(\n  \"x\",\n  3\n)\n").unwrap();
        let newline_count = toks
            .iter()
            .filter(|s| matches!(s.tok, Tok::Newline))
            .count();
        assert_eq!(newline_count, 1);
    }

    #[test]
    fn tracks_line_and_column() {
        let toks = lex("skill a() {\n  clik(#q);\n}\n").unwrap();
        let clik = toks
            .iter()
            .find(|s| matches!(&s.tok, Tok::Ident(i) if i == "clik"))
            .unwrap();
        assert_eq!((clik.line, clik.col), (2, 3));
    }

    #[test]
    fn unterminated_string_is_an_error() {
        assert!(lex("press(\"Enter\n").is_err());
    }
}
