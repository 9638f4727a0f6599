//! Recursive-descent parser for `.skill` files and single statements.

use super::ast::{Expr, PrimitiveKind, ScrollDirection, Statement, Value};
use super::lexer::{lex, Spanned, Tok};
use super::DslError;
use crate::skill_model::{
    CategoryInterface, Param, ParamKind, SiteImplementation, SkillDef, SkillOrigin, SkillSignature,
};
use indexmap::IndexMap;

/// Result of parsing one `.skill` file.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedFile {
    Interface(CategoryInterface),
    Implementation(SiteImplementation),
}

const RESERVED: &[&str] = &[
    "interface", "impl", "for", "sig", "skill", "induced", "call", "stop", "noop", "click",
    "hover", "type", "press", "scroll", "tab_focus", "new_tab", "tab_close", "go_back",
    "go_forward", "goto",
];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, DslError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let s = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        s
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek().tok, Tok::Newline | Tok::Semi) {
            self.bump();
        }
    }

    fn err_here(&self, expected: &str) -> DslError {
        let s = self.peek();
        DslError::Syntax {
            line: s.line,
            col: s.col,
            expected: expected.into(),
            found: s.tok.describe(),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize, usize), DslError> {
        match self.peek().tok.clone() {
            Tok::Ident(s) => {
                let sp = self.bump();
                Ok((s, sp.line, sp.col))
            }
            _ => Err(self.err_here(what)),
        }
    }

    fn expect_name(&mut self, what: &str) -> Result<String, DslError> {
        let (name, line, col) = self.expect_ident(what)?;
        if RESERVED.contains(&name.as_str()) {
            return Err(DslError::ReservedName { name, line, col });
        }
        Ok(name)
    }

    fn expect_tok(&mut self, tok: Tok, what: &str) -> Result<(), DslError> {
        if std::mem::discriminant(&self.peek().tok) == std::mem::discriminant(&tok) {
            self.bump();
            Ok(())
        } else {
            Err(self.err_here(what))
        }
    }

    /// `;`, newline, or a lookahead `}` / EOF all terminate a statement.
    fn expect_terminator(&mut self) -> Result<(), DslError> {
        match self.peek().tok {
            Tok::Semi | Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::RBrace | Tok::Eof => Ok(()),
            _ => Err(self.err_here("`;` or end of line")),
        }
    }

    fn parse_file(&mut self) -> Result<ParsedFile, DslError> {
        self.skip_newlines();
        match self.peek().tok.clone() {
            Tok::Ident(kw) if kw == "interface" => {
                self.bump();
                Ok(ParsedFile::Interface(self.parse_interface_body()?))
            }
            Tok::Ident(kw) if kw == "impl" => {
                self.bump();
                Ok(ParsedFile::Implementation(self.parse_impl_body()?))
            }
            _ => Err(self.err_here("`interface` or `impl`")),
        }
    }

    fn parse_interface_body(&mut self) -> Result<CategoryInterface, DslError> {
        let id = self.expect_name("interface id")?;
        self.expect_keyword("for")?;
        let category = self.expect_name("category label")?;
        self.expect_tok(Tok::LBrace, "`{`")?;
        let mut signatures = Vec::new();
        let mut defaults = Vec::new();
        loop {
            self.skip_newlines();
            match self.peek().tok.clone() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Ident(kw) if kw == "sig" => {
                    self.bump();
                    let sig = self.parse_signature()?;
                    self.expect_terminator()?;
                    signatures.push(sig);
                }
                Tok::Ident(kw) if kw == "skill" => {
                    self.bump();
                    defaults.push(self.parse_skill_rest(SkillOrigin::Default)?);
                }
                _ => return Err(self.err_here("`sig`, `skill`, or `}`")),
            }
        }
        Ok(CategoryInterface {
            id,
            category,
            abstract_signatures: signatures,
            default_methods: defaults,
        })
    }

    fn parse_impl_body(&mut self) -> Result<SiteImplementation, DslError> {
        let implements = self.expect_name("interface id")?;
        self.expect_keyword("for")?;
        let site = self.expect_name("site id")?;
        self.expect_tok(Tok::LBrace, "`{`")?;
        let mut methods: IndexMap<String, SkillDef> = IndexMap::new();
        loop {
            self.skip_newlines();
            match self.peek().tok.clone() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Ident(kw) if kw == "skill" => {
                    self.bump();
                    let def = self.parse_skill_rest(SkillOrigin::HandWritten)?;
                    methods.insert(def.signature.name.clone(), def);
                }
                Tok::Ident(kw) if kw == "induced" => {
                    self.bump();
                    self.expect_keyword("skill")?;
                    let def = self.parse_skill_rest(SkillOrigin::Induced)?;
                    methods.insert(def.signature.name.clone(), def);
                }
                _ => return Err(self.err_here("`skill`, `induced skill`, or `}`")),
            }
        }
        let id = format!("{implements}@{site}");
        Ok(SiteImplementation {
            id,
            implements,
            site,
            methods,
            created_at: 0,
        })
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), DslError> {
        match self.peek().tok.clone() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.err_here(&format!("`{kw}`"))),
        }
    }

    fn parse_signature(&mut self) -> Result<SkillSignature, DslError> {
        let name = self.expect_name("skill name")?;
        self.expect_tok(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if !matches!(self.peek().tok, Tok::RParen) {
            loop {
                let pname = self.expect_name("parameter name")?;
                let kind = if matches!(self.peek().tok, Tok::Colon) {
                    self.bump();
                    let (k, line, col) = self.expect_ident("parameter kind")?;
                    match k.as_str() {
                        "text" => ParamKind::Text,
                        "integer" => ParamKind::Integer,
                        "selector" => ParamKind::Selector,
                        other => {
                            return Err(DslError::Syntax {
                                line,
                                col,
                                expected: "`text`, `integer`, or `selector`".into(),
                                found: format!("`{other}`"),
                            })
                        }
                    }
                } else {
                    ParamKind::Text
                };
                params.push(Param { name: pname, kind });
                match self.peek().tok {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return Err(self.err_here("`,` or `)`")),
                }
            }
        }
        self.expect_tok(Tok::RParen, "`)`")?;
        let doc = match self.peek().tok.clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            _ => String::new(),
        };
        Ok(SkillSignature { name, params, doc })
    }

    fn parse_skill_rest(&mut self, origin: SkillOrigin) -> Result<SkillDef, DslError> {
        let signature = self.parse_signature()?;
        self.skip_newlines();
        self.expect_tok(Tok::LBrace, "`{`")?;
        let body = self.parse_statements_until_rbrace()?;
        Ok(SkillDef {
            signature,
            body,
            origin,
            created_at: 0,
        })
    }

    fn parse_statements_until_rbrace(&mut self) -> Result<Vec<Statement>, DslError> {
        let mut stmts = Vec::new();
        loop {
            self.skip_newlines();
            if matches!(self.peek().tok, Tok::RBrace) {
                self.bump();
                return Ok(stmts);
            }
            stmts.push(self.parse_statement_inner()?);
            self.expect_terminator()?;
        }
    }

    fn parse_statement_inner(&mut self) -> Result<Statement, DslError> {
        let sp = self.peek().clone();
        let word = match sp.tok {
            Tok::Ident(ref s) => s.clone(),
            _ => return Err(self.err_here("statement")),
        };
        self.bump();
        if word == "stop" {
            return Ok(Statement::Stop);
        }
        if word.eq_ignore_ascii_case("call") {
            let target = self.expect_name("skill name after `call`")?;
            let args = self.parse_arg_list()?;
            return Ok(Statement::Call { target, args });
        }
        match PrimitiveKind::from_keyword(&word) {
            Some(kind) => {
                let args = if matches!(self.peek().tok, Tok::LParen) {
                    self.parse_arg_list()?
                } else if kind.arity() == 0 {
                    vec![]
                } else {
                    return Err(self.err_here("`(`"));
                };
                if args.len() != kind.arity() {
                    return Err(DslError::Arity {
                        name: kind.keyword().into(),
                        expected: kind.arity(),
                        got: args.len(),
                        line: sp.line,
                        col: sp.col,
                    });
                }
                check_prim_literal_args(kind, &args, sp.line, sp.col)?;
                Ok(Statement::Prim { kind, args })
            }
            None => Err(DslError::UnknownPrimitive {
                name: word,
                line: sp.line,
                col: sp.col,
            }),
        }
    }

    fn parse_arg_list(&mut self) -> Result<Vec<Expr>, DslError> {
        self.expect_tok(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if !matches!(self.peek().tok, Tok::RParen) {
            loop {
                args.push(self.parse_expr()?);
                match self.peek().tok {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return Err(self.err_here("`,` or `)`")),
                }
            }
        }
        self.expect_tok(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn parse_expr(&mut self) -> Result<Expr, DslError> {
        match self.peek().tok.clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Lit(Value::Text(s)))
            }
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Lit(Value::Integer(v)))
            }
            Tok::Selector(s) => {
                self.bump();
                Ok(Expr::Lit(Value::Selector(s)))
            }
            Tok::Ident(name) => {
                if RESERVED.contains(&name.as_str()) {
                    let sp = self.peek();
                    return Err(DslError::ReservedName {
                        name,
                        line: sp.line,
                        col: sp.col,
                    });
                }
                self.bump();
                Ok(Expr::Param(name))
            }
            _ => Err(self.err_here("argument")),
        }
    }
}

/// Literal arguments of primitives must already have the right shape; kind
/// errors involving parameters surface later, at expansion.
fn check_prim_literal_args(
    kind: PrimitiveKind,
    args: &[Expr],
    line: usize,
    col: usize,
) -> Result<(), DslError> {
    let expect = |idx: usize, ok: bool, expected: &str| -> Result<(), DslError> {
        if ok {
            Ok(())
        } else {
            Err(DslError::ArgKind {
                name: kind.keyword().into(),
                index: idx,
                expected: expected.into(),
                line,
                col,
            })
        }
    };
    for (i, a) in args.iter().enumerate() {
        let Expr::Lit(v) = a else { continue };
        match (kind, i) {
            (PrimitiveKind::Click | PrimitiveKind::Hover, 0) => {
                expect(i, matches!(v, Value::Selector(_)), "selector")?
            }
            (PrimitiveKind::Type, 0) => expect(i, matches!(v, Value::Selector(_)), "selector")?,
            (PrimitiveKind::Type, 1) => expect(i, matches!(v, Value::Text(_)), "text")?,
            (PrimitiveKind::Press | PrimitiveKind::Goto, 0) => {
                expect(i, matches!(v, Value::Text(_)), "text")?
            }
            (PrimitiveKind::Scroll, 0) => expect(
                i,
                matches!(v, Value::Text(s) if ScrollDirection::parse(s).is_some()),
                "\"up\" or \"down\"",
            )?,
            (PrimitiveKind::TabFocus, 0) => {
                expect(i, matches!(v, Value::Integer(_)), "integer")?
            }
            _ => {}
        }
    }
    Ok(())
}

/// Parse a whole `.skill` file into an interface or a site implementation.
pub fn parse_skill_file(src: &str) -> Result<ParsedFile, DslError> {
    let mut p = Parser::new(src)?;
    let file = p.parse_file()?;
    p.skip_newlines();
    if !matches!(p.peek().tok, Tok::Eof) {
        return Err(p.err_here("end of file"));
    }
    Ok(file)
}

/// Parse a single statement, e.g. from a policy reply.
pub fn parse_statement(src: &str) -> Result<Statement, DslError> {
    let mut p = Parser::new(src)?;
    p.skip_newlines();
    let stmt = p.parse_statement_inner()?;
    p.skip_newlines();
    if !matches!(p.peek().tok, Tok::Eof) {
        return Err(p.err_here("end of input"));
    }
    Ok(stmt)
}

/// Parse a newline/semicolon separated statement sequence.
pub fn parse_statements(src: &str) -> Result<Vec<Statement>, DslError> {
    let mut p = Parser::new(src)?;
    let mut stmts = Vec::new();
    loop {
        p.skip_newlines();
        if matches!(p.peek().tok, Tok::Eof) {
            return Ok(stmts);
        }
        stmts.push(p.parse_statement_inner()?);
        p.expect_terminator()?;
    }
}

/// Parse one bare `skill name(params) { ... }` declaration.
pub fn parse_skill_def(src: &str) -> Result<SkillDef, DslError> {
    let mut p = Parser::new(src)?;
    p.skip_newlines();
    let origin = match p.peek().tok.clone() {
        Tok::Ident(kw) if kw == "induced" => {
            p.bump();
            SkillOrigin::Induced
        }
        _ => SkillOrigin::HandWritten,
    };
    p.expect_keyword("skill")?;
    let def = p.parse_skill_rest(origin)?;
    p.skip_newlines();
    if !matches!(p.peek().tok, Tok::Eof) {
        return Err(p.err_here("end of input"));
    }
    Ok(def)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_statement_search_skill() {
        let def =
            parse_skill_def("skill search(query){ click(#q); type(#q, query); press(\"Enter\") }")
                .unwrap();
        assert_eq!(def.signature.name, "search");
        assert_eq!(def.signature.params.len(), 1);
        assert_eq!(def.signature.params[0].kind, ParamKind::Text);
        assert_eq!(def.body.len(), 3);
        assert!(matches!(
            def.body[0],
            Statement::Prim {
                kind: PrimitiveKind::Click,
                ..
            }
        ));
    }

    #[test]
    fn empty_impl_block_has_zero_methods() {
        let parsed = parse_skill_file("impl shopping for shop0 {}\n").unwrap();
        match parsed {
            ParsedFile::Implementation(imp) => {
                assert_eq!(imp.site, "shop0");
                assert!(imp.methods.is_empty());
            }
            _ => panic!("expected implementation"),
        }
    }

    #[test]
    fn typo_primitive_reports_unknown_at_position() {
        let err = parse_skill_def("skill s() {\n  clik(#q);\n}").unwrap_err();
        match err {
            DslError::UnknownPrimitive { name, line, col } => {
                assert_eq!(name, "clik");
                assert_eq!((line, col), (2, 3));
            }
            other => panic!("expected UnknownPrimitive, got {other:?}"),
        }
    }

    #[test]
    fn call_statement_and_uppercase_call() {
        let s = parse_statement("CALL search(\"mug\")").unwrap();
        assert_eq!(s.call_target(), Some("search"));
        let s2 = parse_statement("call checkout()").unwrap();
        assert_eq!(s2.call_target(), Some("checkout"));
    }

    #[test]
    fn arity_is_enforced() {
        let err = parse_statement("click(#a, #b)").unwrap_err();
        assert!(matches!(err, DslError::Arity { expected: 1, got: 2, .. }));
        assert!(parse_statement("noop").is_ok());
        assert!(parse_statement("noop()").is_ok());
    }

    #[test]
    fn scroll_literal_must_be_direction() {
        assert!(parse_statement("scroll(\"down\")").is_ok());
        assert!(matches!(
            parse_statement("scroll(\"sideways\")"),
            Err(DslError::ArgKind { .. })
        ));
    }

    #[test]
    fn interface_file_with_defaults() {
        let src = r#"
interface abstract_shopping for shopping {
  sig search(query: text) "Find items by name"
  sig add_to_cart()
  sig checkout()

  skill buy_item(query: text) {
    call search(query)
    call add_to_cart()
    call checkout()
  }
}
"#;
        let parsed = parse_skill_file(src).unwrap();
        match parsed {
            ParsedFile::Interface(iface) => {
                assert_eq!(iface.category, "shopping");
                assert_eq!(iface.abstract_signatures.len(), 3);
                assert_eq!(iface.default_methods.len(), 1);
                assert_eq!(iface.default_methods[0].body.len(), 3);
                assert_eq!(iface.abstract_signatures[0].doc, "Find items by name");
            }
            _ => panic!("expected interface"),
        }
    }
}
