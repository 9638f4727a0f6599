//! Canonical pretty-printer. `parse(print(x))` yields an AST identical to `x`.

use super::ast::{Expr, Statement, Value};
use crate::skill_model::{CategoryInterface, SiteImplementation, SkillDef, SkillSignature, SkillOrigin};
use std::fmt::Write;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out
}

pub fn print_value(v: &Value) -> String {
    match v {
        Value::Text(s) => format!("\"{}\"", escape(s)),
        Value::Integer(i) => i.to_string(),
        Value::Selector(s) => format!("#{s}"),
    }
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Lit(v) => print_value(v),
        Expr::Param(name) => name.clone(),
    }
}

pub fn print_statement(stmt: &Statement) -> String {
    match stmt {
        Statement::Stop => "stop".to_string(),
        Statement::Prim { kind, args } => {
            if args.is_empty() {
                kind.keyword().to_string()
            } else {
                let args: Vec<String> = args.iter().map(print_expr).collect();
                format!("{}({})", kind.keyword(), args.join(", "))
            }
        }
        Statement::Call { target, args } => {
            let args: Vec<String> = args.iter().map(print_expr).collect();
            format!("call {}({})", target, args.join(", "))
        }
    }
}

pub fn print_signature(sig: &SkillSignature) -> String {
    let params: Vec<String> = sig
        .params
        .iter()
        .map(|p| format!("{}: {}", p.name, p.kind.as_str()))
        .collect();
    let mut s = format!("{}({})", sig.name, params.join(", "));
    if !sig.doc.is_empty() {
        let _ = write!(s, " \"{}\"", escape(&sig.doc));
    }
    s
}

fn print_skill_def(def: &SkillDef, indent: &str, out: &mut String) {
    let modifier = match def.origin {
        SkillOrigin::Induced => "induced ",
        _ => "",
    };
    let _ = writeln!(
        out,
        "{indent}{modifier}skill {} {{",
        print_signature(&def.signature)
    );
    for stmt in &def.body {
        let _ = writeln!(out, "{indent}  {};", print_statement(stmt));
    }
    let _ = writeln!(out, "{indent}}}");
}

pub fn print_interface(iface: &CategoryInterface) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "interface {} for {} {{", iface.id, iface.category);
    for sig in &iface.abstract_signatures {
        let _ = writeln!(out, "  sig {};", print_signature(sig));
    }
    for def in &iface.default_methods {
        let _ = writeln!(out);
        print_skill_def(def, "  ", &mut out);
    }
    let _ = writeln!(out, "}}");
    out
}

pub fn print_implementation(imp: &SiteImplementation) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "impl {} for {} {{", imp.implements, imp.site);
    for (i, def) in imp.methods.values().enumerate() {
        if i > 0 {
            let _ = writeln!(out);
        }
        print_skill_def(def, "  ", &mut out);
    }
    let _ = writeln!(out, "}}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::{parse_skill_file, parse_statement, ParsedFile};

    #[test]
    fn statement_print_parse_round_trip() {
        for src in [
            "click(#q)",
            "type(#q, \"a\\\"b\")",
            "noop",
            "scroll(\"down\")",
            "tab_focus(2)",
            "call buy_item(\"mug\", #row_0)",
            "stop",
        ] {
            let ast = parse_statement(src).unwrap();
            let printed = print_statement(&ast);
            let reparsed = parse_statement(&printed).unwrap();
            assert_eq!(ast, reparsed, "round trip failed for `{src}`");
        }
    }

    #[test]
    fn file_print_parse_round_trip() {
        let src = r#"
interface abs for shopping {
  sig search(query: text)
  skill both(query: text) { call search(query); call search(query) }
}
"#;
        let ast = parse_skill_file(src).unwrap();
        let ParsedFile::Interface(iface) = &ast else {
            panic!()
        };
        let printed = print_interface(iface);
        let reparsed = parse_skill_file(&printed).unwrap();
        assert_eq!(ast, reparsed);
    }
}
