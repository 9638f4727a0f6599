//! Expansion of statements into primitive action sequences.
//!
//! A skill call expands recursively through the library's resolution rules;
//! the result is always a flat primitive sequence. Termination is guaranteed
//! for validated libraries (the reference graph is acyclic); a depth guard
//! turns corrupted input into an error instead of a stack overflow.

use super::ast::{Expr, PrimitiveAction, PrimitiveKind, ScrollDirection, Statement, Value};
use super::ExpandError;
use crate::skill_model::{ParamKind, SkillLibrary, SkillSignature};
use std::collections::BTreeMap;

/// Parameter bindings for one expansion.
pub type Bindings = BTreeMap<String, Value>;

const MAX_DEPTH: usize = 64;

/// Bind positional argument values against a signature, checking kinds.
pub fn bind_args(sig: &SkillSignature, values: &[Value]) -> Result<Bindings, ExpandError> {
    if values.len() != sig.params.len() {
        return Err(ExpandError::Arity {
            name: sig.name.clone(),
            expected: sig.params.len(),
            got: values.len(),
        });
    }
    let mut b = Bindings::new();
    for (param, value) in sig.params.iter().zip(values) {
        check_kind(&param.kind, value, &sig.name, &param.name)?;
        b.insert(param.name.clone(), value.clone());
    }
    Ok(b)
}

fn check_kind(
    kind: &ParamKind,
    value: &Value,
    skill: &str,
    param: &str,
) -> Result<(), ExpandError> {
    let ok = matches!(
        (kind, value),
        (ParamKind::Text, Value::Text(_))
            | (ParamKind::Integer, Value::Integer(_))
            | (ParamKind::Selector, Value::Selector(_))
    );
    if ok {
        Ok(())
    } else {
        Err(ExpandError::KindMismatch {
            skill: skill.into(),
            param: param.into(),
            expected: kind.as_str().into(),
            got: value.kind_name().into(),
        })
    }
}

fn eval(expr: &Expr, bindings: &Bindings) -> Result<Value, ExpandError> {
    match expr {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Param(name) => bindings
            .get(name)
            .cloned()
            .ok_or_else(|| ExpandError::UnboundParam { name: name.clone() }),
    }
}

fn prim_action(kind: PrimitiveKind, args: &[Value]) -> Result<PrimitiveAction, ExpandError> {
    let kind_err = |expected: &str, got: &Value| ExpandError::KindMismatch {
        skill: kind.keyword().into(),
        param: "arg".into(),
        expected: expected.into(),
        got: got.kind_name().into(),
    };
    let selector = |v: &Value| match v {
        Value::Selector(s) => Ok(s.clone()),
        other => Err(kind_err("selector", other)),
    };
    let text = |v: &Value| match v {
        Value::Text(s) => Ok(s.clone()),
        other => Err(kind_err("text", other)),
    };
    Ok(match kind {
        PrimitiveKind::Noop => PrimitiveAction::Noop,
        PrimitiveKind::NewTab => PrimitiveAction::NewTab,
        PrimitiveKind::TabClose => PrimitiveAction::TabClose,
        PrimitiveKind::GoBack => PrimitiveAction::GoBack,
        PrimitiveKind::GoForward => PrimitiveAction::GoForward,
        PrimitiveKind::Click => PrimitiveAction::Click {
            selector: selector(&args[0])?,
        },
        PrimitiveKind::Hover => PrimitiveAction::Hover {
            selector: selector(&args[0])?,
        },
        PrimitiveKind::Type => PrimitiveAction::Type {
            selector: selector(&args[0])?,
            text: text(&args[1])?,
        },
        PrimitiveKind::Press => PrimitiveAction::Press {
            keys: text(&args[0])?,
        },
        PrimitiveKind::Scroll => {
            let dir = text(&args[0])?;
            let direction = ScrollDirection::parse(&dir).ok_or(ExpandError::KindMismatch {
                skill: "scroll".into(),
                param: "direction".into(),
                expected: "\"up\" or \"down\"".into(),
                got: format!("\"{dir}\""),
            })?;
            PrimitiveAction::Scroll { direction }
        }
        PrimitiveKind::TabFocus => match &args[0] {
            Value::Integer(i) => PrimitiveAction::TabFocus { index: *i },
            other => return Err(kind_err("integer", other)),
        },
        PrimitiveKind::Goto => PrimitiveAction::Goto {
            url: text(&args[0])?,
        },
    })
}

fn expand_inner(
    lib: &SkillLibrary,
    site: &str,
    stmt: &Statement,
    bindings: &Bindings,
    depth: usize,
    out: &mut Vec<PrimitiveAction>,
) -> Result<(), ExpandError> {
    if depth > MAX_DEPTH {
        return Err(ExpandError::DepthExceeded);
    }
    match stmt {
        Statement::Stop => Ok(()),
        Statement::Prim { kind, args } => {
            if args.len() != kind.arity() {
                return Err(ExpandError::Arity {
                    name: kind.keyword().into(),
                    expected: kind.arity(),
                    got: args.len(),
                });
            }
            let mut values = Vec::with_capacity(args.len());
            for a in args {
                values.push(eval(a, bindings)?);
            }
            out.push(prim_action(*kind, &values)?);
            Ok(())
        }
        Statement::Call { target, args } => {
            let resolved = lib.resolve(site, target).map_err(ExpandError::Resolve)?;
            let mut values = Vec::with_capacity(args.len());
            for a in args {
                values.push(eval(a, bindings)?);
            }
            let inner = bind_args(&resolved.def.signature, &values)?;
            for s in &resolved.def.body {
                expand_inner(lib, site, s, &inner, depth + 1, out)?;
            }
            Ok(())
        }
    }
}

/// Expand one statement into its primitive action sequence.
pub fn expand(
    lib: &SkillLibrary,
    site: &str,
    stmt: &Statement,
    bindings: &Bindings,
) -> Result<Vec<PrimitiveAction>, ExpandError> {
    let mut out = Vec::new();
    expand_inner(lib, site, stmt, bindings, 0, &mut out)?;
    Ok(out)
}

/// Expand a statement sequence in order.
pub fn expand_sequence(
    lib: &SkillLibrary,
    site: &str,
    stmts: &[Statement],
    bindings: &Bindings,
) -> Result<Vec<PrimitiveAction>, ExpandError> {
    let mut out = Vec::new();
    for s in stmts {
        expand_inner(lib, site, s, bindings, 0, &mut out)?;
    }
    Ok(out)
}

/// Trajectory length in wall steps: one per statement, whatever it expands to.
pub fn count_steps(stmts: &[Statement]) -> usize {
    stmts.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::parse_statement;

    #[test]
    fn noop_expands_to_itself() {
        let lib = SkillLibrary::new();
        let stmt = parse_statement("noop").unwrap();
        let prims = expand(&lib, "anysite", &stmt, &Bindings::new()).unwrap();
        assert_eq!(prims, vec![PrimitiveAction::Noop]);
    }

    #[test]
    fn unbound_param_is_reported() {
        let lib = SkillLibrary::new();
        let stmt = Statement::Prim {
            kind: PrimitiveKind::Click,
            args: vec![Expr::Param("target".into())],
        };
        let err = expand(&lib, "s", &stmt, &Bindings::new()).unwrap_err();
        assert!(matches!(err, ExpandError::UnboundParam { name } if name == "target"));
    }

    #[test]
    fn corrupted_recursive_library_hits_the_depth_guard() {
        // Registration rejects cycles; a hand-assembled library bypasses
        // that, and expansion must fail cleanly instead of overflowing.
        use crate::dsl::parser::{parse_skill_def, parse_skill_file, ParsedFile};
        use crate::skill_model::SkillId;
        let iface = parse_skill_file(
            "interface abs for cat {\n  sig a()\n}",
        )
        .unwrap();
        let ParsedFile::Interface(iface) = iface else {
            unreachable!()
        };
        let mut imp = parse_skill_file("impl abs for s {}").unwrap();
        let ParsedFile::Implementation(ref mut i) = imp else {
            unreachable!()
        };
        let def = parse_skill_def("skill a() { call a(); noop }").unwrap();
        i.methods.insert("a".into(), def);
        let ParsedFile::Implementation(i) = imp else {
            unreachable!()
        };
        let lib = crate::skill_model::SkillLibrary::from_raw_parts(
            vec![iface],
            vec![i],
            vec![SkillId::concrete("abs", "a", "s")],
        );
        let stmt = parse_statement("call a()").unwrap();
        let err = expand(&lib, "s", &stmt, &Bindings::new()).unwrap_err();
        assert!(matches!(err, ExpandError::DepthExceeded));
    }

    #[test]
    fn count_steps_counts_statements_not_expansions() {
        let stmts = vec![
            parse_statement("click(#a)").unwrap(),
            parse_statement("type(#a, \"x\")").unwrap(),
            parse_statement("press(\"Enter\")").unwrap(),
        ];
        assert_eq!(count_steps(&stmts), 3);
        let call = vec![parse_statement("call search(\"mug\")").unwrap()];
        assert_eq!(count_steps(&call), 1);
        assert_eq!(count_steps(&[]), 0);
    }
}
