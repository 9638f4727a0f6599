//! Whole-library validation. Violations are data, not errors: the learning
//! loop uses them to reject proposals, tests use them to assert fixtures.

use super::{CategoryInterface, SiteImplementation, SkillDef, SkillId, SkillLibrary, SkillOrigin};
use crate::dsl::ast::{Expr, Statement};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Statement-count bounds for induced skill bodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBounds {
    pub min_steps: usize,
    pub max_steps: usize,
}

impl Default for SizeBounds {
    fn default() -> Self {
        SizeBounds {
            min_steps: 2,
            max_steps: 5,
        }
    }
}

impl SizeBounds {
    pub fn contains(&self, len: usize) -> bool {
        len >= self.min_steps && len <= self.max_steps
    }
}

/// Which validation rule a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    /// A creation_log entry without a definition, a skill missing from the
    /// log, or a duplicated log entry.
    Dangling,
    /// A body references a skill created later than its owner.
    Ordering,
    /// A reference cycle among default methods or in a site dispatch graph.
    Cycle,
    /// A method or call does not match the governing signature.
    Conformance,
    /// An induced body is outside the configured size bounds.
    Size,
    /// A body uses undeclared parameters or contains `stop`.
    Body,
    /// created_at values are inconsistent with the creation log order.
    CreatedAt,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleId::Dangling => "dangling",
            RuleId::Ordering => "ordering",
            RuleId::Cycle => "cycle",
            RuleId::Conformance => "conformance",
            RuleId::Size => "size",
            RuleId::Body => "body",
            RuleId::CreatedAt => "created_at",
        };
        f.write_str(s)
    }
}

/// One violated invariant, attributed to a skill where possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub skill: Option<SkillId>,
    pub rule: RuleId,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.skill {
            Some(id) => write!(f, "[{}] {}: {}", self.rule, id, self.detail),
            None => write!(f, "[{}] {}", self.rule, self.detail),
        }
    }
}

fn violation(skill: Option<SkillId>, rule: RuleId, detail: impl Into<String>) -> Violation {
    Violation {
        skill,
        rule,
        detail: detail.into(),
    }
}

/// Check every structural invariant of the library. Empty output means the
/// library is well formed under the given size bounds.
pub fn validate_library(lib: &SkillLibrary, bounds: &SizeBounds) -> Vec<Violation> {
    let mut out = Vec::new();

    // Log integrity: unique entries, all resolvable, all skills logged.
    let mut positions: BTreeMap<SkillId, usize> = BTreeMap::new();
    for (idx, id) in lib.creation_log.iter().enumerate() {
        if positions.insert(id.clone(), idx).is_some() {
            out.push(violation(
                Some(id.clone()),
                RuleId::Dangling,
                "appears more than once in the creation log",
            ));
        }
        if lib.lookup(id).is_none() {
            out.push(violation(
                Some(id.clone()),
                RuleId::Dangling,
                "creation log entry has no definition",
            ));
        }
    }
    for (id, _) in all_skills(lib) {
        if !positions.contains_key(&id) {
            out.push(violation(
                Some(id),
                RuleId::Dangling,
                "skill is missing from the creation log",
            ));
        }
    }

    // created_at must be non-decreasing along the log.
    let mut last = 0u64;
    for id in &lib.creation_log {
        if let Some(def) = lib.lookup(id) {
            if def.created_at < last {
                out.push(violation(
                    Some(id.clone()),
                    RuleId::CreatedAt,
                    format!(
                        "created_at {} decreases below an earlier entry ({last})",
                        def.created_at
                    ),
                ));
            }
            last = last.max(def.created_at);
        }
    }

    for iface in lib.interfaces.values() {
        validate_interface(lib, iface, bounds, &positions, &mut out);
    }
    for imp in lib.implementations.values() {
        validate_implementation(lib, imp, bounds, &positions, &mut out);
    }
    out
}

fn all_skills(lib: &SkillLibrary) -> Vec<(SkillId, &SkillDef)> {
    let mut out = Vec::new();
    for iface in lib.interfaces.values() {
        for def in &iface.default_methods {
            out.push((
                SkillId::default_method(&iface.id, &def.signature.name),
                def,
            ));
        }
    }
    for imp in lib.implementations.values() {
        for def in imp.methods.values() {
            out.push((
                SkillId::concrete(&imp.implements, &def.signature.name, &imp.site),
                def,
            ));
        }
    }
    out
}

fn check_size(id: &SkillId, def: &SkillDef, bounds: &SizeBounds, out: &mut Vec<Violation>) {
    if def.origin == SkillOrigin::Induced && !bounds.contains(def.body.len()) {
        out.push(violation(
            Some(id.clone()),
            RuleId::Size,
            format!(
                "induced body has {} statement(s), bounds are {}..={}",
                def.body.len(),
                bounds.min_steps,
                bounds.max_steps
            ),
        ));
    }
}

fn check_body(id: &SkillId, def: &SkillDef, out: &mut Vec<Violation>) {
    let declared: BTreeSet<&str> = def
        .signature
        .params
        .iter()
        .map(|p| p.name.as_str())
        .collect();
    for stmt in &def.body {
        match stmt {
            Statement::Stop => out.push(violation(
                Some(id.clone()),
                RuleId::Body,
                "`stop` is not allowed inside a skill body",
            )),
            Statement::Prim { args, .. } | Statement::Call { args, .. } => {
                for a in args {
                    if let Expr::Param(name) = a {
                        if !declared.contains(name.as_str()) {
                            out.push(violation(
                                Some(id.clone()),
                                RuleId::Body,
                                format!("undeclared parameter `{name}`"),
                            ));
                        }
                    }
                }
            }
        }
    }
}

fn check_ordering(
    id: &SkillId,
    targets: &[(String, SkillId)],
    positions: &BTreeMap<SkillId, usize>,
    out: &mut Vec<Violation>,
) {
    let Some(&own) = positions.get(id) else {
        return;
    };
    for (target_name, target_id) in targets {
        if let Some(&pos) = positions.get(target_id) {
            if pos >= own {
                out.push(violation(
                    Some(id.clone()),
                    RuleId::Ordering,
                    format!("calls `{target_name}` which was created later"),
                ));
            }
        }
    }
}

fn validate_interface(
    lib: &SkillLibrary,
    iface: &CategoryInterface,
    bounds: &SizeBounds,
    positions: &BTreeMap<SkillId, usize>,
    out: &mut Vec<Violation>,
) {
    let mut names = BTreeSet::new();
    for sig in &iface.abstract_signatures {
        if !names.insert(&sig.name) {
            out.push(violation(
                None,
                RuleId::Conformance,
                format!("duplicate name `{}` in interface `{}`", sig.name, iface.id),
            ));
        }
    }
    for def in &iface.default_methods {
        let id = SkillId::default_method(&iface.id, &def.signature.name);
        if !names.insert(&def.signature.name) {
            out.push(violation(
                Some(id.clone()),
                RuleId::Conformance,
                "name collides with another interface member",
            ));
        }
        check_size(&id, def, bounds, out);
        check_body(&id, def, out);
        let mut static_targets = Vec::new();
        for stmt in &def.body {
            match stmt {
                Statement::Call { target, .. } => {
                    if iface.default_method(target).is_some() {
                        static_targets
                            .push((target.clone(), SkillId::default_method(&iface.id, target)));
                    } else if iface.signature(target).is_none() {
                        out.push(violation(
                            Some(id.clone()),
                            RuleId::Conformance,
                            format!("call target `{target}` is not an interface member"),
                        ));
                    }
                }
                Statement::Prim { .. } => out.push(violation(
                    Some(id.clone()),
                    RuleId::Conformance,
                    "default methods must be compositional (calls only)",
                )),
                Statement::Stop => {}
            }
        }
        check_ordering(&id, &static_targets, positions, out);
    }
    if detect_cycle(
        iface.default_methods.iter().map(|d| &d.signature.name),
        |name| {
            iface
                .default_method(name)
                .map(|d| d.call_targets().into_iter().map(String::from).collect())
                .unwrap_or_default()
        },
    ) {
        out.push(violation(
            None,
            RuleId::Cycle,
            format!("default methods of `{}` form a cycle", iface.id),
        ));
    }
    let _ = lib;
}

fn validate_implementation(
    lib: &SkillLibrary,
    imp: &SiteImplementation,
    bounds: &SizeBounds,
    positions: &BTreeMap<SkillId, usize>,
    out: &mut Vec<Violation>,
) {
    let Some(iface) = lib.interface_by_id(&imp.implements) else {
        out.push(violation(
            None,
            RuleId::Dangling,
            format!(
                "implementation `{}` references unknown interface `{}`",
                imp.id, imp.implements
            ),
        ));
        return;
    };
    for (name, def) in &imp.methods {
        let id = SkillId::concrete(&imp.implements, name, &imp.site);
        match iface.signature(name) {
            None => out.push(violation(
                Some(id.clone()),
                RuleId::Conformance,
                format!("`{name}` is not an abstract signature of `{}`", iface.id),
            )),
            Some(sig) => {
                if def.signature.arity() != sig.arity() {
                    out.push(violation(
                        Some(id.clone()),
                        RuleId::Conformance,
                        format!(
                            "arity {} does not match the signature's {}",
                            def.signature.arity(),
                            sig.arity()
                        ),
                    ));
                } else {
                    for (got, want) in def.signature.params.iter().zip(&sig.params) {
                        if got.kind != want.kind {
                            out.push(violation(
                                Some(id.clone()),
                                RuleId::Conformance,
                                format!(
                                    "parameter `{}` has kind {}, signature declares {}",
                                    got.name,
                                    got.kind.as_str(),
                                    want.kind.as_str()
                                ),
                            ));
                        }
                    }
                }
            }
        }
        check_size(&id, def, bounds, out);
        check_body(&id, def, out);
        let mut static_targets = Vec::new();
        for stmt in &def.body {
            if let Statement::Call { target, .. } = stmt {
                if imp.methods.contains_key(target) {
                    static_targets.push((
                        target.clone(),
                        SkillId::concrete(&imp.implements, target, &imp.site),
                    ));
                } else if iface.default_method(target).is_some() {
                    static_targets
                        .push((target.clone(), SkillId::default_method(&imp.implements, target)));
                } else if iface.signature(target).is_none() {
                    out.push(violation(
                        Some(id.clone()),
                        RuleId::Conformance,
                        format!("call target `{target}` does not resolve"),
                    ));
                }
            }
        }
        check_ordering(&id, &static_targets, positions, out);
    }
    // Site-local dispatch graph: default bodies bind abstract calls here.
    let names: Vec<&String> = imp.methods.keys().collect();
    if detect_cycle(names.into_iter(), |name| {
        imp.methods
            .get(name)
            .or_else(|| iface.default_method(name))
            .map(|d| d.call_targets().into_iter().map(String::from).collect())
            .unwrap_or_default()
    }) {
        out.push(violation(
            None,
            RuleId::Cycle,
            format!("dispatch cycle on site `{}`", imp.site),
        ));
    }
}

/// Generic DFS cycle detection over string-named nodes.
fn detect_cycle<'a>(
    roots: impl Iterator<Item = &'a String>,
    successors: impl Fn(&str) -> Vec<String>,
) -> bool {
    fn visit(
        name: &str,
        successors: &impl Fn(&str) -> Vec<String>,
        visiting: &mut Vec<String>,
        done: &mut BTreeSet<String>,
    ) -> bool {
        if done.contains(name) {
            return false;
        }
        if visiting.iter().any(|n| n == name) {
            return true;
        }
        visiting.push(name.to_string());
        for t in successors(name) {
            if visit(&t, successors, visiting, done) {
                return true;
            }
        }
        visiting.pop();
        done.insert(name.to_string());
        false
    }
    let mut done = BTreeSet::new();
    for root in roots {
        if visit(root, &successors, &mut Vec::new(), &mut done) {
            return true;
        }
    }
    false
}
