//! The polymorphic skill hierarchy: category interfaces with abstract
//! signatures and compositional default methods, per-site concrete
//! implementations, and the library container that holds them.
//!
//! Library values are immutable snapshots. Registration returns a new
//! snapshot, so read-only copies can be shared freely across evaluation
//! workers while the learning loop serializes growth.

mod validate;
pub mod store;

pub use validate::{validate_library, RuleId, SizeBounds, Violation};

use crate::dsl::ast::{Expr, Statement};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Kind of a skill parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Text,
    Integer,
    Selector,
}

impl ParamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::Text => "text",
            ParamKind::Integer => "integer",
            ParamKind::Selector => "selector",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
}

/// An abstract skill signature: what a capability is called and what it takes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSignature {
    pub name: String,
    pub params: Vec<Param>,
    pub doc: String,
}

impl SkillSignature {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// How a skill definition came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillOrigin {
    HandWritten,
    Induced,
    Default,
}

/// One parameterized skill body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDef {
    pub signature: SkillSignature,
    pub body: Vec<Statement>,
    pub origin: SkillOrigin,
    /// Global learning-step index at which this skill was committed.
    pub created_at: u64,
}

impl SkillDef {
    /// Distinct call targets in the body, in first-appearance order.
    pub fn call_targets(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for stmt in &self.body {
            if let Some(t) = stmt.call_target() {
                if seen.insert(t) {
                    out.push(t);
                }
            }
        }
        out
    }
}

/// The shared signature set (plus compositional default methods) for one
/// website category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryInterface {
    pub id: String,
    pub category: String,
    pub abstract_signatures: Vec<SkillSignature>,
    pub default_methods: Vec<SkillDef>,
}

impl CategoryInterface {
    pub fn signature(&self, name: &str) -> Option<&SkillSignature> {
        self.abstract_signatures.iter().find(|s| s.name == name)
    }

    pub fn default_method(&self, name: &str) -> Option<&SkillDef> {
        self.default_methods
            .iter()
            .find(|d| d.signature.name == name)
    }
}

/// A site's concrete bodies for an interface's signatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteImplementation {
    pub id: String,
    /// Interface id this implementation conforms to.
    pub implements: String,
    pub site: String,
    pub methods: indexmap::IndexMap<String, SkillDef>,
    pub created_at: u64,
}

/// Fully qualified skill identity: `interface.name` for default methods,
/// `interface.name@site` for concrete methods.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SkillId {
    pub interface: String,
    pub name: String,
    pub site: Option<String>,
}

impl SkillId {
    pub fn default_method(interface: &str, name: &str) -> Self {
        SkillId {
            interface: interface.into(),
            name: name.into(),
            site: None,
        }
    }

    pub fn concrete(interface: &str, name: &str, site: &str) -> Self {
        SkillId {
            interface: interface.into(),
            name: name.into(),
            site: Some(site.into()),
        }
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.site {
            Some(site) => write!(f, "{}.{}@{}", self.interface, self.name, site),
            None => write!(f, "{}.{}", self.interface, self.name),
        }
    }
}

impl From<SkillId> for String {
    fn from(id: SkillId) -> String {
        id.to_string()
    }
}

impl FromStr for SkillId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (qual, site) = match s.split_once('@') {
            Some((q, site)) => (q, Some(site.to_string())),
            None => (s, None),
        };
        let (interface, name) = qual
            .split_once('.')
            .ok_or_else(|| format!("malformed skill id `{s}`"))?;
        if interface.is_empty() || name.is_empty() {
            return Err(format!("malformed skill id `{s}`"));
        }
        Ok(SkillId {
            interface: interface.to_string(),
            name: name.to_string(),
            site,
        })
    }
}

impl TryFrom<String> for SkillId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Errors from library operations.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("an interface is already registered for category `{category}`")]
    DuplicateCategory { category: String },
    #[error("interface id `{id}` is already in use")]
    DuplicateInterfaceId { id: String },
    #[error("default methods of `{interface}` form a cycle involving `{name}`")]
    CyclicDefaultMethods { interface: String, name: String },
    #[error("call target `{target}` in `{skill}` does not resolve (undeclared or declared later)")]
    UnresolvedCall { skill: String, target: String },
    #[error("unknown interface `{id}`")]
    UnknownInterface { id: String },
    #[error("implementation does not conform to its interface: {detail}")]
    ConformanceViolation { detail: String },
    #[error("site `{site}` already has an implementation of `{interface}`")]
    DuplicateSite { site: String, interface: String },
    #[error("no skill named `{name}` is available on site `{site}`")]
    UnknownSkill { site: String, name: String },
    #[error("`{name}` needs `{missing}` which site `{site}` has not implemented")]
    UnimplementedAbstractCall {
        site: String,
        name: String,
        missing: String,
    },
    #[error("invalid definition: {detail}")]
    InvalidDefinition { detail: String },
}

/// A skill resolved for a concrete site.
#[derive(Debug, Clone, Copy)]
pub struct Resolved<'a> {
    pub def: &'a SkillDef,
    pub id: SkillIdRef<'a>,
}

/// Borrowed form of [`SkillId`] used by resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkillIdRef<'a> {
    pub interface: &'a str,
    pub name: &'a str,
    pub site: Option<&'a str>,
}

impl SkillIdRef<'_> {
    pub fn to_owned(self) -> SkillId {
        SkillId {
            interface: self.interface.to_string(),
            name: self.name.to_string(),
            site: self.site.map(str::to_string),
        }
    }
}

/// The evolving skill library `K_t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkillLibrary {
    /// One interface per category.
    pub(crate) interfaces: BTreeMap<String, CategoryInterface>,
    /// One implementation per (site, interface id).
    pub(crate) implementations: BTreeMap<(String, String), SiteImplementation>,
    /// Total creation order over all skills (default and concrete methods).
    pub(crate) creation_log: Vec<SkillId>,
}

impl SkillLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assemble a library from raw parts without any checking. Intended for
    /// loaders and for constructing deliberately broken fixtures; run
    /// [`validate_library`] on anything that crosses a trust boundary.
    pub fn from_raw_parts(
        interfaces: Vec<CategoryInterface>,
        implementations: Vec<SiteImplementation>,
        creation_log: Vec<SkillId>,
    ) -> Self {
        SkillLibrary {
            interfaces: interfaces
                .into_iter()
                .map(|i| (i.category.clone(), i))
                .collect(),
            implementations: implementations
                .into_iter()
                .map(|m| ((m.site.clone(), m.implements.clone()), m))
                .collect(),
            creation_log,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.interfaces.is_empty() && self.implementations.is_empty()
    }

    /// Number of skills in the library (default + concrete methods).
    pub fn skill_count(&self) -> usize {
        self.creation_log.len()
    }

    pub fn creation_log(&self) -> &[SkillId] {
        &self.creation_log
    }

    /// created_at of the newest entry, 0 for an empty library.
    pub fn latest_created_at(&self) -> u64 {
        self.creation_log
            .last()
            .and_then(|id| self.lookup(id))
            .map(|d| d.created_at)
            .unwrap_or(0)
    }

    pub fn interfaces(&self) -> impl Iterator<Item = &CategoryInterface> {
        self.interfaces.values()
    }

    pub fn implementations(&self) -> impl Iterator<Item = &SiteImplementation> {
        self.implementations.values()
    }

    pub fn interface_for_category(&self, category: &str) -> Option<&CategoryInterface> {
        self.interfaces.get(category)
    }

    pub fn interface_by_id(&self, id: &str) -> Option<&CategoryInterface> {
        self.interfaces.values().find(|i| i.id == id)
    }

    pub fn implementation(&self, site: &str, interface_id: &str) -> Option<&SiteImplementation> {
        self.implementations
            .get(&(site.to_string(), interface_id.to_string()))
    }

    /// Implementations registered for a site, ordered by interface id.
    pub fn site_implementations(&self, site: &str) -> impl Iterator<Item = &SiteImplementation> {
        let site = site.to_string();
        self.implementations
            .range((site.clone(), String::new())..)
            .take_while(move |((s, _), _)| *s == site)
            .map(|(_, v)| v)
    }

    /// Look up a skill definition by id.
    pub fn lookup(&self, id: &SkillId) -> Option<&SkillDef> {
        match &id.site {
            None => self
                .interface_by_id(&id.interface)?
                .default_method(&id.name),
            Some(site) => self
                .implementation(site, &id.interface)?
                .methods
                .get(&id.name),
        }
    }

    /// Skills in creation order.
    pub fn iter_skills(&self) -> impl Iterator<Item = (&SkillId, Option<&SkillDef>)> {
        self.creation_log.iter().map(|id| (id, self.lookup(id)))
    }

    /// Register a category interface. The category must be new; default
    /// methods must be compositional (calls only), reference only signatures
    /// or previously declared default methods, and be acyclic.
    pub fn register_interface(&self, iface: CategoryInterface) -> Result<Self, ModelError> {
        if self.interfaces.contains_key(&iface.category) {
            return Err(ModelError::DuplicateCategory {
                category: iface.category.clone(),
            });
        }
        if self.interfaces.values().any(|i| i.id == iface.id) {
            return Err(ModelError::DuplicateInterfaceId {
                id: iface.id.clone(),
            });
        }
        check_interface(&iface)?;
        self.check_created_at_tail(iface.default_methods.iter().map(|d| d.created_at))?;

        let mut next = self.clone();
        for def in &iface.default_methods {
            next.creation_log
                .push(SkillId::default_method(&iface.id, &def.signature.name));
        }
        next.interfaces.insert(iface.category.clone(), iface);
        Ok(next)
    }

    /// Register a site implementation against an existing interface. Fails if
    /// the (site, interface) pair already has one; use
    /// [`SkillLibrary::extend_implementation`] to grow an implementation.
    pub fn register_implementation(&self, imp: SiteImplementation) -> Result<Self, ModelError> {
        let iface = self
            .interface_by_id(&imp.implements)
            .ok_or_else(|| ModelError::UnknownInterface {
                id: imp.implements.clone(),
            })?;
        let key = (imp.site.clone(), imp.implements.clone());
        if self.implementations.contains_key(&key) {
            return Err(ModelError::DuplicateSite {
                site: imp.site.clone(),
                interface: imp.implements.clone(),
            });
        }
        check_conformance(iface, imp.methods.values())?;
        check_method_references(iface, &imp, imp.methods.keys().map(String::as_str))?;
        self.check_created_at_tail(imp.methods.values().map(|d| d.created_at))?;

        let mut next = self.clone();
        for def in imp.methods.values() {
            next.creation_log
                .push(SkillId::concrete(&imp.implements, &def.signature.name, &imp.site));
        }
        next.implementations.insert(key, imp);
        Ok(next)
    }

    /// Append methods to an existing implementation (or create one). Existing
    /// methods are never replaced; growth is strictly monotone.
    pub fn extend_implementation(
        &self,
        site: &str,
        interface_id: &str,
        methods: Vec<SkillDef>,
    ) -> Result<Self, ModelError> {
        let existing = self.implementation(site, interface_id);
        if existing.is_none() {
            let created_at = methods.iter().map(|d| d.created_at).min().unwrap_or(0);
            let imp = SiteImplementation {
                id: format!("{interface_id}@{site}"),
                implements: interface_id.to_string(),
                site: site.to_string(),
                methods: methods
                    .into_iter()
                    .map(|d| (d.signature.name.clone(), d))
                    .collect(),
                created_at,
            };
            return self.register_implementation(imp);
        }

        let iface = self
            .interface_by_id(interface_id)
            .ok_or_else(|| ModelError::UnknownInterface {
                id: interface_id.to_string(),
            })?;
        let imp = existing.unwrap();
        for def in &methods {
            if imp.methods.contains_key(&def.signature.name) {
                return Err(ModelError::InvalidDefinition {
                    detail: format!(
                        "site `{site}` already implements `{}`; skills are immutable",
                        def.signature.name
                    ),
                });
            }
        }
        check_conformance(iface, methods.iter())?;
        let mut merged = imp.clone();
        for def in &methods {
            merged
                .methods
                .insert(def.signature.name.clone(), def.clone());
        }
        check_method_references(iface, &merged, methods.iter().map(|d| d.signature.name.as_str()))?;
        self.check_created_at_tail(methods.iter().map(|d| d.created_at))?;

        let mut next = self.clone();
        for def in &methods {
            next.creation_log
                .push(SkillId::concrete(interface_id, &def.signature.name, site));
        }
        next.implementations
            .insert((site.to_string(), interface_id.to_string()), merged);
        Ok(next)
    }

    /// Resolve a skill name for a site: its own concrete method if present,
    /// otherwise an interface default method whose abstract calls are all
    /// bindable on this site. Deterministic: interfaces are visited in id
    /// order.
    pub fn resolve<'a>(&'a self, site: &str, name: &str) -> Result<Resolved<'a>, ModelError> {
        for imp in self.site_implementations(site) {
            if let Some(def) = imp.methods.get(name) {
                return Ok(Resolved {
                    def,
                    id: SkillIdRef {
                        interface: &imp.implements,
                        name: &def.signature.name,
                        site: Some(&imp.site),
                    },
                });
            }
        }
        let mut found_abstract = None;
        for imp in self.site_implementations(site) {
            let Some(iface) = self.interface_by_id(&imp.implements) else {
                continue;
            };
            if let Some(def) = iface.default_method(name) {
                self.check_bindable(site, iface, def, &mut BTreeSet::new())?;
                return Ok(Resolved {
                    def,
                    id: SkillIdRef {
                        interface: &iface.id,
                        name: &def.signature.name,
                        site: None,
                    },
                });
            }
            if iface.signature(name).is_some() && found_abstract.is_none() {
                found_abstract = Some(iface.id.clone());
            }
        }
        if let Some(interface) = found_abstract {
            return Err(ModelError::UnimplementedAbstractCall {
                site: site.to_string(),
                name: format!("{interface}.{name}"),
                missing: name.to_string(),
            });
        }
        Err(ModelError::UnknownSkill {
            site: site.to_string(),
            name: name.to_string(),
        })
    }

    /// Skill names resolvable on a site, in interface declaration order:
    /// implemented signatures first (interface order), then bindable defaults.
    pub fn available_skills(&self, site: &str) -> Vec<(SkillId, SkillSignature)> {
        let mut out = Vec::new();
        for imp in self.site_implementations(site) {
            let Some(iface) = self.interface_by_id(&imp.implements) else {
                continue;
            };
            for sig in &iface.abstract_signatures {
                if imp.methods.contains_key(&sig.name) {
                    out.push((
                        SkillId::concrete(&iface.id, &sig.name, site),
                        sig.clone(),
                    ));
                }
            }
            for def in &iface.default_methods {
                if self
                    .check_bindable(site, iface, def, &mut BTreeSet::new())
                    .is_ok()
                {
                    out.push((
                        SkillId::default_method(&iface.id, &def.signature.name),
                        def.signature.clone(),
                    ));
                }
            }
        }
        out
    }

    fn check_bindable(
        &self,
        site: &str,
        iface: &CategoryInterface,
        def: &SkillDef,
        visiting: &mut BTreeSet<String>,
    ) -> Result<(), ModelError> {
        if !visiting.insert(def.signature.name.clone()) {
            return Ok(());
        }
        for target in def.call_targets() {
            if let Some(inner) = iface.default_method(target) {
                self.check_bindable(site, iface, inner, visiting)?;
            } else if iface.signature(target).is_some() {
                let implemented = self
                    .implementation(site, &iface.id)
                    .is_some_and(|imp| imp.methods.contains_key(target));
                if !implemented {
                    return Err(ModelError::UnimplementedAbstractCall {
                        site: site.to_string(),
                        name: def.signature.name.clone(),
                        missing: target.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// New entries must not be created before the current tail of the log.
    fn check_created_at_tail(
        &self,
        created: impl IntoIterator<Item = u64>,
    ) -> Result<(), ModelError> {
        let tail = self
            .creation_log
            .last()
            .and_then(|id| self.lookup(id))
            .map(|d| d.created_at)
            .unwrap_or(0);
        for c in created {
            if c < tail {
                return Err(ModelError::InvalidDefinition {
                    detail: format!(
                        "created_at {c} precedes the latest library entry ({tail})"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Structural checks on an interface before registration.
fn check_interface(iface: &CategoryInterface) -> Result<(), ModelError> {
    let mut names = BTreeSet::new();
    for sig in &iface.abstract_signatures {
        if !names.insert(sig.name.clone()) {
            return Err(ModelError::InvalidDefinition {
                detail: format!("duplicate name `{}` in interface `{}`", sig.name, iface.id),
            });
        }
        check_params_unique(sig)?;
    }
    let mut declared_defaults = BTreeSet::new();
    for def in &iface.default_methods {
        if !names.insert(def.signature.name.clone()) {
            return Err(ModelError::InvalidDefinition {
                detail: format!(
                    "duplicate name `{}` in interface `{}`",
                    def.signature.name, iface.id
                ),
            });
        }
        check_params_unique(&def.signature)?;
        check_body_params(def)?;
        for stmt in &def.body {
            match stmt {
                Statement::Call { target, args } => {
                    let target_sig = if let Some(sig) = iface.signature(target) {
                        sig
                    } else if declared_defaults.contains(target) {
                        &iface.default_method(target).unwrap().signature
                    } else if iface.default_method(target).is_some() {
                        // Declared later: forward references break creation order.
                        return Err(ModelError::UnresolvedCall {
                            skill: def.signature.name.clone(),
                            target: target.clone(),
                        });
                    } else {
                        return Err(ModelError::UnresolvedCall {
                            skill: def.signature.name.clone(),
                            target: target.clone(),
                        });
                    };
                    check_call_args(&def.signature, target_sig, args)?;
                }
                Statement::Prim { .. } => {
                    return Err(ModelError::InvalidDefinition {
                        detail: format!(
                            "default method `{}` must be compositional (calls only)",
                            def.signature.name
                        ),
                    });
                }
                Statement::Stop => {
                    return Err(ModelError::InvalidDefinition {
                        detail: format!("`stop` is not allowed in skill body `{}`", def.signature.name),
                    });
                }
            }
        }
        declared_defaults.insert(def.signature.name.clone());
    }
    // Declaration order being topological rules out cycles, but keep an
    // explicit check so hand-assembled interfaces get the dedicated error.
    detect_default_cycle(iface)?;
    Ok(())
}

fn detect_default_cycle(iface: &CategoryInterface) -> Result<(), ModelError> {
    fn visit(
        iface: &CategoryInterface,
        name: &str,
        visiting: &mut Vec<String>,
        done: &mut BTreeSet<String>,
    ) -> Result<(), ModelError> {
        if done.contains(name) {
            return Ok(());
        }
        if visiting.iter().any(|n| n == name) {
            return Err(ModelError::CyclicDefaultMethods {
                interface: iface.id.clone(),
                name: name.to_string(),
            });
        }
        let Some(def) = iface.default_method(name) else {
            return Ok(());
        };
        visiting.push(name.to_string());
        for t in def.call_targets() {
            visit(iface, t, visiting, done)?;
        }
        visiting.pop();
        done.insert(name.to_string());
        Ok(())
    }
    let mut done = BTreeSet::new();
    for def in &iface.default_methods {
        visit(iface, &def.signature.name, &mut Vec::new(), &mut done)?;
    }
    Ok(())
}

fn check_params_unique(sig: &SkillSignature) -> Result<(), ModelError> {
    let mut seen = BTreeSet::new();
    for p in &sig.params {
        if !seen.insert(&p.name) {
            return Err(ModelError::InvalidDefinition {
                detail: format!("duplicate parameter `{}` in `{}`", p.name, sig.name),
            });
        }
    }
    Ok(())
}

/// Every free variable in the body must be a declared parameter.
fn check_body_params(def: &SkillDef) -> Result<(), ModelError> {
    let declared: BTreeSet<&str> = def.signature.params.iter().map(|p| p.name.as_str()).collect();
    for stmt in &def.body {
        let args = match stmt {
            Statement::Prim { args, .. } => args,
            Statement::Call { args, .. } => args,
            Statement::Stop => continue,
        };
        for a in args {
            if let Expr::Param(name) = a {
                if !declared.contains(name.as_str()) {
                    return Err(ModelError::InvalidDefinition {
                        detail: format!(
                            "`{}` uses undeclared parameter `{name}`",
                            def.signature.name
                        ),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Call arguments must match the target signature in arity and kind, as far
/// as that is statically known.
fn check_call_args(
    caller: &SkillSignature,
    target: &SkillSignature,
    args: &[Expr],
) -> Result<(), ModelError> {
    if args.len() != target.params.len() {
        return Err(ModelError::ConformanceViolation {
            detail: format!(
                "`{}` calls `{}` with {} argument(s), expected {}",
                caller.name,
                target.name,
                args.len(),
                target.params.len()
            ),
        });
    }
    for (arg, param) in args.iter().zip(&target.params) {
        let got = match arg {
            Expr::Lit(v) => Some(v.kind_name()),
            Expr::Param(name) => caller
                .params
                .iter()
                .find(|p| p.name == *name)
                .map(|p| p.kind.as_str()),
        };
        if let Some(got) = got {
            if got != param.kind.as_str() {
                return Err(ModelError::ConformanceViolation {
                    detail: format!(
                        "`{}` passes {} for parameter `{}` of `{}` (expected {})",
                        caller.name, got, param.name, target.name, param.kind.as_str()
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Conformance of concrete methods against the interface.
fn check_conformance<'a>(
    iface: &CategoryInterface,
    methods: impl Iterator<Item = &'a SkillDef>,
) -> Result<(), ModelError> {
    for def in methods {
        let sig = iface.signature(&def.signature.name).ok_or_else(|| {
            ModelError::ConformanceViolation {
                detail: format!(
                    "`{}` is not an abstract signature of `{}`",
                    def.signature.name, iface.id
                ),
            }
        })?;
        if def.signature.arity() != sig.arity() {
            return Err(ModelError::ConformanceViolation {
                detail: format!(
                    "`{}` takes {} parameter(s), signature declares {}",
                    def.signature.name,
                    def.signature.arity(),
                    sig.arity()
                ),
            });
        }
        for (got, want) in def.signature.params.iter().zip(&sig.params) {
            if got.kind != want.kind {
                return Err(ModelError::ConformanceViolation {
                    detail: format!(
                        "parameter `{}` of `{}` has kind {}, signature declares {}",
                        got.name,
                        def.signature.name,
                        got.kind.as_str(),
                        want.kind.as_str()
                    ),
                });
            }
        }
        check_params_unique(&def.signature)?;
        check_body_params(def)?;
        if def.body.iter().any(|s| matches!(s, Statement::Stop)) {
            return Err(ModelError::InvalidDefinition {
                detail: format!("`stop` is not allowed in skill body `{}`", def.signature.name),
            });
        }
    }
    Ok(())
}

/// Check call references of (new) methods in a merged implementation: targets
/// must be sibling methods, interface members, and the site-local dispatch
/// graph must stay acyclic.
fn check_method_references<'a>(
    iface: &CategoryInterface,
    imp: &SiteImplementation,
    new_methods: impl Iterator<Item = &'a str>,
) -> Result<(), ModelError> {
    for name in new_methods {
        let def = &imp.methods[name];
        for stmt in &def.body {
            if let Statement::Call { target, args } = stmt {
                let target_sig = if let Some(sibling) = imp.methods.get(target) {
                    &sibling.signature
                } else if let Some(d) = iface.default_method(target) {
                    &d.signature
                } else if let Some(sig) = iface.signature(target) {
                    // An unimplemented signature: allowed only if some later
                    // registration fills it in, which would break creation
                    // order. Reject up front.
                    let _ = sig;
                    return Err(ModelError::ConformanceViolation {
                        detail: format!(
                            "`{name}` calls `{target}` which `{}` has not implemented",
                            imp.site
                        ),
                    });
                } else {
                    return Err(ModelError::UnresolvedCall {
                        skill: name.to_string(),
                        target: target.clone(),
                    });
                };
                check_call_args(&def.signature, target_sig, args)?;
            }
        }
    }
    detect_dispatch_cycle(iface, imp)
}

/// Cycle detection over the site-local dispatch graph, where abstract calls
/// inside default methods bind to this site's concrete methods.
fn detect_dispatch_cycle(
    iface: &CategoryInterface,
    imp: &SiteImplementation,
) -> Result<(), ModelError> {
    fn body_of<'a>(
        iface: &'a CategoryInterface,
        imp: &'a SiteImplementation,
        name: &str,
    ) -> Option<&'a SkillDef> {
        imp.methods.get(name).or_else(|| iface.default_method(name))
    }
    fn visit(
        iface: &CategoryInterface,
        imp: &SiteImplementation,
        name: &str,
        visiting: &mut Vec<String>,
        done: &mut BTreeSet<String>,
    ) -> Result<(), ModelError> {
        if done.contains(name) {
            return Ok(());
        }
        if visiting.iter().any(|n| n == name) {
            return Err(ModelError::ConformanceViolation {
                detail: format!(
                    "dispatch cycle on site `{}` involving `{name}`",
                    imp.site
                ),
            });
        }
        let Some(def) = body_of(iface, imp, name) else {
            return Ok(());
        };
        visiting.push(name.to_string());
        for t in def.call_targets() {
            visit(iface, imp, t, visiting, done)?;
        }
        visiting.pop();
        done.insert(name.to_string());
        Ok(())
    }
    let mut done = BTreeSet::new();
    let names: Vec<String> = imp
        .methods
        .keys()
        .cloned()
        .chain(iface.default_methods.iter().map(|d| d.signature.name.clone()))
        .collect();
    for name in names {
        visit(iface, imp, &name, &mut Vec::new(), &mut done)?;
    }
    Ok(())
}
