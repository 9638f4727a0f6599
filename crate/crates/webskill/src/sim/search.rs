//! Bounded breadth-first witness search over site states.
//!
//! Capability plans are derived at generation time: for each capability the
//! search replays the prerequisite chain, navigates to the capability's
//! anchor page, and finds the shortest primitive sequence that satisfies the
//! capability goal. The found span, parameterized over the capability's
//! arguments, is exactly the body a concrete skill for this site should have.

use super::gen::{FILTER_KINDS, LABEL_KINDS};
use super::{
    check_success, initial_state, observe, step, ElemRole, PageRole, Predicate, SimError,
    SiteSpec, SiteState, Task,
};
use crate::dsl::ast::{Expr, PrimitiveAction, Statement, Value};
use crate::skill_model::{Param, ParamKind};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Declarative description of one capability of a category.
#[derive(Debug, Clone)]
pub struct CapabilityDef {
    pub name: &'static str,
    pub params: &'static [(&'static str, ParamKind)],
    pub prereqs: &'static [&'static str],
    /// Page the skill span starts from.
    pub anchor: PageRole,
}

pub fn capability_defs(category: &str) -> &'static [CapabilityDef] {
    const SHOPPING: &[CapabilityDef] = &[
        CapabilityDef {
            name: "search",
            params: &[("query", ParamKind::Text)],
            prereqs: &[],
            anchor: PageRole::Home,
        },
        CapabilityDef {
            name: "open_item",
            params: &[("link", ParamKind::Selector)],
            prereqs: &["search"],
            anchor: PageRole::Results,
        },
        CapabilityDef {
            name: "add_to_cart",
            params: &[],
            prereqs: &["search", "open_item"],
            anchor: PageRole::Item,
        },
        CapabilityDef {
            name: "checkout",
            params: &[],
            prereqs: &["search", "open_item", "add_to_cart"],
            anchor: PageRole::Item,
        },
        CapabilityDef {
            name: "filter",
            params: &[("option", ParamKind::Selector)],
            prereqs: &["search"],
            anchor: PageRole::Results,
        },
        CapabilityDef {
            name: "wishlist",
            params: &[],
            prereqs: &["search", "open_item"],
            anchor: PageRole::Item,
        },
    ];
    const CODING: &[CapabilityDef] = &[
        CapabilityDef {
            name: "create_repo",
            params: &[("name", ParamKind::Text)],
            prereqs: &[],
            anchor: PageRole::Home,
        },
        CapabilityDef {
            name: "create_issue",
            params: &[("title", ParamKind::Text)],
            prereqs: &["create_repo"],
            anchor: PageRole::Repo,
        },
        CapabilityDef {
            name: "add_label",
            params: &[("option", ParamKind::Selector)],
            prereqs: &["create_repo", "create_issue"],
            anchor: PageRole::Issue,
        },
        CapabilityDef {
            name: "star_repo",
            params: &[("repo_link", ParamKind::Selector)],
            prereqs: &["create_repo"],
            anchor: PageRole::Home,
        },
    ];
    match category {
        "shopping" => SHOPPING,
        "coding" => CODING,
        _ => &[],
    }
}

pub fn capability_def(category: &str, name: &str) -> Option<&'static CapabilityDef> {
    capability_defs(category).iter().find(|c| c.name == name)
}

/// Issue titles are derived from the repo name so chain values stay distinct.
pub fn issue_title(text: &str) -> String {
    format!("Track work on {text}")
}

/// Canonical and per-task argument values for one capability on one site.
pub fn capability_values(
    spec: &SiteSpec,
    cap: &CapabilityDef,
    item: &str,
    text: &str,
    kind_idx: usize,
) -> BTreeMap<String, Value> {
    let mut values = BTreeMap::new();
    for (pname, pkind) in cap.params {
        let value = match (*pname, pkind) {
            ("query", _) => Value::Text(item.to_string()),
            ("name", _) => Value::Text(text.to_string()),
            ("title", _) => Value::Text(issue_title(text)),
            ("link", _) => {
                let row = spec
                    .find_element(|r| matches!(r, ElemRole::RowLink { index: 0 }))
                    .expect("results row 0");
                Value::Selector(row.id.clone())
            }
            ("repo_link", _) => {
                let row = spec
                    .find_element(|r| matches!(r, ElemRole::RepoRowLink { index: 0 }))
                    .expect("repo row 0");
                Value::Selector(row.id.clone())
            }
            ("option", _) if spec.category == "shopping" => {
                let kind = FILTER_KINDS[kind_idx % FILTER_KINDS.len()];
                let opt = spec
                    .find_element(
                        |r| matches!(r, ElemRole::FilterOption { kind: k } if k == kind),
                    )
                    .expect("filter option");
                Value::Selector(opt.id.clone())
            }
            ("option", _) => {
                let kind = LABEL_KINDS[kind_idx % LABEL_KINDS.len()];
                let opt = spec
                    .find_element(|r| matches!(r, ElemRole::LabelOption { kind: k } if k == kind))
                    .expect("label option");
                Value::Selector(opt.id.clone())
            }
            _ => panic!("unmapped capability parameter `{pname}`"),
        };
        values.insert(pname.to_string(), value);
    }
    values
}

/// The goal predicate a capability instance must satisfy.
pub fn capability_goal(
    spec: &SiteSpec,
    cap: &str,
    item: &str,
    text: &str,
    kind_idx: usize,
) -> Predicate {
    match cap {
        "search" => Predicate::Searched {
            query: item.to_string(),
        },
        "open_item" => Predicate::ItemViewed {
            item: item.to_string(),
        },
        "add_to_cart" => Predicate::CartContains {
            item: item.to_string(),
        },
        "checkout" => Predicate::OrderPlaced {
            item: item.to_string(),
        },
        "wishlist" => Predicate::WishlistContains {
            item: item.to_string(),
        },
        "filter" => {
            let kind = FILTER_KINDS[kind_idx % FILTER_KINDS.len()].to_string();
            let via = spec
                .pages
                .iter()
                .flat_map(|p| p.elements.iter())
                .filter(|e| matches!(&e.role, ElemRole::FilterOption { .. }))
                .map(|e| e.id.clone())
                .collect();
            Predicate::FilterApplied { kind, via }
        }
        "create_repo" => Predicate::RepoExists {
            name: text.to_string(),
        },
        "create_issue" => Predicate::IssueExists {
            title: issue_title(text),
        },
        "add_label" => {
            let label = LABEL_KINDS[kind_idx % LABEL_KINDS.len()].to_string();
            Predicate::IssueLabeled {
                title: issue_title(text),
                label,
            }
        }
        "star_repo" => Predicate::RepoStarred {
            name: text.to_string(),
        },
        other => panic!("unknown capability `{other}`"),
    }
}

/// One capability's derived execution recipe on one site.
#[derive(Debug, Clone)]
pub struct CapabilityPlan {
    pub capability: String,
    pub params: Vec<Param>,
    /// Canonical argument values the span was derived with.
    pub values: BTreeMap<String, Value>,
    /// Navigation from the previous chain state to the anchor page.
    pub connector: Vec<PrimitiveAction>,
    /// Shortest goal-reaching primitive sequence from the anchor.
    pub span: Vec<PrimitiveAction>,
    /// The span with canonical values replaced by parameter references.
    pub span_template: Vec<Statement>,
}

/// Digest that ignores the step counter, so search states dedupe across
/// depths.
fn search_digest(state: &SiteState) -> String {
    let mut s = state.clone();
    s.steps = 0;
    s.digest()
}

/// Candidate actions from a state, in deterministic order.
fn candidates(spec: &SiteSpec, state: &SiteState, texts: &[String]) -> Vec<PrimitiveAction> {
    let obs = observe(spec, state);
    let mut out = Vec::new();
    for node in &obs.nodes {
        out.push(PrimitiveAction::Click {
            selector: node.id.clone(),
        });
    }
    for node in &obs.nodes {
        out.push(PrimitiveAction::Hover {
            selector: node.id.clone(),
        });
    }
    for node in &obs.nodes {
        if node.role == "textbox" {
            for t in texts {
                out.push(PrimitiveAction::Type {
                    selector: node.id.clone(),
                    text: t.clone(),
                });
            }
        }
    }
    out.push(PrimitiveAction::Press {
        keys: "Enter".into(),
    });
    out
}

/// Shortest action sequence from `state` satisfying `goal`, or None within
/// the depth bound. `history` is the primitive prefix already applied (some
/// goals inspect the trajectory).
fn bfs(
    spec: &SiteSpec,
    state: &SiteState,
    history: &[PrimitiveAction],
    texts: &[String],
    max_depth: usize,
    goal: &dyn Fn(&SiteState, &[PrimitiveAction]) -> bool,
) -> Option<Vec<PrimitiveAction>> {
    if goal(state, history) {
        return Some(Vec::new());
    }
    let mut visited = BTreeSet::new();
    visited.insert(search_digest(state));
    let mut queue: VecDeque<(SiteState, Vec<PrimitiveAction>)> =
        VecDeque::from([(state.clone(), Vec::new())]);
    while let Some((s, path)) = queue.pop_front() {
        if path.len() >= max_depth {
            continue;
        }
        for action in candidates(spec, &s, texts) {
            let mut next = s.clone();
            if step(spec, &mut next, &action).is_err() {
                continue;
            }
            if !visited.insert(search_digest(&next)) {
                continue;
            }
            let mut next_path = path.clone();
            next_path.push(action);
            let mut full = history.to_vec();
            full.extend(next_path.iter().cloned());
            if goal(&next, &full) {
                return Some(next_path);
            }
            queue.push_back((next, next_path));
        }
    }
    None
}

fn replace_with_params(
    actions: &[PrimitiveAction],
    params: &[Param],
    values: &BTreeMap<String, Value>,
) -> Vec<Statement> {
    let sub = |v: Value| -> Expr {
        for p in params {
            if values.get(&p.name) == Some(&v) {
                return Expr::Param(p.name.clone());
            }
        }
        Expr::Lit(v)
    };
    actions
        .iter()
        .map(|a| {
            let Statement::Prim { kind, args } = a.to_statement() else {
                unreachable!("primitive actions print as prim statements")
            };
            let args = args
                .into_iter()
                .map(|e| match e {
                    Expr::Lit(v) => sub(v),
                    other => other,
                })
                .collect();
            Statement::Prim { kind, args }
        })
        .collect()
}

fn value_text(values: &BTreeMap<String, Value>) -> Vec<String> {
    values
        .values()
        .filter_map(|v| match v {
            Value::Text(t) => Some(t.clone()),
            _ => None,
        })
        .collect()
}

/// Derive plans for every capability of `spec`, in manifest order.
///
/// Fails if any capability is unreachable or its span falls outside 2..=5
/// primitives, which would make the induced skill violate the size bounds.
pub fn derive_capability_plans(
    spec: &SiteSpec,
) -> Result<indexmap::IndexMap<String, CapabilityPlan>, SimError> {
    let item = spec
        .catalog
        .first()
        .map(|i| i.name.clone())
        .unwrap_or_default();
    let text = spec.text_pool.first().cloned().unwrap_or_default();
    derive_plans_for(spec, &item, &text, 0)
}

/// Plans for a specific (item, text, option-kind) instantiation. The action
/// structure is instance-independent; only argument values differ.
pub fn derive_plans_for(
    spec: &SiteSpec,
    item: &str,
    text: &str,
    kind_idx: usize,
) -> Result<indexmap::IndexMap<String, CapabilityPlan>, SimError> {
    let mut plans: indexmap::IndexMap<String, CapabilityPlan> = indexmap::IndexMap::new();
    for cap in capability_defs(&spec.category) {
        let mut state = initial_state(spec);
        let mut history: Vec<PrimitiveAction> = Vec::new();
        // Replay the prerequisite chain from already-derived plans.
        for pre in cap.prereqs {
            let plan = plans
                .get(*pre)
                .ok_or_else(|| SimError::Generation(format!("prereq `{pre}` out of order")))?;
            for a in plan.connector.iter().chain(plan.span.iter()) {
                step(spec, &mut state, a).map_err(|e| SimError::Generation(e.to_string()))?;
                history.push(a.clone());
            }
        }
        let values = capability_values(spec, cap, item, text, kind_idx);
        let goal = capability_goal(spec, cap.name, item, text, kind_idx);
        let texts = value_text(&values);

        let anchor_page = spec
            .page_by_role(cap.anchor)
            .ok_or_else(|| SimError::Generation(format!("no page with role {:?}", cap.anchor)))?
            .id
            .clone();
        let connector = bfs(spec, &state, &history, &[], 4, &|s, _| {
            s.current_page() == anchor_page
        })
        .ok_or_else(|| {
            SimError::Generation(format!("cannot reach {:?} for `{}`", cap.anchor, cap.name))
        })?;
        for a in &connector {
            step(spec, &mut state, a).map_err(|e| SimError::Generation(e.to_string()))?;
            history.push(a.clone());
        }

        let span = bfs(spec, &state, &history, &texts, 6, &|s, acts| {
            check_goal(spec, &goal, s, acts)
        })
        .ok_or_else(|| {
            SimError::Generation(format!("capability `{}` unreachable on `{}`", cap.name, spec.id))
        })?;
        if span.len() < 2 || span.len() > 5 {
            return Err(SimError::Generation(format!(
                "span for `{}` on `{}` has {} primitives, want 2..=5",
                cap.name,
                spec.id,
                span.len()
            )));
        }
        let params: Vec<Param> = cap
            .params
            .iter()
            .map(|(n, k)| Param {
                name: (*n).to_string(),
                kind: *k,
            })
            .collect();
        let span_template = replace_with_params(&span, &params, &values);
        plans.insert(
            cap.name.to_string(),
            CapabilityPlan {
                capability: cap.name.to_string(),
                params,
                values,
                connector,
                span,
                span_template,
            },
        );
    }
    Ok(plans)
}

fn check_goal(
    spec: &SiteSpec,
    goal: &Predicate,
    state: &SiteState,
    actions: &[PrimitiveAction],
) -> bool {
    let probe = Task {
        id: "probe".into(),
        instruction: String::new(),
        site: spec.id.clone(),
        predicate: goal.clone(),
        horizon: 0,
        capability: String::new(),
    };
    check_success(spec, &probe, state, actions)
}
