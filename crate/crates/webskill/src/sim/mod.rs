//! Deterministic simulated-website environments.
//!
//! A [`SiteSpec`] is pure data: a page graph with declared elements, a table
//! of transition rules over those elements, a capability manifest, and the
//! catalog/lexicon the tasks draw from. [`step`] applies one primitive action:
//! browser chrome (tabs, history, scrolling, hovering) is handled uniformly,
//! everything site-specific goes through the rule table. Actions that match
//! no rule are wasted steps, not errors, mirroring agents clicking stale
//! elements.

pub mod gen;
#[cfg(test)]
mod tests;
pub mod search;
pub mod tasks;

pub use gen::generate_site_family;
pub use search::{derive_capability_plans, CapabilityPlan};
pub use tasks::{
    build_task, generate_task_suite, suite_from_parts, SuiteOptions, Task, TaskPlan, TaskSuite,
    TASKS_SCHEMA,
};

use crate::dsl::ast::PrimitiveAction;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

pub const SITE_SCHEMA: &str = "site/1";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown category `{label}`")]
    UnknownCategory { label: String },
    #[error("task `{task}` targets site `{expected}`, not `{got}`")]
    SiteTaskMismatch {
        task: String,
        expected: String,
        got: String,
    },
    #[error("malformed action: {detail}")]
    MalformedAction { detail: String },
    #[error("site generation failed: {0}")]
    Generation(String),
}

/// What a page is for. Every non-info role appears at most once per site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageRole {
    Home,
    Results,
    Preview,
    Item,
    Cart,
    Checkout,
    OrderConfirm,
    Info,
    NewRepoForm,
    Repo,
    Issues,
    NewIssueForm,
    Issue,
}

/// What an element does, which also decides its visibility and rendered value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ElemRole {
    SearchBox,
    /// Search result row `i`; visible while the results list has > i entries.
    RowLink { index: usize },
    ViewDetails,
    AddToCart,
    ConfirmAdd,
    WishButton,
    ConfirmWish,
    CartLink,
    CheckoutButton,
    PlaceOrder,
    FilterMenu,
    FilterOption { kind: String },
    HomeLink,
    InfoLink { page: String },
    Decor,
    ItemTitle,
    CartNote,
    FilterBadge,
    OrderNote,
    NewRepoButton,
    NameField,
    CreateRepoButton,
    IssuesTab,
    NewIssueButton,
    TitleField,
    SubmitIssue,
    LabelMenu,
    LabelOption { kind: String },
    StarButton,
    RepoRowLink { index: usize },
    RepoTitle,
    IssueTitle,
}

impl ElemRole {
    pub fn is_field(&self) -> bool {
        matches!(
            self,
            ElemRole::SearchBox | ElemRole::NameField | ElemRole::TitleField
        )
    }

    pub fn render(&self) -> &'static str {
        match self {
            ElemRole::SearchBox | ElemRole::NameField | ElemRole::TitleField => "textbox",
            ElemRole::RowLink { .. }
            | ElemRole::RepoRowLink { .. }
            | ElemRole::HomeLink
            | ElemRole::InfoLink { .. }
            | ElemRole::CartLink
            | ElemRole::IssuesTab => "link",
            ElemRole::Decor
            | ElemRole::ItemTitle
            | ElemRole::CartNote
            | ElemRole::FilterBadge
            | ElemRole::OrderNote
            | ElemRole::RepoTitle
            | ElemRole::IssueTitle => "text",
            _ => "button",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    #[serde(flatten)]
    pub role: ElemRole,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub id: String,
    pub role: PageRole,
    pub elements: Vec<Element>,
}

/// How a rule matches the element part of an action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "match", rename_all = "snake_case")]
pub enum ElemPattern {
    Exact { id: String },
    /// Matches `"{prefix}_{i}"`, capturing `i`.
    RowIndexed { prefix: String },
}

impl ElemPattern {
    fn matches(&self, selector: &str) -> Option<Option<usize>> {
        match self {
            ElemPattern::Exact { id } => (id == selector).then_some(None),
            ElemPattern::RowIndexed { prefix } => {
                let rest = selector.strip_prefix(prefix.as_str())?.strip_prefix('_')?;
                rest.parse::<usize>().ok().map(Some)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "on", rename_all = "snake_case")]
pub enum RulePattern {
    Click { elem: ElemPattern },
    Type { elem: ElemPattern },
    Press { keys: String },
}

/// Guards that must hold for a rule to match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cond", rename_all = "snake_case")]
pub enum Condition {
    FocusedIs { elem: String },
    /// The matched element itself was hovered by the previous action.
    HoveredSelf,
    MenuOpen,
    DialogIs { dialog: String },
    FieldNonEmpty { field: String },
    CartNonEmpty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    GotoPage { page: String },
    Focus { elem: String },
    SetFieldFromTyped { field: String },
    RunSearch { field: String },
    OpenResultRow,
    MarkViewed,
    OpenDialog { dialog: String },
    CloseDialog,
    AddCurrentToCart,
    OpenMenu,
    CloseMenu,
    ApplyFilter { kind: String },
    PlaceOrder,
    AddCurrentToWishlist,
    CreateRepoFromField { field: String },
    OpenRepoRow,
    CreateIssueFromField { field: String },
    AddLabel { kind: String },
    StarCurrentRepo,
    NoEffect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRule {
    pub page: String,
    pub pattern: RulePattern,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<Condition>,
    pub effects: Vec<Effect>,
}

/// A catalog entry. Tags drive the filter capability.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub name: String,
    pub tags: Vec<String>,
}

/// A deterministic simulated website.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub schema: String,
    pub id: String,
    pub category: String,
    pub seed: u64,
    pub pages: Vec<Page>,
    pub rules: Vec<TransitionRule>,
    pub capabilities: Vec<String>,
    pub catalog: Vec<Item>,
    /// Names tasks may draw on for typed input (repo names, issue titles).
    pub text_pool: Vec<String>,
}

impl SiteSpec {
    pub fn page(&self, id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.id == id)
    }

    pub fn page_by_role(&self, role: PageRole) -> Option<&Page> {
        self.pages.iter().find(|p| p.role == role)
    }

    pub fn home_page(&self) -> &Page {
        self.page_by_role(PageRole::Home)
            .expect("every site has a home page")
    }

    /// All element ids declared on any page (row elements expanded).
    pub fn element_ids(&self) -> Vec<String> {
        self.pages
            .iter()
            .flat_map(|p| p.elements.iter().map(|e| e.id.clone()))
            .collect()
    }

    pub fn find_element(&self, role_pred: impl Fn(&ElemRole) -> bool) -> Option<&Element> {
        self.pages
            .iter()
            .flat_map(|p| p.elements.iter())
            .find(|e| role_pred(&e.role))
    }
}

/// Per-tab browsing state: history plus transient page UI.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabState {
    pub history: Vec<String>,
    pub pos: usize,
    pub scroll: i64,
    pub focused: Option<String>,
    pub hovered: Option<String>,
    pub menu_open: bool,
    pub dialog: Option<String>,
}

impl TabState {
    fn at(page: String) -> Self {
        TabState {
            history: vec![page],
            pos: 0,
            ..TabState::default()
        }
    }

    pub fn page(&self) -> &str {
        &self.history[self.pos]
    }

    fn navigate(&mut self, page: String) {
        self.history.truncate(self.pos + 1);
        self.history.push(page);
        self.pos += 1;
        self.clear_transient();
    }

    fn clear_transient(&mut self) {
        self.focused = None;
        self.hovered = None;
        self.menu_open = false;
        self.dialog = None;
        self.scroll = 0;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repo {
    pub name: String,
    pub starred: bool,
    pub issues: Vec<Issue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub title: String,
    pub labels: Vec<String>,
}

/// The latent backend record shared by all tabs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub fields: BTreeMap<String, String>,
    pub query_history: Vec<String>,
    /// Catalog indices currently listed on the results page.
    pub results: Vec<usize>,
    pub filter_active: Option<String>,
    pub current_item: Option<usize>,
    pub viewed: Vec<usize>,
    pub cart: Vec<usize>,
    pub orders: Vec<usize>,
    pub wishlist: Vec<usize>,
    pub repos: Vec<Repo>,
    pub current_repo: Option<usize>,
    pub current_issue: Option<usize>,
}

/// Full simulator state for one episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteState {
    pub site: String,
    pub tabs: Vec<TabState>,
    pub focus: usize,
    pub latent: LatentRecord,
    /// Primitive actions applied since reset.
    pub steps: u64,
}

impl SiteState {
    pub fn current_tab(&self) -> &TabState {
        &self.tabs[self.focus]
    }

    fn current_tab_mut(&mut self) -> &mut TabState {
        &mut self.tabs[self.focus]
    }

    pub fn current_page(&self) -> &str {
        self.current_tab().page()
    }

    /// Canonical content digest; equal states hash equal.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// One visible node of the page tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsNode {
    pub id: String,
    pub role: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

/// Structured observation of the current page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub page: String,
    pub nodes: Vec<ObsNode>,
}

impl Observation {
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("observation serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Plain-text rendering for prompts and logs.
    pub fn render(&self) -> String {
        let mut out = format!("page: {}\n", self.page);
        for n in &self.nodes {
            match &n.value {
                Some(v) => out.push_str(&format!("  [#{}] {} \"{}\" = {}\n", n.id, n.role, n.label, v)),
                None => out.push_str(&format!("  [#{}] {} \"{}\"\n", n.id, n.role, n.label)),
            }
        }
        out
    }
}

/// Start an episode of `task` on `spec`.
pub fn reset(spec: &SiteSpec, task: &Task) -> Result<(SiteState, Observation), SimError> {
    if task.site != spec.id {
        return Err(SimError::SiteTaskMismatch {
            task: task.id.clone(),
            expected: task.site.clone(),
            got: spec.id.clone(),
        });
    }
    let state = initial_state(spec);
    let obs = observe(spec, &state);
    Ok((state, obs))
}

/// Fresh home-page state, independent of any task.
pub fn initial_state(spec: &SiteSpec) -> SiteState {
    SiteState {
        site: spec.id.clone(),
        tabs: vec![TabState::at(spec.home_page().id.clone())],
        focus: 0,
        latent: LatentRecord::default(),
        steps: 0,
    }
}

fn is_visible(spec: &SiteSpec, state: &SiteState, elem: &Element) -> bool {
    let tab = state.current_tab();
    match &elem.role {
        ElemRole::RowLink { index } => *index < state.latent.results.len(),
        ElemRole::RepoRowLink { index } => *index < state.latent.repos.len(),
        ElemRole::ConfirmAdd => tab.dialog.as_deref() == Some("add"),
        ElemRole::ConfirmWish => tab.dialog.as_deref() == Some("wish"),
        ElemRole::FilterOption { .. } | ElemRole::LabelOption { .. } => tab.menu_open,
        ElemRole::FilterBadge => state.latent.filter_active.is_some(),
        _ => {
            let _ = spec;
            true
        }
    }
}

fn node_value(spec: &SiteSpec, state: &SiteState, elem: &Element) -> Option<String> {
    let item_name = |idx: &Option<usize>| {
        idx.and_then(|i| spec.catalog.get(i)).map(|it| it.name.clone())
    };
    match &elem.role {
        ElemRole::SearchBox | ElemRole::NameField | ElemRole::TitleField => {
            Some(state.latent.fields.get(&elem.id).cloned().unwrap_or_default())
        }
        ElemRole::CartLink => Some(state.latent.cart.len().to_string()),
        ElemRole::RowLink { index } => state
            .latent
            .results
            .get(*index)
            .and_then(|i| spec.catalog.get(*i))
            .map(|it| it.name.clone()),
        ElemRole::RepoRowLink { index } => {
            state.latent.repos.get(*index).map(|r| r.name.clone())
        }
        ElemRole::ItemTitle => item_name(&state.latent.current_item),
        ElemRole::CartNote => {
            let names: Vec<String> = state
                .latent
                .cart
                .iter()
                .filter_map(|i| spec.catalog.get(*i))
                .map(|it| it.name.clone())
                .collect();
            Some(names.join(", "))
        }
        ElemRole::FilterBadge => state.latent.filter_active.clone(),
        ElemRole::OrderNote => {
            let names: Vec<String> = state
                .latent
                .orders
                .iter()
                .filter_map(|i| spec.catalog.get(*i))
                .map(|it| it.name.clone())
                .collect();
            Some(names.join(", "))
        }
        ElemRole::RepoTitle => state
            .latent
            .current_repo
            .and_then(|i| state.latent.repos.get(i))
            .map(|r| r.name.clone()),
        ElemRole::IssueTitle => {
            let repo = state.latent.current_repo?;
            let issue = state.latent.current_issue?;
            state
                .latent
                .repos
                .get(repo)?
                .issues
                .get(issue)
                .map(|i| i.title.clone())
        }
        _ => None,
    }
}

/// Observation of the current page: visible elements in declaration order.
pub fn observe(spec: &SiteSpec, state: &SiteState) -> Observation {
    let page_id = state.current_page().to_string();
    let mut nodes = Vec::new();
    if let Some(page) = spec.page(&page_id) {
        for elem in &page.elements {
            if is_visible(spec, state, elem) {
                nodes.push(ObsNode {
                    id: elem.id.clone(),
                    role: elem.role.render().to_string(),
                    label: elem.label.clone(),
                    value: node_value(spec, state, elem),
                });
            }
        }
    }
    Observation {
        page: page_id,
        nodes,
    }
}

struct MatchContext {
    row: Option<usize>,
    typed: Option<String>,
}

fn condition_holds(cond: &Condition, state: &SiteState, matched_elem: &str) -> bool {
    let tab = state.current_tab();
    match cond {
        Condition::FocusedIs { elem } => tab.focused.as_deref() == Some(elem.as_str()),
        Condition::HoveredSelf => tab.hovered.as_deref() == Some(matched_elem),
        Condition::MenuOpen => tab.menu_open,
        Condition::DialogIs { dialog } => tab.dialog.as_deref() == Some(dialog.as_str()),
        Condition::FieldNonEmpty { field } => state
            .latent
            .fields
            .get(field)
            .is_some_and(|v| !v.is_empty()),
        Condition::CartNonEmpty => !state.latent.cart.is_empty(),
    }
}

/// An element reference is live if it is declared on the current page and
/// visible in the current state.
fn live_element<'a>(spec: &'a SiteSpec, state: &SiteState, selector: &str) -> Option<&'a Element> {
    let page = spec.page(state.current_page())?;
    let elem = page.elements.iter().find(|e| e.id == selector)?;
    is_visible(spec, state, elem).then_some(elem)
}

fn apply_effects(
    spec: &SiteSpec,
    state: &mut SiteState,
    effects: &[Effect],
    ctx: &MatchContext,
) {
    for effect in effects {
        match effect {
            Effect::GotoPage { page } => state.current_tab_mut().navigate(page.clone()),
            Effect::Focus { elem } => state.current_tab_mut().focused = Some(elem.clone()),
            Effect::SetFieldFromTyped { field } => {
                let text = ctx.typed.clone().unwrap_or_default();
                state.latent.fields.insert(field.clone(), text);
            }
            Effect::RunSearch { field } => {
                let query = state
                    .latent
                    .fields
                    .get(field)
                    .cloned()
                    .unwrap_or_default();
                let needle = query.to_lowercase();
                state.latent.results = spec
                    .catalog
                    .iter()
                    .enumerate()
                    .filter(|(_, it)| it.name.to_lowercase().contains(&needle))
                    .map(|(i, _)| i)
                    .collect();
                state.latent.query_history.push(query);
                state.latent.filter_active = None;
            }
            Effect::OpenResultRow => {
                if let Some(row) = ctx.row {
                    state.latent.current_item = state.latent.results.get(row).copied();
                }
            }
            Effect::MarkViewed => {
                if let Some(item) = state.latent.current_item {
                    if !state.latent.viewed.contains(&item) {
                        state.latent.viewed.push(item);
                    }
                }
            }
            Effect::OpenDialog { dialog } => {
                state.current_tab_mut().dialog = Some(dialog.clone())
            }
            Effect::CloseDialog => state.current_tab_mut().dialog = None,
            Effect::AddCurrentToCart => {
                if let Some(item) = state.latent.current_item {
                    state.latent.cart.push(item);
                }
            }
            Effect::OpenMenu => state.current_tab_mut().menu_open = true,
            Effect::CloseMenu => state.current_tab_mut().menu_open = false,
            Effect::ApplyFilter { kind } => {
                state.latent.filter_active = Some(kind.clone());
                state.latent.results = state
                    .latent
                    .results
                    .iter()
                    .copied()
                    .filter(|i| {
                        spec.catalog
                            .get(*i)
                            .is_some_and(|it| it.tags.iter().any(|t| t == kind))
                    })
                    .collect();
            }
            Effect::PlaceOrder => {
                let mut cart = std::mem::take(&mut state.latent.cart);
                state.latent.orders.append(&mut cart);
            }
            Effect::AddCurrentToWishlist => {
                if let Some(item) = state.latent.current_item {
                    if !state.latent.wishlist.contains(&item) {
                        state.latent.wishlist.push(item);
                    }
                }
            }
            Effect::CreateRepoFromField { field } => {
                let name = state
                    .latent
                    .fields
                    .get(field)
                    .cloned()
                    .unwrap_or_default();
                if !name.is_empty() {
                    state.latent.repos.push(Repo {
                        name,
                        starred: false,
                        issues: Vec::new(),
                    });
                    state.latent.current_repo = Some(state.latent.repos.len() - 1);
                    state.latent.fields.insert(field.clone(), String::new());
                }
            }
            Effect::OpenRepoRow => {
                if let Some(row) = ctx.row {
                    if row < state.latent.repos.len() {
                        state.latent.current_repo = Some(row);
                    }
                }
            }
            Effect::CreateIssueFromField { field } => {
                let title = state
                    .latent
                    .fields
                    .get(field)
                    .cloned()
                    .unwrap_or_default();
                if let (Some(repo), false) = (state.latent.current_repo, title.is_empty()) {
                    if let Some(r) = state.latent.repos.get_mut(repo) {
                        r.issues.push(Issue {
                            title,
                            labels: Vec::new(),
                        });
                        state.latent.current_issue = Some(r.issues.len() - 1);
                        state.latent.fields.insert(field.clone(), String::new());
                    }
                }
            }
            Effect::AddLabel { kind } => {
                if let (Some(repo), Some(issue)) =
                    (state.latent.current_repo, state.latent.current_issue)
                {
                    if let Some(i) = state
                        .latent
                        .repos
                        .get_mut(repo)
                        .and_then(|r| r.issues.get_mut(issue))
                    {
                        if !i.labels.contains(kind) {
                            i.labels.push(kind.clone());
                        }
                    }
                }
            }
            Effect::StarCurrentRepo => {
                if let Some(repo) = state.latent.current_repo {
                    if let Some(r) = state.latent.repos.get_mut(repo) {
                        r.starred = true;
                    }
                }
            }
            Effect::NoEffect => {}
        }
    }
}

/// Try the site rule table; returns true when a rule fired.
fn apply_site_rules(spec: &SiteSpec, state: &mut SiteState, action: &PrimitiveAction) -> bool {
    let page = state.current_page().to_string();
    let (selector, typed, keys): (Option<&str>, Option<&str>, Option<&str>) = match action {
        PrimitiveAction::Click { selector } => (Some(selector), None, None),
        PrimitiveAction::Type { selector, text } => (Some(selector), Some(text), None),
        PrimitiveAction::Press { keys } => (None, None, Some(keys)),
        _ => return false,
    };
    if let Some(sel) = selector {
        if live_element(spec, state, sel).is_none() {
            return false;
        }
    }
    for rule in spec.rules.iter().filter(|r| r.page == page) {
        let row = match (&rule.pattern, action) {
            (RulePattern::Click { elem }, PrimitiveAction::Click { selector }) => {
                match elem.matches(selector) {
                    Some(row) => row,
                    None => continue,
                }
            }
            (RulePattern::Type { elem }, PrimitiveAction::Type { selector, .. }) => {
                match elem.matches(selector) {
                    Some(row) => row,
                    None => continue,
                }
            }
            (RulePattern::Press { keys: want }, PrimitiveAction::Press { .. }) => {
                if keys != Some(want.as_str()) {
                    continue;
                }
                None
            }
            _ => continue,
        };
        let matched_elem = selector.unwrap_or_default();
        if !rule
            .conditions
            .iter()
            .all(|c| condition_holds(c, state, matched_elem))
        {
            continue;
        }
        let ctx = MatchContext {
            row,
            typed: typed.map(str::to_string),
        };
        let effects = rule.effects.clone();
        apply_effects(spec, state, &effects, &ctx);
        return true;
    }
    false
}

/// Apply one primitive action. Always succeeds except for malformed input;
/// unmatched actions only advance the step counter.
pub fn step(
    spec: &SiteSpec,
    state: &mut SiteState,
    action: &PrimitiveAction,
) -> Result<Observation, SimError> {
    validate_action(action)?;
    let mut hovered_now = None;
    match action {
        PrimitiveAction::Noop => {}
        PrimitiveAction::Hover { selector } => {
            if live_element(spec, state, selector).is_some() {
                hovered_now = Some(selector.clone());
            }
        }
        PrimitiveAction::Scroll { direction } => {
            let tab = state.current_tab_mut();
            let delta = match direction {
                crate::dsl::ast::ScrollDirection::Down => 1,
                crate::dsl::ast::ScrollDirection::Up => -1,
            };
            tab.scroll = (tab.scroll + delta).clamp(0, 5);
        }
        PrimitiveAction::NewTab => {
            let home = spec.home_page().id.clone();
            state.tabs.push(TabState::at(home));
            state.focus = state.tabs.len() - 1;
        }
        PrimitiveAction::TabClose => {
            if state.tabs.len() > 1 {
                state.tabs.remove(state.focus);
                if state.focus >= state.tabs.len() {
                    state.focus = state.tabs.len() - 1;
                }
            }
        }
        PrimitiveAction::TabFocus { index } => {
            if *index >= 0 && (*index as usize) < state.tabs.len() {
                state.focus = *index as usize;
            }
        }
        PrimitiveAction::GoBack => {
            let tab = state.current_tab_mut();
            if tab.pos > 0 {
                tab.pos -= 1;
                tab.clear_transient();
            }
        }
        PrimitiveAction::GoForward => {
            let tab = state.current_tab_mut();
            if tab.pos + 1 < tab.history.len() {
                tab.pos += 1;
                tab.clear_transient();
            }
        }
        PrimitiveAction::Goto { url } => {
            if spec.page(url).is_some() {
                state.current_tab_mut().navigate(url.clone());
            }
        }
        PrimitiveAction::Click { .. }
        | PrimitiveAction::Type { .. }
        | PrimitiveAction::Press { .. } => {
            apply_site_rules(spec, state, action);
        }
    }
    state.current_tab_mut().hovered = hovered_now;
    state.steps += 1;
    Ok(observe(spec, state))
}

fn validate_action(action: &PrimitiveAction) -> Result<(), SimError> {
    let bad = |what: &str| {
        Err(SimError::MalformedAction {
            detail: format!("{what} must not be empty"),
        })
    };
    match action {
        PrimitiveAction::Click { selector }
        | PrimitiveAction::Hover { selector }
        | PrimitiveAction::Type { selector, .. }
            if selector.is_empty() =>
        {
            bad("selector")
        }
        PrimitiveAction::Press { keys } if keys.is_empty() => bad("key combination"),
        PrimitiveAction::Goto { url } if url.is_empty() => bad("url"),
        _ => Ok(()),
    }
}

/// Decidable success predicates over final state and the applied actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "id", content = "params", rename_all = "snake_case")]
pub enum Predicate {
    CartContains { item: String },
    OrderPlaced { item: String },
    WishlistContains { item: String },
    ItemViewed { item: String },
    Searched { query: String },
    /// State must carry the filter and the trajectory must show one of the
    /// site's filter controls being activated.
    FilterApplied { kind: String, via: Vec<String> },
    RepoExists { name: String },
    RepoStarred { name: String },
    IssueExists { title: String },
    IssueLabeled { title: String, label: String },
}

fn catalog_has(spec: &SiteSpec, indices: &[usize], item: &str) -> bool {
    indices
        .iter()
        .filter_map(|i| spec.catalog.get(*i))
        .any(|it| it.name == item)
}

/// Pure evaluation of a task's success predicate.
pub fn check_success(
    spec: &SiteSpec,
    task: &Task,
    final_state: &SiteState,
    actions: &[PrimitiveAction],
) -> bool {
    let latent = &final_state.latent;
    match &task.predicate {
        Predicate::CartContains { item } => catalog_has(spec, &latent.cart, item),
        Predicate::OrderPlaced { item } => catalog_has(spec, &latent.orders, item),
        Predicate::WishlistContains { item } => catalog_has(spec, &latent.wishlist, item),
        Predicate::ItemViewed { item } => catalog_has(spec, &latent.viewed, item),
        Predicate::Searched { query } => latent.query_history.iter().any(|q| q == query),
        Predicate::FilterApplied { kind, via } => {
            latent.filter_active.as_deref() == Some(kind.as_str())
                && actions.iter().any(|a| {
                    matches!(a, PrimitiveAction::Click { selector } if via.contains(selector))
                })
        }
        Predicate::RepoExists { name } => latent.repos.iter().any(|r| r.name == *name),
        Predicate::RepoStarred { name } => {
            latent.repos.iter().any(|r| r.name == *name && r.starred)
        }
        Predicate::IssueExists { title } => latent
            .repos
            .iter()
            .flat_map(|r| r.issues.iter())
            .any(|i| i.title == *title),
        Predicate::IssueLabeled { title, label } => latent
            .repos
            .iter()
            .flat_map(|r| r.issues.iter())
            .any(|i| i.title == *title && i.labels.contains(label)),
    }
}
