//! LM-backed judge, inducer, and proposer. All three speak the same
//! chat-completions contract as the remote policy and parse structured
//! replies; they are excluded from the deterministic acceptance suite and
//! covered by stub-transport tests.

use super::taskfree::ProposerBackend;
use super::{
    InducerBackend, InductionError, JudgeBackend, JudgeVerdict, Proposal, ProposedMethod,
    SiteIndex,
};
use crate::dsl::ast::{Expr, Statement, Value};
use crate::dsl::printer::{print_interface, print_statement};
use crate::dsl::{parse_skill_file, ParsedFile};
use crate::runtime::chat::{system, user, ChatClient};
use crate::runtime::Trajectory;
use crate::sim::{self, build_task, Observation, SiteSpec, Task};
use crate::skill_model::{ParamKind, SkillLibrary, SkillOrigin};
use std::sync::Arc;

const JUDGE_SYSTEM_PROMPT: &str = "\
You evaluate whether a web automation episode accomplished its task. You are \
given the task, the executed commands, and the final page. Weigh whether the \
required state changes actually happened; repeated no-op actions are a \
failure. Reply with two lines:
Thoughts: <one-line reasoning>
Status: success | failure";

const INDUCER_SYSTEM_PROMPT: &str = "\
You turn successful web automation episodes into reusable skills written in a \
small action language. A skill body is a straight-line sequence of commands: \
click(#id), hover(#id), type(#id, \"text\"), press(\"keys\"), scroll(\"up\"), \
tab_focus(N), new_tab, tab_close, go_back, go_forward, goto(\"page\"), or \
call name(args) for an existing skill. Arguments that vary between uses must \
become parameters (kinds: text, integer, selector).

Rules:
- If no interface exists for the site's category yet, output it first as an \
`interface <id> for <category> { sig ...; skill ... }` block.
- Then implement methods for this site in an `impl <interface> for <site> { \
induced skill ... }` block. Method names, arity, and parameter kinds must \
match the interface signatures exactly.
- Each method body must have at least 2 and at most 5 statements, and should \
be the reusable core of the episode, not the whole episode.
- Output only fenced code blocks containing these declarations.";

const PROPOSER_SYSTEM_PROMPT: &str = "\
You pick the next practice goal for a web agent exploring a site. Prefer \
capabilities the agent has not mastered yet. Reply with a single JSON object: \
{\"capability\": <name>, \"item\": <catalog item or \"\">, \"text\": <name \
text or \"\">} choosing the capability from the provided list.";

pub struct RemoteJudge {
    client: ChatClient,
    sites: Arc<SiteIndex>,
}

impl RemoteJudge {
    pub fn new(client: ChatClient, sites: Arc<SiteIndex>) -> Self {
        RemoteJudge { client, sites }
    }
}

impl JudgeBackend for RemoteJudge {
    fn id(&self) -> &str {
        "remote"
    }

    fn verdict(&self, traj: &Trajectory, task: &Task) -> Result<JudgeVerdict, InductionError> {
        if traj.task != task.id {
            return Err(InductionError::TaskMismatch {
                traj: traj.task.clone(),
                task: task.id.clone(),
            });
        }
        let spec = self
            .sites
            .get(&task.site)
            .ok_or_else(|| InductionError::UnknownSite {
                site: task.site.clone(),
            })?;
        let mut state = sim::initial_state(spec);
        for a in traj.primitives() {
            let _ = sim::step(spec, &mut state, &a);
        }
        let final_page = sim::observe(spec, &state).render();
        let actions: Vec<String> = traj
            .records
            .iter()
            .map(|r| print_statement(&r.statement))
            .collect();
        let reply = self
            .client
            .complete(&[
                system(JUDGE_SYSTEM_PROMPT),
                user(format!(
                    "Task: {}\n\nActions:\n{}\n\nFinal page:\n{}",
                    task.instruction,
                    actions.join("\n"),
                    final_page
                )),
            ])
            .map_err(|e| InductionError::ProposerFault {
                detail: e.to_string(),
            })?;
        let status = reply
            .lines()
            .rev()
            .find_map(|l| l.trim().strip_prefix("Status:"))
            .map(str::trim)
            .unwrap_or("");
        Ok(JudgeVerdict {
            success: status.eq_ignore_ascii_case("success"),
            rationale: reply.trim().to_string(),
        })
    }
}

pub struct RemoteInducer {
    client: ChatClient,
}

impl RemoteInducer {
    pub fn new(client: ChatClient) -> Self {
        RemoteInducer { client }
    }
}

/// Find argument values that make `body` expand to a contiguous window of
/// `prims`. Straight-line unification: literals must match, parameter slots
/// must bind consistently.
fn infer_instance_args(
    def: &crate::skill_model::SkillDef,
    prims: &[crate::dsl::ast::PrimitiveAction],
) -> Option<Vec<Value>> {
    let body_len = def.body.len();
    if body_len == 0 || prims.len() < body_len {
        return None;
    }
    // Only primitive-statement bodies can be unified without a library.
    if def.body.iter().any(|s| !matches!(s, Statement::Prim { .. })) {
        return None;
    }
    'windows: for start in 0..=(prims.len() - body_len) {
        let mut bound: std::collections::BTreeMap<&str, Value> = Default::default();
        for (stmt, action) in def.body.iter().zip(&prims[start..start + body_len]) {
            let Statement::Prim { kind, args } = stmt else {
                unreachable!()
            };
            let Statement::Prim {
                kind: akind,
                args: aargs,
            } = action.to_statement()
            else {
                unreachable!()
            };
            if *kind != akind || args.len() != aargs.len() {
                continue 'windows;
            }
            for (expr, actual) in args.iter().zip(&aargs) {
                let Expr::Lit(actual_value) = actual else {
                    continue 'windows;
                };
                match expr {
                    Expr::Lit(v) => {
                        if v != actual_value {
                            continue 'windows;
                        }
                    }
                    Expr::Param(name) => {
                        let declared = def.signature.params.iter().find(|p| p.name == *name);
                        let Some(declared) = declared else {
                            continue 'windows;
                        };
                        let kind_ok = matches!(
                            (&declared.kind, actual_value),
                            (ParamKind::Text, Value::Text(_))
                                | (ParamKind::Integer, Value::Integer(_))
                                | (ParamKind::Selector, Value::Selector(_))
                        );
                        if !kind_ok {
                            continue 'windows;
                        }
                        match bound.get(name.as_str()) {
                            None => {
                                bound.insert(name, actual_value.clone());
                            }
                            Some(prev) if prev == actual_value => {}
                            Some(_) => continue 'windows,
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        for p in &def.signature.params {
            match bound.get(p.name.as_str()) {
                Some(v) => out.push(v.clone()),
                None => continue 'windows,
            }
        }
        return Some(out);
    }
    None
}

/// Pull fenced code blocks out of a model reply; a bare reply is treated as
/// one block.
fn code_blocks(reply: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in reply.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(block) => blocks.push(block),
                None => current = Some(String::new()),
            }
            continue;
        }
        if let Some(block) = current.as_mut() {
            block.push_str(line);
            block.push('\n');
        }
    }
    if blocks.is_empty() && current.is_none() && !reply.trim().is_empty() {
        blocks.push(reply.to_string());
    }
    blocks
}

impl InducerBackend for RemoteInducer {
    fn id(&self) -> &str {
        "remote"
    }

    fn propose(
        &mut self,
        traj: &Trajectory,
        lib: &SkillLibrary,
        category: &str,
    ) -> Result<Option<Proposal>, InductionError> {
        let existing = lib
            .interface_for_category(category)
            .map(print_interface)
            .unwrap_or_else(|| format!("(no interface for `{category}` yet)"));
        let statements: Vec<String> = traj
            .records
            .iter()
            .map(|r| print_statement(&r.statement))
            .collect();
        let reply = self
            .client
            .complete(&[
                system(INDUCER_SYSTEM_PROMPT),
                user(format!(
                    "Site: {site}\nCategory: {category}\nCurrent interface:\n{existing}\n\n\
                     Successful episode:\n{stmts}",
                    site = traj.site,
                    stmts = statements.join("\n"),
                )),
            ])
            .map_err(|e| InductionError::InducerFault {
                detail: e.to_string(),
            })?;

        let mut proposal = Proposal::default();
        let prims = traj.primitives();
        for block in code_blocks(&reply) {
            let parsed = parse_skill_file(&block).map_err(|e| InductionError::InducerFault {
                detail: format!("unparseable proposal block: {e}"),
            })?;
            match parsed {
                ParsedFile::Interface(iface) => proposal.interface = Some(iface),
                ParsedFile::Implementation(imp) => {
                    for (_, mut def) in imp.methods {
                        def.origin = SkillOrigin::Induced;
                        let instance_args =
                            infer_instance_args(&def, &prims).ok_or_else(|| {
                                InductionError::InducerFault {
                                    detail: format!(
                                        "cannot ground `{}` in the trajectory",
                                        def.signature.name
                                    ),
                                }
                            })?;
                        proposal.methods.push(ProposedMethod {
                            site: imp.site.clone(),
                            def,
                            instance_args,
                        });
                    }
                }
            }
        }
        if proposal.is_empty() {
            return Ok(None);
        }
        Ok(Some(proposal))
    }
}

pub struct RemoteProposer {
    client: ChatClient,
    counter: usize,
}

impl RemoteProposer {
    pub fn new(client: ChatClient) -> Self {
        RemoteProposer { client, counter: 0 }
    }
}

impl ProposerBackend for RemoteProposer {
    fn id(&self) -> &str {
        "remote"
    }

    fn propose_task(
        &mut self,
        spec: &SiteSpec,
        observation: &Observation,
        lib: &SkillLibrary,
    ) -> Result<Task, InductionError> {
        let implemented: Vec<&str> = lib
            .interface_for_category(&spec.category)
            .and_then(|iface| lib.implementation(&spec.id, &iface.id))
            .map(|imp| imp.methods.keys().map(String::as_str).collect())
            .unwrap_or_default();
        let reply = self
            .client
            .complete(&[
                system(PROPOSER_SYSTEM_PROMPT),
                user(format!(
                    "Site: {}\nCapabilities: {}\nAlready mastered: {}\nCatalog: {}\nNames: {}\n\nCurrent page:\n{}",
                    spec.id,
                    spec.capabilities.join(", "),
                    if implemented.is_empty() {
                        "none".into()
                    } else {
                        implemented.join(", ")
                    },
                    spec.catalog
                        .iter()
                        .map(|i| i.name.as_str())
                        .collect::<Vec<_>>()
                        .join(", "),
                    spec.text_pool.join(", "),
                    observation.render(),
                )),
            ])
            .map_err(|e| InductionError::ProposerFault {
                detail: e.to_string(),
            })?;
        let json_start = reply.find('{').ok_or_else(|| InductionError::ProposerFault {
            detail: "reply contains no JSON object".into(),
        })?;
        let json_end = reply.rfind('}').ok_or_else(|| InductionError::ProposerFault {
            detail: "reply contains no JSON object".into(),
        })?;
        #[derive(serde::Deserialize)]
        struct Choice {
            capability: String,
            #[serde(default)]
            item: String,
            #[serde(default)]
            text: String,
        }
        let choice: Choice = serde_json::from_str(&reply[json_start..=json_end]).map_err(|e| {
            InductionError::ProposerFault {
                detail: format!("bad proposer JSON: {e}"),
            }
        })?;
        let item = if choice.item.is_empty() && !spec.catalog.is_empty() {
            spec.catalog[self.counter % spec.catalog.len()].name.clone()
        } else {
            choice.item
        };
        let text = if choice.text.is_empty() && !spec.text_pool.is_empty() {
            spec.text_pool[self.counter % spec.text_pool.len()].clone()
        } else {
            choice.text
        };
        let id = format!("r{:03}-{}-{}", self.counter, spec.id, choice.capability);
        self.counter += 1;
        let (task, _plan) = build_task(spec, id, &choice.capability, &item, &text, self.counter)
            .map_err(|e| InductionError::ProposerFault {
                detail: format!("cannot realize proposed goal: {e}"),
            })?;
        Ok(task)
    }
}
