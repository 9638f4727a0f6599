//! LM-backed policy speaking the chat-completions contract.

use super::chat::{system, user, ChatClient, ChatError, Message};
use super::{PolicyBackend, PolicyContext, PolicyError};
use crate::dsl::ast::Statement;
use crate::dsl::parser::parse_statement;
use crate::dsl::printer::print_signature;
use crate::sim::Task;

const POLICY_SYSTEM_PROMPT: &str = "\
You control a web browser through single-line commands. Reply with exactly one \
command and nothing else.

Primitive commands:
  noop | click(#id) | hover(#id) | type(#id, \"text\") | press(\"keys\") | \
scroll(\"up\"|\"down\") | tab_focus(N) | new_tab | tab_close | go_back | \
go_forward | goto(\"page\")

Skill commands (when skills are listed):
  call name(args...)   e.g. call search(\"socks\")

End the episode with:
  stop";

/// Policy backed by a remote chat model. Malformed replies are retried; after
/// the configured attempts the episode records a policy fault.
pub struct RemotePolicy {
    client: ChatClient,
    name: String,
}

impl RemotePolicy {
    pub fn new(client: ChatClient) -> Self {
        RemotePolicy {
            client,
            name: "remote".into(),
        }
    }

    fn build_messages(&self, ctx: &PolicyContext<'_>) -> Vec<Message> {
        let mut skills = String::new();
        for (id, sig) in ctx.available {
            skills.push_str(&format!("  {} — {}\n", print_signature(sig), id));
        }
        let skills_block = if skills.is_empty() {
            "No skills are available yet.".to_string()
        } else {
            format!("Available skills:\n{skills}")
        };
        let mut history = String::new();
        for (digest, stmt) in ctx.memory.history.iter() {
            history.push_str(&format!("  [{}] {}\n", &digest[..8.min(digest.len())], stmt));
        }
        if history.is_empty() {
            history = "  (none)\n".into();
        }
        vec![
            system(POLICY_SYSTEM_PROMPT),
            user(format!(
                "Task: {}\n\n{}\nActions so far:\n{}\nCurrent page:\n{}",
                ctx.memory.instruction,
                skills_block,
                history,
                ctx.observation.render(),
            )),
        ]
    }
}

/// Parse the first nonempty line of a model reply as one statement.
pub fn parse_reply(reply: &str) -> Result<Statement, String> {
    let line = reply
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| "empty reply".to_string())?;
    let line = line
        .trim_start_matches("```")
        .trim_end_matches("```")
        .trim();
    parse_statement(line).map_err(|e| format!("`{line}`: {e}"))
}

impl PolicyBackend for RemotePolicy {
    fn id(&self) -> &str {
        &self.name
    }

    fn on_reset(&mut self, _task: &Task) {}

    fn propose(&mut self, ctx: &PolicyContext<'_>) -> Result<Statement, PolicyError> {
        let messages = self.build_messages(ctx);
        let attempts = self.client.config.retries + 1;
        let mut last = String::new();
        for _ in 0..attempts {
            match self.client.complete(&messages) {
                Ok(reply) => match parse_reply(&reply) {
                    Ok(stmt) => return Ok(stmt),
                    Err(e) => last = e,
                },
                Err(ChatError::Transport(e)) => {
                    return Err(PolicyError::Transport { detail: e });
                }
                Err(ChatError::Envelope(e)) => last = e,
            }
        }
        Err(PolicyError::MalformedReply {
            detail: last,
            attempts,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::chat::testing::StubTransport;
    use super::super::chat::ChatConfig;
    use super::*;
    use crate::dsl::ast::PrimitiveKind;
    use crate::runtime::execute_task;
    use crate::sim::{generate_site_family, Predicate};

    fn stub_policy(replies: Vec<&str>) -> RemotePolicy {
        let mut config = ChatConfig::default();
        config.retries = 2;
        RemotePolicy::new(ChatClient::with_transport(
            config,
            StubTransport::new(replies),
        ))
    }

    fn probe_ctx_parts() -> (crate::sim::SiteSpec, crate::sim::Task) {
        let spec = generate_site_family("shopping", 1, 3).unwrap().remove(0);
        let task = crate::sim::Task {
            id: "p".into(),
            instruction: "probe".into(),
            site: spec.id.clone(),
            predicate: Predicate::Searched { query: "nothing matches this".into() },
            horizon: 3,
            capability: String::new(),
        };
        (spec, task)
    }

    #[test]
    fn fixed_stub_reply_parses_to_click() {
        let stmt = parse_reply("click(#q)").unwrap();
        assert!(matches!(
            stmt,
            Statement::Prim {
                kind: PrimitiveKind::Click,
                ..
            }
        ));
    }

    #[test]
    fn call_reply_parses_to_call_statement() {
        let stmt = parse_reply("CALL search(\"mug\")").unwrap();
        assert_eq!(stmt.call_target(), Some("search"));
    }

    #[test]
    fn garbage_replies_exhaust_retries_into_a_policy_fault() {
        let (spec, task) = probe_ctx_parts();
        let mut policy = stub_policy(vec!["???", "???", "???"]);
        let lib = crate::skill_model::SkillLibrary::new();
        let traj = execute_task(&spec, &task, &lib, &mut policy, 4).unwrap();
        assert!(!traj.success);
        let fault = traj.fault.expect("fault recorded");
        assert!(fault.contains("3 attempt(s)"), "{fault}");
    }

    #[test]
    fn prompt_lists_available_skills_and_observation() {
        let (spec, task) = probe_ctx_parts();
        let mut policy = stub_policy(vec!["stop"]);
        let lib = crate::skill_model::SkillLibrary::new();
        let traj = execute_task(&spec, &task, &lib, &mut policy, 2).unwrap();
        assert_eq!(traj.wall_steps, 1);
        assert!(matches!(traj.records[0].statement, Statement::Stop));
    }
}
