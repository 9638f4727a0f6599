//! AST for the `.skill` language: primitive actions, expressions, statements.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Scroll direction for the `scroll` primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScrollDirection {
    Up,
    Down,
}

impl ScrollDirection {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "up" => Some(ScrollDirection::Up),
            "down" => Some(ScrollDirection::Down),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScrollDirection::Up => "up",
            ScrollDirection::Down => "down",
        }
    }
}

/// The twelve primitive action kinds of the browser action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Noop,
    Click,
    Hover,
    Type,
    Press,
    Scroll,
    TabFocus,
    NewTab,
    TabClose,
    GoBack,
    GoForward,
    Goto,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 12] = [
        PrimitiveKind::Noop,
        PrimitiveKind::Click,
        PrimitiveKind::Hover,
        PrimitiveKind::Type,
        PrimitiveKind::Press,
        PrimitiveKind::Scroll,
        PrimitiveKind::TabFocus,
        PrimitiveKind::NewTab,
        PrimitiveKind::TabClose,
        PrimitiveKind::GoBack,
        PrimitiveKind::GoForward,
        PrimitiveKind::Goto,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            PrimitiveKind::Noop => "noop",
            PrimitiveKind::Click => "click",
            PrimitiveKind::Hover => "hover",
            PrimitiveKind::Type => "type",
            PrimitiveKind::Press => "press",
            PrimitiveKind::Scroll => "scroll",
            PrimitiveKind::TabFocus => "tab_focus",
            PrimitiveKind::NewTab => "new_tab",
            PrimitiveKind::TabClose => "tab_close",
            PrimitiveKind::GoBack => "go_back",
            PrimitiveKind::GoForward => "go_forward",
            PrimitiveKind::Goto => "goto",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.keyword() == word)
    }

    /// Fixed argument count per kind.
    pub fn arity(self) -> usize {
        match self {
            PrimitiveKind::Type => 2,
            PrimitiveKind::Click
            | PrimitiveKind::Hover
            | PrimitiveKind::Press
            | PrimitiveKind::Scroll
            | PrimitiveKind::TabFocus
            | PrimitiveKind::Goto => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A fully concrete primitive action, ready to be applied to a site state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimitiveAction {
    Noop,
    Click { selector: String },
    Hover { selector: String },
    Type { selector: String, text: String },
    Press { keys: String },
    Scroll { direction: ScrollDirection },
    TabFocus { index: i64 },
    NewTab,
    TabClose,
    GoBack,
    GoForward,
    Goto { url: String },
}

impl PrimitiveAction {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            PrimitiveAction::Noop => PrimitiveKind::Noop,
            PrimitiveAction::Click { .. } => PrimitiveKind::Click,
            PrimitiveAction::Hover { .. } => PrimitiveKind::Hover,
            PrimitiveAction::Type { .. } => PrimitiveKind::Type,
            PrimitiveAction::Press { .. } => PrimitiveKind::Press,
            PrimitiveAction::Scroll { .. } => PrimitiveKind::Scroll,
            PrimitiveAction::TabFocus { .. } => PrimitiveKind::TabFocus,
            PrimitiveAction::NewTab => PrimitiveKind::NewTab,
            PrimitiveAction::TabClose => PrimitiveKind::TabClose,
            PrimitiveAction::GoBack => PrimitiveKind::GoBack,
            PrimitiveAction::GoForward => PrimitiveKind::GoForward,
            PrimitiveAction::Goto { .. } => PrimitiveKind::Goto,
        }
    }

    /// The statement form of this action, for logging and replay.
    pub fn to_statement(&self) -> Statement {
        let args = match self {
            PrimitiveAction::Noop
            | PrimitiveAction::NewTab
            | PrimitiveAction::TabClose
            | PrimitiveAction::GoBack
            | PrimitiveAction::GoForward => vec![],
            PrimitiveAction::Click { selector } | PrimitiveAction::Hover { selector } => {
                vec![Expr::Lit(Value::Selector(selector.clone()))]
            }
            PrimitiveAction::Type { selector, text } => vec![
                Expr::Lit(Value::Selector(selector.clone())),
                Expr::Lit(Value::Text(text.clone())),
            ],
            PrimitiveAction::Press { keys } => vec![Expr::Lit(Value::Text(keys.clone()))],
            PrimitiveAction::Scroll { direction } => {
                vec![Expr::Lit(Value::Text(direction.as_str().to_string()))]
            }
            PrimitiveAction::TabFocus { index } => vec![Expr::Lit(Value::Integer(*index))],
            PrimitiveAction::Goto { url } => vec![Expr::Lit(Value::Text(url.clone()))],
        };
        Statement::Prim {
            kind: self.kind(),
            args,
        }
    }
}

/// A concrete argument value. Selectors carry the element id without the `#`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "t", content = "v", rename_all = "lowercase")]
pub enum Value {
    Text(String),
    Integer(i64),
    Selector(String),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Text(_) => "text",
            Value::Integer(_) => "integer",
            Value::Selector(_) => "selector",
        }
    }
}

/// An argument expression in a skill body: a literal or a parameter reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "t", content = "v", rename_all = "lowercase")]
pub enum Expr {
    Lit(Value),
    Param(String),
}

/// One statement of a skill body or an agent decision.
///
/// `Stop` is the distinguished end-of-episode signal. Policies may emit it;
/// skill bodies may not contain it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "stmt", rename_all = "lowercase")]
pub enum Statement {
    Prim { kind: PrimitiveKind, args: Vec<Expr> },
    Call { target: String, args: Vec<Expr> },
    Stop,
}

impl Statement {
    pub fn is_call(&self) -> bool {
        matches!(self, Statement::Call { .. })
    }

    /// Call target name, if this statement is a call.
    pub fn call_target(&self) -> Option<&str> {
        match self {
            Statement::Call { target, .. } => Some(target.as_str()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_matches_action_table() {
        assert_eq!(PrimitiveKind::Click.arity(), 1);
        assert_eq!(PrimitiveKind::Type.arity(), 2);
        assert_eq!(PrimitiveKind::Press.arity(), 1);
        assert_eq!(PrimitiveKind::Scroll.arity(), 1);
        assert_eq!(PrimitiveKind::TabFocus.arity(), 1);
        assert_eq!(PrimitiveKind::Goto.arity(), 1);
        assert_eq!(PrimitiveKind::Hover.arity(), 1);
        for k in [
            PrimitiveKind::Noop,
            PrimitiveKind::NewTab,
            PrimitiveKind::TabClose,
            PrimitiveKind::GoBack,
            PrimitiveKind::GoForward,
        ] {
            assert_eq!(k.arity(), 0);
        }
    }

    #[test]
    fn exactly_twelve_kinds() {
        assert_eq!(PrimitiveKind::ALL.len(), 12);
    }

    #[test]
    fn keyword_round_trip() {
        for k in PrimitiveKind::ALL {
            assert_eq!(PrimitiveKind::from_keyword(k.keyword()), Some(k));
        }
        assert_eq!(PrimitiveKind::from_keyword("clik"), None);
    }
}
