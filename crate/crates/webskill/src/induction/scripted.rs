//! Deterministic inducer for fixtures and tests.
//!
//! It extracts the span of the task's target capability from the plan the
//! trajectory was generated from, names the skill after the capability tag,
//! and parameterizes it over the task's argument values. The abstract
//! interface is proposed first whenever the category has none.

use super::{InducerBackend, InductionError, Proposal, ProposedMethod};
use crate::dsl::ast::Value;
use crate::runtime::{PlanStore, Trajectory};
use crate::sim::TaskPlan;
use crate::skill_model::{SkillDef, SkillLibrary, SkillOrigin, SkillSignature};

pub struct ScriptedInducer {
    store: PlanStore,
}

impl ScriptedInducer {
    pub fn new(store: PlanStore) -> Self {
        ScriptedInducer { store }
    }

    /// The capability this trajectory should contribute: the task's target,
    /// or for composite tasks the first chain leg the site lacks.
    fn target_capability<'a>(plan: &'a TaskPlan, lib: &SkillLibrary) -> Option<&'a str> {
        let implemented = |cap: &str| {
            lib.interface_for_category(&plan.category)
                .and_then(|iface| lib.implementation(&plan.site, &iface.id))
                .is_some_and(|imp| imp.methods.contains_key(cap))
        };
        if plan.composite.is_some() {
            plan.steps
                .iter()
                .map(|s| s.capability.as_str())
                .find(|c| !implemented(c))
        } else {
            let target = plan.steps.last()?.capability.as_str();
            (!implemented(target)).then_some(target)
        }
    }
}

impl InducerBackend for ScriptedInducer {
    fn id(&self) -> &str {
        "scripted"
    }

    fn propose(
        &mut self,
        traj: &Trajectory,
        lib: &SkillLibrary,
        category: &str,
    ) -> Result<Option<Proposal>, InductionError> {
        let store = self.store.lock().expect("plan store lock");
        let Some(plan) = store.get(&traj.task) else {
            return Err(InductionError::InducerFault {
                detail: format!("no plan recorded for task `{}`", traj.task),
            });
        };
        let interface = if lib.interface_for_category(category).is_none() {
            Some(super::interface_schema(category).ok_or_else(|| {
                InductionError::InducerFault {
                    detail: format!("no interface schema for category `{category}`"),
                }
            })?)
        } else {
            None
        };

        let method = Self::target_capability(plan, lib).map(|cap| {
            let step = plan.step_for(cap).expect("target is a chain step");
            let instance_args: Vec<Value> = step
                .params
                .iter()
                .map(|p| step.values[&p.name].clone())
                .collect();
            ProposedMethod {
                site: plan.site.clone(),
                def: SkillDef {
                    signature: SkillSignature {
                        name: step.capability.clone(),
                        params: step.params.clone(),
                        doc: String::new(),
                    },
                    body: step.span_template.clone(),
                    origin: SkillOrigin::Induced,
                    created_at: 0,
                },
                instance_args,
            }
        });

        match (interface, method) {
            (None, None) => Ok(None),
            (interface, method) => Ok(Some(Proposal {
                interface,
                methods: method.into_iter().collect(),
            })),
        }
    }
}
