use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Role, WorkflowError};
use crate::template::fill;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleTemplate {
    /// System message; empty means none.
    pub system: String,
    /// User message. Placeholders: `{query}`, `{solution}`, `{solutions}`, `{n}`.
    pub user: String,
}

/// The prompt text an agent run receives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolePrompt {
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet(pub BTreeMap<Role, RoleTemplate>);

macro_rules! template {
    ($role:literal) => {
        RoleTemplate {
            system: include_str!(concat!("../../config/prompts/", $role, ".system.txt")).trim_end().to_string(),
            user: include_str!(concat!("../../config/prompts/", $role, ".user.txt")).to_string(),
        }
    };
}

impl Default for PromptSet {
    fn default() -> Self {
        Self(BTreeMap::from([
            (Role::Solver, template!("solver")),
            (Role::Critic, template!("critic")),
            (Role::Rewriter, template!("rewriter")),
            (Role::Selector, template!("selector")),
        ]))
    }
}

impl PromptSet {
    pub fn get(&self, role: Role) -> &RoleTemplate {
        self.0
            .get(&role)
            .unwrap_or_else(|| panic!("no template for {role:?}"))
    }

    /// Fills the role's template. Solver takes no candidates, Critic exactly
    /// one, Rewriter and Selector at least one.
    pub fn build(&self, role: Role, query: &str, candidates: &[String]) -> Result<RolePrompt, WorkflowError> {
        let ok = match role {
            Role::Solver => candidates.is_empty(),
            Role::Critic => candidates.len() == 1,
            Role::Rewriter | Role::Selector => !candidates.is_empty(),
        };
        if !ok {
            return Err(WorkflowError::ArityMismatch {
                role,
                got: candidates.len(),
            });
        }
        let n = candidates.len().to_string();
        let solution = candidates.first().map(String::as_str).unwrap_or("");
        let solutions = label_candidates(candidates);
        let vars = [
            ("query", query),
            ("solution", solution),
            ("solutions", solutions.as_str()),
            ("n", n.as_str()),
        ];
        let t = self.get(role);
        Ok(RolePrompt {
            system: fill(&t.system, &vars),
            user: fill(&t.user, &vars),
        })
    }
}

pub fn build_role_prompt(role: Role, query: &str, candidates: &[String]) -> Result<RolePrompt, WorkflowError> {
    PromptSet::default().build(role, query, candidates)
}

/// `## Solution k` blocks, numbered from 1 in input order.
pub fn label_candidates(candidates: &[String]) -> String {
    let mut out = String::new();
    for (i, c) in candidates.iter().enumerate() {
        out.push_str(&format!("## Solution {}\n{}\n\n", i + 1, c.trim_end()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cands(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("candidate {i}\nFinal Answer: {i}")).collect()
    }

    #[test]
    fn arity() {
        assert!(matches!(
            build_role_prompt(Role::Critic, "q", &cands(2)),
            Err(WorkflowError::ArityMismatch { role: Role::Critic, got: 2 })
        ));
        assert!(build_role_prompt(Role::Rewriter, "q", &[]).is_err());
        assert!(build_role_prompt(Role::Solver, "q", &cands(1)).is_err());
        assert!(build_role_prompt(Role::Selector, "q", &cands(1)).is_ok());
    }

    #[test]
    fn rewriter_blocks_in_order() {
        let p = build_role_prompt(Role::Rewriter, "q", &cands(5)).unwrap();
        let positions: Vec<usize> = (1..=5)
            .map(|i| p.user.find(&format!("## Solution {i}\ncandidate {i}\n")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p.user.matches("## Solution ").count(), 5);
    }

    #[test]
    fn solver_is_the_bare_query() {
        let p = build_role_prompt(Role::Solver, "What is 2+2?", &[]).unwrap();
        assert_eq!(p.system, "");
        assert_eq!(p.user, "What is 2+2?");
    }

    #[test]
    fn placeholders_in_values_are_not_expanded() {
        let p = build_role_prompt(Role::Critic, "{solution}", &["{query}".to_string()]).unwrap();
        assert!(p.user.contains("Question:\n{solution}\n"));
        assert!(p.user.contains("Proposed solution:\n{query}\n"));
    }
}
