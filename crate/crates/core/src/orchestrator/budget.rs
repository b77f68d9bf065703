use std::collections::BTreeMap;

use crate::protocol::Budgets;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub exchanges: u32,
    pub replan_requests: u32,
    /// Local revisions per phase index of the live plan.
    pub revisions: BTreeMap<u32, u32>,
}

impl Counters {
    pub fn revisions_of(&self, phase: u32) -> u32 {
        self.revisions.get(&phase).copied().unwrap_or(0)
    }
}

/// What the run is about to spend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spend {
    Exchange,
    LocalRevision { phase: u32 },
    ReplanRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetCheck {
    Continue,
    ForceStopNow,
    BudgetExhausted,
}

/// Decides whether `next` fits the budgets.
///
/// The exchange limit only applies with force stop enabled. Revision and
/// replan-request limits always apply.
pub fn enforce_budget(counters: &Counters, budgets: &Budgets, next: Spend) -> BudgetCheck {
    match next {
        Spend::Exchange if budgets.force_stop_enabled && counters.exchanges >= budgets.max_exchanges => {
            BudgetCheck::ForceStopNow
        }
        Spend::Exchange => BudgetCheck::Continue,
        Spend::LocalRevision { phase } if counters.revisions_of(phase) >= budgets.max_local_revisions_per_phase => {
            BudgetCheck::BudgetExhausted
        }
        Spend::ReplanRequest if counters.replan_requests >= budgets.max_replan_requests_per_task => {
            BudgetCheck::BudgetExhausted
        }
        _ => BudgetCheck::Continue,
    }
}

/// Upper bound on LLM calls for a run with force stop disabled.
///
/// Every agent call may take one repair call, so each counts twice.
/// `max_phases` bounds the length of any plan the planner issues.
pub fn exchange_bound(budgets: &Budgets, max_phases: u32) -> u32 {
    let per_phase = 2 * (2 + 2 * budgets.max_local_revisions_per_phase);
    let per_plan = max_phases * per_phase;
    // decide and revise, or decide and the overrule guidance call
    let ruling = 2 * 2;
    let after_ruling = per_plan.max(2 * 2);
    2 + per_plan + budgets.max_replan_requests_per_task * (ruling + after_ruling) + 1
}
