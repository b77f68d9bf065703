//! Two-level web agent: a global planner splits a task into phases, a
//! local executor carries each phase out against a simulated website, and
//! the two negotiate plan changes through a budgeted exchange protocol.

pub mod env;
pub mod executor;
pub mod harness;
pub mod llm;
pub mod orchestrator;
pub mod planner;
pub mod prompts;
pub mod protocol;
pub mod transcript;
