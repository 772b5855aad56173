//! Infrastructure attacker models checked against a bounded protocol model.

pub mod conditions;
pub mod email;
pub mod exec;
pub mod graph;
pub mod picalc;
pub mod pipeline;
pub mod planner;
pub mod queries;
pub mod transforms;
