//! Iterative teacher-student loop for web-navigation agents.
//!
//! A large "teacher" model plays web tasks with retrieval-augmented prompting,
//! its trajectories are distilled into a small "student" policy through
//! speculative data synthesis, the student explores the environment on its
//! own, and everything it discovers feeds back into the teacher's knowledge
//! base. A hybrid privacy router keeps sensitive steps on a local backend,
//! and a deterministic simulated web environment makes the whole loop
//! testable on a desk, without external model services.
//!
//! Module map:
//! - [`action`] / [`trajectory`]: the action DSL and episode records.
//! - [`gateway`]: uniform access to remote and scripted model backends.
//! - [`knowledge`]: the validated sub-trajectory store and its retrievers.
//! - [`ragagent`]: the retrieval-augmented episode loop.
//! - [`distill`]: speculative step filtering and multi-task dataset export.
//! - [`privacy`]: sensitive-content detection and cloud/local routing.
//! - [`sim`]: simulated sites, tasks, oracle teacher, and tabular student.
//! - [`harness`]: the full iteration driver, synergy metric, and reports.

pub mod action;
pub mod distill;
pub mod env;
pub mod gateway;
pub mod harness;
pub mod knowledge;
pub mod privacy;
pub mod ragagent;
pub mod sim;
pub mod trajectory;

pub use action::{normalize_action, parse_action, render_action, Action, ParseError};
pub use trajectory::{split_subsequences, Observation, Step, Trajectory};
