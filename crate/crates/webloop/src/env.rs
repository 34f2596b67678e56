//! Environment abstraction the episode loops run against.

use crate::action::Action;
use crate::trajectory::Observation;
use thiserror::Error;

/// Result of applying one action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    /// The environment advanced to a new (or unchanged) page.
    Observation(Observation),
    /// The episode ended. `answer` carries the stop answer when the episode
    /// ended on a `stop` action.
    Terminal { answer: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("environment error: {0}")]
pub struct EnvError(pub String);

/// A web environment: a current page view plus deterministic transitions.
pub trait WebEnv {
    /// The current page view. Calling this repeatedly without an intervening
    /// [`WebEnv::apply`] returns the same observation.
    fn observation(&self) -> Observation;

    /// Executes one action.
    fn apply(&mut self, action: &Action) -> Result<StepOutcome, EnvError>;

    /// True once a terminal state has been reached.
    fn terminated(&self) -> bool;
}
