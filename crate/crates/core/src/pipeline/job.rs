//! Job lifecycle: `Pending` moves once to `Completed` or `Failed` and
//! never leaves a terminal state.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum JobState {
    Pending,
    Completed { result_id: String },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JobEvent {
    Complete { result_id: String },
    Fail { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("job in terminal state {from:?} cannot take {event:?}")]
pub struct JobTransitionError {
    pub from: JobState,
    pub event: JobEvent,
}

impl JobState {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, JobState::Pending)
    }

    pub fn apply(&self, event: JobEvent) -> Result<JobState, JobTransitionError> {
        match (self, event) {
            (JobState::Pending, JobEvent::Complete { result_id }) => Ok(JobState::Completed { result_id }),
            (JobState::Pending, JobEvent::Fail { reason }) => Ok(JobState::Failed { reason }),
            (from, event) => Err(JobTransitionError { from: from.clone(), event }),
        }
    }
}
