//! In-memory registry of long-running optimize and simulate jobs.
//!
//! A job moves Queued -> Running -> Done or Failed, never backwards, and its
//! progress never decreases. Compute runs on the blocking pool behind a
//! semaphore so at most `max_concurrent_jobs` run at once. Optimize jobs on
//! the same target area additionally run one after another.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use firecover_core::optimizer::ParetoResult;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::error::{ErrorDetail, ServiceError, ServiceResult};
use crate::ops::SimulateResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Optimize,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_active(self) -> bool {
        matches!(self, JobState::Queued | JobState::Running)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct JobHandle {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    /// Fraction complete in `[0, 1]`.
    pub progress: f64,
    /// Where to fetch the result once the job is done.
    pub result: Option<String>,
    pub error: Option<ErrorDetail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum JobOutput {
    Pareto(ParetoResult),
    Simulation(SimulateResult),
}

struct Entry {
    handle: JobHandle,
    output: Option<Arc<JobOutput>>,
}

#[derive(Default)]
struct Inner {
    next: u64,
    jobs: BTreeMap<u64, Entry>,
    /// Keyed by serialized target area.
    area_gates: BTreeMap<String, Arc<tokio::sync::Mutex<()>>>,
}

pub struct JobStore {
    inner: Mutex<Inner>,
    permits: Arc<Semaphore>,
}

fn parse_id(id: &str) -> Option<u64> {
    id.strip_prefix("job-")?.parse().ok()
}

impl JobStore {
    pub fn new(max_concurrent: usize) -> Self {
        JobStore { inner: Mutex::new(Inner::default()), permits: Arc::new(Semaphore::new(max_concurrent.max(1))) }
    }

    pub fn permits(&self) -> Arc<Semaphore> {
        self.permits.clone()
    }

    /// Registers a queued job.
    pub fn create(&self, kind: JobKind) -> JobHandle {
        let mut inner = self.inner.lock().expect("job store lock");
        inner.next += 1;
        let n = inner.next;
        let handle = JobHandle {
            id: format!("job-{n}"),
            kind,
            state: JobState::Queued,
            progress: 0.0,
            result: None,
            error: None,
        };
        inner.jobs.insert(n, Entry { handle: handle.clone(), output: None });
        handle
    }

    /// Lock serializing optimize jobs that share a target area.
    pub fn area_gate(&self, area_key: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut inner = self.inner.lock().expect("job store lock");
        inner.area_gates.entry(area_key.to_string()).or_default().clone()
    }

    fn with<T>(&self, id: &str, f: impl FnOnce(&mut Entry) -> T) -> ServiceResult<T> {
        let mut inner = self.inner.lock().expect("job store lock");
        parse_id(id)
            .and_then(|n| inner.jobs.get_mut(&n))
            .map(f)
            .ok_or_else(|| ServiceError::JobNotFound(id.to_string()))
    }

    pub fn get(&self, id: &str) -> ServiceResult<JobHandle> {
        self.with(id, |e| e.handle.clone())
    }

    pub fn list(&self) -> Vec<JobHandle> {
        self.inner.lock().expect("job store lock").jobs.values().map(|e| e.handle.clone()).collect()
    }

    pub fn mark_running(&self, id: &str) {
        let _ = self.with(id, |e| {
            if e.handle.state == JobState::Queued {
                e.handle.state = JobState::Running;
            }
        });
    }

    pub fn set_progress(&self, id: &str, fraction: f64) {
        let _ = self.with(id, |e| {
            if e.handle.state == JobState::Running {
                e.handle.progress = e.handle.progress.max(fraction.clamp(0.0, 1.0));
            }
        });
    }

    pub fn finish(&self, id: &str, outcome: ServiceResult<JobOutput>) {
        let _ = self.with(id, |e| {
            if !e.handle.state.is_active() {
                return;
            }
            match outcome {
                Ok(out) => {
                    e.handle.state = JobState::Done;
                    e.handle.progress = 1.0;
                    e.handle.result = Some(format!("/api/jobs/{}/result", e.handle.id));
                    e.output = Some(Arc::new(out));
                }
                Err(err) => {
                    e.handle.state = JobState::Failed;
                    e.handle.error = Some(err.body().error);
                }
            }
        });
    }

    /// Output of a finished job; a conflict while it is still active.
    pub fn output(&self, id: &str) -> ServiceResult<Arc<JobOutput>> {
        self.with(id, |e| match (&e.output, e.handle.state) {
            (Some(out), _) => Ok(out.clone()),
            (None, JobState::Failed) => Err(ServiceError::Conflict(format!(
                "job {} failed: {}",
                e.handle.id,
                e.handle.error.as_ref().map(|d| d.message.as_str()).unwrap_or("unknown error")
            ))),
            (None, _) => Err(ServiceError::Conflict(format!("job {} has not finished", e.handle.id))),
        })?
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifecycle_is_forward_only() {
        let store = JobStore::new(1);
        let h = store.create(JobKind::Simulate);
        assert_eq!(h.state, JobState::Queued);
        store.set_progress(&h.id, 0.5);
        assert_eq!(store.get(&h.id).unwrap().progress, 0.0);
        store.mark_running(&h.id);
        store.set_progress(&h.id, 0.5);
        store.set_progress(&h.id, 0.2);
        assert_eq!(store.get(&h.id).unwrap().progress, 0.5);
        assert!(matches!(store.output(&h.id), Err(ServiceError::Conflict(_))));
        store.finish(&h.id, Err(ServiceError::BadRequest("boom".into())));
        store.mark_running(&h.id);
        let done = store.get(&h.id).unwrap();
        assert_eq!(done.state, JobState::Failed);
        assert_eq!(done.error.unwrap().kind, "bad_request");
        assert!(matches!(store.get("job-99"), Err(ServiceError::JobNotFound(_))));
        assert!(matches!(store.get("nonsense"), Err(ServiceError::JobNotFound(_))));
    }

    #[tokio::test]
    async fn same_area_jobs_share_a_gate() {
        let store = JobStore::new(2);
        let a = store.area_gate("A");
        let b = store.area_gate("B");
        let _held = a.lock().await;
        assert!(store.area_gate("A").try_lock().is_err());
        assert!(b.try_lock().is_ok());
    }
}
