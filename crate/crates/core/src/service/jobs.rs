use std::collections::HashMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;

use serde::{Deserialize, Serialize};

use super::{list_capabilities, polymer_range, run_pipeline_with, Capabilities, LoadedDataset, RunRequest};
use crate::dataset::RangeSummary;
use crate::error::{Error, Result};
use crate::report::{build_report, RunArtifacts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunState {
    Queued,
    Processing,
    Done,
    Failed,
}

impl RunState {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunState::Done | RunState::Failed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub run_id: String,
    pub state: RunState,
    pub message: String,
    /// Stage currently executing.
    pub stage: Option<String>,
    /// Machine-readable error code of a failed run.
    pub error_code: Option<String>,
}

struct Job {
    id: String,
    request: RunRequest,
    dataset: Arc<LoadedDataset>,
}

struct Inner {
    dataset: RwLock<Arc<LoadedDataset>>,
    cache: Mutex<HashMap<String, Arc<RunArtifacts>>>,
    status: Mutex<HashMap<String, RunStatus>>,
    queue: Mutex<Sender<Job>>,
}

/// Shared handle to the loaded dataset, the result cache and the job table.
/// Runs submitted with [`Service::submit`] execute on a fixed pool of
/// worker threads.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

impl Service {
    pub fn new(dataset: LoadedDataset, workers: usize) -> Self {
        let (tx, rx) = channel::<Job>();
        let inner = Arc::new(Inner {
            dataset: RwLock::new(Arc::new(dataset)),
            cache: Mutex::new(HashMap::new()),
            status: Mutex::new(HashMap::new()),
            queue: Mutex::new(tx),
        });
        let rx = Arc::new(Mutex::new(rx));
        for k in 0..workers.max(1) {
            let (inner, rx) = (Arc::clone(&inner), Arc::clone(&rx));
            thread::Builder::new()
                .name(format!("run-worker-{k}"))
                .spawn(move || worker(&inner, &rx))
                .expect("spawn worker thread");
        }
        Service { inner }
    }

    pub fn dataset(&self) -> Arc<LoadedDataset> {
        Arc::clone(&self.inner.dataset.read().expect("dataset lock"))
    }

    /// Swaps in a new dataset; runs keyed by the old fingerprint become
    /// unreachable and the cache is cleared.
    pub fn reload(&self, dataset: LoadedDataset) {
        *self.inner.dataset.write().expect("dataset lock") = Arc::new(dataset);
        self.inner.cache.lock().expect("cache lock").clear();
    }

    pub fn capabilities(&self) -> Capabilities {
        list_capabilities(&self.dataset())
    }

    pub fn range(&self, polymer: &str) -> Result<RangeSummary> {
        polymer_range(&self.dataset(), polymer)
    }

    /// Queues a run and returns its id. Identical requests against the same
    /// dataset share one id; a cached or in-flight run is not repeated.
    pub fn submit(&self, request: RunRequest) -> Result<String> {
        request.inputs.validate()?;
        let dataset = self.dataset();
        let id = run_id(&request, &dataset);
        let cached = self.inner.cache.lock().expect("cache lock").contains_key(&id);
        let mut status = self.inner.status.lock().expect("status lock");
        let previous = status.get(&id).map(|s| s.state);
        if cached {
            status.insert(id.clone(), done(&id));
            return Ok(id);
        }
        if matches!(previous, Some(RunState::Queued | RunState::Processing | RunState::Done)) {
            return Ok(id);
        }
        status.insert(
            id.clone(),
            RunStatus { run_id: id.clone(), state: RunState::Queued, message: "WAIT... QUEUED".into(), stage: None, error_code: None },
        );
        drop(status);
        self.inner
            .queue
            .lock()
            .expect("queue lock")
            .send(Job { id: id.clone(), request: request.resolved(), dataset })
            .map_err(|_| Error::InvalidInput("run workers have stopped".into()))?;
        Ok(id)
    }

    /// Runs in the calling thread, sharing the cache with queued runs.
    pub fn run_sync(&self, request: &RunRequest) -> Result<(String, Arc<RunArtifacts>)> {
        request.inputs.validate()?;
        let dataset = self.dataset();
        let id = run_id(request, &dataset);
        if let Some(a) = self.inner.cache.lock().expect("cache lock").get(&id) {
            return Ok((id, Arc::clone(a)));
        }
        let artifacts = Arc::new(run_pipeline_with(&dataset, request, &|_| {})?);
        self.inner.cache.lock().expect("cache lock").insert(id.clone(), Arc::clone(&artifacts));
        self.inner.status.lock().expect("status lock").insert(id.clone(), done(&id));
        Ok((id, artifacts))
    }

    pub fn status(&self, id: &str) -> Option<RunStatus> {
        self.inner.status.lock().expect("status lock").get(id).cloned()
    }

    pub fn result(&self, id: &str) -> Option<Arc<RunArtifacts>> {
        self.inner.cache.lock().expect("cache lock").get(id).cloned()
    }

    /// Zip bundle of a finished run.
    pub fn report(&self, id: &str) -> Option<Result<Vec<u8>>> {
        self.result(id).map(|a| build_report(&a)?.to_zip())
    }

    /// Blocks until the run reaches a terminal state.
    pub fn wait(&self, id: &str) -> Option<RunStatus> {
        loop {
            let s = self.status(id)?;
            if s.state.is_terminal() {
                return Some(s);
            }
            thread::sleep(std::time::Duration::from_millis(20));
        }
    }
}

fn run_id(request: &RunRequest, dataset: &LoadedDataset) -> String {
    request.cache_key(&dataset.fingerprint)[..16].to_string()
}

fn done(id: &str) -> RunStatus {
    RunStatus {
        run_id: id.to_string(),
        state: RunState::Done,
        message: "RESULTS IN PREDICTION & METRICS TAB".into(),
        stage: None,
        error_code: None,
    }
}

/// Applies a transition unless it would move the run backwards or out of a
/// terminal state.
fn advance(inner: &Inner, next: RunStatus) {
    let mut status = inner.status.lock().expect("status lock");
    let allowed = status.get(&next.run_id).is_none_or(|s| !s.state.is_terminal() && s.state <= next.state);
    if allowed {
        status.insert(next.run_id.clone(), next);
    }
}

fn worker(inner: &Inner, rx: &Mutex<Receiver<Job>>) {
    loop {
        let job = match rx.lock().expect("queue lock").recv() {
            Ok(job) => job,
            Err(_) => return,
        };
        let processing = |stage: &str| RunStatus {
            run_id: job.id.clone(),
            state: RunState::Processing,
            message: "WAIT... PROCESSING".into(),
            stage: Some(stage.to_string()),
            error_code: None,
        };
        advance(inner, processing("starting"));
        let result = run_pipeline_with(&job.dataset, &job.request, &|stage| advance(inner, processing(stage)));
        match result {
            Ok(artifacts) => {
                inner.cache.lock().expect("cache lock").insert(job.id.clone(), Arc::new(artifacts));
                advance(inner, done(&job.id));
            }
            Err(e) => {
                log::warn!("run {} failed: {e}", job.id);
                advance(
                    inner,
                    RunStatus {
                        run_id: job.id.clone(),
                        state: RunState::Failed,
                        message: e.to_string(),
                        stage: None,
                        error_code: Some(e.code().to_string()),
                    },
                );
            }
        }
    }
}
