//! Sessions, jobs and results in memory, and the worker side of a solve.
//! The store lock is only taken for metadata; images, codebooks and maps
//! are shared through `Arc` and all compute runs on the worker pool.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use otseg_core::features::{Image, ScribbleSet};
use otseg_core::models::SegConfig;
use otseg_core::pipeline::{build_codebook, segment_image, CodebookFile, FeatureConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::strokes::Stroke;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Worker threads shared by all solves.
    pub threads: usize,
    /// Sessions whose result is kept; the least recently used beyond this
    /// lose their result.
    pub max_results: usize,
    pub session_ttl: Duration,
    pub max_upload_bytes: usize,
    /// Allowed CORS origin; any origin when `None`.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            max_results: 64,
            session_ttl: Duration::from_secs(3600),
            max_upload_bytes: 64 << 20,
            cors_origin: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveRequest {
    pub features: FeatureConfig,
    pub solver: SegConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobStatus {
    fn finished(self) -> bool {
        matches!(self, Self::Done | Self::Failed | Self::Cancelled)
    }
}

/// Written by the solver thread, read by status requests.
#[derive(Debug, Default)]
pub struct Progress {
    pub iteration: AtomicUsize,
    pub cancel: AtomicBool,
}

#[derive(Debug)]
pub struct Job {
    pub session: String,
    pub request: SolveRequest,
    pub status: JobStatus,
    pub progress: Arc<Progress>,
    pub error: Option<String>,
    pub summary: Option<Value>,
}

impl Job {
    pub fn to_json(&self, id: &str) -> Value {
        let max_iter = self.request.solver.max_iter;
        let iteration = self.progress.iteration.load(Ordering::Relaxed);
        let progress = if self.status == JobStatus::Done { 1.0 } else { (iteration as f64 / max_iter as f64).min(1.0) };
        json!({
            "job_id": id,
            "session_id": self.session,
            "status": self.status,
            "iteration": iteration,
            "max_iter": max_iter,
            "progress": progress,
            "error": self.error,
            "summary": self.summary,
        })
    }
}

#[derive(Debug)]
pub struct SolvedResult {
    pub job: String,
    pub width: usize,
    pub height: usize,
    pub maps: Vec<Vec<f64>>,
    pub threshold: f64,
}

#[derive(Debug)]
pub struct Session {
    pub image: Arc<Image>,
    /// Indexed scribble mask, 0 = unlabeled.
    pub mask: Vec<u8>,
    /// Strokes painted since the last mask upload, in order.
    pub strokes: Vec<Stroke>,
    pub codebook: Option<(FeatureConfig, Arc<CodebookFile>)>,
    pub result: Option<Arc<SolvedResult>>,
    result_tick: u64,
    pub pending: Option<String>,
    pub running: Option<String>,
    pub latest_job: Option<String>,
    pub created: SystemTime,
    pub updated: SystemTime,
    touched: Instant,
}

impl Session {
    pub fn new(image: Image) -> Self {
        let now = SystemTime::now();
        Self {
            mask: vec![0; image.pixels()],
            image: Arc::new(image),
            strokes: Vec::new(),
            codebook: None,
            result: None,
            result_tick: 0,
            pending: None,
            running: None,
            latest_job: None,
            created: now,
            updated: now,
            touched: Instant::now(),
        }
    }

    pub fn scribbles(&self) -> ScribbleSet {
        ScribbleSet::from_indexed(self.image.width, self.image.height, &self.mask).expect("mask matches the image")
    }

    pub fn labels(&self) -> usize {
        self.scribbles().nonempty_labels()
    }

    pub fn modified(&mut self) {
        self.updated = SystemTime::now();
    }

    pub fn to_json(&self, id: &str) -> Value {
        let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        json!({
            "session_id": id,
            "width": self.image.width,
            "height": self.image.height,
            "labels": self.labels(),
            "latest_job": self.latest_job,
            "has_result": self.result.is_some(),
            "created": secs(self.created),
            "updated": secs(self.updated),
        })
    }
}

#[derive(Debug, Default)]
pub struct Store {
    pub sessions: HashMap<String, Session>,
    pub jobs: HashMap<String, Job>,
    tick: u64,
}

impl Store {
    /// Session by id, marking it as used.
    pub fn session(&mut self, id: &str) -> Option<&mut Session> {
        let s = self.sessions.get_mut(id)?;
        s.touched = Instant::now();
        Some(s)
    }

    pub fn result(&mut self, id: &str) -> Option<Arc<SolvedResult>> {
        self.tick += 1;
        let tick = self.tick;
        let s = self.session(id)?;
        s.result_tick = tick;
        s.result.clone()
    }

    fn store_result(&mut self, id: &str, result: SolvedResult, max_results: usize) {
        self.tick += 1;
        let tick = self.tick;
        if let Some(s) = self.sessions.get_mut(id) {
            s.result = Some(Arc::new(result));
            s.result_tick = tick;
        }
        loop {
            let held: Vec<(&String, u64)> =
                self.sessions.iter().filter(|(_, s)| s.result.is_some()).map(|(k, s)| (k, s.result_tick)).collect();
            if held.len() <= max_results {
                break;
            }
            let oldest = held.into_iter().min_by_key(|(_, t)| *t).map(|(k, _)| k.clone()).expect("non-empty");
            self.sessions.get_mut(&oldest).expect("present").result = None;
        }
    }

    /// Removes a session and its jobs, stopping any solve.
    pub fn remove_session(&mut self, id: &str) -> bool {
        if self.sessions.remove(id).is_none() {
            return false;
        }
        self.jobs.retain(|_, job| {
            if job.session != id {
                return true;
            }
            job.progress.cancel.store(true, Ordering::Relaxed);
            false
        });
        true
    }

    /// Drops sessions idle for longer than `ttl`; returns how many.
    pub fn expire(&mut self, ttl: Duration) -> usize {
        let now = Instant::now();
        let stale: Vec<String> =
            self.sessions.iter().filter(|(_, s)| now.duration_since(s.touched) >= ttl).map(|(k, _)| k.clone()).collect();
        for id in &stale {
            self.remove_session(id);
        }
        stale.len()
    }

    /// Cancels an unfinished job: a queued one at once, a running one at
    /// its next progress report.
    pub fn cancel(&mut self, job_id: &str) {
        if let Some(job) = self.jobs.get_mut(job_id).filter(|j| !j.status.finished()) {
            job.progress.cancel.store(true, Ordering::Relaxed);
            if job.status == JobStatus::Queued {
                job.status = JobStatus::Cancelled;
            }
        }
    }
}

pub fn new_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

pub struct Shared {
    pub store: Mutex<Store>,
    pub pool: rayon::ThreadPool,
    pub config: ServiceConfig,
}

impl Shared {
    pub fn new(config: ServiceConfig) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads.max(1))
            .thread_name(|i| format!("otseg-worker-{i}"))
            .build()
            .expect("worker pool");
        Self { store: Mutex::new(Store::default()), pool, config }
    }

    pub fn lock(&self) -> MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Queues a solve for `session_id`, cancelling the session's previous job
/// whether queued or running. The new job starts once the session is idle.
pub fn submit(shared: &Arc<Shared>, store: &mut Store, session_id: &str, request: SolveRequest) -> String {
    let job_id = new_id();
    let session = store.session(session_id).expect("caller checked the session");
    let previous: Vec<String> = session.pending.take().into_iter().chain(session.running.clone()).collect();
    session.pending = Some(job_id.clone());
    session.latest_job = Some(job_id.clone());
    for id in previous {
        store.cancel(&id);
    }
    store.jobs.insert(
        job_id.clone(),
        Job {
            session: session_id.to_owned(),
            request,
            status: JobStatus::Queued,
            progress: Arc::default(),
            error: None,
            summary: None,
        },
    );
    dispatch(shared, store, session_id);
    job_id
}

fn dispatch(shared: &Arc<Shared>, store: &mut Store, session_id: &str) {
    let Some(session) = store.sessions.get_mut(session_id) else {
        return;
    };
    if session.running.is_some() {
        return;
    }
    let Some(job_id) = session.pending.take() else {
        return;
    };
    session.running = Some(job_id.clone());
    let shared2 = Arc::clone(shared);
    shared.pool.spawn(move || execute(&shared2, &job_id));
}

struct Work {
    session: String,
    image: Arc<Image>,
    scribbles: ScribbleSet,
    request: SolveRequest,
    progress: Arc<Progress>,
    codebook: Option<Arc<CodebookFile>>,
}

fn start(store: &mut Store, job_id: &str) -> Option<Work> {
    let job = store.jobs.get_mut(job_id)?;
    if job.progress.cancel.load(Ordering::Relaxed) {
        job.status = JobStatus::Cancelled;
        return None;
    }
    job.status = JobStatus::Running;
    let (session_id, request, progress) = (job.session.clone(), job.request.clone(), Arc::clone(&job.progress));
    let session = store.sessions.get(&session_id)?;
    let codebook = session.codebook.as_ref().filter(|(f, _)| *f == request.features).map(|(_, c)| Arc::clone(c));
    Some(Work {
        session: session_id,
        image: Arc::clone(&session.image),
        scribbles: session.scribbles(),
        request,
        progress,
        codebook,
    })
}

fn execute(shared: &Arc<Shared>, job_id: &str) {
    let work = {
        let mut store = shared.lock();
        let work = start(&mut store, job_id);
        if work.is_none() {
            finish_session(shared, &mut store, job_id);
            return;
        }
        work.expect("checked")
    };

    let progress = Arc::clone(&work.progress);
    let outcome = (|| {
        let codebook = match work.codebook {
            Some(c) => c,
            None => Arc::new(build_codebook(&[&work.image], &work.request.features)?),
        };
        if progress.cancel.load(Ordering::Relaxed) {
            return Err(otseg_core::Error::Cancelled);
        }
        let mut monitor = |iteration: usize, _residual: f64| {
            progress.iteration.fetch_max(iteration, Ordering::Relaxed);
            !progress.cancel.load(Ordering::Relaxed)
        };
        let seg = segment_image(
            &work.image,
            &work.scribbles,
            Some((*codebook).clone()),
            &work.request.features,
            &work.request.solver,
            false,
            Some(&mut monitor),
        )?;
        Ok((codebook, seg))
    })();

    let mut store = shared.lock();
    let cancelled = progress.cancel.load(Ordering::Relaxed);
    if let Some(job) = store.jobs.get_mut(job_id) {
        match outcome {
            Ok((codebook, seg)) if !cancelled => {
                let r = seg.result;
                progress.iteration.fetch_max(r.report.iterations, Ordering::Relaxed);
                job.status = JobStatus::Done;
                job.summary = Some(json!({
                    "iterations": r.report.iterations,
                    "converged": r.report.converged,
                    "residual": r.report.residual(),
                    "near_binarity": r.near_binarity,
                    "phases": seg.priors.len(),
                    "bins": codebook.codebook.len(),
                    "wall_time_s": r.report.wall_time.as_secs_f64(),
                }));
                let result = SolvedResult {
                    job: job_id.to_owned(),
                    width: r.width,
                    height: r.height,
                    maps: r.maps,
                    threshold: job.request.solver.threshold,
                };
                let features = job.request.features.clone();
                if let Some(s) = store.sessions.get_mut(&work.session) {
                    s.codebook = Some((features, codebook));
                }
                store.store_result(&work.session, result, shared.config.max_results);
            }
            Ok(_) | Err(otseg_core::Error::Cancelled) => job.status = JobStatus::Cancelled,
            Err(e) => {
                job.status = JobStatus::Failed;
                job.error = Some(e.to_string());
            }
        }
    }
    finish_session(shared, &mut store, job_id);
}

fn finish_session(shared: &Arc<Shared>, store: &mut Store, job_id: &str) {
    let Some(session_id) = store.jobs.get(job_id).map(|j| j.session.clone()) else {
        return;
    };
    if let Some(s) = store.sessions.get_mut(&session_id) {
        if s.running.as_deref() == Some(job_id) {
            s.running = None;
        }
    }
    dispatch(shared, store, &session_id);
}
