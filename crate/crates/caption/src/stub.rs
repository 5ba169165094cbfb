//! Deterministic in-process service for tests and offline runs.
//!
//! Records every attempt, tracks the peak number of concurrent calls and can
//! follow a script of failures before behaving normally.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use futures::future::BoxFuture;
use tokio::time::Instant;
use vidcurate_core::keyed::keyed_u64;

use crate::service::{CallError, CaptionService, Mode, ServiceRequest, ServiceResponse};

type DelayFn = Box<dyn Fn(&ServiceRequest) -> Duration + Send + Sync>;

enum Reply {
    Echo(String),
    Fixed(String),
    Describe(String),
}

const SUBJECTS: [&str; 8] =
    ["a man", "a woman", "a child", "a dog", "two people", "a cyclist", "a chef", "a small crowd"];
const ACTIONS: [&str; 8] = [
    "is walking along",
    "is running across",
    "is cooking in",
    "is riding through",
    "is dancing in",
    "is playing in",
    "is painting",
    "is watching",
];
const PLACES: [&str; 8] =
    ["a busy street", "a green park", "a small kitchen", "a snowy field", "a crowded market", "the beach", "a quiet room", "the stage"];

fn describe(name: &str, input: &str) -> String {
    let h = keyed_u64(0, name, input);
    let pick = |shift: u32| ((h >> shift) & 7) as usize;
    format!("{} {} {}", SUBJECTS[pick(0)], ACTIONS[pick(8)], PLACES[pick(16)])
}

#[derive(Debug, Clone)]
pub struct Attempt {
    pub at: Instant,
    pub request: ServiceRequest,
    pub failed: bool,
}

pub struct StubService {
    reply: Reply,
    script: Mutex<VecDeque<CallError>>,
    fail_always: Option<CallError>,
    delay: Option<DelayFn>,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    transcript: Mutex<Vec<Attempt>>,
}

impl StubService {
    fn with_reply(reply: Reply) -> StubService {
        StubService {
            reply,
            script: Mutex::new(VecDeque::new()),
            fail_always: None,
            delay: None,
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            transcript: Mutex::new(Vec::new()),
        }
    }

    /// Frame mode answers `"<name> <input>"`; summarize mode answers
    /// `"<name>: "` followed by the inputs joined with `"; "`.
    pub fn echo(name: &str) -> StubService {
        StubService::with_reply(Reply::Echo(name.to_string()))
    }

    /// Frame mode answers a short sentence chosen by hashing `name` with the
    /// input; summarize mode joins the first and last inputs with "and then".
    pub fn describer(name: &str) -> StubService {
        StubService::with_reply(Reply::Describe(name.to_string()))
    }

    /// Answers `text` for every input.
    pub fn fixed(text: &str) -> StubService {
        StubService::with_reply(Reply::Fixed(text.to_string()))
    }

    /// Fails the next calls with the given errors, in order.
    pub fn failing_first(self, errors: Vec<CallError>) -> StubService {
        *self.script.lock().expect("stub lock") = errors.into();
        self
    }

    pub fn failing_always(mut self, error: CallError) -> StubService {
        self.fail_always = Some(error);
        self
    }

    pub fn with_delay(mut self, f: impl Fn(&ServiceRequest) -> Duration + Send + Sync + 'static) -> StubService {
        self.delay = Some(Box::new(f));
        self
    }

    pub fn attempts(&self) -> Vec<Attempt> {
        self.transcript.lock().expect("stub lock").clone()
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    fn respond(&self, request: &ServiceRequest) -> ServiceResponse {
        let outputs = match (&self.reply, request.mode) {
            (Reply::Fixed(text), Mode::Frame) => vec![text.clone(); request.inputs.len()],
            (Reply::Fixed(text), Mode::Summarize) => vec![text.clone()],
            (Reply::Echo(name), Mode::Frame) => request.inputs.iter().map(|i| format!("{name} {i}")).collect(),
            (Reply::Echo(name), Mode::Summarize) => vec![format!("{name}: {}", request.inputs.join("; "))],
            (Reply::Describe(name), Mode::Frame) => request.inputs.iter().map(|i| describe(name, i)).collect(),
            (Reply::Describe(_), Mode::Summarize) => {
                let first = request.inputs.first().cloned().unwrap_or_default();
                match request.inputs.last() {
                    Some(last) if request.inputs.len() > 1 && *last != first => vec![format!("{first} and then {last}")],
                    _ => vec![first],
                }
            }
        };
        ServiceResponse { outputs, model_id: "stub".into() }
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl CaptionService for StubService {
    fn call(&self, request: ServiceRequest) -> BoxFuture<'_, Result<ServiceResponse, CallError>> {
        Box::pin(async move {
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            let _guard = InFlight(&self.in_flight);
            self.peak.fetch_max(now, Ordering::SeqCst);
            let at = Instant::now();
            if let Some(delay) = &self.delay {
                tokio::time::sleep(delay(&request)).await;
            }
            let scripted = self.script.lock().expect("stub lock").pop_front();
            let outcome = match scripted.or_else(|| self.fail_always.clone()) {
                Some(err) => Err(err),
                None => Ok(self.respond(&request)),
            };
            self.transcript.lock().expect("stub lock").push(Attempt { at, request, failed: outcome.is_err() });
            outcome
        })
    }
}
