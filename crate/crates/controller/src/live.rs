//! Running an experiment while link changes arrive over the API.
//!
//! Every repetition advances in fixed slices. Repetition 0 is the reference:
//! its progress is the experiment's clock, it optionally paces itself against
//! wall time and it feeds the live delay stream. A change requested through
//! the API lands at the reference clock's next slice boundary, and every
//! repetition schedules it when it reaches that boundary. A repetition that
//! was already past it is run again once the first pass is over, so all
//! repetitions end up with the same change schedule.

use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use testbed_core::emulator::{
    build_engine, finish_repetition, EmulatorError, ExperimentSpec, RepetitionArtifacts,
    ScheduledFailure,
};
use testbed_core::SimTime;

use crate::delays::{completed_rounds, delay_batch, DelayBatch};

/// Emulated time between two checks for new link changes.
pub const SLICE: SimTime = SimTime(100_000);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Injection {
    /// Lower endpoint index.
    pub a: usize,
    pub b: usize,
    pub up: bool,
    pub at: SimTime,
}

#[derive(Debug, Default)]
struct Clock {
    horizon: SimTime,
    injections: Vec<Injection>,
}

/// Shared between an experiment's repetitions and the link-state endpoint.
#[derive(Debug)]
pub struct LiveControl {
    duration: SimTime,
    inner: Mutex<Clock>,
}

impl LiveControl {
    pub fn new(duration: SimTime) -> Self {
        LiveControl {
            duration,
            inner: Mutex::new(Clock::default()),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Clock> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Register a link change at the reference clock. `None` once the
    /// reference repetition has reached the end of the run.
    pub fn inject(&self, a: usize, b: usize, up: bool) -> Option<SimTime> {
        let mut c = self.lock();
        if c.horizon >= self.duration {
            return None;
        }
        let at = c.horizon;
        c.injections.push(Injection {
            a: a.min(b),
            b: a.max(b),
            up,
            at,
        });
        Some(at)
    }

    /// Stop accepting changes.
    pub fn close(&self) {
        self.lock().horizon = self.duration;
    }

    pub fn injections(&self) -> Vec<Injection> {
        self.lock().injections.clone()
    }
}

/// What only the reference repetition does.
pub struct Reference<'a> {
    /// Emulated seconds per wall second; `None` runs flat out.
    pub pace: Option<f64>,
    pub publish: &'a (dyn Fn(DelayBatch) + Sync),
}

#[derive(Debug)]
pub struct LiveOutcome {
    pub artifacts: RepetitionArtifacts,
    /// Changes scheduled, counted from the start of the list.
    pub applied: usize,
    /// A change arrived for a time this repetition had already passed.
    pub missed: bool,
}

impl LiveOutcome {
    /// True when the repetition saw exactly `injections`.
    pub fn is_complete(&self, injections: &[Injection]) -> bool {
        !self.missed && self.applied == injections.len()
    }
}

pub fn run_live_repetition(
    spec: &ExperimentSpec,
    r: u32,
    control: &LiveControl,
    reference: Option<&Reference<'_>>,
) -> Result<LiveOutcome, EmulatorError> {
    let mut engine = build_engine(spec, r)?;
    let started = Instant::now();
    let interval = spec.probe_interval;
    let mut published = 0;
    let mut applied = 0;
    let mut missed = false;
    let mut t = SimTime::ZERO;
    loop {
        let next = (t + SLICE).min(spec.duration);
        {
            let mut c = control.lock();
            if reference.is_some() {
                c.horizon = c.horizon.max(next);
            }
            while let Some(inj) = c.injections.get(applied).filter(|i| i.at < next) {
                if inj.at < t {
                    missed = true;
                } else {
                    engine.schedule_link_state(inj.a, inj.b, inj.up, inj.at)?;
                }
                applied += 1;
            }
        }
        if let Some(Reference { pace: Some(p), .. }) = reference {
            let due = started + Duration::from_secs_f64(next.as_secs_f64() / p);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        engine.run_until(next);
        if let Some(rf) = reference {
            let done = if next >= spec.duration {
                // the last, possibly partial, round too
                spec.duration.as_micros().div_ceil(interval.as_micros().max(1))
            } else {
                completed_rounds(next, interval)
            };
            for round in published..done {
                (rf.publish)(delay_batch(engine.store(), &spec.topology, interval, round));
            }
            published = published.max(done);
        }
        t = next;
        if t >= spec.duration {
            break;
        }
    }
    Ok(LiveOutcome {
        artifacts: finish_repetition(spec, r, engine),
        applied,
        missed,
    })
}

/// `spec` with every injected link-down added as a scheduled failure.
/// Restores cannot be expressed as scheduled failures and are left out.
pub fn effective_spec(spec: &ExperimentSpec, injections: &[Injection]) -> ExperimentSpec {
    let mut out = spec.clone();
    out.failures.extend(injections.iter().filter(|i| !i.up).map(|i| ScheduledFailure {
        a: i.a,
        b: i.b,
        at: i.at,
    }));
    out.failures.sort_by_key(|f| f.at);
    out
}
