//! The single thread experiments run on, one after the other.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{mpsc, Arc, Mutex, Weak};

use rayon::prelude::*;
use testbed_core::emulator::{build_engine, ExperimentSpec, RunDirectory};
use testbed_core::evalkit::{export_runs_csv, summarize_repetition, RunSummary};
use testbed_core::SimTime;
use tokio::sync::broadcast;

use crate::delays::DelayBatch;
use crate::live::{effective_spec, run_live_repetition, LiveControl, LiveOutcome, Reference};
use crate::state::{AppState, ExperimentState, LinkInjection, LiveRun, Shared};

pub(crate) fn spawn(shared: Weak<Shared>, jobs: mpsc::Receiver<String>) {
    std::thread::Builder::new()
        .name("experiment-worker".into())
        .spawn(move || {
            while let Ok(id) = jobs.recv() {
                let Some(shared) = shared.upgrade() else {
                    break;
                };
                run_job(&AppState(shared), &id);
            }
        })
        .expect("failed to spawn the experiment worker");
}

fn run_job(state: &AppState, id: &str) {
    let start = state
        .with_experiment(id, |e| {
            e.transition(ExperimentState::Running)
                .then(|| (e.spec.clone(), e.pace))
        })
        .flatten();
    let Some((spec, pace)) = start else {
        return;
    };
    log::info!("{id}: running {} repetitions", spec.repetitions);

    let control = Arc::new(LiveControl::new(spec.duration));
    let (tx, _) = broadcast::channel(64);
    *state.live() = Some(LiveRun {
        experiment_id: id.to_string(),
        topology: spec.topology.clone(),
        control: control.clone(),
        delays: tx.clone(),
    });
    let publish = move |b: DelayBatch| {
        let _ = tx.send(b);
    };
    let run_root = state.config().data_dir.as_ref().map(|d| d.join("runs").join(id));
    let bucket = state.config().bucket;
    let result = panic::catch_unwind(AssertUnwindSafe(|| {
        execute(&spec, &control, pace, &publish, run_root, bucket)
    }));
    *state.live() = None;
    // closes the delay stream
    drop(publish);

    let injections: Vec<LinkInjection> = control
        .injections()
        .iter()
        .map(|i| LinkInjection {
            link: spec.topology.link_label(i.a, i.b),
            up: i.up,
            at_s: i.at.as_secs_f64(),
        })
        .collect();
    state.with_experiment(id, |e| {
        e.handle.injections = injections;
        match result {
            Ok(Ok(summaries)) => {
                e.summaries = Some(Arc::new(summaries));
                e.transition(ExperimentState::Done);
            }
            Ok(Err(msg)) => {
                log::warn!("{id}: {msg}");
                e.handle.error = Some(msg);
                e.transition(ExperimentState::Failed);
            }
            Err(_) => {
                e.handle.error = Some("experiment worker panicked".into());
                e.transition(ExperimentState::Failed);
            }
        }
    });
    log::info!("{id}: finished");
}

fn execute(
    spec: &ExperimentSpec,
    control: &LiveControl,
    pace: Option<f64>,
    publish: &(dyn Fn(DelayBatch) + Sync),
    run_root: Option<PathBuf>,
    bucket: SimTime,
) -> Result<Vec<RunSummary>, String> {
    build_engine(spec, 0).map_err(|e| e.to_string())?;
    let dir = run_root
        .map(|root| RunDirectory::create(root, spec))
        .transpose()
        .map_err(|e| format!("run directory: {e}"))?
        .map(Mutex::new);
    let reference = Reference { pace, publish };

    let keep = |o: LiveOutcome| -> Result<(RunSummary, LiveOutcome), String> {
        if let Some(dir) = &dir {
            dir.lock()
                .unwrap_or_else(|e| e.into_inner())
                .write_repetition(&o.artifacts)
                .map_err(|e| format!("run directory: {e}"))?;
        }
        let seen = effective_spec(spec, &control.injections()[..o.applied]);
        Ok((summarize_repetition(&seen, &o.artifacts, bucket), o))
    };
    let first: Vec<(RunSummary, LiveOutcome)> = (0..spec.repetitions)
        .into_par_iter()
        .map(|r| {
            let rf = (r == 0).then_some(&reference);
            let o = run_live_repetition(spec, r, control, rf).map_err(|e| e.to_string())?;
            keep(o)
        })
        .collect::<Result<_, String>>()?;

    control.close();
    let injections = control.injections();
    let stale: Vec<u32> = first
        .iter()
        .filter(|(_, o)| !o.is_complete(&injections))
        .map(|(_, o)| o.artifacts.repetition)
        .collect();
    let mut summaries: Vec<RunSummary> = first.into_iter().map(|(s, _)| s).collect();
    if !stale.is_empty() {
        log::info!("re-running {} repetitions that missed a link change", stale.len());
        let redone: Vec<RunSummary> = stale
            .par_iter()
            .map(|&r| {
                let o = run_live_repetition(spec, r, control, None).map_err(|e| e.to_string())?;
                debug_assert!(o.is_complete(&injections));
                keep(o).map(|(s, _)| s)
            })
            .collect::<Result<_, String>>()?;
        for s in redone {
            let r = s.repetition as usize;
            summaries[r] = s;
        }
    }

    if let Some(dir) = dir {
        let mut dir = dir.into_inner().unwrap_or_else(|e| e.into_inner());
        let io = |e: std::io::Error| format!("run directory: {e}");
        dir.set_spec(&effective_spec(spec, &injections)).map_err(io)?;
        let root = dir.root().to_path_buf();
        dir.finish().map_err(io)?;
        fs::write(root.join("metrics.csv"), export_runs_csv(&summaries)).map_err(io)?;
    }
    Ok(summaries)
}
