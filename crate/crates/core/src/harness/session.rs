use std::sync::Arc;
use std::thread;
use std::time::Instant;

use super::log::{EventLog, LogRecord};
use super::metrics::{average_lookahead_ms, edit_distance, wer, SessionMetrics};
use super::{Mode, SessionConfig, SessionInput};
use crate::ctcdec::{align_spikes, redecode_from, top_two, top_two_rows, Hypothesis, TopTwo};
use crate::encoder::{Encoder, EncoderState};
use crate::error::{Error, Result};
use crate::masks::AttentionMask;
use crate::scheduler::{predicted_extra_frames, OnlineScheduler, RevisionEvent};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub transcript: Vec<u32>,
    /// Frame that emitted each transcript token.
    pub sources: Vec<usize>,
    pub metrics: SessionMetrics,
    pub log: EventLog,
    /// Posterior rows as first emitted, before any revision.
    pub first_pass: Matrix,
    /// Posterior rows after the last revision of each frame.
    pub posteriors: Matrix,
    pub events: Vec<RevisionEvent>,
    pub theta: f64,
}

/// Produces posterior rows frame by frame and revises spans of them.
enum Engine<'a> {
    Stream {
        state: EncoderState,
        features: &'a Matrix,
    },
    Replay {
        causal: &'a Matrix,
        revised: Option<&'a Matrix>,
        current: Matrix,
    },
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SessionConfig) -> Result<Self> {
        Ok(match &cfg.input {
            SessionInput::Features(features) => {
                let model = Encoder::init(cfg.encoder.clone(), &cfg.weights)?;
                model.check_features(features)?;
                Engine::Stream {
                    state: EncoderState::new(Arc::new(model)),
                    features,
                }
            }
            SessionInput::Posteriors { causal, revised } => Engine::Replay {
                causal,
                revised: revised.as_ref(),
                current: Matrix::zeros(0, causal.cols()),
            },
        })
    }

    fn step(&mut self, t: usize) -> Result<Vec<f32>> {
        match self {
            Engine::Stream { state, features } => state.stream_step(features.row(t)),
            Engine::Replay {
                causal, current, ..
            } => {
                current.push_row(causal.row(t))?;
                Ok(causal.row(t).to_vec())
            }
        }
    }

    fn revise(&mut self, n: usize, sigma: usize) -> Result<Matrix> {
        match self {
            Engine::Stream { state, .. } => state.revise(n, sigma),
            Engine::Replay {
                causal,
                revised,
                current,
            } => {
                let source = revised.unwrap_or(causal);
                let mut out = Matrix::zeros(0, source.cols());
                for t in n.saturating_sub(sigma)..n {
                    current.row_mut(t).copy_from_slice(source.row(t));
                    out.push_row(source.row(t))?;
                }
                Ok(out)
            }
        }
    }

    fn posteriors(&self) -> &Matrix {
        match self {
            Engine::Stream { state, .. } => state.posteriors(),
            Engine::Replay { current, .. } => current,
        }
    }
}

/// A revision whose rows are ready but whose re-decode waits for the next frame.
struct Pending {
    event: RevisionEvent,
    revised: Vec<TopTwo>,
}

struct Decoder {
    theta: f64,
    tops: Vec<TopTwo>,
    hyp: Hypothesis,
    /// Tokens emitted before this frame count as finalized.
    horizon: usize,
    stability: usize,
    redecoded: u64,
}

fn finalized(h: &Hypothesis, horizon: usize) -> &[u32] {
    let k = h.sources().partition_point(|&s| s < horizon);
    &h.tokens()[..k]
}

impl Decoder {
    fn new(theta: f64) -> Self {
        Self {
            theta,
            tops: Vec::new(),
            hyp: Hypothesis::new(),
            horizon: 0,
            stability: 0,
            redecoded: 0,
        }
    }

    fn step(&mut self, tt: TopTwo) {
        self.hyp.psd_step(&tt, self.theta);
        self.tops.push(tt);
    }

    /// Aligns the stream before and after the revision over frames
    /// `0..n`, then re-decodes from the returned `tau`, feeding `newest`
    /// (frame `n`) along when it has arrived.
    fn absorb(&mut self, p: Pending, newest: Option<TopTwo>, log: &mut EventLog) -> Result<()> {
        let RevisionEvent { n, lo, .. } = p.event;
        if self.tops.len() != n {
            return Err(Error::invalid(format!(
                "revision at {n} but decoder holds {} frames",
                self.tops.len()
            )));
        }
        let mut new = self.tops.clone();
        new[lo..n].copy_from_slice(&p.revised);
        let alignment = align_spikes(&self.tops, &new, self.theta)?;
        new.extend(newest);
        let res = redecode_from(&self.hyp, &alignment, &new, self.theta)?;
        self.stability += edit_distance(
            finalized(&self.hyp, self.horizon),
            finalized(&res.hypothesis, self.horizon),
        );
        self.horizon = self.horizon.max(lo);
        self.redecoded += res.frames_redecoded as u64;
        self.hyp = res.hypothesis;
        self.tops = new;
        log.push(LogRecord::Redecode {
            n,
            tau: res.tau,
            frames_redecoded: res.frames_redecoded,
            transcript: self.hyp.tokens().to_vec(),
        });
        Ok(())
    }
}

/// Runs one session in the configured mode.
pub fn run_session(cfg: &SessionConfig) -> Result<SessionOutput> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Offline => run_offline(cfg),
        Mode::Causal | Mode::Revision => run_streaming(cfg),
    }
}

fn rtf(start: Instant, frames: usize, frame_ms: f64) -> (f64, f64) {
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    (secs, secs * 1000.0 / (frames as f64 * frame_ms))
}

fn run_streaming(cfg: &SessionConfig) -> Result<SessionOutput> {
    let frames = cfg.input.frames();
    let policy = cfg.policy;
    let theta = policy.theta;
    let mut engine = Engine::new(cfg)?;
    let mut scheduler = match cfg.mode {
        Mode::Revision => Some(OnlineScheduler::new(policy)?),
        _ => None,
    };

    let start = Instant::now();
    let mut log = EventLog::default();
    let mut first_pass = Matrix::zeros(0, 0);
    let mut decoder = Decoder::new(theta);
    let mut events = Vec::new();
    let mut recomputed = 0u64;
    let mut pending: Option<Pending> = None;

    for t in 0..frames {
        let row = engine.step(t)?;
        first_pass.push_row(&row)?;
        let tt = top_two(&row)?;
        log.push(LogRecord::Frame { t, label: tt.l1 });
        match pending.take() {
            Some(p) => decoder.absorb(p, Some(tt), &mut log)?,
            None => decoder.step(tt),
        }
        let Some(sched) = scheduler.as_mut() else {
            continue;
        };
        for event in sched.on_frame(t + 1, Some(frames))? {
            let rows = engine.revise(event.n, policy.sigma)?;
            recomputed += rows.rows() as u64;
            log.push(LogRecord::Revision(event));
            events.push(event);
            let p = Pending {
                event,
                revised: top_two_rows(rows.iter_rows())?,
            };
            if event.n == frames {
                decoder.absorb(p, None, &mut log)?;
            } else {
                pending = Some(p);
            }
        }
    }
    let (processing_secs, rtf_proxy) = rtf(start, frames, cfg.frame_ms());

    let transcript = decoder.hyp.tokens().to_vec();
    log.push(LogRecord::End {
        frames,
        transcript: transcript.clone(),
    });
    let metrics = SessionMetrics {
        mode: cfg.mode,
        frames,
        recomputed_frames: recomputed,
        predicted_extra_frames: match cfg.mode {
            Mode::Revision => predicted_extra_frames(frames, &policy).ok(),
            _ => None,
        },
        revision_events: events.len(),
        avg_lookahead_ms: average_lookahead_ms(frames, &events, cfg.frame_ms()),
        stability: decoder.stability,
        redecoded_frames: decoder.redecoded,
        skipped_frames: decoder.hyp.skipped(),
        wer: cfg.reference.as_ref().map(|r| wer(&transcript, r)),
        processing_secs,
        rtf_proxy,
    };
    Ok(SessionOutput {
        sources: decoder.hyp.sources().to_vec(),
        transcript,
        metrics,
        log,
        first_pass,
        posteriors: engine.posteriors().clone(),
        events,
        theta,
    })
}

fn run_offline(cfg: &SessionConfig) -> Result<SessionOutput> {
    let frames = cfg.input.frames();
    let theta = cfg.policy.theta;
    let model = match &cfg.input {
        SessionInput::Features(_) => Some(Encoder::init(cfg.encoder.clone(), &cfg.weights)?),
        SessionInput::Posteriors { .. } => None,
    };

    let start = Instant::now();
    let posteriors = match (&cfg.input, &model) {
        (SessionInput::Features(f), Some(m)) => {
            m.forward_offline(f, &AttentionMask::full(frames)?)?
        }
        (SessionInput::Posteriors { causal, .. }, _) => causal.clone(),
        _ => unreachable!("model exists for feature input"),
    };
    let tops = top_two_rows(posteriors.iter_rows())?;
    let hyp = Hypothesis::decode(&tops, theta);
    let (processing_secs, rtf_proxy) = rtf(start, frames, cfg.frame_ms());

    let mut log = EventLog::default();
    for (t, tt) in tops.iter().enumerate() {
        log.push(LogRecord::Frame { t, label: tt.l1 });
    }
    let transcript = hyp.tokens().to_vec();
    log.push(LogRecord::End {
        frames,
        transcript: transcript.clone(),
    });
    let metrics = SessionMetrics {
        mode: Mode::Offline,
        frames,
        recomputed_frames: 0,
        predicted_extra_frames: None,
        revision_events: 0,
        avg_lookahead_ms: (frames - 1) as f64 / 2.0 * cfg.frame_ms(),
        stability: 0,
        redecoded_frames: 0,
        skipped_frames: hyp.skipped(),
        wer: cfg.reference.as_ref().map(|r| wer(&transcript, r)),
        processing_secs,
        rtf_proxy,
    };
    Ok(SessionOutput {
        sources: hyp.sources().to_vec(),
        transcript,
        metrics,
        log,
        first_pass: posteriors.clone(),
        posteriors,
        events: Vec::new(),
        theta,
    })
}

/// Runs the same input under each mode, up to `jobs` sessions at a time,
/// and returns one metrics row per mode in the order given.
pub fn compare_modes(
    cfg: &SessionConfig,
    modes: &[Mode],
    jobs: usize,
) -> Result<Vec<SessionMetrics>> {
    if modes.len() < 2 {
        return Err(Error::invalid("compare needs at least two modes"));
    }
    let jobs = jobs.clamp(1, modes.len());
    let run = |mode: Mode| {
        let cfg = SessionConfig {
            mode,
            ..cfg.clone()
        };
        run_session(&cfg).map(|out| out.metrics)
    };
    let mut rows = Vec::with_capacity(modes.len());
    for batch in modes.chunks(jobs) {
        let results: Vec<Result<SessionMetrics>> = thread::scope(|s| {
            let handles: Vec<_> = batch.iter().map(|&m| s.spawn(move || run(m))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("session thread panicked"))
                .collect()
        });
        for r in results {
            rows.push(r?);
        }
    }
    Ok(rows)
}
