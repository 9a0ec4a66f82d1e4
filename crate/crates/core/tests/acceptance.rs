//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.
//!
//! Run with `cargo test --test acceptance`.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamrev::ctcdec::{
    align_spikes, dominant_label, redecode_from, spike_align, top_two, top_two_rows, Hypothesis,
    TopTwo, BLANK,
};
use streamrev::encoder::{synthetic_features, Encoder, EncoderConfig, EncoderState, WeightSource};
use streamrev::harness::{
    naive_replay_oracle, run_session, LogRecord, Mode, SessionConfig, SessionInput,
};
use streamrev::masks::{
    causal_mask, chunk_mask, revision_mask, DynamicMaskSampler, MaskKind, MaskSpec,
};
use streamrev::scheduler::{plan, predicted_extra_frames, total_cost, RevisionPolicy};
use streamrev::tensor::Matrix;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, format!("took {took:.2?}, limit {limit:?}"))
}

fn stream(model: Encoder, feats: &Matrix) -> Matrix {
    let mut st = EncoderState::new(model.into());
    for row in feats.iter_rows() {
        st.stream_step(row).unwrap();
    }
    st.posteriors().clone()
}

fn causal_streaming_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 1..=5u64 {
        for layers in 1..=3 {
            for frames in [1, 2, 7, 16, 64] {
                let cfg = EncoderConfig {
                    layers,
                    ..Default::default()
                };
                let model = Encoder::init(cfg, &WeightSource::Seeded(seed)).unwrap();
                let feats = synthetic_features(seed * 100 + frames as u64, frames, 16);
                let offline = model
                    .forward_offline(&feats, &causal_mask(frames).unwrap())
                    .unwrap();
                let d = stream(model, &feats).max_abs_diff(&offline).unwrap();
                worst = worst.max(d);
                check(
                    d <= 1e-5,
                    format!("seed {seed} L={layers} T={frames}: diff {d:e}"),
                )?;
            }
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("75 configurations, max diff {worst:e}"))
}

fn revision_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (sigma, nu) in [(50, 20), (50, 50), (4, 2), (10, 1)] {
        for eta in [false, true] {
            for frames in [60, 100, 120] {
                let cfg = SessionConfig {
                    encoder: EncoderConfig::default(),
                    weights: WeightSource::Seeded(7),
                    policy: RevisionPolicy::new(sigma, nu, eta, 0.3).unwrap(),
                    mode: Mode::Revision,
                    input: SessionInput::Features(synthetic_features(2024, frames, 16)),
                    reference: None,
                };
                let out = run_session(&cfg).unwrap();
                let oracle = naive_replay_oracle(&cfg).unwrap();
                let d = out.posteriors.max_abs_diff(&oracle.posteriors).unwrap();
                worst = worst.max(d);
                let tag = format!("sigma={sigma} nu={nu} eta={} T={frames}", u8::from(eta));
                check(d <= 1e-5, format!("{tag}: posterior diff {d:e}"))?;
                check(
                    out.transcript == oracle.transcript,
                    format!("{tag}: transcripts differ"),
                )?;
                runs += 1;
            }
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "{runs} sessions, max diff {worst:e}, transcripts identical"
    ))
}

fn cost_model_exactness() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    for nu in [1, 2, 4, 5, 10, 20, 25, 50] {
        for frames in (nu..=200).step_by(nu) {
            for sigma in nu..=frames {
                for eta in [false, true] {
                    let policy = RevisionPolicy::new(sigma, nu, eta, 0.3).unwrap();
                    let measured = total_cost(&plan(frames, &policy).unwrap());
                    let predicted = predicted_extra_frames(frames, &policy).unwrap();
                    check(
                        measured == predicted,
                        format!("T={frames} sigma={sigma} nu={nu} eta={eta}: plan {measured}, formula {predicted}"),
                    )?;
                    cases += 1;
                }
            }
        }
    }
    for (frames, sigma, nu, eta, want) in [
        (100, 50, 20, false, 210),
        (100, 50, 20, true, 260),
        (60, 50, 20, false, 110),
    ] {
        let policy = RevisionPolicy::new(sigma, nu, eta, 0.3).unwrap();
        let got = predicted_extra_frames(frames, &policy).unwrap();
        check(
            got == want,
            format!("spot ({frames},{sigma},{nu},{eta}): {got} != {want}"),
        )?;
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!("{cases} grid points and 3 spot values exact"))
}

fn random_top_two(rng: &mut ChaCha8Rng) -> TopTwo {
    let l1 = rng.gen_range(0..6u32);
    let l2 = (l1 + rng.gen_range(1..6u32)) % 6;
    let p1 = rng.gen_range(0.2f32..1.0);
    TopTwo {
        l1,
        p1,
        l2,
        p2: p1 * rng.gen_range(0.0f32..1.0),
    }
}

fn spike(label: u32) -> TopTwo {
    let other = if label == BLANK { 1 } else { BLANK };
    TopTwo {
        l1: label,
        p1: 0.9,
        l2: other,
        p2: 0.05,
    }
}

/// Fully dominant stream pair: the same spikes in the same order, each moved
/// by at most two frames, always keeping a blank between neighbours.
fn shifted_pair(rng: &mut ChaCha8Rng) -> (Vec<TopTwo>, Vec<TopTwo>) {
    let tokens = rng.gen_range(0..8usize);
    let mut spikes = Vec::new();
    let mut pos = rng.gen_range(0..3usize);
    for _ in 0..tokens {
        let width = rng.gen_range(1..=2usize);
        spikes.push((pos, width, rng.gen_range(1..6u32)));
        pos += width + rng.gen_range(3..6usize);
    }
    let len = pos + rng.gen_range(0..3usize);
    let mut moved = spikes.clone();
    for k in 0..moved.len() {
        let floor = if k == 0 {
            0
        } else {
            moved[k - 1].0 + moved[k - 1].1 + 1
        };
        let ceil = match spikes.get(k + 1) {
            Some(next) => (next.0 - 2).saturating_sub(moved[k].1 + 1),
            None => len - moved[k].1,
        };
        let lo = moved[k].0.saturating_sub(2).max(floor);
        let hi = (moved[k].0 + 2).min(ceil).max(lo);
        moved[k].0 = rng.gen_range(lo..=hi);
    }
    let render = |sp: &[(usize, usize, u32)]| {
        let mut s = vec![spike(BLANK); len];
        for &(p, w, l) in sp {
            for f in &mut s[p..p + w] {
                *f = spike(l);
            }
        }
        s
    };
    (render(&spikes), render(&moved))
}

fn tagged_examples() -> Result<(), String> {
    let (a, b) = (1u32, 2u32);
    let dom = |l: u32, alt: u32| TopTwo {
        l1: l,
        p1: 0.9,
        l2: alt,
        p2: 0.05,
    };
    let same = vec![dom(a, 0), dom(0, a), dom(b, 0)];
    check(
        spike_align(&same, &same, 0.3).unwrap() == 4,
        "old = new must give tau = T",
    )?;
    let swap = spike_align(&[dom(a, 0)], &[dom(b, 0)], 0.3).unwrap();
    check(swap == 1, format!("first-frame label swap gave tau {swap}"))?;
    let old = vec![dom(a, b), dom(0, a), dom(b, a), dom(0, b)];
    let new = vec![dom(a, b), dom(b, a), dom(0, b), dom(0, a)];
    let al = align_spikes(&old, &new, 0.3).unwrap();
    check(al.tau == 5, format!("blank shift gave tau {}", al.tau))?;
    let res = redecode_from(&Hypothesis::decode(&old, 0.3), &al, &new, 0.3).unwrap();
    check(
        res.hypothesis.tokens() == Hypothesis::decode(&new, 0.3).tokens(),
        "blank shift re-decode differs from a full decode",
    )
}

fn algorithm_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..1000 {
        let len = rng.gen_range(0..40);
        let s: Vec<TopTwo> = (0..len).map(|_| random_top_two(&mut rng)).collect();
        let theta = rng.gen_range(0.0..1.0);
        let tau = spike_align(&s, &s, theta).unwrap();
        check(
            tau == len + 1,
            format!("(a) stream {k}: tau {tau} for identical streams of {len}"),
        )?;
    }
    tagged_examples().map_err(|e| format!("(b) {e}"))?;
    let mut shifted = 0;
    for k in 0..1000 {
        let (old, mut new) = shifted_pair(&mut rng);
        if old != new {
            shifted += 1;
        }
        let al = align_spikes(&old, &new, 0.3).unwrap();
        new.push(spike(rng.gen_range(0..6)));
        let res = redecode_from(&Hypothesis::decode(&old, 0.3), &al, &new, 0.3).unwrap();
        let full = Hypothesis::decode(&new, 0.3);
        check(
            res.hypothesis.tokens() == full.tokens(),
            format!(
                "(c) pair {k}: re-decode {:?}, full decode {:?}",
                res.hypothesis.tokens(),
                full.tokens()
            ),
        )?;
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("1000 identical streams, 3 tagged examples, 1000 shifted pairs ({shifted} with moved spikes)"))
}

fn causality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..100 {
        let frames = rng.gen_range(2..24);
        let keep = rng.gen_range(1..frames);
        let cfg = EncoderConfig {
            layers: rng.gen_range(1..=3),
            ..Default::default()
        };
        let seed = rng.gen();
        let a = synthetic_features(rng.gen(), frames, 16);
        let mut b = a.clone();
        for t in keep..frames {
            for v in b.row_mut(t) {
                *v = rng.gen_range(-3.0..3.0);
            }
        }
        let model = || Encoder::init(cfg.clone(), &WeightSource::Seeded(seed)).unwrap();
        let (pa, pb) = (stream(model(), &a), stream(model(), &b));
        for t in 0..keep {
            let d = pa
                .row(t)
                .iter()
                .zip(pb.row(t))
                .map(|(x, y)| f64::from((x - y).abs()))
                .fold(0.0, f64::max);
            check(
                d <= 1e-12,
                format!("trial {trial}: frame {t} moved by {d:e} after perturbing from {keep}"),
            )?;
        }
    }
    Ok("100 suffix perturbations, emitted rows untouched".into())
}

fn mask_properties() -> Outcome {
    for frames in 1..40 {
        let causal = causal_mask(frames).unwrap();
        for nu in 1..=frames {
            let mut prev: Option<Vec<u32>> = None;
            for sigma in nu..=frames {
                let m = revision_mask(frames, sigma, nu).unwrap();
                for q in 0..frames {
                    check(
                        m.context_end(q) >= causal.context_end(q),
                        format!("T={frames} s={sigma} v={nu}: causal not contained at {q}"),
                    )?;
                }
                if let Some(p) = &prev {
                    check(
                        p.iter().zip(m.ends()).all(|(a, b)| a <= b),
                        format!("T={frames} v={nu}: lookahead shrinks at sigma {sigma}"),
                    )?;
                }
                prev = Some(m.ends().to_vec());
            }
        }
        for chunk in 1..=frames {
            let m = chunk_mask(frames, chunk).unwrap();
            for q in 0..frames {
                let end = ((q / chunk + 1) * chunk).min(frames) - 1;
                check(
                    m.context_end(q) as usize == end,
                    format!("chunk {chunk} T={frames}: row {q}"),
                )?;
            }
        }
    }
    let golden = revision_mask(6, 4, 2).unwrap();
    check(
        golden.ends() == [3, 3, 5, 5, 5, 5],
        format!("golden vector {:?}", golden.ends()),
    )?;
    let spec = MaskSpec {
        frames: 6,
        kind: MaskKind::Revision { sigma: 4, nu: 2 },
    };
    let mut sampler = DynamicMaskSampler::new(0.3, spec, 37).unwrap();
    let causal = (0..10_000).filter(|_| sampler.next_is_causal()).count();
    let ratio = causal as f64 / 10_000.0;
    check(
        (ratio - 0.3).abs() <= 0.02,
        format!("sampler causal fraction {ratio}"),
    )?;
    Ok(format!("containment, monotonicity and chunk structure for T<40; golden vector; sampler fraction {ratio:.4}"))
}

fn random_posteriors(rng: &mut ChaCha8Rng, frames: usize, vocab: usize) -> Matrix {
    let mut m = Matrix::zeros(0, vocab);
    for _ in 0..frames {
        let mut row: Vec<f32> = (0..vocab)
            .map(|_| rng.gen_range(0.0f32..1.0).powi(3))
            .collect();
        let s: f32 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
        m.push_row(&row).unwrap();
    }
    m
}

/// Nudges each row's probabilities while keeping its top two labels and
/// their dominance; rows where that fails stay as they are.
fn same_top_two(rng: &mut ChaCha8Rng, m: &Matrix, theta: f64) -> Matrix {
    let mut out = m.clone();
    for t in 0..m.rows() {
        let mut row: Vec<f32> = m
            .row(t)
            .iter()
            .map(|p| p * rng.gen_range(0.98f32..1.02))
            .collect();
        let s: f32 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
        let (a, b) = (top_two(m.row(t)).unwrap(), top_two(&row).unwrap());
        if (a.l1, a.l2) == (b.l1, b.l2) && dominant_label(&a, theta) == dominant_label(&b, theta) {
            out.row_mut(t).copy_from_slice(&row);
        }
    }
    out
}

fn stability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sessions = 0;
    for (sigma, nu) in [(50, 20), (10, 1), (4, 2), (30, 30)] {
        for eta in [false, true] {
            for nudged in [false, true] {
                let frames = rng.gen_range(40..130);
                let causal = random_posteriors(&mut rng, frames, 8);
                let revised = nudged.then(|| same_top_two(&mut rng, &causal, 0.3));
                let cfg = SessionConfig {
                    encoder: EncoderConfig::default(),
                    weights: WeightSource::Seeded(0),
                    policy: RevisionPolicy::new(sigma, nu, eta, 0.3).unwrap(),
                    mode: Mode::Revision,
                    input: SessionInput::Posteriors { causal, revised },
                    reference: None,
                };
                let out = run_session(&cfg).unwrap();
                let tag = format!("sigma={sigma} nu={nu} eta={eta} T={frames}");
                check(
                    out.metrics.stability == 0,
                    format!("{tag}: stability {}", out.metrics.stability),
                )?;
                let mut boundaries = 0;
                for r in out.log.records() {
                    if let LogRecord::Redecode {
                        n,
                        tau,
                        frames_redecoded,
                        ..
                    } = *r
                    {
                        check(tau == n + 1, format!("{tag}: tau {tau} at boundary {n}"))?;
                        // the end of the stream brings no newer frame to propagate
                        let want = usize::from(n < frames);
                        check(
                            frames_redecoded == want,
                            format!("{tag}: {frames_redecoded} frames propagated at {n}"),
                        )?;
                        boundaries += 1;
                    }
                }
                check(
                    boundaries == out.events.len(),
                    format!(
                        "{tag}: {boundaries} re-decodes for {} events",
                        out.events.len()
                    ),
                )?;
                let tops = top_two_rows(out.first_pass.iter_rows()).unwrap();
                check(
                    out.transcript == Hypothesis::decode(&tops, 0.3).tokens(),
                    format!("{tag}: transcript drifted"),
                )?;
                sessions += 1;
            }
        }
    }
    Ok(format!(
        "{sessions} decoder-only sessions, stability 0, tau = T at every boundary"
    ))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn cli_run(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_streamrev"))
        .args(["run", "--config"])
        .arg(fixture_dir().join("session.conf"))
        .args(["--seed", "7", "--out"])
        .arg(out)
        .env_remove("STREAMREV_SEED")
        .output()
        .map_err(|e| format!("cannot start binary: {e}"))?;
    check(
        status.status.success(),
        format!(
            "exit {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        ),
    )
}

fn end_to_end_cli() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cli_run(&a)?;
    cli_run(&b)?;
    for name in ["transcript.txt", "metrics.jsonl", "events.csv"] {
        let x = std::fs::read(a.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        check(
            !x.is_empty() && x == y,
            format!("{name} differs between runs"),
        )?;
    }
    Ok("two fixture runs exit 0 with byte-identical transcript, metrics and event log".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("causal streaming equivalence", causal_streaming_equivalence),
        (
            "revision equivalence with the replay oracle",
            revision_equivalence,
        ),
        ("cost model exactness", cost_model_exactness),
        ("spike alignment suite", algorithm_suite),
        ("causality under suffix perturbation", causality),
        ("mask properties", mask_properties),
        ("stability under unchanged top-two streams", stability),
        ("end-to-end CLI determinism", end_to_end_cli),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} ({took:.2?})", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why} ({took:.2?})", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
