//! Revision schedules and their recompute cost.
//!
//! A boundary sits at every multiple of the interval `nu`. At boundary `n`
//! the frames `[max(0, n - sigma), n - 1]` are recomputed, so a boundary
//! costs `min(n, sigma)` frames; boundaries before the first full step are
//! the partial revisions. With the final flag set, one more revision over
//! the last `sigma` frames runs after the last input frame.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevisionPolicy {
    /// Revision step: frames recomputed per boundary.
    pub sigma: usize,
    /// Revision interval: frames between boundaries.
    pub nu: usize,
    /// Revise once more after the final frame.
    pub final_revision: bool,
    /// Relative-margin threshold for dominant labels.
    pub theta: f64,
}

impl RevisionPolicy {
    pub fn new(sigma: usize, nu: usize, final_revision: bool, theta: f64) -> Result<Self> {
        let p = Self {
            sigma,
            nu,
            final_revision,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu == 0 {
            return Err(Error::invalid("revision interval must be >= 1 frame"));
        }
        if self.nu > self.sigma {
            return Err(Error::invalid(format!(
                "revision interval {} exceeds revision step {}",
                self.nu, self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!(
                "theta {} outside [0, 1]",
                self.theta
            )));
        }
        Ok(())
    }

    /// `mu = floor(sigma / nu)`, the number of partial-revision boundaries.
    pub fn mu(&self) -> usize {
        self.sigma / self.nu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    PrePartial,
    Full,
    Final,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::PrePartial => "pre_partial",
            EventKind::Full => "full",
            EventKind::Final => "final",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionEvent {
    pub n: usize,
    pub lo: usize,
    pub hi: usize,
    pub kind: EventKind,
}

impl RevisionEvent {
    fn at(n: usize, sigma: usize, kind: EventKind) -> Self {
        Self {
            n,
            lo: n.saturating_sub(sigma),
            hi: n - 1,
            kind,
        }
    }

    /// Frames recomputed by this event.
    pub fn cost(&self) -> usize {
        self.hi + 1 - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub frames: usize,
    /// Closed-form prediction; `None` when `sigma > T`.
    pub predicted: Option<u64>,
    pub measured: u64,
    pub mu: usize,
}

/// Boundary schedule for a sequence of `frames` frames, ordered by `n`.
pub fn plan(frames: usize, policy: &RevisionPolicy) -> Result<Vec<RevisionEvent>> {
    if frames == 0 {
        return Err(Error::invalid("cannot plan revisions for zero frames"));
    }
    policy.validate()?;
    let mut events: Vec<RevisionEvent> = (1..=frames / policy.nu)
        .map(|k| {
            let n = k * policy.nu;
            let kind = if n < policy.sigma {
                EventKind::PrePartial
            } else {
                EventKind::Full
            };
            RevisionEvent::at(n, policy.sigma, kind)
        })
        .collect();
    if policy.final_revision {
        events.push(RevisionEvent::at(frames, policy.sigma, EventKind::Final));
    }
    Ok(events)
}

pub fn total_cost(events: &[RevisionEvent]) -> u64 {
    events.iter().map(|e| e.cost() as u64).sum()
}

/// Closed-form extra frames:
/// `ceil((T - sigma)/nu) * sigma + (mu + mu^2)/2 * nu + eta * sigma`.
pub fn predicted_extra_frames(frames: usize, policy: &RevisionPolicy) -> Result<u64> {
    policy.validate()?;
    if policy.sigma > frames {
        return Err(Error::Domain(format!(
            "revision step {} exceeds frame count {frames}",
            policy.sigma
        )));
    }
    let (t, sigma, nu) = (frames as u64, policy.sigma as u64, policy.nu as u64);
    let mu = policy.mu() as u64;
    let full = (t - sigma).div_ceil(nu) * sigma;
    let partial = (mu + mu * mu) / 2 * nu;
    let last = if policy.final_revision { sigma } else { 0 };
    Ok(full + partial + last)
}

pub fn cost_report(frames: usize, policy: &RevisionPolicy) -> Result<CostReport> {
    let events = plan(frames, policy)?;
    Ok(CostReport {
        frames,
        predicted: predicted_extra_frames(frames, policy).ok(),
        measured: total_cost(&events),
        mu: policy.mu(),
    })
}

/// CSV with columns `n,kind,lo,hi,cost`.
pub fn events_to_csv(events: &[RevisionEvent]) -> String {
    let mut out = String::from("n,kind,lo,hi,cost\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.n,
            e.kind,
            e.lo,
            e.hi,
            e.cost()
        ));
    }
    out
}

/// Online form of [`plan`]: feed frame counts in order as frames arrive.
#[derive(Debug, Clone)]
pub struct OnlineScheduler {
    policy: RevisionPolicy,
    received: usize,
}

impl OnlineScheduler {
    pub fn new(policy: RevisionPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            policy,
            received: 0,
        })
    }

    /// Events due once `t` frames (1-based count) have been received.
    /// `final_frames` is the stream length once it is known.
    pub fn on_frame(
        &mut self,
        t: usize,
        final_frames: Option<usize>,
    ) -> Result<Vec<RevisionEvent>> {
        if t != self.received + 1 {
            return Err(Error::invalid(format!(
                "frame count {t} out of order (expected {})",
                self.received + 1
            )));
        }
        self.received = t;
        let p = &self.policy;
        let mut due = Vec::new();
        if t.is_multiple_of(p.nu) {
            let kind = if t < p.sigma {
                EventKind::PrePartial
            } else {
                EventKind::Full
            };
            due.push(RevisionEvent::at(t, p.sigma, kind));
        }
        if p.final_revision && final_frames == Some(t) {
            due.push(RevisionEvent::at(t, p.sigma, EventKind::Final));
        }
        Ok(due)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn policy(sigma: usize, nu: usize, eta: bool) -> RevisionPolicy {
        RevisionPolicy::new(sigma, nu, eta, 0.3).unwrap()
    }

    /// Frame-by-frame counter, independent of the boundary arithmetic in `plan`.
    fn counting_oracle(t_total: usize, sigma: usize, nu: usize, eta: bool) -> u64 {
        let mut cost = 0u64;
        for n in 1..=t_total {
            if n % nu == 0 {
                cost += (0..n).filter(|f| f + sigma >= n).count() as u64;
            }
        }
        if eta {
            cost += (0..t_total).filter(|f| f + sigma >= t_total).count() as u64;
        }
        cost
    }

    #[test]
    fn spot_values() {
        let ev = plan(60, &policy(50, 20, false)).unwrap();
        let costs: Vec<usize> = ev.iter().map(RevisionEvent::cost).collect();
        assert_eq!(costs, vec![20, 40, 50]);
        assert_eq!(ev[0].kind, EventKind::PrePartial);
        assert_eq!(ev[2].kind, EventKind::Full);
        assert_eq!(total_cost(&ev), 110);
        assert_eq!(
            predicted_extra_frames(60, &policy(50, 20, false)).unwrap(),
            110
        );
        assert_eq!(total_cost(&plan(100, &policy(50, 20, false)).unwrap()), 210);
        assert_eq!(total_cost(&plan(100, &policy(50, 20, true)).unwrap()), 260);
        assert_eq!(
            predicted_extra_frames(100, &policy(50, 20, false)).unwrap(),
            210
        );
        assert_eq!(
            predicted_extra_frames(100, &policy(50, 20, true)).unwrap(),
            260
        );
        assert_eq!(
            predicted_extra_frames(20, &policy(20, 20, false)).unwrap(),
            20
        );
    }

    #[test]
    fn first_term_vanishes_when_sigma_equals_t() {
        for nu in [1, 3, 7, 30] {
            let p = policy(30, nu, true);
            let mu = (30 / nu) as u64;
            assert_eq!(
                predicted_extra_frames(30, &p).unwrap(),
                (mu + mu * mu) / 2 * nu as u64 + 30
            );
        }
    }

    #[test]
    fn short_stream_only_final() {
        let ev = plan(7, &policy(10, 8, true)).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(
            ev[0],
            RevisionEvent {
                n: 7,
                lo: 0,
                hi: 6,
                kind: EventKind::Final
            }
        );
        assert!(plan(7, &policy(10, 8, false)).unwrap().is_empty());
    }

    #[test]
    fn invalid_inputs() {
        assert!(RevisionPolicy::new(5, 0, false, 0.3).is_err());
        assert!(RevisionPolicy::new(5, 6, false, 0.3).is_err());
        assert!(RevisionPolicy::new(5, 5, false, 1.5).is_err());
        assert!(plan(0, &policy(5, 5, false)).is_err());
        assert!(matches!(
            predicted_extra_frames(10, &policy(20, 5, false)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn every_frame_interval() {
        let ev = plan(5, &policy(3, 1, false)).unwrap();
        assert_eq!(
            ev.iter().map(|e| e.n).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5]
        );
        assert_eq!(
            ev.iter().map(RevisionEvent::cost).collect::<Vec<_>>(),
            vec![1, 2, 3, 3, 3]
        );
    }

    #[test]
    fn online_replay_equals_plan() {
        for (t_total, sigma, nu, eta) in [
            (100, 50, 20, true),
            (57, 9, 4, true),
            (20, 20, 20, false),
            (3, 5, 4, true),
        ] {
            let p = policy(sigma, nu, eta);
            let mut online = OnlineScheduler::new(p).unwrap();
            let mut got = Vec::new();
            for t in 1..=t_total {
                got.extend(online.on_frame(t, Some(t_total)).unwrap());
            }
            assert_eq!(got, plan(t_total, &p).unwrap());
        }
    }

    #[test]
    fn online_rejects_out_of_order() {
        let mut online = OnlineScheduler::new(policy(4, 2, false)).unwrap();
        assert!(online.on_frame(1, None).unwrap().is_empty());
        assert!(online.on_frame(3, None).is_err());
        assert_eq!(online.on_frame(2, None).unwrap().len(), 1);
    }

    #[test]
    fn csv_layout() {
        let csv = events_to_csv(&plan(60, &policy(50, 20, false)).unwrap());
        assert_eq!(
            csv,
            "n,kind,lo,hi,cost\n20,pre_partial,0,19,20\n40,pre_partial,0,39,40\n60,full,10,59,50\n"
        );
    }

    #[test]
    fn exact_under_divisibility_grid() {
        for nu in [1usize, 2, 4, 5, 10, 20, 25, 50] {
            for t_total in (nu..=200).step_by(nu) {
                for sigma in nu..=t_total {
                    for eta in [false, true] {
                        let p = policy(sigma, nu, eta);
                        let measured = total_cost(&plan(t_total, &p).unwrap());
                        assert_eq!(measured, predicted_extra_frames(t_total, &p).unwrap());
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn plan_matches_counting_oracle(t in 1usize..200, s in 0usize..200, v in 0usize..200, eta: bool) {
            let sigma = 1 + s % 200;
            let nu = 1 + v % sigma;
            let p = policy(sigma, nu, eta);
            let ev = plan(t, &p).unwrap();
            prop_assert_eq!(total_cost(&ev), counting_oracle(t, sigma, nu, eta));
            for e in &ev {
                prop_assert_eq!(e.cost(), e.n.min(sigma));
                prop_assert_eq!(e.hi == t - 1, e.n == t);
            }
            prop_assert!(ev.windows(2).all(|w| w[0].n <= w[1].n));
        }

        #[test]
        fn non_divisible_gap_bounded_by_sigma(t in 1usize..200, s in 0usize..200, v in 0usize..200, eta: bool) {
            let sigma = 1 + s % t;
            let nu = 1 + v % sigma;
            let p = policy(sigma, nu, eta);
            let measured = total_cost(&plan(t, &p).unwrap()) as i64;
            let predicted = predicted_extra_frames(t, &p).unwrap() as i64;
            prop_assert!((measured - predicted).abs() <= sigma as i64);
            if t % nu == 0 {
                prop_assert_eq!(measured, predicted);
            }
        }
    }
}
