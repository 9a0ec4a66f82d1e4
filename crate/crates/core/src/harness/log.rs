use crate::scheduler::RevisionEvent;

#[derive(Debug, Clone, PartialEq)]
pub enum LogRecord {
    /// Frame `t` (0-based) arrived; `label` is its causal top-1 label.
    Frame {
        t: usize,
        label: u32,
    },
    /// Frames `lo..=hi` were recomputed at boundary `n`.
    Revision(RevisionEvent),
    /// The decoder absorbed the revision at boundary `n`.
    Redecode {
        n: usize,
        tau: usize,
        frames_redecoded: usize,
        transcript: Vec<u32>,
    },
    End {
        frames: usize,
        transcript: Vec<u32>,
    },
}

/// Chronological session record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    records: Vec<LogRecord>,
}

fn join(tokens: &[u32]) -> String {
    tokens
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

impl EventLog {
    pub fn push(&mut self, record: LogRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn taus(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Redecode { tau, .. } => Some(*tau),
                _ => None,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seq,record,t,n,kind,lo,hi,tau,redecoded,transcript\n");
        for (seq, r) in self.records.iter().enumerate() {
            let line = match r {
                LogRecord::Frame { t, label } => format!("frame,{t},,,,,,,{label}"),
                LogRecord::Revision(e) => {
                    format!("revision,,{},{},{},{},,,", e.n, e.kind, e.lo, e.hi)
                }
                LogRecord::Redecode {
                    n,
                    tau,
                    frames_redecoded,
                    transcript,
                } => format!(
                    "redecode,,{n},,,,{tau},{frames_redecoded},{}",
                    join(transcript)
                ),
                LogRecord::End { frames, transcript } => {
                    format!("end,{frames},,,,,,,{}", join(transcript))
                }
            };
            out.push_str(&format!("{seq},{line}\n"));
        }
        out
    }
}
