//! Event trace and the admission-rule verifier.
//!
//! Text layout:
//!
//! ```text
//! # beds=3
//! # initial_busy=0
//! # thresholds=0;1
//! time,kind,class,idle_before,queue_lengths
//! 0.25,arrival,1,3,0;0
//! 0.25,admit,1,3,0;1
//! ```
//!
//! `idle_before` and `queue_lengths` describe the state just before the
//! record's own effect. Completion records of customers not counted in the
//! metrics window leave `class` empty.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    Admit,
    Complete,
    Abandon,
    End,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Admit => "admit",
            EventKind::Complete => "complete",
            EventKind::Abandon => "abandon",
            EventKind::End => "end",
        }
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "arrival" => EventKind::Arrival,
            "admit" => EventKind::Admit,
            "complete" => EventKind::Complete,
            "abandon" => EventKind::Abandon,
            "end" => EventKind::End,
            other => return Err(format!("unknown event kind '{other}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: EventKind,
    pub class: Option<usize>,
    pub idle_before: u32,
    pub queue_lengths: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceHeader {
    pub beds: u32,
    pub initial_busy: u32,
    pub thresholds: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

const HEADER_LINES: usize = 4;
const COLUMNS: &str = "time,kind,class,idle_before,queue_lengths";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn split<T: FromStr>(s: &str) -> Option<Vec<T>> {
    s.split(';').map(|x| x.trim().parse().ok()).collect()
}

impl Trace {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 4));
        let h = &self.header;
        let _ = writeln!(out, "# beds={}", h.beds);
        let _ = writeln!(out, "# initial_busy={}", h.initial_busy);
        let _ = writeln!(out, "# thresholds={}", join(&h.thresholds));
        out.push_str(COLUMNS);
        out.push('\n');
        for r in &self.records {
            let class = r.class.map(|c| c.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.time,
                r.kind.as_str(),
                class,
                r.idle_before,
                join(&r.queue_lengths)
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace> {
        let bad = |line: usize, reason: String| Error::TraceViolation { line, reason };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header_value = |key: &str| -> Result<String> {
            let (n, line) = lines.next().ok_or_else(|| bad(0, "truncated header".into()))?;
            line.strip_prefix("# ")
                .and_then(|rest| rest.strip_prefix(key))
                .and_then(|rest| rest.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| bad(n, format!("expected '# {key}=...'")))
        };
        let beds = header_value("beds")?.parse().map_err(|_| bad(1, "beds is not an integer".into()))?;
        let initial_busy =
            header_value("initial_busy")?.parse().map_err(|_| bad(2, "initial_busy is not an integer".into()))?;
        let thresholds = split(&header_value("thresholds")?).ok_or_else(|| bad(3, "bad threshold list".into()))?;
        match lines.next() {
            Some((_, l)) if l.trim() == COLUMNS => {}
            _ => return Err(bad(HEADER_LINES, format!("expected column header '{COLUMNS}'"))),
        }
        let mut records = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(n, format!("expected 5 fields, found {}", f.len())));
            }
            let time = f[0].parse().map_err(|_| bad(n, format!("bad time '{}'", f[0])))?;
            let kind = f[1].parse().map_err(|e| bad(n, e))?;
            let class = if f[2].is_empty() {
                None
            } else {
                Some(f[2].parse().map_err(|_| bad(n, format!("bad class '{}'", f[2])))?)
            };
            let idle_before = f[3].parse().map_err(|_| bad(n, format!("bad idle count '{}'", f[3])))?;
            let queue_lengths = split(f[4]).ok_or_else(|| bad(n, format!("bad queue lengths '{}'", f[4])))?;
            records.push(TraceRecord { time, kind, class, idle_before, queue_lengths });
        }
        Ok(Trace { header: TraceHeader { beds, initial_busy, thresholds }, records })
    }
}

/// Replay the trace and check the admission rule at every record.
///
/// Each admission of class `j` needs a waiting class-`j` customer, more than
/// `K_j` idle servers, and no higher-priority class that was also eligible.
/// Before every other record no class may be eligible, so nobody waits while
/// the rule would let them in. Recorded states must match the replay.
/// The error names the offending line of the text form.
pub fn verify_threshold_trace(trace: &Trace) -> Result<()> {
    let h = &trace.header;
    let k = &h.thresholds;
    let classes = k.len();
    let line_of = |i: usize| HEADER_LINES + 1 + i;
    let fail = |i: usize, reason: String| Err(Error::TraceViolation { line: line_of(i), reason });

    if h.initial_busy > h.beds {
        return fail(0, "initial_busy exceeds beds".into());
    }
    let mut idle = h.beds - h.initial_busy;
    let mut queues = vec![0u64; classes];
    let mut last_time = f64::NEG_INFINITY;
    let eligible = |queues: &[u64], idle: u32| (0..classes).find(|&j| queues[j] > 0 && idle > k[j]);

    for (i, r) in trace.records.iter().enumerate() {
        if r.queue_lengths.len() != classes {
            return fail(i, format!("{} queue lengths for {classes} classes", r.queue_lengths.len()));
        }
        if r.time < last_time {
            return fail(i, format!("time {} goes backwards from {last_time}", r.time));
        }
        last_time = r.time;
        if r.idle_before != idle || r.queue_lengths != queues {
            return fail(
                i,
                format!(
                    "recorded state (idle {}, queues {:?}) disagrees with replay (idle {idle}, queues {queues:?})",
                    r.idle_before, r.queue_lengths
                ),
            );
        }
        let class = match (r.kind, r.class) {
            (EventKind::End, _) | (EventKind::Complete, None) => None,
            (_, Some(c)) if c < classes => Some(c),
            (kind, c) => return fail(i, format!("{} record has invalid class {c:?}", kind.as_str())),
        };
        if r.kind == EventKind::Admit {
            let j = class.unwrap();
            if queues[j] == 0 {
                return fail(i, format!("class {j} admitted with an empty queue"));
            }
            if idle <= k[j] {
                return fail(i, format!("class {j} admitted with {idle} idle beds, threshold {}", k[j]));
            }
            if let Some(hi) = eligible(&queues, idle).filter(|&hi| hi < j) {
                return fail(i, format!("class {j} admitted while higher-priority class {hi} was eligible"));
            }
            queues[j] -= 1;
            idle -= 1;
            continue;
        }
        if let Some(j) = eligible(&queues, idle) {
            return fail(
                i,
                format!("class {j} left waiting with {idle} idle beds above its threshold {}", k[j]),
            );
        }
        match r.kind {
            EventKind::Arrival => queues[class.unwrap()] += 1,
            EventKind::Complete => {
                if idle >= h.beds {
                    return fail(i, "completion with every bed idle".into());
                }
                idle += 1;
            }
            EventKind::Abandon => {
                let j = class.unwrap();
                if queues[j] == 0 {
                    return fail(i, format!("class {j} abandonment from an empty queue"));
                }
                queues[j] -= 1;
            }
            EventKind::End => {
                if i + 1 != trace.records.len() {
                    return fail(i, "end record is not last".into());
                }
            }
            EventKind::Admit => unreachable!(),
        }
    }
    Ok(())
}
