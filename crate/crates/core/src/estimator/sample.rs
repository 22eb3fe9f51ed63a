//! Parameter-independent skeletons of the ask path.
//!
//! The posterior recursion only needs the instants where the ask moves, the
//! quote volume just before each move and the elapsed time since the
//! previous move (waiting twice at the same ask composes into one wait).
//! A sample keeps exactly that, plus a tag on each ask move that is a
//! likelihood observation.

use serde::{Deserialize, Serialize};

use crate::model::{L1History, Tick};

/// Maximum in-sample size.
pub const DEFAULT_CAP: usize = 5_000;
/// Samples with fewer observations are flagged insufficient.
pub const MIN_OBSERVATIONS: usize = 20;

/// Which up-jumps are observations and which density scores them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every up-jump of the ask, scored as a unit depletion.
    #[default]
    Zi,
    /// Up-jumps matched with a buy trade, scored with the demanded volume `s`.
    Gzi,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Zi => "zi",
            Mode::Gzi => "gzi",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = crate::LobError;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zi" => Ok(Mode::Zi),
            "gzi" => Ok(Mode::Gzi),
            other => Err(crate::LobError::Input(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obs {
    /// Orders demanded beyond the old quote (0 in ZI mode).
    pub s: i64,
    pub out_of_sample: bool,
}

/// One move of the ask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AskStep {
    /// Seconds since the previous ask move (or the session start).
    pub dt: f64,
    pub q_before: u32,
    pub new_a: Tick,
    pub new_q: u32,
    pub obs: Option<Obs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub a0: Tick,
    pub q0: u32,
    pub steps: Vec<AskStep>,
}

impl Session {
    /// Skeleton of one history. `mode` decides which up-jumps are observations.
    pub fn from_history(history: &L1History, mode: Mode) -> Option<Session> {
        let first = history.records.first()?;
        let mut session = Session { a0: first.state.a, q0: first.state.q, steps: Vec::new() };
        let mut acc = 0.0;
        for i in 1..history.len() {
            acc += history.dt(i);
            let prev = history.records[i - 1].state;
            let rec = &history.records[i];
            if rec.state.a == prev.a {
                continue;
            }
            let obs = if rec.state.a > prev.a {
                match mode {
                    Mode::Zi => Some(0),
                    Mode::Gzi => match rec.trade {
                        Some(t) if t < 0 && -t >= prev.q as i64 => Some(-t - prev.q as i64),
                        _ => None,
                    },
                }
            } else {
                None
            };
            session.steps.push(AskStep {
                dt: acc,
                q_before: prev.q,
                new_a: rec.state.a,
                new_q: rec.state.q,
                obs: obs.map(|s| Obs { s, out_of_sample: false }),
            });
            acc = 0.0;
        }
        Some(session)
    }

    pub fn n_obs(&self) -> usize {
        self.steps.iter().filter(|s| s.obs.is_some()).count()
    }
}

/// Chronological estimation sample over one or more sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Grid size of the data.
    pub n: usize,
    pub mode: Mode,
    pub sessions: Vec<Session>,
    /// Qualifying observations before the split.
    pub available: usize,
    pub n_in: usize,
    pub n_out: usize,
}

/// In-sample size `N = min(cap, floor(10 C / 11))` and out-of-sample size
/// `M = min(ceil(N / 10), C - N)` for `C` available observations.
pub fn split_sizes(available: usize, cap: usize) -> (usize, usize) {
    let n_in = cap.min(available * 10 / 11);
    let n_out = n_in.div_ceil(10).min(available - n_in);
    (n_in, n_out)
}

impl Sample {
    pub fn from_histories(histories: &[L1History], n: usize, mode: Mode, cap: usize) -> Sample {
        let sessions = histories.iter().filter_map(|h| Session::from_history(h, mode)).collect();
        Sample::from_sessions(sessions, n, mode, cap)
    }

    /// Splits the tagged observations chronologically; observations past
    /// the out-of-sample block are untagged and the trailing steps dropped.
    pub fn from_sessions(mut sessions: Vec<Session>, n: usize, mode: Mode, cap: usize) -> Sample {
        let available: usize = sessions.iter().map(Session::n_obs).sum();
        let (n_in, n_out) = split_sizes(available, cap);
        let mut seen = 0;
        for session in &mut sessions {
            let mut last_used = None;
            for (j, step) in session.steps.iter_mut().enumerate() {
                if let Some(obs) = step.obs.as_mut() {
                    if seen < n_in + n_out {
                        obs.out_of_sample = seen >= n_in;
                        last_used = Some(j);
                    } else {
                        step.obs = None;
                    }
                    seen += 1;
                }
            }
            session.steps.truncate(last_used.map_or(0, |j| j + 1));
        }
        sessions.retain(|s| !s.steps.is_empty());
        Sample { n, mode, sessions, available, n_in, n_out }
    }

    /// Re-splits with a smaller cap, keeping the chronological order.
    pub fn with_cap(&self, cap: usize) -> Sample {
        let mut sessions = self.sessions.clone();
        for s in &mut sessions {
            for step in &mut s.steps {
                if let Some(o) = step.obs.as_mut() {
                    o.out_of_sample = false;
                }
            }
        }
        let mut out = Sample::from_sessions(sessions, self.n, self.mode, cap);
        out.available = self.available;
        out
    }

    pub fn is_empty(&self) -> bool {
        self.n_in == 0
    }

    pub fn is_insufficient(&self) -> bool {
        self.available < MIN_OBSERVATIONS
    }

    /// Jump magnitudes `a_new - a_prev` of the tagged observations, in order.
    pub fn jumps(&self, out_of_sample: bool) -> Vec<usize> {
        let mut out = Vec::new();
        for s in &self.sessions {
            let mut a = s.a0;
            for step in &s.steps {
                if let Some(o) = step.obs {
                    if o.out_of_sample == out_of_sample {
                        out.push(step.new_a - a);
                    }
                }
                a = step.new_a;
            }
        }
        out
    }

    /// All in-sample jumps have magnitude one; the naive predictor is then
    /// exact and `P_m` degenerates.
    pub fn is_degenerate(&self) -> bool {
        let j = self.jumps(false);
        !j.is_empty() && j.iter().all(|&m| m == 1)
    }

    /// Untags the observations for which `keep` is false (visited in
    /// chronological order) and updates the split counts.
    pub(crate) fn retain_obs(&mut self, keep: &[bool]) {
        let mut i = 0;
        for s in &mut self.sessions {
            for step in &mut s.steps {
                if step.obs.is_some() {
                    if !keep[i] {
                        step.obs = None;
                    }
                    i += 1;
                }
            }
        }
        self.recount();
    }

    fn recount(&mut self) {
        let (mut n_in, mut n_out) = (0, 0);
        for o in self.sessions.iter().flat_map(|s| &s.steps).filter_map(|s| s.obs) {
            if o.out_of_sample {
                n_out += 1;
            } else {
                n_in += 1;
            }
        }
        self.n_in = n_in;
        self.n_out = n_out;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EventCode, L1Record, L1State};

    fn rec(ts: i64, a: Tick, q: u32, trade: Option<i64>) -> L1Record {
        L1Record { ts_ns: ts * 1_000_000_000, state: L1State { a, b: 1, q, r: 1 }, event: None, trade }
    }

    fn history() -> L1History {
        let mut h = L1History::new();
        for r in [
            rec(0, 3, 1, None),
            rec(1, 3, 2, None),
            rec(2, 5, 1, Some(-4)),
            rec(4, 2, 1, None),
            rec(5, 4, 3, None),
        ] {
            h.push(r).unwrap();
        }
        h.records[1].event = Some(EventCode::slo(3));
        h
    }

    #[test]
    fn skeleton_merges_waits_at_one_ask() {
        let s = Session::from_history(&history(), Mode::Zi).unwrap();
        assert_eq!((s.a0, s.q0), (3, 1));
        assert_eq!(s.steps.len(), 3);
        assert_eq!(s.steps[0].dt, 2.0);
        assert_eq!(s.steps[0].q_before, 2);
        assert_eq!(s.steps[0].obs, Some(Obs { s: 0, out_of_sample: false }));
        assert_eq!(s.steps[1].obs, None);
        assert!(s.steps[2].obs.is_some());
    }

    #[test]
    fn gzi_keeps_only_matched_jumps() {
        let s = Session::from_history(&history(), Mode::Gzi).unwrap();
        assert_eq!(s.steps[0].obs.map(|o| o.s), Some(2));
        assert_eq!(s.steps[2].obs, None);
    }

    #[test]
    fn split_rule() {
        assert_eq!(split_sizes(6000, 5000), (5000, 500));
        assert_eq!(split_sizes(22, 5000), (20, 2));
        assert_eq!(split_sizes(0, 5000), (0, 0));
        assert_eq!(split_sizes(1, 5000), (0, 0));
    }

    #[test]
    fn empty_history_gives_insufficient_sample() {
        let mut h = L1History::new();
        h.push(rec(0, 3, 1, None)).unwrap();
        let s = Sample::from_histories(&[h], 8, Mode::Zi, DEFAULT_CAP);
        assert!(s.is_empty() && s.is_insufficient());
        assert!(s.sessions.is_empty());
    }

    #[test]
    fn cap_and_truncation() {
        let mut h = L1History::new();
        let mut t = 0;
        h.push(rec(t, 3, 1, None)).unwrap();
        for _ in 0..30 {
            t += 1;
            h.push(rec(t, 4, 1, None)).unwrap();
            t += 1;
            h.push(rec(t, 3, 1, None)).unwrap();
        }
        let s = Sample::from_histories(&[h], 8, Mode::Zi, 10);
        assert_eq!((s.available, s.n_in, s.n_out), (30, 10, 1));
        // the session ends at the last out-of-sample observation
        assert_eq!(s.sessions[0].steps.len(), 21);
        let r = s.with_cap(5);
        assert_eq!((r.n_in, r.n_out), (5, 1));
        assert_eq!(s.jumps(false), vec![1; 10]);
        assert!(s.is_degenerate());
    }
}
