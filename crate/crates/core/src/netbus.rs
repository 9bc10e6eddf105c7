//! Hybrid time-triggered / event-triggered bus model.
//!
//! One bus cycle elapses per sample. Time-triggered (TT) messages ride the
//! static segment and arrive at `k+1`. Event-triggered (ET) messages compete
//! for the dynamic segment by priority; a message that does not fit in the
//! remaining minislots is carried over to the next cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "TT")]
    Tt,
    #[serde(rename = "ET")]
    Et,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Tt => "TT",
            Mode::Et => "ET",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "TT" => Some(Mode::Tt),
            "ET" => Some(Mode::Et),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "TT->ET")]
    TtToEt,
    #[serde(rename = "ET->TT")]
    EtToTt,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::TtToEt => "TT->ET",
            Direction::EtToTt => "ET->TT",
        }
    }

    /// Mode entered by this switch.
    pub fn target(self) -> Mode {
        match self {
            Direction::TtToEt => Mode::Et,
            Direction::EtToTt => Mode::Tt,
        }
    }

    pub fn between(from: Mode, to: Mode) -> Option<Direction> {
        match (from, to) {
            (Mode::Tt, Mode::Et) => Some(Direction::TtToEt),
            (Mode::Et, Mode::Tt) => Some(Direction::EtToTt),
            _ => None,
        }
    }
}

/// ET iff `|e| ≤ eth`.
pub fn select_mode(e_k: f64, eth: f64) -> Mode {
    if e_k.abs() <= eth {
        Mode::Et
    } else {
        Mode::Tt
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusConfig {
    pub n_apps: usize,
    /// Static slot index per application.
    pub static_slots: Vec<usize>,
    /// Dynamic segment priority per application; lower is served first.
    pub dyn_priorities: Vec<usize>,
    pub minislots_per_cycle: usize,
    pub d2: usize,
    /// Error threshold per application.
    pub eth: Vec<f64>,
    /// ET message length in minislots per application.
    #[serde(default)]
    pub message_len: Vec<usize>,
    /// Sample period, metadata only.
    #[serde(default = "default_h")]
    pub h: f64,
}

fn default_h() -> f64 {
    0.01
}

fn injective(xs: &[usize]) -> bool {
    let mut v = xs.to_vec();
    v.sort_unstable();
    v.windows(2).all(|w| w[0] != w[1])
}

impl BusConfig {
    /// Config with slot `i` and priority `i` for app `i`, a shared threshold
    /// and unit-length messages.
    pub fn uniform(n_apps: usize, d2: usize, eth: f64, minislots_per_cycle: usize) -> Self {
        Self {
            n_apps,
            static_slots: (0..n_apps).collect(),
            dyn_priorities: (0..n_apps).collect(),
            minislots_per_cycle,
            d2,
            eth: vec![eth; n_apps],
            message_len: vec![1; n_apps],
            h: default_h(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BusConfig(m));
        if self.d2 < 2 {
            return bad(format!("d2 must be at least 2, got {}", self.d2));
        }
        if self.static_slots.len() != self.n_apps || self.dyn_priorities.len() != self.n_apps {
            return bad("one static slot and one dynamic priority per application required".into());
        }
        if self.eth.len() != self.n_apps {
            return bad("one error threshold per application required".into());
        }
        if !self.message_len.is_empty() && self.message_len.len() != self.n_apps {
            return bad("message_len must be empty or have one entry per application".into());
        }
        if !injective(&self.static_slots) {
            return bad("static slot assignment is not injective".into());
        }
        if !injective(&self.dyn_priorities) {
            return bad("dynamic priority assignment is not injective".into());
        }
        if let Some(e) = self.eth.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("eth must be positive, got {e}"));
        }
        if self.message_len.contains(&0) {
            return bad("message length must be at least one minislot".into());
        }
        Ok(())
    }

    pub fn message_len(&self, app: usize) -> usize {
        self.message_len.get(app).copied().unwrap_or(1)
    }

    /// Applications ordered by dynamic priority.
    pub fn priority_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_apps).collect();
        order.sort_by_key(|&a| self.dyn_priorities[a]);
        order
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pending {
    pub sent: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BusState {
    pub cycle_index: u64,
    pub modes: Vec<Mode>,
    pub pending: Vec<Option<Pending>>,
    pub minislot_cursor: usize,
    pub consumed_minislots: u64,
}

impl BusState {
    /// All applications start in TT mode.
    pub fn new(config: &BusConfig) -> Self {
        Self {
            cycle_index: 0,
            modes: vec![Mode::Tt; config.n_apps],
            pending: vec![None; config.n_apps],
            minislot_cursor: 0,
            consumed_minislots: 0,
        }
    }
}

/// Result of handing a control message to the bus at sample `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub mode: Mode,
    /// Sample at which the command is applied: `k+1` for TT, `k+d2` for ET.
    pub deadline: u64,
}

/// Queues a control message computed at sample `k`. A TT message goes out
/// in the static segment. An ET message waits for dynamic arbitration in
/// [`advance_cycle`] and replaces any older ET message from the same app.
pub fn transmit(state: &mut BusState, config: &BusConfig, app: usize, k: u64) -> Result<Transmission> {
    if app >= config.n_apps || app >= state.modes.len() {
        return Err(Error::UnknownApp(app));
    }
    let mode = state.modes[app];
    match mode {
        Mode::Tt => {
            state.pending[app] = None;
            Ok(Transmission {
                mode,
                deadline: k + 1,
            })
        }
        Mode::Et => {
            state.pending[app] = Some(Pending { sent: k });
            Ok(Transmission {
                mode,
                deadline: k + config.d2 as u64,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub app: usize,
    pub sent: u64,
    /// Arrival delay in samples.
    pub delay: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinislotReport {
    pub cycle: u64,
    pub consumed: usize,
    pub idle_slots: usize,
    pub transmitted_len: usize,
    pub delivered: Vec<Delivery>,
    /// Apps whose message did not fit and was carried over.
    pub deferred: Vec<usize>,
}

impl MinislotReport {
    pub fn conserves(&self) -> bool {
        self.consumed == self.idle_slots + self.transmitted_len
    }

    pub fn overflowed(&self) -> bool {
        !self.deferred.is_empty()
    }
}

/// Runs the dynamic segment of the current cycle (the cycle of sample
/// `state.cycle_index`) and moves to the next one.
///
/// Slot numbers are walked in priority order. An idle slot number costs one
/// minislot and a pending message costs its length. The walk stops at the
/// first item that does not fit; messages not reached are deferred. A
/// deferred message that can no longer arrive within `d2` samples is an
/// error.
pub fn advance_cycle(state: &mut BusState, config: &BusConfig) -> Result<MinislotReport> {
    let cycle = state.cycle_index;
    let mut report = MinislotReport {
        cycle,
        ..Default::default()
    };
    let budget = config.minislots_per_cycle;
    let mut cursor = 0usize;
    let mut stopped = false;
    for app in config.priority_order() {
        let cost = match state.pending[app] {
            Some(_) => config.message_len(app),
            None => 1,
        };
        if stopped || cursor + cost > budget {
            stopped = true;
            if state.pending[app].is_some() {
                report.deferred.push(app);
            }
            continue;
        }
        cursor += cost;
        match state.pending[app].take() {
            Some(p) => {
                let delay = cycle - p.sent + 1;
                if delay > config.d2 as u64 {
                    return Err(Error::DelayBudget {
                        app,
                        delay,
                        d2: config.d2,
                    });
                }
                report.transmitted_len += cost;
                report.delivered.push(Delivery {
                    app,
                    sent: p.sent,
                    delay,
                });
            }
            None => report.idle_slots += 1,
        }
    }
    for &app in &report.deferred {
        let p = state.pending[app].expect("deferred apps have a pending message");
        let earliest = cycle + 1 - p.sent + 1;
        if earliest > config.d2 as u64 {
            return Err(Error::DelayBudget {
                app,
                delay: earliest,
                d2: config.d2,
            });
        }
    }
    report.consumed = cursor;
    state.minislot_cursor = cursor;
    state.consumed_minislots += cursor as u64;
    state.cycle_index += 1;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub k: u64,
    pub direction: Direction,
}

impl SwitchEvent {
    /// First sample governed by the new mode.
    pub fn effective(&self) -> u64 {
        self.k + 1
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchLog {
    pub events: Vec<SwitchEvent>,
}

impl SwitchLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn record_switch(&mut self, k: u64, direction: Direction) -> Result<()> {
        if let Some(last) = self.events.last() {
            if last.direction == direction {
                return Err(Error::SwitchAlternation {
                    last: last.direction.as_str(),
                    got: direction.as_str(),
                    k,
                });
            }
            if k <= last.k {
                return Err(Error::SwitchOrder { prev: last.k, next: k });
            }
        }
        self.events.push(SwitchEvent { k, direction });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_rule() {
        assert_eq!(select_mode(0.5, 0.5), Mode::Et);
        assert_eq!(select_mode(-0.5, 0.5), Mode::Et);
        assert_eq!(select_mode(0.6, 0.5), Mode::Tt);
        assert_eq!(select_mode(0.0, 1e-9), Mode::Et);
    }

    #[test]
    fn config_validation() {
        assert!(BusConfig::uniform(3, 2, 0.05, 8).validate().is_ok());
        assert!(BusConfig::uniform(1, 1, 0.05, 8).validate().is_err());
        let mut c = BusConfig::uniform(2, 2, 0.05, 8);
        c.dyn_priorities = vec![1, 1];
        assert!(c.validate().is_err());
        let mut c = BusConfig::uniform(2, 2, 0.05, 8);
        c.eth[1] = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn tt_delivers_next_sample() {
        let cfg = BusConfig::uniform(1, 2, 0.1, 4);
        let mut st = BusState::new(&cfg);
        for k in [0u64, 7, 1000] {
            assert_eq!(transmit(&mut st, &cfg, 0, k).unwrap().deadline, k + 1);
        }
        assert_eq!(transmit(&mut st, &cfg, 1, 0), Err(Error::UnknownApp(1)));
    }

    #[test]
    fn et_single_app() {
        let cfg = BusConfig::uniform(1, 2, 0.1, 4);
        let mut st = BusState::new(&cfg);
        st.modes[0] = Mode::Et;
        assert_eq!(transmit(&mut st, &cfg, 0, 10).unwrap().deadline, 12);
        st.cycle_index = 10;
        let r = advance_cycle(&mut st, &cfg).unwrap();
        assert_eq!(r.delivered, vec![Delivery { app: 0, sent: 10, delay: 1 }]);
    }

    #[test]
    fn et_three_apps_two_minislots() {
        let cfg = BusConfig::uniform(3, 2, 0.1, 2);
        let mut st = BusState::new(&cfg);
        st.modes = vec![Mode::Et; 3];
        for app in 0..3 {
            transmit(&mut st, &cfg, app, 0).unwrap();
        }
        let r = advance_cycle(&mut st, &cfg).unwrap();
        assert_eq!(r.deferred, vec![2]);
        let err = advance_cycle(&mut st, &cfg).unwrap_err();
        assert_eq!(err, Error::DelayBudget { app: 2, delay: 3, d2: 2 });
    }

    #[test]
    fn carried_message_counts_against_budget() {
        let mut cfg = BusConfig::uniform(2, 2, 0.1, 2);
        cfg.message_len = vec![2, 1];
        let mut st = BusState::new(&cfg);
        st.modes = vec![Mode::Et; 2];
        transmit(&mut st, &cfg, 0, 0).unwrap();
        transmit(&mut st, &cfg, 1, 0).unwrap();
        let r0 = advance_cycle(&mut st, &cfg).unwrap();
        assert_eq!(r0.deferred, vec![1]);
        let r1 = advance_cycle(&mut st, &cfg).unwrap();
        assert_eq!(r1.delivered, vec![Delivery { app: 1, sent: 0, delay: 2 }]);
    }

    #[test]
    fn minislot_walk() {
        let cfg = BusConfig::uniform(3, 2, 0.1, 10);
        let mut st = BusState::new(&cfg);
        let r = advance_cycle(&mut st, &cfg).unwrap();
        assert_eq!((r.consumed, r.delivered.len()), (3, 0));

        let mut cfg = cfg;
        cfg.message_len = vec![4, 1, 1];
        let mut st = BusState::new(&cfg);
        st.modes[0] = Mode::Et;
        transmit(&mut st, &cfg, 0, 0).unwrap();
        let r = advance_cycle(&mut st, &cfg).unwrap();
        assert_eq!((r.consumed, r.delivered.len()), (6, 1));
        assert!(r.conserves());

        let empty = BusConfig::uniform(0, 2, 0.1, 10);
        let mut st = BusState::new(&empty);
        assert_eq!(advance_cycle(&mut st, &empty).unwrap().consumed, 0);
    }

    #[test]
    fn switch_log_rules() {
        let mut log = SwitchLog::new();
        log.record_switch(100, Direction::TtToEt).unwrap();
        assert_eq!(log.events[0].effective(), 101);
        log.record_switch(150, Direction::EtToTt).unwrap();
        assert!(matches!(
            log.record_switch(200, Direction::EtToTt),
            Err(Error::SwitchAlternation { .. })
        ));
        assert!(matches!(
            log.record_switch(150, Direction::TtToEt),
            Err(Error::SwitchOrder { .. })
        ));
    }
}
