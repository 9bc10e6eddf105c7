//! Switching adaptive controller for one networked plant.
//!
//! Two estimators run side by side: `θ̂₁` for the time-triggered delay 1 and
//! `θ̂₂` for the event-triggered delay `d₂`. The bus mode picks which one
//! computes the control and adapts. Oracle monitors (Lyapunov value,
//! equivalent reference, reference-model regressor) are evaluated alongside
//! when the true parameters are visible.
//!
//! The physical plant always has delay 1. A command computed at `k` under
//! delay `d` is applied by the actuator at sample `k+d−1` and held until a
//! newer command replaces it. With `w` the applied input, the delay-`d`
//! regressor slot `u(k−i)` reads `w(k+d−1−i)`, so both estimators see an
//! exact model across switches.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::adapt::{build_regressor, ParameterEstimate, GUARD_EPS};
use crate::error::{Error, Result};
use crate::excitation::{
    numerical_rank, orthogonality_residual, subspace_basis, ExcitationReport, GramWindow, DEFAULT_RANK_TOL,
};
use crate::netbus::{select_mode, transmit, BusConfig, BusState, Direction, Mode, SwitchLog};
use crate::plant::{step_difference, DisturbanceTrain, ModelOrders, PlantModel, SignalHistory};
use crate::shiftpoly::{zeros_strictly_inside, DEFAULT_STABILITY_MARGIN};

/// Which protocol modes a supervisor may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModePolicy {
    #[default]
    Switching,
    TtOnly,
    EtOnly,
}

#[derive(Clone, Debug)]
pub struct DualEstimates {
    pub theta1: ParameterEstimate,
    pub theta2: ParameterEstimate,
    pub theta2_memory: Option<DVector<f64>>,
    pub hold_counter: usize,
    hold_len: usize,
    /// `[estimator][mode]` access tallies outside of resets.
    access: [[u64; 2]; 2],
    /// True until the estimator has been updated after its last reset.
    fresh: [bool; 2],
}

fn slot(mode: Mode) -> usize {
    match mode {
        Mode::Tt => 0,
        Mode::Et => 1,
    }
}

impl DualEstimates {
    pub fn new(theta1: ParameterEstimate, theta2: ParameterEstimate, m2: usize, d2: usize) -> Result<Self> {
        if theta1.dim() == theta2.dim() && d2 > 1 {
            return Err(Error::Dimension {
                expected: theta1.dim() + d2 - 1,
                got: theta2.dim(),
            });
        }
        Ok(Self {
            theta1,
            theta2,
            theta2_memory: None,
            hold_counter: 0,
            hold_len: m2 + d2 - 1,
            access: [[0; 2]; 2],
            fresh: [false; 2],
        })
    }

    pub fn hold_len(&self) -> usize {
        self.hold_len
    }

    /// Estimator belonging to `mode`; `current` is the mode the caller runs in.
    pub fn get(&mut self, mode: Mode, current: Mode) -> &mut ParameterEstimate {
        self.access[slot(mode)][slot(current)] += 1;
        match mode {
            Mode::Tt => &mut self.theta1,
            Mode::Et => &mut self.theta2,
        }
    }

    pub fn peek(&self, mode: Mode) -> &ParameterEstimate {
        match mode {
            Mode::Tt => &self.theta1,
            Mode::Et => &self.theta2,
        }
    }

    /// Number of times an estimator was touched while the other mode was
    /// active.
    pub fn cross_accesses(&self) -> u64 {
        self.access[0][1] + self.access[1][0]
    }

    pub fn is_fresh(&self, mode: Mode) -> bool {
        self.fresh[slot(mode)]
    }

    fn mark_updated(&mut self, mode: Mode) {
        self.fresh[slot(mode)] = false;
    }
}

/// Applies the reset attached to switch number `p` (`p = 0` is the initial
/// entry into TT). Even `p` enters TT and zeroes `θ̂₁`, storing `θ̂₂` as the
/// memory. `p = 1` zeroes `θ̂₂`. Later odd `p` restore the memory and start
/// the hold window.
pub fn apply_reset(duals: &mut DualEstimates, p: usize, direction: Direction) -> Result<()> {
    match (p % 2, direction) {
        (0, Direction::EtToTt) => {
            duals.theta2_memory = Some(duals.theta2.theta().clone());
            duals.theta1.set_zero();
            duals.fresh[0] = true;
            duals.hold_counter = 0;
        }
        (1, Direction::TtToEt) if p == 1 => {
            duals.theta2.set_zero();
            duals.fresh[1] = true;
        }
        (1, Direction::TtToEt) => {
            if let Some(mem) = duals.theta2_memory.clone() {
                duals.theta2.set_theta(&mem)?;
            }
            duals.hold_counter = duals.hold_len;
        }
        _ => {
            return Err(Error::ResetParity {
                parity: p,
                direction: direction.as_str(),
            })
        }
    }
    Ok(())
}

/// `θ*_a − θ̂_a` with the TT quantities zero-padded to `dim2`.
pub fn padded_error(theta_star: &DVector<f64>, theta_hat: &DVector<f64>, dim2: usize) -> DVector<f64> {
    let mut out = DVector::zeros(dim2.max(theta_star.len()));
    for i in 0..theta_star.len() {
        out[i] = theta_star[i] - theta_hat[i];
    }
    out
}

/// `V = ‖θ*_a − θ̂_a‖²` for the estimator of `mode`.
pub fn lyapunov(
    duals: &DualEstimates,
    theta_star_1: &DVector<f64>,
    theta_star_2: &DVector<f64>,
    mode: Mode,
) -> f64 {
    let dim2 = theta_star_2.len();
    match mode {
        Mode::Tt => padded_error(theta_star_1, duals.theta1.theta(), dim2).norm_squared(),
        Mode::Et => padded_error(theta_star_2, duals.theta2.theta(), dim2).norm_squared(),
    }
}

/// Running filter `D′ = (A/B)·D`, i.e. `B·D′ = A·D`.
#[derive(Clone, Debug)]
pub struct InversePlantFilter {
    a: Vec<f64>,
    b: Vec<f64>,
    d_past: Vec<f64>,
    out_past: Vec<f64>,
}

impl InversePlantFilter {
    pub fn new(plant: &PlantModel) -> Result<Self> {
        if !zeros_strictly_inside(&plant.b_poly(), DEFAULT_STABILITY_MARGIN) {
            let (re, im, modulus) = crate::shiftpoly::largest_zero(&plant.b_poly()).unwrap_or((0.0, 0.0, 0.0));
            return Err(Error::NonMinimumPhase { re, im, modulus });
        }
        let a = plant.a_poly().coeffs().to_vec();
        Ok(Self {
            d_past: vec![0.0; a.len()],
            out_past: vec![0.0; plant.b.len()],
            a,
            b: plant.b.clone(),
        })
    }

    /// Feeds `D(k)` and returns `D′(k)`.
    pub fn push(&mut self, d_k: f64) -> f64 {
        self.d_past.rotate_right(1);
        self.d_past[0] = d_k;
        let mut acc: f64 = self.a.iter().zip(&self.d_past).map(|(a, d)| a * d).sum();
        for l in 1..self.b.len() {
            acc -= self.b[l] * self.out_past[l - 1];
        }
        let out = acc / self.b[0];
        self.out_past.rotate_right(1);
        self.out_past[0] = out;
        out
    }
}

/// `y′_ref(k) = y_ref(k) + D′(k)` for `k = 0 … yref.len()−1`.
pub fn equivalent_reference(yref: &[f64], disturbance: &DisturbanceTrain, plant: &PlantModel) -> Result<Vec<f64>> {
    let mut filter = InversePlantFilter::new(plant)?;
    Ok(yref
        .iter()
        .enumerate()
        .map(|(k, r)| r + filter.push(disturbance.at(k as i64)))
        .collect())
}

/// Ideal closed loop: the disturbance-free plant with delay `d` under the
/// controller built from the true `θ*_d`, driven by `y′_ref`. Its regressor
/// is the reference signal `φ*_d`.
#[derive(Clone, Debug)]
pub struct ReferenceModel {
    plant: PlantModel,
    theta_star: ParameterEstimate,
    history: SignalHistory,
}

impl ReferenceModel {
    pub fn new(plant: &PlantModel, d: usize) -> Result<Self> {
        let mut plant = plant.clone();
        plant.delay = d;
        let theta_star = ParameterEstimate::new(plant.theta_star(d)?, 0.5)?;
        let history = SignalHistory::for_orders(plant.orders(), d);
        Ok(Self {
            plant,
            theta_star,
            history,
        })
    }

    pub fn delay(&self) -> usize {
        self.plant.delay
    }

    /// Returns `φ*(k)` and advances to `k+1` using `y′_ref(k+d)`.
    pub fn step(&mut self, yref_prime_ahead: f64) -> Result<DVector<f64>> {
        let d = self.plant.delay;
        let pair = build_regressor(&self.history, self.plant.orders(), d, 0.0)?;
        let u = self.theta_star.control(&pair.phi, yref_prime_ahead)?;
        step_difference(&self.plant, &mut self.history, u, &DisturbanceTrain::none())?;
        Ok(pair.phi)
    }

    pub fn output(&self) -> f64 {
        self.history.y(0).unwrap_or(0.0)
    }
}

/// `‖φ − φ*‖`
pub fn signal_error(phi: &DVector<f64>, phi_star: &DVector<f64>) -> Result<f64> {
    if phi.len() != phi_star.len() {
        return Err(Error::Dimension {
            expected: phi_star.len(),
            got: phi.len(),
        });
    }
    Ok((phi - phi_star).norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReentryCheck {
    pub p: usize,
    /// First ET sample `k′_p`.
    pub start: u64,
    pub max_abs_e: f64,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCheck {
    pub p: usize,
    pub start: u64,
    /// Switch instant ending the phase; `None` if it runs to the horizon.
    pub end: Option<u64>,
    pub length: u64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub reentries: Vec<ReentryCheck>,
    pub et_phases: Vec<PhaseCheck>,
}

impl ContainmentReport {
    pub fn passed(&self) -> bool {
        self.reentries.iter().all(|r| r.pass) && self.et_phases.iter().all(|p| p.pass)
    }

    pub fn failures(&self) -> usize {
        self.reentries.iter().filter(|r| !r.pass).count() + self.et_phases.iter().filter(|p| !p.pass).count()
    }
}

/// Scans a finished run. `e[k]` is the tracking error at sample `k`.
///
/// For every return to ET (`p = 3, 5, …`) checks `|e(k′_p + l)| ≤ eth` for
/// `l = 0 … m₂+d₂−1`. For every closed ET phase checks
/// `k_{p+1} − k′_p > 2`. Phases cut off by the horizon are reported but
/// not judged.
pub fn containment_check(e: &[f64], log: &SwitchLog, eth: f64, m2: usize, d2: usize) -> ContainmentReport {
    let mut report = ContainmentReport::default();
    let window = m2 + d2;
    for (idx, ev) in log.events.iter().enumerate() {
        if ev.direction != Direction::TtToEt {
            continue;
        }
        let p = idx + 1;
        let start = ev.effective();
        let end = log.events.get(idx + 1).map(|n| n.k);
        let length = match end {
            Some(end) => end.saturating_sub(start),
            None => (e.len() as u64).saturating_sub(start),
        };
        report.et_phases.push(PhaseCheck {
            p,
            start,
            end,
            length,
            pass: end.is_none() || length > 2,
        });
        if p >= 3 {
            let seen: Vec<f64> = (0..window as u64)
                .filter_map(|l| e.get((start + l) as usize).map(|x| x.abs()))
                .collect();
            let max_abs_e = seen.iter().copied().fold(0.0, f64::max);
            report.reentries.push(ReentryCheck {
                p,
                start,
                max_abs_e,
                samples: seen.len(),
                pass: max_abs_e <= eth,
            });
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupervisorConfig {
    pub plant: PlantModel,
    pub d2: usize,
    pub eth: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `β̂₀` of the estimate used before any data arrives.
    pub beta0_init: f64,
    pub policy: ModePolicy,
    /// Evaluate the oracle monitors that need `θ*`.
    pub oracle: bool,
    /// Samples at the start of a switching run during which TT is forced.
    /// `None` uses the ET regressor dimension `m₁+m₂+d₂`.
    pub warmup: Option<usize>,
}

/// Monitor values after one sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MonitorState {
    pub v: Option<f64>,
    pub dv: Option<f64>,
    pub phi_star: Option<DVector<f64>>,
    pub yref_prime: f64,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub phi_err: Option<f64>,
    pub rank: Option<usize>,
    pub orth_residual: Option<f64>,
}

/// Per-sample inputs from the scenario loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInput {
    pub yref: f64,
    /// `y_ref(k+1)`
    pub yref_ahead1: f64,
    /// `y_ref(k+d₂)`
    pub yref_ahead2: f64,
    pub yref_prime: f64,
    /// `y′_ref(k+1)`
    pub yref_prime_ahead1: f64,
    /// `y′_ref(k+d₂)`
    pub yref_prime_ahead2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub k: u64,
    pub mode: Mode,
    pub y: f64,
    pub e: f64,
    /// Command computed at `k`.
    pub u: f64,
    /// Input applied to the plant at `k`.
    pub w: f64,
    pub delay: usize,
    pub switch: Option<Direction>,
    pub eps: Option<f64>,
    /// True when the active estimator skipped its update (switch or hold).
    pub update_suppressed: bool,
    pub theta_norm: f64,
    pub disturbance: f64,
    pub monitor: MonitorState,
}

pub struct Supervisor {
    cfg: SupervisorConfig,
    orders: ModelOrders,
    theta_star: Option<[DVector<f64>; 2]>,
    history: SignalHistory,
    schedule: BTreeMap<u64, (u64, f64)>,
    disturbance: DisturbanceTrain,
    duals: DualEstimates,
    mode: Mode,
    p: usize,
    log: SwitchLog,
    v_prev: Option<f64>,
    ref_models: Option<[ReferenceModel; 2]>,
    windows: [GramWindow; 2],
}

impl Supervisor {
    pub fn new(cfg: SupervisorConfig, disturbance: DisturbanceTrain) -> Result<Self> {
        cfg.plant.validate()?;
        if cfg.plant.delay != 1 {
            return Err(Error::Config(format!(
                "networked plants must have physical delay 1, got {}",
                cfg.plant.delay
            )));
        }
        if cfg.d2 < 2 {
            return Err(Error::BusConfig(format!("d2 must be at least 2, got {}", cfg.d2)));
        }
        if cfg.eth.is_nan() || cfg.eth <= 0.0 {
            return Err(Error::BusConfig(format!("eth must be positive, got {}", cfg.eth)));
        }
        let orders = cfg.plant.orders();
        let (dim1, dim2) = (orders.regressor_dim(1), orders.regressor_dim(cfg.d2));
        let initial = match cfg.policy {
            ModePolicy::EtOnly => Mode::Et,
            _ => Mode::Tt,
        };
        let (mut t1, mut t2) = (
            ParameterEstimate::zeros(dim1, cfg.gamma1)?,
            ParameterEstimate::zeros(dim2, cfg.gamma2)?,
        );
        match initial {
            Mode::Tt => t1 = ParameterEstimate::with_prior(dim1, cfg.gamma1, cfg.beta0_init)?,
            Mode::Et => t2 = ParameterEstimate::with_prior(dim2, cfg.gamma2, cfg.beta0_init)?,
        }
        let duals = DualEstimates::new(t1, t2, orders.m2, cfg.d2)?;
        let theta_star = if cfg.oracle {
            Some([cfg.plant.theta_star(1)?, cfg.plant.theta_star(cfg.d2)?])
        } else {
            None
        };
        let ref_models = if cfg.oracle {
            Some([ReferenceModel::new(&cfg.plant, 1)?, ReferenceModel::new(&cfg.plant, cfg.d2)?])
        } else {
            None
        };
        let history = SignalHistory::zeros(orders.m1 + cfg.d2, orders.m2 + cfg.d2 + 1);
        Ok(Self {
            windows: [GramWindow::for_dim(dim1), GramWindow::for_dim(dim2)],
            orders,
            theta_star,
            history,
            schedule: BTreeMap::new(),
            disturbance,
            duals,
            mode: initial,
            p: 0,
            log: SwitchLog::new(),
            v_prev: None,
            ref_models,
            cfg,
        })
    }

    pub fn config(&self) -> &SupervisorConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn switch_log(&self) -> &SwitchLog {
        &self.log
    }

    pub fn duals(&self) -> &DualEstimates {
        &self.duals
    }

    pub fn history(&self) -> &SignalHistory {
        &self.history
    }

    pub fn k(&self) -> u64 {
        self.history.k()
    }

    pub fn warmup(&self) -> usize {
        self.cfg
            .warmup
            .unwrap_or_else(|| self.orders.regressor_dim(self.cfg.d2))
    }

    /// Rank certificate of the active mode's regressor window, `None` while
    /// the window is empty.
    pub fn excitation(&self) -> Option<ExcitationReport> {
        subspace_basis(&self.windows[slot(self.mode)], DEFAULT_RANK_TOL).ok()
    }

    fn delay_of(&self, mode: Mode) -> usize {
        match mode {
            Mode::Tt => 1,
            Mode::Et => self.cfg.d2,
        }
    }

    /// Applied input `w(j)`, past or planned, seen from the current sample.
    fn w_at(&self, j: i64) -> f64 {
        let k = self.history.k() as i64;
        if j < k {
            return self.history.u((k - j) as usize).unwrap_or(0.0);
        }
        let mut value = self.history.u(1).unwrap_or(0.0);
        for (_, &(_, v)) in self.schedule.range(k as u64..=j as u64) {
            value = v;
        }
        value
    }

    /// `φ_d(k−lag)` (and `Φ_d` when `u_now` is given) from outputs and
    /// applied inputs.
    fn regressor(&self, d: usize, lag: usize, u_now: Option<f64>) -> DVector<f64> {
        let k = self.history.k() as i64 - lag as i64;
        let m1 = self.orders.m1;
        let past = self.orders.past_inputs(d);
        let n = m1 + past + usize::from(u_now.is_some());
        let mut v = DVector::zeros(n);
        for i in 0..m1 {
            v[i] = self.history.y(lag + i).unwrap_or(0.0);
        }
        for i in 1..=past {
            v[m1 + i - 1] = self.w_at(k + d as i64 - 1 - i as i64);
        }
        if let Some(u) = u_now {
            v[n - 1] = u;
        }
        v
    }

    fn lagged_full(&self, d: usize) -> DVector<f64> {
        let k = self.history.k() as i64;
        let u = self.w_at(k - 1);
        self.regressor(d, d, Some(u))
    }

    /// Runs sample `k` for application `app`: mode selection, update, reset,
    /// control, transmission, actuation and plant step, then monitors.
    pub fn step(&mut self, bus: &mut BusState, bus_cfg: &BusConfig, app: usize, input: &StepInput) -> Result<StepRecord> {
        let k = self.history.k();
        let y = self.history.y(0).unwrap_or(0.0);
        let e = y - input.yref;
        let decision = match self.cfg.policy {
            ModePolicy::Switching if (k as usize) < self.warmup() => Mode::Tt,
            ModePolicy::Switching => select_mode(e, self.cfg.eth),
            ModePolicy::TtOnly => Mode::Tt,
            ModePolicy::EtOnly => Mode::Et,
        };
        let mode = self.mode;
        let d = self.delay_of(mode);
        let switching = decision != mode;

        // Adapt the active estimator with Φ_d(k−d).
        let lagged = self.lagged_full(d);
        let mut suppressed = false;
        let fresh = self.duals.is_fresh(mode);
        let holding = mode == Mode::Et && self.duals.hold_counter > 0;
        let eps = Some(y - self.duals.peek(mode).predict(&lagged)?);
        if holding {
            self.duals.hold_counter -= 1;
            suppressed = true;
        } else if switching && !fresh {
            suppressed = true;
        } else if k as usize >= d && lagged.norm_squared() > 0.0 {
            self.duals.get(mode, mode).update(&lagged, y)?;
            self.duals.mark_updated(mode);
        }

        // Switch bookkeeping; the new mode governs k+1 onward.
        let mut switch = None;
        if switching {
            let dir = Direction::between(mode, decision).expect("modes differ");
            self.log.record_switch(k, dir)?;
            self.p += 1;
            apply_reset(&mut self.duals, self.p, dir)?;
            switch = Some(dir);
        }

        // Control with the active estimator.
        let phi = self.regressor(d, 0, None);
        let yref_ahead = if d == 1 { input.yref_ahead1 } else { input.yref_ahead2 };
        let u = {
            let est = self.duals.get(mode, mode);
            if est.beta0().abs() < GUARD_EPS {
                return Err(Error::ZeroDivisor);
            }
            est.control(&phi, yref_ahead)?
        };

        bus.modes[app] = mode;
        let tx = transmit(bus, bus_cfg, app, k)?;
        let apply_at = tx.deadline - 1;
        match self.schedule.get(&apply_at) {
            Some(&(computed, _)) if computed > k => {}
            _ => {
                self.schedule.insert(apply_at, (k, u));
            }
        }
        let w = self.w_at(k as i64);
        self.schedule = self.schedule.split_off(&(k + 1));

        // Monitors read the pre-step state.
        let mut monitor = MonitorState {
            yref_prime: input.yref_prime,
            ..Default::default()
        };
        match mode {
            Mode::Tt => monitor.e1 = Some(e),
            Mode::Et => monitor.e2 = Some(e),
        }
        let s = slot(mode);
        self.windows[s].push(lagged.clone())?;
        if self.windows[s].is_full() {
            monitor.rank = Some(numerical_rank(self.windows[s].accum(), DEFAULT_RANK_TOL)?);
        }
        if let Some(ts) = &self.theta_star {
            let v = lyapunov(&self.duals, &ts[0], &ts[1], mode);
            monitor.dv = self.v_prev.map(|prev| v - prev);
            monitor.v = Some(v);
            self.v_prev = Some(v);
            if self.windows[s].is_full() {
                let err = &ts[s] - self.duals.peek(mode).theta();
                monitor.orth_residual = Some(orthogonality_residual(&err, self.windows[s].samples())?);
            }
        }
        if let Some(models) = &mut self.ref_models {
            let star1 = models[0].step(input.yref_prime_ahead1)?;
            let star2 = models[1].step(input.yref_prime_ahead2)?;
            let star = if mode == Mode::Tt { star1 } else { star2 };
            monitor.phi_err = Some(signal_error(&phi, &star)?);
            monitor.phi_star = Some(star);
        }

        let theta_norm = self.duals.peek(mode).theta().norm();
        let disturbance = self.disturbance.at(k as i64);
        step_difference(&self.cfg.plant, &mut self.history, w, &self.disturbance)?;
        if switching {
            self.mode = decision;
            self.windows[slot(decision)].clear();
        }
        Ok(StepRecord {
            k,
            mode,
            y,
            e,
            u,
            w,
            delay: d,
            switch,
            eps,
            update_suppressed: suppressed,
            theta_norm,
            disturbance,
            monitor,
        })
    }
}
