use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::excitation::sr_order_scalar;
use crate::harness::config::{DisturbanceSpec, ScenarioConfig};
use crate::harness::trace::{AppTrace, Trace};
use crate::netbus::{Direction, Mode};
use crate::supervisor::{containment_check, ModePolicy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub monitor: String,
    pub app: Option<usize>,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let who = self.app.map_or_else(|| "bus".to_string(), |a| format!("app {a}"));
        write!(
            f,
            "{} {:<22} {:<6} measured {:e} threshold {:e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.monitor,
            who,
            self.measured,
            self.threshold
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub verdicts: Vec<Verdict>,
}

impl MonitorReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn get(&self, monitor: &str, app: Option<usize>) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.monitor == monitor && v.app == app)
    }

    fn push(&mut self, monitor: &str, app: Option<usize>, passed: bool, measured: f64, threshold: f64, detail: String) {
        self.verdicts.push(Verdict {
            monitor: monitor.to_string(),
            app,
            passed,
            measured,
            threshold,
            detail,
        });
    }
}

fn max_abs(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Samples where `V` may legitimately rise: the switch instant, the first
/// sample of the new mode, and the samples whose prediction equation
/// contains an impulse.
fn lyapunov_exclusions(a: &AppTrace, d2: usize) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    for r in &a.rows {
        if r.switch.is_some() {
            out.extend([r.k, r.k + 1]);
        }
        if r.disturbance != 0.0 {
            out.extend(r.k + 1..=r.k + d2 as u64);
        }
    }
    out
}

fn premise_note(cfg: &ScenarioConfig, app: usize) -> String {
    match cfg.disturbance_for(app) {
        DisturbanceSpec::None => "no disturbance".into(),
        DisturbanceSpec::Explicit { min_gap, .. } | DisturbanceSpec::Random { min_gap, .. } => {
            format!("assumes dwell time {min_gap} is long enough")
        }
    }
}

fn app_monitors(report: &mut MonitorReport, cfg: &ScenarioConfig, a: &AppTrace, aborted: Option<&str>) {
    let tol = &cfg.tolerances;
    let app = Some(a.app);
    let d2 = cfg.bus.d2;
    let eth = cfg.bus_config().eth[a.app];
    let quiet = cfg.disturbance_for(a.app).is_none();
    let n = a.rows.len() as u64;

    let peak = max_abs(a.rows.iter().flat_map(|r| [r.y, r.u, r.theta_norm]));
    let mut detail = premise_note(cfg, a.app);
    if let Some(why) = aborted {
        detail = format!("run aborted: {why}; {detail}");
    }
    report.push(
        "boundedness",
        app,
        aborted.is_none() && peak < tol.bound,
        peak,
        tol.bound,
        detail,
    );

    if quiet && n > tol.settle_after {
        let worst = max_abs(a.rows.iter().filter(|r| r.k >= tol.settle_after).map(|r| r.e));
        report.push(
            "tracking",
            app,
            worst < tol.tracking,
            worst,
            tol.tracking,
            format!("max |e| for k >= {}", tol.settle_after),
        );
    }

    if a.rows.iter().any(|r| r.dv.is_some()) {
        let skip = lyapunov_exclusions(a, d2);
        let (mut worst, mut at) = (f64::NEG_INFINITY, None);
        for r in a.rows.iter().filter(|r| !skip.contains(&r.k)) {
            if let Some(dv) = r.dv {
                if dv.is_nan() || dv > worst {
                    worst = dv;
                    at = Some(r.k);
                }
            }
        }
        if let Some(k) = at {
            report.push(
                "lyapunov",
                app,
                worst <= tol.dv,
                worst,
                tol.dv,
                format!("largest dV at k = {k}, {} samples excluded", skip.len()),
            );
        }
    }

    if cfg.policy == ModePolicy::Switching {
        let e: Vec<f64> = a.rows.iter().map(|r| r.e).collect();
        let m2 = cfg.plants[a.app].b.len() - 1;
        let c = containment_check(&e, &a.switch_log, eth, m2, d2);
        let bad_re = c.reentries.iter().filter(|r| !r.pass).count();
        let worst_re = c.reentries.iter().map(|r| r.max_abs_e).fold(0.0, f64::max);
        report.push(
            "reentry_containment",
            app,
            bad_re == 0,
            worst_re,
            eth,
            format!("{bad_re} of {} re-entries exceed eth", c.reentries.len()),
        );
        let bad_ph = c.et_phases.iter().filter(|p| !p.pass).count();
        let shortest = c
            .et_phases
            .iter()
            .filter(|p| p.end.is_some())
            .map(|p| p.length)
            .min()
            .map_or(f64::INFINITY, |l| l as f64);
        report.push(
            "et_phase_length",
            app,
            bad_ph == 0,
            shortest,
            2.0,
            format!("{bad_ph} of {} ET phases last 2 samples or fewer", c.et_phases.len()),
        );

        let impulses: Vec<u64> = a.rows.iter().filter(|r| r.disturbance != 0.0).map(|r| r.k).collect();
        if !impulses.is_empty() {
            let missed = impulses
                .iter()
                .filter(|&&t| {
                    let hit = a
                        .rows
                        .iter()
                        .skip(t as usize + 1)
                        .take(d2)
                        .find(|r| r.e.abs() > eth);
                    match hit {
                        None => true,
                        Some(r) => a.rows.get(r.k as usize + 1).is_some_and(|next| next.mode != Mode::Tt),
                    }
                })
                .count();
            report.push(
                "impulse_detection",
                app,
                missed == 0,
                missed as f64,
                0.0,
                format!("{missed} of {} impulses not followed by |e| > eth and TT within d2", impulses.len()),
            );
        }

        if quiet && n > tol.quiescent_after {
            let late = a
                .switch_log
                .events
                .iter()
                .filter(|ev| ev.k >= tol.quiescent_after)
                .count();
            report.push(
                "quiescence",
                app,
                late == 0,
                late as f64,
                0.0,
                format!("switches at k >= {}", tol.quiescent_after),
            );
        }
    }

    if quiet {
        if let (Some(nominal), Some(rank)) = (
            cfg.reference.nominal_sr_order,
            a.rows.last().and_then(|r| r.rank),
        ) {
            report.push(
                "regressor_rank",
                app,
                rank == nominal,
                rank as f64,
                nominal as f64,
                "final windowed Gram rank vs reference order".into(),
            );
        }
        let tail_from = n.saturating_sub(tol.orth_tail);
        let tail: Vec<f64> = a
            .rows
            .iter()
            .filter(|r| r.k >= tail_from)
            .filter_map(|r| r.orth_residual)
            .collect();
        if !tail.is_empty() {
            let worst = max_abs(tail.iter().copied());
            report.push(
                "orthogonality",
                app,
                worst < tol.orthogonality,
                worst,
                tol.orthogonality,
                format!("max over the final {} samples", tol.orth_tail),
            );
        }
    }
}

fn bus_monitors(report: &mut MonitorReport, cfg: &ScenarioConfig, trace: &Trace) {
    let d2 = cfg.bus.d2;
    let rows = || trace.rows();
    let tt_bad = rows().filter(|r| r.mode == Mode::Tt && r.delay != 1).count()
        + trace
            .bus_log
            .iter()
            .flat_map(|c| &c.static_delivered)
            .filter(|d| d.delay != 1)
            .count();
    if rows().next().is_some() {
        report.push(
            "tt_delay",
            None,
            tt_bad == 0,
            tt_bad as f64,
            0.0,
            "count of TT messages not delivered in one sample".into(),
        );
    }
    let et_delays = rows()
        .filter(|r| r.mode == Mode::Et)
        .map(|r| r.delay as u64)
        .chain(trace.bus_log.iter().flat_map(|c| c.dynamic.delivered.iter().map(|d| d.delay)));
    if let Some(worst) = et_delays.max() {
        report.push(
            "et_delay",
            None,
            worst <= d2 as u64,
            worst as f64,
            d2 as f64,
            "largest ET delay in samples".into(),
        );
    }
    if !trace.bus_log.is_empty() {
        let bad = trace.bus_log.iter().filter(|c| !c.dynamic.conserves()).count();
        report.push(
            "minislot_conservation",
            None,
            bad == 0,
            bad as f64,
            0.0,
            format!("{bad} of {} cycles violate consumed = idle + transmitted", trace.bus_log.len()),
        );
    }

    let Some(nominal) = cfg.reference.nominal_sr_order else {
        return;
    };
    let Some(first) = trace.apps.first() else {
        return;
    };
    let yref: Vec<f64> = first.rows.iter().map(|r| r.yref).collect();
    let window = cfg.tolerances.sr_window;
    if yref.len() > window + nominal {
        let order = sr_order_scalar(&yref, nominal + 1, window, cfg.tolerances.rank_tol);
        report.push(
            "reference_sr_order",
            None,
            order == nominal,
            order as f64,
            nominal as f64,
            format!("sufficient-richness order over {window}-sample windows"),
        );
    }
}

/// Judges a finished trace against the scenario tolerances. Monitors whose
/// premise does not hold for the scenario (for example tracking under a
/// disturbance) are left out rather than passed.
pub fn evaluate_monitors(trace: &Trace, cfg: &ScenarioConfig) -> MonitorReport {
    let mut report = MonitorReport::default();
    let aborted = trace.summary.aborted.as_deref();
    if let Some(why) = aborted {
        report.push("run_completed", None, false, 0.0, 0.0, why.to_string());
    }
    for a in &trace.apps {
        if a.app < cfg.n_apps() {
            app_monitors(&mut report, cfg, a, aborted);
        }
    }
    bus_monitors(&mut report, cfg, trace);
    report
}

/// Switch directions must alternate starting from TT.
pub fn switch_log_consistent(a: &AppTrace) -> bool {
    a.switch_log
        .events
        .iter()
        .enumerate()
        .all(|(i, ev)| ev.direction == if i % 2 == 0 { Direction::TtToEt } else { Direction::EtToTt })
}
