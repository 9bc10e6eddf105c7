use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::harness::config::{DisturbanceSpec, ScenarioConfig};
use crate::harness::trace::{AppTrace, BusCycleRecord, ExcitationSummary, Summary, Trace, TraceRow, SCHEMA_VERSION};
use crate::netbus::{advance_cycle, BusState, Delivery, Mode};
use crate::plant::{make_impulse_train, DisturbanceTrain, ImpulsePlacement};
use crate::supervisor::{equivalent_reference, StepInput, Supervisor, SupervisorConfig};

/// Draws every application's impulse train from one seeded stream, in
/// application order.
pub fn disturbance_trains(cfg: &ScenarioConfig) -> Result<Vec<DisturbanceTrain>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_apps())
        .map(|app| match cfg.disturbance_for(app) {
            DisturbanceSpec::None => Ok(DisturbanceTrain::none()),
            DisturbanceSpec::Explicit {
                times,
                amplitudes,
                min_gap,
            } => make_impulse_train(
                *min_gap,
                cfg.horizon,
                amplitudes,
                &ImpulsePlacement::Explicit(times.clone()),
                &mut rng,
            ),
            DisturbanceSpec::Random { amplitudes, min_gap } => {
                make_impulse_train(*min_gap, cfg.horizon, amplitudes, &ImpulsePlacement::Random, &mut rng)
            }
        })
        .collect()
}

/// Runs every application over the horizon. Configuration problems are
/// returned as errors; divergence or a bus failure stops the run and is
/// reported in `summary.aborted` alongside the rows produced so far.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace> {
    cfg.validate()?;
    let bus_cfg = cfg.bus_config();
    let d2 = cfg.bus.d2;
    let horizon = cfg.horizon as usize;
    let yref = cfg.reference.generate(horizon + d2 + 1)?;
    let trains = disturbance_trains(cfg)?;

    let mut sups = Vec::with_capacity(cfg.n_apps());
    let mut yref_primes = Vec::with_capacity(cfg.n_apps());
    for (app, (plant, train)) in cfg.plants.iter().zip(&trains).enumerate() {
        let model = plant.model();
        yref_primes.push(if plant.oracle {
            equivalent_reference(&yref, train, &model)?
        } else {
            yref.clone()
        });
        sups.push(Supervisor::new(
            SupervisorConfig {
                plant: model,
                d2,
                eth: bus_cfg.eth[app],
                gamma1: cfg.gammas[0],
                gamma2: cfg.gammas[1],
                beta0_init: cfg.beta0_init,
                policy: cfg.policy,
                oracle: plant.oracle,
                warmup: cfg.warmup,
            },
            train.clone(),
        )?);
    }

    let mut apps: Vec<AppTrace> = (0..cfg.n_apps())
        .map(|app| AppTrace {
            app,
            rows: Vec::with_capacity(horizon),
            ..Default::default()
        })
        .collect();
    let mut bus = BusState::new(&bus_cfg);
    let mut bus_log = Vec::with_capacity(horizon);
    let order = bus_cfg.priority_order();
    let mut aborted = None;

    'samples: for k in 0..horizon {
        let mut static_delivered = Vec::new();
        for &app in &order {
            let yp = &yref_primes[app];
            let input = StepInput {
                yref: yref[k],
                yref_ahead1: yref[k + 1],
                yref_ahead2: yref[k + d2],
                yref_prime: yp[k],
                yref_prime_ahead1: yp[k + 1],
                yref_prime_ahead2: yp[k + d2],
            };
            let rec = match sups[app].step(&mut bus, &bus_cfg, app, &input) {
                Ok(rec) => rec,
                Err(e) => {
                    aborted = Some(format!("application {app} at k = {k}: {e}"));
                    break 'samples;
                }
            };
            if rec.mode == Mode::Tt {
                static_delivered.push(Delivery {
                    app,
                    sent: k as u64,
                    delay: 1,
                });
            }
            apps[app].rows.push(TraceRow {
                app,
                k: rec.k,
                mode: rec.mode,
                y: rec.y,
                yref: input.yref,
                yref_prime: input.yref_prime,
                e: rec.e,
                u: rec.u,
                delay: rec.delay,
                v: rec.monitor.v,
                dv: rec.monitor.dv,
                phi_err: rec.monitor.phi_err,
                rank: rec.monitor.rank,
                orth_residual: rec.monitor.orth_residual,
                switch: rec.switch,
                disturbance: rec.disturbance,
                theta_norm: rec.theta_norm,
            });
        }
        match advance_cycle(&mut bus, &bus_cfg) {
            Ok(dynamic) => bus_log.push(BusCycleRecord {
                cycle: dynamic.cycle,
                static_delivered,
                dynamic,
            }),
            Err(e) => {
                aborted = Some(format!("bus cycle {k}: {e}"));
                break;
            }
        }
    }

    for (trace, sup) in apps.iter_mut().zip(&sups) {
        trace.switch_log = sup.switch_log().clone();
        trace.excitation = sup
            .excitation()
            .map(|r| ExcitationSummary::from_report(sup.mode(), &r));
    }
    let summary = Summary::build(&apps, cfg.horizon, cfg.tolerances.tracking, aborted);
    Ok(Trace {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        apps,
        bus_log,
        summary,
    })
}
