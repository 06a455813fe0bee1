//! Fully implicit time stepping: Newton on the discrete residual with
//! saturation-aware damping, and an adaptive step controller.

use log::{debug, info};

use crate::assembler::{FlowModel, ReservoirState};
use crate::error::{Error, Result};
use crate::flow::WellControl;
use crate::sparse;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub dt_max: f64,
    pub dt_min: f64,
    pub dt_init: f64,
    pub max_iterations: usize,
    /// Bound on the largest scaled residual row.
    pub tolerance: f64,
    /// Target pressure change per step, MPa.
    pub eta_p: f64,
    /// Target saturation change per step.
    pub eta_sw: f64,
    /// Step halvings allowed when an update leaves the saturation window.
    pub max_damping: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            dt_max: 2.0,
            dt_min: 0.001,
            dt_init: 0.1,
            max_iterations: 50,
            tolerance: 1e-6,
            eta_p: 5.0,
            eta_sw: 0.05,
            max_damping: 4,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return Err(Error::InvalidInput(format!(
                "need 0 < dt_min <= dt_max, got {} and {}",
                self.dt_min, self.dt_max
            )));
        }
        if !(self.tolerance > 0.0 && self.eta_p > 0.0 && self.eta_sw > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidInput("tolerance, eta values and iteration cap must be positive".into()));
        }
        if !(self.dt_init > 0.0) {
            return Err(Error::InvalidInput("initial time step must be positive".into()));
        }
        Ok(())
    }
}

const SW_WINDOW: (f64, f64) = (-0.01, 1.01);

#[derive(Debug)]
struct NewtonFailure {
    error: Error,
    profile: Vec<f64>,
}

fn newton_inner(model: &FlowModel, old: &ReservoirState, dt: f64, cfg: &NewtonConfig) -> std::result::Result<(ReservoirState, usize), NewtonFailure> {
    let fail = |error: Error, profile: Vec<f64>| NewtonFailure { error, profile };
    let n = model.n_nodes();
    let mut x = model.pack(old);
    let mut ev = model.evaluate(&x, old, dt, true).map_err(|e| fail(e, Vec::new()))?;
    for it in 1..=cfg.max_iterations {
        let jac = ev.jacobian.take().expect("jacobian requested");
        let rhs: Vec<f64> = ev.residual.iter().map(|r| -r).collect();
        let dx = sparse::solve(&jac, &rhs).map_err(|e| fail(e, ev.scaled()))?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_damping {
            let ok = (0..n).all(|i| {
                let s = x[2 * i + 1] + step * dx[2 * i + 1];
                s >= SW_WINDOW.0 && s <= SW_WINDOW.1
            });
            if ok {
                accepted = Some(step);
                break;
            }
            step *= 0.5;
        }
        let Some(step) = accepted else {
            return Err(fail(
                Error::Unphysical("saturation update left the admissible window after damping".into()),
                ev.scaled(),
            ));
        };
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += step * d;
        }
        ev = model.evaluate(&x, old, dt, true).map_err(|e| fail(e, Vec::new()))?;
        let (res, row) = ev.scaled_max();
        debug!("newton it {it}: step {step}, scaled residual {res:.3e} at row {row}");
        if res < cfg.tolerance {
            if let Some(i) = (0..n).find(|&i| !(0.0..=1.0).contains(&x[2 * i + 1])) {
                return Err(fail(
                    Error::Unphysical(format!("converged saturation {} at node {i} is outside [0, 1]", x[2 * i + 1])),
                    ev.scaled(),
                ));
            }
            return Ok((model.unpack(&x, old.time + dt), it));
        }
    }
    let (res, _) = ev.scaled_max();
    Err(fail(
        Error::NewtonDiverged {
            iterations: cfg.max_iterations,
            residual: res,
        },
        ev.scaled(),
    ))
}

/// One implicit step from `old`; returns the new state and the number of
/// Newton updates taken.
pub fn newton_solve(model: &FlowModel, old: &ReservoirState, dt: f64, cfg: &NewtonConfig) -> Result<(ReservoirState, usize)> {
    newton_inner(model, old, dt, cfg).map_err(|f| f.error)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WellChange {
    pub time: f64,
    pub well: usize,
    pub control: WellControl,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SimulationSchedule {
    pub end_time: f64,
    pub report_times: Vec<f64>,
    pub well_changes: Vec<WellChange>,
}

impl SimulationSchedule {
    pub fn new(end_time: f64, report_times: Vec<f64>) -> Self {
        SimulationSchedule {
            end_time,
            report_times,
            well_changes: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.end_time > 0.0) {
            return Err(Error::InvalidInput("end time must be positive".into()));
        }
        if self.report_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("report times must be sorted".into()));
        }
        if self.report_times.iter().any(|&t| t < 0.0 || t > self.end_time) {
            return Err(Error::InvalidInput("report times must lie within [0, end time]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WellRecord {
    pub name: String,
    pub p_wf: f64,
    /// Surface rates, positive into the reservoir.
    pub q_oil: f64,
    pub q_water: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub cumulative_iterations: usize,
    pub wells: Vec<WellRecord>,
    pub mass_balance_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: ReservoirState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult {
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: ReservoirState,
    /// Failed step attempts that were retried with a smaller step.
    pub cuts: usize,
}

impl SimulationResult {
    pub fn total_iterations(&self) -> usize {
        self.steps.last().map_or(0, |s| s.cumulative_iterations)
    }

    pub fn snapshot_at(&self, time: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.time - time).abs() < 1e-9)
    }
}

const TIME_EPS: f64 = 1e-9;

/// Integrates from `initial` to the end of the schedule.
pub fn advance(model: &FlowModel, initial: &ReservoirState, schedule: &SimulationSchedule, cfg: &NewtonConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    schedule.validate()?;
    let mut model = model.clone();
    let mut events: Vec<f64> = schedule
        .report_times
        .iter()
        .copied()
        .chain(schedule.well_changes.iter().map(|c| c.time))
        .chain(std::iter::once(schedule.end_time))
        .filter(|&t| t > initial.time + TIME_EPS && t <= schedule.end_time + TIME_EPS)
        .collect();
    events.sort_by(f64::total_cmp);
    events.dedup_by(|a, b| (*a - *b).abs() < TIME_EPS);

    let mut state = initial.clone();
    let mut snapshots = Vec::new();
    if schedule.report_times.iter().any(|&t| (t - initial.time).abs() < TIME_EPS) {
        snapshots.push(Snapshot {
            time: initial.time,
            state: initial.clone(),
        });
    }
    let mut steps = Vec::new();
    let mut cumulative = 0;
    let mut cuts = 0;
    let mut dt = cfg.dt_init.min(cfg.dt_max);
    let mut next_event = 0;
    apply_changes(&mut model, schedule, f64::NEG_INFINITY, state.time);

    while next_event < events.len() {
        let target = events[next_event];
        let remaining = target - state.time;
        let truncated = dt >= remaining - TIME_EPS;
        let dt_step = if truncated { remaining } else { dt };
        match newton_inner(&model, &state, dt_step, cfg) {
            Ok((mut new, iters)) => {
                if truncated {
                    new.time = target;
                }
                cumulative += iters;
                let balance = model.mass_balance(&new, &state, dt_step)?.relative_error();
                let rates = model.well_rates(&new)?;
                let wells = model
                    .wells
                    .iter()
                    .zip(&rates)
                    .zip(&new.p_wf)
                    .map(|((w, q), &p_wf)| WellRecord {
                        name: w.name.clone(),
                        p_wf,
                        q_oil: q[0],
                        q_water: q[1],
                    })
                    .collect();
                steps.push(StepRecord {
                    time: new.time,
                    dt: dt_step,
                    newton_iterations: iters,
                    cumulative_iterations: cumulative,
                    wells,
                    mass_balance_error: balance,
                });
                let dp = new.p.iter().zip(&state.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let ds = new.sw.iter().zip(&state.sw).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let mut factor = 2.0f64;
                if dp > 0.0 {
                    factor = factor.min(cfg.eta_p / dp);
                }
                if ds > 0.0 {
                    factor = factor.min(cfg.eta_sw / ds);
                }
                let base = if truncated { dt.max(dt_step) } else { dt_step };
                dt = (base * factor).clamp(cfg.dt_min, cfg.dt_max);
                let prev_time = state.time;
                state = new;
                if truncated {
                    next_event += 1;
                    if schedule.report_times.iter().any(|&t| (t - target).abs() < TIME_EPS) {
                        snapshots.push(Snapshot {
                            time: target,
                            state: state.clone(),
                        });
                    }
                    apply_changes(&mut model, schedule, prev_time, target);
                }
            }
            Err(failure) => {
                if dt_step <= cfg.dt_min * (1.0 + 1e-12) {
                    return Err(Error::TimestepCollapse {
                        time: state.time,
                        profile: failure.profile,
                    });
                }
                debug!("step of {dt_step} d at t = {} failed ({}); cutting", state.time, failure.error);
                cuts += 1;
                dt = (dt_step * 0.5).max(cfg.dt_min);
            }
        }
    }
    info!(
        "simulated to {} d in {} steps, {} Newton iterations, {} cuts",
        state.time,
        steps.len(),
        cumulative,
        cuts
    );
    Ok(SimulationResult {
        steps,
        snapshots,
        final_state: state,
        cuts,
    })
}

fn apply_changes(model: &mut FlowModel, schedule: &SimulationSchedule, after: f64, upto: f64) {
    for c in &schedule.well_changes {
        if c.time > after + TIME_EPS && c.time <= upto + TIME_EPS {
            if let Some(w) = model.wells.get_mut(c.well) {
                w.control = c.control;
            }
        }
    }
}
