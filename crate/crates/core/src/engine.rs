//! Fixed-step co-simulation of plant, noise, observer and trigger rule,
//! plus Monte Carlo ensembles and the statistics the convergence results
//! speak about.
//!
//! One step from t to t+h does, in order:
//!
//! 1. poll the trigger rule at (t, y = x₁(t)) — a firing refreshes the held
//!    output sample used from t on (causal zero-order hold; events are
//!    detected at the first grid point satisfying the rule, so detection
//!    delay is below h, and h is constrained to at most dwell/10);
//! 2. advance plant and observer by one explicit Euler step using the noise
//!    values at t (left-endpoint sampling). Euler is deliberate: the
//!    observer right-hand side is discontinuous at execution times and, in
//!    the nonlinear case, non-Lipschitz at zero innovation, so smooth
//!    high-order integrators buy nothing;
//! 3. advance the Brownian motions and the colored noise to t+h.
//!
//! Sample paths draw from independent generators keyed by
//! (master seed, path index) and are reduced in path-index order, so results
//! do not depend on thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gains::{Design, DesignSpec};
use crate::noise::{advance, bounded_eval, BoxMullerRng, NoiseConfig, NoiseState};
use crate::observer::{EsoState, EtmState, TriggerEvent};
use crate::plant::{extended_state, input_eval, plant_derivative_into, PlantConfig};

/// Step size, horizon and ensemble bookkeeping for one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Step size in seconds; must not exceed dwell/10 of any simulated ETM.
    pub h: f64,
    /// Horizon in seconds; the grid covers [0, ceil(t_end/h)·h].
    pub t_end: f64,
    pub master_seed: u64,
    pub paths: usize,
    /// Every `record_stride`-th grid point is recorded (plus the endpoints).
    pub record_stride: usize,
}

/// Default ratio between an ETM's dwell time and the step size.
pub const DEFAULT_H_DIVISOR: f64 = 20.0;
/// Recorded points per path targeted when no stride is given.
const TARGET_RECORDS: u64 = 2000;

impl SimConfig {
    /// `record_stride = None` picks a stride recording about 2000 points.
    pub fn new(
        h: f64,
        t_end: f64,
        master_seed: u64,
        paths: usize,
        record_stride: Option<usize>,
    ) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size h must be positive, got {h}"
            )));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon t_end must be positive, got {t_end}"
            )));
        }
        if paths == 0 {
            return Err(Error::InvalidArgument("paths must be positive".into()));
        }
        let ratio = t_end / h;
        if !(ratio < 4.6e18) {
            return Err(Error::InvalidArgument(format!(
                "t_end/h = {ratio:.3e} does not fit a 64-bit step counter"
            )));
        }
        let n_steps = ((ratio - 1e-9).ceil() as u64).max(1);
        let stride = match record_stride {
            Some(0) => {
                return Err(Error::InvalidArgument(
                    "record_stride must be positive".into(),
                ))
            }
            Some(s) => s,
            None => ((n_steps / TARGET_RECORDS).max(1)) as usize,
        };
        Ok(Self {
            h,
            t_end,
            master_seed,
            paths,
            record_stride: stride,
        })
    }

    /// Step count of the simulation grid.
    pub fn n_steps(&self) -> u64 {
        (((self.t_end / self.h) - 1e-9).ceil() as u64).max(1)
    }

    /// Grid must resolve the dwell gate: h <= dwell/10.
    pub fn validate_against_dwell(&self, dwell: f64) -> Result<()> {
        if self.h > dwell / 10.0 {
            return Err(Error::InvalidArgument(format!(
                "step size h={} must not exceed dwell/10 = {}",
                self.h,
                dwell / 10.0
            )));
        }
        Ok(())
    }

    /// The instants at which states are recorded.
    pub fn recorded_times(&self) -> Vec<f64> {
        let n_steps = self.n_steps();
        let stride = self.record_stride as u64;
        let mut times = Vec::with_capacity((n_steps / stride + 2) as usize);
        times.push(0.0);
        let mut j = stride;
        while j < n_steps {
            times.push(j as f64 * self.h);
            j += stride;
        }
        times.push(n_steps as f64 * self.h);
        times
    }
}

/// One simulated sample path on the recorded grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub path_index: u64,
    /// Recorded instants.
    pub times: Vec<f64>,
    /// Plant states per recorded instant (n columns).
    pub x: Vec<Vec<f64>>,
    /// Extended state f(t, x, v₁, v₂) per recorded instant.
    pub x_ext: Vec<f64>,
    /// Observer estimates per recorded instant (n+1 columns).
    pub xhat: Vec<Vec<f64>>,
    /// Scaled error variables η_i = r^(n+1-i)(x_i - x̂_i), the (n+1)-th
    /// component measured against the extended state.
    pub eta: Vec<Vec<f64>>,
    pub triggers: Vec<TriggerEvent>,
    /// First time any |x_i| exceeded the plant's sanity bound, if ever.
    pub sanity_exceeded_at: Option<f64>,
}

impl Trajectory {
    pub fn order(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn trigger_count(&self) -> usize {
        self.triggers.len()
    }

    pub fn inter_event_times(&self) -> Vec<f64> {
        self.triggers
            .windows(2)
            .map(|w| w[1].time - w[0].time)
            .collect()
    }

    /// Estimation errors x_i - x̂_i at one recorded index; the last component
    /// compares the extended state.
    pub fn errors_at(&self, rec: usize) -> Vec<f64> {
        let n = self.order();
        let mut e = Vec::with_capacity(n + 1);
        for i in 0..n {
            e.push(self.x[rec][i] - self.xhat[rec][i]);
        }
        e.push(self.x_ext[rec] - self.xhat[rec][n]);
        e
    }

    /// Per-component sup of |x_i - x̂_i| over recorded instants in
    /// [tail_start, end].
    pub fn tail_sup_errors(&self, tail_start: f64) -> Vec<f64> {
        let m = self.order() + 1;
        let mut sup = vec![0.0f64; m];
        for rec in 0..self.times.len() {
            if self.times[rec] < tail_start {
                continue;
            }
            for (i, e) in self.errors_at(rec).into_iter().enumerate() {
                sup[i] = sup[i].max(e.abs());
            }
        }
        sup
    }
}

/// Simulates one sample path.
pub fn simulate_path(
    plant: &PlantConfig,
    noise_cfg: &NoiseConfig,
    design: &Design,
    sim: &SimConfig,
    path_index: u64,
) -> Result<Trajectory> {
    noise_cfg.validate()?;
    if design.order() != plant.n {
        return Err(Error::InvalidArgument(format!(
            "design order {} does not match plant order {}",
            design.order(),
            plant.n
        )));
    }
    let (dwell, threshold) = design.dwell_and_threshold();
    sim.validate_against_dwell(dwell)?;

    let n = plant.n;
    let m = n + 1;
    let r = design.r();
    let h = sim.h;
    let n_steps = sim.n_steps();
    let stride = sim.record_stride as u64;

    let mut source = BoxMullerRng::for_path(sim.master_seed, path_index);
    let mut ns = NoiseState::initial(noise_cfg);
    let mut x = plant.x_init.clone();
    let mut eso = EsoState::new(design.clone());
    let mut etm = EtmState::new(dwell, threshold, x[0]).map_err(|e| e.with_path(path_index))?;

    let capacity = (n_steps / stride + 2) as usize;
    let mut times = Vec::with_capacity(capacity);
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(capacity);
    let mut x_exts = Vec::with_capacity(capacity);
    let mut xhats: Vec<Vec<f64>> = Vec::with_capacity(capacity);
    let mut etas: Vec<Vec<f64>> = Vec::with_capacity(capacity);

    let mut record = |t: f64, x: &[f64], xhat: &[f64], x_ext: f64| {
        times.push(t);
        xs.push(x.to_vec());
        x_exts.push(x_ext);
        xhats.push(xhat.to_vec());
        let mut eta = Vec::with_capacity(m);
        for i in 0..n {
            eta.push(r.powi((n - i) as i32) * (x[i] - xhat[i]));
        }
        eta.push(x_ext - xhat[n]);
        etas.push(eta);
    };

    let v1_0 = bounded_eval(noise_cfg, 0.0, 0.0);
    let f0 = extended_state(plant, 0.0, &x, v1_0, ns.v2).map_err(|e| e.with_path(path_index))?;
    record(0.0, &x, &eso.xhat, f0);

    let mut dx = vec![0.0; n];
    let mut dxhat = vec![0.0; m];
    let mut sanity_exceeded_at = None;

    for j in 0..n_steps {
        let t = j as f64 * h;
        etm.poll(t, x[0]).map_err(|e| e.with_path(path_index))?;
        let u = input_eval(&plant.input, t);
        let v1 = bounded_eval(noise_cfg, t, ns.b1);
        plant_derivative_into(plant, t, &x, v1, ns.v2, &mut dx)
            .map_err(|e| e.with_path(path_index))?;
        eso.derivative_into(t, etm.held_output(), u, &mut dxhat)
            .map_err(|e| e.with_path(path_index))?;
        for (xi, dxi) in x.iter_mut().zip(&dx) {
            *xi += h * dxi;
        }
        for (xi, dxi) in eso.xhat.iter_mut().zip(&dxhat) {
            *xi += h * dxi;
        }
        ns = advance(&ns, h, noise_cfg, &mut source).map_err(|e| e.with_path(path_index))?;

        let t_next = (j + 1) as f64 * h;
        if x.iter().any(|v| !v.is_finite()) || eso.xhat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                time: t_next,
                path: Some(path_index),
                what: "plant or observer state left the finite range".into(),
            });
        }
        if sanity_exceeded_at.is_none() && x.iter().any(|v| v.abs() > plant.sanity_bound) {
            sanity_exceeded_at = Some(t_next);
        }
        if (j + 1) % stride == 0 || j + 1 == n_steps {
            let v1_next = bounded_eval(noise_cfg, t_next, ns.b1);
            let f_next = extended_state(plant, t_next, &x, v1_next, ns.v2)
                .map_err(|e| e.with_path(path_index))?;
            record(t_next, &x, &eso.xhat, f_next);
        }
    }

    Ok(Trajectory {
        path_index,
        times,
        x: xs,
        x_ext: x_exts,
        xhat: xhats,
        eta: etas,
        triggers: etm.into_log(),
        sanity_exceeded_at,
    })
}

/// Pooled histogram of inter-event times.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn from_samples(samples: &[f64], bins: usize) -> Self {
        if samples.is_empty() {
            return Self {
                min: f64::NAN,
                max: f64::NAN,
                bin_width: 0.0,
                counts: vec![],
                total: 0,
            };
        }
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Self {
                min,
                max,
                bin_width: 0.0,
                counts: vec![samples.len() as u64],
                total: samples.len() as u64,
            };
        }
        let width = (max - min) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &s in samples {
            let idx = (((s - min) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Self {
            min,
            max,
            bin_width: width,
            counts,
            total: samples.len() as u64,
        }
    }
}

/// Cross-path statistics of an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// Per recorded instant, per state index i = 1..=n+1: mean over paths of
    /// (x_i - x̂_i)². Row layout matches `times`.
    pub mse: Vec<Vec<f64>>,
    /// Normal-approximation half-width 1.96·sd/√paths of each `mse` entry.
    pub ci_halfwidth: Vec<Vec<f64>>,
    /// Per path, per state index: sup |x_i - x̂_i| over the tail window.
    pub sup_err: Vec<Vec<f64>>,
    pub trigger_counts: Vec<usize>,
    pub inter_event: Histogram,
    /// [tail_start, end] window used for `sup_err` and `tail_mse`.
    pub tail_window: (f64, f64),
    pub paths: usize,
}

impl EnsembleStats {
    /// Time-averaged MSE per state index over the tail window.
    pub fn tail_mse(&self) -> Vec<f64> {
        let m = self.mse.first().map_or(0, Vec::len);
        let mut acc = vec![0.0; m];
        let mut count = 0usize;
        for (rec, t) in self.times.iter().enumerate() {
            if *t >= self.tail_window.0 && *t <= self.tail_window.1 {
                for (a, v) in acc.iter_mut().zip(&self.mse[rec]) {
                    *a += v;
                }
                count += 1;
            }
        }
        if count > 0 {
            for v in acc.iter_mut() {
                *v /= count as f64;
            }
        }
        acc
    }

    /// Builds the statistics from already-simulated trajectories (they must
    /// share one recording grid).
    pub fn from_trajectories(trajectories: &[Trajectory], tail_window: (f64, f64)) -> Result<Self> {
        if trajectories.len() < 2 {
            return Err(Error::InvalidArgument(
                "ensemble statistics need at least 2 paths".into(),
            ));
        }
        let times = trajectories[0].times.clone();
        for traj in trajectories {
            if traj.times != times {
                return Err(Error::InvalidArgument(
                    "trajectories do not share a recording grid".into(),
                ));
            }
        }
        let summaries: Vec<PathSummary> = trajectories
            .iter()
            .map(|t| summarize(t, tail_window.0))
            .collect();
        Ok(reduce_summaries(times, &summaries, tail_window))
    }
}

struct PathSummary {
    err_sq: Vec<Vec<f64>>,
    sup_tail: Vec<f64>,
    trigger_count: usize,
    inter_events: Vec<f64>,
}

fn summarize(traj: &Trajectory, tail_start: f64) -> PathSummary {
    let records = traj.times.len();
    let err_sq = (0..records)
        .map(|rec| {
            traj.errors_at(rec)
                .into_iter()
                .map(|e| e * e)
                .collect::<Vec<f64>>()
        })
        .collect();
    PathSummary {
        err_sq,
        sup_tail: traj.tail_sup_errors(tail_start),
        trigger_count: traj.trigger_count(),
        inter_events: traj.inter_event_times(),
    }
}

fn reduce_summaries(
    times: Vec<f64>,
    summaries: &[PathSummary],
    tail_window: (f64, f64),
) -> EnsembleStats {
    let records = times.len();
    let m = summaries[0].err_sq[0].len();
    let paths = summaries.len();
    let pf = paths as f64;
    let mut sum = vec![vec![0.0f64; m]; records];
    let mut sum_sq = vec![vec![0.0f64; m]; records];
    for s in summaries {
        for rec in 0..records {
            for i in 0..m {
                let v = s.err_sq[rec][i];
                sum[rec][i] += v;
                sum_sq[rec][i] += v * v;
            }
        }
    }
    let mut mse = vec![vec![0.0f64; m]; records];
    let mut ci = vec![vec![0.0f64; m]; records];
    for rec in 0..records {
        for i in 0..m {
            let mean = sum[rec][i] / pf;
            mse[rec][i] = mean;
            let var = ((sum_sq[rec][i] - sum[rec][i] * sum[rec][i] / pf) / (pf - 1.0)).max(0.0);
            ci[rec][i] = 1.96 * (var / pf).sqrt();
        }
    }
    let mut pooled = Vec::new();
    for s in summaries {
        pooled.extend_from_slice(&s.inter_events);
    }
    EnsembleStats {
        times,
        mse,
        ci_halfwidth: ci,
        sup_err: summaries.iter().map(|s| s.sup_tail.clone()).collect(),
        trigger_counts: summaries.iter().map(|s| s.trigger_count).collect(),
        inter_event: Histogram::from_samples(&pooled, 50),
        tail_window,
        paths,
    }
}

/// Simulates `sim.paths` independent sample paths and aggregates their
/// statistics. `tail_start = None` uses t_end/2.
pub fn run_ensemble(
    plant: &PlantConfig,
    noise_cfg: &NoiseConfig,
    design: &Design,
    sim: &SimConfig,
    tail_start: Option<f64>,
) -> Result<EnsembleStats> {
    if sim.paths < 2 {
        return Err(Error::InvalidArgument(
            "an ensemble needs at least 2 paths".into(),
        ));
    }
    let tail_start = tail_start.unwrap_or(sim.t_end / 2.0);
    let tail_window = (tail_start, sim.t_end);
    let summaries: Vec<PathSummary> = (0..sim.paths as u64)
        .into_par_iter()
        .map(|k| simulate_path(plant, noise_cfg, design, sim, k).map(|t| summarize(&t, tail_start)))
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce_summaries(
        SimConfig::recorded_times(sim),
        &summaries,
        tail_window,
    ))
}

/// Sweep bookkeeping: `h = None` resolves to dwell/20 per gain value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub h: Option<f64>,
    pub t_end: f64,
    pub master_seed: u64,
    pub paths: usize,
    pub record_stride: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub r: f64,
    /// Time-averaged tail MSE per state index.
    pub tail_mse: Vec<f64>,
    pub mean_triggers: f64,
    /// Smallest inter-event time over all paths at this gain (infinite when
    /// no path triggered twice).
    pub min_inter_event: f64,
}

/// Gain-sweep outcome: per-r tail statistics plus fitted log-log slopes.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of ln(tail MSE_i) against ln r; NaN when
    /// undefined (zero MSE somewhere).
    pub slopes: Vec<f64>,
    pub slope_defined: Vec<bool>,
    /// Theoretical decay exponents per state index: for the linear design
    /// the MSE exponent 2n+3-2i, for the nonlinear design the almost-sure
    /// error exponent n+1+w_i/(μ-1+ν)-i (its MSE analogue is twice that).
    pub predicted_exponents: Vec<f64>,
    pub tail_window: (f64, f64),
}

/// Runs one ensemble per gain value and fits the error-decay slopes.
pub fn sweep_r(
    plant: &PlantConfig,
    noise_cfg: &NoiseConfig,
    template: &DesignSpec,
    r_values: &[f64],
    sweep: &SweepConfig,
    tail_start: Option<f64>,
) -> Result<SweepResult> {
    if r_values.len() < 3 {
        return Err(Error::InvalidArgument(
            "slope fitting needs at least 3 gain values".into(),
        ));
    }
    if r_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "gain values must be strictly ascending".into(),
        ));
    }
    let mut rows = Vec::with_capacity(r_values.len());
    let mut predicted = Vec::new();
    let mut tail_window = (0.0, 0.0);
    for &r in r_values {
        let design = template.build(r)?;
        let h = sweep.h.unwrap_or(design.dwell() / DEFAULT_H_DIVISOR);
        let sim = SimConfig::new(
            h,
            sweep.t_end,
            sweep.master_seed,
            sweep.paths,
            sweep.record_stride,
        )?;
        let stats = run_ensemble(plant, noise_cfg, &design, &sim, tail_start)?;
        tail_window = stats.tail_window;
        if predicted.is_empty() {
            let m = design.order() + 1;
            predicted = (1..=m)
                .map(|i| match &design {
                    Design::Linear(d) => d.predicted_mse_exponent(i),
                    Design::Nonlinear(d) => d.predicted_as_exponent(i),
                })
                .collect();
        }
        let mean_triggers =
            stats.trigger_counts.iter().sum::<usize>() as f64 / stats.trigger_counts.len() as f64;
        let min_inter_event = if stats.inter_event.total > 0 {
            stats.inter_event.min
        } else {
            f64::INFINITY
        };
        rows.push(SweepRow {
            r,
            tail_mse: stats.tail_mse(),
            mean_triggers,
            min_inter_event,
        });
    }
    let m = rows[0].tail_mse.len();
    let mut slopes = vec![f64::NAN; m];
    let mut defined = vec![false; m];
    for i in 0..m {
        if rows.iter().any(|row| row.tail_mse[i] <= 0.0) {
            continue;
        }
        let xs: Vec<f64> = rows.iter().map(|row| row.r.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|row| row.tail_mse[i].ln()).collect();
        slopes[i] = least_squares_slope(&xs, &ys);
        defined[i] = true;
    }
    Ok(SweepResult {
        rows,
        slopes,
        slope_defined: defined,
        predicted_exponents: predicted,
        tail_window,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - x_mean) * (y - y_mean);
        den += (x - x_mean) * (x - x_mean);
    }
    num / den
}

/// Per-seed outcome of the paired observer comparison.
#[derive(Debug, Clone)]
pub struct ComparePath {
    pub path_index: u64,
    pub linear_sup: Vec<f64>,
    pub nonlinear_sup: Vec<f64>,
    pub linear_triggers: usize,
    pub nonlinear_triggers: usize,
    /// Smallest inter-event times on this path (infinite when only the
    /// initial execution fired).
    pub linear_min_inter_event: f64,
    pub nonlinear_min_inter_event: f64,
}

/// Paired comparison of the two observers on identical noise realizations.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub per_path: Vec<ComparePath>,
    /// Per state index: fraction of seeds where the nonlinear tail
    /// sup-error is strictly smaller.
    pub frac_nonlinear_better: Vec<f64>,
    /// Per state index: fraction of exact ties.
    pub frac_ties: Vec<f64>,
    pub mean_linear_triggers: f64,
    pub mean_nonlinear_triggers: f64,
    /// Mean nonlinear count over mean linear count.
    pub trigger_count_ratio: f64,
    pub tail_window: (f64, f64),
}

/// Runs both observers on the same plant, noise and seeds. Requires equal
/// plant order and tuning gain so the comparison is the one the theory
/// makes.
pub fn compare_observers(
    plant: &PlantConfig,
    noise_cfg: &NoiseConfig,
    linear: &crate::gains::LinearDesign,
    nonlinear: &crate::gains::NonlinearDesign,
    sim: &SimConfig,
    tail_start: Option<f64>,
) -> Result<CompareReport> {
    if linear.order() != nonlinear.order() {
        return Err(Error::InvalidArgument(format!(
            "designs must share the plant order, got {} and {}",
            linear.order(),
            nonlinear.order()
        )));
    }
    if linear.r() != nonlinear.r() {
        return Err(Error::InvalidArgument(format!(
            "designs must share the tuning gain, got {} and {}",
            linear.r(),
            nonlinear.r()
        )));
    }
    if sim.paths == 0 {
        return Err(Error::InvalidArgument("paths must be positive".into()));
    }
    let tail_start = tail_start.unwrap_or(sim.t_end / 2.0);
    let lin_design = Design::Linear(linear.clone());
    let non_design = Design::Nonlinear(nonlinear.clone());
    let per_path: Vec<ComparePath> = (0..sim.paths as u64)
        .into_par_iter()
        .map(|k| -> Result<ComparePath> {
            let lin_traj = simulate_path(plant, noise_cfg, &lin_design, sim, k)?;
            let non_traj = simulate_path(plant, noise_cfg, &non_design, sim, k)?;
            let min_gap = |traj: &Trajectory| {
                traj.inter_event_times()
                    .into_iter()
                    .fold(f64::INFINITY, f64::min)
            };
            Ok(ComparePath {
                path_index: k,
                linear_sup: lin_traj.tail_sup_errors(tail_start),
                nonlinear_sup: non_traj.tail_sup_errors(tail_start),
                linear_triggers: lin_traj.trigger_count(),
                nonlinear_triggers: non_traj.trigger_count(),
                linear_min_inter_event: min_gap(&lin_traj),
                nonlinear_min_inter_event: min_gap(&non_traj),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let m = linear.order() + 1;
    let paths = per_path.len() as f64;
    let mut better = vec![0.0; m];
    let mut ties = vec![0.0; m];
    for p in &per_path {
        for i in 0..m {
            if p.nonlinear_sup[i] < p.linear_sup[i] {
                better[i] += 1.0;
            } else if p.nonlinear_sup[i] == p.linear_sup[i] {
                ties[i] += 1.0;
            }
        }
    }
    for i in 0..m {
        better[i] /= paths;
        ties[i] /= paths;
    }
    let mean_lin = per_path.iter().map(|p| p.linear_triggers).sum::<usize>() as f64 / paths;
    let mean_non = per_path.iter().map(|p| p.nonlinear_triggers).sum::<usize>() as f64 / paths;
    Ok(CompareReport {
        per_path,
        frac_nonlinear_better: better,
        frac_ties: ties,
        mean_linear_triggers: mean_lin,
        mean_nonlinear_triggers: mean_non,
        trigger_count_ratio: mean_non / mean_lin,
        tail_window: (tail_start, sim.t_end),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gains::{CompanionGains, GainPolicy, LinearDesign};
    use crate::noise::BoundedNoise;
    use crate::plant::{DisturbanceSpec, InputSignal};

    fn quiet_noise() -> NoiseConfig {
        NoiseConfig::new(
            BoundedNoise::CosAffine {
                amplitude: 0.0,
                t_coeff: 1.0,
                b_coeff: 1.0,
            },
            2.0,
            2.0,
            0.0,
        )
        .unwrap()
    }

    fn small_linear_design(r: f64) -> Design {
        let gains = CompanionGains::new(vec![3.0, 3.0, 1.0]).unwrap();
        Design::Linear(
            LinearDesign::with_policy(gains, r, 0.9, 1.0, 1.0, GainPolicy::AllowBelowRStar)
                .unwrap(),
        )
    }

    #[test]
    fn zero_everything_stays_at_zero_with_one_trigger() {
        let plant =
            PlantConfig::new(2, vec![0.0, 0.0], DisturbanceSpec::Zero, InputSignal::Zero).unwrap();
        let design = small_linear_design(4.0);
        let sim = SimConfig::new(1e-3, 2.0, 9, 1, Some(100)).unwrap();
        let traj = simulate_path(&plant, &quiet_noise(), &design, &sim, 0).unwrap();
        assert_eq!(traj.trigger_count(), 1);
        for rec in 0..traj.times.len() {
            assert!(traj.x[rec].iter().all(|&v| v == 0.0));
            assert!(traj.xhat[rec].iter().all(|&v| v == 0.0));
            assert_eq!(traj.x_ext[rec], 0.0);
            assert!(traj.eta[rec].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn recorded_grid_matches_sim_config() {
        let sim = SimConfig::new(1e-3, 1.0, 0, 1, Some(137)).unwrap();
        let plant =
            PlantConfig::new(2, vec![0.0, 0.0], DisturbanceSpec::Zero, InputSignal::Zero).unwrap();
        let traj =
            simulate_path(&plant, &quiet_noise(), &small_linear_design(4.0), &sim, 0).unwrap();
        assert_eq!(traj.times, sim.recorded_times());
        assert_eq!(*traj.times.last().unwrap(), sim.n_steps() as f64 * sim.h);
    }

    #[test]
    fn step_size_must_resolve_dwell() {
        let plant =
            PlantConfig::new(2, vec![0.0, 0.0], DisturbanceSpec::Zero, InputSignal::Zero).unwrap();
        let design = small_linear_design(4.0);
        // dwell = 4^-2.5 = 1/32; h above dwell/10 is rejected.
        let sim = SimConfig::new(0.01, 1.0, 0, 1, None).unwrap();
        assert!(simulate_path(&plant, &quiet_noise(), &design, &sim, 0).is_err());
    }

    #[test]
    fn eta_matches_definition_bitwise() {
        let plant = PlantConfig::new(
            2,
            vec![1.0, -1.0],
            DisturbanceSpec::DampedSinusoid {
                b: [2.0, 2.0, 1.5, 1.5, 1.5, 1.5, 2.5, 2.5, 2.5],
            },
            InputSignal::Cosine { freq: 2.5 },
        )
        .unwrap();
        let noise = NoiseConfig::new(
            BoundedNoise::CosAffine {
                amplitude: 1.5,
                t_coeff: 2.5,
                b_coeff: 2.5,
            },
            2.0,
            2.0,
            0.0,
        )
        .unwrap();
        let design = small_linear_design(5.0);
        let r = design.r();
        let sim = SimConfig::new(1e-3, 1.0, 3, 1, Some(50)).unwrap();
        let traj = simulate_path(&plant, &noise, &design, &sim, 0).unwrap();
        for rec in 0..traj.times.len() {
            let eta1 = r.powi(2) * (traj.x[rec][0] - traj.xhat[rec][0]);
            let eta2 = r.powi(1) * (traj.x[rec][1] - traj.xhat[rec][1]);
            let eta3 = traj.x_ext[rec] - traj.xhat[rec][2];
            assert_eq!(traj.eta[rec][0].to_bits(), eta1.to_bits());
            assert_eq!(traj.eta[rec][1].to_bits(), eta2.to_bits());
            assert_eq!(traj.eta[rec][2].to_bits(), eta3.to_bits());
        }
    }

    #[test]
    fn ensemble_needs_two_paths() {
        let plant =
            PlantConfig::new(2, vec![0.0, 0.0], DisturbanceSpec::Zero, InputSignal::Zero).unwrap();
        let sim = SimConfig::new(1e-3, 1.0, 0, 1, None).unwrap();
        assert!(run_ensemble(
            &plant,
            &quiet_noise(),
            &small_linear_design(4.0),
            &sim,
            None
        )
        .is_err());
    }

    #[test]
    fn degenerate_ensemble_of_identical_paths() {
        let plant = PlantConfig::new(
            2,
            vec![1.0, -1.0],
            DisturbanceSpec::DampedSinusoid {
                b: [2.0, 2.0, 1.5, 1.5, 1.5, 1.5, 2.5, 2.5, 2.5],
            },
            InputSignal::Cosine { freq: 2.5 },
        )
        .unwrap();
        let design = small_linear_design(5.0);
        let sim = SimConfig::new(1e-3, 1.0, 3, 1, Some(50)).unwrap();
        let traj = simulate_path(&plant, &quiet_noise(), &design, &sim, 7).unwrap();
        let stats =
            EnsembleStats::from_trajectories(&[traj.clone(), traj.clone()], (0.5, 1.0)).unwrap();
        for rec in 0..stats.times.len() {
            for (i, e) in traj.errors_at(rec).into_iter().enumerate() {
                assert_eq!(stats.mse[rec][i], e * e);
                assert_eq!(stats.ci_halfwidth[rec][i], 0.0);
            }
        }
    }

    #[test]
    fn zero_noise_ensemble_has_zero_ci() {
        let plant = PlantConfig::new(
            2,
            vec![1.0, -1.0],
            DisturbanceSpec::DampedSinusoid {
                // b6 = b9 = 0 decouples both noise sources.
                b: [2.0, 2.0, 1.5, 1.5, 1.5, 0.0, 2.5, 2.5, 0.0],
            },
            InputSignal::Cosine { freq: 2.5 },
        )
        .unwrap();
        let design = small_linear_design(5.0);
        let sim = SimConfig::new(1e-3, 1.0, 3, 4, Some(50)).unwrap();
        let stats = run_ensemble(&plant, &quiet_noise(), &design, &sim, None).unwrap();
        for row in &stats.ci_halfwidth {
            assert!(row.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ensemble_reduction_is_parallelism_invariant() {
        let plant = PlantConfig::new(
            2,
            vec![1.0, -1.0],
            DisturbanceSpec::DampedSinusoid {
                b: [2.0, 2.0, 1.5, 1.5, 1.5, 1.5, 2.5, 2.5, 2.5],
            },
            InputSignal::Cosine { freq: 2.5 },
        )
        .unwrap();
        let noise = NoiseConfig::new(
            BoundedNoise::CosAffine {
                amplitude: 1.5,
                t_coeff: 2.5,
                b_coeff: 2.5,
            },
            2.0,
            2.0,
            0.0,
        )
        .unwrap();
        let design = small_linear_design(5.0);
        let sim = SimConfig::new(1e-3, 1.0, 3, 8, Some(50)).unwrap();
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_ensemble(&plant, &noise, &design, &sim, None).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        assert_eq!(a.mse, b.mse);
        assert_eq!(a.ci_halfwidth, b.ci_halfwidth);
        assert_eq!(a.trigger_counts, b.trigger_counts);
        assert_eq!(a.sup_err, b.sup_err);
    }

    #[test]
    fn sweep_rejects_bad_gain_lists() {
        let plant =
            PlantConfig::new(2, vec![0.0, 0.0], DisturbanceSpec::Zero, InputSignal::Zero).unwrap();
        let template = DesignSpec::Linear {
            a: vec![3.0, 3.0, 1.0],
            zeta: 0.9,
            theta: 1.0,
            epsilon: 1.0,
            policy: GainPolicy::AllowBelowRStar,
        };
        let sweep = SweepConfig {
            h: None,
            t_end: 1.0,
            master_seed: 0,
            paths: 2,
            record_stride: Some(50),
        };
        assert!(sweep_r(&plant, &quiet_noise(), &template, &[2.0, 4.0], &sweep, None).is_err());
        assert!(sweep_r(
            &plant,
            &quiet_noise(),
            &template,
            &[4.0, 2.0, 8.0],
            &sweep,
            None
        )
        .is_err());
    }

    #[test]
    fn deterministic_zero_sweep_flags_undefined_slopes() {
        let plant =
            PlantConfig::new(2, vec![0.0, 0.0], DisturbanceSpec::Zero, InputSignal::Zero).unwrap();
        let template = DesignSpec::Linear {
            a: vec![3.0, 3.0, 1.0],
            zeta: 0.9,
            theta: 1.0,
            epsilon: 1.0,
            policy: GainPolicy::AllowBelowRStar,
        };
        let sweep = SweepConfig {
            h: None,
            t_end: 1.0,
            master_seed: 0,
            paths: 2,
            record_stride: Some(50),
        };
        let result = sweep_r(
            &plant,
            &quiet_noise(),
            &template,
            &[2.0, 4.0, 8.0],
            &sweep,
            None,
        )
        .unwrap();
        for i in 0..3 {
            assert!(result.rows.iter().all(|row| row.tail_mse[i] == 0.0));
            assert!(result.slopes[i].is_nan());
            assert!(!result.slope_defined[i]);
        }
        assert_eq!(result.predicted_exponents, vec![5.0, 3.0, 1.0]);
        assert!(result.rows.iter().all(|row| row.mean_triggers == 1.0));
    }

    #[test]
    fn compare_requires_matching_designs() {
        let plant =
            PlantConfig::new(2, vec![0.0, 0.0], DisturbanceSpec::Zero, InputSignal::Zero).unwrap();
        let gains = CompanionGains::new(vec![3.0, 3.0, 1.0]).unwrap();
        let lin = LinearDesign::with_policy(
            gains.clone(),
            8.0,
            0.9,
            1.0,
            1.0,
            GainPolicy::AllowBelowRStar,
        )
        .unwrap();
        let non = crate::gains::NonlinearDesign::new(gains, 15.0, 3.0, 6.0 / 7.0, None, 1.0, 1.0)
            .unwrap();
        let sim = SimConfig::new(1e-5, 0.1, 0, 2, None).unwrap();
        assert!(compare_observers(&plant, &quiet_noise(), &lin, &non, &sim, None).is_err());
    }

    #[test]
    fn compare_identical_zero_configs_reports_ties() {
        let plant =
            PlantConfig::new(2, vec![0.0, 0.0], DisturbanceSpec::Zero, InputSignal::Zero).unwrap();
        let gains = CompanionGains::new(vec![3.0, 3.0, 1.0]).unwrap();
        let lin = LinearDesign::with_policy(
            gains.clone(),
            15.0,
            0.9,
            1.0,
            1.0,
            GainPolicy::AllowBelowRStar,
        )
        .unwrap();
        let non = crate::gains::NonlinearDesign::new(gains, 15.0, 3.0, 6.0 / 7.0, None, 1.0, 1.0)
            .unwrap();
        let sim = SimConfig::new(1e-5, 0.05, 0, 3, Some(100)).unwrap();
        let report = compare_observers(&plant, &quiet_noise(), &lin, &non, &sim, None).unwrap();
        for i in 0..3 {
            assert_eq!(report.frac_nonlinear_better[i], 0.0);
            assert_eq!(report.frac_ties[i], 1.0);
        }
        assert_eq!(report.trigger_count_ratio, 1.0);
    }

    #[test]
    fn histogram_handles_degenerate_samples() {
        let h = Histogram::from_samples(&[], 10);
        assert_eq!(h.total, 0);
        let h1 = Histogram::from_samples(&[0.5, 0.5, 0.5], 10);
        assert_eq!(h1.counts, vec![3]);
        let h2 = Histogram::from_samples(&[0.0, 1.0, 0.5, 0.99], 4);
        assert_eq!(h2.total, 4);
        assert_eq!(h2.counts.iter().sum::<u64>(), 4);
        assert_eq!(h2.counts.len(), 4);
    }
}
