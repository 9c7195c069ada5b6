//! The six subcommands. Every simulation command writes its CSV artifacts
//! plus a JSON metadata sidecar echoing the manifest, the applied overrides
//! and the wall time.

use std::path::PathBuf;
use std::time::Instant;

use serde_json::{json, Value};

use eteso_core::{
    compare_observers, homogeneity_residual, mu_interval, nu_interval, run_ensemble, simulate_path,
    sweep_r, LinearDesign, NonlinearDesign,
};

use crate::manifest::{Manifest, ObserverChoice};
use crate::output::{
    compare_paths_csv, compare_summary_csv, ensemble_csv, ensemble_extras, fmt_f64, json_f64,
    json_f64_vec, matrix_json, matrix_lines, sweep_csv, to_json_string, trajectory_csv,
    triggers_csv, write_file,
};
use crate::CliError;

pub struct Context {
    pub manifest: Manifest,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub workers: Option<usize>,
}

impl Context {
    fn metadata(&self, command: &str, outputs: &[&str], extra: Value, started: Instant) -> Value {
        let manifest_echo = serde_json::to_value(&self.manifest).unwrap_or(Value::Null);
        json!({
            "schema_version": crate::manifest::SCHEMA_VERSION,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "manifest": manifest_echo,
            "overrides": {
                "seed": self.seed,
                "paths": self.paths,
                "workers": self.workers,
            },
            "outputs": outputs,
            "wall_time_s": started.elapsed().as_secs_f64(),
            "extra": extra,
        })
    }
}

fn linear_report(d: &LinearDesign) -> Value {
    let m = d.order() + 1;
    json!({
        "a": d.gains().coefficients(),
        "n": d.order(),
        "g": matrix_json(d.gains().companion()),
        "hurwitz": true,
        "q": matrix_json(d.lyapunov_q()),
        "lambda_min_q": json_f64(d.lambda_min_q()),
        "lambda_max_q": json_f64(d.lambda_max_q()),
        "zeta": d.zeta(),
        "r": d.r(),
        "r_star": json_f64(d.r_star()),
        "below_r_star": d.below_r_star(),
        "theta": d.theta(),
        "epsilon": d.epsilon(),
        "tau": json_f64(d.dwell()),
        "threshold": json_f64(d.threshold()),
        "predicted_mse_exponents": json_f64_vec(
            &(1..=m).map(|i| d.predicted_mse_exponent(i)).collect::<Vec<_>>()
        ),
        "predicted_as_exponents": json_f64_vec(
            &(1..=m).map(|i| d.predicted_as_exponent(i)).collect::<Vec<_>>()
        ),
    })
}

fn nonlinear_report(d: &NonlinearDesign) -> Result<Value, CliError> {
    let m = d.order() + 1;
    let nu_iv = nu_interval(d.order(), d.p())?;
    let mu_iv = mu_interval(d.order(), d.nu())?;
    Ok(json!({
        "a": d.gains().coefficients(),
        "n": d.order(),
        "g": matrix_json(d.gains().companion()),
        "hurwitz": true,
        "p": d.p(),
        "nu": d.nu(),
        "nu_interval": [json_f64(nu_iv.0), json_f64(nu_iv.1)],
        "mu": d.mu(),
        "mu_interval": [json_f64(mu_iv.0), json_f64(mu_iv.1)],
        "weights": json_f64_vec(d.weights()),
        "r": d.r(),
        "theta_star": d.theta_star(),
        "epsilon_star": d.epsilon_star(),
        "tau_star": json_f64(d.dwell()),
        "threshold_star": json_f64(d.threshold()),
        "predicted_as_exponents": json_f64_vec(
            &(1..=m).map(|i| d.predicted_as_exponent(i)).collect::<Vec<_>>()
        ),
    }))
}

pub fn design(ctx: &Context) -> Result<(), CliError> {
    let started = Instant::now();
    let manifest = &ctx.manifest;
    if manifest.design.linear.is_none() && manifest.design.nonlinear.is_none() {
        return Err(CliError::Manifest(
            "manifest configures no observer design".into(),
        ));
    }
    let mut report = serde_json::Map::new();

    if manifest.design.linear.is_some() {
        let d = manifest.linear_design()?;
        println!("linear design");
        println!("  a = {:?}   (n = {})", d.gains().coefficients(), d.order());
        println!("  G:");
        for line in matrix_lines(d.gains().companion()) {
            println!("    {line}");
        }
        println!("  hurwitz: true");
        println!("  Q:");
        for line in matrix_lines(d.lyapunov_q()) {
            println!("    {line}");
        }
        println!(
            "  lambda(Q): min {}  max {}",
            fmt_f64(d.lambda_min_q()),
            fmt_f64(d.lambda_max_q())
        );
        println!(
            "  r = {}  r* = {}{}",
            fmt_f64(d.r()),
            fmt_f64(d.r_star()),
            if d.below_r_star() {
                "  (warning: r below r*; convergence bounds not guaranteed)"
            } else {
                ""
            }
        );
        println!(
            "  tau = {}  threshold = {}",
            fmt_f64(d.dwell()),
            fmt_f64(d.threshold())
        );
        let m = d.order() + 1;
        let mse: Vec<String> = (1..=m)
            .map(|i| fmt_f64(d.predicted_mse_exponent(i)))
            .collect();
        let asym: Vec<String> = (1..=m)
            .map(|i| fmt_f64(d.predicted_as_exponent(i)))
            .collect();
        println!("  predicted mse exponents: [{}]", mse.join(", "));
        println!("  predicted a.s. exponents: [{}]", asym.join(", "));
        report.insert("linear".into(), linear_report(&d));
    }

    if manifest.design.nonlinear.is_some() {
        let d = manifest.nonlinear_design()?;
        let nu_iv = nu_interval(d.order(), d.p())?;
        let mu_iv = mu_interval(d.order(), d.nu())?;
        println!("nonlinear design");
        println!("  a = {:?}   (n = {})", d.gains().coefficients(), d.order());
        println!(
            "  nu = {} in ({}, {})",
            fmt_f64(d.nu()),
            fmt_f64(nu_iv.0),
            fmt_f64(nu_iv.1)
        );
        println!(
            "  mu = {} in ({}, {})",
            fmt_f64(d.mu()),
            fmt_f64(mu_iv.0),
            fmt_f64(mu_iv.1)
        );
        let w: Vec<String> = d.weights().iter().map(|v| fmt_f64(*v)).collect();
        println!("  weights = [{}]", w.join(", "));
        println!(
            "  r = {}  tau* = {}  threshold* = {}",
            fmt_f64(d.r()),
            fmt_f64(d.dwell()),
            fmt_f64(d.threshold())
        );
        let m = d.order() + 1;
        let asym: Vec<String> = (1..=m)
            .map(|i| fmt_f64(d.predicted_as_exponent(i)))
            .collect();
        println!("  predicted a.s. exponents: [{}]", asym.join(", "));
        report.insert("nonlinear".into(), nonlinear_report(&d)?);
    }

    report.insert(
        "metadata".into(),
        ctx.metadata("design", &["design.json"], Value::Null, started),
    );
    write_file(
        &ctx.out,
        "design.json",
        &to_json_string(&Value::Object(report)),
    )?;
    Ok(())
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let started = Instant::now();
    let manifest = &ctx.manifest;
    let run_section = manifest.run.clone().unwrap_or_default();
    let choice = manifest.pick_observer(run_section.observer)?;
    let design = manifest.design_for(choice)?;
    let plant = manifest.plant_config()?;
    let noise = manifest.noise_config()?;
    let sim = manifest.sim_config(&[design.dwell()], ctx.seed, ctx.paths)?;
    let traj = simulate_path(&plant, &noise, &design, &sim, 0)?;

    write_file(
        &ctx.out,
        "trajectory.csv",
        &trajectory_csv(&traj, run_section.eta),
    )?;
    write_file(&ctx.out, "triggers.csv", &triggers_csv(&traj))?;
    let extra = json!({
        "observer": match choice { ObserverChoice::Linear => "linear", ObserverChoice::Nonlinear => "nonlinear" },
        "h": json_f64(sim.h),
        "n_steps": sim.n_steps(),
        "record_stride": sim.record_stride,
        "trigger_count": traj.trigger_count(),
        "sanity_exceeded_at": traj.sanity_exceeded_at.map(json_f64),
    });
    let meta = ctx.metadata("run", &["trajectory.csv", "triggers.csv"], extra, started);
    write_file(&ctx.out, "run_metadata.json", &to_json_string(&meta))?;
    if let Some(t) = traj.sanity_exceeded_at {
        eprintln!("warning: |x| exceeded the sanity bound at t={}", fmt_f64(t));
    }
    println!(
        "run: {} triggers over [0, {}]; wrote trajectory.csv, triggers.csv",
        traj.trigger_count(),
        fmt_f64(sim.t_end)
    );
    Ok(())
}

pub fn ensemble(ctx: &Context) -> Result<(), CliError> {
    let started = Instant::now();
    let manifest = &ctx.manifest;
    let section = manifest.ensemble.clone().unwrap_or_default();
    let choice = manifest.pick_observer(section.observer)?;
    let design = manifest.design_for(choice)?;
    let plant = manifest.plant_config()?;
    let noise = manifest.noise_config()?;
    let sim = manifest.sim_config(&[design.dwell()], ctx.seed, ctx.paths)?;
    let stats = run_ensemble(&plant, &noise, &design, &sim, section.tail_start)?;

    write_file(&ctx.out, "ensemble.csv", &ensemble_csv(&stats))?;
    let meta = ctx.metadata(
        "ensemble",
        &["ensemble.csv"],
        ensemble_extras(&stats),
        started,
    );
    write_file(&ctx.out, "ensemble_metadata.json", &to_json_string(&meta))?;
    println!(
        "ensemble: {} paths, tail window [{}, {}]; wrote ensemble.csv",
        stats.paths,
        fmt_f64(stats.tail_window.0),
        fmt_f64(stats.tail_window.1)
    );
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let started = Instant::now();
    let manifest = &ctx.manifest;
    let section = manifest
        .sweep
        .clone()
        .ok_or_else(|| CliError::Manifest("sweep needs a [sweep] section with r_values".into()))?;
    let choice = manifest.pick_observer(section.observer)?;
    let template = manifest.design_spec(choice)?;
    let plant = manifest.plant_config()?;
    let noise = manifest.noise_config()?;
    let sweep_cfg = manifest.sweep_config(ctx.seed, ctx.paths);
    let result = sweep_r(
        &plant,
        &noise,
        &template,
        &section.r_values,
        &sweep_cfg,
        section.tail_start,
    )?;

    write_file(&ctx.out, "sweep.csv", &sweep_csv(&result))?;
    let extra = json!({
        "observer": match choice { ObserverChoice::Linear => "linear", ObserverChoice::Nonlinear => "nonlinear" },
        "tail_window": [json_f64(result.tail_window.0), json_f64(result.tail_window.1)],
        "slopes": json_f64_vec(&result.slopes),
        "slope_defined": result.slope_defined,
        "predicted_exponents": json_f64_vec(&result.predicted_exponents),
        "min_inter_event_per_r": json_f64_vec(
            &result.rows.iter().map(|row| row.min_inter_event).collect::<Vec<_>>()
        ),
    });
    let meta = ctx.metadata("sweep", &["sweep.csv"], extra, started);
    write_file(&ctx.out, "sweep_metadata.json", &to_json_string(&meta))?;
    println!(
        "sweep: {} gain values, {} paths each; wrote sweep.csv",
        result.rows.len(),
        sweep_cfg.paths
    );
    Ok(())
}

pub fn compare(ctx: &Context) -> Result<(), CliError> {
    let started = Instant::now();
    let manifest = &ctx.manifest;
    let section = manifest.compare.clone().unwrap_or_default();
    let linear = manifest.linear_design()?;
    let nonlinear = manifest.nonlinear_design()?;
    let plant = manifest.plant_config()?;
    let noise = manifest.noise_config()?;
    let sim = manifest.sim_config(&[linear.dwell(), nonlinear.dwell()], ctx.seed, ctx.paths)?;
    let report = compare_observers(
        &plant,
        &noise,
        &linear,
        &nonlinear,
        &sim,
        section.tail_start,
    )?;

    write_file(&ctx.out, "compare_paths.csv", &compare_paths_csv(&report))?;
    write_file(
        &ctx.out,
        "compare_summary.csv",
        &compare_summary_csv(&report),
    )?;
    let extra = json!({
        "tail_window": [json_f64(report.tail_window.0), json_f64(report.tail_window.1)],
        "mean_linear_triggers": json_f64(report.mean_linear_triggers),
        "mean_nonlinear_triggers": json_f64(report.mean_nonlinear_triggers),
        "trigger_count_ratio": json_f64(report.trigger_count_ratio),
        "frac_nonlinear_better": json_f64_vec(&report.frac_nonlinear_better),
        "frac_ties": json_f64_vec(&report.frac_ties),
    });
    let meta = ctx.metadata(
        "compare",
        &["compare_paths.csv", "compare_summary.csv"],
        extra,
        started,
    );
    write_file(&ctx.out, "compare_metadata.json", &to_json_string(&meta))?;
    println!(
        "compare: {} paired paths; mean triggers {} (linear) vs {} (nonlinear); wrote compare_paths.csv, compare_summary.csv",
        report.per_path.len(),
        fmt_f64(report.mean_linear_triggers),
        fmt_f64(report.mean_nonlinear_triggers)
    );
    Ok(())
}

pub fn validate(ctx: &Context) -> Result<(), CliError> {
    let manifest = &ctx.manifest;
    let mut failures = 0usize;
    let mut check = |name: &str, result: Result<String, CliError>| match result {
        Ok(detail) if detail.is_empty() => println!("ok: {name}"),
        Ok(detail) => println!("ok: {name} ({detail})"),
        Err(e) => {
            println!("FAIL: {name}: {e}");
            failures += 1;
        }
    };

    check(
        "plant configuration",
        manifest.plant_config().map(|_| String::new()),
    );
    check(
        "noise configuration",
        manifest.noise_config().map(|_| String::new()),
    );

    let mut dwells = Vec::new();
    if manifest.design.linear.is_some() {
        check(
            "linear design",
            manifest.linear_design().map(|d| {
                dwells.push(d.dwell());
                let warn = if d.below_r_star() {
                    format!(
                        "; warning: r={} below r*={}",
                        fmt_f64(d.r()),
                        fmt_f64(d.r_star())
                    )
                } else {
                    String::new()
                };
                format!(
                    "tau={} threshold={}{}",
                    fmt_f64(d.dwell()),
                    fmt_f64(d.threshold()),
                    warn
                )
            }),
        );
    }
    if manifest.design.nonlinear.is_some() {
        check(
            "nonlinear design",
            manifest.nonlinear_design().map(|d| {
                dwells.push(d.dwell());
                format!(
                    "tau*={} threshold*={}",
                    fmt_f64(d.dwell()),
                    fmt_f64(d.threshold())
                )
            }),
        );
        if let Ok(d) = manifest.nonlinear_design() {
            check(
                "homogeneity of the correction field",
                homogeneity_residual(d.gains(), d.nu(), 200, (0.1, 10.0), 1)
                    .map_err(CliError::from)
                    .and_then(|res| {
                        if res <= 1e-9 {
                            Ok(format!("residual {res:.2e}"))
                        } else {
                            Err(CliError::Manifest(format!(
                                "homogeneity residual {res:.2e} above 1e-9"
                            )))
                        }
                    }),
            );
        }
    }
    if dwells.is_empty() {
        check(
            "observer design",
            Err(CliError::Manifest(
                "manifest configures no observer design".into(),
            )),
        );
    } else {
        check(
            "simulation grid",
            manifest
                .sim_config(&dwells, ctx.seed, ctx.paths)
                .map(|sim| format!("h={} steps={}", fmt_f64(sim.h), sim.n_steps())),
        );
    }

    if failures > 0 {
        return Err(CliError::Manifest(format!(
            "{failures} validation check(s) failed"
        )));
    }
    println!("manifest valid");
    Ok(())
}
