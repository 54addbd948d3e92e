//! Batch front end: configuration, run orchestration and file output.
//!
//! A trajectory directory holds `resolved.cfg`, `series.csv` and snapshot
//! pairs `vel_NNNNNN.rob` (records `u1`, `u2`) and `theta_NNNNNN.rob`
//! (record `Theta`), numbered by step.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use robsim_core::assimilation::{
    assimilate_from_stream, estimate_decay_rate, export_observations, ingest_observations, spin_up, tune,
    twin_experiment, DecayWindow, NudgingParams, TuneOptions, TwinOptions,
};
use robsim_core::diagnostics::{kinetic_energy, max_principle_check, report, report_csv, thermal_energy};
use robsim_core::grid::{velocity_w12, ScalarField3D, VelocityField};
use robsim_core::interpolant::{Interpolant, InterpolantSpec};
use robsim_core::io::{atomic_write, read_scalar3d_file, read_velocity_file, scalar3d_record, velocity_bytes};
use robsim_core::solver::{step_count, RobModel, State, Trajectory};
use robsim_core::{Error, Result};

pub use config::{Mode, RunConfig};

/// Process exit status for an error: 2 configuration, 3 numerical, 4 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 4,
        Error::NonConvergence { .. }
        | Error::IncompatibleRhs { .. }
        | Error::SingularCorrection { .. }
        | Error::CflViolation { .. }
        | Error::InsufficientData(_) => 3,
        _ => 2,
    }
}

/// `ROBSIM_THREADS`, default 1.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var("ROBSIM_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => v.trim().parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| Error::Validation {
            key: "ROBSIM_THREADS".into(),
            reason: format!("expected a positive integer, got {v:?}"),
        }),
    }
}

pub fn build_model(cfg: &RunConfig) -> Result<RobModel> {
    let dom = cfg.domain()?;
    let (lx, ly) = (cfg.lx, cfg.ly);
    let theta_b = cfg.theta_b.clone();
    Ok(RobModel::new(&dom, &cfg.physics(), move |x| theta_b.eval(x, lx, ly), cfg.dt, cfg.elliptic())?
        .with_cfl_limit(cfg.cfl))
}

fn state_from_exprs(
    cfg: &RunConfig,
    model: &RobModel,
    psi: &robsim_core::expr::Expr,
    theta: &robsim_core::expr::Expr,
) -> Result<State> {
    let dom = model.domain();
    let (lx, ly) = (cfg.lx, cfg.ly);
    let v = VelocityField::from_streamfunction(dom, |x| psi.eval([x[0], x[1], 0.0], lx, ly));
    let theta = ScalarField3D::from_fn("theta", dom, |x| theta.eval(x, lx, ly));
    model.initial_state(&v, &theta)
}

/// Reference initial data: the restart snapshot if configured, else the
/// `init.*` expressions.
pub fn initial_state(cfg: &RunConfig, model: &RobModel) -> Result<State> {
    match &cfg.init_restart {
        Some(dir) => {
            let states = load_trajectory(dir, model)?;
            let last = states
                .into_iter()
                .last()
                .ok_or_else(|| Error::InsufficientData(format!("no snapshots in {}", dir.display())))?;
            Ok(State { step: 0, t: 0.0, ..last })
        }
        None => state_from_exprs(cfg, model, &cfg.init_velocity, &cfg.init_theta),
    }
}

/// Initial data of the nudged copy, from `nudging.velocity` / `nudging.theta`.
pub fn nudged_initial_state(cfg: &RunConfig, model: &RobModel) -> Result<State> {
    state_from_exprs(cfg, model, &cfg.nudged_velocity, &cfg.nudged_theta)
}

fn snapshot_paths(dir: &Path, step: u64) -> (PathBuf, PathBuf) {
    (dir.join(format!("vel_{step:06}.rob")), dir.join(format!("theta_{step:06}.rob")))
}

pub fn write_snapshot(dir: &Path, model: &RobModel, s: &State) -> Result<()> {
    let (vp, tp) = snapshot_paths(dir, s.step);
    atomic_write(&vp, &velocity_bytes(&s.v, s.t)?)?;
    let theta = model.reduced(&s.z).renamed("Theta");
    let mut buf = Vec::new();
    scalar3d_record(&theta, s.t).write_to(&mut buf)?;
    atomic_write(&tp, &buf)
}

/// Every snapshot pair in `dir`, ordered by step.
pub fn load_trajectory(dir: &Path, model: &RobModel) -> Result<Vec<State>> {
    let mut steps: Vec<u64> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("vel_")?.strip_suffix(".rob")?.parse().ok()
        })
        .collect();
    steps.sort_unstable();
    steps
        .into_iter()
        .map(|step| {
            let (vp, tp) = snapshot_paths(dir, step);
            let (t, v) = read_velocity_file(model.domain(), &vp)?;
            let (_, theta) = read_scalar3d_file(model.domain(), &tp)?;
            Ok(State { step, t, v, z: model.z_of(&theta) })
        })
        .collect()
}

fn keep(every: u64, k: u64, n: u64) -> bool {
    k == 0 || k == n || (every > 0 && k.is_multiple_of(every))
}

const SERIES_HEADER: &str = "t,ke,thermal,theta_max,theta_min,u_h1,theta_inf";

fn series_line(model: &RobModel, s: &State) -> String {
    let theta = model.reduced(&s.z);
    format!(
        "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
        s.t,
        kinetic_energy(model, s),
        thermal_energy(model, s),
        theta.max(),
        theta.min(),
        velocity_w12(model.domain(), &s.v),
        theta.max_abs()
    )
}

/// Runs `cfg` to `time.t_end`, writing snapshots and `series.csv` into `out`.
/// On a failed step the last good state is written as `abort_*.rob`.
pub fn simulate_to_dir(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    atomic_write(&out.join("resolved.cfg"), cfg.resolved().as_bytes())?;
    let model = build_model(cfg)?;
    let mut state = initial_state(cfg, &model)?;
    let n = step_count(cfg.t_end, cfg.dt);
    let mut series = String::from(SERIES_HEADER);
    series.push('\n');
    let result = model.run(&mut state, n, |s| {
        let k = s.step;
        if keep(cfg.snapshot_every, k, n) {
            write_snapshot(out, &model, s)?;
        }
        if k % cfg.series_every == 0 || k == n {
            series.push_str(&series_line(&model, s));
        }
        Ok(())
    });
    atomic_write(&out.join("series.csv"), series.as_bytes())?;
    if let Err(e) = result {
        let mut buf = velocity_bytes(&state.v, state.t)?;
        atomic_write(&out.join("abort_vel.rob"), &buf)?;
        buf.clear();
        scalar3d_record(&model.reduced(&state.z).renamed("Theta"), state.t).write_to(&mut buf)?;
        atomic_write(&out.join("abort_theta.rob"), &buf)?;
        return Err(e);
    }
    Ok(())
}

fn write_trajectory_dir(dir: &Path, cfg: &RunConfig, model: &RobModel, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir)?;
    atomic_write(&dir.join("resolved.cfg"), cfg.resolved().as_bytes())?;
    for s in &traj.states {
        write_snapshot(dir, model, s)?;
    }
    Ok(())
}

/// Nudging strength and interpolant from `nudging.lambda` and `nudging.interp`.
pub fn nudging_params(cfg: &RunConfig, model: &RobModel) -> Result<NudgingParams> {
    NudgingParams::new(cfg.lambda, Interpolant::new(cfg.interp, model.domain())?)
}

/// Spin-up, then the lockstep twin run. Writes `errors.csv`, `decay.txt` and
/// the `reference/` and `nudged/` trajectory directories.
pub fn twin_to_dir(cfg: &RunConfig, out: &Path, threads: usize) -> Result<()> {
    fs::create_dir_all(out)?;
    atomic_write(&out.join("resolved.cfg"), cfg.resolved().as_bytes())?;
    let model = build_model(cfg)?;
    let params = nudging_params(cfg, &model)?;
    let reference = spin_up(&model, &initial_state(cfg, &model)?, cfg.spinup)?;
    let nudged = nudged_initial_state(cfg, &model)?;
    let opts = TwinOptions {
        t_end: cfg.t_end,
        sample_every: cfg.sample_every,
        keep_every: Some(if cfg.snapshot_every == 0 { u64::MAX } else { cfg.snapshot_every }),
        threads,
    };
    let res = twin_experiment(&model, &reference, &nudged, &params, &opts)?;
    let mut csv = String::from("t,velocity,temperature,lyapunov\n");
    for e in &res.errors {
        let _ = writeln!(csv, "{},{:e},{:e},{:e}", e.t, e.velocity, e.temperature, e.lyapunov);
    }
    atomic_write(&out.join("errors.csv"), csv.as_bytes())?;
    let series: Vec<(f64, f64)> = res.errors.iter().map(|e| (e.t, e.lyapunov)).collect();
    let window = DecayWindow { t_min: cfg.transient, ..DecayWindow::default() };
    let decay = match estimate_decay_rate(&series, &window) {
        Ok(fit) => format!(
            "beta_hat = {:e}\nr_squared = {}\nprefactor = {:e}\nsamples = {}\n",
            fit.beta_hat, fit.r_squared, fit.prefactor, fit.samples
        ),
        Err(e) => format!("# {e}\n"),
    };
    atomic_write(&out.join("decay.txt"), decay.as_bytes())?;
    write_trajectory_dir(&out.join("reference"), cfg, &model, &res.reference)?;
    write_trajectory_dir(&out.join("nudged"), cfg, &model, &res.nudged)
}

/// `I_δ` of the snapshots in `traj` at cadence `every`, written to `out`.
pub fn observe_to_file(traj: &Path, spec: InterpolantSpec, every: f64, out: &Path) -> Result<usize> {
    let cfg = RunConfig::load(&traj.join("resolved.cfg"))?;
    let model = build_model(&cfg)?;
    let states = load_trajectory(traj, &model)?;
    let interp = Interpolant::new(spec, model.domain())?;
    Ok(export_observations(&Trajectory { states }, &interp, every, out)?.len())
}

/// Nudges the `nudging.*` initial data toward the observations in `obs`.
pub fn assimilate_to_dir(cfg: &RunConfig, obs: &Path, out: &Path) -> Result<()> {
    let stream = ingest_observations(obs)?;
    if stream.spec() != cfg.interp {
        return Err(Error::SpecMismatch(format!("observations use {}, config uses {}", stream.spec(), cfg.interp)));
    }
    fs::create_dir_all(out)?;
    atomic_write(&out.join("resolved.cfg"), cfg.resolved().as_bytes())?;
    let model = build_model(cfg)?;
    let params = nudging_params(cfg, &model)?;
    let initial = nudged_initial_state(cfg, &model)?;
    let every = if cfg.snapshot_every == 0 { u64::MAX } else { cfg.snapshot_every };
    let res = assimilate_from_stream(&model, &initial, &stream, &params, Some(cfg.t_end), every)?;
    let mut csv = String::from("t,misfit\n");
    for (t, m) in &res.misfit {
        let _ = writeln!(csv, "{t},{m:e}");
    }
    atomic_write(&out.join("misfit.csv"), csv.as_bytes())?;
    write_trajectory_dir(out, cfg, &model, &res.trajectory)
}

/// `report.csv` for the trajectory in `traj`; returns a one-line summary of
/// the maximum principle check when it applies.
pub fn diagnose_to_file(traj: &Path, out: &Path) -> Result<String> {
    let cfg = RunConfig::load(&traj.join("resolved.cfg"))?;
    let model = build_model(&cfg)?;
    let states = load_trajectory(traj, &model)?;
    let rows = report(&model, &states)?;
    atomic_write(out, report_csv(&rows).as_bytes())?;
    Ok(match max_principle_check(&model, &states) {
        Ok(r) => format!(
            "max principle: bound {:e}, observed [{:e}, {:e}], margin {:e}, {}",
            r.bound,
            r.observed_min,
            r.observed_max,
            r.worst_margin,
            if r.pass { "pass" } else { "FAIL" }
        ),
        Err(e) => format!("max principle: not applicable ({e})"),
    })
}

/// Search options from the `nudging.*` keys.
pub fn tune_options(cfg: &RunConfig, threads: usize) -> TuneOptions {
    TuneOptions {
        lambda0: if cfg.lambda > 0.0 { cfg.lambda } else { 1.0 },
        spec0: cfg.interp,
        probe: cfg.probe,
        transient: cfg.transient,
        sample_every: cfg.sample_every,
        max_rounds: cfg.tune_rounds,
        threads,
    }
}

/// Bracketing search for `(Λ, δ)` starting from the configured values.
pub fn tune_to_file(cfg: &RunConfig, out: &Path, threads: usize) -> Result<()> {
    let model = build_model(cfg)?;
    let reference = spin_up(&model, &initial_state(cfg, &model)?, cfg.spinup)?;
    let nudged = nudged_initial_state(cfg, &model)?;
    let opts = tune_options(cfg, threads);
    let res = tune(&model, &reference, &nudged, &opts)?;
    let mut text = String::from("# lambda, interp, monotone, decay_ratio\n");
    for a in &res.attempts {
        let _ =
            writeln!(text, "# {:?} {}:{:?} {} {:e}", a.lambda, a.spec.kind, a.spec.delta, a.monotone, a.decay_ratio);
    }
    let _ = writeln!(text, "nudging.lambda = {:?}", res.lambda);
    let _ = writeln!(text, "nudging.interp = {}:{:?}", res.spec.kind, res.spec.delta);
    atomic_write(out, text.as_bytes())
}
