//! Nudging toward coarse velocity observations.
//!
//! The nudged system is the model with the extra velocity force
//! `-Λ (I_δ[ũ] - obs)`; the temperature is never nudged. Observations come
//! either from a reference run advanced in lockstep (twin experiment) or from
//! an observation file, held constant between their time stamps.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{domain_average, velocity_inner, DomainSpec, FaceVector, ScalarField3D};
use crate::interpolant::{CoarseField, Interpolant, InterpolantSpec};
use crate::io::{atomic_write, FieldRecord};
use crate::solver::{step_count, RobModel, State, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservationSource {
    Twin,
    File,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub field: CoarseField,
}

/// Time-stamped coarse observations sharing one interpolant spec.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationStream {
    spec: InterpolantSpec,
    shape: (usize, usize),
    source: ObservationSource,
    records: Vec<Observation>,
}

impl ObservationStream {
    pub fn new(
        spec: InterpolantSpec,
        shape: (usize, usize),
        source: ObservationSource,
        records: Vec<Observation>,
    ) -> Result<Self> {
        for (n, r) in records.iter().enumerate() {
            if (r.field.mx, r.field.my) != shape {
                return Err(Error::SpecMismatch(format!(
                    "record {n} is {}x{}, stream is {}x{}",
                    r.field.mx, r.field.my, shape.0, shape.1
                )));
            }
            if !r.t.is_finite() || (n > 0 && r.t <= records[n - 1].t) {
                return Err(Error::NonMonotoneTime { index: n });
            }
        }
        Ok(Self { spec, shape, source, records })
    }

    pub fn spec(&self) -> InterpolantSpec {
        self.spec
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn source(&self) -> ObservationSource {
        self.source
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Latest record with `t_k ≤ t` (zero-order hold), allowing a relative
    /// slack of `1e-9 * tol_scale` for accumulated time stamps.
    pub fn held_at(&self, t: f64, tol_scale: f64) -> Option<&Observation> {
        let n = self.records.partition_point(|r| r.t <= t + 1e-9 * tol_scale);
        n.checked_sub(1).map(|n| &self.records[n])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        writeln!(
            buf,
            "ROBOBS v1 kind={} delta={} mx={} my={}",
            self.spec.kind, self.spec.delta, self.shape.0, self.shape.1
        )?;
        for r in &self.records {
            writeln!(buf, "t={}", r.t)?;
            for (name, data) in [("u1", &r.field.u1), ("u2", &r.field.u2)] {
                let rec = FieldRecord {
                    name: name.into(),
                    nx: self.shape.0,
                    ny: self.shape.1,
                    nz: 1,
                    time: r.t,
                    data: data.clone(),
                };
                rec.write_to(&mut buf)?;
            }
        }
        Ok(buf)
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header = line.trim_end_matches('\n');
        let mut parts = header.split(' ');
        if parts.next() != Some("ROBOBS") || parts.next() != Some("v1") {
            return Err(Error::parse(1, format!("not a ROBOBS v1 header: {header:?}")));
        }
        let (mut kind, mut delta, mut mx, mut my) = (None, None, None, None);
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::parse(1, format!("bad token {part:?}")))?;
            let slot = match k {
                "kind" => &mut kind,
                "delta" => &mut delta,
                "mx" => &mut mx,
                "my" => &mut my,
                _ => return Err(Error::parse(1, format!("unknown key {k:?}"))),
            };
            if slot.replace(v.to_string()).is_some() {
                return Err(Error::parse(1, format!("duplicate key {k:?}")));
            }
        }
        let missing = |k: &str| Error::parse(1, format!("missing key {k:?}"));
        let spec: InterpolantSpec =
            format!("{}:{}", kind.ok_or_else(|| missing("kind"))?, delta.ok_or_else(|| missing("delta"))?).parse()?;
        let int = |v: Option<String>, k: &str| -> Result<usize> {
            v.ok_or_else(|| missing(k))?
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::parse(1, format!("bad integer for {k}")))
        };
        let shape = (int(mx, "mx")?, int(my, "my")?);

        let mut records = Vec::new();
        let mut line_no = 1;
        loop {
            line.clear();
            line_no += 1;
            if r.read_line(&mut line)? == 0 {
                break;
            }
            let t: f64 = line
                .trim_end_matches('\n')
                .strip_prefix("t=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(line_no, format!("expected t=<float>, got {:?}", line.trim_end())))?;
            let mut field = CoarseField::zeros(shape.0, shape.1);
            for (name, dst) in [("u1", &mut field.u1), ("u2", &mut field.u2)] {
                line_no += 1;
                let rec = FieldRecord::read_from(r, line_no)?;
                if rec.name != name || (rec.nx, rec.ny, rec.nz) != (shape.0, shape.1, 1) {
                    return Err(Error::SpecMismatch(format!(
                        "record {} {}x{}x{} does not match {name} {}x{}x1",
                        rec.name, rec.nx, rec.ny, rec.nz, shape.0, shape.1
                    )));
                }
                *dst = rec.data;
            }
            records.push(Observation { t, field });
        }
        Self::new(spec, shape, ObservationSource::File, records)
    }
}

pub fn ingest_observations(path: &Path) -> Result<ObservationStream> {
    let mut r = std::io::BufReader::new(fs::File::open(path)?);
    ObservationStream::read_from(&mut r)
}

/// Applies `I_δ` to the states whose times fall on the cadence `every`
/// (every state when `every ≤ 0`).
pub fn observe_trajectory(traj: &Trajectory, interp: &Interpolant, every: f64) -> Result<ObservationStream> {
    let mut records = Vec::new();
    let mut next = f64::NEG_INFINITY;
    for s in &traj.states {
        if s.t >= next - 1e-9 * every.abs().max(1e-300) {
            records.push(Observation { t: s.t, field: interp.coarse(&s.v) });
            next = if every > 0.0 { s.t + every } else { f64::NEG_INFINITY };
        }
    }
    ObservationStream::new(interp.spec(), interp.coarse_shape(), ObservationSource::Twin, records)
}

pub fn export_observations(
    traj: &Trajectory,
    interp: &Interpolant,
    every: f64,
    path: &Path,
) -> Result<ObservationStream> {
    let stream = observe_trajectory(traj, interp, every)?;
    atomic_write(path, &stream.to_bytes()?)?;
    Ok(stream)
}

/// `Λ` and the interpolant it acts through.
#[derive(Clone, Debug)]
pub struct NudgingParams {
    lambda: f64,
    interp: Interpolant,
}

impl NudgingParams {
    pub fn new(lambda: f64, interp: Interpolant) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::validation("nudging.lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { lambda, interp })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn interpolant(&self) -> &Interpolant {
        &self.interp
    }

    pub fn spec(&self) -> InterpolantSpec {
        self.interp.spec()
    }
}

/// `-Λ (I_δ[ũ] - obs)` on the faces.
pub fn nudging_force(v_tilde: &FaceVector, obs: &CoarseField, params: &NudgingParams) -> Result<FaceVector> {
    let mut diff = params.interp.coarse(v_tilde);
    if (diff.mx, diff.my) != (obs.mx, obs.my) {
        return Err(Error::SpecMismatch(format!(
            "observation is {}x{}, interpolant gives {}x{}",
            obs.mx, obs.my, diff.mx, diff.my
        )));
    }
    diff.axpy(-1.0, obs);
    let mut f = params.interp.expand(&diff)?;
    f.scale(-params.lambda);
    Ok(f)
}

/// One model step with the nudging force; `Λ = 0` is exactly the plain step.
pub fn nudged_step(model: &RobModel, state: &State, obs: &CoarseField, params: &NudgingParams) -> Result<State> {
    if params.lambda == 0.0 {
        return model.step(state, None);
    }
    let f = nudging_force(&state.v, obs, params)?;
    model.step(state, Some(&f))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovParts {
    /// `‖ũ - u‖²_{L2}`
    pub velocity: f64,
    /// `avg(D²) - α/(1+α) avg(D)²` with `D = Z̃ - Z`
    pub thermal: f64,
}

impl LyapunovParts {
    pub fn total(&self) -> f64 {
        self.velocity + self.thermal
    }
}

pub fn lyapunov_parts(dom: &DomainSpec, reference: &State, nudged: &State, alpha: f64) -> LyapunovParts {
    let mut dv = nudged.v.clone();
    dv.axpy(-1.0, &reference.v);
    let c = alpha / (1.0 + alpha);
    let n = reference.z.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for (a, b) in nudged.z.data.iter().zip(&reference.z.data) {
        let d = a - b;
        s1 += d;
        s2 += d * d;
    }
    let (avg, avg_sq) = (s1 / n, s2 / n);
    LyapunovParts { velocity: velocity_inner(dom, &dv, &dv), thermal: avg_sq - c * avg * avg }
}

/// `E = ‖ũ - u‖² + avg(D²) - α/(1+α) avg(D)²`.
pub fn lyapunov(dom: &DomainSpec, reference: &State, nudged: &State, alpha: f64) -> f64 {
    lyapunov_parts(dom, reference, nudged, alpha).total()
}

/// `‖Θ̃ - Θ‖_{L2(Ω)}` from the `Z` difference `D`: `Θ̃ - Θ = D - c avg(D)`.
pub fn temperature_error(dom: &DomainSpec, reference: &ScalarField3D, nudged: &ScalarField3D, alpha: f64) -> f64 {
    let c = alpha / (1.0 + alpha);
    let mut d = nudged.clone();
    d.axpy(-1.0, reference);
    let shift = c * domain_average(&d);
    (d.data.iter().map(|v| (v - shift) * (v - shift)).sum::<f64>() * dom.cell_volume()).sqrt()
}

pub fn velocity_error(dom: &DomainSpec, reference: &State, nudged: &State) -> f64 {
    let mut dv = nudged.v.clone();
    dv.axpy(-1.0, &reference.v);
    velocity_inner(dom, &dv, &dv).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSample {
    /// Time since nudging started.
    pub t: f64,
    pub velocity: f64,
    pub temperature: f64,
    pub lyapunov: f64,
}

pub fn error_sample(model: &RobModel, t: f64, reference: &State, nudged: &State) -> ErrorSample {
    let dom = model.domain();
    let alpha = model.params().alpha;
    ErrorSample {
        t,
        velocity: velocity_error(dom, reference, nudged),
        temperature: temperature_error(dom, &reference.z, &nudged.z, alpha),
        lyapunov: lyapunov(dom, reference, nudged, alpha),
    }
}

/// Advances `state` by `t` time units without forcing.
pub fn spin_up(model: &RobModel, state: &State, t: f64) -> Result<State> {
    let mut s = state.clone();
    model.run(&mut s, step_count(t, model.dt()), |_| Ok(()))?;
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct TwinOptions {
    pub t_end: f64,
    /// Record errors every this many steps (and at the end).
    pub sample_every: u64,
    /// Keep both states every this many steps.
    pub keep_every: Option<u64>,
    /// Worker threads; with 2 or more the two runs advance concurrently.
    pub threads: usize,
}

#[derive(Clone, Debug)]
pub struct TwinResult {
    pub errors: Vec<ErrorSample>,
    pub reference: Trajectory,
    pub nudged: Trajectory,
    pub final_reference: State,
    pub final_nudged: State,
}

/// Advances the reference and the nudged copy in lockstep from their given
/// states; observations are `I_δ` of the reference at the start of each step.
pub fn twin_experiment(
    model: &RobModel,
    reference: &State,
    nudged: &State,
    params: &NudgingParams,
    opts: &TwinOptions,
) -> Result<TwinResult> {
    let n = step_count(opts.t_end, model.dt());
    let every = opts.sample_every.max(1);
    let mut r = reference.clone();
    let mut u = State { step: reference.step, t: reference.t, ..nudged.clone() };
    let mut out = TwinResult {
        errors: Vec::new(),
        reference: Trajectory::default(),
        nudged: Trajectory::default(),
        final_reference: r.clone(),
        final_nudged: u.clone(),
    };
    for k in 0..=n {
        if k % every == 0 || k == n {
            out.errors.push(error_sample(model, k as f64 * model.dt(), &r, &u));
        }
        if let Some(keep) = opts.keep_every {
            if k % keep.max(1) == 0 || k == n {
                out.reference.states.push(r.clone());
                out.nudged.states.push(u.clone());
            }
        }
        if k == n {
            break;
        }
        let obs = params.interp.coarse(&r.v);
        let (next_r, next_u) = if opts.threads >= 2 {
            std::thread::scope(|scope| {
                let h = scope.spawn(|| model.step(&r, None));
                let next_u = nudged_step(model, &u, &obs, params);
                (h.join().expect("reference step panicked"), next_u)
            })
        } else {
            (model.step(&r, None), nudged_step(model, &u, &obs, params))
        };
        r = next_r?;
        u = next_u?;
    }
    out.final_reference = r;
    out.final_nudged = u;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct AssimilationResult {
    pub trajectory: Trajectory,
    /// `(t, ‖I_δ[ũ] - obs‖_{L2})` with the held observation.
    pub misfit: Vec<(f64, f64)>,
    pub final_state: State,
}

/// Runs the nudged model from `initial` against `stream`, starting at the
/// first observation time and stopping at `t_end` (default: the last one).
pub fn assimilate_from_stream(
    model: &RobModel,
    initial: &State,
    stream: &ObservationStream,
    params: &NudgingParams,
    t_end: Option<f64>,
    sample_every: u64,
) -> Result<AssimilationResult> {
    let first = stream.records().first().ok_or_else(|| Error::InsufficientData("empty observation stream".into()))?;
    if stream.spec() != params.spec() || stream.shape() != params.interp.coarse_shape() {
        return Err(Error::SpecMismatch(format!(
            "stream is {} ({}x{}), nudging uses {} ({}x{})",
            stream.spec(),
            stream.shape().0,
            stream.shape().1,
            params.spec(),
            params.interp.coarse_shape().0,
            params.interp.coarse_shape().1
        )));
    }
    let t0 = first.t;
    let horizon = t_end.unwrap_or(stream.records().last().unwrap().t - t0);
    let n = step_count(horizon, model.dt());
    let every = sample_every.max(1);
    let dom = model.domain();
    let mut s = State { step: 0, t: 0.0, ..initial.clone() };
    let mut out = AssimilationResult { trajectory: Trajectory::default(), misfit: Vec::new(), final_state: s.clone() };
    for k in 0..=n {
        let t = t0 + k as f64 * model.dt();
        let obs = &stream.held_at(t, model.dt()).expect("t >= first record").field;
        if k % every == 0 || k == n {
            let mut diff = params.interp.coarse(&s.v);
            diff.axpy(-1.0, obs);
            let d = params.interp.expand(&diff)?;
            out.misfit.push((t, velocity_inner(dom, &d, &d).sqrt()));
            out.trajectory.states.push(s.clone());
        }
        if k == n {
            break;
        }
        s = nudged_step(model, &s, obs, params)?;
    }
    out.final_state = s;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub beta_hat: f64,
    pub r_squared: f64,
    /// `exp` of the fitted intercept.
    pub prefactor: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayWindow {
    pub t_min: f64,
    pub t_max: f64,
    /// Samples at or below this value, and everything after the first of
    /// them, are treated as saturated.
    pub floor: f64,
}

impl Default for DecayWindow {
    fn default() -> Self {
        Self { t_min: f64::NEG_INFINITY, t_max: f64::INFINITY, floor: 1e-24 }
    }
}

/// Least-squares fit of `ln E = ln A - β t` over the pre-saturation part of
/// the window.
pub fn estimate_decay_rate(series: &[(f64, f64)], window: &DecayWindow) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.t_min && *t <= window.t_max)
        .take_while(|(_, e)| *e > window.floor)
        .map(|&(t, e)| (t, e.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!("{} samples above the floor, need 10", pts.len())));
    }
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in &pts {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (y - my);
        syy += (y - my) * (y - my);
    }
    if stt == 0.0 {
        return Err(Error::InsufficientData("all samples share one time".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = pts.iter().map(|(t, y)| (y - intercept - slope * t).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit { beta_hat: -slope, r_squared, prefactor: intercept.exp(), samples: pts.len() })
}

/// Whether `E` never increases (beyond round-off) after `transient`.
pub fn is_monotone_after(errors: &[ErrorSample], transient: f64) -> bool {
    errors.windows(2).filter(|w| w[0].t >= transient).all(|w| w[1].lyapunov <= w[0].lyapunov * (1.0 + 1e-12) + 1e-300)
}

#[derive(Clone, Debug)]
pub struct TuneOptions {
    pub lambda0: f64,
    pub spec0: InterpolantSpec,
    /// Probe run length.
    pub probe: f64,
    pub transient: f64,
    pub sample_every: u64,
    pub max_rounds: usize,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneAttempt {
    pub lambda: f64,
    pub spec: InterpolantSpec,
    pub monotone: bool,
    /// `E(probe) / E(transient)`.
    pub decay_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub lambda: f64,
    pub spec: InterpolantSpec,
    pub attempts: Vec<TuneAttempt>,
}

/// Doubles `Λ` and halves `δ` (while the coarse cells still tile the grid and
/// `Λ dt < 1`) until `E` decays monotonically over the probe window.
pub fn tune(model: &RobModel, reference: &State, nudged: &State, opts: &TuneOptions) -> Result<TuneResult> {
    let dom = model.domain();
    let (mut lambda, mut spec) = (opts.lambda0, opts.spec0);
    let mut attempts = Vec::new();
    for _ in 0..opts.max_rounds.max(1) {
        let params = NudgingParams::new(lambda, Interpolant::new(spec, dom)?)?;
        let twin_opts =
            TwinOptions { t_end: opts.probe, sample_every: opts.sample_every, keep_every: None, threads: opts.threads };
        let res = twin_experiment(model, reference, nudged, &params, &twin_opts)?;
        let monotone = is_monotone_after(&res.errors, opts.transient);
        let start = res.errors.iter().find(|e| e.t >= opts.transient).map_or(f64::NAN, |e| e.lyapunov);
        let decay_ratio = res.errors.last().map_or(f64::NAN, |e| e.lyapunov) / start;
        attempts.push(TuneAttempt { lambda, spec, monotone, decay_ratio });
        if monotone && decay_ratio < 1.0 {
            return Ok(TuneResult { lambda, spec, attempts });
        }
        if 2.0 * lambda * model.dt() < 1.0 {
            lambda *= 2.0;
        }
        let finer = InterpolantSpec { delta: spec.delta / 2.0, ..spec };
        if finer.validate(dom).is_ok() {
            spec = finer;
        }
    }
    let last = attempts.last().expect("at least one round");
    Err(Error::InsufficientData(format!(
        "no monotone decay after {} rounds (last: lambda={}, {})",
        attempts.len(),
        last.lambda,
        last.spec
    )))
}
