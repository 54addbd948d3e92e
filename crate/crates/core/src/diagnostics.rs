//! Read-only checks on computed trajectories: discrete energy balances,
//! the maximum principle and tail-window bounds.
//!
//! Time derivatives are central differences on the sampling cadence and
//! one-sided at the two ends.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{
    domain_average, grad_sq_integral, scalar_norms, velocity_grad_sq, velocity_inner, velocity_w12, BoundaryTrace,
    ScalarBc,
};
use crate::solver::{RobModel, State};

/// One row of `report.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    /// `½‖v‖²`
    pub ke: f64,
    /// `½[avg(Z²) - α/(1+α) avg(Z)²]`
    pub thermal: f64,
    pub res_a6: f64,
    pub res_a7: f64,
    pub theta_max: f64,
    pub theta_min: f64,
    pub u_h1: f64,
    pub theta_h1: f64,
    pub theta_inf: f64,
}

pub const REPORT_HEADER: &str = "t,ke,thermal,res_a6,res_a7,theta_max,theta_min,u_h1,theta_h1,theta_inf";

fn need_three(states: &[State]) -> Result<()> {
    if states.len() < 3 {
        return Err(Error::InsufficientData(format!("{} samples, need at least 3", states.len())));
    }
    for (n, w) in states.windows(2).enumerate() {
        if w[1].t.partial_cmp(&w[0].t) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::NonMonotoneTime { index: n + 1 });
        }
    }
    Ok(())
}

fn derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (y[b] - y[a]) / (t[b] - t[a])
        })
        .collect()
}

pub fn kinetic_energy(model: &RobModel, s: &State) -> f64 {
    0.5 * velocity_inner(model.domain(), &s.v, &s.v)
}

pub fn thermal_energy(model: &RobModel, s: &State) -> f64 {
    let c = model.params().alpha_ratio();
    let n = s.z.len() as f64;
    let (sum, sq) = s.z.data.iter().fold((0.0, 0.0), |(a, b), z| (a + z, b + z * z));
    0.5 * (sq / n - c * (sum / n) * (sum / n))
}

/// `d/dt ½‖v‖² + μ‖∇v‖² - ∫ f_b·v` with `f_b = -<Θ>∇F` the buoyancy force of
/// the model.
pub fn kinetic_energy_residual(model: &RobModel, states: &[State]) -> Result<Vec<(f64, f64)>> {
    need_three(states)?;
    let dom = model.domain();
    let t: Vec<f64> = states.iter().map(|s| s.t).collect();
    let ke: Vec<f64> = states.iter().map(|s| kinetic_energy(model, s)).collect();
    let dke = derivative(&t, &ke);
    Ok(states
        .iter()
        .zip(dke)
        .map(|(s, d)| {
            let work = velocity_inner(dom, &model.buoyancy_force(&s.z), &s.v);
            (s.t, d + model.params().mu * velocity_grad_sq(dom, &s.v) - work)
        })
        .collect())
}

/// Advective exchange with the lifted boundary data,
/// `|Ω|^{-1} ∫ ϑ̂ v·∇Z`, summed over the interior faces as the scheme
/// does.
fn boundary_exchange(model: &RobModel, s: &State) -> f64 {
    let d = model.domain();
    let (nx, ny, nz) = (d.nx(), d.ny(), d.nz());
    let hat = &model.theta_b_hat().data;
    let z = &s.z.data;
    let mut acc = 0.0;
    for k in 0..nz {
        let base = k * nx * ny;
        for j in 0..ny {
            for i in 1..nx {
                let (l, r) = (base + j * nx + i - 1, base + j * nx + i);
                acc += s.v.u1[j * (nx + 1) + i] * 0.5 * (hat[l] + hat[r]) * (z[r] - z[l]) / d.dx();
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let (l, r) = (base + (j - 1) * nx + i, base + j * nx + i);
                acc += s.v.u2[j * nx + i] * 0.5 * (hat[l] + hat[r]) * (z[r] - z[l]) / d.dy();
            }
        }
    }
    acc / d.n_cells() as f64
}

/// `½ d/dt[avg Z² - α/(1+α)(avg Z)²] + κ|Ω|^{-1}‖∇Z‖² - |Ω|^{-1}∫ϑ̂ v·∇Z`.
pub fn thermal_energy_residual(model: &RobModel, states: &[State]) -> Result<Vec<(f64, f64)>> {
    need_three(states)?;
    let dom = model.domain();
    let t: Vec<f64> = states.iter().map(|s| s.t).collect();
    let q: Vec<f64> = states.iter().map(|s| thermal_energy(model, s)).collect();
    let dq = derivative(&t, &q);
    Ok(states
        .iter()
        .zip(dq)
        .map(|(s, d)| {
            let diss =
                model.params().kappa * grad_sq_integral(dom, &s.z, ScalarBc::HomogeneousDirichlet) / dom.volume();
            (s.t, d + diss - boundary_exchange(model, s))
        })
        .collect())
}

/// Full `report.csv` series; residual columns need at least three samples.
pub fn report(model: &RobModel, states: &[State]) -> Result<Vec<DiagnosticsRow>> {
    let a6 = thermal_energy_residual(model, states)?;
    let a7 = kinetic_energy_residual(model, states)?;
    let dom = model.domain();
    Ok(states
        .iter()
        .zip(a6.iter().zip(&a7))
        .map(|(s, (r6, r7))| {
            let theta = model.reduced(&s.z);
            let norms = scalar_norms(dom, &theta, ScalarBc::Neumann);
            DiagnosticsRow {
                t: s.t,
                ke: kinetic_energy(model, s),
                thermal: thermal_energy(model, s),
                res_a6: r6.1,
                res_a7: r7.1,
                theta_max: theta.max(),
                theta_min: theta.min(),
                u_h1: velocity_w12(dom, &s.v),
                theta_h1: (norms.l2 * norms.l2 + norms.h1_semi * norms.h1_semi).sqrt(),
                theta_inf: norms.linf,
            }
        })
        .collect())
}

pub fn report_csv(rows: &[DiagnosticsRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t, r.ke, r.thermal, r.res_a6, r.res_a7, r.theta_max, r.theta_min, r.u_h1, r.theta_h1, r.theta_inf
        );
    }
    out
}

/// `max |Θ + α avg(Θ) - ϑ_B|` over the boundary face centroids, `ϑ_B` being
/// the effective boundary data. The wall trace of `Θ` is the mean of the
/// adjacent cell and its ghost; the ghosts follow from the zero trace of `Z`
/// and the trace `ϑ_B` of `ϑ̂`.
pub fn nonlocal_boundary_residual(model: &RobModel, s: &State) -> f64 {
    let dom = model.domain();
    let alpha = model.params().alpha;
    let c = model.params().alpha_ratio();
    let theta = model.reduced(&s.z);
    let lifted = s.z.data.iter().zip(&model.theta_b_hat().data).map(|(z, h)| z + h).sum::<f64>() / s.z.len() as f64;
    let b = model.boundary_trace();
    let trace = BoundaryTrace::of_cells(dom, &theta, |face, n, cell| 2.0 * b.get(face, n) - cell - 2.0 * c * lifted);
    let avg = domain_average(&theta);
    trace
        .faces()
        .iter()
        .zip(b.faces())
        .flat_map(|(t, b)| t.iter().zip(b.iter()))
        .fold(0.0, |m, (t, b)| m.max((t + alpha * avg - b).abs()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxPrincipleReport {
    /// `max(‖Θ(0)‖∞, ‖ϑ_B‖∞ / (1 - α))`
    pub bound: f64,
    pub observed_max: f64,
    pub observed_min: f64,
    /// `bound - max_t ‖Θ(t)‖∞`; negative when violated.
    pub worst_margin: f64,
    pub pass: bool,
}

/// `‖Θ(t)‖∞ ≤ max(‖Θ(0)‖∞, ‖ϑ_B‖∞/(1-α))` with slack `1e-8 * max(bound, 1)`,
/// `ϑ_B` taken as the effective boundary data of `Θ`.
pub fn max_principle_check(model: &RobModel, states: &[State]) -> Result<MaxPrincipleReport> {
    let first = states.first().ok_or_else(|| Error::InsufficientData("empty trajectory".into()))?;
    let mut monitor = MaxPrincipleMonitor::new(model, first)?;
    for s in states {
        monitor.observe(model, s);
    }
    Ok(monitor.report())
}

/// Streaming form of [`max_principle_check`] for runs too long to keep in
/// memory.
#[derive(Clone, Copy, Debug)]
pub struct MaxPrincipleMonitor {
    bound: f64,
    hi: f64,
    lo: f64,
}

impl MaxPrincipleMonitor {
    pub fn new(model: &RobModel, initial: &State) -> Result<Self> {
        let alpha = model.params().alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidAlpha { alpha, reason: "the maximum principle needs 0 < alpha < 1" });
        }
        let bound = model.reduced(&initial.z).max_abs().max(model.boundary_trace().max_abs() / (1.0 - alpha));
        Ok(Self { bound, hi: f64::NEG_INFINITY, lo: f64::INFINITY })
    }

    pub fn observe(&mut self, model: &RobModel, s: &State) {
        let theta = model.reduced(&s.z);
        self.hi = self.hi.max(theta.max());
        self.lo = self.lo.min(theta.min());
    }

    pub fn report(&self) -> MaxPrincipleReport {
        let worst_margin = self.bound - self.hi.max(-self.lo);
        let slack = 1e-8 * self.bound.max(1.0);
        MaxPrincipleReport {
            bound: self.bound,
            observed_max: self.hi,
            observed_min: self.lo,
            worst_margin,
            pass: worst_margin >= -slack,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbsorbingSetReport {
    /// Tail supremum of `‖v‖_{W^{1,2}} + ‖Θ‖_{L∞}` per trajectory.
    pub tail_sup: Vec<f64>,
    /// `(max - min) / max` over the trajectories.
    pub spread: f64,
    pub pass: bool,
}

/// `‖v‖_{W^{1,2}} + ‖Θ‖_{L∞}`.
pub fn absorbing_quantity(model: &RobModel, s: &State) -> f64 {
    velocity_w12(model.domain(), &s.v) + model.reduced(&s.z).max_abs()
}

/// Compares tail-window suprema (last `fraction` of each run's time span)
/// across runs; passes when the relative spread is at most `tolerance`.
pub fn absorbing_set_report(
    model: &RobModel,
    runs: &[&[State]],
    fraction: f64,
    tolerance: f64,
) -> Result<AbsorbingSetReport> {
    if runs.len() < 2 {
        return Err(Error::InsufficientData("need at least two trajectories".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("window fraction must lie in (0, 1], got {fraction}")));
    }
    let mut tail_sup = Vec::with_capacity(runs.len());
    for states in runs {
        let (t0, t1) = match (states.first(), states.last()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => return Err(Error::InsufficientData("empty trajectory".into())),
        };
        let start = t1 - fraction * (t1 - t0);
        let tail: Vec<&State> = states.iter().filter(|s| s.t >= start - 1e-12 * t1.abs().max(1.0)).collect();
        if tail.len() < 3 || t1 <= t0 {
            return Err(Error::InsufficientData(format!("tail window holds {} samples, need 3", tail.len())));
        }
        tail_sup.push(tail.iter().map(|s| absorbing_quantity(model, s)).fold(f64::NEG_INFINITY, f64::max));
    }
    let hi = tail_sup.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail_sup.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    Ok(AbsorbingSetReport { tail_sup, spread, pass: spread <= tolerance })
}
