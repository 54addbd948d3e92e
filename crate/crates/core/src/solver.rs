//! Time integration of the transformed system.
//!
//! One step of length `dt`:
//!
//! 1. temperature: explicit centered horizontal fluxes of `Z + ϑ̂` with the
//!    current velocity, then the implicit nonlocal Helmholtz solve for
//!    `(Z - c avg Z)_t = κ ΔZ - div(u (Z + ϑ̂))`;
//! 2. velocity: centered advection (Heun predictor-corrector), buoyancy `-<Θ> ∇_h F` built from
//!    the new `Z`, any extra forcing, implicit viscosity, then projection onto
//!    discretely divergence-free fields.
//!
//! The time step is fixed; the Courant number is checked, not controlled.

use crate::elliptic::{EllipticOptions, NonlocalHelmholtz, PoissonSolver, VelocityHelmholtz};
use crate::error::{Error, Result};
use crate::grid::{
    divergence_h, gradient_h, vertical_average, BoundaryTrace, DomainSpec, FaceVector, ScalarField3D, VelocityField,
};
use crate::transforms::{
    effective_boundary_trace, forcing_gradient, reduced_to_z, z_to_reduced, PhysicsParams, TemperatureTransform,
};

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub step: u64,
    pub t: f64,
    pub v: VelocityField,
    pub z: ScalarField3D,
}

/// Number of fixed steps of length `dt` needed to reach `t_end`.
pub fn step_count(t_end: f64, dt: f64) -> u64 {
    if t_end <= 0.0 {
        return 0;
    }
    (t_end / dt - 1e-9).ceil() as u64
}

/// Grid, parameters and every operator that stays fixed during a run.
#[derive(Clone, Debug)]
pub struct RobModel {
    dom: DomainSpec,
    params: PhysicsParams,
    dt: f64,
    cfl_limit: f64,
    transform: TemperatureTransform,
    grad_f: FaceVector,
    theta_b_hat: ScalarField3D,
    boundary: BoundaryTrace,
    theta_b_sup: f64,
    poisson: PoissonSolver,
    velocity_solver: VelocityHelmholtz,
    temperature_solver: NonlocalHelmholtz,
}

impl RobModel {
    /// `theta_b` is the boundary temperature `ϑ_B` in the original variable.
    pub fn new(
        dom: &DomainSpec,
        params: &PhysicsParams,
        theta_b: impl Fn([f64; 3]) -> f64,
        dt: f64,
        opts: EllipticOptions,
    ) -> Result<Self> {
        params.validate(false)?;
        opts.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::validation("time.dt", format!("must be positive, got {dt}")));
        }
        let transform = TemperatureTransform::new(dom, params);
        let raw = BoundaryTrace::sample(dom, &theta_b);
        let boundary = effective_boundary_trace(dom, &transform, &theta_b);
        let theta_b_hat = crate::elliptic::harmonic_extension_from_trace(dom, &boundary, &opts)?.value;
        Ok(Self {
            dom: dom.clone(),
            params: params.clone(),
            dt,
            cfl_limit: 1.0,
            grad_f: forcing_gradient(dom, transform.potential()),
            transform,
            theta_b_hat,
            theta_b_sup: raw.max_abs(),
            boundary,
            poisson: PoissonSolver::new(dom, opts),
            velocity_solver: VelocityHelmholtz::new(dom, params.mu * dt, opts)?,
            temperature_solver: NonlocalHelmholtz::new(dom, params.kappa * dt, params.alpha, opts)?,
        })
    }

    /// Courant number above which a step fails with `CflViolation`.
    pub fn with_cfl_limit(mut self, limit: f64) -> Self {
        self.cfl_limit = limit;
        self
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.dom
    }
    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn cfl_limit(&self) -> f64 {
        self.cfl_limit
    }
    pub fn transform(&self) -> &TemperatureTransform {
        &self.transform
    }
    pub fn potential(&self) -> &ScalarField3D {
        self.transform.potential()
    }
    pub fn potential_gradient(&self) -> &FaceVector {
        &self.grad_f
    }
    /// Harmonic extension of the effective boundary data.
    pub fn theta_b_hat(&self) -> &ScalarField3D {
        &self.theta_b_hat
    }
    /// Effective boundary data (`ϑ_B - aF + 2a x3² - C`) at the face centroids.
    pub fn boundary_trace(&self) -> &BoundaryTrace {
        &self.boundary
    }
    /// `max |ϑ_B|` over the boundary face centroids (original variable).
    pub fn theta_b_sup(&self) -> f64 {
        self.theta_b_sup
    }

    /// `Θ` from `Z`.
    pub fn reduced(&self, z: &ScalarField3D) -> ScalarField3D {
        z_to_reduced(z, self.params.alpha, &self.theta_b_hat).expect("alpha validated at construction")
    }

    /// `Z` from `Θ`.
    pub fn z_of(&self, reduced: &ScalarField3D) -> ScalarField3D {
        reduced_to_z(reduced, self.params.alpha, &self.theta_b_hat)
    }

    /// Initial state from a velocity (projected here) and the temperature
    /// deviation `θ` in the original variable.
    pub fn initial_state(&self, v: &VelocityField, theta: &ScalarField3D) -> Result<State> {
        let reduced = self.transform.reduce_temperature(theta);
        Ok(State { step: 0, t: 0.0, v: self.project(v)?, z: self.z_of(&reduced) })
    }

    /// Initial state given directly in terms of `Θ`.
    pub fn initial_state_reduced(&self, v: &VelocityField, reduced: &ScalarField3D) -> Result<State> {
        Ok(State { step: 0, t: 0.0, v: self.project(v)?, z: self.z_of(reduced) })
    }

    /// The state with `Z = 0` and `v = 0`.
    pub fn rest_state(&self) -> State {
        State { step: 0, t: 0.0, v: VelocityField::zeros(&self.dom), z: ScalarField3D::zeros("Z", &self.dom) }
    }

    /// Removes the gradient part: `v - ∇φ` with `Δ_h φ = div_h v`.
    pub fn project(&self, v: &VelocityField) -> Result<VelocityField> {
        let mut out = v.clone();
        out.zero_boundary(&self.dom);
        let div = divergence_h(&self.dom, &out);
        let scale = out.max_abs() / self.dom.dx().min(self.dom.dy());
        let phi = self.poisson.solve_scaled(&div, scale.max(div.max_abs()))?.value;
        out.axpy(-1.0, &gradient_h(&self.dom, &phi));
        Ok(out)
    }

    pub fn courant(&self, v: &VelocityField) -> f64 {
        v.max_abs() * self.dt / self.dom.dx().min(self.dom.dy())
    }

    fn check_cfl(&self, v: &VelocityField) -> Result<()> {
        let courant = self.courant(v);
        if courant > self.cfl_limit || !courant.is_finite() {
            return Err(Error::CflViolation { courant, limit: self.cfl_limit });
        }
        Ok(())
    }

    /// `div_h(v ⊗ v)` at the interior faces, divergence form with centered
    /// fluxes: momentum fluxes at cell centers for the normal components and at
    /// the grid nodes for the cross terms (zero at the walls).
    pub fn advection(&self, v: &VelocityField) -> FaceVector {
        let d = &self.dom;
        let (nx, ny) = (d.nx(), d.ny());
        let (dx, dy) = (d.dx(), d.dy());
        let u1 = |i: usize, j: usize| v.u1[j * (nx + 1) + i];
        let u2 = |i: usize, j: usize| v.u2[j * nx + i];
        // node (i, j), i in 0..=nx, j in 0..=ny
        let mut corner = vec![0.0; (nx + 1) * (ny + 1)];
        for j in 1..ny {
            for i in 1..nx {
                corner[j * (nx + 1) + i] = 0.25 * (u1(i, j - 1) + u1(i, j)) * (u2(i - 1, j) + u2(i, j));
            }
        }
        let node = |i: usize, j: usize| corner[j * (nx + 1) + i];
        let mut out = VelocityField::zeros(d);
        for j in 0..ny {
            for i in 1..nx {
                let east = 0.5 * (u1(i, j) + u1(i + 1, j));
                let west = 0.5 * (u1(i - 1, j) + u1(i, j));
                out.u1[j * (nx + 1) + i] = (east * east - west * west) / dx + (node(i, j + 1) - node(i, j)) / dy;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let north = 0.5 * (u2(i, j) + u2(i, j + 1));
                let south = 0.5 * (u2(i, j - 1) + u2(i, j));
                out.u2[j * nx + i] = (node(i + 1, j) - node(i, j)) / dx + (north * north - south * south) / dy;
            }
        }
        out
    }

    /// `-<Θ> ∇_h F` at the interior faces, `<Θ>` averaged to the face from the
    /// two adjacent columns.
    pub fn buoyancy_force(&self, z: &ScalarField3D) -> FaceVector {
        let d = &self.dom;
        let (nx, ny) = (d.nx(), d.ny());
        let avg = vertical_average(d, &self.reduced(z));
        let a = |i: usize, j: usize| avg.data[j * nx + i];
        let mut out = VelocityField::zeros(d);
        for j in 0..ny {
            for i in 1..nx {
                let n = j * (nx + 1) + i;
                out.u1[n] = -0.5 * (a(i - 1, j) + a(i, j)) * self.grad_f.u1[n];
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let n = j * nx + i;
                out.u2[n] = -0.5 * (a(i, j - 1) + a(i, j)) * self.grad_f.u2[n];
            }
        }
        out
    }

    /// Advances the velocity by one step using `state.z` for the buoyancy.
    /// Advection is a Heun predictor-corrector; buoyancy and `extra_force`
    /// are frozen over the step.
    pub fn step_velocity(&self, state: &State, extra_force: Option<&FaceVector>) -> Result<VelocityField> {
        self.check_cfl(&state.v)?;
        let mut base = state.v.clone();
        base.axpy(self.dt, &self.buoyancy_force(&state.z));
        if let Some(f) = extra_force {
            base.axpy(self.dt, f);
        }
        let adv0 = self.advection(&state.v);
        let mut rhs = base.clone();
        rhs.axpy(-self.dt, &adv0);
        let predicted = self.project(&self.velocity_solver.solve(&rhs)?.value)?;
        let mut rhs = base;
        rhs.axpy(-0.5 * self.dt, &adv0);
        rhs.axpy(-0.5 * self.dt, &self.advection(&predicted));
        let v = self.project(&self.velocity_solver.solve(&rhs)?.value)?;
        if !v.is_finite() {
            return Err(Error::NonConvergence { iterations: state.step as usize, residual: f64::NAN });
        }
        Ok(v)
    }

    /// `div_x(v (Z + ϑ̂))` at the cell centers, layer by layer, with face
    /// values averaged from the two neighbors; wall fluxes vanish.
    pub fn temperature_advection(&self, z: &ScalarField3D, v: &VelocityField) -> Vec<f64> {
        let d = &self.dom;
        let (nx, ny, nz) = (d.nx(), d.ny(), d.nz());
        let (idx, idy) = (1.0 / d.dx(), 1.0 / d.dy());
        let t: Vec<f64> = z.data.iter().zip(&self.theta_b_hat.data).map(|(a, b)| a + b).collect();
        let mut adv = vec![0.0; t.len()];
        for k in 0..nz {
            let base = k * nx * ny;
            for j in 0..ny {
                for i in 1..nx {
                    let c = base + j * nx + i;
                    let flux = v.u1[j * (nx + 1) + i] * 0.5 * (t[c - 1] + t[c]) * idx;
                    adv[c - 1] += flux;
                    adv[c] -= flux;
                }
            }
            for j in 1..ny {
                for i in 0..nx {
                    let c = base + j * nx + i;
                    let flux = v.u2[j * nx + i] * 0.5 * (t[c - nx] + t[c]) * idy;
                    adv[c - nx] += flux;
                    adv[c] -= flux;
                }
            }
        }
        adv
    }

    /// Advances `Z` by one step, advecting with `v`.
    pub fn step_temperature(&self, state: &State, v: &VelocityField) -> Result<ScalarField3D> {
        self.check_cfl(v)?;
        let c = self.params.alpha_ratio();
        let avg = state.z.data.iter().sum::<f64>() / state.z.len() as f64;
        let adv = self.temperature_advection(&state.z, v);
        let mut rhs = state.z.clone();
        for (r, a) in rhs.data.iter_mut().zip(&adv) {
            *r -= c * avg + self.dt * a;
        }
        let z = self.temperature_solver.solve(&rhs)?.value;
        if !z.is_finite() {
            return Err(Error::NonConvergence { iterations: state.step as usize, residual: f64::NAN });
        }
        Ok(z.renamed("Z"))
    }

    /// Temperature first (with the current velocity), then velocity with the
    /// new temperature.
    pub fn step(&self, state: &State, extra_force: Option<&FaceVector>) -> Result<State> {
        let z = self.step_temperature(state, &state.v)?;
        let mid = State { step: state.step, t: state.t, v: state.v.clone(), z };
        let v = self.step_velocity(&mid, extra_force)?;
        let step = state.step + 1;
        Ok(State { step, t: step as f64 * self.dt, v, z: mid.z })
    }

    /// Advances `state` in place for `n_steps`, calling `observer` on the
    /// initial state and after every step. On error `state` holds the last
    /// good state.
    pub fn run(&self, state: &mut State, n_steps: u64, mut observer: impl FnMut(&State) -> Result<()>) -> Result<()> {
        observer(state)?;
        for _ in 0..n_steps {
            *state = self.step(state, None)?;
            observer(state)?;
        }
        Ok(())
    }
}

/// Sampled states of one run, kept in memory.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// Runs to `t_end`, keeping every `sample_every`-th state (and the last).
pub fn simulate(model: &RobModel, initial: &State, t_end: f64, sample_every: u64) -> Result<Trajectory> {
    let n = step_count(t_end, model.dt());
    let every = sample_every.max(1);
    let mut traj = Trajectory::default();
    let mut state = initial.clone();
    model.run(&mut state, n, |s| {
        if (s.step - initial.step).is_multiple_of(every) || s.step - initial.step == n {
            traj.states.push(s.clone());
        }
        Ok(())
    })?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::velocity_inner;
    use std::f64::consts::PI;

    fn small_model(alpha: f64, dt: f64) -> RobModel {
        let dom = DomainSpec::new(1.0, 1.0, 12, 10, 4).unwrap();
        let p = PhysicsParams { mu: 0.01, kappa: 0.02, alpha, a: 0.3, g: [-1.0, -1.0, 0.5] };
        RobModel::new(&dom, &p, |x| 0.5 * x[0] - 0.2 * x[2], dt, EllipticOptions::default()).unwrap()
    }

    fn swirl(dom: &DomainSpec, amp: f64) -> VelocityField {
        VelocityField::from_streamfunction(dom, |x| amp * (PI * x[0]).sin().powi(2) * (PI * x[1]).sin().powi(2))
    }

    #[test]
    fn advection_is_energy_neutral() {
        let m = small_model(0.2, 0.01);
        let v = m.project(&swirl(m.domain(), 1.0)).unwrap();
        let adv = m.advection(&v);
        let work = velocity_inner(m.domain(), &adv, &v);
        assert!(work.abs() < 1e-13, "{work}");
    }

    #[test]
    fn temperature_advection_conserves_and_is_skew() {
        let m = small_model(0.2, 0.01);
        let v = m.project(&swirl(m.domain(), 1.0)).unwrap();
        let z = ScalarField3D::from_fn("Z", m.domain(), |x| (3.0 * x[0]).sin() + x[1] * x[2]);
        let adv = m.temperature_advection(&z, &v);
        assert!(adv.iter().sum::<f64>().abs() < 1e-12);
        // with Z = T - ϑ̂ the advected field is T itself: Σ T div(v T) = 0
        let mut shifted = z.clone();
        shifted.axpy(-1.0, m.theta_b_hat());
        let adv = m.temperature_advection(&shifted, &v);
        let s: f64 = adv.iter().zip(&z.data).map(|(a, b)| a * b).sum();
        assert!(s.abs() < 1e-11, "{s}");
    }

    #[test]
    fn buoyancy_examples() {
        let dom = DomainSpec::new(1.0, 1.0, 16, 16, 4).unwrap();
        let p = PhysicsParams { alpha: 0.0, ..Default::default() };
        let m = RobModel::new(&dom, &p, |_| 0.0, 0.01, EllipticOptions::default()).unwrap();
        let zero = m.buoyancy_force(&ScalarField3D::zeros("Z", &dom));
        assert_eq!(zero.max_abs(), 0.0);
        // ϑ̂ = 0, α = 0: Θ = Z
        let one = m.buoyancy_force(&ScalarField3D::constant("Z", &dom, 1.0));
        let exact = VelocityField::from_fns(&dom, |x| -2.0 * x[0], |x| -2.0 * x[1]);
        assert!(one.max_abs_diff(&exact) < 1e-12);
        let two = m.buoyancy_force(&ScalarField3D::constant("Z", &dom, 2.5));
        for (a, b) in two.u1.iter().zip(&one.u1) {
            assert_eq!(*a, 2.5 * b);
        }
    }

    #[test]
    fn rest_state_is_fixed_point() {
        let dom = DomainSpec::new(1.0, 1.0, 8, 8, 4).unwrap();
        let p = PhysicsParams { alpha: 0.3, a: 0.0, ..Default::default() };
        let m = RobModel::new(&dom, &p, |_| 0.0, 0.01, EllipticOptions::default()).unwrap();
        let s0 = m.rest_state();
        let s1 = m.step(&s0, None).unwrap();
        assert_eq!(s1.v.max_abs(), 0.0);
        assert_eq!(s1.z.max_abs(), 0.0);
        assert_eq!(s1.step, 1);
    }

    #[test]
    fn step_keeps_constraints() {
        let m = small_model(0.4, 0.01);
        let mut s = m
            .initial_state(&swirl(m.domain(), 0.5), &ScalarField3D::from_fn("theta", m.domain(), |x| x[0] * x[2]))
            .unwrap();
        for _ in 0..10 {
            s = m.step(&s, None).unwrap();
            let scale = s.v.max_abs() / m.domain().dx();
            assert!(divergence_h(m.domain(), &s.v).max_abs() <= 1e-10 * scale.max(1.0));
            assert_eq!(s.v.max_abs_boundary(m.domain()), 0.0);
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let m = small_model(0.0, 0.5);
        let s = m.initial_state(&swirl(m.domain(), 5.0), &ScalarField3D::zeros("theta", m.domain())).unwrap();
        assert!(matches!(m.step(&s, None), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn step_is_deterministic() {
        let m = small_model(0.4, 0.01);
        let s =
            m.initial_state(&swirl(m.domain(), 0.5), &ScalarField3D::from_fn("theta", m.domain(), |x| x[1])).unwrap();
        let a = simulate(&m, &s, 0.1, 1).unwrap();
        let b = simulate(&m, &s, 0.1, 1).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.states.len(), 11);
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let m = small_model(0.4, 0.01);
        let s = m.rest_state();
        let traj = simulate(&m, &s, 0.0, 1).unwrap();
        assert_eq!(traj.states, vec![s]);
    }
}
