//! Physical parameters and the change of variables
//! `θ (temperature deviation) -> Θ (reduced temperature) -> Z`.
//!
//! * `Θ = θ - a F + 2a x3² - C` with `C = 2a <x3²>` (midpoint rule), which
//!   removes the source term `a div(F u)` from the heat equation;
//! * `Z = Θ + α avg(Θ) - ϑ̂`, with `ϑ̂` the harmonic extension of the
//!   (effective) boundary data, which turns the nonlocal boundary condition
//!   `Θ = ϑ_B - α avg(Θ)` into `Z = 0`.

use crate::error::{Error, Result};
use crate::grid::{domain_average, BoundaryTrace, DomainSpec, FaceVector, ScalarField3D, VelocityField};

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsParams {
    pub mu: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub a: f64,
    pub g: [f64; 3],
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self { mu: 0.01, kappa: 0.01, alpha: 0.0, a: 0.0, g: [0.0; 3] }
    }
}

impl PhysicsParams {
    /// Checks the invariants needed to time-step. `long_time` additionally
    /// demands `0 < α < 1`, the hypothesis behind the maximum principle and
    /// the absorbing-set bounds.
    pub fn validate(&self, long_time: bool) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::validation(key, reason));
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad("physics.mu", format!("viscosity must be positive, got {}", self.mu));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return bad("physics.kappa", format!("diffusivity must be positive, got {}", self.kappa));
        }
        if !self.a.is_finite() || self.g.iter().any(|v| !v.is_finite()) {
            return bad("physics.a", "coupling and gravity must be finite".into());
        }
        if !(self.alpha.is_finite() && (0.0..1.0).contains(&self.alpha)) {
            return bad("physics.alpha", format!("need 0 <= alpha < 1 for the implicit step, got {}", self.alpha));
        }
        if long_time && self.alpha <= 0.0 {
            return bad("physics.alpha", format!("long-time mode requires 0 < alpha < 1, got {}", self.alpha));
        }
        Ok(())
    }

    /// `α / (1 + α)`
    pub fn alpha_ratio(&self) -> f64 {
        self.alpha / (1.0 + self.alpha)
    }
}

fn raw_potential(g: [f64; 3], x: [f64; 3]) -> f64 {
    g[0] * x[0] + g[1] * x[1] + g[2] * x[2] + x[0] * x[0] + x[1] * x[1]
}

/// `F = g·x + |x_h|²` at the cell centers, shifted to zero domain average.
pub fn eval_forcing_potential(dom: &DomainSpec, g: [f64; 3]) -> ScalarField3D {
    let mut f = ScalarField3D::from_fn("F", dom, |x| raw_potential(g, x));
    let mean = domain_average(&f);
    f.add_constant(-mean);
    f
}

/// `∇_h F` at the interior faces, by differencing the cell values; for this
/// quadratic potential the difference quotient equals `(g1 + 2 x1, g2 + 2 x2)`
/// at the face centroid exactly. Wall faces carry 0.
pub fn forcing_gradient(dom: &DomainSpec, f: &ScalarField3D) -> FaceVector {
    let mut out = VelocityField::zeros(dom);
    for j in 0..dom.ny() {
        for i in 1..dom.nx() {
            out.u1[dom.idx_u1(i, j)] = (f.data[dom.idx(i, j, 0)] - f.data[dom.idx(i - 1, j, 0)]) / dom.dx();
        }
    }
    for j in 1..dom.ny() {
        for i in 0..dom.nx() {
            out.u2[dom.idx_u2(i, j)] = (f.data[dom.idx(i, j, 0)] - f.data[dom.idx(i, j - 1, 0)]) / dom.dy();
        }
    }
    out
}

/// `C = 2a <x3²>` by the midpoint rule over the cell layers.
pub fn vertical_shift(dom: &DomainSpec, a: f64) -> f64 {
    let dz = dom.dz();
    2.0 * a * (0..dom.nz()).map(|k| dom.zc(k).powi(2) * dz).sum::<f64>()
}

/// Everything the temperature transforms need, computed once per grid and
/// parameter set.
#[derive(Clone, Debug)]
pub struct TemperatureTransform {
    dom: DomainSpec,
    a: f64,
    alpha: f64,
    g: [f64; 3],
    f: ScalarField3D,
    f_mean: f64,
    shift: f64,
}

impl TemperatureTransform {
    pub fn new(dom: &DomainSpec, params: &PhysicsParams) -> Self {
        let raw = ScalarField3D::from_fn("F", dom, |x| raw_potential(params.g, x));
        let f_mean = domain_average(&raw);
        Self {
            dom: dom.clone(),
            a: params.a,
            alpha: params.alpha,
            g: params.g,
            f: eval_forcing_potential(dom, params.g),
            f_mean,
            shift: vertical_shift(dom, params.a),
        }
    }

    pub fn potential(&self) -> &ScalarField3D {
        &self.f
    }

    /// The normalized potential at an arbitrary point.
    pub fn potential_at(&self, x: [f64; 3]) -> f64 {
        raw_potential(self.g, x) - self.f_mean
    }

    /// `-a F + 2a x3² - C` at `x`.
    pub fn offset_at(&self, x: [f64; 3]) -> f64 {
        -self.a * self.potential_at(x) + 2.0 * self.a * x[2] * x[2] - self.shift
    }

    /// `Θ = θ - a F + 2a x3² - C`
    pub fn reduce_temperature(&self, theta: &ScalarField3D) -> ScalarField3D {
        self.apply_offset(theta, 1.0, "Theta")
    }

    /// `θ = Θ + a F - 2a x3² + C`
    pub fn restore_temperature(&self, reduced: &ScalarField3D) -> ScalarField3D {
        self.apply_offset(reduced, -1.0, "theta")
    }

    fn apply_offset(&self, src: &ScalarField3D, sign: f64, name: &str) -> ScalarField3D {
        let dom = &self.dom;
        let mut out = src.clone().renamed(name);
        if self.a == 0.0 {
            return out;
        }
        for k in 0..dom.nz() {
            let z = dom.zc(k);
            let vertical = 2.0 * self.a * z * z - self.shift;
            for n in k * dom.n_columns()..(k + 1) * dom.n_columns() {
                out.data[n] += sign * (-self.a * self.f.data[n] + vertical);
            }
        }
        out
    }

    /// Boundary data seen by `Θ`: `ϑ_B - a F + 2a x3² - C`.
    pub fn effective_boundary_data<'a>(
        &'a self,
        theta_b: impl Fn([f64; 3]) -> f64 + 'a,
    ) -> impl Fn([f64; 3]) -> f64 + 'a {
        move |x| theta_b(x) + self.offset_at(x)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `Z = Θ + α avg(Θ) - ϑ̂`
pub fn reduced_to_z(reduced: &ScalarField3D, alpha: f64, theta_b_hat: &ScalarField3D) -> ScalarField3D {
    let shift = alpha * domain_average(reduced);
    let data = reduced.data.iter().zip(&theta_b_hat.data).map(|(t, b)| t + shift - b).collect();
    ScalarField3D { name: "Z".into(), nx: reduced.nx, ny: reduced.ny, nz: reduced.nz, data }
}

/// `Θ = Z + ϑ̂ - α/(1+α) avg(Z + ϑ̂)`, obtained by averaging the forward map.
pub fn z_to_reduced(z: &ScalarField3D, alpha: f64, theta_b_hat: &ScalarField3D) -> Result<ScalarField3D> {
    if alpha == -1.0 || !alpha.is_finite() {
        return Err(Error::InvalidAlpha { alpha, reason: "the inverse transform needs alpha != -1" });
    }
    let c = alpha / (1.0 + alpha);
    let mut data: Vec<f64> = z.data.iter().zip(&theta_b_hat.data).map(|(a, b)| a + b).collect();
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    data.iter_mut().for_each(|v| *v -= c * mean);
    Ok(ScalarField3D { name: "Theta".into(), nx: z.nx, ny: z.ny, nz: z.nz, data })
}

/// Effective boundary data sampled at the face centroids.
pub fn effective_boundary_trace(
    dom: &DomainSpec,
    transform: &TemperatureTransform,
    theta_b: impl Fn([f64; 3]) -> f64,
) -> BoundaryTrace {
    BoundaryTrace::sample(dom, transform.effective_boundary_data(theta_b))
}
