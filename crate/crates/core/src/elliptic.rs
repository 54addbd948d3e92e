//! Linear solves on the structured grid: pressure Poisson (Neumann walls),
//! harmonic extension of boundary data, implicit-diffusion Helmholtz steps
//! (Dirichlet walls) and the rank-one corrected solve produced by the
//! domain-average term of the temperature equation.
//!
//! Every operator here has the form `shift * I + coef * (-Δ_h)` with a
//! one-dimensional second difference per axis, so the direct backend
//! diagonalizes it exactly with the known discrete sine / cosine eigenbases
//! (one dense change of basis per axis). The iterative backend is a
//! Jacobi-preconditioned conjugate gradient on the same matrix-free operator.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, DomainSpec, ScalarField2D, ScalarField3D, VelocityField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EllipticMethod {
    /// Exact fast diagonalization.
    Direct,
    /// Jacobi-preconditioned conjugate gradient.
    Iterative,
}

impl std::str::FromStr for EllipticMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(Self::Direct),
            "iterative" => Ok(Self::Iterative),
            other => Err(format!("unknown elliptic method {other:?} (expected direct|iterative)")),
        }
    }
}

impl std::fmt::Display for EllipticMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Iterative => "iterative",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticOptions {
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub method: EllipticMethod,
}

impl Default for EllipticOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000, method: EllipticMethod::Direct }
    }
}

impl EllipticOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1e-6) {
            return Err(Error::InvalidParameter(format!("elliptic tol must lie in (0, 1e-6), got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("elliptic max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// A solution together with its independently recomputed relative residual.
#[derive(Clone, Debug)]
pub struct Solved<T> {
    pub value: T,
    pub residual: f64,
    pub iterations: usize,
}

/// Placement of the unknowns along one axis and the wall condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisKind {
    /// Cell-centered unknowns, zero trace at both walls (ghost = -value).
    CellDirichlet,
    /// Cell-centered unknowns, zero normal derivative (ghost = value).
    CellNeumann,
    /// Unknowns on the interior nodes `1..n`, zero at nodes `0` and `n`.
    NodeDirichlet,
}

#[derive(Clone, Debug)]
struct Axis {
    kind: AxisKind,
    n: usize,
    inv_h2: f64,
    /// Eigenvalues of `-D²`.
    eig: Vec<f64>,
    /// Orthonormal eigenvectors, row `m` is mode `m`.
    q: Vec<f64>,
}

impl Axis {
    fn new(kind: AxisKind, cells: usize, h: f64) -> Self {
        let n = match kind {
            AxisKind::NodeDirichlet => cells - 1,
            _ => cells,
        };
        let inv_h2 = 1.0 / (h * h);
        let c = cells as f64;
        let mut eig = Vec::with_capacity(n);
        let mut q = vec![0.0; n * n];
        for row in 0..n {
            let m = match kind {
                AxisKind::CellNeumann => row,
                _ => row + 1,
            } as f64;
            let s = (PI * m / (2.0 * c)).sin();
            eig.push(4.0 * s * s * inv_h2);
            let line = &mut q[row * n..(row + 1) * n];
            for (i, v) in line.iter_mut().enumerate() {
                let i = i as f64;
                *v = match kind {
                    AxisKind::CellDirichlet => (PI * m * (i + 0.5) / c).sin(),
                    AxisKind::CellNeumann => (PI * m * (i + 0.5) / c).cos(),
                    AxisKind::NodeDirichlet => (PI * m * (i + 1.0) / c).sin(),
                };
            }
            let norm = line.iter().map(|v| v * v).sum::<f64>().sqrt();
            line.iter_mut().for_each(|v| *v /= norm);
        }
        Self { kind, n, inv_h2, eig, q }
    }

    fn end_diag(&self) -> f64 {
        match self.kind {
            AxisKind::CellDirichlet => 3.0,
            AxisKind::CellNeumann => 1.0,
            AxisKind::NodeDirichlet => 2.0,
        }
    }
}

/// `shift * I + coef * (-Δ)` on a tensor grid of up to three axes.
#[derive(Clone, Debug)]
pub struct SeparableOperator {
    axes: Vec<Axis>,
    dims: [usize; 3],
    shift: f64,
    coef: f64,
}

impl SeparableOperator {
    /// `axes` lists `(kind, cells, spacing)`, axis 0 fastest in memory.
    pub fn new(axes: &[(AxisKind, usize, f64)], shift: f64, coef: f64) -> Self {
        assert!((1..=3).contains(&axes.len()));
        let axes: Vec<Axis> = axes.iter().map(|&(k, c, h)| Axis::new(k, c, h)).collect();
        let mut dims = [1; 3];
        for (d, a) in dims.iter_mut().zip(&axes) {
            *d = a.n;
        }
        Self { axes, dims, shift, coef }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the operator annihilates constants (pure Neumann, no shift).
    pub fn is_singular(&self) -> bool {
        self.shift == 0.0 && self.axes.iter().all(|a| a.kind == AxisKind::CellNeumann)
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.len());
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.shift * xi;
        }
        let mut stride = 1;
        for (a, axis) in self.axes.iter().enumerate() {
            let n = axis.n;
            let outer = self.len() / (n * stride);
            let w = self.coef * axis.inv_h2;
            let end = axis.end_diag();
            for o in 0..outer {
                let base = o * n * stride;
                for s in 0..stride {
                    let at = |i: usize| base + i * stride + s;
                    if n == 1 {
                        let d = match axis.kind {
                            AxisKind::CellDirichlet => 2.0,
                            AxisKind::CellNeumann => 0.0,
                            AxisKind::NodeDirichlet => 2.0,
                        };
                        y[at(0)] += w * d * x[at(0)];
                        continue;
                    }
                    y[at(0)] += w * (end * x[at(0)] - x[at(1)]);
                    for i in 1..n - 1 {
                        y[at(i)] += w * (2.0 * x[at(i)] - x[at(i - 1)] - x[at(i + 1)]);
                    }
                    y[at(n - 1)] += w * (end * x[at(n - 1)] - x[at(n - 2)]);
                }
            }
            let _ = a;
            stride *= n;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![self.shift; self.len()];
        let mut stride = 1;
        for axis in &self.axes {
            let n = axis.n;
            let outer = self.len() / (n * stride);
            let w = self.coef * axis.inv_h2;
            for o in 0..outer {
                for i in 0..n {
                    let c = if n == 1 {
                        if axis.kind == AxisKind::CellNeumann {
                            0.0
                        } else {
                            2.0
                        }
                    } else if i == 0 || i == n - 1 {
                        axis.end_diag()
                    } else {
                        2.0
                    };
                    for s in 0..stride {
                        d[o * n * stride + i * stride + s] += w * c;
                    }
                }
            }
            stride *= n;
        }
        d
    }

    /// Change of basis along one axis: forward maps values to mode
    /// amplitudes, inverse maps back.
    fn transform(&self, data: &mut [f64], axis: usize, forward: bool, scratch: &mut Vec<f64>) {
        let ax = &self.axes[axis];
        let n = ax.n;
        let stride: usize = self.dims[..axis].iter().product();
        let outer = data.len() / (n * stride);
        scratch.resize(n * stride, 0.0);
        for o in 0..outer {
            let block = &mut data[o * n * stride..(o + 1) * n * stride];
            scratch.iter_mut().for_each(|v| *v = 0.0);
            if stride == 1 {
                for m in 0..n {
                    if forward {
                        let row = &ax.q[m * n..(m + 1) * n];
                        scratch[m] = row.iter().zip(block.iter()).map(|(a, b)| a * b).sum();
                    } else {
                        let row = &ax.q[m * n..(m + 1) * n];
                        let c = block[m];
                        for (t, a) in scratch.iter_mut().zip(row) {
                            *t += a * c;
                        }
                    }
                }
            } else {
                for m in 0..n {
                    for i in 0..n {
                        let (dst, src, c) = if forward { (m, i, ax.q[m * n + i]) } else { (i, m, ax.q[m * n + i]) };
                        let src_line = &block[src * stride..(src + 1) * stride];
                        let dst_line = &mut scratch[dst * stride..(dst + 1) * stride];
                        for (d, s) in dst_line.iter_mut().zip(src_line) {
                            *d += c * s;
                        }
                    }
                }
            }
            block.copy_from_slice(scratch);
        }
    }

    fn solve_direct(&self, rhs: &[f64]) -> Vec<f64> {
        let mut w = rhs.to_vec();
        let mut scratch = Vec::new();
        for a in 0..self.axes.len() {
            self.transform(&mut w, a, true, &mut scratch);
        }
        let zero = [0.0];
        let e = |a: usize| -> &[f64] { self.axes.get(a).map_or(&zero[..], |ax| &ax.eig[..]) };
        let (e0, e1, e2) = (e(0), e(1), e(2));
        let mut n = 0;
        for l2 in e2 {
            for l1 in e1 {
                for l0 in e0 {
                    let lam = self.shift + self.coef * (l0 + l1 + l2);
                    w[n] = if lam == 0.0 { 0.0 } else { w[n] / lam };
                    n += 1;
                }
            }
        }
        for a in 0..self.axes.len() {
            self.transform(&mut w, a, false, &mut scratch);
        }
        w
    }

    fn solve_cg(&self, rhs: &[f64], opts: &EllipticOptions) -> Result<(Vec<f64>, usize)> {
        let n = rhs.len();
        let diag = self.diagonal();
        let bnorm = norm(rhs);
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        for it in 1..=opts.max_iter {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::NonConvergence { iterations: it, residual: norm(&r) / bnorm });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm(&r) <= 0.1 * opts.tol * bnorm {
                return Ok((x, it));
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::NonConvergence { iterations: opts.max_iter, residual: norm(&r) / bnorm })
    }

    /// Solves `A x = rhs`. For the singular Neumann operator `rhs` must have
    /// zero mean (the caller checks compatibility) and `x` is returned with
    /// zero mean.
    pub fn solve(&self, rhs: &[f64], opts: &EllipticOptions) -> Result<Solved<Vec<f64>>> {
        assert_eq!(rhs.len(), self.len());
        let bnorm = norm(rhs);
        if bnorm == 0.0 {
            return Ok(Solved { value: vec![0.0; rhs.len()], residual: 0.0, iterations: 0 });
        }
        let (mut x, iterations) = match opts.method {
            EllipticMethod::Direct => (self.solve_direct(rhs), 1),
            EllipticMethod::Iterative => self.solve_cg(rhs, opts)?,
        };
        if self.is_singular() {
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            x.iter_mut().for_each(|v| *v -= mean);
        }
        let residual = self.residual(&x, rhs);
        if residual > opts.tol {
            return Err(Error::NonConvergence { iterations, residual });
        }
        Ok(Solved { value: x, residual, iterations })
    }

    /// `‖rhs - A x‖ / ‖rhs‖`, or the absolute residual when `rhs = 0`.
    pub fn residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        let r: f64 = ax.iter().zip(rhs).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        let b = norm(rhs);
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("gamma must be non-negative, got {gamma}")))
    }
}

/// Pure-Neumann Laplacian on the horizontal cells.
#[derive(Clone, Debug)]
pub struct PoissonSolver {
    op: SeparableOperator,
    opts: EllipticOptions,
}

impl PoissonSolver {
    pub fn new(dom: &DomainSpec, opts: EllipticOptions) -> Self {
        let op = SeparableOperator::new(
            &[(AxisKind::CellNeumann, dom.nx(), dom.dx()), (AxisKind::CellNeumann, dom.ny(), dom.dy())],
            0.0,
            1.0,
        );
        Self { op, opts }
    }

    /// `Δ_h p = rhs` with homogeneous Neumann walls; `p` has zero mean.
    pub fn solve(&self, rhs: &ScalarField2D) -> Result<Solved<ScalarField2D>> {
        self.solve_scaled(rhs, rhs.max_abs())
    }

    /// As [`Self::solve`], judging compatibility against `|mean| ≤ tol·scale`.
    pub fn solve_scaled(&self, rhs: &ScalarField2D, scale: f64) -> Result<Solved<ScalarField2D>> {
        let mean = rhs.mean();
        if mean.abs() > self.opts.tol * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::IncompatibleRhs { mean });
        }
        let b: Vec<f64> = rhs.data.iter().map(|v| -(v - mean)).collect();
        let s = self.op.solve(&b, &self.opts)?;
        Ok(Solved {
            value: ScalarField2D { name: "p".into(), nx: rhs.nx, ny: rhs.ny, data: s.value },
            residual: s.residual,
            iterations: s.iterations,
        })
    }
}

pub fn solve_poisson_h(dom: &DomainSpec, rhs: &ScalarField2D, opts: &EllipticOptions) -> Result<Solved<ScalarField2D>> {
    PoissonSolver::new(dom, *opts).solve(rhs)
}

fn dirichlet_3d(dom: &DomainSpec, shift: f64, coef: f64) -> SeparableOperator {
    SeparableOperator::new(
        &[
            (AxisKind::CellDirichlet, dom.nx(), dom.dx()),
            (AxisKind::CellDirichlet, dom.ny(), dom.dy()),
            (AxisKind::CellDirichlet, dom.nz(), dom.dz()),
        ],
        shift,
        coef,
    )
}

/// Laplace's equation in Ω with Dirichlet data `trace` at the face centroids.
pub fn harmonic_extension_from_trace(
    dom: &DomainSpec,
    trace: &BoundaryTrace,
    opts: &EllipticOptions,
) -> Result<Solved<ScalarField3D>> {
    let (nx, ny, nz) = (dom.nx(), dom.ny(), dom.nz());
    let (ix2, iy2, iz2) = (2.0 / dom.dx().powi(2), 2.0 / dom.dy().powi(2), 2.0 / dom.dz().powi(2));
    // ghost = 2b - u moves 2b/h² to the right-hand side of -Δ u = 0
    let mut rhs = vec![0.0; dom.n_cells()];
    for k in 0..nz {
        for j in 0..ny {
            rhs[dom.idx(0, j, k)] += ix2 * trace.x_lo[k * ny + j];
            rhs[dom.idx(nx - 1, j, k)] += ix2 * trace.x_hi[k * ny + j];
        }
        for i in 0..nx {
            rhs[dom.idx(i, 0, k)] += iy2 * trace.y_lo[k * nx + i];
            rhs[dom.idx(i, ny - 1, k)] += iy2 * trace.y_hi[k * nx + i];
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            rhs[dom.idx(i, j, 0)] += iz2 * trace.z_lo[j * nx + i];
            rhs[dom.idx(i, j, nz - 1)] += iz2 * trace.z_hi[j * nx + i];
        }
    }
    let s = dirichlet_3d(dom, 0.0, 1.0).solve(&rhs, opts)?;
    Ok(Solved {
        value: ScalarField3D::from_vec("theta_B_hat", dom, s.value),
        residual: s.residual,
        iterations: s.iterations,
    })
}

/// Harmonic extension of `boundary_fn` sampled at the boundary face centroids.
pub fn harmonic_extension(
    dom: &DomainSpec,
    boundary_fn: impl Fn([f64; 3]) -> f64,
    opts: &EllipticOptions,
) -> Result<Solved<ScalarField3D>> {
    harmonic_extension_from_trace(dom, &BoundaryTrace::sample(dom, boundary_fn), opts)
}

/// `(I - γ Δ) z = rhs` with zero trace on ∂Ω.
#[derive(Clone, Debug)]
pub struct Helmholtz3d {
    gamma: f64,
    op: SeparableOperator,
    opts: EllipticOptions,
}

impl Helmholtz3d {
    pub fn new(dom: &DomainSpec, gamma: f64, opts: EllipticOptions) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { gamma, op: dirichlet_3d(dom, 1.0, gamma), opts })
    }

    pub fn solve_raw(&self, rhs: &[f64]) -> Result<Solved<Vec<f64>>> {
        if self.gamma == 0.0 {
            return Ok(Solved { value: rhs.to_vec(), residual: 0.0, iterations: 0 });
        }
        self.op.solve(rhs, &self.opts)
    }

    pub fn solve(&self, rhs: &ScalarField3D) -> Result<Solved<ScalarField3D>> {
        let s = self.solve_raw(&rhs.data)?;
        Ok(Solved {
            value: ScalarField3D { name: rhs.name.clone(), nx: rhs.nx, ny: rhs.ny, nz: rhs.nz, data: s.value },
            residual: s.residual,
            iterations: s.iterations,
        })
    }

    pub fn operator(&self) -> &SeparableOperator {
        &self.op
    }
}

pub fn solve_helmholtz_dirichlet_3d(
    dom: &DomainSpec,
    gamma: f64,
    rhs: &ScalarField3D,
    opts: &EllipticOptions,
) -> Result<Solved<ScalarField3D>> {
    Helmholtz3d::new(dom, gamma, *opts)?.solve(rhs)
}

/// Solves `A z - c avg(z) 1 = rhs` with `A = I - γΔ` (zero trace) and
/// `c = α / (1 + α)` by the Sherman–Morrison formula:
///
/// with `y = A⁻¹ rhs` and `w = A⁻¹ 1`,
/// `avg(z) = avg(y) / (1 - c avg(w))` and `z = y + c avg(z) w`.
///
/// `w` depends only on `(γ, α)` and is computed once at construction.
#[derive(Clone, Debug)]
pub struct NonlocalHelmholtz {
    inner: Helmholtz3d,
    c: f64,
    w: Vec<f64>,
    denominator: f64,
}

impl NonlocalHelmholtz {
    pub fn new(dom: &DomainSpec, gamma: f64, alpha: f64, opts: EllipticOptions) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(Error::InvalidAlpha { alpha, reason: "nonlocal solve requires 0 <= alpha < 1" });
        }
        let inner = Helmholtz3d::new(dom, gamma, opts)?;
        let c = alpha / (1.0 + alpha);
        let w = inner.solve_raw(&vec![1.0; dom.n_cells()])?.value;
        let avg_w = w.iter().sum::<f64>() / w.len() as f64;
        let denominator = 1.0 - c * avg_w;
        if denominator.abs() < 1e-12 {
            return Err(Error::SingularCorrection { denominator });
        }
        Ok(Self { inner, c, w, denominator })
    }

    pub fn solve(&self, rhs: &ScalarField3D) -> Result<Solved<ScalarField3D>> {
        let y = self.inner.solve_raw(&rhs.data)?;
        if self.c == 0.0 {
            return Ok(Solved {
                value: ScalarField3D { name: rhs.name.clone(), nx: rhs.nx, ny: rhs.ny, nz: rhs.nz, data: y.value },
                residual: y.residual,
                iterations: y.iterations,
            });
        }
        let n = y.value.len() as f64;
        let avg_z = y.value.iter().sum::<f64>() / n / self.denominator;
        let k = self.c * avg_z;
        let z: Vec<f64> = y.value.iter().zip(&self.w).map(|(a, b)| a + k * b).collect();
        let residual = self.residual(&z, &rhs.data);
        if residual > self.inner.opts.tol {
            return Err(Error::NonConvergence { iterations: y.iterations, residual });
        }
        Ok(Solved {
            value: ScalarField3D { name: rhs.name.clone(), nx: rhs.nx, ny: rhs.ny, nz: rhs.nz, data: z },
            residual,
            iterations: 2 * y.iterations,
        })
    }

    /// Relative residual of the full perturbed system.
    pub fn residual(&self, z: &[f64], rhs: &[f64]) -> f64 {
        let mut az = vec![0.0; z.len()];
        self.inner.op.apply(z, &mut az);
        let avg = z.iter().sum::<f64>() / z.len() as f64;
        let r: f64 = az
            .iter()
            .zip(rhs)
            .map(|(a, b)| {
                let d = b - (a - self.c * avg);
                d * d
            })
            .sum::<f64>()
            .sqrt();
        let b = norm(rhs);
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }
}

pub fn solve_nonlocal_helmholtz(
    dom: &DomainSpec,
    gamma: f64,
    alpha: f64,
    rhs: &ScalarField3D,
    opts: &EllipticOptions,
) -> Result<Solved<ScalarField3D>> {
    NonlocalHelmholtz::new(dom, gamma, alpha, *opts)?.solve(rhs)
}

/// `(I - γ Δ_h) u = rhs` per velocity component on its own faces, no-slip
/// walls. Boundary faces of the result are 0.
#[derive(Clone, Debug)]
pub struct VelocityHelmholtz {
    gamma: f64,
    nx: usize,
    ny: usize,
    op1: SeparableOperator,
    op2: SeparableOperator,
    opts: EllipticOptions,
}

impl VelocityHelmholtz {
    pub fn new(dom: &DomainSpec, gamma: f64, opts: EllipticOptions) -> Result<Self> {
        check_gamma(gamma)?;
        let op1 = SeparableOperator::new(
            &[(AxisKind::NodeDirichlet, dom.nx(), dom.dx()), (AxisKind::CellDirichlet, dom.ny(), dom.dy())],
            1.0,
            gamma,
        );
        let op2 = SeparableOperator::new(
            &[(AxisKind::CellDirichlet, dom.nx(), dom.dx()), (AxisKind::NodeDirichlet, dom.ny(), dom.dy())],
            1.0,
            gamma,
        );
        Ok(Self { gamma, nx: dom.nx(), ny: dom.ny(), op1, op2, opts })
    }

    pub fn solve(&self, rhs: &VelocityField) -> Result<Solved<VelocityField>> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = VelocityField { nx, ny, u1: vec![0.0; rhs.u1.len()], u2: vec![0.0; rhs.u2.len()] };
        if self.gamma == 0.0 {
            out.u1.copy_from_slice(&rhs.u1);
            out.u2.copy_from_slice(&rhs.u2);
            zero_walls(&mut out);
            return Ok(Solved { value: out, residual: 0.0, iterations: 0 });
        }
        // u1 interior faces i = 1..nx-1
        let b1: Vec<f64> =
            (0..ny).flat_map(|j| (1..nx).map(move |i| (i, j))).map(|(i, j)| rhs.u1[j * (nx + 1) + i]).collect();
        let b2: Vec<f64> =
            (1..ny).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| rhs.u2[j * nx + i]).collect();
        let s1 = self.op1.solve(&b1, &self.opts)?;
        let s2 = self.op2.solve(&b2, &self.opts)?;
        let mut n = 0;
        for j in 0..ny {
            for i in 1..nx {
                out.u1[j * (nx + 1) + i] = s1.value[n];
                n += 1;
            }
        }
        n = 0;
        for j in 1..ny {
            for i in 0..nx {
                out.u2[j * nx + i] = s2.value[n];
                n += 1;
            }
        }
        Ok(Solved { value: out, residual: s1.residual.max(s2.residual), iterations: s1.iterations + s2.iterations })
    }
}

fn zero_walls(v: &mut VelocityField) {
    let (nx, ny) = (v.nx, v.ny);
    for j in 0..ny {
        v.u1[j * (nx + 1)] = 0.0;
        v.u1[j * (nx + 1) + nx] = 0.0;
    }
    for i in 0..nx {
        v.u2[i] = 0.0;
        v.u2[ny * nx + i] = 0.0;
    }
}

pub fn solve_helmholtz_dirichlet_2d(
    dom: &DomainSpec,
    gamma: f64,
    rhs: &VelocityField,
    opts: &EllipticOptions,
) -> Result<Solved<VelocityField>> {
    VelocityHelmholtz::new(dom, gamma, *opts)?.solve(rhs)
}
