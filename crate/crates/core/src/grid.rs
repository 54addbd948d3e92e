//! Grid geometry, discrete fields and the averaging / differential operators
//! shared by every other module.
//!
//! The horizontal domain is the rectangle `(0, lx) x (0, ly)` discretized on a
//! uniform MAC grid; the vertical direction always spans `(0, 1)`. Scalars live
//! at cell centers, horizontal velocity components at the normal faces.
//!
//! Flat index conventions (`i` fastest, x-direction):
//! * 3-D scalar: `(k * ny + j) * nx + i`
//! * 2-D scalar: `j * nx + i`
//! * `u1` (x-faces): `j * (nx + 1) + i`, `i in 0..=nx`
//! * `u2` (y-faces): `j * nx + i`, `j in 0..=ny`

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    nz: usize,
}

impl DomainSpec {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidDomain(format!("extents must be positive, got {lx} x {ly}")));
        }
        if nx < 4 || ny < 4 || nz < 4 {
            return Err(Error::InvalidDomain(format!("need at least 4 cells per direction, got {nx} x {ny} x {nz}")));
        }
        Ok(Self { lx, ly, nx, ny, nz })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nz(&self) -> usize {
        self.nz
    }
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn dz(&self) -> f64 {
        1.0 / self.nz as f64
    }
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }
    pub fn cell_volume(&self) -> f64 {
        self.dx() * self.dy() * self.dz()
    }
    /// |Ω_h|
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    /// |Ω| (the vertical extent is 1).
    pub fn volume(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }
    pub fn n_columns(&self) -> usize {
        self.nx * self.ny
    }

    pub fn xc(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }
    pub fn yc(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy()
    }
    pub fn zc(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dz()
    }
    /// x-coordinate of the x-normal face with index `i`.
    pub fn xf(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }
    pub fn yf(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }
    pub fn zf(&self, k: usize) -> f64 {
        k as f64 * self.dz()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }
    #[inline]
    pub fn idx2(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn idx_u1(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    #[inline]
    pub fn idx_u2(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Cell-centered scalar on Ω, tagged with the quantity it holds.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField3D {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub data: Vec<f64>,
}

impl ScalarField3D {
    pub fn zeros(name: &str, dom: &DomainSpec) -> Self {
        Self::constant(name, dom, 0.0)
    }

    pub fn constant(name: &str, dom: &DomainSpec, value: f64) -> Self {
        Self { name: name.to_string(), nx: dom.nx, ny: dom.ny, nz: dom.nz, data: vec![value; dom.n_cells()] }
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(name: &str, dom: &DomainSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut out = Self::zeros(name, dom);
        for k in 0..dom.nz {
            for j in 0..dom.ny {
                for i in 0..dom.nx {
                    out.data[dom.idx(i, j, k)] = f([dom.xc(i), dom.yc(j), dom.zc(k)]);
                }
            }
        }
        out
    }

    pub fn from_vec(name: &str, dom: &DomainSpec, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dom.n_cells(), "field length does not match the grid");
        Self { name: name.to_string(), nx: dom.nx, ny: dom.ny, nz: dom.nz, data }
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &ScalarField3D) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v += c);
    }

    pub fn max_abs_diff(&self, other: &ScalarField3D) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Cell-centered scalar on Ω_h.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField2D {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<f64>,
}

impl ScalarField2D {
    pub fn zeros(name: &str, dom: &DomainSpec) -> Self {
        Self { name: name.to_string(), nx: dom.nx, ny: dom.ny, data: vec![0.0; dom.n_columns()] }
    }

    pub fn from_fn(name: &str, dom: &DomainSpec, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut out = Self::zeros(name, dom);
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                out.data[dom.idx2(i, j)] = f([dom.xc(i), dom.yc(j)]);
            }
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &ScalarField2D) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Horizontal vector field on the staggered faces. Used both for the velocity
/// (whose boundary faces are exactly zero) and for face-valued forcing terms.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub nx: usize,
    pub ny: usize,
    /// x-normal faces, `(nx + 1) * ny` values.
    pub u1: Vec<f64>,
    /// y-normal faces, `nx * (ny + 1)` values.
    pub u2: Vec<f64>,
}

pub type FaceVector = VelocityField;

impl VelocityField {
    pub fn zeros(dom: &DomainSpec) -> Self {
        Self { nx: dom.nx, ny: dom.ny, u1: vec![0.0; (dom.nx + 1) * dom.ny], u2: vec![0.0; dom.nx * (dom.ny + 1)] }
    }

    /// Samples `(f1, f2)` at the interior face centroids; boundary faces stay 0.
    pub fn from_fns(dom: &DomainSpec, f1: impl Fn([f64; 2]) -> f64, f2: impl Fn([f64; 2]) -> f64) -> Self {
        let mut v = Self::zeros(dom);
        for j in 0..dom.ny {
            for i in 1..dom.nx {
                v.u1[dom.idx_u1(i, j)] = f1([dom.xf(i), dom.yc(j)]);
            }
        }
        for j in 1..dom.ny {
            for i in 0..dom.nx {
                v.u2[dom.idx_u2(i, j)] = f2([dom.xc(i), dom.yf(j)]);
            }
        }
        v
    }

    /// Velocity derived from a streamfunction sampled at the grid nodes; the
    /// result is discretely divergence-free whenever `psi` vanishes on the walls.
    pub fn from_streamfunction(dom: &DomainSpec, psi: impl Fn([f64; 2]) -> f64) -> Self {
        let (nx, ny) = (dom.nx, dom.ny);
        let mut nodes = vec![0.0; (nx + 1) * (ny + 1)];
        for j in 0..=ny {
            for i in 0..=nx {
                nodes[j * (nx + 1) + i] = psi([dom.xf(i), dom.yf(j)]);
            }
        }
        let node = |i: usize, j: usize| nodes[j * (nx + 1) + i];
        let mut v = Self::zeros(dom);
        for j in 0..ny {
            for i in 1..nx {
                v.u1[dom.idx_u1(i, j)] = (node(i, j + 1) - node(i, j)) / dom.dy();
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                v.u2[dom.idx_u2(i, j)] = -(node(i + 1, j) - node(i, j)) / dom.dx();
            }
        }
        v
    }

    pub fn scale(&mut self, c: f64) {
        self.u1.iter_mut().chain(self.u2.iter_mut()).for_each(|v| *v *= c);
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &VelocityField) {
        for (a, b) in self.u1.iter_mut().zip(&other.u1) {
            *a += c * b;
        }
        for (a, b) in self.u2.iter_mut().zip(&other.u2) {
            *a += c * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u1.iter().chain(&self.u2).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &VelocityField) -> f64 {
        self.u1.iter().zip(&other.u1).chain(self.u2.iter().zip(&other.u2)).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest absolute value on the wall-normal boundary faces.
    pub fn max_abs_boundary(&self, dom: &DomainSpec) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..dom.ny {
            m = m.max(self.u1[dom.idx_u1(0, j)].abs()).max(self.u1[dom.idx_u1(dom.nx, j)].abs());
        }
        for i in 0..dom.nx {
            m = m.max(self.u2[dom.idx_u2(i, 0)].abs()).max(self.u2[dom.idx_u2(i, dom.ny)].abs());
        }
        m
    }

    pub fn zero_boundary(&mut self, dom: &DomainSpec) {
        for j in 0..dom.ny {
            self.u1[dom.idx_u1(0, j)] = 0.0;
            self.u1[dom.idx_u1(dom.nx, j)] = 0.0;
        }
        for i in 0..dom.nx {
            self.u2[dom.idx_u2(i, 0)] = 0.0;
            self.u2[dom.idx_u2(i, dom.ny)] = 0.0;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u1.iter().chain(&self.u2).all(|v| v.is_finite())
    }
}

/// Values of a function at the centroids of the six bounding faces of Ω.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    /// x = 0 and x = lx, indexed `k * ny + j`.
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    /// y = 0 and y = ly, indexed `k * nx + i`.
    pub y_lo: Vec<f64>,
    pub y_hi: Vec<f64>,
    /// z = 0 and z = 1, indexed `j * nx + i`.
    pub z_lo: Vec<f64>,
    pub z_hi: Vec<f64>,
}

impl BoundaryTrace {
    pub fn sample(dom: &DomainSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let (nx, ny, nz) = (dom.nx, dom.ny, dom.nz);
        let mut t = Self::zeros(dom);
        for k in 0..nz {
            for j in 0..ny {
                t.x_lo[k * ny + j] = f([0.0, dom.yc(j), dom.zc(k)]);
                t.x_hi[k * ny + j] = f([dom.lx, dom.yc(j), dom.zc(k)]);
            }
            for i in 0..nx {
                t.y_lo[k * nx + i] = f([dom.xc(i), 0.0, dom.zc(k)]);
                t.y_hi[k * nx + i] = f([dom.xc(i), dom.ly, dom.zc(k)]);
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                t.z_lo[j * nx + i] = f([dom.xc(i), dom.yc(j), 0.0]);
                t.z_hi[j * nx + i] = f([dom.xc(i), dom.yc(j), 1.0]);
            }
        }
        t
    }

    pub fn zeros(dom: &DomainSpec) -> Self {
        let (nx, ny, nz) = (dom.nx, dom.ny, dom.nz);
        Self {
            x_lo: vec![0.0; ny * nz],
            x_hi: vec![0.0; ny * nz],
            y_lo: vec![0.0; nx * nz],
            y_hi: vec![0.0; nx * nz],
            z_lo: vec![0.0; nx * ny],
            z_hi: vec![0.0; nx * ny],
        }
    }

    pub fn faces(&self) -> [&[f64]; 6] {
        [&self.x_lo, &self.x_hi, &self.y_lo, &self.y_hi, &self.z_lo, &self.z_hi]
    }

    pub fn max_abs(&self) -> f64 {
        self.faces().iter().flat_map(|f| f.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Boundary trace of a cell field whose ghost values are `2 b - u`, i.e. the
    /// mean of the adjacent cell value and its ghost equals `b`. This evaluates
    /// `(u_cell + u_ghost) / 2` for a field whose ghosts are given by `ghost`.
    pub fn of_cells(dom: &DomainSpec, field: &ScalarField3D, ghost: impl Fn(Face, usize, f64) -> f64) -> Self {
        let (nx, ny, nz) = (dom.nx, dom.ny, dom.nz);
        let mut t = Self::zeros(dom);
        let f = |i, j, k| field.data[dom.idx(i, j, k)];
        for k in 0..nz {
            for j in 0..ny {
                let a = f(0, j, k);
                t.x_lo[k * ny + j] = 0.5 * (a + ghost(Face::XLo, k * ny + j, a));
                let b = f(nx - 1, j, k);
                t.x_hi[k * ny + j] = 0.5 * (b + ghost(Face::XHi, k * ny + j, b));
            }
            for i in 0..nx {
                let a = f(i, 0, k);
                t.y_lo[k * nx + i] = 0.5 * (a + ghost(Face::YLo, k * nx + i, a));
                let b = f(i, ny - 1, k);
                t.y_hi[k * nx + i] = 0.5 * (b + ghost(Face::YHi, k * nx + i, b));
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                let a = f(i, j, 0);
                t.z_lo[j * nx + i] = 0.5 * (a + ghost(Face::ZLo, j * nx + i, a));
                let b = f(i, j, nz - 1);
                t.z_hi[j * nx + i] = 0.5 * (b + ghost(Face::ZHi, j * nx + i, b));
            }
        }
        t
    }

    pub fn get(&self, face: Face, index: usize) -> f64 {
        match face {
            Face::XLo => self.x_lo[index],
            Face::XHi => self.x_hi[index],
            Face::YLo => self.y_lo[index],
            Face::YHi => self.y_hi[index],
            Face::ZLo => self.z_lo[index],
            Face::ZHi => self.z_hi[index],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Face {
    XLo,
    XHi,
    YLo,
    YHi,
    ZLo,
    ZHi,
}

/// Boundary condition used when differentiating a cell-centered scalar.
#[derive(Clone, Copy, Debug)]
pub enum ScalarBc<'a> {
    /// Zero normal derivative at every wall.
    Neumann,
    /// Zero trace at every wall.
    HomogeneousDirichlet,
    /// Prescribed trace at the face centroids.
    Dirichlet(&'a BoundaryTrace),
}

/// `<f>(x_h) = ∫_0^1 f dx_3` by the midpoint rule over the cell layers.
pub fn vertical_average(dom: &DomainSpec, f: &ScalarField3D) -> ScalarField2D {
    let mut out = ScalarField2D::zeros(&format!("<{}>", f.name), dom);
    let dz = dom.dz();
    for k in 0..dom.nz {
        let layer = &f.data[k * dom.n_columns()..(k + 1) * dom.n_columns()];
        for (o, v) in out.data.iter_mut().zip(layer) {
            *o += v * dz;
        }
    }
    out
}

/// `|Ω|^{-1} ∫_Ω f` on the uniform grid.
pub fn domain_average(f: &ScalarField3D) -> f64 {
    f.data.iter().sum::<f64>() / f.data.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    pub h1_semi: f64,
}

/// Discrete `L2`, `L∞` and `H1`-seminorm of a cell-centered scalar on Ω.
///
/// Gradients are taken across every interior face; at walls the one-sided
/// difference to the boundary value uses a half-cell distance and half weight
/// (Dirichlet) or vanishes (Neumann). With this choice
/// `-(Δ_h f, f) = |f|_{H1}^2` holds exactly for homogeneous Dirichlet data.
pub fn scalar_norms(dom: &DomainSpec, f: &ScalarField3D, bc: ScalarBc) -> Norms {
    let l2 = (f.data.iter().map(|v| v * v).sum::<f64>() * dom.cell_volume()).sqrt();
    Norms { l2, linf: f.max_abs(), h1_semi: grad_sq_integral(dom, f, bc).sqrt() }
}

/// `∫_Ω |∇f|^2` with the wall treatment described on [`scalar_norms`].
pub fn grad_sq_integral(dom: &DomainSpec, f: &ScalarField3D, bc: ScalarBc) -> f64 {
    let (nx, ny, nz) = (dom.nx, dom.ny, dom.nz);
    let (dx, dy, dz) = (dom.dx(), dom.dy(), dom.dz());
    let v = |i, j, k| f.data[dom.idx(i, j, k)];
    let wall = |face: Face, index: usize, inner: f64, h: f64| -> f64 {
        // half-cell distance, half-cell weight
        let b = match bc {
            ScalarBc::Neumann => return 0.0,
            ScalarBc::HomogeneousDirichlet => 0.0,
            ScalarBc::Dirichlet(t) => t.get(face, index),
        };
        let g = (inner - b) / (0.5 * h);
        g * g * 0.5 * h
    };
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sz = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in 1..nx {
                let g = (v(i, j, k) - v(i - 1, j, k)) / dx;
                sx += g * g * dx;
            }
            sx += wall(Face::XLo, k * ny + j, v(0, j, k), dx);
            sx += wall(Face::XHi, k * ny + j, v(nx - 1, j, k), dx);
        }
        for i in 0..nx {
            for j in 1..ny {
                let g = (v(i, j, k) - v(i, j - 1, k)) / dy;
                sy += g * g * dy;
            }
            sy += wall(Face::YLo, k * nx + i, v(i, 0, k), dy);
            sy += wall(Face::YHi, k * nx + i, v(i, ny - 1, k), dy);
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            for k in 1..nz {
                let g = (v(i, j, k) - v(i, j, k - 1)) / dz;
                sz += g * g * dz;
            }
            sz += wall(Face::ZLo, j * nx + i, v(i, j, 0), dz);
            sz += wall(Face::ZHi, j * nx + i, v(i, j, nz - 1), dz);
        }
    }
    sx * dy * dz + sy * dx * dz + sz * dx * dy
}

/// Norms of a 2-D cell field (Neumann walls for the seminorm).
pub fn scalar2d_norms(dom: &DomainSpec, f: &ScalarField2D) -> Norms {
    let (nx, ny) = (dom.nx, dom.ny);
    let l2 = (f.data.iter().map(|v| v * v).sum::<f64>() * dom.cell_area()).sqrt();
    let mut s = 0.0;
    for j in 0..ny {
        for i in 1..nx {
            let g = (f.data[dom.idx2(i, j)] - f.data[dom.idx2(i - 1, j)]) / dom.dx();
            s += g * g;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let g = (f.data[dom.idx2(i, j)] - f.data[dom.idx2(i, j - 1)]) / dom.dy();
            s += g * g;
        }
    }
    Norms { l2, linf: f.max_abs(), h1_semi: (s * dom.cell_area()).sqrt() }
}

/// `∫_{Ω_h} v·w` over the face control volumes.
pub fn velocity_inner(dom: &DomainSpec, v: &VelocityField, w: &VelocityField) -> f64 {
    let s1: f64 = v.u1.iter().zip(&w.u1).map(|(a, b)| a * b).sum();
    let s2: f64 = v.u2.iter().zip(&w.u2).map(|(a, b)| a * b).sum();
    (s1 + s2) * dom.cell_area()
}

/// `∫_{Ω_h} |∇_h v|^2` matching the no-slip Laplacian used by the solver.
///
/// For `u1` the x-differences run between faces (cell centers); the
/// y-differences run between face rows with half-weight wall terms using the
/// no-slip value 0. `u2` mirrors this.
pub fn velocity_grad_sq(dom: &DomainSpec, v: &VelocityField) -> f64 {
    let (nx, ny) = (dom.nx, dom.ny);
    let (dx, dy) = (dom.dx(), dom.dy());
    let mut s = 0.0;
    // u1
    for j in 0..ny {
        for i in 0..nx {
            let g = (v.u1[dom.idx_u1(i + 1, j)] - v.u1[dom.idx_u1(i, j)]) / dx;
            s += g * g * dx * dy;
        }
    }
    for i in 1..nx {
        for j in 1..ny {
            let g = (v.u1[dom.idx_u1(i, j)] - v.u1[dom.idx_u1(i, j - 1)]) / dy;
            s += g * g * dx * dy;
        }
        for &j in &[0, ny - 1] {
            let g = v.u1[dom.idx_u1(i, j)] / (0.5 * dy);
            s += g * g * dx * 0.5 * dy;
        }
    }
    // u2
    for j in 0..ny {
        for i in 0..nx {
            let g = (v.u2[dom.idx_u2(i, j + 1)] - v.u2[dom.idx_u2(i, j)]) / dy;
            s += g * g * dx * dy;
        }
    }
    for j in 1..ny {
        for i in 1..nx {
            let g = (v.u2[dom.idx_u2(i, j)] - v.u2[dom.idx_u2(i - 1, j)]) / dx;
            s += g * g * dx * dy;
        }
        for &i in &[0, nx - 1] {
            let g = v.u2[dom.idx_u2(i, j)] / (0.5 * dx);
            s += g * g * 0.5 * dx * dy;
        }
    }
    s
}

/// `L2`, `L∞` and gradient seminorm of a face field.
pub fn velocity_norms(dom: &DomainSpec, v: &VelocityField) -> Norms {
    Norms { l2: velocity_inner(dom, v, v).sqrt(), linf: v.max_abs(), h1_semi: velocity_grad_sq(dom, v).sqrt() }
}

/// `‖v‖_{W^{1,2}} = (‖v‖² + ‖∇v‖²)^{1/2}`.
pub fn velocity_w12(dom: &DomainSpec, v: &VelocityField) -> f64 {
    (velocity_inner(dom, v, v) + velocity_grad_sq(dom, v)).sqrt()
}

/// Staggered horizontal divergence at cell centers.
pub fn divergence_h(dom: &DomainSpec, v: &VelocityField) -> ScalarField2D {
    let mut out = ScalarField2D::zeros("div", dom);
    let (dx, dy) = (dom.dx(), dom.dy());
    for j in 0..dom.ny {
        for i in 0..dom.nx {
            out.data[dom.idx2(i, j)] = (v.u1[dom.idx_u1(i + 1, j)] - v.u1[dom.idx_u1(i, j)]) / dx
                + (v.u2[dom.idx_u2(i, j + 1)] - v.u2[dom.idx_u2(i, j)]) / dy;
        }
    }
    out
}

/// Staggered gradient of a cell scalar at the interior faces; the wall faces
/// carry 0 (homogeneous Neumann).
pub fn gradient_h(dom: &DomainSpec, p: &ScalarField2D) -> FaceVector {
    let mut g = VelocityField::zeros(dom);
    let (dx, dy) = (dom.dx(), dom.dy());
    for j in 0..dom.ny {
        for i in 1..dom.nx {
            g.u1[dom.idx_u1(i, j)] = (p.data[dom.idx2(i, j)] - p.data[dom.idx2(i - 1, j)]) / dx;
        }
    }
    for j in 1..dom.ny {
        for i in 0..dom.nx {
            g.u2[dom.idx_u2(i, j)] = (p.data[dom.idx2(i, j)] - p.data[dom.idx2(i, j - 1)]) / dy;
        }
    }
    g
}

/// `∫_{Ω_h} p q` for cell fields.
pub fn scalar2d_inner(dom: &DomainSpec, p: &ScalarField2D, q: &ScalarField2D) -> f64 {
    p.data.iter().zip(&q.data).map(|(a, b)| a * b).sum::<f64>() * dom.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom(nz: usize) -> DomainSpec {
        DomainSpec::new(2.0, 1.5, 12, 10, nz).unwrap()
    }

    fn random_field(d: &DomainSpec, seed: u64) -> ScalarField3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..d.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField3D::from_vec("r", d, data)
    }

    fn random_velocity(d: &DomainSpec, seed: u64) -> VelocityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = VelocityField::zeros(d);
        v.u1.iter_mut().chain(v.u2.iter_mut()).for_each(|x| *x = rng.gen_range(-1.0..1.0));
        v.zero_boundary(d);
        v
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(DomainSpec::new(1.0, 1.0, 3, 8, 8).is_err());
        assert!(DomainSpec::new(0.0, 1.0, 8, 8, 8).is_err());
        assert!(DomainSpec::new(1.0, 1.0, 4, 4, 4).is_ok());
    }

    #[test]
    fn vertical_average_examples() {
        let d = dom(8);
        let c = ScalarField3D::constant("c", &d, 3.25);
        assert!(vertical_average(&d, &c).data.iter().all(|v| (v - 3.25).abs() < 1e-15));

        let lin = ScalarField3D::from_fn("z", &d, |x| x[2]);
        assert!(vertical_average(&d, &lin).data.iter().all(|v| (v - 0.5).abs() < 1e-15));

        // oracle: direct midpoint sum Σ ((k + 1/2)/8)^2 / 8 = 1/3 - dz²/12 = 170/512
        let oracle: f64 = (0..8).map(|k| ((k as f64 + 0.5) / 8.0).powi(2) / 8.0).sum();
        assert!((oracle - 170.0 / 512.0).abs() < 1e-15);
        assert!((oracle - (1.0 / 3.0 - 1.0 / (12.0 * 64.0))).abs() < 1e-15);
        let sq = ScalarField3D::from_fn("z2", &d, |x| x[2] * x[2]);
        assert!(vertical_average(&d, &sq).data.iter().all(|v| (v - oracle).abs() < 1e-15));
    }

    #[test]
    fn vertical_average_is_linear() {
        let d = dom(6);
        let f = random_field(&d, 1);
        let g = random_field(&d, 2);
        let mut h = f.clone();
        h.scale(2.5);
        h.axpy(-0.75, &g);
        let lhs = vertical_average(&d, &h);
        let (af, ag) = (vertical_average(&d, &f), vertical_average(&d, &g));
        for (n, v) in lhs.data.iter().enumerate() {
            assert!((v - (2.5 * af.data[n] - 0.75 * ag.data[n])).abs() < 1e-14);
        }
    }

    #[test]
    fn domain_average_examples() {
        let d = dom(8);
        assert_eq!(domain_average(&ScalarField3D::constant("c", &d, -2.0)), -2.0);
        let f = ScalarField3D::from_fn("z", &d, |x| x[2] - 0.5);
        assert!(domain_average(&f).abs() < 1e-16);
        let r = random_field(&d, 3);
        let mut naive = 0.0;
        for v in &r.data {
            naive += v;
        }
        assert!((domain_average(&r) - naive / r.len() as f64).abs() < 1e-15);
    }

    #[test]
    fn norms_examples() {
        let d = dom(8);
        let z = scalar_norms(&d, &ScalarField3D::zeros("z", &d), ScalarBc::Neumann);
        assert_eq!((z.l2, z.linf, z.h1_semi), (0.0, 0.0, 0.0));

        let c = scalar_norms(&d, &ScalarField3D::constant("c", &d, 2.0), ScalarBc::Neumann);
        assert!((c.l2 - 2.0 * d.volume().sqrt()).abs() < 1e-13);
        assert_eq!(c.h1_semi, 0.0);

        // ‖sin(π x3)‖² = |Ω_h| / 2 analytically; midpoint rule is O(dz²)
        for nz in [8, 16, 32] {
            let dd = DomainSpec::new(2.0, 1.5, 8, 8, nz).unwrap();
            let f = ScalarField3D::from_fn("s", &dd, |x| (std::f64::consts::PI * x[2]).sin());
            let n = scalar_norms(&dd, &f, ScalarBc::HomogeneousDirichlet);
            let err = (n.l2 * n.l2 - dd.area() / 2.0).abs();
            assert!(err < 0.5 * dd.dz() * dd.dz() * dd.area(), "nz={nz} err={err}");
        }
    }

    #[test]
    fn norms_are_homogeneous() {
        let d = dom(5);
        let f = random_field(&d, 4);
        let mut g = f.clone();
        g.scale(-3.0);
        let (a, b) = (
            scalar_norms(&d, &f, ScalarBc::HomogeneousDirichlet),
            scalar_norms(&d, &g, ScalarBc::HomogeneousDirichlet),
        );
        assert!((b.l2 - 3.0 * a.l2).abs() < 1e-12 * a.l2);
        assert!((b.linf - 3.0 * a.linf).abs() < 1e-12 * a.linf);
        assert!((b.h1_semi - 3.0 * a.h1_semi).abs() < 1e-12 * a.h1_semi);
    }

    #[test]
    fn divergence_gradient_examples() {
        let d = dom(4);
        let div = divergence_h(&d, &VelocityField::zeros(&d));
        assert!(div.data.iter().all(|v| *v == 0.0));
        let mut p = ScalarField2D::zeros("p", &d);
        p.data.iter_mut().for_each(|v| *v = 1.7);
        let g = gradient_h(&d, &p);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn gradient_divergence_adjoint() {
        let d = dom(4);
        for seed in 0..5 {
            let v = random_velocity(&d, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut p = ScalarField2D::zeros("p", &d);
            p.data.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            // oracle: direct evaluation of both inner products
            let lhs = velocity_inner(&d, &gradient_h(&d, &p), &v);
            let rhs = scalar2d_inner(&d, &p, &divergence_h(&d, &v));
            let scale = velocity_norms(&d, &v).l2 * scalar2d_norms(&d, &p).l2 / d.dx();
            assert!((lhs + rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn streamfunction_velocity_is_solenoidal() {
        let d = dom(4);
        let pi = std::f64::consts::PI;
        let v = VelocityField::from_streamfunction(&d, |x| (pi * x[0] / 2.0).sin() * (pi * x[1] / 1.5).sin());
        assert!(divergence_h(&d, &v).max_abs() < 1e-13);
        assert_eq!(v.max_abs_boundary(&d), 0.0);
    }

    #[test]
    fn trace_of_cells_recovers_dirichlet_data() {
        let d = dom(4);
        let f = random_field(&d, 9);
        let b = BoundaryTrace::sample(&d, |x| x[0] + 2.0 * x[1] - x[2]);
        let t = BoundaryTrace::of_cells(&d, &f, |face, n, inner| 2.0 * b.get(face, n) - inner);
        for (x, y) in t.faces().iter().zip(b.faces().iter()) {
            for (p, q) in x.iter().zip(y.iter()) {
                assert!((p - q).abs() < 1e-14);
            }
        }
    }
}
