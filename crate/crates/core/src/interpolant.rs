//! Coarse observation operators `I_δ` for the horizontal velocity.
//!
//! Both kinds first move the staggered components to the cell centers.
//! `volume` then averages over `δ`-sized blocks of cells (the coarse
//! representation) and broadcasts the block means back; `spectral` keeps the
//! discrete sine modes `1..=K` per direction with `K = ⌈L/δ⌉`. The result is
//! resampled to the interior faces by averaging the two adjacent cells.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{velocity_inner, velocity_w12, DomainSpec, FaceVector, VelocityField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpolantKind {
    Volume,
    Spectral,
}

impl fmt::Display for InterpolantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Volume => "volume",
            Self::Spectral => "spectral",
        })
    }
}

impl FromStr for InterpolantKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "volume" => Ok(Self::Volume),
            "spectral" => Ok(Self::Spectral),
            other => Err(Error::SpecMismatch(format!("unknown interpolant kind {other:?}"))),
        }
    }
}

/// `volume:<δ>` or `spectral:<δ>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolantSpec {
    pub kind: InterpolantKind,
    pub delta: f64,
}

impl InterpolantSpec {
    pub fn volume(delta: f64) -> Self {
        Self { kind: InterpolantKind::Volume, delta }
    }

    pub fn spectral(delta: f64) -> Self {
        Self { kind: InterpolantKind::Spectral, delta }
    }

    /// Coarse resolution `(⌈lx/δ⌉, ⌈ly/δ⌉)`, with a small tolerance so that
    /// `δ = L/m` written in decimal still gives `m`.
    pub fn coarse_counts(&self, lx: f64, ly: f64) -> (usize, usize) {
        let count = |l: f64| ((l / self.delta) - 1e-9).ceil().max(1.0) as usize;
        (count(lx), count(ly))
    }

    /// Checks `0 < δ ≤ min(lx, ly)` and, for the volume kind, that the coarse
    /// cells tile the fine grid.
    pub fn validate(&self, dom: &DomainSpec) -> Result<(usize, usize)> {
        if !(self.delta.is_finite() && self.delta > 0.0 && self.delta <= dom.lx().min(dom.ly()) * (1.0 + 1e-12)) {
            return Err(Error::SpecMismatch(format!(
                "delta must lie in (0, {}], got {}",
                dom.lx().min(dom.ly()),
                self.delta
            )));
        }
        let (mx, my) = self.coarse_counts(dom.lx(), dom.ly());
        match self.kind {
            InterpolantKind::Volume => {
                if !dom.nx().is_multiple_of(mx) || !dom.ny().is_multiple_of(my) {
                    return Err(Error::SpecMismatch(format!(
                        "{mx}x{my} coarse cells do not tile the {}x{} grid",
                        dom.nx(),
                        dom.ny()
                    )));
                }
            }
            InterpolantKind::Spectral => {
                if mx > dom.nx() || my > dom.ny() {
                    return Err(Error::SpecMismatch(format!("{mx}x{my} modes exceed the grid resolution")));
                }
            }
        }
        Ok((mx, my))
    }
}

impl fmt::Display for InterpolantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.delta)
    }
}

impl FromStr for InterpolantSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, delta) =
            s.split_once(':').ok_or_else(|| Error::SpecMismatch(format!("expected <kind>:<delta>, got {s:?}")))?;
        let delta: f64 = delta.trim().parse().map_err(|_| Error::SpecMismatch(format!("bad delta in {s:?}")))?;
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::SpecMismatch(format!("delta must be positive in {s:?}")));
        }
        Ok(Self { kind: kind.trim().parse()?, delta })
    }
}

/// Cell-centered horizontal vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredVelocity {
    pub nx: usize,
    pub ny: usize,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl CenteredVelocity {
    pub fn from_faces(v: &VelocityField) -> Self {
        let (nx, ny) = (v.nx, v.ny);
        let mut u1 = vec![0.0; nx * ny];
        let mut u2 = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                u1[j * nx + i] = 0.5 * (v.u1[j * (nx + 1) + i] + v.u1[j * (nx + 1) + i + 1]);
                u2[j * nx + i] = 0.5 * (v.u2[j * nx + i] + v.u2[(j + 1) * nx + i]);
            }
        }
        Self { nx, ny, u1, u2 }
    }

    /// Averages the two adjacent cells onto each interior face; wall faces get 0.
    pub fn to_faces(&self) -> FaceVector {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = VelocityField { nx, ny, u1: vec![0.0; (nx + 1) * ny], u2: vec![0.0; nx * (ny + 1)] };
        for j in 0..ny {
            for i in 1..nx {
                out.u1[j * (nx + 1) + i] = 0.5 * (self.u1[j * nx + i - 1] + self.u1[j * nx + i]);
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                out.u2[j * nx + i] = 0.5 * (self.u2[(j - 1) * nx + i] + self.u2[j * nx + i]);
            }
        }
        out
    }

    /// `‖·‖_{L2}` over the cells.
    pub fn l2(&self, dom: &DomainSpec) -> f64 {
        (self.u1.iter().chain(&self.u2).map(|v| v * v).sum::<f64>() * dom.cell_area()).sqrt()
    }
}

/// The coarse representation: block means (volume) or sine-mode amplitudes
/// (spectral), `mx * my` values per component, `i` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseField {
    pub mx: usize,
    pub my: usize,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl CoarseField {
    pub fn zeros(mx: usize, my: usize) -> Self {
        Self { mx, my, u1: vec![0.0; mx * my], u2: vec![0.0; mx * my] }
    }

    pub fn max_abs_diff(&self, other: &CoarseField) -> f64 {
        self.u1.iter().zip(&other.u1).chain(self.u2.iter().zip(&other.u2)).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Root-mean-square of the entries.
    pub fn rms(&self) -> f64 {
        let n = (self.u1.len() + self.u2.len()) as f64;
        (self.u1.iter().chain(&self.u2).map(|v| v * v).sum::<f64>() / n).sqrt()
    }

    pub fn axpy(&mut self, c: f64, other: &CoarseField) {
        for (a, b) in self.u1.iter_mut().zip(&other.u1) {
            *a += c * b;
        }
        for (a, b) in self.u2.iter_mut().zip(&other.u2) {
            *a += c * b;
        }
    }
}

/// `I_δ` bound to a grid.
#[derive(Clone, Debug)]
pub struct Interpolant {
    spec: InterpolantSpec,
    nx: usize,
    ny: usize,
    mx: usize,
    my: usize,
    /// Spectral kind: orthonormal sine rows, `mx x nx` and `my x ny`.
    sx: Vec<f64>,
    sy: Vec<f64>,
}

fn sine_rows(modes: usize, n: usize) -> Vec<f64> {
    let mut q = vec![0.0; modes * n];
    for m in 0..modes {
        let row = &mut q[m * n..(m + 1) * n];
        for (i, v) in row.iter_mut().enumerate() {
            *v = (PI * (m + 1) as f64 * (i as f64 + 0.5) / n as f64).sin();
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
    }
    q
}

impl Interpolant {
    pub fn new(spec: InterpolantSpec, dom: &DomainSpec) -> Result<Self> {
        let (mx, my) = spec.validate(dom)?;
        let (sx, sy) = match spec.kind {
            InterpolantKind::Volume => (Vec::new(), Vec::new()),
            InterpolantKind::Spectral => (sine_rows(mx, dom.nx()), sine_rows(my, dom.ny())),
        };
        Ok(Self { spec, nx: dom.nx(), ny: dom.ny(), mx, my, sx, sy })
    }

    pub fn spec(&self) -> InterpolantSpec {
        self.spec
    }

    pub fn coarse_shape(&self) -> (usize, usize) {
        (self.mx, self.my)
    }

    pub fn coarse(&self, v: &VelocityField) -> CoarseField {
        self.coarse_centered(&CenteredVelocity::from_faces(v))
    }

    pub fn coarse_centered(&self, c: &CenteredVelocity) -> CoarseField {
        let (nx, ny, mx, my) = (self.nx, self.ny, self.mx, self.my);
        let mut out = CoarseField::zeros(mx, my);
        match self.spec.kind {
            InterpolantKind::Volume => {
                let (bx, by) = (nx / mx, ny / my);
                let w = 1.0 / (bx * by) as f64;
                for j in 0..ny {
                    for i in 0..nx {
                        let cidx = (j / by) * mx + i / bx;
                        out.u1[cidx] += w * c.u1[j * nx + i];
                        out.u2[cidx] += w * c.u2[j * nx + i];
                    }
                }
            }
            InterpolantKind::Spectral => {
                out.u1 = self.analyze(&c.u1);
                out.u2 = self.analyze(&c.u2);
            }
        }
        out
    }

    fn analyze(&self, f: &[f64]) -> Vec<f64> {
        let (nx, ny, mx, my) = (self.nx, self.ny, self.mx, self.my);
        // along x: tmp[j][p] = Σ_i sx[p][i] f[j][i]
        let mut tmp = vec![0.0; ny * mx];
        for j in 0..ny {
            for p in 0..mx {
                tmp[j * mx + p] = (0..nx).map(|i| self.sx[p * nx + i] * f[j * nx + i]).sum();
            }
        }
        let mut out = vec![0.0; my * mx];
        for q in 0..my {
            for p in 0..mx {
                out[q * mx + p] = (0..ny).map(|j| self.sy[q * ny + j] * tmp[j * mx + p]).sum();
            }
        }
        out
    }

    fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        let (nx, ny, mx, my) = (self.nx, self.ny, self.mx, self.my);
        let mut tmp = vec![0.0; ny * mx];
        for j in 0..ny {
            for p in 0..mx {
                tmp[j * mx + p] = (0..my).map(|q| self.sy[q * ny + j] * c[q * mx + p]).sum();
            }
        }
        let mut out = vec![0.0; ny * nx];
        for j in 0..ny {
            for i in 0..nx {
                out[j * nx + i] = (0..mx).map(|p| self.sx[p * nx + i] * tmp[j * mx + p]).sum();
            }
        }
        out
    }

    /// The cell-centered field represented by `c`.
    pub fn expand_centered(&self, c: &CoarseField) -> Result<CenteredVelocity> {
        if (c.mx, c.my) != (self.mx, self.my) {
            return Err(Error::SpecMismatch(format!(
                "coarse field is {}x{}, interpolant expects {}x{}",
                c.mx, c.my, self.mx, self.my
            )));
        }
        let (nx, ny, mx, my) = (self.nx, self.ny, self.mx, self.my);
        let mut out = CenteredVelocity { nx, ny, u1: vec![0.0; nx * ny], u2: vec![0.0; nx * ny] };
        match self.spec.kind {
            InterpolantKind::Volume => {
                let (bx, by) = (nx / mx, ny / my);
                for j in 0..ny {
                    for i in 0..nx {
                        let cidx = (j / by) * mx + i / bx;
                        out.u1[j * nx + i] = c.u1[cidx];
                        out.u2[j * nx + i] = c.u2[cidx];
                    }
                }
            }
            InterpolantKind::Spectral => {
                out.u1 = self.synthesize(&c.u1);
                out.u2 = self.synthesize(&c.u2);
            }
        }
        Ok(out)
    }

    /// Face field represented by `c`.
    pub fn expand(&self, c: &CoarseField) -> Result<FaceVector> {
        Ok(self.expand_centered(c)?.to_faces())
    }

    /// `I_δ[v]` on the faces.
    pub fn apply(&self, v: &VelocityField) -> FaceVector {
        self.expand(&self.coarse(v)).expect("shape matches by construction")
    }

    /// `I_δ` acting on cell-centered data; a projection.
    pub fn apply_centered(&self, c: &CenteredVelocity) -> CenteredVelocity {
        self.expand_centered(&self.coarse_centered(c)).expect("shape matches by construction")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationError {
    /// `‖I_δ v - v‖_{L2}`
    pub abs_err: f64,
    /// `abs_err / ‖v‖_{W^{1,2}}`, 0 for a zero field.
    pub rel_to_h1: f64,
}

/// `‖I_δ v - v‖_{L2}` on the faces and its ratio to `‖v‖_{W^{1,2}}`.
pub fn measure_interpolation_error(interp: &Interpolant, dom: &DomainSpec, v: &VelocityField) -> InterpolationError {
    let mut d = interp.apply(v);
    d.axpy(-1.0, v);
    let abs_err = velocity_inner(dom, &d, &d).sqrt();
    let w = velocity_w12(dom, v);
    InterpolationError { abs_err, rel_to_h1: if w > 0.0 { abs_err / w } else { 0.0 } }
}

/// `‖I_δ c - c‖_{L2}` for cell-centered data.
pub fn measure_centered_error(interp: &Interpolant, dom: &DomainSpec, c: &CenteredVelocity) -> f64 {
    let p = interp.apply_centered(c);
    let s: f64 = p.u1.iter().zip(&c.u1).chain(p.u2.iter().zip(&c.u2)).map(|(a, b)| (a - b) * (a - b)).sum();
    (s * dom.cell_area()).sqrt()
}

/// Largest observed `‖I_δ v‖ / ‖v‖` over the given fields.
pub fn boundedness_constant<'a>(
    interp: &Interpolant,
    dom: &DomainSpec,
    fields: impl IntoIterator<Item = &'a VelocityField>,
) -> f64 {
    fields
        .into_iter()
        .map(|v| {
            let iv = interp.apply(v);
            let n = velocity_inner(dom, v, v).sqrt();
            if n > 0.0 {
                velocity_inner(dom, &iv, &iv).sqrt() / n
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom() -> DomainSpec {
        DomainSpec::new(1.0, 2.0, 16, 32, 4).unwrap()
    }

    fn random_velocity(d: &DomainSpec, seed: u64) -> VelocityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = VelocityField::zeros(d);
        v.u1.iter_mut().chain(v.u2.iter_mut()).for_each(|x| *x = rng.gen_range(-1.0..1.0));
        v.zero_boundary(d);
        v
    }

    #[test]
    fn spec_parsing_and_tiling() {
        let s: InterpolantSpec = "volume:0.25".parse().unwrap();
        assert_eq!(s, InterpolantSpec::volume(0.25));
        assert_eq!(s.to_string().parse::<InterpolantSpec>().unwrap(), s);
        assert!("spectral:0.5".parse::<InterpolantSpec>().is_ok());
        for bad in ["volume", "cubic:0.1", "volume:-1", "volume:x"] {
            assert!(bad.parse::<InterpolantSpec>().is_err(), "{bad}");
        }
        let d = dom();
        assert_eq!(InterpolantSpec::volume(0.25).validate(&d).unwrap(), (4, 8));
        assert!(matches!(InterpolantSpec::volume(0.3).validate(&d), Err(Error::SpecMismatch(_))));
        assert!(matches!(InterpolantSpec::volume(1.5).validate(&d), Err(Error::SpecMismatch(_))));
        assert_eq!(InterpolantSpec::volume(1.0 / 3.0).coarse_counts(1.0, 1.0), (3, 3));
    }

    #[test]
    fn constants_are_reproduced_on_interior_blocks() {
        let d = dom();
        let interp = Interpolant::new(InterpolantSpec::volume(0.25), &d).unwrap();
        let v = VelocityField::from_fns(&d, |_| 1.5, |_| -0.5);
        let iv = interp.apply(&v);
        // faces strictly inside coarse blocks away from the walls
        for j in 0..32 {
            for i in 5..12 {
                assert!((iv.u1[d.idx_u1(i, j)] - 1.5).abs() < 1e-14);
            }
        }
        for j in 5..28 {
            for i in 0..16 {
                assert!((iv.u2[d.idx_u2(i, j)] + 0.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn centered_projection_is_idempotent() {
        let d = dom();
        for spec in [InterpolantSpec::volume(0.25), InterpolantSpec::spectral(0.25)] {
            let interp = Interpolant::new(spec, &d).unwrap();
            let c = CenteredVelocity::from_faces(&random_velocity(&d, 1));
            let once = interp.apply_centered(&c);
            let twice = interp.apply_centered(&once);
            let diff = once
                .u1
                .iter()
                .zip(&twice.u1)
                .chain(once.u2.iter().zip(&twice.u2))
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff < 1e-13, "{spec}: {diff}");
            assert!(measure_centered_error(&interp, &d, &once) < 1e-12);
        }
    }

    #[test]
    fn zero_field_has_zero_error() {
        let d = dom();
        let interp = Interpolant::new(InterpolantSpec::volume(0.5), &d).unwrap();
        let e = measure_interpolation_error(&interp, &d, &VelocityField::zeros(&d));
        assert_eq!((e.abs_err, e.rel_to_h1), (0.0, 0.0));
    }

    #[test]
    fn linear_and_bounded() {
        let d = dom();
        for spec in [InterpolantSpec::volume(0.125), InterpolantSpec::spectral(0.25)] {
            let interp = Interpolant::new(spec, &d).unwrap();
            let (u, w) = (random_velocity(&d, 2), random_velocity(&d, 3));
            let mut comb = u.clone();
            comb.scale(0.7);
            comb.axpy(-1.3, &w);
            let mut expect = interp.apply(&u);
            expect.scale(0.7);
            expect.axpy(-1.3, &interp.apply(&w));
            assert!(interp.apply(&comb).max_abs_diff(&expect) < 1e-12);
        }
        let interp = Interpolant::new(InterpolantSpec::volume(0.125), &d).unwrap();
        let fields: Vec<_> = (0..20).map(|s| random_velocity(&d, 10 + s)).collect();
        assert!(boundedness_constant(&interp, &d, &fields) <= 1.01);
    }

    #[test]
    fn coarse_shape_is_checked() {
        let d = dom();
        let interp = Interpolant::new(InterpolantSpec::volume(0.5), &d).unwrap();
        assert!(matches!(interp.expand(&CoarseField::zeros(3, 3)), Err(Error::SpecMismatch(_))));
    }
}
