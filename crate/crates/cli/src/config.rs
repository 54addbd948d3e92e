//! Run configuration: line-oriented `dotted.key = value` with `#` comments.
//!
//! Every key has a default except the grid resolution, the viscosity and
//! conductivity, the time step and the horizon. Unknown and repeated keys are
//! errors. [`RunConfig::resolved`] prints every key and re-parses to the same
//! configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use robsim_core::elliptic::{EllipticMethod, EllipticOptions};
use robsim_core::expr::Expr;
use robsim_core::grid::DomainSpec;
use robsim_core::interpolant::InterpolantSpec;
use robsim_core::transforms::PhysicsParams;
use robsim_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    LongTime,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Simulate => "simulate",
            Mode::LongTime => "longtime",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "longtime" => Ok(Mode::LongTime),
            _ => Err("expected simulate or longtime".into()),
        }
    }
}

/// `(key, default)`; `None` marks a required key.
const KEYS: &[(&str, Option<&str>)] = &[
    ("mode", Some("simulate")),
    ("domain.lx", Some("1.0")),
    ("domain.ly", Some("1.0")),
    ("domain.nx", None),
    ("domain.ny", None),
    ("domain.nz", None),
    ("physics.mu", None),
    ("physics.kappa", None),
    ("physics.alpha", Some("0.0")),
    ("physics.a", Some("0.0")),
    ("physics.g", Some("0.0, 0.0, 0.0")),
    ("physics.theta_b", Some("const(0.0)")),
    ("time.dt", None),
    ("time.t_end", None),
    ("time.cfl", Some("1.0")),
    ("init.velocity", Some("const(0.0)")),
    ("init.theta", Some("const(0.0)")),
    ("init.restart", Some("")),
    ("nudging.lambda", Some("0.0")),
    ("nudging.interp", Some("volume:0.125")),
    ("nudging.spinup", Some("20.0")),
    ("nudging.velocity", Some("const(0.0)")),
    ("nudging.theta", Some("const(0.0)")),
    ("nudging.sample_every", Some("20")),
    ("nudging.probe", Some("2.0")),
    ("nudging.transient", Some("1.0")),
    ("nudging.tune_rounds", Some("6")),
    ("elliptic.tol", Some("1e-10")),
    ("elliptic.max_iter", Some("2000")),
    ("elliptic.method", Some("direct")),
    ("output.snapshot_every", Some("0")),
    ("output.series_every", Some("1")),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub mu: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub a: f64,
    pub g: [f64; 3],
    pub theta_b: Expr,
    pub dt: f64,
    pub t_end: f64,
    pub cfl: f64,
    /// Stream function of the initial velocity.
    pub init_velocity: Expr,
    /// Initial temperature in the original variable.
    pub init_theta: Expr,
    /// Trajectory directory whose last snapshot replaces the initial data.
    pub init_restart: Option<PathBuf>,
    pub lambda: f64,
    pub interp: InterpolantSpec,
    pub spinup: f64,
    pub nudged_velocity: Expr,
    pub nudged_theta: Expr,
    pub sample_every: u64,
    pub probe: f64,
    pub transient: f64,
    pub tune_rounds: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub method: EllipticMethod,
    /// Snapshot cadence in steps; 0 keeps only the first and last state.
    pub snapshot_every: u64,
    pub series_every: u64,
}

fn parse_lines(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: line_no, message: format!("expected `key = value`, got {line:?}") })?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::Parse { line: line_no, message: format!("bad key {key:?}") });
        }
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::Parse { line: line_no, message: format!("unknown key `{key}`") });
        }
        if let Some((first, _)) = map.insert(key.to_string(), (line_no, value.trim().to_string())) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key `{key}` (first on line {first})"),
            });
        }
    }
    Ok(map)
}

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::Validation { key: key.to_string(), reason: reason.into() }
}

struct Values(BTreeMap<String, (usize, String)>);

impl Values {
    fn raw(&self, key: &str) -> Result<&str> {
        if let Some((_, v)) = self.0.get(key) {
            return Ok(v);
        }
        match KEYS.iter().find(|(k, _)| *k == key) {
            Some((_, Some(default))) => Ok(default),
            _ => Err(invalid(key, "required key is missing")),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)?.parse().map_err(|e: T::Err| invalid(key, e.to_string()))
    }

    fn float(&self, key: &str) -> Result<f64> {
        let v: f64 = self.get(key)?;
        if !v.is_finite() {
            return Err(invalid(key, "must be finite"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.float(key)?;
        if v <= 0.0 {
            return Err(invalid(key, format!("must be > 0, got {v}")));
        }
        Ok(v)
    }

    fn non_negative(&self, key: &str) -> Result<f64> {
        let v = self.float(key)?;
        if v < 0.0 {
            return Err(invalid(key, format!("must be >= 0, got {v}")));
        }
        Ok(v)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let v = Values(parse_lines(text)?);
        let g_raw = v.raw("physics.g")?;
        let g: Vec<f64> = g_raw
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .filter(|g: &Vec<f64>| g.len() == 3)
            .ok_or_else(|| invalid("physics.g", "expected three comma-separated numbers"))?;
        let restart = v.raw("init.restart")?;
        let cfg = RunConfig {
            mode: v.get("mode")?,
            lx: v.positive("domain.lx")?,
            ly: v.positive("domain.ly")?,
            nx: v.get("domain.nx")?,
            ny: v.get("domain.ny")?,
            nz: v.get("domain.nz")?,
            mu: v.positive("physics.mu")?,
            kappa: v.positive("physics.kappa")?,
            alpha: v.float("physics.alpha")?,
            a: v.float("physics.a")?,
            g: [g[0], g[1], g[2]],
            theta_b: v.get("physics.theta_b")?,
            dt: v.positive("time.dt")?,
            t_end: v.non_negative("time.t_end")?,
            cfl: v.positive("time.cfl")?,
            init_velocity: v.get("init.velocity")?,
            init_theta: v.get("init.theta")?,
            init_restart: (!restart.is_empty()).then(|| PathBuf::from(restart)),
            lambda: v.non_negative("nudging.lambda")?,
            interp: v.get("nudging.interp")?,
            spinup: v.non_negative("nudging.spinup")?,
            nudged_velocity: v.get("nudging.velocity")?,
            nudged_theta: v.get("nudging.theta")?,
            sample_every: v.get("nudging.sample_every")?,
            probe: v.positive("nudging.probe")?,
            transient: v.non_negative("nudging.transient")?,
            tune_rounds: v.get("nudging.tune_rounds")?,
            tol: v.positive("elliptic.tol")?,
            max_iter: v.get("elliptic.max_iter")?,
            method: v.get("elliptic.method")?,
            snapshot_every: v.get("output.snapshot_every")?,
            series_every: v.get("output.series_every")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain().map_err(|e| invalid("domain", e.to_string()))?;
        self.physics().validate(self.mode == Mode::LongTime)?;
        if self.theta_b.has_noise() {
            return Err(invalid("physics.theta_b", "noise terms are only allowed in initial data"));
        }
        if self.sample_every == 0 {
            return Err(invalid("nudging.sample_every", "must be >= 1"));
        }
        if self.series_every == 0 {
            return Err(invalid("output.series_every", "must be >= 1"));
        }
        if self.tune_rounds == 0 {
            return Err(invalid("nudging.tune_rounds", "must be >= 1"));
        }
        if self.lambda * self.dt >= 1.0 {
            return Err(invalid("nudging.lambda", format!("lambda * dt must be < 1, got {}", self.lambda * self.dt)));
        }
        self.elliptic().validate().map_err(|e| invalid("elliptic", e.to_string()))
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.lx, self.ly, self.nx, self.ny, self.nz)
    }

    pub fn physics(&self) -> PhysicsParams {
        PhysicsParams { mu: self.mu, kappa: self.kappa, alpha: self.alpha, a: self.a, g: self.g }
    }

    pub fn elliptic(&self) -> EllipticOptions {
        EllipticOptions { tol: self.tol, max_iter: self.max_iter, method: self.method }
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        let f = |x: f64| format!("{x:?}");
        vec![
            ("mode", self.mode.to_string()),
            ("domain.lx", f(self.lx)),
            ("domain.ly", f(self.ly)),
            ("domain.nx", self.nx.to_string()),
            ("domain.ny", self.ny.to_string()),
            ("domain.nz", self.nz.to_string()),
            ("physics.mu", f(self.mu)),
            ("physics.kappa", f(self.kappa)),
            ("physics.alpha", f(self.alpha)),
            ("physics.a", f(self.a)),
            ("physics.g", format!("{:?}, {:?}, {:?}", self.g[0], self.g[1], self.g[2])),
            ("physics.theta_b", self.theta_b.to_string()),
            ("time.dt", f(self.dt)),
            ("time.t_end", f(self.t_end)),
            ("time.cfl", f(self.cfl)),
            ("init.velocity", self.init_velocity.to_string()),
            ("init.theta", self.init_theta.to_string()),
            ("init.restart", self.init_restart.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("nudging.lambda", f(self.lambda)),
            ("nudging.interp", format!("{}:{:?}", self.interp.kind, self.interp.delta)),
            ("nudging.spinup", f(self.spinup)),
            ("nudging.velocity", self.nudged_velocity.to_string()),
            ("nudging.theta", self.nudged_theta.to_string()),
            ("nudging.sample_every", self.sample_every.to_string()),
            ("nudging.probe", f(self.probe)),
            ("nudging.transient", f(self.transient)),
            ("nudging.tune_rounds", self.tune_rounds.to_string()),
            ("elliptic.tol", f(self.tol)),
            ("elliptic.max_iter", self.max_iter.to_string()),
            ("elliptic.method", self.method.to_string()),
            ("output.snapshot_every", self.snapshot_every.to_string()),
            ("output.series_every", self.series_every.to_string()),
        ]
    }

    /// Every key with its effective value, one per line.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "domain.nx = 8\ndomain.ny = 8\ndomain.nz = 4\nphysics.mu = 0.01\nphysics.kappa = 0.02\ntime.dt = 0.01\ntime.t_end = 1\n";

    #[test]
    fn every_key_has_a_serializer() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let names: Vec<_> = cfg.pairs().into_iter().map(|(k, _)| k).collect();
        let keys: Vec<_> = KEYS.iter().map(|(k, _)| *k).collect();
        assert_eq!(names, keys);
    }

    #[test]
    fn minimal_file_gets_every_default() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let dump = cfg.resolved();
        for (k, _) in KEYS {
            assert!(dump.lines().any(|l| l.starts_with(&format!("{k} = "))), "{k}");
        }
        assert_eq!(RunConfig::parse(&dump).unwrap(), cfg);
        assert_eq!(cfg.spinup, 20.0);
    }

    #[test]
    fn errors() {
        let long = format!("{MINIMAL}mode = longtime\nphysics.alpha = 1.5\n");
        match RunConfig::parse(&long) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "physics.alpha"),
            other => panic!("{other:?}"),
        }
        let dup = format!("{MINIMAL}physics.mu = 0.1\n");
        assert!(matches!(RunConfig::parse(&dup), Err(Error::Parse { line: 8, .. })));
        let unknown = format!("{MINIMAL}physics.nu = 0.1\n");
        assert!(matches!(RunConfig::parse(&unknown), Err(Error::Parse { .. })));
        assert!(matches!(RunConfig::parse("domain.nx 8\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(RunConfig::parse("domain.nx = 8\n"), Err(Error::Validation { .. })));
        let bad_g = format!("{MINIMAL}physics.g = 1, 2\n");
        assert!(matches!(RunConfig::parse(&bad_g), Err(Error::Validation { .. })));
        let noisy = format!("{MINIMAL}physics.theta_b = noise(1, 2)\n");
        assert!(matches!(RunConfig::parse(&noisy), Err(Error::Validation { .. })));
    }

    #[test]
    fn comments_and_whitespace() {
        let text = format!("# header\n\n{MINIMAL}physics.theta_b = linear(-1, 1, 1, 0)   # hot corner\n");
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.theta_b.to_string(), "linear(-1.0, 1.0, 1.0, 0.0)");
    }
}
