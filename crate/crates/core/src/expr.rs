//! The small function language used for initial and boundary data in
//! configuration files.
//!
//! An expression is a `+`-separated sum of terms:
//!
//! * `const(c)`
//! * `linear(c0, g1, g2, g3)` = `c0 + g1 x1 + g2 x2 + g3 x3`
//! * `sinprod(amp, m1, m2, m3)` = `amp · Π sin(m_i π x_i / L_i)`, a zero
//!   wavenumber contributes the factor 1
//! * `cosprod(amp, m1, m2, m3)` = `amp · Π cos(m_i π x_i / L_i)`
//! * `noise(amp, seed)`: deterministic pseudo-random values in `[-amp, amp)`,
//!   a function of position and seed (initial data only)
//!
//! `L_1 = lx`, `L_2 = ly`, `L_3 = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::hash::{Hash, Hasher};

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Const(f64),
    Linear([f64; 4]),
    SinProd(f64, [u32; 3]),
    CosProd(f64, [u32; 3]),
    Noise(f64, u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    terms: Vec<Term>,
}

impl Expr {
    pub fn zero() -> Self {
        Self { terms: vec![Term::Const(0.0)] }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: vec![Term::Const(c)] }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn has_noise(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Term::Noise(..)))
    }

    /// Evaluates at `x` on a box of horizontal extents `lx x ly`.
    pub fn eval(&self, x: [f64; 3], lx: f64, ly: f64) -> f64 {
        let l = [lx, ly, 1.0];
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Const(c) => c,
                Term::Linear([c0, g1, g2, g3]) => c0 + g1 * x[0] + g2 * x[1] + g3 * x[2],
                Term::SinProd(amp, m) => {
                    (0..3).fold(amp, |p, d| if m[d] == 0 { p } else { p * (m[d] as f64 * PI * x[d] / l[d]).sin() })
                }
                Term::CosProd(amp, m) => (0..3).fold(amp, |p, d| p * (m[d] as f64 * PI * x[d] / l[d]).cos()),
                Term::Noise(amp, seed) => amp * unit_hash(seed, x),
            })
            .sum()
    }

    /// Largest `|value|` over the given sample points.
    pub fn max_abs_on(&self, points: impl Iterator<Item = [f64; 3]>, lx: f64, ly: f64) -> f64 {
        points.fold(0.0, |m, x| m.max(self.eval(x, lx, ly).abs()))
    }
}

fn unit_hash(seed: u64, x: [f64; 3]) -> f64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    seed.hash(&mut h);
    for v in x {
        v.to_bits().hash(&mut h);
    }
    (h.finish() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

impl std::str::FromStr for Expr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut terms = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        let bytes = s.as_bytes();
        for (n, &b) in bytes.iter().enumerate() {
            match b {
                b'(' => depth += 1,
                b')' => depth -= 1,
                b'+' if depth == 0 => {
                    terms.push(parse_term(&s[start..n])?);
                    start = n + 1;
                }
                _ => {}
            }
            if depth < 0 {
                return Err(format!("unbalanced parentheses in {s:?}"));
            }
        }
        if depth != 0 {
            return Err(format!("unbalanced parentheses in {s:?}"));
        }
        terms.push(parse_term(&s[start..])?);
        Ok(Self { terms })
    }
}

fn parse_term(s: &str) -> Result<Term, String> {
    let s = s.trim();
    let open = s.find('(').ok_or_else(|| format!("expected name(args), got {s:?}"))?;
    let args = s[open + 1..].strip_suffix(')').ok_or_else(|| format!("missing ')' in {s:?}"))?;
    let name = s[..open].trim();
    let args: Vec<&str> = args.split(',').map(str::trim).collect();
    let float =
        |a: &str| a.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("bad number {a:?} in {s:?}"));
    let wave = |a: &str| a.parse::<u32>().map_err(|_| format!("bad wavenumber {a:?} in {s:?}"));
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("{name} takes {n} arguments, got {}", args.len()))
        }
    };
    match name {
        "const" => {
            arity(1)?;
            Ok(Term::Const(float(args[0])?))
        }
        "linear" => {
            arity(4)?;
            Ok(Term::Linear([float(args[0])?, float(args[1])?, float(args[2])?, float(args[3])?]))
        }
        "sinprod" | "cosprod" => {
            arity(4)?;
            let amp = float(args[0])?;
            let m = [wave(args[1])?, wave(args[2])?, wave(args[3])?];
            Ok(if name == "sinprod" { Term::SinProd(amp, m) } else { Term::CosProd(amp, m) })
        }
        "noise" => {
            arity(2)?;
            let seed = args[1].parse::<u64>().map_err(|_| format!("bad seed {:?}", args[1]))?;
            Ok(Term::Noise(float(args[0])?, seed))
        }
        other => Err(format!("unknown term {other:?}")),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, t) in self.terms.iter().enumerate() {
            if n > 0 {
                f.write_str(" + ")?;
            }
            match t {
                Term::Const(c) => write!(f, "const({c:?})")?,
                Term::Linear([a, b, c, d]) => write!(f, "linear({a:?}, {b:?}, {c:?}, {d:?})")?,
                Term::SinProd(a, [m1, m2, m3]) => write!(f, "sinprod({a:?}, {m1}, {m2}, {m3})")?,
                Term::CosProd(a, [m1, m2, m3]) => write!(f, "cosprod({a:?}, {m1}, {m2}, {m3})")?,
                Term::Noise(a, s) => write!(f, "noise({a:?}, {s})")?,
            }
        }
        Ok(())
    }
}
