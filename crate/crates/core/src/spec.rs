//! Closed-form field descriptors as accepted on the command line and in
//! experiment configs.
//!
//! | string                 | meaning                                   |
//! |------------------------|-------------------------------------------|
//! | `d=3,n=16,h=0.125`     | grid                                      |
//! | `const:c`              | constant field                            |
//! | `radial:a,b`           | exponent `a + b / ln(e + |x|)`            |
//! | `power:a`              | potential `|x - x0|^a`, weight `(1 + |x - x0|)^a` |
//! | `oscillator`           | potential `|x - x0|^2`                    |
//! | `halfspace:c`          | potential `c` on the lower half of axis 0, else 0 |
//! | `exp:a`                | weight `exp(a |x - x0|)`                  |
//! | `file:path`            | grid-function file (binary or CSV)        |
//!
//! `x0` is always [`Grid::center_index`].

use std::fmt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// A parsed `kind:args` descriptor.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Const(f64),
    Radial { a: f64, b: f64 },
    Power(f64),
    Oscillator,
    Halfspace(f64),
    Exp(f64),
    File(PathBuf),
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Const(c) => write!(f, "const:{c}"),
            FieldSpec::Radial { a, b } => write!(f, "radial:{a},{b}"),
            FieldSpec::Power(a) => write!(f, "power:{a}"),
            FieldSpec::Oscillator => write!(f, "oscillator"),
            FieldSpec::Halfspace(c) => write!(f, "halfspace:{c}"),
            FieldSpec::Exp(a) => write!(f, "exp:{a}"),
            FieldSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

fn numbers(kind: &str, args: &str, count: usize) -> Result<Vec<f64>> {
    let vals = args
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::param(format!("{kind}: cannot parse numbers from '{args}'")))?;
    if vals.len() != count || vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::param(format!(
            "{kind}: expected {count} finite number(s), got '{args}'"
        )));
    }
    Ok(vals)
}

impl FieldSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, args) = text.split_once(':').unwrap_or((text, ""));
        Ok(match kind {
            "const" => FieldSpec::Const(numbers(kind, args, 1)?[0]),
            "radial" => {
                let v = numbers(kind, args, 2)?;
                FieldSpec::Radial { a: v[0], b: v[1] }
            }
            "power" => FieldSpec::Power(numbers(kind, args, 1)?[0]),
            "oscillator" if args.is_empty() => FieldSpec::Oscillator,
            "halfspace" => FieldSpec::Halfspace(numbers(kind, args, 1)?[0]),
            "exp" => FieldSpec::Exp(numbers(kind, args, 1)?[0]),
            "file" if !args.is_empty() => FieldSpec::File(PathBuf::from(args)),
            _ => {
                return Err(Error::Unknown {
                    kind: "field spec",
                    name: text.to_string(),
                })
            }
        })
    }
}

/// Parses `d=3,n=16,h=0.125` (keys in any order, all required).
pub fn parse_grid(text: &str) -> Result<Grid> {
    let (mut d, mut n, mut h) = (None, None, None);
    for part in text.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::param(format!("grid spec field '{part}' is not key=value")))?;
        let bad = || Error::param(format!("grid spec: bad value '{v}' for {k}"));
        match k.trim() {
            "d" | "dim" => d = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
            "n" => n = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
            "h" => h = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
            other => return Err(Error::param(format!("grid spec: unknown key '{other}'"))),
        }
    }
    match (d, n, h) {
        (Some(d), Some(n), Some(h)) => Grid::new(d, n, h),
        _ => Err(Error::param(format!("grid spec '{text}' needs d, n and h"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_display() {
        for s in [
            "const:2.5",
            "radial:2,0.5",
            "power:-1",
            "oscillator",
            "halfspace:3",
            "exp:4",
            "file:some/where.grid",
        ] {
            assert_eq!(FieldSpec::parse(s).unwrap().to_string(), s);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(FieldSpec::parse("const:").is_err());
        assert!(FieldSpec::parse("radial:1").is_err());
        assert!(FieldSpec::parse("wobble:1").is_err());
        assert!(FieldSpec::parse("const:nan").is_err());
    }

    #[test]
    fn grid_specs() {
        let g = parse_grid("n=8, d=2, h=0.5").unwrap();
        assert_eq!((g.dim(), g.n_per_axis(), g.spacing()), (2, 8, 0.5));
        assert_eq!(parse_grid(&g.to_string()).unwrap(), g);
        assert!(parse_grid("d=3,n=8").is_err());
        assert!(parse_grid("d=4,n=8,h=1").is_err());
    }
}
