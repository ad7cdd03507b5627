//! Built-in nonlinearities addressable from a config file as
//! `name` or `name:p1,p2,...`.

use std::f64::consts::PI;
use std::fmt;

use stochbvp_core::nonlinearity::{
    BandAffine, Constant, DampedLinear, GaussIntegral, Linear, Sine, SineXY, Zero,
};
use stochbvp_core::Nonlinearity;

/// One catalog row: a name, its parameters with defaults, and a formula.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static [(&'static str, f64)],
    pub formula: &'static str,
}

const PI2: f64 = PI * PI;

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "zero",
        params: &[],
        formula: "f = 0",
    },
    CatalogEntry {
        name: "constant",
        params: &[("c", 1.0)],
        formula: "f = c",
    },
    CatalogEntry {
        name: "linear",
        params: &[("mu", 4.0)],
        formula: "f = mu x",
    },
    CatalogEntry {
        name: "damped-linear",
        params: &[("mu", 4.0), ("beta", 1.0)],
        formula: "f = mu x + beta y",
    },
    CatalogEntry {
        name: "sine",
        params: &[("A", 0.2)],
        formula: "f = A sin(x)",
    },
    CatalogEntry {
        name: "sine-xy",
        params: &[("A", 0.2), ("B", 0.2)],
        formula: "f = A sin(x) + B sin(y)",
    },
    CatalogEntry {
        name: "gauss-integral",
        params: &[("c", PI2)],
        formula: "f = c int_0^x exp(-u^2) du, f' = c exp(-x^2) in (0, c]",
    },
    CatalogEntry {
        name: "band-affine",
        params: &[("lo", 15.0), ("hi", 30.0)],
        formula: "f = lo x + (hi - lo) tanh(x), f' in (lo, hi]",
    },
];

/// A parsed `name:p1,p2` reference; missing trailing parameters take
/// their catalog defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct FSpec {
    pub name: String,
    pub params: Vec<f64>,
}

impl FSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        let (name, rest) = match text.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (text, None),
        };
        let entry = lookup(name)?;
        let mut params = Vec::new();
        if let Some(rest) = rest.filter(|r| !r.trim().is_empty()) {
            for tok in rest.split(',') {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| format!("f_spec parameter {:?} is not a number", tok.trim()))?;
                if !v.is_finite() {
                    return Err(format!("f_spec parameter {v} is not finite"));
                }
                params.push(v);
            }
        }
        if params.len() > entry.params.len() {
            return Err(format!(
                "{} takes at most {} parameter(s), got {}",
                entry.name,
                entry.params.len(),
                params.len()
            ));
        }
        for &(_, d) in &entry.params[params.len()..] {
            params.push(d);
        }
        Ok(Self {
            name: entry.name.to_string(),
            params,
        })
    }

    pub fn build(&self) -> Box<dyn Nonlinearity> {
        let p = &self.params;
        match self.name.as_str() {
            "zero" => Box::new(Zero),
            "constant" => Box::new(Constant(p[0])),
            "linear" => Box::new(Linear { mu: p[0] }),
            "damped-linear" => Box::new(DampedLinear {
                mu: p[0],
                beta: p[1],
            }),
            "sine" => Box::new(Sine { amplitude: p[0] }),
            "sine-xy" => Box::new(SineXY { ax: p[0], by: p[1] }),
            "gauss-integral" => Box::new(GaussIntegral { scale: p[0] }),
            "band-affine" => Box::new(BandAffine { lo: p[0], hi: p[1] }),
            other => unreachable!("{other} passed lookup"),
        }
    }
}

impl fmt::Display for FSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            f.write_str(if i == 0 { ":" } else { "," })?;
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

pub fn lookup(name: &str) -> Result<&'static CatalogEntry, String> {
    CATALOG.iter().find(|e| e.name == name).ok_or_else(|| {
        let names: Vec<&str> = CATALOG.iter().map(|e| e.name).collect();
        format!("unknown nonlinearity {name:?}; known: {}", names.join(", "))
    })
}

/// Human-readable catalog listing.
pub fn describe() -> String {
    let mut out = String::new();
    for e in CATALOG {
        let params: Vec<String> = e.params.iter().map(|(n, d)| format!("{n}={d}")).collect();
        out.push_str(&format!(
            "{:<16} {:<24} {}\n",
            e.name,
            params.join(","),
            e.formula
        ));
    }
    out
}
