//! Pathwise-uniqueness criteria: the `α`/`β` threshold functions of the
//! Lipschitz uniqueness criteria, the non-resonance band test, and the shooting
//! characterization of the linearized condition (L).

use crate::error::{Error, Result};
use crate::green::free_solution;
use crate::grid::{cumtrapz, Grid, GridFunction, SamplePath};
use crate::nonlinearity::Nonlinearity;
use std::f64::consts::PI;

/// `|u₂(1)|` below this is classified as resonant.
pub const RESONANCE_THRESHOLD: f64 = 1e-9;

/// `α(L, K)`, with `L` the coefficient acting on `y` and `K` on `x`.
///
/// Total: returns `+∞` outside the three finite branches.
pub fn alpha(l: f64, k: f64) -> f64 {
    let disc = 4.0 * k - l * l;
    if disc > 0.0 {
        let z = (l / (2.0 * k.sqrt())).clamp(-1.0, 1.0);
        2.0 / disc.sqrt() * z.acos()
    } else if disc < 0.0 && l > 0.0 && k > 0.0 {
        let z = l / (2.0 * k.sqrt());
        debug_assert!(z >= 1.0, "arccosh argument {z} below 1");
        let z = z.max(1.0);
        2.0 / (-disc).sqrt() * (z + (z * z - 1.0).sqrt()).ln()
    } else if disc == 0.0 && l > 0.0 {
        2.0 / l
    } else {
        f64::INFINITY
    }
}

/// `β(L, K) = α(-L, K)`.
pub fn beta(l: f64, k: f64) -> f64 {
    alpha(-l, k)
}

/// Outcome of a threshold criterion: whether it holds and by how much.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Criterion {
    pub holds: bool,
    /// Positive when the criterion holds; `+∞` on the unbounded branch.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimoCheck {
    pub criterion: Criterion,
    /// For `K == L`, the equivalent test `0 < L < 4`.
    pub common_constant: Option<bool>,
}

/// Contraction criterion `1 < 2 α(L, K)` for `|Δf| ≤ K|Δx| + L|Δy|`.
pub fn check_primo(k: f64, l: f64) -> PrimoCheck {
    let margin = 2.0 * alpha(l, k) - 1.0;
    PrimoCheck {
        criterion: Criterion {
            holds: margin > 0.0,
            margin,
        },
        common_constant: (k == l).then_some(l > 0.0 && l < 4.0),
    }
}

/// One-sided criterion `1 < α(L₂, K) + β(L₁, K)`.
pub fn check_secondo(k: f64, l1: f64, l2: f64) -> Criterion {
    let margin = alpha(l2, k) + beta(l1, k) - 1.0;
    Criterion {
        holds: margin > 0.0,
        margin,
    }
}

/// Region sampled when checking `h ≤ f_x ≤ k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBox {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub points_per_axis: usize,
}

impl Default for ProbeBox {
    fn default() -> Self {
        Self {
            t: (0.0, 1.0),
            x: (-10.0, 10.0),
            points_per_axis: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandCheck {
    pub holds: bool,
    /// `π² m² < h` and `k < π² (m+1)²`.
    pub band_admissible: bool,
    pub min_fx: f64,
    pub max_fx: f64,
}

/// Probe-based test of `π² m² < h ≤ f_x ≤ k < π² (m+1)²`.
///
/// The sampling is a heuristic witness, not a proof: `f_x` is only
/// evaluated at `points_per_axis²` points of the box.
pub fn check_nonresonance_band(
    f: &dyn Nonlinearity,
    m: u32,
    h: f64,
    k: f64,
    probe: &ProbeBox,
) -> Result<BandCheck> {
    if f.depends_on_y() {
        return Err(Error::InvalidArgument(format!(
            "non-resonance band test needs f independent of y; {} is not",
            f.name()
        )));
    }
    if h > k {
        return Err(Error::InvalidArgument(format!("band [{h}, {k}] is empty")));
    }
    let p = probe.points_per_axis.max(2);
    let m = m as f64;
    let band_admissible = PI * PI * m * m < h && k < PI * PI * (m + 1.0) * (m + 1.0);
    let mut min_fx = f64::INFINITY;
    let mut max_fx = f64::NEG_INFINITY;
    for i in 0..p {
        let t = probe.t.0 + (probe.t.1 - probe.t.0) * i as f64 / (p - 1) as f64;
        for j in 0..p {
            let x = probe.x.0 + (probe.x.1 - probe.x.0) * j as f64 / (p - 1) as f64;
            let d = f.f_x(t, x, 0.0);
            min_fx = min_fx.min(d);
            max_fx = max_fx.max(d);
        }
    }
    Ok(BandCheck {
        holds: band_admissible && h <= min_fx && max_fx <= k,
        band_admissible,
        min_fx,
        max_fx,
    })
}

/// Which base path the coefficients were linearized around.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearization {
    /// Around the free solution `Y(ω)`: condition (LY).
    AroundY,
    /// Around a solution `X(ω)`: condition (L).
    AroundX,
}

/// Coefficients `a_t = f_x`, `b_t = f_y` of `u'' + b u' + a u = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedCoefficients {
    pub a: GridFunction,
    pub b: GridFunction,
    pub source: Linearization,
}

impl LinearizedCoefficients {
    pub fn new(a: GridFunction, b: GridFunction, source: Linearization) -> Result<Self> {
        if a.grid() != b.grid() {
            return Err(Error::GridMismatch {
                left: a.grid().n(),
                right: b.grid().n(),
            });
        }
        Ok(Self { a, b, source })
    }

    pub fn constant(grid: Grid, a: f64, b: f64) -> Self {
        Self {
            a: GridFunction::constant(grid, a),
            b: GridFunction::constant(grid, b),
            source: Linearization::AroundY,
        }
    }

    /// Evaluates `f_x`, `f_y` along `(base, base')`.
    pub fn along(
        f: &dyn Nonlinearity,
        base: &GridFunction,
        base_p: &GridFunction,
        source: Linearization,
    ) -> Result<Self> {
        let grid = base.grid();
        if base_p.grid() != grid {
            return Err(Error::GridMismatch {
                left: grid.n(),
                right: base_p.grid().n(),
            });
        }
        let mut a = Vec::with_capacity(grid.len());
        let mut b = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let (t, x, y) = (grid.node(i), base.get(i), base_p.get(i));
            a.push(f.f_x(t, x, y));
            b.push(f.f_y(t, x, y));
        }
        Ok(Self {
            a: GridFunction::from_vec_unchecked(grid, a),
            b: GridFunction::from_vec_unchecked(grid, b),
            source,
        })
    }

    /// Condition (LY): coefficients along the free solution of `ω`.
    pub fn around_free_solution(f: &dyn Nonlinearity, path: &SamplePath) -> Self {
        let fs = free_solution(path);
        Self::along(f, &fs.y, &fs.yp, Linearization::AroundY).expect("same grid")
    }

    pub fn grid(&self) -> Grid {
        self.a.grid()
    }
}

/// Fundamental solutions `u₁` (`u(0)=1, u'(0)=0`) and `u₂` (`u(0)=0, u'(0)=1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Fundamental {
    pub u1: GridFunction,
    pub u2: GridFunction,
    pub u1p: GridFunction,
    pub u2p: GridFunction,
}

impl Fundamental {
    /// `W = u₁ u₂' - u₂ u₁'` at every node.
    pub fn wronskian(&self) -> GridFunction {
        let grid = self.u1.grid();
        GridFunction::from_vec_unchecked(
            grid,
            (0..grid.len())
                .map(|i| self.u1.get(i) * self.u2p.get(i) - self.u2.get(i) * self.u1p.get(i))
                .collect(),
        )
    }
}

/// Classical RK4 for `u'' + b u' + a u = 0` on the grid, coefficients
/// linearly interpolated at the half steps.
pub fn shoot_fundamental(coeffs: &LinearizedCoefficients) -> Result<Fundamental> {
    let grid = coeffs.grid();
    let n = grid.n();
    let h = grid.step();
    let a = coeffs.a.values();
    let b = coeffs.b.values();

    let mut s1 = [1.0, 0.0];
    let mut s2 = [0.0, 1.0];
    let mut out = [
        Vec::with_capacity(n + 1),
        Vec::with_capacity(n + 1),
        Vec::with_capacity(n + 1),
        Vec::with_capacity(n + 1),
    ];
    let push = |out: &mut [Vec<f64>; 4], s1: &[f64; 2], s2: &[f64; 2]| {
        out[0].push(s1[0]);
        out[1].push(s2[0]);
        out[2].push(s1[1]);
        out[3].push(s2[1]);
    };
    push(&mut out, &s1, &s2);

    for i in 0..n {
        let (a0, a1) = (a[i], a[i + 1]);
        let (b0, b1) = (b[i], b[i + 1]);
        let (am, bm) = (0.5 * (a0 + a1), 0.5 * (b0 + b1));
        s1 = rk4_step(s1, h, (a0, b0), (am, bm), (a1, b1));
        s2 = rk4_step(s2, h, (a0, b0), (am, bm), (a1, b1));
        if !(s1.iter().chain(&s2).all(|v| v.is_finite())) {
            return Err(Error::ShootingOverflow(grid.node(i + 1)));
        }
        push(&mut out, &s1, &s2);
    }
    let [u1, u2, u1p, u2p] = out;
    Ok(Fundamental {
        u1: GridFunction::from_vec_unchecked(grid, u1),
        u2: GridFunction::from_vec_unchecked(grid, u2),
        u1p: GridFunction::from_vec_unchecked(grid, u1p),
        u2p: GridFunction::from_vec_unchecked(grid, u2p),
    })
}

#[inline]
fn rk4_step(s: [f64; 2], h: f64, c0: (f64, f64), cm: (f64, f64), c1: (f64, f64)) -> [f64; 2] {
    let rhs = |u: f64, v: f64, (a, b): (f64, f64)| (v, -b * v - a * u);
    let k1 = rhs(s[0], s[1], c0);
    let k2 = rhs(s[0] + 0.5 * h * k1.0, s[1] + 0.5 * h * k1.1, cm);
    let k3 = rhs(s[0] + 0.5 * h * k2.0, s[1] + 0.5 * h * k2.1, cm);
    let k4 = rhs(s[0] + h * k3.0, s[1] + h * k3.1, c1);
    [
        s[0] + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        s[1] + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    ]
}

/// `u₂(1)`. The linearized Dirichlet problem has only the zero solution iff
/// this is nonzero, since every solution with `u(0) = 0` is a multiple of `u₂`.
pub fn condition_l_margin(coeffs: &LinearizedCoefficients) -> Result<f64> {
    let fund = shoot_fundamental(coeffs)?;
    Ok(fund.u2.get(coeffs.grid().n()))
}

/// `|margin| < RESONANCE_THRESHOLD`.
pub fn is_resonant(margin: f64) -> bool {
    margin.abs() < RESONANCE_THRESHOLD
}

/// Abel's identity target `exp(-∫_0^t b)`, used to monitor shooting accuracy.
pub fn abel_wronskian(b: &GridFunction) -> GridFunction {
    let grid = b.grid();
    GridFunction::from_vec_unchecked(
        grid,
        cumtrapz(grid, b.values())
            .into_iter()
            .map(|c| (-c).exp())
            .collect(),
    )
}
