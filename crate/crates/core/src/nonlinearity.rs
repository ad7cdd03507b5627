//! The drift `f(t, x, y)` of `X'' + f(t, X, X') = dW/dt`, with its partial
//! derivatives and whatever global bounds the caller can vouch for.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Declared suprema `‖f‖₀`, `‖f_x‖₀`, `‖f_y‖₀`; `None` means unbounded or unknown.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bounds {
    pub sup_f: Option<f64>,
    pub sup_fx: Option<f64>,
    pub sup_fy: Option<f64>,
}

/// Declared Lipschitz constants: `K` in `x`, `L` in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lipschitz {
    pub k: Option<f64>,
    pub l: Option<f64>,
}

pub trait Nonlinearity: Send + Sync {
    fn name(&self) -> String;

    fn f(&self, t: f64, x: f64, y: f64) -> f64;

    fn f_x(&self, t: f64, x: f64, y: f64) -> f64;

    fn f_y(&self, t: f64, x: f64, y: f64) -> f64;

    fn bounds(&self) -> Bounds;

    /// `false` when `f_y ≡ 0`.
    fn depends_on_y(&self) -> bool {
        true
    }

    fn lipschitz(&self) -> Lipschitz {
        let b = self.bounds();
        Lipschitz {
            k: b.sup_fx,
            l: b.sup_fy,
        }
    }
}

impl fmt::Debug for dyn Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonlinearity({})", self.name())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Nonlinearity for Zero {
    fn name(&self) -> String {
        "zero".into()
    }
    fn f(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn f_x(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn f_y(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn bounds(&self) -> Bounds {
        Bounds {
            sup_f: Some(0.0),
            sup_fx: Some(0.0),
            sup_fy: Some(0.0),
        }
    }
    fn depends_on_y(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Nonlinearity for Constant {
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }
    fn f(&self, _: f64, _: f64, _: f64) -> f64 {
        self.0
    }
    fn f_x(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn f_y(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn bounds(&self) -> Bounds {
        Bounds {
            sup_f: Some(self.0.abs()),
            sup_fx: Some(0.0),
            sup_fy: Some(0.0),
        }
    }
    fn depends_on_y(&self) -> bool {
        false
    }
}

/// `f(x) = μ x`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub mu: f64,
}

impl Nonlinearity for Linear {
    fn name(&self) -> String {
        format!("linear({})", self.mu)
    }
    fn f(&self, _: f64, x: f64, _: f64) -> f64 {
        self.mu * x
    }
    fn f_x(&self, _: f64, _: f64, _: f64) -> f64 {
        self.mu
    }
    fn f_y(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn bounds(&self) -> Bounds {
        Bounds {
            sup_f: (self.mu == 0.0).then_some(0.0),
            sup_fx: Some(self.mu.abs()),
            sup_fy: Some(0.0),
        }
    }
    fn depends_on_y(&self) -> bool {
        false
    }
}

/// `f(x, y) = μ x + β y`.
#[derive(Debug, Clone, Copy)]
pub struct DampedLinear {
    pub mu: f64,
    pub beta: f64,
}

impl Nonlinearity for DampedLinear {
    fn name(&self) -> String {
        format!("damped-linear({}, {})", self.mu, self.beta)
    }
    fn f(&self, _: f64, x: f64, y: f64) -> f64 {
        self.mu * x + self.beta * y
    }
    fn f_x(&self, _: f64, _: f64, _: f64) -> f64 {
        self.mu
    }
    fn f_y(&self, _: f64, _: f64, _: f64) -> f64 {
        self.beta
    }
    fn bounds(&self) -> Bounds {
        Bounds {
            sup_f: (self.mu == 0.0 && self.beta == 0.0).then_some(0.0),
            sup_fx: Some(self.mu.abs()),
            sup_fy: Some(self.beta.abs()),
        }
    }
    fn depends_on_y(&self) -> bool {
        self.beta != 0.0
    }
}

/// `f(x) = A sin x`.
#[derive(Debug, Clone, Copy)]
pub struct Sine {
    pub amplitude: f64,
}

impl Nonlinearity for Sine {
    fn name(&self) -> String {
        format!("sine({})", self.amplitude)
    }
    fn f(&self, _: f64, x: f64, _: f64) -> f64 {
        self.amplitude * x.sin()
    }
    fn f_x(&self, _: f64, x: f64, _: f64) -> f64 {
        self.amplitude * x.cos()
    }
    fn f_y(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn bounds(&self) -> Bounds {
        let a = self.amplitude.abs();
        Bounds {
            sup_f: Some(a),
            sup_fx: Some(a),
            sup_fy: Some(0.0),
        }
    }
    fn depends_on_y(&self) -> bool {
        false
    }
}

/// `f(x, y) = A sin x + B sin y`, a bounded drift with a genuine `y` dependence.
#[derive(Debug, Clone, Copy)]
pub struct SineXY {
    pub ax: f64,
    pub by: f64,
}

impl Nonlinearity for SineXY {
    fn name(&self) -> String {
        format!("sine-xy({}, {})", self.ax, self.by)
    }
    fn f(&self, _: f64, x: f64, y: f64) -> f64 {
        self.ax * x.sin() + self.by * y.sin()
    }
    fn f_x(&self, _: f64, x: f64, _: f64) -> f64 {
        self.ax * x.cos()
    }
    fn f_y(&self, _: f64, _: f64, y: f64) -> f64 {
        self.by * y.cos()
    }
    fn bounds(&self) -> Bounds {
        Bounds {
            sup_f: Some(self.ax.abs() + self.by.abs()),
            sup_fx: Some(self.ax.abs()),
            sup_fy: Some(self.by.abs()),
        }
    }
    fn depends_on_y(&self) -> bool {
        self.by != 0.0
    }
}

/// `f(x) = c ∫_0^x e^{-u²} du = c (√π / 2) erf(x)`, with `f'(x) = c e^{-x²}`.
///
/// With `c = π²` the derivative lies in `(0, π²]` and touches `π²` only at
/// `x = 0`.
#[derive(Debug, Clone, Copy)]
pub struct GaussIntegral {
    pub scale: f64,
}

impl Default for GaussIntegral {
    fn default() -> Self {
        Self { scale: PI * PI }
    }
}

impl Nonlinearity for GaussIntegral {
    fn name(&self) -> String {
        format!("gauss-integral({})", self.scale)
    }
    fn f(&self, _: f64, x: f64, _: f64) -> f64 {
        self.scale * 0.5 * PI.sqrt() * libm::erf(x)
    }
    fn f_x(&self, _: f64, x: f64, _: f64) -> f64 {
        self.scale * (-x * x).exp()
    }
    fn f_y(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn bounds(&self) -> Bounds {
        let c = self.scale.abs();
        Bounds {
            sup_f: Some(c * 0.5 * PI.sqrt()),
            sup_fx: Some(c),
            sup_fy: Some(0.0),
        }
    }
    fn depends_on_y(&self) -> bool {
        false
    }
}

/// `f(x) = lo·x + (hi - lo)·tanh(x)`, so `f'(x) = lo + (hi - lo) sech²(x) ∈ (lo, hi]`.
///
/// Choosing `π² m² < lo < hi < π² (m+1)²` puts `f'` inside the `m`-th
/// non-resonance band.
#[derive(Debug, Clone, Copy)]
pub struct BandAffine {
    pub lo: f64,
    pub hi: f64,
}

impl Nonlinearity for BandAffine {
    fn name(&self) -> String {
        format!("band-affine({}, {})", self.lo, self.hi)
    }
    fn f(&self, _: f64, x: f64, _: f64) -> f64 {
        self.lo * x + (self.hi - self.lo) * x.tanh()
    }
    fn f_x(&self, _: f64, x: f64, _: f64) -> f64 {
        let c = x.cosh();
        self.lo + (self.hi - self.lo) / (c * c)
    }
    fn f_y(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn bounds(&self) -> Bounds {
        Bounds {
            sup_f: None,
            sup_fx: Some(self.lo.abs().max(self.hi.abs())),
            sup_fy: Some(0.0),
        }
    }
    fn depends_on_y(&self) -> bool {
        false
    }
}

type Scalar3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Nonlinearity assembled from closures.
#[derive(Clone)]
pub struct FnNonlinearity {
    name: String,
    f: Scalar3,
    f_x: Scalar3,
    f_y: Scalar3,
    bounds: Bounds,
    depends_on_y: bool,
    lipschitz: Option<Lipschitz>,
}

impl FnNonlinearity {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        f_x: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        f_y: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            f_x: Arc::new(f_x),
            f_y: Arc::new(f_y),
            bounds: Bounds::default(),
            depends_on_y: true,
            lipschitz: None,
        }
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn independent_of_y(mut self) -> Self {
        self.depends_on_y = false;
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: Lipschitz) -> Self {
        self.lipschitz = Some(lipschitz);
        self
    }
}

impl Nonlinearity for FnNonlinearity {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn f(&self, t: f64, x: f64, y: f64) -> f64 {
        (self.f)(t, x, y)
    }
    fn f_x(&self, t: f64, x: f64, y: f64) -> f64 {
        (self.f_x)(t, x, y)
    }
    fn f_y(&self, t: f64, x: f64, y: f64) -> f64 {
        (self.f_y)(t, x, y)
    }
    fn bounds(&self) -> Bounds {
        self.bounds
    }
    fn depends_on_y(&self) -> bool {
        self.depends_on_y
    }
    fn lipschitz(&self) -> Lipschitz {
        self.lipschitz.unwrap_or(Lipschitz {
            k: self.bounds.sup_fx,
            l: self.bounds.sup_fy,
        })
    }
}
