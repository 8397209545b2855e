//! Scalar activation functions behind a common trait, looked up by name.
//!
//! Names are case-insensitive; parametrised functions take their slope as
//! `lrelu(0.3)`. Derivatives at kinks use the right-hand limit.

use serde::Serialize;

use crate::error::{bail, Error, Result};

/// Whether an activation's range is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    No,
    Yes,
    HalfSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Properties {
    pub vanishing_gradient: bool,
    pub negative_activation: bool,
    pub bound: Bound,
}

const fn props(vanishing_gradient: bool, negative_activation: bool, bound: Bound) -> Properties {
    Properties {
        vanishing_gradient,
        negative_activation,
        bound,
    }
}

pub trait Activation: Send + Sync {
    /// Canonical name, including the parameter if any.
    fn name(&self) -> String;
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn properties(&self) -> Properties;
    /// Points where the function is not differentiable.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub x: f64,
    pub value: f64,
    pub derivative: f64,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn step(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

macro_rules! simple_activation {
    ($ty:ident, $name:literal, $props:expr, |$x:ident| $value:expr, |$dx:ident| $deriv:expr, [$($k:expr),*]) => {
        #[derive(Debug, Clone, Copy, Default)]
        pub struct $ty;

        impl Activation for $ty {
            fn name(&self) -> String {
                $name.to_string()
            }
            fn value(&self, $x: f64) -> f64 {
                $value
            }
            fn derivative(&self, $dx: f64) -> f64 {
                $deriv
            }
            fn properties(&self) -> Properties {
                $props
            }
            fn kinks(&self) -> Vec<f64> {
                vec![$($k),*]
            }
        }
    };
}

simple_activation!(
    Identity,
    "identity",
    props(false, true, Bound::No),
    |x| x,
    |_x| 1.0,
    []
);
simple_activation!(
    Logistic,
    "logistic",
    props(true, false, Bound::Yes),
    |x| logistic(x),
    |x| {
        let s = logistic(x);
        s * (1.0 - s)
    },
    []
);
simple_activation!(
    LogisticMinus,
    "logistic_minus",
    props(true, true, Bound::Yes),
    |x| logistic(x) - 0.5,
    |x| {
        let s = logistic(x);
        s * (1.0 - s)
    },
    []
);
simple_activation!(
    Tanh,
    "tanh",
    props(true, true, Bound::Yes),
    |x| x.tanh(),
    |x| 1.0 - x.tanh().powi(2),
    []
);
simple_activation!(
    Softsign,
    "softsign",
    props(true, true, Bound::Yes),
    |x| x / (1.0 + x.abs()),
    |x| (1.0 + x.abs()).powi(-2),
    []
);
simple_activation!(
    Relu,
    "relu",
    props(true, false, Bound::HalfSided),
    |x| relu(x),
    |x| step(x >= 0.0),
    [0.0]
);
simple_activation!(
    ReluMinus,
    "relu_minus",
    props(true, true, Bound::HalfSided),
    |x| x.max(-1.0),
    |x| step(x >= -1.0),
    [-1.0]
);
simple_activation!(
    Softplus,
    "softplus",
    props(false, false, Bound::HalfSided),
    |x| x.max(0.0) + (-x.abs()).exp().ln_1p(),
    |x| logistic(x),
    []
);
simple_activation!(
    S2Relu,
    "s2relu",
    props(false, true, Bound::No),
    |x| relu(x / 2.0 + 1.0) - relu(-x / 2.0 + 1.0),
    |x| 0.5 * step(x >= -2.0) + 0.5 * step(x < 2.0),
    [-2.0, 2.0]
);

/// Leaky / parametric ReLU: `x` for positive inputs, `αx` otherwise.
#[derive(Debug, Clone, Copy)]
pub struct Leaky {
    pub alpha: f64,
    parametric: bool,
}

impl Activation for Leaky {
    fn name(&self) -> String {
        let base = if self.parametric { "prelu" } else { "lrelu" };
        format!("{base}({})", self.alpha)
    }
    fn value(&self, x: f64) -> f64 {
        if x > 0.0 {
            x
        } else {
            self.alpha * x
        }
    }
    fn derivative(&self, x: f64) -> f64 {
        if x >= 0.0 {
            1.0
        } else {
            self.alpha
        }
    }
    fn properties(&self) -> Properties {
        props(false, true, Bound::No)
    }
    fn kinks(&self) -> Vec<f64> {
        vec![0.0]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Elu {
    pub alpha: f64,
}

impl Activation for Elu {
    fn name(&self) -> String {
        format!("elu({})", self.alpha)
    }
    fn value(&self, x: f64) -> f64 {
        if x > 0.0 {
            x
        } else {
            self.alpha * x.exp_m1()
        }
    }
    fn derivative(&self, x: f64) -> f64 {
        if x >= 0.0 {
            1.0
        } else {
            self.alpha * x.exp()
        }
    }
    fn properties(&self) -> Properties {
        props(false, true, Bound::No)
    }
    fn kinks(&self) -> Vec<f64> {
        vec![0.0]
    }
}

/// Default slope for `lrelu`, `prelu` and `elu` when none is given.
pub const DEFAULT_ALPHA: f64 = 0.01;

type Factory = fn(Option<f64>) -> Result<Box<dyn Activation>>;

fn unit_interval(name: &str, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!("{name} needs alpha in (0, 1), got {alpha}");
    }
    Ok(alpha)
}

fn no_param<A: Activation + Default + 'static>(p: Option<f64>) -> Result<Box<dyn Activation>> {
    match p {
        None => Ok(Box::new(A::default())),
        Some(_) => bail!("{} takes no parameter", A::default().name()),
    }
}

pub struct Registry {
    entries: Vec<(&'static str, Factory)>,
}

impl Registry {
    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|(n, _)| *n)
    }

    pub fn register(&mut self, name: &'static str, f: Factory) {
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, f));
    }

    /// Resolves `name` or `name(param)`.
    pub fn get(&self, spec: &str) -> Result<Box<dyn Activation>> {
        let spec = spec.trim().to_ascii_lowercase();
        let (base, param) = match spec.split_once('(') {
            Some((b, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::invalid(format!("unbalanced parameter in `{spec}`")))?;
                let p: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad parameter `{inner}`")))?;
                (b.trim().to_string(), Some(p))
            }
            None => (spec.clone(), None),
        };
        let factory = self
            .entries
            .iter()
            .find(|(n, _)| *n == base)
            .map(|(_, f)| *f)
            .ok_or(Error::Unknown {
                kind: "activation",
                name: spec.clone(),
            })?;
        factory(param)
    }
}

pub fn registry() -> Registry {
    let mut r = Registry { entries: vec![] };
    r.register("identity", no_param::<Identity>);
    r.register("logistic", no_param::<Logistic>);
    r.register("logistic_minus", no_param::<LogisticMinus>);
    r.register("tanh", no_param::<Tanh>);
    r.register("softsign", no_param::<Softsign>);
    r.register("relu", no_param::<Relu>);
    r.register("relu_minus", no_param::<ReluMinus>);
    r.register("softplus", no_param::<Softplus>);
    r.register("s2relu", no_param::<S2Relu>);
    r.register("lrelu", |p| {
        let alpha = unit_interval("lrelu", p.unwrap_or(DEFAULT_ALPHA))?;
        Ok(Box::new(Leaky {
            alpha,
            parametric: false,
        }))
    });
    r.register("prelu", |p| {
        let alpha = p.unwrap_or(DEFAULT_ALPHA);
        if !alpha.is_finite() {
            bail!("prelu needs a finite alpha");
        }
        Ok(Box::new(Leaky {
            alpha,
            parametric: true,
        }))
    });
    r.register("elu", |p| {
        let alpha = unit_interval("elu", p.unwrap_or(DEFAULT_ALPHA))?;
        Ok(Box::new(Elu { alpha }))
    });
    r
}

/// Value and derivative of the activation named `name` at `x`.
pub fn activation(name: &str, x: f64) -> Result<Evaluation> {
    let f = registry().get(name)?;
    Ok(Evaluation {
        x,
        value: f.value(x),
        derivative: f.derivative(x),
    })
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Diagonal of the softmax Jacobian, `o_j (1 − o_j)`.
pub fn softmax_derivative(x: &[f64]) -> Vec<f64> {
    softmax(x).into_iter().map(|o| o * (1.0 - o)).collect()
}

pub const SOFTMAX_PROPERTIES: Properties = props(true, true, Bound::Yes);

/// Maximum of `x` and its gradient mask (1 where an entry attains the max).
pub fn maxout(x: &[f64]) -> Result<(f64, Vec<f64>)> {
    if x.is_empty() {
        bail!("maxout of an empty vector");
    }
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((m, x.iter().map(|&v| step(v == m)).collect()))
}
