//! Payoff functions of the stopping time.
//!
//! Exponential-linear payoffs `e^{−rt}(a + b t)` (optionally clipped at zero)
//! carry closed-form integrals against exponential tails; anything else is a
//! plain closure integrated numerically.

use std::fmt;
use std::sync::Arc;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Payoff {
    kind: Kind,
}

#[derive(Clone)]
enum Kind {
    ExpLinear(ExpLinear),
    Function {
        value: Scalar,
        derivative: Option<Scalar>,
        label: String,
    },
}

/// `e^{−rate·t}(constant + slope·t)`, clipped to `[0, support_end]` when positive-part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpLinear {
    pub rate: f64,
    pub constant: f64,
    pub slope: f64,
    /// Zero beyond this time (the root of the linear factor for positive parts).
    pub support_end: f64,
}

impl ExpLinear {
    pub fn value(&self, t: f64) -> f64 {
        if t > self.support_end {
            0.0
        } else {
            (-self.rate * t).exp() * (self.constant + self.slope * t)
        }
    }
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::ExpLinear(e) => write!(f, "Payoff::ExpLinear({e:?})"),
            Kind::Function { label, .. } => write!(f, "Payoff::Function({label})"),
        }
    }
}

impl Payoff {
    /// `e^{−rt}`.
    pub fn discount(rate: f64) -> Self {
        Self::exp_linear(rate, 1.0, 0.0)
    }

    /// `ρ ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self::exp_linear(0.0, c, 0.0)
    }

    /// `t·e^{−rt}`.
    pub fn time_weighted_discount(rate: f64) -> Self {
        Self::exp_linear(rate, 0.0, 1.0)
    }

    pub fn exp_linear(rate: f64, constant: f64, slope: f64) -> Self {
        Self {
            kind: Kind::ExpLinear(ExpLinear {
                rate,
                constant,
                slope,
                support_end: f64::INFINITY,
            }),
        }
    }

    /// `max(ρ, 0)` for an exponential-linear payoff with a nonpositive slope.
    pub fn positive_part(self) -> Self {
        match self.kind {
            Kind::ExpLinear(mut e) => {
                if e.slope < 0.0 {
                    e.support_end = e.support_end.min((-e.constant / e.slope).max(0.0));
                } else if e.constant < 0.0 {
                    e.support_end = 0.0;
                }
                Self {
                    kind: Kind::ExpLinear(e),
                }
            }
            Kind::Function {
                value,
                derivative,
                label,
            } => {
                let v = value.clone();
                let d = derivative.clone();
                let vv = v.clone();
                Self {
                    kind: Kind::Function {
                        value: Arc::new(move |t| v(t).max(0.0)),
                        derivative: d.map(|d| -> Scalar {
                            Arc::new(move |t| if vv(t) > 0.0 { d(t) } else { 0.0 })
                        }),
                        label: format!("({label})+"),
                    },
                }
            }
        }
    }

    pub fn from_fn(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Self {
        Self {
            kind: Kind::Function {
                value: Arc::new(value),
                derivative: derivative.map(|d| -> Scalar { Arc::from(d) }),
                label: label.into(),
            },
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::ExpLinear(e) => e.value(t),
            Kind::Function { value, .. } => value(t),
        }
    }

    /// `ρ'(t)`; closures without a derivative use a central difference.
    pub fn derivative(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::ExpLinear(e) => {
                if t > e.support_end {
                    0.0
                } else {
                    (-e.rate * t).exp() * (e.slope - e.rate * (e.constant + e.slope * t))
                }
            }
            Kind::Function {
                value, derivative, ..
            } => match derivative {
                Some(d) => d(t),
                None => {
                    let h = 1e-6 * (1.0 + t.abs());
                    (value(t + h) - value(t - h)) / (2.0 * h)
                }
            },
        }
    }

    pub fn exp_linear_form(&self) -> Option<ExpLinear> {
        match &self.kind {
            Kind::ExpLinear(e) => Some(*e),
            Kind::Function { .. } => None,
        }
    }

    /// Time after which the payoff is identically zero, if any.
    pub fn support_end(&self) -> f64 {
        match &self.kind {
            Kind::ExpLinear(e) => e.support_end,
            Kind::Function { .. } => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_finite_difference() {
        let p = Payoff::exp_linear(1.3, 1.0, -0.7);
        for &t in &[0.0, 0.4, 1.1] {
            let h = 1e-6;
            let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
            assert!((p.derivative(t) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn positive_part_clips_at_root() {
        let p = Payoff::exp_linear(1.5, 1.0, -0.5).positive_part();
        assert_eq!(p.support_end(), 2.0);
        assert!(p.value(2.5) == 0.0);
        assert!(p.value(1.0) > 0.0);
    }
}
