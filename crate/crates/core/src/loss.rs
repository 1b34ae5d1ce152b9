//! The three convex margin losses `l(y h)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    /// `(1 - x)² / 2`
    Quadratic,
    /// `log(1 + e^{-x})`
    Logistic,
    /// `max(0, 1 - x)`
    Hinge,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Quadratic, LossKind::Logistic, LossKind::Hinge];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Quadratic => "quadratic",
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
        }
    }

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            LossKind::Quadratic => 0.5 * (1.0 - x) * (1.0 - x),
            LossKind::Logistic => softplus(-x),
            LossKind::Hinge => (1.0 - x).max(0.0),
        }
    }

    /// `l'(x)`; for the hinge the left derivative `-1` is used at the kink.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            LossKind::Quadratic => x - 1.0,
            LossKind::Logistic => -sigmoid(-x),
            LossKind::Hinge => {
                if x <= 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `l''(x)`, zero almost everywhere for the hinge.
    #[inline]
    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            LossKind::Quadratic => 1.0,
            LossKind::Logistic => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            LossKind::Hinge => 0.0,
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" | "square" | "ridge" => Ok(LossKind::Quadratic),
            "logistic" | "log" => Ok(LossKind::Logistic),
            "hinge" | "svm" => Ok(LossKind::Hinge),
            other => Err(format!(
                "unknown loss `{other}` (expected quadratic, logistic or hinge)"
            )),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn loss_eval(loss: LossKind, x: f64) -> f64 {
    loss.eval(x)
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn named_values() {
        assert_eq!(loss_eval(LossKind::Quadratic, 1.0), 0.0);
        assert!((loss_eval(LossKind::Logistic, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(loss_eval(LossKind::Hinge, -1.0), 2.0);
        for l in LossKind::ALL {
            assert!(l.eval(0.0) > 0.0);
        }
    }

    #[test]
    fn logistic_is_stable_far_out() {
        assert!((LossKind::Logistic.eval(-800.0) - 800.0).abs() < 1e-12);
        assert!(LossKind::Logistic.eval(800.0) >= 0.0);
        assert!(LossKind::Logistic.eval(800.0) < 1e-300);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for l in [LossKind::Quadratic, LossKind::Logistic] {
            for &x in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
                let h = 1e-6;
                let fd = (l.eval(x + h) - l.eval(x - h)) / (2.0 * h);
                assert!((fd - l.derivative(x)).abs() < 1e-8, "{l:?} {x}");
                let fd2 = (l.derivative(x + h) - l.derivative(x - h)) / (2.0 * h);
                assert!((fd2 - l.second_derivative(x)).abs() < 1e-6, "{l:?} {x}");
            }
        }
    }

    proptest! {
        #[test]
        fn losses_are_convex(x1 in -20.0f64..20.0, x2 in -20.0f64..20.0, t in 0.0f64..=1.0) {
            for l in LossKind::ALL {
                let lhs = l.eval(t * x1 + (1.0 - t) * x2);
                let rhs = t * l.eval(x1) + (1.0 - t) * l.eval(x2);
                prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
