//! Sparsity penalties p(λ, x) on x ≥ 0 and their derivatives.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;
pub const DEFAULT_MCP_B: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    None,
    Lasso,
    Scad { a: f64 },
    Mcp { b: f64 },
}

impl PenaltyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::None => "none",
            PenaltyKind::Lasso => "l1",
            PenaltyKind::Scad { .. } => "scad",
            PenaltyKind::Mcp { .. } => "mcp",
        }
    }

    /// Parse a family name, using default shape parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "none" => Ok(PenaltyKind::None),
            "l1" | "lasso" => Ok(PenaltyKind::Lasso),
            "scad" => Ok(PenaltyKind::Scad { a: DEFAULT_SCAD_A }),
            "mcp" => Ok(PenaltyKind::Mcp { b: DEFAULT_MCP_B }),
            other => Err(Error::invalid(format!(
                "unknown penalty '{other}' (expected none, l1, scad or mcp)"
            ))),
        }
    }

    pub fn is_concave(&self) -> bool {
        matches!(self, PenaltyKind::Scad { .. } | PenaltyKind::Mcp { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPenalty", into = "RawPenalty")]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda: f64) -> Result<Self> {
        let spec = PenaltySpec { kind, lambda };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        PenaltySpec {
            kind: PenaltyKind::None,
            lambda: 0.0,
        }
    }

    pub fn lasso(lambda: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Lasso,
            lambda,
        }
    }

    pub fn scad(lambda: f64, a: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Scad { a },
            lambda,
        }
    }

    pub fn mcp(lambda: f64, b: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Mcp { b },
            lambda,
        }
    }

    /// Same family and shape, different λ.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        PenaltySpec {
            kind: self.kind,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        match self.kind {
            PenaltyKind::Scad { a } if !(a > 2.0 && a.is_finite()) => Err(Error::invalid(format!(
                "SCAD shape a must exceed 2, got {a}"
            ))),
            PenaltyKind::Mcp { b } if !(b > 0.0 && b.is_finite()) => Err(Error::invalid(format!(
                "MCP shape b must be positive, got {b}"
            ))),
            _ => Ok(()),
        }
    }

    /// p(λ, x). Knots use the left branch.
    pub fn value(&self, x: f64) -> Result<f64> {
        check_arg(x)?;
        Ok(self.value_unchecked(x))
    }

    /// ∂p(λ, x)/∂x. Knots use the left branch.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        check_arg(x)?;
        Ok(self.derivative_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: f64) -> f64 {
        let l = self.lambda;
        match self.kind {
            PenaltyKind::None => 0.0,
            PenaltyKind::Lasso => l * x,
            PenaltyKind::Scad { a } => {
                if x <= l {
                    l * x
                } else if x <= a * l {
                    (2.0 * a * l * x - x * x - l * l) / (2.0 * (a - 1.0))
                } else {
                    0.5 * (a + 1.0) * l * l
                }
            }
            PenaltyKind::Mcp { b } => {
                if x <= b * l {
                    l * x - x * x / (2.0 * b)
                } else {
                    0.5 * b * l * l
                }
            }
        }
    }

    pub(crate) fn derivative_unchecked(&self, x: f64) -> f64 {
        let l = self.lambda;
        match self.kind {
            PenaltyKind::None => 0.0,
            PenaltyKind::Lasso => l,
            PenaltyKind::Scad { a } => {
                if x <= l {
                    l
                } else {
                    (a * l - x).max(0.0) / (a - 1.0)
                }
            }
            PenaltyKind::Mcp { b } => (l - x / b).max(0.0),
        }
    }

    /// Σ_k p(λ, θ_k).
    pub fn total(&self, theta: &[f64]) -> f64 {
        theta.iter().map(|&t| self.value_unchecked(t.max(0.0))).sum()
    }
}

impl Default for PenaltySpec {
    fn default() -> Self {
        PenaltySpec::mcp(0.01, DEFAULT_MCP_B)
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.kind {
            PenaltyKind::None => "none".to_string(),
            PenaltyKind::Lasso => format!("l1(lambda={})", self.lambda),
            PenaltyKind::Scad { a } => format!("scad(lambda={}, a={a})", self.lambda),
            PenaltyKind::Mcp { b } => format!("mcp(lambda={}, b={b})", self.lambda),
        };
        f.pad(&s)
    }
}

fn check_arg(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!(
            "penalty argument must be finite and >= 0, got {x}"
        )));
    }
    Ok(())
}

/// Config-file form: {"kind": "scad", "lambda": 0.01, "a": 3.7}.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawPenalty {
    kind: String,
    #[serde(default)]
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
}

impl TryFrom<RawPenalty> for PenaltySpec {
    type Error = Error;

    fn try_from(raw: RawPenalty) -> Result<Self> {
        let kind = match PenaltyKind::from_name(&raw.kind)? {
            PenaltyKind::Scad { .. } => {
                if raw.b.is_some() {
                    return Err(Error::invalid("shape 'b' does not apply to scad"));
                }
                PenaltyKind::Scad {
                    a: raw.a.unwrap_or(DEFAULT_SCAD_A),
                }
            }
            PenaltyKind::Mcp { .. } => {
                if raw.a.is_some() {
                    return Err(Error::invalid("shape 'a' does not apply to mcp"));
                }
                PenaltyKind::Mcp {
                    b: raw.b.unwrap_or(DEFAULT_MCP_B),
                }
            }
            other => {
                if raw.a.is_some() || raw.b.is_some() {
                    return Err(Error::invalid(format!(
                        "shape parameters do not apply to {}",
                        other.name()
                    )));
                }
                other
            }
        };
        PenaltySpec::new(kind, raw.lambda)
    }
}

impl From<PenaltySpec> for RawPenalty {
    fn from(p: PenaltySpec) -> Self {
        let (a, b) = match p.kind {
            PenaltyKind::Scad { a } => (Some(a), None),
            PenaltyKind::Mcp { b } => (None, Some(b)),
            _ => (None, None),
        };
        RawPenalty {
            kind: p.kind.name().to_string(),
            lambda: p.lambda,
            a,
            b,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plateau_values() {
        assert_eq!(PenaltySpec::lasso(0.5).value(2.0).unwrap(), 1.0);
        assert!((PenaltySpec::scad(1.0, 3.7).value(3.7).unwrap() - 2.35).abs() < 1e-12);
        assert!((PenaltySpec::scad(1.0, 3.7).value(9.0).unwrap() - 2.35).abs() < 1e-12);
        assert!((PenaltySpec::mcp(1.0, 2.0).value(2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((PenaltySpec::mcp(1.0, 2.0).value(5.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(PenaltySpec::scad(1.0, 3.7).derivative(0.5).unwrap(), 1.0);
        assert_eq!(PenaltySpec::mcp(1.0, 2.0).derivative(1.0).unwrap(), 0.5);
        assert_eq!(PenaltySpec::scad(1.0, 3.7).derivative(10.0).unwrap(), 0.0);
        assert_eq!(PenaltySpec::mcp(1.0, 2.0).derivative(0.0).unwrap(), 1.0);
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(PenaltySpec::lasso(1.0).value(-1.0).is_err());
        assert!(PenaltySpec::mcp(1.0, 2.0).derivative(-0.1).is_err());
    }

    #[test]
    fn continuity_at_knots() {
        let (l, a, b) = (0.7, 3.7, 2.5);
        let scad = PenaltySpec::scad(l, a);
        let mcp = PenaltySpec::mcp(l, b);
        for (p, knot) in [(scad, l), (scad, a * l), (mcp, b * l)] {
            let left = p.value_unchecked(knot);
            let right = p.value_unchecked(knot * (1.0 + 1e-15));
            assert!((left - right).abs() < 1e-12);
        }
    }

    #[test]
    fn concave_penalties_tend_to_lasso() {
        let l = 0.5;
        for x in [0.1, 1.0, 3.0] {
            let mut prev = f64::INFINITY;
            for shape in [10.0, 100.0, 1000.0] {
                let gap_s = (PenaltySpec::scad(l, shape).value(x).unwrap() - l * x).abs();
                let gap_m = (PenaltySpec::mcp(l, shape).value(x).unwrap() - l * x).abs();
                let gap = gap_s.max(gap_m);
                assert!(gap <= prev + 1e-15);
                prev = gap;
            }
            assert!(prev < 1e-2);
        }
    }

    #[test]
    fn config_round_trip() {
        let p: PenaltySpec = serde_json::from_str(r#"{"kind":"scad","lambda":0.01,"a":3.7}"#).unwrap();
        assert_eq!(p, PenaltySpec::scad(0.01, 3.7));
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<PenaltySpec>(&back).unwrap(), p);
        let m: PenaltySpec = toml::from_str("kind = \"mcp\"\nlambda = 0.1").unwrap();
        assert_eq!(m, PenaltySpec::mcp(0.1, DEFAULT_MCP_B));
        assert!(serde_json::from_str::<PenaltySpec>(r#"{"kind":"scad","lambda":0.1,"a":1.5}"#).is_err());
        assert!(serde_json::from_str::<PenaltySpec>(r#"{"kind":"l1","lambda":-1}"#).is_err());
        assert!(serde_json::from_str::<PenaltySpec>(r#"{"kind":"mcp","lambda":1,"c":2}"#).is_err());
    }

    // Simpson's rule on the derivative, split at the knots where it is not smooth.
    fn integrate_derivative(p: &PenaltySpec, x: f64) -> f64 {
        let mut knots = vec![0.0, x];
        let l = p.lambda;
        match p.kind {
            PenaltyKind::Scad { a } => knots.extend([l, a * l]),
            PenaltyKind::Mcp { b } => knots.push(b * l),
            _ => {}
        }
        knots.retain(|&k| k <= x);
        knots.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let m = 64;
            let h = (hi - lo) / m as f64;
            let mut s = p.derivative_unchecked(lo) + p.derivative_unchecked(hi);
            for i in 1..m {
                let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += c * p.derivative_unchecked(lo + i as f64 * h);
            }
            total += s * h / 3.0;
        }
        total
    }

    proptest! {
        #[test]
        fn value_is_integral_of_derivative(
            l in 0.01f64..2.0, a in 2.1f64..10.0, b in 0.2f64..10.0, x in 0.0f64..20.0
        ) {
            for p in [PenaltySpec::lasso(l), PenaltySpec::scad(l, a), PenaltySpec::mcp(l, b)] {
                let q = integrate_derivative(&p, x);
                prop_assert!((q - p.value_unchecked(x)).abs() < 1e-8, "{p}: {q} vs {}", p.value_unchecked(x));
            }
        }

        #[test]
        fn derivative_nonnegative_and_nonincreasing(
            l in 0.0f64..2.0, a in 2.1f64..10.0, b in 0.2f64..10.0, x in 0.0f64..20.0, dx in 0.0f64..5.0
        ) {
            for p in [PenaltySpec::scad(l, a), PenaltySpec::mcp(l, b)] {
                let d0 = p.derivative_unchecked(x);
                let d1 = p.derivative_unchecked(x + dx);
                prop_assert!(d0 >= 0.0 && d1 >= 0.0);
                prop_assert!(d1 <= d0 + 1e-15);
            }
        }
    }
}
