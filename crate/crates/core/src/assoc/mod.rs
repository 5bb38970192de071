//! Dependence measures between scalar samples.
//!
//! Both normalized measures share the same shape: each sample is mapped once
//! to a centered object (a Gram matrix for nr-HSIC, angle factors for
//! projection correlation), and the measure is a normalized inner product of
//! two such objects. [`Embedding`] captures that, so that a p-feature system
//! costs p embeddings plus p² inner products.

pub mod hsic;
pub mod projection;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::numeric::pairwise_dot;

pub use hsic::{
    center_gram, gaussian_kernel_matrix, hsic_u, hsic_v, median_heuristic_bandwidth, CenteredGram,
};
pub use projection::{
    angle_tensor, angle_tensor_with_limit, pc_squared_v, pcov_v, AngleFactors, AngleTensor,
    DEFAULT_MAX_TENSOR_N,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    /// Normalized HSIC with a Gaussian kernel.
    #[serde(rename = "nr_hsic", alias = "hsic")]
    NrHsic,
    /// Squared projection correlation.
    #[serde(rename = "pc", alias = "pc_squared")]
    PcSquared,
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureKind::NrHsic => "nr_hsic",
            MeasureKind::PcSquared => "pc",
        })
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nr_hsic" | "nr-hsic" | "hsic" => Ok(MeasureKind::NrHsic),
            "pc" | "pc_squared" | "pc2" => Ok(MeasureKind::PcSquared),
            other => Err(Error::invalid(format!(
                "unknown measure '{other}' (expected nr_hsic or pc)"
            ))),
        }
    }
}

/// Gaussian kernel bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    MedianHeuristic,
    Fixed(f64),
}

impl Serialize for Bandwidth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bandwidth::MedianHeuristic => s.serialize_str("median"),
            Bandwidth::Fixed(h) => s.serialize_f64(*h),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Value(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) if s.eq_ignore_ascii_case("median") => Ok(Bandwidth::MedianHeuristic),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "bandwidth must be \"median\" or a positive number, got \"{s}\""
            ))),
            Raw::Value(h) if h.is_finite() && h > 0.0 => Ok(Bandwidth::Fixed(h)),
            Raw::Value(h) => Err(serde::de::Error::custom(format!(
                "bandwidth must be positive, got {h}"
            ))),
        }
    }
}

/// Which dependence measure to use and how to instantiate its kernel.
/// The bandwidth only affects nr-HSIC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: Bandwidth,
}

fn default_bandwidth() -> Bandwidth {
    Bandwidth::MedianHeuristic
}

impl MeasureSpec {
    pub fn nr_hsic() -> Self {
        MeasureSpec {
            kind: MeasureKind::NrHsic,
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }

    pub fn pc() -> Self {
        MeasureSpec {
            kind: MeasureKind::PcSquared,
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec::pc()
    }
}

/// A sample mapped to the centered object its measure compares.
#[derive(Debug, Clone)]
pub enum Embedding {
    Gram(CenteredGram),
    Angles(AngleFactors),
}

impl Embedding {
    pub fn n(&self) -> usize {
        match self {
            Embedding::Gram(g) => g.n(),
            Embedding::Angles(a) => a.n(),
        }
    }

    /// Un-normalized inner product of the centered objects.
    pub fn inner(&self, other: &Embedding) -> Result<f64> {
        match (self, other) {
            (Embedding::Gram(a), Embedding::Gram(b)) => {
                if a.n() != b.n() {
                    return Err(Error::invalid("samples differ in length"));
                }
                Ok(pairwise_dot(a.as_slice(), b.as_slice()))
            }
            (Embedding::Angles(a), Embedding::Angles(b)) => a.inner(b),
            _ => Err(Error::invalid("cannot compare embeddings of different measures")),
        }
    }

    /// Square root of the self inner product.
    pub fn norm(&self) -> f64 {
        match self {
            Embedding::Gram(g) => g.frob(),
            Embedding::Angles(a) => a.sqnorm().sqrt(),
        }
    }

    /// Normalized dependence between two embedded samples.
    pub fn dependence(&self, other: &Embedding) -> Result<f64> {
        if std::ptr::eq(self, other) {
            return Ok(1.0);
        }
        Ok(self.inner(other)? / (self.norm() * other.norm()))
    }
}

/// Embed a sample for the given measure. Fails with `DegenerateFeature` when
/// the sample has zero self-dependence.
pub fn embed(x: &Sample, spec: &MeasureSpec) -> Result<Embedding> {
    match spec.kind {
        MeasureKind::NrHsic => {
            let h = match spec.bandwidth {
                Bandwidth::MedianHeuristic => None,
                Bandwidth::Fixed(h) => Some(h),
            };
            Ok(Embedding::Gram(hsic::centered_gaussian_gram(x, h)?))
        }
        MeasureKind::PcSquared => {
            let f = AngleFactors::new(x)?;
            if f.is_degenerate() {
                return Err(Error::degenerate(None, "zero projection self-covariance"));
            }
            Ok(Embedding::Angles(f))
        }
    }
}

/// Normalized HSIC V-statistic: hsic_v(x,y) / sqrt(hsic_v(x,x) hsic_v(y,y)).
pub fn nr_hsic_v(x: &Sample, y: &Sample, spec: &MeasureSpec) -> Result<f64> {
    let spec = MeasureSpec {
        kind: MeasureKind::NrHsic,
        ..*spec
    };
    dependence(x, y, &spec)
}

/// D̂_v(x, y) for the configured measure.
pub fn dependence(x: &Sample, y: &Sample, spec: &MeasureSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let ex = embed(x, spec)?;
    let ey = embed(y, spec)?;
    ex.dependence(&ey)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(n: usize, rng: &mut ChaCha8Rng) -> Sample {
        Sample::from_vec((0..n).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
    }

    #[test]
    fn self_dependence_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = normal(40, &mut rng);
        for spec in [MeasureSpec::nr_hsic(), MeasureSpec::pc()] {
            assert!((dependence(&x, &x, &spec).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nr_hsic_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = normal(50, &mut rng);
        let y = normal(50, &mut rng);
        let spec = MeasureSpec::nr_hsic();
        let a = nr_hsic_v(&x, &y, &spec).unwrap();
        let b = nr_hsic_v(&y, &x, &spec).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn constant_feature_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = normal(20, &mut rng);
        let c = Sample::from_vec(vec![1.5; 20]).unwrap();
        for spec in [MeasureSpec::nr_hsic(), MeasureSpec::pc()] {
            assert!(matches!(
                dependence(&c, &x, &spec),
                Err(Error::DegenerateFeature { .. })
            ));
        }
    }

    #[test]
    fn spec_parses_from_toml() {
        let s: MeasureSpec = toml::from_str("kind = \"hsic\"\nbandwidth = 0.5").unwrap();
        assert_eq!(s.kind, MeasureKind::NrHsic);
        assert_eq!(s.bandwidth, Bandwidth::Fixed(0.5));
        let s: MeasureSpec = toml::from_str("kind = \"pc\"").unwrap();
        assert_eq!(s.bandwidth, Bandwidth::MedianHeuristic);
        assert!(toml::from_str::<MeasureSpec>("kind = \"pc\"\nbandwidth = -1.0").is_err());
        assert!(toml::from_str::<MeasureSpec>("kind = \"dcor\"").is_err());
    }
}
