//! Synthetic benchmark designs: AR(1)-correlated Gaussian features with
//! linear, non-linear and binary responses.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DgpId {
    L1a,
    L1b,
    L1c,
    L1d,
    N2a,
    N2b,
    N2c,
    C3a,
    C3b,
    C3c,
}

impl DgpId {
    pub const ALL: [DgpId; 10] = [
        DgpId::L1a,
        DgpId::L1b,
        DgpId::L1c,
        DgpId::L1d,
        DgpId::N2a,
        DgpId::N2b,
        DgpId::N2c,
        DgpId::C3a,
        DgpId::C3b,
        DgpId::C3c,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DgpId::L1a => "1a",
            DgpId::L1b => "1b",
            DgpId::L1c => "1c",
            DgpId::L1d => "1d",
            DgpId::N2a => "2a",
            DgpId::N2b => "2b",
            DgpId::N2c => "2c",
            DgpId::C3a => "3a",
            DgpId::C3b => "3b",
            DgpId::C3c => "3c",
        }
    }

    /// 0-based indices of the active features.
    pub fn support(&self) -> Vec<usize> {
        match self {
            DgpId::L1a | DgpId::C3a => vec![0, 5],
            DgpId::L1b | DgpId::L1c | DgpId::N2a | DgpId::N2b => vec![0, 10, 20, 30],
            DgpId::L1d | DgpId::N2c | DgpId::C3b | DgpId::C3c => (0..10).map(|i| 10 * i).collect(),
        }
    }

    pub fn task(&self) -> Task {
        match self {
            DgpId::C3a | DgpId::C3b | DgpId::C3c => Task::Classification,
            _ => Task::Regression,
        }
    }

    /// The correlation decay this design fixes, if any.
    pub fn fixed_c(&self) -> Option<f64> {
        match self {
            DgpId::L1a | DgpId::L1b | DgpId::C3a | DgpId::C3b => Some(0.0),
            DgpId::L1c | DgpId::C3c => Some(0.5),
            _ => None,
        }
    }
}

impl fmt::Display for DgpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DgpId {
    type Err = Error;

    /// Accepts "1a", "1.a", "L1a", "n2b", ... case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s
            .to_ascii_lowercase()
            .chars()
            .filter(|c| *c != '.')
            .collect();
        let t = t.trim_start_matches(['l', 'n', 'c']);
        DgpId::ALL
            .into_iter()
            .find(|d| d.as_str() == t)
            .ok_or_else(|| Error::invalid(format!("unknown DGP '{s}' (expected 1a..1d, 2a..2c, 3a..3c)")))
    }
}

impl Serialize for DgpId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DgpId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// Link for the Poisson design 2c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonLink {
    /// rate = max(η, 1e-6)
    #[default]
    IdentityClamped,
    /// rate = exp(η)
    Exp,
}

pub const POISSON_RATE_FLOOR: f64 = 1e-6;
/// Rows with |X_20| below this are redrawn in design 2b.
pub const INVERSE_GUARD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub id: DgpId,
    pub n: usize,
    pub p: usize,
    /// Correlation decay for designs that do not fix it.
    pub c: f64,
    pub seed: u64,
    #[serde(default)]
    pub poisson_link: PoissonLink,
}

impl DgpSpec {
    pub fn new(id: DgpId, n: usize, p: usize, seed: u64) -> Self {
        DgpSpec {
            id,
            n,
            p,
            c: 0.5,
            seed,
            poisson_link: PoissonLink::default(),
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    /// The decay actually used: fixed by the design or taken from `c`.
    pub fn effective_c(&self) -> f64 {
        self.id.fixed_c().unwrap_or(self.c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("n must be at least 2, got {}", self.n)));
        }
        let need = self.id.support().into_iter().max().unwrap_or(0) + 1;
        if self.p < need {
            return Err(Error::invalid(format!(
                "DGP {} needs p >= {need} to contain its support, got p = {}",
                self.id, self.p
            )));
        }
        let c = self.effective_c();
        if !(0.0..1.0).contains(&c) {
            return Err(Error::invalid(format!("c must lie in [0, 1), got {c}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub x: DataMatrix,
    pub y: Sample,
    pub true_support: Vec<usize>,
    pub task: Task,
}

fn ar_row(rng: &mut ChaCha20Rng, p: usize, c: f64, scale: f64) -> Vec<f64> {
    let mut row = Vec::with_capacity(p);
    let mut prev = 0.0;
    for k in 0..p {
        let z: f64 = StandardNormal.sample(rng);
        let v = if k == 0 { z } else { c * prev + scale * z };
        row.push(v);
        prev = v;
    }
    row
}

/// n rows i.i.d. N(0, Σ) with Σ_kl = c^|k−l|, via X_k = c X_{k−1} + √(1−c²) Z_k.
pub fn sample_ar_gaussian(n: usize, p: usize, c: f64, seed: u64) -> Result<DataMatrix> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::invalid(format!("c must lie in [0, 1), got {c}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = (1.0 - c * c).sqrt();
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        for (k, v) in ar_row(&mut rng, p, c, scale).into_iter().enumerate() {
            x[[i, k]] = v;
        }
    }
    DataMatrix::new(x)
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Draw one dataset. Identical specs give identical datasets.
pub fn generate(spec: &DgpSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let c = spec.effective_c();
    let scale = (1.0 - c * c).sqrt();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        let mut row = ar_row(&mut rng, p, c, scale);
        if spec.id == DgpId::N2b {
            while row[20].abs() < INVERSE_GUARD {
                row = ar_row(&mut rng, p, c, scale);
            }
        }
        for (k, v) in row.into_iter().enumerate() {
            x[[i, k]] = v;
        }
    }
    let support = spec.id.support();
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let r = x.row(i);
        let lin = |coef: &[f64]| -> f64 { support.iter().zip(coef).map(|(&k, b)| b * r[k]).sum() };
        let sum_s = || -> f64 { support.iter().map(|&k| r[k]).sum() };
        y[i] = match spec.id {
            DgpId::L1a => lin(&[4.0, 8.0]) + rng.sample::<f64, _>(StandardNormal),
            DgpId::L1b | DgpId::L1c => {
                lin(&[1.0, 2.0, 4.0, 8.0]) + rng.sample::<f64, _>(StandardNormal)
            }
            DgpId::L1d => sum_s() + rng.sample::<f64, _>(StandardNormal),
            DgpId::N2a => {
                5.0 * r[0]
                    + 2.0 * (std::f64::consts::PI * r[10] / 2.0).sin()
                    + 2.0 * r[20] * indicator(r[20] > 0.0)
                    + 2.0 * (5.0 * r[30]).exp()
                    + rng.sample::<f64, _>(StandardNormal)
            }
            DgpId::N2b => {
                3.0 * r[0]
                    + 3.0 * r[10].powi(3)
                    + 3.0 / r[20]
                    + 5.0 * indicator(r[30] > 0.0)
                    + rng.sample::<f64, _>(StandardNormal)
            }
            DgpId::N2c => {
                let eta = sum_s();
                let rate = match spec.poisson_link {
                    PoissonLink::IdentityClamped => eta.max(POISSON_RATE_FLOOR),
                    PoissonLink::Exp => eta.exp().max(POISSON_RATE_FLOOR),
                };
                let pois = Poisson::new(rate)
                    .map_err(|e| Error::NumericalFailure(format!("Poisson rate {rate}: {e}")))?;
                pois.sample(&mut rng)
            }
            DgpId::C3a => indicator((r[0] + r[5]).exp() > 1.0),
            DgpId::C3b | DgpId::C3c => indicator(sum_s().exp() > 1.0),
        };
    }
    Ok(SynthDataset {
        x: DataMatrix::new(x)?,
        y: Sample::new(y)?,
        true_support: support,
        task: spec.id.task(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn ar_design_has_geometric_correlation() {
        let x = sample_ar_gaussian(100_000, 3, 0.5, 1).unwrap();
        let cols: Vec<Vec<f64>> = (0..3).map(|k| x.view().column(k).to_vec()).collect();
        assert!((corr(&cols[0], &cols[1]) - 0.5).abs() < 0.02);
        assert!((corr(&cols[0], &cols[2]) - 0.25).abs() < 0.02);
        let x = sample_ar_gaussian(100_000, 2, 0.0, 2).unwrap();
        let (a, b) = (x.view().column(0).to_vec(), x.view().column(1).to_vec());
        assert!(corr(&a, &b).abs() < 0.02);
    }

    #[test]
    fn ids_parse_in_several_spellings() {
        for s in ["1a", "1.a", "L1A", "l1a"] {
            assert_eq!(s.parse::<DgpId>().unwrap(), DgpId::L1a);
        }
        assert_eq!("2.C".parse::<DgpId>().unwrap(), DgpId::N2c);
        assert_eq!("C3b".parse::<DgpId>().unwrap(), DgpId::C3b);
        assert!("4a".parse::<DgpId>().is_err());
    }

    #[test]
    fn supports_and_fixed_decay() {
        let d = generate(&DgpSpec::new(DgpId::L1a, 20, 10, 0).with_c(0.9)).unwrap();
        assert_eq!(d.true_support, vec![0, 5]);
        assert_eq!(DgpSpec::new(DgpId::L1a, 20, 10, 0).with_c(0.9).effective_c(), 0.0);
        assert_eq!(DgpId::L1d.support(), vec![0, 10, 20, 30, 40, 50, 60, 70, 80, 90]);
        assert!(generate(&DgpSpec::new(DgpId::L1d, 20, 50, 0)).is_err());
        assert!(generate(&DgpSpec::new(DgpId::L1d, 20, 91, 0)).is_ok());
    }

    #[test]
    fn generation_is_reproducible() {
        for id in DgpId::ALL {
            let spec = DgpSpec::new(id, 30, 100, 17);
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a, b);
            assert!(a.y.as_slice().iter().all(|v| v.is_finite()));
            if id.task() == Task::Classification {
                assert!(a.y.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
            }
        }
    }

    #[test]
    fn linear_design_recovers_coefficients() {
        let d = generate(&DgpSpec::new(DgpId::L1a, 10_000, 6, 3)).unwrap();
        let x = d.x.view();
        let y = d.y.as_slice();
        let (a, b) = (x.column(0), x.column(5));
        let g = [
            [a.dot(&a), a.dot(&b)],
            [a.dot(&b), b.dot(&b)],
        ];
        let r = [
            a.iter().zip(y).map(|(u, v)| u * v).sum::<f64>(),
            b.iter().zip(y).map(|(u, v)| u * v).sum::<f64>(),
        ];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let b0 = (g[1][1] * r[0] - g[0][1] * r[1]) / det;
        let b1 = (g[0][0] * r[1] - g[1][0] * r[0]) / det;
        assert!((b0 - 4.0).abs() < 0.1 && (b1 - 8.0).abs() < 0.1, "{b0} {b1}");
    }

    #[test]
    fn binary_design_is_balanced() {
        let d = generate(&DgpSpec::new(DgpId::C3a, 100_000, 6, 4)).unwrap();
        let freq = d.y.as_slice().iter().sum::<f64>() / 100_000.0;
        assert!((freq - 0.5).abs() < 0.01);
    }

    #[test]
    fn inverse_design_avoids_small_denominators() {
        let d = generate(&DgpSpec::new(DgpId::N2b, 5000, 31, 5)).unwrap();
        assert!(d.x.view().column(20).iter().all(|v| v.abs() >= INVERSE_GUARD));
    }

    #[test]
    fn poisson_links_differ() {
        let mut spec = DgpSpec::new(DgpId::N2c, 200, 91, 6);
        let a = generate(&spec).unwrap();
        spec.poisson_link = PoissonLink::Exp;
        let b = generate(&spec).unwrap();
        assert_eq!(a.x, b.x);
        assert_ne!(a.y, b.y);
        assert!(a.y.as_slice().iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
    }
}
