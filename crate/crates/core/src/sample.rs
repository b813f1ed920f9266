//! Discretely observed curves.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::basis::Domain;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureWeights};

/// One subject: observation times, values, cached quadrature weights and an
/// optional class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSample", into = "RawSample")]
pub struct FunctionalSample {
    times: Vec<f64>,
    values: Vec<f64>,
    quad: QuadratureWeights,
    label: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawSample {
    times: Vec<f64>,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u32>,
}

impl TryFrom<RawSample> for FunctionalSample {
    type Error = Error;

    fn try_from(raw: RawSample) -> Result<Self> {
        FunctionalSample::new(raw.times, raw.values, raw.label)
    }
}

impl From<FunctionalSample> for RawSample {
    fn from(s: FunctionalSample) -> Self {
        RawSample {
            times: s.times,
            values: s.values,
            label: s.label,
        }
    }
}

impl FunctionalSample {
    /// Builds a sample and freezes its trapezoid weights.
    pub fn new(times: Vec<f64>, values: Vec<f64>, label: Option<u32>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::arg("times and values differ in length"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("observed values must be finite"));
        }
        let quad = quadrature::trapezoid_weights(&times)?;
        Ok(FunctionalSample {
            times,
            values,
            quad,
            label,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn quadrature(&self) -> &QuadratureWeights {
        &self.quad
    }

    pub fn label(&self) -> Option<u32> {
        self.label
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn with_label(mut self, label: Option<u32>) -> Self {
        self.label = label;
        self
    }

    /// Same times and label, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.times.len() {
            return Err(Error::arg("replacement values differ in length"));
        }
        Ok(FunctionalSample {
            times: self.times.clone(),
            values,
            quad: self.quad.clone(),
            label: self.label,
        })
    }

    pub fn check_domain(&self, domain: Domain) -> Result<()> {
        for &t in &self.times {
            domain.check(t)?;
        }
        Ok(())
    }
}

/// Sorted union of all observation times.
pub fn union_grid(samples: &[FunctionalSample]) -> Vec<f64> {
    let mut all: Vec<f64> = samples.iter().flat_map(|s| s.times().iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Pointwise mean curve at the distinct observation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MeanCurve {
    /// Mean over every sample observed at each distinct timestamp.
    pub fn estimate(samples: &[FunctionalSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::arg("cannot estimate a mean curve from no samples"));
        }
        let mut acc: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
        for s in samples {
            for (&t, &v) in s.times().iter().zip(s.values()) {
                let e = acc.entry(order_key(t)).or_insert((t, 0.0, 0));
                e.1 += v;
                e.2 += 1;
            }
        }
        let (times, values) = acc
            .into_values()
            .map(|(t, sum, n)| (t, sum / n as f64))
            .unzip();
        Ok(MeanCurve { times, values })
    }

    fn value_at(&self, t: f64) -> Result<f64> {
        self.times
            .binary_search_by(|probe| probe.total_cmp(&t))
            .map(|i| self.values[i])
            .map_err(|_| Error::arg(alloc::format!("mean curve has no value at t = {t}")))
    }

    /// Subtracts (`sign = -1`) or adds back (`sign = 1`) the mean.
    fn shift(&self, sample: &FunctionalSample, sign: f64) -> Result<FunctionalSample> {
        let values = sample
            .times()
            .iter()
            .zip(sample.values())
            .map(|(&t, &v)| Ok(v + sign * self.value_at(t)?))
            .collect::<Result<Vec<_>>>()?;
        sample.with_values(values)
    }

    pub fn center(&self, sample: &FunctionalSample) -> Result<FunctionalSample> {
        self.shift(sample, -1.0)
    }

    pub fn uncenter(&self, sample: &FunctionalSample) -> Result<FunctionalSample> {
        self.shift(sample, 1.0)
    }
}

/// Key that orders finite floats like `total_cmp` (for map lookups).
fn order_key(t: f64) -> u64 {
    let bits = t.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Subtracts the pointwise sample mean; returns centered samples and the mean.
pub fn center_samples(samples: &[FunctionalSample]) -> Result<(Vec<FunctionalSample>, MeanCurve)> {
    let mean = MeanCurve::estimate(samples)?;
    let centered = samples.iter().map(|s| mean.center(s)).collect::<Result<Vec<_>>>()?;
    Ok((centered, mean))
}
