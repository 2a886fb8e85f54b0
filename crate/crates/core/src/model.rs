//! Channel and clock-drift model definitions.
//!
//! A status update is generated every slot and decoded by the receiver with
//! probability `p_s`. The receiver's clock reads `t + δ(t)` in transmitter
//! slot `t`, where the drift `δ(t)` is drawn i.i.d. per slot from one of
//! three families:
//!
//! * [`FixedDrift`]: `δ(t) = d` for every slot.
//! * [`PositiveDrift`]: `δ(t) ∈ {0, …, K}` with `P[δ = k] = p` for `k ≥ 1`
//!   and `P[δ = 0] = p_0 = 1 − K·p`.
//! * [`TernaryDrift`]: `δ(t) ∈ {−1, 0, 1}` with arbitrary probabilities.
//!
//! Model structs are plain data; every operation that consumes one calls
//! [`DriftModel::validate`] first, so a model is accepted downstream exactly
//! when it validates.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Slack for feasibility checks on probabilities given as decimal literals.
pub const PROB_TOL: f64 = 1e-12;

/// Bernoulli erasure channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    p_s: f64,
}

impl Channel {
    /// `p_s` must lie in `(0, 1]`.
    pub fn new(p_s: f64) -> Result<Self> {
        if !p_s.is_finite() || p_s <= 0.0 || p_s > 1.0 {
            return Err(Error::BadParameter(format!(
                "success probability p_s = {p_s} must lie in (0, 1]"
            )));
        }
        Ok(Self { p_s })
    }

    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    pub fn p_f(&self) -> f64 {
        1.0 - self.p_s
    }
}

/// Constant drift of `d` slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedDrift {
    pub d: i64,
}

/// Drift uniform over `1..=max_drift` with per-value probability `p`, zero
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositiveDrift {
    pub max_drift: i64,
    pub p: f64,
}

/// Drift over `{−1, 0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TernaryDrift {
    pub p_minus: f64,
    pub p_zero: f64,
    pub p_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DriftModel {
    Deterministic(FixedDrift),
    Positive(PositiveDrift),
    Ternary(TernaryDrift),
}

fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::BadParameter(format!(
            "{name} = {value} is not finite"
        )))
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value < 0.0 {
        return Err(Error::NegativeProbability { name, value });
    }
    if value > 1.0 + PROB_TOL {
        return Err(Error::BadParameter(format!("{name} = {value} exceeds 1")));
    }
    Ok(())
}

impl FixedDrift {
    pub fn new(d: i64) -> Result<Self> {
        let m = Self { d };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 0 {
            return Err(Error::BadParameter(format!(
                "deterministic drift d = {} must be nonnegative",
                self.d
            )));
        }
        Ok(())
    }
}

impl PositiveDrift {
    pub fn new(max_drift: i64, p: f64) -> Result<Self> {
        let m = Self { max_drift, p };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_drift < 1 {
            return Err(Error::BadParameter(format!(
                "maximum drift K = {} must be at least 1",
                self.max_drift
            )));
        }
        check_finite("p", self.p)?;
        if self.p < 0.0 {
            return Err(Error::NegativeProbability {
                name: "p",
                value: self.p,
            });
        }
        let p0 = 1.0 - self.max_drift as f64 * self.p;
        if p0 < -PROB_TOL {
            return Err(Error::InfeasibleDrift(format!(
                "p_0 = 1 - Kp < 0 (K = {}, p = {}, p_0 = {})",
                self.max_drift, self.p, p0
            )));
        }
        Ok(())
    }

    /// `P[δ = 0] = 1 − K·p`, clamped at zero inside the feasibility slack.
    pub fn p_zero(&self) -> f64 {
        (1.0 - self.max_drift as f64 * self.p).max(0.0)
    }
}

impl TernaryDrift {
    pub fn new(p_minus: f64, p_zero: f64, p_plus: f64) -> Result<Self> {
        let m = Self {
            p_minus,
            p_zero,
            p_plus,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_minus", self.p_minus)?;
        check_probability("p_0", self.p_zero)?;
        check_probability("p_1", self.p_plus)?;
        let sum = self.p_minus + self.p_zero + self.p_plus;
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InfeasibleDrift(format!(
                "p_minus + p_0 + p_1 = {sum} != 1"
            )));
        }
        Ok(())
    }
}

impl From<FixedDrift> for DriftModel {
    fn from(m: FixedDrift) -> Self {
        DriftModel::Deterministic(m)
    }
}

impl From<PositiveDrift> for DriftModel {
    fn from(m: PositiveDrift) -> Self {
        DriftModel::Positive(m)
    }
}

impl From<TernaryDrift> for DriftModel {
    fn from(m: TernaryDrift) -> Self {
        DriftModel::Ternary(m)
    }
}

impl DriftModel {
    pub fn deterministic(d: i64) -> Self {
        FixedDrift { d }.into()
    }

    pub fn positive(max_drift: i64, p: f64) -> Self {
        PositiveDrift { max_drift, p }.into()
    }

    pub fn ternary(p_minus: f64, p_zero: f64, p_plus: f64) -> Self {
        TernaryDrift {
            p_minus,
            p_zero,
            p_plus,
        }
        .into()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DriftModel::Deterministic(m) => m.validate(),
            DriftModel::Positive(m) => m.validate(),
            DriftModel::Ternary(m) => m.validate(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            DriftModel::Deterministic(_) => "deterministic",
            DriftModel::Positive(_) => "positive",
            DriftModel::Ternary(_) => "ternary",
        }
    }

    /// Exact per-slot distribution of the drift.
    pub fn drift_pmf(&self) -> Result<DriftPmf> {
        self.validate()?;
        let entries = match *self {
            DriftModel::Deterministic(FixedDrift { d }) => vec![(d, 1.0)],
            DriftModel::Positive(m) => std::iter::once((0, m.p_zero()))
                .chain((1..=m.max_drift).map(|k| (k, m.p)))
                .collect(),
            DriftModel::Ternary(m) => vec![(-1, m.p_minus), (0, m.p_zero), (1, m.p_plus)],
        };
        Ok(DriftPmf { entries })
    }

    /// `E[δ]` in slots.
    pub fn mean_drift(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            DriftModel::Deterministic(FixedDrift { d }) => d as f64,
            DriftModel::Positive(m) => {
                let k = m.max_drift as f64;
                m.p * k * (k + 1.0) / 2.0
            }
            DriftModel::Ternary(m) => m.p_plus - m.p_minus,
        })
    }

    /// One draw of `δ(t)`.
    pub fn sample_drift(&self, rng: &mut RngStream) -> Result<i64> {
        Ok(self.sampler()?.sample(rng))
    }

    pub fn sampler(&self) -> Result<DriftSampler> {
        Ok(DriftSampler::new(&self.drift_pmf()?))
    }

    /// Smallest and largest drift values the model can produce.
    pub fn drift_range(&self) -> (i64, i64) {
        match *self {
            DriftModel::Deterministic(FixedDrift { d }) => (d, d),
            DriftModel::Positive(m) => (0, m.max_drift),
            DriftModel::Ternary(_) => (-1, 1),
        }
    }

    /// Drift value the receiver starts from in slot 1: zero offset when the
    /// model allows it, the constant offset otherwise.
    pub fn initial_drift(&self) -> i64 {
        match *self {
            DriftModel::Deterministic(FixedDrift { d }) => d,
            _ => 0,
        }
    }
}

impl fmt::Display for DriftModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftModel::Deterministic(m) => write!(f, "deterministic(d={})", m.d),
            DriftModel::Positive(m) => write!(f, "positive(K={}, p={})", m.max_drift, m.p),
            DriftModel::Ternary(m) => write!(
                f,
                "ternary(p_-1={}, p_0={}, p_1={})",
                m.p_minus, m.p_zero, m.p_plus
            ),
        }
    }
}

/// Drift distribution as `(k, P[δ = k])` pairs in ascending `k`.
///
/// Zero-probability values inside the model's range are kept, so the entry
/// list doubles as the drift support used by the Markov-chain builder.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPmf {
    entries: Vec<(i64, f64)>,
}

impl DriftPmf {
    pub fn entries(&self) -> &[(i64, f64)] {
        &self.entries
    }

    pub fn prob(&self, k: i64) -> f64 {
        self.entries
            .iter()
            .find(|(v, _)| *v == k)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.entries.iter().map(|(k, _)| *k)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn to_map(&self) -> BTreeMap<i64, f64> {
        self.entries.iter().copied().collect()
    }
}

/// Inverse-CDF sampler over a [`DriftPmf`], categories in ascending order.
#[derive(Debug, Clone)]
pub struct DriftSampler {
    values: Vec<i64>,
    cumulative: Vec<f64>,
    fallback: i64,
}

impl DriftSampler {
    pub fn new(pmf: &DriftPmf) -> Self {
        let mut acc = 0.0;
        let mut values = Vec::with_capacity(pmf.entries.len());
        let mut cumulative = Vec::with_capacity(pmf.entries.len());
        for &(k, p) in &pmf.entries {
            acc += p;
            values.push(k);
            cumulative.push(acc);
        }
        // Rounding can leave the last cumulative value a hair under 1.
        let fallback = pmf
            .entries
            .iter()
            .rev()
            .find(|(_, p)| *p > 0.0)
            .map_or(values[values.len() - 1], |(k, _)| *k);
        Self {
            values,
            cumulative,
            fallback,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> i64 {
        if self.values.len() == 1 {
            // Point masses still consume a draw so streams stay aligned
            // across model families.
            rng.next_u64();
            return self.values[0];
        }
        let u = rng.uniform();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .map_or(self.fallback, |i| self.values[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_bounds() {
        assert!(Channel::new(0.0).is_err());
        assert!(Channel::new(-0.1).is_err());
        assert!(Channel::new(1.1).is_err());
        assert!(Channel::new(f64::NAN).is_err());
        let ch = Channel::new(1.0).unwrap();
        assert_eq!(ch.p_f(), 0.0);
        let ch = Channel::new(0.3).unwrap();
        assert_eq!(ch.p_f(), 1.0 - 0.3);
    }

    #[test]
    fn validate_examples() {
        assert!(DriftModel::positive(1, 1.0).validate().is_ok());
        assert!(matches!(
            DriftModel::positive(4, 0.8).validate(),
            Err(Error::InfeasibleDrift(_))
        ));
        assert!(DriftModel::ternary(0.2, 0.5, 0.3).validate().is_ok());
    }

    #[test]
    fn validate_error_kinds() {
        assert!(matches!(
            DriftModel::deterministic(-1).validate(),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            DriftModel::positive(0, 0.1).validate(),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            DriftModel::positive(2, -0.1).validate(),
            Err(Error::NegativeProbability { name: "p", .. })
        ));
        assert!(matches!(
            DriftModel::ternary(-0.1, 0.6, 0.5).validate(),
            Err(Error::NegativeProbability { .. })
        ));
        assert!(matches!(
            DriftModel::ternary(0.2, 0.2, 0.2).validate(),
            Err(Error::InfeasibleDrift(_))
        ));
        assert!(matches!(
            DriftModel::positive(2, f64::NAN).validate(),
            Err(Error::BadParameter(_))
        ));
    }

    #[test]
    fn infeasible_message_names_constraint() {
        let msg = DriftModel::positive(4, 0.8)
            .validate()
            .unwrap_err()
            .to_string();
        assert!(msg.starts_with("infeasible: p_0 = 1 - Kp < 0"), "{msg}");
        assert!(msg.contains("-2.2"), "{msg}");
    }

    #[test]
    fn feasibility_slack_absorbs_decimal_rounding() {
        // 3 * (1/3) rounds slightly away from 1.
        assert!(DriftModel::positive(3, 1.0 / 3.0).validate().is_ok());
        assert!(DriftModel::ternary(0.1, 0.2, 0.7).validate().is_ok());
        let m = PositiveDrift::new(3, 1.0 / 3.0).unwrap();
        assert!(m.p_zero() >= 0.0);
    }

    #[test]
    fn drift_pmf_examples() {
        let pmf = DriftModel::deterministic(3).drift_pmf().unwrap();
        assert_eq!(pmf.entries(), &[(3, 1.0)]);

        let pmf = DriftModel::positive(2, 0.3).drift_pmf().unwrap();
        let map = pmf.to_map();
        assert!((map[&0] - 0.4).abs() < 1e-15);
        assert_eq!(map[&1], 0.3);
        assert_eq!(map[&2], 0.3);

        let pmf = DriftModel::ternary(0.2, 0.5, 0.3).drift_pmf().unwrap();
        assert_eq!(pmf.entries(), &[(-1, 0.2), (0, 0.5), (1, 0.3)]);
    }

    #[test]
    fn drift_pmf_rejects_invalid() {
        assert!(DriftModel::positive(4, 0.8).drift_pmf().is_err());
        assert!(DriftModel::positive(4, 0.8).mean_drift().is_err());
        assert!(DriftModel::positive(4, 0.8).sampler().is_err());
    }

    #[test]
    fn mean_drift_examples() {
        assert_eq!(DriftModel::deterministic(5).mean_drift().unwrap(), 5.0);
        let m = DriftModel::positive(4, 0.1).mean_drift().unwrap();
        assert!((m - 1.0).abs() < 1e-15);
        let m = DriftModel::ternary(0.2, 0.5, 0.3).mean_drift().unwrap();
        assert!((m - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sample_point_masses() {
        let mut rng = RngStream::new(9);
        let det = DriftModel::deterministic(2);
        assert!((0..100).all(|_| det.sample_drift(&mut rng).unwrap() == 2));
        let neg = DriftModel::ternary(1.0, 0.0, 0.0);
        assert!((0..10_000).all(|_| neg.sample_drift(&mut rng).unwrap() == -1));
        let top = DriftModel::ternary(0.0, 0.0, 1.0);
        assert!((0..10_000).all(|_| top.sample_drift(&mut rng).unwrap() == 1));
    }

    #[test]
    fn sampler_never_returns_zero_probability_values() {
        let m = DriftModel::positive(3, 0.0);
        let s = m.sampler().unwrap();
        let mut rng = RngStream::new(11);
        assert!((0..10_000).all(|_| s.sample(&mut rng) == 0));

        let m = DriftModel::positive(2, 0.5);
        let s = m.sampler().unwrap();
        assert!((0..10_000).all(|_| s.sample(&mut rng) != 0));
    }

    #[test]
    fn zero_frequency_over_a_million_draws() {
        let s = DriftModel::positive(2, 0.3).sampler().unwrap();
        let mut rng = RngStream::new(1);
        let n = 1_000_000;
        let zeros = (0..n).filter(|_| s.sample(&mut rng) == 0).count();
        let freq = zeros as f64 / n as f64;
        let sigma = (0.4f64 * 0.6 / n as f64).sqrt();
        assert!((freq - 0.4).abs() <= 3.0 * sigma, "freq {freq}");
    }
}
