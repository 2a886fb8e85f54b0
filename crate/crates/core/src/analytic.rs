//! Closed-form AoI statistics for the three drift families.
//!
//! All results are stationary quantities of the joint chain `(δ(t), Δ(t))`.
//! The ternary family carries one entry, `π(−1, 1)`, whose value is pinned by
//! normalization of the `k = −1` row rather than by the plain reset
//! probability; [`JointStationary::reset_entry`] reports both candidates.

use crate::error::{Error, Result};
use crate::model::{Channel, DriftModel, FixedDrift, PositiveDrift, TernaryDrift};
use crate::pmf::{default_truncation, pf_pow, AoiPmf, ClosedForm, GeometricTail};

/// Average AoI under a constant drift of `d` slots: `d + 1/p_s`.
pub fn avg_aoi_deterministic(d: i64, ch: Channel) -> Result<f64> {
    FixedDrift { d }.validate()?;
    Ok(d as f64 + 1.0 / ch.p_s())
}

/// `P[Δ = i] = p_s·p_f^(i−d−1)` for `i > d`, zero below.
pub fn aoi_pmf_deterministic(d: i64, ch: Channel) -> Result<AoiPmf> {
    FixedDrift { d }.validate()?;
    let form = ClosedForm::Deterministic {
        d: d as u64,
        p_s: ch.p_s(),
    };
    Ok(AoiPmf::closed(form, default_truncation(ch.p_f())))
}

/// Average AoI under positive categorical drift:
/// `(2 + K(K+1)·p·p_s) / (2·p_s)`.
pub fn avg_aoi_positive(model: &PositiveDrift, ch: Channel) -> Result<f64> {
    model.validate()?;
    let k = model.max_drift as f64;
    let p_s = ch.p_s();
    Ok((2.0 + k * (k + 1.0) * model.p * p_s) / (2.0 * p_s))
}

pub fn aoi_pmf_positive(model: &PositiveDrift, ch: Channel) -> Result<AoiPmf> {
    model.validate()?;
    let form = ClosedForm::Positive {
        max_drift: model.max_drift as u64,
        p: model.p,
        p_zero: model.p_zero(),
        p_s: ch.p_s(),
    };
    Ok(AoiPmf::closed(form, default_truncation(ch.p_f())))
}

/// Largest per-value drift probability `p` keeping the positive-drift
/// average AoI at or below `aoi_threshold`:
/// `max{0, min{1/K, 2(p_s·Δ_TH − 1) / (K(K+1)·p_s)}}`.
pub fn p_max(max_drift: i64, ch: Channel, aoi_threshold: f64) -> Result<f64> {
    if max_drift < 1 {
        return Err(Error::BadParameter(format!(
            "maximum drift K = {max_drift} must be at least 1"
        )));
    }
    if !aoi_threshold.is_finite() || aoi_threshold <= 0.0 {
        return Err(Error::BadParameter(format!(
            "AoI threshold {aoi_threshold} must be positive"
        )));
    }
    let k = max_drift as f64;
    let p_s = ch.p_s();
    let budget = 2.0 * (p_s * aoi_threshold - 1.0) / (k * (k + 1.0) * p_s);
    Ok(budget.min(1.0 / k).max(0.0))
}

/// Average AoI under ternary drift: `p_1 + 1/p_s`.
pub fn avg_aoi_ternary(model: &TernaryDrift, ch: Channel) -> Result<f64> {
    model.validate()?;
    Ok(model.p_plus + 1.0 / ch.p_s())
}

pub fn aoi_pmf_ternary(model: &TernaryDrift, ch: Channel) -> Result<AoiPmf> {
    model.validate()?;
    let form = ClosedForm::Ternary {
        p_minus: model.p_minus,
        p_zero: model.p_zero,
        p_plus: model.p_plus,
        p_s: ch.p_s(),
    };
    Ok(AoiPmf::closed(form, default_truncation(ch.p_f())))
}

/// Average AoI for any model.
pub fn avg_aoi(model: &DriftModel, ch: Channel) -> Result<f64> {
    match model {
        DriftModel::Deterministic(m) => avg_aoi_deterministic(m.d, ch),
        DriftModel::Positive(m) => avg_aoi_positive(m, ch),
        DriftModel::Ternary(m) => avg_aoi_ternary(m, ch),
    }
}

/// AoI pmf for any model.
pub fn aoi_pmf(model: &DriftModel, ch: Channel) -> Result<AoiPmf> {
    match model {
        DriftModel::Deterministic(m) => aoi_pmf_deterministic(m.d, ch),
        DriftModel::Positive(m) => aoi_pmf_positive(m, ch),
        DriftModel::Ternary(m) => aoi_pmf_ternary(m, ch),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum JointForm {
    Positive {
        max_drift: i64,
        p: f64,
        p_zero: f64,
        p_s: f64,
    },
    Ternary {
        p_minus: f64,
        p_zero: f64,
        p_plus: f64,
        p_s: f64,
    },
}

/// The two candidate values of the ternary `π(−1, 1)` entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResetEntryDiagnostic {
    /// `p_−1·p_s·(1 + p_f(1 − p_−1))`, the value used. It makes the `k = −1`
    /// row sum to `p_−1` and agrees with the numerical chain solution.
    pub normalized: f64,
    /// `p_−1·p_s`, the success-only reset mass. It misses the failure
    /// branch that also lands on `(−1, 1)` from `(k, k + 1)` states.
    pub success_only: f64,
}

/// Stationary joint distribution `π(k, i)` of drift and AoI.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStationary {
    form: JointForm,
    i_max: usize,
}

impl JointStationary {
    pub fn drift_support(&self) -> Vec<i64> {
        match self.form {
            JointForm::Positive { max_drift, .. } => (0..=max_drift).collect(),
            JointForm::Ternary { .. } => vec![-1, 0, 1],
        }
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    /// `π(k, i)` from the closed form; zero outside the support.
    pub fn pi(&self, k: i64, i: u64) -> f64 {
        if i == 0 {
            return 0.0;
        }
        match self.form {
            JointForm::Positive {
                max_drift,
                p,
                p_zero,
                p_s,
            } => {
                let p_f = 1.0 - p_s;
                if k == 0 {
                    p_zero * p_s * pf_pow(p_f, i - 1)
                } else if k >= 1 && k <= max_drift && (k as u64) < i {
                    p * p_s * pf_pow(p_f, i - k as u64 - 1)
                } else {
                    0.0
                }
            }
            JointForm::Ternary {
                p_minus,
                p_zero,
                p_plus,
                p_s,
            } => {
                let p_f = 1.0 - p_s;
                let f = 1.0 - p_s * (1.0 - p_minus);
                match k {
                    -1 if i == 1 => p_minus * p_s * (1.0 + p_f * (1.0 - p_minus)),
                    -1 => p_minus * p_s * pf_pow(p_f, i - 1) * f,
                    0 | 1 => {
                        let pk = if k == 0 { p_zero } else { p_plus };
                        let base = k as u64 + 1;
                        if i < base {
                            0.0
                        } else if i == base {
                            pk * p_s
                        } else if i == base + 1 {
                            pk * p_s * p_f * (1.0 - p_minus)
                        } else {
                            pk * p_s * pf_pow(p_f, i - 2 - k as u64) * f
                        }
                    }
                    _ => 0.0,
                }
            }
        }
    }

    /// Geometric tail of row `k`, if the row is in the support.
    fn row_tail(&self, k: i64) -> Option<GeometricTail> {
        let (start, p_s) = match self.form {
            JointForm::Positive { max_drift, p_s, .. } if (0..=max_drift).contains(&k) => {
                (k as u64 + 1, p_s)
            }
            JointForm::Ternary { p_s, .. } if k == -1 => (2, p_s),
            JointForm::Ternary { p_s, .. } if k == 0 || k == 1 => (k as u64 + 3, p_s),
            _ => return None,
        };
        Some(GeometricTail {
            start,
            amplitude: self.pi(k, start),
            p_s,
        })
    }

    /// `Σ_i π(k, i)` over all `i ≥ 1`, tail summed in closed form.
    pub fn row_mass(&self, k: i64) -> f64 {
        let Some(tail) = self.row_tail(k) else {
            return 0.0;
        };
        let head: f64 = (1..tail.start).map(|i| self.pi(k, i)).sum();
        head + tail.mass_after(tail.start - 1)
    }

    /// Mass of row `k` beyond `i_max`.
    pub fn row_residual(&self, k: i64) -> f64 {
        match self.row_tail(k) {
            Some(tail) => {
                let m = self.i_max as u64;
                let explicit: f64 = (m + 1..tail.start).map(|i| self.pi(k, i)).sum();
                explicit + tail.mass_after(m.max(tail.start - 1))
            }
            None => 0.0,
        }
    }

    /// Mass of the whole table beyond `i_max`.
    pub fn residual(&self) -> f64 {
        self.drift_support()
            .into_iter()
            .map(|k| self.row_residual(k))
            .sum()
    }

    /// `Σ_k π(k, i)`.
    pub fn marginal(&self, i: u64) -> f64 {
        self.drift_support()
            .into_iter()
            .map(|k| self.pi(k, i))
            .sum()
    }

    /// Both readings of `π(−1, 1)`; `None` outside the ternary family.
    pub fn reset_entry(&self) -> Option<ResetEntryDiagnostic> {
        match self.form {
            JointForm::Ternary { p_minus, p_s, .. } => Some(ResetEntryDiagnostic {
                normalized: self.pi(-1, 1),
                success_only: p_minus * p_s,
            }),
            JointForm::Positive { .. } => None,
        }
    }
}

/// `π(0, i) = p_0·p_s·p_f^(i−1)`, `π(k, i) = p·p_s·p_f^(i−k−1)` for
/// `1 ≤ k ≤ min{K, i−1}`.
pub fn joint_stationary_positive(model: &PositiveDrift, ch: Channel) -> Result<JointStationary> {
    model.validate()?;
    let form = JointForm::Positive {
        max_drift: model.max_drift,
        p: model.p,
        p_zero: model.p_zero(),
        p_s: ch.p_s(),
    };
    let i_max = default_truncation(ch.p_f()).max(model.max_drift as usize + 1);
    Ok(JointStationary { form, i_max })
}

pub fn joint_stationary_ternary(model: &TernaryDrift, ch: Channel) -> Result<JointStationary> {
    model.validate()?;
    let form = JointForm::Ternary {
        p_minus: model.p_minus,
        p_zero: model.p_zero,
        p_plus: model.p_plus,
        p_s: ch.p_s(),
    };
    let i_max = default_truncation(ch.p_f()).max(4);
    Ok(JointStationary { form, i_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ch(p_s: f64) -> Channel {
        Channel::new(p_s).unwrap()
    }

    fn positive(k: i64, p: f64) -> PositiveDrift {
        PositiveDrift::new(k, p).unwrap()
    }

    fn ternary(a: f64, b: f64, c: f64) -> TernaryDrift {
        TernaryDrift::new(a, b, c).unwrap()
    }

    #[test]
    fn deterministic_mean_examples() {
        assert_eq!(avg_aoi_deterministic(0, ch(0.5)).unwrap(), 2.0);
        assert_eq!(avg_aoi_deterministic(3, ch(0.5)).unwrap(), 5.0);
        assert_eq!(avg_aoi_deterministic(2, ch(0.25)).unwrap(), 6.0);
        assert!(avg_aoi_deterministic(-1, ch(0.5)).is_err());
    }

    #[test]
    fn deterministic_pmf_examples() {
        let pmf = aoi_pmf_deterministic(2, ch(0.5)).unwrap();
        assert_eq!(pmf.prob(1), 0.0);
        assert_eq!(pmf.prob(2), 0.0);
        assert_eq!(pmf.prob(3), 0.5);
        assert_eq!(pmf.prob(4), 0.25);

        let pmf = aoi_pmf_deterministic(0, ch(1.0)).unwrap();
        assert_eq!(pmf.prob(1), 1.0);
        assert!((2..50).all(|i| pmf.prob(i) == 0.0));
        assert_eq!(pmf.residual(), 0.0);

        let pmf = aoi_pmf_deterministic(1, ch(0.3)).unwrap();
        assert_abs_diff_eq!(pmf.mean(), 1.0 + 1.0 / 0.3, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_residual_is_tail_mass() {
        let pmf = aoi_pmf_deterministic(1, ch(0.5)).unwrap();
        let m = pmf.i_max() as i32;
        // Σ_{i > m} 0.5 · 0.5^(i-2) = 0.5^(m-1)
        assert_abs_diff_eq!(pmf.residual(), 0.5f64.powi(m - 1), epsilon = 1e-24);
    }

    #[test]
    fn joint_positive_examples() {
        let j = joint_stationary_positive(&positive(1, 0.2), ch(0.5)).unwrap();
        assert_abs_diff_eq!(j.pi(0, 1), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(j.pi(0, 2), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(j.pi(1, 2), 0.1, epsilon = 1e-15);
        assert_eq!(j.pi(1, 1), 0.0);
        assert!(j.reset_entry().is_none());

        let j = joint_stationary_positive(&positive(3, 0.0), ch(0.5)).unwrap();
        for k in 1..=3 {
            assert!((1..60).all(|i| j.pi(k, i) == 0.0));
        }
    }

    #[test]
    fn joint_positive_rows_match_drift_pmf() {
        let m = positive(4, 0.15);
        let j = joint_stationary_positive(&m, ch(0.35)).unwrap();
        assert_abs_diff_eq!(j.row_mass(0), m.p_zero(), epsilon = 1e-12);
        for k in 1..=4 {
            assert_abs_diff_eq!(j.row_mass(k), 0.15, epsilon = 1e-12);
        }
        assert_eq!(j.row_mass(5), 0.0);
    }

    #[test]
    fn positive_pmf_examples() {
        let pmf = aoi_pmf_positive(&positive(1, 0.2), ch(0.5)).unwrap();
        assert_abs_diff_eq!(pmf.prob(1), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(pmf.prob(2), 0.3, epsilon = 1e-15);

        let pmf = aoi_pmf_positive(&positive(2, 0.0), ch(0.5)).unwrap();
        for i in 1..40 {
            assert_abs_diff_eq!(pmf.prob(i), 0.5f64.powi(i as i32), epsilon = 1e-16);
        }

        let pmf = aoi_pmf_positive(&positive(5, 0.1), ch(0.4)).unwrap();
        assert_abs_diff_eq!(pmf.total_mass(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn positive_mean_examples() {
        assert_eq!(avg_aoi_positive(&positive(1, 1.0), ch(0.5)).unwrap(), 3.0);
        assert_abs_diff_eq!(
            avg_aoi_positive(&positive(4, 0.1), ch(0.5)).unwrap(),
            3.0,
            epsilon = 1e-15
        );
        for k in 1..6 {
            assert_eq!(
                avg_aoi_positive(&positive(k, 0.0), ch(0.4)).unwrap(),
                1.0 / 0.4
            );
        }
        let bad = PositiveDrift {
            max_drift: 4,
            p: 0.8,
        };
        assert!(matches!(
            avg_aoi_positive(&bad, ch(0.5)),
            Err(Error::InfeasibleDrift(_))
        ));
    }

    #[test]
    fn p_max_examples() {
        assert_abs_diff_eq!(p_max(2, ch(0.5), 3.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(p_max(1, ch(0.5), 3.0).unwrap(), 1.0);
        assert_eq!(p_max(3, ch(0.5), 1.5).unwrap(), 0.0);
        assert!(p_max(0, ch(0.5), 3.0).is_err());
        assert!(p_max(2, ch(0.5), 0.0).is_err());
    }

    #[test]
    fn p_max_hits_threshold_exactly() {
        let p = p_max(2, ch(0.5), 3.0).unwrap();
        let mean = avg_aoi_positive(&positive(2, p), ch(0.5)).unwrap();
        assert_abs_diff_eq!(mean, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn joint_ternary_examples() {
        let j = joint_stationary_ternary(&ternary(0.2, 0.5, 0.3), ch(0.5)).unwrap();
        assert_abs_diff_eq!(j.pi(0, 1), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(j.pi(1, 2), 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(j.pi(-1, 1), 0.14, epsilon = 1e-15);
        assert_eq!(j.pi(1, 1), 0.0);
        let diag = j.reset_entry().unwrap();
        assert_abs_diff_eq!(diag.normalized, 0.14, epsilon = 1e-15);
        assert_abs_diff_eq!(diag.success_only, 0.10, epsilon = 1e-15);
    }

    #[test]
    fn joint_ternary_rows_normalize() {
        let m = ternary(0.2, 0.5, 0.3);
        let j = joint_stationary_ternary(&m, ch(0.5)).unwrap();
        assert_abs_diff_eq!(j.row_mass(-1), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(j.row_mass(0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(j.row_mass(1), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn joint_ternary_reduces_to_positive() {
        let t = joint_stationary_ternary(&ternary(0.0, 0.7, 0.3), ch(0.5)).unwrap();
        let p = joint_stationary_positive(&positive(1, 0.3), ch(0.5)).unwrap();
        for k in 0..=1 {
            for i in 1..60 {
                assert_abs_diff_eq!(t.pi(k, i), p.pi(k, i), epsilon = 1e-15);
            }
        }
        assert!((1..60).all(|i| t.pi(-1, i) == 0.0));
    }

    #[test]
    fn joint_ternary_drift_free() {
        let t = joint_stationary_ternary(&ternary(0.0, 1.0, 0.0), ch(0.4)).unwrap();
        for i in 1..60u64 {
            assert_abs_diff_eq!(t.pi(0, i), 0.4 * 0.6f64.powi(i as i32 - 1), epsilon = 1e-15);
            assert_eq!(t.pi(-1, i), 0.0);
            assert_eq!(t.pi(1, i), 0.0);
        }
    }

    #[test]
    fn ternary_pmf_examples() {
        let m = ternary(0.2, 0.5, 0.3);
        let pmf = aoi_pmf_ternary(&m, ch(0.5)).unwrap();
        assert_abs_diff_eq!(pmf.prob(1), 0.39, epsilon = 1e-15);
        assert_abs_diff_eq!(pmf.mean(), 2.3, epsilon = 1e-9);
        assert_abs_diff_eq!(pmf.total_mass(), 1.0, epsilon = 1e-10);

        let pmf = aoi_pmf_ternary(&ternary(0.0, 1.0, 0.0), ch(0.5)).unwrap();
        for i in 1..40 {
            assert_abs_diff_eq!(pmf.prob(i), 0.5f64.powi(i as i32), epsilon = 1e-16);
        }
    }

    #[test]
    fn ternary_mean_examples() {
        assert_abs_diff_eq!(
            avg_aoi_ternary(&ternary(0.2, 0.5, 0.3), ch(0.5)).unwrap(),
            2.3,
            epsilon = 1e-15
        );
        assert_eq!(
            avg_aoi_ternary(&ternary(0.5, 0.25, 0.25), ch(0.8)).unwrap(),
            1.5
        );
        assert_eq!(
            avg_aoi_ternary(&ternary(0.0, 1.0, 0.0), ch(0.5)).unwrap(),
            2.0
        );
    }

    #[test]
    fn perfect_channel_edge() {
        let j = joint_stationary_ternary(&ternary(0.2, 0.5, 0.3), ch(1.0)).unwrap();
        assert_abs_diff_eq!(j.pi(-1, 1), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(j.pi(1, 2), 0.3, epsilon = 1e-15);
        assert_eq!(j.pi(1, 3), 0.0);
        let pmf = aoi_pmf_positive(&positive(2, 0.3), ch(1.0)).unwrap();
        assert_abs_diff_eq!(pmf.prob(1), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(pmf.prob(3), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(pmf.total_mass(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pmf.mean(), 1.0 + 0.9, epsilon = 1e-15);
    }

    #[test]
    fn dispatch_matches_family_functions() {
        let c = ch(0.5);
        assert_eq!(avg_aoi(&DriftModel::deterministic(3), c).unwrap(), 5.0);
        assert_eq!(avg_aoi(&DriftModel::positive(1, 1.0), c).unwrap(), 3.0);
        assert!(aoi_pmf(&DriftModel::positive(4, 0.8), c).is_err());
    }
}
