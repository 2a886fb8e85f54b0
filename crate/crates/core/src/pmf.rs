//! Age-of-information distributions over `i ≥ 1`.
//!
//! Closed-form pmfs keep their formula next to an enumerated prefix. Every
//! closed form used here is eventually geometric, `prob(i) = a·p_fⁱ⁻ˢ` for
//! `i ≥ s`, so masses and first moments beyond the prefix are summed exactly
//! instead of by truncation.

/// Mass threshold used to pick the default truncation index.
pub const TRUNCATION_EPS: f64 = 1e-12;
/// Hard cap on enumerated AoI values.
pub const MAX_TRUNCATION: usize = 10_000;

/// Smallest `i` with `p_fⁱ < 1e-12`, capped at [`MAX_TRUNCATION`].
pub fn default_truncation(p_f: f64) -> usize {
    let mut i = 1;
    let mut v = p_f;
    while v >= TRUNCATION_EPS && i < MAX_TRUNCATION {
        i += 1;
        v *= p_f;
    }
    i
}

/// `p_fⁿ` with the convention `0⁰ = 1`.
pub(crate) fn pf_pow(p_f: f64, n: u64) -> f64 {
    if n == 0 {
        1.0
    } else {
        p_f.powi(n.min(i32::MAX as u64) as i32)
    }
}

/// Geometric tail `prob(i) = amplitude · p_f^(i − start)` for `i ≥ start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GeometricTail {
    pub start: u64,
    pub amplitude: f64,
    pub p_s: f64,
}

impl GeometricTail {
    fn p_f(&self) -> f64 {
        1.0 - self.p_s
    }

    /// `Σ_{i > m} prob(i)`, valid for `m ≥ start − 1`.
    pub fn mass_after(&self, m: u64) -> f64 {
        debug_assert!(m + 1 >= self.start);
        self.amplitude * pf_pow(self.p_f(), m + 1 - self.start) / self.p_s
    }

    /// `Σ_{i > m} i·prob(i)`, valid for `m ≥ start − 1`.
    pub fn moment_after(&self, m: u64) -> f64 {
        debug_assert!(m + 1 >= self.start);
        let head = self.amplitude * pf_pow(self.p_f(), m + 1 - self.start);
        head * ((m + 1) as f64 / self.p_s + self.p_f() / (self.p_s * self.p_s))
    }
}

/// Formula behind a closed-form pmf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ClosedForm {
    Deterministic {
        d: u64,
        p_s: f64,
    },
    Positive {
        max_drift: u64,
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

impl ClosedForm {
    pub fn prob(&self, i: u64) -> f64 {
        if i == 0 {
            return 0.0;
        }
        match *self {
            ClosedForm::Deterministic { d, p_s } => {
                if i <= d {
                    0.0
                } else {
                    p_s * pf_pow(1.0 - p_s, i - d - 1)
                }
            }
            ClosedForm::Positive {
                max_drift,
                p,
                p_zero,
                p_s,
            } => {
                let p_f = 1.0 - p_s;
                let m = max_drift.min(i - 1);
                p_zero * p_s * pf_pow(p_f, i - 1)
                    + p * (1.0 - pf_pow(p_f, m)) * pf_pow(p_f, i - 1 - m)
            }
            ClosedForm::Ternary {
                p_minus,
                p_zero,
                p_plus,
                p_s,
            } => {
                let p_f = 1.0 - p_s;
                let f = 1.0 - p_s * (1.0 - p_minus);
                match i {
                    1 => p_zero * p_s + p_minus * p_s * (1.0 + p_f * (1.0 - p_minus)),
                    2 => {
                        p_minus * p_s * p_f * f
                            + p_zero * p_s * p_f * (1.0 - p_minus)
                            + p_plus * p_s
                    }
                    3 => {
                        (p_minus * p_s * p_f * p_f + p_zero * p_s * p_f) * f
                            + p_plus * p_s * p_f * (1.0 - p_minus)
                    }
                    _ => {
                        (p_minus * p_s * pf_pow(p_f, i - 1)
                            + p_zero * p_s * pf_pow(p_f, i - 2)
                            + p_plus * p_s * pf_pow(p_f, i - 3))
                            * f
                    }
                }
            }
        }
    }

    pub fn tail(&self) -> GeometricTail {
        match *self {
            ClosedForm::Deterministic { d, p_s } => GeometricTail {
                start: d + 1,
                amplitude: p_s,
                p_s,
            },
            ClosedForm::Positive { max_drift, p_s, .. } => GeometricTail {
                start: max_drift + 1,
                amplitude: self.prob(max_drift + 1),
                p_s,
            },
            ClosedForm::Ternary { p_s, .. } => GeometricTail {
                start: 4,
                amplitude: self.prob(4),
                p_s,
            },
        }
    }
}

/// Distribution of the AoI over `i = 1, 2, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiPmf {
    form: Option<ClosedForm>,
    /// `prefix[i - 1] = prob(i)` for `i ≤ i_max`.
    prefix: Vec<f64>,
    residual: f64,
}

impl AoiPmf {
    pub(crate) fn closed(form: ClosedForm, i_max: usize) -> Self {
        let i_max = i_max.max(form.tail().start as usize);
        let prefix = (1..=i_max as u64).map(|i| form.prob(i)).collect();
        let residual = form.tail().mass_after(i_max as u64);
        Self {
            form: Some(form),
            prefix,
            residual,
        }
    }

    /// Tabulated pmf with `prefix[i - 1] = prob(i)` and an unresolved tail
    /// mass `residual` beyond the table.
    pub fn from_table(prefix: Vec<f64>, residual: f64) -> Self {
        Self {
            form: None,
            prefix,
            residual,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        self.form.is_some()
    }

    pub fn i_max(&self) -> usize {
        self.prefix.len()
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    /// Mass beyond `i_max`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `P[Δ = i]`. Tabulated pmfs return zero past their table.
    pub fn prob(&self, i: u64) -> f64 {
        match (&self.form, i) {
            (_, 0) => 0.0,
            (Some(form), _) => form.prob(i),
            (None, _) => self.prefix.get(i as usize - 1).copied().unwrap_or(0.0),
        }
    }

    /// `Σ_{i > m} P[Δ = i]`.
    pub fn mass_beyond(&self, m: u64) -> f64 {
        match &self.form {
            Some(form) => {
                let tail = form.tail();
                let explicit: f64 = (m + 1..tail.start).map(|i| form.prob(i)).sum();
                explicit + tail.mass_after(m.max(tail.start - 1))
            }
            None => {
                let from = (m as usize).min(self.prefix.len());
                self.prefix[from..].iter().sum::<f64>() + self.residual
            }
        }
    }

    /// Prefix mass plus residual.
    pub fn total_mass(&self) -> f64 {
        self.prefix.iter().sum::<f64>() + self.residual
    }

    /// `Σ i·P[Δ = i]`. Closed forms add their tail moment exactly;
    /// tabulated pmfs count only the table.
    pub fn mean(&self) -> f64 {
        let head: f64 = self
            .prefix
            .iter()
            .enumerate()
            .map(|(n, p)| (n + 1) as f64 * p)
            .sum();
        match &self.form {
            Some(form) => head + form.tail().moment_after(self.prefix.len() as u64),
            None => head,
        }
    }
}
