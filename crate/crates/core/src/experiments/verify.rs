//! Three-way verification over the standard parameter grid.

use rayon::prelude::*;
use serde::Serialize;

use super::compare::{compare_point, CompareOptions, ComparisonRow, Engines, Status};
use crate::error::Result;
use crate::model::DriftModel;
use crate::rng::derive_seed;

/// Parameter grid, crossed with every `p_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyGrid {
    pub p_s: Vec<f64>,
    pub deterministic: Vec<i64>,
    /// `(K, p)` pairs.
    pub positive: Vec<(i64, f64)>,
    /// `(p_−1, p_0, p_1)` triples.
    pub ternary: Vec<(f64, f64, f64)>,
}

/// All `(p_−1, p_0, p_1)` on the simplex with spacing `1/steps`.
pub fn ternary_simplex(steps: u32) -> Vec<(f64, f64, f64)> {
    let s = steps as f64;
    let mut out = Vec::new();
    for a in 0..=steps {
        for b in 0..=steps - a {
            let c = steps - a - b;
            out.push((a as f64 / s, b as f64 / s, c as f64 / s));
        }
    }
    out
}

impl Default for VerifyGrid {
    fn default() -> Self {
        let positive = [1i64, 2, 4]
            .iter()
            .flat_map(|&k| {
                let kf = k as f64;
                [0.1, 1.0 / (2.0 * kf), 1.0 / kf].map(|p| (k, p))
            })
            .collect();
        Self {
            p_s: vec![0.2, 0.5, 0.8],
            deterministic: vec![0, 1, 5],
            positive,
            ternary: ternary_simplex(4),
        }
    }
}

impl VerifyGrid {
    /// Grid points in report order: deterministic, positive, ternary; each
    /// parameter set crossed with `p_s` in the order given.
    pub fn points(&self) -> Vec<(DriftModel, f64)> {
        let models = self
            .deterministic
            .iter()
            .map(|&d| DriftModel::deterministic(d))
            .chain(
                self.positive
                    .iter()
                    .map(|&(k, p)| DriftModel::positive(k, p)),
            )
            .chain(
                self.ternary
                    .iter()
                    .map(|&(a, b, c)| DriftModel::ternary(a, b, c)),
            );
        models
            .flat_map(|m| self.p_s.iter().map(move |&ps| (m, ps)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerifySummary {
    pub total: usize,
    pub ok: usize,
    pub infeasible: usize,
    pub mismatch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub n_slots: u64,
    pub seed: u64,
    pub passed: bool,
    pub summary: VerifySummary,
    pub rows: Vec<ComparisonRow>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Run every engine on every grid point. Passes iff no row is a mismatch;
/// infeasible points are reported but do not fail the run.
pub fn run_verify(
    grid: &VerifyGrid,
    n_slots: u64,
    seed: u64,
    opts: &CompareOptions,
) -> Result<VerifyReport> {
    let points = grid.points();
    let rows: Vec<ComparisonRow> = points
        .par_iter()
        .enumerate()
        .map(|(n, (model, ps))| {
            compare_point(
                model,
                *ps,
                Engines::ALL,
                n_slots,
                derive_seed(seed, n as u64),
                opts,
            )
        })
        .collect::<Result<_>>()?;
    let count = |s: Status| rows.iter().filter(|r| r.status == s).count();
    let summary = VerifySummary {
        total: rows.len(),
        ok: count(Status::Ok),
        infeasible: count(Status::Infeasible),
        mismatch: count(Status::Mismatch),
    };
    Ok(VerifyReport {
        n_slots,
        seed,
        passed: summary.mismatch == 0,
        summary,
        rows,
    })
}
