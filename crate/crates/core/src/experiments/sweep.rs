//! Figure sweeps: average AoI over `K` for several `p`, and the largest
//! tolerable drift probability over `K` for several AoI thresholds.

use rayon::prelude::*;
use serde::Serialize;

use super::compare::{compare_point, CompareOptions, ComparisonRow, Engines, Status};
use super::format::{fmt_num, fmt_opt};
use crate::analytic;
use crate::error::Result;
use crate::model::{Channel, DriftModel, PositiveDrift};
use crate::rng::derive_seed;
use crate::sim;

#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Spec {
    pub k_values: Vec<i64>,
    pub p_values: Vec<f64>,
    pub p_s: f64,
    pub n_slots: u64,
    pub seed: u64,
    pub engines: Engines,
}

/// One row per `(p, K)`, ordered by `p` then `K`. Row `n` simulates with
/// seed `seed ^ n`.
pub fn sweep_fig3(spec: &Fig3Spec) -> Result<Vec<ComparisonRow>> {
    Channel::new(spec.p_s)?;
    let mut ps = spec.p_values.clone();
    ps.sort_by(f64::total_cmp);
    let mut ks = spec.k_values.clone();
    ks.sort_unstable();
    let grid: Vec<DriftModel> = ps
        .iter()
        .flat_map(|&p| ks.iter().map(move |&k| DriftModel::positive(k, p)))
        .collect();
    grid.par_iter()
        .enumerate()
        .map(|(n, model)| {
            compare_point(
                model,
                spec.p_s,
                spec.engines,
                spec.n_slots,
                derive_seed(spec.seed, n as u64),
                &CompareOptions::default(),
            )
        })
        .collect()
}

pub fn fig3_csv(rows: &[ComparisonRow]) -> String {
    let mut out =
        String::from("K,p,ps,mean_analytic,mean_sim,sim_std_error,mean_dtmc,tv_distance,status\n");
    for r in rows {
        let DriftModel::Positive(PositiveDrift { max_drift, p }) = r.model else {
            continue;
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            max_drift,
            fmt_num(p),
            fmt_num(r.p_s),
            fmt_opt(r.mean_analytic),
            fmt_opt(r.mean_sim),
            fmt_opt(r.sim_std_error),
            fmt_opt(r.mean_dtmc),
            fmt_opt(r.tv_distance),
            r.status.as_str(),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig4Spec {
    pub k_values: Vec<i64>,
    pub thresholds: Vec<f64>,
    pub p_s: f64,
    /// Also simulate at `p = p_max` and check the mean stays under the
    /// threshold.
    pub simulate: bool,
    pub n_slots: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4Row {
    pub max_drift: i64,
    pub threshold: f64,
    pub p_s: f64,
    pub p_max: f64,
    /// Closed-form average AoI at `p = p_max`.
    pub mean_analytic: f64,
    pub mean_sim: Option<f64>,
    pub sim_std_error: Option<f64>,
    pub status: Status,
}

/// One row per `(threshold, K)`, ordered by threshold then `K`.
pub fn sweep_fig4(spec: &Fig4Spec) -> Result<Vec<Fig4Row>> {
    let ch = Channel::new(spec.p_s)?;
    let mut ths = spec.thresholds.clone();
    ths.sort_by(f64::total_cmp);
    let mut ks = spec.k_values.clone();
    ks.sort_unstable();
    let grid: Vec<(f64, i64)> = ths
        .iter()
        .flat_map(|&th| ks.iter().map(move |&k| (th, k)))
        .collect();
    grid.par_iter()
        .enumerate()
        .map(|(n, &(threshold, k))| {
            let p_max = analytic::p_max(k, ch, threshold)?;
            let model = PositiveDrift {
                max_drift: k,
                p: p_max,
            };
            let mean_analytic = analytic::avg_aoi_positive(&model, ch)?;
            let mut row = Fig4Row {
                max_drift: k,
                threshold,
                p_s: spec.p_s,
                p_max,
                mean_analytic,
                mean_sim: None,
                sim_std_error: None,
                status: Status::Ok,
            };
            if spec.simulate {
                let seed = derive_seed(spec.seed, n as u64);
                let stats = sim::run(&model.into(), ch, spec.n_slots, seed)?;
                row.mean_sim = Some(stats.mean_aoi);
                row.sim_std_error = Some(stats.std_error);
                if !(stats.mean_aoi <= threshold + 3.0 * stats.std_error) {
                    row.status = Status::Mismatch;
                }
            }
            Ok(row)
        })
        .collect()
}

pub fn fig4_csv(rows: &[Fig4Row]) -> String {
    let mut out = String::from("K,th,ps,p_max,mean_analytic,mean_sim,sim_std_error,status\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.max_drift,
            fmt_num(r.threshold),
            fmt_num(r.p_s),
            fmt_num(r.p_max),
            fmt_num(r.mean_analytic),
            fmt_opt(r.mean_sim),
            fmt_opt(r.sim_std_error),
            r.status.as_str(),
        ));
    }
    out
}
