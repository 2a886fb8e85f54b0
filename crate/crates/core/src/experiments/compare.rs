use serde::Serialize;

use crate::analytic;
use crate::dtmc;
use crate::error::{Error, Result};
use crate::model::{Channel, DriftModel};
use crate::sim;

/// Which engines to run at a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Engines {
    pub analytic: bool,
    pub sim: bool,
    pub dtmc: bool,
}

impl Engines {
    pub const ALL: Engines = Engines {
        analytic: true,
        sim: true,
        dtmc: true,
    };

    /// Parse a comma-separated subset of `analytic,sim,dtmc`.
    pub fn parse(list: &str) -> std::result::Result<Self, String> {
        let mut e = Engines {
            analytic: false,
            sim: false,
            dtmc: false,
        };
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "analytic" => e.analytic = true,
                "sim" => e.sim = true,
                "dtmc" => e.dtmc = true,
                other => return Err(format!("unknown engine `{other}`")),
            }
        }
        if !(e.analytic || e.sim || e.dtmc) {
            return Err("no engines selected".into());
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompareOptions {
    /// Added to every closed-form mean. Nonzero only in negative-control
    /// runs that check the harness notices a wrong formula.
    pub analytic_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Infeasible,
    Mismatch,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Infeasible => "infeasible",
            Status::Mismatch => "mismatch",
        }
    }
}

/// One grid point evaluated by up to three engines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub model: DriftModel,
    pub p_s: f64,
    pub mean_analytic: Option<f64>,
    pub mean_sim: Option<f64>,
    pub sim_std_error: Option<f64>,
    pub mean_dtmc: Option<f64>,
    pub tv_distance: Option<f64>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Simulation tolerance for `ok` rows: three standard errors plus 1%.
pub(crate) fn sim_tolerance(mean_analytic: f64, std_error: f64) -> f64 {
    3.0 * std_error + 0.01 * mean_analytic
}

/// Oracle tolerance for `ok` rows.
pub(crate) const DTMC_TOLERANCE: f64 = 1e-6;

/// Evaluate one point. Infeasible drift parameters yield a row with
/// `status = infeasible`; other parameter errors are returned.
pub fn compare_point(
    model: &DriftModel,
    p_s: f64,
    engines: Engines,
    n_slots: u64,
    seed: u64,
    opts: &CompareOptions,
) -> Result<ComparisonRow> {
    let ch = Channel::new(p_s)?;
    let mut row = ComparisonRow {
        model: *model,
        p_s,
        mean_analytic: None,
        mean_sim: None,
        sim_std_error: None,
        mean_dtmc: None,
        tv_distance: None,
        status: Status::Ok,
        detail: None,
    };
    match model.validate() {
        Ok(()) => {}
        Err(e @ (Error::InfeasibleDrift(_) | Error::NegativeProbability { .. })) => {
            row.status = Status::Infeasible;
            row.detail = Some(e.to_string());
            return Ok(row);
        }
        Err(e) => return Err(e),
    }

    let mut problems = Vec::new();
    if engines.analytic {
        row.mean_analytic = Some(analytic::avg_aoi(model, ch)? + opts.analytic_offset);
    }
    if engines.sim {
        let stats = sim::run(model, ch, n_slots, seed)?;
        row.mean_sim = Some(stats.mean_aoi);
        row.sim_std_error = Some(stats.std_error);
        if engines.analytic {
            let pmf = analytic::aoi_pmf(model, ch)?;
            row.tv_distance = Some(sim::empirical_pmf_distance(&stats, &pmf));
        }
    }
    if engines.dtmc {
        match dtmc::solve_default(model, ch).and_then(|s| dtmc::mean_aoi(&s)) {
            Ok(est) => row.mean_dtmc = Some(est.mean),
            Err(e) => problems.push(format!("dtmc: {e}")),
        }
    }

    if let Some(a) = row.mean_analytic {
        if let (Some(s), Some(se)) = (row.mean_sim, row.sim_std_error) {
            if !((s - a).abs() <= sim_tolerance(a, se)) {
                problems.push(format!("simulation mean {s} vs analytic {a}"));
            }
        }
        if let Some(d) = row.mean_dtmc {
            if !((d - a).abs() <= DTMC_TOLERANCE) {
                problems.push(format!("chain mean {d} vs analytic {a}"));
            }
        }
    }
    if !problems.is_empty() {
        row.status = Status::Mismatch;
        row.detail = Some(problems.join("; "));
    }
    Ok(row)
}
