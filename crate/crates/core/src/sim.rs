//! Slot-level Monte Carlo simulator.
//!
//! Each slot the drift `δ(t)` is drawn first, then the channel outcome
//! `h(t)`. The age is tracked twice:
//!
//! * by the recursion on `(δ(t−1), Δ(t−1))`;
//! * from clock readings: the receiver reads `t + δ(t)`, and on every
//!   delivery the generation stamp of the freshest update is recorded so
//!   that `Δ = max{1, rx_time − gen_time + 1}`.
//!
//! The two views must agree in every slot; a disagreement is reported as
//! [`Error::ViewMismatch`].
//!
//! Slot 1 starts from `Δ(1) = 1` with the receiver synchronized (drift 0,
//! or `d` for constant drift); the transient is kept in the statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Channel, DriftModel, DriftSampler};
use crate::pmf::AoiPmf;
use crate::rng::RngStream;

/// Largest age counted individually in [`RunStats::empirical_pmf`].
pub const HISTOGRAM_CAP: usize = 10_000;
pub const BATCHES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlotRecord {
    /// Transmitter slot index, starting at 1.
    pub t: u64,
    pub h: bool,
    pub delta: i64,
    pub aoi_recursion: u64,
    pub aoi_timestamp: u64,
    /// Receiver clock reading, `t + delta`.
    pub rx_time: i64,
    /// Generation stamp of the freshest delivered update.
    pub gen_time: i64,
}

/// Running state shared by the free-running simulator and trace replay.
#[derive(Debug, Clone)]
struct AgeTracker {
    t: u64,
    delta: i64,
    aoi: u64,
    gen_time: i64,
}

impl AgeTracker {
    fn start(delta: i64, aoi: u64, h: bool) -> (Self, SlotRecord) {
        let rx_time = 1 + delta;
        let gen_time = rx_time + 1 - aoi as i64;
        let tracker = Self {
            t: 1,
            delta,
            aoi,
            gen_time,
        };
        let record = SlotRecord {
            t: 1,
            h,
            delta,
            aoi_recursion: aoi,
            aoi_timestamp: aoi,
            rx_time,
            gen_time,
        };
        (tracker, record)
    }

    fn step(&mut self, delta: i64, h: bool) -> Result<SlotRecord> {
        self.t += 1;
        let rx_time = self.t as i64 + delta;
        let recursion = if h {
            (delta + 1).max(1)
        } else {
            (self.aoi as i64 + delta - self.delta + 1).max(1)
        } as u64;
        if h {
            self.gen_time = rx_time + 1 - recursion as i64;
        }
        let timestamp = (rx_time - self.gen_time + 1).max(1) as u64;
        if timestamp != recursion {
            return Err(Error::ViewMismatch {
                t: self.t,
                recursion,
                timestamp,
            });
        }
        self.delta = delta;
        self.aoi = recursion;
        Ok(SlotRecord {
            t: self.t,
            h,
            delta,
            aoi_recursion: recursion,
            aoi_timestamp: timestamp,
            rx_time,
            gen_time: self.gen_time,
        })
    }
}

/// Drive `n_slots` seeded slots, handing each record to `observe`.
fn drive(
    model: &DriftModel,
    ch: Channel,
    n_slots: u64,
    seed: u64,
    mut observe: impl FnMut(&SlotRecord),
) -> Result<()> {
    model.validate()?;
    if n_slots == 0 {
        return Err(Error::BadParameter("n_slots must be at least 1".into()));
    }
    let sampler: DriftSampler = model.sampler()?;
    let mut rng = RngStream::new(seed);
    let (mut tracker, first) = AgeTracker::start(model.initial_drift(), 1, true);
    observe(&first);
    for _ in 1..n_slots {
        let delta = sampler.sample(&mut rng);
        let h = rng.bernoulli(ch.p_s());
        let rec = tracker.step(delta, h)?;
        observe(&rec);
    }
    Ok(())
}

/// Monte Carlo output of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub n_slots: u64,
    pub mean_aoi: f64,
    /// `empirical_pmf[i - 1]` is the fraction of slots with age `i`, for
    /// `i ≤ HISTOGRAM_CAP`.
    pub empirical_pmf: Vec<f64>,
    /// Fraction of slots with age above `HISTOGRAM_CAP`.
    pub overflow: f64,
    /// Batch-means standard error of `mean_aoi`; NaN for a single slot.
    pub std_error: f64,
    pub seed: u64,
}

impl RunStats {
    pub fn frequency(&self, i: u64) -> f64 {
        match i {
            0 => 0.0,
            _ => self
                .empirical_pmf
                .get(i as usize - 1)
                .copied()
                .unwrap_or(0.0),
        }
    }
}

/// Simulate `n_slots` slots and summarize.
pub fn run(model: &DriftModel, ch: Channel, n_slots: u64, seed: u64) -> Result<RunStats> {
    let batches = (BATCHES as u64).min(n_slots);
    let batch_len = n_slots / batches.max(1);
    let mut batch_sums = vec![0u64; batches as usize];
    let mut counts: Vec<u64> = Vec::new();
    let mut overflow = 0u64;
    let mut total = 0u64;

    drive(model, ch, n_slots, seed, |rec| {
        let aoi = rec.aoi_recursion;
        total += aoi;
        let b = (rec.t - 1) / batch_len;
        if b < batches {
            batch_sums[b as usize] += aoi;
        }
        if aoi as usize <= HISTOGRAM_CAP {
            let idx = aoi as usize - 1;
            if counts.len() <= idx {
                counts.resize(idx + 1, 0);
            }
            counts[idx] += 1;
        } else {
            overflow += 1;
        }
    })?;

    let n = n_slots as f64;
    let std_error = if batches < 2 {
        f64::NAN
    } else {
        let means: Vec<f64> = batch_sums
            .iter()
            .map(|&s| s as f64 / batch_len as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    };

    Ok(RunStats {
        n_slots,
        mean_aoi: total as f64 / n,
        empirical_pmf: counts.iter().map(|&c| c as f64 / n).collect(),
        overflow: overflow as f64 / n,
        std_error,
        seed,
    })
}

/// Every slot of a seeded run, for invariant checks on short runs.
pub fn simulate_records(
    model: &DriftModel,
    ch: Channel,
    n_slots: u64,
    seed: u64,
) -> Result<Vec<SlotRecord>> {
    let mut out = Vec::with_capacity(n_slots as usize);
    drive(model, ch, n_slots, seed, |rec| out.push(*rec))?;
    Ok(out)
}

/// Explicit per-slot channel outcomes and drifts.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSchedule {
    pub h: Vec<bool>,
    pub delta: Vec<i64>,
}

impl TraceSchedule {
    pub fn new(h: Vec<bool>, delta: Vec<i64>) -> Self {
        Self { h, delta }
    }
}

/// Replay of a [`TraceSchedule`], plus the drift-free age on the same
/// channel outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<SlotRecord>,
    pub aoi_nodrift: Vec<u64>,
}

impl Trace {
    pub fn aoi(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.aoi_recursion).collect()
    }

    /// CSV with columns `t,h,delta,aoi,aoi_nodrift`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,h,delta,aoi,aoi_nodrift\n");
        for (r, free) in self.records.iter().zip(&self.aoi_nodrift) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t, r.h as u8, r.delta, r.aoi_recursion, free
            ));
        }
        out
    }
}

/// Replay `schedule` from `Δ(1) = aoi_init`.
///
/// Slot 1 takes its drift from the schedule and its age from `aoi_init`.
/// `aoi_init` must be at least `max(1, δ(1) − min drift)`, so the first
/// failure cannot drive the age below 1.
pub fn run_trace(model: &DriftModel, schedule: &TraceSchedule, aoi_init: u64) -> Result<Trace> {
    model.validate()?;
    if schedule.h.len() != schedule.delta.len() {
        return Err(Error::BadSchedule(format!(
            "{} channel outcomes but {} drift values",
            schedule.h.len(),
            schedule.delta.len()
        )));
    }
    if schedule.h.is_empty() {
        return Err(Error::BadSchedule("empty schedule".into()));
    }
    let support: Vec<i64> = model.drift_pmf()?.support().collect();
    if let Some(bad) = schedule.delta.iter().find(|d| !support.contains(d)) {
        return Err(Error::BadSchedule(format!("drift {bad} outside {model}")));
    }
    let (lo, _) = model.drift_range();
    let floor = (schedule.delta[0] - lo).max(1) as u64;
    if aoi_init < floor {
        return Err(Error::BadSchedule(format!(
            "initial age {aoi_init} below {floor} for initial drift {}",
            schedule.delta[0]
        )));
    }

    let (mut tracker, first) = AgeTracker::start(schedule.delta[0], aoi_init, schedule.h[0]);
    let mut records = vec![first];
    let mut aoi_nodrift = vec![aoi_init];
    for (&h, &delta) in schedule.h.iter().zip(&schedule.delta).skip(1) {
        records.push(tracker.step(delta, h)?);
        let prev = *aoi_nodrift.last().unwrap();
        aoi_nodrift.push(if h { 1 } else { prev + 1 });
    }
    Ok(Trace {
        records,
        aoi_nodrift,
    })
}

/// The six-slot ternary walkthrough: failures at slots 2–4 with drifts
/// 1, −1, 0, then deliveries with drifts 1 and 0.
pub fn reference_trace_schedule() -> TraceSchedule {
    TraceSchedule::new(
        vec![true, false, false, false, true, true],
        vec![0, 1, -1, 0, 1, 0],
    )
}

/// Total-variation distance between the run's empirical age distribution and
/// `pmf`, over the union of their supports (tails included).
pub fn empirical_pmf_distance(stats: &RunStats, pmf: &AoiPmf) -> f64 {
    let m = stats.empirical_pmf.len().max(pmf.i_max()) as u64;
    let body: f64 = (1..=m)
        .map(|i| (stats.frequency(i) - pmf.prob(i)).abs())
        .sum();
    0.5 * (body + pmf.mass_beyond(m) + stats.overflow)
}
