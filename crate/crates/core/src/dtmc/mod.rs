//! Numerical oracle: the truncated joint chain over `(δ, Δ)`.
//!
//! Transitions are generated straight from the age recursions,
//!
//! ```text
//! success:  Δ(t) = max{1, δ(t) + 1}
//! failure:  Δ(t) = max{1, Δ(t−1) + δ(t) − δ(t−1) + 1}
//! ```
//!
//! (the constant-drift family is the special case `δ ≡ d`), so nothing here
//! depends on the closed forms it is used to check. Ages above `i_max` are
//! folded into the `i_max` bucket, which keeps every row stochastic.

mod tables;

pub use tables::{compare_with_tables, table_prob, TableMismatch, TableReading};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Channel, DriftModel};
use crate::pmf::{default_truncation, AoiPmf, MAX_TRUNCATION};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Largest truncation bias on the mean that [`mean_aoi`] accepts.
pub const MEAN_RESIDUAL_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct JointState {
    pub drift: i64,
    pub aoi: u64,
}

impl JointState {
    pub fn new(drift: i64, aoi: u64) -> Self {
        Self { drift, aoi }
    }
}

/// Lowest age reachable together with drift `k` after the first slot.
fn min_aoi(k: i64) -> u64 {
    (k + 1).max(1) as u64
}

/// Default truncation index for the chain of `model`: the geometric tail
/// length of the channel shifted past the largest drift.
pub fn default_chain_truncation(model: &DriftModel, ch: Channel) -> usize {
    let (_, hi) = model.drift_range();
    let required = min_aoi(hi) as usize + 2;
    (default_truncation(ch.p_f()) + required)
        .min(MAX_TRUNCATION)
        .max(required)
}

#[derive(Debug, Clone)]
struct Block {
    drift: i64,
    first_aoi: u64,
    offset: usize,
}

/// Sparse row-stochastic matrix over enumerated joint states, ordered by
/// drift ascending, then age ascending.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    states: Vec<JointState>,
    blocks: Vec<Block>,
    rows: Vec<Vec<(usize, f64)>>,
    i_max: usize,
    p_s: f64,
    drift_span: i64,
}

impl TransitionMatrix {
    pub fn states(&self) -> &[JointState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    pub fn index_of(&self, s: JointState) -> Option<usize> {
        let b = self.blocks.iter().find(|b| b.drift == s.drift)?;
        if s.aoi < b.first_aoi || s.aoi > self.i_max as u64 {
            return None;
        }
        Some(b.offset + (s.aoi - b.first_aoi) as usize)
    }

    /// Nonzero entries of row `from` as `(column, probability)`.
    pub fn row(&self, from: usize) -> &[(usize, f64)] {
        &self.rows[from]
    }

    pub fn prob(&self, from: JointState, to: JointState) -> f64 {
        let (Some(r), Some(c)) = (self.index_of(from), self.index_of(to)) else {
            return 0.0;
        };
        self.rows[r]
            .iter()
            .find(|(col, _)| *col == c)
            .map_or(0.0, |(_, w)| *w)
    }

    pub fn row_sum(&self, from: usize) -> f64 {
        self.rows[from].iter().map(|(_, w)| w).sum()
    }

    /// `x·P`.
    fn left_multiply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, row) in self.rows.iter().enumerate() {
            let mass = x[r];
            if mass == 0.0 {
                continue;
            }
            for &(c, w) in row {
                out[c] += mass * w;
            }
        }
    }

    /// `‖x·P − x‖_∞`.
    pub fn balance_residual(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.left_multiply(x, &mut y);
        y.iter()
            .zip(x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Build the truncated chain for `model` over ages `1..=i_max`.
pub fn build_chain(model: &DriftModel, ch: Channel, i_max: usize) -> Result<TransitionMatrix> {
    let pmf = model.drift_pmf()?;
    let (lo, hi) = model.drift_range();
    let required = min_aoi(hi) as usize + 2;
    if i_max < required {
        return Err(Error::TruncationTooSmall { i_max, required });
    }

    let mut blocks = Vec::new();
    let mut states = Vec::new();
    for k in pmf.support() {
        let first_aoi = min_aoi(k);
        blocks.push(Block {
            drift: k,
            first_aoi,
            offset: states.len(),
        });
        states.extend((first_aoi..=i_max as u64).map(|i| JointState::new(k, i)));
    }

    let mut matrix = TransitionMatrix {
        states,
        blocks,
        rows: Vec::new(),
        i_max,
        p_s: ch.p_s(),
        drift_span: hi - lo,
    };

    let top = i_max as i64;
    let mut rows = Vec::with_capacity(matrix.states.len());
    for from in &matrix.states {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * pmf.entries().len());
        for &(next, p_next) in pmf.entries() {
            if p_next == 0.0 {
                continue;
            }
            let on_success = (next + 1).max(1);
            let on_failure = (from.aoi as i64 + next - from.drift + 1).clamp(1, top);
            for (aoi, w) in [
                (on_success, p_next * ch.p_s()),
                (on_failure, p_next * ch.p_f()),
            ] {
                if w == 0.0 {
                    continue;
                }
                let to = JointState::new(next, aoi as u64);
                let col = matrix.index_of(to).ok_or_else(|| {
                    Error::BadParameter(format!(
                        "transition {from:?} -> {to:?} leaves the state space"
                    ))
                })?;
                match row.iter_mut().find(|(c, _)| *c == col) {
                    Some(entry) => entry.1 += w,
                    None => row.push((col, w)),
                }
            }
        }
        let total: f64 = row.iter().map(|(_, w)| w).sum();
        row.iter_mut().for_each(|(_, w)| *w /= total);
        row.sort_by_key(|(c, _)| *c);
        rows.push(row);
    }
    matrix.rows = rows;
    Ok(matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    PowerIteration,
    Direct,
}

/// Stationary vector of a [`TransitionMatrix`].
#[derive(Debug, Clone)]
pub struct StationarySolution {
    states: Vec<JointState>,
    pi: Vec<f64>,
    i_max: usize,
    p_s: f64,
    drift_span: i64,
    pub solver: Solver,
    pub iterations: usize,
    /// `‖π·P − π‖_∞` at the returned vector.
    pub convergence_error: f64,
}

impl StationarySolution {
    pub fn states(&self) -> &[JointState] {
        &self.states
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.pi
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    /// `π(k, i)`; zero for states outside the enumeration.
    pub fn pi(&self, drift: i64, aoi: u64) -> f64 {
        self.states
            .binary_search(&JointState::new(drift, aoi))
            .map_or(0.0, |n| self.pi[n])
    }

    /// Mass collected in the `i_max` bucket, which stands in for all ages
    /// `≥ i_max`.
    pub fn tail_mass(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.pi)
            .filter(|(s, _)| s.aoi == self.i_max as u64)
            .map(|(_, p)| p)
            .sum()
    }

    /// `(k, i, π)` rows in state order.
    pub fn rows(&self) -> impl Iterator<Item = (i64, u64, f64)> + '_ {
        self.states
            .iter()
            .zip(&self.pi)
            .map(|(s, p)| (s.drift, s.aoi, *p))
    }
}

fn finish(
    matrix: &TransitionMatrix,
    mut pi: Vec<f64>,
    solver: Solver,
    iterations: usize,
) -> StationarySolution {
    pi.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    let convergence_error = matrix.balance_residual(&pi);
    StationarySolution {
        states: matrix.states.clone(),
        pi,
        i_max: matrix.i_max,
        p_s: matrix.p_s,
        drift_span: matrix.drift_span,
        solver,
        iterations,
        convergence_error,
    }
}

/// Power iteration from the uniform vector until `‖π·P − π‖_∞ ≤ tol`.
pub fn stationary(
    matrix: &TransitionMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<StationarySolution> {
    let n = matrix.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut err = f64::INFINITY;
    for iter in 1..=max_iter {
        matrix.left_multiply(&pi, &mut next);
        // `err` is the balance residual of `pi` itself, so `pi` is what
        // gets returned once it is small enough.
        err = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err <= tol {
            return Ok(finish(matrix, pi, Solver::PowerIteration, iter));
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        std::mem::swap(&mut pi, &mut next);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: err,
    })
}

/// Dense LU solve of `(Pᵀ − I)·x = 0` with the last equation replaced by
/// `Σ x = 1`.
pub fn stationary_direct(matrix: &TransitionMatrix) -> Result<StationarySolution> {
    let n = matrix.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (r, row) in matrix.rows.iter().enumerate() {
        for &(c, w) in row {
            a[(c, r)] += w;
        }
    }
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(Error::NoConvergence {
        iterations: 0,
        residual: f64::NAN,
    })?;
    Ok(finish(
        matrix,
        x.iter().copied().collect(),
        Solver::Direct,
        0,
    ))
}

/// `P[Δ = i] = Σ_k π(k, i)` over `1..=i_max`; the last entry holds the
/// folded tail.
pub fn aoi_marginal(sol: &StationarySolution) -> AoiPmf {
    let mut prefix = vec![0.0; sol.i_max];
    for (s, p) in sol.states.iter().zip(&sol.pi) {
        prefix[s.aoi as usize - 1] += p;
    }
    let total: f64 = prefix.iter().sum();
    prefix.iter_mut().for_each(|v| *v /= total);
    AoiPmf::from_table(prefix, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Upper bound on the mean's truncation bias from the folded tail.
    pub residual_bound: f64,
}

/// Mean AoI of the truncated solution with a bound on what truncation
/// dropped.
///
/// Past `i_max` the age grows by one per failed slot, plus a drift change
/// that telescopes to at most the drift span, until the next success, so
/// each unit of bucket mass sits on average at most `1/p_s + span` above
/// `i_max`.
pub fn mean_aoi(sol: &StationarySolution) -> Result<MeanEstimate> {
    let mean = aoi_marginal(sol).mean();
    let residual_bound = sol.tail_mass() * (1.0 / sol.p_s + sol.drift_span as f64);
    if residual_bound > MEAN_RESIDUAL_LIMIT {
        let p_f = 1.0 - sol.p_s;
        let extra = ((residual_bound / MEAN_RESIDUAL_LIMIT).ln() / -p_f.ln()).ceil() as usize + 1;
        return Err(Error::TruncationTooSmall {
            i_max: sol.i_max,
            required: sol.i_max + extra,
        });
    }
    Ok(MeanEstimate {
        mean,
        residual_bound,
    })
}

/// Build with the default truncation and solve by power iteration.
pub fn solve_default(model: &DriftModel, ch: Channel) -> Result<StationarySolution> {
    let chain = build_chain(model, ch, default_chain_truncation(model, ch))?;
    stationary(&chain, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ch(p_s: f64) -> Channel {
        Channel::new(p_s).unwrap()
    }

    #[test]
    fn drift_free_chain_resets_half_the_time() {
        let m = build_chain(&DriftModel::deterministic(0), ch(0.5), 50).unwrap();
        assert_eq!(m.len(), 50);
        for i in 1..=50 {
            let p = m.prob(JointState::new(0, i), JointState::new(0, 1));
            assert_eq!(p, 0.5, "from age {i}");
        }
        // top bucket folds onto itself
        assert_eq!(m.prob(JointState::new(0, 50), JointState::new(0, 50)), 0.5);
    }

    #[test]
    fn positive_chain_row_from_origin() {
        let m = build_chain(&DriftModel::positive(1, 0.2), ch(0.5), 20).unwrap();
        let from = JointState::new(0, 1);
        assert_abs_diff_eq!(m.prob(from, JointState::new(1, 2)), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(m.prob(from, JointState::new(1, 3)), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(m.prob(from, JointState::new(0, 1)), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(m.prob(from, JointState::new(0, 2)), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(m.row_sum(m.index_of(from).unwrap()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rows_are_stochastic() {
        let models = [
            DriftModel::deterministic(3),
            DriftModel::positive(4, 0.1),
            DriftModel::positive(2, 0.5),
            DriftModel::ternary(0.25, 0.25, 0.5),
        ];
        for model in models {
            for p_s in [0.2, 0.5, 1.0] {
                let m = build_chain(&model, ch(p_s), 30).unwrap();
                for r in 0..m.len() {
                    assert_abs_diff_eq!(m.row_sum(r), 1.0, epsilon = 1e-12);
                    assert!(m.row(r).iter().all(|(_, w)| *w >= 0.0));
                }
            }
        }
    }

    #[test]
    fn truncation_floor() {
        let err = build_chain(&DriftModel::positive(4, 0.1), ch(0.5), 6).unwrap_err();
        assert_eq!(
            err,
            Error::TruncationTooSmall {
                i_max: 6,
                required: 7
            }
        );
        assert!(build_chain(&DriftModel::ternary(0.2, 0.5, 0.3), ch(0.5), 3).is_err());
        assert!(build_chain(&DriftModel::ternary(0.2, 0.5, 0.3), ch(0.5), 4).is_ok());
        assert!(build_chain(&DriftModel::deterministic(2), ch(0.5), 4).is_err());
        assert!(build_chain(&DriftModel::positive(4, 0.8), ch(0.5), 50).is_err());
    }

    #[test]
    fn state_order_is_drift_then_age() {
        let m = build_chain(&DriftModel::ternary(0.2, 0.5, 0.3), ch(0.5), 6).unwrap();
        let mut sorted = m.states().to_vec();
        sorted.sort();
        assert_eq!(sorted, m.states());
        assert_eq!(m.states()[0], JointState::new(-1, 1));
        assert_eq!(m.index_of(JointState::new(1, 1)), None);
    }

    #[test]
    fn drift_free_stationary_is_geometric() {
        let m = build_chain(&DriftModel::deterministic(0), ch(0.5), 60).unwrap();
        let sol = stationary(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for i in 1..60u64 {
            assert_abs_diff_eq!(sol.pi(0, i), 0.5f64.powi(i as i32), epsilon = 1e-11);
        }
    }

    #[test]
    fn positive_stationary_matches_known_entries() {
        let sol = solve_default(&DriftModel::positive(1, 0.2), ch(0.5)).unwrap();
        assert_abs_diff_eq!(sol.pi(0, 1), 0.4, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.pi(1, 2), 0.1, epsilon = 1e-8);
        let pmf = aoi_marginal(&sol);
        assert_abs_diff_eq!(pmf.prob(2), 0.3, epsilon = 1e-8);
    }

    #[test]
    fn ternary_reset_entry() {
        let sol = solve_default(&DriftModel::ternary(0.2, 0.5, 0.3), ch(0.5)).unwrap();
        assert_abs_diff_eq!(sol.pi(-1, 1), 0.14, epsilon = 1e-8);
    }

    #[test]
    fn marginal_zero_below_constant_drift() {
        let sol = solve_default(&DriftModel::deterministic(2), ch(0.5)).unwrap();
        let pmf = aoi_marginal(&sol);
        assert_abs_diff_eq!(pmf.prob(1), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(pmf.prob(2), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(pmf.total_mass(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn mean_examples() {
        let cases = [
            (DriftModel::positive(4, 0.1), 3.0),
            (DriftModel::ternary(0.2, 0.5, 0.3), 2.3),
            (DriftModel::deterministic(3), 5.0),
        ];
        for (model, want) in cases {
            let sol = solve_default(&model, ch(0.5)).unwrap();
            let est = mean_aoi(&sol).unwrap();
            assert_abs_diff_eq!(est.mean, want, epsilon = 1e-8);
            assert!(est.residual_bound <= MEAN_RESIDUAL_LIMIT);
        }
    }

    #[test]
    fn mean_rejects_short_truncation() {
        let m = build_chain(&DriftModel::deterministic(0), ch(0.2), 10).unwrap();
        let sol = stationary(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        match mean_aoi(&sol) {
            Err(Error::TruncationTooSmall {
                i_max: 10,
                required,
            }) => assert!(required > 10),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn power_and_direct_agree() {
        let model = DriftModel::positive(2, 0.3);
        let chain = build_chain(&model, ch(0.5), 48).unwrap();
        let a = stationary(&chain, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let b = stationary_direct(&chain).unwrap();
        for (x, y) in a.probabilities().iter().zip(b.probabilities()) {
            assert!((x - y).abs() <= 1e-10);
        }
        assert!(b.convergence_error <= 1e-12);
        assert_abs_diff_eq!(b.probabilities().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn no_convergence_reported() {
        let chain = build_chain(&DriftModel::deterministic(0), ch(0.1), 200).unwrap();
        match stationary(&chain, 1e-15, 3) {
            Err(Error::NoConvergence { iterations: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_truncation_covers_drift() {
        let model = DriftModel::positive(4, 0.1);
        assert_eq!(default_chain_truncation(&model, ch(0.5)), 40 + 7);
        let model = DriftModel::deterministic(0);
        assert_eq!(default_chain_truncation(&model, ch(1.0)), 4);
    }
}
