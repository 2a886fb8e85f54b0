//! Transition probabilities written as piecewise case tables, the way they
//! are usually stated by hand, and a checker that compares them entry by
//! entry with the chain generated from the recursions.
//!
//! Cases are read top to bottom and the first matching case wins. Notation
//! follows the tables: the chain moves from `(i, j)` (drift, age) to
//! `(m, n)`.
//!
//! Two readings are provided. [`TableReading::AsPrinted`] takes the case
//! conditions literally. [`TableReading::Repaired`] fixes the conditions
//! that cannot be right given the recursions:
//!
//! * positive drift, first case: `m = 0, i = 1` becomes `m = 0, n = 1`
//!   (a success with zero drift resets the age to 1 from any state);
//! * ternary drift, the `p_0·p_s` case gains `m = 0` and the final `p_1·p_f`
//!   case gains `m = 1`.

use serde::Serialize;

use super::{JointState, TransitionMatrix};
use crate::error::{Error, Result};
use crate::model::{Channel, DriftModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableReading {
    AsPrinted,
    Repaired,
}

/// One transition where the table and the generated chain disagree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableMismatch {
    pub from: JointState,
    pub to: JointState,
    pub table: f64,
    pub generated: f64,
    /// 1-based index of the table case that fired, if any.
    pub case: Option<usize>,
}

/// Table probability and the 1-based case that produced it.
pub fn table_prob(
    model: &DriftModel,
    ch: Channel,
    from: JointState,
    to: JointState,
    reading: TableReading,
) -> Result<(f64, Option<usize>)> {
    model.validate()?;
    let (i, j) = (from.drift, from.aoi as i64);
    let (m, n) = (to.drift, to.aoi as i64);
    let (p_s, p_f) = (ch.p_s(), ch.p_f());
    let repaired = reading == TableReading::Repaired;

    let cases: Vec<(bool, f64)> = match model {
        DriftModel::Positive(pm) => {
            let (p, p0) = (pm.p, pm.p_zero());
            vec![
                (m == 0 && if repaired { n == 1 } else { i == 1 }, p0 * p_s),
                (m != 0 && n == m + 1, p * p_s),
                (m == 0 && n == j + 1 - i, p0 * p_f),
                (m != 0 && n == j + 1 + m - i, p * p_f),
            ]
        }
        DriftModel::Ternary(t) => {
            let (pm1, p0, p1) = (t.p_minus, t.p_zero, t.p_plus);
            vec![
                (m == -1 && n == 1 && j == i + 1, pm1),
                (m == -1 && n == 1 && j >= i + 2, pm1 * p_s),
                (m == -1 && n == j - i, pm1 * p_f),
                (n == 1 && (!repaired || m == 0), p0 * p_s),
                (m == 0 && n == j + 1 - i, p0 * p_f),
                (m == 1 && n == 2, p1 * p_s),
                (n == j + 2 - i && (!repaired || m == 1), p1 * p_f),
            ]
        }
        DriftModel::Deterministic(_) => {
            return Err(Error::BadParameter(
                "constant drift has no joint case table".into(),
            ))
        }
    };
    Ok(cases
        .iter()
        .position(|(hit, _)| *hit)
        .map_or((0.0, None), |c| (cases[c].1, Some(c + 1))))
}

/// Compare every transition out of states whose successors are not folded
/// into the top bucket. Returns the disagreeing entries.
pub fn compare_with_tables(
    matrix: &TransitionMatrix,
    model: &DriftModel,
    ch: Channel,
    reading: TableReading,
) -> Result<Vec<TableMismatch>> {
    let (lo, hi) = model.drift_range();
    let span = (hi - lo) as u64;
    let mut out = Vec::new();
    for &from in matrix.states() {
        if from.aoi + span + 1 > matrix.i_max() as u64 {
            continue;
        }
        for &to in matrix.states() {
            let generated = matrix.prob(from, to);
            let (table, case) = table_prob(model, ch, from, to, reading)?;
            if (table - generated).abs() > 1e-15 {
                out.push(TableMismatch {
                    from,
                    to,
                    table,
                    generated,
                    case,
                });
            }
        }
    }
    Ok(out)
}
