//! State-dependent randomized spending rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums when a policy is built from user data.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// `omega[i][j]` is the probability of spending `j` energy packets in an
/// idle slot that starts with `i` packets in the buffer.
///
/// The matrix is square with `energy_capacity + 1` rows. Entries above the
/// diagonal are zero, every row sums to one and row 0 is always `[1, 0, ..]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct AccessPolicy {
    omega: Vec<Vec<f64>>,
}

impl AccessPolicy {
    /// Accepts either square rows or lower-triangular rows (row `i` of
    /// length `i + 1`).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidPolicy("policy has no rows".into()));
        }
        let mut omega = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n && row.len() != i + 1 {
                return Err(Error::InvalidPolicy(format!(
                    "row {i} has {} entries, expected {} or {n}",
                    row.len(),
                    i + 1
                )));
            }
            let mut full = row;
            full.resize(n, 0.0);
            for (j, &w) in full.iter().enumerate() {
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidPolicy(format!(
                        "omega[{i}][{j}] = {w} is not a probability"
                    )));
                }
                if j > i && w != 0.0 {
                    return Err(Error::InvalidPolicy(format!(
                        "omega[{i}][{j}] = {w}: cannot spend more than the {i} stored packets"
                    )));
                }
            }
            let sum: f64 = full.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidPolicy(format!("row {i} sums to {sum}, not 1")));
            }
            omega.push(full);
        }
        Ok(AccessPolicy { omega })
    }

    /// Never transmit.
    pub fn silent(energy_capacity: usize) -> Self {
        Self::deterministic(&vec![0; energy_capacity + 1]).expect("silent policy is valid")
    }

    /// One spend level per buffer state; `actions[i] <= i`.
    pub fn deterministic(actions: &[usize]) -> Result<Self> {
        let n = actions.len();
        if n == 0 {
            return Err(Error::InvalidPolicy("policy has no rows".into()));
        }
        let mut omega = vec![vec![0.0; n]; n];
        for (i, &j) in actions.iter().enumerate() {
            if j > i {
                return Err(Error::InvalidPolicy(format!(
                    "state {i} cannot spend {j} packets"
                )));
            }
            omega[i][j] = 1.0;
        }
        Ok(AccessPolicy { omega })
    }

    /// Number of buffer states covered.
    pub fn num_states(&self) -> usize {
        self.omega.len()
    }

    pub fn energy_capacity(&self) -> usize {
        self.omega.len() - 1
    }

    pub fn prob(&self, state: usize, spend: usize) -> f64 {
        self.omega[state][spend]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.omega[state]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.omega
    }

    /// Spend level of each state when every row is a unit vector.
    pub fn actions(&self) -> Option<Vec<usize>> {
        self.omega
            .iter()
            .map(|row| {
                let j = row.iter().position(|&w| w == 1.0)?;
                row.iter()
                    .enumerate()
                    .all(|(k, &w)| k == j || w == 0.0)
                    .then_some(j)
            })
            .collect()
    }

    /// Short identifier for tables: `d0-1-1-2` lists the spend level of each
    /// state of a deterministic policy; randomized policies get `r` plus a
    /// hash of their entries.
    pub fn id(&self) -> String {
        match self.actions() {
            Some(actions) => {
                let parts: Vec<String> = actions.iter().map(usize::to_string).collect();
                format!("d{}", parts.join("-"))
            }
            None => {
                // FNV-1a over the raw bits, stable across platforms.
                let mut h: u64 = 0xcbf2_9ce4_8422_2325;
                for w in self.omega.iter().flatten() {
                    for b in w.to_bits().to_le_bytes() {
                        h ^= b as u64;
                        h = h.wrapping_mul(0x0100_0000_01b3);
                    }
                }
                format!("r{h:016x}")
            }
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for AccessPolicy {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        AccessPolicy::from_rows(rows)
    }
}

impl From<AccessPolicy> for Vec<Vec<f64>> {
    fn from(p: AccessPolicy) -> Self {
        p.omega
    }
}
