use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// States x actions table of action probabilities; each row is a simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    state_count: usize,
    action_count: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    pub fn uniform(state_count: usize, action_count: usize) -> Self {
        assert!(state_count > 0 && action_count > 0);
        let p = 1.0 / action_count as f64;
        Self { state_count, action_count, probs: vec![p; state_count * action_count] }
    }

    /// Builds a table from explicit rows; each row is renormalised.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let action_count = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.is_empty() || action_count == 0 {
            return Err(Error::arg("rows", "policy table must be non-empty"));
        }
        let mut probs = Vec::with_capacity(rows.len() * action_count);
        for row in &rows {
            let sum: f64 = row.iter().sum();
            if row.len() != action_count || row.iter().any(|p| p.is_nan() || *p < 0.0) || sum.is_nan() || sum <= 0.0 {
                return Err(Error::arg("rows", "each row needs equal length, non-negative entries, positive sum"));
            }
            probs.extend(row.iter().map(|p| p / sum));
        }
        Ok(Self { state_count: rows.len(), action_count, probs })
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let n = self.action_count;
        &self.probs[state * n..(state + 1) * n]
    }

    fn row_mut(&mut self, state: usize) -> &mut [f64] {
        let n = self.action_count;
        &mut self.probs[state * n..(state + 1) * n]
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.row(state)[action]
    }

    pub fn max_prob(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(0.0, f64::max)
    }

    /// Applies `times` rounds of `pi(a*) += beta (1 - pi(a*))`,
    /// `pi(a) -= beta pi(a)` for every other action.
    pub fn boost(&mut self, state: usize, action: usize, beta: f64, times: u32) {
        let row = self.row_mut(state);
        for _ in 0..times {
            for (a, p) in row.iter_mut().enumerate() {
                if a == action {
                    *p += beta * (1.0 - *p);
                } else {
                    *p -= beta * *p;
                }
            }
        }
        renormalise(row);
    }

    /// Applies `times` rounds of `pi(a) -= beta pi(a)` for the given action,
    /// handing the removed mass to the other actions in proportion to their
    /// current probabilities (uniformly if they are all zero).
    pub fn demote(&mut self, state: usize, action: usize, beta: f64, times: u32) {
        let row = self.row_mut(state);
        let others = row.len() - 1;
        if others == 0 {
            return;
        }
        for _ in 0..times {
            let removed = beta * row[action];
            let rest = 1.0 - row[action];
            row[action] -= removed;
            for (a, p) in row.iter_mut().enumerate() {
                if a == action {
                    continue;
                }
                if rest > 0.0 {
                    *p += removed * *p / rest;
                } else {
                    *p += removed / others as f64;
                }
            }
        }
        renormalise(row);
    }

    /// Samples an action from the state's row.
    pub fn select<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let row = self.row(state);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (a, &p) in row.iter().enumerate() {
            if p > 0.0 {
                last_positive = a;
                acc += p;
                if u < acc {
                    return a;
                }
            }
        }
        last_positive
    }

    /// Writes `state_index,action_index,probability` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "state_index,action_index,probability")?;
        for s in 0..self.state_count {
            for (a, p) in self.row(s).iter().enumerate() {
                writeln!(out, "{s},{a},{p:e}")?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<policy>", e))?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let bad = || Error::arg("policy csv", format!("malformed line {}", i + 1));
            let mut parts = line.split(',');
            let s = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
            let a = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
            let p = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
            entries.push((s, a, p));
        }
        let states = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let actions = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        let mut rows = vec![vec![0.0; actions]; states];
        for (s, a, p) in entries {
            rows[s][a] = p;
        }
        Self::from_rows(rows)
    }
}

fn renormalise(row: &mut [f64]) {
    for p in row.iter_mut() {
        *p = p.clamp(0.0, 1.0);
    }
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|p| *p /= sum);
    }
}

/// Direct policy-search update: a positive reward boosts the action `r`
/// times, a negative reward demotes it `|r|` times.
pub fn update_policy(policy: &mut PolicyTable, state: usize, action: usize, reward: i32, beta: f64) {
    match reward.signum() {
        1 => policy.boost(state, action, beta, reward.unsigned_abs()),
        -1 => policy.demote(state, action, beta, reward.unsigned_abs()),
        _ => {}
    }
}

pub fn select_action<R: Rng + ?Sized>(policy: &PolicyTable, state: usize, rng: &mut R) -> usize {
    policy.select(state, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_boost_from_uniform() {
        let mut p = PolicyTable::uniform(1, 3);
        update_policy(&mut p, 0, 0, 1, 0.1);
        assert_abs_diff_eq!(p.row(0)[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(p.row(0)[1], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p.row(0)[2], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn double_boost_matches_iterated_update() {
        // hand-iterated: 1/3 -> 0.4 -> 0.4 + 0.1 * 0.6 = 0.46; others 0.3 -> 0.27
        let mut p = PolicyTable::uniform(1, 3);
        update_policy(&mut p, 0, 0, 2, 0.1);
        assert_abs_diff_eq!(p.row(0)[0], 0.46, epsilon = 1e-12);
        assert_abs_diff_eq!(p.row(0)[1], 0.27, epsilon = 1e-12);
        assert_abs_diff_eq!(p.row(0)[2], 0.27, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_row_is_fixed_point() {
        let mut p = PolicyTable::from_rows(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        update_policy(&mut p, 0, 0, 4, 0.2);
        assert_eq!(p.row(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn demotion_redistributes_proportionally() {
        let mut p = PolicyTable::from_rows(vec![vec![0.5, 0.3, 0.2]]).unwrap();
        update_policy(&mut p, 0, 0, -1, 0.1);
        // 0.05 removed, split 3:2 between the others
        assert_abs_diff_eq!(p.row(0)[0], 0.45, epsilon = 1e-12);
        assert_abs_diff_eq!(p.row(0)[1], 0.33, epsilon = 1e-12);
        assert_abs_diff_eq!(p.row(0)[2], 0.22, epsilon = 1e-12);
    }

    #[test]
    fn demoting_a_certain_action_spreads_uniformly() {
        let mut p = PolicyTable::from_rows(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        update_policy(&mut p, 0, 0, -1, 0.1);
        assert_abs_diff_eq!(p.row(0)[0], 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(p.row(0)[1], 0.05, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_row_always_selects_its_action() {
        let p = PolicyTable::from_rows(vec![vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| p.select(0, &mut rng) == 2));
    }

    #[test]
    fn uniform_sampling_frequencies() {
        // multinomial check: each count within 3 sigma of n/k
        let p = PolicyTable::uniform(1, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut counts = [0usize; 9];
        for _ in 0..n {
            counts[p.select(0, &mut rng)] += 1;
        }
        let q = 1.0 / 9.0;
        let sigma = (n as f64 * q * (1.0 - q)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * q).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = PolicyTable::uniform(2, 27);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| p.select(1, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn csv_round_trip() {
        let mut p = PolicyTable::uniform(4, 3);
        update_policy(&mut p, 2, 1, 4, 0.15);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = PolicyTable::read_csv(&buf[..]).unwrap();
        for s in 0..4 {
            for a in 0..3 {
                assert_abs_diff_eq!(p.prob(s, a), q.prob(s, a), epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn boost_never_lowers_and_demote_never_raises(
            raw in prop::collection::vec(0.01f64..1.0, 2..10),
            pick in 0usize..10,
            r in 1u32..5,
            beta in 0.05f64..0.2,
        ) {
            let a = pick % raw.len();
            let base = PolicyTable::from_rows(vec![raw]).unwrap();
            let mut up = base.clone();
            up.boost(0, a, beta, r);
            prop_assert!(up.prob(0, a) >= base.prob(0, a) - 1e-15);
            let mut down = base.clone();
            down.demote(0, a, beta, r);
            prop_assert!(down.prob(0, a) <= base.prob(0, a) + 1e-15);
            for t in [&up, &down] {
                prop_assert!((t.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
