//! Goldenshluger-Lepski selection over a finite candidate family.
//!
//! Each rule supplies, for every candidate `m`, a penalty `sigma(m)` and a
//! comparison table `dist[m][m'] = ||f_{m'} - K_{m'}(f_m)||`. The bias proxy is
//! `A(m) = max_{m'} {dist[m][m'] - sigma(m')}_+` and the selected candidate
//! minimizes `A(m) + sigma(m)`.

use serde::Serialize;
use std::cmp::Ordering;

/// Relative tolerance under which two objectives are treated as tied.
pub const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord<C> {
    pub candidate: C,
    pub sigma: f64,
    pub a: f64,
    pub objective: f64,
}

/// Per-candidate record of a selection run plus the winner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace<C> {
    pub records: Vec<TraceRecord<C>>,
    pub chosen_index: usize,
}

impl<C: Clone> SelectionTrace<C> {
    pub fn chosen(&self) -> &C {
        &self.records[self.chosen_index].candidate
    }

    pub fn chosen_record(&self) -> &TraceRecord<C> {
        &self.records[self.chosen_index]
    }

    /// Recomputes the argmin from the stored objectives with the given tie-break.
    pub fn recompute_argmin<F>(&self, prefer: F) -> usize
    where
        F: Fn(&C, &C) -> Ordering,
    {
        let objectives: Vec<f64> = self.records.iter().map(|r| r.objective).collect();
        let cands: Vec<C> = self.records.iter().map(|r| r.candidate.clone()).collect();
        argmin_with_ties(&objectives, |a, b| prefer(&cands[a], &cands[b]))
    }
}

/// `A(m)` for every candidate. `dist(m, m')` is queried for all pairs.
pub fn bias_proxies<D>(sigma: &[f64], dist: D) -> Vec<f64>
where
    D: Fn(usize, usize) -> f64,
{
    (0..sigma.len())
        .map(|m| {
            sigma
                .iter()
                .enumerate()
                .map(|(mp, s)| dist(m, mp) - s)
                .fold(0.0_f64, f64::max)
        })
        .collect()
}

/// Index of the smallest objective. Objectives within [`TIE_RTOL`] of the
/// minimum are tied and resolved by `prefer`, where `Ordering::Less` means the
/// first argument wins.
pub fn argmin_with_ties<P>(objective: &[f64], prefer: P) -> usize
where
    P: Fn(usize, usize) -> Ordering,
{
    assert!(!objective.is_empty());
    let min = objective.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = TIE_RTOL * min.abs().max(f64::MIN_POSITIVE);
    let mut best: Option<usize> = None;
    for (i, &v) in objective.iter().enumerate() {
        if v - min > tol {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) if prefer(i, b) == Ordering::Less => Some(i),
            keep => keep,
        };
    }
    best.expect("at least one candidate attains the minimum")
}

/// Runs the full rule and packages the trace.
pub fn select<C, D, P>(candidates: Vec<C>, sigma: Vec<f64>, dist: D, prefer: P) -> SelectionTrace<C>
where
    D: Fn(usize, usize) -> f64,
    P: Fn(&C, &C) -> Ordering,
{
    assert_eq!(candidates.len(), sigma.len());
    let a = bias_proxies(&sigma, dist);
    let objective: Vec<f64> = a.iter().zip(&sigma).map(|(a, s)| a + s).collect();
    let chosen_index = argmin_with_ties(&objective, |i, j| prefer(&candidates[i], &candidates[j]));
    let records = candidates
        .into_iter()
        .zip(sigma)
        .zip(a.into_iter().zip(objective))
        .map(|((candidate, sigma), (a, objective))| TraceRecord {
            candidate,
            sigma,
            a,
            objective,
        })
        .collect();
    SelectionTrace {
        records,
        chosen_index,
    }
}
