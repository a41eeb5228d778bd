//! Prospective protocol: simulate accepting or revoking the interaction
//! that follows the training data and measure the effect on predicting
//! the test item.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::par_map;
use super::ranking::test_rank;
use crate::data::{IdMap, SplitDataset, UserSplit};
use crate::engine::prospective_explanation;
use crate::model::{ItemId, MaskVector, ScorerParams, SequenceWindow, UserId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortMetrics {
    pub users: usize,
    pub ndcg: f64,
    pub hit_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProspectiveRow {
    pub user: UserId,
    /// The simulated current interaction; `None` when M = 0.
    pub current: Option<ItemId>,
    pub added: Vec<ItemId>,
    /// Added items are disjoint from the simulation set.
    pub target: bool,
    pub keep_rank: usize,
    pub revoke_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProspectiveReport {
    pub simulation_size: usize,
    pub k: usize,
    pub eval_k: usize,
    pub excluded_users: usize,
    pub rows: Vec<ProspectiveRow>,
    pub all_keep: CohortMetrics,
    pub all_revoke: CohortMetrics,
    pub target_keep: CohortMetrics,
    pub target_revoke: CohortMetrics,
}

/// The history the test item is predicted from. The current interaction,
/// when kept, sits between the base sequence and the rest of the
/// simulation set; when revoked it is left out.
pub fn prediction_history(user: &UserSplit, keep: bool) -> Vec<ItemId> {
    let mut h = user.base();
    if let Some((current, future)) = user.simulation.split_first() {
        if keep {
            h.push(*current);
        }
        h.extend(future);
    }
    h
}

/// Runs the four-condition comparison. `k` sizes the lists used for the
/// prospective explanation; `eval_k` is the NDCG / hit-rate cutoff.
pub fn prospective_simulation(
    params: &ScorerParams,
    data: &SplitDataset,
    k: usize,
    eval_k: usize,
    jobs: usize,
) -> Result<ProspectiveReport> {
    if !params.is_trained() {
        return Err(Error::Untrained);
    }
    let rows = par_map(jobs, &data.users, |u| user_row(params, u, k));
    let rows: Vec<ProspectiveRow> = rows.into_iter().collect::<Result<_>>()?;
    let cohort = |target_only: bool, keep: bool| {
        let ranks: Vec<usize> = rows
            .iter()
            .filter(|r| !target_only || r.target)
            .map(|r| if keep { r.keep_rank } else { r.revoke_rank })
            .collect();
        CohortMetrics::from_ranks(&ranks, eval_k)
    };
    Ok(ProspectiveReport {
        simulation_size: data.simulation_size,
        k,
        eval_k,
        excluded_users: data.excluded_users.len(),
        all_keep: cohort(false, true),
        all_revoke: cohort(false, false),
        target_keep: cohort(true, true),
        target_revoke: cohort(true, false),
        rows,
    })
}

fn user_row(params: &ScorerParams, u: &UserSplit, k: usize) -> Result<ProspectiveRow> {
    let (current, added, target) = match u.simulation.first() {
        Some(&current) => {
            let window = SequenceWindow::from_history(&u.base(), params.window());
            let mask = MaskVector::binary(window.capacity());
            let rec = prospective_explanation(params, &window, &mask, current, k, true)?;
            let target = rec.added_items.iter().all(|i| !u.simulation.contains(i));
            (Some(current), rec.added_items, target)
        }
        None => (None, Vec::new(), false),
    };
    Ok(ProspectiveRow {
        user: u.user,
        current,
        added,
        target,
        keep_rank: test_rank(params, &prediction_history(u, true), u.test)?,
        revoke_rank: test_rank(params, &prediction_history(u, false), u.test)?,
    })
}

impl ProspectiveReport {
    /// Header: `user,current,target,keep_rank,revoke_rank,added`, dense ids.
    pub fn rows_csv(&self) -> String {
        self.rows_csv_with(&|u| u.to_string(), &|i| i.to_string())
    }

    /// [`Self::rows_csv`] with the original user and item ids.
    pub fn rows_csv_raw(&self, ids: &IdMap) -> String {
        self.rows_csv_with(&|u| ids.user_raw(u).to_string(), &|i| ids.item_raw(i).to_string())
    }

    fn rows_csv_with(&self, user: &dyn Fn(UserId) -> String, item: &dyn Fn(ItemId) -> String) -> String {
        let mut s = String::from("user,current,target,keep_rank,revoke_rank,added\n");
        for r in &self.rows {
            let added: Vec<String> = r.added.iter().map(|&i| item(i)).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                user(r.user),
                r.current.map(item).unwrap_or_default(),
                r.target,
                r.keep_rank,
                r.revoke_rank,
                added.join(" ")
            );
        }
        s
    }

    /// Header: `cohort,condition,users,ndcg,hit_rate`.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("cohort,condition,users,ndcg,hit_rate\n");
        for (cohort, cond, m) in self.cells() {
            let _ = writeln!(s, "{cohort},{cond},{},{:.6},{:.6}", m.users, m.ndcg, m.hit_rate);
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<8} {:<8} {:>6} {:>10} {:>10}\n",
            "cohort", "action", "users",
            format!("NDCG@{}", self.eval_k),
            format!("HR@{}", self.eval_k)
        );
        for (cohort, cond, m) in self.cells() {
            let _ = writeln!(s, "{cohort:<8} {cond:<8} {:>6} {:>10.4} {:>10.4}", m.users, m.ndcg, m.hit_rate);
        }
        let _ = writeln!(s, "M = {}, {} users excluded as too short", self.simulation_size, self.excluded_users);
        s
    }

    fn cells(&self) -> [(&'static str, &'static str, CohortMetrics); 4] {
        [
            ("all", "keep", self.all_keep),
            ("all", "revoke", self.all_revoke),
            ("target", "keep", self.target_keep),
            ("target", "revoke", self.target_revoke),
        ]
    }
}
