//! Retrospective protocol: explain every item of each sampled user's
//! top-K list with every method and aggregate the control metrics.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{complexity, control_accuracy, mean};
use super::{derive_seed, par_map};
use crate::data::{IdMap, SplitDataset};
use crate::engine::{explain_retrospective, ExplanationRecord, Method, RetroHyperParams, RetroRequest, Status};
use crate::model::{recommend_top_k, ItemId, MaskVector, ScorerParams, SequenceWindow, UserId};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetroEvalConfig {
    pub methods: Vec<Method>,
    pub k_values: Vec<usize>,
    pub sample_size: usize,
    pub seed: u64,
    pub hyper: RetroHyperParams,
    pub exclude_history: bool,
    pub jobs: usize,
}

impl Default for RetroEvalConfig {
    fn default() -> Self {
        RetroEvalConfig {
            methods: Method::ALL.to_vec(),
            k_values: vec![3, 5, 10],
            sample_size: 200,
            seed: 42,
            hyper: RetroHyperParams::default(),
            exclude_history: true,
            jobs: 1,
        }
    }
}

/// One explanation attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetroRow {
    pub user: UserId,
    pub k: usize,
    pub method: Method,
    pub target: ItemId,
    /// 0-based rank of the target in the original list.
    pub target_rank: usize,
    pub status: Status,
    pub revoked: Vec<ItemId>,
    /// Window positions of `revoked`, ascending.
    pub positions: Vec<usize>,
    pub effective_length: usize,
    pub iterations: usize,
    /// Only set for successes.
    pub complexity: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Aggregates for one (method, K) cell. Complexity and accuracy average
/// over successes; fidelity is successes over attempts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub k: usize,
    pub attempts: usize,
    pub successes: usize,
    pub fidelity: f64,
    pub complexity: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetroReport {
    pub users: Vec<UserId>,
    pub rows: Vec<RetroRow>,
    pub summary: Vec<MethodSummary>,
}

/// Samples `sample_size` users (without replacement, seeded) and
/// evaluates every configured method at every K.
pub fn retrospective_eval(params: &ScorerParams, data: &SplitDataset, config: &RetroEvalConfig) -> Result<RetroReport> {
    if !params.is_trained() {
        return Err(Error::Untrained);
    }
    let windows = sample_windows(params, data, config.sample_size, config.seed)?;
    evaluate_windows(params, &windows, config)
}

/// `n` users drawn without replacement by `seed`, in id order, each with
/// the window ending before their test item.
pub fn sample_windows(
    params: &ScorerParams,
    data: &SplitDataset,
    n: usize,
    seed: u64,
) -> Result<Vec<(UserId, SequenceWindow)>> {
    if n > data.users.len() {
        return Err(Error::Precondition(format!(
            "sample size {} exceeds the {} available users",
            n,
            data.users.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.users.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen: Vec<usize> = order[..n].to_vec();
    chosen.sort_unstable();
    Ok(chosen
        .iter()
        .map(|&i| {
            let u = &data.users[i];
            (u.user, SequenceWindow::from_history(&u.before_test(), params.window()))
        })
        .collect())
}

/// The protocol over explicit windows.
pub fn evaluate_windows(
    params: &ScorerParams,
    windows: &[(UserId, SequenceWindow)],
    config: &RetroEvalConfig,
) -> Result<RetroReport> {
    let per_user = par_map(config.jobs, windows, |(user, window)| user_rows(params, *user, window, config));
    let mut rows = Vec::new();
    for r in per_user {
        rows.extend(r?);
    }
    let summary = summarize(&rows, &config.methods, &config.k_values);
    Ok(RetroReport {
        users: windows.iter().map(|(u, _)| *u).collect(),
        rows,
        summary,
    })
}

fn user_rows(params: &ScorerParams, user: UserId, window: &SequenceWindow, config: &RetroEvalConfig) -> Result<Vec<RetroRow>> {
    let mut rows = Vec::new();
    let len = window.effective_length();
    if len == 0 {
        return Ok(rows);
    }
    let empty = MaskVector::binary(window.capacity());
    for &k in &config.k_values {
        let original = recommend_top_k(params, window, &empty, k, config.exclude_history)?;
        for (rank, target) in original.items().enumerate() {
            let req = RetroRequest::new(window.clone(), target, k)
                .with_hyper(config.hyper.clone())
                .with_exclude_history(config.exclude_history);
            for &method in &config.methods {
                let seed = derive_seed(config.seed, &[u64::from(user.0), k as u64, u64::from(target.0)]);
                let rec = explain_retrospective(params, &req, method, seed)?;
                rows.push(row(params, user, k, rank, window, &original, &rec, config.exclude_history)?);
            }
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn row(
    params: &ScorerParams,
    user: UserId,
    k: usize,
    rank: usize,
    window: &SequenceWindow,
    original: &crate::model::RecommendationList,
    rec: &ExplanationRecord,
    exclude_history: bool,
) -> Result<RetroRow> {
    let target = rec.target.expect("retrospective records have a target");
    let (complexity, accuracy) = if rec.is_success() {
        let after = recommend_top_k(params, window, &rec.final_mask, k, exclude_history)?;
        (
            Some(complexity(&rec.final_mask, window.effective_length())?),
            Some(control_accuracy(original, &after, &[target])?),
        )
    } else {
        (None, None)
    };
    Ok(RetroRow {
        user,
        k,
        method: rec.method.expect("retrospective records have a method"),
        target,
        target_rank: rank,
        status: rec.status,
        revoked: rec.revoked_items(),
        positions: rec.revoked_positions(),
        effective_length: window.effective_length(),
        iterations: rec.iterations,
        complexity,
        accuracy,
    })
}

pub fn summarize(rows: &[RetroRow], methods: &[Method], k_values: &[usize]) -> Vec<MethodSummary> {
    let mut out = Vec::new();
    for &k in k_values {
        for &method in methods {
            let cell: Vec<&RetroRow> = rows.iter().filter(|r| r.k == k && r.method == method).collect();
            let comp: Vec<f64> = cell.iter().filter_map(|r| r.complexity).collect();
            let acc: Vec<f64> = cell.iter().filter_map(|r| r.accuracy).collect();
            let attempts = cell.len();
            out.push(MethodSummary {
                method,
                k,
                attempts,
                successes: comp.len(),
                fidelity: if attempts == 0 { 0.0 } else { comp.len() as f64 / attempts as f64 },
                complexity: mean(&comp),
                accuracy: mean(&acc),
            });
        }
    }
    out
}

impl RetroReport {
    pub fn cell(&self, method: Method, k: usize) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method && s.k == k)
    }

    /// Per-attempt rows. Header:
    /// `user,k,method,target,target_rank,status,n_revoked,effective_length,iterations,complexity,accuracy,revoked`
    /// with ids in dense form, `revoked` space-separated and empty metric
    /// fields for failures.
    pub fn rows_csv(&self) -> String {
        self.rows_csv_with(&|u| u.to_string(), &|i| i.to_string())
    }

    /// [`Self::rows_csv`] with the original user and item ids.
    pub fn rows_csv_raw(&self, ids: &IdMap) -> String {
        self.rows_csv_with(&|u| ids.user_raw(u).to_string(), &|i| ids.item_raw(i).to_string())
    }

    fn rows_csv_with(&self, user: &dyn Fn(UserId) -> String, item: &dyn Fn(ItemId) -> String) -> String {
        let mut s = String::from(
            "user,k,method,target,target_rank,status,n_revoked,effective_length,iterations,complexity,accuracy,revoked\n",
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            let revoked: Vec<String> = r.revoked.iter().map(|&i| item(i)).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                user(r.user),
                r.k,
                r.method,
                item(r.target),
                r.target_rank,
                if r.status == Status::Success { "success" } else { "failure" },
                r.revoked.len(),
                r.effective_length,
                r.iterations,
                opt(r.complexity),
                opt(r.accuracy),
                revoked.join(" ")
            );
        }
        s
    }

    /// Header: `method,k,attempts,successes,fidelity,complexity,accuracy`.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("method,k,attempts,successes,fidelity,complexity,accuracy\n");
        for c in &self.summary {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                c.method, c.k, c.attempts, c.successes, c.fidelity, c.complexity, c.accuracy
            );
        }
        s
    }

    /// Methods as rows, complexity and accuracy per K as columns (percent).
    pub fn table(&self) -> String {
        let mut ks: Vec<usize> = self.summary.iter().map(|c| c.k).collect();
        ks.dedup();
        let mut methods: Vec<Method> = self.summary.iter().map(|c| c.method).collect();
        methods.sort_unstable();
        methods.dedup();
        let mut s = format!("{:<12}", "method");
        for k in &ks {
            let _ = write!(s, " {:>9} {:>9} {:>9}", format!("C@{k}"), format!("A@{k}"), format!("F@{k}"));
        }
        s.push('\n');
        for m in methods {
            let _ = write!(s, "{:<12}", m.as_str());
            for &k in &ks {
                match self.cell(m, k) {
                    Some(c) => {
                        let _ = write!(
                            s,
                            " {:>8.2}% {:>8.2}% {:>8.2}%",
                            c.complexity * 100.0,
                            c.accuracy * 100.0,
                            c.fidelity * 100.0
                        );
                    }
                    None => s.push_str(&format!(" {:>9} {:>9} {:>9}", "-", "-", "-")),
                }
            }
            s.push('\n');
        }
        let _ = writeln!(s, "{} users, C = complexity, A = accuracy (successes only), F = fidelity", self.users.len());
        s
    }
}
