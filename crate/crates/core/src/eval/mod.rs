//! Controllability and ranking metrics, the baselines and the evaluation
//! protocols.

pub mod ablation;
pub mod metrics;
pub mod prospective;
pub mod ranking;
pub mod retro;

pub use ablation::{ablation_sweep, SweepParam, SweepPoint, SweepReport};
pub use metrics::{complexity, control_accuracy, hit_rate_at_k, ndcg_at_k, ndcg_from_rank};
pub use prospective::{prospective_simulation, CohortMetrics, ProspectiveReport, ProspectiveRow};
pub use ranking::{evaluate_model, evaluate_popularity};
pub use retro::{evaluate_windows, retrospective_eval, sample_windows, summarize, MethodSummary, RetroEvalConfig, RetroReport, RetroRow};

pub use crate::engine::{random_retrospective as baseline_random, similarity_retrospective as baseline_similarity};

/// Decorrelated per-job seed from a root seed and job coordinates.
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    let mut x = root;
    for &p in parts {
        x = splitmix64(x ^ splitmix64(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    x
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f` over `items` on `jobs` threads, returning results in input order.
pub(crate) fn par_map<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("falling back to one thread: {e}");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests;
